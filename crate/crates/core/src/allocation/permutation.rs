use crate::profile::N_HORIZONS;

/// All 120 orderings of the liquidity horizons, in lexicographic order of
/// horizon columns: row 0 is (10, 20, 40, 60, 120), row 1 swaps the last two,
/// row 119 is fully reversed.
#[derive(Debug, Clone)]
pub struct PermutationTable {
    rows: Vec<[usize; N_HORIZONS]>,
    inverse: Vec<[usize; N_HORIZONS]>,
}

impl Default for PermutationTable {
    fn default() -> Self {
        Self::new()
    }
}

impl PermutationTable {
    pub fn new() -> Self {
        let mut rows = Vec::with_capacity(120);
        let mut p = [0, 1, 2, 3, 4];
        loop {
            rows.push(p);
            if !next_permutation(&mut p) {
                break;
            }
        }
        let inverse = rows
            .iter()
            .map(|row| {
                let mut inv = [0; N_HORIZONS];
                for (col, &h) in row.iter().enumerate() {
                    inv[h] = col;
                }
                inv
            })
            .collect();
        PermutationTable { rows, inverse }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Horizon column placed at position `s` of ordering `r` (0-based).
    pub fn horizon_at(&self, r: usize, s: usize) -> usize {
        self.rows[r][s]
    }

    /// Position of horizon column `j` within ordering `r` (0-based).
    pub fn position_of(&self, r: usize, j: usize) -> usize {
        self.inverse[r][j]
    }

    pub fn row(&self, r: usize) -> &[usize; N_HORIZONS] {
        &self.rows[r]
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (0..p.len() - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..p.len()).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
