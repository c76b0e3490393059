//! Loss data model: raw 10-day losses per (position, risk class, liquidity
//! horizon, scenario) and the liquidity-horizon adjusted risk profiles built
//! from them.
//!
//! Sign convention: positive values are losses.

use serde::{Deserialize, Serialize};

use crate::error::{FrtbError, Result};

/// Number of modellable risk-factor classes.
pub const N_CLASSES: usize = 5;
/// Profile rows: the five classes plus the unconstrained row.
pub const N_ROWS: usize = 6;
/// Number of liquidity horizons.
pub const N_HORIZONS: usize = 5;
/// Row index of the unconstrained (netted across classes) row.
pub const UNCONSTRAINED: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskClass {
    CM,
    CR,
    EQ,
    FX,
    IR,
}

impl RiskClass {
    pub const ALL: [RiskClass; N_CLASSES] = [
        RiskClass::CM,
        RiskClass::CR,
        RiskClass::EQ,
        RiskClass::FX,
        RiskClass::IR,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<RiskClass> {
        Self::ALL.get(i).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            RiskClass::CM => "CM",
            RiskClass::CR => "CR",
            RiskClass::EQ => "EQ",
            RiskClass::FX => "FX",
            RiskClass::IR => "IR",
        }
    }

    pub fn parse(code: &str) -> Result<RiskClass> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.code().eq_ignore_ascii_case(code.trim()))
            .ok_or_else(|| FrtbError::Validation(format!("unknown risk class `{code}`")))
    }
}

/// Label of a profile row, `UNC` for the unconstrained row.
pub fn row_label(row: usize) -> &'static str {
    match RiskClass::from_index(row) {
        Some(c) => c.code(),
        None => "UNC",
    }
}

/// The regulatory liquidity horizons in days, (10, 20, 40, 60, 120).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiquidityLadder {
    horizons: [u32; N_HORIZONS],
}

impl Default for LiquidityLadder {
    fn default() -> Self {
        LiquidityLadder {
            horizons: [10, 20, 40, 60, 120],
        }
    }
}

impl LiquidityLadder {
    pub fn new(horizons: [u32; N_HORIZONS]) -> Result<Self> {
        if horizons[0] != 10 {
            return Err(FrtbError::Validation(
                "first liquidity horizon must be 10 days".into(),
            ));
        }
        if horizons.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FrtbError::Validation(
                "liquidity horizons must be strictly increasing".into(),
            ));
        }
        Ok(LiquidityLadder { horizons })
    }

    pub fn horizons(&self) -> [u32; N_HORIZONS] {
        self.horizons
    }

    pub fn days(&self, j: usize) -> u32 {
        self.horizons[j]
    }

    /// Column of a horizon given in days.
    pub fn position_of(&self, days: u32) -> Option<usize> {
        self.horizons.iter().position(|&h| h == days)
    }

    /// `sqrt((LH_j - LH_{j-1}) / 10)` with `LH_0 = 0`.
    pub fn scale(&self, j: usize) -> f64 {
        let prev = if j == 0 { 0 } else { self.horizons[j - 1] };
        (f64::from(self.horizons[j] - prev) / 10.0).sqrt()
    }
}

/// How raw 10-day losses are mapped onto adjusted buckets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BucketConvention {
    /// `X_n(i,j) = scale_j * sum_{k >= j} raw_n(i,k)`.
    #[default]
    Cascade,
    /// Every raw bucket is treated as its own exposure:
    /// `X_n(i,j) = scale_j * raw_n(i,j)`. Used by the hedging and
    /// stress-scaling studies, which view buckets as separate positions.
    Isolated,
}

impl BucketConvention {
    /// Raw horizons `k` that feed adjusted bucket `j`.
    pub fn components(self, j: usize) -> std::ops::Range<usize> {
        match self {
            BucketConvention::Cascade => j..N_HORIZONS,
            BucketConvention::Isolated => j..j + 1,
        }
    }
}

/// Raw 10-day losses indexed by (position, class, horizon, scenario).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioCube {
    position_ids: Vec<String>,
    n_scenarios: usize,
    convention: BucketConvention,
    raw: Vec<f64>,
}

impl ScenarioCube {
    /// `raw` is laid out position-major with the scenario index innermost.
    pub fn new(
        position_ids: Vec<String>,
        n_scenarios: usize,
        convention: BucketConvention,
        raw: Vec<f64>,
    ) -> Result<Self> {
        if n_scenarios == 0 {
            return Err(FrtbError::Validation("scenario count must be >= 1".into()));
        }
        if position_ids.is_empty() {
            return Err(FrtbError::Validation("at least one position required".into()));
        }
        let expected = position_ids.len() * N_CLASSES * N_HORIZONS * n_scenarios;
        if raw.len() != expected {
            return Err(FrtbError::Shape(format!(
                "raw cube has {} entries, expected {expected}",
                raw.len()
            )));
        }
        if let Some(pos) = raw.iter().position(|x| !x.is_finite()) {
            return Err(FrtbError::Validation(format!(
                "non-finite loss at flat index {pos}"
            )));
        }
        Ok(ScenarioCube {
            position_ids,
            n_scenarios,
            convention,
            raw,
        })
    }

    pub fn zeros(n_positions: usize, n_scenarios: usize, convention: BucketConvention) -> Result<Self> {
        let ids = (1..=n_positions).map(|n| format!("P{n}")).collect();
        Self::new(
            ids,
            n_scenarios,
            convention,
            vec![0.0; n_positions * N_CLASSES * N_HORIZONS * n_scenarios],
        )
    }

    pub fn n_positions(&self) -> usize {
        self.position_ids.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    pub fn position_ids(&self) -> &[String] {
        &self.position_ids
    }

    pub fn convention(&self) -> BucketConvention {
        self.convention
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    fn offset(&self, n: usize, i: usize, k: usize) -> usize {
        ((n * N_CLASSES + i) * N_HORIZONS + k) * self.n_scenarios
    }

    pub fn bucket(&self, n: usize, i: usize, k: usize) -> &[f64] {
        let o = self.offset(n, i, k);
        &self.raw[o..o + self.n_scenarios]
    }

    pub fn bucket_mut(&mut self, n: usize, i: usize, k: usize) -> &mut [f64] {
        let o = self.offset(n, i, k);
        let m = self.n_scenarios;
        &mut self.raw[o..o + m]
    }

    pub fn is_zero_bucket(&self, n: usize, i: usize, k: usize) -> bool {
        self.bucket(n, i, k).iter().all(|&x| x == 0.0)
    }

    /// Every loss multiplied by `a`.
    pub fn scaled(&self, a: f64) -> ScenarioCube {
        let mut out = self.clone();
        out.raw.iter_mut().for_each(|x| *x *= a);
        out
    }

    /// Collapse the positions listed in `group` into a single position placed
    /// first; the remaining positions keep their relative order.
    pub fn merge_positions(&self, group: &[usize], merged_id: &str) -> Result<ScenarioCube> {
        if group.is_empty() || group.iter().any(|&n| n >= self.n_positions()) {
            return Err(FrtbError::Validation("invalid position group".into()));
        }
        let rest: Vec<usize> = (0..self.n_positions()).filter(|n| !group.contains(n)).collect();
        let block = N_CLASSES * N_HORIZONS * self.n_scenarios;
        let mut raw = vec![0.0; block];
        for &n in group {
            let src = &self.raw[n * block..(n + 1) * block];
            raw.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        let mut ids = vec![merged_id.to_string()];
        for &n in &rest {
            raw.extend_from_slice(&self.raw[n * block..(n + 1) * block]);
            ids.push(self.position_ids[n].clone());
        }
        ScenarioCube::new(ids, self.n_scenarios, self.convention, raw)
    }

    /// Net 10-day loss per scenario, `sum_{n,i,k} raw`.
    pub fn net_loss(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_scenarios];
        for chunk in self.raw.chunks(self.n_scenarios) {
            out.iter_mut().zip(chunk).for_each(|(o, x)| *o += x);
        }
        out
    }
}

/// Liquidity-horizon adjusted, extended risk profile of a portfolio.
#[derive(Debug, Clone)]
pub struct RiskProfile {
    raw: ScenarioCube,
    ladder: LiquidityLadder,
    adjusted: Vec<f64>,
    portfolio: Vec<f64>,
}

impl RiskProfile {
    pub fn raw(&self) -> &ScenarioCube {
        &self.raw
    }

    pub fn ladder(&self) -> &LiquidityLadder {
        &self.ladder
    }

    pub fn convention(&self) -> BucketConvention {
        self.raw.convention
    }

    pub fn n_positions(&self) -> usize {
        self.raw.n_positions()
    }

    pub fn n_scenarios(&self) -> usize {
        self.raw.n_scenarios
    }

    /// `X_n(i,j)` for `i` in `0..6`.
    pub fn position_bucket(&self, n: usize, i: usize, j: usize) -> &[f64] {
        let m = self.n_scenarios();
        let o = ((n * N_ROWS + i) * N_HORIZONS + j) * m;
        &self.adjusted[o..o + m]
    }

    /// `X(i,j) = sum_n X_n(i,j)`.
    pub fn bucket(&self, i: usize, j: usize) -> &[f64] {
        let m = self.n_scenarios();
        let o = (i * N_HORIZONS + j) * m;
        &self.portfolio[o..o + m]
    }

    /// Scenario vector of the component `scale_j * raw_n(class, k)` of
    /// `X_n(row, j)`. For the unconstrained row, `class` selects which
    /// class contributes.
    pub fn component(&self, n: usize, class: usize, j: usize, k: usize) -> Vec<f64> {
        let s = self.ladder.scale(j);
        self.raw.bucket(n, class, k).iter().map(|x| s * x).collect()
    }

    /// Raw horizons `k` feeding adjusted bucket `j`.
    pub fn components(&self, j: usize) -> std::ops::Range<usize> {
        self.raw.convention.components(j)
    }
}

/// Build the extended risk profile. Rows 0..5 follow the liquidity
/// adjustment, row 5 is their sum, the portfolio sums positions in order.
pub fn adjust(raw: &ScenarioCube, ladder: &LiquidityLadder) -> RiskProfile {
    let m = raw.n_scenarios;
    let np = raw.n_positions();
    let mut adjusted = vec![0.0; np * N_ROWS * N_HORIZONS * m];
    for n in 0..np {
        for i in 0..N_CLASSES {
            for j in 0..N_HORIZONS {
                let scale = ladder.scale(j);
                let o = ((n * N_ROWS + i) * N_HORIZONS + j) * m;
                let dst = &mut adjusted[o..o + m];
                for k in raw.convention.components(j) {
                    dst.iter_mut()
                        .zip(raw.bucket(n, i, k))
                        .for_each(|(d, x)| *d += x);
                }
                dst.iter_mut().for_each(|d| *d *= scale);
            }
        }
        for j in 0..N_HORIZONS {
            for s in 0..m {
                let mut acc = 0.0;
                for i in 0..N_CLASSES {
                    acc += adjusted[((n * N_ROWS + i) * N_HORIZONS + j) * m + s];
                }
                adjusted[((n * N_ROWS + UNCONSTRAINED) * N_HORIZONS + j) * m + s] = acc;
            }
        }
    }
    let block = N_ROWS * N_HORIZONS * m;
    let mut portfolio = vec![0.0; block];
    for n in 0..np {
        portfolio
            .iter_mut()
            .zip(&adjusted[n * block..(n + 1) * block])
            .for_each(|(p, x)| *p += x);
    }
    RiskProfile {
        raw: raw.clone(),
        ladder: *ladder,
        adjusted,
        portfolio,
    }
}

/// Bucket-level selection of the reduced risk-factor set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedSetMask {
    included: [[bool; N_HORIZONS]; N_CLASSES],
}

impl Default for ReducedSetMask {
    fn default() -> Self {
        Self::full()
    }
}

impl ReducedSetMask {
    pub fn full() -> Self {
        ReducedSetMask {
            included: [[true; N_HORIZONS]; N_CLASSES],
        }
    }

    pub fn new(included: [[bool; N_HORIZONS]; N_CLASSES]) -> Result<Self> {
        let mask = ReducedSetMask { included };
        mask.validate()?;
        Ok(mask)
    }

    /// All buckets except the listed `(class, horizon column)` pairs.
    pub fn excluding(excluded: &[(RiskClass, usize)]) -> Result<Self> {
        let mut included = [[true; N_HORIZONS]; N_CLASSES];
        for &(c, j) in excluded {
            if j >= N_HORIZONS {
                return Err(FrtbError::Validation(format!("horizon column {j} out of range")));
            }
            included[c.index()][j] = false;
        }
        Self::new(included)
    }

    pub fn validate(&self) -> Result<()> {
        if self.included.iter().flatten().any(|&b| b) {
            Ok(())
        } else {
            Err(FrtbError::Validation("reduced-set mask excludes every bucket".into()))
        }
    }

    pub fn is_included(&self, class: usize, j: usize) -> bool {
        self.included[class][j]
    }

    pub fn excluded(&self) -> Vec<(RiskClass, usize)> {
        let mut out = Vec::new();
        for c in RiskClass::ALL {
            for j in 0..N_HORIZONS {
                if !self.included[c.index()][j] {
                    out.push((c, j));
                }
            }
        }
        out
    }
}

/// Zero the raw buckets the mask excludes.
pub fn apply_mask(raw: &ScenarioCube, mask: &ReducedSetMask) -> Result<ScenarioCube> {
    mask.validate()?;
    let mut out = raw.clone();
    for n in 0..raw.n_positions() {
        for i in 0..N_CLASSES {
            for k in 0..N_HORIZONS {
                if !mask.is_included(i, k) {
                    out.bucket_mut(n, i, k).fill(0.0);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(i: usize, values: &[(usize, f64)]) -> ScenarioCube {
        let mut cube = ScenarioCube::zeros(1, 1, BucketConvention::Cascade).unwrap();
        for &(k, x) in values {
            cube.bucket_mut(0, i, k)[0] = x;
        }
        cube
    }

    #[test]
    fn ladder_scales() {
        let l = LiquidityLadder::default();
        let s: Vec<f64> = (0..5).map(|j| l.scale(j)).collect();
        let expect = [1.0, 1.0, 2f64.sqrt(), 2f64.sqrt(), 6f64.sqrt()];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(LiquidityLadder::new([10, 20, 20, 60, 120]).is_err());
        assert!(LiquidityLadder::new([5, 20, 40, 60, 120]).is_err());
    }

    #[test]
    fn zero_cube_adjusts_to_zero() {
        let cube = ScenarioCube::zeros(3, 7, BucketConvention::Cascade).unwrap();
        let p = adjust(&cube, &LiquidityLadder::default());
        assert!(p.adjusted.iter().all(|&x| x == 0.0));
        assert!(p.portfolio.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn longest_horizon_spreads_over_all_columns() {
        let x = 1.7;
        let p = adjust(&single(2, &[(4, x)]), &LiquidityLadder::default());
        let r2 = 2f64.sqrt();
        let expect = [x, x, r2 * x, r2 * x, 6f64.sqrt() * x];
        for j in 0..5 {
            assert!((p.bucket(2, j)[0] - expect[j]).abs() < 1e-14);
            assert_eq!(p.bucket(UNCONSTRAINED, j)[0], p.bucket(2, j)[0]);
        }
    }

    #[test]
    fn hand_summed_telescoping() {
        // raw = 1 at (i,10d) and (i,40d)
        let p = adjust(&single(1, &[(0, 1.0), (2, 1.0)]), &LiquidityLadder::default());
        let expect = [2.0, 1.0, 2f64.sqrt(), 0.0, 0.0];
        for j in 0..5 {
            assert!((p.bucket(1, j)[0] - expect[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn isolated_convention_keeps_buckets_apart() {
        let mut cube = ScenarioCube::zeros(1, 1, BucketConvention::Isolated).unwrap();
        cube.bucket_mut(0, 0, 4)[0] = 1.0;
        let p = adjust(&cube, &LiquidityLadder::default());
        for j in 0..4 {
            assert_eq!(p.bucket(0, j)[0], 0.0);
        }
        assert!((p.bucket(0, 4)[0] - 6f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cube_validation() {
        assert!(ScenarioCube::new(vec!["a".into()], 0, BucketConvention::Cascade, vec![]).is_err());
        assert!(matches!(
            ScenarioCube::new(vec!["a".into()], 2, BucketConvention::Cascade, vec![0.0; 3]),
            Err(FrtbError::Shape(_))
        ));
        let mut raw = vec![0.0; 25];
        raw[3] = f64::NAN;
        assert!(ScenarioCube::new(vec!["a".into()], 1, BucketConvention::Cascade, raw).is_err());
    }

    #[test]
    fn masks() {
        assert!(ReducedSetMask::new([[false; 5]; 5]).is_err());
        let mut cube = ScenarioCube::zeros(2, 3, BucketConvention::Cascade).unwrap();
        for v in cube.raw.iter_mut().enumerate() {
            *v.1 = v.0 as f64 + 1.0;
        }
        assert_eq!(apply_mask(&cube, &ReducedSetMask::full()).unwrap(), cube);

        let set_a = ReducedSetMask::excluding(&[(RiskClass::EQ, 3), (RiskClass::CM, 4)]).unwrap();
        let masked = apply_mask(&cube, &set_a).unwrap();
        for n in 0..2 {
            for i in 0..5 {
                for k in 0..5 {
                    let dropped = (i == 2 && k == 3) || (i == 0 && k == 4);
                    if dropped {
                        assert!(masked.is_zero_bucket(n, i, k));
                    } else {
                        assert_eq!(masked.bucket(n, i, k), cube.bucket(n, i, k));
                    }
                }
            }
        }

        let mut only = [[false; 5]; 5];
        only[4][1] = true;
        let proj = apply_mask(&cube, &ReducedSetMask::new(only).unwrap()).unwrap();
        for n in 0..2 {
            for i in 0..5 {
                for k in 0..5 {
                    assert_eq!(proj.is_zero_bucket(n, i, k), !(i == 4 && k == 1));
                }
            }
        }
    }

    #[test]
    fn merge_keeps_portfolio() {
        let mut cube = ScenarioCube::zeros(3, 2, BucketConvention::Cascade).unwrap();
        for (idx, v) in cube.raw.iter_mut().enumerate() {
            *v = (idx % 7) as f64 - 3.0;
        }
        let merged = cube.merge_positions(&[0, 2], "S").unwrap();
        assert_eq!(merged.n_positions(), 2);
        assert_eq!(merged.position_ids()[1], "P2");
        assert_eq!(merged.net_loss(), cube.net_loss());
    }
}
