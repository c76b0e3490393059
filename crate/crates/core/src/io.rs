//! File formats: scenario cubes as long CSV plus a JSON sidecar, reduced-set
//! masks, ES reports and allocation tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocation::{AllocationTable, Reconciliation};
use crate::error::{FrtbError, Result};
use crate::profile::{
    row_label, BucketConvention, LiquidityLadder, ReducedSetMask, RiskClass, ScenarioCube,
    N_CLASSES, N_HORIZONS, N_ROWS,
};

pub const CUBE_FORMAT_VERSION: u32 = 1;
pub const SIGN_CONVENTION: &str = "positive_is_loss";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CubeRecord {
    position_id: String,
    risk_class: String,
    liquidity_horizon_days: u32,
    scenario_index: usize,
    loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSidecar {
    pub format_version: u32,
    pub n_positions: usize,
    pub n_scenarios: usize,
    pub sign_convention: String,
    pub bucket_convention: BucketConvention,
    pub liquidity_horizons_days: [u32; N_HORIZONS],
    pub position_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
}

impl CubeSidecar {
    pub fn for_cube(cube: &ScenarioCube, ladder: &LiquidityLadder, manifest_hash: Option<&str>) -> Self {
        CubeSidecar {
            format_version: CUBE_FORMAT_VERSION,
            n_positions: cube.n_positions(),
            n_scenarios: cube.n_scenarios(),
            sign_convention: SIGN_CONVENTION.to_string(),
            bucket_convention: cube.convention(),
            liquidity_horizons_days: ladder.horizons(),
            position_ids: cube.position_ids().to_vec(),
            manifest_hash: manifest_hash.map(str::to_string),
        }
    }
}

/// `cube.csv` -> `cube.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

/// Writes the long-format CSV and its sidecar. Zero buckets are written too,
/// so the file is a complete dense listing.
pub fn write_cube(path: &Path, cube: &ScenarioCube, ladder: &LiquidityLadder, manifest_hash: Option<&str>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(h) = manifest_hash {
        writeln!(file, "# manifest_sha256={h}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for (n, id) in cube.position_ids().iter().enumerate() {
        for class in RiskClass::ALL {
            for k in 0..N_HORIZONS {
                for (m, &loss) in cube.bucket(n, class.index(), k).iter().enumerate() {
                    w.serialize(CubeRecord {
                        position_id: id.clone(),
                        risk_class: class.code().to_string(),
                        liquidity_horizon_days: ladder.days(k),
                        scenario_index: m,
                        loss,
                    })?;
                }
            }
        }
    }
    w.flush()?;
    write_json(&sidecar_path(path), &CubeSidecar::for_cube(cube, ladder, manifest_hash))
}

/// Reads a cube. The sidecar next to the CSV, when present, fixes position
/// order, scenario count and bucket convention; otherwise positions keep
/// first-seen order, the count is `max index + 1` and the convention is
/// cascade. Buckets absent from the file are zero.
pub fn read_cube(path: &Path, ladder: &LiquidityLadder) -> Result<ScenarioCube> {
    let side_path = sidecar_path(path);
    let sidecar: Option<CubeSidecar> = if side_path.exists() {
        Some(read_json(&side_path)?)
    } else {
        None
    };
    if let Some(s) = &sidecar {
        if s.sign_convention != SIGN_CONVENTION {
            return Err(FrtbError::Validation(format!(
                "unsupported sign convention {:?}",
                s.sign_convention
            )));
        }
        if s.liquidity_horizons_days != ladder.horizons() {
            return Err(FrtbError::Validation("sidecar horizons differ from the ladder".into()));
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut ids: Vec<String> = sidecar.as_ref().map(|s| s.position_ids.clone()).unwrap_or_default();
    let mut id_index: HashMap<String, usize> = ids.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
    let mut records = Vec::new();
    let mut max_m = 0;
    for rec in reader.deserialize() {
        let rec: CubeRecord = rec?;
        let class = RiskClass::parse(&rec.risk_class)?;
        let k = ladder.position_of(rec.liquidity_horizon_days).ok_or_else(|| {
            FrtbError::Validation(format!("unknown liquidity horizon {}", rec.liquidity_horizon_days))
        })?;
        if !rec.loss.is_finite() {
            return Err(FrtbError::Validation(format!(
                "non-finite loss for {} {} {}d scenario {}",
                rec.position_id, rec.risk_class, rec.liquidity_horizon_days, rec.scenario_index
            )));
        }
        let n = match id_index.get(&rec.position_id) {
            Some(&n) => n,
            None if sidecar.is_some() => {
                return Err(FrtbError::Validation(format!(
                    "position {} missing from sidecar",
                    rec.position_id
                )))
            }
            None => {
                ids.push(rec.position_id.clone());
                id_index.insert(rec.position_id.clone(), ids.len() - 1);
                ids.len() - 1
            }
        };
        max_m = max_m.max(rec.scenario_index + 1);
        records.push((n, class.index(), k, rec.scenario_index, rec.loss));
    }
    let m = match &sidecar {
        Some(s) => {
            if max_m > s.n_scenarios {
                return Err(FrtbError::Shape(format!(
                    "scenario index {} beyond declared count {}",
                    max_m - 1,
                    s.n_scenarios
                )));
            }
            s.n_scenarios
        }
        None => max_m,
    };
    if ids.is_empty() || m == 0 {
        return Err(FrtbError::Shape("empty scenario cube".into()));
    }
    let convention = sidecar.as_ref().map(|s| s.bucket_convention).unwrap_or_default();
    let mut raw = vec![0.0; ids.len() * N_CLASSES * N_HORIZONS * m];
    let mut seen = vec![false; raw.len()];
    for (n, i, k, s, loss) in records {
        let o = ((n * N_CLASSES + i) * N_HORIZONS + k) * m + s;
        if seen[o] {
            return Err(FrtbError::Validation(format!(
                "duplicate row for {} {} {}d scenario {s}",
                ids[n],
                RiskClass::ALL[i].code(),
                ladder.days(k)
            )));
        }
        seen[o] = true;
        raw[o] = loss;
    }
    ScenarioCube::new(ids, m, convention, raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub risk_class: RiskClass,
    pub liquidity_horizon_days: u32,
}

/// Reduced-set file: the buckets left out of the reduced factor set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskFile {
    pub excluded: Vec<MaskEntry>,
}

impl MaskFile {
    pub fn from_mask(mask: &ReducedSetMask, ladder: &LiquidityLadder) -> Self {
        MaskFile {
            excluded: mask
                .excluded()
                .into_iter()
                .map(|(c, j)| MaskEntry {
                    risk_class: c,
                    liquidity_horizon_days: ladder.days(j),
                })
                .collect(),
        }
    }

    pub fn to_mask(&self, ladder: &LiquidityLadder) -> Result<ReducedSetMask> {
        let mut ex = Vec::with_capacity(self.excluded.len());
        for e in &self.excluded {
            let j = ladder.position_of(e.liquidity_horizon_days).ok_or_else(|| {
                FrtbError::Validation(format!("unknown liquidity horizon {}", e.liquidity_horizon_days))
            })?;
            ex.push((e.risk_class, j));
        }
        ReducedSetMask::excluding(&ex)
    }
}

pub fn read_mask(path: &Path, ladder: &LiquidityLadder) -> Result<ReducedSetMask> {
    read_json::<MaskFile>(path)?.to_mask(ladder)
}

pub fn write_mask(path: &Path, mask: &ReducedSetMask, ladder: &LiquidityLadder) -> Result<()> {
    write_json(path, &MaskFile::from_mask(mask, ladder))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AllocationRecord<'a> {
    scheme: &'a str,
    position_id: &'a str,
    risk_class: &'a str,
    lh_days: u32,
    amount: f64,
    percent_of_total: f64,
}

fn write_rows<'a>(
    path: &Path,
    manifest_hash: Option<&str>,
    rows: impl Iterator<Item = AllocationRecord<'a>>,
) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(h) = manifest_hash {
        writeln!(file, "# manifest_sha256={h}")?;
    }
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// First-step allocation per `(position, row, horizon)`, rows CM..IR and UNC.
pub fn write_allocation_csv(
    path: &Path,
    table: &AllocationTable,
    ladder: &LiquidityLadder,
    manifest_hash: Option<&str>,
) -> Result<()> {
    let total = table.imcc_total;
    let scheme = table.scheme.name();
    let rows = table.position_ids.iter().enumerate().flat_map(move |(n, id)| {
        (0..N_ROWS).flat_map(move |i| {
            (0..N_HORIZONS).map(move |j| {
                let amount = table.first(n, i, j);
                AllocationRecord {
                    scheme,
                    position_id: id,
                    risk_class: row_label(i),
                    lh_days: ladder.days(j),
                    amount,
                    percent_of_total: percent(amount, total),
                }
            })
        })
    });
    write_rows(path, manifest_hash, rows)
}

/// Second-step allocation on raw buckets `(position, class, horizon)`.
pub fn write_raw_allocation_csv(
    path: &Path,
    table: &AllocationTable,
    ladder: &LiquidityLadder,
    manifest_hash: Option<&str>,
) -> Result<()> {
    let total = table.imcc_total;
    let scheme = table.scheme.name();
    let rows = table.position_ids.iter().enumerate().flat_map(move |(n, id)| {
        (0..N_CLASSES).flat_map(move |i| {
            (0..N_HORIZONS).map(move |k| {
                let amount = table.raw_bucket(n, i, k);
                AllocationRecord {
                    scheme,
                    position_id: id,
                    risk_class: row_label(i),
                    lh_days: ladder.days(k),
                    amount,
                    percent_of_total: percent(amount, total),
                }
            })
        })
    });
    write_rows(path, manifest_hash, rows)
}

fn percent(amount: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        100.0 * amount / total
    }
}

/// Reconciliation block of every scheme in a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconciliationFile {
    pub manifest_hash: Option<String>,
    pub schemes: Vec<Reconciliation>,
}
