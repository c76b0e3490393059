//! The `frtb` command line: simulate presets, compute the IMCC, allocate it
//! and validate the allocations against the oracles. Outputs are CSV/JSON
//! files in `--out`, each stamped with the hash of the run manifest.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::allocation::{allocate, regular_euler_alloc, AllocationTable, RegularAllocation, Scheme};
use crate::error::FrtbError;
use crate::es::{imcc, regular_es, Bandwidth, EsConfig, KernelConfig, KernelShape, ScalingContext};
use crate::io::{
    read_cube, read_mask, write_allocation_csv, write_cube, write_json, write_mask,
    write_raw_allocation_csv, ReconciliationFile, CUBE_FORMAT_VERSION,
};
use crate::oracle::{validate, OracleConfig};
use crate::profile::{row_label, LiquidityLadder, ReducedSetMask, ScenarioCube, N_CLASSES, N_HORIZONS};
use crate::sim::{analytic_reference, Preset};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "frtb", version, about = "FRTB IMA capital charge and its allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the scenario cubes (and mask) of a simulation preset.
    Simulate {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the IMCC and the regular ES of the netted portfolio.
    Imcc {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        es: EsArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Allocate the IMCC under one or more schemes.
    Allocate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        es: EsArgs,
        #[arg(long, value_delimiter = ',', default_value = "euler,cas,euler-scaled,cas-scaled")]
        schemes: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check allocations against finite-difference and quadrature oracles.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        es: EsArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Simulation preset used instead of input files.
    #[arg(long, conflicts_with = "current")]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Current-period scenario cube CSV.
    #[arg(long, required_unless_present = "preset")]
    pub current: Option<PathBuf>,
    /// Stress-period scenario cube CSV (defaults to the current cube).
    #[arg(long, requires = "current")]
    pub stress: Option<PathBuf>,
    /// Reduced-set mask JSON (defaults to the full set).
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EsArgs {
    #[arg(long, default_value_t = 0.975)]
    pub alpha: f64,
    /// Floor negative bucket ES at zero.
    #[arg(long)]
    pub floor: bool,
    /// Gaussian kernel smoothing of the tail weights in scenario extraction.
    #[arg(long)]
    pub kernel: bool,
    /// Fixed kernel bandwidth (Silverman's rule otherwise).
    #[arg(long, requires = "kernel")]
    pub bandwidth: Option<f64>,
}

impl EsArgs {
    pub fn config(&self) -> EsConfig {
        EsConfig {
            alpha: self.alpha,
            floor_negative_es: self.floor,
            kernel: self.kernel.then(|| KernelConfig {
                bandwidth: self.bandwidth.map_or(Bandwidth::Silverman, Bandwidth::Fixed),
                shape: KernelShape::Gaussian,
            }),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Frtb(#[from] FrtbError),

    #[error("validation failed: {0}")]
    ValidationFailed(String),
}

impl CliError {
    /// 2 for failed checks, 3 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed(_) => 2,
            CliError::Frtb(FrtbError::Oracle(_)) | CliError::Frtb(FrtbError::TailTie { .. }) => 2,
            CliError::Frtb(_) => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub manifest: u32,
    pub scenario_cube: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub preset: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub es_config: Option<EsConfig>,
    pub schemes: Vec<String>,
    pub seed: Option<u64>,
    pub formats: FormatVersions,
    pub tool_version: String,
}

impl RunManifest {
    fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            preset: None,
            inputs: Vec::new(),
            es_config: None,
            schemes: Vec::new(),
            seed: None,
            formats: FormatVersions {
                manifest: MANIFEST_SCHEMA_VERSION,
                scenario_cube: CUBE_FORMAT_VERSION,
            },
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// SHA-256 of the manifest's JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serialises");
        hex::encode(Sha256::digest(bytes))
    }

    fn write(&self, out: &Path) -> Result<String, FrtbError> {
        #[derive(Serialize)]
        struct Stamped<'a> {
            sha256: String,
            manifest: &'a RunManifest,
        }
        let sha256 = self.hash();
        write_json(
            &out.join("manifest.json"),
            &Stamped {
                sha256: sha256.clone(),
                manifest: self,
            },
        )?;
        Ok(sha256)
    }
}

fn file_digest(path: &Path) -> Result<InputDigest, FrtbError> {
    let bytes = std::fs::read(path)?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

/// Loaded inputs of a run.
struct Inputs {
    current: ScenarioCube,
    ctx: ScalingContext,
    preset: Option<Preset>,
}

fn load(input: &InputArgs, manifest: &mut RunManifest, ladder: &LiquidityLadder) -> Result<Inputs, FrtbError> {
    if let Some(name) = &input.preset {
        let seed = input.seed.unwrap_or(0);
        let mut preset = Preset::by_name(name)?.with_seed(seed);
        if let Some(m) = &input.mask {
            manifest.inputs.push(file_digest(m)?);
            preset.mask = Some(read_mask(m, ladder)?);
        }
        manifest.preset = Some(name.clone());
        manifest.seed = Some(seed);
        let s = preset.simulate()?;
        let ctx = ScalingContext::from_cubes(&s.current, s.stress.as_ref(), preset.mask.as_ref(), ladder, 0.5)?;
        return Ok(Inputs {
            current: s.current,
            ctx,
            preset: Some(preset),
        });
    }
    let path = input
        .current
        .as_ref()
        .ok_or_else(|| FrtbError::Validation("either --preset or --current is required".into()))?;
    manifest.inputs.push(file_digest(path)?);
    let current = read_cube(path, ladder)?;
    let stress = match &input.stress {
        Some(p) => {
            manifest.inputs.push(file_digest(p)?);
            Some(read_cube(p, ladder)?)
        }
        None => None,
    };
    if let Some(s) = &stress {
        if s.position_ids() != current.position_ids() {
            return Err(FrtbError::Shape("stress cube positions differ from the current cube".into()));
        }
    }
    let mask: Option<ReducedSetMask> = match &input.mask {
        Some(p) => {
            manifest.inputs.push(file_digest(p)?);
            Some(read_mask(p, ladder)?)
        }
        None => None,
    };
    let ctx = ScalingContext::from_cubes(&current, stress.as_ref(), mask.as_ref(), ladder, 0.5)?;
    Ok(Inputs {
        current,
        ctx,
        preset: None,
    })
}

fn prepare_out(out: &Path) -> Result<(), FrtbError> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

pub fn cmd_simulate(preset: &str, seed: u64, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let ladder = LiquidityLadder::default();
    let p = Preset::by_name(preset)?.with_seed(seed);
    prepare_out(out)?;
    let mut manifest = RunManifest::new("simulate");
    manifest.preset = Some(preset.to_string());
    manifest.seed = Some(seed);
    let hash = manifest.write(out)?;
    let s = p.simulate()?;
    let mut files = vec![out.join("current.csv")];
    write_cube(&files[0], &s.current, &ladder, Some(&hash))?;
    if let Some(stress) = &s.stress {
        let f = out.join("stress.csv");
        write_cube(&f, stress, &ladder, Some(&hash))?;
        files.push(f);
    }
    if let Some(mask) = &p.mask {
        let f = out.join("mask.json");
        write_mask(&f, mask, &ladder)?;
        files.push(f);
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImccSummary {
    pub manifest_hash: String,
    pub imcc: f64,
    pub regular_es: f64,
    pub analytic_imcc: Option<f64>,
    pub analytic_regular_es: Option<f64>,
}

pub fn cmd_imcc(input: &InputArgs, cfg: &EsConfig, out: &Path) -> Result<ImccSummary, CliError> {
    let ladder = LiquidityLadder::default();
    cfg.validate()?;
    let mut manifest = RunManifest::new("imcc");
    manifest.es_config = Some(*cfg);
    let inputs = load(input, &mut manifest, &ladder)?;
    prepare_out(out)?;
    let hash = manifest.write(out)?;
    let report = imcc(&inputs.ctx, cfg)?;
    write_json(&out.join("es_report.json"), &report)?;
    let analytic = match &inputs.preset {
        Some(p) => Some(analytic_reference(p, cfg, &ladder)?),
        None => None,
    };
    let summary = ImccSummary {
        manifest_hash: hash,
        imcc: report.imcc_total,
        regular_es: regular_es(&inputs.current, cfg)?,
        analytic_imcc: analytic.as_ref().map(|a| a.imcc_total),
        analytic_regular_es: analytic.as_ref().map(|a| a.regular_es),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PercentRow<'a> {
    scheme: &'a str,
    risk_class: &'a str,
    lh_days: u32,
    percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PositionRow<'a> {
    scheme: &'a str,
    position_id: &'a str,
    amount: f64,
    percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BucketRow<'a> {
    scheme: &'a str,
    position_id: &'a str,
    risk_class: &'a str,
    lh_days: u32,
    percent: f64,
}

/// Smallest and largest allocation percentages of one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Extremes {
    pub scheme: String,
    pub position_min: f64,
    pub position_max: f64,
    pub bucket_min: f64,
    pub bucket_max: f64,
}

const REGULAR: &str = "regular-euler";

fn csv_writer(path: &Path, hash: &str) -> Result<csv::Writer<std::fs::File>, FrtbError> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# manifest_sha256={hash}")?;
    Ok(csv::Writer::from_writer(f))
}

fn extremes(scheme: &str, positions: &[f64], buckets: &[f64]) -> Extremes {
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Extremes {
        scheme: scheme.to_string(),
        position_min: min(positions),
        position_max: max(positions),
        bucket_min: min(buckets),
        bucket_max: max(buckets),
    }
}

fn pct(x: f64, total: f64) -> f64 {
    if total == 0.0 {
        0.0
    } else {
        100.0 * x / total
    }
}

/// Percentage panels (bucket totals over positions), per-position and
/// per-bucket histogram data, and extreme values for every scheme plus the
/// Euler allocation of the regular ES.
fn write_panels(
    out: &Path,
    hash: &str,
    tables: &[AllocationTable],
    regular: &RegularAllocation,
    ladder: &LiquidityLadder,
) -> Result<Vec<Extremes>, FrtbError> {
    let mut panel = csv_writer(&out.join("bucket_percent.csv"), hash)?;
    let mut positions = csv_writer(&out.join("position_alloc.csv"), hash)?;
    let mut buckets = csv_writer(&out.join("bucket_alloc.csv"), hash)?;
    let mut ext = Vec::new();

    let ids = &regular.position_ids;
    let mut emit = |scheme: &str,
                    total: f64,
                    bucket: &dyn Fn(usize, usize, usize) -> f64|
     -> Result<Extremes, FrtbError> {
        let mut pos_pct = Vec::new();
        let mut bkt_pct = Vec::new();
        for i in 0..N_CLASSES {
            for k in 0..N_HORIZONS {
                let s: f64 = (0..ids.len()).map(|n| bucket(n, i, k)).sum();
                panel.serialize(PercentRow {
                    scheme,
                    risk_class: row_label(i),
                    lh_days: ladder.days(k),
                    percent: pct(s, total),
                })?;
            }
        }
        for (n, id) in ids.iter().enumerate() {
            let mut amount = 0.0;
            for i in 0..N_CLASSES {
                for k in 0..N_HORIZONS {
                    let a = bucket(n, i, k);
                    amount += a;
                    bkt_pct.push(pct(a, total));
                    buckets.serialize(BucketRow {
                        scheme,
                        position_id: id,
                        risk_class: row_label(i),
                        lh_days: ladder.days(k),
                        percent: pct(a, total),
                    })?;
                }
            }
            pos_pct.push(pct(amount, total));
            positions.serialize(PositionRow {
                scheme,
                position_id: id,
                amount,
                percent: pct(amount, total),
            })?;
        }
        Ok(extremes(scheme, &pos_pct, &bkt_pct))
    };
    for t in tables {
        ext.push(emit(t.scheme.name(), t.imcc_total, &|n, i, k| t.raw_bucket(n, i, k))?);
    }
    ext.push(emit(REGULAR, regular.es, &|n, i, k| regular.raw_bucket(n, i, k))?);
    panel.flush()?;
    positions.flush()?;
    buckets.flush()?;
    Ok(ext)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocateSummary {
    pub manifest_hash: String,
    pub imcc: f64,
    pub reconciliation: Vec<crate::allocation::Reconciliation>,
    pub extremes: Vec<Extremes>,
}

pub fn cmd_allocate(input: &InputArgs, cfg: &EsConfig, schemes: &[String], out: &Path) -> Result<AllocateSummary, CliError> {
    let ladder = LiquidityLadder::default();
    cfg.validate()?;
    let schemes: Vec<Scheme> = schemes.iter().map(|s| Scheme::parse(s)).collect::<Result<_, _>>()?;
    if schemes.is_empty() {
        return Err(FrtbError::Validation("no allocation scheme selected".into()).into());
    }
    let mut manifest = RunManifest::new("allocate");
    manifest.es_config = Some(*cfg);
    manifest.schemes = schemes.iter().map(|s| s.name().to_string()).collect();
    let inputs = load(input, &mut manifest, &ladder)?;
    prepare_out(out)?;
    let hash = manifest.write(out)?;

    let mut tables = Vec::with_capacity(schemes.len());
    for &s in &schemes {
        let t = allocate(s, &inputs.ctx, cfg)?;
        write_allocation_csv(&out.join(format!("allocation_{}.csv", s.name())), &t, &ladder, Some(&hash))?;
        write_raw_allocation_csv(&out.join(format!("allocation_{}_raw.csv", s.name())), &t, &ladder, Some(&hash))?;
        tables.push(t);
    }
    let reconciliation: Vec<_> = tables.iter().map(|t| t.reconciliation()).collect();
    write_json(
        &out.join("reconciliation.json"),
        &ReconciliationFile {
            manifest_hash: Some(hash.clone()),
            schemes: reconciliation.clone(),
        },
    )?;
    let regular = regular_euler_alloc(&inputs.current, cfg)?;
    let extremes = write_panels(out, &hash, &tables, &regular, &ladder)?;
    write_json(&out.join("extremes.json"), &extremes)?;
    let imcc = tables[0].imcc_total;
    for r in &reconciliation {
        if r.abs_gap > 1e-9 * imcc.abs().max(f64::MIN_POSITIVE) {
            return Err(CliError::ValidationFailed(format!(
                "{} allocations miss the IMCC by {:e}",
                r.scheme.name(),
                r.abs_gap
            )));
        }
    }
    Ok(AllocateSummary {
        manifest_hash: hash,
        imcc,
        reconciliation,
        extremes,
    })
}

pub fn cmd_validate(input: &InputArgs, cfg: &EsConfig, out: &Path) -> Result<crate::oracle::ValidationReport, CliError> {
    let ladder = LiquidityLadder::default();
    cfg.validate()?;
    let mut manifest = RunManifest::new("validate");
    manifest.es_config = Some(*cfg);
    let inputs = load(input, &mut manifest, &ladder)?;
    prepare_out(out)?;
    manifest.write(out)?;
    let perm_rows: Vec<usize> = (0..120).collect();
    let report = validate(&inputs.ctx, cfg, &OracleConfig::default(), &perm_rows, manifest.seed)?;
    write_json(&out.join("validation.json"), &report)?;
    if !report.all_pass() {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        return Err(CliError::ValidationFailed(failed.join(", ")));
    }
    Ok(report)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { preset, seed, out } => {
            for f in cmd_simulate(&preset, seed, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Imcc { input, es, out } => {
            let s = cmd_imcc(&input, &es.config(), &out)?;
            println!("IMCC        {:>10.4}", s.imcc);
            println!("regular ES  {:>10.4}", s.regular_es);
            if let (Some(a), Some(r)) = (s.analytic_imcc, s.analytic_regular_es) {
                println!("analytic    {a:>10.4} / {r:.4}");
            }
        }
        Command::Allocate { input, es, schemes, out } => {
            let s = cmd_allocate(&input, &es.config(), &schemes, &out)?;
            println!("IMCC {:.6}", s.imcc);
            for r in &s.reconciliation {
                println!("{:<13} allocated {:.6}  gap {:.2e}", r.scheme.name(), r.grand_total, r.abs_gap);
            }
            for e in &s.extremes {
                println!(
                    "{:<13} bucket range [{:.2}%, {:.2}%]",
                    e.scheme, e.bucket_min, e.bucket_max
                );
            }
        }
        Command::Validate { input, es, out } => {
            let r = cmd_validate(&input, &es.config(), &out);
            let path = out.join("validation.json");
            if path.exists() {
                let report: crate::oracle::ValidationReport = crate::io::read_json(&path)?;
                for c in &report.checks {
                    println!(
                        "{} {:<34} measured {:.3e} tol {:.1e}  {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.measured,
                        c.tolerance,
                        c.detail
                    );
                }
            }
            r?;
        }
    }
    Ok(())
}

/// Parses the process arguments, runs, and returns the exit code. Usage
/// errors count as input errors.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
