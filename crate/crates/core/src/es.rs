//! Empirical VaR/ES, the FRTB class ES, stress-period scaling and the IMCC.

use serde::{Deserialize, Serialize};

use crate::error::{FrtbError, Result};
use crate::profile::{
    adjust, apply_mask, row_label, LiquidityLadder, ReducedSetMask, RiskProfile, ScenarioCube,
    N_CLASSES, N_HORIZONS, N_ROWS, UNCONSTRAINED,
};

/// Denominators below this are treated as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Minimum share of the full-set ES the reduced set has to retain.
pub const REDUCED_SET_THRESHOLD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1.06 * sd * M^(-1/5)`
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub bandwidth: Bandwidth,
    pub shape: KernelShape,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            bandwidth: Bandwidth::Silverman,
            shape: KernelShape::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub alpha: f64,
    pub floor_negative_es: bool,
    pub kernel: Option<KernelConfig>,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            alpha: 0.975,
            floor_negative_es: false,
            kernel: None,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(FrtbError::Validation(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if let Some(KernelConfig {
            bandwidth: Bandwidth::Fixed(h),
            ..
        }) = self.kernel
        {
            if !(h > 0.0) {
                return Err(FrtbError::Validation("kernel bandwidth must be positive".into()));
            }
        }
        Ok(())
    }

    /// Bucket ES as it enters the class aggregation (floored when configured).
    pub fn effective(&self, es: f64) -> f64 {
        if self.floor_negative_es {
            es.max(0.0)
        } else {
            es
        }
    }
}

/// Number of tail scenarios, `max(1, ceil((1 - alpha) M))`.
pub fn tail_size(m: usize, alpha: f64) -> usize {
    // (1 - 0.975) is not exact in binary; guard the ceiling against it.
    let raw = (1.0 - alpha) * m as f64;
    let n = (raw - 1e-9).ceil().max(1.0) as usize;
    n.min(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub var: f64,
    pub es: f64,
    /// Scenario indexes of the tail, ascending.
    pub tail_indices: Vec<usize>,
}

/// Mean of the `tail_size` largest losses; ties go to the lowest index.
pub fn empirical_var_es(losses: &[f64], cfg: &EsConfig) -> Result<TailEstimate> {
    if losses.is_empty() {
        return Err(FrtbError::Validation("empty loss vector".into()));
    }
    cfg.validate()?;
    let n_tail = tail_size(losses.len(), cfg.alpha);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let mut tail = order[..n_tail].to_vec();
    let var = losses[tail[n_tail - 1]];
    tail.sort_unstable();
    let es = tail.iter().map(|&s| losses[s]).sum::<f64>() / n_tail as f64;
    Ok(TailEstimate {
        var,
        es,
        tail_indices: tail,
    })
}

/// `sqrt(sum_j ES_j^2)`, flooring each term at zero when asked to.
pub fn combine_bucket_es(bucket_es: &[f64; N_HORIZONS], floor: bool) -> f64 {
    bucket_es
        .iter()
        .map(|&e| if floor { e.max(0.0) } else { e })
        .map(|e| e * e)
        .sum::<f64>()
        .sqrt()
}

/// Tail estimates of every portfolio bucket `X(i,j)` of a profile.
#[derive(Debug, Clone)]
pub struct ProfileEs {
    pub tails: Vec<TailEstimate>,
    pub bucket_es: [[f64; N_HORIZONS]; N_ROWS],
    pub class_es: [f64; N_ROWS],
}

impl ProfileEs {
    pub fn compute(profile: &RiskProfile, cfg: &EsConfig) -> Result<ProfileEs> {
        let mut tails = Vec::with_capacity(N_ROWS * N_HORIZONS);
        let mut bucket_es = [[0.0; N_HORIZONS]; N_ROWS];
        let mut class_es = [0.0; N_ROWS];
        for i in 0..N_ROWS {
            for j in 0..N_HORIZONS {
                let t = empirical_var_es(profile.bucket(i, j), cfg)?;
                bucket_es[i][j] = t.es;
                tails.push(t);
            }
            class_es[i] = combine_bucket_es(&bucket_es[i], cfg.floor_negative_es);
        }
        Ok(ProfileEs {
            tails,
            bucket_es,
            class_es,
        })
    }

    pub fn tail(&self, i: usize, j: usize) -> &TailEstimate {
        &self.tails[i * N_HORIZONS + j]
    }
}

/// FRTB ES of row `i` (0..6) of a profile.
pub fn frtb_class_es(profile: &RiskProfile, row: usize, cfg: &EsConfig) -> Result<f64> {
    if row >= N_ROWS {
        return Err(FrtbError::Shape(format!("row {row} out of range")));
    }
    let mut es = [0.0; N_HORIZONS];
    for (j, e) in es.iter_mut().enumerate() {
        *e = empirical_var_es(profile.bucket(row, j), cfg)?.es;
    }
    Ok(combine_bucket_es(&es, cfg.floor_negative_es))
}

/// ES of the fully netted 10-day loss, ignoring classes and horizons.
pub fn regular_es(cube: &ScenarioCube, cfg: &EsConfig) -> Result<f64> {
    Ok(empirical_var_es(&cube.net_loss(), cfg)?.es)
}

/// The three profiles entering the stress-period scaling.
#[derive(Debug, Clone)]
pub struct ScalingContext {
    pub full_current: RiskProfile,
    pub reduced_current: RiskProfile,
    pub reduced_stress: RiskProfile,
    pub rho: f64,
}

impl ScalingContext {
    pub fn new(
        full_current: RiskProfile,
        reduced_current: RiskProfile,
        reduced_stress: RiskProfile,
        rho: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(FrtbError::Validation(format!("rho must lie in [0,1], got {rho}")));
        }
        let np = full_current.n_positions();
        if reduced_current.n_positions() != np || reduced_stress.n_positions() != np {
            return Err(FrtbError::Shape(
                "scaling profiles disagree on the number of positions".into(),
            ));
        }
        if reduced_current.n_scenarios() != full_current.n_scenarios() {
            return Err(FrtbError::Shape(
                "full and reduced current profiles disagree on the scenario count".into(),
            ));
        }
        Ok(ScalingContext {
            full_current,
            reduced_current,
            reduced_stress,
            rho,
        })
    }

    /// Stress scaling of one: the same profile in all three roles.
    pub fn unscaled(profile: RiskProfile) -> Self {
        ScalingContext {
            full_current: profile.clone(),
            reduced_current: profile.clone(),
            reduced_stress: profile,
            rho: 0.5,
        }
    }

    /// Builds the three profiles from raw cubes. Without a stress cube the
    /// current cube is reused; without a mask the full set is used.
    pub fn from_cubes(
        current: &ScenarioCube,
        stress: Option<&ScenarioCube>,
        mask: Option<&ReducedSetMask>,
        ladder: &LiquidityLadder,
        rho: f64,
    ) -> Result<Self> {
        let mask = mask.copied().unwrap_or_default();
        let stress = stress.unwrap_or(current);
        let full = adjust(current, ladder);
        let reduced_current = adjust(&apply_mask(current, &mask)?, ladder);
        let reduced_stress = adjust(&apply_mask(stress, &mask)?, ladder);
        Self::new(full, reduced_current, reduced_stress, rho)
    }

    /// Every scenario loss multiplied by `a > 0`.
    pub fn scaled(&self, a: f64) -> ScalingContext {
        let rescale = |p: &RiskProfile| adjust(&p.raw().scaled(a), p.ladder());
        ScalingContext {
            full_current: rescale(&self.full_current),
            reduced_current: rescale(&self.reduced_current),
            reduced_stress: rescale(&self.reduced_stress),
            rho: self.rho,
        }
    }

    /// Aggregation weight of a row: `rho` for the unconstrained row,
    /// `1 - rho` for the constrained classes.
    pub fn row_weight(&self, row: usize) -> f64 {
        if row == UNCONSTRAINED {
            self.rho
        } else {
            1.0 - self.rho
        }
    }

    pub fn n_positions(&self) -> usize {
        self.full_current.n_positions()
    }
}

/// Class ES under the three (factor set, period) variants.
#[derive(Debug, Clone)]
pub struct ScalingEs {
    pub full_current: ProfileEs,
    pub reduced_current: ProfileEs,
    pub reduced_stress: ProfileEs,
}

impl ScalingEs {
    pub fn compute(ctx: &ScalingContext, cfg: &EsConfig) -> Result<Self> {
        Ok(ScalingEs {
            full_current: ProfileEs::compute(&ctx.full_current, cfg)?,
            reduced_current: ProfileEs::compute(&ctx.reduced_current, cfg)?,
            reduced_stress: ProfileEs::compute(&ctx.reduced_stress, cfg)?,
        })
    }

    /// `Some(ES^{R,S} / ES^{R,C})` for an active row, `None` when all three
    /// class ES vanish, error when only the denominator does.
    pub fn ratio(&self, row: usize) -> Result<Option<f64>> {
        let fc = self.full_current.class_es[row];
        let rc = self.reduced_current.class_es[row];
        let rs = self.reduced_stress.class_es[row];
        if rc.abs() >= DEGENERATE_TOL {
            return Ok(Some(rs / rc));
        }
        if fc.abs() < DEGENERATE_TOL && rs.abs() < DEGENERATE_TOL {
            return Ok(None);
        }
        Err(FrtbError::DegenerateDenominator {
            class: row_label(row),
            value: rc,
        })
    }
}

/// `ES^{R,S}(X(i)) / ES^{R,C}(X(i))`.
pub fn stress_ratio(ctx: &ScalingContext, row: usize, cfg: &EsConfig) -> Result<f64> {
    let rc = frtb_class_es(&ctx.reduced_current, row, cfg)?;
    if rc.abs() < DEGENERATE_TOL {
        return Err(FrtbError::DegenerateDenominator {
            class: row_label(row),
            value: rc,
        });
    }
    Ok(frtb_class_es(&ctx.reduced_stress, row, cfg)? / rc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSetRow {
    pub class: String,
    pub full_current_es: f64,
    pub reduced_current_es: f64,
    /// `None` when both ES vanish.
    pub ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedSetCheck {
    pub threshold: f64,
    pub rows: Vec<ReducedSetRow>,
}

impl ReducedSetCheck {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Checks `ES^{R,C}(X(i)) >= 0.75 ES^{F,C}(X(i))` for every row.
pub fn reduced_set_check(ctx: &ScalingContext, cfg: &EsConfig) -> Result<ReducedSetCheck> {
    let mut rows = Vec::with_capacity(N_ROWS);
    for i in 0..N_ROWS {
        let full = frtb_class_es(&ctx.full_current, i, cfg)?;
        let reduced = frtb_class_es(&ctx.reduced_current, i, cfg)?;
        let ratio = (full.abs() >= DEGENERATE_TOL).then(|| reduced / full);
        rows.push(ReducedSetRow {
            class: row_label(i).to_string(),
            full_current_es: full,
            reduced_current_es: reduced,
            ratio,
            pass: reduced >= REDUCED_SET_THRESHOLD * full,
        });
    }
    Ok(ReducedSetCheck {
        threshold: REDUCED_SET_THRESHOLD,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsReport {
    pub config: EsConfig,
    pub rho: f64,
    /// Full-set current-period bucket ES, rows CM..IR then UNC.
    pub bucket_es: [[f64; N_HORIZONS]; N_ROWS],
    pub class_es: [f64; N_ROWS],
    pub reduced_current_class_es: [f64; N_ROWS],
    pub reduced_stress_class_es: [f64; N_ROWS],
    /// `None` for rows without any exposure.
    pub stress_ratio: [Option<f64>; N_ROWS],
    pub imcc_class: [f64; N_ROWS],
    pub imcc_total: f64,
}

impl EsReport {
    pub fn constrained_sum(&self) -> f64 {
        self.imcc_class[..N_CLASSES].iter().sum()
    }
}

/// The aggregate capital charge
/// `rho * IMCC(X(6)) + (1 - rho) * sum_{i<=5} IMCC(X(i))`.
pub fn imcc(ctx: &ScalingContext, cfg: &EsConfig) -> Result<EsReport> {
    cfg.validate()?;
    let es = ScalingEs::compute(ctx, cfg)?;
    imcc_from(ctx, cfg, &es)
}

pub(crate) fn imcc_from(ctx: &ScalingContext, cfg: &EsConfig, es: &ScalingEs) -> Result<EsReport> {
    let mut stress_ratio = [None; N_ROWS];
    let mut imcc_class = [0.0; N_ROWS];
    for i in 0..N_ROWS {
        stress_ratio[i] = es.ratio(i)?;
        imcc_class[i] = stress_ratio[i].map_or(0.0, |r| r * es.full_current.class_es[i]);
    }
    let imcc_total = aggregate(ctx.rho, &imcc_class);
    Ok(EsReport {
        config: *cfg,
        rho: ctx.rho,
        bucket_es: es.full_current.bucket_es,
        class_es: es.full_current.class_es,
        reduced_current_class_es: es.reduced_current.class_es,
        reduced_stress_class_es: es.reduced_stress.class_es,
        stress_ratio,
        imcc_class,
        imcc_total,
    })
}

/// Weighted sum of the unconstrained and constrained class charges.
pub fn aggregate(rho: f64, class_charges: &[f64; N_ROWS]) -> f64 {
    let constrained: f64 = class_charges[..N_CLASSES].iter().sum();
    rho * class_charges[UNCONSTRAINED] + (1.0 - rho) * constrained
}
