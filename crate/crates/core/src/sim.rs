//! Seeded correlated-normal loss studies and their closed-form references.
//!
//! Every preset draws `n_days` i.i.d. zero-mean multivariate normal vectors
//! over the flat index `(position, class, horizon)`. Per-bucket standard
//! deviation defaults to 0.30 loss units per 10 days.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{FrtbError, Result};
use crate::es::{aggregate, combine_bucket_es, EsConfig, ScalingContext};
use crate::normal::es_standard_normal;
use crate::profile::{
    BucketConvention, LiquidityLadder, ReducedSetMask, RiskClass, ScenarioCube, N_CLASSES,
    N_HORIZONS, N_ROWS, UNCONSTRAINED,
};

const BUCKETS: usize = N_CLASSES * N_HORIZONS;

fn flat(n: usize, i: usize, k: usize) -> usize {
    (n * N_CLASSES + i) * N_HORIZONS + k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationKind {
    Independent,
    /// Every pair of variables correlated, across positions too.
    UniformPos,
    /// Same position and horizon, different classes.
    RfPos,
    /// Same position and class, different horizons.
    LhPos,
    /// Negative correlation between two classes at every horizon.
    RfHedge { a: RiskClass, b: RiskClass },
    /// Negative correlation between two horizon columns in every class.
    LhHedge { a: usize, b: usize },
    /// Positions `(2p, 2p+1)` hedge each other bucket by bucket.
    PositionHedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSpec {
    pub kind: CorrelationKind,
    pub rho_magnitude: f64,
    pub n_positions: usize,
}

impl CorrelationSpec {
    pub fn new(kind: CorrelationKind, n_positions: usize) -> Self {
        CorrelationSpec {
            kind,
            rho_magnitude: 0.99,
            n_positions,
        }
    }

    pub fn with_magnitude(mut self, rho: f64) -> Self {
        self.rho_magnitude = rho;
        self
    }

    pub fn dim(&self) -> usize {
        self.n_positions * BUCKETS
    }

    fn validate(&self) -> Result<()> {
        if self.n_positions == 0 {
            return Err(FrtbError::Validation("correlation spec needs positions".into()));
        }
        if !(0.0..=1.0).contains(&self.rho_magnitude) {
            return Err(FrtbError::Validation(format!(
                "correlation magnitude {} outside [0,1]",
                self.rho_magnitude
            )));
        }
        match self.kind {
            CorrelationKind::PositionHedge if self.n_positions % 2 != 0 => Err(
                FrtbError::Validation("position hedging needs an even position count".into()),
            ),
            CorrelationKind::RfHedge { a, b } if a == b => {
                Err(FrtbError::Validation("hedged classes must differ".into()))
            }
            CorrelationKind::LhHedge { a, b } if a == b || a >= N_HORIZONS || b >= N_HORIZONS => {
                Err(FrtbError::Validation("invalid hedged horizon pair".into()))
            }
            _ => Ok(()),
        }
    }

    /// Correlation between two flat variables.
    fn entry(&self, (n1, i1, k1): (usize, usize, usize), (n2, i2, k2): (usize, usize, usize)) -> f64 {
        if (n1, i1, k1) == (n2, i2, k2) {
            return 1.0;
        }
        let rho = self.rho_magnitude;
        match self.kind {
            CorrelationKind::Independent => 0.0,
            CorrelationKind::UniformPos => rho,
            CorrelationKind::RfPos => {
                if n1 == n2 && k1 == k2 {
                    rho
                } else {
                    0.0
                }
            }
            CorrelationKind::LhPos => {
                if n1 == n2 && i1 == i2 {
                    rho
                } else {
                    0.0
                }
            }
            CorrelationKind::RfHedge { a, b } => {
                let pair = (i1 == a.index() && i2 == b.index()) || (i1 == b.index() && i2 == a.index());
                if n1 == n2 && k1 == k2 && pair {
                    -rho
                } else {
                    0.0
                }
            }
            CorrelationKind::LhHedge { a, b } => {
                let pair = (k1 == a && k2 == b) || (k1 == b && k2 == a);
                if n1 == n2 && i1 == i2 && pair {
                    -rho
                } else {
                    0.0
                }
            }
            CorrelationKind::PositionHedge => {
                if n1 / 2 == n2 / 2 && n1 != n2 && i1 == i2 && k1 == k2 {
                    -rho
                } else {
                    0.0
                }
            }
        }
    }
}

fn unflat(x: usize) -> (usize, usize, usize) {
    (x / BUCKETS, (x / N_HORIZONS) % N_CLASSES, x % N_HORIZONS)
}

/// Correlation matrix over the flat `(position, class, horizon)` index.
pub fn build_correlation(spec: &CorrelationSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let d = spec.dim();
    Ok(DMatrix::from_fn(d, d, |r, c| spec.entry(unflat(r), unflat(c))))
}

/// A factor `F` with `F F^T = C`: the Cholesky factor when `C` is positive
/// definite, otherwise eigenvectors scaled by clipped eigenvalues.
pub fn correlation_factor(corr: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = corr.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = SymmetricEigen::new(corr.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 {
        return Err(FrtbError::NotPsd(min));
    }
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

/// Volatility multipliers and correlation of the stress period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressOverrides {
    pub correlation: CorrelationSpec,
    /// `(position, class, horizon column, multiplier)`.
    pub multipliers: Vec<(usize, RiskClass, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_days: usize,
    pub sigma_10d: f64,
    pub seed: u64,
    pub stress: Option<StressOverrides>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_days: 250,
            sigma_10d: 0.30,
            seed: 0,
            stress: None,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.n_days < 50 {
            return Err(FrtbError::Validation("n_days must be >= 50".into()));
        }
        if !(self.sigma_10d > 0.0) {
            return Err(FrtbError::Validation("sigma_10d must be positive".into()));
        }
        Ok(())
    }

    fn stress_sigmas(&self, n_positions: usize) -> Vec<f64> {
        let mut s = vec![self.sigma_10d; n_positions * BUCKETS];
        if let Some(st) = &self.stress {
            for &(n, c, k, mult) in &st.multipliers {
                if n < n_positions && k < N_HORIZONS {
                    s[flat(n, c.index(), k)] *= mult;
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub current: ScenarioCube,
    pub stress: Option<ScenarioCube>,
}

fn draw(
    factor: &DMatrix<f64>,
    sigmas: &[f64],
    n_days: usize,
    n_positions: usize,
    convention: BucketConvention,
    rng: &mut ChaCha8Rng,
) -> Result<ScenarioCube> {
    let d = factor.nrows();
    let mut raw = vec![0.0; d * n_days];
    let mut z = DVector::<f64>::zeros(d);
    for m in 0..n_days {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let x = factor * &z;
        for (v, (xv, s)) in x.iter().zip(sigmas).enumerate() {
            raw[v * n_days + m] = xv * s;
        }
    }
    let ids = (1..=n_positions).map(|n| format!("P{n}")).collect();
    ScenarioCube::new(ids, n_days, convention, raw)
}

/// Draws the current-period cube and, when stress overrides are set, an
/// independent stress-period cube from a separate stream.
pub fn simulate(
    spec: &CorrelationSpec,
    sim: &SimConfig,
    convention: BucketConvention,
) -> Result<Simulated> {
    sim.validate()?;
    let factor = correlation_factor(&build_correlation(spec)?)?;
    let sigmas = vec![sim.sigma_10d; spec.dim()];
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let current = draw(&factor, &sigmas, sim.n_days, spec.n_positions, convention, &mut rng)?;
    let stress = match &sim.stress {
        None => None,
        Some(st) => {
            let mut st_spec = st.correlation;
            st_spec.n_positions = spec.n_positions;
            let f = correlation_factor(&build_correlation(&st_spec)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
            rng.set_stream(1);
            let s = sim.stress_sigmas(spec.n_positions);
            Some(draw(&f, &s, sim.n_days, spec.n_positions, convention, &mut rng)?)
        }
    };
    Ok(Simulated { current, stress })
}

/// A named simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub description: String,
    pub correlation: CorrelationSpec,
    pub convention: BucketConvention,
    pub sim: SimConfig,
    pub mask: Option<ReducedSetMask>,
}

pub const PRESET_NAMES: [&str; 10] = [
    "sim41.i",
    "sim41.ii",
    "sim41.iii",
    "sim41.iv",
    "sim42.i",
    "sim42.ii",
    "sim42.iii",
    "sim42.hist20",
    "sim43.setA",
    "sim43.setB",
];

fn stress_43() -> StressOverrides {
    StressOverrides {
        correlation: CorrelationSpec::new(CorrelationKind::UniformPos, 2).with_magnitude(0.7),
        // X~_1(EQ, 40d) and X~_2(CM, 60d)
        multipliers: vec![(0, RiskClass::EQ, 2, 9.0), (1, RiskClass::CM, 3, 9.0)],
    }
}

impl Preset {
    pub fn by_name(name: &str) -> Result<Preset> {
        use CorrelationKind::*;
        let one = |kind| CorrelationSpec::new(kind, 1);
        let (desc, corr, conv, stress, mask): (&str, _, _, _, Option<ReducedSetMask>) = match name {
            "sim41.i" => ("one position, independent buckets", one(Independent), BucketConvention::Cascade, None, None),
            "sim41.ii" => ("one position, uniform correlation 0.99", one(UniformPos), BucketConvention::Cascade, None, None),
            "sim41.iii" => ("one position, 0.99 across classes at equal horizon", one(RfPos), BucketConvention::Cascade, None, None),
            "sim41.iv" => ("one position, 0.99 across horizons within a class", one(LhPos), BucketConvention::Cascade, None, None),
            "sim42.i" => (
                "buckets as positions, EQ/IR hedged at -0.99",
                one(RfHedge { a: RiskClass::EQ, b: RiskClass::IR }),
                BucketConvention::Isolated,
                None,
                None,
            ),
            "sim42.ii" => (
                "buckets as positions, 10d/20d hedged at -0.99",
                one(LhHedge { a: 0, b: 1 }),
                BucketConvention::Isolated,
                None,
                None,
            ),
            "sim42.iii" => (
                "two positions hedged at -0.99 bucket by bucket",
                CorrelationSpec::new(PositionHedge, 2),
                BucketConvention::Isolated,
                None,
                None,
            ),
            "sim42.hist20" => (
                "twenty positions, each consecutive pair hedged at -0.99",
                CorrelationSpec::new(PositionHedge, 20),
                BucketConvention::Isolated,
                None,
                None,
            ),
            "sim43.setA" | "sim43.setB" => {
                let excluded = if name == "sim43.setA" {
                    [(RiskClass::EQ, 3), (RiskClass::CM, 4)]
                } else {
                    [(RiskClass::EQ, 2), (RiskClass::CM, 3)]
                };
                (
                    "two independent positions; stress correlation 0.7 with P1 EQ 40d and P2 CM 60d at 9x volatility",
                    CorrelationSpec::new(Independent, 2),
                    BucketConvention::Isolated,
                    Some(stress_43()),
                    Some(ReducedSetMask::excluding(&excluded)?),
                )
            }
            _ => {
                return Err(FrtbError::UnknownPreset {
                    name: name.to_string(),
                    available: PRESET_NAMES.join(", "),
                })
            }
        };
        Ok(Preset {
            name: name.to_string(),
            description: desc.to_string(),
            correlation: corr,
            convention: conv,
            sim: SimConfig {
                stress,
                ..SimConfig::default()
            },
            mask,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sim.seed = seed;
        self
    }

    pub fn simulate(&self) -> Result<Simulated> {
        simulate(&self.correlation, &self.sim, self.convention)
    }

    /// Simulate and assemble the scaling context (stress cube ≡ current cube
    /// when the preset has no stress period).
    pub fn context(&self, ladder: &LiquidityLadder) -> Result<(Simulated, ScalingContext)> {
        let s = self.simulate()?;
        let ctx = ScalingContext::from_cubes(&s.current, s.stress.as_ref(), self.mask.as_ref(), ladder, 0.5)?;
        Ok((s, ctx))
    }
}

/// Closed-form normal-theory values of a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReference {
    pub bucket_es: [[f64; N_HORIZONS]; N_ROWS],
    pub class_es: [f64; N_ROWS],
    pub stress_ratio: [f64; N_ROWS],
    pub imcc_total: f64,
    pub regular_es: f64,
}

fn quad_sd(cov: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    (w.transpose() * cov * w)[(0, 0)].max(0.0).sqrt()
}

fn covariance(spec: &CorrelationSpec, sigmas: &[f64]) -> Result<DMatrix<f64>> {
    let c = build_correlation(spec)?;
    Ok(DMatrix::from_fn(c.nrows(), c.ncols(), |r, k| c[(r, k)] * sigmas[r] * sigmas[k]))
}

/// Weights of the bucket `X(row, j)` over flat variables, restricted to the
/// buckets the mask keeps.
fn bucket_weights(
    n_positions: usize,
    row: usize,
    j: usize,
    convention: BucketConvention,
    ladder: &LiquidityLadder,
    mask: &ReducedSetMask,
) -> DVector<f64> {
    let mut w = DVector::zeros(n_positions * BUCKETS);
    let classes = if row == UNCONSTRAINED { 0..N_CLASSES } else { row..row + 1 };
    for n in 0..n_positions {
        for i in classes.clone() {
            for k in convention.components(j) {
                if mask.is_included(i, k) {
                    w[flat(n, i, k)] = ladder.scale(j);
                }
            }
        }
    }
    w
}

fn class_es_from(
    cov: &DMatrix<f64>,
    np: usize,
    convention: BucketConvention,
    ladder: &LiquidityLadder,
    mask: &ReducedSetMask,
    c: f64,
) -> ([[f64; N_HORIZONS]; N_ROWS], [f64; N_ROWS]) {
    let mut bucket = [[0.0; N_HORIZONS]; N_ROWS];
    let mut class = [0.0; N_ROWS];
    for i in 0..N_ROWS {
        for j in 0..N_HORIZONS {
            bucket[i][j] = c * quad_sd(cov, &bucket_weights(np, i, j, convention, ladder, mask));
        }
        class[i] = combine_bucket_es(&bucket[i], false);
    }
    (bucket, class)
}

/// Composes exact normal standard deviations through the liquidity
/// adjustment, the class aggregation and the IMCC, times the normal ES
/// constant. Rows without exposure get a unit ratio.
pub fn analytic_reference(preset: &Preset, cfg: &EsConfig, ladder: &LiquidityLadder) -> Result<AnalyticReference> {
    let c = es_standard_normal(cfg.alpha);
    let np = preset.correlation.n_positions;
    let sigmas = vec![preset.sim.sigma_10d; np * BUCKETS];
    let cov = covariance(&preset.correlation, &sigmas)?;
    let full = ReducedSetMask::full();
    let mask = preset.mask.unwrap_or(full);
    let (bucket_es, class_es) = class_es_from(&cov, np, preset.convention, ladder, &full, c);
    let (_, reduced_current) = class_es_from(&cov, np, preset.convention, ladder, &mask, c);
    let reduced_stress = match &preset.sim.stress {
        None => reduced_current,
        Some(st) => {
            let mut spec = st.correlation;
            spec.n_positions = np;
            let scov = covariance(&spec, &preset.sim.stress_sigmas(np))?;
            class_es_from(&scov, np, preset.convention, ladder, &mask, c).1
        }
    };
    let mut stress_ratio = [1.0; N_ROWS];
    let mut charges = [0.0; N_ROWS];
    for i in 0..N_ROWS {
        if reduced_current[i] > 0.0 {
            stress_ratio[i] = reduced_stress[i] / reduced_current[i];
        }
        charges[i] = stress_ratio[i] * class_es[i];
    }
    let ones = DVector::from_element(np * BUCKETS, 1.0);
    Ok(AnalyticReference {
        bucket_es,
        class_es,
        stress_ratio,
        imcc_total: aggregate(0.5, &charges),
        regular_es: c * quad_sd(&cov, &ones),
    })
}

/// Random test portfolio: independent normal buckets with per-position
/// scales and sparsity, plus a stressed re-draw and a random reduced set
/// that keeps every class partially visible.
pub fn random_portfolio(seed: u64, n_positions: usize, n_scenarios: usize) -> Result<(ScenarioCube, ScenarioCube, ReducedSetMask)> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = vec![0.0; n_positions * BUCKETS * n_scenarios];
    let mut stress = vec![0.0; n_positions * BUCKETS * n_scenarios];
    for n in 0..n_positions {
        let common: Vec<f64> = (0..n_scenarios).map(|_| StandardNormal.sample(&mut rng)).collect();
        for b in 0..BUCKETS {
            if rng.random::<f64>() < 0.3 {
                continue;
            }
            let scale = rng.random_range(0.1..2.0);
            let beta = rng.random_range(-1.0..1.0);
            let stress_mult = rng.random_range(0.8..3.0);
            let o = (n * BUCKETS + b) * n_scenarios;
            for m in 0..n_scenarios {
                let e: f64 = StandardNormal.sample(&mut rng);
                let s: f64 = StandardNormal.sample(&mut rng);
                current[o + m] = scale * (beta * common[m] + e);
                stress[o + m] = stress_mult * scale * (beta * common[m] + s);
            }
        }
    }
    let mut included = [[true; N_HORIZONS]; N_CLASSES];
    for row in included.iter_mut() {
        let drop = rng.random_range(0..N_HORIZONS);
        if rng.random::<f64>() < 0.5 {
            row[drop] = false;
        }
    }
    let ids: Vec<String> = (1..=n_positions).map(|n| format!("P{n}")).collect();
    Ok((
        ScenarioCube::new(ids.clone(), n_scenarios, BucketConvention::Cascade, current)?,
        ScenarioCube::new(ids, n_scenarios, BucketConvention::Cascade, stress)?,
        ReducedSetMask::new(included)?,
    ))
}
