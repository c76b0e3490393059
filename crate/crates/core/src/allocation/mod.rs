//! Euler and constrained Aumann-Shapley (CAS) allocation of the IMCC, with
//! and without the stress-scaling adjustment, and the second step that
//! re-expresses bucket capital on the raw 10-day buckets.
//!
//! Every scheme allocates to `X_n(i,j)` an amount of the form
//! `sum_t kappa_t(i,j) * SE_t(X_n(i,j) | X_t(i,j))`, where `t` runs over the
//! profiles involved (full/current, reduced/current, reduced/stress) and the
//! coefficient `kappa_t` depends only on the bucket. Full allocation and
//! additivity follow from the linearity of scenario extraction.

mod extract;
mod permutation;

pub use extract::{scenario_extract, Extractor};
pub use permutation::PermutationTable;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FrtbError, Result};
use crate::es::{
    empirical_var_es, imcc_from, EsConfig, EsReport, ProfileEs, ScalingContext, ScalingEs,
    DEGENERATE_TOL,
};
use crate::profile::{
    row_label, RiskProfile, ScenarioCube, N_CLASSES, N_HORIZONS, N_ROWS, UNCONSTRAINED,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Euler,
    Cas,
    EulerScaled,
    CasScaled,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Euler,
        Scheme::Cas,
        Scheme::EulerScaled,
        Scheme::CasScaled,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Cas => "cas",
            Scheme::EulerScaled => "euler-scaled",
            Scheme::CasScaled => "cas-scaled",
        }
    }

    pub fn parse(s: &str) -> Result<Scheme> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| FrtbError::Validation(format!("unknown scheme `{s}`")))
    }

    fn is_cas(self) -> bool {
        matches!(self, Scheme::Cas | Scheme::CasScaled)
    }

    fn is_scaled(self) -> bool {
        matches!(self, Scheme::EulerScaled | Scheme::CasScaled)
    }
}

/// Which profile of the scaling context a term extracts against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    FullCurrent,
    ReducedCurrent,
    ReducedStress,
}

impl Period {
    fn profile(self, ctx: &ScalingContext) -> &RiskProfile {
        match self {
            Period::FullCurrent => &ctx.full_current,
            Period::ReducedCurrent => &ctx.reduced_current,
            Period::ReducedStress => &ctx.reduced_stress,
        }
    }
}

/// `kappa_t(i,j)` for one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub period: Period,
    pub coef: [[f64; N_HORIZONS]; N_ROWS],
}

/// Euler weight `ES(X(i,j)) / ES(X(i))` of bucket `j` in a class. Zero for a
/// bucket without (floored) ES; `None` when the class ES itself vanishes.
pub fn euler_weight(bucket_es: &[f64; N_HORIZONS], j: usize, floor: bool) -> Option<f64> {
    let class = crate::es::combine_bucket_es(bucket_es, floor);
    if class < DEGENERATE_TOL {
        return None;
    }
    let e = bucket_es[j];
    if floor && e <= 0.0 {
        return Some(0.0);
    }
    Some(e / class)
}

/// Incremental class ES induced by bucket `j` when the horizons enter in
/// the order of permutation `r`, divided by the bucket's stand-alone ES.
/// Zero when the stand-alone ES vanishes (or is non-positive under the floor).
pub fn eta_weight(
    bucket_es: &[f64; N_HORIZONS],
    perms: &PermutationTable,
    r: usize,
    j: usize,
    floor: bool,
) -> f64 {
    let eff = |x: f64| if floor { x.max(0.0) } else { x };
    let e = eff(bucket_es[j]);
    if e.abs() < DEGENERATE_TOL || (floor && e <= 0.0) {
        return 0.0;
    }
    let pos = perms.position_of(r, j);
    let before: f64 = (0..pos)
        .map(|s| eff(bucket_es[perms.horizon_at(r, s)]).powi(2))
        .sum();
    ((before + e * e).sqrt() - before.sqrt()) / e
}

/// `(1/120) sum_r eta(r, i, j)`, summed in permutation order.
pub fn mean_eta(bucket_es: &[f64; N_HORIZONS], perms: &PermutationTable, j: usize, floor: bool) -> f64 {
    let total: f64 = (0..perms.len())
        .map(|r| eta_weight(bucket_es, perms, r, j, floor))
        .sum();
    total / perms.len() as f64
}

fn row_bucket_es(profile: &RiskProfile, row: usize, cfg: &EsConfig) -> Result<[f64; N_HORIZONS]> {
    let mut es = [0.0; N_HORIZONS];
    for (j, e) in es.iter_mut().enumerate() {
        *e = empirical_var_es(profile.bucket(row, j), cfg)?.es;
    }
    Ok(es)
}

fn check_index(profile: &RiskProfile, n: usize, i: usize, j: usize) -> Result<()> {
    if n >= profile.n_positions() || i >= N_ROWS || j >= N_HORIZONS {
        return Err(FrtbError::Shape(format!("index ({n}, {i}, {j}) out of range")));
    }
    Ok(())
}

/// Euler allocation of the FRTB class ES of row `i` to `X_n(i,j)`.
pub fn euler_frtb_es_alloc(
    profile: &RiskProfile,
    n: usize,
    i: usize,
    j: usize,
    cfg: &EsConfig,
) -> Result<f64> {
    check_index(profile, n, i, j)?;
    let es = row_bucket_es(profile, i, cfg)?;
    let weight = euler_weight(&es, j, cfg.floor_negative_es).ok_or(
        FrtbError::DegenerateDenominator {
            class: row_label(i),
            value: 0.0,
        },
    )?;
    if weight == 0.0 {
        return Ok(0.0);
    }
    Ok(weight * scenario_extract(profile.position_bucket(n, i, j), profile.bucket(i, j), cfg)?)
}

/// `eta(r, i, j)` evaluated on a profile.
pub fn eta(profile: &RiskProfile, perms: &PermutationTable, r: usize, i: usize, j: usize, cfg: &EsConfig) -> Result<f64> {
    check_index(profile, 0, i, j)?;
    let es = row_bucket_es(profile, i, cfg)?;
    Ok(eta_weight(&es, perms, r, j, cfg.floor_negative_es))
}

/// CAS allocation of the FRTB class ES for permutation `r`.
pub fn cas_frtb_es_alloc(
    profile: &RiskProfile,
    perms: &PermutationTable,
    r: usize,
    n: usize,
    i: usize,
    j: usize,
    cfg: &EsConfig,
) -> Result<f64> {
    check_index(profile, n, i, j)?;
    let es = row_bucket_es(profile, i, cfg)?;
    let w = eta_weight(&es, perms, r, j, cfg.floor_negative_es);
    if w == 0.0 {
        return Ok(0.0);
    }
    Ok(w * scenario_extract(profile.position_bucket(n, i, j), profile.bucket(i, j), cfg)?)
}

/// Allocation of the IMCC under one scheme.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationTable {
    pub scheme: Scheme,
    pub position_ids: Vec<String>,
    /// First step, `(n, row, j)` with rows CM..IR, UNC.
    pub constrained: Vec<f64>,
    /// Second step on raw buckets, `(n, class, k)`, constrained and
    /// unconstrained capital combined.
    pub second_step: Vec<f64>,
    pub totals: Vec<f64>,
    pub imcc_total: f64,
    pub terms: Vec<Term>,
}

impl AllocationTable {
    pub fn n_positions(&self) -> usize {
        self.position_ids.len()
    }

    pub fn first(&self, n: usize, row: usize, j: usize) -> f64 {
        self.constrained[(n * N_ROWS + row) * N_HORIZONS + j]
    }

    pub fn raw_bucket(&self, n: usize, class: usize, k: usize) -> f64 {
        self.second_step[(n * N_CLASSES + class) * N_HORIZONS + k]
    }

    pub fn grand_total(&self) -> f64 {
        self.totals.iter().sum()
    }

    pub fn second_step_total(&self) -> f64 {
        self.second_step.iter().sum()
    }

    pub fn reconciliation(&self) -> Reconciliation {
        let grand_total = self.grand_total();
        Reconciliation {
            scheme: self.scheme,
            grand_total,
            second_step_total: self.second_step_total(),
            imcc_total: self.imcc_total,
            abs_gap: (grand_total - self.imcc_total).abs(),
        }
    }

    /// Percentage of the IMCC landing on raw bucket `(class, k)`, summed over
    /// positions.
    pub fn raw_bucket_percent(&self, class: usize, k: usize) -> f64 {
        let s: f64 = (0..self.n_positions()).map(|n| self.raw_bucket(n, class, k)).sum();
        100.0 * s / self.imcc_total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub scheme: Scheme,
    pub grand_total: f64,
    pub second_step_total: f64,
    pub imcc_total: f64,
    pub abs_gap: f64,
}

/// Builds the per-profile coefficients of a scheme.
fn scheme_terms(
    scheme: Scheme,
    ctx: &ScalingContext,
    es: &ScalingEs,
    report: &EsReport,
    cfg: &EsConfig,
) -> Vec<Term> {
    let perms = PermutationTable::new();
    let floor = cfg.floor_negative_es;
    let bucket_weight = |p: &ProfileEs, i: usize, j: usize| -> f64 {
        if scheme.is_cas() {
            mean_eta(&p.bucket_es[i], &perms, j, floor)
        } else {
            euler_weight(&p.bucket_es[i], j, floor).unwrap_or(0.0)
        }
    };

    let periods: &[Period] = if scheme.is_scaled() {
        &[Period::FullCurrent, Period::ReducedStress, Period::ReducedCurrent]
    } else {
        &[Period::FullCurrent]
    };
    periods
        .iter()
        .map(|&period| {
            let mut coef = [[0.0; N_HORIZONS]; N_ROWS];
            for (i, row) in coef.iter_mut().enumerate() {
                let Some(ratio) = report.stress_ratio[i] else {
                    continue;
                };
                let w = ctx.row_weight(i);
                let fc = es.full_current.class_es[i];
                let rc = es.reduced_current.class_es[i];
                let rs = es.reduced_stress.class_es[i];
                let (factor, p) = match period {
                    Period::FullCurrent => (w * ratio, &es.full_current),
                    Period::ReducedStress => (w * fc / rc, &es.reduced_stress),
                    Period::ReducedCurrent => (-w * rs * fc / (rc * rc), &es.reduced_current),
                };
                for (j, c) in row.iter_mut().enumerate() {
                    *c = factor * bucket_weight(p, i, j);
                }
            }
            Term { period, coef }
        })
        .collect()
}

struct TermExtractors<'a> {
    coef: &'a [[f64; N_HORIZONS]; N_ROWS],
    profile: &'a RiskProfile,
    extractors: Vec<Extractor>,
}

fn prepare<'a>(
    terms: &'a [Term],
    ctx: &'a ScalingContext,
    es: &ScalingEs,
    cfg: &EsConfig,
) -> Vec<TermExtractors<'a>> {
    terms
        .iter()
        .map(|t| {
            let profile = t.period.profile(ctx);
            let pes = match t.period {
                Period::FullCurrent => &es.full_current,
                Period::ReducedCurrent => &es.reduced_current,
                Period::ReducedStress => &es.reduced_stress,
            };
            let extractors = (0..N_ROWS * N_HORIZONS)
                .map(|b| {
                    let (i, j) = (b / N_HORIZONS, b % N_HORIZONS);
                    Extractor::from_tail(profile.bucket(i, j), pes.tail(i, j), cfg)
                })
                .collect();
            TermExtractors {
                coef: &t.coef,
                profile,
                extractors,
            }
        })
        .collect()
}

/// First-step allocation `(n, row, j)`.
fn first_step(prepared: &[TermExtractors<'_>], n_positions: usize) -> Vec<f64> {
    let per_position: Vec<Vec<f64>> = (0..n_positions)
        .into_par_iter()
        .map(|n| {
            let mut out = vec![0.0; N_ROWS * N_HORIZONS];
            for t in prepared {
                for i in 0..N_ROWS {
                    for j in 0..N_HORIZONS {
                        let c = t.coef[i][j];
                        if c != 0.0 {
                            let se = t.extractors[i * N_HORIZONS + j]
                                .extract(t.profile.position_bucket(n, i, j));
                            out[i * N_HORIZONS + j] += c * se;
                        }
                    }
                }
            }
            out
        })
        .collect();
    per_position.concat()
}

/// Second step: capital of `X_n(i,j)` is split over its raw components
/// `scale_j * raw_n(i,k)`, `k >= j`, by scenario extraction against the same
/// reference bucket, then summed over `j <= k`. Unconstrained capital of
/// `X_n(UNC, j)` is split over every class component against `X(UNC, j)`.
fn second_step_from(prepared: &[TermExtractors<'_>], n_positions: usize) -> Vec<f64> {
    let per_position: Vec<Vec<f64>> = (0..n_positions)
        .into_par_iter()
        .map(|n| {
            let mut out = vec![0.0; N_CLASSES * N_HORIZONS];
            for t in prepared {
                let p = t.profile;
                let scale = |j: usize| p.ladder().scale(j);
                for row in 0..N_ROWS {
                    for j in 0..N_HORIZONS {
                        let c = t.coef[row][j];
                        if c == 0.0 {
                            continue;
                        }
                        let ex = &t.extractors[row * N_HORIZONS + j];
                        let classes = if row == UNCONSTRAINED { 0..N_CLASSES } else { row..row + 1 };
                        for class in classes {
                            for k in p.components(j) {
                                let se = ex.extract(p.raw().bucket(n, class, k));
                                out[class * N_HORIZONS + k] += c * scale(j) * se;
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    per_position.concat()
}

/// Allocate the IMCC of `ctx` under `scheme`.
pub fn allocate(scheme: Scheme, ctx: &ScalingContext, cfg: &EsConfig) -> Result<AllocationTable> {
    cfg.validate()?;
    let es = ScalingEs::compute(ctx, cfg)?;
    let report = imcc_from(ctx, cfg, &es)?;
    let terms = scheme_terms(scheme, ctx, &es, &report, cfg);
    let np = ctx.n_positions();
    let prepared = prepare(&terms, ctx, &es, cfg);
    let constrained = first_step(&prepared, np);
    let second = second_step_from(&prepared, np);
    drop(prepared);
    let totals = constrained
        .chunks(N_ROWS * N_HORIZONS)
        .map(|c| c.iter().sum())
        .collect();
    Ok(AllocationTable {
        scheme,
        position_ids: ctx.full_current.raw().position_ids().to_vec(),
        constrained,
        second_step: second,
        totals,
        imcc_total: report.imcc_total,
        terms,
    })
}

pub fn euler_imcc_alloc(ctx: &ScalingContext, cfg: &EsConfig) -> Result<AllocationTable> {
    allocate(Scheme::Euler, ctx, cfg)
}

pub fn cas_imcc_alloc(ctx: &ScalingContext, cfg: &EsConfig) -> Result<AllocationTable> {
    allocate(Scheme::Cas, ctx, cfg)
}

pub fn euler_imcc_scaled_alloc(ctx: &ScalingContext, cfg: &EsConfig) -> Result<AllocationTable> {
    allocate(Scheme::EulerScaled, ctx, cfg)
}

pub fn cas_imcc_scaled_alloc(ctx: &ScalingContext, cfg: &EsConfig) -> Result<AllocationTable> {
    allocate(Scheme::CasScaled, ctx, cfg)
}

/// Recompute the raw-bucket allocation `(n, class, k)` of a table.
pub fn second_step(table: &AllocationTable, ctx: &ScalingContext, cfg: &EsConfig) -> Result<Vec<f64>> {
    if table.n_positions() != ctx.n_positions() {
        return Err(FrtbError::Shape("table and context disagree on positions".into()));
    }
    let es = ScalingEs::compute(ctx, cfg)?;
    let prepared = prepare(&table.terms, ctx, &es, cfg);
    Ok(second_step_from(&prepared, ctx.n_positions()))
}

/// Capital allocated to the positions in `subset`.
pub fn subportfolio_alloc(table: &AllocationTable, subset: &[usize]) -> Result<f64> {
    subset
        .iter()
        .map(|&n| {
            table
                .totals
                .get(n)
                .copied()
                .ok_or_else(|| FrtbError::Shape(format!("position {n} out of range")))
        })
        .sum()
}

/// Euler allocation of the regular ES of the netted 10-day loss to every raw
/// bucket, `(n, class, k)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularAllocation {
    pub position_ids: Vec<String>,
    pub raw: Vec<f64>,
    pub es: f64,
}

impl RegularAllocation {
    pub fn raw_bucket(&self, n: usize, class: usize, k: usize) -> f64 {
        self.raw[(n * N_CLASSES + class) * N_HORIZONS + k]
    }

    pub fn position_total(&self, n: usize) -> f64 {
        self.raw[n * N_CLASSES * N_HORIZONS..(n + 1) * N_CLASSES * N_HORIZONS]
            .iter()
            .sum()
    }
}

pub fn regular_euler_alloc(cube: &ScenarioCube, cfg: &EsConfig) -> Result<RegularAllocation> {
    let net = cube.net_loss();
    let tail = empirical_var_es(&net, cfg)?;
    let ex = Extractor::from_tail(&net, &tail, cfg);
    let mut raw = Vec::with_capacity(cube.n_positions() * N_CLASSES * N_HORIZONS);
    for n in 0..cube.n_positions() {
        for i in 0..N_CLASSES {
            for k in 0..N_HORIZONS {
                raw.push(ex.extract(cube.bucket(n, i, k)));
            }
        }
    }
    Ok(RegularAllocation {
        position_ids: cube.position_ids().to_vec(),
        raw,
        es: tail.es,
    })
}
