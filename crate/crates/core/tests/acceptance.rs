//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Criteria listed in
//! `KNOWN_RED` are reported but do not fail the process; any other failure
//! does, and so does a known-red criterion that starts passing, so the list
//! stays honest.

use std::time::Instant;

use frtb_ima::allocation::{allocate, regular_euler_alloc, subportfolio_alloc, AllocationTable, Scheme};
use frtb_ima::es::{imcc, reduced_set_check, regular_es, EsConfig, ScalingContext};
use frtb_ima::oracle::{cas_gap, check_counterexamples, euler_gap, OracleConfig};
use frtb_ima::profile::{adjust, LiquidityLadder, RiskClass, ScenarioCube};
use frtb_ima::sim::{analytic_reference, random_portfolio, Preset};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEEDS: std::ops::Range<u64> = 0..10;

const KNOWN_RED: [&str; 3] = ["single_position_magnitudes", "hedge_magnitudes", "stress_scaling_study"];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ladder() -> LiquidityLadder {
    LiquidityLadder::default()
}

fn random_ctx(seed: u64, n_positions: usize) -> (ScenarioCube, ScenarioCube, frtb_ima::ReducedSetMask, ScalingContext) {
    let (c, s, m) = random_portfolio(seed, n_positions, 250).unwrap();
    let ctx = ScalingContext::from_cubes(&c, Some(&s), Some(&m), &ladder(), 0.5).unwrap();
    (c, s, m, ctx)
}

fn full_allocation() -> Outcome {
    let cfg = EsConfig::default();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let np = 5 + (seed as usize % 16);
        let (_, _, _, ctx) = random_ctx(1000 + seed, np);
        for scheme in Scheme::ALL {
            let t = allocate(scheme, &ctx, &cfg).unwrap();
            worst = worst.max(t.reconciliation().abs_gap / t.imcc_total);
            let second = (t.second_step_total() - t.imcc_total).abs() / t.imcc_total;
            worst = worst.max(second);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs <= 60.0,
        format!("50 portfolios x 4 schemes, worst relative gap {worst:.2e} (tol 1e-9), {secs:.1}s (limit 60s)"),
    )
}

fn euler_oracle() -> Outcome {
    let cfg = EsConfig::default();
    let ocfg = OracleConfig::default();
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut reseeded = 0;
    let mut seed = 2000;
    while done < 20 {
        let (c, _, _) = random_portfolio(seed, 3, 250).unwrap();
        seed += 1;
        let (gap, ties) = euler_gap(&adjust(&c, &ladder()), &cfg, &ocfg).unwrap();
        if ties > 0 {
            reseeded += 1;
            continue;
        }
        worst = worst.max(gap);
        done += 1;
    }
    outcome(
        worst <= 1e-8,
        format!("20 tie-free instances ({reseeded} reseeded), worst |closed - fd| / scale {worst:.2e} (tol 1e-8)"),
    )
}

fn cas_oracle() -> Outcome {
    let cfg = EsConfig::default();
    let ocfg = OracleConfig::default();
    let all: Vec<usize> = (0..120).collect();
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut seed = 3000;
    while done < 10 {
        let (c, _, _) = random_portfolio(seed, 2, 250).unwrap();
        seed += 1;
        let (gap, ties) = cas_gap(&adjust(&c, &ladder()), &all, &cfg, &ocfg).unwrap();
        if ties > 0 {
            continue;
        }
        worst = worst.max(gap);
        done += 1;
    }
    outcome(
        worst <= 1e-6,
        format!("10 instances x 120 orderings, 64 nodes, worst relative gap {worst:.2e} (tol 1e-6)"),
    )
}

fn counterexamples() -> Outcome {
    let ce = check_counterexamples(&EsConfig::default()).unwrap();
    let ratio_ref = (0.9f64 * 0.9 + 81.0).sqrt() / 1.25;
    let combined_ref = ratio_ref * 2f64.sqrt();
    let ratio_ok = (ce.normal_ratio - ratio_ref).abs() <= 1e-3;
    let combined_ok = (ce.normal_combined - combined_ref).abs() <= 1e-3;
    // two-decimal display: ratio truncated, product rounded
    let shown_ratio = (ce.normal_ratio * 100.0).floor() / 100.0;
    let shown_combined = (shown_ratio * 2f64.sqrt() * 100.0).round() / 100.0;
    let printed_ok = shown_ratio == 7.23 && shown_combined == 10.22;
    let pass = ce.es_subadditivity_violated()
        && ce.es_subadditivity_floored_holds()
        && ce.bernoulli_es[2] == 1.0
        && ratio_ok
        && combined_ok
        && printed_ok
        && ce.imcc_subadditivity_violated()
        && ce.normal_combined > 10.2;
    outcome(
        pass,
        format!(
            "ES(X+Y)={} vs {}+{} unfloored, {} floored; ratio {:.5} (ref {ratio_ref:.5}), ratio*sqrt2 {:.4} (ref {combined_ref:.4}) > {:.2}; printed {shown_ratio}/{shown_combined}",
            ce.bernoulli_es[2], ce.bernoulli_es[0], ce.bernoulli_es[1], ce.bernoulli_es_floored[2],
            ce.normal_ratio, ce.normal_combined, ce.normal_separate
        ),
    )
}

fn homogeneity() -> Outcome {
    let cfg = EsConfig::default();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let (_, _, _, ctx) = random_ctx(4000 + seed, 6);
        let base = imcc(&ctx, &cfg).unwrap().imcc_total;
        for a in [0.5, 2.0, 10.0] {
            let scaled = imcc(&ctx.scaled(a), &cfg).unwrap().imcc_total;
            worst = worst.max((scaled - a * base).abs() / (a * base));
        }
    }
    outcome(worst <= 1e-9, format!("a in {{0.5, 2, 10}}, 5 portfolios, worst rel gap {worst:.2e} (tol 1e-9)"))
}

fn within(x: f64, target: f64, band: f64) -> bool {
    (x - target).abs() <= band * target
}

fn single_position_magnitudes() -> Outcome {
    let cfg = EsConfig::default();
    let targets = [
        ("sim41.i", 12.48, 3.28),
        ("sim41.ii", 28.57, 16.70),
        ("sim41.iii", 18.28, 7.81),
        ("sim41.iv", 21.00, 7.59),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t_imcc, t_reg) in targets {
        let preset = Preset::by_name(name).unwrap();
        let mut hits = 0;
        let (mut sum_i, mut sum_r) = (0.0, 0.0);
        for seed in SEEDS {
            let (s, ctx) = preset.clone().with_seed(seed).context(&ladder()).unwrap();
            let i = imcc(&ctx, &cfg).unwrap().imcc_total;
            let r = regular_es(&s.current, &cfg).unwrap();
            sum_i += i;
            sum_r += r;
            if within(i, t_imcc, 0.10) && within(r, t_reg, 0.10) {
                hits += 1;
            }
        }
        let n = SEEDS.count() as f64;
        let (mi, mr) = (sum_i / n, sum_r / n);
        let a = analytic_reference(&preset, &cfg, &ladder()).unwrap();
        let analytic_ok = within(a.imcc_total, mi, 0.08) && within(a.regular_es, mr, 0.08);
        pass &= hits >= 8 && analytic_ok;
        parts.push(format!(
            "{name}: {hits}/10 seeds in band, mean {mi:.2}/{mr:.2}, analytic {:.2}/{:.2} {}",
            a.imcc_total,
            a.regular_es,
            if analytic_ok { "ok" } else { "off" }
        ));
    }
    outcome(pass, parts.join("; "))
}

fn ratio_of(name: &str, seed: u64, cfg: &EsConfig) -> (f64, f64) {
    let (s, ctx) = Preset::by_name(name).unwrap().with_seed(seed).context(&ladder()).unwrap();
    (imcc(&ctx, cfg).unwrap().imcc_total, regular_es(&s.current, cfg).unwrap())
}

fn hedge_magnitudes() -> Outcome {
    let cfg = EsConfig::default();
    let targets = [("sim42.i", 7.90), ("sim42.ii", 8.43), ("sim42.iii", 0.84)];
    let mut in_band = [0usize; 3];
    let mut means = [0.0; 3];
    let mut order_ok = 0;
    for seed in SEEDS {
        let mut ratio = [0.0; 3];
        for (k, (name, target)) in targets.iter().enumerate() {
            let (i, r) = ratio_of(name, seed, &cfg);
            means[k] += i / 10.0;
            ratio[k] = i / r;
            if within(i, *target, 0.15) {
                in_band[k] += 1;
            }
        }
        // (iii) below both, and (i), (ii) closer to each other than to (iii)
        let low = ratio[0].min(ratio[1]);
        if ratio[2] < low && (ratio[0] - ratio[1]).abs() < low - ratio[2] {
            order_ok += 1;
        }
    }
    let pass = in_band.iter().all(|&h| h == 10) && order_ok == 10;
    outcome(
        pass,
        format!(
            "IMCC in +-15% band on {}/{}/{} of 10 seeds (means {:.2}/{:.2}/{:.2} vs 7.90/8.43/0.84); ordering held on {order_ok}/10",
            in_band[0], in_band[1], in_band[2], means[0], means[1], means[2]
        ),
    )
}

fn min_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn hedging_sign() -> Outcome {
    let cfg = EsConfig::default();
    let mut negatives = 0;
    for name in ["sim42.i", "sim42.ii"] {
        for seed in SEEDS {
            let (_, ctx) = Preset::by_name(name).unwrap().with_seed(seed).context(&ladder()).unwrap();
            for scheme in [Scheme::Euler, Scheme::Cas] {
                let t = allocate(scheme, &ctx, &cfg).unwrap();
                if min_entry(&t.constrained) < 0.0 || min_entry(&t.second_step) < 0.0 {
                    negatives += 1;
                }
            }
        }
    }
    let mut smaller = 0;
    let mut worst = (0.0f64, 0.0f64);
    for seed in SEEDS {
        let (s, ctx) = Preset::by_name("sim42.iii").unwrap().with_seed(seed).context(&ladder()).unwrap();
        let reg = regular_euler_alloc(&s.current, &cfg).unwrap();
        let reg_min = (min_entry(&reg.raw) / reg.es).min(0.0).abs();
        let frtb_min = [Scheme::Euler, Scheme::Cas]
            .into_iter()
            .map(|sc| {
                let t = allocate(sc, &ctx, &cfg).unwrap();
                (min_entry(&t.second_step) / t.imcc_total).min(0.0).abs()
            })
            .fold(0.0f64, f64::max);
        worst = (worst.0.max(frtb_min), worst.1.max(reg_min));
        if frtb_min < reg_min {
            smaller += 1;
        }
    }
    outcome(
        negatives == 0 && smaller == 10,
        format!(
            "hedges (i)/(ii): {negatives} runs with a negative allocation; position hedge: FRTB minimum smaller on {smaller}/10 seeds (largest {:.1}% vs {:.1}%)",
            100.0 * worst.0,
            100.0 * worst.1
        ),
    )
}

fn pct(t: &AllocationTable, n: usize, class: RiskClass, k: usize) -> f64 {
    100.0 * t.raw_bucket(n, class.index(), k) / t.imcc_total
}

/// (position, class, column) of the two buckets stressed at 9x.
const STRESSED: [(usize, RiskClass, usize); 2] = [(1, RiskClass::CM, 3), (0, RiskClass::EQ, 2)];

fn stress_scaling_study() -> Outcome {
    let cfg = EsConfig::default();
    let mut parts = Vec::new();

    // reduced-set coverage
    let mut worst_cov = [f64::INFINITY; 2];
    let mut cov_fail = 0;
    for (k, name) in ["sim43.setA", "sim43.setB"].iter().enumerate() {
        for seed in SEEDS {
            let (_, ctx) = Preset::by_name(name).unwrap().with_seed(seed).context(&ladder()).unwrap();
            let chk = reduced_set_check(&ctx, &cfg).unwrap();
            for r in &chk.rows {
                if let Some(x) = r.ratio {
                    worst_cov[k] = worst_cov[k].min(x);
                }
            }
            if !chk.all_pass() {
                cov_fail += 1;
            }
        }
    }
    parts.push(format!(
        "coverage >= 75% failed on {cov_fail}/20 runs (lowest {:.0}% Set A, {:.0}% Set B)",
        100.0 * worst_cov[0],
        100.0 * worst_cov[1]
    ));

    // Set B: identical stress data gives identical allocations
    let mut exact_gap = 0.0f64;
    let mut redraw_gap = 0.0f64;
    for seed in SEEDS {
        let p = Preset::by_name("sim43.setB").unwrap().with_seed(seed);
        let s = p.simulate().unwrap();
        let same = ScalingContext::from_cubes(&s.current, Some(&s.current), p.mask.as_ref(), &ladder(), 0.5).unwrap();
        for (plain, scaled) in [(Scheme::Euler, Scheme::EulerScaled), (Scheme::Cas, Scheme::CasScaled)] {
            let a = allocate(plain, &same, &cfg).unwrap();
            let b = allocate(scaled, &same, &cfg).unwrap();
            for (x, y) in a.second_step.iter().zip(&b.second_step) {
                exact_gap = exact_gap.max((x - y).abs() / a.imcc_total);
            }
        }
        let ctx = ScalingContext::from_cubes(&s.current, s.stress.as_ref(), p.mask.as_ref(), &ladder(), 0.5).unwrap();
        let a = allocate(Scheme::Euler, &ctx, &cfg).unwrap();
        let b = allocate(Scheme::EulerScaled, &ctx, &cfg).unwrap();
        for (n, c, k) in STRESSED {
            redraw_gap = redraw_gap.max((pct(&a, n, c, k) - pct(&b, n, c, k)).abs());
        }
    }
    parts.push(format!(
        "Set B equal stress: max gap {exact_gap:.1e} of IMCC (tol 1e-9); re-drawn: {redraw_gap:.3} pp (tol 0.1)"
    ));

    // Set A: scaled above unscaled on the stressed buckets
    let mut above = 0;
    let mut mean = [[0.0; 2]; 2];
    for seed in SEEDS {
        let (_, ctx) = Preset::by_name("sim43.setA").unwrap().with_seed(seed).context(&ladder()).unwrap();
        let plain = allocate(Scheme::Euler, &ctx, &cfg).unwrap();
        let scaled = allocate(Scheme::EulerScaled, &ctx, &cfg).unwrap();
        let mut ok = true;
        for (b, (n, c, k)) in STRESSED.into_iter().enumerate() {
            let (s, u) = (pct(&scaled, n, c, k), pct(&plain, n, c, k));
            ok &= s > u;
            mean[b][0] += s / 10.0;
            mean[b][1] += u / 10.0;
        }
        if ok {
            above += 1;
        }
    }
    let target = [[4.00, 2.24], [5.04, 3.26]];
    let magnitudes_ok = (0..2).all(|b| (0..2).all(|c| (mean[b][c] - target[b][c]).abs() <= 1.0));
    parts.push(format!(
        "Set A scaled > unscaled on {above}/10 seeds; mean CM 60d P2 {:.2}/{:.2} pp, EQ 40d P1 {:.2}/{:.2} pp vs 4.00/2.24, 5.04/3.26 (+-1 pp)",
        mean[0][0], mean[0][1], mean[1][0], mean[1][1]
    ));

    let pass = cov_fail == 0 && exact_gap <= 1e-9 && redraw_gap <= 0.1 && above >= 9 && magnitudes_ok;
    outcome(pass, parts.join("; "))
}

fn lh_monotonicity() -> Outcome {
    let cfg = EsConfig::default();
    let mut violations = 0;
    for seed in SEEDS {
        let (_, ctx) = Preset::by_name("sim41.ii").unwrap().with_seed(seed).context(&ladder()).unwrap();
        for scheme in Scheme::ALL {
            let t = allocate(scheme, &ctx, &cfg).unwrap();
            for i in 0..5 {
                for k in 1..5 {
                    if t.raw_bucket_percent(i, k) < t.raw_bucket_percent(i, k - 1) {
                        violations += 1;
                    }
                }
            }
        }
    }
    outcome(violations == 0, format!("10 seeds x 4 schemes, {violations} decreasing steps"))
}

fn additivity() -> Outcome {
    let cfg = EsConfig::default();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(5000);
    for seed in 0..10 {
        let np = 4 + seed as usize % 5;
        let (c, s, m, ctx) = random_ctx(5000 + seed, np);
        let mut order: Vec<usize> = (0..np).collect();
        order.shuffle(&mut rng);
        let cut = 1 + (seed as usize % (np - 1));
        let mut a: Vec<usize> = order[..cut].to_vec();
        let mut b: Vec<usize> = order[cut..].to_vec();
        a.sort_unstable();
        b.sort_unstable();
        // merge A into one position, then what remains (B) into another
        let merge = |cube: &ScenarioCube| {
            let first = cube.merge_positions(&a, "A").unwrap();
            let rest: Vec<usize> = (1..first.n_positions()).collect();
            let second = first.merge_positions(&rest, "B").unwrap();
            // merge_positions puts the merged group first
            let mut raw = second.raw().to_vec();
            let block = raw.len() / 2;
            raw.rotate_left(block);
            ScenarioCube::new(vec!["A".into(), "B".into()], second.n_scenarios(), second.convention(), raw).unwrap()
        };
        let merged = ScalingContext::from_cubes(&merge(&c), Some(&merge(&s)), Some(&m), &ladder(), 0.5).unwrap();
        for scheme in Scheme::ALL {
            let full = allocate(scheme, &ctx, &cfg).unwrap();
            let two = allocate(scheme, &merged, &cfg).unwrap();
            for (sub, k) in [(&a, 0), (&b, 1)] {
                let x = subportfolio_alloc(&full, sub).unwrap();
                let y = two.totals[k];
                worst = worst.max((x - y).abs() / full.imcc_total);
            }
        }
    }
    outcome(worst <= 1e-9, format!("10 bipartitions x 4 schemes, worst rel gap {worst:.2e} (tol 1e-9)"))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("full_allocation", full_allocation),
        ("euler_oracle", euler_oracle),
        ("cas_oracle", cas_oracle),
        ("counterexamples", counterexamples),
        ("homogeneity", homogeneity),
        ("single_position_magnitudes", single_position_magnitudes),
        ("hedge_magnitudes", hedge_magnitudes),
        ("hedging_sign", hedging_sign),
        ("stress_scaling_study", stress_scaling_study),
        ("lh_monotonicity", lh_monotonicity),
        ("additivity", additivity),
    ];
    let mut unexpected = Vec::new();
    let mut passed = 0;
    for (name, f) in &criteria {
        let o = f();
        let known = KNOWN_RED.contains(name);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag:<12} {name}: {}", o.detail);
        if o.pass {
            passed += 1;
        }
        if o.pass == known {
            unexpected.push(*name);
        }
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
