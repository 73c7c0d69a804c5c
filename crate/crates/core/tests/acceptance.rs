//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Failing criteria are reported, and the process
//! exits nonzero only when `THZMEC_ACCEPTANCE_STRICT` is set.

use std::time::{Duration, Instant};

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use thzmec::delay_model::{DecisionVariables, DelayModel, DualState};
use thzmec::harness::{run_algorithm, run_sweep, sweep_means, Algorithm, SolverSettings, SweepParam, SweepSpec};
use thzmec::numerics::{finite_diff_check, lambert_w0, relay_convexity_threshold};
use thzmec::pdd::subproblems::{
    relay_rule, solve_sp2, sp2_objective, sp3_objective, sp4_objective, PowerMode,
};
use thzmec::pdd::{run_pdd, PddConfig};
use thzmec::queueing::erlang_c;
use thzmec::report::RunReport;
use thzmec::scenario::{NetworkScenario, ScenarioConfig};

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

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
}

fn report(c: &Criterion, elapsed: Duration, o: &Outcome) -> bool {
    let in_time = elapsed <= c.budget;
    let pass = o.pass && in_time;
    let time = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{:.2}s OVER BUDGET {:.0}s", elapsed.as_secs_f64(), c.budget.as_secs_f64())
    };
    println!(
        "{} [{}] {}: {} ({time})",
        if pass { "PASS" } else { "FAIL" },
        c.id,
        c.name,
        o.detail
    );
    pass
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

// ---- 1 ----

/// `C(s, rho)` straight from the factorial formula, with `a = s rho`.
fn erlang_c_direct(s: usize, rho: f64) -> f64 {
    let a = s as f64 * rho;
    let mut fact = 1.0;
    let mut sum = 0.0;
    for k in 0..s {
        if k > 0 {
            fact *= k as f64;
        }
        sum += a.powi(k as i32) / fact;
    }
    let top = a.powi(s as i32) / (fact * s as f64) / (1.0 - rho);
    top / (sum + top)
}

fn erlang_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for s in 1..=20 {
        for k in 1..=19 {
            let rho = k as f64 * 0.05;
            let r = erlang_c(s, rho).unwrap();
            let d = erlang_c_direct(s, rho);
            worst = worst.max((r - d).abs() / d);
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e} (tol 1e-12)"))
}

// ---- 2 ----

fn harel_dominance() -> Outcome {
    let mut violations = 0;
    let mut cells = 0;
    for s in 2..=16 {
        for k in 1..=99 {
            let rho = k as f64 * 0.01;
            cells += 1;
            if erlang_c(s, rho).unwrap() >= rho.powf((s as f64).sqrt()) {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations on {cells} cells"))
}

// ---- 3 and 7 ----

fn table1(seed: u64) -> NetworkScenario {
    ScenarioConfig::table1().generate(seed).unwrap()
}

fn bound_tightness(runs: &[RunReport]) -> Outcome {
    let converged: Vec<&RunReport> = runs.iter().filter(|r| r.converged).take(10).collect();
    if converged.len() < 10 {
        return outcome(false, format!("only {} converged runs", converged.len()));
    }
    let ratios: Vec<f64> = converged.iter().map(|r| r.mean_delay_s / r.mean_delay_upper_s).collect();
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    outcome(min >= 0.99, format!("min ratio {min:.4}, mean {mean:.4} over 10 runs (tol >= 0.99)"))
}

fn pdd_contract(runs: &[RunReport]) -> Outcome {
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_h = 0.0f64;
    let mut infeasible = Vec::new();
    for r in runs {
        for sweep in &r.objective_trace {
            for w in sweep.windows(2) {
                worst_rise = worst_rise.max(w[1] - w[0]);
            }
        }
        worst_h = worst_h.max(r.final_violation);
        let sc = table1(r.seed);
        let model = DelayModel::new(&sc).unwrap();
        let mut ok = r.rounded.check_binary_feasible(&sc, 1e-9).is_ok();
        ok &= model
            .mec_loads(&r.rounded.assoc)
            .iter()
            .all(|&l| l < sc.queue.capacity());
        if !ok {
            infeasible.push(r.seed);
        }
    }
    let pass = worst_rise <= 1e-9 && worst_h <= 1e-3 && infeasible.is_empty();
    outcome(
        pass,
        format!(
            "{} runs, largest sweep rise {worst_rise:.2e} (tol 1e-9), max final h {worst_h:.2e} (tol 1e-3), infeasible seeds {infeasible:?}",
            runs.len()
        ),
    )
}

// ---- 4 ----

fn remark1_threshold() -> Outcome {
    let g = relay_convexity_threshold();
    outcome((g - 41.412).abs() <= 0.01, format!("root {g:.5} (target 41.412 +- 0.01)"))
}

// ---- 5 ----

fn single_uav(ni: usize, seed: u64) -> (NetworkScenario, DecisionVariables) {
    let sc = ScenarioConfig {
        num_iots: ni,
        num_mecs: 2,
        num_uavs: 1,
        area_side: 200.0,
        ..ScenarioConfig::table1()
    }
    .generate(seed)
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = DecisionVariables::zeros(&sc);
    v.positions[0] = [rng.gen::<f64>() * 200.0, rng.gen::<f64>() * 200.0, sc.uav_altitude];
    for i in 0..ni {
        v.alpha[[i, 0]] = 1.0;
        v.alpha_slack[[i, 0]] = 1.0;
        v.assoc[[i, rng.gen_range(0..2), i]] = 1.0;
        v.power[[i, 0]] = sc.uav_tx_power_budget / ni as f64;
    }
    v.assoc_slack = v.assoc.clone();
    (sc, v)
}

/// Minimum over powers on the simplex with `steps` levels per unit of the budget.
fn grid_min(f: &dyn Fn(&[f64]) -> f64, n: usize, budget: f64, steps: usize) -> f64 {
    fn rec(f: &dyn Fn(&[f64]) -> f64, p: &mut Vec<f64>, n: usize, left: usize, step: f64, best: &mut f64) {
        if p.len() + 1 == n {
            p.push(left as f64 * step);
            *best = best.min(f(p));
            p.pop();
            return;
        }
        for k in 1..left {
            p.push(k as f64 * step);
            rec(f, p, n, left - k, step, best);
            p.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(f, &mut Vec::with_capacity(n), n, steps, budget / steps as f64, &mut best);
    best
}

fn theorem2_oracle() -> Outcome {
    let results: Vec<(f64, f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let ni = 2 + (k % 3) as usize;
            let (sc, v) = single_uav(ni, 1000 + k);
            let model = DelayModel::new(&sc).unwrap();
            let budget = sc.uav_tx_power_budget;
            let mut closed = v.clone();
            solve_sp2(&model, &mut closed, PowerMode::ClosedForm, &PddConfig::default().pg()).unwrap();
            let mut pg = v.clone();
            let opts = thzmec::numerics::PgOptions {
                tol: 1e-13,
                max_iter: 20_000,
                ..PddConfig::default().pg()
            };
            solve_sp2(&model, &mut pg, PowerMode::Relaxed, &opts).unwrap();
            let f = |p: &[f64]| sp2_objective(&model, &v, 0, p, None);
            let pc: Vec<f64> = (0..ni).map(|i| closed.power[[i, 0]]).collect();
            let pp: Vec<f64> = (0..ni).map(|i| pg.power[[i, 0]]).collect();
            let fc = f(&pc);
            let steps = match ni {
                2 => 20_000,
                3 => 1_000,
                _ => 200,
            };
            let fg = grid_min(&f, ni, budget, steps);
            let sum_err = (pc.iter().sum::<f64>() - budget).abs();
            let vs_pg = (fc - f(&pp)) / f(&pp);
            let vs_grid = (fc - fg) / fg;
            (vs_pg.abs().max(vs_grid.max(0.0)), sum_err, vs_grid)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let sum_err = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let best_grid_gap = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    outcome(
        worst <= 1e-3 && sum_err <= 1e-9,
        format!(
            "50 instances, worst relative objective gap {worst:.2e} (tol 1e-3), closed form vs grid min {best_grid_gap:.2e}, max |sum P - P_UAV| {sum_err:.1e} W (tol 1e-9)"
        ),
    )
}

// ---- 6 ----

fn theorem1_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut decisions = 0;
    for k in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + k);
        let ni = rng.gen_range(2..=6);
        let nm = rng.gen_range(1..=3.min(ni));
        let side = [60.0, 150.0, 400.0][rng.gen_range(0..3)];
        let sc = ScenarioConfig {
            num_iots: ni,
            num_mecs: 2,
            num_uavs: nm,
            area_side: side,
            ..ScenarioConfig::table1()
        }
        .generate(2000 + k)
        .unwrap();
        let model = DelayModel::new(&sc).unwrap();
        let mut v = DecisionVariables::zeros(&sc);
        for m in 0..nm {
            v.positions[m] = [rng.gen::<f64>() * side, rng.gen::<f64>() * side, sc.uav_altitude];
        }
        for i in 0..ni {
            v.assoc[[i, rng.gen_range(0..2), i]] = 1.0;
            for m in 0..nm {
                v.power[[i, m]] = rng.gen_range(0.05..sc.uav_tx_power_budget / ni as f64);
            }
        }
        for i in 0..ni {
            let (j, u) = v.link_of(i).unwrap();
            let direct = model.direct_delay(i, j, u);
            let relays: Vec<f64> = (0..nm).map(|m| model.relay_delay(i, j, m, u, &v)).collect();
            let rule = relay_rule(direct, &relays);
            // Enumerate the options through the full communication-delay evaluation.
            let mut best = (None, f64::INFINITY);
            for opt in std::iter::once(None).chain((0..nm).map(Some)) {
                let mut w = v.clone();
                for m in 0..nm {
                    w.alpha[[i, m]] = if opt == Some(m) { 1.0 } else { 0.0 };
                }
                let t = model.communication_delays(&w)[i];
                if t < best.1 {
                    best = (opt, t);
                }
            }
            decisions += 1;
            if rule != best.0 {
                mismatches += 1;
            }
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches over {decisions} IoT decisions in 100 instances"))
}

// ---- 8 ----

fn optimality_gap(settings: &SolverSettings) -> Outcome {
    let rows: Vec<(u64, f64, f64, Vec<(Algorithm, f64)>)> = (1..=10u64)
        .into_par_iter()
        .map(|seed| {
            let sc = ScenarioConfig {
                num_iots: 3,
                num_mecs: 2,
                num_uavs: 1,
                num_subbands: Some(3),
                ..ScenarioConfig::table1()
            }
            .generate(seed)
            .unwrap();
            let ex = run_algorithm(Algorithm::Exhaustive, &sc, settings, seed).unwrap().mean_delay_s;
            let pdd = run_algorithm(Algorithm::Pdd, &sc, settings, seed).unwrap().mean_delay_s;
            let beaten = [Algorithm::Uo, Algorithm::Uao, Algorithm::NrSca, Algorithm::UoGuao, Algorithm::BcdSca, Algorithm::Pdd]
                .into_iter()
                .map(|a| (a, run_algorithm(a, &sc, settings, seed).unwrap().mean_delay_s))
                .filter(|&(_, d)| d < ex)
                .collect();
            (seed, ex, pdd, beaten)
        })
        .collect();
    let worst_gap = rows.iter().map(|r| (r.2 - r.1) / r.1).fold(f64::NEG_INFINITY, f64::max);
    let mean_gap = rows.iter().map(|r| (r.2 - r.1) / r.1).sum::<f64>() / rows.len() as f64;
    let beaten: Vec<String> = rows
        .iter()
        .filter(|r| !r.3.is_empty())
        .map(|r| {
            let names: Vec<String> = r.3.iter().map(|(a, d)| format!("{a} {:.2}%", 100.0 * (d - r.1) / r.1)).collect();
            format!("seed {}: {}", r.0, names.join(", "))
        })
        .collect();
    let pass = worst_gap <= 0.15 && beaten.is_empty();
    outcome(
        pass,
        format!(
            "PDD gap to exhaustive max {:.2}%, mean {:.2}% (tol 15%); heuristics below exhaustive: {}",
            100.0 * worst_gap,
            100.0 * mean_gap,
            if beaten.is_empty() { "none".into() } else { beaten.join("; ") }
        ),
    )
}

// ---- 9 ----

fn benchmark_ordering(pdd_runs: &[RunReport], settings: &SolverSettings) -> Outcome {
    let others = [Algorithm::BcdSca, Algorithm::NrSca, Algorithm::Uo, Algorithm::Uao];
    let delays: Vec<Vec<f64>> = pdd_runs
        .par_iter()
        .map(|r| {
            let sc = table1(r.seed);
            let mut row = vec![r.mean_delay_s];
            row.extend(others.iter().map(|&a| run_algorithm(a, &sc, settings, r.seed).unwrap().mean_delay_s));
            row
        })
        .collect();
    let n = delays.len() as f64;
    let mean = |k: usize| delays.iter().map(|r| r[k]).sum::<f64>() / n;
    let (pdd, bcd, nr, uo, uao) = (mean(0), mean(1), mean(2), mean(3), mean(4));
    let ordering = pdd <= bcd && bcd <= nr && nr <= uo.min(uao);

    let spec = SweepSpec {
        param: SweepParam::TrafficIntensity,
        values: vec![0.4, 0.6, 0.8, 1.0, 1.2, 1.4],
        seeds: (1..=10).collect(),
        algorithms: vec![
            Algorithm::Pdd,
            Algorithm::Uo,
            Algorithm::Uao,
            Algorithm::NrSca,
            Algorithm::UoGuao,
            Algorithm::BcdSca,
        ],
        base: ScenarioConfig::table1(),
        settings: settings.clone(),
    };
    let sweep = run_sweep(&spec).unwrap();
    // Average only over seeds that succeeded at every value for that algorithm.
    let mut rows = sweep.rows.clone();
    rows.retain(|r| !sweep.failures.iter().any(|f| f.algo == r.algo && f.seed == r.seed));
    let means = sweep_means(&rows);
    let mut broken = Vec::new();
    for (algo, curve) in &means {
        if curve.windows(2).any(|w| w[1].1 < w[0].1 * (1.0 - 1e-9)) {
            let pts: Vec<String> = curve.iter().map(|(v, d)| format!("{v}:{d:.3}")).collect();
            broken.push(format!("{algo} [{}]", pts.join(" ")));
        }
    }
    let shape = broken.is_empty() && means.len() == spec.algorithms.len();
    outcome(
        ordering && shape,
        format!(
            "means over {} seeds: pdd {pdd:.3}, bcd-sca {bcd:.3}, nr-sca {nr:.3e}, uo {uo:.3}, uao {uao:.3} -> ordering {}; traffic sweep ({} failed cells) non-decreasing: {}",
            delays.len(),
            if ordering { "holds" } else { "violated" },
            sweep.failures.len(),
            if shape { "all algorithms".to_string() } else { format!("violated by {}", broken.join(", ")) }
        ),
    )
}

// ---- 10 ----

fn random_interior_point(sc: &NetworkScenario, rng: &mut ChaCha8Rng) -> DecisionVariables {
    let mut v = DecisionVariables::zeros(sc);
    let side = sc.area_side;
    for q in v.positions.iter_mut() {
        *q = [rng.gen_range(0.1..0.9) * side, rng.gen_range(0.1..0.9) * side, sc.uav_altitude];
    }
    let (ni, nj, nu) = v.assoc.dim();
    let nm = sc.num_uavs;
    for i in 0..ni {
        for m in 0..nm {
            v.alpha[[i, m]] = rng.gen_range(0.1..0.9) / nm as f64;
            v.alpha_slack[[i, m]] = rng.gen_range(0.0..1.0);
            v.power[[i, m]] = rng.gen_range(0.2..1.0) * sc.uav_tx_power_budget / ni as f64;
        }
    }
    // Rows near one, scaled so every MEC stays below capacity.
    let mut z = Array3::from_shape_fn((ni, nj, nu), |_| rng.gen_range(0.05..1.0));
    for i in 0..ni {
        let s: f64 = z.slice(ndarray::s![i, .., ..]).sum();
        z.slice_mut(ndarray::s![i, .., ..]).mapv_inplace(|x| x / s);
    }
    let model = DelayModel::new(sc).unwrap();
    let peak = model.mec_loads(&z).into_iter().fold(0.0, f64::max);
    let cap = 0.9 * sc.queue.capacity();
    if peak > cap {
        z.mapv_inplace(|x| x * cap / peak);
    }
    v.assoc = z;
    v.assoc_slack = v.assoc.mapv(|x| (x + rng.gen_range(-0.05..0.05)).clamp(0.0, 1.0));
    v
}

fn random_duals(sc: &NetworkScenario, rng: &mut ChaCha8Rng) -> DualState {
    let rho = 10f64.powf(rng.gen_range(-3.0..0.0));
    let mut d = DualState::new(sc, rho, rho, 0.8).unwrap();
    for x in d
        .eta_z1
        .iter_mut()
        .chain(d.eta_z2.iter_mut())
        .chain(d.eta_z_u.iter_mut())
        .chain(d.eta_z_i.iter_mut())
    {
        *x = rng.gen_range(-1.0..1.0);
    }
    d
}

fn gradient_checks() -> Outcome {
    let cfg = ScenarioConfig {
        num_iots: 6,
        num_mecs: 3,
        num_uavs: 2,
        area_side: 120.0,
        ..ScenarioConfig::table1()
    };
    let mut worst = [0.0f64; 3];
    for k in 0..20u64 {
        let sc = cfg.generate(3000 + k).unwrap();
        let model = DelayModel::new(&sc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + k);
        let v = random_interior_point(&sc, &mut rng);
        let m = (k % 2) as usize;
        let served = (0..sc.num_iots()).filter(|&i| v.alpha[[i, m]] > 0.0).count();
        let p0: Vec<f64> = (0..sc.num_iots()).filter(|&i| v.alpha[[i, m]] > 0.0).map(|i| v.power[[i, m]]).collect();
        assert_eq!(p0.len(), served);
        let r2 = finite_diff_check(
            |p| sp2_objective(&model, &v, m, p, None),
            |p, g| {
                sp2_objective(&model, &v, m, p, Some(g));
            },
            &p0,
            1e-6,
        );
        let q = v.positions[m];
        let r3 = finite_diff_check(
            |xy| sp3_objective(&model, &v, m, xy, None),
            |xy, g| {
                sp3_objective(&model, &v, m, xy, Some(g));
            },
            &[q[0], q[1]],
            1e-4,
        );
        let duals = random_duals(&sc, &mut rng);
        let shape = v.assoc.dim();
        let z0: Vec<f64> = v.assoc.iter().cloned().collect();
        let r4 = finite_diff_check(
            |z| sp4_objective(&model, &v, &duals, &Array3::from_shape_vec(shape, z.to_vec()).unwrap(), None),
            |z, g| {
                let mut ga = Array3::zeros(shape);
                sp4_objective(&model, &v, &duals, &Array3::from_shape_vec(shape, z.to_vec()).unwrap(), Some(&mut ga));
                g.copy_from_slice(ga.as_slice().unwrap());
            },
            &z0,
            1e-5,
        );
        worst[0] = worst[0].max(r2.max_rel_error);
        worst[1] = worst[1].max(r3.max_rel_error);
        worst[2] = worst[2].max(r4.max_rel_error);
    }
    let mut lambert = 0.0f64;
    for k in 0..=400 {
        let x = 10f64.powf(-8.0 + k as f64 * 0.04);
        let w = lambert_w0(x).unwrap();
        lambert = lambert.max((w * w.exp() - x).abs() / x);
    }
    let fd = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        fd <= 1e-4 && lambert <= 1e-10,
        format!(
            "max relative FD error SP2 {:.1e}, SP3 {:.1e}, SP4.1 {:.1e} (tol 1e-4); Lambert W residual {lambert:.1e} (tol 1e-10)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn main() {
    let settings = SolverSettings::default();
    let mut passed = 0;
    let mut total = 0;
    let mut run = |c: Criterion, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        total += 1;
        if report(&c, t.elapsed(), &o) {
            passed += 1;
        }
    };
    let crit = |id, name, budget| Criterion { id, name, budget };

    run(crit(1, "Erlang C recursion matches the factorial formula", secs(1)), &mut erlang_oracle);
    run(crit(2, "Harel bound dominates Erlang C", secs(1)), &mut harel_dominance);
    run(crit(4, "placement convexity threshold", secs(1)), &mut remark1_threshold);
    run(crit(5, "Lambert-W power allocation oracle", secs(30)), &mut theorem2_oracle);
    run(crit(6, "relay rule oracle", secs(5)), &mut theorem1_oracle);
    run(crit(10, "gradient and Lambert-W hygiene", secs(10)), &mut gradient_checks);

    // Table I PDD runs are shared by criteria 7, 3 and 9; their cost is charged to 7.
    let mut pdd_runs: Vec<RunReport> = Vec::new();
    run(crit(7, "PDD contract on 20 Table I seeds", secs(20 * 60)), &mut || {
        pdd_runs = (1..=20u64)
            .into_par_iter()
            .map(|seed| run_pdd(&table1(seed), &settings.pdd, seed).unwrap())
            .collect();
        pdd_contract(&pdd_runs)
    });
    run(crit(3, "upper bound tightness on converged Table I runs", secs(10 * 60)), &mut || bound_tightness(&pdd_runs));
    run(crit(8, "optimality gap on tiny instances", secs(15 * 60)), &mut || optimality_gap(&settings));
    run(crit(9, "benchmark ordering and traffic monotonicity", secs(45 * 60)), &mut || {
        benchmark_ordering(&pdd_runs, &settings)
    });

    println!("acceptance: {passed}/{total} criteria passed");
    if passed < total && std::env::var_os("THZMEC_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
