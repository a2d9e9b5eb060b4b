//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1-4 share a single desktop-scale experiment (5000 samples,
//! 2500/2500 split, 50 initial, batches of 50, 10 replicates, KRR on LCC).
//! Criterion 1 is also checked at CI scale (2000 samples, batches of 25,
//! 5 replicates). Criterion 4 is reported but never fails the suite, and
//! failures of criteria 1-3 (learning-curve properties of the synthetic
//! surrogate) fail it only when `ACCEPTANCE_STRICT` is set.

use pool_al::data::{split, synthetic_generate, Dataset, SyntheticConfig};
use pool_al::engine::{full_reference, run_experiment, ALConfig, Experiment, PoolState, RegressorSpec};
use pool_al::kernel::{kernel_matrix, KernelParams};
use pool_al::regress::{gpr_fit_fixed, gpr_log_ml, gpr_predict, krr_predict, krr_train, GprOptions, KrrSpec};
use pool_al::seed;
use pool_al::strategy::{
    abd_select, angle, binned_entropy, cbd_select, committee_variance, ebd_select, sq_euclidean, StrategyConfig,
    StrategyKind,
};
use pool_al::Matrix;
use rand::Rng;
use std::process::Command;
use std::time::Instant;

/// AUC slack against the random baseline.
const AUC_TOLERANCE: f64 = 0.002;
/// Allowed shortfall below the full-training reference R².
const REFERENCE_TOLERANCE: f64 = 0.005;
const FD_REL_TOL: f64 = 1e-5;
const NOISELESS_VAR_TOL: f64 = 1e-6;
const KRR_RESIDUAL_TOL: f64 = 1e-8;
const KRR_GPR_TOL: f64 = 1e-8;
const EXHAUSTION_TOL: f64 = 1e-10;
const CI_BUDGET_S: f64 = 300.0;

/// How a failing line affects the exit status.
#[derive(Clone, Copy, PartialEq)]
enum Gate {
    /// Deterministic oracle, invariant or budget check: always fails the suite.
    Hard,
    /// Learning-curve property of the synthetic surrogate: fails the suite
    /// only when `ACCEPTANCE_STRICT` is set.
    Surrogate,
    /// Reported only.
    Soft,
}

#[derive(Default)]
struct Report {
    hard_failures: usize,
    surrogate_failures: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, gate: Gate, detail: String) {
        let tag = match (ok, gate) {
            (true, _) => "PASS",
            (false, Gate::Soft) => "FAIL (soft)",
            (false, _) => "FAIL",
        };
        match (ok, gate) {
            (false, Gate::Hard) => self.hard_failures += 1,
            (false, Gate::Surrogate) => self.surrogate_failures += 1,
            _ => {}
        }
        println!("{tag}  criterion {id}: {detail}");
    }
}

struct Scale {
    n: usize,
    batch: usize,
    replicates: usize,
}

struct Run {
    reference: f64,
    experiments: Vec<Experiment>,
    seconds: f64,
    learning_size: usize,
}

fn dataset(n: usize) -> (Dataset, Dataset) {
    let ds = synthetic_generate(&SyntheticConfig {
        n_samples: n,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    split(&ds, 0.5, 2).unwrap()
}

fn config(kind: StrategyKind, s: &Scale) -> ALConfig {
    let mut cfg = ALConfig::new(kind, RegressorSpec::krr(KrrSpec::default()), "LCC");
    cfg.strategy.batch_size = s.batch;
    cfg.initial_size = 50;
    cfg.max_labeled = 50 + 19 * s.batch;
    cfg.replicates = s.replicates;
    cfg.master_seed = 2016;
    cfg
}

fn run_scale(s: &Scale) -> Run {
    let t = Instant::now();
    let (l, v) = dataset(s.n);
    let reference = full_reference(&l, &v, &config(StrategyKind::Random, s)).unwrap().0;
    let experiments = StrategyKind::ALL
        .iter()
        .map(|&k| {
            let tk = Instant::now();
            let e = run_experiment(&config(k, s), &l, &v).unwrap();
            eprintln!("  [{} samples] {k} done in {:.1}s", s.n, tk.elapsed().as_secs_f64());
            e
        })
        .collect();
    Run {
        reference,
        experiments,
        seconds: t.elapsed().as_secs_f64(),
        learning_size: l.n_samples(),
    }
}

/// Trapezoidal area under mean R² against labeled count over iterations
/// 1-19, normalized by the labeled-count span.
fn auc(e: &Experiment) -> f64 {
    let p = &e.mean_curve.points[1..20];
    let span = (p[p.len() - 1].labeled_count - p[0].labeled_count) as f64;
    p.windows(2)
        .map(|w| 0.5 * (w[0].r_squared + w[1].r_squared) * (w[1].labeled_count - w[0].labeled_count) as f64)
        .sum::<f64>()
        / span
}

fn find(run: &Run, k: StrategyKind) -> &Experiment {
    run.experiments.iter().find(|e| e.mean_curve.strategy == k).unwrap()
}

fn crossing(run: &Run, k: StrategyKind) -> Option<usize> {
    find(run, k)
        .mean_curve
        .points
        .iter()
        .find(|p| p.r_squared >= run.reference - REFERENCE_TOLERANCE)
        .map(|p| p.labeled_count)
}

const AL: [StrategyKind; 6] = [
    StrategyKind::Pal,
    StrategyKind::Eqb,
    StrategyKind::Rsal,
    StrategyKind::Ebd,
    StrategyKind::Abd,
    StrategyKind::Cbd,
];

fn dominance(rep: &mut Report, id: &str, run: &Run) {
    let base = auc(find(run, StrategyKind::Random));
    let mut ok = true;
    let mut parts = vec![format!("RANDOM {base:.5}")];
    for k in AL {
        let a = auc(find(run, k));
        ok &= a >= base - AUC_TOLERANCE;
        parts.push(format!("{k} {a:.5}{}", if a >= base - AUC_TOLERANCE { "" } else { " (below)" }));
    }
    rep.line(id, ok, Gate::Surrogate, format!("AUC over iterations 1-19: {}", parts.join(", ")));
}

fn criterion_5(rep: &mut Report) {
    let mut rng = seed::rng(55);
    // (a) gradient against central differences
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = Matrix::from_fn(20, 3, |_, _| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..20).map(|i| (2.0 * x[(i, 0)]).sin() + x[(i, 1)] * x[(i, 2)] + 0.1 * rng.random_range(-1.0..1.0)).collect();
        let theta = [rng.random_range(-0.5f64..0.8), rng.random_range(-0.5f64..0.5), rng.random_range(-4.0f64..-1.0)];
        let val = |t: [f64; 3]| {
            let p = KernelParams::new(t[0].exp(), t[1].exp()).unwrap();
            gpr_log_ml(&p, t[2].exp(), x.as_ref(), &y).unwrap()
        };
        let (_, grad) = val(theta);
        for j in 0..3 {
            let h = 1e-5;
            let (mut tp, mut tm) = (theta, theta);
            tp[j] += h;
            tm[j] -= h;
            let fd = (val(tp).0 - val(tm).0) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    rep.line("5a", worst < FD_REL_TOL, Gate::Hard, format!("worst log-ML gradient relative error {worst:.2e} over 20 problems"));

    // (b) predictive variance
    let x = Matrix::from_fn(15, 2, |_, _| rng.random_range(-2.0..2.0));
    let y: Vec<f64> = (0..15).map(|i| x[(i, 0)].cos() + x[(i, 1)]).collect();
    let params = KernelParams::new(1.0, 1.3).unwrap();
    let m = gpr_fit_fixed(x.as_ref(), &y, &params, 1e-12).unwrap();
    let (_, var_train) = gpr_predict(&m, x.as_ref()).unwrap();
    let xq = Matrix::from_fn(200, 2, |_, _| rng.random_range(-6.0..6.0));
    let (_, var_q) = gpr_predict(&m, xq.as_ref()).unwrap();
    // variances come back in target units; the bound is on the standardized scale
    let scale2 = m.target_scale * m.target_scale;
    let max_train = var_train.iter().copied().fold(0.0, f64::max) / scale2;
    let ok = var_q.iter().chain(&var_train).all(|v| *v >= 0.0) && max_train <= NOISELESS_VAR_TOL * params.signal_variance();
    rep.line("5b", ok, Gate::Hard, format!("variance >= 0 everywhere; max at training points {max_train:.2e} x sigma^2 (noise 1e-12)"));

    // (c) KRR dual weights against a dense Gaussian-elimination solve
    let n = 60;
    let x = Matrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] * 3.0 - x[(i, 2)].powi(2)).collect();
    let params = KernelParams::new(0.7, 1.0).unwrap();
    let lambda = 1e-4;
    let model = krr_train(x.as_ref(), &y, &params, lambda).unwrap();
    let k = kernel_matrix(x.as_ref(), x.as_ref(), &params).unwrap();
    let ys: Vec<f64> = y.iter().map(|v| (v - model.target_mean) / model.target_scale).collect();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| k[(i, j)] + if i == j { n as f64 * lambda } else { 0.0 }).chain([ys[i]]).collect())
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for q in c..=n {
                a[r][q] -= f * a[c][q];
            }
        }
    }
    let mut direct = vec![0.0; n];
    for r in (0..n).rev() {
        direct[r] = (a[r][n] - (r + 1..n).map(|q| a[r][q] * direct[q]).sum::<f64>()) / a[r][r];
    }
    let diff = model.dual_weights.iter().zip(&direct).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let rel = diff / direct.iter().map(|v| v * v).sum::<f64>().sqrt();
    rep.line("5c", rel < KRR_RESIDUAL_TOL, Gate::Hard, format!("KRR dual weights vs dense solve, relative difference {rel:.2e}"));

    // (d) KRR with n*lambda equal to the GP noise variance
    let gp = gpr_fit_fixed(x.as_ref(), &y, &params, n as f64 * lambda).unwrap();
    let xq = Matrix::from_fn(50, 3, |_, _| rng.random_range(-1.5..1.5));
    let pk = krr_predict(&model, xq.as_ref()).unwrap();
    let (pg, _) = gpr_predict(&gp, xq.as_ref()).unwrap();
    let gap = pk.iter().zip(&pg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    rep.line("5d", gap < KRR_GPR_TOL, Gate::Hard, format!("KRR vs GPR mean, max difference {gap:.2e}"));
}

fn greedy_oracle(x: &Matrix, labeled: &[usize], b: usize, dist: impl Fn(&[f64], &[f64]) -> f64) -> Vec<usize> {
    let row = |i: usize| (0..x.ncols()).map(|j| x[(i, j)]).collect::<Vec<_>>();
    let mut reference = labeled.to_vec();
    let mut picks = Vec::new();
    for _ in 0..b {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for c in (0..x.nrows()).filter(|c| !reference.contains(c)) {
            let s = reference.iter().map(|&r| dist(&row(c), &row(r))).fold(f64::INFINITY, f64::min);
            if s > best.0 {
                best = (s, c);
            }
        }
        picks.push(best.1);
        reference.push(best.1);
    }
    picks
}

fn criterion_6(rep: &mut Report) {
    let mut ok_div = true;
    for s in 0..10 {
        let mut rng = seed::rng(seed::derive(66, s));
        let x = Matrix::from_fn(210, 5, |_, _| rng.random_range(0.0..1.0));
        let y = vec![0.0; 210];
        let labeled: Vec<usize> = (0..10).map(|i| i * 21).collect();
        let st = PoolState::new(x.as_ref(), &y, &labeled).unwrap();
        let e = ebd_select(&st, &StrategyConfig::new(StrategyKind::Ebd, 8, 0)).unwrap();
        let a = abd_select(&st, &StrategyConfig::new(StrategyKind::Abd, 8, 0)).unwrap();
        ok_div &= e.indices == greedy_oracle(&x, &labeled, 8, sq_euclidean);
        ok_div &= a.indices == greedy_oracle(&x, &labeled, 8, angle);
    }
    rep.line("6a", ok_div, Gate::Hard, "EBD/ABD selections equal brute-force scoring on 10 pools of 200 candidates".into());

    let mut ok_cbd = true;
    for s in 0..10 {
        let mut rng = seed::rng(seed::derive(67, s));
        let x = Matrix::from_fn(12, 2, |i, _| if i < 6 { -1.5 } else { 1.5 } + rng.random_range(-1.0..1.0));
        let y = vec![0.0; 12];
        let st = PoolState::new(x.as_ref(), &y, &[]).unwrap();
        let mut got = cbd_select(&st, &StrategyConfig::new(StrategyKind::Cbd, 2, s)).unwrap().indices;
        got.sort_unstable();
        // exhaustive 2-partition
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << 11) {
            let mut total = 0.0;
            for side in [0, 1] {
                let rows: Vec<usize> = (0..12).filter(|&i| (mask >> i & 1) as usize == side).collect();
                for j in 0..2 {
                    let mean = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64;
                    total += rows.iter().map(|&i| (x[(i, j)] - mean).powi(2)).sum::<f64>();
                }
            }
            if total < best.0 {
                best = (total, mask);
            }
        }
        let mut oracle = Vec::new();
        for side in [0, 1] {
            let rows: Vec<usize> = (0..12).filter(|&i| (best.1 >> i & 1) as usize == side).collect();
            let c: Vec<f64> = (0..2).map(|j| rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64).collect();
            let near = *rows
                .iter()
                .min_by(|&&a, &&b| {
                    sq_euclidean(&[x[(a, 0)], x[(a, 1)]], &c).total_cmp(&sq_euclidean(&[x[(b, 0)], x[(b, 1)]], &c))
                })
                .unwrap();
            oracle.push(near);
        }
        oracle.sort_unstable();
        ok_cbd &= got == oracle;
    }
    rep.line("6b", ok_cbd, Gate::Hard, "CBD B=2 selections equal the optimal 2-means partition on 10 sets of 12 points".into());

    let v = committee_variance(&[1.0, 2.0, 3.0, 4.0, 5.0]);
    let h = binned_entropy(&[1.0, 2.0, 3.0, 4.0, 5.0], 5);
    let ok = v == 2.0 && (h - 5f64.ln()).abs() < 1e-15 && binned_entropy(&[3.0; 5], 4) == 0.0;
    rep.line("6c", ok, Gate::Hard, format!("PAL variance {v} for 1..5; EQB entropy {h:.6} (ln 5 = {:.6})", 5f64.ln()));
}

fn criterion_7(rep: &mut Report, desktop: &Run) {
    // disjointness, no repeated queries, default curve length
    let mut ok = true;
    for e in &desktop.experiments {
        for c in &e.curves {
            ok &= c.points.len() == 20;
            let mut seen = vec![false; desktop.learning_size];
            for &i in c.initial_labeled.iter().chain(c.batches.iter().flatten()) {
                ok &= i < seen.len() && !seen[i];
                if i < seen.len() {
                    seen[i] = true;
                }
            }
            ok &= c.points.last().unwrap().labeled_count == seen.iter().filter(|s| **s).count();
        }
    }
    rep.line("7a", ok, Gate::Hard, "labeled/candidate sets disjoint, no index queried twice, 20 curve points per replicate".into());

    // exhaustion equivalence
    let (l, v) = dataset(2000);
    let mut cfg = ALConfig::new(StrategyKind::Random, RegressorSpec::krr(KrrSpec::default()), "LCC");
    cfg.strategy.batch_size = l.n_samples() - cfg.initial_size;
    cfg.max_labeled = l.n_samples();
    cfg.replicates = 1;
    let e = run_experiment(&cfg, &l, &v).unwrap();
    let last = e.mean_curve.points.last().unwrap();
    let (r2, _) = full_reference(&l, &v, &cfg).unwrap();
    let gap = (last.r_squared - r2).abs();
    let mut gcfg = cfg.clone();
    gcfg.regressor = RegressorSpec::gpr(GprOptions::default());
    let (lg, vg) = (l.select_rows(&(0..300).collect::<Vec<_>>()), v);
    gcfg.strategy.batch_size = 250;
    gcfg.max_labeled = 300;
    let eg = run_experiment(&gcfg, &lg, &vg).unwrap();
    let (r2g, _) = full_reference(&lg, &vg, &gcfg).unwrap();
    let gap_g = (eg.mean_curve.points.last().unwrap().r_squared - r2g).abs();
    rep.line(
        "7b",
        gap <= EXHAUSTION_TOL && gap_g <= EXHAUSTION_TOL,
        Gate::Hard,
        format!("random run to exhaustion vs full reference: KRR gap {gap:.1e}, GPR gap {gap_g:.1e}"),
    );

    // bitwise determinism of the CLI
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.toml");
    std::fs::write(
        &cfg_path,
        r#"
[data.synthetic]
n_samples = 400
seed = 5

[experiment]
target = "LCC"
strategies = ["all"]
initial_size = 20
batch_size = 10
max_labeled = 60
replicates = 2
master_seed = 9

[output]
clock = "none"
"#,
    )
    .unwrap();
    let mut dirs = Vec::new();
    let mut ok = true;
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_pool-al"))
            .args(["run", "--quiet", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        ok &= status.success();
        dirs.push(out);
    }
    let mut files: Vec<_> = std::fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
    files.sort();
    for f in &files {
        ok &= std::fs::read(dirs[0].join(f)).ok() == std::fs::read(dirs[1].join(f)).ok();
    }
    rep.line("7c", ok && files.len() == 11, Gate::Hard, format!("two CLI runs with a fixed master seed give identical bytes in {} files", files.len()));
}

fn main() {
    let mut rep = Report::default();
    println!("acceptance suite");

    criterion_5(&mut rep);
    criterion_6(&mut rep);

    eprintln!("CI-scale run (n = 2000, batch 25, 5 replicates)");
    let ci = run_scale(&Scale {
        n: 2000,
        batch: 25,
        replicates: 5,
    });
    dominance(&mut rep, "1 (CI scale)", &ci);
    rep.line(
        "1 (CI runtime)",
        ci.seconds < CI_BUDGET_S,
        Gate::Hard,
        format!("CI-scale run took {:.0} s (budget {CI_BUDGET_S:.0} s)", ci.seconds),
    );

    eprintln!("desktop-scale run (n = 5000, batch 50, 10 replicates)");
    let desk = run_scale(&Scale {
        n: 5000,
        batch: 50,
        replicates: 10,
    });
    dominance(&mut rep, "1 (desktop scale)", &desk);
    eprintln!("desktop-scale run took {:.0} s", desk.seconds);

    let crosses: Vec<(StrategyKind, Option<usize>)> = AL.iter().map(|&k| (k, crossing(&desk, k))).collect();
    let fmt = |c: &[(StrategyKind, Option<usize>)]| {
        c.iter()
            .map(|(k, n)| format!("{k} {}", n.map_or("never".to_string(), |n| n.to_string())))
            .collect::<Vec<_>>()
            .join(", ")
    };
    rep.line(
        "2",
        crosses.iter().all(|(_, n)| n.is_some_and(|n| n <= 1000)),
        Gate::Surrogate,
        format!("reference R2 {:.4}; first labeled count within 0.005: {}", desk.reference, fmt(&crosses)),
    );
    let quarter = desk.learning_size / 4;
    let div: Vec<_> = crosses.iter().filter(|(k, _)| matches!(k, StrategyKind::Ebd | StrategyKind::Abd | StrategyKind::Cbd)).cloned().collect();
    rep.line(
        "3",
        div.iter().all(|(_, n)| n.is_some_and(|n| n <= quarter)),
        Gate::Surrogate,
        format!("diversity methods within {quarter} samples: {}", fmt(&div)),
    );

    let q = |k| find(&desk, k).curves.iter().map(|c| c.total_query_time_s()).sum::<f64>();
    let (pal, eqb, abd, cbd) = (q(StrategyKind::Pal), q(StrategyKind::Eqb), q(StrategyKind::Abd), q(StrategyKind::Cbd));
    rep.line(
        "4",
        pal.min(eqb) > abd.max(cbd),
        Gate::Soft,
        format!("strategy scoring time, PAL {pal:.1} s, EQB {eqb:.1} s, ABD {abd:.1} s, CBD {cbd:.1} s"),
    );

    criterion_7(&mut rep, &desk);

    let strict = std::env::var_os("ACCEPTANCE_STRICT").is_some();
    println!(
        "{} hard and {} surrogate criteria failed{}",
        rep.hard_failures,
        rep.surrogate_failures,
        if strict { " (strict)" } else { "" }
    );
    if rep.hard_failures > 0 || (strict && rep.surrogate_failures > 0) {
        std::process::exit(1);
    }
}
