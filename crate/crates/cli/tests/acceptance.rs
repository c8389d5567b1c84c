//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The
//! process fails when any criterion fails, except those listed in
//! `KNOWN_UNATTAINABLE`, which are still evaluated literally and reported as
//! FAIL.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mixsvm_cli::commands::{self, Command};
use mixsvm_cli::{config, output};
use mixsvm_core::harness::{self, ExperimentConfig};
use mixsvm_core::loss::LabelRange;
use mixsvm_core::mixing::{self, Coefficient, FiniteJoint, MixingReport};
use mixsvm_core::process::{ClassProb, LabelModel, MarkovChain, Noise, ProcessKind, RegressionMean, TestFunction};
use mixsvm_core::schedule::{self, ScheduleSpec};
use mixsvm_core::solver::{self, TrainingSet};
use mixsvm_core::{Execution, KernelSpec, LossKind, LossSpec, ProcessSpec};

/// Criteria whose literal statement cannot hold; see the decision ledger.
const KNOWN_UNATTAINABLE: &[&str] = &["2b"];

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn record(&mut self, id: &str, title: &str, pass: bool, detail: String, elapsed: Duration) {
        let status = match (pass, KNOWN_UNATTAINABLE.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known unattainable)",
            (false, false) => "FAIL",
        };
        println!("criterion {id:<3} {status:<26} {title}: {detail} [{:.1}s]", elapsed.as_secs_f64());
        self.lines.push((id.to_string(), pass));
    }
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn random_joint(rng: &mut ChaCha8Rng, r: usize, c: usize) -> FiniteJoint {
    let mut v: Vec<f64> = (0..r * c)
        .map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random::<f64>() })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        v[0] = 1.0;
    }
    let s: f64 = v.iter().sum();
    let rows: Vec<Vec<f64>> = v.chunks(c).map(|row| row.iter().map(|x| x / s).collect()).collect();
    FiniteJoint::from_rows(&rows).unwrap()
}

fn criterion_1(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let (r, c) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let j = random_joint(&mut rng, r, c);
        let m = MixingReport::new(&j).unwrap();
        let phi_max = m.phi_row.max(m.phi_col);
        let slacks = [
            m.beta - 2.0 * m.alpha,
            phi_max - m.beta,
            m.r2 - 4.0 * m.alpha,
            2.0 * m.phi_sym - m.r2,
            1f64.min(2.0 * std::f64::consts::PI * m.phi_sym) - m.r2,
        ];
        worst = slacks.iter().cloned().fold(worst, f64::min);
    }
    let el = t.elapsed();
    rep.record(
        "1",
        "mixing inequality chain on 1000 random joints",
        worst >= -1e-10 && el < Duration::from_secs(30),
        format!("min slack {worst:.3e} (need >= -1e-10), runtime < 30 s"),
        el,
    );
}

/// Lag-n joint of the symmetric stay-0.9 chain in stationarity, by
/// repeated multiplication of the transition matrix.
fn oracle_lag_joint(n: usize) -> [[f64; 2]; 2] {
    let p = [[0.9, 0.1], [0.1, 0.9]];
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for _ in 0..n {
        let mut next = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                next[i][k] = m[i][0] * p[0][k] + m[i][1] * p[1][k];
            }
        }
        m = next;
    }
    [[0.5 * m[0][0], 0.5 * m[0][1]], [0.5 * m[1][0], 0.5 * m[1][1]]]
}

/// Subset enumeration over both sides: (α, φ with μ(A) in the denominator).
fn oracle_alpha_phi(q: &[[f64; 2]; 2]) -> (f64, f64) {
    let (mut alpha, mut phi) = (0.0f64, 0.0f64);
    for a in 0..4u32 {
        for b in 0..4u32 {
            let (mut pab, mut pa, mut pb) = (0.0, 0.0, 0.0);
            for i in 0..2 {
                for k in 0..2 {
                    let (ina, inb) = (a >> i & 1 == 1, b >> k & 1 == 1);
                    if ina {
                        pa += q[i][k];
                    }
                    if inb {
                        pb += q[i][k];
                    }
                    if ina && inb {
                        pab += q[i][k];
                    }
                }
            }
            alpha = alpha.max((pab - pa * pb).abs());
            if pa > 0.0 {
                phi = phi.max(((pab - pa * pb) / pa).abs());
            }
        }
    }
    (alpha, phi)
}

fn criterion_2(rep: &mut Report) {
    let t = Instant::now();
    let chain = MarkovChain::stationary(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![vec![0.0], vec![1.0]]).unwrap();
    let (mut err_abr, mut err_phi_literal, mut err_phi_oracle) = (0.0f64, 0.0f64, 0.0f64);
    let mut phis = Vec::new();
    for n in 1..=10 {
        let j = mixing::markov_lag_joint(&chain, 1, 1 + n).unwrap();
        let m = MixingReport::new(&j).unwrap();
        let g = 0.8f64.powi(n as i32);
        let q = oracle_lag_joint(n);
        let (oa, ophi) = oracle_alpha_phi(&q);
        let ob = 0.5 * (0..2).flat_map(|i| (0..2).map(move |k| (i, k))).map(|(i, k)| (q[i][k] - 0.25).abs()).sum::<f64>();
        // binary pair: maximal correlation is |Pearson correlation|
        let or2 = (q[1][1] - 0.25).abs() / 0.25;
        for (got, closed, oracle) in [(m.alpha, 0.25 * g, oa), (m.beta, 0.5 * g, ob), (m.r2, g, or2)] {
            err_abr = err_abr.max((got - closed).abs()).max((got - oracle).abs());
        }
        err_phi_oracle = err_phi_oracle.max((m.phi_row - ophi).abs()).max((m.phi_col - ophi).abs());
        err_phi_literal = err_phi_literal.max((m.phi_row - g).abs()).max((m.phi_col - g).abs());
        phis.push(m.phi_row);
    }
    let el = t.elapsed();
    rep.record(
        "2a",
        "stay-0.9 chain: alpha = 0.25*0.8^n, beta = 0.5*0.8^n, r2 = 0.8^n, n = 1..10",
        err_abr <= 1e-10 && el < Duration::from_secs(5),
        format!("max error {err_abr:.2e} vs closed forms and enumeration oracle (tol 1e-10)"),
        el,
    );
    rep.record(
        "2b",
        "stay-0.9 chain: phi = 0.8^n, n = 1..10",
        err_phi_literal <= 1e-10,
        format!(
            "max |phi - 0.8^n| = {err_phi_literal:.3e}; phi(lag 1) = {:.6}, phi(lag 10) = {:.6e}; \
             enumeration oracle agrees with the computed phi to {err_phi_oracle:.1e}, \
             which is 0.5*0.8^n (0.8^n is the psi-mixing value)",
            phis[0], phis[9]
        ),
        el,
    );
}

fn criterion_3(rep: &mut Report) {
    let t = Instant::now();
    let chain = MarkovChain::stationary(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![vec![0.0], vec![1.0]]).unwrap();
    let mut worst = 0.0f64;
    for n in [10, 100, 1000] {
        for c in [Coefficient::Alpha, Coefficient::Beta] {
            let d = mixing::bi_mixing_average_direct(&chain, n, c, Execution::Parallel).unwrap();
            let s = mixing::bi_mixing_average_stationary(&chain, n, c).unwrap();
            worst = worst.max((d - s).abs());
        }
    }
    rep.record(
        "3",
        "bi-mixing double sum equals stationary shortcut, n in {10, 100, 1000}",
        worst <= 1e-12,
        format!("max difference {worst:.2e} (tol 1e-12)"),
        t.elapsed(),
    );
}

/// Objective of `f = Σ cᵢ k(xᵢ, ·)` evaluated directly.
fn direct_objective(c: &[f64], xs: &[Vec<f64>], ys: &[f64], k: &KernelSpec, loss: &LossSpec, lambda: f64) -> f64 {
    let n = xs.len();
    let mut norm2 = 0.0;
    let mut risk = 0.0;
    for i in 0..n {
        let mut fi = 0.0;
        for j in 0..n {
            let kij = k.eval_unchecked(&xs[i], &xs[j]);
            norm2 += c[i] * c[j] * kij;
            fi += c[j] * kij;
        }
        risk += loss.eval_unchecked(ys[i], fi);
    }
    lambda * norm2 + risk / n as f64
}

/// Zooming full-grid search over the expansion coefficients.
fn grid_oracle(xs: &[Vec<f64>], ys: &[f64], k: &KernelSpec, loss: &LossSpec, lambda: f64) -> f64 {
    let n = xs.len();
    const HALF: i64 = 10;
    let mut center = vec![0.0; n];
    let mut best = direct_objective(&center, xs, ys, k, loss, lambda);
    let mut h = 0.25;
    let mut c = vec![0.0; n];
    while h > 1e-8 {
        let side = (2 * HALF + 1) as usize;
        let mut arg = center.clone();
        let mut on_edge = false;
        for idx in 0..side.pow(n as u32) {
            let mut r = idx;
            let mut edge = false;
            for d in 0..n {
                let o = (r % side) as i64 - HALF;
                r /= side;
                edge |= o.abs() == HALF;
                c[d] = center[d] + o as f64 * h;
            }
            let v = direct_objective(&c, xs, ys, k, loss, lambda);
            if v < best {
                best = v;
                arg.copy_from_slice(&c);
                on_edge = edge;
            }
        }
        center = arg;
        if !on_edge {
            h /= 4.0;
        }
    }
    best
}

fn criterion_4(rep: &mut Report) {
    let t = Instant::now();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let hinge = LossSpec::hinge();

    // n = 1, λ = 1: f = k(x,·)/2, so f(x) = 1/2 and the objective is 1/4 + 1/2
    let one = TrainingSet::new(vec![vec![0.3]], vec![1.0]).unwrap();
    let s = solver::train(&one, &hinge, &k, 1.0, 1e-10).unwrap();
    let closed_err = (s.f.eval(&[0.3]) - 0.5).abs().max((s.objective - 0.75).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let losses = [
        LossSpec::hinge(),
        LossSpec::new(LossKind::SquaredHinge).unwrap(),
        LossSpec::new(LossKind::LogisticMargin).unwrap(),
        LossSpec::least_squares(),
        LossSpec::new(LossKind::AbsoluteDistance).unwrap(),
        LossSpec::new(LossKind::EpsilonInsensitive { epsilon: 0.2 }).unwrap(),
        LossSpec::new(LossKind::Huber { delta: 0.5 }).unwrap(),
    ];
    let mut norm_violations = 0;
    for i in 0..1000 {
        let loss = &losses[i % losses.len()];
        let n = rng.random_range(1..=40);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let ys: Vec<f64> = (0..n)
            .map(|_| match loss.y_range() {
                LabelRange::Binary => if rng.random::<bool>() { 1.0 } else { -1.0 },
                _ => rng.random_range(-3.0..3.0),
            })
            .collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..0.5));
        let t = TrainingSet::new(xs, ys).unwrap();
        let s = solver::train(&t, loss, &k, lambda, 1e-8).unwrap();
        if s.norm() > (t.risk_at_zero(loss) / lambda).sqrt() {
            norm_violations += 1;
        }
    }

    let mut grid_gap = 0.0f64;
    let mut cases = 0;
    for loss in &losses {
        for n in 1..=3 {
            let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![-1.0 + i as f64 * 0.9 + rng.random_range(0.0..0.3)]).collect();
            let ys: Vec<f64> = (0..n)
                .map(|_| match loss.y_range() {
                    LabelRange::Binary => if rng.random::<bool>() { 1.0 } else { -1.0 },
                    _ => rng.random_range(-2.0..2.0),
                })
                .collect();
            let lambda = [0.1, 0.5, 1.0][n - 1];
            let t = TrainingSet::new(xs.clone(), ys.clone()).unwrap();
            let s = solver::train(&t, loss, &k, lambda, 1e-10).unwrap();
            let oracle = grid_oracle(&xs, &ys, &k, loss, lambda);
            grid_gap = grid_gap.max((s.objective - oracle).abs());
            cases += 1;
        }
    }
    rep.record(
        "4",
        "solver: n=1 hinge closed form, norm bound on 1000 solves, grid oracle on n <= 3",
        closed_err <= 1e-6 && norm_violations == 0 && grid_gap <= 1e-3,
        format!(
            "closed-form error {closed_err:.1e} (tol 1e-6), norm-bound violations {norm_violations}/1000, \
             max |objective - grid oracle| {grid_gap:.1e} over {cases} instances (tol 1e-3)"
        ),
        t.elapsed(),
    );
}

fn criterion_5(rep: &mut Report) {
    let t = Instant::now();
    let chain = MarkovChain::new(
        vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        vec![1.0, 0.0],
        vec![vec![-1.0], vec![1.0]],
    )
    .unwrap();
    let classification = ProcessSpec::new(
        ProcessKind::MarkovChain(chain),
        LabelModel::Classification(ClassProb::PerState(vec![0.8, 0.2])),
    )
    .unwrap();
    let regression = ProcessSpec::new(
        ProcessKind::Ar1 {
            rho: 0.5,
            noise_sd: 1.0,
            x0: Some(0.0),
        },
        LabelModel::Regression {
            mean: RegressionMean::Sine {
                amplitude: 1.0,
                frequency: 1.0,
            },
            noise: Noise::Gaussian { sd: 0.5 },
            moment_order: 4.0,
        },
    )
    .unwrap();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let schedule = ScheduleSpec::new(1.0, Rational64::new(1, 4)).unwrap();
    let mut rows = 0;
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (process, loss, grid) in [
        (classification, LossSpec::hinge(), vec![100, 400, 1600, 6400]),
        (
            regression,
            LossSpec::new(LossKind::EpsilonInsensitive { epsilon: 0.1 }).unwrap(),
            vec![25, 50, 100, 200],
        ),
    ] {
        let mut cfg = ExperimentConfig::new(process, loss, k, schedule);
        cfg.n_grid = grid;
        let r = harness::run_stability(&cfg).unwrap();
        rows += r.rows.len();
        worst = r.rows.iter().map(|r| r.lhs - r.rhs).fold(worst, f64::max);
        violations.extend(r.violations);
    }
    let all_hold = violations.is_empty() && worst <= 1e-8;
    rep.record(
        "5",
        "stability bound and witness sup norm, hinge and epsilon-insensitive, 20 seeds x 4 sizes",
        all_hold && rows == 160,
        format!("{rows} rows, max (lhs - rhs) {worst:.2e} (tol 1e-8), violations {}", violations.len()),
        t.elapsed(),
    );
}

fn criterion_6(rep: &mut Report) {
    let t = Instant::now();
    let period2 = ProcessSpec::new(
        ProcessKind::MarkovChain(
            MarkovChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0], vec![vec![0.0], vec![1.0]]).unwrap(),
        ),
        LabelModel::Classification(ClassProb::Constant(0.5)),
    )
    .unwrap();
    let dev = harness::ams_deviations(&period2, 0, 10_000).unwrap();
    // from δ₀ the chain visits 0 at t = 1, 3, 5, ..., so P_n({0}) = ⌈n/2⌉/n
    let (mut excess, mut oracle_err) = (f64::NEG_INFINITY, 0.0f64);
    for (i, d) in dev.iter().enumerate() {
        let n = (i + 1) as f64;
        excess = excess.max(d - 1.0 / (2.0 * n));
        oracle_err = oracle_err.max((d - ((i + 2) / 2) as f64 / n + 0.5).abs());
    }
    let mixing_chain = ProcessSpec::new(
        ProcessKind::MarkovChain(
            MarkovChain::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]], vec![1.0, 0.0], vec![vec![0.0], vec![1.0]]).unwrap(),
        ),
        LabelModel::Classification(ClassProb::Constant(0.5)),
    )
    .unwrap();
    let seeds: Vec<u64> = (1..=100).collect();
    let table = mixing_chain
        .lln_diagnostic(&TestFunction::StateIndicator(0), &[10_000], &seeds, Execution::Parallel)
        .unwrap();
    let median = table.summary[0].median;
    rep.record(
        "6",
        "period-2 marginal averages and empirical LLN on the stay-0.9 chain",
        dev.len() == 10_000 && excess <= 1e-15 && oracle_err <= 1e-15 && median <= 0.02,
        format!(
            "max (|P_n({{0}}) - 1/2| - 1/(2n)) = {excess:.1e} over n <= 1e4 (need <= 0, rounding 1e-15), \
             closed-form oracle error {oracle_err:.1e}; \
             median deviation at n=1e4 over 100 seeds {median:.4} (need <= 0.02)"
        ),
        t.elapsed(),
    );
}

struct Sweep {
    medians: Vec<(usize, f64)>,
    violations: usize,
    csv: Vec<u8>,
    elapsed: Duration,
}

fn run_sweep(cfg: &Path, overrides: &[String], out: &Path) -> Sweep {
    let t = Instant::now();
    let res = config::load(cfg, overrides).unwrap();
    let o = commands::run(Command::Sweep, &res, out, Execution::Parallel).unwrap();
    let (_, rows) = output::read_csv(&out.join("sweep.csv")).unwrap();
    let parsed = output::parse_sweep_rows(&rows).unwrap();
    let medians = mixsvm_core::harness::ExperimentResult {
        rows: parsed,
        violations: Vec::new(),
    }
    .median_excess();
    Sweep {
        medians,
        violations: o.violations.len(),
        csv: std::fs::read(out.join("sweep.csv")).unwrap(),
        elapsed: t.elapsed(),
    }
}

fn median_at(s: &Sweep, n: usize) -> f64 {
    s.medians.iter().find(|m| m.0 == n).unwrap().1
}

fn criterion_7(rep: &mut Report) -> Sweep {
    let valid = run_sweep(&config_path("chain_classification.toml"), &[], &scratch("c7"));
    let invalid = run_sweep(
        &config_path("chain_classification.toml"),
        &["schedule.c=0.3".into(), "schedule.gamma=0".into()],
        &scratch("c7_invalid"),
    );
    let (m100, m6400) = (median_at(&valid, 100), median_at(&valid, 6400));
    let plateau = median_at(&invalid, 6400);
    let el = valid.elapsed + invalid.elapsed;
    rep.record(
        "7",
        "classification sweep, hinge on the 2-state chain, lambda_n = n^(-1/4)",
        m6400 <= 0.05 && m100 >= 2.0 * m6400 && plateau >= 2.0 * m6400 && valid.violations == 0 && el < Duration::from_secs(600),
        format!(
            "median excess n=100 {m100:.4}, n=6400 {m6400:.4} (need <= 0.05, ratio {:.1} >= 2); \
             lambda = 0.3 plateau at n=6400 {plateau:.4} (ratio {:.1} >= 2); violations {}",
            m100 / m6400.max(1e-300),
            plateau / m6400.max(1e-300),
            valid.violations
        ),
        el,
    );
    valid
}

fn criterion_8(rep: &mut Report) -> Sweep {
    let cfg = config_path("ar1_regression.toml");
    let res = config::load(&cfg, &[]).unwrap();
    let verdict = commands::verdict(&res).unwrap();
    let bayes = res.process().unwrap().bayes_risk(res.loss().unwrap()).unwrap();
    let s = run_sweep(&cfg, &[], &scratch("c8"));
    let m6400 = median_at(&s, 6400);
    rep.record(
        "8",
        "regression sweep, AR(1) inputs, Gaussian noise, epsilon-insensitive loss",
        verdict.valid && m6400.abs() <= 0.05 && s.violations == 0 && s.elapsed < Duration::from_secs(900),
        format!(
            "schedule valid: {} (margin {}); irreducible risk {bayes:.5}; median excess at n=6400 {m6400:.4} \
             (need |.| <= 0.05); medians {:?}; violations {}",
            verdict.valid,
            verdict.limiting_exponent,
            s.medians.iter().map(|(n, m)| format!("{n}:{m:.4}")).collect::<Vec<_>>(),
            s.violations
        ),
        s.elapsed,
    );
    s
}

fn r(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

fn criterion_9(rep: &mut Report) {
    let t = Instant::now();
    let k = KernelSpec::gaussian(1.0, 1).unwrap();
    let hinge = LossSpec::hinge();
    let hinge_ok = |g: Rational64| {
        schedule::validate_classification(&ScheduleSpec::new(1.0, g).unwrap(), &hinge, &k, None, r(1, 1))
            .unwrap()
            .valid
    };
    let accept: Vec<Rational64> = vec![r(1, 1000), r(1, 10), r(1, 4), r(49, 100), r(999, 2000)];
    let reject: Vec<Rational64> = vec![r(0, 1), r(1, 2), r(501, 1000), r(3, 4), r(1, 1)];
    let region_ok = accept.iter().all(|&g| hinge_ok(g)) && reject.iter().all(|&g| !hinge_ok(g));

    // (p, alpha, beta, gamma) -> (margin, which condition binds, valid), worked by hand
    const FIRST: &str = "lambda_n^p n^(2 alpha) -> inf";
    const SECOND: &str = "lambda_n^(2p) n^beta -> inf";
    const NULL: &str = "lambda_n -> 0 (gamma > 0)";
    let cases: [((i64, i64), (i64, i64), (i64, i64), (i64, i64), (i64, i64), &str, bool); 20] = [
        ((1, 1), (1, 1), (1, 1), (1, 4), (1, 2), SECOND, true),
        ((2, 1), (1, 1), (1, 1), (1, 4), (0, 1), SECOND, false),
        ((2, 1), (1, 1), (1, 1), (1, 5), (1, 5), SECOND, true),
        ((1, 1), (1, 2), (1, 1), (1, 3), (1, 3), SECOND, true),
        ((1, 1), (1, 4), (1, 1), (2, 5), (1, 10), FIRST, true),
        ((3, 2), (1, 3), (1, 2), (1, 6), (0, 1), SECOND, false),
        ((3, 2), (1, 3), (1, 2), (1, 7), (1, 14), SECOND, true),
        ((2, 1), (1, 2), (1, 2), (1, 10), (1, 10), SECOND, true),
        ((1, 1), (1, 1), (1, 3), (1, 5), (-1, 15), SECOND, false),
        ((5, 4), (3, 4), (1, 1), (1, 3), (1, 6), SECOND, true),
        ((1, 1), (1, 10), (1, 1), (1, 4), (-1, 20), FIRST, false),
        ((2, 1), (1, 8), (1, 1), (1, 8), (0, 1), FIRST, false),
        ((2, 1), (1, 8), (1, 1), (1, 9), (1, 36), FIRST, true),
        ((1, 1), (1, 1), (1, 1), (1, 2), (0, 1), SECOND, false),
        ((1, 1), (1, 1), (1, 1), (0, 1), (1, 1), NULL, false),
        ((3, 2), (2, 3), (2, 3), (1, 5), (1, 15), SECOND, true),
        ((7, 4), (1, 1), (1, 1), (2, 7), (0, 1), SECOND, false),
        ((7, 4), (1, 5), (1, 1), (1, 10), (9, 40), FIRST, true),
        ((1, 1), (1, 2), (1, 4), (1, 8), (0, 1), SECOND, false),
        ((6, 5), (1, 2), (1, 2), (1, 5), (1, 50), SECOND, true),
    ];
    let mut mismatches = Vec::new();
    for (i, &(p, a, b, g, margin, binding, valid)) in cases.iter().enumerate() {
        let s = ScheduleSpec::new(0.5, r(g.0, g.1)).unwrap();
        let v = schedule::validate_regression(&s, r(p.0, p.1), r(a.0, a.1), r(b.0, b.1)).unwrap();
        if v.limiting_exponent != r(margin.0, margin.1) || v.binding_condition != binding || v.valid != valid {
            mismatches.push(format!("case {}: got {} / {} / {}", i + 1, v.limiting_exponent, v.binding_condition, v.valid));
        }
    }
    rep.record(
        "9",
        "schedule verdicts: hinge accept region (0, 1/2) and 20 hand-computed regression cases",
        region_ok && mismatches.is_empty(),
        format!(
            "hinge region {}; regression mismatches {}{}",
            if region_ok { "exact" } else { "wrong" },
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join("; ")) }
        ),
        t.elapsed(),
    );
}

fn criterion_10(rep: &mut Report, c7: &Sweep, c8: &Sweep) {
    let t = Instant::now();
    let again7 = run_sweep(&config_path("chain_classification.toml"), &[], &scratch("c10_chain"));
    let again8 = run_sweep(&config_path("ar1_regression.toml"), &[], &scratch("c10_ar1"));
    let same7 = again7.csv == c7.csv;
    let same8 = again8.csv == c8.csv;
    rep.record(
        "10",
        "reruns of the classification and regression sweeps are byte-identical",
        same7 && same8,
        format!(
            "classification {} ({} bytes), regression {} ({} bytes)",
            if same7 { "identical" } else { "differs" },
            c7.csv.len(),
            if same8 { "identical" } else { "differs" },
            c8.csv.len()
        ),
        t.elapsed(),
    );
}

fn main() {
    let mut rep = Report { lines: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_9(&mut rep);
    let c7 = criterion_7(&mut rep);
    let c8 = criterion_8(&mut rep);
    criterion_10(&mut rep, &c7, &c8);

    let unexpected: Vec<&String> = rep
        .lines
        .iter()
        .filter(|(id, pass)| !pass && !KNOWN_UNATTAINABLE.contains(&id.as_str()))
        .map(|(id, _)| id)
        .collect();
    let known = rep.lines.iter().filter(|(id, pass)| !pass && KNOWN_UNATTAINABLE.contains(&id.as_str())).count();
    let passed = rep.lines.iter().filter(|(_, p)| *p).count();
    println!(
        "acceptance: {passed} passed, {} failed ({known} known unattainable)",
        rep.lines.len() - passed
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
