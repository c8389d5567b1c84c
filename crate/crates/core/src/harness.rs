//! End-to-end experiments: consistency sweeps, stability checks and
//! law-of-large-numbers diagnostics.
//!
//! Grid points `(n, seed)` are independent tasks; each draws a fresh path
//! from a seed derived from `(seed, n)` and results are returned in grid
//! order whatever the execution mode.

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, RkhsFunction};
use crate::loss::LossSpec;
use crate::par::{self, Execution};
use crate::process::{LabelModel, LlnTable, ProcessKind, ProcessSpec, StationaryMean, TestFunction};
use crate::schedule::ScheduleSpec;
use crate::solver::{self, SolverOptions, TrainingSet};

/// Smallest sample accepted for risk estimation.
pub const MIN_TEST_M: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    pub loss: LossSpec,
    pub kernel: KernelSpec,
    pub schedule: ScheduleSpec,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_m: usize,
    pub ref_m_factor: usize,
    pub tol: f64,
    pub max_epochs: usize,
    /// Length of the held-out continuation of each path used for the
    /// future-risk column; 0 disables it.
    pub future_window: usize,
    pub exec: Execution,
}

impl ExperimentConfig {
    pub fn new(process: ProcessSpec, loss: LossSpec, kernel: KernelSpec, schedule: ScheduleSpec) -> Self {
        Self {
            process,
            loss,
            kernel,
            schedule,
            n_grid: vec![100, 400, 1600, 6400],
            seeds: (1..=20).collect(),
            test_m: 10_000,
            ref_m_factor: 20,
            tol: 1e-8,
            max_epochs: SolverOptions::default().max_epochs,
            future_window: 1000,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return Err(Error::Config("n_grid must list positive sizes".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_grid must be strictly ascending".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.test_m < MIN_TEST_M {
            return Err(Error::Config(format!("test_m must be >= {MIN_TEST_M}, got {}", self.test_m)));
        }
        if self.ref_m_factor == 0 {
            return Err(Error::Config("ref_m_factor must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.kernel.input_dim != self.process.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.process.input_dim(),
                got: self.kernel.input_dim,
            });
        }
        self.process.check_loss(&self.loss)
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_epochs: self.max_epochs,
            exec: Execution::Sequential,
            ..SolverOptions::default()
        }
    }
}

/// Mixes a base seed with a grid index so every grid point gets its own
/// stream.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // SplitMix64 finalizer over the combined word.
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub estimate: f64,
    /// Half-width of the normal-approximation 95% interval; 0 when exact.
    pub half_width: f64,
    pub exact: bool,
}

/// `R_{L,P}(f)` under the stationary mean of `spec`.
///
/// Finite-state classification risks are computed exactly; otherwise the
/// mean loss over `m` i.i.d. draws from `P` is returned.
pub fn estimate_risk(f: &RkhsFunction, spec: &ProcessSpec, loss: &LossSpec, m: usize, seed: u64) -> Result<RiskEstimate> {
    estimate_risk_with(f, spec, loss, m, seed, Execution::default())
}

pub fn estimate_risk_with(
    f: &RkhsFunction,
    spec: &ProcessSpec,
    loss: &LossSpec,
    m: usize,
    seed: u64,
    exec: Execution,
) -> Result<RiskEstimate> {
    if m < MIN_TEST_M {
        return Err(Error::param("m", format!("risk estimation needs m >= {MIN_TEST_M}, got {m}")));
    }
    if let (StationaryMean::Markov { pi }, LabelModel::Classification(_)) = (spec.stationary_mean(), spec.label()) {
        let chain = spec.chain().expect("markov mean");
        let mut r = 0.0;
        for (s, x) in chain.feature_map().iter().enumerate() {
            if pi[s] == 0.0 {
                continue;
            }
            let eta = spec.class_prob(x, Some(s)).expect("classification");
            let t = f.eval(x);
            r += pi[s] * (eta * loss.eval(1.0, t)? + (1.0 - eta) * loss.eval(-1.0, t)?);
        }
        return Ok(RiskEstimate {
            estimate: r,
            half_width: 0.0,
            exact: true,
        });
    }
    let sample = spec.sample_stationary(seed, m)?;
    let losses = sample_losses(f, &sample, loss, exec);
    let (mean, sd) = mean_sd(&losses);
    Ok(RiskEstimate {
        estimate: mean,
        half_width: 1.96 * sd / (m as f64).sqrt(),
        exact: false,
    })
}

fn sample_losses(f: &RkhsFunction, set: &TrainingSet, loss: &LossSpec, exec: Execution) -> Vec<f64> {
    let f = f.compacted();
    f.eval_many(&set.xs, exec)
        .iter()
        .zip(&set.ys)
        .map(|(v, y)| loss.eval_unchecked(*y, *v))
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// A failed invariant check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub check: &'static str,
    pub n: usize,
    pub seed: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub train_risk: f64,
    pub risk_est: f64,
    pub risk_ci: f64,
    pub bayes_risk: f64,
    /// `risk_est − bayes_risk`, never clamped.
    pub excess_risk: f64,
    pub solver_residual: f64,
    pub norm: f64,
    /// `√(R_T(0)/λ)`.
    pub norm_bound: f64,
    /// Mean loss over the continuation of the training path, NaN when
    /// disabled.
    pub future_risk: f64,
    pub epochs: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ConsistencyRow>,
    pub violations: Vec<Violation>,
}

impl ExperimentResult {
    /// Median excess risk over seeds for every `n`, in grid order.
    pub fn median_excess(&self) -> Vec<(usize, f64)> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).collect();
        ns.dedup();
        ns.into_iter()
            .map(|n| {
                let mut v: Vec<f64> = self.rows.iter().filter(|r| r.n == n).map(|r| r.excess_risk).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                (n, crate::process::quantile(&v, 0.5))
            })
            .collect()
    }
}

const NEGATIVE_EXCESS_SLACK: f64 = 1e-12;

/// Risk of the SVM versus `n` along the schedule.
pub fn run_consistency(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let bayes = cfg.process.bayes_risk(&cfg.loss)?;
    let tasks: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let results = par::map_slice(cfg.exec, &tasks, |&(n, seed)| consistency_row(cfg, n, seed, bayes));
    let mut rows = Vec::with_capacity(tasks.len());
    let mut violations = Vec::new();
    for r in results {
        let (row, v) = r?;
        rows.push(row);
        violations.extend(v);
    }
    Ok(ExperimentResult { rows, violations })
}

fn consistency_row(cfg: &ExperimentConfig, n: usize, seed: u64, bayes: f64) -> Result<(ConsistencyRow, Vec<Violation>)> {
    let lambda = cfg.schedule.lambda(n);
    let path_seed = derive_seed(seed, n as u64);
    let full = cfg.process.sample_path(path_seed, n + cfg.future_window)?;
    let train = TrainingSet {
        xs: full.xs[..n].to_vec(),
        ys: full.ys[..n].to_vec(),
    };
    let sol = solver::train_with(&train, &cfg.loss, &cfg.kernel, lambda, &cfg.solver_options())?;
    let train_risk = train.risk(&sol.f, &cfg.loss, Execution::Sequential);
    let risk = estimate_risk_with(&sol.f, &cfg.process, &cfg.loss, cfg.test_m, path_seed, Execution::Sequential)?;
    let future_risk = if cfg.future_window > 0 {
        let future = TrainingSet {
            xs: full.xs[n..].to_vec(),
            ys: full.ys[n..].to_vec(),
        };
        mean_sd(&sample_losses(&sol.f, &future, &cfg.loss, Execution::Sequential)).0
    } else {
        f64::NAN
    };
    let norm = sol.norm();
    let norm_bound = (train.risk_at_zero(&cfg.loss) / lambda).sqrt();
    let row = ConsistencyRow {
        n,
        lambda,
        seed,
        train_risk,
        risk_est: risk.estimate,
        risk_ci: risk.half_width,
        bayes_risk: bayes,
        excess_risk: risk.estimate - bayes,
        solver_residual: sol.opt_residual,
        norm,
        norm_bound,
        future_risk,
        epochs: sol.epochs,
        converged: sol.converged,
    };
    let mut v = Vec::new();
    if norm > norm_bound {
        v.push(Violation {
            check: "norm_bound",
            n,
            seed,
            detail: format!("norm {norm:e} exceeds sqrt(R_T(0)/lambda) = {norm_bound:e}"),
        });
    }
    if row.excess_risk < -risk.half_width - NEGATIVE_EXCESS_SLACK {
        v.push(Violation {
            check: "negative_excess_risk",
            n,
            seed,
            detail: format!("excess {:e} below -ci {:e}", row.excess_risk, -risk.half_width),
        });
    }
    if !sol.converged {
        v.push(Violation {
            check: "solver_not_converged",
            n,
            seed,
            detail: format!("residual {:e} after {} epochs", sol.opt_residual, sol.epochs),
        });
    }
    Ok((row, v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub n: usize,
    pub lambda: f64,
    pub seed: u64,
    pub ref_m: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub h_max: f64,
    pub h_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityResult {
    pub rows: Vec<StabilityRow>,
    pub violations: Vec<Violation>,
}

/// Salt of the reference-sample seeds, kept apart from path seeds.
const REFERENCE_SALT: u64 = 0x7265_6665_7265_6e63;

/// Checks `‖f_ref − f_T‖ ≤ (1/λ)‖E_ref hΦ − E_T hΦ‖` and `‖h‖∞ ≤ |L|_{B_λ,1}`
/// for every grid point, with `f_ref` trained on `ref_m_factor · n`
/// stationary draws.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<StabilityResult> {
    cfg.validate()?;
    let opts = cfg.solver_options();
    let refs = par::map_slice(cfg.exec, &cfg.n_grid, |&n| {
        let m = (cfg.ref_m_factor * n).max(solver::MIN_REFERENCE_M);
        solver::reference_solution(
            &cfg.process,
            &cfg.loss,
            &cfg.kernel,
            cfg.schedule.lambda(n),
            m,
            derive_seed(REFERENCE_SALT, n as u64),
            &opts,
        )
    });
    let refs: Vec<_> = refs.into_iter().collect::<Result<_>>()?;
    let tasks: Vec<(usize, u64)> = (0..cfg.n_grid.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let results = par::map_slice(cfg.exec, &tasks, |&(i, seed)| -> Result<StabilityRow> {
        let n = cfg.n_grid[i];
        let lambda = cfg.schedule.lambda(n);
        let (f_ref, ref_sample) = &refs[i];
        let t = cfg.process.sample_path(derive_seed(seed, n as u64), n)?;
        let w = solver::stability_witness(f_ref, &t, ref_sample, &cfg.loss, &cfg.kernel, lambda, &opts)?;
        Ok(StabilityRow {
            n,
            lambda,
            seed,
            ref_m: ref_sample.len(),
            lhs: w.lhs,
            rhs: w.rhs,
            holds: w.holds,
            h_max: w.h_max,
            h_bound: w.h_bound,
        })
    });
    let mut rows = Vec::with_capacity(tasks.len());
    let mut violations = Vec::new();
    for r in results {
        let row = r?;
        if !row.holds {
            violations.push(Violation {
                check: "stability_bound",
                n: row.n,
                seed: row.seed,
                detail: format!("lhs {:e} > rhs {:e}", row.lhs, row.rhs),
            });
        }
        if row.h_max > row.h_bound * (1.0 + 1e-12) {
            violations.push(Violation {
                check: "witness_sup_norm",
                n: row.n,
                seed: row.seed,
                detail: format!("|h| {:e} > |L|_(B,1) {:e}", row.h_max, row.h_bound),
            });
        }
        rows.push(row);
    }
    Ok(StabilityResult { rows, violations })
}

/// Law-of-large-numbers deviations for every test function.
pub fn run_lln(cfg: &ExperimentConfig, fns: &[TestFunction]) -> Result<Vec<(TestFunction, LlnTable)>> {
    if fns.is_empty() {
        return Err(Error::Config("no test functions given".into()));
    }
    fns.iter()
        .map(|f| {
            cfg.process
                .lln_diagnostic(f, &cfg.n_grid, &cfg.seeds, cfg.exec)
                .map(|t| (f.clone(), t))
        })
        .collect()
}

/// Exact `|P_n({s}) − P({s})|` for `n = 1..=n_max` on a Markov chain.
pub fn ams_deviations(spec: &ProcessSpec, state: usize, n_max: usize) -> Result<Vec<f64>> {
    let chain = match spec.kind() {
        ProcessKind::MarkovChain(c) => c,
        _ => return Err(Error::Config("exact marginal averages need a Markov chain".into())),
    };
    if state >= chain.states() {
        return Err(Error::Config(format!("state {state} out of range")));
    }
    let pi = chain.stationary_law();
    Ok(chain
        .marginal_averages(n_max)
        .iter()
        .map(|p| (p[state] - pi[state]).abs())
        .collect())
}
