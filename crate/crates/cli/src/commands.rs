//! Subcommand implementations. Each writes its files under the output
//! directory and returns an [`Outcome`] for the JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use num_rational::Rational64;
use serde_json::{json, Value};

use mixsvm_core::harness::{self, ExperimentConfig, Violation};
use mixsvm_core::loss::LossFamily;
use mixsvm_core::mixing;
use mixsvm_core::schedule::{self, to_f64};
use mixsvm_core::solver::{self, SolverOptions};
use mixsvm_core::{Execution, Verdict};

use crate::config::Resolved;
use crate::output::{self, fmt_f64};
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Mixing,
    Train,
    Schedule,
    Sweep,
    Stability,
    Lln,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Mixing => "mixing",
            Command::Train => "train",
            Command::Schedule => "schedule",
            Command::Sweep => "sweep",
            Command::Stability => "stability",
            Command::Lln => "lln",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: Command,
    pub files: Vec<PathBuf>,
    pub violations: Vec<Violation>,
    pub summary: Value,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.violations.is_empty()
    }

    /// Machine-readable report printed by the binary.
    pub fn to_json(&self) -> Value {
        json!({
            "command": self.command.name(),
            "ok": self.success(),
            "files": self.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
            "violations": self.violations.iter().map(|v| json!({
                "check": v.check,
                "n": v.n,
                "seed": v.seed,
                "detail": v.detail,
            })).collect::<Vec<_>>(),
            "summary": self.summary,
        })
    }
}

/// Runs `cmd` and writes its outputs plus `<cmd>.meta.toml` into `out`.
pub fn run(cmd: Command, res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let meta = out.join(format!("{}.meta.toml", cmd.name()));
    fs::write(&meta, res.metadata()?).with_context(|| format!("writing {}", meta.display()))?;
    let mut outcome = match cmd {
        Command::Simulate => simulate(res, out),
        Command::Mixing => mixing_table(res, out, exec),
        Command::Train => train(res, out, exec),
        Command::Schedule => schedule_verdict(res, out),
        Command::Sweep => sweep(res, out, exec),
        Command::Stability => stability(res, out, exec),
        Command::Lln => lln(res, out, exec),
    }?;
    outcome.files.push(meta);
    Ok(outcome)
}

pub fn experiment_config(res: &Resolved, exec: Execution) -> Result<ExperimentConfig> {
    let e = &res.file.experiment;
    Ok(ExperimentConfig {
        n_grid: e.n_grid.clone(),
        seeds: e.seeds.clone(),
        test_m: e.test_m,
        ref_m_factor: e.ref_m_factor,
        tol: e.tol,
        max_epochs: e.max_epochs,
        future_window: e.future_window,
        exec,
        ..ExperimentConfig::new(res.process()?.clone(), *res.loss()?, res.kernel, *res.schedule()?)
    })
}

/// Classification conditions whenever labels are binary, the regression
/// conditions otherwise.
pub fn verdict(res: &Resolved) -> Result<Verdict> {
    let loss = res.loss()?;
    let s = res.schedule()?;
    let classification = res
        .process
        .as_ref()
        .map_or(loss.family() == LossFamily::MarginBased, |p| p.is_classification());
    let v = if classification {
        schedule::validate_classification(s, loss, &res.kernel, res.domain_bound, res.alpha)
    } else {
        schedule::validate_for_loss(s, loss, &res.kernel, res.domain_bound, res.alpha, res.beta)
    };
    v.map_err(|e| anyhow!("schedule verdict: {e}"))
}

fn verdict_json(v: &Verdict) -> Value {
    json!({
        "valid": v.valid,
        "limiting_exponent": v.limiting_exponent.to_string(),
        "binding_condition": v.binding_condition,
    })
}

fn simulate(res: &Resolved, out: &Path) -> Result<Outcome> {
    let run = &res.file.simulate;
    let path = res.process()?.sample_path_detailed(run.seed, run.n)?;
    let (header, rows) = output::path_table(&path);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let file = out.join("path.csv");
    output::write_csv(&file, &header, &rows)?;
    Ok(Outcome {
        command: Command::Simulate,
        files: vec![file],
        violations: Vec::new(),
        summary: json!({ "n": run.n, "seed": run.seed }),
    })
}

fn mixing_table(res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    let chain = res
        .process()?
        .chain()
        .ok_or_else(|| anyhow!("mixing coefficients need a markov_chain process"))?;
    let m = &res.file.mixing;
    let reports = mixing::lag_table(chain, m.start, &m.lags, exec)?;
    let rio = reports
        .iter()
        .map(|r| mixing::rio_bound(r, 2.0))
        .collect::<mixsvm_core::Result<Vec<_>>>()?;
    let file = out.join("mixing.csv");
    output::write_csv(&file, output::MIXING_HEADER, &output::mixing_rows(&reports, &rio))?;
    let mut files = vec![file];
    let mut summary = json!({
        "start": m.start,
        "doeblin_power": schedule::doeblin_witness(chain),
    });
    if !m.exponent_grid.is_empty() {
        let ex = schedule::mixing_exponent_from_chain(chain, &m.exponent_grid, exec)?;
        let rows: Vec<Vec<String>> = ex
            .deviations
            .iter()
            .zip(&ex.bi_mixing)
            .map(|(&(n, d), &(_, b))| vec![n.to_string(), fmt_f64(d), fmt_f64(b)])
            .collect();
        let file = out.join("mixing_exponents.csv");
        output::write_csv(&file, &["n", "marginal_deviation", "bi_mixing_alpha"], &rows)?;
        files.push(file);
        summary["alpha_exponent"] = json!(ex.alpha);
        summary["beta_exponent"] = json!(ex.beta);
        summary["stationary"] = json!(ex.stationary);
    }
    if schedule::doeblin_witness(chain).is_none() {
        log::warn!("transition matrix is not primitive; the Doeblin condition fails");
    }
    Ok(Outcome {
        command: Command::Mixing,
        files,
        violations: Vec::new(),
        summary,
    })
}

fn train(res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    let run = &res.file.train;
    let process = res.process()?;
    let loss = res.loss()?;
    let lambda = res.schedule()?.lambda(run.n);
    let e = &res.file.experiment;
    let t = process.sample_path(run.seed, run.n)?;
    let opts = SolverOptions {
        tol: e.tol,
        max_epochs: e.max_epochs,
        exec,
        ..SolverOptions::default()
    };
    let sol = solver::train_with(&t, loss, &res.kernel, lambda, &opts)?;
    let risk = harness::estimate_risk_with(
        &sol.f,
        process,
        loss,
        e.test_m,
        harness::derive_seed(run.seed, u64::MAX),
        exec,
    )?;
    let bayes = process.bayes_risk(loss)?;
    let train_risk = t.risk(&sol.f, loss, exec);
    let header = [
        "n",
        "lambda",
        "seed",
        "objective",
        "duality_gap",
        "solver_residual",
        "epochs",
        "converged",
        "norm",
        "empirical_risk_train",
        "risk_est",
        "risk_est_ci",
        "bayes_risk",
    ];
    let row = vec![
        run.n.to_string(),
        fmt_f64(lambda),
        run.seed.to_string(),
        fmt_f64(sol.objective),
        fmt_f64(sol.duality_gap),
        fmt_f64(sol.opt_residual),
        sol.epochs.to_string(),
        sol.converged.to_string(),
        fmt_f64(sol.norm()),
        fmt_f64(train_risk),
        fmt_f64(risk.estimate),
        fmt_f64(risk.half_width),
        fmt_f64(bayes),
    ];
    let file = out.join("train.csv");
    output::write_csv(&file, &header, &[row])?;

    let f = sol.f.compacted();
    let mut coef_header: Vec<String> = (1..=res.kernel.input_dim).map(|i| format!("x{i}")).collect();
    coef_header.push("coefficient".into());
    let coef_header: Vec<&str> = coef_header.iter().map(String::as_str).collect();
    let coef_rows: Vec<Vec<String>> = f
        .points
        .iter()
        .zip(&f.coeffs)
        .map(|(x, &c)| x.iter().map(|&v| fmt_f64(v)).chain([fmt_f64(c)]).collect())
        .collect();
    let coef_file = out.join("coefficients.csv");
    let mut files = vec![file];
    if !coef_rows.is_empty() {
        output::write_csv(&coef_file, &coef_header, &coef_rows)?;
        files.push(coef_file);
    }
    let violations = if sol.converged {
        Vec::new()
    } else {
        vec![Violation {
            check: "solver_not_converged",
            n: run.n,
            seed: run.seed,
            detail: format!("residual {:e} after {} epochs", sol.opt_residual, sol.epochs),
        }]
    };
    Ok(Outcome {
        command: Command::Train,
        files,
        violations,
        summary: json!({
            "lambda": lambda,
            "objective": sol.objective,
            "residual": sol.opt_residual,
            "epochs": sol.epochs,
            "excess_risk": risk.estimate - bayes,
        }),
    })
}

fn schedule_verdict(res: &Resolved, out: &Path) -> Result<Outcome> {
    let v = verdict(res)?;
    let s = res.schedule()?;
    let loss = res.loss()?;
    let p = match loss.family() {
        LossFamily::DistanceBased => loss
            .growth_constants()
            .ok()
            .and_then(|g| Rational64::approximate_float(g.p_upper))
            .map_or_else(String::new, |p| p.to_string()),
        LossFamily::MarginBased => String::new(),
    };
    let header = [
        "loss",
        "c",
        "gamma",
        "alpha",
        "beta",
        "p",
        "valid",
        "limiting_exponent",
        "binding_condition",
    ];
    let row = vec![
        loss.name().to_string(),
        fmt_f64(s.c),
        s.gamma.to_string(),
        res.alpha.to_string(),
        res.beta.to_string(),
        p,
        v.valid.to_string(),
        v.limiting_exponent.to_string(),
        v.binding_condition.clone(),
    ];
    let file = out.join("schedule.csv");
    output::write_csv(&file, &header, &[row])?;
    let lambdas: Vec<Value> = res
        .file
        .experiment
        .n_grid
        .iter()
        .map(|&n| json!({ "n": n, "lambda": s.lambda(n) }))
        .collect();
    Ok(Outcome {
        command: Command::Schedule,
        files: vec![file],
        violations: Vec::new(),
        summary: json!({ "verdict": verdict_json(&v), "gamma": to_f64(s.gamma), "lambdas": lambdas }),
    })
}

fn sweep(res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    let cfg = experiment_config(res, exec)?;
    let verdict = verdict(res).ok();
    if let Some(v) = verdict.as_ref().filter(|v| !v.valid) {
        log::warn!(
            "schedule violates `{}` (margin {}); running anyway",
            v.binding_condition,
            v.limiting_exponent
        );
    }
    let result = harness::run_consistency(&cfg)?;
    let csv = out.join("sweep.csv");
    output::write_csv(&csv, output::SWEEP_HEADER, &output::sweep_rows(&result.rows))?;
    let svg = out.join("sweep.svg");
    let title = format!("{} loss, lambda_n = {} n^(-{})", res.loss()?.name(), cfg.schedule.c, cfg.schedule.gamma);
    fs::write(&svg, plot::sweep_svg(&result, &title)?).with_context(|| format!("writing {}", svg.display()))?;
    let medians: Vec<Value> = result
        .median_excess()
        .into_iter()
        .map(|(n, m)| json!({ "n": n, "median_excess": m }))
        .collect();
    Ok(Outcome {
        command: Command::Sweep,
        files: vec![csv, svg],
        violations: result.violations,
        summary: json!({ "verdict": verdict.as_ref().map(verdict_json), "medians": medians }),
    })
}

fn stability(res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    let cfg = experiment_config(res, exec)?;
    let result = harness::run_stability(&cfg)?;
    let file = out.join("stability.csv");
    output::write_csv(&file, output::STABILITY_HEADER, &output::stability_rows(&result.rows))?;
    let holding = result.rows.iter().filter(|r| r.holds).count();
    Ok(Outcome {
        command: Command::Stability,
        files: vec![file],
        violations: result.violations,
        summary: json!({ "rows": result.rows.len(), "holding": holding }),
    })
}

fn lln(res: &Resolved, out: &Path, exec: Execution) -> Result<Outcome> {
    let process = res.process()?;
    let e = &res.file.experiment;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for f in &res.test_functions {
        let table = process.lln_diagnostic(f, &e.n_grid, &e.seeds, exec)?;
        let name = f.describe();
        rows.extend(output::lln_rows(&name, &table.rows));
        summary.push(json!({
            "test_function": name,
            "summary": table.summary.iter().map(|s| json!({
                "n": s.n, "median": s.median, "q90": s.q90, "max": s.max,
            })).collect::<Vec<_>>(),
        }));
    }
    let file = out.join("lln.csv");
    output::write_csv(&file, output::LLN_HEADER, &rows)?;
    Ok(Outcome {
        command: Command::Lln,
        files: vec![file],
        violations: Vec::new(),
        summary: Value::Array(summary),
    })
}
