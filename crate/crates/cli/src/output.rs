//! CSV tables with fixed headers and round-trippable floats.

use std::path::Path;

use anyhow::{bail, Context, Result};

use mixsvm_core::harness::{ConsistencyRow, StabilityRow};
use mixsvm_core::mixing::MixingReport;
use mixsvm_core::process::{LlnRow, Path as SamplePath};

pub const SWEEP_HEADER: &[&str] = &[
    "n",
    "lambda",
    "seed",
    "empirical_risk_train",
    "risk_est",
    "risk_est_ci",
    "bayes_risk",
    "excess_risk",
    "solver_residual",
    "norm",
    "norm_bound",
    "future_risk",
    "epochs",
    "converged",
];

pub const STABILITY_HEADER: &[&str] = &["n", "lambda", "seed", "ref_m", "lhs", "rhs", "holds", "h_max", "h_bound"];

pub const MIXING_HEADER: &[&str] = &["lag", "alpha", "beta", "phi_row", "phi_col", "phi_sym", "r2", "rio_bound_p2"];

pub const LLN_HEADER: &[&str] = &["test_function", "n", "seed", "mean", "expected", "deviation"];

/// Scientific notation with 17 significant digits, which parses back to
/// the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.parse().with_context(|| format!("not a number: `{s}`"))
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if rows.is_empty() {
        bail!("refusing to write {} without rows", path.display());
    }
    if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
        bail!("row has {} fields, header has {}", r.len(), header.len());
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`] back into its header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

pub fn sweep_rows(rows: &[ConsistencyRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.lambda),
                r.seed.to_string(),
                fmt_f64(r.train_risk),
                fmt_f64(r.risk_est),
                fmt_f64(r.risk_ci),
                fmt_f64(r.bayes_risk),
                fmt_f64(r.excess_risk),
                fmt_f64(r.solver_residual),
                fmt_f64(r.norm),
                fmt_f64(r.norm_bound),
                fmt_f64(r.future_risk),
                r.epochs.to_string(),
                r.converged.to_string(),
            ]
        })
        .collect()
}

/// Inverse of [`sweep_rows`].
pub fn parse_sweep_rows(rows: &[Vec<String>]) -> Result<Vec<ConsistencyRow>> {
    rows.iter()
        .map(|r| {
            if r.len() != SWEEP_HEADER.len() {
                bail!("sweep row has {} fields", r.len());
            }
            Ok(ConsistencyRow {
                n: r[0].parse()?,
                lambda: parse_f64(&r[1])?,
                seed: r[2].parse()?,
                train_risk: parse_f64(&r[3])?,
                risk_est: parse_f64(&r[4])?,
                risk_ci: parse_f64(&r[5])?,
                bayes_risk: parse_f64(&r[6])?,
                excess_risk: parse_f64(&r[7])?,
                solver_residual: parse_f64(&r[8])?,
                norm: parse_f64(&r[9])?,
                norm_bound: parse_f64(&r[10])?,
                future_risk: parse_f64(&r[11])?,
                epochs: r[12].parse()?,
                converged: r[13].parse()?,
            })
        })
        .collect()
}

pub fn stability_rows(rows: &[StabilityRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                fmt_f64(r.lambda),
                r.seed.to_string(),
                r.ref_m.to_string(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                r.holds.to_string(),
                fmt_f64(r.h_max),
                fmt_f64(r.h_bound),
            ]
        })
        .collect()
}

pub fn mixing_rows(reports: &[MixingReport], rio: &[f64]) -> Vec<Vec<String>> {
    reports
        .iter()
        .zip(rio)
        .map(|(r, &b)| {
            vec![
                r.lag().map_or_else(String::new, |l| l.to_string()),
                fmt_f64(r.alpha),
                fmt_f64(r.beta),
                fmt_f64(r.phi_row),
                fmt_f64(r.phi_col),
                fmt_f64(r.phi_sym),
                fmt_f64(r.r2),
                fmt_f64(b),
            ]
        })
        .collect()
}

pub fn lln_rows(name: &str, rows: &[LlnRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                name.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.expected),
                fmt_f64(r.deviation),
            ]
        })
        .collect()
}

/// `t, x_1..x_d, y` plus `state` or `hidden` when the process has one.
pub fn path_table(p: &SamplePath) -> (Vec<String>, Vec<Vec<String>>) {
    let d = p.data.xs.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|i| format!("x{i}")));
    header.push("y".into());
    if p.states.is_some() {
        header.push("state".into());
    }
    if p.hidden.is_some() {
        header.push("hidden".into());
    }
    let rows = (0..p.data.len())
        .map(|t| {
            let mut r = vec![(t + 1).to_string()];
            r.extend(p.data.xs[t].iter().map(|&v| fmt_f64(v)));
            r.push(fmt_f64(p.data.ys[t]));
            if let Some(s) = &p.states {
                r.push(s[t].to_string());
            }
            if let Some(h) = &p.hidden {
                r.push(fmt_f64(h[t]));
            }
            r
        })
        .collect();
    (header, rows)
}
