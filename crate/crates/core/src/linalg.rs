//! Small dense linear algebra for finite-state Markov chains.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row drift beyond which matrix powers are renormalized.
const DRIFT_LIMIT: f64 = 1e-12;

/// Checks that `p` is square and row-stochastic to within `1e-12`.
pub fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::Config(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for (i, row) in p.row_iter().enumerate() {
        if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("transition row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("transition row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

pub fn check_distribution(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::Config(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Largest `|row sum − 1|` of a nonnegative matrix.
pub fn row_drift(p: &DMatrix<f64>) -> f64 {
    p.row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

fn renormalize_rows(p: &mut DMatrix<f64>) {
    for mut row in p.row_iter_mut() {
        let s = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
}

/// A matrix power together with the accumulated row-sum drift observed
/// while computing it.
#[derive(Debug, Clone)]
pub struct PowerResult {
    pub matrix: DMatrix<f64>,
    pub max_drift: f64,
    pub renormalizations: usize,
}

/// `pᵏ` by repeated squaring; rows are renormalized whenever their sums
/// drift from 1 by more than `1e-12`.
pub fn stochastic_power(p: &DMatrix<f64>, k: usize) -> PowerResult {
    let m = p.nrows();
    let mut result = DMatrix::<f64>::identity(m, m);
    let mut base = p.clone();
    let mut e = k;
    let mut max_drift = 0.0f64;
    let mut renormalizations = 0;
    let mut track = |mat: &mut DMatrix<f64>| {
        let d = row_drift(mat);
        max_drift = max_drift.max(d);
        if d > DRIFT_LIMIT {
            log::debug!("renormalizing matrix power rows (drift {d:e})");
            renormalize_rows(mat);
            renormalizations += 1;
        }
    };
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
            track(&mut result);
        }
        e >>= 1;
        if e > 0 {
            base = &base * &base;
            track(&mut base);
        }
    }
    PowerResult {
        matrix: result,
        max_drift,
        renormalizations,
    }
}

/// `v · p`.
pub fn row_times(v: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    (0..p.ncols())
        .map(|j| v.iter().enumerate().map(|(i, vi)| vi * p[(i, j)]).sum())
        .collect()
}

/// Boolean reachability closure (`reach[i][j]`: j reachable from i in ≥ 0 steps).
fn reachability(p: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let m = p.nrows();
    let mut r: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| i == j || p[(i, j)] > 0.0).collect()).collect();
    for k in 0..m {
        for i in 0..m {
            if r[i][k] {
                for j in 0..m {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Closed communicating classes of the chain.
pub fn closed_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let m = p.nrows();
    let r = reachability(p);
    let mut assigned = vec![false; m];
    let mut classes = Vec::new();
    for i in 0..m {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (0..m).filter(|&j| r[i][j] && r[j][i]).collect();
        for &j in &class {
            assigned[j] = true;
        }
        let closed = class.iter().all(|&a| (0..m).all(|b| !r[a][b] || class.contains(&b)));
        if closed {
            classes.push(class);
        }
    }
    classes
}

/// Unique stationary law of an irreducible sub-chain restricted to `class`.
fn class_stationary(p: &DMatrix<f64>, class: &[usize]) -> Vec<f64> {
    let k = class.len();
    // (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (r, &i) in class.iter().enumerate() {
        for (c, &j) in class.iter().enumerate() {
            a[(r, c)] = p[(j, i)] - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..k {
        a[(k - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b).expect("irreducible class has a unique stationary law");
    pi.iter().map(|v| v.max(0.0)).collect()
}

/// The Cesàro limit `lim (1/n) Σ_{i<n} ν pⁱ`.
///
/// Computed exactly from the class decomposition: each closed class carries
/// its unique stationary law, weighted by the probability that the chain
/// started from `init` is absorbed into it. Periodic classes need no special
/// treatment since their stationary law is the average over the cycle.
pub fn cesaro_limit(p: &DMatrix<f64>, init: &[f64]) -> Vec<f64> {
    let m = p.nrows();
    let classes = closed_classes(p);
    let recurrent: Vec<bool> = (0..m).map(|i| classes.iter().any(|c| c.contains(&i))).collect();
    let transient: Vec<usize> = (0..m).filter(|&i| !recurrent[i]).collect();

    // Absorption probabilities h[t][c] from each transient state into class c:
    // (I − Q) H = R where Q = p restricted to transient states.
    let nt = transient.len();
    let absorb = if nt > 0 {
        let mut iq = DMatrix::<f64>::identity(nt, nt);
        for (a, &i) in transient.iter().enumerate() {
            for (b, &j) in transient.iter().enumerate() {
                iq[(a, b)] -= p[(i, j)];
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(nt, classes.len());
        for (a, &i) in transient.iter().enumerate() {
            for (c, class) in classes.iter().enumerate() {
                rhs[(a, c)] = class.iter().map(|&j| p[(i, j)]).sum();
            }
        }
        iq.lu().solve(&rhs).expect("transient block is invertible")
    } else {
        DMatrix::<f64>::zeros(0, classes.len())
    };

    let mut pi = vec![0.0; m];
    for (c, class) in classes.iter().enumerate() {
        let mut weight: f64 = class.iter().map(|&j| init[j]).sum();
        for (a, &t) in transient.iter().enumerate() {
            weight += init[t] * absorb[(a, c)];
        }
        if weight == 0.0 {
            continue;
        }
        for (&j, v) in class.iter().zip(class_stationary(p, class)) {
            pi[j] += weight * v;
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    pi
}

/// Smallest `k` with `pᵏ` entrywise positive (primitive chains), searched up
/// to Wielandt's bound `(m−1)² + 1`.
pub fn primitivity_index(p: &DMatrix<f64>) -> Option<usize> {
    let m = p.nrows();
    let pattern: Vec<Vec<bool>> = (0..m).map(|i| (0..m).map(|j| p[(i, j)] > 0.0).collect()).collect();
    let mut cur = pattern.clone();
    let bound = (m - 1) * (m - 1) + 1;
    for k in 1..=bound {
        if cur.iter().all(|r| r.iter().all(|&b| b)) {
            return Some(k);
        }
        let next = (0..m)
            .map(|i| (0..m).map(|j| (0..m).any(|l| cur[i][l] && pattern[l][j])).collect())
            .collect();
        cur = next;
    }
    None
}

/// Moduli of the eigenvalues of `p`, sorted descending.
pub fn eigen_moduli(p: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = p.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}
