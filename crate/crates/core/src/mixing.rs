//! Mixing coefficients of finite-valued pairs.
//!
//! For random variables with finitely many values the generated σ-algebras
//! are finite, so every coefficient is a finite optimization over the joint
//! probability table:
//!
//! * `α = sup |μ(A∩B) − μ(A)μ(B)|`, by enumerating row events; for a fixed
//!   row event the best column event collects the positive deviations.
//! * `β = ½ Σ |Q_ij − p_i q_j|`, attained by the finest partitions.
//! * `φ = sup |μ(A∩B) − μ(A)μ(B)| / μ(A)`. The conditional deviation over a
//!   union of atoms is an average of the atoms' deviations, so the sup runs
//!   over single atoms and equals a maximal total-variation distance.
//! * `r2`, the maximal correlation, is the largest singular value of
//!   `Q_ij/√(p_i q_j) − √p_i √q_j`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::par::{self, Execution};
use crate::process::MarkovChain;

/// Largest alphabet accepted by the α enumeration.
pub const ENUMERATION_CAP: usize = 16;

const SUM_TOL: f64 = 1e-12;

/// Joint law of two finite-valued random variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteJoint {
    probs: DMatrix<f64>,
    row: Vec<f64>,
    col: Vec<f64>,
}

impl FiniteJoint {
    pub fn new(probs: DMatrix<f64>) -> Result<Self> {
        if probs.nrows() == 0 || probs.ncols() == 0 {
            return Err(Error::InvalidJoint("empty joint".into()));
        }
        if probs.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidJoint("entries must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidJoint(format!("entries sum to {total}, not 1")));
        }
        Ok(Self::with_marginals(probs))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidJoint("ragged rows".into()));
        }
        Self::new(DMatrix::from_row_slice(r, c, &rows.concat()))
    }

    /// The independent coupling `p qᵀ`.
    pub fn product(p: &[f64], q: &[f64]) -> Result<Self> {
        linalg::check_distribution(p, "row marginal")?;
        linalg::check_distribution(q, "column marginal")?;
        Ok(Self::with_marginals(DMatrix::from_fn(p.len(), q.len(), |i, j| p[i] * q[j])))
    }

    /// Accepts tables whose mass drifted from 1 by accumulated rounding and
    /// rescales them.
    pub(crate) fn normalized(mut probs: DMatrix<f64>) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidJoint(format!("entries sum to {total}, not 1")));
        }
        if (total - 1.0).abs() > SUM_TOL {
            log::debug!("renormalizing joint with mass drift {:.3e}", total - 1.0);
            probs /= total;
        }
        Self::new(probs)
    }

    fn with_marginals(probs: DMatrix<f64>) -> Self {
        let row = probs.row_iter().map(|r| r.sum()).collect();
        let col = probs.column_iter().map(|c| c.sum()).collect();
        Self { probs, row, col }
    }

    pub fn probs(&self) -> &DMatrix<f64> {
        &self.probs
    }

    pub fn row_marginal(&self) -> &[f64] {
        &self.row
    }

    pub fn col_marginal(&self) -> &[f64] {
        &self.col
    }

    pub fn shape(&self) -> (usize, usize) {
        self.probs.shape()
    }

    pub fn transpose(&self) -> Self {
        Self::with_marginals(self.probs.transpose())
    }

    fn deviation(&self, i: usize, j: usize) -> f64 {
        self.probs[(i, j)] - self.row[i] * self.col[j]
    }
}

/// `α` by exhaustive enumeration of the events of the smaller alphabet.
pub fn alpha(j: &FiniteJoint) -> Result<f64> {
    alpha_with(j, Execution::default())
}

pub fn alpha_with(j: &FiniteJoint, exec: Execution) -> Result<f64> {
    let (r, c) = j.shape();
    let size = r.max(c);
    if size > ENUMERATION_CAP {
        return Err(Error::AlphabetTooLarge { size, cap: ENUMERATION_CAP });
    }
    let t;
    let j = if r > c {
        t = j.transpose();
        &t
    } else {
        j
    };
    let (r, c) = j.shape();
    let dev: Vec<f64> = (0..r * c).map(|k| j.deviation(k / c, k % c)).collect();
    // A and its complement give the same value, so the last row stays out of A.
    let masks = 1usize << (r - 1);
    const CHUNK: usize = 1024;
    let chunks = masks.div_ceil(CHUNK);
    let best = par::map_range(exec, chunks, |chunk| {
        let mut best = 0.0f64;
        let mut d = vec![0.0; c];
        for mask in chunk * CHUNK..((chunk + 1) * CHUNK).min(masks) {
            d.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..r - 1 {
                if mask >> i & 1 == 1 {
                    for (dj, v) in d.iter_mut().zip(&dev[i * c..(i + 1) * c]) {
                        *dj += v;
                    }
                }
            }
            let pos: f64 = d.iter().filter(|v| **v > 0.0).sum();
            let neg: f64 = -d.iter().filter(|v| **v < 0.0).sum::<f64>();
            best = best.max(pos).max(neg);
        }
        best
    });
    Ok(best.into_iter().fold(0.0, f64::max))
}

/// `β = ½ Σ |Q_ij − p_i q_j|`.
pub fn beta(j: &FiniteJoint) -> f64 {
    let (r, c) = j.shape();
    let mut s = 0.0;
    for a in 0..r {
        for b in 0..c {
            s += j.deviation(a, b).abs();
        }
    }
    0.5 * s
}

/// Which side the conditioning event `A` of `φ` lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiDirection {
    /// `A` a row event, `B` a column event: `φ(σ(row), σ(col))`.
    Row,
    /// `A` a column event, `B` a row event.
    Col,
}

pub fn phi(j: &FiniteJoint, dir: PhiDirection) -> f64 {
    match dir {
        PhiDirection::Row => phi_rows(j),
        PhiDirection::Col => phi_rows(&j.transpose()),
    }
}

fn phi_rows(j: &FiniteJoint) -> f64 {
    let (r, c) = j.shape();
    let mut best = 0.0f64;
    for a in 0..r {
        let p = j.row[a];
        if p <= 0.0 {
            continue;
        }
        let tv: f64 = (0..c).map(|b| (j.probs[(a, b)] / p - j.col[b]).max(0.0)).sum();
        best = best.max(tv);
    }
    best.min(1.0)
}

/// `φ_sym = √(φ_row · φ_col)`.
pub fn phi_sym(j: &FiniteJoint) -> f64 {
    (phi(j, PhiDirection::Row) * phi(j, PhiDirection::Col)).sqrt()
}

/// Maximal correlation of the pair.
pub fn r2(j: &FiniteJoint) -> f64 {
    let rows: Vec<usize> = (0..j.row.len()).filter(|&i| j.row[i] > 0.0).collect();
    let cols: Vec<usize> = (0..j.col.len()).filter(|&i| j.col[i] > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return 0.0;
    }
    let m = DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (p, q) = (j.row[rows[a]], j.col[cols[b]]);
        j.probs[(rows[a], cols[b])] / (p * q).sqrt() - (p * q).sqrt()
    });
    let sv = m.singular_values();
    sv.iter().fold(0.0f64, |a, b| a.max(*b)).min(1.0)
}

/// All coefficients of one joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingReport {
    pub alpha: f64,
    pub beta: f64,
    pub phi_row: f64,
    pub phi_col: f64,
    pub phi_sym: f64,
    pub r2: f64,
    /// `(i, j)` time indices when the joint comes from a process.
    pub indices: Option<(usize, usize)>,
}

impl MixingReport {
    pub fn new(j: &FiniteJoint) -> Result<Self> {
        Self::with(j, Execution::default())
    }

    pub fn with(j: &FiniteJoint, exec: Execution) -> Result<Self> {
        let phi_row = phi(j, PhiDirection::Row);
        let phi_col = phi(j, PhiDirection::Col);
        Ok(Self {
            alpha: alpha_with(j, exec)?,
            beta: beta(j),
            phi_row,
            phi_col,
            phi_sym: (phi_row * phi_col).sqrt(),
            r2: r2(j),
            indices: None,
        })
    }

    pub fn lag(&self) -> Option<usize> {
        self.indices.map(|(i, j)| i.abs_diff(j))
    }

    /// Smallest slack of the inequality chain
    /// `2α ≤ β ≤ max φ`, `4α ≤ r2 ≤ 2φ_sym`, `r2 ≤ min(1, 2π φ_sym)`;
    /// negative when some inequality fails.
    pub fn chain_slack(&self) -> f64 {
        let phi_max = self.phi_row.max(self.phi_col);
        [
            self.beta - 2.0 * self.alpha,
            phi_max - self.beta,
            self.r2 - 4.0 * self.alpha,
            2.0 * self.phi_sym - self.r2,
            1.0f64.min(2.0 * std::f64::consts::PI * self.phi_sym) - self.r2,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

/// `2π · α^(1−2/p) · φ_sym^(2/p)`, an upper bound for the `L_p` maximal
/// correlation. Values above 1 are returned as computed; the coefficient
/// itself never exceeds 1.
pub fn rio_bound(report: &MixingReport, p: f64) -> Result<f64> {
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("must be >= 2, got {p}")));
    }
    let e = 2.0 / p;
    let bound = 2.0 * std::f64::consts::PI * report.alpha.powf(1.0 - e) * report.phi_sym.powf(e);
    if p == 2.0 && report.r2 > bound + 1e-10 {
        return Err(Error::InvalidJoint(format!(
            "maximal correlation {} exceeds its bound {bound}",
            report.r2
        )));
    }
    Ok(bound)
}

/// Exact joint of `(Z_min(i,j), Z_max(i,j))` for a chain, indices 1-based.
pub fn markov_lag_joint(chain: &MarkovChain, i: usize, j: usize) -> Result<FiniteJoint> {
    if i == 0 || j == 0 {
        return Err(Error::param("i, j", "time indices start at 1"));
    }
    if i == j {
        return Err(Error::param("i, j", "lag 0 has no mixing coefficient"));
    }
    let (a, b) = (i.min(j), i.max(j));
    let marg = chain.marginal(a);
    let step = linalg::stochastic_power(chain.trans(), b - a);
    if step.renormalizations > 0 {
        log::debug!(
            "lag {} power renormalized {} times (drift {:.3e})",
            b - a,
            step.renormalizations,
            step.max_drift
        );
    }
    joint_from(&marg, &step.matrix)
}

fn joint_from(marg: &[f64], step: &DMatrix<f64>) -> Result<FiniteJoint> {
    let m = marg.len();
    FiniteJoint::normalized(DMatrix::from_fn(m, m, |s, t| marg[s] * step[(s, t)]))
}

/// Coefficient averaged by the bi-mixing conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Alpha,
    Beta,
    PhiSym,
    R2,
    /// `α^(1−e) · φ_sym^e`, the blend appearing in the regression theorem
    /// with `e = (2p − 2)/q` or `e = 2/q`.
    AlphaPhiBlend { exponent: f64 },
}

impl Coefficient {
    pub fn eval(&self, j: &FiniteJoint) -> Result<f64> {
        Ok(match *self {
            Coefficient::Alpha => alpha_with(j, Execution::Sequential)?,
            Coefficient::Beta => beta(j),
            Coefficient::PhiSym => phi_sym(j),
            Coefficient::R2 => r2(j),
            Coefficient::AlphaPhiBlend { exponent } => {
                if !(0.0..=1.0).contains(&exponent) {
                    return Err(Error::param("exponent", format!("must lie in [0, 1], got {exponent}")));
                }
                alpha_with(j, Execution::Sequential)?.powf(1.0 - exponent) * phi_sym(j).powf(exponent)
            }
        })
    }

    pub fn name(&self) -> String {
        match self {
            Coefficient::Alpha => "alpha".into(),
            Coefficient::Beta => "beta".into(),
            Coefficient::PhiSym => "phi_sym".into(),
            Coefficient::R2 => "r2".into(),
            Coefficient::AlphaPhiBlend { exponent } => format!("alpha_phi_blend({exponent})"),
        }
    }
}

/// `Pᵏ` for `k = 0..n`, by iterated multiplication with row renormalization
/// when the drift exceeds `1e-12`.
fn lag_powers(p: &DMatrix<f64>, n: usize) -> Vec<DMatrix<f64>> {
    let m = p.nrows();
    let mut out = Vec::with_capacity(n);
    let mut cur = DMatrix::identity(m, m);
    for _ in 0..n {
        out.push(cur.clone());
        cur = &cur * p;
        if linalg::row_drift(&cur) > 1e-12 {
            for mut row in cur.row_iter_mut() {
                let s = row.sum();
                row /= s;
            }
        }
    }
    out
}

/// `(1/n²) Σ_{i=1}^n Σ_{j<i} ξ(Z_j, Z_i)` by the double sum over all pairs.
pub fn bi_mixing_average_direct(chain: &MarkovChain, n: usize, c: Coefficient, exec: Execution) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let powers = lag_powers(chain.trans(), n);
    let mut margs = Vec::with_capacity(n);
    let mut cur = chain.init().to_vec();
    for _ in 0..n {
        margs.push(cur.clone());
        cur = linalg::row_times(&cur, chain.trans());
    }
    let rows = par::map_range(exec, n, |i| -> Result<f64> {
        // 0-based: pairs (j, i) with j < i
        let mut s = 0.0;
        for j in 0..i {
            s += c.eval(&joint_from(&margs[j], &powers[i - j])?)?;
        }
        Ok(s)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total / (n as f64 * n as f64))
}

/// Per-lag coefficients `ξ(k)` of a stationary chain, `k = 1..n`.
pub fn stationary_lag_coefficients(chain: &MarkovChain, n: usize, c: Coefficient) -> Result<Vec<f64>> {
    if !chain.is_stationary() {
        return Err(Error::Unsupported(
            "per-lag coefficients need a chain started in an invariant law".into(),
        ));
    }
    let powers = lag_powers(chain.trans(), n + 1);
    (1..=n).map(|k| c.eval(&joint_from(chain.init(), &powers[k])?)).collect()
}

/// Stationary shortcut `(1/n²) Σ_{k=1}^{n−1} (n − k) ξ(k)`, with `ξ(k)` the
/// coefficient at lag `k`.
pub fn bi_mixing_average_stationary(chain: &MarkovChain, n: usize, c: Coefficient) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let xi = stationary_lag_coefficients(chain, n.saturating_sub(1), c)?;
    let s: f64 = xi.iter().enumerate().map(|(k, x)| (n - k - 1) as f64 * x).sum();
    Ok(s / (n as f64 * n as f64))
}

/// Uses the shortcut for stationary chains and the double sum otherwise.
pub fn bi_mixing_average(chain: &MarkovChain, n: usize, c: Coefficient, exec: Execution) -> Result<f64> {
    if chain.is_stationary() {
        bi_mixing_average_stationary(chain, n, c)
    } else {
        bi_mixing_average_direct(chain, n, c, exec)
    }
}

/// Coefficients of `(Z_start, Z_{start+k})` for every requested lag `k`.
pub fn lag_table(chain: &MarkovChain, start: usize, lags: &[usize], exec: Execution) -> Result<Vec<MixingReport>> {
    let rows = par::map_slice(exec, lags, |&k| -> Result<MixingReport> {
        let j = markov_lag_joint(chain, start, start + k)?;
        let mut rep = MixingReport::with(&j, Execution::Sequential)?;
        rep.indices = Some((start, start + k));
        Ok(rep)
    });
    rows.into_iter().collect()
}

/// `α` of the empirical lag joint of an observed state sequence.
pub fn empirical_alpha(path: &[usize], lag: usize, cap: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::param("lag", "must be positive"));
    }
    if path.len() < lag + 2 {
        return Err(Error::PathTooShort { len: path.len(), lag });
    }
    let mut symbols: Vec<usize> = path.to_vec();
    symbols.sort_unstable();
    symbols.dedup();
    let cap = cap.min(ENUMERATION_CAP);
    if symbols.len() > cap {
        return Err(Error::AlphabetTooLarge { size: symbols.len(), cap });
    }
    let index = |s: usize| symbols.binary_search(&s).expect("symbol present");
    let m = symbols.len();
    let mut counts = DMatrix::<f64>::zeros(m, m);
    let pairs = path.len() - lag;
    for t in 0..pairs {
        counts[(index(path[t]), index(path[t + lag]))] += 1.0;
    }
    counts /= pairs as f64;
    alpha(&FiniteJoint::normalized(counts)?)
}
