//! Exact solver for `min_{f ∈ H} λ‖f‖²_H + (1/n) Σ L(yᵢ, f(xᵢ))`.
//!
//! The problem is solved through its Fenchel dual
//!
//! ```text
//! max_u  −(1/n) Σ L*_{yᵢ}(uᵢ) − (1/(4λn²)) uᵀKu,     f = −(1/(2λn)) Σ uᵢ k(xᵢ, ·)
//! ```
//!
//! by randomized dual coordinate ascent. Every coordinate step is a closed
//! form (or a safeguarded Newton root for the logistic loss), and the
//! duality gap `Σ [L(yᵢ, f(xᵢ)) + L*(uᵢ) − uᵢ f(xᵢ)] / n` certifies the
//! primal suboptimality. For differentiable losses the representer gradient
//! residual is driven below the tolerance as well.
//!
//! Identical inputs share one Gram row, so data drawn from finite-state
//! processes costs `O(distinct points²)` memory.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{dedup_points, point_key, KernelSpec, RkhsFunction};
use crate::loss::LossSpec;
use crate::par::{self, Execution};
use crate::process::ProcessSpec;

/// Observations `((x₁, y₁), …, (xₙ, yₙ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
}

impl TrainingSet {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::param("n", "training set must be nonempty"));
        }
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    /// `R_T(0) = (1/n) Σ L(yᵢ, 0)`.
    pub fn risk_at_zero(&self, loss: &LossSpec) -> f64 {
        self.ys.iter().map(|&y| loss.eval_unchecked(y, 0.0)).sum::<f64>() / self.len() as f64
    }

    /// Empirical risk `(1/n) Σ L(yᵢ, f(xᵢ))`.
    pub fn risk(&self, f: &RkhsFunction, loss: &LossSpec, exec: Execution) -> f64 {
        let f = f.compacted();
        let vals = f.eval_many(&self.xs, exec);
        vals.iter()
            .zip(&self.ys)
            .map(|(&t, &y)| loss.eval_unchecked(y, t))
            .sum::<f64>()
            / self.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Bound on the duality gap (and on the gradient residual for smooth
    /// losses).
    pub tol: f64,
    pub max_epochs: usize,
    pub exec: Execution,
    /// Starting dual variables; zero when absent.
    pub initial_dual: Option<Vec<f64>>,
    /// Seed of the coordinate order.
    pub order_seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_epochs: 20_000,
            exec: Execution::default(),
            initial_dual: None,
            order_seed: 0x5eed,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SvmSolution {
    /// Expansion over the training inputs.
    pub f: RkhsFunction,
    pub lambda: f64,
    /// `λ‖f‖²_H + R_T(f)`.
    pub objective: f64,
    /// `max(duality gap, gradient residual)`; the gradient residual only
    /// enters for differentiable losses.
    pub opt_residual: f64,
    pub duality_gap: f64,
    pub gradient_residual: Option<f64>,
    pub epochs: usize,
    pub converged: bool,
    pub dual: Vec<f64>,
}

impl SvmSolution {
    pub fn norm(&self) -> f64 {
        self.f.norm()
    }
}

/// `λ‖f‖²_H + (1/n) Σ L(yᵢ, f(xᵢ))`.
pub fn objective(f: &RkhsFunction, t: &TrainingSet, loss: &LossSpec, lambda: f64) -> Result<f64> {
    if let Some(x) = t.xs.iter().find(|x| x.len() != f.kernel.input_dim) {
        return Err(Error::DimensionMismatch {
            expected: f.kernel.input_dim,
            got: x.len(),
        });
    }
    let n = f.norm();
    Ok(lambda * n * n + t.risk(f, loss, Execution::Sequential))
}

struct Workspace {
    uniq: usize,
    idx: Vec<usize>,
    gram: crate::kernel::Gram,
    scale: f64,
}

impl Workspace {
    /// `f` at every distinct point from the aggregated duals.
    fn values(&self, agg: &[f64], exec: Execution) -> Vec<f64> {
        par::map_range(exec, self.uniq, |q| {
            -self.scale
                * self
                    .gram
                    .row(q)
                    .iter()
                    .zip(agg)
                    .map(|(g, a)| g * a)
                    .sum::<f64>()
        })
    }
}

/// Trains the SVM `f_{T,λ}` with default options at tolerance `tol`.
pub fn train(t: &TrainingSet, loss: &LossSpec, k: &KernelSpec, lambda: f64, tol: f64) -> Result<SvmSolution> {
    train_with(t, loss, k, lambda, &SolverOptions::with_tol(tol))
}

pub fn train_with(
    t: &TrainingSet,
    loss: &LossSpec,
    k: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<SvmSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", format!("must be > 0, got {lambda}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("tol", format!("must be > 0, got {}", opts.tol)));
    }
    if t.is_empty() {
        return Err(Error::param("n", "training set must be nonempty"));
    }
    for &y in &t.ys {
        loss.check_label(y)?;
    }
    let n = t.len();
    let (uniq_pts, idx) = dedup_points(&t.xs);
    let gram = k.gram_with(&uniq_pts, opts.exec)?;
    let ws = Workspace {
        uniq: uniq_pts.len(),
        idx,
        gram,
        scale: 1.0 / (2.0 * lambda * n as f64),
    };

    let mut u = match &opts.initial_dual {
        Some(init) if init.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: init.len(),
            })
        }
        Some(init) => {
            if init.iter().zip(&t.ys).any(|(&ui, &y)| !loss.conjugate(y, ui).is_finite()) {
                return Err(Error::param("initial_dual", "outside the conjugate domain"));
            }
            init.clone()
        }
        None => vec![0.0; n],
    };
    let mut agg = vec![0.0; ws.uniq];
    for (i, &ui) in u.iter().enumerate() {
        agg[ws.idx[i]] += ui;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.order_seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut epochs = 0;
    let mut fv = ws.values(&agg, opts.exec);
    let mut cert = certificate(&ws, t, loss, lambda, &u, &agg, &fv);
    while !cert.done(opts.tol) && epochs < opts.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let q = ws.idx[i];
            let kii = ws.gram.get(q, q);
            let a = kii * ws.scale;
            let b = -fv[q] - a * u[i];
            let next = loss.conjugate_prox(t.ys[i], a, b);
            let delta = next - u[i];
            if delta != 0.0 {
                u[i] = next;
                agg[q] += delta;
                let step = ws.scale * delta;
                for (v, g) in fv.iter_mut().zip(ws.gram.row(q)) {
                    *v -= step * g;
                }
            }
        }
        epochs += 1;
        fv = ws.values(&agg, opts.exec);
        cert = certificate(&ws, t, loss, lambda, &u, &agg, &fv);
    }
    if !cert.done(opts.tol) {
        log::warn!(
            "solver stopped after {epochs} epochs with gap {:e} (tol {:e})",
            cert.gap,
            opts.tol
        );
    }

    let coeffs: Vec<f64> = u.iter().map(|ui| -ws.scale * ui).collect();
    let mut f = RkhsFunction::new(*k, t.xs.clone(), coeffs)?;
    let mut objective = cert.primal;
    let mut gap = cert.gap;

    // The minimizer satisfies λ‖f‖² ≤ R_T(0); enforce it exactly in floating point.
    let r0 = t.risk_at_zero(loss);
    if objective > r0 {
        f.coeffs.iter_mut().for_each(|c| *c = 0.0);
        objective = r0;
        gap = (r0 - cert.dual).max(0.0);
    }
    let bound = (r0 / lambda).sqrt();
    let mut norm = f.norm();
    while norm > bound {
        let s = bound / norm * (1.0 - 4.0 * f64::EPSILON);
        f.coeffs.iter_mut().for_each(|c| *c *= s);
        norm = f.norm();
        objective = lambda * norm * norm + t.risk(&f, loss, opts.exec);
    }

    let opt_residual = gap.max(cert.grad.unwrap_or(0.0));
    Ok(SvmSolution {
        f,
        lambda,
        objective,
        opt_residual,
        duality_gap: gap,
        gradient_residual: cert.grad,
        epochs,
        converged: cert.done(opts.tol),
        dual: u,
    })
}

struct Certificate {
    primal: f64,
    dual: f64,
    gap: f64,
    grad: Option<f64>,
}

impl Certificate {
    fn done(&self, tol: f64) -> bool {
        self.gap <= tol && self.grad.is_none_or(|g| g <= tol)
    }
}

fn certificate(
    ws: &Workspace,
    t: &TrainingSet,
    loss: &LossSpec,
    lambda: f64,
    u: &[f64],
    agg: &[f64],
    fv: &[f64],
) -> Certificate {
    let n = t.len() as f64;
    // ‖f‖² = Σ_q c_q f(x_q) with c_q = −scale·agg_q.
    let norm2: f64 = agg
        .iter()
        .zip(fv)
        .map(|(a, v)| -ws.scale * a * v)
        .sum::<f64>()
        .max(0.0);
    let mut risk = 0.0;
    let mut conj = 0.0;
    let mut gap = 0.0;
    for (i, (&y, &ui)) in t.ys.iter().zip(u).enumerate() {
        let fi = fv[ws.idx[i]];
        let l = loss.eval_unchecked(y, fi);
        let c = loss.conjugate(y, ui);
        risk += l;
        conj += c;
        gap += (l + c - ui * fi).max(0.0);
    }
    let primal = lambda * norm2 + risk / n;
    let dual = -conj / n - lambda * norm2;
    let grad = if loss.is_smooth() {
        // r = 2λ·Kα + (1/n)·K g, with Kα = f at the samples.
        let mut gsum = vec![0.0; ws.uniq];
        for (i, &y) in t.ys.iter().enumerate() {
            let q = ws.idx[i];
            gsum[q] += loss.subgradient_interval(y, fv[q]).0;
        }
        let kg: Vec<f64> = (0..ws.uniq)
            .map(|q| ws.gram.row(q).iter().zip(&gsum).map(|(g, s)| g * s).sum::<f64>() / n)
            .collect();
        let mut r2 = 0.0;
        let mut f2 = 0.0;
        for &q in &ws.idx {
            let r = 2.0 * lambda * fv[q] + kg[q];
            r2 += r * r;
            f2 += fv[q] * fv[q];
        }
        Some(r2.sqrt() / (1.0 + f2.sqrt()))
    } else {
        None
    };
    Certificate {
        primal,
        dual,
        gap: gap / n,
        grad,
    }
}

/// Smallest reference sample accepted by [`reference_solution`].
pub const MIN_REFERENCE_M: usize = 1000;

/// Surrogate for the infinite-sample solution `f_{P,λ}`: the SVM trained on
/// `m` i.i.d. draws from the stationary mean of `spec`.
///
/// This is an approximation whose quality depends on `m`; callers report
/// the sample size alongside any quantity derived from it.
pub fn reference_solution(
    spec: &ProcessSpec,
    loss: &LossSpec,
    k: &KernelSpec,
    lambda: f64,
    m: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<(SvmSolution, TrainingSet)> {
    if m < MIN_REFERENCE_M {
        return Err(Error::param("m", format!("reference sample needs m >= {MIN_REFERENCE_M}, got {m}")));
    }
    let sample = spec.sample_stationary(seed, m)?;
    let sol = train_with(&sample, loss, k, lambda, opts)?;
    Ok((sol, sample))
}

/// Both sides of the stability inequality
/// `‖f_ref − f_T‖_H ≤ (1/λ) ‖E_ref hΦ − E_T hΦ‖_H`.
#[derive(Debug, Clone)]
pub struct StabilityWitness {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `max |h|` over both samples.
    pub h_max: f64,
    /// `|L|_{B_λ,1}` with `B_λ = ‖k‖∞ √(R_ref(0)/λ)`.
    pub h_bound: f64,
    pub sample_solution: SvmSolution,
}

/// Slack allowed on the stability inequality.
pub const STABILITY_SLACK: f64 = 1e-8;

/// Compares a reference solution with the SVM trained on `t`.
///
/// The witness `h` must represent the reference solution,
/// `f_ref = −(1/(2λ)) E_ref[h Φ]`, while lying in `∂L(y, f_ref(x))`. On pairs
/// `(x, y)` that occur in the reference sample it is the average of the
/// reference dual variables for that pair, elsewhere the midpoint of the
/// subdifferential at `f_ref(x)`.
pub fn stability_witness(
    f_ref: &SvmSolution,
    t: &TrainingSet,
    ref_sample: &TrainingSet,
    loss: &LossSpec,
    k: &KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<StabilityWitness> {
    if f_ref.f.kernel != *k {
        return Err(Error::KernelMismatch);
    }
    if f_ref.dual.len() != ref_sample.len() {
        return Err(Error::DimensionMismatch {
            expected: ref_sample.len(),
            got: f_ref.dual.len(),
        });
    }
    let f_t = train_with(t, loss, k, lambda, opts)?;
    let lhs = crate::kernel::rkhs_diff_norm(&f_ref.f, &f_t.f)?;

    let key = |x: &[f64], y: f64| (point_key(x), y.to_bits());
    let mut groups: HashMap<(Vec<u64>, u64), (f64, usize)> = HashMap::new();
    for ((x, &y), &u) in ref_sample.xs.iter().zip(&ref_sample.ys).zip(&f_ref.dual) {
        let e = groups.entry(key(x, y)).or_insert((0.0, 0));
        e.0 += u;
        e.1 += 1;
    }
    let reference = f_ref.f.compacted();
    let h_of = |set: &TrainingSet| -> Vec<f64> {
        let vals = reference.eval_many(&set.xs, opts.exec);
        vals.iter()
            .zip(&set.xs)
            .zip(&set.ys)
            .map(|((&v, x), &y)| match groups.get(&key(x, y)) {
                Some(&(sum, count)) => sum / count as f64,
                None => {
                    let (lo, hi) = loss.subgradient_interval(y, v);
                    0.5 * (lo + hi)
                }
            })
            .collect()
    };
    let h_ref = h_of(ref_sample);
    let h_t = h_of(t);
    let m = ref_sample.len() as f64;
    let n = t.len() as f64;
    let mean_ref = RkhsFunction::new(*k, ref_sample.xs.clone(), h_ref.iter().map(|h| h / m).collect())?;
    let mean_t = RkhsFunction::new(*k, t.xs.clone(), h_t.iter().map(|h| h / n).collect())?;
    let rhs = crate::kernel::rkhs_diff_norm(&mean_ref, &mean_t)? / lambda;

    let h_max = h_ref.iter().chain(&h_t).fold(0.0f64, |a, h| a.max(h.abs()));
    let ksup = k.sup_norm(None).unwrap_or(f64::INFINITY);
    let b_lambda = ksup * (ref_sample.risk_at_zero(loss) / lambda).sqrt();
    let h_bound = if b_lambda > 0.0 {
        loss.local_lipschitz(b_lambda)?
    } else {
        0.0
    };
    Ok(StabilityWitness {
        lhs,
        rhs,
        holds: lhs <= rhs + STABILITY_SLACK,
        h_max,
        h_bound,
        sample_solution: f_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{rkhs_diff_norm, KernelKind};
    use crate::loss::LossKind;
    use rand::{Rng, SeedableRng};

    fn gauss(dim: usize) -> KernelSpec {
        KernelSpec::gaussian(1.0, dim).unwrap()
    }

    #[test]
    fn single_point_hinge_closed_form() {
        // min_α α² + max(0, 1 − α) with k(x, x) = 1 gives α = 1/2.
        let t = TrainingSet::new(vec![vec![0.37]], vec![1.0]).unwrap();
        let sol = train(&t, &LossSpec::hinge(), &gauss(1), 1.0, 1e-12).unwrap();
        assert!((sol.f.eval(&[0.37]) - 0.5).abs() < 1e-9);
        assert!((sol.objective - 0.75).abs() < 1e-9);
    }

    #[test]
    fn two_point_least_squares_linear_kernel() {
        // f(x) = w·x, objective λw² + (1 − w)² at λ = 1 is minimized at w = 1/2.
        // The mean over both points equals the single-point residual, so
        // (1/2)[(1 − w)² + (−1 + w)²] = (1 − w)².
        let t = TrainingSet::new(vec![vec![1.0], vec![-1.0]], vec![1.0, -1.0]).unwrap();
        let k = KernelSpec::new(KernelKind::Linear, 1).unwrap();
        let sol = train(&t, &LossSpec::least_squares(), &k, 1.0, 1e-12).unwrap();
        let w = sol.f.eval(&[1.0]);
        assert!((w - 0.5).abs() < 1e-8, "w = {w}");
        assert!((sol.objective - 0.5).abs() < 1e-10);
        assert!(sol.gradient_residual.unwrap() <= 1e-12);
    }

    #[test]
    fn heavy_regularization_shrinks_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let ys: Vec<f64> = (0..30).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let t = TrainingSet::new(xs, ys).unwrap();
        let sol = train(&t, &LossSpec::hinge(), &gauss(1), 1e6, 1e-10).unwrap();
        assert!(sol.norm() <= 1e-3);
    }

    #[test]
    fn objective_consistency_and_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random_range(-2.0..2.0)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if x[0] > 0.1 { 1.0 } else { -1.0 }).collect();
        let t = TrainingSet::new(xs.clone(), ys).unwrap();
        let loss = LossSpec::hinge();
        let k = gauss(1);
        let lambda = 0.05;
        let zero = RkhsFunction::zero(k);
        assert_eq!(objective(&zero, &t, &loss, lambda).unwrap(), t.risk_at_zero(&loss));
        let sol = train(&t, &loss, &k, lambda, 1e-10).unwrap();
        let again = objective(&sol.f, &t, &loss, lambda).unwrap();
        assert!((again - sol.objective).abs() < 1e-10);
        let bump = RkhsFunction::section(k, xs[0].clone()).unwrap();
        let perturbed = sol.f.linear_combination(1.0, &bump, 0.1).unwrap();
        assert!(objective(&perturbed, &t, &loss, lambda).unwrap() > sol.objective);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = TrainingSet::new(vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(train(&t, &LossSpec::hinge(), &gauss(1), 0.0, 1e-8).is_err());
        assert!(train(&t, &LossSpec::hinge(), &gauss(1), -1.0, 1e-8).is_err());
        let bad = TrainingSet::new(vec![vec![0.0]], vec![0.5]).unwrap();
        assert!(matches!(train(&bad, &LossSpec::hinge(), &gauss(1), 1.0, 1e-8), Err(Error::Domain { .. })));
        assert!(TrainingSet::new(vec![], vec![]).is_err());
    }

    #[test]
    fn duplicate_inputs_are_handled() {
        let xs = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0], vec![1.0]];
        let ys = vec![1.0, 1.0, -1.0, -1.0, -1.0];
        let t = TrainingSet::new(xs, ys).unwrap();
        let sol = train(&t, &LossSpec::hinge(), &gauss(1), 0.1, 1e-12).unwrap();
        assert!(sol.converged);
        let again = objective(&sol.f, &t, &LossSpec::hinge(), 0.1).unwrap();
        assert!((again - sol.objective).abs() < 1e-12);
    }

    #[test]
    fn all_losses_converge_and_respect_norm_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let kinds = [
            LossKind::Hinge,
            LossKind::SquaredHinge,
            LossKind::LogisticMargin,
            LossKind::LeastSquares,
            LossKind::AbsoluteDistance,
            LossKind::EpsilonInsensitive { epsilon: 0.2 },
            LossKind::Huber { delta: 0.5 },
        ];
        for kind in kinds {
            let loss = LossSpec::new(kind).unwrap();
            let xs: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| match loss.family() {
                    crate::loss::LossFamily::MarginBased => {
                        if x[0] + 0.3 * x[1] > 0.0 { 1.0 } else { -1.0 }
                    }
                    _ => x[0].sin() + 0.1 * rng.random_range(-1.0..1.0),
                })
                .collect();
            let t = TrainingSet::new(xs, ys).unwrap();
            for lambda in [1.0, 1e-2, 1e-3] {
                let sol = train(&t, &loss, &gauss(2), lambda, 1e-9).unwrap();
                assert!(sol.converged, "{kind:?} λ={lambda}: gap {}", sol.duality_gap);
                assert!(sol.opt_residual <= 1e-9);
                assert!(sol.norm() <= (t.risk_at_zero(&loss) / lambda).sqrt());
            }
        }
    }

    #[test]
    fn stability_witness_identical_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| if x[0] > 0.0 { 1.0 } else { -1.0 }).collect();
        let t = TrainingSet::new(xs, ys).unwrap();
        let loss = LossSpec::hinge();
        let k = gauss(1);
        let opts = SolverOptions::default();
        let reference = train_with(&t, &loss, &k, 0.1, &opts).unwrap();
        let w = stability_witness(&reference, &t, &t, &loss, &k, 0.1, &opts).unwrap();
        assert_eq!(w.lhs, 0.0);
        assert!(w.holds);
        assert!(w.h_max <= w.h_bound);
        assert!(rkhs_diff_norm(&reference.f, &w.sample_solution.f).unwrap() == 0.0);
    }
}
