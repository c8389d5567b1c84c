//! Dependent data-generating processes with analytic stationary means.
//!
//! Every generator is driven by a ChaCha stream seeded from an explicit
//! 64-bit seed; a path of length `n` is always a prefix of the path of length
//! `n + 1` drawn from the same seed.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{LossFamily, LossKind, LossSpec};
use crate::quad;
use crate::solver::TrainingSet;

/// Stream ids separating the independent random sources of a seed.
const STREAM_PATH: u64 = 1;
const STREAM_BITS: u64 = 2;
const STREAM_STATIONARY: u64 = 3;

/// Largest state space accepted for Markov chains.
pub const MAX_STATES: usize = 20;

const QUAD_TOL: f64 = 1e-10;

/// Input distribution of the i.i.d. variant.
#[derive(Debug, Clone, PartialEq)]
pub enum XDist {
    /// Isotropic Gaussian components `N(means[k], sds[k]² I)`.
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        sds: Vec<f64>,
    },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
}

impl XDist {
    pub fn dim(&self) -> usize {
        match self {
            XDist::GaussianMixture { means, .. } => means[0].len(),
            XDist::UniformBox { lo, .. } => lo.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            XDist::GaussianMixture { weights, means, sds } => {
                if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
                    return Err(Error::Config("gaussian mixture needs matching weights/means/sds".into()));
                }
                linalg::check_distribution(weights, "mixture weights")?;
                let d = means[0].len();
                if d == 0 || means.iter().any(|m| m.len() != d) {
                    return Err(Error::Config("mixture means must share a positive dimension".into()));
                }
                if sds.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config("mixture sds must be positive".into()));
                }
            }
            XDist::UniformBox { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return Err(Error::Config("uniform box needs lo < hi coordinatewise".into()));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            XDist::GaussianMixture { weights, means, sds } => {
                let k = pick(weights, rng.random::<f64>());
                means[k]
                    .iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + sds[k] * z
                    })
                    .collect()
            }
            XDist::UniformBox { lo, hi } => lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect(),
        }
    }
}

/// `P(y = 1 | x)` for classification labels.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassProb {
    Constant(f64),
    /// One probability per Markov state.
    PerState(Vec<f64>),
    /// `1 / (1 + exp(−(w·x + b)))`.
    Logistic { weights: Vec<f64>, bias: f64 },
}

/// Conditional mean of regression labels.
#[derive(Debug, Clone, PartialEq)]
pub enum RegressionMean {
    PerState(Vec<f64>),
    Linear { weights: Vec<f64>, bias: f64 },
    /// `amplitude · sin(frequency · x₀)`.
    Sine { amplitude: f64, frequency: f64 },
}

/// Symmetric additive label noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian { sd: f64 },
    Laplace { scale: f64 },
    StudentT { dof: f64, scale: f64 },
}

impl Noise {
    fn validate(&self, moment_order: f64) -> Result<()> {
        let ok = match *self {
            Noise::Gaussian { sd } => sd > 0.0,
            Noise::Laplace { scale } => scale > 0.0,
            Noise::StudentT { dof, scale } => {
                if !(moment_order < dof) {
                    return Err(Error::Config(format!(
                        "student-t noise with {dof} degrees of freedom has no finite moment of order {moment_order}"
                    )));
                }
                dof > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise parameters {self:?}")))
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Noise::Gaussian { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Noise::Laplace { scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Noise::StudentT { dof, scale } => scale * StudentT::new(dof).expect("validated dof").sample(rng),
        }
    }

    pub fn pdf(&self, e: f64) -> f64 {
        use statrs::distribution::Continuous;
        match *self {
            Noise::Gaussian { sd } => quad::normal_pdf(e, 0.0, sd),
            Noise::Laplace { scale } => (-e.abs() / scale).exp() / (2.0 * scale),
            Noise::StudentT { dof, scale } => {
                statrs::distribution::StudentsT::new(0.0, scale, dof)
                    .expect("validated")
                    .pdf(e)
            }
        }
    }

    /// `E g(ε)` for an even integrand `g`, integrated over `[0, ∞)` after
    /// the substitution `e = s / (1 − s)`. Points where `g` is not smooth
    /// should be listed in `breaks` so the quadrature can split there.
    pub fn expect_even<F: Fn(f64) -> f64>(&self, g: F, breaks: &[f64]) -> f64 {
        let integrand = |s: f64| {
            if s >= 1.0 {
                return 0.0;
            }
            let e = s / (1.0 - s);
            let v = g(e) * self.pdf(e) / ((1.0 - s) * (1.0 - s));
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut knots = vec![0.0];
        let mut inner: Vec<f64> = breaks.iter().filter(|b| **b > 0.0).map(|b| b / (1.0 + b)).collect();
        inner.sort_by(|a, b| a.partial_cmp(b).unwrap());
        knots.extend(inner);
        knots.push(1.0);
        2.0 * knots
            .windows(2)
            .map(|w| quad::integrate(&integrand, w[0], w[1], QUAD_TOL))
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabelModel {
    Classification(ClassProb),
    /// `y = mean(x) + ε` with `E|ε|^moment_order < ∞`.
    Regression {
        mean: RegressionMean,
        noise: Noise,
        moment_order: f64,
    },
}

/// A finite-state homogeneous Markov chain with a feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    trans: DMatrix<f64>,
    init: Vec<f64>,
    feature_map: Vec<Vec<f64>>,
}

impl MarkovChain {
    pub fn new(trans: Vec<Vec<f64>>, init: Vec<f64>, feature_map: Vec<Vec<f64>>) -> Result<Self> {
        let m = trans.len();
        if m == 0 || m > MAX_STATES {
            return Err(Error::Config(format!("chain needs 1..={MAX_STATES} states, got {m}")));
        }
        if trans.iter().any(|r| r.len() != m) {
            return Err(Error::Config("transition matrix must be square".into()));
        }
        let trans = DMatrix::from_row_slice(m, m, &trans.concat());
        linalg::check_stochastic(&trans)?;
        if init.len() != m {
            return Err(Error::Config(format!("init has {} entries for {m} states", init.len())));
        }
        linalg::check_distribution(&init, "init")?;
        if feature_map.len() != m {
            return Err(Error::Config(format!("feature_map has {} rows for {m} states", feature_map.len())));
        }
        let d = feature_map[0].len();
        if d == 0 || feature_map.iter().any(|f| f.len() != d) {
            return Err(Error::Config("feature_map rows must share a positive dimension".into()));
        }
        Ok(Self { trans, init, feature_map })
    }

    /// A chain started in its (Cesàro) stationary law.
    pub fn stationary(trans: Vec<Vec<f64>>, feature_map: Vec<Vec<f64>>) -> Result<Self> {
        let m = trans.len();
        let mut chain = Self::new(trans, vec![1.0 / m as f64; m], feature_map)?;
        chain.init = chain.stationary_law();
        Ok(chain)
    }

    pub fn states(&self) -> usize {
        self.trans.nrows()
    }

    pub fn trans(&self) -> &DMatrix<f64> {
        &self.trans
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn feature_map(&self) -> &[Vec<f64>] {
        &self.feature_map
    }

    pub fn with_init(&self, init: Vec<f64>) -> Result<Self> {
        Self::new(
            self.trans.row_iter().map(|r| r.iter().copied().collect()).collect(),
            init,
            self.feature_map.clone(),
        )
    }

    /// Cesàro limit of the marginal laws.
    pub fn stationary_law(&self) -> Vec<f64> {
        linalg::cesaro_limit(&self.trans, &self.init)
    }

    /// Whether the initial law is invariant (`ν·P = ν` within `1e-12`).
    pub fn is_stationary(&self) -> bool {
        let next = linalg::row_times(&self.init, &self.trans);
        next.iter().zip(&self.init).all(|(a, b)| (a - b).abs() <= 1e-12)
    }

    /// Smallest `k` with `Pᵏ > 0`, witnessing the Doeblin condition.
    pub fn primitivity_index(&self) -> Option<usize> {
        linalg::primitivity_index(&self.trans)
    }

    /// Law of `Z_i` (1-based), `ν·P^(i−1)`.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        assert!(i >= 1, "time indices start at 1");
        let p = linalg::stochastic_power(&self.trans, i - 1).matrix;
        linalg::row_times(&self.init, &p)
    }

    /// `P_n = (1/n) Σ_{i=1}^n ν·P^(i−1)` for `n = 1..=n_max`, by exact
    /// forward iteration.
    pub fn marginal_averages(&self, n_max: usize) -> Vec<Vec<f64>> {
        let m = self.states();
        let mut cur = self.init.clone();
        let mut sum = vec![0.0; m];
        let mut out = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            for (s, c) in sum.iter_mut().zip(&cur) {
                *s += c;
            }
            out.push(sum.iter().map(|s| s / n as f64).collect());
            cur = linalg::row_times(&cur, &self.trans);
        }
        out
    }

    fn step(&self, state: usize, u: f64) -> usize {
        let row: Vec<f64> = self.trans.row(state).iter().copied().collect();
        pick(&row, u)
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcessKind {
    Iid { x_dist: XDist },
    MarkovChain(MarkovChain),
    /// `x_{i+1} = ρ xᵢ + N(0, noise_sd²)`, started at `x0` or, when absent,
    /// in the stationary law.
    Ar1 { rho: f64, noise_sd: f64, x0: Option<f64> },
    /// Hidden doubling map `z_{i+1} = 2zᵢ mod 1` observed as `xᵢ = zᵢ + εᵢ`.
    /// Labels are drawn from the hidden state.
    NoisyDoubling { noise_sd: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSpec {
    kind: ProcessKind,
    label: LabelModel,
}

/// The stationary mean `P` of a process (its input marginal; labels follow
/// the process's label model).
#[derive(Debug, Clone, PartialEq)]
pub enum StationaryMean {
    Markov { pi: Vec<f64> },
    Iid(XDist),
    /// `N(0, sd²)` with `sd² = noise_sd² / (1 − ρ²)`.
    Ar1 { sd: f64 },
    /// Uniform hidden state on `[0, 1)` plus `N(0, noise_sd²)` observation noise.
    NoisyDoubling { noise_sd: f64 },
}

/// A sampled path with its hidden coordinates.
#[derive(Debug, Clone)]
pub struct Path {
    pub data: TrainingSet,
    /// Markov states, when the process has them.
    pub states: Option<Vec<usize>>,
    /// Hidden doubling-map states.
    pub hidden: Option<Vec<f64>>,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, label: LabelModel) -> Result<Self> {
        match &kind {
            ProcessKind::Iid { x_dist } => x_dist.validate()?,
            ProcessKind::MarkovChain(_) => {}
            ProcessKind::Ar1 { rho, noise_sd, x0 } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::Config(format!("AR(1) needs |rho| < 1, got {rho}")));
                }
                if !(*noise_sd > 0.0) {
                    return Err(Error::Config(format!("noise_sd must be > 0, got {noise_sd}")));
                }
                if x0.is_some_and(|x| !x.is_finite()) {
                    return Err(Error::Config("x0 must be finite".into()));
                }
            }
            ProcessKind::NoisyDoubling { noise_sd } => {
                if !(*noise_sd > 0.0) {
                    return Err(Error::Config(format!("noise_sd must be > 0, got {noise_sd}")));
                }
            }
        }
        let spec = Self { kind, label };
        spec.validate_label()?;
        Ok(spec)
    }

    fn label_dim(&self) -> usize {
        match &self.kind {
            ProcessKind::NoisyDoubling { .. } => 1,
            _ => self.input_dim(),
        }
    }

    fn validate_label(&self) -> Result<()> {
        let states = match &self.kind {
            ProcessKind::MarkovChain(c) => Some(c.states()),
            _ => None,
        };
        let per_state = |len: usize| -> Result<()> {
            match states {
                Some(m) if m == len => Ok(()),
                Some(m) => Err(Error::Config(format!("per-state label parameters have {len} entries for {m} states"))),
                None => Err(Error::Config("per-state label parameters need a Markov chain".into())),
            }
        };
        let dim = self.label_dim();
        match &self.label {
            LabelModel::Classification(p) => match p {
                ClassProb::Constant(e) => check_prob(*e),
                ClassProb::PerState(v) => {
                    per_state(v.len())?;
                    v.iter().try_for_each(|e| check_prob(*e))
                }
                ClassProb::Logistic { weights, bias } => {
                    if weights.len() != dim || !bias.is_finite() {
                        return Err(Error::Config(format!("logistic label weights need {dim} entries")));
                    }
                    Ok(())
                }
            },
            LabelModel::Regression { mean, noise, moment_order } => {
                if !(*moment_order >= 1.0) {
                    return Err(Error::Config(format!("moment_order must be >= 1, got {moment_order}")));
                }
                noise.validate(*moment_order)?;
                match mean {
                    RegressionMean::PerState(v) => per_state(v.len()),
                    RegressionMean::Linear { weights, .. } if weights.len() != dim => {
                        Err(Error::Config(format!("linear mean weights need {dim} entries")))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn kind(&self) -> &ProcessKind {
        &self.kind
    }

    pub fn label(&self) -> &LabelModel {
        &self.label
    }

    pub fn chain(&self) -> Option<&MarkovChain> {
        match &self.kind {
            ProcessKind::MarkovChain(c) => Some(c),
            _ => None,
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.kind {
            ProcessKind::Iid { x_dist } => x_dist.dim(),
            ProcessKind::MarkovChain(c) => c.feature_map[0].len(),
            ProcessKind::Ar1 { .. } | ProcessKind::NoisyDoubling { .. } => 1,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.label, LabelModel::Classification(_))
    }

    /// Checks that `loss` fits the label model: margin losses need
    /// classification labels, and a regression loss of growth order `p`
    /// needs noise with a finite moment of order `q ≥ p`.
    pub fn check_loss(&self, loss: &LossSpec) -> Result<()> {
        match (&self.label, loss.family()) {
            (LabelModel::Regression { .. }, LossFamily::MarginBased) => Err(Error::Config(format!(
                "margin-based loss `{}` needs classification labels",
                loss.name()
            ))),
            (LabelModel::Regression { moment_order, .. }, LossFamily::DistanceBased) => {
                let p = loss.growth_constants()?.p_upper;
                if p > *moment_order {
                    return Err(Error::Config(format!(
                        "loss growth order p = {p} exceeds the declared moment order q = {moment_order}"
                    )));
                }
                if !matches!(loss.y_range(), crate::loss::LabelRange::Unbounded) {
                    return Err(Error::Config("regression labels are unbounded; the loss needs an unbounded y_range".into()));
                }
                Ok(())
            }
            (LabelModel::Classification(_), LossFamily::DistanceBased) => {
                if loss.y_range().contains(1.0) && loss.y_range().contains(-1.0) {
                    Ok(())
                } else {
                    Err(Error::Config("loss y_range must contain the labels -1 and 1".into()))
                }
            }
            (LabelModel::Classification(_), LossFamily::MarginBased) => Ok(()),
        }
    }

    fn eta(&self, x: &[f64], state: Option<usize>) -> f64 {
        match &self.label {
            LabelModel::Classification(p) => match p {
                ClassProb::Constant(e) => *e,
                ClassProb::PerState(v) => v[state.expect("per-state labels need a state")],
                ClassProb::Logistic { weights, bias } => {
                    let s: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
                    1.0 / (1.0 + (-s).exp())
                }
            },
            LabelModel::Regression { .. } => unreachable!("eta of a regression model"),
        }
    }

    fn regression_mean(&self, x: &[f64], state: Option<usize>) -> f64 {
        match &self.label {
            LabelModel::Regression { mean, .. } => match mean {
                RegressionMean::PerState(v) => v[state.expect("per-state means need a state")],
                RegressionMean::Linear { weights, bias } => weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias,
                RegressionMean::Sine { amplitude, frequency } => amplitude * (frequency * x[0]).sin(),
            },
            LabelModel::Classification(_) => unreachable!("mean of a classification model"),
        }
    }

    /// The Bayes-optimal predictor value at an input (and state, for chains).
    ///
    /// For classification this minimizes the inner risk at `η(x)`; for
    /// regression with symmetric noise it is the conditional mean.
    pub fn bayes_decision(&self, loss: &LossSpec, x: &[f64], state: Option<usize>) -> f64 {
        match &self.label {
            LabelModel::Classification(_) => inner_minimizer(loss, self.eta(x, state)).0,
            LabelModel::Regression { .. } => self.regression_mean(x, state),
        }
    }

    /// `P(y = 1 | x, state)` for classification processes.
    pub fn class_prob(&self, x: &[f64], state: Option<usize>) -> Option<f64> {
        self.is_classification().then(|| self.eta(x, state))
    }

    fn draw_label(&self, label_x: &[f64], state: Option<usize>, rng: &mut ChaCha8Rng) -> f64 {
        match &self.label {
            LabelModel::Classification(_) => {
                let eta = self.eta(label_x, state);
                if rng.random::<f64>() < eta {
                    1.0
                } else {
                    -1.0
                }
            }
            LabelModel::Regression { noise, .. } => self.regression_mean(label_x, state) + noise.sample(rng),
        }
    }

    /// The observed sequence `((x₁, y₁), …, (xₙ, yₙ))`.
    pub fn sample_path(&self, seed: u64, n: usize) -> Result<TrainingSet> {
        Ok(self.sample_path_detailed(seed, n)?.data)
    }

    pub fn sample_path_detailed(&self, seed: u64, n: usize) -> Result<Path> {
        if n == 0 {
            return Err(Error::param("n", "path length must be positive"));
        }
        let mut rng = stream(seed, STREAM_PATH);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        let mut states = None;
        let mut hidden = None;
        match &self.kind {
            ProcessKind::Iid { x_dist } => {
                for _ in 0..n {
                    let x = x_dist.sample(&mut rng);
                    ys.push(self.draw_label(&x, None, &mut rng));
                    xs.push(x);
                }
            }
            ProcessKind::MarkovChain(chain) => {
                let mut path = Vec::with_capacity(n);
                let mut s = pick(&chain.init, rng.random::<f64>());
                for i in 0..n {
                    if i > 0 {
                        s = chain.step(s, rng.random::<f64>());
                    }
                    let x = chain.feature_map[s].clone();
                    ys.push(self.draw_label(&x, Some(s), &mut rng));
                    xs.push(x);
                    path.push(s);
                }
                states = Some(path);
            }
            ProcessKind::Ar1 { rho, noise_sd, x0 } => {
                let innov = Normal::new(0.0, *noise_sd).expect("validated sd");
                let mut x = match x0 {
                    Some(v) => *v,
                    None => Normal::new(0.0, ar1_sd(*rho, *noise_sd)).expect("validated").sample(&mut rng),
                };
                for i in 0..n {
                    if i > 0 {
                        x = rho * x + innov.sample(&mut rng);
                    }
                    ys.push(self.draw_label(&[x], None, &mut rng));
                    xs.push(vec![x]);
                }
            }
            ProcessKind::NoisyDoubling { noise_sd } => {
                let mut bits = DoublingState::new(stream(seed, STREAM_BITS));
                let obs = Normal::new(0.0, *noise_sd).expect("validated sd");
                let mut zs = Vec::with_capacity(n);
                for i in 0..n {
                    if i > 0 {
                        bits.advance();
                    }
                    let z = bits.value();
                    let x = z + obs.sample(&mut rng);
                    ys.push(self.draw_label(&[z], None, &mut rng));
                    xs.push(vec![x]);
                    zs.push(z);
                }
                hidden = Some(zs);
            }
        }
        Ok(Path {
            data: TrainingSet { xs, ys },
            states,
            hidden,
        })
    }

    pub fn stationary_mean(&self) -> StationaryMean {
        match &self.kind {
            ProcessKind::Iid { x_dist } => StationaryMean::Iid(x_dist.clone()),
            ProcessKind::MarkovChain(c) => StationaryMean::Markov { pi: c.stationary_law() },
            ProcessKind::Ar1 { rho, noise_sd, .. } => StationaryMean::Ar1 {
                sd: ar1_sd(*rho, *noise_sd),
            },
            ProcessKind::NoisyDoubling { noise_sd } => StationaryMean::NoisyDoubling { noise_sd: *noise_sd },
        }
    }

    /// `m` i.i.d. draws from the stationary mean.
    pub fn sample_stationary(&self, seed: u64, m: usize) -> Result<TrainingSet> {
        Ok(self.sample_stationary_detailed(seed, m)?.data)
    }

    pub fn sample_stationary_detailed(&self, seed: u64, m: usize) -> Result<Path> {
        if m == 0 {
            return Err(Error::param("m", "sample size must be positive"));
        }
        let mut rng = stream(seed, STREAM_STATIONARY);
        let mut xs = Vec::with_capacity(m);
        let mut ys = Vec::with_capacity(m);
        let mut states = None;
        match self.stationary_mean() {
            StationaryMean::Iid(dist) => {
                for _ in 0..m {
                    let x = dist.sample(&mut rng);
                    ys.push(self.draw_label(&x, None, &mut rng));
                    xs.push(x);
                }
            }
            StationaryMean::Markov { pi } => {
                let chain = self.chain().expect("markov mean");
                let mut st = Vec::with_capacity(m);
                for _ in 0..m {
                    let s = pick(&pi, rng.random::<f64>());
                    let x = chain.feature_map[s].clone();
                    ys.push(self.draw_label(&x, Some(s), &mut rng));
                    xs.push(x);
                    st.push(s);
                }
                states = Some(st);
            }
            StationaryMean::Ar1 { sd } => {
                let d = Normal::new(0.0, sd).expect("positive sd");
                for _ in 0..m {
                    let x = d.sample(&mut rng);
                    ys.push(self.draw_label(&[x], None, &mut rng));
                    xs.push(vec![x]);
                }
            }
            StationaryMean::NoisyDoubling { noise_sd } => {
                let obs = Normal::new(0.0, noise_sd).expect("positive sd");
                for _ in 0..m {
                    let z: f64 = rng.random();
                    let x = z + obs.sample(&mut rng);
                    ys.push(self.draw_label(&[z], None, &mut rng));
                    xs.push(vec![x]);
                }
            }
        }
        Ok(Path {
            data: TrainingSet { xs, ys },
            states,
            hidden: None,
        })
    }

    /// Bayes risk `R*_{L,P}` under the stationary mean.
    pub fn bayes_risk(&self, loss: &LossSpec) -> Result<f64> {
        self.check_loss(loss)?;
        match &self.label {
            LabelModel::Regression { noise, .. } => {
                if matches!(self.kind, ProcessKind::NoisyDoubling { .. }) {
                    return Err(Error::Unsupported(
                        "Bayes risk of regression labels on the hidden doubling state".into(),
                    ));
                }
                // Symmetric noise and an even convex ψ: the conditional mean is optimal.
                Ok(noise.expect_even(|e| loss.eval_unchecked(e, 0.0), &loss_breaks(loss)))
            }
            LabelModel::Classification(prob) => {
                let inner = |eta: f64| inner_minimizer(loss, eta).1;
                match (&self.kind, prob) {
                    (_, ClassProb::Constant(e)) => Ok(inner(*e)),
                    (ProcessKind::MarkovChain(c), _) => {
                        let pi = c.stationary_law();
                        Ok((0..c.states())
                            .map(|s| pi[s] * inner(self.eta(&c.feature_map[s], Some(s))))
                            .sum())
                    }
                    (_, ClassProb::PerState(_)) => unreachable!("validated"),
                    (ProcessKind::Ar1 { rho, noise_sd, .. }, ClassProb::Logistic { .. }) => {
                        let sd = ar1_sd(*rho, *noise_sd);
                        Ok(quad::gaussian_expectation(|x| inner(self.eta(&[x], None)), 0.0, sd, QUAD_TOL))
                    }
                    (ProcessKind::Iid { x_dist }, ClassProb::Logistic { weights, bias }) => match x_dist {
                        XDist::GaussianMixture { weights: w, means, sds } => {
                            // η depends on x only through the projection s = w·x + b.
                            let wn = weights.iter().map(|v| v * v).sum::<f64>().sqrt();
                            let sig = |s: f64| 1.0 / (1.0 + (-s).exp());
                            Ok(w.iter()
                                .zip(means)
                                .zip(sds)
                                .map(|((wk, mk), sk)| {
                                    let mean = weights.iter().zip(mk).map(|(a, b)| a * b).sum::<f64>() + bias;
                                    if wn == 0.0 {
                                        wk * inner(sig(mean))
                                    } else {
                                        wk * quad::gaussian_expectation(|s| inner(sig(s)), mean, sk * wn, QUAD_TOL)
                                    }
                                })
                                .sum())
                        }
                        XDist::UniformBox { lo, hi } if lo.len() == 1 => Ok(quad::integrate(
                            |x| inner(self.eta(&[x], None)),
                            lo[0],
                            hi[0],
                            QUAD_TOL,
                        ) / (hi[0] - lo[0])),
                        XDist::UniformBox { .. } => Err(Error::Unsupported(
                            "Bayes risk of logistic labels on a multi-dimensional box".into(),
                        )),
                    },
                    (ProcessKind::NoisyDoubling { noise_sd }, ClassProb::Logistic { .. }) => {
                        let s = *noise_sd;
                        let lo = -10.0 * s;
                        let hi = 1.0 + 10.0 * s;
                        // Observed density p(x) = ∫₀¹ φ_s(x − z) dz and η̃(x) = E[η(z) | x].
                        Ok(quad::integrate(
                            |x| {
                                let px = quad::normal_cdf(x, 0.0, s) - quad::normal_cdf(x - 1.0, 0.0, s);
                                if px <= 1e-300 {
                                    return 0.0;
                                }
                                let num = quad::integrate(
                                    |z| self.eta(&[z], None) * quad::normal_pdf(x - z, 0.0, s),
                                    0.0,
                                    1.0,
                                    1e-12,
                                );
                                px * inner((num / px).clamp(0.0, 1.0))
                            },
                            lo,
                            hi,
                            1e-9,
                        ))
                    }
                }
            }
        }
    }

    /// `E_P f` for a bounded test function.
    pub fn expectation(&self, f: &TestFunction) -> Result<f64> {
        match f {
            TestFunction::Constant(c) => Ok(*c),
            TestFunction::StateIndicator(s) => match self.stationary_mean() {
                StationaryMean::Markov { pi } if *s < pi.len() => Ok(pi[*s]),
                StationaryMean::Markov { .. } => Err(Error::Config(format!("state {s} out of range"))),
                _ => Err(Error::Config("state indicators need a Markov chain".into())),
            },
            TestFunction::Threshold { coord, at } => {
                if *coord >= self.input_dim() {
                    return Err(Error::Config(format!("coordinate {coord} out of range")));
                }
                Ok(match self.stationary_mean() {
                    StationaryMean::Markov { pi } => {
                        let c = self.chain().expect("markov");
                        pi.iter()
                            .zip(&c.feature_map)
                            .filter(|(_, x)| x[*coord] <= *at)
                            .map(|(p, _)| p)
                            .sum()
                    }
                    StationaryMean::Iid(XDist::GaussianMixture { weights, means, sds }) => weights
                        .iter()
                        .zip(&means)
                        .zip(&sds)
                        .map(|((w, m), s)| w * quad::normal_cdf(*at, m[*coord], *s))
                        .sum(),
                    StationaryMean::Iid(XDist::UniformBox { lo, hi }) => {
                        ((at - lo[*coord]) / (hi[*coord] - lo[*coord])).clamp(0.0, 1.0)
                    }
                    StationaryMean::Ar1 { sd } => quad::normal_cdf(*at, 0.0, sd),
                    StationaryMean::NoisyDoubling { noise_sd } => {
                        quad::integrate(|z| quad::normal_cdf(*at - z, 0.0, noise_sd), 0.0, 1.0, 1e-12)
                    }
                })
            }
        }
    }

    /// Law-of-large-numbers deviations `|(1/n) Σ f(Zᵢ) − E_P f|` along one
    /// path per seed, read off at every `n` of the grid.
    pub fn lln_diagnostic(
        &self,
        f: &TestFunction,
        n_grid: &[usize],
        seeds: &[u64],
        exec: crate::par::Execution,
    ) -> Result<LlnTable> {
        let expected = self.expectation(f)?;
        let n_max = *n_grid.iter().max().ok_or_else(|| Error::Config("empty n_grid".into()))?;
        if n_grid.contains(&0) {
            return Err(Error::Config("n_grid entries must be positive".into()));
        }
        if matches!(f, TestFunction::StateIndicator(_)) && self.chain().is_none() {
            return Err(Error::Config("state indicators need a Markov chain".into()));
        }
        let per_seed = crate::par::map_slice(exec, seeds, |&seed| -> Result<Vec<LlnRow>> {
            let path = self.sample_path_detailed(seed, n_max)?;
            let mut running = Vec::with_capacity(n_max);
            let mut acc = 0.0;
            for i in 0..n_max {
                let state = path.states.as_ref().map(|s| s[i]);
                acc += f.eval(&path.data.xs[i], state);
                running.push(acc);
            }
            Ok(n_grid
                .iter()
                .map(|&n| {
                    let mean = running[n - 1] / n as f64;
                    LlnRow {
                        n,
                        seed,
                        mean,
                        expected,
                        deviation: (mean - expected).abs(),
                    }
                })
                .collect())
        });
        let mut rows = Vec::new();
        for r in per_seed {
            rows.extend(r?);
        }
        rows.sort_by_key(|r| (r.n, seeds.iter().position(|s| *s == r.seed)));
        let summary = n_grid
            .iter()
            .map(|&n| {
                let mut d: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| r.deviation).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                LlnSummary {
                    n,
                    median: quantile(&d, 0.5),
                    q90: quantile(&d, 0.9),
                    max: *d.last().unwrap_or(&0.0),
                }
            })
            .collect();
        Ok(LlnTable { rows, summary })
    }
}

/// Points of `[0, ∞)` where a distance loss `ψ(r)` is not smooth.
fn loss_breaks(loss: &LossSpec) -> Vec<f64> {
    match loss.kind() {
        LossKind::EpsilonInsensitive { epsilon } => vec![epsilon],
        LossKind::Huber { delta } => vec![delta],
        _ => Vec::new(),
    }
}

fn check_prob(e: f64) -> Result<()> {
    if (0.0..=1.0).contains(&e) {
        Ok(())
    } else {
        Err(Error::Config(format!("class probability {e} outside [0, 1]")))
    }
}

fn ar1_sd(rho: f64, noise_sd: f64) -> f64 {
    noise_sd / (1.0 - rho * rho).sqrt()
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Doubling-map state held as a 64-bit binary fraction.
///
/// `2z mod 1` shifts the binary expansion left by one digit; the digit that
/// enters at the bottom is the next digit of the uniformly random initial
/// point, revealed lazily from a dedicated bit stream. The orbit is thus
/// exact to 64 bits at every step and never collapses onto 0.
struct DoublingState {
    z: u64,
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl DoublingState {
    fn new(mut rng: ChaCha8Rng) -> Self {
        let z = rng.random::<u64>();
        Self { z, rng, buf: 0, left: 0 }
    }

    fn advance(&mut self) {
        if self.left == 0 {
            self.buf = self.rng.random::<u64>();
            self.left = 64;
        }
        let bit = self.buf >> 63;
        self.buf <<= 1;
        self.left -= 1;
        self.z = (self.z << 1) | bit;
    }

    fn value(&self) -> f64 {
        (self.z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Minimizer and value of the inner risk `η L(1, t) + (1 − η) L(−1, t)`.
pub fn inner_minimizer(loss: &LossSpec, eta: f64) -> (f64, f64) {
    let value = |t: f64| eta * loss.eval_unchecked(1.0, t) + (1.0 - eta) * loss.eval_unchecked(-1.0, t);
    match loss.kind() {
        LossKind::Hinge => {
            let t = if eta > 0.5 {
                1.0
            } else if eta < 0.5 {
                -1.0
            } else {
                0.0
            };
            (t, 2.0 * eta.min(1.0 - eta))
        }
        LossKind::SquaredHinge | LossKind::LeastSquares => {
            let t = 2.0 * eta - 1.0;
            (t, 4.0 * eta * (1.0 - eta))
        }
        LossKind::LogisticMargin => {
            let h = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
            let t = if eta <= 0.0 {
                f64::NEG_INFINITY
            } else if eta >= 1.0 {
                f64::INFINITY
            } else {
                (eta / (1.0 - eta)).ln()
            };
            (t, h(eta) + h(1.0 - eta))
        }
        _ => quad::golden_min(value, -1.5, 1.5, 1e-12),
    }
}

/// Bounded test functions on the observed process.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    StateIndicator(usize),
    /// `1{x[coord] ≤ at}`.
    Threshold { coord: usize, at: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: &[f64], state: Option<usize>) -> f64 {
        match self {
            TestFunction::Constant(c) => *c,
            TestFunction::StateIndicator(s) => (state == Some(*s)) as u8 as f64,
            TestFunction::Threshold { coord, at } => (x[*coord] <= *at) as u8 as f64,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TestFunction::Constant(c) => format!("constant:{c}"),
            TestFunction::StateIndicator(s) => format!("state:{s}"),
            TestFunction::Threshold { coord, at } => format!("threshold:{coord}:{at}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub n: usize,
    pub seed: u64,
    pub mean: f64,
    pub expected: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnSummary {
    pub n: usize,
    pub median: f64,
    pub q90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnTable {
    pub rows: Vec<LlnRow>,
    pub summary: Vec<LlnSummary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}
