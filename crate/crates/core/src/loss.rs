//! Convex supervised losses `L(y, t)` and their analytic constants.
//!
//! Margin-based losses are evaluated as `φ(y·t)` on labels `y ∈ {−1, 1}`,
//! distance-based losses as `ψ(y − t)` on a (possibly unbounded) label
//! interval. Unbounded suprema are reported as `f64::INFINITY`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Hinge,
    SquaredHinge,
    LogisticMargin,
    LeastSquares,
    AbsoluteDistance,
    EpsilonInsensitive { epsilon: f64 },
    /// `ψ(r) = r²/2` for `|r| ≤ δ`, `δ|r| − δ²/2` otherwise.
    Huber { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFamily {
    MarginBased,
    DistanceBased,
}

/// The label set `Y` a loss is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelRange {
    /// `{−1, 1}`.
    Binary,
    Interval { lo: f64, hi: f64 },
    Unbounded,
}

impl LabelRange {
    pub fn contains(&self, y: f64) -> bool {
        match *self {
            LabelRange::Binary => y == 1.0 || y == -1.0,
            LabelRange::Interval { lo, hi } => y >= lo && y <= hi,
            LabelRange::Unbounded => y.is_finite(),
        }
    }

    /// `sup |y|` over the range.
    pub fn max_abs(&self) -> f64 {
        match *self {
            LabelRange::Binary => 1.0,
            LabelRange::Interval { lo, hi } => lo.abs().max(hi.abs()),
            LabelRange::Unbounded => f64::INFINITY,
        }
    }

    fn describe(&self) -> String {
        match *self {
            LabelRange::Binary => "{-1, 1}".to_string(),
            LabelRange::Interval { lo, hi } => format!("[{lo}, {hi}]"),
            LabelRange::Unbounded => "R".to_string(),
        }
    }
}

/// Growth envelope of a distance-based loss:
/// `c_lower(|r|^p_lower − 1) ≤ ψ(r) ≤ c_upper(|r|^p_upper + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthConstants {
    pub p_upper: f64,
    pub c_upper: f64,
    pub p_lower: f64,
    pub c_lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    kind: LossKind,
    y_range: LabelRange,
}

impl LossSpec {
    /// Builds a loss with the default label range of its family.
    pub fn new(kind: LossKind) -> Result<Self> {
        let y_range = match family_of(kind) {
            LossFamily::MarginBased => LabelRange::Binary,
            LossFamily::DistanceBased => LabelRange::Unbounded,
        };
        Self::with_range(kind, y_range)
    }

    pub fn with_range(kind: LossKind, y_range: LabelRange) -> Result<Self> {
        match kind {
            LossKind::EpsilonInsensitive { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                return Err(Error::param("epsilon", format!("must be >= 0, got {epsilon}")));
            }
            LossKind::Huber { delta } if !(delta > 0.0 && delta.is_finite()) => {
                return Err(Error::param("delta", format!("must be > 0, got {delta}")));
            }
            _ => {}
        }
        match (family_of(kind), y_range) {
            (LossFamily::MarginBased, LabelRange::Binary) => {}
            (LossFamily::MarginBased, _) => {
                return Err(Error::param("y_range", "margin-based losses use labels {-1, 1}"));
            }
            (LossFamily::DistanceBased, LabelRange::Binary) => {}
            (LossFamily::DistanceBased, LabelRange::Interval { lo, hi }) => {
                if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::param("y_range", format!("invalid interval [{lo}, {hi}]")));
                }
            }
            (LossFamily::DistanceBased, LabelRange::Unbounded) => {}
        }
        Ok(Self { kind, y_range })
    }

    pub fn hinge() -> Self {
        Self::new(LossKind::Hinge).expect("hinge is valid")
    }

    pub fn least_squares() -> Self {
        Self::new(LossKind::LeastSquares).expect("least squares is valid")
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn family(&self) -> LossFamily {
        family_of(self.kind)
    }

    pub fn y_range(&self) -> LabelRange {
        self.y_range
    }

    /// Lowercase identifier used in configuration files.
    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::Hinge => "hinge",
            LossKind::SquaredHinge => "squared_hinge",
            LossKind::LogisticMargin => "logistic",
            LossKind::LeastSquares => "least_squares",
            LossKind::AbsoluteDistance => "absolute",
            LossKind::EpsilonInsensitive { .. } => "eps_insensitive",
            LossKind::Huber { .. } => "huber",
        }
    }

    /// Whether `t ↦ L(y, t)` is differentiable everywhere.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self.kind,
            LossKind::SquaredHinge | LossKind::LogisticMargin | LossKind::LeastSquares | LossKind::Huber { .. }
        )
    }

    /// Polynomial growth order of `|L|_{a,1}` in `a` (0 for globally
    /// Lipschitz losses).
    pub fn lip_growth(&self) -> u32 {
        match self.kind {
            LossKind::LeastSquares | LossKind::SquaredHinge => 1,
            _ => 0,
        }
    }

    pub fn check_label(&self, y: f64) -> Result<()> {
        if self.y_range.contains(y) {
            Ok(())
        } else {
            Err(Error::Domain {
                y,
                domain: self.y_range.describe(),
            })
        }
    }

    /// `L(y, t)`.
    pub fn eval(&self, y: f64, t: f64) -> Result<f64> {
        self.check_label(y)?;
        Ok(self.eval_unchecked(y, t))
    }

    /// `L(y, t)` without the label-domain check.
    #[inline]
    pub fn eval_unchecked(&self, y: f64, t: f64) -> f64 {
        match self.kind {
            LossKind::Hinge => (1.0 - y * t).max(0.0),
            LossKind::SquaredHinge => {
                let m = (1.0 - y * t).max(0.0);
                m * m
            }
            LossKind::LogisticMargin => softplus(-y * t),
            LossKind::LeastSquares => (y - t) * (y - t),
            LossKind::AbsoluteDistance => (y - t).abs(),
            LossKind::EpsilonInsensitive { epsilon } => ((y - t).abs() - epsilon).max(0.0),
            LossKind::Huber { delta } => {
                let r = (y - t).abs();
                if r <= delta {
                    0.5 * r * r
                } else {
                    delta * r - 0.5 * delta * delta
                }
            }
        }
    }

    /// The subdifferential `∂_t L(y, ·)(t)` as a closed interval.
    pub fn subgradient_interval(&self, y: f64, t: f64) -> (f64, f64) {
        match self.kind {
            LossKind::Hinge => {
                let m = y * t;
                if m < 1.0 {
                    (-y, -y)
                } else if m > 1.0 {
                    (0.0, 0.0)
                } else {
                    ordered(-y, 0.0)
                }
            }
            LossKind::SquaredHinge => {
                let g = -2.0 * y * (1.0 - y * t).max(0.0);
                (g, g)
            }
            LossKind::LogisticMargin => {
                let g = -y * sigmoid(-y * t);
                (g, g)
            }
            LossKind::LeastSquares => {
                let g = 2.0 * (t - y);
                (g, g)
            }
            LossKind::AbsoluteDistance => sign_interval(t - y, 0.0),
            LossKind::EpsilonInsensitive { epsilon } => {
                let r = t - y;
                if r > epsilon {
                    (1.0, 1.0)
                } else if r < -epsilon {
                    (-1.0, -1.0)
                } else if epsilon == 0.0 {
                    (-1.0, 1.0)
                } else if r == epsilon {
                    (0.0, 1.0)
                } else if r == -epsilon {
                    (-1.0, 0.0)
                } else {
                    (0.0, 0.0)
                }
            }
            LossKind::Huber { delta } => {
                let g = (t - y).clamp(-delta, delta);
                (g, g)
            }
        }
    }

    /// `|L|_{a,1}`: the Lipschitz constant of `t ↦ L(y, t)` on `[−a, a]`,
    /// uniformly over `y ∈ Y`.
    pub fn local_lipschitz(&self, a: f64) -> Result<f64> {
        if !(a > 0.0) {
            return Err(Error::param("a", format!("must be > 0, got {a}")));
        }
        let ymax = self.y_range.max_abs();
        Ok(match self.kind {
            LossKind::Hinge | LossKind::AbsoluteDistance => 1.0,
            LossKind::SquaredHinge => 2.0 * (1.0 + a),
            // |φ'(s)| = 1/(1 + e^s) is largest at s = −a.
            LossKind::LogisticMargin => sigmoid(a),
            LossKind::LeastSquares => match self.y_range {
                LabelRange::Unbounded => f64::INFINITY,
                LabelRange::Binary => 2.0 * (a + 1.0),
                LabelRange::Interval { lo, hi } => 2.0 * (a - lo).max(a + hi),
            },
            LossKind::EpsilonInsensitive { epsilon } => {
                if a + ymax > epsilon {
                    1.0
                } else {
                    0.0
                }
            }
            LossKind::Huber { delta } => delta.min(a + ymax),
        })
    }

    /// Growth envelope of a distance-based loss.
    pub fn growth_constants(&self) -> Result<GrowthConstants> {
        let g = |p_upper, c_upper, p_lower, c_lower| GrowthConstants {
            p_upper,
            c_upper,
            p_lower,
            c_lower,
        };
        match self.kind {
            LossKind::LeastSquares => Ok(g(2.0, 1.0, 2.0, 1.0)),
            LossKind::AbsoluteDistance | LossKind::EpsilonInsensitive { .. } => Ok(g(1.0, 1.0, 1.0, 1.0)),
            // r²/2 − c|r| + c ≥ 0 needs c ≤ 2; the linear piece needs c ≤ δ or c = 2.
            LossKind::Huber { delta } => Ok(g(1.0, delta, 1.0, delta.min(2.0))),
            _ => Err(Error::Unsupported(format!(
                "growth constants for margin-based loss `{}`",
                self.name()
            ))),
        }
    }

    /// `sup_{y ∈ Y} L(y, 0)`.
    pub fn sup_at_zero(&self) -> f64 {
        let ymax = self.y_range.max_abs();
        match self.kind {
            LossKind::Hinge | LossKind::SquaredHinge => 1.0,
            LossKind::LogisticMargin => std::f64::consts::LN_2,
            _ if ymax.is_infinite() => f64::INFINITY,
            _ => self.eval_unchecked(ymax, 0.0),
        }
    }

    /// Convex conjugate `L_y*(u) = sup_t (u t − L(y, t))`; `+∞` outside its
    /// domain.
    pub fn conjugate(&self, y: f64, u: f64) -> f64 {
        const SLACK: f64 = 1e-12;
        match self.kind {
            LossKind::Hinge => {
                let w = -y * u;
                if (-SLACK..=1.0 + SLACK).contains(&w) {
                    -w.clamp(0.0, 1.0)
                } else {
                    f64::INFINITY
                }
            }
            LossKind::SquaredHinge => {
                let w = -y * u;
                if w >= -SLACK {
                    let w = w.max(0.0);
                    -w + 0.25 * w * w
                } else {
                    f64::INFINITY
                }
            }
            LossKind::LogisticMargin => {
                let w = -y * u;
                if (-SLACK..=1.0 + SLACK).contains(&w) {
                    let w = w.clamp(0.0, 1.0);
                    xlogx(w) + xlogx(1.0 - w)
                } else {
                    f64::INFINITY
                }
            }
            LossKind::LeastSquares => u * y + 0.25 * u * u,
            LossKind::AbsoluteDistance => {
                if u.abs() <= 1.0 + SLACK {
                    u * y
                } else {
                    f64::INFINITY
                }
            }
            LossKind::EpsilonInsensitive { epsilon } => {
                if u.abs() <= 1.0 + SLACK {
                    u * y + epsilon * u.abs()
                } else {
                    f64::INFINITY
                }
            }
            LossKind::Huber { delta } => {
                if u.abs() <= delta * (1.0 + SLACK) {
                    u * y + 0.5 * u * u
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Minimizes `L_y*(u) + (a/2)u² + b·u` over `u` (with `a ≥ 0`).
    ///
    /// This is the one-dimensional subproblem of dual coordinate ascent.
    pub(crate) fn conjugate_prox(&self, y: f64, a: f64, b: f64) -> f64 {
        match self.kind {
            // u = −y·w, w ∈ [0, 1]: minimize −w + (a/2)w² − b·y·w.
            LossKind::Hinge => {
                let num = 1.0 + b * y;
                let w = if a > 0.0 {
                    (num / a).clamp(0.0, 1.0)
                } else if num > 0.0 {
                    1.0
                } else {
                    0.0
                };
                -y * w
            }
            LossKind::SquaredHinge => {
                let w = ((1.0 + b * y) / (a + 0.5)).max(0.0);
                -y * w
            }
            LossKind::LogisticMargin => {
                // Stationarity in w: ln(w/(1−w)) + a·w − b·y = 0, increasing in w.
                let c = b * y;
                let w = logistic_prox(a, c);
                -y * w
            }
            LossKind::LeastSquares => -(y + b) / (a + 0.5),
            LossKind::AbsoluteDistance => {
                let s = y + b;
                if a > 0.0 {
                    (-s / a).clamp(-1.0, 1.0)
                } else {
                    -s.signum() * (s != 0.0) as u8 as f64
                }
            }
            LossKind::EpsilonInsensitive { epsilon } => {
                let s = y + b;
                let shrunk = s.signum() * (s.abs() - epsilon).max(0.0);
                if a > 0.0 {
                    (-shrunk / a).clamp(-1.0, 1.0)
                } else if shrunk != 0.0 {
                    -shrunk.signum()
                } else {
                    0.0
                }
            }
            LossKind::Huber { delta } => (-(y + b) / (a + 1.0)).clamp(-delta, delta),
        }
    }
}

fn family_of(kind: LossKind) -> LossFamily {
    match kind {
        LossKind::Hinge | LossKind::SquaredHinge | LossKind::LogisticMargin => LossFamily::MarginBased,
        _ => LossFamily::DistanceBased,
    }
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sign_interval(r: f64, at: f64) -> (f64, f64) {
    if r > at {
        (1.0, 1.0)
    } else if r < at {
        (-1.0, -1.0)
    } else {
        (-1.0, 1.0)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Root of `logit(w) + a·w − c = 0` on `(0, 1)` by safeguarded Newton.
fn logistic_prox(a: f64, c: f64) -> f64 {
    let g = |w: f64| (w / (1.0 - w)).ln() + a * w - c;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut w = sigmoid(c - 0.5 * a).clamp(1e-300, 1.0 - 1e-16);
    for _ in 0..200 {
        let gw = g(w);
        if gw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let d = 1.0 / (w * (1.0 - w)) + a;
        let mut next = w - gw / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 1e-17 + 1e-15 * w.min(1.0 - w) {
            return next;
        }
        w = next;
    }
    w
}
