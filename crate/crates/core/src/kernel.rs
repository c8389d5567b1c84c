//! Kernels, Gram matrices and finite kernel expansions in the RKHS.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// `exp(−σ²‖x − x'‖²)`.
    Gaussian { sigma: f64 },
    Linear,
    /// `(⟨x, x'⟩ + offset)^degree`.
    Polynomial { degree: u32, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub input_dim: usize,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, input_dim: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::param("input_dim", "must be positive"));
        }
        match kind {
            KernelKind::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::param("sigma", format!("must be > 0, got {sigma}")))
            }
            KernelKind::Polynomial { degree, .. } if degree == 0 => Err(Error::param("degree", "must be positive")),
            KernelKind::Polynomial { offset, .. } if !(offset >= 0.0 && offset.is_finite()) => {
                Err(Error::param("offset", format!("must be >= 0, got {offset}")))
            }
            _ => Ok(Self { kind, input_dim }),
        }
    }

    pub fn gaussian(sigma: f64, input_dim: usize) -> Result<Self> {
        Self::new(KernelKind::Gaussian { sigma }, input_dim)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::Gaussian { .. } => "gaussian",
            KernelKind::Linear => "linear",
            KernelKind::Polynomial { .. } => "polynomial",
        }
    }

    /// `k(x, x')`, checking dimensions.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        for v in [x, y] {
            if v.len() != self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim,
                    got: v.len(),
                });
            }
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Gaussian { sigma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sigma * sigma * d2).exp()
            }
            KernelKind::Linear => dot(x, y),
            KernelKind::Polynomial { degree, offset } => (dot(x, y) + offset).powi(degree as i32),
        }
    }

    /// `‖k‖∞ = sup_x √k(x, x)`, over the ball of radius `domain_bound` for
    /// kernels that are unbounded on the whole space.
    pub fn sup_norm(&self, domain_bound: Option<f64>) -> Result<f64> {
        match (self.kind, domain_bound) {
            (KernelKind::Gaussian { .. }, _) => Ok(1.0),
            (_, None) => Err(Error::UnboundedKernel),
            (_, Some(r)) if !(r >= 0.0) => Err(Error::param("domain_bound", format!("must be >= 0, got {r}"))),
            (KernelKind::Linear, Some(r)) => Ok(r),
            (KernelKind::Polynomial { degree, offset }, Some(r)) => Ok((r * r + offset).powf(0.5 * degree as f64)),
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.kind, KernelKind::Gaussian { .. })
    }

    /// Dense Gram matrix of `pts`, row-major.
    pub fn gram(&self, pts: &[Vec<f64>]) -> Result<Gram> {
        self.gram_with(pts, Execution::default())
    }

    pub fn gram_with(&self, pts: &[Vec<f64>], exec: Execution) -> Result<Gram> {
        for p in pts {
            if p.len() != self.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.input_dim,
                    got: p.len(),
                });
            }
        }
        let n = pts.len();
        let mut data = vec![0.0; n * n];
        if n > 0 {
            par::for_each_chunk_mut(exec, &mut data, n, |i, row| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = self.eval_unchecked(&pts[i], &pts[j]);
                }
            });
        }
        Ok(Gram { n, data })
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Symmetric kernel matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `cᵀ K c`.
    pub fn quadratic_form(&self, c: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| c[i] * dot(self.row(i), c))
            .sum()
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }
}

/// Hashable key for exact coordinate equality (`-0.0` and `0.0` coincide).
pub(crate) fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// Groups identical points: returns the distinct points and, for every
/// input, the index of its representative.
pub fn dedup_points(pts: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut uniq = Vec::new();
    let idx = pts
        .iter()
        .map(|p| {
            *seen.entry(point_key(p)).or_insert_with(|| {
                uniq.push(p.clone());
                uniq.len() - 1
            })
        })
        .collect();
    (uniq, idx)
}

/// `f = Σᵢ coeffs[i] · k(points[i], ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RkhsFunction {
    pub kernel: KernelSpec,
    pub points: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
}

impl RkhsFunction {
    pub fn new(kernel: KernelSpec, points: Vec<Vec<f64>>, coeffs: Vec<f64>) -> Result<Self> {
        if points.len() != coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: coeffs.len(),
            });
        }
        if let Some(p) = points.iter().find(|p| p.len() != kernel.input_dim) {
            return Err(Error::DimensionMismatch {
                expected: kernel.input_dim,
                got: p.len(),
            });
        }
        Ok(Self { kernel, points, coeffs })
    }

    pub fn zero(kernel: KernelSpec) -> Self {
        Self {
            kernel,
            points: Vec::new(),
            coeffs: Vec::new(),
        }
    }

    /// The kernel section `k(x, ·)`.
    pub fn section(kernel: KernelSpec, x: Vec<f64>) -> Result<Self> {
        Self::new(kernel, vec![x], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.coeffs)
            .map(|(p, c)| c * self.kernel.eval_unchecked(p, x))
            .sum()
    }

    pub fn eval_many(&self, xs: &[Vec<f64>], exec: Execution) -> Vec<f64> {
        par::map_slice(exec, xs, |x| self.eval(x))
    }

    /// Merges identical expansion points by summing their coefficients.
    pub fn compacted(&self) -> Self {
        let (points, idx) = dedup_points(&self.points);
        let mut coeffs = vec![0.0; points.len()];
        for (c, &i) in self.coeffs.iter().zip(&idx) {
            coeffs[i] += c;
        }
        Self {
            kernel: self.kernel,
            points,
            coeffs,
        }
    }

    /// `a·self + b·other` on the union expansion.
    pub fn linear_combination(&self, a: f64, other: &RkhsFunction, b: f64) -> Result<Self> {
        if self.kernel != other.kernel {
            return Err(Error::KernelMismatch);
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| a * c)
            .chain(other.coeffs.iter().map(|c| b * c))
            .collect();
        Ok(Self {
            kernel: self.kernel,
            points,
            coeffs,
        }
        .compacted())
    }

    /// `‖f‖_H = √(cᵀ K c)`.
    pub fn norm(&self) -> f64 {
        self.norm_with(Execution::default())
    }

    pub fn norm_with(&self, exec: Execution) -> f64 {
        let f = self.compacted();
        let rows = par::map_range(exec, f.len(), |i| {
            let pi = &f.points[i];
            f.coeffs[i]
                * f
                    .points
                    .iter()
                    .zip(&f.coeffs)
                    .map(|(pj, cj)| cj * f.kernel.eval_unchecked(pi, pj))
                    .sum::<f64>()
        });
        rows.iter().sum::<f64>().max(0.0).sqrt()
    }

    /// `⟨self, other⟩_H`.
    pub fn inner(&self, other: &RkhsFunction) -> Result<f64> {
        if self.kernel != other.kernel {
            return Err(Error::KernelMismatch);
        }
        Ok(self
            .points
            .iter()
            .zip(&self.coeffs)
            .map(|(p, c)| c * other.eval(p))
            .sum())
    }
}

/// `‖f‖_H`.
pub fn rkhs_norm(f: &RkhsFunction) -> f64 {
    f.norm()
}

/// `‖f − g‖_H`, computed on the merged expansion.
pub fn rkhs_diff_norm(f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
    Ok(f.linear_combination(1.0, g, -1.0)?.norm())
}
