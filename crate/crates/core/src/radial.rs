//! Radial functions on `Z_p` and the convolution matrices acting on them.
//!
//! `R_M(Z_p)` is spanned by the sphere indicators `1_{S_0}, ..., 1_{S_-M}` and
//! the indicator of the ball `p^(M+1) Z_p`. Convolution with a radial kernel
//! `F(|x|_p)` maps this space into itself; [`build_matrix`] produces the
//! `(M+2) x (M+2)` matrix of that map in the sphere/ball basis.
//!
//! Entries, with `mu_j = (1 - 1/p) p^-j` the sphere measures and rows indexed
//! by where `x` lives:
//!
//! | row `k`, column `j`        | entry                                                        |
//! |----------------------------|--------------------------------------------------------------|
//! | `k < j <= M`               | `mu_j F(p^-k)`                                               |
//! | `j < k <= M+1`             | `mu_j F(p^-j)`                                               |
//! | `k = j <= M`               | `p^-j [(1 - 2/p) F(p^-j) + (1 - 1/p) sum_{n>=1} p^-n F(p^-j-n)]` |
//! | `k <= M`, ball column      | `p^-(M+1) F(p^-k)`                                           |
//! | ball row, ball column      | `(1 - 1/p) sum_{n>=M+1} p^-n F(p^-n)`                        |
//!
//! Infinite series are truncated after `K` terms; every truncated entry
//! carries a rigorous bound on the discarded tail.

use std::io::{self, Write};
use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use thiserror::Error;

use crate::kernels::{GeometricTail, KernelError, KernelSpec};
use crate::output::fmt_float;
use crate::padic::{basis_measures, PAdicParams};

/// Default number of series terms kept when building matrices.
pub const DEFAULT_SERIES_DEPTH: u32 = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("convolution matrices need M >= 1")]
    DepthTooSmall,
    #[error("series truncation depth must be at least 1")]
    ZeroTruncation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tail {
    /// Repeat the last explicit sample.
    Hold,
    Geometric(GeometricTail),
}

/// A radial kernel given by samples `F(p^-k)`, `k = 0..=K_max`, plus a rule for deeper levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialKernel {
    p: u64,
    values: Vec<Complex64>,
    tail: Tail,
}

/// Truncated series value with a bound on the discarded tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub tail_bound: f64,
}

impl RadialKernel {
    /// Explicit samples; levels past the last sample repeat it.
    pub fn from_samples(p: u64, values: Vec<Complex64>) -> Result<Self, RadialError> {
        if values.is_empty() {
            return Err(KernelError::EmptyTable.into());
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFinite.into());
        }
        Ok(Self {
            p,
            values,
            tail: Tail::Hold,
        })
    }

    /// Samples a kernel profile, keeping its closed-form tail when it has one.
    pub fn from_spec(spec: &KernelSpec, p: u64) -> Result<Self, RadialError> {
        spec.validate()?;
        let explicit = match spec {
            KernelSpec::Table { values } => values.len() - 1,
            _ => table_len(spec).unwrap_or(0),
        };
        let values = (0..=explicit as u32)
            .map(|k| Complex64::new(spec.value_at_level(p, k), 0.0))
            .collect();
        let tail = match spec.tail(p, explicit as u32) {
            Some(t) => Tail::Geometric(t),
            None => Tail::Hold,
        };
        Ok(Self { p, values, tail })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Deepest explicitly sampled level.
    pub fn max_sampled_level(&self) -> u32 {
        self.values.len() as u32 - 1
    }

    /// `F(p^-k)`.
    pub fn sample(&self, k: u32) -> Complex64 {
        if let Some(v) = self.values.get(k as usize) {
            return *v;
        }
        match self.tail {
            Tail::Hold => *self.values.last().expect("non-empty"),
            Tail::Geometric(t) => Complex64::new(t.scale * t.ratio.powi(k as i32) + t.offset, 0.0),
        }
    }

    /// Bound on `sum_{n > K} p^-n |F(p^-(j+n))|`.
    fn tail_bound(&self, j: u32, depth: u32) -> f64 {
        let pf = self.p as f64;
        let first = j + depth + 1;
        let sampled_sup = self
            .values
            .iter()
            .skip(first as usize)
            .fold(0.0f64, |m, v| m.max(v.norm()));
        let geometric = pf.powi(-(depth as i32)) / (pf - 1.0);
        match self.tail {
            Tail::Hold => {
                let last = self.values.last().expect("non-empty").norm();
                sampled_sup.max(last) * geometric
            }
            Tail::Geometric(t) => {
                let mut bound = sampled_sup * geometric + t.offset.abs() * geometric;
                if t.scale != 0.0 {
                    let q = t.ratio / pf;
                    if q >= 1.0 {
                        return f64::INFINITY;
                    }
                    // sum_{n > K} p^-n |s| r^(j+n) = |s| r^j q^(K+1) / (1 - q)
                    bound += t.scale.abs() * t.ratio.powi(j as i32) * q.powi(depth as i32 + 1) / (1.0 - q);
                }
                bound
            }
        }
    }

    /// `int_{Z_p} F(|x|_p) dx = (1 - 1/p) sum_{k>=0} p^-k F(p^-k)`, truncated after `K + 1` terms.
    pub fn integral(&self, depth: u32) -> SeriesValue {
        let w = 1.0 - 1.0 / self.p as f64;
        let s = evaluate_series(self, 0, depth);
        SeriesValue {
            value: (self.sample(0) + s.value) * w,
            tail_bound: s.tail_bound * w,
        }
    }

    /// `int_{Z_p} |F(|x|_p)| dx`.
    pub fn l1_norm(&self, depth: u32) -> f64 {
        let pf = self.p as f64;
        let w = 1.0 - 1.0 / pf;
        let mut total = self.sample(0).norm();
        let mut weight = 1.0;
        for k in 1..=depth {
            weight /= pf;
            total += weight * self.sample(k).norm();
        }
        w * total
    }

    /// `sup_k |F(p^-k)|` over sampled levels and the tail.
    pub fn sup_norm(&self) -> f64 {
        let sampled = self.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        match self.tail {
            Tail::Hold => sampled,
            Tail::Geometric(t) if t.scale == 0.0 || t.ratio <= 1.0 => {
                sampled.max((t.scale + t.offset).abs()).max(t.offset.abs())
            }
            Tail::Geometric(_) => f64::INFINITY,
        }
    }
}

fn table_len(spec: &KernelSpec) -> Option<usize> {
    match spec {
        KernelSpec::Table { values } => Some(values.len() - 1),
        KernelSpec::Scaled { kernel, .. } => table_len(kernel),
        _ => None,
    }
}

/// `sum_{k=1}^{K} p^-k F(p^-(j+k))` with a bound on the discarded tail.
pub fn evaluate_series(kernel: &RadialKernel, j: u32, depth: u32) -> SeriesValue {
    let pf = kernel.p as f64;
    let mut weight = 1.0;
    let mut value = Complex64::new(0.0, 0.0);
    for k in 1..=depth {
        weight /= pf;
        value += kernel.sample(j + k) * weight;
    }
    SeriesValue {
        value,
        tail_bound: kernel.tail_bound(j, depth),
    }
}

/// Coefficients `(c_0, ..., c_M, c_ball)` of an element of `R_M(Z_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCoefficients(Vec<Complex64>);

impl RadialCoefficients {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        Self(coeffs)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); dim])
    }

    pub fn ones(dim: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn unit(dim: usize, j: usize) -> Self {
        let mut c = Self::zeros(dim);
        c.0[j] = Complex64::new(1.0, 0.0);
        c
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Profile values at every basis element: `f(p^-j)` on spheres, `f(0)` on the ball.
    pub fn from_kernel(spec: &KernelSpec, params: &PAdicParams) -> Self {
        let p = params.p();
        let mut c: Vec<Complex64> = (0..=params.depth())
            .map(|j| Complex64::new(spec.value_at_level(p, j), 0.0))
            .collect();
        c.push(Complex64::new(spec.value_at_zero(p), 0.0));
        Self(c)
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `sum_j mu_j |c_j|^2` with Haar weights of the basis supports.
    pub fn weighted_norm_sq(&self, params: &PAdicParams) -> f64 {
        basis_measures(params)
            .iter()
            .zip(&self.0)
            .map(|(m, c)| m * c.norm_sqr())
            .sum()
    }

    /// `sum_j |c_j|`, the total amplitude across basis components.
    pub fn total_amplitude(&self) -> f64 {
        self.0.iter().map(|c| c.norm()).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Deref for RadialCoefficients {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for RadialCoefficients {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

/// `(f(p^0), ..., f(p^-M), f(0))` for a function of the norm.
pub fn project_radial<F>(f: F, params: &PAdicParams) -> RadialCoefficients
where
    F: Fn(f64) -> Complex64,
{
    let mut c: Vec<Complex64> = (0..=params.depth()).map(|j| f(params.pow_neg(j))).collect();
    c.push(f(0.0));
    RadialCoefficients(c)
}

/// The matrix of `g -> F * g` on `R_M(Z_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionMatrix {
    dim: usize,
    p: u64,
    depth: u32,
    entries: Vec<Complex64>,
    tails: Vec<f64>,
    truncation_error_bound: f64,
}

impl ConvolutionMatrix {
    pub fn zeros(params: &PAdicParams) -> Self {
        let dim = params.radial_dim();
        Self {
            dim,
            p: params.p(),
            depth: params.depth(),
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
            tails: vec![0.0; dim * dim],
            truncation_error_bound: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    /// Bound on the series truncation error of entry `(i, j)`.
    pub fn entry_tail_bound(&self, i: usize, j: usize) -> f64 {
        self.tails[i * self.dim + j]
    }

    pub fn truncation_error_bound(&self) -> f64 {
        self.truncation_error_bound
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn max_row_sum(&self) -> f64 {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Infinity norm of `I - A`.
    pub fn identity_minus_norm(&self) -> f64 {
        self.entries
            .chunks(self.dim)
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let id = if i == j { 1.0 } else { 0.0 };
                        (Complex64::new(id, 0.0) - v).norm()
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, c: &[Complex64]) -> Result<RadialCoefficients, RadialError> {
        if c.len() != self.dim {
            return Err(RadialError::DimensionMismatch {
                expected: self.dim,
                got: c.len(),
            });
        }
        Ok(RadialCoefficients(self.apply_unchecked(c)))
    }

    pub(crate) fn apply_unchecked(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.entries
            .chunks(self.dim)
            .map(|row| row.iter().zip(c).map(|(a, x)| a * x).sum())
            .collect()
    }

    /// Row-major dump with header `i,j,re,im,tail_bound`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "i,j,re,im,tail_bound")?;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let a = self.get(i, j);
                writeln!(
                    w,
                    "{i},{j},{},{},{}",
                    fmt_float(a.re),
                    fmt_float(a.im),
                    fmt_float(self.entry_tail_bound(i, j))
                )?;
            }
        }
        Ok(())
    }
}

/// Builds the convolution matrix of `F` on `R_M(Z_p)` keeping `K` series terms.
pub fn build_matrix(
    kernel: &RadialKernel,
    params: &PAdicParams,
    depth: u32,
) -> Result<ConvolutionMatrix, RadialError> {
    let m = params.depth();
    if m < 1 {
        return Err(RadialError::DepthTooSmall);
    }
    if depth < 1 {
        return Err(RadialError::ZeroTruncation);
    }
    let p = params.p() as f64;
    let q = 1.0 - 1.0 / p;
    let mut a = ConvolutionMatrix::zeros(params);
    let ball = a.dim - 1;
    let pow = |k: u32| params.pow_neg(k);
    let set = |a: &mut ConvolutionMatrix, i: usize, j: usize, v: Complex64, tail: f64| {
        a.entries[i * a.dim + j] = v;
        a.tails[i * a.dim + j] = tail;
    };

    for j in 0..=m {
        let mu = q * pow(j);
        let jj = j as usize;
        for k in 0..=m {
            let kk = k as usize;
            if k < j {
                set(&mut a, kk, jj, kernel.sample(k) * mu, 0.0);
            } else if k > j {
                set(&mut a, kk, jj, kernel.sample(j) * mu, 0.0);
            } else {
                let s = evaluate_series(kernel, j, depth);
                let v = (kernel.sample(j) * (1.0 - 2.0 / p) + s.value * q) * pow(j);
                set(&mut a, kk, jj, v, s.tail_bound * q * pow(j));
            }
        }
        set(&mut a, ball, jj, kernel.sample(j) * mu, 0.0);
        set(&mut a, jj, ball, kernel.sample(j) * pow(m + 1), 0.0);
    }
    // int_{p^(M+1) Z_p} F = (1 - 1/p) p^-M sum_{n>=1} p^-n F(p^-(M+n))
    let s = evaluate_series(kernel, m, depth);
    set(&mut a, ball, ball, s.value * (q * pow(m)), s.tail_bound * q * pow(m));

    a.truncation_error_bound = a.tails.iter().fold(0.0, |x: f64, &t| x.max(t));
    Ok(a)
}

/// `A c`, the coefficients of `F * (sum_j c_j basis_j)`.
pub fn apply_matrix(
    a: &ConvolutionMatrix,
    c: &RadialCoefficients,
) -> Result<RadialCoefficients, RadialError> {
    a.apply(c)
}
