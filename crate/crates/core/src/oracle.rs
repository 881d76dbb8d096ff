//! Brute-force reference computations.
//!
//! Everything here is deliberately naive: convolutions are summed cell by cell
//! over the whole level-`l` grid and linear systems are solved by Gaussian
//! elimination. Nothing in this module calls into the radial calculus, the grid
//! operators or the solvers it is used to check.

use num_complex::Complex64;
use thiserror::Error;

use crate::kernels::KernelSpec;
use crate::padic::PAdicParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("sphere S_-{j} is not a basis element for M = {m}")]
    BadTarget { j: u32, m: u32 },
    #[error("matrix is {rows} entries, expected {n}x{n}")]
    DimensionMismatch { rows: usize, n: usize },
    #[error("matrix is singular to working precision")]
    Singular,
}

/// Basis element of `R_M(Z_p)` targeted by a quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTarget {
    Sphere(u32),
    Ball,
}

impl BasisTarget {
    /// Target for column `j` of an `(M+2)`-dimensional matrix.
    pub fn from_column(j: usize, depth: u32) -> Self {
        if j as u32 > depth {
            BasisTarget::Ball
        } else {
            BasisTarget::Sphere(j as u32)
        }
    }
}

fn ord(mut n: u64, p: u64, level: u32) -> u32 {
    if n == 0 {
        return level;
    }
    let mut v = 0;
    while n.is_multiple_of(p) {
        n /= p;
        v += 1;
    }
    v
}

/// `int_{p^l Z_p} F(|z|_p) dz`, refining the cell into its `p` children until
/// what is left is negligible.
fn cell_integral(f: &KernelSpec, p: u64, level: u32) -> f64 {
    let pf = p as f64;
    let mut total = 0.0;
    let mut n = level;
    let mut cell = pf.powi(-(level as i32));
    loop {
        let child = cell / pf;
        let value = f.value_at_level(p, n);
        // The p - 1 children that do not contain 0 sit at distance exactly p^-n.
        total += (pf - 1.0) * child * value;
        cell = child;
        n += 1;
        let rest = cell * f.value_at_level(p, n).abs();
        if (rest < 1e-22 && n > level + 8) || n > level + 4000 {
            return total + cell * f.value_at_level(p, n);
        }
    }
}

/// `int_{Z_p} F(|x - y|_p) basis(y) dy` at the grid point `x`.
pub fn quad_convolve_at(
    f: &KernelSpec,
    target: BasisTarget,
    x: u64,
    params: &PAdicParams,
) -> Result<Complex64, OracleError> {
    let (p, level, m) = (params.p(), params.level(), params.depth());
    if let BasisTarget::Sphere(j) = target {
        if j > m {
            return Err(OracleError::BadTarget { j, m });
        }
    }
    let size = params.grid_size();
    let cell = params.cell_measure();
    let samples: Vec<f64> = (0..level).map(|k| f.value_at_level(p, k)).collect();
    let in_basis = |y: u64| {
        let v = ord(y, p, level);
        match target {
            BasisTarget::Sphere(j) => v == j,
            BasisTarget::Ball => v > m,
        }
    };
    let mut total = 0.0;
    for y in 0..size {
        if y == x || !in_basis(y) {
            continue;
        }
        let d = (x + size - y) % size;
        total += cell * samples[ord(d, p, level) as usize];
    }
    if in_basis(x) {
        total += cell_integral(f, p, level);
    }
    Ok(Complex64::new(total, 0.0))
}

/// Same as [`quad_convolve_at`] with the representative `p^v` of valuation `v`
/// (or `0` when `v >= l`).
pub fn quad_convolve_indicator(
    f: &KernelSpec,
    target: BasisTarget,
    x_valuation: u32,
    params: &PAdicParams,
) -> Result<Complex64, OracleError> {
    let x = if x_valuation >= params.level() {
        0
    } else {
        params.p().pow(x_valuation)
    };
    quad_convolve_at(f, target, x, params)
}

/// Full `(M+2) x (M+2)` matrix by quadrature; row `k` uses a point of valuation `k`.
pub fn quad_matrix(f: &KernelSpec, params: &PAdicParams) -> Vec<Vec<Complex64>> {
    let dim = params.radial_dim();
    (0..dim)
        .map(|row| {
            (0..dim)
                .map(|col| {
                    let target = BasisTarget::from_column(col, params.depth());
                    quad_convolve_indicator(f, target, row as u32, params).expect("valid target")
                })
                .collect()
        })
        .collect()
}

/// Solves `A x = b` (row-major `A`) by Gaussian elimination with partial pivoting.
pub fn dense_linear_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    if a.len() != n * n {
        return Err(OracleError::DimensionMismatch { rows: a.len(), n });
    }
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .expect("non-empty range");
        if m[pivot * n + col].abs() <= scale * 1e-14 {
            return Err(OracleError::Singular);
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let factor = m[row * n + col] / d;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Ok(x)
}

/// The grid matrix `G[i][j] = int_{cell j} F(|x_i - y|_p) dy` of convolution
/// with `F` on level-`l` step functions, assembled entry by entry.
pub fn dense_convolution_matrix(f: &KernelSpec, params: &PAdicParams) -> Vec<f64> {
    let (p, level) = (params.p(), params.level());
    let size = params.grid_size();
    let n = size as usize;
    let cell = params.cell_measure();
    let diag = cell_integral(f, p, level);
    let mut g = vec![0.0; n * n];
    for i in 0..size {
        for j in 0..size {
            g[i as usize * n + j as usize] = if i == j {
                diag
            } else {
                cell * f.value_at_level(p, ord((i + size - j) % size, p, level))
            };
        }
    }
    g
}
