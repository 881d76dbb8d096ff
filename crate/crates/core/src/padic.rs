//! p-adic integers truncated at level `l`.
//!
//! A grid index `i` in `[0, p^l)` stands for the coset
//! `a_0 + a_1 p + ... + a_{l-1} p^{l-1} + p^l Z_p`, where the `a_k` are the
//! base-`p` digits of `i`. Norms and Haar measures are kept as exact rationals;
//! callers convert to `f64` at the numerics boundary.

use num_rational::Ratio;
use thiserror::Error;

/// Exact rational used for norms and measures.
pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PadicError {
    #[error("p = {0} is not a prime")]
    NotPrime(u64),
    #[error("truncation level must be at least 1")]
    ZeroLevel,
    #[error("radial depth M = {m} must satisfy M <= l - 1 = {}", .l - 1)]
    DepthTooLarge { m: u32, l: u32 },
    #[error("p^l overflows the index type (p = {p}, l = {l})")]
    GridTooLarge { p: u64, l: u32 },
    #[error("grid index {index} outside [0, {size})")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("sphere level {j} outside [0, {m}]")]
    LevelOutOfRange { j: u32, m: u32 },
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Prime, truncation level and radial resolution shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PAdicParams {
    p: u64,
    level: u32,
    depth: u32,
    size: u64,
}

impl PAdicParams {
    /// `p` prime, `level >= 1`, `depth <= level - 1`.
    pub fn new(p: u64, level: u32, depth: u32) -> Result<Self, PadicError> {
        if !is_prime(p) {
            return Err(PadicError::NotPrime(p));
        }
        if level == 0 {
            return Err(PadicError::ZeroLevel);
        }
        if depth + 1 > level {
            return Err(PadicError::DepthTooLarge { m: depth, l: level });
        }
        // Keep p^(l+1) representable so measures like (p-1)/p^(l) stay exact.
        let size = p
            .checked_pow(level)
            .filter(|s| s.checked_mul(p).is_some())
            .ok_or(PadicError::GridTooLarge { p, l: level })?;
        Ok(Self {
            p,
            level,
            depth,
            size,
        })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Truncation level `l`.
    pub fn level(&self) -> u32 {
        self.level
    }

    /// Radial resolution `M`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of grid cells, `p^l`.
    pub fn grid_size(&self) -> u64 {
        self.size
    }

    /// Haar measure of one grid cell, `p^-l`.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.size as f64
    }

    /// Dimension of the radial space: `M + 2`.
    pub fn radial_dim(&self) -> usize {
        self.depth as usize + 2
    }

    /// Same prime and level with a different radial depth.
    pub fn with_depth(&self, depth: u32) -> Result<Self, PadicError> {
        Self::new(self.p, self.level, depth)
    }

    fn check_index(&self, index: u64) -> Result<(), PadicError> {
        if index >= self.size {
            return Err(PadicError::IndexOutOfRange {
                index,
                size: self.size,
            });
        }
        Ok(())
    }

    /// `a - b mod p^l`.
    pub fn sub_mod(&self, a: u64, b: u64) -> u64 {
        (a + self.size - b) % self.size
    }

    /// `p^-k` as a float.
    pub fn pow_neg(&self, k: u32) -> f64 {
        (self.p as f64).powi(-(k as i32))
    }
}

/// A coset of `p^l Z_p` identified by its canonical representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPoint(u64);

impl GridPoint {
    pub fn new(index: u64, params: &PAdicParams) -> Result<Self, PadicError> {
        params.check_index(index)?;
        Ok(Self(index))
    }

    /// Coset with the given base-`p` digits `a_0, a_1, ...` (missing digits are zero).
    pub fn from_digits(digits: &[u64], params: &PAdicParams) -> Result<Self, PadicError> {
        let mut index = 0u64;
        for &d in digits.iter().rev() {
            index = index * params.p + d;
        }
        Self::new(index, params)
    }

    pub fn index(&self) -> u64 {
        self.0
    }

    /// The `l` digits `a_0..a_{l-1}` of the expansion.
    pub fn digits(&self, params: &PAdicParams) -> Vec<u64> {
        let mut rest = self.0;
        (0..params.level)
            .map(|_| {
                let d = rest % params.p;
                rest /= params.p;
                d
            })
            .collect()
    }
}

/// Largest `k <= l` with `p^k | i`; the zero coset has valuation `l`.
pub fn valuation(index: u64, params: &PAdicParams) -> Result<u32, PadicError> {
    params.check_index(index)?;
    Ok(valuation_unchecked(index, params.p, params.level))
}

pub(crate) fn valuation_unchecked(mut index: u64, p: u64, level: u32) -> u32 {
    if index == 0 {
        return level;
    }
    let mut v = 0;
    while index.is_multiple_of(p) {
        index /= p;
        v += 1;
    }
    v
}

/// `|i|_p = p^-valuation(i)`.
pub fn norm(index: u64, params: &PAdicParams) -> Result<Rational, PadicError> {
    let v = valuation(index, params)?;
    Ok(Rational::new(1, params.p.pow(v)))
}

/// Haar measure of the sphere `S_-j = p^j Z_p^x`, namely `p^-j (1 - p^-1)`.
pub fn sphere_measure(j: u32, params: &PAdicParams) -> Result<Rational, PadicError> {
    if j > params.depth {
        return Err(PadicError::LevelOutOfRange {
            j,
            m: params.depth,
        });
    }
    Ok(Rational::new(params.p - 1, params.p.pow(j + 1)))
}

/// Haar measure of the ball `p^(M+1) Z_p`.
pub fn ball_measure(params: &PAdicParams) -> Rational {
    Rational::new(1, params.p.pow(params.depth + 1))
}

/// Measures of the radial basis `1_{S_0}, ..., 1_{S_-M}, ball` as floats.
pub fn basis_measures(params: &PAdicParams) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=params.depth)
        .map(|j| ratio_to_f64(sphere_measure(j, params).expect("j <= M")))
        .collect();
    out.push(ratio_to_f64(ball_measure(params)));
    out
}

pub fn ratio_to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Valuation of every grid index, in index order.
pub fn valuation_table(params: &PAdicParams) -> Vec<u32> {
    (0..params.size)
        .map(|i| valuation_unchecked(i, params.p, params.level))
        .collect()
}
