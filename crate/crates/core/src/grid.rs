//! Full level-`l` simulations on the `p^l` cosets of `p^l Z_p`.
//!
//! Fields are step functions constant on the cosets. Radial convolutions are
//! applied exactly on such functions: off-diagonal cells contribute
//! `p^-l F(|x_i - x_j|_p)` and the cell containing `x_i` contributes the Haar
//! integral of `F` over `p^l Z_p`.

use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{Activation, KernelError, KernelSpec};
use crate::ode::{rk4_step, step_count};
use crate::padic::{valuation_table, PAdicParams};
use crate::par::{fill_indexed, Execution};
use crate::radial::{evaluate_series, RadialCoefficients, RadialError, RadialKernel};

/// Name of the pseudo-random generator used for random couplings and drives.
pub const RNG_NAME: &str = "ChaCha8Rng";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("field has {got} values, grid has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("random range [{lo}, {hi}] is empty or not finite")]
    BadRange { lo: f64, hi: f64 },
    #[error("state became non-finite after t = {last_time}")]
    NonFinite { last_time: f64 },
    #[error("time step must be positive and finite")]
    BadStep,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Radial(#[from] RadialError),
}

/// A complex-valued function on the level-`l` grid, one value per coset.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField(Vec<Complex64>);

impl GridField {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self(values)
    }

    pub fn zeros(params: &PAdicParams) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); params.grid_size() as usize])
    }

    pub fn constant(params: &PAdicParams, c: Complex64) -> Self {
        Self(vec![c; params.grid_size() as usize])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    /// Expands radial coefficients onto the grid (`min(valuation, M+1)` picks the component).
    pub fn from_radial(coeffs: &[Complex64], params: &PAdicParams) -> Self {
        let layout = RadialLayout::new(params);
        Self(layout.component.iter().map(|&c| coeffs[c]).collect())
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// `p^-l sum_i |f_i|`.
    pub fn l1_norm(&self, params: &PAdicParams) -> f64 {
        params.cell_measure() * self.0.iter().map(|v| v.norm()).sum::<f64>()
    }

    /// `p^-l sum_i |f_i|^2`.
    pub fn l2_norm_sq(&self, params: &PAdicParams) -> f64 {
        params.cell_measure() * self.0.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn l1_distance(&self, other: &Self, params: &PAdicParams) -> f64 {
        params.cell_measure() * self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for GridField {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for GridField {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

/// Which radial basis component each grid point belongs to.
#[derive(Debug, Clone)]
pub struct RadialLayout {
    component: Vec<usize>,
    counts: Vec<usize>,
}

impl RadialLayout {
    pub fn new(params: &PAdicParams) -> Self {
        let ball = params.depth() as usize + 1;
        let component: Vec<usize> = valuation_table(params)
            .into_iter()
            .map(|v| (v as usize).min(ball))
            .collect();
        let mut counts = vec![0; ball + 1];
        for &c in &component {
            counts[c] += 1;
        }
        Self { component, counts }
    }

    pub fn component_of(&self, index: usize) -> usize {
        self.component[index]
    }

    /// Mean of `f` over each sphere `S_-j`, `j <= M`, and over the ball.
    pub fn average(&self, f: &[Complex64]) -> RadialCoefficients {
        let mut sums = vec![Complex64::new(0.0, 0.0); self.counts.len()];
        for (v, &c) in f.iter().zip(&self.component) {
            sums[c] += v;
        }
        RadialCoefficients::new(
            sums.into_iter()
                .zip(&self.counts)
                .map(|(s, &n)| s / n as f64)
                .collect(),
        )
    }
}

/// Sphere/ball means of a grid field.
pub fn sphere_average(f: &GridField, params: &PAdicParams) -> RadialCoefficients {
    RadialLayout::new(params).average(f)
}

/// Convolution with a radial kernel on level-`l` step functions.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConvolution {
    p: u64,
    level: u32,
    /// `F(p^-k)` for `k = 0..l`.
    weights: Vec<f64>,
    /// `int_{p^l Z_p} F(|z|_p) dz`.
    self_weight: f64,
    self_weight_abs: f64,
}

impl GridConvolution {
    pub fn from_kernel(spec: &KernelSpec, params: &PAdicParams, series_depth: u32) -> Result<Self, GridError> {
        let kernel = RadialKernel::from_spec(spec, params.p())?;
        Ok(Self::from_radial_kernel(&kernel, params, series_depth))
    }

    pub fn from_radial_kernel(kernel: &RadialKernel, params: &PAdicParams, series_depth: u32) -> Self {
        let (p, level) = (params.p(), params.level());
        let q = 1.0 - 1.0 / p as f64;
        let weights: Vec<f64> = (0..level).map(|k| kernel.sample(k).re).collect();
        let depth = series_depth.max(400);
        let scale = q * params.pow_neg(level - 1);
        let self_weight = evaluate_series(kernel, level - 1, depth).value.re * scale;
        let mut abs_sum = 0.0;
        let mut w = 1.0;
        for k in 1..=depth {
            w /= p as f64;
            abs_sum += w * kernel.sample(level - 1 + k).re.abs();
        }
        Self {
            p,
            level,
            weights,
            self_weight,
            self_weight_abs: abs_sum * scale,
        }
    }

    pub fn zero(params: &PAdicParams) -> Self {
        Self {
            p: params.p(),
            level: params.level(),
            weights: vec![0.0; params.level() as usize],
            self_weight: 0.0,
            self_weight_abs: 0.0,
        }
    }

    /// Weight given to the cell containing the evaluation point.
    pub fn self_weight(&self) -> f64 {
        self.self_weight
    }

    /// `int |F(|x|_p)| dx` as seen by the grid.
    pub fn l1_norm(&self) -> f64 {
        let q = 1.0 - 1.0 / self.p as f64;
        let mut w = 1.0;
        let mut total = 0.0;
        for &v in &self.weights {
            total += q * w * v.abs();
            w /= self.p as f64;
        }
        total + self.self_weight_abs
    }

    fn size(&self) -> usize {
        (self.p as usize).pow(self.level)
    }

    /// Layered evaluation in `O(l p^l)`.
    ///
    /// With `S_k(r) = sum_{y = r mod p^k} f(y)`, the points at distance exactly
    /// `p^-k` from `x` contribute `S_k(x mod p^k) - S_{k+1}(x mod p^{k+1})`.
    pub fn apply(&self, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let n = self.size();
        assert_eq!(f.len(), n, "field size does not match the grid");
        let p = self.p as usize;
        let level = self.level as usize;
        // sums[k] has p^k entries, indexed by residue mod p^k.
        let mut sums: Vec<Vec<Complex64>> = Vec::with_capacity(level + 1);
        sums.push(f.to_vec());
        for k in (0..level).rev() {
            let finer = sums.last().expect("non-empty");
            let len = p.pow(k as u32);
            let mut coarse = vec![Complex64::new(0.0, 0.0); len];
            for (r, c) in coarse.iter_mut().enumerate() {
                for m in 0..p {
                    *c += finer[r + m * len];
                }
            }
            sums.push(coarse);
        }
        sums.reverse();
        let cell = 1.0 / n as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        fill_indexed(&mut out, exec, |x| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut modulus = 1usize;
            for k in 0..level {
                let next = modulus * p;
                let shell = sums[k][x % modulus] - sums[k + 1][x % next];
                acc += shell * self.weights[k];
                modulus = next;
            }
            acc * cell + f[x] * self.self_weight
        });
        out
    }

    /// Direct `O(p^2l)` evaluation, used to cross-check [`GridConvolution::apply`].
    pub fn apply_naive(&self, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let n = self.size();
        assert_eq!(f.len(), n, "field size does not match the grid");
        let cell = 1.0 / n as f64;
        let (p, level) = (self.p, self.level);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        fill_indexed(&mut out, exec, |x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (y, fy) in f.iter().enumerate() {
                if y != x {
                    let d = ((x + n - y) % n) as u64;
                    let v = crate::padic::valuation_unchecked(d, p, level);
                    acc += fy * self.weights[v as usize];
                }
            }
            acc * cell + f[x] * self.self_weight
        });
        out
    }
}

/// `(J * f)(x_i)` on the level-`l` grid.
pub fn convolve_grid(
    kernel: &KernelSpec,
    f: &GridField,
    params: &PAdicParams,
) -> Result<GridField, GridError> {
    check_len(f, params)?;
    let conv = GridConvolution::from_kernel(kernel, params, crate::radial::DEFAULT_SERIES_DEPTH)?;
    Ok(GridField(conv.apply(f, Execution::default())))
}

fn check_len(f: &[Complex64], params: &PAdicParams) -> Result<(), GridError> {
    let expected = params.grid_size() as usize;
    if f.len() != expected {
        return Err(GridError::SizeMismatch {
            expected,
            got: f.len(),
        });
    }
    Ok(())
}

/// A dense real coupling matrix `W[x][y]`, applied with cell measure `p^-l`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCoupling {
    n: usize,
    entries: Vec<f64>,
}

impl DenseCoupling {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, GridError> {
        if entries.len() != n * n {
            return Err(GridError::SizeMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Ok(Self { n, entries })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn apply(&self, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
        let n = self.n;
        let re: Vec<f64> = f.iter().map(|z| z.re).collect();
        let im: Vec<f64> = f.iter().map(|z| z.im).collect();
        let cell = 1.0 / n as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        fill_indexed(&mut out, exec, |x| {
            let row = &self.entries[x * n..(x + 1) * n];
            let mut a = 0.0;
            let mut b = 0.0;
            for ((w, r), i) in row.iter().zip(&re).zip(&im) {
                a += w * r;
                b += w * i;
            }
            Complex64::new(a * cell, b * cell)
        });
        out
    }

    /// `p^-l max_y sum_x |W[x][y]|`, the L1 operator norm.
    fn l1_norm(&self) -> f64 {
        let n = self.n;
        let mut cols = vec![0.0; n];
        for row in self.entries.chunks(n) {
            for (c, w) in cols.iter_mut().zip(row) {
                *c += w.abs();
            }
        }
        cols.into_iter().fold(0.0, f64::max) / n as f64
    }
}

/// The integral operator `f -> int W(x, y) f(y) dy` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Zero,
    Radial(GridConvolution),
    Dense(DenseCoupling),
}

impl Coupling {
    pub fn apply(&self, f: &[Complex64], exec: Execution) -> Vec<Complex64> {
        match self {
            Coupling::Zero => vec![Complex64::new(0.0, 0.0); f.len()],
            Coupling::Radial(c) => c.apply(f, exec),
            Coupling::Dense(d) => d.apply(f, exec),
        }
    }

    /// Operator norm on `L^1(Z_p)`; equals `||W||_1` for radial kernels.
    pub fn l1_norm(&self) -> f64 {
        match self {
            Coupling::Zero => 0.0,
            Coupling::Radial(c) => c.l1_norm(),
            Coupling::Dense(d) => d.l1_norm(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coupling::Zero)
    }
}

/// How the coupling `W` is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    #[default]
    Zero,
    /// `W(x, y) = value`.
    Constant { value: f64 },
    /// `W(x, y) = kernel(|x - y|_p)`.
    Radial { kernel: KernelSpec },
    /// Independent `U[lo, hi]` entries for every pair of grid points.
    Random { lo: f64, hi: f64 },
}

impl CouplingSpec {
    /// The radial profile, when the coupling is radial.
    pub fn radial_kernel(&self) -> Option<KernelSpec> {
        match self {
            CouplingSpec::Zero => Some(KernelSpec::Zero),
            CouplingSpec::Constant { value } => Some(KernelSpec::constant(*value)),
            CouplingSpec::Radial { kernel } => Some(kernel.clone()),
            CouplingSpec::Random { .. } => None,
        }
    }

    pub fn build(
        &self,
        params: &PAdicParams,
        series_depth: u32,
        rng: &mut ChaCha8Rng,
    ) -> Result<Coupling, GridError> {
        Ok(match self {
            CouplingSpec::Zero => Coupling::Zero,
            CouplingSpec::Random { lo, hi } => {
                check_range(*lo, *hi)?;
                let n = params.grid_size() as usize;
                let entries = (0..n * n).map(|_| sample(rng, *lo, *hi)).collect();
                Coupling::Dense(DenseCoupling::new(n, entries)?)
            }
            other => {
                let kernel = other.radial_kernel().expect("radial variant");
                Coupling::Radial(GridConvolution::from_kernel(&kernel, params, series_depth)?)
            }
        })
    }
}

/// How the external drive `Z` is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriveSpec {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `Z(x) = kernel(|x|_p)`.
    Radial { kernel: KernelSpec },
    /// Independent `U[lo, hi]` value at every grid point.
    Random { lo: f64, hi: f64 },
}

impl DriveSpec {
    pub fn radial_kernel(&self) -> Option<KernelSpec> {
        match self {
            DriveSpec::Zero => Some(KernelSpec::Zero),
            DriveSpec::Constant { value } => Some(KernelSpec::constant(*value)),
            DriveSpec::Radial { kernel } => Some(kernel.clone()),
            DriveSpec::Random { .. } => None,
        }
    }

    pub fn build(&self, params: &PAdicParams, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, GridError> {
        let n = params.grid_size() as usize;
        Ok(match self {
            DriveSpec::Random { lo, hi } => {
                check_range(*lo, *hi)?;
                (0..n).map(|_| sample(rng, *lo, *hi)).collect()
            }
            other => {
                let kernel = other.radial_kernel().expect("radial variant");
                kernel.validate()?;
                let p = params.p();
                valuation_table(params)
                    .into_iter()
                    .map(|v| {
                        if v >= params.level() {
                            kernel.value_at_zero(p)
                        } else {
                            kernel.value_at_level(p, v)
                        }
                    })
                    .collect()
            }
        })
    }
}

fn check_range(lo: f64, hi: f64) -> Result<(), GridError> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(GridError::BadRange { lo, hi });
    }
    Ok(())
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Everything the grid dynamics need besides the state.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub params: PAdicParams,
    /// Diffusion kernel `J`.
    pub conv: GridConvolution,
    pub coupling: Coupling,
    /// External drive `Z(x)`.
    pub drive: Vec<f64>,
}

impl GridOperator {
    /// Builds `J`, `W` and `Z`; random parts are drawn from one seeded stream,
    /// `W` row by row first, then `Z`.
    pub fn build(
        params: &PAdicParams,
        kernel: &KernelSpec,
        coupling: &CouplingSpec,
        drive: &DriveSpec,
        seed: u64,
        series_depth: u32,
    ) -> Result<Self, GridError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conv = GridConvolution::from_kernel(kernel, params, series_depth)?;
        let coupling = coupling.build(params, series_depth, &mut rng)?;
        let drive = drive.build(params, &mut rng)?;
        Ok(Self {
            params: *params,
            conv,
            coupling,
            drive,
        })
    }

    fn coupled(&self, f: &[Complex64], phi: Activation, exec: Execution) -> Vec<Complex64> {
        if self.coupling.is_zero() {
            return vec![Complex64::new(0.0, 0.0); f.len()];
        }
        let activated: Vec<Complex64> = f.iter().map(|z| phi.apply(*z)).collect();
        self.coupling.apply(&activated, exec)
    }
}

/// Which evolution equation the grid integrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Equation {
    /// `i v dPsi/dt = Psi - J*Psi + int W phi(Psi) + Z`.
    Qcnn,
    /// `v du/dt = J*u - u + int W phi(u) + Z`.
    Cnn,
    /// `v du/dt = -rate u + int W phi(u) + Z`.
    Decay { rate: f64 },
}

/// Right-hand side of the selected equation (already divided by the speed).
pub fn grid_rhs(
    op: &GridOperator,
    equation: Equation,
    phi: Activation,
    speed: f64,
    state: &[Complex64],
    exec: Execution,
) -> Vec<Complex64> {
    let coupled = op.coupled(state, phi, exec);
    let inv = 1.0 / speed;
    match equation {
        Equation::Qcnn => {
            let conv = op.conv.apply(state, exec);
            let minus_i = Complex64::new(0.0, -inv);
            (0..state.len())
                .map(|x| (state[x] - conv[x] + coupled[x] + op.drive[x]) * minus_i)
                .collect()
        }
        Equation::Cnn => {
            let conv = op.conv.apply(state, exec);
            (0..state.len())
                .map(|x| (conv[x] - state[x] + coupled[x] + op.drive[x]) * inv)
                .collect()
        }
        Equation::Decay { rate } => (0..state.len())
            .map(|x| (coupled[x] - state[x] * rate + op.drive[x]) * inv)
            .collect(),
    }
}

/// One RK4 step of the quantum network.
pub fn step_qcnn(
    op: &GridOperator,
    psi: &GridField,
    dt: f64,
    phi: Activation,
    speed: f64,
) -> Result<GridField, GridError> {
    step(op, Equation::Qcnn, psi, dt, phi, speed, Execution::default())
}

/// One RK4 step of the classical network (`Cnn` or `Decay` form).
pub fn step_cnn(
    op: &GridOperator,
    u: &GridField,
    dt: f64,
    phi: Activation,
    equation: Equation,
    speed: f64,
) -> Result<GridField, GridError> {
    step(op, equation, u, dt, phi, speed, Execution::default())
}

pub fn step(
    op: &GridOperator,
    equation: Equation,
    state: &GridField,
    dt: f64,
    phi: Activation,
    speed: f64,
    exec: Execution,
) -> Result<GridField, GridError> {
    check_len(state, &op.params)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GridError::BadStep);
    }
    let next = rk4_step(state, dt, |y| grid_rhs(op, equation, phi, speed, y, exec));
    let next = GridField(next);
    if !next.is_finite() {
        return Err(GridError::NonFinite { last_time: 0.0 });
    }
    Ok(next)
}

/// Sphere-averaged record of a grid run.
#[derive(Debug, Clone)]
pub struct GridTrajectory {
    pub times: Vec<f64>,
    pub averages: Vec<RadialCoefficients>,
    pub final_state: GridField,
}

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub equation: Equation,
    pub activation: Activation,
    pub speed: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Record every `record_every`-th step (1 = every step).
    pub record_every: usize,
    pub exec: Execution,
}

#[derive(Debug, Error)]
#[error("simulation diverged after t = {last_time}")]
pub struct Divergence {
    pub last_time: f64,
    pub partial: Box<GridTrajectory>,
}

/// Integrates from `init` over `[0, t_end]`, recording sphere averages.
pub fn simulate(
    op: &GridOperator,
    init: GridField,
    opts: &SimulationOptions,
) -> Result<GridTrajectory, SimulationError> {
    check_len(&init, &op.params)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(GridError::BadStep.into());
    }
    let layout = RadialLayout::new(&op.params);
    let steps = step_count(opts.t_end, opts.dt);
    let every = opts.record_every.max(1);
    let mut times = vec![0.0];
    let mut averages = vec![layout.average(&init)];
    let mut state = init;
    for n in 1..=steps {
        let next = rk4_step(&state, opts.dt, |y| {
            grid_rhs(op, opts.equation, opts.activation, opts.speed, y, opts.exec)
        });
        let next = GridField(next);
        if !next.is_finite() {
            let last_time = (n - 1) as f64 * opts.dt;
            return Err(SimulationError::Diverged(Divergence {
                last_time,
                partial: Box::new(GridTrajectory {
                    times,
                    averages,
                    final_state: state,
                }),
            }));
        }
        state = next;
        if n % every == 0 || n == steps {
            times.push(n as f64 * opts.dt);
            averages.push(layout.average(&state));
        }
    }
    Ok(GridTrajectory {
        times,
        averages,
        final_state: state,
    })
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Diverged(Divergence),
}
