//! The `(M+2)`-dimensional pseudo-traveling-wave system
//! `i v rho'(s) = (I - A_J) rho + A_W phi(rho) + beta`.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{CouplingSpec, DriveSpec};
use crate::kernels::{Activation, KernelSpec};
use crate::ode::{rk4_step, step_count};
use crate::padic::{valuation, GridPoint, PAdicParams, PadicError};
use crate::radial::{build_matrix, ConvolutionMatrix, RadialCoefficients, RadialError, RadialKernel};

#[derive(Debug, Error)]
pub enum WaveError {
    #[error("speed must be positive and finite, got {0}")]
    BadSpeed(f64),
    #[error("time step must be positive and finite")]
    BadStep,
    #[error("{0} is not radial; use the grid simulator")]
    NotRadial(&'static str),
    #[error("state has {got} components, system has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("time {t} is outside the trajectory")]
    TimeOutOfRange { t: f64 },
    #[error("state became non-finite after s = {last_time}")]
    NonFinite {
        last_time: f64,
        trajectory: Box<WaveTrajectory>,
    },
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    Padic(#[from] PadicError),
}

#[derive(Debug, Clone)]
pub struct WaveSystem {
    pub params: PAdicParams,
    pub a_j: ConvolutionMatrix,
    /// `None` when `W = 0`.
    pub a_w: Option<ConvolutionMatrix>,
    pub beta: RadialCoefficients,
    pub activation: Activation,
    pub speed: f64,
}

impl WaveSystem {
    pub fn new(
        params: &PAdicParams,
        a_j: ConvolutionMatrix,
        a_w: Option<ConvolutionMatrix>,
        beta: RadialCoefficients,
        activation: Activation,
        speed: f64,
    ) -> Result<Self, WaveError> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(WaveError::BadSpeed(speed));
        }
        let dim = params.radial_dim();
        for got in [a_j.dim(), beta.len()]
            .into_iter()
            .chain(a_w.as_ref().map(|a| a.dim()))
        {
            if got != dim {
                return Err(WaveError::DimensionMismatch { expected: dim, got });
            }
        }
        Ok(Self {
            params: *params,
            a_j,
            a_w,
            beta,
            activation,
            speed,
        })
    }

    /// Builds the matrices from kernel descriptions; `W` and `Z` must be radial.
    pub fn from_specs(
        params: &PAdicParams,
        j: &KernelSpec,
        w: &CouplingSpec,
        z: &DriveSpec,
        activation: Activation,
        speed: f64,
        series_depth: u32,
    ) -> Result<Self, WaveError> {
        let p = params.p();
        let a_j = build_matrix(&RadialKernel::from_spec(j, p)?, params, series_depth)?;
        let a_w = match w.radial_kernel().ok_or(WaveError::NotRadial("W"))? {
            KernelSpec::Zero => None,
            k => Some(build_matrix(&RadialKernel::from_spec(&k, p)?, params, series_depth)?),
        };
        let z = z.radial_kernel().ok_or(WaveError::NotRadial("Z"))?;
        let beta = RadialCoefficients::from_kernel(&z, params);
        Self::new(params, a_j, a_w, beta, activation, speed)
    }

    pub fn dim(&self) -> usize {
        self.params.radial_dim()
    }

    /// `H(rho) = (I - A_J) rho + A_W phi(rho) + beta`.
    pub fn rhs(&self, rho: &[Complex64]) -> Result<RadialCoefficients, WaveError> {
        if rho.len() != self.dim() {
            return Err(WaveError::DimensionMismatch {
                expected: self.dim(),
                got: rho.len(),
            });
        }
        Ok(RadialCoefficients::new(self.h(rho)))
    }

    fn h(&self, rho: &[Complex64]) -> Vec<Complex64> {
        let conv = self.a_j.apply_unchecked(rho);
        let mut out: Vec<Complex64> = rho
            .iter()
            .zip(&conv)
            .zip(self.beta.iter())
            .map(|((r, c), b)| r - c + b)
            .collect();
        if let Some(a_w) = &self.a_w {
            let activated: Vec<Complex64> = rho.iter().map(|r| self.activation.apply(*r)).collect();
            for (o, v) in out.iter_mut().zip(a_w.apply_unchecked(&activated)) {
                *o += v;
            }
        }
        out
    }

    /// `L_H = ||I - A_J|| + L_phi ||A_W||` in the maximum-row-sum norm.
    pub fn lipschitz(&self) -> f64 {
        let w = self.a_w.as_ref().map_or(0.0, |a| a.max_row_sum());
        self.a_j.identity_minus_norm() + self.activation.lipschitz() * w
    }

    /// Whether `L_H` lies in `(0, v)`, the range where existence and uniqueness are guaranteed.
    pub fn lipschitz_ok(&self) -> bool {
        let l = self.lipschitz();
        l > 0.0 && l < self.speed
    }

    /// `d rho / ds = -i H(rho) / v`.
    fn derivative(&self, rho: &[Complex64]) -> Vec<Complex64> {
        let factor = Complex64::new(0.0, -1.0 / self.speed);
        self.h(rho).into_iter().map(|v| v * factor).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveTrajectory {
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<RadialCoefficients>,
    pub speed: f64,
    /// Argument offsets `p^-j` of each sphere component (0 for the ball).
    pub offsets: Vec<f64>,
}

impl WaveTrajectory {
    pub fn final_state(&self) -> &RadialCoefficients {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// State at the recorded time closest to `t`.
    pub fn state_at(&self, t: f64) -> Result<&RadialCoefficients, WaveError> {
        let (first, last) = (self.times[0], *self.times.last().expect("non-empty"));
        let slack = 1e-9 * last.abs().max(1.0);
        if !(t >= first - slack && t <= last + slack) {
            return Err(WaveError::TimeOutOfRange { t });
        }
        let idx = self
            .times
            .partition_point(|&s| s < t)
            .min(self.times.len() - 1);
        let idx = if idx > 0 && (t - self.times[idx - 1]).abs() <= (self.times[idx] - t).abs() {
            idx - 1
        } else {
            idx
        };
        Ok(&self.states[idx])
    }
}

/// RK4 over `s in [0, t_end]`, recording every step.
pub fn integrate(
    sys: &WaveSystem,
    rho0: &RadialCoefficients,
    t_end: f64,
    dt: f64,
) -> Result<WaveTrajectory, WaveError> {
    if !(dt > 0.0 && dt.is_finite()) || !t_end.is_finite() {
        return Err(WaveError::BadStep);
    }
    if rho0.len() != sys.dim() {
        return Err(WaveError::DimensionMismatch {
            expected: sys.dim(),
            got: rho0.len(),
        });
    }
    let params = &sys.params;
    let mut offsets: Vec<f64> = (0..=params.depth()).map(|j| params.pow_neg(j)).collect();
    offsets.push(0.0);
    let steps = step_count(t_end, dt);
    let mut traj = WaveTrajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        speed: sys.speed,
        offsets,
    };
    traj.times.push(0.0);
    traj.states.push(rho0.clone());
    let mut rho = rho0.to_vec();
    for n in 1..=steps {
        let next = rk4_step(&rho, dt, |y| sys.derivative(y));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite {
                last_time: (n - 1) as f64 * dt,
                trajectory: Box::new(traj),
            });
        }
        rho = next;
        traj.times.push(n as f64 * dt);
        traj.states.push(RadialCoefficients::new(rho.clone()));
    }
    Ok(traj)
}

/// `Psi(x, t)`: the component of the sphere containing `x`, or the ball component.
pub fn reconstruct(
    traj: &WaveTrajectory,
    x: GridPoint,
    t: f64,
    params: &PAdicParams,
) -> Result<Complex64, WaveError> {
    let v = valuation(x.index(), params)?;
    let component = v.min(params.depth() + 1) as usize;
    let state = traj.state_at(t)?;
    state.get(component).copied().ok_or(WaveError::DimensionMismatch {
        expected: params.radial_dim(),
        got: state.len(),
    })
}
