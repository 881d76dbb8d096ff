//! Time-independent solutions (bumps) by Banach iteration on the level-`l` grid.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Coupling, GridConvolution, GridError, GridField};
use crate::kernels::Activation;
use crate::output::fmt_float;
use crate::padic::{valuation_table, PAdicParams};
use crate::par::Execution;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Shape of the fixed-point map `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BumpForm {
    /// `T f = J*f - int W phi(f) - Z`.
    #[default]
    Qnn,
    /// `T f = (int W phi(f) + Z) / alpha`.
    Cnn,
    /// `T f = J*f - phi(int W f + Z)`.
    QnnOuter,
    /// `T f = phi(int W f + Z) / alpha`.
    CnnOuter,
}

impl BumpForm {
    pub fn uses_diffusion(self) -> bool {
        matches!(self, BumpForm::Qnn | BumpForm::QnnOuter)
    }
}

#[derive(Debug, Clone)]
pub struct BumpProblem {
    pub form: BumpForm,
    pub params: PAdicParams,
    /// Diffusion kernel; ignored by the `cnn` forms.
    pub conv: GridConvolution,
    pub coupling: Coupling,
    pub drive: Vec<f64>,
    pub activation: Activation,
    /// Decay rate of the `cnn` forms.
    pub decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contraction {
    pub kappa: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpSolution {
    #[serde(skip)]
    pub field: GridField,
    /// `||T f - f||_1` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
    /// `||f_{n+1} - f_n||_1` for every step taken.
    #[serde(skip)]
    pub increments: Vec<f64>,
    pub kappa: f64,
}

impl BumpSolution {
    /// Largest `increment[n] / increment[n-1]` over the steps with a meaningful increment.
    pub fn max_ratio(&self) -> f64 {
        self.increments
            .windows(2)
            .filter(|w| w[0] > 1e-13)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Error)]
pub enum BumpError {
    #[error("contraction constant {kappa} is not below 1")]
    ContractionViolated { kappa: f64 },
    #[error("no convergence after {} iterations (residual {})", .0.iterations, .0.residual)]
    NotConverged(Box<BumpSolution>),
    #[error("decay rate must be positive, got {0}")]
    BadDecay(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl BumpProblem {
    /// `kappa = ||J||_1 + L ||W||_1` or `L ||W||_1 / alpha`.
    pub fn check_contraction(&self) -> Contraction {
        let w = self.activation.lipschitz() * self.coupling.l1_norm();
        let kappa = if self.form.uses_diffusion() {
            self.conv.l1_norm() + w
        } else {
            w / self.decay
        };
        Contraction {
            kappa,
            ok: kappa < 1.0,
        }
    }

    /// One application of the fixed-point map.
    pub fn map(&self, f: &[Complex64]) -> Vec<Complex64> {
        let exec = Execution::Sequential;
        let phi = self.activation;
        let z = &self.drive;
        match self.form {
            BumpForm::Qnn | BumpForm::Cnn => {
                let activated: Vec<Complex64> = f.iter().map(|v| phi.apply(*v)).collect();
                let coupled = self.coupling.apply(&activated, exec);
                if self.form == BumpForm::Qnn {
                    let conv = self.conv.apply(f, exec);
                    (0..f.len()).map(|x| conv[x] - coupled[x] - z[x]).collect()
                } else {
                    (0..f.len()).map(|x| (coupled[x] + z[x]) / self.decay).collect()
                }
            }
            BumpForm::QnnOuter | BumpForm::CnnOuter => {
                let coupled = self.coupling.apply(f, exec);
                let outer: Vec<Complex64> = (0..f.len()).map(|x| phi.apply(coupled[x] + z[x])).collect();
                if self.form == BumpForm::QnnOuter {
                    let conv = self.conv.apply(f, exec);
                    (0..f.len()).map(|x| conv[x] - outer[x]).collect()
                } else {
                    outer.into_iter().map(|v| v / self.decay).collect()
                }
            }
        }
    }

    fn validate(&self) -> Result<(), BumpError> {
        let n = self.params.grid_size() as usize;
        if self.drive.len() != n {
            return Err(GridError::SizeMismatch {
                expected: n,
                got: self.drive.len(),
            }
            .into());
        }
        if !self.form.uses_diffusion() && !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(BumpError::BadDecay(self.decay));
        }
        Ok(())
    }
}

/// Iterates from `f0 = 0` until `||f_{n+1} - f_n||_1 <= tol`.
pub fn solve_bump(prob: &BumpProblem, tol: f64, max_iter: usize) -> Result<BumpSolution, BumpError> {
    solve_bump_from(prob, GridField::zeros(&prob.params), tol, max_iter)
}

pub fn solve_bump_from(
    prob: &BumpProblem,
    init: GridField,
    tol: f64,
    max_iter: usize,
) -> Result<BumpSolution, BumpError> {
    prob.validate()?;
    if init.len() != prob.drive.len() {
        return Err(GridError::SizeMismatch {
            expected: prob.drive.len(),
            got: init.len(),
        }
        .into());
    }
    let Contraction { kappa, ok } = prob.check_contraction();
    if !ok {
        return Err(BumpError::ContractionViolated { kappa });
    }
    let params = &prob.params;
    let mut f = init;
    let mut increments = Vec::new();
    let mut converged = false;
    while increments.len() < max_iter {
        let next = GridField::new(prob.map(&f));
        let step = next.l1_distance(&f, params);
        increments.push(step);
        f = next;
        if step <= tol {
            converged = true;
            break;
        }
    }
    let residual = GridField::new(prob.map(&f)).l1_distance(&f, params);
    let solution = BumpSolution {
        field: f,
        residual,
        iterations: increments.len(),
        increments,
        kappa,
    };
    if converged {
        Ok(solution)
    } else {
        Err(BumpError::NotConverged(Box::new(solution)))
    }
}

/// Rows `index,norm_exponent,re,im`, where `|x_index|_p = p^-norm_exponent`
/// (`norm_exponent = l` stands for the cell of 0).
pub fn write_bump_csv<W: Write>(mut w: W, field: &GridField, params: &PAdicParams) -> io::Result<()> {
    writeln!(w, "index,norm_exponent,re,im")?;
    for (i, (v, e)) in field.iter().zip(valuation_table(params)).enumerate() {
        writeln!(w, "{i},{e},{},{}", fmt_float(v.re), fmt_float(v.im))?;
    }
    Ok(())
}
