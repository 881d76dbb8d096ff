//! Radial calculus, grid simulations and fixed-point solvers for cellular
//! neural networks over the p-adic integers.
//!
//! Functions on `Z_p` are discretized either on the `(M+2)`-dimensional space
//! of functions constant on the spheres `|x|_p = p^-j` (`j <= M`) and on the ball
//! `|x|_p <= p^-(M+1)`, or on the `p^l` cosets of `p^l Z_p`.

pub mod bump;
pub mod experiment;
pub mod grid;
pub mod kernels;
pub mod ode;
pub mod oracle;
pub mod output;
pub mod padic;
pub mod par;
pub mod radial;
pub mod verify;
pub mod wave;

pub use bump::{solve_bump, BumpForm, BumpProblem, BumpSolution};
pub use experiment::{ExperimentConfig, Mode, Preset, RunError};
pub use grid::{convolve_grid, sphere_average, GridField, GridOperator};
pub use kernels::{Activation, KernelSpec};
pub use padic::{GridPoint, PAdicParams};
pub use par::Execution;
pub use radial::{build_matrix, ConvolutionMatrix, RadialCoefficients, RadialKernel};
pub use wave::{integrate, WaveSystem, WaveTrajectory};
