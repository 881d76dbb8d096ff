//! Quick oracle suite behind the `verify` subcommand.

use num_complex::Complex64;
use serde::Serialize;

use crate::bump::{solve_bump, BumpForm, BumpProblem};
use crate::experiment::{simulate_config, ExperimentConfig, Mode};
use crate::grid::{Coupling, CouplingSpec, DriveSpec, GridConvolution};
use crate::kernels::{Activation, KernelSpec};
use crate::oracle::{dense_convolution_matrix, quad_matrix};
use crate::padic::{basis_measures, PAdicParams};
use crate::par::Execution;
use crate::radial::{build_matrix, RadialCoefficients, RadialKernel};
use crate::wave::{integrate, WaveSystem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Observed error (or other measured quantity).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            value,
            tolerance,
            passed: value.is_finite() && value < tolerance,
        }
    }
}

fn params(p: u64, l: u32, m: u32) -> PAdicParams {
    PAdicParams::new(p, l, m).expect("valid built-in parameters")
}

fn matrix_vs_quadrature() -> f64 {
    let mut worst = 0.0f64;
    for (p, m) in [(2u64, 2u32), (3, 1)] {
        let pm = params(p, m + 6, m);
        for spec in [KernelSpec::bessel(1.5), KernelSpec::bessel(0.5), KernelSpec::constant(1.0)] {
            let kernel = RadialKernel::from_spec(&spec, p).expect("valid kernel");
            let a = build_matrix(&kernel, &pm, 200).expect("valid depth");
            let q = quad_matrix(&spec, &pm);
            for (i, row) in q.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    worst = worst.max((a.get(i, j) - v).norm());
                }
            }
        }
    }
    worst
}

fn conservation_and_symmetry() -> f64 {
    let pm = params(5, 9, 3);
    let spec = KernelSpec::bessel(0.5);
    let kernel = RadialKernel::from_spec(&spec, 5).expect("valid kernel");
    let a = build_matrix(&kernel, &pm, 200).expect("valid depth");
    let mu = basis_measures(&pm);
    let norm = kernel.integral(400).value;
    let mut worst = 0.0f64;
    for j in 0..a.dim() {
        let col: Complex64 = (0..a.dim()).map(|i| a.get(i, j) * mu[i]).sum();
        worst = worst.max((col - norm * mu[j]).norm());
        for i in 0..a.dim() {
            worst = worst.max((a.get(i, j) * mu[i] - a.get(j, i) * mu[j]).norm());
        }
    }
    worst
}

fn bessel_norm() -> f64 {
    let k = RadialKernel::from_spec(&KernelSpec::bessel(1.5), 2).expect("valid kernel");
    (k.integral(60).value.re - 1.0).abs()
}

fn constant_bump() -> f64 {
    let pm = params(2, 8, 3);
    let prob = BumpProblem {
        form: BumpForm::Qnn,
        params: pm,
        conv: GridConvolution::from_kernel(&KernelSpec::bessel(1.5).scaled(0.5), &pm, 60).expect("valid kernel"),
        coupling: Coupling::Zero,
        drive: vec![1.0; pm.grid_size() as usize],
        activation: Activation::Satlin,
        decay: 1.0,
    };
    match solve_bump(&prob, 1e-14, 10_000) {
        Ok(sol) => sol
            .field
            .iter()
            .map(|v| (v + 2.0).norm())
            .fold(sol.residual, f64::max),
        Err(_) => f64::INFINITY,
    }
}

fn free_rotation() -> f64 {
    let pm = params(2, 10, 9);
    let Ok(sys) = WaveSystem::from_specs(
        &pm,
        &KernelSpec::Zero,
        &CouplingSpec::Zero,
        &DriveSpec::Zero,
        Activation::Satlin,
        56.0,
        60,
    ) else {
        return f64::INFINITY;
    };
    let omega = Complex64::new(0.6, 0.8);
    let Ok(traj) = integrate(&sys, &RadialCoefficients::new(vec![omega; 11]), 200.0, 0.05) else {
        return f64::INFINITY;
    };
    let exact = omega * Complex64::new(0.0, -200.0 / 56.0).exp();
    traj.final_state().iter().map(|v| (v - exact).norm()).fold(0.0, f64::max)
}

fn grid_vs_radial() -> f64 {
    let cfg = ExperimentConfig {
        l: 7,
        m: 4,
        t_end: 5.0,
        w: CouplingSpec::Constant { value: 4.0 },
        z: DriveSpec::Constant { value: 2.0 },
        v: 1.0,
        ..ExperimentConfig::default()
    };
    let (Ok(a), Ok(b)) = (
        simulate_config(&cfg, Mode::Wave, Execution::default()),
        simulate_config(&cfg, Mode::Sim, Execution::default()),
    ) else {
        return f64::INFINITY;
    };
    a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

fn layered_vs_dense() -> f64 {
    let pm = params(3, 5, 1);
    let spec = KernelSpec::bessel(0.5);
    let conv = GridConvolution::from_kernel(&spec, &pm, 60).expect("valid kernel");
    let n = pm.grid_size() as usize;
    let f: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
    let fast = conv.apply(&f, Execution::default());
    let g = dense_convolution_matrix(&spec, &pm);
    (0..n)
        .map(|x| {
            let dense: Complex64 = (0..n).map(|y| f[y] * g[x * n + y]).sum();
            (fast[x] - dense).norm()
        })
        .fold(0.0, f64::max)
}

/// Runs every check; each takes well under a second in release builds.
pub fn run_checks() -> Vec<Check> {
    vec![
        Check::below("matrix vs quadrature", matrix_vs_quadrature(), 1e-8),
        Check::below("conservation and symmetry", conservation_and_symmetry(), 1e-10),
        Check::below("Bessel kernel normalization", bessel_norm(), 1e-10),
        Check::below("constant bump", constant_bump(), 1e-12),
        Check::below("free rotation", free_rotation(), 1e-8),
        Check::below("grid vs radial system", grid_vs_radial(), 1e-6),
        Check::below("layered vs dense convolution", layered_vs_dense(), 1e-12),
    ]
}

/// Fixed-width table, one row per check.
pub fn format_table(checks: &[Check]) -> String {
    let mut out = format!("{:<32} {:>12} {:>10}  result\n", "check", "value", "tolerance");
    for c in checks {
        out.push_str(&format!(
            "{:<32} {:>12.3e} {:>10.0e}  {}\n",
            c.name,
            c.value,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}
