use num_complex::Complex64;
use padic_cnn::bump::{solve_bump, solve_bump_from, BumpForm, BumpProblem};
use padic_cnn::grid::{
    simulate, sphere_average, Coupling, CouplingSpec, DriveSpec, Equation, GridConvolution, GridField, GridOperator,
    SimulationOptions,
};
use padic_cnn::kernels::{Activation, KernelSpec};
use padic_cnn::padic::{basis_measures, PAdicParams};
use padic_cnn::par::Execution;
use padic_cnn::radial::{build_matrix, RadialCoefficients, RadialKernel};
use padic_cnn::wave::{integrate, WaveSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5, 7])
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.3f64..3.0).prop_filter("alpha != 1", |a| (a - 1.0).abs() > 0.05).prop_map(KernelSpec::bessel),
        (-2.0f64..2.0).prop_map(KernelSpec::constant),
        prop::collection::vec(-3.0f64..3.0, 1..10).prop_map(KernelSpec::table),
        ((0.1f64..4.0), (0.0f64..2.0)).prop_map(|(c, e)| KernelSpec::power(c, e)),
    ]
}

fn field(n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_is_weighted_symmetric_and_conservative(p in prime(), m in 1u32..5, spec in kernel()) {
        let pm = PAdicParams::new(p, m + 2, m).unwrap();
        let k = RadialKernel::from_spec(&spec, p).unwrap();
        let a = build_matrix(&k, &pm, 400).unwrap();
        let mu = basis_measures(&pm);
        let norm = k.integral(400).value;
        for j in 0..a.dim() {
            let col: Complex64 = (0..a.dim()).map(|i| a.get(i, j) * mu[i]).sum();
            prop_assert!((col - norm * mu[j]).norm() < 1e-10 * (1.0 + norm.norm()));
            for i in 0..a.dim() {
                prop_assert!((a.get(i, j) * mu[i] - a.get(j, i) * mu[j]).norm() < 1e-12);
            }
        }
        let ones = a.apply(&RadialCoefficients::ones(a.dim())).unwrap();
        prop_assert!(ones.iter().all(|v| (v - norm).norm() < 1e-10 * (1.0 + norm.norm())));
    }

    #[test]
    fn matrix_is_linear(p in prime(), spec in kernel(), seed in any::<u64>(), s in -3.0f64..3.0) {
        let pm = PAdicParams::new(p, 5, 3).unwrap();
        let a = build_matrix(&RadialKernel::from_spec(&spec, p).unwrap(), &pm, 60).unwrap();
        let x = field(5, seed);
        let y = field(5, seed ^ 1);
        let lhs = a.apply(&x.iter().zip(&y).map(|(u, v)| u * s + v).collect::<Vec<_>>()).unwrap();
        let ax = a.apply(&x).unwrap();
        let ay = a.apply(&y).unwrap();
        for i in 0..5 {
            prop_assert!((lhs[i] - (ax[i] * s + ay[i])).norm() < 1e-9 * (1.0 + a.max_abs_entry()));
        }
    }

    #[test]
    fn layered_convolution_matches_naive(p in prime(), spec in kernel(), seed in any::<u64>()) {
        let l = match p { 2 => 7, 3 => 4, _ => 3 };
        let pm = PAdicParams::new(p, l, 1).unwrap();
        let conv = GridConvolution::from_kernel(&spec, &pm, 60).unwrap();
        let f = field(pm.grid_size() as usize, seed);
        let a = conv.apply(&f, Execution::Parallel);
        let b = conv.apply_naive(&f, Execution::Sequential);
        let scale = f.iter().map(|v| v.norm()).fold(1.0, f64::max) * (1.0 + conv.l1_norm());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).norm() < 1e-11 * scale);
        }
    }

    #[test]
    fn radial_fields_stay_radial_under_convolution(p in prime(), spec in kernel(), seed in any::<u64>()) {
        let pm = PAdicParams::new(p, if p == 2 { 7 } else { 4 }, 2).unwrap();
        let coeffs = RadialCoefficients::new(field(4, seed));
        let k = RadialKernel::from_spec(&spec, p).unwrap();
        let a = build_matrix(&k, &pm, 400).unwrap();
        let conv = GridConvolution::from_kernel(&spec, &pm, 400).unwrap();
        let out = GridField::new(conv.apply(&GridField::from_radial(&coeffs, &pm), Execution::Sequential));
        let avg = sphere_average(&out, &pm);
        let expected = a.apply(&coeffs).unwrap();
        let back = GridField::from_radial(&avg, &pm);
        let scale = 1.0 + a.max_abs_entry() * 10.0;
        prop_assert!(out.max_abs_diff(&back) < 1e-11 * scale);
        prop_assert!(avg.max_abs_diff(&expected) < 1e-11 * scale);
    }

    #[test]
    fn activations_are_one_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for phi in [Activation::Satlin, Activation::SatlinPlus, Activation::Tanh] {
            for _ in 0..2_000 {
                let a = Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
                let b = Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
                prop_assert!((phi.apply(a) - phi.apply(b)).norm() <= (a - b).norm() * (1.0 + 1e-12));
            }
        }
    }
}

fn bump_problem(seed: u64, pm: &PAdicParams) -> BumpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = KernelSpec::table((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
    let w0 = GridConvolution::from_kernel(&table, pm, 60).unwrap().l1_norm();
    let w = table.scaled(rng.random_range(0.05..0.4) / w0);
    let z = KernelSpec::table((0..6).map(|_| rng.random_range(-2.0..2.0)).collect());
    let n = pm.grid_size() as usize;
    let drive: Vec<f64> = (0..n as u64)
        .map(|i| {
            let v = padic_cnn::padic::valuation(i, pm).unwrap();
            if v >= pm.level() { z.value_at_zero(pm.p()) } else { z.value_at_level(pm.p(), v) }
        })
        .collect();
    BumpProblem {
        form: BumpForm::Qnn,
        params: *pm,
        conv: GridConvolution::from_kernel(&KernelSpec::bessel(1.5).scaled(0.5), pm, 60).unwrap(),
        coupling: Coupling::Radial(GridConvolution::from_kernel(&w, pm, 60).unwrap()),
        drive,
        activation: Activation::Satlin,
        decay: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bump_is_unique(seed in any::<u64>()) {
        let pm = PAdicParams::new(2, 7, 3).unwrap();
        let prob = bump_problem(seed, &pm);
        let tol = 1e-10;
        let a = solve_bump_from(&prob, GridField::new(field(128, seed ^ 7)), tol, 10_000).unwrap();
        let b = solve_bump_from(&prob, GridField::new(field(128, seed ^ 9)), tol, 10_000).unwrap();
        prop_assert!(a.field.l1_distance(&b.field, &pm) < 10.0 * tol);
        prop_assert!(a.max_ratio() <= a.kappa + 0.01);
    }

    #[test]
    fn radial_bump_is_constant_on_spheres(seed in any::<u64>()) {
        let pm = PAdicParams::new(3, 5, 4).unwrap();
        let prob = bump_problem(seed, &pm);
        let sol = solve_bump(&prob, 1e-12, 10_000).unwrap();
        let avg = sphere_average(&sol.field, &pm);
        let spread = sol.field.max_abs_diff(&GridField::from_radial(&avg, &pm));
        prop_assert!(spread < 1e-10);
    }
}

#[test]
fn grid_l2_norm_is_conserved_without_forcing() {
    let pm = PAdicParams::new(2, 7, 4).unwrap();
    let op = GridOperator::build(&pm, &KernelSpec::bessel(1.5), &CouplingSpec::Zero, &DriveSpec::Zero, 0, 60).unwrap();
    let init = GridField::new(field(128, 5));
    let n0 = init.l2_norm_sq(&pm);
    let opts = SimulationOptions {
        equation: Equation::Qcnn,
        activation: Activation::Satlin,
        speed: 56.0,
        t_end: 200.0,
        dt: 0.05,
        record_every: 4000,
        exec: Execution::default(),
    };
    let traj = simulate(&op, init, &opts).unwrap();
    assert!((traj.final_state.l2_norm_sq(&pm) - n0).abs() / n0 < 1e-4);
}

#[test]
fn wave_weighted_norm_is_conserved_for_real_kernels() {
    let pm = PAdicParams::new(3, 6, 4).unwrap();
    for spec in [KernelSpec::bessel(0.7), KernelSpec::table(vec![2.0, -1.0, 0.5, 3.0])] {
        let sys = WaveSystem::from_specs(&pm, &spec, &CouplingSpec::Zero, &DriveSpec::Zero, Activation::Satlin, 56.0, 60)
            .unwrap();
        let rho0 = RadialCoefficients::new(field(6, 3));
        let n0 = rho0.weighted_norm_sq(&pm);
        let traj = integrate(&sys, &rho0, 200.0, 0.05).unwrap();
        for s in &traj.states {
            assert!((s.weighted_norm_sq(&pm) - n0).abs() / n0 < 1e-4);
        }
    }
}

fn cnn_setup() -> (PAdicParams, GridOperator, BumpProblem) {
    let pm = PAdicParams::new(2, 6, 3).unwrap();
    let w = CouplingSpec::Radial {
        kernel: KernelSpec::table(vec![0.4, -0.3, 0.2]),
    };
    let z = DriveSpec::Radial {
        kernel: KernelSpec::table(vec![1.0, -0.5, 2.0]),
    };
    let op = GridOperator::build(&pm, &KernelSpec::Zero, &w, &z, 0, 60).unwrap();
    let prob = BumpProblem {
        form: BumpForm::Cnn,
        params: pm,
        conv: op.conv.clone(),
        coupling: op.coupling.clone(),
        drive: op.drive.clone(),
        activation: Activation::Satlin,
        decay: 1.0,
    };
    (pm, op, prob)
}

#[test]
fn bumps_are_equilibria_of_the_dynamics() {
    let (pm, op, prob) = cnn_setup();
    let bump = solve_bump(&prob, 1e-14, 10_000).unwrap().field;
    let opts = SimulationOptions {
        equation: Equation::Decay { rate: 1.0 },
        activation: Activation::Satlin,
        speed: 1.0,
        t_end: 200.0,
        dt: 0.05,
        record_every: 4000,
        exec: Execution::default(),
    };
    let traj = simulate(&op, bump.clone(), &opts).unwrap();
    assert!(traj.final_state.l1_distance(&bump, &pm) < 1e-6);

    let perturbed = GridField::new(bump.iter().zip(field(64, 1)).map(|(b, e)| b + e * 0.1).collect());
    let start = perturbed.l1_distance(&bump, &pm);
    let opts = SimulationOptions { t_end: 20.0, ..opts };
    let traj = simulate(&op, perturbed, &opts).unwrap();
    assert!(traj.final_state.l1_distance(&bump, &pm) < 1e-3 * start);
}
