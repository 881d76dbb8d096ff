//! Experiment configuration, presets, single runs and sweeps.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bump::{solve_bump, write_bump_csv, BumpError, BumpForm, BumpProblem, BumpSolution};
use crate::grid::{
    simulate, CouplingSpec, DriveSpec, Equation, GridField, GridOperator,
    SimulationError, SimulationOptions, RNG_NAME,
};
use crate::kernels::{Activation, KernelSpec};
use crate::output::{write_amplitudes, write_profile};
use crate::padic::{valuation_table, PAdicParams};
use crate::par::{map_collect, Execution};
use crate::radial::{build_matrix, RadialCoefficients, RadialKernel};
use crate::wave::{integrate, WaveError, WaveSystem};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PADIC_CNN_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    #[default]
    Qcnn,
    Cnn,
    /// `v du/dt = -alpha u + int W phi(u) + Z`.
    Eq1,
}

/// Initial datum, as a function of `|x|_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialSpec {
    /// `Omega(p^r |x|_p)`: 1 on `|x|_p <= p^-r`, 0 elsewhere.
    BallIndicator { radius_exponent: u32 },
    Constant { value: f64 },
    /// Radial coefficients `(c_0, ..., c_M, c_ball)`.
    Table { values: Vec<f64> },
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec::BallIndicator { radius_exponent: 2 }
    }
}

impl InitialSpec {
    pub fn radial(&self, params: &PAdicParams) -> Result<RadialCoefficients, RunError> {
        let dim = params.radial_dim();
        Ok(match self {
            InitialSpec::BallIndicator { radius_exponent } => RadialCoefficients::from_real(
                &(0..dim)
                    .map(|j| if j as u32 >= *radius_exponent { 1.0 } else { 0.0 })
                    .collect::<Vec<_>>(),
            ),
            InitialSpec::Constant { value } => RadialCoefficients::from_real(&vec![*value; dim]),
            InitialSpec::Table { values } => {
                if values.len() != dim {
                    return Err(RunError::Config(format!(
                        "initial table has {} values, expected M+2 = {dim}",
                        values.len()
                    )));
                }
                RadialCoefficients::from_real(values)
            }
        })
    }

    pub fn grid(&self, params: &PAdicParams) -> Result<GridField, RunError> {
        Ok(match self {
            InitialSpec::BallIndicator { radius_exponent } => GridField::from_real(
                &valuation_table(params)
                    .into_iter()
                    .map(|v| if v >= *radius_exponent { 1.0 } else { 0.0 })
                    .collect::<Vec<_>>(),
            ),
            other => GridField::from_radial(&other.radial(params)?, params),
        })
    }
}

/// Every parameter of a run; missing JSON keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub p: u64,
    pub l: u32,
    #[serde(rename = "M")]
    pub m: u32,
    pub kernel: KernelSpec,
    pub activation: Activation,
    pub v: f64,
    #[serde(rename = "W")]
    pub w: CouplingSpec,
    #[serde(rename = "Z")]
    pub z: DriveSpec,
    pub equation: EquationKind,
    /// Decay rate of the `eq1` dynamics and of the `cnn` bump forms.
    pub decay: f64,
    pub t_end: f64,
    pub dt: f64,
    pub initial: InitialSpec,
    pub seed: u64,
    pub series_depth: u32,
    /// Components written to the profile CSV.
    pub profile: Vec<usize>,
    pub record_every: usize,
    pub bump_form: BumpForm,
    pub tol: f64,
    pub max_iter: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            p: 2,
            l: 10,
            m: 9,
            kernel: KernelSpec::bessel(1.5),
            activation: Activation::Satlin,
            v: 56.0,
            w: CouplingSpec::Zero,
            z: DriveSpec::Zero,
            equation: EquationKind::Qcnn,
            decay: 1.0,
            t_end: 200.0,
            dt: 0.05,
            initial: InitialSpec::default(),
            seed: 0,
            series_depth: crate::radial::DEFAULT_SERIES_DEPTH,
            profile: vec![0, 1, 2],
            record_every: 1,
            bump_form: BumpForm::Qnn,
            tol: crate::bump::DEFAULT_TOL,
            max_iter: crate::bump::DEFAULT_MAX_ITER,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            "fig4" => Ok(Preset::Fig4),
            "fig5" => Ok(Preset::Fig5),
            _ => Err(format!("unknown preset `{s}` (expected fig2, fig3, fig4 or fig5)")),
        }
    }
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
        }
    }

    /// Overwrites the preset parameters of `cfg`, keeping name, seed and output settings.
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        let base = ExperimentConfig::default();
        cfg.p = 2;
        cfg.l = 10;
        cfg.m = 9;
        cfg.kernel = base.kernel;
        cfg.activation = Activation::Satlin;
        cfg.v = 56.0;
        cfg.equation = EquationKind::Qcnn;
        cfg.t_end = 200.0;
        cfg.dt = 0.05;
        cfg.initial = InitialSpec::default();
        match self {
            Preset::Fig2 => {
                cfg.w = CouplingSpec::Zero;
                cfg.z = DriveSpec::Constant { value: 0.0 };
            }
            Preset::Fig3 => {
                cfg.w = CouplingSpec::Constant { value: 0.0 };
                cfg.z = DriveSpec::Constant { value: 1.0 };
            }
            Preset::Fig4 => {
                cfg.w = CouplingSpec::Radial {
                    kernel: KernelSpec::power(8.0, 1.5),
                };
                cfg.z = DriveSpec::Radial {
                    kernel: KernelSpec::power(5.0, 1.5),
                };
            }
            Preset::Fig5 => {
                cfg.w = CouplingSpec::Random { lo: 0.0, hi: 10.0 };
                cfg.z = DriveSpec::Random { lo: 0.0, hi: 10.0 };
            }
        }
        if cfg.name == base.name {
            cfg.name = self.name().into();
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        self.apply(&mut cfg);
        cfg
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<PAdicParams, RunError> {
        PAdicParams::new(self.p, self.l, self.m).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<PAdicParams, RunError> {
        let params = self.params()?;
        let bad = |msg: String| Err(RunError::Config(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return bad(format!("v must be positive, got {}", self.v));
        }
        if self.series_depth == 0 {
            return bad("series_depth must be at least 1".into());
        }
        if let Some(&c) = self.profile.iter().find(|&&c| c >= params.radial_dim()) {
            return bad(format!("profile component {c} exceeds M+1 = {}", self.m + 1));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("run name `{}` is not a plain file stem", self.name));
        }
        self.kernel
            .validate()
            .map_err(|e| RunError::Config(format!("kernel: {e}")))?;
        for k in [self.w_kernel(), self.z_kernel()].into_iter().flatten() {
            k.validate().map_err(|e| RunError::Config(e.to_string()))?;
        }
        self.initial.radial(&params)?;
        Ok(params)
    }

    fn w_kernel(&self) -> Option<KernelSpec> {
        self.w.radial_kernel()
    }

    fn z_kernel(&self) -> Option<KernelSpec> {
        self.z.radial_kernel()
    }

    pub fn equation(&self) -> Equation {
        match self.equation {
            EquationKind::Qcnn => Equation::Qcnn,
            EquationKind::Cnn => Equation::Cnn,
            EquationKind::Eq1 => Equation::Decay { rate: self.decay },
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contraction constant {kappa} is not below 1")]
    Contraction { kappa: f64 },
    #[error("numerical overflow after t = {last_time}")]
    Overflow { last_time: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("solver error: {0}")]
    Solver(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Contraction { .. } => 3,
            RunError::Overflow { .. } => 4,
            RunError::Io(_) | RunError::Solver(_) => 1,
        }
    }

    /// Machine-readable error class.
    pub fn class(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Contraction { .. } => "contraction",
            RunError::Overflow { .. } => "overflow",
            RunError::Io(_) => "io",
            RunError::Solver(_) => "solver",
        }
    }
}

/// What a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The `(M+2)`-dimensional radial system.
    Wave,
    /// The full `p^l`-point grid.
    Sim,
    Bump,
    Matrix,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Wave => "wave",
            Mode::Sim => "sim",
            Mode::Bump => "bump",
            Mode::Matrix => "matrix",
        }
    }
}

/// Radial readout of a time-dependent run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<RadialCoefficients>,
    /// Time of the last finite state when the run overflowed.
    pub diverged_at: Option<f64>,
    pub norms: serde_json::Value,
}

impl Trajectory {
    pub fn summary(&self, name: &str) -> SweepRow {
        let t_last = self.times.last().copied().unwrap_or(0.0);
        let amps: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(t, s)| (*t, s.total_amplitude()))
            .collect();
        let late: Vec<f64> = amps
            .iter()
            .filter(|(t, _)| *t >= 0.5 * t_last)
            .map(|(_, a)| *a)
            .collect();
        SweepRow {
            name: name.to_string(),
            mean_amplitude: late.iter().sum::<f64>() / late.len().max(1) as f64,
            max_amplitude: amps.iter().map(|(_, a)| *a).fold(0.0, f64::max),
            diverged: self.diverged_at.is_some(),
        }
    }
}

/// Integrates a configuration in memory.
pub fn simulate_config(cfg: &ExperimentConfig, mode: Mode, exec: Execution) -> Result<Trajectory, RunError> {
    let params = cfg.validate()?;
    match mode {
        Mode::Wave => simulate_wave(cfg, &params),
        Mode::Sim => simulate_grid(cfg, &params, exec),
        Mode::Bump | Mode::Matrix => Err(RunError::Config(format!(
            "{} runs have no trajectory",
            mode.name()
        ))),
    }
}

fn simulate_wave(cfg: &ExperimentConfig, params: &PAdicParams) -> Result<Trajectory, RunError> {
    if cfg.equation != EquationKind::Qcnn {
        return Err(RunError::Config("the radial system integrates the qcnn equation only".into()));
    }
    let sys = WaveSystem::from_specs(
        params,
        &cfg.kernel,
        &cfg.w,
        &cfg.z,
        cfg.activation,
        cfg.v,
        cfg.series_depth,
    )
    .map_err(|e| match e {
        WaveError::NotRadial(_) => RunError::Config(format!("{e}")),
        other => RunError::Config(other.to_string()),
    })?;
    let lipschitz = sys.lipschitz();
    let norms = json!({
        "J_l1": RadialKernel::from_spec(&cfg.kernel, params.p()).map(|k| k.l1_norm(400)).unwrap_or(f64::NAN),
        "lipschitz_H": lipschitz,
        "lipschitz_ok": sys.lipschitz_ok(),
        "truncation_error_bound": sys.a_j.truncation_error_bound(),
    });
    let rho0 = cfg.initial.radial(params)?;
    let (traj, diverged_at) = match integrate(&sys, &rho0, cfg.t_end, cfg.dt) {
        Ok(t) => (t, None),
        Err(WaveError::NonFinite { last_time, trajectory }) => (*trajectory, Some(last_time)),
        Err(e) => return Err(RunError::Solver(e.to_string())),
    };
    let (times, states) = thin(traj.times, traj.states, cfg.record_every);
    Ok(Trajectory {
        times,
        states,
        diverged_at,
        norms,
    })
}

fn thin(times: Vec<f64>, states: Vec<RadialCoefficients>, every: usize) -> (Vec<f64>, Vec<RadialCoefficients>) {
    let every = every.max(1);
    if every == 1 {
        return (times, states);
    }
    let last = times.len() - 1;
    times
        .into_iter()
        .zip(states)
        .enumerate()
        .filter(|(i, _)| i % every == 0 || *i == last)
        .map(|(_, x)| x)
        .unzip()
}

fn grid_operator(cfg: &ExperimentConfig, params: &PAdicParams) -> Result<GridOperator, RunError> {
    GridOperator::build(params, &cfg.kernel, &cfg.w, &cfg.z, cfg.seed, cfg.series_depth)
        .map_err(|e| RunError::Config(e.to_string()))
}

fn simulate_grid(cfg: &ExperimentConfig, params: &PAdicParams, exec: Execution) -> Result<Trajectory, RunError> {
    let op = grid_operator(cfg, params)?;
    let j_l1 = op.conv.l1_norm();
    let w_l1 = op.coupling.l1_norm();
    let norms = json!({
        "J_l1": j_l1,
        "W_l1": w_l1,
        "lipschitz_H": 1.0 + j_l1 + cfg.activation.lipschitz() * w_l1,
        "rng": RNG_NAME,
        "seed": cfg.seed,
    });
    let opts = SimulationOptions {
        equation: cfg.equation(),
        activation: cfg.activation,
        speed: cfg.v,
        t_end: cfg.t_end,
        dt: cfg.dt,
        record_every: cfg.record_every,
        exec,
    };
    let init = cfg.initial.grid(params)?;
    match simulate(&op, init, &opts) {
        Ok(t) => Ok(Trajectory {
            times: t.times,
            states: t.averages,
            diverged_at: None,
            norms,
        }),
        Err(SimulationError::Diverged(d)) => Ok(Trajectory {
            times: d.partial.times,
            states: d.partial.averages,
            diverged_at: Some(d.last_time),
            norms,
        }),
        Err(SimulationError::Grid(e)) => Err(RunError::Solver(e.to_string())),
    }
}

/// Bump problem described by a configuration (grid level `l`).
pub fn bump_problem(cfg: &ExperimentConfig) -> Result<BumpProblem, RunError> {
    let params = cfg.validate()?;
    let op = grid_operator(cfg, &params)?;
    Ok(BumpProblem {
        form: cfg.bump_form,
        params,
        conv: op.conv,
        coupling: op.coupling,
        drive: op.drive,
        activation: cfg.activation,
        decay: cfg.decay,
    })
}

pub fn solve_config_bump(cfg: &ExperimentConfig) -> Result<BumpSolution, RunError> {
    let prob = bump_problem(cfg)?;
    match solve_bump(&prob, cfg.tol, cfg.max_iter) {
        Ok(s) => Ok(s),
        Err(BumpError::ContractionViolated { kappa }) => Err(RunError::Contraction { kappa }),
        Err(BumpError::NotConverged(best)) => Err(RunError::Solver(format!(
            "no convergence after {} iterations (residual {:e})",
            best.iterations, best.residual
        ))),
        Err(BumpError::BadDecay(d)) => Err(RunError::Config(format!("decay must be positive, got {d}"))),
        Err(BumpError::Grid(e)) => Err(RunError::Solver(e.to_string())),
    }
}

/// Files written by a run and its metadata.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub meta: serde_json::Value,
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_meta(path: &Path, meta: &serde_json::Value) -> Result<(), RunError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, meta).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Runs a configuration and writes `<name>_*.csv` plus `<name>_meta.json`.
pub fn run(cfg: &ExperimentConfig, mode: Mode) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let params = cfg.validate()?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;
    let path = |suffix: &str| dir.join(format!("{}_{suffix}", cfg.name));
    let mut files = Vec::new();
    let mut meta = json!({
        "name": cfg.name,
        "mode": mode.name(),
        "config": cfg,
        "seed": cfg.seed,
        "rng": RNG_NAME,
        "time_variable": "s = t v",
    });
    let mut failure = None;
    match mode {
        Mode::Wave | Mode::Sim => {
            let traj = simulate_config(cfg, mode, Execution::default())?;
            let amp = path("amplitudes.csv");
            let mut w = create(&amp)?;
            write_amplitudes(&mut w, params.depth(), &traj.times, &traj.states)?;
            w.flush()?;
            let prof = path("profile.csv");
            let mut w = create(&prof)?;
            write_profile(&mut w, &cfg.profile, &traj.times, &traj.states)?;
            w.flush()?;
            files.extend([amp, prof]);
            let summary = traj.summary(&cfg.name);
            meta["norms"] = traj.norms.clone();
            meta["steps"] = json!(traj.times.len().saturating_sub(1));
            meta["final_time"] = json!(traj.times.last());
            meta["diverged_at"] = json!(traj.diverged_at);
            meta["summary"] = serde_json::to_value(&summary).map_err(io::Error::from)?;
            if let Some(last_time) = traj.diverged_at {
                failure = Some(RunError::Overflow { last_time });
            }
        }
        Mode::Bump => {
            let sol = solve_config_bump(cfg)?;
            let out = path("bump.csv");
            let mut w = create(&out)?;
            write_bump_csv(&mut w, &sol.field, &params)?;
            w.flush()?;
            files.push(out);
            meta["bump"] = json!({
                "form": cfg.bump_form,
                "kappa": sol.kappa,
                "iterations": sol.iterations,
                "residual": sol.residual,
                "max_ratio": sol.max_ratio(),
            });
        }
        Mode::Matrix => {
            if params.depth() < 1 {
                return Err(RunError::Config("the convolution matrix needs M >= 1".into()));
            }
            let kernel = RadialKernel::from_spec(&cfg.kernel, params.p())
                .map_err(|e| RunError::Config(e.to_string()))?;
            let a = build_matrix(&kernel, &params, cfg.series_depth)
                .map_err(|e| RunError::Config(e.to_string()))?;
            let out = path("matrix.csv");
            let mut w = create(&out)?;
            a.write_csv(&mut w)?;
            w.flush()?;
            files.push(out);
            meta["matrix"] = json!({
                "dim": a.dim(),
                "series_depth": cfg.series_depth,
                "truncation_error_bound": a.truncation_error_bound(),
                "max_row_sum": a.max_row_sum(),
                "J_l1": kernel.l1_norm(400),
            });
        }
    }
    meta["wall_time_s"] = json!(start.elapsed().as_secs_f64());
    let meta_path = path("meta.json");
    write_meta(&meta_path, &meta)?;
    files.push(meta_path);
    match failure {
        Some(e) => Err(e),
        None => Ok(RunReport { files, meta }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub name: String,
    /// Mean total amplitude over the second half of the run.
    pub mean_amplitude: f64,
    pub max_amplitude: f64,
    pub diverged: bool,
}

/// Integrates every configuration concurrently; one row per configuration, in input order.
pub fn sweep(configs: &[ExperimentConfig], mode: Mode) -> Result<Vec<SweepRow>, RunError> {
    map_collect(configs, Execution::default(), |cfg| {
        simulate_config(cfg, mode, Execution::Sequential).map(|t| t.summary(&cfg.name))
    })
    .into_iter()
    .collect()
}

/// CSV rows `name,mean_amplitude,max_amplitude,diverged`.
pub fn write_sweep<W: Write>(mut w: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(w, "name,mean_amplitude,max_amplitude,diverged")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.name,
            crate::output::fmt_float(r.mean_amplitude),
            crate::output::fmt_float(r.max_amplitude),
            r.diverged
        )?;
    }
    Ok(())
}
