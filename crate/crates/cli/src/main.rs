use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use padic_cnn::bump::BumpForm;
use padic_cnn::experiment::{
    run, sweep, write_sweep, EquationKind, ExperimentConfig, Mode, Preset, RunError, OUTPUT_DIR_ENV,
};
use padic_cnn::grid::{CouplingSpec, DriveSpec};
use padic_cnn::kernels::{Activation, KernelSpec};
use padic_cnn::verify::{format_table, run_checks};

#[derive(Parser)]
#[command(name = "padic-cnn", version, about = "p-adic cellular neural network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the radial convolution matrix of the kernel J.
    Matrix(RunArgs),
    /// Solve for a time-independent solution by fixed-point iteration.
    Bump(RunArgs),
    /// Integrate the (M+2)-dimensional radial wave system.
    Wave(RunArgs),
    /// Integrate the full grid system and record sphere averages.
    Sim(RunArgs),
    /// Run several configurations and summarize their amplitudes.
    Sweep(SweepArgs),
    /// Run the built-in oracle checks.
    Verify,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActivationArg {
    Satlin,
    SatlinPlus,
    Tanh,
}

#[derive(Clone, Copy, ValueEnum)]
enum EquationArg {
    Qcnn,
    Cnn,
    Eq1,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Qnn,
    Cnn,
    QnnOuter,
    CnnOuter,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepMode {
    Wave,
    Sim,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON configuration file; missing keys take the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter preset (fig2, fig3, fig4, fig5).
    #[arg(long)]
    preset: Option<Preset>,
    /// Constant drive Z.
    #[arg(long = "Z")]
    z: Option<f64>,
    /// Constant coupling W.
    #[arg(long = "W")]
    w: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long = "M")]
    m: Option<u32>,
    /// Bessel potential order of J.
    #[arg(long)]
    alpha: Option<f64>,
    /// Speed v.
    #[arg(long)]
    v: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, value_enum)]
    activation: Option<ActivationArg>,
    #[arg(long, value_enum)]
    equation: Option<EquationArg>,
    /// Decay rate for eq1 dynamics and cnn bump forms.
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    /// Series truncation depth K.
    #[arg(long)]
    series_depth: Option<u32>,
    /// Stem of the output file names.
    #[arg(long)]
    name: Option<String>,
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON array of configurations.
    #[arg(long, conflicts_with = "preset")]
    configs: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    /// Comma-separated constant drives to sweep over.
    #[arg(long = "Z-values", value_delimiter = ',')]
    z_values: Vec<f64>,
    /// Comma-separated constant couplings to sweep over.
    #[arg(long = "W-values", value_delimiter = ',')]
    w_values: Vec<f64>,
    #[arg(long, value_enum, default_value = "wave")]
    mode: SweepMode,
    #[arg(long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, RunError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(preset) = self.preset {
            preset.apply(&mut cfg);
        }
        if let Some(z) = self.z {
            cfg.z = DriveSpec::Constant { value: z };
        }
        if let Some(w) = self.w {
            cfg.w = CouplingSpec::Constant { value: w };
        }
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        set!(seed => seed, p => p, l => l, m => m, v => v, t_end => t_end, dt => dt,
             decay => decay, series_depth => series_depth, name => name);
        if let Some(alpha) = self.alpha {
            cfg.kernel = KernelSpec::bessel(alpha);
        }
        if let Some(a) = self.activation {
            cfg.activation = match a {
                ActivationArg::Satlin => Activation::Satlin,
                ActivationArg::SatlinPlus => Activation::SatlinPlus,
                ActivationArg::Tanh => Activation::Tanh,
            };
        }
        if let Some(e) = self.equation {
            cfg.equation = match e {
                EquationArg::Qcnn => EquationKind::Qcnn,
                EquationArg::Cnn => EquationKind::Cnn,
                EquationArg::Eq1 => EquationKind::Eq1,
            };
        }
        if let Some(f) = self.form {
            cfg.bump_form = match f {
                FormArg::Qnn => BumpForm::Qnn,
                FormArg::Cnn => BumpForm::Cnn,
                FormArg::QnnOuter => BumpForm::QnnOuter,
                FormArg::CnnOuter => BumpForm::CnnOuter,
            };
        }
        if self.out.is_some() {
            cfg.output_dir = self.out.clone();
        }
        Ok(cfg)
    }
}

fn run_mode(args: &RunArgs, mode: Mode) -> Result<(), RunError> {
    let cfg = args.config()?;
    let report = run(&cfg, mode)?;
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn sweep_configs(args: &SweepArgs) -> Result<Vec<ExperimentConfig>, RunError> {
    if let Some(path) = &args.configs {
        let text =
            fs::read_to_string(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| RunError::Config(e.to_string()));
    }
    let base = args.preset.map(Preset::config).unwrap_or_default();
    let mut configs = Vec::new();
    for &z in &args.z_values {
        configs.push(ExperimentConfig {
            name: format!("{}_Z{z}", base.name),
            z: DriveSpec::Constant { value: z },
            ..base.clone()
        });
    }
    for &w in &args.w_values {
        configs.push(ExperimentConfig {
            name: format!("{}_W{w}", base.name),
            w: CouplingSpec::Constant { value: w },
            ..base.clone()
        });
    }
    Ok(configs)
}

fn run_sweep(args: &SweepArgs) -> Result<(), RunError> {
    let configs = sweep_configs(args)?;
    let mode = match args.mode {
        SweepMode::Wave => Mode::Wave,
        SweepMode::Sim => Mode::Sim,
    };
    let rows = sweep(&configs, mode)?;
    let mut text = Vec::new();
    write_sweep(&mut text, &rows)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep_summary.csv"), &text)?;
    }
    io::stdout().write_all(&text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Matrix(a) => run_mode(a, Mode::Matrix),
        Command::Bump(a) => run_mode(a, Mode::Bump),
        Command::Wave(a) => run_mode(a, Mode::Wave),
        Command::Sim(a) => run_mode(a, Mode::Sim),
        Command::Sweep(a) => run_sweep(a),
        Command::Verify => {
            let checks = run_checks();
            print!("{}", format_table(&checks));
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(RunError::Solver("oracle checks failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.class(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
