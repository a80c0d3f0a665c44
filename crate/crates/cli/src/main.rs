use blochpaw::commands::{
    cmd_bench, cmd_estimate, cmd_factorize, cmd_synth, cmd_validate, cmd_verify, BenchSettings, BitOverrides, CliError,
    EstimateSettings, Format, Outcome, PolicyOverrides, SynthSettings, VerifySettings,
};
use blochpaw_core::bench::Axis;
use blochpaw_core::dataset::{Profile, SynthSizes, TruncationPolicy};
use blochpaw_core::kspace::KernelKind;
use blochpaw_core::MEV_IN_HARTREE;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

/// Resource estimates for Bloch-orbital PAW Hamiltonians.
#[derive(Parser)]
#[command(name = "blochpaw", version)]
struct Cli {
    /// Worker threads for parallel work (bench points).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ThresholdArgs {
    /// Density Fourier coefficient cut (accepts `inf`).
    #[arg(long = "threshold-density")]
    density: Option<f64>,
    /// D-tensor entry cut.
    #[arg(long = "threshold-d")]
    d: Option<f64>,
    /// C-tensor entry and eigenvalue cut.
    #[arg(long = "threshold-c")]
    c: Option<f64>,
    /// One-body and pair-block eigenvalue cut.
    #[arg(long = "threshold-eig")]
    eig: Option<f64>,
}

impl ThresholdArgs {
    fn overrides(&self) -> PolicyOverrides {
        PolicyOverrides { density: self.density, d: self.d, c: self.c, eig: self.eig }
    }
}

#[derive(Args)]
struct BitArgs {
    /// Amplitude-amplification rotation bits b_r.
    #[arg(long = "b-rot")]
    b_rot: Option<u64>,
    /// Outer keep-register bits.
    #[arg(long)]
    n1: Option<u64>,
    /// Inner keep-register bits.
    #[arg(long)]
    n2: Option<u64>,
    /// Givens-angle bits B.
    #[arg(long = "angle-bits")]
    angle_bits: Option<u64>,
}

impl BitArgs {
    fn overrides(&self) -> BitOverrides {
        BitOverrides { b_r: self.b_rot, n1: self.n1, n2: self.n2, angle_bits: self.angle_bits }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    /// Tabulated when the dataset carries a table, bare otherwise.
    Auto,
    /// 1/|G+Q|² with the G+Q = 0 mode removed.
    Bare,
    /// The dataset's kernel_table.
    Tabulated,
}

impl KernelArg {
    fn kind(self) -> Option<KernelKind> {
        match self {
            KernelArg::Auto => None,
            KernelArg::Bare => Some(KernelKind::BareZeroModeRemoved),
            KernelArg::Tabulated => Some(KernelKind::Tabulated),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Nb,
    Nk,
    Na,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Flat,
    Physical,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset file and list every finding.
    Validate {
        #[arg(long)]
        dataset: PathBuf,
        /// Write the diagnostics here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncate, factorize and cost a dataset.
    Estimate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// QPE precision in Hartree (default 1 meV).
        #[arg(long = "epsilon-qpe", default_value_t = MEV_IN_HARTREE)]
        epsilon_qpe: f64,
        #[arg(long, value_enum, default_value = "auto")]
        kernel: KernelArg,
        /// Leave the on-site sign qubit out of the data register.
        #[arg(long = "no-sign-qubit")]
        no_sign_qubit: bool,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        bits: BitArgs,
    },
    /// Write the LCU factorization of a dataset as JSON.
    Factorize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        kernel: KernelArg,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Compare a factorization with the dense Fock-space Hamiltonian.
    /// Thresholds default to zero here.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        /// Check this factorization file instead of computing one.
        #[arg(long)]
        factorization: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        kernel: KernelArg,
        /// Largest accepted matrix and spectrum difference, Hartree.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Grow synthetic systems along one axis and fit power laws.
    Bench {
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// Comma-separated sizes (default depends on the axis).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Directory for scaling_<axis>.csv and scaling_<axis>_fit.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// QPE precision in Hartree (default 1 meV).
        #[arg(long = "epsilon-qpe")]
        epsilon_qpe: Option<f64>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        bits: BitArgs,
    },
    /// Write a pseudo-random dataset.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// k-point mesh, e.g. 2,2,2.
        #[arg(long, value_parser = parse_mesh, default_value = "1,1,1")]
        mesh: [usize; 3],
        #[arg(long = "n-b", default_value_t = 2)]
        n_b: usize,
        #[arg(long = "n-atoms", default_value_t = 1)]
        n_atoms: usize,
        #[arg(long = "n-a", default_value_t = 2)]
        n_a: usize,
        #[arg(long = "n-pw", default_value_t = 4)]
        n_pw: usize,
        #[arg(long, value_enum, default_value = "physical")]
        profile: ProfileArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mesh(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(|e| format!("{x:?}: {e}"))).collect::<Result<_, _>>()?;
    <[usize; 3]>::try_from(v).map_err(|v| format!("expected three comma-separated sizes, got {}", v.len()))
}

fn emit(outcome: Outcome, out: Option<&PathBuf>) -> Result<i32, CliError> {
    match out {
        Some(p) => blochpaw::io::write_text(p, &outcome.text)?,
        None => print!("{}", outcome.text),
    }
    Ok(outcome.code)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { dataset, out } => emit(cmd_validate(&dataset)?, out.as_ref()),
        Command::Estimate { dataset, out, format, epsilon_qpe, kernel, no_sign_qubit, thresholds, bits } => {
            let s = EstimateSettings {
                kernel: kernel.kind(),
                policy: thresholds.overrides().apply(TruncationPolicy::default()),
                bits: bits.overrides(),
                epsilon_qpe,
                sign_qubit: !no_sign_qubit,
            };
            let format = match format {
                FormatArg::Json => Format::Json,
                FormatArg::Csv => Format::Csv,
            };
            emit(cmd_estimate(&dataset, &s, format)?, out.as_ref())
        }
        Command::Factorize { dataset, out, kernel, thresholds } => {
            let policy = thresholds.overrides().apply(TruncationPolicy::default());
            emit(cmd_factorize(&dataset, kernel.kind(), &policy)?, out.as_ref())
        }
        Command::Verify { dataset, factorization, out, kernel, tolerance, thresholds } => {
            let s = VerifySettings {
                kernel: kernel.kind(),
                policy: thresholds.overrides().apply(TruncationPolicy::zero()),
                tolerance,
            };
            emit(cmd_verify(&dataset, factorization.as_deref(), &s)?, out.as_ref())
        }
        Command::Bench { axis, sizes, seed, out, epsilon_qpe, thresholds, bits } => {
            let axis = match axis {
                AxisArg::Nb => Axis::Nb,
                AxisArg::Nk => Axis::Nk,
                AxisArg::Na => Axis::Na,
            };
            let s = BenchSettings {
                axis,
                sizes,
                seed,
                threads: cli.threads,
                policy: thresholds.overrides(),
                bits: bits.overrides(),
                epsilon_qpe,
            };
            emit(cmd_bench(&s, &out)?, None)
        }
        Command::Synth { seed, mesh, n_b, n_atoms, n_a, n_pw, profile, out } => {
            let profile = match profile {
                ProfileArg::Flat => Profile::Flat,
                ProfileArg::Physical => Profile::Physical,
            };
            let sizes = SynthSizes { mesh, n_b, n_atoms, n_a, n_pw };
            emit(cmd_synth(&SynthSettings { seed, sizes, profile }, &out)?, None)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
