//! `mpsenet`: enhance, analyze, verify and sweep from the command line.
//!
//! Exit codes: 0 success, 1 failed verification or rejected data, 2 usage or
//! I/O error.

mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use mpsenet::nn::{init_random, save_weights, TaskHead};
use mpsenet::synth::{synthesize, SignalKind};
use mpsenet::sweep::{default_grid, parse_grid, rows_to_csv, run_sweep};
use mpsenet::verify::{run_suite, Suite};
use mpsenet::{analyze_pair, load_weights, prepare_narrowband, wav, ModelConfig, MpSeNet, SnrSweepSpec, Stft};

use settings::FileConfig;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn failed(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<mpsenet::Error> for Failure {
    fn from(e: mpsenet::Error) -> Self {
        use mpsenet::Error as E;
        let code = match e {
            E::Io { .. } | E::Wav(_) | E::InvalidArgument(_) | E::InvalidConfig(_) | E::UnsupportedFactor(_) => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser, Debug)]
#[command(name = "mpsenet", version, about = "Parallel magnitude and phase speech enhancement")]
struct Cli {
    /// Flat key=value file; flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enhance a 16 kHz mono PCM16 WAV file.
    Enhance {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Option<Task>,
    },
    /// Metrics and losses of an estimate against a reference.
    Analyze {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
        /// Print a CSV header and row instead of key=value lines.
        #[arg(long)]
        csv: bool,
    },
    /// Run a property suite; exits 1 if any check fails.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Replace every check's tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Mix, enhance and score over an SNR grid; writes CSV.
    SweepSnr {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// start:stop:step in dB
        #[arg(long)]
        grid: Option<String>,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a deterministic fixture signal.
    Synth {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        seconds: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decimate and spline-interpolate back to 16 kHz.
    PrepareBwe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        factor: usize,
    },
    /// Write a randomly initialized weight directory.
    InitWeights {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "denoise")]
        task: Task,
        #[arg(long, default_value_t = 64)]
        channels: usize,
        #[arg(long, default_value_t = 4)]
        blocks: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Denoise,
    Dereverb,
    Bwe,
}

impl Task {
    fn head(self) -> TaskHead {
        match self {
            Task::Bwe => TaskHead::UnboundedMask,
            Task::Denoise | Task::Dereverb => TaskHead::BoundedMask,
        }
    }

    fn parse(s: &str) -> Result<Self, Failure> {
        <Task as ValueEnum>::from_str(s, true).map_err(|_| Failure::usage(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Roundtrip,
    Gradcheck,
    Invariants,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Tone,
    Sweep,
    Noise,
}

fn load_model(dir: &Path, task: Task) -> Result<MpSeNet, Failure> {
    if !dir.exists() {
        return Err(Failure::usage(format!("weights not found: {}", dir.display())));
    }
    let (cfg, store) = load_weights(dir)?;
    if cfg.task_head != task.head() {
        return Err(Failure::usage(format!(
            "task {task:?} needs a {} model, but {} holds {}",
            task.head().as_str(),
            dir.display(),
            cfg.task_head.as_str()
        )));
    }
    Ok(MpSeNet::new(cfg, store)?)
}

fn enhance(file: &FileConfig, input: &Path, out: &Path, weights: Option<PathBuf>, task: Option<Task>) -> CmdResult {
    let task = match task {
        Some(t) => t,
        None => file.get("task").map(Task::parse).transpose()?.unwrap_or(Task::Denoise),
    };
    let model = load_model(&file.weights(weights)?, task)?;
    let stft = Stft::new(&file.stft()?)?;
    let noisy = wav::read(input)?;
    let start = Instant::now();
    let enhanced = model.forward(&noisy, &stft)?;
    let secs = start.elapsed().as_secs_f64();
    wav::write(out, &enhanced.waveform)?;
    println!(
        "{} -> {}: {:.2} s of audio in {:.2} s",
        input.display(),
        out.display(),
        noisy.duration_secs(),
        secs
    );
    Ok(())
}

fn analyze(file: &FileConfig, reference: &Path, est: &Path, csv: bool) -> CmdResult {
    let r = wav::read(reference)?;
    let e = wav::read(est)?;
    let report = analyze_pair(&r, &e, &file.stft()?)?;
    print!("{}", if csv { report.to_csv() } else { report.to_text() });
    Ok(())
}

fn verify(file: &FileConfig, suite: SuiteArg, seed: Option<u64>, tolerance: Option<f64>) -> CmdResult {
    let suite = match suite {
        SuiteArg::Roundtrip => Suite::Roundtrip,
        SuiteArg::Gradcheck => Suite::Gradcheck,
        SuiteArg::Invariants => Suite::Invariants,
    };
    let report = run_suite(suite, file.seed(seed)?, tolerance)?;
    print!("{}", report.to_text());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::failed(format!("suite {} failed", suite.name())))
    }
}

fn sweep_snr(
    file: &FileConfig,
    clean: &Path,
    noise: &Path,
    weights: Option<PathBuf>,
    grid: Option<String>,
    out: Option<PathBuf>,
) -> CmdResult {
    let points = match grid.as_deref().or(file.get("grid")) {
        Some(g) => parse_grid(g)?,
        None => default_grid(),
    };
    let model = load_model(&file.weights(weights)?, Task::Denoise)?;
    let stft = Stft::new(&file.stft()?)?;
    let spec = SnrSweepSpec::new(wav::read(clean)?, wav::read(noise)?, points)?;
    let rows = run_sweep(&spec, &stft, |noisy| Ok(model.forward(noisy, &stft)?.waveform))?;
    let csv = rows_to_csv(&rows);
    match out {
        Some(p) => std::fs::write(&p, csv).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn synth(file: &FileConfig, kind: Kind, seconds: f64, seed: Option<u64>, out: &Path) -> CmdResult {
    let kind = match kind {
        Kind::Tone => SignalKind::Tone,
        Kind::Sweep => SignalKind::Sweep,
        Kind::Noise => SignalKind::Noise,
    };
    let w = synthesize(kind, seconds, file.seed(seed)?).map_err(|e| Failure::usage(e.to_string()))?;
    wav::write(out, &w)?;
    Ok(())
}

fn prepare_bwe(input: &Path, out: &Path, factor: usize) -> CmdResult {
    let w = wav::read(input)?;
    wav::write(out, &prepare_narrowband(&w, factor)?)?;
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Enhance { input, out, weights, task } => enhance(&file, &input, &out, weights, task),
        Command::Analyze { reference, est, csv } => analyze(&file, &reference, &est, csv),
        Command::Verify { suite, seed, tolerance } => verify(&file, suite, seed, tolerance),
        Command::SweepSnr { clean, noise, weights, grid, out } => sweep_snr(&file, &clean, &noise, weights, grid, out),
        Command::Synth { kind, seconds, seed, out } => synth(&file, kind, seconds, seed, &out),
        Command::PrepareBwe { input, out, factor } => prepare_bwe(&input, &out, factor),
        Command::InitWeights { out, seed, task, channels, blocks, heads } => {
            let cfg = ModelConfig { channels, n_blocks: blocks, n_heads: heads, ..ModelConfig::default() }
                .with_task_head(task.head());
            cfg.validate()?;
            let store = init_random(&cfg, file.seed(seed)?)?;
            save_weights(&store, &cfg, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MPSE_LOG", "error")).init();
    let cli = Cli::parse();
    log::debug!("{cli:?}");
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
