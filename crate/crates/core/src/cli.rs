//! `cgh` command line: `optimize`, `compare` and `simulate`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::field::AmplitudeImage;
use crate::imageio::{self, Series};
use crate::loss::LossKind;
use crate::pipeline::{
    self, OptimizerKind, ReconModel, Reconstruction, RunConfig, RunRecord, Scaling, StepRule,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATAERR: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IOERR: i32 = 74;

#[derive(Debug, Parser)]
#[command(
    name = "cgh",
    version,
    about = "Phase-only Fraunhofer hologram optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one hologram for a target image.
    Optimize(OptimizeArgs),
    /// Run all four optimizer/loss combinations from the same initial hologram.
    Compare(CompareArgs),
    /// Simulate the replay field of a saved hologram.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptArg {
    Adam,
    Lbfgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LossArg {
    Mse,
    Ce,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReconArg {
    Intensity,
    Amplitude,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScalingArg {
    None,
    Energy,
}

impl From<ReconArg> for ReconModel {
    fn from(r: ReconArg) -> Self {
        match r {
            ReconArg::Intensity => ReconModel::Intensity,
            ReconArg::Amplitude => ReconModel::Amplitude,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Target image (PNG or binary PGM).
    #[arg(long)]
    target: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Square size `N`, or `WIDTHxHEIGHT`.
    #[arg(long, default_value = "128", value_parser = parse_size)]
    size: (usize, usize),
    /// L-BFGS curvature-pair history.
    #[arg(long, default_value_t = 20)]
    history: usize,
    #[arg(long, value_enum, default_value_t = ReconArg::Intensity)]
    recon: ReconArg,
    #[arg(long, value_enum, default_value_t = ScalingArg::None)]
    scaling: ScalingArg,
    /// Strong-Wolfe line search for L-BFGS instead of the fixed step.
    #[arg(long)]
    line_search: bool,
    /// Average the target with its 180° rotation first.
    #[arg(long)]
    symmetric: bool,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum)]
    optimizer: OptArg,
    #[arg(long, value_enum)]
    loss: LossArg,
    /// Also write the {0, π}-quantized hologram and its replay field.
    #[arg(long)]
    binary: bool,
    /// Write the reconstruction every N iterations (0 = never).
    #[arg(long, default_value_t = 0)]
    save_every: usize,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Write each run's reconstruction every N iterations (0 = never).
    #[arg(long, default_value_t = 20)]
    save_every: usize,
    /// Run the four combinations on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Hologram in .holophs format.
    #[arg(long)]
    phase: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Quantize to {0, π} before propagating.
    #[arg(long)]
    binary: bool,
    #[arg(long, value_enum, default_value_t = ReconArg::Intensity)]
    recon: ReconArg,
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|_| format!("invalid size '{s}'"))
    };
    let (h, w) = match s.split_once(['x', 'X']) {
        Some((w, h)) => (parse(h)?, parse(w)?),
        None => {
            let n = parse(s)?;
            (n, n)
        }
    };
    if h < 2 || w < 2 {
        return Err(format!("size must be at least 2x2, got '{s}'"));
    }
    Ok((h, w))
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) => EXIT_USAGE,
        Error::Format { .. } => EXIT_DATAERR,
        Error::Io { .. } | Error::Image { .. } => EXIT_IOERR,
        Error::Shape { .. } | Error::Length { .. } | Error::Numeric { .. } => EXIT_SOFTWARE,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => cmd_optimize(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn reconstruction(args: &RunArgs) -> Reconstruction {
    Reconstruction {
        model: args.recon.into(),
        scaling: match args.scaling {
            ScalingArg::None => Scaling::None,
            ScalingArg::Energy => Scaling::Energy,
        },
    }
}

fn base_config(args: &RunArgs, optimizer: OptimizerKind, loss: LossKind) -> RunConfig {
    let mut cfg = RunConfig::new(optimizer, loss, args.size);
    cfg.lr = args.lr;
    cfg.iterations = args.iters;
    cfg.seed = args.seed;
    cfg.lbfgs_history = args.history;
    cfg.reconstruction = reconstruction(args);
    cfg.step_rule = if args.line_search {
        StepRule::StrongWolfe
    } else {
        StepRule::Fixed
    };
    cfg
}

/// Validates flags and loads the target before anything is written.
fn prepare(args: &RunArgs, probe: &RunConfig) -> Result<AmplitudeImage> {
    probe.validate()?;
    let target = imageio::load_target(&args.target, Some(args.size))?;
    let target = if args.symmetric {
        pipeline::symmetrize_target(&target)
    } else {
        target
    };
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    Ok(target)
}

fn write_snapshots(record: &RunRecord, out: &Path, prefix: &str) -> Result<()> {
    for (iter, img) in &record.snapshots {
        imageio::save_image(img, &out.join(format!("{prefix}iter_{iter:04}.png")))?;
    }
    Ok(())
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<i32> {
    let optimizer = match args.optimizer {
        OptArg::Adam => OptimizerKind::Adam,
        OptArg::Lbfgs => OptimizerKind::Lbfgs,
    };
    let loss = match args.loss {
        LossArg::Mse => LossKind::Mse,
        LossArg::Ce => LossKind::Ce,
    };
    let mut cfg = base_config(&args.run, optimizer, loss);
    cfg.save_every = args.save_every;
    let target = prepare(&args.run, &cfg)?;
    let out = &args.run.out;

    let record = pipeline::optimize(&target, &cfg)?;
    let model = cfg.reconstruction.model;
    imageio::save_phase(&record.final_phase, &out.join("final_phase.holophs"))?;
    imageio::save_phase_preview(&record.final_phase, &out.join("phase_preview.png"))?;
    imageio::save_image(
        &pipeline::simulate(&record.final_phase, model)?,
        &out.join("recon.png"),
    )?;
    imageio::write_loss_csv(
        &[
            Series {
                label: "loss",
                values: &record.loss_history,
            },
            Series {
                label: "mse",
                values: &record.mse_history,
            },
        ],
        &out.join("loss.csv"),
    )?;
    write_snapshots(&record, out, "recon_")?;
    if args.binary {
        let binary = pipeline::quantize_binary(&record.final_phase);
        imageio::save_phase(&binary, &out.join("binary_phase.holophs"))?;
        imageio::save_image(
            &pipeline::simulate(&binary, model)?,
            &out.join("binary_recon.png"),
        )?;
    }

    match record.diverged_at {
        Some(iter) => {
            eprintln!("{optimizer}+{loss}: diverged at iteration {iter}");
            Ok(EXIT_DIVERGED)
        }
        None => {
            println!(
                "{optimizer}+{loss}: MSE {:.6} -> {:.6} over {} iterations",
                record.initial_mse().unwrap_or(f64::NAN),
                record.final_mse().unwrap_or(f64::NAN),
                record.mse_history.len()
            );
            Ok(EXIT_OK)
        }
    }
}

/// The four combinations, in `mse_compare.csv` column order.
pub const COMBINATIONS: [(OptimizerKind, LossKind); 4] = [
    (OptimizerKind::Lbfgs, LossKind::Ce),
    (OptimizerKind::Lbfgs, LossKind::Mse),
    (OptimizerKind::Adam, LossKind::Mse),
    (OptimizerKind::Adam, LossKind::Ce),
];

pub fn combination_label(optimizer: OptimizerKind, loss: LossKind) -> String {
    format!("{optimizer}_{loss}")
}

fn status(record: &RunRecord) -> String {
    match record.diverged_at {
        Some(iter) => format!("diverged at iteration {iter}"),
        None if record.converged() => "converged".to_string(),
        None => "did not converge (final MSE not >10% below initial)".to_string(),
    }
}

/// Plain-text report of a comparison.
pub fn summary_text(header: &str, labels: &[String], records: &[RunRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{header}").unwrap();
    writeln!(
        s,
        "{:<10} {:>14} {:>14} {:>9}  status",
        "run", "initial_mse", "final_mse", "rejected"
    )
    .unwrap();
    for (label, r) in labels.iter().zip(records) {
        writeln!(
            s,
            "{:<10} {:>14.8} {:>14.8} {:>9}  {}",
            label,
            r.initial_mse().unwrap_or(f64::NAN),
            r.final_mse().unwrap_or(f64::NAN),
            r.rejected_pairs,
            status(r)
        )
        .unwrap();
    }
    let best = labels
        .iter()
        .zip(records)
        .filter(|(_, r)| !r.diverged())
        .filter_map(|(l, r)| r.final_mse().map(|m| (l, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((label, m)) = best {
        writeln!(s, "lowest final MSE: {label} ({m:.8})").unwrap();
    }
    let failed: Vec<&str> = labels
        .iter()
        .zip(records)
        .filter(|(_, r)| !r.converged())
        .map(|(l, _)| l.as_str())
        .collect();
    if failed.is_empty() {
        writeln!(s, "non-converged: none").unwrap();
    } else {
        writeln!(s, "non-converged: {}", failed.join(", ")).unwrap();
    }
    s
}

fn cmd_compare(args: &CompareArgs) -> Result<i32> {
    let configs: Vec<RunConfig> = COMBINATIONS
        .iter()
        .map(|&(opt, loss)| {
            let mut cfg = base_config(&args.run, opt, loss);
            cfg.save_every = args.save_every;
            cfg
        })
        .collect();
    let target = prepare(&args.run, &configs[0])?;
    let out = &args.run.out;

    let records: Vec<RunRecord> = if args.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = configs
                .iter()
                .map(|cfg| {
                    let target = &target;
                    scope.spawn(move || pipeline::optimize(target, cfg))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("optimizer thread panicked"))
                .collect::<Result<Vec<_>>>()
        })?
    } else {
        configs
            .iter()
            .map(|cfg| pipeline::optimize(&target, cfg))
            .collect::<Result<Vec<_>>>()?
    };

    let labels: Vec<String> = COMBINATIONS
        .iter()
        .map(|&(o, l)| combination_label(o, l))
        .collect();
    let padded: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let mut v = r.mse_history.clone();
            v.resize(args.run.iters, f64::NAN);
            v
        })
        .collect();
    let series: Vec<Series<'_>> = labels
        .iter()
        .zip(&padded)
        .map(|(label, values)| Series { label, values })
        .collect();
    imageio::write_loss_csv(&series, &out.join("mse_compare.csv"))?;

    let model = configs[0].reconstruction.model;
    for (label, r) in labels.iter().zip(&records) {
        imageio::save_image(
            &pipeline::simulate(&r.final_phase, model)?,
            &out.join(format!("{label}_recon.png")),
        )?;
        write_snapshots(r, out, &format!("{label}_"))?;
    }

    let (h, w) = args.run.size;
    let header =
        format!(
        "target {} ({w}x{h}), seed {}, lr {}, iterations {}, history {}, recon {:?}/{:?}, step {}",
        args.run.target.display(),
        args.run.seed,
        args.run.lr,
        args.run.iters,
        args.run.history,
        configs[0].reconstruction.model,
        configs[0].reconstruction.scaling,
        if args.run.line_search { "strong-wolfe" } else { "fixed" },
    );
    let summary = summary_text(&header, &labels, &records);
    fs::write(out.join("summary.txt"), &summary)
        .map_err(|e| Error::io(out.join("summary.txt"), e))?;
    print!("{summary}");

    Ok(if records.iter().all(RunRecord::converged) {
        EXIT_OK
    } else {
        EXIT_DIVERGED
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let phase = imageio::load_phase(&args.phase)?;
    let phase = if args.binary {
        pipeline::quantize_binary(&phase)
    } else {
        phase
    };
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let replay = pipeline::simulate(&phase, args.recon.into())?;
    imageio::save_image(&replay, &args.out.join("replay.png"))?;
    Ok(EXIT_OK)
}
