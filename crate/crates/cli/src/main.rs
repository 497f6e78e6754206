//! `marsense` command-line driver.

mod args;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use marsense::edge::MapFormat;
use marsense::harness::{
    compare_fig6, reproduce_table1, reproduce_table2, run_single, sweep_eta1, sweep_eta2, write_rows_csv,
    ExperimentSpec, ImageSource, OutputFormat, ResultRow, RunSpec, StrategySpec,
};
use marsense::image::{load_image, save_image};
use marsense::mask::MeasurementFormat;
use marsense::{acquire, apply_mask, quality, recover, AdaptiveBudget, InitMode, Measurements, MorphOp};
use serde_json::json;

use args::{Cli, Command, Common};

pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<marsense::Error> for CliError {
    fn from(e: marsense::Error) -> Self {
        match e {
            marsense::Error::InvalidArgument(_) => CliError::Usage(e.to_string()),
            marsense::Error::Numerical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_or_usage<T: std::str::FromStr<Err = marsense::Error>>(s: &str) -> Result<T, CliError> {
    s.parse().map_err(|e: marsense::Error| usage(e.to_string()))
}

/// Resolved options with subcommand-specific defaults applied.
struct Options {
    spec: ExperimentSpec,
    eta1: Vec<f64>,
    eta2: Vec<f64>,
    morph: MorphOp,
}

fn resolve(common: &Common, default_images: &[&str], default_eta1: &[f64]) -> Result<Options, CliError> {
    let images = if common.image.is_empty() {
        default_images.iter().map(|s| s.to_string()).collect()
    } else {
        common.image.clone()
    };
    let images = images
        .iter()
        .map(|s| parse_or_usage::<ImageSource>(s))
        .collect::<Result<Vec<_>, _>>()?;
    let morph = match &common.morph {
        Some(m) => parse_or_usage::<MorphOp>(m)?,
        None => MorphOp::Dilate,
    };
    let labels = if common.strategy.is_empty() {
        vec!["random".to_string(), "mar".to_string()]
    } else {
        common.strategy.clone()
    };
    let strategies = labels
        .iter()
        .map(|l| StrategySpec::parse(l, morph).map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let eta1 = if common.eta1.is_empty() {
        default_eta1.to_vec()
    } else {
        common.eta1.clone()
    };
    if !common.eta2.is_empty() && common.edge_budget.is_some() {
        return Err(usage("--eta2 and --edge-budget are mutually exclusive"));
    }

    let mut spec = ExperimentSpec {
        images,
        strategies,
        eta1_grid: eta1.clone(),
        eta2_grid: common.eta2.clone(),
        seeds: if common.seed.is_empty() { vec![0] } else { common.seed.clone() },
        out_dir: common.out.clone(),
        format: match &common.format {
            Some(f) => parse_or_usage::<OutputFormat>(f)?,
            None => OutputFormat::Csv,
        },
        persist_artifacts: common.out.is_some(),
        ..ExperimentSpec::default()
    };
    let acq = &mut spec.acquisition;
    acq.morph = morph;
    acq.seed = spec.seeds[0];
    acq.target_eta1 = eta1.first().copied().unwrap_or(acq.target_eta1);
    if let Some(f) = common.factor {
        acq.downsample_factor = f;
    }
    if let Some(b) = common.edge_budget {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(usage(format!("edge budget {b} must be non-negative")));
        }
        acq.adaptive = if b < 1.0 {
            AdaptiveBudget::EdgeFraction(b)
        } else {
            AdaptiveBudget::EdgePixels(b as usize)
        };
    } else if let [e] = common.eta2[..] {
        acq.adaptive = AdaptiveBudget::Eta2(e);
    }
    if let Some(a) = common.alpha {
        spec.recovery.alpha = a;
    }
    if let Some(i) = common.iters {
        spec.recovery.max_iters = i;
    }
    spec.validate()?;
    Ok(Options {
        spec,
        eta2: common.eta2.clone(),
        eta1,
        morph,
    })
}

fn emit_rows(rows: &[ResultRow], format: OutputFormat) -> Result<(), CliError> {
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match format {
        OutputFormat::Csv => {
            let _ = write_rows_csv(rows, &mut lock);
        }
        OutputFormat::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(|e| CliError::Data(e.to_string()))?;
            let _ = writeln!(lock, "{text}");
        }
    }
    Ok(())
}

fn emit_json(value: serde_json::Value) {
    // a closed pipe (e.g. `| head`) is not an error worth reporting
    let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&value).expect("json value"));
}

fn notices(list: &[String]) {
    for n in list {
        eprintln!("note: {n}");
    }
}

fn require_out(common: &Common, what: &str) -> Result<PathBuf, CliError> {
    let dir = common.out.clone().ok_or_else(|| usage(format!("{what} needs --out <dir>")))?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn measurement_format(format: OutputFormat) -> (MeasurementFormat, &'static str) {
    match format {
        OutputFormat::Csv => (MeasurementFormat::Binary, "measurements.bin"),
        OutputFormat::Json => (MeasurementFormat::Json, "measurements.json"),
    }
}

fn sample(common: &Common) -> Result<(), CliError> {
    let opts = resolve(common, &["phantom"], &[0.3])?;
    let dir = require_out(common, "sample")?;
    let strategy = opts.spec.strategies[0];
    if strategy == StrategySpec::StandardCs {
        return Err(usage("standard_cs has no sampling mask"));
    }
    let image = opts.spec.images[0].load()?;
    let cfg = strategy.acquisition(&opts.spec.acquisition);
    let bundle = acquire(&image, &cfg)?;
    for (name, mask) in [("s_l", &bundle.s_l), ("s_a", &bundle.s_a), ("s_r", &bundle.s_r), ("s_m", &bundle.s_m)] {
        mask.map.save(dir.join(format!("{name}.pbm")), MapFormat::Pbm)?;
    }
    let meas = apply_mask(&image, &bundle.s_m)?;
    let (fmt, name) = measurement_format(opts.spec.format);
    meas.save(dir.join(name), fmt)?;
    emit_json(json!({
        "image": opts.spec.images[0].name(),
        "strategy": strategy.label(),
        "morph": opts.morph.name(),
        "eta1": bundle.eta1,
        "eta2": bundle.eta2,
        "samples": bundle.s_m.popcount(),
        "measurements": dir.join(name),
    }));
    Ok(())
}

fn recover_cmd(common: &Common, path: &Path) -> Result<(), CliError> {
    let opts = resolve(common, &["phantom"], &[0.3])?;
    let meas = Measurements::load(path)?;
    let res = recover(&meas, &opts.spec.recovery, InitMode::MeanFill)?;
    let mut report = json!({
        "iterations": res.iterations,
        "converged": res.converged,
        "objective": res.trace.last().map(|r| r.objective),
        "final_grad_norm": res.final_grad_norm,
    });
    if !common.image.is_empty() {
        let q = quality(&opts.spec.images[0].load()?, &res.image)?;
        report["psnr_db"] = json!(q.psnr_db);
        report["ssim"] = json!(q.ssim);
    }
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        save_image(&res.image, dir.join("recovered.pgm"))?;
        res.write_trace_csv(dir.join("trace.csv"))?;
        report["recovered"] = json!(dir.join("recovered.pgm"));
    }
    emit_json(report);
    Ok(())
}

fn eval(common: &Common, recovered: Option<&Path>) -> Result<(), CliError> {
    let opts = resolve(common, &["phantom"], &[0.3])?;
    let src = &opts.spec.images[0];
    if let Some(path) = recovered {
        let q = quality(&src.load()?, &load_image(path)?)?;
        emit_json(json!({ "image": src.name(), "mse": q.mse, "psnr_db": q.psnr_db, "ssim": q.ssim }));
        return Ok(());
    }
    let run = RunSpec {
        image: src.clone(),
        strategy: opts.spec.strategies[0],
        eta1: opts.eta1[0],
        adaptive: opts.spec.acquisition.adaptive,
        seed: opts.spec.seeds[0],
    };
    let out = run_single(&opts.spec, &run)?;
    emit_rows(&[out.row], opts.spec.format)
}

fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Sample(c) => sample(c),
        Command::Recover { common, measurements } => recover_cmd(common, measurements),
        Command::Eval { common, recovered } => eval(common, recovered.as_deref()),
        Command::SweepEta1(c) => {
            let opts = resolve(c, &["phantom"], &[0.2, 0.3, 0.4, 0.5])?;
            emit_rows(&sweep_eta1(&opts.spec)?, opts.spec.format)
        }
        Command::SweepEta2(c) => {
            let mut opts = resolve(c, &["phantom"], &[marsense::harness::TABLE2_ETA1])?;
            if opts.eta2.is_empty() {
                opts.spec.eta2_grid = marsense::harness::TABLE2_ETA2_GRID.to_vec();
            }
            if c.strategy.is_empty() {
                opts.spec.strategies = vec![StrategySpec::parse("mar", opts.morph)?];
            }
            emit_rows(&sweep_eta2(&opts.spec)?, opts.spec.format)
        }
        Command::Table1(c) => {
            let opts = resolve(c, &["phantom"], &[0.3])?;
            let (rows, skipped) = reproduce_table1(&opts.spec)?;
            notices(&skipped);
            emit_rows(&rows, opts.spec.format)
        }
        Command::Table2(c) => {
            let mut opts = resolve(c, &["phantom"], &[marsense::harness::TABLE2_ETA1])?;
            if c.eta1.is_empty() {
                opts.spec.acquisition.target_eta1 = marsense::harness::TABLE2_ETA1;
            }
            let (rows, skipped) = reproduce_table2(&opts.spec)?;
            notices(&skipped);
            emit_rows(&rows, opts.spec.format)
        }
        Command::Fig6(c) => {
            let mut opts = resolve(c, &["ball"], &[0.3])?;
            if c.seed.is_empty() {
                opts.spec.seeds = vec![0, 1];
            }
            let report = compare_fig6(&opts.spec)?;
            for (seed, ok) in &report.ordered {
                eprintln!("seed {seed}: standard_cs < random < mar {}", if *ok { "holds" } else { "does not hold" });
            }
            emit_rows(&report.rows, opts.spec.format)
        }
    }
}

fn main() -> ExitCode {
    let mut cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let common = cli.command.common_mut();
    if let Some(path) = common.config.clone() {
        if let Err(e) = config::merge_file(common, &path) {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.exit_code());
        }
    }
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
