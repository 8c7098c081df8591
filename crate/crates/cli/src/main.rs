use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use specgap::survey::{fit_levels, write_samples_csv, Provenance};
use specgap::{
    read_levels_csv, run_survey, theory_report, write_levels_csv, SurveyError, SurveyOptions,
    SurveyResult, TheoryReport, UniformMesh,
};

mod config;
mod svg;

use config::{Overrides, RunConfig};

const TOOL: &str = concat!("specgap ", env!("CARGO_PKG_VERSION"));

#[derive(Parser)]
#[command(
    name = "specgap",
    version,
    about = "Spectral gap surveys for a 1D random-coefficient eigenproblem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a gap survey and write the levels table (and optional plot).
    Survey(SurveyArgs),
    /// Print the a priori bounds for a configuration as JSON.
    Theory(TheoryArgs),
    /// Dump the first lattice points as CSV.
    Points(PointsArgs),
    /// Refit the power law on the diff column of a levels CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, short)]
    config: PathBuf,
    /// Seed for the random shift.
    #[arg(long)]
    seed: Option<u64>,
    /// Generating vector file (overrides the config).
    #[arg(long)]
    genvec: Option<PathBuf>,
    /// Use the unshifted lattice.
    #[arg(long)]
    no_shift: bool,
    /// Override `qmc.m_max`.
    #[arg(long)]
    m_max: Option<u32>,
}

impl Common {
    fn load(&self, dump_gaps: Option<PathBuf>) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        config.apply(&Overrides {
            seed: self.seed,
            genvec: self.genvec.clone(),
            m_max: self.m_max,
            dump_gaps,
        });
        Ok(config)
    }
}

#[derive(Args)]
struct SurveyArgs {
    #[command(flatten)]
    common: Common,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write every sample to this CSV.
    #[arg(long)]
    dump_gaps: Option<PathBuf>,
    /// Levels CSV path (overrides `output.levels_csv`).
    #[arg(long)]
    levels: Option<PathBuf>,
    /// SVG path (overrides `output.svg`).
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Summability exponent for the Lipschitz constants, in (1/2, 1).
    #[arg(long, default_value_t = 0.75)]
    p: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PointsArgs {
    #[command(flatten)]
    common: Common,
    /// Number of points, at most 2^m_max.
    #[arg(long)]
    count: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    levels_csv: PathBuf,
}

/// Distinguishes a failed sample under the strict policy from other errors.
#[derive(Debug)]
struct SampleFailed(String);

impl std::fmt::Display for SampleFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SampleFailed {}

fn header(provenance: &Provenance) -> Vec<String> {
    let mut lines = vec![format!("tool={TOOL}")];
    lines.extend(provenance.header_lines());
    lines
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => ensure_parent(path).and_then(|()| {
            fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
        }),
        None => Ok(writeln!(io::stdout().lock(), "{text}")?),
    }
}

#[derive(Serialize)]
struct SurveyReport<'a> {
    tool: &'static str,
    delta_star: f64,
    #[serde(flatten)]
    result: &'a SurveyResult,
}

fn cmd_survey(args: SurveyArgs) -> Result<()> {
    let config = args.common.load(args.dump_gaps.clone())?;
    let survey = config.survey_config(args.common.no_shift)?;
    let dump = config.survey.dump_gaps.clone();
    let options = SurveyOptions {
        workers: args.workers,
        keep_samples: dump.is_some(),
    };
    let result = match run_survey(&survey, &options) {
        Ok(r) => r,
        Err(SurveyError::SampleFailed(f)) => {
            return Err(SampleFailed(format!(
                "sample {} failed ({:?}): {}; rerun with fail_policy \"record\" to skip failures",
                f.index, f.kind, f.reason
            ))
            .into())
        }
        Err(e) => return Err(e.into()),
    };
    let header = header(&result.provenance);

    let levels_path = args
        .levels
        .or(config.output.levels_csv.clone())
        .unwrap_or_else(|| PathBuf::from("levels.csv"));
    ensure_parent(&levels_path)?;
    write_levels_csv(&levels_path, &result.levels, &header)?;
    if let (Some(path), Some(samples)) = (&dump, &result.samples) {
        ensure_parent(path)?;
        write_samples_csv(path, samples, &header)?;
    }
    if let Some(path) = args.svg.or(config.output.svg.clone()) {
        let title = format!(
            "{} c0={} s={} h=1/{}",
            survey.model.family(),
            survey.model.c0(),
            survey.model.dimension(),
            survey.mesh_cells
        );
        let text = svg::render(&result.levels, result.fit.as_ref(), &title, &header);
        ensure_parent(&path)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &config.output.report_json {
        write_json(
            &SurveyReport {
                tool: TOOL,
                delta_star: result.delta_star(),
                result: &result,
            },
            Some(path),
        )?;
    }

    let mut out = io::stdout().lock();
    writeln!(out, "levels: {}", levels_path.display())?;
    writeln!(
        out,
        "delta_N* = {} (N* = {}, argmin index {})",
        result.delta_star(),
        result.n_star,
        result.levels.last().map_or(0, |l| l.argmin_index)
    )?;
    match &result.fit {
        Some(f) => writeln!(
            out,
            "fit: alpha = {} beta = {} ({} points)",
            f.alpha, f.beta, f.used
        )?,
        None => writeln!(out, "fit: none (fewer than 2 positive diffs)")?,
    }
    if result.failed > 0 {
        writeln!(
            out,
            "failed samples: {} (excluded from the minimum)",
            result.failed
        )?;
    }
    if result.clustered > 0 {
        writeln!(out, "clustered samples: {}", result.clustered)?;
    }
    if let Some(a) = &result.audit {
        writeln!(
            out,
            "residual audit: {} checked, {} failed, max relative residual {:e}",
            a.checked, a.failed, a.max_relative_residual
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TheoryOutput {
    tool: &'static str,
    config_sha256: Option<String>,
    mesh_cells: usize,
    #[serde(flatten)]
    report: TheoryReport,
}

fn cmd_theory(args: TheoryArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let model = config.model()?;
    let mesh = UniformMesh::new(config.mesh.n).context("field `mesh.n`")?;
    let report = theory_report(&model, &mesh, args.p, &[0.5, 0.6, 0.75, 0.9, 1.0])?;
    let output = TheoryOutput {
        tool: TOOL,
        config_sha256: config
            .survey_config(false)
            .and_then(|c| Ok(c.fingerprint()?))
            .ok(),
        mesh_cells: mesh.cells(),
        report,
    };
    write_json(&output, args.out.as_deref())
}

fn cmd_points(args: PointsArgs) -> Result<()> {
    let config = args.common.load(None)?;
    let survey = config.survey_config(args.common.no_shift)?;
    let lattice = survey.lattice()?;
    if args.count > lattice.len() {
        bail!(
            "--count {} exceeds the 2^{} = {} points of the lattice",
            args.count,
            lattice.m_max(),
            lattice.len()
        );
    }
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(ensure_parent(path).and_then(|()| {
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))
        })?),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = io::BufWriter::new(sink);
    writeln!(sink, "# tool={TOOL}")?;
    writeln!(sink, "# config_sha256={}", survey.fingerprint()?)?;
    writeln!(sink, "# genvec_sha256={}", lattice.checksum())?;
    writeln!(sink, "# shift={:?}", lattice.shift_spec())?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(sink);
    w.write_record((1..=lattice.dimension()).map(|j| format!("y{j}")))?;
    for i in 0..args.count {
        w.serialize(lattice.lattice_point(i)?.as_slice())?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let levels = read_levels_csv(&args.levels_csv)?;
    let fit =
        fit_levels(&levels).with_context(|| format!("fitting {}", args.levels_csv.display()))?;
    let mut out = io::stdout().lock();
    writeln!(out, "alpha = {} beta = {}", fit.alpha, fit.beta)?;
    writeln!(
        out,
        "points used = {} filtered = {} residual_ss = {}",
        fit.used, fit.filtered, fit.residual_ss
    )?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Survey(a) => cmd_survey(a),
        Command::Theory(a) => cmd_theory(a),
        Command::Points(a) => cmd_points(a),
        Command::Fit(a) => cmd_fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<SampleFailed>() {
                ExitCode::from(3)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
