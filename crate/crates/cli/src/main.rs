//! `ctmc-gsa`: simulate stochastic compartmental models and run
//! sensitivity studies from a TOML configuration.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input or failed
//! validation, 3 runtime failure.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use ctmc_gsa::config::{parse_model_config, ModelConfig};
use ctmc_gsa::output::{self, read_dynamical, read_indices, read_trajectory, IndexRow};
use ctmc_gsa::rng::{SeedVector, UniformStream};
use ctmc_gsa::sim::{trajectory, RepresentationKind, SimOptions};
use ctmc_gsa::study::{run_functional_study, run_scalar_study, welch_test, StudyConfig, StudyError, WelchResult};
use ctmc_gsa::validate::{run_validation, ValidationSettings};
use ctmc_gsa::{svg, Error};

#[derive(Parser, Debug)]
#[command(name = "ctmc-gsa", version, about = "Exact simulation and Sobol' sensitivity analysis of stochastic compartmental models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// Directory receiving the output files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Master seed (1..=1000000000); overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args, Debug, Clone)]
struct StudyArgs {
    /// Model configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Design size per replication.
    #[arg(long)]
    n: Option<usize>,
    /// Number of replications.
    #[arg(long)]
    reps: Option<usize>,
    /// Restrict to these representations (repeatable).
    #[arg(long, value_parser = parse_kind)]
    representation: Vec<RepresentationKind>,
    /// Use the full design size and replication count from the configuration.
    #[arg(long)]
    paper_scale: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate paths at the nominal parameters and write them as CSV.
    Simulate {
        /// Model configuration file (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_kind, default_value = "direct")]
        representation: RepresentationKind,
        /// Final time; defaults to the configuration's horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Number of independent paths.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Check that the four simulators agree in distribution.
    Validate {
        /// Runs per simulator for the distribution comparisons.
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Sobol' indices of the extinction time.
    GsaScalar(StudyArgs),
    /// Dynamical and aggregated Sobol' indices of the compartment curve.
    GsaFunctional(StudyArgs),
    /// Welch tests on total-index numerators of two representations' results.
    CompareReps {
        /// The two representations to compare (given twice).
        #[arg(long, value_parser = parse_kind, default_values = ["first-reaction", "mnrm"])]
        representation: Vec<RepresentationKind>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Render SVG charts from result CSVs in the output directory.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Compartment drawn by trajectory fans.
        #[arg(long, default_value = "I")]
        compartment: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PlotKind {
    /// Boxplots of replicated scalar and aggregated indices.
    Boxplot,
    /// Dynamical indices against time.
    Dynamical,
    /// Trajectory fans.
    Fan,
}

fn parse_kind(s: &str) -> Result<RepresentationKind, String> {
    s.parse()
}

/// Failure classes mapped to exit codes.
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let invalid = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<Error>(),
                Some(
                    Error::Config(_)
                        | Error::Model(_)
                        | Error::Expr(_)
                        | Error::Rng(_)
                        | Error::Study(StudyError::Invalid(_) | StudyError::Gsa(_))
                )
            )
        });
        if invalid {
            Failure::Invalid(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            config,
            representation,
            horizon,
            runs,
            common,
        } => simulate(&config, representation, horizon, runs, &common).map_err(Failure::from),
        Command::Validate { runs, common } => validate(runs, &common),
        Command::GsaScalar(args) => gsa(&args, false).map_err(Failure::from),
        Command::GsaFunctional(args) => gsa(&args, true).map_err(Failure::from),
        Command::CompareReps {
            representation,
            alpha,
            common,
        } => {
            if representation.len() != 2 {
                return Err(Failure::Invalid(anyhow::anyhow!(
                    "compare-reps needs exactly two --representation values"
                )));
            }
            compare(&representation, alpha, &common).map_err(Failure::from)
        }
        Command::Plot {
            kind,
            compartment,
            common,
        } => plot(kind, &compartment, &common).map_err(Failure::from),
    }
}

fn load(path: &Path) -> anyhow::Result<ModelConfig> {
    let src = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_model_config(&src)
        .map_err(Error::from)
        .with_context(|| format!("in {}", path.display()))?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn master_stream(seed: u64) -> anyhow::Result<UniformStream> {
    Ok(UniformStream::from_seed(seed).map_err(Error::from)?)
}

fn simulate(
    config: &Path,
    kind: RepresentationKind,
    horizon: Option<f64>,
    runs: usize,
    common: &Common,
) -> anyhow::Result<()> {
    let cfg = load(config)?;
    let horizon = horizon.or(cfg.horizon).unwrap_or(f64::INFINITY);
    let mut master = master_stream(common.seed.unwrap_or(1))?;
    let slots = kind.seed_slots(cfg.model.n_channels());
    let opts = SimOptions {
        horizon,
        ..SimOptions::default()
    };
    for run in 0..runs {
        let seeds = SeedVector::draw(&mut master, slots);
        let path = trajectory(kind, &cfg.model, &cfg.nominal, &seeds, &opts).map_err(Error::from)?;
        let name = format!("trajectory_{}_{}_{run}.csv", cfg.model.name(), kind);
        output::write_trajectory(create(&common.out_dir, &name)?, cfg.model.compartments(), &path).map_err(Error::from)?;
    }
    Ok(())
}

fn validate(runs: usize, common: &Common) -> Result<(), Failure> {
    let mut settings = ValidationSettings {
        runs,
        ..ValidationSettings::default()
    };
    settings.mean_runs = settings.mean_runs.max(runs);
    if let Some(seed) = common.seed {
        master_stream(seed).map_err(Failure::Invalid)?;
        settings.seed = seed;
    }
    let checks = run_validation(&settings).map_err(|e| Failure::Runtime(Error::from(e).into()))?;
    let write = || -> anyhow::Result<()> {
        output::write_validation(create(&common.out_dir, "validation.csv")?, &checks).map_err(Error::from)?;
        Ok(())
    };
    write().map_err(Failure::Runtime)?;
    for c in &checks {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Failure::Invalid(anyhow::anyhow!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn study_config(args: &StudyArgs) -> anyhow::Result<StudyConfig> {
    let cfg = load(&args.config)?;
    let mut study = cfg
        .study_config(args.paper_scale)
        .with_context(|| format!("{} has no [study] table", args.config.display()))?;
    if let Some(n) = args.n {
        study.n = n;
    }
    if let Some(r) = args.reps {
        study.replications = r;
    }
    if let Some(seed) = args.common.seed {
        master_stream(seed)?;
        study.master_seed = seed;
    }
    if !args.representation.is_empty() {
        study.representations = args.representation.clone();
    }
    Ok(study)
}

fn gsa(args: &StudyArgs, functional: bool) -> anyhow::Result<()> {
    let study = study_config(args)?;
    let dir = &args.common.out_dir;
    if functional {
        let report = run_functional_study(&study).map_err(Error::from)?;
        for r in &report.representations {
            let f = r.functional.as_ref().expect("functional study yields functional results");
            output::write_dynamical(create(dir, &format!("dynamical_{}.csv", r.kind))?, f).map_err(Error::from)?;
            output::write_indices(create(dir, &format!("aggregated_{}.csv", r.kind))?, &report.groups, &f.aggregated)
                .map_err(Error::from)?;
        }
    } else {
        let report = run_scalar_study(&study).map_err(Error::from)?;
        for r in &report.representations {
            let reps = r.scalar.as_ref().expect("scalar study yields scalar results");
            output::write_indices(create(dir, &format!("scalar_{}.csv", r.kind))?, &report.groups, reps)
                .map_err(Error::from)?;
        }
    }
    Ok(())
}

/// Group order of first appearance, with the per-replication values of `pick`.
fn by_group(rows: &[IndexRow], pick: impl Fn(&IndexRow) -> f64) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for row in rows {
        match out.iter_mut().find(|(g, _)| *g == row.group) {
            Some((_, v)) => v.push(pick(row)),
            None => out.push((row.group.clone(), vec![pick(row)])),
        }
    }
    out
}

fn read_index_file(path: &Path) -> anyhow::Result<Vec<IndexRow>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_indices(file).map_err(Error::from).with_context(|| format!("reading {}", path.display()))
}

fn compare(kinds: &[RepresentationKind], alpha: f64, common: &Common) -> anyhow::Result<()> {
    let dir = &common.out_dir;
    let (a, b) = (kinds[0], kinds[1]);
    let mut found = false;
    for prefix in ["scalar", "aggregated"] {
        let (pa, pb) = (dir.join(format!("{prefix}_{a}.csv")), dir.join(format!("{prefix}_{b}.csv")));
        if !(pa.exists() && pb.exists()) {
            continue;
        }
        found = true;
        let sa = by_group(&read_index_file(&pa)?, |r| r.numerator_total);
        let sb = by_group(&read_index_file(&pb)?, |r| r.numerator_total);
        let results = sa
            .iter()
            .map(|(g, x)| {
                let y = sb
                    .iter()
                    .find(|(h, _)| h == g)
                    .map(|(_, y)| y)
                    .with_context(|| format!("group {g} missing from {}", pb.display()))?;
                Ok(welch_test(g, x, y, alpha).map_err(Error::from)?)
            })
            .collect::<anyhow::Result<Vec<WelchResult>>>()?;
        output::write_welch(create(dir, &format!("welch_{prefix}.csv"))?, &results).map_err(Error::from)?;
    }
    if !found {
        bail!("no scalar_* or aggregated_* result pairs for {a} and {b} in {}", dir.display());
    }
    Ok(())
}

fn files_with(dir: &Path, prefix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "csv")
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string()
}

fn plot(kind: PlotKind, compartment: &str, common: &Common) -> anyhow::Result<()> {
    let dir = &common.out_dir;
    let mut written = 0;
    match kind {
        PlotKind::Boxplot => {
            for path in [files_with(dir, "scalar_")?, files_with(dir, "aggregated_")?].concat() {
                let rows = read_index_file(&path)?;
                let name = stem(&path);
                for (label, pick) in [("first_order", 0), ("total", 1)] {
                    let samples = by_group(&rows, |r| if pick == 0 { r.first_order } else { r.total });
                    let svg = svg::boxplot(&format!("{name}: {label}"), label, &samples);
                    fs::write(dir.join(format!("{name}_{label}.svg")), svg)?;
                    written += 1;
                }
            }
        }
        PlotKind::Dynamical => {
            for path in files_with(dir, "dynamical_")? {
                let file = File::open(&path)?;
                let rows = read_dynamical(file).map_err(Error::from)?;
                let name = stem(&path);
                let mut groups: Vec<String> = Vec::new();
                for r in &rows {
                    if !groups.contains(&r.group) {
                        groups.push(r.group.clone());
                    }
                }
                let grid: Vec<f64> = rows.iter().filter(|r| r.group == groups[0]).map(|r| r.time).collect();
                for (label, pick) in [("first_order", 0), ("total", 1)] {
                    let series: Vec<(String, Vec<Option<f64>>)> = groups
                        .iter()
                        .map(|g| {
                            let v = rows
                                .iter()
                                .filter(|r| &r.group == g)
                                .map(|r| if pick == 0 { r.first_order } else { r.total })
                                .collect();
                            (g.clone(), v)
                        })
                        .collect();
                    let svg = svg::line_chart(&format!("{name}: {label}"), "time", label, &grid, &series);
                    fs::write(dir.join(format!("{name}_{label}.svg")), svg)?;
                    written += 1;
                }
            }
        }
        PlotKind::Fan => {
            // Files are trajectory_<model>_<representation>_<run>.csv.
            let mut sets: Vec<(String, Vec<(Vec<f64>, Vec<f64>)>)> = Vec::new();
            for path in files_with(dir, "trajectory_")? {
                let name = stem(&path);
                let set = name.rsplit_once('_').map(|(s, _)| s.to_string()).unwrap_or(name);
                let table = read_trajectory(File::open(&path)?).map_err(Error::from)?;
                let c = table
                    .compartments
                    .iter()
                    .position(|n| n == compartment)
                    .with_context(|| format!("{} has no compartment {compartment}", path.display()))?;
                let values = table.counts.iter().map(|row| f64::from(row[c])).collect();
                match sets.iter_mut().find(|(s, _)| *s == set) {
                    Some((_, paths)) => paths.push((table.times, values)),
                    None => sets.push((set, vec![(table.times, values)])),
                }
            }
            for (set, paths) in &sets {
                let end = paths.iter().filter_map(|(t, _)| t.last().copied()).fold(0.0, f64::max);
                let grid: Vec<f64> = (0..=200).map(|k| end * f64::from(k) / 200.0).collect();
                let svg = svg::trajectory_fan(&format!("{set}: {compartment}"), compartment, paths, &grid);
                fs::write(dir.join(format!("fan_{set}_{compartment}.svg")), svg)?;
                written += 1;
            }
        }
    }
    if written == 0 {
        bail!("no matching result files in {}", dir.display());
    }
    Ok(())
}
