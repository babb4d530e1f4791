//! Argument parsing and subcommands.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mcsched_core::analysis::{analyze_partition, format_bound, format_percent, rm_bound};
use mcsched_core::engine::{self, LatePolicy, PhaseMode, SimConfig};
use mcsched_core::model::{hyperperiod, Partition, TaskKind};
use mcsched_core::partition::{first_fit_decreasing, PartitionError};
use mcsched_core::Policy;

use crate::document::{PolicySpec, TaskSetDocument, Workload};
use crate::report::{to_json, InfeasibleDoc, ReportDoc, StatsDoc};
use crate::{gantt, trace_csv};

#[derive(Debug, Parser)]
#[command(
    name = "mcsched",
    version,
    about = "Partitioned multicore real-time scheduling: analysis and simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the rate-monotonic utilization bound for n tasks.
    Bound {
        #[arg(long = "tasks", value_name = "N", value_parser = clap::value_parser!(u64).range(1..=1_000_000))]
        tasks: u64,
    },
    /// Check every core of a task set; exit 1 unless all are guaranteed.
    Analyze {
        file: PathBuf,
        /// Place tasks with first-fit decreasing instead of reading `core`.
        #[arg(long)]
        ffd: bool,
        /// Core count for --ffd [default: the document's, else 4].
        #[arg(long, requires = "ffd", value_parser = clap::value_parser!(u64).range(1..=4096))]
        cores: Option<u64>,
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Assign tasks to cores with first-fit decreasing and write the
    /// partitioned document.
    Partition {
        file: PathBuf,
        /// [default: the document's, else 4]
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=4096))]
        cores: Option<u64>,
        /// [default: the document's, else edf]
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run the tick simulator and print per-task statistics; exit 1 on any
    /// deadline miss.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub file: PathBuf,
    /// Simulated length in ticks.
    #[arg(
        long,
        required_unless_present = "hyperperiods",
        conflicts_with = "hyperperiods"
    )]
    pub horizon: Option<u64>,
    /// Simulated length in hyperperiods (periodic task sets only).
    #[arg(long)]
    pub hyperperiods: Option<u64>,
    /// Seed for generated sporadic arrivals.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the event trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write an SVG Gantt chart.
    #[arg(long)]
    pub gantt: Option<PathBuf>,
    /// Release every periodic task's first job at time 0.
    #[arg(long)]
    pub critical_instant: bool,
    #[arg(long, value_enum, default_value_t = LateArg::Demote)]
    pub late_policy: LateArg,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Place tasks with first-fit decreasing instead of reading `core`.
    #[arg(long)]
    pub ffd: bool,
    #[arg(long, requires = "ffd", value_parser = clap::value_parser!(u64).range(1..=4096))]
    pub cores: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Edf,
    Rm,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Edf => Policy::Edf,
            PolicyArg::Rm => Policy::Rm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LateArg {
    Demote,
    Abort,
}

/// How a successfully executed command ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Exit status 0.
    Clean,
    /// Exit status 1: not schedulable, infeasible, or a deadline was missed.
    Negative,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::Clean => 0,
            Outcome::Negative => 1,
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Clean
        } else {
            Outcome::Negative
        }
    }
}

/// Runs a parsed command. Errors are input errors (exit status 2).
pub fn run(cli: Cli, stdout: &mut dyn Write) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Bound { tasks } => bound(tasks, stdout),
        Command::Analyze {
            file,
            ffd,
            cores,
            policy,
            output,
        } => analyze(
            &file,
            ffd,
            cores,
            policy.map(Into::into),
            output.as_deref(),
            stdout,
        ),
        Command::Partition {
            file,
            cores,
            policy,
            output,
        } => partition(
            &file,
            cores,
            policy.map(Into::into),
            output.as_deref(),
            stdout,
        ),
        Command::Simulate(args) => simulate(&args, stdout),
    }
}

fn bound(n: u64, stdout: &mut dyn Write) -> anyhow::Result<Outcome> {
    let w = rm_bound(usize::try_from(n)?)?;
    writeln!(stdout, "{} ({})", format_bound(w), format_percent(w))?;
    Ok(Outcome::Clean)
}

fn emit(text: &str, output: Option<&Path>, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
        }
        None => Ok(stdout.write_all(text.as_bytes())?),
    }
}

fn load(file: &Path) -> anyhow::Result<Workload> {
    TaskSetDocument::load(file)?
        .validate()
        .with_context(|| format!("in {}", file.display()))
}

fn core_count(w: &Workload, cores: Option<u64>) -> anyhow::Result<usize> {
    Ok(match cores {
        Some(m) => usize::try_from(m)?,
        None => w.cores,
    })
}

/// Placement result: a partition with its per-core policies, or the
/// infeasibility report already rendered as JSON.
enum Placement {
    Placed(Partition, Vec<Policy>),
    Infeasible(String),
}

fn place(
    w: &Workload,
    ffd: bool,
    cores: Option<u64>,
    policy: Option<Policy>,
) -> anyhow::Result<Placement> {
    if ffd {
        let m = core_count(w, cores)?;
        let p = w.placement_policy(policy)?;
        return match first_fit_decreasing(&w.tasks, m, p) {
            Ok(partition) => Ok(Placement::Placed(partition, vec![p; m])),
            Err(PartitionError::Infeasible(r)) => {
                Ok(Placement::Infeasible(to_json(&InfeasibleDoc::from(&r))))
            }
            Err(e) => Err(e.into()),
        };
    }
    let Some(partition) = &w.partition else {
        bail!("no task names a core; set `core` on every task or pass --ffd")
    };
    Ok(Placement::Placed(
        partition.clone(),
        w.policies(policy, w.cores)?,
    ))
}

fn analyze(
    file: &Path,
    ffd: bool,
    cores: Option<u64>,
    policy: Option<Policy>,
    output: Option<&Path>,
    stdout: &mut dyn Write,
) -> anyhow::Result<Outcome> {
    let w = load(file)?;
    let (partition, policies) = match place(&w, ffd, cores, policy)? {
        Placement::Placed(p, pol) => (p, pol),
        Placement::Infeasible(json) => {
            emit(&json, output, stdout)?;
            return Ok(Outcome::Negative);
        }
    };
    let report = analyze_partition(&w.tasks, &partition, &policies)?;
    let doc = ReportDoc::new(&report, |core| {
        partition
            .tasks_on(&w.tasks, core)
            .iter()
            .map(|t| t.id().to_string())
            .collect()
    });
    emit(&to_json(&doc), output, stdout)?;
    Ok(Outcome::from_bool(report.all_guaranteed()))
}

fn partition(
    file: &Path,
    cores: Option<u64>,
    policy: Option<Policy>,
    output: Option<&Path>,
    stdout: &mut dyn Write,
) -> anyhow::Result<Outcome> {
    let w = load(file)?;
    let m = core_count(&w, cores)?;
    let p = w.placement_policy(policy)?;
    match first_fit_decreasing(&w.tasks, m, p) {
        Ok(partition) => {
            emit(
                &w.with_partition(&partition, PolicySpec::Global(p))
                    .to_json(),
                output,
                stdout,
            )?;
            Ok(Outcome::Clean)
        }
        Err(PartitionError::Infeasible(r)) => {
            emit(&to_json(&InfeasibleDoc::from(&r)), output, stdout)?;
            Ok(Outcome::Negative)
        }
        Err(e) => Err(e.into()),
    }
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> anyhow::Result<Outcome> {
    let w = load(&args.file)?;
    let horizon = match (args.horizon, args.hyperperiods) {
        (Some(h), _) => h,
        (None, Some(k)) => {
            if let Some(t) = w.tasks.iter().find(|t| t.kind() != TaskKind::Periodic) {
                bail!(
                    "--hyperperiods needs a periodic-only task set; `{}` is {}",
                    t.id(),
                    t.kind()
                );
            }
            hyperperiod(&w.tasks)?
                .checked_mul(k)
                .context("horizon overflows 64-bit ticks")?
        }
        (None, None) => bail!("pass --horizon or --hyperperiods"),
    };
    let (partition, policies) = match place(&w, args.ffd, args.cores, args.policy.map(Into::into))?
    {
        Placement::Placed(p, pol) => (p, pol),
        Placement::Infeasible(json) => {
            stdout.write_all(json.as_bytes())?;
            bail!("first-fit decreasing could not place every task");
        }
    };
    let mut config = SimConfig::new(w.tasks.clone(), partition, policies.clone(), horizon);
    config.phase_mode = if args.critical_instant {
        PhaseMode::CriticalInstant
    } else {
        PhaseMode::AsSpecified
    };
    config.late_policy = match args.late_policy {
        LateArg::Demote => LatePolicy::Demote,
        LateArg::Abort => LatePolicy::Abort,
    };
    config.sporadic_arrivals = w.sporadic_arrivals();
    config.aperiodic_arrivals = w.aperiodic_arrivals();
    config.seed = args.seed;

    let (trace, stats) = engine::run(&config)?;
    if let Some(path) = &args.trace {
        let f = std::fs::File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        trace_csv::write_trace(&trace, std::io::BufWriter::new(f))?;
    }
    if let Some(path) = &args.gantt {
        std::fs::write(path, gantt::render(&trace, &w.tasks))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    stdout.write_all(to_json(&StatsDoc::new(&trace, &stats, &policies, args.seed)).as_bytes())?;
    Ok(Outcome::from_bool(stats.total_misses == 0))
}
