//! Command-line front end: run scenarios, sweep profiles, extract tours
//! from trip lists and render CSV reports from stored metrics.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use evsim::agents::Profile;
use evsim::engine;
use evsim::metrics::MetricsRecord;
use evsim::mobility::{ChargingBehavior, DiversionBehavior};
use evsim::report;
use evsim::scenario::{desk_agents, desk_vehicles, generate_desk, DeskParams, ScenarioConfig};

#[derive(Parser)]
#[command(name = "simctl", version, about = "EV charging control simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    ConstantLoading,
    WorkloadProportional,
    Random,
    LinucbDisjunct,
    LinucbHybrid,
    QLearning,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Profile {
        match p {
            ProfileArg::ConstantLoading => Profile::ConstantLoading,
            ProfileArg::WorkloadProportional => Profile::WorkloadProportional,
            ProfileArg::Random => Profile::Random,
            ProfileArg::LinucbDisjunct => Profile::LinUcbDisjunct,
            ProfileArg::LinucbHybrid => Profile::LinUcbHybrid,
            ProfileArg::QLearning => Profile::QLearning,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics (and optionally reports).
    Run {
        /// Scenario TOML; omit to use the generated default scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the run length in 1-second steps.
        #[arg(long)]
        duration: Option<u64>,
        /// Overrides the agent profile.
        #[arg(long)]
        profile: Option<ProfileArg>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Also write the CSV reports next to the metrics.
        #[arg(long)]
        reports: bool,
    },
    /// Run several scenarios (or the default scenario once per profile)
    /// and write a comparison.
    Sweep {
        /// Scenario TOML files; each run's output goes into a
        /// subdirectory named after the file. Without configs, the
        /// default scenario is swept over the profiles.
        #[arg(long, value_delimiter = ',')]
        configs: Vec<PathBuf>,
        /// Worker threads for config sweeps; per-run output is
        /// unaffected by the level of parallelism.
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        duration: Option<u64>,
        /// Profiles to sweep; defaults to all six.
        #[arg(long, value_delimiter = ',')]
        profiles: Vec<ProfileArg>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Build daily tours from a trip CSV (id,from_edge,to_edge,depart).
    ToursExtract {
        #[arg(long)]
        trips: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        min_trips: usize,
        #[arg(long, default_value_t = 4)]
        max_trips: usize,
        /// Distance used for trips without a distance column, km.
        #[arg(long, default_value_t = 10.0)]
        default_distance: f64,
        /// Duration used for trips without a duration column, seconds.
        #[arg(long, default_value_t = 1200)]
        default_duration: u64,
    },
    /// Render the CSV reports from a stored metrics JSON file.
    Report {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Write the generated default scenario to a TOML file.
    GenerateScenario {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_scenario(seed: u64) -> ScenarioConfig {
    generate_desk(
        seed,
        desk_agents(Profile::LinUcbDisjunct),
        desk_vehicles(ChargingBehavior::PriceAware, DiversionBehavior::DoNotDivert),
        &DeskParams::default(),
    )
}

fn load_scenario(
    config: Option<&PathBuf>,
    seed: Option<u64>,
    duration: Option<u64>,
    profile: Option<ProfileArg>,
) -> Result<ScenarioConfig, String> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ScenarioConfig::from_toml(&text).map_err(|e| e.to_string())?
        }
        None => default_scenario(seed.unwrap_or(1)),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration {
        cfg.duration_steps = d;
    }
    if let Some(p) = profile {
        cfg.agents.profile = p.into();
    }
    Ok(cfg)
}

fn run_and_store(cfg: &ScenarioConfig, out_dir: &PathBuf, reports: bool) -> Result<PathBuf, String> {
    let metrics = engine::run(cfg).map_err(|e| e.to_string())?;
    std::fs::create_dir_all(out_dir).map_err(|e| e.to_string())?;
    let path = out_dir.join(format!("{}_metrics.json", metrics.profile));
    std::fs::write(&path, metrics.to_json()).map_err(|e| e.to_string())?;
    if reports {
        report::write_reports(&metrics, out_dir).map_err(|e| e.to_string())?;
    }
    println!(
        "profile={} seed={} max_loading={:.4} rewards={}",
        metrics.profile,
        metrics.seed,
        metrics.global_max_loading(),
        metrics.rewards.len()
    );
    Ok(path)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, duration, profile, out_dir, reports } => {
            load_scenario(config.as_ref(), seed, duration, profile)
                .and_then(|cfg| run_and_store(&cfg, &out_dir, reports))
                .map(|_| ())
        }
        Command::Sweep { configs, parallelism, seed, duration, profiles, out_dir } => {
            if configs.is_empty() {
                sweep_profiles(seed, duration, profiles, out_dir)
            } else {
                sweep_configs(configs, parallelism.max(1), seed, duration, out_dir)
            }
        }
        Command::ToursExtract { trips, out, min_trips, max_trips, default_distance, default_duration } => {
            tours_extract(&trips, &out, min_trips, max_trips, default_distance, default_duration)
        }
        Command::Report { metrics, out_dir } => {
            std::fs::read_to_string(&metrics)
                .map_err(|e| format!("cannot read {}: {e}", metrics.display()))
                .and_then(|text| MetricsRecord::from_json(&text).map_err(|e| e.to_string()))
                .and_then(|m| {
                    report::write_reports(&m, &out_dir).map_err(|e| e.to_string()).map(|files| {
                        for f in files {
                            println!("{}", f.display());
                        }
                    })
                })
        }
        Command::GenerateScenario { seed, out } => {
            std::fs::write(&out, default_scenario(seed).to_toml()).map_err(|e| e.to_string())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// Runs several scenario files, up to `parallelism` at a time. A failing
/// run is reported but does not abort the others.
fn sweep_configs(
    configs: Vec<PathBuf>,
    parallelism: usize,
    seed: Option<u64>,
    duration: Option<u64>,
    out_dir: PathBuf,
) -> Result<(), String> {
    let jobs: Vec<(PathBuf, PathBuf)> = configs
        .into_iter()
        .map(|path| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "scenario".into());
            let run_dir = out_dir.join(stem);
            (path, run_dir)
        })
        .collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let errors = std::sync::Mutex::new(Vec::<String>::new());
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                let Some((path, run_dir)) = jobs.get(i) else { break };
                let result = load_scenario(Some(path), seed, duration, None)
                    .and_then(|cfg| run_and_store(&cfg, run_dir, true));
                if let Err(msg) = result {
                    errors.lock().unwrap().push(format!("{}: {msg}", path.display()));
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

fn sweep_profiles(
    seed: Option<u64>,
    duration: Option<u64>,
    profiles: Vec<ProfileArg>,
    out_dir: PathBuf,
) -> Result<(), String> {
    let profiles = if profiles.is_empty() {
        vec![
            ProfileArg::ConstantLoading,
            ProfileArg::WorkloadProportional,
            ProfileArg::Random,
            ProfileArg::LinucbDisjunct,
            ProfileArg::LinucbHybrid,
            ProfileArg::QLearning,
        ]
    } else {
        profiles
    };
    let mut summary = String::from("profile,max_loading,mean_daily_loading,first_day_mean_reward,last_day_mean_reward\n");
    for p in profiles {
        let cfg = load_scenario(None, seed, duration, Some(p))?;
        let metrics = engine::run(&cfg).map_err(|e| e.to_string())?;
        let (first, last) = metrics
            .reward_delta_first_to_last()
            .map(|(f, l, _)| (f, l))
            .unwrap_or((f64::NAN, f64::NAN));
        summary.push_str(&format!(
            "{},{},{},{first},{last}\n",
            metrics.profile,
            metrics.global_max_loading(),
            metrics.mean_of_daily_means()
        ));
        std::fs::create_dir_all(&out_dir).map_err(|e| e.to_string())?;
        let path = out_dir.join(format!("{}_metrics.json", metrics.profile));
        std::fs::write(&path, metrics.to_json()).map_err(|e| e.to_string())?;
        report::write_reports(&metrics, &out_dir).map_err(|e| e.to_string())?;
        println!("{} done (max loading {:.4})", metrics.profile, metrics.global_max_loading());
    }
    let summary_path = out_dir.join("sweep_summary.csv");
    std::fs::write(&summary_path, summary).map_err(|e| e.to_string())?;
    println!("{}", summary_path.display());
    Ok(())
}

fn tours_extract(
    trips: &PathBuf,
    out: &PathBuf,
    min_trips: usize,
    max_trips: usize,
    default_distance: f64,
    default_duration: u64,
) -> Result<(), String> {
    let text = std::fs::read_to_string(trips)
        .map_err(|e| format!("cannot read {}: {e}", trips.display()))?;
    let records = evsim::tours::parse_trips(&text).map_err(|e| e.to_string())?;
    let trip_count = records.len();
    let graph = evsim::tours::build_graph(records).map_err(|e| e.to_string())?;
    let cycles = evsim::tours::extract_tours(&graph, min_trips, max_trips);
    let tours = evsim::tours::cycles_to_tours(&graph, &cycles, default_distance, default_duration);
    std::fs::write(out, evsim::tours::write_tours_file(&tours)).map_err(|e| e.to_string())?;
    println!("{trip_count} trips -> {} tours", tours.len());
    Ok(())
}
