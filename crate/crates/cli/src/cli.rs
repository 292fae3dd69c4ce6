//! `agent-factory` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use agent_factory_core::controller::{ControllerError, Experiment, FeedbackPolicy};
use agent_factory_core::evolution::EvolutionConfig;
use agent_factory_core::feature_model::{
    derive_search_space, expert_configuration, smart_light_model, validate, Configuration,
};
use agent_factory_core::neurogenome::encode_genome;
use agent_factory_core::persist::PersistError;
use agent_factory_core::streetlight::{
    run_traced, write_trace_csv, AmbientSchedule, NetworkPolicy, WorldConfig, REFERENCE_TICKS,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use crate::service::Service;

#[derive(Debug, Parser)]
#[command(
    name = "agent-factory",
    version,
    about = "Evolve smart street light controllers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Inspect the built-in feature model.
    Model {
        #[command(subcommand)]
        action: ModelCmd,
    },
    /// Create an experiment, train it and write it to a directory.
    Run {
        /// Feature configuration (JSON); the expert configuration by default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// World (JSON); the bright reference street by default.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, default_value_t = 60)]
        generations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "experiment")]
        id: String,
    },
    /// Continue training a saved experiment in place.
    Resume {
        #[arg(long)]
        experiment: PathBuf,
        /// Defaults to the experiment's configured generation count.
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Print an experiment's history.
    Report {
        #[arg(long)]
        experiment: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Also write a per-tick trace of the best genome in the current world.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
    },
}

#[derive(Debug, Subcommand)]
pub enum ModelCmd {
    /// Print the model as canonical JSON.
    Show,
    /// Check a configuration file against the model.
    Validate { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<ControllerError> for CliError {
    fn from(e: ControllerError) -> Self {
        match e {
            ControllerError::Persist(PersistError::Io { .. }) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::Validation(format!(
            "{}: {} (at {})",
            path.display(),
            e.inner(),
            e.path()
        ))
    })
}

pub fn main_with(cli: Cli) -> ExitCode {
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Model {
            action: ModelCmd::Show,
        } => {
            println!("{}", smart_light_model().to_canonical_json());
            Ok(())
        }
        Cmd::Model {
            action: ModelCmd::Validate { file },
        } => validate_file(&file),
        Cmd::Run {
            config,
            world,
            generations,
            seed,
            out,
            id,
        } => {
            let config = match config {
                Some(p) => read_json(&p)?,
                None => expert_configuration(),
            };
            let world = match world {
                Some(p) => read_json(&p)?,
                None => WorldConfig::reference(AmbientSchedule::bright(REFERENCE_TICKS), seed),
            };
            let evo = EvolutionConfig {
                generations,
                ..EvolutionConfig::with_seed(seed)
            };
            let mut e = Experiment::create(id, smart_light_model(), config, world, evo)?;
            train_verbose(&mut e, generations)?;
            fs::create_dir_all(&out).map_err(|err| io(&out, err))?;
            write_outputs(&e, &out.join("experiment.json"))
        }
        Cmd::Resume {
            experiment,
            generations,
        } => {
            let mut e = Experiment::load(&experiment)?;
            let n = generations.unwrap_or(e.evo_config().generations);
            train_verbose(&mut e, n)?;
            write_outputs(&e, &experiment)
        }
        Cmd::Report {
            experiment,
            format,
            trace,
        } => {
            let e = Experiment::load(&experiment)?;
            let text = match format {
                Format::Csv => history_csv(&e),
                Format::Text => text_report(&e)?,
            };
            print!("{text}");
            if let Some(path) = trace {
                write_trace(&e, &path)?;
            }
            Ok(())
        }
        Cmd::Serve { port, data, host } => {
            let service = Service::open(&data).map_err(|e| match e.kind {
                crate::api::ErrorKind::Io => CliError::Io(e.to_string()),
                _ => CliError::Validation(e.to_string()),
            })?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            rt.block_on(crate::http::serve(
                Arc::new(service),
                SocketAddr::new(host, port),
            ))
            .map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn validate_file(file: &Path) -> Result<(), CliError> {
    let model = smart_light_model();
    let config: Configuration = read_json(file)?;
    if let Err(v) = validate(&model, &config) {
        let mut msg = format!("{} is not a valid configuration:", file.display());
        for violation in &v.0 {
            let _ = write!(msg, "\n  {violation}");
        }
        return Err(CliError::Validation(msg));
    }
    let space = derive_search_space(&model, &config)
        .map_err(|e| CliError::Validation(format!("{}: {e}", file.display())))?;
    let spec = space.network_spec();
    println!(
        "valid: inputs {:?}, outputs {:?}, hidden {}, activation {}",
        space.input_names,
        space.output_names,
        spec.hidden,
        spec.activation.name()
    );
    Ok(())
}

fn train_verbose(e: &mut Experiment, generations: usize) -> Result<(), CliError> {
    for _ in 0..generations {
        let r = e.train_generation()?;
        eprintln!(
            "generation {:>4}  best {:>8.3}  mean {:>8.3}  live {:>3}",
            r.generation, r.best, r.mean, r.live_connections
        );
    }
    Ok(())
}

/// Saves the experiment, and next to it `history.csv` and `best-genome.json`.
fn write_outputs(e: &Experiment, path: &Path) -> Result<(), CliError> {
    e.save(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let history = dir.join("history.csv");
    fs::write(&history, history_csv(e)).map_err(|err| io(&history, err))?;
    if let Some(g) = e.best_genome() {
        let text =
            encode_genome(e.spec(), g).map_err(|err| CliError::Validation(err.to_string()))?;
        let genome = dir.join("best-genome.json");
        fs::write(&genome, text).map_err(|err| io(&genome, err))?;
    }
    Ok(())
}

pub fn history_csv(e: &Experiment) -> String {
    let mut out = String::from("generation,phase,best,mean,liveConnections,deselectedInputs\n");
    for r in e.history() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.generation,
            r.phase,
            r.best,
            r.mean,
            r.live_connections,
            r.deselected_inputs.join(";")
        );
    }
    out
}

fn text_report(e: &Experiment) -> Result<String, CliError> {
    let mut out = String::new();
    let spec = e.spec();
    let _ = writeln!(out, "experiment {}", e.id());
    let _ = writeln!(
        out,
        "network: {} inputs, {} hidden, {} outputs, {}",
        spec.inputs,
        spec.hidden,
        spec.outputs,
        spec.activation.name()
    );
    let _ = writeln!(out, "generations: {}", e.generations());
    for (i, p) in e.phase_log().iter().enumerate() {
        let best = e
            .history()
            .iter()
            .filter(|r| r.phase == i)
            .map(|r| r.best)
            .fold(None, |m: Option<f64>, b| Some(m.map_or(b, |m| m.max(b))));
        let _ = write!(
            out,
            "phase {i}: {:?} from generation {}",
            p.reason, p.started_at
        );
        match best {
            Some(b) => {
                let _ = writeln!(out, ", best {b:.3}");
            }
            None => out.push('\n'),
        }
        if let Some(d) = &p.diff {
            let changed: Vec<String> = d.changed().into_iter().collect();
            let _ = writeln!(out, "  changed: {}", changed.join(", "));
        }
    }
    if let Some(last) = e.history().last() {
        let _ = writeln!(
            out,
            "last generation: best {:.3}, mean {:.3}, live connections {}, deselected [{}]",
            last.best,
            last.mean,
            last.live_connections,
            last.deselected_inputs.join(", ")
        );
        let v = e.evaluate_feedback(&FeedbackPolicy::default())?;
        let _ = writeln!(
            out,
            "verdict: {:?} (phase best {:.3}, recent drop {:.3})",
            v.kind, v.evidence.best_fitness, v.evidence.recent_drop
        );
    }
    Ok(out)
}

fn write_trace(e: &Experiment, path: &Path) -> Result<(), CliError> {
    let genome = e
        .best_genome()
        .ok_or_else(|| CliError::Validation("no trained genome to trace".into()))?;
    let layout = e.layout();
    let mut policy = NetworkPolicy::new(e.spec(), genome, &layout)
        .map_err(|err| CliError::Validation(err.to_string()))?;
    let (_, rows) = run_traced(e.world_config(), &mut policy)
        .map_err(|err| CliError::Validation(err.to_string()))?;
    let file = fs::File::create(path).map_err(|err| io(path, err))?;
    let mut w = std::io::BufWriter::new(file);
    write_trace_csv(&mut w, &rows).map_err(|err| io(path, err))?;
    w.flush().map_err(|err| io(path, err))
}
