//! Experiment hosting: one worker thread per experiment applies queued
//! commands between generations, trains, and appends to a dense event log
//! that is persisted together with the experiment.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use agent_factory_core::controller::{ControllerError, Experiment, FeedbackPolicy, PhaseReason};
use agent_factory_core::evolution::EvolutionConfig;
use agent_factory_core::feature_model::{
    derive_search_space, expert_configuration, smart_light_model, Configuration, FeatureModel,
    SearchSpaceError,
};
use agent_factory_core::persist::{self, PersistError};
use agent_factory_core::streetlight::{AmbientSchedule, WorldConfig, REFERENCE_TICKS};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::api::{
    parse_command, Ack, ApiError, Command, CreateExperiment, ErrorKind, Event, EventType,
    ExperimentSummary, PhaseSummary, RunStatus,
};

const RECORD_KIND: &str = "service-experiment";
const RECORD_VERSION: u32 = 1;

pub fn controller_error(e: ControllerError) -> ApiError {
    match e {
        ControllerError::Config(SearchSpaceError::Invalid(v)) => {
            let mut err = ApiError::new(ErrorKind::Validation, v.to_string());
            err.violations = v.0;
            err
        }
        ControllerError::Config(_)
        | ControllerError::Diff(_)
        | ControllerError::Layout(_)
        | ControllerError::World(_)
        | ControllerError::Budget
        | ControllerError::NoNeuralAlternatives => {
            ApiError::new(ErrorKind::Validation, e.to_string())
        }
        ControllerError::NoOp(_) | ControllerError::NoHistory => {
            ApiError::new(ErrorKind::Conflict, e.to_string())
        }
        ControllerError::Persist(PersistError::Io { .. }) => {
            ApiError::new(ErrorKind::Io, e.to_string())
        }
        ControllerError::Persist(_)
        | ControllerError::Evolution(_)
        | ControllerError::Invariant(_) => ApiError::new(ErrorKind::Conflict, e.to_string()),
    }
}

fn io_error(e: PersistError) -> ApiError {
    ApiError::new(ErrorKind::Io, e.to_string())
}

fn not_found(id: &str) -> ApiError {
    ApiError::new(ErrorKind::NotFound, format!("no experiment {id:?}"))
}

/// Everything a host persists; the event log and the experiment always
/// describe the same moment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Record {
    experiment: Experiment,
    policy: FeedbackPolicy,
    status: RunStatus,
    events: Vec<Event>,
    next_command_id: u64,
    last_deselected: Option<Vec<String>>,
}

/// The part of a record a command or a generation works on.
#[derive(Debug, Clone)]
struct Work {
    experiment: Experiment,
    policy: FeedbackPolicy,
    status: RunStatus,
    last_deselected: Option<Vec<String>>,
}

struct Queued {
    id: u64,
    command: Command,
}

struct HostState {
    record: Record,
    queue: VecDeque<Queued>,
    results: BTreeMap<u64, Result<Ack, ApiError>>,
    shutdown: bool,
}

struct Host {
    id: String,
    path: Option<PathBuf>,
    state: Mutex<HostState>,
    changed: Condvar,
    worker: Mutex<Option<JoinHandle<()>>>,
}

impl Host {
    fn lock(&self) -> MutexGuard<'_, HostState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn persist(&self, record: &Record) -> Result<(), PersistError> {
        match &self.path {
            Some(p) => persist::write_atomic(
                p,
                &persist::to_document(RECORD_KIND, RECORD_VERSION, record),
            ),
            None => Ok(()),
        }
    }

    /// Installs `work` and its events, persisting before anyone can see
    /// them. Returns the seq of the first new event (or the head).
    fn publish(
        &self,
        st: &mut HostState,
        work: Work,
        events: Vec<(EventType, Value)>,
    ) -> Result<u64, PersistError> {
        let mut next = st.record.clone();
        let first = next.events.len() as u64;
        next.experiment = work.experiment;
        next.policy = work.policy;
        next.status = work.status;
        next.last_deselected = work.last_deselected;
        for (kind, payload) in events {
            let seq = next.events.len() as u64;
            next.events.push(Event { seq, kind, payload });
        }
        self.persist(&next)?;
        st.record = next;
        self.changed.notify_all();
        Ok(first)
    }

    fn work(st: &HostState) -> Work {
        Work {
            experiment: st.record.experiment.clone(),
            policy: st.record.policy,
            status: st.record.status,
            last_deselected: st.record.last_deselected.clone(),
        }
    }

    /// Each cycle applies the commands queued when it began, then trains one
    /// generation if running, so a busy queue cannot starve training.
    fn run(self: Arc<Self>) {
        let mut batch: Option<usize> = None;
        loop {
            let mut st = self.lock();
            while !st.shutdown
                && st.queue.is_empty()
                && !matches!(st.record.status, RunStatus::Running { remaining } if remaining > 0)
            {
                st = self.changed.wait(st).unwrap_or_else(|p| p.into_inner());
            }
            if st.shutdown {
                return;
            }
            let left = *batch.get_or_insert(st.queue.len());
            if left > 0 {
                batch = Some(left - 1);
                let q = st.queue.pop_front().expect("batch is within the queue");
                let mut work = Self::work(&st);
                drop(st);
                let outcome = apply(&mut work, &q.command);
                let mut st = self.lock();
                if st.shutdown {
                    return;
                }
                let result = match outcome {
                    Ok((events, result)) => self
                        .publish(&mut st, work, events)
                        .map(|seq| Ack {
                            command_id: q.id,
                            kind: q.command.kind().to_string(),
                            seq,
                            result,
                        })
                        .map_err(io_error),
                    Err(e) => Err(e),
                };
                st.results.insert(q.id, result);
                self.changed.notify_all();
                continue;
            }
            batch = None;
            if !matches!(st.record.status, RunStatus::Running { remaining } if remaining > 0) {
                continue;
            }

            let mut work = Self::work(&st);
            drop(st);
            let events = train_one(&mut work);
            let mut st = self.lock();
            if st.shutdown {
                return;
            }
            match events {
                Ok(events) => {
                    if let Err(e) = self.publish(&mut st, work, events) {
                        tracing::error!(experiment = %self.id, "cannot persist: {e}");
                        pause_after_failure(&mut st);
                        self.changed.notify_all();
                    }
                }
                Err(e) => {
                    tracing::error!(experiment = %self.id, "training failed: {e}");
                    pause_after_failure(&mut st);
                    self.changed.notify_all();
                }
            }
        }
    }
}

fn pause_after_failure(st: &mut HostState) {
    if let RunStatus::Running { remaining } = st.record.status {
        st.record.status = RunStatus::Paused { remaining };
    }
}

fn phase_payload(e: &Experiment, candidates: Option<Value>) -> Value {
    let index = e.phase_log().len() - 1;
    let phase = e.current_phase();
    let spec = e.spec();
    let mut v = json!({
        "index": index,
        "reason": phase.reason,
        "startedAt": phase.started_at,
        "featureConfig": phase.feature_config,
        "spec": {
            "inputs": spec.inputs,
            "hidden": spec.hidden,
            "outputs": spec.outputs,
            "activation": spec.activation.name(),
        },
        "inputNames": e.search_space().input_names,
    });
    if let Some(d) = &phase.diff {
        v["diff"] = json!(d);
        v["changed"] = json!(d.changed());
    }
    if let Some(c) = candidates {
        v["auto"] = c;
    }
    v
}

fn environment_payload(e: &Experiment) -> Value {
    let phase = e.current_phase();
    json!({
        "index": e.phase_log().len() - 1,
        "startedAt": phase.started_at,
        "schedule": phase.world_config.ambient_schedule,
    })
}

type Applied = (Vec<(EventType, Value)>, Option<Value>);

fn apply(work: &mut Work, command: &Command) -> Result<Applied, ApiError> {
    let e = &mut work.experiment;
    match command {
        Command::Start(p) => {
            let n = p.generations.unwrap_or(e.evo_config().generations as u64);
            work.status = if n == 0 {
                RunStatus::Idle
            } else {
                RunStatus::Running { remaining: n }
            };
            Ok((vec![], None))
        }
        Command::Pause => {
            if let RunStatus::Running { remaining } = work.status {
                work.status = RunStatus::Paused { remaining };
            }
            Ok((vec![], None))
        }
        Command::Resume => {
            if let RunStatus::Paused { remaining } = work.status {
                work.status = RunStatus::Running { remaining };
            }
            Ok((vec![], None))
        }
        Command::Reconfigure(p) => {
            let target = reconfigure_target(e.model(), e.feature_config(), &p.config, &p.choose)?;
            e.apply_reconfiguration(target, PhaseReason::Manual)
                .map_err(controller_error)?;
            work.last_deselected = None;
            Ok((vec![(EventType::Phase, phase_payload(e, None))], None))
        }
        Command::ChangeEnvironment(p) => {
            e.change_environment(p.schedule.clone())
                .map_err(controller_error)?;
            Ok((vec![(EventType::Environment, environment_payload(e))], None))
        }
        Command::AutoReconfigure(p) => {
            let report = e
                .auto_reconfigure(p.budget_generations)
                .map_err(controller_error)?;
            let report = json!(report);
            let mut events = vec![];
            if report["reconfigured"] == json!(true) {
                work.last_deselected = None;
                events.push((EventType::Phase, phase_payload(e, Some(report.clone()))));
            }
            Ok((events, Some(report)))
        }
        Command::Snapshot => {
            let mut summary = json!({
                "generations": e.generations(),
                "bestFitness": e.evolution().best_fitness(),
                "status": work.status,
            });
            if let Some(g) = e.best_genome() {
                summary["bestGenome"] = json!(g);
            }
            Ok((vec![], Some(summary)))
        }
    }
}

fn reconfigure_target(
    model: &FeatureModel,
    current: &Configuration,
    config: &Option<Configuration>,
    choose: &BTreeMap<String, String>,
) -> Result<Configuration, ApiError> {
    let mut target = config.clone().unwrap_or_else(|| current.clone());
    for (group, child) in choose {
        target = target.choose(model, group, child).map_err(|err| {
            ApiError::new(ErrorKind::Validation, err.to_string())
                .at(format!("payload.choose.{group}"))
        })?;
    }
    if config.is_none() && choose.is_empty() {
        return Err(
            ApiError::new(ErrorKind::Validation, "reconfigure needs config or choose")
                .at("payload"),
        );
    }
    derive_search_space(model, &target)
        .map_err(|err| controller_error(ControllerError::Config(err)))?;
    Ok(target)
}

fn train_one(work: &mut Work) -> Result<Vec<(EventType, Value)>, ControllerError> {
    let rec = work.experiment.train_generation()?.clone();
    let mut events = vec![(
        EventType::Generation,
        json!({
            "generation": rec.generation,
            "phase": rec.phase,
            "best": rec.best,
            "mean": rec.mean,
            "deselectedInputs": rec.deselected_inputs,
            "liveConnections": rec.live_connections,
        }),
    )];
    if work.last_deselected.as_ref() != Some(&rec.deselected_inputs) {
        events.push((
            EventType::Topology,
            json!({
                "generation": rec.generation,
                "deselectedInputs": rec.deselected_inputs,
                "liveConnections": rec.live_connections,
            }),
        ));
        work.last_deselected = Some(rec.deselected_inputs.clone());
    }
    let remaining = work.status.remaining().saturating_sub(1);
    work.status = if remaining == 0 {
        RunStatus::Idle
    } else {
        RunStatus::Running { remaining }
    };
    let previous = work.experiment.verdicts().last().map(|v| v.kind);
    let verdict = work.experiment.evaluate_feedback(&work.policy)?;
    if previous != Some(verdict.kind) || remaining == 0 {
        work.experiment.record_verdict(&work.policy)?;
        events.push((EventType::Verdict, json!(verdict)));
    }
    Ok(events)
}

/// Hosts experiments and serves commands and events for them.
pub struct Service {
    data_dir: Option<PathBuf>,
    model: FeatureModel,
    hosts: Mutex<BTreeMap<String, Arc<Host>>>,
    closed: AtomicBool,
}

impl Service {
    /// A service that keeps everything in memory.
    pub fn in_memory() -> Self {
        Service {
            data_dir: None,
            model: smart_light_model(),
            hosts: Mutex::new(BTreeMap::new()),
            closed: AtomicBool::new(false),
        }
    }

    /// A service persisting under `dir`, reloading every experiment found
    /// there. Experiments that were running carry on.
    pub fn open(dir: &Path) -> Result<Self, ApiError> {
        fs::create_dir_all(dir).map_err(|e| {
            ApiError::new(
                ErrorKind::Io,
                format!("cannot create {}: {e}", dir.display()),
            )
        })?;
        let service = Service {
            data_dir: Some(dir.to_path_buf()),
            model: smart_light_model(),
            hosts: Mutex::new(BTreeMap::new()),
            closed: AtomicBool::new(false),
        };
        let entries = fs::read_dir(dir).map_err(|e| {
            ApiError::new(ErrorKind::Io, format!("cannot list {}: {e}", dir.display()))
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = persist::read_to_string(&path).map_err(io_error)?;
            let record: Record = persist::from_document(RECORD_KIND, RECORD_VERSION, &text)
                .map_err(|e| ApiError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
            record
                .experiment
                .check_invariants()
                .map_err(|e| ApiError::new(ErrorKind::Io, format!("{}: {e}", path.display())))?;
            let id = record.experiment.id().to_string();
            service.spawn(id, record);
        }
        Ok(service)
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    fn hosts(&self) -> MutexGuard<'_, BTreeMap<String, Arc<Host>>> {
        self.hosts.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn host(&self, id: &str) -> Result<Arc<Host>, ApiError> {
        self.hosts().get(id).cloned().ok_or_else(|| not_found(id))
    }

    fn spawn(&self, id: String, record: Record) -> Arc<Host> {
        let host = Arc::new(Host {
            path: self.data_dir.as_ref().map(|d| d.join(format!("{id}.json"))),
            id: id.clone(),
            state: Mutex::new(HostState {
                record,
                queue: VecDeque::new(),
                results: BTreeMap::new(),
                shutdown: false,
            }),
            changed: Condvar::new(),
            worker: Mutex::new(None),
        });
        let runner = host.clone();
        let handle = thread::Builder::new()
            .name(format!("experiment-{id}"))
            .spawn(move || runner.run())
            .expect("spawning a worker thread");
        *host.worker.lock().unwrap_or_else(|p| p.into_inner()) = Some(handle);
        self.hosts().insert(id, host.clone());
        host
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    pub fn list(&self) -> Vec<String> {
        self.hosts().keys().cloned().collect()
    }

    pub fn create(&self, req: CreateExperiment) -> Result<ExperimentSummary, ApiError> {
        let seed = req.seed.unwrap_or(0);
        let id = match req.id {
            Some(id) => {
                if id.is_empty()
                    || id.len() > 64
                    || !id
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
                {
                    return Err(ApiError::new(
                        ErrorKind::Validation,
                        "id must be 1-64 characters of [A-Za-z0-9_-]",
                    )
                    .at("id"));
                }
                id
            }
            None => {
                let hosts = self.hosts();
                (1..)
                    .map(|n| format!("exp-{n}"))
                    .find(|c| !hosts.contains_key(c))
                    .expect("unbounded")
            }
        };
        if self.hosts().contains_key(&id) {
            return Err(ApiError::new(
                ErrorKind::Conflict,
                format!("experiment {id:?} exists"),
            ));
        }
        let config = req.config.unwrap_or_else(expert_configuration);
        let world = req.world.unwrap_or_else(|| {
            WorldConfig::reference(AmbientSchedule::bright(REFERENCE_TICKS), seed)
        });
        let evolution = req
            .evolution
            .unwrap_or_else(|| EvolutionConfig::with_seed(seed));
        let experiment =
            Experiment::create(id.clone(), self.model.clone(), config, world, evolution)
                .map_err(controller_error)?;
        let mut record = Record {
            events: vec![],
            policy: req.policy.unwrap_or_default(),
            status: RunStatus::Idle,
            next_command_id: 0,
            last_deselected: None,
            experiment,
        };
        record.events.push(Event {
            seq: 0,
            kind: EventType::Phase,
            payload: phase_payload(&record.experiment, None),
        });
        if let Some(dir) = &self.data_dir {
            let path = dir.join(format!("{id}.json"));
            persist::write_atomic(
                &path,
                &persist::to_document(RECORD_KIND, RECORD_VERSION, &record),
            )
            .map_err(io_error)?;
        }
        let host = self.spawn(id, record);
        let st = host.lock();
        Ok(summary(&st.record))
    }

    pub fn summary(&self, id: &str) -> Result<ExperimentSummary, ApiError> {
        let host = self.host(id)?;
        let st = host.lock();
        Ok(summary(&st.record))
    }

    /// A consistent copy of the experiment.
    pub fn experiment(&self, id: &str) -> Result<Experiment, ApiError> {
        let host = self.host(id)?;
        let st = host.lock();
        Ok(st.record.experiment.clone())
    }

    /// Parses, checks and enqueues a command, then waits until the worker
    /// has applied it.
    pub fn handle_command(&self, id: &str, raw: Value) -> Result<Ack, ApiError> {
        let host = self.host(id)?;
        let command = parse_command(raw)?;
        let mut st = host.lock();
        precheck(&st.record.experiment, &command)?;
        let command_id = st.record.next_command_id;
        st.record.next_command_id += 1;
        st.queue.push_back(Queued {
            id: command_id,
            command,
        });
        host.changed.notify_all();
        loop {
            if let Some(r) = st.results.remove(&command_id) {
                return r;
            }
            if st.shutdown {
                return Err(ApiError::new(
                    ErrorKind::Unavailable,
                    "service is shutting down",
                ));
            }
            st = host.changed.wait(st).unwrap_or_else(|p| p.into_inner());
        }
    }

    /// Events with seq >= `from`. When none exist yet and `wait` is given,
    /// blocks up to that long for new ones.
    pub fn events(
        &self,
        id: &str,
        from: u64,
        wait: Option<Duration>,
    ) -> Result<Vec<Event>, ApiError> {
        let host = self.host(id)?;
        let mut st = host.lock();
        let deadline = wait.map(|w| Instant::now() + w);
        loop {
            let head = st.record.events.len() as u64;
            if from < head {
                return Ok(st.record.events[from as usize..].to_vec());
            }
            let Some(deadline) = deadline else {
                return Ok(vec![]);
            };
            let now = Instant::now();
            if st.shutdown || now >= deadline {
                return Ok(vec![]);
            }
            st = host
                .changed
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    /// Blocks until the experiment is neither running nor has queued
    /// commands, or `timeout` passes. Returns whether it settled.
    pub fn wait_idle(&self, id: &str, timeout: Duration) -> Result<bool, ApiError> {
        let host = self.host(id)?;
        let mut st = host.lock();
        let deadline = Instant::now() + timeout;
        loop {
            let busy = !st.queue.is_empty()
                || matches!(st.record.status, RunStatus::Running { remaining } if remaining > 0);
            if !busy {
                return Ok(true);
            }
            let now = Instant::now();
            if now >= deadline || st.shutdown {
                return Ok(false);
            }
            st = host
                .changed
                .wait_timeout(st, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    /// Stops every worker. In-flight generations are discarded; the files on
    /// disk keep the last published state.
    pub fn shutdown(&self) {
        self.closed.store(true, Ordering::SeqCst);
        let hosts: Vec<Arc<Host>> = self.hosts().values().cloned().collect();
        for h in &hosts {
            h.lock().shutdown = true;
            h.changed.notify_all();
        }
        for h in hosts {
            let handle = h.worker.lock().unwrap_or_else(|p| p.into_inner()).take();
            if let Some(handle) = handle {
                let _ = handle.join();
            }
        }
    }
}

impl Drop for Service {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Checks that need no experiment mutation, so malformed commands are
/// refused before they enter the queue.
fn precheck(e: &Experiment, command: &Command) -> Result<(), ApiError> {
    match command {
        Command::ChangeEnvironment(p) => p
            .schedule
            .check(e.world_config().time_simulation)
            .map_err(|err| {
                ApiError::new(ErrorKind::Validation, err.to_string()).at("payload.schedule")
            }),
        Command::Reconfigure(p) => {
            reconfigure_target(e.model(), e.feature_config(), &p.config, &p.choose).map(|_| ())
        }
        Command::AutoReconfigure(p) if p.budget_generations == 0 => {
            Err(controller_error(ControllerError::Budget).at("payload.budgetGenerations"))
        }
        _ => Ok(()),
    }
}

fn summary(r: &Record) -> ExperimentSummary {
    let e = &r.experiment;
    let phase = e.current_phase();
    ExperimentSummary {
        id: e.id().to_string(),
        status: r.status,
        generations: e.generations(),
        phase: PhaseSummary {
            index: e.phase_log().len() - 1,
            reason: phase.reason,
            started_at: phase.started_at,
        },
        spec: *e.spec(),
        feature_config: e.feature_config().clone(),
        ambient_schedule: e.world_config().ambient_schedule.clone(),
        best_fitness: e.evolution().best_fitness(),
        last_verdict: e.verdicts().last().copied(),
        policy: r.policy,
        event_head: r.events.len() as u64,
    }
}

/// Checks the invariants tests rely on: a dense event log and a consistent
/// experiment.
pub fn check_consistency(service: &Service, id: &str) -> Result<(), String> {
    let host = service.host(id).map_err(|e| e.to_string())?;
    let st = host.lock();
    for (i, ev) in st.record.events.iter().enumerate() {
        if ev.seq != i as u64 {
            return Err(format!("event {i} has seq {}", ev.seq));
        }
    }
    st.record
        .experiment
        .check_invariants()
        .map_err(|e| e.to_string())?;
    let generation_events = st
        .record
        .events
        .iter()
        .filter(|e| e.kind == EventType::Generation)
        .count() as u64;
    if generation_events != st.record.experiment.generations() {
        return Err(format!(
            "{generation_events} generation events for {} generations",
            st.record.experiment.generations()
        ));
    }
    let phase_like = st
        .record
        .events
        .iter()
        .filter(|e| matches!(e.kind, EventType::Phase | EventType::Environment))
        .count();
    if phase_like != st.record.experiment.phase_log().len() {
        return Err(format!(
            "{phase_like} phase/environment events for {} phases",
            st.record.experiment.phase_log().len()
        ));
    }
    Ok(())
}
