//! Experiments: a feature configuration bound to a world, trained by
//! evolution, judged against a feedback policy and reconfigured by hand or by
//! a budgeted search over the neural alternatives.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{
    derive_seed, EvolutionConfig, EvolutionError, EvolutionState, FitnessError, FitnessFunction,
};
use crate::feature_model::{
    derive_search_space, diff, validate, ConfigDiff, Configuration, DiffError, Domain,
    FeatureModel, GroupType, SearchSpace, SearchSpaceError,
};
use crate::neurogenome::{Genome, NetworkSpec};
use crate::persist::{self, PersistError};
use crate::streetlight::{
    fitness_report, run_episode, AmbientSchedule, EpisodeOutcome, FitnessReport, IoLayout,
    LayoutError, NetworkPolicy, WorldConfig, WorldError,
};

pub const EXPERIMENT_KIND: &str = "experiment";
pub const EXPERIMENT_VERSION: u32 = 1;

/// Stream offset for seeds of auto-reconfiguration candidates, kept apart
/// from phase seeds.
const AUTO_STREAM: u64 = 1 << 32;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Config(#[from] SearchSpaceError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Evolution(#[from] EvolutionError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{0} is identical to the current one")]
    NoOp(&'static str),
    #[error("no generation has been evaluated yet")]
    NoHistory,
    #[error("budget must give every candidate at least one generation")]
    Budget,
    #[error("the configuration has no selected neural alternative group")]
    NoNeuralAlternatives,
    #[error("experiment invariant broken: {0}")]
    Invariant(String),
}

/// Thresholds for judging a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackPolicy {
    pub target_fitness: f64,
    pub degrade_drop: f64,
    pub degrade_window: usize,
}

impl Default for FeedbackPolicy {
    fn default() -> Self {
        FeedbackPolicy {
            target_fitness: 75.0,
            degrade_drop: 15.0,
            degrade_window: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictKind {
    Satisfied,
    UnderTarget,
    Degraded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Evidence {
    /// Best fitness within the current phase.
    pub best_fitness: f64,
    /// Largest fall of best-of-generation over the recent window.
    pub recent_drop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub kind: VerdictKind,
    pub at_generation: u64,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PhaseReason {
    Initial,
    Manual,
    Auto,
    Environment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PhaseRecord {
    /// Experiment-wide index of the first generation trained in this phase.
    pub started_at: u64,
    pub reason: PhaseReason,
    pub feature_config: Configuration,
    pub world_config: WorldConfig,
    /// Set for configuration changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diff: Option<ConfigDiff>,
}

/// One evaluated generation, numbered across phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GenerationRecord {
    pub generation: u64,
    pub phase: usize,
    pub best: f64,
    pub mean: f64,
    /// Inputs of the generation's champion with no live connection.
    pub deselected_inputs: Vec<String>,
    pub live_connections: usize,
}

/// Scores a genome by running one episode of a world.
#[derive(Debug, Clone)]
pub struct EpisodeFitness {
    world: WorldConfig,
    spec: NetworkSpec,
    layout: IoLayout,
}

impl EpisodeFitness {
    pub fn new(
        world: WorldConfig,
        spec: NetworkSpec,
        layout: IoLayout,
    ) -> Result<Self, ControllerError> {
        world.check()?;
        if layout.inputs.len() != spec.inputs || layout.outputs.len() != spec.outputs {
            return Err(ControllerError::Invariant(
                "layout does not match network dimensions".into(),
            ));
        }
        Ok(EpisodeFitness {
            world,
            spec,
            layout,
        })
    }

    pub fn world(&self) -> &WorldConfig {
        &self.world
    }

    pub fn outcome(&self, genome: &Genome) -> Result<EpisodeOutcome, ControllerError> {
        let mut policy = NetworkPolicy::new(&self.spec, genome, &self.layout)?;
        Ok(run_episode(&self.world, &mut policy)?)
    }

    pub fn report(&self, genome: &Genome) -> Result<FitnessReport, ControllerError> {
        let out = self.outcome(genome)?;
        fitness_report(&out.stats).map_err(|e| ControllerError::Invariant(e.to_string()))
    }
}

impl FitnessFunction for EpisodeFitness {
    fn evaluate(&self, genome: &Genome) -> Result<f64, FitnessError> {
        self.report(genome)
            .map(|r| r.fitness)
            .map_err(|e| FitnessError(e.to_string()))
    }

    fn spec(&self) -> Option<&NetworkSpec> {
        Some(&self.spec)
    }
}

/// One neural candidate tried by [`Experiment::auto_reconfigure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateResult {
    /// Chosen member of each neural alternative group, by group id.
    pub choices: Vec<(String, String)>,
    pub config: Configuration,
    pub best_fitness: f64,
    pub live_connections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutoReport {
    pub budget_generations: usize,
    pub candidates: Vec<CandidateResult>,
    pub adopted: usize,
    /// False when the winner is the configuration already in use.
    pub reconfigured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Experiment {
    id: String,
    model: FeatureModel,
    feature_config: Configuration,
    search_space: SearchSpace,
    world_config: WorldConfig,
    evo_config: EvolutionConfig,
    evolution: EvolutionState,
    phase_log: Vec<PhaseRecord>,
    verdicts: Vec<Verdict>,
    history: Vec<GenerationRecord>,
}

impl Experiment {
    pub fn create(
        id: impl Into<String>,
        model: FeatureModel,
        feature_config: Configuration,
        world_config: WorldConfig,
        evo_config: EvolutionConfig,
    ) -> Result<Self, ControllerError> {
        let search_space = derive_search_space(&model, &feature_config)?;
        world_config.check()?;
        IoLayout::from_names(&search_space.input_names, &search_space.output_names)?;
        let evolution = EvolutionState::new(search_space.network_spec(), evo_config)?;
        let phase0 = PhaseRecord {
            started_at: 0,
            reason: PhaseReason::Initial,
            feature_config: feature_config.clone(),
            world_config: world_config.clone(),
            diff: None,
        };
        Ok(Experiment {
            id: id.into(),
            model,
            feature_config,
            search_space,
            world_config,
            evo_config,
            evolution,
            phase_log: vec![phase0],
            verdicts: Vec::new(),
            history: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    pub fn feature_config(&self) -> &Configuration {
        &self.feature_config
    }

    pub fn search_space(&self) -> &SearchSpace {
        &self.search_space
    }

    pub fn spec(&self) -> &NetworkSpec {
        self.evolution.spec()
    }

    pub fn world_config(&self) -> &WorldConfig {
        &self.world_config
    }

    pub fn evo_config(&self) -> &EvolutionConfig {
        &self.evo_config
    }

    pub fn evolution(&self) -> &EvolutionState {
        &self.evolution
    }

    pub fn phase_log(&self) -> &[PhaseRecord] {
        &self.phase_log
    }

    pub fn current_phase(&self) -> &PhaseRecord {
        self.phase_log.last().expect("phase log is never empty")
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn history(&self) -> &[GenerationRecord] {
        &self.history
    }

    /// Number of generations evaluated over all phases.
    pub fn generations(&self) -> u64 {
        self.history.len() as u64
    }

    /// Best genome of the current phase, if any generation ran in it.
    pub fn best_genome(&self) -> Option<&Genome> {
        self.evolution.best().map(|b| &b.genome)
    }

    pub fn layout(&self) -> IoLayout {
        IoLayout::from_names(
            &self.search_space.input_names,
            &self.search_space.output_names,
        )
        .expect("checked when the search space was adopted")
    }

    /// Fitness function for the current world and network.
    pub fn fitness(&self) -> Result<EpisodeFitness, ControllerError> {
        self.fitness_in(self.world_config.clone())
    }

    /// Fitness function for the current network in another world.
    pub fn fitness_in(&self, world: WorldConfig) -> Result<EpisodeFitness, ControllerError> {
        EpisodeFitness::new(world, *self.spec(), self.layout())
    }

    /// Trains one generation and records it.
    pub fn train_generation(&mut self) -> Result<&GenerationRecord, ControllerError> {
        let fitness = self.fitness()?;
        self.step_with(&fitness)
    }

    pub fn train(&mut self, generations: usize) -> Result<(), ControllerError> {
        let fitness = self.fitness()?;
        for _ in 0..generations {
            self.step_with(&fitness)?;
        }
        Ok(())
    }

    fn step_with(
        &mut self,
        fitness: &EpisodeFitness,
    ) -> Result<&GenerationRecord, ControllerError> {
        let summary = self.evolution.step(fitness)?;
        let champion = &summary.champion;
        self.history.push(GenerationRecord {
            generation: self.history.len() as u64,
            phase: self.phase_log.len() - 1,
            best: summary.best,
            mean: summary.mean,
            deselected_inputs: champion
                .deselected_inputs()
                .into_iter()
                .map(|i| self.search_space.input_names[i].clone())
                .collect(),
            live_connections: champion.topology().live_connections,
        });
        Ok(self.history.last().expect("just pushed"))
    }

    /// Judges the run so far. Satisfied is decided on the current phase's
    /// best alone; otherwise a large recent fall of best-of-generation,
    /// across phases, marks the run as degraded.
    pub fn evaluate_feedback(&self, policy: &FeedbackPolicy) -> Result<Verdict, ControllerError> {
        let last = self.history.last().ok_or(ControllerError::NoHistory)?;
        let started = self.current_phase().started_at as usize;
        let phase_best = self.history[started.min(self.history.len())..]
            .iter()
            .map(|r| r.best)
            .fold(f64::NEG_INFINITY, f64::max);
        let recent = &self.history[self.history.len().saturating_sub(policy.degrade_window + 1)..];
        let recent_drop = recent_drop(recent.iter().map(|r| r.best));
        // A phase that has not trained yet is judged on its last known best.
        let best_fitness = if phase_best.is_finite() {
            phase_best
        } else {
            last.best
        };
        let kind = if best_fitness >= policy.target_fitness {
            VerdictKind::Satisfied
        } else if recent_drop >= policy.degrade_drop {
            VerdictKind::Degraded
        } else {
            VerdictKind::UnderTarget
        };
        Ok(Verdict {
            kind,
            at_generation: last.generation,
            evidence: Evidence {
                best_fitness,
                recent_drop,
            },
        })
    }

    /// Evaluates and appends a verdict to the log.
    pub fn record_verdict(&mut self, policy: &FeedbackPolicy) -> Result<Verdict, ControllerError> {
        let v = self.evaluate_feedback(policy)?;
        self.verdicts.push(v);
        Ok(v)
    }

    /// Switches to `new_config` and restarts learning with a fresh population.
    pub fn apply_reconfiguration(
        &mut self,
        new_config: Configuration,
        reason: PhaseReason,
    ) -> Result<ConfigDiff, ControllerError> {
        if matches!(reason, PhaseReason::Initial | PhaseReason::Environment) {
            return Err(ControllerError::Invariant(format!(
                "{reason:?} is not a reconfiguration reason"
            )));
        }
        let space = derive_search_space(&self.model, &new_config)?;
        IoLayout::from_names(&space.input_names, &space.output_names)?;
        let d = diff(&self.model, &self.feature_config, &new_config)?;
        if d.is_empty() {
            return Err(ControllerError::NoOp("configuration"));
        }
        let config = EvolutionConfig {
            seed: self.next_phase_seed(),
            ..self.evo_config
        };
        let evolution = EvolutionState::new(space.network_spec(), config)?;

        self.evolution = evolution;
        self.search_space = space;
        self.feature_config = new_config.clone();
        self.phase_log.push(PhaseRecord {
            started_at: self.generations(),
            reason,
            feature_config: new_config,
            world_config: self.world_config.clone(),
            diff: Some(d.clone()),
        });
        Ok(d)
    }

    /// Replaces the ambient schedule. Genomes are kept; every fitness is
    /// forgotten so training continues against the new world.
    pub fn change_environment(&mut self, schedule: AmbientSchedule) -> Result<(), ControllerError> {
        schedule.check(self.world_config.time_simulation)?;
        if schedule == self.world_config.ambient_schedule {
            return Err(ControllerError::NoOp("ambient schedule"));
        }
        self.world_config.ambient_schedule = schedule;
        self.evolution.invalidate_fitness();
        self.phase_log.push(PhaseRecord {
            started_at: self.generations(),
            reason: PhaseReason::Environment,
            feature_config: self.feature_config.clone(),
            world_config: self.world_config.clone(),
            diff: None,
        });
        Ok(())
    }

    /// Replaces the whole world, as [`Experiment::change_environment`] does
    /// for the ambient schedule.
    pub fn replace_world(&mut self, world: WorldConfig) -> Result<(), ControllerError> {
        world.check()?;
        if world == self.world_config {
            return Err(ControllerError::NoOp("world"));
        }
        self.world_config = world;
        self.evolution.invalidate_fitness();
        self.phase_log.push(PhaseRecord {
            started_at: self.generations(),
            reason: PhaseReason::Environment,
            feature_config: self.feature_config.clone(),
            world_config: self.world_config.clone(),
            diff: None,
        });
        Ok(())
    }

    /// Every combination of the selected neural alternative groups, in model
    /// order, applied to the current configuration.
    pub fn neural_candidates(&self) -> Result<Vec<CandidateResult>, ControllerError> {
        let groups: Vec<_> = self
            .model
            .nodes()
            .into_iter()
            .filter(|n| {
                n.domain == Domain::Neural
                    && n.group_type == GroupType::Alternative
                    && self.feature_config.is_selected(&n.id)
            })
            .collect();
        if groups.is_empty() {
            return Err(ControllerError::NoNeuralAlternatives);
        }
        let mut combos: Vec<Vec<(String, String)>> = vec![vec![]];
        for g in &groups {
            combos = combos
                .into_iter()
                .flat_map(|prefix| {
                    g.children.iter().map(move |c| {
                        let mut v = prefix.clone();
                        v.push((g.id.clone(), c.id.clone()));
                        v
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|choices| {
                let mut config = self.feature_config.clone();
                for (group, child) in &choices {
                    config = config
                        .choose(&self.model, group, child)
                        .map_err(|e| ControllerError::Invariant(e.to_string()))?;
                }
                Ok(CandidateResult {
                    choices,
                    config,
                    best_fitness: f64::NEG_INFINITY,
                    live_connections: 0,
                })
            })
            .collect()
    }

    /// Trains every neural candidate for `budget_generations` from derived
    /// seeds and adopts the best one. Ties go to fewer live connections, then
    /// to enumeration order.
    pub fn auto_reconfigure(
        &mut self,
        budget_generations: usize,
    ) -> Result<AutoReport, ControllerError> {
        if budget_generations == 0 {
            return Err(ControllerError::Budget);
        }
        let mut candidates = self.neural_candidates()?;
        let base = derive_seed(self.evo_config.seed, AUTO_STREAM + self.generations());
        for (k, c) in candidates.iter_mut().enumerate() {
            let space = derive_search_space(&self.model, &c.config)?;
            let layout = IoLayout::from_names(&space.input_names, &space.output_names)?;
            let spec = space.network_spec();
            let fitness = EpisodeFitness::new(self.world_config.clone(), spec, layout)?;
            let config = EvolutionConfig {
                seed: derive_seed(base, k as u64),
                ..self.evo_config
            };
            let state = crate::evolution::run(spec, config, &fitness, budget_generations)?;
            let best = state.best().expect("budget is at least one generation");
            c.best_fitness = best.fitness;
            c.live_connections = best.genome.topology().live_connections;
        }
        let mut adopted = 0;
        for (k, c) in candidates.iter().enumerate().skip(1) {
            let a = &candidates[adopted];
            if c.best_fitness > a.best_fitness
                || (c.best_fitness == a.best_fitness && c.live_connections < a.live_connections)
            {
                adopted = k;
            }
        }
        let winner = candidates[adopted].config.clone();
        let reconfigured = winner != self.feature_config;
        if reconfigured {
            self.apply_reconfiguration(winner, PhaseReason::Auto)?;
        }
        Ok(AutoReport {
            budget_generations,
            candidates,
            adopted,
            reconfigured,
        })
    }

    fn next_phase_seed(&self) -> u64 {
        derive_seed(self.evo_config.seed, self.phase_log.len() as u64)
    }

    /// Checks the experiment's structural invariants.
    pub fn check_invariants(&self) -> Result<(), ControllerError> {
        let broken = |m: String| Err(ControllerError::Invariant(m));
        validate(&self.model, &self.feature_config)
            .map_err(|v| ControllerError::Invariant(v.to_string()))?;
        let derived = derive_search_space(&self.model, &self.feature_config)?;
        if derived != self.search_space {
            return broken("search space differs from the configuration's".into());
        }
        if &derived.network_spec() != self.spec() {
            return broken("network spec differs from the configuration's".into());
        }
        let Some(first) = self.phase_log.first() else {
            return broken("phase log is empty".into());
        };
        if first.reason != PhaseReason::Initial || first.started_at != 0 {
            return broken("first phase is not the initial one".into());
        }
        for w in self.phase_log.windows(2) {
            if w[1].started_at < w[0].started_at || w[1].reason == PhaseReason::Initial {
                return broken("phase log out of order".into());
            }
            match (&w[1].diff, w[1].reason) {
                (None, PhaseReason::Environment) => {
                    if w[1].world_config == w[0].world_config {
                        return broken("environment phase without a world change".into());
                    }
                }
                (Some(d), PhaseReason::Manual | PhaseReason::Auto) => {
                    if d.is_empty() || d.apply(&w[0].feature_config) != w[1].feature_config {
                        return broken("reconfiguration phase diff does not match".into());
                    }
                }
                _ => return broken("phase record kind and diff disagree".into()),
            }
        }
        let current = self.current_phase();
        if current.feature_config != self.feature_config
            || current.world_config != self.world_config
        {
            return broken("current phase does not describe the experiment".into());
        }
        if current.started_at > self.generations() {
            return broken("phase starts after the last generation".into());
        }
        for (i, r) in self.history.iter().enumerate() {
            if r.generation != i as u64 || r.phase >= self.phase_log.len() {
                return broken(format!("history record {i} is misnumbered"));
            }
            if self.phase_log[r.phase].started_at > r.generation {
                return broken(format!("history record {i} predates its phase"));
            }
        }
        if self.history.windows(2).any(|w| w[1].phase < w[0].phase) {
            return broken("history phases go backwards".into());
        }
        for v in &self.verdicts {
            if v.at_generation >= self.generations() {
                return broken("verdict refers to a future generation".into());
            }
        }
        Ok(())
    }

    pub fn to_document(&self) -> String {
        persist::to_document(EXPERIMENT_KIND, EXPERIMENT_VERSION, self)
    }

    pub fn from_document(text: &str) -> Result<Self, ControllerError> {
        let e: Experiment = persist::from_document(EXPERIMENT_KIND, EXPERIMENT_VERSION, text)?;
        e.check_invariants().map_err(|err| {
            ControllerError::Persist(PersistError::Corrupt {
                kind: EXPERIMENT_KIND,
                detail: err.to_string(),
            })
        })?;
        Ok(e)
    }

    pub fn save(&self, path: &Path) -> Result<(), ControllerError> {
        Ok(persist::write_atomic(path, &self.to_document())?)
    }

    pub fn load(path: &Path) -> Result<Self, ControllerError> {
        Self::from_document(&persist::read_to_string(path)?)
    }
}

/// Largest `a[i] - a[j]` with `i < j`, or 0 when the values never fall.
pub fn recent_drop(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut drop: f64 = 0.0;
    for v in values {
        drop = drop.max(peak - v);
        peak = peak.max(v);
    }
    drop
}
