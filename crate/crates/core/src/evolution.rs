//! Generational genetic algorithm over fixed-topology genomes.
//!
//! Each step evaluates the members that have no fitness yet, keeps the top
//! `elitism` members unchanged, and fills the rest of the next generation
//! with offspring: tournament selection, uniform crossover, per-weight
//! Gaussian mutation, clamping to the weight range and finally pruning.
//! Pruning after every variation is what drives connections (and whole
//! inputs) out of the network.
//!
//! All randomness comes from one seeded ChaCha stream stored in the state,
//! so a run is reproducible and can be checkpointed and resumed mid-way with
//! bit-identical results.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neurogenome::{Genome, NetworkSpec};
use crate::persist::{self, PersistError};

const CHECKPOINT_KIND: &str = "evolution-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("fitness evaluation failed: {0}")]
    Fitness(#[from] FitnessError),
    #[error("fitness function returned a non-finite value {0}")]
    NonFinite(f64),
    #[error("fitness function is bound to a different network spec than the state")]
    SpecMismatch,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct FitnessError(pub String);

/// Scores a genome. Must be deterministic for a fixed genome; higher is
/// better.
pub trait FitnessFunction: Sync {
    fn evaluate(&self, genome: &Genome) -> Result<f64, FitnessError>;

    /// Network spec this function was built for, if it is bound to one.
    fn spec(&self) -> Option<&NetworkSpec> {
        None
    }
}

impl<F> FitnessFunction for F
where
    F: Fn(&Genome) -> f64 + Sync,
{
    fn evaluate(&self, genome: &Genome) -> Result<f64, FitnessError> {
        Ok(self(genome))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EvolutionConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    /// Per-weight mutation probability.
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            pop_size: 50,
            generations: 60,
            tournament_k: 3,
            crossover_rate: 0.75,
            mutation_rate: 0.10,
            mutation_sigma: 0.30,
            elitism: 2,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn with_seed(seed: u64) -> Self {
        EvolutionConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::InvalidConfig(m.to_string()));
        if self.pop_size < 2 {
            return bad("popSize must be at least 2");
        }
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if self.elitism == 0 || self.elitism >= self.pop_size {
            return bad("elitism must satisfy 1 <= elitism < popSize");
        }
        if self.tournament_k < 2 || self.tournament_k > self.pop_size {
            return bad("tournamentK must satisfy 2 <= tournamentK <= popSize");
        }
        let prob = 0.0..=1.0;
        if !prob.contains(&self.crossover_rate) || !prob.contains(&self.mutation_rate) {
            return bad("crossoverRate and mutationRate must be probabilities");
        }
        if !(self.mutation_sigma > 0.0 && self.mutation_sigma.is_finite()) {
            return bad("mutationSigma must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub genome: Genome,
    /// `None` until evaluated (or after the environment changed).
    pub fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub genome: Genome,
    pub fitness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub best: f64,
    pub mean: f64,
}

/// Outcome of one evaluated generation.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    /// Index of the evaluated generation (0-based).
    pub generation: u64,
    pub best: f64,
    pub mean: f64,
    /// Best member of this generation.
    pub champion: Genome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvolutionState {
    spec: NetworkSpec,
    config: EvolutionConfig,
    generation: u64,
    population: Vec<Member>,
    best: Option<Scored>,
    history: Vec<GenerationStats>,
    rng: ChaCha8Rng,
}

impl EvolutionState {
    /// Generation 0: `pop_size` dense random genomes, none evaluated.
    pub fn new(spec: NetworkSpec, config: EvolutionConfig) -> Result<Self, EvolutionError> {
        config.check()?;
        let spec = spec
            .checked()
            .map_err(|e| EvolutionError::InvalidConfig(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let population = (0..config.pop_size)
            .map(|_| Member {
                genome: spec.random_genome(&mut rng),
                fitness: None,
            })
            .collect();
        Ok(EvolutionState {
            spec,
            config,
            generation: 0,
            population,
            best: None,
            history: Vec::new(),
            rng,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn population(&self) -> &[Member] {
        &self.population
    }

    pub fn best(&self) -> Option<&Scored> {
        self.best.as_ref()
    }

    pub fn best_fitness(&self) -> Option<f64> {
        self.best.as_ref().map(|b| b.fitness)
    }

    pub fn history(&self) -> &[GenerationStats] {
        &self.history
    }

    /// Forgets every member's fitness, and the best-so-far, so the next step
    /// re-evaluates the current genomes against a changed landscape.
    pub fn invalidate_fitness(&mut self) {
        for m in &mut self.population {
            m.fitness = None;
        }
        self.best = None;
    }

    /// Evaluates pending members and breeds the next generation. On error
    /// the state is left untouched.
    pub fn step<F: FitnessFunction + ?Sized>(
        &mut self,
        fitness: &F,
    ) -> Result<GenerationSummary, EvolutionError> {
        let pending: Vec<usize> = (0..self.population.len())
            .filter(|&i| self.population[i].fitness.is_none())
            .collect();
        let population = &self.population;
        let scores = pending
            .par_iter()
            .map(|&i| fitness.evaluate(&population[i].genome))
            .collect::<Result<Vec<f64>, FitnessError>>()?;
        if let Some(&bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(EvolutionError::NonFinite(bad));
        }
        for (&i, s) in pending.iter().zip(scores) {
            self.population[i].fitness = Some(s);
        }

        let fitness_of = |m: &Member| m.fitness.expect("every member evaluated");
        let live: Vec<usize> = self
            .population
            .iter()
            .map(|m| m.genome.live_connections())
            .collect();
        // Equal fitness goes to the sparser genome, so neutral connections
        // drift towards removal instead of being frozen in an old elite.
        let mut ranked: Vec<usize> = (0..self.population.len()).collect();
        ranked.sort_by(|&a, &b| {
            fitness_of(&self.population[b])
                .total_cmp(&fitness_of(&self.population[a]))
                .then(live[a].cmp(&live[b]))
        });

        let champion = &self.population[ranked[0]];
        let best = fitness_of(champion);
        let mean =
            self.population.iter().map(fitness_of).sum::<f64>() / self.population.len() as f64;
        let summary = GenerationSummary {
            generation: self.generation,
            best,
            mean,
            champion: champion.genome.clone(),
        };
        let improves = |b: &Scored| {
            best > b.fitness || (best == b.fitness && live[ranked[0]] < b.genome.live_connections())
        };
        if self.best.as_ref().is_none_or(improves) {
            self.best = Some(Scored {
                genome: champion.genome.clone(),
                fitness: best,
            });
        }
        self.history.push(GenerationStats { best, mean });

        let mut next: Vec<Member> = ranked[..self.config.elitism]
            .iter()
            .map(|&i| self.population[i].clone())
            .collect();
        while next.len() < self.config.pop_size {
            let genome = self.offspring();
            next.push(Member {
                genome,
                fitness: None,
            });
        }
        self.population = next;
        self.generation += 1;
        Ok(summary)
    }

    /// Runs `more` further generations. A fitness function bound to another
    /// spec is refused before anything runs.
    pub fn resume<F: FitnessFunction + ?Sized>(
        &mut self,
        fitness: &F,
        more: usize,
    ) -> Result<(), EvolutionError> {
        if fitness.spec().is_some_and(|s| s != &self.spec) {
            return Err(EvolutionError::SpecMismatch);
        }
        for _ in 0..more {
            self.step(fitness)?;
        }
        Ok(())
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let key = |m: &Member| {
            (
                m.fitness.unwrap_or(f64::NEG_INFINITY),
                m.genome.live_connections(),
            )
        };
        let mut winner = self.rng.random_range(0..n);
        for _ in 1..self.config.tournament_k {
            let c = self.rng.random_range(0..n);
            let ((fw, lw), (fc, lc)) = (key(&self.population[winner]), key(&self.population[c]));
            if fc > fw || (fc == fw && (lc < lw || (lc == lw && c < winner))) {
                winner = c;
            }
        }
        winner
    }

    fn offspring(&mut self) -> Genome {
        let a = self.tournament();
        let b = self.tournament();
        let mut child = self.population[a].genome.clone();
        if self.rng.random_bool(self.config.crossover_rate) {
            let other = &self.population[b].genome;
            for (w, o) in child.weights_mut().zip(other.weights()) {
                if self.rng.random_bool(0.5) {
                    *w = o;
                }
            }
        }
        let noise = Normal::new(0.0, self.config.mutation_sigma).expect("sigma checked positive");
        let range = self.spec.weight_range;
        for w in child.weights_mut() {
            if self.rng.random_bool(self.config.mutation_rate) {
                *w = range.clamp(*w + noise.sample(&mut self.rng));
            }
        }
        self.spec.prune_in_place(&mut child);
        child
    }

    pub fn to_checkpoint(&self) -> String {
        persist::to_document(CHECKPOINT_KIND, CHECKPOINT_VERSION, self)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, PersistError> {
        persist::from_document(CHECKPOINT_KIND, CHECKPOINT_VERSION, text)
    }

    pub fn save(&self, path: &Path) -> Result<(), PersistError> {
        persist::write_atomic(path, &self.to_checkpoint())
    }

    pub fn load(path: &Path) -> Result<Self, PersistError> {
        Self::from_checkpoint(&persist::read_to_string(path)?)
    }
}

/// Initializes a population and runs `generations` steps.
pub fn run<F: FitnessFunction + ?Sized>(
    spec: NetworkSpec,
    config: EvolutionConfig,
    fitness: &F,
    generations: usize,
) -> Result<EvolutionState, EvolutionError> {
    let mut state = EvolutionState::new(spec, config)?;
    state.resume(fitness, generations)?;
    Ok(state)
}

/// Mixes a base seed with a stream number (SplitMix64 finalizer), for
/// deriving independent seeds for phases and candidates.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurogenome::Activation;

    fn spec() -> NetworkSpec {
        NetworkSpec::new(4, 5, 3, Activation::Sigmoid).unwrap()
    }

    fn small(seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            pop_size: 20,
            seed,
            ..Default::default()
        }
    }

    fn neg_sq(g: &Genome) -> f64 {
        -g.weights().map(|w| w * w).sum::<f64>()
    }

    #[test]
    fn init_is_deterministic_and_dense() {
        let a = EvolutionState::new(spec(), EvolutionConfig::with_seed(42)).unwrap();
        let b = EvolutionState::new(spec(), EvolutionConfig::with_seed(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.population().len(), 50);
        assert_eq!(a.generation(), 0);
        for m in a.population() {
            assert_eq!(m.genome.flat().len(), 35);
            assert!(m.fitness.is_none());
            assert!(m.genome.deselected_inputs().is_empty());
        }
    }

    #[test]
    fn config_validation() {
        let mut c = EvolutionConfig::default();
        assert!(c.check().is_ok());
        c.elitism = 50;
        assert!(c.check().is_err());
        c = EvolutionConfig {
            tournament_k: 1,
            ..Default::default()
        };
        assert!(c.check().is_err());
        c = EvolutionConfig {
            mutation_rate: 1.5,
            ..Default::default()
        };
        assert!(EvolutionState::new(spec(), c).is_err());
    }

    #[test]
    fn constant_fitness_keeps_size_and_zero_history() {
        let mut s = EvolutionState::new(spec(), small(1)).unwrap();
        s.resume(&|_: &Genome| 0.0, 5).unwrap();
        assert_eq!(s.history().len(), 5);
        assert!(s.history().iter().all(|h| h.best == 0.0 && h.mean == 0.0));
        assert_eq!(s.population().len(), 20);
    }

    #[test]
    fn best_is_monotone_and_minimizes_weights() {
        let mut s = EvolutionState::new(spec(), small(7)).unwrap();
        s.resume(&neg_sq, 30).unwrap();
        let h = s.history();
        assert!(h.windows(2).all(|w| w[1].best >= w[0].best));
        assert!(h.last().unwrap().best >= h[0].best);
        assert_eq!(
            s.best_fitness(),
            Some(h.iter().map(|g| g.best).fold(f64::MIN, f64::max))
        );
    }

    #[test]
    fn every_member_respects_genome_invariants() {
        let sp = spec();
        let mut s = EvolutionState::new(sp, small(3)).unwrap();
        for _ in 0..10 {
            s.step(&neg_sq).unwrap();
            for m in s.population() {
                sp.check_genome(&m.genome).unwrap();
                for w in m.genome.weights() {
                    assert!((-2.0..=2.0).contains(&w));
                    assert!(w == 0.0 || w.abs() >= sp.prune_threshold);
                }
            }
        }
    }

    #[test]
    fn failing_fitness_leaves_state_unchanged() {
        struct Failing;
        impl FitnessFunction for Failing {
            fn evaluate(&self, _: &Genome) -> Result<f64, FitnessError> {
                Err(FitnessError("sensor offline".into()))
            }
        }
        let mut s = EvolutionState::new(spec(), small(2)).unwrap();
        s.step(&neg_sq).unwrap();
        let before = s.clone();
        assert!(matches!(s.step(&Failing), Err(EvolutionError::Fitness(_))));
        assert_eq!(s, before);
        assert!(matches!(
            s.step(&|_: &Genome| f64::NAN),
            Err(EvolutionError::NonFinite(_))
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn split_run_matches_continuous_run() {
        let full = run(spec(), small(11), &neg_sq, 20).unwrap();
        let mut half = run(spec(), small(11), &neg_sq, 10).unwrap();
        half.resume(&neg_sq, 10).unwrap();
        assert_eq!(full, half);

        let mut same = half.clone();
        same.resume(&neg_sq, 0).unwrap();
        assert_eq!(same, half);
    }

    #[test]
    fn checkpoint_round_trip_resumes_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        let mut live = run(spec(), small(5), &neg_sq, 6).unwrap();
        live.save(&path).unwrap();
        let mut loaded = EvolutionState::load(&path).unwrap();
        assert_eq!(loaded, live);
        live.resume(&neg_sq, 6).unwrap();
        loaded.resume(&neg_sq, 6).unwrap();
        assert_eq!(loaded, live);
    }

    #[test]
    fn resume_refuses_foreign_spec() {
        struct Bound(NetworkSpec);
        impl FitnessFunction for Bound {
            fn evaluate(&self, _: &Genome) -> Result<f64, FitnessError> {
                Ok(0.0)
            }
            fn spec(&self) -> Option<&NetworkSpec> {
                Some(&self.0)
            }
        }
        let mut s = EvolutionState::new(spec(), small(1)).unwrap();
        let other = NetworkSpec::new(3, 5, 3, Activation::Sigmoid).unwrap();
        assert_eq!(
            s.resume(&Bound(other), 1),
            Err(EvolutionError::SpecMismatch)
        );
        assert!(s.resume(&Bound(spec()), 1).is_ok());
    }

    #[test]
    fn invalidate_forces_reevaluation() {
        let mut s = run(spec(), small(4), &neg_sq, 3).unwrap();
        assert!(s.population().iter().any(|m| m.fitness.is_some()));
        let genomes: Vec<_> = s.population().iter().map(|m| m.genome.clone()).collect();
        s.invalidate_fitness();
        assert!(s.population().iter().all(|m| m.fitness.is_none()));
        assert!(s.best().is_none());
        assert_eq!(s.history().len(), 3);
        assert_eq!(
            genomes,
            s.population()
                .iter()
                .map(|m| m.genome.clone())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(9, 3), derive_seed(9, 3));
    }
}
