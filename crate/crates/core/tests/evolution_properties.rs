use agent_factory_core::evolution::{run, EvolutionConfig, EvolutionState};
use agent_factory_core::neurogenome::{Activation, Genome, NetworkSpec};
use proptest::prelude::*;

fn check_population(state: &EvolutionState) -> Result<(), TestCaseError> {
    let spec = state.spec();
    for m in state.population() {
        spec.check_genome(&m.genome)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        for w in m.genome.weights() {
            prop_assert!(w >= spec.weight_range.lo && w <= spec.weight_range.hi);
            prop_assert!(w == 0.0 || w.abs() >= spec.prune_threshold);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_generation_respects_genome_invariants(
        seed in any::<u64>(),
        pop in 3usize..12,
        rate in 0.0f64..=1.0,
        sigma in 0.05f64..2.0,
        a in 0usize..3,
    ) {
        let act = [Activation::Sigmoid, Activation::binary(), Activation::Linear][a];
        let spec = NetworkSpec::new(3, 4, 2, act).unwrap();
        let config = EvolutionConfig {
            pop_size: pop,
            elitism: 1,
            mutation_rate: rate,
            mutation_sigma: sigma,
            ..EvolutionConfig::with_seed(seed)
        };
        let fitness = |g: &Genome| g.weights().map(|w| w * w).sum::<f64>();
        let mut state = EvolutionState::new(spec, config).unwrap();
        check_population(&state)?;
        let mut best_so_far = f64::NEG_INFINITY;
        for _ in 0..6 {
            state.step(&fitness).unwrap();
            check_population(&state)?;
            let best = state.best_fitness().unwrap();
            prop_assert!(best >= best_so_far);
            best_so_far = best;
            prop_assert_eq!(state.population().len(), pop);
        }
        prop_assert_eq!(state.history().len(), 6);
    }

    #[test]
    fn same_seed_same_history(seed in any::<u64>()) {
        let spec = NetworkSpec::new(2, 3, 1, Activation::Sigmoid).unwrap();
        let config = EvolutionConfig { pop_size: 6, ..EvolutionConfig::with_seed(seed) };
        let fitness = |g: &Genome| -g.weights().map(|w| (w - 1.0).abs()).sum::<f64>();
        let a = run(spec, config, &fitness, 5).unwrap();
        let b = run(spec, config, &fitness, 5).unwrap();
        prop_assert_eq!(a, b);
    }
}
