mod oracles;

use agent_factory_core::feature_model::{
    count_configurations, diff, enumerate, expert_configuration, smart_light_model, validate,
};
use oracles::{check_enumeration, random_model};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn built_in_model_matches_brute_force() {
    let m = smart_light_model();
    assert_eq!(check_enumeration(&m), Ok(2016));
    assert_eq!(count_configurations(&m), 2016);
}

#[test]
fn random_models_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 0..50 {
        let m = random_model(&mut rng, 12, 16);
        let n = check_enumeration(&m).unwrap_or_else(|e| panic!("model {k}: {e}"));
        assert_eq!(n as u128, count_configurations(&m), "model {k}");
    }
}

#[test]
fn expert_configuration_is_one_of_the_enumerated() {
    let m = smart_light_model();
    let all = enumerate(&m, 10_000).unwrap();
    assert!(all
        .iter()
        .any(|c| c.selected == expert_configuration().selected));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diff_applies_and_reverses(a in 0usize..2016, b in 0usize..2016) {
        let m = smart_light_model();
        let all = enumerate(&m, 10_000).unwrap();
        let (x, y) = (&all[a], &all[b]);
        let d = diff(&m, x, y).unwrap();
        prop_assert_eq!(&d.apply(x), y);
        prop_assert_eq!(d.is_empty(), a == b);
        let back = diff(&m, y, x).unwrap();
        prop_assert_eq!(&back.added, &d.removed);
        prop_assert_eq!(&back.removed, &d.added);
    }

    #[test]
    fn toggling_one_feature_of_a_valid_configuration(i in 0usize..2016, f in 0usize..22) {
        let m = smart_light_model();
        let all = enumerate(&m, 10_000).unwrap();
        let c = &all[i];
        let id = m.ids().nth(f).unwrap().to_string();
        let toggled = if c.is_selected(&id) { c.clone().without(&id) } else { c.clone().with(&id) };
        let in_set = all.iter().any(|o| o.selected == toggled.selected);
        prop_assert_eq!(validate(&m, &toggled).is_ok(), in_set);
    }

    #[test]
    fn canonical_json_round_trips(i in 0usize..2016) {
        use agent_factory_core::feature_model::Configuration;
        let m = smart_light_model();
        let c = enumerate(&m, 10_000).unwrap().swap_remove(i);
        let text = c.to_canonical_json();
        let back: Configuration = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back.to_canonical_json(), text);
    }
}
