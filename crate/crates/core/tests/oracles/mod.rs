//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;

use agent_factory_core::feature_model::{
    validate, Configuration, Domain, FeatureKind, FeatureModel, FeatureNode, GroupType,
};
use agent_factory_core::neurogenome::{Activation, Genome};
use rand::Rng;

/// Every subset of the model's features that `validate` accepts, found by
/// walking all 2^n subsets in Gray-code order.
pub fn brute_force_valid(model: &FeatureModel) -> BTreeSet<BTreeSet<String>> {
    let ids: Vec<String> = model.ids().map(str::to_string).collect();
    let n = ids.len();
    assert!(n <= 24, "brute force over {n} features is too slow");
    let mut config = Configuration::new(model.version(), Vec::<String>::new());
    let mut valid = BTreeSet::new();
    for step in 0u64..(1u64 << n) {
        if step > 0 {
            let bit = step.trailing_zeros() as usize;
            let id = &ids[bit];
            if !config.selected.remove(id) {
                config.selected.insert(id.clone());
            }
        }
        if validate(model, &config).is_ok() {
            valid.insert(config.selected.clone());
        }
    }
    valid
}

/// A random well-formed model with at most `max_leaves` leaves and at most
/// `max_nodes` nodes in total. Mixes all three group types and both kinds.
pub fn random_model<R: Rng>(rng: &mut R, max_leaves: usize, max_nodes: usize) -> FeatureModel {
    loop {
        let mut next = 0;
        let root = grow(rng, &mut next, 0, FeatureKind::Mandatory);
        let model = FeatureModel::new("random/1", root).expect("generator builds valid models");
        let leaves = model
            .nodes()
            .iter()
            .filter(|n| n.children.is_empty())
            .count();
        if model.len() >= 2 && model.len() <= max_nodes && leaves <= max_leaves {
            return model;
        }
    }
}

fn grow<R: Rng>(rng: &mut R, next: &mut usize, depth: usize, kind: FeatureKind) -> FeatureNode {
    let id = format!("f{next}");
    *next += 1;
    let node = FeatureNode::new(&id, kind, Domain::Behavior);
    if depth >= 3 || (depth > 0 && rng.random_bool(0.45)) {
        return node;
    }
    let group = match rng.random_range(0..3) {
        0 => GroupType::None,
        1 => GroupType::Alternative,
        _ => GroupType::Or,
    };
    let min = if group == GroupType::None { 1 } else { 2 };
    let count = rng.random_range(min..=4);
    let children: Vec<FeatureNode> = (0..count)
        .map(|_| {
            let child_kind = if group == GroupType::None && rng.random_bool(0.5) {
                FeatureKind::Mandatory
            } else {
                FeatureKind::Optional
            };
            grow(rng, next, depth + 1, child_kind)
        })
        .collect();
    node.group(group).children(children)
}

/// Forward pass over an explicit edge list built only from nonzero weights.
pub struct SparseNet {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    activation: Activation,
    /// (input, hidden, weight)
    ih: Vec<(usize, usize, f64)>,
    /// (hidden, output, weight)
    ho: Vec<(usize, usize, f64)>,
}

impl SparseNet {
    pub fn from_flat(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        activation: Activation,
        flat: &[f64],
    ) -> Self {
        assert_eq!(flat.len(), inputs * hidden + hidden * outputs);
        let mut ih = Vec::new();
        for i in 0..inputs {
            for h in 0..hidden {
                let w = flat[i * hidden + h];
                if w != 0.0 {
                    ih.push((i, h, w));
                }
            }
        }
        let base = inputs * hidden;
        let mut ho = Vec::new();
        for h in 0..hidden {
            for o in 0..outputs {
                let w = flat[base + h * outputs + o];
                if w != 0.0 {
                    ho.push((h, o, w));
                }
            }
        }
        SparseNet {
            inputs,
            hidden,
            outputs,
            activation,
            ih,
            ho,
        }
    }

    pub fn from_genome(genome: &Genome, activation: Activation) -> Self {
        Self::from_flat(
            genome.inputs(),
            genome.hidden(),
            genome.outputs(),
            activation,
            &genome.flat(),
        )
    }

    fn act(&self, x: f64) -> f64 {
        match self.activation {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::BinaryThreshold { threshold } => {
                if x >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => x.clamp(0.0, 1.0),
        }
    }

    /// Sums edges in (source, destination) order, the same order a dense
    /// evaluator visits surviving weights.
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs);
        let mut net_h = vec![0.0; self.hidden];
        let mut ih = self.ih.clone();
        ih.sort_by_key(|&(i, h, _)| (h, i));
        for &(i, h, w) in &ih {
            net_h[h] += x[i] * w;
        }
        let hid: Vec<f64> = net_h.iter().map(|&v| self.act(v)).collect();
        let mut net_o = vec![0.0; self.outputs];
        let mut ho = self.ho.clone();
        ho.sort_by_key(|&(h, o, _)| (o, h));
        for &(h, o, w) in &ho {
            net_o[o] += hid[h] * w;
        }
        net_o.iter().map(|&v| self.act(v)).collect()
    }
}

/// Compares `enumerate` against brute force on `model`; returns the number
/// of valid configurations.
pub fn check_enumeration(model: &FeatureModel) -> Result<usize, String> {
    use agent_factory_core::feature_model::enumerate;
    let brute = brute_force_valid(model);
    let listed = enumerate(model, 1 << 22).map_err(|e| e.to_string())?;
    let fast: BTreeSet<BTreeSet<String>> = listed.iter().map(|c| c.selected.clone()).collect();
    if fast.len() != listed.len() {
        return Err("enumerate produced duplicates".into());
    }
    if fast != brute {
        let missing = brute.difference(&fast).next();
        let extra = fast.difference(&brute).next();
        return Err(format!(
            "set mismatch; missing {missing:?}, extra {extra:?}"
        ));
    }
    Ok(brute.len())
}

/// Random pruned genomes against the sparse evaluator, plus input
/// deselection invariance. Returns the number of deselected inputs seen.
pub fn check_pruning(seed: u64, genomes: usize, perturbations: usize) -> Result<usize, String> {
    use agent_factory_core::neurogenome::NetworkSpec;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut deselected_seen = 0;
    for g in 0..genomes {
        let activation = match g % 3 {
            0 => Activation::Sigmoid,
            1 => Activation::binary(),
            _ => Activation::Linear,
        };
        let spec = NetworkSpec::new(
            rng.random_range(1..=6),
            rng.random_range(1..=6),
            rng.random_range(1..=4),
            activation,
        )
        .map_err(|e| e.to_string())?;
        let (lo, hi) = (spec.weight_range.lo, spec.weight_range.hi);
        let mut flat: Vec<f64> = (0..spec.weight_count())
            .map(|_| rng.random_range(lo..=hi))
            .collect();
        // Push some weights into the prune band and wipe some input rows.
        for w in flat.iter_mut() {
            if rng.random_bool(0.2) {
                *w = rng.random_range(-0.25..0.25);
            }
        }
        for i in 0..spec.inputs {
            if rng.random_bool(0.25) {
                for h in 0..spec.hidden {
                    flat[i * spec.hidden + h] = rng.random_range(-0.2..0.2);
                }
            }
        }
        let raw = Genome::from_flat(&spec, &flat).map_err(|e| e.to_string())?;
        let pruned = spec.prune(&raw);
        if pruned
            .flat()
            .iter()
            .any(|w| *w != 0.0 && w.abs() < spec.prune_threshold)
        {
            return Err(format!("genome {g}: weight left inside the prune band"));
        }
        let sparse = SparseNet::from_genome(&pruned, activation);
        let deselected = pruned.deselected_inputs();
        deselected_seen += deselected.len();
        let x: Vec<f64> = (0..spec.inputs)
            .map(|_| rng.random_range(0.0..=1.0))
            .collect();
        let dense = spec.forward(&pruned, &x).map_err(|e| e.to_string())?;
        let reference = sparse.forward(&x);
        if dense
            .iter()
            .map(|v| v.to_bits())
            .ne(reference.iter().map(|v| v.to_bits()))
        {
            return Err(format!(
                "genome {g}: dense {dense:?} != sparse {reference:?}"
            ));
        }
        for p in 0..perturbations {
            let mut y = x.clone();
            for &i in &deselected {
                y[i] = rng.random_range(-10.0..=10.0);
            }
            let out = spec.forward(&pruned, &y).map_err(|e| e.to_string())?;
            if out
                .iter()
                .map(|v| v.to_bits())
                .ne(dense.iter().map(|v| v.to_bits()))
            {
                return Err(format!(
                    "genome {g}, perturbation {p}: deselected input changed the output"
                ));
            }
        }
    }
    Ok(deselected_seen)
}
