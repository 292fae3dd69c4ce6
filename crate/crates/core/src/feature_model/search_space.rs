use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::smart_light::{
    PARAM_ACTIVATION, PARAM_FEEDBACK, PARAM_HIDDEN_MAX, PARAM_INPUT, PARAM_OUTPUT,
    PARAM_PRUNE_THRESHOLD, PARAM_THRESHOLD, PARAM_WEIGHT_MAX, PARAM_WEIGHT_MIN,
};
use super::{validate, Configuration, FeatureModel, ParamValue, Violations};
use crate::neurogenome::{
    Activation, NetworkSpec, WeightRange, DEFAULT_PRUNE_THRESHOLD, DEFAULT_WEIGHT_RANGE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchSpaceError {
    #[error(transparent)]
    Invalid(#[from] Violations),
    #[error("configuration selects no activation function")]
    NoActivation,
    #[error("configuration selects more than one activation function")]
    ConflictingActivation,
    #[error("unknown activation {0:?}")]
    UnknownActivation(String),
    #[error("configuration selects no hidden-layer bound")]
    NoHiddenMax,
    #[error("configuration selects more than one hidden-layer bound")]
    ConflictingHiddenMax,
    #[error("configuration yields no network inputs")]
    NoInputs,
    #[error("configuration yields no network outputs")]
    NoOutputs,
    #[error("signal name {0:?} appears twice")]
    DuplicateName(String),
    #[error("param {key:?} of feature {feature:?} has the wrong type or value")]
    BadParam { feature: String, key: String },
    #[error("weight range [{lo}, {hi}] must satisfy lo < 0 < hi")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("prune threshold {threshold} must lie in (0, {hi})")]
    InvalidPruneThreshold { threshold: f64, hi: f64 },
}

/// Search space the configuration allows the learner to explore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchSpace {
    /// Sensor inputs in model order, then one slot per fed-back output.
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub hidden_max: usize,
    pub activation: Activation,
    pub weight_range: WeightRange,
    pub prune_threshold: f64,
    pub recurrent_outputs_fed_back: Vec<String>,
}

impl SearchSpace {
    pub fn check(&self) -> Result<(), SearchSpaceError> {
        if self.input_names.is_empty() {
            return Err(SearchSpaceError::NoInputs);
        }
        if self.output_names.is_empty() {
            return Err(SearchSpaceError::NoOutputs);
        }
        for names in [&self.input_names, &self.output_names] {
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    return Err(SearchSpaceError::DuplicateName(n.clone()));
                }
            }
        }
        let WeightRange { lo, hi } = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo < 0.0 && 0.0 < hi) {
            return Err(SearchSpaceError::InvalidRange { lo, hi });
        }
        let t = self.prune_threshold;
        if !(t > 0.0 && t < hi) {
            return Err(SearchSpaceError::InvalidPruneThreshold { threshold: t, hi });
        }
        if self.hidden_max == 0 {
            return Err(SearchSpaceError::NoHiddenMax);
        }
        Ok(())
    }

    /// Network spanning the full search space: the hidden layer starts at its
    /// maximum width and pruning decides how much of it survives.
    pub fn network_spec(&self) -> NetworkSpec {
        NetworkSpec {
            inputs: self.input_names.len(),
            hidden: self.hidden_max,
            outputs: self.output_names.len(),
            activation: self.activation,
            weight_range: self.weight_range,
            prune_threshold: self.prune_threshold,
        }
    }
}

/// Derives the learner's search space from a valid configuration.
///
/// Features contribute through their (binding-overridden) params: `input`
/// and `output` name network signals, `feedback` on an output appends a
/// recurrent input, `activation`/`threshold` and `hiddenMax` come from the
/// chosen neural alternatives, and `weightMin`/`weightMax`/`pruneThreshold`
/// may override the defaults from any selected feature.
pub fn derive_search_space(
    model: &FeatureModel,
    config: &Configuration,
) -> Result<SearchSpace, SearchSpaceError> {
    validate(model, config)?;

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut feedback_inputs = Vec::new();
    let mut fed_back = Vec::new();
    let mut activation = None;
    let mut hidden_max = None;
    let mut weight_range = DEFAULT_WEIGHT_RANGE;
    let mut prune_threshold = DEFAULT_PRUNE_THRESHOLD;

    for node in model.nodes() {
        if !config.is_selected(&node.id) {
            continue;
        }
        let params = config.effective_params(node);
        let bad = |key: &str| SearchSpaceError::BadParam {
            feature: node.id.clone(),
            key: key.to_string(),
        };
        let text = |key: &str| -> Result<Option<String>, SearchSpaceError> {
            match params.get(key) {
                None => Ok(None),
                Some(ParamValue::Text(s)) => Ok(Some(s.clone())),
                Some(_) => Err(bad(key)),
            }
        };
        let real = |key: &str| -> Result<Option<f64>, SearchSpaceError> {
            match params.get(key) {
                None => Ok(None),
                Some(v) => v.as_f64().map(Some).ok_or_else(|| bad(key)),
            }
        };

        if let Some(name) = text(PARAM_INPUT)? {
            inputs.push(name);
        }
        if let Some(name) = text(PARAM_OUTPUT)? {
            if let Some(fb) = text(PARAM_FEEDBACK)? {
                feedback_inputs.push(fb);
                fed_back.push(name.clone());
            }
            outputs.push(name);
        }
        if let Some(name) = text(PARAM_ACTIVATION)? {
            if activation.is_some() {
                return Err(SearchSpaceError::ConflictingActivation);
            }
            let act = Activation::from_name(&name, real(PARAM_THRESHOLD)?)
                .ok_or(SearchSpaceError::UnknownActivation(name))?;
            activation = Some(act);
        }
        if let Some(v) = params.get(PARAM_HIDDEN_MAX) {
            if hidden_max.is_some() {
                return Err(SearchSpaceError::ConflictingHiddenMax);
            }
            let h = v
                .as_i64()
                .filter(|&h| h > 0)
                .ok_or_else(|| bad(PARAM_HIDDEN_MAX))?;
            hidden_max = Some(h as usize);
        }
        if let Some(lo) = real(PARAM_WEIGHT_MIN)? {
            weight_range.lo = lo;
        }
        if let Some(hi) = real(PARAM_WEIGHT_MAX)? {
            weight_range.hi = hi;
        }
        if let Some(t) = real(PARAM_PRUNE_THRESHOLD)? {
            prune_threshold = t;
        }
    }

    inputs.extend(feedback_inputs);
    let space = SearchSpace {
        input_names: inputs,
        output_names: outputs,
        hidden_max: hidden_max.ok_or(SearchSpaceError::NoHiddenMax)?,
        activation: activation.ok_or(SearchSpaceError::NoActivation)?,
        weight_range,
        prune_threshold,
        recurrent_outputs_fed_back: fed_back,
    };
    space.check()?;
    Ok(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_model::{expert_configuration, smart_light_model, Rule};

    #[test]
    fn expert_configuration_space() {
        let s = derive_search_space(&smart_light_model(), &expert_configuration()).unwrap();
        assert_eq!(
            s.input_names,
            ["light", "motion", "wirelessReceiver", "prevListening"]
        );
        assert_eq!(
            s.output_names,
            ["listeningDecision", "wirelessTransmitter", "lightDecision"]
        );
        assert_eq!(s.hidden_max, 5);
        assert_eq!(s.activation, Activation::Sigmoid);
        assert_eq!(s.weight_range, WeightRange { lo: -2.0, hi: 2.0 });
        assert_eq!(s.prune_threshold, 0.25);
        assert_eq!(s.recurrent_outputs_fed_back, ["listeningDecision"]);
        let n = s.network_spec();
        assert_eq!((n.inputs, n.hidden, n.outputs), (4, 5, 3));
    }

    #[test]
    fn dropping_listening_removes_the_recurrent_input() {
        let c = expert_configuration().without("listeningDecision");
        let s = derive_search_space(&smart_light_model(), &c).unwrap();
        assert_eq!(s.input_names, ["light", "motion", "wirelessReceiver"]);
        assert_eq!(s.output_names, ["wirelessTransmitter", "lightDecision"]);
        assert!(s.recurrent_outputs_fed_back.is_empty());
    }

    #[test]
    fn bindings_override_defaults() {
        let m = smart_light_model();
        let c = expert_configuration()
            .choose(&m, "activation", "binaryThreshold")
            .unwrap()
            .bind("binaryThreshold", "threshold", 0.3)
            .bind("decision", "weightMin", -1.0)
            .bind("decision", "weightMax", 1.0)
            .bind("decision", "pruneThreshold", 0.1);
        let s = derive_search_space(&m, &c).unwrap();
        assert_eq!(s.activation, Activation::BinaryThreshold { threshold: 0.3 });
        assert_eq!(s.weight_range, WeightRange { lo: -1.0, hi: 1.0 });
        assert_eq!(s.prune_threshold, 0.1);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let m = smart_light_model();
        let c = expert_configuration().bind("decision", "pruneThreshold", 3.0);
        assert!(matches!(
            derive_search_space(&m, &c),
            Err(SearchSpaceError::InvalidPruneThreshold { .. })
        ));
        let c = expert_configuration().bind("five", "hiddenMax", "lots");
        assert!(matches!(
            derive_search_space(&m, &c),
            Err(SearchSpaceError::BadParam { .. })
        ));
        let c = expert_configuration().bind("sigmoid", "activation", "tanh");
        assert!(matches!(
            derive_search_space(&m, &c),
            Err(SearchSpaceError::UnknownActivation(_))
        ));
    }

    #[test]
    fn invalid_configuration_is_rejected_first() {
        let c = expert_configuration().with("linear");
        match derive_search_space(&smart_light_model(), &c) {
            Err(SearchSpaceError::Invalid(v)) => assert!(v.has(Rule::AlternativeExactlyOne)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_sensors_and_no_feedback_means_no_inputs() {
        let m = smart_light_model();
        let c = expert_configuration()
            .without("sensors")
            .without("lightSensor")
            .without("lightSensorTsl2561")
            .without("motionSensor")
            .without("wirelessReceiver")
            .without("listeningDecision");
        assert_eq!(derive_search_space(&m, &c), Err(SearchSpaceError::NoInputs));
    }

    #[test]
    fn activation_missing_in_custom_model() {
        use crate::feature_model::{Domain, FeatureNode};
        let root = FeatureNode::mandatory("r", Domain::Neural)
            .child(FeatureNode::mandatory("s", Domain::Body).param("input", "x"))
            .child(FeatureNode::mandatory("o", Domain::Body).param("output", "y"))
            .child(FeatureNode::mandatory("h", Domain::Neural).param("hiddenMax", 3i64));
        let m = FeatureModel::new("custom", root).unwrap();
        let c = Configuration::new("custom", ["r", "s", "o", "h"]);
        assert_eq!(
            derive_search_space(&m, &c),
            Err(SearchSpaceError::NoActivation)
        );
    }
}
