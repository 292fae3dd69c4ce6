//! Built-in feature model of a smart street light agent.

use super::{Configuration, Domain, FeatureModel, FeatureNode, GroupType};

pub const MODEL_VERSION: &str = "smart-light/1";

/// Param key naming the network input a sensor feeds.
pub(crate) const PARAM_INPUT: &str = "input";
/// Param key naming the network output an actuator reads.
pub(crate) const PARAM_OUTPUT: &str = "output";
/// Param key on an output whose value is fed back as an extra input.
pub(crate) const PARAM_FEEDBACK: &str = "feedback";
pub(crate) const PARAM_ACTIVATION: &str = "activation";
pub(crate) const PARAM_THRESHOLD: &str = "threshold";
pub(crate) const PARAM_HIDDEN_MAX: &str = "hiddenMax";
pub(crate) const PARAM_WEIGHT_MIN: &str = "weightMin";
pub(crate) const PARAM_WEIGHT_MAX: &str = "weightMax";
pub(crate) const PARAM_PRUNE_THRESHOLD: &str = "pruneThreshold";

pub fn smart_light_model() -> FeatureModel {
    use FeatureNode as F;

    let sensors = F::optional("sensors", Domain::Body)
        .named("Sensors")
        .group(GroupType::Or)
        .children([
            F::optional("lightSensor", Domain::Body)
                .named("Light sensor")
                .group(GroupType::Alternative)
                .param(PARAM_INPUT, "light")
                .children([
                    F::optional("lightSensorTsl2561", Domain::Body)
                        .named("TSL2561")
                        .param("sensing", "lowLight"),
                    F::optional("lightSensorTcs34725", Domain::Body)
                        .named("TCS34725")
                        .param("sensing", "fullColor"),
                ]),
            F::optional("motionSensor", Domain::Body)
                .named("Motion sensor")
                .param(PARAM_INPUT, "motion"),
            F::optional("wirelessReceiver", Domain::Body)
                .named("Wireless receiver")
                .param(PARAM_INPUT, "wirelessReceiver"),
        ]);

    let decision = F::mandatory("decision", Domain::Neural)
        .named("Decision (neural network)")
        .children([
            F::mandatory("activation", Domain::Neural)
                .named("Activation function")
                .group(GroupType::Alternative)
                .children([
                    F::optional("sigmoid", Domain::Neural)
                        .named("Sigmoid")
                        .param(PARAM_ACTIVATION, "sigmoid"),
                    F::optional("binaryThreshold", Domain::Neural)
                        .named("Binary with threshold")
                        .param(PARAM_ACTIVATION, "binaryThreshold")
                        .param(PARAM_THRESHOLD, 0.5),
                    F::optional("linear", Domain::Neural)
                        .named("Linear")
                        .param(PARAM_ACTIVATION, "linear"),
                ]),
            F::mandatory("hiddenMax", Domain::Neural)
                .named("Maximum hidden units")
                .group(GroupType::Alternative)
                .children([
                    F::optional("two", Domain::Neural)
                        .named("two")
                        .param(PARAM_HIDDEN_MAX, 2i64),
                    F::optional("five", Domain::Neural)
                        .named("five")
                        .param(PARAM_HIDDEN_MAX, 5i64),
                ]),
        ]);

    // Output order is network output order.
    let output = F::mandatory("output", Domain::Body)
        .named("Output")
        .group(GroupType::Or)
        .children([
            F::optional("listeningDecision", Domain::Behavior)
                .named("Listening decision")
                .param(PARAM_OUTPUT, "listeningDecision")
                .param(PARAM_FEEDBACK, "prevListening"),
            F::optional("wirelessTransmitter", Domain::Body)
                .named("Wireless transmitter")
                .param(PARAM_OUTPUT, "wirelessTransmitter"),
            F::optional("lightActuator", Domain::Body)
                .named("Light actuator (OFF/DIM/ON)")
                .param(PARAM_OUTPUT, "lightDecision")
                .param("levels", "OFF/DIM/ON"),
        ]);

    let root = F::mandatory("smartLight", Domain::Behavior)
        .named("Smart light agent")
        .children([
            F::mandatory("input", Domain::Body)
                .named("Input")
                .child(sensors),
            decision,
            output,
            // Inert metadata leaves.
            F::optional("energyConsumption", Domain::Behavior)
                .named("Energy consumption report")
                .param("unit", "Wh"),
            F::optional("notification", Domain::Behavior)
                .named("Failure notification")
                .param("channel", "sms"),
        ]);

    FeatureModel::new(MODEL_VERSION, root).expect("built-in model is well formed")
}

/// Three sensors, two physical outputs plus the listening behaviour, five
/// hidden units and a sigmoid activation.
pub fn expert_configuration() -> Configuration {
    Configuration::new(
        MODEL_VERSION,
        [
            "smartLight",
            "input",
            "sensors",
            "lightSensor",
            "lightSensorTsl2561",
            "motionSensor",
            "wirelessReceiver",
            "decision",
            "activation",
            "sigmoid",
            "hiddenMax",
            "five",
            "output",
            "listeningDecision",
            "wirelessTransmitter",
            "lightActuator",
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feature_model::{validate, FeatureKind};

    #[test]
    fn root_is_mandatory() {
        assert_eq!(smart_light_model().root().kind, FeatureKind::Mandatory);
    }

    #[test]
    fn light_sensor_has_brands() {
        let m = smart_light_model();
        let ls = m.node("lightSensor").unwrap();
        assert_eq!(ls.group_type, GroupType::Alternative);
        assert!(ls.children.len() >= 2);
    }

    #[test]
    fn validates_its_expert_configuration() {
        assert!(validate(&smart_light_model(), &expert_configuration()).is_ok());
    }

    #[test]
    fn neural_groups_have_expected_alternatives() {
        let m = smart_light_model();
        let ids = |g: &str| -> Vec<String> {
            m.node(g)
                .unwrap()
                .children
                .iter()
                .map(|c| c.id.clone())
                .collect()
        };
        assert_eq!(ids("activation"), ["sigmoid", "binaryThreshold", "linear"]);
        assert_eq!(ids("hiddenMax"), ["two", "five"]);
        assert_eq!(m.node("activation").unwrap().domain, Domain::Neural);
    }
}
