use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::neurogenome::{Genome, GenomeError, NetworkSpec};

/// Lamp light level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LampCommand {
    Off,
    Dim,
    On,
}

impl LampCommand {
    /// Thirds of the `[0, 1]` output range.
    pub fn from_level(raw: f64) -> Self {
        if raw < 1.0 / 3.0 {
            LampCommand::Off
        } else if raw < 2.0 / 3.0 {
            LampCommand::Dim
        } else {
            LampCommand::On
        }
    }

    /// Light added to the lamp's neighbourhood.
    pub fn contribution(self) -> f64 {
        match self {
            LampCommand::Off => 0.0,
            LampCommand::Dim => 0.5,
            LampCommand::On => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LampCommand::Off => "OFF",
            LampCommand::Dim => "DIM",
            LampCommand::On => "ON",
        }
    }
}

/// What one lamp senses at the start of a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SensorFrame {
    pub ambient: f64,
    pub motion: f64,
    pub received: f64,
    pub prev_listening: f64,
}

/// What one lamp does during a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LampAction {
    pub listening: bool,
    pub tx: f64,
    pub light: LampCommand,
}

/// Decodes the three outputs of the full lamp network
/// `[listeningDecision, wirelessTransmitter, lightDecision]`.
pub fn decode_outputs(raw: [f64; 3]) -> LampAction {
    LampAction {
        listening: raw[0] >= 0.5,
        tx: raw[1],
        light: LampCommand::from_level(raw[2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputSignal {
    Ambient,
    Motion,
    Received,
    PrevListening,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputSignal {
    Listening,
    Transmit,
    Light,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("no lamp sensor provides input {0:?}")]
    UnknownInput(String),
    #[error("no lamp actuator reads output {0:?}")]
    UnknownOutput(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
}

/// Binds network input/output slots to lamp signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoLayout {
    pub inputs: Vec<InputSignal>,
    pub outputs: Vec<OutputSignal>,
}

impl IoLayout {
    /// Layout of the expert configuration: four inputs, three outputs.
    pub fn full() -> Self {
        IoLayout {
            inputs: vec![
                InputSignal::Ambient,
                InputSignal::Motion,
                InputSignal::Received,
                InputSignal::PrevListening,
            ],
            outputs: vec![
                OutputSignal::Listening,
                OutputSignal::Transmit,
                OutputSignal::Light,
            ],
        }
    }

    pub fn from_names<S: AsRef<str>>(inputs: &[S], outputs: &[S]) -> Result<Self, LayoutError> {
        let inputs = inputs
            .iter()
            .map(|n| match n.as_ref() {
                "light" => Ok(InputSignal::Ambient),
                "motion" => Ok(InputSignal::Motion),
                "wirelessReceiver" => Ok(InputSignal::Received),
                "prevListening" => Ok(InputSignal::PrevListening),
                other => Err(LayoutError::UnknownInput(other.to_string())),
            })
            .collect::<Result<_, _>>()?;
        let outputs = outputs
            .iter()
            .map(|n| match n.as_ref() {
                "listeningDecision" => Ok(OutputSignal::Listening),
                "wirelessTransmitter" => Ok(OutputSignal::Transmit),
                "lightDecision" => Ok(OutputSignal::Light),
                other => Err(LayoutError::UnknownOutput(other.to_string())),
            })
            .collect::<Result<_, _>>()?;
        Ok(IoLayout { inputs, outputs })
    }

    pub fn encode(&self, frame: &SensorFrame, out: &mut [f64]) {
        for (slot, signal) in out.iter_mut().zip(&self.inputs) {
            *slot = match signal {
                InputSignal::Ambient => frame.ambient,
                InputSignal::Motion => frame.motion,
                InputSignal::Received => frame.received,
                InputSignal::PrevListening => frame.prev_listening,
            };
        }
    }

    /// Missing outputs fall back to: always listening, no transmission,
    /// light off.
    pub fn decode(&self, raw: &[f64]) -> LampAction {
        let mut action = LampAction {
            listening: true,
            tx: 0.0,
            light: LampCommand::Off,
        };
        for (&v, signal) in raw.iter().zip(&self.outputs) {
            match signal {
                OutputSignal::Listening => action.listening = v >= 0.5,
                OutputSignal::Transmit => action.tx = v,
                OutputSignal::Light => action.light = LampCommand::from_level(v),
            }
        }
        action
    }
}

/// Decides every lamp's action from its sensor frame. All lamps share one
/// policy.
pub trait LampPolicy {
    fn decide(&mut self, frame: &SensorFrame) -> LampAction;
}

/// Fixed behaviours used as baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BaselinePolicy {
    AlwaysOn,
    AlwaysOff,
}

impl LampPolicy for BaselinePolicy {
    fn decide(&mut self, _: &SensorFrame) -> LampAction {
        let light = match self {
            BaselinePolicy::AlwaysOn => LampCommand::On,
            BaselinePolicy::AlwaysOff => LampCommand::Off,
        };
        LampAction {
            listening: false,
            tx: 0.0,
            light,
        }
    }
}

/// A genome driving the lamps.
pub struct NetworkPolicy<'a> {
    spec: &'a NetworkSpec,
    genome: &'a Genome,
    layout: &'a IoLayout,
    input: Vec<f64>,
    hidden: Vec<f64>,
    output: Vec<f64>,
}

impl<'a> NetworkPolicy<'a> {
    pub fn new(
        spec: &'a NetworkSpec,
        genome: &'a Genome,
        layout: &'a IoLayout,
    ) -> Result<Self, LayoutError> {
        spec.check_genome(genome)?;
        if layout.inputs.len() != spec.inputs || layout.outputs.len() != spec.outputs {
            return Err(GenomeError::DimensionMismatch {
                what: "layout signals",
                expected: spec.inputs + spec.outputs,
                actual: layout.inputs.len() + layout.outputs.len(),
            }
            .into());
        }
        Ok(NetworkPolicy {
            spec,
            genome,
            layout,
            input: vec![0.0; spec.inputs],
            hidden: vec![0.0; spec.hidden],
            output: vec![0.0; spec.outputs],
        })
    }
}

impl LampPolicy for NetworkPolicy<'_> {
    fn decide(&mut self, frame: &SensorFrame) -> LampAction {
        self.layout.encode(frame, &mut self.input);
        self.spec
            .forward_into(self.genome, &self.input, &mut self.hidden, &mut self.output)
            .expect("dimensions checked at construction");
        self.layout.decode(&self.output)
    }
}
