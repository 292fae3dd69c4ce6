//! Fixed three-layer dense network genome.
//!
//! A genome holds the input→hidden and hidden→output weight matrices of a
//! network with exactly one hidden layer and no bias terms. A weight that is
//! exactly `0.0` is a removed connection: it contributes nothing to the next
//! neuron. Pruning snaps every weight whose magnitude is below the network spec's
//! threshold to zero, and an input whose whole outgoing row is zero is
//! considered deselected.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default firing threshold of [`Activation::BinaryThreshold`].
pub const DEFAULT_BINARY_THRESHOLD: f64 = 0.5;
/// Default pruning threshold for the default `[-2, 2]` weight range.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 0.25;
/// Default weight range.
pub const DEFAULT_WEIGHT_RANGE: WeightRange = WeightRange { lo: -2.0, hi: 2.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenomeError {
    #[error("network must have at least one {0} unit")]
    EmptyLayer(&'static str),
    #[error("weight range [{lo}, {hi}] must satisfy lo <= 0 <= hi with lo < hi")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("prune threshold {threshold} must lie in (0, {hi})")]
    InvalidPruneThreshold { threshold: f64, hi: f64 },
    #[error("binary activation threshold must be finite, got {0}")]
    InvalidActivationThreshold(f64),
    #[error("expected {expected} {what}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("malformed genome text: {0}")]
    Malformed(String),
}

/// Neuron activation function, shared by the hidden and output layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Activation {
    Sigmoid,
    BinaryThreshold {
        threshold: f64,
    },
    /// Identity clamped to `[0, 1]`.
    Linear,
}

impl Activation {
    pub fn binary() -> Self {
        Activation::BinaryThreshold {
            threshold: DEFAULT_BINARY_THRESHOLD,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
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

    /// Name used in feature-model params and file headers.
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::BinaryThreshold { .. } => "binaryThreshold",
            Activation::Linear => "linear",
        }
    }

    /// Threshold of a binary activation, `None` otherwise.
    pub fn threshold(self) -> Option<f64> {
        match self {
            Activation::BinaryThreshold { threshold } => Some(threshold),
            _ => None,
        }
    }

    /// Builds an activation from its name; `threshold` only applies to
    /// `binaryThreshold` and defaults to 0.5.
    pub fn from_name(name: &str, threshold: Option<f64>) -> Option<Self> {
        match name {
            "sigmoid" => Some(Activation::Sigmoid),
            "linear" => Some(Activation::Linear),
            "binaryThreshold" => Some(Activation::BinaryThreshold {
                threshold: threshold.unwrap_or(DEFAULT_BINARY_THRESHOLD),
            }),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::BinaryThreshold { threshold } => write!(f, "binaryThreshold({threshold})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Closed interval `[lo, hi]` of admissible weights; serialized as `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for WeightRange {
    fn from([lo, hi]: [f64; 2]) -> Self {
        WeightRange { lo, hi }
    }
}

impl From<WeightRange> for [f64; 2] {
    fn from(r: WeightRange) -> Self {
        [r.lo, r.hi]
    }
}

impl WeightRange {
    #[inline]
    pub fn clamp(self, w: f64) -> f64 {
        w.clamp(self.lo, self.hi)
    }
}

/// Shape and hyper-parameters of a three-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkSpec {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weight_range: WeightRange,
    pub prune_threshold: f64,
}

impl NetworkSpec {
    /// Spec with the default weight range and prune threshold.
    pub fn new(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        activation: Activation,
    ) -> Result<Self, GenomeError> {
        NetworkSpec {
            inputs,
            hidden,
            outputs,
            activation,
            weight_range: DEFAULT_WEIGHT_RANGE,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
        .checked()
    }

    pub fn checked(self) -> Result<Self, GenomeError> {
        if self.inputs == 0 {
            return Err(GenomeError::EmptyLayer("input"));
        }
        if self.hidden == 0 {
            return Err(GenomeError::EmptyLayer("hidden"));
        }
        if self.outputs == 0 {
            return Err(GenomeError::EmptyLayer("output"));
        }
        let WeightRange { lo, hi } = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= 0.0 && 0.0 <= hi && lo < hi) {
            return Err(GenomeError::InvalidRange { lo, hi });
        }
        let t = self.prune_threshold;
        if !(t > 0.0 && t < hi) {
            return Err(GenomeError::InvalidPruneThreshold { threshold: t, hi });
        }
        if let Activation::BinaryThreshold { threshold } = self.activation {
            if !threshold.is_finite() {
                return Err(GenomeError::InvalidActivationThreshold(threshold));
            }
        }
        Ok(self)
    }

    pub fn weight_count(&self) -> usize {
        self.inputs * self.hidden + self.hidden * self.outputs
    }

    /// Dense genome with every weight drawn uniformly from the weight range,
    /// redrawing any value that pruning would remove.
    pub fn random_genome<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        let mut draw = || loop {
            let w = rng.random_range(self.weight_range.lo..=self.weight_range.hi);
            if w.abs() >= self.prune_threshold {
                break w;
            }
        };
        let input_hidden = (0..self.inputs * self.hidden).map(|_| draw()).collect();
        let hidden_output = (0..self.hidden * self.outputs).map(|_| draw()).collect();
        Genome {
            inputs: self.inputs,
            hidden: self.hidden,
            outputs: self.outputs,
            input_hidden,
            hidden_output,
        }
    }

    /// Replaces every weight with `|w| < prune_threshold` by exactly `0.0`.
    pub fn prune(&self, genome: &Genome) -> Genome {
        let mut out = genome.clone();
        self.prune_in_place(&mut out);
        out
    }

    pub fn prune_in_place(&self, genome: &mut Genome) {
        let t = self.prune_threshold;
        for w in genome
            .input_hidden
            .iter_mut()
            .chain(genome.hidden_output.iter_mut())
        {
            if w.abs() < t {
                *w = 0.0;
            }
        }
    }

    pub fn check_genome(&self, genome: &Genome) -> Result<(), GenomeError> {
        let dims = [
            ("inputs", self.inputs, genome.inputs),
            ("hidden units", self.hidden, genome.hidden),
            ("outputs", self.outputs, genome.outputs),
        ];
        for (what, expected, actual) in dims {
            if expected != actual {
                return Err(GenomeError::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        Ok(())
    }

    pub fn forward(&self, genome: &Genome, inputs: &[f64]) -> Result<Vec<f64>, GenomeError> {
        let mut hidden = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.outputs];
        self.forward_into(genome, inputs, &mut hidden, &mut out)?;
        Ok(out)
    }

    /// Allocation-free forward pass. `hidden` and `out` must be sized to the
    /// spec's hidden and output widths.
    pub fn forward_into(
        &self,
        genome: &Genome,
        inputs: &[f64],
        hidden: &mut [f64],
        out: &mut [f64],
    ) -> Result<(), GenomeError> {
        self.check_genome(genome)?;
        if inputs.len() != self.inputs {
            return Err(GenomeError::DimensionMismatch {
                what: "input values",
                expected: self.inputs,
                actual: inputs.len(),
            });
        }
        debug_assert_eq!(hidden.len(), self.hidden);
        debug_assert_eq!(out.len(), self.outputs);

        let act = self.activation;
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (i, x) in inputs.iter().enumerate() {
                let w = genome.input_hidden[i * self.hidden + j];
                if w != 0.0 {
                    sum += x * w;
                }
            }
            *h = act.apply(sum);
        }
        for (k, o) in out.iter_mut().enumerate() {
            let mut sum = 0.0;
            for (j, h) in hidden.iter().enumerate() {
                let w = genome.hidden_output[j * self.outputs + k];
                if w != 0.0 {
                    sum += h * w;
                }
            }
            *o = act.apply(sum);
        }
        Ok(())
    }
}

/// Weights of a three-layer network. `input_hidden` is `inputs × hidden`
/// row-major (row = input), `hidden_output` is `hidden × outputs` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Genome {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    input_hidden: Vec<f64>,
    hidden_output: Vec<f64>,
}

/// Live structure of a pruned genome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TopologyStats {
    pub live_inputs: usize,
    pub live_hidden: usize,
    pub live_connections: usize,
}

impl Genome {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Genome {
            inputs: spec.inputs,
            hidden: spec.hidden,
            outputs: spec.outputs,
            input_hidden: vec![0.0; spec.inputs * spec.hidden],
            hidden_output: vec![0.0; spec.hidden * spec.outputs],
        }
    }

    /// Builds a genome from the flat `[input_hidden..., hidden_output...]`
    /// layout.
    pub fn from_flat(spec: &NetworkSpec, weights: &[f64]) -> Result<Self, GenomeError> {
        if weights.len() != spec.weight_count() {
            return Err(GenomeError::DimensionMismatch {
                what: "weights",
                expected: spec.weight_count(),
                actual: weights.len(),
            });
        }
        let split = spec.inputs * spec.hidden;
        Ok(Genome {
            inputs: spec.inputs,
            hidden: spec.hidden,
            outputs: spec.outputs,
            input_hidden: weights[..split].to_vec(),
            hidden_output: weights[split..].to_vec(),
        })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights().collect()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.input_hidden
            .iter()
            .chain(self.hidden_output.iter())
            .copied()
    }

    pub fn weights_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.input_hidden
            .iter_mut()
            .chain(self.hidden_output.iter_mut())
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn input_hidden(&self, input: usize, hidden: usize) -> f64 {
        self.input_hidden[input * self.hidden + hidden]
    }

    pub fn hidden_output(&self, hidden: usize, output: usize) -> f64 {
        self.hidden_output[hidden * self.outputs + output]
    }

    pub fn set_input_hidden(&mut self, input: usize, hidden: usize, w: f64) {
        self.input_hidden[input * self.hidden + hidden] = w;
    }

    pub fn set_hidden_output(&mut self, hidden: usize, output: usize, w: f64) {
        self.hidden_output[hidden * self.outputs + output] = w;
    }

    /// Inputs whose every outgoing connection has been removed.
    pub fn deselected_inputs(&self) -> BTreeSet<usize> {
        (0..self.inputs)
            .filter(|&i| self.input_row(i).iter().all(|&w| w == 0.0))
            .collect()
    }

    /// Number of live (non-zero) connections leaving input `i`.
    pub fn input_live_connections(&self, i: usize) -> usize {
        self.input_row(i).iter().filter(|&&w| w != 0.0).count()
    }

    fn input_row(&self, i: usize) -> &[f64] {
        &self.input_hidden[i * self.hidden..(i + 1) * self.hidden]
    }

    /// Number of nonzero weights.
    pub fn live_connections(&self) -> usize {
        self.weights().filter(|&w| w != 0.0).count()
    }

    pub fn topology(&self) -> TopologyStats {
        let live_hidden = (0..self.hidden)
            .filter(|&j| {
                let incoming = (0..self.inputs).any(|i| self.input_hidden(i, j) != 0.0);
                let outgoing = (0..self.outputs).any(|k| self.hidden_output(j, k) != 0.0);
                incoming && outgoing
            })
            .count();
        TopologyStats {
            live_inputs: self.inputs - self.deselected_inputs().len(),
            live_hidden,
            live_connections: self.live_connections(),
        }
    }
}

/// Header of the canonical genome text encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GenomeHeader {
    #[serde(rename = "I")]
    inputs: usize,
    #[serde(rename = "H")]
    hidden: usize,
    #[serde(rename = "O")]
    outputs: usize,
    activation: String,
    #[serde(rename = "thetaAct")]
    theta_act: Option<f64>,
    #[serde(rename = "thetaP")]
    theta_p: f64,
    #[serde(rename = "weightRange")]
    weight_range: WeightRange,
}

#[derive(Debug, Serialize, Deserialize)]
struct GenomeText {
    spec: GenomeHeader,
    weights: Vec<String>,
}

/// 17 significant digits, exact for `f64`.
fn encode_weight(w: f64) -> String {
    format!("{w:.16e}")
}

/// Canonical text encoding: a JSON document with the spec header and the flat
/// weight list, each weight written with 17 significant digits.
pub fn encode_genome(spec: &NetworkSpec, genome: &Genome) -> Result<String, GenomeError> {
    spec.check_genome(genome)?;
    let doc = GenomeText {
        spec: GenomeHeader {
            inputs: spec.inputs,
            hidden: spec.hidden,
            outputs: spec.outputs,
            activation: spec.activation.name().to_string(),
            theta_act: spec.activation.threshold(),
            theta_p: spec.prune_threshold,
            weight_range: spec.weight_range,
        },
        weights: genome.weights().map(encode_weight).collect(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| GenomeError::Malformed(e.to_string()))
}

pub fn decode_genome(text: &str) -> Result<(NetworkSpec, Genome), GenomeError> {
    let doc: GenomeText =
        serde_json::from_str(text).map_err(|e| GenomeError::Malformed(e.to_string()))?;
    let h = doc.spec;
    let activation = Activation::from_name(&h.activation, h.theta_act)
        .ok_or_else(|| GenomeError::Malformed(format!("unknown activation {:?}", h.activation)))?;
    let spec = NetworkSpec {
        inputs: h.inputs,
        hidden: h.hidden,
        outputs: h.outputs,
        activation,
        weight_range: h.weight_range,
        prune_threshold: h.theta_p,
    }
    .checked()?;
    let weights = doc
        .weights
        .iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| GenomeError::Malformed(format!("bad weight {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let genome = Genome::from_flat(&spec, &weights)?;
    Ok((spec, genome))
}
