use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, EvalContext, NodeId, QueryInfo, SlotId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    /// `1` if the pre-activation is at least 0, else `0`.
    Step,
    Linear,
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "step" => Ok(Activation::Step),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::UnsupportedActivation(other.to_string())),
        }
    }
}

/// One dense layer: `act(W·x + b)` with `weights` holding one row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(deserialize_with = "activation_from_str")]
    pub activation: Activation,
}

fn activation_from_str<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Activation, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

/// A feed-forward network of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReluNet {
    pub inputs: usize,
    pub layers: Vec<Layer>,
}

impl ReluNet {
    pub fn new(inputs: usize, layers: Vec<Layer>) -> Result<Self> {
        let net = ReluNet { inputs, layers };
        net.validate()?;
        Ok(net)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let net: ReluNet = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            locus: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("nets serialize");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0 {
            return Err(Error::invalid("net", "a net needs at least one input"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("net", "a net needs at least one layer"));
        }
        let mut width = self.inputs;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weights.is_empty() || layer.weights.len() != layer.bias.len() {
                return Err(Error::invalid(
                    "net",
                    format!("layer {l} has {} weight rows and {} biases", layer.weights.len(), layer.bias.len()),
                ));
            }
            if let Some(r) = layer.weights.iter().position(|row| row.len() != width) {
                return Err(Error::invalid(
                    "net",
                    format!("layer {l} row {r} has {} weights for {width} inputs", layer.weights[r].len()),
                ));
            }
            if layer.weights.iter().flatten().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::invalid("net", format!("layer {l} has a non-finite weight")));
            }
            width = layer.weights.len();
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.len())
    }

    /// Number of weighted connections.
    pub fn edges(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() * l.weights[0].len()).sum()
    }

    /// Direct forward pass.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            cur = layer
                .weights
                .iter()
                .zip(&layer.bias)
                .map(|(row, b)| {
                    let z = row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>() + b;
                    match layer.activation {
                        Activation::Relu => z.max(0.0),
                        Activation::Step => {
                            if z >= 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Activation::Linear => z,
                    }
                })
                .collect();
        }
        cur
    }
}

/// Name of the evidence variable carrying input `i`.
pub fn input_name(i: usize) -> String {
    format!("x{i}")
}

/// Transpiles a net into a circuit with one evidence slot per input (variable
/// `x<i>`, state `value`) and one output per output unit. Weights become
/// constant leaves; a ReLU becomes `z · test(z, 0, 1, 0)` and a step unit
/// becomes `test(z, 0, 1, 0)`.
pub fn relu_to_tac(net: &ReluNet) -> Result<Circuit> {
    net.validate()?;
    let mut b = CircuitBuilder::new();
    let mut cur: Vec<NodeId> = (0..net.inputs).map(|i| b.evidence(&input_name(i), "value")).collect();
    let zero = b.constant(0.0);
    let one = b.constant(1.0);
    for layer in &net.layers {
        let mut next = Vec::with_capacity(layer.weights.len());
        for (row, bias) in layer.weights.iter().zip(&layer.bias) {
            let mut terms = Vec::with_capacity(row.len() + 1);
            for (w, x) in row.iter().zip(&cur) {
                if *w != 0.0 {
                    let c = b.constant(*w);
                    terms.push(b.mul(&[c, *x]));
                }
            }
            if *bias != 0.0 {
                terms.push(b.constant(*bias));
            }
            let z = b.add(&terms);
            let out = match layer.activation {
                Activation::Linear => z,
                Activation::Step => b.test(z, zero, one, zero),
                Activation::Relu => {
                    let gate = b.test(z, zero, one, zero);
                    b.mul(&[z, gate])
                }
            };
            next.push(out);
        }
        cur = next;
    }
    let query = QueryInfo {
        variable: "out".into(),
        states: (0..cur.len()).map(|i| format!("y{i}")).collect(),
    };
    b.finish(&cur, query)
}

/// Evaluates a transpiled net on raw inputs (unrestricted reals).
pub fn eval_transpiled(circuit: &Circuit, x: &[f64]) -> Result<Vec<f64>> {
    let mut ctx = EvalContext::new(circuit);
    for (i, v) in x.iter().enumerate() {
        let slots = circuit.slots_of(&input_name(i));
        let s: SlotId = *slots
            .first()
            .ok_or_else(|| Error::UnknownVariable(input_name(i)))?;
        ctx.set_slot(s, *v);
    }
    circuit.evaluate(&mut ctx)
}
