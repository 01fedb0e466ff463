//! Fixed-topology substrate controller whose weights are painted by a CPPN.
//!
//! Layers (input `n + 7`, hidden `n`, output `n`) sit on horizontal lines at
//! `y = -1, 0, 1`, neurons evenly spaced over `x in [-1, 1]`. Each weight is
//! the CPPN queried at `(source x, source y, target x, target y)` and is
//! zeroed when its magnitude falls below the pruning threshold.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::genome::{Cppn, Genome};
use crate::world::Vec2;

/// Actuator limit for every joint, radians.
pub const JOINT_LIMIT: f64 = FRAC_PI_2;

/// Inputs beyond the joint angles: four oscillators, two directional, bias.
const EXTRA_INPUTS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubstrateConfig {
    pub joints: usize,
    pub prune_threshold: f64,
    /// Base frequency of the oscillator inputs, Hz.
    pub cpg_frequency: f64,
}

impl Default for SubstrateConfig {
    fn default() -> Self {
        Self {
            joints: 8,
            prune_threshold: 0.2,
            cpg_frequency: 1.0,
        }
    }
}

impl SubstrateConfig {
    pub fn input_count(&self) -> usize {
        self.joints + EXTRA_INPUTS
    }

    pub fn hidden_count(&self) -> usize {
        self.joints
    }

    pub fn output_count(&self) -> usize {
        self.joints
    }

    /// Neuron coordinates per layer: input, hidden, output.
    pub fn layout(&self) -> [Vec<(f64, f64)>; 3] {
        [
            layer_coords(self.input_count(), -1.0),
            layer_coords(self.hidden_count(), 0.0),
            layer_coords(self.output_count(), 1.0),
        ]
    }
}

fn layer_coords(count: usize, y: f64) -> Vec<(f64, f64)> {
    match count {
        0 => Vec::new(),
        1 => vec![(0.0, y)],
        _ => (0..count)
            .map(|k| (-1.0 + 2.0 * k as f64 / (count - 1) as f64, y))
            .collect(),
    }
}

/// Dense row-major weights; `input_hidden[i * hidden + j]` connects input
/// `i` to hidden `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubstrateNetwork {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    input_hidden: Vec<f64>,
    hidden_output: Vec<f64>,
}

impl SubstrateNetwork {
    /// All-zero network of the configured shape.
    pub fn zeros(cfg: &SubstrateConfig) -> Self {
        Self {
            inputs: cfg.input_count(),
            hidden: cfg.hidden_count(),
            outputs: cfg.output_count(),
            input_hidden: vec![0.0; cfg.input_count() * cfg.hidden_count()],
            hidden_output: vec![0.0; cfg.hidden_count() * cfg.output_count()],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.inputs, self.hidden, self.outputs)
    }

    pub fn input_hidden(&self) -> &[f64] {
        &self.input_hidden
    }

    pub fn hidden_output(&self) -> &[f64] {
        &self.hidden_output
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.input_hidden.iter().chain(&self.hidden_output).copied()
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights().filter(|w| *w != 0.0).count()
    }

    pub fn input_hidden_mut(&mut self) -> &mut [f64] {
        &mut self.input_hidden
    }

    pub fn hidden_output_mut(&mut self) -> &mut [f64] {
        &mut self.hidden_output
    }

    /// `tanh` hidden layer, linear output clipped to the joint limits.
    pub fn forward(&self, inputs: &[f64]) -> Vec<f64> {
        assert_eq!(inputs.len(), self.inputs, "input vector length");
        let mut hidden = vec![0.0; self.hidden];
        for (i, &x) in inputs.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &self.input_hidden[i * self.hidden..(i + 1) * self.hidden];
            for (h, w) in hidden.iter_mut().zip(row) {
                *h += x * w;
            }
        }
        hidden.iter_mut().for_each(|h| *h = h.tanh());

        let mut out = vec![0.0; self.outputs];
        for (j, &h) in hidden.iter().enumerate() {
            let row = &self.hidden_output[j * self.outputs..(j + 1) * self.outputs];
            for (o, w) in out.iter_mut().zip(row) {
                *o += h * w;
            }
        }
        out.iter_mut()
            .for_each(|o| *o = o.clamp(-JOINT_LIMIT, JOINT_LIMIT));
        out
    }
}

/// Build a substrate from any weight pattern over neuron coordinates.
pub fn build_substrate_from<F>(pattern: F, cfg: &SubstrateConfig) -> SubstrateNetwork
where
    F: Fn(f64, f64, f64, f64) -> f64,
{
    let [input, hidden, output] = cfg.layout();
    let prune = |w: f64| if w.abs() < cfg.prune_threshold { 0.0 } else { w };
    let mut net = SubstrateNetwork::zeros(cfg);
    for (i, &(x1, y1)) in input.iter().enumerate() {
        for (j, &(x2, y2)) in hidden.iter().enumerate() {
            net.input_hidden[i * net.hidden + j] = prune(pattern(x1, y1, x2, y2));
        }
    }
    for (j, &(x1, y1)) in hidden.iter().enumerate() {
        for (k, &(x2, y2)) in output.iter().enumerate() {
            net.hidden_output[j * net.outputs + k] = prune(pattern(x1, y1, x2, y2));
        }
    }
    net
}

pub fn build_substrate(genome: &Genome, cfg: &SubstrateConfig) -> SubstrateNetwork {
    let cppn = Cppn::new(genome);
    build_substrate_from(|x1, y1, x2, y2| cppn.query(x1, y1, x2, y2), cfg)
}

/// `[joint angles; sin 2πft, cos 2πft, sin 4πft, cos 4πft; dir_x, dir_y; 1]`.
pub fn assemble_inputs(joint_angles: &[f64], t: f64, direction: Vec2, cfg: &SubstrateConfig) -> Vec<f64> {
    let mut v = Vec::with_capacity(joint_angles.len() + EXTRA_INPUTS);
    assemble_inputs_into(&mut v, joint_angles, t, direction, cfg);
    v
}

/// Allocation-free variant for the control loop.
pub fn assemble_inputs_into(
    buf: &mut Vec<f64>,
    joint_angles: &[f64],
    t: f64,
    direction: Vec2,
    cfg: &SubstrateConfig,
) {
    let phase = 2.0 * PI * cfg.cpg_frequency * t;
    buf.clear();
    buf.extend_from_slice(joint_angles);
    buf.extend_from_slice(&[
        phase.sin(),
        phase.cos(),
        (2.0 * phase).sin(),
        (2.0 * phase).cos(),
        direction.x,
        direction.y,
        1.0,
    ]);
}
