//! Finite-difference verification of the model gradients.
//!
//! The check differentiates the BCE loss of a small fixed graph twice: once
//! through reverse-mode [`backward`] and once by central finite differences
//! over the flat parameter vector, which exercises only the forward pass.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::HitGraph;
use crate::model::{backward, forward, forward_traced, ModelConfig, ModelParams};
use crate::train::{bce_loss, bce_loss_grad};

/// Relative error with a floor on the denominator so near-zero gradients
/// are compared absolutely at floor * tolerance scale.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Deterministic 7-node, 12-edge graph (layer sizes 2-3-2, fully connected
/// between consecutive layers) with pseudo-random positions and labels.
pub fn check_graph(seed: u64) -> HitGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layer_sizes = [2usize, 3, 2];
    let radii = [100.0, 300.0, 600.0];
    let mut x = Vec::new();
    let mut layer = Vec::new();
    for (l, (&size, &r)) in layer_sizes.iter().zip(&radii).enumerate() {
        for _ in 0..size {
            x.push([
                r + rng.gen::<f64>() * 2.0 - 1.0,
                (rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::PI,
                (rng.gen::<f64>() * 2.0 - 1.0) * 300.0,
            ]);
            layer.push(l as u32);
        }
    }
    let mut edge_in = Vec::new();
    let mut edge_out = Vec::new();
    let mut y = Vec::new();
    let offsets = [0usize, 2, 5];
    for l in 0..2 {
        for a in 0..layer_sizes[l] {
            for b in 0..layer_sizes[l + 1] {
                edge_in.push((offsets[l] + a) as u32);
                edge_out.push((offsets[l + 1] + b) as u32);
                y.push(rng.gen::<bool>() as u8);
            }
        }
    }
    HitGraph {
        x,
        layer,
        edge_in,
        edge_out,
        y,
    }
}

/// Central finite differences of the graph BCE loss over the flat parameter
/// vector; uses only the forward pass.
pub fn finite_diff_loss_gradients(
    graph: &HitGraph,
    params: &ModelParams,
    h: f64,
) -> Result<Vec<f64>> {
    let flat = params.to_flat();
    let mut work = params.clone();
    let mut grads = Vec::with_capacity(flat.len());
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += h;
        work.set_from_flat(&plus)?;
        let lp = bce_loss(&graph.y, &forward(graph, &work)?)?;

        let mut minus = flat.clone();
        minus[i] -= h;
        work.set_from_flat(&minus)?;
        let lm = bce_loss(&graph.y, &forward(graph, &work)?)?;

        grads.push((lp - lm) / (2.0 * h));
    }
    Ok(grads)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub preset: String,
    pub mode: String,
    pub n_params: usize,
    pub max_rel_err: f64,
    pub worst_param: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares reverse-mode and finite-difference gradients of the loss on one
/// graph; `floor` guards the relative error of near-zero entries.
pub fn check_model_gradients(
    graph: &HitGraph,
    params: &ModelParams,
    h: f64,
    tolerance: f64,
    floor: f64,
) -> Result<GradCheckReport> {
    let (e, trace) = forward_traced(graph, params)?;
    let (_, d_e) = bce_loss_grad(&graph.y, &e)?;
    let analytic = backward(graph, params, &trace, &d_e)?;
    let numeric = finite_diff_loss_gradients(graph, params, h)?;

    let mut max_rel_err = 0.0;
    let mut worst_param = 0;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = rel_err(a, n, floor);
        if err > max_rel_err {
            max_rel_err = err;
            worst_param = i;
        }
    }
    Ok(GradCheckReport {
        preset: params.config.preset_label().to_string(),
        mode: match params.config.mode {
            crate::model::Mode::Hybrid => "hybrid".into(),
            crate::model::Mode::Classical => "classical".into(),
        },
        n_params: analytic.len(),
        max_rel_err,
        worst_param,
        tolerance,
        passed: max_rel_err < tolerance,
    })
}

/// Gradient check of one preset at the reference desk scale
/// (N_Q = N_D = 3, N_I = 2, N_L = 1, 12-edge graph, h = 1e-5, tol = 1e-5).
/// The tree circuit only exists at power-of-two widths, so `ttn10` runs at
/// N_Q = N_D = 4 instead.
pub fn check_preset(preset: &str, seed: u64) -> Result<GradCheckReport> {
    let n = if preset.eq_ignore_ascii_case("ttn10") || preset.eq_ignore_ascii_case("ttn-10") {
        4
    } else {
        3
    };
    let config = ModelConfig::preset(preset, n, n, 2, 1)?;
    let params = ModelParams::init(&config, seed)?;
    let graph = check_graph(17);
    check_model_gradients(&graph, &params, 1e-5, 1e-5, 1e-4)
}

/// The four standard presets in gradcheck order.
pub const PRESETS: [&str; 4] = ["circuit10", "circuit19", "mps10", "ttn10"];
