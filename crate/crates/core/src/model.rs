//! The attention-passing GNN with hybrid dense+quantum inner layers.
//!
//! The model applies an input network to lift (r, φ, z) node features to
//! 3+N_D dimensions, then alternates an edge network and a node network for
//! a fixed number of iterations, and finally reuses the same edge network
//! once more to produce per-edge probabilities. Each network is a hybrid
//! stack FC → QNN → FC (sigmoid activations on the dense layers); classical
//! mode swaps the QNN for an N_Q → N_Q sigmoid layer and keeps everything
//! else identical.
//!
//! Edge k gathers b_o = v[edge_out[k]] and b_i = v[edge_in[k]] and feeds
//! b_o ⊕ b_i; node j aggregates edge-probability-weighted neighbor features
//!   agg_in[j]  = Σ_{k: edge_in[k]=j}  e_k · v[edge_out[k]]
//!   agg_out[j] = Σ_{k: edge_out[k]=j} e_k · v[edge_in[k]]
//! and feeds agg_in ⊕ agg_out ⊕ v_j. The node update keeps the raw scaled
//! coordinates: v'_j = x_j ⊕ hidden_j, so v stays (3+N_D)-dimensional
//! across iterations.
//!
//! Backward is exact reverse-mode: dense layers by hand, quantum layers via
//! adjoint gradients, with shared-parameter contributions summed across all
//! reuse sites of the edge and node networks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::adjoint::adjoint_gradients;
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::HitGraph;
use crate::nn::{DenseGrads, DenseLayer};
use crate::pqc::{build_qnn, EncodingAxis, EncodingSpec, PqcFamily, PqcSpec, QnnSpec};
use crate::template::CircuitTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hybrid,
    Classical,
}

/// Fixed divisors applied to (r mm, φ rad, z mm) before the input network;
/// recorded in checkpoints so inference uses the same scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub r_mm: f64,
    pub phi_rad: f64,
    pub z_mm: f64,
}

impl Default for ScalingConstants {
    fn default() -> Self {
        ScalingConstants {
            r_mm: 1100.0,
            phi_rad: PI,
            z_mm: 1100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Hidden dimension N_D.
    pub hidden_dim: usize,
    /// Qubit count N_Q of the quantum layers.
    pub n_qubits: usize,
    /// Message-passing iterations N_I.
    pub n_iterations: usize,
    /// Layer count N_L of the layered circuit families.
    pub n_layers: usize,
    pub edge_pqc: PqcFamily,
    pub node_pqc: PqcFamily,
    pub encoding_axis: EncodingAxis,
    pub mode: Mode,
    pub scaling: ScalingConstants,
}

impl ModelConfig {
    /// Standard presets: `circuit10` and `circuit19` use the same family in
    /// both networks, `mps10`/`ttn10` use the hierarchical circuit in the
    /// edge network and circuit 10 in the node network.
    pub fn preset(
        label: &str,
        hidden_dim: usize,
        n_qubits: usize,
        n_iterations: usize,
        n_layers: usize,
    ) -> Result<Self> {
        let (edge_pqc, node_pqc) = match label.to_ascii_lowercase().as_str() {
            "circuit10" => (PqcFamily::Circuit10, PqcFamily::Circuit10),
            "circuit19" => (PqcFamily::Circuit19, PqcFamily::Circuit19),
            "mps10" | "mps-10" => (PqcFamily::Mps, PqcFamily::Circuit10),
            "ttn10" | "ttn-10" => (PqcFamily::Ttn, PqcFamily::Circuit10),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset '{}' (expected circuit10, circuit19, mps10 or ttn10)",
                    other
                )))
            }
        };
        let cfg = ModelConfig {
            hidden_dim,
            n_qubits,
            n_iterations,
            n_layers,
            edge_pqc,
            node_pqc,
            encoding_axis: EncodingAxis::Y,
            mode: Mode::Hybrid,
            scaling: ScalingConstants::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Preset label recovered from the family pair, for report tables.
    pub fn preset_label(&self) -> &'static str {
        match (self.edge_pqc, self.node_pqc) {
            (PqcFamily::Circuit10, PqcFamily::Circuit10) => "circuit10",
            (PqcFamily::Circuit19, PqcFamily::Circuit19) => "circuit19",
            (PqcFamily::Mps, PqcFamily::Circuit10) => "mps10",
            (PqcFamily::Ttn, PqcFamily::Circuit10) => "ttn10",
            _ => "custom",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::InvalidConfig("hidden_dim must be >= 1".into()));
        }
        if self.node_pqc.is_hierarchical() {
            // the node network needs N_Q outputs; hierarchical circuits
            // measure a single qubit
            return Err(Error::InvalidConfig(format!(
                "node network cannot use hierarchical family {}",
                self.node_pqc.label()
            )));
        }
        self.edge_spec().validate()?;
        self.node_spec().validate()?;
        Ok(())
    }

    pub fn edge_spec(&self) -> PqcSpec {
        PqcSpec::layered(self.edge_pqc, self.n_qubits, self.n_layers)
    }

    pub fn node_spec(&self) -> PqcSpec {
        PqcSpec::layered(self.node_pqc, self.n_qubits, self.n_layers)
    }

    fn encoding(&self) -> EncodingSpec {
        EncodingSpec {
            axis: self.encoding_axis,
            scale: PI,
        }
    }

    /// Node feature width 3+N_D carried between iterations.
    pub fn feature_dim(&self) -> usize {
        3 + self.hidden_dim
    }
}

/// Inner layer of a hybrid network: a quantum circuit or its like-for-like
/// dense substitute.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerLayer {
    Qnn {
        template: CircuitTemplate,
        params: Vec<f64>,
    },
    Dense(DenseLayer),
}

impl InnerLayer {
    fn n_out(&self) -> usize {
        match self {
            InnerLayer::Qnn { template, .. } => template.n_outputs(),
            InnerLayer::Dense(layer) => layer.n_out,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            InnerLayer::Qnn { params, .. } => params.len(),
            InnerLayer::Dense(layer) => layer.param_count(),
        }
    }
}

/// FC → inner → FC stack shared across all evaluation sites of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridNet {
    pub fc1: DenseLayer,
    pub inner: InnerLayer,
    pub fc2: DenseLayer,
}

impl HybridNet {
    pub fn param_count(&self) -> usize {
        self.fc1.param_count() + self.inner.param_count() + self.fc2.param_count()
    }
}

/// All trainable weights plus the configuration that shapes them. The same
/// edge network is used at every iteration and for the final readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub input_net: DenseLayer,
    pub edge_net: HybridNet,
    pub node_net: HybridNet,
}

fn init_inner(
    config: &ModelConfig,
    spec: PqcSpec,
    rng: &mut ChaCha8Rng,
) -> Result<InnerLayer> {
    Ok(match config.mode {
        Mode::Hybrid => {
            let template = build_qnn(&QnnSpec {
                encoding: config.encoding(),
                pqc: spec,
            })?;
            let params = (0..template.n_params())
                .map(|_| rng.gen::<f64>() * TAU)
                .collect();
            InnerLayer::Qnn { template, params }
        }
        Mode::Classical => InnerLayer::Dense(DenseLayer::glorot(
            config.n_qubits,
            config.n_qubits,
            rng,
        )),
    })
}

impl ModelParams {
    /// Seeded initialization: Glorot-uniform dense weights, zero biases,
    /// circuit parameters uniform in [0, 2π).
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.feature_dim();
        let nq = config.n_qubits;

        let input_net = DenseLayer::glorot(3, config.hidden_dim, &mut rng);

        let edge_fc1 = DenseLayer::glorot(2 * d, nq, &mut rng);
        let edge_inner = init_inner(config, config.edge_spec(), &mut rng)?;
        let edge_fc2 = DenseLayer::glorot(edge_inner.n_out(), 1, &mut rng);

        let node_fc1 = DenseLayer::glorot(3 * d, nq, &mut rng);
        let node_inner = init_inner(config, config.node_spec(), &mut rng)?;
        let node_fc2 = DenseLayer::glorot(node_inner.n_out(), config.hidden_dim, &mut rng);

        Ok(ModelParams {
            config: config.clone(),
            input_net,
            edge_net: HybridNet {
                fc1: edge_fc1,
                inner: edge_inner,
                fc2: edge_fc2,
            },
            node_net: HybridNet {
                fc1: node_fc1,
                inner: node_inner,
                fc2: node_fc2,
            },
        })
    }

    pub fn param_count(&self) -> usize {
        self.input_net.param_count()
            + self.edge_net.param_count()
            + self.node_net.param_count()
    }

    /// Flattens every trainable value in a fixed order (input net, edge net,
    /// node net; weights before bias; fc1, inner, fc2 within a network).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        let push_dense = |out: &mut Vec<f64>, l: &DenseLayer| {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        };
        push_dense(&mut out, &self.input_net);
        for net in [&self.edge_net, &self.node_net] {
            push_dense(&mut out, &net.fc1);
            match &net.inner {
                InnerLayer::Qnn { params, .. } => out.extend_from_slice(params),
                InnerLayer::Dense(l) => push_dense(&mut out, l),
            }
            push_dense(&mut out, &net.fc2);
        }
        out
    }

    /// Writes a flat vector (same layout as [`Self::to_flat`]) back in.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::LengthMismatch {
                what: "flat parameter vector",
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut pos = 0usize;
        let take_dense = |pos: &mut usize, l: &mut DenseLayer| {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[*pos..*pos + nw]);
            *pos += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[*pos..*pos + nb]);
            *pos += nb;
        };
        take_dense(&mut pos, &mut self.input_net);
        for net in [&mut self.edge_net, &mut self.node_net] {
            take_dense(&mut pos, &mut net.fc1);
            match &mut net.inner {
                InnerLayer::Qnn { params, .. } => {
                    let np = params.len();
                    params.copy_from_slice(&flat[pos..pos + np]);
                    pos += np;
                }
                InnerLayer::Dense(l) => take_dense(&mut pos, l),
            }
            take_dense(&mut pos, &mut net.fc2);
        }
        debug_assert_eq!(pos, flat.len());
        Ok(())
    }

    /// Rebuilds a parameter set from a config and a flat vector.
    pub fn from_flat(config: &ModelConfig, flat: &[f64]) -> Result<Self> {
        let mut params = ModelParams::init(config, 0)?;
        params.set_from_flat(flat)?;
        Ok(params)
    }
}

// ---------------------------------------------------------------------------
// Forward

/// Scaled node features (r, φ, z) divided by the config constants.
pub fn scale_features(graph: &HitGraph, scaling: &ScalingConstants) -> Vec<[f64; 3]> {
    graph
        .x
        .iter()
        .map(|&[r, phi, z]| [r / scaling.r_mm, phi / scaling.phi_rad, z / scaling.z_mm])
        .collect()
}

/// Intermediates of one hybrid-network evaluation.
#[derive(Debug, Clone)]
pub struct HnnTrace {
    pub input: Vec<f64>,
    /// fc1 activations, the circuit inputs.
    pub a: Vec<f64>,
    /// inner-layer outputs.
    pub q: Vec<f64>,
    pub out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EdgePassTrace {
    pub hnn: Vec<HnnTrace>,
    pub e: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NodePassTrace {
    pub agg_in: Vec<Vec<f64>>,
    pub agg_out: Vec<Vec<f64>>,
    pub hnn: Vec<HnnTrace>,
}

/// Everything backward needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub scaled: Vec<[f64; 3]>,
    pub input_h: Vec<Vec<f64>>,
    /// v before iteration t lives in `vs[t]`; `vs[n_iterations]` feeds the
    /// final edge pass.
    pub vs: Vec<Vec<Vec<f64>>>,
    pub iter_edges: Vec<EdgePassTrace>,
    pub iter_nodes: Vec<NodePassTrace>,
    pub final_edge: EdgePassTrace,
}

fn hnn_forward(net: &HybridNet, input: Vec<f64>) -> Result<HnnTrace> {
    let a = net.fc1.forward(&input);
    let q = match &net.inner {
        InnerLayer::Qnn { template, params } => crate::pqc::qnn_forward(template, params, &a)?,
        InnerLayer::Dense(layer) => layer.forward(&a),
    };
    let out = net.fc2.forward(&q);
    Ok(HnnTrace { input, a, q, out })
}

fn edge_input(v: &[Vec<f64>], graph: &HitGraph, k: usize) -> Vec<f64> {
    let bo = &v[graph.edge_out[k] as usize];
    let bi = &v[graph.edge_in[k] as usize];
    let mut u = Vec::with_capacity(bo.len() * 2);
    u.extend_from_slice(bo);
    u.extend_from_slice(bi);
    u
}

fn edge_pass(
    v: &[Vec<f64>],
    graph: &HitGraph,
    net: &HybridNet,
    parallel: bool,
) -> Result<EdgePassTrace> {
    let traces = exec::map_indexed_mode(parallel, graph.n_edges(), |k| {
        hnn_forward(net, edge_input(v, graph, k))
    });
    let mut hnn = Vec::with_capacity(traces.len());
    for t in traces {
        hnn.push(t?);
    }
    let e = hnn.iter().map(|t| t.out[0]).collect();
    Ok(EdgePassTrace { hnn, e })
}

fn aggregate(
    v: &[Vec<f64>],
    e: &[f64],
    graph: &HitGraph,
    dim: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = v.len();
    let mut agg_in = vec![vec![0.0; dim]; n];
    let mut agg_out = vec![vec![0.0; dim]; n];
    // edge order is fixed, so these sums are bit-reproducible
    for k in 0..graph.n_edges() {
        let (j, o) = (graph.edge_in[k] as usize, graph.edge_out[k] as usize);
        let ek = e[k];
        for (acc, &src) in agg_in[j].iter_mut().zip(&v[o]) {
            *acc += ek * src;
        }
        for (acc, &src) in agg_out[o].iter_mut().zip(&v[j]) {
            *acc += ek * src;
        }
    }
    (agg_in, agg_out)
}

fn node_pass(
    v: &[Vec<f64>],
    e: &[f64],
    graph: &HitGraph,
    net: &HybridNet,
    scaled: &[[f64; 3]],
    parallel: bool,
) -> Result<(NodePassTrace, Vec<Vec<f64>>)> {
    let dim = v.first().map_or(0, |f| f.len());
    let (agg_in, agg_out) = aggregate(v, e, graph, dim);
    let traces = exec::map_indexed_mode(parallel, v.len(), |j| {
        let mut w = Vec::with_capacity(3 * dim);
        w.extend_from_slice(&agg_in[j]);
        w.extend_from_slice(&agg_out[j]);
        w.extend_from_slice(&v[j]);
        hnn_forward(net, w)
    });
    let mut hnn = Vec::with_capacity(traces.len());
    for t in traces {
        hnn.push(t?);
    }
    // re-attach the raw scaled coordinates so v stays 3+N_D wide
    let new_v = hnn
        .iter()
        .zip(scaled)
        .map(|(t, &xyz)| {
            let mut row = Vec::with_capacity(3 + t.out.len());
            row.extend_from_slice(&xyz);
            row.extend_from_slice(&t.out);
            row
        })
        .collect();
    Ok((NodePassTrace { agg_in, agg_out, hnn }, new_v))
}

fn check_compat(graph: &HitGraph, params: &ModelParams) -> Result<()> {
    graph.validate()?;
    let d = params.config.feature_dim();
    if params.edge_net.fc1.n_in != 2 * d || params.node_net.fc1.n_in != 3 * d {
        return Err(Error::InvalidConfig(
            "network dimensions inconsistent with config".into(),
        ));
    }
    Ok(())
}

fn forward_impl(
    graph: &HitGraph,
    params: &ModelParams,
    parallel: bool,
) -> Result<(Vec<f64>, ForwardTrace)> {
    check_compat(graph, params)?;
    let scaled = scale_features(graph, &params.config.scaling);
    let input_h: Vec<Vec<f64>> = exec::map_indexed_mode(parallel, scaled.len(), |j| {
        params.input_net.forward(&scaled[j])
    });
    let v0: Vec<Vec<f64>> = scaled
        .iter()
        .zip(&input_h)
        .map(|(&xyz, h)| {
            let mut row = Vec::with_capacity(3 + h.len());
            row.extend_from_slice(&xyz);
            row.extend_from_slice(h);
            row
        })
        .collect();

    let mut vs = vec![v0];
    let mut iter_edges = Vec::with_capacity(params.config.n_iterations);
    let mut iter_nodes = Vec::with_capacity(params.config.n_iterations);
    for t in 0..params.config.n_iterations {
        let edge = edge_pass(&vs[t], graph, &params.edge_net, parallel)?;
        let (node, new_v) = node_pass(
            &vs[t],
            &edge.e,
            graph,
            &params.node_net,
            &scaled,
            parallel,
        )?;
        iter_edges.push(edge);
        iter_nodes.push(node);
        vs.push(new_v);
    }
    let final_edge = edge_pass(vs.last().unwrap(), graph, &params.edge_net, parallel)?;
    let e = final_edge.e.clone();
    Ok((
        e,
        ForwardTrace {
            scaled,
            input_h,
            vs,
            iter_edges,
            iter_nodes,
            final_edge,
        },
    ))
}

/// Edge probabilities for one graph.
pub fn forward(graph: &HitGraph, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(forward_impl(graph, params, true)?.0)
}

/// Sequential forward, bit-identical to [`forward`].
pub fn forward_seq(graph: &HitGraph, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(forward_impl(graph, params, false)?.0)
}

/// Forward pass keeping all intermediates for [`backward`].
pub fn forward_traced(graph: &HitGraph, params: &ModelParams) -> Result<(Vec<f64>, ForwardTrace)> {
    forward_impl(graph, params, true)
}

// ---------------------------------------------------------------------------
// Spec-level building blocks, also usable on their own.

/// Input network: v_j = x_j ⊕ sigmoid(W x_j + b) on already-scaled features.
pub fn input_network(scaled: &[[f64; 3]], net: &DenseLayer) -> Vec<Vec<f64>> {
    scaled
        .iter()
        .map(|xyz| {
            let h = net.forward(xyz);
            let mut row = Vec::with_capacity(3 + h.len());
            row.extend_from_slice(xyz);
            row.extend_from_slice(&h);
            row
        })
        .collect()
}

/// Edge network on explicit node features.
pub fn edge_network(v: &[Vec<f64>], graph: &HitGraph, net: &HybridNet) -> Result<Vec<f64>> {
    Ok(edge_pass(v, graph, net, true)?.e)
}

/// Node network on explicit node features and edge weights; returns the
/// updated features with the scaled coordinates re-attached.
pub fn node_network(
    v: &[Vec<f64>],
    e: &[f64],
    graph: &HitGraph,
    net: &HybridNet,
    scaled: &[[f64; 3]],
) -> Result<Vec<Vec<f64>>> {
    if e.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            what: "edge weight vector",
            expected: graph.n_edges(),
            actual: e.len(),
        });
    }
    Ok(node_pass(v, e, graph, net, scaled, true)?.1)
}

// ---------------------------------------------------------------------------
// Backward

#[derive(Debug, Clone)]
enum InnerGrads {
    Qnn(Vec<f64>),
    Dense(DenseGrads),
}

impl InnerGrads {
    fn zeros_like(inner: &InnerLayer) -> Self {
        match inner {
            InnerLayer::Qnn { params, .. } => InnerGrads::Qnn(vec![0.0; params.len()]),
            InnerLayer::Dense(l) => InnerGrads::Dense(DenseGrads::zeros_like(l)),
        }
    }

    fn add_assign(&mut self, other: &InnerGrads) {
        match (self, other) {
            (InnerGrads::Qnn(a), InnerGrads::Qnn(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            (InnerGrads::Dense(a), InnerGrads::Dense(b)) => a.add_assign(b),
            _ => unreachable!("inner gradient shape mismatch"),
        }
    }
}

#[derive(Debug, Clone)]
struct NetGrads {
    fc1: DenseGrads,
    inner: InnerGrads,
    fc2: DenseGrads,
}

impl NetGrads {
    fn zeros_like(net: &HybridNet) -> Self {
        NetGrads {
            fc1: DenseGrads::zeros_like(&net.fc1),
            inner: InnerGrads::zeros_like(&net.inner),
            fc2: DenseGrads::zeros_like(&net.fc2),
        }
    }

    fn add_assign(&mut self, other: &NetGrads) {
        self.fc1.add_assign(&other.fc1);
        self.inner.add_assign(&other.inner);
        self.fc2.add_assign(&other.fc2);
    }
}

/// Backward through one hybrid-network evaluation; returns d_input and the
/// local parameter gradients.
fn hnn_backward(net: &HybridNet, trace: &HnnTrace, d_out: &[f64]) -> Result<(Vec<f64>, NetGrads)> {
    let mut grads = NetGrads::zeros_like(net);
    let d_q = net.fc2.backward(&trace.q, &trace.out, d_out, &mut grads.fc2);
    let d_a = match (&net.inner, &mut grads.inner) {
        (InnerLayer::Qnn { template, params }, InnerGrads::Qnn(gp)) => {
            let jac = adjoint_gradients(template, params, &trace.a)?;
            for (row, &dq) in jac.d_params.iter().zip(&d_q) {
                for (g, &j) in gp.iter_mut().zip(row) {
                    *g += dq * j;
                }
            }
            let mut d_a = vec![0.0; trace.a.len()];
            for (row, &dq) in jac.d_inputs.iter().zip(&d_q) {
                for (d, &j) in d_a.iter_mut().zip(row) {
                    *d += dq * j;
                }
            }
            d_a
        }
        (InnerLayer::Dense(layer), InnerGrads::Dense(g)) => {
            layer.backward(&trace.a, &trace.q, &d_q, g)
        }
        _ => unreachable!("inner gradient shape mismatch"),
    };
    let d_input = net.fc1.backward(&trace.input, &trace.a, &d_a, &mut grads.fc1);
    Ok((d_input, grads))
}

/// Backward through an edge pass: accumulates edge-network gradients and the
/// contributions to d_v.
fn edge_pass_backward(
    graph: &HitGraph,
    net: &HybridNet,
    pass: &EdgePassTrace,
    d_e: &[f64],
    edge_grads: &mut NetGrads,
    d_v: &mut [Vec<f64>],
) -> Result<()> {
    let dim = d_v.first().map_or(0, |r| r.len());
    let results = exec::map_indexed(graph.n_edges(), |k| {
        hnn_backward(net, &pass.hnn[k], &[d_e[k]])
    });
    for (k, res) in results.into_iter().enumerate() {
        let (d_u, grads) = res?;
        edge_grads.add_assign(&grads);
        let (o, j) = (graph.edge_out[k] as usize, graph.edge_in[k] as usize);
        for (acc, &g) in d_v[o].iter_mut().zip(&d_u[..dim]) {
            *acc += g;
        }
        for (acc, &g) in d_v[j].iter_mut().zip(&d_u[dim..]) {
            *acc += g;
        }
    }
    Ok(())
}

/// Reverse-mode gradients of every entry of [`ModelParams`] given the
/// gradient of a scalar loss with respect to the final edge outputs.
/// Returns a flat vector in [`ModelParams::to_flat`] layout.
pub fn backward(
    graph: &HitGraph,
    params: &ModelParams,
    trace: &ForwardTrace,
    upstream: &[f64],
) -> Result<Vec<f64>> {
    if upstream.len() != graph.n_edges() {
        return Err(Error::LengthMismatch {
            what: "upstream gradient",
            expected: graph.n_edges(),
            actual: upstream.len(),
        });
    }
    let cfg = &params.config;
    let d = cfg.feature_dim();
    let n_nodes = graph.n_nodes();

    let mut input_grads = DenseGrads::zeros_like(&params.input_net);
    let mut edge_grads = NetGrads::zeros_like(&params.edge_net);
    let mut node_grads = NetGrads::zeros_like(&params.node_net);

    // d_v with respect to the features entering the final edge pass
    let mut d_v = vec![vec![0.0; d]; n_nodes];
    edge_pass_backward(
        graph,
        &params.edge_net,
        &trace.final_edge,
        upstream,
        &mut edge_grads,
        &mut d_v,
    )?;

    for t in (0..cfg.n_iterations).rev() {
        let node_trace = &trace.iter_nodes[t];
        let edge_trace = &trace.iter_edges[t];
        let v_t = &trace.vs[t];

        // node pass backward: only the hidden part of v_{t+1} flows back,
        // the re-attached coordinates are leaves
        let results = exec::map_indexed(n_nodes, |j| {
            hnn_backward(&params.node_net, &node_trace.hnn[j], &d_v[j][3..])
        });
        let mut d_agg_in = vec![Vec::new(); n_nodes];
        let mut d_agg_out = vec![Vec::new(); n_nodes];
        let mut new_d_v = vec![vec![0.0; d]; n_nodes];
        for (j, res) in results.into_iter().enumerate() {
            let (d_w, grads) = res?;
            node_grads.add_assign(&grads);
            d_agg_in[j] = d_w[..d].to_vec();
            d_agg_out[j] = d_w[d..2 * d].to_vec();
            for (acc, &g) in new_d_v[j].iter_mut().zip(&d_w[2 * d..]) {
                *acc += g;
            }
        }

        // aggregate backward: d_e from both weighted sums, d_v into neighbors
        let mut d_e = vec![0.0; graph.n_edges()];
        for k in 0..graph.n_edges() {
            let (j, o) = (graph.edge_in[k] as usize, graph.edge_out[k] as usize);
            let ek = edge_trace.e[k];
            let mut de = 0.0;
            for (x, &g) in v_t[o].iter().zip(&d_agg_in[j]) {
                de += x * g;
            }
            for (x, &g) in v_t[j].iter().zip(&d_agg_out[o]) {
                de += x * g;
            }
            d_e[k] = de;
            for (acc, &g) in new_d_v[o].iter_mut().zip(&d_agg_in[j]) {
                *acc += ek * g;
            }
            for (acc, &g) in new_d_v[j].iter_mut().zip(&d_agg_out[o]) {
                *acc += ek * g;
            }
        }

        d_v = new_d_v;
        edge_pass_backward(
            graph,
            &params.edge_net,
            edge_trace,
            &d_e,
            &mut edge_grads,
            &mut d_v,
        )?;
    }

    // input network: the first three components of v_0 are raw inputs
    for j in 0..n_nodes {
        params.input_net.backward(
            &trace.scaled[j],
            &trace.input_h[j],
            &d_v[j][3..],
            &mut input_grads,
        );
    }

    // flatten in to_flat order
    let mut flat = Vec::with_capacity(params.param_count());
    let push_dense = |flat: &mut Vec<f64>, g: &DenseGrads| {
        flat.extend_from_slice(&g.weights);
        flat.extend_from_slice(&g.bias);
    };
    push_dense(&mut flat, &input_grads);
    for net in [&edge_grads, &node_grads] {
        push_dense(&mut flat, &net.fc1);
        match &net.inner {
            InnerGrads::Qnn(g) => flat.extend_from_slice(g),
            InnerGrads::Dense(g) => push_dense(&mut flat, g),
        }
        push_dense(&mut flat, &net.fc2);
    }
    Ok(flat)
}
