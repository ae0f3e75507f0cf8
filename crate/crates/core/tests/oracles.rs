//! Cross-checks of the fast implementation paths against independent
//! oracles: dense unitary products, finite differences, exhaustive sums and
//! a straight-line reference model.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qtrack_core::adjoint::adjoint_gradients;
use qtrack_core::gradcheck::rel_err;
use qtrack_core::graph::HitGraph;
use qtrack_core::model::{
    edge_network, forward, input_network, node_network, scale_features, Mode, ModelConfig,
    ModelParams,
};
use qtrack_core::pqc::{build_qnn, EncodingAxis, EncodingSpec, PqcFamily, PqcSpec, QnnSpec};
use qtrack_core::statevector::{Binding, GateOp, Statevector};
use qtrack_core::template::CircuitTemplate;

fn qnn_spec(family: PqcFamily, n: usize, layers: usize) -> QnnSpec {
    QnnSpec {
        encoding: EncodingSpec::default(),
        pqc: PqcSpec::layered(family, n, layers),
    }
}

fn all_library_templates() -> Vec<(String, CircuitTemplate)> {
    let mut out = Vec::new();
    for family in [PqcFamily::Circuit10, PqcFamily::Circuit19] {
        for n in [2usize, 3, 4] {
            for layers in [1usize, 2] {
                let spec = qnn_spec(family, n, layers);
                out.push((
                    format!("{}-n{}-l{}", spec.pqc.family.label(), n, layers),
                    build_qnn(&spec).unwrap(),
                ));
            }
        }
    }
    for n in [2usize, 4] {
        let spec = qnn_spec(PqcFamily::Mps, n, 1);
        out.push((format!("mps-n{}", n), build_qnn(&spec).unwrap()));
    }
    for n in [2usize, 4, 8] {
        let spec = qnn_spec(PqcFamily::Ttn, n, 1);
        out.push((format!("ttn-n{}", n), build_qnn(&spec).unwrap()));
    }
    out
}

#[test]
fn run_matches_dense_unitary_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (name, template) in all_library_templates() {
        if template.n_qubits() > 4 {
            continue;
        }
        let params: Vec<f64> = (0..template.n_params())
            .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
            .collect();
        let inputs: Vec<f64> = (0..template.n_inputs()).map(|_| rng.gen::<f64>()).collect();
        let state = template.run(&params, &inputs).unwrap();
        let oracle = common::run_by_matrix_product(&template, &params, &inputs);
        for (i, (a, b)) in state.amplitudes().iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).norm() < 1e-10,
                "{}: amplitude {} differs: {} vs {}",
                name,
                i,
                a,
                b
            );
        }
    }
}

#[test]
fn circuit10_zero_params_matches_oracle() {
    // the spec's canonical 4-qubit, single-layer, all-zero-parameter case
    let template = build_qnn(&qnn_spec(PqcFamily::Circuit10, 4, 1)).unwrap();
    let params = vec![0.0; template.n_params()];
    let inputs = vec![0.0; 4];
    let state = template.run(&params, &inputs).unwrap();
    let oracle = common::run_by_matrix_product(&template, &params, &inputs);
    for (a, b) in state.amplitudes().iter().zip(&oracle) {
        assert!((a - b).norm() < 1e-12);
    }
}

#[test]
fn norm_preserved_over_random_gate_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=6usize);
        let mut state = Statevector::zero(n).unwrap();
        for _ in 0..rng.gen_range(5..40usize) {
            let angle = rng.gen::<f64>() * std::f64::consts::TAU;
            let q = rng.gen_range(0..n);
            match rng.gen_range(0..5) {
                0 => state.apply(&GateOp::rx(q, Binding::Constant(0.0)), Some(angle)),
                1 => state.apply(&GateOp::ry(q, Binding::Constant(0.0)), Some(angle)),
                2 => state.apply(&GateOp::rz(q, Binding::Constant(0.0)), Some(angle)),
                3 if n >= 2 => {
                    let mut c = rng.gen_range(0..n);
                    while c == q {
                        c = rng.gen_range(0..n);
                    }
                    state.apply(&GateOp::cz(c, q), None)
                }
                _ if n >= 2 => {
                    let mut c = rng.gen_range(0..n);
                    while c == q {
                        c = rng.gen_range(0..n);
                    }
                    state.apply(&GateOp::crx(c, q, Binding::Constant(0.0)), Some(angle))
                }
                _ => state.apply(&GateOp::ry(q, Binding::Constant(0.0)), Some(angle)),
            }
            .unwrap();
        }
        assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn expectation_matches_exhaustive_sum_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let state = qtrack_core::descriptors::haar_sample(3, &mut rng).unwrap();
        for q in 0..3 {
            let fast = state.expectation_z(q).unwrap();
            let slow = common::expectation_z_exhaustive(state.amplitudes(), q);
            assert!((fast - slow).abs() < 1e-12);
        }
    }
}

#[test]
fn adjoint_matches_finite_differences_across_library() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let h = 1e-5;
    for (name, template) in all_library_templates() {
        let params: Vec<f64> = (0..template.n_params())
            .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
            .collect();
        let inputs: Vec<f64> = (0..template.n_inputs())
            .map(|_| 0.1 + 0.8 * rng.gen::<f64>())
            .collect();

        let adj = adjoint_gradients(&template, &params, &inputs).unwrap();
        let fd_p = common::fd_expectation_param_grads(&template, &params, &inputs, h);
        let fd_x = common::fd_expectation_input_grads(&template, &params, &inputs, h);

        for q in 0..adj.expectations.len() {
            for i in 0..params.len() {
                let err = rel_err(adj.d_params[q][i], fd_p[q][i], 1e-4);
                assert!(
                    err < 1e-6,
                    "{}: d<Z_{}>/dp{} adjoint {} vs fd {} (rel {})",
                    name,
                    q,
                    i,
                    adj.d_params[q][i],
                    fd_p[q][i],
                    err
                );
            }
            for i in 0..inputs.len() {
                let err = rel_err(adj.d_inputs[q][i], fd_x[q][i], 1e-4);
                assert!(err < 1e-6, "{}: input grad {} q{} rel {}", name, i, q, err);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Model oracles

fn toy_graph() -> HitGraph {
    HitGraph {
        x: vec![[110.0, 0.3, 25.0], [260.0, 0.32, 55.0], [510.0, 0.35, 110.0]],
        layer: vec![0, 1, 2],
        edge_in: vec![0, 1],
        edge_out: vec![1, 2],
        y: vec![1, 1],
    }
}

fn config(mode: Mode) -> ModelConfig {
    ModelConfig {
        hidden_dim: 3,
        n_qubits: 3,
        n_iterations: 2,
        n_layers: 1,
        edge_pqc: PqcFamily::Circuit10,
        node_pqc: PqcFamily::Circuit10,
        encoding_axis: EncodingAxis::Y,
        mode,
        scaling: Default::default(),
    }
}

#[test]
fn single_edge_matches_hand_composed_chain() {
    // one edge: the edge network output must equal the chain
    // sigmoid(FC2( qnn( sigmoid(FC1(b_o ⊕ b_i)) ) )) evaluated by hand
    let graph = HitGraph {
        x: vec![[110.0, 0.3, 25.0], [260.0, 0.32, 55.0]],
        layer: vec![0, 1],
        edge_in: vec![0],
        edge_out: vec![1],
        y: vec![1],
    };
    let params = ModelParams::init(&config(Mode::Hybrid), 3).unwrap();
    let scaled = scale_features(&graph, &params.config.scaling);
    let v = input_network(&scaled, &params.input_net);
    let e = edge_network(&v, &graph, &params.edge_net).unwrap();

    // hand composition
    let mut u: Vec<f64> = v[1].clone();
    u.extend(v[0].clone());
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let dense = |l: &qtrack_core::nn::DenseLayer, x: &[f64]| -> Vec<f64> {
        (0..l.n_out)
            .map(|i| {
                let mut z = l.bias[i];
                for j in 0..l.n_in {
                    z += l.weights[i * l.n_in + j] * x[j];
                }
                sig(z)
            })
            .collect()
    };
    let a = dense(&params.edge_net.fc1, &u);
    let q = match &params.edge_net.inner {
        qtrack_core::model::InnerLayer::Qnn { template, params } => {
            qtrack_core::pqc::qnn_forward(template, params, &a).unwrap()
        }
        qtrack_core::model::InnerLayer::Dense(l) => dense(l, &a),
    };
    let out = dense(&params.edge_net.fc2, &q);
    assert!((e[0] - out[0]).abs() < 1e-12);
}

#[test]
fn node_network_matches_exhaustive_sums() {
    let graph = toy_graph();
    let params = ModelParams::init(&config(Mode::Classical), 9).unwrap();
    let scaled = scale_features(&graph, &params.config.scaling);
    let v = input_network(&scaled, &params.input_net);
    let e = edge_network(&v, &graph, &params.edge_net).unwrap();
    let updated = node_network(&v, &e, &graph, &params.node_net, &scaled).unwrap();

    // brute-force aggregates over every (node, edge) pair via dense R_i/R_o
    let d = v[0].len();
    for j in 0..graph.n_nodes() {
        let mut agg_in = vec![0.0; d];
        let mut agg_out = vec![0.0; d];
        for k in 0..graph.n_edges() {
            let r_i = (graph.edge_in[k] as usize == j) as u8 as f64;
            let r_o = (graph.edge_out[k] as usize == j) as u8 as f64;
            for c in 0..d {
                agg_in[c] += e[k] * r_i * v[graph.edge_out[k] as usize][c];
                agg_out[c] += e[k] * r_o * v[graph.edge_in[k] as usize][c];
            }
        }
        let mut w = agg_in;
        w.extend(agg_out);
        w.extend(v[j].clone());
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let l = &params.node_net.fc1;
        let a: Vec<f64> = (0..l.n_out)
            .map(|i| {
                let mut z = l.bias[i];
                for jj in 0..l.n_in {
                    z += l.weights[i * l.n_in + jj] * w[jj];
                }
                sig(z)
            })
            .collect();
        let q = match &params.node_net.inner {
            qtrack_core::model::InnerLayer::Dense(inner) => {
                let mut out = Vec::new();
                for i in 0..inner.n_out {
                    let mut z = inner.bias[i];
                    for jj in 0..inner.n_in {
                        z += inner.weights[i * inner.n_in + jj] * a[jj];
                    }
                    out.push(sig(z));
                }
                out
            }
            _ => unreachable!("classical mode"),
        };
        let l2 = &params.node_net.fc2;
        for i in 0..l2.n_out {
            let mut z = l2.bias[i];
            for jj in 0..l2.n_in {
                z += l2.weights[i * l2.n_in + jj] * q[jj];
            }
            let hidden = sig(z);
            assert!((updated[j][3 + i] - hidden).abs() < 1e-12);
        }
        assert_eq!(&updated[j][..3], &scaled[j]);
    }
}

#[test]
fn forward_matches_straight_line_reference() {
    let graph = toy_graph();
    for mode in [Mode::Classical, Mode::Hybrid] {
        let params = ModelParams::init(&config(mode), 23).unwrap();
        let fast = forward(&graph, &params).unwrap();
        let slow = common::forward_reference(&graph, &params);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "mode {:?}: {} vs {}", mode, a, b);
        }
    }
}

#[test]
fn forward_is_node_permutation_equivariant() {
    let graph = toy_graph();
    let params = ModelParams::init(&config(Mode::Hybrid), 29).unwrap();
    let base = forward(&graph, &params).unwrap();

    // relabel nodes 0,1,2 -> 2,0,1 and remap the edge lists
    let perm = [2u32, 0, 1];
    let mut x = vec![[0.0; 3]; 3];
    let mut layer = vec![0u32; 3];
    for (old, &new) in perm.iter().enumerate() {
        x[new as usize] = graph.x[old];
        layer[new as usize] = graph.layer[old];
    }
    let permuted = HitGraph {
        x,
        layer,
        edge_in: graph.edge_in.iter().map(|&j| perm[j as usize]).collect(),
        edge_out: graph.edge_out.iter().map(|&j| perm[j as usize]).collect(),
        y: graph.y.clone(),
    };
    let out = forward(&permuted, &params).unwrap();
    for (a, b) in base.iter().zip(&out) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn forward_is_edge_order_invariant() {
    let graph = toy_graph();
    let params = ModelParams::init(&config(Mode::Hybrid), 29).unwrap();
    let base = forward(&graph, &params).unwrap();
    let swapped = HitGraph {
        x: graph.x.clone(),
        layer: graph.layer.clone(),
        edge_in: vec![graph.edge_in[1], graph.edge_in[0]],
        edge_out: vec![graph.edge_out[1], graph.edge_out[0]],
        y: vec![graph.y[1], graph.y[0]],
    };
    let out = forward(&swapped, &params).unwrap();
    assert!((base[0] - out[1]).abs() < 1e-12);
    assert!((base[1] - out[0]).abs() < 1e-12);
}

#[test]
fn auc_matches_pair_counting_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = rng.gen_range(5..200usize);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                // quantized scores force plenty of ties
                (rng.gen::<f64>() * 8.0).floor() / 8.0
            })
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
        let fast = qtrack_core::train::auc(&scores, &labels);
        let slow = common::auc_pair_counting(&scores, &labels);
        match (fast, slow) {
            (None, None) => {}
            (Some(a), Some(b)) => {
                assert!((a - b).abs() < 1e-12, "trial {}: {} vs {}", trial, a, b)
            }
            other => panic!("trial {}: defined-ness mismatch {:?}", trial, other),
        }
    }
}

#[test]
fn model_gradients_match_finite_differences_for_all_presets() {
    for preset in qtrack_core::gradcheck::PRESETS {
        let report = qtrack_core::gradcheck::check_preset(preset, 1).unwrap();
        assert!(
            report.passed,
            "{}: max rel err {} at param {}",
            preset, report.max_rel_err, report.worst_param
        );
    }
}

#[test]
fn full_gradient_check_in_classical_and_z_axis_variants() {
    // variants off the beaten path: classical mode and z-axis encoding
    let graph = qtrack_core::gradcheck::check_graph(17);
    for (mode, axis) in [
        (Mode::Classical, EncodingAxis::Y),
        (Mode::Hybrid, EncodingAxis::Z),
        (Mode::Hybrid, EncodingAxis::X),
    ] {
        let mut cfg = config(mode);
        cfg.encoding_axis = axis;
        let params = ModelParams::init(&cfg, 5).unwrap();
        let report =
            qtrack_core::gradcheck::check_model_gradients(&graph, &params, 1e-5, 1e-5, 1e-4)
                .unwrap();
        assert!(
            report.passed,
            "mode {:?} axis {:?}: {}",
            mode, axis, report.max_rel_err
        );
    }
}
