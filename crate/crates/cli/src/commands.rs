//! Subcommand implementations. Every command is deterministic given its
//! resolved configuration: rerunning reproduces the artifacts byte for
//! byte (timings go to stderr only).

use anyhow::{bail, Context, Result};
use std::fmt::Write as _;
use std::path::Path;

use qtrack_core::checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};
use qtrack_core::descriptors::descriptor_report;
use qtrack_core::event::{
    generate_synthetic, list_event_ids, load_event_from_dir, write_event, SyntheticConfig,
};
use qtrack_core::graph::{
    candidate_edges, construct_graph, efficiency, purity, read_graph, write_graph,
    GraphProvenance, HitGraph, SelectionHistograms,
};
use qtrack_core::model::forward;
use qtrack_core::pqc::{build_qnn, EncodingSpec, PqcSpec, QnnSpec};
use qtrack_core::provenance::tool_version;
use qtrack_core::train::{
    evaluate as evaluate_graphs, sweep as run_sweep, train as run_train, train_record_csv,
    SweepPoint,
};

use crate::config::{parse_axis, parse_mode, RunConfig};

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn format_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

// ---------------------------------------------------------------------------

pub fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let g = &cfg.generate;
    if g.n_events == 0 {
        bail!("generate.n_events must be >= 1");
    }
    let dir = &cfg.paths.events_dir;
    std::fs::create_dir_all(dir)?;
    for i in 0..g.n_events {
        let event = generate_synthetic(&SyntheticConfig {
            event_id: i as u64,
            n_tracks: g.tracks_per_event,
            seed: g.seed.wrapping_add(i as u64),
            layer_radii_mm: g.layer_radii_mm.clone(),
        })?;
        write_event(&event, dir)?;
    }
    cfg.write_resolved(dir)?;
    eprintln!(
        "generated {} events ({} tracks each) into {}",
        g.n_events,
        g.tracks_per_event,
        dir.display()
    );
    Ok(())
}

pub fn cmd_preprocess(cfg: &RunConfig) -> Result<()> {
    let cuts = cfg.cuts.to_cut_config();
    cuts.validate()?;
    let events_dir = &cfg.paths.events_dir;
    let graphs_dir = &cfg.paths.graphs_dir;
    std::fs::create_dir_all(graphs_dir)?;

    let ids = if cfg.preprocess.events.is_empty() {
        list_event_ids(events_dir)?
    } else {
        cfg.preprocess.events.clone()
    };
    if ids.is_empty() {
        bail!("no events found in {}", events_dir.display());
    }

    let hash = cfg.hash()?;
    let mut summary = String::from("event_id,n_nodes,n_edges,n_true,efficiency,purity\n");
    let mut pooled = Vec::new();
    for &id in &ids {
        let event = load_event_from_dir(events_dir, id)?;
        let graph = construct_graph(&event, &cuts)?;
        if graph.n_nodes() == 0 {
            eprintln!("event {}: zero surviving nodes, empty graph written", id);
        }
        let provenance = GraphProvenance {
            event_id: id,
            cuts: cuts.clone(),
            tool_version: tool_version().to_string(),
            config_hash: Some(hash.clone()),
        };
        write_graph(
            &graphs_dir.join(format!("event{:09}.graph", id)),
            &graph,
            &provenance,
        )?;
        writeln!(
            summary,
            "{},{},{},{},{},{}",
            id,
            graph.n_nodes(),
            graph.n_edges(),
            graph.n_true_edges(),
            format_opt(efficiency(&graph, &event, &cuts)),
            format_opt(purity(&graph)),
        )
        .expect("string write");
        pooled.extend(candidate_edges(&event, &cuts));
    }
    write_text(&graphs_dir.join("summary.csv"), &summary)?;

    let histos = SelectionHistograms::from_candidates(&pooled, &cuts, cfg.preprocess.histogram_bins)?;
    write_text(
        &graphs_dir.join("selection_histograms.csv"),
        &histos.to_csv_string(),
    )?;
    write_text(
        &graphs_dir.join("selection_histograms.meta.json"),
        &serde_json::to_string_pretty(&histos)?,
    )?;
    cfg.write_resolved(graphs_dir)?;
    eprintln!(
        "preprocessed {} events into {}",
        ids.len(),
        graphs_dir.display()
    );
    Ok(())
}

pub fn cmd_descriptors(cfg: &RunConfig) -> Result<()> {
    let d = &cfg.descriptors;
    let out_dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(out_dir)?;
    let families = d.families()?;

    let mut csv = String::from("family,n_qubits,n_layers,E,Eprime,Ent,n_samples,seed\n");
    for &family in &families {
        for &layers in &d.n_layers {
            let spec = if family.is_hierarchical() {
                PqcSpec::hierarchical(family, d.n_qubits)
            } else {
                PqcSpec::layered(family, d.n_qubits, layers)
            };
            for &seed in &d.seeds {
                let report = descriptor_report(&spec, &d.descriptor_config(seed))?;
                writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{}",
                    family.label(),
                    d.n_qubits,
                    spec.n_layers,
                    report.expressibility_e,
                    if report.expressibility_eprime.is_finite() {
                        report.expressibility_eprime.to_string()
                    } else {
                        "inf".to_string()
                    },
                    report.entanglement,
                    d.n_samples,
                    seed
                )
                .expect("string write");
            }
            if d.dump_templates {
                let template = build_qnn(&QnnSpec {
                    encoding: EncodingSpec::default(),
                    pqc: spec,
                })?;
                write_text(
                    &out_dir.join(format!(
                        "template_{}_n{}_l{}.json",
                        family.label(),
                        d.n_qubits,
                        spec.n_layers
                    )),
                    &template.to_json_string()?,
                )?;
            }
            // hierarchical circuits have no layer axis; emit them once
            if family.is_hierarchical() {
                break;
            }
        }
    }
    write_text(&out_dir.join("descriptors.csv"), &csv)?;
    cfg.write_resolved(out_dir)?;
    eprintln!("descriptor sweep written to {}", out_dir.display());
    Ok(())
}

fn load_graphs(dir: &Path) -> Result<Vec<(String, HitGraph)>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| {
            let name = e.ok()?.file_name().to_string_lossy().into_owned();
            name.ends_with(".graph").then_some(name)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no .graph files in {}", dir.display());
    }
    names
        .into_iter()
        .map(|name| {
            let (graph, _) = read_graph(&dir.join(&name))?;
            Ok((name, graph))
        })
        .collect()
}

fn manifest_json(cfg: &RunConfig, extra: serde_json::Value) -> Result<String> {
    let manifest = serde_json::json!({
        "tool_version": tool_version(),
        "config_hash": cfg.hash()?,
        "details": extra,
    });
    Ok(serde_json::to_string_pretty(&manifest)?)
}

pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let model_cfg = cfg.model.to_model_config()?;
    let train_cfg = cfg.training.to_train_config();
    let out_dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(out_dir)?;

    let graphs: Vec<HitGraph> = load_graphs(&cfg.paths.graphs_dir)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();
    let outcomes = run_train(&graphs, &model_cfg, &train_cfg)?;

    let hash = cfg.hash()?;
    let mut best_losses = Vec::new();
    for outcome in &outcomes {
        let record = &outcome.record;
        write_text(
            &out_dir.join(format!("train_seed{}.csv", record.seed)),
            &train_record_csv(record),
        )?;
        let header = CheckpointHeader {
            config: model_cfg.clone(),
            seed: record.seed,
            epoch: record.best_epoch,
            best_valid_loss: record.best_valid_loss,
            param_count: outcome.best_params.param_count(),
            tool_version: tool_version().to_string(),
            config_hash: Some(hash.clone()),
        };
        save_checkpoint(
            &out_dir.join(format!("checkpoint_seed{}.ckpt", record.seed)),
            &header,
            &outcome.best_params,
        )?;
        best_losses.push(record.best_valid_loss);
        eprintln!(
            "seed {}: best valid loss {:.6} at epoch {} ({:.1}s)",
            record.seed, record.best_valid_loss, record.best_epoch, record.wall_clock_secs
        );
    }
    let (mean, std) = qtrack_core::train::mean_std(&best_losses);
    let manifest = manifest_json(
        cfg,
        serde_json::json!({
            "command": "train",
            "preset": model_cfg.preset_label(),
            "mode": cfg.model.mode,
            "seeds": train_cfg.seeds,
            "split_seed": train_cfg.split_seed,
            "n_graphs": graphs.len(),
            "best_valid_losses": best_losses,
            "mean_best_valid_loss": mean,
            "std_best_valid_loss": std,
        }),
    )?;
    write_text(&out_dir.join("train_manifest.json"), &manifest)?;
    cfg.write_resolved(out_dir)?;
    eprintln!("mean best valid loss {:.6} +- {:.6}", mean, std);
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let base = cfg.model.to_model_config()?;
    let train_cfg = cfg.training.to_train_config();
    let out_dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(out_dir)?;

    let graphs: Vec<HitGraph> = load_graphs(&cfg.paths.graphs_dir)?
        .into_iter()
        .map(|(_, g)| g)
        .collect();

    let modes: Vec<qtrack_core::model::Mode> = cfg
        .sweep
        .modes
        .iter()
        .map(|m| parse_mode(m))
        .collect::<Result<_>>()?;
    if modes.is_empty() {
        bail!("sweep.modes must not be empty");
    }

    let mut points = Vec::new();
    let axis = cfg.sweep.axis.as_str();
    for &mode in &modes {
        match axis {
            "embedding" => {
                for axis_name in &cfg.sweep.axes {
                    let mut c = base.clone();
                    c.encoding_axis = parse_axis(axis_name)?;
                    c.mode = mode;
                    points.push(SweepPoint {
                        label: axis_name.to_ascii_lowercase(),
                        config: c,
                    });
                }
            }
            "n_layers" => {
                for &v in &cfg.sweep.values {
                    let mut c = base.clone();
                    c.n_layers = v;
                    c.mode = mode;
                    points.push(SweepPoint {
                        label: v.to_string(),
                        config: c,
                    });
                }
            }
            "n_iterations" => {
                for &v in &cfg.sweep.values {
                    let mut c = base.clone();
                    c.n_iterations = v;
                    c.mode = mode;
                    points.push(SweepPoint {
                        label: v.to_string(),
                        config: c,
                    });
                }
            }
            // the hidden-dimension study ties N_Q to N_D
            "hidden_dim" => {
                for &v in &cfg.sweep.values {
                    let mut c = base.clone();
                    c.hidden_dim = v;
                    c.n_qubits = v;
                    c.mode = mode;
                    points.push(SweepPoint {
                        label: v.to_string(),
                        config: c,
                    });
                }
            }
            other => bail!(
                "unknown sweep axis '{}' (expected embedding, n_layers, n_iterations or hidden_dim)",
                other
            ),
        }
    }
    for p in &points {
        p.config.validate()?;
    }

    let results = run_sweep(&graphs, &points, &train_cfg)?;
    let axis_column = if axis == "embedding" { "axis" } else { axis };
    write_text(
        &out_dir.join(format!("sweep_{}.csv", axis)),
        &qtrack_core::train::sweep_csv(axis_column, &results),
    )?;
    let manifest = manifest_json(
        cfg,
        serde_json::json!({
            "command": "sweep",
            "axis": axis,
            "points": results.iter().map(|r| &r.label).collect::<Vec<_>>(),
            "seeds": train_cfg.seeds,
        }),
    )?;
    write_text(&out_dir.join("sweep_manifest.json"), &manifest)?;
    cfg.write_resolved(out_dir)?;
    for r in &results {
        eprintln!(
            "{}={} ({}): best loss {:.6} +- {:.6}",
            axis_column, r.label, r.mode, r.mean_best_loss, r.std_best_loss
        );
    }
    Ok(())
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<()> {
    let out_dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(out_dir)?;
    let (header, params) = load_checkpoint(checkpoint)?;
    let graphs = load_graphs(&cfg.paths.graphs_dir)?;

    let threshold = cfg.training.threshold;
    let refs: Vec<&HitGraph> = graphs.iter().map(|(_, g)| g).collect();
    let metrics = evaluate_graphs(&refs, &params, threshold)?;

    let mut metrics_csv = String::from("loss,accuracy,precision,recall,auc,threshold,n_graphs\n");
    writeln!(
        metrics_csv,
        "{},{},{},{},{},{},{}",
        metrics.loss,
        metrics.accuracy,
        format_opt(metrics.precision),
        format_opt(metrics.recall),
        format_opt(metrics.auc),
        threshold,
        graphs.len()
    )
    .expect("string write");
    write_text(&out_dir.join("metrics.csv"), &metrics_csv)?;

    let mut scores_csv = String::from("graph,edge_index,label,score\n");
    for (name, graph) in &graphs {
        let scores = forward(graph, &params)?;
        for (k, score) in scores.iter().enumerate() {
            writeln!(scores_csv, "{},{},{},{}", name, k, graph.y[k], score)
                .expect("string write");
        }
    }
    write_text(&out_dir.join("scores.csv"), &scores_csv)?;

    let manifest = manifest_json(
        cfg,
        serde_json::json!({
            "command": "evaluate",
            "checkpoint": checkpoint.display().to_string(),
            "checkpoint_seed": header.seed,
            "checkpoint_epoch": header.epoch,
            "preset": header.config.preset_label(),
        }),
    )?;
    write_text(&out_dir.join("evaluate_manifest.json"), &manifest)?;
    cfg.write_resolved(out_dir)?;
    eprintln!(
        "evaluated {} graphs: loss {:.6}, accuracy {:.4}, auc {}",
        graphs.len(),
        metrics.loss,
        metrics.accuracy,
        format_opt(metrics.auc),
    );
    Ok(())
}

/// Finite-difference gradient verification of all presets; a failure is a
/// numerical error (exit code 3).
pub fn cmd_gradcheck(cfg: &RunConfig, seed: u64) -> Result<bool> {
    let out_dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(out_dir)?;
    let mut csv = String::from("preset,mode,n_params,max_rel_err,tolerance,passed\n");
    let mut all_passed = true;
    for preset in qtrack_core::gradcheck::PRESETS {
        let report = qtrack_core::gradcheck::check_preset(preset, seed)?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            report.preset,
            report.mode,
            report.n_params,
            report.max_rel_err,
            report.tolerance,
            report.passed
        )
        .expect("string write");
        eprintln!(
            "{}: {} parameters, max rel err {:.3e} -> {}",
            preset,
            report.n_params,
            report.max_rel_err,
            if report.passed { "pass" } else { "FAIL" }
        );
        all_passed &= report.passed;
    }
    write_text(&out_dir.join("gradcheck.csv"), &csv)?;
    cfg.write_resolved(out_dir)?;
    Ok(all_passed)
}
