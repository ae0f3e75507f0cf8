//! Hit-graph construction: doublet selection with geometric cuts, labels,
//! efficiency/purity diagnostics and a binary graph file format.
//!
//! Nodes are barrel hits of particles above the pT cut, with features
//! (r, φ, z); candidate edges connect hits on consecutive layer ordinals and
//! are kept when the segment pseudorapidity, Δφ/Δr ratio and extrapolated z
//! intercept pass the thresholds. The sparse edge lists `edge_in`/`edge_out`
//! encode the usual incidence matrices: R_i[j][k] = 1 iff edge_in[k] = j and
//! R_o[j][k] = 1 iff edge_out[k] = j.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::event::Event;

/// Doublet selection thresholds. A non-finite threshold disables that cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutConfig {
    /// Transverse momentum cut on the hit's particle, GeV.
    pub pt_min_gev: f64,
    /// Cut on |η| of the segment direction.
    pub eta_max: f64,
    /// Cut on |Δφ|/Δr, rad/mm.
    pub dphi_dr_max: f64,
    /// Cut on the |z| intercept of the segment extrapolated to r = 0, mm.
    pub z0_max_mm: f64,
    /// Volume ids considered part of the barrel.
    pub barrel_volumes: Vec<u32>,
}

impl Default for CutConfig {
    fn default() -> Self {
        CutConfig {
            pt_min_gev: 1.0,
            eta_max: 5.0,
            dphi_dr_max: 6e-4,
            z0_max_mm: 100.0,
            barrel_volumes: vec![8, 13, 17],
        }
    }
}

impl CutConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pt_min_gev", self.pt_min_gev),
            ("eta_max", self.eta_max),
            ("dphi_dr_max", self.dphi_dr_max),
            ("z0_max_mm", self.z0_max_mm),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{} must be positive, got {}",
                    name, v
                )));
            }
        }
        Ok(())
    }

    /// Same node selection, edge cuts disabled.
    pub fn with_edge_cuts_disabled(&self) -> CutConfig {
        CutConfig {
            eta_max: f64::INFINITY,
            dphi_dr_max: f64::INFINITY,
            z0_max_mm: f64::INFINITY,
            ..self.clone()
        }
    }
}

/// Sparse hit graph: node features, consecutive-layer edges and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct HitGraph {
    /// Per-node (r mm, φ rad in (-π, π], z mm).
    pub x: Vec<[f64; 3]>,
    /// Per-node layer ordinal (0 = innermost populated layer).
    pub layer: Vec<u32>,
    /// Per-edge index of the input (inner) node.
    pub edge_in: Vec<u32>,
    /// Per-edge index of the output (outer) node.
    pub edge_out: Vec<u32>,
    /// Per-edge label: 1 iff both hits belong to the same particle.
    pub y: Vec<u8>,
}

impl HitGraph {
    pub fn n_nodes(&self) -> usize {
        self.x.len()
    }

    pub fn n_edges(&self) -> usize {
        self.y.len()
    }

    pub fn n_true_edges(&self) -> usize {
        self.y.iter().filter(|&&y| y == 1).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n_nodes = self.x.len();
        if self.layer.len() != n_nodes {
            return Err(Error::LengthMismatch {
                what: "layer ordinals",
                expected: n_nodes,
                actual: self.layer.len(),
            });
        }
        let n_edges = self.y.len();
        if self.edge_in.len() != n_edges || self.edge_out.len() != n_edges {
            return Err(Error::LengthMismatch {
                what: "edge lists",
                expected: n_edges,
                actual: self.edge_in.len().min(self.edge_out.len()),
            });
        }
        for k in 0..n_edges {
            let (i, o) = (self.edge_in[k] as usize, self.edge_out[k] as usize);
            if i >= n_nodes || o >= n_nodes {
                return Err(Error::DataIntegrity(format!(
                    "edge {} references node out of range",
                    k
                )));
            }
            if self.layer[o] != self.layer[i] + 1 {
                return Err(Error::DataIntegrity(format!(
                    "edge {} does not connect consecutive layers",
                    k
                )));
            }
            if self.y[k] > 1 {
                return Err(Error::DataIntegrity(format!("edge {} label not 0/1", k)));
            }
        }
        Ok(())
    }
}

/// Wraps an angle difference into (-π, π].
pub fn wrap_angle(dphi: f64) -> f64 {
    let mut d = dphi.rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    d
}

/// Pseudorapidity of the segment direction; θ is taken against the beam
/// axis from (Δz, Δr), the standard polar-angle definition.
fn segment_eta(dr: f64, dz: f64) -> f64 {
    let theta = dr.atan2(dz);
    -((theta / 2.0).tan()).ln()
}

struct SelectedNode {
    r: f64,
    phi: f64,
    z: f64,
    ordinal: u32,
    particle_id: u64,
}

/// One candidate doublet (consecutive-layer node pair) before edge cuts.
#[derive(Debug, Clone, Copy)]
pub struct CandidateEdge {
    pub node_in: u32,
    pub node_out: u32,
    pub eta: f64,
    pub dphi_dr: f64,
    pub z0_mm: f64,
    pub is_true: bool,
}

/// Node selection and layer-ordinal assignment shared by graph construction,
/// diagnostics and histograms. Nodes are ordered by hit id; ordinals rank
/// the distinct (volume, layer) pairs present among selected hits.
fn select_nodes(event: &Event, cuts: &CutConfig) -> Vec<SelectedNode> {
    let pt_by_pid: HashMap<u64, f64> = event
        .particles
        .iter()
        .map(|p| (p.particle_id, p.pt()))
        .collect();

    let mut hits: Vec<&crate::event::Hit> = event
        .hits
        .iter()
        .filter(|h| {
            if !cuts.barrel_volumes.contains(&h.volume_id) {
                return false;
            }
            let pid = event.particle_of(h.hit_id);
            if pid == 0 {
                return false;
            }
            match pt_by_pid.get(&pid) {
                Some(&pt) => pt > cuts.pt_min_gev,
                None => false,
            }
        })
        .collect();
    hits.sort_by_key(|h| h.hit_id);

    let mut vol_layers: Vec<(u32, u32)> = hits
        .iter()
        .map(|h| (h.volume_id, h.layer_id))
        .collect();
    vol_layers.sort_unstable();
    vol_layers.dedup();

    hits.iter()
        .map(|h| {
            let ordinal = vol_layers
                .binary_search(&(h.volume_id, h.layer_id))
                .expect("layer of a selected hit") as u32;
            SelectedNode {
                r: (h.x * h.x + h.y * h.y).sqrt(),
                phi: h.y.atan2(h.x),
                z: h.z,
                ordinal,
                particle_id: event.particle_of(h.hit_id),
            }
        })
        .collect()
}

/// Enumerates all consecutive-layer node pairs with their cut quantities.
pub fn candidate_edges(event: &Event, cuts: &CutConfig) -> Vec<CandidateEdge> {
    let nodes = select_nodes(event, cuts);
    candidates_of_nodes(&nodes)
}

fn candidates_of_nodes(nodes: &[SelectedNode]) -> Vec<CandidateEdge> {
    let max_ordinal = nodes.iter().map(|n| n.ordinal).max().unwrap_or(0);
    let mut by_layer: Vec<Vec<u32>> = vec![Vec::new(); max_ordinal as usize + 1];
    for (i, n) in nodes.iter().enumerate() {
        by_layer[n.ordinal as usize].push(i as u32);
    }

    let mut out = Vec::new();
    for window in by_layer.windows(2) {
        for &a in &window[0] {
            for &b in &window[1] {
                let (inner, outer) = (&nodes[a as usize], &nodes[b as usize]);
                let dr = outer.r - inner.r;
                let dz = outer.z - inner.z;
                let dphi = wrap_angle(outer.phi - inner.phi);
                out.push(CandidateEdge {
                    node_in: a,
                    node_out: b,
                    eta: segment_eta(dr, dz),
                    dphi_dr: dphi / dr,
                    z0_mm: inner.z - inner.r * dz / dr,
                    is_true: inner.particle_id != 0 && inner.particle_id == outer.particle_id,
                });
            }
        }
    }
    out
}

fn passes_cuts(c: &CandidateEdge, cuts: &CutConfig) -> bool {
    // a non-finite threshold disables the cut entirely
    (!cuts.eta_max.is_finite() || c.eta.abs() < cuts.eta_max)
        && (!cuts.dphi_dr_max.is_finite() || c.dphi_dr.abs() < cuts.dphi_dr_max)
        && (!cuts.z0_max_mm.is_finite() || c.z0_mm.abs() < cuts.z0_max_mm)
}

/// Builds the labeled hit graph of one event. A zero-node selection yields
/// an empty graph rather than an error.
pub fn construct_graph(event: &Event, cuts: &CutConfig) -> Result<HitGraph> {
    cuts.validate()?;
    let nodes = select_nodes(event, cuts);
    let mut graph = HitGraph {
        x: nodes.iter().map(|n| [n.r, n.phi, n.z]).collect(),
        layer: nodes.iter().map(|n| n.ordinal).collect(),
        edge_in: Vec::new(),
        edge_out: Vec::new(),
        y: Vec::new(),
    };
    for c in candidates_of_nodes(&nodes) {
        if passes_cuts(&c, cuts) {
            graph.edge_in.push(c.node_in);
            graph.edge_out.push(c.node_out);
            graph.y.push(c.is_true as u8);
        }
    }
    graph.validate()?;
    Ok(graph)
}

/// Selected true edges over true candidate doublets before edge cuts;
/// `None` when the event has no true doublets.
pub fn efficiency(graph: &HitGraph, event: &Event, cuts: &CutConfig) -> Option<f64> {
    let total_true = candidate_edges(event, cuts)
        .iter()
        .filter(|c| c.is_true)
        .count();
    if total_true == 0 {
        return None;
    }
    Some(graph.n_true_edges() as f64 / total_true as f64)
}

/// Selected true edges over selected edges; `None` for an empty graph.
pub fn purity(graph: &HitGraph) -> Option<f64> {
    if graph.n_edges() == 0 {
        return None;
    }
    Some(graph.n_true_edges() as f64 / graph.n_edges() as f64)
}

/// Binned true/fake counts of one selection quantity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionHistogram {
    pub quantity: String,
    pub lo: f64,
    pub hi: f64,
    pub true_counts: Vec<u64>,
    pub fake_counts: Vec<u64>,
}

impl SelectionHistogram {
    fn from_values(quantity: &str, values: &[(f64, bool)], n_bins: usize) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(v, _) in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if values.is_empty() {
            lo = 0.0;
            hi = 1.0;
        } else if hi - lo < f64::MIN_POSITIVE {
            hi = lo + 1.0;
        }
        let mut true_counts = vec![0u64; n_bins];
        let mut fake_counts = vec![0u64; n_bins];
        let width = (hi - lo) / n_bins as f64;
        for &(v, is_true) in values {
            let bin = (((v - lo) / width) as usize).min(n_bins - 1);
            if is_true {
                true_counts[bin] += 1;
            } else {
                fake_counts[bin] += 1;
            }
        }
        SelectionHistogram {
            quantity: quantity.to_string(),
            lo,
            hi,
            true_counts,
            fake_counts,
        }
    }

    pub fn total(&self) -> u64 {
        self.true_counts.iter().sum::<u64>() + self.fake_counts.iter().sum::<u64>()
    }
}

/// Δφ/Δr and z₀ distributions of candidate doublets split by truth, with
/// the applied thresholds carried as metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionHistograms {
    pub cuts: CutConfig,
    pub n_candidates: u64,
    pub dphi_dr: SelectionHistogram,
    pub z0_mm: SelectionHistogram,
}

impl SelectionHistograms {
    /// Pools pre-computed candidates (possibly from several events).
    pub fn from_candidates(
        candidates: &[CandidateEdge],
        cuts: &CutConfig,
        n_bins: usize,
    ) -> Result<Self> {
        if n_bins < 2 {
            return Err(Error::InvalidConfig("histogram needs n_bins >= 2".into()));
        }
        let ratios: Vec<(f64, bool)> =
            candidates.iter().map(|c| (c.dphi_dr, c.is_true)).collect();
        let z0s: Vec<(f64, bool)> = candidates.iter().map(|c| (c.z0_mm, c.is_true)).collect();
        Ok(SelectionHistograms {
            cuts: cuts.clone(),
            n_candidates: candidates.len() as u64,
            dphi_dr: SelectionHistogram::from_values("dphi_dr", &ratios, n_bins),
            z0_mm: SelectionHistogram::from_values("z0_mm", &z0s, n_bins),
        })
    }

    /// CSV rows `quantity,bin_lo,bin_hi,true_count,fake_count`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("quantity,bin_lo,bin_hi,true_count,fake_count\n");
        for h in [&self.dphi_dr, &self.z0_mm] {
            let n_bins = h.true_counts.len();
            let width = (h.hi - h.lo) / n_bins as f64;
            for b in 0..n_bins {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    h.quantity,
                    h.lo + width * b as f64,
                    h.lo + width * (b + 1) as f64,
                    h.true_counts[b],
                    h.fake_counts[b]
                )
                .expect("string write");
            }
        }
        out
    }
}

/// Tabulates the selection quantities of one event.
pub fn selection_histograms(
    event: &Event,
    cuts: &CutConfig,
    n_bins: usize,
) -> Result<SelectionHistograms> {
    SelectionHistograms::from_candidates(&candidate_edges(event, cuts), cuts, n_bins)
}

// ---------------------------------------------------------------------------
// Graph persistence: little-endian binary layout with an embedded JSON
// provenance header and a human-readable sidecar.
//
//   magic "QTKG" | version u32 | header_len u32 | header JSON bytes
//   | n_nodes u64 | n_edges u64
//   | x: n_nodes * 3 * f64   (r, phi, z)
//   | layer: n_nodes * u32
//   | edge_in: n_edges * u32 | edge_out: n_edges * u32 | y: n_edges * u8

const GRAPH_MAGIC: &[u8; 4] = b"QTKG";
const GRAPH_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphProvenance {
    pub event_id: u64,
    pub cuts: CutConfig,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn write_graph(path: &Path, graph: &HitGraph, provenance: &GraphProvenance) -> Result<()> {
    graph.validate()?;
    let header = serde_json::to_vec(provenance)?;
    let mut buf = Vec::with_capacity(64 + header.len() + graph.n_nodes() * 28 + graph.n_edges() * 9);
    buf.extend_from_slice(GRAPH_MAGIC);
    buf.extend_from_slice(&GRAPH_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(graph.n_nodes() as u64).to_le_bytes());
    buf.extend_from_slice(&(graph.n_edges() as u64).to_le_bytes());
    for row in &graph.x {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for &l in &graph.layer {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for &e in &graph.edge_in {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for &e in &graph.edge_out {
        buf.extend_from_slice(&e.to_le_bytes());
    }
    buf.extend_from_slice(&graph.y);

    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;

    // sidecar with the provenance plus basic counts
    let sidecar = serde_json::json!({
        "provenance": provenance,
        "n_nodes": graph.n_nodes(),
        "n_edges": graph.n_edges(),
        "n_true_edges": graph.n_true_edges(),
    });
    std::fs::write(
        path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::BadFormat(format!(
                "{}: truncated graph file",
                self.path.display()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_graph(path: &Path) -> Result<(HitGraph, GraphProvenance)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != GRAPH_MAGIC {
        return Err(Error::BadFormat(format!(
            "{}: not a graph file",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != GRAPH_VERSION {
        return Err(Error::BadFormat(format!(
            "{}: unsupported graph version {}",
            path.display(),
            version
        )));
    }
    let header_len = r.u32()? as usize;
    let provenance: GraphProvenance = serde_json::from_slice(r.take(header_len)?)?;
    let n_nodes = r.u64()? as usize;
    let n_edges = r.u64()? as usize;
    let mut graph = HitGraph {
        x: Vec::with_capacity(n_nodes),
        layer: Vec::with_capacity(n_nodes),
        edge_in: Vec::with_capacity(n_edges),
        edge_out: Vec::with_capacity(n_edges),
        y: Vec::with_capacity(n_edges),
    };
    for _ in 0..n_nodes {
        graph.x.push([r.f64()?, r.f64()?, r.f64()?]);
    }
    for _ in 0..n_nodes {
        graph.layer.push(r.u32()?);
    }
    for _ in 0..n_edges {
        graph.edge_in.push(r.u32()?);
    }
    for _ in 0..n_edges {
        graph.edge_out.push(r.u32()?);
    }
    graph.y = r.take(n_edges)?.to_vec();
    if r.pos != bytes.len() {
        return Err(Error::BadFormat(format!(
            "{}: {} trailing bytes",
            path.display(),
            bytes.len() - r.pos
        )));
    }
    graph.validate()?;
    Ok((graph, provenance))
}
