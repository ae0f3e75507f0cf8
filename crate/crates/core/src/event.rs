//! Detector events: TrackML-format CSV ingestion and synthetic generation.
//!
//! An event is a set of hits (detector signals), the particles that caused
//! them, and a truth map from hit to particle (particle id 0 means noise).
//! The CSV schema follows the TrackML layout: `event%09d-hits.csv`,
//! `-particles.csv` and `-truth.csv` with named header columns; extra columns
//! are ignored, required columns must exist.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub hit_id: u64,
    /// Cartesian position in mm.
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub volume_id: u32,
    pub layer_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub particle_id: u64,
    /// Momentum components in GeV.
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl Particle {
    pub fn pt(&self) -> f64 {
        (self.px * self.px + self.py * self.py).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub event_id: u64,
    pub hits: Vec<Hit>,
    pub particles: Vec<Particle>,
    /// hit_id -> particle_id; hits absent from the map are noise.
    pub truth: HashMap<u64, u64>,
}

impl Event {
    /// Truth particle id of a hit, 0 (noise) when unknown.
    pub fn particle_of(&self, hit_id: u64) -> u64 {
        self.truth.get(&hit_id).copied().unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = HashSet::with_capacity(self.hits.len());
        for h in &self.hits {
            if !ids.insert(h.hit_id) {
                return Err(Error::DataIntegrity(format!(
                    "duplicate hit_id {}",
                    h.hit_id
                )));
            }
        }
        for &hit_id in self.truth.keys() {
            if !ids.contains(&hit_id) {
                return Err(Error::DataIntegrity(format!(
                    "truth references hit_id {} absent from hits",
                    hit_id
                )));
            }
        }
        let particle_ids: HashSet<u64> = self.particles.iter().map(|p| p.particle_id).collect();
        if particle_ids.len() != self.particles.len() {
            return Err(Error::DataIntegrity("duplicate particle_id".into()));
        }
        for (&hit_id, &pid) in &self.truth {
            if pid != 0 && !particle_ids.contains(&pid) {
                return Err(Error::DataIntegrity(format!(
                    "truth maps hit {} to unknown particle {}",
                    hit_id, pid
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV reading

struct CsvTable {
    path: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let path_str = path.display().to_string();
        let mut lines = text.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => line.split(',').map(|s| s.trim().to_string()).collect(),
            None => Vec::new(),
        };
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != header.len() {
                return Err(Error::Csv {
                    path: path_str.clone(),
                    line: idx + 1,
                    message: format!(
                        "expected {} fields, got {}",
                        header.len(),
                        fields.len()
                    ),
                });
            }
            rows.push(fields);
        }
        Ok(CsvTable {
            path: path_str,
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    fn parse<T: std::str::FromStr>(&self, row: usize, col: usize) -> Result<T> {
        self.rows[row][col].parse().map_err(|_| Error::Csv {
            path: self.path.clone(),
            line: row + 2,
            message: format!("cannot parse '{}'", self.rows[row][col]),
        })
    }
}

/// TrackML file names for one event id.
pub fn trackml_file_names(event_id: u64) -> (String, String, String) {
    (
        format!("event{:09}-hits.csv", event_id),
        format!("event{:09}-particles.csv", event_id),
        format!("event{:09}-truth.csv", event_id),
    )
}

/// Loads an event from explicit hits/particles/truth paths.
pub fn load_event(
    hits_path: &Path,
    particles_path: &Path,
    truth_path: &Path,
    event_id: u64,
) -> Result<Event> {
    let hits_csv = CsvTable::read(hits_path)?;
    let (c_hit, c_x, c_y, c_z, c_vol, c_layer) = (
        hits_csv.column("hit_id")?,
        hits_csv.column("x")?,
        hits_csv.column("y")?,
        hits_csv.column("z")?,
        hits_csv.column("volume_id")?,
        hits_csv.column("layer_id")?,
    );
    let mut hits = Vec::with_capacity(hits_csv.rows.len());
    for r in 0..hits_csv.rows.len() {
        hits.push(Hit {
            hit_id: hits_csv.parse(r, c_hit)?,
            x: hits_csv.parse(r, c_x)?,
            y: hits_csv.parse(r, c_y)?,
            z: hits_csv.parse(r, c_z)?,
            volume_id: hits_csv.parse(r, c_vol)?,
            layer_id: hits_csv.parse(r, c_layer)?,
        });
    }

    let part_csv = CsvTable::read(particles_path)?;
    let mut particles = Vec::new();
    if !part_csv.header.is_empty() && !part_csv.rows.is_empty() {
        let (c_pid, c_px, c_py, c_pz) = (
            part_csv.column("particle_id")?,
            part_csv.column("px")?,
            part_csv.column("py")?,
            part_csv.column("pz")?,
        );
        for r in 0..part_csv.rows.len() {
            particles.push(Particle {
                particle_id: part_csv.parse(r, c_pid)?,
                px: part_csv.parse(r, c_px)?,
                py: part_csv.parse(r, c_py)?,
                pz: part_csv.parse(r, c_pz)?,
            });
        }
    }

    // An empty truth file (no rows or no header at all) labels every hit as noise.
    let truth_csv = CsvTable::read(truth_path)?;
    let mut truth = HashMap::new();
    if !truth_csv.header.is_empty() && !truth_csv.rows.is_empty() {
        let c_hit = truth_csv.column("hit_id")?;
        let c_pid = truth_csv.column("particle_id")?;
        for r in 0..truth_csv.rows.len() {
            let hit_id: u64 = truth_csv.parse(r, c_hit)?;
            let pid: u64 = truth_csv.parse(r, c_pid)?;
            truth.insert(hit_id, pid);
        }
    }

    let event = Event {
        event_id,
        hits,
        particles,
        truth,
    };
    event.validate()?;
    Ok(event)
}

/// Loads `event%09d-*.csv` from a directory.
pub fn load_event_from_dir(dir: &Path, event_id: u64) -> Result<Event> {
    let (h, p, t) = trackml_file_names(event_id);
    load_event(&dir.join(h), &dir.join(p), &dir.join(t), event_id)
}

/// Writes an event as a TrackML CSV triplet; loading it back reproduces the
/// event exactly (floats are printed in shortest round-trip form).
pub fn write_event(event: &Event, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let (hits_name, particles_name, truth_name) = trackml_file_names(event.event_id);

    let mut hits = String::from("hit_id,x,y,z,volume_id,layer_id,module_id\n");
    for h in &event.hits {
        writeln!(
            hits,
            "{},{},{},{},{},{},0",
            h.hit_id, h.x, h.y, h.z, h.volume_id, h.layer_id
        )
        .expect("string write");
    }
    std::fs::write(dir.join(hits_name), hits)?;

    let mut particles = String::from("particle_id,vx,vy,vz,px,py,pz,q,nhits\n");
    let mut sorted: Vec<&Particle> = event.particles.iter().collect();
    sorted.sort_by_key(|p| p.particle_id);
    for p in sorted {
        let nhits = event.truth.values().filter(|&&pid| pid == p.particle_id).count();
        writeln!(
            particles,
            "{},0,0,0,{},{},{},0,{}",
            p.particle_id, p.px, p.py, p.pz, nhits
        )
        .expect("string write");
    }
    std::fs::write(dir.join(particles_name), particles)?;

    let mut truth = String::from("hit_id,particle_id\n");
    for h in &event.hits {
        if let Some(&pid) = event.truth.get(&h.hit_id) {
            writeln!(truth, "{},{}", h.hit_id, pid).expect("string write");
        }
    }
    std::fs::write(dir.join(truth_name), truth)?;
    Ok(())
}

/// Event ids found as `event%09d-hits.csv` in a directory, sorted.
pub fn list_event_ids(dir: &Path) -> Result<Vec<u64>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(rest) = name.strip_prefix("event") {
            if let Some(digits) = rest.strip_suffix("-hits.csv") {
                if let Ok(id) = digits.parse::<u64>() {
                    ids.push(id);
                }
            }
        }
    }
    ids.sort_unstable();
    Ok(ids)
}

/// Paths of the CSV triplet for an event id inside a directory.
pub fn event_paths(dir: &Path, event_id: u64) -> (PathBuf, PathBuf, PathBuf) {
    let (h, p, t) = trackml_file_names(event_id);
    (dir.join(h), dir.join(p), dir.join(t))
}

// ---------------------------------------------------------------------------
// Synthetic events

/// Barrel layer radii in mm, innermost first.
pub const DEFAULT_LAYER_RADII_MM: [f64; 10] = [
    32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0,
];

/// Solenoid field used by the synthetic generator.
pub const FIELD_TESLA: f64 = 2.0;

/// Transverse helix radius in mm for a track of `pt_gev` in `b_tesla`.
pub fn helix_radius_mm(pt_gev: f64, b_tesla: f64) -> f64 {
    pt_gev / (0.3 * b_tesla) * 1000.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub event_id: u64,
    pub n_tracks: usize,
    pub seed: u64,
    pub layer_radii_mm: Vec<f64>,
}

impl SyntheticConfig {
    pub fn new(event_id: u64, n_tracks: usize, seed: u64) -> Self {
        SyntheticConfig {
            event_id,
            n_tracks,
            seed,
            layer_radii_mm: DEFAULT_LAYER_RADII_MM.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_tracks == 0 {
            return Err(Error::InvalidConfig("n_tracks must be >= 1".into()));
        }
        if self.layer_radii_mm.is_empty()
            || self
                .layer_radii_mm
                .windows(2)
                .any(|w| w[0] >= w[1] || w[0] <= 0.0)
        {
            return Err(Error::InvalidConfig(
                "layer radii must be positive and strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Volume and layer ids mimicking the TrackML barrel numbering: radii are
/// grouped 4-4-rest into volumes 8, 13, 17 with even layer ids 2, 4, ...
fn volume_layer_for_radius_index(idx: usize) -> (u32, u32) {
    let (volume, start) = match idx {
        0..=3 => (8, 0),
        4..=7 => (13, 4),
        _ => (17, 8),
    };
    (volume, 2 * (idx - start) as u32 + 2)
}

/// Generates helical tracks in a uniform solenoid field and intersects them
/// with the barrel layers: uniform φ₀, pT in [1, 5] GeV, charge ±1, vertex
/// z ~ N(0, 50 mm), pseudorapidity uniform in [-1, 1], Gaussian position
/// smearing of 0.1 mm per coordinate, one hit per crossed layer.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Event> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vertex_z = Normal::new(0.0, 50.0).expect("valid sigma");
    let smear = Normal::new(0.0, 0.1).expect("valid sigma");

    let mut hits = Vec::new();
    let mut particles = Vec::with_capacity(cfg.n_tracks);
    let mut truth = HashMap::new();
    let mut next_hit_id = 1u64;

    for track in 0..cfg.n_tracks {
        let pid = track as u64 + 1;
        let phi0 = rng.gen::<f64>() * TAU;
        let pt = 1.0 + rng.gen::<f64>() * 4.0;
        let charge: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let z_v = vertex_z.sample(&mut rng);
        let eta = -1.0 + rng.gen::<f64>() * 2.0;
        let pz = pt * eta.sinh();
        let radius = helix_radius_mm(pt, FIELD_TESLA);

        particles.push(Particle {
            particle_id: pid,
            px: pt * phi0.cos(),
            py: pt * phi0.sin(),
            pz,
        });

        for (idx, &r) in cfg.layer_radii_mm.iter().enumerate() {
            if r >= 2.0 * radius {
                // curls up before reaching this layer
                continue;
            }
            let half_turn = (r / (2.0 * radius)).asin();
            let phi = phi0 + charge * half_turn;
            let arc = 2.0 * radius * half_turn;
            let z = z_v + (pz / pt) * arc;
            let (volume_id, layer_id) = volume_layer_for_radius_index(idx);
            hits.push(Hit {
                hit_id: next_hit_id,
                x: r * phi.cos() + smear.sample(&mut rng),
                y: r * phi.sin() + smear.sample(&mut rng),
                z: z + smear.sample(&mut rng),
                volume_id,
                layer_id,
            });
            truth.insert(next_hit_id, pid);
            next_hit_id += 1;
        }
    }

    let event = Event {
        event_id: cfg.event_id,
        hits,
        particles,
        truth,
    };
    event.validate()?;
    Ok(event)
}
