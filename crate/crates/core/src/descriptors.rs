//! Circuit descriptors: expressibility and entanglement capability.
//!
//! Expressibility compares the fidelity distribution of randomly
//! parameterized circuit states against the analytic Haar fidelity law
//! P(F) = (N-1)(1-F)^(N-2) through a binned KL divergence; E' = -log10(E)
//! grows with more expressive circuits. Entanglement capability averages the
//! Meyer-Wallach measure Q over random parameter draws.
//!
//! Sampling varies only the circuit parameters; encoding inputs are pinned
//! to 0.5 so the encoding block contributes a constant unitary. Each sample
//! index owns an RNG stream derived from (seed, index), making runs
//! reproducible and order-independent. Per sample, parameters are drawn
//! uniformly from [0, 2π) in index order: for fidelity pairs all parameters
//! of the first state, then all parameters of the second.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::exec;
use crate::pqc::{build_qnn, EncodingSpec, PqcSpec, QnnSpec};
use crate::statevector::{fidelity, Statevector};
use crate::template::CircuitTemplate;

/// Reference input for every encoding feature during descriptor sampling.
pub const REFERENCE_INPUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    pub n_samples: usize,
    pub n_bins: usize,
    pub rng_seed: u64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            n_samples: 5000,
            n_bins: 75,
            rng_seed: 1,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 100 {
            return Err(Error::InvalidConfig(format!(
                "n_samples {} below minimum 100",
                self.n_samples
            )));
        }
        if self.n_bins < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_bins {} below minimum 2",
                self.n_bins
            )));
        }
        Ok(())
    }
}

/// Full descriptor evaluation of one circuit spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorReport {
    pub expressibility_e: f64,
    /// -log10(E); +inf when E underflows to zero.
    pub expressibility_eprime: f64,
    pub entanglement: f64,
    /// Normalized fidelity histogram over [0, 1], sums to 1.
    pub fidelity_histogram: Vec<f64>,
}

/// Independent RNG stream for one sample index.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>() * TAU).collect()
}

/// Descriptor template for a bare circuit spec: default Y-axis encoding in
/// front, inputs pinned at [`REFERENCE_INPUT`].
pub fn descriptor_template(spec: &PqcSpec) -> Result<CircuitTemplate> {
    build_qnn(&QnnSpec {
        encoding: EncodingSpec::default(),
        pqc: *spec,
    })
}

fn fidelity_sample(template: &CircuitTemplate, inputs: &[f64], seed: u64, index: usize) -> f64 {
    let mut rng = sample_rng(seed, index as u64);
    let theta = draw_params(&mut rng, template.n_params());
    let phi = draw_params(&mut rng, template.n_params());
    let a = template.run(&theta, inputs).expect("validated template");
    let b = template.run(&phi, inputs).expect("validated template");
    fidelity(&a, &b).expect("equal qubit counts")
}

/// Fidelities |⟨ψ_θ|ψ_φ⟩|² of `n_samples` random parameter pairs.
pub fn fidelity_samples(template: &CircuitTemplate, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let inputs = vec![REFERENCE_INPUT; template.n_inputs()];
    Ok(exec::map_indexed(cfg.n_samples, |i| {
        fidelity_sample(template, &inputs, cfg.rng_seed, i)
    }))
}

/// Sequential variant of [`fidelity_samples`]; same output.
pub fn fidelity_samples_seq(
    template: &CircuitTemplate,
    cfg: &DescriptorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let inputs = vec![REFERENCE_INPUT; template.n_inputs()];
    Ok(exec::map_indexed_seq(cfg.n_samples, |i| {
        fidelity_sample(template, &inputs, cfg.rng_seed, i)
    }))
}

/// Normalized equal-width histogram of values in [0, 1].
pub fn histogram_unit_interval(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        let v = v.clamp(0.0, 1.0);
        let bin = ((v * n_bins as f64) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    let total = values.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

/// Normalized fidelity histogram of a circuit spec.
pub fn sample_fidelity_distribution(spec: &PqcSpec, cfg: &DescriptorConfig) -> Result<Vec<f64>> {
    let template = descriptor_template(spec)?;
    let samples = fidelity_samples(&template, cfg)?;
    Ok(histogram_unit_interval(&samples, cfg.n_bins))
}

/// Analytic per-bin mass of the Haar fidelity law P(F) = (N-1)(1-F)^(N-2)
/// for an N = 2^n dimensional space, integrated exactly over each bin.
pub fn haar_fidelity_bin_mass(n_qubits: usize, n_bins: usize) -> Vec<f64> {
    let dim = 1u64 << n_qubits;
    let exponent = (dim - 1) as f64;
    // CDF is 1 - (1-F)^(N-1); bin mass is the CDF difference.
    let cdf = |f: f64| 1.0 - (1.0 - f).powf(exponent);
    (0..n_bins)
        .map(|j| {
            let lo = j as f64 / n_bins as f64;
            let hi = (j + 1) as f64 / n_bins as f64;
            cdf(hi) - cdf(lo)
        })
        .collect()
}

/// Discrete KL divergence Σ p ln(p/q) with the 0·log 0 := 0 convention.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else if qi <= 0.0 {
                f64::INFINITY
            } else {
                pi * (pi / qi).ln()
            }
        })
        .sum()
}

/// (E, E') of an explicit template; exposed for degenerate-circuit tests.
pub fn expressibility_of_template(
    template: &CircuitTemplate,
    cfg: &DescriptorConfig,
) -> Result<(f64, f64)> {
    let samples = fidelity_samples(template, cfg)?;
    let p = histogram_unit_interval(&samples, cfg.n_bins);
    let q = haar_fidelity_bin_mass(template.n_qubits(), cfg.n_bins);
    let e = kl_divergence(&p, &q);
    let eprime = if e == 0.0 { f64::INFINITY } else { -e.log10() };
    Ok((e, eprime))
}

/// Expressibility (E, E' = -log10 E) of a circuit spec.
pub fn expressibility(spec: &PqcSpec, cfg: &DescriptorConfig) -> Result<(f64, f64)> {
    let template = descriptor_template(spec)?;
    expressibility_of_template(&template, cfg)
}

/// Meyer-Wallach entanglement measure Q = 2(1 - mean single-qubit purity).
///
/// Zero for product states, 1 for a maximally entangled two-qubit pair.
pub fn meyer_wallach_q(state: &Statevector) -> Result<f64> {
    let n = state.n_qubits();
    if n < 2 {
        return Err(Error::QubitCount(n));
    }
    let amps = state.amplitudes();
    let mut purity_sum = 0.0;
    for q in 0..n {
        let mask = 1usize << q;
        // single-qubit reduced density matrix by direct partial trace
        let mut rho00 = 0.0f64;
        let mut rho11 = 0.0f64;
        let mut rho01 = Complex64::new(0.0, 0.0);
        for (i, amp) in amps.iter().enumerate() {
            if i & mask == 0 {
                rho00 += amp.norm_sqr();
                rho01 += *amp * amps[i | mask].conj();
            } else {
                rho11 += amp.norm_sqr();
            }
        }
        purity_sum += rho00 * rho00 + rho11 * rho11 + 2.0 * rho01.norm_sqr();
    }
    Ok(2.0 * (1.0 - purity_sum / n as f64))
}

fn entanglement_sample(template: &CircuitTemplate, inputs: &[f64], seed: u64, index: usize) -> f64 {
    let mut rng = sample_rng(seed, index as u64);
    let theta = draw_params(&mut rng, template.n_params());
    let state = template.run(&theta, inputs).expect("validated template");
    meyer_wallach_q(&state).expect("n_qubits >= 2")
}

/// Per-sample Meyer-Wallach values over random parameter draws.
pub fn entanglement_samples(
    template: &CircuitTemplate,
    cfg: &DescriptorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if template.n_qubits() < 2 {
        return Err(Error::QubitCount(template.n_qubits()));
    }
    let inputs = vec![REFERENCE_INPUT; template.n_inputs()];
    Ok(exec::map_indexed(cfg.n_samples, |i| {
        entanglement_sample(template, &inputs, cfg.rng_seed, i)
    }))
}

/// Sequential variant of [`entanglement_samples`]; same output.
pub fn entanglement_samples_seq(
    template: &CircuitTemplate,
    cfg: &DescriptorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if template.n_qubits() < 2 {
        return Err(Error::QubitCount(template.n_qubits()));
    }
    let inputs = vec![REFERENCE_INPUT; template.n_inputs()];
    Ok(exec::map_indexed_seq(cfg.n_samples, |i| {
        entanglement_sample(template, &inputs, cfg.rng_seed, i)
    }))
}

/// Mean Meyer-Wallach Q of an explicit template under random parameters.
pub fn entanglement_capability_of_template(
    template: &CircuitTemplate,
    cfg: &DescriptorConfig,
) -> Result<f64> {
    let samples = entanglement_samples(template, cfg)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Mean Meyer-Wallach Q of a circuit spec under random parameters.
pub fn entanglement_capability(spec: &PqcSpec, cfg: &DescriptorConfig) -> Result<f64> {
    let template = descriptor_template(spec)?;
    entanglement_capability_of_template(&template, cfg)
}

/// Haar-random state: normalized complex-Gaussian amplitude vector.
pub fn haar_sample(n_qubits: usize, rng: &mut impl Rng) -> Result<Statevector> {
    if n_qubits == 0 || n_qubits > crate::statevector::MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    let dim = 1usize << n_qubits;
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        })
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    Statevector::from_amplitudes(amps)
}

/// Fidelities of independently drawn Haar state pairs, stream-seeded like the
/// circuit sampler.
pub fn haar_fidelity_samples(
    n_qubits: usize,
    cfg: &DescriptorConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if n_qubits == 0 || n_qubits > crate::statevector::MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    Ok(exec::map_indexed(cfg.n_samples, |i| {
        let mut rng = sample_rng(cfg.rng_seed, i as u64);
        let a = haar_sample(n_qubits, &mut rng).expect("checked qubit count");
        let b = haar_sample(n_qubits, &mut rng).expect("checked qubit count");
        fidelity(&a, &b).expect("equal qubit counts")
    }))
}

/// Expressibility, entanglement and the fidelity histogram in one pass.
pub fn descriptor_report(spec: &PqcSpec, cfg: &DescriptorConfig) -> Result<DescriptorReport> {
    let template = descriptor_template(spec)?;
    let fid = fidelity_samples(&template, cfg)?;
    let histogram = histogram_unit_interval(&fid, cfg.n_bins);
    let haar = haar_fidelity_bin_mass(template.n_qubits(), cfg.n_bins);
    let e = kl_divergence(&histogram, &haar);
    let eprime = if e == 0.0 { f64::INFINITY } else { -e.log10() };
    let entanglement = entanglement_capability_of_template(&template, cfg)?;
    Ok(DescriptorReport {
        expressibility_e: e,
        expressibility_eprime: eprime,
        entanglement,
        fidelity_histogram: histogram,
    })
}
