//! Seeded random-pulse generation and the Monte-Carlo success-rate
//! benchmark.
//!
//! Every pulse is a pure function of `(seed, draw_index)`: the index
//! selects an independent stream of one seeded generator, so batches can
//! run in parallel without changing any result.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{reconstruct, ReconConfig};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::forward::{synthesize_spectrogram, Normalization, Spectrogram};
use crate::grid::Grid;
use crate::phase::{build_family, BoundInputs, FamilyScan, ScanDescriptor};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Random spectral-phase model of the object set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    /// Polynomial phase with random coefficients of orders 2 to 4.
    Poly4,
    /// Sinusoidal phase with random amplitude, period and offset.
    Sinus,
}

/// Parameters of the seeded random object-pulse generator.
#[derive(Debug, Clone)]
pub struct RandomPulseParams {
    pub grid: Grid,
    /// Carrier wavelength in meters.
    pub center_wavelength: f64,
    /// Range of drawn spectral bandwidths in meters, `0 < min < max`.
    pub bandwidth_range: (f64, f64),
    pub phase_kind: PhaseKind,
    pub seed: u64,
}

impl RandomPulseParams {
    /// The benchmark defaults: 1024 samples over 8 ps, 800 nm carrier,
    /// bandwidths between 2 nm and 20 nm.
    pub fn standard(phase_kind: PhaseKind, seed: u64) -> Self {
        Self {
            grid: Grid::new(1024, 8e-12).expect("standard grid is valid"),
            center_wavelength: 800e-9,
            bandwidth_range: (2e-9, 20e-9),
            phase_kind,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bandwidth_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth range must satisfy 0 < min < max, got [{lo}, {hi}]"
            )));
        }
        if !(self.center_wavelength > 0.0 && self.center_wavelength.is_finite()) {
            return Err(Error::InvalidArgument(
                "center wavelength must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Converts a wavelength span around the carrier to an angular
    /// frequency span.
    pub fn bandwidth_to_omega(&self, bandwidth_m: f64) -> f64 {
        std::f64::consts::TAU * SPEED_OF_LIGHT * bandwidth_m
            / (self.center_wavelength * self.center_wavelength)
    }
}

/// Deterministic random object pulse: a multi-lobe spectrum with a random
/// polynomial or sinusoidal spectral phase, unit energy, frequency domain.
///
/// The lobe widths are kept above the grid resolution and the drawn phase
/// is capped so the pulse sits well inside the time window; otherwise the
/// duration-budget theory the benchmark probes would be violated by the
/// objects themselves.
pub fn random_pulse(params: &RandomPulseParams, draw_index: u64) -> Result<Field> {
    params.validate()?;
    let grid = &params.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(draw_index);

    let (bw_lo, bw_hi) = params.bandwidth_range;
    let bandwidth = params.bandwidth_to_omega(rng.gen_range(bw_lo..bw_hi));
    let d_omega = grid.d_omega();

    // Spectral intensity: 2 to 5 Gaussian lobes inside the drawn band.
    let n_lobes = rng.gen_range(2..=5usize);
    let sigma_lo = (1.5 * d_omega).max(0.083 * bandwidth);
    let sigma_hi = (0.21 * bandwidth).max(sigma_lo * 1.05);
    let lobes: Vec<(f64, f64, f64)> = (0..n_lobes)
        .map(|_| {
            (
                rng.gen_range(-0.35..0.35) * bandwidth,
                rng.gen_range(sigma_lo..sigma_hi),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();

    let edge = 0.5 * bandwidth;
    let window = grid.time_window();
    enum DrawnPhase {
        Poly([f64; 3]),
        Sinus { a: f64, tau: f64, phi: f64 },
    }
    let phase = match params.phase_kind {
        PhaseKind::Poly4 => {
            // Cap each order by both a band-edge excursion of 8 pi and a
            // band-edge group delay of T/16.
            let mut coeffs = [0.0; 3];
            for (idx, order) in (2u32..=4).enumerate() {
                let excursion_cap = 8.0 * std::f64::consts::PI / edge.powi(order as i32);
                let delay_cap = window / (16.0 * order as f64 * edge.powi(order as i32 - 1));
                let cap = excursion_cap.min(delay_cap);
                coeffs[idx] = rng.gen_range(-1.0..1.0) * cap;
            }
            DrawnPhase::Poly(coeffs)
        }
        PhaseKind::Sinus => {
            let a: f64 = rng.gen_range(0.0..3.0 * std::f64::consts::PI);
            // Satellite pulses reach out to roughly (a + 2) tau; keep them
            // inside a fraction of the window.
            let tau_cap = 1e-12f64.min(0.1875 * window / (a + 2.0));
            let tau = rng.gen_range(0.0..tau_cap);
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            DrawnPhase::Sinus { a, tau, phi }
        }
    };

    let samples: Vec<Complex64> = (0..grid.n_samples())
        .map(|j| {
            let w = grid.omega_at(j);
            let intensity: f64 = lobes
                .iter()
                .map(|&(c, s, h)| h * (-(w - c) * (w - c) / (2.0 * s * s)).exp())
                .sum();
            let psi = match &phase {
                DrawnPhase::Poly(c) => c[0] * w.powi(2) + c[1] * w.powi(3) + c[2] * w.powi(4),
                DrawnPhase::Sinus { a, tau, phi } => a * (w * tau + phi).cos(),
            };
            Complex64::from_polar(intensity.sqrt(), psi)
        })
        .collect();

    let mut field = Field::from_freq_samples(grid.clone(), samples)?;
    field.normalize_energy()?;
    Ok(field)
}

/// Additive-Gaussian detector noise, deterministic per seed. The noise
/// std is `relative_sigma` times the global peak; entries are clipped at
/// zero, and a noisy spectrogram is re-tagged as raw.
pub fn add_noise(spectrogram: &Spectrogram, relative_sigma: f64, seed: u64) -> Result<Spectrogram> {
    if relative_sigma < 0.0 || !relative_sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "relative noise sigma must be >= 0, got {relative_sigma}"
        )));
    }
    if relative_sigma == 0.0 {
        return Ok(spectrogram.clone());
    }
    let std = relative_sigma * spectrogram.peak();
    let normal = Normal::new(0.0, std)
        .map_err(|e| Error::InvalidArgument(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = spectrogram
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| (v + normal.sample(&mut rng)).max(0.0))
                .collect()
        })
        .collect();
    Spectrogram::from_rows(
        spectrogram.grid().clone(),
        spectrogram.family().clone(),
        rows,
        Normalization::Raw,
    )
}

/// Noise applied to each synthesized spectrogram of a benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub relative_sigma: f64,
    pub seed: u64,
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub pulses: RandomPulseParams,
    pub scan: FamilyScan,
    pub n_pulses: usize,
    pub recon: ReconConfig,
    /// Duration budget as a fraction of the time window.
    pub gamma: f64,
    pub noise: Option<NoiseSpec>,
}

impl BenchConfig {
    pub fn new(pulses: RandomPulseParams, scan: FamilyScan, n_pulses: usize) -> Self {
        Self {
            pulses,
            scan,
            n_pulses,
            recon: ReconConfig::default(),
            gamma: 0.125,
            noise: None,
        }
    }
}

/// Outcome of one pulse of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    /// Stream index of the drawn pulse under the run seed.
    pub draw_index: u64,
    /// Descriptor of the family actually built for this pulse.
    pub family: Option<ScanDescriptor>,
    pub final_log10_rms: Option<f64>,
    pub success: bool,
    /// Set when the pulse could not be processed (bound failure etc.).
    pub failure: Option<String>,
}

/// Histogram of `log10(rms)` with fixed-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Left edge of every bin; one more edge than counts closes the range.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Cumulative percentage of reconstructions up to each bin (inclusive).
    pub cumulative_percent: Vec<f64>,
}

impl Histogram {
    /// Fixed-width histogram aligned to multiples of the bin width.
    fn build(values: &[f64], bin_width: f64) -> Self {
        if values.is_empty() {
            return Self {
                bin_width,
                bin_edges: Vec::new(),
                counts: Vec::new(),
                cumulative_percent: Vec::new(),
            };
        }
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = (min / bin_width).floor() as i64;
        let last = (max / bin_width).floor() as i64;
        let n_bins = (last - first + 1) as usize;
        let mut counts = vec![0usize; n_bins];
        for v in values {
            let mut idx = ((v / bin_width).floor() as i64 - first) as usize;
            if idx >= n_bins {
                idx = n_bins - 1;
            }
            counts[idx] += 1;
        }
        let bin_edges: Vec<f64> = (first..=last + 1).map(|k| k as f64 * bin_width).collect();
        let total = values.len() as f64;
        let mut acc = 0usize;
        let cumulative_percent = counts
            .iter()
            .map(|c| {
                acc += c;
                100.0 * acc as f64 / total
            })
            .collect();
        Self {
            bin_width,
            bin_edges,
            counts,
            cumulative_percent,
        }
    }
}

/// Aggregated result of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub gamma: f64,
    pub n_pulses: usize,
    pub records: Vec<PulseRecord>,
    pub histogram: Histogram,
    /// Fraction of pulses that reconstructed below the success threshold.
    pub success_rate: f64,
    /// Pulses that failed before reconstruction could run.
    pub n_failures: usize,
}

fn run_one_pulse(cfg: &BenchConfig, draw_index: u64) -> PulseRecord {
    let fail = |reason: String| PulseRecord {
        draw_index,
        family: None,
        final_log10_rms: None,
        success: false,
        failure: Some(reason),
    };
    let pulse = match random_pulse(&cfg.pulses, draw_index) {
        Ok(p) => p,
        Err(e) => return fail(format!("pulse generation: {e}")),
    };
    let intensity: Vec<f64> = pulse.samples().iter().map(|v| v.norm_sqr()).collect();
    let inputs = match BoundInputs::new(cfg.pulses.grid.clone(), intensity, cfg.gamma) {
        Ok(i) => i,
        Err(e) => return fail(format!("bound inputs: {e}")),
    };
    let family = match build_family(cfg.scan, &inputs) {
        Ok(f) => f,
        Err(e) => return fail(format!("family bounds: {e}")),
    };
    let scan_descriptor = *family.scan();
    let spectrogram = match synthesize_spectrogram(&pulse, &family, Normalization::UnitPeak) {
        Ok(s) => s,
        Err(e) => return fail(format!("synthesis: {e}")),
    };
    let spectrogram = match cfg.noise {
        Some(noise) => {
            let per_pulse_seed = noise.seed ^ draw_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            match add_noise(&spectrogram, noise.relative_sigma, per_pulse_seed) {
                Ok(s) => s,
                Err(e) => return fail(format!("noise: {e}")),
            }
        }
        None => spectrogram,
    };
    match reconstruct(&spectrogram, &cfg.recon) {
        Ok(result) => PulseRecord {
            draw_index,
            family: Some(scan_descriptor),
            final_log10_rms: Some(result.final_log10_rms),
            success: result.success,
            failure: None,
        },
        Err(e) => fail(format!("reconstruction: {e}")),
    }
}

/// Runs the seeded benchmark: draw pulses, derive per-pulse scan bounds,
/// synthesize, reconstruct and aggregate. Pulses run in parallel on the
/// current rayon pool; results are identical for any thread count.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.n_pulses == 0 {
        return Err(Error::InvalidArgument("n_pulses must be >= 1".into()));
    }
    cfg.pulses.validate()?;
    cfg.recon.validate()?;
    if !(cfg.gamma > 0.0 && cfg.gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {}",
            cfg.gamma
        )));
    }
    let records: Vec<PulseRecord> = (0..cfg.n_pulses as u64)
        .into_par_iter()
        .map(|i| run_one_pulse(cfg, i))
        .collect();
    let rms_values: Vec<f64> = records
        .iter()
        .filter_map(|r| r.final_log10_rms)
        .collect();
    let histogram = Histogram::build(&rms_values, 0.25);
    let n_success = records.iter().filter(|r| r.success).count();
    let n_failures = records.iter().filter(|r| r.failure.is_some()).count();
    Ok(BenchReport {
        seed: cfg.pulses.seed,
        gamma: cfg.gamma,
        n_pulses: cfg.n_pulses,
        success_rate: n_success as f64 / cfg.n_pulses as f64,
        records,
        histogram,
        n_failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_draw_is_bit_identical() {
        let params = RandomPulseParams::standard(PhaseKind::Poly4, 7);
        let a = random_pulse(&params, 3).unwrap();
        let b = random_pulse(&params, 3).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = random_pulse(&params, 4).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn drawn_pulses_have_unit_energy() {
        let params = RandomPulseParams::standard(PhaseKind::Sinus, 11);
        for i in 0..20 {
            let p = random_pulse(&params, i).unwrap();
            assert!((p.energy() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn narrowband_draws_have_comparable_support() {
        // 100 draws at ~2 nm: the 1%-of-peak support must land in [1, 4] nm.
        let mut params = RandomPulseParams::standard(PhaseKind::Poly4, 23);
        params.bandwidth_range = (1.99e-9, 2.01e-9);
        let grid = params.grid.clone();
        let to_nm = params.center_wavelength * params.center_wavelength
            / (std::f64::consts::TAU * SPEED_OF_LIGHT);
        for i in 0..100 {
            let p = random_pulse(&params, i).unwrap();
            let intensity: Vec<f64> = p.samples().iter().map(|v| v.norm_sqr()).collect();
            let peak = intensity.iter().cloned().fold(0.0, f64::max);
            let occupied = intensity.iter().filter(|v| **v > 0.01 * peak).count();
            let width_nm = occupied as f64 * grid.d_omega() * to_nm * 1e9;
            assert!(
                (1.0..=4.0).contains(&width_nm),
                "draw {i}: support {width_nm} nm"
            );
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let grid = Grid::new(256, 8e-12).unwrap();
        let object = Field::gaussian_pulse(&grid, 300e-15).unwrap();
        let inputs = BoundInputs::new(
            grid.clone(),
            object.samples().iter().map(|v| v.norm_sqr()).collect(),
            0.125,
        )
        .unwrap();
        let family = build_family(FamilyScan::QuadraticQ { members: 4 }, &inputs).unwrap();
        let sg = synthesize_spectrogram(&object, &family, Normalization::UnitPeak).unwrap();
        let same = add_noise(&sg, 0.0, 99).unwrap();
        assert_eq!(same.rows(), sg.rows());
        assert_eq!(same.normalization(), sg.normalization());
    }

    #[test]
    fn noise_is_clipped_and_deterministic() {
        let grid = Grid::new(256, 8e-12).unwrap();
        let object = Field::gaussian_pulse(&grid, 300e-15).unwrap();
        let inputs = BoundInputs::new(
            grid.clone(),
            object.samples().iter().map(|v| v.norm_sqr()).collect(),
            0.125,
        )
        .unwrap();
        let family = build_family(FamilyScan::QuadraticQ { members: 4 }, &inputs).unwrap();
        let sg = synthesize_spectrogram(&object, &family, Normalization::UnitPeak).unwrap();
        let a = add_noise(&sg, 0.02, 5).unwrap();
        let b = add_noise(&sg, 0.02, 5).unwrap();
        assert_eq!(a.rows(), b.rows());
        assert!(a.rows().iter().flatten().all(|v| *v >= 0.0));
        assert_ne!(a.rows(), sg.rows());
        assert_eq!(a.normalization(), Normalization::Raw);
    }

    #[test]
    fn histogram_bins_are_quarter_decades() {
        let values = [-4.1, -4.0, -3.9, -6.2, -0.3];
        let h = Histogram::build(&values, 0.25);
        assert_eq!(h.counts.iter().sum::<usize>(), values.len());
        assert_eq!(h.bin_edges.len(), h.counts.len() + 1);
        assert!((h.cumulative_percent.last().unwrap() - 100.0).abs() < 1e-12);
        for w in h.cumulative_percent.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for e in &h.bin_edges {
            let k = e / 0.25;
            assert!((k - k.round()).abs() < 1e-12);
        }
    }
}
