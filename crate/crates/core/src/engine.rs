//! Iterative reconstruction of the object field from an SHG spectrogram.
//!
//! One member update runs the chain
//!
//! ```text
//! o = E H_n                      (modulate with the known transfer function)
//! g(t) = o(t)^2                  (second-harmonic envelope)
//! g'(w) = sqrt(S_n) e^{i arg g}  (replace amplitude with the measurement)
//! o'(t) = o + beta U (g' - g)    (weighted ptychographic correction)
//! E' = o' conj(H_n)              (undo the known modulation)
//! ```
//!
//! and a sweep applies it for every family member. The residual is the rms
//! difference between the unit-peak model and measured spectrograms.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Domain, Field};
use crate::forward::{synthesize_rows_unchecked, Spectrogram};
use crate::grid::Grid;
use crate::phase::PhaseSpec;

/// Order in which family members are visited within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "order", rename_all = "kebab-case")]
pub enum MemberOrder {
    /// Members in family order, matching how a scan is recorded.
    Sequential,
    /// A fresh seeded permutation every sweep.
    Shuffled { seed: u64 },
}

/// Starting point of the iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Fourier-limited Gaussian with the given intensity FWHM in seconds,
    /// centered at t = 0, unit energy.
    Gaussian { intensity_fwhm: f64 },
    /// A caller-supplied field on the spectrogram grid.
    Provided(Field),
    /// `sqrt(I)` of a known fundamental spectrum with flat phase.
    SpectrumWithFlatPhase(Vec<f64>),
}

/// Optional plateau-based early stop; off by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauStop {
    /// Number of consecutive sweeps the best rms may stagnate.
    pub window: usize,
    /// Relative improvement below which a sweep counts as stagnant.
    pub min_improvement: f64,
}

/// Parameters of the reconstruction loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    /// Regularizer in the weighted division, `0 < alpha < 1`.
    pub alpha: f64,
    /// Update weight, `0 <= beta <= 1`.
    pub beta: f64,
    /// Number of full passes over the family.
    pub sweeps: usize,
    pub member_order: MemberOrder,
    pub initial_guess: InitialGuess,
    /// A run counts as successful below this log10(rms).
    pub success_log_rms: f64,
    pub early_stop: Option<PlateauStop>,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-4,
            beta: 0.3,
            sweeps: 500,
            member_order: MemberOrder::Sequential,
            initial_guess: InitialGuess::Gaussian {
                intensity_fwhm: 200e-15,
            },
            success_log_rms: -3.5,
            early_stop: None,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in [0, 1], got {}",
                self.beta
            )));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidArgument("sweeps must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a reconstruction run.
#[derive(Debug, Clone)]
pub struct ReconResult {
    /// Reconstructed object field in the frequency domain.
    pub field: Field,
    /// Rms error after each sweep (linear scale).
    pub rms_trace: Vec<f64>,
    pub final_log10_rms: f64,
    pub success: bool,
    pub sweeps_run: usize,
}

#[inline]
fn weight_at(o: Complex64, inv_max: f64, alpha: f64) -> Complex64 {
    let norm = o.norm();
    (norm * inv_max) * o.conj() / (norm * norm + alpha)
}

/// Pointwise ptychographic update weight
/// `U = (|o| / max|o|) * conj(o) / (|o|^2 + alpha)` of a time-domain field.
pub fn update_weight(o_time: &Field, alpha: f64) -> Result<Vec<Complex64>> {
    if o_time.domain() != Domain::Time {
        return Err(Error::DomainMismatch {
            expected: "time",
            got: "frequency",
        });
    }
    let max = o_time
        .samples()
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateInput(
            "update weight of an all-zero field".into(),
        ));
    }
    let inv_max = 1.0 / max;
    Ok(o_time
        .samples()
        .iter()
        .map(|&o| weight_at(o, inv_max, alpha))
        .collect())
}

/// Scratch buffers reused across member updates.
struct UpdateScratch {
    o_time: Vec<Complex64>,
    g_freq: Vec<Complex64>,
    gp_time: Vec<Complex64>,
}

impl UpdateScratch {
    fn new(n: usize) -> Self {
        Self {
            o_time: vec![Complex64::new(0.0, 0.0); n],
            g_freq: vec![Complex64::new(0.0, 0.0); n],
            gp_time: vec![Complex64::new(0.0, 0.0); n],
        }
    }
}

/// One member update operating in place on the frequency-domain estimate.
fn member_update_in_place(
    grid: &Grid,
    transfer: &[Complex64],
    sqrt_row: &[f64],
    alpha: f64,
    beta: f64,
    estimate: &mut [Complex64],
    scratch: &mut UpdateScratch,
) -> Result<()> {
    let n = grid.n_samples();
    // o(t)
    for j in 0..n {
        scratch.o_time[j] = estimate[j] * transfer[j];
    }
    grid.freq_to_time_in_place(&mut scratch.o_time);
    // g(w) = F{o^2}
    for j in 0..n {
        let o = scratch.o_time[j];
        scratch.g_freq[j] = o * o;
    }
    grid.time_to_freq_in_place(&mut scratch.g_freq);
    // g'(t): measured amplitude, current phase; unit phase at exact zeros
    for j in 0..n {
        let g = scratch.g_freq[j];
        let norm = g.norm();
        scratch.gp_time[j] = if norm == 0.0 {
            Complex64::new(sqrt_row[j], 0.0)
        } else {
            g * (sqrt_row[j] / norm)
        };
    }
    grid.freq_to_time_in_place(&mut scratch.gp_time);
    // o'(t) = o + beta U (g' - g) with g(t) = o(t)^2
    let max = scratch
        .o_time
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::DegenerateInput(
            "estimate collapsed to zero during update".into(),
        ));
    }
    let inv_max = 1.0 / max;
    for j in 0..n {
        let o = scratch.o_time[j];
        let u = weight_at(o, inv_max, alpha);
        scratch.o_time[j] = o + beta * u * (scratch.gp_time[j] - o * o);
    }
    // E' = o'(w) conj(H)
    grid.time_to_freq_in_place(&mut scratch.o_time);
    for j in 0..n {
        estimate[j] = scratch.o_time[j] * transfer[j].conj();
    }
    Ok(())
}

/// Applies a single i2PIE member update to a frequency-domain estimate and
/// returns the new estimate.
pub fn i2pie_member_update(
    estimate: &Field,
    member: &PhaseSpec,
    measured_row: &[f64],
    cfg: &ReconConfig,
) -> Result<Field> {
    cfg.validate()?;
    if estimate.domain() != Domain::Freq {
        return Err(Error::DomainMismatch {
            expected: "frequency",
            got: "time",
        });
    }
    let grid = estimate.grid().clone();
    if measured_row.len() != grid.n_samples() {
        return Err(Error::ShapeMismatch(format!(
            "measured row of {} samples on a {}-point grid",
            measured_row.len(),
            grid.n_samples()
        )));
    }
    let transfer = member.eval_transfer(&grid);
    let sqrt_row: Vec<f64> = measured_row.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut samples = estimate.samples().to_vec();
    let mut scratch = UpdateScratch::new(grid.n_samples());
    member_update_in_place(
        &grid,
        &transfer,
        &sqrt_row,
        cfg.alpha,
        cfg.beta,
        &mut samples,
        &mut scratch,
    )?;
    Field::from_freq_samples(grid, samples)
}

fn unit_peak_rows(rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, f64)> {
    let peak = rows
        .iter()
        .flat_map(|r| r.iter())
        .cloned()
        .fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize an all-zero spectrogram".into(),
        ));
    }
    let normed = rows
        .iter()
        .map(|r| r.iter().map(|v| v / peak).collect())
        .collect();
    Ok((normed, peak))
}

fn rms_between_unit_rows(model: &[Vec<f64>], measured: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for (m_row, d_row) in model.iter().zip(measured) {
        for (m, d) in m_row.iter().zip(d_row) {
            let diff = m - d;
            acc += diff * diff;
            count += 1;
        }
    }
    (acc / count as f64).sqrt()
}

/// Rms difference between two spectrograms after normalizing each to unit
/// peak: `sqrt( mean over all pixels of (model - measured)^2 )`.
pub fn rms_error(model: &Spectrogram, measured: &Spectrogram) -> Result<f64> {
    if model.grid() != measured.grid() {
        return Err(Error::GridMismatch(
            "spectrograms live on different grids".into(),
        ));
    }
    if model.n_rows() != measured.n_rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} model rows vs {} measured rows",
            model.n_rows(),
            measured.n_rows()
        )));
    }
    let (m, _) = unit_peak_rows(model.rows())?;
    let (d, _) = unit_peak_rows(measured.rows())?;
    Ok(rms_between_unit_rows(&m, &d))
}

fn build_initial_field(guess: &InitialGuess, grid: &Grid) -> Result<Field> {
    match guess {
        InitialGuess::Gaussian { intensity_fwhm } => Field::gaussian_pulse(grid, *intensity_fwhm),
        InitialGuess::Provided(field) => {
            if field.grid() != grid {
                return Err(Error::GridMismatch(
                    "provided initial guess lives on a different grid".into(),
                ));
            }
            Ok(field.clone().into_domain(Domain::Freq))
        }
        InitialGuess::SpectrumWithFlatPhase(intensity) => {
            if intensity.len() != grid.n_samples() {
                return Err(Error::ShapeMismatch(format!(
                    "{} spectrum bins on a {}-point grid",
                    intensity.len(),
                    grid.n_samples()
                )));
            }
            let samples = intensity
                .iter()
                .map(|v| Complex64::new(v.max(0.0).sqrt(), 0.0))
                .collect();
            let mut f = Field::from_freq_samples(grid.clone(), samples)?;
            f.normalize_energy()?;
            Ok(f)
        }
    }
}

/// Runs the full reconstruction loop on a measured spectrogram.
///
/// The spectrogram's family metadata supplies the transfer functions; the
/// measured rows are consumed at whatever scale they carry. The rms trace
/// holds one entry per completed sweep.
pub fn reconstruct(measured: &Spectrogram, cfg: &ReconConfig) -> Result<ReconResult> {
    cfg.validate()?;
    let grid = measured.grid().clone();
    let family = measured.family().clone();
    if family.scan() == &crate::phase::ScanDescriptor::Explicit && family.is_empty() {
        return Err(Error::InvalidArgument("spectrogram carries no family".into()));
    }

    let transfers: Vec<Vec<Complex64>> = family
        .members()
        .iter()
        .map(|m| m.eval_transfer(&grid))
        .collect();
    let sqrt_rows: Vec<Vec<f64>> = measured
        .rows()
        .iter()
        .map(|row| row.iter().map(|v| v.max(0.0).sqrt()).collect())
        .collect();
    let (measured_unit, _) = unit_peak_rows(measured.rows())?;

    let guess = build_initial_field(&cfg.initial_guess, &grid)?;
    let mut estimate = guess.into_samples();
    let mut scratch = UpdateScratch::new(grid.n_samples());

    let mut order: Vec<usize> = (0..family.len()).collect();
    let mut shuffle_rng = match cfg.member_order {
        MemberOrder::Sequential => None,
        MemberOrder::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };

    let mut rms_trace = Vec::with_capacity(cfg.sweeps);
    let mut best_rms = f64::INFINITY;
    let mut stagnant = 0usize;

    for _sweep in 0..cfg.sweeps {
        if let Some(rng) = shuffle_rng.as_mut() {
            order.shuffle(rng);
        }
        for &i in &order {
            member_update_in_place(
                &grid,
                &transfers[i],
                &sqrt_rows[i],
                cfg.alpha,
                cfg.beta,
                &mut estimate,
                &mut scratch,
            )?;
        }
        let field = Field::from_freq_samples(grid.clone(), estimate.clone())?;
        let model_rows = synthesize_rows_unchecked(&field, &family)?;
        let (model_unit, _) = unit_peak_rows(&model_rows)?;
        let rms = rms_between_unit_rows(&model_unit, &measured_unit);
        rms_trace.push(rms);

        if let Some(stop) = cfg.early_stop {
            if rms < best_rms * (1.0 - stop.min_improvement) {
                best_rms = rms;
                stagnant = 0;
            } else {
                best_rms = best_rms.min(rms);
                stagnant += 1;
                if stagnant >= stop.window {
                    break;
                }
            }
        }
    }

    let sweeps_run = rms_trace.len();
    let final_rms = *rms_trace.last().expect("at least one sweep");
    let final_log10_rms = final_rms.max(f64::MIN_POSITIVE).log10();
    Ok(ReconResult {
        field: Field::from_freq_samples(grid, estimate)?,
        rms_trace,
        final_log10_rms,
        success: final_log10_rms < cfg.success_log_rms,
        sweeps_run,
    })
}

/// Removes the trivial ambiguities (absolute time shift and global phase)
/// of `field` relative to `reference` by maximizing the complex overlap
/// over grid-aligned shifts. Returns the aligned field together with the
/// applied delay and phase.
pub fn align_to_reference(field: &Field, reference: &Field) -> Result<(Field, f64, f64)> {
    if field.grid() != reference.grid() {
        return Err(Error::GridMismatch(
            "fields live on different grids".into(),
        ));
    }
    let grid = field.grid().clone();
    let f = field.clone().into_domain(Domain::Freq);
    let r = reference.clone().into_domain(Domain::Freq);
    // c(t) = 1/(2 pi) sum ref conj(field) e^{+i w t} dW peaks at the delay
    // that best overlaps the two fields.
    let mut cross: Vec<Complex64> = r
        .samples()
        .iter()
        .zip(f.samples())
        .map(|(a, b)| a * b.conj())
        .collect();
    grid.freq_to_time_in_place(&mut cross);
    let (j_best, c_best) = cross
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .expect("non-empty grid");
    let delay = grid.time_at(j_best);
    let phase = c_best.arg();
    let aligned_samples = f
        .samples()
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, -grid.omega_at(j) * delay + phase))
        .collect();
    let aligned = Field::from_freq_samples(grid, aligned_samples)?;
    Ok((aligned, delay, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{synthesize_spectrogram, Normalization};
    use crate::phase::{PhaseFamily, ScanDescriptor};

    fn grid() -> Grid {
        Grid::new(256, 8e-12).unwrap()
    }

    fn quadratic_family(qs: &[f64]) -> PhaseFamily {
        PhaseFamily::from_members(
            qs.iter()
                .map(|&q| PhaseSpec::Polynomial { order: 2, coeff: q })
                .collect(),
            ScanDescriptor::Explicit,
        )
        .unwrap()
    }

    #[test]
    fn weight_examples() {
        let g = grid();
        let alpha = 1e-4;
        let mut samples = vec![Complex64::new(0.0, 0.0); 256];
        samples[100] = Complex64::new(0.6, -0.8); // |.| = 1 (the peak)
        samples[130] = Complex64::new(0.3, 0.0);
        let f = Field::from_time_samples(g, samples.clone()).unwrap();
        let u = update_weight(&f, alpha).unwrap();
        // at the peak the first factor is one
        let expected_peak = samples[100].conj() / (1.0 + alpha);
        assert!((u[100] - expected_peak).norm() < 1e-15);
        // zero samples stay exactly zero
        assert_eq!(u[0], Complex64::new(0.0, 0.0));
        // huge alpha kills the update
        let u_inf = update_weight(&f, 0.999).unwrap();
        assert!(u_inf.iter().all(|v| v.norm() < samples[100].norm()));
        let ratio = u_inf[130].norm() / u[130].norm();
        assert!(ratio < 1.0);
    }

    #[test]
    fn weight_of_zero_field_errors() {
        let g = grid();
        let f = Field::from_time_samples(g, vec![Complex64::new(0.0, 0.0); 256]).unwrap();
        assert!(matches!(
            update_weight(&f, 1e-4),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn consistent_guess_is_a_fixed_point_of_one_update() {
        let g = grid();
        let object = Field::gaussian_pulse(&g, 250e-15).unwrap();
        let member = PhaseSpec::Polynomial {
            order: 2,
            coeff: 1.5e-26,
        };
        let fam = quadratic_family(&[1.5e-26, 0.0]);
        let sg = synthesize_spectrogram(&object, &fam, Normalization::Raw).unwrap();
        let cfg = ReconConfig::default();
        let updated = i2pie_member_update(&object, &member, &sg.rows()[0], &cfg).unwrap();
        let norm: f64 = object.samples().iter().map(|v| v.norm_sqr()).sum();
        let diff: f64 = updated
            .samples()
            .iter()
            .zip(object.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!((diff / norm).sqrt() < 1e-12);
    }

    #[test]
    fn beta_zero_update_is_identity() {
        let g = grid();
        let object = Field::gaussian_pulse(&g, 250e-15).unwrap();
        let member = PhaseSpec::Polynomial {
            order: 2,
            coeff: 1.5e-26,
        };
        let row = vec![0.5; 256]; // inconsistent data on purpose
        let cfg = ReconConfig {
            beta: 0.0,
            ..ReconConfig::default()
        };
        let updated = i2pie_member_update(&object, &member, &row, &cfg).unwrap();
        for (a, b) in updated.samples().iter().zip(object.samples()) {
            assert!((a - b).norm() < 1e-15 * b.norm().max(1e-30));
        }
    }

    #[test]
    fn rms_error_basics() {
        let g = grid();
        let fam = quadratic_family(&[0.0, 1e-26]);
        let object = Field::gaussian_pulse(&g, 250e-15).unwrap();
        let sg = synthesize_spectrogram(&object, &fam, Normalization::UnitPeak).unwrap();
        assert_eq!(rms_error(&sg, &sg).unwrap(), 0.0);
    }

    #[test]
    fn rms_error_of_constant_offset() {
        let g = grid();
        let fam = quadratic_family(&[0.0, 1e-26]);
        let n = 256usize;
        // Unit-peak pair differing by 0.001 away from the shared peak pixel.
        let mut base = vec![vec![0.3; n], vec![0.3; n]];
        base[0][7] = 1.0;
        let mut shifted = vec![vec![0.301; n], vec![0.301; n]];
        shifted[0][7] = 1.0;
        // Feed them un-normalized with a common factor to exercise the
        // normalization step.
        let scale = |rows: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| r.iter().map(|v| v * c).collect())
                .collect()
        };
        let measured =
            Spectrogram::from_rows(g.clone(), fam.clone(), scale(&base, 3.0), Normalization::Raw)
                .unwrap();
        let model =
            Spectrogram::from_rows(g, fam, scale(&shifted, 0.5), Normalization::Raw).unwrap();
        let total = (2 * n) as f64;
        let expected = 0.001 * ((total - 1.0) / total).sqrt();
        let got = rms_error(&model, &measured).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.001).abs() < 1e-5);
    }

    #[test]
    fn rms_error_rejects_zero_spectrogram() {
        let g = grid();
        let fam = quadratic_family(&[0.0, 1e-26]);
        let zero =
            Spectrogram::from_rows(g, fam, vec![vec![0.0; 256]; 2], Normalization::Raw).unwrap();
        assert!(matches!(
            rms_error(&zero, &zero),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn beta_zero_reconstruction_has_constant_trace() {
        let g = grid();
        let fam = quadratic_family(&[-1e-26, 0.0, 1e-26]);
        let object = Field::gaussian_pulse(&g, 300e-15).unwrap();
        let sg = synthesize_spectrogram(&object, &fam, Normalization::UnitPeak).unwrap();
        let cfg = ReconConfig {
            beta: 0.0,
            sweeps: 5,
            ..ReconConfig::default()
        };
        let result = reconstruct(&sg, &cfg).unwrap();
        assert_eq!(result.sweeps_run, 5);
        for w in result.rms_trace.windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad_alpha = ReconConfig {
            alpha: 0.0,
            ..ReconConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
        let bad_beta = ReconConfig {
            beta: 1.5,
            ..ReconConfig::default()
        };
        assert!(bad_beta.validate().is_err());
        let big_alpha = ReconConfig {
            alpha: 1.0,
            ..ReconConfig::default()
        };
        assert!(big_alpha.validate().is_err());
    }

    #[test]
    fn alignment_recovers_shift_and_phase() {
        let g = grid();
        let object = Field::gaussian_pulse(&g, 300e-15).unwrap();
        let tau = 9.0 * g.dt();
        let phase = 0.77;
        let shifted_samples: Vec<Complex64> = object
            .samples()
            .iter()
            .enumerate()
            .map(|(j, v)| v * Complex64::from_polar(1.0, -g.omega_at(j) * tau + phase))
            .collect();
        let shifted = Field::from_freq_samples(g.clone(), shifted_samples).unwrap();
        let (aligned, delay, _) = align_to_reference(&shifted, &object).unwrap();
        assert!((delay - tau).abs() <= g.dt() / 2.0 + 1e-18);
        let num: f64 = aligned
            .samples()
            .iter()
            .zip(object.samples())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den: f64 = object.samples().iter().map(|v| v.norm_sqr()).sum();
        assert!((num / den).sqrt() < 1e-10);
    }
}
