//! SHG spectrogram synthesis: the physics the reconstruction inverts.
//!
//! Each spectrogram row is the second-harmonic spectrum of the object
//! after one phase-only transfer function,
//! `S_n(omega) = | F{ (E H_n)^2(t) } |^2`, sampled on the shared grid with
//! the frequency axis read relative to twice the carrier.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Domain, Field};
use crate::grid::Grid;
use crate::phase::{PhaseFamily, PhaseSpec};

/// Amplitude fraction of the spectral peak above which a bin counts as
/// occupied when checking for aliasing headroom.
const SUPPORT_THRESHOLD: f64 = 1e-6;

/// How a spectrogram's absolute scale is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Rows carry whatever scale the forward model produced.
    Raw,
    /// One global factor scales the maximum over all rows to exactly 1.
    UnitPeak,
}

/// A stack of SHG spectra, one per family member, plus the family that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    grid: Grid,
    family: PhaseFamily,
    rows: Vec<Vec<f64>>,
    normalization: Normalization,
}

impl Spectrogram {
    /// Assembles a spectrogram from row data. Row count must match the
    /// family, row length the grid; entries must be finite and >= 0.
    pub fn from_rows(
        grid: Grid,
        family: PhaseFamily,
        rows: Vec<Vec<f64>>,
        normalization: Normalization,
    ) -> Result<Self> {
        if rows.len() != family.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for a family of {} members",
                rows.len(),
                family.len()
            )));
        }
        for row in &rows {
            if row.len() != grid.n_samples() {
                return Err(Error::ShapeMismatch(format!(
                    "row of {} samples on a {}-point grid",
                    row.len(),
                    grid.n_samples()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(
                    "spectrogram entries must be finite and nonnegative".into(),
                ));
            }
        }
        let mut s = Self {
            grid,
            family,
            rows,
            normalization: Normalization::Raw,
        };
        if normalization == Normalization::UnitPeak {
            s.normalize_unit_peak()?;
        }
        Ok(s)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn family(&self) -> &PhaseFamily {
        &self.family
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Largest entry over all rows.
    pub fn peak(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .cloned()
            .fold(0.0, f64::max)
    }

    /// Applies one global scale factor so the peak becomes exactly 1.
    pub fn normalize_unit_peak(&mut self) -> Result<()> {
        let peak = self.peak();
        if peak <= 0.0 {
            return Err(Error::DegenerateInput(
                "cannot normalize an all-zero spectrogram".into(),
            ));
        }
        for row in &mut self.rows {
            for v in row.iter_mut() {
                *v /= peak;
            }
        }
        self.normalization = Normalization::UnitPeak;
        Ok(())
    }

    /// Same data rescaled to unit peak, leaving `self` untouched.
    pub fn to_unit_peak(&self) -> Result<Spectrogram> {
        let mut s = self.clone();
        if s.normalization != Normalization::UnitPeak {
            s.normalize_unit_peak()?;
        }
        Ok(s)
    }
}

/// Multiplies a frequency-domain field by the unit-modulus transfer
/// function of `spec`. The modulus of every sample is preserved.
pub fn apply_transfer(object: &Field, spec: &PhaseSpec) -> Result<Field> {
    if object.domain() != Domain::Freq {
        return Err(Error::DomainMismatch {
            expected: "frequency",
            got: "time",
        });
    }
    let grid = object.grid().clone();
    let samples = object
        .samples()
        .iter()
        .enumerate()
        .map(|(j, v)| v * Complex64::from_polar(1.0, spec.phase_at(grid.omega_at(j))))
        .collect();
    Field::from_freq_samples(grid, samples)
}

fn spectral_support_within_half_band(field: &Field) -> bool {
    let peak = field.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak <= 0.0 {
        return true;
    }
    let threshold = SUPPORT_THRESHOLD * peak;
    let grid = field.grid();
    let quarter_band = 0.25 * grid.n_samples() as f64 * grid.d_omega();
    field
        .samples()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > threshold)
        .all(|(j, _)| grid.omega_at(j).abs() <= quarter_band)
}

/// `|F{ o^2(t) }|^2` without the aliasing guard; callers must know the
/// spectral support is safe.
pub(crate) fn shg_spectrum_unchecked(modulated: &Field) -> Result<Vec<f64>> {
    debug_assert_eq!(modulated.domain(), Domain::Freq);
    let grid = modulated.grid().clone();
    let mut buf = modulated.samples().to_vec();
    grid.freq_to_time_in_place(&mut buf);
    for v in &mut buf {
        *v = *v * *v; // complex square, not |.|^2
    }
    grid.time_to_freq_in_place(&mut buf);
    Ok(buf.iter().map(|v| v.norm_sqr()).collect())
}

/// Second-harmonic spectrum of a modulated field: transform to time,
/// square the complex envelope pointwise, transform back, take `|.|^2`.
///
/// Squaring doubles the spectral width, so the field's support (bins above
/// `1e-6` of the spectral peak) must sit inside the central half of the
/// grid band; otherwise an aliasing-risk error is raised.
pub fn shg_spectrum(modulated: &Field) -> Result<Vec<f64>> {
    if modulated.domain() != Domain::Freq {
        return Err(Error::DomainMismatch {
            expected: "frequency",
            got: "time",
        });
    }
    if !spectral_support_within_half_band(modulated) {
        return Err(Error::AliasingRisk(
            "spectral support exceeds half the grid bandwidth; the squared \
             envelope would wrap"
                .into(),
        ));
    }
    shg_spectrum_unchecked(modulated)
}

/// Synthesizes the SHG spectrogram of `object` under every member of
/// `family`.
pub fn synthesize_spectrogram(
    object: &Field,
    family: &PhaseFamily,
    normalization: Normalization,
) -> Result<Spectrogram> {
    let object = object.clone().into_domain(Domain::Freq);
    if object.samples().iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::DegenerateInput("object field is zero".into()));
    }
    if !spectral_support_within_half_band(&object) {
        return Err(Error::AliasingRisk(
            "object spectral support exceeds half the grid bandwidth".into(),
        ));
    }
    let rows = family
        .members()
        .iter()
        .map(|spec| {
            let modulated = apply_transfer(&object, spec)?;
            shg_spectrum_unchecked(&modulated)
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrogram::from_rows(object.grid().clone(), family.clone(), rows, normalization)
}

/// Synthesizes rows for the current engine estimate without the support
/// guard; used for the per-sweep residual where a transient wide guess
/// must not abort the run.
pub(crate) fn synthesize_rows_unchecked(
    object: &Field,
    family: &PhaseFamily,
) -> Result<Vec<Vec<f64>>> {
    family
        .members()
        .iter()
        .map(|spec| {
            let modulated = apply_transfer(object, spec)?;
            shg_spectrum_unchecked(&modulated)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::ScanDescriptor;

    fn grid() -> Grid {
        Grid::new(256, 8e-12).unwrap()
    }

    fn gaussian_object(grid: &Grid) -> Field {
        Field::gaussian_pulse(grid, 300e-15).unwrap()
    }

    fn two_member_family(coeffs: [f64; 2]) -> PhaseFamily {
        PhaseFamily::from_members(
            coeffs
                .iter()
                .map(|&c| PhaseSpec::Polynomial { order: 2, coeff: c })
                .collect(),
            ScanDescriptor::Explicit,
        )
        .unwrap()
    }

    #[test]
    fn zero_phase_transfer_is_identity() {
        let g = grid();
        let obj = gaussian_object(&g);
        let out = apply_transfer(
            &obj,
            &PhaseSpec::Polynomial {
                order: 2,
                coeff: 0.0,
            },
        )
        .unwrap();
        assert_eq!(out.samples(), obj.samples());
    }

    #[test]
    fn transfer_preserves_modulus_pointwise() {
        let g = grid();
        let obj = gaussian_object(&g);
        let out = apply_transfer(
            &obj,
            &PhaseSpec::Sinusoidal {
                amplitude: 2.7,
                tau: 3e-13,
                phi: 0.4,
            },
        )
        .unwrap();
        for (a, b) in out.samples().iter().zip(obj.samples()) {
            assert!((a.norm() - b.norm()).abs() <= 1e-15 * b.norm().max(1.0));
        }
    }

    #[test]
    fn shg_of_zero_field_is_zero() {
        let g = grid();
        let f = Field::from_freq_samples(g, vec![Complex64::new(0.0, 0.0); 256]).unwrap();
        let s = shg_spectrum(&f).unwrap();
        assert!(s.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shg_invariant_under_time_shift_and_global_phase() {
        let g = grid();
        let obj = gaussian_object(&g);
        let base = shg_spectrum(&obj).unwrap();

        // global phase
        let mut phased = obj.clone();
        for v in phased.samples_mut() {
            *v *= Complex64::from_polar(1.0, 1.234);
        }
        let s_phased = shg_spectrum(&phased).unwrap();

        // pure delay: linear spectral phase
        let mut delayed = obj.clone();
        let tau = 7.0 * g.dt();
        for (j, v) in delayed.samples_mut().iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -g.omega_at(j) * tau);
        }
        let s_delayed = shg_spectrum(&delayed).unwrap();

        let peak = base.iter().cloned().fold(0.0, f64::max);
        for j in 0..256 {
            assert!((s_phased[j] - base[j]).abs() <= 1e-10 * peak);
            assert!((s_delayed[j] - base[j]).abs() <= 1e-10 * peak);
        }
    }

    #[test]
    fn aliasing_guard_rejects_wide_support() {
        let g = grid();
        // occupy well past the central half band
        let samples: Vec<Complex64> = (0..256)
            .map(|j| {
                let w = g.omega_at(j) / (0.4 * 128.0 * g.d_omega());
                Complex64::new((-w * w).exp(), 0.0)
            })
            .collect();
        let f = Field::from_freq_samples(g, samples).unwrap();
        assert!(matches!(shg_spectrum(&f), Err(Error::AliasingRisk(_))));
    }

    #[test]
    fn zero_phase_member_row_is_plain_shg() {
        let g = grid();
        let obj = gaussian_object(&g);
        let fam = two_member_family([0.0, 1e-26]);
        let sg = synthesize_spectrogram(&obj, &fam, Normalization::Raw).unwrap();
        let plain = shg_spectrum(&obj).unwrap();
        assert_eq!(sg.rows()[0], plain);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let g = grid();
        let obj = gaussian_object(&g);
        let fam = two_member_family([-2e-26, 2e-26]);
        let a = synthesize_spectrogram(&obj, &fam, Normalization::UnitPeak).unwrap();
        let b = synthesize_spectrogram(&obj, &fam, Normalization::UnitPeak).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn unit_peak_is_one_global_factor() {
        let g = grid();
        let obj = gaussian_object(&g);
        let fam = two_member_family([0.0, 3e-26]);
        let raw = synthesize_spectrogram(&obj, &fam, Normalization::Raw).unwrap();
        let unit = synthesize_spectrogram(&obj, &fam, Normalization::UnitPeak).unwrap();
        assert!((unit.peak() - 1.0).abs() < 1e-12);
        let scale = raw.peak();
        for (ru, rr) in unit.rows().iter().zip(raw.rows()) {
            for (u, r) in ru.iter().zip(rr) {
                assert!((u * scale - r).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn delay_member_preserves_total_shg_energy() {
        // A pure delay does not reshape the envelope, so the SHG spectrum
        // integral is unchanged even though SHG is nonlinear.
        let g = grid();
        let obj = gaussian_object(&g);
        let plain = shg_spectrum(&obj).unwrap();
        let mut delayed = obj.clone();
        let tau = 12.0 * g.dt();
        for (j, v) in delayed.samples_mut().iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -g.omega_at(j) * tau);
        }
        let shifted = shg_spectrum(&delayed).unwrap();
        let e0: f64 = plain.iter().sum();
        let e1: f64 = shifted.iter().sum();
        assert!((e0 - e1).abs() / e0 < 1e-10);
    }

    #[test]
    fn quadratic_scan_is_symmetric_for_symmetric_objects() {
        let g = grid();
        let obj = gaussian_object(&g); // real symmetric spectrum
        let q = 2.5e-26;
        let fam = two_member_family([-q, q]);
        let sg = synthesize_spectrogram(&obj, &fam, Normalization::UnitPeak).unwrap();
        for j in 0..256 {
            assert!((sg.rows()[0][j] - sg.rows()[1][j]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_phase_row_has_strongest_peak_for_fourier_limited_object() {
        let g = grid();
        let obj = gaussian_object(&g);
        let q = 4e-26;
        let members: Vec<PhaseSpec> = [-q, -q / 2.0, 0.0, q / 2.0, q]
            .iter()
            .map(|&c| PhaseSpec::Polynomial { order: 2, coeff: c })
            .collect();
        let fam = PhaseFamily::from_members(members, ScanDescriptor::Explicit).unwrap();
        let sg = synthesize_spectrogram(&obj, &fam, Normalization::Raw).unwrap();
        let peaks: Vec<f64> = sg
            .rows()
            .iter()
            .map(|r| r.iter().cloned().fold(0.0, f64::max))
            .collect();
        let best = peaks
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best, 2);
        assert!(peaks[0] < peaks[1] && peaks[1] < peaks[2]);
        assert!(peaks[4] < peaks[3] && peaks[3] < peaks[2]);
    }
}
