//! Complex envelope of a pulse on a [`Grid`], in either representation.
//!
//! The transform convention is fixed here once and used by every other
//! module through [`Field::to_freq`] / [`Field::to_time`]:
//!
//! ```text
//! E(omega) = dt        * sum_j E(t_j)     exp(-i omega t_j)      (to_freq)
//! E(t)     = dW/(2 pi) * sum_k E(omega_k) exp(+i omega_k t)      (to_time)
//! ```
//!
//! so a spectral phase `exp(-i omega tau)` delays the pulse by `+tau`, and
//! Parseval holds as `sum |E(t)|^2 dt = sum |E(omega)|^2 dW / (2 pi)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Which representation the samples of a [`Field`] are in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Time,
    Freq,
}

impl Domain {
    fn name(self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Freq => "frequency",
        }
    }
}

/// Complex envelope samples on a grid, tagged with their domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    samples: Vec<Complex64>,
    domain: Domain,
}

impl Field {
    /// Wraps time-domain samples. The sample count must match the grid.
    pub fn from_time_samples(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, samples, Domain::Time)
    }

    /// Wraps frequency-domain samples. The sample count must match the grid.
    pub fn from_freq_samples(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        Self::new(grid, samples, Domain::Freq)
    }

    fn new(grid: Grid, samples: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples on a {}-point grid",
                samples.len(),
                grid.n_samples()
            )));
        }
        Ok(Self {
            grid,
            samples,
            domain,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    fn expect_domain(&self, want: Domain) -> Result<()> {
        if self.domain != want {
            return Err(Error::DomainMismatch {
                expected: want.name(),
                got: self.domain.name(),
            });
        }
        Ok(())
    }

    /// Unitary transform to the frequency representation.
    pub fn to_freq(&self) -> Result<Field> {
        self.expect_domain(Domain::Time)?;
        let mut samples = self.samples.clone();
        self.grid.time_to_freq_in_place(&mut samples);
        Ok(Field {
            grid: self.grid.clone(),
            samples,
            domain: Domain::Freq,
        })
    }

    /// Unitary transform to the time representation.
    pub fn to_time(&self) -> Result<Field> {
        self.expect_domain(Domain::Freq)?;
        let mut samples = self.samples.clone();
        self.grid.freq_to_time_in_place(&mut samples);
        Ok(Field {
            grid: self.grid.clone(),
            samples,
            domain: Domain::Time,
        })
    }

    /// Returns the field in the requested domain, transforming if needed.
    pub fn into_domain(self, want: Domain) -> Field {
        if self.domain == want {
            return self;
        }
        let mut samples = self.samples;
        match want {
            Domain::Freq => self.grid.time_to_freq_in_place(&mut samples),
            Domain::Time => self.grid.freq_to_time_in_place(&mut samples),
        }
        Field {
            grid: self.grid,
            samples,
            domain: want,
        }
    }

    /// Quadrature weight of one sample in this domain: `dt` in time,
    /// `dW / (2 pi)` in frequency.
    pub fn quadrature_weight(&self) -> f64 {
        match self.domain {
            Domain::Time => self.grid.dt(),
            Domain::Freq => self.grid.d_omega() / std::f64::consts::TAU,
        }
    }

    /// Energy under the discrete quadrature of this domain.
    pub fn energy(&self) -> f64 {
        let w = self.quadrature_weight();
        self.samples.iter().map(|v| v.norm_sqr()).sum::<f64>() * w
    }

    /// Multiplies every sample by a real factor.
    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.samples {
            *v *= factor;
        }
    }

    /// Rescales to unit energy. Errors on a zero field.
    pub fn normalize_energy(&mut self) -> Result<()> {
        let e = self.energy();
        if e <= 0.0 || !e.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "cannot normalize field with energy {e}"
            )));
        }
        self.scale(1.0 / e.sqrt());
        Ok(())
    }

    /// First moment of the temporal intensity,
    /// `sum t_j |E(t_j)|^2 / sum |E(t_j)|^2`.
    ///
    /// Accepts either representation; a frequency-domain field is
    /// transformed internally.
    pub fn first_moment_time(&self) -> Result<f64> {
        let time_field;
        let f = match self.domain {
            Domain::Time => self,
            Domain::Freq => {
                time_field = self.to_time()?;
                &time_field
            }
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, v) in f.samples.iter().enumerate() {
            let w = v.norm_sqr();
            num += f.grid.time_at(j) * w;
            den += w;
        }
        if den <= 0.0 {
            return Err(Error::DegenerateInput(
                "first moment of a zero-energy field".into(),
            ));
        }
        Ok(num / den)
    }

    /// Fourier-limited Gaussian pulse with the given intensity FWHM,
    /// centered at t = 0, unit energy, returned in the frequency domain.
    pub fn gaussian_pulse(grid: &Grid, intensity_fwhm: f64) -> Result<Field> {
        if !(intensity_fwhm.is_finite() && intensity_fwhm > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "intensity FWHM must be positive, got {intensity_fwhm}"
            )));
        }
        // |E(t)|^2 = exp(-4 ln2 t^2 / fwhm^2)  =>  E(t) = exp(-2 ln2 t^2 / fwhm^2)
        let c = 2.0 * std::f64::consts::LN_2 / (intensity_fwhm * intensity_fwhm);
        let samples = (0..grid.n_samples())
            .map(|j| {
                let t = grid.time_at(j);
                Complex64::new((-c * t * t).exp(), 0.0)
            })
            .collect();
        let mut f = Field::from_time_samples(grid.clone(), samples)?;
        f.normalize_energy()?;
        Ok(f.into_domain(Domain::Freq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(64, 8.0).unwrap()
    }

    #[test]
    fn impulse_has_flat_magnitude_spectrum() {
        let g = grid();
        let mut samples = vec![Complex64::ZERO; 64];
        samples[20] = Complex64::new(2.0, 0.0);
        let f = Field::from_time_samples(g.clone(), samples).unwrap();
        let spec = f.to_freq().unwrap();
        let expect = 2.0 * g.dt();
        for v in spec.samples() {
            assert!((v.norm() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_reproduces_samples() {
        let g = grid();
        let samples: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.21).sin(), (j as f64 * 0.13).cos()))
            .collect();
        let f = Field::from_time_samples(g, samples.clone()).unwrap();
        let back = f.to_freq().unwrap().to_time().unwrap();
        for (a, b) in back.samples().iter().zip(&samples) {
            assert!((a - b).norm() < 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn parseval_holds_under_domain_weights() {
        let g = grid();
        let samples: Vec<Complex64> = (0..64)
            .map(|j| Complex64::new((j as f64 * 0.37).cos(), (j as f64 * 0.11).sin()))
            .collect();
        let f = Field::from_time_samples(g, samples).unwrap();
        let e_t = f.energy();
        let e_w = f.to_freq().unwrap().energy();
        assert!((e_t - e_w).abs() / e_t < 1e-10);
    }

    #[test]
    fn wrong_domain_is_an_error() {
        let g = grid();
        let f = Field::from_time_samples(g, vec![Complex64::ZERO; 64]).unwrap();
        assert!(f.to_time().is_err());
        assert!(f.to_freq().unwrap().to_freq().is_err());
    }

    #[test]
    fn first_moment_symmetric_field_is_zero() {
        let g = grid();
        let samples: Vec<Complex64> = (0..64)
            .map(|j| {
                let t = g.time_at(j);
                Complex64::new((-t * t).exp(), 0.0)
            })
            .collect();
        let f = Field::from_time_samples(g, samples).unwrap();
        assert!(f.first_moment_time().unwrap().abs() < 1e-12);
    }

    #[test]
    fn first_moment_of_impulse_is_its_time() {
        let g = grid();
        let mut samples = vec![Complex64::ZERO; 64];
        samples[37] = Complex64::new(0.3, -0.4);
        let f = Field::from_time_samples(g.clone(), samples).unwrap();
        let m = f.first_moment_time().unwrap();
        assert!((m - g.time_at(37)).abs() < 1e-12);
    }

    #[test]
    fn first_moment_zero_field_errors() {
        let g = grid();
        let f = Field::from_time_samples(g, vec![Complex64::ZERO; 64]).unwrap();
        assert!(matches!(
            f.first_moment_time(),
            Err(crate::error::Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn gaussian_pulse_is_unit_energy_and_centered() {
        let g = Grid::new(1024, 8e-12).unwrap();
        let f = Field::gaussian_pulse(&g, 200e-15).unwrap();
        assert!((f.energy() - 1.0).abs() < 1e-12);
        assert!(f.first_moment_time().unwrap().abs() < 1e-18);
    }
}
