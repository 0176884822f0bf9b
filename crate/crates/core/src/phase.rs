//! Phase-only spectral transfer functions and their parameter bounds.
//!
//! A transfer function is `H(omega) = exp(i psi(omega))` with `psi` drawn
//! from one of two parametric families: polynomial `psi = q omega^k` or
//! sinusoidal `psi = a cos(omega tau + phi)`. Scan limits for the free
//! parameter follow from the spectrum of the object signal alone: the
//! modulated pulse must stay within a fraction `gamma` of the time window,
//! which caps the phase-induced broadening at
//! `sigma_psi = sqrt(gamma^2 T^2 - sigma_0^2)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

const TAU: f64 = std::f64::consts::TAU;

/// Relative intensity below which a spectral bin is treated as empty when
/// differentiating `A = sqrt(I)` (the square root has a cusp at zero).
const GRADIENT_FLOOR: f64 = 1e-12;

/// One phase-only transfer function, `H(omega) = exp(i psi(omega))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseSpec {
    /// `psi(omega) = coeff * omega^order`, `order >= 2`, coeff in s^order.
    /// The sign of the phase is carried by `coeff`.
    Polynomial { order: u32, coeff: f64 },
    /// `psi(omega) = amplitude * cos(omega * tau + phi)` with amplitude in
    /// rad, `tau` in seconds and `phi` in rad.
    Sinusoidal { amplitude: f64, tau: f64, phi: f64 },
}

impl PhaseSpec {
    /// Validates the parameters of the spec.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PhaseSpec::Polynomial { order, coeff } => {
                if order < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "polynomial phase order must be >= 2, got {order}"
                    )));
                }
                if !coeff.is_finite() {
                    return Err(Error::InvalidArgument("non-finite coefficient".into()));
                }
            }
            PhaseSpec::Sinusoidal {
                amplitude,
                tau,
                phi,
            } => {
                if !(amplitude.is_finite() && tau.is_finite() && phi.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "non-finite sinusoidal phase parameter".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Phase value `psi(omega)` in rad.
    pub fn phase_at(&self, omega: f64) -> f64 {
        match *self {
            PhaseSpec::Polynomial { order, coeff } => coeff * omega.powi(order as i32),
            PhaseSpec::Sinusoidal {
                amplitude,
                tau,
                phi,
            } => amplitude * (omega * tau + phi).cos(),
        }
    }

    /// Analytic derivative `d psi / d omega` in seconds.
    pub fn phase_derivative_at(&self, omega: f64) -> f64 {
        match *self {
            PhaseSpec::Polynomial { order, coeff } => {
                order as f64 * coeff * omega.powi(order as i32 - 1)
            }
            PhaseSpec::Sinusoidal {
                amplitude,
                tau,
                phi,
            } => -amplitude * tau * (omega * tau + phi).sin(),
        }
    }

    /// `psi` sampled on the grid's frequency axis.
    pub fn eval_phase(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.n_samples())
            .map(|j| self.phase_at(grid.omega_at(j)))
            .collect()
    }

    /// The unit-modulus transfer function `exp(i psi)` on the grid.
    pub fn eval_transfer(&self, grid: &Grid) -> Vec<Complex64> {
        (0..grid.n_samples())
            .map(|j| Complex64::from_polar(1.0, self.phase_at(grid.omega_at(j))))
            .collect()
    }
}

/// Enumeration rule a family was built with, kept as metadata so a
/// spectrogram records how its members were generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum ScanDescriptor {
    /// Quadratic phase scanned over `[-q_max, q_max)` in equidistant steps.
    QuadraticQ { q_max: f64 },
    /// Sinusoidal phase offset scanned over `[0, 2 pi)`, amplitude fixed
    /// from the bound at the given modulation period.
    SinusPhi { amplitude: f64, tau: f64 },
    /// Sinusoidal amplitude scanned over `[-a_max, a_max)`.
    SinusA { phi: f64, tau: f64, a_max: f64 },
    /// Sinusoidal modulation period scanned over `(0, tau_max]`.
    SinusTau {
        phi: f64,
        amplitude: f64,
        tau_max: f64,
    },
    /// Members supplied verbatim (externally measured scans).
    Explicit,
}

/// An ordered set of phase-only transfer functions sharing one family kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFamily {
    members: Vec<PhaseSpec>,
    scan: ScanDescriptor,
}

impl PhaseFamily {
    /// Builds a family from explicit members. All members must share the
    /// same kind and there must be at least two of them.
    pub fn from_members(members: Vec<PhaseSpec>, scan: ScanDescriptor) -> Result<Self> {
        if members.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "a phase family needs at least 2 members, got {}",
                members.len()
            )));
        }
        for m in &members {
            m.validate()?;
        }
        let same_kind = members.windows(2).all(|w| {
            matches!(
                (&w[0], &w[1]),
                (PhaseSpec::Polynomial { .. }, PhaseSpec::Polynomial { .. })
                    | (PhaseSpec::Sinusoidal { .. }, PhaseSpec::Sinusoidal { .. })
            )
        });
        if !same_kind {
            return Err(Error::InvalidArgument(
                "family members must all share one kind".into(),
            ));
        }
        Ok(Self { members, scan })
    }

    pub fn members(&self) -> &[PhaseSpec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn scan(&self) -> &ScanDescriptor {
        &self.scan
    }
}

/// How to enumerate a family from bound inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scan", rename_all = "kebab-case")]
pub enum FamilyScan {
    /// `N` quadratic phases, `q_n = (n - N/2 - 1) * 2 q_max / N`.
    QuadraticQ { members: usize },
    /// `N` sinusoidal phases `phi_n = 2 pi (n-1) / N` at fixed `tau`;
    /// the shared amplitude is the bound value for that `tau`.
    SinusPhi { members: usize, tau: f64 },
    /// `N` sinusoidal amplitudes `a_n = (n - N/2 - 1) * 2 a_max / N` at
    /// fixed `phi` and `tau`.
    SinusA { members: usize, phi: f64, tau: f64 },
    /// `N` sinusoidal periods `tau_n = tau_max * n / N` at fixed `phi`
    /// and `a`.
    SinusTau {
        members: usize,
        phi: f64,
        amplitude: f64,
    },
}

impl FamilyScan {
    pub fn members(&self) -> usize {
        match *self {
            FamilyScan::QuadraticQ { members }
            | FamilyScan::SinusPhi { members, .. }
            | FamilyScan::SinusA { members, .. }
            | FamilyScan::SinusTau { members, .. } => members,
        }
    }
}

/// Spectrum, duration budget and grid from which scan bounds are derived.
///
/// The stored spectrum is rescaled to unit energy,
/// `sum I d_omega / (2 pi) = 1`, so that `sigma_0` and the modulated
/// durations are genuine second moments and every bound is independent of
/// the pulse energy.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    grid: Grid,
    spectrum: Vec<f64>,
    gamma: f64,
}

impl BoundInputs {
    pub fn new(grid: Grid, spectrum: Vec<f64>, gamma: f64) -> Result<Self> {
        if spectrum.len() != grid.n_samples() {
            return Err(Error::ShapeMismatch(format!(
                "{} spectrum bins on a {}-point grid",
                spectrum.len(),
                grid.n_samples()
            )));
        }
        if spectrum.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "spectrum must be finite and nonnegative".into(),
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        let total: f64 = spectrum.iter().sum::<f64>() * grid.d_omega() / TAU;
        if total <= 0.0 {
            return Err(Error::DegenerateInput("spectrum has zero total".into()));
        }
        let spectrum = spectrum.iter().map(|v| v / total).collect();
        Ok(Self {
            grid,
            spectrum,
            gamma,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// The unit-energy spectrum used for every bound evaluation.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn time_window(&self) -> f64 {
        self.grid.time_window()
    }

    /// Bandwidth-limited duration of the unit-energy spectrum.
    pub fn sigma0(&self) -> Result<f64> {
        sigma0(&self.spectrum, &self.grid)
    }

    /// Admissible phase-induced broadening,
    /// `sigma_psi = sqrt(gamma^2 T^2 - sigma_0^2)`.
    pub fn sigma_psi(&self) -> Result<f64> {
        sigma_psi_value(self.sigma0()?, self.gamma, self.grid.time_window())
    }
}

/// Bandwidth-limited rms duration from the spectral amplitude gradient:
/// `sigma_0 = sqrt( 1/(2 pi) * sum (dA/d_omega)^2 d_omega )` with
/// `A = sqrt(I)`.
///
/// Central differences inside, one-sided at the edges; bins below the
/// relative floor contribute nothing to the gradient sum.
pub fn sigma0(spectrum: &[f64], grid: &Grid) -> Result<f64> {
    let n = grid.n_samples();
    if spectrum.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} spectrum bins on a {}-point grid",
            spectrum.len(),
            n
        )));
    }
    let peak = spectrum.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::DegenerateInput("all-zero spectrum".into()));
    }
    let floor = GRADIENT_FLOOR * peak;
    let amp: Vec<f64> = spectrum.iter().map(|v| v.max(0.0).sqrt()).collect();
    let d_omega = grid.d_omega();
    let mut sum = 0.0;
    for j in 0..n {
        if spectrum[j] < floor {
            continue;
        }
        let slope = if j == 0 {
            (amp[1] - amp[0]) / d_omega
        } else if j == n - 1 {
            (amp[n - 1] - amp[n - 2]) / d_omega
        } else {
            (amp[j + 1] - amp[j - 1]) / (2.0 * d_omega)
        };
        sum += slope * slope;
    }
    Ok((sum * d_omega / TAU).sqrt())
}

/// `sigma_psi = sqrt((gamma T)^2 - sigma_0^2)`; errors when the budget
/// `gamma T` does not exceed the bandwidth-limited duration.
pub fn sigma_psi_value(sigma0: f64, gamma: f64, time_window: f64) -> Result<f64> {
    let budget = gamma * time_window;
    if budget <= sigma0 {
        return Err(Error::NoAdmissibleBound(format!(
            "gamma*T = {budget:.3e} s does not exceed the bandwidth-limited \
             duration sigma_0 = {sigma0:.3e} s"
        )));
    }
    Ok((budget * budget - sigma0 * sigma0).sqrt())
}

/// Rms duration of the pulse after applying `phase`, assuming the applied
/// phase dominates and the temporal centroid sits at zero:
/// `sigma_t^2 = sigma_0^2 + 1/(2 pi) * sum (psi' A)^2 d_omega`.
pub fn modulated_duration(spectrum: &[f64], phase: &PhaseSpec, grid: &Grid) -> Result<f64> {
    let s0 = sigma0(spectrum, grid)?;
    let d_omega = grid.d_omega();
    let mut broadening = 0.0;
    for j in 0..grid.n_samples() {
        let slope = phase.phase_derivative_at(grid.omega_at(j));
        broadening += slope * slope * spectrum[j];
    }
    broadening *= d_omega / TAU;
    Ok((s0 * s0 + broadening).sqrt())
}

/// Spectral weight `k^2/(2 pi) * sum omega^(2(k-1)) I d_omega` appearing in
/// the polynomial bound denominator.
fn polynomial_moment(spectrum: &[f64], grid: &Grid, order: u32) -> f64 {
    let p = 2 * (order as i32 - 1);
    let mut sum = 0.0;
    for j in 0..grid.n_samples() {
        sum += grid.omega_at(j).powi(p) * spectrum[j];
    }
    (order as f64).powi(2) * sum * grid.d_omega() / TAU
}

/// Largest admissible coefficient of a `k`-th order polynomial phase:
/// `q_max = sqrt( sigma_psi^2 / (k^2/(2 pi) * sum omega^(2(k-1)) I d_omega) )`.
pub fn q_max(inputs: &BoundInputs, order: u32) -> Result<f64> {
    if order < 2 {
        return Err(Error::InvalidArgument(format!(
            "polynomial order must be >= 2, got {order}"
        )));
    }
    let sigma_psi = inputs.sigma_psi()?;
    let moment = polynomial_moment(inputs.spectrum(), inputs.grid(), order);
    if moment <= 0.0 {
        return Err(Error::NoAdmissibleBound(
            "spectrum carries no off-center weight; the polynomial phase \
             term vanishes"
                .into(),
        ));
    }
    Ok((sigma_psi * sigma_psi / moment).sqrt())
}

/// Fourier transform of the spectral intensity,
/// `G(t) = 1/(2 pi) * sum I(omega_j) exp(i omega_j t) d_omega`.
pub fn spectral_autocorr(spectrum: &[f64], grid: &Grid, t: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..grid.n_samples() {
        acc += spectrum[j] * Complex64::from_polar(1.0, grid.omega_at(j) * t);
    }
    acc * (grid.d_omega() / TAU)
}

/// Which sinusoidal parameter is held fixed when bounding the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedParam {
    /// Modulation period in seconds.
    Tau(f64),
    /// Modulation amplitude in rad.
    Amplitude(f64),
}

/// Product bound `P = a_max * tau_max = sqrt(2 sigma_psi^2 / G(0))` of the
/// phase-independent approximate expression.
pub fn a_tau_product(inputs: &BoundInputs) -> Result<f64> {
    let sigma_psi = inputs.sigma_psi()?;
    let g0 = spectral_autocorr(inputs.spectrum(), inputs.grid(), 0.0).re;
    if g0 <= 0.0 {
        return Err(Error::DegenerateInput("G(0) is not positive".into()));
    }
    Ok((2.0 * sigma_psi * sigma_psi / g0).sqrt())
}

/// Bounds one sinusoidal parameter given the other, using the approximate
/// (phase-independent) product bound.
pub fn a_tau_bound(inputs: &BoundInputs, fix: FixedParam) -> Result<f64> {
    let (name, value) = match fix {
        FixedParam::Tau(v) => ("tau", v),
        FixedParam::Amplitude(v) => ("amplitude", v),
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fixed {name} must be positive, got {value}"
        )));
    }
    Ok(a_tau_product(inputs)? / value)
}

/// Exact product bound retaining the `G(2 tau)` cross term,
/// `a tau = sqrt( 2 sigma_psi^2 / (G(0) - Re{ G(2 tau) e^(2 i phi) }) )`.
///
/// Tighter than [`a_tau_product`] when the autocorrelation at `2 tau` has
/// not yet decayed; errors when the denominator is not positive.
pub fn a_tau_product_exact(inputs: &BoundInputs, tau: f64, phi: f64) -> Result<f64> {
    let sigma_psi = inputs.sigma_psi()?;
    let g0 = spectral_autocorr(inputs.spectrum(), inputs.grid(), 0.0).re;
    let g2 = spectral_autocorr(inputs.spectrum(), inputs.grid(), 2.0 * tau);
    let denom = g0 - (g2 * Complex64::from_polar(1.0, 2.0 * phi)).re;
    if denom <= 0.0 {
        return Err(Error::NoAdmissibleBound(
            "exact sinusoidal bound denominator is not positive".into(),
        ));
    }
    Ok((2.0 * sigma_psi * sigma_psi / denom).sqrt())
}

/// Builds a transfer-function family from bound inputs, enumerating the
/// scanned parameter within the admissible limits.
pub fn build_family(scan: FamilyScan, inputs: &BoundInputs) -> Result<PhaseFamily> {
    let n = scan.members();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "family size must be at least 2, got {n}"
        )));
    }
    let n_f = n as f64;
    // Signed multipliers (n - N/2 - 1) for n in 1..=N, rescaled by 2/N so
    // the scan stays inside the +-bound; for even N this includes zero.
    let signed_step = |i: usize| (i as f64 + 1.0 - n_f / 2.0 - 1.0) * 2.0 / n_f;
    match scan {
        FamilyScan::QuadraticQ { .. } => {
            let q_max = q_max(inputs, 2)?;
            let members = (0..n)
                .map(|i| PhaseSpec::Polynomial {
                    order: 2,
                    coeff: signed_step(i) * q_max,
                })
                .collect();
            PhaseFamily::from_members(members, ScanDescriptor::QuadraticQ { q_max })
        }
        FamilyScan::SinusPhi { tau, .. } => {
            let amplitude = a_tau_bound(inputs, FixedParam::Tau(tau))?;
            let members = (0..n)
                .map(|i| PhaseSpec::Sinusoidal {
                    amplitude,
                    tau,
                    phi: TAU * i as f64 / n_f,
                })
                .collect();
            PhaseFamily::from_members(members, ScanDescriptor::SinusPhi { amplitude, tau })
        }
        FamilyScan::SinusA { phi, tau, .. } => {
            let a_max = a_tau_bound(inputs, FixedParam::Tau(tau))?;
            let members = (0..n)
                .map(|i| PhaseSpec::Sinusoidal {
                    amplitude: signed_step(i) * a_max,
                    tau,
                    phi,
                })
                .collect();
            PhaseFamily::from_members(members, ScanDescriptor::SinusA { phi, tau, a_max })
        }
        FamilyScan::SinusTau { phi, amplitude, .. } => {
            if !(amplitude.is_finite() && amplitude > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "fixed amplitude must be positive, got {amplitude}"
                )));
            }
            let tau_max = a_tau_bound(inputs, FixedParam::Amplitude(amplitude))?;
            let members = (0..n)
                .map(|i| PhaseSpec::Sinusoidal {
                    amplitude,
                    tau: tau_max * (i as f64 + 1.0) / n_f,
                    phi,
                })
                .collect();
            PhaseFamily::from_members(
                members,
                ScanDescriptor::SinusTau {
                    phi,
                    amplitude,
                    tau_max,
                },
            )
        }
    }
}
