//! Shared discrete time/frequency axes.
//!
//! A [`Grid`] fixes `n_samples` (a power of two) and the time window `T`.
//! Both axes are zero-centered: sample `j` sits at `t_j = (j - n/2) * dt`
//! and `omega_j = (j - n/2) * d_omega` with `dt = T / n` and
//! `d_omega = 2*pi / T`, so `dt * d_omega * n = 2*pi` holds exactly.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Discrete zero-centered time/frequency grid plus cached FFT plans.
///
/// Cheap to clone; the plans are shared. Two grids compare equal when their
/// sample count and time window agree.
#[derive(Clone)]
pub struct Grid {
    n_samples: usize,
    time_window: f64,
    /// Optional carrier angular frequency; metadata only, never used in
    /// envelope arithmetic.
    carrier: Option<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("n_samples", &self.n_samples)
            .field("time_window", &self.time_window)
            .field("carrier", &self.carrier)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_samples == other.n_samples && self.time_window == other.time_window
    }
}

impl Grid {
    /// Builds a grid with `n_samples` points over a total time window of
    /// `time_window` seconds.
    ///
    /// `n_samples` must be a power of two and at least 8; `time_window`
    /// must be positive and finite.
    pub fn new(n_samples: usize, time_window: f64) -> Result<Self> {
        if n_samples < 8 || !n_samples.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_samples must be a power of two >= 8, got {n_samples}"
            )));
        }
        if !(time_window.is_finite() && time_window > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time_window must be positive and finite, got {time_window}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n_samples,
            time_window,
            carrier: None,
            forward: planner.plan_fft_forward(n_samples),
            inverse: planner.plan_fft_inverse(n_samples),
        })
    }

    /// Attaches a carrier angular frequency (rad/s) as annotation.
    pub fn with_carrier(mut self, omega0: f64) -> Self {
        self.carrier = Some(omega0);
        self
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Total time window `T` in seconds.
    pub fn time_window(&self) -> f64 {
        self.time_window
    }

    /// Carrier angular frequency annotation, if any.
    pub fn carrier(&self) -> Option<f64> {
        self.carrier
    }

    /// Time step `dt = T / n` in seconds.
    pub fn dt(&self) -> f64 {
        self.time_window / self.n_samples as f64
    }

    /// Frequency step `d_omega = 2*pi / T` in rad/s.
    pub fn d_omega(&self) -> f64 {
        std::f64::consts::TAU / self.time_window
    }

    /// Time of sample `j`, `t_j = (j - n/2) * dt`.
    pub fn time_at(&self, j: usize) -> f64 {
        (j as f64 - (self.n_samples / 2) as f64) * self.dt()
    }

    /// Angular frequency of sample `j`, `omega_j = (j - n/2) * d_omega`,
    /// relative to the carrier.
    pub fn omega_at(&self, j: usize) -> f64 {
        (j as f64 - (self.n_samples / 2) as f64) * self.d_omega()
    }

    /// Zero-centered time axis.
    pub fn time_axis(&self) -> Vec<f64> {
        (0..self.n_samples).map(|j| self.time_at(j)).collect()
    }

    /// Zero-centered frequency axis.
    pub fn omega_axis(&self) -> Vec<f64> {
        (0..self.n_samples).map(|j| self.omega_at(j)).collect()
    }

    /// Swaps the two halves of a zero-centered buffer in place.
    ///
    /// For even lengths this is its own inverse, so the same operation maps
    /// centered order to FFT order and back.
    pub(crate) fn swap_halves(buf: &mut [Complex64]) {
        let half = buf.len() / 2;
        let (lo, hi) = buf.split_at_mut(half);
        lo.swap_with_slice(hi);
    }

    /// In-place time -> frequency transform on a zero-centered buffer:
    /// `E(omega_k) = dt * sum_j E(t_j) exp(-i omega_k t_j)`.
    pub(crate) fn time_to_freq_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_samples);
        Self::swap_halves(buf);
        self.forward.process(buf);
        Self::swap_halves(buf);
        let dt = self.dt();
        for v in buf.iter_mut() {
            *v *= dt;
        }
    }

    /// In-place frequency -> time transform on a zero-centered buffer:
    /// `E(t_j) = d_omega / (2*pi) * sum_k E(omega_k) exp(+i omega_k t_j)`.
    pub(crate) fn freq_to_time_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_samples);
        Self::swap_halves(buf);
        self.inverse.process(buf);
        Self::swap_halves(buf);
        // d_omega / (2*pi) = 1 / (n * dt)
        let scale = 1.0 / (self.n_samples as f64 * self.dt());
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }
}
