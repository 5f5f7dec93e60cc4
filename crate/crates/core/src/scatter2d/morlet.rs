//! Morlet filter bank, built directly in the frequency domain.
//!
//! The spatial wavelet at scale `j` and angle `theta` is
//!
//! ```text
//! psi(x) = 2^{-2j} c (exp(i k.x) exp(-|x|^2 / 2s^2) - beta exp(-|x|^2 / 2 sigma^2))
//! ```
//!
//! with `s = s0 2^j`, `sigma = sigma0 2^j`, `|k| = xi 2^-j` and `k` pointing along
//! `theta`. `c = 1 / (2 pi s0^2)` gives the oscillating part unit peak in
//! frequency. The filter is sampled on the integer grid and periodized to the
//! image size. Both operations have closed forms in frequency (Poisson
//! summation), so each DFT coefficient is a short sum of Gaussians. `beta` is
//! chosen so that the zero-frequency coefficient, and hence the spatial mean
//! of the sampled filter, vanishes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MorletParams {
    /// Width of the oscillating Gaussian at `j = 0`.
    pub envelope: f64,
    /// Width of the DC-correction Gaussian at `j = 0`.
    pub sigma: f64,
    /// Wave number at `j = 0`.
    pub xi: f64,
    /// Width of the lowpass at `j = 0`; the bank uses `lowpass * 2^J`.
    pub lowpass: f64,
}

impl Default for MorletParams {
    fn default() -> Self {
        Self {
            envelope: 0.8,
            sigma: 0.8,
            xi: 3.0 * std::f64::consts::PI / 4.0,
            lowpass: 0.8,
        }
    }
}

/// One oriented wavelet. `freq` is its real-valued DFT on the `size x size`
/// grid, row-major, frequency index `(row, col)` = `(omega_y, omega_x)`.
#[derive(Clone, Debug)]
pub struct Wavelet<T> {
    pub j: usize,
    pub ell: usize,
    pub theta: f64,
    pub k: f64,
    pub beta: f64,
    pub sigma: f64,
    pub freq: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct MorletBank<T> {
    pub scales: usize,
    pub orientations: usize,
    pub size: usize,
    pub params: MorletParams,
    /// Scale-major, orientation-minor.
    pub wavelets: Vec<Wavelet<T>>,
    pub lowpass: Vec<T>,
}

impl<T: Scalar> MorletBank<T> {
    pub fn len(&self) -> usize {
        self.wavelets.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavelet(&self, j: usize, ell: usize) -> &Wavelet<T> {
        &self.wavelets[j * self.orientations + ell]
    }
}

pub fn morlet_bank<T: Scalar>(
    scales: usize,
    orientations: usize,
    size: usize,
    params: MorletParams,
) -> Result<MorletBank<T>> {
    if !size.is_power_of_two() {
        return Err(Error::ShapeMismatch(format!(
            "image size {size} is not a power of two"
        )));
    }
    let min = 1usize << scales;
    if size < min {
        return Err(Error::SizeTooSmall { size, min });
    }
    if orientations == 0 {
        return Err(Error::Config("at least one orientation is required".into()));
    }
    let mut wavelets = Vec::with_capacity(scales * orientations);
    for j in 0..scales {
        for ell in 0..orientations {
            let theta = ell as f64 * std::f64::consts::PI / orientations as f64;
            wavelets.push(morlet_filter(&params, size, j, ell, theta));
        }
    }
    let lowpass = gaussian_lowpass(size, params.lowpass * min as f64);
    Ok(MorletBank {
        scales,
        orientations,
        size,
        params,
        wavelets,
        lowpass,
    })
}

/// Builds a single wavelet at an arbitrary angle.
pub fn morlet_filter<T: Scalar>(
    params: &MorletParams,
    size: usize,
    j: usize,
    ell: usize,
    theta: f64,
) -> Wavelet<T> {
    let dil = (1u64 << j) as f64;
    let s = params.envelope * dil;
    let sigma = params.sigma * dil;
    let k = params.xi / dil;
    let (kx, ky) = (k * theta.cos(), k * theta.sin());
    let reach = alias_reach(s.min(sigma));
    let norm = 1.0 / (params.envelope * params.envelope);
    // Continuous transforms scaled by 2^{-2j} c; the 2 pi cancels against c.
    let gabor = |wx: f64, wy: f64| {
        norm * s * s / (dil * dil) * (-0.5 * s * s * ((wx - kx).powi(2) + (wy - ky).powi(2))).exp()
    };
    let corr = |wx: f64, wy: f64| {
        norm * sigma * sigma / (dil * dil) * (-0.5 * sigma * sigma * (wx * wx + wy * wy)).exp()
    };
    let beta = periodized(0.0, 0.0, reach, gabor) / periodized(0.0, 0.0, reach, corr);
    let freq = frequency_grid(size, |wx, wy| {
        periodized(wx, wy, reach, gabor) - beta * periodized(wx, wy, reach, corr)
    });
    Wavelet {
        j,
        ell,
        theta,
        k,
        beta,
        sigma,
        freq,
    }
}

/// Unit-mass Gaussian lowpass of width `sigma`.
fn gaussian_lowpass<T: Scalar>(size: usize, sigma: f64) -> Vec<T> {
    let reach = alias_reach(sigma);
    let g = |wx: f64, wy: f64| (-0.5 * sigma * sigma * (wx * wx + wy * wy)).exp();
    frequency_grid(size, |wx, wy| periodized(wx, wy, reach, g))
}

/// Number of 2 pi aliases needed on each side for a Gaussian of spatial width `w`.
fn alias_reach(w: f64) -> i32 {
    ((9.0 / (w * std::f64::consts::TAU)).ceil() as i32).max(1)
}

fn periodized(wx: f64, wy: f64, reach: i32, f: impl Fn(f64, f64) -> f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut acc = 0.0;
    for py in -reach..=reach {
        for px in -reach..=reach {
            acc += f(wx + tau * f64::from(px), wy + tau * f64::from(py));
        }
    }
    acc
}

fn frequency_grid<T: Scalar>(size: usize, f: impl Fn(f64, f64) -> f64) -> Vec<T> {
    let omega = |m: usize| std::f64::consts::TAU * m as f64 / size as f64;
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            out.push(T::of(f(omega(c), omega(r))));
        }
    }
    out
}
