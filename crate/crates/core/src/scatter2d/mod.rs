//! Morlet wavelet scattering of rasterized molecules.
//!
//! Coefficients are laid out order by order. Order 0 is one channel, order 1
//! has one channel per `(j, theta)` and order 2 one per `(j1, theta1, j2,
//! theta2)` with `j1 < j2`. Each channel holds `(size / 2^J)^2` spatial cells in
//! row-major order. The total length is therefore
//! `(1 + J L + L^2 J (J - 1) / 2) * (size / 2^J)^2` at order 2.

mod chi2;
mod fft;
mod morlet;
mod raster;

use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;

pub use chi2::{chi2_scores, chi2_select};
pub use fft::Fft;
pub use morlet::{morlet_bank, morlet_filter, MorletBank, MorletParams, Wavelet};
pub use raster::{
    element_intensity, rasterize, spectral_layout, Image, BOND_INTENSITY, MIN_IMAGE_SIZE,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScatterLabel2D {
    pub scales: Vec<u8>,
    pub angles: Vec<u8>,
    pub cell: (usize, usize),
}

impl ScatterLabel2D {
    pub fn order(&self) -> usize {
        self.scales.len()
    }
}

impl fmt::Display for ScatterLabel2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u8]| v.iter().map(u8::to_string).collect::<Vec<_>>().join(".");
        write!(
            f,
            "s{}[j={};l={}]@{}.{}",
            self.order(),
            join(&self.scales),
            join(&self.angles),
            self.cell.0,
            self.cell.1
        )
    }
}

#[derive(Clone, Debug)]
pub struct ScatterVector2D<T> {
    pub values: Vec<T>,
    pub labels: Vec<ScatterLabel2D>,
}

impl<T: Scalar> ScatterVector2D<T> {
    pub fn order_values(&self, order: usize) -> impl Iterator<Item = T> + '_ {
        self.values
            .iter()
            .zip(&self.labels)
            .filter(move |(_, l)| l.order() == order)
            .map(|(v, _)| *v)
    }
}

/// Number of channels for `J` scales, `L` orientations up to `order`.
pub fn channel_count(scales: usize, orientations: usize, order: usize) -> usize {
    let mut n = 1;
    if order >= 1 {
        n += scales * orientations;
    }
    if order >= 2 {
        n += orientations * orientations * scales * scales.saturating_sub(1) / 2;
    }
    n
}

pub fn coefficient_count(scales: usize, orientations: usize, order: usize, size: usize) -> usize {
    let cells = size >> scales;
    channel_count(scales, orientations, order) * cells * cells
}

pub fn scatter_image<T: Scalar>(
    img: &Image<T>,
    bank: &MorletBank<T>,
    order: usize,
) -> Result<ScatterVector2D<T>> {
    if img.size != bank.size {
        return Err(Error::DimensionMismatch(format!(
            "image is {0}x{0} but the filter bank expects {1}x{1}",
            img.size, bank.size
        )));
    }
    if order > 2 {
        return Err(Error::Config(format!("scattering order {order} exceeds 2")));
    }
    let n = bank.size;
    let cells = n >> bank.scales;
    let fft = Fft::new(n);
    let small = Fft::new(cells);
    let ctx = Ctx {
        bank,
        fft: &fft,
        small: &small,
    };

    let mut spec: Vec<Complex<T>> = img
        .pixels
        .iter()
        .map(|&p| Complex::new(p, T::zero()))
        .collect();
    fft.process_2d(&mut spec, false);

    let mut out = ScatterVector2D {
        values: Vec::with_capacity(coefficient_count(bank.scales, bank.orientations, order, n)),
        labels: Vec::new(),
    };
    let mut emit = |scales: Vec<u8>, angles: Vec<u8>, vals: Vec<T>| {
        for (i, v) in vals.into_iter().enumerate() {
            out.values.push(v);
            out.labels.push(ScatterLabel2D {
                scales: scales.clone(),
                angles: angles.clone(),
                cell: (i / cells, i % cells),
            });
        }
    };

    emit(vec![], vec![], ctx.smooth(&spec));
    if order == 0 {
        return Ok(out);
    }

    // First-layer modulus spectra, kept for the second layer.
    let first: Vec<Vec<Complex<T>>> = bank
        .wavelets
        .iter()
        .map(|w| ctx.modulus_spectrum(&spec, &w.freq))
        .collect();
    for (w, u1) in bank.wavelets.iter().zip(&first) {
        emit(vec![w.j as u8], vec![w.ell as u8], ctx.smooth(u1));
    }
    if order == 1 {
        return Ok(out);
    }
    for (w1, u1) in bank.wavelets.iter().zip(&first) {
        for w2 in bank.wavelets.iter().filter(|w2| w2.j > w1.j) {
            let u2 = ctx.modulus_spectrum(u1, &w2.freq);
            emit(
                vec![w1.j as u8, w2.j as u8],
                vec![w1.ell as u8, w2.ell as u8],
                ctx.smooth(&u2),
            );
        }
    }
    Ok(out)
}

/// Scatters a batch of images in parallel; rows follow input order.
pub fn scatter_images<T: Scalar>(
    images: &[Image<T>],
    bank: &MorletBank<T>,
    order: usize,
) -> Result<(Matrix<T>, Vec<ScatterLabel2D>)> {
    let rows = images
        .par_iter()
        .map(|img| scatter_image(img, bank, order))
        .collect::<Result<Vec<_>>>()?;
    let labels = rows.first().map(|r| r.labels.clone()).unwrap_or_default();
    let cols = coefficient_count(bank.scales, bank.orientations, order, bank.size);
    let data = rows.into_iter().flat_map(|r| r.values).collect();
    Ok((Matrix::from_vec(images.len(), cols, data)?, labels))
}

struct Ctx<'a, T> {
    bank: &'a MorletBank<T>,
    fft: &'a Fft<T>,
    small: &'a Fft<T>,
}

impl<T: Scalar> Ctx<'_, T> {
    /// Spectrum of `|x * psi|` given the spectrum of `x`.
    fn modulus_spectrum(&self, spec: &[Complex<T>], filter: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = spec.iter().zip(filter).map(|(z, &f)| *z * f).collect();
        self.fft.process_2d(&mut buf, true);
        for z in buf.iter_mut() {
            *z = Complex::new(z.norm(), T::zero());
        }
        self.fft.process_2d(&mut buf, false);
        buf
    }

    /// Lowpass, then subsample by `2^J`. Subsampling is done by folding the
    /// spectrum onto the coarse grid and inverting there.
    fn smooth(&self, spec: &[Complex<T>]) -> Vec<T> {
        let n = self.bank.size;
        let m = self.small.len();
        let step = n / m;
        let mut folded = vec![Complex::new(T::zero(), T::zero()); m * m];
        for r in 0..n {
            for c in 0..n {
                let idx = r * n + c;
                let slot = &mut folded[(r % m) * m + c % m];
                *slot = *slot + spec[idx] * self.bank.lowpass[idx];
            }
        }
        let norm = T::one() / T::of_usize(step * step);
        for z in folded.iter_mut() {
            *z = *z * norm;
        }
        self.small.process_2d(&mut folded, true);
        folded.into_iter().map(|z| z.re).collect()
    }
}
