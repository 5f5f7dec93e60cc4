//! Radix-2 complex FFT, 1D and square 2D.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Precomputed twiddles and bit-reversal table for one power-of-two length.
#[derive(Clone, Debug)]
pub struct Fft<T> {
    n: usize,
    twiddles: Vec<Complex<T>>,
    bitrev: Vec<usize>,
}

impl<T: Scalar> Fft<T> {
    /// Panics unless `n` is a power of two.
    pub fn new(n: usize) -> Self {
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -T::TAU() * T::of_usize(k) / T::of_usize(n);
                Complex::new(a.cos(), a.sin())
            })
            .collect();
        Self {
            n,
            twiddles,
            bitrev,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized transform; `inverse` conjugates the kernel.
    pub fn process(&self, buf: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        assert_eq!(buf.len(), n);
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// In-place 2D transform of an `n x n` row-major grid. The inverse is
    /// normalized by `1 / n^2`.
    pub fn process_2d(&self, grid: &mut [Complex<T>], inverse: bool) {
        let n = self.n;
        assert_eq!(grid.len(), n * n);
        for row in grid.chunks_mut(n) {
            self.process(row, inverse);
        }
        let mut col = vec![Complex::new(T::zero(), T::zero()); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = grid[r * n + c];
            }
            self.process(&mut col, inverse);
            for r in 0..n {
                grid[r * n + c] = col[r];
            }
        }
        if inverse {
            let s = T::one() / T::of_usize(n * n);
            for z in grid.iter_mut() {
                *z = *z * s;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[Complex<f64>]) -> Vec<Complex<f64>> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .fold(Complex::new(0.0, 0.0), |acc, (t, &v)| {
                        let a = -std::f64::consts::TAU * (k * t) as f64 / n as f64;
                        acc + v * Complex::new(a.cos(), a.sin())
                    })
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1, 2, 4, 8, 32] {
            let x: Vec<Complex<f64>> = (0..n)
                .map(|i| Complex::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let mut y = x.clone();
            Fft::new(n).process(&mut y, false);
            for (a, b) in y.iter().zip(naive_dft(&x)) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn roundtrip_2d() {
        let n = 16;
        let x: Vec<Complex<f64>> = (0..n * n)
            .map(|i| Complex::new((i as f64).sqrt(), 0.0))
            .collect();
        let fft = Fft::new(n);
        let mut y = x.clone();
        fft.process_2d(&mut y, false);
        fft.process_2d(&mut y, true);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
