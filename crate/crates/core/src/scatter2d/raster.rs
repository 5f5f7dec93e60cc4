//! Deterministic molecule depiction on a square greyscale grid.

use crate::error::{Error, Result};
use crate::graphcore::eig_sym;
use crate::ingest::elements::is_halogen;
use crate::ingest::{BondOrder, MolecularGraph};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const MIN_IMAGE_SIZE: usize = 16;
pub const BOND_INTENSITY: f64 = 0.5;

/// Square row-major greyscale image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image<T> {
    pub size: usize,
    pub pixels: Vec<T>,
}

impl<T: Scalar> Image<T> {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            pixels: vec![T::zero(); size * size],
        }
    }

    pub fn from_pixels(size: usize, pixels: Vec<T>) -> Result<Self> {
        if pixels.len() != size * size {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {size}x{size} image",
                pixels.len()
            )));
        }
        Ok(Self { size, pixels })
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.pixels[row * self.size + col] = v;
    }

    /// Circular shift by `(dr, dc)` pixels.
    pub fn roll(&self, dr: usize, dc: usize) -> Self {
        let n = self.size;
        let mut out = Self::new(n);
        for r in 0..n {
            for c in 0..n {
                out.set((r + dr) % n, (c + dc) % n, self.get(r, c));
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Image<U> {
        Image {
            size: self.size,
            pixels: self.pixels.iter().map(|&p| U::of(p.as_f64())).collect(),
        }
    }
}

pub fn element_intensity(z: u8) -> f64 {
    match z {
        6 => 0.6,
        7 => 0.7,
        8 => 0.8,
        z if is_halogen(z) => 0.9,
        _ => 1.0,
    }
}

/// Atom positions in `[0, 1]^2`: eigenvectors 2 and 3 of the combinatorial
/// Laplacian, centred and scaled uniformly so the larger extent spans the
/// `[0.1, 0.9]` box.
pub fn spectral_layout(g: &MolecularGraph) -> Result<Vec<(f64, f64)>> {
    let n = g.n_atoms();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![(0.5, 0.5)]),
        // Lighter element on the left, so the picture ignores atom order.
        2 if g.atoms[0].element > g.atoms[1].element => return Ok(vec![(0.9, 0.5), (0.1, 0.5)]),
        2 => return Ok(vec![(0.1, 0.5), (0.9, 0.5)]),
        _ => {}
    }
    let mut lap = Matrix::<f64>::zeros(n, n);
    for b in &g.bonds {
        lap[(b.a, b.b)] -= 1.0;
        lap[(b.b, b.a)] -= 1.0;
        lap[(b.a, b.a)] += 1.0;
        lap[(b.b, b.b)] += 1.0;
    }
    let (vecs, _) = eig_sym(&lap)?;
    let xs = vecs.col(1);
    let ys = vecs.col(2);
    let extent = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (x0, x1) = extent(&xs);
    let (y0, y1) = extent(&ys);
    let span = (x1 - x0).max(y1 - y0);
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    Ok((0..n)
        .map(|i| {
            if span <= 1e-12 {
                (0.5, 0.5)
            } else {
                (
                    0.5 + 0.8 * (xs[i] - cx) / span,
                    0.5 + 0.8 * (ys[i] - cy) / span,
                )
            }
        })
        .collect())
}

pub fn rasterize<T: Scalar>(g: &MolecularGraph, size: usize) -> Result<Image<T>> {
    if size < MIN_IMAGE_SIZE {
        return Err(Error::SizeTooSmall {
            size,
            min: MIN_IMAGE_SIZE,
        });
    }
    if !size.is_power_of_two() {
        return Err(Error::ShapeMismatch(format!(
            "image size {size} is not a power of two"
        )));
    }
    let layout = spectral_layout(g)?;
    let scale = (size - 1) as f64;
    // The centre of the box is a half-integer pixel coordinate. Snapping to a
    // fine grid keeps eigensolver roundoff from deciding which way it rounds.
    let snap = |v: f64| (v * scale * 1e6).round() / 1e6;
    let px: Vec<(f64, f64)> = layout.iter().map(|&(x, y)| (snap(x), snap(y))).collect();
    let mut canvas = vec![0.0f64; size * size];

    let offset = (size as f64 / 128.0).max(1.0);
    for b in &g.bonds {
        let (ax, ay) = px[b.a];
        let (bx, by) = px[b.b];
        let (dx, dy) = (bx - ax, by - ay);
        let len = (dx * dx + dy * dy).sqrt();
        let (nx, ny) = if len > 0.0 {
            (-dy / len, dx / len)
        } else {
            (0.0, 0.0)
        };
        let shifts: &[f64] = match b.order {
            BondOrder::Double => &[-1.0, 1.0],
            BondOrder::Triple => &[-2.0, 0.0, 2.0],
            BondOrder::Single | BondOrder::Aromatic => &[0.0],
        };
        for &s in shifts {
            let (ox, oy) = (nx * s * offset, ny * s * offset);
            line(&mut canvas, size, (ax + ox, ay + oy), (bx + ox, by + oy));
        }
    }

    let radius = size as f64 / 64.0;
    for (i, &(x, y)) in px.iter().enumerate() {
        disc(
            &mut canvas,
            size,
            (x, y),
            radius,
            element_intensity(g.atoms[i].element),
        );
    }
    Ok(Image {
        size,
        pixels: canvas.into_iter().map(T::of).collect(),
    })
}

fn plot(canvas: &mut [f64], size: usize, x: i64, y: i64, v: f64) {
    if (0..size as i64).contains(&x) && (0..size as i64).contains(&y) {
        let p = &mut canvas[y as usize * size + x as usize];
        *p = p.max(v);
    }
}

/// Bresenham line between rounded endpoints, traced from the smaller one so
/// both directions give the same pixels.
fn line(canvas: &mut [f64], size: usize, a: (f64, f64), b: (f64, f64)) {
    let p = (a.0.round() as i64, a.1.round() as i64);
    let q = (b.0.round() as i64, b.1.round() as i64);
    let ((mut x0, mut y0), (x1, y1)) = if p <= q { (p, q) } else { (q, p) };
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        plot(canvas, size, x0, y0, BOND_INTENSITY);
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

fn disc(canvas: &mut [f64], size: usize, c: (f64, f64), r: f64, v: f64) {
    let (cx, cy) = (c.0.round() as i64, c.1.round() as i64);
    let reach = r.ceil() as i64;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if ((dx * dx + dy * dy) as f64) <= r * r {
                let (x, y) = (cx + dx, cy + dy);
                plot(canvas, size, x, y, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_smiles;

    #[test]
    fn single_atom_is_one_centred_disc() {
        let img: Image<f64> = rasterize(&parse_smiles("C").unwrap(), 64).unwrap();
        let lit: Vec<(usize, usize)> = (0..64)
            .flat_map(|r| (0..64).map(move |c| (r, c)))
            .filter(|&(r, c)| img.get(r, c) > 0.0)
            .collect();
        // Radius 1 disc: centre plus its four neighbours.
        assert_eq!(lit.len(), 5);
        assert!(lit.iter().all(|&(r, c)| img.get(r, c) == 0.6));
        let centre = (32, 32);
        assert!(lit.contains(&centre));
    }

    #[test]
    fn k2_is_two_discs_and_a_line() {
        let img: Image<f64> = rasterize(&parse_smiles("CO").unwrap(), 64).unwrap();
        let row = 32;
        let left = (0.1 * 63.0f64).round() as usize;
        let right = (0.9 * 63.0f64).round() as usize;
        assert_eq!(img.get(row, left), 0.6);
        assert_eq!(img.get(row, right), 0.8);
        for c in left + 2..right - 1 {
            assert_eq!(img.get(row, c), BOND_INTENSITY);
        }
    }

    #[test]
    fn benzene_layout_is_a_regular_hexagon() {
        let pos = spectral_layout(&parse_smiles("c1ccccc1").unwrap()).unwrap();
        let (cx, cy) = (
            pos.iter().map(|p| p.0).sum::<f64>() / 6.0,
            pos.iter().map(|p| p.1).sum::<f64>() / 6.0,
        );
        let radii: Vec<f64> = pos
            .iter()
            .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
            .collect();
        for r in &radii {
            assert!((r - radii[0]).abs() < 1e-9);
        }
        // Ring neighbours sit 60 degrees apart.
        for i in 0..6 {
            let a = pos[i];
            let b = pos[(i + 1) % 6];
            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            assert!((d - radii[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn intensities_by_element_class() {
        assert_eq!(element_intensity(6), 0.6);
        assert_eq!(element_intensity(7), 0.7);
        assert_eq!(element_intensity(8), 0.8);
        assert_eq!(element_intensity(17), 0.9);
        assert_eq!(element_intensity(16), 1.0);
    }

    #[test]
    fn rejects_small_images() {
        let g = parse_smiles("CC").unwrap();
        assert!(matches!(
            rasterize::<f64>(&g, 8),
            Err(Error::SizeTooSmall { size: 8, min: 16 })
        ));
    }

    #[test]
    fn pixels_stay_in_unit_range() {
        let g = parse_smiles("O=C(O)c1ccc(Cl)cc1C#N").unwrap();
        let img: Image<f64> = rasterize(&g, 64).unwrap();
        assert!(img.pixels.iter().all(|&p| (0.0..=1.0).contains(&p)));
        assert!(img.pixels.contains(&BOND_INTENSITY));
    }
}
