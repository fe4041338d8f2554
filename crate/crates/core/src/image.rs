use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ot::Matrix;
use crate::scalar::Scalar;

/// Grayscale image stored row-major. Pixel values live in `[0, 1]` once
/// clipped; intermediate noisy values may leave that range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePatch<T> {
    height: usize,
    width: usize,
    pixels: Vec<T>,
}

impl<T: Scalar> ImagePatch<T> {
    pub fn new(height: usize, width: usize, pixels: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ShapeMismatch("image must be at least 1x1".into()));
        }
        if pixels.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} pixels for a {height}x{width} image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("pixel value".into()));
        }
        Ok(Self { height, width, pixels })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        assert!(height > 0 && width > 0, "image must be at least 1x1");
        Self {
            height,
            width,
            pixels: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height > 0 && width > 0, "image must be at least 1x1");
        let mut pixels = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                pixels.push(f(r, c));
            }
        }
        Self { height, width, pixels }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.pixels[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.pixels[r * self.width + c] = v;
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<T> {
        self.pixels
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            height: self.height,
            width: self.width,
            pixels: self.pixels.iter().map(|p| f(*p)).collect(),
        }
    }

    pub fn clipped(&self) -> Self {
        self.map(|p| p.max(T::zero()).min(T::one()))
    }

    pub fn mean(&self) -> T {
        self.pixels.iter().copied().sum::<T>() / T::from_usize_lossy(self.len())
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width || height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "crop {height}x{width} at ({top},{left}) outside {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(height, width, |r, c| self.get(top + r, left + c)))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        Ok(())
    }

    /// Pixel at `(r, c)` with mirror boundary handling (edge not repeated).
    #[inline]
    pub fn get_reflect(&self, r: isize, c: isize) -> T {
        self.get(reflect_index(r, self.height), reflect_index(c, self.width))
    }

    /// Correlation with an odd-sized kernel, reflect padding, same output size.
    pub fn convolve_reflect(&self, kernel: &Matrix<T>) -> Result<Self> {
        let (kh, kw) = (kernel.rows(), kernel.cols());
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidArgument("kernel sides must be odd".into()));
        }
        let (rh, rw) = (kh / 2, kw / 2);
        if (rh > 0 && rh >= self.height) || (rw > 0 && rw >= self.width) {
            return Err(Error::InvalidArgument(format!(
                "{kh}x{kw} kernel exceeds {}x{} image",
                self.height, self.width
            )));
        }
        Ok(Self::from_fn(self.height, self.width, |r, c| {
            let mut acc = T::zero();
            for i in 0..kh {
                for j in 0..kw {
                    let rr = r as isize + i as isize - rh as isize;
                    let cc = c as isize + j as isize - rw as isize;
                    acc += kernel.get(i, j) * self.get_reflect(rr, cc);
                }
            }
            acc
        }))
    }
}

/// Mirror an out-of-range index back into `0..n` without repeating the edge
/// sample (`-1 -> 1`, `n -> n - 2`).
pub fn reflect_index(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-2, 5), 2);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(6, 5), 2);
        assert_eq!(reflect_index(3, 1), 0);
    }

    #[test]
    fn crop_and_shape_errors() {
        let img = ImagePatch::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        let p = img.crop(1, 2, 2, 2).unwrap();
        assert_eq!(p.pixels(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(img.crop(3, 3, 2, 2).is_err());
        assert!(ImagePatch::<f64>::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn box_filter_preserves_constant() {
        let img = ImagePatch::<f64>::filled(5, 6, 0.25);
        let k = Matrix::from_fn(3, 3, |_, _| 1.0 / 9.0);
        let out = img.convolve_reflect(&k).unwrap();
        for p in out.pixels() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }
}
