//! Periodic grid on the torus [0, 2π)³ and the 3-D FFT contract.
//!
//! Coefficients are stored in FFT order: index `i` along an axis carries the
//! wavenumber `i` for `i < n/2` and `i - n` otherwise, so the per-axis range is
//! `[-n/2, n/2)`. Arrays are row-major over `(i0, i1, i2)` with `i2` fastest.
//! The forward transform divides by `n³`, so a stored coefficient is the true
//! Fourier coefficient of the trigonometric polynomial.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Default dealiasing fraction (2/3 rule).
pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;

/// Side length of the periodic box.
pub const DOMAIN_LENGTH: f64 = 2.0 * PI;

/// Volume of the periodic box, `(2π)³`.
pub const VOLUME: f64 = DOMAIN_LENGTH * DOMAIN_LENGTH * DOMAIN_LENGTH;

struct GridInner {
    n: usize,
    dealias_fraction: f64,
    kvec: Vec<[f64; 3]>,
    mask: Vec<bool>,
    nyquist: Vec<bool>,
    neg_index: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid with `n` points (and modes) per axis.
///
/// Cloning is cheap; FFT plans and wavevector tables are shared.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.inner.n)
            .field("dealias_fraction", &self.inner.dealias_fraction)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n
                && self.inner.dealias_fraction == other.inner.dealias_fraction)
    }
}

/// Build a grid with `n` modes per axis and the default 2/3 dealiasing.
pub fn make_grid(n: usize) -> Result<Grid> {
    Grid::with_dealias(n, DEFAULT_DEALIAS)
}

/// Signed wavenumber stored at FFT index `i` on an axis of length `n`.
#[inline]
pub fn wavenumber(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// FFT index of signed wavenumber `k` on an axis of length `n`.
#[inline]
pub fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

impl Grid {
    pub fn new(n: usize) -> Result<Grid> {
        make_grid(n)
    }

    pub fn with_dealias(n: usize, dealias_fraction: f64) -> Result<Grid> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} is below the minimum of 8")));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n = {n} is not a power of two")));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "dealias fraction {dealias_fraction} outside (0, 1]"
            )));
        }
        let total = n * n * n;
        let cutoff = dealias_fraction * n as f64 / 2.0;
        let half = (n / 2) as i64;
        let mut kvec = Vec::with_capacity(total);
        let mut mask = Vec::with_capacity(total);
        let mut nyquist = Vec::with_capacity(total);
        let mut neg_index = Vec::with_capacity(total);
        for i0 in 0..n {
            let k0 = wavenumber(i0, n);
            for i1 in 0..n {
                let k1 = wavenumber(i1, n);
                for i2 in 0..n {
                    let k2 = wavenumber(i2, n);
                    let k = [k0, k1, k2];
                    let is_nyq = k.iter().any(|&c| c == -half);
                    kvec.push([k0 as f64, k1 as f64, k2 as f64]);
                    nyquist.push(is_nyq);
                    mask.push(!is_nyq && k.iter().all(|&c| (c.abs() as f64) <= cutoff));
                    neg_index.push(
                        (index_of(-k0, n) * n + index_of(-k1, n)) * n + index_of(-k2, n),
                    );
                }
            }
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Grid {
            inner: Arc::new(GridInner {
                n,
                dealias_fraction,
                kvec,
                mask,
                nyquist,
                neg_index,
                forward,
                inverse,
            }),
        })
    }

    /// Modes per axis.
    #[inline]
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Total number of modes (`n³`).
    #[inline]
    pub fn len(&self) -> usize {
        self.inner.n * self.inner.n * self.inner.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.inner.dealias_fraction
    }

    pub fn domain_length(&self) -> f64 {
        DOMAIN_LENGTH
    }

    /// Grid spacing `2π/n`.
    pub fn spacing(&self) -> f64 {
        DOMAIN_LENGTH / self.inner.n as f64
    }

    /// Per-axis wavenumbers in ascending order, `-n/2 ..= n/2 - 1`.
    pub fn axis_wavenumbers(&self) -> Vec<i64> {
        let h = (self.inner.n / 2) as i64;
        (-h..h).collect()
    }

    /// Wavevector at flat index `idx`.
    #[inline]
    pub fn k(&self, idx: usize) -> [f64; 3] {
        self.inner.kvec[idx]
    }

    #[inline]
    pub fn kvecs(&self) -> &[[f64; 3]] {
        &self.inner.kvec
    }

    /// Integer wavevector at flat index `idx`.
    pub fn k_int(&self, idx: usize) -> [i64; 3] {
        let k = self.inner.kvec[idx];
        [k[0] as i64, k[1] as i64, k[2] as i64]
    }

    /// Flat index of an integer wavevector (wrapped into the grid).
    pub fn index(&self, k: [i64; 3]) -> usize {
        let n = self.inner.n;
        (index_of(k[0], n) * n + index_of(k[1], n)) * n + index_of(k[2], n)
    }

    /// Flat index of `-ξ` for the mode at `idx`.
    #[inline]
    pub fn neg(&self, idx: usize) -> usize {
        self.inner.neg_index[idx]
    }

    /// Whether the mode at `idx` survives the dealiasing mask.
    #[inline]
    pub fn in_mask(&self, idx: usize) -> bool {
        self.inner.mask[idx]
    }

    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        self.inner.nyquist[idx]
    }

    /// Largest retained wavenumber magnitude per axis under the dealias mask.
    pub fn dealias_kmax(&self) -> i64 {
        (self.inner.dealias_fraction * self.inner.n as f64 / 2.0).floor() as i64
    }

    /// Physical coordinate of grid point `i` along an axis.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    /// In-place forward 3-D transform, normalized by `n³`.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
        let scale = 1.0 / self.len() as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse 3-D transform (no normalization).
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.inner.n;
        assert_eq!(data.len(), n * n * n, "buffer length does not match grid");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // axis 2 is contiguous
        fft.process_with_scratch(data, &mut scratch);
        let mut line = vec![Complex64::default(); n];
        // axis 1
        for i0 in 0..n {
            let plane = &mut data[i0 * n * n..(i0 + 1) * n * n];
            for i2 in 0..n {
                for i1 in 0..n {
                    line[i1] = plane[i1 * n + i2];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i1 in 0..n {
                    plane[i1 * n + i2] = line[i1];
                }
            }
        }
        // axis 0
        for i1 in 0..n {
            for i2 in 0..n {
                let off = i1 * n + i2;
                for i0 in 0..n {
                    line[i0] = data[i0 * n * n + off];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for i0 in 0..n {
                    data[i0 * n * n + off] = line[i0];
                }
            }
        }
    }
}
