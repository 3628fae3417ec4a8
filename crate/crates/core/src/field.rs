//! Spectral and physical field representations.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, VOLUME};

/// Relative threshold below which a zero-mode coefficient counts as zero.
const MEAN_ZERO_RTOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector3,
}

impl Rank {
    #[inline]
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector3 => "vector3",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector3 => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Rank> {
        match tag {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector3),
            _ => None,
        }
    }
}

/// Fourier coefficients of a scalar or 3-vector field on a periodic grid.
///
/// Vector components are stored outermost: component `c` occupies
/// `coeffs[c * n³ .. (c + 1) * n³]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    rank: Rank,
    coeffs: Vec<Complex64>,
}

/// Real grid-point values of a scalar or 3-vector field.
#[derive(Clone, Debug)]
pub struct PhysicalField {
    grid: Grid,
    rank: Rank,
    values: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        SpectralField {
            grid: grid.clone(),
            rank,
            coeffs: vec![Complex64::default(); rank.components() * grid.len()],
        }
    }

    /// Wrap raw coefficients; Nyquist modes are zeroed.
    pub fn from_coeffs(grid: &Grid, rank: Rank, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != rank.components() * grid.len() {
            return Err(Error::InvalidGrid(format!(
                "coefficient count {} does not match {} {} grid",
                coeffs.len(),
                rank.name(),
                grid.n()
            )));
        }
        let mut f = SpectralField {
            grid: grid.clone(),
            rank,
            coeffs,
        };
        f.zero_nyquist();
        Ok(f)
    }

    /// Sample a real scalar function at the grid points and transform.
    pub fn from_fn_scalar(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    values.push(f(grid.coord(i0), grid.coord(i1), grid.coord(i2)));
                }
            }
        }
        PhysicalField::from_values(grid, Rank::Scalar, values)
            .expect("length matches by construction")
            .to_spectral()
    }

    /// Sample a real vector function at the grid points and transform.
    pub fn from_fn_vector(grid: &Grid, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Self {
        let n = grid.n();
        let len = grid.len();
        let mut values = vec![0.0; 3 * len];
        let mut p = 0;
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let v = f(grid.coord(i0), grid.coord(i1), grid.coord(i2));
                    for c in 0..3 {
                        values[c * len + p] = v[c];
                    }
                    p += 1;
                }
            }
        }
        PhysicalField::from_values(grid, Rank::Vector3, values)
            .expect("length matches by construction")
            .to_spectral()
    }

    /// Assemble a vector field from three scalar components.
    pub fn from_components(parts: [&SpectralField; 3]) -> Result<Self> {
        let grid = parts[0].grid.clone();
        let mut coeffs = Vec::with_capacity(3 * grid.len());
        for p in parts {
            p.expect_scalar()?;
            if p.grid != grid {
                return Err(Error::GridMismatch);
            }
            coeffs.extend_from_slice(&p.coeffs);
        }
        Ok(SpectralField {
            grid,
            rank: Rank::Vector3,
            coeffs,
        })
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn rank(&self) -> Rank {
        self.rank
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let len = self.grid.len();
        &self.coeffs[c * len..(c + 1) * len]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let len = self.grid.len();
        &mut self.coeffs[c * len..(c + 1) * len]
    }

    /// Component `c` as a scalar field.
    pub fn component_field(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            rank: Rank::Scalar,
            coeffs: self.component(c).to_vec(),
        }
    }

    pub fn expect_scalar(&self) -> Result<()> {
        if self.rank != Rank::Scalar {
            return Err(Error::RankMismatch {
                expected: "scalar",
                found: self.rank.name(),
            });
        }
        Ok(())
    }

    pub fn expect_vector(&self) -> Result<()> {
        if self.rank != Rank::Vector3 {
            return Err(Error::RankMismatch {
                expected: "vector3",
                found: self.rank.name(),
            });
        }
        Ok(())
    }

    pub fn same_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Scalar coefficient at integer wavevector `k` (component `c`).
    pub fn mode(&self, c: usize, k: [i64; 3]) -> Complex64 {
        self.component(c)[self.grid.index(k)]
    }

    /// Set the coefficient at `k` and its conjugate partner at `-k`, keeping the
    /// physical field real.
    pub fn set_mode_real(&mut self, c: usize, k: [i64; 3], value: Complex64) {
        let idx = self.grid.index(k);
        if self.grid.is_nyquist(idx) {
            return;
        }
        let neg = self.grid.neg(idx);
        let comp = self.component_mut(c);
        if neg == idx {
            comp[idx] = Complex64::new(value.re, 0.0);
        } else {
            comp[idx] = value;
            comp[neg] = value.conj();
        }
    }

    /// Scalar `amplitude · cos(k·x)` built directly from its two coefficients.
    pub fn cosine_mode(grid: &Grid, k: [i64; 3], amplitude: f64) -> SpectralField {
        let mut f = SpectralField::zeros(grid, Rank::Scalar);
        f.set_mode_real(0, k, Complex64::new(amplitude / 2.0, 0.0));
        f
    }

    /// Largest zero-mode magnitude over components.
    pub fn mean_magnitude(&self) -> f64 {
        (0..self.rank.components())
            .map(|c| self.component(c)[0].norm())
            .fold(0.0, f64::max)
    }

    /// Mean-zero up to a relative round-off threshold.
    pub fn is_mean_zero(&self) -> bool {
        let scale = self.coeff_norm();
        self.mean_magnitude() <= MEAN_ZERO_RTOL * scale
    }

    pub fn require_mean_zero(&self) -> Result<()> {
        if self.is_mean_zero() {
            Ok(())
        } else {
            Err(Error::MeanViolation {
                mean: self.mean_magnitude(),
            })
        }
    }

    /// Zero the mean of every component exactly.
    pub fn remove_mean(&mut self) {
        for c in 0..self.rank.components() {
            self.component_mut(c)[0] = Complex64::default();
        }
    }

    pub fn without_mean(mut self) -> Self {
        self.remove_mean();
        self
    }

    /// `(Σ |c|²)^{1/2}` over all stored coefficients.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Physical L² norm via Parseval: `(2π)³ Σ |f̂(ξ)|²`.
    pub fn l2_norm(&self) -> f64 {
        (VOLUME * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Real L² inner product `∫ f·g dx`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert!(self.grid == other.grid && self.rank == other.rank);
        VOLUME
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>()
    }

    /// Multiply each component by the multiplier `m(ξ)`.
    pub fn apply_multiplier(&self, m: impl Fn([f64; 3]) -> Complex64) -> SpectralField {
        let len = self.grid.len();
        let mut out = self.clone();
        for idx in 0..len {
            let f = m(self.grid.k(idx));
            for c in 0..self.rank.components() {
                out.coeffs[c * len + idx] *= f;
            }
        }
        out
    }

    /// Multiply each component by the real multiplier `m(ξ)`.
    pub fn apply_real_multiplier(&self, m: impl Fn([f64; 3]) -> f64) -> SpectralField {
        let len = self.grid.len();
        let mut out = self.clone();
        for idx in 0..len {
            let f = m(self.grid.k(idx));
            for c in 0..self.rank.components() {
                out.coeffs[c * len + idx] *= f;
            }
        }
        out
    }

    /// Zero every mode outside the dealias mask; returns the removed L² mass squared.
    pub fn dealias(&mut self) -> f64 {
        let len = self.grid.len();
        let mut removed = 0.0;
        for c in 0..self.rank.components() {
            for idx in 0..len {
                if !self.grid.in_mask(idx) {
                    let v = &mut self.coeffs[c * len + idx];
                    removed += v.norm_sqr();
                    *v = Complex64::default();
                }
            }
        }
        removed * VOLUME
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    fn zero_nyquist(&mut self) {
        let len = self.grid.len();
        for c in 0..self.rank.components() {
            for idx in 0..len {
                if self.grid.is_nyquist(idx) {
                    self.coeffs[c * len + idx] = Complex64::default();
                }
            }
        }
    }

    /// Largest violation of `f̂(-ξ) = conj f̂(ξ)`.
    pub fn hermitian_defect(&self) -> f64 {
        let len = self.grid.len();
        let mut worst = 0.0f64;
        for c in 0..self.rank.components() {
            let comp = self.component(c);
            for idx in 0..len {
                let d = (comp[self.grid.neg(idx)] - comp[idx].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Project onto real fields by averaging each mode with its conjugate partner.
    pub fn symmetrize(&mut self) {
        let len = self.grid.len();
        let grid = self.grid.clone();
        let neg: Vec<usize> = (0..len).map(|i| grid.neg(i)).collect();
        for c in 0..self.rank.components() {
            let comp: Vec<Complex64> = self.component(c).to_vec();
            let out = self.component_mut(c);
            for idx in 0..len {
                out[idx] = 0.5 * (comp[idx] + comp[neg[idx]].conj());
            }
        }
    }

    /// Largest per-axis wavenumber magnitude carrying a coefficient above `tol`.
    pub fn max_wavenumber(&self, tol: f64) -> i64 {
        let len = self.grid.len();
        let mut kmax = 0i64;
        for c in 0..self.rank.components() {
            for idx in 0..len {
                if self.coeffs[c * len + idx].norm() > tol {
                    let k = self.grid.k_int(idx);
                    kmax = kmax.max(k.iter().map(|v| v.abs()).max().unwrap_or(0));
                }
            }
        }
        kmax
    }

    /// `e · u` for a vector field `u` and constant vector `e`.
    pub fn dot_const(&self, e: [f64; 3]) -> Result<SpectralField> {
        self.expect_vector()?;
        let len = self.grid.len();
        let mut out = SpectralField::zeros(&self.grid, Rank::Scalar);
        for c in 0..3 {
            if e[c] == 0.0 {
                continue;
            }
            let comp = self.component(c);
            for idx in 0..len {
                out.coeffs[idx] += comp[idx] * e[c];
            }
        }
        Ok(out)
    }

    /// `f e` for a scalar field `f` and constant vector `e`.
    pub fn times_const_vector(&self, e: [f64; 3]) -> Result<SpectralField> {
        self.expect_scalar()?;
        let len = self.grid.len();
        let mut out = SpectralField::zeros(&self.grid, Rank::Vector3);
        for c in 0..3 {
            for idx in 0..len {
                out.coeffs[c * len + idx] = self.coeffs[idx] * e[c];
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.coeffs.iter_mut() {
            *c *= s;
        }
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &SpectralField) {
        assert!(self.grid == x.grid && self.rank == x.rank);
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += xv * a;
        }
    }

    /// Largest coefficient-wise difference.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Inverse transform to grid-point values.
    pub fn to_physical(&self) -> PhysicalField {
        let len = self.grid.len();
        let mut values = Vec::with_capacity(self.coeffs.len());
        let mut buf = vec![Complex64::default(); len];
        for c in 0..self.rank.components() {
            buf.copy_from_slice(self.component(c));
            self.grid.fft_inverse(&mut buf);
            values.extend(buf.iter().map(|z| z.re));
        }
        PhysicalField {
            grid: self.grid.clone(),
            rank: self.rank,
            values,
        }
    }

    /// Dealiased pointwise product of two scalar fields.
    pub fn product(&self, other: &SpectralField) -> Result<SpectralField> {
        self.expect_scalar()?;
        other.expect_scalar()?;
        self.same_grid(other)?;
        let a = self.to_physical();
        let b = other.to_physical();
        Ok(a.mul(&b).to_spectral().dealiased())
    }
}

impl PhysicalField {
    pub fn from_values(grid: &Grid, rank: Rank, values: Vec<f64>) -> Result<Self> {
        if values.len() != rank.components() * grid.len() {
            return Err(Error::InvalidGrid(format!(
                "value count {} does not match {} {} grid",
                values.len(),
                rank.name(),
                grid.n()
            )));
        }
        Ok(PhysicalField {
            grid: grid.clone(),
            rank,
            values,
        })
    }

    pub fn zeros(grid: &Grid, rank: Rank) -> Self {
        PhysicalField {
            grid: grid.clone(),
            rank,
            values: vec![0.0; rank.components() * grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn rank(&self) -> Rank {
        self.rank
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let len = self.grid.len();
        &self.values[c * len..(c + 1) * len]
    }

    pub fn component_field(&self, c: usize) -> PhysicalField {
        PhysicalField {
            grid: self.grid.clone(),
            rank: Rank::Scalar,
            values: self.component(c).to_vec(),
        }
    }

    /// Forward transform; Nyquist modes are zeroed.
    pub fn to_spectral(&self) -> SpectralField {
        let len = self.grid.len();
        let mut coeffs = Vec::with_capacity(self.values.len());
        let mut buf = vec![Complex64::default(); len];
        for c in 0..self.rank.components() {
            for (b, v) in buf.iter_mut().zip(self.component(c)) {
                *b = Complex64::new(*v, 0.0);
            }
            self.grid.fft_forward(&mut buf);
            coeffs.extend_from_slice(&buf);
        }
        SpectralField::from_coeffs(&self.grid, self.rank, coeffs)
            .expect("length matches by construction")
    }

    /// Pointwise product of two scalar fields.
    pub fn mul(&self, other: &PhysicalField) -> PhysicalField {
        assert!(self.rank == Rank::Scalar && other.rank == Rank::Scalar);
        PhysicalField {
            grid: self.grid.clone(),
            rank: Rank::Scalar,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// `self += a * x * y` pointwise (scalars).
    pub fn add_product(&mut self, a: f64, x: &PhysicalField, y: &PhysicalField) {
        for ((s, xv), yv) in self.values.iter_mut().zip(&x.values).zip(&y.values) {
            *s += a * xv * yv;
        }
    }

    /// Quadrature `∫ f dx` (scalar).
    pub fn integral(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().sum::<f64>() * h * h * h
    }

    /// Quadrature L^p norm over the torus; vector fields use the pointwise
    /// Euclidean magnitude.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mags = self.magnitudes();
        let h = self.grid.spacing();
        let dv = h * h * h;
        if p.is_infinite() {
            mags.iter().fold(0.0, |m, v| m.max(*v))
        } else if p == 1.0 {
            mags.iter().sum::<f64>() * dv
        } else {
            (mags.iter().map(|v| v.powf(p)).sum::<f64>() * dv).powf(1.0 / p)
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitudes(&self) -> Vec<f64> {
        let len = self.grid.len();
        match self.rank {
            Rank::Scalar => self.values.iter().map(|v| v.abs()).collect(),
            Rank::Vector3 => (0..len)
                .map(|i| {
                    (0..3)
                        .map(|c| self.values[c * len + i].powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&SpectralField> for &SpectralField {
            type Output = SpectralField;
            fn $method(self, rhs: &SpectralField) -> SpectralField {
                assert!(self.grid == rhs.grid && self.rank == rhs.rank, "operand mismatch");
                SpectralField {
                    grid: self.grid.clone(),
                    rank: self.rank,
                    coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a $op b).collect(),
                }
            }
        }
        impl $trait<SpectralField> for SpectralField {
            type Output = SpectralField;
            fn $method(self, rhs: SpectralField) -> SpectralField {
                &self $op &rhs
            }
        }
        impl $trait<&SpectralField> for SpectralField {
            type Output = SpectralField;
            fn $method(self, rhs: &SpectralField) -> SpectralField {
                &self $op rhs
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, rhs: &SpectralField) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, s: f64) -> SpectralField {
        let mut out = self.clone();
        out.scale(s);
        out
    }
}

impl Mul<f64> for SpectralField {
    type Output = SpectralField;
    fn mul(mut self, s: f64) -> SpectralField {
        self.scale(s);
        self
    }
}

impl Neg for SpectralField {
    type Output = SpectralField;
    fn neg(mut self) -> SpectralField {
        self.scale(-1.0);
        self
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self * -1.0
    }
}
