//! Spectral differential operators, Leray projection and isotropic norms.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Rank, SpectralField};
use crate::grid::VOLUME;
use crate::vec3::{dot, norm};

const UNIT_TOL: f64 = 1e-12;

pub fn check_unit(e: [f64; 3]) -> Result<()> {
    let n = norm(e);
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(Error::InvalidDirection { norm: n });
    }
    Ok(())
}

/// `∂_e f = e·∇f` for a unit vector `e` (multiplier `i ξ·e`).
pub fn directional_derivative(f: &SpectralField, e: [f64; 3]) -> Result<SpectralField> {
    check_unit(e)?;
    Ok(derivative(f, e))
}

/// `e·∇f` for an arbitrary constant vector `e`.
pub fn derivative(f: &SpectralField, e: [f64; 3]) -> SpectralField {
    f.apply_multiplier(|k| Complex64::new(0.0, dot(k, e)))
}

/// Partial derivative along coordinate axis `axis`.
pub fn partial(f: &SpectralField, axis: usize) -> SpectralField {
    f.apply_multiplier(|k| Complex64::new(0.0, k[axis]))
}

pub fn gradient(f: &SpectralField) -> Result<SpectralField> {
    f.expect_scalar()?;
    let parts = [partial(f, 0), partial(f, 1), partial(f, 2)];
    SpectralField::from_components([&parts[0], &parts[1], &parts[2]])
}

pub fn divergence(u: &SpectralField) -> Result<SpectralField> {
    u.expect_vector()?;
    let grid = u.grid();
    let len = grid.len();
    let mut out = SpectralField::zeros(grid, Rank::Scalar);
    let coeffs = out.coeffs_mut();
    for c in 0..3 {
        let comp = u.component(c);
        for idx in 0..len {
            coeffs[idx] += Complex64::new(0.0, grid.k(idx)[c]) * comp[idx];
        }
    }
    Ok(out)
}

pub fn curl(u: &SpectralField) -> Result<SpectralField> {
    u.expect_vector()?;
    let c = |i: usize| u.component_field(i);
    let (u0, u1, u2) = (c(0), c(1), c(2));
    let w0 = partial(&u2, 1) - partial(&u1, 2);
    let w1 = partial(&u0, 2) - partial(&u2, 0);
    let w2 = partial(&u1, 0) - partial(&u0, 1);
    SpectralField::from_components([&w0, &w1, &w2])
}

/// `Δf` (multiplier `-|ξ|²`), componentwise.
pub fn laplacian(f: &SpectralField) -> SpectralField {
    f.apply_real_multiplier(|k| -dot(k, k))
}

/// Helmholtz–Leray projection `Id - ξξᵀ/|ξ|²` onto divergence-free fields.
pub fn leray_project(u: &SpectralField) -> Result<SpectralField> {
    u.expect_vector()?;
    u.require_mean_zero()?;
    Ok(leray_unchecked(u))
}

pub(crate) fn leray_unchecked(u: &SpectralField) -> SpectralField {
    let grid = u.grid();
    let len = grid.len();
    let mut out = u.clone();
    let src = u.coeffs();
    let dst = out.coeffs_mut();
    for idx in 0..len {
        let k = grid.k(idx);
        let k2 = dot(k, k);
        if k2 == 0.0 {
            for c in 0..3 {
                dst[c * len + idx] = Complex64::default();
            }
            continue;
        }
        let kdotu = (0..3)
            .map(|c| src[c * len + idx] * k[c])
            .fold(Complex64::default(), |a, b| a + b);
        for c in 0..3 {
            dst[c * len + idx] = src[c * len + idx] - kdotu * (k[c] / k2);
        }
    }
    out
}

/// `Δ⁻¹f` (multiplier `-1/|ξ|²`, zero mode set to 0).
pub fn inv_laplacian(f: &SpectralField) -> Result<SpectralField> {
    f.require_mean_zero()?;
    Ok(inv_laplacian_unchecked(f))
}

pub(crate) fn inv_laplacian_unchecked(f: &SpectralField) -> SpectralField {
    f.apply_real_multiplier(|k| {
        let k2 = dot(k, k);
        if k2 == 0.0 {
            0.0
        } else {
            -1.0 / k2
        }
    })
}

/// Homogeneous Sobolev norm `(∫ |ξ|^{2s} |f̂|²)^{1/2}` with Parseval normalization.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> Result<f64> {
    if s < 0.0 {
        f.require_mean_zero()?;
    }
    let grid = f.grid();
    let len = grid.len();
    let mut acc = 0.0;
    for idx in 0..len {
        let k = grid.k(idx);
        let k2 = dot(k, k);
        let w = if k2 == 0.0 {
            if s == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            k2.powf(s)
        };
        if w == 0.0 {
            continue;
        }
        for c in 0..f.rank().components() {
            acc += w * f.component(c)[idx].norm_sqr();
        }
    }
    Ok((VOLUME * acc).sqrt())
}

/// Spectral L² norm.
pub fn l2_norm(f: &SpectralField) -> f64 {
    f.l2_norm()
}

/// `‖ξ·û‖ / ‖û‖` over coefficients; zero for the zero field.
pub fn divergence_ratio(u: &SpectralField) -> f64 {
    let d = divergence(u).map(|d| d.coeff_norm()).unwrap_or(f64::NAN);
    let n = u.coeff_norm();
    if n == 0.0 {
        0.0
    } else {
        d / n
    }
}

/// Entrywise gradient tensor `G[i][j] = ∂_i u_j` of a vector field.
pub fn gradient_tensor(u: &SpectralField) -> Result<[[SpectralField; 3]; 3]> {
    u.expect_vector()?;
    let comps = [u.component_field(0), u.component_field(1), u.component_field(2)];
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| partial(&comps[j], i))
    }))
}
