//! Direction-dependent Littlewood–Paley analysis.
//!
//! For a unit direction `β`, the perpendicular decomposition localizes in
//! `|ξ×β|` and the parallel one in `|ξ·β|`:
//!
//! ```text
//! Δ_k^{β⊥} a = F⁻¹ φ(2^{-k}|ξ×β|) â        S_k^{β⊥} a = F⁻¹ χ(2^{-k}|ξ×β|) â
//! Δ_l^{β}  a = F⁻¹ φ(2^{-l}|ξ·β|) â        S_l^{β}  a = F⁻¹ χ(2^{-l}|ξ·β|) â
//! ```
//!
//! `χ` is a smooth step equal to 1 on `[0, 19/24]` and 0 on `[4/3, ∞)`, and
//! `φ(r) = χ(r/2) − χ(r)` is supported in `[19/24, 8/3]`, so `S_k = Σ_{j<k} Δ_j`.

use std::collections::BTreeMap;
use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{PhysicalField, Rank, SpectralField};
use crate::frame::FrameSample;
use crate::grid::{Grid, VOLUME};
use crate::vec3::{cross, dot, norm, Vec3};

/// `χ ≡ 1` on `[0, CHI_FLAT]`.
pub const CHI_FLAT: f64 = 0.75 + 1.0 / 24.0;
/// `χ ≡ 0` on `[CHI_ZERO, ∞)`.
pub const CHI_ZERO: f64 = 4.0 / 3.0;
/// Lower end of `Supp φ`.
pub const PHI_MIN: f64 = CHI_FLAT;
/// Upper end of `Supp φ`.
pub const PHI_MAX: f64 = 2.0 * CHI_ZERO;
/// `φ ≡ 1` on `[PHI_PLATEAU.0, PHI_PLATEAU.1]`.
pub const PHI_PLATEAU: (f64, f64) = (CHI_ZERO, 2.0 * CHI_FLAT);

fn bump(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// Closed-form low-pass cutoff.
pub fn chi(r: f64) -> f64 {
    let r = r.abs();
    if r <= CHI_FLAT {
        1.0
    } else if r >= CHI_ZERO {
        0.0
    } else {
        let up = bump(CHI_ZERO - r);
        up / (up + bump(r - CHI_FLAT))
    }
}

/// Closed-form dyadic shell cutoff `χ(r/2) − χ(r)`.
pub fn phi(r: f64) -> f64 {
    let r = r.abs();
    if r <= PHI_MIN || r >= PHI_MAX {
        0.0
    } else {
        chi(r / 2.0) - chi(r)
    }
}

/// Tabulated cutoffs on `[0, 8/3]` together with the closed forms.
#[derive(Clone, Debug)]
pub struct Cutoffs {
    step: f64,
    chi_table: Vec<f64>,
    phi_table: Vec<f64>,
}

pub fn make_cutoffs() -> Cutoffs {
    Cutoffs::with_resolution(4096)
}

impl Cutoffs {
    pub fn with_resolution(points: usize) -> Cutoffs {
        let step = PHI_MAX / points as f64;
        let chi_table = (0..=points).map(|i| chi(i as f64 * step)).collect();
        let phi_table = (0..=points).map(|i| phi(i as f64 * step)).collect();
        Cutoffs {
            step,
            chi_table,
            phi_table,
        }
    }

    pub fn chi(&self, r: f64) -> f64 {
        chi(r)
    }

    pub fn phi(&self, r: f64) -> f64 {
        phi(r)
    }

    /// Tabulation nodes `(r, χ(r), φ(r))`.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.chi_table
            .iter()
            .zip(&self.phi_table)
            .enumerate()
            .map(|(i, (c, p))| (i as f64 * self.step, *c, *p))
    }

    fn interp(&self, table: &[f64], r: f64, beyond: f64) -> f64 {
        let x = r.abs() / self.step;
        let i = x.floor() as usize;
        if i + 1 >= table.len() {
            return beyond;
        }
        let w = x - i as f64;
        table[i] * (1.0 - w) + table[i + 1] * w
    }

    /// Linear interpolation in the χ table.
    pub fn chi_tabulated(&self, r: f64) -> f64 {
        self.interp(&self.chi_table, r, 0.0)
    }

    /// Linear interpolation in the φ table.
    pub fn phi_tabulated(&self, r: f64) -> f64 {
        self.interp(&self.phi_table, r, 0.0)
    }

    /// `|Σ_j φ(2^{-j} r) − 1|` for `r > 0`.
    pub fn homogeneous_defect(&self, r: f64) -> f64 {
        let (lo, hi) = shell_span(r);
        ((lo..=hi).map(|j| phi(r * 2f64.powi(-j))).sum::<f64>() - 1.0).abs()
    }

    /// `|χ(r) + Σ_{j≥0} φ(2^{-j} r) − 1|` for `r ≥ 0`.
    pub fn inhomogeneous_defect(&self, r: f64) -> f64 {
        let hi = if r > 0.0 { shell_span(r).1.max(0) } else { 0 };
        (chi(r) + (0..=hi).map(|j| phi(r * 2f64.powi(-j))).sum::<f64>() - 1.0).abs()
    }
}

/// Shells `j` that can have `φ(2^{-j} r) > 0`, padded by one on each side.
pub(crate) fn shell_span(r: f64) -> (i32, i32) {
    let lo = (r / PHI_MAX).log2().floor() as i32;
    let hi = (r / PHI_MIN).log2().ceil() as i32;
    (lo, hi)
}

/// Which of the two directional magnitudes a decomposition uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    /// `|ξ×β|`, frequencies in the plane orthogonal to `β`.
    Perp,
    /// `|ξ·β|`, frequencies along `β`.
    Par,
}

impl Direction {
    #[inline]
    pub fn magnitude(self, k: Vec3, beta: Vec3) -> f64 {
        match self {
            Direction::Perp => norm(cross(k, beta)),
            Direction::Par => dot(k, beta).abs(),
        }
    }
}

/// A dyadic shell `Δ_j` or a low-pass block `S_j = Σ_{i<j} Δ_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Band {
    Shell(i32),
    LowPass(i32),
}

impl Band {
    #[inline]
    pub fn multiplier(self, r: f64) -> f64 {
        match self {
            Band::Shell(j) => phi(r * 2f64.powi(-j)),
            Band::LowPass(j) => chi(r * 2f64.powi(-j)),
        }
    }
}

/// Joint perpendicular/parallel band.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct BandIndex {
    pub k: Band,
    pub l: Band,
}

/// Range of shells `j` with `φ(2^{-j} r) > 0` for some nonzero, non-Nyquist
/// grid mode; `None` when every mode has `r = 0`.
pub fn shell_range(grid: &Grid, beta: Vec3, dir: Direction) -> Option<(i32, i32)> {
    let mut rmin = f64::INFINITY;
    let mut rmax: f64 = 0.0;
    for idx in 0..grid.len() {
        if grid.is_nyquist(idx) {
            continue;
        }
        let r = dir.magnitude(grid.k(idx), beta);
        if r > 1e-12 {
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
    }
    if rmax == 0.0 {
        return None;
    }
    let (lo, hi) = (shell_span(rmin).0, shell_span(rmax).1);
    let lo = (lo..=hi).find(|&j| phi(rmin * 2f64.powi(-j)) > 0.0)?;
    let hi = (lo..=hi).rev().find(|&j| occupied(grid, beta, dir, j))?;
    Some((lo, hi))
}

fn occupied(grid: &Grid, beta: Vec3, dir: Direction, j: i32) -> bool {
    (0..grid.len()).any(|idx| {
        !grid.is_nyquist(idx) && phi(dir.magnitude(grid.k(idx), beta) * 2f64.powi(-j)) > 0.0
    })
}

fn project(f: &SpectralField, band: Band, beta: Vec3, dir: Direction) -> SpectralField {
    if let Band::Shell(j) = band {
        if let Some((_, hi)) = shell_range(f.grid(), beta, dir) {
            if j > hi {
                warn!("{dir:?} shell {j} lies above the grid's highest shell {hi}; band is empty");
            }
        }
    }
    f.apply_real_multiplier(|k| band.multiplier(dir.magnitude(k, beta)))
}

/// `Δ_k^{β⊥}` or `S_k^{β⊥}`.
pub fn project_perp(f: &SpectralField, k: Band, frame: &FrameSample) -> SpectralField {
    project(f, k, frame.beta, Direction::Perp)
}

/// `Δ_l^{β}` or `S_l^{β}`.
pub fn project_par(f: &SpectralField, l: Band, frame: &FrameSample) -> SpectralField {
    project(f, l, frame.beta, Direction::Par)
}

/// `Δ_k^{β⊥} Δ_l^{β}` (or the matching low-pass blocks).
pub fn project_band(f: &SpectralField, band: BandIndex, frame: &FrameSample) -> SpectralField {
    let beta = frame.beta;
    f.apply_real_multiplier(|k| {
        band.k.multiplier(Direction::Perp.magnitude(k, beta))
            * band.l.multiplier(Direction::Par.magnitude(k, beta))
    })
}

/// Norm family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Sobolev,
    Besov,
}

/// Indices of an anisotropic norm `(s1, s2, p, q1, q2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormSpec {
    pub s1: f64,
    pub s2: f64,
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    pub kind: NormKind,
}

impl NormSpec {
    pub fn sobolev(s1: f64, s2: f64) -> NormSpec {
        NormSpec {
            s1,
            s2,
            p: 2.0,
            q1: 2.0,
            q2: 2.0,
            kind: NormKind::Sobolev,
        }
    }

    pub fn besov(s1: f64, s2: f64, p: f64, q1: f64, q2: f64) -> NormSpec {
        NormSpec {
            s1,
            s2,
            p,
            q1,
            q2,
            kind: NormKind::Besov,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p == 1.0 || self.p == 2.0 || self.p == f64::INFINITY) {
            return Err(Error::Unsupported(format!("p = {} (only 1, 2, ∞)", self.p)));
        }
        for q in [self.q1, self.q2] {
            if q.is_nan() || q < 1.0 {
                return Err(Error::Domain(format!("q = {q} must lie in [1, ∞]")));
            }
        }
        if !self.s1.is_finite() || !self.s2.is_finite() {
            return Err(Error::Domain("regularity indices must be finite".into()));
        }
        Ok(())
    }
}

/// A norm value with the L² mass of modes it could not see.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub value: f64,
    /// L² norm of the excluded modes.
    pub excluded_mass: f64,
    #[serde(skip)]
    pub excluded_modes: Vec<[i64; 3]>,
}

impl NormReport {
    /// Error out when any carried mode had to be excluded.
    pub fn strict(self) -> Result<f64> {
        if self.excluded_modes.is_empty() {
            Ok(self.value)
        } else {
            Err(Error::DegenerateNorm {
                count: self.excluded_modes.len(),
                first: self.excluded_modes.iter().take(8).copied().collect(),
            })
        }
    }
}

const ZERO_TOL: f64 = 1e-12;

/// Per-mode power, summed over components, for modes with nonzero energy.
fn mode_power(f: &SpectralField) -> Vec<(usize, f64)> {
    let len = f.grid().len();
    (0..len)
        .filter_map(|idx| {
            let e: f64 = (0..f.rank().components())
                .map(|c| f.component(c)[idx].norm_sqr())
                .sum();
            (e > 0.0).then_some((idx, e))
        })
        .collect()
}

fn weight(r: f64, s: f64) -> Option<f64> {
    if r > ZERO_TOL {
        Some(r.powf(s))
    } else if s == 0.0 {
        Some(1.0)
    } else if s > 0.0 {
        Some(0.0)
    } else {
        None
    }
}

/// `(∫ |ξ×β|^{2 s1} |ξ·β|^{2 s2} |f̂|²)^{1/2}`, Parseval-normalized.
///
/// Modes where a vanishing magnitude meets a negative exponent are excluded
/// and reported.
pub fn aniso_sobolev_norm(
    f: &SpectralField,
    s1: f64,
    s2: f64,
    frame: &FrameSample,
) -> Result<NormReport> {
    f.require_mean_zero()?;
    let grid = f.grid();
    let beta = frame.beta;
    let mut acc = 0.0;
    let mut excluded = 0.0;
    let mut modes = Vec::new();
    for (idx, e) in mode_power(f) {
        let k = grid.k(idx);
        if dot(k, k) == 0.0 {
            continue;
        }
        let w1 = weight(Direction::Perp.magnitude(k, beta), s1);
        let w2 = weight(Direction::Par.magnitude(k, beta), s2);
        match (w1, w2) {
            (Some(a), Some(b)) => acc += a * a * b * b * e,
            _ => {
                excluded += e;
                modes.push(grid.k_int(idx));
            }
        }
    }
    Ok(NormReport {
        value: (VOLUME * acc).sqrt(),
        excluded_mass: (VOLUME * excluded).sqrt(),
        excluded_modes: modes,
    })
}

fn lq_sum(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else if q == 1.0 {
        values.sum()
    } else {
        values.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Axis index if `β = ±e_a`.
pub fn aligned_axis(beta: Vec3) -> Option<usize> {
    (0..3).find(|&a| (beta[a].abs() - 1.0).abs() < 1e-14)
}

/// `2^{k s1}`-weighted `ℓ^{q1}` over `k` of the `2^{l s2}`-weighted `ℓ^{q2}`
/// over `l` of `‖Δ_k^{β⊥} Δ_l^β f‖_{L^p}`; inner sum first.
///
/// Modes with `|ξ×β| = 0` or `|ξ·β| = 0` belong to no band pair and are
/// reported as excluded.
pub fn aniso_besov_norm(f: &SpectralField, spec: &NormSpec, frame: &FrameSample) -> Result<NormReport> {
    spec.validate()?;
    f.require_mean_zero()?;
    if spec.p != 2.0 && aligned_axis(frame.beta).is_none() {
        return Err(Error::Unsupported(format!(
            "L^{} Besov norms need an axis-aligned frame",
            spec.p
        )));
    }
    let grid = f.grid();
    let beta = frame.beta;
    let power = mode_power(f);
    let mut excluded = 0.0;
    let mut modes = Vec::new();
    // squared L² band energies keyed by (k, l)
    let mut energy: BTreeMap<(i32, i32), f64> = BTreeMap::new();
    for &(idx, e) in &power {
        let kv = grid.k(idx);
        if dot(kv, kv) == 0.0 {
            continue;
        }
        let rp = Direction::Perp.magnitude(kv, beta);
        let rl = Direction::Par.magnitude(kv, beta);
        if rp <= ZERO_TOL || rl <= ZERO_TOL {
            excluded += e;
            modes.push(grid.k_int(idx));
            continue;
        }
        let (k0, k1) = shell_span(rp);
        let (l0, l1) = shell_span(rl);
        for k in k0..=k1 {
            let a = phi(rp * 2f64.powi(-k));
            if a == 0.0 {
                continue;
            }
            for l in l0..=l1 {
                let b = phi(rl * 2f64.powi(-l));
                if b != 0.0 {
                    *energy.entry((k, l)).or_default() += a * a * b * b * e;
                }
            }
        }
    }
    let band_norms: BTreeMap<(i32, i32), f64> = if spec.p == 2.0 {
        energy.iter().map(|(&kl, &e)| (kl, (VOLUME * e).sqrt())).collect()
    } else {
        let keys: Vec<(i32, i32)> = energy.keys().copied().collect();
        keys.par_iter()
            .map(|&(k, l)| {
                let band = BandIndex {
                    k: Band::Shell(k),
                    l: Band::Shell(l),
                };
                (
                    (k, l),
                    project_band(f, band, frame).to_physical().lp_norm(spec.p),
                )
            })
            .collect()
    };
    let mut inner: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for (&(k, l), &v) in &band_norms {
        inner
            .entry(k)
            .or_default()
            .push(2f64.powf(l as f64 * spec.s2) * v);
    }
    let outer = inner
        .into_iter()
        .map(|(k, ls)| 2f64.powf(k as f64 * spec.s1) * lq_sum(ls.into_iter(), spec.q2));
    Ok(NormReport {
        value: lq_sum(outer, spec.q1),
        excluded_mass: (VOLUME * excluded).sqrt(),
        excluded_modes: modes,
    })
}

/// Dispatch on `spec.kind`.
pub fn aniso_norm(f: &SpectralField, spec: &NormSpec, frame: &FrameSample) -> Result<NormReport> {
    match spec.kind {
        NormKind::Sobolev => aniso_sobolev_norm(f, spec.s1, spec.s2, frame),
        NormKind::Besov => aniso_besov_norm(f, spec, frame),
    }
}

/// `‖ ‖f‖_{L^q_β} ‖_{L^p_{β⊥}}` for an axis-aligned `β`, by quadrature along
/// grid lines. Vector fields use the pointwise magnitude.
pub fn mixed_lebesgue_norm(f: &PhysicalField, p: f64, q: f64, frame: &FrameSample) -> Result<f64> {
    let axis = aligned_axis(frame.beta).ok_or_else(|| {
        Error::Unsupported("mixed Lebesgue norms need an axis-aligned frame".into())
    })?;
    for e in [p, q] {
        if e.is_nan() || e < 1.0 {
            return Err(Error::Domain(format!("exponent {e} must lie in [1, ∞]")));
        }
    }
    Ok(mixed_norm_of_magnitudes(f.grid(), &f.magnitudes(), p, q, axis))
}

/// Mixed norm of a nonnegative grid function, `β = e_axis`.
pub fn mixed_norm_of_magnitudes(grid: &Grid, mags: &[f64], p: f64, q: f64, axis: usize) -> f64 {
    let n = grid.n();
    let h = grid.spacing();
    let stride = [n * n, n, 1];
    let (pa, pb) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut lines = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let base = i * stride[pa] + j * stride[pb];
            let vals = (0..n).map(|m| mags[base + m * stride[axis]]);
            let v = if q.is_infinite() {
                vals.fold(0.0, f64::max)
            } else {
                (vals.map(|v| v.powf(q)).sum::<f64>() * h).powf(1.0 / q)
            };
            lines.push(v);
        }
    }
    if p.is_infinite() {
        lines.into_iter().fold(0.0, f64::max)
    } else {
        (lines.into_iter().map(|v| v.powf(p)).sum::<f64>() * h * h).powf(1.0 / p)
    }
}

/// Range of `Σ_j (ρ 2^{-j})^{-2s} φ(ρ 2^{-j})²` over one dyadic period.
fn overlap_range(s: f64) -> (f64, f64) {
    let samples = 20_000;
    (0..samples).fold((f64::INFINITY, 0.0f64), |(lo, hi), i| {
        let rho = 2f64.powf(i as f64 / samples as f64);
        let m: f64 = (-2..=2)
            .map(|j| {
                let x = rho * 2f64.powi(-j);
                x.powf(-2.0 * s) * phi(x).powi(2)
            })
            .sum();
        (lo.min(m), hi.max(m))
    })
}

/// Band `[c, C]` containing `‖f‖_{Besov(s1,s2;2,2,2)} / ‖f‖_{Ḣ^{s1,s2}_β}` for
/// every field without degenerate modes.
pub fn besov_sobolev_band(s1: f64, s2: f64) -> (f64, f64) {
    let (a0, a1) = overlap_range(s1);
    let (b0, b1) = overlap_range(s2);
    ((a0 * b0).sqrt(), (a1 * b1).sqrt())
}

/// Paraproducts and remainder of a pointwise product.
#[derive(Clone, Debug)]
pub struct BonyParts {
    /// `T_a b = Σ_k S_{k-1} a · Δ_k b`.
    pub ta_b: SpectralField,
    /// `T_b a = Σ_k S_{k-1} b · Δ_k a`.
    pub tb_a: SpectralField,
    /// `R(a, b) = Σ_k Δ_k a · Δ̃_k b` with `Δ̃_k = Δ_{k-1} + Δ_k + Δ_{k+1}`.
    pub remainder: SpectralField,
    /// Dealiased product `a·b` computed directly.
    pub product: SpectralField,
    /// L² mass of the inputs outside the dealias mask; nonzero means the
    /// products are aliased.
    pub truncation: f64,
    /// `min(‖a‖_∞‖b‖, ‖b‖_∞‖a‖)`, the a-priori size of `ab`.
    pub scale: f64,
}

impl BonyParts {
    pub fn truncated(&self) -> bool {
        self.truncation > 0.0
    }

    /// `‖T_a b + T_b a + R − ab‖ / max(‖ab‖, scale)`; the floor keeps pairs
    /// whose dealiased product nearly vanishes from reporting pure roundoff.
    pub fn reconstruction_error(&self) -> f64 {
        let sum = &(&self.ta_b + &self.tb_a) + &self.remainder;
        (&sum - &self.product).l2_norm() / self.product.l2_norm().max(self.scale).max(f64::MIN_POSITIVE)
    }
}

/// Bony decomposition in the chosen directional variable.
///
/// The lowest occupied shell also absorbs the modes with zero directional
/// magnitude (it is taken as the low-pass block `S_{k_min+1}`), so the shells
/// sum to the identity and the three parts reconstruct `ab` to roundoff.
pub fn bony_decompose(
    a: &SpectralField,
    b: &SpectralField,
    dir: Direction,
    frame: &FrameSample,
) -> Result<BonyParts> {
    a.expect_scalar()?;
    b.expect_scalar()?;
    a.same_grid(b)?;
    a.require_mean_zero()?;
    b.require_mean_zero()?;
    let grid = a.grid().clone();
    let beta = frame.beta;
    let truncation = {
        let mut ta = a.clone();
        let mut tb = b.clone();
        (ta.dealias() + tb.dealias()).sqrt()
    };
    if truncation > 0.0 {
        warn!("Bony inputs carry mass outside the dealias mask; products are aliased");
    }
    let product = a.product(b)?;
    let scale = (a.to_physical().max_abs() * b.l2_norm()).min(b.to_physical().max_abs() * a.l2_norm());
    let zero = || SpectralField::zeros(&grid, Rank::Scalar);
    let Some((lo, hi)) = shell_range(&grid, beta, dir) else {
        return Ok(BonyParts {
            ta_b: zero(),
            tb_a: zero(),
            remainder: product.clone(),
            product,
            truncation,
            scale,
        });
    };
    let bands: Vec<Band> = (lo..=hi)
        .map(|j| if j == lo { Band::LowPass(lo + 1) } else { Band::Shell(j) })
        .collect();
    let split = |f: &SpectralField| -> Vec<PhysicalField> {
        bands
            .par_iter()
            .map(|&band| {
                f.apply_real_multiplier(|k| band.multiplier(dir.magnitude(k, beta)))
                    .to_physical()
            })
            .collect()
    };
    let pa = split(a);
    let pb = split(b);
    let m = bands.len();
    let mut ta_b = PhysicalField::zeros(&grid, Rank::Scalar);
    let mut tb_a = PhysicalField::zeros(&grid, Rank::Scalar);
    let mut rem = PhysicalField::zeros(&grid, Rank::Scalar);
    let mut low_a = PhysicalField::zeros(&grid, Rank::Scalar);
    let mut low_b = PhysicalField::zeros(&grid, Rank::Scalar);
    for i in 0..m {
        // low_* holds S_{k-1} = Σ_{j ≤ k-2} Δ_j
        if i >= 2 {
            accumulate(&mut low_a, &pa[i - 2]);
            accumulate(&mut low_b, &pb[i - 2]);
        }
        ta_b.add_product(1.0, &low_a, &pb[i]);
        tb_a.add_product(1.0, &low_b, &pa[i]);
        for j in i.saturating_sub(1)..=(i + 1).min(m - 1) {
            rem.add_product(1.0, &pa[i], &pb[j]);
        }
    }
    Ok(BonyParts {
        ta_b: ta_b.to_spectral().dealiased(),
        tb_a: tb_a.to_spectral().dealiased(),
        remainder: rem.to_spectral().dealiased(),
        product,
        truncation,
        scale,
    })
}

fn accumulate(acc: &mut PhysicalField, x: &PhysicalField) {
    for (s, v) in acc.values_mut().iter_mut().zip(x.values()) {
        *s += v;
    }
}

/// One row of a norm report.
#[derive(Clone, Debug, Serialize)]
pub struct NormRow {
    pub field_id: String,
    pub kind: NormKind,
    pub s1: f64,
    pub s2: f64,
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    pub value: f64,
    pub excluded_mass: f64,
}

impl NormRow {
    pub fn new(field_id: impl Into<String>, spec: &NormSpec, report: &NormReport) -> NormRow {
        NormRow {
            field_id: field_id.into(),
            kind: spec.kind,
            s1: spec.s1,
            s2: spec.s2,
            p: spec.p,
            q1: spec.q1,
            q2: spec.q2,
            value: report.value,
            excluded_mass: report.excluded_mass,
        }
    }
}

pub fn write_norm_csv<W: Write>(w: W, rows: &[NormRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Mode with `|ξ×β|` or `|ξ·β|` placed on the `φ` plateau of shell `j`,
/// useful for building exact single-band fields.
pub fn on_plateau(r: f64, j: i32) -> bool {
    let x = r * 2f64.powi(-j);
    x >= PHI_PLATEAU.0 && x <= PHI_PLATEAU.1
}
