//! Pseudo-spectral incompressible Navier–Stokes on the periodic torus.
//!
//! The nonlinear term is formed in physical space, truncated by the 2/3 mask
//! and Leray-projected; viscosity is handled by an exact integrating factor
//! inside classical RK4. Frame-adapted derived quantities (vertical vorticity
//! `ω^β`, vertical stretching `∂_β u^β`, the horizontal Helmholtz split and the
//! frame form of the pressure) live here as well.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PhysicalField, Rank, SpectralField};
use crate::frame::FrameSample;
use crate::grid::{Grid, VOLUME};
use crate::ops::{self, derivative, divergence_ratio, inv_laplacian_unchecked, laplacian, leray_unchecked, partial};
use crate::snapshot;
use crate::vec3::{cross, dot, norm, Vec3};

/// Admissible `‖ξ·û‖/‖û‖`.
pub const DIVERGENCE_TOL: f64 = 1e-12;
/// Largest CFL number accepted by [`step`].
pub const CFL_LIMIT: f64 = 1.0;
/// Fraction of the CFL limit used for the default time step.
pub const DEFAULT_CFL: f64 = 0.5;
/// `|ξ×β|` below this counts as a mode on the `β` line.
const LINE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct FlowState {
    pub t: f64,
    pub u: SpectralField,
    pub nu_visc: f64,
    /// `∫_0^t 2ν‖∇u‖² ds`, accumulated with the integrator's stage weights.
    pub dissipated: f64,
}

impl FlowState {
    pub fn new(u: SpectralField, nu_visc: f64) -> Result<Self> {
        u.expect_vector()?;
        u.require_mean_zero()?;
        let ratio = divergence_ratio(&u);
        if ratio > DIVERGENCE_TOL {
            return Err(Error::Domain(format!(
                "velocity is not divergence-free: |ξ·û|/|û| = {ratio:.3e}"
            )));
        }
        if !(nu_visc >= 0.0) || !nu_visc.is_finite() {
            return Err(Error::Domain(format!("viscosity must be nonnegative, got {nu_visc}")));
        }
        Ok(FlowState {
            t: 0.0,
            u,
            nu_visc,
            dissipated: 0.0,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    /// `½‖u‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.u.l2_norm().powi(2)
    }

    /// `½‖∇u‖²`, equal to `½‖ω‖²` for divergence-free `u`.
    pub fn enstrophy(&self) -> f64 {
        0.5 * gradient_norm_sq(&self.u)
    }

    /// Largest grid-point value of `|∇·u|`.
    pub fn max_divergence(&self) -> f64 {
        ops::divergence(&self.u)
            .map(|d| d.to_physical().max_abs())
            .unwrap_or(f64::NAN)
    }

    /// Relative defect of `‖u(t)‖² + 2ν∫‖∇u‖² = ‖u(0)‖²`.
    pub fn energy_identity_defect(&self, initial_energy: f64) -> f64 {
        let lhs = 2.0 * self.energy() + self.dissipated;
        let rhs = 2.0 * initial_energy;
        (lhs - rhs).abs() / rhs.abs().max(1e-300)
    }

    /// Largest `Σ|u_i| dt / h` over grid points.
    pub fn cfl(&self, dt: f64) -> f64 {
        max_speed(&self.u) * dt / self.grid().spacing()
    }

    /// `DEFAULT_CFL · h / max Σ|u_i|`, or `None` for the zero field.
    pub fn default_dt(&self) -> Option<f64> {
        let s = max_speed(&self.u);
        (s > 0.0).then(|| DEFAULT_CFL * self.grid().spacing() / s)
    }
}

fn max_speed(u: &SpectralField) -> f64 {
    let p = u.to_physical();
    let len = u.grid().len();
    (0..len)
        .map(|i| (0..3).map(|c| p.values()[c * len + i].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖∇u‖² = (2π)³ Σ |ξ|² |û|²`.
pub fn gradient_norm_sq(u: &SpectralField) -> f64 {
    ops::sobolev_norm(u, 1.0).map(|v| v * v).unwrap_or(f64::NAN)
}

/// Grid-point values of `∂_i u_j`, indexed `[i][j]`.
pub struct PhysicalGradient {
    pub values: [[Vec<f64>; 3]; 3],
}

impl PhysicalGradient {
    pub fn new(u: &SpectralField) -> Result<Self> {
        u.expect_vector()?;
        let comps = [u.component_field(0), u.component_field(1), u.component_field(2)];
        let values = std::array::from_fn(|i| {
            std::array::from_fn(|j| partial(&comps[j], i).to_physical().values().to_vec())
        });
        Ok(PhysicalGradient { values })
    }

    /// `∂_a u^b = a_i b_j ∂_i u_j` for constant vectors `a`, `b`, at point `p`.
    #[inline]
    pub fn along(&self, p: usize, a: Vec3, b: Vec3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..3 {
                s += a[i] * b[j] * self.values[i][j][p];
            }
        }
        s
    }
}

/// Truncated advection `mask(u·∇u)`.
pub fn advection(u: &SpectralField) -> Result<SpectralField> {
    u.expect_vector()?;
    let grid = u.grid();
    let len = grid.len();
    let up = u.to_physical();
    let g = PhysicalGradient::new(u)?;
    let mut out = vec![0.0; 3 * len];
    for j in 0..3 {
        let dst = &mut out[j * len..(j + 1) * len];
        for i in 0..3 {
            let ui = up.component(i);
            let gij = &g.values[i][j];
            for p in 0..len {
                dst[p] += ui[p] * gij[p];
            }
        }
    }
    Ok(PhysicalField::from_values(grid, Rank::Vector3, out)?.to_spectral().dealiased())
}

/// `-P(mask(u·∇u))`, the part of `∂_t u` not carried by the integrating factor.
pub fn nonlinear_rhs(u: &SpectralField) -> Result<SpectralField> {
    let mut n = leray_unchecked(&advection(u)?);
    n.scale(-1.0);
    Ok(n)
}

/// Full right side `∂_t u = -P(mask(u·∇u)) + νΔu`.
pub fn time_derivative(u: &SpectralField, nu_visc: f64) -> Result<SpectralField> {
    let mut r = nonlinear_rhs(u)?;
    r.axpy(nu_visc, &laplacian(u));
    Ok(r)
}

fn decay(u: &SpectralField, nu_visc: f64, dt: f64) -> SpectralField {
    u.apply_real_multiplier(|k| (-nu_visc * dot(k, k) * dt).exp())
}

/// One integrating-factor RK4 step.
pub fn step(state: &FlowState, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let cfl = state.cfl(dt);
    if cfl > CFL_LIMIT {
        return Err(Error::StepRejected {
            cfl,
            suggested_dt: state.default_dt().unwrap_or(dt),
        });
    }
    let nu = state.nu_visc;
    let u = &state.u;
    let half = 0.5 * dt;

    let k1 = nonlinear_rhs(u)?;
    let mut a = u.clone();
    a.axpy(half, &k1);
    let a = decay(&a, nu, half);
    let k2 = nonlinear_rhs(&a)?;
    let mut b = decay(u, nu, half);
    b.axpy(half, &k2);
    let k3 = nonlinear_rhs(&b)?;
    let mut c = decay(u, nu, dt);
    c.axpy(dt, &decay(&k3, nu, half));
    let k4 = nonlinear_rhs(&c)?;

    let mut next = decay(u, nu, dt);
    next.axpy(dt / 6.0, &decay(&k1, nu, dt));
    let mut mid = k2;
    mid += &k3;
    next.axpy(dt / 3.0, &decay(&mid, nu, half));
    next.axpy(dt / 6.0, &k4);

    let dissipation = |v: &SpectralField| 2.0 * nu * gradient_norm_sq(v);
    let spent = dt / 6.0 * (dissipation(u) + 2.0 * dissipation(&a) + 2.0 * dissipation(&b) + dissipation(&c));

    Ok(FlowState {
        t: state.t + dt,
        u: next,
        nu_visc: nu,
        dissipated: state.dissipated + spent,
    })
}

// ---------------------------------------------------------------------------
// Pressure

/// `-Δ⁻¹ ∇·mask(u·∇u)`.
pub fn pressure_leray(u: &SpectralField) -> Result<SpectralField> {
    let adv = advection(u)?;
    let mut p = inv_laplacian_unchecked(&ops::divergence(&adv)?);
    p.scale(-1.0);
    Ok(p)
}

/// `-Δ⁻¹ Σ_{ℓ,m} ∂_ℓ u^m ∂_m u^ℓ` with `ℓ, m` running over the frame.
pub fn pressure(u: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    frame.validate()?;
    u.expect_vector()?;
    let grid = u.grid();
    let len = grid.len();
    let g = PhysicalGradient::new(u)?;
    let axes = [frame.tau, frame.nu, frame.beta];
    let mut src = vec![0.0; len];
    for p in 0..len {
        let mut s = 0.0;
        for l in axes {
            for m in axes {
                s += g.along(p, l, m) * g.along(p, m, l);
            }
        }
        src[p] = s;
    }
    let src = PhysicalField::from_values(grid, Rank::Scalar, src)?.to_spectral().dealiased();
    let mut p = inv_laplacian_unchecked(&src);
    p.scale(-1.0);
    Ok(p)
}

// ---------------------------------------------------------------------------
// Frame-adapted quantities

/// `∂_τ u^ν - ∂_ν u^τ`.
pub fn vertical_vorticity(u: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    let unu = u.dot_const(frame.nu)?;
    let utau = u.dot_const(frame.tau)?;
    Ok(derivative(&unu, frame.tau) - derivative(&utau, frame.nu))
}

/// `∂_β u^β`.
pub fn vertical_stretching(u: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    Ok(derivative(&u.dot_const(frame.beta)?, frame.beta))
}

/// `u^h = u - (u·β)β`.
pub fn horizontal_part(u: &SpectralField, beta: Vec3) -> Result<SpectralField> {
    let ub = u.dot_const(beta)?;
    Ok(u - &ub.times_const_vector(beta)?)
}

fn on_beta_line(k: [f64; 3], beta: Vec3) -> bool {
    dot(k, k) > 0.0 && norm(cross(k, beta)) < LINE_TOL
}

/// `Δ_{β⊥}⁻¹` (multiplier `-1/|ξ×β|²`), zero where `ξ×β = 0`.
pub fn inv_horizontal_laplacian(f: &SpectralField, beta: Vec3) -> SpectralField {
    f.apply_real_multiplier(|k| {
        let h2 = norm(cross(k, beta)).powi(2);
        if h2 < LINE_TOL * LINE_TOL {
            0.0
        } else {
            -1.0 / h2
        }
    })
}

/// Zero every mode with `ξ×β = 0`, `ξ ≠ 0`; returns the removed L² mass squared.
fn strip_beta_line(f: &mut SpectralField, beta: Vec3) -> f64 {
    let grid = f.grid().clone();
    let len = grid.len();
    let comps = f.rank().components();
    let coeffs = f.coeffs_mut();
    let mut removed = 0.0;
    for idx in 0..len {
        if on_beta_line(grid.k(idx), beta) {
            for c in 0..comps {
                removed += coeffs[c * len + idx].norm_sqr();
                coeffs[c * len + idx] = Complex64::default();
            }
        }
    }
    removed * VOLUME
}

#[derive(Clone, Debug)]
pub struct DerivedFields {
    pub omega_beta: SpectralField,
    pub dbeta_ubeta: SpectralField,
    /// `∇_h^⊥ Δ_{β⊥}⁻¹ ω^β`.
    pub u_curl: SpectralField,
    /// `-∇_h Δ_{β⊥}⁻¹ ∂_β u^β`.
    pub u_div: SpectralField,
    /// L² mass squared of `u^h` on modes with `ξ×β = 0`, left out of both parts.
    pub excluded_mass: f64,
    /// `u^h` with those modes removed; equals `u_curl + u_div`.
    pub u_h_regular: SpectralField,
}

impl DerivedFields {
    /// `‖u_curl + u_div - u^h_regular‖ / ‖u^h_regular‖`.
    pub fn reconstruction_defect(&self) -> f64 {
        let sum = &self.u_curl + &self.u_div;
        let d = (&sum - &self.u_h_regular).coeff_norm();
        d / self.u_h_regular.coeff_norm().max(1e-300)
    }
}

/// `∇_h f = τ ∂_τ f + ν ∂_ν f`.
pub fn horizontal_gradient(f: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    let a = derivative(f, frame.tau).times_const_vector(frame.tau)?;
    let b = derivative(f, frame.nu).times_const_vector(frame.nu)?;
    Ok(a + b)
}

/// `∇_h^⊥ f = -τ ∂_ν f + ν ∂_τ f`.
pub fn horizontal_perp_gradient(f: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    let a = derivative(f, frame.nu).times_const_vector(frame.tau)?;
    let b = derivative(f, frame.tau).times_const_vector(frame.nu)?;
    Ok(b - a)
}

/// `∇_h · v = ∂_τ v^τ + ∂_ν v^ν`.
pub fn horizontal_divergence(v: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    Ok(derivative(&v.dot_const(frame.tau)?, frame.tau) + derivative(&v.dot_const(frame.nu)?, frame.nu))
}

/// `∇_h^⊥ · v = ∂_τ v^ν - ∂_ν v^τ`.
pub fn horizontal_curl(v: &SpectralField, frame: &FrameSample) -> Result<SpectralField> {
    vertical_vorticity(v, frame)
}

pub fn derived_quantities(u: &SpectralField, frame: &FrameSample) -> Result<DerivedFields> {
    frame.validate()?;
    u.expect_vector()?;
    let omega_beta = vertical_vorticity(u, frame)?;
    let dbeta_ubeta = vertical_stretching(u, frame)?;
    let u_curl = horizontal_perp_gradient(&inv_horizontal_laplacian(&omega_beta, frame.beta), frame)?;
    let mut u_div = horizontal_gradient(&inv_horizontal_laplacian(&dbeta_ubeta, frame.beta), frame)?;
    u_div.scale(-1.0);
    let mut u_h_regular = horizontal_part(u, frame.beta)?;
    let excluded_mass = strip_beta_line(&mut u_h_regular, frame.beta);
    if excluded_mass > 0.0 {
        log::debug!("u^h carries {excluded_mass:.3e} on modes parallel to beta");
    }
    Ok(DerivedFields {
        omega_beta,
        dbeta_ubeta,
        u_curl,
        u_div,
        excluded_mass,
        u_h_regular,
    })
}

// ---------------------------------------------------------------------------
// Initial data

/// ABC flow `(A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)`,
/// an eigenfunction of curl with eigenvalue 1.
pub fn abc_flow(grid: &Grid, a: f64, b: f64, c: f64) -> SpectralField {
    SpectralField::from_fn_vector(grid, |x, y, z| {
        [a * z.sin() + c * y.cos(), b * x.sin() + a * z.cos(), c * y.sin() + b * x.cos()]
    })
}

/// `(cos x sin y, -sin x cos y, 0)`.
pub fn taylor_green(grid: &Grid) -> SpectralField {
    SpectralField::from_fn_vector(grid, |x, y, _| [x.cos() * y.sin(), -x.sin() * y.cos(), 0.0])
}

/// `(0, cos x, 0)`.
pub fn shear_flow(grid: &Grid) -> SpectralField {
    SpectralField::from_fn_vector(grid, |x, _, _| [0.0, x.cos(), 0.0])
}

/// Random smooth divergence-free field with `|ξ_i| <= kmax` and a Gaussian
/// spectrum, scaled to root-mean-square speed `rms`. Draws run over the integer
/// cube, so a seed gives the same field on every grid whose mask holds it.
pub fn random_divergence_free(grid: &Grid, seed: u64, kmax: i64, rms: f64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let mut u = SpectralField::zeros(grid, Rank::Vector3);
    let kmax = kmax.max(1);
    let width = kmax as f64 * 0.6;
    {
        let coeffs = u.coeffs_mut();
        for c in 0..3 {
            for k0 in -kmax..=kmax {
                for k1 in -kmax..=kmax {
                    for k2 in -kmax..=kmax {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        if [k0, k1, k2].iter().any(|k| 2 * k.abs() >= grid.n() as i64) {
                            continue;
                        }
                        let idx = grid.index([k0, k1, k2]);
                        if !grid.in_mask(idx) {
                            continue;
                        }
                        let k = grid.k(idx);
                        let amp = (-dot(k, k) / (2.0 * width * width)).exp();
                        coeffs[c * len + idx] = Complex64::new(re, im) * amp;
                    }
                }
            }
        }
    }
    u.symmetrize();
    u.remove_mean();
    let mut u = leray_unchecked(&u);
    let current = u.l2_norm() / VOLUME.sqrt();
    if current > 0.0 {
        u.scale(rms / current);
    }
    u
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Abc,
    TaylorGreen,
    RandomSeeded,
    File(PathBuf),
}

impl std::str::FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abc" => Ok(InitKind::Abc),
            "taylor-green" => Ok(InitKind::TaylorGreen),
            "random-seeded" | "random" => Ok(InitKind::RandomSeeded),
            other => match other.strip_prefix("file:") {
                Some(p) => Ok(InitKind::File(PathBuf::from(p))),
                None if Path::new(other).exists() => Ok(InitKind::File(PathBuf::from(other))),
                None => Err(Error::Config(format!(
                    "unknown initial condition '{other}' (abc, taylor-green, random-seeded, file:PATH)"
                ))),
            },
        }
    }
}

pub fn initial_field(grid: &Grid, init: &InitKind, seed: u64) -> Result<SpectralField> {
    Ok(match init {
        InitKind::Abc => abc_flow(grid, 1.0, 1.0, 1.0),
        InitKind::TaylorGreen => taylor_green(grid),
        InitKind::RandomSeeded => random_divergence_free(grid, seed, (grid.dealias_kmax() / 2).max(1), 1.0),
        InitKind::File(p) => snapshot::load(p, Some(grid))?,
    })
}

// ---------------------------------------------------------------------------
// Runs

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    pub max_div: f64,
}

impl DiagnosticsRow {
    pub fn of(state: &FlowState) -> Self {
        DiagnosticsRow {
            t: state.t,
            energy: state.energy(),
            enstrophy: state.enstrophy(),
            max_div: state.max_divergence(),
        }
    }
}

/// Advance `steps` steps of size `dt`, handing every state (including the
/// initial one) to `visit`.
pub fn integrate(
    initial: FlowState,
    dt: f64,
    steps: usize,
    mut visit: impl FnMut(usize, &FlowState) -> Result<()>,
) -> Result<FlowState> {
    let mut state = initial;
    visit(0, &state)?;
    for k in 1..=steps {
        state = step(&state, dt)?;
        visit(k, &state)?;
    }
    Ok(state)
}

/// Every `every`-th state of a run, in memory.
pub fn record(initial: FlowState, dt: f64, steps: usize, every: usize) -> Result<Vec<FlowState>> {
    let every = every.max(1);
    let mut out = Vec::new();
    integrate(initial, dt, steps, |k, s| {
        if k % every == 0 || k == steps {
            out.push(s.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub step: usize,
    pub t: f64,
    pub nu: f64,
    pub dissipated: f64,
    pub file: String,
}

pub const INDEX_FILE: &str = "index.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";

/// Run and write snapshots (`u_<step>.alp`), `index.csv` and `diagnostics.csv`
/// into `dir`.
pub fn run_to_dir(initial: FlowState, dt: f64, steps: usize, snapshot_every: usize, dir: &Path) -> Result<FlowState> {
    fs::create_dir_all(dir)?;
    let every = snapshot_every.max(1);
    let mut diag = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(DIAGNOSTICS_FILE))?));
    let mut index = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(INDEX_FILE))?));
    let last = integrate(initial, dt, steps, |k, s| {
        diag.serialize(DiagnosticsRow::of(s))?;
        if k % every == 0 || k == steps {
            let file = format!("u_{k:06}.alp");
            snapshot::save(dir.join(&file), &s.u)?;
            index.serialize(IndexRow {
                step: k,
                t: s.t,
                nu: s.nu_visc,
                dissipated: s.dissipated,
                file,
            })?;
        }
        Ok(())
    })?;
    diag.flush()?;
    index.flush()?;
    Ok(last)
}

/// Load the states listed in a run directory's index.
pub fn load_dir(dir: &Path, grid: Option<&Grid>) -> Result<Vec<FlowState>> {
    let mut rdr = csv::Reader::from_path(dir.join(INDEX_FILE))?;
    let mut out = Vec::new();
    let mut grid = grid.cloned();
    for row in rdr.deserialize::<IndexRow>() {
        let row = row?;
        let u = snapshot::load(dir.join(&row.file), grid.as_ref())?;
        if grid.is_none() {
            grid = Some(u.grid().clone());
        }
        out.push(FlowState {
            t: row.t,
            u,
            nu_visc: row.nu,
            dissipated: row.dissipated,
        });
    }
    if out.is_empty() {
        return Err(Error::Config(format!("{} lists no snapshots", dir.join(INDEX_FILE).display())));
    }
    Ok(out)
}

/// Diagnostics for a sequence of states, as CSV.
pub fn write_diagnostics<W: Write>(w: W, states: &[FlowState]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for s in states {
        wtr.serialize(DiagnosticsRow::of(s))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn rel(a: &SpectralField, b: &SpectralField) -> f64 {
        (a - b).coeff_norm() / b.coeff_norm().max(1e-300)
    }

    #[test]
    fn beltrami_decays_exactly() {
        let g = make_grid(32).unwrap();
        let u0 = abc_flow(&g, 1.0, 1.0, 1.0);
        let s0 = FlowState::new(u0.clone(), 1.0).unwrap();
        let e0 = s0.energy();
        let end = integrate(s0, 1e-3, 100, |_, _| Ok(())).unwrap();
        assert!((end.t - 0.1).abs() < 1e-12);
        let exact = u0.to_physical();
        let got = end.u.to_physical();
        let f = (-end.t).exp();
        let err = got
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - f * b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "pointwise error {err:e}");
        assert!((end.energy() / e0 - (-2.0 * end.t).exp()).abs() < 1e-7);
        assert!(end.energy_identity_defect(e0) < 1e-8);
    }

    #[test]
    fn zero_and_shear_flows() {
        let g = make_grid(16).unwrap();
        let zero = FlowState::new(SpectralField::zeros(&g, Rank::Vector3), 1.0).unwrap();
        let z = step(&zero, 0.01).unwrap();
        assert_eq!(z.u.coeff_norm(), 0.0);
        let u0 = shear_flow(&g);
        assert!(nonlinear_rhs(&u0).unwrap().coeff_norm() < 1e-15);
        let s = FlowState::new(u0.clone(), 0.5).unwrap();
        let end = integrate(s, 0.01, 20, |_, _| Ok(())).unwrap();
        assert!(rel(&end.u, &(&u0 * (-0.5 * end.t).exp())) < 1e-13);
    }

    #[test]
    fn taylor_green_right_side() {
        let g = make_grid(16).unwrap();
        let u = taylor_green(&g);
        let adv = advection(&u).unwrap();
        let expect = SpectralField::from_fn_vector(&g, |x, y, _| {
            [-0.5 * (2.0 * x).sin(), -0.5 * (2.0 * y).sin(), 0.0]
        });
        assert!(adv.max_abs_diff(&expect) < 1e-12);
        let rhs = time_derivative(&u, 0.3).unwrap();
        assert!(rhs.max_abs_diff(&(&u * -0.6)) < 1e-12);
        let p = pressure_leray(&u).unwrap();
        let pe = SpectralField::from_fn_scalar(&g, |x, y, _| -0.25 * ((2.0 * x).cos() + (2.0 * y).cos()));
        assert!(p.max_abs_diff(&pe) < 1e-12);
    }

    #[test]
    fn beltrami_nonlinearity_is_a_gradient() {
        let g = make_grid(16).unwrap();
        let u = abc_flow(&g, 1.0, 0.7, 0.4);
        assert!(nonlinear_rhs(&u).unwrap().coeff_norm() < 1e-14);
        let p = pressure_leray(&u).unwrap();
        let mut expect = u.to_physical();
        let len = g.len();
        let half_sq: Vec<f64> = (0..len)
            .map(|i| -0.5 * (0..3).map(|c| expect.values()[c * len + i].powi(2)).sum::<f64>())
            .collect();
        expect = PhysicalField::from_values(&g, Rank::Scalar, half_sq).unwrap();
        let expect = expect.to_spectral().without_mean();
        assert!(p.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn frame_pressure_matches_leray_pressure() {
        let g = make_grid(16).unwrap();
        let u = random_divergence_free(&g, 11, 4, 1.0);
        let reference = pressure_leray(&u).unwrap();
        for beta in [[0.0, 0.0, 1.0], [0.0, 0.6, 0.8], [0.48, -0.6, 0.64]] {
            let frame = FrameSample::for_beta(beta);
            let p = pressure(&u, &frame).unwrap();
            assert!(p.max_abs_diff(&reference) < 1e-11 * reference.coeff_norm().max(1.0));
        }
        let bad = FrameSample {
            tau: [1.0, 0.0, 0.0],
            nu: [1.0, 0.0, 0.0],
            beta: [0.0, 0.0, 1.0],
        };
        assert!(matches!(pressure(&u, &bad), Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn stream_function_flow() {
        let g = make_grid(16).unwrap();
        // ψ = sin x sin y, u = (-∂_y ψ, ∂_x ψ, 0)
        let u = SpectralField::from_fn_vector(&g, |x, y, _| [-x.sin() * y.cos(), x.cos() * y.sin(), 0.0]);
        let frame = FrameSample::axis_aligned(2);
        let d = derived_quantities(&u, &frame).unwrap();
        let expect = SpectralField::from_fn_scalar(&g, |x, y, _| -2.0 * x.sin() * y.sin());
        assert!(d.omega_beta.max_abs_diff(&expect) < 1e-13);
        assert!(d.u_div.coeff_norm() < 1e-14);
        assert!(rel(&d.u_curl, &horizontal_part(&u, frame.beta).unwrap()) < 1e-13);
    }

    #[test]
    fn vertical_flow_has_no_horizontal_part() {
        let g = make_grid(16).unwrap();
        let u = SpectralField::from_fn_vector(&g, |x, _, _| [0.0, 0.0, x.cos()]);
        let d = derived_quantities(&u, &FrameSample::axis_aligned(2)).unwrap();
        assert_eq!(d.u_curl.coeff_norm(), 0.0);
        assert_eq!(d.u_div.coeff_norm(), 0.0);
        assert!(d.dbeta_ubeta.coeff_norm() < 1e-15);
    }

    #[test]
    fn helmholtz_split_on_oblique_frame() {
        let g = make_grid(16).unwrap();
        let u = random_divergence_free(&g, 5, 5, 1.0);
        let frame = FrameSample::for_beta([0.0, 0.6, 0.8]);
        let d = derived_quantities(&u, &frame).unwrap();
        assert!(d.excluded_mass > 0.0);
        assert!(d.reconstruction_defect() < 1e-11);
        let div_curl = horizontal_divergence(&d.u_curl, &frame).unwrap();
        let curl_div = horizontal_curl(&d.u_div, &frame).unwrap();
        assert!(div_curl.coeff_norm() < 1e-11 * d.omega_beta.coeff_norm());
        assert!(curl_div.coeff_norm() < 1e-11 * d.omega_beta.coeff_norm());
        let hdiv = horizontal_divergence(&horizontal_part(&u, frame.beta).unwrap(), &frame).unwrap();
        assert!((hdiv + d.dbeta_ubeta.clone()).coeff_norm() < 1e-11 * d.dbeta_ubeta.coeff_norm());
    }

    #[test]
    fn axis_permutation_covariance() {
        let g = make_grid(8).unwrap();
        let n = g.n();
        let u = random_divergence_free(&g, 2, 2, 1.0);
        // v(x) = P u(P⁻¹x) with P(x0, x1, x2) = (x2, x0, x1)
        let up = u.to_physical();
        let len = g.len();
        let at = |i0: usize, i1: usize, i2: usize| (i0 * n + i1) * n + i2;
        let mut vals = vec![0.0; 3 * len];
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let src = at(i1, i2, i0);
                    let dst = at(i0, i1, i2);
                    vals[dst] = up.values()[2 * len + src];
                    vals[len + dst] = up.values()[src];
                    vals[2 * len + dst] = up.values()[len + src];
                }
            }
        }
        let v = PhysicalField::from_values(&g, Rank::Vector3, vals).unwrap().to_spectral();
        let f = FrameSample::axis_aligned(0);
        let fp = FrameSample::axis_aligned(1);
        let du = derived_quantities(&u, &f).unwrap().omega_beta.to_physical();
        let dv = derived_quantities(&v, &fp).unwrap().omega_beta.to_physical();
        let mut worst: f64 = 0.0;
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    worst = worst.max((dv.values()[at(i0, i1, i2)] - du.values()[at(i1, i2, i0)]).abs());
                }
            }
        }
        assert!(worst < 1e-12, "{worst:e}");
    }

    #[test]
    fn random_run_stays_divergence_free() {
        let g = make_grid(16).unwrap();
        let u = random_divergence_free(&g, 9, 4, 1.0);
        let s = FlowState::new(u, 0.1).unwrap();
        let e0 = s.energy();
        let dt = s.default_dt().unwrap().min(0.01);
        let end = integrate(s, dt, 10, |_, st| {
            assert!(divergence_ratio(&st.u) < DIVERGENCE_TOL);
            Ok(())
        })
        .unwrap();
        assert!(end.energy() < e0);
        let d = end.energy_identity_defect(e0);
        assert!(d < 1e-6, "energy identity defect {d:e}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let g = make_grid(16).unwrap();
        let s = FlowState::new(abc_flow(&g, 1.0, 1.0, 1.0), 1.0).unwrap();
        match step(&s, 1.0) {
            Err(Error::StepRejected { cfl, suggested_dt }) => {
                assert!(cfl > CFL_LIMIT);
                assert!(s.cfl(suggested_dt) <= DEFAULT_CFL + 1e-12);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn run_directory_roundtrip() {
        let g = make_grid(8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let s = FlowState::new(taylor_green(&g), 1.0).unwrap();
        run_to_dir(s, 0.01, 5, 2, dir.path()).unwrap();
        let states = load_dir(dir.path(), None).unwrap();
        assert_eq!(states.len(), 4);
        assert!((states[3].t - 0.05).abs() < 1e-12);
        let diag = std::fs::read_to_string(dir.path().join(DIAGNOSTICS_FILE)).unwrap();
        assert_eq!(diag.lines().next().unwrap(), "t,energy,enstrophy,max_div");
        assert_eq!(diag.lines().count(), 7);
    }
}
