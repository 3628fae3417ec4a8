//! Frame-adapted diagnostics along a flow trajectory.
//!
//! Every time derivative is taken analytically from the solver's right side,
//! so the balance laws checked here hold to rounding error on band-limited
//! states rather than to a differencing error.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PhysicalField, Rank, SpectralField};
use crate::frame::{FrameProvider, FrameRates, FrameSample};
use crate::grid::VOLUME;
use crate::ns::{self, FlowState, PhysicalGradient};
use crate::ops::{self, derivative, laplacian, sobolev_norm};
use crate::vec3::{add, cross, dot};

/// Floor of relative-residual denominators.
pub const RESIDUAL_FLOOR: f64 = 1e-300;

/// `‖u·β‖²` in `Ḣ^{3/2}`.
pub fn criterion_integrand(u: &SpectralField, beta: [f64; 3]) -> Result<f64> {
    u.require_mean_zero()?;
    let ub = u.dot_const(beta)?;
    Ok(sobolev_norm(&ub, 1.5)?.powi(2))
}

/// `min_i ‖u^i‖²` in `Ḣ^{3/2}` over the coordinate components.
pub fn min_component_integrand(u: &SpectralField) -> Result<f64> {
    let mut best = f64::INFINITY;
    for c in 0..3 {
        best = best.min(sobolev_norm(&u.component_field(c), 1.5)?.powi(2));
    }
    Ok(best)
}

/// Frame and frame rates at one instant.
#[derive(Clone, Copy, Debug)]
pub struct FrameState {
    pub frame: FrameSample,
    pub rates: FrameRates,
}

impl FrameState {
    pub fn constant(frame: FrameSample) -> Self {
        FrameState {
            frame,
            rates: FrameRates::zero(),
        }
    }

    /// Sample a provider. Without `with_rates` the provider must be constant
    /// at `t`; a moving frame without its derivatives is a misuse.
    pub fn from_provider(p: &dyn FrameProvider, t: f64, with_rates: bool) -> Result<Self> {
        let frame = p.frame_at(t);
        let rates = p.rates_at(t);
        if !with_rates && !rates.is_zero() {
            return Err(Error::Misuse(format!(
                "frame moves at t = {t} (|rates|² = {:.3e}) but its derivatives were not supplied",
                rates.energy()
            )));
        }
        Ok(FrameState {
            frame,
            rates: if with_rates { rates } else { FrameRates::zero() },
        })
    }
}

fn scalar_from(grid: &crate::grid::Grid, values: Vec<f64>) -> SpectralField {
    PhysicalField::from_values(grid, Rank::Scalar, values)
        .expect("one value per grid point")
        .to_spectral()
        .dealiased()
}

/// `∂_a u^b` at grid points, indexed over the frame `(τ, ν, β)`.
struct FrameGradient {
    g: [[Vec<f64>; 3]; 3],
}

impl FrameGradient {
    fn new(u: &SpectralField, frame: &FrameSample) -> Result<Self> {
        let pg = PhysicalGradient::new(u)?;
        let axes = [frame.tau, frame.nu, frame.beta];
        let len = u.grid().len();
        let g = std::array::from_fn(|a| {
            std::array::from_fn(|b| (0..len).map(|p| pg.along(p, axes[a], axes[b])).collect())
        });
        Ok(FrameGradient { g })
    }

    /// `∂_β u^h · ∇_h^⊥ u^β = -∂_β u^τ ∂_ν u^β + ∂_β u^ν ∂_τ u^β`.
    fn stretch_perp(&self, p: usize) -> f64 {
        let g = &self.g;
        -g[2][0][p] * g[1][2][p] + g[2][1][p] * g[0][2][p]
    }

    /// `Σ_{ℓ,m ∈ {τ,ν}} ∂_ℓ u^m ∂_m u^ℓ`.
    fn horizontal_pairing(&self, p: usize) -> f64 {
        let g = &self.g;
        let mut s = 0.0;
        for l in 0..2 {
            for m in 0..2 {
                s += g[l][m][p] * g[m][l][p];
            }
        }
        s
    }

    /// `Σ_{ℓ ∈ {τ,ν}} ∂_β u^ℓ ∂_ℓ u^β`.
    fn cross_pairing(&self, p: usize) -> f64 {
        let g = &self.g;
        g[2][0][p] * g[0][2][p] + g[2][1][p] * g[1][2][p]
    }

    /// `(∂_a u · ∇ u^b)` at point `p`.
    fn transport(&self, p: usize, a: usize, b: usize) -> f64 {
        (0..3).map(|k| self.g[a][k][p] * self.g[k][b][p]).sum()
    }

    /// `∇_h · u^h`.
    fn horizontal_div(&self, p: usize) -> f64 {
        self.g[0][0][p] + self.g[1][1][p]
    }
}

/// `∫ a b c` by grid quadrature; exact for three fields inside the 2/3 mask.
fn triple(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let n = a.len() as f64;
    VOLUME / n * a.iter().zip(b).zip(c).map(|((x, y), z)| x * y * z).sum::<f64>()
}

/// Truncated `u·∇f` for a scalar `f`.
fn transport_scalar(u: &PhysicalField, f: &SpectralField) -> SpectralField {
    let grid = f.grid();
    let len = grid.len();
    let mut out = vec![0.0; len];
    for i in 0..3 {
        let d = ops::partial(f, i).to_physical();
        let ui = u.component(i);
        for p in 0..len {
            out[p] += ui[p] * d.values()[p];
        }
    }
    scalar_from(grid, out)
}

fn rel_residual(res: &SpectralField, scale: &[f64]) -> f64 {
    let s = scale.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    res.l2_norm() / s.max(RESIDUAL_FLOOR)
}

fn rel_scalar(lhs: f64, rhs: f64, terms: &[f64]) -> f64 {
    let s = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (lhs - rhs).abs() / s.max(RESIDUAL_FLOOR)
}

/// Frame-derivative terms of the `ω^β` equation:
/// `τ'·(∇u^ν - ∂_ν u) + ν'·(∂_τ u - ∇u^τ)`.
fn vorticity_frame_terms(u: &SpectralField, fs: &FrameState) -> Result<SpectralField> {
    let (f, r) = (&fs.frame, &fs.rates);
    let a = derivative(&u.dot_const(f.nu)?, r.tau) - derivative(u, f.nu).dot_const(r.tau)?;
    let b = derivative(u, f.tau).dot_const(r.nu)? - derivative(&u.dot_const(f.tau)?, r.nu);
    Ok(a + b)
}

/// Frame-derivative term of the `∂_β u^β` equation: `β'·(∂_β u + ∇u^β)`.
fn stretching_frame_terms(u: &SpectralField, fs: &FrameState) -> Result<SpectralField> {
    let (f, r) = (&fs.frame, &fs.rates);
    Ok(derivative(u, f.beta).dot_const(r.beta)? + derivative(&u.dot_const(f.beta)?, r.beta))
}

/// `∂_β² Δ⁻¹` (multiplier `(ξ·β)²/|ξ|²`).
fn vertical_riesz(f: &SpectralField, beta: [f64; 3]) -> SpectralField {
    f.apply_real_multiplier(|k| {
        let k2 = dot(k, k);
        if k2 == 0.0 {
            0.0
        } else {
            dot(k, beta).powi(2) / k2
        }
    })
}

/// Everything the monitor evaluates at one state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeDiagnostics {
    pub t: f64,
    /// `‖u·β‖²_{Ḣ^{3/2}}`.
    pub integrand: f64,
    pub min_component: f64,
    /// `|τ'|² + |ν'|² + |β'|²`.
    pub frame_energy: f64,
    /// `‖ω^β‖² + ‖∂_β u^β‖²`.
    pub f_value: f64,
    pub df_dt: f64,
    pub omega_sq: f64,
    pub dbeta_sq: f64,
    pub grad_omega_sq: f64,
    pub grad_dbeta_sq: f64,
    pub grad_u_sq: f64,
    pub r43_omega: f64,
    pub r43_dbeta: f64,
    pub r51: f64,
    pub r56: f64,
    pub r62: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub ii1: f64,
    pub ii2: f64,
    pub ii3: f64,
    /// `∫ B` of the `‖∇u‖²` balance.
    pub b_integral: f64,
    /// Largest pointwise gap between `B` and its regrouped form, relative to `max |B|`.
    pub regroup_defect: f64,
    /// Frame pressure against the Leray pressure, relative.
    pub pressure_defect: f64,
}

/// Which terms the evolution check keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub frame_terms: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { frame_terms: true }
    }
}

/// Residuals of the evolution system for `ω^β` and `∂_β u^β`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResiduals {
    pub r_omega: f64,
    pub r_dbeta: f64,
    /// L² size of the frame-derivative terms in each equation.
    pub frame_term_omega: f64,
    pub frame_term_dbeta: f64,
}

struct Workspace {
    u: SpectralField,
    dtu: SpectralField,
    up: PhysicalField,
    fg: FrameGradient,
    omega: SpectralField,
    dbeta: SpectralField,
    /// `d/dt ω^β` along the flow, from `ω^β = (τ×ν)·curl u`.
    omega_t: SpectralField,
    /// `d/dt ∂_β u^β` along the flow.
    dbeta_t: SpectralField,
}

impl Workspace {
    fn new(u: &SpectralField, nu_visc: f64, fs: &FrameState) -> Result<Self> {
        fs.frame.validate()?;
        u.expect_vector()?;
        u.require_mean_zero()?;
        let f = &fs.frame;
        let r = &fs.rates;
        let dtu = ns::time_derivative(u, nu_visc)?;
        let omega = ns::vertical_vorticity(u, f)?;
        let dbeta = ns::vertical_stretching(u, f)?;
        let axis = cross(f.tau, f.nu);
        let axis_rate = add(cross(r.tau, f.nu), cross(f.tau, r.nu));
        let curl_u = ops::curl(u)?;
        let omega_t = ops::curl(&dtu)?.dot_const(axis)? + curl_u.dot_const(axis_rate)?;
        let ub = u.dot_const(f.beta)?;
        let dbeta_t = derivative(&dtu.dot_const(f.beta)?, f.beta)
            + derivative(&ub, r.beta)
            + derivative(u, f.beta).dot_const(r.beta)?;
        Ok(Workspace {
            u: u.clone(),
            up: u.to_physical(),
            fg: FrameGradient::new(u, f)?,
            dtu,
            omega,
            dbeta,
            omega_t,
            dbeta_t,
        })
    }
}

fn evolution_residuals(ws: &Workspace, nu_visc: f64, fs: &FrameState, opts: CheckOptions) -> Result<EvolutionResiduals> {
    let grid = ws.u.grid();
    let len = grid.len();
    let f = &fs.frame;
    let fg = &ws.fg;

    let frame_w = vorticity_frame_terms(&ws.u, fs)?;
    let adv_w = transport_scalar(&ws.up, &ws.omega);
    let diff_w = laplacian(&ws.omega) * nu_visc;
    let dbeta_p = ws.dbeta.to_physical();
    let omega_p = ws.omega.to_physical();
    let stretch = scalar_from(
        grid,
        (0..len).map(|p| dbeta_p.values()[p] * omega_p.values()[p]).collect(),
    );
    let tilt = scalar_from(grid, (0..len).map(|p| fg.stretch_perp(p)).collect());
    let mut res_w = ws.omega_t.clone();
    if opts.frame_terms {
        res_w -= &frame_w;
    }
    res_w += &adv_w;
    res_w -= &diff_w;
    res_w -= &stretch;
    res_w += &tilt;
    let scale_w = [
        ws.omega_t.l2_norm(),
        frame_w.l2_norm(),
        adv_w.l2_norm(),
        diff_w.l2_norm(),
        stretch.l2_norm(),
        tilt.l2_norm(),
    ];

    let frame_d = stretching_frame_terms(&ws.u, fs)?;
    let adv_d = transport_scalar(&ws.up, &ws.dbeta);
    let diff_d = laplacian(&ws.dbeta) * nu_visc;
    let feed = scalar_from(grid, (0..len).map(|p| fg.transport(p, 2, 2)).collect());
    let p = ns::pressure(&ws.u, f)?;
    let pbb = derivative(&derivative(&p, f.beta), f.beta);
    let mut res_d = ws.dbeta_t.clone();
    if opts.frame_terms {
        res_d -= &frame_d;
    }
    res_d += &adv_d;
    res_d -= &diff_d;
    res_d += &feed;
    res_d += &pbb;
    let scale_d = [
        ws.dbeta_t.l2_norm(),
        frame_d.l2_norm(),
        adv_d.l2_norm(),
        diff_d.l2_norm(),
        feed.l2_norm(),
        pbb.l2_norm(),
    ];

    Ok(EvolutionResiduals {
        r_omega: rel_residual(&res_w, &scale_w),
        r_dbeta: rel_residual(&res_d, &scale_d),
        frame_term_omega: frame_w.l2_norm(),
        frame_term_dbeta: frame_d.l2_norm(),
    })
}

/// Check the evolution system of `(ω^β, ∂_β u^β)` at one state.
pub fn verify_evolution_system(u: &SpectralField, nu_visc: f64, fs: &FrameState, opts: CheckOptions) -> Result<EvolutionResiduals> {
    let ws = Workspace::new(u, nu_visc, fs)?;
    evolution_residuals(&ws, nu_visc, fs, opts)
}

/// Terms and residuals of the three energy balances.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyIdentities {
    pub r51: f64,
    pub r56: f64,
    pub r62: f64,
    pub i: [f64; 3],
    pub ii: [f64; 3],
    pub b_integral: f64,
    pub regroup_defect: f64,
    /// `½ d/dt ‖ω^β‖²`, `½ d/dt ‖∂_β u^β‖²`, `½ d/dt ‖∇u‖²`.
    pub half_rates: [f64; 3],
}

fn energy_identities(ws: &Workspace, nu_visc: f64, fs: &FrameState) -> Result<EnergyIdentities> {
    let grid = ws.u.grid();
    let len = grid.len();
    let fg = &ws.fg;
    let beta = fs.frame.beta;

    // ½ d/dt‖ω^β‖² + ν‖∇ω^β‖² = I₁ + I₂ + I₃
    let half_w = ws.omega.inner(&ws.omega_t);
    let diss_w = nu_visc * sobolev_norm(&ws.omega, 1.0)?.powi(2);
    let omega_p = ws.omega.to_physical();
    let dbeta_p = ws.dbeta.to_physical();
    let tilt: Vec<f64> = (0..len).map(|p| fg.stretch_perp(p)).collect();
    let i1 = vorticity_frame_terms(&ws.u, fs)?.inner(&ws.omega);
    let i2 = triple(dbeta_p.values(), omega_p.values(), omega_p.values());
    let ones = vec![1.0; len];
    let i3 = -triple(&tilt, omega_p.values(), &ones);
    let r51 = rel_scalar(half_w + diss_w, i1 + i2 + i3, &[half_w, diss_w, i1, i2, i3]);

    // ½ d/dt‖∂_β u^β‖² + ν‖∇∂_β u^β‖² = II₁ + II₂ + II₃
    let half_d = ws.dbeta.inner(&ws.dbeta_t);
    let diss_d = nu_visc * sobolev_norm(&ws.dbeta, 1.0)?.powi(2);
    let ii1 = stretching_frame_terms(&ws.u, fs)?.inner(&ws.dbeta);
    let sq = scalar_from(grid, dbeta_p.values().iter().map(|v| v * v).collect());
    let hh = scalar_from(grid, (0..len).map(|p| fg.horizontal_pairing(p)).collect());
    let bh = scalar_from(grid, (0..len).map(|p| fg.cross_pairing(p)).collect());
    let ii2_field = (vertical_riesz(&sq, beta) - &sq) + vertical_riesz(&hh, beta);
    let ii3_field = vertical_riesz(&bh, beta) * 2.0 - &bh;
    let ii2 = ii2_field.inner(&ws.dbeta);
    let ii3 = ii3_field.inner(&ws.dbeta);
    let r56 = rel_scalar(half_d + diss_d, ii1 + ii2 + ii3, &[half_d, diss_d, ii1, ii2, ii3]);

    // ½ d/dt‖∇u‖² + ν‖∇²u‖² = -∫B
    let grid_k = grid.kvecs();
    let mut half_g = 0.0;
    for c in 0..3 {
        let a = ws.u.component(c);
        let b = ws.dtu.component(c);
        for idx in 0..len {
            let k2 = dot(grid_k[idx], grid_k[idx]);
            half_g += k2 * (a[idx] * b[idx].conj()).re;
        }
    }
    half_g *= VOLUME;
    let diss_g = nu_visc * sobolev_norm(&ws.u, 2.0)?.powi(2);
    let mut b_vals = vec![0.0; len];
    let mut regrouped = vec![0.0; len];
    let mut worst_gap: f64 = 0.0;
    for p in 0..len {
        let mut b = 0.0;
        for l in 0..3 {
            for m in 0..3 {
                b += fg.transport(p, l, m) * fg.g[l][m][p];
            }
        }
        b_vals[p] = b;
        let div_h = fg.horizontal_div(p);
        let g = &fg.g;
        let mut hh_part = 0.0;
        for l in 0..2 {
            for m in 0..2 {
                hh_part += fg.transport(p, l, m) * g[l][m][p];
            }
        }
        // ℓ = m = β
        let bb_orig = fg.transport(p, 2, 2) * g[2][2][p];
        let bb_new = -fg.transport(p, 2, 2) * div_h;
        // ℓ = β, m ∈ {τ, ν}
        let mut bh_orig = 0.0;
        let mut bh_new = 0.0;
        for m in 0..2 {
            bh_orig += fg.transport(p, 2, m) * g[2][m][p];
            let inner: f64 = (0..2).map(|k| g[2][k][p] * g[k][m][p]).sum();
            bh_new += (inner - div_h * g[2][m][p]) * g[2][m][p];
        }
        // ℓ ∈ {τ, ν}, m = β
        let mut hb_orig = 0.0;
        let mut hb_new = 0.0;
        for l in 0..2 {
            hb_orig += fg.transport(p, l, 2) * g[l][2][p];
            let inner: f64 = (0..2).map(|k| g[l][k][p] * g[k][2][p]).sum();
            hb_new += (inner - g[l][2][p] * div_h) * g[l][2][p];
        }
        worst_gap = worst_gap
            .max((bb_orig - bb_new).abs())
            .max((bh_orig - bh_new).abs())
            .max((hb_orig - hb_new).abs());
        regrouped[p] = hh_part + bb_new + bh_new + hb_new;
        worst_gap = worst_gap.max((regrouped[p] - b).abs());
    }
    let b_scale = b_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let regroup_defect = worst_gap / b_scale.max(RESIDUAL_FLOOR);
    let b_integral = triple(&b_vals, &ones, &ones);
    let r62 = rel_scalar(half_g + diss_g, -b_integral, &[half_g, diss_g, b_integral]);

    Ok(EnergyIdentities {
        r51,
        r56,
        r62,
        i: [i1, i2, i3],
        ii: [ii1, ii2, ii3],
        b_integral,
        regroup_defect,
        half_rates: [half_w, half_d, half_g],
    })
}

pub fn energy_identity_residuals(u: &SpectralField, nu_visc: f64, fs: &FrameState) -> Result<EnergyIdentities> {
    let ws = Workspace::new(u, nu_visc, fs)?;
    energy_identities(&ws, nu_visc, fs)
}

/// Relative gap between the frame form of the pressure and `-Δ⁻¹∇·(u·∇u)`.
pub fn pressure_defect(u: &SpectralField, frame: &FrameSample) -> Result<f64> {
    let a = ns::pressure(u, frame)?;
    let b = ns::pressure_leray(u)?;
    Ok((&a - &b).l2_norm() / b.l2_norm().max(RESIDUAL_FLOOR))
}

/// All diagnostics at one state.
pub fn diagnose(state: &FlowState, fs: &FrameState) -> Result<NodeDiagnostics> {
    let nu = state.nu_visc;
    let ws = Workspace::new(&state.u, nu, fs)?;
    let evo = evolution_residuals(&ws, nu, fs, CheckOptions::default())?;
    let id = energy_identities(&ws, nu, fs)?;
    let omega_sq = ws.omega.l2_norm().powi(2);
    let dbeta_sq = ws.dbeta.l2_norm().powi(2);
    Ok(NodeDiagnostics {
        t: state.t,
        integrand: criterion_integrand(&state.u, fs.frame.beta)?,
        min_component: min_component_integrand(&state.u)?,
        frame_energy: fs.rates.energy(),
        f_value: omega_sq + dbeta_sq,
        df_dt: 2.0 * (id.half_rates[0] + id.half_rates[1]),
        omega_sq,
        dbeta_sq,
        grad_omega_sq: sobolev_norm(&ws.omega, 1.0)?.powi(2),
        grad_dbeta_sq: sobolev_norm(&ws.dbeta, 1.0)?.powi(2),
        grad_u_sq: ns::gradient_norm_sq(&state.u),
        r43_omega: evo.r_omega,
        r43_dbeta: evo.r_dbeta,
        r51: id.r51,
        r56: id.r56,
        r62: id.r62,
        i1: id.i[0],
        i2: id.i[1],
        i3: id.i[2],
        ii1: id.ii[0],
        ii2: id.ii[1],
        ii3: id.ii[2],
        b_integral: id.b_integral,
        regroup_defect: id.regroup_defect,
        pressure_defect: pressure_defect(&state.u, &fs.frame)?,
    })
}

// ---------------------------------------------------------------------------
// Logs

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriterionRow {
    pub node: NodeDiagnostics,
    /// Running trapezoidal `∫ ‖u·β‖²_{Ḣ^{3/2}}`.
    pub criterion_integral: f64,
    /// Running `∫ (|τ'|² + |ν'|² + |β'|² + ‖u·β‖²_{Ḣ^{3/2}})`.
    pub composite_integral: f64,
    /// Running `∫ min_i ‖u^i‖²_{Ḣ^{3/2}}` (exploratory).
    pub min_component_integral: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CriterionLog {
    pub rows: Vec<CriterionRow>,
    /// `‖u(t_0)‖²`.
    pub initial_energy_sq: f64,
}

impl CriterionLog {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.node.t).collect()
    }

    pub fn final_integral(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.criterion_integral)
    }

    pub fn max_residual(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.node.r43_omega, r.node.r43_dbeta, r.node.r51, r.node.r56, r.node.r62])
            .fold(0.0, f64::max)
    }

    /// Append `other`, continuing the running integrals from this log's end.
    pub fn concat(&self, other: &CriterionLog) -> CriterionLog {
        let mut out = self.clone();
        let base = self.rows.last().cloned().unwrap_or_default();
        let skip_first = self
            .rows
            .last()
            .zip(other.rows.first())
            .is_some_and(|(a, b)| a.node.t == b.node.t);
        for (i, r) in other.rows.iter().enumerate() {
            if i == 0 && skip_first {
                continue;
            }
            let mut r = r.clone();
            r.criterion_integral += base.criterion_integral;
            r.composite_integral += base.composite_integral;
            r.min_component_integral += base.min_component_integral;
            out.rows.push(r);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        const TAIL: [&str; 3] = ["criterion_integral", "composite_integral", "min_component_integral"];
        let mut head = csv::Writer::from_writer(Vec::new());
        head.serialize(NodeDiagnostics::default())?;
        let head = head.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let mut names: Vec<String> = csv::Reader::from_reader(head.as_slice())
            .headers()?
            .iter()
            .map(String::from)
            .collect();
        names.extend(TAIL.iter().map(|s| s.to_string()));
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        wtr.write_record(&names)?;
        for r in &self.rows {
            wtr.serialize((
                &r.node,
                r.criterion_integral,
                r.composite_integral,
                r.min_component_integral,
            ))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Diagnose every state in parallel and assemble the running integrals.
pub fn accumulate(states: &[FlowState], frame: &dyn FrameProvider) -> Result<CriterionLog> {
    if states.is_empty() {
        return Ok(CriterionLog::default());
    }
    if let Some((a, b, h)) = frame.mesh() {
        let (t0, t1) = (states[0].t, states[states.len() - 1].t);
        if t0 < a - 1e-12 || t1 > b + 1e-12 {
            log::warn!("trajectory [{t0}, {t1}] exceeds the frame mesh [{a}, {b}]; frame values are clamped");
        }
        let traj_step = states.windows(2).map(|w| w[1].t - w[0].t).fold(f64::INFINITY, f64::min);
        if h > traj_step {
            log::warn!("frame mesh (step {h:.3e}) is coarser than the trajectory (step {traj_step:.3e}); frame is interpolated");
        }
    }
    let nodes: Vec<NodeDiagnostics> = states
        .par_iter()
        .map(|s| diagnose(s, &FrameState::from_provider(frame, s.t, true)?))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(nodes.len());
    let mut acc = [0.0f64; 3];
    for (i, node) in nodes.into_iter().enumerate() {
        if i > 0 {
            let prev: &CriterionRow = &rows[i - 1];
            let dt = node.t - prev.node.t;
            acc[0] += 0.5 * dt * (prev.node.integrand + node.integrand);
            acc[1] += 0.5 * dt * (prev.node.integrand + prev.node.frame_energy + node.integrand + node.frame_energy);
            acc[2] += 0.5 * dt * (prev.node.min_component + node.min_component);
        }
        rows.push(CriterionRow {
            node,
            criterion_integral: acc[0],
            composite_integral: acc[1],
            min_component_integral: acc[2],
        });
    }
    Ok(CriterionLog {
        rows,
        initial_energy_sq: states[0].u.l2_norm().powi(2),
    })
}

// ---------------------------------------------------------------------------
// Constant of the a priori inequality

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Estimate {
    pub sigma: f64,
    /// Smallest single constant making the inequality hold at every node.
    pub c_min: f64,
    /// Smallest constants for each right-side term taken alone.
    pub per_term: [f64; 3],
    /// Node time attaining `c_min`.
    pub t_worst: Option<f64>,
    /// Nodes with a positive left side.
    pub active_nodes: usize,
}

/// Left side and the three right-side terms at one node.
pub fn prop1_terms(row: &NodeDiagnostics, initial_energy_sq: f64, sigma: f64) -> (f64, [f64; 3]) {
    let lhs = row.df_dt + row.grad_omega_sq + row.grad_dbeta_sq;
    let q = 1.0 / (1.0 - sigma);
    let h32 = row.integrand;
    let r1 = row.f_value * h32;
    let r2 = initial_energy_sq * row.frame_energy;
    let r3 = (row.omega_sq.powf(q) + row.dbeta_sq.powf(q))
        * h32.powf((1.0 - 2.0 * sigma) * q)
        * row.grad_u_sq.powf(sigma * q)
        / sigma;
    (lhs, [r1, r2, r3])
}

pub fn prop1_constant_estimate(log: &CriterionLog, sigma: f64) -> Result<Prop1Estimate> {
    if !(sigma > 0.0 && sigma <= 0.2) {
        return Err(Error::Domain(format!("sigma must lie in (0, 1/5], got {sigma}")));
    }
    let mut c_min = 0.0f64;
    let mut per_term = [0.0f64; 3];
    let mut t_worst = None;
    let mut active = 0;
    for r in &log.rows {
        let (lhs, terms) = prop1_terms(&r.node, log.initial_energy_sq, sigma);
        if !(lhs > 0.0) {
            continue;
        }
        active += 1;
        let total: f64 = terms.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateTrajectory(format!(
                "left side {lhs:.3e} > 0 at t = {} while every right-side term vanishes",
                r.node.t
            )));
        }
        let c = lhs / total;
        if c > c_min {
            c_min = c;
            t_worst = Some(r.node.t);
        }
        for k in 0..3 {
            let ck = if terms[k] > 0.0 { lhs / terms[k] } else { f64::INFINITY };
            per_term[k] = per_term[k].max(ck);
        }
    }
    Ok(Prop1Estimate {
        sigma,
        c_min,
        per_term,
        t_worst,
        active_nodes: active,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{ConstantFrame, RotatingFrame};
    use crate::grid::make_grid;
    use crate::ns::{abc_flow, random_divergence_free, shear_flow};

    #[test]
    fn integrand_single_mode() {
        let g = make_grid(16).unwrap();
        let u = SpectralField::from_fn_vector(&g, |x, _, _| [0.0, (2.0 * x).cos(), 0.0]);
        let v = criterion_integrand(&u, [0.0, 1.0, 0.0]).unwrap();
        let expect = 4.0 * VOLUME;
        assert!((v - expect).abs() < 1e-10 * expect);
        assert!((expect - 992.2).abs() < 0.01);
        assert_eq!(criterion_integrand(&shear_flow(&g), [1.0, 0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn beltrami_residuals_constant_frame() {
        let g = make_grid(16).unwrap();
        let u = abc_flow(&g, 1.0, 1.0, 1.0);
        let fs = FrameState::constant(FrameSample::axis_aligned(2));
        let r = verify_evolution_system(&u, 1.0, &fs, CheckOptions::default()).unwrap();
        assert!(r.r_omega < 1e-8 && r.r_dbeta < 1e-8, "{r:?}");
        let e = energy_identity_residuals(&u, 1.0, &fs).unwrap();
        assert!(e.r51 < 1e-8 && e.r56 < 1e-8 && e.r62 < 1e-8, "{e:?}");
    }

    #[test]
    fn zero_field_is_exact() {
        let g = make_grid(8).unwrap();
        let u = SpectralField::zeros(&g, Rank::Vector3);
        let fs = FrameState::constant(FrameSample::for_beta([0.0, 0.6, 0.8]));
        let r = verify_evolution_system(&u, 1.0, &fs, CheckOptions::default()).unwrap();
        assert_eq!((r.r_omega, r.r_dbeta), (0.0, 0.0));
    }

    #[test]
    fn shear_flow_terms_vanish() {
        let g = make_grid(16).unwrap();
        let fs = FrameState::constant(FrameSample::axis_aligned(2));
        let e = energy_identity_residuals(&shear_flow(&g), 1.0, &fs).unwrap();
        assert!(e.i.iter().all(|v| v.abs() < 1e-12), "{:?}", e.i);
        assert!(e.r51 < 1e-12);
    }

    #[test]
    fn random_state_identities() {
        let g = make_grid(16).unwrap();
        let u = random_divergence_free(&g, 3, 4, 1.0);
        let fs = FrameState::constant(FrameSample::for_beta([0.48, -0.6, 0.64]));
        let r = verify_evolution_system(&u, 1.0, &fs, CheckOptions::default()).unwrap();
        assert!(r.r_omega < 1e-10 && r.r_dbeta < 1e-10, "{r:?}");
        let e = energy_identity_residuals(&u, 1.0, &fs).unwrap();
        assert_eq!(e.i[0], 0.0);
        assert!(e.r51 < 1e-10 && e.r56 < 1e-10 && e.r62 < 1e-10, "{e:?}");
        assert!(e.regroup_defect < 1e-10);
        assert!(pressure_defect(&u, &fs.frame).unwrap() < 1e-11);
    }

    #[test]
    fn rotating_frame_needs_its_terms() {
        let g = make_grid(16).unwrap();
        let u = random_divergence_free(&g, 4, 4, 1.0);
        let rot = RotatingFrame { omega: 1.0 };
        let fs = FrameState::from_provider(&rot, 0.3, true).unwrap();
        let with = verify_evolution_system(&u, 1.0, &fs, CheckOptions::default()).unwrap();
        assert!(with.r_omega < 1e-10 && with.r_dbeta < 1e-10, "{with:?}");
        let without = verify_evolution_system(&u, 1.0, &fs, CheckOptions { frame_terms: false }).unwrap();
        assert!(without.r_omega > 1e-3, "{without:?}");
        let e = energy_identity_residuals(&u, 1.0, &fs).unwrap();
        assert!(e.i[0] != 0.0 && e.ii[0] != 0.0);
        assert!(e.r51 < 1e-10 && e.r56 < 1e-10, "{e:?}");
        assert!(matches!(FrameState::from_provider(&rot, 0.3, false), Err(Error::Misuse(_))));
    }

    #[test]
    fn beltrami_log_matches_closed_form() {
        let g = make_grid(16).unwrap();
        let s0 = FlowState::new(abc_flow(&g, 1.0, 1.0, 1.0), 1.0).unwrap();
        let states = ns::record(s0, 1e-3, 100, 1).unwrap();
        let frame = ConstantFrame(FrameSample::axis_aligned(2));
        let log = accumulate(&states, &frame).unwrap();
        let i0 = log.rows[0].node.integrand;
        assert!((i0 - VOLUME).abs() < 1e-10 * VOLUME);
        let t = log.rows.last().unwrap().node.t;
        let expect = i0 * (1.0 - (-2.0 * t).exp()) / 2.0;
        assert!((log.final_integral() - expect).abs() < 1e-6 * expect);
        assert!(log.rows.windows(2).all(|w| w[1].criterion_integral >= w[0].criterion_integral));
        for r in &log.rows {
            let ratio = r.node.integrand / i0;
            assert!((ratio - (-2.0 * r.node.t).exp()).abs() < 1e-9);
        }
        let est = prop1_constant_estimate(&log, 0.1).unwrap();
        assert!(est.c_min.is_finite());
        let a = accumulate(&states[..51], &frame).unwrap();
        let b = accumulate(&states[50..], &frame).unwrap();
        let joined = a.concat(&b);
        assert_eq!(joined.rows.len(), log.rows.len());
        assert!((joined.final_integral() - log.final_integral()).abs() < 1e-12 * log.final_integral());
    }

    #[test]
    fn decaying_shear_gives_zero_constant() {
        let g = make_grid(8).unwrap();
        let s0 = FlowState::new(shear_flow(&g), 1.0).unwrap();
        let states = ns::record(s0, 0.01, 10, 2).unwrap();
        let log = accumulate(&states, &ConstantFrame(FrameSample::axis_aligned(2))).unwrap();
        let est = prop1_constant_estimate(&log, 0.1).unwrap();
        assert_eq!(est.c_min, 0.0);
        assert_eq!(est.active_nodes, 0);
        assert!(prop1_constant_estimate(&log, 0.3).is_err());
    }

    #[test]
    fn rotating_frame_log_has_frame_energy() {
        let g = make_grid(8).unwrap();
        let s0 = FlowState::new(random_divergence_free(&g, 8, 2, 1.0), 1.0).unwrap();
        let states = ns::record(s0, 0.01, 4, 1).unwrap();
        let log = accumulate(&states, &RotatingFrame { omega: 2.0 }).unwrap();
        assert!(log.rows.iter().all(|r| (r.node.frame_energy - 8.0).abs() < 1e-12));
        assert!(log.rows.last().unwrap().composite_integral > log.final_integral());
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        for col in ["t", "integrand", "f_value", "r43_omega", "r62", "i3", "ii2", "criterion_integral"] {
            assert!(header.split(',').any(|c| c == col), "missing {col}");
        }
    }
}
