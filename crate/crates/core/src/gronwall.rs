//! Worst-case analysis of the differential inequality
//! `f' <= (M/σ) f^{1+σ} φ`.
//!
//! Trajectories are integrated in the variable `w = σ ln f`, for which the
//! equality ODE reads `w' = M φ e^w` and has the closed form
//! `e^{-w(t)} = e^{-w(0)} - M Φ(0,t)`. Large values of `f` are reported as
//! natural or base-2 logarithms because the certified envelopes overflow `f64`
//! long before the integrator loses accuracy.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `f^σ` may grow by this factor before integration stops.
pub const GUARD_RATIO: f64 = 1e12;
/// Relative tolerance of the closed-form cross-check.
pub const CLOSED_FORM_TOL: f64 = 1e-8;
/// Samples whose closed form has lost more than this fraction of
/// `f0^{-σ}` to cancellation are left out of the cross-check.
const CONDITIONING_FLOOR: f64 = 1e-3;
const MAX_STEPS: usize = 5_000_000;
const MAX_MESH_POINTS: usize = 4_000_000;

/// A nonnegative function sampled on a strictly increasing mesh and
/// interpolated linearly between nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFn {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledFn {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::Domain(format!(
                "sampled function needs at least two (t, value) pairs, got {} times and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("sample times must be finite and strictly increasing".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!("sampled function must be finite and nonnegative, found {v}")));
        }
        Ok(SampledFn { times, values })
    }

    pub fn from_fn(t0: f64, t1: f64, samples: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if samples < 2 || !(t1 > t0) {
            return Err(Error::Domain(format!("need samples >= 2 and t1 > t0 (got {samples}, [{t0}, {t1}])")));
        }
        let h = (t1 - t0) / (samples - 1) as f64;
        let times: Vec<f64> = (0..samples)
            .map(|i| if i + 1 == samples { t1 } else { t0 + h * i as f64 })
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        SampledFn::new(times, values)
    }

    pub fn constant(c: f64, t_end: f64, samples: usize) -> Result<Self> {
        SampledFn::from_fn(0.0, t_end, samples, |_| c)
    }

    pub fn zero_like(other: &SampledFn) -> Self {
        SampledFn {
            times: other.times.clone(),
            values: vec![0.0; other.times.len()],
        }
    }

    /// Parse `const:c` or a CSV path with columns `t,value`.
    pub fn from_spec(spec: &str, t_end: f64, samples: usize) -> Result<Self> {
        if let Some(c) = spec.strip_prefix("const:") {
            let c: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad constant in '{spec}'")))?;
            return SampledFn::constant(c, t_end, samples);
        }
        let file = std::fs::File::open(spec)?;
        SampledFn::read_csv(file)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Config("expected two columns t,value".into()));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("not a number: '{s}'")))
            };
            times.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        SampledFn::new(times, values)
    }

    pub fn write_csv<W: Write>(&self, w: W, value_name: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", value_name])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            wtr.write_record([t.to_string(), v.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Index `k` of the cell `[t_k, t_{k+1}]` containing `t` (clamped).
    fn cell(&self, t: f64) -> usize {
        let last = self.times.len() - 2;
        match self.times.partition_point(|&x| x <= t) {
            0 => 0,
            p => (p - 1).min(last),
        }
    }

    /// Linear interpolation, constant extension outside the mesh.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.start() {
            return self.values[0];
        }
        if t >= self.end() {
            return self.values[self.len() - 1];
        }
        let k = self.cell(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let s = (t - t0) / (t1 - t0);
        self.values[k] + s * (self.values[k + 1] - self.values[k])
    }

    /// Trapezoidal masses of the mesh cells.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
            .collect()
    }

    /// Running trapezoidal integral at each node, starting from zero.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for m in self.cell_masses() {
            acc += m;
            out.push(acc);
        }
        out
    }

    pub fn integral(&self) -> f64 {
        self.cell_masses().iter().sum()
    }

    /// Integral from the first node to `t` of the interpolant.
    pub fn integral_to(&self, t: f64) -> f64 {
        let t = t.clamp(self.start(), self.end());
        let k = self.cell(t);
        let cum: f64 = self.cell_masses()[..k].iter().sum();
        cum + 0.5 * (t - self.times[k]) * (self.values[k] + self.eval(t))
    }

    /// Split every cell whose mass is at least `threshold` at its midpoint.
    fn refine_heavy(&self, threshold: f64) -> (SampledFn, usize) {
        let masses = self.cell_masses();
        let mut times = Vec::with_capacity(self.len() * 2);
        let mut values = Vec::with_capacity(self.len() * 2);
        let mut split = 0;
        for k in 0..masses.len() {
            times.push(self.times[k]);
            values.push(self.values[k]);
            if masses[k] >= threshold {
                times.push(0.5 * (self.times[k] + self.times[k + 1]));
                values.push(0.5 * (self.values[k] + self.values[k + 1]));
                split += 1;
            }
        }
        times.push(self.end());
        values.push(self.values[self.len() - 1]);
        (SampledFn { times, values }, split)
    }
}

/// How the exponents σ are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum SigmaSpec {
    /// The inequality holds for every σ in `(0, δ]`; the geometric sequence
    /// `σ_1 = min(log_{1+f0} 2, δ)`, `σ_k = 2^{1-k} σ_1` is used.
    Delta(f64),
    /// An explicit decreasing sequence, thinned to a usable subsequence.
    Sequence(Vec<f64>),
}

/// `σ_1 = min(log_{1+f0} 2, δ)`.
pub fn first_sigma(f0: f64, delta: f64) -> f64 {
    (std::f64::consts::LN_2 / f0.ln_1p()).min(delta)
}

/// The first `n` terms of the geometric sequence.
pub fn sigma_sequence(f0: f64, delta: f64, n: usize) -> Vec<f64> {
    let s1 = first_sigma(f0, delta);
    (0..n).map(|k| s1 * 0.5f64.powi(k as i32)).collect()
}

/// Keep the terms of `seq` that make `f0^{σ_1} <= 2` and
/// `σ_{k+1} <= σ_k / 2` hold.
pub fn normalize_sequence(f0: f64, seq: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &s in seq {
        if !(s > 0.0) || !s.is_finite() {
            continue;
        }
        match out.last() {
            None => {
                if s * f0.ln() <= std::f64::consts::LN_2 {
                    out.push(s);
                }
            }
            Some(&prev) => {
                if s <= 0.5 * prev {
                    out.push(s);
                }
            }
        }
    }
    out
}

/// Forcing terms `M1 g V1 + M2 V2` of the shifted inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub m1: f64,
    pub v1: SampledFn,
    pub m2: f64,
    pub v2: SampledFn,
}

impl Forcing {
    /// `M1 ∫_0^t V1 + M2 ∫_0^t V2`.
    pub fn exponent(&self, t: f64) -> f64 {
        self.m1 * self.v1.integral_to(t) + self.m2 * self.v2.integral_to(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GronwallProblem {
    pub f0: f64,
    pub m: f64,
    pub sigma: SigmaSpec,
    pub phi: SampledFn,
    pub forcing: Option<Forcing>,
}

impl GronwallProblem {
    pub fn new(f0: f64, m: f64, sigma: SigmaSpec, phi: SampledFn) -> Result<Self> {
        if !(f0 > 0.0) || !f0.is_finite() {
            return Err(Error::Domain(format!("f0 must be positive, got {f0}")));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::Domain(format!("M must be positive, got {m}")));
        }
        match &sigma {
            SigmaSpec::Delta(d) if !(*d > 0.0) || !d.is_finite() => {
                return Err(Error::Domain(format!("delta must be positive, got {d}")));
            }
            SigmaSpec::Sequence(s) if s.is_empty() => {
                return Err(Error::Domain("empty sigma sequence".into()));
            }
            _ => {}
        }
        Ok(GronwallProblem {
            f0,
            m,
            sigma,
            phi,
            forcing: None,
        })
    }

    pub fn with_forcing(mut self, m1: f64, v1: SampledFn, m2: f64, v2: SampledFn) -> Result<Self> {
        if !(m1 >= 0.0) || !(m2 >= 0.0) {
            return Err(Error::Domain(format!("M1 and M2 must be nonnegative, got {m1}, {m2}")));
        }
        self.forcing = Some(Forcing { m1, v1, m2, v2 });
        Ok(self)
    }

    pub fn t_end(&self) -> f64 {
        self.phi.end()
    }

    /// Exponents for `n` segments.
    pub fn sigmas(&self, n: usize) -> Result<Vec<f64>> {
        match &self.sigma {
            SigmaSpec::Delta(d) => {
                let s = sigma_sequence(self.f0, *d, n);
                if s.last().is_some_and(|&x| !(x > 0.0)) {
                    return Err(Error::Domain(format!("{n} segments underflow the sigma sequence")));
                }
                Ok(s)
            }
            SigmaSpec::Sequence(seq) => {
                let s = normalize_sequence(self.f0, seq);
                if s.len() < n {
                    return Err(Error::Domain(format!(
                        "normalized sigma sequence has {} terms, {n} segments need one each",
                        s.len()
                    )));
                }
                Ok(s[..n].to_vec())
            }
        }
    }

    /// Largest exponent in use; it drives the corollary coefficient.
    pub fn sigma_max(&self) -> f64 {
        match &self.sigma {
            SigmaSpec::Delta(d) => first_sigma(self.f0, *d),
            SigmaSpec::Sequence(seq) => normalize_sequence(self.f0, seq).first().copied().unwrap_or(0.0),
        }
    }
}

// ---------------------------------------------------------------------------
// Integration

fn rk4<F: Fn(f64, f64) -> f64>(f: &F, t: f64, y: f64, h: f64) -> f64 {
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Step-doubling RK4 from `a` to `b`. Returns `Err(t)` if `y` exceeds
/// `y_max` or the step size collapses at time `t`.
fn adaptive_rk4<F, T>(f: &F, a: f64, b: f64, y0: f64, h: &mut f64, tol: T, y_max: f64) -> std::result::Result<f64, f64>
where
    F: Fn(f64, f64) -> f64,
    T: Fn(f64) -> f64,
{
    let span = b - a;
    if span <= 0.0 {
        return Ok(y0);
    }
    if !(*h > 0.0) || *h > span {
        *h = span;
    }
    let mut t = a;
    let mut y = y0;
    let mut steps = 0usize;
    while t < b {
        if y > y_max || !y.is_finite() {
            return Err(t);
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(t);
        }
        let last = *h >= b - t;
        let step = if last { b - t } else { *h };
        let full = rk4(f, t, y, step);
        let mid = rk4(f, t, y, 0.5 * step);
        let two = rk4(f, t + 0.5 * step, mid, 0.5 * step);
        let err = (two - full).abs() / 15.0;
        let allowed = tol(two);
        let ok = two.is_finite() && err.is_finite() && err <= allowed;
        let factor = if err == 0.0 {
            4.0
        } else if err.is_finite() {
            (0.9 * (allowed / err).powf(0.2)).clamp(0.2, 4.0)
        } else {
            0.2
        };
        if ok {
            y = two + (two - full) / 15.0;
            t = if last { b } else { t + step };
            if !last {
                *h = step * factor;
            } else if factor > 1.0 {
                *h = h.max(step * factor);
            }
        } else {
            *h = step * factor;
            if *h <= span * 1e-14 || *h <= f64::EPSILON * t.abs() {
                return Err(t);
            }
        }
    }
    if y > y_max || !y.is_finite() {
        return Err(b);
    }
    Ok(y)
}

struct Run {
    w: Vec<f64>,
    stopped_at: Option<f64>,
    /// Relative error of `f` against the closed form.
    max_rel_err: f64,
    /// Absolute error of `w = σ ln f`, meaningful when `f` is not representable.
    max_w_err: f64,
}

/// Integrate `w' = M φ e^w` across nodes `first..=last` of `mesh`, recording
/// `w` at each node reached.
fn run_equality(mesh: &SampledFn, cum: &[f64], m: f64, sigma: f64, w_start: f64, first: usize, last: usize) -> Run {
    let w_max = w_start + GUARD_RATIO.ln();
    let u0 = (-w_start).exp();
    let mut w = vec![w_start];
    let mut y = w_start;
    let mut h = 0.0;
    let mut max_rel_err: f64 = 0.0;
    let mut max_w_err: f64 = 0.0;
    let tol = |y: f64| (1e-13 * y.abs()).max(1e-13 * sigma);
    for k in first..last {
        let (t0, t1) = (mesh.times[k], mesh.times[k + 1]);
        let (v0, v1) = (mesh.values[k], mesh.values[k + 1]);
        let slope = (v1 - v0) / (t1 - t0);
        let rhs = |t: f64, y: f64| m * (v0 + slope * (t - t0)) * y.exp();
        match adaptive_rk4(&rhs, t0, t1, y, &mut h, tol, w_max) {
            Ok(next) => {
                y = next;
                w.push(y);
                let u = u0 - m * (cum[k + 1] - cum[first]);
                if u >= CONDITIONING_FLOOR * u0 {
                    let dw = y + u.ln();
                    max_w_err = max_w_err.max(dw.abs());
                    max_rel_err = max_rel_err.max((dw / sigma).exp_m1().abs());
                }
            }
            Err(t) => {
                return Run {
                    w,
                    stopped_at: Some(t),
                    max_rel_err,
                    max_w_err,
                };
            }
        }
    }
    Run {
        w,
        stopped_at: None,
        max_rel_err,
        max_w_err,
    }
}

/// First time at which the running integral reaches `target`.
fn invert_cumulative(mesh: &SampledFn, cum: &[f64], target: f64) -> Option<f64> {
    if target <= 0.0 {
        return Some(mesh.start());
    }
    let k = cum.iter().position(|&c| c >= target)?;
    let k = k.max(1) - 1;
    let rem = target - cum[k];
    let (t0, t1) = (mesh.times[k], mesh.times[k + 1]);
    let v0 = mesh.values[k];
    let slope = (mesh.values[k + 1] - v0) / (t1 - t0);
    // slope/2 s^2 + v0 s - rem = 0, in the cancellation-free form
    let disc = (v0 * v0 + 2.0 * slope * rem).max(0.0);
    let denom = v0 + disc.sqrt();
    let s = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
    Some((t0 + s).min(t1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlowUp {
    /// Time at which `Φ(0,t) = f0^{-σ}/M`, when reached on the mesh.
    pub t_star: Option<f64>,
    /// Time at which the overflow guard stopped integration.
    pub stopped_at: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub sigma: f64,
    pub times: Vec<f64>,
    /// `ln f` at each node reached.
    pub log_f: Vec<f64>,
    pub blow_up: Option<BlowUp>,
    /// Largest relative deviation from the closed form over well-conditioned nodes.
    pub closed_form_rel_err: f64,
}

impl Trajectory {
    pub fn values(&self) -> Vec<f64> {
        self.log_f.iter().map(|l| l.exp()).collect()
    }

    pub fn final_log_f(&self) -> f64 {
        self.log_f[self.log_f.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "log_f", "f"])?;
        for (t, l) in self.times.iter().zip(&self.log_f) {
            wtr.write_record([t.to_string(), l.to_string(), l.exp().to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Closed-form solution of the equality ODE, as `ln f`.
pub fn closed_form_log_f(f0: f64, m: f64, sigma: f64, mass: f64) -> Option<f64> {
    let u = f0.powf(-sigma) - m * mass;
    (u > 0.0).then(|| -u.ln() / sigma)
}

/// Integrate the equality case `f' = (M/σ) f^{1+σ} φ` over the mesh of `φ`.
pub fn integrate_equality_ode(p: &GronwallProblem, sigma: f64) -> Result<Trajectory> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let mesh = &p.phi;
    let cum = mesh.cumulative();
    let w0 = sigma * p.f0.ln();
    let run = run_equality(mesh, &cum, p.m, sigma, w0, 0, mesh.len() - 1);
    let times = mesh.times[..run.w.len()].to_vec();
    let log_f = run.w.iter().map(|w| w / sigma).collect();
    let blow_up = run.stopped_at.map(|stopped_at| BlowUp {
        t_star: invert_cumulative(mesh, &cum, p.f0.powf(-sigma) / p.m),
        stopped_at,
    });
    Ok(Trajectory {
        sigma,
        times,
        log_f,
        blow_up,
        closed_form_rel_err: run.max_rel_err,
    })
}

// ---------------------------------------------------------------------------
// Partition

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Boundaries `T_0 < … < T_n`.
    pub times: Vec<f64>,
    /// Node index of each boundary in `mesh`.
    pub nodes: Vec<usize>,
    pub masses: Vec<f64>,
    /// Mass bound `1/(16M)` every segment stays below.
    pub mass_bound: f64,
    pub total_mass: f64,
    /// The (possibly refined) mesh the boundaries live on.
    pub mesh: SampledFn,
    pub refinements: usize,
}

impl Partition {
    pub fn n(&self) -> usize {
        self.masses.len()
    }
}

/// Number of segments `floor(16 M Φ) + 1`.
pub fn segment_count(m: f64, total_mass: f64) -> usize {
    (16.0 * m * total_mass).floor() as usize + 1
}

/// Default number of dyadic refinement rounds before giving up.
pub const DEFAULT_REFINEMENTS: usize = 48;

pub fn partition_by_mass(phi: &SampledFn, t_end: f64, m: f64) -> Result<Partition> {
    partition_by_mass_with(phi, t_end, m, DEFAULT_REFINEMENTS)
}

/// Split `[start, t_end]` into `floor(16 M Φ) + 1` segments of mass below
/// `1/(16M)`. Boundaries sit on mesh nodes; cells too heavy to place them are
/// halved, up to `max_refinements` rounds.
pub fn partition_by_mass_with(phi: &SampledFn, t_end: f64, m: f64, max_refinements: usize) -> Result<Partition> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::Domain(format!("M must be positive, got {m}")));
    }
    if (t_end - phi.end()).abs() > 1e-12 * t_end.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "phi is sampled up to {} but T = {t_end}",
            phi.end()
        )));
    }
    let total = phi.integral();
    if !total.is_finite() {
        return Err(Error::Domain("phi has infinite mass".into()));
    }
    let n = segment_count(m, total);
    if n > 1_000_000 {
        return Err(Error::Domain(format!("{n} segments requested")));
    }
    let bound = 1.0 / (16.0 * m);
    let target = total / n as f64;
    let slack = bound - target;
    if !(slack > 0.0) {
        return Err(Error::MeshTooCoarse(format!(
            "equal split mass {target:e} does not fit below 1/(16M) = {bound:e}"
        )));
    }
    let heavy = 0.5 * slack.min(target);
    let mut mesh = phi.clone();
    let mut rounds = 0;
    loop {
        if let Some((nodes, masses)) = snap_boundaries(&mesh, n, bound) {
            return Ok(Partition {
                times: nodes.iter().map(|&i| mesh.times[i]).collect(),
                nodes,
                masses,
                mass_bound: bound,
                total_mass: total,
                mesh,
                refinements: rounds,
            });
        }
        let worst = mesh.cell_masses().into_iter().fold(0.0, f64::max);
        if rounds >= max_refinements || mesh.len() > MAX_MESH_POINTS {
            return Err(Error::MeshTooCoarse(format!(
                "heaviest cell carries mass {worst:e} against a segment bound of {bound:e} after {rounds} refinement rounds"
            )));
        }
        let (finer, split) = mesh.refine_heavy(heavy);
        if split == 0 {
            // every cell is light yet snapping failed: shrink the threshold
            mesh = finer.refine_heavy(0.5 * worst).0;
        } else {
            mesh = finer;
        }
        rounds += 1;
    }
}

fn snap_boundaries(mesh: &SampledFn, n: usize, bound: f64) -> Option<(Vec<usize>, Vec<f64>)> {
    let cum = mesh.cumulative();
    let last = mesh.len() - 1;
    let total = cum[last];
    let mut nodes = vec![0usize];
    for k in 1..n {
        let goal = total * k as f64 / n as f64;
        let hi = cum.partition_point(|&c| c < goal).min(last);
        let lo = hi.saturating_sub(1);
        let pick = if (goal - cum[lo]).abs() <= (cum[hi] - goal).abs() { lo } else { hi };
        let prev = *nodes.last().unwrap();
        if pick <= prev || pick >= last {
            return None;
        }
        nodes.push(pick);
    }
    nodes.push(last);
    let masses: Vec<f64> = nodes.windows(2).map(|w| cum[w[1]] - cum[w[0]]).collect();
    masses.iter().all(|&x| x < bound).then_some((nodes, masses))
}

// ---------------------------------------------------------------------------
// Bounds

/// `log2 A = log2 f0 + 2^{2+16MΦ} log2(2^{1/δ} + f0)`.
pub fn iteration_bound(f0: f64, delta: f64, m: f64, total_mass: f64) -> Result<f64> {
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(Error::Domain(format!("f0 must be positive, got {f0}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    if !(m >= 0.0) || !(total_mass >= 0.0) {
        return Err(Error::Domain(format!("M and Phi must be nonnegative, got {m}, {total_mass}")));
    }
    let inv = 1.0 / delta;
    // log2(2^{1/δ} + f0) without forming 2^{1/δ}
    let base = inv + (f0 * (-inv * std::f64::consts::LN_2).exp()).ln_1p() / std::f64::consts::LN_2;
    let exponent = (2.0 + 16.0 * m * total_mass).exp2();
    Ok(f0.log2() + exponent * base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub segment: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub sigma: f64,
    pub mass: f64,
    pub mass_bound: f64,
    /// Largest `log2 f` on the segment.
    pub max_log2_f: f64,
    /// `log2(4^{1/σ_i} f0)`.
    pub log2_envelope: f64,
    /// Smallest `σ_i ln(envelope / f)` over the segment's nodes.
    pub margin: f64,
    /// Largest deviation of `σ_i ln f` from the closed form.
    pub closed_form_w_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeSample {
    pub segment: usize,
    pub t: f64,
    pub log2_f: f64,
    pub log2_envelope: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCertificate {
    pub partition: Partition,
    pub n: usize,
    /// Closed-form bound; absent for explicit σ-sequences.
    pub log2_a: Option<f64>,
    pub segments: Vec<SegmentCheck>,
    pub samples: Vec<EnvelopeSample>,
    /// Largest segment envelope, the empirical bound on `log2 f`.
    pub max_log2_envelope: f64,
}

impl BoundCertificate {
    pub fn masses(&self) -> &[f64] {
        &self.partition.masses
    }

    pub fn min_margin(&self) -> f64 {
        self.segments.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn summary_line(&self) -> String {
        let a = match self.log2_a {
            Some(v) => format!("{v:.6e}"),
            None => "n/a".into(),
        };
        format!(
            "n={} Phi={:.6e} log2_A={} max_log2_envelope={:.6e} min_margin={:.3e}",
            self.n,
            self.partition.total_mass,
            a,
            self.max_log2_envelope,
            self.min_margin()
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for s in &self.segments {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Chain the worst-case trajectories segment by segment (σ_i on segment i)
/// and check `f^{σ_i} <= 4 f0^{σ_i}` at every node.
pub fn certify_bound(p: &GronwallProblem) -> Result<BoundCertificate> {
    let partition = partition_by_mass(&p.phi, p.t_end(), p.m)?;
    let n = partition.n();
    let sigmas = p.sigmas(n)?;
    let mesh = &partition.mesh;
    let cum = mesh.cumulative();
    let ln_f0 = p.f0.ln();
    let log2_f0 = p.f0.log2();
    let mut ln_f = ln_f0;
    let mut segments = Vec::with_capacity(n);
    let mut samples = Vec::new();
    for i in 0..n {
        let (a, b) = (partition.nodes[i], partition.nodes[i + 1]);
        let sigma = sigmas[i];
        let run = run_equality(mesh, &cum, p.m, sigma, sigma * ln_f, a, b);
        if let Some(t) = run.stopped_at {
            return Err(Error::Certification(format!(
                "segment {i}: trajectory with sigma = {sigma:e} hit the overflow guard at t = {t}"
            )));
        }
        let env_w = 4f64.ln() + sigma * ln_f0;
        let log2_env = 2.0 / sigma + log2_f0;
        let mut margin = f64::INFINITY;
        let mut max_log2 = f64::NEG_INFINITY;
        for (j, &w) in run.w.iter().enumerate() {
            let node = a + j;
            let log2_f = w / sigma / std::f64::consts::LN_2;
            let slack = env_w - w;
            if slack < -1e-12 * env_w.abs().max(1.0) {
                return Err(Error::Certification(format!(
                    "segment {i} at t = {}: log2 f = {log2_f:e} exceeds envelope {log2_env:e}",
                    mesh.times[node]
                )));
            }
            margin = margin.min(slack);
            max_log2 = max_log2.max(log2_f);
            samples.push(EnvelopeSample {
                segment: i,
                t: mesh.times[node],
                log2_f,
                log2_envelope: log2_env,
            });
        }
        ln_f = run.w[run.w.len() - 1] / sigma;
        segments.push(SegmentCheck {
            segment: i,
            t_start: mesh.times[a],
            t_end: mesh.times[b],
            sigma,
            mass: partition.masses[i],
            mass_bound: partition.mass_bound,
            max_log2_f: max_log2,
            log2_envelope: log2_env,
            margin,
            closed_form_w_err: run.max_w_err,
        });
    }
    let log2_a = match p.sigma {
        SigmaSpec::Delta(d) => Some(iteration_bound(p.f0, d, p.m, partition.total_mass)?),
        SigmaSpec::Sequence(_) => None,
    };
    let max_log2_envelope = segments.iter().map(|s| s.log2_envelope).fold(f64::NEG_INFINITY, f64::max);
    if let Some(a) = log2_a {
        if max_log2_envelope > a * (1.0 + 1e-12) {
            return Err(Error::Certification(format!(
                "segment envelope 2^{max_log2_envelope:e} exceeds the closed-form bound 2^{a:e}"
            )));
        }
    }
    Ok(BoundCertificate {
        partition,
        n,
        log2_a,
        segments,
        samples,
        max_log2_envelope,
    })
}

// ---------------------------------------------------------------------------
// Shifted inequality with linear forcing

/// The problem for `h = (1+g) exp(-E(t))`, `E(t) = M1 ∫V1 + M2 ∫V2`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorollaryTransform {
    pub problem: GronwallProblem,
    pub forcing: Forcing,
    /// `exp(σ E(T))` with σ the largest exponent in use.
    pub multiplier: f64,
}

impl CorollaryTransform {
    /// `ln(1+g)` bound from a `ln h` bound at time `t`.
    pub fn log1p_g_bound(&self, t: f64, ln_h: f64) -> f64 {
        ln_h + self.forcing.exponent(t)
    }

    /// `g <= h exp(E(t)) - 1`.
    pub fn g_bound(&self, t: f64, ln_h: f64) -> f64 {
        self.log1p_g_bound(t, ln_h).exp_m1()
    }
}

pub fn corollary_transform(p: &GronwallProblem) -> Result<CorollaryTransform> {
    let forcing = p.forcing.clone().unwrap_or_else(|| Forcing {
        m1: 0.0,
        v1: SampledFn::zero_like(&p.phi),
        m2: 0.0,
        v2: SampledFn::zero_like(&p.phi),
    });
    let total = forcing.exponent(p.t_end());
    let multiplier = (p.sigma_max() * total).exp();
    let problem = GronwallProblem::new(1.0 + p.f0, p.m * multiplier, p.sigma.clone(), p.phi.clone())?;
    Ok(CorollaryTransform {
        problem,
        forcing,
        multiplier,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorollaryCheck {
    pub times: Vec<f64>,
    /// `ln(1+g)` of the worst-case trajectory.
    pub log1p_g: Vec<f64>,
    /// Certified bound on `ln(1+g)`.
    pub log1p_bound: Vec<f64>,
}

impl CorollaryCheck {
    pub fn min_margin(&self) -> f64 {
        self.log1p_bound
            .iter()
            .zip(&self.log1p_g)
            .map(|(b, g)| b - g)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Integrate `g' = (M/σ_i) g^{1+σ_i} φ + M1 V1 g + M2 V2` directly (in
/// `z = ln(1+g)`) on the transformed certificate's segments and compare with
/// the propagated bound.
pub fn check_corollary(p: &GronwallProblem) -> Result<(CorollaryTransform, BoundCertificate, CorollaryCheck)> {
    let tr = corollary_transform(p)?;
    let cert = certify_bound(&tr.problem)?;
    let mesh = &cert.partition.mesh;
    let sigmas = tr.problem.sigmas(cert.n)?;
    let fc = &tr.forcing;
    let ln_h0 = tr.problem.f0.ln();
    let mut times = vec![mesh.times[0]];
    let mut log1p_g = vec![p.f0.ln_1p()];
    let mut log1p_bound = vec![tr.log1p_g_bound(mesh.times[0], 4f64.ln() / sigmas[0] + ln_h0)];
    let mut z = p.f0.ln_1p();
    let mut h = 0.0;
    for i in 0..cert.n {
        let sigma = sigmas[i];
        let ln_h_env = 4f64.ln() / sigma + ln_h0;
        let rhs = |t: f64, z: f64| {
            let g = z.exp_m1();
            let growth = if g > 0.0 {
                (p.m / sigma) * ((1.0 + sigma) * g.ln() - z).exp() * p.phi.eval(t)
            } else {
                0.0
            };
            growth + fc.m1 * fc.v1.eval(t) * g / (1.0 + g) + fc.m2 * fc.v2.eval(t) * (-z).exp()
        };
        let tol = |z: f64| (1e-12 * z.abs()).max(1e-12 * sigma);
        for k in cert.partition.nodes[i]..cert.partition.nodes[i + 1] {
            let (t0, t1) = (mesh.times[k], mesh.times[k + 1]);
            z = adaptive_rk4(&rhs, t0, t1, z, &mut h, tol, f64::MAX).map_err(|t| {
                Error::Certification(format!("direct integration stalled at t = {t} (segment {i})"))
            })?;
            times.push(t1);
            log1p_g.push(z);
            log1p_bound.push(tr.log1p_g_bound(t1, ln_h_env));
        }
    }
    let check = CorollaryCheck {
        times,
        log1p_g,
        log1p_bound,
    };
    if check.min_margin() < -1e-9 {
        return Err(Error::Certification(format!(
            "direct trajectory exceeds the propagated bound by {:e}",
            -check.min_margin()
        )));
    }
    Ok((tr, cert, check))
}

// ---------------------------------------------------------------------------
// Randomized suite

/// Uniform cubic B-spline with nonnegative control points, sampled on `samples` nodes.
fn random_spline(rng: &mut ChaCha8Rng, samples: usize) -> Vec<f64> {
    let controls: Vec<f64> = (0..rng.random_range(4..12))
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    let pieces = (controls.len() - 3) as f64;
    (0..samples)
        .map(|i| {
            let u = (i as f64 / (samples - 1) as f64 * pieces).min(pieces - 1e-12);
            let k = u.floor() as usize;
            let s = u - k as f64;
            let b = [
                (1.0 - s).powi(3) / 6.0,
                (3.0 * s.powi(3) - 6.0 * s * s + 4.0) / 6.0,
                (-3.0 * s.powi(3) + 3.0 * s * s + 3.0 * s + 1.0) / 6.0,
                s.powi(3) / 6.0,
            ];
            (0..4).map(|j| controls[k + j] * b[j]).sum::<f64>().max(0.0)
        })
        .collect()
}

/// A random admissible problem: `f0, M` in `[0.1, 10]`, `δ` in `[0.05, 0.5]`,
/// `φ` a nonnegative spline with `16 M Φ` in `[0, 32]`.
pub fn random_problem(rng: &mut ChaCha8Rng) -> Result<GronwallProblem> {
    let f0 = rng.random_range(0.1..=10.0);
    let m = rng.random_range(0.1..=10.0);
    let delta = rng.random_range(0.05..=0.5);
    let t_end = rng.random_range(0.5..=2.0);
    let samples = 129;
    let mut values = random_spline(rng, samples);
    let probe = SampledFn::from_fn(0.0, t_end, samples, |_| 1.0)?;
    let raw = SampledFn::new(probe.times.clone(), values.clone())?.integral();
    let goal = rng.random_range(0.0..2.0) / m;
    if raw > 0.0 {
        values.iter_mut().for_each(|v| *v *= goal / raw);
    }
    let phi = SampledFn::new(probe.times, values)?;
    GronwallProblem::new(f0, m, SigmaSpec::Delta(delta), phi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub problems: usize,
    pub passed: usize,
    pub failures: Vec<(usize, String)>,
    pub min_margin: f64,
    pub max_segments: usize,
    pub max_closed_form_w_err: f64,
}

/// Certify `count` random problems in parallel; problem `i` uses stream `i`.
pub fn random_certification_suite(seed: u64, count: usize) -> SuiteReport {
    let results: Vec<std::result::Result<BoundCertificate, String>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let p = random_problem(&mut rng).map_err(|e| e.to_string())?;
            certify_bound(&p).map_err(|e| e.to_string())
        })
        .collect();
    let mut report = SuiteReport {
        problems: count,
        passed: 0,
        failures: Vec::new(),
        min_margin: f64::INFINITY,
        max_segments: 0,
        max_closed_form_w_err: 0.0,
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => {
                report.passed += 1;
                report.min_margin = report.min_margin.min(c.min_margin());
                report.max_segments = report.max_segments.max(c.n);
                for s in &c.segments {
                    report.max_closed_form_w_err = report.max_closed_form_w_err.max(s.closed_form_w_err);
                }
            }
            Err(e) => report.failures.push((i, e)),
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_problem(t_end: f64, sigma: SigmaSpec) -> GronwallProblem {
        let phi = SampledFn::constant(1.0, t_end, 1001).unwrap();
        GronwallProblem::new(1.0, 1.0, sigma, phi).unwrap()
    }

    #[test]
    fn zero_forcing_keeps_f_constant() {
        let phi = SampledFn::constant(0.0, 1.0, 11).unwrap();
        let p = GronwallProblem::new(2.5, 3.0, SigmaSpec::Delta(0.2), phi).unwrap();
        let tr = integrate_equality_ode(&p, 0.3).unwrap();
        assert!(tr.blow_up.is_none());
        for l in &tr.log_f {
            assert!((l - 2.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn power_law_solution() {
        let p = unit_problem(0.5, SigmaSpec::Delta(0.2));
        let tr = integrate_equality_ode(&p, 0.2).unwrap();
        let f_end = tr.final_log_f().exp();
        assert!((f_end - 32.0).abs() / 32.0 < 1e-8, "f(0.5) = {f_end}");
        assert!(tr.closed_form_rel_err < CLOSED_FORM_TOL);
        for (t, l) in tr.times.iter().zip(&tr.log_f) {
            let exact = (1.0 - t).powf(-5.0);
            assert!((l.exp() - exact).abs() / exact < 1e-8);
        }
    }

    #[test]
    fn blow_up_time_detected() {
        let p = unit_problem(2.0, SigmaSpec::Delta(0.2));
        let tr = integrate_equality_ode(&p, 0.2).unwrap();
        let b = tr.blow_up.expect("blow-up expected");
        assert!((b.t_star.unwrap() - 1.0).abs() < 1e-12);
        assert!(b.stopped_at < 1.0 && b.stopped_at > 0.99);
    }

    #[test]
    fn smooth_phi_matches_closed_form() {
        let phi = SampledFn::from_fn(0.0, 1.0, 401, |t| 1.0 + (6.0 * t).sin()).unwrap();
        let p = GronwallProblem::new(0.7, 0.5, SigmaSpec::Delta(0.1), phi.clone()).unwrap();
        for sigma in [0.5, 0.1, 0.01, 1e-4] {
            let tr = integrate_equality_ode(&p, sigma).unwrap();
            assert!(tr.closed_form_rel_err < CLOSED_FORM_TOL, "sigma {sigma}: {}", tr.closed_form_rel_err);
            let mass = phi.integral();
            if let Some(exact) = closed_form_log_f(0.7, 0.5, sigma, mass) {
                if tr.blow_up.is_none() {
                    assert!((tr.final_log_f() - exact).abs() < 1e-8 * exact.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn partition_of_unit_mass() {
        let phi = SampledFn::constant(1.0, 1.0, 1001).unwrap();
        let part = partition_by_mass(&phi, 1.0, 1.0).unwrap();
        assert_eq!(part.n(), 17);
        for (i, w) in part.times.windows(2).enumerate() {
            assert!((w[1] - w[0] - 1.0 / 17.0).abs() <= 1e-3 + 1e-12, "segment {i}");
        }
        assert!(part.masses.iter().all(|&m| m < 1.0 / 16.0));
        assert!((part.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_of_zero_mass() {
        let phi = SampledFn::constant(0.0, 3.0, 5).unwrap();
        let part = partition_by_mass(&phi, 3.0, 2.0).unwrap();
        assert_eq!(part.n(), 1);
        assert_eq!(part.times, vec![0.0, 3.0]);
    }

    #[test]
    fn partition_of_narrow_bump() {
        let width = 0.01;
        let raw = SampledFn::from_fn(0.0, 1.0, 201, |t| {
            let x = (t - 0.5) / width;
            (1.0 - x * x).max(0.0)
        })
        .unwrap();
        let scale = 0.5 / raw.integral();
        let phi = SampledFn::new(raw.times().to_vec(), raw.values().iter().map(|v| v * scale).collect()).unwrap();
        let part = partition_by_mass(&phi, 1.0, 1.0).unwrap();
        assert_eq!(part.n(), 9);
        assert!(part.masses.iter().all(|&m| m < 1.0 / 16.0));
        let inner: Vec<f64> = part.times[1..part.n()].to_vec();
        assert!(inner.iter().all(|t| (t - 0.5).abs() <= width), "{inner:?}");
    }

    #[test]
    fn coarse_mesh_without_refinement_fails() {
        let phi = SampledFn::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        match partition_by_mass_with(&phi, 1.0, 1.0, 0) {
            Err(Error::MeshTooCoarse(_)) => {}
            other => panic!("expected MeshTooCoarse, got {other:?}"),
        }
        let part = partition_by_mass(&phi, 1.0, 1.0).unwrap();
        assert_eq!(part.n(), 9);
        assert!(part.refinements > 0);
    }

    #[test]
    fn iteration_bound_examples() {
        let v = iteration_bound(1.0, 0.2, 1.0, 1.0).unwrap();
        assert!((v - 2f64.powi(18) * 33f64.log2()).abs() < 1e-6);
        assert!((v - 1.3224e6).abs() / 1.3224e6 < 1e-4);
        let z = iteration_bound(3.0, 0.5, 2.0, 0.0).unwrap();
        assert!((z - (3f64.log2() + 4.0 * 7f64.log2())).abs() < 1e-12);
        let a = iteration_bound(1.0, 1.0, 1.0, 1.0 / 16.0).unwrap();
        assert!((a.exp2() - 6561.0).abs() < 1e-6);
        assert!(iteration_bound(0.0, 0.2, 1.0, 1.0).is_err());
        assert!(iteration_bound(1.0, 0.0, 1.0, 1.0).is_err());
        assert!(iteration_bound(1.0, 1e-4, 1.0, 0.0).unwrap().is_finite());
    }

    #[test]
    fn reference_certificate() {
        let p = unit_problem(1.0, SigmaSpec::Delta(0.2));
        let c = certify_bound(&p).unwrap();
        assert_eq!(c.n, 17);
        assert_eq!(c.segments.len(), 17);
        assert!(c.min_margin() > 0.0);
        let s1 = first_sigma(1.0, 0.2);
        assert_eq!(s1, 0.2);
        for (k, s) in c.segments.iter().enumerate() {
            assert_eq!(s.sigma, 0.2 * 0.5f64.powi(k as i32));
            assert!(s.max_log2_f <= s.log2_envelope);
        }
        assert!(c.max_log2_envelope <= c.log2_a.unwrap());
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 18);
        assert!(c.summary_line().contains("log2_A="));
    }

    #[test]
    fn zero_phi_certificate() {
        let phi = SampledFn::constant(0.0, 1.0, 11).unwrap();
        let p = GronwallProblem::new(3.0, 1.0, SigmaSpec::Delta(0.3), phi).unwrap();
        let c = certify_bound(&p).unwrap();
        assert_eq!(c.n, 1);
        let s = &c.segments[0];
        assert!((s.max_log2_f - 3f64.log2()).abs() < 1e-12);
        assert!((s.log2_envelope - (2.0 / s.sigma + 3f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn concentrated_phi_certificate() {
        let phi = SampledFn::from_fn(0.0, 1.0, 2001, |t| if t < 0.02 { 100.0 } else { 0.0 }).unwrap();
        let p = GronwallProblem::new(5.0, 2.0, SigmaSpec::Delta(0.25), phi).unwrap();
        let c = certify_bound(&p).unwrap();
        assert!(c.n > 30);
        assert!(c.min_margin() > 0.0);
    }

    #[test]
    fn explicit_sequence_is_thinned() {
        let seq: Vec<f64> = (1..200).map(|k| 1.0 / k as f64).collect();
        let s = normalize_sequence(4.0, &seq);
        assert!(4f64.powf(s[0]) <= 2.0);
        assert!(s.windows(2).all(|w| w[1] <= 0.5 * w[0]));
        let phi = SampledFn::constant(0.1, 1.0, 101).unwrap();
        let p = GronwallProblem::new(4.0, 1.0, SigmaSpec::Sequence(seq), phi).unwrap();
        let c = certify_bound(&p).unwrap();
        assert!(c.log2_a.is_none());
        assert_eq!(c.n, 2);
    }

    #[test]
    fn corollary_multiplier() {
        let phi = SampledFn::constant(1.0, 1.0, 101).unwrap();
        let v1 = SampledFn::constant(1.0, 1.0, 101).unwrap();
        let v2 = SampledFn::zero_like(&v1);
        let p = GronwallProblem::new(1.0, 1.0, SigmaSpec::Delta(0.1), phi)
            .unwrap()
            .with_forcing(1.0, v1, 0.0, v2)
            .unwrap();
        let tr = corollary_transform(&p).unwrap();
        assert!((tr.multiplier - 0.1f64.exp()).abs() < 1e-14);
        assert!((tr.problem.m - 0.1f64.exp()).abs() < 1e-14);
        assert_eq!(tr.problem.f0, 2.0);
    }

    #[test]
    fn corollary_without_forcing_only_shifts() {
        let phi = SampledFn::constant(1.0, 1.0, 11).unwrap();
        let p = GronwallProblem::new(0.5, 2.0, SigmaSpec::Delta(0.1), phi).unwrap();
        let tr = corollary_transform(&p).unwrap();
        assert_eq!(tr.multiplier, 1.0);
        assert_eq!(tr.problem.m, 2.0);
        assert_eq!(tr.problem.f0, 1.5);
        assert_eq!(tr.g_bound(0.7, 1.5f64.ln()), 0.5);
    }

    #[test]
    fn corollary_end_to_end() {
        let phi = SampledFn::constant(1.0, 0.5, 501).unwrap();
        let v1 = SampledFn::constant(1.0, 0.5, 501).unwrap();
        let v2 = SampledFn::zero_like(&v1);
        let p = GronwallProblem::new(1.0, 1.0, SigmaSpec::Delta(0.2), phi)
            .unwrap()
            .with_forcing(1.0, v1, 0.0, v2)
            .unwrap();
        let (_, cert, check) = check_corollary(&p).unwrap();
        assert_eq!(check.times.len(), cert.partition.mesh.len());
        assert!(check.min_margin() > 0.0);
        assert!(check.log1p_g.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn random_suite_small() {
        let r = random_certification_suite(3, 64);
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        assert!(r.min_margin > 0.0);
        assert!(r.max_closed_form_w_err < 1e-10, "{}", r.max_closed_form_w_err);
    }
}
