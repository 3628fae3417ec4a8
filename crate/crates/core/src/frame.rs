//! Time-varying right-handed orthonormal frames `(τ, ν, β)` built from a
//! sampled unit-vector path `β(t)` with finitely many jumps.
//!
//! A path is cut into segments on which `(Δt)^{1/2}·‖β′‖_{L²} < 1/5` holds for
//! the discrete forward differences. On each segment one coordinate axis is
//! chosen as the "special" axis (smallest `|β_a|` at the segment start), and
//!
//! ```text
//! ν = (-β_q, β_p, 0) / sqrt(β_p² + β_q²)   (in the cyclic order (p, q, a))
//! τ = ν × β
//! ```
//!
//! Sample values follow a right-continuous convention: a sample shared by two
//! adjacent segments takes the frame of the later one.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{add, cross, dot, norm, normalize, scale, sub, triple, Vec3};

/// Segment mass threshold: `(Δt)^{1/2} ‖β′‖_{L²} < 1/5`.
pub const SEGMENT_BOUND: f64 = 0.2;

/// Bound asserted for `(|τ′| + |ν′|) / |β′|` inside a segment.
pub const DERIVATIVE_RATIO_BOUND: f64 = 10.0;

/// Tolerance on orthonormality and orientation.
pub const FRAME_TOL: f64 = 1e-10;

const UNIT_TOL: f64 = 1e-12;

/// Sampled unit-vector path.
///
/// `jumps` lists sample indices `j` at which a new continuous piece starts; the
/// discontinuity lies between samples `j - 1` and `j`, which may share the same
/// time (left and right limits).
#[derive(Clone, Debug, PartialEq)]
pub struct UnitPath {
    times: Vec<f64>,
    values: Vec<Vec3>,
    jumps: Vec<usize>,
}

impl UnitPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec3>, mut jumps: Vec<usize>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidPath(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidPath("need at least two samples".into()));
        }
        jumps.sort_unstable();
        jumps.dedup();
        if jumps.iter().any(|&j| j == 0 || j >= times.len()) {
            return Err(Error::InvalidPath("jump index out of range".into()));
        }
        for (i, v) in values.iter().enumerate() {
            let n = norm(*v);
            if !n.is_finite() || (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidPath(format!("sample {i} has |β| = {n}")));
            }
        }
        for i in 1..times.len() {
            let dt = times[i] - times[i - 1];
            let is_jump = jumps.binary_search(&i).is_ok();
            if !dt.is_finite() || dt < 0.0 || (dt == 0.0 && !is_jump) {
                return Err(Error::InvalidPath(format!(
                    "times must increase (sample {i}, Δt = {dt})"
                )));
            }
        }
        let path = UnitPath {
            times,
            values,
            jumps,
        };
        if path.pieces().iter().any(|(a, b)| b == a) {
            return Err(Error::InvalidPath(
                "every continuous piece needs at least two samples".into(),
            ));
        }
        Ok(path)
    }

    /// Build from unnormalized samples, normalizing each value.
    pub fn from_unnormalized(times: Vec<f64>, values: Vec<Vec3>, jumps: Vec<usize>) -> Result<Self> {
        let values = values
            .into_iter()
            .map(|v| {
                let n = norm(v);
                if n > 0.0 && n.is_finite() {
                    Ok(scale(v, 1.0 / n))
                } else {
                    Err(Error::InvalidPath("zero or non-finite sample".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        UnitPath::new(times, values, jumps)
    }

    /// Sample `f` on a uniform mesh of `samples` points over `[t0, t1]`.
    pub fn sample(t0: f64, t1: f64, samples: usize, f: impl Fn(f64) -> Vec3) -> Result<Self> {
        let times: Vec<f64> = (0..samples)
            .map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64)
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        UnitPath::from_unnormalized(times, values, Vec::new())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn jumps(&self) -> &[usize] {
        &self.jumps
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Continuous pieces as inclusive sample ranges.
    pub fn pieces(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut start = 0;
        for &j in &self.jumps {
            out.push((start, j - 1));
            start = j;
        }
        out.push((start, self.times.len() - 1));
        out
    }

    /// Squared discrete `L²` mass of `β′` over samples `a..=b`.
    fn derivative_mass(&self, a: usize, b: usize) -> f64 {
        (a..b)
            .map(|i| {
                let dt = self.times[i + 1] - self.times[i];
                let d = sub(self.values[i + 1], self.values[i]);
                dot(d, d) / dt
            })
            .sum()
    }

    /// `(t_b - t_a)^{1/2} ‖β′‖_{L²(t_a, t_b)}` in the discrete sense.
    pub fn segment_measure(&self, a: usize, b: usize) -> f64 {
        ((self.times[b] - self.times[a]) * self.derivative_mass(a, b)).sqrt()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for i in 0..self.len() {
            let v = self.values[i];
            wtr.serialize(PathRow {
                t: self.times[i],
                b1: v[0],
                b2: v[1],
                b3: v[2],
                jump: u8::from(self.jumps.binary_search(&i).is_ok()),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read `t,b1,b2,b3,jump` rows; values are renormalized to unit length.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut jumps = Vec::new();
        for (i, row) in rdr.deserialize::<PathRow>().enumerate() {
            let row = row?;
            times.push(row.t);
            values.push([row.b1, row.b2, row.b3]);
            if row.jump != 0 {
                jumps.push(i);
            }
        }
        UnitPath::from_unnormalized(times, values, jumps)
    }
}

#[derive(Serialize, Deserialize)]
struct PathRow {
    t: f64,
    b1: f64,
    b2: f64,
    b3: f64,
    jump: u8,
}

/// Inclusive sample range of one partition segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// True when the segment begins at a β-jump (or at the first sample).
    pub starts_piece: bool,
}

impl Segment {
    pub fn samples(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Refine the path's pieces greedily so every segment satisfies the
/// `1/5` mass condition. Jump locations are always segment boundaries.
pub fn partition_path(beta: &UnitPath) -> Result<Vec<Segment>> {
    let bound_sq = SEGMENT_BOUND * SEGMENT_BOUND;
    let t = &beta.times;
    let mut segments = Vec::new();
    for (a, b) in beta.pieces() {
        let mut cur = a;
        let mut first = true;
        while cur < b {
            let mut mass = 0.0;
            let mut end = cur;
            while end < b {
                let dt = t[end + 1] - t[end];
                let d = sub(beta.values[end + 1], beta.values[end]);
                let step = dot(d, d) / dt;
                if !step.is_finite() {
                    return Err(Error::InvalidPath(format!(
                        "β′ is not square-summable near sample {end}"
                    )));
                }
                if (t[end + 1] - t[cur]) * (mass + step) >= bound_sq {
                    break;
                }
                mass += step;
                end += 1;
            }
            if end == cur {
                return Err(Error::Partition(format!(
                    "a single step at sample {cur} already violates the 1/5 segment bound; refine the mesh"
                )));
            }
            segments.push(Segment {
                start: cur,
                end,
                t_start: t[cur],
                t_end: t[end],
                starts_piece: first,
            });
            first = false;
            cur = end;
        }
        // a one-step tail cannot carry second-order derivatives; borrow a sample
        let k = segments.len();
        if k >= 2 && segments[k - 1].samples() == 2 && !segments[k - 1].starts_piece {
            let (prev, last) = (segments[k - 2], segments[k - 1]);
            let shifted = last.start - 1;
            if prev.samples() >= 4 && beta.segment_measure(shifted, last.end) < SEGMENT_BOUND {
                segments[k - 2].end = shifted;
                segments[k - 2].t_end = t[shifted];
                segments[k - 1].start = shifted;
                segments[k - 1].t_start = t[shifted];
            }
        }
    }
    Ok(segments)
}

/// Orthonormal frame sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameSample {
    pub tau: Vec3,
    pub nu: Vec3,
    pub beta: Vec3,
}

/// Time derivatives of a frame sample.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameRates {
    pub tau: Vec3,
    pub nu: Vec3,
    pub beta: Vec3,
}

impl FrameRates {
    pub fn zero() -> Self {
        FrameRates::default()
    }

    pub fn is_zero(&self) -> bool {
        [self.tau, self.nu, self.beta]
            .iter()
            .all(|v| v.iter().all(|&c| c == 0.0))
    }

    /// `|τ′|² + |ν′|² + |β′|²`.
    pub fn energy(&self) -> f64 {
        dot(self.tau, self.tau) + dot(self.nu, self.nu) + dot(self.beta, self.beta)
    }
}

impl FrameSample {
    /// Frame from `β` using special axis `axis` (0-based).
    pub fn from_beta(beta: Vec3, axis: usize) -> FrameSample {
        let p = (axis + 1) % 3;
        let q = (axis + 2) % 3;
        let s = (beta[p] * beta[p] + beta[q] * beta[q]).sqrt();
        let mut nu = [0.0; 3];
        nu[p] = -beta[q] / s;
        nu[q] = beta[p] / s;
        let tau = cross(nu, beta);
        FrameSample { tau, nu, beta }
    }

    /// Coordinate-aligned frame with `β = e_axis`, right-handed.
    pub fn axis_aligned(axis: usize) -> FrameSample {
        let mut beta = [0.0; 3];
        beta[axis] = 1.0;
        let mut tau = [0.0; 3];
        tau[(axis + 1) % 3] = 1.0;
        let mut nu = [0.0; 3];
        nu[(axis + 2) % 3] = 1.0;
        FrameSample { tau, nu, beta }
    }

    /// Frame for a unit `β` using the default special-axis rule.
    pub fn for_beta(beta: Vec3) -> FrameSample {
        FrameSample::from_beta(beta, special_axis(beta))
    }

    /// Index of the axis `β` is aligned with, if any.
    pub fn aligned_axis(&self) -> Option<usize> {
        (0..3).find(|&a| (self.beta[a].abs() - 1.0).abs() < 1e-14)
    }

    /// Largest violation of orthonormality and of `τ·(ν×β) = 1`.
    pub fn defect(&self) -> f64 {
        let d = [
            dot(self.tau, self.nu).abs(),
            dot(self.nu, self.beta).abs(),
            dot(self.beta, self.tau).abs(),
            (norm(self.tau) - 1.0).abs(),
            (norm(self.nu) - 1.0).abs(),
            (norm(self.beta) - 1.0).abs(),
            (triple(self.tau, self.nu, self.beta) - 1.0).abs(),
        ];
        d.into_iter().fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.defect();
        if d > FRAME_TOL || !d.is_finite() {
            return Err(Error::InvalidFrame(format!("orthonormality defect {d:.3e}")));
        }
        Ok(())
    }

    /// Rotate `(τ, ν)` by `angle` inside the perpendicular plane.
    pub fn rotated_in_plane(&self, angle: f64) -> FrameSample {
        let (s, c) = angle.sin_cos();
        FrameSample {
            tau: add(scale(self.tau, c), scale(self.nu, s)),
            nu: add(scale(self.tau, -s), scale(self.nu, c)),
            beta: self.beta,
        }
    }

    /// Re-orthonormalize around `β` keeping `ν` close to its input.
    fn reorthonormalize(beta: Vec3, nu: Vec3) -> FrameSample {
        let beta = normalize(beta);
        let nu = normalize(sub(nu, scale(beta, dot(nu, beta))));
        let tau = cross(nu, beta);
        FrameSample { tau, nu, beta }
    }
}

/// Axis with the smallest `|β_a|`; ties prefer axis 3, then the lowest index.
pub fn special_axis(beta: Vec3) -> usize {
    let mut best = 2;
    for a in [0usize, 1] {
        if beta[a].abs() < beta[best].abs() {
            best = a;
        }
    }
    best
}

/// Segment of a constructed frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameSegment {
    pub segment: Segment,
    /// Special axis (0-based) used on this segment.
    pub axis: usize,
    /// Boundary at the start of this segment is not a β-jump but `(τ, ν)` may
    /// still jump there because the special axis changed.
    pub artificial_jump: bool,
}

/// Sampled frame on the path's time mesh.
#[derive(Clone, Debug)]
pub struct Frame {
    times: Vec<f64>,
    samples: Vec<FrameSample>,
    segment_of: Vec<usize>,
    segments: Vec<FrameSegment>,
}

/// Build the frame segment by segment.
pub fn build_frame(beta: &UnitPath) -> Result<Frame> {
    let parts = partition_path(beta)?;
    let mut samples = vec![FrameSample::axis_aligned(2); beta.len()];
    let mut segment_of = vec![0usize; beta.len()];
    let mut segments = Vec::with_capacity(parts.len());
    let mut prev_axis: Option<usize> = None;
    for (si, seg) in parts.iter().enumerate() {
        let b0 = beta.values[seg.start];
        let axis = special_axis(b0);
        debug_assert!(b0[axis].abs() < 0.6, "a unit vector always has a component below 3/5");
        for i in seg.start..=seg.end {
            let b = beta.values[i];
            if b[axis].abs() >= 0.8 {
                return Err(Error::Partition(format!(
                    "|β_{}| = {:.4} reached 4/5 inside segment {si}",
                    axis + 1,
                    b[axis].abs()
                )));
            }
            samples[i] = FrameSample::from_beta(b, axis);
            segment_of[i] = si;
        }
        let artificial_jump = !seg.starts_piece && prev_axis.is_some_and(|p| p != axis);
        segments.push(FrameSegment {
            segment: *seg,
            axis,
            artificial_jump,
        });
        prev_axis = Some(axis);
    }
    Ok(Frame {
        times: beta.times.clone(),
        samples,
        segment_of,
        segments,
    })
}

impl Frame {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[FrameSample] {
        &self.samples
    }

    pub fn segments(&self) -> &[FrameSegment] {
        &self.segments
    }

    /// Segment id owning each sample.
    pub fn segment_ids(&self) -> &[usize] {
        &self.segment_of
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest orthonormality/orientation defect over all samples.
    pub fn max_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.defect()).fold(0.0, f64::max)
    }

    /// Smallest `det[τ, ν, β]` and largest over all samples.
    pub fn determinant_range(&self) -> (f64, f64) {
        self.samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let d = triple(s.tau, s.nu, s.beta);
            (lo.min(d), hi.max(d))
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for (i, s) in self.samples.iter().enumerate() {
            wtr.serialize(FrameRow {
                t: self.times[i],
                tau1: s.tau[0],
                tau2: s.tau[1],
                tau3: s.tau[2],
                nu1: s.nu[0],
                nu2: s.nu[1],
                nu3: s.nu[2],
                beta1: s.beta[0],
                beta2: s.beta[1],
                beta3: s.beta[2],
                segment_id: self.segment_of[i],
            })?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRow {
    t: f64,
    tau1: f64,
    tau2: f64,
    tau3: f64,
    nu1: f64,
    nu2: f64,
    nu3: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    segment_id: usize,
}

/// Per-sample derivatives `(τ′, ν′, β′)`.
#[derive(Clone, Debug)]
pub struct FrameDerivatives {
    pub rates: Vec<FrameRates>,
}

impl FrameDerivatives {
    /// Largest `(|τ′| + |ν′|) - bound·|β′|` over all samples (≤ 0 when the
    /// bound holds everywhere).
    pub fn ratio_excess(&self, bound: f64) -> f64 {
        self.rates
            .iter()
            .map(|r| norm(r.tau) + norm(r.nu) - bound * norm(r.beta))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest `(|τ′| + |ν′|)/|β′|` over samples where `|β′| > floor`.
    pub fn max_ratio(&self, floor: f64) -> f64 {
        self.rates
            .iter()
            .filter(|r| norm(r.beta) > floor)
            .map(|r| (norm(r.tau) + norm(r.nu)) / norm(r.beta))
            .fold(0.0, f64::max)
    }
}

/// Derivative of the quadratic through three points, evaluated at `x`.
fn lagrange3(x: f64, xs: [f64; 3], fs: [Vec3; 3]) -> Vec3 {
    let [x0, x1, x2] = xs;
    let w0 = (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let w1 = (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let w2 = (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
    add(add(scale(fs[0], w0), scale(fs[1], w1)), scale(fs[2], w2))
}

/// Second-order finite differences of `(τ, ν, β)` inside each segment:
/// centered at interior samples, one-sided at segment ends. Each segment uses
/// its own special-axis formula, so frame jumps never leak into derivatives.
pub fn frame_derivatives(frame: &Frame) -> Result<FrameDerivatives> {
    let mut rates = vec![FrameRates::zero(); frame.len()];
    for (si, fs) in frame.segments.iter().enumerate() {
        let seg = fs.segment;
        if seg.samples() < 3 {
            return Err(Error::DegenerateSegment {
                segment: si,
                samples: seg.samples(),
            });
        }
        let local: Vec<FrameSample> = (seg.start..=seg.end)
            .map(|i| FrameSample::from_beta(frame.samples[i].beta, fs.axis))
            .collect();
        for i in seg.start..=seg.end {
            // the shared end sample belongs to the next segment
            if frame.segment_of[i] != si {
                continue;
            }
            let c = if i == seg.start {
                seg.start + 1
            } else if i == seg.end {
                seg.end - 1
            } else {
                i
            };
            let idx = [c - 1, c, c + 1];
            let xs = idx.map(|j| frame.times[j]);
            let pick = |f: fn(&FrameSample) -> Vec3| idx.map(|j| f(&local[j - seg.start]));
            let x = frame.times[i];
            rates[i] = FrameRates {
                tau: lagrange3(x, xs, pick(|s| s.tau)),
                nu: lagrange3(x, xs, pick(|s| s.nu)),
                beta: lagrange3(x, xs, pick(|s| s.beta)),
            };
        }
    }
    Ok(FrameDerivatives { rates })
}

/// Source of frame values and rates at arbitrary times.
pub trait FrameProvider: Sync {
    fn frame_at(&self, t: f64) -> FrameSample;
    fn rates_at(&self, t: f64) -> FrameRates;

    /// Sampling interval and spacing, for providers defined on a mesh.
    fn mesh(&self) -> Option<(f64, f64, f64)> {
        None
    }
}

/// Time-independent frame.
#[derive(Clone, Copy, Debug)]
pub struct ConstantFrame(pub FrameSample);

impl FrameProvider for ConstantFrame {
    fn frame_at(&self, _t: f64) -> FrameSample {
        self.0
    }

    fn rates_at(&self, _t: f64) -> FrameRates {
        FrameRates::zero()
    }
}

/// `β(t) = (cos ωt, sin ωt, 0)`, `ν = (-sin ωt, cos ωt, 0)`, `τ = (0, 0, -1)`.
#[derive(Clone, Copy, Debug)]
pub struct RotatingFrame {
    pub omega: f64,
}

impl FrameProvider for RotatingFrame {
    fn frame_at(&self, t: f64) -> FrameSample {
        let (s, c) = (self.omega * t).sin_cos();
        FrameSample {
            tau: [0.0, 0.0, -1.0],
            nu: [-s, c, 0.0],
            beta: [c, s, 0.0],
        }
    }

    fn rates_at(&self, t: f64) -> FrameRates {
        let (s, c) = (self.omega * t).sin_cos();
        let w = self.omega;
        FrameRates {
            tau: [0.0; 3],
            nu: [-w * c, -w * s, 0.0],
            beta: [-w * s, w * c, 0.0],
        }
    }
}

/// Frame sampled on a mesh, looked up by linear interpolation inside segments
/// followed by re-orthonormalization.
#[derive(Clone, Debug)]
pub struct SampledFrame {
    times: Vec<f64>,
    samples: Vec<FrameSample>,
    rates: Vec<FrameRates>,
    segment_of: Vec<usize>,
}

impl SampledFrame {
    pub fn new(frame: &Frame, derivs: &FrameDerivatives) -> Self {
        SampledFrame {
            times: frame.times.clone(),
            samples: frame.samples.clone(),
            rates: derivs.rates.clone(),
            segment_of: frame.segment_of.clone(),
        }
    }

    pub fn from_path(beta: &UnitPath) -> Result<Self> {
        let frame = build_frame(beta)?;
        let d = frame_derivatives(&frame)?;
        Ok(SampledFrame::new(&frame, &d))
    }

    /// Read a frame CSV (`t, tau1..3, nu1..3, beta1..3, segment_id`); rates
    /// are recomputed by finite differences within each segment id.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut times = Vec::new();
        let mut samples = Vec::new();
        let mut segment_of = Vec::new();
        for row in rdr.deserialize::<FrameRow>() {
            let row = row?;
            times.push(row.t);
            let s = FrameSample {
                tau: [row.tau1, row.tau2, row.tau3],
                nu: [row.nu1, row.nu2, row.nu3],
                beta: [row.beta1, row.beta2, row.beta3],
            };
            s.validate()?;
            samples.push(s);
            segment_of.push(row.segment_id);
        }
        if times.is_empty() {
            return Err(Error::InvalidFrame("empty frame file".into()));
        }
        let mut rates = vec![FrameRates::zero(); times.len()];
        let mut start = 0;
        while start < times.len() {
            let mut end = start;
            while end + 1 < times.len() && segment_of[end + 1] == segment_of[start] {
                end += 1;
            }
            if end - start + 1 >= 3 {
                for i in start..=end {
                    let c = i.clamp(start + 1, end - 1);
                    let idx = [c - 1, c, c + 1];
                    let xs = idx.map(|j| times[j]);
                    let pick = |f: fn(&FrameSample) -> Vec3| idx.map(|j| f(&samples[j]));
                    rates[i] = FrameRates {
                        tau: lagrange3(times[i], xs, pick(|s| s.tau)),
                        nu: lagrange3(times[i], xs, pick(|s| s.nu)),
                        beta: lagrange3(times[i], xs, pick(|s| s.beta)),
                    };
                }
            } else if end > start {
                return Err(Error::DegenerateSegment {
                    segment: segment_of[start],
                    samples: end - start + 1,
                });
            }
            start = end + 1;
        }
        Ok(SampledFrame {
            times,
            samples,
            rates,
            segment_of,
        })
    }

    pub fn t_range(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty"))
    }

    /// Mesh spacing statistics: smallest positive step.
    pub fn min_step(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min)
    }

    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        // right-continuous: pick the last sample with time <= t
        let i = self.times.partition_point(|&x| x <= t) - 1;
        let j = i + 1;
        if self.segment_of[i] != self.segment_of[j] || self.times[j] == self.times[i] {
            return (i, i, 0.0);
        }
        let w = (t - self.times[i]) / (self.times[j] - self.times[i]);
        (i, j, w)
    }
}

impl FrameProvider for SampledFrame {
    fn mesh(&self) -> Option<(f64, f64, f64)> {
        let (a, b) = self.t_range();
        Some((a, b, self.min_step()))
    }

    fn frame_at(&self, t: f64) -> FrameSample {
        let (i, j, w) = self.locate(t);
        if i == j || w == 0.0 {
            return self.samples[i];
        }
        let lerp = |a: Vec3, b: Vec3| add(scale(a, 1.0 - w), scale(b, w));
        FrameSample::reorthonormalize(
            lerp(self.samples[i].beta, self.samples[j].beta),
            lerp(self.samples[i].nu, self.samples[j].nu),
        )
    }

    fn rates_at(&self, t: f64) -> FrameRates {
        let (i, j, w) = self.locate(t);
        let lerp = |a: Vec3, b: Vec3| add(scale(a, 1.0 - w), scale(b, w));
        FrameRates {
            tau: lerp(self.rates[i].tau, self.rates[j].tau),
            nu: lerp(self.rates[i].nu, self.rates[j].nu),
            beta: lerp(self.rates[i].beta, self.rates[j].beta),
        }
    }
}

/// Random smooth unit path on `[0, 1]` with `jumps` random discontinuities.
///
/// Each piece is a normalized random trigonometric curve; jump samples are
/// duplicated in time so the left and right limits are both recorded.
pub fn random_smooth_path<R: Rng>(rng: &mut R, samples_per_piece: usize, jumps: usize) -> UnitPath {
    let mut cuts: Vec<f64> = (0..jumps).map(|_| rng.random_range(0.15..0.85)).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    let mut bounds = vec![0.0];
    bounds.extend(cuts);
    bounds.push(1.0);
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut jump_idx = Vec::new();
    for w in bounds.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let base = normalize(std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
        let amps: Vec<(Vec3, f64, f64)> = (0..3)
            .map(|_| {
                (
                    std::array::from_fn(|_| rng.random_range(-0.25..0.25)),
                    rng.random_range(0.5..5.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        let curve = |t: f64| {
            let mut v = base;
            for (a, f, ph) in &amps {
                v = add(v, scale(*a, (f * t + ph).sin()));
            }
            normalize(v)
        };
        if !times.is_empty() {
            jump_idx.push(times.len());
        }
        for i in 0..samples_per_piece {
            let t = if i + 1 == samples_per_piece {
                t1
            } else {
                t0 + (t1 - t0) * i as f64 / (samples_per_piece - 1) as f64
            };
            times.push(t);
            values.push(curve(t));
        }
    }
    UnitPath::new(times, values, jump_idx).expect("generated path is valid")
}
