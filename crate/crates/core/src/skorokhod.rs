//! Deterministic Skorokhod machinery for bounded-variation drivers.
//!
//! A [`BVDriver`] alternates free interior curves with boundary holds. On a
//! hold at `x_j` the local time grows linearly at rate `eta_j`, the position
//! stays put, and the spin follows the exact exponential flow. The driver
//! built by [`construct_steering_driver`] steers any start `(x0, s0)` to
//! `(z, 0)` at the terminal time.

use std::fmt;

use crate::domain::{DomainSpec, Region};
use crate::error::{Result, SbmError};
use crate::fields::{solve_lambda, AnchorSet, FieldSet};
use crate::integrator::spin_update_in_place;
use crate::vecmath::distance;

const CONTINUITY_TOL: f64 = 1e-9;
const CLEARANCE_SAMPLES: usize = 1000;
/// How far the inner control points are pulled towards the hub.
const HUB_PULL: f64 = 0.5;

/// Cubic Bézier curve `p0 -> p1` with inner control points `c0`, `c1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicCurve {
    pub p0: Vec<f64>,
    pub c0: Vec<f64>,
    pub c1: Vec<f64>,
    pub p1: Vec<f64>,
}

impl CubicCurve {
    /// Curve whose inner control points lie between the endpoints and an
    /// interior `hub`; for convex domains every inner point is interior.
    pub fn through_hub(p0: &[f64], p1: &[f64], hub: &[f64]) -> Self {
        let pull = |p: &[f64]| -> Vec<f64> {
            p.iter()
                .zip(hub)
                .map(|(a, h)| a + HUB_PULL * (h - a))
                .collect()
        };
        CubicCurve {
            p0: p0.to_vec(),
            c0: pull(p0),
            c1: pull(p1),
            p1: p1.to_vec(),
        }
    }

    pub fn eval(&self, u: f64) -> Vec<f64> {
        let v = 1.0 - u;
        let (b0, b1, b2, b3) = (v * v * v, 3.0 * v * v * u, 3.0 * v * u * u, u * u * u);
        (0..self.p0.len())
            .map(|i| b0 * self.p0[i] + b1 * self.c0[i] + b2 * self.c1[i] + b3 * self.p1[i])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentKind {
    FreeCurve(CubicCurve),
    BoundaryHold { point: Vec<f64>, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
}

impl Segment {
    fn start_point(&self) -> &[f64] {
        match &self.kind {
            SegmentKind::FreeCurve(c) => &c.p0,
            SegmentKind::BoundaryHold { point, .. } => point,
        }
    }

    fn end_point(&self) -> &[f64] {
        match &self.kind {
            SegmentKind::FreeCurve(c) => &c.p1,
            SegmentKind::BoundaryHold { point, .. } => point,
        }
    }
}

/// Piecewise driver on `[0, total_time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BVDriver {
    pub segments: Vec<Segment>,
    pub total_time: f64,
}

impl BVDriver {
    /// Check the partition, continuity, hold placement and curve clearance.
    pub fn validate(&self, d: &DomainSpec) -> Result<()> {
        let err = |segment: usize, reason: String| Err(SbmError::InvalidDriver { segment, reason });
        if self.segments.is_empty() {
            return err(0, "driver has no segments".into());
        }
        let ttol = 1e-12 * self.total_time.max(1.0);
        let mut clock = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            if (seg.start - clock).abs() > ttol {
                return err(i, format!("starts at {} but previous segment ends at {clock}", seg.start));
            }
            if !(seg.end > seg.start) {
                return err(i, "empty or reversed interval".into());
            }
            clock = seg.end;
            if i > 0 {
                let gap = distance(self.segments[i - 1].end_point(), seg.start_point());
                if gap > CONTINUITY_TOL {
                    return err(i, format!("discontinuous driver, jump of {gap}"));
                }
            }
            match &seg.kind {
                SegmentKind::BoundaryHold { point, rate } => {
                    if !(rate.is_finite() && *rate >= 0.0) {
                        return err(i, format!("hold rate {rate} is not a finite non-negative number"));
                    }
                    match d.classify(point) {
                        Ok(Region::Boundary) => {}
                        _ => return err(i, format!("hold point {point:?} is not on the boundary")),
                    }
                }
                SegmentKind::FreeCurve(c) => {
                    for k in 1..CLEARANCE_SAMPLES {
                        let u = k as f64 / CLEARANCE_SAMPLES as f64;
                        let x = c.eval(u);
                        match d.classify(&x) {
                            Ok(Region::Interior) => {}
                            _ => {
                                return err(i, format!("curve leaves the interior at u = {u}: {x:?}"))
                            }
                        }
                    }
                }
            }
        }
        if (clock - self.total_time).abs() > ttol {
            return err(
                self.segments.len() - 1,
                format!("segments end at {clock}, not at {}", self.total_time),
            );
        }
        Ok(())
    }

    /// Structured text form: one header line plus one line per segment.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for BVDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "driver segments={} total_time={:.12e}",
            self.segments.len(),
            self.total_time
        )?;
        for (i, s) in self.segments.iter().enumerate() {
            match &s.kind {
                SegmentKind::FreeCurve(c) => writeln!(
                    f,
                    "segment {i} [{:.12e}, {:.12e}] curve p0={} c0={} c1={} p1={}",
                    s.start,
                    s.end,
                    fmt_vec(&c.p0),
                    fmt_vec(&c.c0),
                    fmt_vec(&c.c1),
                    fmt_vec(&c.p1)
                )?,
                SegmentKind::BoundaryHold { point, rate } => writeln!(
                    f,
                    "segment {i} [{:.12e}, {:.12e}] hold point={} rate={:.12e}",
                    s.start,
                    s.end,
                    fmt_vec(point),
                    rate
                )?,
            }
        }
        Ok(())
    }
}

/// Sampled solution of the deterministic reflected system.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterministicPath {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub l: Vec<f64>,
}

impl DeterministicPath {
    pub fn final_x(&self) -> &[f64] {
        self.x.last().expect("non-empty path")
    }

    pub fn final_s(&self) -> &[f64] {
        self.s.last().expect("non-empty path")
    }

    pub fn final_l(&self) -> f64 {
        *self.l.last().expect("non-empty path")
    }
}

/// Solve the system driven by `drv` from `(x0, s0)`, sampling each segment at
/// `samples_per_segment + 1` points (shared endpoints are not repeated).
pub fn solve_deterministic(
    drv: &BVDriver,
    d: &DomainSpec,
    f: &FieldSet,
    x0: &[f64],
    s0: &[f64],
    samples_per_segment: usize,
) -> Result<DeterministicPath> {
    drv.validate(d)?;
    if s0.len() != f.spin_dim() {
        return Err(SbmError::InvalidInput("s0 has the wrong dimension".into()));
    }
    let gap = distance(x0, drv.segments[0].start_point());
    if gap > CONTINUITY_TOL {
        return Err(SbmError::InvalidDriver {
            segment: 0,
            reason: format!("driver starts {gap} away from x0"),
        });
    }
    let m = samples_per_segment.max(1);
    let mut path = DeterministicPath {
        times: vec![0.0],
        x: vec![x0.to_vec()],
        s: vec![s0.to_vec()],
        l: vec![0.0],
    };
    let mut s_start = s0.to_vec();
    let mut l_start = 0.0;
    let mut g = vec![0.0; f.spin_dim()];
    for seg in &drv.segments {
        let len = seg.end - seg.start;
        for k in 1..=m {
            let u = k as f64 / m as f64;
            let t = seg.start + u * len;
            path.times.push(t);
            match &seg.kind {
                SegmentKind::FreeCurve(c) => {
                    path.x.push(if k == m { c.p1.clone() } else { c.eval(u) });
                    path.s.push(s_start.clone());
                    path.l.push(l_start);
                }
                SegmentKind::BoundaryHold { point, rate } => {
                    f.g_into(point, &mut g);
                    let alpha = f.alpha_at(point);
                    let dl = rate * u * len;
                    let mut s = s_start.clone();
                    spin_update_in_place(&mut s, &g, alpha, dl);
                    path.x.push(point.clone());
                    path.s.push(s);
                    path.l.push(l_start + dl);
                }
            }
        }
        s_start = path.s.last().unwrap().clone();
        l_start = *path.l.last().unwrap();
    }
    Ok(path)
}

/// Terminal spin from the product form
/// `s(T) = s0 prod_m y_m^{-1} + sum_m (g_m/alpha_m)(y_m - 1) prod_{i>=m} y_i^{-1}`
/// with `y_m = exp(alpha_m * eta_m * |hold_m|)`.
pub fn terminal_spin_product_form(drv: &BVDriver, f: &FieldSet, s0: &[f64]) -> Vec<f64> {
    let holds: Vec<(Vec<f64>, f64, f64)> = drv
        .segments
        .iter()
        .filter_map(|seg| match &seg.kind {
            SegmentKind::BoundaryHold { point, rate } => {
                let alpha = f.alpha_at(point);
                let y = (alpha * rate * (seg.end - seg.start)).exp();
                Some((f.g(point), alpha, y))
            }
            SegmentKind::FreeCurve(_) => None,
        })
        .collect();
    let total: f64 = holds.iter().map(|h| h.2).product();
    let mut out: Vec<f64> = s0.iter().map(|v| v / total).collect();
    for m in 0..holds.len() {
        let (g, alpha, y) = &holds[m];
        let tail: f64 = holds[m..].iter().map(|h| h.2).product();
        for i in 0..out.len() {
            out[i] += g[i] / alpha * (y - 1.0) / tail;
        }
    }
    out
}

/// Build the driver that steers `(x0, s0)` to `(z, 0)` at time `t_final`.
///
/// `[0, t_final]` is split uniformly into `2(p+1) + 1` pieces: a curve to
/// the first anchor, then alternately a hold at anchor `m` and a curve to the
/// next anchor, and a final curve to `z`. With `lambda` the minimum-sum
/// non-negative expansion of `-s0` in the anchors' `g` values, hold `m` has
/// `y_m = 1 + alpha_m lambda_m / prod_{i<m} y_i` and rate
/// `eta_m = ln(y_m) / (alpha_m |hold_m|)`.
pub fn construct_steering_driver(
    d: &DomainSpec,
    f: &FieldSet,
    anchors: &AnchorSet,
    x0: &[f64],
    s0: &[f64],
    z: &[f64],
    t_final: f64,
) -> Result<BVDriver> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(SbmError::InvalidInput(format!("T must be positive, got {t_final}")));
    }
    if d.classify(z)? != Region::Interior {
        return Err(SbmError::Domain(format!("target {z:?} is not interior")));
    }
    if !d.in_closure(x0) {
        return Err(SbmError::Domain(format!("start {x0:?} is outside the closure")));
    }
    if s0.len() != f.spin_dim() || anchors.points.len() != f.spin_dim() + 1 {
        return Err(SbmError::InvalidInput("spin dimension mismatch".into()));
    }
    let target: Vec<f64> = s0.iter().map(|v| -v).collect();
    let lambda = solve_lambda(&target, &anchors.g_vectors)?;

    let holds = anchors.points.len();
    let pieces = 2 * holds + 1;
    let h = t_final / pieces as f64;
    let at = |k: usize| if k == pieces { t_final } else { k as f64 * h };

    let mut segments = Vec::with_capacity(pieces);
    let mut prefix = 1.0;
    let mut from = x0.to_vec();
    for (m, point) in anchors.points.iter().enumerate() {
        let k = 2 * m;
        segments.push(Segment {
            start: at(k),
            end: at(k + 1),
            kind: SegmentKind::FreeCurve(CubicCurve::through_hub(&from, point, z)),
        });
        let alpha = anchors.alpha_values[m];
        let y = 1.0 + alpha * lambda[m] / prefix;
        let rate = y.ln() / (alpha * (at(k + 2) - at(k + 1)));
        prefix *= y;
        segments.push(Segment {
            start: at(k + 1),
            end: at(k + 2),
            kind: SegmentKind::BoundaryHold {
                point: point.clone(),
                rate,
            },
        });
        from = point.clone();
    }
    segments.push(Segment {
        start: at(pieces - 1),
        end: t_final,
        kind: SegmentKind::FreeCurve(CubicCurve::through_hub(&from, z, z)),
    });
    let drv = BVDriver {
        segments,
        total_time: t_final,
    };
    drv.validate(d)?;
    Ok(drv)
}

/// Outcome of [`random_round_trips`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTripSummary {
    pub instances: usize,
    pub max_spin_error: f64,
    pub max_position_error: f64,
    pub elapsed: std::time::Duration,
}

/// Build and solve `instances` random steering problems on the unit disk,
/// cycling the spin dimension through 1, 2, 3. Each instance has `p + 1`
/// anchors with piecewise constant `g` and `alpha` (nearest anchor by angle)
/// whose `g` values surround the origin, a random start on or inside the
/// boundary, a random spin in `[-2, 2]^p`, and a random interior target.
pub fn random_round_trips(instances: usize, seed: u64) -> Result<RoundTripSummary> {
    use crate::fields::{ScalarField, Sided, VectorField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = DomainSpec::unit_disk();
    let mut max_spin_error: f64 = 0.0;
    let mut max_position_error: f64 = 0.0;
    for k in 0..instances {
        let p = 1 + k % 3;
        let angles: Vec<f64> = (0..=p)
            .map(|j| TAU * (j as f64 + 0.5 * rng.random::<f64>()) / (p + 1) as f64)
            .collect();
        let basis = loop {
            let w: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let det = nalgebra::DMatrix::from_fn(p, p, |i, j| w[j][i]).determinant();
            if det.abs() > 0.1 {
                break w;
            }
        };
        let mut gs = basis.clone();
        let mut last = vec![0.0; p];
        for w in &basis {
            let c = rng.random_range(0.2..1.5);
            for i in 0..p {
                last[i] -= c * w[i];
            }
        }
        gs.push(last);
        let alphas: Vec<f64> = (0..=p).map(|_| rng.random_range(0.5..2.0)).collect();

        let nearest = {
            let angles = angles.clone();
            move |x: &[f64]| -> usize {
                let t = x[1].atan2(x[0]).rem_euclid(TAU);
                let gap = |a: f64| {
                    let d = (t - a).rem_euclid(TAU);
                    d.min(TAU - d)
                };
                (0..angles.len())
                    .min_by(|&i, &j| gap(angles[i]).total_cmp(&gap(angles[j])))
                    .unwrap()
            }
        };
        let (n1, n2) = (nearest.clone(), nearest);
        let g_tab = gs.clone();
        let a_tab = alphas.clone();
        let g_sup = gs.iter().map(|v| crate::vecmath::norm(v)).fold(0.0, f64::max);
        let a_inf = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        let f = FieldSet::builder(Sided::All(VectorField::custom(p, move |x, out| {
            out.copy_from_slice(&g_tab[n1(x)])
        })))
        .alpha(Sided::All(ScalarField::Custom(Arc::new(move |x: &[f64]| a_tab[n2(x)]))))
        .bounds(g_sup, a_inf)
        .build(&d)?;

        let points: Vec<Vec<f64>> = angles.iter().map(|a| vec![a.cos(), a.sin()]).collect();
        let anchors = AnchorSet::new(&d, &f, points)?;
        let x0 = if rng.random::<f64>() < 0.3 {
            let a = rng.random_range(0.0..TAU);
            vec![a.cos(), a.sin()]
        } else {
            let (r, a) = (0.95 * rng.random::<f64>().sqrt(), rng.random_range(0.0..TAU));
            vec![r * a.cos(), r * a.sin()]
        };
        let s0: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (r, a) = (0.9 * rng.random::<f64>().sqrt(), rng.random_range(0.0..TAU));
        let z = vec![r * a.cos(), r * a.sin()];
        let t_final = rng.random_range(0.5..5.0);

        let drv = construct_steering_driver(&d, &f, &anchors, &x0, &s0, &z, t_final)?;
        let path = solve_deterministic(&drv, &d, &f, &x0, &s0, 4)?;
        max_spin_error = max_spin_error.max(crate::vecmath::norm(path.final_s()));
        max_position_error = max_position_error.max(distance(path.final_x(), &z));
    }
    Ok(RoundTripSummary {
        instances,
        max_spin_error,
        max_position_error,
        elapsed: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ScalarField, Sided, VectorField};
    use std::f64::consts::PI;

    fn one_d_pm() -> (DomainSpec, FieldSet) {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::Walls {
            top: VectorField::Constant(vec![1.0]),
            bottom: VectorField::Constant(vec![-1.0]),
        })
        .build(&d)
        .unwrap();
        (d, f)
    }

    #[test]
    fn curve_only_driver_keeps_spin() {
        let (d, f) = one_d_pm();
        let drv = BVDriver {
            segments: vec![Segment {
                start: 0.0,
                end: 1.0,
                kind: SegmentKind::FreeCurve(CubicCurve::through_hub(
                    &[1.0, 0.5],
                    &[2.0, -0.5],
                    &[1.5, 0.0],
                )),
            }],
            total_time: 1.0,
        };
        let p = solve_deterministic(&drv, &d, &f, &[1.0, 0.5], &[0.3], 10).unwrap();
        assert_eq!(p.final_s(), &[0.3]);
        assert_eq!(p.final_l(), 0.0);
        assert_eq!(p.final_x(), &[2.0, -0.5]);
    }

    #[test]
    fn single_hold_matches_closed_form() {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::All(VectorField::Constant(vec![1.0, 0.0])))
            .build(&d)
            .unwrap();
        let drv = BVDriver {
            segments: vec![Segment {
                start: 0.0,
                end: 2.0,
                kind: SegmentKind::BoundaryHold {
                    point: vec![1.0, 1.0],
                    rate: 2f64.ln() / 2.0,
                },
            }],
            total_time: 2.0,
        };
        let p = solve_deterministic(&drv, &d, &f, &[1.0, 1.0], &[0.0, 0.0], 4).unwrap();
        let s = p.final_s();
        assert!((s[0] - 0.5).abs() < 1e-15 && s[1] == 0.0);
        assert!((p.final_l() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn p1_inductive_solve_by_hand() {
        let (d, f) = one_d_pm();
        let anchors = AnchorSet::new(&d, &f, vec![vec![1.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let drv =
            construct_steering_driver(&d, &f, &anchors, &[0.5, 0.0], &[0.5], &[3.0, 0.2], 5.0)
                .unwrap();
        let rates: Vec<(f64, f64)> = drv
            .segments
            .iter()
            .filter_map(|s| match &s.kind {
                SegmentKind::BoundaryHold { rate, .. } => Some((*rate, s.end - s.start)),
                _ => None,
            })
            .collect();
        assert_eq!(rates.len(), 2);
        assert_eq!(rates[0].0, 0.0);
        assert!((rates[1].0 - 1.5f64.ln() / rates[1].1).abs() < 1e-15);
        let p = solve_deterministic(&drv, &d, &f, &[0.5, 0.0], &[0.5], 8).unwrap();
        assert!(p.final_s()[0].abs() < 1e-12);
        assert!(distance(p.final_x(), &[3.0, 0.2]) < 1e-12);
    }

    #[test]
    fn zero_spin_needs_no_local_time() {
        let (d, f) = one_d_pm();
        let anchors = AnchorSet::new(&d, &f, vec![vec![1.0, 1.0], vec![2.0, -1.0]]).unwrap();
        let drv =
            construct_steering_driver(&d, &f, &anchors, &[0.5, 0.0], &[0.0], &[3.0, 0.2], 1.0)
                .unwrap();
        let p = solve_deterministic(&drv, &d, &f, &[0.5, 0.0], &[0.0], 8).unwrap();
        assert_eq!(p.final_l(), 0.0);
        assert_eq!(p.final_s(), &[0.0]);
    }

    #[test]
    fn product_form_agrees_with_stepwise() {
        let d = DomainSpec::unit_disk();
        let f = FieldSet::builder(Sided::All(VectorField::Fourier {
            offset: vec![0.1, 0.0],
            cos: vec![1.0, 0.0],
            sin: vec![0.0, 1.0],
        }))
        .alpha(Sided::All(ScalarField::Fourier {
            offset: 1.5,
            cos: 0.5,
            sin: 0.0,
        }))
        .build(&d)
        .unwrap();
        let pts: Vec<Vec<f64>> = [0.3, 2.4, 4.4]
            .iter()
            .map(|t: &f64| vec![t.cos(), t.sin()])
            .collect();
        let anchors = AnchorSet::new(&d, &f, pts).unwrap();
        let s0 = [0.7, -1.2];
        let drv = construct_steering_driver(&d, &f, &anchors, &[0.0, 0.3], &s0, &[0.1, -0.2], 2.0)
            .unwrap();
        let p = solve_deterministic(&drv, &d, &f, &[0.0, 0.3], &s0, 16).unwrap();
        let closed = terminal_spin_product_form(&drv, &f, &s0);
        for (a, b) in closed.iter().zip(p.final_s()) {
            assert!((a - b).abs() < 1e-12);
            assert!(a.abs() < 1e-12);
        }
        // local time is non-decreasing and flat on curves
        for w in p.l.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn hold_flow_matches_fine_rk4() {
        // ds/dt = eta (g - alpha s) integrated on a fine grid
        let (g, alpha, eta, len) = ([0.8, -0.3], 1.7, 0.9, 1.3);
        let s0 = [0.4, 0.6];
        let n = 20_000;
        let h = len / n as f64;
        let rhs = |s: [f64; 2]| [eta * (g[0] - alpha * s[0]), eta * (g[1] - alpha * s[1])];
        let mut s = s0;
        for _ in 0..n {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let mut closed = s0.to_vec();
        spin_update_in_place(&mut closed, &g, alpha, eta * len);
        assert!((closed[0] - s[0]).abs() < 1e-12 && (closed[1] - s[1]).abs() < 1e-12);
    }

    #[test]
    fn invalid_drivers_name_the_segment() {
        let (d, f) = one_d_pm();
        let drv = BVDriver {
            segments: vec![
                Segment {
                    start: 0.0,
                    end: 1.0,
                    kind: SegmentKind::FreeCurve(CubicCurve::through_hub(
                        &[0.0, 0.0],
                        &[1.0, 1.0],
                        &[0.5, 0.0],
                    )),
                },
                Segment {
                    start: 1.0,
                    end: 2.0,
                    kind: SegmentKind::BoundaryHold {
                        point: vec![1.0, 0.5],
                        rate: 1.0,
                    },
                },
            ],
            total_time: 2.0,
        };
        let e = solve_deterministic(&drv, &d, &f, &[0.0, 0.0], &[0.0], 4).unwrap_err();
        assert!(matches!(e, SbmError::InvalidDriver { segment: 1, .. }), "{e}");

        let mut gap = drv.clone();
        gap.segments[1].start = 1.5;
        assert!(matches!(
            gap.validate(&d),
            Err(SbmError::InvalidDriver { segment: 1, .. })
        ));

        let outside = BVDriver {
            segments: vec![Segment {
                start: 0.0,
                end: 1.0,
                kind: SegmentKind::FreeCurve(CubicCurve {
                    p0: vec![0.0, 0.0],
                    c0: vec![0.0, 3.0],
                    c1: vec![1.0, 3.0],
                    p1: vec![1.0, 0.0],
                }),
            }],
            total_time: 1.0,
        };
        assert!(matches!(
            outside.validate(&d),
            Err(SbmError::InvalidDriver { segment: 0, .. })
        ));
    }

    #[test]
    fn random_round_trips_land_on_target() {
        let r = random_round_trips(30, 17).unwrap();
        assert_eq!(r.instances, 30);
        assert!(r.max_spin_error < 1e-9, "{}", r.max_spin_error);
        assert!(r.max_position_error < 1e-9, "{}", r.max_position_error);
    }

    #[test]
    fn text_block_golden() {
        let (d, f) = one_d_pm();
        let anchors = AnchorSet::new(&d, &f, vec![vec![0.0, 1.0], vec![PI, -1.0]]).unwrap();
        let drv =
            construct_steering_driver(&d, &f, &anchors, &[0.0, 1.0], &[0.5], &[1.0, 0.0], 5.0)
                .unwrap();
        let text = drv.to_text();
        let expected = "\
driver segments=5 total_time=5.000000000000e0
segment 0 [0.000000000000e0, 1.000000000000e0] curve p0=(0.000000000000e0, 1.000000000000e0) c0=(5.000000000000e-1, 5.000000000000e-1) c1=(5.000000000000e-1, 5.000000000000e-1) p1=(0.000000000000e0, 1.000000000000e0)
segment 1 [1.000000000000e0, 2.000000000000e0] hold point=(0.000000000000e0, 1.000000000000e0) rate=0.000000000000e0
segment 2 [2.000000000000e0, 3.000000000000e0] curve p0=(0.000000000000e0, 1.000000000000e0) c0=(5.000000000000e-1, 5.000000000000e-1) c1=(2.070796326795e0, -5.000000000000e-1) p1=(3.141592653590e0, -1.000000000000e0)
segment 3 [3.000000000000e0, 4.000000000000e0] hold point=(3.141592653590e0, -1.000000000000e0) rate=4.054651081082e-1
segment 4 [4.000000000000e0, 5.000000000000e0] curve p0=(3.141592653590e0, -1.000000000000e0) c0=(2.070796326795e0, -5.000000000000e-1) c1=(1.000000000000e0, 0.000000000000e0) p1=(1.000000000000e0, 0.000000000000e0)
";
        assert_eq!(text, expected);
    }
}
