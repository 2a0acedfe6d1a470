//! State-domain geometry: membership, inward normals, boundary distance,
//! projection onto the closure and periodic wrapping.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SbmError};
use crate::vecmath::{all_finite, distance, norm, norm_sq};

/// Default boundary tolerance for deterministic paths.
pub const DETERMINISTIC_TOLERANCE: f64 = 1e-12;

/// Slack on `phi >= 0` accepted as "in the closure" after a numeric projection.
const PHI_SLACK: f64 = 1e-12;

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

/// Boundary tolerance appropriate for a path simulated with time step `dt`.
pub fn simulated_tolerance(dt: f64) -> f64 {
    dt.sqrt() * 1e-3
}

/// A `C^2` function whose positive set is the domain and whose zero set is
/// the boundary.
pub trait LevelSet: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Unsigned distance to the boundary when known in closed form.
    fn boundary_distance(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Closed-form nearest-point projection onto the boundary, if available.
    fn project_to_boundary(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Points spread along the boundary, if the level set knows how to
    /// parametrize it.
    fn boundary_samples(&self, _count: usize) -> Option<Vec<Vec<f64>>> {
        None
    }

    /// Scalar coordinate along the boundary used by Fourier fields.
    fn boundary_parameter(&self, x: &[f64]) -> f64 {
        if x.len() >= 2 {
            x[1].atan2(x[0])
        } else {
            x[0]
        }
    }

    /// Maximum distance from which the numeric projection is trusted.
    fn reach(&self) -> f64 {
        f64::INFINITY
    }
}

/// The disk `|x - c| < r`, with `phi = (r^2 - |x - c|^2) / r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Disk {
    pub fn unit() -> Self {
        Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }
}

impl LevelSet for Disk {
    fn dim(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        (self.radius * self.radius - dx * dx - dy * dy) / self.radius
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -2.0 * (x[0] - self.center[0]) / self.radius;
        out[1] = -2.0 * (x[1] - self.center[1]) / self.radius;
    }

    fn boundary_distance(&self, x: &[f64]) -> Option<f64> {
        let r = distance(x, &self.center);
        Some((self.radius - r).abs())
    }

    fn project_to_boundary(&self, x: &[f64], out: &mut [f64]) -> bool {
        let r = distance(x, &self.center);
        if r == 0.0 {
            return false;
        }
        out[0] = self.center[0] + self.radius * (x[0] - self.center[0]) / r;
        out[1] = self.center[1] + self.radius * (x[1] - self.center[1]) / r;
        true
    }

    fn boundary_samples(&self, count: usize) -> Option<Vec<Vec<f64>>> {
        Some(
            (0..count)
                .map(|k| {
                    let th = 2.0 * PI * k as f64 / count as f64;
                    vec![
                        self.center[0] + self.radius * th.cos(),
                        self.center[1] + self.radius * th.sin(),
                    ]
                })
                .collect(),
        )
    }

    fn boundary_parameter(&self, x: &[f64]) -> f64 {
        (x[1] - self.center[1]).atan2(x[0] - self.center[0])
    }
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A level set given by a pair of closures. Projection uses damped Newton
/// iteration along the gradient.
pub struct ClosureLevelSet {
    dim: usize,
    phi: Box<ScalarFn>,
    grad: Box<GradFn>,
    reach: f64,
}

impl ClosureLevelSet {
    pub fn new(
        dim: usize,
        phi: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        ClosureLevelSet {
            dim,
            phi: Box::new(phi),
            grad: Box::new(grad),
            reach: f64::INFINITY,
        }
    }

    pub fn with_reach(mut self, reach: f64) -> Self {
        self.reach = reach;
        self
    }
}

impl LevelSet for ClosureLevelSet {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.phi)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
    fn reach(&self) -> f64 {
        self.reach
    }
}

#[derive(Clone)]
pub enum DomainKind {
    /// The strip `|y| < half_width` with `x` identified modulo `period`.
    Wristband { period: f64, half_width: f64 },
    SmoothPhi(Arc<dyn LevelSet>),
}

impl fmt::Debug for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::Wristband { period, half_width } => f
                .debug_struct("Wristband")
                .field("period", period)
                .field("half_width", half_width)
                .finish(),
            DomainKind::SmoothPhi(ls) => write!(f, "SmoothPhi(dim = {})", ls.dim()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Interior,
    Boundary,
    Exterior,
}

/// Which wall of the wristband a boundary point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wall {
    Top,
    Bottom,
}

#[derive(Debug, Clone)]
pub struct DomainSpec {
    kind: DomainKind,
    boundary_tolerance: f64,
}

impl DomainSpec {
    pub fn wristband(period: f64, half_width: f64) -> Result<Self> {
        if !(period > 0.0 && period.is_finite() && half_width > 0.0 && half_width.is_finite()) {
            return Err(SbmError::InvalidInput(format!(
                "wristband needs positive period and half width, got {period}, {half_width}"
            )));
        }
        Ok(DomainSpec {
            kind: DomainKind::Wristband { period, half_width },
            boundary_tolerance: DETERMINISTIC_TOLERANCE,
        })
    }

    /// The standard wristband: period `2π`, half width 1.
    pub fn standard_wristband() -> Self {
        Self::wristband(2.0 * PI, 1.0).expect("valid constants")
    }

    pub fn smooth_phi(level_set: Arc<dyn LevelSet>) -> Self {
        DomainSpec {
            kind: DomainKind::SmoothPhi(level_set),
            boundary_tolerance: DETERMINISTIC_TOLERANCE,
        }
    }

    pub fn unit_disk() -> Self {
        Self::smooth_phi(Arc::new(Disk::unit()))
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(SbmError::InvalidInput(format!(
                "boundary tolerance must be positive, got {tol}"
            )));
        }
        self.boundary_tolerance = tol;
        Ok(self)
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn boundary_tolerance(&self) -> f64 {
        self.boundary_tolerance
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DomainKind::Wristband { .. } => 2,
            DomainKind::SmoothPhi(ls) => ls.dim(),
        }
    }

    pub fn is_wristband(&self) -> bool {
        matches!(self.kind, DomainKind::Wristband { .. })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(SbmError::InvalidInput(format!(
                "expected a point of dimension {}, got {}",
                self.dim(),
                x.len()
            )));
        }
        if !all_finite(x) {
            return Err(SbmError::InvalidInput(format!(
                "non-finite coordinates {x:?}"
            )));
        }
        Ok(())
    }

    /// Membership in the closure, without tolerance.
    #[inline]
    pub fn in_closure(&self, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::Wristband { half_width, .. } => x[1].abs() <= *half_width,
            DomainKind::SmoothPhi(ls) => ls.value(x) >= -PHI_SLACK,
        }
    }

    /// Unsigned distance from `x` to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Wristband { half_width, .. } => (half_width - x[1].abs()).abs(),
            DomainKind::SmoothPhi(ls) => {
                if let Some(d) = ls.boundary_distance(x) {
                    return d;
                }
                let mut g = vec![0.0; ls.dim()];
                ls.gradient(x, &mut g);
                let gn = norm(&g);
                let phi = ls.value(x);
                if gn > 0.0 {
                    let mut y = vec![0.0; ls.dim()];
                    if newton_to_boundary(ls.as_ref(), x, &mut y).is_ok() {
                        return distance(x, &y);
                    }
                    phi.abs() / gn
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn classify(&self, x: &[f64]) -> Result<Region> {
        self.check_point(x)?;
        let inside = match &self.kind {
            DomainKind::Wristband { half_width, .. } => x[1].abs() <= *half_width,
            DomainKind::SmoothPhi(ls) => ls.value(x) >= 0.0,
        };
        let d = self.boundary_distance(x);
        Ok(if d <= self.boundary_tolerance {
            Region::Boundary
        } else if inside {
            Region::Interior
        } else {
            Region::Exterior
        })
    }

    /// Inward unit normal at a boundary point.
    pub fn inward_normal(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.classify(x)? != Region::Boundary {
            return Err(SbmError::Domain(format!("{x:?} is not on the boundary")));
        }
        let mut out = vec![0.0; self.dim()];
        self.normal_into(x, &mut out)?;
        Ok(out)
    }

    /// Inward normal at the boundary point nearest to the wall `x` sits on;
    /// no membership check.
    pub(crate) fn normal_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            DomainKind::Wristband { .. } => {
                out[0] = 0.0;
                out[1] = if x[1] >= 0.0 { -1.0 } else { 1.0 };
                Ok(())
            }
            DomainKind::SmoothPhi(ls) => {
                ls.gradient(x, out);
                let gn = norm(out);
                if gn < 1.0 - 1e-9 {
                    return Err(SbmError::Geometry(format!(
                        "|grad phi| = {gn} < 1 at boundary point {x:?}"
                    )));
                }
                out.iter_mut().for_each(|v| *v /= gn);
                Ok(())
            }
        }
    }

    /// Unit tangent used by built-in tangential fields: `+x` on the wristband,
    /// the counter-clockwise rotation of the inward normal for planar domains.
    pub(crate) fn tangent_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.kind {
            DomainKind::Wristband { .. } => {
                out[0] = 1.0;
                out[1] = 0.0;
                Ok(())
            }
            DomainKind::SmoothPhi(ls) if ls.dim() == 2 => {
                let mut n = [0.0; 2];
                self.normal_into(x, &mut n)?;
                out[0] = -n[1];
                out[1] = n[0];
                Ok(())
            }
            DomainKind::SmoothPhi(_) => Err(SbmError::Unsupported(
                "built-in tangent fields need a planar domain".into(),
            )),
        }
    }

    /// Project `x` onto the closure; returns the projected point and the push
    /// distance.
    pub fn project_to_closure(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_point(x)?;
        let mut out = x.to_vec();
        let push = self.project_into(x, &mut out)?;
        Ok((out, push))
    }

    /// Allocation-free projection writing into `out`.
    pub(crate) fn project_into(&self, x: &[f64], out: &mut [f64]) -> Result<f64> {
        out.copy_from_slice(x);
        match &self.kind {
            DomainKind::Wristband { half_width, .. } => {
                let y = x[1];
                if y > *half_width {
                    out[1] = *half_width;
                    Ok(y - half_width)
                } else if y < -half_width {
                    out[1] = -half_width;
                    Ok(-half_width - y)
                } else {
                    Ok(0.0)
                }
            }
            DomainKind::SmoothPhi(ls) => {
                if ls.value(x) >= 0.0 {
                    return Ok(0.0);
                }
                if !ls.project_to_boundary(x, out) {
                    newton_to_boundary(ls.as_ref(), x, out)?;
                }
                let push = distance(x, out);
                if push > ls.reach() {
                    return Err(SbmError::Geometry(format!(
                        "{x:?} lies {push} from the boundary, beyond the projection reach {}",
                        ls.reach()
                    )));
                }
                Ok(push)
            }
        }
    }

    /// Map the periodic coordinate into `[0, period)`.
    pub fn wrap(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = x.to_vec();
        self.wrap_in_place(&mut out)?;
        Ok(out)
    }

    pub fn wrap_in_place(&self, x: &mut [f64]) -> Result<()> {
        match &self.kind {
            DomainKind::Wristband { period, .. } => {
                x[0] = wrap_periodic(x[0], *period);
                Ok(())
            }
            DomainKind::SmoothPhi(_) => Err(SbmError::Unsupported(
                "wrap is only defined on the wristband".into(),
            )),
        }
    }

    /// Wrap when the domain is periodic, no-op otherwise.
    #[inline]
    pub(crate) fn normalize_in_place(&self, x: &mut [f64]) {
        if let DomainKind::Wristband { period, .. } = &self.kind {
            x[0] = wrap_periodic(x[0], *period);
        }
    }

    /// Euclidean distance, using the minimal periodic separation on the wristband.
    pub fn point_distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Wristband { period, .. } => {
                let mut dx = (a[0] - b[0]).rem_euclid(*period);
                if dx > period / 2.0 {
                    dx = period - dx;
                }
                let dy = a[1] - b[1];
                (dx * dx + dy * dy).sqrt()
            }
            DomainKind::SmoothPhi(_) => distance(a, b),
        }
    }

    /// Which wristband wall a point is nearest to.
    pub fn wall(&self, x: &[f64]) -> Option<Wall> {
        match &self.kind {
            DomainKind::Wristband { .. } => Some(if x[1] >= 0.0 { Wall::Top } else { Wall::Bottom }),
            DomainKind::SmoothPhi(_) => None,
        }
    }

    /// Scalar boundary coordinate (wristband `x`, polar angle for planar level sets).
    pub fn boundary_parameter(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Wristband { .. } => x[0],
            DomainKind::SmoothPhi(ls) => ls.boundary_parameter(x),
        }
    }

    /// Largest distance to the boundary attainable inside the domain.
    pub fn inradius(&self) -> Option<f64> {
        match &self.kind {
            DomainKind::Wristband { half_width, .. } => Some(*half_width),
            DomainKind::SmoothPhi(_) => None,
        }
    }

    /// Roughly evenly spaced boundary points. For the wristband, half the
    /// samples go to each wall.
    pub fn boundary_samples(&self, count: usize) -> Result<Vec<Vec<f64>>> {
        match &self.kind {
            DomainKind::Wristband { period, half_width } => {
                let top = count.div_ceil(2);
                let bottom = count - top;
                let mut pts = Vec::with_capacity(count);
                for k in 0..top {
                    pts.push(vec![*period * k as f64 / top as f64, *half_width]);
                }
                for k in 0..bottom {
                    pts.push(vec![*period * k as f64 / bottom as f64, -half_width]);
                }
                Ok(pts)
            }
            DomainKind::SmoothPhi(ls) => ls.boundary_samples(count).ok_or_else(|| {
                SbmError::Unsupported("level set does not provide boundary samples".into())
            }),
        }
    }
}

#[inline]
fn wrap_periodic(v: f64, period: f64) -> f64 {
    let r = v.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Damped Newton iteration `y <- y - phi(y) grad / |grad|^2` towards `phi = 0`.
fn newton_to_boundary(ls: &dyn LevelSet, x: &[f64], out: &mut [f64]) -> Result<()> {
    let n = ls.dim();
    let mut y = x.to_vec();
    let mut g = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut phi = ls.value(&y);
    for _ in 0..NEWTON_MAX_ITERS {
        if phi.abs() <= NEWTON_TOL {
            out.copy_from_slice(&y);
            return Ok(());
        }
        ls.gradient(&y, &mut g);
        let g2 = norm_sq(&g);
        if g2 == 0.0 {
            break;
        }
        let mut step = 1.0;
        loop {
            for i in 0..n {
                trial[i] = y[i] - step * phi * g[i] / g2;
            }
            let next = ls.value(&trial);
            if next.abs() < phi.abs() || step < 1e-6 {
                y.copy_from_slice(&trial);
                phi = next;
                break;
            }
            step *= 0.5;
        }
    }
    if phi.abs() <= NEWTON_TOL {
        out.copy_from_slice(&y);
        return Ok(());
    }
    Err(SbmError::Geometry(format!(
        "projection of {x:?} did not converge (|phi| = {})",
        phi.abs()
    )))
}
