//! Boundary coefficient fields: spin forcing `g`, damping `alpha`, tangential
//! reflection `tau` and the diffusion matrix `sigma`.

mod hull;
mod lp;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub use hull::{hull_g_over_alpha, HullResult, Polytope};
pub use lp::{check_a1, cone_membership, select_anchors, solve_lambda, A1Report, A1Witness, AnchorSet};

use crate::domain::{DomainSpec, Region, Wall};
use crate::error::{Result, SbmError};
use crate::vecmath::{all_finite, dot, norm};

type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type TangentFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// A `R^p`-valued field on the boundary.
#[derive(Clone)]
pub enum VectorField {
    Constant(Vec<f64>),
    /// `offset + cos * cos(theta) + sin * sin(theta)` in the boundary parameter
    /// `theta` (the wristband `x`, rescaled to period `2π`; the polar angle on
    /// planar level sets).
    Fourier {
        offset: Vec<f64>,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Custom { dim: usize, f: Arc<VecFn> },
}

impl VectorField {
    pub fn dim(&self) -> usize {
        match self {
            VectorField::Constant(v) => v.len(),
            VectorField::Fourier { offset, .. } => offset.len(),
            VectorField::Custom { dim, .. } => *dim,
        }
    }

    pub fn custom(dim: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        VectorField::Custom {
            dim,
            f: Arc::new(f),
        }
    }

    #[inline]
    fn eval(&self, theta: f64, x: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Constant(v) => out.copy_from_slice(v),
            VectorField::Fourier { offset, cos, sin } => {
                let (st, ct) = theta.sin_cos();
                for i in 0..out.len() {
                    out[i] = offset[i] + cos[i] * ct + sin[i] * st;
                }
            }
            VectorField::Custom { f, .. } => f(x, out),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            VectorField::Constant(v) if !all_finite(v) => Err(bad("non-finite constant field")),
            VectorField::Fourier { offset, cos, sin } => {
                if offset.len() != cos.len() || offset.len() != sin.len() {
                    Err(bad("Fourier field components have mismatched lengths"))
                } else if !(all_finite(offset) && all_finite(cos) && all_finite(sin)) {
                    Err(bad("non-finite Fourier coefficients"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

/// A scalar field on the boundary.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Fourier { offset: f64, cos: f64, sin: f64 },
    Custom(Arc<ScalarFn>),
}

impl ScalarField {
    #[inline]
    fn eval(&self, theta: f64, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Fourier { offset, cos, sin } => {
                let (st, ct) = theta.sin_cos();
                offset + cos * ct + sin * st
            }
            ScalarField::Custom(f) => f(x),
        }
    }
}

/// Tangential component of the reflection direction.
#[derive(Clone)]
pub enum TangentialField {
    Zero,
    /// `strength * t(x)` with `t` the domain's unit tangent.
    Constant(f64),
    /// `scale * (1 - |s|^2) * t(x)`.
    SpinQuadratic { scale: f64 },
    /// `f(x, s, out)`; must be orthogonal to the normal.
    Custom(Arc<TangentFn>),
}

/// A field that may take different values on the two wristband walls.
#[derive(Clone)]
pub enum Sided<T> {
    All(T),
    Walls { top: T, bottom: T },
}

impl<T> Sided<T> {
    #[inline]
    fn select(&self, wall: Option<Wall>) -> &T {
        match (self, wall) {
            (Sided::All(v), _) => v,
            (Sided::Walls { top, .. }, Some(Wall::Top)) => top,
            (Sided::Walls { bottom, .. }, Some(Wall::Bottom)) => bottom,
            // rejected at construction
            (Sided::Walls { top, .. }, None) => top,
        }
    }

    fn parts(&self) -> Vec<&T> {
        match self {
            Sided::All(v) => vec![v],
            Sided::Walls { top, bottom } => vec![top, bottom],
        }
    }

    fn is_walls(&self) -> bool {
        matches!(self, Sided::Walls { .. })
    }
}

/// The diffusion coefficient `sigma(x)`.
#[derive(Clone)]
pub enum Diffusion {
    Identity,
    Scalar(f64),
    /// Row-major `n x n` matrix.
    Custom(Arc<VecFn>),
}

/// Coefficient fields of the reflected system, bound to a domain.
#[derive(Clone)]
pub struct FieldSet {
    g: Sided<VectorField>,
    alpha: Sided<ScalarField>,
    tau: Sided<TangentialField>,
    sigma: Diffusion,
    spin_dim: usize,
    g_sup_norm: f64,
    alpha_inf: f64,
    domain: DomainSpec,
}

impl fmt::Debug for FieldSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSet")
            .field("spin_dim", &self.spin_dim)
            .field("g_sup_norm", &self.g_sup_norm)
            .field("alpha_inf", &self.alpha_inf)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

fn bad(msg: &str) -> SbmError {
    SbmError::InvalidInput(msg.to_string())
}

pub struct FieldSetBuilder {
    g: Sided<VectorField>,
    alpha: Sided<ScalarField>,
    tau: Sided<TangentialField>,
    sigma: Diffusion,
    bounds: Option<(f64, f64)>,
}

impl FieldSetBuilder {
    pub fn alpha(mut self, alpha: Sided<ScalarField>) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn tau(mut self, tau: Sided<TangentialField>) -> Self {
        self.tau = tau;
        self
    }

    pub fn sigma(mut self, sigma: Diffusion) -> Self {
        self.sigma = sigma;
        self
    }

    /// Supply `(sup |g|, inf alpha)` instead of estimating them by sampling.
    pub fn bounds(mut self, g_sup_norm: f64, alpha_inf: f64) -> Self {
        self.bounds = Some((g_sup_norm, alpha_inf));
        self
    }

    pub fn build(self, domain: &DomainSpec) -> Result<FieldSet> {
        let parts = self.g.parts();
        let spin_dim = parts[0].dim();
        if spin_dim == 0 {
            return Err(bad("spin dimension must be positive"));
        }
        for part in &parts {
            part.validate()?;
            if part.dim() != spin_dim {
                return Err(bad("g has different dimensions on the two walls"));
            }
        }
        let sided = self.g.is_walls() || self.alpha.is_walls() || self.tau.is_walls();
        if sided && !domain.is_wristband() {
            return Err(bad("per-wall fields need the wristband domain"));
        }
        if let Diffusion::Scalar(c) = self.sigma {
            if !(c > 0.0 && c.is_finite()) {
                return Err(bad("scalar diffusion coefficient must be positive"));
            }
        }
        let mut fs = FieldSet {
            g: self.g,
            alpha: self.alpha,
            tau: self.tau,
            sigma: self.sigma,
            spin_dim,
            g_sup_norm: 0.0,
            alpha_inf: f64::INFINITY,
            domain: domain.clone(),
        };
        let (g_sup, a_inf) = match self.bounds {
            Some(b) => b,
            None => fs.estimate_bounds()?,
        };
        if !(a_inf > 0.0 && a_inf.is_finite()) {
            return Err(bad("alpha must be bounded below by a positive constant"));
        }
        if !(g_sup >= 0.0 && g_sup.is_finite()) {
            return Err(bad("g must be bounded"));
        }
        fs.g_sup_norm = g_sup;
        fs.alpha_inf = a_inf;
        Ok(fs)
    }
}

const BOUND_SAMPLES: usize = 4096;

impl FieldSet {
    /// Start a field set with spin forcing `g`; `alpha = 1`, `tau = 0`,
    /// `sigma = I` unless overridden.
    pub fn builder(g: Sided<VectorField>) -> FieldSetBuilder {
        FieldSetBuilder {
            g,
            alpha: Sided::All(ScalarField::Constant(1.0)),
            tau: Sided::All(TangentialField::Zero),
            sigma: Diffusion::Identity,
            bounds: None,
        }
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_dim
    }

    pub fn space_dim(&self) -> usize {
        self.domain.dim()
    }

    /// `sup |g|` over the boundary.
    pub fn g_sup_norm(&self) -> f64 {
        self.g_sup_norm
    }

    /// `inf alpha` over the boundary.
    pub fn alpha_inf(&self) -> f64 {
        self.alpha_inf
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Sampled sup/inf with a local golden-section refinement around the
    /// extremal sample of each wall.
    fn estimate_bounds(&self) -> Result<(f64, f64)> {
        let p = self.spin_dim;
        let mut buf = vec![0.0; p];
        let mut g_sup: f64 = 0.0;
        let mut a_inf = f64::INFINITY;
        match self.domain.kind() {
            crate::domain::DomainKind::Wristband { period, half_width } => {
                for y in [*half_width, -*half_width] {
                    let gnorm = |x: f64, buf: &mut Vec<f64>| {
                        self.g_into(&[x, y], buf);
                        norm(buf)
                    };
                    let alpha = |x: f64| self.alpha_at(&[x, y]);
                    let h = period / BOUND_SAMPLES as f64;
                    let (mut gi, mut gbest, mut ai, mut abest) = (0, f64::MIN, 0, f64::MAX);
                    for k in 0..BOUND_SAMPLES {
                        let x = h * k as f64;
                        let gv = gnorm(x, &mut buf);
                        if gv > gbest {
                            gbest = gv;
                            gi = k;
                        }
                        let av = alpha(x);
                        if av < abest {
                            abest = av;
                            ai = k;
                        }
                    }
                    let xg = h * gi as f64;
                    let refined = golden_max(|x| gnorm(x, &mut buf.clone()), xg - h, xg + h);
                    g_sup = g_sup.max(gbest).max(refined);
                    let xa = h * ai as f64;
                    let refined = -golden_max(|x| -alpha(x), xa - h, xa + h);
                    a_inf = a_inf.min(abest).min(refined);
                }
            }
            crate::domain::DomainKind::SmoothPhi(_) => {
                for x in self.domain.boundary_samples(BOUND_SAMPLES)? {
                    self.g_into(&x, &mut buf);
                    g_sup = g_sup.max(norm(&buf));
                    a_inf = a_inf.min(self.alpha_at(&x));
                }
            }
        }
        Ok((g_sup, a_inf))
    }

    #[inline]
    fn theta(&self, x: &[f64]) -> f64 {
        match self.domain.kind() {
            crate::domain::DomainKind::Wristband { period, .. } => x[0] * (2.0 * PI / period),
            _ => self.domain.boundary_parameter(x),
        }
    }

    /// `g(x)` written into `out`.
    #[inline]
    pub fn g_into(&self, x: &[f64], out: &mut [f64]) {
        let wall = self.domain.wall(x);
        self.g.select(wall).eval(self.theta(x), x, out);
    }

    pub fn g(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.spin_dim];
        self.g_into(x, &mut out);
        out
    }

    #[inline]
    pub fn alpha_at(&self, x: &[f64]) -> f64 {
        let wall = self.domain.wall(x);
        self.alpha.select(wall).eval(self.theta(x), x)
    }

    /// `tau(x, s)` written into `out`.
    pub(crate) fn tau_into(&self, x: &[f64], s: &[f64], out: &mut [f64]) -> Result<()> {
        let wall = self.domain.wall(x);
        match self.tau.select(wall) {
            TangentialField::Zero => {
                out.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            TangentialField::Constant(c) => {
                self.domain.tangent_into(x, out)?;
                out.iter_mut().for_each(|v| *v *= c);
                Ok(())
            }
            TangentialField::SpinQuadratic { scale } => {
                self.domain.tangent_into(x, out)?;
                let k = scale * (1.0 - dot(s, s));
                out.iter_mut().for_each(|v| *v *= k);
                Ok(())
            }
            TangentialField::Custom(f) => {
                f(x, s, out);
                Ok(())
            }
        }
    }

    pub fn tau(&self, x: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.space_dim()];
        self.tau_into(x, s, &mut out)?;
        Ok(out)
    }

    /// Whether `tau` vanishes identically (lets the integrator skip the push).
    pub(crate) fn tau_is_zero(&self) -> bool {
        self.tau
            .parts()
            .iter()
            .all(|t| matches!(t, TangentialField::Zero))
    }

    /// `out = sigma(x) * db`.
    #[inline]
    pub(crate) fn apply_sigma(&self, x: &[f64], db: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match &self.sigma {
            Diffusion::Identity => out.copy_from_slice(db),
            Diffusion::Scalar(c) => {
                for (o, d) in out.iter_mut().zip(db) {
                    *o = c * d;
                }
            }
            Diffusion::Custom(f) => {
                let n = db.len();
                scratch.resize(n * n, 0.0);
                f(x, scratch);
                for i in 0..n {
                    out[i] = dot(&scratch[i * n..(i + 1) * n], db);
                }
            }
        }
    }

    /// Oblique reflection direction `gamma = n + tau` at a boundary point.
    pub fn gamma(&self, d: &DomainSpec, x: &[f64], s: &[f64]) -> Result<Vec<f64>> {
        if d.classify(x)? != Region::Boundary {
            return Err(SbmError::Domain(format!("{x:?} is not on the boundary")));
        }
        if s.len() != self.spin_dim {
            return Err(bad("spin dimension mismatch"));
        }
        let n = d.inward_normal(x)?;
        let tau = self.tau(x, s)?;
        let tn = dot(&tau, &n);
        if tn.abs() > 1e-9 * (1.0 + norm(&tau)) {
            return Err(SbmError::Domain(format!(
                "tangential field has normal component {tn} at {x:?}"
            )));
        }
        Ok(n.iter().zip(&tau).map(|(a, b)| a + b).collect())
    }
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..80 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        }
    }
    fa.max(fb)
}
