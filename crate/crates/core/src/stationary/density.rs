use std::fmt;

use super::histogram::{Coord, OccupancyHistogram};
use crate::error::{Result, SbmError};

const QUAD_TOL: f64 = 1e-14;
const IDENTITY_TOL: f64 = 1e-8;
const FD_STEP: f64 = 1e-6;

/// Stationary density `rho(y, s) = (a(s) y + b(s)) / Z` of the wristband
/// with `g = alpha` on the top wall and `g = -beta` on the bottom wall.
#[derive(Debug, Clone, PartialEq)]
pub struct WristbandDensity {
    pub alpha_top: f64,
    pub beta_bottom: f64,
    pub normalizer: f64,
    /// Multiplies `b(s)`; 1 except when deliberately perturbing the density.
    pub b_scale: f64,
}

impl WristbandDensity {
    pub fn new(alpha_top: f64, beta_bottom: f64) -> Result<Self> {
        Self::with_b_scale(alpha_top, beta_bottom, 1.0)
    }

    pub fn with_b_scale(alpha_top: f64, beta_bottom: f64, b_scale: f64) -> Result<Self> {
        if !(alpha_top > 0.0 && beta_bottom > 0.0 && alpha_top.is_finite() && beta_bottom.is_finite())
        {
            return Err(SbmError::InvalidInput(format!(
                "alpha and beta must be positive, got {alpha_top}, {beta_bottom}"
            )));
        }
        let mut d = WristbandDensity {
            alpha_top,
            beta_bottom,
            normalizer: 1.0,
            b_scale,
        };
        // The y-integral of a(s) y vanishes, leaving 2 * int b ds. By symmetry
        // each half of the spin range gives the same integral in the distance
        // u = v^2 to its nearer endpoint, where q = u (2R - u) and the
        // substitution removes the inverse square root.
        let r = d.radius();
        let half = quadrature::integrate(
            |v| 2.0 * d.b_scale / (2.0 * r - v * v).sqrt(),
            0.0,
            r.sqrt(),
            QUAD_TOL,
        );
        d.normalizer = 4.0 * half.integral;
        Ok(d)
    }

    fn center(&self) -> f64 {
        0.5 * (self.alpha_top - self.beta_bottom)
    }

    fn radius(&self) -> f64 {
        0.5 * (self.alpha_top + self.beta_bottom)
    }

    /// `(alpha - s)(beta + s)`
    pub fn q(&self, s: f64) -> f64 {
        (self.alpha_top - s) * (self.beta_bottom + s)
    }

    pub fn a(&self, s: f64) -> f64 {
        (s - self.center()) / (self.radius() * self.q(s).sqrt())
    }

    pub fn b(&self, s: f64) -> f64 {
        self.b_scale / self.q(s).sqrt()
    }

    pub fn unnormalized(&self, y: f64, s: f64) -> f64 {
        self.a(s) * y + self.b(s)
    }

    /// Normalized density; 0 off the open spin range, `+inf` at its ends.
    pub fn evaluate(&self, y: f64, s: f64) -> f64 {
        if s == -self.beta_bottom || s == self.alpha_top {
            return f64::INFINITY;
        }
        if !(s > -self.beta_bottom && s < self.alpha_top) || y.abs() > 1.0 {
            return 0.0;
        }
        self.unnormalized(y, s) / self.normalizer
    }

    /// `int b ds` from `-beta` to `s`.
    fn b_primitive(&self, s: f64) -> f64 {
        let u = ((s - self.center()) / self.radius()).clamp(-1.0, 1.0);
        self.b_scale * u.asin()
    }

    /// `int a ds`, up to a constant.
    fn a_primitive(&self, s: f64) -> f64 {
        let r = self.radius();
        let d = (s - self.center()).clamp(-r, r);
        -((r - d) * (r + d)).sqrt() / r
    }

    /// Probability mass of `[y0, y1] x [s0, s1]`, clipped to the support.
    pub fn cell_mass(&self, y0: f64, y1: f64, s0: f64, s1: f64) -> f64 {
        let (y0, y1) = (y0.max(-1.0), y1.min(1.0));
        let (s0, s1) = (s0.max(-self.beta_bottom), s1.min(self.alpha_top));
        if y1 <= y0 || s1 <= s0 {
            return 0.0;
        }
        let ay = 0.5 * (y1 * y1 - y0 * y0);
        let by = y1 - y0;
        let a_int = self.a_primitive(s1) - self.a_primitive(s0);
        let b_int = self.b_primitive(s1) - self.b_primitive(s0);
        (ay * a_int + by * b_int) / self.normalizer
    }

    fn axes_of(&self, h: &OccupancyHistogram) -> Result<()> {
        let ok = h.axes.len() == 2
            && matches!(h.axes[0].coord, Coord::Position(1))
            && matches!(h.axes[1].coord, Coord::Spin(0));
        if !ok {
            return Err(SbmError::InvalidInput(
                "density comparison needs axes (y, s1)".into(),
            ));
        }
        let slack = 1e-12;
        let (y, s) = (&h.axes[0], &h.axes[1]);
        if y.lo < -1.0 - slack || y.hi > 1.0 + slack {
            return Err(SbmError::InvalidInput("y axis leaves [-1, 1]".into()));
        }
        if s.lo < -self.beta_bottom - slack || s.hi > self.alpha_top + slack {
            return Err(SbmError::InvalidInput("spin axis leaves [-beta, alpha]".into()));
        }
        Ok(())
    }

    /// Analytic mass of every cell of `h`'s grid.
    pub fn cell_masses(&self, h: &OccupancyHistogram) -> Result<Vec<f64>> {
        self.axes_of(h)?;
        let (ya, sa) = (&h.axes[0], &h.axes[1]);
        let mut out = Vec::with_capacity(h.cells());
        for i in 0..ya.bins {
            for j in 0..sa.bins {
                out.push(self.cell_mass(ya.edge(i), ya.edge(i + 1), sa.edge(j), sa.edge(j + 1)));
            }
        }
        Ok(out)
    }

    /// Cells whose closure touches a singular corner `(1, alpha)` or `(-1, -beta)`.
    pub fn corner_cells(&self, h: &OccupancyHistogram) -> Result<Vec<usize>> {
        self.axes_of(h)?;
        let (ya, sa) = (&h.axes[0], &h.axes[1]);
        let mut out = Vec::new();
        for (y, s) in [(1.0, self.alpha_top), (-1.0, -self.beta_bottom)] {
            for i in 0..ya.bins {
                for j in 0..sa.bins {
                    let touches = ya.edge(i) <= y
                        && y <= ya.edge(i + 1)
                        && sa.edge(j) <= s
                        && s <= sa.edge(j + 1);
                    if touches && !out.contains(&(i * sa.bins + j)) {
                        out.push(i * sa.bins + j);
                    }
                }
            }
        }
        Ok(out)
    }

    /// l1 distance between the histogram's cell probabilities and the
    /// analytic cell masses, with the corner cells left out of the sum.
    pub fn compare(&self, h: &OccupancyHistogram) -> Result<DensityComparison> {
        let p_hat = h.probabilities()?;
        let p = self.cell_masses(h)?;
        let corners = self.corner_cells(h)?;
        let per_cell: Vec<f64> = p_hat.iter().zip(&p).map(|(a, b)| a - b).collect();
        let l1 = per_cell
            .iter()
            .enumerate()
            .filter(|(i, _)| !corners.contains(i))
            .map(|(_, d)| d.abs())
            .sum();
        let corner_cells = corners.iter().map(|&i| (i, p_hat[i], p[i])).collect();
        Ok(DensityComparison {
            l1,
            per_cell,
            corner_cells,
        })
    }

    /// `(g(y) - s) * rho~(y, s)` at a wall `y = +-1`.
    pub fn wall_flux(&self, y: f64, s: f64) -> f64 {
        let g = if y > 0.0 { self.alpha_top } else { -self.beta_bottom };
        (g - s) * self.unnormalized(y, s)
    }

    /// Closed form of [`Self::wall_flux`].
    pub fn wall_flux_expected(&self, y: f64, s: f64) -> f64 {
        y.signum() * self.q(s).sqrt() / self.radius()
    }

    /// Check the three wall identities on `s_grid`.
    pub fn verify_identities(&self, s_grid: &[f64]) -> Result<IdentityReport> {
        let (lo, hi) = (-self.beta_bottom, self.alpha_top);
        if let Some(bad) = s_grid.iter().find(|s| !(**s > lo && **s < hi)) {
            return Err(SbmError::InvalidInput(format!("grid point {bad} outside ({lo}, {hi})")));
        }
        if s_grid.is_empty() {
            return Err(SbmError::InvalidInput("empty spin grid".into()));
        }
        let scaled = |err: f64, reference: f64| err / reference.abs().max(1.0);

        let mut flux = Worst::default();
        let mut deriv = Worst::default();
        for &y in &[1.0, -1.0] {
            for &s in s_grid {
                let lhs = self.wall_flux(y, s);
                flux.see(scaled((lhs - self.wall_flux_expected(y, s)).abs(), lhs), y, s);
                if s - FD_STEP > lo && s + FD_STEP < hi {
                    let fd = (self.wall_flux(y, s + FD_STEP) - self.wall_flux(y, s - FD_STEP))
                        / (2.0 * FD_STEP);
                    let want = -y.signum() * self.a(s);
                    deriv.see(scaled((fd - want).abs(), want), y, s);
                }
            }
        }

        // square-root vanishing at both spin endpoints
        let mut vanish = Worst::default();
        let width = hi - lo;
        for &y in &[1.0, -1.0] {
            for k in [6, 8, 10, 12] {
                let h = 10f64.powi(-k);
                for s in [lo + h, hi - h] {
                    let bound = 2.0 * (h / width).sqrt() * (1.0 + 1e-6);
                    let excess = (self.wall_flux(y, s).abs() - bound).max(0.0);
                    vanish.see(excess, y, s);
                }
            }
        }

        Ok(IdentityReport {
            checks: vec![
                flux.into_check("wall_flux", IDENTITY_TOL),
                vanish.into_check("endpoint_vanishing", IDENTITY_TOL),
                deriv.into_check("flux_derivative", IDENTITY_TOL),
            ],
        })
    }
}

#[derive(Default)]
struct Worst {
    value: f64,
    y: f64,
    s: f64,
    any: bool,
    nan: bool,
}

impl Worst {
    fn see(&mut self, v: f64, y: f64, s: f64) {
        if v.is_nan() {
            self.nan = true;
        }
        if !self.any || v > self.value {
            (self.value, self.y, self.s, self.any) = (v, y, s, true);
        }
    }

    fn into_check(self, name: &str, tol: f64) -> IdentityCheck {
        IdentityCheck {
            name: name.to_string(),
            passed: self.any && !self.nan && self.value <= tol,
            worst_error: self.value,
            worst_y: self.y,
            worst_s: self.s,
            tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityComparison {
    pub l1: f64,
    /// Estimated minus analytic probability, per cell.
    pub per_cell: Vec<f64>,
    /// `(cell, estimated, analytic)` for the excluded corner cells.
    pub corner_cells: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    pub worst_error: f64,
    pub worst_y: f64,
    pub worst_s: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {} worst={:.3e} at y={} s={:.9} tol={:.0e}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.worst_error,
                c.worst_y,
                c.worst_s,
                c.tol
            )?;
        }
        Ok(())
    }
}

/// Identity check for the density with parameters `alpha`, `beta`.
pub fn verify_density_identities(alpha: f64, beta: f64, s_grid: &[f64]) -> Result<IdentityReport> {
    WristbandDensity::new(alpha, beta)?.verify_identities(s_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stationary::histogram::Axis;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(alpha: f64, beta: f64, n: usize) -> Vec<f64> {
        let w = alpha + beta;
        let (lo, hi) = (-beta + 0.01 * w, alpha - 0.01 * w);
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    fn ys_hist(alpha: f64, beta: f64, n: usize) -> OccupancyHistogram {
        OccupancyHistogram::new(vec![
            Axis::new("y", Coord::Position(1), -1.0, 1.0, n).unwrap(),
            Axis::new("s", Coord::Spin(0), -beta, alpha, n).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn symmetric_values() {
        let d = WristbandDensity::new(1.0, 1.0).unwrap();
        assert_eq!(d.a(0.0), 0.0);
        assert_eq!(d.b(0.0), 1.0);
        for y in [-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert_eq!(d.unnormalized(y, 0.0), 1.0);
        }
        assert!((d.a(0.5) - 0.5 / 0.75f64.sqrt()).abs() < 1e-15);
        assert!((d.a(0.5) - 0.577350).abs() < 1e-6);
        assert!((d.b(0.5) - 1.154701).abs() < 1e-6);
    }

    #[test]
    fn normalizer_is_two_pi() {
        for (a, b) in [(1.0, 1.0), (2.0, 1.0), (0.5, 1.5), (3.0, 0.2)] {
            let d = WristbandDensity::new(a, b).unwrap();
            assert!((d.normalizer - 2.0 * PI).abs() < 1e-10, "{a} {b} {}", d.normalizer);
        }
    }

    #[test]
    fn evaluate_off_support() {
        let d = WristbandDensity::new(1.0, 1.0).unwrap();
        assert_eq!(d.evaluate(0.0, 1.5), 0.0);
        assert_eq!(d.evaluate(0.0, 1.0), f64::INFINITY);
        assert_eq!(d.evaluate(0.0, -1.0), f64::INFINITY);
        assert!((d.evaluate(0.2, 0.0) - 1.0 / (2.0 * PI)).abs() < 1e-12);
        assert!(WristbandDensity::new(0.0, 1.0).is_err());
    }

    /// Quadrature on `[s0, s1]` tolerant of inverse square roots at either
    /// end: `s = s0 + v^2` on the left half and `s = s1 - v^2` on the right.
    /// The integrand gets `s` together with the exact offsets `s - s0` and
    /// `s1 - s`.
    fn integrate_endpoint_safe(f: impl Fn(f64, f64, f64) -> f64, s0: f64, s1: f64) -> f64 {
        let w = s1 - s0;
        let h = (0.5 * w).sqrt();
        let left = quadrature::integrate(|v| 2.0 * v * f(s0 + v * v, v * v, w - v * v), 0.0, h, 1e-15);
        let right = quadrature::integrate(|v| 2.0 * v * f(s1 - v * v, w - v * v, v * v), 0.0, h, 1e-15);
        left.integral + right.integral
    }

    #[test]
    fn cell_masses_match_quadrature() {
        let (alpha, beta) = (2.0, 1.0);
        let d = WristbandDensity::new(alpha, beta).unwrap();
        let h = ys_hist(alpha, beta, 7);
        let m = d.cell_masses(&h).unwrap();
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (ya, sa) = (&h.axes[0], &h.axes[1]);
        for i in [0, 3, 6] {
            for j in [0, 2, 6] {
                let (y0, y1) = (ya.edge(i), ya.edge(i + 1));
                let (s0, s1) = (sa.edge(j), sa.edge(j + 1));
                let inner = |s: f64, dl: f64, dr: f64| {
                    let q = ((alpha - s1) + dr) * ((beta + s0) + dl);
                    let a = (s - 0.5) / (1.5 * q.sqrt());
                    let b = 1.0 / q.sqrt();
                    (0.5 * (y1 * y1 - y0 * y0) * a + (y1 - y0) * b) / (2.0 * PI)
                };
                let q = integrate_endpoint_safe(inner, s0, s1);
                assert!((q - m[i * sa.bins + j]).abs() < 1e-12, "{i} {j} {q} {}", m[i * sa.bins + j]);
            }
        }
    }

    #[test]
    fn exact_masses_give_zero_l1() {
        let d = WristbandDensity::new(1.0, 1.0).unwrap();
        let mut h = ys_hist(1.0, 1.0, 20);
        h.weights = d.cell_masses(&h).unwrap();
        let c = d.compare(&h).unwrap();
        assert!(c.l1 < 1e-12, "{}", c.l1);
        assert_eq!(c.corner_cells.len(), 2);
        assert_eq!(c.corner_cells[0].0, 399);
        assert_eq!(c.corner_cells[1].0, 0);
        assert!(d.compare(&ys_hist(1.0, 1.0, 20)).is_err());
    }

    #[test]
    fn hand_identity_values() {
        let d = WristbandDensity::new(1.0, 1.0).unwrap();
        assert!((d.wall_flux(1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((d.wall_flux_expected(1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(d.wall_flux(1.0, 1.0 - 1e-6).abs() < 2e-3);
        let h = 1e-6;
        let fd = (d.wall_flux(-1.0, 0.3 + h) - d.wall_flux(-1.0, 0.3 - h)) / (2.0 * h);
        assert!((fd - d.a(0.3)).abs() < 1e-8);
    }

    #[test]
    fn identities_hold_on_thousand_point_grids() {
        for (a, b) in [(1.0, 1.0), (2.0, 1.0), (0.5, 1.5)] {
            let r = verify_density_identities(a, b, &grid(a, b, 1000)).unwrap();
            assert!(r.passed(), "{a} {b}\n{r}");
        }
    }

    #[test]
    fn perturbed_b_fails() {
        let d = WristbandDensity::with_b_scale(1.0, 1.0, 1.01).unwrap();
        let r = d.verify_identities(&grid(1.0, 1.0, 200)).unwrap();
        assert!(!r.passed());
        assert!(!r.checks[0].passed);
        assert!(r.to_string().contains("wall_flux FAIL"));
    }

    #[test]
    fn grid_outside_support_is_rejected() {
        assert!(verify_density_identities(1.0, 1.0, &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn positive_inside(alpha in 0.1f64..5.0, beta in 0.1f64..5.0, u in 0.001f64..0.999, y in -1.0f64..1.0) {
            let d = WristbandDensity::new(alpha, beta).unwrap();
            let s = -beta + u * (alpha + beta);
            prop_assert!(d.unnormalized(y, s) > 0.0);
            prop_assert!(d.a(s).abs() <= d.b(s));
        }
    }

    #[test]
    fn positive_on_dense_grid() {
        let d = WristbandDensity::new(2.0, 0.5).unwrap();
        for i in 1..200 {
            for j in 1..200 {
                let y = -1.0 + 2.0 * i as f64 / 200.0;
                let s = -0.5 + 2.5 * j as f64 / 200.0;
                assert!(d.unnormalized(y, s) > 0.0);
            }
        }
    }
}
