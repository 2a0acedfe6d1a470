use crate::fields::Polytope;
use crate::integrator::{Observer, SimConfig, StepRecord};
use crate::vecmath::distance;

/// Time-weighted fractions of recorded spins falling in simple regions: near
/// a polytope, inside a ball, and near the coordinate axes.
#[derive(Debug, Clone)]
pub struct SpinTally {
    hull: Option<(Polytope, f64)>,
    ball: Option<(Vec<f64>, f64)>,
    axis_width: Option<f64>,
    pub total: f64,
    pub near_hull: f64,
    pub in_ball: f64,
    pub near_axes: f64,
}

impl SpinTally {
    pub fn new() -> Self {
        SpinTally {
            hull: None,
            ball: None,
            axis_width: None,
            total: 0.0,
            near_hull: 0.0,
            in_ball: 0.0,
            near_axes: 0.0,
        }
    }

    /// Count spins within `tol` of `hull`.
    pub fn with_hull(mut self, hull: Polytope, tol: f64) -> Self {
        self.hull = Some((hull, tol));
        self
    }

    /// Count spins in the closed ball `B(center, radius)`.
    pub fn with_ball(mut self, center: Vec<f64>, radius: f64) -> Self {
        self.ball = Some((center, radius));
        self
    }

    /// Count spins within `width` of the union of the coordinate axes.
    pub fn with_axes(mut self, width: f64) -> Self {
        self.axis_width = Some(width);
        self
    }

    pub fn add(&mut self, s: &[f64], w: f64) {
        self.total += w;
        if let Some((h, tol)) = &self.hull {
            if h.distance(s) <= *tol {
                self.near_hull += w;
            }
        }
        if let Some((c, r)) = &self.ball {
            if distance(s, c) <= *r {
                self.in_ball += w;
            }
        }
        if let Some(width) = self.axis_width {
            // nearest axis is the one along the largest coordinate
            let sq: f64 = s.iter().map(|v| v * v).sum();
            let top = s.iter().map(|v| v * v).fold(0.0, f64::max);
            let d = (sq - top).max(0.0).sqrt();
            if d <= width {
                self.near_axes += w;
            }
        }
    }

    pub fn merge_from(&mut self, other: &Self) {
        self.total += other.total;
        self.near_hull += other.near_hull;
        self.in_ball += other.in_ball;
        self.near_axes += other.near_axes;
    }

    fn fraction(&self, part: f64) -> f64 {
        if self.total > 0.0 {
            part / self.total
        } else {
            0.0
        }
    }

    pub fn hull_fraction(&self) -> f64 {
        self.fraction(self.near_hull)
    }

    pub fn ball_fraction(&self) -> f64 {
        self.fraction(self.in_ball)
    }

    pub fn axes_fraction(&self) -> f64 {
        self.fraction(self.near_axes)
    }
}

impl Default for SpinTally {
    fn default() -> Self {
        Self::new()
    }
}

/// [`SpinTally`] fed from a running chain with the config's stride and burn-in.
pub struct SpinTallyObserver<'c> {
    cfg: &'c SimConfig,
    weight: f64,
    pub tally: SpinTally,
}

impl<'c> SpinTallyObserver<'c> {
    pub fn new(cfg: &'c SimConfig, tally: SpinTally) -> Self {
        SpinTallyObserver {
            cfg,
            weight: cfg.dt * cfg.record_stride as f64,
            tally,
        }
    }
}

impl Observer for SpinTallyObserver<'_> {
    #[inline]
    fn observe(&mut self, rec: &StepRecord<'_>) {
        if self.cfg.records(rec.step) {
            self.tally.add(rec.s, self.weight);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        let square = Polytope::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let mut t = SpinTally::new()
            .with_hull(square, 0.05)
            .with_ball(vec![0.5, 0.0], 0.15)
            .with_axes(0.1);
        t.add(&[0.5, 0.05], 2.0);
        t.add(&[1.03, 0.5], 1.0);
        t.add(&[-0.5, -0.5], 1.0);
        assert_eq!(t.total, 4.0);
        assert_eq!(t.hull_fraction(), 0.75);
        assert_eq!(t.ball_fraction(), 0.5);
        assert_eq!(t.axes_fraction(), 0.5);
        let mut u = SpinTally::new();
        u.merge_from(&t);
        assert_eq!(u.total, 4.0);
        assert_eq!(SpinTally::new().ball_fraction(), 0.0);
    }
}
