//! Convex hull of `{ g(x) / alpha(x) : x in boundary }` in spin space.

use super::FieldSet;
use crate::domain::DomainSpec;
use crate::error::{Result, SbmError};
use crate::vecmath::distance;

const HULL_TOL: f64 = 1e-12;

/// A convex polytope in `R^p`, `p <= 3`.
#[derive(Debug, Clone, PartialEq)]
pub enum Polytope {
    Point(Vec<f64>),
    Interval { lo: f64, hi: f64 },
    /// Counter-clockwise vertices; two vertices when the hull is a segment.
    Polygon(Vec<[f64; 2]>),
    /// Vertices and outward-oriented triangular faces.
    Polyhedron {
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
    },
    /// Lower-dimensional hull in `R^3`; only the generating points are kept.
    Flat(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct HullResult {
    pub polytope: Polytope,
    /// The hull has empty interior in `R^p`.
    pub degenerate: bool,
    pub points: Vec<Vec<f64>>,
}

impl Polytope {
    /// Euclidean distance from `y` to the polytope (0 inside).
    pub fn distance(&self, y: &[f64]) -> f64 {
        match self {
            Polytope::Point(v) => distance(v, y),
            Polytope::Interval { lo, hi } => {
                if y[0] < *lo {
                    lo - y[0]
                } else if y[0] > *hi {
                    y[0] - hi
                } else {
                    0.0
                }
            }
            Polytope::Polygon(v) => polygon_distance(v, [y[0], y[1]]),
            Polytope::Polyhedron { vertices, faces } => {
                let q = [y[0], y[1], y[2]];
                let inside = faces.iter().all(|f| {
                    let (n, off) = plane(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
                    dot3(&n, &q) - off <= HULL_TOL
                });
                if inside {
                    0.0
                } else {
                    faces
                        .iter()
                        .map(|f| point_triangle_distance(q, vertices[f[0]], vertices[f[1]], vertices[f[2]]))
                        .fold(f64::INFINITY, f64::min)
                }
            }
            Polytope::Flat(pts) => pts
                .iter()
                .map(|p| distance(p, y))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.distance(y) <= tol
    }
}

/// Hull of `g(x)/alpha(x)` over `samples` boundary points.
pub fn hull_g_over_alpha(f: &FieldSet, d: &DomainSpec, samples: usize) -> Result<HullResult> {
    let p = f.spin_dim();
    if !(1..=3).contains(&p) {
        return Err(SbmError::InvalidInput(format!("hull needs p in 1..=3, got {p}")));
    }
    if samples < p + 1 {
        return Err(SbmError::InvalidInput(format!(
            "need at least {} boundary samples",
            p + 1
        )));
    }
    let points: Vec<Vec<f64>> = d
        .boundary_samples(samples)?
        .iter()
        .map(|x| {
            let a = f.alpha_at(x);
            f.g(x).into_iter().map(|v| v / a).collect()
        })
        .collect();
    let (polytope, degenerate) = convex_hull(&points, p);
    Ok(HullResult {
        polytope,
        degenerate,
        points,
    })
}

/// Convex hull of points in `R^p`; returns the polytope and a degeneracy flag.
pub(crate) fn convex_hull(points: &[Vec<f64>], p: usize) -> (Polytope, bool) {
    let mut uniq: Vec<Vec<f64>> = Vec::new();
    for q in points {
        if !uniq.iter().any(|u| distance(u, q) <= HULL_TOL) {
            uniq.push(q.clone());
        }
    }
    if uniq.len() == 1 {
        return (Polytope::Point(uniq[0].clone()), p > 0);
    }
    match p {
        1 => {
            let lo = uniq.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
            let hi = uniq.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
            (Polytope::Interval { lo, hi }, false)
        }
        2 => {
            let pts: Vec<[f64; 2]> = uniq.iter().map(|v| [v[0], v[1]]).collect();
            let hull = monotone_chain(pts);
            let degenerate = hull.len() < 3;
            (Polytope::Polygon(hull), degenerate)
        }
        _ => {
            let pts: Vec<[f64; 3]> = uniq.iter().map(|v| [v[0], v[1], v[2]]).collect();
            match incremental_hull3(&pts) {
                Some((vertices, faces)) => (Polytope::Polyhedron { vertices, faces }, false),
                None => (Polytope::Flat(uniq), true),
            }
        }
    }
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn monotone_chain(mut pts: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let scale = pts
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(1.0f64, f64::max);
    let eps = HULL_TOL * scale * scale;
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], p) <= eps {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], p) <= eps {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn seg_distance(a: [f64; 2], b: [f64; 2], q: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let aq = [q[0] - a[0], q[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 > 0.0 {
        ((aq[0] * ab[0] + aq[1] * ab[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let dx = a[0] + t * ab[0] - q[0];
    let dy = a[1] + t * ab[1] - q[1];
    (dx * dx + dy * dy).sqrt()
}

fn polygon_distance(v: &[[f64; 2]], q: [f64; 2]) -> f64 {
    match v.len() {
        0 => f64::INFINITY,
        1 => ((v[0][0] - q[0]).powi(2) + (v[0][1] - q[1]).powi(2)).sqrt(),
        2 => seg_distance(v[0], v[1], q),
        n => {
            let inside = (0..n).all(|i| cross2(v[i], v[(i + 1) % n], q) >= -HULL_TOL);
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| seg_distance(v[i], v[(i + 1) % n], q))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Unit normal and offset of the plane through three points (right-hand order).
fn plane(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> ([f64; 3], f64) {
    let n = cross3(&sub3(b, a), &sub3(c, a));
    let len = dot3(&n, &n).sqrt();
    let n = [n[0] / len, n[1] / len, n[2] / len];
    (n, dot3(&n, a))
}

/// Incremental hull. `None` when all points are coplanar.
fn incremental_hull3(pts: &[[f64; 3]]) -> Option<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let n = pts.len();
    if n < 4 {
        return None;
    }
    let scale = pts
        .iter()
        .flat_map(|p| p.iter().map(|v| v.abs()))
        .fold(1.0f64, f64::max);
    let eps = 1e-10 * scale;
    // initial non-degenerate tetrahedron
    let i0 = 0;
    let i1 = (1..n).max_by(|&a, &b| {
        dot3(&sub3(&pts[a], &pts[i0]), &sub3(&pts[a], &pts[i0]))
            .total_cmp(&dot3(&sub3(&pts[b], &pts[i0]), &sub3(&pts[b], &pts[i0])))
    })?;
    let area = |k: usize| {
        let c = cross3(&sub3(&pts[i1], &pts[i0]), &sub3(&pts[k], &pts[i0]));
        dot3(&c, &c).sqrt()
    };
    let i2 = (0..n).max_by(|&a, &b| area(a).total_cmp(&area(b)))?;
    if area(i2) <= eps * scale {
        return None;
    }
    let (n0, off0) = plane(&pts[i0], &pts[i1], &pts[i2]);
    let height = |k: usize| dot3(&n0, &pts[k]) - off0;
    let i3 = (0..n).max_by(|&a, &b| height(a).abs().total_cmp(&height(b).abs()))?;
    if height(i3).abs() <= eps {
        return None;
    }
    let mut faces: Vec<[usize; 3]> = if height(i3) < 0.0 {
        vec![[i0, i1, i2], [i0, i3, i1], [i1, i3, i2], [i2, i3, i0]]
    } else {
        vec![[i0, i2, i1], [i0, i1, i3], [i1, i2, i3], [i2, i0, i3]]
    };
    let above = |f: &[usize; 3], q: &[f64; 3]| {
        let (nn, off) = plane(&pts[f[0]], &pts[f[1]], &pts[f[2]]);
        dot3(&nn, q) - off
    };
    for k in 0..n {
        if [i0, i1, i2, i3].contains(&k) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| above(f, &pts[k]) > eps).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        // horizon: directed edges of visible faces whose reverse is not visible
        let mut horizon = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            if !visible[fi] {
                continue;
            }
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let shared_visible = faces.iter().enumerate().any(|(gj, g)| {
                    visible[gj] && gj != fi && (0..3).any(|t| g[t] == b && g[(t + 1) % 3] == a)
                });
                if !shared_visible {
                    horizon.push((a, b));
                }
            }
        }
        let mut next: Vec<[usize; 3]> = faces
            .iter()
            .zip(&visible)
            .filter(|(_, v)| !**v)
            .map(|(f, _)| *f)
            .collect();
        for (a, b) in horizon {
            next.push([a, b, k]);
        }
        faces = next;
    }
    let used: Vec<usize> = {
        let mut u: Vec<usize> = faces.iter().flatten().cloned().collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    let remap = |i: usize| used.binary_search(&i).expect("vertex in use");
    let vertices = used.iter().map(|&i| pts[i]).collect();
    let faces = faces
        .iter()
        .map(|f| [remap(f[0]), remap(f[1]), remap(f[2])])
        .collect();
    Some((vertices, faces))
}

fn point_triangle_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    // Ericson, closest point on triangle
    let ab = sub3(&b, &a);
    let ac = sub3(&c, &a);
    let ap = sub3(&p, &a);
    let d1 = dot3(&ab, &ap);
    let d2 = dot3(&ac, &ap);
    let closest = if d1 <= 0.0 && d2 <= 0.0 {
        a
    } else {
        let bp = sub3(&p, &b);
        let d3 = dot3(&ab, &bp);
        let d4 = dot3(&ac, &bp);
        let cp = sub3(&p, &c);
        let d5 = dot3(&ab, &cp);
        let d6 = dot3(&ac, &cp);
        let vc = d1 * d4 - d3 * d2;
        let vb = d5 * d2 - d1 * d6;
        let va = d3 * d6 - d5 * d4;
        let lerp = |o: [f64; 3], d: [f64; 3], t: f64| [o[0] + t * d[0], o[1] + t * d[1], o[2] + t * d[2]];
        if d3 >= 0.0 && d4 <= d3 {
            b
        } else if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            lerp(a, ab, d1 / (d1 - d3))
        } else if d6 >= 0.0 && d5 <= d6 {
            c
        } else if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            lerp(a, ac, d2 / (d2 - d6))
        } else if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            lerp(b, sub3(&c, &b), (d4 - d3) / ((d4 - d3) + (d5 - d6)))
        } else {
            let denom = 1.0 / (va + vb + vc);
            let v = vb * denom;
            let w = vc * denom;
            [
                a[0] + ab[0] * v + ac[0] * w,
                a[1] + ab[1] * v + ac[1] * w,
                a[2] + ab[2] * v + ac[2] * w,
            ]
        }
    };
    let d = sub3(&p, &closest);
    dot3(&d, &d).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{ScalarField, Sided, VectorField};
    use std::f64::consts::PI;

    fn half_circle_fields(alpha: f64) -> (FieldSet, DomainSpec) {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::Walls {
            top: VectorField::Constant(vec![0.5, 0.0]),
            bottom: VectorField::Fourier {
                offset: vec![0.0, 0.0],
                cos: vec![0.5, 0.0],
                sin: vec![0.0, 0.5],
            },
        })
        .alpha(Sided::All(ScalarField::Constant(alpha)))
        .build(&d)
        .unwrap();
        (f, d)
    }

    #[test]
    fn constant_field_hull_is_a_point() {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::All(VectorField::Constant(vec![0.3, -0.2])))
            .build(&d)
            .unwrap();
        let h = hull_g_over_alpha(&f, &d, 16).unwrap();
        assert_eq!(h.polytope, Polytope::Point(vec![0.3, -0.2]));
        assert!(h.degenerate);
    }

    #[test]
    fn half_scaled_circle_hull_is_near_disk() {
        let (f, d) = half_circle_fields(1.0);
        let h = hull_g_over_alpha(&f, &d, 400).unwrap();
        assert!(!h.degenerate);
        for k in 0..100 {
            let th = 2.0 * PI * (k as f64 + 0.5) / 100.0;
            // chord sagitta for 200 samples on radius 1/2
            let r_in = 0.5 * (PI / 200.0).cos();
            assert!(h.polytope.contains(&[r_in * th.cos(), r_in * th.sin()], 1e-12));
            assert!(!h.polytope.contains(&[0.51 * th.cos(), 0.51 * th.sin()], 1e-6));
        }
    }

    #[test]
    fn doubling_alpha_halves_hull() {
        let (f1, d) = half_circle_fields(1.0);
        let (f2, _) = half_circle_fields(2.0);
        let h1 = hull_g_over_alpha(&f1, &d, 64).unwrap();
        let h2 = hull_g_over_alpha(&f2, &d, 64).unwrap();
        let (Polytope::Polygon(a), Polytope::Polygon(b)) = (&h1.polytope, &h2.polytope) else {
            panic!()
        };
        assert_eq!(a.len(), b.len());
        for (u, v) in a.iter().zip(b) {
            assert!((u[0] / 2.0 - v[0]).abs() < 1e-15 && (u[1] / 2.0 - v[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn hull_grows_with_samples_and_contains_them() {
        let (f, d) = half_circle_fields(1.0);
        let coarse = hull_g_over_alpha(&f, &d, 32).unwrap();
        let fine = hull_g_over_alpha(&f, &d, 64).unwrap();
        for q in &coarse.points {
            assert!(fine.polytope.contains(q, 1e-12));
        }
        for q in &fine.points {
            assert!(fine.polytope.contains(q, 1e-12));
        }
    }

    #[test]
    fn interval_and_segment_hulls() {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::Walls {
            top: VectorField::Constant(vec![2.0]),
            bottom: VectorField::Constant(vec![-1.0]),
        })
        .build(&d)
        .unwrap();
        let h = hull_g_over_alpha(&f, &d, 8).unwrap();
        assert_eq!(h.polytope, Polytope::Interval { lo: -1.0, hi: 2.0 });
        assert_eq!(h.polytope.distance(&[3.0]), 1.0);

        let (p, deg) = convex_hull(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]], 2);
        assert!(deg);
        assert!((p.distance(&[0.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cube_hull_3d() {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(vec![
                (i & 1) as f64,
                ((i >> 1) & 1) as f64,
                ((i >> 2) & 1) as f64,
            ]);
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        pts.push(vec![0.2, 0.7, 0.1]);
        let (p, deg) = convex_hull(&pts, 3);
        assert!(!deg);
        let Polytope::Polyhedron { vertices, faces } = &p else { panic!() };
        assert_eq!(vertices.len(), 8);
        assert_eq!(faces.len(), 12);
        assert_eq!(p.distance(&[0.5, 0.5, 0.5]), 0.0);
        assert!((p.distance(&[2.0, 0.5, 0.5]) - 1.0).abs() < 1e-12);
        assert!((p.distance(&[2.0, 2.0, 2.0]) - 3f64.sqrt()).abs() < 1e-12);
        let (flat, deg) = convex_hull(
            &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]],
            3,
        );
        assert!(deg);
        assert_eq!(flat.distance(&[1.0, 1.0, 0.0]), 0.0);
    }
}
