//! Non-negative representations over `p + 1` generators in `R^p`.
//!
//! The dimension is tiny (p ≤ 3 in practice), so the linear program
//! `min sum(lambda)` s.t. `G lambda = y`, `lambda >= 0` is solved by
//! enumerating every linearly independent column subset and keeping the
//! cheapest non-negative exact solution. An optimum of such an LP is always
//! attained at one of these basic solutions.

use nalgebra::{DMatrix, DVector};

use super::FieldSet;
use crate::domain::{DomainSpec, Region};
use crate::error::{Result, SbmError};
use crate::vecmath::{dot, norm};

const FEAS_TOL: f64 = 1e-10;

fn check_shape(gens: &[Vec<f64>]) -> Result<usize> {
    if gens.len() < 2 {
        return Err(SbmError::InvalidInput(
            "need p + 1 generator vectors with p >= 1".into(),
        ));
    }
    let p = gens.len() - 1;
    if gens.iter().any(|g| g.len() != p) {
        return Err(SbmError::InvalidInput(format!(
            "expected {} vectors of dimension {p}",
            p + 1
        )));
    }
    if gens.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(SbmError::InvalidInput("non-finite generator".into()));
    }
    Ok(p)
}

/// Exact solution of `sum_{j in cols} c_j g_j = target`, or `None` when the
/// columns are dependent or the target is not in their span.
fn solve_subset(gens: &[Vec<f64>], cols: &[usize], target: &[f64]) -> Option<Vec<f64>> {
    let p = target.len();
    let k = cols.len();
    let a = DMatrix::from_fn(p, k, |i, j| gens[cols[j]][i]);
    let gram = a.transpose() * &a;
    let scale = gram.diagonal().iter().cloned().fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    let det = gram.determinant();
    if det.abs() <= 1e-12 * scale.powi(k as i32) {
        return None;
    }
    let rhs = a.transpose() * DVector::from_column_slice(target);
    let c = gram.lu().solve(&rhs)?;
    let resid = &a * &c - DVector::from_column_slice(target);
    let tscale = 1.0 + norm(target);
    if resid.norm() > FEAS_TOL * tscale {
        return None;
    }
    Some(c.iter().cloned().collect())
}

/// Minimum-sum non-negative coefficients with `sum_j lambda_j gens[j] = target`.
pub fn solve_lambda(target: &[f64], gens: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = check_shape(gens)?;
    if target.len() != p {
        return Err(SbmError::InvalidInput(format!(
            "target has dimension {}, expected {p}",
            target.len()
        )));
    }
    let m = gens.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    if norm(target) == 0.0 {
        return Ok(vec![0.0; m]);
    }
    for mask in 1u32..(1 << m) {
        let cols: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        if cols.len() > p {
            continue;
        }
        let Some(c) = solve_subset(gens, &cols, target) else {
            continue;
        };
        let cscale = 1.0 + c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if c.iter().any(|&v| v < -FEAS_TOL * cscale) {
            continue;
        }
        let mut lambda = vec![0.0; m];
        for (j, v) in cols.iter().zip(&c) {
            lambda[*j] = v.max(0.0);
        }
        let sum: f64 = lambda.iter().sum();
        if best.as_ref().is_none_or(|(b, _)| sum < *b) {
            best = Some((sum, lambda));
        }
    }
    best.map(|(_, l)| l).ok_or_else(|| SbmError::Infeasible {
        direction: target.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum A1Witness {
    /// `(target, lambda)` pairs for every `±e_i` plus `-sum_j g_j`.
    Certificates(Vec<(Vec<f64>, Vec<f64>)>),
    /// Unit direction with no non-negative representation.
    Unreachable(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct A1Report {
    pub holds: bool,
    pub witness: A1Witness,
}

/// Decide whether `p + 1` vectors positively span `R^p`.
///
/// Every `±e_i` must be representable, and `-sum_j g_j` too, which makes
/// the origin a strictly positive combination of all generators.
pub fn check_a1(gens: &[Vec<f64>]) -> Result<A1Report> {
    let p = check_shape(gens)?;
    let mut targets = Vec::with_capacity(2 * p + 1);
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; p];
            e[i] = sign;
            targets.push(e);
        }
    }
    let mut total = vec![0.0; p];
    for g in gens {
        for i in 0..p {
            total[i] -= g[i];
        }
    }
    targets.push(total);
    let mut certs = Vec::with_capacity(targets.len());
    for t in targets {
        match solve_lambda(&t, gens) {
            Ok(l) => certs.push((t, l)),
            Err(SbmError::Infeasible { direction }) => {
                let witness = separating_witness(gens).unwrap_or_else(|| {
                    let n = norm(&direction);
                    direction.iter().map(|v| v / n).collect()
                });
                return Ok(A1Report {
                    holds: false,
                    witness: A1Witness::Unreachable(witness),
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(A1Report {
        holds: true,
        witness: A1Witness::Certificates(certs),
    })
}

/// For generators that fail to span, the unit direction "most outside" their
/// cone: `-w` for the unit `w` maximizing `min_j w·ĝ_j` among candidate
/// supporting normals.
fn separating_witness(gens: &[Vec<f64>]) -> Option<Vec<f64>> {
    let p = gens[0].len();
    let units: Vec<Vec<f64>> = gens
        .iter()
        .filter(|g| norm(g) > 0.0)
        .map(|g| {
            let n = norm(g);
            g.iter().map(|v| v / n).collect()
        })
        .collect();
    let mut cands: Vec<Vec<f64>> = Vec::new();
    for i in 0..p {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; p];
            e[i] = sign;
            cands.push(e);
        }
    }
    match p {
        2 => {
            for g in &units {
                cands.push(vec![-g[1], g[0]]);
                cands.push(vec![g[1], -g[0]]);
            }
        }
        3 => {
            for a in 0..units.len() {
                for b in a + 1..units.len() {
                    let (u, v) = (&units[a], &units[b]);
                    let c = vec![
                        u[1] * v[2] - u[2] * v[1],
                        u[2] * v[0] - u[0] * v[2],
                        u[0] * v[1] - u[1] * v[0],
                    ];
                    if norm(&c) > 1e-12 {
                        cands.push(c.clone());
                        cands.push(c.iter().map(|x| -x).collect());
                    }
                }
            }
        }
        _ => {}
    }
    let mut sum = vec![0.0; p];
    for u in &units {
        for i in 0..p {
            sum[i] += u[i];
        }
    }
    cands.push(sum);
    let normalize = |v: &[f64]| -> Option<Vec<f64>> {
        let n = norm(v);
        (n > 1e-12).then(|| v.iter().map(|x| x / n).collect())
    };
    let score = |w: &[f64]| units.iter().map(|u| dot(u, w)).fold(f64::INFINITY, f64::min);
    let mut valid: Vec<Vec<f64>> = cands
        .iter()
        .filter_map(|c| normalize(c))
        .filter(|w| score(w) >= -1e-12)
        .collect();
    let base = valid.clone();
    for a in 0..base.len() {
        for b in a + 1..base.len() {
            let s: Vec<f64> = base[a].iter().zip(&base[b]).map(|(x, y)| x + y).collect();
            if let Some(w) = normalize(&s) {
                if score(&w) >= -1e-12 {
                    valid.push(w);
                }
            }
        }
    }
    valid
        .into_iter()
        .filter(|w| {
            let d: Vec<f64> = w.iter().map(|x| -x).collect();
            solve_lambda(&d, gens).is_err()
        })
        .max_by(|a, b| score(a).total_cmp(&score(b)))
        .map(|w| w.iter().map(|x| -x).collect())
}

/// Whether `y` is a non-negative combination with total mass below `eps`.
pub fn cone_membership(gens: &[Vec<f64>], y: &[f64], eps: f64) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(SbmError::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    match solve_lambda(y, gens) {
        Ok(l) => Ok(l.iter().sum::<f64>() <= eps * (1.0 - 1e-9)),
        Err(SbmError::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// `p + 1` boundary points whose `g` values positively span `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub points: Vec<Vec<f64>>,
    pub g_vectors: Vec<Vec<f64>>,
    pub alpha_values: Vec<f64>,
}

impl AnchorSet {
    pub fn new(d: &DomainSpec, f: &FieldSet, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != f.spin_dim() + 1 {
            return Err(SbmError::InvalidInput(format!(
                "need {} anchor points, got {}",
                f.spin_dim() + 1,
                points.len()
            )));
        }
        for x in &points {
            if d.classify(x)? != Region::Boundary {
                return Err(SbmError::Domain(format!("anchor {x:?} is not on the boundary")));
            }
        }
        let g_vectors: Vec<Vec<f64>> = points.iter().map(|x| f.g(x)).collect();
        let alpha_values = points.iter().map(|x| f.alpha_at(x)).collect();
        let report = check_a1(&g_vectors)?;
        if let A1Witness::Unreachable(direction) = report.witness {
            return Err(SbmError::Infeasible { direction });
        }
        Ok(AnchorSet {
            points,
            g_vectors,
            alpha_values,
        })
    }
}

/// Pick `p + 1` of the given boundary points satisfying A1, preferring the
/// set whose unit-vector representations are cheapest.
pub fn select_anchors(d: &DomainSpec, f: &FieldSet, candidates: &[Vec<f64>]) -> Result<AnchorSet> {
    let p = f.spin_dim();
    let gs: Vec<Vec<f64>> = candidates.iter().map(|x| f.g(x)).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut idx: Vec<usize> = (0..=p).collect();
    if candidates.len() <= p {
        return Err(SbmError::InvalidInput("too few candidate anchors".into()));
    }
    loop {
        let gens: Vec<Vec<f64>> = idx.iter().map(|&i| gs[i].clone()).collect();
        if let Ok(rep) = check_a1(&gens) {
            if let A1Witness::Certificates(certs) = rep.witness {
                let cost = certs[..2 * p]
                    .iter()
                    .map(|(_, l)| l.iter().sum::<f64>())
                    .fold(0.0, f64::max);
                if best.as_ref().is_none_or(|(c, _)| cost < *c) {
                    best = Some((cost, idx.clone()));
                }
            }
        }
        // next combination
        let n = candidates.len();
        let k = idx.len();
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (_, chosen) = best.ok_or_else(|| SbmError::Infeasible {
        direction: vec![0.0; p],
    })?;
    AnchorSet::new(d, f, chosen.iter().map(|&i| candidates[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn std_basis() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]]
    }

    #[test]
    fn solve_lambda_examples() {
        assert_eq!(solve_lambda(&[1.0, 1.0], &std_basis()).unwrap(), vec![1.0, 1.0, 0.0]);
        assert_eq!(solve_lambda(&[0.0, 0.0], &std_basis()).unwrap(), vec![0.0, 0.0, 0.0]);
        let l = solve_lambda(&[-1.0, -1.0], &std_basis()).unwrap();
        assert!((l[0]).abs() < 1e-14 && l[1].abs() < 1e-14 && (l[2] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn solve_lambda_infeasible() {
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!(matches!(
            solve_lambda(&[-1.0, 0.0], &g),
            Err(SbmError::Infeasible { .. })
        ));
    }

    #[test]
    fn a1_examples() {
        assert!(check_a1(&std_basis()).unwrap().holds);
        let rep = check_a1(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(!rep.holds);
        let A1Witness::Unreachable(w) = rep.witness else {
            panic!("expected a witness direction")
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w[0] + h).abs() < 1e-12 && (w[1] + h).abs() < 1e-12, "{w:?}");
    }

    #[test]
    fn a1_bad_shape() {
        assert!(check_a1(&[vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(check_a1(&[vec![1.0], vec![0.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn a1_p1_and_p3() {
        assert!(check_a1(&[vec![2.0], vec![-0.5]]).unwrap().holds);
        assert!(!check_a1(&[vec![2.0], vec![0.5]]).unwrap().holds);
        let tetra = vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, -1.0, -1.0],
            vec![-1.0, 1.0, -1.0],
            vec![-1.0, -1.0, 1.0],
        ];
        assert!(check_a1(&tetra).unwrap().holds);
        let flat = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![-1.0, -1.0, 0.0],
            vec![1.0, 1.0, 0.0],
        ];
        let rep = check_a1(&flat).unwrap();
        assert!(!rep.holds);
        let A1Witness::Unreachable(w) = rep.witness else { panic!() };
        assert!(solve_lambda(&w, &flat).is_err());
    }

    #[test]
    fn cone_examples() {
        assert!(cone_membership(&std_basis(), &[0.0, 0.0], 1e-6).unwrap());
        assert!(!cone_membership(&std_basis(), &[0.1, 0.0], 0.05).unwrap());
        assert!(cone_membership(&std_basis(), &[0.1, 0.0], 0.2).unwrap());
        assert!(cone_membership(&std_basis(), &[0.1, 0.0], 0.0).is_err());
    }

    #[test]
    fn sampled_half_circle_anchors() {
        use crate::fields::{FieldSet, Sided, VectorField};
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::Walls {
            top: VectorField::Constant(vec![0.5, 0.0]),
            bottom: VectorField::Fourier {
                offset: vec![0.0, 0.0],
                cos: vec![0.5, 0.0],
                sin: vec![0.0, 0.5],
            },
        })
        .build(&d)
        .unwrap();
        let mut cands = vec![vec![0.0, 1.0]];
        for k in 0..12 {
            cands.push(vec![2.0 * std::f64::consts::PI * k as f64 / 12.0, -1.0]);
        }
        let anchors = select_anchors(&d, &f, &cands).unwrap();
        assert!(check_a1(&anchors.g_vectors).unwrap().holds);

        // samples confined to a quarter circle plus the top value cannot span
        let narrow: Vec<Vec<f64>> = std::iter::once(vec![0.0, 1.0])
            .chain((0..6).map(|k| vec![0.25 * k as f64, -1.0]))
            .collect();
        assert!(select_anchors(&d, &f, &narrow).is_err());
    }

    proptest! {
        #[test]
        fn a1_invariant_under_scaling_and_permutation(
            v in proptest::collection::vec(-2.0..2.0f64, 6),
            c in proptest::collection::vec(0.1..10.0f64, 3),
            perm in 0usize..6,
        ) {
            let gens = vec![vec![v[0], v[1]], vec![v[2], v[3]], vec![v[4], v[5]]];
            let perms = [[0,1,2],[0,2,1],[1,0,2],[1,2,0],[2,0,1],[2,1,0]];
            let scaled: Vec<Vec<f64>> = perms[perm].iter().enumerate()
                .map(|(k, &j)| gens[j].iter().map(|x| x * c[k]).collect())
                .collect();
            let a = check_a1(&gens).unwrap().holds;
            let b = check_a1(&scaled).unwrap().holds;
            prop_assert_eq!(a, b);
        }

        #[test]
        fn cone_membership_is_monotone(y0 in -1.0..1.0f64, y1 in -1.0..1.0f64, e in 0.01..3.0f64, k in 1.0..4.0f64) {
            let y = [y0, y1];
            if cone_membership(&std_basis(), &y, e).unwrap() {
                prop_assert!(cone_membership(&std_basis(), &y, e * k).unwrap());
            }
        }

        #[test]
        fn lambda_reconstructs_target(y0 in -3.0..3.0f64, y1 in -3.0..3.0f64) {
            let l = solve_lambda(&[y0, y1], &std_basis()).unwrap();
            let g = std_basis();
            for i in 0..2 {
                let r: f64 = (0..3).map(|j| l[j] * g[j][i]).sum();
                prop_assert!((r - [y0, y1][i]).abs() < 1e-12);
            }
            prop_assert!(l.iter().all(|&v| v >= 0.0));
        }
    }
}
