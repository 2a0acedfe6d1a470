use nalgebra::DMatrix;

use crate::error::{Result, SbmError};

const FD_STEP: f64 = 1e-6;

/// `v(t) = sum_j exp(-sum_{k>=j} alpha_k t_k) (g_j / alpha_j)(exp(alpha_j t_j) - 1)`,
/// the spin reached from zero after holding `t_j` at a point with `(g_j, alpha_j)`.
pub fn steering_map(alpha: &[f64], g: &[Vec<f64>], t: &[f64]) -> Vec<f64> {
    let p = alpha.len();
    let mut v = vec![0.0; g[0].len()];
    for j in 0..p {
        let tail: f64 = (j..p).map(|k| alpha[k] * t[k]).sum();
        let c = (-tail).exp() * (alpha[j] * t[j]).exp_m1() / alpha[j];
        for (vi, gi) in v.iter_mut().zip(&g[j]) {
            *vi += c * gi;
        }
    }
    v
}

/// Largest relative error between the central-difference `det Dv` and
/// `det(T_g) exp(-sum_k k alpha_k t_k)` over `t_points`.
pub fn jacobian_check(alpha: &[f64], g: &[Vec<f64>], t_points: &[Vec<f64>]) -> Result<f64> {
    let p = alpha.len();
    if p == 0 || g.len() != p || g.iter().any(|v| v.len() != p) {
        return Err(SbmError::InvalidInput("need p vectors of dimension p".into()));
    }
    if alpha.iter().any(|a| !(*a > 0.0)) {
        return Err(SbmError::InvalidInput("alpha values must be positive".into()));
    }
    let tg = DMatrix::from_fn(p, p, |i, j| g[j][i]);
    let det_g = tg.determinant();
    let scale: f64 = g.iter().map(|v| v.iter().map(|x| x.abs()).fold(0.0, f64::max)).product();
    if det_g.abs() <= 1e-12 * scale {
        return Err(SbmError::InvalidInput("g vectors are linearly dependent".into()));
    }
    let mut worst: f64 = 0.0;
    for t in t_points {
        if t.len() != p {
            return Err(SbmError::InvalidInput("t point has the wrong dimension".into()));
        }
        let mut jac = DMatrix::zeros(p, p);
        let mut tp = t.clone();
        for i in 0..p {
            tp[i] = t[i] + FD_STEP;
            let plus = steering_map(alpha, g, &tp);
            tp[i] = t[i] - FD_STEP;
            let minus = steering_map(alpha, g, &tp);
            tp[i] = t[i];
            for r in 0..p {
                jac[(r, i)] = (plus[r] - minus[r]) / (2.0 * FD_STEP);
            }
        }
        let weighted: f64 = (0..p).map(|k| (k + 1) as f64 * alpha[k] * t[k]).sum();
        let want = det_g * (-weighted).exp();
        worst = worst.max((jac.determinant() - want).abs() / want.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_t(p: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(0.01..=1.0)).collect())
            .collect()
    }

    /// Column `i` of `Dv` is `E_i g_i - alpha_i sum_{j<i} term_j`.
    fn analytic_det(alpha: &[f64], g: &[Vec<f64>], t: &[f64]) -> f64 {
        let p = alpha.len();
        let e = |j: usize| (-(j..p).map(|k| alpha[k] * t[k]).sum::<f64>()).exp();
        let term = |j: usize, r: usize| e(j) * g[j][r] / alpha[j] * ((alpha[j] * t[j]).exp() - 1.0);
        let m = DMatrix::from_fn(p, p, |r, i| {
            e(i) * g[i][r] - alpha[i] * (0..i).map(|j| term(j, r)).sum::<f64>()
        });
        m.determinant()
    }

    #[test]
    fn closed_form_matches_analytic_jacobian() {
        let alpha = [1.0, 2.0, 0.7];
        let g = vec![vec![1.0, 0.0, 0.2], vec![1.0, 1.0, 0.0], vec![0.0, -0.5, 1.0]];
        let det_g = DMatrix::from_fn(3, 3, |i, j| g[j][i]).determinant();
        for t in random_t(3, 20, 1) {
            let want = det_g * (-(alpha[0] * t[0] + 2.0 * alpha[1] * t[1] + 3.0 * alpha[2] * t[2])).exp();
            assert!((analytic_det(&alpha, &g, &t) - want).abs() < 1e-12 * want.abs());
        }
    }

    #[test]
    fn p1_is_exact_up_to_truncation() {
        let e = jacobian_check(&[1.3], &[vec![0.8]], &random_t(1, 10, 2)).unwrap();
        assert!(e < 1e-8, "{e}");
    }

    #[test]
    fn p2_example() {
        let g = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let e = jacobian_check(&[1.0, 2.0], &g, &random_t(2, 50, 3)).unwrap();
        assert!(e < 1e-5, "{e}");
    }

    #[test]
    fn rescaling_g_leaves_error_unchanged() {
        let ts = random_t(2, 20, 4);
        let g = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        let g2 = vec![vec![2.0, 0.0], vec![0.5, 0.5]];
        let e1 = jacobian_check(&[1.0, 2.0], &g, &ts).unwrap();
        let e2 = jacobian_check(&[1.0, 2.0], &g2, &ts).unwrap();
        assert!((e1 - e2).abs() < 1e-7, "{e1} {e2}");
    }

    #[test]
    fn singular_g_rejected() {
        let g = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(jacobian_check(&[1.0, 1.0], &g, &random_t(2, 1, 5)).is_err());
    }
}
