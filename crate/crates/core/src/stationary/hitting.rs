use crate::domain::DomainSpec;
use crate::error::Result;
use crate::fields::FieldSet;
use crate::integrator::{run_chain, SimConfig, StepRecord};
use crate::parallel::{chain_seed, map_chains};
use crate::vecmath::norm;

/// Starting state `(x, s)`.
pub type Start = (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct HittingReport {
    /// Per start, fraction of trials with `(X_T, S_T)` in `B(z, r) x B(0, r)`.
    pub terminal: Vec<f64>,
    /// Per start, fraction of trials where `|S|` drops below `r` by time `T`.
    pub spin_entry: Vec<f64>,
}

/// Monte Carlo estimate of the probability of ending near `(z, 0)` at time
/// `t_final`, for each start. Trial `k` of start `i` uses seed
/// `seed + i * trials + k`.
#[allow(clippy::too_many_arguments)]
pub fn hitting_estimate(
    d: &DomainSpec,
    f: &FieldSet,
    z: &[f64],
    r: f64,
    t_final: f64,
    dt: f64,
    starts: &[Start],
    trials: usize,
    seed: u64,
) -> Result<HittingReport> {
    let mut report = HittingReport {
        terminal: Vec::with_capacity(starts.len()),
        spin_entry: Vec::with_capacity(starts.len()),
    };
    for (i, (x0, s0)) in starts.iter().enumerate() {
        let outcomes = map_chains(trials, |k| {
            let cfg = SimConfig::new(dt, t_final, chain_seed(seed, i * trials + k), x0.clone(), s0.clone());
            let mut entered = norm(s0) < r;
            let mut watch = |rec: &StepRecord<'_>| {
                if !entered && norm(rec.s) < r {
                    entered = true;
                }
            };
            let end = run_chain(&cfg, d, f, &mut watch)?.state;
            let hit = d.point_distance(&end.x, z) < r && norm(&end.s) < r;
            Ok((hit, entered))
        })?;
        let n = trials.max(1) as f64;
        report.terminal.push(outcomes.iter().filter(|o| o.0).count() as f64 / n);
        report.spin_entry.push(outcomes.iter().filter(|o| o.1).count() as f64 / n);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Sided, VectorField};

    #[test]
    fn starting_at_target_with_large_radius() {
        let d = DomainSpec::standard_wristband();
        let f = FieldSet::builder(Sided::Walls {
            top: VectorField::Constant(vec![1.0]),
            bottom: VectorField::Constant(vec![-1.0]),
        })
        .build(&d)
        .unwrap();
        let z = vec![1.0, 0.0];
        let r = hitting_estimate(&d, &f, &z, 10.0, 1e-3, 1e-3, &[(z.clone(), vec![0.0])], 16, 3).unwrap();
        assert_eq!(r.terminal, vec![1.0]);
        assert_eq!(r.spin_entry, vec![1.0]);
    }
}
