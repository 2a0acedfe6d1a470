//! Acceptance suite: one PASS/FAIL line per criterion, at the stated
//! tolerances. Runs about 10^9 Euler steps; expect several minutes.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinbm::excursions::excursion_counts;
use spinbm::fields::hull_g_over_alpha;
use spinbm::integrator::{run_chain, DampingBound, Recorder};
use spinbm::parallel::{chain_seed, map_chains, map_chains_sequential};
use spinbm::presets::Preset;
use spinbm::skorokhod::random_round_trips;
use spinbm::stationary::{
    histogram_l1, jacobian_check, occupancy_estimate, verify_density_identities, Accumulator, Axis, Coord,
    OccupancyHistogram, SpinTally, SpinTallyObserver, WristbandDensity,
};
use spinbm::{DomainSpec, FieldSet, Result, SimConfig, Wall};

const DAMPING_TOL: f64 = 1e-9;

// Frozen from pilot runs at the settings of `spin_concentration`.
const POINT_BALL_MIN: f64 = 0.35;
const AXES_BAND_MIN: f64 = 0.70;

struct Outcome {
    lines: Vec<(bool, String)>,
}

impl Outcome {
    fn record(&mut self, id: &str, pass: bool, detail: String) {
        let line = format!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

/// Running worst damping excess over every chain of every stochastic run.
#[derive(Default)]
struct DampingLedger {
    worst: f64,
    steps: u64,
    runs: usize,
}

impl DampingLedger {
    fn absorb(&mut self, b: &DampingBound) {
        if self.runs == 0 || b.worst_excess > self.worst {
            self.worst = b.worst_excess;
        }
        self.steps += b.steps;
        self.runs += 1;
    }
}

fn wristband_template() -> OccupancyHistogram {
    OccupancyHistogram::new(vec![
        Axis::new("y", Coord::Position(1), -1.0, 1.0, 20).unwrap(),
        Axis::new("s", Coord::Spin(0), -1.0, 1.0, 20).unwrap(),
    ])
    .unwrap()
}

/// Occupation histogram over `chains` chains, also tracking the damping bound.
fn histogram_run(
    cfg: &SimConfig,
    chains: usize,
    d: &DomainSpec,
    f: &FieldSet,
    ledger: &mut DampingLedger,
) -> Result<OccupancyHistogram> {
    let template = wristband_template();
    let parts = map_chains(chains, |i| {
        let c = cfg.clone().with_seed(chain_seed(cfg.seed, i));
        let mut obs = (Accumulator::new(&c, template.clone()), DampingBound::new(&c.initial_s, f));
        run_chain(&c, d, f, &mut obs)?;
        Ok((obs.0.histogram, obs.1))
    })?;
    let mut h = template.clone();
    for (part, bound) in &parts {
        h.merge_from(part)?;
        ledger.absorb(bound);
    }
    Ok(h)
}

fn wristband_density(out: &mut Outcome, ledger: &mut DampingLedger) {
    let p = Preset::symmetric_wristband();
    let (d, f) = (p.domain(), p.fields().unwrap());
    let dt = 1e-4;
    let horizon = 1e4;
    let cfg = |seed: u64, dt: f64| SimConfig::new(dt, horizon, seed, vec![0.0, 0.0], vec![0.0]).with_burn_in(0.1 * horizon);
    let density = WristbandDensity::new(1.0, 1.0).unwrap();

    let t0 = Instant::now();
    // Step dt with increments built from pairs of dt/2 normals, so that the
    // refined run below follows the same Brownian path.
    let coarse = histogram_run(&cfg(0, dt).with_increment_split(2), 8, &d, &f, ledger).unwrap();
    let fine = histogram_run(&cfg(0, dt / 2.0), 8, &d, &f, ledger).unwrap();
    let l1_coarse = density.compare(&coarse).unwrap().l1;
    let l1_fine = density.compare(&fine).unwrap().l1;
    out.record(
        "1",
        l1_coarse < 0.1 && l1_fine < l1_coarse,
        format!(
            "wristband (y,s) histogram l1 = {l1_coarse:.4} at dt = {dt:e} (< 0.1), {l1_fine:.4} at dt/2 (decreases); 8 chains, horizon {horizon:e}, {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );

    let t0 = Instant::now();
    let other = histogram_run(&cfg(8, dt), 8, &d, &f, ledger).unwrap();
    let corners = density.corner_cells(&coarse).unwrap();
    let l1 = histogram_l1(&coarse, &other, &corners).unwrap();
    out.record(
        "10",
        l1 < 0.05,
        format!(
            "seeds 0..7 vs 8..15 histogram l1 = {l1:.4} (< 0.05), {:.0} s",
            t0.elapsed().as_secs_f64()
        ),
    );
}

fn spin_concentration(out: &mut Outcome, ledger: &mut DampingLedger) {
    let dt = 1e-4;
    let horizon = 2500.0;
    let chains = 4;
    let mut hull_fracs = Vec::new();
    let mut concentration = Vec::new();
    for preset in [Preset::PointConcentration, Preset::AxesConcentration] {
        let (d, f) = (preset.domain(), preset.fields().unwrap());
        let hull = hull_g_over_alpha(&f, &d, 4096).unwrap().polytope;
        let cfg = SimConfig::new(dt, horizon, 0, vec![0.0, 0.0], vec![0.0, 0.0]).with_burn_in(0.1 * horizon);
        let parts = map_chains(chains, |i| {
            let c = cfg.clone().with_seed(chain_seed(cfg.seed, i));
            let tally = SpinTally::new()
                .with_hull(hull.clone(), 0.05)
                .with_ball(vec![0.5, 0.0], 0.15)
                .with_axes(0.1);
            let mut obs = (SpinTallyObserver::new(&c, tally), DampingBound::new(&c.initial_s, &f));
            run_chain(&c, &d, &f, &mut obs)?;
            Ok((obs.0.tally, obs.1))
        })
        .unwrap();
        let mut tally = SpinTally::new()
            .with_hull(hull.clone(), 0.05)
            .with_ball(vec![0.5, 0.0], 0.15)
            .with_axes(0.1);
        for (part, bound) in &parts {
            tally.merge_from(part);
            ledger.absorb(bound);
        }
        hull_fracs.push((preset.name(), tally.hull_fraction()));
        concentration.push(match preset {
            Preset::PointConcentration => ("ball B((0.5,0), 0.15)", tally.ball_fraction(), POINT_BALL_MIN),
            _ => ("band of width 0.1 around the axes", tally.axes_fraction(), AXES_BAND_MIN),
        });
    }
    out.record(
        "3",
        hull_fracs.iter().all(|(_, h)| *h >= 0.99),
        hull_fracs
            .iter()
            .map(|(n, h)| format!("{n}: {:.4} of spin mass within 0.05 of the hull (>= 0.99)", h))
            .collect::<Vec<_>>()
            .join("; "),
    );
    out.record(
        "8",
        concentration.iter().all(|(_, v, min)| v >= min),
        concentration
            .iter()
            .zip(["point-concentration", "axes-concentration"])
            .map(|((region, v, min), n)| format!("{n}: {v:.4} of spin mass in {region} (>= {min})"))
            .collect::<Vec<_>>()
            .join("; "),
    );
}

fn round_trips(out: &mut Outcome) {
    let s = random_round_trips(100, 2024).unwrap();
    let secs = s.elapsed.as_secs_f64();
    out.record(
        "4",
        s.instances == 100 && s.max_spin_error < 1e-9 && s.max_position_error < 1e-9 && secs < 1.0,
        format!(
            "{} steering round trips, max |s(T)| = {:.2e}, max |x(T) - z| = {:.2e} (< 1e-9), {secs:.3} s (< 1 s)",
            s.instances, s.max_spin_error, s.max_position_error
        ),
    );
}

fn jacobians(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = Vec::new();
    for p in [2usize, 3] {
        let alpha: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
        let g: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = (0..50).map(|_| (0..p).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
        worst.push((p, jacobian_check(&alpha, &g, &ts).unwrap()));
    }
    out.record(
        "5",
        worst.iter().all(|(_, e)| *e < 1e-5),
        worst
            .iter()
            .map(|(p, e)| format!("p = {p}: max relative determinant error {e:.2e} over 50 points (< 1e-5)"))
            .collect::<Vec<_>>()
            .join("; "),
    );
}

fn density_identities(out: &mut Outcome) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (0.5, 1.5)] {
        let margin = 0.01 * (a + b);
        let (lo, hi) = (-b + margin, a - margin);
        let grid: Vec<f64> = (0..1000).map(|i| lo + (hi - lo) * i as f64 / 999.0).collect();
        let report = verify_density_identities(a, b, &grid).unwrap();
        pass &= report.passed() && report.checks.len() == 3;
        let worst = report.checks.iter().map(|c| c.worst_error).fold(0.0, f64::max);
        parts.push(format!("({a}, {b}) worst {worst:.2e}"));
    }
    out.record(
        "6",
        pass,
        format!("three identity families on 1000-point grids at 1e-8: {}", parts.join(", ")),
    );
}

fn excursion_scaling(out: &mut Outcome, ledger: &mut DampingLedger) {
    let p = Preset::symmetric_wristband();
    let (d, f) = (p.domain(), p.fields().unwrap());
    let eps = [0.05, 0.1, 0.2, 0.4];
    let cfg = SimConfig::new(2.5e-5, 1e4, 0, vec![0.0, 0.0], vec![0.0]);
    let t0 = Instant::now();
    let counts = excursion_counts(&cfg, 1, &d, &f, &eps).unwrap();
    let slope = counts.rate_table(None).unwrap().log_log_slope().unwrap();
    let top = counts.rate_table(Some(Wall::Top)).unwrap();
    let bottom = counts.rate_table(Some(Wall::Bottom)).unwrap();
    let gaps: Vec<f64> = top
        .rows
        .iter()
        .zip(&bottom.rows)
        .map(|(t, b)| (t.rate - b.rate).abs() / (0.5 * (t.rate + b.rate)))
        .collect();
    out.record(
        "7",
        (-1.1..=-0.9).contains(&slope) && gaps.iter().all(|g| *g < 0.05),
        format!(
            "log-log slope {slope:.4} (in [-1.1, -0.9]); top/bottom rate gap at eps = {:?}: {} (< 5%); {:.0} s",
            eps,
            gaps.iter().map(|g| format!("{:.2}%", 100.0 * g)).collect::<Vec<_>>().join(", "),
            t0.elapsed().as_secs_f64()
        ),
    );

    // damping bound on a short wristband run with a large initial spin
    let cfg = SimConfig::new(1e-4, 100.0, 3, vec![0.0, 0.0], vec![5.0]);
    let mut b = DampingBound::new(&cfg.initial_s, &f);
    run_chain(&cfg, &d, &f, &mut b).unwrap();
    ledger.absorb(&b);
}

fn csv_bytes(cfg: &SimConfig, d: &DomainSpec, f: &FieldSet) -> (Vec<u8>, Vec<u8>) {
    let mut rec = Recorder::new(cfg, true);
    run_chain(cfg, d, f, &mut rec).unwrap();
    let mut traj = Vec::new();
    rec.trajectory.write_csv(&mut traj).unwrap();
    let h = occupancy_estimate(cfg, 4, d, f, &wristband_template()).unwrap();
    let mut hist = Vec::new();
    h.write_csv(&mut hist).unwrap();
    (traj, hist)
}

fn determinism(out: &mut Outcome) {
    let p = Preset::WristbandSpin {
        alpha: 2.0,
        beta: 1.0,
        lambda: 0.5,
    };
    let (d, f) = (p.domain(), p.fields().unwrap());
    let cfg = SimConfig::new(1e-3, 50.0, 11, vec![1.0, 0.2], vec![0.3]).with_stride(7);
    let first = csv_bytes(&cfg, &d, &f);
    let mut runs = vec![("repeat".to_string(), csv_bytes(&cfg, &d, &f))];
    #[cfg(feature = "parallel")]
    for workers in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        runs.push((format!("{workers} workers"), pool.install(|| csv_bytes(&cfg, &d, &f))));
    }
    // the sequential path must agree with the pooled one as well
    let seq = map_chains_sequential(4, |i| {
        let c = cfg.clone().with_seed(chain_seed(cfg.seed, i));
        let mut acc = Accumulator::new(&c, wristband_template());
        run_chain(&c, &d, &f, &mut acc)?;
        Ok(acc.histogram)
    })
    .unwrap();
    let mut h = wristband_template();
    for part in &seq {
        h.merge_from(part).unwrap();
    }
    let mut seq_hist = Vec::new();
    h.write_csv(&mut seq_hist).unwrap();
    runs.push(("sequential".to_string(), (first.0.clone(), seq_hist)));

    let mismatched: Vec<&str> = runs
        .iter()
        .filter(|(_, r)| *r != first)
        .map(|(n, _)| n.as_str())
        .collect();
    out.record(
        "9",
        mismatched.is_empty() && !first.0.is_empty(),
        format!(
            "trajectory CSV ({} bytes) and histogram CSV ({} bytes) identical across {}{}",
            first.0.len(),
            first.1.len(),
            runs.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", "),
            if mismatched.is_empty() {
                String::new()
            } else {
                format!("; differs for {}", mismatched.join(", "))
            }
        ),
    );
}

fn main() {
    let mut out = Outcome { lines: Vec::new() };
    let mut ledger = DampingLedger::default();

    round_trips(&mut out);
    jacobians(&mut out);
    density_identities(&mut out);
    determinism(&mut out);
    spin_concentration(&mut out, &mut ledger);
    excursion_scaling(&mut out, &mut ledger);
    wristband_density(&mut out, &mut ledger);

    out.record(
        "2",
        ledger.runs > 0 && ledger.worst <= DAMPING_TOL,
        format!(
            "damping bound over {} chains and {} steps: worst |S|^2 - envelope = {:.3e} (<= {DAMPING_TOL:e})",
            ledger.runs, ledger.steps, ledger.worst
        ),
    );

    let failed = out.lines.iter().filter(|(p, _)| !p).count();
    println!("acceptance: {} passed, {failed} failed", out.lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
