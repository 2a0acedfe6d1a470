use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spinbm::excursions::{ExcursionCounts, ExcursionTracker};
use spinbm::fields::{check_a1, hull_g_over_alpha, A1Witness};
use spinbm::integrator::{
    run_chain, CsvSink, DampingBound, Observer, StepRecord, RNG_DESCRIPTION,
};
use spinbm::parallel::{chain_seed, map_chains};
use spinbm::presets::Preset;
use spinbm::skorokhod::random_round_trips;
use spinbm::stationary::{
    jacobian_check, Accumulator, OccupancyHistogram, SpinTally, SpinTallyObserver, WristbandDensity,
};
use spinbm::{Region, SbmError, Wall};

use crate::config::{ConfigError, Model, RunConfig};

const DAMPING_TOL: f64 = 1e-9;
const DEFAULT_EPS_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

pub enum Failure {
    Config(ConfigError),
    Runtime(SbmError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<SbmError> for Failure {
    fn from(e: SbmError) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub struct Options {
    pub out_dir: Option<PathBuf>,
    pub seed_override: Option<u64>,
    pub chains: Option<usize>,
}

/// Plain-text report: free-form lines plus one `CHECK` line per check.
#[derive(Default)]
pub struct Report {
    text: String,
    failed: usize,
    checks: usize,
}

impl Report {
    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    pub fn check(&mut self, name: &str, pass: bool, value: impl std::fmt::Display, tol: impl std::fmt::Display) {
        self.checks += 1;
        if !pass {
            self.failed += 1;
        }
        let _ = writeln!(self.text, "CHECK {name} {} {value} {tol}", if pass { "PASS" } else { "FAIL" });
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn finish(&mut self) {
        let _ = writeln!(
            self.text,
            "checks: {} passed, {} failed",
            self.checks - self.failed,
            self.failed
        );
    }
}

fn header(report: &mut Report, command: &str, cfg: &RunConfig, model: &Model) {
    report.line(format!("# spinbm {command}"));
    report.line(format!("# rng: {RNG_DESCRIPTION}"));
    report.line("# resolved config:");
    for l in cfg.echo(model).lines() {
        report.line(format!("#   {l}"));
    }
}

fn apply_overrides(cfg: &mut RunConfig, opts: &Options) {
    if let Some(sim) = cfg.sim.as_mut() {
        if let Some(seed) = opts.seed_override {
            sim.seed = seed;
        }
        if let Some(chains) = opts.chains {
            sim.chains = chains;
        }
    }
}

fn out_dir(opts: &Options) -> Result<PathBuf, Failure> {
    let dir = opts.out_dir.clone().unwrap_or_else(|| PathBuf::from("spinbm-out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9e}")).collect();
    format!("({})", parts.join(", "))
}

pub fn simulate(mut cfg: RunConfig, opts: &Options) -> Result<Report, Failure> {
    apply_overrides(&mut cfg, opts);
    let model = cfg.model()?;
    let (sim, chains) = cfg.sim_config(&model)?;
    let dir = out_dir(opts)?;
    let (d, f) = (&model.domain, &model.fields);

    let results = map_chains(chains, |i| {
        let c = sim.clone().with_seed(chain_seed(sim.seed, i));
        let started = Instant::now();
        let file = BufWriter::new(File::create(dir.join(format!("trajectory_{i}.csv")))?);
        let mut obs = (CsvSink::new(&c, d, f.spin_dim(), file)?, DampingBound::new(&c.initial_s, f));
        let summary = run_chain(&c, d, f, &mut obs)?;
        let (sink, bound) = obs;
        sink.finish()?;
        Ok((c.seed, summary, bound, started.elapsed()))
    })?;

    let mut report = Report::default();
    header(&mut report, "simulate", &cfg, &model);
    report.line(format!("steps_per_chain {}", sim.steps()));
    for (i, (seed, s, bound, elapsed)) in results.iter().enumerate() {
        let st = &s.state;
        let mut line = format!(
            "chain {i} seed={seed} file=trajectory_{i}.csv steps={} halved_steps={} final_x={} final_s={} final_L={:.9e}",
            s.steps,
            s.halved_steps,
            fmt_vec(&st.x),
            fmt_vec(&st.s),
            st.local_time
        );
        if d.is_wristband() {
            let _ = write!(line, " final_L_top={:.9e} final_L_bottom={:.9e}", st.local_time_top, st.local_time_bottom);
        }
        let _ = write!(line, " wall_clock_s={:.3}", elapsed.as_secs_f64());
        report.line(line);
        report.check(
            &format!("damping_bound_chain{i}"),
            bound.holds(DAMPING_TOL),
            format!("{:.3e}", bound.worst_excess),
            format!("{DAMPING_TOL:e}"),
        );
    }
    report.finish();
    fs::write(dir.join("summary.txt"), report.text())?;
    Ok(report)
}

/// Everything one chain of `estimate-stationary` collects.
struct ChainObserver<'a> {
    acc: Accumulator<'a>,
    tally: SpinTallyObserver<'a>,
    excursions: Option<ExcursionTracker<'a>>,
    bound: DampingBound,
}

impl Observer for ChainObserver<'_> {
    #[inline]
    fn observe(&mut self, rec: &StepRecord<'_>) {
        self.acc.observe(rec);
        self.tally.observe(rec);
        if let Some(e) = self.excursions.as_mut() {
            e.observe(rec);
        }
        self.bound.observe(rec);
    }
}

pub fn estimate_stationary(mut cfg: RunConfig, opts: &Options) -> Result<Report, Failure> {
    apply_overrides(&mut cfg, opts);
    let model = cfg.model()?;
    let (sim, chains) = cfg.sim_config(&model)?;
    let axes = cfg.axes(&model)?;
    let template = OccupancyHistogram::new(axes).map_err(|e| ConfigError(format!("[analysis]: {e}")))?;
    let (d, f) = (&model.domain, &model.fields);
    let a = &cfg.analysis;
    let p = f.spin_dim();

    let ball = a.ball.clone().or(match model.preset {
        Some(Preset::PointConcentration) => Some(crate::config::BallSpec {
            center: vec![0.5, 0.0],
            radius: 0.15,
            min_fraction: 0.35,
        }),
        _ => None,
    });
    let band = a.axes_band.clone().or(match model.preset {
        Some(Preset::AxesConcentration) => Some(crate::config::AxesBandSpec {
            width: 0.1,
            min_fraction: 0.70,
        }),
        _ => None,
    });
    if let Some(b) = &ball {
        if b.center.len() != p || !(b.radius > 0.0) {
            return Err(ConfigError(format!("[analysis.ball]: need a centre of dimension {p} and a positive radius")).into());
        }
    }
    let hull_tol = a.hull_tol.unwrap_or(0.05);
    let hull = if p <= 3 {
        Some(hull_g_over_alpha(f, d, 4096)?.polytope)
    } else {
        None
    };
    let mut tally = SpinTally::new();
    if let Some(h) = &hull {
        tally = tally.with_hull(h.clone(), hull_tol);
    }
    if let Some(b) = &ball {
        tally = tally.with_ball(b.center.clone(), b.radius);
    }
    if let Some(b) = &band {
        tally = tally.with_axes(b.width);
    }
    let density = match model.preset {
        Some(Preset::WristbandSpin { alpha, beta, .. }) if a.compare_density.unwrap_or(true) => {
            let density = WristbandDensity::new(alpha, beta)?;
            // the analytic cell masses need compatible axes; find out before simulating
            density
                .cell_masses(&template)
                .map_err(|e| ConfigError(format!("[analysis]: density comparison: {e}")))?;
            Some((density, alpha, beta))
        }
        Some(Preset::WristbandSpin { .. }) => None,
        _ if a.compare_density == Some(true) => {
            return Err(ConfigError("[analysis]: compare_density needs the wristband-1d-spin preset".into()).into())
        }
        _ => None,
    };
    if !a.eps_grid.is_empty() {
        // reject a bad grid before simulating
        ExcursionTracker::new(d, sim.dt, &a.eps_grid, false).map_err(|e| ConfigError(format!("[analysis]: {e}")))?;
    }
    let dir = out_dir(opts)?;

    let started = Instant::now();
    let parts = map_chains(chains, |i| {
        let c = sim.clone().with_seed(chain_seed(sim.seed, i));
        let excursions = if a.eps_grid.is_empty() {
            None
        } else {
            Some(ExcursionTracker::new(d, c.dt, &a.eps_grid, false)?.starting_after(c.burn_in))
        };
        let mut obs = ChainObserver {
            acc: Accumulator::new(&c, template.clone()),
            tally: SpinTallyObserver::new(&c, tally.clone()),
            excursions,
            bound: DampingBound::new(&c.initial_s, f),
        };
        run_chain(&c, d, f, &mut obs)?;
        Ok((
            obs.acc.histogram,
            obs.tally.tally,
            obs.excursions.map(|e| e.summary()),
            obs.bound,
        ))
    })?;
    let elapsed = started.elapsed();

    let mut hist = template.clone();
    let mut merged_tally = tally.clone();
    let mut counts: Option<ExcursionCounts> = None;
    let mut worst_excess = f64::NEG_INFINITY;
    for (h, t, e, b) in &parts {
        hist.merge_from(h)?;
        merged_tally.merge_from(t);
        if let Some(e) = e {
            match counts.as_mut() {
                Some(c) => c.merge_from(e)?,
                None => counts = Some(e.clone()),
            }
        }
        worst_excess = worst_excess.max(b.worst_excess);
    }
    hist.write_csv(BufWriter::new(File::create(dir.join("histogram.csv"))?))?;

    let mut report = Report::default();
    header(&mut report, "estimate-stationary", &cfg, &model);
    report.line(format!(
        "chains {chains} seeds {}..{} steps_per_chain {} wall_clock_s {:.3}",
        sim.seed,
        sim.seed + chains as u64 - 1,
        sim.steps(),
        elapsed.as_secs_f64()
    ));
    report.line(format!(
        "histogram histogram.csv cells={} total_weight={:.9e} overflow_fraction={:.3e}",
        hist.cells(),
        hist.total_weight(),
        hist.overflow_fraction()
    ));

    if let Some((density, alpha, beta)) = &density {
        let cmp = density.compare(&hist)?;
        let tol = a.density_l1_tol.unwrap_or(0.1);
        report.line(format!(
            "density analytic wristband density alpha={alpha} beta={beta}, {} corner cells excluded",
            cmp.corner_cells.len()
        ));
        report.check("density_l1", cmp.l1 < tol, format!("{:.6}", cmp.l1), tol);
    }
    if hull.is_some() {
        let min = a.hull_min_fraction.unwrap_or(0.99);
        report.check(
            "hull_support",
            merged_tally.hull_fraction() >= min,
            format!("{:.6}", merged_tally.hull_fraction()),
            min,
        );
    }
    if let Some(b) = &ball {
        report.check(
            "ball_fraction",
            merged_tally.ball_fraction() >= b.min_fraction,
            format!("{:.6}", merged_tally.ball_fraction()),
            b.min_fraction,
        );
    }
    if let Some(b) = &band {
        report.check(
            "axes_fraction",
            merged_tally.axes_fraction() >= b.min_fraction,
            format!("{:.6}", merged_tally.axes_fraction()),
            b.min_fraction,
        );
    }
    report.check(
        "damping_bound",
        worst_excess <= DAMPING_TOL,
        format!("{worst_excess:.3e}"),
        format!("{DAMPING_TOL:e}"),
    );
    if let Some(c) = &counts {
        let table = c.rate_table(None)?;
        table.write_csv(BufWriter::new(File::create(dir.join("excursions.csv"))?))?;
        match table.log_log_slope() {
            Ok(s) => report.line(format!("excursions excursions.csv log_log_slope={s:.6}")),
            Err(e) => report.line(format!("excursions excursions.csv log_log_slope unavailable: {e}")),
        }
    }
    report.finish();
    fs::write(dir.join("report.txt"), report.text())?;
    Ok(report)
}

pub fn verify(mut cfg: RunConfig, opts: &Options) -> Result<Report, Failure> {
    apply_overrides(&mut cfg, opts);
    let model = cfg.model()?;
    let v = cfg.verify.clone();
    let mut report = Report::default();
    header(&mut report, "verify", &cfg, &model);

    if v.density_grid_points < 2 {
        return Err(ConfigError("[verify]: density_grid_points must be at least 2".into()).into());
    }
    for [a, b] in &v.density_params {
        let density = WristbandDensity::with_b_scale(*a, *b, v.density_b_scale)
            .map_err(|e| ConfigError(format!("[verify]: {e}")))?;
        let margin = 0.01 * (a + b);
        let (lo, hi) = (-b + margin, a - margin);
        let n = v.density_grid_points;
        let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        for c in density.verify_identities(&grid)?.checks {
            report.check(
                &format!("density[{a},{b}].{}", c.name),
                c.passed,
                format!("{:.3e}", c.worst_error),
                format!("{:e}", c.tol),
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    for &p in &v.jacobian_dims {
        if p == 0 {
            return Err(ConfigError("[verify]: jacobian_dims entries must be positive".into()).into());
        }
        let alpha: Vec<f64> = (0..p).map(|_| rng.random_range(0.5..2.0)).collect();
        let g: Vec<Vec<f64>> = (0..p).map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ts: Vec<Vec<f64>> = (0..v.jacobian_points)
            .map(|_| (0..p).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let err = jacobian_check(&alpha, &g, &ts)?;
        report.check(&format!("jacobian_p{p}"), err < 1e-5, format!("{err:.3e}"), "1e-5");
    }

    if v.round_trip_instances > 0 {
        let s = random_round_trips(v.round_trip_instances, v.seed)?;
        report.check("spbv_spin", s.max_spin_error < 1e-9, format!("{:.3e}", s.max_spin_error), "1e-9");
        report.check(
            "spbv_position",
            s.max_position_error < 1e-9,
            format!("{:.3e}", s.max_position_error),
            "1e-9",
        );
        let limit = v.round_trip_instances as f64 / 100.0;
        report.check(
            "spbv_runtime_s",
            s.elapsed.as_secs_f64() < limit,
            format!("{:.3}", s.elapsed.as_secs_f64()),
            limit,
        );
    }

    let anchors = v.anchors.clone().or_else(|| model.preset.and_then(|p| p.anchor_points()));
    match anchors {
        Some(points) => a1_check(&mut report, &model, &points)?,
        None => report.line("note a1_anchors skipped: no anchors given and the preset has no anchor set"),
    }

    if v.excursions {
        excursion_check(&mut report, &cfg, &model)?;
    }
    report.finish();
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("verify.txt"), report.text())?;
    }
    Ok(report)
}

fn a1_check(report: &mut Report, model: &Model, points: &[Vec<f64>]) -> Result<(), Failure> {
    let (d, f) = (&model.domain, &model.fields);
    for x in points {
        if x.len() != d.dim() || d.classify(x).ok() != Some(Region::Boundary) {
            return Err(ConfigError(format!("[verify]: anchor {x:?} is not a boundary point")).into());
        }
    }
    let g: Vec<Vec<f64>> = points.iter().map(|x| f.g(x)).collect();
    let a1 = check_a1(&g).map_err(|e| ConfigError(format!("[verify]: anchors: {e}")))?;
    let witness = match &a1.witness {
        A1Witness::Unreachable(dir) => format!(" witness_direction={}", fmt_vec(dir)),
        A1Witness::Certificates(_) => String::new(),
    };
    report.check(
        "a1_anchors",
        a1.holds,
        if a1.holds { 1 } else { 0 },
        format!("1{witness}"),
    );
    Ok(())
}

fn excursion_check(report: &mut Report, cfg: &RunConfig, model: &Model) -> Result<(), Failure> {
    let (sim, chains) = cfg.sim_config(model)?;
    let grid: Vec<f64> = if cfg.analysis.eps_grid.is_empty() {
        DEFAULT_EPS_GRID.to_vec()
    } else {
        cfg.analysis.eps_grid.clone()
    };
    let counts = spinbm::excursions::excursion_counts(&sim, chains, &model.domain, &model.fields, &grid)
        .map_err(|e| match e {
            SbmError::InvalidInput(m) => Failure::Config(ConfigError(format!("[analysis]: {m}"))),
            other => Failure::Runtime(other),
        })?;
    let slope = counts.rate_table(None)?.log_log_slope()?;
    report.check(
        "excursion_slope",
        (-1.1..=-0.9).contains(&slope),
        format!("{slope:.4}"),
        "[-1.1,-0.9]",
    );
    let symmetric = matches!(model.preset, Some(Preset::WristbandSpin { alpha, beta, lambda }) if alpha == beta && lambda == 0.0);
    if symmetric {
        let top = counts.rate_table(Some(Wall::Top))?;
        let bottom = counts.rate_table(Some(Wall::Bottom))?;
        let gap = top
            .rows
            .iter()
            .zip(&bottom.rows)
            .map(|(t, b)| (t.rate - b.rate).abs() / (0.5 * (t.rate + b.rate)))
            .fold(0.0, f64::max);
        report.check("excursion_wall_balance", gap < 0.05, format!("{gap:.4}"), "0.05");
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}
