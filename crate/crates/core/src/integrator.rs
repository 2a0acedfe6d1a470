//! Projected-Euler time stepping of the reflected system with spin.
//!
//! Each step draws a Gaussian increment, and if the tentative point leaves
//! the closure it is projected back; the projection distance is the
//! boundary local time increment `dL`. The spin then follows the exact
//! flow of `dS = (g - alpha S) dL` at the projected boundary point.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{DomainKind, DomainSpec, Wall};
use crate::error::{Result, SbmError};
use crate::fields::FieldSet;
use crate::vecmath::all_finite;

/// Generator and Gaussian sampler, echoed into run reports.
pub const RNG_DESCRIPTION: &str = "ChaCha8 (rand_chacha, seed_from_u64) + ziggurat normals (rand_distr::StandardNormal)";

const MAX_HALVINGS: u32 = 40;

/// How the oblique push is applied after a boundary hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReflectionScheme {
    /// Project to the closure, then push tangentially from the projected point.
    #[default]
    HalfStep,
    /// Add the full `gamma dL` to the tentative point, then project whatever
    /// is still outside.
    Naive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub burn_in: f64,
    pub record_stride: usize,
    pub initial_x: Vec<f64>,
    pub initial_s: Vec<f64>,
    pub scheme: ReflectionScheme,
    /// Each increment is the sum of this many independent normals of
    /// variance `dt / increment_split`. A run with split 2 and step `dt`
    /// follows the same Brownian path as a split-1 run with step `dt / 2`
    /// and the same seed.
    pub increment_split: u32,
}

impl SimConfig {
    pub fn new(dt: f64, horizon: f64, seed: u64, initial_x: Vec<f64>, initial_s: Vec<f64>) -> Self {
        SimConfig {
            dt,
            horizon,
            seed,
            burn_in: 0.0,
            record_stride: 1,
            initial_x,
            initial_s,
            scheme: ReflectionScheme::HalfStep,
            increment_split: 1,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scheme(mut self, scheme: ReflectionScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_increment_split(mut self, split: u32) -> Self {
        self.increment_split = split;
        self
    }

    /// Number of Euler steps, `round(horizon / dt)`.
    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    /// Whether step `k` (1-based) is recorded.
    #[inline]
    pub fn records(&self, k: u64) -> bool {
        k.is_multiple_of(self.record_stride as u64) && k as f64 * self.dt >= self.burn_in
    }

    pub fn validate(&self, d: &DomainSpec, f: &FieldSet) -> Result<()> {
        let bad = |m: String| Err(SbmError::InvalidInput(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.dt <= self.horizon) {
            return bad(format!("need dt <= horizon, got {} > {}", self.dt, self.horizon));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.horizon) {
            return bad(format!("need 0 <= burn_in < horizon, got {}", self.burn_in));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if self.increment_split == 0 {
            return bad("increment_split must be at least 1".into());
        }
        if self.initial_x.len() != d.dim() {
            return bad(format!("initial_x must have dimension {}", d.dim()));
        }
        if self.initial_s.len() != f.spin_dim() {
            return bad(format!("initial_s must have dimension {}", f.spin_dim()));
        }
        if !all_finite(&self.initial_x) || !all_finite(&self.initial_s) {
            return bad("initial state must be finite".into());
        }
        if !d.in_closure(&self.initial_x) {
            return Err(SbmError::Domain(format!(
                "initial_x {:?} is outside the closure",
                self.initial_x
            )));
        }
        Ok(())
    }
}

/// Exact flow of `ds = (g - alpha s) dL` over a local-time increment at a
/// fixed boundary point: `e^{-alpha dL} s + (1 - e^{-alpha dL}) g / alpha`.
pub fn spin_update(s: &[f64], g: &[f64], alpha: f64, dl: f64) -> Vec<f64> {
    let mut out = s.to_vec();
    spin_update_in_place(&mut out, g, alpha, dl);
    out
}

#[inline]
pub fn spin_update_in_place(s: &mut [f64], g: &[f64], alpha: f64, dl: f64) {
    let decay = (-alpha * dl).exp();
    let gain = -(-alpha * dl).exp_m1() / alpha;
    for (si, gi) in s.iter_mut().zip(g) {
        *si = decay * *si + gain * gi;
    }
}

/// Position, spin and cumulative local times of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub local_time: f64,
    pub local_time_top: f64,
    pub local_time_bottom: f64,
}

impl ChainState {
    pub fn new(x: Vec<f64>, s: Vec<f64>) -> Self {
        ChainState {
            x,
            s,
            local_time: 0.0,
            local_time_top: 0.0,
            local_time_bottom: 0.0,
        }
    }
}

/// Result of one reflected step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub dl: f64,
    pub wall: Option<Wall>,
    /// Number of times the increment was halved to avoid a double crossing.
    pub halvings: u32,
}

/// Per-step view handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    /// 1-based step index.
    pub step: u64,
    pub t: f64,
    pub x: &'a [f64],
    pub s: &'a [f64],
    pub local_time: f64,
    pub local_time_top: f64,
    pub local_time_bottom: f64,
    pub dl: f64,
    pub wall: Option<Wall>,
}

/// Receives every step of a chain, burn-in included.
pub trait Observer {
    fn observe(&mut self, rec: &StepRecord<'_>);
}

impl<F: FnMut(&StepRecord<'_>)> Observer for F {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        self(rec)
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        self.0.observe(rec);
        self.1.observe(rec);
    }
}

/// Reusable scratch space for reflected steps.
pub struct Stepper<'a> {
    domain: &'a DomainSpec,
    fields: &'a FieldSet,
    scheme: ReflectionScheme,
    max_push: f64,
    tau_zero: bool,
    tentative: Vec<f64>,
    proj: Vec<f64>,
    push: Vec<f64>,
    g: Vec<f64>,
    sigma_scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(domain: &'a DomainSpec, fields: &'a FieldSet, scheme: ReflectionScheme) -> Self {
        let n = domain.dim();
        let max_push = match domain.kind() {
            DomainKind::Wristband { half_width, .. } => 2.0 * half_width,
            DomainKind::SmoothPhi(_) => f64::INFINITY,
        };
        Stepper {
            domain,
            fields,
            scheme,
            max_push,
            tau_zero: fields.tau_is_zero(),
            tentative: vec![0.0; n],
            proj: vec![0.0; n],
            push: vec![0.0; n],
            g: vec![0.0; fields.spin_dim()],
            sigma_scratch: Vec::new(),
        }
    }

    /// Advance `state` by the Brownian increment `db`.
    pub fn step(&mut self, state: &mut ChainState, db: &[f64]) -> Result<StepInfo> {
        let mut scale = 1.0;
        let mut halvings = 0;
        let dl = loop {
            self.fields
                .apply_sigma(&state.x, db, &mut self.tentative, &mut self.sigma_scratch);
            for (t, x) in self.tentative.iter_mut().zip(&state.x) {
                *t = x + scale * *t;
            }
            if self.domain.in_closure(&self.tentative) {
                state.x.copy_from_slice(&self.tentative);
                self.domain.normalize_in_place(&mut state.x);
                return Ok(StepInfo {
                    dl: 0.0,
                    wall: None,
                    halvings,
                });
            }
            match self.domain.project_into(&self.tentative, &mut self.proj) {
                Ok(push) if push <= self.max_push => break push,
                Ok(_) | Err(SbmError::Geometry(_)) if halvings < MAX_HALVINGS => {
                    halvings += 1;
                    scale *= 0.5;
                }
                Ok(push) => {
                    return Err(SbmError::Geometry(format!(
                        "push {push} still crosses the domain after {MAX_HALVINGS} halvings"
                    )))
                }
                Err(e) => return Err(e),
            }
        };

        let wall = self.domain.wall(&self.proj);
        self.fields.g_into(&self.proj, &mut self.g);
        let alpha = self.fields.alpha_at(&self.proj);

        match self.scheme {
            ReflectionScheme::HalfStep => {
                state.x.copy_from_slice(&self.proj);
                if !self.tau_zero {
                    self.fields.tau_into(&self.proj, &state.s, &mut self.push)?;
                    for (x, p) in state.x.iter_mut().zip(&self.push) {
                        *x += p * dl;
                    }
                }
            }
            ReflectionScheme::Naive => {
                self.domain.normal_into(&self.proj, &mut self.push)?;
                state.x.copy_from_slice(&self.tentative);
                for (x, n) in state.x.iter_mut().zip(&self.push) {
                    *x += n * dl;
                }
                if !self.tau_zero {
                    self.fields.tau_into(&self.proj, &state.s, &mut self.push)?;
                    for (x, p) in state.x.iter_mut().zip(&self.push) {
                        *x += p * dl;
                    }
                }
            }
        }
        if !self.domain.in_closure(&state.x) {
            self.tentative.copy_from_slice(&state.x);
            self.domain.project_into(&self.tentative, &mut state.x)?;
        }
        self.domain.normalize_in_place(&mut state.x);

        spin_update_in_place(&mut state.s, &self.g, alpha, dl);
        state.local_time += dl;
        match wall {
            Some(Wall::Top) => state.local_time_top += dl,
            Some(Wall::Bottom) => state.local_time_bottom += dl,
            None => {}
        }
        Ok(StepInfo { dl, wall, halvings })
    }
}

/// One reflected step from `state` with increment `db`; returns the new state
/// and the local-time increment.
pub fn reflected_step(
    state: &ChainState,
    db: &[f64],
    fields: &FieldSet,
    domain: &DomainSpec,
    scheme: ReflectionScheme,
) -> Result<(ChainState, StepInfo)> {
    let mut next = state.clone();
    let info = Stepper::new(domain, fields, scheme).step(&mut next, db)?;
    Ok((next, info))
}

/// Final state and bookkeeping of a chain run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSummary {
    pub state: ChainState,
    pub steps: u64,
    pub halved_steps: u64,
}

/// Run one chain, streaming every step to `obs`.
pub fn run_chain(
    cfg: &SimConfig,
    domain: &DomainSpec,
    fields: &FieldSet,
    obs: &mut impl Observer,
) -> Result<ChainSummary> {
    cfg.validate(domain, fields)?;
    let n = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let split = cfg.increment_split;
    let sd = (cfg.dt / split as f64).sqrt();
    let mut db = vec![0.0; n];
    let mut state = ChainState::new(cfg.initial_x.clone(), cfg.initial_s.clone());
    domain.normalize_in_place(&mut state.x);
    let mut stepper = Stepper::new(domain, fields, cfg.scheme);
    let steps = cfg.steps();
    let mut halved_steps = 0;
    for k in 1..=steps {
        if split == 1 {
            for v in db.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = sd * z;
            }
        } else {
            db.fill(0.0);
            for _ in 0..split {
                for v in db.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += sd * z;
                }
            }
        }
        let info = stepper.step(&mut state, &db).map_err(|e| match e {
            SbmError::Geometry(reason) => SbmError::Numerical { step: k, reason },
            other => other,
        })?;
        if info.halvings > 0 {
            halved_steps += 1;
        }
        if !(all_finite(&state.x) && all_finite(&state.s) && state.local_time.is_finite()) {
            return Err(SbmError::Numerical {
                step: k,
                reason: "non-finite state".into(),
            });
        }
        obs.observe(&StepRecord {
            step: k,
            t: k as f64 * cfg.dt,
            x: &state.x,
            s: &state.s,
            local_time: state.local_time,
            local_time_top: state.local_time_top,
            local_time_bottom: state.local_time_bottom,
            dl: info.dl,
            wall: info.wall,
        });
    }
    Ok(ChainSummary {
        state,
        steps,
        halved_steps,
    })
}

/// Recorded samples of a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub record_stride: usize,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub spins: Vec<Vec<f64>>,
    pub local_time: Vec<f64>,
    /// Per-wall local times; present on the wristband.
    pub local_time_top: Option<Vec<f64>>,
    pub local_time_bottom: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn empty(dt: f64, record_stride: usize, per_wall: bool) -> Self {
        Trajectory {
            dt,
            record_stride,
            times: Vec::new(),
            positions: Vec::new(),
            spins: Vec::new(),
            local_time: Vec::new(),
            local_time_top: per_wall.then(Vec::new),
            local_time_bottom: per_wall.then(Vec::new),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, rec: &StepRecord<'_>) {
        self.times.push(rec.t);
        self.positions.push(rec.x.to_vec());
        self.spins.push(rec.s.to_vec());
        self.local_time.push(rec.local_time);
        if let Some(v) = self.local_time_top.as_mut() {
            v.push(rec.local_time_top);
        }
        if let Some(v) = self.local_time_bottom.as_mut() {
            v.push(rec.local_time_bottom);
        }
    }

    /// CSV with header `t,x1..xn,s1..sp,L[,L_top,L_bottom]`, 17 significant
    /// digits per value.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let n = self.positions.first().map_or(0, Vec::len);
        let p = self.spins.first().map_or(0, Vec::len);
        let per_wall = self.local_time_top.is_some();
        writeln!(w, "{}", csv_header(n, p, per_wall))?;
        let mut line = String::new();
        for k in 0..self.len() {
            let walls = per_wall.then(|| {
                (
                    self.local_time_top.as_ref().unwrap()[k],
                    self.local_time_bottom.as_ref().unwrap()[k],
                )
            });
            csv_row(
                &mut line,
                self.times[k],
                &self.positions[k],
                &self.spins[k],
                self.local_time[k],
                walls,
            );
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn csv_header(n: usize, p: usize, per_wall: bool) -> String {
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=p).map(|i| format!("s{i}")));
    header.push("L".into());
    if per_wall {
        header.push("L_top".into());
        header.push("L_bottom".into());
    }
    header.join(",")
}

fn csv_row(line: &mut String, t: f64, x: &[f64], s: &[f64], l: f64, walls: Option<(f64, f64)>) {
    line.clear();
    push_num(line, t);
    for v in x.iter().chain(s) {
        line.push(',');
        push_num(line, *v);
    }
    line.push(',');
    push_num(line, l);
    if let Some((top, bottom)) = walls {
        line.push(',');
        push_num(line, top);
        line.push(',');
        push_num(line, bottom);
    }
}

/// Streams recorded steps straight to CSV in the [`Trajectory::write_csv`]
/// format. Write errors are kept and returned by [`CsvSink::finish`].
pub struct CsvSink<'c, W: Write> {
    cfg: &'c SimConfig,
    out: W,
    per_wall: bool,
    line: String,
    error: Option<std::io::Error>,
}

impl<'c, W: Write> CsvSink<'c, W> {
    pub fn new(cfg: &'c SimConfig, domain: &DomainSpec, spin_dim: usize, mut out: W) -> Result<Self> {
        let per_wall = domain.is_wristband();
        writeln!(out, "{}", csv_header(domain.dim(), spin_dim, per_wall))?;
        Ok(CsvSink {
            cfg,
            out,
            per_wall,
            line: String::new(),
            error: None,
        })
    }

    pub fn finish(mut self) -> Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for CsvSink<'_, W> {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        if self.error.is_some() || !self.cfg.records(rec.step) {
            return;
        }
        let walls = self
            .per_wall
            .then_some((rec.local_time_top, rec.local_time_bottom));
        csv_row(&mut self.line, rec.t, rec.x, rec.s, rec.local_time, walls);
        if let Err(e) = writeln!(self.out, "{}", self.line) {
            self.error = Some(e);
        }
    }
}

/// Tracks the largest excess of `|S|^2` over the damping envelope
/// `|S_0|^2 exp(-alpha_inf L) + (sup|g| / alpha_inf)^2`.
#[derive(Debug, Clone)]
pub struct DampingBound {
    s0_sq: f64,
    alpha_inf: f64,
    floor: f64,
    /// Largest `|S|^2 - envelope` seen (negative while the bound holds).
    pub worst_excess: f64,
    pub worst_step: u64,
    pub steps: u64,
}

impl DampingBound {
    pub fn new(initial_s: &[f64], fields: &FieldSet) -> Self {
        let a = fields.alpha_inf();
        DampingBound {
            s0_sq: initial_s.iter().map(|v| v * v).sum(),
            alpha_inf: a,
            floor: (fields.g_sup_norm() / a).powi(2),
            worst_excess: f64::NEG_INFINITY,
            worst_step: 0,
            steps: 0,
        }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.worst_excess <= tol
    }
}

impl Observer for DampingBound {
    #[inline]
    fn observe(&mut self, rec: &StepRecord<'_>) {
        let s_sq: f64 = rec.s.iter().map(|v| v * v).sum();
        let envelope = self.s0_sq * (-self.alpha_inf * rec.local_time).exp() + self.floor;
        let excess = s_sq - envelope;
        self.steps += 1;
        if excess > self.worst_excess {
            self.worst_excess = excess;
            self.worst_step = rec.step;
        }
    }
}

/// Append `v` with 17 significant digits.
pub(crate) fn push_num(out: &mut String, v: f64) {
    use std::fmt::Write as _;
    let _ = write!(out, "{v:.16e}");
}

/// Collects recorded steps (stride and burn-in applied) into a [`Trajectory`].
pub struct Recorder<'c> {
    cfg: &'c SimConfig,
    pub trajectory: Trajectory,
}

impl<'c> Recorder<'c> {
    pub fn new(cfg: &'c SimConfig, per_wall: bool) -> Self {
        Recorder {
            cfg,
            trajectory: Trajectory::empty(cfg.dt, cfg.record_stride, per_wall),
        }
    }
}

impl Observer for Recorder<'_> {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        if self.cfg.records(rec.step) {
            self.trajectory.push(rec);
        }
    }
}

/// Simulate one chain and keep its recorded samples.
pub fn simulate(cfg: &SimConfig, domain: &DomainSpec, fields: &FieldSet) -> Result<Trajectory> {
    let mut rec = Recorder::new(cfg, domain.is_wristband());
    run_chain(cfg, domain, fields, &mut rec)?;
    Ok(rec.trajectory)
}
