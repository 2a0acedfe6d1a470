//! Excursions of `X` away from the boundary.
//!
//! On a discrete path a step is a boundary contact when it picks up local
//! time (`dL > 0`). The interior steps strictly between two contact steps
//! form one excursion. Excursions shorter than one step are invisible, so
//! depth levels are only accepted when `eps >= 5 sqrt(dt)`.

use std::io::Write;

use crate::domain::{DomainSpec, Wall};
use crate::error::{Result, SbmError};
use crate::fields::FieldSet;
use crate::integrator::{push_num, run_chain, Observer, SimConfig, StepRecord, Trajectory};
use crate::parallel::{chain_seed, map_chains};

/// Smallest depth level accepted for step size `dt`.
pub fn resolution_floor(dt: f64) -> f64 {
    5.0 * dt.sqrt()
}

/// One complete excursion from the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionRecord {
    /// Time of the contact step that opens the excursion.
    pub start_time: f64,
    /// Time of the last interior step.
    pub end_time: f64,
    pub start_point: Vec<f64>,
    pub end_point: Vec<f64>,
    pub max_depth: f64,
    pub start_wall: Option<Wall>,
    pub end_wall: Option<Wall>,
}

impl ExcursionRecord {
    pub fn lifetime(&self) -> f64 {
        self.end_time - self.start_time
    }
}

/// Records plus the bookkeeping needed for the time partition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Decomposition {
    pub records: Vec<ExcursionRecord>,
    pub contact_steps: u64,
    /// Steps before the first contact and after the last one.
    pub partial_steps: u64,
    pub dt: f64,
    /// Local time accrued over the decomposed span, total and per wall.
    pub local_time: f64,
    pub local_time_top: f64,
    pub local_time_bottom: f64,
}

impl Decomposition {
    pub fn contact_time(&self) -> f64 {
        self.contact_steps as f64 * self.dt
    }

    pub fn partial_time(&self) -> f64 {
        self.partial_steps as f64 * self.dt
    }

    pub fn span(&self) -> f64 {
        self.records.iter().map(ExcursionRecord::lifetime).sum::<f64>()
            + self.contact_time()
            + self.partial_time()
    }
}

struct OpenContact {
    step: u64,
    t: f64,
    point: Vec<f64>,
    wall: Option<Wall>,
}

/// Streaming decomposition. Feed it every step of a chain (as an
/// [`Observer`]); it either keeps full records or only counts excursions
/// deeper than each level of a fixed grid, which keeps memory flat on long
/// runs.
pub struct ExcursionTracker<'d> {
    domain: &'d DomainSpec,
    start_time: f64,
    dt: f64,
    keep_records: bool,
    eps_grid: Vec<f64>,
    /// Counts per level for excursions leaving the top, bottom, or any wall
    /// (non-wristband domains use only the last row).
    counts: [Vec<u64>; 3],
    open: Option<OpenContact>,
    depth: f64,
    steps: u64,
    first_contact: Option<u64>,
    last_step: u64,
    out: Decomposition,
}

impl<'d> ExcursionTracker<'d> {
    /// Tracker for steps with size `dt`, counting only steps at `t > start_time`.
    pub fn new(domain: &'d DomainSpec, dt: f64, eps_grid: &[f64], keep_records: bool) -> Result<Self> {
        check_grid(domain, dt, eps_grid)?;
        Ok(ExcursionTracker {
            domain,
            start_time: 0.0,
            dt,
            keep_records,
            eps_grid: eps_grid.to_vec(),
            counts: std::array::from_fn(|_| vec![0; eps_grid.len()]),
            open: None,
            depth: 0.0,
            steps: 0,
            first_contact: None,
            last_step: 0,
            out: Decomposition {
                dt,
                ..Decomposition::default()
            },
        })
    }

    /// Ignore steps at or before `t` (burn-in).
    pub fn starting_after(mut self, t: f64) -> Self {
        self.start_time = t;
        self
    }

    fn push_step(&mut self, step: u64, t: f64, x: &[f64], dl: f64, wall: Option<Wall>) {
        self.steps += 1;
        self.last_step = step;
        if dl <= 0.0 {
            let depth = self.domain.boundary_distance(x);
            if depth > self.depth {
                self.depth = depth;
            }
            return;
        }
        self.out.contact_steps += 1;
        self.out.local_time += dl;
        match wall {
            Some(Wall::Top) => self.out.local_time_top += dl,
            Some(Wall::Bottom) => self.out.local_time_bottom += dl,
            None => {}
        }
        if self.first_contact.is_none() {
            self.first_contact = Some(self.steps);
        }
        if let Some(prev) = self.open.take() {
            if step > prev.step + 1 {
                let row = match prev.wall {
                    Some(Wall::Top) => Some(0),
                    Some(Wall::Bottom) => Some(1),
                    None => None,
                };
                for (i, &eps) in self.eps_grid.iter().enumerate() {
                    if self.depth > eps {
                        self.counts[2][i] += 1;
                        if let Some(r) = row {
                            self.counts[r][i] += 1;
                        }
                    }
                }
                if self.keep_records {
                    self.out.records.push(ExcursionRecord {
                        start_time: prev.t,
                        end_time: t - self.dt,
                        start_point: prev.point,
                        end_point: x.to_vec(),
                        max_depth: self.depth,
                        start_wall: prev.wall,
                        end_wall: wall,
                    });
                }
            }
        }
        self.open = Some(OpenContact {
            step,
            t,
            point: if self.keep_records { x.to_vec() } else { Vec::new() },
            wall,
        });
        self.depth = 0.0;
    }

    /// Excursion counts deeper than each grid level, optionally by start wall.
    pub fn counts(&self, wall: Option<Wall>) -> &[u64] {
        match wall {
            Some(Wall::Top) => &self.counts[0],
            Some(Wall::Bottom) => &self.counts[1],
            None => &self.counts[2],
        }
    }

    /// Rates per unit local time; per-wall tables use that wall's local time.
    pub fn rate_table(&self, wall: Option<Wall>) -> Result<RateTable> {
        let lt = match wall {
            Some(Wall::Top) => self.out.local_time_top,
            Some(Wall::Bottom) => self.out.local_time_bottom,
            None => self.out.local_time,
        };
        rate_rows(&self.eps_grid, self.counts(wall), lt)
    }

    pub fn finish(mut self) -> Decomposition {
        self.out.partial_steps = match self.first_contact {
            None => self.steps,
            Some(first) => {
                let last = self.open.as_ref().map_or(self.last_step, |o| o.step);
                (first - 1) + (self.last_step - last)
            }
        };
        if self.out.contact_steps == 0 {
            self.out.records.clear();
        }
        self.out
    }
}

/// Excursion counts per depth level and local times, mergeable across chains.
/// Index 0 is the top wall, 1 the bottom wall, 2 all of the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionCounts {
    pub eps_grid: Vec<f64>,
    pub counts: [Vec<u64>; 3],
    pub local_time: [f64; 3],
}

impl ExcursionCounts {
    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        if self.eps_grid != other.eps_grid {
            return Err(SbmError::InvalidInput("depth grids differ".into()));
        }
        for r in 0..3 {
            for (a, b) in self.counts[r].iter_mut().zip(&other.counts[r]) {
                *a += b;
            }
            self.local_time[r] += other.local_time[r];
        }
        Ok(())
    }

    pub fn rate_table(&self, wall: Option<Wall>) -> Result<RateTable> {
        let r = match wall {
            Some(Wall::Top) => 0,
            Some(Wall::Bottom) => 1,
            None => 2,
        };
        rate_rows(&self.eps_grid, &self.counts[r], self.local_time[r])
    }
}

impl ExcursionTracker<'_> {
    pub fn summary(&self) -> ExcursionCounts {
        ExcursionCounts {
            eps_grid: self.eps_grid.clone(),
            counts: self.counts.clone(),
            local_time: [
                self.out.local_time_top,
                self.out.local_time_bottom,
                self.out.local_time,
            ],
        }
    }
}

/// Run `chains` copies of `cfg` (seeds `cfg.seed + i`), counting excursions
/// after the burn-in without storing them.
pub fn excursion_counts(
    cfg: &SimConfig,
    chains: usize,
    d: &DomainSpec,
    f: &FieldSet,
    eps_grid: &[f64],
) -> Result<ExcursionCounts> {
    check_grid(d, cfg.dt, eps_grid)?;
    let parts = map_chains(chains, |i| {
        let chain_cfg = cfg.clone().with_seed(chain_seed(cfg.seed, i));
        let mut tr = ExcursionTracker::new(d, cfg.dt, eps_grid, false)?.starting_after(cfg.burn_in);
        run_chain(&chain_cfg, d, f, &mut tr)?;
        Ok(tr.summary())
    })?;
    let mut out = ExcursionCounts {
        eps_grid: eps_grid.to_vec(),
        counts: std::array::from_fn(|_| vec![0; eps_grid.len()]),
        local_time: [0.0; 3],
    };
    for p in &parts {
        out.merge_from(p)?;
    }
    Ok(out)
}

impl Observer for ExcursionTracker<'_> {
    fn observe(&mut self, rec: &StepRecord<'_>) {
        if rec.t > self.start_time {
            self.push_step(rec.step, rec.t, rec.x, rec.dl, rec.wall);
        }
    }
}

fn check_grid(domain: &DomainSpec, dt: f64, eps_grid: &[f64]) -> Result<()> {
    let floor = resolution_floor(dt);
    for &eps in eps_grid {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SbmError::InvalidInput(format!("depth level {eps} must be positive")));
        }
        // small slack so that e.g. 0.05 passes for dt = 1e-4
        if eps < floor * (1.0 - 1e-9) {
            return Err(SbmError::InvalidInput(format!(
                "depth level {eps} is below the resolution floor 5*sqrt(dt) = {floor}"
            )));
        }
        if let Some(r) = domain.inradius() {
            if eps >= r {
                return Err(SbmError::InvalidInput(format!(
                    "depth level {eps} is not below the inradius {r}"
                )));
            }
        }
    }
    Ok(())
}

/// Split a recorded path into excursions. The first sample is the reference
/// state; contact at sample `k > 0` is read off the increase of `L`.
pub fn decompose(traj: &Trajectory, d: &DomainSpec) -> Result<Decomposition> {
    if traj.record_stride != 1 {
        return Err(SbmError::InvalidInput(format!(
            "excursions need every step, got record stride {}",
            traj.record_stride
        )));
    }
    let mut tr = ExcursionTracker {
        domain: d,
        start_time: f64::NEG_INFINITY,
        dt: traj.dt,
        keep_records: true,
        eps_grid: Vec::new(),
        counts: std::array::from_fn(|_| Vec::new()),
        open: None,
        depth: 0.0,
        steps: 0,
        first_contact: None,
        last_step: 0,
        out: Decomposition {
            dt: traj.dt,
            ..Decomposition::default()
        },
    };
    let wall_of = |k: usize| -> Option<Wall> {
        let top = traj.local_time_top.as_ref()?;
        let bottom = traj.local_time_bottom.as_ref()?;
        if top[k] > top[k - 1] {
            Some(Wall::Top)
        } else if bottom[k] > bottom[k - 1] {
            Some(Wall::Bottom)
        } else {
            d.wall(&traj.positions[k])
        }
    };
    for k in 1..traj.len() {
        let dl = traj.local_time[k] - traj.local_time[k - 1];
        let wall = if dl > 0.0 { wall_of(k) } else { None };
        tr.push_step(k as u64, traj.times[k], &traj.positions[k], dl, wall);
    }
    Ok(tr.finish())
}

/// Number of records starting before `before` whose depth exceeds `eps`.
pub fn count_a_eps(records: &[ExcursionRecord], eps: f64, before: f64) -> usize {
    records
        .iter()
        .filter(|r| r.start_time < before && r.max_depth > eps)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub eps: f64,
    pub count: u64,
    pub local_time: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Least-squares slope of `ln rate` against `ln eps`.
    pub fn log_log_slope(&self) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.rate > 0.0)
            .map(|r| (r.eps.ln(), r.rate.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(SbmError::InsufficientData(
                "need two levels with positive rate for a slope".into(),
            ));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Ok(sxy / sxx)
    }

    /// CSV `eps,count,local_time,rate`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "eps,count,local_time,rate")?;
        let mut line = String::new();
        for r in &self.rows {
            line.clear();
            push_num(&mut line, r.eps);
            line.push_str(&format!(",{},", r.count));
            push_num(&mut line, r.local_time);
            line.push(',');
            push_num(&mut line, r.rate);
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn rate_rows(eps_grid: &[f64], counts: &[u64], local_time: f64) -> Result<RateTable> {
    if !(local_time > 0.0) {
        return Err(SbmError::InsufficientData(
            "no boundary local time was accumulated".into(),
        ));
    }
    Ok(RateTable {
        rows: eps_grid
            .iter()
            .zip(counts)
            .map(|(&eps, &count)| RateRow {
                eps,
                count,
                local_time,
                rate: count as f64 / local_time,
            })
            .collect(),
    })
}

/// Excursion rate per unit local time for each depth level. With `wall` set
/// (wristband only), only excursions leaving that wall are counted and the
/// wall's own local time is used.
pub fn exit_rate_estimate(
    traj: &Trajectory,
    d: &DomainSpec,
    eps_grid: &[f64],
    wall: Option<Wall>,
) -> Result<RateTable> {
    check_grid(d, traj.dt, eps_grid)?;
    let dec = decompose(traj, d)?;
    let (lt, records): (f64, Vec<&ExcursionRecord>) = match wall {
        None => (dec.local_time, dec.records.iter().collect()),
        Some(w) => {
            if !d.is_wristband() {
                return Err(SbmError::Unsupported("per-wall rates need the wristband".into()));
            }
            let lt = match w {
                Wall::Top => dec.local_time_top,
                Wall::Bottom => dec.local_time_bottom,
            };
            (lt, dec.records.iter().filter(|r| r.start_wall == Some(w)).collect())
        }
    };
    let counts: Vec<u64> = eps_grid
        .iter()
        .map(|&eps| records.iter().filter(|r| r.max_depth > eps).count() as u64)
        .collect();
    rate_rows(eps_grid, &counts, lt)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixture path on the standard wristband: `ys[k]` is the height at
    /// step `k`, with contact wherever `|y| = 1`.
    fn fixture(ys: &[f64]) -> Trajectory {
        let mut tr = Trajectory::empty(0.01, 1, true);
        let (mut l, mut lt, mut lb) = (0.0, 0.0, 0.0);
        for (k, &y) in ys.iter().enumerate() {
            if k > 0 && y.abs() == 1.0 {
                l += 0.001;
                if y > 0.0 {
                    lt += 0.001
                } else {
                    lb += 0.001
                }
            }
            tr.times.push(k as f64 * 0.01);
            tr.positions.push(vec![0.1 * k as f64, y]);
            tr.spins.push(vec![0.0]);
            tr.local_time.push(l);
            tr.local_time_top.as_mut().unwrap().push(lt);
            tr.local_time_bottom.as_mut().unwrap().push(lb);
        }
        tr
    }

    fn wb() -> DomainSpec {
        DomainSpec::standard_wristband()
    }

    #[test]
    fn all_contact_gives_no_records() {
        let dec = decompose(&fixture(&[1.0; 20]), &wb()).unwrap();
        assert!(dec.records.is_empty());
        assert_eq!(dec.contact_steps, 19);
    }

    #[test]
    fn no_contact_gives_no_records() {
        let dec = decompose(&fixture(&[0.2; 20]), &wb()).unwrap();
        assert!(dec.records.is_empty());
        assert_eq!(dec.partial_steps, 19);
    }

    #[test]
    fn single_excursion_fixture() {
        let mut ys = vec![0.0, 1.0];
        ys.extend([0.9, 0.8, 0.7, 0.6, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95]);
        ys.push(1.0);
        let dec = decompose(&fixture(&ys), &wb()).unwrap();
        assert_eq!(dec.records.len(), 1);
        let r = &dec.records[0];
        assert!((r.max_depth - 0.5).abs() < 1e-15);
        assert!((r.lifetime() - 0.10).abs() < 1e-12);
        assert_eq!(r.start_point, vec![0.1, 1.0]);
        assert_eq!(r.end_point[1], 1.0);
        assert_eq!(r.start_wall, Some(Wall::Top));
        assert!((dec.span() - 0.12).abs() < 1e-12);
    }

    #[test]
    fn count_fixture() {
        let mk = |depth: f64, t: f64| ExcursionRecord {
            start_time: t,
            end_time: t + 1.0,
            start_point: vec![0.0, 1.0],
            end_point: vec![0.0, 1.0],
            max_depth: depth,
            start_wall: Some(Wall::Top),
            end_wall: Some(Wall::Top),
        };
        let recs = vec![mk(0.1, 0.0), mk(0.4, 1.0), mk(0.6, 2.0)];
        assert_eq!(count_a_eps(&recs, 0.3, f64::INFINITY), 2);
        assert_eq!(count_a_eps(&recs, 0.7, f64::INFINITY), 0);
        assert_eq!(count_a_eps(&recs, 0.3, 1.5), 1);
        let mut rev = recs.clone();
        rev.reverse();
        assert_eq!(count_a_eps(&rev, 0.3, f64::INFINITY), 2);
    }

    #[test]
    fn stride_and_grid_are_checked() {
        let mut tr = fixture(&[1.0, 0.5, 1.0]);
        assert!(exit_rate_estimate(&tr, &wb(), &[0.5], None).is_ok());
        // 5 sqrt(0.01) = 0.5
        assert!(exit_rate_estimate(&tr, &wb(), &[0.4], None).is_err());
        assert!(exit_rate_estimate(&tr, &wb(), &[1.0], None).is_err());
        tr.record_stride = 2;
        assert!(decompose(&tr, &wb()).is_err());
    }

    #[test]
    fn zero_local_time_is_insufficient() {
        let e = exit_rate_estimate(&fixture(&[0.2; 5]), &wb(), &[0.5], None).unwrap_err();
        assert!(matches!(e, SbmError::InsufficientData(_)));
    }

    #[test]
    fn single_level_rate_is_count_over_local_time() {
        let ys = [1.0, 1.0, 0.3, 0.2, 1.0, 0.6, -1.0, -0.2, -1.0];
        let tr = fixture(&ys);
        let dec = decompose(&tr, &wb()).unwrap();
        let t = exit_rate_estimate(&tr, &wb(), &[0.5], None).unwrap();
        let n = count_a_eps(&dec.records, 0.5, f64::INFINITY);
        assert_eq!(n, 2);
        assert_eq!(t.rows[0].rate, n as f64 / dec.local_time);
        let top = exit_rate_estimate(&tr, &wb(), &[0.5], Some(Wall::Top)).unwrap();
        assert_eq!(top.rows[0].count, 1);
        let bottom = exit_rate_estimate(&tr, &wb(), &[0.5], Some(Wall::Bottom)).unwrap();
        assert_eq!(bottom.rows[0].count, 1);
        assert!((bottom.rows[0].local_time - 0.002).abs() < 1e-15);
    }

    #[test]
    fn streaming_counts_match_decomposition() {
        use crate::presets::Preset;
        let p = Preset::symmetric_wristband();
        let (d, f) = (p.domain(), p.fields().unwrap());
        let cfg = SimConfig::new(1e-4, 20.0, 4, vec![0.0, 0.0], vec![0.0]);
        let tr = crate::simulate(&cfg, &d, &f).unwrap();
        let grid = [0.05, 0.1, 0.2, 0.4];
        let c = excursion_counts(&cfg, 1, &d, &f, &grid).unwrap();
        for wall in [None, Some(Wall::Top), Some(Wall::Bottom)] {
            let a = exit_rate_estimate(&tr, &d, &grid, wall).unwrap();
            let b = c.rate_table(wall).unwrap();
            for (ra, rb) in a.rows.iter().zip(&b.rows) {
                // the decomposition starts at the first recorded sample, the
                // tracker one step earlier
                assert!(ra.count.abs_diff(rb.count) <= 1);
                assert!((ra.local_time - rb.local_time).abs() < 1e-3);
            }
        }
        let dec = decompose(&tr, &d).unwrap();
        assert!((dec.span() - (tr.times[tr.len() - 1] - tr.times[0])).abs() < 1e-9);
        assert!(dec.records.len() > 10);
        for r in &dec.records {
            assert!(r.lifetime() > 0.0);
            assert!(r.max_depth <= 1.0);
            assert!((r.start_point[1].abs() - 1.0).abs() < 1e-12);
            assert!((r.end_point[1].abs() - 1.0).abs() < 1e-12);
        }
        let t = c.rate_table(None).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].count <= w[0].count);
        }
    }

    #[test]
    fn csv_header() {
        let t = RateTable {
            rows: vec![RateRow {
                eps: 0.1,
                count: 3,
                local_time: 2.0,
                rate: 1.5,
            }],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("eps,count,local_time,rate\n1.0000000000000001e-1,3,"));
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows = [0.05, 0.1, 0.2, 0.4]
            .iter()
            .map(|&e| RateRow {
                eps: e,
                count: 0,
                local_time: 1.0,
                rate: 3.0 / e,
            })
            .collect();
        let s = RateTable { rows }.log_log_slope().unwrap();
        assert!((s + 1.0).abs() < 1e-12);
    }
}
