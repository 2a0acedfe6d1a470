use std::io::Write;

use crate::error::{Result, SbmError};
use crate::integrator::{push_num, Observer, SimConfig, StepRecord, Trajectory};

/// Coordinate of the state a histogram axis reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Position(usize),
    Spin(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub coord: Coord,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Axis {
    pub fn new(name: impl Into<String>, coord: Coord, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) || bins == 0 {
            return Err(SbmError::InvalidInput(format!(
                "axis needs lo < hi and at least one bin, got [{lo}, {hi}] with {bins}"
            )));
        }
        Ok(Axis {
            name: name.into(),
            coord,
            lo,
            hi,
            bins,
        })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.bins {
            self.hi
        } else {
            self.lo + i as f64 * self.width()
        }
    }

    pub fn mid(&self, i: usize) -> f64 {
        0.5 * (self.edge(i) + self.edge(i + 1))
    }

    /// Bin of `v`; the upper edge belongs to the last bin.
    #[inline]
    pub fn bin(&self, v: f64) -> Option<usize> {
        if !(v >= self.lo && v <= self.hi) {
            return None;
        }
        let k = ((v - self.lo) / (self.hi - self.lo) * self.bins as f64) as usize;
        Some(k.min(self.bins - 1))
    }

    #[inline]
    fn read(&self, x: &[f64], s: &[f64]) -> f64 {
        match self.coord {
            Coord::Position(i) => x[i],
            Coord::Spin(i) => s[i],
        }
    }
}

/// Time-weighted occupation counts on a dense grid (row-major, first axis
/// outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyHistogram {
    pub axes: Vec<Axis>,
    pub weights: Vec<f64>,
    pub overflow_weight: f64,
    pub overflow_count: u64,
}

impl OccupancyHistogram {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(SbmError::InvalidInput("histogram needs an axis".into()));
        }
        let cells = axes.iter().map(|a| a.bins).product();
        Ok(OccupancyHistogram {
            axes,
            weights: vec![0.0; cells],
            overflow_weight: 0.0,
            overflow_count: 0,
        })
    }

    pub fn cells(&self) -> usize {
        self.weights.len()
    }

    /// Flat index of the cell holding `(x, s)`.
    #[inline]
    pub fn cell_of(&self, x: &[f64], s: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for a in &self.axes {
            idx = idx * a.bins + a.bin(a.read(x, s))?;
        }
        Some(idx)
    }

    /// Per-axis bin indices of a flat index.
    pub fn unflatten(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = idx % a.bins;
            idx /= a.bins;
        }
        out
    }

    #[inline]
    pub fn add(&mut self, x: &[f64], s: &[f64], w: f64) {
        match self.cell_of(x, s) {
            Some(i) => self.weights[i] += w,
            None => {
                self.overflow_weight += w;
                self.overflow_count += 1;
            }
        }
    }

    /// Add every sample at `t >= burn_in` with weight `dt * record_stride`.
    pub fn accumulate(&mut self, traj: &Trajectory, burn_in: f64) {
        let w = traj.dt * traj.record_stride as f64;
        for k in 0..traj.len() {
            if traj.times[k] >= burn_in {
                self.add(&traj.positions[k], &traj.spins[k], w);
            }
        }
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.axes == other.axes
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        if !self.same_axes(other) {
            return Err(SbmError::InvalidInput("histogram axes differ".into()));
        }
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        self.overflow_weight += other.overflow_weight;
        self.overflow_count += other.overflow_count;
        Ok(())
    }

    /// Weight inside the grid.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Cell probabilities (overflow excluded).
    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let total = self.total_weight();
        if !(total > 0.0) {
            return Err(SbmError::InsufficientData("histogram is empty".into()));
        }
        Ok(self.weights.iter().map(|w| w / total).collect())
    }

    /// Share of all weight that fell outside the grid.
    pub fn overflow_fraction(&self) -> f64 {
        let all = self.total_weight() + self.overflow_weight;
        if all > 0.0 {
            self.overflow_weight / all
        } else {
            0.0
        }
    }

    /// CSV `axis1_mid,...,weight,prob`, one row per cell.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut header: Vec<String> = (1..=self.axes.len()).map(|k| format!("axis{k}_mid")).collect();
        header.push("weight".into());
        header.push("prob".into());
        writeln!(w, "{}", header.join(","))?;
        let total = self.total_weight();
        let mut line = String::new();
        for (i, &wt) in self.weights.iter().enumerate() {
            line.clear();
            for (k, b) in self.unflatten(i).into_iter().enumerate() {
                push_num(&mut line, self.axes[k].mid(b));
                line.push(',');
            }
            push_num(&mut line, wt);
            line.push(',');
            push_num(&mut line, if total > 0.0 { wt / total } else { 0.0 });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// l1 distance between the normalized cell probabilities of two histograms,
/// skipping the cells listed in `exclude`.
pub fn histogram_l1(h1: &OccupancyHistogram, h2: &OccupancyHistogram, exclude: &[usize]) -> Result<f64> {
    if !h1.same_axes(h2) {
        return Err(SbmError::InvalidInput("histogram axes differ".into()));
    }
    let (p, q) = (h1.probabilities()?, h2.probabilities()?);
    Ok((0..p.len())
        .filter(|i| !exclude.contains(i))
        .map(|i| (p[i] - q[i]).abs())
        .sum())
}

/// Streaming accumulation inside a chain, using the config's stride and
/// burn-in.
pub struct Accumulator<'c> {
    cfg: &'c SimConfig,
    weight: f64,
    pub histogram: OccupancyHistogram,
}

impl<'c> Accumulator<'c> {
    pub fn new(cfg: &'c SimConfig, histogram: OccupancyHistogram) -> Self {
        Accumulator {
            cfg,
            weight: cfg.dt * cfg.record_stride as f64,
            histogram,
        }
    }
}

impl Observer for Accumulator<'_> {
    #[inline]
    fn observe(&mut self, rec: &StepRecord<'_>) {
        if self.cfg.records(rec.step) {
            self.histogram.add(rec.x, rec.s, self.weight);
        }
    }
}
