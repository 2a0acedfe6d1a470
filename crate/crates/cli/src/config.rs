//! Run configuration: a TOML file with `[domain]`, `[fields]`, `[sim]`,
//! `[analysis]` and `[verify]` tables. Unknown keys are rejected. The grammar
//! is documented in the README.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use spinbm::domain::Disk;
use spinbm::fields::{Diffusion, ScalarField, Sided, TangentialField, VectorField};
use spinbm::integrator::ReflectionScheme;
use spinbm::presets::Preset;
use spinbm::stationary::{Axis, Coord};
use spinbm::{DomainSpec, FieldSet, SimConfig};

/// Problems with the configuration itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSection>,
    pub fields: FieldsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKindName {
    Wristband,
    Disk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKindName,
    #[serde(default = "default_period")]
    pub period: f64,
    #[serde(default = "one")]
    pub half_width: f64,
    #[serde(default = "origin")]
    pub center: [f64; 2],
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn default_period() -> f64 {
    TAU
}
fn one() -> f64 {
    1.0
}
fn origin() -> [f64; 2] {
    [0.0, 0.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VectorSpec {
    Constant { value: Vec<f64> },
    Fourier { offset: Vec<f64>, cos: Vec<f64>, sin: Vec<f64> },
}

impl VectorSpec {
    fn build(&self) -> VectorField {
        match self {
            VectorSpec::Constant { value } => VectorField::Constant(value.clone()),
            VectorSpec::Fourier { offset, cos, sin } => VectorField::Fourier {
                offset: offset.clone(),
                cos: cos.clone(),
                sin: sin.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TauSpec {
    Zero,
    Constant { strength: f64 },
    SpinQuadratic { scale: f64 },
}

impl TauSpec {
    fn build(&self) -> TangentialField {
        match *self {
            TauSpec::Zero => TangentialField::Zero,
            TauSpec::Constant { strength } => TangentialField::Constant(strength),
            TauSpec::SpinQuadratic { scale } => TangentialField::SpinQuadratic { scale },
        }
    }
}

/// Either a named preset (with `alpha`, `beta`, `lambda` for the wristband
/// preset) or explicit fields. `damping` is the spin damping; `alpha` and
/// `beta` only ever mean the wristband preset's wall values of `g`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_top: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_bottom: Option<VectorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_top: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_bottom: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<TauSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_top: Option<TauSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_bottom: Option<TauSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    #[default]
    HalfStep,
    Naive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_usize")]
    pub chains: usize,
    #[serde(default)]
    pub burn_in: f64,
    #[serde(default = "one_usize")]
    pub record_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_s: Option<Vec<f64>>,
    #[serde(default)]
    pub scheme: SchemeName,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    /// `x1`, `x2`, ... for position coordinates, `s1`, `s2`, ... for spin,
    /// numbered as in the trajectory CSV.
    pub coord: String,
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl AxisSpec {
    fn build(&self, n: usize, p: usize) -> Result<Axis, ConfigError> {
        let (kind, idx) = self.coord.split_at(1.min(self.coord.len()));
        let idx: usize = idx
            .parse()
            .map_err(|_| ConfigError(format!("axis `{}`: bad coord `{}`", self.name, self.coord)))?;
        let coord = match kind {
            "x" if (1..=n).contains(&idx) => Coord::Position(idx - 1),
            "s" if (1..=p).contains(&idx) => Coord::Spin(idx - 1),
            _ => return err(format!("axis `{}`: coord `{}` out of range", self.name, self.coord)),
        };
        Axis::new(self.name.clone(), coord, self.lo, self.hi, self.bins)
            .map_err(|e| ConfigError(format!("axis `{}`: {e}", self.name)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxesBandSpec {
    pub width: f64,
    #[serde(default)]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Histogram axes; empty means a default pair chosen from the model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axis: Vec<AxisSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_density: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_l1_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hull_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hull_min_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<BallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes_band: Option<AxesBandSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_density_params")]
    pub density_params: Vec<[f64; 2]>,
    #[serde(default = "default_grid_points")]
    pub density_grid_points: usize,
    /// Multiplier on `b(s)`; anything but 1 is an injected fault.
    #[serde(default = "one")]
    pub density_b_scale: f64,
    #[serde(default = "default_jacobian_dims")]
    pub jacobian_dims: Vec<usize>,
    #[serde(default = "default_jacobian_points")]
    pub jacobian_points: usize,
    #[serde(default = "default_round_trips")]
    pub round_trip_instances: usize,
    /// Boundary points for the positive-spanning check; defaults to the
    /// preset's anchor set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<Vec<Vec<f64>>>,
    /// Also run the excursion-scaling check on the `[sim]` settings.
    #[serde(default)]
    pub excursions: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            density_params: default_density_params(),
            density_grid_points: default_grid_points(),
            density_b_scale: 1.0,
            jacobian_dims: default_jacobian_dims(),
            jacobian_points: default_jacobian_points(),
            round_trip_instances: default_round_trips(),
            anchors: None,
            excursions: false,
            seed: 0,
        }
    }
}

fn default_density_params() -> Vec<[f64; 2]> {
    vec![[1.0, 1.0], [2.0, 1.0], [0.5, 1.5]]
}
fn default_grid_points() -> usize {
    1000
}
fn default_jacobian_dims() -> Vec<usize> {
    vec![2, 3]
}
fn default_jacobian_points() -> usize {
    50
}
fn default_round_trips() -> usize {
    100
}

/// Everything a command needs, validated.
pub struct Model {
    pub preset: Option<Preset>,
    pub domain: DomainSpec,
    pub fields: FieldSet,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config error: {e}")))
    }

    /// The config with every default filled in, as TOML.
    pub fn echo(&self, model: &Model) -> String {
        let mut c = self.clone();
        if c.domain.is_none() {
            c.domain = Some(DomainSection {
                kind: DomainKindName::Wristband,
                period: TAU,
                half_width: 1.0,
                center: origin(),
                radius: 1.0,
                tolerance: None,
            });
        }
        if let Some(d) = c.domain.as_mut() {
            d.tolerance = Some(model.domain.boundary_tolerance());
        }
        if let Some(Preset::WristbandSpin { alpha, beta, lambda }) = model.preset {
            c.fields.alpha = Some(alpha);
            c.fields.beta = Some(beta);
            c.fields.lambda = Some(lambda);
        }
        if let Some(s) = c.sim.as_mut() {
            s.initial_x.get_or_insert_with(|| default_initial_x(self.domain.as_ref()));
            s.initial_s.get_or_insert_with(|| vec![0.0; model.fields.spin_dim()]);
        }
        toml::to_string(&c).unwrap_or_default()
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let f = &self.fields;
        let preset = match &f.preset {
            Some(name) => {
                let explicit = f.g.is_some()
                    || f.g_top.is_some()
                    || f.g_bottom.is_some()
                    || f.damping.is_some()
                    || f.damping_top.is_some()
                    || f.damping_bottom.is_some()
                    || f.tau.is_some()
                    || f.tau_top.is_some()
                    || f.tau_bottom.is_some()
                    || f.sigma.is_some();
                if explicit {
                    return err("[fields]: `preset` cannot be combined with explicit g, damping, tau or sigma");
                }
                let p: Preset = name.parse().map_err(|_| {
                    ConfigError(format!(
                        "[fields]: unknown preset `{name}` (expected one of {})",
                        Preset::NAMES.join(", ")
                    ))
                })?;
                Some(match p {
                    Preset::WristbandSpin { .. } => Preset::WristbandSpin {
                        alpha: f.alpha.unwrap_or(1.0),
                        beta: f.beta.unwrap_or(1.0),
                        lambda: f.lambda.unwrap_or(0.0),
                    },
                    other => {
                        if f.alpha.is_some() || f.beta.is_some() || f.lambda.is_some() {
                            return err(format!("[fields]: alpha, beta, lambda only apply to the wristband-1d-spin preset, not `{name}`"));
                        }
                        other
                    }
                })
            }
            None => {
                if f.alpha.is_some() || f.beta.is_some() || f.lambda.is_some() {
                    return err("[fields]: alpha, beta, lambda need `preset = \"wristband-1d-spin\"` (use `damping` for the spin damping)");
                }
                None
            }
        };

        let domain = match (&self.domain, preset) {
            (None, Some(p)) => p.domain(),
            (None, None) => return err("missing section [domain] (required without a preset)"),
            (Some(d), _) => build_domain(d)?,
        };
        if let (Some(p), Some(d)) = (preset, &self.domain) {
            let same = d.kind == DomainKindName::Wristband && d.period == TAU && d.half_width == 1.0;
            if !same {
                return err(format!(
                    "[domain]: preset `{}` lives on the standard wristband (period 2*pi, half_width 1)",
                    p.name()
                ));
            }
        }

        let fields = match preset {
            Some(p) => p.fields(),
            None => build_fields(f)?.build(&domain),
        }
        .map_err(|e| ConfigError(format!("[fields]: {e}")))?;
        Ok(Model { preset, domain, fields })
    }

    pub fn sim_config(&self, model: &Model) -> Result<(SimConfig, usize), ConfigError> {
        let Some(s) = &self.sim else {
            return err("missing section [sim]");
        };
        let x0 = s.initial_x.clone().unwrap_or_else(|| default_initial_x(self.domain.as_ref()));
        let s0 = s.initial_s.clone().unwrap_or_else(|| vec![0.0; model.fields.spin_dim()]);
        let cfg = SimConfig::new(s.dt, s.horizon, s.seed, x0, s0)
            .with_burn_in(s.burn_in)
            .with_stride(s.record_stride)
            .with_scheme(match s.scheme {
                SchemeName::HalfStep => ReflectionScheme::HalfStep,
                SchemeName::Naive => ReflectionScheme::Naive,
            });
        cfg.validate(&model.domain, &model.fields)
            .map_err(|e| ConfigError(format!("[sim]: {e}")))?;
        if s.chains == 0 {
            return err("[sim]: chains must be at least 1");
        }
        Ok((cfg, s.chains))
    }

    pub fn axes(&self, model: &Model) -> Result<Vec<Axis>, ConfigError> {
        let n = model.domain.dim();
        let p = model.fields.spin_dim();
        if !self.analysis.axis.is_empty() {
            return self.analysis.axis.iter().map(|a| a.build(n, p)).collect();
        }
        let bound = model.fields.g_sup_norm() / model.fields.alpha_inf();
        let ax = |name: &str, coord, lo, hi, bins| Axis::new(name, coord, lo, hi, bins).map_err(|e| ConfigError(e.to_string()));
        match (model.preset, model.domain.is_wristband(), p) {
            (Some(Preset::WristbandSpin { alpha, beta, .. }), _, _) => Ok(vec![
                ax("y", Coord::Position(1), -1.0, 1.0, 20)?,
                ax("s", Coord::Spin(0), -beta, alpha, 20)?,
            ]),
            (_, true, 1) => {
                let h = half_width(&model.domain);
                Ok(vec![
                    ax("y", Coord::Position(1), -h, h, 20)?,
                    ax("s", Coord::Spin(0), -bound, bound, 20)?,
                ])
            }
            (_, true, _) => Ok(vec![
                ax("s1", Coord::Spin(0), -bound, bound, 40)?,
                ax("s2", Coord::Spin(1), -bound, bound, 40)?,
            ]),
            (_, false, _) => {
                let (c, r) = disk_extent(self.domain.as_ref());
                Ok(vec![
                    ax("x1", Coord::Position(0), c[0] - r, c[0] + r, 20)?,
                    ax("x2", Coord::Position(1), c[1] - r, c[1] + r, 20)?,
                ])
            }
        }
    }
}

fn half_width(d: &DomainSpec) -> f64 {
    match d.kind() {
        spinbm::domain::DomainKind::Wristband { half_width, .. } => *half_width,
        _ => 1.0,
    }
}

fn disk_extent(d: Option<&DomainSection>) -> ([f64; 2], f64) {
    d.map_or(([0.0, 0.0], 1.0), |d| (d.center, d.radius))
}

fn default_initial_x(d: Option<&DomainSection>) -> Vec<f64> {
    match d {
        Some(d) if d.kind == DomainKindName::Disk => d.center.to_vec(),
        _ => vec![0.0, 0.0],
    }
}

fn build_domain(d: &DomainSection) -> Result<DomainSpec, ConfigError> {
    let spec = match d.kind {
        DomainKindName::Wristband => DomainSpec::wristband(d.period, d.half_width),
        DomainKindName::Disk => {
            if !(d.radius > 0.0 && d.radius.is_finite() && d.center.iter().all(|c| c.is_finite())) {
                return err(format!("[domain]: disk needs a finite centre and positive radius, got {}", d.radius));
            }
            Ok(DomainSpec::smooth_phi(Arc::new(Disk {
                center: d.center,
                radius: d.radius,
            })))
        }
    }
    .map_err(|e| ConfigError(format!("[domain]: {e}")))?;
    match d.tolerance {
        Some(t) => spec.with_tolerance(t).map_err(|e| ConfigError(format!("[domain]: {e}"))),
        None => Ok(spec),
    }
}

fn sided<S, T>(
    name: &str,
    all: &Option<S>,
    top: &Option<S>,
    bottom: &Option<S>,
    build: impl Fn(&S) -> T,
) -> Result<Option<Sided<T>>, ConfigError> {
    match (all, top, bottom) {
        (None, None, None) => Ok(None),
        (Some(a), None, None) => Ok(Some(Sided::All(build(a)))),
        (None, Some(t), Some(b)) => Ok(Some(Sided::Walls {
            top: build(t),
            bottom: build(b),
        })),
        (Some(_), _, _) => err(format!("[fields]: give either `{name}` or `{name}_top`/`{name}_bottom`, not both")),
        _ => err(format!("[fields]: `{name}_top` and `{name}_bottom` must be given together")),
    }
}

fn build_fields(f: &FieldsSection) -> Result<spinbm::fields::FieldSetBuilder, ConfigError> {
    let g = sided("g", &f.g, &f.g_top, &f.g_bottom, VectorSpec::build)?
        .ok_or_else(|| ConfigError("[fields]: missing field `g` (or `preset`)".into()))?;
    let mut b = FieldSet::builder(g);
    if let Some(a) = sided("damping", &f.damping, &f.damping_top, &f.damping_bottom, |v: &f64| {
        ScalarField::Constant(*v)
    })? {
        b = b.alpha(a);
    }
    if let Some(t) = sided("tau", &f.tau, &f.tau_top, &f.tau_bottom, TauSpec::build)? {
        b = b.tau(t);
    }
    if let Some(s) = f.sigma {
        b = b.sigma(Diffusion::Scalar(s));
    }
    Ok(b)
}
