//! Ready-made wristband models.
//!
//! * `wristband-1d-spin`: scalar spin with `g = alpha` on the top wall and
//!   `g = -beta` on the bottom wall, unit damping, and tangential push
//!   `lambda` on the top wall only. Its stationary law in `(y, s)` is known in
//!   closed form (see [`crate::stationary::WristbandDensity`]).
//! * `point-concentration`: planar spin with `g = (1/2)(1, 0)` on top and
//!   `g = (1/2)(cos x, sin x)` on the bottom, `tau = 1 - |s|^2`.
//! * `axes-concentration`: `g = (0, sin x)` on top and `g = (cos x, 0)` on the
//!   bottom, `tau = 1 - |s|^2`.

use std::fmt;
use std::str::FromStr;

use crate::domain::DomainSpec;
use crate::error::{Result, SbmError};
use crate::fields::{FieldSet, Sided, TangentialField, VectorField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    WristbandSpin { alpha: f64, beta: f64, lambda: f64 },
    PointConcentration,
    AxesConcentration,
}

impl Preset {
    pub const NAMES: [&'static str; 3] = ["wristband-1d-spin", "point-concentration", "axes-concentration"];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::WristbandSpin { .. } => Self::NAMES[0],
            Preset::PointConcentration => Self::NAMES[1],
            Preset::AxesConcentration => Self::NAMES[2],
        }
    }

    pub fn symmetric_wristband() -> Self {
        Preset::WristbandSpin {
            alpha: 1.0,
            beta: 1.0,
            lambda: 0.0,
        }
    }

    pub fn domain(&self) -> DomainSpec {
        DomainSpec::standard_wristband()
    }

    pub fn spin_dim(&self) -> usize {
        match self {
            Preset::WristbandSpin { .. } => 1,
            _ => 2,
        }
    }

    pub fn fields(&self) -> Result<FieldSet> {
        let d = self.domain();
        let quadratic = Sided::All(TangentialField::SpinQuadratic { scale: 1.0 });
        match *self {
            Preset::WristbandSpin { alpha, beta, lambda } => {
                if !(alpha > 0.0 && beta > 0.0) {
                    return Err(SbmError::InvalidInput(format!(
                        "wristband preset needs alpha, beta > 0, got {alpha}, {beta}"
                    )));
                }
                FieldSet::builder(Sided::Walls {
                    top: VectorField::Constant(vec![alpha]),
                    bottom: VectorField::Constant(vec![-beta]),
                })
                .tau(Sided::Walls {
                    top: TangentialField::Constant(lambda),
                    bottom: TangentialField::Zero,
                })
                .bounds(alpha.max(beta), 1.0)
                .build(&d)
            }
            Preset::PointConcentration => FieldSet::builder(Sided::Walls {
                top: VectorField::Constant(vec![0.5, 0.0]),
                bottom: VectorField::Fourier {
                    offset: vec![0.0, 0.0],
                    cos: vec![0.5, 0.0],
                    sin: vec![0.0, 0.5],
                },
            })
            .tau(quadratic)
            .bounds(0.5, 1.0)
            .build(&d),
            Preset::AxesConcentration => FieldSet::builder(Sided::Walls {
                top: VectorField::Fourier {
                    offset: vec![0.0, 0.0],
                    cos: vec![0.0, 0.0],
                    sin: vec![0.0, 1.0],
                },
                bottom: VectorField::Fourier {
                    offset: vec![0.0, 0.0],
                    cos: vec![1.0, 0.0],
                    sin: vec![0.0, 0.0],
                },
            })
            .tau(quadratic)
            .bounds(1.0, 1.0)
            .build(&d),
        }
    }

    /// `p + 1` boundary points whose `g` values positively span spin space.
    /// The axes preset has none: all of its `g` values lie on the coordinate
    /// axes, and three such vectors always leave an open quadrant uncovered.
    pub fn anchor_points(&self) -> Option<Vec<Vec<f64>>> {
        use std::f64::consts::PI;
        match self {
            Preset::WristbandSpin { .. } => Some(vec![vec![0.0, 1.0], vec![0.0, -1.0]]),
            Preset::PointConcentration => Some(vec![
                vec![0.0, 1.0],
                vec![2.0 * PI / 3.0, -1.0],
                vec![4.0 * PI / 3.0, -1.0],
            ]),
            Preset::AxesConcentration => None,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = SbmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wristband-1d-spin" => Ok(Self::symmetric_wristband()),
            "point-concentration" => Ok(Preset::PointConcentration),
            "axes-concentration" => Ok(Preset::AxesConcentration),
            other => Err(SbmError::InvalidInput(format!(
                "unknown preset `{other}`, expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }
}
