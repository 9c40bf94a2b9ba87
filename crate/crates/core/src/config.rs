//! JSON schemas for iterated function systems and kernels.
//!
//! ```json
//! {"space": {"group": "euclidean", "d": 2},
//!  "maps": [{"q": [0, 0], "r": 0.333}, {"q": [0.667, 0], "r": 0.333}],
//!  "dimension": "auto"}
//! {"kernel": "heisenberg_riesz", "c_Q": -2.0, "orientation": "reflected"}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupSpace, Point};
use crate::ifs::{Ifs, SelfSimilarMeasure, Similarity};
use crate::kernel::{default_c_q, KernelSpec, Orientation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DimensionSpec {
    Value(f64),
    Keyword(String),
}

impl Default for DimensionSpec {
    fn default() -> Self {
        DimensionSpec::Keyword("auto".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsConfig {
    pub space: GroupSpace,
    pub maps: Vec<Similarity>,
    /// `"auto"` for the similarity dimension or an explicit exponent `s`
    /// of the weights `r_i^s`.
    #[serde(default)]
    pub dimension: DimensionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_point: Option<Point>,
    /// Total mass of the measure, 1 by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_mass: Option<f64>,
}

impl IfsConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<(Ifs, SelfSimilarMeasure)> {
        self.space.validate()?;
        let maps = self
            .maps
            .iter()
            .map(|m| Similarity::new(&self.space, m.translation.clone(), m.ratio))
            .collect::<Result<Vec<_>>>()?;
        let ifs = match &self.base_point {
            Some(b) => Ifs::with_base_point(self.space, maps, b.clone())?,
            None => Ifs::new(self.space, maps)?,
        };
        let measure = match &self.dimension {
            DimensionSpec::Keyword(k) if k == "auto" => SelfSimilarMeasure::natural(&ifs),
            DimensionSpec::Keyword(k) => {
                return Err(Error::Config(format!("dimension must be \"auto\" or a number, got {k:?}")))
            }
            DimensionSpec::Value(s) if *s > 0.0 && s.is_finite() => SelfSimilarMeasure::with_exponent(&ifs, *s),
            DimensionSpec::Value(s) => {
                return Err(Error::Config(format!("dimension must be positive, got {s}")))
            }
        };
        match self.total_mass {
            Some(m) if m > 0.0 && m.is_finite() => Ok((ifs, measure.scaled(m))),
            Some(m) => Err(Error::Config(format!("total_mass must be positive, got {m}"))),
            None => Ok((ifs, measure)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    HeisenbergRiesz {
        #[serde(rename = "c_Q", default, skip_serializing_if = "Option::is_none")]
        c_q: Option<f64>,
        #[serde(default)]
        orientation: Orientation,
    },
    CoordinateRiesz {
        s: f64,
        axis: usize,
        #[serde(default)]
        orientation: Orientation,
    },
    ComplexPower {
        m: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<f64>,
        #[serde(default)]
        orientation: Orientation,
    },
    Constant {
        value: f64,
        s: f64,
        #[serde(default)]
        orientation: Orientation,
    },
}

impl KernelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Kernel on `space`; `c_Q` defaults to `2 - Q` and the complex power
    /// homogeneity to 1.
    pub fn to_spec(&self, space: GroupSpace) -> Result<KernelSpec> {
        let (spec, orientation) = match *self {
            KernelConfig::HeisenbergRiesz { c_q, orientation } => (
                KernelSpec::heisenberg_riesz(space, c_q.unwrap_or_else(|| default_c_q(&space)))?,
                orientation,
            ),
            KernelConfig::CoordinateRiesz { s, axis, orientation } => {
                (KernelSpec::coordinate_riesz(space, axis, s)?, orientation)
            }
            KernelConfig::ComplexPower { m, s, orientation } => {
                (KernelSpec::complex_power(space, m, s.unwrap_or(1.0))?, orientation)
            }
            KernelConfig::Constant { value, s, orientation } => {
                (KernelSpec::constant(space, value, s)?, orientation)
            }
        };
        Ok(match orientation {
            Orientation::Forward => spec,
            Orientation::Reflected => spec.reflected(),
        })
    }
}

/// Three maps of ratio `ratio` towards the vertices of the unit equilateral
/// triangle; `ratio = 1/2` is the Sierpinski gasket, smaller ratios give
/// totally disconnected gaskets.
pub fn gasket(ratio: f64) -> IfsConfig {
    let h = 3f64.sqrt() / 2.0;
    let vertices = [[0.0, 0.0], [1.0, 0.0], [0.5, h]];
    IfsConfig {
        space: GroupSpace::Euclidean { d: 2 },
        maps: vertices
            .iter()
            .map(|v| Similarity {
                translation: Point::new(vec![(1.0 - ratio) * v[0], (1.0 - ratio) * v[1]]),
                ratio,
            })
            .collect(),
        dimension: DimensionSpec::default(),
        base_point: None,
        total_mass: None,
    }
}

/// Two maps of ratio `ratio` on the line at `0` and `1 - ratio`.
pub fn cantor_line(ratio: f64) -> IfsConfig {
    IfsConfig {
        space: GroupSpace::Euclidean { d: 1 },
        maps: vec![
            Similarity {
                translation: Point::new(vec![0.0]),
                ratio,
            },
            Similarity {
                translation: Point::new(vec![1.0 - ratio]),
                ratio,
            },
        ],
        dimension: DimensionSpec::default(),
        base_point: None,
        total_mass: None,
    }
}
