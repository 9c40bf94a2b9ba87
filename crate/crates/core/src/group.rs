//! Metric groups with dilations: the Heisenberg group `H^n` in its
//! `(p', p_{2n+1})` model and Euclidean `R^d` as the abelian instance.
//!
//! The slice-level helpers are generic over [`Real`] so the same group law
//! drives both pointwise evaluation and interval enclosures of cylinder
//! boxes.

use std::fmt;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "group", rename_all = "lowercase")]
pub enum GroupSpace {
    Heisenberg { n: usize },
    Euclidean { d: usize },
}

/// A group element stored as its flat coordinate vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest coordinate-wise absolute difference.
    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(v: [f64; N]) -> Self {
        Point(v.to_vec())
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

impl GroupSpace {
    pub fn heisenberg(n: usize) -> Result<Self> {
        let s = GroupSpace::Heisenberg { n };
        s.validate()?;
        Ok(s)
    }

    pub fn euclidean(d: usize) -> Result<Self> {
        let s = GroupSpace::Euclidean { d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GroupSpace::Heisenberg { n: 0 } => Err(Error::InvalidParameter(
                "Heisenberg group requires n >= 1".into(),
            )),
            GroupSpace::Euclidean { d: 0 } => Err(Error::InvalidParameter(
                "Euclidean space requires d >= 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_heisenberg(&self) -> bool {
        matches!(self, GroupSpace::Heisenberg { .. })
    }

    /// Homogeneous dimension `Q`: `2n + 2` for `H^n`, `d` for `R^d`.
    pub fn homogeneous_dim(&self) -> usize {
        match *self {
            GroupSpace::Heisenberg { n } => 2 * n + 2,
            GroupSpace::Euclidean { d } => d,
        }
    }

    pub fn coord_len(&self) -> usize {
        match *self {
            GroupSpace::Heisenberg { n } => 2 * n + 1,
            GroupSpace::Euclidean { d } => d,
        }
    }

    /// Number of coordinates scaled linearly by dilations.
    pub fn horizontal_len(&self) -> usize {
        match *self {
            GroupSpace::Heisenberg { n } => 2 * n,
            GroupSpace::Euclidean { d } => d,
        }
    }

    pub fn identity(&self) -> Point {
        Point(vec![0.0; self.coord_len()])
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if p.len() != self.coord_len() {
            return Err(Error::DimensionMismatch {
                expected: self.coord_len(),
                got: p.len(),
            });
        }
        match p.0.iter().position(|x| !x.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn mul(&self, p: &Point, q: &Point) -> Result<Point> {
        self.check(p)?;
        self.check(q)?;
        Ok(Point(product(self, &p.0, &q.0)))
    }

    pub fn inv(&self, p: &Point) -> Result<Point> {
        self.check(p)?;
        Ok(Point(inverse(&p.0)))
    }

    pub fn dilate(&self, r: f64, p: &Point) -> Result<Point> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidDilation(r));
        }
        self.check(p)?;
        Ok(Point(dilation(self, r, &p.0)))
    }

    pub fn gauge_norm(&self, p: &Point) -> Result<f64> {
        self.check(p)?;
        Ok(gauge(self, &p.0))
    }

    /// Left-invariant distance `d(p, q) = ||p^{-1} q||`.
    pub fn dist(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        Ok(gauge(self, &relative(self, &p.0, &q.0)))
    }

    /// `p^{-1} q`, the position of `q` seen from `p`.
    pub fn relative(&self, p: &Point, q: &Point) -> Result<Point> {
        self.check(p)?;
        self.check(q)?;
        Ok(Point(relative(self, &p.0, &q.0)))
    }
}

/// Group product `p . q`.
pub(crate) fn product<R: Real>(space: &GroupSpace, p: &[R], q: &[R]) -> Vec<R> {
    let mut out: Vec<R> = p.iter().zip(q).map(|(&a, &b)| a + b).collect();
    if let GroupSpace::Heisenberg { n } = *space {
        let mut twist = R::cst(0.0);
        for i in 0..n {
            twist = twist + (p[i] * q[i + n] - p[i + n] * q[i]);
        }
        out[2 * n] = out[2 * n] - twist.scale(2.0);
    }
    out
}

/// Group inverse; in both models it is coordinate negation.
pub(crate) fn inverse<R: Real>(p: &[R]) -> Vec<R> {
    p.iter().map(|&x| -x).collect()
}

/// `p^{-1} q` without materialising `p^{-1}`.
pub(crate) fn relative<R: Real>(space: &GroupSpace, p: &[R], q: &[R]) -> Vec<R> {
    let mut out: Vec<R> = q.iter().zip(p).map(|(&b, &a)| b - a).collect();
    if let GroupSpace::Heisenberg { n } = *space {
        let mut twist = R::cst(0.0);
        for i in 0..n {
            twist = twist + (p[i] * q[i + n] - p[i + n] * q[i]);
        }
        out[2 * n] = out[2 * n] + twist.scale(2.0);
    }
    out
}

pub(crate) fn dilation<R: Real>(space: &GroupSpace, r: f64, p: &[R]) -> Vec<R> {
    let h = space.horizontal_len();
    p.iter()
        .enumerate()
        .map(|(i, &x)| if i < h { x.scale(r) } else { x.scale(r * r) })
        .collect()
}

/// Dilation with a factor of the same scalar type as the point.
pub(crate) fn dilation_by<R: Real>(space: &GroupSpace, r: R, p: &[R]) -> Vec<R> {
    let h = space.horizontal_len();
    let r2 = r.sqr();
    p.iter()
        .enumerate()
        .map(|(i, &x)| if i < h { x * r } else { x * r2 })
        .collect()
}

/// Squared Euclidean norm of the horizontal part.
pub(crate) fn horizontal_sq<R: Real>(space: &GroupSpace, p: &[R]) -> R {
    p[..space.horizontal_len()]
        .iter()
        .fold(R::cst(0.0), |acc, &x| acc + x.sqr())
}

/// Koranyi gauge `(|p'|^4 + p_{2n+1}^2)^{1/4}` or the Euclidean norm.
pub(crate) fn gauge<R: Real>(space: &GroupSpace, p: &[R]) -> R {
    let h2 = horizontal_sq(space, p);
    match *space {
        GroupSpace::Heisenberg { n } => (h2.sqr() + p[2 * n].sqr()).sqrt().sqrt(),
        GroupSpace::Euclidean { .. } => h2.sqrt(),
    }
}
