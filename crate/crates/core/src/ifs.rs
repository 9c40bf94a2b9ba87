//! Iterated function systems of similarities `S_i = tau_{q_i} o delta_{r_i}`,
//! words, cylinders and the natural self-similar measure.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupSpace, Point};
use crate::interval::Interval;

/// Environment variable overriding the default node budget.
pub const NODE_BUDGET_ENV: &str = "FRACTAL_SIO_NODE_BUDGET";
pub const DEFAULT_NODE_BUDGET: u64 = 50_000_000;

/// Node budget from `FRACTAL_SIO_NODE_BUDGET` (accepts `5e7` style values).
pub fn node_budget_from_env() -> u64 {
    std::env::var(NODE_BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| *v >= 1.0 && v.is_finite())
        .map(|v| v as u64)
        .unwrap_or(DEFAULT_NODE_BUDGET)
}

/// The map `p -> q . delta_r(p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    #[serde(rename = "q")]
    pub translation: Point,
    #[serde(rename = "r")]
    pub ratio: f64,
}

impl Similarity {
    /// A contracting similarity, `0 < r < 1`.
    pub fn new(space: &GroupSpace, translation: Point, ratio: f64) -> Result<Self> {
        space.check(&translation)?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "similarity ratio must lie in (0, 1), got {ratio}"
            )));
        }
        Ok(Similarity { translation, ratio })
    }

    pub fn identity(space: &GroupSpace) -> Self {
        Similarity {
            translation: space.identity(),
            ratio: 1.0,
        }
    }

    pub fn apply(&self, space: &GroupSpace, p: &Point) -> Point {
        Point::new(self.apply_slice(space, p.coords()))
    }

    pub(crate) fn apply_slice(&self, space: &GroupSpace, p: &[f64]) -> Vec<f64> {
        let d = group::dilation(space, self.ratio, p);
        group::product(space, self.translation.coords(), &d)
    }

    /// `self o other`.
    pub fn compose(&self, space: &GroupSpace, other: &Similarity) -> Similarity {
        let moved = group::dilation(space, self.ratio, other.translation.coords());
        Similarity {
            translation: Point::new(group::product(space, self.translation.coords(), &moved)),
            ratio: self.ratio * other.ratio,
        }
    }

    pub fn inverse(&self, space: &GroupSpace) -> Similarity {
        let inv = 1.0 / self.ratio;
        Similarity {
            translation: Point::new(group::dilation(
                space,
                inv,
                &group::inverse(self.translation.coords()),
            )),
            ratio: inv,
        }
    }

    /// The unique fixed point, in closed form. For `H^n` the twist term
    /// vanishes because `x'` is parallel to `q'`.
    pub fn fixed_point(&self, space: &GroupSpace) -> Point {
        let q = self.translation.coords();
        let rho = self.ratio;
        let h = space.horizontal_len();
        Point::new(
            q.iter()
                .enumerate()
                .map(|(i, &a)| if i < h { a / (1.0 - rho) } else { a / (1.0 - rho * rho) })
                .collect(),
        )
    }

    /// Fixed point by Banach iteration from `start`.
    pub fn fixed_point_iterated(&self, space: &GroupSpace, start: &Point, tol: f64) -> Point {
        let mut x = start.coords().to_vec();
        for _ in 0..10_000 {
            let y = self.apply_slice(space, &x);
            let step: f64 = group::gauge(space, &group::relative(space, &x, &y));
            x = y;
            if step <= tol {
                break;
            }
        }
        Point::new(x)
    }
}

/// Rigorous enclosure of a similarity: interval translation and ratio.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct IntervalSimilarity {
    pub translation: Vec<Interval>,
    pub ratio: Interval,
}

impl IntervalSimilarity {
    pub fn identity(space: &GroupSpace) -> Self {
        IntervalSimilarity {
            translation: vec![Interval::point(0.0); space.coord_len()],
            ratio: Interval::point(1.0),
        }
    }

    pub fn from_map(s: &Similarity) -> Self {
        IntervalSimilarity {
            translation: s.translation.coords().iter().map(|&x| Interval::point(x)).collect(),
            ratio: Interval::point(s.ratio),
        }
    }

    pub fn then(&self, space: &GroupSpace, s: &Similarity) -> Self {
        let moved = group::dilation_by(
            space,
            self.ratio,
            &s.translation
                .coords()
                .iter()
                .map(|&x| Interval::point(x))
                .collect::<Vec<_>>(),
        );
        IntervalSimilarity {
            translation: group::product(space, &self.translation, &moved),
            ratio: self.ratio * Interval::point(s.ratio),
        }
    }

    pub fn apply_box(&self, space: &GroupSpace, b: &[Interval]) -> Vec<Interval> {
        let d = group::dilation_by(space, self.ratio, b);
        group::product(space, &self.translation, &d)
    }
}

/// A finite word over the map indices, zero-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn new(indices: Vec<usize>) -> Self {
        Word(indices)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `w|_m`, the prefix of length `m`.
    pub fn prefix(&self, m: usize) -> Word {
        Word(self.0[..m.min(self.0.len())].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn child(&self, i: usize) -> Word {
        let mut v = self.0.clone();
        v.push(i);
        Word(v)
    }

    /// `w^k`.
    pub fn power(&self, k: usize) -> Word {
        Word(self.0.repeat(k))
    }

    /// One-based rendering, e.g. `(1,3)`.
    pub fn one_based_label(&self) -> String {
        let parts: Vec<String> = self.0.iter().map(|i| (i + 1).to_string()).collect();
        format!("({})", parts.join(","))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl From<Vec<usize>> for Word {
    fn from(v: Vec<usize>) -> Self {
        Word(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ifs {
    space: GroupSpace,
    maps: Vec<Similarity>,
    base_point: Point,
    base_radius: f64,
    invariant_box: Vec<Interval>,
}

impl Ifs {
    /// Builds an IFS with the fixed point of map 0 as base point.
    pub fn new(space: GroupSpace, maps: Vec<Similarity>) -> Result<Self> {
        space.validate()?;
        if maps.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "an IFS needs at least 2 maps, got {}",
                maps.len()
            )));
        }
        for m in &maps {
            Similarity::new(&space, m.translation.clone(), m.ratio)?;
        }
        let base = maps[0].fixed_point(&space);
        Self::with_base_point(space, maps, base)
    }

    pub fn with_base_point(space: GroupSpace, maps: Vec<Similarity>, base_point: Point) -> Result<Self> {
        space.check(&base_point)?;
        let base_radius = maps
            .iter()
            .map(|m| {
                let moved = m.apply_slice(&space, base_point.coords());
                let d: f64 = group::gauge(&space, &group::relative(&space, base_point.coords(), &moved));
                d / (1.0 - m.ratio)
            })
            .fold(0.0, f64::max);
        let base_radius = base_radius * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        let mut ifs = Ifs {
            space,
            maps,
            base_point,
            base_radius,
            invariant_box: Vec::new(),
        };
        ifs.invariant_box = ifs.compute_invariant_box();
        Ok(ifs)
    }

    pub fn space(&self) -> &GroupSpace {
        &self.space
    }

    pub fn maps(&self) -> &[Similarity] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn base_point(&self) -> &Point {
        &self.base_point
    }

    /// Radius `rho` of a closed gauge ball about the base point that every
    /// map sends into itself; the invariant set lies inside it.
    pub fn base_radius(&self) -> f64 {
        self.base_radius
    }

    /// Upper bound for the diameter of the invariant set.
    pub fn base_diam(&self) -> f64 {
        2.0 * self.base_radius
    }

    /// Coordinate box containing the invariant set.
    pub fn invariant_box(&self) -> &[Interval] {
        &self.invariant_box
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio).collect()
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        match w.0.iter().find(|&&i| i >= self.maps.len()) {
            Some(i) => Err(Error::InvalidParameter(format!(
                "word index {i} out of range for {} maps",
                self.maps.len()
            ))),
            None => Ok(()),
        }
    }

    /// `S_w = S_{i_1} o ... o S_{i_k}`; the empty word gives the identity.
    pub fn word_compose(&self, w: &Word) -> Result<Similarity> {
        self.check_word(w)?;
        Ok(w.0.iter().fold(Similarity::identity(&self.space), |acc, &i| {
            acc.compose(&self.space, &self.maps[i])
        }))
    }

    pub fn fixed_point(&self, w: &Word) -> Result<Point> {
        if w.is_empty() {
            return Err(Error::InvalidParameter(
                "fixed points need a nonempty word".into(),
            ));
        }
        Ok(self.word_compose(w)?.fixed_point(&self.space))
    }

    pub fn similarity_dimension(&self) -> f64 {
        similarity_dimension(&self.ratios())
    }

    /// Left-translate the whole configuration by `a`.
    pub fn translated(&self, a: &Point) -> Result<Ifs> {
        self.space.check(a)?;
        let maps = self
            .maps
            .iter()
            .map(|m| {
                // tau_a o S o tau_a^{-1}
                let conj = Similarity {
                    translation: a.clone(),
                    ratio: 1.0,
                }
                .compose(&self.space, m)
                .compose(
                    &self.space,
                    &Similarity {
                        translation: Point::new(group::inverse(a.coords())),
                        ratio: 1.0,
                    },
                );
                Similarity {
                    translation: conj.translation,
                    ratio: m.ratio,
                }
            })
            .collect();
        let base = Point::new(group::product(&self.space, a.coords(), self.base_point.coords()));
        Ifs::with_base_point(self.space, maps, base)
    }

    fn compute_invariant_box(&self) -> Vec<Interval> {
        let space = &self.space;
        let h = space.horizontal_len();
        let rho = self.base_radius;
        let b = self.base_point.coords();
        let ball: Vec<Interval> = (0..space.coord_len())
            .map(|i| {
                if i < h {
                    Interval::around(0.0, rho)
                } else {
                    Interval::around(0.0, rho * rho)
                }
            })
            .collect();
        let b_iv: Vec<Interval> = b.iter().map(|&x| Interval::point(x)).collect();
        let mut bx = group::product(space, &b_iv, &ball);
        // horizontal projections are the attractors of one-dimensional IFSs
        for (k, slot) in bx.iter_mut().enumerate().take(h) {
            let fixed = self.maps.iter().map(|m| {
                Interval::point(m.translation[k])
                    / (Interval::point(1.0) - Interval::point(m.ratio))
            });
            let hull = fixed.reduce(|a, c| a.hull(&c)).expect("at least two maps");
            if let Some(meet) = slot.intersect(&hull) {
                *slot = meet;
            } else {
                *slot = hull;
            }
        }
        let maps: Vec<IntervalSimilarity> = self.maps.iter().map(IntervalSimilarity::from_map).collect();
        for _ in 0..500 {
            let mut hull: Option<Vec<Interval>> = None;
            for m in &maps {
                let img = m.apply_box(space, &bx);
                hull = Some(match hull {
                    None => img,
                    Some(acc) => acc.iter().zip(&img).map(|(a, c)| a.hull(c)).collect(),
                });
            }
            let hull = hull.expect("at least two maps");
            let next: Vec<Interval> = bx
                .iter()
                .zip(&hull)
                .map(|(a, c)| a.intersect(c).unwrap_or(*a))
                .collect();
            let shrink = bx
                .iter()
                .zip(&next)
                .map(|(a, c)| (a.width() - c.width()) / a.width().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            bx = next;
            if shrink < 1e-13 {
                break;
            }
        }
        bx
    }
}

/// Unique `s > 0` with `sum r_i^s = 1`, by safeguarded Newton iteration.
pub fn similarity_dimension(ratios: &[f64]) -> f64 {
    assert!(ratios.len() >= 2, "similarity dimension needs at least 2 ratios");
    let mut grouped: Vec<(f64, f64)> = Vec::new();
    let mut sorted = ratios.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    for r in sorted {
        match grouped.last_mut() {
            Some((v, c)) if *v == r => *c += 1.0,
            _ => grouped.push((r, 1.0)),
        }
    }
    let f = |s: f64| -> (f64, f64) {
        grouped.iter().fold((-1.0, 0.0), |(v, dv), &(r, c)| {
            let t = c * r.powf(s);
            (v + t, dv + t * r.ln())
        })
    };
    let n = ratios.len() as f64;
    let rmin = grouped.first().unwrap().0;
    let rmax = grouped.last().unwrap().0;
    let mut lo = n.ln() / (1.0 / rmin).ln();
    let mut hi = n.ln() / (1.0 / rmax).ln();
    if grouped.len() == 1 {
        return lo;
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = f(s);
        if v == 0.0 {
            return s;
        }
        if v > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / dv;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - s).abs() <= 1e-16 * s.max(1.0) || hi - lo <= 1e-16 * s.max(1.0) {
            return next;
        }
        s = next;
    }
    s
}

/// Natural self-similar measure with weights `r_i^s`, scaled by `total`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarMeasure {
    pub s: f64,
    pub weights: Vec<f64>,
    pub total: f64,
}

impl SelfSimilarMeasure {
    pub fn natural(ifs: &Ifs) -> Self {
        Self::with_exponent(ifs, ifs.similarity_dimension())
    }

    pub fn with_exponent(ifs: &Ifs, s: f64) -> Self {
        SelfSimilarMeasure {
            s,
            weights: ifs.maps.iter().map(|m| m.ratio.powf(s)).collect(),
            total: 1.0,
        }
    }

    /// The same measure multiplied by a positive constant.
    pub fn scaled(&self, k: f64) -> Self {
        SelfSimilarMeasure {
            total: self.total * k,
            ..self.clone()
        }
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `mu(C_w) = total * prod weights`.
    pub fn mass(&self, w: &Word) -> f64 {
        self.total * w.0.iter().fold(1.0, |m, &i| m * self.weights[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cylinder {
    pub word: Word,
    pub map: Similarity,
    pub composed_ratio: f64,
    pub anchor: Point,
    pub diam_bound: f64,
    pub mass: f64,
}

impl Cylinder {
    pub fn ball_radius(&self, ifs: &Ifs) -> f64 {
        self.composed_ratio * ifs.base_radius
    }
}

/// Stopping rule for the cylinder tree below a root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Every cylinder exactly this many levels below the root.
    Depth(usize),
    /// Minimal antichain of cylinders whose mass relative to the root is at
    /// most the cutoff.
    MassCutoff(f64),
}

impl Refinement {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Refinement::Depth(_) => Ok(()),
            Refinement::MassCutoff(c) if c > 0.0 && c < 1.0 => Ok(()),
            Refinement::MassCutoff(c) => Err(Error::InvalidParameter(format!(
                "mass cutoff must lie in (0, 1), got {c}"
            ))),
        }
    }

    pub(crate) fn is_leaf(&self, level: usize, rel_mass: f64) -> bool {
        match *self {
            Refinement::Depth(d) => level >= d,
            Refinement::MassCutoff(c) => rel_mass <= c,
        }
    }
}

/// Visits the antichain below `root` in lexicographic order. The callback
/// receives each leaf cylinder and its level below the root.
pub fn for_each_cylinder<F: FnMut(Cylinder, usize)>(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    root: &Word,
    refinement: Refinement,
    budget: u64,
    mut f: F,
) -> Result<u64> {
    refinement.validate()?;
    ifs.check_word(root)?;
    if measure.weights.len() != ifs.len() {
        return Err(Error::DimensionMismatch {
            expected: ifs.len(),
            got: measure.weights.len(),
        });
    }
    let space = ifs.space;
    let root_map = ifs.word_compose(root)?;
    let root_mass = measure.mass(root);
    let mut visited: u64 = 0;
    struct Frame {
        word: Word,
        map: Similarity,
        rel_mass: f64,
        level: usize,
    }
    let mut stack = vec![Frame {
        word: root.clone(),
        map: root_map,
        rel_mass: 1.0,
        level: 0,
    }];
    while let Some(fr) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        if refinement.is_leaf(fr.level, fr.rel_mass) {
            let anchor = fr.map.apply(&space, &ifs.base_point);
            let ratio = fr.map.ratio;
            f(
                Cylinder {
                    diam_bound: ratio * ifs.base_diam(),
                    mass: root_mass * fr.rel_mass,
                    composed_ratio: ratio,
                    anchor,
                    word: fr.word,
                    map: fr.map,
                },
                fr.level,
            );
            continue;
        }
        for i in (0..ifs.len()).rev() {
            stack.push(Frame {
                word: fr.word.child(i),
                map: fr.map.compose(&space, &ifs.maps[i]),
                rel_mass: fr.rel_mass * measure.weights[i],
                level: fr.level + 1,
            });
        }
    }
    Ok(visited)
}

/// Collects the antichain of [`for_each_cylinder`] below the empty word.
pub fn enumerate_cylinders(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    refinement: Refinement,
    budget: u64,
) -> Result<Vec<Cylinder>> {
    let mut out = Vec::new();
    for_each_cylinder(ifs, measure, &Word::empty(), refinement, budget, |c, _| out.push(c))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> GroupSpace {
        GroupSpace::heisenberg(1).unwrap()
    }

    fn middle_thirds() -> Ifs {
        let e1 = GroupSpace::euclidean(1).unwrap();
        Ifs::new(
            e1,
            vec![
                Similarity::new(&e1, Point::from([0.0]), 1.0 / 3.0).unwrap(),
                Similarity::new(&e1, Point::from([2.0 / 3.0]), 1.0 / 3.0).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn similarity_apply_by_hand() {
        let s = Similarity::new(&h1(), h1().identity(), 0.5).unwrap();
        assert_eq!(s.apply(&h1(), &Point::from([2.0, 0.0, 0.0])), Point::from([1.0, 0.0, 0.0]));
        let s = Similarity::new(&h1(), Point::from([1.0, 0.0, 0.0]), 0.5).unwrap();
        assert_eq!(s.apply(&h1(), &h1().identity()), Point::from([1.0, 0.0, 0.0]));
        assert_eq!(s.apply(&h1(), &Point::from([2.0, 0.0, 0.0])), Point::from([2.0, 0.0, 0.0]));
        assert_eq!(s.fixed_point(&h1()), Point::from([2.0, 0.0, 0.0]));
    }

    #[test]
    fn invalid_ratios_rejected() {
        assert!(Similarity::new(&h1(), h1().identity(), 1.0).is_err());
        assert!(Similarity::new(&h1(), h1().identity(), 0.0).is_err());
        let one = vec![Similarity::new(&h1(), h1().identity(), 0.5).unwrap()];
        assert!(Ifs::new(h1(), one).is_err());
    }

    #[test]
    fn dimension_closed_forms() {
        let s = similarity_dimension(&[1.0 / 3.0, 1.0 / 3.0]);
        assert!((s - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        let s = similarity_dimension(&[0.5, 0.25]);
        assert!((s - 0.694_241_913_6).abs() < 1e-9);
        let x = 0.5f64.powf(s);
        assert!((x + x * x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn enumeration_depth_two() {
        let ifs = middle_thirds();
        let mu = SelfSimilarMeasure::natural(&ifs);
        let cyl = enumerate_cylinders(&ifs, &mu, Refinement::Depth(2), 1000).unwrap();
        assert_eq!(cyl.len(), 4);
        for c in &cyl {
            assert!((c.mass - 0.25).abs() < 1e-15);
        }
        let words: Vec<Word> = cyl.iter().map(|c| c.word.clone()).collect();
        let mut sorted = words.clone();
        sorted.sort();
        assert_eq!(words, sorted);
        let root = enumerate_cylinders(&ifs, &mu, Refinement::Depth(0), 1000).unwrap();
        assert_eq!(root.len(), 1);
        assert_eq!(root[0].mass, 1.0);
    }

    #[test]
    fn budget_is_enforced() {
        let ifs = middle_thirds();
        let mu = SelfSimilarMeasure::natural(&ifs);
        let err = enumerate_cylinders(&ifs, &mu, Refinement::Depth(10), 100).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { budget: 100 });
    }

    #[test]
    fn invariant_box_of_middle_thirds() {
        let ifs = middle_thirds();
        let b = ifs.invariant_box()[0];
        assert!(b.lo <= 0.0 && b.lo > -1e-12);
        assert!(b.hi >= 1.0 && b.hi < 1.0 + 1e-12);
        assert!(ifs.base_radius() >= 1.0 && ifs.base_radius() < 1.0 + 1e-9);
    }

    #[test]
    fn word_helpers() {
        let w = Word::new(vec![0, 2]);
        assert_eq!(w.power(2), Word::new(vec![0, 2, 0, 2]));
        assert_eq!(w.prefix(1), Word::new(vec![0]));
        assert_eq!(w.one_based_label(), "(1,3)");
        assert_eq!(w.to_string(), "[0,2]");
    }
}
