//! Certified lower bounds for the distances between first-level pieces
//! `S_i(C)` of an invariant set.
//!
//! Each bound is a lower bound for the true distance in exact arithmetic:
//! pieces are enclosed both in interval coordinate boxes (images of the
//! invariant box) and in gauge balls, and all geometry is evaluated with
//! outward-rounded intervals. Pairs whose horizontal projections overlap are
//! compared in the frame of the first piece, `dist(S_i C, S_j C) =
//! r_i dist(C, S_i^{-1} S_j C)`, where coordinate boxes are not distorted by
//! the twist of the group law at large coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupSpace};
use crate::ifs::{Ifs, IntervalSimilarity};
use crate::interval::Interval;
use crate::real::Real;

/// Cap on box/ball pair evaluations spent on refinement.
const REFINE_WORK: u64 = 5_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// Certified lower bound on `min_{i != j} dist(S_i C, S_j C)`.
    pub min_gap: f64,
    /// `min_gap / max_i diam_bound(S_i C)`.
    pub alpha_lower: f64,
    pub disjoint: bool,
    pub depth: usize,
    pub pairs_examined: u64,
    /// Closest pair found, zero-based map indices.
    pub closest_pair: Option<(usize, usize)>,
    /// Diameter bound of the invariant set used for the ball covers.
    pub diam_bound: f64,
}

impl SeparationReport {
    pub fn require_disjoint(&self) -> Result<()> {
        if self.disjoint {
            Ok(())
        } else {
            Err(Error::InconclusiveSeparation {
                min_gap: self.min_gap,
                depth: self.depth,
            })
        }
    }
}

struct Ctx<'a> {
    ifs: &'a Ifs,
    base_iv: Vec<Interval>,
    work: u64,
}

impl Ctx<'_> {
    fn space(&self) -> &GroupSpace {
        self.ifs.space()
    }

    /// Lower bound on `dist(U(C), V(C))`.
    fn pair_lb(&mut self, u: &IntervalSimilarity, v: &IntervalSimilarity, level: usize, depth: usize) -> f64 {
        self.work += 1;
        let space = *self.space();
        let bx = self.ifs.invariant_box();
        let xu = u.apply_box(&space, bx);
        let xv = v.apply_box(&space, bx);
        let box_lb = group::gauge(&space, &group::relative(&space, &xu, &xv)).lo;
        let au = u.apply_box(&space, &self.base_iv);
        let av = v.apply_box(&space, &self.base_iv);
        let rho = Interval::point(self.ifs.base_radius());
        let centres = group::gauge(&space, &group::relative(&space, &au, &av));
        let ball_lb = (centres - u.ratio * rho - v.ratio * rho).lo;
        let lb = box_lb.max(ball_lb);
        if lb > 0.0 || level >= depth || self.work >= REFINE_WORK {
            return lb;
        }
        let n = self.ifs.len() as u64;
        if self.work + n * n > REFINE_WORK {
            return lb;
        }
        let mut best = f64::INFINITY;
        for a in self.ifs.maps() {
            let ua = u.then(&space, a);
            for b in self.ifs.maps() {
                let vb = v.then(&space, b);
                best = best.min(self.pair_lb(&ua, &vb, level + 1, depth));
                if best <= lb {
                    return lb;
                }
            }
        }
        lb.max(best)
    }
}

fn horizontal_gap(space: &GroupSpace, a: &[Interval], b: &[Interval]) -> f64 {
    let mut sq = Interval::point(0.0);
    for k in 0..space.horizontal_len() {
        let g = (Interval::point(b[k].lo) - Interval::point(a[k].hi))
            .lo
            .max((Interval::point(a[k].lo) - Interval::point(b[k].hi)).lo)
            .max(0.0);
        sq = sq + Interval::point(g).sqr();
    }
    sq.sqrt().lo
}

/// Separation of the first-level pieces, refining box and ball covers up to
/// `depth` levels where the first-level covers overlap.
pub fn separation_report(ifs: &Ifs, depth: usize) -> Result<SeparationReport> {
    if depth < 1 {
        return Err(Error::InvalidParameter("separation depth must be >= 1".into()));
    }
    let space = *ifs.space();
    let maps = ifs.maps();
    let first: Vec<IntervalSimilarity> = maps.iter().map(IntervalSimilarity::from_map).collect();
    let boxes: Vec<Vec<Interval>> = first
        .iter()
        .map(|m| m.apply_box(&space, ifs.invariant_box()))
        .collect();
    let mut order: Vec<usize> = (0..maps.len()).collect();
    order.sort_by(|&a, &b| boxes[a][0].lo.total_cmp(&boxes[b][0].lo).then(a.cmp(&b)));

    let mut ctx = Ctx {
        ifs,
        base_iv: ifs.base_point().coords().iter().map(|&x| Interval::point(x)).collect(),
        work: 0,
    };
    let mut best = f64::INFINITY;
    let mut closest = None;
    let mut pairs = 0u64;
    for (ai, &i) in order.iter().enumerate() {
        for &j in &order[ai + 1..] {
            if boxes[j][0].lo - boxes[i][0].hi >= best {
                break;
            }
            pairs += 1;
            let h = horizontal_gap(&space, &boxes[i], &boxes[j]);
            let lb = if h > 0.0 {
                h
            } else {
                relative_lb(&mut ctx, &space, i, j, depth)
            };
            if lb < best {
                best = lb;
                closest = Some((i.min(j), i.max(j)));
            }
        }
    }
    let max_diam = maps.iter().map(|m| m.ratio).fold(0.0, f64::max) * ifs.base_diam();
    Ok(SeparationReport {
        min_gap: best,
        alpha_lower: best / max_diam,
        disjoint: best > 0.0,
        depth,
        pairs_examined: pairs,
        closest_pair: closest,
        diam_bound: ifs.base_diam(),
    })
}

/// `r_i * dist(C, S_i^{-1} S_j C)` from below.
fn relative_lb(ctx: &mut Ctx<'_>, space: &GroupSpace, i: usize, j: usize, depth: usize) -> f64 {
    let maps = ctx.ifs.maps();
    let (si, sj) = (&maps[i], &maps[j]);
    let ri = Interval::point(si.ratio);
    let qi: Vec<Interval> = si.translation.coords().iter().map(|&x| Interval::point(x)).collect();
    let qj: Vec<Interval> = sj.translation.coords().iter().map(|&x| Interval::point(x)).collect();
    let inv_ri = Interval::point(1.0) / ri;
    let t = IntervalSimilarity {
        translation: group::dilation_by(space, inv_ri, &group::relative(space, &qi, &qj)),
        ratio: Interval::point(sj.ratio) * inv_ri,
    };
    let id = IntervalSimilarity::identity(space);
    let lb = ctx.pair_lb(&id, &t, 1, depth);
    if lb > 0.0 {
        (Interval::point(lb) * ri).lo
    } else {
        lb
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Point;
    use crate::ifs::Similarity;

    #[test]
    fn middle_thirds_gap() {
        let e1 = GroupSpace::euclidean(1).unwrap();
        let ifs = Ifs::new(
            e1,
            vec![
                Similarity::new(&e1, Point::from([0.0]), 1.0 / 3.0).unwrap(),
                Similarity::new(&e1, Point::from([2.0 / 3.0]), 1.0 / 3.0).unwrap(),
            ],
        )
        .unwrap();
        let rep = separation_report(&ifs, 4).unwrap();
        assert!(rep.disjoint);
        assert!(rep.min_gap >= 1.0 / 3.0 - 2.0 / 81.0);
        assert!(rep.min_gap <= 1.0 / 3.0);
        assert!(rep.require_disjoint().is_ok());
    }

    #[test]
    fn identical_pieces_are_not_separated() {
        let e1 = GroupSpace::euclidean(1).unwrap();
        let s = Similarity::new(&e1, Point::from([0.5]), 0.25).unwrap();
        let ifs = Ifs::new(e1, vec![s.clone(), s]).unwrap();
        let rep = separation_report(&ifs, 3).unwrap();
        assert!(!rep.disjoint);
        assert!(rep.min_gap <= 0.0);
        assert!(matches!(
            rep.require_disjoint(),
            Err(Error::InconclusiveSeparation { .. })
        ));
    }

    #[test]
    fn depth_zero_rejected() {
        let e1 = GroupSpace::euclidean(1).unwrap();
        let ifs = Ifs::new(
            e1,
            vec![
                Similarity::new(&e1, Point::from([0.0]), 0.3).unwrap(),
                Similarity::new(&e1, Point::from([0.7]), 0.3).unwrap(),
            ],
        )
        .unwrap();
        assert!(separation_report(&ifs, 0).is_err());
    }
}
