//! Truncated and maximal singular integral operators, the cylindrical
//! maximal operator and potentials of the sub-Laplacian fundamental solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupSpace, Point};
use crate::ifs::{Ifs, Refinement, SelfSimilarMeasure, Similarity, Word};
use crate::kernel::{self, KernelSpec};
use crate::quadrature::{
    fixed_point_box, integrate_enclosed, CertMode, IntegralEstimate, QuadratureOptions, Region, Sign,
};

/// Extra levels spent on cylinders straddling a truncation sphere or lying
/// close to a potential's evaluation point.
pub const STRADDLE_EXTRA: usize = 12;

struct Frame {
    word: Word,
    map: Similarity,
    rel_mass: f64,
    extra: usize,
    level: usize,
}

fn children(ifs: &Ifs, measure: &SelfSimilarMeasure, fr: &Frame, extra: usize, out: &mut Vec<Frame>) {
    for i in (0..ifs.len()).rev() {
        out.push(Frame {
            word: fr.word.child(i),
            map: fr.map.compose(ifs.space(), &ifs.maps()[i]),
            rel_mass: fr.rel_mass * measure.weights[i],
            extra,
            level: fr.level + 1,
        });
    }
}

fn root_frame(ifs: &Ifs) -> Frame {
    Frame {
        word: Word::empty(),
        map: Similarity::identity(ifs.space()),
        rel_mass: 1.0,
        extra: 0,
        level: 0,
    }
}

/// `T^eps mu(p) = int_{d(p, y) >= eps} K(p, y) dmu(y)`.
pub fn truncated_operator(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    p: &Point,
    eps: f64,
    opts: &QuadratureOptions,
) -> Result<IntegralEstimate> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    opts.refinement.validate()?;
    let space = ifs.space();
    space.check(p)?;
    let comps = spec.num_components();
    let mut value = vec![0.0; comps];
    let mut error = 0.0;
    let mut nodes = 0u64;
    let mut depth_used = 0;
    let mut visited = 0u64;
    let mut stack = vec![root_frame(ifs)];
    while let Some(fr) = stack.pop() {
        visited += 1;
        let anchor = fr.map.apply_slice(space, ifs.base_point().coords());
        let rel = group::relative(space, p.coords(), &anchor);
        let dist: f64 = group::gauge(space, &rel);
        let radius = fr.map.ratio * ifs.base_radius();
        let mass = measure.total * fr.rel_mass;
        if dist + radius < eps {
            continue;
        }
        let leaf = opts.refinement.is_leaf(fr.level, fr.rel_mass);
        if dist - radius >= eps {
            if !leaf {
                if visited + ifs.len() as u64 > opts.budget {
                    return Err(Error::BudgetExceeded { budget: opts.budget });
                }
                children(ifs, measure, &fr, 0, &mut stack);
                continue;
            }
            let gap = dist - radius;
            for (v, k) in value.iter_mut().zip(spec.kernel_at(&rel)) {
                *v += k * mass;
            }
            let holder = opts.a_emp * 2.0 * radius * mass / gap.powf(spec.s + 1.0);
            let size = 2.0 * opts.size_const * mass / gap.powf(spec.s);
            error += holder.min(size);
            nodes += 1;
            depth_used = depth_used.max(fr.level);
            continue;
        }
        let extra = if leaf { fr.extra + 1 } else { 0 };
        if extra <= STRADDLE_EXTRA && visited + ifs.len() as u64 <= opts.budget {
            children(ifs, measure, &fr, extra, &mut stack);
        } else {
            error += 2.0 * opts.size_const * mass / eps.powf(spec.s);
            depth_used = depth_used.max(fr.level);
        }
    }
    let certified_sign = value
        .iter()
        .map(|&v| {
            if v.abs() > error {
                if v > 0.0 {
                    Sign::Positive
                } else {
                    Sign::Negative
                }
            } else {
                Sign::None
            }
        })
        .collect();
    Ok(IntegralEstimate {
        value,
        error_indicator: vec![error; comps],
        depth_used,
        nodes,
        certified_sign,
        mode: CertMode::Heuristic,
        interval: None,
        cylinders_agree: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalEstimate {
    /// Max over the grid of the Euclidean norm of `T^eps mu(p)`.
    pub estimate: f64,
    /// `(eps, |T^eps mu(p)|)` in grid order.
    pub per_eps: Vec<(f64, f64)>,
}

/// Lower estimate of `T^* mu(p) = sup_eps |T^eps mu(p)|` over a grid.
pub fn maximal_operator_estimate(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    p: &Point,
    eps_grid: &[f64],
    opts: &QuadratureOptions,
) -> Result<MaximalEstimate> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter("eps grid is empty".into()));
    }
    let per_eps = eps_grid
        .iter()
        .map(|&eps| {
            let t = truncated_operator(ifs, measure, spec, p, eps, opts)?;
            Ok((eps, t.value.iter().map(|v| v * v).sum::<f64>().sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MaximalEstimate {
        estimate: per_eps.iter().map(|e| e.1).fold(0.0, f64::max),
        per_eps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylindricalEstimate {
    pub estimate: f64,
    /// Prefix lengths `(i, j)` of the maximizing pair `C_{a|j} in C_{a|i}`.
    pub best_pair: (usize, usize),
    /// `int_{C_{a|m} \ C_{a|m+1}} K(p, y) dmu(y)` for `m < max_depth`.
    pub shells: Vec<Vec<f64>>,
}

/// Cylindrical maximal operator at the point with periodic address
/// `a^infinity`, the fixed point of `S_a`: the max over `0 <= i < j <=
/// max_depth` of `|int_{C_{a|i} \ C_{a|j}} K(p, y) dmu(y)|`.
pub fn cylindrical_maximal_estimate(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    address: &Word,
    max_depth: usize,
    opts: &QuadratureOptions,
) -> Result<CylindricalEstimate> {
    if max_depth == 0 {
        return Err(Error::InvalidParameter("max_depth must be >= 1".into()));
    }
    let p = ifs.fixed_point(address)?;
    let p_box = fixed_point_box(ifs, address);
    let long = address.power(max_depth / address.len() + 1);
    let heuristic = opts.clone().with_mode(CertMode::Heuristic);
    let shells = (0..max_depth)
        .map(|m| {
            let region = Region::Shell {
                prefix: long.prefix(m),
                except: long.indices()[m],
            };
            integrate_enclosed(ifs, measure, spec, &p, &p_box, &region, &heuristic).map(|e| e.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let comps = spec.num_components();
    let mut best = (0.0, (0, 1));
    for i in 0..max_depth {
        let mut acc = vec![0.0; comps];
        for j in i + 1..=max_depth {
            for (a, v) in acc.iter_mut().zip(&shells[j - 1]) {
                *a += v;
            }
            let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > best.0 {
                best = (norm, (i, j));
            }
        }
    }
    Ok(CylindricalEstimate {
        estimate: best.0,
        best_pair: best.1,
        shells,
    })
}

fn gamma_value(space: &GroupSpace, c_big: f64, rel: &[f64]) -> f64 {
    if let GroupSpace::Heisenberg { n: 1 } = space {
        let h2 = rel[0] * rel[0] + rel[1] * rel[1];
        c_big / (h2 * h2 + rel[2] * rel[2]).sqrt()
    } else {
        kernel::gamma_at(space, c_big, rel)
    }
}

/// `f(p) = int Gamma(q^{-1} p) dmu(q)`, refining cylinders whose ball comes
/// within one radius of `p`.
pub fn gamma_potential(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    c_big: f64,
    p: &Point,
    refinement: Refinement,
    budget: u64,
) -> Result<f64> {
    let space = ifs.space();
    if !space.is_heisenberg() {
        return Err(Error::UnsupportedSpace(
            "the sub-Laplacian fundamental solution is defined on H^n".into(),
        ));
    }
    space.check(p)?;
    refinement.validate()?;
    let mut total = 0.0;
    let mut visited = 0u64;
    let mut stack = vec![root_frame(ifs)];
    while let Some(fr) = stack.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::BudgetExceeded { budget });
        }
        let leaf = refinement.is_leaf(fr.level, fr.rel_mass);
        let anchor = fr.map.apply_slice(space, ifs.base_point().coords());
        let rel = group::relative(space, &anchor, p.coords());
        if !leaf {
            children(ifs, measure, &fr, 0, &mut stack);
            continue;
        }
        let dist: f64 = group::gauge(space, &rel);
        let radius = fr.map.ratio * ifs.base_radius();
        if dist < 2.0 * radius && fr.extra < STRADDLE_EXTRA && visited + ifs.len() as u64 <= budget {
            children(ifs, measure, &fr, fr.extra + 1, &mut stack);
            continue;
        }
        if dist == 0.0 {
            return Err(Error::Singularity("potential evaluated at a quadrature node".into()));
        }
        total += gamma_value(space, c_big, &rel) * measure.total * fr.rel_mass;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// Max over sampled pairs of `|f(p1) - f(p2)| / d(p1, p2)`.
    pub max_ratio: f64,
    pub pairs: usize,
    pub seed: u64,
}

/// Samples `p1` in the invariant box grown by half the base radius and
/// `p2 = p1 . u` with `||u||` between 1% and 10% of the base radius.
pub fn lipschitz_probe(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    c_big: f64,
    pairs: usize,
    seed: u64,
    refinement: Refinement,
    budget: u64,
) -> Result<LipschitzReport> {
    if pairs == 0 {
        return Err(Error::InvalidParameter("pairs must be >= 1".into()));
    }
    let space = *ifs.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = ifs.base_radius();
    let h = space.horizontal_len();
    let mut best = 0.0f64;
    for _ in 0..pairs {
        let p1: Vec<f64> = ifs
            .invariant_box()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let m = if i < h { 0.5 * rho } else { 0.25 * rho * rho };
                rng.random_range(b.lo - m..b.hi + m)
            })
            .collect();
        let len = rho * 10f64.powf(rng.random_range(-2.0..-1.0));
        let u = kernel::random_point(&space, &mut rng, len);
        let p2 = group::product(&space, &p1, &u);
        let f1 = gamma_potential(ifs, measure, c_big, &Point::new(p1), refinement, budget)?;
        let f2 = gamma_potential(ifs, measure, c_big, &Point::new(p2), refinement, budget)?;
        best = best.max((f1 - f2).abs() / len);
    }
    Ok(LipschitzReport {
        max_ratio: best,
        pairs,
        seed,
    })
}
