//! The separating function `phi` on `Q = [0,1]^{2n}` whose graph strip
//! `R = {phi(q') <= q_t <= phi(q') + 1}` is mapped into itself by every map
//! of a Heisenberg Cantor family.
//!
//! On each box `Q_j = z_j + [0,r]^{2n}`, `phi` solves
//! `phi(w) = r^2 phi((w - z_j)/r) - 2 sum_i (z_{j,i} w_{i+n} - z_{j,i+n} w_i)`.
//! Off `B = U Q_j` the right-hand side is extended by `L`, which fades the
//! value at the nearest point of `B` linearly to zero over `blend_eps`.

use serde::{Deserialize, Serialize};

use crate::cantor::CantorParams;
use crate::error::{Error, Result};
use crate::group::Point;

pub const DEFAULT_RESOLUTION: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const ITERATION_MARGIN: usize = 5;
/// Levels of exact self-similar recursion before interpolating the grid.
const EVAL_DEPTH_FLOOR: f64 = 1e-14;

/// Boxes `Q_j = z_j + [0,r]^{2n}` and the blend width of `L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiProblem {
    pub n: usize,
    pub r: f64,
    pub z: Vec<Vec<f64>>,
    pub blend_eps: f64,
    /// `Some(N)` when `z` is the full grid `{0, 1/N, .., (N-1)/N}^{2n}` in
    /// digit order.
    pub grid_n: Option<usize>,
}

impl PhiProblem {
    pub fn from_params(params: &CantorParams) -> Result<Self> {
        params.validate()?;
        let z = (1..=params.grid_count()).map(|k| params.z_point(k)).collect();
        Ok(PhiProblem {
            n: params.n,
            r: params.r,
            z,
            blend_eps: 0.5 * (1.0 / params.big_n as f64 - params.r),
            grid_n: Some(params.big_n),
        })
    }

    /// `count` copies of the box `[0,r]^{2n}`.
    pub fn degenerate(n: usize, r: f64, count: usize, blend_eps: f64) -> Result<Self> {
        if n == 0 || count == 0 || !(r > 0.0 && r < 1.0) || !(blend_eps > 0.0) {
            return Err(Error::InvalidParameter("degenerate problem needs n, count >= 1, 0 < r < 1, eps > 0".into()));
        }
        Ok(PhiProblem {
            n,
            r,
            z: vec![vec![0.0; 2 * n]; count],
            blend_eps,
            grid_n: None,
        })
    }

    fn dim(&self) -> usize {
        2 * self.n
    }

    /// `h_j(w) = -2 sum_i (z_{j,i} w_{i+n} - z_{j,i+n} w_i)`.
    pub fn obstruction(&self, j: usize, w: &[f64]) -> f64 {
        let z = &self.z[j];
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            s += z[i] * w[i + n] - z[i + n] * w[i];
        }
        -2.0 * s
    }

    /// Nearest box, nearest point of `B` and the Euclidean distance to it.
    fn locate(&self, w: &[f64]) -> (usize, Vec<f64>, f64) {
        let mut near = w.to_vec();
        let (j, d) = self.locate_in_place(&mut near);
        (j, near, d)
    }

    /// Moves `w` to its nearest point of `B`, returning the box and distance.
    fn locate_in_place(&self, w: &mut [f64]) -> (usize, f64) {
        let r = self.r;
        match self.grid_n {
            Some(big_n) => {
                let nf = big_n as f64;
                let mut idx = 0usize;
                let mut d2 = 0.0;
                for x in w.iter_mut() {
                    let l0 = ((*x * nf).floor().max(0.0) as usize).min(big_n - 1);
                    let mut best = (f64::INFINITY, 0usize, 0.0);
                    for l in [l0, (l0 + 1).min(big_n - 1)] {
                        let a = l as f64 / nf;
                        let c = x.clamp(a, a + r);
                        let d = (*x - c).abs();
                        if d < best.0 {
                            best = (d, l, c);
                        }
                    }
                    idx = idx * big_n + best.1;
                    *x = best.2;
                    d2 += best.0 * best.0;
                }
                (idx, d2.sqrt())
            }
            None => {
                let mut best = (f64::INFINITY, 0usize);
                for (j, z) in self.z.iter().enumerate() {
                    let d = w
                        .iter()
                        .zip(z)
                        .map(|(&x, &a)| (x - x.clamp(a, a + r)).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if d < best.0 {
                        best = (d, j);
                    }
                }
                let z = &self.z[best.1];
                for (x, &a) in w.iter_mut().zip(z) {
                    *x = x.clamp(a, a + r);
                }
                (best.1, best.0)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiField {
    pub problem: PhiProblem,
    pub resolution: usize,
    /// Row-major grid values, axis 0 slowest, at `idx / (resolution - 1)`.
    pub values: Vec<f64>,
    pub blend_eps: f64,
    /// Max over grid points of `U Q_j` of the fixed-point defect.
    pub residual: f64,
    pub sup_norm: f64,
    pub iterations: usize,
    /// Max change of the grid per sweep.
    pub residual_history: Vec<f64>,
    pub tol: f64,
}

struct Stencil {
    lambda: f64,
    h: f64,
    corners: Vec<(usize, f64)>,
    in_b: bool,
}

fn grid_coord(resolution: usize, flat: usize, dim: usize) -> Vec<f64> {
    let step = 1.0 / (resolution - 1) as f64;
    let mut rest = flat;
    let mut out = vec![0.0; dim];
    for i in (0..dim).rev() {
        out[i] = (rest % resolution) as f64 * step;
        rest /= resolution;
    }
    out
}

/// Multilinear interpolation weights at `u`, clamped to the unit box.
fn interp_weights(resolution: usize, u: &[f64]) -> Vec<(usize, f64)> {
    let m = resolution - 1;
    let mut axes = Vec::with_capacity(u.len());
    for &x in u {
        let pos = (x.clamp(0.0, 1.0)) * m as f64;
        let i0 = (pos.floor() as usize).min(m - 1);
        axes.push((i0, pos - i0 as f64));
    }
    let mut out = Vec::with_capacity(1 << u.len());
    for mask in 0..(1usize << u.len()) {
        let mut flat = 0;
        let mut w = 1.0;
        for (a, &(i0, f)) in axes.iter().enumerate() {
            let up = mask >> (u.len() - 1 - a) & 1 == 1;
            flat = flat * resolution + i0 + up as usize;
            w *= if up { f } else { 1.0 - f };
        }
        if w != 0.0 {
            out.push((flat, w));
        }
    }
    out
}

fn stencils(problem: &PhiProblem, resolution: usize) -> Vec<Stencil> {
    let dim = problem.dim();
    let total = resolution.pow(dim as u32);
    (0..total)
        .map(|g| {
            let w = grid_coord(resolution, g, dim);
            let (j, near, dist) = problem.locate(&w);
            if dist >= problem.blend_eps {
                return Stencil {
                    lambda: 0.0,
                    h: 0.0,
                    corners: Vec::new(),
                    in_b: false,
                };
            }
            let u: Vec<f64> = near.iter().zip(&problem.z[j]).map(|(x, a)| (x - a) / problem.r).collect();
            Stencil {
                lambda: (problem.blend_eps - dist) / problem.blend_eps,
                h: problem.obstruction(j, &near),
                corners: interp_weights(resolution, &u),
                in_b: dist == 0.0,
            }
        })
        .collect()
}

fn apply_t(st: &Stencil, r2: f64, values: &[f64]) -> f64 {
    if st.lambda == 0.0 {
        return 0.0;
    }
    let inner: f64 = st.corners.iter().map(|&(c, w)| w * values[c]).sum();
    st.lambda * (r2 * inner + st.h)
}

fn defect_on_b(sts: &[Stencil], r2: f64, values: &[f64]) -> f64 {
    sts.iter()
        .zip(values)
        .filter(|(st, _)| st.in_b)
        .map(|(st, &v)| (v - apply_t(st, r2, values)).abs())
        .fold(0.0, f64::max)
}

/// Solves the fixed-point equation on a grid of `resolution` points per axis
/// by synchronous sweeps of the contraction `T f = L(r^2 f((. - z_j)/r) + h_j)`.
pub fn solve_phi_problem(problem: &PhiProblem, resolution: usize, tol: f64) -> Result<PhiField> {
    if resolution < 2 {
        return Err(Error::InvalidParameter(format!("resolution must be >= 2, got {resolution}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let dim = problem.dim();
    let total = (resolution as u64).checked_pow(dim as u32).filter(|&t| t <= 1 << 26).ok_or_else(|| {
        Error::InvalidParameter(format!("grid of {resolution}^{dim} points is too large"))
    })? as usize;
    let sts = stencils(problem, resolution);
    let r2 = problem.r * problem.r;
    let mut cur = vec![0.0; total];
    let mut next = vec![0.0; total];
    let initial = sts.iter().map(|s| (s.lambda * s.h).abs()).fold(0.0, f64::max);
    let cap = if initial > tol {
        (((tol / initial).ln() / r2.ln()).ceil() as usize + ITERATION_MARGIN).min(MAX_ITERATIONS)
    } else {
        ITERATION_MARGIN
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        for (slot, st) in next.iter_mut().zip(&sts) {
            *slot = apply_t(st, r2, &cur);
        }
        let change = cur.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        history.push(change);
        if change <= tol * (1.0 - r2) {
            break;
        }
        if iterations >= cap {
            return Err(Error::Numerical(format!(
                "phi iteration did not reach {tol:e} within {cap} sweeps (last change {change:e})"
            )));
        }
    }
    let residual = defect_on_b(&sts, r2, &cur);
    let sup_norm = cur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PhiField {
        problem: problem.clone(),
        resolution,
        values: cur,
        blend_eps: problem.blend_eps,
        residual,
        sup_norm,
        iterations,
        residual_history: history,
        tol,
    })
}

pub fn solve_phi(params: &CantorParams, resolution: usize, tol: f64) -> Result<PhiField> {
    solve_phi_problem(&PhiProblem::from_params(params)?, resolution, tol)
}

impl PhiField {
    fn interp(&self, u: &[f64]) -> f64 {
        let res = self.resolution;
        let m = (res - 1) as f64;
        let dim = u.len();
        let mut total = 0.0;
        for mask in 0..(1usize << dim) {
            let mut flat = 0;
            let mut w = 1.0;
            for (a, &x) in u.iter().enumerate() {
                let pos = x.clamp(0.0, 1.0) * m;
                let i0 = (pos.floor() as usize).min(res - 2);
                let f = pos - i0 as f64;
                let up = mask >> (dim - 1 - a) & 1 == 1;
                flat = flat * res + i0 + up as usize;
                w *= if up { f } else { 1.0 - f };
            }
            if w != 0.0 {
                total += w * self.values[flat];
            }
        }
        total
    }

    /// `phi(w) = sum_k (prod_{i<=k} lambda_i) r^{2k} h_k` along the chain of
    /// nearest boxes, closed by the interpolated grid.
    fn eval_chain(&self, w: &[f64], levels: usize) -> f64 {
        let p = &self.problem;
        let r2 = p.r * p.r;
        let mut u = w.to_vec();
        let mut total = 0.0;
        let mut factor = 1.0;
        for _ in 0..levels {
            let (j, dist) = p.locate_in_place(&mut u);
            if dist >= p.blend_eps {
                return total;
            }
            factor *= (p.blend_eps - dist) / p.blend_eps;
            total += factor * p.obstruction(j, &u);
            for (x, a) in u.iter_mut().zip(&p.z[j]) {
                *x = (*x - a) / p.r;
            }
            factor *= r2;
        }
        total + factor * self.interp(&u)
    }

    fn eval_levels(&self) -> usize {
        let r2 = self.problem.r * self.problem.r;
        ((EVAL_DEPTH_FLOOR.ln() / r2.ln()).ceil() as usize).max(1)
    }

    /// `phi(w)`: the fixed-point equation unrolled until `r^{2k}` falls
    /// below `1e-14`, then multilinear interpolation of the grid.
    pub fn eval(&self, w: &[f64]) -> f64 {
        self.eval_chain(w, self.eval_levels())
    }

    /// Grid values as `(w, phi(w))` rows.
    pub fn grid_rows(&self) -> Vec<(Vec<f64>, f64)> {
        let dim = self.problem.dim();
        self.values
            .iter()
            .enumerate()
            .map(|(g, &v)| (grid_coord(self.resolution, g, dim), v))
            .collect()
    }

    /// Ratios of successive per-sweep changes.
    pub fn contraction_factors(&self) -> Vec<f64> {
        self.residual_history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiReport {
    pub residual: f64,
    pub tol: f64,
    pub sup_norm: f64,
    /// `4 n r / (1 - r^2)`.
    pub bound_tight: f64,
    pub bound_8nr: f64,
    /// Min of `phi` over grid points of `U Q_j`.
    pub min_on_b: f64,
    pub positivity: bool,
    pub blend_eps: f64,
    pub resolution: usize,
    pub pass: bool,
}

/// Recomputes the fixed-point defect and the norm and positivity bounds
/// from the grid values.
pub fn verify_phi(phi: &PhiField) -> PhiReport {
    let p = &phi.problem;
    let sts = stencils(p, phi.resolution);
    let residual = defect_on_b(&sts, p.r * p.r, &phi.values);
    let sup_norm = phi.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_on_b = sts
        .iter()
        .zip(&phi.values)
        .filter(|(st, _)| st.in_b)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min);
    let nr = (p.n as f64) * p.r;
    let bound_8nr = 8.0 * nr;
    let positivity = min_on_b > -0.5;
    PhiReport {
        residual,
        tol: phi.tol,
        sup_norm,
        bound_tight: 4.0 * nr / (1.0 - p.r * p.r),
        bound_8nr,
        min_on_b,
        positivity,
        blend_eps: phi.blend_eps,
        resolution: phi.resolution,
        pass: residual <= phi.tol && sup_norm <= bound_8nr && positivity,
    }
}

/// `p' in [0,1]^{2n}` and `phi(p') <= p_t <= phi(p') + 1`.
pub fn region_membership(phi: &PhiField, p: &Point) -> bool {
    let dim = phi.problem.dim();
    if p.coords().len() != dim + 1 {
        return false;
    }
    let w = &p.coords()[..dim];
    if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return false;
    }
    let f = phi.eval(w);
    let t = p[dim];
    f <= t && t <= f + 1.0
}
