//! Homogeneous kernels `K(x, y) = omega(x^{-1} y) / d(x, y)^s`.
//!
//! A kernel is described by its family (the degree-zero function `omega`),
//! its homogeneity `s` and an [`Orientation`]. The forward orientation
//! evaluates the family at `x^{-1} y`; the reflected one at `y^{-1} x`,
//! which is the convention of potentials written as `int K(q^{-1} p) dsigma(q)`.
//! Both are again `s`-homogeneous kernels of the same form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, GroupSpace, Point};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// Horizontal gradient of the sub-Laplacian fundamental solution,
    /// `c_Q (p_i |p'|^2 + p_{i+n} t, p_{i+n} |p'|^2 - p_i t) / ||p||^{Q+2}`.
    HeisenbergRiesz { c_q: f64 },
    /// `omega(p) = -p_axis / ||p||^w`, with `w = 2` on the Heisenberg
    /// vertical axis and `1` otherwise; for `R^d` this is `(x_i - y_i)/|x-y|^{s+1}`.
    CoordinateRiesz { axis: usize },
    /// `omega(z) = (z / |z|)^m` on the plane, components (Re, Im).
    ComplexPower { m: i32 },
    /// Constant positive (or negative) `omega`; a diagnostic family.
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    #[default]
    Forward,
    Reflected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub space: GroupSpace,
    pub s: f64,
    pub family: KernelFamily,
    #[serde(default)]
    pub orientation: Orientation,
}

/// Default `c_Q = (2 - Q) C_Q` with `C_Q = 1`.
pub fn default_c_q(space: &GroupSpace) -> f64 {
    2.0 - space.homogeneous_dim() as f64
}

impl KernelSpec {
    pub fn heisenberg_riesz(space: GroupSpace, c_q: f64) -> Result<Self> {
        if !space.is_heisenberg() {
            return Err(Error::UnsupportedSpace(
                "heisenberg_riesz needs a Heisenberg group".into(),
            ));
        }
        if c_q == 0.0 || !c_q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "c_Q must be finite and nonzero, got {c_q}"
            )));
        }
        Ok(KernelSpec {
            space,
            s: space.homogeneous_dim() as f64 - 1.0,
            family: KernelFamily::HeisenbergRiesz { c_q },
            orientation: Orientation::Forward,
        })
    }

    pub fn coordinate_riesz(space: GroupSpace, axis: usize, s: f64) -> Result<Self> {
        if axis >= space.coord_len() {
            return Err(Error::InvalidParameter(format!(
                "axis {axis} out of range for {} coordinates",
                space.coord_len()
            )));
        }
        Self::checked(space, s, KernelFamily::CoordinateRiesz { axis })
    }

    pub fn complex_power(space: GroupSpace, m: i32, s: f64) -> Result<Self> {
        if space != (GroupSpace::Euclidean { d: 2 }) {
            return Err(Error::UnsupportedSpace(
                "complex_power lives on the plane R^2".into(),
            ));
        }
        Self::checked(space, s, KernelFamily::ComplexPower { m })
    }

    pub fn constant(space: GroupSpace, value: f64, s: f64) -> Result<Self> {
        if value == 0.0 || !value.is_finite() {
            return Err(Error::InvalidParameter("constant kernel must be nonzero".into()));
        }
        Self::checked(space, s, KernelFamily::Constant { value })
    }

    fn checked(space: GroupSpace, s: f64, family: KernelFamily) -> Result<Self> {
        space.validate()?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "homogeneity s must be positive, got {s}"
            )));
        }
        Ok(KernelSpec {
            space,
            s,
            family,
            orientation: Orientation::Forward,
        })
    }

    pub fn reflected(mut self) -> Self {
        self.orientation = Orientation::Reflected;
        self
    }

    pub fn num_components(&self) -> usize {
        match self.family {
            KernelFamily::HeisenbergRiesz { .. } => self.space.horizontal_len(),
            KernelFamily::ComplexPower { .. } => 2,
            KernelFamily::CoordinateRiesz { .. } | KernelFamily::Constant { .. } => 1,
        }
    }

    /// Multiplies the kernel by a positive constant.
    pub fn rescaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.family = match out.family {
            KernelFamily::HeisenbergRiesz { c_q } => KernelFamily::HeisenbergRiesz { c_q: c_q * k },
            KernelFamily::Constant { value } => KernelFamily::Constant { value: value * k },
            f => f,
        };
        out
    }

    /// `omega` at a relative position (orientation applied).
    pub fn omega_at<R: Real>(&self, p: &[R]) -> Vec<R> {
        let q = self.oriented(p);
        let norm = group::gauge(&self.space, &q);
        self.omega_raw(&q, norm)
    }

    /// Kernel value at the relative position `p = x^{-1} y`.
    pub fn kernel_at<R: Real>(&self, p: &[R]) -> Vec<R> {
        let q = self.oriented(p);
        match self.family {
            KernelFamily::HeisenbergRiesz { c_q } => {
                let GroupSpace::Heisenberg { n } = self.space else {
                    unreachable!("validated at construction")
                };
                let h2 = group::horizontal_sq(&self.space, &q);
                let t = q[2 * n];
                let q4 = h2.sqr() + t.sqr();
                let denom = q4.powf((self.s + 3.0) / 4.0);
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    out.push((q[i] * h2 + q[i + n] * t).scale(c_q) / denom);
                }
                for i in 0..n {
                    out.push((q[i + n] * h2 - q[i] * t).scale(c_q) / denom);
                }
                out
            }
            _ => {
                let norm = group::gauge(&self.space, &q);
                let den = norm.powf(self.s);
                self.omega_raw(&q, norm).into_iter().map(|w| w / den).collect()
            }
        }
    }

    fn oriented<R: Real>(&self, p: &[R]) -> Vec<R> {
        match self.orientation {
            Orientation::Forward => p.to_vec(),
            Orientation::Reflected => group::inverse(p),
        }
    }

    fn omega_raw<R: Real>(&self, q: &[R], norm: R) -> Vec<R> {
        match self.family {
            KernelFamily::HeisenbergRiesz { c_q } => {
                let GroupSpace::Heisenberg { n } = self.space else {
                    unreachable!("validated at construction")
                };
                let h2 = group::horizontal_sq(&self.space, q);
                let t = q[2 * n];
                let n3 = norm.powf(3.0);
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    out.push((q[i] * h2 + q[i + n] * t).scale(c_q) / n3);
                }
                for i in 0..n {
                    out.push((q[i + n] * h2 - q[i] * t).scale(c_q) / n3);
                }
                out
            }
            KernelFamily::CoordinateRiesz { axis } => {
                let w = if axis >= self.space.horizontal_len() {
                    norm.sqr()
                } else {
                    norm
                };
                vec![-q[axis] / w]
            }
            KernelFamily::ComplexPower { m } => {
                let (x, y) = (q[0] / norm, q[1] / norm);
                let y = if m < 0 { -y } else { y };
                let (mut re, mut im) = (R::cst(1.0), R::cst(0.0));
                for _ in 0..m.unsigned_abs() {
                    let nr = re * x - im * y;
                    im = re * y + im * x;
                    re = nr;
                }
                vec![re, im]
            }
            KernelFamily::Constant { value } => vec![R::cst(value)],
        }
    }

    pub fn eval_omega(&self, p: &Point) -> Result<Vec<f64>> {
        self.space.check(p)?;
        if group::gauge(&self.space, p.coords()) == 0.0 {
            return Err(Error::Singularity("omega evaluated at the identity".into()));
        }
        Ok(self.omega_at(p.coords()))
    }

    pub fn eval_kernel(&self, x: &Point, y: &Point) -> Result<Vec<f64>> {
        let rel = self.space.relative(x, y)?;
        if group::gauge(&self.space, rel.coords()) == 0.0 {
            return Err(Error::Singularity("kernel evaluated on the diagonal".into()));
        }
        Ok(self.kernel_at(rel.coords()))
    }
}

/// Fundamental solution `Gamma(p) = C_Q ||p||^{2-Q}` of the sub-Laplacian.
pub fn eval_gamma(space: &GroupSpace, c_big: f64, p: &Point) -> Result<f64> {
    if !space.is_heisenberg() {
        return Err(Error::UnsupportedSpace(
            "the sub-Laplacian fundamental solution is defined on H^n".into(),
        ));
    }
    let norm = space.gauge_norm(p)?;
    if norm == 0.0 {
        return Err(Error::Singularity("Gamma evaluated at the identity".into()));
    }
    Ok(gamma_at(space, c_big, p.coords()))
}

pub(crate) fn gamma_at<R: Real>(space: &GroupSpace, c_big: f64, p: &[R]) -> R {
    let q = space.homogeneous_dim() as f64;
    group::gauge(space, p).powf(2.0 - q).scale(c_big)
}

/// Empirical suprema of the size and Holder quotients of a kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// sup over samples of `|K_i(p)| ||p||^s`.
    pub max_size_ratio: f64,
    /// sup of `|K_i(p^{-1} q1) - K_i(p^{-1} q2)| / max(d12 / d(p,q1)^{s+1}, d12 / d(p,q2)^{s+1})`.
    pub max_holder_ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn verify_standard_estimates(spec: &KernelSpec, samples: usize, seed: u64) -> Result<EstimateReport> {
    verify_standard_estimates_dilated(spec, samples, seed, 1.0)
}

/// Same sampling as [`verify_standard_estimates`], with every sampled point
/// pushed through the dilation `delta_lambda` before evaluation.
pub fn verify_standard_estimates_dilated(
    spec: &KernelSpec,
    samples: usize,
    seed: u64,
    lambda: f64,
) -> Result<EstimateReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be >= 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidDilation(lambda));
    }
    let space = spec.space;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_size = 0.0f64;
    let mut max_holder = 0.0f64;
    let dil = |p: Vec<f64>| group::dilation(&space, lambda, &p);

    let mut taken = 0;
    while taken < samples {
        let p = random_point(&space, &mut rng, 1.0);
        let ru = 10f64.powf(rng.random_range(-1.0..1.0));
        let u = random_point(&space, &mut rng, ru);
        let rv = ru * 10f64.powf(rng.random_range(-3.0..0.0));
        let v = random_point(&space, &mut rng, rv);
        let q1 = group::product(&space, &p, &u);
        let q2 = group::product(&space, &q1, &v);
        let (p, q1, q2) = (dil(p), dil(q1), dil(q2));

        let r1 = group::relative(&space, &p, &q1);
        let r2 = group::relative(&space, &p, &q2);
        let d1: f64 = group::gauge(&space, &r1);
        let d2: f64 = group::gauge(&space, &r2);
        let d12: f64 = group::gauge(&space, &group::relative(&space, &q1, &q2));
        if d1 == 0.0 || d2 == 0.0 || d12 == 0.0 {
            continue;
        }
        taken += 1;

        let k1 = spec.kernel_at(&r1);
        let k2 = spec.kernel_at(&r2);
        let size = k1.iter().fold(0.0f64, |m, k| m.max(k.abs())) * d1.powf(spec.s);
        max_size = max_size.max(size);

        let scale = (d12 / d1.powf(spec.s + 1.0)).max(d12 / d2.powf(spec.s + 1.0));
        let diff = k1
            .iter()
            .zip(&k2)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        max_holder = max_holder.max(diff / scale);
    }
    Ok(EstimateReport {
        max_size_ratio: max_size,
        max_holder_ratio: max_holder,
        samples,
        seed,
    })
}

/// Random point with gauge norm exactly `radius`.
pub(crate) fn random_point<G: Rng>(space: &GroupSpace, rng: &mut G, radius: f64) -> Vec<f64> {
    loop {
        let p: Vec<f64> = (0..space.coord_len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let norm: f64 = group::gauge(space, &p);
        if norm > 1e-3 {
            return group::dilation(space, radius / norm, &p);
        }
    }
}

/// The empirical constant used by heuristic error indicators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a_emp: f64,
    pub size_const: f64,
    pub safety_factor: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Calibration {
    pub const SAFETY_FACTOR: f64 = 4.0;

    pub fn for_kernel(spec: &KernelSpec, samples: usize, seed: u64) -> Result<Self> {
        let report = verify_standard_estimates(spec, samples, seed)?;
        Ok(Calibration {
            a_emp: Self::SAFETY_FACTOR * report.max_holder_ratio,
            size_const: Self::SAFETY_FACTOR * report.max_size_ratio,
            safety_factor: Self::SAFETY_FACTOR,
            samples,
            seed,
        })
    }
}
