//! One-node-per-cylinder quadrature of kernels against the self-similar
//! measure, with heuristic error indicators and interval sign certificates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{self, Point};
use crate::ifs::{Ifs, IntervalSimilarity, Refinement, SelfSimilarMeasure, Word};
use crate::interval::Interval;
use crate::real::Real;
use crate::kernel::{Calibration, KernelSpec};
use crate::separation::{separation_report, SeparationReport};

/// A union of disjoint cylinders of the invariant set `C`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `C`.
    Whole,
    /// `C \ C_w`.
    ComplementOf { word: Word },
    /// `C_{w^k} \ C_{w^{k+1}}`.
    Annulus { word: Word, k: usize },
    /// `C_u \ C_{u i}`.
    Shell { prefix: Word, except: usize },
}

impl Region {
    /// Words whose cylinders partition the region, in lexicographic order.
    pub fn pieces(&self, n_maps: usize) -> Result<Vec<Word>> {
        let siblings_along = |w: &Word| -> Vec<Word> {
            let mut out = Vec::new();
            for m in 0..w.len() {
                let stem = w.prefix(m);
                for a in 0..n_maps {
                    if a != w.indices()[m] {
                        out.push(stem.child(a));
                    }
                }
            }
            out
        };
        let check = |w: &Word| -> Result<()> {
            if w.indices().iter().any(|&i| i >= n_maps) {
                return Err(Error::InvalidParameter(format!(
                    "word {w} has an index out of range for {n_maps} maps"
                )));
            }
            Ok(())
        };
        let mut pieces = match self {
            Region::Whole => vec![Word::empty()],
            Region::ComplementOf { word } => {
                check(word)?;
                if word.is_empty() {
                    return Err(Error::InvalidParameter("C minus C is empty".into()));
                }
                siblings_along(word)
            }
            Region::Annulus { word, k } => {
                check(word)?;
                if word.is_empty() {
                    return Err(Error::InvalidParameter("annulus needs a nonempty word".into()));
                }
                let stem = word.power(*k);
                siblings_along(word).iter().map(|p| stem.concat(p)).collect()
            }
            Region::Shell { prefix, except } => {
                check(prefix)?;
                if *except >= n_maps {
                    return Err(Error::InvalidParameter(format!("map index {except} out of range")));
                }
                (0..n_maps).filter(|a| a != except).map(|a| prefix.child(a)).collect()
            }
        };
        pieces.sort();
        Ok(pieces)
    }

    /// Cylinder whose mass normalizes mass cutoffs.
    pub fn scale_root(&self) -> Word {
        match self {
            Region::Whole | Region::ComplementOf { .. } => Word::empty(),
            Region::Annulus { word, k } => word.power(*k),
            Region::Shell { prefix, .. } => prefix.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    Heuristic,
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
    None,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::None => Sign::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub refinement: Refinement,
    pub mode: CertMode,
    pub budget: u64,
    /// 1 gives the sequential lexicographic reference summation.
    pub threads: usize,
    /// Calibrated Holder constant for the error indicator.
    pub a_emp: f64,
    /// Calibrated size constant, `|K(x, y)| <= size_const / d(x, y)^s`.
    pub size_const: f64,
    pub safety_factor: f64,
}

impl QuadratureOptions {
    pub const CALIBRATION_SAMPLES: usize = 2000;
    pub const CALIBRATION_SEED: u64 = 0;

    /// Interval mode, single thread, budget from the environment and the
    /// Holder constant calibrated for `spec`.
    pub fn new(spec: &KernelSpec, refinement: Refinement) -> Result<Self> {
        let cal = Calibration::for_kernel(spec, Self::CALIBRATION_SAMPLES, Self::CALIBRATION_SEED)?;
        Ok(QuadratureOptions {
            refinement,
            mode: CertMode::Interval,
            budget: crate::ifs::node_budget_from_env(),
            threads: 1,
            a_emp: cal.a_emp,
            size_const: cal.size_const,
            safety_factor: cal.safety_factor,
        })
    }

    pub fn with_mode(mut self, mode: CertMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub value: Vec<f64>,
    pub error_indicator: Vec<f64>,
    pub depth_used: usize,
    pub nodes: u64,
    pub certified_sign: Vec<Sign>,
    pub mode: CertMode,
    /// Enclosure of the integral, interval mode only.
    pub interval: Option<Vec<Interval>>,
    /// Per component, whether every cylinder interval has the certified sign.
    pub cylinders_agree: Option<Vec<bool>>,
}

/// One quadrature node: the cylinder `C_word` represented by its anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadNode {
    pub word: Word,
    pub anchor: Point,
    pub ratio: f64,
    pub mass: f64,
    pub(crate) enclosure: Option<IntervalSimilarity>,
}

/// Antichain nodes of a region in lexicographic order. Depth refinement is
/// counted below each piece; mass cutoffs are relative to the region's
/// scale root, so nodes of `Annulus(w, k)` are the `S_{w^k}` images of the
/// nodes of `Annulus(w, 0)`.
pub fn quadrature_nodes(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    region: &Region,
    refinement: Refinement,
    budget: u64,
) -> Result<Vec<QuadNode>> {
    build_nodes(ifs, measure, region, refinement, budget, false)
}

/// Antichain words of a region with interval boxes enclosing their cylinders.
pub fn node_boxes(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    region: &Region,
    refinement: Refinement,
    budget: u64,
) -> Result<Vec<(QuadNode, Vec<Interval>)>> {
    let space = *ifs.space();
    Ok(build_nodes(ifs, measure, region, refinement, budget, true)?
        .into_iter()
        .map(|n| {
            let b = n
                .enclosure
                .as_ref()
                .expect("enclosed nodes")
                .apply_box(&space, ifs.invariant_box());
            (n, b)
        })
        .collect())
}

fn build_nodes(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    region: &Region,
    refinement: Refinement,
    budget: u64,
    enclose: bool,
) -> Result<Vec<QuadNode>> {
    refinement.validate()?;
    if measure.weights.len() != ifs.len() {
        return Err(Error::DimensionMismatch {
            expected: ifs.len(),
            got: measure.weights.len(),
        });
    }
    let space = *ifs.space();
    let root = region.scale_root();
    let pieces = region.pieces(ifs.len())?;
    let mut visited = 0u64;
    let mut out = Vec::new();
    struct Frame {
        word: Word,
        map: crate::ifs::Similarity,
        iv: Option<IntervalSimilarity>,
        rel_mass: f64,
        level: usize,
    }
    for piece in pieces {
        let map = ifs.word_compose(&piece)?;
        let iv = enclose.then(|| {
            piece.indices().iter().fold(IntervalSimilarity::identity(&space), |acc, &i| {
                acc.then(&space, &ifs.maps()[i])
            })
        });
        let rel_mass = piece.indices()[root.len()..]
            .iter()
            .fold(1.0, |m, &i| m * measure.weights[i]);
        let mut stack = vec![Frame {
            word: piece,
            map,
            iv,
            rel_mass,
            level: 0,
        }];
        while let Some(fr) = stack.pop() {
            visited += 1;
            if visited > budget {
                return Err(Error::BudgetExceeded { budget });
            }
            if refinement.is_leaf(fr.level, fr.rel_mass) {
                out.push(QuadNode {
                    anchor: fr.map.apply(&space, ifs.base_point()),
                    ratio: fr.map.ratio,
                    mass: measure.mass(&fr.word),
                    word: fr.word,
                    enclosure: fr.iv,
                });
                continue;
            }
            for i in (0..ifs.len()).rev() {
                let m = &ifs.maps()[i];
                stack.push(Frame {
                    word: fr.word.child(i),
                    map: fr.map.compose(&space, m),
                    iv: fr.iv.as_ref().map(|v| v.then(&space, m)),
                    rel_mass: fr.rel_mass * measure.weights[i],
                    level: fr.level + 1,
                });
            }
        }
    }
    Ok(out)
}

/// Kahan-Babuska-Neumaier summation.
pub(crate) fn neumaier<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in it {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

struct Contribution {
    value: Vec<f64>,
    error: Vec<f64>,
    interval: Option<Vec<Interval>>,
}

/// Interval enclosure of a point given in floating point.
pub(crate) fn point_box(p: &Point) -> Vec<Interval> {
    p.coords().iter().map(|&x| Interval::point(x)).collect()
}

/// A node seen from the evaluation point: `x^{-1} anchor`, its interval
/// enclosure of `x^{-1} C_v` and the cylinder's radius and mass.
struct Frame {
    word: Word,
    rel: Vec<f64>,
    rel_box: Option<Vec<Interval>>,
    radius: f64,
    mass: f64,
}

fn frame_of(ifs: &Ifs, x: &Point, x_box: &[Interval], node: &QuadNode, opts: &QuadratureOptions) -> Frame {
    let space = ifs.space();
    let rel_box = match (&node.enclosure, opts.mode) {
        (Some(enc), CertMode::Interval) => {
            let b = enc.apply_box(space, ifs.invariant_box());
            Some(group::relative(space, x_box, &b))
        }
        _ => None,
    };
    Frame {
        word: node.word.clone(),
        rel: group::relative(space, x.coords(), node.anchor.coords()),
        rel_box,
        radius: node.ratio * ifs.base_radius(),
        mass: node.mass,
    }
}

fn evaluate_frame(ifs: &Ifs, spec: &KernelSpec, fr: &Frame, opts: &QuadratureOptions) -> Result<Contribution> {
    let dist: f64 = group::gauge(ifs.space(), &fr.rel);
    let gap = dist - fr.radius;
    if gap <= 0.0 {
        return Err(Error::Singularity(format!(
            "evaluation point is not separated from cylinder {} (distance {dist:e}, radius {:e}); refine further",
            fr.word, fr.radius
        )));
    }
    let k = spec.kernel_at(&fr.rel);
    let value: Vec<f64> = k.iter().map(|v| v * fr.mass).collect();
    let bound = opts.a_emp * 2.0 * fr.radius * fr.mass.abs() / gap.powf(spec.s + 1.0);
    let error = vec![bound; value.len()];
    let interval = fr.rel_box.as_ref().map(|r| {
        let kiv = spec.kernel_at::<Interval>(r);
        let m = Interval::around(fr.mass, fr.mass.abs() * 1e-14);
        kiv.into_iter().map(|v| v * m).collect()
    });
    Ok(Contribution { value, error, interval })
}

/// Integral of `K(x, .)` over a region, with the evaluation point enclosed
/// by `x_box` for the interval certificate.
pub(crate) fn integrate_enclosed(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    x: &Point,
    x_box: &[Interval],
    region: &Region,
    opts: &QuadratureOptions,
) -> Result<IntegralEstimate> {
    check_inputs(ifs, spec, x)?;
    let nodes = build_nodes(
        ifs,
        measure,
        region,
        opts.refinement,
        opts.budget,
        opts.mode == CertMode::Interval,
    )?;
    let frames: Vec<Frame> = nodes.iter().map(|n| frame_of(ifs, x, x_box, n, opts)).collect();
    integrate_frames(ifs, spec, &frames, opts)
}

fn check_inputs(ifs: &Ifs, spec: &KernelSpec, x: &Point) -> Result<()> {
    if spec.space != *ifs.space() {
        return Err(Error::UnsupportedSpace("kernel and IFS live on different groups".into()));
    }
    ifs.space().check(x)
}

fn integrate_frames(ifs: &Ifs, spec: &KernelSpec, frames: &[Frame], opts: &QuadratureOptions) -> Result<IntegralEstimate> {
    let contributions = evaluate_all(ifs, spec, frames, opts)?;
    let comps = spec.num_components();
    let parallel = opts.threads > 1 && cfg!(feature = "parallel");
    let mut value = vec![0.0; comps];
    let mut error = vec![0.0; comps];
    for c in 0..comps {
        if parallel {
            value[c] = chunked_sum(&contributions, |k| k.value[c]);
            error[c] = chunked_sum(&contributions, |k| k.error[c]);
        } else {
            value[c] = contributions.iter().fold(0.0, |s, k| s + k.value[c]);
            error[c] = contributions.iter().fold(0.0, |s, k| s + k.error[c]);
        }
    }
    let (interval, agree) = if opts.mode == CertMode::Interval {
        let mut sums = vec![Interval::point(0.0); comps];
        let mut pos = vec![true; comps];
        let mut neg = vec![true; comps];
        for k in &contributions {
            let iv = k.interval.as_ref().expect("interval mode encloses every node");
            for c in 0..comps {
                sums[c] = sums[c] + iv[c];
                pos[c] &= iv[c].is_positive();
                neg[c] &= iv[c].is_negative();
            }
        }
        (Some(sums), Some((pos, neg)))
    } else {
        (None, None)
    };
    let certified_sign: Vec<Sign> = (0..comps)
        .map(|c| match &interval {
            Some(s) if s[c].is_positive() => Sign::Positive,
            Some(s) if s[c].is_negative() => Sign::Negative,
            Some(_) => Sign::None,
            None if value[c].abs() > error[c] && value[c] > 0.0 => Sign::Positive,
            None if value[c].abs() > error[c] && value[c] < 0.0 => Sign::Negative,
            None => Sign::None,
        })
        .collect();
    let cylinders_agree = agree.map(|(pos, neg)| {
        (0..comps)
            .map(|c| match certified_sign[c] {
                Sign::Positive => pos[c],
                Sign::Negative => neg[c],
                Sign::None => false,
            })
            .collect()
    });
    Ok(IntegralEstimate {
        value,
        error_indicator: error,
        depth_used: frames.iter().map(|f| f.word.len()).max().unwrap_or(0),
        nodes: frames.len() as u64,
        certified_sign,
        mode: opts.mode,
        interval,
        cylinders_agree,
    })
}

fn evaluate_all(ifs: &Ifs, spec: &KernelSpec, frames: &[Frame], opts: &QuadratureOptions) -> Result<Vec<Contribution>> {
    #[cfg(feature = "parallel")]
    if opts.threads > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        return pool.install(|| frames.par_iter().map(|f| evaluate_frame(ifs, spec, f, opts)).collect());
    }
    frames.iter().map(|f| evaluate_frame(ifs, spec, f, opts)).collect()
}

const CHUNK: usize = 1024;

fn chunked_sum<F: Fn(&Contribution) -> f64 + Sync>(cs: &[Contribution], f: F) -> f64 {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let partial: Vec<f64> = cs
            .par_chunks(CHUNK)
            .map(|ch| neumaier(ch.iter().map(&f)))
            .collect();
        neumaier(partial)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let partial: Vec<f64> = cs.chunks(CHUNK).map(|ch| neumaier(ch.iter().map(&f))).collect();
        neumaier(partial)
    }
}

/// `int_region K(x, y) dmu(y)`.
pub fn integrate_region(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    x: &Point,
    region: &Region,
    opts: &QuadratureOptions,
) -> Result<IntegralEstimate> {
    integrate_enclosed(ifs, measure, spec, x, &point_box(x), region, opts)
}

/// Rigorous enclosure of the fixed point of `S_w`.
pub(crate) fn fixed_point_box(ifs: &Ifs, w: &Word) -> Vec<Interval> {
    let space = ifs.space();
    let enc = w.indices().iter().fold(IntervalSimilarity::identity(space), |acc, &i| {
        acc.then(space, &ifs.maps()[i])
    });
    let one = Interval::point(1.0);
    let h = space.horizontal_len();
    enc.translation
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if i < h {
                a / (one - enc.ratio)
            } else {
                a / (one - enc.ratio.sqr())
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub word: Word,
    pub fixed_point: Point,
    /// `eta_k = int_{C_{w^k} \ C_{w^{k+1}}} K(x, y) dmu(y)`, `k = 0..=k_max`.
    pub eta: Vec<Vec<f64>>,
    pub estimates: Vec<IntegralEstimate>,
}

impl EtaReport {
    /// Largest relative deviation `|eta_k - eta_0| / |eta_0|` (max norm).
    pub fn max_relative_spread(&self) -> f64 {
        let e0 = &self.eta[0];
        let scale = e0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.eta
            .iter()
            .map(|e| e.iter().zip(e0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
            .fold(0.0, f64::max)
            / scale
    }
}

/// Annular integrals about the fixed point of `w`.
pub fn telescope_eta(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    w: &Word,
    k_max: usize,
    opts: &QuadratureOptions,
) -> Result<EtaReport> {
    let x = ifs.fixed_point(w)?;
    let x_box = fixed_point_box(ifs, w);
    check_inputs(ifs, spec, &x)?;
    let space = *ifs.space();
    let region = Region::Annulus { word: w.clone(), k: 0 };
    let enclose = opts.mode == CertMode::Interval;
    let nodes = build_nodes(ifs, measure, &region, opts.refinement, opts.budget, enclose)?;
    let base: Vec<Frame> = nodes.iter().map(|n| frame_of(ifs, &x, &x_box, n, opts)).collect();
    let step = ifs.word_compose(w)?.ratio;
    let step_iv = w.indices().iter().fold(IntervalSimilarity::identity(&space), |acc, &i| {
        acc.then(&space, &ifs.maps()[i])
    });
    let mut lambda = 1.0;
    let mut lambda_iv = Interval::point(1.0);
    let mut estimates = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let stem = w.power(k);
        let frames: Vec<Frame> = base
            .iter()
            .map(|f| {
                let word = stem.concat(&f.word);
                Frame {
                    rel: group::dilation_by(&space, lambda, &f.rel),
                    rel_box: f.rel_box.as_ref().map(|b| group::dilation_by(&space, lambda_iv, b)),
                    radius: f.radius * lambda,
                    mass: measure.mass(&word),
                    word,
                }
            })
            .collect();
        estimates.push(integrate_frames(ifs, spec, &frames, opts)?);
        lambda *= step;
        lambda_iv = lambda_iv * step_iv.ratio;
    }
    Ok(EtaReport {
        word: w.clone(),
        fixed_point: x,
        eta: estimates.iter().map(|e| e.value.clone()).collect(),
        estimates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    NonzeroCertified,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentVerdict {
    pub component: usize,
    pub value: f64,
    pub error_indicator: f64,
    pub interval: Option<Interval>,
    pub certified_sign: Sign,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub word: Word,
    /// The word with one-based indices.
    pub word_label: String,
    pub fixed_point: Point,
    pub per_component: Vec<ComponentVerdict>,
    pub eta_sequence: Vec<Vec<f64>>,
    pub estimate: IntegralEstimate,
}

impl CriterionReport {
    pub fn any_certified(&self) -> bool {
        self.per_component
            .iter()
            .any(|c| c.verdict == Verdict::NonzeroCertified)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionOptions {
    pub quadrature: QuadratureOptions,
    pub separation_depth: usize,
    /// Annular integrals reported beyond `eta_0`.
    pub eta_generations: usize,
}

/// Evaluates `int_{C \ C_w} K(x, y) dmu(y)` at `x = fix(S_w)` for each word.
/// A nonzero certified component proves the maximal singular integral
/// operator unbounded on `L^2(mu)`.
pub fn check_unboundedness(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    words: &[Word],
    opts: &CriterionOptions,
) -> Result<(SeparationReport, Vec<CriterionReport>)> {
    let sep = separation_report(ifs, opts.separation_depth)?;
    sep.require_disjoint()?;
    let reports = words
        .iter()
        .map(|w| criterion_for_word(ifs, measure, spec, w, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok((sep, reports))
}

pub(crate) fn criterion_for_word(
    ifs: &Ifs,
    measure: &SelfSimilarMeasure,
    spec: &KernelSpec,
    w: &Word,
    opts: &CriterionOptions,
) -> Result<CriterionReport> {
    let eta = telescope_eta(ifs, measure, spec, w, opts.eta_generations, &opts.quadrature)?;
    let est = eta.estimates[0].clone();
    let per_component = (0..est.value.len())
        .map(|c| ComponentVerdict {
            component: c,
            value: est.value[c],
            error_indicator: est.error_indicator[c],
            interval: est.interval.as_ref().map(|iv| iv[c]),
            certified_sign: est.certified_sign[c],
            verdict: if est.certified_sign[c] == Sign::None {
                Verdict::Inconclusive
            } else {
                Verdict::NonzeroCertified
            },
        })
        .collect();
    Ok(CriterionReport {
        word: w.clone(),
        word_label: w.one_based_label(),
        fixed_point: eta.fixed_point.clone(),
        per_component,
        eta_sequence: eta.eta,
        estimate: est,
    })
}
