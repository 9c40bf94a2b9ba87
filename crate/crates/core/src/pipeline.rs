//! End-to-end evidence for the Heisenberg Cantor set of dimension `Q - 1`:
//! construction, separation, the separating function, a sign certificate
//! for the kernel numerator and the unboundedness criterion at the origin.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cantor::{build_similarities, solve_r_for_dimension};
use crate::error::{Error, Result};
use crate::ifs::{Refinement, SelfSimilarMeasure, Word};
use crate::interval::Interval;
use crate::kernel::{default_c_q, KernelSpec};
use crate::phi::{solve_phi, verify_phi, DEFAULT_RESOLUTION, DEFAULT_TOL};
use crate::quadrature::{
    criterion_for_word, node_boxes, CriterionOptions, QuadratureOptions, Region, Sign,
};
use crate::real::Real;
use crate::separation::separation_report;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    /// Kernel constant; `None` uses `2 - Q`.
    pub c_q: Option<f64>,
    /// Target dimension; `None` uses `2n + 1`.
    #[serde(default)]
    pub target_a: Option<f64>,
    pub resolution: usize,
    pub phi_tol: f64,
    pub separation_depth: usize,
    pub threads: usize,
    pub eta_generations: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            c_q: None,
            target_a: None,
            resolution: DEFAULT_RESOLUTION,
            phi_tol: DEFAULT_TOL,
            separation_depth: 2,
            threads: 1,
            eta_generations: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub budget: u64,
    pub r: f64,
    pub target_a: f64,
    pub c_q: f64,
    pub z_convention: String,
    pub criterion_certified: bool,
    pub certificate_sign: Option<Sign>,
    pub expected_sign: Sign,
    pub failed_stage: Option<String>,
    pub stages: Vec<Stage>,
}

impl PipelineReport {
    fn push(&mut self, name: &str, passed: bool, details: serde_json::Value) -> bool {
        self.stages.push(Stage {
            name: name.into(),
            passed,
            details,
        });
        if !passed && self.failed_stage.is_none() {
            self.failed_stage = Some(name.into());
        }
        passed
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }
}

pub const STAGE_PARAMETERS: &str = "parameters";
pub const STAGE_SEPARATION: &str = "separation";
pub const STAGE_PHI: &str = "phi";
pub const STAGE_NUMERATOR: &str = "numerator_sign";
pub const STAGE_CRITERION: &str = "criterion";

/// Counts of antichain boxes of `C \ S_0(C)` by the sign of the enclosure of
/// `q_{1+n} |q'|^2 + q_1 q_t` and of `q_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumeratorCertificate {
    pub nodes: usize,
    pub mass_cutoff: f64,
    pub strictly_positive: usize,
    pub nonnegative: usize,
    /// Boxes whose numerator enclosure has lower end exactly zero.
    pub touching_zero: usize,
    pub last_coordinate_positive: usize,
    pub min_numerator_lower: f64,
    pub min_last_coordinate_lower: f64,
    pub min_anchor_last_coordinate: f64,
}

impl NumeratorCertificate {
    pub fn all_strict(&self) -> bool {
        self.strictly_positive == self.nodes && self.last_coordinate_positive == self.nodes
    }

    /// Every box has a nonnegative numerator and positive last coordinate,
    /// and at least one box is strictly positive.
    pub fn nonnegative_certified(&self) -> bool {
        self.nodes > 0
            && self.nonnegative == self.nodes
            && self.last_coordinate_positive == self.nodes
            && self.strictly_positive > 0
    }
}

fn sign_of(x: f64) -> Sign {
    if x > 0.0 {
        Sign::Positive
    } else if x < 0.0 {
        Sign::Negative
    } else {
        Sign::None
    }
}

pub fn removability_pipeline(
    n: usize,
    big_n: usize,
    budget: u64,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    if n == 0 || big_n == 0 {
        return Err(Error::InvalidParameter("n and N must be positive".into()));
    }
    let target_a = opts.target_a.unwrap_or((2 * n + 1) as f64);
    let solve = solve_r_for_dimension(n, big_n, target_a)?;
    let space = solve.params().space();
    let c_q = opts.c_q.unwrap_or_else(|| default_c_q(&space));
    if !(c_q.is_finite() && c_q != 0.0) {
        return Err(Error::InvalidParameter(format!("c_Q must be finite and nonzero, got {c_q}")));
    }
    let expected_sign = sign_of(-c_q);
    let mut rep = PipelineReport {
        n,
        big_n,
        budget,
        r: solve.r,
        target_a,
        c_q,
        z_convention: "z_k = base-N digits of k-1 over N; residue 0 of j mod N^{2n} is k = N^{2n}".into(),
        criterion_certified: false,
        certificate_sign: None,
        expected_sign,
        failed_stage: None,
        stages: Vec::new(),
    };

    let params = solve.params();
    let built = if solve.feasible {
        build_similarities(&params).ok()
    } else {
        None
    };
    let ok = rep.push(
        STAGE_PARAMETERS,
        built.is_some(),
        json!({
            "r": solve.r,
            "map_count": solve.map_count,
            "feasible": solve.feasible,
            "checks": solve.checks,
            "failed_checks": solve.failed_checks(),
            "dimension": params.dimension(),
        }),
    );
    let Some(ifs) = built.filter(|_| ok) else {
        return Ok(rep);
    };

    let sep = separation_report(&ifs, opts.separation_depth)?;
    if !rep.push(STAGE_SEPARATION, sep.disjoint, serde_json::to_value(&sep)?) {
        return Ok(rep);
    }

    let phi = solve_phi(&params, opts.resolution, opts.phi_tol)?;
    let check = verify_phi(&phi);
    let phi_details = json!({
        "report": check,
        "iterations": phi.iterations,
        "residual_history": phi.residual_history,
        "contraction_factors": phi.contraction_factors(),
        "r_squared": params.r * params.r,
    });
    if !rep.push(STAGE_PHI, check.pass, phi_details) {
        return Ok(rep);
    }

    let count = solve.map_count as u64;
    if budget <= count {
        return Err(Error::InvalidParameter(format!(
            "budget {budget} must exceed the map count {count}"
        )));
    }
    let cutoff = count as f64 / budget as f64;
    let refinement = Refinement::MassCutoff(cutoff);
    let measure = SelfSimilarMeasure::natural(&ifs);
    let region = Region::ComplementOf {
        word: Word::new(vec![0]),
    };
    let node_budget = crate::ifs::node_budget_from_env().max(2 * budget);
    let cert = numerator_certificate(&ifs, &measure, &region, refinement, node_budget, n)?;
    let cert_ok = cert.nonnegative_certified();
    let mut cert_details = serde_json::to_value(&cert)?;
    cert_details["all_strict"] = json!(cert.all_strict());
    if !rep.push(STAGE_NUMERATOR, cert_ok, cert_details) {
        return Ok(rep);
    }

    let spec = KernelSpec::heisenberg_riesz(space, c_q)?.reflected();
    let quad = QuadratureOptions::new(&spec, refinement)?
        .with_threads(opts.threads)
        .with_budget(node_budget);
    let copts = CriterionOptions {
        quadrature: quad,
        separation_depth: opts.separation_depth,
        eta_generations: opts.eta_generations,
    };
    let crit = criterion_for_word(&ifs, &measure, &spec, &Word::new(vec![0]), &copts)?;
    let comp = &crit.per_component[n];
    let certified = comp.certified_sign != Sign::None && comp.certified_sign == expected_sign;
    rep.certificate_sign = Some(comp.certified_sign);
    rep.criterion_certified = certified;
    rep.push(
        STAGE_CRITERION,
        certified,
        json!({
            "component": n,
            "orientation": "reflected",
            "verdict": comp.verdict,
            "value": comp.value,
            "interval": comp.interval,
            "certified_sign": comp.certified_sign,
            "expected_sign": expected_sign,
            "cylinders_agree": crit.estimate.cylinders_agree.as_ref().map(|a| a[n]),
            "nodes": crit.estimate.nodes,
            "eta_sequence": crit.eta_sequence,
            "report": crit,
        }),
    );
    Ok(rep)
}

/// Interval enclosures of `q_{1+n} |q'|^2 + q_1 q_t` and `q_t` over the
/// antichain boxes of a region.
pub fn numerator_certificate(
    ifs: &crate::ifs::Ifs,
    measure: &SelfSimilarMeasure,
    region: &Region,
    refinement: Refinement,
    budget: u64,
    n: usize,
) -> Result<NumeratorCertificate> {
    let boxes = node_boxes(ifs, measure, region, refinement, budget)?;
    let cutoff = match refinement {
        Refinement::MassCutoff(c) => c,
        Refinement::Depth(_) => f64::NAN,
    };
    let mut cert = NumeratorCertificate {
        nodes: boxes.len(),
        mass_cutoff: cutoff,
        strictly_positive: 0,
        nonnegative: 0,
        touching_zero: 0,
        last_coordinate_positive: 0,
        min_numerator_lower: f64::INFINITY,
        min_last_coordinate_lower: f64::INFINITY,
        min_anchor_last_coordinate: f64::INFINITY,
    };
    for (node, b) in &boxes {
        let h2 = b[..2 * n].iter().fold(Interval::point(0.0), |s, &x| s + x.sqr());
        let t = b[2 * n];
        let num = b[n] * h2 + b[0] * t;
        cert.strictly_positive += num.is_positive() as usize;
        cert.nonnegative += (num.lo >= 0.0) as usize;
        cert.touching_zero += (num.lo == 0.0) as usize;
        cert.last_coordinate_positive += t.is_positive() as usize;
        cert.min_numerator_lower = cert.min_numerator_lower.min(num.lo);
        cert.min_last_coordinate_lower = cert.min_last_coordinate_lower.min(t.lo);
        cert.min_anchor_last_coordinate = cert.min_anchor_last_coordinate.min(node.anchor[2 * n]);
    }
    Ok(cert)
}
