use fractal_sio::cantor::{solve_r_for_dimension, CantorParams};
use fractal_sio::operators::{maximal_operator_estimate, truncated_operator};
use fractal_sio::phi::{solve_phi, verify_phi, PhiField};
use fractal_sio::pipeline::{
    removability_pipeline, PipelineOptions, STAGE_CRITERION, STAGE_NUMERATOR, STAGE_PARAMETERS, STAGE_PHI,
    STAGE_SEPARATION,
};
use fractal_sio::quadrature::{
    check_unboundedness, integrate_region, telescope_eta, CriterionOptions, Region, Verdict,
};
use fractal_sio::Refinement;
use serde_json::{json, Value};

use crate::config::{Prepared, RunConfig};
use crate::report::{CliError, Determinism, RunReport, EXIT_CERTIFIED, EXIT_INCONCLUSIVE, EXIT_INVALID};

fn calibration(p: &Prepared) -> Value {
    json!({
        "a_emp": p.quadrature.a_emp,
        "size_const": p.quadrature.size_const,
        "safety_factor": p.quadrature.safety_factor,
        "samples": fractal_sio::quadrature::QuadratureOptions::CALIBRATION_SAMPLES,
    })
}

fn common_outputs(p: &Prepared) -> Value {
    json!({
        "kernel": p.spec,
        "calibration": calibration(p),
        "dimension": p.measure.s,
        "base_radius": p.ifs.base_radius(),
        "diam_bound": p.ifs.base_diam(),
    })
}

fn finish(command: &str, p: &Prepared, threads: usize, mut outputs: Value, exit_code: i32) -> Result<RunReport, CliError> {
    if let (Value::Object(out), Value::Object(common)) = (&mut outputs, common_outputs(p)) {
        for (k, v) in common {
            out.entry(k).or_insert(v);
        }
    }
    Ok(RunReport::new(
        command,
        serde_json::to_value(&p.config)?,
        outputs,
        Determinism::new(p.config.seed, threads),
        exit_code,
    ))
}

pub fn check_unbounded(config: &RunConfig, threads: usize) -> Result<RunReport, CliError> {
    let p = config.prepare(threads)?;
    let opts = CriterionOptions {
        quadrature: p.quadrature.clone(),
        separation_depth: p.config.separation_depth,
        eta_generations: p.config.eta_generations,
    };
    let (sep, reports) = check_unboundedness(&p.ifs, &p.measure, &p.spec, p.words(), &opts)?;
    let certified = reports.iter().any(|r| {
        p.components()
            .iter()
            .any(|&c| r.per_component[c].verdict == Verdict::NonzeroCertified)
    });
    let code = if certified { EXIT_CERTIFIED } else { EXIT_INCONCLUSIVE };
    let outputs = json!({
        "certified": certified,
        "separation": sep,
        "reports": reports,
    });
    finish("check-unbounded", &p, threads, outputs, code)
}

pub fn integrate(config: &RunConfig, threads: usize) -> Result<RunReport, CliError> {
    let p = config.prepare(threads)?;
    let x = p.point()?;
    let region = p.config.region.clone().unwrap_or(Region::Whole);
    let est = integrate_region(&p.ifs, &p.measure, &p.spec, &x, &region, &p.quadrature)?;
    finish("integrate", &p, threads, json!({ "region": region, "estimate": est }), EXIT_CERTIFIED)
}

pub fn telescope(config: &RunConfig, threads: usize) -> Result<RunReport, CliError> {
    let p = config.prepare(threads)?;
    let reports = p
        .words()
        .iter()
        .map(|w| telescope_eta(&p.ifs, &p.measure, &p.spec, w, p.config.k_max, &p.quadrature))
        .collect::<Result<Vec<_>, _>>()?;
    let spreads: Vec<f64> = reports.iter().map(|r| r.max_relative_spread()).collect();
    finish(
        "telescope",
        &p,
        threads,
        json!({ "telescopes": reports, "max_relative_spread": spreads }),
        EXIT_CERTIFIED,
    )
}

pub fn maximal(config: &RunConfig, threads: usize) -> Result<RunReport, CliError> {
    let p = config.prepare(threads)?;
    let x = p.point()?;
    let grid = p.eps_grid()?;
    let est = maximal_operator_estimate(&p.ifs, &p.measure, &p.spec, &x, &grid, &p.quadrature)?;
    finish("maximal", &p, threads, json!({ "maximal": est }), EXIT_CERTIFIED)
}

/// Parameters of the Heisenberg Cantor family given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorArgs {
    pub n: usize,
    pub big_n: usize,
    /// `None` for `2n + 1`.
    pub target_a: Option<f64>,
    /// Explicit ratio, overriding the dimension solve.
    pub r: Option<f64>,
}

impl CantorArgs {
    fn target(&self) -> f64 {
        self.target_a.unwrap_or((2 * self.n + 1) as f64)
    }

    fn params(&self) -> Result<CantorParams, CliError> {
        let params = match self.r {
            Some(r) => CantorParams::new(self.n, self.big_n, r),
            None => solve_r_for_dimension(self.n, self.big_n, self.target())?.params(),
        };
        params.validate()?;
        Ok(params)
    }

    fn echo(&self) -> Value {
        json!({ "n": self.n, "N": self.big_n, "target_a": self.target(), "r": self.r })
    }
}

pub fn dim_solve(args: &CantorArgs) -> Result<RunReport, CliError> {
    let solve = solve_r_for_dimension(args.n, args.big_n, args.target())?;
    let code = if solve.feasible { EXIT_CERTIFIED } else { EXIT_INVALID };
    let outputs = json!({
        "solve": solve,
        "failed_checks": solve.failed_checks(),
        "round_trip_dimension": solve.round_trip(),
    });
    Ok(RunReport::new("dim-solve", args.echo(), outputs, Determinism::new(0, 1), code))
}

pub fn phi_field(args: &CantorArgs, resolution: usize, tol: f64) -> Result<PhiField, CliError> {
    if !(2..=4096).contains(&resolution) {
        return Err(CliError::Invalid("resolution must lie in 2..=4096".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::Invalid("tol must be positive".into()));
    }
    Ok(solve_phi(&args.params()?, resolution, tol)?)
}

pub fn phi_solve(args: &CantorArgs, resolution: usize, tol: f64) -> Result<RunReport, CliError> {
    let phi = phi_field(args, resolution, tol)?;
    let check = verify_phi(&phi);
    let code = if check.pass { EXIT_CERTIFIED } else { EXIT_INCONCLUSIVE };
    let mut inputs = args.echo();
    inputs["resolution"] = json!(resolution);
    inputs["tol"] = json!(tol);
    let outputs = json!({
        "r": phi.problem.r,
        "report": check,
        "iterations": phi.iterations,
        "residual_history": phi.residual_history,
        "contraction_factors": phi.contraction_factors(),
        "r_squared": phi.problem.r * phi.problem.r,
    });
    Ok(RunReport::new("phi-solve", inputs, outputs, Determinism::new(0, 1), code))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CantorRun {
    pub args: CantorArgs,
    pub resolution: usize,
    pub budget: u64,
    pub c_q: Option<f64>,
    pub dry_run: bool,
}

pub fn cantor_hn(run: &CantorRun, threads: usize) -> Result<RunReport, CliError> {
    if run.args.r.is_some() {
        return Err(CliError::Invalid("cantor-hn solves r from the target dimension".into()));
    }
    let opts = PipelineOptions {
        c_q: run.c_q,
        target_a: run.args.target_a,
        resolution: run.resolution,
        threads,
        ..PipelineOptions::default()
    };
    let mut inputs = run.args.echo();
    inputs["resolution"] = json!(run.resolution);
    inputs["budget"] = json!(run.budget);
    inputs["options"] = serde_json::to_value(&opts)?;
    let determinism = Determinism::new(0, threads);
    if run.dry_run {
        let stages = [STAGE_PARAMETERS, STAGE_SEPARATION, STAGE_PHI, STAGE_NUMERATOR, STAGE_CRITERION];
        let outputs = json!({ "dry_run": true, "stages": stages });
        return Ok(RunReport::new("cantor-hn", inputs, outputs, determinism, EXIT_CERTIFIED));
    }
    let rep = removability_pipeline(run.args.n, run.args.big_n, run.budget, &opts)?;
    let code = if rep.criterion_certified {
        EXIT_CERTIFIED
    } else if rep.failed_stage.as_deref() == Some(STAGE_PARAMETERS) {
        EXIT_INVALID
    } else {
        EXIT_INCONCLUSIVE
    };
    Ok(RunReport::new("cantor-hn", inputs, serde_json::to_value(&rep)?, determinism, code))
}

/// CSV tables for plotting.
pub mod plot {
    use super::*;

    fn write(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Invalid(e.to_string()))
    }

    fn columns(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|c| format!("{prefix}_{c}")).collect()
    }

    /// `k,component_0,..` with one row per annulus of the first word.
    pub fn eta(config: &RunConfig, threads: usize) -> Result<String, CliError> {
        let p = config.prepare(threads)?;
        let w = &p.words()[0];
        let rep = telescope_eta(&p.ifs, &p.measure, &p.spec, w, p.config.k_max, &p.quadrature)?;
        let mut header = vec!["k".to_string()];
        header.extend(columns("component", p.spec.num_components()));
        let rows = rep
            .eta
            .iter()
            .enumerate()
            .map(|(k, e)| std::iter::once(k.to_string()).chain(e.iter().map(|v| v.to_string())).collect())
            .collect();
        write(header, rows)
    }

    /// `eps,norm,component_0,..` over the configured grid.
    pub fn eps(config: &RunConfig, threads: usize) -> Result<String, CliError> {
        let p = config.prepare(threads)?;
        let x = p.point()?;
        let mut header = vec!["eps".to_string(), "norm".to_string()];
        header.extend(columns("component", p.spec.num_components()));
        let mut rows = Vec::new();
        for eps in p.eps_grid()? {
            let t = truncated_operator(&p.ifs, &p.measure, &p.spec, &x, eps, &p.quadrature)?;
            let norm = t.value.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut row = vec![eps.to_string(), norm.to_string()];
            row.extend(t.value.iter().map(|v| v.to_string()));
            rows.push(row);
        }
        write(header, rows)
    }

    /// `depth,nodes,value_0,..,error_0,..` for the criterion integral of
    /// the first word at depths `1..=d`.
    pub fn convergence(config: &RunConfig, threads: usize) -> Result<String, CliError> {
        let p = config.prepare(threads)?;
        let Refinement::Depth(max) = p.config.refinement else {
            return Err(CliError::Invalid("convergence plots need a depth refinement".into()));
        };
        let w = p.words()[0].clone();
        let x = p.ifs.fixed_point(&w)?;
        let comps = p.spec.num_components();
        let mut header = vec!["depth".to_string(), "nodes".to_string()];
        header.extend(columns("value", comps));
        header.extend(columns("error", comps));
        let mut rows = Vec::new();
        for d in 1..=max {
            let mut opts = p.quadrature.clone();
            opts.refinement = Refinement::Depth(d);
            let est = integrate_region(&p.ifs, &p.measure, &p.spec, &x, &Region::ComplementOf { word: w.clone() }, &opts)?;
            let mut row = vec![d.to_string(), est.nodes.to_string()];
            row.extend(est.value.iter().map(|v| v.to_string()));
            row.extend(est.error_indicator.iter().map(|v| v.to_string()));
            rows.push(row);
        }
        write(header, rows)
    }

    /// `w_1,..,w_2n,phi` with one row per grid point.
    pub fn phi(args: &CantorArgs, resolution: usize, tol: f64) -> Result<String, CliError> {
        let field = phi_field(args, resolution, tol)?;
        let dim = 2 * args.n;
        let mut header: Vec<String> = (1..=dim).map(|i| format!("w_{i}")).collect();
        header.push("phi".into());
        let rows = field
            .grid_rows()
            .into_iter()
            .map(|(w, v)| w.iter().map(|x| x.to_string()).chain(std::iter::once(v.to_string())).collect())
            .collect();
        write(header, rows)
    }
}
