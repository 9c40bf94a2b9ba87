//! Browser demo: the separating function of the Heisenberg Cantor set,
//! points of self-similar sets and telescoped annular integrals.

use fractal_sio::cantor::{build_similarities, solve_r_for_dimension};
use fractal_sio::config::gasket;
use fractal_sio::ifs::enumerate_cylinders;
use fractal_sio::phi::{solve_phi, verify_phi};
use fractal_sio::quadrature::{telescope_eta, CertMode, QuadratureOptions};
use fractal_sio::{GroupSpace, KernelSpec, Refinement, SelfSimilarMeasure, Word};
use wasm_bindgen::prelude::*;

const MAX_POINTS: u64 = 2_000_000;

fn js(e: fractal_sio::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Separating function on a square grid for `n = 1`.
#[wasm_bindgen]
pub struct Heatmap {
    values: Vec<f64>,
    resolution: usize,
    r: f64,
    sup_norm: f64,
    residual: f64,
    bound: f64,
}

#[wasm_bindgen]
impl Heatmap {
    /// Row-major values, first coordinate slowest.
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[wasm_bindgen(getter)]
    pub fn r(&self) -> f64 {
        self.r
    }

    #[wasm_bindgen(getter, js_name = supNorm)]
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// The a priori bound `8 n r`.
    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Solves the separating function of the family with grid size `big_n`
/// at the ratio giving dimension 3.
#[wasm_bindgen(js_name = phiHeatmap)]
pub fn phi_heatmap(big_n: usize, resolution: usize) -> Result<Heatmap, JsError> {
    if !(2..=512).contains(&resolution) {
        return Err(JsError::new("resolution must lie in 2..=512"));
    }
    let solve = solve_r_for_dimension(1, big_n, 3.0).map_err(js)?;
    if !solve.feasible {
        return Err(JsError::new(&format!("infeasible parameters: {}", solve.failed_checks().join(", "))));
    }
    let field = solve_phi(&solve.params(), resolution, 1e-12).map_err(js)?;
    let check = verify_phi(&field);
    Ok(Heatmap {
        values: field.values,
        resolution,
        r: solve.r,
        sup_norm: check.sup_norm,
        residual: check.residual,
        bound: check.bound_8nr,
    })
}

/// Cylinder anchors of the triangle gasket with contraction `ratio` at
/// `depth`, flattened as `x0, y0, x1, y1, ..`.
#[wasm_bindgen(js_name = gasketPoints)]
pub fn gasket_points(ratio: f64, depth: usize) -> Result<Vec<f64>, JsError> {
    let (ifs, mu) = gasket(ratio).build().map_err(js)?;
    let cyl = enumerate_cylinders(&ifs, &mu, Refinement::Depth(depth), MAX_POINTS).map_err(js)?;
    Ok(cyl.iter().flat_map(|c| c.anchor.coords().to_vec()).collect())
}

/// First-generation anchors of the Heisenberg Cantor set with grid size
/// `big_n`, flattened as `x, y, t` triples.
#[wasm_bindgen(js_name = cantorPoints)]
pub fn cantor_points(big_n: usize) -> Result<Vec<f64>, JsError> {
    let solve = solve_r_for_dimension(1, big_n, 3.0).map_err(js)?;
    let ifs = build_similarities(&solve.params()).map_err(js)?;
    let mu = SelfSimilarMeasure::natural(&ifs);
    let cyl = enumerate_cylinders(&ifs, &mu, Refinement::Depth(1), MAX_POINTS).map_err(js)?;
    Ok(cyl.iter().flat_map(|c| c.anchor.coords().to_vec()).collect())
}

/// Annular integrals of `z^m / |z|^(m+1)` about the fixed point of map
/// `vertex` of the gasket, flattened as `k, re, im` rows for `k = 0..=k_max`.
#[wasm_bindgen(js_name = etaSweep)]
pub fn eta_sweep(ratio: f64, m: i32, vertex: usize, k_max: usize, depth: usize) -> Result<Vec<f64>, JsError> {
    if k_max > 16 || depth > 10 {
        return Err(JsError::new("k_max must not exceed 16 and depth must not exceed 10"));
    }
    let (ifs, mu) = gasket(ratio).build().map_err(js)?;
    if vertex >= ifs.len() {
        return Err(JsError::new("vertex must be 0, 1 or 2"));
    }
    let plane = GroupSpace::euclidean(2).map_err(js)?;
    let spec = KernelSpec::complex_power(plane, m, mu.s).map_err(js)?;
    let opts = QuadratureOptions::new(&spec, Refinement::Depth(depth))
        .map_err(js)?
        .with_mode(CertMode::Heuristic);
    let rep = telescope_eta(&ifs, &mu, &spec, &Word::new(vec![vertex]), k_max, &opts).map_err(js)?;
    Ok(rep
        .eta
        .iter()
        .enumerate()
        .flat_map(|(k, e)| [k as f64, e[0], e[1]])
        .collect())
}
