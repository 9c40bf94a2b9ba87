//! The Heisenberg Cantor sets `C_{r,N}`: one map `S_0 = delta_r` well
//! separated from `N^{2n+2}/2` maps `S_j = tau_{(z, 1/2 + i/N^2)} o delta_r`
//! stacked over the grid points `z in {0, 1/N, .., (N-1)/N}^{2n}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupSpace, Point};
use crate::ifs::{similarity_dimension, Ifs, Similarity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub r: f64,
}

impl CantorParams {
    pub fn new(n: usize, big_n: usize, r: f64) -> Self {
        CantorParams { n, big_n, r }
    }

    pub fn space(&self) -> GroupSpace {
        GroupSpace::Heisenberg { n: self.n }
    }

    /// `N^{2n}`, the number of grid points `z_j`.
    pub fn grid_count(&self) -> usize {
        self.big_n.pow(2 * self.n as u32)
    }

    /// `N^{2n+2}/2 + 1`.
    pub fn map_count(&self) -> usize {
        self.big_n.pow(2 * self.n as u32 + 2) / 2 + 1
    }

    /// Grid point `z_k` for `k = 1..=N^{2n}`: base-`N` digits of `k - 1`,
    /// axis 0 most significant, divided by `N`.
    pub fn z_point(&self, k: usize) -> Vec<f64> {
        let dim = 2 * self.n;
        let mut rest = k - 1;
        let mut z = vec![0.0; dim];
        for i in (0..dim).rev() {
            z[i] = (rest % self.big_n) as f64 / self.big_n as f64;
            rest /= self.big_n;
        }
        z
    }

    /// Grid index `k` of the map `S_j`, `j >= 1`; the residue `0` of
    /// `j mod N^{2n}` stands for `k = N^{2n}`.
    pub fn z_index_of_map(&self, j: usize) -> usize {
        let g = self.grid_count();
        match j % g {
            0 => g,
            k => k,
        }
    }

    /// Vertical level `i` of the map `S_j`, `j >= 1`.
    pub fn level_of_map(&self, j: usize) -> usize {
        (j - 1) / self.grid_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n >= 1 is required".into()));
        }
        if self.big_n < 2 || self.big_n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "N must be an even integer >= 2, got {}",
                self.big_n
            )));
        }
        if !(self.r > 0.0) {
            return Err(Error::InvalidParameter(format!("r must be positive, got {}", self.r)));
        }
        if !(self.r < 1.0 / self.big_n as f64) {
            return Err(Error::InvalidParameter(format!(
                "violated r < 1/N: r = {}, 1/N = {}",
                self.r,
                1.0 / self.big_n as f64
            )));
        }
        Ok(())
    }

    /// Similarity dimension `log(N^{2n+2}/2 + 1) / log(1/r)`.
    pub fn dimension(&self) -> f64 {
        (self.map_count() as f64).ln() / (1.0 / self.r).ln()
    }
}

/// `S_0, .., S_{N^{2n+2}/2}` in index order.
pub fn build_similarities(params: &CantorParams) -> Result<Ifs> {
    params.validate()?;
    let space = params.space();
    let n_big = params.big_n as f64;
    let mut maps = Vec::with_capacity(params.map_count());
    maps.push(Similarity::new(&space, space.identity(), params.r)?);
    for j in 1..params.map_count() {
        let mut q = params.z_point(params.z_index_of_map(j));
        q.push(0.5 + params.level_of_map(j) as f64 / (n_big * n_big));
        maps.push(Similarity::new(&space, Point::new(q), params.r)?);
    }
    Ifs::new(space, maps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl Check {
    fn less(name: &str, lhs: f64, rhs: f64) -> Check {
        Check {
            name: name.into(),
            lhs,
            rhs,
            passed: lhs < rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSolve {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub target_a: f64,
    pub r: f64,
    pub map_count: usize,
    pub feasible: bool,
    pub checks: Vec<Check>,
}

/// `r = (N^{2n+2}/2 + 1)^{-1/a}` and the itemized feasibility checks
/// `r < 1/N`, `1/N < 1/2`, `r < 1/(16 n)` and `N` even.
pub fn solve_r_for_dimension(n: usize, big_n: usize, target_a: f64) -> Result<DimensionSolve> {
    if !(target_a > 0.0 && target_a.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "target dimension must be positive, got {target_a}"
        )));
    }
    if n == 0 || big_n == 0 {
        return Err(Error::InvalidParameter("n and N must be positive".into()));
    }
    let params = CantorParams::new(n, big_n, 0.0);
    let count = params.map_count();
    let r = (count as f64).powf(-1.0 / target_a);
    let inv_n = 1.0 / big_n as f64;
    let checks = vec![
        Check::less("r < 1/N", r, inv_n),
        Check::less("1/N < 1/2", inv_n, 0.5),
        Check::less("r < 1/(16n)", r, 1.0 / (16.0 * n as f64)),
        Check {
            name: "N even".into(),
            lhs: (big_n % 2) as f64,
            rhs: 0.0,
            passed: big_n % 2 == 0,
        },
    ];
    Ok(DimensionSolve {
        n,
        big_n,
        target_a,
        r,
        map_count: count,
        feasible: checks.iter().all(|c| c.passed),
        checks,
    })
}

impl DimensionSolve {
    pub fn params(&self) -> CantorParams {
        CantorParams::new(self.n, self.big_n, self.r)
    }

    /// Similarity dimension of `map_count` equal ratios `r`.
    pub fn round_trip(&self) -> f64 {
        similarity_dimension(&vec![self.r; self.map_count])
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_family_by_hand() {
        let p = CantorParams::new(1, 2, 0.1);
        let ifs = build_similarities(&p).unwrap();
        assert_eq!(ifs.len(), 9);
        assert_eq!(ifs.maps()[0].translation, Point::from([0.0, 0.0, 0.0]));
        assert!(ifs.maps().iter().all(|m| m.ratio == 0.1));
        for j in 1..=4 {
            assert_eq!(ifs.maps()[j].translation[2], 0.5);
        }
        for j in 5..=8 {
            assert_eq!(ifs.maps()[j].translation[2], 0.75);
        }
        assert_eq!(ifs.maps()[1].translation, Point::from([0.0, 0.0, 0.5]));
        assert_eq!(ifs.maps()[4].translation, Point::from([0.5, 0.5, 0.5]));
    }

    #[test]
    fn z_enumeration_is_a_bijection() {
        let p = CantorParams::new(1, 4, 0.1);
        let mut seen: Vec<Vec<u64>> = (1..=16)
            .map(|k| p.z_point(k).iter().map(|x| (x * 4.0) as u64).collect())
            .collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 16);
        assert_eq!(p.z_index_of_map(16), 16);
        assert_eq!(p.z_index_of_map(17), 1);
    }

    #[test]
    fn violated_inequalities_are_named() {
        let err = build_similarities(&CantorParams::new(1, 4, 0.3)).unwrap_err();
        assert!(err.to_string().contains("r < 1/N"));
        assert!(build_similarities(&CantorParams::new(1, 3, 0.1)).is_err());
    }

    #[test]
    fn dimension_solve_examples() {
        let s = solve_r_for_dimension(1, 18, 3.0).unwrap();
        assert_eq!(s.map_count, 52489);
        assert!((s.r - 0.026_708_155_762_779).abs() < 1e-13);
        assert!(s.feasible);
        let s = solve_r_for_dimension(1, 2, 3.0).unwrap();
        assert!((s.r - 9f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!(!s.feasible);
        assert_eq!(s.failed_checks(), vec!["1/N < 1/2", "r < 1/(16n)"]);
    }
}
