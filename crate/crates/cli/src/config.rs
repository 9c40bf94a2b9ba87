//! Run configuration read from JSON.
//!
//! ```json
//! {"ifs": {"space": {"group": "euclidean", "d": 2}, "maps": [...]},
//!  "kernel": {"kernel": "complex_power", "m": 3},
//!  "refinement": {"depth": 6},
//!  "words": [[0], [1]]}
//! ```

use fractal_sio::config::{IfsConfig, KernelConfig};
use fractal_sio::kernel::Calibration;
use fractal_sio::quadrature::{CertMode, QuadratureOptions, Region};
use fractal_sio::{Ifs, KernelSpec, Point, Refinement, SelfSimilarMeasure, Word};
use serde::{Deserialize, Serialize};

use crate::report::CliError;

pub const MAX_DEPTH: usize = 40;
pub const MAX_K: usize = 64;
pub const MAX_SEPARATION_DEPTH: usize = 6;
pub const MAX_THREADS: usize = 1024;

fn default_refinement() -> Refinement {
    Refinement::Depth(6)
}

fn default_k_max() -> usize {
    3
}

fn default_separation_depth() -> usize {
    2
}

fn default_eta_generations() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ifs: IfsConfig,
    pub kernel: KernelConfig,
    /// `{"depth": d}` with `d <= 40` or `{"mass_cutoff": c}` with `0 < c < 1`.
    #[serde(default = "default_refinement")]
    pub refinement: Refinement,
    /// `"interval"` (default) or `"heuristic"`.
    #[serde(default)]
    pub mode: Option<CertMode>,
    /// Zero-based words; every single-letter word by default.
    #[serde(default)]
    pub words: Option<Vec<Word>>,
    /// Kernel components whose verdicts decide the exit code; all by default.
    #[serde(default)]
    pub components: Option<Vec<usize>>,
    #[serde(default)]
    pub point: Option<Point>,
    #[serde(default)]
    pub region: Option<Region>,
    /// Last annulus index of the telescoped sequence, at most 64.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    /// Depth of the separation certificate, 1 to 6.
    #[serde(default = "default_separation_depth")]
    pub separation_depth: usize,
    /// Annuli reported beyond the first by the criterion, at most 64.
    #[serde(default = "default_eta_generations")]
    pub eta_generations: usize,
    /// Node budget; `FRACTAL_SIO_NODE_BUDGET` or 5e7 by default.
    #[serde(default)]
    pub budget: Option<u64>,
    /// Seed of the Holder constant calibration.
    #[serde(default)]
    pub seed: u64,
}

/// A configuration with its objects built and defaults resolved.
pub struct Prepared {
    pub config: RunConfig,
    pub ifs: Ifs,
    pub measure: SelfSimilarMeasure,
    pub spec: KernelSpec,
    pub quadrature: QuadratureOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Builds the set, measure and kernel, checks every bound and fills in
    /// the defaults into the echoed config.
    pub fn prepare(&self, threads: usize) -> Result<Prepared, CliError> {
        if threads == 0 || threads > MAX_THREADS {
            return Err(CliError::Invalid(format!("threads must lie in 1..={MAX_THREADS}")));
        }
        self.refinement.validate()?;
        if let Refinement::Depth(d) = self.refinement {
            if d > MAX_DEPTH {
                return Err(CliError::Invalid(format!("depth {d} exceeds {MAX_DEPTH}")));
            }
        }
        if self.k_max > MAX_K || self.eta_generations > MAX_K {
            return Err(CliError::Invalid(format!("k_max and eta_generations must not exceed {MAX_K}")));
        }
        if !(1..=MAX_SEPARATION_DEPTH).contains(&self.separation_depth) {
            return Err(CliError::Invalid(format!(
                "separation_depth must lie in 1..={MAX_SEPARATION_DEPTH}"
            )));
        }
        if let Some(grid) = &self.eps_grid {
            if grid.is_empty() || grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                return Err(CliError::Invalid("eps_grid must be a nonempty list of positive numbers".into()));
            }
        }
        if self.budget == Some(0) {
            return Err(CliError::Invalid("budget must be at least 1".into()));
        }
        let (ifs, measure) = self.ifs.build()?;
        let spec = self.kernel.to_spec(*ifs.space())?;
        let words = match &self.words {
            Some(w) if w.is_empty() => return Err(CliError::Invalid("words must not be empty".into())),
            Some(w) => w.clone(),
            None => (0..ifs.len()).map(|i| Word::new(vec![i])).collect(),
        };
        for w in &words {
            if w.is_empty() || w.indices().iter().any(|&i| i >= ifs.len()) {
                return Err(CliError::Invalid(format!("word {w} is empty or out of range")));
            }
        }
        let comps = spec.num_components();
        let components = self.components.clone().unwrap_or_else(|| (0..comps).collect());
        if components.is_empty() || components.iter().any(|&c| c >= comps) {
            return Err(CliError::Invalid(format!("components must be nonempty indices below {comps}")));
        }
        let mode = self.mode.unwrap_or(CertMode::Interval);
        let mut quadrature = QuadratureOptions::new(&spec, self.refinement)?
            .with_mode(mode)
            .with_threads(threads);
        if let Some(b) = self.budget {
            quadrature = quadrature.with_budget(b);
        }
        if self.seed != QuadratureOptions::CALIBRATION_SEED {
            let cal = Calibration::for_kernel(&spec, QuadratureOptions::CALIBRATION_SAMPLES, self.seed)?;
            quadrature.a_emp = cal.a_emp;
            quadrature.size_const = cal.size_const;
            quadrature.safety_factor = cal.safety_factor;
        }
        let mut config = self.clone();
        config.mode = Some(mode);
        config.words = Some(words);
        config.components = Some(components);
        config.budget = Some(quadrature.budget);
        Ok(Prepared {
            config,
            ifs,
            measure,
            spec,
            quadrature,
        })
    }
}

impl Prepared {
    pub fn words(&self) -> &[Word] {
        self.config.words.as_deref().unwrap_or_default()
    }

    pub fn components(&self) -> &[usize] {
        self.config.components.as_deref().unwrap_or_default()
    }

    pub fn point(&self) -> Result<Point, CliError> {
        self.config
            .point
            .clone()
            .ok_or_else(|| CliError::Invalid("this command needs \"point\" in the config".into()))
    }

    pub fn eps_grid(&self) -> Result<Vec<f64>, CliError> {
        self.config
            .eps_grid
            .clone()
            .ok_or_else(|| CliError::Invalid("this command needs \"eps_grid\" in the config".into()))
    }
}
