//! Degree-adaptive sparse PCE construction, prediction, and serialization.
//!
//! The builder walks total degrees p = 1..p_max; per degree it ranks the
//! candidate set (OMP, LARS, or a precomputed resampling score order), grows
//! the ranked prefix with OLS refits, keeps the prefix size minimizing the
//! LOO error, and stops after the per-degree minimum worsens twice in a row.
//! The returned model is the best (p, J) pair seen anywhere in the walk.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::MultiIndex;
use crate::engine::degree::{
    run_degree_loop, run_scored_loop, BuildDef, BuildMode, DegreeRecord, LoopOptions,
};
use crate::engine::path::RankOptions;
use crate::error::{Error, Result};
use crate::prob::{ExperimentalDesign, InputModel, Marginal};

/// Serialized model schema version.
pub const MODEL_VERSION: u32 = 1;

/// Where the candidate ranking comes from.
#[derive(Debug, Clone)]
pub enum RankSource<'a> {
    Omp,
    Lars,
    /// A precomputed ranking, e.g. the resampling score order.
    Scored(&'a [MultiIndex]),
}

impl RankSource<'_> {
    fn name(&self) -> &'static str {
        match self {
            RankSource::Omp => "omp",
            RankSource::Lars => "lars",
            RankSource::Scored(_) => "scored",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Degree cap for the adaptive walk.
    pub p_max: usize,
    /// Candidate sets larger than this end the walk.
    pub max_basis: u64,
    /// Score by raw residual correlations instead of unit-norm ones.
    pub raw_correlation: bool,
    /// Memory budget for resampling scans.
    pub scan_budget_bytes: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            p_max: 20,
            max_basis: 2_000_000,
            raw_correlation: false,
            scan_budget_bytes: 1_500_000_000,
        }
    }
}

impl BuildOptions {
    pub(crate) fn loop_options(&self) -> LoopOptions {
        LoopOptions {
            p_max: self.p_max,
            max_basis: self.max_basis,
            scan_budget_bytes: self.scan_budget_bytes,
            rank: RankOptions {
                raw_correlation: self.raw_correlation,
            },
        }
    }
}

/// Builder provenance carried inside the model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub ranker: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_set: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// A fitted sparse polynomial chaos model.
#[derive(Debug, Clone, PartialEq)]
pub struct PceModel {
    pub input_model: InputModel,
    /// Selected multi-indices, in rank order.
    pub alphas: Vec<MultiIndex>,
    pub beta: Vec<f64>,
    /// Total degree of the winning candidate set.
    pub p: usize,
    pub eps_loo: f64,
    pub meta: ModelMeta,
}

/// What the degree walk looked at, for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct BuildReport {
    pub visited: Vec<DegreeRecord>,
    pub stopped_early: bool,
}

/// Builds a sparse PCE on an evaluated design.
pub fn build_sparse(
    model: &InputModel,
    ed: &ExperimentalDesign,
    ranker: RankSource,
    opts: &BuildOptions,
) -> Result<(PceModel, BuildReport)> {
    if ed.n() < 3 {
        return Err(Error::InvalidParameter(format!(
            "sparse build needs N >= 3 points, got {}",
            ed.n()
        )));
    }
    if opts.p_max < 1 {
        return Err(Error::InvalidParameter("p_max must be >= 1".into()));
    }
    let y = ed.response()?;
    let xi = model.to_standard_matrix(&ed.x)?;
    let families = model.families();
    let y_slice: Vec<f64> = y.iter().copied().collect();
    let loop_opts = opts.loop_options();

    let outcome = match &ranker {
        RankSource::Omp | RankSource::Lars => {
            let mode = match ranker {
                RankSource::Omp => BuildMode::Omp {
                    raw: opts.raw_correlation,
                },
                _ => BuildMode::Lars,
            };
            let def = BuildDef {
                mode,
                rows: std::sync::Arc::new((0..ed.n()).collect()),
            };
            run_degree_loop(&families, &xi, &y_slice, &[def], &loop_opts)?
                .pop()
                .expect("one build requested")
        }
        RankSource::Scored(list) => run_scored_loop(&families, &xi, &y_slice, list, &loop_opts)?,
    };

    let report = BuildReport {
        visited: outcome.visited,
        stopped_early: outcome.stopped_early,
    };
    let best = outcome.best.ok_or_else(|| {
        Error::BuildFailure("no degree produced a well-conditioned model".into())
    })?;
    Ok((
        PceModel {
            input_model: model.clone(),
            alphas: best.alphas,
            beta: best.beta,
            p: best.p,
            eps_loo: best.eps_min,
            meta: ModelMeta {
                ranker: ranker.name().to_string(),
                k_set: None,
                source: None,
                seed: ed.seed,
            },
        },
        report,
    ))
}

impl PceModel {
    pub fn terms(&self) -> usize {
        self.alphas.len()
    }

    /// Evaluates the expansion on physical inputs.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.nrows() == 0 {
            return Ok(DVector::zeros(0));
        }
        let xi = self.input_model.to_standard_matrix(x)?;
        let vals = crate::engine::degree::predict_standardized(
            &self.input_model.families(),
            &self.alphas,
            &self.beta,
            &xi,
        )?;
        Ok(DVector::from_vec(vals))
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            version: MODEL_VERSION,
            marginals: self.input_model.marginals().to_vec(),
            alphas: self.alphas.clone(),
            betas: self.beta.clone(),
            p: self.p,
            eps_loo: self.eps_loo,
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(s).map_err(|e| Error::Payload(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Payload("missing version field".into()))?;
        if version != MODEL_VERSION as u64 {
            return Err(Error::Version {
                found: version as u32,
                expected: MODEL_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_value(value).map_err(|e| Error::Payload(e.to_string()))?;
        if file.alphas.len() != file.betas.len() {
            return Err(Error::Payload(format!(
                "{} multi-indices vs {} coefficients",
                file.alphas.len(),
                file.betas.len()
            )));
        }
        let input_model = InputModel::new(file.marginals)?;
        let m = input_model.dim();
        if file.alphas.iter().any(|a| a.dim() != m) {
            return Err(Error::Payload("multi-index dimension mismatch".into()));
        }
        Ok(PceModel {
            input_model,
            alphas: file.alphas,
            beta: file.betas,
            p: file.p,
            eps_loo: file.eps_loo,
            meta: file.meta,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    marginals: Vec<Marginal>,
    alphas: Vec<MultiIndex>,
    betas: Vec<f64>,
    p: usize,
    eps_loo: f64,
    #[serde(default)]
    meta: ModelMeta,
}
