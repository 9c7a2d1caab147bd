//! Greedy rankers: orthogonal matching pursuit and least angle regression.
//!
//! Both produce an ordered candidate list together with the leave-one-out
//! error path of the OLS refits along the growing prefix. Correlation scoring
//! uses unit-norm columns by default; `raw_correlation` restores the literal
//! raw-correlation rule. LARS runs on centered, unit-norm columns, and ranks
//! the all-zero multi-index first when the candidate set contains it, since a
//! centered constant column carries no direction information.

use nalgebra::{DMatrix, DVector};

use crate::basis::MultiIndex;
use crate::engine::dict::DenseDict;
use crate::engine::path::TaskInput;
use crate::engine::phase::{run_phase, PhaseTask};
use crate::error::{Error, Result};
use std::sync::Arc;

pub use crate::engine::path::RankOptions;

/// An ordered ranking with its error path.
///
/// `eps_path[j]` is the corrected LOO error of the OLS fit on the first j+1
/// ranked columns (the closed-form jackknife times the small-sample factor
/// N/(N-P) (1 + tr(C_emp^-1)/N)); `delta_eps[j]` the increment over the
/// previous prefix, with the error before any column defined as zero.
#[derive(Debug, Clone)]
pub struct RankedBasis {
    pub order: Vec<MultiIndex>,
    pub delta_eps: Vec<f64>,
    pub eps_path: Vec<f64>,
}

impl RankedBasis {
    fn from_path(order: &[usize], eps_path: &[f64], alphas: &[MultiIndex]) -> Self {
        let order: Vec<MultiIndex> = order.iter().map(|&j| alphas[j].clone()).collect();
        let delta_eps = deltas(eps_path);
        RankedBasis {
            order,
            delta_eps,
            eps_path: eps_path.to_vec(),
        }
    }
}

/// Error increments along a path, with eps_LOO^0 = 0.
pub fn deltas(eps_path: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    eps_path
        .iter()
        .map(|&e| {
            let d = e - prev;
            prev = e;
            d
        })
        .collect()
}

fn check_rank_inputs(
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    alphas: &[MultiIndex],
) -> Result<()> {
    if psi.nrows() != y.len() {
        return Err(Error::Shape(format!(
            "{} rows vs {} responses",
            psi.nrows(),
            y.len()
        )));
    }
    if alphas.len() != psi.ncols() {
        return Err(Error::Shape(format!(
            "{} multi-indices for {} columns",
            alphas.len(),
            psi.ncols()
        )));
    }
    Ok(())
}

fn run_single(
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    j_max: usize,
    alphas: &[MultiIndex],
    make: impl FnOnce(&TaskInput) -> PhaseTask,
) -> Result<RankedBasis> {
    check_rank_inputs(psi, y, alphas)?;
    let dict = DenseDict::from_matrix(psi);
    let n = psi.nrows();
    let y_full: Vec<f64> = y.iter().copied().collect();
    let constant_col = alphas.iter().position(MultiIndex::is_zero);
    let input = TaskInput {
        y_full: &y_full,
        n_full: n,
        n_cols: psi.ncols(),
        rows: Arc::new((0..n).collect()),
        j_max: j_max.min(n.saturating_sub(1)).min(psi.ncols()),
        constant_col,
    };
    let mut tasks = vec![make(&input)];
    run_phase(&dict, &mut tasks, constant_col);
    let (order, eps) = tasks[0].ranking();
    Ok(RankedBasis::from_path(order, eps, alphas))
}

/// Ranks candidates by iterative residual correlation with OLS refits.
pub fn omp_rank(
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    j_max: usize,
    alphas: &[MultiIndex],
    opts: RankOptions,
) -> Result<RankedBasis> {
    run_single(psi, y, j_max, alphas, |input| {
        PhaseTask::new_omp(input, opts)
    })
}

/// Ranks candidates by least-angle-regression entry order.
pub fn lars_rank(
    psi: &DMatrix<f64>,
    y: &DVector<f64>,
    j_max: usize,
    alphas: &[MultiIndex],
) -> Result<RankedBasis> {
    run_single(psi, y, j_max, alphas, |input| PhaseTask::new_lars(input))
}
