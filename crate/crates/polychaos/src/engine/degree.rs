//! The degree-adaptive sparse construction loop, run for one build or for
//! many resampling builds in lockstep.
//!
//! Per degree p: enumerate the total-degree candidate set, rank it (greedy
//! modes scan; scored mode follows a precomputed order), pick the prefix size
//! with minimal LOO error, and stop early after two consecutive degradations.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::dict::{Dictionary, ProductDict};
use super::path::{FitPath, RankOptions, TaskInput};
use super::phase::{run_phase, PhaseTask};
use crate::basis::{
    design_matrix, enumerate_flat, total_degree_cardinality, BasisSpec, IndexSet, MultiIndex,
};
use crate::error::{Error, Result};
use crate::prob::Family;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMode {
    Omp { raw: bool },
    Lars,
}

/// One resampling build: a ranking mode plus its training rows.
#[derive(Debug, Clone)]
pub struct BuildDef {
    pub mode: BuildMode,
    pub rows: Arc<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct DegreeRecord {
    pub p: usize,
    pub eps_min: f64,
    pub j: usize,
    pub card: usize,
}

#[derive(Debug, Clone)]
pub struct BestModel {
    pub p: usize,
    /// Selected prefix in rank order.
    pub alphas: Vec<MultiIndex>,
    pub beta: Vec<f64>,
    /// LOO error after each rank of the selected prefix.
    pub eps_path: Vec<f64>,
    pub eps_min: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BuildOutcome {
    pub best: Option<BestModel>,
    pub visited: Vec<DegreeRecord>,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct LoopOptions {
    pub p_max: usize,
    /// Candidate sets larger than this end the degree loop.
    pub max_basis: u64,
    /// Memory allowed for per-task correlation state before builds are
    /// processed in groups.
    pub scan_budget_bytes: usize,
    pub rank: RankOptions,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions {
            p_max: 20,
            max_basis: 2_000_000,
            scan_budget_bytes: 1_500_000_000,
            rank: RankOptions::default(),
        }
    }
}

struct BuildState {
    def: BuildDef,
    outcome: BuildOutcome,
    running: bool,
}

/// Runs the full degree loop for every build against a shared design.
pub fn run_degree_loop(
    families: &[Family],
    xi_full: &DMatrix<f64>,
    y_full: &[f64],
    builds: &[BuildDef],
    opts: &LoopOptions,
) -> Result<Vec<BuildOutcome>> {
    let m = families.len();
    let n_full = xi_full.nrows();
    if xi_full.ncols() != m {
        return Err(Error::Shape(format!(
            "standardized design has {} columns for {} families",
            xi_full.ncols(),
            m
        )));
    }
    let mut states: Vec<BuildState> = builds
        .iter()
        .map(|def| BuildState {
            def: def.clone(),
            outcome: BuildOutcome::default(),
            running: true,
        })
        .collect();

    for p in 1..=opts.p_max {
        if states.iter().all(|s| !s.running) {
            break;
        }
        let card = match total_degree_cardinality(m, p) {
            Ok(c) if c <= opts.max_basis => c as usize,
            _ => break,
        };
        let alphas = enumerate_flat(m, p)?;
        let table = crate::basis::UnivariateTable::new(families, xi_full, p)?;
        let dict = ProductDict::new(&table, &alphas);

        let running: Vec<usize> = (0..states.len()).filter(|&i| states[i].running).collect();
        for group in memory_groups(&states, &running, card, opts.scan_budget_bytes) {
            let mut tasks: Vec<PhaseTask> = group
                .iter()
                .map(|&i| {
                    let s = &states[i];
                    let input = TaskInput {
                        y_full,
                        n_full,
                        n_cols: card,
                        rows: s.def.rows.clone(),
                        j_max: (s.def.rows.len().saturating_sub(1)).min(card),
                        constant_col: Some(0),
                    };
                    match s.def.mode {
                        BuildMode::Omp { raw } => PhaseTask::new_omp(
                            &input,
                            RankOptions {
                                raw_correlation: raw,
                            },
                        ),
                        BuildMode::Lars => PhaseTask::new_lars(&input),
                    }
                })
                .collect();
            run_phase(&dict, &mut tasks, Some(0));
            for (&i, task) in group.iter().zip(&tasks) {
                finish_degree(&mut states[i], task, p, card, &alphas);
            }
        }
    }

    Ok(states.into_iter().map(|s| s.outcome).collect())
}

fn finish_degree(
    state: &mut BuildState,
    task: &PhaseTask,
    p: usize,
    card: usize,
    alphas: &IndexSet,
) {
    let (order, eps_path) = task.ranking();
    if let Some((j, eps_min)) = argmin_finite(eps_path) {
        state.outcome.visited.push(DegreeRecord {
            p,
            eps_min,
            j: j + 1,
            card,
        });
        let improves = state
            .outcome
            .best
            .as_ref()
            .map_or(true, |b| eps_min < b.eps_min);
        if improves {
            let picked = j + 1;
            state.outcome.best = Some(BestModel {
                p,
                alphas: order[..picked]
                    .iter()
                    .map(|&id| MultiIndex(alphas.row(id).to_vec()))
                    .collect(),
                beta: task.fit().beta_prefix(picked),
                eps_path: eps_path[..picked].to_vec(),
                eps_min,
            });
        }
    }
    if should_stop(&state.outcome.visited, p) {
        state.running = false;
        state.outcome.stopped_early = true;
    }
}

/// Two consecutive degradations of the per-degree minimum end the loop,
/// never before p = 3.
fn should_stop(visited: &[DegreeRecord], p: usize) -> bool {
    if p < 3 || visited.len() < 3 {
        return false;
    }
    let k = visited.len();
    visited[k - 1].p == p
        && visited[k - 1].eps_min > visited[k - 2].eps_min
        && visited[k - 2].eps_min > visited[k - 3].eps_min
}

fn argmin_finite(eps: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &e) in eps.iter().enumerate() {
        if e.is_finite() && best.map_or(true, |(_, b)| e < b) {
            best = Some((j, e));
        }
    }
    best
}

/// Splits the running builds into groups whose correlation state fits the
/// scan budget. Grouping never changes results, only peak memory.
fn memory_groups(
    states: &[BuildState],
    running: &[usize],
    card: usize,
    budget: usize,
) -> Vec<Vec<usize>> {
    let bytes = |i: usize| -> usize {
        match states[i].def.mode {
            BuildMode::Omp { .. } => 17 * card,
            BuildMode::Lars => 33 * card,
        }
    };
    let mut groups = Vec::new();
    let mut cur: Vec<usize> = Vec::new();
    let mut cur_bytes = 0usize;
    for &i in running {
        let b = bytes(i);
        if !cur.is_empty() && cur_bytes + b > budget {
            groups.push(std::mem::take(&mut cur));
            cur_bytes = 0;
        }
        cur.push(i);
        cur_bytes += b;
    }
    if !cur.is_empty() {
        groups.push(cur);
    }
    groups
}

/// Degree loop around a precomputed ranking (the resampled-score order):
/// no correlation scans, just prefix refits per degree.
pub fn run_scored_loop(
    families: &[Family],
    xi_full: &DMatrix<f64>,
    y_full: &[f64],
    ranked: &[MultiIndex],
    opts: &LoopOptions,
) -> Result<BuildOutcome> {
    let m = families.len();
    let n = xi_full.nrows();
    let mut outcome = BuildOutcome::default();
    let mut prev_prefix: Option<Vec<MultiIndex>> = None;
    let rows: Arc<Vec<usize>> = Arc::new((0..n).collect());

    for p in 1..=opts.p_max {
        let card = cardinality_capped(m, p, n as u64) as usize;
        let j_max = n.saturating_sub(1).min(card);
        let prefix: Vec<MultiIndex> = ranked
            .iter()
            .filter(|a| a.total_degree() <= p)
            .take(j_max)
            .cloned()
            .collect();
        if prefix.is_empty() {
            continue;
        }
        if prev_prefix.as_ref() == Some(&prefix) {
            // Same candidate prefix as the previous degree: same fit; carry
            // the record forward so the argmin and stop rule see degree p.
            let last = outcome.visited.last().cloned();
            if let Some(mut rec) = last {
                rec.p = p;
                rec.card = card;
                outcome.visited.push(rec);
            }
            if should_stop(&outcome.visited, p) {
                outcome.stopped_early = true;
                break;
            }
            continue;
        }
        let active: Vec<MultiIndex> = prefix.clone();
        prev_prefix = Some(prefix);
        let spec = BasisSpec::new(families.to_vec(), active.clone())?;
        let psi = design_matrix(&spec, xi_full)?;
        let mut fit = FitPath::new(rows.clone(), y_full, active.len());
        for j in 0..active.len() {
            let col: Vec<f64> = psi.column(j).iter().copied().collect();
            if !fit.push(j, &col) {
                break;
            }
        }
        if let Some((j, eps_min)) = argmin_finite(&fit.eps_path) {
            outcome.visited.push(DegreeRecord {
                p,
                eps_min,
                j: j + 1,
                card,
            });
            let improves = outcome.best.as_ref().map_or(true, |b| eps_min < b.eps_min);
            if improves {
                let picked = j + 1;
                outcome.best = Some(BestModel {
                    p,
                    alphas: fit.order[..picked]
                        .iter()
                        .map(|&id| active[id].clone())
                        .collect(),
                    beta: fit.beta_prefix(picked),
                    eps_path: fit.eps_path[..picked].to_vec(),
                    eps_min,
                });
            }
        }
        if should_stop(&outcome.visited, p) {
            outcome.stopped_early = true;
            break;
        }
    }
    Ok(outcome)
}

/// Cardinality of the total-degree set, saturating at `cap`.
fn cardinality_capped(m: usize, p: usize, cap: u64) -> u64 {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c * (m as u128 + i) / i;
        if c >= cap as u128 {
            return cap;
        }
    }
    c as u64
}

/// Evaluates a fitted prefix model on arbitrary standardized points.
pub fn predict_standardized(
    families: &[Family],
    alphas: &[MultiIndex],
    beta: &[f64],
    xi: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let spec = BasisSpec::new(families.to_vec(), alphas.to_vec())?;
    let psi = design_matrix(&spec, xi)?;
    let mut out = vec![0.0; xi.nrows()];
    for (j, &b) in beta.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(psi.column(j).iter()) {
            *o += b * v;
        }
    }
    Ok(out)
}
