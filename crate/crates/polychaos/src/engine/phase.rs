//! Lockstep execution of many ranking tasks over one shared dictionary.
//!
//! All tasks advance one selection per round; the round's correlation scans
//! are fused into a single streaming pass over the dictionary so the column
//! evaluations are shared. Each task's arithmetic stays sequential, so the
//! outcome is independent of how tasks are grouped.

use super::dict::Dictionary;
use super::path::{LarsTask, OmpTask, RankOptions, TaskInput};
use super::scan::scan_dots;

pub enum PhaseTask {
    Omp(OmpTask),
    Lars(LarsTask),
}

impl PhaseTask {
    pub fn new_omp(input: &TaskInput, opts: RankOptions) -> Self {
        PhaseTask::Omp(OmpTask::new(input, opts))
    }

    pub fn new_lars(input: &TaskInput) -> Self {
        PhaseTask::Lars(LarsTask::new(input))
    }

    fn is_done(&self) -> bool {
        match self {
            PhaseTask::Omp(t) => t.is_done(),
            PhaseTask::Lars(t) => t.is_done(),
        }
    }

    /// Ranking and the per-rank LOO errors accumulated so far.
    pub fn ranking(&self) -> (&[usize], &[f64]) {
        match self {
            PhaseTask::Omp(t) => (&t.fit.order, &t.fit.eps_path),
            PhaseTask::Lars(t) => (&t.fit.order, &t.fit.eps_path),
        }
    }

    pub fn fit(&self) -> &super::path::FitPath {
        match self {
            PhaseTask::Omp(t) => &t.fit,
            PhaseTask::Lars(t) => &t.fit,
        }
    }
}

/// Runs every task to completion against the dictionary.
pub fn run_phase(dict: &dyn Dictionary, tasks: &mut [PhaseTask], constant_col: Option<usize>) {
    let n = dict.n_rows();
    if tasks.is_empty() || dict.n_cols() == 0 {
        return;
    }

    // Prep pass A: response vectors (and training masks for the centered
    // column means LARS needs).
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut route: Vec<(usize, u8)> = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        match task {
            PhaseTask::Omp(o) => {
                vectors.push(o.prep_y_vector());
                route.push((t, 0));
            }
            PhaseTask::Lars(l) => {
                vectors.push(l.prep_y_vector());
                route.push((t, 0));
                vectors.push(l.prep_mask_vector());
                route.push((t, 1));
            }
        }
    }
    run_scan(dict, &vectors, false, tasks, &route, |task, kind, j0, dots| match (task, kind) {
        (PhaseTask::Omp(o), 0) => o.apply_prep_y(j0, dots),
        (PhaseTask::Lars(l), 0) => l.apply_prep_y(j0, dots),
        (PhaseTask::Lars(l), 1) => l.apply_prep_mean(j0, dots),
        _ => unreachable!(),
    });

    // Prep pass B: squared-column mask dots give per-task column norms.
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut route: Vec<(usize, u8)> = Vec::new();
    for (t, task) in tasks.iter().enumerate() {
        vectors.push(match task {
            PhaseTask::Omp(o) => o.prep_mask_vector(),
            PhaseTask::Lars(l) => l.prep_mask_vector(),
        });
        route.push((t, 0));
    }
    run_scan(dict, &vectors, true, tasks, &route, |task, _, j0, dots| match task {
        PhaseTask::Omp(o) => o.apply_prep_sq(j0, dots),
        PhaseTask::Lars(l) => l.apply_prep_sq(j0, dots),
    });

    for task in tasks.iter_mut() {
        match task {
            PhaseTask::Omp(o) => o.finish_prep(dict),
            PhaseTask::Lars(l) => l.finish_prep(dict, constant_col),
        }
    }

    // Selection rounds: one scan of the dictionary per round over all tasks
    // still running.
    let mut v_rm: Vec<f64> = Vec::new();
    loop {
        let running: Vec<usize> = (0..tasks.len()).filter(|&t| !tasks[t].is_done()).collect();
        if running.is_empty() {
            break;
        }
        let nb = running.len();
        v_rm.clear();
        v_rm.resize(n * nb, 0.0);
        for (b, &t) in running.iter().enumerate() {
            let sub = match &tasks[t] {
                PhaseTask::Omp(o) => o.submit_vector(),
                PhaseTask::Lars(l) => l.submit_vector(),
            };
            for (i, &v) in sub.iter().enumerate() {
                v_rm[i * nb + b] = v;
            }
            match &mut tasks[t] {
                PhaseTask::Omp(o) => o.scan_reset(),
                PhaseTask::Lars(l) => l.scan_reset(),
            }
        }
        scan_dots(dict, &v_rm, nb, false, &mut |j0, len, dots| {
            for (b, &t) in running.iter().enumerate() {
                let slice = &dots[b * len..(b + 1) * len];
                match &mut tasks[t] {
                    PhaseTask::Omp(o) => o.apply_scan(j0, slice),
                    PhaseTask::Lars(l) => l.apply_scan(j0, slice),
                }
            }
        });
        for &t in &running {
            match &mut tasks[t] {
                PhaseTask::Omp(o) => o.finish_round(dict),
                PhaseTask::Lars(l) => l.finish_round(dict),
            }
        }
    }
}

fn run_scan(
    dict: &dyn Dictionary,
    vectors: &[Vec<f64>],
    square: bool,
    tasks: &mut [PhaseTask],
    route: &[(usize, u8)],
    mut apply: impl FnMut(&mut PhaseTask, u8, usize, &[f64]),
) {
    let n = dict.n_rows();
    let nb = vectors.len();
    let mut v_rm = vec![0.0; n * nb];
    for (b, v) in vectors.iter().enumerate() {
        for (i, &x) in v.iter().enumerate() {
            v_rm[i * nb + b] = x;
        }
    }
    scan_dots(dict, &v_rm, nb, square, &mut |j0, len, dots| {
        for (b, &(t, kind)) in route.iter().enumerate() {
            apply(&mut tasks[t], kind, j0, &dots[b * len..(b + 1) * len]);
        }
    });
}
