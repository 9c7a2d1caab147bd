//! Per-build ranking state machines.
//!
//! Each task owns its training rows, an incremental QR over the raw selected
//! columns (the fit route feeding the leave-one-out path), and whatever
//! correlation state its mode needs. Scans over the shared dictionary are fed
//! in chunk by chunk; everything else is local and strictly sequential, so
//! results cannot depend on batching or thread counts.

use std::sync::Arc;

use super::dict::Dictionary;
use super::qr::{dot, PrefixQr};
use crate::regress::LEVERAGE_TOL;

/// Bit set over dictionary columns.
struct BitSet(Vec<u64>);

impl BitSet {
    fn new(n: usize) -> Self {
        BitSet(vec![0; n.div_ceil(64)])
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }
}

/// Raw-column OLS path: residual, leverages, and the corrected closed-form
/// LOO error after each accepted column.
///
/// The recorded path errors are the closed-form LOO multiplied by the
/// small-sample correction T(P, N) = N/(N-P) * (1 + tr(C_emp^-1)/N); the
/// factor approaches 1 for N >> P and diverges near interpolation, which
/// keeps prefix selection away from the regime where the plain jackknife
/// becomes arbitrarily optimistic.
pub struct FitPath {
    pub rows: Arc<Vec<usize>>,
    y: Vec<f64>,
    qr: PrefixQr,
    d: Vec<f64>,
    resid: Vec<f64>,
    lev: Vec<f64>,
    /// Squared Frobenius norm of R^-1, grown column by column.
    inv_fro2: f64,
    pub order: Vec<usize>,
    pub eps_path: Vec<f64>,
}

impl FitPath {
    pub fn new(rows: Arc<Vec<usize>>, y_full: &[f64], capacity: usize) -> Self {
        let y: Vec<f64> = rows.iter().map(|&r| y_full[r]).collect();
        let n = y.len();
        FitPath {
            rows,
            resid: y.clone(),
            y,
            qr: PrefixQr::new(n, capacity),
            d: Vec::with_capacity(capacity),
            lev: vec![0.0; n],
            inv_fro2: 0.0,
            order: Vec::with_capacity(capacity),
            eps_path: Vec::with_capacity(capacity),
        }
    }

    pub fn n_train(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Appends a column (compact, training rows); returns false when it is
    /// numerically dependent on the current prefix.
    pub fn push(&mut self, col_id: usize, col: &[f64]) -> bool {
        if !self.qr.push(col) {
            return false;
        }
        let t = self.qr.len() - 1;
        // Grow ||R^-1||_F^2: the new inverse column is (-R^-1 r_head, 1)/r_jj.
        let r_col = self.qr.r_col(t);
        let r_jj = r_col[t];
        let z = self.qr.solve_prefix(t, r_col);
        let z2: f64 = z.iter().map(|v| v * v).sum();
        self.inv_fro2 += (z2 + 1.0) / (r_jj * r_jj);

        let q = self.qr.q_col(t);
        let g = dot(q, &self.resid);
        let q = q.to_vec();
        self.d.push(g);
        for ((r, l), &qv) in self.resid.iter_mut().zip(self.lev.iter_mut()).zip(&q) {
            *r -= g * qv;
            *l += qv * qv;
        }
        self.order.push(col_id);
        self.eps_path.push(self.corrected_loo());
        true
    }

    fn corrected_loo(&self) -> f64 {
        let n = self.y.len() as f64;
        let p = self.qr.len() as f64;
        if p >= n {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for (&r, &h) in self.resid.iter().zip(&self.lev) {
            if h > 1.0 - LEVERAGE_TOL {
                return f64::INFINITY;
            }
            let e = r / (1.0 - h);
            acc += e * e;
        }
        // tr(C_emp^-1)/N = tr((Psi^T Psi)^-1) = ||R^-1||_F^2
        let t_factor = n / (n - p) * (1.0 + self.inv_fro2);
        acc / n * t_factor
    }

    /// Coefficient of the most recent orthonormal direction.
    pub fn last_gamma(&self) -> f64 {
        *self.d.last().expect("at least one column")
    }

    pub fn last_q(&self) -> &[f64] {
        self.qr.q_col(self.qr.len() - 1)
    }

    /// OLS coefficients of the first `j` selected columns.
    pub fn beta_prefix(&self, j: usize) -> Vec<f64> {
        self.qr.solve_prefix(j, &self.d)
    }

    pub fn residual(&self) -> &[f64] {
        &self.resid
    }
}

/// Ranking options shared by the greedy modes.
#[derive(Debug, Clone, Copy, Default)]
pub struct RankOptions {
    /// Score by raw |R^T psi| instead of unit-norm correlations.
    pub raw_correlation: bool,
}

/// Everything a task needs to know about the shared design.
pub struct TaskInput<'a> {
    pub y_full: &'a [f64],
    pub n_full: usize,
    pub n_cols: usize,
    pub rows: Arc<Vec<usize>>,
    pub j_max: usize,
    /// Column index of the all-zero multi-index, when the dictionary has one.
    pub constant_col: Option<usize>,
}

fn scatter(rows: &[usize], compact: &[f64], n_full: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_full];
    for (&r, &v) in rows.iter().zip(compact) {
        out[r] = v;
    }
    out
}

/// Orthogonal matching pursuit task.
pub struct OmpTask {
    pub fit: FitPath,
    c: Vec<f64>,
    invnorm: Vec<f64>,
    active: BitSet,
    raw: bool,
    j_max: usize,
    n_full: usize,
    gamma: f64,
    best: Option<(f64, usize)>,
    submit: Vec<f64>,
    done: bool,
}

impl OmpTask {
    pub fn new(input: &TaskInput, opts: RankOptions) -> Self {
        let fit = FitPath::new(input.rows.clone(), input.y_full, input.j_max);
        OmpTask {
            fit,
            c: vec![0.0; input.n_cols],
            invnorm: vec![0.0; input.n_cols],
            active: BitSet::new(input.n_cols),
            raw: opts.raw_correlation,
            j_max: input.j_max,
            n_full: input.n_full,
            gamma: 0.0,
            best: None,
            submit: Vec::new(),
            done: input.j_max == 0,
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn submit_vector(&self) -> &[f64] {
        &self.submit
    }

    /// Training response scattered to full length; the prep-A vector.
    pub fn prep_y_vector(&self) -> Vec<f64> {
        scatter(&self.fit.rows, &self.fit.y, self.n_full)
    }

    pub fn prep_mask_vector(&self) -> Vec<f64> {
        scatter(&self.fit.rows, &vec![1.0; self.fit.n_train()], self.n_full)
    }

    pub fn apply_prep_y(&mut self, j0: usize, dots: &[f64]) {
        self.c[j0..j0 + dots.len()].copy_from_slice(dots);
    }

    pub fn apply_prep_sq(&mut self, j0: usize, dots: &[f64]) {
        for (jj, &s2) in dots.iter().enumerate() {
            self.invnorm[j0 + jj] = if s2 > 0.0 { 1.0 / s2.sqrt() } else { 0.0 };
        }
    }

    /// First selection happens straight from the prep correlations.
    pub fn finish_prep(&mut self, dict: &dyn Dictionary) {
        if self.done {
            return;
        }
        self.scan_reset();
        let (c, invnorm, raw) = (&self.c, &self.invnorm, self.raw);
        let mut best: Option<(f64, usize)> = None;
        for j in 0..c.len() {
            if invnorm[j] == 0.0 {
                continue;
            }
            let score = if raw { c[j].abs() } else { c[j].abs() * invnorm[j] };
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, j));
            }
        }
        self.best = best;
        self.select_and_advance(dict);
    }

    pub fn scan_reset(&mut self) {
        self.best = None;
    }

    /// Consumes a chunk of dots of the latest orthonormal direction.
    pub fn apply_scan(&mut self, j0: usize, dots: &[f64]) {
        let g = self.gamma;
        let c = &mut self.c[j0..j0 + dots.len()];
        for (cv, &d) in c.iter_mut().zip(dots) {
            *cv -= g * d;
        }
        let mut best = self.best;
        for (jj, cv) in c.iter().enumerate() {
            let j = j0 + jj;
            if self.active.get(j) || self.invnorm[j] == 0.0 {
                continue;
            }
            let score = if self.raw {
                cv.abs()
            } else {
                cv.abs() * self.invnorm[j]
            };
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, j));
            }
        }
        self.best = best;
    }

    pub fn finish_round(&mut self, dict: &dyn Dictionary) {
        self.select_and_advance(dict);
    }

    fn select_and_advance(&mut self, dict: &dyn Dictionary) {
        let Some((_, j)) = self.best.take() else {
            self.done = true;
            return;
        };
        let mut col = vec![0.0; self.fit.n_train()];
        dict.column_at_rows(j, &self.fit.rows, &mut col);
        if !self.fit.push(j, &col) {
            // Ill-conditioned step: ranking truncated here.
            self.done = true;
            return;
        }
        self.active.set(j);
        if self.fit.len() >= self.j_max {
            self.done = true;
            return;
        }
        self.gamma = self.fit.last_gamma();
        self.submit = scatter(&self.fit.rows, self.fit.last_q(), self.n_full);
    }
}

/// Least angle regression task over centered, unit-norm columns, with the
/// hybrid raw-column refit path for the LOO errors.
pub struct LarsTask {
    pub fit: FitPath,
    geo: PrefixQr,
    c: Vec<f64>,
    invnorm: Vec<f64>,
    s1: Vec<f64>,
    abuf: Vec<f64>,
    active: BitSet,
    signs: Vec<f64>,
    corr_bound: f64,
    equi_a: f64,
    best: Option<(f64, f64, usize)>,
    submit: Vec<f64>,
    j_max: usize,
    n_full: usize,
    done: bool,
    n_cols: usize,
}

impl LarsTask {
    pub fn new(input: &TaskInput) -> Self {
        let fit = FitPath::new(input.rows.clone(), input.y_full, input.j_max);
        let n_train = fit.n_train();
        LarsTask {
            geo: PrefixQr::new(n_train, input.j_max),
            fit,
            c: vec![0.0; input.n_cols],
            invnorm: vec![0.0; input.n_cols],
            s1: vec![0.0; input.n_cols],
            abuf: vec![0.0; input.n_cols],
            active: BitSet::new(input.n_cols),
            signs: Vec::new(),
            corr_bound: 0.0,
            equi_a: 0.0,
            best: None,
            submit: Vec::new(),
            j_max: input.j_max,
            n_full: input.n_full,
            done: input.j_max == 0,
            n_cols: input.n_cols,
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn submit_vector(&self) -> &[f64] {
        &self.submit
    }

    fn y_mean(&self) -> f64 {
        self.fit.y.iter().sum::<f64>() / self.fit.n_train() as f64
    }

    /// Centered training response, scattered; the prep-A vector.
    pub fn prep_y_vector(&self) -> Vec<f64> {
        let mean = self.y_mean();
        let centered: Vec<f64> = self.fit.y.iter().map(|v| v - mean).collect();
        scatter(&self.fit.rows, &centered, self.n_full)
    }

    pub fn prep_mask_vector(&self) -> Vec<f64> {
        scatter(&self.fit.rows, &vec![1.0; self.fit.n_train()], self.n_full)
    }

    pub fn apply_prep_y(&mut self, j0: usize, dots: &[f64]) {
        self.c[j0..j0 + dots.len()].copy_from_slice(dots);
    }

    pub fn apply_prep_mean(&mut self, j0: usize, dots: &[f64]) {
        self.s1[j0..j0 + dots.len()].copy_from_slice(dots);
    }

    pub fn apply_prep_sq(&mut self, j0: usize, dots: &[f64]) {
        let nt = self.fit.n_train() as f64;
        for (jj, &s2) in dots.iter().enumerate() {
            let j = j0 + jj;
            let centered_sq = s2 - self.s1[j] * self.s1[j] / nt;
            self.invnorm[j] = if centered_sq > 1e-12 * s2.max(1e-300) {
                1.0 / centered_sq.sqrt()
            } else {
                0.0
            };
        }
    }

    /// Normalizes the prep correlations, seeds the fit path with the constant
    /// column, and enters the most correlated column.
    pub fn finish_prep(&mut self, dict: &dyn Dictionary, constant_col: Option<usize>) {
        self.s1 = Vec::new();
        if self.done {
            return;
        }
        for j in 0..self.n_cols {
            self.c[j] *= self.invnorm[j];
        }
        if let Some(cc) = constant_col {
            let mut col = vec![0.0; self.fit.n_train()];
            dict.column_at_rows(cc, &self.fit.rows, &mut col);
            if !self.fit.push(cc, &col) || self.fit.len() >= self.j_max {
                self.done = true;
                return;
            }
            self.active.set(cc);
        }
        let mut best: Option<(f64, usize)> = None;
        for j in 0..self.n_cols {
            if self.invnorm[j] == 0.0 || self.active.get(j) {
                continue;
            }
            let score = self.c[j].abs();
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, j));
            }
        }
        let Some((cmax, j)) = best else {
            self.done = true;
            return;
        };
        self.corr_bound = cmax;
        if !self.enter(dict, j) {
            return;
        }
        self.prepare_direction();
    }

    pub fn scan_reset(&mut self) {
        self.best = None;
    }

    /// Consumes a chunk of dots of the current equiangular direction: stores
    /// them for the correlation update and tracks the minimal step length.
    pub fn apply_scan(&mut self, j0: usize, dots: &[f64]) {
        self.abuf[j0..j0 + dots.len()].copy_from_slice(dots);
        let mut best = self.best;
        for (jj, &d) in dots.iter().enumerate() {
            let j = j0 + jj;
            if self.active.get(j) || self.invnorm[j] == 0.0 {
                continue;
            }
            let a = d * self.invnorm[j];
            let c = self.c[j];
            // gamma = num/den over both sign branches; compare by
            // cross-multiplication to avoid divisions in the hot loop.
            for (num, den) in [
                (self.corr_bound - c, self.equi_a - a),
                (self.corr_bound + c, self.equi_a + a),
            ] {
                if den > 1e-12 * self.equi_a && num >= 0.0 {
                    let better = match best {
                        None => true,
                        Some((bn, bd, _)) => num * bd < bn * den,
                    };
                    if better {
                        best = Some((num, den, j));
                    }
                }
            }
        }
        self.best = best;
    }

    pub fn finish_round(&mut self, dict: &dyn Dictionary) {
        let Some((num, den, j)) = self.best.take() else {
            // Degenerate geometry: terminate the ranking.
            self.done = true;
            return;
        };
        let gamma = num / den;
        if !(gamma.is_finite() && gamma >= 0.0) {
            self.done = true;
            return;
        }
        for jj in 0..self.n_cols {
            if self.invnorm[jj] != 0.0 {
                self.c[jj] -= gamma * self.abuf[jj] * self.invnorm[jj];
            }
        }
        self.corr_bound -= gamma * self.equi_a;
        if !self.enter(dict, j) {
            return;
        }
        self.prepare_direction();
    }

    /// Adds column `j` to the active set, the geometry QR, and the fit path.
    /// Returns false when the task terminated.
    fn enter(&mut self, dict: &dyn Dictionary, j: usize) -> bool {
        let n_train = self.fit.n_train();
        let mut col = vec![0.0; n_train];
        dict.column_at_rows(j, &self.fit.rows, &mut col);
        let mean = col.iter().sum::<f64>() / n_train as f64;
        let geo_col: Vec<f64> = col.iter().map(|v| (v - mean) * self.invnorm[j]).collect();
        if !self.geo.push(&geo_col) || !self.fit.push(j, &col) {
            self.done = true;
            return false;
        }
        self.active.set(j);
        self.signs.push(if self.c[j] < 0.0 { -1.0 } else { 1.0 });
        if self.fit.len() >= self.j_max {
            self.done = true;
            return false;
        }
        true
    }

    /// Computes the equiangular direction of the active columns and submits
    /// it for the next scan.
    fn prepare_direction(&mut self) {
        let k = self.signs.len();
        let w = self.geo.solve_transposed(k, &self.signs);
        let norm_w = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm_w > 0.0) || !norm_w.is_finite() {
            self.done = true;
            return;
        }
        self.equi_a = 1.0 / norm_w;
        let mut u = vec![0.0; self.fit.n_train()];
        self.geo.q_apply(k, &w, &mut u);
        for v in &mut u {
            *v *= self.equi_a;
        }
        self.submit = scatter(&self.fit.rows, &u, self.n_full);
    }
}
