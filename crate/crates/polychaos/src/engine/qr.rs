//! Incremental thin QR over a growing column prefix.
//!
//! Modified Gram-Schmidt with a second orthogonalization pass; columns that
//! are numerically dependent are rejected so callers can truncate a ranking.

/// Relative norm drop below which a pushed column counts as dependent.
const DEPENDENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PrefixQr {
    n: usize,
    /// Column-major orthonormal columns, n * len.
    q: Vec<f64>,
    /// Packed upper triangle: column j stores R[0..=j, j].
    r: Vec<f64>,
    len: usize,
    scratch: Vec<f64>,
}

impl PrefixQr {
    pub fn new(n: usize, capacity: usize) -> Self {
        PrefixQr {
            n,
            q: Vec::with_capacity(n * capacity),
            r: Vec::with_capacity(capacity * (capacity + 1) / 2),
            len: 0,
            scratch: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn q_col(&self, t: usize) -> &[f64] {
        &self.q[t * self.n..(t + 1) * self.n]
    }

    /// Orthonormalizes `col` against the current prefix and appends it.
    /// Returns `false` (leaving the factorization unchanged) when the column
    /// is numerically dependent on the prefix.
    pub fn push(&mut self, col: &[f64]) -> bool {
        debug_assert_eq!(col.len(), self.n);
        let norm0 = norm(col);
        if !(norm0 > 0.0) || !norm0.is_finite() {
            return false;
        }
        self.scratch.copy_from_slice(col);
        let mut coeffs = vec![0.0; self.len];
        for _ in 0..2 {
            for t in 0..self.len {
                let qt = &self.q[t * self.n..(t + 1) * self.n];
                let h = dot(qt, &self.scratch);
                coeffs[t] += h;
                for (s, &qv) in self.scratch.iter_mut().zip(qt) {
                    *s -= h * qv;
                }
            }
        }
        let rjj = norm(&self.scratch);
        if rjj <= DEPENDENT_TOL * norm0 {
            return false;
        }
        let inv = 1.0 / rjj;
        self.q.extend(self.scratch.iter().map(|v| v * inv));
        self.r.extend_from_slice(&coeffs);
        self.r.push(rjj);
        self.len += 1;
        true
    }

    /// Packed column j of R: entries R[0..=j, j].
    pub fn r_col(&self, j: usize) -> &[f64] {
        let off = j * (j + 1) / 2;
        &self.r[off..off + j + 1]
    }

    /// Solves R[0..k, 0..k] beta = d[0..k] by back substitution.
    pub fn solve_prefix(&self, k: usize, d: &[f64]) -> Vec<f64> {
        debug_assert!(k <= self.len && d.len() >= k);
        let mut beta = d[..k].to_vec();
        for j in (0..k).rev() {
            let col_off = j * (j + 1) / 2;
            beta[j] /= self.r[col_off + j];
            let bj = beta[j];
            for (i, b) in beta.iter_mut().enumerate().take(j) {
                *b -= self.r[col_off + i] * bj;
            }
        }
        beta
    }

    /// Solves R^T w = s by forward substitution over the first k columns.
    pub fn solve_transposed(&self, k: usize, s: &[f64]) -> Vec<f64> {
        debug_assert!(k <= self.len && s.len() >= k);
        let mut w = vec![0.0; k];
        for i in 0..k {
            let mut acc = s[i];
            for (j, &wj) in w.iter().enumerate().take(i) {
                // R[j, i] lives in column i's packed storage.
                acc -= self.r[i * (i + 1) / 2 + j] * wj;
            }
            w[i] = acc / self.r[i * (i + 1) / 2 + i];
        }
        w
    }

    /// out = Q[.., 0..k] * w
    pub fn q_apply(&self, k: usize, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (t, &wt) in w.iter().enumerate().take(k) {
            let qt = self.q_col(t);
            for (o, &qv) in out.iter_mut().zip(qt) {
                *o += wt * qv;
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] = a[i * 4 + l].mul_add(b[i * 4 + l], acc[l]);
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s = a[i].mul_add(b[i], s);
    }
    s
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn reproduces_least_squares() {
        let mut rng = crate::seed::rng(21, &[0]);
        let n = 15;
        let p = 6;
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut qr = PrefixQr::new(n, p);
        let mut d = Vec::new();
        for c in &cols {
            assert!(qr.push(c));
            d.push(dot(qr.q_col(d.len()), &y));
        }
        let beta = qr.solve_prefix(p, &d);

        let psi = nalgebra::DMatrix::from_fn(n, p, |i, j| cols[j][i]);
        let yv = nalgebra::DVector::from_vec(y.clone());
        let oracle = crate::regress::ols_fit(&psi, &yv).unwrap();
        for j in 0..p {
            assert!((beta[j] - oracle.beta[j]).abs() < 1e-9, "beta[{j}]");
        }
    }

    #[test]
    fn rejects_dependent_column() {
        let mut qr = PrefixQr::new(4, 3);
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![2.0, 4.0, 6.0, 8.0];
        assert!(qr.push(&a));
        assert!(!qr.push(&b));
        assert_eq!(qr.len(), 1);
    }

    #[test]
    fn transposed_solve_inverts_gram() {
        let mut rng = crate::seed::rng(22, &[0]);
        let n = 10;
        let p = 4;
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut qr = PrefixQr::new(n, p);
        for c in &cols {
            qr.push(c);
        }
        let s = vec![1.0, -1.0, 1.0, 1.0];
        let w = qr.solve_transposed(p, &s);
        let v = qr.solve_prefix(p, &w);
        // v should satisfy (X^T X) v = s.
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += dot(&cols[i], &cols[j]) * v[j];
            }
            assert!((acc - s[i]).abs() < 1e-8, "row {i}: {acc}");
        }
    }
}
