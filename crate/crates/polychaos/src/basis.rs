//! Multi-index enumeration and tensorized orthonormal polynomial bases.
//!
//! Hermite polynomials are orthonormal against the standard normal density,
//! Legendre polynomials against the uniform density 1/2 on [-1, 1]. Both are
//! evaluated by their normalized three-term recurrences.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::Family;

/// Highest supported univariate degree.
pub const MAX_DEGREE: usize = 30;

/// Hard cap on the cardinality of an enumerated multi-index set.
pub const MAX_BASIS_CARD: u64 = 50_000_000;

/// A multivariate polynomial index: one degree per input dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u8>);

impl MultiIndex {
    pub fn zero(m: usize) -> Self {
        MultiIndex(vec![0; m])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().map(|&d| d as usize).sum()
    }

    /// Dimensions with non-zero degree, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }
}

/// The canonical basis order: ascending total degree, then the lexicographic
/// order used by [`enumerate_total_degree`] within a degree.
pub fn graded_lex_cmp(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_degree()
        .cmp(&b.total_degree())
        .then_with(|| b.0.cmp(&a.0))
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("-"))
    }
}

/// Number of multi-indices with total degree <= p in m dimensions,
/// i.e. binomial(p + m, p), or an error when it exceeds the supported cap.
pub fn total_degree_cardinality(m: usize, p: usize) -> Result<u64> {
    let mut c: u128 = 1;
    for i in 1..=p as u128 {
        c = c * (m as u128 + i) / i;
        if c > MAX_BASIS_CARD as u128 {
            return Err(Error::BasisTooLarge(format!(
                "binomial({}+{m}, {p}) exceeds cap {MAX_BASIS_CARD}",
                p
            )));
        }
    }
    Ok(c as u64)
}

/// All multi-indices with total degree <= p, in graded-lexicographic order:
/// ascending total degree, lexicographic within a degree.
pub fn enumerate_total_degree(m: usize, p: usize) -> Result<Vec<MultiIndex>> {
    Ok(enumerate_flat(m, p)?.to_multi_indices())
}

/// Flat, cache-friendly storage of an ordered multi-index set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    m: usize,
    data: Vec<u8>,
}

impl IndexSet {
    pub fn len(&self) -> usize {
        if self.m == 0 {
            0
        } else {
            self.data.len() / self.m
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks_exact(self.m)
    }

    pub fn to_multi_indices(&self) -> Vec<MultiIndex> {
        self.iter().map(|r| MultiIndex(r.to_vec())).collect()
    }

    pub fn from_multi_indices(m: usize, alphas: &[MultiIndex]) -> Result<Self> {
        let mut data = Vec::with_capacity(alphas.len() * m);
        for a in alphas {
            if a.dim() != m {
                return Err(Error::Shape(format!(
                    "multi-index {a} has dimension {}, expected {m}",
                    a.dim()
                )));
            }
            data.extend_from_slice(&a.0);
        }
        Ok(IndexSet { m, data })
    }
}

/// Graded-lex enumeration into flat storage; the canonical basis order.
pub fn enumerate_flat(m: usize, p: usize) -> Result<IndexSet> {
    if m < 1 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if p > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "degree {p} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    let card = total_degree_cardinality(m, p)? as usize;
    let mut data = Vec::with_capacity(card * m);
    let mut alpha = vec![0u8; m];
    for deg in 0..=p {
        emit_degree(&mut data, &mut alpha, 0, deg as u8);
    }
    debug_assert_eq!(data.len(), card * m);
    Ok(IndexSet { m, data })
}

/// Emits all alpha with the remaining degree spread over dims [pos..], in
/// lexicographic order (larger leading components first).
fn emit_degree(out: &mut Vec<u8>, alpha: &mut Vec<u8>, pos: usize, remaining: u8) {
    if pos + 1 == alpha.len() {
        alpha[pos] = remaining;
        out.extend_from_slice(alpha);
        alpha[pos] = 0;
        return;
    }
    for d in (0..=remaining).rev() {
        alpha[pos] = d;
        emit_degree(out, alpha, pos + 1, remaining - d);
    }
    alpha[pos] = 0;
}

/// Evaluates the orthonormal univariate polynomial of `degree` at `xi`.
///
/// Hermite: probabilists' polynomials scaled by 1/sqrt(d!); Legendre:
/// standard polynomials scaled by sqrt(2d+1).
pub fn eval_univariate(family: Family, degree: usize, xi: f64) -> f64 {
    debug_assert!(degree <= MAX_DEGREE);
    match family {
        Family::Hermite => {
            // Normalized recurrence: pi_{d+1} = (xi pi_d - sqrt(d) pi_{d-1}) / sqrt(d+1)
            let mut prev = 0.0;
            let mut cur = 1.0;
            for d in 0..degree {
                let next = (xi * cur - (d as f64).sqrt() * prev) / ((d + 1) as f64).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
        Family::Legendre => {
            let mut prev = 1.0;
            let mut cur = xi;
            if degree == 0 {
                return 1.0;
            }
            for d in 1..degree {
                let df = d as f64;
                let next = ((2.0 * df + 1.0) * xi * cur - df * prev) / (df + 1.0);
                prev = cur;
                cur = next;
            }
            (2.0 * degree as f64 + 1.0).sqrt() * cur
        }
    }
}

/// Per-dimension table of univariate polynomial values over a sample set.
///
/// `value(dim, degree)` is a contiguous slice over all samples, which keeps
/// the hot correlation scans cache-resident.
#[derive(Debug, Clone)]
pub struct UnivariateTable {
    n: usize,
    max_degree: usize,
    /// Layout: [dim][degree] -> n values.
    values: Vec<Vec<f64>>,
    m: usize,
}

impl UnivariateTable {
    /// Tabulates degrees 0..=max_degree for every dimension of the
    /// standardized sample matrix `xi` (n rows, m columns).
    pub fn new(families: &[Family], xi: &DMatrix<f64>, max_degree: usize) -> Result<Self> {
        let (n, m) = (xi.nrows(), xi.ncols());
        if families.len() != m {
            return Err(Error::Shape(format!(
                "{} families for {} columns",
                families.len(),
                m
            )));
        }
        let mut values = Vec::with_capacity(m * (max_degree + 1));
        for j in 0..m {
            for d in 0..=max_degree {
                let mut col = Vec::with_capacity(n);
                for i in 0..n {
                    col.push(eval_univariate(families[j], d, xi[(i, j)]));
                }
                values.push(col);
            }
        }
        Ok(UnivariateTable {
            n,
            max_degree,
            values,
            m,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    #[inline]
    pub fn value(&self, dim: usize, degree: usize) -> &[f64] {
        &self.values[dim * (self.max_degree + 1) + degree]
    }

    /// Multiplies the tensor-product column for `alpha` into `out`
    /// (which must be pre-filled, typically with ones).
    pub fn accumulate_column(&self, alpha: &[u8], out: &mut [f64]) {
        for (dim, &d) in alpha.iter().enumerate() {
            if d > 0 {
                let v = self.value(dim, d as usize);
                for (o, &f) in out.iter_mut().zip(v) {
                    *o *= f;
                }
            }
        }
    }
}

/// Families plus an ordered active multi-index set.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub families: Vec<Family>,
    pub active: Vec<MultiIndex>,
}

impl BasisSpec {
    pub fn new(families: Vec<Family>, active: Vec<MultiIndex>) -> Result<Self> {
        let m = families.len();
        let mut seen = std::collections::HashSet::new();
        for a in &active {
            if a.dim() != m {
                return Err(Error::Shape(format!(
                    "multi-index {a} has dimension {}, families have {m}",
                    a.dim()
                )));
            }
            if !seen.insert(a.clone()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate multi-index {a} in active set"
                )));
            }
        }
        Ok(BasisSpec { families, active })
    }

    /// Serializes the active set as a JSON array of integer arrays.
    pub fn active_to_json(&self) -> String {
        serde_json::to_string(&self.active).expect("multi-index set serializes")
    }
}

/// Evaluates the design matrix Psi[n, j] = prod_i pi_{alpha_j,i}(xi_n,i).
///
/// Column order follows the active set's order.
pub fn design_matrix(spec: &BasisSpec, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if xi.ncols() != spec.families.len() {
        return Err(Error::Shape(format!(
            "standardized inputs have {} columns, basis has {} families",
            xi.ncols(),
            spec.families.len()
        )));
    }
    let max_degree = spec
        .active
        .iter()
        .flat_map(|a| a.0.iter())
        .copied()
        .max()
        .unwrap_or(0) as usize;
    if max_degree > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "degree {max_degree} exceeds supported maximum {MAX_DEGREE}"
        )));
    }
    let table = UnivariateTable::new(&spec.families, xi, max_degree)?;
    let n = xi.nrows();
    let mut psi = DMatrix::zeros(n, spec.active.len());
    let mut col = vec![1.0; n];
    for (j, alpha) in spec.active.iter().enumerate() {
        col.fill(1.0);
        table.accumulate_column(&alpha.0, &mut col);
        psi.column_mut(j).copy_from_slice(&col);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::Family::{Hermite, Legendre};

    #[test]
    fn cardinality_examples() {
        assert_eq!(enumerate_total_degree(3, 2).unwrap().len(), 10);
        assert_eq!(enumerate_total_degree(1, 20).unwrap().len(), 21);
        assert_eq!(enumerate_total_degree(10, 3).unwrap().len(), 286);
        assert_eq!(total_degree_cardinality(31, 5).unwrap(), 376_992);
    }

    #[test]
    fn cardinality_cap_is_an_error() {
        assert!(matches!(
            total_degree_cardinality(100, 20),
            Err(Error::BasisTooLarge(_))
        ));
    }

    #[test]
    fn graded_lex_order_and_completeness() {
        // Against rejection enumeration over the degree box for small cases.
        for (m, p) in [(1usize, 5usize), (2, 4), (3, 3), (4, 5)] {
            let listed = enumerate_total_degree(m, p).unwrap();
            let mut expected: Vec<Vec<u8>> = Vec::new();
            let mut alpha = vec![0u8; m];
            loop {
                if alpha.iter().map(|&d| d as usize).sum::<usize>() <= p {
                    expected.push(alpha.clone());
                }
                let mut k = 0;
                loop {
                    alpha[k] += 1;
                    if alpha[k] as usize <= p {
                        break;
                    }
                    alpha[k] = 0;
                    k += 1;
                    if k == m {
                        break;
                    }
                }
                if k == m {
                    break;
                }
            }
            assert_eq!(listed.len(), expected.len(), "m={m} p={p}");
            let set: std::collections::HashSet<_> = listed.iter().cloned().collect();
            assert_eq!(set.len(), listed.len(), "duplicates for m={m} p={p}");
            for e in &expected {
                assert!(set.contains(&MultiIndex(e.clone())));
            }
            // Graded-lex: non-decreasing total degree, lexicographic within.
            for w in listed.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                let (da, db) = (a.total_degree(), b.total_degree());
                assert!(da < db || (da == db && a.0 > b.0), "order {a} before {b}");
            }
        }
    }

    #[test]
    fn univariate_examples() {
        assert_eq!(eval_univariate(Hermite, 0, 1.0), 1.0);
        assert_eq!(eval_univariate(Hermite, 1, 1.0), 1.0);
        // (xi^2 - 1)/sqrt(2) at xi = 1.
        assert!(eval_univariate(Hermite, 2, 1.0).abs() < 1e-15);
        assert!((eval_univariate(Legendre, 1, 0.5) - 3f64.sqrt() * 0.5).abs() < 1e-15);
        for xi in [-0.7, 0.0, 2.3] {
            assert_eq!(eval_univariate(Hermite, 0, xi), 1.0);
            assert_eq!(eval_univariate(Legendre, 0, xi), 1.0);
        }
    }

    #[test]
    fn design_matrix_constant_column() {
        let spec = BasisSpec::new(vec![Hermite, Hermite], vec![MultiIndex::zero(2)]).unwrap();
        let xi = DMatrix::from_row_slice(3, 2, &[0.1, -0.2, 1.0, 2.0, -0.5, 0.4]);
        let psi = design_matrix(&spec, &xi).unwrap();
        assert!(psi.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn design_matrix_degree_one_product() {
        let spec =
            BasisSpec::new(vec![Hermite, Hermite], vec![MultiIndex(vec![1, 1])]).unwrap();
        let xi = DMatrix::from_row_slice(1, 2, &[2.0, 3.0]);
        let psi = design_matrix(&spec, &xi).unwrap();
        assert!((psi[(0, 0)] - 6.0).abs() < 1e-15);
    }

    #[test]
    fn design_matrix_matches_naive_product() {
        use rand::Rng;
        let mut rng = crate::seed::rng(99, &[1]);
        let families = vec![Hermite, Legendre, Hermite];
        let active = enumerate_total_degree(3, 4).unwrap();
        let spec = BasisSpec::new(families.clone(), active.clone()).unwrap();
        let n = 12;
        let xi = DMatrix::from_fn(n, 3, |_, j| {
            if families[j] == Legendre {
                rng.gen_range(-1.0..1.0)
            } else {
                rng.gen_range(-2.5..2.5)
            }
        });
        let psi = design_matrix(&spec, &xi).unwrap();
        for (j, alpha) in active.iter().enumerate() {
            for i in 0..n {
                let direct: f64 = (0..3)
                    .map(|d| eval_univariate(families[d], alpha.0[d] as usize, xi[(i, d)]))
                    .product();
                assert!((psi[(i, j)] - direct).abs() <= 1e-14 * direct.abs().max(1.0));
            }
        }
    }

    #[test]
    fn design_matrix_shape_mismatch() {
        let spec = BasisSpec::new(vec![Hermite], vec![MultiIndex::zero(1)]).unwrap();
        let xi = DMatrix::zeros(4, 2);
        assert!(matches!(design_matrix(&spec, &xi), Err(Error::Shape(_))));
    }

    #[test]
    fn basis_spec_rejects_duplicates() {
        let res = BasisSpec::new(
            vec![Hermite, Hermite],
            vec![MultiIndex(vec![1, 0]), MultiIndex(vec![1, 0])],
        );
        assert!(res.is_err());
    }

    #[test]
    fn multi_index_json_preserves_order() {
        let active = enumerate_total_degree(2, 2).unwrap();
        let spec = BasisSpec::new(vec![Hermite, Hermite], active.clone()).unwrap();
        let json = spec.active_to_json();
        let back: Vec<MultiIndex> = serde_json::from_str(&json).unwrap();
        assert_eq!(active, back);
    }
}
