//! Global sensitivity analysis: Sobol indices straight from PCE coefficients,
//! closed-form references for the Ishigami function, and a pick-freeze
//! Monte-Carlo estimator for validation.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::pce::PceModel;
use crate::prob::InputModel;
use crate::seed::{self, label};

/// Variance-based sensitivity indices.
///
/// `interactions` holds every variable subset realized by the expansion
/// (singletons included); subsets absent from the expansion carry index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SobolIndices {
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    pub interactions: Vec<(Vec<usize>, f64)>,
    pub variance: f64,
}

impl SobolIndices {
    pub fn dim(&self) -> usize {
        self.first_order.len()
    }

    /// Index of a specific subset; zero when the subset is not represented.
    pub fn subset(&self, dims: &[usize]) -> f64 {
        self.interactions
            .iter()
            .find(|(u, _)| u == dims)
            .map(|(_, s)| *s)
            .unwrap_or(0.0)
    }

    /// CSV export: subset, S, S_total (totals only on singleton rows).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "subset,S,S_total")?;
        for (u, s) in &self.interactions {
            let label: Vec<String> = u.iter().map(|d| format!("x{}", d + 1)).collect();
            if u.len() == 1 {
                writeln!(w, "{},{},{}", label.join("*"), s, self.total[u[0]])?;
            } else {
                writeln!(w, "{},{},", label.join("*"), s)?;
            }
        }
        Ok(())
    }
}

/// Sobol indices from the squared coefficients of an orthonormal expansion.
pub fn indices_from_pce(model: &PceModel) -> Result<SobolIndices> {
    let m = model.input_model.dim();
    let mut variance = 0.0;
    for (alpha, &beta) in model.alphas.iter().zip(&model.beta) {
        if !alpha.is_zero() {
            variance += beta * beta;
        }
    }
    if variance <= 0.0 {
        return Err(Error::UndefinedMetric(
            "constant expansion has no variance to decompose".into(),
        ));
    }
    let mut subsets: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut total = vec![0.0; m];
    for (alpha, &beta) in model.alphas.iter().zip(&model.beta) {
        if alpha.is_zero() {
            continue;
        }
        let u = alpha.support();
        let share = beta * beta / variance;
        match subsets.iter_mut().find(|(s, _)| *s == u) {
            Some((_, acc)) => *acc += share,
            None => subsets.push((u.clone(), share)),
        }
        for &d in &u {
            total[d] += share;
        }
    }
    subsets.sort_by(|a, b| (a.0.len(), &a.0).cmp(&(b.0.len(), &b.0)));
    let mut first_order = vec![0.0; m];
    for (u, s) in &subsets {
        if u.len() == 1 {
            first_order[u[0]] = *s;
        }
    }
    Ok(SobolIndices {
        first_order,
        total,
        interactions: subsets,
        variance,
    })
}

/// Closed-form Sobol indices of the Ishigami function.
pub fn analytic_ishigami(a: f64, b: f64) -> SobolIndices {
    let pi = std::f64::consts::PI;
    let p4 = pi.powi(4);
    let p8 = pi.powi(8);
    let d = a * a / 8.0 + b * p4 / 5.0 + b * b * p8 / 18.0 + 0.5;
    let d1 = b * p4 / 5.0 + b * b * p8 / 50.0 + 0.5;
    let d2 = a * a / 8.0;
    let d13 = 8.0 * b * b * p8 / 225.0;
    let (s1, s2, s13) = (d1 / d, d2 / d, d13 / d);
    SobolIndices {
        first_order: vec![s1, s2, 0.0],
        total: vec![s1 + s13, s2, s13],
        interactions: vec![
            (vec![0], s1),
            (vec![1], s2),
            (vec![2], 0.0),
            (vec![0, 1], 0.0),
            (vec![0, 2], s13),
            (vec![1, 2], 0.0),
            (vec![0, 1, 2], 0.0),
        ],
        variance: d,
    }
}

/// Monte-Carlo Sobol estimate with standard errors.
#[derive(Debug, Clone)]
pub struct McSobol {
    pub indices: SobolIndices,
    pub first_order_se: Vec<f64>,
    pub total_se: Vec<f64>,
}

/// Pick-freeze estimators of first-order and total indices.
///
/// Sampling is block-seeded, so the estimate is reproducible and independent
/// of any parallel execution of the blocks.
pub fn mc_sobol(
    f: &dyn Fn(&[f64]) -> f64,
    model: &InputModel,
    n_samples: usize,
    seed: u64,
) -> Result<McSobol> {
    if n_samples < 1000 {
        return Err(Error::InvalidParameter(
            "Monte-Carlo Sobol needs at least 1000 samples".into(),
        ));
    }
    let m = model.dim();
    let n = n_samples;

    let sample_matrix = |tag: u64| -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed, &[label::MC_BLOCK, tag]);
        (0..n)
            .map(|_| {
                (0..m)
                    .map(|d| {
                        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        model.marginals()[d].quantile(u).expect("u in (0,1)")
                    })
                    .collect()
            })
            .collect()
    };
    let xa = sample_matrix(1);
    let xb = sample_matrix(2);
    let fa: Vec<f64> = xa.iter().map(|x| f(x)).collect();
    let fb: Vec<f64> = xb.iter().map(|x| f(x)).collect();

    // Variance from both base matrices.
    let nn = (2 * n) as f64;
    let mean = (fa.iter().sum::<f64>() + fb.iter().sum::<f64>()) / nn;
    let variance = (fa.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        + fb.iter().map(|v| (v - mean).powi(2)).sum::<f64>())
        / (nn - 1.0);
    if variance <= 0.0 {
        return Err(Error::UndefinedMetric(
            "sampled responses have zero variance".into(),
        ));
    }

    let mut first_order = vec![0.0; m];
    let mut first_order_se = vec![0.0; m];
    let mut total = vec![0.0; m];
    let mut total_se = vec![0.0; m];
    let mut x = vec![0.0; m];
    for d in 0..m {
        // First order: (1/n) sum f(B) (f(AB_d) - f(A)); total: Jansen.
        let mut s_terms = Vec::with_capacity(n);
        let mut t_terms = Vec::with_capacity(n);
        for j in 0..n {
            x.copy_from_slice(&xa[j]);
            x[d] = xb[j][d];
            let fab = f(&x);
            s_terms.push(fb[j] * (fab - fa[j]));
            t_terms.push(0.5 * (fa[j] - fab).powi(2));
        }
        let s_mean = s_terms.iter().sum::<f64>() / n as f64;
        let t_mean = t_terms.iter().sum::<f64>() / n as f64;
        first_order[d] = s_mean / variance;
        total[d] = t_mean / variance;
        let s_var = s_terms.iter().map(|v| (v - s_mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let t_var = t_terms.iter().map(|v| (v - t_mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        first_order_se[d] = (s_var / n as f64).sqrt() / variance;
        total_se[d] = (t_var / n as f64).sqrt() / variance;
    }

    let interactions: Vec<(Vec<usize>, f64)> =
        (0..m).map(|d| (vec![d], first_order[d])).collect();
    Ok(McSobol {
        indices: SobolIndices {
            first_order,
            total,
            interactions,
            variance,
        },
        first_order_se,
        total_se,
    })
}
