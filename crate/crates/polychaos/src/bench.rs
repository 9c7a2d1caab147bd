//! Built-in benchmark models for experiments.
//!
//! Each benchmark bundles a deterministic response function with its input
//! model and, when available, analytic sensitivity references.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{InputModel, Marginal};
use crate::sobol::{analytic_ishigami, SobolIndices};

/// A named response function with its probabilistic input model.
#[derive(Clone)]
pub struct Benchmark {
    pub name: String,
    pub input_model: InputModel,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    pub reference_sobol: Option<SobolIndices>,
}

impl Benchmark {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn eval_fn(&self) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        self.eval.clone()
    }
}

impl std::fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Benchmark")
            .field("name", &self.name)
            .field("dim", &self.input_model.dim())
            .finish()
    }
}

/// Sum of five bivariate polynomials: 1 + x1 + x1 x2 + x1 x2^2 + x1 x2^3.
pub fn poly_sum(x1: f64, x2: f64) -> f64 {
    1.0 + x1 + x1 * x2 + x1 * x2 * x2 + x1 * x2 * x2 * x2
}

/// The Ishigami function sin x1 + a sin^2 x2 + b x3^4 sin x1.
pub fn ishigami(x1: f64, x2: f64, x3: f64, a: f64, b: f64) -> f64 {
    x1.sin() + a * x2.sin().powi(2) + b * x3.powi(4) * x1.sin()
}

/// Test function with adjustable input dimension (M >= 6).
pub fn varied_dim(x: &[f64]) -> Result<f64> {
    let m = x.len();
    if m < 6 {
        return Err(Error::InvalidParameter(format!(
            "varied-dim needs at least 6 inputs, got {m}"
        )));
    }
    let mf = m as f64;
    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let kf = (k + 1) as f64;
        sum1 += kf * (v.powi(3) - 5.0 * v);
        sum2 += kf * (v * v + v.powi(4));
    }
    Ok(3.0 + sum1 / mf + (sum2 / (3.0 * mf)).ln() + x[0] * x[1] * x[1] - x[2] * x[4]
        + x[1] * x[3]
        + x[m - 5]
        + x[m - 5] * x[m - 1] * x[m - 1])
}

/// Planar pin-jointed truss described by nodes, bars, supports, and the top
/// nodes carrying the vertical loads.
///
/// Bars with (numerically) horizontal orientation take the horizontal-member
/// properties (E_h, A_h); all others the oblique ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussGeometry {
    /// Node coordinates [x, y].
    pub nodes: Vec<[f64; 2]>,
    /// Bars as node index pairs.
    pub bars: Vec<[usize; 2]>,
    /// (node, fix_x, fix_y)
    pub supports: Vec<(usize, bool, bool)>,
    /// Nodes carrying the vertical loads P1..P6, in load order.
    pub load_nodes: Vec<usize>,
}

impl TrussGeometry {
    /// The 23-bar bridge truss used for the deflection benchmark: 24 m span
    /// of four-meter bays, 2 m high, pinned left support, roller right, six
    /// loaded top-chord nodes, deflection read at the bottom-chord midspan.
    pub fn default_23bar() -> Self {
        let mut nodes: Vec<[f64; 2]> = Vec::new();
        for i in 0..7 {
            nodes.push([4.0 * i as f64, 0.0]);
        }
        for i in 0..6 {
            nodes.push([2.0 + 4.0 * i as f64, 2.0]);
        }
        let mut bars: Vec<[usize; 2]> = Vec::new();
        for i in 0..6 {
            bars.push([i, i + 1]); // bottom chord
        }
        for i in 0..5 {
            bars.push([7 + i, 8 + i]); // top chord
        }
        for i in 0..6 {
            bars.push([i, 7 + i]); // left diagonal of each bay
            bars.push([7 + i, i + 1]); // right diagonal
        }
        TrussGeometry {
            nodes,
            bars,
            supports: vec![(0, true, true), (6, false, true)],
            load_nodes: (7..13).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let g: TrussGeometry =
            serde_json::from_str(s).map_err(|e| Error::Payload(e.to_string()))?;
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for b in &self.bars {
            if b[0] >= n || b[1] >= n || b[0] == b[1] {
                return Err(Error::Config(format!("bad bar {:?}", b)));
            }
        }
        for s in &self.supports {
            if s.0 >= n {
                return Err(Error::Config(format!("support at missing node {}", s.0)));
            }
        }
        for &l in &self.load_nodes {
            if l >= n {
                return Err(Error::Config(format!("load at missing node {l}")));
            }
        }
        Ok(())
    }

    /// The free bottom-chord node closest to the span center, where the
    /// deflection is read.
    fn response_node(&self) -> usize {
        let y_min = self
            .nodes
            .iter()
            .map(|n| n[1])
            .fold(f64::INFINITY, f64::min);
        let xs: Vec<f64> = self.nodes.iter().map(|n| n[0]).collect();
        let x_mid = (xs.iter().cloned().fold(f64::INFINITY, f64::min)
            + xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            / 2.0;
        let fixed_y: Vec<usize> = self
            .supports
            .iter()
            .filter(|s| s.2)
            .map(|s| s.0)
            .collect();
        (0..self.nodes.len())
            .filter(|&i| (self.nodes[i][1] - y_min).abs() < 1e-9 && !fixed_y.contains(&i))
            .min_by(|&a, &b| {
                (self.nodes[a][0] - x_mid)
                    .abs()
                    .partial_cmp(&(self.nodes[b][0] - x_mid).abs())
                    .unwrap()
            })
            .expect("truss has a free bottom-chord node")
    }
}

/// Direct-stiffness solve of the truss under vertical loads.
///
/// `params` holds [E_h, E_o, A_h, A_o, P1..P6] with loads applied downward;
/// the returned midspan deflection is negative downward.
pub fn truss_deflection(geom: &TrussGeometry, params: &[f64]) -> Result<f64> {
    if params.len() != 4 + geom.load_nodes.len() {
        return Err(Error::Shape(format!(
            "expected {} parameters, got {}",
            4 + geom.load_nodes.len(),
            params.len()
        )));
    }
    let (e_h, e_o, a_h, a_o) = (params[0], params[1], params[2], params[3]);
    if !(e_h > 0.0 && e_o > 0.0 && a_h > 0.0 && a_o > 0.0) {
        return Err(Error::Domain(
            "moduli and sections must be positive".into(),
        ));
    }
    geom.validate()?;
    let n = geom.nodes.len();
    let mut k_global = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for bar in &geom.bars {
        let (i, j) = (bar[0], bar[1]);
        let dx = geom.nodes[j][0] - geom.nodes[i][0];
        let dy = geom.nodes[j][1] - geom.nodes[i][1];
        let len = (dx * dx + dy * dy).sqrt();
        if len <= 0.0 {
            return Err(Error::Config(format!("zero-length bar {:?}", bar)));
        }
        let horizontal = dy.abs() < 1e-9 * len.max(1.0);
        let ea = if horizontal { e_h * a_h } else { e_o * a_o };
        let k = ea / len;
        let (c, s) = (dx / len, dy / len);
        let kb = [
            [c * c, c * s, -c * c, -c * s],
            [c * s, s * s, -c * s, -s * s],
            [-c * c, -c * s, c * c, c * s],
            [-c * s, -s * s, c * s, s * s],
        ];
        let dofs = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1];
        for (r, row) in kb.iter().enumerate() {
            for (cidx, &v) in row.iter().enumerate() {
                k_global[(dofs[r], dofs[cidx])] += k * v;
            }
        }
    }

    let mut fixed = vec![false; 2 * n];
    for &(node, fx, fy) in &geom.supports {
        if fx {
            fixed[2 * node] = true;
        }
        if fy {
            fixed[2 * node + 1] = true;
        }
    }
    let free: Vec<usize> = (0..2 * n).filter(|&d| !fixed[d]).collect();
    let mut force = nalgebra::DVector::<f64>::zeros(2 * n);
    for (load_idx, &node) in geom.load_nodes.iter().enumerate() {
        force[2 * node + 1] -= params[4 + load_idx];
    }
    let k_ff = k_global.select_rows(free.iter()).select_columns(free.iter());
    let f_f = force.select_rows(free.iter());
    let u_f = k_ff
        .cholesky()
        .ok_or_else(|| Error::Config("singular stiffness matrix: mechanism".into()))?
        .solve(&f_f);
    let response = geom.response_node();
    let pos = free
        .iter()
        .position(|&d| d == 2 * response + 1)
        .ok_or_else(|| Error::Config("response node is fully supported".into()))?;
    Ok(u_f[pos])
}

/// Input model of the truss benchmark: lognormal stiffness parameters and
/// Gumbel-distributed loads.
pub fn truss_input_model() -> InputModel {
    InputModel::new(vec![
        Marginal::lognormal(2.1e11, 2.1e10).unwrap(),
        Marginal::lognormal(2.1e11, 2.1e10).unwrap(),
        Marginal::lognormal(2.0e-3, 2.0e-4).unwrap(),
        Marginal::lognormal(1.0e-3, 1.0e-4).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
        Marginal::gumbel(5.0e4, 7.5e3).unwrap(),
    ])
    .unwrap()
}

/// Looks up a benchmark by name. `dim` applies to `varied-dim`; `truss_geom`
/// overrides the shipped truss geometry.
pub fn get(name: &str, dim: Option<usize>, truss_geom: Option<TrussGeometry>) -> Result<Benchmark> {
    match name {
        "poly-sum" => Ok(Benchmark {
            name: name.into(),
            input_model: InputModel::new(vec![
                Marginal::gaussian(0.0, 1.0).unwrap(),
                Marginal::gaussian(6.0, 1.0).unwrap(),
            ])
            .unwrap(),
            eval: Arc::new(|x| poly_sum(x[0], x[1])),
            reference_sobol: None,
        }),
        "ishigami" => Ok(Benchmark {
            name: name.into(),
            input_model: InputModel::new(vec![
                Marginal::uniform(-std::f64::consts::PI, std::f64::consts::PI).unwrap();
                3
            ])
            .unwrap(),
            eval: Arc::new(|x| ishigami(x[0], x[1], x[2], 7.0, 0.1)),
            reference_sobol: Some(analytic_ishigami(7.0, 0.1)),
        }),
        "varied-dim" => {
            let m = dim.unwrap_or(11);
            if m < 6 {
                return Err(Error::InvalidParameter(
                    "varied-dim needs dimension >= 6".into(),
                ));
            }
            let mut marginals = vec![Marginal::uniform(1.0, 2.0).unwrap(); m];
            if m >= 20 {
                marginals[19] = Marginal::uniform(1.0, 3.0).unwrap();
            }
            Ok(Benchmark {
                name: format!("{name}-{m}"),
                input_model: InputModel::new(marginals).unwrap(),
                eval: Arc::new(|x| varied_dim(x).expect("dimension checked at registry")),
                reference_sobol: None,
            })
        }
        "truss" => {
            let geom = truss_geom.unwrap_or_else(TrussGeometry::default_23bar);
            Ok(Benchmark {
                name: name.into(),
                input_model: truss_input_model(),
                eval: Arc::new(move |x| {
                    truss_deflection(&geom, x).expect("valid truss configuration")
                }),
                reference_sobol: None,
            })
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown benchmark `{other}`; available: poly-sum, ishigami, varied-dim, truss"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn poly_sum_hand_values() {
        assert_eq!(poly_sum(0.0, 123.4), 1.0);
        assert_eq!(poly_sum(1.0, 0.0), 2.0);
        assert_eq!(poly_sum(1.0, 6.0), 260.0);
    }

    #[test]
    fn ishigami_hand_values() {
        let pi = std::f64::consts::PI;
        assert_eq!(ishigami(0.0, 0.0, 0.0, 7.0, 0.1), 0.0);
        assert!((ishigami(pi / 2.0, 0.0, 0.0, 7.0, 0.1) - 1.0).abs() < 1e-15);
        let want = 1.0 + 7.0 + 0.1 * pi.powi(4);
        assert!((ishigami(pi / 2.0, pi / 2.0, pi, 7.0, 0.1) - want).abs() < 1e-12);
    }

    #[test]
    fn varied_dim_hand_value() {
        let x = vec![1.0; 11];
        let want = -18.0 + 4.0f64.ln();
        assert!((varied_dim(&x).unwrap() - want).abs() < 1e-12);
        assert!(varied_dim(&[1.0; 5]).is_err());
        // dimension enters the weights
        let a = varied_dim(&vec![1.3; 11]).unwrap();
        let b = varied_dim(&vec![1.3; 12]).unwrap();
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn varied_dim_log_term_gradient_matches_finite_differences() {
        let m = 11;
        let log_term = |x: &[f64]| -> f64 {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(k, &v): (usize, &f64)| (k + 1) as f64 * (v * v + v.powi(4)))
                .sum();
            (s / (3.0 * m as f64)).ln()
        };
        let x = vec![1.5; m];
        for d in 0..m {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(k, &v): (usize, &f64)| (k + 1) as f64 * (v * v + v.powi(4)))
                .sum();
            let kf = (d + 1) as f64;
            let analytic = kf * (2.0 * x[d] + 4.0 * x[d].powi(3)) / s;
            let h = 1e-6;
            let mut xp = x.clone();
            xp[d] += h;
            let mut xm = x.clone();
            xm[d] -= h;
            let fd = (log_term(&xp) - log_term(&xm)) / (2.0 * h);
            assert!(
                ((fd - analytic) / analytic).abs() < 1e-5,
                "dim {d}: fd {fd} vs {analytic}"
            );
        }
    }

    #[test]
    fn evaluators_match_brute_reimplementation() {
        let mut rng = crate::seed::rng(91, &[0]);
        for _ in 0..100 {
            let x1: f64 = rng.gen_range(-3.0..3.0);
            let x2: f64 = rng.gen_range(3.0..9.0);
            let brute = 1.0 + x1 * (1.0 + x2 + x2.powi(2) + x2.powi(3));
            assert!((poly_sum(x1, x2) - brute).abs() <= 1e-12 * brute.abs().max(1.0));

            let (a, b) = (7.0, 0.1);
            let xs: Vec<f64> = (0..3)
                .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            let brute = xs[0].sin() * (1.0 + b * xs[2] * xs[2] * xs[2] * xs[2])
                + a * (1.0 - (2.0 * xs[1]).cos()) / 2.0;
            let got = ishigami(xs[0], xs[1], xs[2], a, b);
            assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));

            let m = 11;
            let xv: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..2.0)).collect();
            let mut brute = 3.0;
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for k in 1..=m {
                s1 += k as f64 * (xv[k - 1].powi(3) - 5.0 * xv[k - 1]);
                s2 += k as f64 * (xv[k - 1].powi(2) + xv[k - 1].powi(4));
            }
            brute += s1 / m as f64 + (s2 / (3.0 * m as f64)).ln();
            brute += xv[0] * xv[1] * xv[1] - xv[2] * xv[4] + xv[1] * xv[3];
            brute += xv[m - 5] + xv[m - 5] * xv[m - 1] * xv[m - 1];
            let got = varied_dim(&xv).unwrap();
            assert!((got - brute).abs() <= 1e-12 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn single_bar_elongation() {
        // Axial bar under end load: elongation PL/EA to 1e-10.
        let geom = TrussGeometry {
            nodes: vec![[0.0, 0.0], [0.0, -3.0]],
            bars: vec![[0, 1]],
            supports: vec![(0, true, true), (1, true, false)],
            load_nodes: vec![1],
        };
        let (e, a, p, l) = (2.1e11, 1e-3, 5e4, 3.0);
        // vertical bar: oblique properties (slots E_o, A_o)
        let v = truss_deflection(&geom, &[1.0, e, 1.0, a, p]).unwrap();
        let want = -p * l / (e * a);
        assert!(
            ((v - want) / want).abs() < 1e-10,
            "elongation {v} vs {want}"
        );
    }

    #[test]
    fn truss_linearity_and_scaling() {
        let geom = TrussGeometry::default_23bar();
        let base = [2.1e11, 2.1e11, 2.0e-3, 1.0e-3, 5e4, 5.2e4, 4.8e4, 5e4, 5.1e4, 4.9e4];
        let v1 = truss_deflection(&geom, &base).unwrap();
        assert!(v1 < 0.0, "midspan deflects downward: {v1}");

        let mut doubled = base;
        for p in doubled.iter_mut().skip(4) {
            *p *= 2.0;
        }
        let v2 = truss_deflection(&geom, &doubled).unwrap();
        assert!(((v2 - 2.0 * v1) / v1).abs() < 1e-12);

        let mut stiff = base;
        let c: f64 = 3.7;
        for ea in stiff.iter_mut().take(4) {
            *ea *= c.sqrt();
        }
        let v3 = truss_deflection(&geom, &stiff).unwrap();
        assert!(((v3 - v1 / c) * c / v1).abs() < 1e-12);
    }

    #[test]
    fn truss_load_symmetry() {
        let geom = TrussGeometry::default_23bar();
        let params = [2.1e11, 2.1e11, 2.0e-3, 1.0e-3, 6e4, 5.5e4, 5e4, 4.5e4, 4e4, 3.5e4];
        let mut swapped = params;
        for i in 0..3 {
            swapped.swap(4 + i, 4 + 5 - i);
        }
        let a = truss_deflection(&geom, &params).unwrap();
        let b = truss_deflection(&geom, &swapped).unwrap();
        assert!(
            ((a - b) / a).abs() < 1e-12,
            "symmetry violated: {a} vs {b}"
        );
    }

    #[test]
    fn truss_mechanism_is_config_error() {
        // No diagonal bars: the top chord is a mechanism.
        let mut geom = TrussGeometry::default_23bar();
        geom.bars.truncate(11);
        let params = [2.1e11, 2.1e11, 2.0e-3, 1.0e-3, 5e4, 5e4, 5e4, 5e4, 5e4, 5e4];
        assert!(matches!(
            truss_deflection(&geom, &params),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn truss_geometry_json_round_trip() {
        let geom = TrussGeometry::default_23bar();
        let json = geom.to_json();
        let back = TrussGeometry::from_json(&json).unwrap();
        assert_eq!(geom, back);
        assert!(TrussGeometry::from_json("{\"nodes\": []}").is_err());
    }

    #[test]
    fn registry_names() {
        assert_eq!(get("poly-sum", None, None).unwrap().input_model.dim(), 2);
        assert_eq!(get("ishigami", None, None).unwrap().input_model.dim(), 3);
        assert_eq!(
            get("varied-dim", Some(21), None).unwrap().input_model.dim(),
            21
        );
        assert_eq!(get("truss", None, None).unwrap().input_model.dim(), 10);
        assert!(get("nope", None, None).is_err());
        // benchmark evaluation goes through the registry closure
        let b = get("poly-sum", None, None).unwrap();
        assert_eq!(b.eval(&[1.0, 6.0]), 260.0);
    }
}
