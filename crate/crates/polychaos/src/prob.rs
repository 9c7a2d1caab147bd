//! Probabilistic input models: marginal distributions, isoprobabilistic
//! transforms to standardized variables, and Latin-Hypercube designs.
//!
//! Each marginal is bound to exactly one standardized target: uniform maps
//! affinely onto `[-1, 1]` (Legendre basis), everything else maps through its
//! CDF onto the standard normal (Hermite basis).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::normal;
use crate::seed::{self, label};

/// Euler–Mascheroni constant, used by the Gumbel moment parameterization.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// A univariate marginal distribution.
///
/// Lognormal and Gumbel are parameterized by the mean and standard deviation
/// of the variable itself and converted internally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    Uniform { a: f64, b: f64 },
    Gaussian { mean: f64, std: f64 },
    Lognormal { mean: f64, std: f64 },
    Gumbel { mean: f64, std: f64 },
}

/// Polynomial family induced by a marginal's standardized target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Hermite,
    Legendre,
}

impl Marginal {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "uniform requires a < b, got [{a}, {b}]"
            )));
        }
        Ok(Marginal::Uniform { a, b })
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        check_std(std)?;
        Ok(Marginal::Gaussian { mean, std })
    }

    pub fn lognormal(mean: f64, std: f64) -> Result<Self> {
        check_std(std)?;
        if !(mean > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lognormal mean must be positive, got {mean}"
            )));
        }
        Ok(Marginal::Lognormal { mean, std })
    }

    pub fn gumbel(mean: f64, std: f64) -> Result<Self> {
        check_std(std)?;
        Ok(Marginal::Gumbel { mean, std })
    }

    /// Polynomial family this marginal is bound to.
    pub fn family(&self) -> Family {
        match self {
            Marginal::Uniform { .. } => Family::Legendre,
            _ => Family::Hermite,
        }
    }

    /// Support of the distribution as a closed interval (possibly infinite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { a, b } => (a, b),
            Marginal::Gaussian { .. } | Marginal::Gumbel { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            Marginal::Lognormal { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Parameters `(lambda, zeta)` of the underlying normal for a lognormal
    /// declared through its own mean/std.
    fn lognormal_params(mean: f64, std: f64) -> (f64, f64) {
        let zeta2 = (1.0 + (std / mean).powi(2)).ln();
        let lambda = mean.ln() - 0.5 * zeta2;
        (lambda, zeta2.sqrt())
    }

    /// Location/scale of a max-type Gumbel matched to the declared moments.
    fn gumbel_params(mean: f64, std: f64) -> (f64, f64) {
        let scale = std * 6.0_f64.sqrt() / std::f64::consts::PI;
        let loc = mean - EULER_GAMMA * scale;
        (loc, scale)
    }

    /// CDF value at `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match *self {
            Marginal::Uniform { a, b } => (x - a) / (b - a),
            Marginal::Gaussian { mean, std } => normal::cdf((x - mean) / std),
            Marginal::Lognormal { mean, std } => {
                let (lambda, zeta) = Self::lognormal_params(mean, std);
                normal::cdf((x.ln() - lambda) / zeta)
            }
            Marginal::Gumbel { mean, std } => {
                let (loc, scale) = Self::gumbel_params(mean, std);
                (-(-(x - loc) / scale).exp()).exp()
            }
        })
    }

    /// Quantile at probability `u` in the open interval (0, 1).
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile needs u in (0,1), got {u}")));
        }
        Ok(match *self {
            Marginal::Uniform { a, b } => a + (b - a) * u,
            Marginal::Gaussian { mean, std } => mean + std * normal::quantile(u).unwrap(),
            Marginal::Lognormal { mean, std } => {
                let (lambda, zeta) = Self::lognormal_params(mean, std);
                (lambda + zeta * normal::quantile(u).unwrap()).exp()
            }
            Marginal::Gumbel { mean, std } => {
                let (loc, scale) = Self::gumbel_params(mean, std);
                loc - scale * (-u.ln()).ln()
            }
        })
    }

    /// Isoprobabilistic transform to the marginal's standardized variable.
    pub fn to_standard(&self, x: f64) -> Result<f64> {
        self.check_support(x)?;
        Ok(match *self {
            Marginal::Uniform { a, b } => 2.0 * (x - a) / (b - a) - 1.0,
            Marginal::Gaussian { mean, std } => (x - mean) / std,
            Marginal::Lognormal { mean, std } => {
                let (lambda, zeta) = Self::lognormal_params(mean, std);
                (x.ln() - lambda) / zeta
            }
            Marginal::Gumbel { .. } => {
                let u = self.cdf(x)?.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
                normal::quantile(u).unwrap()
            }
        })
    }

    /// Inverse of [`to_standard`]: maps a standardized coordinate back to the
    /// physical space.
    pub fn from_standard(&self, z: f64) -> f64 {
        match *self {
            Marginal::Uniform { a, b } => a + (b - a) * (z + 1.0) / 2.0,
            Marginal::Gaussian { mean, std } => mean + std * z,
            Marginal::Lognormal { mean, std } => {
                let (lambda, zeta) = Self::lognormal_params(mean, std);
                (lambda + zeta * z).exp()
            }
            Marginal::Gumbel { mean, std } => {
                let (loc, scale) = Self::gumbel_params(mean, std);
                let u = normal::cdf(z).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
                loc - scale * (-u.ln()).ln()
            }
        }
    }

    fn check_support(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.support();
        if !x.is_finite() || x < lo || x > hi {
            return Err(Error::Domain(format!(
                "point {x} outside support [{lo}, {hi}] of {self:?}"
            )));
        }
        Ok(())
    }
}

fn check_std(std: f64) -> Result<()> {
    if !(std > 0.0) || !std.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "standard deviation must be positive, got {std}"
        )));
    }
    Ok(())
}

/// An ordered set of independent marginals defining the input density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputModel {
    marginals: Vec<Marginal>,
}

impl InputModel {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::InvalidParameter(
                "input model needs at least one marginal".into(),
            ));
        }
        Ok(InputModel { marginals })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn families(&self) -> Vec<Family> {
        self.marginals.iter().map(Marginal::family).collect()
    }

    /// Transforms one physical point into standardized coordinates.
    pub fn to_standard_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, model has {}",
                x.len(),
                self.dim()
            )));
        }
        x.iter()
            .zip(&self.marginals)
            .map(|(&xi, m)| m.to_standard(xi))
            .collect()
    }

    /// Row-wise transform of an N x M matrix of physical inputs.
    ///
    /// On a support violation the error lists the offending coordinates.
    pub fn to_standard_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "design has {} columns, model has {} marginals",
                x.ncols(),
                self.dim()
            )));
        }
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        let mut violations = Vec::new();
        for j in 0..x.ncols() {
            let m = &self.marginals[j];
            for i in 0..x.nrows() {
                match m.to_standard(x[(i, j)]) {
                    Ok(z) => out[(i, j)] = z,
                    Err(_) if violations.len() < 8 => {
                        violations.push(format!("row {i}, x{} = {}", j + 1, x[(i, j)]))
                    }
                    Err(_) => {}
                }
            }
        }
        if !violations.is_empty() {
            return Err(Error::Domain(format!(
                "inputs outside marginal support: {}",
                violations.join("; ")
            )));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("input model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: InputModel =
            serde_json::from_str(s).map_err(|e| Error::Payload(e.to_string()))?;
        InputModel::new(model.marginals)
    }
}

/// Stratum placement for Latin-Hypercube samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LhsMode {
    /// Uniform jitter inside each probability stratum.
    #[default]
    Jittered,
    /// Points at stratum centers.
    Centered,
}

/// A sampled design: physical inputs and, once evaluated, responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentalDesign {
    pub x: DMatrix<f64>,
    pub y: Option<DVector<f64>>,
    pub seed: u64,
}

impl ExperimentalDesign {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Attaches responses computed by `f` on each input row.
    pub fn evaluate(&mut self, mut f: impl FnMut(&[f64]) -> f64) {
        let rows: Vec<f64> = (0..self.n())
            .map(|i| {
                let row: Vec<f64> = self.x.row(i).iter().copied().collect();
                f(&row)
            })
            .collect();
        self.y = Some(DVector::from_vec(rows));
    }

    pub fn response(&self) -> Result<&DVector<f64>> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("design has no responses".into()))
    }

    /// Writes the design as CSV with header `x1..xM,y`; floats use Rust's
    /// shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{},y", header.join(","))?;
        for i in 0..self.n() {
            let mut fields: Vec<String> = self.x.row(i).iter().map(|v| format!("{v}")).collect();
            match &self.y {
                Some(y) => fields.push(format!("{}", y[i])),
                None => fields.push(String::new()),
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    /// Reads a design written by [`write_csv`]. Missing `y` fields yield a
    /// design without responses.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Payload("empty CSV".into()))??;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.last() != Some(&"y") || cols.len() < 2 {
            return Err(Error::Payload(format!(
                "expected header `x1..xM,y`, got `{header}`"
            )));
        }
        let m = cols.len() - 1;
        for (j, c) in cols[..m].iter().enumerate() {
            if *c != format!("x{}", j + 1) {
                return Err(Error::Payload(format!(
                    "expected column `x{}`, got `{c}`",
                    j + 1
                )));
            }
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut have_y = true;
        let mut n = 0usize;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != m + 1 {
                return Err(Error::Payload(format!(
                    "row {} has {} fields, expected {}",
                    n + 1,
                    fields.len(),
                    m + 1
                )));
            }
            for f in &fields[..m] {
                xs.push(parse_f64(f, n)?);
            }
            if fields[m].is_empty() {
                have_y = false;
            } else {
                ys.push(parse_f64(fields[m], n)?);
            }
            n += 1;
        }
        if n == 0 {
            return Err(Error::Payload("CSV contains no data rows".into()));
        }
        if have_y && ys.len() != n {
            return Err(Error::Payload("mixed empty and present y fields".into()));
        }
        Ok(ExperimentalDesign {
            x: DMatrix::from_row_slice(n, m, &xs),
            y: have_y.then(|| DVector::from_vec(ys)),
            seed: 0,
        })
    }
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Payload(format!("row {}: bad float `{s}`", row + 1)))
}

/// Latin-Hypercube sample of `n` points with jittered strata.
///
/// Per dimension, exactly one point falls in each probability stratum
/// `((i-1)/n, i/n)`; strata are permuted independently per dimension with RNG
/// substreams derived from `(seed, dimension)`.
pub fn lhs_sample(model: &InputModel, n: usize, seed: u64) -> Result<ExperimentalDesign> {
    lhs_sample_with(model, n, seed, LhsMode::Jittered)
}

/// Latin-Hypercube sample with an explicit stratum placement mode.
pub fn lhs_sample_with(
    model: &InputModel,
    n: usize,
    seed: u64,
    mode: LhsMode,
) -> Result<ExperimentalDesign> {
    if n < 1 {
        return Err(Error::InvalidParameter("LHS needs n >= 1".into()));
    }
    let m = model.dim();
    let mut x = DMatrix::zeros(n, m);
    for j in 0..m {
        let mut rng = seed::rng(seed, &[label::LHS_DIM, j as u64]);
        let mut strata: Vec<usize> = (0..n).collect();
        // Fisher-Yates with the dimension's own substream.
        for i in (1..n).rev() {
            let k = rng.gen_range(0..=i);
            strata.swap(i, k);
        }
        let marginal = &model.marginals()[j];
        for i in 0..n {
            let offset = match mode {
                LhsMode::Jittered => rng.gen::<f64>(),
                LhsMode::Centered => 0.5,
            };
            let u = (strata[i] as f64 + offset) / n as f64;
            // Clamp away from {0,1}; reachable only at extreme n.
            let u = u.clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
            x[(i, j)] = marginal.quantile(u)?;
        }
    }
    Ok(ExperimentalDesign { x, y: None, seed })
}
