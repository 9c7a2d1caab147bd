//! Diagnoses the LOO path of the scored (resampled) final build.

use nalgebra::{DMatrix, DVector};
use polychaos::basis::{design_matrix, BasisSpec};
use polychaos::prob::{lhs_sample, InputModel, Marginal};
use polychaos::regress::{ols_fit, r_squared};
use polychaos::rpce::{rpce_rank, RpceConfig};
use polychaos::seed::{derive, label};

fn ishigami(x: &[f64]) -> f64 {
    x[0].sin() + 7.0 * x[1].sin().powi(2) + 0.1 * x[2].powi(4) * x[0].sin()
}

fn explicit_loo(psi: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let n = psi.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&r| r != i).collect();
        let sub = psi.select_rows(keep.iter());
        let ysub = y.select_rows(keep.iter());
        let gram = sub.transpose() * &sub;
        let rhs = sub.transpose() * ysub;
        match gram.lu().solve(&rhs) {
            Some(beta) => {
                let pred = (psi.row(i) * &beta)[0];
                acc += (y[i] - pred).powi(2);
            }
            None => return f64::INFINITY,
        }
    }
    acc / n as f64
}

fn main() {
    let pi = std::f64::consts::PI;
    let model = InputModel::new(vec![Marginal::uniform(-pi, pi).unwrap(); 3]).unwrap();
    let rep = 2u64;
    let train_seed = derive(1000, &[label::REPLICATION, rep, label::TRAIN]);
    let test_seed = derive(1000, &[label::REPLICATION, rep, label::TEST]);
    let mut ed = lhs_sample(&model, 50, train_seed).unwrap();
    ed.evaluate(ishigami);
    let mut test = lhs_sample(&model, 10_000, test_seed).unwrap();
    test.evaluate(ishigami);

    let config = RpceConfig {
        seed: train_seed,
        ..RpceConfig::default()
    };
    let (ranking, report) = rpce_rank(&model, &ed, &config).unwrap();
    println!("choice: {}, ranked candidates: {}", report.choice, ranking.len());
    for row in report.table.rows.iter().take(12) {
        println!("  rank {:2}: {}  s_f={} s_e={:.3}", row.rank, row.alpha, row.s_f, row.s_e);
    }

    // Replay the scored prefix path at the largest degree and compare the
    // fast LOO along the path against explicit refits.
    let xi = model.to_standard_matrix(&ed.x).unwrap();
    let y = ed.response().unwrap();
    let max_deg = ranking.iter().map(|a| a.total_degree()).max().unwrap();
    println!("max candidate degree: {max_deg}");
    let prefix: Vec<_> = ranking.iter().take(49).cloned().collect();
    let spec = BasisSpec::new(model.families(), prefix.clone()).unwrap();
    let psi = design_matrix(&spec, &xi).unwrap();
    for j in (4..=prefix.len()).step_by(4) {
        let sub = psi.columns(0, j).into_owned();
        let fit = ols_fit(&sub, y).unwrap();
        let exact = explicit_loo(&sub, y);
        let insample = (y - &sub * &fit.beta).norm_squared() / y.len() as f64;
        println!(
            "j={j:2}: fast={:.3e} explicit={:.3e} insample={:.3e} cond={}",
            fit.eps_loo, exact, insample, fit.cond_flag
        );
    }

    // The degree-5 restricted prefix, as the scored degree loop sees it.
    let deg5: Vec<_> = ranking
        .iter()
        .filter(|a| a.total_degree() <= 5)
        .take(49)
        .cloned()
        .collect();
    println!("deg<=5 prefix length: {}", deg5.len());
    let spec5 = BasisSpec::new(model.families(), deg5.clone()).unwrap();
    let psi5 = design_matrix(&spec5, &xi).unwrap();
    let y_test = test.y.clone().unwrap();
    let test_xi = model.to_standard_matrix(&test.x).unwrap();
    for j in [24, 40, 44, 46, 47, 48, 49] {
        if j > deg5.len() { break; }
        let sub = psi5.columns(0, j).into_owned();
        let fit = ols_fit(&sub, y).unwrap();
        let exact = explicit_loo(&sub, y);
        let pred_psi = design_matrix(
            &BasisSpec::new(model.families(), deg5[..j].to_vec()).unwrap(),
            &test_xi,
        ).unwrap();
        let pred = &pred_psi * &fit.beta;
        let maxlev = fit.leverage.max();
        println!(
            "p5 j={j:2}: fast={:.3e} explicit={:.3e} maxlev={:.6} testR2={:.4}",
            fit.eps_loo, exact, maxlev,
            r_squared(&y_test, &pred).unwrap()
        );
    }
    for j in [8, 16, 32, 48] {
        if j > prefix.len() {
            break;
        }
        let sub = psi.columns(0, j).into_owned();
        let fit = ols_fit(&sub, y).unwrap();
        let pred_psi = design_matrix(
            &BasisSpec::new(model.families(), prefix[..j].to_vec()).unwrap(),
            &model.to_standard_matrix(&test.x).unwrap(),
        )
        .unwrap();
        let pred = &pred_psi * &fit.beta;
        println!("j={j:2}: test R2 = {:.4}", r_squared(&y_test, &pred).unwrap());
    }
}
// Appended: replay the p=5 filtered prefix exactly as the scored loop sees it.
