//! Quick accuracy/timing probe used during development.

use std::time::Instant;

use nalgebra::DVector;
use polychaos::pce::{build_sparse, BuildOptions, RankSource};
use polychaos::prob::{lhs_sample, InputModel, Marginal};
use polychaos::regress::r_squared;
use polychaos::rpce::{build_rpce, KValue, RpceConfig};
use polychaos::seed::{derive, label};

fn ishigami(x: &[f64]) -> f64 {
    let (a, b) = (7.0, 0.1);
    x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(4) * x[0].sin()
}

fn varied_dim(x: &[f64]) -> f64 {
    let m = x.len();
    let mf = m as f64;
    let sum1: f64 = (1..=m).map(|k| k as f64 * (x[k - 1].powi(3) - 5.0 * x[k - 1])).sum();
    let sum2: f64 = (1..=m).map(|k| k as f64 * (x[k - 1].powi(2) + x[k - 1].powi(4))).sum();
    3.0 + sum1 / mf
        + (sum2 / (3.0 * mf)).ln()
        + x[0] * x[1] * x[1]
        - x[2] * x[4]
        + x[1] * x[3]
        + x[m - 5]
        + x[m - 5] * x[m - 1] * x[m - 1]
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "ishigami".into());
    match which.as_str() {
        "ishigami" => run_ishigami(),
        "varied" => run_varied(),
        _ => panic!("unknown probe"),
    }
}

fn run_ishigami() {
    let pi = std::f64::consts::PI;
    let model = InputModel::new(vec![Marginal::uniform(-pi, pi).unwrap(); 3]).unwrap();
    let reps = 10;
    let mut sums = [0.0f64; 3];
    let t0 = Instant::now();
    for rep in 0..reps {
        let train_seed = derive(1000, &[label::REPLICATION, rep, label::TRAIN]);
        let test_seed = derive(1000, &[label::REPLICATION, rep, label::TEST]);
        let mut ed = lhs_sample(&model, 50, train_seed).unwrap();
        ed.evaluate(ishigami);
        let mut test = lhs_sample(&model, 10_000, test_seed).unwrap();
        test.evaluate(ishigami);
        let y_test = test.y.clone().unwrap();

        let opts = BuildOptions::default();
        let (lars, _) = build_sparse(&model, &ed, RankSource::Lars, &opts).unwrap();
        let (omp, _) = build_sparse(&model, &ed, RankSource::Omp, &opts).unwrap();
        let config = RpceConfig {
            seed: train_seed,
            ..RpceConfig::default()
        };
        let (rpce_model, build_report, rep_report) = build_rpce(&model, &ed, &config).unwrap();
        if rep < 3 {
            for r in &build_report.visited {
                println!("  scored p={} eps_min={:.4e} J={}", r.p, r.eps_min, r.j);
            }
            println!("  stopped_early={}", build_report.stopped_early);
        }

        for (i, m) in [&lars, &omp, &rpce_model].into_iter().enumerate() {
            let pred: DVector<f64> = m.predict(&test.x).unwrap();
            let r2 = r_squared(&y_test, &pred).unwrap();
            sums[i] += r2;
            if i == 2 {
                println!(
                    "rep {rep}: lars p={} omp p={} rpce p={} terms={} choice={} r2={r2:.4}",
                    lars.p,
                    omp.p,
                    rpce_model.p,
                    m.terms(),
                    rep_report.choice,
                );
            }
        }
    }
    println!(
        "mean R2 over {reps} reps: LARS={:.4} OMP={:.4} rPCE={:.4}  ({:?})",
        sums[0] / reps as f64,
        sums[1] / reps as f64,
        sums[2] / reps as f64,
        t0.elapsed()
    );
}

fn run_varied() {
    let m = 31;
    let mut marginals = vec![Marginal::uniform(1.0, 2.0).unwrap(); m];
    marginals[19] = Marginal::uniform(1.0, 3.0).unwrap();
    let model = InputModel::new(marginals).unwrap();
    let train_seed = derive(2000, &[label::REPLICATION, 0, label::TRAIN]);
    let test_seed = derive(2000, &[label::REPLICATION, 0, label::TEST]);
    let mut ed = lhs_sample(&model, 200, train_seed).unwrap();
    ed.evaluate(varied_dim);
    let mut test = lhs_sample(&model, 1000, test_seed).unwrap();
    test.evaluate(varied_dim);
    let y_test = test.y.clone().unwrap();

    let opts = BuildOptions {
        p_max: 5,
        ..BuildOptions::default()
    };
    let t0 = Instant::now();
    let (lars, _) = build_sparse(&model, &ed, RankSource::Lars, &opts).unwrap();
    let r2_lars = r_squared(&y_test, &lars.predict(&test.x).unwrap()).unwrap();
    println!("plain LARS: p={} terms={} r2={r2_lars:.4} ({:?})", lars.p, lars.terms(), t0.elapsed());

    let t1 = Instant::now();
    let (omp, _) = build_sparse(&model, &ed, RankSource::Omp, &opts).unwrap();
    let r2_omp = r_squared(&y_test, &omp.predict(&test.x).unwrap()).unwrap();
    println!("plain OMP: p={} terms={} r2={r2_omp:.4} ({:?})", omp.p, omp.terms(), t1.elapsed());

    let t2 = Instant::now();
    let config = RpceConfig {
        k_set: vec![
            KValue::Fixed(3),
            KValue::Fixed(5),
            KValue::Fixed(10),
            KValue::Fixed(20),
        ],
        seed: train_seed,
        build: opts.clone(),
        ..RpceConfig::default()
    };
    let (rp, _, report) = build_rpce(&model, &ed, &config).unwrap();
    let r2_rpce = r_squared(&y_test, &rp.predict(&test.x).unwrap()).unwrap();
    println!(
        "rPCE: p={} terms={} choice={} r2={r2_rpce:.4} ({:?})",
        rp.p,
        rp.terms(),
        report.choice,
        t2.elapsed()
    );
}
