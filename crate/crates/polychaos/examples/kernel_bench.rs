//! Micro-benchmark of the correlation scan kernel.

use std::time::Instant;

use nalgebra::DMatrix;
use polychaos::basis::{enumerate_flat, UnivariateTable};
use polychaos::bench_internals::{product_dict_scan, ProductDictHandle};
use polychaos::prob::Family;
use rand::Rng;

fn main() {
    let (n, m, p) = (200usize, 31usize, 5usize);
    let mut rng = polychaos::seed::rng(1, &[0]);
    let xi = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-1.0..1.0));
    let families = vec![Family::Legendre; m];
    let alphas = enumerate_flat(m, p).unwrap();
    let table = UnivariateTable::new(&families, &xi, p).unwrap();
    let cols = alphas.len();
    println!("dictionary: {cols} columns x {n} rows");
    let dict = ProductDictHandle::new(&table, &alphas);

    for nb in [1usize, 2, 4, 8, 16, 38, 76] {
        let v: Vec<f64> = (0..n * nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let reps = if nb <= 4 { 6 } else { 3 };
        let t0 = Instant::now();
        let mut sink_sum = 0.0;
        for _ in 0..reps {
            sink_sum += product_dict_scan(&dict, &v, nb);
        }
        let el = t0.elapsed().as_secs_f64() / reps as f64;
        let flops = 2.0 * n as f64 * cols as f64 * nb as f64;
        println!(
            "nb={nb:3}: {:.3} s/scan  {:.2} Gflop/s  (sink {sink_sum:.3e})",
            el,
            flops / el / 1e9
        );
    }
}
