//! Sparse polynomial chaos expansions from small experimental designs, with
//! resampling-refined basis selection (rPCE) and Sobol sensitivity analysis.
//!
//! The pipeline: define an [`prob::InputModel`], sample a design with
//! [`prob::lhs_sample`], evaluate the response, build a sparse PCE with
//! [`pce::build_sparse`] or the resampling pipeline in [`rpce`], and obtain
//! Sobol indices from the coefficients via [`sobol::indices_from_pce`].

pub mod basis;
pub mod bench;
mod engine;
pub mod error;
pub mod normal;
pub mod pce;
pub mod prob;
pub mod regress;
pub mod rpce;
pub mod seed;
pub mod sobol;
pub mod select;

pub use error::{Error, Result};

/// Benchmark-only access to internal scan machinery. Not part of the API.
#[doc(hidden)]
pub mod bench_internals {
    use crate::basis::{IndexSet, UnivariateTable};
    use crate::engine::dict::ProductDict;
    use crate::engine::scan::scan_dots;

    pub struct ProductDictHandle<'a>(ProductDict<'a>);

    impl<'a> ProductDictHandle<'a> {
        pub fn new(table: &'a UnivariateTable, alphas: &'a IndexSet) -> Self {
            ProductDictHandle(ProductDict::new(table, alphas))
        }
    }

    pub fn product_dict_scan(dict: &ProductDictHandle, v: &[f64], nb: usize) -> f64 {
        let mut sum = 0.0;
        scan_dots(&dict.0, v, nb, false, &mut |_, len, dots| {
            sum += dots[..len].iter().sum::<f64>();
        });
        sum
    }
}
