//! Internal ranking engine: shared-dictionary correlation scans driving
//! greedy basis pursuit for one build or many resampling builds at once.

pub mod degree;
pub mod dict;
pub mod path;
pub mod phase;
pub mod qr;
pub mod scan;
