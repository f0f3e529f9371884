//! Blom key predistribution over GF(q), the random-public-matrix variant with
//! dynamic rekeying, a step-accurate mesh-array multiplication simulator, a
//! deterministic protocol simulator and an operation-counting benchmark.

pub mod bench;
pub mod blom;
pub mod fixtures;
pub mod gfmat;
pub mod mesharray;
pub mod netsim;
pub mod rng;
