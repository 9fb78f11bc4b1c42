//! Behavioral simulator of DRAM arrays under process variation, remanence
//! decay, environmental stress, and aging — plus the security primitives
//! built on top of them: a startup-value PUF with enrollment and
//! authentication, true-random-number pipelines (remanence, startup values
//! with debiasing, power-supply noise with feedback tuning), and an embedded
//! statistical randomness test suite.

pub mod bits;
pub mod dram;
pub mod error;
pub mod puf;
pub mod randtest;
pub mod rng;
pub mod special;
pub mod stats;
pub mod supply;
pub mod trng;

pub use bits::BitVector;
pub use dram::{ArrayGeometry, DramDevice, EnvCondition, ProcessParams};
pub use error::{Error, Result};
