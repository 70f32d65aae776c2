//! Dequantizing bounds, one-shot classical coding over classical-quantum
//! channels, and the iid rate reduction by the method of types.
//!
//! Dense complex linear algebra throughout; logarithms are base 2.

pub mod channel;
pub mod coding;
pub mod dequantizer;
pub mod entropy;
pub mod error;
pub mod json;
pub mod linalg;
pub mod operator;
pub mod random;
pub mod types;
pub mod verify;

pub use channel::{ChoiPositivity, CqDilation, QuantumChannel, Stinespring};
pub use error::{Error, Result};
pub use operator::{fidelity, purified_distance, Operator, Permutation, PureState, Schatten, SchmidtForm};
