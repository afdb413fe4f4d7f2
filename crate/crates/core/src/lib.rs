//! Hessenberg input-normal (HIN) realizations of stable controllable linear
//! systems.
//!
//! A HIN pair `(A, B)` is simultaneously input normal (`A·Aᵀ + B·Bᵀ = I`)
//! and in Hessenberg form. Such pairs are exactly the leading `n` rows of a
//! product of `n·d` Givens rotations, which gives
//!
//! * a compact parameterization by `n·d` angles ([`hin::AngleVector`]),
//! * matrix-free state advances in `4·n·d` multiplications ([`hin::HinOperator`]),
//! * a conversion pipeline from any stable controllable pair ([`transform`]),
//! * a least-squares identification harness showing the sample Grammian of a
//!   HIN realization tends to a multiple of the identity ([`sysid`]).

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod givens;
pub mod hin;
pub mod linalg;
pub mod pair;
pub mod sysid;
pub mod system_file;
pub mod transform;

pub use error::{Error, Result};
pub use givens::{GivensRotation, OpCounter};
pub use hin::{AngleVector, HinClass, HinOperator, HinPair};
pub use linalg::Matrix;
pub use pair::InputPair;
