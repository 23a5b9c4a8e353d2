#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banach;
pub mod certify;
pub mod cli;
pub mod concave;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lyapunov;
pub mod operator;
pub mod pipeline;
pub mod riccati;
pub mod semigroup;
