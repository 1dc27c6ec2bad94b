//! Tucker compression of dense tensors by single-mode sketching.
//!
//! [`rtsms::rtsms`] picks ranks adaptively from a tolerance,
//! [`rtsms::rtsms_fixed_rank`] takes them as input, and [`baselines`] holds
//! deterministic and randomized HOSVD variants for comparison. Tensor and
//! Tucker file formats, report records and the command-line front end live
//! in [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod error;
pub mod gallery;
pub mod rank_estimation;
pub mod rtsms;
pub mod sketched_lsq;
pub mod sketching;
pub mod tensor;

pub use error::{Error, Result};
