#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod curves;
pub mod error;
pub mod numkit;
pub mod surface;
pub mod intrinsic;
pub mod tensors;
pub mod catalog;
pub mod verify;
pub mod cli;
