#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classifier;
pub mod data;
pub mod dynamics;
pub mod encoding;
pub mod lattice;
pub mod linalg;
pub mod report;
pub mod roots;
pub mod spectrum;
pub mod threshold;
pub mod training;
