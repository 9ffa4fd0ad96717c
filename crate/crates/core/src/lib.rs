// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod estimators;
pub mod evaluation;
pub mod interventions;
pub mod logdata;
pub mod rng;
pub mod simulator;
