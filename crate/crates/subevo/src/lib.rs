//! Asymptotic theory of resampling without replacement for robust and
//! logistic regression in the proportional regime, together with a Monte
//! Carlo simulator for validating it: proximal loss families, deterministic
//! state-evolution solvers, the cross-subsample correlation fixed point,
//! data-driven risk estimators, and a subsampling/bagging harness.

// negated comparisons like !(x > 0.0) keep NaN parameters failing validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod loss;
pub mod quad;
pub mod rng;
pub mod special;

pub use error::{Result, SubevoError};
pub mod estimate;
pub mod linalg;
pub mod sim;
pub mod state;

use std::sync::Once;

static THREAD_POOL_INIT: Once = Once::new();

/// Configure the global worker pool once, honoring `SUBEVO_THREADS`.
/// Later calls are no-ops; without the variable the hardware default is kept.
pub fn init_thread_pool() {
    THREAD_POOL_INIT.call_once(|| {
        if let Ok(v) = std::env::var("SUBEVO_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                if n >= 1 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}
