//! Explanatory ranking of belief statements about agents in keys-and-doors
//! gridworlds.
//!
//! An agent navigates a gridworld, opening boxes to find colored keys that
//! unlock doors on the way to a treasure chest. An observer watches the
//! agent's actions and partial observations (box contents stay hidden until
//! opened) and asks: of several candidate statements about the agent's
//! beliefs, which ones are the best explanations of the behavior?
//!
//! The crate answers this with a generative model of belief-driven action:
//!
//! * [`grid`] — the deterministic gridworld (maps, states, actions,
//!   observations) and enumeration of candidate initial worlds.
//! * [`belief`] — particle beliefs over candidate worlds, the belief prior,
//!   and consistency-based updates.
//! * [`planner`] — goal-cost estimates over beliefs and the softmax-rational
//!   action distribution, plus trajectory rollouts.
//! * [`elot`] — a small epistemic formula language (`believes`, `knows`,
//!   `certain` over statements about boxes and keys) with probabilistic
//!   modal semantics.
//! * [`observer`] — exact joint filtering over (world, belief) hypotheses,
//!   statement accuracy, and listener informativity.
//! * [`causal`] — hypothetical belief interventions at the last
//!   belief-change step: normality, necessity, sufficiency, causal strength.
//! * [`attribution`] — statement scoring, sequential-choice ranking
//!   distributions, coefficient fitting, and bootstrap intervals.
//! * [`scenario`] / [`pipeline`] — scenario files, end-to-end runs, CSV/JSON
//!   export.
//! * [`oracle`] — a brute-force re-derivation of every model quantity, used
//!   to cross-check the pipeline.
//!
//! With the default `parallel` feature, filtering, causal rollouts, and
//! coefficient grid search run data-parallel on rayon; disabling the feature
//! gives a dependency-free sequential build with identical outputs.

pub mod attribution;
pub mod belief;
pub mod causal;
pub mod elot;
pub mod error;
mod exec;
pub mod grid;
pub mod observer;
pub mod oracle;
pub mod pipeline;
pub mod planner;
pub mod scenario;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
