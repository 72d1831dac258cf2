//! Neural modular control on procedural grid houses.
//!
//! A master policy proposes semantic subgoals (`exit-room`, `find-room[x]`,
//! `find-object[x]`, `answer`), argument-conditioned sub-policies execute them
//! with primitive motion actions, and a frozen answering module replies to a
//! color question from the last frames of the navigation path.
//!
//! Module map:
//! - [`sim`]: grid-house generator, transitions, observations, questions.
//! - [`planner`]: expert shortest paths and subgoal lifting.
//! - [`tensor`]: parameter store, tape-based gradients, Adam.
//! - [`policy`]: master / sub-policy / answerer networks and the control loop.
//! - [`train`]: behavior cloning, rewards, GAE, A3C, curriculum, stages.
//! - [`eval`]: sub-policy success, master IoU, EQA metrics.

pub mod eval;
pub mod par;
pub mod planner;
pub mod policy;
pub mod sim;
pub mod tensor;
pub mod train;
pub mod util;

pub use par::Exec;
