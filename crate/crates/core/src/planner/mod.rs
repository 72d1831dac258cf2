//! Expert demonstrations and their lifting into subgoal plans.

pub mod dataset;
pub mod lift;
pub mod path;
pub mod subgoal;

pub use dataset::{build_dataset, build_plan, PlanCorpus, PlanRecord, ANSWER_FRAMES};
pub use lift::{lift_trajectory, room_out_degree, AnnotatedPlan, PlanSegment};
pub use path::{
    shortest_path, shortest_path_to, shortest_path_to_object, ExpertTrajectory, SUCCESS_RADIUS,
};
pub use subgoal::{Subgoal, SubgoalSpace, Task};
