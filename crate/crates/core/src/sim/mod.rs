//! Procedural grid-house environment.

pub mod geodesic;
pub mod io;
pub mod layout;
pub mod motion;
pub mod observe;
pub mod question;
pub mod suite;
pub mod vocab;

pub use geodesic::{geodesic_distance, DistanceError, DistanceField};
pub use layout::{
    generate_house, CellKind, DoorId, GenConfig, GenError, HouseLayout, ObjectId, RoomId,
};
pub use motion::{step, Action, AgentState, Heading, Motion, Pos};
pub use observe::{observe, FeatureLayout};
pub use question::{generate_question, Question};
pub use suite::{generate_suite, house_seed};
pub use vocab::{Vocab, VocabSizes};
