//! Templated color questions and their fixed token-sum encoding.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::layout::{HouseLayout, ObjectId, RoomId};
use super::vocab::Vocab;
use crate::util::{fnv1a, rng_for};
use rand_distr::StandardNormal;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuestionError {
    #[error("house {0} has no object whose type is unique within its room")]
    NoUnambiguousTarget(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: usize,
    pub tokens: Vec<String>,
    pub target_object: ObjectId,
    pub target_room: RoomId,
    pub answer: usize,
    pub encoding: Vec<f64>,
}

impl Question {
    pub fn text(&self) -> String {
        format!("{}?", self.tokens.join(" "))
    }
}

/// Sum of fixed pseudo-random token vectors (one N(0, 1/dim) vector per
/// distinct token string).
pub fn encode_tokens(tokens: &[String], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let scale = 1.0 / (dim as f64).sqrt();
    for t in tokens {
        let mut rng = rng_for(fnv1a(t.as_bytes()), &[0x746f_6b65]);
        for o in out.iter_mut() {
            *o += scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    out
}

/// Objects whose type occurs exactly once in their room.
pub fn unambiguous_targets(house: &HouseLayout) -> Vec<ObjectId> {
    house
        .objects
        .iter()
        .filter(|o| {
            house
                .objects_in(o.room)
                .filter(|p| p.object_type == o.object_type)
                .count()
                == 1
        })
        .map(|o| o.id)
        .collect()
}

/// Builds the question for a specific target object.
pub fn question_for(house: &HouseLayout, target: ObjectId, id: usize, q_dim: usize) -> Question {
    let vocab = Vocab::new(house.vocab);
    let obj = &house.objects[target];
    let mut tokens: Vec<String> = ["what", "color", "is", "the"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    tokens.push(vocab.objects[obj.object_type].clone());
    let other_rooms = house
        .objects
        .iter()
        .any(|o| o.object_type == obj.object_type && o.room != obj.room);
    if other_rooms {
        tokens.push("in".into());
        tokens.push("the".into());
        tokens.extend(vocab.room_phrase(house.rooms[obj.room].room_type));
    }
    let encoding = encode_tokens(&tokens, q_dim);
    Question {
        id,
        tokens,
        target_object: target,
        target_room: obj.room,
        answer: obj.color,
        encoding,
    }
}

pub fn generate_question<R: Rng>(
    house: &HouseLayout,
    rng: &mut R,
    id: usize,
    q_dim: usize,
) -> Result<Question, QuestionError> {
    let candidates = unambiguous_targets(house);
    if candidates.is_empty() {
        return Err(QuestionError::NoUnambiguousTarget(house.id));
    }
    let target = candidates[rng.gen_range(0..candidates.len())];
    Ok(question_for(house, target, id, q_dim))
}
