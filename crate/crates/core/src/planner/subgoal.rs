//! Subgoals: a task paired with an optional vocabulary argument.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::sim::{Vocab, VocabSizes};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ExitRoom,
    FindRoom,
    FindObject,
    Answer,
}

impl Task {
    /// Tasks executed by sub-policies.
    pub const MOTION: [Task; 3] = [Task::ExitRoom, Task::FindRoom, Task::FindObject];

    pub fn name(self) -> &'static str {
        match self {
            Task::ExitRoom => "exit-room",
            Task::FindRoom => "find-room",
            Task::FindObject => "find-object",
            Task::Answer => "answer",
        }
    }

    pub fn parse(s: &str) -> Option<Task> {
        match s {
            "exit-room" => Some(Task::ExitRoom),
            "find-room" => Some(Task::FindRoom),
            "find-object" => Some(Task::FindObject),
            "answer" => Some(Task::Answer),
            _ => None,
        }
    }

    pub fn motion_index(self) -> Option<usize> {
        Task::MOTION.iter().position(|&t| t == self)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `⟨task, argument⟩`. The argument is a room type for `find-room`, an
/// object type for `find-object` and absent otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subgoal {
    pub task: Task,
    pub arg: Option<usize>,
}

impl Subgoal {
    pub const EXIT_ROOM: Subgoal = Subgoal {
        task: Task::ExitRoom,
        arg: None,
    };
    pub const ANSWER: Subgoal = Subgoal {
        task: Task::Answer,
        arg: None,
    };

    pub fn find_room(room_type: usize) -> Self {
        Self {
            task: Task::FindRoom,
            arg: Some(room_type),
        }
    }

    pub fn find_object(object_type: usize) -> Self {
        Self {
            task: Task::FindObject,
            arg: Some(object_type),
        }
    }

    pub fn name(&self, vocab: &Vocab) -> String {
        match (self.task, self.arg) {
            (Task::FindRoom, Some(a)) => format!("find-room[{}]", vocab.rooms[a]),
            (Task::FindObject, Some(a)) => format!("find-object[{}]", vocab.objects[a]),
            (t, _) => t.name().to_string(),
        }
    }

    pub fn parse(s: &str, vocab: &Vocab) -> Option<Subgoal> {
        if let Some(t) = Task::parse(s) {
            return matches!(t, Task::ExitRoom | Task::Answer)
                .then_some(Subgoal { task: t, arg: None });
        }
        let (task, rest) = s.split_once('[')?;
        let arg = rest.strip_suffix(']')?;
        match Task::parse(task)? {
            Task::FindRoom => vocab.room_index(arg).map(Subgoal::find_room),
            Task::FindObject => vocab.object_index(arg).map(Subgoal::find_object),
            _ => None,
        }
    }
}

/// Dense indexing of all subgoals: exit-room, answer, find-room[*],
/// find-object[*].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubgoalSpace {
    pub rooms: usize,
    pub objects: usize,
}

impl SubgoalSpace {
    pub fn new(vocab: VocabSizes) -> Self {
        Self {
            rooms: vocab.room_types,
            objects: vocab.object_types,
        }
    }

    pub fn len(&self) -> usize {
        self.rooms + self.objects + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the "no previous subgoal" token fed to the master at step 0.
    pub fn start_token(&self) -> usize {
        self.len()
    }

    pub fn index(&self, g: Subgoal) -> usize {
        match (g.task, g.arg) {
            (Task::ExitRoom, _) => 0,
            (Task::Answer, _) => 1,
            (Task::FindRoom, Some(a)) => 2 + a,
            (Task::FindObject, Some(a)) => 2 + self.rooms + a,
            (t, None) => panic!("{t} requires an argument"),
        }
    }

    pub fn subgoal(&self, index: usize) -> Subgoal {
        match index {
            0 => Subgoal::EXIT_ROOM,
            1 => Subgoal::ANSWER,
            i if i < 2 + self.rooms => Subgoal::find_room(i - 2),
            i if i < self.len() => Subgoal::find_object(i - 2 - self.rooms),
            i => panic!("subgoal index {i} out of range"),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = Subgoal> + '_ {
        (0..self.len()).map(|i| self.subgoal(i))
    }
}
