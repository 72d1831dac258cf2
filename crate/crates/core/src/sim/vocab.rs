//! Room-type, object-type and color vocabularies.
//!
//! Names come from fixed lists; sizes beyond a list are filled with
//! synthetic `room7`/`object61` style names so any configured size works.

use serde::{Deserialize, Serialize};

const ROOM_NAMES: [&str; 12] = [
    "hall", "living", "bedroom", "kitchen", "dining", "bathroom", "office", "gym", "garage",
    "patio", "lobby", "balcony",
];

const OBJECT_NAMES: [&str; 50] = [
    "fireplace",
    "sofa",
    "table",
    "chair",
    "bed",
    "oven",
    "refrigerator",
    "television",
    "lamp",
    "piano",
    "bathtub",
    "toilet",
    "sink",
    "shower",
    "dresser",
    "wardrobe",
    "bookshelf",
    "desk",
    "computer",
    "plant",
    "vase",
    "mirror",
    "rug",
    "clock",
    "microwave",
    "dishwasher",
    "stove",
    "kettle",
    "cup",
    "xbox",
    "ottoman",
    "armchair",
    "cabinet",
    "shelf",
    "painting",
    "curtain",
    "pillow",
    "blanket",
    "fan",
    "heater",
    "washer",
    "dryer",
    "treadmill",
    "bicycle",
    "car",
    "grill",
    "bench",
    "umbrella",
    "speaker",
    "printer",
];

const COLOR_NAMES: [&str; 12] = [
    "red", "orange", "yellow", "green", "blue", "purple", "brown", "white", "black", "gray",
    "pink", "beige",
];

/// Sizes of the three vocabularies. Names are derived from the sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VocabSizes {
    pub room_types: usize,
    pub object_types: usize,
    pub colors: usize,
}

impl Default for VocabSizes {
    fn default() -> Self {
        Self {
            room_types: 12,
            object_types: 50,
            colors: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub sizes: VocabSizes,
    pub rooms: Vec<String>,
    pub objects: Vec<String>,
    pub colors: Vec<String>,
}

fn names(list: &[&str], n: usize, prefix: &str) -> Vec<String> {
    (0..n)
        .map(|i| {
            list.get(i)
                .map_or_else(|| format!("{prefix}{i}"), |s| s.to_string())
        })
        .collect()
}

impl Vocab {
    pub fn new(sizes: VocabSizes) -> Self {
        Self {
            sizes,
            rooms: names(&ROOM_NAMES, sizes.room_types, "room"),
            objects: names(&OBJECT_NAMES, sizes.object_types, "object"),
            colors: names(&COLOR_NAMES, sizes.colors, "color"),
        }
    }

    /// Room type index reserved for the connecting corridor.
    pub const HALL: usize = 0;

    /// Phrase used when a question names a room ("living room", "hall").
    pub fn room_phrase(&self, room_type: usize) -> Vec<String> {
        let name = &self.rooms[room_type];
        match name.as_str() {
            "hall" | "bedroom" | "bathroom" | "office" | "gym" | "garage" | "patio" | "lobby"
            | "balcony" | "kitchen" => vec![name.clone()],
            _ => vec![name.clone(), "room".to_string()],
        }
    }

    /// The room type objects of this type usually live in (never the hall
    /// unless the hall is the only type).
    pub fn home_room(&self, object_type: usize) -> usize {
        let r = self.sizes.room_types;
        if r <= 1 {
            0
        } else {
            1 + object_type % (r - 1)
        }
    }

    pub fn object_index(&self, name: &str) -> Option<usize> {
        self.objects.iter().position(|n| n == name)
    }

    pub fn room_index(&self, name: &str) -> Option<usize> {
        self.rooms.iter().position(|n| n == name)
    }

    pub fn color_index(&self, name: &str) -> Option<usize> {
        self.colors.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_and_synthetic_names() {
        let v = Vocab::new(VocabSizes::default());
        assert_eq!(v.rooms.len(), 12);
        assert_eq!(v.objects.len(), 50);
        assert_eq!(v.colors.len(), 8);
        assert_eq!(v.rooms[0], "hall");
        let big = Vocab::new(VocabSizes {
            room_types: 14,
            object_types: 52,
            colors: 3,
        });
        assert_eq!(big.rooms[13], "room13");
        assert_eq!(big.objects[51], "object51");
        assert_eq!(v.room_phrase(1), vec!["living", "room"]);
        assert!((0..50).all(|o| v.home_room(o) != Vocab::HALL));
    }
}
