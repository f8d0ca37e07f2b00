use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 5;

/// Material class of a pixel. Codes are fixed and appear verbatim in mask
/// files and metrics reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum ClassLabel {
    Background = 0,
    Hdpe = 1,
    Pet = 2,
    Pp = 3,
    Ps = 4,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::Background,
        ClassLabel::Hdpe,
        ClassLabel::Pet,
        ClassLabel::Pp,
        ClassLabel::Ps,
    ];

    /// The four plastic classes, in ascending code order.
    pub const PLASTICS: [ClassLabel; 4] = [ClassLabel::Hdpe, ClassLabel::Pet, ClassLabel::Pp, ClassLabel::Ps];

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or(Error::InvalidLabel(code))
    }

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Background => "Background",
            ClassLabel::Hdpe => "HDPE",
            ClassLabel::Pet => "PET",
            ClassLabel::Pp => "PP",
            ClassLabel::Ps => "PS",
        }
    }

    /// Fixed display colour: BG gray, HDPE blue, PET green, PP orange, PS red.
    pub fn rgb(self) -> [u8; 3] {
        match self {
            ClassLabel::Background => [128, 128, 128],
            ClassLabel::Hdpe => [31, 119, 180],
            ClassLabel::Pet => [44, 160, 44],
            ClassLabel::Pp => [255, 127, 14],
            ClassLabel::Ps => [214, 39, 40],
        }
    }

    /// Case-insensitive lookup by name (`bg` is accepted for Background).
    pub fn from_name(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "bg" | "background" => Some(ClassLabel::Background),
            "hdpe" => Some(ClassLabel::Hdpe),
            "pet" => Some(ClassLabel::Pet),
            "pp" => Some(ClassLabel::Pp),
            "ps" => Some(ClassLabel::Ps),
            _ => None,
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
