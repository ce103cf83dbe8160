//! Probabilistic pet emotion engine.
//!
//! Four stimulus channels (environment positive/negative, breeder
//! positive/negative) feed per-target transition intensities, which are
//! normalized into a transition distribution and sampled among the top-k
//! targets. Stimuli rise and decay over time and every realized transition
//! strengthens the personality bias toward its target.

mod engine;
mod matrix;
mod stimulus;
mod transition;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::socialgraph::PropId;

pub use engine::{EmotionEngine, EngineConfig, EngineSnapshot, TickRecord};
pub use matrix::{format_labeled_matrix, read_labeled_matrix, LabeledMatrix, MatrixFileError};
pub use stimulus::{step_response, Channel, StimulusTrace, PEAK_FRACTION};
pub use transition::{
    breeder_stimuli, comfort, env_stimuli, personality_update, sample_top_k,
    transition_intensity, transition_probabilities, EmotionState, Liking, PersonalityVector,
    PropItem, SensorFrame, Stimuli, TransitionStats, INTENSITY_FLOOR,
};

#[derive(Debug, Error)]
pub enum EmotionError {
    #[error("sensor weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("invalid sensor frame: {0}")]
    InvalidFrame(String),
    #[error("unknown prop `{0}`")]
    UnknownProp(PropId),
    #[error("invalid prop: {0}")]
    InvalidProp(String),
    #[error("time {t} precedes stimulus onset {onset}")]
    BeforeOnset { t: f64, onset: f64 },
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),
    #[error("invalid personality: {0}")]
    InvalidPersonality(String),
    #[error("invalid engine configuration: {0}")]
    InvalidConfig(String),
    #[error("transition probabilities have not been computed")]
    NoProbabilities,
    #[error(transparent)]
    Matrix(#[from] MatrixFileError),
}

/// The seven emotions, in the fixed label order used for indexing and
/// tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Anger,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
    Neutral,
}

pub const EMOTION_COUNT: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Emotion {
    pub const ALL: [Emotion; EMOTION_COUNT] = [
        Emotion::Anger,
        Emotion::Disgust,
        Emotion::Fear,
        Emotion::Happy,
        Emotion::Sad,
        Emotion::Surprise,
        Emotion::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Emotion> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Disgust => "disgust",
            Emotion::Fear => "fear",
            Emotion::Happy => "happy",
            Emotion::Sad => "sad",
            Emotion::Surprise => "surprise",
            Emotion::Neutral => "neutral",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            Emotion::Happy | Emotion::Surprise | Emotion::Neutral => Polarity::Positive,
            Emotion::Anger | Emotion::Disgust | Emotion::Fear | Emotion::Sad => Polarity::Negative,
        }
    }

    pub fn is_positive(self) -> bool {
        self.polarity() == Polarity::Positive
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown emotion label `{0}`")]
pub struct UnknownEmotion(pub String);

impl FromStr for Emotion {
    type Err = UnknownEmotion;

    /// Accepts the canonical labels plus `angry` and `calm`/`calmness`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "anger" | "angry" => Emotion::Anger,
            "disgust" => Emotion::Disgust,
            "fear" => Emotion::Fear,
            "happy" | "happiness" => Emotion::Happy,
            "sad" | "sadness" => Emotion::Sad,
            "surprise" => Emotion::Surprise,
            "neutral" | "calm" | "calmness" => Emotion::Neutral,
            _ => return Err(UnknownEmotion(s.to_owned())),
        })
    }
}
