use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::emotion::{
    Channel, Emotion, EmotionEngine, EngineConfig, LabeledMatrix, TransitionStats, EMOTION_COUNT,
};
use crate::perception::{noisy_recognize, ConfusionMatrix};

/// Labels of the five satisfaction levels, lowest first.
pub const SATISFACTION_LEVELS: [&str; 5] = [
    "very dissatisfied",
    "dissatisfied",
    "okay",
    "satisfied",
    "very satisfied",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialPolicy {
    /// The robot reacts through the emotion engine.
    Engine,
    /// The robot answers with happy to positive and sad to negative
    /// recognitions, bypassing the engine.
    Mirror,
}

/// Which user emotion a robot response is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmpathyReference {
    Recognized,
    True,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub participants: usize,
    pub interactions: usize,
    pub seed: u64,
    pub policy: TrialPolicy,
    pub empathy_reference: EmpathyReference,
    /// Breeder stimulus applied per recognized emotion.
    pub stimulus: f64,
    /// Engine ticks between a stimulus and reading the robot's emotion;
    /// defaults to the engine's transition interval.
    pub ticks_per_interaction: Option<u64>,
    pub engine: EngineConfig,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            participants: 20,
            interactions: 50,
            seed: 7,
            policy: TrialPolicy::Engine,
            empathy_reference: EmpathyReference::Recognized,
            stimulus: 1.0,
            ticks_per_interaction: None,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    /// Participants per satisfaction level, lowest first.
    pub histogram: [usize; 5],
    /// Share of empathetic responses per participant.
    pub empathy: Vec<f64>,
    /// Observed `P(predicted | true)`, indexed `[predicted][true]`.
    pub confusion_estimate: LabeledMatrix,
    pub recognitions: usize,
}

/// Maps a share of empathetic responses to a level index 0..=4: each fifth
/// of the unit interval is one level and a perfect share lands in the top.
pub fn satisfaction_level(empathetic_share: f64) -> usize {
    ((empathetic_share.clamp(0.0, 1.0) * 5.0) as usize).min(4)
}

pub fn run_emotion_trial(
    config: &TrialConfig,
    matrix: &ConfusionMatrix,
    stats: &TransitionStats,
) -> Result<TrialResult, SimError> {
    if config.participants == 0 || config.interactions == 0 {
        return Err(SimError::EmptyTrial);
    }
    if !(config.stimulus.is_finite() && config.stimulus > 0.0) {
        return Err(SimError::InvalidConfig("stimulus must be positive".into()));
    }
    config.engine.validate()?;
    let ticks = config
        .ticks_per_interaction
        .unwrap_or(config.engine.transition_interval)
        .max(1);

    let mut counts = [[0usize; EMOTION_COUNT]; EMOTION_COUNT];
    let mut histogram = [0usize; 5];
    let mut empathy = Vec::with_capacity(config.participants);
    for p in 0..config.participants {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(p as u64);
        let mut engine = EmotionEngine::new(config.engine.clone(), stats.clone())?;
        let mut hits = 0usize;
        for _ in 0..config.interactions {
            let truth = Emotion::ALL[((rng.random::<f64>() * 7.0) as usize).min(6)];
            let seen = noisy_recognize(truth, matrix, &mut rng);
            counts[seen.index()][truth.index()] += 1;
            let response = match config.policy {
                TrialPolicy::Mirror => {
                    if seen.is_positive() {
                        Emotion::Happy
                    } else {
                        Emotion::Sad
                    }
                }
                TrialPolicy::Engine => {
                    let channel = if seen.is_positive() {
                        Channel::S3
                    } else {
                        Channel::S4
                    };
                    engine.stimulate(channel, config.stimulus)?;
                    for _ in 0..ticks {
                        engine.tick(&mut rng);
                    }
                    engine.state().current
                }
            };
            let reference = match config.empathy_reference {
                EmpathyReference::Recognized => seen,
                EmpathyReference::True => truth,
            };
            if response.polarity() == reference.polarity() {
                hits += 1;
            }
        }
        let share = hits as f64 / config.interactions as f64;
        histogram[satisfaction_level(share)] += 1;
        empathy.push(share);
    }

    let mut confusion_estimate = [[0.0; EMOTION_COUNT]; EMOTION_COUNT];
    for t in 0..EMOTION_COUNT {
        let total: usize = (0..EMOTION_COUNT).map(|p| counts[p][t]).sum();
        if total == 0 {
            continue;
        }
        for p in 0..EMOTION_COUNT {
            confusion_estimate[p][t] = counts[p][t] as f64 / total as f64;
        }
    }
    Ok(TrialResult {
        histogram,
        empathy,
        confusion_estimate,
        recognitions: config.participants * config.interactions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        assert_eq!(satisfaction_level(0.0), 0);
        assert_eq!(satisfaction_level(0.19), 0);
        assert_eq!(satisfaction_level(0.2), 1);
        assert_eq!(satisfaction_level(0.8), 4);
        assert_eq!(satisfaction_level(1.0), 4);
    }

    #[test]
    fn mirror_with_perfect_recognition_is_top_rated() {
        let cfg = TrialConfig {
            policy: TrialPolicy::Mirror,
            empathy_reference: EmpathyReference::True,
            ..TrialConfig::default()
        };
        let r = run_emotion_trial(&cfg, &ConfusionMatrix::identity(), &TransitionStats::bundled())
            .unwrap();
        assert_eq!(r.histogram, [0, 0, 0, 0, 20]);
        assert!(r.empathy.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn empty_trial() {
        let cfg = TrialConfig {
            interactions: 0,
            ..TrialConfig::default()
        };
        assert!(matches!(
            run_emotion_trial(&cfg, &ConfusionMatrix::bundled(), &TransitionStats::bundled()),
            Err(SimError::EmptyTrial)
        ));
    }

    #[test]
    fn engine_policy_runs() {
        let r = run_emotion_trial(
            &TrialConfig::default(),
            &ConfusionMatrix::bundled(),
            &TransitionStats::bundled(),
        )
        .unwrap();
        assert_eq!(r.histogram.iter().sum::<usize>(), 20);
        assert_eq!(r.recognitions, 1000);
    }
}
