//! Tick-driven emotion engine for one pet.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::stimulus::{Channel, StimulusTrace};
use super::transition::{
    breeder_stimuli, comfort, env_stimuli, EmotionState, PersonalityVector, PropItem,
    SensorFrame, Stimuli, TransitionStats,
};
use super::{Emotion, EmotionError, EMOTION_COUNT};
use crate::socialgraph::PropId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Simulated seconds per tick.
    pub tick_seconds: f64,
    /// Ticks between emotion transitions.
    pub transition_interval: u64,
    pub top_k: usize,
    /// Decay time constant per channel (S1..S4), seconds.
    pub decay: [f64; 4],
    /// Damping of the stimulus rise.
    pub damping: f64,
    /// Natural frequency of the rise; `None` uses `4 / decay` per channel.
    pub natural_freq: Option<f64>,
    pub initial_emotion: Emotion,
    pub personality: [f64; EMOTION_COUNT],
    pub growth: f64,
    pub personality_cap: Option<f64>,
    /// Decayed traces below this value are dropped.
    pub spent_floor: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            tick_seconds: 1.0,
            transition_interval: 10,
            top_k: 3,
            decay: [20.0; 4],
            damping: 1.0,
            natural_freq: None,
            initial_emotion: Emotion::Neutral,
            personality: [0.25; EMOTION_COUNT],
            growth: 0.01,
            personality_cap: Some(2.0),
            spent_floor: 1e-6,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EmotionError> {
        let bad = |m: String| Err(EmotionError::InvalidConfig(m));
        if !(self.tick_seconds.is_finite() && self.tick_seconds > 0.0) {
            return bad(format!("tick_seconds = {}", self.tick_seconds));
        }
        if self.transition_interval == 0 {
            return bad("transition_interval must be positive".into());
        }
        if !(1..=EMOTION_COUNT).contains(&self.top_k) {
            return bad(format!("top_k = {}", self.top_k));
        }
        if self.decay.iter().any(|tc| !(tc.is_finite() && *tc > 0.0)) {
            return bad(format!("decay = {:?}", self.decay));
        }
        if !(self.damping.is_finite() && self.damping > 0.0) {
            return bad(format!("damping = {}", self.damping));
        }
        if let Some(w) = self.natural_freq {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("natural_freq = {w}"));
            }
        }
        if !(self.spent_floor.is_finite() && self.spent_floor >= 0.0) {
            return bad(format!("spent_floor = {}", self.spent_floor));
        }
        PersonalityVector::new(self.personality, self.growth, self.personality_cap)?;
        Ok(())
    }
}

/// What the engine emits once per tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub emotion: Emotion,
    pub probabilities: [f64; EMOTION_COUNT],
    pub stimuli: Stimuli,
    /// Target chosen on this tick, if a transition was due.
    pub transition: Option<Emotion>,
}

impl TickRecord {
    /// `tick=<n> emotion=<label> p=<7 values> s=<4 values>`, one line.
    pub fn to_line(&self) -> String {
        let mut out = format!("tick={} emotion={} p=", self.tick, self.emotion);
        for (i, p) in self.probabilities.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{p}");
        }
        out.push_str(" s=");
        for (i, s) in self.stimuli.as_array().iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{s}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub tick: u64,
    pub time: f64,
    pub emotion: Emotion,
    pub probabilities: [f64; EMOTION_COUNT],
    pub stimuli: Stimuli,
    pub personality: [f64; EMOTION_COUNT],
    pub traces: Vec<StimulusTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comfort: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EmotionEngine {
    config: EngineConfig,
    state: EmotionState,
    tick: u64,
    props: BTreeMap<PropId, PropItem>,
    comfort: Option<f64>,
}

impl EmotionEngine {
    pub fn new(config: EngineConfig, stats: TransitionStats) -> Result<Self, EmotionError> {
        config.validate()?;
        let personality =
            PersonalityVector::new(config.personality, config.growth, config.personality_cap)?;
        let mut state = EmotionState::new(config.initial_emotion, personality, stats, config.top_k)?;
        state.update_probabilities(0.0);
        Ok(Self {
            config,
            state,
            tick: 0,
            props: BTreeMap::new(),
            comfort: None,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn state(&self) -> &EmotionState {
        &self.state
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.tick_seconds
    }

    pub fn register_prop(&mut self, prop: PropItem) {
        self.props.insert(prop.id.clone(), prop);
    }

    pub fn prop(&self, id: &PropId) -> Option<&PropItem> {
        self.props.get(id)
    }

    /// Starts a stimulus of `magnitude` on `channel` at the current time.
    /// Zero magnitudes are ignored.
    pub fn stimulate(&mut self, channel: Channel, magnitude: f64) -> Result<(), EmotionError> {
        if magnitude == 0.0 {
            return Ok(());
        }
        let tc = self.config.decay[channel.index()];
        let w = self.config.natural_freq.unwrap_or(4.0 / tc);
        let trace = StimulusTrace::new(
            channel,
            magnitude,
            self.time(),
            tc,
            self.config.damping,
            w,
        )?;
        self.state.traces.push(trace);
        Ok(())
    }

    /// Feeds a registered prop; returns the (positive, negative) breeder stimuli.
    pub fn feed(&mut self, prop: &PropId) -> Result<(f64, f64), EmotionError> {
        let item = self
            .props
            .get(prop)
            .ok_or_else(|| EmotionError::UnknownProp(prop.clone()))?;
        let (s3, s4) = breeder_stimuli(item);
        self.stimulate(Channel::S3, s3)?;
        self.stimulate(Channel::S4, s4)?;
        Ok((s3, s4))
    }

    /// Applies a sensor frame; returns (comfort, positive, negative).
    pub fn sense(&mut self, frame: &SensorFrame) -> Result<(f64, f64, f64), EmotionError> {
        let e = comfort(frame)?;
        let (s1, s2) = env_stimuli(e, frame.threshold);
        self.stimulate(Channel::S1, s1)?;
        self.stimulate(Channel::S2, s2)?;
        self.comfort = Some(e);
        Ok((e, s1, s2))
    }

    pub fn stimuli(&self) -> Stimuli {
        self.state.stimuli_at(self.time())
    }

    pub fn tick<R: Rng + ?Sized>(&mut self, rng: &mut R) -> TickRecord {
        self.tick += 1;
        let t = self.time();
        let floor = self.config.spent_floor;
        self.state.traces.retain(|tr| !tr.is_spent(t, floor));
        let stimuli = self.state.stimuli_at(t);
        let probabilities = self.state.update_probabilities(t);
        let transition = if self.tick.is_multiple_of(self.config.transition_interval) {
            Some(
                self.state
                    .step(rng)
                    .expect("probabilities were just computed"),
            )
        } else {
            None
        };
        TickRecord {
            tick: self.tick,
            emotion: self.state.current,
            probabilities,
            stimuli,
            transition,
        }
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            tick: self.tick,
            time: self.time(),
            emotion: self.state.current,
            probabilities: self.state.probabilities.unwrap_or([1.0 / 7.0; EMOTION_COUNT]),
            stimuli: self.stimuli(),
            personality: *self.state.personality.weights(),
            traces: self.state.traces.clone(),
            comfort: self.comfort,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::Liking;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn engine() -> EmotionEngine {
        let mut e = EmotionEngine::new(EngineConfig::default(), TransitionStats::bundled()).unwrap();
        e.register_prop(PropItem::new("bone", Liking::Liked, 0.5).unwrap());
        e.register_prop(PropItem::new("soap", Liking::Disliked, 0.2).unwrap());
        e
    }

    #[test]
    fn feeding_shows_up_on_the_next_tick() {
        let mut e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(e.feed(&"bone".into()).unwrap(), (0.5, 0.0));
        let rec = e.tick(&mut rng);
        assert!(rec.stimuli.s3 > 0.0 && rec.stimuli.s4 == 0.0);
        let snap = e.snapshot();
        assert_eq!(snap.traces.len(), 1);
        assert_eq!(snap.traces[0].channel, Channel::S3);
        assert_eq!(snap.traces[0].input, 0.5);
        assert!(matches!(
            e.feed(&"ghost".into()),
            Err(EmotionError::UnknownProp(_))
        ));
    }

    #[test]
    fn transitions_follow_the_interval() {
        let mut e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let records: Vec<_> = (0..30).map(|_| e.tick(&mut rng)).collect();
        let transitions: Vec<u64> = records
            .iter()
            .filter(|r| r.transition.is_some())
            .map(|r| r.tick)
            .collect();
        assert_eq!(transitions, vec![10, 20, 30]);
    }

    #[test]
    fn spent_traces_are_dropped() {
        let mut e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        e.feed(&"soap".into()).unwrap();
        for _ in 0..600 {
            e.tick(&mut rng);
        }
        assert!(e.snapshot().traces.is_empty());
        assert_eq!(e.stimuli(), Stimuli::default());
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut e = engine();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            let mut lines = Vec::new();
            for i in 0..200 {
                if i % 37 == 0 {
                    e.feed(&"bone".into()).unwrap();
                }
                if i % 53 == 0 {
                    e.feed(&"soap".into()).unwrap();
                }
                lines.push(e.tick(&mut rng).to_line());
            }
            lines
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sensing_splits_comfort() {
        let mut e = engine();
        let frame = SensorFrame {
            readings: vec![0.9, 0.9],
            weights: vec![0.5, 0.5],
            threshold: 0.6,
        };
        let (c, s1, s2) = e.sense(&frame).unwrap();
        assert_eq!(c, 0.9);
        assert!((s1 - 0.3).abs() < 1e-12 && s2 == 0.0);
        assert_eq!(e.snapshot().comfort, Some(0.9));
    }

    #[test]
    fn record_line_format() {
        let rec = TickRecord {
            tick: 3,
            emotion: Emotion::Happy,
            probabilities: [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            stimuli: Stimuli {
                s1: 0.25,
                ..Stimuli::default()
            },
            transition: None,
        };
        assert_eq!(rec.to_line(), "tick=3 emotion=happy p=0.5,0.5,0,0,0,0,0 s=0.25,0,0,0");
    }
}
