use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{read_labeled_matrix, read_labeled_matrix_file, LabeledMatrix};
use super::stimulus::{Channel, StimulusTrace};
use super::{Emotion, EmotionError, MatrixFileError, EMOTION_COUNT};
use crate::socialgraph::PropId;

/// Intensities below this are raised to it before normalizing.
pub const INTENSITY_FLOOR: f64 = 1e-6;

/// Current values of the four stimulus channels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stimuli {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl Stimuli {
    pub fn positive(&self) -> f64 {
        self.s1 + self.s3
    }

    pub fn negative(&self) -> f64 {
        self.s2 + self.s4
    }

    pub fn get(&self, c: Channel) -> f64 {
        match c {
            Channel::S1 => self.s1,
            Channel::S2 => self.s2,
            Channel::S3 => self.s3,
            Channel::S4 => self.s4,
        }
    }

    pub fn add(&mut self, c: Channel, v: f64) {
        match c {
            Channel::S1 => self.s1 += v,
            Channel::S2 => self.s2 += v,
            Channel::S3 => self.s3 += v,
            Channel::S4 => self.s4 += v,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.s1, self.s2, self.s3, self.s4]
    }
}

/// Questionnaire statistics `w[i][j]` for switching from emotion `i` to `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionStats(LabeledMatrix);

const DEFAULT_STATS: &str = include_str!("../../data/transition_stats.csv");

impl TransitionStats {
    pub fn new(values: LabeledMatrix) -> Result<Self, EmotionError> {
        for (i, row) in values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(MatrixFileError::NegativeEntry {
                        row: Emotion::ALL[i],
                        col: Emotion::ALL[j],
                        value: v,
                    }
                    .into());
                }
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(EmotionError::Matrix(MatrixFileError::Malformed {
                    line: 0,
                    message: format!("row `{}` has no positive entry", Emotion::ALL[i]),
                }));
            }
        }
        Ok(Self(values))
    }

    /// The bundled statistics.
    pub fn bundled() -> Self {
        Self::from_csv(DEFAULT_STATS).expect("bundled transition statistics are valid")
    }

    pub fn from_csv(text: &str) -> Result<Self, EmotionError> {
        Self::new(read_labeled_matrix(text.as_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmotionError> {
        Self::new(read_labeled_matrix_file(path.as_ref())?)
    }

    pub fn get(&self, from: Emotion, to: Emotion) -> f64 {
        self.0[from.index()][to.index()]
    }

    pub fn values(&self) -> &LabeledMatrix {
        &self.0
    }
}

/// Per-target additive bias that grows with every realized transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalityVector {
    weights: [f64; EMOTION_COUNT],
    growth: f64,
    cap: Option<f64>,
}

impl PersonalityVector {
    pub fn new(
        weights: [f64; EMOTION_COUNT],
        growth: f64,
        cap: Option<f64>,
    ) -> Result<Self, EmotionError> {
        if !(growth.is_finite() && growth > 0.0) {
            return Err(EmotionError::InvalidPersonality(format!(
                "growth coefficient {growth} must be > 0"
            )));
        }
        if let Some(c) = cap {
            if !(c.is_finite() && c > 0.0) {
                return Err(EmotionError::InvalidPersonality(format!("cap {c}")));
            }
        }
        for w in weights {
            if !(w.is_finite() && w > 0.0) || cap.is_some_and(|c| w > c) {
                return Err(EmotionError::InvalidPersonality(format!("weight {w}")));
            }
        }
        Ok(Self {
            weights,
            growth,
            cap,
        })
    }

    pub fn uniform(weight: f64, growth: f64, cap: Option<f64>) -> Result<Self, EmotionError> {
        Self::new([weight; EMOTION_COUNT], growth, cap)
    }

    pub fn weights(&self) -> &[f64; EMOTION_COUNT] {
        &self.weights
    }

    pub fn weight(&self, e: Emotion) -> f64 {
        self.weights[e.index()]
    }

    pub fn growth(&self) -> f64 {
        self.growth
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// Strengthens the bias toward `target`.
    pub fn reinforce(&mut self, target: Emotion) {
        self.weights = personality_update(&self.weights, target, self.growth, self.cap);
    }
}

/// `W'[j] = (1 + growth) W[j]`, optionally capped; other entries unchanged.
pub fn personality_update(
    weights: &[f64; EMOTION_COUNT],
    target: Emotion,
    growth: f64,
    cap: Option<f64>,
) -> [f64; EMOTION_COUNT] {
    let mut out = *weights;
    let grown = (1.0 + growth) * out[target.index()];
    out[target.index()] = cap.map_or(grown, |c| grown.min(c));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Normalized readings in `[0, 1]`.
    pub readings: Vec<f64>,
    /// Non-negative weights summing to 1.
    pub weights: Vec<f64>,
    /// Comfort threshold in `[0, 1]`.
    pub threshold: f64,
}

impl SensorFrame {
    pub fn validate(&self) -> Result<(), EmotionError> {
        if self.readings.len() != self.weights.len() || self.readings.is_empty() {
            return Err(EmotionError::InvalidFrame(format!(
                "{} readings vs {} weights",
                self.readings.len(),
                self.weights.len()
            )));
        }
        let unit = |x: &f64| x.is_finite() && (0.0..=1.0).contains(x);
        if !self.readings.iter().all(unit) {
            return Err(EmotionError::InvalidFrame("readings must lie in [0, 1]".into()));
        }
        if !unit(&self.threshold) {
            return Err(EmotionError::InvalidFrame(format!(
                "threshold {} not in [0, 1]",
                self.threshold
            )));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(EmotionError::InvalidFrame("weights must be non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EmotionError::WeightSum(sum));
        }
        Ok(())
    }
}

/// Weighted environmental comfort of a sensor frame.
pub fn comfort(frame: &SensorFrame) -> Result<f64, EmotionError> {
    frame.validate()?;
    let e: f64 = frame
        .readings
        .iter()
        .zip(&frame.weights)
        .map(|(e, a)| a * e)
        .sum();
    Ok(e.clamp(0.0, 1.0))
}

/// Splits comfort around the threshold into (positive, negative) stimuli.
pub fn env_stimuli(comfort: f64, threshold: f64) -> (f64, f64) {
    if comfort > threshold {
        (comfort - threshold, 0.0)
    } else if comfort < threshold {
        (0.0, threshold - comfort)
    } else {
        (0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liking {
    Liked,
    Disliked,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropItem {
    pub id: PropId,
    pub liking: Liking,
    pub magnitude: f64,
}

impl PropItem {
    pub fn new(id: impl Into<PropId>, liking: Liking, magnitude: f64) -> Result<Self, EmotionError> {
        if !(magnitude.is_finite() && magnitude > 0.0) {
            return Err(EmotionError::InvalidProp(format!(
                "magnitude {magnitude} must be > 0"
            )));
        }
        Ok(Self {
            id: id.into(),
            liking,
            magnitude,
        })
    }
}

/// (positive, negative) breeder stimuli produced by feeding a prop.
pub fn breeder_stimuli(prop: &PropItem) -> (f64, f64) {
    match prop.liking {
        Liking::Liked => (prop.magnitude, 0.0),
        Liking::Disliked => (0.0, prop.magnitude),
    }
}

/// Intensity of the transition `from -> to`. Positive stimuli push toward
/// positive-class targets and away from negative-class ones, and vice versa.
pub fn transition_intensity(
    from: Emotion,
    to: Emotion,
    stimuli: &Stimuli,
    stats: &TransitionStats,
    personality: &PersonalityVector,
) -> f64 {
    let (a1, a2) = if to.is_positive() {
        (1.0, -1.0)
    } else {
        (-1.0, 1.0)
    };
    stats.get(from, to) * (a1 * stimuli.positive() + a2 * stimuli.negative())
        + personality.weight(to)
}

/// Normalized transition distribution out of `from`. Intensities are floored
/// at [`INTENSITY_FLOOR`] first, so the result is always a distribution.
pub fn transition_probabilities(
    from: Emotion,
    stimuli: &Stimuli,
    stats: &TransitionStats,
    personality: &PersonalityVector,
) -> [f64; EMOTION_COUNT] {
    let mut m = [0.0; EMOTION_COUNT];
    for to in Emotion::ALL {
        let v = transition_intensity(from, to, stimuli, stats, personality);
        m[to.index()] = if v.is_nan() { INTENSITY_FLOOR } else { v.max(INTENSITY_FLOOR) };
    }
    let total: f64 = m.iter().sum();
    m.map(|v| v / total)
}

/// Keeps the `k` most probable targets (ties resolved in label order),
/// renormalizes among them and draws one.
pub fn sample_top_k<R: Rng + ?Sized>(p: &[f64; EMOTION_COUNT], k: usize, rng: &mut R) -> Emotion {
    let k = k.clamp(1, EMOTION_COUNT);
    let mut order: Vec<usize> = (0..EMOTION_COUNT).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let kept = &order[..k];
    let mass: f64 = kept.iter().map(|&i| p[i]).sum();
    if k == 1 || mass <= 0.0 {
        return Emotion::ALL[kept[0]];
    }
    let mut draw = rng.random::<f64>() * mass;
    for &i in kept {
        if draw < p[i] {
            return Emotion::ALL[i];
        }
        draw -= p[i];
    }
    // Rounding left a sliver of mass; fall to the last positive entry.
    let last = kept.iter().rev().find(|&&i| p[i] > 0.0).unwrap_or(&kept[0]);
    Emotion::ALL[*last]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionState {
    pub current: Emotion,
    pub traces: Vec<StimulusTrace>,
    pub personality: PersonalityVector,
    pub stats: TransitionStats,
    pub top_k: usize,
    pub probabilities: Option<[f64; EMOTION_COUNT]>,
}

impl EmotionState {
    pub fn new(
        current: Emotion,
        personality: PersonalityVector,
        stats: TransitionStats,
        top_k: usize,
    ) -> Result<Self, EmotionError> {
        if !(1..=EMOTION_COUNT).contains(&top_k) {
            return Err(EmotionError::InvalidConfig(format!(
                "top-k gate {top_k} not in 1..=7"
            )));
        }
        Ok(Self {
            current,
            traces: Vec::new(),
            personality,
            stats,
            top_k,
            probabilities: None,
        })
    }

    /// Channel values at time `t`, summed over active traces.
    pub fn stimuli_at(&self, t: f64) -> Stimuli {
        let mut s = Stimuli::default();
        for tr in &self.traces {
            if let Ok(v) = tr.value(t) {
                s.add(tr.channel, v);
            }
        }
        s
    }

    /// Recomputes and stores the transition distribution for time `t`.
    pub fn update_probabilities(&mut self, t: f64) -> [f64; EMOTION_COUNT] {
        let p = transition_probabilities(
            self.current,
            &self.stimuli_at(t),
            &self.stats,
            &self.personality,
        );
        self.probabilities = Some(p);
        p
    }

    /// Samples the next emotion from the stored distribution and reinforces
    /// the personality toward it.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Emotion, EmotionError> {
        let p = self.probabilities.ok_or(EmotionError::NoProbabilities)?;
        let next = sample_top_k(&p, self.top_k, rng);
        self.current = next;
        self.personality.reinforce(next);
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_stats(v: f64) -> TransitionStats {
        TransitionStats::new([[v; EMOTION_COUNT]; EMOTION_COUNT]).unwrap()
    }

    #[test]
    fn comfort_examples() {
        let frame = |r: Vec<f64>, w: Vec<f64>| SensorFrame {
            readings: r,
            weights: w,
            threshold: 0.5,
        };
        assert_eq!(comfort(&frame(vec![0.0, 0.0], vec![0.5, 0.5])).unwrap(), 0.0);
        assert_eq!(comfort(&frame(vec![0.7], vec![1.0])).unwrap(), 0.7);
        assert!((comfort(&frame(vec![0.8, 0.4], vec![0.5, 0.5])).unwrap() - 0.6).abs() < 1e-15);
        assert!(matches!(
            comfort(&frame(vec![0.8, 0.4], vec![0.5, 0.6])),
            Err(EmotionError::WeightSum(_))
        ));
    }

    #[test]
    fn environment_split() {
        let (s1, s2) = env_stimuli(0.9, 0.6);
        assert!((s1 - 0.3).abs() < 1e-15 && s2 == 0.0);
        let (s1, s2) = env_stimuli(0.4, 0.6);
        assert!(s1 == 0.0 && (s2 - 0.2).abs() < 1e-15);
        assert_eq!(env_stimuli(0.6, 0.6), (0.0, 0.0));
    }

    #[test]
    fn breeder_split() {
        let liked = PropItem::new("bone", Liking::Liked, 0.5).unwrap();
        assert_eq!(breeder_stimuli(&liked), (0.5, 0.0));
        let disliked = PropItem::new("soap", Liking::Disliked, 0.2).unwrap();
        assert_eq!(breeder_stimuli(&disliked), (0.0, 0.2));
        assert!(PropItem::new("air", Liking::Liked, 0.0).is_err());
    }

    #[test]
    fn intensity_examples() {
        let w = PersonalityVector::uniform(1.0, 0.1, None).unwrap();
        let stats = flat_stats(2.0);
        let zero = Stimuli::default();
        for to in Emotion::ALL {
            assert_eq!(transition_intensity(Emotion::Neutral, to, &zero, &stats, &w), 1.0);
        }
        let s = Stimuli {
            s1: 0.25,
            s2: 0.05,
            s3: 0.15,
            s4: 0.05,
        };
        let happy = transition_intensity(Emotion::Neutral, Emotion::Happy, &s, &stats, &w);
        assert!((happy - 1.6).abs() < 1e-12);
        let sad = transition_intensity(Emotion::Neutral, Emotion::Sad, &s, &stats, &w);
        assert!((sad - 0.4).abs() < 1e-12);
    }

    #[test]
    fn probabilities_examples() {
        let stats = flat_stats(1.0);
        let w = PersonalityVector::uniform(0.3, 0.1, None).unwrap();
        let p = transition_probabilities(Emotion::Sad, &Stimuli::default(), &stats, &w);
        for v in p {
            assert!((v - 1.0 / 7.0).abs() < 1e-15);
        }

        // M = (2, 1, 1, tiny, tiny, tiny, tiny) through the personality term.
        let w = PersonalityVector::new([2.0, 1.0, 1.0, 1e-9, 1e-9, 1e-9, 1e-9], 0.1, None).unwrap();
        let p = transition_probabilities(Emotion::Sad, &Stimuli::default(), &stats, &w);
        assert!((p[0] - 0.5).abs() < 1e-5 && (p[1] - 0.25).abs() < 1e-5);
        assert!(p[3] < 1e-6);

        // A strongly negative intensity gets the floor share.
        let w = PersonalityVector::uniform(0.1, 0.1, None).unwrap();
        let s = Stimuli {
            s1: 1.0,
            ..Stimuli::default()
        };
        let p = transition_probabilities(Emotion::Happy, &s, &stats, &w);
        let total: f64 = p.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let pos_total: f64 = 3.0 * 1.1;
        assert!((p[Emotion::Sad.index()] - INTENSITY_FLOOR / (pos_total + 4.0 * INTENSITY_FLOOR)).abs() < 1e-15);
    }

    #[test]
    fn top_one_is_argmax() {
        let p = [0.1, 0.1, 0.1, 0.3, 0.3, 0.05, 0.05];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            // Tie between happy and sad resolves to the earlier label.
            assert_eq!(sample_top_k(&p, 1, &mut rng), Emotion::Happy);
        }
    }

    #[test]
    fn top_three_only_samples_kept_targets() {
        let p = [0.4, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut counts = [0usize; EMOTION_COUNT];
        let n = 90_000;
        for _ in 0..n {
            counts[sample_top_k(&p, 3, &mut rng).index()] += 1;
        }
        assert_eq!(counts[3..].iter().sum::<usize>(), 0);
        for (i, expected) in [4.0 / 9.0, 3.0 / 9.0, 2.0 / 9.0].iter().enumerate() {
            assert!((counts[i] as f64 / n as f64 - expected).abs() < 0.01);
        }
    }

    #[test]
    fn personality_growth_and_cap() {
        let w = [1.0; EMOTION_COUNT];
        let out = personality_update(&w, Emotion::Happy, 0.1, None);
        assert!((out[Emotion::Happy.index()] - 1.1).abs() < 1e-15);
        assert_eq!(out[Emotion::Sad.index()], 1.0);
        let mut w = [1.0; EMOTION_COUNT];
        w[3] = 4.95;
        assert_eq!(personality_update(&w, Emotion::Happy, 0.1, Some(5.0))[3], 5.0);
        assert!(PersonalityVector::uniform(1.0, 0.0, None).is_err());
        assert!(PersonalityVector::uniform(-1.0, 0.1, None).is_err());
    }

    #[test]
    fn stats_reject_zero_rows() {
        let mut m = [[1.0; EMOTION_COUNT]; EMOTION_COUNT];
        m[2] = [0.0; EMOTION_COUNT];
        assert!(TransitionStats::new(m).is_err());
        let bundled = TransitionStats::bundled();
        assert_eq!(bundled.get(Emotion::Happy, Emotion::Happy), 0.42);
    }

    #[test]
    fn step_requires_probabilities() {
        let mut st = EmotionState::new(
            Emotion::Neutral,
            PersonalityVector::uniform(1.0, 0.1, None).unwrap(),
            TransitionStats::bundled(),
            3,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(st.step(&mut rng), Err(EmotionError::NoProbabilities)));
        st.update_probabilities(0.0);
        let next = st.step(&mut rng).unwrap();
        assert!((st.personality.weight(next) - 1.1).abs() < 1e-15);
        assert!(EmotionState::new(
            Emotion::Neutral,
            PersonalityVector::uniform(1.0, 0.1, None).unwrap(),
            TransitionStats::bundled(),
            0
        )
        .is_err());
    }
}
