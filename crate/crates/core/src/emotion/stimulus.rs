//! Stimulus time courses: a second-order rise toward the input magnitude,
//! followed by exponential decay from the peak.

use serde::{Deserialize, Serialize};

use super::EmotionError;

/// For non-oscillating rises the peak is where the response first reaches
/// this fraction of the input (2% settling band).
pub const PEAK_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Environment, positive.
    S1,
    /// Environment, negative.
    S2,
    /// Breeder, positive.
    S3,
    /// Breeder, negative.
    S4,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::S1, Channel::S2, Channel::S3, Channel::S4];

    pub fn index(self) -> usize {
        self as usize
    }
}

const CRITICAL_BAND: f64 = 1e-6;

/// Zero-state step response of `y'' + 2 damping w y' + w^2 y = w^2 input` at
/// time `tau` after the step.
pub fn step_response(input: f64, damping: f64, natural_freq: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let (z, w) = (damping, natural_freq);
    let shape = if (z - 1.0).abs() < CRITICAL_BAND {
        let x = w * tau;
        1.0 - (1.0 + x) * (-x).exp()
    } else if z < 1.0 {
        let root = (1.0 - z * z).sqrt();
        let wd = w * root;
        1.0 - (-z * w * tau).exp() * ((wd * tau).cos() + z / root * (wd * tau).sin())
    } else {
        let root = (z * z - 1.0).sqrt();
        let s1 = -w * (z - root);
        let s2 = -w * (z + root);
        1.0 + (s2 * (s1 * tau).exp() - s1 * (s2 * tau).exp()) / (s1 - s2)
    };
    input * shape
}

/// Time from onset to the peak of the rise.
fn rise_time(damping: f64, natural_freq: f64) -> f64 {
    if damping < 1.0 - CRITICAL_BAND {
        // First overshoot maximum.
        return std::f64::consts::PI / (natural_freq * (1.0 - damping * damping).sqrt());
    }
    // Monotone rise: bisect for the settling fraction.
    let reached = |tau: f64| step_response(1.0, damping, natural_freq, tau) >= PEAK_FRACTION;
    let mut hi = 1.0 / natural_freq;
    while !reached(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if reached(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    hi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusTrace {
    pub channel: Channel,
    /// Step input magnitude.
    pub input: f64,
    /// Onset time in seconds.
    pub onset: f64,
    /// Decay time constant in seconds.
    pub tc: f64,
    pub damping: f64,
    pub natural_freq: f64,
    /// Seconds from onset to the peak.
    pub rise_time: f64,
    pub y_peak: f64,
}

impl StimulusTrace {
    pub fn new(
        channel: Channel,
        input: f64,
        onset: f64,
        tc: f64,
        damping: f64,
        natural_freq: f64,
    ) -> Result<Self, EmotionError> {
        let bad = |what: String| Err(EmotionError::InvalidStimulus(what));
        if !(input.is_finite() && input >= 0.0) {
            return bad(format!("input magnitude {input}"));
        }
        if !onset.is_finite() {
            return bad(format!("onset {onset}"));
        }
        if !(tc.is_finite() && tc > 0.0) {
            return bad(format!("decay constant {tc} must be > 0"));
        }
        if !(damping.is_finite() && damping > 0.0) {
            return bad(format!("damping {damping} must be > 0"));
        }
        if !(natural_freq.is_finite() && natural_freq > 0.0) {
            return bad(format!("natural frequency {natural_freq} must be > 0"));
        }
        let rise_time = rise_time(damping, natural_freq);
        let y_peak = step_response(input, damping, natural_freq, rise_time);
        Ok(Self {
            channel,
            input,
            onset,
            tc,
            damping,
            natural_freq,
            rise_time,
            y_peak,
        })
    }

    /// Default rise: critical damping settling on the decay time scale.
    pub fn with_default_rise(
        channel: Channel,
        input: f64,
        onset: f64,
        tc: f64,
    ) -> Result<Self, EmotionError> {
        Self::new(channel, input, onset, tc, 1.0, 4.0 / tc)
    }

    pub fn peak_time(&self) -> f64 {
        self.onset + self.rise_time
    }

    pub fn value(&self, t: f64) -> Result<f64, EmotionError> {
        let tau = t - self.onset;
        if tau < 0.0 {
            return Err(EmotionError::BeforeOnset {
                t,
                onset: self.onset,
            });
        }
        if tau <= self.rise_time {
            return Ok(step_response(
                self.input,
                self.damping,
                self.natural_freq,
                tau,
            ));
        }
        let after_peak = tau - self.rise_time;
        Ok((-after_peak / self.tc).exp() * self.y_peak)
    }

    /// True once the trace has peaked and decayed below `floor`.
    pub fn is_spent(&self, t: f64, floor: f64) -> bool {
        t > self.peak_time() && self.value(t).is_ok_and(|v| v < floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_and_one_time_constant() {
        let tr = StimulusTrace::with_default_rise(Channel::S3, 0.5, 10.0, 20.0).unwrap();
        assert_eq!(tr.value(tr.peak_time()).unwrap(), tr.y_peak);
        let ratio = tr.value(tr.peak_time() + tr.tc).unwrap() / tr.y_peak;
        assert!((ratio - (-1.0f64).exp()).abs() < 1e-12);
        assert!((tr.y_peak / tr.input - PEAK_FRACTION).abs() < 1e-12);
    }

    #[test]
    fn before_onset_is_an_error() {
        let tr = StimulusTrace::with_default_rise(Channel::S1, 0.2, 5.0, 10.0).unwrap();
        assert!(matches!(
            tr.value(4.0),
            Err(EmotionError::BeforeOnset { .. })
        ));
        assert_eq!(tr.value(5.0).unwrap(), 0.0);
    }

    #[test]
    fn underdamped_peak_is_first_overshoot() {
        let tr = StimulusTrace::new(Channel::S2, 1.0, 0.0, 5.0, 0.5, 2.0).unwrap();
        // Overshoot 1 + exp(-zeta pi / sqrt(1 - zeta^2)).
        let expected = 1.0 + (-0.5 * std::f64::consts::PI / 0.75f64.sqrt()).exp();
        assert!((tr.y_peak - expected).abs() < 1e-12);
        let before = tr.value(tr.peak_time() - 1e-3).unwrap();
        assert!(before < tr.y_peak);
    }

    #[test]
    fn overdamped_rise_starts_at_rest() {
        let tr = StimulusTrace::new(Channel::S4, 1.0, 0.0, 5.0, 2.0, 1.0).unwrap();
        assert_eq!(step_response(1.0, 2.0, 1.0, 0.0), 0.0);
        assert!(step_response(1.0, 2.0, 1.0, 1e-4) < 1e-7);
        assert!((tr.y_peak - PEAK_FRACTION).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(StimulusTrace::new(Channel::S1, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(StimulusTrace::new(Channel::S1, -1.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(StimulusTrace::new(Channel::S1, 1.0, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(StimulusTrace::new(Channel::S1, 1.0, 0.0, 1.0, 1.0, -2.0).is_err());
    }
}
