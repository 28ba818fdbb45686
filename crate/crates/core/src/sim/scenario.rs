//! Labelled reference/microphone renders for each event class.

use rand::Rng;
use rand_distr::StandardNormal;

use super::convolve::convolve;
use super::rir::{gen_rir, perturb_rir, RoomIr, RIR_LEN};
use super::signals::{contact_burst, gen_reference, rms, speech_like};
use super::{mix_seed, rng_for, Stream};
use crate::error::{Error, Result};
use crate::event::EventClass;

pub const SAMPLE_RATE: f64 = 48000.0;
/// Frame 500 at 512 samples per frame.
pub const DEFAULT_EVENT_START_S: f64 = 500.0 * 512.0 / 48000.0;
pub const DEFAULT_EVENT_DURATION_S: f64 = 1.0;
pub const DEFAULT_DURATION_S: f64 = 12.0;
pub const CROSSFADE_S: f64 = 0.05;
pub const CONTACT_BURST_S: f64 = 0.03;
pub const INTERFERER_FADE_S: f64 = 0.01;
pub const ECHO_PATH_CHANGE_SEVERITY: f64 = 0.3;
pub const REPOSITIONING_SEVERITY: f64 = 0.7;
/// Dry, near-field room for rendered scenes. Shorter than the generic RIR
/// default so the sub-band paths are sparse enough for the proportionate main
/// filter to visibly out-track the shadow after a path change.
pub const SCENE_T60_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: EventClass,
    pub duration_s: f64,
    pub event_start_s: f64,
    pub event_duration_s: f64,
    /// Echo-to-perturbation power ratio in dB over the event window
    /// (near-end speech for double-talk, contact noise for repositioning).
    pub snr_db: f64,
    /// Echo path change magnitude; only used by path-changing classes.
    pub severity: f64,
    pub t60_s: f64,
    /// Optional stationary sensor noise, in dB relative to the echo power.
    pub noise_floor_db: Option<f64>,
    pub seed: u64,
}

impl Scenario {
    pub fn new(label: EventClass, seed: u64) -> Self {
        let (snr_db, severity) = match label {
            EventClass::SteadyState => (0.0, 0.0),
            EventClass::DoubleTalk => (0.0, 0.0),
            EventClass::EchoPathChange => (0.0, ECHO_PATH_CHANGE_SEVERITY),
            EventClass::Repositioning => (-10.0, REPOSITIONING_SEVERITY),
        };
        Self {
            label,
            duration_s: DEFAULT_DURATION_S,
            event_start_s: DEFAULT_EVENT_START_S,
            event_duration_s: DEFAULT_EVENT_DURATION_S,
            snr_db,
            severity,
            t60_s: SCENE_T60_S,
            noise_floor_db: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::config("scenario duration must be positive"));
        }
        if !(self.event_start_s >= 0.0 && self.event_start_s < self.duration_s) {
            return Err(Error::config(format!(
                "event start {} s outside clip of {} s",
                self.event_start_s, self.duration_s
            )));
        }
        let tail = match self.label {
            EventClass::SteadyState => 0.0,
            EventClass::DoubleTalk => 0.0,
            EventClass::EchoPathChange => CROSSFADE_S,
            EventClass::Repositioning => CROSSFADE_S.max(CONTACT_BURST_S),
        };
        if self.label != EventClass::SteadyState
            && !(self.event_duration_s > 0.0
                && self.event_start_s + self.event_duration_s + tail <= self.duration_s)
        {
            return Err(Error::config("event window does not fit inside the clip"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("event level must be finite"));
        }
        if matches!(
            self.label,
            EventClass::EchoPathChange | EventClass::Repositioning
        ) && !(self.severity > 0.0 && self.severity <= 1.0)
        {
            return Err(Error::config(format!(
                "severity must be in (0, 1], got {}",
                self.severity
            )));
        }
        Ok(())
    }

    pub fn event_start_sample(&self) -> usize {
        (self.event_start_s * SAMPLE_RATE).round() as usize
    }

    pub fn event_end_sample(&self) -> usize {
        ((self.event_start_s + self.event_duration_s) * SAMPLE_RATE).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthKind {
    Interferer,
    PathTransition,
    ContactNoise,
}

/// Sample range `[start, end)` of one ground-truth event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruthEvent {
    pub kind: TruthKind,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub reference: Vec<f64>,
    pub mic: Vec<f64>,
    pub truth: Vec<TruthEvent>,
    pub rir: RoomIr,
    pub perturbed_rir: Option<RoomIr>,
}

pub fn render_scenario(sc: &Scenario) -> Result<RenderedScene> {
    render_scenario_with(sc, None)
}

/// Renders `sc`, optionally replacing the synthetic near-end talker with
/// `interferer` (repeated to fill the event window).
pub fn render_scenario_with(sc: &Scenario, interferer: Option<&[f64]>) -> Result<RenderedScene> {
    sc.validate()?;
    let reference = gen_reference(sc.duration_s, sc.seed, SAMPLE_RATE)?;
    let len = reference.len();
    let rir = gen_rir(sc.seed, sc.t60_s, RIR_LEN, SAMPLE_RATE)?;
    let echo = convolve(&reference, &rir.taps);
    let mut mic = echo.clone();
    let mut truth = Vec::new();
    let mut perturbed_rir = None;

    let start = sc.event_start_sample().min(len);
    let end = sc.event_end_sample().min(len);

    match sc.label {
        EventClass::SteadyState => {}
        EventClass::DoubleTalk => {
            let talker = match interferer {
                Some(src) if !src.is_empty() => {
                    src.iter().copied().cycle().take(end - start).collect()
                }
                Some(_) => return Err(Error::input("interferer signal is empty")),
                None => speech_like(end - start, sc.seed, SAMPLE_RATE),
            };
            let mut talker = talker;
            apply_fades(&mut talker, (INTERFERER_FADE_S * SAMPLE_RATE) as usize);
            let gain = level_gain(&echo[start..end], &talker, sc.snr_db);
            for (m, t) in mic[start..end].iter_mut().zip(&talker) {
                *m += gain * t;
            }
            truth.push(TruthEvent {
                kind: TruthKind::Interferer,
                start,
                end,
            });
        }
        EventClass::EchoPathChange | EventClass::Repositioning => {
            let moved = perturb_rir(&rir, sc.severity, mix_seed(sc.seed, 1), SAMPLE_RATE)?;
            let moved_echo = convolve(&reference, &moved.taps);
            let fade = (CROSSFADE_S * SAMPLE_RATE).round() as usize;
            let weight = path_weight(len, start, end, fade);
            for n in start..len {
                if weight[n] > 0.0 {
                    mic[n] = (1.0 - weight[n]) * echo[n] + weight[n] * moved_echo[n];
                }
            }
            for at in [start, end] {
                truth.push(TruthEvent {
                    kind: TruthKind::PathTransition,
                    start: at,
                    end: (at + fade).min(len),
                });
            }
            if sc.label == EventClass::Repositioning {
                let burst_len = (CONTACT_BURST_S * SAMPLE_RATE).round() as usize;
                for (i, at) in [start, end].into_iter().enumerate() {
                    let stop = (at + burst_len).min(len);
                    let burst = contact_burst(stop - at, mix_seed(sc.seed, 2 + i as u64), SAMPLE_RATE);
                    let gain = level_gain(&echo[start..end], &burst, sc.snr_db);
                    for (m, b) in mic[at..stop].iter_mut().zip(&burst) {
                        *m += gain * b;
                    }
                    truth.push(TruthEvent {
                        kind: TruthKind::ContactNoise,
                        start: at,
                        end: stop,
                    });
                }
            }
            perturbed_rir = Some(moved);
        }
    }

    if let Some(floor_db) = sc.noise_floor_db {
        let sigma = rms(&echo) * 10f64.powf(floor_db / 20.0);
        let mut rng = rng_for(sc.seed, Stream::Noise);
        for m in mic.iter_mut() {
            let n: f64 = rng.sample(StandardNormal);
            *m += sigma * n;
        }
    }

    Ok(RenderedScene {
        reference,
        mic,
        truth,
        rir,
        perturbed_rir,
    })
}

/// Weight of the moved path: raised-cosine up at `start`, down at `end`.
fn path_weight(len: usize, start: usize, end: usize, fade: usize) -> Vec<f64> {
    let ramp = |i: usize| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / fade as f64).cos());
    (0..len)
        .map(|n| {
            if n < start {
                0.0
            } else if n < start + fade {
                ramp(n - start)
            } else if n < end {
                1.0
            } else if n < end + fade {
                1.0 - ramp(n - end)
            } else {
                0.0
            }
        })
        .collect()
}

fn apply_fades(x: &mut [f64], fade: usize) {
    let fade = fade.min(x.len() / 2);
    let len = x.len();
    for i in 0..fade {
        let g = 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / fade as f64).cos());
        x[i] *= g;
        x[len - 1 - i] *= g;
    }
}

/// Gain that puts `signal` `ratio_db` below the RMS of `echo`.
fn level_gain(echo: &[f64], signal: &[f64], ratio_db: f64) -> f64 {
    let s = rms(signal);
    if s == 0.0 {
        return 0.0;
    }
    rms(echo) / s * 10f64.powf(-ratio_db / 20.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::convolve::convolve_direct;

    fn short(label: EventClass, seed: u64) -> Scenario {
        Scenario {
            duration_s: 1.0,
            event_start_s: 0.4,
            event_duration_s: 0.3,
            ..Scenario::new(label, seed)
        }
    }

    #[test]
    fn steady_state_is_pure_convolution() {
        let sc = Scenario {
            duration_s: 0.25,
            event_start_s: 0.1,
            ..Scenario::new(EventClass::SteadyState, 21)
        };
        let r = render_scenario(&sc).unwrap();
        let direct = convolve_direct(&r.reference, &r.rir.taps);
        let err: f64 = r.mic.iter().zip(&direct).map(|(a, b)| (a - b).powi(2)).sum();
        let energy: f64 = direct.iter().map(|v| v * v).sum();
        assert!((err / energy).sqrt() < 1e-9);
        assert!(r.truth.is_empty());
    }

    #[test]
    fn double_talk_is_confined_to_its_window() {
        let sc = short(EventClass::DoubleTalk, 5);
        let steady = render_scenario(&Scenario {
            label: EventClass::SteadyState,
            ..sc.clone()
        })
        .unwrap();
        let dt = render_scenario(&sc).unwrap();
        let (s, e) = (sc.event_start_sample(), sc.event_end_sample());
        for (n, (a, b)) in dt.mic.iter().zip(&steady.mic).enumerate() {
            if n < s || n >= e {
                assert_eq!(a, b, "sample {n}");
            }
        }
        let inside: f64 = (s..e).map(|n| (dt.mic[n] - steady.mic[n]).powi(2)).sum();
        assert!(inside > 0.0);
        assert_eq!(dt.truth[0].kind, TruthKind::Interferer);
    }

    #[test]
    fn double_talk_level_matches_ratio() {
        let sc = Scenario {
            snr_db: 6.0,
            ..short(EventClass::DoubleTalk, 9)
        };
        let dt = render_scenario(&sc).unwrap();
        let steady = render_scenario(&Scenario {
            label: EventClass::SteadyState,
            ..sc.clone()
        })
        .unwrap();
        let (s, e) = (sc.event_start_sample(), sc.event_end_sample());
        let talker: Vec<f64> = (s..e).map(|n| dt.mic[n] - steady.mic[n]).collect();
        let ratio = 20.0 * (rms(&steady.mic[s..e]) / rms(&talker)).log10();
        assert!((ratio - 6.0).abs() < 1e-6, "{ratio}");
    }

    #[test]
    fn path_change_shares_prefix_with_steady_state() {
        for label in [EventClass::EchoPathChange, EventClass::Repositioning] {
            let sc = short(label, 13);
            let steady = render_scenario(&Scenario {
                label: EventClass::SteadyState,
                ..sc.clone()
            })
            .unwrap();
            let moved = render_scenario(&sc).unwrap();
            let s = sc.event_start_sample();
            assert_eq!(moved.mic[..s], steady.mic[..s]);
            assert_ne!(moved.mic[s + 100..], steady.mic[s + 100..]);
            assert_eq!(moved.reference, steady.reference);
        }
    }

    #[test]
    fn path_change_follows_active_response() {
        let sc = short(EventClass::EchoPathChange, 2);
        let r = render_scenario(&sc).unwrap();
        let moved = r.perturbed_rir.as_ref().unwrap();
        let fade = (CROSSFADE_S * SAMPLE_RATE) as usize;
        // inside the window, after the crossfade, only the moved path is active
        let (s, e) = (sc.event_start_sample() + fade, sc.event_end_sample());
        let direct = convolve_direct(&r.reference[..e], &moved.taps);
        let err: f64 = (s..e).map(|n| (r.mic[n] - direct[n]).powi(2)).sum();
        let energy: f64 = (s..e).map(|n| direct[n].powi(2)).sum();
        assert!((err / energy).sqrt() < 1e-9);
    }

    #[test]
    fn renders_are_deterministic() {
        for label in EventClass::ALL {
            let sc = short(label, 77);
            assert_eq!(render_scenario(&sc).unwrap(), render_scenario(&sc).unwrap());
        }
    }

    #[test]
    fn repositioning_marks_contact_noise() {
        let r = render_scenario(&short(EventClass::Repositioning, 3)).unwrap();
        let kinds: Vec<TruthKind> = r.truth.iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TruthKind::PathTransition,
                TruthKind::PathTransition,
                TruthKind::ContactNoise,
                TruthKind::ContactNoise
            ]
        );
    }

    #[test]
    fn external_interferer_is_used() {
        let sc = short(EventClass::DoubleTalk, 5);
        let tone: Vec<f64> = (0..100).map(|n| (n as f64 * 0.3).sin()).collect();
        let a = render_scenario_with(&sc, Some(&tone)).unwrap();
        let b = render_scenario(&sc).unwrap();
        assert_ne!(a.mic, b.mic);
        assert!(render_scenario_with(&sc, Some(&[])).is_err());
    }

    #[test]
    fn invalid_scenarios() {
        let mut sc = short(EventClass::EchoPathChange, 1);
        sc.severity = 0.0;
        assert!(render_scenario(&sc).is_err());
        let mut sc = short(EventClass::DoubleTalk, 1);
        sc.event_start_s = 2.0;
        assert!(render_scenario(&sc).is_err());
        let mut sc = short(EventClass::DoubleTalk, 1);
        sc.event_duration_s = 5.0;
        assert!(render_scenario(&sc).is_err());
    }
}
