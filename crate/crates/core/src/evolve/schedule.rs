//! Time-dependent weights of the kinetic and potential groups.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Multipliers `(e^phi, e^chi)` of the kinetic and potential groups at one
/// instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub kinetic: f64,
    pub potential: f64,
}

impl Coefficients {
    pub const fn new(kinetic: f64, potential: f64) -> Self {
        Coefficients { kinetic, potential }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub phi: f64,
    pub chi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("gamma must be positive and finite, got {0}")]
    Gamma(f64),
    #[error("total time must be positive and finite, got {0}")]
    TotalTime(f64),
    #[error("a piecewise-linear schedule needs at least two breakpoints")]
    TooFewBreakpoints,
    #[error("first breakpoint must sit at t = 0, got {0}")]
    Start(f64),
    #[error("breakpoint times must be finite and nondecreasing (index {0})")]
    Order(usize),
    #[error("breakpoint {0} has a non-finite phi or chi")]
    NonFinite(usize),
}

/// `phi_t`, `chi_t` on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `phi = -log(1 + gamma t^2)`, `chi = log(1 + gamma t^2)`.
    SmoothLog { gamma: f64, total_time: f64 },
    /// Linear interpolation of `phi` and `chi` between breakpoints.
    PiecewiseLinear { breakpoints: Vec<Breakpoint> },
}

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_TOTAL_TIME: f64 = 10.0;

impl Default for Schedule {
    fn default() -> Self {
        Schedule::SmoothLog { gamma: DEFAULT_GAMMA, total_time: DEFAULT_TOTAL_TIME }
    }
}

impl Schedule {
    pub fn smooth_log(gamma: f64, total_time: f64) -> Result<Self, ScheduleError> {
        let s = Schedule::SmoothLog { gamma, total_time };
        s.validate()?;
        Ok(s)
    }

    pub fn piecewise_linear(breakpoints: Vec<Breakpoint>) -> Result<Self, ScheduleError> {
        let s = Schedule::PiecewiseLinear { breakpoints };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        match self {
            Schedule::SmoothLog { gamma, total_time } => {
                if !(gamma.is_finite() && *gamma > 0.0) {
                    return Err(ScheduleError::Gamma(*gamma));
                }
                if !(total_time.is_finite() && *total_time > 0.0) {
                    return Err(ScheduleError::TotalTime(*total_time));
                }
            }
            Schedule::PiecewiseLinear { breakpoints } => {
                if breakpoints.len() < 2 {
                    return Err(ScheduleError::TooFewBreakpoints);
                }
                if breakpoints[0].t != 0.0 {
                    return Err(ScheduleError::Start(breakpoints[0].t));
                }
                for (i, b) in breakpoints.iter().enumerate() {
                    if !b.t.is_finite() || (i > 0 && b.t < breakpoints[i - 1].t) {
                        return Err(ScheduleError::Order(i));
                    }
                    if !(b.phi.is_finite() && b.chi.is_finite()) {
                        return Err(ScheduleError::NonFinite(i));
                    }
                }
                let end = breakpoints[breakpoints.len() - 1].t;
                if end <= 0.0 {
                    return Err(ScheduleError::TotalTime(end));
                }
            }
        }
        Ok(())
    }

    pub fn total_time(&self) -> f64 {
        match self {
            Schedule::SmoothLog { total_time, .. } => *total_time,
            Schedule::PiecewiseLinear { breakpoints } => breakpoints[breakpoints.len() - 1].t,
        }
    }

    /// `(phi_t, chi_t)`; times outside `[0, T]` clamp to the ends.
    pub fn log_weights(&self, t: f64) -> (f64, f64) {
        match self {
            Schedule::SmoothLog { gamma, .. } => {
                let l = (gamma * t * t).ln_1p();
                (-l, l)
            }
            Schedule::PiecewiseLinear { breakpoints } => {
                let first = breakpoints[0];
                let last = breakpoints[breakpoints.len() - 1];
                if t <= first.t {
                    return (first.phi, first.chi);
                }
                if t >= last.t {
                    return (last.phi, last.chi);
                }
                let j = breakpoints.partition_point(|b| b.t <= t);
                let (a, b) = (breakpoints[j - 1], breakpoints[j]);
                let s = (t - a.t) / (b.t - a.t);
                (a.phi + s * (b.phi - a.phi), a.chi + s * (b.chi - a.chi))
            }
        }
    }

    pub fn coefficients(&self, t: f64) -> Coefficients {
        match self {
            Schedule::SmoothLog { gamma, .. } => {
                let w = 1.0 + gamma * t * t;
                Coefficients::new(1.0 / w, w)
            }
            Schedule::PiecewiseLinear { .. } => {
                let (phi, chi) = self.log_weights(t);
                Coefficients::new(phi.exp(), chi.exp())
            }
        }
    }

    /// The schedule as a breakpoint list. Piecewise-linear schedules return
    /// their own breakpoints; smooth ones are sampled at `samples` evenly
    /// spaced times.
    pub fn to_breakpoints(&self, samples: usize) -> Vec<Breakpoint> {
        match self {
            Schedule::PiecewiseLinear { breakpoints } => breakpoints.clone(),
            Schedule::SmoothLog { total_time, .. } => {
                let samples = samples.max(2);
                (0..samples)
                    .map(|i| {
                        let t = total_time * i as f64 / (samples - 1) as f64;
                        let (phi, chi) = self.log_weights(t);
                        Breakpoint { t, phi, chi }
                    })
                    .collect()
            }
        }
    }
}
