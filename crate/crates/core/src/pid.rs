//! Discrete positional PID with conditional-integration anti-windup,
//! Ziegler–Nichols tuning and relay-feedback autotuning.

use thiserror::Error;

use crate::scalar::{clamp, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PidError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("output limits inverted: lo {lo} > hi {hi}")]
    InvertedLimits { lo: f64, hi: f64 },
    #[error("Ziegler–Nichols inputs must be positive (ku {ku}, tu {tu})")]
    NonPositiveUltimate { ku: f64, tu: f64 },
    #[error("relay amplitude must be positive, got {0}")]
    NonPositiveAmplitude(f64),
    #[error("relay autotune found no sustained oscillation within {budget_s} s ({periods} periods seen)")]
    AutotuneFailed { budget_s: f64, periods: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidGains<R = f64> {
    pub kp: R,
    pub ki: R,
    pub kd: R,
}

impl<R: Real> PidGains<R> {
    pub fn new(kp: R, ki: R, kd: R) -> Self {
        Self { kp, ki, kd }
    }

    pub fn as_array(&self) -> [R; 3] {
        [self.kp, self.ki, self.kd]
    }

    pub fn from_array(a: [R; 3]) -> Self {
        Self { kp: a[0], ki: a[1], kd: a[2] }
    }

    pub fn scaled(&self, factor: R) -> Self {
        Self { kp: self.kp * factor, ki: self.ki * factor, kd: self.kd * factor }
    }
}

/// Persistent loop state. `integral` is in error·s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState<R = f64> {
    pub integral: R,
    pub prev_error: R,
    pub prev_time: R,
    /// Filtered derivative, error per second.
    pub derivative: R,
    /// False until the first step has recorded a previous error.
    pub primed: bool,
}

/// Result of one PID evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidStep<R = f64> {
    pub output: R,
    pub state: PidState<R>,
    /// ∂u/∂(kp, ki, kd) of the unclamped law at this step.
    pub partials: [R; 3],
    pub saturated: bool,
}

/// One positional PID update with conditional integration.
pub fn pid_step<R: Real>(
    state: PidState<R>,
    gains: PidGains<R>,
    error: R,
    dt: R,
    out_lo: R,
    out_hi: R,
) -> Result<PidStep<R>, PidError> {
    pid_step_filtered(state, gains, error, dt, out_lo, out_hi, None)
}

/// [`pid_step`] with an optional first-order derivative filter time constant (s).
pub fn pid_step_filtered<R: Real>(
    state: PidState<R>,
    gains: PidGains<R>,
    error: R,
    dt: R,
    out_lo: R,
    out_hi: R,
    deriv_tau: Option<R>,
) -> Result<PidStep<R>, PidError> {
    if !(dt > R::zero()) {
        return Err(PidError::NonPositiveDt(dt.as_f64()));
    }
    if out_lo > out_hi {
        return Err(PidError::InvertedLimits { lo: out_lo.as_f64(), hi: out_hi.as_f64() });
    }
    let raw_deriv = if state.primed { (error - state.prev_error) / dt } else { R::zero() };
    let derivative = match deriv_tau {
        Some(tau) if tau > R::zero() && state.primed => {
            let alpha = dt / (tau + dt);
            state.derivative + alpha * (raw_deriv - state.derivative)
        }
        _ => raw_deriv,
    };

    let p_and_d = gains.kp * error + gains.kd * derivative;
    let candidate = state.integral + error * dt;
    let unsat = p_and_d + gains.ki * candidate;
    let integral = if unsat > out_hi && error > R::zero() {
        limit_integral(state.integral, candidate, out_hi, p_and_d, gains.ki, true)
    } else if unsat < out_lo && error < R::zero() {
        limit_integral(state.integral, candidate, out_lo, p_and_d, gains.ki, false)
    } else {
        candidate
    };

    let law = p_and_d + gains.ki * integral;
    let output = clamp(law, out_lo, out_hi);
    Ok(PidStep {
        output,
        state: PidState {
            integral,
            prev_error: error,
            prev_time: state.prev_time + dt,
            derivative,
            primed: true,
        },
        partials: [error, integral, derivative],
        saturated: law > out_hi || law < out_lo,
    })
}

// Integrate only up to the point where the law reaches the bound; never push
// the stored integral further from zero than it already was.
fn limit_integral<R: Real>(old: R, candidate: R, bound: R, p_and_d: R, ki: R, upper: bool) -> R {
    if ki <= R::zero() {
        return old;
    }
    let at_bound = (bound - p_and_d) / ki;
    if upper {
        candidate.min(old.max(at_bound))
    } else {
        candidate.max(old.min(at_bound))
    }
}

fn first_harmonic<R: Real>(samples: &[(R, R)], t0: R, period: R, dt: R) -> R {
    if samples.is_empty() || !(period > R::zero()) {
        return R::zero();
    }
    let w = R::lit(2.0) * R::PI() / period;
    let (mut c, mut s) = (R::zero(), R::zero());
    for &(t, y) in samples {
        let phase = w * (t - t0);
        c = c + y * phase.cos() * dt;
        s = s + y * phase.sin() * dt;
    }
    let scale = R::lit(2.0) / period;
    scale * (c * c + s * s).sqrt()
}

/// Classic closed-loop Ziegler–Nichols PID table.
pub fn ziegler_nichols<R: Real>(ku: R, tu: R) -> Result<PidGains<R>, PidError> {
    if !(ku > R::zero() && tu > R::zero()) {
        return Err(PidError::NonPositiveUltimate { ku: ku.as_f64(), tu: tu.as_f64() });
    }
    let kp = R::lit(0.6) * ku;
    Ok(PidGains { kp, ki: R::lit(2.0) * kp / tu, kd: kp * tu / R::lit(8.0) })
}

/// A plant that can be driven by a relay for autotuning.
pub trait RelayPlant<R: Real> {
    /// Current measurement of the controlled variable.
    fn measure(&self) -> R;
    /// Apply actuator level `u` for `dt` seconds.
    fn advance(&mut self, u: R, dt: R);
}

#[derive(Debug, Clone, Copy)]
pub struct RelayConfig<R = f64> {
    /// Relay half-swing around `bias`, actuator units.
    pub amplitude: R,
    pub bias: R,
    /// Measurement hysteresis around the setpoint.
    pub hysteresis: R,
    pub dt: R,
    pub budget_s: R,
    /// Positive when raising `u` raises the measurement.
    pub direct_acting: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UltimatePoint<R = f64> {
    pub ku: R,
    pub tu: R,
    /// First-harmonic amplitude of the measured oscillation.
    pub oscillation_amplitude: R,
}

const CONSISTENT_PERIODS: usize = 5;

/// Relay feedback experiment around the plant's current measurement.
///
/// Runs until five consecutive oscillation periods agree within 5% and
/// returns the describing-function ultimate gain `4d/(πa)` and the mean period.
/// `a` is the first-harmonic amplitude of the measurement rather than its
/// peak, which removes the bias of near-triangular waveforms.
pub fn relay_autotune<R: Real, P: RelayPlant<R>>(plant: &mut P, cfg: &RelayConfig<R>) -> Result<UltimatePoint<R>, PidError> {
    if !(cfg.amplitude > R::zero()) {
        return Err(PidError::NonPositiveAmplitude(cfg.amplitude.as_f64()));
    }
    if !(cfg.dt > R::zero()) {
        return Err(PidError::NonPositiveDt(cfg.dt.as_f64()));
    }
    let setpoint = plant.measure();
    let sense = if cfg.direct_acting { R::one() } else { -R::one() };
    let mut high = true;
    let mut time = R::zero();
    let mut last_rise: Option<R> = None;
    let mut periods: Vec<R> = Vec::new();
    let mut amplitudes: Vec<R> = Vec::new();
    let mut cycle: Vec<(R, R)> = Vec::new();

    while time < cfg.budget_s {
        let y = plant.measure();
        let err = setpoint - y;
        // Switch with hysteresis; "high" drives the measurement upward.
        let prev_high = high;
        if err * sense > cfg.hysteresis {
            high = true;
        } else if err * sense < -cfg.hysteresis {
            high = false;
        }
        if high && !prev_high {
            if let Some(t0) = last_rise {
                periods.push(time - t0);
                amplitudes.push(first_harmonic(&cycle, t0, time - t0, cfg.dt));
                if periods.len() >= CONSISTENT_PERIODS {
                    let recent = &periods[periods.len() - CONSISTENT_PERIODS..];
                    let mean = recent.iter().fold(R::zero(), |a, &b| a + b) / R::lit(CONSISTENT_PERIODS as f64);
                    let max = recent.iter().fold(R::neg_infinity(), |a, &b| a.max(b));
                    let min = recent.iter().fold(R::infinity(), |a, &b| a.min(b));
                    if (max - min) / mean < R::lit(0.05) {
                        let amps = &amplitudes[amplitudes.len() - CONSISTENT_PERIODS..];
                        let a = amps.iter().fold(R::zero(), |acc, &b| acc + b) / R::lit(CONSISTENT_PERIODS as f64);
                        if a > R::zero() {
                            return Ok(UltimatePoint {
                                ku: R::lit(4.0) * cfg.amplitude / (R::PI() * a),
                                tu: mean,
                                oscillation_amplitude: a,
                            });
                        }
                    }
                }
            }
            last_rise = Some(time);
            cycle.clear();
        }
        if last_rise.is_some() {
            cycle.push((time, y));
        }
        let u = if high { cfg.bias + cfg.amplitude * sense } else { cfg.bias - cfg.amplitude * sense };
        plant.advance(u, cfg.dt);
        time = time + cfg.dt;
    }
    Err(PidError::AutotuneFailed { budget_s: cfg.budget_s.as_f64(), periods: periods.len() })
}
