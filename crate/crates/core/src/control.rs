//! The four controller architectures behind one tick interface.
//!
//! Independent kinds run separate temperature and humidity PIDs on fixed
//! setpoints. Cascade kinds add an outer VPD loop that places the setpoint
//! pair on the iso-VPD curve at the energy-optimal temperature and hands it
//! to the inner loops, which run several times faster.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::nn::{FeatureVector, GainTuner, MlpParams, TunerConfig, TunerError};
use crate::optimizer::{self, EnergyModelParams, OptimizerError};
use crate::pid::{self, PidError, PidGains, PidState};
use crate::psychro::{self, Celsius, KiloPascal, PsychroError};
use crate::zone::{ActuatorCommand, WeatherSample, ZoneParams, ACTIVE_LEVEL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    IndependentPid,
    IndependentPidMonitoring,
    CascadeFixed,
    CascadeNn,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 4] =
        [ControllerKind::IndependentPid, ControllerKind::IndependentPidMonitoring, ControllerKind::CascadeFixed, ControllerKind::CascadeNn];

    pub fn as_str(&self) -> &'static str {
        match self {
            ControllerKind::IndependentPid => "independent_pid",
            ControllerKind::IndependentPidMonitoring => "independent_pid_monitoring",
            ControllerKind::CascadeFixed => "cascade_fixed",
            ControllerKind::CascadeNn => "cascade_nn",
        }
    }

    pub fn is_cascade(&self) -> bool {
        matches!(self, ControllerKind::CascadeFixed | ControllerKind::CascadeNn)
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = ControlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| ControlError::Config(format!("unknown controller kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("outer/inner period ratio {ratio} outside [3, 10] (inner {inner} s, outer {outer} s)")]
    TimingRatio { inner: f64, outer: f64, ratio: f64 },
    #[error("loop periods must be positive (inner {inner} s, outer {outer} s)")]
    NonPositivePeriod { inner: f64, outer: f64 },
    #[error("VPD target {0} kPa outside (0, 3)")]
    TargetOutOfRange(f64),
    #[error("clock moved backwards from {prev} s to {now} s")]
    ClockRegression { prev: f64, now: f64 },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error(transparent)]
    Pid(#[from] PidError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Psychro(#[from] PsychroError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeTiming {
    pub inner_period: f64,
    pub outer_period: f64,
}

impl Default for CascadeTiming {
    fn default() -> Self {
        Self { inner_period: 30.0, outer_period: 300.0 }
    }
}

impl CascadeTiming {
    pub fn new(inner_period: f64, outer_period: f64) -> Result<Self, ControlError> {
        let t = Self { inner_period, outer_period };
        t.validate()?;
        Ok(t)
    }

    pub fn ratio(&self) -> f64 {
        self.outer_period / self.inner_period
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.inner_period > 0.0 && self.outer_period > 0.0) {
            return Err(ControlError::NonPositivePeriod { inner: self.inner_period, outer: self.outer_period });
        }
        let ratio = self.ratio();
        if !(3.0..=10.0).contains(&ratio) {
            return Err(ControlError::TimingRatio { inner: self.inner_period, outer: self.outer_period, ratio });
        }
        Ok(())
    }
}

/// Day/night VPD targets. The day window is `[day_start_h, day_end_h)` in
/// hours of the simulated day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VpdSchedule {
    pub day_target: f64,
    pub night_target: f64,
    pub day_start_h: f64,
    pub day_end_h: f64,
}

impl Default for VpdSchedule {
    fn default() -> Self {
        Self { day_target: 1.2, night_target: 0.8, day_start_h: 6.0, day_end_h: 22.0 }
    }
}

impl VpdSchedule {
    pub fn validate(&self) -> Result<(), ControlError> {
        for v in [self.day_target, self.night_target] {
            if !(v > 0.0 && v < 3.0) {
                return Err(ControlError::TargetOutOfRange(v));
            }
        }
        let ok = |h: f64| (0.0..=24.0).contains(&h);
        if !(ok(self.day_start_h) && ok(self.day_end_h) && self.day_start_h < self.day_end_h) {
            return Err(ControlError::Config(format!(
                "day window [{}, {}) h must lie within one day",
                self.day_start_h, self.day_end_h
            )));
        }
        Ok(())
    }

    pub fn is_day(&self, clock: f64) -> bool {
        let h = (clock / 3600.0).rem_euclid(24.0);
        h >= self.day_start_h && h < self.day_end_h
    }

    pub fn target(&self, clock: f64) -> f64 {
        if self.is_day(clock) {
            self.day_target
        } else {
            self.night_target
        }
    }

    /// Time and value of the first target change strictly after `clock`.
    pub fn next_change(&self, clock: f64) -> Option<(f64, f64)> {
        if self.day_target == self.night_target {
            return None;
        }
        let day0 = (clock / 86_400.0).floor() * 86_400.0;
        let mut best: Option<(f64, f64)> = None;
        for d in 0..2 {
            for (h, v) in [(self.day_start_h, self.day_target), (self.day_end_h, self.night_target)] {
                let t = day0 + d as f64 * 86_400.0 + h * 3600.0;
                if t > clock && best.map_or(true, |b| t < b.0) && self.target(t) != self.target(clock) {
                    best = Some((t, v));
                }
            }
        }
        best
    }

    /// Target changes within `[0, horizon)` as `(clock, old, new)`.
    pub fn steps(&self, horizon: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        if self.day_target == self.night_target {
            return out;
        }
        let mut day = 0.0;
        while day * 86_400.0 < horizon {
            for (h, old, new) in [(self.day_start_h, self.night_target, self.day_target), (self.day_end_h, self.day_target, self.night_target)] {
                let t = day * 86_400.0 + h * 3600.0;
                if t > 0.0 && t < horizon && h < 24.0 {
                    out.push((t, old, new));
                }
            }
            day += 1.0;
        }
        out
    }
}

/// What the controller sees of the zone at one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub t_in: f64,
    pub rh_in: f64,
    pub vpd: f64,
    pub t_leaf: f64,
    pub co2: f64,
    pub ppfd: f64,
}

/// Fixed gains for the temperature (actuator per °C) and humidity
/// (actuator per %RH) loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopGains {
    pub temperature: PidGains,
    pub humidity: PidGains,
}

impl Default for LoopGains {
    fn default() -> Self {
        Self { temperature: PidGains::new(0.3, 3e-4, 20.0), humidity: PidGains::new(0.05, 2e-4, 2.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerSettings {
    /// Temperature the independent loops hold, °C.
    pub neutral_t: f64,
    /// Largest temperature setpoint change per outer tick, °C.
    pub rate_limit: f64,
    /// Heating within this many seconds of cooling counts as reheat.
    pub reheat_window: f64,
    /// Error beyond which the cascade considers the other thermal mode, °C.
    pub mode_deadband: f64,
    /// How long the error must stay beyond the deadband before switching, s.
    pub mode_confirm: f64,
    pub alert_threshold: f64,
    pub alert_sustain: f64,
    pub nudge_step: f64,
    pub nudge_interval: f64,
    /// Largest accumulated offset from `neutral_t`, °C.
    pub nudge_max: f64,
    pub nn_seed: u64,
    pub nn_init_half_width: f64,
    /// When set, tuner bands become these multiples of the fixed gains and
    /// the network output scales around them.
    pub relative_bands: Option<(f64, f64)>,
    /// Fraction of humidifier and dehumidifier capacity the outer loop may
    /// plan to use in steady state.
    pub capacity_margin: f64,
    /// Extra air changes per hour the capacity window must also absorb.
    pub surge_ach: f64,
    /// How far ahead the outer loop prepares for a scheduled target change, s.
    pub preview: f64,
    /// Lead time over which the inner humidity reference ramps into a
    /// scheduled VPD change, s. Zero disables the ramp.
    pub step_preview: f64,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        Self {
            neutral_t: 24.0,
            rate_limit: 0.5,
            reheat_window: 900.0,
            mode_deadband: 0.3,
            mode_confirm: 300.0,
            alert_threshold: 0.15,
            alert_sustain: 900.0,
            nudge_step: 0.5,
            nudge_interval: 7200.0,
            nudge_max: 3.0,
            nn_seed: 7,
            nn_init_half_width: 0.2,
            relative_bands: Some((0.25, 3.0)),
            capacity_margin: 0.6,
            surge_ach: 0.0,
            preview: 3600.0,
            step_preview: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    pub zone: ZoneParams,
    pub timing: CascadeTiming,
    pub schedule: VpdSchedule,
    pub tuner: TunerConfig,
    pub energy: EnergyModelParams,
    pub gains: LoopGains,
    pub settings: ControllerSettings,
}

/// Everything a tick decided, for actuation and tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutput {
    pub command: ActuatorCommand,
    pub t_sp: f64,
    pub rh_sp: f64,
    pub vpd_target: f64,
    pub gains_t: PidGains,
    pub gains_h: PidGains,
    pub alert: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermalMode {
    Heating,
    Cooling,
}

/// Raises an alert once |e| has exceeded the threshold for the sustain time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertMonitor {
    pub threshold: f64,
    pub sustain: f64,
    above_since: Option<f64>,
    pub active: bool,
    pub count: u64,
}

impl AlertMonitor {
    pub fn new(threshold: f64, sustain: f64) -> Self {
        Self { threshold, sustain, above_since: None, active: false, count: 0 }
    }

    pub fn observe(&mut self, abs_error: f64, clock: f64) -> bool {
        if abs_error > self.threshold {
            let since = *self.above_since.get_or_insert(clock);
            if !self.active && clock - since >= self.sustain {
                self.active = true;
                self.count += 1;
            }
        } else {
            self.above_since = None;
            self.active = false;
        }
        self.active
    }
}

/// Temperatures on the iso-VPD curve of `vpd` inside `[t_min, t_max]` whose
/// steady moisture balance (transpiration plus background infiltration) can
/// be closed using at most `margin` of the humidifier or dehumidifier
/// capacity. Moisture load falls as temperature rises along the curve, so
/// the set is an interval. Returns `None` when no such temperature exists.
pub fn moisture_window(zone: &ZoneParams, vpd: f64, weather: &WeatherSample, t_min: f64, t_max: f64, margin: f64, surge_ach: f64) -> Option<(f64, f64)> {
    let p = KiloPascal(zone.p_total);
    let w_out = psychro::humidity_ratio(weather.t_out, weather.rh_out, p).ok()?;
    let transpiration = zone.floor_area * zone.transpiration_rate * zone.transpiration_vpd_coeff * vpd / 3600.0;
    let m_inf = (zone.infiltration_ach + surge_ach) * zone.m_air / 3600.0;
    // Net passive moisture gain, kg/s; decreasing in t.
    let gain = |t: f64| -> f64 {
        let rh = match psychro::iso_vpd_rh(Celsius(t), KiloPascal(vpd)) {
            Ok(r) => r,
            Err(_) => return f64::INFINITY,
        };
        match psychro::humidity_ratio(Celsius(t), rh, p) {
            Ok(w) => transpiration + m_inf * (w_out - w),
            Err(_) => f64::INFINITY,
        }
    };
    let dehum_lim = margin * zone.dehum_cap / 3600.0;
    let hum_lim = margin * zone.hum_cap / 3600.0;
    // Smallest t with gain(t) <= dehum_lim and largest t with -gain(t) <= hum_lim.
    let lower = boundary(&|t| gain(t) <= dehum_lim, t_min, t_max, true)?;
    let upper = boundary(&|t| -gain(t) <= hum_lim, t_min, t_max, false)?;
    (lower <= upper).then_some((lower, upper))
}

// Edge of the region where a monotone predicate holds, by bisection.
fn boundary(ok: &dyn Fn(f64) -> bool, lo: f64, hi: f64, holds_above: bool) -> Option<f64> {
    let (inside, outside) = if holds_above { (hi, lo) } else { (lo, hi) };
    if !ok(inside) {
        return None;
    }
    if ok(outside) {
        return Some(outside);
    }
    let (mut a, mut b) = (outside, inside);
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if ok(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

#[derive(Debug, Clone)]
struct Tuners {
    temperature: GainTuner,
    humidity: GainTuner,
}

#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControllerConfig,
    t_pid: PidState,
    h_pid: PidState,
    gains_t: PidGains,
    gains_h: PidGains,
    tuners: Option<Tuners>,
    t_sp: f64,
    rh_sp: f64,
    vpd_sp: f64,
    // Independent kinds: held temperature and the two schedule RH values.
    fixed_t: f64,
    fixed_rh: (f64, f64),
    last_clock: Option<f64>,
    next_inner: f64,
    next_outer: f64,
    outer_started: bool,
    mode: ThermalMode,
    mode_last_active: f64,
    wrong_side_since: Option<f64>,
    e_int: f64,
    alert: AlertMonitor,
    last_nudge: Option<f64>,
    command: ActuatorCommand,
}

/// Builds a controller of `cfg.kind`; cascade kinds enforce the bandwidth rule.
pub fn make_controller(cfg: ControllerConfig) -> Result<Controller, ControlError> {
    Controller::new(cfg)
}

fn scaled_tuner(base: &TunerConfig, gains: PidGains, bands: Option<(f64, f64)>) -> Result<TunerConfig, ControlError> {
    let mut cfg = *base;
    if let Some((lo, hi)) = bands {
        if !(lo > 0.0 && lo < 1.0 && hi > 1.0) {
            return Err(ControlError::Config(format!("relative gain bands ({lo}, {hi}) must satisfy 0 < lo < 1 < hi")));
        }
        let g = gains.as_array();
        for i in 0..3 {
            cfg.gain_scale[i] = g[i];
            cfg.gain_offset[i] = g[i];
            cfg.k_min[i] = g[i] * lo;
            cfg.k_max[i] = (g[i] * hi).max(g[i] * lo + 1e-9);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl Controller {
    pub fn new(cfg: ControllerConfig) -> Result<Self, ControlError> {
        cfg.schedule.validate()?;
        if cfg.kind.is_cascade() {
            cfg.timing.validate()?;
        } else if !(cfg.timing.inner_period > 0.0) {
            return Err(ControlError::NonPositivePeriod { inner: cfg.timing.inner_period, outer: cfg.timing.outer_period });
        }
        cfg.energy.validate()?;
        let s = cfg.settings;
        let tuners = if cfg.kind == ControllerKind::CascadeNn {
            let make = |gains: PidGains, seed: u64, sign: f64| -> Result<GainTuner, ControlError> {
                let tcfg = scaled_tuner(&cfg.tuner, gains, s.relative_bands)?;
                let mut t = GainTuner::new(MlpParams::random(seed, s.nn_init_half_width), tcfg, sign)?;
                t.warm_start(gains);
                Ok(t)
            };
            Some(Tuners {
                temperature: make(cfg.gains.temperature, s.nn_seed, 1.0)?,
                // Humidifying lowers VPD.
                humidity: make(cfg.gains.humidity, s.nn_seed.wrapping_add(1), -1.0)?,
            })
        } else {
            None
        };
        let fixed_t = s.neutral_t;
        let fixed_rh = Self::schedule_rh(fixed_t, &cfg.schedule)?;
        let rh0 = if cfg.schedule.is_day(0.0) { fixed_rh.0 } else { fixed_rh.1 };
        Ok(Self {
            t_pid: PidState::default(),
            h_pid: PidState::default(),
            gains_t: cfg.gains.temperature,
            gains_h: cfg.gains.humidity,
            tuners,
            t_sp: fixed_t,
            rh_sp: rh0,
            vpd_sp: cfg.schedule.target(0.0),
            fixed_t,
            fixed_rh,
            last_clock: None,
            next_inner: 0.0,
            next_outer: 0.0,
            outer_started: false,
            mode: ThermalMode::Heating,
            mode_last_active: f64::NEG_INFINITY,
            wrong_side_since: None,
            e_int: 0.0,
            alert: AlertMonitor::new(s.alert_threshold, s.alert_sustain),
            last_nudge: None,
            command: ActuatorCommand::idle(),
            cfg,
        })
    }

    fn schedule_rh(t: f64, schedule: &VpdSchedule) -> Result<(f64, f64), ControlError> {
        let day = psychro::iso_vpd_rh(Celsius(t), KiloPascal(schedule.day_target))?.0;
        let night = psychro::iso_vpd_rh(Celsius(t), KiloPascal(schedule.night_target))?.0;
        Ok((day, night))
    }

    pub fn kind(&self) -> ControllerKind {
        self.cfg.kind
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn alert_count(&self) -> u64 {
        self.alert.count
    }

    pub fn thermal_mode(&self) -> ThermalMode {
        self.mode
    }

    /// Largest Lipschitz estimate across the tuning networks, if any.
    pub fn tuner_lipschitz(&self) -> Option<f64> {
        self.tuners.as_ref().map(|t| t.temperature.lipschitz().max(t.humidity.lipschitz()))
    }

    pub fn tuners(&self) -> Option<(&GainTuner, &GainTuner)> {
        self.tuners.as_ref().map(|t| (&t.temperature, &t.humidity))
    }

    /// Runs whichever loops are due at `clock` and returns the held command.
    pub fn control_tick(&mut self, obs: &Observation, weather: &WeatherSample, clock: f64) -> Result<TickOutput, ControlError> {
        if let Some(prev) = self.last_clock {
            if clock < prev {
                return Err(ControlError::ClockRegression { prev, now: clock });
            }
        }
        self.last_clock = Some(clock);
        let target = self.cfg.schedule.target(clock);
        let e_vpd = target - obs.vpd;
        let alert = self.alert.observe(e_vpd.abs(), clock);
        let eps = 1e-6;

        if self.cfg.kind.is_cascade() {
            if !self.outer_started || clock + eps >= self.next_outer {
                self.outer_tick(target, obs, weather)?;
                self.next_outer = if self.outer_started { self.next_outer + self.cfg.timing.outer_period } else { clock + self.cfg.timing.outer_period };
                self.outer_started = true;
            }
        } else {
            if self.cfg.kind == ControllerKind::IndependentPidMonitoring && alert {
                self.operator_nudge(obs, clock)?;
            }
            self.t_sp = self.fixed_t;
            self.rh_sp = if self.cfg.schedule.is_day(clock) { self.fixed_rh.0 } else { self.fixed_rh.1 };
            self.vpd_sp = target;
        }

        if clock + eps >= self.next_inner {
            let dt = self.cfg.timing.inner_period;
            if self.cfg.kind.is_cascade() {
                self.cascade_inner(obs, target, e_vpd, dt, clock)?;
            } else {
                self.independent_inner(obs, dt)?;
            }
            self.next_inner += dt;
            while self.next_inner <= clock + eps {
                self.next_inner += dt;
            }
        }

        Ok(TickOutput {
            command: self.command,
            t_sp: self.t_sp,
            rh_sp: self.rh_sp,
            vpd_target: self.vpd_sp,
            gains_t: self.gains_t,
            gains_h: self.gains_h,
            alert,
        })
    }

    fn independent_inner(&mut self, obs: &Observation, dt: f64) -> Result<(), ControlError> {
        let st = pid::pid_step(self.t_pid, self.gains_t, self.t_sp - obs.t_in, dt, -1.0, 1.0)?;
        let sh = pid::pid_step(self.h_pid, self.gains_h, self.rh_sp - obs.rh_in, dt, -1.0, 1.0)?;
        self.t_pid = st.state;
        self.h_pid = sh.state;
        self.command = ActuatorCommand::from_signed(st.output, sh.output);
        Ok(())
    }

    // Operator emulation: after an alert, slide the held pair 0.5 °C along
    // the iso-VPD curves. Too dry means the humidifier cannot keep up, so go
    // cooler where the curve needs less water; too humid goes warmer.
    fn operator_nudge(&mut self, obs: &Observation, clock: f64) -> Result<(), ControlError> {
        let s = self.cfg.settings;
        if let Some(last) = self.last_nudge {
            if clock - last < s.nudge_interval {
                return Ok(());
            }
        }
        let e_vpd = self.cfg.schedule.target(clock) - obs.vpd;
        let dir = e_vpd.signum();
        let lo = (s.neutral_t - s.nudge_max).max(self.cfg.energy.t_min);
        let hi = (s.neutral_t + s.nudge_max).min(self.cfg.energy.t_max);
        let next = (self.fixed_t + dir * s.nudge_step).clamp(lo, hi);
        self.last_nudge = Some(clock);
        if next != self.fixed_t {
            self.fixed_rh = Self::schedule_rh(next, &self.cfg.schedule)?;
            self.fixed_t = next;
        }
        Ok(())
    }

    fn outer_tick(&mut self, target: f64, obs: &Observation, weather: &WeatherSample) -> Result<(), ControlError> {
        let s = self.cfg.settings;
        let mut energy = self.cfg.energy;
        let mut window = moisture_window(&self.cfg.zone, target, weather, energy.t_min, energy.t_max, s.capacity_margin, s.surge_ach);
        if let Some((when, next)) = self.cfg.schedule.next_change(weather.clock) {
            if when - weather.clock <= s.preview {
                let ahead = moisture_window(&self.cfg.zone, next, weather, energy.t_min, energy.t_max, s.capacity_margin, s.surge_ach);
                window = match (window, ahead) {
                    (Some(a), Some(b)) if a.0.max(b.0) <= a.1.min(b.1) => Some((a.0.max(b.0), a.1.min(b.1))),
                    (a, _) => a,
                };
            }
        }
        if let Some((lo, hi)) = window {
            let width = 0.05;
            let mid = 0.5 * (lo + hi);
            let (lo, hi) = if hi - lo < width { (mid - width / 2.0, mid + width / 2.0) } else { (lo, hi) };
            energy.t_min = lo.max(energy.t_min);
            energy.t_max = hi.min(energy.t_max).max(energy.t_min + 1e-3);
        }
        let energy = &energy;
        // Free heat shifts the balance point: the envelope load vanishes at
        // t_out + internal_gain / UA rather than at t_out.
        let balance = (weather.t_out.0 + self.cfg.zone.internal_gain / energy.ua).clamp(psychro::T_MIN_VALID, psychro::T_MAX_VALID);
        let shifted = WeatherSample { t_out: Celsius(balance), ..*weather };
        let vpd = KiloPascal(target);
        let (sp, _) = optimizer::optimize_setpoint(vpd, &shifted, energy)?;
        let (lo, hi) = optimizer::feasible_interval(vpd, energy)?;
        let prior = if self.outer_started { self.t_sp } else { s.neutral_t };
        let candidate = prior + (sp.t_sp.0 - prior).clamp(-s.rate_limit, s.rate_limit);
        // A move the active actuator would have to fight for is only taken
        // as fast as the zone drifts there by itself.
        let t = match self.mode {
            ThermalMode::Heating if self.outer_started && candidate > prior => candidate.min(prior.max(obs.t_in)),
            ThermalMode::Cooling if self.outer_started && candidate < prior => candidate.max(prior.min(obs.t_in)),
            _ => candidate,
        }
        .clamp(lo, hi);
        self.t_sp = t;
        self.rh_sp = psychro::iso_vpd_rh(Celsius(t), vpd)?.0;
        self.vpd_sp = target;
        if !self.outer_started {
            let ua = self.cfg.zone.effective_ua();
            let passive = ua * (weather.t_out.0 - obs.t_in) + self.cfg.zone.internal_gain;
            self.mode = if passive < 0.0 { ThermalMode::Heating } else { ThermalMode::Cooling };
        }
        Ok(())
    }

    // Inner VPD reference: ramps linearly into a scheduled change so that it
    // reaches the new value when the change takes effect.
    fn previewed_target(&self, target: f64, clock: f64) -> f64 {
        let span = self.cfg.settings.step_preview;
        match self.cfg.schedule.next_change(clock) {
            Some((when, next)) if span > 0.0 && when - clock < span => target + (next - target) * (1.0 - (when - clock) / span),
            _ => target,
        }
    }

    fn cascade_inner(&mut self, obs: &Observation, target: f64, e_vpd: f64, dt: f64, clock: f64) -> Result<(), ControlError> {
        let i_max = self.cfg.tuner.i_max;
        self.e_int = (self.e_int + e_vpd * dt).clamp(-i_max, i_max);

        // Humidity follows the iso-VPD curve at the measured temperature, so
        // temperature tracking error does not turn into VPD error.
        let t_meas = obs.t_in.clamp(psychro::T_MIN_VALID, psychro::T_MAX_VALID);
        let rh_ref = match psychro::iso_vpd_rh(Celsius(t_meas), KiloPascal(self.previewed_target(target, clock))) {
            Ok(rh) => rh.0,
            Err(_) => 0.0,
        };

        if let Some(tuners) = self.tuners.as_mut() {
            let features = FeatureVector {
                t: obs.t_in,
                rh: obs.rh_in,
                t_leaf: obs.t_leaf,
                co2: obs.co2,
                ppfd: obs.ppfd,
                e_vpd,
                e_vpd_int: self.e_int,
            };
            self.gains_t = tuners.temperature.forward(&features)?;
            self.gains_h = tuners.humidity.forward(&features)?;
        }

        let (lo, hi) = match self.mode {
            ThermalMode::Heating => (0.0, 1.0),
            ThermalMode::Cooling => (-1.0, 0.0),
        };
        let e_t = self.t_sp - obs.t_in;
        let st = pid::pid_step(self.t_pid, self.gains_t, e_t, dt, lo, hi)?;
        let sh = pid::pid_step(self.h_pid, self.gains_h, rh_ref - obs.rh_in, dt, -1.0, 1.0)?;
        self.t_pid = st.state;
        self.h_pid = sh.state;

        if let Some(tuners) = self.tuners.as_mut() {
            let partials = |step: &pid::PidStep| if step.saturated { [0.0; 3] } else { step.partials };
            tuners.temperature.update(e_vpd, partials(&st))?;
            tuners.humidity.update(e_vpd, partials(&sh))?;
        }

        if st.output.abs() > ACTIVE_LEVEL {
            self.mode_last_active = clock;
        }
        let s = self.cfg.settings;
        let wrong_side = match self.mode {
            ThermalMode::Heating => e_t < -s.mode_deadband,
            ThermalMode::Cooling => e_t > s.mode_deadband,
        };
        let mut thermal = st.output;
        if wrong_side {
            let since = *self.wrong_side_since.get_or_insert(clock);
            // Switch only once the current mode has been idle for longer
            // than the reheat window, so opposite actions never interleave.
            if clock - since >= s.mode_confirm && clock - self.mode_last_active > s.reheat_window + dt {
                self.mode = match self.mode {
                    ThermalMode::Heating => ThermalMode::Cooling,
                    ThermalMode::Cooling => ThermalMode::Heating,
                };
                self.t_pid = PidState::default();
                self.mode_last_active = f64::NEG_INFINITY;
                self.wrong_side_since = None;
                thermal = 0.0;
            }
        } else {
            self.wrong_side_since = None;
        }
        self.command = ActuatorCommand::from_signed(thermal, sh.output);
        Ok(())
    }
}
