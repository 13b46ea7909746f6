//! Scenario description and its `section.key = value` text format.

use std::str::FromStr;

use thiserror::Error;

use super::weather::{ClimateParams, Preset};
use crate::control::{CascadeTiming, ControllerConfig, ControllerKind, ControllerSettings, LoopGains, VpdSchedule};
use crate::nn::TunerConfig;
use crate::optimizer::{CopCurve, EnergyModelParams};
use crate::pid::PidGains;
use crate::zone::{DisturbanceEvent, ZoneParams, L_V};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("{key}: {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn value_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { key: key.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    /// Relay experiment on a copy of the zone, then the classic tuning table.
    Autotune,
    Manual(LoopGains),
}

/// Door openings repeated every simulated day.
#[derive(Debug, Clone, PartialEq)]
pub struct DoorSchedule {
    pub hours: Vec<f64>,
    pub duration_min: f64,
    pub exchange_boost: f64,
}

impl Default for DoorSchedule {
    fn default() -> Self {
        Self { hours: vec![10.0, 16.0], duration_min: 10.0, exchange_boost: 6.0 }
    }
}

impl DoorSchedule {
    pub fn events(&self, duration_s: f64) -> Vec<DisturbanceEvent> {
        let mut out = Vec::new();
        let days = (duration_s / 86_400.0).ceil() as usize;
        for d in 0..days {
            for &h in &self.hours {
                let start = d as f64 * 86_400.0 + h * 3600.0;
                let ev = DisturbanceEvent::door(start, self.duration_min * 60.0, self.exchange_boost);
                if ev.end() < duration_s {
                    out.push(ev);
                }
            }
        }
        out.sort_by(|a, b| a.start.total_cmp(&b.start));
        out
    }
}

/// Lighting and CO₂ schedule feeding the tuner's crop features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lighting {
    pub ppfd_day: f64,
    pub co2_day: f64,
    pub co2_night: f64,
}

impl Default for Lighting {
    fn default() -> Self {
        Self { ppfd_day: 800.0, co2_day: 900.0, co2_night: 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub preset: Preset,
    pub climate: ClimateParams,
    pub duration_days: f64,
    pub start_day: f64,
    pub dt_inner: f64,
    pub weather_seed: u64,
    pub warmup_h: f64,
    pub initial_t: f64,
    pub initial_rh: f64,
    pub doors: DoorSchedule,
    pub lighting: Lighting,
    pub zone: ZoneParams,
    pub cop: CopCurve,
    pub kind: ControllerKind,
    pub timing: CascadeTiming,
    pub schedule: VpdSchedule,
    pub tuner: TunerConfig,
    pub settings: ControllerSettings,
    pub gains: GainSource,
    /// Optimizer envelope conductance; defaults to the zone's effective UA.
    pub energy_ua: Option<f64>,
    pub moisture_rate_coeff: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::preset(Preset::Continental5a)
    }
}

impl Scenario {
    pub fn preset(preset: Preset) -> Self {
        let energy = EnergyModelParams::<f64>::default();
        Self {
            preset,
            climate: ClimateParams::preset(preset),
            duration_days: 90.0,
            start_day: 0.0,
            dt_inner: 30.0,
            weather_seed: 1,
            warmup_h: 6.0,
            initial_t: 24.0,
            initial_rh: 60.0,
            doors: DoorSchedule::default(),
            lighting: Lighting::default(),
            zone: ZoneParams::default(),
            cop: CopCurve::default(),
            kind: ControllerKind::CascadeNn,
            timing: CascadeTiming::default(),
            schedule: VpdSchedule::default(),
            tuner: TunerConfig::default(),
            settings: ControllerSettings::default(),
            gains: GainSource::Autotune,
            energy_ua: None,
            moisture_rate_coeff: energy.moisture_rate_coeff,
            t_min: energy.t_min,
            t_max: energy.t_max,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_days * 86_400.0
    }

    pub fn energy_params(&self) -> EnergyModelParams {
        EnergyModelParams {
            ua: self.energy_ua.unwrap_or_else(|| self.zone.effective_ua()),
            cop_curve: self.cop,
            cop_dehum: self.zone.dehum_cop,
            l_v: L_V,
            moisture_rate_coeff: self.moisture_rate_coeff,
            t_min: self.t_min,
            t_max: self.t_max,
        }
    }

    pub fn controller_config(&self, gains: LoopGains) -> ControllerConfig {
        ControllerConfig {
            kind: self.kind,
            zone: self.zone,
            timing: self.timing,
            schedule: self.schedule,
            tuner: self.tuner,
            energy: self.energy_params(),
            gains,
            settings: self.settings,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.duration_days >= 1.0) {
            return bad(format!("duration_days {} must be at least 1", self.duration_days));
        }
        if !(self.dt_inner > 0.0 && self.dt_inner <= self.timing.inner_period) {
            return bad(format!("dt_inner {} must lie in (0, inner_period]", self.dt_inner));
        }
        if !(self.warmup_h >= 0.0) || self.warmup_h * 3600.0 >= self.duration_s() {
            return bad(format!("warmup_h {} must be non-negative and shorter than the run", self.warmup_h));
        }
        if !(self.doors.duration_min > 0.0 && self.doors.exchange_boost >= 0.0) {
            return bad("door duration must be positive and boost non-negative".into());
        }
        if self.doors.hours.iter().any(|h| !(0.0..24.0).contains(h)) {
            return bad("door hours must lie in [0, 24)".into());
        }
        if !(0.0..=100.0).contains(&self.initial_rh) {
            return bad(format!("initial_rh {} outside [0, 100]", self.initial_rh));
        }
        self.zone.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.energy_params().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.schedule.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.tuner.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.kind.is_cascade() {
            self.timing.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. `scenario.preset` is
    /// applied first wherever it appears so later weather keys refine it.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: format!("expected 'key = value', got '{line}'") })?;
            let (k, v) = (k.trim(), v.trim());
            if !k.contains('.') {
                return Err(ConfigError::Syntax { line: i + 1, msg: format!("key '{k}' lacks a section") });
            }
            pairs.push((i + 1, k.to_string(), v.to_string()));
        }
        let mut s = match pairs.iter().rev().find(|p| p.1 == "scenario.preset") {
            Some((_, _, v)) => Scenario::preset(v.parse().map_err(|m: String| value_err("scenario.preset", m))?),
            None => Scenario::default(),
        };
        for (line, k, v) in &pairs {
            if k == "scenario.preset" {
                continue;
            }
            s.set(k, v).map_err(|e| match e {
                ConfigError::Value { key, msg } => ConfigError::Syntax { line: *line, msg: format!("{key}: {msg}") },
                ConfigError::UnknownKey(key) => ConfigError::Syntax { line: *line, msg: format!("unknown key '{key}'") },
                other => other,
            })?;
        }
        s.validate()?;
        Ok(s)
    }

    /// Sets one dotted key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
            v.parse().map_err(|_| value_err(key, format!("cannot parse '{v}'")))
        }
        fn list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num(key, x.trim())).collect()
        }
        fn triple(key: &str, v: &str) -> Result<[f64; 3], ConfigError> {
            let l = list(key, v)?;
            l.try_into().map_err(|_| value_err(key, "expected three comma-separated numbers"))
        }
        fn gains(key: &str, v: &str) -> Result<PidGains, ConfigError> {
            Ok(PidGains::from_array(triple(key, v)?))
        }
        let f = |v: &str| num::<f64>(key, v);
        let z = &mut self.zone;
        let c = &mut self.climate;
        let st = &mut self.settings;
        match key {
            "scenario.preset" => {
                let p: Preset = value.parse().map_err(|m: String| value_err(key, m))?;
                self.preset = p;
                self.climate = ClimateParams::preset(p);
            }
            "scenario.duration_days" => self.duration_days = f(value)?,
            "scenario.start_day" => self.start_day = f(value)?,
            "scenario.dt_inner" => self.dt_inner = f(value)?,
            "scenario.weather_seed" => self.weather_seed = num(key, value)?,
            "scenario.warmup_h" => self.warmup_h = f(value)?,
            "scenario.initial_t" => self.initial_t = f(value)?,
            "scenario.initial_rh" => self.initial_rh = f(value)?,

            "weather.annual_mean" => c.annual_mean = f(value)?,
            "weather.seasonal_amplitude" => c.seasonal_amplitude = f(value)?,
            "weather.diurnal_amplitude" => c.diurnal_amplitude = f(value)?,
            "weather.diurnal_equinox_boost" => c.diurnal_equinox_boost = f(value)?,
            "weather.coldest_day" => c.coldest_day = f(value)?,
            "weather.coldest_hour" => c.coldest_hour = f(value)?,
            "weather.temp_noise" => c.temp_noise = f(value)?,
            "weather.rh_winter" => c.rh_winter = f(value)?,
            "weather.rh_summer" => c.rh_summer = f(value)?,
            "weather.rh_temp_slope" => c.rh_temp_slope = f(value)?,
            "weather.rh_noise" => c.rh_noise = f(value)?,
            "weather.rh_min" => c.rh_min = f(value)?,
            "weather.rh_max" => c.rh_max = f(value)?,

            "disturbance.door_hours" => self.doors.hours = list(key, value)?,
            "disturbance.door_duration_min" => self.doors.duration_min = f(value)?,
            "disturbance.door_boost_ach" => self.doors.exchange_boost = f(value)?,

            "lights.ppfd_day" => self.lighting.ppfd_day = f(value)?,
            "lights.co2_day" => self.lighting.co2_day = f(value)?,
            "lights.co2_night" => self.lighting.co2_night = f(value)?,

            "zone.ua" => z.ua = f(value)?,
            "zone.c_th" => z.c_th = f(value)?,
            "zone.m_air" => z.m_air = f(value)?,
            "zone.floor_area" => z.floor_area = f(value)?,
            "zone.infiltration_ach" => z.infiltration_ach = f(value)?,
            "zone.heater_cap" => z.heater_cap = f(value)?,
            "zone.cooler_cap" => z.cooler_cap = f(value)?,
            "zone.coil_temp" => z.coil_temp = f(value)?,
            "zone.coil_airflow" => z.coil_airflow = f(value)?,
            "zone.coil_bypass" => z.coil_bypass = f(value)?,
            "zone.dehum_cap" => z.dehum_cap = f(value)?,
            "zone.dehum_cop" => z.dehum_cop = f(value)?,
            "zone.hum_cap" => z.hum_cap = f(value)?,
            "zone.hum_kwh_per_kg" => z.hum_kwh_per_kg = f(value)?,
            "zone.transpiration_rate" => z.transpiration_rate = f(value)?,
            "zone.transpiration_vpd_coeff" => z.transpiration_vpd_coeff = f(value)?,
            "zone.internal_gain" => z.internal_gain = f(value)?,
            "zone.p_total" => z.p_total = f(value)?,
            "zone.actuator_tau" => {
                let l = list(key, value)?;
                z.actuator_tau = l.try_into().map_err(|_| value_err(key, "expected four comma-separated numbers"))?;
            }

            "cop.c0" => self.cop.coeffs[0] = f(value)?,
            "cop.c1" => self.cop.coeffs[1] = f(value)?,
            "cop.c2" => self.cop.coeffs[2] = f(value)?,
            "cop.t_ref" => self.cop.t_ref = f(value)?,
            "cop.min" => self.cop.min = f(value)?,
            "cop.max" => self.cop.max = f(value)?,

            "energy.ua" => self.energy_ua = Some(f(value)?),
            "energy.moisture_rate_coeff" => self.moisture_rate_coeff = f(value)?,
            "energy.t_min" => self.t_min = f(value)?,
            "energy.t_max" => self.t_max = f(value)?,

            "controller.kind" => self.kind = value.parse().map_err(|e: crate::control::ControlError| value_err(key, e.to_string()))?,
            "controller.inner_period" => self.timing.inner_period = f(value)?,
            "controller.outer_period" => self.timing.outer_period = f(value)?,
            "controller.neutral_t" => st.neutral_t = f(value)?,
            "controller.rate_limit" => st.rate_limit = f(value)?,
            "controller.reheat_window" => st.reheat_window = f(value)?,
            "controller.mode_deadband" => st.mode_deadband = f(value)?,
            "controller.mode_confirm" => st.mode_confirm = f(value)?,
            "controller.alert_threshold" => st.alert_threshold = f(value)?,
            "controller.alert_sustain" => st.alert_sustain = f(value)?,
            "controller.nudge_step" => st.nudge_step = f(value)?,
            "controller.nudge_interval" => st.nudge_interval = f(value)?,
            "controller.nudge_max" => st.nudge_max = f(value)?,
            "controller.capacity_margin" => st.capacity_margin = f(value)?,
            "controller.surge_ach" => st.surge_ach = f(value)?,
            "controller.preview" => st.preview = f(value)?,
            "controller.step_preview" => st.step_preview = f(value)?,
            "controller.nn_seed" => st.nn_seed = num(key, value)?,
            "controller.nn_init_half_width" => st.nn_init_half_width = f(value)?,
            "controller.relative_bands" => {
                st.relative_bands = if value == "none" {
                    None
                } else {
                    let l = list(key, value)?;
                    match l.as_slice() {
                        [lo, hi] => Some((*lo, *hi)),
                        _ => return Err(value_err(key, "expected 'lo,hi' or 'none'")),
                    }
                }
            }

            "schedule.day_target" => self.schedule.day_target = f(value)?,
            "schedule.night_target" => self.schedule.night_target = f(value)?,
            "schedule.day_start_h" => self.schedule.day_start_h = f(value)?,
            "schedule.day_end_h" => self.schedule.day_end_h = f(value)?,

            "tuner.eta" => self.tuner.eta = f(value)?,
            "tuner.clip_c" => self.tuner.clip_c = f(value)?,
            "tuner.sigma_m" => self.tuner.sigma_m = f(value)?,
            "tuner.weight_cap" => self.tuner.weight_cap = f(value)?,
            "tuner.i_max" => self.tuner.i_max = f(value)?,
            "tuner.k_min" => self.tuner.k_min = triple(key, value)?,
            "tuner.k_max" => self.tuner.k_max = triple(key, value)?,

            "gains.mode" => match value {
                "autotune" => self.gains = GainSource::Autotune,
                "manual" => {
                    if self.gains == GainSource::Autotune {
                        self.gains = GainSource::Manual(LoopGains::default());
                    }
                }
                other => return Err(value_err(key, format!("expected 'autotune' or 'manual', got '{other}'"))),
            },
            "gains.t" | "gains.h" => {
                let g = gains(key, value)?;
                let mut current = match &self.gains {
                    GainSource::Manual(l) => *l,
                    GainSource::Autotune => LoopGains::default(),
                };
                if key == "gains.t" {
                    current.temperature = g;
                } else {
                    current.humidity = g;
                }
                self.gains = GainSource::Manual(current);
            }
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}
