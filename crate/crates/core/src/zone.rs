//! Lumped thermal–moisture model of one cultivation zone.
//!
//! One air-temperature node and one humidity-ratio node, integrated with
//! explicit Euler. Actuators respond through first-order lags. The coupling
//! terms are what make independent loops fight: dehumidifiers reject their
//! latent heat plus compressor work into the zone, and the cooling coil only
//! wrings out moisture once it runs below the zone dew point.

use thiserror::Error;

use crate::optimizer::CopCurve;
use crate::pid::RelayPlant;
use crate::psychro::{self, Celsius, KiloPascal, PsychroError, RelHumidityPct};
use crate::scalar::Real;

/// Latent heat of vaporization, kJ/kg.
pub const L_V: f64 = 2450.0;
/// Specific heat of dry air, kJ/(kg·K).
pub const CP_AIR: f64 = 1.006;
pub const MAX_DT: f64 = 300.0;
/// Actuator level above which a channel counts as active.
pub const ACTIVE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZoneError {
    #[error("time step {0} s outside (0, {MAX_DT}]")]
    DtOutOfRange(f64),
    #[error("simulation fault at t = {clock} s: {what}")]
    SimulationFault { clock: f64, what: String },
    #[error("invalid zone parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Psychro(#[from] PsychroError),
}

/// Outdoor conditions at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherSample<R = f64> {
    pub t_out: Celsius<R>,
    pub rh_out: RelHumidityPct<R>,
    pub clock: R,
}

impl<R: Real> WeatherSample<R> {
    pub fn new(t_out: R, rh_out: R, clock: R) -> Self {
        Self { t_out: Celsius(t_out), rh_out: RelHumidityPct(rh_out), clock }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneParams {
    /// Envelope conductance, kW/°C.
    pub ua: f64,
    /// Lumped thermal capacitance, kJ/°C.
    pub c_th: f64,
    /// Dry-air mass, kg.
    pub m_air: f64,
    pub floor_area: f64,
    pub infiltration_ach: f64,
    pub heater_cap: f64,
    /// Sensible cooling at full command, kW.
    pub cooler_cap: f64,
    /// Coil surface temperature at full cooling, °C.
    pub coil_temp: f64,
    /// Air mass flow across the coil, kg/s.
    pub coil_airflow: f64,
    /// Fraction of coil air that bypasses contact with the fins.
    pub coil_bypass: f64,
    /// kg water/h at full command.
    pub dehum_cap: f64,
    pub dehum_cop: f64,
    pub hum_cap: f64,
    /// Electrical use of the humidifier, kWh per kg.
    pub hum_kwh_per_kg: f64,
    /// kg/h per m² at 1 kPa VPD.
    pub transpiration_rate: f64,
    /// Transpiration per kPa relative to the 1 kPa reference.
    pub transpiration_vpd_coeff: f64,
    pub internal_gain: f64,
    pub p_total: f64,
    /// Actuator time constants, s: heat, cool, dehum, hum.
    pub actuator_tau: [f64; 4],
}

impl Default for ZoneParams {
    fn default() -> Self {
        Self {
            ua: 2.5,
            c_th: 80_000.0,
            m_air: 3600.0,
            floor_area: 1000.0,
            infiltration_ach: 0.5,
            heater_cap: 150.0,
            cooler_cap: 150.0,
            coil_temp: 8.0,
            coil_airflow: 8.0,
            coil_bypass: 0.5,
            dehum_cap: 60.0,
            dehum_cop: 3.0,
            hum_cap: 40.0,
            hum_kwh_per_kg: 0.1,
            transpiration_rate: 0.03,
            transpiration_vpd_coeff: 1.0,
            internal_gain: 30.0,
            p_total: psychro::P_STANDARD,
            actuator_tau: [120.0, 120.0, 180.0, 120.0],
        }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<(), ZoneError> {
        let positive = [
            ("ua", self.ua),
            ("c_th", self.c_th),
            ("m_air", self.m_air),
            ("floor_area", self.floor_area),
            ("heater_cap", self.heater_cap),
            ("cooler_cap", self.cooler_cap),
            ("coil_airflow", self.coil_airflow),
            ("dehum_cap", self.dehum_cap),
            ("hum_cap", self.hum_cap),
            ("p_total", self.p_total),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ZoneError::InvalidParams(format!("{name} must be positive")));
            }
        }
        if !(self.dehum_cop >= 1.0) {
            return Err(ZoneError::InvalidParams("dehum_cop must be >= 1".into()));
        }
        if !(self.infiltration_ach >= 0.0) {
            return Err(ZoneError::InvalidParams("infiltration_ach must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.coil_bypass) {
            return Err(ZoneError::InvalidParams("coil_bypass must be in [0, 1)".into()));
        }
        if self.actuator_tau.iter().any(|&t| !(t >= 0.0)) {
            return Err(ZoneError::InvalidParams("actuator time constants must be >= 0".into()));
        }
        if !(self.transpiration_rate >= 0.0 && self.internal_gain.is_finite() && self.hum_kwh_per_kg >= 0.0) {
            return Err(ZoneError::InvalidParams("transpiration, gains and humidifier energy must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Envelope plus base infiltration conductance, kW/°C.
    pub fn effective_ua(&self) -> f64 {
        self.ua + self.infiltration_ach * self.m_air * CP_AIR / 3600.0
    }
}

/// Actuator levels, each a fraction in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorCommand {
    pub heat: f64,
    pub cool: f64,
    pub dehum: f64,
    pub hum: f64,
}

impl ActuatorCommand {
    pub fn idle() -> Self {
        Self::default()
    }

    /// Splits signed loop outputs in [-1, 1] into the four actuators.
    pub fn from_signed(thermal: f64, moisture: f64) -> Self {
        Self {
            heat: thermal.clamp(0.0, 1.0),
            cool: (-thermal).clamp(0.0, 1.0),
            hum: moisture.clamp(0.0, 1.0),
            dehum: (-moisture).clamp(0.0, 1.0),
        }
    }

    pub fn clamped(&self) -> Self {
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        Self { heat: c(self.heat), cool: c(self.cool), dehum: c(self.dehum), hum: c(self.hum) }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.heat, self.cool, self.dehum, self.hum]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self { heat: a[0], cool: a[1], dehum: a[2], hum: a[3] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneState {
    pub t_in: f64,
    /// Humidity ratio, kg/kg.
    pub w_in: f64,
    pub clock: f64,
    /// Lagged actuator output actually delivered.
    pub actuators: ActuatorCommand,
}

impl ZoneState {
    pub fn from_conditions(t_in: f64, rh_in: f64, params: &ZoneParams) -> Result<Self, ZoneError> {
        let w_in = psychro::humidity_ratio(Celsius(t_in), RelHumidityPct(rh_in), KiloPascal(params.p_total))?;
        Ok(Self { t_in, w_in, clock: 0.0, actuators: ActuatorCommand::idle() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceKind {
    DoorOpening,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceEvent {
    pub kind: DisturbanceKind,
    pub start: f64,
    pub duration: f64,
    /// Added air changes per hour while active.
    pub exchange_boost: f64,
}

impl DisturbanceEvent {
    pub fn door(start: f64, duration: f64, exchange_boost: f64) -> Self {
        Self { kind: DisturbanceKind::DoorOpening, start, duration, exchange_boost }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn active_at(&self, clock: f64) -> bool {
        clock >= self.start && clock < self.end()
    }
}

/// Electrical energy drawn during one step, kWh.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTick {
    pub heat: f64,
    pub cool: f64,
    pub dehum: f64,
    pub hum: f64,
}

impl EnergyTick {
    pub fn total(&self) -> f64 {
        self.heat + self.cool + self.dehum + self.hum
    }
}

/// Zone RH; any humidity ratio at or above saturation reads exactly 100%.
pub fn rh_in(state: &ZoneState, params: &ZoneParams) -> Result<RelHumidityPct, ZoneError> {
    let p = KiloPascal(params.p_total);
    let w_sat = psychro::humidity_ratio(Celsius(state.t_in), RelHumidityPct(100.0), p)?;
    if state.w_in >= w_sat {
        return Ok(RelHumidityPct(100.0));
    }
    Ok(psychro::rh_from_humidity_ratio(Celsius(state.t_in), state.w_in, p)?.rh)
}

fn fault(clock: f64, what: impl Into<String>) -> ZoneError {
    ZoneError::SimulationFault { clock, what: what.into() }
}

/// Advances the zone by `dt` seconds.
pub fn step(
    params: &ZoneParams,
    cop: &CopCurve,
    state: &ZoneState,
    cmd: &ActuatorCommand,
    weather: &WeatherSample,
    disturbances: &[DisturbanceEvent],
    dt: f64,
) -> Result<(ZoneState, EnergyTick), ZoneError> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(ZoneError::DtOutOfRange(dt));
    }
    if !(state.t_in.is_finite() && state.w_in.is_finite()) {
        return Err(fault(state.clock, "non-finite zone state"));
    }
    let clock = state.clock;
    let wrap = |e: PsychroError| fault(clock, e.to_string());

    let cmd = cmd.clamped().as_array();
    let mut lvl = state.actuators.as_array();
    for i in 0..4 {
        let tau = params.actuator_tau[i];
        let a = if tau > 0.0 { 1.0 - (-dt / tau).exp() } else { 1.0 };
        lvl[i] += (cmd[i] - lvl[i]) * a;
    }
    let act = ActuatorCommand::from_array(lvl);

    let p = KiloPascal(params.p_total);
    let t_in = state.t_in;
    let w_in = state.w_in;
    let rh = psychro::rh_from_humidity_ratio(Celsius(t_in), w_in, p).map_err(wrap)?.rh;
    let vpd_in = psychro::vpd(Celsius(t_in), rh).map_err(wrap)?.0;
    let w_out = psychro::humidity_ratio(weather.t_out, weather.rh_out, p).map_err(wrap)?;

    let boost: f64 = disturbances.iter().filter(|d| d.active_at(clock)).map(|d| d.exchange_boost).sum();
    let m_inf = (params.infiltration_ach + boost) * params.m_air / 3600.0;

    // Moisture flows, kg/s.
    let transpiration = params.floor_area * params.transpiration_rate * params.transpiration_vpd_coeff * vpd_in.max(0.0) / 3600.0;
    let humidify = act.hum * params.hum_cap / 3600.0;
    let dehum_request = act.dehum * params.dehum_cap / 3600.0;
    // Coil runs warmer at part load; condensation only once it is below the dew point.
    let t_coil = t_in - act.cool * (t_in - params.coil_temp).max(0.0);
    let w_coil_sat = psychro::humidity_ratio(Celsius(t_coil), RelHumidityPct(100.0), p).map_err(wrap)?;
    let condensation = if act.cool > 0.0 {
        params.coil_airflow * (1.0 - params.coil_bypass) * (w_in - w_coil_sat).max(0.0)
    } else {
        0.0
    };
    let infiltration_w = m_inf * (w_out - w_in);

    // The dehumidifier cannot remove more water than the air holds.
    let available = w_in * params.m_air / dt + transpiration + humidify + infiltration_w.max(0.0) - condensation;
    let dehum_removal = dehum_request.min(available.max(0.0));

    let dw = (transpiration + humidify - dehum_removal - condensation + infiltration_w) / params.m_air;

    // Heat flows, kW.
    let q_heat = act.heat * params.heater_cap;
    let q_cool = act.cool * params.cooler_cap;
    let q_dehum = dehum_removal * L_V * (1.0 + 1.0 / params.dehum_cop);
    let q_env = params.ua * (weather.t_out.0 - t_in);
    let q_inf = m_inf * CP_AIR * (weather.t_out.0 - t_in);
    let dt_in = (q_heat + q_dehum - q_cool + q_env + params.internal_gain + q_inf) / params.c_th;

    let mut next = ZoneState {
        t_in: t_in + dt_in * dt,
        w_in: (w_in + dw * dt).max(0.0),
        clock: clock + dt,
        actuators: act,
    };
    if !(next.t_in.is_finite() && next.w_in.is_finite()) {
        return Err(fault(clock, "state became non-finite"));
    }
    let w_sat = psychro::humidity_ratio(Celsius(next.t_in), RelHumidityPct(100.0), p).map_err(wrap)?;
    if next.w_in > w_sat {
        next.w_in = w_sat;
    }

    let cop_now = cop.eval(weather.t_out.0);
    let hours = dt / 3600.0;
    let latent_coil = condensation * L_V;
    let energy = EnergyTick {
        heat: q_heat / cop_now * hours,
        cool: (q_cool + latent_coil) / cop_now * hours,
        dehum: dehum_removal * L_V / params.dehum_cop * hours,
        hum: humidify * 3600.0 * params.hum_kwh_per_kg * hours,
    };
    Ok((next, energy))
}

/// Instantaneous conflict flags for one command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConflictFlags {
    pub thermal: bool,
    pub moisture: bool,
    pub reheat: bool,
}

impl ConflictFlags {
    pub fn any(&self) -> bool {
        self.thermal || self.moisture || self.reheat
    }

    /// Compact bit encoding for traces: thermal=1, moisture=2, reheat=4.
    pub fn bits(&self) -> u8 {
        self.thermal as u8 | (self.moisture as u8) << 1 | (self.reheat as u8) << 2
    }
}

/// Simultaneous opposing commands.
pub fn detect_conflict(cmd: &ActuatorCommand) -> ConflictFlags {
    ConflictFlags {
        thermal: cmd.heat > ACTIVE_LEVEL && cmd.cool > ACTIVE_LEVEL,
        moisture: cmd.dehum > ACTIVE_LEVEL && cmd.hum > ACTIVE_LEVEL,
        reheat: false,
    }
}

/// Tracks conflict flags over a run, including heating that follows cooling
/// within `window_s`.
#[derive(Debug, Clone)]
pub struct ConflictMonitor {
    pub window_s: f64,
    last_cool: Option<f64>,
    pub ticks: u64,
    pub thermal_ticks: u64,
    pub moisture_ticks: u64,
    pub reheat_ticks: u64,
    pub any_ticks: u64,
}

impl ConflictMonitor {
    pub fn new(window_s: f64) -> Self {
        Self { window_s, last_cool: None, ticks: 0, thermal_ticks: 0, moisture_ticks: 0, reheat_ticks: 0, any_ticks: 0 }
    }

    pub fn observe(&mut self, cmd: &ActuatorCommand, clock: f64) -> ConflictFlags {
        let mut flags = detect_conflict(cmd);
        if cmd.cool > ACTIVE_LEVEL {
            self.last_cool = Some(clock);
        }
        if cmd.heat > ACTIVE_LEVEL {
            if let Some(t) = self.last_cool {
                flags.reheat = clock - t <= self.window_s;
            }
        }
        self.ticks += 1;
        self.thermal_ticks += flags.thermal as u64;
        self.moisture_ticks += flags.moisture as u64;
        self.reheat_ticks += flags.reheat as u64;
        self.any_ticks += flags.any() as u64;
        flags
    }

    fn pct(&self, n: u64) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            100.0 * n as f64 / self.ticks as f64
        }
    }

    /// Percent of observed ticks with any flag raised.
    pub fn duty_pct(&self) -> f64 {
        self.pct(self.any_ticks)
    }

    pub fn reheat_duty_pct(&self) -> f64 {
        self.pct(self.reheat_ticks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Temperature,
    Humidity,
}

/// Drives one zone channel from a relay, with the other channel held at a
/// constant signed level and weather held fixed.
pub struct ZoneRelayPlant<'a> {
    pub params: &'a ZoneParams,
    pub cop: &'a CopCurve,
    pub state: ZoneState,
    pub weather: WeatherSample,
    pub channel: Channel,
    /// Signed command applied to the channel not under test.
    pub other: f64,
}

impl RelayPlant<f64> for ZoneRelayPlant<'_> {
    fn measure(&self) -> f64 {
        match self.channel {
            Channel::Temperature => self.state.t_in,
            Channel::Humidity => rh_in(&self.state, self.params).map(|r| r.0).unwrap_or(f64::NAN),
        }
    }

    fn advance(&mut self, u: f64, dt: f64) {
        let cmd = match self.channel {
            Channel::Temperature => ActuatorCommand::from_signed(u, self.other),
            Channel::Humidity => ActuatorCommand::from_signed(self.other, u),
        };
        let mut weather = self.weather;
        weather.clock = self.state.clock;
        if let Ok((next, _)) = step(self.params, self.cop, &self.state, &cmd, &weather, &[], dt) {
            self.state = next;
        }
    }
}
