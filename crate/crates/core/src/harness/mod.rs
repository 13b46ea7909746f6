//! Scenario execution, comparison sweeps and the metric suite.

pub mod config;
pub mod metrics;
pub mod trace;
pub mod weather;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{ConfigError, DoorSchedule, GainSource, Lighting, Scenario};
pub use metrics::{MetricsContext, MetricsError, MetricsReport};
pub use trace::TraceRow;
pub use weather::{generate_weather, ClimateParams, Preset, WeatherModel};

use crate::control::{make_controller, ControlError, ControllerKind, LoopGains};
use crate::optimizer::OptimizerError;
use crate::pid::{self, PidError, RelayConfig};
use crate::psychro::{self, Celsius, KiloPascal, RelHumidityPct};
use crate::zone::{self, Channel, ConflictMonitor, DisturbanceEvent, ZoneError, ZoneParams, ZoneRelayPlant, ZoneState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Zone(#[from] ZoneError),
    #[error("autotune failed: {0}")]
    Autotune(#[from] PidError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("simulation fault at t = {clock} s: {what}")]
    Fault { clock: f64, what: String },
}

impl Error {
    /// Process exit code: 2 configuration, 3 simulation fault, 4 infeasible
    /// optimization.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Control(ControlError::Optimizer(OptimizerError::Infeasible { .. })) => 4,
            Error::Control(
                ControlError::TimingRatio { .. } | ControlError::NonPositivePeriod { .. } | ControlError::TargetOutOfRange(_) | ControlError::Config(_),
            ) => 2,
            Error::Zone(ZoneError::InvalidParams(_) | ZoneError::DtOutOfRange(_)) => 2,
            _ => 3,
        }
    }
}

/// Result of one scenario run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub rows: Vec<TraceRow>,
    pub gains: LoopGains,
    pub events: Vec<DisturbanceEvent>,
    /// Largest tuner Lipschitz estimate at the end of the run, if a tuner ran.
    pub lipschitz: Option<f64>,
}

impl RunOutput {
    pub fn trace_csv(&self) -> String {
        trace::to_csv_string(&self.rows)
    }
}

fn fault_at(clock: f64) -> impl Fn(ControlError) -> Error {
    move |e| match e {
        ControlError::Optimizer(OptimizerError::Infeasible { .. }) => Error::Control(e),
        other => Error::Fault { clock, what: other.to_string() },
    }
}

/// Signed actuator levels that hold the zone at `(t, rh)` for the given
/// weather: thermal in heater/cooler fractions, moisture in humidifier/
/// dehumidifier fractions.
pub fn equilibrium_levels(params: &ZoneParams, t: f64, rh: f64, t_out: f64, rh_out: f64) -> Result<(f64, f64), Error> {
    let p = KiloPascal(params.p_total);
    let w_in = psychro::humidity_ratio(Celsius(t), RelHumidityPct(rh), p).map_err(ZoneError::from)?;
    let w_out = psychro::humidity_ratio(Celsius(t_out), RelHumidityPct(rh_out), p).map_err(ZoneError::from)?;
    let vpd = psychro::vpd(Celsius(t), RelHumidityPct(rh)).map_err(ZoneError::from)?.0;
    let m_inf = params.infiltration_ach * params.m_air / 3600.0;
    let moisture = -(params.floor_area * params.transpiration_rate * params.transpiration_vpd_coeff * vpd / 3600.0 + m_inf * (w_out - w_in));
    let moist_level = if moisture >= 0.0 { moisture * 3600.0 / params.hum_cap } else { moisture * 3600.0 / params.dehum_cap };
    let dehum_heat = if moisture < 0.0 { -moisture * zone::L_V * (1.0 + 1.0 / params.dehum_cop) } else { 0.0 };
    let heat = -(params.effective_ua() * (t_out - t) + params.internal_gain + dehum_heat);
    let thermal = if heat >= 0.0 { heat / params.heater_cap } else { heat / params.cooler_cap };
    Ok((thermal.clamp(-1.0, 1.0), moist_level.clamp(-1.0, 1.0)))
}

/// Relay experiments on a copy of the zone held at the scenario's initial
/// conditions under the clock-zero weather, followed by the classic
/// Ziegler–Nichols table for each loop.
pub fn autotune_gains(s: &Scenario) -> Result<LoopGains, Error> {
    let model = WeatherModel::new(s.climate, s.weather_seed, s.start_day);
    let weather = model.sample(0.0);
    let (thermal, moisture) = equilibrium_levels(&s.zone, s.initial_t, s.initial_rh, weather.t_out.0, weather.rh_out.0)?;
    let state = ZoneState::from_conditions(s.initial_t, s.initial_rh, &s.zone)?;
    let amp = 0.2;
    let run = |channel: Channel, bias: f64, other: f64, hysteresis: f64| -> Result<pid::PidGains, Error> {
        let mut plant = ZoneRelayPlant { params: &s.zone, cop: &s.cop, state, weather, channel, other };
        let cfg = RelayConfig { amplitude: amp, bias, hysteresis, dt: s.dt_inner, budget_s: 3.0 * 86_400.0, direct_acting: true };
        let up = pid::relay_autotune(&mut plant, &cfg)?;
        Ok(pid::ziegler_nichols(up.ku, up.tu)?)
    };
    Ok(LoopGains {
        temperature: run(Channel::Temperature, thermal, moisture, 0.05)?,
        humidity: run(Channel::Humidity, moisture, thermal, 0.2)?,
    })
}

pub fn resolve_gains(s: &Scenario) -> Result<LoopGains, Error> {
    match &s.gains {
        GainSource::Manual(g) => Ok(*g),
        GainSource::Autotune => autotune_gains(s),
    }
}

pub fn metrics_context(s: &Scenario, events: &[DisturbanceEvent]) -> MetricsContext {
    MetricsContext { events: events.to_vec(), floor_area: s.zone.floor_area, skip_until: s.warmup_h * 3600.0 }
}

/// Steps zone and controller for the whole scenario.
pub fn run(s: &Scenario) -> Result<RunOutput, Error> {
    let gains = resolve_gains(s)?;
    run_with_gains(s, gains)
}

pub fn run_with_gains(s: &Scenario, gains: LoopGains) -> Result<RunOutput, Error> {
    s.validate()?;
    let model = WeatherModel::new(s.climate, s.weather_seed, s.start_day);
    let events = s.doors.events(s.duration_s());
    let mut controller = make_controller(s.controller_config(gains))?;
    let mut state = ZoneState::from_conditions(s.initial_t, s.initial_rh, &s.zone)?;
    let mut monitor = ConflictMonitor::new(s.settings.reheat_window);
    let dt = s.dt_inner;
    let steps = (s.duration_s() / dt).round() as usize;
    let mut rows = Vec::with_capacity(steps);
    let mut energy = 0.0;
    let mut ev_lo = 0;

    for k in 0..steps {
        let clock = k as f64 * dt;
        state.clock = clock;
        let weather = model.sample(clock);
        let rh = zone::rh_in(&state, &s.zone).map_err(|e| Error::Fault { clock, what: e.to_string() })?.0;
        let vpd = psychro::vpd(Celsius(state.t_in), RelHumidityPct(rh)).map_err(|e| Error::Fault { clock, what: e.to_string() })?.0;
        let day = s.schedule.is_day(clock);
        let ppfd = if day { s.lighting.ppfd_day } else { 0.0 };
        let obs = crate::control::Observation {
            t_in: state.t_in,
            rh_in: rh,
            vpd,
            t_leaf: state.t_in - 1.5 + 0.8 * ppfd / 1000.0,
            co2: if day { s.lighting.co2_day } else { s.lighting.co2_night },
            ppfd,
        };
        let out = controller.control_tick(&obs, &weather, clock).map_err(fault_at(clock))?;
        let flags = monitor.observe(&out.command, clock);

        while ev_lo < events.len() && events[ev_lo].end() <= clock {
            ev_lo += 1;
        }
        let ev_hi = events[ev_lo..].iter().position(|e| e.start > clock).map_or(events.len(), |p| ev_lo + p);
        let (next, tick) = zone::step(&s.zone, &s.cop, &state, &out.command, &weather, &events[ev_lo..ev_hi], dt)?;
        energy += tick.total();

        rows.push(TraceRow {
            clock,
            t_out: weather.t_out.0,
            rh_out: weather.rh_out.0,
            t_in: state.t_in,
            rh_in: rh,
            vpd,
            vpd_target: out.vpd_target,
            t_sp: out.t_sp,
            rh_sp: out.rh_sp,
            heat: out.command.heat,
            cool: out.command.cool,
            dehum: out.command.dehum,
            hum: out.command.hum,
            gains_t: out.gains_t.as_array(),
            gains_h: out.gains_h.as_array(),
            energy_kwh_cum: energy,
            conflict_flags: flags.bits(),
            alert: out.alert,
        });
        state = next;
    }

    let metrics = metrics::compute(&rows, &metrics_context(s, &events))?;
    Ok(RunOutput { metrics, rows, gains, events, lipschitz: controller.tuner_lipschitz() })
}

/// One line of a comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub kind: ControllerKind,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Normalized-energy saving relative to the reference kind on the same seed, %.
    pub energy_reduction_pct: f64,
}

pub const COMPARISON_HEADER: &str = "kind,seed";

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = format!("{COMPARISON_HEADER},{},energy_reduction_pct\n", MetricsReport::CSV_HEADER);
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.kind, r.seed, r.metrics.to_csv_fields(), r.energy_reduction_pct));
    }
    out
}

/// Runs every kind on identical weather and disturbances for each seed.
/// Rows come back ordered by seed, then by the order of `kinds`. Energy
/// reduction is measured against `independent_pid` when present, otherwise
/// against the first kind.
pub fn compare(base: &Scenario, kinds: &[ControllerKind], seeds: &[u64]) -> Result<Vec<ComparisonRow>, Error> {
    if kinds.len() < 2 {
        return Err(ConfigError::Invalid("compare needs at least two controller kinds".into()).into());
    }
    let jobs: Vec<(u64, ControllerKind)> = seeds.iter().flat_map(|&seed| kinds.iter().map(move |&k| (seed, k))).collect();
    let gains: Vec<(u64, LoopGains)> = seeds
        .iter()
        .map(|&seed| {
            let mut s = base.clone();
            s.weather_seed = seed;
            resolve_gains(&s).map(|g| (seed, g))
        })
        .collect::<Result<_, _>>()?;
    let results: Vec<(u64, ControllerKind, MetricsReport)> = jobs
        .par_iter()
        .map(|&(seed, kind)| {
            let mut s = base.clone();
            s.weather_seed = seed;
            s.kind = kind;
            let g = gains.iter().find(|(sd, _)| *sd == seed).map(|(_, g)| *g).expect("gains resolved per seed");
            run_with_gains(&s, g).map(|out| (seed, kind, out.metrics))
        })
        .collect::<Result<_, _>>()?;
    let reference = if kinds.contains(&ControllerKind::IndependentPid) { ControllerKind::IndependentPid } else { kinds[0] };
    let mut rows = Vec::with_capacity(results.len());
    for &(seed, kind, metrics) in &results {
        let base_e = results.iter().find(|r| r.0 == seed && r.1 == reference).map(|r| r.2.energy_kwh_m2_day).expect("reference ran");
        let reduction = if base_e > 0.0 { 100.0 * (base_e - metrics.energy_kwh_m2_day) / base_e } else { 0.0 };
        rows.push(ComparisonRow { kind, seed, metrics, energy_reduction_pct: reduction });
    }
    Ok(rows)
}

/// Runs the scenario once per value of `key`.
pub fn sweep(base: &Scenario, key: &str, values: &[String]) -> Result<Vec<(String, MetricsReport)>, Error> {
    let scenarios: Vec<Scenario> = values
        .iter()
        .map(|v| {
            let mut s = base.clone();
            s.set(key, v)?;
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<_, Error>>()?;
    scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(s, v)| run(s).map(|out| (v.clone(), out.metrics)))
        .collect()
}
