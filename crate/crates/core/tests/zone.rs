use proptest::prelude::*;
use vpd_cascade::optimizer::CopCurve;
use vpd_cascade::zone::{self, ActuatorCommand, DisturbanceEvent, WeatherSample, ZoneParams, ZoneState};

fn sealed() -> ZoneParams {
    ZoneParams { infiltration_ach: 0.0, transpiration_rate: 0.0, ua: 0.0, internal_gain: 0.0, ..ZoneParams::default() }
}

fn run(params: &ZoneParams, start: ZoneState, cmd: ActuatorCommand, weather: &WeatherSample, events: &[DisturbanceEvent], dt: f64, steps: usize) -> Vec<ZoneState> {
    let cop = CopCurve::default();
    let mut out = vec![start];
    let mut s = start;
    for _ in 0..steps {
        s = zone::step(params, &cop, &s, &cmd, &WeatherSample { clock: s.clock, ..*weather }, events, dt).unwrap().0;
        out.push(s);
    }
    out
}

proptest! {
    #[test]
    fn sealed_zone_conserves_moisture(t in 10.0..35.0_f64, rh in 30.0..80.0_f64, heat in 0.0..1.0_f64) {
        let p = sealed();
        let s0 = ZoneState::from_conditions(t, rh, &p).unwrap();
        let w = WeatherSample::new(0.0, 50.0, 0.0);
        let cmd = ActuatorCommand { heat, ..ActuatorCommand::idle() };
        let tr = run(&p, s0, cmd, &w, &[], 30.0, 200);
        prop_assert!((tr.last().unwrap().w_in - s0.w_in).abs() < 1e-15);
    }

    #[test]
    fn humidifier_mass_balance(t in 18.0..30.0_f64, rh in 30.0..60.0_f64) {
        let p = ZoneParams { actuator_tau: [0.0; 4], ..sealed() };
        let s0 = ZoneState::from_conditions(t, rh, &p).unwrap();
        let w = WeatherSample::new(t, rh, 0.0);
        let cmd = ActuatorCommand { hum: 1.0, ..ActuatorCommand::idle() };
        let tr = run(&p, s0, cmd, &w, &[], 30.0, 10);
        let added = p.hum_cap / 3600.0 * 300.0 / p.m_air;
        prop_assert!((tr[10].w_in - s0.w_in - added).abs() < 1e-12);
    }

    #[test]
    fn relaxes_towards_ambient(t0 in 5.0..40.0_f64, t_out in 0.0..40.0_f64) {
        let p = ZoneParams { transpiration_rate: 0.0, internal_gain: 0.0, ..ZoneParams::default() };
        let s0 = ZoneState::from_conditions(t0, 50.0, &p).unwrap();
        let w = WeatherSample::new(t_out, 50.0, 0.0);
        let tr = run(&p, s0, ActuatorCommand::idle(), &w, &[], 60.0, 72 * 60);
        let gaps: Vec<f64> = tr.iter().map(|s| (s.t_in - t_out).abs()).collect();
        prop_assert!(gaps.windows(2).all(|g| g[1] <= g[0] + 1e-12));
        prop_assert!(gaps[gaps.len() - 1] < 0.01 * gaps[0].max(1.0));
    }
}

#[test]
fn halving_dt_barely_changes_the_trajectory() {
    let p = ZoneParams::default();
    let s0 = ZoneState::from_conditions(22.0, 60.0, &p).unwrap();
    let cop = CopCurve::default();
    let events = [DisturbanceEvent::door(36_000.0, 600.0, 6.0)];
    let cmd_at = |clock: f64| ActuatorCommand { heat: 0.3 + 0.3 * (clock / 7200.0).sin().max(0.0), hum: 0.2, ..ActuatorCommand::idle() };
    let weather_at = |clock: f64| WeatherSample::new(5.0 + 8.0 * (clock / 86_400.0 * std::f64::consts::TAU).sin(), 60.0, clock);
    let simulate = |dt: f64| {
        let mut s = s0;
        let mut temps = Vec::new();
        while s.clock < 86_400.0 - 1e-9 {
            s = zone::step(&p, &cop, &s, &cmd_at(s.clock), &weather_at(s.clock), &events, dt).unwrap().0;
            if (s.clock / 60.0).fract().abs() < 1e-9 || (s.clock / 60.0).fract() > 1.0 - 1e-9 {
                temps.push(s.t_in);
            }
        }
        temps
    };
    let coarse = simulate(60.0);
    let fine = simulate(30.0);
    assert_eq!(coarse.len(), fine.len());
    let worst = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05, "max |dT| {worst}");
}

#[test]
fn step_is_deterministic() {
    let p = ZoneParams::default();
    let s0 = ZoneState::from_conditions(24.0, 70.0, &p).unwrap();
    let w = WeatherSample::new(30.0, 20.0, 0.0);
    let cmd = ActuatorCommand { cool: 0.4, dehum: 0.3, ..ActuatorCommand::idle() };
    assert_eq!(run(&p, s0, cmd, &w, &[], 30.0, 500), run(&p, s0, cmd, &w, &[], 30.0, 500));
}

#[test]
fn dehumidifier_dries_and_warms() {
    let p = ZoneParams { actuator_tau: [0.0; 4], ..sealed() };
    let s0 = ZoneState::from_conditions(24.0, 70.0, &p).unwrap();
    let w = WeatherSample::new(24.0, 70.0, 0.0);
    let cop = CopCurve::default();
    let cmd = ActuatorCommand { dehum: 1.0, ..ActuatorCommand::idle() };
    let (next, energy) = zone::step(&p, &cop, &s0, &cmd, &w, &[], 30.0).unwrap();
    assert!(next.w_in < s0.w_in);
    assert!(next.t_in > s0.t_in);
    assert!(energy.dehum > 0.0);
}

#[test]
fn cooling_below_dew_point_condenses() {
    let p = ZoneParams { actuator_tau: [0.0; 4], ..sealed() };
    let cop = CopCurve::default();
    let w = WeatherSample::new(28.0, 80.0, 0.0);
    let cmd = ActuatorCommand { cool: 1.0, ..ActuatorCommand::idle() };
    let humid = ZoneState::from_conditions(28.0, 80.0, &p).unwrap();
    let (next, _) = zone::step(&p, &cop, &humid, &cmd, &w, &[], 30.0).unwrap();
    assert!(next.w_in < humid.w_in);
    // Coil above the dew point removes nothing.
    let warm_coil = ZoneParams { coil_temp: 20.0, ..p.clone() };
    let dry = ZoneState::from_conditions(28.0, 30.0, &warm_coil).unwrap();
    let (next, _) = zone::step(&warm_coil, &cop, &dry, &cmd, &w, &[], 30.0).unwrap();
    assert_eq!(next.w_in, dry.w_in);
}

#[test]
fn door_opening_pulls_towards_outdoor_air() {
    let p = ZoneParams::default();
    let s0 = ZoneState::from_conditions(25.0, 70.0, &p).unwrap();
    let w = WeatherSample::new(35.0, 10.0, 0.0);
    let shut = run(&p, s0, ActuatorCommand::idle(), &w, &[], 30.0, 20);
    let open = run(&p, s0, ActuatorCommand::idle(), &w, &[DisturbanceEvent::door(0.0, 600.0, 6.0)], 30.0, 20);
    assert!(open[20].w_in < shut[20].w_in);
    assert!(open[20].t_in > shut[20].t_in);
}

#[test]
fn rejects_bad_dt() {
    let p = ZoneParams::default();
    let s0 = ZoneState::from_conditions(25.0, 70.0, &p).unwrap();
    let w = WeatherSample::new(25.0, 50.0, 0.0);
    let cop = CopCurve::default();
    assert!(zone::step(&p, &cop, &s0, &ActuatorCommand::idle(), &w, &[], 0.0).is_err());
    assert!(zone::step(&p, &cop, &s0, &ActuatorCommand::idle(), &w, &[], -1.0).is_err());
}
