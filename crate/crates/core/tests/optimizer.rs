use proptest::prelude::*;
use vpd_cascade::optimizer::{self, ActiveBound, EnergyModelParams};
use vpd_cascade::psychro::{self, Celsius, KiloPascal};
use vpd_cascade::zone::WeatherSample;

fn grid_min(target: KiloPascal, weather: &WeatherSample, params: &EnergyModelParams) -> (f64, f64) {
    let (lo, hi) = optimizer::feasible_interval(target, params).unwrap();
    let n = ((hi - lo) / 0.01).floor() as usize;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=n + 1 {
        let t = (lo + i as f64 * 0.01).min(hi);
        let c = optimizer::energy_cost(Celsius(t), weather, params, target).unwrap();
        if c < best.0 {
            best = (c, t);
        }
    }
    best
}

fn params_strategy() -> impl Strategy<Value = EnergyModelParams> {
    (0.5..6.0_f64, 0.0..4.0_f64, 1.0..5.0_f64).prop_map(|(ua, m, cop_dehum)| EnergyModelParams { ua, moisture_rate_coeff: m, cop_dehum, ..EnergyModelParams::default() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_brute_force_grid(p in params_strategy(), t_out in -20.0..45.0_f64, rh_out in 5.0..100.0_f64, v in 0.3..2.5_f64) {
        let weather = WeatherSample::new(t_out, rh_out, 0.0);
        let target = KiloPascal(v);
        let (sp, kkt) = optimizer::optimize_setpoint(target, &weather, &p).unwrap();
        let got = optimizer::energy_cost(sp.t_sp, &weather, &p, target).unwrap();
        let (best, _) = grid_min(target, &weather, &p);
        prop_assert!(got - best <= 1e-6 * best.max(1.0));
        let back = psychro::vpd(sp.t_sp, sp.rh_sp).unwrap().0;
        prop_assert!((back - v).abs() <= 1e-8);
        prop_assert!(sp.t_sp.0 >= p.t_min && sp.t_sp.0 <= p.t_max);
        if kkt.active_bound == ActiveBound::None {
            prop_assert!(kkt.stationarity_residual.abs() <= 1e-3);
        }
    }

    #[test]
    fn warmer_weather_never_lowers_setpoint_without_dehumidification(p in params_strategy(), t_out in -20.0..35.0_f64, v in 0.5..2.0_f64) {
        let p = EnergyModelParams { moisture_rate_coeff: 0.0, ..p };
        let target = KiloPascal(v);
        let cold = optimizer::optimize_setpoint(target, &WeatherSample::new(t_out, 50.0, 0.0), &p).unwrap().0;
        let warm = optimizer::optimize_setpoint(target, &WeatherSample::new(t_out + 10.0, 50.0, 0.0), &p).unwrap().0;
        prop_assert!(warm.t_sp.0 >= cold.t_sp.0 - 1e-9);
    }
}

#[test]
fn bound_cases_are_flagged() {
    let p = EnergyModelParams::default();
    let (sp, kkt) = optimizer::optimize_setpoint(KiloPascal(1.0), &WeatherSample::new(42.0, 10.0, 0.0), &p).unwrap();
    assert_eq!(kkt.active_bound, ActiveBound::Upper);
    assert_eq!(sp.t_sp.0, p.t_max);
    let (sp, kkt) = optimizer::optimize_setpoint(KiloPascal(1.0), &WeatherSample::new(-15.0, 60.0, 0.0), &p).unwrap();
    assert_eq!(kkt.active_bound, ActiveBound::Lower);
    assert_eq!(sp.t_sp.0, p.t_min);
}

#[test]
fn marginal_balance_is_stationary_at_interior_optimum() {
    let p = EnergyModelParams { moisture_rate_coeff: 3.0, ..EnergyModelParams::default() };
    let weather = WeatherSample::new(27.0, 95.0, 0.0);
    let target = KiloPascal(1.0_f64);
    let (sp, kkt) = optimizer::optimize_setpoint(target, &weather, &p).unwrap();
    assert_eq!(kkt.active_bound, ActiveBound::None);
    let mb = optimizer::marginal_balance(sp.t_sp, &weather, &p, target).unwrap();
    if mb.is_kink() {
        let left = mb.left_total.unwrap();
        assert!(left <= 1e-3 && mb.total() >= -1e-3);
    } else {
        assert!(mb.total().abs() <= 1e-3, "{}", mb.total());
    }
}
