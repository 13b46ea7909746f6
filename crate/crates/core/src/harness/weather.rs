//! Synthetic outdoor weather: seasonal and diurnal sinusoids plus seeded,
//! bounded, smooth noise.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::zone::WeatherSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Hot arid climate: cold winter nights, very hot summer afternoons, dry air.
    Desert2b,
    /// Humid continental climate: harsh winters, muggy summers.
    Continental5a,
    Custom,
}

impl Preset {
    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Desert2b => "desert_2b",
            Preset::Continental5a => "continental_5a",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "desert_2b" => Ok(Preset::Desert2b),
            "continental_5a" => Ok(Preset::Continental5a),
            "custom" => Ok(Preset::Custom),
            other => Err(format!("unknown preset '{other}'")),
        }
    }
}

/// Shape parameters of the generator. Temperatures in °C, RH in %.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClimateParams {
    pub annual_mean: f64,
    pub seasonal_amplitude: f64,
    /// Half of the diurnal swing at the solstices.
    pub diurnal_amplitude: f64,
    /// Extra half-swing that peaks at the equinoxes.
    pub diurnal_equinox_boost: f64,
    pub coldest_day: f64,
    /// Hour of the daily minimum; the maximum follows 12 h later.
    pub coldest_hour: f64,
    pub temp_noise: f64,
    pub rh_winter: f64,
    pub rh_summer: f64,
    /// RH drop per °C above the daily mean.
    pub rh_temp_slope: f64,
    pub rh_noise: f64,
    pub rh_min: f64,
    pub rh_max: f64,
}

impl ClimateParams {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desert2b | Preset::Custom => Self {
                annual_mean: 26.5,
                seasonal_amplitude: 9.0,
                diurnal_amplitude: 12.5,
                diurnal_equinox_boost: 2.5,
                coldest_day: 15.0,
                coldest_hour: 5.0,
                temp_noise: 0.8,
                rh_winter: 30.0,
                rh_summer: 15.0,
                rh_temp_slope: 1.2,
                rh_noise: 3.0,
                rh_min: 5.0,
                rh_max: 100.0,
            },
            Preset::Continental5a => Self {
                annual_mean: 7.5,
                seasonal_amplitude: 22.0,
                diurnal_amplitude: 5.5,
                diurnal_equinox_boost: 0.0,
                coldest_day: 15.0,
                coldest_hour: 5.0,
                temp_noise: 0.8,
                rh_winter: 68.0,
                rh_summer: 76.0,
                rh_temp_slope: 3.0,
                rh_noise: 3.0,
                rh_min: 20.0,
                rh_max: 100.0,
            },
        }
    }
}

// Sum of three slow sinusoids whose amplitudes add to at most `amp`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SmoothNoise {
    terms: [(f64, f64, f64); 3],
}

impl SmoothNoise {
    fn new(rng: &mut ChaCha8Rng, amp: f64, base_period_s: f64) -> Self {
        let weights = [0.5, 0.3, 0.2];
        let mut terms = [(0.0, 0.0, 0.0); 3];
        for (i, w) in weights.iter().enumerate() {
            let period = base_period_s * [1.0, 0.37, 0.13][i] * rng.gen_range(0.8..1.2);
            terms[i] = (amp * w, TAU / period, rng.gen_range(0.0..TAU));
        }
        Self { terms }
    }

    fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, w, ph)| a * (w * t + ph).sin()).sum()
    }
}

/// Deterministic weather as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherModel {
    pub climate: ClimateParams,
    /// Day of year at clock 0.
    pub start_day: f64,
    temp_noise: SmoothNoise,
    rh_noise: SmoothNoise,
}

impl WeatherModel {
    pub fn new(climate: ClimateParams, seed: u64, start_day: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let temp_noise = SmoothNoise::new(&mut rng, climate.temp_noise, 4.0 * 86_400.0);
        let rh_noise = SmoothNoise::new(&mut rng, climate.rh_noise, 1.5 * 86_400.0);
        Self { climate, start_day, temp_noise, rh_noise }
    }

    fn season(&self, day: f64) -> f64 {
        -(TAU * (day - self.climate.coldest_day) / 365.0).cos()
    }

    fn diurnal_amplitude(&self, day: f64) -> f64 {
        let s = (TAU * (day - self.climate.coldest_day) / 365.0).sin();
        self.climate.diurnal_amplitude + self.climate.diurnal_equinox_boost * s * s
    }

    /// Daily mean temperature without noise.
    pub fn daily_mean(&self, day: f64) -> f64 {
        self.climate.annual_mean + self.climate.seasonal_amplitude * self.season(day)
    }

    pub fn sample(&self, clock: f64) -> WeatherSample {
        let c = &self.climate;
        let day = self.start_day + clock / 86_400.0;
        let hour = (clock / 3600.0).rem_euclid(24.0);
        let mean = self.daily_mean(day);
        let swing = -self.diurnal_amplitude(day) * (TAU * (hour - c.coldest_hour) / 24.0).cos();
        let t = mean + swing + self.temp_noise.eval(clock);
        let season = self.season(day);
        let base = 0.5 * (c.rh_winter + c.rh_summer) + 0.5 * (c.rh_summer - c.rh_winter) * season;
        let rh = (base - c.rh_temp_slope * swing + self.rh_noise.eval(clock)).clamp(c.rh_min, c.rh_max);
        WeatherSample::new(t, rh, clock)
    }
}

/// Samples the preset climate every `dt` seconds for `duration_days`.
pub fn generate_weather(preset: Preset, seed: u64, duration_days: f64, dt: f64) -> Vec<WeatherSample> {
    let model = WeatherModel::new(ClimateParams::preset(preset), seed, 0.0);
    let n = (duration_days * 86_400.0 / dt).round() as usize;
    (0..n).map(|k| model.sample(k as f64 * dt)).collect()
}
