//! Psychrometric primitives.
//!
//! Saturation vapor pressure uses the Magnus form with Alduchov–Eskridge
//! coefficients. Everything here is a pure function of its inputs and is
//! generic over the scalar type.

use thiserror::Error;

use crate::scalar::Real;

/// Magnus prefactor, kPa.
pub const MAGNUS_A: f64 = 0.6108;
/// Magnus exponent numerator coefficient.
pub const MAGNUS_B: f64 = 17.269;
/// Magnus temperature offset, °C.
pub const MAGNUS_C: f64 = 237.3;
/// Lower edge of the validated temperature range, °C.
pub const T_MIN_VALID: f64 = -40.0;
/// Upper edge of the validated temperature range, °C.
pub const T_MAX_VALID: f64 = 60.0;
/// Standard sea-level pressure, kPa.
pub const P_STANDARD: f64 = 101.325;
/// Ratio of molar masses of water and dry air.
pub const EPSILON_WATER: f64 = 0.622;

/// Air temperature in °C.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Celsius<R = f64>(pub R);

/// Relative humidity in percent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct RelHumidityPct<R = f64>(pub R);

/// Pressure (vapor pressure, deficit or total) in kPa.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct KiloPascal<R = f64>(pub R);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Lower => f.write_str("lower"),
            Bound::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsychroError {
    #[error("temperature {value} °C violates the {bound} bound {limit} °C of the Magnus fit")]
    TemperatureOutOfRange { value: f64, bound: Bound, limit: f64 },
    #[error("relative humidity {value}% outside [0, 100]")]
    HumidityOutOfRange { value: f64 },
    #[error("VPD target {target} kPa infeasible at {t} °C (max achievable {max_vpd} kPa)")]
    InfeasibleTarget { target: f64, t: f64, max_vpd: f64 },
    #[error("VPD target {0} kPa is negative")]
    NegativeTarget(f64),
    #[error("vapor pressure {vapor} kPa not below total pressure {total} kPa")]
    VaporExceedsTotal { vapor: f64, total: f64 },
    #[error("humidity ratio {0} is negative")]
    NegativeHumidityRatio(f64),
    #[error("dew point undefined for zero relative humidity")]
    ZeroHumidity,
}

pub type Result<T> = std::result::Result<T, PsychroError>;

fn check_t<R: Real>(t: Celsius<R>) -> Result<R> {
    let v = t.0;
    if v.is_nan() || v < R::lit(T_MIN_VALID) {
        return Err(PsychroError::TemperatureOutOfRange {
            value: v.as_f64(),
            bound: Bound::Lower,
            limit: T_MIN_VALID,
        });
    }
    if v > R::lit(T_MAX_VALID) {
        return Err(PsychroError::TemperatureOutOfRange {
            value: v.as_f64(),
            bound: Bound::Upper,
            limit: T_MAX_VALID,
        });
    }
    Ok(v)
}

fn check_rh<R: Real>(rh: RelHumidityPct<R>) -> Result<R> {
    let v = rh.0;
    if !(v >= R::zero() && v <= R::lit(100.0)) {
        return Err(PsychroError::HumidityOutOfRange { value: v.as_f64() });
    }
    Ok(v)
}

#[inline]
fn magnus<R: Real>(t: R) -> R {
    R::lit(MAGNUS_A) * (R::lit(MAGNUS_B) * t / (t + R::lit(MAGNUS_C))).exp()
}

/// Saturation vapor pressure over water.
pub fn saturation_vapor_pressure<R: Real>(t: Celsius<R>) -> Result<KiloPascal<R>> {
    let t = check_t(t)?;
    Ok(KiloPascal(magnus(t)))
}

/// Air-side vapor pressure deficit.
pub fn vpd<R: Real>(t: Celsius<R>, rh: RelHumidityPct<R>) -> Result<KiloPascal<R>> {
    let es = saturation_vapor_pressure(t)?.0;
    let rh = check_rh(rh)?;
    Ok(KiloPascal(es * (R::one() - rh / R::lit(100.0))))
}

/// ∂VPD/∂T in kPa/°C.
pub fn dvpd_dt<R: Real>(t: Celsius<R>, rh: RelHumidityPct<R>) -> Result<R> {
    let es = saturation_vapor_pressure(t)?.0;
    let rh = check_rh(rh)?;
    let shifted = t.0 + R::lit(MAGNUS_C);
    Ok(R::lit(MAGNUS_B * MAGNUS_C) / (shifted * shifted) * es * (R::one() - rh / R::lit(100.0)))
}

/// ∂VPD/∂RH in kPa per %RH. Always negative.
pub fn dvpd_drh<R: Real>(t: Celsius<R>) -> Result<R> {
    let es = saturation_vapor_pressure(t)?.0;
    Ok(-es / R::lit(100.0))
}

/// Relative humidity on the iso-VPD curve through `vpd_target` at `t`.
pub fn iso_vpd_rh<R: Real>(t: Celsius<R>, vpd_target: KiloPascal<R>) -> Result<RelHumidityPct<R>> {
    let es = saturation_vapor_pressure(t)?.0;
    let target = vpd_target.0;
    if target.is_nan() || target < R::zero() {
        return Err(PsychroError::NegativeTarget(target.as_f64()));
    }
    if target > es {
        return Err(PsychroError::InfeasibleTarget {
            target: target.as_f64(),
            t: t.0.as_f64(),
            max_vpd: es.as_f64(),
        });
    }
    Ok(RelHumidityPct(R::lit(100.0) * (R::one() - target / es)))
}

/// Humidity ratio, kg water per kg dry air.
pub fn humidity_ratio<R: Real>(t: Celsius<R>, rh: RelHumidityPct<R>, p_total: KiloPascal<R>) -> Result<R> {
    let es = saturation_vapor_pressure(t)?.0;
    let rh = check_rh(rh)?;
    let e = es * rh / R::lit(100.0);
    if e >= p_total.0 {
        return Err(PsychroError::VaporExceedsTotal {
            vapor: e.as_f64(),
            total: p_total.0.as_f64(),
        });
    }
    Ok(R::lit(EPSILON_WATER) * e / (p_total.0 - e))
}

/// Relative humidity recovered from a humidity ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumidityReading<R = f64> {
    pub rh: RelHumidityPct<R>,
    /// Set when the implied RH exceeded 100% and was clamped.
    pub supersaturated: bool,
}

/// Inverse of [`humidity_ratio`]. Implied RH above 100% is clamped and flagged.
pub fn rh_from_humidity_ratio<R: Real>(t: Celsius<R>, w: R, p_total: KiloPascal<R>) -> Result<HumidityReading<R>> {
    let es = saturation_vapor_pressure(t)?.0;
    if w.is_nan() || w < R::zero() {
        return Err(PsychroError::NegativeHumidityRatio(w.as_f64()));
    }
    let e = w * p_total.0 / (R::lit(EPSILON_WATER) + w);
    let rh = R::lit(100.0) * e / es;
    if rh > R::lit(100.0) {
        Ok(HumidityReading { rh: RelHumidityPct(R::lit(100.0)), supersaturated: true })
    } else {
        Ok(HumidityReading { rh: RelHumidityPct(rh), supersaturated: false })
    }
}

/// Dew point by closed-form inversion of the Magnus equation.
pub fn dew_point<R: Real>(t: Celsius<R>, rh: RelHumidityPct<R>) -> Result<Celsius<R>> {
    let rh_v = check_rh(rh)?;
    if rh_v <= R::zero() {
        return Err(PsychroError::ZeroHumidity);
    }
    if rh_v == R::lit(100.0) {
        check_t(t)?;
        return Ok(t);
    }
    let es = saturation_vapor_pressure(t)?.0;
    let e = es * rh_v / R::lit(100.0);
    let gamma = (e / R::lit(MAGNUS_A)).ln();
    Ok(Celsius(R::lit(MAGNUS_C) * gamma / (R::lit(MAGNUS_B) - gamma)))
}

/// A (T, RH) pair with its derived VPD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsychroSample<R = f64> {
    pub t: Celsius<R>,
    pub rh: RelHumidityPct<R>,
    pub vpd: KiloPascal<R>,
}

impl<R: Real> PsychroSample<R> {
    pub fn new(t: Celsius<R>, rh: RelHumidityPct<R>) -> Result<Self> {
        let vpd = vpd(t, rh)?;
        Ok(Self { t, rh, vpd })
    }
}
