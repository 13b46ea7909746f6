//! Energy-optimal setpoint selection on the iso-VPD curve.
//!
//! The VPD constraint eliminates RH, leaving a one-dimensional search over
//! the temperature setpoint. The cost is piecewise smooth with kinks where
//! `t_sp = t_out` and where `rh_sp = rh_out`; both are inserted into the
//! coarse grid so golden-section refinement never straddles a kink.

use thiserror::Error;

use crate::psychro::{self, Celsius, KiloPascal, PsychroError, RelHumidityPct};
use crate::scalar::{clamp, Real};
use crate::zone::WeatherSample;

const GRID_STEP: f64 = 0.25;
const GOLDEN_TOL: f64 = 0.005;
const FD_STEP: f64 = 1e-4;
const NEUTRAL_T: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Psychro(#[from] PsychroError),
    #[error("VPD target {target} kPa infeasible on [{t_min}, {t_max}] °C (achievable 0..{max_vpd} kPa)")]
    Infeasible { target: f64, t_min: f64, t_max: f64, max_vpd: f64 },
    #[error("setpoint {t_sp} °C outside [{t_min}, {t_max}] °C")]
    OutOfBounds { t_sp: f64, t_min: f64, t_max: f64 },
    #[error("setpoint {t_sp} °C is at the {bound} bound; marginal balance needs an interior point")]
    BoundActive { t_sp: f64, bound: &'static str },
    #[error("invalid energy model: {0}")]
    InvalidParams(String),
}

/// Clamped quadratic COP(T_out) = c0 + c1·(T − t_ref) + c2·(T − t_ref)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopCurve<R = f64> {
    pub coeffs: [R; 3],
    pub t_ref: R,
    pub min: R,
    pub max: R,
}

impl<R: Real> Default for CopCurve<R> {
    fn default() -> Self {
        Self {
            coeffs: [R::lit(3.5), R::lit(-0.05), R::zero()],
            t_ref: R::lit(20.0),
            min: R::lit(1.5),
            max: R::lit(5.0),
        }
    }
}

impl<R: Real> CopCurve<R> {
    pub fn constant(cop: R) -> Self {
        Self { coeffs: [cop, R::zero(), R::zero()], t_ref: R::zero(), min: cop, max: cop }
    }

    pub fn eval(&self, t_out: R) -> R {
        let d = t_out - self.t_ref;
        clamp(self.coeffs[0] + self.coeffs[1] * d + self.coeffs[2] * d * d, self.min, self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModelParams<R = f64> {
    /// kW/°C
    pub ua: R,
    pub cop_curve: CopCurve<R>,
    pub cop_dehum: R,
    /// kJ/kg
    pub l_v: R,
    /// kg/h of moisture removal per %RH of outdoor excess.
    pub moisture_rate_coeff: R,
    pub t_min: R,
    pub t_max: R,
}

impl<R: Real> Default for EnergyModelParams<R> {
    fn default() -> Self {
        Self {
            ua: R::lit(3.0),
            cop_curve: CopCurve::default(),
            cop_dehum: R::lit(3.0),
            l_v: R::lit(2450.0),
            moisture_rate_coeff: R::lit(0.5),
            t_min: R::lit(18.0),
            t_max: R::lit(30.0),
        }
    }
}

impl<R: Real> EnergyModelParams<R> {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let finite = [self.ua, self.cop_dehum, self.l_v, self.moisture_rate_coeff, self.t_min, self.t_max]
            .iter()
            .chain(self.cop_curve.coeffs.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(OptimizerError::InvalidParams("non-finite coefficient".into()));
        }
        if !(self.t_min < self.t_max) {
            return Err(OptimizerError::InvalidParams("t_min must be below t_max".into()));
        }
        if !(self.cop_curve.min >= R::one() && self.cop_curve.min <= self.cop_curve.max) {
            return Err(OptimizerError::InvalidParams("COP clamp must satisfy 1 <= min <= max".into()));
        }
        if !(self.cop_dehum > R::zero()) {
            return Err(OptimizerError::InvalidParams("cop_dehum must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setpoints<R = f64> {
    pub t_sp: Celsius<R>,
    pub rh_sp: RelHumidityPct<R>,
    pub vpd_target: KiloPascal<R>,
    /// kW
    pub predicted_cost: R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBound {
    None,
    Lower,
    Upper,
}

impl ActiveBound {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActiveBound::None => "none",
            ActiveBound::Lower => "lower",
            ActiveBound::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktDiagnostics<R = f64> {
    /// kW/kPa
    pub lambda: R,
    /// kW/°C; at a kink this is the distance of zero from the one-sided derivative interval.
    pub stationarity_residual: R,
    pub active_bound: ActiveBound,
    pub at_kink: bool,
}

/// Thermal and dehumidification parts of the objective, kW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown<R = f64> {
    pub thermal: R,
    pub dehum: R,
}

impl<R: Real> CostBreakdown<R> {
    pub fn total(&self) -> R {
        self.thermal + self.dehum
    }
}

fn cost_parts<R: Real>(t_sp: R, weather: &WeatherSample<R>, params: &EnergyModelParams<R>, vpd_target: KiloPascal<R>) -> Result<CostBreakdown<R>, OptimizerError> {
    let rh_sp = psychro::iso_vpd_rh(Celsius(t_sp), vpd_target)?.0;
    let cop = params.cop_curve.eval(weather.t_out.0);
    let thermal = params.ua * (t_sp - weather.t_out.0).abs() / cop;
    let excess = (weather.rh_out.0 - rh_sp).max(R::zero());
    let dehum = params.l_v * params.moisture_rate_coeff / R::lit(3600.0) * excess / params.cop_dehum;
    Ok(CostBreakdown { thermal, dehum })
}

/// HVAC power at `t_sp` with RH on the iso-VPD curve.
pub fn energy_cost<R: Real>(t_sp: Celsius<R>, weather: &WeatherSample<R>, params: &EnergyModelParams<R>, vpd_target: KiloPascal<R>) -> Result<R, OptimizerError> {
    energy_breakdown(t_sp, weather, params, vpd_target).map(|c| c.total())
}

pub fn energy_breakdown<R: Real>(t_sp: Celsius<R>, weather: &WeatherSample<R>, params: &EnergyModelParams<R>, vpd_target: KiloPascal<R>) -> Result<CostBreakdown<R>, OptimizerError> {
    if t_sp.0 < params.t_min || t_sp.0 > params.t_max || t_sp.0.is_nan() {
        return Err(OptimizerError::OutOfBounds { t_sp: t_sp.0.as_f64(), t_min: params.t_min.as_f64(), t_max: params.t_max.as_f64() });
    }
    cost_parts(t_sp.0, weather, params, vpd_target)
}

/// Temperature where `e_s(t) = vpd`, i.e. where the iso-VPD RH reaches zero.
fn saturation_temperature<R: Real>(vpd: R) -> R {
    let g = (vpd / R::lit(psychro::MAGNUS_A)).ln();
    R::lit(psychro::MAGNUS_C) * g / (R::lit(psychro::MAGNUS_B) - g)
}

/// Feasible temperature interval for a VPD target.
pub fn feasible_interval<R: Real>(vpd_target: KiloPascal<R>, params: &EnergyModelParams<R>) -> Result<(R, R), OptimizerError> {
    params.validate()?;
    let v = vpd_target.0;
    if !(v >= R::zero()) {
        return Err(PsychroError::NegativeTarget(v.as_f64()).into());
    }
    let es_max = psychro::saturation_vapor_pressure(Celsius(params.t_max))?.0;
    if v > es_max {
        return Err(OptimizerError::Infeasible {
            target: v.as_f64(),
            t_min: params.t_min.as_f64(),
            t_max: params.t_max.as_f64(),
            max_vpd: es_max.as_f64(),
        });
    }
    psychro::saturation_vapor_pressure(Celsius(params.t_min))?;
    let mut lo = params.t_min;
    if v > R::zero() {
        let mut t_f = saturation_temperature(v);
        // Nudge until e_s(t_f) >= v under rounding.
        while psychro::iso_vpd_rh(Celsius(t_f), vpd_target).is_err() {
            t_f = t_f + R::epsilon() * (R::one() + t_f.abs()) * R::lit(4.0);
        }
        lo = lo.max(t_f);
    }
    Ok((lo, params.t_max))
}

// Temperatures where the objective has a kink, inside (lo, hi).
fn kinks<R: Real>(lo: R, hi: R, weather: &WeatherSample<R>, vpd_target: R) -> Vec<R> {
    let mut out = Vec::with_capacity(2);
    let t_out = weather.t_out.0;
    if t_out > lo && t_out < hi {
        out.push(t_out);
    }
    let rh_out = weather.rh_out.0;
    if rh_out > R::zero() && rh_out < R::lit(100.0) && vpd_target > R::zero() {
        let es = vpd_target / (R::one() - rh_out / R::lit(100.0));
        let t_k = saturation_temperature(es);
        if t_k > lo && t_k < hi {
            out.push(t_k);
        }
    }
    out
}

fn golden_section<R: Real, F: Fn(R) -> R>(f: &F, mut a: R, mut b: R, tol: R) -> (R, R) {
    let inv_phi = (R::lit(5.0).sqrt() - R::one()) / R::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Global minimizer of [`energy_cost`] over the feasible interval.
///
/// Coarse 0.25 °C grid (with kinks inserted), then golden-section refinement
/// to 0.005 °C inside the best bracket of every smooth piece. Ties go to the
/// candidate closest to 24 °C.
pub fn optimize_setpoint<R: Real>(
    vpd_target: KiloPascal<R>,
    weather: &WeatherSample<R>,
    params: &EnergyModelParams<R>,
) -> Result<(Setpoints<R>, KktDiagnostics<R>), OptimizerError> {
    let (lo, hi) = feasible_interval(vpd_target, params)?;
    let cost = |t: R| cost_parts(clamp(t, lo, hi), weather, params, vpd_target).map(|c| c.total()).unwrap_or(R::infinity());

    let breaks = kinks(lo, hi, weather, vpd_target.0);
    let mut edges = vec![lo];
    edges.extend(breaks.iter().copied());
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut candidates: Vec<(R, R)> = Vec::new();
    for piece in edges.windows(2) {
        let (a, b) = (piece[0], piece[1]);
        let mut grid = vec![a];
        let step = R::lit(GRID_STEP);
        let mut t = (a / step).floor() * step + step;
        while t < b {
            grid.push(t);
            t = t + step;
        }
        grid.push(b);
        let values: Vec<R> = grid.iter().map(|&t| cost(t)).collect();
        let best = (0..grid.len()).min_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap()).unwrap();
        candidates.extend(grid.iter().copied().zip(values.iter().copied()));
        let left = grid[best.saturating_sub(1)];
        let right = grid[(best + 1).min(grid.len() - 1)];
        if right > left {
            candidates.push(golden_section(&cost, left, right, R::lit(GOLDEN_TOL)));
        }
    }

    let neutral = R::lit(NEUTRAL_T);
    let mut best = candidates[0];
    for &cand in &candidates[1..] {
        let tol = R::lit(1e-12) * best.1.abs().max(R::one());
        if cand.1 < best.1 - tol || ((cand.1 - best.1).abs() <= tol && (cand.0 - neutral).abs() < (best.0 - neutral).abs()) {
            best = cand;
        }
    }
    let (t_sp, j) = best;
    let rh_sp = psychro::iso_vpd_rh(Celsius(t_sp), vpd_target)?;
    let setpoints = Setpoints { t_sp: Celsius(t_sp), rh_sp, vpd_target, predicted_cost: j };
    let diag = kkt_diagnostics(t_sp, lo, hi, weather, params, vpd_target)?;
    Ok((setpoints, diag))
}

/// Along-curve marginal costs at `t_sp`, with the multiplier that balances
/// them against the marginal VPD change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalBalance<R = f64> {
    /// kW/°C; right-sided at a kink.
    pub dj_thermal: R,
    pub dj_dehum: R,
    /// kW/kPa
    pub lambda: R,
    /// Left-sided total derivative, present only when a kink lies within the step.
    pub left_total: Option<R>,
}

impl<R: Real> MarginalBalance<R> {
    pub fn total(&self) -> R {
        self.dj_thermal + self.dj_dehum
    }

    pub fn is_kink(&self) -> bool {
        self.left_total.is_some()
    }
}

fn derivatives<R: Real>(t: R, lo: R, hi: R, weather: &WeatherSample<R>, params: &EnergyModelParams<R>, vpd_target: KiloPascal<R>) -> Result<MarginalBalance<R>, OptimizerError> {
    let h = R::lit(FD_STEP);
    let at = |t: R| cost_parts(t, weather, params, vpd_target);
    let c0 = at(t)?;
    let has_kink = kinks(t - h, t + h, weather, vpd_target.0).into_iter().any(|k| (k - t).abs() < h) || (t - weather.t_out.0).abs() < h;
    let (right, left) = if has_kink || t - h < lo || t + h > hi {
        let r = if t + h <= hi { Some(at(t + h)?) } else { None };
        let l = if t - h >= lo { Some(at(t - h)?) } else { None };
        let right = r.map(|r| ((r.thermal - c0.thermal) / h, (r.dehum - c0.dehum) / h));
        let left = l.map(|l| ((c0.thermal - l.thermal) / h, (c0.dehum - l.dehum) / h));
        (right, left)
    } else {
        let r = at(t + h)?;
        let l = at(t - h)?;
        let two_h = h + h;
        (Some(((r.thermal - l.thermal) / two_h, (r.dehum - l.dehum) / two_h)), None)
    };
    let (dj_t, dj_d) = right.or(left).expect("interval wider than step");
    let rh = psychro::iso_vpd_rh(Celsius(t), vpd_target)?;
    let dvdt = psychro::dvpd_dt(Celsius(t), rh)?;
    let lambda = if dvdt > R::zero() { -dj_t / dvdt } else { R::zero() };
    let left_total = if has_kink { left.map(|(a, b)| a + b) } else { None };
    Ok(MarginalBalance { dj_thermal: dj_t, dj_dehum: dj_d, lambda, left_total })
}

fn kkt_diagnostics<R: Real>(t_sp: R, lo: R, hi: R, weather: &WeatherSample<R>, params: &EnergyModelParams<R>, vpd_target: KiloPascal<R>) -> Result<KktDiagnostics<R>, OptimizerError> {
    let active_bound = if t_sp <= lo {
        ActiveBound::Lower
    } else if t_sp >= hi {
        ActiveBound::Upper
    } else {
        ActiveBound::None
    };
    let m = derivatives(t_sp, lo, hi, weather, params, vpd_target)?;
    let residual = match (active_bound, m.left_total) {
        (ActiveBound::Lower, _) => (-m.total()).max(R::zero()),
        (ActiveBound::Upper, _) => m.total().max(R::zero()),
        (ActiveBound::None, Some(left)) => {
            // Subdifferential [left, right] must contain zero.
            let right = m.total();
            if left <= R::zero() && right >= R::zero() {
                R::zero()
            } else {
                left.abs().min(right.abs())
            }
        }
        (ActiveBound::None, None) => m.total().abs(),
    };
    Ok(KktDiagnostics { lambda: m.lambda, stationarity_residual: residual, active_bound, at_kink: m.left_total.is_some() })
}

/// Finite-difference marginal costs at an interior setpoint.
pub fn marginal_balance<R: Real>(
    t_sp: Celsius<R>,
    weather: &WeatherSample<R>,
    params: &EnergyModelParams<R>,
    vpd_target: KiloPascal<R>,
) -> Result<MarginalBalance<R>, OptimizerError> {
    let (lo, hi) = feasible_interval(vpd_target, params)?;
    let h = R::lit(FD_STEP);
    if t_sp.0 - h < lo {
        return Err(OptimizerError::BoundActive { t_sp: t_sp.0.as_f64(), bound: "lower" });
    }
    if t_sp.0 + h > hi {
        return Err(OptimizerError::BoundActive { t_sp: t_sp.0.as_f64(), bound: "upper" });
    }
    derivatives(t_sp.0, lo, hi, weather, params, vpd_target)
}
