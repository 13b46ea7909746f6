//! Run metrics, computed only from trace rows and the disturbance schedule.

use thiserror::Error;

use super::trace::TraceRow;
use crate::zone::DisturbanceEvent;

/// Recovery band around the target, kPa.
pub const RECOVERY_BAND: f64 = 0.05;
/// Time the error must stay inside the band to count as recovered, s.
pub const RECOVERY_SUSTAIN: f64 = 600.0;
/// Degree-day base temperature, °C.
pub const DEGREE_DAY_BASE: f64 = 18.3;
/// Longest window examined after a target step, s.
pub const OVERSHOOT_WINDOW: f64 = 3.0 * 3600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("event at {start} s lies outside the trace [{first}, {last}] s")]
    EventOutsideTrace { start: f64, first: f64, last: f64 },
    #[error("setpoint step has zero size")]
    ZeroStep,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("trace columns have different lengths")]
    LengthMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Mean over 24 h windows of the standard deviation of the VPD error, kPa.
    pub sigma_vpd: f64,
    /// Integral of |VPD error|, kPa·h.
    pub iae: f64,
    /// Mean recovery time after door events, minutes. Events that never
    /// recover count with the time to the end of their horizon.
    pub recovery_min: f64,
    pub recovery_events: usize,
    pub unrecovered_events: usize,
    /// Mean overshoot over target steps, %.
    pub overshoot_pct: f64,
    pub energy_kwh: f64,
    /// Energy per floor area per day.
    pub energy_kwh_m2_day_raw: f64,
    /// `energy_kwh_m2_day_raw` divided by degree-days per day (floored at 1).
    pub energy_kwh_m2_day: f64,
    pub degree_days_per_day: f64,
    /// Percent of ticks with any conflict flag.
    pub conflict_duty: f64,
    pub reheat_duty: f64,
    pub alert_count: u64,
    pub max_abs_error: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "sigma_vpd,iae,recovery_min,recovery_events,unrecovered_events,overshoot_pct,energy_kwh,energy_kwh_m2_day_raw,energy_kwh_m2_day,degree_days_per_day,conflict_duty,reheat_duty,alert_count,max_abs_error";

    pub fn to_csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.sigma_vpd,
            self.iae,
            self.recovery_min,
            self.recovery_events,
            self.unrecovered_events,
            self.overshoot_pct,
            self.energy_kwh,
            self.energy_kwh_m2_day_raw,
            self.energy_kwh_m2_day,
            self.degree_days_per_day,
            self.conflict_duty,
            self.reheat_duty,
            self.alert_count,
            self.max_abs_error
        )
    }
}

fn check(clock: &[f64], other: &[f64]) -> Result<(), MetricsError> {
    if clock.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    if clock.len() != other.len() {
        return Err(MetricsError::LengthMismatch);
    }
    Ok(())
}

/// Population standard deviation of `error` per 24 h window, averaged over
/// windows. A trace shorter than a day forms one window; a trailing partial
/// window is dropped otherwise.
pub fn sigma_vpd(clock: &[f64], error: &[f64]) -> Result<f64, MetricsError> {
    check(clock, error)?;
    let t0 = clock[0];
    let span = clock[clock.len() - 1] - t0;
    let full_days = (span / 86_400.0).floor() as usize;
    let windows = full_days.max(1);
    let mut sums = vec![(0.0, 0.0, 0usize); windows];
    for (&t, &e) in clock.iter().zip(error) {
        let w = (((t - t0) / 86_400.0).floor() as usize).min(windows - 1);
        if full_days > 0 && (t - t0) >= (full_days as f64) * 86_400.0 {
            continue;
        }
        let s = &mut sums[w];
        s.0 += e;
        s.1 += e * e;
        s.2 += 1;
    }
    let stds: Vec<f64> = sums
        .iter()
        .filter(|s| s.2 > 0)
        .map(|&(s, ss, n)| {
            let n = n as f64;
            let mean = s / n;
            (ss / n - mean * mean).max(0.0).sqrt()
        })
        .collect();
    Ok(stds.iter().sum::<f64>() / stds.len() as f64)
}

/// Trapezoidal integral of |error|, kPa·h.
pub fn iae(clock: &[f64], error: &[f64]) -> Result<f64, MetricsError> {
    check(clock, error)?;
    let mut total = 0.0;
    for i in 1..clock.len() {
        total += 0.5 * (error[i].abs() + error[i - 1].abs()) * (clock[i] - clock[i - 1]);
    }
    Ok(total / 3600.0)
}

/// Minutes from the end of `event` until |error| ≤ 0.05 kPa holds for ten
/// consecutive minutes, searching up to `horizon`. `None` if it never does.
pub fn recovery_time(clock: &[f64], error: &[f64], event: &DisturbanceEvent, horizon: f64) -> Result<Option<f64>, MetricsError> {
    check(clock, error)?;
    let (first, last) = (clock[0], clock[clock.len() - 1]);
    if event.start < first || event.end() > last {
        return Err(MetricsError::EventOutsideTrace { start: event.start, first, last });
    }
    let end = event.end();
    let horizon = horizon.min(last);
    let start_idx = clock.partition_point(|&t| t < end);
    let mut entered: Option<f64> = None;
    for i in start_idx..clock.len() {
        let t = clock[i];
        if t > horizon {
            break;
        }
        if error[i].abs() <= RECOVERY_BAND {
            let since = *entered.get_or_insert(t);
            if t - since >= RECOVERY_SUSTAIN {
                return Ok(Some((since - end) / 60.0));
            }
        } else {
            entered = None;
        }
    }
    Ok(None)
}

/// Percent overshoot beyond `new` after a step from `old`, over the samples
/// in `[step_time, window_end)`.
pub fn overshoot_pct(clock: &[f64], vpd: &[f64], step_time: f64, old: f64, new: f64, window_end: f64) -> Result<f64, MetricsError> {
    check(clock, vpd)?;
    let size = new - old;
    if size == 0.0 {
        return Err(MetricsError::ZeroStep);
    }
    let sign = size.signum();
    let lo = clock.partition_point(|&t| t < step_time);
    let hi = clock.partition_point(|&t| t < window_end);
    let excursion = vpd[lo..hi.max(lo)].iter().map(|&v| (v - new) * sign).fold(0.0, f64::max);
    Ok(100.0 * excursion / size.abs())
}

/// Mean of daily |mean outdoor temperature − 18.3 °C|, i.e. heating plus
/// cooling degree-days per day.
pub fn degree_days_per_day(clock: &[f64], t_out: &[f64]) -> Result<f64, MetricsError> {
    check(clock, t_out)?;
    let t0 = clock[0];
    let mut days: Vec<(f64, usize)> = Vec::new();
    for (&t, &temp) in clock.iter().zip(t_out) {
        let d = ((t - t0) / 86_400.0).floor() as usize;
        if days.len() <= d {
            days.resize(d + 1, (0.0, 0));
        }
        days[d].0 += temp;
        days[d].1 += 1;
    }
    let dd: Vec<f64> = days.iter().filter(|d| d.1 > 0).map(|&(s, n)| (s / n as f64 - DEGREE_DAY_BASE).abs()).collect();
    Ok(dd.iter().sum::<f64>() / dd.len() as f64)
}

/// Everything the metric suite needs besides the trace itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsContext {
    pub events: Vec<DisturbanceEvent>,
    pub floor_area: f64,
    /// Rows before this clock are excluded as start-up transient.
    pub skip_until: f64,
}

/// Full metric suite over a trace.
pub fn compute(rows: &[TraceRow], ctx: &MetricsContext) -> Result<MetricsReport, MetricsError> {
    if rows.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let skip = rows.partition_point(|r| r.clock < ctx.skip_until).min(rows.len() - 1);
    let body = &rows[skip..];
    let clock: Vec<f64> = body.iter().map(|r| r.clock).collect();
    let error: Vec<f64> = body.iter().map(TraceRow::error).collect();
    let vpd: Vec<f64> = body.iter().map(|r| r.vpd).collect();
    let t_out: Vec<f64> = body.iter().map(|r| r.t_out).collect();
    let (first, last) = (clock[0], clock[clock.len() - 1]);

    let mut steps = Vec::new();
    for i in 1..body.len() {
        if body[i].vpd_target != body[i - 1].vpd_target {
            steps.push((body[i].clock, body[i - 1].vpd_target, body[i].vpd_target));
        }
    }

    let events: Vec<&DisturbanceEvent> = ctx.events.iter().filter(|e| e.start >= first && e.end() <= last).collect();
    let next_boundary = |after: f64| -> f64 {
        let next_event = ctx.events.iter().map(|e| e.start).filter(|&s| s > after).fold(f64::INFINITY, f64::min);
        let next_step = steps.iter().map(|s| s.0).filter(|&s| s > after).fold(f64::INFINITY, f64::min);
        next_event.min(next_step).min(last)
    };

    let mut rec_total = 0.0;
    let mut unrecovered = 0;
    for e in &events {
        let horizon = next_boundary(e.end());
        match recovery_time(&clock, &error, e, horizon)? {
            Some(m) => rec_total += m,
            None => {
                unrecovered += 1;
                rec_total += (horizon - e.end()) / 60.0;
            }
        }
    }
    let recovery_min = if events.is_empty() { 0.0 } else { rec_total / events.len() as f64 };

    let mut overshoots = Vec::with_capacity(steps.len());
    for &(t, old, new) in &steps {
        let window_end = next_boundary(t).min(t + OVERSHOOT_WINDOW);
        overshoots.push(overshoot_pct(&clock, &vpd, t, old, new, window_end)?);
    }
    let overshoot = if overshoots.is_empty() { 0.0 } else { overshoots.iter().sum::<f64>() / overshoots.len() as f64 };

    let energy_kwh = body[body.len() - 1].energy_kwh_cum - if skip > 0 { rows[skip - 1].energy_kwh_cum } else { 0.0 };
    let days = ((last - first) / 86_400.0).max(1.0 / 24.0);
    let raw = energy_kwh / ctx.floor_area / days;
    let dd = degree_days_per_day(&clock, &t_out)?;

    let n = body.len() as f64;
    let conflict = body.iter().filter(|r| r.conflict_flags != 0).count() as f64;
    let reheat = body.iter().filter(|r| r.conflict_flags & 4 != 0).count() as f64;
    let mut alerts = 0;
    for i in 0..body.len() {
        let was = if i == 0 { skip > 0 && rows[skip - 1].alert } else { body[i - 1].alert };
        if body[i].alert && !was {
            alerts += 1;
        }
    }

    Ok(MetricsReport {
        sigma_vpd: sigma_vpd(&clock, &error)?,
        iae: iae(&clock, &error)?,
        recovery_min,
        recovery_events: events.len(),
        unrecovered_events: unrecovered,
        overshoot_pct: overshoot,
        energy_kwh,
        energy_kwh_m2_day_raw: raw,
        energy_kwh_m2_day: raw / dd.max(1.0),
        degree_days_per_day: dd,
        conflict_duty: 100.0 * conflict / n,
        reheat_duty: 100.0 * reheat / n,
        alert_count: alerts,
        max_abs_error: error.iter().fold(0.0, |m, e| m.max(e.abs())),
    })
}
