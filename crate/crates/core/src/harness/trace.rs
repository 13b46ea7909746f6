//! Per-tick trace rows and their CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};

pub const COLUMNS: [&str; 22] = [
    "clock_s",
    "t_out",
    "rh_out",
    "t_in",
    "rh_in",
    "vpd",
    "vpd_target",
    "t_sp",
    "rh_sp",
    "heat",
    "cool",
    "dehum",
    "hum",
    "kp_t",
    "ki_t",
    "kd_t",
    "kp_h",
    "ki_h",
    "kd_h",
    "energy_kwh_cum",
    "conflict_flags",
    "alert",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub clock: f64,
    pub t_out: f64,
    pub rh_out: f64,
    pub t_in: f64,
    pub rh_in: f64,
    pub vpd: f64,
    pub vpd_target: f64,
    pub t_sp: f64,
    pub rh_sp: f64,
    pub heat: f64,
    pub cool: f64,
    pub dehum: f64,
    pub hum: f64,
    pub gains_t: [f64; 3],
    pub gains_h: [f64; 3],
    pub energy_kwh_cum: f64,
    pub conflict_flags: u8,
    pub alert: bool,
}

impl TraceRow {
    pub fn error(&self) -> f64 {
        self.vpd_target - self.vpd
    }

    fn floats(&self) -> [f64; 20] {
        [
            self.clock,
            self.t_out,
            self.rh_out,
            self.t_in,
            self.rh_in,
            self.vpd,
            self.vpd_target,
            self.t_sp,
            self.rh_sp,
            self.heat,
            self.cool,
            self.dehum,
            self.hum,
            self.gains_t[0],
            self.gains_t[1],
            self.gains_t[2],
            self.gains_h[0],
            self.gains_h[1],
            self.gains_h[2],
            self.energy_kwh_cum,
        ]
    }

    /// One CSV line without the newline. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv_line(&self) -> String {
        let mut s = String::with_capacity(256);
        for v in self.floats() {
            let _ = write!(s, "{v},");
        }
        let _ = write!(s, "{},{}", self.conflict_flags, self.alert as u8);
        s
    }

    pub fn from_csv_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", COLUMNS.len(), fields.len()));
        }
        let mut f = [0.0; 20];
        for (i, slot) in f.iter_mut().enumerate() {
            *slot = fields[i].parse().map_err(|_| format!("column {}: bad number '{}'", COLUMNS[i], fields[i]))?;
        }
        let conflict_flags = fields[20].parse().map_err(|_| format!("bad conflict_flags '{}'", fields[20]))?;
        let alert = match fields[21] {
            "0" => false,
            "1" => true,
            other => return Err(format!("bad alert flag '{other}'")),
        };
        Ok(Self {
            clock: f[0],
            t_out: f[1],
            rh_out: f[2],
            t_in: f[3],
            rh_in: f[4],
            vpd: f[5],
            vpd_target: f[6],
            t_sp: f[7],
            rh_sp: f[8],
            heat: f[9],
            cool: f[10],
            dehum: f[11],
            hum: f[12],
            gains_t: [f[13], f[14], f[15]],
            gains_h: [f[16], f[17], f[18]],
            energy_kwh_cum: f[19],
            conflict_flags,
            alert,
        })
    }
}

pub fn header() -> String {
    COLUMNS.join(",")
}

pub fn write_csv<W: Write>(rows: &[TraceRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{}", header())?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_line())?;
    }
    out.flush()
}

pub fn to_csv_string(rows: &[TraceRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header() => {}
        _ => return Err("missing or unexpected trace header".into()),
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| TraceRow::from_csv_line(l).map_err(|e| format!("line {}: {e}", i + 2)))
        .collect()
}
