use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vpd_cascade::control::ControllerKind;
use vpd_cascade::harness::{self, MetricsReport, Scenario};
use vpd_cascade::optimizer::{self, OptimizerError};
use vpd_cascade::psychro::{self, Celsius, KiloPascal, RelHumidityPct};
use vpd_cascade::zone::WeatherSample;
use vpd_cascade::EnergyModelParams;

#[derive(Parser)]
#[command(name = "vpdctl", version, about = "VPD cascade climate control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Run several controller kinds on identical weather and disturbances.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "independent_pid,independent_pid_monitoring,cascade_fixed,cascade_nn")]
        kinds: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Number of consecutive weather seeds starting at the configured one.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Energy-optimal setpoint for one weather sample.
    Optimize {
        #[arg(long, allow_hyphen_values = true)]
        t_out: f64,
        #[arg(long)]
        rh_out: f64,
        #[arg(long)]
        vpd_target: f64,
        /// Scenario config whose zone, cop and energy keys define the model.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Psychrometric quantities at one state.
    Psychro {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long)]
        rh: f64,
    },
    /// Run the scenario once per value of one config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }
}

impl From<harness::Error> for Failure {
    fn from(e: harness::Error) -> Self {
        Self { code: e.exit_code() as u8, msg: e.to_string() }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    Scenario::parse(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn metrics_table(m: &MetricsReport) -> String {
    format!("{}\n{}\n", MetricsReport::CSV_HEADER, m.to_csv_fields())
}

fn optimizer_failure(e: OptimizerError) -> Failure {
    match e {
        OptimizerError::Infeasible { .. } => Failure { code: 4, msg: e.to_string() },
        other => Failure::config(other.to_string()),
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { config, out, metrics } => {
            let s = load(&config)?;
            let run = harness::run(&s)?;
            write(&out, &run.trace_csv())?;
            if let Some(p) = metrics {
                write(&p, &metrics_table(&run.metrics))?;
            }
            print!("{}", metrics_table(&run.metrics));
        }
        Command::Compare { config, kinds, out, seeds } => {
            let s = load(&config)?;
            let kinds: Vec<ControllerKind> = kinds.iter().map(|k| k.parse().map_err(|e: vpd_cascade::control::ControlError| Failure::config(e.to_string()))).collect::<Result<_, _>>()?;
            if seeds == 0 {
                return Err(Failure::config("--seeds must be at least 1"));
            }
            let seed_list: Vec<u64> = (0..seeds).map(|i| s.weather_seed + i).collect();
            let rows = harness::compare(&s, &kinds, &seed_list)?;
            write(&out, &harness::comparison_csv(&rows))?;
        }
        Command::Optimize { t_out, rh_out, vpd_target, params } => {
            let energy: EnergyModelParams = match params {
                Some(p) => load(&p)?.energy_params(),
                None => EnergyModelParams::default(),
            };
            let weather = WeatherSample::new(t_out, rh_out, 0.0);
            let (sp, kkt) = optimizer::optimize_setpoint(KiloPascal(vpd_target), &weather, &energy).map_err(optimizer_failure)?;
            println!("{},{},{},{},{}", sp.t_sp.0, sp.rh_sp.0, sp.predicted_cost, kkt.lambda, kkt.active_bound.as_str());
        }
        Command::Psychro { t, rh } => {
            let bad = |e: psychro::PsychroError| Failure::config(e.to_string());
            let (tc, r) = (Celsius(t), RelHumidityPct(rh));
            let es = psychro::saturation_vapor_pressure(tc).map_err(bad)?.0;
            let v = psychro::vpd(tc, r).map_err(bad)?.0;
            let dt = psychro::dvpd_dt(tc, r).map_err(bad)?;
            let drh = psychro::dvpd_drh(tc).map_err(bad)?;
            let dew = match psychro::dew_point(tc, r) {
                Ok(d) => d.0.to_string(),
                Err(psychro::PsychroError::ZeroHumidity) => "NaN".to_string(),
                Err(e) => return Err(bad(e)),
            };
            println!("{t},{rh},{es},{v},{dt},{drh},{dew}");
        }
        Command::Sweep { config, param, values } => {
            let s = load(&config)?;
            if values.is_empty() {
                return Err(Failure::config("--values needs at least one value"));
            }
            let rows = harness::sweep(&s, &param, &values)?;
            println!("{},{}", param, MetricsReport::CSV_HEADER);
            for (v, m) in rows {
                println!("{},{}", v, m.to_csv_fields());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
