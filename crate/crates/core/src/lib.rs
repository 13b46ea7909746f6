//! VPD-centric cascade climate control for a simulated cultivation zone.

pub mod control;
pub mod harness;
pub mod nn;
pub mod optimizer;
pub mod pid;
pub mod psychro;
pub mod scalar;
pub mod zone;

pub use harness::Error;
pub use scalar::Real;

/// Double-precision instantiations of the generic numeric types.
pub type PidGains = pid::PidGains<f64>;
pub type PidState = pid::PidState<f64>;
pub type MlpParams = nn::MlpParams<f64>;
pub type TunerConfig = nn::TunerConfig<f64>;
pub type EnergyModelParams = optimizer::EnergyModelParams<f64>;
pub type Setpoints = optimizer::Setpoints<f64>;
pub type PsychroSample = psychro::PsychroSample<f64>;

/// Single-precision variants for memory-constrained targets.
pub mod f32 {
    use super::{nn, optimizer, pid, psychro};

    pub type PidGains = pid::PidGains<f32>;
    pub type PidState = pid::PidState<f32>;
    pub type MlpParams = nn::MlpParams<f32>;
    pub type TunerConfig = nn::TunerConfig<f32>;
    pub type EnergyModelParams = optimizer::EnergyModelParams<f32>;
    pub type Setpoints = optimizer::Setpoints<f32>;
    pub type PsychroSample = psychro::PsychroSample<f32>;
}
