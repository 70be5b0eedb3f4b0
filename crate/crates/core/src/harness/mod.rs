//! Experiment orchestration: calibration, training, evaluations and outputs.

pub mod calibrate;
pub mod config;
pub mod eval;
pub mod output;
pub mod parity;
pub mod report;
pub mod run;
pub mod stats;

pub use calibrate::{calibrate, CalibrationReport};
pub use config::{CalibrationConfig, EvalConfig, ExperimentConfig};
pub use eval::{reseed_steps, run_carrier_eval, run_seed_shift_eval};
pub use parity::run_quantization_parity;
pub use run::{plot_metrics, require_calibration, run_ablation, run_training};
