//! Stationary noise model for narrowband power-line communication (9-500 kHz).
//!
//! The noise PSD is a power-law colored background plus Gaussian-shaped
//! narrowband interferers, added in dB. The crate covers both directions:
//!
//! * forward: [`model`] evaluation and presets, [`stochastic`] scenario
//!   sampling, [`synthesis`] of time-domain waveforms;
//! * inverse: [`estimation`] of PSDs, background and interferer fits,
//!   distribution fits and campaign characterization.
//!
//! ```
//! use nbplc_core::model::{eval_background, preset};
//!
//! let worst = preset("worst").unwrap();
//! let level = eval_background(&worst, 1.0e6).unwrap();
//! assert!((level - -79.66).abs() < 1e-12);
//! ```

pub mod error;
pub mod estimation;
pub mod exec;
pub mod io;
pub mod model;
pub mod special;
pub mod stochastic;
pub mod synthesis;
pub mod trace;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{BackgroundParams, Band, Interferer, Preset, StationaryModel};
pub use stochastic::{ParameterPriors, RngState};
pub use synthesis::{UnitContext, Waveform};
pub use trace::PsdTrace;
