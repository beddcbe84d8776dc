//! Behavioral simulation of zero-forcing precoding on RRAM crossbars.
//!
//! The two-step pipeline solves `Z y = s` with a closed-loop inversion
//! circuit (`Z = H Hᴴ`), holds `y`, and multiplies by `Hᴴ` in an open-loop
//! crossbar. Everything complex is carried as the real block expansion.
//!
//! Precoding schemes are trait objects looked up by name in a
//! [`PrecoderRegistry`]; `digital`, `amc` and `neumann` are registered by
//! default.

pub mod channel;
pub mod circuits;
pub mod config;
pub mod costmodel;
pub mod crossbar;
pub mod error;
pub mod linksim;
pub mod modem;
pub mod numerics;
pub mod precoder;
pub mod rng;

pub use circuits::{OAModel, SolverConfig};
pub use config::SimConfig;
pub use crossbar::{CrossbarProgram, DeviceModel};
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, ExpandedReal, RealMatrix};
pub use precoder::{
    AmcMode, AmcSettings, PrecodeResult, Precoder, PrecoderRegistry, PrecoderSettings, PreparedPrecoder,
};
