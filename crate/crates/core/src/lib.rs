//! Linear spectroscopy of a single cavity mode coupled to an inhomogeneously
//! broadened spin ensemble.
//!
//! A system is a [`model::CavitySpec`] plus a [`model::CouplingDensity`], which
//! is either a discrete ensemble or a continuous line shape. [`levelshift`]
//! evaluates the ensemble's level shift on and off the real axis. From there:
//!
//! - [`spectral`]: eigenmodes of finite ensembles
//! - [`response`]: propagators, spectra and time traces
//! - [`poles`]: complex poles, regime classification and asymptotics
//! - [`inversion`]: recovery of the level shift and density from measured spectra
//!
//! Frequencies and rates share one arbitrary unit. The cavity enters as
//! `ω_c − iκ` and spin `j` as `ω_j − iγ_j/2`.

pub mod error;
pub mod inversion;
pub mod io;
pub mod levelshift;
pub mod model;
pub mod poles;
pub mod response;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
