//! Pilot reuse scheduling and robust downlink beamforming for a
//! heterogeneous cloud radio access network (H-CRAN).
//!
//! The pipeline has two stages:
//!
//! 1. **Pilot scheduling** ([`pilot`]): RUEs served by a common RRH need
//!    orthogonal pilots; everything else may share. The PSA picks an
//!    assignment with small total channel-estimation MSE.
//! 2. **Robust transmission design** ([`beamforming`]): given the MMSE
//!    channel estimates ([`channel`]) and only statistics for links outside
//!    each UE's cluster, the RTD loop maximizes a lower bound on the sum
//!    spectral efficiency ([`rates`]) by alternating a QCQP beamformer update
//!    with closed-form equalizer and weight updates.
//!
//! [`scenario`] generates layouts and [`experiments`] runs seeded sweeps.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod pilot;
pub mod random;
pub mod rates;
pub mod scenario;

pub use error::{Error, Result};

// The guide's and the README's code blocks run as doctests.
#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/layouts.md")]
    mod layouts {}
    #[doc = include_str!("../../../book/src/pilots.md")]
    mod pilots {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/beamforming.md")]
    mod beamforming {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
