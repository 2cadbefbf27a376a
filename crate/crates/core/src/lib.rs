//! Core algorithms for sampling simple conformal loop ensembles via the
//! Brownian loop soup and for measuring approximate chemical distances on
//! the resulting carpets.
//!
//! The crate is `no_std` compatible (with `alloc`); all floating-point
//! transcendentals go through [`libm`] so results are bit-identical across
//! platforms. IO, file formats, and the command line live in the companion
//! `chemdist-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod carpet;
pub mod geom;
pub mod levy;
pub mod manifest;
pub mod raster;
pub mod rng;
pub mod soup;
pub mod stats;
