//! Dynamic clip sampling for efficient video classification.
//!
//! A video is split into `M` sections of `N` candidate clips. An observation
//! network scores the clips of each section and a policy picks one clip per
//! section; a clip classifier averages its predictions over the chosen clips.
//! The selection policy is trained with REINFORCE, using the greedy action's
//! reward as baseline, alternating with supervised updates of the classifier.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration and
//! the command-line runner live in the `dsnlab` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;

pub mod classifier;
pub mod eval;
pub mod nn;
pub mod optim;
pub mod params;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use params::Parameters;
pub use rng::Prng;
