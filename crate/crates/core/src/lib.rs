//! Numerical laboratory for skew products `f(x, t) = (σ(x), f_x(t))` over
//! symbolic hyperbolic bases (full shifts and subshifts of finite type) with
//! area-preserving diffeomorphisms of the 2-torus acting on the fibers.
//!
//! The crate is `no_std` (with `alloc`). All transcendental functions go
//! through [`libm`] so results are bit-identical across targets and feature
//! sets; all randomness comes from counter-based ChaCha streams keyed by
//! `(seed, stream_id)`.
//!
//! Layout:
//!
//! - [`shift`]: shift spaces, lazily continued bi-infinite sequences, metric,
//!   bracket, Bernoulli/Markov measures.
//! - [`fiber`]: torus points and the area-preserving fiber maps, including the
//!   localized twist perturbation.
//! - [`skew`]: skew systems, cocycle iteration, C¹ distance and Hölder
//!   certificates.
//! - [`holonomy`]: stable/unstable holonomies (non-linear and linear) and
//!   fiber bunching.
//! - [`lyapunov`]: pointwise and integrated exponents, pinching integral,
//!   Oseledets frames.
//! - [`criterion`]: holonomy loops, pinching/twisting detectors, su-state
//!   probe and perturbation sweeps.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod criterion;
pub mod error;
pub mod fiber;
pub mod holonomy;
pub mod linalg;
pub mod lyapunov;
pub mod rng;
pub mod shift;
pub mod skew;
mod stats;

pub use error::{Error, Result};
pub use fiber::{BumpProfile, FiberMap, LocalizedTwist, TorusPoint};
pub use linalg::Mat2;
pub use shift::{BaseMeasure, BaseSequence, PeriodicPoint, ShiftSpace};
pub use skew::{Family, SkewSystem};
