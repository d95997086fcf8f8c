//! Lightweight perceptual image enhancement toolkit.
//!
//! A compact U-Net-style enhancement network built from inverted-residual
//! attention blocks, together with everything needed to exercise it end to
//! end on a CPU: a from-scratch differentiable tensor core with gradient
//! checking, a camera degradation simulator (PSF blur, shot/read noise,
//! range clipping, tone mapping), the training recipe (Adam, plateau
//! schedule, paired augmentation, progressive patch sizes), image fidelity
//! metrics, and an analytic parameter/MACs/FLOPs profiler with a wall-clock
//! benchmark harness.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod context;
pub mod degrade;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod objectives;
pub mod ops;
pub mod profiler;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use model::{LpienetConfig, Model};
pub use tensor::{Element, Shape, Tensor};
