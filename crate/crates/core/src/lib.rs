//! Runtime for block-partitioned numerical computation on simulated
//! heterogeneous hardware: polymorphic record layout, partitioned tensors
//! with halo exchange, layout-agnostic cursors, a dependency task graph, and
//! a dual-domain work-stealing executor, plus reference solver kernels.

pub mod arena;
pub mod error;
pub mod graph;
pub mod iter;
pub mod kernels;
pub mod layout;
pub mod sched;
pub mod tensor;

pub use error::{Error, Result};
