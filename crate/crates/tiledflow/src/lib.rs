//! Design-space exploration for tiled dataflow FPGA accelerators.
//!
//! The pipeline: parse a restricted affine kernel, analyze its dependences,
//! build the fused dataflow task graph, search the joint space of tiling,
//! padding, loop order, bitwidth, buffering, transfer levels and SLR
//! assignment under resource constraints with an analytical latency model,
//! validate the model against a discrete-event simulator, and emit HLS-style
//! accelerator source plus a solver-ready model export.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability (analysis, space enumeration, search, simulation, code
//! generation, model export, regeneration).

pub mod costmodel;
pub mod dependence;
pub mod designspace;
pub mod simulator;
pub mod solver;
pub mod taskgraph;
pub mod error;
pub mod frontend;
pub mod ir;

pub use frontend::{parse_kernel, print_kernel, KernelFormat};
