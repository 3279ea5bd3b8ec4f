//! Design-space exploration and bit-exact simulation for mixed-precision
//! CNN accelerators on FPGA-like resource budgets.
//!
//! The crate is organised along the exploration flow:
//!
//! * [`workload`] describes CONV-layer workloads and generates ResNets.
//! * [`quant`] holds the inference quantizer and footprint accounting.
//! * [`pe`] simulates precision-scalable processing elements bit by bit and
//!   models their cost.
//! * [`dataflow`] maps layers onto an `H x W x D` PE array.
//! * [`dse`] ranks PEs, searches array shapes and evaluates designs.
//!
//! ```
//! use mpdse::dataflow::ArrayDims;
//! use mpdse::workload::{resnet, ResNetVariant};
//!
//! let net = resnet(ResNetVariant::ResNet18, 2).unwrap();
//! assert_eq!(net.layers.len(), 20);
//! assert_eq!(ArrayDims::new(7, 5, 37).unwrap().n_pe(), 1295);
//! ```

pub mod calib;
pub mod dataflow;
pub mod dse;
pub mod error;
pub mod exec;
pub mod pe;
pub mod quant;
pub mod workload;

pub use calib::Calibration;
pub use dataflow::{ArrayDims, LayerMapping};
pub use dse::{DesignPoint, DesignReport, HardwareConstraints};
pub use error::{Error, Result};
pub use exec::Exec;
pub use pe::{PEConfig, PEStyle};
pub use workload::{ConvLayerSpec, NetworkSpec};

/// Version string embedded in emitted reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
