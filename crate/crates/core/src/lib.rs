//! Low-light scene text detection machinery without the training stack.
//!
//! - [`grid`]: dense arrays and the numeric kernels the network code uses.
//! - [`dsc`] and [`dsf`]: snake convolution and the top-down fusion pyramid
//!   with gated self-attention, forward only.
//! - [`scm`] and [`losses`]: the spatial constraint branch and every training
//!   loss head, with analytic gradients.
//! - [`geom`] and [`tsr`]: rotated rectangles, rasterization, polygon IoU and
//!   the bottom-up shaping pipeline that turns head maps into polygons.
//! - [`eval`]: one-to-one polygon matching and precision/recall/F1.
//! - [`dataio`]: annotation files, the `TMAP` tensor format, PGM/PPM and the
//!   synthetic map generator.

pub mod dataio;
pub mod dsc;
pub mod dsf;
pub mod error;
pub mod eval;
pub mod geom;
pub mod grid;
pub mod losses;
pub mod maps;
pub mod scm;
pub mod tsr;

pub use error::{Error, Result};
pub use eval::{EvalReport, ImageCounts};
pub use geom::{Point, RotatedRect, TextPolygon};
pub use grid::Grid;
pub use maps::GeometryMaps;
pub use tsr::ShapingConfig;
