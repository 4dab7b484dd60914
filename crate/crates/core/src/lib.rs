//! Grouping process model: joint actor-action labeling of video segments,
//! refined by a supervoxel hierarchy through alternating labeling and
//! tree-slice inference.

pub mod energy;
pub mod error;
pub mod gpm;
pub mod hierarchy;
pub mod instance;
pub mod label_solver;
pub mod slice_solver;
pub mod synth;

pub use error::{GpmError, Result};
