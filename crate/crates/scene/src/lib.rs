//! Synthetic corner scenes.
//!
//! Two flat walls meet at a vertical seam in front of the sensor. Every pixel
//! ray is traced to its wall, paired with the nearest point on the opposite
//! wall as the interreflection partner, and turned into a two-path scene that
//! the sensor model measures at each modulation frequency.

mod error;
mod geometry;
mod maps;
mod render;

pub use error::{Result, SceneError};
pub use geometry::{trace_corner, CornerScene, PixelHit, SceneGrid, Wall};
pub use maps::{error_map, read_pfm, write_csv_grid, write_pfm, write_pgm_mask, DepthMap};
pub use render::{
    correct_map, render_maps, seam_concentration, DepthCorrector, RenderedMaps, SeamStats,
};
