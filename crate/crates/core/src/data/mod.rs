//! Domain types and on-disk formats: class labels, hyperspectral cubes,
//! label maps, and flattened pixel datasets.

mod cube;
mod dataset;
mod label;
mod mask;

pub use cube::{read_cube, write_cube, CubeData, CubeState, HyperCube, BANDS, COLS, RAW_MAX};
pub use dataset::{flatten_rebalanced, flatten_to_pixels, rebalance_background, PixelDataset, Provenance};
pub use label::{ClassLabel, NUM_CLASSES};
pub use mask::{read_mask, read_mask_for, write_mask, ClassMap, GroundTruthMask, LabelMap};

pub(crate) fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}
