//! Image and disparity containers plus their file formats.

mod colorize;
mod pfm;
mod pnm;
mod types;

pub use colorize::{colorize, colorize_rgb, ramp, RAMP};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use pnm::{
    decode_pgm, encode_pgm, encode_ppm, quantize_u8, read_pgm, write_pgm, write_ppm, RgbImage,
};
pub use types::{DepthLabel, DisparityMap, GrayImage, LabelMap, Mask, StereoPair};
