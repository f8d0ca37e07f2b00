//! Indexed PNG export of class maps with the fixed class palette.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use p1ch::data::{ClassLabel, ClassMap};

pub fn write_png(map: &ClassMap, path: &Path) -> std::io::Result<()> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, map.cols() as u32, map.rows() as u32);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(ClassLabel::ALL.iter().flat_map(|c| c.rgb()).collect::<Vec<u8>>());
    let mut w = enc.write_header().map_err(std::io::Error::other)?;
    w.write_image_data(&map.codes()).map_err(std::io::Error::other)?;
    w.finish().map_err(std::io::Error::other)
}
