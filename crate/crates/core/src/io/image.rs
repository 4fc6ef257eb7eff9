use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::create_parent;
use crate::error::{Error, Result};
use crate::rgbd::{ColorImage, DepthImage, Image, LabelMask};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn decode(path: &Path) -> Result<Decoded> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(f));
    // palettes and sub-byte depths expand to 8 bits; 16 bits stay 16 bits
    dec.set_transformations(Transformations::EXPAND);
    let bad = |e: png::DecodingError| Error::format(path, format!("invalid PNG: {e}"));
    let mut reader = dec.read_info().map_err(bad)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "PNG too large"))?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(bad)?;
    data.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        data,
    })
}

fn encode(path: &Path, width: usize, height: usize, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<()> {
    create_parent(path)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(f), width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let fail = |e: png::EncodingError| Error::format(path, format!("PNG encoding failed: {e}"));
    let mut w = enc.write_header().map_err(fail)?;
    w.write_image_data(data).map_err(fail)?;
    w.finish().map_err(fail)
}

/// 16-bit single-channel PNG.
pub fn read_depth_png(path: &Path) -> Result<DepthImage> {
    let d = decode(path)?;
    if d.color != ColorType::Grayscale || d.depth != BitDepth::Sixteen {
        return Err(Error::format(
            path,
            format!("depth must be 16-bit grayscale, found {:?} {:?}", d.color, d.depth),
        ));
    }
    let px = d.data.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
    Image::from_vec(d.width, d.height, px).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_depth_png(path: &Path, img: &DepthImage) -> Result<()> {
    let (w, h) = img.dims();
    let bytes: Vec<u8> = img.data.iter().flat_map(|v| v.to_be_bytes()).collect();
    encode(path, w, h, ColorType::Grayscale, BitDepth::Sixteen, &bytes)
}

/// 8-bit RGB; RGBA drops alpha and grayscale is replicated.
pub fn read_color_png(path: &Path) -> Result<ColorImage> {
    let d = decode(path)?;
    if d.depth != BitDepth::Eight {
        return Err(Error::format(path, format!("color must be 8-bit, found {:?}", d.depth)));
    }
    let px: Vec<[u8; 3]> = match d.color {
        ColorType::Rgb => d.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        ColorType::Rgba => d.data.chunks_exact(4).map(|c| [c[0], c[1], c[2]]).collect(),
        ColorType::Grayscale => d.data.iter().map(|&g| [g; 3]).collect(),
        ColorType::GrayscaleAlpha => d.data.chunks_exact(2).map(|c| [c[0]; 3]).collect(),
        other => return Err(Error::format(path, format!("unsupported color type {other:?}"))),
    };
    Image::from_vec(d.width, d.height, px).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_color_png(path: &Path, img: &ColorImage) -> Result<()> {
    let (w, h) = img.dims();
    let bytes: Vec<u8> = img.data.iter().flatten().copied().collect();
    encode(path, w, h, ColorType::Rgb, BitDepth::Eight, &bytes)
}

/// 8-bit single channel: 0 is background, 255 (or 1) is the region.
pub fn read_mask_png(path: &Path) -> Result<LabelMask> {
    let d = decode(path)?;
    if d.color != ColorType::Grayscale || d.depth != BitDepth::Eight {
        return Err(Error::format(
            path,
            format!("mask must be 8-bit grayscale, found {:?} {:?}", d.color, d.depth),
        ));
    }
    let mut px = Vec::with_capacity(d.data.len());
    for &v in &d.data {
        px.push(match v {
            0 => 0,
            1 | 255 => 1,
            other => return Err(Error::format(path, format!("mask value {other} is neither 0 nor 255"))),
        });
    }
    Image::from_vec(d.width, d.height, px).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_mask_png(path: &Path, img: &LabelMask) -> Result<()> {
    let (w, h) = img.dims();
    let bytes: Vec<u8> = img.data.iter().map(|&v| if v == 0 { 0 } else { 255 }).collect();
    encode(path, w, h, ColorType::Grayscale, BitDepth::Eight, &bytes)
}
