//! PNG encoding for frames, mask sidecars and depth maps.

use std::fs::File;
use std::io::{BufWriter, Cursor};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use crate::compose::Image;
use crate::render::{DepthBuffer, Mask};

use super::PipelineError;

/// Decoded pixel data at 8 or 16 bits per channel.
struct Raw {
    width: u32,
    height: u32,
    color: ColorType,
    depth: BitDepth,
    data: Vec<u8>,
}

fn decode(bytes: &[u8], expand: bool) -> Result<Raw, String> {
    let mut dec = png::Decoder::new(Cursor::new(bytes));
    if expand {
        dec.set_transformations(Transformations::EXPAND);
    }
    let mut reader = dec.read_info().map_err(|e| e.to_string())?;
    let size = reader.output_buffer_size().ok_or("image too large")?;
    let mut data = vec![0; size];
    let info = reader.next_frame(&mut data).map_err(|e| e.to_string())?;
    data.truncate(info.buffer_size());
    Ok(Raw { width: info.width, height: info.height, color: info.color_type, depth: info.bit_depth, data })
}

fn read(path: &Path, expand: bool) -> Result<Raw, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    decode(&bytes, expand).map_err(|msg| PipelineError::ImageDecode { path: path.to_path_buf(), msg })
}

fn write(path: &Path, width: u32, height: u32, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<(), PipelineError> {
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    let result = enc.write_header().and_then(|mut w| w.write_image_data(data).and_then(|_| w.finish()));
    result.map_err(|e| PipelineError::Io { path: path.to_path_buf(), msg: e.to_string() })
}

/// Reads an 8-bit RGB, RGBA or grayscale PNG as RGB. Alpha is dropped.
pub fn read_rgb(path: &Path) -> Result<Image, PipelineError> {
    let raw = read(path, true)?;
    let bad = |msg: String| PipelineError::ImageDecode { path: path.to_path_buf(), msg };
    if raw.depth != BitDepth::Eight {
        return Err(bad(format!("expected 8-bit channels, found {:?}", raw.depth)));
    }
    let data = match raw.color {
        ColorType::Rgb => raw.data,
        ColorType::Rgba => raw.data.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        ColorType::Grayscale => raw.data.iter().flat_map(|&g| [g, g, g]).collect(),
        ColorType::GrayscaleAlpha => raw.data.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect(),
        other => return Err(bad(format!("unsupported color type {other:?}"))),
    };
    Image::from_raw(raw.width, raw.height, data).map_err(|e| bad(e.to_string()))
}

pub fn write_rgb(path: &Path, img: &Image) -> Result<(), PipelineError> {
    write(path, img.width, img.height, ColorType::Rgb, BitDepth::Eight, &img.data)
}

/// 1-bit grayscale PNG, white where set.
pub fn write_mask(path: &Path, mask: &Mask) -> Result<(), PipelineError> {
    let row_bytes = (mask.width as usize).div_ceil(8);
    let mut data = vec![0u8; row_bytes * mask.height as usize];
    for y in 0..mask.height as usize {
        for x in 0..mask.width as usize {
            if mask.bits[y * mask.width as usize + x] {
                data[y * row_bytes + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    write(path, mask.width, mask.height, ColorType::Grayscale, BitDepth::One, &data)
}

/// Any nonzero gray level reads as set.
pub fn read_mask(path: &Path) -> Result<Mask, PipelineError> {
    let raw = read(path, true)?;
    if raw.color != ColorType::Grayscale || raw.depth != BitDepth::Eight {
        let msg = format!("expected a grayscale mask, found {:?} at {:?}", raw.color, raw.depth);
        return Err(PipelineError::ImageDecode { path: path.to_path_buf(), msg });
    }
    Ok(Mask { width: raw.width, height: raw.height, bits: raw.data.iter().map(|&v| v != 0).collect() })
}

/// 16-bit grayscale PNG of depth in millimeters, rounded and saturated at 65535; 0 means empty.
pub fn write_depth_mm(path: &Path, depth: &DepthBuffer) -> Result<(), PipelineError> {
    let data: Vec<u8> = depth
        .values
        .iter()
        .flat_map(|&z| {
            let mm = if z.is_finite() { (z * 1000.0).round().clamp(1.0, 65535.0) as u16 } else { 0 };
            mm.to_be_bytes()
        })
        .collect();
    write(path, depth.width, depth.height, ColorType::Grayscale, BitDepth::Sixteen, &data)
}

pub fn read_depth_mm(path: &Path) -> Result<DepthBuffer, PipelineError> {
    let raw = read(path, false)?;
    if raw.color != ColorType::Grayscale || raw.depth != BitDepth::Sixteen {
        let msg = format!("expected 16-bit grayscale depth, found {:?} at {:?}", raw.color, raw.depth);
        return Err(PipelineError::ImageDecode { path: path.to_path_buf(), msg });
    }
    let values = raw
        .data
        .chunks_exact(2)
        .map(|b| match u16::from_be_bytes([b[0], b[1]]) {
            0 => f64::INFINITY,
            mm => f64::from(mm) / 1000.0,
        })
        .collect();
    Ok(DepthBuffer { width: raw.width, height: raw.height, values })
}
