//! PNG (8-bit) and PFM (little-endian float) file I/O.
//!
//! PNG is a visualization/interchange format and quantizes to 8 bits. PFM keeps
//! planes exact to `f32` precision and is the format intermediate results use.

use std::fs;
use std::io::{BufRead, Cursor, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{luminance, ColorImage, ColorSpace, ImagePlane};

/// Rounds a `[0, 1]` sample to an 8-bit code, clamping out-of-range values.
#[inline]
pub fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Decodes a PNG of any color type into an RGB image with samples in `[0, 1]`.
pub fn decode_png(bytes: &[u8], path: &Path) -> Result<ColorImage> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| format_err(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| format_err(path, e.to_string()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let stride = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(format_err(path, "unexpanded indexed PNG")),
    };
    let mut rgb = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        let row = &buf[y * info.line_size..y * info.line_size + w * stride];
        for px in row.chunks_exact(stride) {
            let (r, g, b) = if stride < 3 { (px[0], px[0], px[0]) } else { (px[0], px[1], px[2]) };
            rgb.extend([r, g, b].map(|c| c as f64 / 255.0));
        }
    }
    ColorImage::from_interleaved_rgb(w, h, &rgb)
}

pub fn read_png(path: impl AsRef<Path>) -> Result<ColorImage> {
    let path = path.as_ref();
    decode_png(&read_bytes(path)?, path)
}

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("in-memory png header");
        writer.write_image_data(data).expect("in-memory png data");
        writer.finish().expect("in-memory png finish");
    }
    out
}

/// Encodes an RGB image as 8-bit PNG bytes.
pub fn encode_png_rgb(img: &ColorImage) -> Result<Vec<u8>> {
    if img.space() != ColorSpace::Rgb {
        return Err(Error::Structural("only RGB images can be written as PNG".into()));
    }
    let bytes: Vec<u8> = img.to_interleaved().into_iter().map(quantize_u8).collect();
    Ok(encode_png(img.width(), img.height(), png::ColorType::Rgb, &bytes))
}

pub fn write_png(path: impl AsRef<Path>, img: &ColorImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_png_rgb(img)?)
}

/// Writes a plane as 8-bit grayscale after multiplying by `scale` (e.g. 255/10
/// for weight maps, 1 for masks in `[0, 1]`).
pub fn write_png_gray(path: impl AsRef<Path>, plane: &ImagePlane, scale: f64) -> Result<()> {
    let bytes: Vec<u8> = plane.data().iter().map(|&v| quantize_u8(v * scale)).collect();
    write_bytes(
        path.as_ref(),
        &encode_png(plane.width(), plane.height(), png::ColorType::Grayscale, &bytes),
    )
}

/// Encodes a plane as a grayscale little-endian PFM (`Pf`, scale `-1.0`).
/// Rows are stored bottom-to-top as the format requires.
pub fn encode_pfm(plane: &ImagePlane) -> Vec<u8> {
    let header = format!("Pf\n{} {}\n-1.0\n", plane.width(), plane.height());
    let mut out = Vec::with_capacity(header.len() + plane.len() * 4);
    out.extend_from_slice(header.as_bytes());
    for row in plane.data().chunks_exact(plane.width()).rev() {
        for &v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(path: impl AsRef<Path>, plane: &ImagePlane) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pfm(plane))
}

fn header_token(reader: &mut impl BufRead, path: &Path) -> Result<String> {
    let mut line = String::new();
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(format_err(path, "truncated PFM header"));
        }
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            return Ok(t.to_string());
        }
    }
}

/// Decodes a PFM file. Color (`PF`) files are reduced to their luminance.
pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<ImagePlane> {
    let mut reader = Cursor::new(bytes);
    let channels = match header_token(&mut reader, path)?.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(format_err(path, format!("bad PFM magic {other:?}"))),
    };
    let dims = header_token(&mut reader, path)?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (w, h) = match (it.next(), it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h)), None) if w > 0 && h > 0 => (w, h),
        _ => return Err(format_err(path, format!("bad PFM dimensions {dims:?}"))),
    };
    let scale: f32 = header_token(&mut reader, path)?
        .parse()
        .map_err(|_| format_err(path, "bad PFM scale"))?;
    if scale == 0.0 {
        return Err(format_err(path, "PFM scale must be non-zero"));
    }
    let little = scale < 0.0;
    let mut raw = vec![0u8; w * h * channels * 4];
    reader
        .read_exact(&mut raw)
        .map_err(|_| format_err(path, "truncated PFM data"))?;
    let samples: Vec<f64> = raw
        .chunks_exact(4)
        .map(|c| {
            let b = [c[0], c[1], c[2], c[3]];
            (if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }) as f64
        })
        .collect();
    let mut data = vec![0.0; w * h];
    for (row_idx, row) in samples.chunks_exact(w * channels).enumerate() {
        let y = h - 1 - row_idx;
        for x in 0..w {
            data[y * w + x] = if channels == 1 {
                row[x]
            } else {
                let p = &row[x * 3..x * 3 + 3];
                crate::image::KR * p[0] + crate::image::KG * p[1] + crate::image::KB * p[2]
            };
        }
    }
    ImagePlane::new(w, h, data)
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let path = path.as_ref();
    decode_pfm(&read_bytes(path)?, path)
}

/// Reads a single-channel plane from `.pfm` (exact) or `.png` (luminance / 255).
pub fn read_plane(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pfm") => read_pfm(path),
        Some("png") => luminance(&read_png(path)?),
        _ => Err(format_err(path, "expected a .pfm or .png file")),
    }
}
