//! Grayscale image files: binary and ASCII PGM, 8- and 16-bit PNG.
//!
//! 8-bit data map to `[0, 255]` unchanged; 16-bit data are rescaled to
//! `[0, 255]`. Saving clamps to `[0, 255]` and rounds half away from zero.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::{Error, Result};
use crate::grid::Image;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(&bytes).map_err(|m| format_err(path, m))
    } else if bytes.starts_with(b"\x89PNG") {
        decode_png(&bytes).map_err(|m| format_err(path, m))
    } else {
        Err(format_err(path, "not a PGM (P5/P2) or PNG file"))
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> std::result::Result<usize, String> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format!("malformed PGM header: bad {what}"))
    }
}

fn decode_pgm(bytes: &[u8]) -> std::result::Result<Image, String> {
    let ascii = bytes[1] == b'2';
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err("malformed PGM header: zero dimension".into());
    }
    if maxval == 0 || maxval > 65535 {
        return Err(format!("malformed PGM header: maxval {maxval}"));
    }
    let count = width * height;
    let scale = if maxval > 255 {
        255.0 / maxval as f64
    } else {
        1.0
    };
    let mut values = Vec::with_capacity(count);
    if ascii {
        let text = std::str::from_utf8(&bytes[h.pos..]).map_err(|_| "non-ASCII pixel data")?;
        for tok in text.split_ascii_whitespace().take(count) {
            let v: usize = tok
                .parse()
                .map_err(|_| format!("bad pixel value {tok:?}"))?;
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval {maxval}"));
            }
            values.push(v as f64 * scale);
        }
        if values.len() < count {
            return Err("unexpected end of pixel data".into());
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = h.pos + 1;
        let depth = if maxval > 255 { 2 } else { 1 };
        let raster = bytes.get(start..).unwrap_or(&[]);
        if raster.len() < count * depth {
            return Err("unexpected end of pixel data".into());
        }
        for k in 0..count {
            let v = if depth == 2 {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]]) as usize
            } else {
                raster[k] as usize
            };
            if v > maxval {
                return Err(format!("pixel value {v} exceeds maxval {maxval}"));
            }
            values.push(v as f64 * scale);
        }
    }
    Image::new(height, width, values).map_err(|e| e.to_string())
}

fn decode_png(bytes: &[u8]) -> std::result::Result<Image, String> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLuma16(buf) => buf
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) * 255.0 / 65535.0)
            .collect(),
        other => {
            return Err(format!(
                "unsupported PNG color type {:?}; grayscale only",
                other.color()
            ))
        }
    };
    Image::new(h, w, values).map_err(|e| e.to_string())
}

/// `clamp(round(v), 0, 255)` as stored on export.
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// The image as it will read back after [`save_image`].
pub fn quantized(img: &Image) -> Image {
    img.map(|v| f64::from(quantize(v)))
}

/// Writes 8-bit P5 (`.pgm`) or grayscale PNG (`.png`).
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img.as_slice().iter().map(|&v| quantize(v)).collect();
    match extension(path).as_deref() {
        Some("pgm") => {
            let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
            out.extend_from_slice(&bytes);
            fs::write(path, out).map_err(io_err(path))
        }
        Some("png") => {
            let buf = GrayImage::from_raw(img.cols() as u32, img.rows() as u32, bytes)
                .expect("buffer matches image shape");
            buf.save_with_format(path, ImageFormat::Png)
                .map_err(|e| match e {
                    image::ImageError::IoError(source) => Error::Io {
                        path: path.to_path_buf(),
                        source,
                    },
                    other => format_err(path, other.to_string()),
                })
        }
        _ => Err(format_err(path, "output extension must be .pgm or .png")),
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

/// True when `path` has an extension [`save_image`] can write.
pub fn is_supported_output(path: &Path) -> bool {
    matches!(extension(path).as_deref(), Some("pgm") | Some("png"))
}

/// Path for a derived output, e.g. `dir/u_p1.5.pgm`.
pub fn sibling(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}
