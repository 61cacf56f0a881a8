//! RGB image and binary mask buffers with PNG / PPM I/O.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `height × width × 3` floating point image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn zeros(height: usize, width: usize) -> Self {
        ImageBuffer {
            height,
            width,
            data: vec![0.0; height * width * 3],
        }
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let mut img = Self::zeros(height, width);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(Error::dims(height * width * 3, data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at index {i}")));
        }
        Ok(ImageBuffer {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        ImageBuffer {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        (row * self.width + col) * 3
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = self.index(row, col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, row: usize, col: usize, rgb: [f64; 3]) {
        let i = self.index(row, col);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::dims(
                format!("{}x{}", dims.0, dims.1),
                format!("{}x{}", self.height, self.width),
            ));
        }
        Ok(())
    }

    /// Reflect-pads to `height × width` (both at least the current size).
    pub fn reflect_pad(&self, height: usize, width: usize) -> ImageBuffer {
        assert!(height >= self.height && width >= self.width);
        ImageBuffer::from_fn(height, width, |r, c| {
            self.pixel(reflect(r, self.height), reflect(c, self.width))
        })
    }

    pub fn crop(&self, height: usize, width: usize) -> ImageBuffer {
        assert!(height <= self.height && width <= self.width);
        ImageBuffer::from_fn(height, width, |r, c| self.pixel(r, c))
    }

    /// 8-bit quantization: clamp to [0,1], scale by 255, round half up.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != height * width * 3 {
            return Err(Error::dims(height * width * 3, bytes.len()));
        }
        Ok(ImageBuffer {
            height,
            width,
            data: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        match extension(path).as_deref() {
            Some("ppm") => read_ppm(path),
            _ => read_png_rgb(path),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match extension(path).as_deref() {
            Some("ppm") => write_ppm(self, path),
            _ => write_png(path, self.width, self.height, png::ColorType::Rgb, &self.to_rgb8()),
        }
    }
}

/// Row-major binary mask, `true` = observed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskBuffer {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl MaskBuffer {
    pub fn full(height: usize, width: usize) -> Self {
        MaskBuffer {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::dims(height * width, bits.len()));
        }
        Ok(MaskBuffer {
            height,
            width,
            bits,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        MaskBuffer {
            height,
            width,
            bits,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, observed: bool) {
        self.bits[row * self.width + col] = observed;
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels that are masked out.
    pub fn hidden_ratio(&self) -> f64 {
        1.0 - self.observed_count() as f64 / self.bits.len() as f64
    }

    pub fn inverted(&self) -> MaskBuffer {
        MaskBuffer {
            height: self.height,
            width: self.width,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Pads with unobserved pixels.
    pub fn pad(&self, height: usize, width: usize) -> MaskBuffer {
        MaskBuffer::from_fn(height, width, |r, c| {
            r < self.height && c < self.width && self.get(r, c)
        })
    }

    /// Reads a grayscale (or RGB, converted by luma) PNG; values ≥ 128 are observed.
    pub fn load(path: &Path) -> Result<Self> {
        let (width, height, gray) = read_png_gray(path)?;
        Ok(MaskBuffer {
            height,
            width,
            bits: gray.into_iter().map(|v| v >= 128).collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        write_png(path, self.width, self.height, png::ColorType::Grayscale, &bytes)
    }
}

fn reflect(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let k = i % period;
    if k < n {
        k
    } else {
        period - k
    }
}

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn decode_png(path: &Path) -> Result<(usize, usize, png::ColorType, Vec<u8>)> {
    let mut decoder = png::Decoder::new(BufReader::new(open(path)?));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, info.color_type, buf))
}

fn read_png_rgb(path: &Path) -> Result<ImageBuffer> {
    let (w, h, color, buf) = decode_png(path)?;
    let rgb: Vec<u8> = match color {
        png::ColorType::Rgb => buf,
        png::ColorType::Rgba => buf.chunks_exact(4).flat_map(|p| [p[0], p[1], p[2]]).collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).flat_map(|p| [p[0]; 3]).collect(),
        other => return Err(Error::Format(format!("unsupported PNG color type {other:?}"))),
    };
    ImageBuffer::from_rgb8(h, w, &rgb)
}

fn read_png_gray(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let (w, h, color, buf) = decode_png(path)?;
    let luma = |r: u8, g: u8, b: u8| {
        ((r as u32 * 299 + g as u32 * 587 + b as u32 * 114 + 500) / 1000) as u8
    };
    let gray = match color {
        png::ColorType::Grayscale => buf,
        png::ColorType::GrayscaleAlpha => buf.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => buf.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
        png::ColorType::Rgba => buf.chunks_exact(4).map(|p| luma(p[0], p[1], p[2])).collect(),
        other => return Err(Error::Format(format!("unsupported PNG color type {other:?}"))),
    };
    Ok((w, h, gray))
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(color);
    encoder.set_depth(png::BitDepth::Eight);
    let fmt = |e: png::EncodingError| Error::Format(format!("{}: {e}", path.display()));
    let mut writer = encoder.write_header().map_err(fmt)?;
    writer.write_image_data(data).map_err(fmt)?;
    writer.finish().map_err(fmt)
}

/// Writes an ASCII (P3) PPM.
fn write_ppm(img: &ImageBuffer, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "P3\n{} {}\n255", img.width, img.height).map_err(io)?;
    for row in img.to_rgb8().chunks(img.width * 3) {
        let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
        writeln!(w, "{}", line.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads ASCII (P3) or binary (P6) PPM with maxval ≤ 255.
fn read_ppm(path: &Path) -> Result<ImageBuffer> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_ppm(&bytes)
}

pub(crate) fn parse_ppm(bytes: &[u8]) -> Result<ImageBuffer> {
    let bad = |msg: &str| Error::Format(format!("ppm: {msg}"));
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?);
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (width, height, maxval) = (num(header[1])?, num(header[2])?, num(header[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("maxval must be in 1..=255"));
    }
    let n = width * height * 3;
    let samples: Vec<u8> = match header[0] {
        "P3" => std::str::from_utf8(&bytes[pos..])
            .map_err(|_| bad("body"))?
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u8>().map_err(|_| bad("bad sample")))
            .collect::<Result<_>>()?,
        "P6" => bytes.get(pos + 1..pos + 1 + n).ok_or_else(|| bad("truncated body"))?.to_vec(),
        _ => return Err(bad("unsupported magic")),
    };
    if samples.len() != n {
        return Err(bad("truncated body"));
    }
    let scale = 1.0 / maxval as f64;
    let data = samples.iter().map(|&s| (s as f64 * scale).min(1.0)).collect();
    ImageBuffer::from_vec(height, width, data)
}
