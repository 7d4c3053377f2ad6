//! Pixelized phase maps.
//!
//! A [`PhaseGrid`] stores one phase id per pixel of a square raster. Row 0 is
//! the *bottom* raster line so that pixel `(i, j)` covers
//! `[j h, (j+1) h] x [i h, (i+1) h]` in physical coordinates with `y` pointing
//! up. Image and CSV files list their top row first; readers and writers flip
//! accordingly.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Cursor;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    physical_size: f64,
}

impl PhaseGrid {
    /// Builds a grid from bottom-up row-major labels.
    pub fn new(width: usize, height: usize, labels: Vec<u32>, physical_size: f64) -> Result<Self> {
        if width == 0 || height == 0 || labels.is_empty() {
            return Err(Error::EmptyRaster);
        }
        if width != height {
            return Err(Error::NonSquare { width, height });
        }
        if labels.len() != width * height {
            return Err(Error::Parse(format!(
                "expected {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        if !(physical_size > 0.0) || !physical_size.is_finite() {
            return Err(Error::InvalidPhysicalSize(physical_size));
        }
        Ok(Self {
            width,
            height,
            labels,
            physical_size,
        })
    }

    /// Builds an `n x n` grid from a closure `(row, col) -> phase`.
    pub fn from_fn(n: usize, physical_size: f64, mut phase: impl FnMut(usize, usize) -> u32) -> Result<Self> {
        let mut labels = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                labels.push(phase(i, j));
            }
        }
        Self::new(n, n, labels, physical_size)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Side length ε of the square domain.
    pub fn physical_size(&self) -> f64 {
        self.physical_size
    }

    /// Pixel size `h = ε / width`.
    pub fn pixel_size(&self) -> f64 {
        self.physical_size / self.width as f64
    }

    pub fn with_physical_size(mut self, physical_size: f64) -> Result<Self> {
        if !(physical_size > 0.0) || !physical_size.is_finite() {
            return Err(Error::InvalidPhysicalSize(physical_size));
        }
        self.physical_size = physical_size;
        Ok(self)
    }

    pub fn phase_of_pixel(&self, i: usize, j: usize) -> Result<u32> {
        if i >= self.height || j >= self.width {
            return Err(Error::IndexOutOfRange {
                row: i,
                col: j,
                width: self.width,
            });
        }
        Ok(self.labels[i * self.width + j])
    }

    /// Unchecked variant used in hot loops.
    #[inline]
    pub(crate) fn phase(&self, i: usize, j: usize) -> u32 {
        self.labels[i * self.width + j]
    }

    /// Distinct phase ids, ascending.
    pub fn phases(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.labels.clone();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Area fraction of every phase.
    pub fn volume_fractions(&self) -> BTreeMap<u32, f64> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let n = self.labels.len() as f64;
        counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect()
    }

    /// Uniform refinement: every pixel becomes an `r x r` block of the same phase.
    pub fn refine(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Parse("refinement factor must be positive".into()));
        }
        let n = self.width * r;
        Self::from_fn(n, self.physical_size, |i, j| self.phase(i / r, j / r))
    }

    /// Parses a CSV raster (one line per pixel row, top row first).
    pub fn from_csv(text: &str, physical_size: f64) -> Result<Self> {
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<u32>().map_err(|e| {
                        Error::Parse(format!("line {}: '{}': {e}", line_no + 1, t.trim()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyRaster);
        }
        let width = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Parse(format!(
                "ragged CSV: row of length {} in a raster of width {width}",
                bad.len()
            )));
        }
        let height = rows.len();
        let labels = rows.into_iter().rev().flatten().collect();
        Self::new(width, height, labels, physical_size)
    }

    /// Writes the raster as CSV, top row first.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.labels.len() * 2);
        for i in (0..self.height).rev() {
            let row = &self.labels[i * self.width..(i + 1) * self.width];
            for (k, l) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                out.push_str(&l.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses a binary (P5) PGM with 8-bit samples.
    pub fn from_pgm(bytes: &[u8], palette: &Palette, physical_size: f64) -> Result<Self> {
        let (width, height, pixels) = parse_pgm(bytes)?;
        Self::from_top_down(width, height, physical_size, |k| Color::gray(pixels[k]), palette)
    }

    /// Parses a PNG (indexed, gray or RGB[A]); colors are looked up after
    /// palette expansion.
    pub fn from_png(bytes: &[u8], palette: &Palette, physical_size: f64) -> Result<Self> {
        let mut decoder = png::Decoder::new(Cursor::new(bytes));
        decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
        let mut reader = decoder.read_info().map_err(|e| Error::Parse(format!("png: {e}")))?;
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Parse(format!("png: {e}")))?;
        let (width, height) = (info.width as usize, info.height as usize);
        let channels = info.color_type.samples();
        let stride = info.line_size;
        let data = &buf[..info.buffer_size()];
        let color_type = info.color_type;
        Self::from_top_down(
            width,
            height,
            physical_size,
            |k| {
                let (r, c) = (k / width, k % width);
                let px = &data[r * stride + c * channels..r * stride + (c + 1) * channels];
                match color_type {
                    png::ColorType::Grayscale | png::ColorType::GrayscaleAlpha => Color::gray(px[0]),
                    _ => Color::rgb(px[0], px[1], px[2]),
                }
            },
            palette,
        )
    }

    /// Dispatches on the leading bytes: PNG signature, `P5`, otherwise CSV.
    /// CSV input ignores the palette.
    pub fn load(bytes: &[u8], palette: Option<&Palette>, physical_size: f64) -> Result<Self> {
        const PNG_MAGIC: &[u8] = b"\x89PNG";
        if bytes.is_empty() {
            return Err(Error::EmptyRaster);
        }
        let need_palette = || palette.ok_or_else(|| Error::Palette("image input requires a palette".into()));
        if bytes.starts_with(PNG_MAGIC) {
            Self::from_png(bytes, need_palette()?, physical_size)
        } else if bytes.starts_with(b"P5") {
            Self::from_pgm(bytes, need_palette()?, physical_size)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse(format!("csv: {e}")))?;
            Self::from_csv(text, physical_size)
        }
    }

    /// Encodes the grid as a P5 PGM using `gray_of(phase)` as the pixel value.
    pub fn to_pgm(&self, gray_of: impl Fn(u32) -> u8) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for i in (0..self.height).rev() {
            out.extend(self.labels[i * self.width..(i + 1) * self.width].iter().map(|&l| gray_of(l)));
        }
        out
    }

    fn from_top_down(
        width: usize,
        height: usize,
        physical_size: f64,
        color_at: impl Fn(usize) -> Color,
        palette: &Palette,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyRaster);
        }
        if width != height {
            return Err(Error::NonSquare { width, height });
        }
        let mut labels = vec![0; width * height];
        for r in 0..height {
            let i = height - 1 - r;
            for j in 0..width {
                let color = color_at(r * width + j);
                labels[i * width + j] = palette.lookup(color).ok_or_else(|| Error::UnknownColor {
                    color: color.to_string(),
                    row: i,
                    col: j,
                })?;
            }
        }
        Self::new(width, height, labels, physical_size)
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in header.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("pgm: malformed header".into()))?;
    }
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("pgm: unsupported maxval {maxval}")));
    }
    pos += 1; // single whitespace after maxval
    let data = bytes.get(pos..pos + width * height).ok_or_else(|| Error::Parse("pgm: truncated pixel data".into()))?;
    if width == 0 || height == 0 {
        return Err(Error::EmptyRaster);
    }
    Ok((width, height, data))
}

/// 8-bit RGB color. Gray values map to `(g, g, g)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Color(pub [u8; 3]);

impl Color {
    pub fn gray(g: u8) -> Self {
        Self([g, g, g])
    }

    pub fn rgb(r: u8, g: u8, b: u8) -> Self {
        Self([r, g, b])
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [r, g, b] = self.0;
        if r == g && g == b {
            write!(f, "{r}")
        } else {
            write!(f, "#{r:02x}{g:02x}{b:02x}")
        }
    }
}

/// Explicit color to phase map.
///
/// Text form: one `gray_or_hexcolor phase_id` pair per line, e.g. `255 0` or
/// `#ff8800 2`. Blank lines and lines starting with `//` are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Palette {
    entries: BTreeMap<Color, u32>,
}

impl Palette {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, color: Color, phase: u32) -> &mut Self {
        self.entries.insert(color, phase);
        self
    }

    pub fn lookup(&self, color: Color) -> Option<u32> {
        self.entries.get(&color).copied()
    }

    pub fn phases(&self) -> Vec<u32> {
        let mut p: Vec<u32> = self.entries.values().copied().collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut palette = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (Some(color), Some(phase), None) = (tokens.next(), tokens.next(), tokens.next()) else {
                return Err(Error::Palette(format!("line {}: expected 'color phase'", n + 1)));
            };
            let color = parse_color(color).ok_or_else(|| Error::Palette(format!("line {}: bad color '{color}'", n + 1)))?;
            let phase = phase
                .parse()
                .map_err(|_| Error::Palette(format!("line {}: bad phase id '{phase}'", n + 1)))?;
            if palette.entries.insert(color, phase).is_some() {
                return Err(Error::Palette(format!("line {}: duplicate color {color}", n + 1)));
            }
        }
        if palette.entries.is_empty() {
            return Err(Error::Palette("palette is empty".into()));
        }
        Ok(palette)
    }
}

fn parse_color(token: &str) -> Option<Color> {
    if let Some(hex) = token.strip_prefix('#') {
        if hex.len() != 6 {
            return None;
        }
        let v = u32::from_str_radix(hex, 16).ok()?;
        Some(Color::rgb((v >> 16) as u8, (v >> 8) as u8, v as u8))
    } else {
        token.parse::<u8>().ok().map(Color::gray)
    }
}

/// Synthetic microstructures used in tests, examples and the CLI.
pub mod synthetic {
    use super::PhaseGrid;
    use crate::Result;

    /// Plus-shaped inclusion (phase 1) centred in a matrix (phase 0).
    ///
    /// Each arm has half-width `half_width` and reaches `half_length` from the
    /// centre, both as fractions of the domain side. A pixel belongs to the
    /// cross when its centre lies inside one of the two bars.
    pub fn cross(n: usize, half_width: f64, half_length: f64) -> Result<PhaseGrid> {
        PhaseGrid::from_fn(n, 1.0, |i, j| {
            let x = (j as f64 + 0.5) / n as f64 - 0.5;
            let y = (i as f64 + 0.5) / n as f64 - 0.5;
            let horizontal = x.abs() <= half_length && y.abs() <= half_width;
            let vertical = y.abs() <= half_length && x.abs() <= half_width;
            u32::from(horizontal || vertical)
        })
    }

    /// Vertical two-phase laminate: columns left of `fraction * n` are phase 0.
    pub fn laminate(n: usize, fraction: f64) -> Result<PhaseGrid> {
        let split = (fraction * n as f64).round() as usize;
        PhaseGrid::from_fn(n, 1.0, |_, j| u32::from(j >= split))
    }

    /// Single phase (phase 0) grid.
    pub fn uniform(n: usize) -> Result<PhaseGrid> {
        PhaseGrid::from_fn(n, 1.0, |_, _| 0)
    }
}
