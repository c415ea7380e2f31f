//! Per-pixel prompt scores in `[0, 1]`, row-major, plus PFM/PGM codecs.
//!
//! PFM is written as grayscale `Pf`, little-endian (scale `-1.0`), rows stored
//! bottom-to-top as the format requires. Scores are `f32`, so a PFM round-trip
//! is bit-exact. PGM is `P5` with maxval 255 and `score = gray / 255`.

use std::io::{self, BufRead, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProbMapError {
    #[error("map dimensions {width}x{height} do not match {len} scores")]
    DimensionMismatch { width: usize, height: usize, len: usize },
    #[error("score {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("malformed {format} data: {reason}")]
    Format { format: &'static str, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    width: usize,
    height: usize,
    scores: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, scores: Vec<f32>) -> Result<Self, ProbMapError> {
        if width * height != scores.len() {
            return Err(ProbMapError::DimensionMismatch {
                width,
                height,
                len: scores.len(),
            });
        }
        if let Some((index, &value)) = scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(0.0..=1.0).contains(*s))
        {
            return Err(ProbMapError::OutOfRange { index, value });
        }
        Ok(Self { width, height, scores })
    }

    /// Builds a map, clamping every value into `[0, 1]` (NaN becomes 0).
    pub fn from_clamped(width: usize, height: usize, values: impl IntoIterator<Item = f64>) -> Result<Self, ProbMapError> {
        let scores = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) as f32 })
            .collect();
        Self::new(width, height, scores)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        assert!((0.0..=1.0).contains(&value));
        Self {
            width,
            height,
            scores: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self, ProbMapError> {
        let mut scores = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                scores.push(f(x, y));
            }
        }
        Self::new(width, height, scores)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f32] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<f32> {
        self.scores
    }

    /// Score at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.scores[y * self.width + x]
    }

    pub fn same_dims(&self, other: &ProbabilityMap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Horizontal mirror image.
    pub fn flipped_horizontal(&self) -> Self {
        let mut scores = Vec::with_capacity(self.len());
        for row in self.scores.chunks(self.width.max(1)) {
            scores.extend(row.iter().rev());
        }
        Self {
            width: self.width,
            height: self.height,
            scores,
        }
    }

    pub fn write_pfm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "Pf\n{} {}\n-1.0\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.len() * 4);
        for row in self.scores.chunks(self.width.max(1)).rev() {
            for s in row {
                buf.extend_from_slice(&s.to_le_bytes());
            }
        }
        w.write_all(&buf)
    }

    pub fn to_pfm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pfm(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_pfm<R: BufRead>(mut r: R) -> Result<Self, ProbMapError> {
        let fmt_err = |reason: &str| ProbMapError::Format {
            format: "PFM",
            reason: reason.to_string(),
        };
        let magic = read_token(&mut r)?;
        if magic != "Pf" {
            return Err(fmt_err(&format!("expected grayscale `Pf` header, found `{magic}`")));
        }
        let width = parse_dim(&read_token(&mut r)?, "PFM")?;
        let height = parse_dim(&read_token(&mut r)?, "PFM")?;
        let scale: f64 = read_token(&mut r)?
            .parse()
            .map_err(|_| fmt_err("bad scale"))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(fmt_err("scale must be finite and non-zero"));
        }
        let little = scale < 0.0;
        let mut raw = vec![0u8; width * height * 4];
        r.read_exact(&mut raw).map_err(|_| fmt_err("truncated raster"))?;
        let mut scores = vec![0f32; width * height];
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let bytes = [chunk[0], chunk[1], chunk[2], chunk[3]];
            let v = if little {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            let (row, col) = (i / width.max(1), i % width.max(1));
            scores[(height - 1 - row) * width + col] = v;
        }
        Self::new(width, height, scores)
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .scores
            .iter()
            .map(|&s| (s as f64 * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)
    }

    pub fn read_pgm<R: BufRead>(mut r: R) -> Result<Self, ProbMapError> {
        let fmt_err = |reason: &str| ProbMapError::Format {
            format: "PGM",
            reason: reason.to_string(),
        };
        let magic = read_token(&mut r)?;
        if magic != "P5" {
            return Err(fmt_err(&format!("expected binary `P5` header, found `{magic}`")));
        }
        let width = parse_dim(&read_token(&mut r)?, "PGM")?;
        let height = parse_dim(&read_token(&mut r)?, "PGM")?;
        let maxval = read_token(&mut r)?;
        if maxval != "255" {
            return Err(fmt_err(&format!("only maxval 255 is supported, found {maxval}")));
        }
        let mut raw = vec![0u8; width * height];
        r.read_exact(&mut raw).map_err(|_| fmt_err("truncated raster"))?;
        let scores = raw.into_iter().map(|g| g as f32 / 255.0).collect();
        Self::new(width, height, scores)
    }

    /// Loads a map from a `.pfm` or `.pgm` file (chosen by magic number).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProbMapError> {
        let data = std::fs::read(path)?;
        match data.get(..2) {
            Some(b"Pf") => Self::read_pfm(&data[..]),
            Some(b"P5") => Self::read_pgm(&data[..]),
            _ => Err(ProbMapError::Format {
                format: "map",
                reason: "neither PFM (`Pf`) nor PGM (`P5`)".into(),
            }),
        }
    }
}

fn parse_dim(tok: &str, format: &'static str) -> Result<usize, ProbMapError> {
    tok.parse::<usize>()
        .ok()
        .filter(|&d| d > 0 && d <= 1 << 16)
        .ok_or_else(|| ProbMapError::Format {
            format,
            reason: format!("bad dimension `{tok}`"),
        })
}

/// Reads one whitespace-delimited header token and consumes exactly one
/// trailing whitespace byte, skipping `#` comments.
fn read_token<R: BufRead>(r: &mut R) -> Result<String, ProbMapError> {
    let mut tok = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            break;
        }
        let b = byte[0];
        if b == b'#' && tok.is_empty() {
            let mut skip = Vec::new();
            r.read_until(b'\n', &mut skip)?;
            continue;
        }
        if b.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            break;
        }
        tok.push(b);
        if tok.len() > 64 {
            break;
        }
    }
    if tok.is_empty() {
        return Err(ProbMapError::Format {
            format: "header",
            reason: "unexpected end of header".into(),
        });
    }
    String::from_utf8(tok).map_err(|_| ProbMapError::Format {
        format: "header",
        reason: "non-ASCII header".into(),
    })
}
