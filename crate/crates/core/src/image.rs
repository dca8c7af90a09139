//! Grayscale images: PGM I/O, patch extraction and overlap-averaged
//! reconstruction for the denoising pipeline.
//!
//! Patch entries are stored as intensities scaled to `[0, 1]` (pixel / 255),
//! listed row by row within the patch.

use std::fs;
use std::ops::Range;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major pixels.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Image(format!(
                "{} pixels do not form a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    /// Top-left `w x h` sub-image.
    pub fn crop(&self, w: usize, h: usize) -> Result<GrayImage> {
        if w > self.width || h > self.height {
            return Err(Error::Image(format!(
                "cannot crop {w}x{h} from {}x{}",
                self.width, self.height
            )));
        }
        let pixels = (0..h)
            .flat_map(|r| {
                self.pixels[r * self.width..r * self.width + w]
                    .iter()
                    .copied()
            })
            .collect();
        GrayImage::new(w, h, pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`
    Ascii,
    /// `P5`
    Binary,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Pgm {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&[u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return self.fail("unexpected end of data");
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        let tok = self.token()?;
        match std::str::from_utf8(tok)
            .ok()
            .and_then(|t| t.parse::<usize>().ok())
        {
            Some(v) => Ok(v),
            None => {
                self.pos = start;
                self.fail(format!("expected {what}"))
            }
        }
    }
}

/// Parse a P2 or P5 graymap with maxval 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut c = Cursor { bytes, pos: 0 };
    let format = match c.token()? {
        b"P2" => PgmFormat::Ascii,
        b"P5" => PgmFormat::Binary,
        _ => {
            c.pos = 0;
            return c.fail("expected magic number P2 or P5");
        }
    };
    let width = c.number("width")?;
    let height = c.number("height")?;
    c.skip_space_and_comments();
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if maxval != 255 {
        c.pos = maxval_at;
        return c.fail(format!("maxval {maxval} unsupported (only 255)"));
    }
    if width == 0 || height == 0 {
        return c.fail("zero image dimension");
    }
    let count = width * height;
    let pixels = match format {
        PgmFormat::Binary => {
            if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
                return c.fail("missing whitespace before raster");
            }
            c.pos += 1;
            let end = c.pos + count;
            if end > bytes.len() {
                c.pos = bytes.len();
                return c.fail(format!("raster truncated: need {count} bytes"));
            }
            bytes[c.pos..end].to_vec()
        }
        PgmFormat::Ascii => {
            let mut px = Vec::with_capacity(count);
            for _ in 0..count {
                let at = c.pos;
                let v = c.number("pixel value")?;
                if v > 255 {
                    c.pos = at;
                    return c.fail(format!("pixel value {v} exceeds maxval"));
                }
                px.push(v as u8);
            }
            px
        }
    };
    GrayImage::new(width, height, pixels)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    parse_pgm(&fs::read(path)?)
}

pub fn encode_pgm(img: &GrayImage, format: PgmFormat) -> Vec<u8> {
    match format {
        PgmFormat::Binary => {
            let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
            out.extend_from_slice(&img.pixels);
            out
        }
        PgmFormat::Ascii => {
            let mut out = format!("P2\n{} {}\n255\n", img.width, img.height);
            for row in img.pixels.chunks(img.width) {
                let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            out.into_bytes()
        }
    }
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage, format: PgmFormat) -> Result<()> {
    fs::write(path, encode_pgm(img, format))?;
    Ok(())
}

/// Sizes of contiguous blocks splitting `n` items over `parts`; the first
/// `n % parts` blocks get one extra item.
pub fn partition_sizes(n: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| n / parts + usize::from(i < n % parts))
        .collect()
}

fn partition_ranges(n: usize, parts: usize) -> Vec<Range<usize>> {
    let mut start = 0;
    partition_sizes(n, parts)
        .into_iter()
        .map(|len| {
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// All `p x p` patches of an image at stride `s`, one per column.
#[derive(Debug, Clone)]
pub struct ImagePatchDataset {
    pub source: GrayImage,
    pub patch: usize,
    pub stride: usize,
    /// `p^2 x count`, intensities in `[0, 1]`.
    pub patches: Array2<f64>,
    /// Top-left corner `(row, col)` of each column, in row-major order.
    pub origins: Vec<(usize, usize)>,
    /// Per-patch means removed by [`ImagePatchDataset::center`]; added back
    /// on reconstruction.
    pub means: Option<Array1<f64>>,
}

impl ImagePatchDataset {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Subtract each patch's mean intensity. Learning then only has to model
    /// texture, and every reconstruction adds the means back.
    pub fn center(&mut self) {
        if self.means.is_some() {
            return;
        }
        let means = self.patches.mean_axis(Axis(0)).expect("non-empty patches");
        self.patches -= &means.view().insert_axis(Axis(0));
        self.means = Some(means);
    }

    /// Contiguous column ranges assigned to each agent.
    pub fn partition(&self, agents: usize) -> Result<Vec<Range<usize>>> {
        if agents == 0 || agents > self.len() {
            return Err(Error::Image(format!(
                "cannot split {} patches over {agents} agents",
                self.len()
            )));
        }
        Ok(partition_ranges(self.len(), agents))
    }

    pub fn blocks(&self, agents: usize) -> Result<Vec<Array2<f64>>> {
        Ok(self
            .partition(agents)?
            .into_iter()
            .map(|r| self.patches.slice(ndarray::s![.., r]).to_owned())
            .collect())
    }
}

pub fn extract_patches(img: &GrayImage, p: usize, s: usize) -> Result<ImagePatchDataset> {
    if p == 0 || s == 0 {
        return Err(Error::Image(
            "patch size and stride must be positive".into(),
        ));
    }
    if p > img.width || p > img.height {
        return Err(Error::Image(format!(
            "patch size {p} exceeds image {}x{}",
            img.width, img.height
        )));
    }
    let rows: Vec<usize> = (0..=img.height - p).step_by(s).collect();
    let cols: Vec<usize> = (0..=img.width - p).step_by(s).collect();
    let origins: Vec<(usize, usize)> = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect();
    let mut patches = Array2::zeros((p * p, origins.len()));
    for (mut col, &(r0, c0)) in patches.axis_iter_mut(Axis(1)).zip(&origins) {
        for dr in 0..p {
            for dc in 0..p {
                col[dr * p + dc] = img.get(r0 + dr, c0 + dc) as f64 / 255.0;
            }
        }
    }
    Ok(ImagePatchDataset {
        source: img.clone(),
        patch: p,
        stride: s,
        patches,
        origins,
        means: None,
    })
}

/// Place every patch column at its origin and average overlaps. Pixels no
/// patch covers keep their source value. Stored patch means, if any, are
/// added back first.
pub fn reconstruct_from_patches(
    ds: &ImagePatchDataset,
    patches: &Array2<f64>,
) -> Result<GrayImage> {
    let p = ds.patch;
    if patches.dim() != (p * p, ds.len()) {
        return Err(Error::Dimension(format!(
            "patch matrix is {:?}, expected {:?}",
            patches.dim(),
            (p * p, ds.len())
        )));
    }
    let (w, h) = (ds.source.width, ds.source.height);
    let mut sum = vec![0.0; w * h];
    let mut count = vec![0usize; w * h];
    for (j, (col, &(r0, c0))) in patches.axis_iter(Axis(1)).zip(&ds.origins).enumerate() {
        let offset = ds.means.as_ref().map_or(0.0, |m| m[j]);
        for dr in 0..p {
            for dc in 0..p {
                let idx = (r0 + dr) * w + c0 + dc;
                sum[idx] += col[dr * p + dc] + offset;
                count[idx] += 1;
            }
        }
    }
    let pixels = sum
        .iter()
        .zip(&count)
        .zip(&ds.source.pixels)
        .map(|((&s, &n), &orig)| {
            if n == 0 {
                orig
            } else {
                (s / n as f64 * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    GrayImage::new(w, h, pixels)
}

/// Denoised image from a dictionary and the per-agent code blocks.
pub fn reconstruct_image(
    ds: &ImagePatchDataset,
    d: &Array2<f64>,
    codes: &[Array2<f64>],
) -> Result<GrayImage> {
    let views: Vec<_> = codes.iter().map(|x| x.view()).collect();
    let x = ndarray::concatenate(Axis(1), &views)
        .map_err(|e| Error::Dimension(format!("code blocks: {e}")))?;
    if d.ncols() != x.nrows() {
        return Err(Error::Dimension(format!(
            "D is {:?}, X is {:?}",
            d.dim(),
            x.dim()
        )));
    }
    reconstruct_from_patches(ds, &d.dot(&x))
}

/// Add i.i.d. Gaussian noise of standard deviation `sigma` (gray levels),
/// then round and clamp to 8 bits.
pub fn add_gaussian_noise(img: &GrayImage, sigma: f64, seed: u64) -> Result<GrayImage> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Image(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = img
        .pixels
        .iter()
        .map(|&v| {
            (v as f64 + normal.sample(&mut rng))
                .round()
                .clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(img.width, img.height, pixels)
}

/// Deterministic piecewise-smooth scene: a shaded background, a bright disk,
/// a dark rectangle and a soft diagonal band.
pub fn test_image(width: usize, height: usize) -> GrayImage {
    let (w, h) = (width as f64, height as f64);
    let mut pixels = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64 / h, c as f64 / w);
            let mut v = 70.0 + 70.0 * x + 20.0 * y;
            let (dy, dx) = (y - 0.35, x - 0.32);
            if dx * dx + dy * dy < 0.2 * 0.2 {
                v = 215.0;
            }
            if (0.6..0.88).contains(&y) && (0.52..0.9).contains(&x) {
                v = 35.0;
            }
            let band = (x + y - 1.0).abs();
            if band < 0.06 {
                v = 0.5 * v + 0.5 * 180.0;
            }
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        width,
        height,
        pixels,
    }
}
