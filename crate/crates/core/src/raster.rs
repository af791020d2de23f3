//! Raster primitives: grayscale images, binary stroke maps, component labeling
//! and the morphological operations the refinement stages are built from.
//!
//! Binary maps use "dark is stroke" polarity by default. On disk they are
//! single-channel images with values `{0, 255}` where 255 marks a stroke.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit luminance image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension {
                width,
                height,
                reason: "image must be non-empty",
            });
        }
        if values.len() != width * height {
            return Err(Error::Dimension {
                width,
                height,
                reason: "value count does not match width x height",
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Uniform image filled with `value`.
    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Converts interleaved RGB bytes with `0.299R + 0.587G + 0.114B`,
    /// rounded half-up.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::Dimension {
                width,
                height,
                reason: "rgb byte count does not match width x height x 3",
            });
        }
        let values = rgb
            .chunks_exact(3)
            .map(|p| luminance(p[0], p[1], p[2]))
            .collect();
        Self::new(width, height, values)
    }

    /// Loads an 8-bit grayscale or RGB(A) image file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        match img {
            image::DynamicImage::ImageLuma8(buf) => Self::new(w, h, buf.into_raw()),
            other => {
                let rgb = other.to_rgb8();
                Self::from_rgb(w, h, rgb.as_raw())
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer(
            path,
            &self.values,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: u8) {
        self.values[y * self.width + x] = value;
    }
}

fn luminance(r: u8, g: u8, b: u8) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

/// Per-pixel stroke/background mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMap {
    /// All-background map.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn filled(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension {
                width,
                height,
                reason: "bit count does not match width x height",
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Parses rows of `#` (stroke) and `.` (background); handy for fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.len());
        Self::from_fn(width, height, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as background.
    #[inline]
    pub fn get_or_background(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Stroke pixel coordinates in row-major order.
    pub fn stroke_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Loads a single-channel map; values above 127 are strokes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let gray = GrayImage::load(path)?;
        let bits = gray.values().iter().map(|&v| v > 127).collect();
        Self::from_bits(gray.width(), gray.height(), bits)
    }

    /// Writes the map as a grayscale PNG with 255 = stroke.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_gray()?.save(path)
    }

    pub fn to_gray(&self) -> Result<GrayImage> {
        GrayImage::new(
            self.width,
            self.height,
            self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        )
    }

    fn check_same_dims(&self, other: &BinaryMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                a: self.dims(),
                b: other.dims(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &BinaryMap, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// In-place union, used when accumulating many polygon rasters.
    pub fn union_with(&mut self, other: &BinaryMap) -> Result<()> {
        self.check_same_dims(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }
}

/// How the global threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMethod {
    /// Maximum between-class variance over all 8-bit thresholds.
    Otsu,
    /// Fixed threshold `t`: with dark strokes, `value < t` is stroke.
    Fixed(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    DarkIsStroke,
    LightIsStroke,
}

/// Otsu threshold `t` for the rule `value < t`. Returns 0 (nothing below)
/// when no split has positive between-class variance, e.g. uniform images.
/// Ties resolve to the smallest threshold.
pub fn otsu_threshold(img: &GrayImage) -> u8 {
    let mut hist = [0u64; 256];
    for &v in img.values() {
        hist[v as usize] += 1;
    }
    let total = img.values().len() as f64;
    let sum_all: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best_t = 0u8;
    let mut best_var = 0.0f64;
    let mut count_below = 0u64;
    let mut sum_below = 0.0f64;
    // threshold t separates values [0, t) from [t, 255]
    for t in 1..=255usize {
        count_below += hist[t - 1];
        sum_below += (t - 1) as f64 * hist[t - 1] as f64;
        let w0 = count_below as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let mu0 = sum_below / w0;
        let mu1 = (sum_all - sum_below) / w1;
        let var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Global thresholding. With [`Polarity::DarkIsStroke`] a pixel is a stroke
/// iff `value < threshold`; the light polarity mirrors that with
/// `255 - value < threshold`.
pub fn binarize(img: &GrayImage, method: ThresholdMethod, polarity: Polarity) -> BinaryMap {
    let oriented: GrayImage = match polarity {
        Polarity::DarkIsStroke => img.clone(),
        Polarity::LightIsStroke => GrayImage {
            width: img.width,
            height: img.height,
            values: img.values.iter().map(|v| 255 - v).collect(),
        },
    };
    let threshold = match method {
        ThresholdMethod::Otsu => otsu_threshold(&oriented),
        ThresholdMethod::Fixed(t) => t,
    };
    BinaryMap {
        width: img.width,
        height: img.height,
        bits: oriented.values.iter().map(|&v| v < threshold).collect(),
    }
}

/// Majority filter over the `(2r+1)^2` window with clamped borders.
pub fn median_denoise(map: &BinaryMap, radius: usize) -> BinaryMap {
    if radius == 0 || map.bits.is_empty() {
        return map.clone();
    }
    let (w, h) = map.dims();
    let r = radius as i64;
    let window = (2 * radius + 1) * (2 * radius + 1);
    let clamp = |v: i64, hi: usize| v.clamp(0, hi as i64 - 1) as usize;

    // column counts over the clamped vertical window, then slide horizontally
    let mut out = BinaryMap::new(w, h);
    let mut col = vec![0usize; w];
    for y in 0..h {
        for (x, c) in col.iter_mut().enumerate() {
            *c = (-r..=r)
                .filter(|dy| map.get(x, clamp(y as i64 + dy, h)))
                .count();
        }
        for x in 0..w {
            let n: usize = (-r..=r).map(|dx| col[clamp(x as i64 + dx, w)]).sum();
            out.set(x, y, 2 * n > window);
        }
    }
    out
}

/// Square-element erosion; out-of-bounds pixels count as background.
pub fn erode(map: &BinaryMap, radius: usize) -> BinaryMap {
    if radius == 0 {
        return map.clone();
    }
    let (w, h) = map.dims();
    let span = 2 * radius + 1;
    // erosion by a square separates into a horizontal and a vertical pass
    let mut horizontal = BinaryMap::new(w, h);
    for y in 0..h {
        let mut run = 0usize;
        let mut runs = vec![0usize; w];
        for (x, slot) in runs.iter_mut().enumerate() {
            run = if map.get(x, y) { run + 1 } else { 0 };
            *slot = run;
        }
        for x in radius..w.saturating_sub(radius) {
            horizontal.set(x, y, runs[x + radius] >= span);
        }
    }
    let mut out = BinaryMap::new(w, h);
    for x in 0..w {
        let mut run = 0usize;
        let mut runs = vec![0usize; h];
        for (y, slot) in runs.iter_mut().enumerate() {
            run = if horizontal.get(x, y) { run + 1 } else { 0 };
            *slot = run;
        }
        for y in radius..h.saturating_sub(radius) {
            out.set(x, y, runs[y + radius] >= span);
        }
    }
    out
}

/// Square-element dilation, the dual of [`erode`].
pub fn dilate(map: &BinaryMap, radius: usize) -> BinaryMap {
    if radius == 0 {
        return map.clone();
    }
    let (w, h) = map.dims();
    let any_in_window = |prefix: &[usize], i: usize, n: usize| {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius + 1).min(n);
        prefix[hi] > prefix[lo]
    };
    let mut horizontal = BinaryMap::new(w, h);
    let mut prefix = vec![0usize; w.max(h) + 1];
    for y in 0..h {
        for x in 0..w {
            prefix[x + 1] = prefix[x] + map.get(x, y) as usize;
        }
        for x in 0..w {
            horizontal.set(x, y, any_in_window(&prefix, x, w));
        }
    }
    let mut out = BinaryMap::new(w, h);
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + horizontal.get(x, y) as usize;
        }
        for y in 0..h {
            out.set(x, y, any_in_window(&prefix, y, h));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Component ids per pixel; 0 is background, components are `1..=count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    count: u32,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn count(&self) -> usize {
        self.count as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count per component; index 0 holds component 1.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.count as usize];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }

    pub fn component_mask(&self, label: u32) -> BinaryMap {
        BinaryMap {
            width: self.width,
            height: self.height,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }
}

/// Labels maximal connected stroke sets in first-encountered row-major order.
pub fn connected_components(map: &BinaryMap, connectivity: Connectivity) -> LabelMap {
    let (w, h) = map.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !map.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = ((idx % w) as i64, (idx / w) as i64);
            for &(dx, dy) in connectivity.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let n = ny as usize * w + nx as usize;
                if map.bits[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    LabelMap {
        width: w,
        height: h,
        labels,
        count: next,
    }
}

pub fn mask_and(a: &BinaryMap, b: &BinaryMap) -> Result<BinaryMap> {
    a.zip_with(b, |x, y| x && y)
}

pub fn mask_subtract(a: &BinaryMap, b: &BinaryMap) -> Result<BinaryMap> {
    a.zip_with(b, |x, y| x && !y)
}

pub fn mask_or(a: &BinaryMap, b: &BinaryMap) -> Result<BinaryMap> {
    a.zip_with(b, |x, y| x || y)
}

#[cfg(test)]
mod tests {
    use super::*;

    // independent Otsu: enumerate every threshold, recompute class stats from scratch
    fn otsu_oracle(values: &[u8]) -> u8 {
        let mut best = (0u8, 0.0f64);
        for t in 0..=255u16 {
            let (lo, hi): (Vec<f64>, Vec<f64>) = {
                let lo = values
                    .iter()
                    .filter(|&&v| (v as u16) < t)
                    .map(|&v| v as f64);
                let hi = values
                    .iter()
                    .filter(|&&v| (v as u16) >= t)
                    .map(|&v| v as f64);
                (lo.collect(), hi.collect())
            };
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            let var = lo.len() as f64 * hi.len() as f64 * (m0 - m1).powi(2);
            if var > best.1 {
                best = (t as u8, var);
            }
        }
        best.0
    }

    #[test]
    fn uniform_white_has_no_strokes() {
        let img = GrayImage::filled(4, 3, 255).unwrap();
        let map = binarize(&img, ThresholdMethod::Otsu, Polarity::DarkIsStroke);
        assert!(map.is_empty());
        assert_eq!(map.dims(), (4, 3));
    }

    #[test]
    fn otsu_two_by_two() {
        let img = GrayImage::new(2, 2, vec![10, 240, 12, 250]).unwrap();
        let t = otsu_threshold(&img);
        assert_eq!(t, otsu_oracle(img.values()));
        let map = binarize(&img, ThresholdMethod::Otsu, Polarity::DarkIsStroke);
        assert_eq!(map.bits(), &[true, false, true, false]);
    }

    #[test]
    fn otsu_matches_oracle_on_varied_histograms() {
        let samples: Vec<Vec<u8>> = vec![
            vec![0, 0, 0, 255, 255],
            vec![30, 31, 32, 100, 200, 201, 199],
            (0..=255).collect(),
            vec![5, 5, 5, 5, 6],
        ];
        for s in samples {
            let img = GrayImage::new(s.len(), 1, s.clone()).unwrap();
            assert_eq!(otsu_threshold(&img), otsu_oracle(&s), "{s:?}");
        }
    }

    #[test]
    fn fixed_threshold_is_strict() {
        let img = GrayImage::new(3, 1, vec![127, 128, 129]).unwrap();
        let map = binarize(&img, ThresholdMethod::Fixed(128), Polarity::DarkIsStroke);
        assert_eq!(map.bits(), &[true, false, false]);
        let light = binarize(&img, ThresholdMethod::Fixed(128), Polarity::LightIsStroke);
        assert_eq!(light.bits(), &[false, true, true]);
    }

    #[test]
    fn empty_image_rejected() {
        assert!(matches!(
            GrayImage::new(0, 3, vec![]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn rgb_luminance_rounds_half_up() {
        // 0.299 * 1 + 0.587 * 1 + 0.114 * 1 = 1.0; 0.5 rounds up
        let img = GrayImage::from_rgb(2, 1, &[1, 1, 1, 0, 0, 5]).unwrap();
        // 0.114 * 5 = 0.57 -> 1
        assert_eq!(img.values(), &[1, 1]);
        let img = GrayImage::from_rgb(1, 1, &[255, 0, 0]).unwrap();
        assert_eq!(img.values(), &[76]);
    }

    fn majority_oracle(map: &BinaryMap, r: i64) -> BinaryMap {
        let (w, h) = map.dims();
        BinaryMap::from_fn(w, h, |x, y| {
            let mut n = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let sy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    n += map.get(sx, sy) as i64;
                }
            }
            2 * n > (2 * r + 1) * (2 * r + 1)
        })
    }

    #[test]
    fn median_cases() {
        let speck = BinaryMap::from_ascii(&[".....", ".....", "..#..", ".....", "....."]);
        assert_eq!(median_denoise(&speck, 0), speck);
        assert!(median_denoise(&speck, 1).is_empty());

        let block = BinaryMap::from_fn(7, 7, |x, y| (1..6).contains(&x) && (1..6).contains(&y));
        let out = median_denoise(&block, 1);
        assert_eq!(out, majority_oracle(&block, 1));
        for y in 2..5 {
            for x in 2..5 {
                assert!(out.get(x, y));
            }
        }
    }

    fn erode_oracle(map: &BinaryMap, r: i64) -> BinaryMap {
        let (w, h) = map.dims();
        BinaryMap::from_fn(w, h, |x, y| {
            (-r..=r)
                .all(|dy| (-r..=r).all(|dx| map.get_or_background(x as i64 + dx, y as i64 + dy)))
        })
    }

    #[test]
    fn erode_cases() {
        let block = BinaryMap::from_ascii(&[".....", ".###.", ".###.", ".###.", "....."]);
        assert_eq!(erode(&block, 0), block);
        let e = erode(&block, 1);
        assert_eq!(e.stroke_pixels().collect::<Vec<_>>(), vec![(2, 2)]);
        assert_eq!(e, erode_oracle(&block, 1));

        let line = BinaryMap::from_ascii(&["......", "######", "......"]);
        assert!(erode(&line, 1).is_empty());
    }

    #[test]
    fn erode_matches_oracle_on_irregular_map() {
        let m = BinaryMap::from_fn(23, 17, |x, y| (x * 7 + y * 3) % 5 != 0 || (x + y) % 11 == 0);
        for r in 0..4 {
            assert_eq!(erode(&m, r), erode_oracle(&m, r as i64), "radius {r}");
        }
    }

    #[test]
    fn dilate_is_dual_of_erode() {
        let m = BinaryMap::from_fn(19, 13, |x, y| (x * 5 + y * 7) % 9 == 0);
        let d = dilate(&m, 1);
        let oracle = BinaryMap::from_fn(19, 13, |x, y| {
            (-1..=1).any(|dy| (-1..=1).any(|dx| m.get_or_background(x as i64 + dx, y as i64 + dy)))
        });
        assert_eq!(d, oracle);
    }

    #[test]
    fn components_cases() {
        assert_eq!(
            connected_components(&BinaryMap::new(3, 3), Connectivity::Eight).count(),
            0
        );
        let diag = BinaryMap::from_ascii(&["#.", ".#"]);
        assert_eq!(connected_components(&diag, Connectivity::Eight).count(), 1);
        assert_eq!(connected_components(&diag, Connectivity::Four).count(), 2);
        assert_eq!(
            connected_components(&BinaryMap::filled(4, 4), Connectivity::Four).count(),
            1
        );
    }

    #[test]
    fn component_labels_follow_scan_order() {
        let m = BinaryMap::from_ascii(&["..#..#", "#....#", "#...##"]);
        let l = connected_components(&m, Connectivity::Eight);
        assert_eq!(l.count(), 3);
        assert_eq!(l.label(2, 0), 1);
        assert_eq!(l.label(5, 0), 2);
        assert_eq!(l.label(0, 1), 3);
        assert_eq!(l.label(4, 2), 2);
    }

    #[test]
    fn boolean_ops() {
        let a = BinaryMap::from_fn(6, 5, |x, y| (x + y) % 2 == 0);
        let inv = a.invert();
        assert_eq!(mask_and(&a, &a).unwrap(), a);
        assert!(mask_and(&a, &BinaryMap::new(6, 5)).unwrap().is_empty());
        assert!(mask_and(&a, &inv).unwrap().is_empty());
        assert_eq!(mask_subtract(&a, &BinaryMap::new(6, 5)).unwrap(), a);
        assert!(mask_subtract(&a, &a).unwrap().is_empty());
        assert!(matches!(
            mask_and(&a, &BinaryMap::new(5, 5)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(mask_subtract(&a, &BinaryMap::new(6, 4)).is_err());
    }

    #[test]
    fn line_minus_middle_third() {
        let line = BinaryMap::from_ascii(&["#########"]);
        let mid = BinaryMap::from_ascii(&["...###..."]);
        let rest = mask_subtract(&line, &mid).unwrap();
        assert_eq!(connected_components(&rest, Connectivity::Eight).count(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pair() -> impl Strategy<Value = (BinaryMap, BinaryMap)> {
            (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
                let bits = || proptest::collection::vec(any::<bool>(), w * h);
                (bits(), bits()).prop_map(move |(a, b)| {
                    (
                        BinaryMap::from_bits(w, h, a).unwrap(),
                        BinaryMap::from_bits(w, h, b).unwrap(),
                    )
                })
            })
        }

        proptest! {
            #[test]
            fn binarize_keeps_dimensions(
                (w, h, values) in (1usize..16, 1usize..16)
                    .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h))),
                t in any::<u8>(),
            ) {
                let img = GrayImage::new(w, h, values).unwrap();
                for method in [ThresholdMethod::Otsu, ThresholdMethod::Fixed(t)] {
                    prop_assert_eq!(binarize(&img, method, Polarity::DarkIsStroke).dims(), (w, h));
                }
            }

            #[test]
            fn erosion_shrinks_monotonically((a, _) in pair()) {
                let mut prev = a.clone();
                for r in 0..4 {
                    let e = erode(&a, r);
                    prop_assert_eq!(mask_subtract(&e, &prev).unwrap().count(), 0);
                    prev = e;
                }
            }

            #[test]
            fn mask_algebra((a, b) in pair()) {
                let ab = mask_and(&a, &b).unwrap();
                prop_assert_eq!(&ab, &mask_and(&b, &a).unwrap());
                prop_assert_eq!(&mask_and(&a, &a).unwrap(), &a);
                prop_assert_eq!(&mask_and(&ab, &a).unwrap(), &ab);
                let rest = mask_subtract(&a, &b).unwrap();
                prop_assert_eq!(mask_and(&ab, &rest).unwrap().count(), 0);
                prop_assert_eq!(&mask_or(&ab, &rest).unwrap(), &a);
            }

            #[test]
            fn components_partition_the_strokes((a, _) in pair()) {
                let labels = connected_components(&a, Connectivity::Eight);
                let mut union = BinaryMap::new(a.width(), a.height());
                let mut total = 0;
                for l in 1..=labels.count() as u32 {
                    let m = labels.component_mask(l);
                    prop_assert_eq!(mask_and(&m, &union).unwrap().count(), 0);
                    total += m.count();
                    union.union_with(&m).unwrap();
                }
                prop_assert_eq!(total, a.count());
                prop_assert_eq!(&union, &a);
            }
        }
    }
}
