//! Object images, pattern frames and gray-level regions.
//!
//! Pixels are stored row-major in flat arrays and addressed by a single index
//! `n`; every per-pixel formula in the crate uses that index.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Object transmittance map. `0` is opaque, `1` fully transparent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(values.len()) {
            return Err(Error::InvalidDimensions { width, height, len: values.len() });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::GrayOutOfRange { index, value });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width.saturating_mul(height)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixel count `M`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sum(&self) -> f64 {
        crate::sum::pairwise_sum(&self.values)
    }

    pub fn sum_squares(&self) -> f64 {
        let squares: Vec<f64> = self.values.iter().map(|d| d * d).collect();
        crate::sum::pairwise_sum(&squares)
    }

    /// Copy of the image with pixel `n` set to `value`.
    pub fn with_pixel(&self, n: usize, value: f64) -> Result<Self> {
        let mut values = self.values.clone();
        match values.get_mut(n) {
            Some(v) => *v = value,
            None => return Err(Error::LengthMismatch { expected: self.len(), found: n + 1 }),
        }
        Self::new(self.width, self.height, values)
    }
}

/// One pattern of pixel intensities `I_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternFrame {
    values: Vec<f64>,
}

impl PatternFrame {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidIntensity { index, value });
        }
        Ok(Self { values })
    }

    /// Wraps transformed values (`F = f(I)`), which may be negative (`ln`).
    pub(crate) fn from_transformed(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Partition of pixel indices by gray level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GrayRegionIndex {
    levels: Vec<f64>,
    members: Vec<Vec<usize>>,
    pixels: usize,
}

impl GrayRegionIndex {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn members(&self, region: usize) -> &[usize] {
        &self.members[region]
    }

    pub fn regions(&self) -> impl Iterator<Item = (f64, &[usize])> + '_ {
        self.levels
            .iter()
            .copied()
            .zip(self.members.iter().map(Vec::as_slice))
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Total pixel count `M` covered by the partition.
    pub fn pixel_count(&self) -> usize {
        self.pixels
    }

    /// Share of the image occupied by each region, in level order.
    pub fn fractions(&self) -> Vec<f64> {
        self.members
            .iter()
            .map(|m| m.len() as f64 / self.pixels as f64)
            .collect()
    }

    /// Rebuilds a value array with every pixel set to its region level.
    pub fn to_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pixels];
        for (level, members) in self.regions() {
            for &n in members {
                out[n] = level;
            }
        }
        out
    }
}

/// Groups pixels into gray regions.
///
/// Pixels are visited in increasing value order; a pixel joins the current
/// region while its value is within `tolerance` of the region's smallest
/// value. Each level is the mean of its merged values.
pub fn build_region_index(image: &GrayImage, tolerance: f64) -> GrayRegionIndex {
    let tolerance = if tolerance.is_finite() { tolerance.max(0.0) } else { 0.0 };
    let values = image.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));

    let mut levels = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut start = f64::NAN;
    let mut acc = 0.0;
    for &n in &order {
        let v = values[n];
        if members.is_empty() || v - start > tolerance {
            if let Some(last) = members.last() {
                levels.push(start + acc / last.len() as f64);
            }
            members.push(Vec::new());
            start = v;
            acc = 0.0;
        }
        acc += v - start;
        members.last_mut().expect("region pushed above").push(n);
    }
    if let Some(last) = members.last() {
        levels.push(start + acc / last.len() as f64);
    }
    for m in &mut members {
        m.sort_unstable();
    }
    GrayRegionIndex { levels, members, pixels: values.len() }
}

/// Spatial arrangement of a synthetic test card.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CardLayout {
    /// Contiguous row-major runs, one per level.
    Stripes,
    /// Concentric rectangles; the first level is the outer background.
    NestedRects,
}

impl core::str::FromStr for CardLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stripes" => Ok(CardLayout::Stripes),
            "nested-rects" | "nested" => Ok(CardLayout::NestedRects),
            other => Err(Error::InvalidParameter(alloc::format!("unknown card layout '{other}' (stripes, nested-rects)"))),
        }
    }
}

impl core::fmt::Display for CardLayout {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            CardLayout::Stripes => "stripes",
            CardLayout::NestedRects => "nested-rects",
        })
    }
}

/// Synthetic object with equal area per level.
pub fn make_test_card(width: usize, height: usize, levels: &[f64], layout: CardLayout) -> Result<GrayImage> {
    let fractions = vec![1.0 / levels.len().max(1) as f64; levels.len()];
    make_weighted_card(width, height, levels, &fractions, layout)
}

/// Synthetic object where level `i` covers roughly `fractions[i]` of the
/// pixels. Fractions are normalized; every level gets at least one pixel.
pub fn make_weighted_card(
    width: usize,
    height: usize,
    levels: &[f64],
    fractions: &[f64],
    layout: CardLayout,
) -> Result<GrayImage> {
    let total = width.checked_mul(height).unwrap_or(0);
    if total == 0 {
        return Err(Error::InvalidDimensions { width, height, len: 0 });
    }
    if levels.is_empty() {
        return Err(Error::InvalidParameter("test card needs at least one level".into()));
    }
    if fractions.len() != levels.len() {
        return Err(Error::LengthMismatch { expected: levels.len(), found: fractions.len() });
    }
    if levels.len() > total {
        return Err(Error::InvalidParameter("more levels than pixels".into()));
    }
    if let Some((index, &value)) = levels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::GrayOutOfRange { index, value });
    }
    let weight: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) || weight <= 0.0 {
        return Err(Error::InvalidParameter("card fractions must be positive".into()));
    }
    let counts = apportion(total, fractions, weight);

    let values = match layout {
        CardLayout::Stripes => {
            let mut values = Vec::with_capacity(total);
            for (&level, &count) in levels.iter().zip(&counts) {
                values.extend(core::iter::repeat_n(level, count));
            }
            values
        }
        CardLayout::NestedRects => nested_rects(width, height, levels, &counts),
    };
    GrayImage::new(width, height, values)
}

/// Largest-remainder split of `total` pixels, at least one per level.
fn apportion(total: usize, fractions: &[f64], weight: f64) -> Vec<usize> {
    let k = fractions.len();
    let spare = total - k;
    let exact: Vec<f64> = fractions.iter().map(|f| f / weight * total as f64).collect();
    let mut counts: Vec<usize> = exact
        .iter()
        .map(|e| (libm::floor(*e) as usize).clamp(1, total))
        .collect();
    let mut assigned: usize = counts.iter().sum();
    while assigned > total {
        let i = (0..k).max_by_key(|&i| counts[i]).expect("nonempty");
        counts[i] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut i = 0;
    while assigned < total {
        counts[order[i % k]] += 1;
        assigned += 1;
        i += 1;
    }
    debug_assert!(spare + k == total);
    counts
}

/// Concentric rectangles whose ring areas follow `counts`.
///
/// Region `i` is the ring between rectangle `i` and rectangle `i + 1`, where
/// rectangle `i` is centred with area close to the cumulative count from `i`
/// inward. Leftover mismatch is fixed by relabelling pixels along the raster
/// order of the innermost rectangle so the counts are exact.
fn nested_rects(width: usize, height: usize, levels: &[f64], counts: &[usize]) -> Vec<f64> {
    let total = width * height;
    let mut label = vec![0usize; total];
    let mut inner_area = total;
    for i in 1..levels.len() {
        inner_area -= counts[i - 1];
        let scale = libm::sqrt(inner_area as f64 / total as f64);
        let w = (libm::round(width as f64 * scale) as usize).clamp(1, width);
        let h = (libm::round(height as f64 * scale) as usize).clamp(1, height);
        let x0 = (width - w) / 2;
        let y0 = (height - h) / 2;
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                let n = y * width + x;
                if label[n] == i - 1 {
                    label[n] = i;
                }
            }
        }
    }
    // Exact counts: move surplus pixels outward / deficit inward, scanning
    // from the image centre.
    let centre = (height / 2) * width + width / 2;
    let mut by_distance: Vec<usize> = (0..total).collect();
    by_distance.sort_by_key(|&n| {
        let (y, x) = (n / width, n % width);
        let (cy, cx) = (centre / width, centre % width);
        let dy = y.abs_diff(cy);
        let dx = x.abs_diff(cx);
        (dy.max(dx), dy + dx, n)
    });
    let mut have = vec![0usize; levels.len()];
    for &l in &label {
        have[l] += 1;
    }
    for i in 0..levels.len() {
        while have[i] > counts[i] && i + 1 < levels.len() {
            // promote the innermost pixel of region i to region i+1
            let n = *by_distance.iter().find(|&&n| label[n] == i).expect("surplus exists");
            label[n] = i + 1;
            have[i] -= 1;
            have[i + 1] += 1;
        }
        while have[i] < counts[i] && i + 1 < levels.len() {
            // demote the outermost pixel of the inner regions to region i
            let n = *by_distance
                .iter()
                .rev()
                .find(|&&n| label[n] > i)
                .expect("deficit can be filled");
            have[label[n]] -= 1;
            label[n] = i;
            have[i] += 1;
        }
    }
    label.into_iter().map(|l| levels[l]).collect()
}
