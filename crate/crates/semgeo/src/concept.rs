//! Concept-influence scoring over explanation and segmentation rasters:
//! top-k masks, per-concept masks with optional dilation, the tki and ci
//! scores, and their aggregation into spatial error intervals.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Raster of per-pixel importance values, already reduced to one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMap {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl ExplanationMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Format(format!(
                "explanation raster holds {} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }
}

/// Raster of values before channel reduction, stored interleaved per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    width: usize,
    height: usize,
    channels: usize,
    values: Vec<f32>,
}

impl ChannelStack {
    pub fn new(width: usize, height: usize, channels: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter(
                "channel stack needs at least one channel".into(),
            ));
        }
        if values.len() != width * height * channels {
            return Err(Error::Format(format!(
                "channel stack holds {} values for {width}x{height}x{channels}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(bad));
        }
        Ok(Self {
            width,
            height,
            channels,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Per-pixel maximum over the channel dimension.
pub fn channel_max(stack: &ChannelStack) -> ExplanationMap {
    let pixels = stack.width * stack.height;
    let mut values = Vec::with_capacity(pixels);
    for p in 0..pixels {
        let offset = p * stack.channels;
        let v = stack.values[offset..offset + stack.channels]
            .iter()
            .copied()
            .fold(f32::NEG_INFINITY, f32::max);
        values.push(v);
    }
    ExplanationMap {
        width: stack.width,
        height: stack.height,
        values,
    }
}

/// Raster of per-pixel concept labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl SegmentationMap {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Format(format!(
                "segmentation raster holds {} labels for {width}x{height}",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    /// Distinct labels present, ascending.
    pub fn distinct_labels(&self) -> Vec<u16> {
        let mut labels: Vec<u16> = self.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        labels
    }
}

/// Binary w×h raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ConceptMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Format(format!(
                "mask holds {} bits for {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &ConceptMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self
                .bits
                .iter()
                .zip(&other.bits)
                .all(|(&a, &b)| !a || b)
    }
}

/// Binary mask of the k largest explanation values. Ties at the cut value are
/// resolved towards the smaller row-major pixel index, so exactly `k` bits
/// are always set.
pub fn top_k_mask(e: &ExplanationMap, k: usize) -> Result<ConceptMask> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if k > e.pixels() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {}x{} pixel count",
            e.width, e.height
        )));
    }
    let mut order: Vec<usize> = (0..e.pixels()).collect();
    order.sort_unstable_by(|&a, &b| {
        e.values[b]
            .partial_cmp(&e.values[a])
            .expect("values validated finite")
            .then(a.cmp(&b))
    });
    let mut bits = vec![false; e.pixels()];
    for &index in order.iter().take(k) {
        bits[index] = true;
    }
    Ok(ConceptMask {
        width: e.width,
        height: e.height,
        bits,
    })
}

/// Indicator mask of one concept in a segmentation map.
pub fn concept_mask(seg: &SegmentationMap, concept: u16) -> ConceptMask {
    ConceptMask {
        width: seg.width,
        height: seg.height,
        bits: seg.labels.iter().map(|&l| l == concept).collect(),
    }
}

/// Shape of the neighborhood a dilation grows into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StructuringElement {
    /// 3x3 square applied `beta` times; equivalently Chebyshev distance <= beta.
    #[default]
    Chebyshev3x3,
    /// Euclidean disk of radius `beta` applied once.
    EuclideanDisk,
}

/// Grows the mask by `beta` pixels around its boundary. `beta = 0` returns
/// the input unchanged; the result always contains the input.
pub fn dilate(mask: &ConceptMask, beta: u32) -> ConceptMask {
    dilate_with(mask, beta, StructuringElement::Chebyshev3x3)
}

pub fn dilate_with(mask: &ConceptMask, beta: u32, element: StructuringElement) -> ConceptMask {
    if beta == 0 {
        return mask.clone();
    }
    match element {
        StructuringElement::Chebyshev3x3 => {
            let mut current = mask.clone();
            for _ in 0..beta {
                current = dilate_once_3x3(&current);
            }
            current
        }
        StructuringElement::EuclideanDisk => dilate_disk(mask, beta),
    }
}

fn dilate_once_3x3(mask: &ConceptMask) -> ConceptMask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let mut bits = vec![false; mask.bits.len()];
    for y in 0..h {
        for x in 0..w {
            if !mask.bits[(y * w + x) as usize] {
                continue;
            }
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && nx < w && ny >= 0 && ny < h {
                        bits[(ny * w + nx) as usize] = true;
                    }
                }
            }
        }
    }
    ConceptMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

fn dilate_disk(mask: &ConceptMask, beta: u32) -> ConceptMask {
    let (w, h) = (mask.width as isize, mask.height as isize);
    let r = beta as isize;
    let r2 = (beta as i64) * (beta as i64);
    let mut bits = vec![false; mask.bits.len()];
    for y in 0..h {
        for x in 0..w {
            if !mask.bits[(y * w + x) as usize] {
                continue;
            }
            for dy in -r..=r {
                for dx in -r..=r {
                    if (dx * dx + dy * dy) as i64 > r2 {
                        continue;
                    }
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && nx < w && ny >= 0 && ny < h {
                        bits[(ny * w + nx) as usize] = true;
                    }
                }
            }
        }
    }
    ConceptMask {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

/// Fraction of the k top pixels falling inside the concept mask.
pub fn tki(mask: &ConceptMask, topk: &ConceptMask, k: usize) -> Result<f64> {
    if mask.width != topk.width || mask.height != topk.height {
        return Err(Error::DimensionMismatch(
            mask.width,
            mask.height,
            topk.width,
            topk.height,
        ));
    }
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let set = topk.count_ones();
    if set != k {
        return Err(Error::InvalidParameter(format!(
            "top-k mask has {set} bits set, expected exactly {k}"
        )));
    }
    let both = mask
        .bits
        .iter()
        .zip(&topk.bits)
        .filter(|(&a, &b)| a && b)
        .count();
    Ok(both as f64 / k as f64)
}

/// Fraction of image pixels covered by the mask.
pub fn relative_size(mask: &ConceptMask) -> f64 {
    mask.count_ones() as f64 / (mask.width * mask.height) as f64
}

/// Parameters of the concept-influence computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiParams {
    /// Number of top explanation pixels considered.
    pub k: usize,
    /// Dilation radius applied to concept masks, in pixels.
    pub beta: u32,
    /// Minimum relative concept size; smaller concepts are filtered out.
    pub s_min: f64,
    pub element: StructuringElement,
}

impl Default for CiParams {
    fn default() -> Self {
        Self {
            k: 1000,
            beta: 0,
            s_min: 0.05,
            element: StructuringElement::Chebyshev3x3,
        }
    }
}

/// The three scores computed for one (image, concept) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiScore {
    pub tki: f64,
    pub relative_size: f64,
    pub ci: f64,
}

/// Computes tki, relative size, and ci for one concept of one image.
/// Returns `None` when the (dilated) concept covers less than `s_min` of the
/// image and is therefore filtered from the analysis.
pub fn ci_score(
    e: &ExplanationMap,
    seg: &SegmentationMap,
    concept: u16,
    params: &CiParams,
) -> Result<Option<CiScore>> {
    if e.width != seg.width || e.height != seg.height {
        return Err(Error::DimensionMismatch(
            e.width, e.height, seg.width, seg.height,
        ));
    }
    if !(params.s_min > 0.0 && params.s_min < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "s_min must lie in (0, 1), got {}",
            params.s_min
        )));
    }
    let mask = dilate_with(&concept_mask(seg, concept), params.beta, params.element);
    let s_bar = relative_size(&mask);
    if s_bar < params.s_min {
        return Ok(None);
    }
    let topk = top_k_mask(e, params.k)?;
    let tki = tki(&mask, &topk, params.k)?;
    Ok(Some(CiScore {
        tki,
        relative_size: s_bar,
        ci: tki / s_bar,
    }))
}

/// Half-open spatial error interval `[lo_km, hi_km)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo_km: f64,
    pub hi_km: f64,
}

impl Interval {
    pub fn new(lo_km: f64, hi_km: f64) -> Result<Self> {
        if !(lo_km.is_finite() && hi_km.is_finite()) || lo_km < 0.0 || hi_km <= lo_km {
            return Err(Error::InvalidIntervals(format!(
                "bad interval [{lo_km}, {hi_km})"
            )));
        }
        Ok(Self { lo_km, hi_km })
    }

    pub fn contains(&self, km: f64) -> bool {
        self.lo_km <= km && km < self.hi_km
    }

    fn key(&self) -> (u64, u64) {
        (self.lo_km.to_bits(), self.hi_km.to_bits())
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}-{})", self.lo_km, self.hi_km)
    }
}

/// The default spatial error intervals (km).
pub fn standard_intervals() -> Vec<Interval> {
    vec![
        Interval {
            lo_km: 0.0,
            hi_km: 25.0,
        },
        Interval {
            lo_km: 25.0,
            hi_km: 750.0,
        },
        Interval {
            lo_km: 750.0,
            hi_km: 2500.0,
        },
    ]
}

fn validate_intervals(intervals: &[Interval]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::InvalidIntervals("interval list is empty".into()));
    }
    for pair in intervals.windows(2) {
        if pair[1].lo_km < pair[0].hi_km {
            return Err(Error::InvalidIntervals(format!(
                "{} overlaps or precedes {}",
                pair[1], pair[0]
            )));
        }
    }
    Ok(())
}

/// One scored (image, concept) pair with the prediction error used for
/// binning.
#[derive(Debug, Clone, PartialEq)]
pub struct CiRecord {
    pub sample_id: String,
    pub concept: u16,
    pub relative_size: f64,
    pub tki: f64,
    pub ci: f64,
    pub gcd_error_km: f64,
}

/// Median and mean ci of one concept within one error interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CiAggregate {
    pub concept: u16,
    pub interval: Interval,
    pub count: usize,
    pub median: f64,
    pub mean: f64,
}

fn median_of_sorted(values: &[f64]) -> f64 {
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Bins records into (concept, interval) groups and reports median and mean
/// ci for every group with at least `min_images` records. Output is sorted by
/// concept, then interval.
pub fn aggregate(
    records: &[CiRecord],
    intervals: &[Interval],
    min_images: usize,
) -> Result<Vec<CiAggregate>> {
    validate_intervals(intervals)?;
    let mut groups: BTreeMap<(u16, usize), Vec<f64>> = BTreeMap::new();
    for record in records {
        if let Some(slot) = intervals.iter().position(|iv| iv.contains(record.gcd_error_km)) {
            groups.entry((record.concept, slot)).or_default().push(record.ci);
        }
    }
    let mut out = Vec::new();
    for ((concept, slot), mut cis) in groups {
        if cis.len() < min_images {
            continue;
        }
        cis.sort_by(|a, b| a.partial_cmp(b).expect("ci values are finite"));
        let mean = cis.iter().sum::<f64>() / cis.len() as f64;
        out.push(CiAggregate {
            concept,
            interval: intervals[slot],
            count: cis.len(),
            median: median_of_sorted(&cis),
            mean,
        });
    }
    Ok(out)
}

/// Per-(concept, interval) difference of aggregated medians between a dilated
/// and an undilated run.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaDelta {
    pub concept: u16,
    pub interval: Interval,
    pub delta_median: f64,
}

/// delta = median(dilated) - median(undilated), keyed by (concept, interval).
/// The two aggregate lists must cover exactly the same keys.
pub fn beta_delta(dilated: &[CiAggregate], undilated: &[CiAggregate]) -> Result<Vec<BetaDelta>> {
    let keyed: BTreeMap<(u16, (u64, u64)), &CiAggregate> = undilated
        .iter()
        .map(|a| ((a.concept, a.interval.key()), a))
        .collect();
    let mut missing: Vec<String> = Vec::new();
    let mut seen: Vec<(u16, (u64, u64))> = Vec::new();
    let mut out = Vec::new();
    for a in dilated {
        let key = (a.concept, a.interval.key());
        match keyed.get(&key) {
            Some(b) => {
                seen.push(key);
                out.push(BetaDelta {
                    concept: a.concept,
                    interval: a.interval,
                    delta_median: a.median - b.median,
                });
            }
            None => missing.push(format!("concept {} {}", a.concept, a.interval)),
        }
    }
    for a in undilated {
        let key = (a.concept, a.interval.key());
        if !seen.contains(&key) {
            missing.push(format!("concept {} {}", a.concept, a.interval));
        }
    }
    if !missing.is_empty() {
        return Err(Error::KeyMismatch(missing.join(", ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emap(width: usize, height: usize, values: Vec<f32>) -> ExplanationMap {
        ExplanationMap::new(width, height, values).unwrap()
    }

    fn mask_from(width: usize, height: usize, ones: &[(usize, usize)]) -> ConceptMask {
        let mut bits = vec![false; width * height];
        for &(x, y) in ones {
            bits[y * width + x] = true;
        }
        ConceptMask::new(width, height, bits).unwrap()
    }

    fn random_emap(rng: &mut impl Rng, width: usize, height: usize) -> ExplanationMap {
        emap(
            width,
            height,
            (0..width * height).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    fn random_mask(rng: &mut impl Rng, width: usize, height: usize) -> ConceptMask {
        ConceptMask::new(
            width,
            height,
            (0..width * height).map(|_| rng.gen_bool(0.3)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn channel_max_identity_on_single_channel() {
        let stack = ChannelStack::new(2, 2, 1, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let e = channel_max(&stack);
        assert_eq!(e.values(), &[1.0, -2.0, 3.0, 0.5]);
    }

    #[test]
    fn channel_max_takes_per_pixel_maximum() {
        let stack = ChannelStack::new(1, 1, 3, vec![-1.0, 0.5, 0.2]).unwrap();
        let e = channel_max(&stack);
        assert_eq!(e.values(), &[0.5]);
    }

    #[test]
    fn channel_max_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (w, h, d) = (8, 8, 3);
        let values: Vec<f32> = (0..w * h * d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let stack = ChannelStack::new(w, h, d, values.clone()).unwrap();
        let e = channel_max(&stack);
        for y in 0..h {
            for x in 0..w {
                let mut best = f32::NEG_INFINITY;
                for c in 0..d {
                    best = best.max(values[(y * w + x) * d + c]);
                }
                assert_eq!(e.values()[y * w + x], best);
            }
        }
    }

    #[test]
    fn non_finite_rasters_are_rejected() {
        assert!(ExplanationMap::new(1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(ChannelStack::new(1, 1, 2, vec![0.0, f32::INFINITY]).is_err());
    }

    #[test]
    fn full_top_k_is_all_ones() {
        let e = emap(3, 2, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mask = top_k_mask(&e, 6).unwrap();
        assert_eq!(mask.count_ones(), 6);
    }

    #[test]
    fn top_k_of_decreasing_raster_takes_leading_pixels() {
        let e = emap(4, 2, (0..8).map(|i| (8 - i) as f32).collect());
        let mask = top_k_mask(&e, 5).unwrap();
        assert_eq!(
            mask.bits(),
            &[true, true, true, true, true, false, false, false]
        );
    }

    #[test]
    fn constant_raster_ties_break_row_major() {
        let e = emap(3, 3, vec![7.0; 9]);
        let mask = top_k_mask(&e, 3).unwrap();
        let mut expected = [false; 9];
        expected[0] = true;
        expected[1] = true;
        expected[2] = true;
        assert_eq!(mask.bits(), &expected[..]);
    }

    #[test]
    fn top_k_matches_stable_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let e = random_emap(&mut rng, 16, 16);
            let k = rng.gen_range(1..=256);
            let mask = top_k_mask(&e, k).unwrap();
            // oracle: stable sort on descending value keeps index order on ties
            let mut order: Vec<usize> = (0..256).collect();
            order.sort_by(|&a, &b| e.values()[b].partial_cmp(&e.values()[a]).unwrap());
            let mut expected = vec![false; 256];
            for &i in order.iter().take(k) {
                expected[i] = true;
            }
            assert_eq!(mask.bits(), &expected[..], "k = {k}");
        }
    }

    #[test]
    fn oversized_k_is_an_error() {
        let e = emap(2, 2, vec![0.0; 4]);
        assert!(top_k_mask(&e, 5).is_err());
        assert!(top_k_mask(&e, 0).is_err());
    }

    #[test]
    fn concept_mask_selects_exact_label() {
        let seg = SegmentationMap::new(2, 2, vec![3, 3, 3, 3]).unwrap();
        assert_eq!(concept_mask(&seg, 3).count_ones(), 4);
        assert_eq!(concept_mask(&seg, 4).count_ones(), 0);
    }

    #[test]
    fn checkerboard_masks_complement_each_other() {
        let labels: Vec<u16> = (0..64).map(|i| ((i % 8 + i / 8) % 2) as u16).collect();
        let seg = SegmentationMap::new(8, 8, labels).unwrap();
        let zero = concept_mask(&seg, 0);
        let one = concept_mask(&seg, 1);
        for y in 0..8 {
            for x in 0..8 {
                // loop oracle over the generating expression
                let expect = ((x + y) % 2) as u16;
                assert_eq!(zero.get(x, y), expect == 0);
                assert_eq!(one.get(x, y), expect == 1);
            }
        }
    }

    #[test]
    fn dilation_by_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mask = random_mask(&mut rng, 16, 16);
        assert_eq!(dilate(&mask, 0), mask);
    }

    #[test]
    fn single_interior_pixel_grows_to_3x3_block() {
        let mask = mask_from(5, 5, &[(2, 2)]);
        let grown = dilate(&mask, 1);
        assert_eq!(grown.count_ones(), 9);
        for y in 1..=3 {
            for x in 1..=3 {
                assert!(grown.get(x, y));
            }
        }
    }

    #[test]
    fn corner_pixel_growth_is_clipped() {
        let mask = mask_from(5, 5, &[(0, 0)]);
        let grown = dilate(&mask, 1);
        assert_eq!(grown.count_ones(), 4);
    }

    #[test]
    fn dilation_equals_chebyshev_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let mask = random_mask(&mut rng, 24, 24);
            for beta in [1u32, 2, 3] {
                let grown = dilate(&mask, beta);
                let b = beta as isize;
                for y in 0..24isize {
                    for x in 0..24isize {
                        // oracle: any set pixel within Chebyshev distance beta
                        let mut within = false;
                        'scan: for dy in -b..=b {
                            for dx in -b..=b {
                                let (nx, ny) = (x + dx, y + dy);
                                if (0..24).contains(&nx)
                                    && (0..24).contains(&ny)
                                    && mask.get(nx as usize, ny as usize)
                                {
                                    within = true;
                                    break 'scan;
                                }
                            }
                        }
                        assert_eq!(grown.get(x as usize, y as usize), within);
                    }
                }
            }
        }
    }

    #[test]
    fn dilation_is_monotone_in_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mask = random_mask(&mut rng, 20, 20);
        let mut previous = mask.clone();
        for beta in 0..4 {
            let grown = dilate(&mask, beta);
            assert!(previous.is_subset_of(&grown));
            previous = grown;
        }
    }

    #[test]
    fn euclidean_disk_is_tighter_than_chebyshev() {
        let mask = mask_from(9, 9, &[(4, 4)]);
        let square = dilate_with(&mask, 2, StructuringElement::Chebyshev3x3);
        let disk = dilate_with(&mask, 2, StructuringElement::EuclideanDisk);
        assert!(disk.is_subset_of(&square));
        assert!(disk.count_ones() < square.count_ones());
        // the disk of radius 2 around an interior pixel covers 13 pixels
        assert_eq!(disk.count_ones(), 13);
    }

    #[test]
    fn tki_is_one_when_topk_inside_mask() {
        let e = emap(4, 4, (0..16).map(|i| i as f32).collect());
        let topk = top_k_mask(&e, 4).unwrap(); // last four pixels
        let mask = mask_from(4, 4, &[(0, 3), (1, 3), (2, 3), (3, 3)]);
        assert_eq!(tki(&mask, &topk, 4).unwrap(), 1.0);
    }

    #[test]
    fn tki_is_zero_on_disjoint_masks() {
        let e = emap(4, 4, (0..16).map(|i| i as f32).collect());
        let topk = top_k_mask(&e, 4).unwrap();
        let mask = mask_from(4, 4, &[(0, 0), (1, 0)]);
        assert_eq!(tki(&mask, &topk, 4).unwrap(), 0.0);
    }

    #[test]
    fn tki_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..50 {
            let e = random_emap(&mut rng, 16, 16);
            let k = rng.gen_range(1..=256);
            let topk = top_k_mask(&e, k).unwrap();
            let mask = random_mask(&mut rng, 16, 16);
            let got = tki(&mask, &topk, k).unwrap();
            let mut hits = 0usize;
            for y in 0..16 {
                for x in 0..16 {
                    if mask.get(x, y) && topk.get(x, y) {
                        hits += 1;
                    }
                }
            }
            assert_eq!(got, hits as f64 / k as f64);
        }
    }

    #[test]
    fn tki_rejects_dimension_mismatch_and_bad_k() {
        let a = mask_from(4, 4, &[(0, 0)]);
        let b = mask_from(4, 3, &[(0, 0)]);
        assert!(tki(&a, &b, 1).is_err());
        let c = mask_from(4, 4, &[(0, 0), (1, 1)]);
        assert!(tki(&a, &c, 3).is_err()); // mask has 2 bits, not 3
    }

    #[test]
    fn relative_size_counts_bits() {
        let all = ConceptMask::new(4, 4, vec![true; 16]).unwrap();
        assert_eq!(relative_size(&all), 1.0);
        let none = ConceptMask::new(4, 4, vec![false; 16]).unwrap();
        assert_eq!(relative_size(&none), 0.0);
        let half = ConceptMask::new(10, 10, (0..100).map(|i| i < 50).collect()).unwrap();
        assert_eq!(relative_size(&half), 0.5);
    }

    #[test]
    fn whole_image_concept_scores_one_everywhere() {
        let e = emap(8, 8, (0..64).map(|i| i as f32).collect());
        let seg = SegmentationMap::new(8, 8, vec![5; 64]).unwrap();
        let params = CiParams {
            k: 16,
            ..CiParams::default()
        };
        let score = ci_score(&e, &seg, 5, &params).unwrap().unwrap();
        assert_eq!(score.relative_size, 1.0);
        assert_eq!(score.tki, 1.0);
        assert_eq!(score.ci, 1.0);
    }

    #[test]
    fn constructed_fixture_reaches_ci_sixteen() {
        // 32x32 image; concept covers an 8x8 block (64 px, s =  0.0625) that
        // fully contains the k = 16 hottest pixels.
        let (w, h) = (32usize, 32usize);
        let mut values = vec![0.0f32; w * h];
        let mut labels = vec![0u16; w * h];
        for y in 8..16 {
            for x in 8..16 {
                labels[y * w + x] = 9;
            }
        }
        let mut hot = 0;
        'outer: for y in 10..14 {
            for x in 10..14 {
                values[y * w + x] = 100.0 + hot as f32;
                hot += 1;
                if hot == 16 {
                    break 'outer;
                }
            }
        }
        let e = emap(w, h, values);
        let seg = SegmentationMap::new(w, h, labels).unwrap();
        let params = CiParams {
            k: 16,
            ..CiParams::default()
        };
        let score = ci_score(&e, &seg, 9, &params).unwrap().unwrap();
        assert_eq!(score.tki, 1.0);
        assert_eq!(score.relative_size, 0.0625);
        assert_eq!(score.ci, 16.0);
        // brute-force recompute of the same fixture
        let mask = concept_mask(&seg, 9);
        let topk = top_k_mask(&e, 16).unwrap();
        let mut hits = 0;
        for i in 0..w * h {
            if mask.bits()[i] && topk.bits()[i] {
                hits += 1;
            }
        }
        assert_eq!(hits as f64 / 16.0 / relative_size(&mask), score.ci);
    }

    #[test]
    fn small_concepts_are_filtered_not_clamped() {
        let e = emap(10, 10, (0..100).map(|i| i as f32).collect());
        let mut labels = vec![0u16; 100];
        labels[0] = 7; // one pixel: relative size 0.01 < 0.05
        let seg = SegmentationMap::new(10, 10, labels).unwrap();
        let params = CiParams {
            k: 10,
            ..CiParams::default()
        };
        assert!(ci_score(&e, &seg, 7, &params).unwrap().is_none());
    }

    #[test]
    fn ci_stays_within_paper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let params = CiParams {
            k: 32,
            ..CiParams::default()
        };
        for _ in 0..50 {
            let e = random_emap(&mut rng, 16, 16);
            let labels: Vec<u16> = (0..256).map(|_| rng.gen_range(0..4)).collect();
            let seg = SegmentationMap::new(16, 16, labels).unwrap();
            for concept in 0..4 {
                if let Some(score) = ci_score(&e, &seg, concept, &params).unwrap() {
                    assert!(score.ci >= 0.0 && score.ci <= 1.0 / params.s_min);
                    assert!((0.0..=1.0).contains(&score.tki));
                }
            }
        }
    }

    #[test]
    fn ci_is_invariant_under_monotone_value_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let e = random_emap(&mut rng, 16, 16);
        let squashed = emap(
            16,
            16,
            e.values().iter().map(|v| (v * 0.3).tanh() * 5.0 + 2.0).collect(),
        );
        let labels: Vec<u16> = (0..256).map(|_| rng.gen_range(0..3)).collect();
        let seg = SegmentationMap::new(16, 16, labels).unwrap();
        let params = CiParams {
            k: 40,
            ..CiParams::default()
        };
        for concept in 0..3 {
            assert_eq!(
                ci_score(&e, &seg, concept, &params).unwrap(),
                ci_score(&squashed, &seg, concept, &params).unwrap()
            );
        }
    }

    #[test]
    fn undilated_concept_sizes_partition_the_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let labels: Vec<u16> = (0..400).map(|_| rng.gen_range(0..7)).collect();
        let seg = SegmentationMap::new(20, 20, labels).unwrap();
        let total: f64 = seg
            .distinct_labels()
            .iter()
            .map(|&c| relative_size(&concept_mask(&seg, c)))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    fn rec(concept: u16, ci: f64, err: f64) -> CiRecord {
        CiRecord {
            sample_id: "s".into(),
            concept,
            relative_size: 0.5,
            tki: ci * 0.5,
            ci,
            gcd_error_km: err,
        }
    }

    #[test]
    fn single_record_aggregate_is_its_own_median_and_mean() {
        let agg = aggregate(&[rec(1, 0.8, 10.0)], &standard_intervals(), 1).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].median, 0.8);
        assert_eq!(agg[0].mean, 0.8);
        assert_eq!(agg[0].count, 1);
    }

    #[test]
    fn median_ignores_the_outlier_the_mean_chases() {
        let records = [rec(1, 1.0, 5.0), rec(1, 2.0, 5.0), rec(1, 100.0, 5.0)];
        let agg = aggregate(&records, &standard_intervals(), 1).unwrap();
        assert_eq!(agg[0].median, 2.0);
        assert!((agg[0].mean - 103.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn interval_boundaries_are_half_open() {
        let records = [rec(1, 1.0, 25.0)];
        let agg = aggregate(&records, &standard_intervals(), 1).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].interval.lo_km, 25.0);
        assert_eq!(agg[0].interval.hi_km, 750.0);
    }

    #[test]
    fn min_images_filters_sparse_groups() {
        let records = [rec(1, 1.0, 5.0), rec(1, 2.0, 5.0), rec(2, 1.0, 5.0)];
        let agg = aggregate(&records, &standard_intervals(), 2).unwrap();
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].concept, 1);
    }

    #[test]
    fn aggregate_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let records: Vec<CiRecord> = (0..500)
            .map(|_| {
                rec(
                    rng.gen_range(0..5),
                    rng.gen_range(0.0..20.0),
                    rng.gen_range(0.0..3000.0),
                )
            })
            .collect();
        let intervals = standard_intervals();
        let agg = aggregate(&records, &intervals, 1).unwrap();
        for a in &agg {
            let mut group: Vec<f64> = records
                .iter()
                .filter(|r| r.concept == a.concept && a.interval.contains(r.gcd_error_km))
                .map(|r| r.ci)
                .collect();
            group.sort_by(|x, y| x.partial_cmp(y).unwrap());
            let n = group.len();
            let median = if n % 2 == 1 {
                group[n / 2]
            } else {
                (group[n / 2 - 1] + group[n / 2]) / 2.0
            };
            let mean = group.iter().sum::<f64>() / n as f64;
            assert_eq!(a.count, n);
            assert_eq!(a.median, median);
            assert!((a.mean - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_intervals_are_rejected() {
        let bad = vec![
            Interval::new(0.0, 30.0).unwrap(),
            Interval::new(25.0, 750.0).unwrap(),
        ];
        assert!(aggregate(&[rec(1, 1.0, 5.0)], &bad, 1).is_err());
        assert!(Interval::new(10.0, 10.0).is_err());
        assert!(Interval::new(-1.0, 10.0).is_err());
    }

    #[test]
    fn identical_aggregates_have_zero_delta() {
        let records = [rec(1, 1.0, 5.0), rec(2, 3.0, 40.0)];
        let agg = aggregate(&records, &standard_intervals(), 1).unwrap();
        let deltas = beta_delta(&agg, &agg).unwrap();
        assert!(deltas.iter().all(|d| d.delta_median == 0.0));
    }

    #[test]
    fn synthetic_delta_shows_up_in_the_right_bin() {
        let base = [rec(1, 1.0, 5.0), rec(1, 1.0, 40.0)];
        let shifted = [rec(1, 1.5, 5.0), rec(1, 1.0, 40.0)];
        let a0 = aggregate(&base, &standard_intervals(), 1).unwrap();
        let a3 = aggregate(&shifted, &standard_intervals(), 1).unwrap();
        let deltas = beta_delta(&a3, &a0).unwrap();
        assert_eq!(deltas.len(), 2);
        assert_eq!(deltas[0].delta_median, 0.5);
        assert_eq!(deltas[1].delta_median, 0.0);
    }

    #[test]
    fn key_mismatch_lists_missing_entries() {
        let a = aggregate(&[rec(1, 1.0, 5.0)], &standard_intervals(), 1).unwrap();
        let b = aggregate(&[rec(2, 1.0, 5.0)], &standard_intervals(), 1).unwrap();
        let err = beta_delta(&a, &b).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("concept 1"), "{text}");
        assert!(text.contains("concept 2"), "{text}");
    }

    proptest::proptest! {
        #[test]
        fn top_k_always_sets_exactly_k_bits(
            values in proptest::collection::vec(-10.0f32..10.0, 64),
            k in 1usize..=64,
        ) {
            let e = ExplanationMap::new(8, 8, values).unwrap();
            let mask = top_k_mask(&e, k).unwrap();
            proptest::prop_assert_eq!(mask.count_ones(), k);
        }

        #[test]
        fn dilation_never_shrinks(
            bits in proptest::collection::vec(proptest::bool::ANY, 100),
            beta in 0u32..4,
        ) {
            let mask = ConceptMask::new(10, 10, bits).unwrap();
            let grown = dilate(&mask, beta);
            proptest::prop_assert!(mask.is_subset_of(&grown));
            let more = dilate(&mask, beta + 1);
            proptest::prop_assert!(grown.is_subset_of(&more));
        }
    }
}
