//! Handwritten-digit images: ingestion, balanced subsets, splits and noise.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const IMAGE_SIDE: usize = 8;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
pub const MAX_INGESTED_PIXEL: u32 = 16;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("duplicate image id {0}")]
    DuplicateId(usize),
    #[error("need {needed} images of digit {digit}, only {available} available")]
    Insufficient { digit: u8, needed: usize, available: usize },
    #[error("invalid subset request: {0}")]
    InvalidSubset(String),
    #[error("image id {0} is not in the dataset")]
    UnknownId(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    id: usize,
    label: u8,
    pixels: Vec<f64>,
}

impl Image {
    /// `pixels` is the 8x8 grid in row-major order.
    pub fn new(id: usize, label: u8, pixels: Vec<f64>) -> Result<Self, DataError> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(DataError::InvalidImage(format!(
                "expected {IMAGE_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if label > 9 {
            return Err(DataError::InvalidImage(format!("label {label} is not a digit")));
        }
        if let Some(p) = pixels.iter().find(|p| !p.is_finite()) {
            return Err(DataError::InvalidImage(format!("non-finite pixel {p}")));
        }
        Ok(Self { id, label, pixels })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn label(&self) -> u8 {
        self.label
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * IMAGE_SIDE + col]
    }

    pub fn max_pixel(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same image with every pixel multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            id: self.id,
            label: self.label,
            pixels: self.pixels.iter().map(|p| p * c).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    All,
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<Image>,
    fingerprint: String,
    split_tag: SplitTag,
}

impl Dataset {
    pub fn new(images: Vec<Image>, split_tag: SplitTag) -> Result<Self, DataError> {
        let mut seen = HashSet::with_capacity(images.len());
        for img in &images {
            if !seen.insert(img.id) {
                return Err(DataError::DuplicateId(img.id));
            }
        }
        let fingerprint = fingerprint(&images);
        Ok(Self {
            images,
            fingerprint,
            split_tag,
        })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// SHA-256 over ids, labels and the bit patterns of all pixels.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    pub fn get(&self, id: usize) -> Option<&Image> {
        self.images.iter().find(|img| img.id == id)
    }

    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for img in &self.images {
            *counts.entry(img.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn ids(&self) -> Vec<usize> {
        self.images.iter().map(|img| img.id).collect()
    }

    /// Images with the given ids, in the order of `ids`.
    pub fn select(&self, ids: &[usize], split_tag: SplitTag) -> Result<Dataset, DataError> {
        let index: BTreeMap<usize, &Image> = self.images.iter().map(|img| (img.id, img)).collect();
        let images = ids
            .iter()
            .map(|id| index.get(id).map(|img| (*img).clone()).ok_or(DataError::UnknownId(*id)))
            .collect::<Result<Vec<_>, _>>()?;
        Dataset::new(images, split_tag)
    }
}

fn fingerprint(images: &[Image]) -> String {
    let mut hasher = Sha256::new();
    for img in images {
        hasher.update((img.id as u64).to_le_bytes());
        hasher.update([img.label]);
        for p in &img.pixels {
            hasher.update(p.to_bits().to_le_bytes());
        }
    }
    let mut out = String::with_capacity(64);
    for b in hasher.finalize() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Parses optdigits rows: 64 pixel values in `0..=16` followed by the label.
/// Blank lines are skipped; ids follow file order.
pub fn parse_optdigits(text: &str) -> Result<Dataset, DataError> {
    let mut images = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        images.push(parse_row(line, k + 1, images.len())?);
    }
    Dataset::new(images, SplitTag::All)
}

fn parse_row(line: &str, line_no: usize, id: usize) -> Result<Image, DataError> {
    let malformed = |reason: String| DataError::Malformed { line: line_no, reason };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != IMAGE_PIXELS + 1 {
        return Err(malformed(format!(
            "expected {} fields, found {}",
            IMAGE_PIXELS + 1,
            fields.len()
        )));
    }
    let mut values = [0u32; IMAGE_PIXELS + 1];
    for (i, f) in fields.iter().enumerate() {
        values[i] = f
            .parse::<u32>()
            .map_err(|_| malformed(format!("field {} is not a nonnegative integer: {f:?}", i + 1)))?;
    }
    if let Some(i) = values[..IMAGE_PIXELS].iter().position(|&v| v > MAX_INGESTED_PIXEL) {
        return Err(malformed(format!("pixel {} out of range 0..=16: {}", i + 1, values[i])));
    }
    let label = values[IMAGE_PIXELS];
    if label > 9 {
        return Err(malformed(format!("label out of range 0..=9: {label}")));
    }
    let pixels = values[..IMAGE_PIXELS].iter().map(|&v| f64::from(v)).collect();
    Image::new(id, label as u8, pixels)
}

pub fn load_optdigits(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_optdigits(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    OneVsOne { other_digit: u8 },
    OneVsAll,
}

impl Task {
    /// Whether an image with `label` takes part in the task at all.
    pub fn includes(&self, target_digit: u8, label: u8) -> bool {
        match self {
            Task::OneVsOne { other_digit } => label == target_digit || label == *other_digit,
            Task::OneVsAll => true,
        }
    }
}

/// Balanced subset of `total` images split into train and test parts.
///
/// Half the subset is the target digit. For one-vs-one the other half is the
/// other digit; for one-vs-all it is spread as evenly as possible over the
/// nine remaining digits. Both classes are split with the same fraction, and
/// each part is returned sorted by id.
pub fn subset_and_split(
    data: &Dataset,
    task: Task,
    target_digit: u8,
    total: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    if target_digit > 9 {
        return Err(DataError::InvalidSubset(format!("target digit {target_digit}")));
    }
    if let Task::OneVsOne { other_digit } = task {
        if other_digit > 9 || other_digit == target_digit {
            return Err(DataError::InvalidSubset(format!("other digit {other_digit}")));
        }
    }
    if total < 2 || !total.is_multiple_of(2) {
        return Err(DataError::InvalidSubset(format!(
            "total must be even and at least 2, got {total}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::InvalidSubset(format!(
            "train fraction {train_fraction} not in (0, 1)"
        )));
    }
    let half = total / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_digit: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for img in data.images() {
        by_digit.entry(img.label).or_default().push(img.id);
    }
    let mut draw = |digit: u8, count: usize, rng: &mut ChaCha8Rng| -> Result<Vec<usize>, DataError> {
        let mut pool = by_digit.remove(&digit).unwrap_or_default();
        if pool.len() < count {
            return Err(DataError::Insufficient {
                digit,
                needed: count,
                available: pool.len(),
            });
        }
        pool.shuffle(rng);
        pool.truncate(count);
        Ok(pool)
    };

    let positives = draw(target_digit, half, &mut rng)?;
    let negatives = match task {
        Task::OneVsOne { other_digit } => draw(other_digit, half, &mut rng)?,
        Task::OneVsAll => {
            let mut others: Vec<u8> = (0..=9).filter(|&d| d != target_digit).collect();
            others.shuffle(&mut rng);
            let (base, extra) = (half / others.len(), half % others.len());
            let mut ids = Vec::with_capacity(half);
            for (k, digit) in others.into_iter().enumerate() {
                ids.extend(draw(digit, base + usize::from(k < extra), &mut rng)?);
            }
            ids.shuffle(&mut rng);
            ids
        }
    };

    let cut = |ids: &[usize]| ((ids.len() as f64) * train_fraction).round() as usize;
    let (pos_cut, neg_cut) = (cut(&positives), cut(&negatives));
    let mut train: Vec<usize> = positives[..pos_cut]
        .iter()
        .chain(&negatives[..neg_cut])
        .copied()
        .collect();
    let mut test: Vec<usize> = positives[pos_cut..]
        .iter()
        .chain(&negatives[neg_cut..])
        .copied()
        .collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        data.select(&train, SplitTag::Train)?,
        data.select(&test, SplitTag::Test)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Noise amplitude as a fraction of the image's largest original pixel.
    pub level: f64,
    pub seed: u64,
    /// Draw from `[-L max, L max]` instead of `[0, L max]`.
    #[serde(default)]
    pub symmetric: bool,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        assert!(level >= 0.0, "noise level must be nonnegative");
        Self {
            level,
            seed,
            symmetric: false,
        }
    }
}

/// Adds independent uniform noise to every pixel, without clamping. The
/// random stream is selected by the image id, so a noisy dataset does not
/// depend on image order.
pub fn add_noise(image: &Image, spec: &NoiseSpec) -> Image {
    let amplitude = spec.level * image.max_pixel().max(0.0);
    if amplitude == 0.0 {
        return image.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(image.id as u64);
    let low = if spec.symmetric { -amplitude } else { 0.0 };
    let pixels = image
        .pixels
        .iter()
        .map(|p| p + rng.random_range(low..=amplitude))
        .collect();
    Image {
        id: image.id,
        label: image.label,
        pixels,
    }
}

pub fn add_noise_to_dataset(data: &Dataset, spec: &NoiseSpec) -> Dataset {
    let images = data.images().iter().map(|img| add_noise(img, spec)).collect();
    Dataset::new(images, data.split_tag()).expect("ids unchanged by noise")
}

pub const SPLIT_MANIFEST_HEADER: &str = "id,label,split";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitManifest {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitManifest {
    pub fn ids(&self, tag: SplitTag) -> Vec<usize> {
        match tag {
            SplitTag::Train => self.train.clone(),
            SplitTag::Test => self.test.clone(),
            SplitTag::All => self.train.iter().chain(&self.test).copied().collect(),
        }
    }
}

pub fn write_split_manifest<W: Write>(mut out: W, train: &Dataset, test: &Dataset) -> std::io::Result<()> {
    writeln!(out, "{SPLIT_MANIFEST_HEADER}")?;
    for (tag, set) in [("train", train), ("test", test)] {
        for img in set.images() {
            writeln!(out, "{},{},{tag}", img.id, img.label)?;
        }
    }
    Ok(())
}

/// Reads a split manifest. The label column is informational only.
pub fn read_split_manifest<R: BufRead>(input: R) -> Result<SplitManifest, DataError> {
    let mut manifest = SplitManifest::default();
    let mut seen = HashSet::new();
    let mut header_seen = false;
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| DataError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            if line != SPLIT_MANIFEST_HEADER {
                return Err(DataError::Malformed {
                    line: line_no,
                    reason: format!("expected header {SPLIT_MANIFEST_HEADER:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        let malformed = |reason: String| DataError::Malformed { line: line_no, reason };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let [id, label, tag] = fields[..] else {
            return Err(malformed(format!("expected 3 fields, found {}", fields.len())));
        };
        let id: usize = id.parse().map_err(|_| malformed(format!("bad id {id:?}")))?;
        label
            .parse::<u8>()
            .ok()
            .filter(|l| *l <= 9)
            .ok_or_else(|| malformed(format!("bad label {label:?}")))?;
        if !seen.insert(id) {
            return Err(malformed(format!("id {id} listed twice")));
        }
        match tag {
            "train" => manifest.train.push(id),
            "test" => manifest.test.push(id),
            other => return Err(malformed(format!("unknown split {other:?}"))),
        }
    }
    if !header_seen {
        return Err(DataError::Malformed {
            line: 0,
            reason: "empty split manifest".into(),
        });
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pixels: &[u32], label: u32) -> String {
        pixels
            .iter()
            .chain(std::iter::once(&label))
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    fn toy(per_digit: usize) -> Dataset {
        let mut text = String::new();
        for k in 0..per_digit {
            for d in 0..10u32 {
                let mut px = vec![0u32; 64];
                px[0] = d;
                px[1] = (k % 17) as u32;
                text.push_str(&row(&px, d));
                text.push('\n');
            }
        }
        parse_optdigits(&text).unwrap()
    }

    #[test]
    fn blank_row() {
        let ds = parse_optdigits(&row(&[0; 64], 7)).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.images()[0].label(), 7);
        assert!(ds.images()[0].pixels().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let good = row(&[1; 64], 3);
        let short = row(&[1; 63], 3);
        let err = parse_optdigits(&format!("{good}\n{short}\n")).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 2, .. }), "{err}");
        let hot = row(&[17; 64], 3);
        assert!(matches!(
            parse_optdigits(&hot),
            Err(DataError::Malformed { line: 1, .. })
        ));
        let bad_label = row(&[0; 64], 10);
        assert!(matches!(
            parse_optdigits(&bad_label),
            Err(DataError::Malformed { line: 1, .. })
        ));
        assert!(parse_optdigits(&good.replace("1,", "x,")).is_err());
    }

    #[test]
    fn fingerprint_is_content_based() {
        let a = toy(3);
        let b = toy(3);
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
        assert_ne!(a.fingerprint(), toy(4).fingerprint());
    }

    #[test]
    fn one_vs_one_split() {
        let ds = toy(200);
        let (train, test) = subset_and_split(&ds, Task::OneVsOne { other_digit: 1 }, 0, 360, 0.75, 11).unwrap();
        assert_eq!((train.len(), test.len()), (270, 90));
        assert_eq!(train.class_counts()[&0], 135);
        assert_eq!(test.class_counts()[&1], 45);
        let again = subset_and_split(&ds, Task::OneVsOne { other_digit: 1 }, 0, 360, 0.75, 11).unwrap();
        assert_eq!(train.ids(), again.0.ids());
        assert_eq!(test.ids(), again.1.ids());
        let train_ids: HashSet<usize> = train.ids().into_iter().collect();
        assert!(test.ids().iter().all(|id| !train_ids.contains(id)));
    }

    #[test]
    fn one_vs_all_split_is_half_target() {
        let ds = toy(200);
        let (train, test) = subset_and_split(&ds, Task::OneVsAll, 0, 360, 0.75, 5).unwrap();
        let zeros = train.class_counts()[&0] + test.class_counts()[&0];
        assert_eq!(zeros, 180);
        assert_eq!(train.len() + test.len(), 360);
        let counts = train.class_counts();
        assert_eq!(counts.len(), 10);
    }

    #[test]
    fn insufficient_class() {
        let ds = toy(10);
        let err = subset_and_split(&ds, Task::OneVsOne { other_digit: 1 }, 0, 360, 0.75, 1).unwrap_err();
        assert!(matches!(err, DataError::Insufficient { digit: 0, .. }));
    }

    #[test]
    fn noise_examples() {
        let mut px = vec![0.0; 64];
        px[5] = 16.0;
        let img = Image::new(3, 0, px).unwrap();
        assert_eq!(add_noise(&img, &NoiseSpec::new(0.0, 9)), img);
        let noisy = add_noise(&img, &NoiseSpec::new(1.0, 9));
        for (a, b) in noisy.pixels().iter().zip(img.pixels()) {
            assert!((0.0..=16.0).contains(&(a - b)));
        }
        assert_eq!(noisy, add_noise(&img, &NoiseSpec::new(1.0, 9)));
        let blank = Image::new(4, 0, vec![0.0; 64]).unwrap();
        assert_eq!(add_noise(&blank, &NoiseSpec::new(0.7, 9)), blank);
        let sym = add_noise(
            &img,
            &NoiseSpec {
                symmetric: true,
                ..NoiseSpec::new(0.5, 2)
            },
        );
        assert!(sym.pixels().iter().any(|p| *p < 0.0));
    }

    #[test]
    fn manifest_round_trip() {
        let ds = toy(20);
        let (train, test) = subset_and_split(&ds, Task::OneVsOne { other_digit: 1 }, 0, 20, 0.75, 2).unwrap();
        let mut buf = Vec::new();
        write_split_manifest(&mut buf, &train, &test).unwrap();
        let m = read_split_manifest(buf.as_slice()).unwrap();
        assert_eq!(m.train, train.ids());
        assert_eq!(m.test, test.ids());
        assert_eq!(ds.select(&m.test, SplitTag::Test).unwrap(), test);
        assert!(read_split_manifest("".as_bytes()).is_err());
        assert!(read_split_manifest("id,label,split\n1,0,train\n1,0,test\n".as_bytes()).is_err());
    }
}
