//! Dataset ingestion and generation.
//!
//! MNIST ships as big-endian IDX files (magic `0x00000803` for images,
//! `0x00000801` for labels), optionally gzip-compressed. Files are read
//! fully into memory and the payload length is enforced exactly. Pixels map
//! to [0, 1] by division by 255.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::RngState;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Canonical MNIST file names, relative to a data directory.
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// An in-memory dataset: row-major feature matrix plus integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    num_features: usize,
    labels: Vec<u8>,
    num_classes: usize,
    split: Split,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        num_features: usize,
        labels: Vec<u8>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        if num_features == 0 || labels.is_empty() {
            return Err(Error::InvalidParameter("empty dataset".into()));
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * num_features,
                got: features.len(),
            });
        }
        if num_classes == 0 || num_classes > 256 {
            return Err(Error::InvalidParameter(format!(
                "unsupported class count {num_classes}"
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} outside 0..{num_classes}"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset feature".into()));
        }
        Ok(Self {
            features,
            num_features,
            labels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }
}

/// Raw parsed IDX image tensor (count x rows x cols of bytes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

/// Parse an IDX image file (gzip accepted transparently).
pub fn load_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = read_maybe_gzip(path)?;
    parse_idx_images(&bytes, path)
}

/// Parse an IDX label file; every label must lie in `0..num_classes`.
pub fn load_idx_labels(path: &Path, num_classes: usize) -> Result<Vec<u8>> {
    let bytes = read_maybe_gzip(path)?;
    parse_idx_labels(&bytes, num_classes, path)
}

pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<IdxImages> {
    if bytes.len() < 4 {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: 16,
            got: bytes.len() as u64,
        });
    }
    let magic = read_u32_be(bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            got: magic,
        });
    }
    if bytes.len() < 16 {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: 16,
            got: bytes.len() as u64,
        });
    }
    let count = read_u32_be(bytes, 4) as u64;
    let rows = read_u32_be(bytes, 8) as u64;
    let cols = read_u32_be(bytes, 12) as u64;
    let total = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .filter(|&v| usize::try_from(v).is_ok())
        .ok_or_else(|| Error::IdxOverflow {
            path: path.to_path_buf(),
        })?;
    let payload = &bytes[16..];
    if (payload.len() as u64) < total {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: total,
            got: payload.len() as u64,
        });
    }
    if (payload.len() as u64) > total {
        return Err(Error::IdxTrailing {
            path: path.to_path_buf(),
            expected: total,
            got: payload.len() as u64,
        });
    }
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels: payload.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], num_classes: usize, path: &Path) -> Result<Vec<u8>> {
    if bytes.len() < 4 {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: 8,
            got: bytes.len() as u64,
        });
    }
    let magic = read_u32_be(bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            got: magic,
        });
    }
    if bytes.len() < 8 {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: 8,
            got: bytes.len() as u64,
        });
    }
    let count = read_u32_be(bytes, 4) as u64;
    let payload = &bytes[8..];
    if (payload.len() as u64) < count {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected: count,
            got: payload.len() as u64,
        });
    }
    if (payload.len() as u64) > count {
        return Err(Error::IdxTrailing {
            path: path.to_path_buf(),
            expected: count,
            got: payload.len() as u64,
        });
    }
    for &label in payload {
        if label as usize >= num_classes {
            return Err(Error::LabelRange {
                path: path.to_path_buf(),
                label,
                classes: num_classes,
            });
        }
    }
    Ok(payload.to_vec())
}

/// Serialize images back into IDX bytes (for round-trip tests and fixtures).
pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Assemble a dataset from parsed IDX parts: pixels scaled to [0, 1] by
/// division by 255.
pub fn mnist_from_idx(images: IdxImages, labels: Vec<u8>, split: Split) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: images.count,
            got: labels.len(),
        });
    }
    let features: Vec<f64> = images.pixels.iter().map(|&b| b as f64 / 255.0).collect();
    Dataset::new(features, images.rows * images.cols, labels, 10, split)
}

/// Load one MNIST split from an images file and a labels file.
pub fn load_mnist_split(images_path: &Path, labels_path: &Path, split: Split) -> Result<Dataset> {
    let images = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path, 10)?;
    mnist_from_idx(images, labels, split)
}

/// Load the canonical train/test pair from a directory, accepting either
/// plain or `.gz` file names.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let resolve = |stem: &str| -> Result<std::path::PathBuf> {
        let plain = dir.join(stem);
        if plain.exists() {
            return Ok(plain);
        }
        let gz = dir.join(format!("{stem}.gz"));
        if gz.exists() {
            return Ok(gz);
        }
        Err(Error::InvalidParameter(format!(
            "missing MNIST file {stem}[.gz] under {}",
            dir.display()
        )))
    };
    let train = load_mnist_split(
        &resolve(MNIST_FILES[0])?,
        &resolve(MNIST_FILES[1])?,
        Split::Train,
    )?;
    let test = load_mnist_split(
        &resolve(MNIST_FILES[2])?,
        &resolve(MNIST_FILES[3])?,
        Split::Test,
    )?;
    Ok((train, test))
}

/// Stratified subset of `k` samples: per-class proportions preserved within
/// one sample (largest-remainder quotas), sampled without replacement,
/// deterministic in `seed`. Selected rows keep their original order.
pub fn subset(data: &Dataset, k: usize, seed: u64) -> Result<Dataset> {
    let m = data.len();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!(
            "subset size {k} outside 1..={m}"
        )));
    }
    let classes = data.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &label) in data.labels().iter().enumerate() {
        by_class[label as usize].push(i);
    }

    // Largest-remainder quotas: floor(k * m_c / m) each, leftovers to the
    // largest fractional parts (ties by class index).
    let mut quotas: Vec<usize> = Vec::with_capacity(classes);
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(classes);
    let mut assigned = 0usize;
    for (c, members) in by_class.iter().enumerate() {
        let exact = k as u128 * members.len() as u128;
        quotas.push((exact / m as u128) as usize);
        remainders.push((exact % m as u128, c));
        assigned += quotas[c];
    }
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut leftover = k - assigned;
    for &(rem, c) in &remainders {
        if leftover == 0 {
            break;
        }
        if rem > 0 {
            quotas[c] += 1;
            leftover -= 1;
        }
    }

    let mut rng = RngState::new(seed);
    let mut selected = Vec::with_capacity(k);
    for (c, members) in by_class.iter().enumerate() {
        let mut pool = members.clone();
        rng.shuffle(&mut pool);
        selected.extend_from_slice(&pool[..quotas[c]]);
    }
    selected.sort_unstable();

    let mut features = Vec::with_capacity(k * data.num_features());
    let mut labels = Vec::with_capacity(k);
    for &i in &selected {
        features.extend_from_slice(data.feature_row(i));
        labels.push(data.labels()[i]);
    }
    Dataset::new(features, data.num_features(), labels, classes, data.split())
}

/// Gaussian blobs: class `c` is centered at `separation` along coordinate
/// axis `c % dim` (scaled up on each wrap-around), unit covariance.
pub fn synthetic_gaussian_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if classes == 0 || per_class == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "classes, per_class, and dim must be positive".into(),
        ));
    }
    if classes > 256 {
        return Err(Error::InvalidParameter(format!(
            "label type limits classes to 256, got {classes}"
        )));
    }
    let mut rng = RngState::new(seed);
    let mut features = Vec::with_capacity(classes * per_class * dim);
    let mut labels = Vec::with_capacity(classes * per_class);
    for c in 0..classes {
        let axis = c % dim;
        let scale = separation * (1.0 + (c / dim) as f64);
        for _ in 0..per_class {
            for j in 0..dim {
                let mean = if j == axis { scale } else { 0.0 };
                features.push(rng.normal(mean, 1.0));
            }
            labels.push(c as u8);
        }
    }
    Dataset::new(features, dim, labels, classes, Split::Train)
}

fn read_u32_be(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn read_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        return Ok(out);
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("test.idx")
    }

    #[test]
    fn parse_two_tiny_images() {
        let images = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![0, 64, 128, 255, 1, 2, 3, 4],
        };
        let bytes = write_idx_images(&images);
        assert_eq!(&bytes[..4], &[0x00, 0x00, 0x08, 0x03]);
        let parsed = parse_idx_images(&bytes, &p()).unwrap();
        assert_eq!(parsed, images);
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let labels_bytes = write_idx_labels(&[1, 2]);
        match parse_idx_images(&labels_bytes, &p()) {
            Err(Error::IdxMagic { expected, got, .. }) => {
                assert_eq!(expected, IDX_IMAGES_MAGIC);
                assert_eq!(got, IDX_LABELS_MAGIC);
            }
            other => panic!("expected magic error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_and_trailing_payloads_are_distinct_errors() {
        let images = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![9; 8],
        };
        let mut bytes = write_idx_images(&images);
        bytes.pop();
        assert!(matches!(
            parse_idx_images(&bytes, &p()),
            Err(Error::IdxTruncated { expected: 8, got: 7, .. })
        ));
        let mut bytes = write_idx_images(&images);
        bytes.push(0);
        assert!(matches!(
            parse_idx_images(&bytes, &p()),
            Err(Error::IdxTrailing { expected: 8, got: 9, .. })
        ));
    }

    #[test]
    fn dimension_overflow_is_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        bytes.extend_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(
            parse_idx_images(&bytes, &p()),
            Err(Error::IdxOverflow { .. })
        ));
    }

    #[test]
    fn labels_parse_and_range_check() {
        let bytes = write_idx_labels(&[3, 7]);
        assert_eq!(parse_idx_labels(&bytes, 10, &p()).unwrap(), vec![3, 7]);

        let bytes = write_idx_labels(&[3, 200]);
        assert!(matches!(
            parse_idx_labels(&bytes, 10, &p()),
            Err(Error::LabelRange { label: 200, classes: 10, .. })
        ));
    }

    #[test]
    fn pixels_normalize_by_255() {
        let images = IdxImages {
            count: 1,
            rows: 1,
            cols: 3,
            pixels: vec![0, 51, 255],
        };
        let ds = mnist_from_idx(images, vec![4], Split::Train).unwrap();
        assert_eq!(ds.feature_row(0), &[0.0, 51.0 / 255.0, 1.0]);
    }

    #[test]
    fn blobs_are_deterministic_and_sized() {
        let a = synthetic_gaussian_blobs(3, 1, 4, 5.0, 11).unwrap();
        assert_eq!(a.len(), 3);
        let b = synthetic_gaussian_blobs(3, 1, 4, 5.0, 11).unwrap();
        assert_eq!(a, b);
        let c = synthetic_gaussian_blobs(3, 1, 4, 5.0, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn subset_exact_stratification_on_balanced_data() {
        let data = synthetic_gaussian_blobs(10, 100, 3, 4.0, 0).unwrap();
        let sub = subset(&data, 100, 5).unwrap();
        assert_eq!(sub.len(), 100);
        let mut counts = [0usize; 10];
        for &l in sub.labels() {
            counts[l as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 10), "{counts:?}");
    }

    #[test]
    fn subset_of_everything_is_the_same_multiset() {
        let data = synthetic_gaussian_blobs(3, 7, 2, 4.0, 1).unwrap();
        let sub = subset(&data, data.len(), 9).unwrap();
        // selection preserves original order, so the full subset is identity
        assert_eq!(sub, data);
    }

    #[test]
    fn subset_deterministic_in_seed() {
        let data = synthetic_gaussian_blobs(5, 30, 2, 4.0, 2).unwrap();
        let a = subset(&data, 40, 77).unwrap();
        let b = subset(&data, 40, 77).unwrap();
        assert_eq!(a, b);
        let c = subset(&data, 40, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn subset_proportions_within_one_on_unbalanced_data() {
        // 60 / 30 / 10 split, k = 33: quotas 19.8 / 9.9 / 3.3.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (class, count) in [(0u8, 60usize), (1, 30), (2, 10)] {
            for i in 0..count {
                features.push(i as f64);
                labels.push(class);
            }
        }
        let data = Dataset::new(features, 1, labels, 3, Split::Train).unwrap();
        let sub = subset(&data, 33, 3).unwrap();
        let mut counts = [0usize; 3];
        for &l in sub.labels() {
            counts[l as usize] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 33);
        for (c, &count) in counts.iter().enumerate() {
            let exact = 33.0 * [60.0, 30.0, 10.0][c] / 100.0;
            assert!(
                (count as f64 - exact).abs() < 1.0,
                "class {c}: {count} vs {exact}"
            );
        }
    }

    #[test]
    fn subset_size_bounds() {
        let data = synthetic_gaussian_blobs(2, 5, 2, 4.0, 4).unwrap();
        assert!(subset(&data, 0, 0).is_err());
        assert!(subset(&data, 11, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            /// IDX write-then-parse reproduces the in-memory tensor exactly,
            /// and parse-then-write reproduces the bytes exactly.
            #[test]
            fn idx_round_trip(
                count in 1usize..5,
                rows in 1usize..5,
                cols in 1usize..5,
                seed in any::<u64>(),
            ) {
                let mut rng = RngState::new(seed);
                let pixels: Vec<u8> =
                    (0..count * rows * cols).map(|_| (rng.next_u64() & 0xff) as u8).collect();
                let images = IdxImages { count, rows, cols, pixels };
                let bytes = write_idx_images(&images);
                let parsed = parse_idx_images(&bytes, &p()).unwrap();
                prop_assert_eq!(&parsed, &images);
                prop_assert_eq!(write_idx_images(&parsed), bytes);
            }

            #[test]
            fn label_round_trip(labels in proptest::collection::vec(0u8..10, 1..64)) {
                let bytes = write_idx_labels(&labels);
                let parsed = parse_idx_labels(&bytes, 10, &p()).unwrap();
                prop_assert_eq!(parsed, labels);
            }
        }
    }

    #[test]
    fn gzipped_idx_files_load_transparently() {
        use std::io::Write;
        let images = IdxImages {
            count: 3,
            rows: 2,
            cols: 2,
            pixels: (0..12).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("images.idx.gz");
        let mut enc = flate2::write::GzEncoder::new(
            std::fs::File::create(&path).unwrap(),
            flate2::Compression::default(),
        );
        enc.write_all(&write_idx_images(&images)).unwrap();
        enc.finish().unwrap();
        assert_eq!(load_idx_images(&path).unwrap(), images);
    }

    /// Runs only when the canonical MNIST files are present (see README for
    /// where to put them); checks the published shapes.
    #[test]
    fn canonical_mnist_shapes_when_available() {
        let dir = match std::env::var("MNIST_DATA_DIR") {
            Ok(d) => PathBuf::from(d),
            Err(_) => PathBuf::from("data/mnist"),
        };
        if !dir.join(MNIST_FILES[0]).exists() && !dir.join(format!("{}.gz", MNIST_FILES[0])).exists()
        {
            eprintln!("canonical_mnist_shapes_when_available: skipped (no data)");
            return;
        }
        let (train, test) = load_mnist_dir(&dir).unwrap();
        assert_eq!(train.len(), 60_000);
        assert_eq!(train.num_features(), 784);
        assert_eq!(test.len(), 10_000);
    }
}
