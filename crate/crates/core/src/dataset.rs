//! Image dataset ingestion and seeded train/test splitting.
//!
//! CIFAR-10 binary batches hold 3073-byte records: one label byte, then
//! 3072 pixel bytes (red plane, green plane, blue plane, each 32x32
//! row-major). MNIST uses the big-endian IDX format (magic 2051 for images,
//! 2049 for labels). Pixel byte `b` is loaded as `b / 255`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scalar::Scalar;

pub const CIFAR10_RECORD_BYTES: usize = 3073;
pub const CIFAR10_CLASSES: usize = 10;
const CIFAR10_SIDE: usize = 32;
const MNIST_IMAGE_MAGIC: u32 = 2051;
const MNIST_LABEL_MAGIC: u32 = 2049;

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledImageSet<S> {
    images: Vec<Image<S>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl<S: Scalar> LabeledImageSet<S> {
    pub fn new(images: Vec<Image<S>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::invalid(format!("label {bad} >= {num_classes} classes")));
        }
        if let Some(first) = images.first() {
            if images.iter().any(|im| !im.same_shape(first)) {
                return Err(Error::invalid("images in a set must share one shape"));
            }
        }
        if images.iter().any(|im| !im.in_unit_range()) {
            return Err(Error::invalid("pixels must lie in [0,1]"));
        }
        Ok(LabeledImageSet {
            images,
            labels,
            num_classes,
        })
    }

    pub fn images(&self) -> &[Image<S>] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_shape(&self) -> Option<[usize; 3]> {
        self.images.first().map(Image::shape)
    }

    /// New set holding the items at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut images = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let im = self
                .images
                .get(i)
                .ok_or_else(|| Error::invalid(format!("index {i} out of range for {} items", self.len())))?;
            images.push(im.clone());
            labels.push(self.labels[i]);
        }
        Ok(LabeledImageSet {
            images,
            labels,
            num_classes: self.num_classes,
        })
    }

    pub fn truncate(&mut self, len: usize) {
        self.images.truncate(len);
        self.labels.truncate(len);
    }

    /// Appends another set with the same class count and image shape.
    pub fn extend(&mut self, other: LabeledImageSet<S>) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::invalid("class counts differ"));
        }
        if let (Some(a), Some(b)) = (self.image_shape(), other.image_shape()) {
            if a != b {
                return Err(Error::invalid("image shapes differ"));
            }
        }
        self.images.extend(other.images);
        self.labels.extend(other.labels);
        Ok(())
    }
}

fn to_pixel<S: Scalar>(b: u8) -> S {
    S::from_f64_lossy(b as f64) / S::from_f64_lossy(255.0)
}

fn to_byte<S: Scalar>(p: S) -> u8 {
    (p.to_f64_lossy() * 255.0).round().clamp(0.0, 255.0) as u8
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Parses the contents of one CIFAR-10 binary batch.
pub fn parse_cifar10<S: Scalar>(bytes: &[u8]) -> Result<LabeledImageSet<S>> {
    if bytes.len() % CIFAR10_RECORD_BYTES != 0 {
        return Err(Error::format(format!(
            "CIFAR-10 batch of {} bytes is not a multiple of {CIFAR10_RECORD_BYTES}",
            bytes.len()
        )));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR10_RECORD_BYTES);
    let mut labels = Vec::with_capacity(images.capacity());
    for (i, rec) in bytes.chunks_exact(CIFAR10_RECORD_BYTES).enumerate() {
        let label = rec[0] as usize;
        if label >= CIFAR10_CLASSES {
            return Err(Error::format(format!("record {i} has label byte {label} > 9")));
        }
        let pixels = rec[1..].iter().map(|&b| to_pixel(b)).collect();
        images.push(Image::new(3, CIFAR10_SIDE, CIFAR10_SIDE, pixels)?);
        labels.push(label);
    }
    LabeledImageSet::new(images, labels, CIFAR10_CLASSES)
}

/// Loads one CIFAR-10 binary batch file.
pub fn load_cifar10<S: Scalar>(path: &Path) -> Result<LabeledImageSet<S>> {
    parse_cifar10(&read_file(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CifarSplit {
    Train,
    Test,
}

/// Batch file names of the standard `cifar-10-batches-bin` layout.
pub fn cifar10_files(dir: &Path, split: CifarSplit) -> Vec<PathBuf> {
    match split {
        CifarSplit::Train => (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect(),
        CifarSplit::Test => vec![dir.join("test_batch.bin")],
    }
}

/// Loads every batch of one split from a `cifar-10-batches-bin` directory.
pub fn load_cifar10_dir<S: Scalar>(dir: &Path, split: CifarSplit) -> Result<LabeledImageSet<S>> {
    let mut files = cifar10_files(dir, split).into_iter();
    let mut set = load_cifar10(&files.next().expect("at least one file"))?;
    for f in files {
        set.extend(load_cifar10(&f)?)?;
    }
    Ok(set)
}

pub fn encode_cifar10<S: Scalar>(set: &LabeledImageSet<S>) -> Result<Vec<u8>> {
    if set.image_shape().is_some_and(|s| s != [3, CIFAR10_SIDE, CIFAR10_SIDE]) {
        return Err(Error::invalid("CIFAR-10 records hold 3x32x32 images"));
    }
    let mut out = Vec::with_capacity(set.len() * CIFAR10_RECORD_BYTES);
    for (im, &label) in set.images.iter().zip(&set.labels) {
        out.push(label as u8);
        out.extend(im.pixels().iter().map(|&p| to_byte(p)));
    }
    Ok(out)
}

pub fn write_cifar10<S: Scalar>(set: &LabeledImageSet<S>, path: &Path) -> Result<()> {
    fs::write(path, encode_cifar10(set)?).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format("IDX header truncated"))
}

/// Parses MNIST IDX image and label file contents.
pub fn parse_mnist_idx<S: Scalar>(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledImageSet<S>> {
    let magic = be_u32(image_bytes, 0)?;
    if magic != MNIST_IMAGE_MAGIC {
        return Err(Error::format(format!("image file magic {magic}, expected {MNIST_IMAGE_MAGIC}")));
    }
    let magic = be_u32(label_bytes, 0)?;
    if magic != MNIST_LABEL_MAGIC {
        return Err(Error::format(format!("label file magic {magic}, expected {MNIST_LABEL_MAGIC}")));
    }
    let count = be_u32(image_bytes, 4)? as usize;
    let rows = be_u32(image_bytes, 8)? as usize;
    let cols = be_u32(image_bytes, 12)? as usize;
    let label_count = be_u32(label_bytes, 4)? as usize;
    if count != label_count {
        return Err(Error::format(format!("{count} images but {label_count} labels")));
    }
    let plane = rows * cols;
    if plane == 0 || image_bytes.len() != 16 + count * plane {
        return Err(Error::format("image file size disagrees with its header"));
    }
    if label_bytes.len() != 8 + count {
        return Err(Error::format("label file size disagrees with its header"));
    }
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let label = label_bytes[8 + i] as usize;
        if label >= 10 {
            return Err(Error::format(format!("label {label} out of range at index {i}")));
        }
        let raw = &image_bytes[16 + i * plane..16 + (i + 1) * plane];
        images.push(Image::new(1, rows, cols, raw.iter().map(|&b| to_pixel(b)).collect())?);
        labels.push(label);
    }
    LabeledImageSet::new(images, labels, 10)
}

pub fn load_mnist_idx<S: Scalar>(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet<S>> {
    parse_mnist_idx(&read_file(images_path)?, &read_file(labels_path)?)
}

/// Encodes a single-channel set as (image IDX, label IDX) byte buffers.
pub fn encode_mnist_idx<S: Scalar>(set: &LabeledImageSet<S>) -> Result<(Vec<u8>, Vec<u8>)> {
    let [c, h, w] = set.image_shape().unwrap_or([1, 28, 28]);
    if c != 1 {
        return Err(Error::invalid("IDX image files hold single-channel images"));
    }
    let mut images = Vec::with_capacity(16 + set.len() * h * w);
    images.extend_from_slice(&MNIST_IMAGE_MAGIC.to_be_bytes());
    images.extend_from_slice(&(set.len() as u32).to_be_bytes());
    images.extend_from_slice(&(h as u32).to_be_bytes());
    images.extend_from_slice(&(w as u32).to_be_bytes());
    for im in &set.images {
        images.extend(im.pixels().iter().map(|&p| to_byte(p)));
    }
    let mut labels = Vec::with_capacity(8 + set.len());
    labels.extend_from_slice(&MNIST_LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(set.len() as u32).to_be_bytes());
    labels.extend(set.labels.iter().map(|&l| l as u8));
    Ok((images, labels))
}

pub fn write_mnist_idx<S: Scalar>(set: &LabeledImageSet<S>, images_path: &Path, labels_path: &Path) -> Result<()> {
    let (images, labels) = encode_mnist_idx(set)?;
    fs::write(images_path, images).map_err(|e| Error::io(images_path, e))?;
    fs::write(labels_path, labels).map_err(|e| Error::io(labels_path, e))
}

/// Counts for the benign and per-attack adversarial train/test splits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub benign_train: usize,
    pub benign_test: usize,
    pub adv_train_per_attack: usize,
    pub adv_test_per_attack: usize,
    pub seed: u64,
}

impl SplitPlan {
    /// 1,800 benign images as 1,440/360 and 600 adversarial per attack as 480/120.
    pub fn protocol(seed: u64) -> Self {
        SplitPlan {
            benign_train: 1440,
            benign_test: 360,
            adv_train_per_attack: 480,
            adv_test_per_attack: 120,
            seed,
        }
    }

    pub fn benign(&self) -> SplitCounts {
        SplitCounts {
            train: self.benign_train,
            test: self.benign_test,
        }
    }

    pub fn adversarial(&self) -> SplitCounts {
        SplitCounts {
            train: self.adv_train_per_attack,
            test: self.adv_test_per_attack,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub test: usize,
}

/// Seeded shuffle of `0..available`; the first `train` indices form the
/// training part and the next `test` the test part.
pub fn split_indices(available: usize, counts: SplitCounts, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if counts.train + counts.test > available {
        return Err(Error::invalid(format!(
            "split of {} + {} exceeds {available} available items",
            counts.train, counts.test
        )));
    }
    let mut idx: Vec<usize> = (0..available).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = idx[counts.train..counts.train + counts.test].to_vec();
    idx.truncate(counts.train);
    Ok((idx, test))
}

pub fn split<S: Scalar>(
    set: &LabeledImageSet<S>,
    counts: SplitCounts,
    seed: u64,
) -> Result<(LabeledImageSet<S>, LabeledImageSet<S>)> {
    let (train, test) = split_indices(set.len(), counts, seed)?;
    Ok((set.subset(&train)?, set.subset(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_record_is_black_class_zero() {
        let set = parse_cifar10::<f32>(&[0u8; CIFAR10_RECORD_BYTES]).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.labels(), &[0]);
        assert!(set.images()[0].pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn byte_255_is_one_and_planes_are_rgb() {
        let mut rec = vec![3u8; CIFAR10_RECORD_BYTES];
        rec[1] = 255; // red plane, (0, 0)
        rec[1 + 1024 + 33] = 0; // green plane, (1, 1)
        let set = parse_cifar10::<f32>(&rec).unwrap();
        let im = &set.images()[0];
        assert_eq!(im.get(0, 0, 0), 1.0);
        assert_eq!(im.get(1, 1, 1), 0.0);
        assert_eq!(set.labels(), &[3]);
    }

    #[test]
    fn cifar_format_errors() {
        assert_eq!(parse_cifar10::<f32>(&[0u8; 3072]).unwrap_err().kind(), "format-error");
        let mut rec = vec![0u8; CIFAR10_RECORD_BYTES];
        rec[0] = 10;
        assert_eq!(parse_cifar10::<f32>(&rec).unwrap_err().kind(), "format-error");
    }

    #[test]
    fn full_batch_has_ten_thousand_records() {
        let bytes = vec![1u8; 10_000 * CIFAR10_RECORD_BYTES];
        assert_eq!(parse_cifar10::<f32>(&bytes).unwrap().len(), 10_000);
    }

    fn tiny_mnist() -> (Vec<u8>, Vec<u8>) {
        let mut images = Vec::new();
        images.extend_from_slice(&2051u32.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&2u32.to_be_bytes());
        images.extend_from_slice(&[0, 128, 255, 7, 1, 2, 3, 4]);
        let mut labels = Vec::new();
        labels.extend_from_slice(&2049u32.to_be_bytes());
        labels.extend_from_slice(&2u32.to_be_bytes());
        labels.extend_from_slice(&[5, 9]);
        (images, labels)
    }

    #[test]
    fn mnist_parses_and_scales() {
        let (im, lb) = tiny_mnist();
        let set = parse_mnist_idx::<f64>(&im, &lb).unwrap();
        assert_eq!(set.labels(), &[5, 9]);
        assert_eq!(set.image_shape(), Some([1, 2, 2]));
        assert!((set.images()[0].pixels()[1] - 0.50196).abs() < 1e-5);
    }

    #[test]
    fn mnist_swapped_files_and_count_mismatch() {
        let (im, lb) = tiny_mnist();
        assert_eq!(parse_mnist_idx::<f64>(&lb, &im).unwrap_err().kind(), "format-error");
        let mut short = lb.clone();
        short[7] = 1;
        short.pop();
        assert_eq!(parse_mnist_idx::<f64>(&im, &short).unwrap_err().kind(), "format-error");
    }

    #[test]
    fn encoders_round_trip_bitwise() {
        let (im, lb) = tiny_mnist();
        let set = parse_mnist_idx::<f32>(&im, &lb).unwrap();
        let (im2, lb2) = encode_mnist_idx(&set).unwrap();
        assert_eq!((im2, lb2), (im, lb));

        let mut rec: Vec<u8> = (0..2 * CIFAR10_RECORD_BYTES).map(|i| (i * 7 % 256) as u8).collect();
        rec[0] = 4;
        rec[CIFAR10_RECORD_BYTES] = 9;
        let set = parse_cifar10::<f32>(&rec).unwrap();
        let again = parse_cifar10::<f32>(&encode_cifar10(&set).unwrap()).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn protocol_splits() {
        let (tr, te) = split_indices(1800, SplitPlan::protocol(1).benign(), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (1440, 360));
        let train: std::collections::HashSet<_> = tr.iter().collect();
        assert!(te.iter().all(|i| !train.contains(i)));
        let (tr, te) = split_indices(600, SplitPlan::protocol(1).adversarial(), 1).unwrap();
        assert_eq!((tr.len(), te.len()), (480, 120));
        assert_eq!(split_indices(600, SplitCounts { train: 480, test: 120 }, 1).unwrap().0, tr);
        assert!(split_indices(10, SplitCounts { train: 8, test: 3 }, 0).is_err());
    }
}
