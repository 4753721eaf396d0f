use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{DatasetConfig, DatasetKind, SplitSettings};
use crate::dataset::{load_cifar10_dir, load_mnist_idx, split_indices, CifarSplit, LabeledImageSet, SplitCounts};
use crate::error::{Error, Result};
use crate::image::Image;

/// Which half of the source dataset an image comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSplit {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ImageRef {
    pub split: DataSplit,
    pub index: usize,
}

/// The classifier's training split and the held-out split.
pub struct Data {
    pub train: LabeledImageSet<f32>,
    pub test: LabeledImageSet<f32>,
}

impl Data {
    pub fn load(cfg: &DatasetConfig) -> Result<Self> {
        let (mut train, test) = match cfg.kind {
            DatasetKind::Cifar10 => (
                load_cifar10_dir(&cfg.dir, CifarSplit::Train)?,
                load_cifar10_dir(&cfg.dir, CifarSplit::Test)?,
            ),
            DatasetKind::Mnist => (
                load_mnist_idx(
                    &cfg.dir.join("train-images-idx3-ubyte"),
                    &cfg.dir.join("train-labels-idx1-ubyte"),
                )?,
                load_mnist_idx(
                    &cfg.dir.join("t10k-images-idx3-ubyte"),
                    &cfg.dir.join("t10k-labels-idx1-ubyte"),
                )?,
            ),
        };
        if let Some(limit) = cfg.train_limit {
            train.truncate(limit);
        }
        if train.is_empty() || test.is_empty() {
            return Err(Error::invalid("dataset has an empty split"));
        }
        Ok(Data { train, test })
    }

    fn set(&self, split: DataSplit) -> &LabeledImageSet<f32> {
        match split {
            DataSplit::Train => &self.train,
            DataSplit::Test => &self.test,
        }
    }

    pub fn image(&self, r: ImageRef) -> Result<(&Image<f32>, usize)> {
        let set = self.set(r.split);
        if r.index >= set.len() {
            return Err(Error::invalid(format!("image {:?} out of range", r)));
        }
        Ok((&set.images()[r.index], set.labels()[r.index]))
    }

    pub fn gather(&self, refs: &[ImageRef]) -> Result<LabeledImageSet<f32>> {
        let mut images = Vec::with_capacity(refs.len());
        let mut labels = Vec::with_capacity(refs.len());
        for &r in refs {
            let (im, l) = self.image(r)?;
            images.push(im.clone());
            labels.push(l);
        }
        LabeledImageSet::new(images, labels, self.test.num_classes())
    }
}

/// Benign detector images and the candidate originals for attacks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pools {
    pub benign_train: Vec<ImageRef>,
    pub benign_test: Vec<ImageRef>,
    pub candidates_train: Vec<ImageRef>,
    pub candidates_test: Vec<ImageRef>,
}

/// Benign images come from the held-out split only. Attack candidates on
/// each side are that side's benign images plus a disjoint share of every
/// image not used as benign, so detector training and test never share an
/// original.
pub fn plan_pools(train_len: usize, test_len: usize, split: &SplitSettings, benign_seed: u64, rest_seed: u64) -> Result<Pools> {
    let counts = SplitCounts {
        train: split.benign_train,
        test: split.benign_test,
    };
    let (bt, be) = split_indices(test_len, counts, benign_seed)?;
    let held = |index| ImageRef {
        split: DataSplit::Test,
        index,
    };
    let mut used = vec![false; test_len];
    for &i in bt.iter().chain(&be) {
        used[i] = true;
    }
    let mut rest: Vec<ImageRef> = (0..test_len).filter(|&i| !used[i]).map(held).collect();
    rest.extend((0..train_len).map(|index| ImageRef {
        split: DataSplit::Train,
        index,
    }));
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(rest_seed));
    let total = split.adv_train_per_attack + split.adv_test_per_attack;
    let share = (rest.len() as f64 * split.adv_test_per_attack as f64 / total as f64).round() as usize;
    let benign_train: Vec<ImageRef> = bt.into_iter().map(held).collect();
    let benign_test: Vec<ImageRef> = be.into_iter().map(held).collect();
    let mut candidates_train = benign_train.clone();
    candidates_train.extend_from_slice(&rest[share..]);
    let mut candidates_test = benign_test.clone();
    candidates_test.extend_from_slice(&rest[..share]);
    Ok(Pools {
        benign_train,
        benign_test,
        candidates_train,
        candidates_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pools_are_disjoint_across_sides() {
        let split = SplitSettings {
            benign_train: 40,
            benign_test: 10,
            adv_train_per_attack: 8,
            adv_test_per_attack: 2,
        };
        let p = plan_pools(100, 60, &split, 1, 2).unwrap();
        assert_eq!((p.benign_train.len(), p.benign_test.len()), (40, 10));
        assert!(p.benign_train.iter().chain(&p.benign_test).all(|r| r.split == DataSplit::Test));
        let a: HashSet<_> = p.candidates_train.iter().collect();
        let b: HashSet<_> = p.candidates_test.iter().collect();
        assert!(a.is_disjoint(&b));
        assert_eq!(a.len() + b.len(), 160);
        assert_eq!(p.candidates_test.len(), 10 + 22);
        assert_eq!(p, plan_pools(100, 60, &split, 1, 2).unwrap());
        assert!(plan_pools(100, 30, &split, 1, 2).is_err());
    }
}
