//! Low/high resolution pairs, route-wise splits and feature normalization.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::Sample;
use crate::{Error, Result, FEATURES, WINDOW};

/// Super-resolution factor δ: every δ-th snapshot of a window is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Scale(u32);

impl Scale {
    pub const ALL: [Scale; 4] = [Scale(2), Scale(4), Scale(8), Scale(16)];

    pub fn new(factor: u32) -> Result<Self> {
        match factor {
            2 | 4 | 8 | 16 => Ok(Scale(factor)),
            other => Err(Error::InvalidConfig(format!(
                "scale factor {other} is not one of 2, 4, 8, 16"
            ))),
        }
    }

    pub fn factor(self) -> usize {
        self.0 as usize
    }

    /// Known (low resolution) snapshot indices `0, δ, 2δ, …, 16`.
    pub fn known_indices(self) -> Vec<usize> {
        (0..WINDOW).step_by(self.factor()).collect()
    }

    /// Snapshot indices to predict, ascending.
    pub fn predicted_indices(self) -> Vec<usize> {
        (0..WINDOW).filter(|i| i % self.factor() != 0).collect()
    }

    pub fn is_known(self, index: usize) -> bool {
        index.is_multiple_of(self.factor())
    }
}

impl TryFrom<u32> for Scale {
    type Error = Error;
    fn try_from(v: u32) -> Result<Self> {
        Scale::new(v)
    }
}

impl From<Scale> for u32 {
    fn from(s: Scale) -> u32 {
        s.0
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Snapshot-major feature grid: `[snapshot][slot][feature]`.
pub type FeatureGrid = Vec<Vec<[f64; FEATURES]>>;

#[derive(Debug, Clone, PartialEq)]
pub struct SrPair {
    pub scale: Scale,
    pub known_indices: Vec<usize>,
    /// Features at the known snapshots only.
    pub lr_features: FeatureGrid,
    pub hr_features: FeatureGrid,
    pub weights: Vec<Vec<f64>>,
}

impl SrPair {
    pub fn slots(&self) -> usize {
        self.hr_features.first().map_or(0, Vec::len)
    }
}

pub fn downsample(sample: &Sample, scale: Scale) -> SrPair {
    let known_indices = scale.known_indices();
    SrPair {
        scale,
        lr_features: known_indices.iter().map(|&i| sample.features[i].clone()).collect(),
        known_indices,
        hr_features: sample.features.clone(),
        weights: sample.weights.clone(),
    }
}

/// Downsamples with a raw factor, rejecting anything but 2, 4, 8 or 16.
pub fn downsample_by(sample: &Sample, factor: u32) -> Result<SrPair> {
    Ok(downsample(sample, Scale::new(factor)?))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Fewer samples cannot give a non-empty 5:1 split with both halves of the
/// holdout populated.
pub const MIN_SPLIT_SAMPLES: usize = 12;

/// Routes needed before whole routes are assigned to one side.
pub const MIN_ROUTES_FOR_ROUTE_SPLIT: usize = 6;

/// Splits samples about 5:1 into train and holdout, then halves the holdout
/// into validation and test (the smaller half going to validation).
///
/// With at least [`MIN_ROUTES_FOR_ROUTE_SPLIT`] routes whole routes go to one
/// side; otherwise individual samples are shuffled.
pub fn split(samples: &[Sample], seed: u64) -> Result<Split> {
    if samples.len() < MIN_SPLIT_SAMPLES {
        return Err(Error::Data(format!(
            "{} samples are too few to split; need at least {MIN_SPLIT_SAMPLES}",
            samples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target_holdout = ((samples.len() as f64) / 6.0).round().max(2.0) as usize;

    let mut by_route: BTreeMap<u32, Vec<&Sample>> = BTreeMap::new();
    for s in samples {
        by_route.entry(s.route_id).or_default().push(s);
    }

    let mut groups: Vec<Vec<&Sample>> = if by_route.len() >= MIN_ROUTES_FOR_ROUTE_SPLIT {
        by_route.into_values().collect()
    } else {
        samples.iter().map(|s| vec![s]).collect()
    };
    groups.shuffle(&mut rng);

    let mut holdout: Vec<Vec<&Sample>> = Vec::new();
    let mut held = 0;
    while held < target_holdout && groups.len() > 1 {
        let g = groups.pop().expect("non-empty");
        held += g.len();
        holdout.push(g);
    }

    let val_target = held / 2;
    let mut val = Vec::new();
    let mut test = Vec::new();
    if holdout.len() == 1 {
        let only: Vec<&Sample> = holdout.pop().expect("one group");
        let (v, t) = only.split_at(val_target);
        val.extend(v.iter().map(|s| (*s).clone()));
        test.extend(t.iter().map(|s| (*s).clone()));
    } else {
        // whole routes: fill validation up to half the holdout, rest to test
        holdout.sort_by_key(|g| g.len());
        for g in holdout {
            let dest = if val.is_empty() || val.len() + g.len() <= val_target {
                &mut val
            } else {
                &mut test
            };
            dest.extend(g.into_iter().cloned());
        }
    }
    if val.is_empty() || test.is_empty() {
        return Err(Error::Data("holdout too small to give both validation and test samples".into()));
    }

    let mut train: Vec<Sample> = groups.into_iter().flatten().cloned().collect();
    let order = |s: &Sample| (s.route_id, s.start_index);
    train.sort_by_key(order);
    val.sort_by_key(order);
    test.sort_by_key(order);
    Ok(Split { train, val, test })
}

/// Per-feature-channel mean and standard deviation, pooled over slots and
/// snapshots of the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; FEATURES],
    pub std: [f64; FEATURES],
    /// Channels with zero spread; their std is stored as 1.
    pub constant: [bool; FEATURES],
}

impl NormStats {
    /// Statistics that leave values unchanged.
    pub fn identity() -> Self {
        Self {
            mean: [0.0; FEATURES],
            std: [1.0; FEATURES],
            constant: [false; FEATURES],
        }
    }

    pub fn apply(&self, channel: usize, x: f64) -> f64 {
        (x - self.mean[channel]) / self.std[channel]
    }

    pub fn invert(&self, channel: usize, z: f64) -> f64 {
        z * self.std[channel] + self.mean[channel]
    }

    pub fn apply_grid(&self, grid: &FeatureGrid) -> FeatureGrid {
        grid.iter()
            .map(|row| row.iter().map(|f| std::array::from_fn(|c| self.apply(c, f[c]))).collect())
            .collect()
    }

    pub fn invert_grid(&self, grid: &FeatureGrid) -> FeatureGrid {
        grid.iter()
            .map(|row| row.iter().map(|f| std::array::from_fn(|c| self.invert(c, f[c]))).collect())
            .collect()
    }
}

/// Fits statistics over every entry with positive weight.
pub fn fit_norm(train: &[Sample]) -> Result<NormStats> {
    let mut count = 0usize;
    let mut sum = [0.0; FEATURES];
    for s in train {
        for (row, wrow) in s.features.iter().zip(&s.weights) {
            for (f, &w) in row.iter().zip(wrow) {
                if w > 0.0 {
                    count += 1;
                    for c in 0..FEATURES {
                        sum[c] += f[c];
                    }
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::Data("no weighted entries to fit normalization on".into()));
    }
    let mean: [f64; FEATURES] = std::array::from_fn(|c| sum[c] / count as f64);
    let mut sq = [0.0; FEATURES];
    for s in train {
        for (row, wrow) in s.features.iter().zip(&s.weights) {
            for (f, &w) in row.iter().zip(wrow) {
                if w > 0.0 {
                    for c in 0..FEATURES {
                        sq[c] += (f[c] - mean[c]).powi(2);
                    }
                }
            }
        }
    }
    let mut std = [1.0; FEATURES];
    let mut constant = [false; FEATURES];
    for c in 0..FEATURES {
        let sd = (sq[c] / count as f64).sqrt();
        if sd > 1e-12 * mean[c].abs().max(1.0) {
            std[c] = sd;
        } else {
            constant[c] = true;
        }
    }
    Ok(NormStats { mean, std, constant })
}

/// Describes one prepared dataset on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub scale: Scale,
    pub seed: u64,
    pub slots: usize,
    pub normalize: bool,
    pub norm_stats: NormStats,
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

pub const MANIFEST_VERSION: u32 = 1;

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json("dataset", path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = crate::io::read_json("dataset", path)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Version {
                found: m.version,
                expected: MANIFEST_VERSION,
            });
        }
        Ok(m)
    }

    /// Split file paths are relative to the manifest's directory.
    pub fn resolve(&self, manifest_path: &Path, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(file)
        }
    }

    pub fn load_split(&self, manifest_path: &Path) -> Result<Split> {
        let load = |p: &Path| crate::clustering::load_samples(&self.resolve(manifest_path, p));
        Ok(Split {
            train: load(&self.train)?,
            val: load(&self.val)?,
            test: load(&self.test)?,
        })
    }

    /// Statistics actually used for training: fitted ones or identity.
    pub fn effective_norm(&self) -> NormStats {
        if self.normalize {
            self.norm_stats
        } else {
            NormStats::identity()
        }
    }
}
