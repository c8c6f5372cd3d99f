//! Residual multi-layer model refining interpolated windows.
//!
//! The input is the whole 17-snapshot window filled in by [`crate::interp`],
//! normalized and flattened. The output covers only the predicted snapshots.
//! Three blocks are applied in cascade and their outputs summed:
//!
//! ```text
//! h₁ = B₁(x), h₂ = B₂(h₁), h₃ = B₃(h₂), y = h₁ + h₂ + h₃
//! ```

pub mod adam;
pub mod checkpoint;
pub mod loss;
pub mod network;
pub mod train;

use ndarray::Array2;

use crate::clustering::Sample;
use crate::dataset::{downsample, FeatureGrid, NormStats, Scale, SrPair};
use crate::geom::Vec3;
use crate::interp::interpolate;
use crate::{par, Error, Result, FEATURES, WINDOW};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use loss::weighted_loss;
pub use network::{Activation, ElbSpec, Network};
pub use train::{train, EpochLoss, TrainConfig, TrainOutcome};

/// One super-resolution model for a fixed scale and slot count.
#[derive(Debug, Clone, PartialEq)]
pub struct SrModel {
    pub scale: Scale,
    pub slots: usize,
    pub norm: NormStats,
    pub seed: u64,
    /// Epochs trained so far.
    pub epoch: usize,
    pub net: Network,
}

pub fn input_dim(slots: usize) -> usize {
    WINDOW * slots * FEATURES
}

pub fn output_dim(scale: Scale, slots: usize) -> usize {
    scale.predicted_indices().len() * slots * FEATURES
}

/// Seeded model with identity normalization and residual summation on.
pub fn init_model(scale: Scale, slots: usize, spec: ElbSpec, seed: u64) -> Result<SrModel> {
    if slots == 0 {
        return Err(Error::InvalidConfig("slot count must be positive".into()));
    }
    Ok(SrModel {
        scale,
        slots,
        norm: NormStats::identity(),
        seed,
        epoch: 0,
        net: Network::new(input_dim(slots), output_dim(scale, slots), spec, seed)?,
    })
}

/// Network inputs and targets for a set of samples, one row per sample.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    /// Squared loss weights per output entry.
    pub w2: Array2<f64>,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SrModel {
    pub fn with_norm(mut self, norm: NormStats) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.net.residual = residual;
        self
    }

    fn check_pair(&self, pair: &SrPair) -> Result<()> {
        if pair.scale != self.scale {
            return Err(Error::InvalidConfig(format!(
                "model is for scale {}, sample is at scale {}",
                self.scale, pair.scale
            )));
        }
        if pair.lr_features.iter().any(|row| row.len() != self.slots) {
            return Err(Error::shape(format!("{} slots", self.slots), pair.slots()));
        }
        Ok(())
    }

    /// Normalized, flattened interpolation of the low resolution window.
    pub fn encode_input(&self, pair: &SrPair, rx_positions: &[Vec3]) -> Result<Vec<f64>> {
        self.check_pair(pair)?;
        let filled = interpolate(pair, rx_positions)?;
        Ok(flatten(&self.norm.apply_grid(&filled)))
    }

    /// Normalized targets and squared weights at the predicted snapshots.
    pub fn encode_target(&self, pair: &SrPair) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_pair(pair)?;
        if pair.hr_features.len() != WINDOW || pair.weights.len() != WINDOW {
            return Err(Error::shape(format!("{WINDOW} snapshots"), pair.hr_features.len()));
        }
        let predicted = self.scale.predicted_indices();
        let truth: FeatureGrid = predicted.iter().map(|&i| pair.hr_features[i].clone()).collect();
        let y = flatten(&self.norm.apply_grid(&truth));
        let w2 = predicted
            .iter()
            .flat_map(|&i| pair.weights[i].iter().flat_map(|w| [w * w; FEATURES]))
            .collect();
        Ok((y, w2))
    }

    pub fn encode_samples(&self, samples: &[Sample]) -> Result<Encoded> {
        let rows = par::map(samples, |s| -> Result<_> {
            let pair = downsample(s, self.scale);
            let x = self.encode_input(&pair, &s.rx_positions)?;
            let (y, w2) = self.encode_target(&pair)?;
            Ok((x, y, w2))
        });
        let (ni, no) = (self.net.input_dim, self.net.output_dim);
        let mut enc = Encoded {
            x: Array2::zeros((samples.len(), ni)),
            y: Array2::zeros((samples.len(), no)),
            w2: Array2::zeros((samples.len(), no)),
        };
        for (r, row) in rows.into_iter().enumerate() {
            let (x, y, w2) = row?;
            enc.x.row_mut(r).assign(&ndarray::ArrayView1::from(&x));
            enc.y.row_mut(r).assign(&ndarray::ArrayView1::from(&y));
            enc.w2.row_mut(r).assign(&ndarray::ArrayView1::from(&w2));
        }
        Ok(enc)
    }

    /// Predicted snapshots only, in feature units.
    pub fn forward(&self, pair: &SrPair, rx_positions: &[Vec3]) -> Result<FeatureGrid> {
        let x = self.encode_input(pair, rx_positions)?;
        let out = self.net.forward(ndarray::ArrayView2::from_shape((1, x.len()), &x).expect("one row"))?;
        let grid = unflatten(out.as_slice().expect("standard layout"), self.slots);
        Ok(self.norm.invert_grid(&grid))
    }

    /// Predictions for many samples at once, one grid per sample.
    pub fn forward_samples(&self, samples: &[Sample]) -> Result<Vec<FeatureGrid>> {
        let enc = self.encode_samples(samples)?;
        let out = self.net.forward(enc.x.view())?;
        Ok(out
            .rows()
            .into_iter()
            .map(|r| self.norm.invert_grid(&unflatten(r.as_slice().expect("row is contiguous"), self.slots)))
            .collect())
    }
}

pub(crate) fn flatten(grid: &FeatureGrid) -> Vec<f64> {
    grid.iter().flat_map(|row| row.iter().flatten().copied()).collect()
}

pub(crate) fn unflatten(flat: &[f64], slots: usize) -> FeatureGrid {
    flat.chunks(slots * FEATURES)
        .map(|row| row.chunks(FEATURES).map(|f| std::array::from_fn(|c| f[c])).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Visibility;

    fn sample(slots: usize) -> Sample {
        Sample {
            route_id: 0,
            start_index: 0,
            tx: Vec3::ZERO,
            tag: Visibility::Los,
            rx_positions: (0..WINDOW).map(|i| Vec3::new(i as f64, 0.0, 2.0)).collect(),
            slot_object_ids: vec![Some(1); slots],
            features: (0..WINDOW)
                .map(|i| (0..slots).map(|j| [i as f64, j as f64, 2.0, -60.0 - i as f64]).collect())
                .collect(),
            weights: vec![vec![1.0; slots]; WINDOW],
        }
    }

    #[test]
    fn dims_at_scale_four() {
        let m = init_model(Scale::new(4).unwrap(), 10, ElbSpec::default(), 1).unwrap();
        assert_eq!(m.net.input_dim, 680);
        // 12 predicted snapshots: every index outside {0, 4, 8, 12, 16}
        assert_eq!(m.scale.predicted_indices().len(), 12);
        assert_eq!(m.net.output_dim, 480);
        for scale in Scale::ALL {
            let m = init_model(scale, 3, ElbSpec::with_max_hidden(16), 1).unwrap();
            let pair = downsample(&sample(3), scale);
            let out = m.forward(&pair, &sample(3).rx_positions).unwrap();
            assert_eq!(out.len(), scale.predicted_indices().len());
            assert!(out.iter().all(|r| r.len() == 3));
        }
    }

    #[test]
    fn zero_blocks_output_channel_means() {
        let mut m = init_model(Scale::new(2).unwrap(), 2, ElbSpec::with_max_hidden(8), 3).unwrap();
        m.net.params.iter_mut().for_each(|p| *p = 0.0);
        let norm = NormStats {
            mean: [1.0, -2.0, 3.0, -70.0],
            std: [2.0, 2.0, 1.0, 5.0],
            constant: [false; 4],
        };
        let m = m.with_norm(norm);
        let s = sample(2);
        let out = m.forward(&downsample(&s, m.scale), &s.rx_positions).unwrap();
        assert!(out.iter().flatten().all(|f| *f == norm.mean));
    }

    #[test]
    fn input_keeps_known_snapshots() {
        let m = init_model(Scale::new(4).unwrap(), 2, ElbSpec::with_max_hidden(8), 3).unwrap();
        let s = sample(2);
        let pair = downsample(&s, m.scale);
        let x = m.encode_input(&pair, &s.rx_positions).unwrap();
        let grid = unflatten(&x, 2);
        for (k, &i) in pair.known_indices.iter().enumerate() {
            assert_eq!(grid[i], pair.lr_features[k]);
        }
    }

    #[test]
    fn scale_mismatch_rejected() {
        let m = init_model(Scale::new(4).unwrap(), 2, ElbSpec::with_max_hidden(8), 3).unwrap();
        let s = sample(2);
        assert!(m.forward(&downsample(&s, Scale::new(8).unwrap()), &s.rx_positions).is_err());
    }

    #[test]
    fn batch_and_single_forward_agree() {
        let m = init_model(Scale::new(4).unwrap(), 2, ElbSpec::with_max_hidden(8), 3).unwrap();
        let samples = vec![sample(2); 3];
        let many = m.forward_samples(&samples).unwrap();
        let one = m.forward(&downsample(&samples[0], m.scale), &samples[0].rx_positions).unwrap();
        for (a, b) in many[2].iter().flatten().zip(one.iter().flatten()) {
            for c in 0..FEATURES {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }
}
