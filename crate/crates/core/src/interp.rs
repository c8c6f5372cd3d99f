//! Distance-weighted linear interpolation between known snapshots.
//!
//! For a predicted snapshot `N` between known snapshots `M₁` and `M₂`:
//!
//! ```text
//! f(N) = |M₁N| / |M₁M₂| · f(M₂) + |NM₂| / |M₁M₂| · f(M₁)
//! ```
//!
//! applied to every slot and feature independently. This is the baseline
//! predictor and also the pre-upsampling stage feeding the learned model.

use serde::{Deserialize, Serialize};

use crate::clustering::{dbm_to_mw, mw_to_dbm};
use crate::dataset::{FeatureGrid, SrPair};
use crate::geom::Vec3;
use crate::{Error, Result, FEATURES, WINDOW};

/// Domain in which the power feature is blended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerDomain {
    /// Blend dBm values directly.
    #[default]
    Db,
    /// Blend linear milliwatts and convert back.
    Linear,
}

pub fn interpolate(pair: &SrPair, rx_positions: &[Vec3]) -> Result<FeatureGrid> {
    interpolate_known(&pair.known_indices, &pair.lr_features, rx_positions, PowerDomain::Db)
}

pub fn interpolate_with(pair: &SrPair, rx_positions: &[Vec3], domain: PowerDomain) -> Result<FeatureGrid> {
    interpolate_known(&pair.known_indices, &pair.lr_features, rx_positions, domain)
}

/// Fills a full window from the features at `known` snapshot indices.
/// Known snapshots are copied unchanged.
pub fn interpolate_known(
    known: &[usize],
    lr: &FeatureGrid,
    rx_positions: &[Vec3],
    domain: PowerDomain,
) -> Result<FeatureGrid> {
    if rx_positions.len() != WINDOW {
        return Err(Error::shape(format!("{WINDOW} rx positions"), rx_positions.len()));
    }
    if known.len() != lr.len() || known.len() < 2 {
        return Err(Error::shape(
            format!("{} low resolution snapshots (≥ 2)", known.len()),
            lr.len(),
        ));
    }
    if known[0] != 0 || *known.last().expect("non-empty") != WINDOW - 1 || known.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Data(format!("known indices {known:?} must ascend from 0 to {}", WINDOW - 1)));
    }
    let slots = lr[0].len();
    if lr.iter().any(|row| row.len() != slots) {
        return Err(Error::shape(format!("{slots} slots per snapshot"), "ragged rows"));
    }

    let mut out: FeatureGrid = vec![vec![[0.0; FEATURES]; slots]; WINDOW];
    for (seg, pair) in known.windows(2).enumerate() {
        let (i1, i2) = (pair[0], pair[1]);
        let (m1, m2) = (rx_positions[i1], rx_positions[i2]);
        let span = m1.distance(m2);
        if !(span > 0.0) {
            return Err(Error::Data(format!(
                "known snapshots {i1} and {i2} share the position {m1:?}"
            )));
        }
        out[i1] = lr[seg].clone();
        for n in i1 + 1..i2 {
            let a = m1.distance(rx_positions[n]) / span;
            let b = rx_positions[n].distance(m2) / span;
            for slot in 0..slots {
                let (f1, f2) = (&lr[seg][slot], &lr[seg + 1][slot]);
                out[n][slot] = blend(f1, f2, a, b, domain);
            }
        }
    }
    out[WINDOW - 1] = lr[lr.len() - 1].clone();
    Ok(out)
}

fn blend(f1: &[f64; FEATURES], f2: &[f64; FEATURES], a: f64, b: f64, domain: PowerDomain) -> [f64; FEATURES] {
    let mut v: [f64; FEATURES] = std::array::from_fn(|c| a * f2[c] + b * f1[c]);
    if domain == PowerDomain::Linear {
        let p = a * dbm_to_mw(f2[3]) + b * dbm_to_mw(f1[3]);
        v[3] = mw_to_dbm(p);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{downsample, Scale};
    use crate::clustering::Sample;
    use crate::scene::Visibility;
    use proptest::prelude::*;

    fn straight(spacing: f64) -> Vec<Vec3> {
        (0..WINDOW).map(|i| Vec3::new(3.0 + i as f64 * spacing, -1.0, 2.0)).collect()
    }

    fn sample_from(rx: Vec<Vec3>, f: impl Fn(usize, usize, usize) -> f64, slots: usize) -> Sample {
        Sample {
            route_id: 0,
            start_index: 0,
            tx: Vec3::ZERO,
            tag: Visibility::Los,
            rx_positions: rx,
            slot_object_ids: vec![Some(1); slots],
            features: (0..WINDOW)
                .map(|i| (0..slots).map(|j| std::array::from_fn(|c| f(i, j, c))).collect())
                .collect(),
            weights: vec![vec![1.0; slots]; WINDOW],
        }
    }

    #[test]
    fn midpoint_of_equal_spacing() {
        let lr = vec![vec![[0.0; 4]], vec![[10.0; 4]]];
        let out = interpolate_known(&[0, 16], &lr, &straight(1.0), PowerDomain::Db).unwrap();
        assert_eq!(out[8][0], [5.0; 4]);
    }

    #[test]
    fn quarter_step_at_scale_four() {
        let rx = straight(1.0);
        let s = sample_from(rx.clone(), |i, _, _| if i == 0 { 2.0 } else if i == 4 { 10.0 } else { 0.0 }, 1);
        let pair = downsample(&s, Scale::new(4).unwrap());
        let out = interpolate(&pair, &rx).unwrap();
        assert!((out[1][0][0] - 4.0).abs() < 1e-12);
        // coincides with M₁
        assert_eq!(out[0][0], [2.0; 4]);
        assert_eq!(out[4][0], [10.0; 4]);
    }

    #[test]
    fn known_snapshots_copied_bitwise() {
        let rx = straight(1.3);
        let s = sample_from(rx.clone(), |i, j, c| ((i * 31 + j * 7 + c) as f64).sin() * 17.3, 3);
        for scale in Scale::ALL {
            let pair = downsample(&s, scale);
            let out = interpolate(&pair, &rx).unwrap();
            for &k in &pair.known_indices {
                assert_eq!(out[k], s.features[k]);
            }
        }
    }

    #[test]
    fn duplicate_known_positions_fail() {
        let mut rx = straight(1.0);
        rx[4] = rx[0];
        let s = sample_from(rx.clone(), |_, _, _| 1.0, 1);
        let pair = downsample(&s, Scale::new(4).unwrap());
        assert!(matches!(interpolate(&pair, &rx), Err(Error::Data(_))));
    }

    #[test]
    fn linear_power_domain_blends_milliwatts() {
        let rx = straight(1.0);
        let lr = vec![vec![[0.0, 0.0, 0.0, 0.0]], vec![[0.0, 0.0, 0.0, 10.0]]];
        let out = interpolate_known(&[0, 16], &lr, &rx, PowerDomain::Linear).unwrap();
        // (1 + 10) / 2 mW
        assert!((out[8][0][3] - mw_to_dbm(5.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn affine_fields_are_exact(
            slope in proptest::collection::vec(-20.0f64..20.0, 4),
            offset in proptest::collection::vec(-300.0f64..300.0, 4),
            spacing in 0.2f64..3.0,
        ) {
            let rx = straight(spacing);
            let s = sample_from(rx.clone(), |i, j, c| offset[c] + (j as f64) + slope[c] * i as f64 * spacing, 2);
            for scale in Scale::ALL {
                let out = interpolate(&downsample(&s, scale), &rx).unwrap();
                for i in 0..WINDOW {
                    for j in 0..2 {
                        for c in 0..FEATURES {
                            let err = (out[i][j][c] - s.features[i][j][c]).abs();
                            prop_assert!(err <= 1e-12 * s.features[i][j][c].abs().max(1.0), "err {err}");
                        }
                    }
                }
            }
        }

        #[test]
        fn commutes_with_affine_maps(a in -5.0f64..5.0, b in -50.0f64..50.0) {
            let rx = straight(1.0);
            let s = sample_from(rx.clone(), |i, j, c| ((i + 2 * j + 3 * c) as f64).cos() * 9.0, 2);
            let t = sample_from(rx.clone(), |i, j, c| a * s.features[i][j][c] + b, 2);
            let scale = Scale::new(4).unwrap();
            let fs = interpolate(&downsample(&s, scale), &rx).unwrap();
            let ft = interpolate(&downsample(&t, scale), &rx).unwrap();
            for i in 0..WINDOW {
                for j in 0..2 {
                    for c in 0..FEATURES {
                        prop_assert!((ft[i][j][c] - (a * fs[i][j][c] + b)).abs() <= 1e-12 * ft[i][j][c].abs().max(1.0));
                    }
                }
            }
        }
    }
}
