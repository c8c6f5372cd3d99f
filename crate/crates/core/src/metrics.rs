//! Error metrics for predicted cluster power and location.
//!
//! Only predicted snapshots are scored, and by default only entries with
//! weight 1 (clusters actually present in the ray trace). Gap-filled entries
//! can be included for sensitivity runs. Error populations are sorted before
//! summation so reports do not depend on sample order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Sample;
use crate::dataset::{downsample, FeatureGrid, Scale};
use crate::interp::{interpolate_with, PowerDomain};
use crate::mll::{init_model, train, ElbSpec, SrModel, TrainConfig};
use crate::scene::Visibility;
use crate::{par, Error, Result};

/// How the location AME folds 3-D signed errors into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocationAme {
    /// `|mean(e_x)|`, `|mean(e_y)|`, `|mean(e_z)|` averaged.
    #[default]
    AxisMean,
    /// Norm of the mean error vector.
    VectorNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    /// Also score gap-filled entries.
    pub include_gap_filled: bool,
    pub location_ame: LocationAme,
}

impl MetricOptions {
    fn scores(&self, w: f64) -> bool {
        w == 1.0 || (self.include_gap_filled && w > 0.0)
    }
}

/// Something that fills the predicted snapshots of a window.
pub trait Predictor: Sync {
    fn name(&self) -> String;
    fn scale(&self) -> Scale;
    /// One grid per sample covering `scale().predicted_indices()`.
    fn predict(&self, samples: &[Sample]) -> Result<Vec<FeatureGrid>>;
}

/// Distance-weighted linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub scale: Scale,
    pub domain: PowerDomain,
}

impl Baseline {
    pub fn new(scale: Scale) -> Self {
        Self {
            scale,
            domain: PowerDomain::Db,
        }
    }
}

impl Predictor for Baseline {
    fn name(&self) -> String {
        "baseline".into()
    }

    fn scale(&self) -> Scale {
        self.scale
    }

    fn predict(&self, samples: &[Sample]) -> Result<Vec<FeatureGrid>> {
        let predicted = self.scale.predicted_indices();
        par::map(samples, |s| {
            let full = interpolate_with(&downsample(s, self.scale), &s.rx_positions, self.domain)?;
            Ok(predicted.iter().map(|&i| full[i].clone()).collect())
        })
        .into_iter()
        .collect()
    }
}

impl Predictor for SrModel {
    fn name(&self) -> String {
        "mll".into()
    }

    fn scale(&self) -> Scale {
        self.scale
    }

    fn predict(&self, samples: &[Sample]) -> Result<Vec<FeatureGrid>> {
        self.forward_samples(samples)
    }
}

/// Returns the ground truth itself; every error is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle(pub Scale);

impl Predictor for Oracle {
    fn name(&self) -> String {
        "truth".into()
    }

    fn scale(&self) -> Scale {
        self.0
    }

    fn predict(&self, samples: &[Sample]) -> Result<Vec<FeatureGrid>> {
        let predicted = self.0.predicted_indices();
        Ok(samples
            .iter()
            .map(|s| predicted.iter().map(|&i| s.features[i].clone()).collect())
            .collect())
    }
}

/// Euclidean center distance for every weight-1 entry.
pub fn location_errors(pred: &FeatureGrid, truth: &FeatureGrid, weights: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_grid(pred, truth, weights)?;
    let mut out = Vec::new();
    for ((p_row, t_row), w_row) in pred.iter().zip(truth).zip(weights) {
        for ((p, t), &w) in p_row.iter().zip(t_row).zip(w_row) {
            if w == 1.0 {
                out.push(distance(p, t));
            }
        }
    }
    Ok(out)
}

fn distance(p: &[f64; 4], t: &[f64; 4]) -> f64 {
    ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2) + (p[2] - t[2]).powi(2)).sqrt()
}

fn check_grid(pred: &FeatureGrid, truth: &FeatureGrid, weights: &[Vec<f64>]) -> Result<()> {
    let ok = pred.len() == truth.len()
        && truth.len() == weights.len()
        && pred.iter().zip(truth).zip(weights).all(|((p, t), w)| p.len() == t.len() && t.len() == w.len());
    if ok {
        Ok(())
    } else {
        Err(Error::shape(
            format!("{} × {} grid", truth.len(), truth.first().map_or(0, Vec::len)),
            format!("{} × {}", pred.len(), pred.first().map_or(0, Vec::len)),
        ))
    }
}

fn non_empty(errors: &[f64]) -> Result<()> {
    if errors.is_empty() {
        Err(Error::Data("no errors to aggregate".into()))
    } else {
        Ok(())
    }
}

fn sorted_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// `|mean(e)|`.
pub fn ame(errors: &[f64]) -> Result<f64> {
    non_empty(errors)?;
    Ok((sorted_sum(errors.iter().copied()) / errors.len() as f64).abs())
}

pub fn mae(errors: &[f64]) -> Result<f64> {
    non_empty(errors)?;
    Ok(sorted_sum(errors.iter().map(|e| e.abs())) / errors.len() as f64)
}

pub fn rmse(errors: &[f64]) -> Result<f64> {
    non_empty(errors)?;
    Ok((sorted_sum(errors.iter().map(|e| e * e)) / errors.len() as f64).sqrt())
}

/// Signed errors pooled over many samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorSet {
    /// Predicted minus true power, dB.
    pub power: Vec<f64>,
    /// Predicted minus true center per axis, m.
    pub axes: Vec<[f64; 3]>,
}

impl ErrorSet {
    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.axes.iter().map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt()).collect()
    }

    fn extend(&mut self, other: ErrorSet) {
        self.power.extend(other.power);
        self.axes.extend(other.axes);
    }
}

/// Errors of `pred` (predicted snapshots of one sample) against the sample.
pub fn sample_errors(pred: &FeatureGrid, sample: &Sample, scale: Scale, options: &MetricOptions) -> Result<ErrorSet> {
    let predicted = scale.predicted_indices();
    if sample.features.len() != crate::WINDOW {
        return Err(Error::shape(format!("{} snapshots", crate::WINDOW), sample.features.len()));
    }
    let truth: FeatureGrid = predicted.iter().map(|&i| sample.features[i].clone()).collect();
    let weights: Vec<Vec<f64>> = predicted.iter().map(|&i| sample.weights[i].clone()).collect();
    check_grid(pred, &truth, &weights)?;
    let mut set = ErrorSet::default();
    for ((p_row, t_row), w_row) in pred.iter().zip(&truth).zip(&weights) {
        for ((p, t), &w) in p_row.iter().zip(t_row).zip(w_row) {
            if options.scores(w) {
                set.power.push(p[3] - t[3]);
                set.axes.push([p[0] - t[0], p[1] - t[1], p[2] - t[2]]);
            }
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scale: u32,
    pub method: String,
    /// LOS, NLOS or ALL.
    pub scene: String,
    pub samples: usize,
    /// Scored (snapshot, slot) entries.
    pub entries: usize,
    pub ame_power: f64,
    pub mae_power: f64,
    pub rmse_power: f64,
    pub ame_location: f64,
    pub mae_location: f64,
    pub rmse_location: f64,
}

impl EvalReport {
    pub fn from_errors(scale: Scale, method: &str, scene: &str, samples: usize, errors: &ErrorSet, options: &MetricOptions) -> Result<Self> {
        non_empty(&errors.power)?;
        let dist = errors.distances();
        let n = errors.len() as f64;
        let axis_means: [f64; 3] = std::array::from_fn(|a| sorted_sum(errors.axes.iter().map(|e| e[a])) / n);
        let ame_location = match options.location_ame {
            LocationAme::AxisMean => axis_means.iter().map(|m| m.abs()).sum::<f64>() / 3.0,
            LocationAme::VectorNorm => axis_means.iter().map(|m| m * m).sum::<f64>().sqrt(),
        };
        let report = Self {
            scale: scale.into(),
            method: method.to_string(),
            scene: scene.to_string(),
            samples,
            entries: errors.len(),
            ame_power: ame(&errors.power)?,
            mae_power: mae(&errors.power)?,
            rmse_power: rmse(&errors.power)?,
            ame_location,
            mae_location: mae(&dist)?,
            rmse_location: rmse(&dist)?,
        };
        report.check_ordering()?;
        Ok(report)
    }

    /// `rmse ≥ mae ≥ ame` for both quantities, up to rounding.
    pub fn check_ordering(&self) -> Result<()> {
        let ok = |r: f64, m: f64, a: f64| {
            let tol = 1e-12 * r.abs().max(1.0);
            r + tol >= m && m + tol >= a
        };
        if ok(self.rmse_power, self.mae_power, self.ame_power) && ok(self.rmse_location, self.mae_location, self.ame_location) {
            Ok(())
        } else {
            Err(Error::Numeric(format!("metric ordering violated in {self:?}")))
        }
    }
}

/// Report over all samples together.
pub fn evaluate(predictor: &dyn Predictor, samples: &[Sample], options: &MetricOptions) -> Result<EvalReport> {
    let sets = errors_per_sample(predictor, samples, options)?;
    let mut all = ErrorSet::default();
    sets.into_iter().for_each(|s| all.extend(s));
    EvalReport::from_errors(predictor.scale(), &predictor.name(), "ALL", samples.len(), &all, options)
}

fn errors_per_sample(predictor: &dyn Predictor, samples: &[Sample], options: &MetricOptions) -> Result<Vec<ErrorSet>> {
    let scale = predictor.scale();
    let preds = predictor.predict(samples)?;
    if preds.len() != samples.len() {
        return Err(Error::shape(format!("{} predictions", samples.len()), preds.len()));
    }
    preds
        .iter()
        .zip(samples)
        .map(|(p, s)| sample_errors(p, s, scale, options))
        .collect()
}

/// One report per propagation condition present in `samples` (LOS, then
/// NLOS), followed by one over everything.
pub fn evaluate_by_tag(predictor: &dyn Predictor, samples: &[Sample], options: &MetricOptions) -> Result<Vec<EvalReport>> {
    let sets = errors_per_sample(predictor, samples, options)?;
    let (scale, name) = (predictor.scale(), predictor.name());
    let mut reports = Vec::new();
    for tag in [Visibility::Los, Visibility::Nlos] {
        let mut errs = ErrorSet::default();
        let mut count = 0;
        for (s, e) in samples.iter().zip(&sets) {
            if s.tag == tag {
                errs.extend(e.clone());
                count += 1;
            }
        }
        if !errs.is_empty() {
            reports.push(EvalReport::from_errors(scale, &name, tag.as_str(), count, &errs, options)?);
        }
    }
    let mut all = ErrorSet::default();
    sets.into_iter().for_each(|s| all.extend(s));
    reports.push(EvalReport::from_errors(scale, &name, "ALL", samples.len(), &all, options)?);
    Ok(reports)
}

#[derive(Serialize)]
struct EvalRow<'a> {
    scale: u32,
    method: &'a str,
    ame_power: f64,
    ame_loc: f64,
    rmse_power: f64,
    rmse_loc: f64,
    scene: &'a str,
    mae_power: f64,
    mae_loc: f64,
    samples: usize,
    entries: usize,
}

fn csv_writer(stage: &'static str, path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(stage, path, e))
}

fn csv_error(stage: &'static str, path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Write {
            stage,
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            stage,
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Generic CSV writer for any row type.
pub fn write_csv<T: Serialize>(stage: &'static str, path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv_writer(stage, path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(stage, path, e))?;
    }
    w.flush().map_err(|source| Error::Write {
        stage,
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv<T: serde::de::DeserializeOwned>(stage: &'static str, path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Read {
            stage,
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            stage,
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                stage,
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Columns: scale, method, ame_power, ame_loc, rmse_power, rmse_loc, scene,
/// then mae_power, mae_loc, samples, entries.
pub fn write_eval_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let rows: Vec<EvalRow> = reports
        .iter()
        .map(|r| EvalRow {
            scale: r.scale,
            method: &r.method,
            ame_power: r.ame_power,
            ame_loc: r.ame_location,
            rmse_power: r.rmse_power,
            rmse_loc: r.rmse_location,
            scene: &r.scene,
            mae_power: r.mae_power,
            mae_loc: r.mae_location,
            samples: r.samples,
            entries: r.entries,
        })
        .collect();
    write_csv("eval", path, &rows)
}

pub fn read_eval_csv(path: &Path) -> Result<Vec<EvalReport>> {
    #[derive(Deserialize)]
    struct Row {
        scale: u32,
        method: String,
        ame_power: f64,
        ame_loc: f64,
        rmse_power: f64,
        rmse_loc: f64,
        scene: String,
        mae_power: f64,
        mae_loc: f64,
        samples: usize,
        entries: usize,
    }
    Ok(read_csv::<Row>("report", path)?
        .into_iter()
        .map(|r| EvalReport {
            scale: r.scale,
            method: r.method,
            scene: r.scene,
            samples: r.samples,
            entries: r.entries,
            ame_power: r.ame_power,
            mae_power: r.mae_power,
            rmse_power: r.rmse_power,
            ame_location: r.ame_loc,
            mae_location: r.mae_loc,
            rmse_location: r.rmse_loc,
        })
        .collect())
}

/// Relative change of `value` against `reference`, in percent.
pub fn pct_delta(value: f64, reference: f64) -> f64 {
    (value - reference) / reference * 100.0
}

/// One model variant in an ablation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub max_hidden: usize,
    pub residual: bool,
}

impl Variant {
    pub fn label(&self) -> String {
        format!("dim{}-{}", self.max_hidden, if self.residual { "res" } else { "nores" })
    }
}

/// Hidden widths 32 to 1024 with residual summation, then 512 without it.
/// The first entry is the reference for the deltas.
pub fn default_variants() -> Vec<Variant> {
    let mut v: Vec<Variant> = [32, 64, 128, 256, 512, 1024]
        .into_iter()
        .map(|max_hidden| Variant { max_hidden, residual: true })
        .collect();
    v.push(Variant {
        max_hidden: 512,
        residual: false,
    });
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub max_hidden: usize,
    pub residual: bool,
    pub mae_power: f64,
    pub mae_location: f64,
    /// Change against the first variant, percent.
    pub delta_power_pct: f64,
    pub delta_location_pct: f64,
}

/// Data and settings shared by every variant of an ablation run.
pub struct AblationSetup<'a> {
    pub scale: Scale,
    pub slots: usize,
    pub norm: crate::dataset::NormStats,
    pub train: &'a [Sample],
    pub val: &'a [Sample],
    pub test: &'a [Sample],
    pub config: TrainConfig,
    pub model_seed: u64,
}

/// Trains each variant with the same seeds and data and scores the final
/// parameters on the test split.
pub fn ablation(setup: &AblationSetup, variants: &[Variant], options: &MetricOptions) -> Result<Vec<AblationRow>> {
    if variants.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one variant".into()));
    }
    let mut raw = Vec::with_capacity(variants.len());
    for v in variants {
        log::info!("ablation variant {}", v.label());
        let model = init_model(setup.scale, setup.slots, ElbSpec::with_max_hidden(v.max_hidden), setup.model_seed)?
            .with_norm(setup.norm)
            .with_residual(v.residual);
        let out = train(model, setup.train, setup.val, &setup.config)?;
        let report = evaluate(&out.model, setup.test, options)?;
        raw.push((report.mae_power, report.mae_location));
    }
    let (ref_p, ref_l) = raw[0];
    Ok(variants
        .iter()
        .zip(raw)
        .map(|(v, (p, l))| AblationRow {
            variant: v.label(),
            max_hidden: v.max_hidden,
            residual: v.residual,
            mae_power: p,
            mae_location: l,
            delta_power_pct: pct_delta(p, ref_p),
            delta_location_pct: pct_delta(l, ref_l),
        })
        .collect())
}

/// In-distribution against out-of-distribution error for one predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub scale: u32,
    pub method: String,
    pub rmse_power_in: f64,
    pub rmse_power_out: f64,
    pub rmse_loc_in: f64,
    pub rmse_loc_out: f64,
    /// Percent change from in-distribution to unseen scenes.
    pub degradation_power_pct: f64,
    pub degradation_loc_pct: f64,
}

pub fn generalization(predictor: &dyn Predictor, in_dist: &[Sample], unseen: &[Sample], options: &MetricOptions) -> Result<GeneralizationRow> {
    let a = evaluate(predictor, in_dist, options)?;
    let b = evaluate(predictor, unseen, options)?;
    Ok(GeneralizationRow {
        scale: a.scale,
        method: a.method,
        rmse_power_in: a.rmse_power,
        rmse_power_out: b.rmse_power,
        rmse_loc_in: a.rmse_location,
        rmse_loc_out: b.rmse_location,
        degradation_power_pct: pct_delta(b.rmse_power, a.rmse_power),
        degradation_loc_pct: pct_delta(b.rmse_location, a.rmse_location),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::WINDOW;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn affine_sample(k: usize, slots: usize) -> Sample {
        let dir = Vec3::new(0.6, 0.8, 0.0);
        let rx: Vec<Vec3> = (0..WINDOW).map(|i| Vec3::new(5.0, -3.0, 2.0) + dir * (i as f64 * 1.1)).collect();
        Sample {
            route_id: k as u32,
            start_index: 0,
            tx: Vec3::new(0.0, 0.0, 8.0),
            tag: if k.is_multiple_of(2) { Visibility::Los } else { Visibility::Nlos },
            rx_positions: rx,
            slot_object_ids: vec![Some(1); slots],
            features: (0..WINDOW)
                .map(|i| {
                    let s = i as f64 * 1.1;
                    (0..slots)
                        .map(|j| [10.0 + s * 0.3 + j as f64, -4.0 + 0.1 * s * k as f64, 7.0, -80.0 + 0.5 * s - j as f64])
                        .collect()
                })
                .collect(),
            weights: vec![vec![1.0; slots]; WINDOW],
        }
    }

    #[test]
    fn metric_examples() {
        assert_eq!(ame(&[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, -1.0]).unwrap(), 1.0);
        for f in [ame, mae, rmse] {
            assert_eq!(f(&[2.0, 2.0]).unwrap(), 2.0);
            assert!(f(&[]).is_err());
        }
        assert!((rmse(&[0.0, 3.0]).unwrap() - 4.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn three_four_five() {
        let truth = vec![vec![[1.0, 1.0, 1.0, 0.0]]];
        let pred = vec![vec![[4.0, 5.0, 1.0, 0.0]]];
        assert_eq!(location_errors(&pred, &truth, &[vec![1.0]]).unwrap(), vec![5.0]);
        assert_eq!(location_errors(&truth, &truth, &[vec![1.0]]).unwrap(), vec![0.0]);
        assert!(location_errors(&pred, &truth, &[vec![1e-2]]).unwrap().is_empty());
    }

    #[test]
    fn location_errors_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut g = || -> FeatureGrid {
            (0..5).map(|_| (0..3).map(|_| std::array::from_fn(|_| rng.random_range(-50.0..50.0))).collect()).collect()
        };
        let (p, t) = (g(), g());
        let w: Vec<Vec<f64>> = (0..5).map(|i| (0..3).map(|j| [1.0, 1e-2, 0.0][(i + j) % 3]).collect()).collect();
        let got = location_errors(&p, &t, &w).unwrap();
        let mut expect = Vec::new();
        for i in 0..5 {
            for j in 0..3 {
                if w[i][j] == 1.0 {
                    let d: f64 = (0..3).map(|c| (p[i][j][c] - t[i][j][c]).powi(2)).sum();
                    expect.push(d.sqrt());
                }
            }
        }
        assert_eq!(got, expect);
    }

    #[test]
    fn baseline_is_exact_on_affine_data() {
        let samples: Vec<Sample> = (0..6).map(|k| affine_sample(k, 3)).collect();
        for scale in Scale::ALL {
            let r = evaluate(&Baseline::new(scale), &samples, &MetricOptions::default()).unwrap();
            assert!(r.rmse_location < 1e-9 && r.rmse_power < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn truth_scores_zero() {
        let samples: Vec<Sample> = (0..4).map(|k| affine_sample(k, 2)).collect();
        let r = evaluate(&Oracle(Scale::new(8).unwrap()), &samples, &MetricOptions::default()).unwrap();
        assert_eq!([r.ame_power, r.mae_power, r.rmse_power, r.ame_location, r.mae_location, r.rmse_location], [0.0; 6]);
    }

    #[test]
    fn order_and_padding_do_not_matter() {
        let mut samples: Vec<Sample> = (0..8)
            .map(|k| {
                let mut s = affine_sample(k, 3);
                for i in 0..WINDOW {
                    s.features[i][1][3] += ((i * 7 + k) as f64).sin() * 3.0;
                    s.features[i][0][0] += ((i * 3 + k) as f64).cos();
                }
                s
            })
            .collect();
        let b = Baseline::new(Scale::new(4).unwrap());
        let opts = MetricOptions::default();
        let before = evaluate_by_tag(&b, &samples, &opts).unwrap();
        samples.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(evaluate_by_tag(&b, &samples, &opts).unwrap(), before);

        // padding entries with garbage features change nothing
        let mut padded = samples.clone();
        for s in &mut padded {
            s.slot_object_ids.push(None);
            for i in 0..WINDOW {
                s.features[i].push([1e6, -1e6, 3e5, 999.0]);
                s.weights[i].push(0.0);
            }
        }
        let a = evaluate(&b, &samples, &opts).unwrap();
        let c = evaluate(&b, &padded, &opts).unwrap();
        assert_eq!(a.rmse_power, c.rmse_power);
        assert_eq!(a.mae_location, c.mae_location);
        assert_eq!(a.entries, c.entries);
    }

    #[test]
    fn tags_are_split() {
        let samples: Vec<Sample> = (0..4).map(|k| affine_sample(k, 1)).collect();
        let r = evaluate_by_tag(&Baseline::new(Scale::new(2).unwrap()), &samples, &MetricOptions::default()).unwrap();
        let scenes: Vec<&str> = r.iter().map(|r| r.scene.as_str()).collect();
        assert_eq!(scenes, ["LOS", "NLOS", "ALL"]);
        assert_eq!(r[2].entries, r[0].entries + r[1].entries);
    }

    #[test]
    fn ame_variants_bounded_by_mae() {
        let errs = ErrorSet {
            power: vec![1.0, -2.0, 0.5],
            axes: vec![[1.0, 2.0, -2.0], [0.5, -1.0, 0.0], [3.0, 0.0, 4.0]],
        };
        for location_ame in [LocationAme::AxisMean, LocationAme::VectorNorm] {
            let opts = MetricOptions { location_ame, ..MetricOptions::default() };
            let r = EvalReport::from_errors(Scale::new(2).unwrap(), "x", "ALL", 1, &errs, &opts).unwrap();
            assert!(r.ame_location <= r.mae_location);
        }
        let opts = MetricOptions::default();
        let r = EvalReport::from_errors(Scale::new(2).unwrap(), "x", "ALL", 1, &errs, &opts).unwrap();
        // mean errors (1.5, 1/3, 2/3)
        assert!((r.ame_location - (1.5 + 1.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gap_filled_entries_are_opt_in() {
        let mut s = affine_sample(0, 1);
        let scale = Scale::new(2).unwrap();
        s.weights[1][0] = 1e-2;
        let pred: FeatureGrid = scale.predicted_indices().iter().map(|_| vec![[0.0; 4]]).collect();
        let default = sample_errors(&pred, &s, scale, &MetricOptions::default()).unwrap();
        let with = sample_errors(&pred, &s, scale, &MetricOptions { include_gap_filled: true, ..Default::default() }).unwrap();
        assert_eq!(with.len(), default.len() + 1);
    }

    #[test]
    fn eval_csv_round_trip() {
        let samples: Vec<Sample> = (0..4).map(|k| affine_sample(k, 2)).collect();
        let reports = evaluate_by_tag(&Baseline::new(Scale::new(4).unwrap()), &samples, &MetricOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        write_eval_csv(&path, &reports).unwrap();
        let header = std::fs::read_to_string(&path).unwrap();
        assert!(header.starts_with("scale,method,ame_power,ame_loc,rmse_power,rmse_loc,scene,"));
        assert_eq!(read_eval_csv(&path).unwrap(), reports);
    }

    #[test]
    fn deltas_from_raw_values() {
        assert_eq!(pct_delta(2.0, 2.0), 0.0);
        assert!((pct_delta(1.5, 2.0) + 25.0).abs() < 1e-12);
    }
}
