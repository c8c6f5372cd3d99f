//! Object-based clustering, cluster tracking and window segmentation.
//!
//! Rays that hit the same object form one cluster. Its center is the
//! power-weighted mean of the interaction points and its power is the sum of
//! member powers, both computed in linear milliwatts. Clusters are tracked
//! along the route by object identity, and the route is cut into windows of
//! [`WINDOW`] snapshots with a fixed number of cluster slots per window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::raytracer::{Snapshot, LOS_ID};
use crate::scene::Visibility;
use crate::{Error, Result, FEATURES, WINDOW};

/// Loss weight given to a slot whose object is missing at some snapshot of
/// the window.
pub const GAP_WEIGHT: f64 = 1e-2;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Which ray attribute identifies a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    /// One cluster per scene object.
    #[default]
    Object,
    /// One cluster per box face.
    Facet,
}

impl ClusterMode {
    /// Track key of a ray: the object id, or `object·6 + face` per facet.
    /// LOS is always `-1`.
    pub fn key(self, object_id: i64, facet: Option<u8>) -> i64 {
        match (self, facet) {
            (ClusterMode::Facet, Some(f)) if object_id != LOS_ID => object_id * 6 + f as i64,
            _ => object_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Track key; equals `object_id` in object mode.
    pub key: i64,
    pub object_id: i64,
    pub center: Vec3,
    pub power_dbm: f64,
    pub ray_count: usize,
}

impl Cluster {
    pub fn power_mw(&self) -> f64 {
        dbm_to_mw(self.power_dbm)
    }
}

/// Groups a snapshot's rays into clusters ordered by key.
pub fn cluster_snapshot(snapshot: &Snapshot) -> Vec<Cluster> {
    cluster_snapshot_with(snapshot, ClusterMode::Object)
}

pub fn cluster_snapshot_with(snapshot: &Snapshot, mode: ClusterMode) -> Vec<Cluster> {
    struct Acc {
        object_id: i64,
        weighted: Vec3,
        power: f64,
        count: usize,
    }
    let mut groups: BTreeMap<i64, Acc> = BTreeMap::new();
    for ray in &snapshot.rays {
        let p = dbm_to_mw(ray.power_dbm);
        let acc = groups.entry(mode.key(ray.object_id, ray.facet)).or_insert(Acc {
            object_id: ray.object_id,
            weighted: Vec3::ZERO,
            power: 0.0,
            count: 0,
        });
        acc.weighted += ray.interaction_point * p;
        acc.power += p;
        acc.count += 1;
    }
    groups
        .into_iter()
        .filter(|(_, a)| a.power > 0.0)
        .map(|(key, a)| Cluster {
            key,
            object_id: a.object_id,
            center: a.weighted / a.power,
            power_dbm: mw_to_dbm(a.power),
            ray_count: a.count,
        })
        .collect()
}

/// Clusters of one object along a sequence of snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub key: i64,
    pub object_id: i64,
    pub clusters: Vec<Option<Cluster>>,
}

impl Track {
    pub fn mask(&self) -> Vec<bool> {
        self.clusters.iter().map(Option::is_some).collect()
    }
}

/// Associates clusters across snapshots by key. Tracks come back sorted by
/// key, each spanning every input snapshot.
pub fn track_clusters(clustered: &[Vec<Cluster>]) -> Vec<Track> {
    let n = clustered.len();
    let mut tracks: BTreeMap<i64, Track> = BTreeMap::new();
    for (i, clusters) in clustered.iter().enumerate() {
        for c in clusters {
            let t = tracks.entry(c.key).or_insert_with(|| Track {
                key: c.key,
                object_id: c.object_id,
                clusters: vec![None; n],
            });
            t.clusters[i] = Some(c.clone());
        }
    }
    tracks.into_values().collect()
}

/// One training window: 17 snapshots × J slots × (x, y, z, power).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub route_id: u32,
    pub start_index: usize,
    pub tx: Vec3,
    /// `LOS` when the direct ray exists in most snapshots of the window.
    pub tag: Visibility,
    pub rx_positions: Vec<Vec3>,
    /// Track key per slot; `null` for padding slots.
    pub slot_object_ids: Vec<Option<i64>>,
    pub features: Vec<Vec<[f64; FEATURES]>>,
    pub weights: Vec<Vec<f64>>,
}

impl Sample {
    pub fn slots(&self) -> usize {
        self.slot_object_ids.len()
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.slots();
        let ok = self.rx_positions.len() == WINDOW
            && self.features.len() == WINDOW
            && self.weights.len() == WINDOW
            && self.features.iter().all(|r| r.len() == j)
            && self.weights.iter().all(|r| r.len() == j);
        if !ok {
            return Err(Error::shape(
                format!("{WINDOW} snapshots × {j} slots"),
                format!(
                    "{} rx, {} feature rows, {} weight rows",
                    self.rx_positions.len(),
                    self.features.len(),
                    self.weights.len()
                ),
            ));
        }
        // 0 for padding, 1 for observed clusters, the gap weight in between
        if !self.weights.iter().flatten().all(|w| (0.0..=1.0).contains(w)) {
            return Err(Error::Data("sample weights must lie in [0, 1]".into()));
        }
        if !self.features.iter().flatten().flatten().all(|v| v.is_finite()) {
            return Err(Error::Data("sample features must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentConfig {
    pub window: usize,
    pub stride: usize,
    pub slots: usize,
    pub gap_weight: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            window: WINDOW,
            stride: WINDOW,
            slots: 10,
            gap_weight: GAP_WEIGHT,
        }
    }
}

/// Cuts the route into windows and fills `slots` cluster slots per window.
///
/// Slots go to the objects with the highest mean linear power over the
/// window (absent snapshots count as zero power), strongest first, ties by
/// ascending key. A slot whose object is missing at some snapshots gets
/// features interpolated along the route from the nearest snapshots where it
/// is present (held constant past the first/last presence) and the gap
/// weight there. Slots without an object are zero features with weight 0.
pub fn segment_and_pad(
    tracks: &[Track],
    snapshots: &[Snapshot],
    config: &SegmentConfig,
) -> Result<Vec<Sample>> {
    if config.window != WINDOW {
        return Err(Error::InvalidConfig(format!("window must be {WINDOW}, got {}", config.window)));
    }
    if config.stride == 0 || config.slots == 0 {
        return Err(Error::InvalidConfig("stride and slots must be positive".into()));
    }
    let n = snapshots.len();
    if n < config.window {
        return Err(Error::RouteTooShort {
            count: n,
            min: config.window,
        });
    }
    if let Some(t) = tracks.iter().find(|t| t.clusters.len() != n) {
        return Err(Error::shape(format!("{n} snapshots per track"), format!("{} in track {}", t.clusters.len(), t.key)));
    }

    let mut samples = Vec::new();
    let mut start = 0;
    while start + config.window <= n {
        let span = start..start + config.window;
        samples.push(window_sample(tracks, &snapshots[span], start, config));
        start += config.stride;
    }
    Ok(samples)
}

fn window_sample(tracks: &[Track], snaps: &[Snapshot], start: usize, config: &SegmentConfig) -> Sample {
    let w = config.window;
    let rx: Vec<Vec3> = snaps.iter().map(|s| s.rx_position).collect();

    let mut ranked: Vec<(f64, &Track)> = tracks
        .iter()
        .filter_map(|t| {
            let present = &t.clusters[start..start + w];
            let total: f64 = present.iter().flatten().map(Cluster::power_mw).sum();
            present.iter().any(Option::is_some).then_some((total / w as f64, t))
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.key.cmp(&b.1.key)));
    ranked.truncate(config.slots);

    let mut features = vec![vec![[0.0; FEATURES]; config.slots]; w];
    let mut weights = vec![vec![0.0; config.slots]; w];
    let mut ids = vec![None; config.slots];

    for (slot, (_, track)) in ranked.iter().enumerate() {
        ids[slot] = Some(track.key);
        let window = &track.clusters[start..start + w];
        let filled = gap_fill(window, &rx);
        for i in 0..w {
            features[i][slot] = filled[i];
            weights[i][slot] = if window[i].is_some() { 1.0 } else { config.gap_weight };
        }
    }

    let los_count = snaps.iter().filter(|s| s.has_los()).count();
    let tag = if 2 * los_count > w {
        Visibility::Los
    } else {
        Visibility::Nlos
    };
    let first = &snaps[0];
    Sample {
        route_id: first.route_id,
        start_index: first.index,
        tx: first.tx,
        tag,
        rx_positions: rx,
        slot_object_ids: ids,
        features,
        weights,
    }
}

fn cluster_features(c: &Cluster) -> [f64; FEATURES] {
    [c.center.x, c.center.y, c.center.z, c.power_dbm]
}

/// Fills missing entries by linear interpolation in route distance between
/// the nearest present neighbours; holds the nearest value at the ends.
fn gap_fill(window: &[Option<Cluster>], rx: &[Vec3]) -> Vec<[f64; FEATURES]> {
    let present: Vec<usize> = (0..window.len()).filter(|&i| window[i].is_some()).collect();
    let value = |i: usize| cluster_features(window[i].as_ref().expect("present index"));
    (0..window.len())
        .map(|i| {
            if window[i].is_some() {
                return value(i);
            }
            let before = present.iter().rev().find(|&&k| k < i).copied();
            let after = present.iter().find(|&&k| k > i).copied();
            match (before, after) {
                (Some(a), Some(b)) => {
                    let (fa, fb) = (value(a), value(b));
                    let total = rx[a].distance(rx[b]);
                    let t = if total > 0.0 { rx[a].distance(rx[i]) / total } else { 0.0 };
                    std::array::from_fn(|f| fa[f] + t * (fb[f] - fa[f]))
                }
                (Some(a), None) => value(a),
                (None, Some(b)) => value(b),
                (None, None) => [0.0; FEATURES],
            }
        })
        .collect()
}

/// Clusters, tracks and segments the snapshots of one route.
pub fn route_samples(snapshots: &[Snapshot], mode: ClusterMode, config: &SegmentConfig) -> Result<Vec<Sample>> {
    let clustered: Vec<Vec<Cluster>> = crate::par::map(snapshots, |s| cluster_snapshot_with(s, mode));
    let tracks = track_clusters(&clustered);
    segment_and_pad(&tracks, snapshots, config)
}

/// Groups snapshots by route and segments each route, keeping route order.
pub fn samples_from_snapshots(
    snapshots: &[Snapshot],
    mode: ClusterMode,
    config: &SegmentConfig,
) -> Result<Vec<Sample>> {
    let mut routes: BTreeMap<u32, Vec<Snapshot>> = BTreeMap::new();
    for s in snapshots {
        routes.entry(s.route_id).or_default().push(s.clone());
    }
    let mut out = Vec::new();
    for (route_id, mut snaps) in routes {
        snaps.sort_by_key(|s| s.index);
        if snaps.windows(2).any(|w| w[1].index != w[0].index + 1) {
            return Err(Error::Data(format!("route {route_id} has missing or duplicate snapshot indices")));
        }
        out.extend(route_samples(&snaps, mode, config)?);
    }
    Ok(out)
}

pub fn save_samples(path: &std::path::Path, samples: &[Sample]) -> Result<()> {
    crate::io::write_jsonl("cluster", path, samples)
}

pub fn load_samples(path: &std::path::Path) -> Result<Vec<Sample>> {
    let samples: Vec<Sample> = crate::io::read_jsonl("cluster", path)?;
    for s in &samples {
        s.validate()?;
    }
    Ok(samples)
}
