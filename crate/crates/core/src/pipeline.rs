//! Stage functions chaining the modules together, shared by the command
//! line tool and the tests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{samples_from_snapshots, ClusterMode, Sample, SegmentConfig};
use crate::dataset::{fit_norm, split, Manifest, NormStats, Scale, Split, MANIFEST_VERSION};
use crate::raytracer::{trace_route_with_id, Snapshot, TraceLimits};
use crate::scene::{
    generate_route, generate_street_scene, generate_urban_scene, plan_routes, RoutePlan, RoutePlanConfig, Scene,
    StreetConfig, UrbanConfig,
};
use crate::{Error, Result};

/// Which procedural generator builds the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SceneConfig {
    Urban(UrbanConfig),
    Street(StreetConfig),
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig::Urban(UrbanConfig::default())
    }
}

/// A scene with its planned routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub scene: Scene,
    pub routes: Vec<RoutePlan>,
}

pub fn generate_world(scene: &SceneConfig, routes: &RoutePlanConfig, seed: u64) -> Result<World> {
    let (scene, streets) = match scene {
        SceneConfig::Urban(c) => (generate_urban_scene(c, seed)?, c.streets()),
        SceneConfig::Street(c) => (generate_street_scene(c, seed)?, vec![c.street()]),
    };
    let routes = plan_routes(&scene, &streets, routes, seed)?;
    Ok(World { scene, routes })
}

/// Traces every route; snapshots are ordered by route, then index.
pub fn trace_world(world: &World, limits: &TraceLimits) -> Result<Vec<Snapshot>> {
    let mut out = Vec::new();
    for plan in &world.routes {
        let points = generate_route(&plan.spec)?;
        world.scene.check_route(&points)?;
        out.extend(trace_route_with_id(&world.scene, plan.route_id, plan.tx, &points, limits)?);
    }
    Ok(out)
}

/// Settings that turn a scene configuration into cluster samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SampleRecipe {
    pub scene: SceneConfig,
    pub routes: RoutePlanConfig,
    pub limits: TraceLimits,
    pub mode: ClusterMode,
    pub segment: SegmentConfig,
    /// Independent scenes drawn with seeds `seed, seed + 1, …`. Route ids
    /// are renumbered so they stay unique across scenes.
    pub scenes: usize,
}

/// Scene generation, tracing and clustering in one call.
pub fn generate_samples(recipe: &SampleRecipe, seed: u64) -> Result<Vec<Sample>> {
    let scenes = recipe.scenes.max(1);
    let mut samples = Vec::new();
    for k in 0..scenes {
        let mut world = generate_world(&recipe.scene, &recipe.routes, seed.wrapping_add(k as u64))?;
        for plan in &mut world.routes {
            plan.route_id += (k * recipe.routes.routes) as u32;
        }
        let snaps = trace_world(&world, &recipe.limits)?;
        samples.extend(samples_from_snapshots(&snaps, recipe.mode, &recipe.segment)?);
    }
    Ok(samples)
}

/// A split plus the statistics fitted on its training part.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub split: Split,
    pub norm: NormStats,
    pub slots: usize,
}

pub fn prepare(samples: &[Sample], seed: u64, normalize: bool) -> Result<Prepared> {
    let slots = samples.first().map_or(0, Sample::slots);
    if samples.iter().any(|s| s.slots() != slots) {
        return Err(Error::Data("samples disagree on slot count".into()));
    }
    let split = split(samples, seed)?;
    let norm = if normalize { fit_norm(&split.train)? } else { NormStats::identity() };
    Ok(Prepared { split, norm, slots })
}

pub fn manifest_name(scale: Scale) -> String {
    format!("manifest_x{scale}.json")
}

/// Writes the three split files once and one manifest per scale into `dir`.
/// Returns the manifest paths in scale order.
pub fn write_dataset(dir: &Path, prepared: &Prepared, scales: &[Scale], seed: u64, normalize: bool) -> Result<Vec<PathBuf>> {
    crate::io::create_dir("dataset", dir)?;
    let files = [("train.jsonl", &prepared.split.train), ("val.jsonl", &prepared.split.val), ("test.jsonl", &prepared.split.test)];
    for (name, samples) in files {
        crate::clustering::save_samples(&dir.join(name), samples)?;
    }
    let mut paths = Vec::new();
    for &scale in scales {
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            scale,
            seed,
            slots: prepared.slots,
            normalize,
            norm_stats: prepared.norm,
            train: "train.jsonl".into(),
            val: "val.jsonl".into(),
            test: "test.jsonl".into(),
        };
        let path = dir.join(manifest_name(scale));
        manifest.save(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
