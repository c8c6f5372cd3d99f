//! One function per subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chansr::cir::{self, ClusterPoint, CirRow};
use chansr::clustering::{load_samples, samples_from_snapshots, save_samples, Sample};
use chansr::dataset::{Manifest, Scale};
use chansr::metrics::{
    ablation, evaluate_by_tag, generalization, read_eval_csv, write_csv, write_eval_csv, AblationSetup, Baseline,
    EvalReport, MetricOptions, Predictor, Variant,
};
use chansr::mll::{checkpoint, init_model, train as fit, ElbSpec, SrModel};
use chansr::pipeline::{generate_world, manifest_name, prepare, trace_world, write_dataset, World};
use chansr::raytracer::{load_snapshots, save_snapshots};
use chansr::scene::{RoutePlan, Scene};
use chansr::{io, Error, Result, Vec3};
use serde::{Deserialize, Serialize};

use crate::config::{AblateSection, Config, SceneKind, TrainSection};

#[derive(Debug, Serialize, Deserialize)]
struct RoutesFile {
    seed: u64,
    routes: Vec<RoutePlan>,
}

pub fn scene_gen(config: &Config, seed: u64, out: &Path, kind: Option<SceneKind>, routes: Option<usize>) -> Result<()> {
    let mut plan = config.routes.clone();
    plan.routes = routes.unwrap_or(plan.routes);
    let world = generate_world(&config.scene.resolve(kind), &plan, seed)?;
    io::create_dir("scene-gen", out)?;
    world.scene.save(&out.join("scene.json"))?;
    io::write_json(
        "scene-gen",
        &out.join("routes.json"),
        &RoutesFile {
            seed,
            routes: world.routes,
        },
    )?;
    println!("scene with {} objects and {} routes in {}", world.scene.objects.len(), plan.routes, out.display());
    Ok(())
}

pub fn trace(config: &Config, scene: &Path, routes: &Path, out: &Path) -> Result<()> {
    let scene = Scene::load(scene)?;
    let routes: RoutesFile = io::read_json("trace", routes)?;
    let world = World {
        scene,
        routes: routes.routes,
    };
    let snaps = trace_world(&world, &config.trace)?;
    save_snapshots(out, &snaps)?;
    let rays: usize = snaps.iter().map(|s| s.rays.len()).sum();
    println!("{} snapshots, {rays} rays → {}", snaps.len(), out.display());
    Ok(())
}

pub fn cluster(config: &Config, snapshots: &Path, out: &Path, slots: Option<usize>) -> Result<()> {
    let snaps = load_snapshots(snapshots)?;
    let mut segment = config.cluster.segment;
    segment.slots = slots.unwrap_or(segment.slots);
    let samples = samples_from_snapshots(&snaps, config.cluster.mode, &segment)?;
    save_samples(out, &samples)?;
    println!("{} samples with {} slots → {}", samples.len(), segment.slots, out.display());
    Ok(())
}

fn parse_scales(raw: &[u32]) -> Result<Vec<Scale>> {
    raw.iter().map(|&s| Scale::new(s)).collect()
}

/// Pools sample files, shifting route ids so routes from different files
/// never merge.
fn pool_samples(files: &[PathBuf]) -> Result<Vec<Sample>> {
    let mut all = Vec::new();
    let mut offset = 0u32;
    for f in files {
        let mut samples = load_samples(f)?;
        let max = samples.iter().map(|s| s.route_id).max();
        for s in &mut samples {
            s.route_id += offset;
        }
        if let Some(m) = max {
            offset += m + 1;
        }
        all.extend(samples);
    }
    Ok(all)
}

pub fn dataset(config: &Config, seed: u64, files: &[PathBuf], out: &Path, scales: Option<Vec<u32>>, no_normalize: bool) -> Result<()> {
    let scales = parse_scales(&scales.unwrap_or_else(|| config.dataset.scales.clone()))?;
    let normalize = config.dataset.normalize && !no_normalize;
    let samples = pool_samples(files)?;
    let prepared = prepare(&samples, seed, normalize)?;
    let paths = write_dataset(out, &prepared, &scales, seed, normalize)?;
    println!(
        "split {}/{}/{} samples, {} manifests in {}",
        prepared.split.train.len(),
        prepared.split.val.len(),
        prepared.split.test.len(),
        paths.len(),
        out.display()
    );
    Ok(())
}

/// Finds the manifest for `scale`, accepting either a manifest file or the
/// directory holding one per scale.
fn locate_manifest(dataset: &Path, scale: Option<Scale>) -> Result<(PathBuf, Manifest)> {
    let path = if dataset.is_dir() {
        let scale = scale.ok_or_else(|| Error::InvalidConfig("--scale is required when --dataset is a directory".into()))?;
        dataset.join(manifest_name(scale))
    } else {
        dataset.to_path_buf()
    };
    let manifest = Manifest::load(&path)?;
    if let Some(s) = scale {
        if s != manifest.scale {
            return Err(Error::InvalidConfig(format!(
                "{} is for scale {}, not {s}",
                path.display(),
                manifest.scale
            )));
        }
    }
    Ok((path, manifest))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct HistoryRow {
    epoch: usize,
    train_loss: f64,
    val_loss: f64,
}

pub fn train(t: &TrainSection, seed: u64, dataset: &Path, scale: Option<u32>, out: &Path) -> Result<()> {
    let scale = scale.map(Scale::new).transpose()?;
    let (path, manifest) = locate_manifest(dataset, scale)?;
    let split = manifest.load_split(&path)?;
    let spec = ElbSpec {
        activation: t.activation,
        ..ElbSpec::with_max_hidden(t.max_hidden)
    };
    let model = init_model(manifest.scale, manifest.slots, spec, seed)?
        .with_norm(manifest.effective_norm())
        .with_residual(t.residual);
    let outcome = fit(model, &split.train, &split.val, &t.train_config(seed))?;
    checkpoint::save(&outcome.model, out)?;
    checkpoint::save(&outcome.best, &with_suffix(out, ".best.ckpt"))?;
    let rows: Vec<HistoryRow> = outcome
        .history
        .iter()
        .map(|h| HistoryRow {
            epoch: h.epoch,
            train_loss: h.train,
            val_loss: h.val,
        })
        .collect();
    write_csv("train", &with_suffix(out, ".history.csv"), &rows)?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "scale {}: loss {:.6} → {:.6} over {} epochs (best validation at epoch {}) → {}",
        manifest.scale,
        outcome.initial_train,
        last.train,
        outcome.history.len(),
        outcome.best_epoch,
        out.display()
    );
    Ok(())
}

fn test_split(dataset: &Path, scale: Scale) -> Result<(Manifest, Vec<Sample>)> {
    let (path, manifest) = locate_manifest(dataset, Some(scale))?;
    let test = load_samples(&manifest.resolve(&path, &manifest.test))?;
    Ok((manifest, test))
}

fn check_model(model: &SrModel, manifest: &Manifest) -> Result<()> {
    if model.slots != manifest.slots {
        return Err(Error::Data(format!(
            "model has {} slots, dataset has {}",
            model.slots, manifest.slots
        )));
    }
    Ok(())
}

pub fn eval(
    config: &Config,
    dataset: &Path,
    models: &[PathBuf],
    scales: Option<Vec<u32>>,
    out: &Path,
    unseen: Option<(&Path, &Path)>,
) -> Result<()> {
    let opts = &config.eval;
    let models: Vec<SrModel> = models.iter().map(|p| checkpoint::load(p)).collect::<Result<_>>()?;
    let mut scales: Vec<Scale> = match scales {
        Some(raw) => parse_scales(&raw)?,
        None if models.is_empty() => parse_scales(&config.dataset.scales)?,
        None => Vec::new(),
    };
    scales.extend(models.iter().map(|m| m.scale));
    scales.sort();
    scales.dedup();
    let unseen = unseen.map(|(samples, out)| Ok::<_, Error>((load_samples(samples)?, out))).transpose()?;

    let mut reports = Vec::new();
    let mut general = Vec::new();
    for scale in scales {
        let (manifest, test) = test_split(dataset, scale)?;
        let baseline = Baseline::new(scale);
        let mut predictors: Vec<&dyn Predictor> = vec![&baseline];
        for m in models.iter().filter(|m| m.scale == scale) {
            check_model(m, &manifest)?;
            predictors.push(m);
        }
        for p in predictors {
            reports.extend(evaluate_by_tag(p, &test, opts)?);
            if let Some((samples, _)) = &unseen {
                general.push(generalization(p, &test, samples, opts)?);
            }
        }
    }
    write_eval_csv(out, &reports)?;
    for r in reports.iter().filter(|r| r.scene == "ALL") {
        println!(
            "x{:<2} {:8} rmse power {:.4} dB, location {:.4} m",
            r.scale, r.method, r.rmse_power, r.rmse_location
        );
    }
    if let Some((_, path)) = unseen {
        write_csv("eval", path, &general)?;
        for g in &general {
            println!(
                "x{:<2} {:8} unseen scenes: power {:+.1}%, location {:+.1}%",
                g.scale, g.method, g.degradation_power_pct, g.degradation_loc_pct
            );
        }
    }
    Ok(())
}

pub fn ablate(
    t: &TrainSection,
    ab: &AblateSection,
    opts: &MetricOptions,
    seed: u64,
    dataset: &Path,
    scale: Option<u32>,
    out: &Path,
) -> Result<()> {
    let scale = scale.map(Scale::new).transpose()?;
    let (path, manifest) = locate_manifest(dataset, scale)?;
    let split = manifest.load_split(&path)?;
    let mut variants: Vec<Variant> = ab
        .max_hidden
        .iter()
        .map(|&max_hidden| Variant {
            max_hidden,
            residual: true,
        })
        .collect();
    if ab.residual_off {
        variants.push(Variant {
            max_hidden: t.max_hidden,
            residual: false,
        });
    }
    let setup = AblationSetup {
        scale: manifest.scale,
        slots: manifest.slots,
        norm: manifest.effective_norm(),
        train: &split.train,
        val: &split.val,
        test: &split.test,
        config: t.train_config(seed),
        model_seed: seed,
    };
    let rows = ablation(&setup, &variants, opts)?;
    write_csv("ablate", out, &rows)?;
    for r in &rows {
        println!("{:14} mae power {:.4} ({:+.1}%)", r.variant, r.mae_power, r.delta_power_pct);
    }
    Ok(())
}

#[derive(Serialize)]
struct MatchRow {
    snapshot_index: usize,
    restored: usize,
    simulated: usize,
    match_rate: f64,
}

pub fn cir(config: &Config, dataset: &Path, model: &Path, snapshots: &Path, index: usize, out: &Path) -> Result<()> {
    let model = checkpoint::load(model)?;
    let (manifest, test) = test_split(dataset, model.scale)?;
    check_model(&model, &manifest)?;
    let sample = test
        .get(index)
        .ok_or_else(|| Error::Data(format!("test split has {} samples, no sample {index}", test.len())))?;
    let snaps: BTreeMap<(u32, usize), _> = load_snapshots(snapshots)?
        .into_iter()
        .map(|s| ((s.route_id, s.index), s))
        .collect();
    let pair = chansr::dataset::downsample(sample, model.scale);
    let predicted = model.forward(&pair, &sample.rx_positions)?;
    let (delay_tol, power_tol) = (config.cir.delay_tol_ns * 1e-9, config.cir.power_tol_db);

    let mut rows: Vec<CirRow> = Vec::new();
    let mut matches = Vec::new();
    for (k, &i) in model.scale.predicted_indices().iter().enumerate() {
        let global = sample.start_index + i;
        let snap = snaps.get(&(sample.route_id, global)).ok_or_else(|| {
            Error::Data(format!("no traced snapshot {global} on route {}", sample.route_id))
        })?;
        let clusters: Vec<ClusterPoint> = sample
            .slot_object_ids
            .iter()
            .zip(&predicted[k])
            .map(|(&object_id, f)| ClusterPoint {
                object_id,
                center: Vec3::new(f[0], f[1], f[2]),
                power_dbm: f[3],
            })
            .collect();
        let restored = cir::reconstruct(&clusters, sample.tx, sample.rx_positions[i])?;
        let simulated = cir::simulated_taps(snap);
        matches.push(MatchRow {
            snapshot_index: global,
            restored: restored.len(),
            simulated: simulated.len(),
            match_rate: cir::match_rate(&restored, &simulated, delay_tol, power_tol)?,
        });
        rows.extend(cir::rows(global, &restored));
        rows.extend(cir::rows(global, &simulated));
    }
    cir::write_cir_csv(out, &rows)?;
    write_csv("cir", &with_suffix(out, ".match.csv"), &matches)?;
    let mean = matches.iter().map(|m| m.match_rate).sum::<f64>() / matches.len() as f64;
    println!(
        "route {} from snapshot {}: mean match rate {mean:.3} over {} predicted snapshots",
        sample.route_id,
        sample.start_index,
        matches.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct TableRow<'a> {
    scale: u32,
    method: &'a str,
    ame_power: f64,
    ame_loc: f64,
    rmse_power: f64,
    rmse_loc: f64,
}

#[derive(Serialize)]
struct ImprovementRow<'a> {
    scale: u32,
    scene: &'a str,
    method: &'a str,
    rmse_power_baseline: f64,
    rmse_power: f64,
    power_drop_pct: f64,
    rmse_loc_baseline: f64,
    rmse_loc: f64,
    loc_drop_pct: f64,
}

pub fn report(evals: &[PathBuf], out: &Path) -> Result<()> {
    let mut all: Vec<EvalReport> = Vec::new();
    for p in evals {
        all.extend(read_eval_csv(p)?);
    }
    // later files win on duplicate rows
    let mut keyed: BTreeMap<(u32, String, String), EvalReport> = BTreeMap::new();
    for r in all {
        let method_rank = if r.method == "baseline" { String::new() } else { r.method.clone() };
        keyed.insert((r.scale, r.scene.clone(), method_rank), r);
    }
    io::create_dir("report", out)?;
    let mut md = String::from("# Super-resolution results\n");
    for scene in ["LOS", "NLOS", "ALL"] {
        let rows: Vec<TableRow> = keyed
            .values()
            .filter(|r| r.scene == scene)
            .map(|r| TableRow {
                scale: r.scale,
                method: &r.method,
                ame_power: r.ame_power,
                ame_loc: r.ame_location,
                rmse_power: r.rmse_power,
                rmse_loc: r.rmse_location,
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        write_csv("report", &out.join(format!("table_{}.csv", scene.to_lowercase())), &rows)?;
        let _ = writeln!(md, "\n## {scene}\n\n| scale | method | AME power [dB] | AME loc [m] | RMSE power [dB] | RMSE loc [m] |");
        md.push_str("|---|---|---|---|---|---|\n");
        for r in &rows {
            let _ = writeln!(
                md,
                "| {} | {} | {:.4} | {:.4} | {:.4} | {:.4} |",
                r.scale, r.method, r.ame_power, r.ame_loc, r.rmse_power, r.rmse_loc
            );
        }
    }

    let mut improvements = Vec::new();
    for ((scale, scene, method), r) in &keyed {
        if method.is_empty() {
            continue;
        }
        if let Some(b) = keyed.get(&(*scale, scene.clone(), String::new())) {
            improvements.push(ImprovementRow {
                scale: *scale,
                scene,
                method: &r.method,
                rmse_power_baseline: b.rmse_power,
                rmse_power: r.rmse_power,
                power_drop_pct: -chansr::metrics::pct_delta(r.rmse_power, b.rmse_power),
                rmse_loc_baseline: b.rmse_location,
                rmse_loc: r.rmse_location,
                loc_drop_pct: -chansr::metrics::pct_delta(r.rmse_location, b.rmse_location),
            });
        }
    }
    write_csv("report", &out.join("improvement.csv"), &improvements)?;
    if !improvements.is_empty() {
        md.push_str("\n## RMSE change against the baseline\n\n| scale | scene | method | power drop [%] | location drop [%] |\n|---|---|---|---|---|\n");
        for i in &improvements {
            let _ = writeln!(md, "| {} | {} | {} | {:.1} | {:.1} |", i.scale, i.scene, i.method, i.power_drop_pct, i.loc_drop_pct);
        }
    }
    std::fs::write(out.join("summary.md"), md).map_err(|source| Error::Write {
        stage: "report",
        path: out.join("summary.md"),
        source,
    })?;
    println!("{} table rows → {}", keyed.len(), out.display());
    Ok(())
}
