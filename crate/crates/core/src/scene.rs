//! Box-world scenes, transmitter sites and receiver routes.
//!
//! Every object is an axis-aligned box carrying a reflection and a scattering
//! coefficient. The ground is object `0`, a thin slab whose top face sits at
//! `ground_z`. Two procedural families are provided: a regular urban block
//! grid and a single street lined with buildings and small scatterers.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Aabb, Vec3};
use crate::{Error, Result, WINDOW};

/// Id reserved for the ground slab.
pub const GROUND_ID: i64 = 0;

/// Surface coefficients standing in for a material database.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub reflection_coeff: f64,
    pub scattering_coeff: f64,
}

impl Material {
    pub fn new(reflection_coeff: f64, scattering_coeff: f64) -> Result<Self> {
        let m = Self {
            reflection_coeff,
            scattering_coeff,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |c: f64| (0.0..=1.0).contains(&c);
        if !in_unit(self.reflection_coeff) || !in_unit(self.scattering_coeff) {
            return Err(Error::InvalidConfig(format!(
                "material coefficients must lie in [0, 1], got {self:?}"
            )));
        }
        // energy is not amplified
        if self.reflection_coeff.powi(2) + self.scattering_coeff.powi(2) > 1.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "reflection² + scattering² exceeds 1 for {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: i64,
    pub min: Vec3,
    pub max: Vec3,
    #[serde(flatten)]
    pub material: Material,
}

impl SceneObject {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub ground_z: f64,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    /// Builds a scene after checking box extents, materials and id uniqueness.
    pub fn new(ground_z: f64, objects: Vec<SceneObject>) -> Result<Self> {
        let scene = Self { ground_z, objects };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for obj in &self.objects {
            if obj.id < 0 {
                return Err(Error::InvalidConfig(format!("object id {} is negative", obj.id)));
            }
            if !seen.insert(obj.id) {
                return Err(Error::InvalidConfig(format!("duplicate object id {}", obj.id)));
            }
            if !obj.aabb().is_valid() {
                return Err(Error::InvalidConfig(format!(
                    "object {} has min {:?} not strictly below max {:?}",
                    obj.id, obj.min, obj.max
                )));
            }
            obj.material.validate()?;
        }
        Ok(())
    }

    pub fn empty(ground_z: f64) -> Self {
        Self {
            ground_z,
            objects: Vec::new(),
        }
    }

    pub fn object(&self, id: i64) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// True when `p` lies inside or on the boundary of any object.
    pub fn is_inside_any(&self, p: Vec3) -> bool {
        self.objects.iter().any(|o| {
            let b = o.aabb();
            (0..3).all(|a| p[a] >= b.min[a] && p[a] <= b.max[a])
        })
    }

    /// Errors if any route point touches an object.
    pub fn check_route(&self, points: &[Vec3]) -> Result<()> {
        match points.iter().position(|&p| self.is_inside_any(p)) {
            Some(k) => Err(Error::InvalidConfig(format!(
                "route point {k} at {:?} collides with a scene object",
                points[k]
            ))),
            None => Ok(()),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::io::write_json("scene-gen", path, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let scene: Scene = crate::io::read_json("scene-gen", path)?;
        scene.validate()?;
        Ok(scene)
    }
}

/// A straight receiver route sampled at fixed spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub start: Vec3,
    pub direction: Vec3,
    pub spacing: f64,
    pub count: usize,
    pub rx_height: f64,
    #[serde(default)]
    pub ground_z: f64,
}

impl RouteSpec {
    /// Route with 1 m spacing at 2 m receiver height.
    pub fn along(start: Vec3, direction: Vec3, count: usize) -> Self {
        Self {
            start,
            direction,
            spacing: 1.0,
            count,
            rx_height: 2.0,
            ground_z: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidConfig(format!("route spacing {} must be > 0", self.spacing)));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "route direction {:?} is not a unit vector",
                self.direction
            )));
        }
        if self.direction.z.abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "route direction must be horizontal to keep a fixed receiver height".into(),
            ));
        }
        if self.count < WINDOW {
            return Err(Error::RouteTooShort {
                count: self.count,
                min: WINDOW,
            });
        }
        Ok(())
    }
}

/// Receiver positions along `spec`: `start + k·spacing·direction` at
/// `rx_height` above the ground.
pub fn generate_route(spec: &RouteSpec) -> Result<Vec<Vec3>> {
    spec.validate()?;
    let z = spec.ground_z + spec.rx_height;
    Ok((0..spec.count)
        .map(|k| {
            let p = spec.start + spec.direction * (k as f64 * spec.spacing);
            Vec3::new(p.x, p.y, z)
        })
        .collect())
}

/// Inclusive value range for a procedural parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidConfig(format!("{what} range {self:?} is empty")));
        }
        Ok(())
    }
}

/// Material coefficient ranges; each object draws its own pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRange {
    pub reflection: Range,
    pub scattering: Range,
}

impl MaterialRange {
    fn sample(&self, rng: &mut impl Rng) -> Material {
        let r = self.reflection.sample(rng);
        let s = self.scattering.sample(rng);
        // keep r² + s² ≤ 1 by shrinking the scattering share
        let s = s.min((1.0 - r * r).max(0.0).sqrt());
        Material {
            reflection_coeff: r,
            scattering_coeff: s,
        }
    }
}

pub const CONCRETE: MaterialRange = MaterialRange {
    reflection: Range::new(0.4, 0.7),
    scattering: Range::new(0.2, 0.4),
};

pub const GROUND: Material = Material {
    reflection_coeff: 0.5,
    scattering_coeff: 0.0,
};

/// Regular grid of building lots separated by streets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UrbanConfig {
    pub grid_x: usize,
    pub grid_y: usize,
    /// Side of one square lot.
    pub lot_size: f64,
    pub street_width: f64,
    pub building_width: Range,
    pub building_depth: Range,
    pub building_height: Range,
    pub building_material: MaterialRange,
    /// Small boxes (cars, kiosks, trees) placed on the sidewalks of each
    /// street segment.
    pub scatterers_per_street: usize,
    pub scatterer_material: MaterialRange,
    pub ground_material: Material,
    pub ground_z: f64,
}

impl Default for UrbanConfig {
    fn default() -> Self {
        Self {
            grid_x: 4,
            grid_y: 4,
            lot_size: 40.0,
            street_width: 20.0,
            building_width: Range::new(25.0, 38.0),
            building_depth: Range::new(25.0, 38.0),
            building_height: Range::new(12.0, 45.0),
            building_material: CONCRETE,
            scatterers_per_street: 0,
            scatterer_material: MaterialRange {
                reflection: Range::new(0.3, 0.6),
                scattering: Range::new(0.3, 0.6),
            },
            ground_material: GROUND,
            ground_z: 0.0,
        }
    }
}

impl UrbanConfig {
    pub fn pitch(&self) -> f64 {
        self.lot_size + self.street_width
    }

    fn validate(&self) -> Result<()> {
        if self.grid_x == 0 || self.grid_y == 0 {
            return Err(Error::InvalidConfig(format!(
                "urban grid must be non-empty, got {}×{}",
                self.grid_x, self.grid_y
            )));
        }
        if !(self.lot_size > 0.0) || !(self.street_width > 0.0) {
            return Err(Error::InvalidConfig("lot size and street width must be positive".into()));
        }
        self.building_width.validate("building width")?;
        self.building_depth.validate("building depth")?;
        self.building_height.validate("building height")?;
        if self.building_width.min <= 0.0 || self.building_depth.min <= 0.0 || self.building_height.min <= 0.0 {
            return Err(Error::InvalidConfig("building dimensions must be positive".into()));
        }
        if self.building_width.max > self.lot_size || self.building_depth.max > self.lot_size {
            return Err(Error::InvalidConfig("buildings must fit inside their lot".into()));
        }
        self.ground_material.validate()
    }

    /// Street centerlines, every one running the full length of the grid.
    pub fn streets(&self) -> Vec<Street> {
        let pitch = self.pitch();
        let half = 0.5 * self.street_width;
        let len_x = self.grid_x as f64 * pitch;
        let len_y = self.grid_y as f64 * pitch;
        let mut streets = Vec::new();
        for j in 0..=self.grid_y {
            streets.push(Street {
                origin: Vec3::new(-half, j as f64 * pitch - half, self.ground_z),
                direction: Vec3::new(1.0, 0.0, 0.0),
                length: len_x,
                width: self.street_width,
            });
        }
        for i in 0..=self.grid_x {
            streets.push(Street {
                origin: Vec3::new(i as f64 * pitch - half, -half, self.ground_z),
                direction: Vec3::new(0.0, 1.0, 0.0),
                length: len_y,
                width: self.street_width,
            });
        }
        streets
    }
}

/// Slab under the whole layout with its top face at `ground_z`.
fn ground_slab(min: Vec3, max: Vec3, ground_z: f64, material: Material) -> SceneObject {
    SceneObject {
        id: GROUND_ID,
        min: Vec3::new(min.x, min.y, ground_z - 1.0),
        max: Vec3::new(max.x, max.y, ground_z),
        material,
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Urban block grid. Buildings sit inside their lots at a random offset and
/// rest on the ground; small scatterers line the sidewalks.
pub fn generate_urban_scene(config: &UrbanConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = rng_for(seed);
    let pitch = config.pitch();
    let gz = config.ground_z;
    let mut objects = Vec::new();
    let mut next_id = GROUND_ID + 1;

    for i in 0..config.grid_x {
        for j in 0..config.grid_y {
            let w = config.building_width.sample(&mut rng);
            let d = config.building_depth.sample(&mut rng);
            let h = config.building_height.sample(&mut rng);
            let x0 = i as f64 * pitch + rng.random_range(0.0..=1.0) * (config.lot_size - w);
            let y0 = j as f64 * pitch + rng.random_range(0.0..=1.0) * (config.lot_size - d);
            objects.push(SceneObject {
                id: next_id,
                min: Vec3::new(x0, y0, gz),
                max: Vec3::new(x0 + w, y0 + d, gz + h),
                material: config.building_material.sample(&mut rng),
            });
            next_id += 1;
        }
    }

    for street in config.streets() {
        for _ in 0..config.scatterers_per_street {
            let obj = sidewalk_scatterer(&street, next_id, &config.scatterer_material, &mut rng);
            objects.push(obj);
            next_id += 1;
        }
    }

    let margin = config.street_width + 60.0;
    let min = Vec3::new(-margin, -margin, gz);
    let max = Vec3::new(
        config.grid_x as f64 * pitch + margin,
        config.grid_y as f64 * pitch + margin,
        gz,
    );
    objects.insert(0, ground_slab(min, max, gz, config.ground_material));
    Scene::new(gz, objects)
}

/// A small box on the sidewalk band of `street`, clear of the centerline.
fn sidewalk_scatterer(street: &Street, id: i64, material: &MaterialRange, rng: &mut impl Rng) -> SceneObject {
    let along = rng.random_range(0.05..0.95) * street.length;
    let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let lateral = side * (0.5 * street.width - rng.random_range(1.0..3.0));
    let size_along = rng.random_range(1.5..4.5);
    let size_across = rng.random_range(1.0..2.0);
    let height = rng.random_range(1.2..3.0);
    let perp = Vec3::new(-street.direction.y, street.direction.x, 0.0);
    let c = street.origin + street.direction * along + perp * lateral;
    let (hx, hy) = if street.direction.x.abs() > 0.5 {
        (0.5 * size_along, 0.5 * size_across)
    } else {
        (0.5 * size_across, 0.5 * size_along)
    };
    SceneObject {
        id,
        min: Vec3::new(c.x - hx, c.y - hy, street.origin.z),
        max: Vec3::new(c.x + hx, c.y + hy, street.origin.z + height),
        material: material.sample(rng),
    }
}

/// Single straight street along +x, centered on `y = 0`, with building rows
/// on both sides and small scatterers on the sidewalks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreetConfig {
    pub length: f64,
    pub street_width: f64,
    pub frontage: Range,
    pub gap: Range,
    pub setback: Range,
    pub building_depth: Range,
    pub building_height: Range,
    pub building_material: MaterialRange,
    pub scatterers: usize,
    pub scatterer_material: MaterialRange,
    pub ground_material: Material,
    pub ground_z: f64,
}

impl Default for StreetConfig {
    fn default() -> Self {
        Self {
            length: 260.0,
            street_width: 24.0,
            frontage: Range::new(15.0, 45.0),
            gap: Range::new(2.0, 12.0),
            setback: Range::new(0.0, 6.0),
            building_depth: Range::new(12.0, 25.0),
            building_height: Range::new(8.0, 30.0),
            building_material: CONCRETE,
            scatterers: 12,
            scatterer_material: MaterialRange {
                reflection: Range::new(0.3, 0.6),
                scattering: Range::new(0.3, 0.6),
            },
            ground_material: GROUND,
            ground_z: 0.0,
        }
    }
}

impl StreetConfig {
    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !(self.street_width > 4.0) {
            return Err(Error::InvalidConfig("street length and width must be positive".into()));
        }
        for (r, what) in [
            (&self.frontage, "frontage"),
            (&self.gap, "gap"),
            (&self.setback, "setback"),
            (&self.building_depth, "building depth"),
            (&self.building_height, "building height"),
        ] {
            r.validate(what)?;
        }
        if self.frontage.min <= 0.0 || self.building_depth.min <= 0.0 || self.building_height.min <= 0.0 {
            return Err(Error::InvalidConfig("building dimensions must be positive".into()));
        }
        self.ground_material.validate()
    }

    pub fn street(&self) -> Street {
        Street {
            origin: Vec3::new(0.0, 0.0, self.ground_z),
            direction: Vec3::new(1.0, 0.0, 0.0),
            length: self.length,
            width: self.street_width,
        }
    }
}

pub fn generate_street_scene(config: &StreetConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = rng_for(seed);
    let gz = config.ground_z;
    let half = 0.5 * config.street_width;
    let mut objects = Vec::new();
    let mut next_id = GROUND_ID + 1;
    let mut max_depth = 0.0_f64;

    for side in [-1.0, 1.0] {
        let mut x = -rng.random_range(0.0..=config.gap.max.max(1.0));
        while x < config.length {
            let w = config.frontage.sample(&mut rng);
            let d = config.building_depth.sample(&mut rng);
            let h = config.building_height.sample(&mut rng);
            let face = half + config.setback.sample(&mut rng);
            let (y0, y1) = if side > 0.0 { (face, face + d) } else { (-face - d, -face) };
            objects.push(SceneObject {
                id: next_id,
                min: Vec3::new(x, y0, gz),
                max: Vec3::new(x + w, y1, gz + h),
                material: config.building_material.sample(&mut rng),
            });
            next_id += 1;
            max_depth = max_depth.max(face + d);
            x += w + config.gap.sample(&mut rng).max(1e-3);
        }
    }

    let street = config.street();
    for _ in 0..config.scatterers {
        objects.push(sidewalk_scatterer(&street, next_id, &config.scatterer_material, &mut rng));
        next_id += 1;
    }

    let margin = 60.0;
    let min = Vec3::new(-margin, -max_depth - margin, gz);
    let max = Vec3::new(config.length + margin, max_depth + margin, gz);
    objects.insert(0, ground_slab(min, max, gz, config.ground_material));
    Scene::new(gz, objects)
}

/// Centerline of a straight street at ground level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub origin: Vec3,
    pub direction: Vec3,
    pub length: f64,
    pub width: f64,
}

impl Street {
    fn perpendicular(&self) -> Vec3 {
        Vec3::new(-self.direction.y, self.direction.x, 0.0)
    }
}

/// Propagation condition a transmitter placement aims for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Visibility {
    Los,
    Nlos,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Los => "LOS",
            Visibility::Nlos => "NLOS",
        }
    }
}

/// One receiver route with its transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub route_id: u32,
    pub tx: Vec3,
    pub visibility: Visibility,
    #[serde(flatten)]
    pub spec: RouteSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutePlanConfig {
    pub routes: usize,
    /// Sample windows per route; each route has `windows · 17` points.
    pub windows_per_route: usize,
    pub spacing: f64,
    pub rx_height: f64,
    pub tx_height: Range,
    /// Fraction of routes whose transmitter sits around a corner.
    pub nlos_fraction: f64,
}

impl Default for RoutePlanConfig {
    fn default() -> Self {
        Self {
            routes: 8,
            windows_per_route: 2,
            spacing: 1.0,
            rx_height: 2.0,
            tx_height: Range::new(5.0, 10.0),
            nlos_fraction: 0.5,
        }
    }
}

/// Plans receiver routes along `streets` with a roadside transmitter near
/// the end of each route. Line-of-sight transmitters stand on the route's own
/// street; the others stand on a parallel street one block over. Routes and
/// transmitter sites never touch a scene object.
pub fn plan_routes(scene: &Scene, streets: &[Street], config: &RoutePlanConfig, seed: u64) -> Result<Vec<RoutePlan>> {
    if streets.is_empty() {
        return Err(Error::InvalidConfig("no streets to place routes on".into()));
    }
    if config.windows_per_route == 0 || config.routes == 0 {
        return Err(Error::InvalidConfig("routes and windows_per_route must be positive".into()));
    }
    config.tx_height.validate("tx height")?;
    let count = config.windows_per_route * WINDOW;
    let route_len = (count - 1) as f64 * config.spacing;
    let usable: Vec<&Street> = streets.iter().filter(|s| s.length > route_len + 2.0).collect();
    if usable.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no street is longer than the {route_len} m route"
        )));
    }

    let mut rng = rng_for(seed ^ 0x005E_ED0F_2047);
    let mut plans = Vec::with_capacity(config.routes);
    let mut attempts = 0;
    while plans.len() < config.routes {
        attempts += 1;
        if attempts > 200 * config.routes {
            return Err(Error::InvalidConfig(
                "could not place collision-free routes; scene too crowded".into(),
            ));
        }
        let street = usable[rng.random_range(0..usable.len())];
        let reverse = rng.random_bool(0.5);
        let lane = rng.random_range(-0.2..0.2) * street.width;
        let slack = street.length - route_len;
        let offset = rng.random_range(0.0..slack);
        let perp = street.perpendicular();
        let (start, direction) = if reverse {
            (
                street.origin + street.direction * (street.length - offset) + perp * lane,
                -street.direction,
            )
        } else {
            (street.origin + street.direction * offset + perp * lane, street.direction)
        };
        let spec = RouteSpec {
            start: Vec3::new(start.x, start.y, scene.ground_z + config.rx_height),
            direction,
            spacing: config.spacing,
            count,
            rx_height: config.rx_height,
            ground_z: scene.ground_z,
        };
        let points = generate_route(&spec)?;
        if scene.check_route(&points).is_err() {
            continue;
        }

        let visibility = if rng.random_bool(config.nlos_fraction.clamp(0.0, 1.0)) {
            Visibility::Nlos
        } else {
            Visibility::Los
        };
        let end = *points.last().expect("route is non-empty");
        let ahead = rng.random_range(3.0..15.0);
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let tx_h = config.tx_height.sample(&mut rng);
        let tx = match visibility {
            Visibility::Los => {
                let roadside = side * (0.5 * street.width - 1.0);
                end + direction * ahead + perp * (roadside - lane)
            }
            Visibility::Nlos => {
                // parallel street one block over, so corner buildings block LOS
                let pitch = nearest_parallel_offset(street, streets, side);
                match pitch {
                    Some(shift) => end + direction * ahead + perp * (shift - lane),
                    None => continue,
                }
            }
        };
        let tx = Vec3::new(tx.x, tx.y, scene.ground_z + tx_h);
        if scene.is_inside_any(tx) || points.iter().any(|p| p.distance(tx) < 1.0) {
            continue;
        }
        plans.push(RoutePlan {
            route_id: plans.len() as u32,
            tx,
            visibility,
            spec,
        });
    }
    Ok(plans)
}

/// Signed lateral offset to the closest parallel street on `side`, if any.
fn nearest_parallel_offset(street: &Street, streets: &[Street], side: f64) -> Option<f64> {
    let perp = street.perpendicular();
    streets
        .iter()
        .filter(|s| (s.direction.dot(street.direction)).abs() > 0.999)
        .map(|s| (s.origin - street.origin).dot(perp))
        .filter(|&d| d * side > street.width)
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_grid(n: usize) -> UrbanConfig {
        UrbanConfig {
            grid_x: n,
            grid_y: n,
            building_width: Range::fixed(10.0),
            building_depth: Range::fixed(10.0),
            building_height: Range::fixed(20.0),
            ..UrbanConfig::default()
        }
    }

    #[test]
    fn urban_grid_counts_buildings_plus_ground() {
        let scene = generate_urban_scene(&fixed_grid(2), 7).unwrap();
        assert_eq!(scene.objects.len(), 5);
        assert_eq!(scene.objects.iter().filter(|o| o.id == GROUND_ID).count(), 1);
        for o in scene.objects.iter().filter(|o| o.id != GROUND_ID) {
            assert_eq!(o.min.z, scene.ground_z);
            assert_eq!(o.max.z - o.min.z, 20.0);
            assert_eq!(o.max.x - o.min.x, 10.0);
        }
    }

    #[test]
    fn urban_generation_is_deterministic() {
        let cfg = UrbanConfig::default();
        let a = serde_json::to_string(&generate_urban_scene(&cfg, 11).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_urban_scene(&cfg, 11).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_change_heights() {
        let cfg = UrbanConfig {
            grid_x: 3,
            grid_y: 3,
            ..UrbanConfig::default()
        };
        let heights = |seed| -> Vec<f64> {
            generate_urban_scene(&cfg, seed)
                .unwrap()
                .objects
                .iter()
                .filter(|o| o.id != GROUND_ID)
                .map(|o| o.max.z)
                .collect()
        };
        assert_ne!(heights(1), heights(2));
    }

    #[test]
    fn zero_grid_is_rejected() {
        let cfg = UrbanConfig {
            grid_x: 0,
            ..UrbanConfig::default()
        };
        assert!(matches!(generate_urban_scene(&cfg, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn buildings_rest_on_ground_in_street_scene() {
        let scene = generate_street_scene(&StreetConfig::default(), 3).unwrap();
        assert!(scene.objects.len() > 10);
        for o in &scene.objects {
            if o.id == GROUND_ID {
                assert_eq!(o.max.z, scene.ground_z);
            } else {
                assert_eq!(o.min.z, scene.ground_z);
            }
        }
    }

    #[test]
    fn route_points_are_equally_spaced() {
        let spec = RouteSpec::along(Vec3::new(0.0, 0.0, 2.0), Vec3::new(1.0, 0.0, 0.0), 34);
        let pts = generate_route(&spec).unwrap();
        assert_eq!(pts.len(), 34);
        for (k, p) in pts.iter().enumerate() {
            assert_eq!(*p, Vec3::new(k as f64, 0.0, 2.0));
        }
        for w in pts.windows(2) {
            assert!((w[0].distance(w[1]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn short_route_is_rejected() {
        let spec = RouteSpec::along(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), 16);
        assert!(matches!(generate_route(&spec), Err(Error::RouteTooShort { count: 16, .. })));
    }

    #[test]
    fn non_unit_direction_is_rejected() {
        let spec = RouteSpec::along(Vec3::ZERO, Vec3::new(1.0, 1.0, 0.0), 20);
        assert!(generate_route(&spec).is_err());
    }

    #[test]
    fn material_energy_bound() {
        assert!(Material::new(0.8, 0.6).is_ok());
        assert!(Material::new(0.8, 0.7).is_err());
        assert!(Material::new(1.1, 0.0).is_err());
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let o = SceneObject {
            id: 3,
            min: Vec3::ZERO,
            max: Vec3::new(1.0, 1.0, 1.0),
            material: GROUND,
        };
        assert!(Scene::new(0.0, vec![o.clone(), o]).is_err());
    }

    #[test]
    fn scene_json_schema() {
        let scene = generate_urban_scene(&fixed_grid(1), 0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&scene).unwrap();
        let obj = &v["objects"][1];
        assert!(v["ground_z"].is_number());
        for key in ["id", "min", "max", "reflection_coeff", "scattering_coeff"] {
            assert!(!obj[key].is_null(), "missing {key}");
        }
        assert_eq!(obj["min"].as_array().unwrap().len(), 3);
        let back: Scene = serde_json::from_value(v).unwrap();
        assert_eq!(back, scene);
    }

    #[test]
    fn planned_routes_avoid_objects() {
        let cfg = UrbanConfig {
            scatterers_per_street: 3,
            ..UrbanConfig::default()
        };
        let scene = generate_urban_scene(&cfg, 5).unwrap();
        let plans = plan_routes(&scene, &cfg.streets(), &RoutePlanConfig::default(), 5).unwrap();
        assert_eq!(plans.len(), 8);
        for plan in &plans {
            let pts = generate_route(&plan.spec).unwrap();
            scene.check_route(&pts).unwrap();
            assert!(!scene.is_inside_any(plan.tx));
            let h = plan.tx.z - scene.ground_z;
            assert!((5.0..=10.0).contains(&h));
        }
    }
}
