//! Deterministic box-world ray tracer.
//!
//! Each snapshot gets the line-of-sight ray, image-method specular
//! reflections up to second order, and one single-bounce scattered ray per
//! box face whose center both ends can see. Antennas are ideal isotropic
//! radiators with unit gain.
//!
//! Power model (all in dB):
//! * LOS: `P_tx − FSPL(d)`
//! * reflection: `P_tx − FSPL(total path) + Σ 20·log10(Γ)`
//! * scattering: `P_tx − FSPL(d₁) − FSPL(d₂) + 20·log10(S) + 10·log10(cosθᵢ·cosθₒ)`

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geom::{Face, Vec3};
use crate::scene::Scene;
use crate::{par, Error, Result, SPEED_OF_LIGHT};

/// Object id carried by the direct ray.
pub const LOS_ID: i64 = -1;

/// Points closer than this to a box surface are not inside it.
pub const INTERIOR_TOLERANCE: f64 = 1e-9;

/// Slack when testing whether a reflection point lies on its face.
const FACE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "REFL")]
    Reflection,
    #[serde(rename = "SCAT")]
    Scattering,
}

/// One traced propagation path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub object_id: i64,
    /// Face of `object_id` (0..6, ordered -x, +x, -y, +y, -z, +z) holding
    /// the interaction point; absent for LOS.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facet: Option<u8>,
    /// Last interaction point; the Tx–Rx midpoint for LOS.
    #[serde(rename = "point")]
    pub interaction_point: Vec3,
    #[serde(rename = "path_m")]
    pub path_length: f64,
    #[serde(rename = "delay_s")]
    pub delay: f64,
    pub power_dbm: f64,
    #[serde(rename = "mech")]
    pub mechanism: Mechanism,
}

impl Ray {
    fn new(
        object_id: i64,
        facet: Option<u8>,
        interaction_point: Vec3,
        path_length: f64,
        power_dbm: f64,
        mechanism: Mechanism,
    ) -> Self {
        Self {
            object_id,
            facet,
            interaction_point,
            path_length,
            delay: path_length / SPEED_OF_LIGHT,
            power_dbm,
            mechanism,
        }
    }
}

/// All rays at one receiver position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default)]
    pub route_id: u32,
    pub index: usize,
    pub tx: Vec3,
    #[serde(rename = "rx")]
    pub rx_position: Vec3,
    pub rays: Vec<Ray>,
}

impl Snapshot {
    pub fn has_los(&self) -> bool {
        self.rays.iter().any(|r| r.mechanism == Mechanism::Los)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceLimits {
    pub max_reflection_order: u8,
    pub min_power_dbm: f64,
    pub frequency_hz: f64,
    pub tx_power_dbm: f64,
    pub scattering: bool,
}

impl Default for TraceLimits {
    fn default() -> Self {
        Self {
            max_reflection_order: 2,
            min_power_dbm: -150.0,
            frequency_hz: 3.55e9,
            tx_power_dbm: 0.1,
            scattering: true,
        }
    }
}

impl TraceLimits {
    pub fn validate(&self) -> Result<()> {
        if self.max_reflection_order > 2 {
            return Err(Error::InvalidConfig(format!(
                "max_reflection_order {} exceeds 2",
                self.max_reflection_order
            )));
        }
        if !(self.frequency_hz > 0.0) || !self.frequency_hz.is_finite() {
            return Err(Error::InvalidConfig(format!("frequency {} Hz must be positive", self.frequency_hz)));
        }
        Ok(())
    }
}

/// Free-space path loss in dB: `20·log10(d) + 20·log10(f) + 20·log10(4π/c)`.
pub fn fspl_db(distance_m: f64, frequency_hz: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::Domain(format!("distance {distance_m} m")));
    }
    if !(frequency_hz > 0.0) {
        return Err(Error::Domain(format!("frequency {frequency_hz} Hz")));
    }
    Ok(fspl_unchecked(distance_m, frequency_hz))
}

fn fspl_unchecked(d: f64, f: f64) -> f64 {
    20.0 * d.log10() + 20.0 * f.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
}

/// Whether the open segment `a`–`b` is free of every object interior.
pub fn is_clear(scene: &Scene, a: Vec3, b: Vec3) -> bool {
    !scene
        .objects
        .iter()
        .any(|o| o.aabb().segment_hits_interior(a, b, INTERIOR_TOLERANCE))
}

pub fn trace_los(scene: &Scene, tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Option<Ray> {
    let d = tx.distance(rx);
    if d <= 0.0 || !is_clear(scene, tx, rx) {
        return None;
    }
    let power = limits.tx_power_dbm - fspl_unchecked(d, limits.frequency_hz);
    Some(Ray::new(LOS_ID, None, (tx + rx) * 0.5, d, power, Mechanism::Los))
}

/// A face with the id of the object it belongs to.
#[derive(Clone, Copy)]
struct Facet {
    object_id: i64,
    face: Face,
    reflection_coeff: f64,
    scattering_coeff: f64,
}

fn facets(scene: &Scene) -> Vec<Facet> {
    scene
        .objects
        .iter()
        .flat_map(|o| {
            o.aabb().faces().into_iter().map(move |face| Facet {
                object_id: o.id,
                face,
                reflection_coeff: o.material.reflection_coeff,
                scattering_coeff: o.material.scattering_coeff,
            })
        })
        .collect()
}

fn db20(coeff: f64) -> f64 {
    if coeff > 0.0 {
        20.0 * coeff.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Specular paths up to `limits.max_reflection_order` bounces.
pub fn trace_reflections(scene: &Scene, tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    reflections_over(scene, &facets(scene), tx, rx, limits)
}

fn reflections_over(scene: &Scene, facets: &[Facet], tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    let mut rays = Vec::new();
    if limits.max_reflection_order == 0 {
        return rays;
    }
    for f in facets {
        if let Some(ray) = first_order(scene, f, tx, rx, limits) {
            rays.push(ray);
        }
    }
    if limits.max_reflection_order >= 2 {
        for f1 in facets {
            if f1.face.signed_distance(tx) <= 0.0 {
                continue;
            }
            let image1 = f1.face.mirror(tx);
            for f2 in facets {
                if std::ptr::eq(f1, f2) {
                    continue;
                }
                if let Some(ray) = second_order(scene, f1, f2, tx, image1, rx, limits) {
                    rays.push(ray);
                }
            }
        }
    }
    rays
}

fn first_order(scene: &Scene, f: &Facet, tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Option<Ray> {
    let face = &f.face;
    if face.signed_distance(tx) <= 0.0 || face.signed_distance(rx) <= 0.0 {
        return None;
    }
    let image = face.mirror(tx);
    let p = face.cross_plane(image, rx)?;
    if !face.contains_planar(p, FACE_TOLERANCE) {
        return None;
    }
    if !is_clear(scene, tx, p) || !is_clear(scene, p, rx) {
        return None;
    }
    let length = tx.distance(p) + p.distance(rx);
    let power = limits.tx_power_dbm - fspl_unchecked(length, limits.frequency_hz) + db20(f.reflection_coeff);
    (power >= limits.min_power_dbm).then(|| {
        Ray::new(f.object_id, Some(face.index as u8), p, length, power, Mechanism::Reflection)
    })
}

fn second_order(
    scene: &Scene,
    f1: &Facet,
    f2: &Facet,
    tx: Vec3,
    image1: Vec3,
    rx: Vec3,
    limits: &TraceLimits,
) -> Option<Ray> {
    let (a, b) = (&f1.face, &f2.face);
    if b.signed_distance(rx) <= 0.0 || b.signed_distance(image1) <= 0.0 {
        return None;
    }
    let image2 = b.mirror(image1);
    let p2 = b.cross_plane(image2, rx)?;
    if !b.contains_planar(p2, FACE_TOLERANCE) || a.signed_distance(p2) <= 0.0 {
        return None;
    }
    let p1 = a.cross_plane(image1, p2)?;
    if !a.contains_planar(p1, FACE_TOLERANCE) || b.signed_distance(p1) <= 0.0 {
        return None;
    }
    if !is_clear(scene, tx, p1) || !is_clear(scene, p1, p2) || !is_clear(scene, p2, rx) {
        return None;
    }
    let length = tx.distance(p1) + p1.distance(p2) + p2.distance(rx);
    let power = limits.tx_power_dbm - fspl_unchecked(length, limits.frequency_hz)
        + db20(f1.reflection_coeff)
        + db20(f2.reflection_coeff);
    (power >= limits.min_power_dbm).then(|| {
        Ray::new(f2.object_id, Some(b.index as u8), p2, length, power, Mechanism::Reflection)
    })
}

/// One scattered ray per face center visible from both ends.
pub fn trace_scattering(scene: &Scene, tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    scattering_over(scene, &facets(scene), tx, rx, limits)
}

fn scattering_over(scene: &Scene, facets: &[Facet], tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    let mut rays = Vec::new();
    if !limits.scattering {
        return rays;
    }
    for f in facets {
        if f.scattering_coeff <= 0.0 {
            continue;
        }
        let c = f.face.center();
        let (d1, d2) = (tx.distance(c), c.distance(rx));
        if d1 <= 0.0 || d2 <= 0.0 {
            continue;
        }
        let cos_in = f.face.signed_distance(tx) / d1;
        let cos_out = f.face.signed_distance(rx) / d2;
        if cos_in <= 0.0 || cos_out <= 0.0 {
            continue;
        }
        let power = limits.tx_power_dbm
            - fspl_unchecked(d1, limits.frequency_hz)
            - fspl_unchecked(d2, limits.frequency_hz)
            + db20(f.scattering_coeff)
            + 10.0 * (cos_in * cos_out).log10();
        if power < limits.min_power_dbm {
            continue;
        }
        if !is_clear(scene, tx, c) || !is_clear(scene, c, rx) {
            continue;
        }
        rays.push(Ray::new(
            f.object_id,
            Some(f.face.index as u8),
            c,
            d1 + d2,
            power,
            Mechanism::Scattering,
        ));
    }
    rays
}

/// All rays between `tx` and `rx`: LOS, then reflections, then scattering.
pub fn trace_point(scene: &Scene, tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    trace_with(scene, &facets(scene), tx, rx, limits)
}

fn trace_with(scene: &Scene, facets: &[Facet], tx: Vec3, rx: Vec3, limits: &TraceLimits) -> Vec<Ray> {
    let mut rays: Vec<Ray> = trace_los(scene, tx, rx, limits).into_iter().collect();
    rays.extend(reflections_over(scene, facets, tx, rx, limits));
    rays.extend(scattering_over(scene, facets, tx, rx, limits));
    rays
}

/// Traces every route point independently; snapshots come back in route
/// order whatever the execution order.
pub fn trace_route(scene: &Scene, tx: Vec3, route: &[Vec3], limits: &TraceLimits) -> Result<Vec<Snapshot>> {
    trace_route_with_id(scene, 0, tx, route, limits)
}

pub fn trace_route_with_id(
    scene: &Scene,
    route_id: u32,
    tx: Vec3,
    route: &[Vec3],
    limits: &TraceLimits,
) -> Result<Vec<Snapshot>> {
    limits.validate()?;
    if let Some(k) = route.iter().position(|&rx| rx == tx) {
        return Err(Error::InvalidConfig(format!("route point {k} coincides with the transmitter")));
    }
    let facets = facets(scene);
    Ok(par::map_range(route.len(), |index| Snapshot {
        route_id,
        index,
        tx,
        rx_position: route[index],
        rays: trace_with(scene, &facets, tx, route[index], limits),
    }))
}

/// Writes one snapshot per line.
pub fn save_snapshots(path: &std::path::Path, snapshots: &[Snapshot]) -> Result<()> {
    crate::io::write_jsonl("trace", path, snapshots)
}

pub fn load_snapshots(path: &std::path::Path) -> Result<Vec<Snapshot>> {
    crate::io::read_jsonl("trace", path)
}
