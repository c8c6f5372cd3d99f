//! Channel impulse responses rebuilt from cluster centers and powers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::raytracer::{Snapshot, LOS_ID};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Resolvable delay at 100 MHz bandwidth, seconds.
pub const DEFAULT_DELAY_TOL: f64 = 10e-9;
pub const DEFAULT_POWER_TOL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TapSource {
    Restored,
    Simulated,
}

impl TapSource {
    pub fn as_str(self) -> &'static str {
        match self {
            TapSource::Restored => "RESTORED",
            TapSource::Simulated => "SIMULATED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirTap {
    /// Seconds.
    pub delay: f64,
    pub power_dbm: f64,
    pub source: TapSource,
}

/// A cluster as seen by reconstruction: which object, where, how strong.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterPoint {
    pub object_id: Option<i64>,
    pub center: Vec3,
    pub power_dbm: f64,
}

/// One tap per cluster. The line-of-sight cluster uses the direct distance;
/// every other cluster the two-leg path through its center. Padding slots
/// (`object_id` of `None`) are skipped.
pub fn reconstruct(clusters: &[ClusterPoint], tx: Vec3, rx: Vec3) -> Result<Vec<CirTap>> {
    let mut taps = Vec::with_capacity(clusters.len());
    for c in clusters {
        let Some(id) = c.object_id else { continue };
        if !c.center.is_finite() || !c.power_dbm.is_finite() {
            return Err(Error::Data(format!("cluster of object {id} has non-finite features")));
        }
        let path = if id == LOS_ID {
            tx.distance(rx)
        } else {
            tx.distance(c.center) + c.center.distance(rx)
        };
        taps.push(CirTap {
            delay: path / SPEED_OF_LIGHT,
            power_dbm: c.power_dbm,
            source: TapSource::Restored,
        });
    }
    Ok(taps)
}

/// Every traced ray of a snapshot as a simulated tap.
pub fn simulated_taps(snapshot: &Snapshot) -> Vec<CirTap> {
    snapshot
        .rays
        .iter()
        .map(|r| CirTap {
            delay: r.delay,
            power_dbm: r.power_dbm,
            source: TapSource::Simulated,
        })
        .collect()
}

fn compatible(r: &CirTap, s: &CirTap, delay_tol: f64, power_tol: f64) -> bool {
    (r.delay - s.delay).abs() <= delay_tol && (r.power_dbm - s.power_dbm).abs() <= power_tol
}

/// Fraction of simulated taps paired one-to-one with a restored tap within
/// both tolerances. Pairs come from a maximum bipartite matching in which
/// every simulated tap tries restored taps nearest in delay first; a
/// maximum matching keeps the rate monotone in both tolerances.
pub fn match_rate(restored: &[CirTap], simulated: &[CirTap], delay_tol: f64, power_tol: f64) -> Result<f64> {
    if !(delay_tol > 0.0) || !(power_tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tolerances must be positive, got {delay_tol} s and {power_tol} dB"
        )));
    }
    if simulated.is_empty() {
        return Ok(1.0);
    }
    let candidates: Vec<Vec<usize>> = simulated
        .iter()
        .map(|s| {
            let mut c: Vec<usize> = (0..restored.len())
                .filter(|&j| compatible(&restored[j], s, delay_tol, power_tol))
                .collect();
            c.sort_by(|&a, &b| {
                let da = (restored[a].delay - s.delay).abs();
                let db = (restored[b].delay - s.delay).abs();
                da.total_cmp(&db).then(a.cmp(&b))
            });
            c
        })
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; restored.len()];
    let mut matched = 0;
    for i in 0..simulated.len() {
        let mut seen = vec![false; restored.len()];
        if augment(i, &candidates, &mut owner, &mut seen) {
            matched += 1;
        }
    }
    Ok(matched as f64 / simulated.len() as f64)
}

fn augment(i: usize, candidates: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &j in &candidates[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        if owner[j].is_none_or(|k| augment(k, candidates, owner, seen)) {
            owner[j] = Some(i);
            return true;
        }
    }
    false
}

/// Plot row: `snapshot_index, source, delay_ns, power_dbm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirRow {
    pub snapshot_index: usize,
    pub source: TapSource,
    pub delay_ns: f64,
    pub power_dbm: f64,
}

pub fn rows(snapshot_index: usize, taps: &[CirTap]) -> Vec<CirRow> {
    taps.iter()
        .map(|t| CirRow {
            snapshot_index,
            source: t.source,
            delay_ns: t.delay * 1e9,
            power_dbm: t.power_dbm,
        })
        .collect()
}

pub fn write_cir_csv(path: &Path, rows: &[CirRow]) -> Result<()> {
    crate::metrics::write_csv("cir", path, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tap(delay_ns: f64, power_dbm: f64, source: TapSource) -> CirTap {
        CirTap {
            delay: delay_ns * 1e-9,
            power_dbm,
            source,
        }
    }

    fn point(id: i64, center: Vec3) -> ClusterPoint {
        ClusterPoint {
            object_id: Some(id),
            center,
            power_dbm: -70.0,
        }
    }

    #[test]
    fn los_delay_over_300_m() {
        let taps = reconstruct(&[point(LOS_ID, Vec3::new(9.0, 9.0, 9.0))], Vec3::ZERO, Vec3::new(300.0, 0.0, 0.0)).unwrap();
        let expect = 300.0 / 299_792_458.0;
        assert!((taps[0].delay - expect).abs() <= 1e-12 * expect);
        assert!((taps[0].delay * 1e6 - 1.00069).abs() < 1e-5);
    }

    #[test]
    fn two_leg_delay() {
        // 60 m out along x, then 40 m along y
        let c = Vec3::new(60.0, 0.0, 0.0);
        let taps = reconstruct(&[point(3, c)], Vec3::ZERO, Vec3::new(60.0, 40.0, 0.0)).unwrap();
        assert!((taps[0].delay - 100.0 / SPEED_OF_LIGHT).abs() < 1e-20);
        assert!((taps[0].delay * 1e9 - 333.564).abs() < 1e-3);
    }

    #[test]
    fn center_on_segment_matches_los() {
        let (tx, rx) = (Vec3::new(1.0, 2.0, 3.0), Vec3::new(41.0, 32.0, 3.0));
        let on = tx + (rx - tx) * 0.3;
        let taps = reconstruct(&[point(4, on), point(LOS_ID, on)], tx, rx).unwrap();
        assert!((taps[0].delay - taps[1].delay).abs() <= 1e-12 * taps[1].delay);
    }

    #[test]
    fn padding_skipped() {
        let pad = ClusterPoint {
            object_id: None,
            center: Vec3::ZERO,
            power_dbm: 0.0,
        };
        assert!(reconstruct(&[pad], Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn match_rate_examples() {
        let sim = vec![tap(100.0, -80.0, TapSource::Simulated), tap(250.0, -95.0, TapSource::Simulated)];
        let same: Vec<CirTap> = sim.iter().map(|t| CirTap { source: TapSource::Restored, ..*t }).collect();
        assert_eq!(match_rate(&same, &sim, 10e-9, 3.0).unwrap(), 1.0);
        assert_eq!(match_rate(&[], &sim, 10e-9, 3.0).unwrap(), 0.0);

        let one = [tap(100.0, -80.0, TapSource::Simulated)];
        let near = [tap(105.0, -81.0, TapSource::Restored)];
        assert_eq!(match_rate(&near, &one, 10e-9, 3.0).unwrap(), 1.0);
        assert_eq!(match_rate(&near, &one, 3e-9, 3.0).unwrap(), 0.0);
        assert_eq!(match_rate(&near, &one, 10e-9, 0.5).unwrap(), 0.0);
        assert!(match_rate(&near, &one, 0.0, 3.0).is_err());
    }

    #[test]
    fn one_to_one_pairing() {
        let sim = [tap(100.0, -80.0, TapSource::Simulated), tap(104.0, -80.0, TapSource::Simulated)];
        let res = [tap(102.0, -80.0, TapSource::Restored)];
        assert_eq!(match_rate(&res, &sim, 10e-9, 3.0).unwrap(), 0.5);
    }

    #[test]
    fn greedy_trap_resolved() {
        // nearest-first greedy would give r0 to s0 and leave s1 unmatched
        let sim = [tap(100.0, -80.0, TapSource::Simulated), tap(92.0, -80.0, TapSource::Simulated)];
        let res = [tap(99.0, -80.0, TapSource::Restored), tap(108.0, -80.0, TapSource::Restored)];
        assert_eq!(match_rate(&res, &sim, 9e-9, 3.0).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn monotone_in_tolerances(
            sim in proptest::collection::vec((0.0f64..500.0, -120.0f64..-60.0), 1..12),
            res in proptest::collection::vec((0.0f64..500.0, -120.0f64..-60.0), 0..12),
            d in 1.0f64..40.0, p in 0.5f64..8.0, dd in 0.0f64..20.0, dp in 0.0f64..4.0,
        ) {
            let s: Vec<CirTap> = sim.iter().map(|&(d, p)| tap(d, p, TapSource::Simulated)).collect();
            let r: Vec<CirTap> = res.iter().map(|&(d, p)| tap(d, p, TapSource::Restored)).collect();
            let base = match_rate(&r, &s, d * 1e-9, p).unwrap();
            prop_assert!(match_rate(&r, &s, (d + dd) * 1e-9, p).unwrap() >= base);
            prop_assert!(match_rate(&r, &s, d * 1e-9, p + dp).unwrap() >= base);
            prop_assert!((0.0..=1.0).contains(&base));
        }

        #[test]
        fn rigid_motion_keeps_delays(
            angle in 0.0f64..std::f64::consts::TAU,
            shift in proptest::array::uniform3(-500.0f64..500.0),
            pts in proptest::collection::vec(proptest::array::uniform3(-200.0f64..200.0), 1..6),
        ) {
            let (tx, rx) = (Vec3::new(3.0, -4.0, 9.0), Vec3::new(80.0, 20.0, 2.0));
            let (sn, cs) = angle.sin_cos();
            let t = Vec3::new(shift[0], shift[1], shift[2]);
            let m = |v: Vec3| Vec3::new(cs * v.x - sn * v.y, sn * v.x + cs * v.y, v.z) + t;
            let clusters: Vec<ClusterPoint> = pts.iter().enumerate()
                .map(|(k, p)| point(if k == 0 { LOS_ID } else { k as i64 }, Vec3::new(p[0], p[1], p[2])))
                .collect();
            let moved: Vec<ClusterPoint> = clusters.iter().map(|c| ClusterPoint { center: m(c.center), ..*c }).collect();
            let a = reconstruct(&clusters, tx, rx).unwrap();
            let b = reconstruct(&moved, m(tx), m(rx)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.delay - y.delay).abs() * SPEED_OF_LIGHT < 1e-9);
            }
        }
    }
}
