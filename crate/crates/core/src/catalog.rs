//! The twelve Newtonian scenarios and the 66-entry scenario x viewpoint catalog.
//!
//! Entries are ordered by `(scenario_id, azimuth, elevation)` and numbered from 1,
//! so entry ids are stable across runs and across every file format that embeds
//! the catalog.

use crate::error::{Error, Result};

pub const SCENARIO_COUNT: usize = 12;
pub const ENTRY_COUNT: usize = 66;

/// Elevation used by every azimuth-ring viewpoint.
pub const RING_ELEVATION_DEG: f64 = 30.0;
/// Camera elevations for scenarios that look the same from every azimuth.
pub const AXIAL_ELEVATIONS_DEG: [f64; 3] = [15.0, 45.0, 75.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MotionClass {
    Projectile,
    Linear,
    Fall,
    Swing,
    Roll,
    Slide,
    Static,
    Push,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForceMode {
    Impulse,
    Continuous,
    None,
}

/// How many distinct views a scenario needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetry {
    /// 8 azimuths.
    Full,
    /// Azimuth-invariant motion, 3 elevations.
    Axial,
    /// Views 180 degrees apart coincide, 4 azimuths.
    Half,
    /// No motion, a single view.
    Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScenarioSpec {
    pub id: u8,
    pub motion_class: MotionClass,
    pub force_mode: ForceMode,
    pub contact: bool,
    pub symmetry: Symmetry,
}

const fn spec(
    id: u8,
    motion_class: MotionClass,
    force_mode: ForceMode,
    contact: bool,
    symmetry: Symmetry,
) -> ScenarioSpec {
    ScenarioSpec {
        id,
        motion_class,
        force_mode,
        contact,
        symmetry,
    }
}

use ForceMode as F;
use MotionClass as M;
use Symmetry as Sym;

pub const SCENARIOS: [ScenarioSpec; SCENARIO_COUNT] = [
    spec(1, M::Projectile, F::Impulse, false, Sym::Full),
    spec(2, M::Fall, F::None, false, Sym::Half),
    spec(3, M::Projectile, F::Impulse, false, Sym::Full),
    spec(4, M::Linear, F::Impulse, false, Sym::Full),
    spec(5, M::Static, F::None, true, Sym::Point),
    spec(6, M::Fall, F::None, false, Sym::Axial),
    spec(7, M::Swing, F::None, false, Sym::Axial),
    spec(8, M::Push, F::Continuous, true, Sym::Full),
    spec(9, M::Slide, F::None, true, Sym::Full),
    spec(10, M::Linear, F::Impulse, true, Sym::Full),
    spec(11, M::Projectile, F::Impulse, false, Sym::Axial),
    spec(12, M::Swing, F::None, false, Sym::Half),
];

/// Canonical spec for `id`.
pub fn scenario(id: u8) -> Result<&'static ScenarioSpec> {
    SCENARIOS
        .iter()
        .find(|s| s.id == id)
        .ok_or_else(|| Error::Catalog(format!("unknown scenario id {id} (expected 1..=12)")))
}

/// Camera direction in degrees. Azimuth 0 looks across the scenario's main
/// direction of motion, so that motion runs left to right in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewpointSpec {
    pub azimuth: f64,
    pub elevation: f64,
}

impl ViewpointSpec {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&azimuth) || !(0.0..=90.0).contains(&elevation) {
            return Err(Error::Param(format!(
                "viewpoint out of range: azimuth {azimuth}, elevation {elevation}"
            )));
        }
        Ok(Self { azimuth, elevation })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub entry_id: u16,
    pub scenario_id: u8,
    pub viewpoint: ViewpointSpec,
}

fn ring(count: usize) -> Vec<ViewpointSpec> {
    (0..count)
        .map(|k| ViewpointSpec {
            azimuth: 45.0 * k as f64,
            elevation: RING_ELEVATION_DEG,
        })
        .collect()
}

pub fn enumerate_viewpoints(scenario: &ScenarioSpec) -> Result<Vec<ViewpointSpec>> {
    let canonical = self::scenario(scenario.id)?;
    if canonical != scenario {
        return Err(Error::Catalog(format!(
            "scenario {} does not match its canonical spec",
            scenario.id
        )));
    }
    Ok(match scenario.symmetry {
        Symmetry::Full => ring(8),
        Symmetry::Half => ring(4),
        Symmetry::Axial => AXIAL_ELEVATIONS_DEG
            .iter()
            .map(|&elevation| ViewpointSpec {
                azimuth: 0.0,
                elevation,
            })
            .collect(),
        Symmetry::Point => vec![ViewpointSpec {
            azimuth: 0.0,
            elevation: RING_ELEVATION_DEG,
        }],
    })
}

pub fn build_catalog() -> Vec<CatalogEntry> {
    let mut entries = Vec::with_capacity(ENTRY_COUNT);
    for s in &SCENARIOS {
        let mut views = enumerate_viewpoints(s).expect("canonical scenario");
        views.sort_by(|a, b| {
            a.azimuth
                .total_cmp(&b.azimuth)
                .then(a.elevation.total_cmp(&b.elevation))
        });
        for viewpoint in views {
            entries.push(CatalogEntry {
                entry_id: entries.len() as u16 + 1,
                scenario_id: s.id,
                viewpoint,
            });
        }
    }
    entries
}

pub fn lookup(entry_id: u16) -> Result<CatalogEntry> {
    if entry_id == 0 || entry_id as usize > ENTRY_COUNT {
        return Err(Error::Catalog(format!(
            "entry id {entry_id} out of range 1..={ENTRY_COUNT}"
        )));
    }
    Ok(build_catalog()[entry_id as usize - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn view_counts_follow_symmetry() {
        let counts: Vec<usize> = SCENARIOS
            .iter()
            .map(|s| enumerate_viewpoints(s).unwrap().len())
            .collect();
        assert_eq!(counts, vec![8, 4, 8, 8, 1, 3, 3, 8, 8, 8, 3, 4]);
        assert_eq!(counts.iter().sum::<usize>(), 66);
    }

    #[test]
    fn full_ring_azimuths() {
        let views = enumerate_viewpoints(scenario(1).unwrap()).unwrap();
        let az: Vec<f64> = views.iter().map(|v| v.azimuth).collect();
        assert_eq!(az, vec![0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0]);
    }

    #[test]
    fn axial_elevations_distinct_and_interior() {
        for id in [6, 7, 11] {
            let views = enumerate_viewpoints(scenario(id).unwrap()).unwrap();
            assert_eq!(views.len(), 3);
            for (i, v) in views.iter().enumerate() {
                assert!(v.elevation > 0.0 && v.elevation < 90.0);
                for w in &views[i + 1..] {
                    assert_ne!(v.elevation, w.elevation);
                }
            }
        }
    }

    #[test]
    fn scenario_invariants() {
        let ids: Vec<u8> = SCENARIOS.iter().map(|s| s.id).collect();
        assert_eq!(ids, (1..=12).collect::<Vec<u8>>());
        let s5 = scenario(5).unwrap();
        assert_eq!(s5.force_mode, ForceMode::None);
        assert_eq!(s5.motion_class, MotionClass::Static);
        assert_eq!(scenario(8).unwrap().force_mode, ForceMode::Continuous);
        assert_eq!(scenario(4).unwrap().force_mode, ForceMode::Impulse);
        assert!(!scenario(4).unwrap().contact);
        assert!(scenario(10).unwrap().contact);
    }

    #[test]
    fn unknown_scenario_rejected() {
        assert!(matches!(scenario(13), Err(Error::Catalog(_))));
        let bogus = ScenarioSpec { id: 0, ..SCENARIOS[0] };
        assert!(enumerate_viewpoints(&bogus).is_err());
    }

    #[test]
    fn catalog_order_and_lookup() {
        let cat = build_catalog();
        assert_eq!(cat.len(), 66);
        assert_eq!(cat.iter().filter(|e| e.scenario_id == 5).count(), 1);
        for (k, e) in cat.iter().enumerate() {
            assert_eq!(e.entry_id as usize, k + 1);
            assert_eq!(lookup(e.entry_id).unwrap(), *e);
        }
        for w in cat.windows(2) {
            let key = |e: &CatalogEntry| (e.scenario_id, e.viewpoint.azimuth, e.viewpoint.elevation);
            assert!(key(&w[0]).partial_cmp(&key(&w[1])) == Some(std::cmp::Ordering::Less));
        }
        let first = lookup(1).unwrap();
        assert_eq!(first.scenario_id, 1);
        assert_eq!(first.viewpoint.azimuth, 0.0);
        assert!(lookup(67).is_err());
        assert!(lookup(0).is_err());
    }

    #[test]
    fn catalog_is_deterministic() {
        assert_eq!(format!("{:?}", build_catalog()), format!("{:?}", build_catalog()));
    }
}
