#![allow(dead_code)]

use vista_core::ais::{generate_synthetic_track, Dataset, SyntheticParams, TrackKind};
use vista_core::method::FunctionSpec;
use vista_core::sdkg::{BehaviorTuple, KnowledgeUnit, StaticTuple, UnitFunction};

pub fn statics(vessel: &str, nav: &str, ship: &str) -> StaticTuple {
    StaticTuple {
        vessel_id: vessel.into(),
        nav_status: nav.into(),
        cargo_type: "no hazard".into(),
        draught_bin: "[4,6)".into(),
        length_bin: "[100,150)".into(),
        width_bin: "[20,25)".into(),
        ship_type: ship.into(),
        spatial_context: "traffic-separation-scheme".into(),
    }
}

pub fn behavior(speed: &str, duration_bin: u32) -> BehaviorTuple {
    BehaviorTuple {
        speed: speed.into(),
        course: "stable".into(),
        heading: "stable".into(),
        intent: "navigating".into(),
        duration_bin,
    }
}

pub fn unit(index: usize, s: StaticTuple, b: BehaviorTuple, f: FunctionSpec) -> KnowledgeUnit {
    KnowledgeUnit {
        vessel_id: s.vessel_id.clone(),
        segment_index: index,
        statics: s,
        behavior: b,
        function: UnitFunction { description: format!("{} method", f.name()), spec: f },
    }
}

/// `vessels` tracks of `n` records spread over a small grid.
pub fn tracks(kind: TrackKind, vessels: usize, n: usize, tweak: impl Fn(usize, &mut SyntheticParams)) -> Dataset {
    Dataset::new((0..vessels).map(|i| {
        let mut p = SyntheticParams {
            vessel_id: format!("{}", 219_000_000 + i),
            start: (55.0 + 0.05 * (i % 20) as f64, 10.0 + 0.05 * (i / 20) as f64),
            seed: i as u64,
            ..Default::default()
        };
        tweak(i, &mut p);
        generate_synthetic_track(kind, n, &p).unwrap()
    }))
}
