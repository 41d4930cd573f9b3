//! Lane-change extraction from raw trajectories and lane-center polylines.

mod geometry;
mod lanes;
pub mod scenario;
mod window;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::VehicleType;

pub use geometry::{angle_between_deg, mean_heading, wrap_angle, Polyline, Projection};
pub use lanes::{assign_lanes, detect_lane_changes, Candidate, Detection};
pub use window::{
    boundaries_from_distance, compute_features, compute_state, locate_boundaries, speed_gain, Boundaries,
    EventWindow, Features,
};

/// Sampling period of every track (10 Hz).
pub const SAMPLE_PERIOD: f64 = 0.1;
/// Tolerance on the sampling period.
pub const SPACING_TOL: f64 = 1e-6;
/// Samples either side of the crossing sample (5 s at 10 Hz).
pub const HALF_WINDOW: i64 = 50;

pub const ACTIVE_FEATURE_NAMES: [&str; 10] = [
    "lc_time",
    "speed_std",
    "speed_gain",
    "max_heading_diff",
    "lane_crossing_angle",
    "yaw_rate_std",
    "max_lateral_speed",
    "max_lateral_accel",
    "accel_std",
    "max_accel",
];

pub const PASSIVE_FEATURE_NAMES: [&str; 4] = ["speed_gain", "max_accel", "min_accel", "speed_std"];

pub const STATE_NAMES: [&str; 11] = [
    "s1_active_speed",
    "s2_active_speed_std",
    "s3_active_accel",
    "s4_lead_gap",
    "s5_lead_rel_speed",
    "s6_lead_speed_std",
    "s7_lead_accel",
    "s8_lag_gap",
    "s9_passive_rel_speed",
    "s10_passive_speed_std",
    "s11_passive_accel",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub accel: f64,
    pub yaw_rate: f64,
}

impl TrajectorySample {
    /// Integer 10 Hz tick of this sample's timestamp.
    pub fn tick(&self) -> i64 {
        (self.time / SAMPLE_PERIOD).round() as i64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: String,
    pub vtype: VehicleType,
    pub samples: Vec<TrajectorySample>,
}

impl Track {
    /// Checks strictly increasing time, fixed 0.1 s spacing and non-negative speed.
    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Data(format!("track {} has no samples", self.id)));
        }
        for (i, s) in self.samples.iter().enumerate() {
            let vals = [s.time, s.x, s.y, s.heading, s.speed, s.accel, s.yaw_rate];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "track {} sample {i} has a non-finite value",
                    self.id
                )));
            }
            if s.speed < 0.0 {
                return Err(Error::Data(format!(
                    "track {} sample {i} has negative speed {}",
                    self.id, s.speed
                )));
            }
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            let dt = w[1].time - w[0].time;
            if dt <= 0.0 {
                return Err(Error::Data(format!(
                    "track {} time not strictly increasing at sample {}",
                    self.id,
                    i + 1
                )));
            }
            if (dt - SAMPLE_PERIOD).abs() > SPACING_TOL {
                return Err(Error::Data(format!(
                    "track {} sample spacing {dt} s at sample {} is not 0.1 s",
                    self.id,
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn first_tick(&self) -> i64 {
        self.samples[0].tick()
    }

    /// Index of the sample at `tick`, if the track covers it.
    pub fn index_of_tick(&self, tick: i64) -> Option<usize> {
        let first = self.samples.first()?.tick();
        let idx = tick - first;
        (idx >= 0 && (idx as usize) < self.samples.len()).then_some(idx as usize)
    }

    pub fn covers_ticks(&self, from: i64, to: i64) -> bool {
        self.index_of_tick(from).is_some() && self.index_of_tick(to).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: i64,
    pub centerline: Polyline,
    pub left: Option<i64>,
    pub right: Option<i64>,
    pub exits: Vec<i64>,
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaneMap {
    lanes: Vec<Lane>,
    index: HashMap<i64, usize>,
}

impl LaneMap {
    pub fn new(lanes: Vec<Lane>) -> Result<Self> {
        if lanes.is_empty() {
            return Err(Error::MapFormat("map has no lanes".into()));
        }
        let mut index = HashMap::with_capacity(lanes.len());
        for (i, lane) in lanes.iter().enumerate() {
            if index.insert(lane.id, i).is_some() {
                return Err(Error::MapFormat(format!("duplicate lane id {}", lane.id)));
            }
        }
        let map = LaneMap { lanes, index };
        for lane in &map.lanes {
            for (side, nb) in [("left", lane.left), ("right", lane.right)] {
                let Some(nb) = nb else { continue };
                let Some(other) = map.get(nb) else {
                    return Err(Error::MapFormat(format!(
                        "lane {} names unknown {side} neighbor {nb}",
                        lane.id
                    )));
                };
                let back = if side == "left" { other.right } else { other.left };
                if back != Some(lane.id) {
                    return Err(Error::MapFormat(format!(
                        "adjacency between lanes {} and {nb} is not symmetric",
                        lane.id
                    )));
                }
            }
            if let Some(bad) = lane.exits.iter().find(|e| !map.index.contains_key(e)) {
                return Err(Error::MapFormat(format!(
                    "lane {} names unknown exit lane {bad}",
                    lane.id
                )));
            }
        }
        Ok(map)
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn get(&self, id: i64) -> Option<&Lane> {
        self.index.get(&id).map(|&i| &self.lanes[i])
    }

    pub fn position(&self, id: i64) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn lane(&self, idx: usize) -> &Lane {
        &self.lanes[idx]
    }

    /// The current lane, its exits, and its left/right neighbors.
    pub fn successors(&self, idx: usize) -> Vec<usize> {
        let lane = &self.lanes[idx];
        let mut out = vec![idx];
        for id in lane.exits.iter().copied().chain(lane.left).chain(lane.right) {
            if let Some(i) = self.position(id) {
                if !out.contains(&i) {
                    out.push(i);
                }
            }
        }
        out
    }

    pub fn is_neighbor(&self, from: usize, to: usize) -> bool {
        let lane = &self.lanes[from];
        let to_id = self.lanes[to].id;
        lane.left == Some(to_id) || lane.right == Some(to_id)
    }
}

/// One accepted lane-change event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneChangeEvent {
    pub event_id: String,
    pub active_id: String,
    pub lead_id: String,
    pub passive_id: String,
    pub crossing_time: f64,
    pub start_time: f64,
    pub end_time: f64,
    pub active_type: VehicleType,
    pub passive_type: VehicleType,
    /// Set when a boundary fell back to a window edge.
    pub boundary_flagged: bool,
    pub lane_crossing_angle: f64,
    pub active_features: [f64; 10],
    pub passive_features: [f64; 4],
    pub state: [f64; 11],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub track_id: String,
    pub tick: i64,
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub events: Vec<LaneChangeEvent>,
    pub rejections: Vec<Rejection>,
    pub candidates: usize,
}

/// Runs assignment, detection, boundary location, and feature/state
/// computation over every track.
pub fn extract_events(tracks: &[Track], map: &LaneMap) -> Result<Extraction> {
    for t in tracks {
        t.validate()?;
    }
    let assignments = tracks
        .iter()
        .map(|t| assign_lanes(&t.samples, map))
        .collect::<Vec<_>>();
    let Detection {
        candidates,
        mut rejections,
        raw_count,
    } = detect_lane_changes(tracks, &assignments, map);

    let mut events = Vec::new();
    for cand in candidates {
        let active = &tracks[cand.track];
        let lead = &tracks[cand.lead];
        let passive = &tracks[cand.passive];
        let lane = map.lane(cand.to_lane);
        let reject = |reason: &str, detail: String| Rejection {
            track_id: active.id.clone(),
            tick: cand.tick,
            reason: reason.to_string(),
            detail,
        };
        let window = EventWindow::new(active, lead, passive, &lane.centerline, cand.tick)?;
        let bounds = window.boundaries();
        if bounds.during_len() < 2 {
            rejections.push(reject("during_samples", "during-LC period has < 2 samples".into()));
            continue;
        }
        let features = match compute_features(&window, &bounds) {
            Ok(f) => f,
            Err(e) => {
                rejections.push(reject("features", e.to_string()));
                continue;
            }
        };
        let state = match compute_state(&window, &bounds) {
            Ok(s) => s,
            Err(e) => {
                rejections.push(reject("state", e.to_string()));
                continue;
            }
        };
        events.push(LaneChangeEvent {
            event_id: format!("{}@{}", active.id, cand.tick),
            active_id: active.id.clone(),
            lead_id: lead.id.clone(),
            passive_id: passive.id.clone(),
            crossing_time: window.time_at(0),
            start_time: bounds.start_time,
            end_time: bounds.end_time,
            active_type: active.vtype,
            passive_type: passive.vtype,
            boundary_flagged: bounds.flagged,
            lane_crossing_angle: features.lane_crossing_angle,
            active_features: features.active,
            passive_features: features.passive,
            state,
        });
    }
    Ok(Extraction {
        events,
        rejections,
        candidates: raw_count,
    })
}
