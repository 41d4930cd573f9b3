use log::debug;

use super::geometry::mean_heading;
use super::{wrap_angle, LaneMap, Rejection, Track, TrajectorySample, HALF_WINDOW};

/// Samples farther than this from every candidate lane center stay unassigned.
pub const ASSIGN_THRESHOLD_M: f64 = 3.5;
/// Turn filter on the heading change across the event window.
pub const MAX_HEADING_CHANGE_RAD: f64 = 0.2;
/// Urban-speed filter on the active vehicle's mean speed over the window.
pub const MAX_MEAN_SPEED: f64 = 25.0;
/// Samples averaged at each end of the window for the heading test (1 s).
const HEADING_AVG_SAMPLES: usize = 10;

fn nearest(map: &LaneMap, candidates: impl Iterator<Item = usize>, s: &TrajectorySample) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for idx in candidates {
        let d = map.lane(idx).centerline.project(s.x, s.y).distance;
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, idx));
        }
    }
    best.filter(|&(d, _)| d <= ASSIGN_THRESHOLD_M).map(|(_, i)| i)
}

/// Per-sample lane index into `map.lanes()`.
///
/// The first sample (and any sample following an unassigned one) takes the
/// globally nearest lane; later samples only consider the previous lane, its
/// exits and its left/right neighbors.
pub fn assign_lanes(samples: &[TrajectorySample], map: &LaneMap) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(samples.len());
    let mut prev: Option<usize> = None;
    for s in samples {
        let cur = match prev {
            Some(p) => nearest(map, map.successors(p).into_iter(), s),
            None => nearest(map, 0..map.lanes().len(), s),
        };
        out.push(cur);
        prev = cur;
    }
    out
}

/// A lane change that passed every filter, with its lead and lag vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub track: usize,
    pub tick: i64,
    pub from_lane: usize,
    pub to_lane: usize,
    pub lead: usize,
    pub passive: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Detection {
    pub candidates: Vec<Candidate>,
    pub rejections: Vec<Rejection>,
    /// Lane transitions seen before any filtering.
    pub raw_count: usize,
}

fn window_slice(track: &Track, tick: i64) -> Option<&[TrajectorySample]> {
    let lo = track.index_of_tick(tick - HALF_WINDOW)?;
    let hi = track.index_of_tick(tick + HALF_WINDOW)?;
    Some(&track.samples[lo..=hi])
}

/// Scans every track for transitions into a left/right neighbor lane and
/// applies the intersection, window, turn, speed and lead/lag filters.
pub fn detect_lane_changes(
    tracks: &[Track],
    assignments: &[Vec<Option<usize>>],
    map: &LaneMap,
) -> Detection {
    let mut det = Detection::default();
    for (ti, track) in tracks.iter().enumerate() {
        let lanes = &assignments[ti];
        for k in 1..track.samples.len() {
            let (Some(from), Some(to)) = (lanes[k - 1], lanes[k]) else {
                continue;
            };
            if from == to || !map.is_neighbor(from, to) {
                continue;
            }
            det.raw_count += 1;
            let tick = track.samples[k].tick();
            let mut reject = |reason: &str, detail: String| {
                debug!("track {} tick {tick}: rejected ({reason}) {detail}", track.id);
                det.rejections.push(Rejection {
                    track_id: track.id.clone(),
                    tick,
                    reason: reason.to_string(),
                    detail,
                });
            };
            if map.lane(from).interpolated || map.lane(to).interpolated {
                reject("interpolated", "lane change on an interpolated lane".into());
                continue;
            }
            let Some(window) = window_slice(track, tick) else {
                reject("window", "track does not cover the 10 s window".into());
                continue;
            };
            let n = HEADING_AVG_SAMPLES.min(window.len());
            let h0 = mean_heading(window[..n].iter().map(|s| s.heading));
            let h1 = mean_heading(window[window.len() - n..].iter().map(|s| s.heading));
            let dh = wrap_angle(h1 - h0).abs();
            if dh >= MAX_HEADING_CHANGE_RAD {
                reject("heading", format!("heading change {dh:.4} rad"));
                continue;
            }
            let mean_speed = window.iter().map(|s| s.speed).sum::<f64>() / window.len() as f64;
            if mean_speed >= MAX_MEAN_SPEED {
                reject("speed", format!("mean speed {mean_speed:.3} m/s"));
                continue;
            }

            let target = &map.lane(to).centerline;
            let me = &track.samples[k];
            let my_station = target.project(me.x, me.y).station;
            let mut lead: Option<(f64, usize)> = None;
            let mut lag: Option<(f64, usize)> = None;
            for (oi, other) in tracks.iter().enumerate() {
                if oi == ti {
                    continue;
                }
                let Some(j) = other.index_of_tick(tick) else { continue };
                if assignments[oi][j] != Some(to) {
                    continue;
                }
                let s = &other.samples[j];
                let st = target.project(s.x, s.y).station;
                if st > my_station {
                    if lead.is_none_or(|(b, _)| st < b) {
                        lead = Some((st, oi));
                    }
                } else if st < my_station && lag.is_none_or(|(b, _)| st > b) {
                    lag = Some((st, oi));
                }
            }
            let Some((_, lead)) = lead else {
                reject("no_lead", "no lead vehicle in the target lane".into());
                continue;
            };
            let Some((_, passive)) = lag else {
                reject("no_lag", "no lag vehicle in the target lane".into());
                continue;
            };
            if window_slice(&tracks[lead], tick).is_none() {
                reject("lead_window", format!("lead {} does not cover the window", tracks[lead].id));
                continue;
            }
            if window_slice(&tracks[passive], tick).is_none() {
                reject("lag_window", format!("lag {} does not cover the window", tracks[passive].id));
                continue;
            }
            det.candidates.push(Candidate {
                track: ti,
                tick,
                from_lane: from,
                to_lane: to,
                lead,
                passive,
            });
        }
    }
    det
}
