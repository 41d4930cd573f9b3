use crate::error::{Error, Result};
use crate::numeric::{max, mean, min, pop_std};

use super::geometry::{angle_between_deg, wrap_angle, Polyline, Projection};
use super::{Track, TrajectorySample, HALF_WINDOW, SAMPLE_PERIOD};

/// Follower speed floor used in time-gap computations (m/s).
pub const MIN_GAP_SPEED: f64 = 0.1;

/// The three aligned 10 s trajectories around one crossing sample, with
/// every sample projected onto the target lane center.
#[derive(Debug, Clone)]
pub struct EventWindow<'a> {
    pub active: &'a [TrajectorySample],
    pub lead: &'a [TrajectorySample],
    pub passive: &'a [TrajectorySample],
    pub active_proj: Vec<Projection>,
    pub lead_proj: Vec<Projection>,
    pub passive_proj: Vec<Projection>,
    crossing_tick: i64,
}

fn slice_around(track: &Track, tick: i64) -> Result<&[TrajectorySample]> {
    let lo = track.index_of_tick(tick - HALF_WINDOW);
    let hi = track.index_of_tick(tick + HALF_WINDOW);
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok(&track.samples[lo..=hi]),
        _ => Err(Error::Data(format!(
            "track {} does not cover the window around tick {tick}",
            track.id
        ))),
    }
}

impl<'a> EventWindow<'a> {
    pub fn new(
        active: &'a Track,
        lead: &'a Track,
        passive: &'a Track,
        target: &Polyline,
        crossing_tick: i64,
    ) -> Result<Self> {
        Self::from_slices(
            slice_around(active, crossing_tick)?,
            slice_around(lead, crossing_tick)?,
            slice_around(passive, crossing_tick)?,
            target,
            crossing_tick,
        )
    }

    /// Builds a window from pre-cut, time-aligned slices of equal length
    /// whose middle sample is the crossing sample.
    pub fn from_slices(
        active: &'a [TrajectorySample],
        lead: &'a [TrajectorySample],
        passive: &'a [TrajectorySample],
        target: &Polyline,
        crossing_tick: i64,
    ) -> Result<Self> {
        let n = active.len();
        if n < 3 || n.is_multiple_of(2) || lead.len() != n || passive.len() != n {
            return Err(Error::Data("event window slices must be aligned and odd-length".into()));
        }
        let proj = |s: &[TrajectorySample]| s.iter().map(|p| target.project(p.x, p.y)).collect();
        Ok(EventWindow {
            active,
            lead,
            passive,
            active_proj: proj(active),
            lead_proj: proj(lead),
            passive_proj: proj(passive),
            crossing_tick,
        })
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn crossing_index(&self) -> usize {
        self.len() / 2
    }

    /// Time of the sample `offset` samples from the crossing.
    pub fn time_at(&self, offset: i64) -> f64 {
        let idx = self.crossing_index() as i64 + offset;
        self.active[idx as usize].time
    }

    pub fn crossing_tick(&self) -> i64 {
        self.crossing_tick
    }

    /// Unsigned distance of the active vehicle to the target lane center.
    pub fn target_distance(&self) -> Vec<f64> {
        self.active_proj.iter().map(|p| p.distance).collect()
    }

    pub fn boundaries(&self) -> Boundaries {
        let times: Vec<f64> = self.active.iter().map(|s| s.time).collect();
        boundaries_from_distance(&times, &self.target_distance(), self.crossing_index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundaries {
    pub start_idx: usize,
    pub crossing_idx: usize,
    pub end_idx: usize,
    pub start_time: f64,
    pub end_time: f64,
    /// At least one boundary fell back to a window edge.
    pub flagged: bool,
}

impl Boundaries {
    pub fn during_len(&self) -> usize {
        self.end_idx - self.start_idx + 1
    }
}

/// Start = latest local maximum of `d` before the crossing, end = earliest
/// local minimum after it. A scan that runs into the window edge, or that
/// cannot leave the crossing sample, falls back to that edge and flags it.
pub fn boundaries_from_distance(times: &[f64], d: &[f64], crossing: usize) -> Boundaries {
    let last = d.len() - 1;
    let mut flagged = false;

    let mut start = crossing;
    while start > 0 && d[start - 1] > d[start] {
        start -= 1;
    }
    if start == 0 || start == crossing {
        start = 0;
        flagged = true;
    }

    let mut end = crossing;
    while end < last && d[end + 1] < d[end] {
        end += 1;
    }
    if end == last || end == crossing {
        end = last;
        flagged = true;
    }

    Boundaries {
        start_idx: start,
        crossing_idx: crossing,
        end_idx: end,
        start_time: times[start],
        end_time: times[end],
        flagged,
    }
}

/// Boundaries of the lane change of `track` into `target` at `crossing_time`.
pub fn locate_boundaries(track: &Track, target: &Polyline, crossing_time: f64) -> Result<Boundaries> {
    let tick = (crossing_time / SAMPLE_PERIOD).round() as i64;
    let slice = slice_around(track, tick)?;
    let times: Vec<f64> = slice.iter().map(|s| s.time).collect();
    let d: Vec<f64> = slice.iter().map(|s| target.project(s.x, s.y).distance).collect();
    Ok(boundaries_from_distance(&times, &d, slice.len() / 2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    pub active: [f64; 10],
    pub passive: [f64; 4],
    pub lane_crossing_angle: f64,
}

/// Mean speed after the lane change minus mean speed before it.
pub fn speed_gain(speeds: &[f64], b: &Boundaries) -> Result<f64> {
    let before = &speeds[..b.start_idx];
    let after = &speeds[b.end_idx + 1..];
    if before.is_empty() || after.is_empty() {
        return Err(Error::Data("speed gain needs samples before and after the lane change".into()));
    }
    Ok(mean(after) - mean(before))
}

/// Central-difference derivative with one-sided ends.
fn derivative(xs: &[f64], dt: f64) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|i| match i {
            0 => (xs[1] - xs[0]) / dt,
            i if i == n - 1 => (xs[n - 1] - xs[n - 2]) / dt,
            i => (xs[i + 1] - xs[i - 1]) / (2.0 * dt),
        })
        .collect()
}

pub fn compute_features(w: &EventWindow<'_>, b: &Boundaries) -> Result<Features> {
    if b.during_len() < 2 {
        return Err(Error::Data("during-LC period has fewer than 2 samples".into()));
    }
    let during = b.start_idx..=b.end_idx;
    let col = |s: &[TrajectorySample], f: fn(&TrajectorySample) -> f64| -> Vec<f64> { s.iter().map(f).collect() };

    let a_speed = col(w.active, |s| s.speed);
    let a_accel = col(w.active, |s| s.accel);
    let a_yaw = col(w.active, |s| s.yaw_rate);
    let rel_heading: Vec<f64> = w
        .active
        .iter()
        .zip(&w.active_proj)
        .map(|(s, p)| wrap_angle(s.heading - p.tangent_heading))
        .collect();
    let lat_speed: Vec<f64> = a_speed.iter().zip(&rel_heading).map(|(v, h)| v * h.sin()).collect();
    let dt = w.active[1].time - w.active[0].time;
    let lat_accel = derivative(&lat_speed, dt);

    let c = b.crossing_idx;
    let crossing_angle = angle_between_deg(w.active[c].heading, w.active_proj[c].tangent_heading);

    let active = [
        b.end_time - b.start_time,
        pop_std(&a_speed[during.clone()]),
        speed_gain(&a_speed, b)?,
        max(rel_heading[during.clone()].iter().map(|h| h.abs())),
        crossing_angle,
        pop_std(&a_yaw[during.clone()]),
        max(lat_speed[during.clone()].iter().map(|v| v.abs())),
        max(lat_accel[during.clone()].iter().map(|v| v.abs())),
        pop_std(&a_accel[during.clone()]),
        max(a_accel[during.clone()].iter().copied()),
    ];

    let p_speed = col(w.passive, |s| s.speed);
    let p_accel = col(w.passive, |s| s.accel);
    let passive = [
        speed_gain(&p_speed, b)?,
        max(p_accel[during.clone()].iter().copied()),
        min(p_accel[during.clone()].iter().copied()),
        pop_std(&p_speed[during]),
    ];

    Ok(Features {
        active,
        passive,
        lane_crossing_angle: crossing_angle,
    })
}

/// State variables s1..s11 over the before-LC period.
pub fn compute_state(w: &EventWindow<'_>, b: &Boundaries) -> Result<[f64; 11]> {
    let n = b.start_idx;
    if n < 2 {
        return Err(Error::Data("before-LC period has fewer than 2 samples".into()));
    }
    let speeds = |s: &[TrajectorySample]| s[..n].iter().map(|p| p.speed).collect::<Vec<_>>();
    let accels = |s: &[TrajectorySample]| s[..n].iter().map(|p| p.accel).collect::<Vec<_>>();
    let (va, vl, vp) = (speeds(w.active), speeds(w.lead), speeds(w.passive));

    let lead_gap: Vec<f64> = (0..n)
        .map(|i| (w.lead_proj[i].station - w.active_proj[i].station) / va[i].max(MIN_GAP_SPEED))
        .collect();
    let lag_gap: Vec<f64> = (0..n)
        .map(|i| (w.active_proj[i].station - w.passive_proj[i].station) / vp[i].max(MIN_GAP_SPEED))
        .collect();
    let lead_rel: Vec<f64> = vl.iter().zip(&va).map(|(l, a)| l - a).collect();
    let lag_rel: Vec<f64> = vp.iter().zip(&va).map(|(p, a)| p - a).collect();

    Ok([
        mean(&va),
        pop_std(&va),
        mean(&accels(w.active)),
        mean(&lead_gap),
        mean(&lead_rel),
        pop_std(&vl),
        mean(&accels(w.lead)),
        mean(&lag_gap),
        mean(&lag_rel),
        pop_std(&vp),
        mean(&accels(w.passive)),
    ])
}
