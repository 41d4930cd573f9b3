//! Synthetic straight-road lane-change scenarios used as pipeline fixtures.
//!
//! Each scenario gets its own pair of parallel lanes (left lane id `10s+1`,
//! right lane id `10s+2`, 3.6 m apart) far from every other scenario, one
//! lane-changing vehicle moving left to right, a lead and a lag vehicle in
//! the right lane. Lane-change style and lag response are drawn so that the
//! extracted features separate into two behavioral groups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Lane, Polyline, Track, TrajectorySample, SAMPLE_PERIOD};
use crate::types::VehicleType;

pub const LANE_WIDTH: f64 = 3.6;
const DURATION_S: f64 = 20.0;
const CROSSING_S: f64 = 10.0;
const SCENARIO_SPACING: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub events: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub tracks: Vec<Track>,
    pub lanes: Vec<Lane>,
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

/// Builds a track from per-sample (x, y, speed) by differentiating for
/// heading, acceleration and yaw rate.
fn kinematic_track(id: String, vtype: VehicleType, xs: &[f64], ys: &[f64], speeds: &[f64]) -> Track {
    let n = xs.len();
    let dt = SAMPLE_PERIOD;
    let diff = |v: &[f64], i: usize| -> f64 {
        if i == 0 {
            (v[1] - v[0]) / dt
        } else if i == n - 1 {
            (v[n - 1] - v[n - 2]) / dt
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * dt)
        }
    };
    let headings: Vec<f64> = (0..n).map(|i| diff(ys, i).atan2(diff(xs, i))).collect();
    let samples = (0..n)
        .map(|i| TrajectorySample {
            time: i as f64 * dt,
            x: xs[i],
            y: ys[i],
            heading: headings[i],
            speed: speeds[i],
            accel: diff(speeds, i),
            yaw_rate: diff(&headings, i),
        })
        .collect();
    Track { id, vtype, samples }
}

fn integrate(x0: f64, speeds: &[f64]) -> Vec<f64> {
    let mut x = x0;
    speeds
        .iter()
        .map(|v| {
            let cur = x;
            x += v * SAMPLE_PERIOD;
            cur
        })
        .collect()
}

pub fn generate(cfg: &ScenarioConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = (DURATION_S / SAMPLE_PERIOD).round() as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| i as f64 * SAMPLE_PERIOD).collect();
    let mut tracks = Vec::with_capacity(cfg.events * 3);
    let mut lanes = Vec::with_capacity(cfg.events * 2);

    for s in 0..cfg.events {
        let y_left = s as f64 * SCENARIO_SPACING;
        let y_right = y_left - LANE_WIDTH;
        let left_id = 10 * s as i64 + 1;
        let right_id = left_id + 1;
        let line = |y: f64| Polyline::new(vec![[-200.0, y], [100.0, y], [700.0, y]]).expect("static polyline");
        lanes.push(Lane {
            id: left_id,
            centerline: line(y_left),
            left: None,
            right: Some(right_id),
            exits: vec![],
            interpolated: false,
        });
        lanes.push(Lane {
            id: right_id,
            centerline: line(y_right),
            left: Some(left_id),
            right: None,
            exits: vec![],
            interpolated: false,
        });

        let pair_draw: f64 = rng.random();
        let (a_type, p_type) = if pair_draw < 0.7 {
            (VehicleType::Hdv, VehicleType::Hdv)
        } else if pair_draw < 0.9 {
            (VehicleType::Hdv, VehicleType::Av)
        } else {
            (VehicleType::Av, VehicleType::Hdv)
        };
        let lead_type = if rng.random::<f64>() < 0.15 { VehicleType::Av } else { VehicleType::Hdv };

        let v0: f64 = rng.random_range(7.0..14.0);
        let lead_gap: f64 = rng.random_range(12.0..40.0);
        let lag_gap: f64 = rng.random_range(6.0..30.0);
        // Tighter gaps make the active vehicle more assertive and the lag
        // vehicle more likely to yield.
        let p_active_coop = 1.0 / (1.0 + (-(lead_gap - 24.0) / 6.0).exp());
        let p_passive_coop = 1.0 / (1.0 + ((lag_gap - 16.0) / 5.0).exp());
        let active_coop = rng.random::<f64>() < p_active_coop;
        let passive_coop = rng.random::<f64>() < p_passive_coop;

        let lc_dur: f64 = if active_coop {
            rng.random_range(4.4..6.0)
        } else {
            rng.random_range(2.4..3.6)
        };
        let lc_start = CROSSING_S - lc_dur / 2.0;
        let active_gain: f64 = if active_coop {
            rng.random_range(-0.6..0.4)
        } else {
            rng.random_range(0.8..2.2)
        };
        let jitter = rng.random_range(0.0..1.0) * 0.3;
        let a_speed: Vec<f64> = times
            .iter()
            .map(|&t| {
                let u = (t - lc_start) / lc_dur;
                (v0 + active_gain * smoothstep(u) + jitter * (0.7 * t).sin()).max(0.5)
            })
            .collect();
        let a_x = integrate(0.0, &a_speed);
        let a_y: Vec<f64> = times
            .iter()
            .map(|&t| y_left - LANE_WIDTH * smoothstep((t - lc_start) / lc_dur))
            .collect();
        let x_cross = a_x[(CROSSING_S / SAMPLE_PERIOD).round() as usize];

        let v_lead = v0 + rng.random_range(-1.0..2.0);
        let l_speed: Vec<f64> = times.iter().map(|&t| (v_lead + 0.2 * (0.5 * t).sin()).max(0.5)).collect();
        let l_x_raw = integrate(0.0, &l_speed);
        let l_off = x_cross + lead_gap - l_x_raw[(CROSSING_S / SAMPLE_PERIOD).round() as usize];
        let l_x: Vec<f64> = l_x_raw.iter().map(|x| x + l_off).collect();

        let v_lag = v0 + rng.random_range(-0.5..1.5);
        let response: f64 = if passive_coop {
            -rng.random_range(1.5..3.5)
        } else {
            rng.random_range(0.4..1.6)
        };
        let p_speed: Vec<f64> = times
            .iter()
            .map(|&t| (v_lag + response * smoothstep((t - lc_start + 0.5) / lc_dur)).max(0.5))
            .collect();
        let p_x_raw = integrate(0.0, &p_speed);
        let p_off = x_cross - lag_gap - p_x_raw[(CROSSING_S / SAMPLE_PERIOD).round() as usize];
        let p_x: Vec<f64> = p_x_raw.iter().map(|x| x + p_off).collect();
        let flat = vec![y_right; n];

        tracks.push(kinematic_track(format!("s{s}_a"), a_type, &a_x, &a_y, &a_speed));
        tracks.push(kinematic_track(format!("s{s}_l"), lead_type, &l_x, &flat, &l_speed));
        tracks.push(kinematic_track(format!("s{s}_p"), p_type, &p_x, &flat, &p_speed));
    }
    Scenario { tracks, lanes }
}
