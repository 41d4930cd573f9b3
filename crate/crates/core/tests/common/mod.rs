#![allow(dead_code)]

use lanegame::extract::{Lane, LaneMap, Polyline, Track, TrajectorySample};
use lanegame::games::GameClass;
use lanegame::qre::{ModelKind, StateDistribution, UtilityModel};
use lanegame::{Role, VehicleType};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Intercepts of the three fitted types at one state, (CC, CD, DC) order.
pub const S1_ACTIVE: [[f64; 3]; 3] = [
    [-0.239, 0.203, 0.153],
    [0.719, 0.116, 0.196],
    [-0.030, -0.140, -0.433],
];
pub const S1_PASSIVE: [[f64; 3]; 3] = [
    [-1.040, -1.821, 1.867],
    [-1.446, -1.314, 1.319],
    [-1.963, -1.939, 2.077],
];

/// Intercept-only model whose payoff tables are the same at every state.
pub fn golden_model() -> UtilityModel {
    let mut m = UtilityModel::zeros(ModelKind::Full, StateDistribution::default().standardizer(), 0.1);
    for t in 0..3 {
        for o in 0..3 {
            m.beta_block_mut(Role::Active, t, o)[0] = S1_ACTIVE[t][o];
            m.beta_block_mut(Role::Passive, t, o)[0] = S1_PASSIVE[t][o];
        }
    }
    m
}

/// Writes the ordering a > b > c > d of named values, `eps` apart, by sorting.
pub fn strict_order(values: [(char, f64); 4], eps: f64) -> Option<String> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1));
    if v.windows(2).all(|w| w[0].1 - w[1].1 > eps) {
        Some(v.iter().map(|(c, _)| *c).collect())
    } else {
        None
    }
}

/// Classifies by checking the dilemma conditions and sorting the payoffs.
pub fn oracle_class(r: f64, t: f64, s: f64, eps: f64) -> GameClass {
    let p = 0.0;
    let conditions = [r - p, r - s, 2.0 * r - t - s];
    let dilemma = conditions.iter().all(|d| *d > eps) && (t - r > eps || p - s > eps);
    if !dilemma {
        return GameClass::NonSocialDilemma;
    }
    match strict_order([('T', t), ('R', r), ('S', s), ('P', p)], eps).as_deref() {
        Some("TRPS") => GameClass::PrisonersDilemma,
        Some("RTPS") => GameClass::StagHunt,
        Some("TRSP") => GameClass::ChickenGame,
        _ => GameClass::OtherSocialDilemma,
    }
}

/// Mixes continuous draws with grid values and near-ties. No two offsets
/// differ by exactly the margin.
pub fn draw_payoff(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-3.0..3.0),
        1 => f64::from(rng.random_range(-4i32..=4)) * 0.5,
        2 => f64::from(rng.random_range(-4i32..=4)) * 0.5 + [-3e-9, -4e-10, 4e-10, 3e-9][rng.random_range(0..4)],
        _ => 0.0,
    }
}

pub const W: f64 = 3.6;

pub fn straight_lane(id: i64, y: f64, left: Option<i64>, right: Option<i64>) -> Lane {
    Lane {
        id,
        centerline: Polyline::new(vec![[-500.0, y], [0.0, y], [800.0, y]]).unwrap(),
        left,
        right,
        exits: vec![],
        interpolated: false,
    }
}

/// Lane 1 at y = 0 with right neighbor lane 2 at y = -3.6.
pub fn two_lane_map() -> LaneMap {
    LaneMap::new(vec![
        straight_lane(1, 0.0, None, Some(2)),
        straight_lane(2, -W, Some(1), None),
    ])
    .unwrap()
}

pub fn track_from(
    id: &str,
    vtype: VehicleType,
    n: usize,
    x: impl Fn(f64) -> f64,
    y: impl Fn(f64) -> f64,
    speed: impl Fn(f64) -> f64,
    heading: impl Fn(f64) -> f64,
    accel: impl Fn(f64) -> f64,
) -> Track {
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * 0.1;
            TrajectorySample {
                time: t,
                x: x(t),
                y: y(t),
                heading: heading(t),
                speed: speed(t),
                accel: accel(t),
                yaw_rate: 0.0,
            }
        })
        .collect();
    Track {
        id: id.into(),
        vtype,
        samples,
    }
}

pub fn smooth(u: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * u.clamp(0.0, 1.0)).cos())
}

/// Active vehicle moving right from lane 1 into lane 2 with its lateral
/// midpoint at `mid` seconds, plus a lead and a lag vehicle in lane 2.
pub fn lane_change_fixture(mid: f64, speed: f64, heading: impl Fn(f64) -> f64 + Copy) -> Vec<Track> {
    let n = 151;
    let active = track_from(
        "act",
        VehicleType::Hdv,
        n,
        move |t| speed * t,
        move |t| -W * smooth((t - mid + 2.0) / 4.0),
        move |_| speed,
        heading,
        |_| 0.0,
    );
    let lead = track_from(
        "lead",
        VehicleType::Hdv,
        n,
        move |t| 25.0 + speed * t,
        |_| -W,
        move |_| speed,
        |_| 0.0,
        |_| 0.0,
    );
    let lag = track_from(
        "lag",
        VehicleType::Av,
        n,
        move |t| -15.0 + speed * t,
        |_| -W,
        move |_| speed,
        |_| 0.0,
        |_| 0.0,
    );
    vec![active, lead, lag]
}

