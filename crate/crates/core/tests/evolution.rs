mod common;

use std::collections::HashMap;

use common::golden_model;
use lanegame::evolution::{
    fermi, init_grid, neighbor_lists, pair_payoff, play_round, rep_rng, run_rep, run_sweep, shuffle_grid, step,
    update, write_timeseries, Agent, GridWorld, InitCoop, SimConfig, SweepGrid,
};
use lanegame::games::{all_tables, StateGames};
use lanegame::VehicleType;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C_HDV: Agent = Agent { cooperates: true, vtype: VehicleType::Hdv };
const D_HDV: Agent = Agent { cooperates: false, vtype: VehicleType::Hdv };

fn golden_game() -> StateGames {
    StateGames::from_tables(&all_tables("S1", &[0.0; 11], &golden_model()))
}

fn harmony() -> StateGames {
    StateGames::uniform("harmony", 2.0, -1.0, 1.0)
}

fn defection() -> StateGames {
    // D strictly dominant: T > R and P > S, with R < P.
    StateGames::uniform("defection", -1.0, 1.0, -2.0)
}

fn multiset(g: &GridWorld) -> HashMap<Agent, usize> {
    let mut m = HashMap::new();
    for a in &g.agents {
        *m.entry(*a).or_default() += 1;
    }
    m
}

#[test]
fn initial_grid_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut c = SimConfig { mpr: 0.0, ..SimConfig::default() };
    assert!(init_grid(&c, &mut rng).agents.iter().all(|a| a.vtype == VehicleType::Hdv));
    c.mpr = 0.5;
    let g = init_grid(&c, &mut rng);
    assert_eq!(g.count(Some(VehicleType::Av)).1, 200);
    c.init_coop = InitCoop { av: 1.0, hdv: 0.0 };
    let g = init_grid(&c, &mut rng);
    assert!(g.agents.iter().all(|a| a.cooperates == (a.vtype == VehicleType::Av)));
    let a = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(9));
    let b = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(9));
    assert_eq!(a, b);
}

#[test]
fn initial_cooperation_matches_configured_shares() {
    let c = SimConfig { width: 200, height: 200, ..SimConfig::default() };
    let g = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(2));
    let (av, hdv) = (g.cooperation(Some(VehicleType::Av)).unwrap(), g.cooperation(Some(VehicleType::Hdv)).unwrap());
    // 20,000 draws per type: 4 sigma is about 0.014.
    assert!((av - 0.51).abs() < 0.015 && (hdv - 0.42).abs() < 0.015, "{av} {hdv}");
}

#[test]
fn two_agent_ledger() {
    // On a 2x1 torus each agent has exactly one neighbor.
    let grid = GridWorld { width: 2, height: 1, agents: vec![C_HDV, D_HDV] };
    let nbrs = neighbor_lists(2, 1, 1);
    assert_eq!(nbrs, vec![vec![1], vec![0]]);
    let game = golden_game();
    // X active C vs Y passive D: X gets -0.140, Y gets -1.939.
    // Y active D vs X passive C: Y gets -0.433, X gets 2.077.
    let e = play_round(&grid, &nbrs, &game);
    assert_eq!(e[0], (-0.140 + 2.077) / 2.0);
    assert_eq!(e[1], (-1.939 + -0.433) / 2.0);
}

#[test]
fn mixed_pair_uses_the_right_tables() {
    let game = golden_game();
    let av = Agent { cooperates: true, vtype: VehicleType::Av };
    // AV active C vs HDV passive C: AV-HDV active CC. HDV active C vs AV passive C: HDV-AV passive CC.
    assert_eq!(pair_payoff(&game, av, C_HDV), -0.239 + -1.040);
    assert_eq!(pair_payoff(&game, C_HDV, av), 0.719 + -1.446);
    let av2 = Agent { cooperates: false, vtype: VehicleType::Av };
    // AV-AV: active CD, passive DC from the imputed table.
    assert_eq!(pair_payoff(&game, av, av2), 0.203 + 1.867);
}

#[test]
fn uniform_strategies_give_equal_payoffs() {
    let c = SimConfig { init_coop: InitCoop { av: 1.0, hdv: 1.0 }, mpr: 0.0, ..SimConfig::default() };
    let g = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(3));
    let e = play_round(&g, &neighbor_lists(20, 20, 2), &golden_game());
    assert!(e.iter().all(|v| *v == e[0]));
}

#[test]
fn payoff_ledger_identity() {
    let c = SimConfig { neighbor_size: 3, ..SimConfig::default() };
    let g = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(4));
    let nbrs = neighbor_lists(20, 20, 3);
    let game = golden_game();
    let e = play_round(&g, &nbrs, &game);
    let lhs: f64 = e.iter().zip(&nbrs).map(|(ex, ns)| ex * (2 * ns.len()) as f64).sum();
    let mut rhs = 0.0;
    for (i, ns) in nbrs.iter().enumerate() {
        for &j in ns.iter().filter(|&&j| j > i) {
            rhs += pair_payoff(&game, g.agents[i], g.agents[j]) + pair_payoff(&game, g.agents[j], g.agents[i]);
        }
    }
    assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{lhs} {rhs}");
}

#[test]
fn payoffs_do_not_depend_on_neighbor_order() {
    let c = SimConfig::default();
    let g = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(5));
    let nbrs = neighbor_lists(20, 20, 2);
    let mut reversed = nbrs.clone();
    reversed.iter_mut().for_each(|n| n.reverse());
    let a = play_round(&g, &nbrs, &golden_game());
    let b = play_round(&g, &reversed, &golden_game());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn lone_av_never_updates() {
    let mut agents = vec![C_HDV; 9];
    agents[4] = Agent { cooperates: false, vtype: VehicleType::Av };
    let mut g = GridWorld { width: 3, height: 3, agents };
    let nbrs = neighbor_lists(3, 3, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        step(&mut g, &nbrs, &[harmony()], 1.0, &mut rng);
        assert!(!g.agents[4].cooperates);
    }
}

#[test]
fn all_cooperators_are_absorbing() {
    let c = SimConfig { init_coop: InitCoop { av: 1.0, hdv: 1.0 }, ..SimConfig::default() };
    let (rng, stream) = rep_rng(7, 0, 0);
    let s = run_rep(&c, &[defection(), golden_game()], rng, 0, stream).unwrap();
    assert_eq!(s.coop_all.len(), 201);
    assert!(s.coop_all.iter().all(|v| *v == 1.0));
}

#[test]
fn type_counts_are_conserved() {
    let c = SimConfig { contact_freq: 0.04, ..SimConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut g = init_grid(&c, &mut rng);
    let nbrs = neighbor_lists(20, 20, 2);
    let n_av = g.count(Some(VehicleType::Av)).1;
    let pool = [golden_game(), harmony(), defection()];
    for t in 1..=200 {
        if c.shuffles_at(t) {
            shuffle_grid(&mut g, &mut rng);
        }
        step(&mut g, &nbrs, &pool, c.noise_k, &mut rng);
        assert_eq!(g.count(Some(VehicleType::Av)).1, n_av);
        assert_eq!(g.agents.len(), 400);
    }
}

#[test]
fn shuffle_preserves_agents_and_is_seeded() {
    let c = SimConfig::default();
    let g = init_grid(&c, &mut ChaCha8Rng::seed_from_u64(9));
    let (mut a, mut b) = (g.clone(), g.clone());
    shuffle_grid(&mut a, &mut ChaCha8Rng::seed_from_u64(10));
    shuffle_grid(&mut b, &mut ChaCha8Rng::seed_from_u64(10));
    assert_eq!(a, b);
    assert_ne!(a, g);
    assert_eq!(multiset(&a), multiset(&g));
}

#[test]
fn shuffles_every_25_steps_at_contact_004() {
    let c = SimConfig { contact_freq: 0.04, ..SimConfig::default() };
    let at: Vec<usize> = (1..=200).filter(|t| c.shuffles_at(*t)).collect();
    assert_eq!(at, (1..=8).map(|k| 25 * k).collect::<Vec<_>>());
    assert!(!(1..=200).any(|t| SimConfig::default().shuffles_at(t)));
}

#[test]
fn synchronous_update_reads_the_snapshot() {
    // A line of C, D on a 2x1 torus with certain adoption both ways swaps strategies.
    let mut g = GridWorld { width: 2, height: 1, agents: vec![C_HDV, D_HDV] };
    let nbrs = neighbor_lists(2, 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Huge payoff gaps in both directions are impossible, so use equal payoffs
    // and count swaps over many rounds: with W = 0.5 each side flips half the time.
    let mut swaps = 0;
    for _ in 0..2000 {
        g.agents = vec![C_HDV, D_HDV];
        update(&mut g, &nbrs, &[0.0, 0.0], 1.0, &mut rng);
        if g.agents == vec![D_HDV, C_HDV] {
            swaps += 1;
        }
    }
    // P(swap) = 0.25; sd over 2000 rounds is about 19.
    assert!((swaps as f64 - 500.0).abs() < 100.0, "{swaps}");
}

fn final_shares(pool: &[StateGames], k: f64) -> Vec<f64> {
    let c = SimConfig { noise_k: k, ..SimConfig::default() };
    let records = run_sweep(&[c], pool, 12).unwrap();
    records[0].final_all.clone()
}

#[test]
fn harmony_pool_converges_to_cooperation() {
    let finals = final_shares(&[harmony()], 1.0);
    assert!(finals.iter().filter(|v| **v == 1.0).count() >= 19, "{finals:?}");
}

#[test]
fn dominant_defection_pool_converges_to_defection() {
    let finals = final_shares(&[defection()], 1.0);
    assert!(finals.iter().filter(|v| **v == 0.0).count() >= 19, "{finals:?}");
}

#[test]
fn zero_steps_records_only_the_initial_grid() {
    let c = SimConfig { steps: 0, reps: 1, ..SimConfig::default() };
    let r = run_sweep(std::slice::from_ref(&c), &[golden_game()], 13).unwrap();
    assert_eq!(r[0].reps.len(), 1);
    assert_eq!(r[0].reps[0].coop_all.len(), 1);
    let (mut rng, _) = rep_rng(13, 0, 0);
    let g = init_grid(&c, &mut rng);
    assert_eq!(r[0].reps[0].coop_all[0], g.cooperation(None).unwrap());
}

#[test]
fn sweeps_are_reproducible() {
    let grid = SweepGrid { neighbor_sizes: vec![1, 2], noise_ks: vec![1.0], mprs: vec![0.2, 0.8], contact_freqs: vec![0.0, 0.04], steps: 30, reps: 3, ..SweepGrid::default() };
    let pool = [golden_game(), harmony(), defection()];
    let a = run_sweep(&grid.configs(), &pool, 14).unwrap();
    let b = run_sweep(&grid.configs(), &pool, 14).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(write_timeseries(&a).unwrap(), write_timeseries(&b).unwrap());
    let c = run_sweep(&grid.configs(), &pool, 15).unwrap();
    assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    for rec in &a {
        assert_eq!(rec.reps.len(), 3);
        for rep in &rec.reps {
            assert_eq!(rep.coop_all.len(), 31);
            assert!(rep.coop_all.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let band = &rec.band_all;
        assert!(band.lower.iter().zip(&band.mean).zip(&band.upper).all(|((l, m), u)| l <= m && m <= u));
    }
    let csv = write_timeseries(&a).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8 * 3 * 31);
    assert!(csv.starts_with("config_id,rep,step,coop_all,coop_av,coop_hdv\n"));
}

#[test]
fn missing_type_gives_empty_series() {
    let c = SimConfig { mpr: 0.0, steps: 5, reps: 2, ..SimConfig::default() };
    let r = run_sweep(&[c], &[golden_game()], 16).unwrap();
    assert!(r[0].reps[0].coop_av.iter().all(Option::is_none));
    assert!(r[0].band_av.is_none());
    assert!(r[0].band_hdv.is_some());
}

#[test]
fn empty_pool_is_rejected() {
    assert!(run_sweep(&[SimConfig::default()], &[], 1).is_err());
}

proptest! {
    #[test]
    fn fermi_is_a_logistic(ex in -10.0..10.0f64, ey in -10.0..10.0f64, k in 0.01..100.0f64) {
        let w = fermi(ex, ey, k).unwrap();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w + fermi(ey, ex, k).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_noise_approaches_a_coin_flip(ex in -5.0..5.0f64, d in -10.0..10.0f64) {
        prop_assert!((fermi(ex, ex + d, 1000.0).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn steps_conserve_types(seed in 0u64..1000, radius in 1usize..4) {
        let c = SimConfig { neighbor_size: radius, width: 7, height: 5, ..SimConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = init_grid(&c, &mut rng);
        let before: Vec<VehicleType> = g.agents.iter().map(|a| a.vtype).collect();
        let nbrs = neighbor_lists(7, 5, radius);
        for _ in 0..10 {
            step(&mut g, &nbrs, &[golden_game()], rng.random_range(0.5..3.0), &mut rng);
        }
        let after: Vec<VehicleType> = g.agents.iter().map(|a| a.vtype).collect();
        prop_assert_eq!(before, after);
    }
}
