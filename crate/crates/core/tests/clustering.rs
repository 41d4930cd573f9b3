use lanegame::cluster::{
    cluster_events, kmeans_fit, label_clusters, manova_two_group, outcome_counts, ClusterModel,
};
use lanegame::extract::extract_events;
use lanegame::extract::scenario::{generate, ScenarioConfig};
use lanegame::extract::LaneMap;
use lanegame::io::EventRow;
use lanegame::{Behavior, Outcome, Pair, Role};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario_rows(events: usize, seed: u64) -> Vec<EventRow> {
    let sc = generate(&ScenarioConfig { events, seed });
    let map = LaneMap::new(sc.lanes).unwrap();
    let ex = extract_events(&sc.tracks, &map).unwrap();
    ex.events.into_iter().map(EventRow::unlabeled).collect()
}

#[test]
fn labels_and_counts_on_synthetic_events() {
    let mut rows = scenario_rows(150, 3);
    let report = cluster_events(&mut rows, 17, 10).unwrap();

    // Counting oracle over the labeled rows.
    let mut oracle = [[0u64; 4]; 4];
    for r in &rows {
        let a = r.active_label.unwrap();
        let p = r.passive_label.unwrap();
        let o = r.outcome.unwrap();
        assert_eq!(o.active_cooperates(), a == Behavior::Cooperative);
        assert_eq!(o.passive_cooperates(), p == Behavior::Cooperative);
        let pi = Pair::ALL
            .iter()
            .position(|x| x.active == r.event.active_type && x.passive == r.event.passive_type)
            .unwrap();
        let oi = ["CC", "CD", "DC", "DD"].iter().position(|s| *s == o.as_str()).unwrap();
        oracle[pi][oi] += 1;
    }
    assert_eq!(outcome_counts(&rows), oracle);
    assert_eq!(oracle[3], [0; 4]);
    let total: u64 = oracle.iter().flatten().sum();
    assert_eq!(total as usize, rows.len());
    for pair in Pair::ALL {
        let per = &report.outcome_counts[&pair.label()];
        for o in [Outcome::CC, Outcome::CD, Outcome::DC, Outcome::DD] {
            assert_eq!(per[o.as_str()], oracle[pair.index()][o.index()]);
        }
    }

    for role in [&report.active, &report.passive] {
        let m = role.manova;
        assert!(m.wilks_lambda > 0.0 && m.wilks_lambda <= 1.0);
        assert!((0.0..=1.0).contains(&m.p_value));
        assert_eq!(role.clusters.iter().map(|c| c.size).sum::<usize>(), rows.len());
        let labels: Vec<Behavior> = role.clusters.iter().map(|c| c.label).collect();
        assert!(labels.contains(&Behavior::Cooperative) && labels.contains(&Behavior::Defective));
    }
    let coop = report.active.clusters.iter().find(|c| c.label == Behavior::Cooperative).unwrap();
    let def = report.active.clusters.iter().find(|c| c.label == Behavior::Defective).unwrap();
    assert!(coop.feature_means["lc_time"] > def.feature_means["lc_time"]);
}

#[test]
fn clustering_is_deterministic() {
    let mut a = scenario_rows(60, 9);
    let mut b = a.clone();
    let ra = cluster_events(&mut a, 5, 10).unwrap();
    let rb = cluster_events(&mut b, 5, 10).unwrap();
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    assert_eq!(a, b);
}

fn blob_points(seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..80)
        .map(|i| {
            let off = if i % 2 == 0 { -2.0 } else { 2.0 };
            vec![off + rng.random::<f64>(), rng.random::<f64>() - 0.5, off * 0.5 + rng.random::<f64>()]
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn labels_survive_uniform_rescaling(seed in 0u64..1000, scale in 0.1f64..50.0) {
        let pts = blob_points(seed);
        let raw: Vec<Vec<f64>> = pts.iter().map(|p| {
            let mut r = vec![0.0; 10];
            r[0] = 4.0 + p[0];
            r[9] = 1.0 + p[2];
            r
        }).collect();
        let scaled: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
        let a = label_clusters(ClusterModel::from_fit(Role::Active, kmeans_fit(&pts, 2, seed, 10).unwrap()), &raw).unwrap();
        let b = label_clusters(ClusterModel::from_fit(Role::Active, kmeans_fit(&scaled, 2, seed, 10).unwrap()), &raw).unwrap();
        prop_assert_eq!(a.event_labels().unwrap(), b.event_labels().unwrap());
    }

    #[test]
    fn wilks_lambda_in_unit_interval(seed in 0u64..1000) {
        let pts = blob_points(seed);
        let groups: Vec<usize> = (0..pts.len()).map(|i| i % 2).collect();
        let r = manova_two_group(&pts, &groups).unwrap();
        prop_assert!(r.wilks_lambda > 0.0 && r.wilks_lambda <= 1.0);
        prop_assert!(r.f_value >= 0.0);
    }
}
