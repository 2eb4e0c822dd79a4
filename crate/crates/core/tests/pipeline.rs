use std::collections::BTreeMap;

use mmwave_iab::channel::RadioMap;
use mmwave_iab::graphs::build_link_graph;
use mmwave_iab::model::LinkId;
use mmwave_iab::plan::{check_plan, group_links, SwitchMode};
use mmwave_iab::routing::select_path;
use mmwave_iab::scheduling::validate_schedule;
use mmwave_iab::simulate::{
    figure_one, generate_manhattan, run_snapshots, FrameEngine, ManhattanConfig, ScenarioSpec,
    Scheme, SimConfig, METRIC_AVG_RATE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn figure_one_plan_is_feasible() {
    let s = figure_one();
    let radio = RadioMap::new(&s).unwrap();
    let links: Vec<LinkId> = radio.links().iter().map(|l| l.id).collect();
    let grouped = group_links(&radio, &links).unwrap();
    assert!(validate_schedule(&grouped.cg, &grouped.groups));
    let required: BTreeMap<LinkId, u32> = links.iter().map(|&l| (l, 2)).collect();
    for mode in [SwitchMode::Flexible, SwitchMode::Fixed] {
        let plan = grouped.plan(&radio, &required, mode).unwrap();
        assert!(check_plan(&grouped.cg, &plan, &radio).is_empty());
    }
}

#[test]
fn manhattan_snapshot_plans_are_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = ManhattanConfig {
        ue_count: 30,
        ..Default::default()
    };
    let s = generate_manhattan(&cfg, &Default::default(), &mut rng).unwrap();
    let radio = RadioMap::new(&s).unwrap();
    let links = FrameEngine::new(&s, &s.routes, SwitchMode::Flexible)
        .unwrap()
        .links()
        .to_vec();
    assert!(!links.is_empty());
    let grouped = group_links(&radio, &links).unwrap();
    let required: BTreeMap<LinkId, u32> = links.iter().map(|&l| (l, 1 + l.0 as u32 % 4)).collect();
    let plan = grouped
        .plan(&radio, &required, SwitchMode::Flexible)
        .unwrap();
    assert!(check_plan(&grouped.cg, &plan, &radio).is_empty());
}

#[test]
fn every_manhattan_ue_reaches_the_bs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = generate_manhattan(
        &ManhattanConfig {
            ue_count: 20,
            ..Default::default()
        },
        &Default::default(),
        &mut rng,
    )
    .unwrap();
    let lg = build_link_graph(&s).unwrap();
    let bs = s
        .nodes
        .iter()
        .find(|n| n.role == mmwave_iab::model::Role::Bs)
        .unwrap()
        .id;
    for ue in s
        .nodes
        .iter()
        .filter(|n| n.role == mmwave_iab::model::Role::Ue)
    {
        let path = select_path(&lg, bs, ue.id).expect("reachable");
        assert_eq!(path.nodes.first(), Some(&bs));
        assert_eq!(path.nodes.last(), Some(&ue.id));
        assert!(path.weight > 0.0);
    }
}

#[test]
fn snapshot_runs_are_reproducible() {
    let cfg = SimConfig {
        scenario: ScenarioSpec::Manhattan(ManhattanConfig {
            ue_count: 10,
            ..Default::default()
        }),
        schemes: vec![Scheme::Jsra, Scheme::Tdma],
        snapshots: 4,
        seed: 11,
        ..Default::default()
    };
    let a = run_snapshots(&cfg).unwrap();
    let b = run_snapshots(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    assert!(a.iter().all(|r| r.metric(METRIC_AVG_RATE) >= 0.0));
}
