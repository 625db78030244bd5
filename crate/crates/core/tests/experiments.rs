use lossgraph::experiments::{
    base_graph, build_true_model, kl_draws, mean_stderr, run_kl_study, run_sim_study, simulate_data, KlStudySpec,
    NamedPrior, ScaleVariant, SimStudySpec,
};
use lossgraph::{Error, PriorVariant, SearchConfig};

fn quick_search(iterations: usize) -> SearchConfig {
    SearchConfig {
        iterations,
        capacity: 200,
        ..SearchConfig::default()
    }
}

#[test]
fn true_model_has_the_base_graph_as_support() {
    let spec = SimStudySpec::new(5, 1, 0);
    let model = build_true_model(&spec).unwrap();
    let k = lossgraph::linalg::inverse_pd(&model.sigma).unwrap();
    let truth = spec.true_graph();
    assert_eq!(truth.num_edges(), 20);
    for i in 0..15 {
        for j in (i + 1)..15 {
            let want = if truth.has_edge(i, j) { -0.3 } else { 0.0 };
            assert!((k[(i, j)] - want).abs() < 1e-10, "({i},{j}) {}", k[(i, j)]);
        }
        let off: f64 = (0..15).filter(|&j| j != i).map(|j| k[(i, j)].abs()).sum();
        assert!(k[(i, i)] > off);
    }
    assert_eq!(base_graph().num_vertices(), 10);
}

#[test]
fn simulated_covariance_matches_the_model() {
    let mut spec = SimStudySpec::new(0, 1, 0);
    spec.n = 40_000;
    let model = build_true_model(&spec).unwrap();
    let data = simulate_data(&spec, 77).unwrap().center();
    let s = data.gram() / (spec.n as f64 - 1.0);
    // Entrywise sd of a sample covariance is at most sqrt(2/n) * max variance.
    let maxvar = model.sigma.diagonal().max();
    let tol = 5.0 * (2.0 / spec.n as f64).sqrt() * maxvar;
    assert!((s - &model.sigma).abs().max() < tol);
}

#[test]
fn sim_study_accounting_and_determinism() {
    let spec = SimStudySpec::new(5, 2, 4);
    let search = quick_search(1500);
    let a = run_sim_study(&spec, &search).unwrap();
    let b = run_sim_study(&spec, &search).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.replicates.len(), 2);
    for rep in &a.replicates {
        assert_eq!(rep.outcomes.len(), 4);
        for o in &rep.outcomes {
            assert_eq!(o.true_positives + o.false_negatives, 20);
            assert_eq!(o.true_positives + o.false_positives, o.median_size);
            assert_eq!(o.true_edge_inclusion.len(), 20);
            let declared = o.true_edge_inclusion.iter().filter(|(_, q)| *q >= 0.5).count();
            assert_eq!(declared, o.true_positives);
            assert!(o.true_edge_inclusion.iter().all(|(_, q)| (0.0..=1.0).contains(q)));
        }
    }
    assert_ne!(a.replicates[0].data_seed, a.replicates[1].data_seed);
    let csv = a.to_csv();
    assert_eq!(csv.lines().count(), 1 + 2 * (20 + 2));
    assert!(csv.starts_with("replicate,row,pi(1,1),pi(1,0),pi(1,1/2),uniform\n"));
}

#[test]
fn overwhelming_size_penalty_recovers_nothing() {
    let mut spec = SimStudySpec::new(5, 1, 2);
    spec.priors = vec![NamedPrior::new("h50", PriorVariant::LossBased { h: 50.0, c: 0.0 })];
    let r = run_sim_study(&spec, &quick_search(500)).unwrap();
    let o = &r.replicates[0].outcomes[0];
    assert_eq!((o.false_positives, o.false_negatives, o.median_size), (0, 20, 0));
}

#[test]
fn kl_study_is_reproducible_and_validates_input() {
    let spec = KlStudySpec {
        sizes: vec![3, 4],
        mc_samples: 50,
        scale: ScaleVariant::Identity,
        delta: 3.0,
        seed: 5,
    };
    let a = run_kl_study(&spec).unwrap();
    assert_eq!(a, run_kl_study(&spec).unwrap());
    assert_eq!(a.to_csv().lines().count(), 3);
    // Each size reads its own substreams, so adding a size leaves others alone.
    let wider = KlStudySpec {
        sizes: vec![4],
        ..spec.clone()
    };
    assert_eq!(run_kl_study(&wider).unwrap().points[0], a.points[1]);
    assert!(a.points.iter().all(|p| p.mean > 0.0 && p.stderr > 0.0));

    let bad = KlStudySpec {
        mc_samples: 1,
        ..spec.clone()
    };
    assert!(matches!(run_kl_study(&bad), Err(Error::Domain(_))));
    let bad = KlStudySpec { sizes: vec![1], ..spec };
    assert!(matches!(run_kl_study(&bad), Err(Error::Domain(_))));
}

#[test]
fn kl_trends_by_scale() {
    let mean = |scale, size| {
        let spec = KlStudySpec::desk(scale, 21);
        mean_stderr(&kl_draws(&spec, size).unwrap())
    };
    for scale in [ScaleVariant::Identity, ScaleVariant::D] {
        let (m3, s3) = mean(scale, 3);
        let (m10, s10) = mean(scale, 10);
        assert!(m3 - m10 > 3.0 * (s3 * s3 + s10 * s10).sqrt(), "{scale:?}");
    }
    let (m3, s3) = mean(ScaleVariant::DInverse, 3);
    let (m10, s10) = mean(ScaleVariant::DInverse, 10);
    assert!(m10 - m3 > 3.0 * (s3 * s3 + s10 * s10).sqrt());
}
