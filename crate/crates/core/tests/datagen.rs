use gad_core::aggregation::{aggregate_once, AggKind};
use gad_core::datagen::{generate, hidden_direction, GenSpec, Mechanism};
use gad_core::metrics::auroc;

fn spec(mechanism: Mechanism, seed: u64) -> GenSpec {
    GenSpec {
        num_nodes: 2000,
        avg_degree: 10.0,
        dim: 8,
        anomaly_ratio: 0.05,
        mechanism,
        noise: 0.0,
        seed,
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn neighborhood_labels_hide_from_own_features() {
    for seed in [0, 7, 42] {
        let s = spec(Mechanism::Neighborhood, seed);
        let ds = generate(&s).unwrap();
        let y = ds.labels.targets(&ds.labels.labeled_nodes()).unwrap();
        let yf: Vec<f64> = y.iter().map(|&b| b as u8 as f64).collect();
        for c in 0..s.dim {
            let r = pearson(&ds.features.column(c), &yf);
            assert!(r.abs() <= 0.1, "seed {seed} column {c}: r = {r}");
        }

        // Rank nodes by the 1-hop mean projected on the hidden direction.
        let h = aggregate_once(&ds.graph, &ds.features, AggKind::Mean).unwrap();
        let dir = hidden_direction(&s);
        let score: Vec<f64> = (0..h.num_rows())
            .map(|i| h.row(i).iter().zip(&dir).map(|(a, b)| a * b).sum())
            .collect();
        assert!(auroc(&score, &y).unwrap() >= 0.95);
    }
}

#[test]
fn feature_only_anomalies_are_shifted() {
    let ds = generate(&spec(Mechanism::FeatureOnly, 3)).unwrap();
    let y = ds.labels.targets(&ds.labels.labeled_nodes()).unwrap();
    let row_mean: Vec<f64> = (0..ds.num_nodes())
        .map(|i| ds.features.row(i).iter().sum::<f64>() / 8.0)
        .collect();
    assert!(auroc(&row_mean, &y).unwrap() > 0.999);
}

#[test]
fn generated_graph_passes_validation() {
    let ds = generate(&spec(Mechanism::Neighborhood, 11)).unwrap();
    let parts = ds
        .graph
        .relations()
        .iter()
        .map(|r| (r.offsets().to_vec(), r.cols().to_vec()))
        .collect();
    let rebuilt = gad_core::graph::Graph::from_csr(ds.num_nodes(), parts, false).unwrap();
    assert_eq!(rebuilt, ds.graph);
    assert!(!ds.graph.is_directed());
    assert_eq!(ds.labels.num_pos(), 100);
}
