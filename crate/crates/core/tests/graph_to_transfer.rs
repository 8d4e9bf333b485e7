//! End-to-end pipeline: build a state graph from a walk, train the
//! autoencoder on it, take its spectral summary, match it against a
//! slot-relabeled copy, and transfer node value labels as intrinsic
//! reward.

use denserew::autoencoder::{reconstruction_loss, train_phase, EncoderParams, TrainConfig};
use denserew::spectral::{
    label_value, laplacian, match_nodes, spectra_distance, spectra_match, spectral_summary,
    transfer_intrinsic, MatchResult,
};
use denserew::state_graph::{EvictionPolicy, StateGraph};

/// Six well-separated features on a ring.
fn ring_features() -> Vec<[f64; 2]> {
    (0..6)
        .map(|i| {
            let angle = i as f64 * std::f64::consts::TAU / 6.0;
            [0.5 + 0.4 * angle.cos(), 0.5 + 0.4 * angle.sin()]
        })
        .collect()
}

/// Walks the ring, lapping it a few times with one chord revisited, so
/// edge weights are uneven and the spectrum has no repeated eigenvalues.
fn walked_graph() -> StateGraph {
    let features = ring_features();
    let mut graph = StateGraph::new(6, 0.05, EvictionPolicy::Oldest, 1, None).unwrap();
    let mut prev = None;
    for lap in 0..3 {
        for (i, f) in features.iter().enumerate() {
            graph.advance_step();
            let outcome = graph.observe_transition(prev, f).unwrap();
            prev = outcome.node_id();
            if lap == 2 && i == 3 {
                // Extra chord traffic between nodes 3 and 0.
                graph.advance_step();
                prev = graph.observe_transition(prev, &features[0]).unwrap().node_id();
                graph.advance_step();
                prev = graph.observe_transition(prev, &features[3]).unwrap().node_id();
            }
        }
    }
    graph
}

#[test]
fn walk_training_matching_and_transfer_compose() {
    let mut graph1 = walked_graph();
    assert_eq!(graph1.node_count(), 6);

    // The encoder improves on its random initialization.
    let params = EncoderParams::new(&[2, 8, 2], 17).unwrap();
    let pairs: Vec<(usize, usize)> =
        (0..6).flat_map(|u| (u + 1..6).map(move |v| (u, v))).collect();
    let before = reconstruction_loss(&params, &graph1, &pairs).unwrap();
    let config =
        TrainConfig { learning_rate: 0.02, steps_per_phase: 300, ..TrainConfig::default() };
    let trained = train_phase(&params, &graph1, &config).unwrap();
    let after = reconstruction_loss(&trained, &graph1, &pairs).unwrap();
    assert!(after < before * 0.5, "loss {before} only reached {after}");

    // Label every node with a made-up state value, then relabel slots.
    for id in 0..6 {
        label_value(&mut graph1, id, id as f64 * 0.5).unwrap();
    }
    let perm = [3, 5, 0, 2, 4, 1];
    let graph2 = graph1.relabeled(&perm).unwrap();

    let s1 = spectral_summary(&laplacian(&graph1).unwrap(), 1e-6).unwrap();
    let s2 = spectral_summary(&laplacian(&graph2).unwrap(), 1e-6).unwrap();
    assert!(s1.distinct_flag(), "walk produced a repeated eigenvalue");
    assert!(spectra_match(&s1, &s2, 1e-9).unwrap());
    assert!(spectra_distance(&s1, &s2) < 1e-18);

    let pairing = match match_nodes(&s1, &s2, 1e-6, 1e-9) {
        MatchResult::Matched { pairing } => pairing,
        other => panic!("expected a match, got {other:?}"),
    };
    // Fully occupied graphs: summary row == slot id, so the pairing must
    // invert the applied relabeling.
    for (old, &new) in perm.iter().enumerate() {
        assert_eq!(pairing[new], old);
    }

    // Visiting graph 2 near relabeled node `new` pays beta times the
    // label stored on original node `old`.
    let labels = |row1: usize| graph1.label(row1);
    for (old, &new) in perm.iter().enumerate() {
        let phi = graph2.feature(new).unwrap().to_vec();
        let r = transfer_intrinsic(&graph2, &pairing, labels, &phi, 0.2).unwrap();
        assert!((r - 0.2 * (old as f64 * 0.5)).abs() < 1e-12);
    }

    // An unlabeled source node contributes nothing.
    let silent = |_: usize| None;
    let phi = graph2.feature(0).unwrap().to_vec();
    assert_eq!(transfer_intrinsic(&graph2, &pairing, silent, &phi, 0.2).unwrap(), 0.0);
}

#[test]
fn snapshots_preserve_the_spectrum() {
    let graph = walked_graph();
    let restored = StateGraph::from_snapshot(&graph.to_snapshot()).unwrap();
    let s1 = spectral_summary(&laplacian(&graph).unwrap(), 1e-6).unwrap();
    let s2 = spectral_summary(&laplacian(&restored).unwrap(), 1e-6).unwrap();
    assert_eq!(spectra_distance(&s1, &s2), 0.0);
}
