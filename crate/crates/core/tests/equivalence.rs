//! Fast paths checked against slow, independent reference computations.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ust_core::features::pca_fit;
use ust_core::knn::{KnnConfig, KnnStore};
use ust_core::oracle::{ArchiveNnOracle, Oracle, OracleQuery, ScriptedOracle};
use ust_core::simulator::builtin_scenario;
use ust_core::tracker::{Tracker, TrackerConfig, Variant};
use ust_core::{FeatureVector, Label, LabeledSet, TargetState};

fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

/// Largest principal angle between the column spaces of two orthonormal
/// bases.
fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let m = a.transpose() * b;
    let sv = m.svd(false, false).singular_values;
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    smallest.acos()
}

fn reference_basis(data: &[Vec<f64>], d: usize) -> DMatrix<f64> {
    let n = data.len();
    let dim = data[0].len();
    let x = DMatrix::from_fn(n, dim, |i, j| data[i][j]);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, dim, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    DMatrix::from_fn(dim, d, |i, j| eig.eigenvectors[(i, order[j])])
}

fn check_pca(n: usize, dim: usize, d: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Anisotropic data keeps the eigenvalues well separated.
    let data: Vec<Vec<f64>> = random_points(&mut rng, n, dim)
        .into_iter()
        .map(|p| p.iter().enumerate().map(|(j, v)| v * (1.0 + 0.7 * j as f64)).collect())
        .collect();
    let proj = pca_fit(&data, d).unwrap();
    let ours = DMatrix::from_fn(dim, d, |i, j| proj.basis(i, j));
    let theirs = reference_basis(&data, d);
    let angle = subspace_angle(&ours, &theirs);
    assert!(angle < 1e-6, "subspace angle {angle} for {n}x{dim} -> {d}");
    // orthonormal columns
    let gram = ours.transpose() * &ours;
    assert!((gram - DMatrix::identity(d, d)).abs().max() < 1e-10);
}

#[test]
fn pca_basis_matches_dense_eigendecomposition() {
    check_pca(10, 5, 2, 1);
    check_pca(10, 5, 5, 2);
    check_pca(200, 20, 8, 3);
    check_pca(64, 48, 20, 4);
}

/// k nearest by brute force, ties to the older exemplar.
fn brute_neighbors(points: &[(Vec<f64>, Label, u64)], q: &[f64], k: usize) -> Vec<(f64, u64, Label)> {
    let mut all: Vec<(f64, u64, Label)> = points.iter().map(|(p, l, s)| (sq(p, q), *s, *l)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

fn assert_matches_brute(store: &KnnStore, queries: &[Vec<f64>]) -> usize {
    let live: Vec<(Vec<f64>, Label, u64)> = store.exemplars().map(|e| (e.feature.to_vec(), e.label, e.seq())).collect();
    let k = store.k();
    let mut tie_cases = 0;
    for q in queries {
        let want = brute_neighbors(&live, q, k + 1);
        let got = store.neighbors(q).unwrap();
        let kth = want[k.min(want.len()) - 1].0;
        let tied = want.len() > k && (want[k].0 - kth).abs() <= 1e-12 * kth.max(1e-300);
        if tied {
            tie_cases += 1;
            continue;
        }
        let want_seqs: Vec<u64> = want.iter().take(k).map(|w| w.1).collect();
        let got_seqs: Vec<u64> = got.iter().map(|(_, e)| e.seq()).collect();
        assert_eq!(got_seqs, want_seqs);
        let vote: f64 = want.iter().take(k).map(|w| w.2.sign()).sum::<f64>() / k.min(live.len()) as f64;
        assert_eq!(store.score(q).unwrap(), vote);
    }
    tie_cases
}

#[test]
fn knn_score_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let dim = 20;
    let mut store = KnnStore::new(KnnConfig::default()).unwrap();
    for p in random_points(&mut rng, 500, dim) {
        let label = if p[0] + 0.3 * p[1] > 0.0 { Label::Positive } else { Label::Negative };
        store.seed(&FeatureVector::new(p).unwrap(), label, 0).unwrap();
    }
    let queries = random_points(&mut rng, 1000, dim);
    let ties = assert_matches_brute(&store, &queries);
    assert!(ties < 10, "{ties} tied queries");
}

#[test]
fn knn_score_matches_linear_scan_under_churn() {
    // Inserts, prunes and tombstones between rebuilds, on a coarse lattice
    // so that exact distance ties exercise the older-first rule.
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let dim = 3;
    let mut store = KnnStore::new(KnnConfig { k: 5, initial_timer: 3, ..KnnConfig::default() }).unwrap();
    for frame in 0..60 {
        for _ in 0..12 {
            let p: Vec<f64> = (0..dim).map(|_| rng.random_range(0..6) as f64).collect();
            let label = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
            store.insert(&FeatureVector::new(p).unwrap(), label, frame).unwrap();
        }
        store.tick();
        store.prune();
        store.validate_index().unwrap();
        let queries: Vec<Vec<f64>> =
            (0..15).map(|_| (0..dim).map(|_| rng.random_range(0..6) as f64 + 0.5).collect()).collect();
        let live: Vec<(Vec<f64>, Label, u64)> =
            store.exemplars().map(|e| (e.feature.to_vec(), e.label, e.seq())).collect();
        for q in &queries {
            let want = brute_neighbors(&live, q, store.k());
            let got: Vec<u64> = store.neighbors(q).unwrap().iter().map(|(_, e)| e.seq()).collect();
            assert_eq!(got, want.iter().map(|w| w.1).collect::<Vec<_>>());
        }
    }
}

#[test]
fn localize_matches_brute_force_mean_on_every_frame() {
    let scenario = builtin_scenario("distractor-cross", 3).unwrap().with_frame_count(200);
    let oracle = ScriptedOracle::new(scenario.clone(), 0.0, 0.7, 3);
    let cfg = TrackerConfig::default();
    let (tau_p, tau_a) = (cfg.tau_p, cfg.tau_a);
    let mut tracker =
        Tracker::init(&scenario.frame(0), scenario.ground_truth(0).0, cfg, Variant::Ust, oracle, 3).unwrap();
    let mut prev = tracker.estimate();
    let mut located = 0;
    for t in 1..200 {
        let r = tracker.step(&scenario.frame(t)).unwrap();
        let mut count = 0;
        let mut total = 0.0;
        let mut acc = [0.0; 4];
        for c in r.candidates.iter().filter(|c| !c.global && c.label == Some(Label::Positive)) {
            let pi = c.score.unwrap().max(0.0);
            count += 1;
            total += pi;
            acc[0] += pi * c.state.cx;
            acc[1] += pi * c.state.cy;
            acc[2] += pi * c.state.w;
            acc[3] += pi * c.state.h;
        }
        if count > tau_p && total > tau_a {
            located += 1;
            assert!(!r.occluded, "frame {t}");
            let got = r.estimate.as_array();
            for i in 0..4 {
                assert!((got[i] - acc[i] / total).abs() < 1e-9, "frame {t} component {i}");
            }
        } else {
            assert!(r.occluded, "frame {t}");
            assert_eq!(r.estimate, prev);
        }
        prev = r.estimate;
    }
    assert!(located > 150);
}

#[test]
fn archive_oracle_matches_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let dim = 6;
    let k = 7;
    let mut oracle = ArchiveNnOracle::new(k).unwrap();
    let mut archive = Vec::new();
    for round in 0..3 {
        let mut batch = LabeledSet::new();
        for p in random_points(&mut rng, 150, dim) {
            let label = if p[0] * p[1] > 0.0 { Label::Positive } else { Label::Negative };
            archive.push((p.clone(), label, archive.len() as u64));
            batch.push(FeatureVector::new(p).unwrap(), label, round);
        }
        oracle.retrain(&batch);
    }
    assert_eq!(oracle.archive_len(), 450);
    let state = TargetState::new(0.0, 0.0, 1.0, 1.0).unwrap();
    for q in random_points(&mut rng, 200, dim) {
        let nn = brute_neighbors(&archive, &q, k);
        let vote: f64 = nn.iter().map(|n| n.2.sign()).sum::<f64>() / k as f64;
        let query = OracleQuery { feature: &q, state: &state, frame: 0 };
        assert_eq!(oracle.decide(&query).unwrap(), vote);
        let want = if vote > 0.0 { Label::Positive } else { Label::Negative };
        assert_eq!(oracle.label(&query).unwrap(), want);
    }
    assert_eq!(oracle.query_count(), 400);
}
