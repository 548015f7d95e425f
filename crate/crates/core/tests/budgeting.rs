//! Exemplar budgeting checked against a plain reference model of the five
//! rules, plus the escape property on a scripted fixture.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ust_core::knn::{InsertOutcome, KnnConfig, KnnStore};
use ust_core::{FeatureVector, Label};

/// Reference store: a flat list, full scans, no index.
#[derive(Debug, Clone, PartialEq)]
struct RefEx {
    x: Vec<f64>,
    label: Label,
    timer: u32,
    flagged: bool,
    outlier: bool,
    prototype: bool,
    seq: u64,
}

struct RefStore {
    k: usize,
    alpha0: u32,
    items: Vec<RefEx>,
    next: u64,
}

#[derive(Debug, PartialEq)]
enum RefOutcome {
    Absorbed,
    Inserted,
    Outlier,
}

impl RefStore {
    fn new(k: usize, alpha0: u32) -> Self {
        RefStore { k, alpha0, items: Vec::new(), next: 0 }
    }

    fn hood(&self, x: &[f64], skip: Option<u64>) -> Vec<usize> {
        let mut order: Vec<(f64, u64, usize)> = self
            .items
            .iter()
            .enumerate()
            .filter(|(_, e)| Some(e.seq) != skip)
            .map(|(i, e)| (e.x.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), e.seq, i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.into_iter().take(self.k).map(|o| o.2).collect()
    }

    fn push(&mut self, x: &[f64], label: Label, outlier: bool) {
        self.items.push(RefEx {
            x: x.to_vec(),
            label,
            timer: self.alpha0,
            flagged: false,
            outlier,
            prototype: false,
            seq: self.next,
        });
        self.next += 1;
    }

    fn insert(&mut self, x: &[f64], label: Label) -> RefOutcome {
        if self.items.is_empty() {
            self.push(x, label, false);
            return RefOutcome::Inserted;
        }
        let hood = self.hood(x, None);
        let same = hood.iter().filter(|&&i| self.items[i].label == label).count();
        if same == hood.len() {
            return RefOutcome::Absorbed;
        }
        for &i in &hood {
            let e = &mut self.items[i];
            if e.label != label && !e.prototype {
                e.timer += 1;
            }
        }
        let outlier = same == 0;
        self.push(x, label, outlier);
        if outlier {
            RefOutcome::Outlier
        } else {
            RefOutcome::Inserted
        }
    }

    fn tick(&mut self) -> usize {
        let mut n = 0;
        for e in &mut self.items {
            if !e.prototype && !e.flagged {
                e.timer = e.timer.saturating_sub(1);
                if e.timer == 0 {
                    e.flagged = true;
                    n += 1;
                }
            }
        }
        n
    }

    /// Returns (absorbed, outliers removed, promoted).
    fn prune(&mut self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        let flagged: Vec<u64> = self.items.iter().filter(|e| e.flagged).map(|e| e.seq).collect();
        for seq in flagged {
            let pos = self.items.iter().position(|e| e.seq == seq).unwrap();
            let (x, label, outlier) = (self.items[pos].x.clone(), self.items[pos].label, self.items[pos].outlier);
            let hood = self.hood(&x, Some(seq));
            let same = hood.iter().filter(|&&i| self.items[i].label == label).count();
            if !hood.is_empty() && same == hood.len() {
                self.items.remove(pos);
                counts.0 += 1;
            } else if outlier && same == 0 && !hood.is_empty() {
                self.items.remove(pos);
                counts.1 += 1;
            } else {
                let e = &mut self.items[pos];
                e.flagged = false;
                e.prototype = true;
                counts.2 += 1;
            }
        }
        counts
    }
}

fn store(k: usize, alpha0: u32, budgeting: bool) -> KnnStore {
    KnnStore::new(KnnConfig { k, initial_timer: alpha0, budgeting, budget_cap: None }).unwrap()
}

fn fv(x: &[f64]) -> FeatureVector {
    FeatureVector::new(x.to_vec()).unwrap()
}

fn snapshot(s: &KnnStore) -> Vec<RefEx> {
    s.exemplars()
        .map(|e| RefEx {
            x: e.feature.to_vec(),
            label: e.label,
            timer: e.timer,
            flagged: e.flagged,
            outlier: e.outlier,
            prototype: e.prototype,
            seq: e.seq(),
        })
        .collect()
}

/// Same membership and per-exemplar state. Sequence numbers differ because
/// the reference never numbers absorbed samples, so only order is compared.
fn assert_same(s: &KnnStore, r: &RefStore) {
    let strip = |v: Vec<RefEx>| v.into_iter().map(|e| RefEx { seq: 0, ..e }).collect::<Vec<_>>();
    assert_eq!(strip(snapshot(s)), strip(r.items.clone()));
    s.validate_index().unwrap();
}

fn outcome(o: InsertOutcome) -> RefOutcome {
    match o {
        InsertOutcome::Absorbed => RefOutcome::Absorbed,
        InsertOutcome::Inserted => RefOutcome::Inserted,
        InsertOutcome::InsertedAsOutlier => RefOutcome::Outlier,
    }
}

#[test]
fn mixed_neighborhood_insert_hand_trace() {
    use Label::{Negative as N, Positive as P};
    let seeds = [(0.0, P), (1.0, P), (2.0, N), (3.0, N), (4.0, P), (5.0, N)];
    let mut s = store(3, 2, true);
    let mut r = RefStore::new(3, 2);
    for &(x, l) in &seeds {
        s.seed(&fv(&[x]), l, 0).unwrap();
        r.push(&[x], l, false);
    }
    // Nearest three to 2.4 are 2 (-), 3 (-), 1 (+): mixed, so stored plainly
    // and the two negatives gain a frame each.
    let got = s.insert(&fv(&[2.4]), P, 1).unwrap();
    assert_eq!(got, InsertOutcome::Inserted);
    assert_eq!(r.insert(&[2.4], P), RefOutcome::Inserted);
    let timers: Vec<u32> = s.exemplars().map(|e| e.timer).collect();
    assert_eq!(timers, [2, 2, 3, 3, 2, 2, 2]);
    assert!(s.exemplars().all(|e| !e.outlier));
    assert_same(&s, &r);

    // Continue the trace through two frames of countdown.
    for frame in 2..=4 {
        let x = [frame as f64 - 0.3];
        assert_eq!(outcome(s.insert(&fv(&x), N, frame).unwrap()), r.insert(&x, N));
        assert_eq!(s.tick(), r.tick());
        let p = s.prune();
        assert_eq!((p.absorbed, p.outliers_removed, p.prototypes_promoted), r.prune());
        assert_same(&s, &r);
    }
}

#[test]
fn promoted_prototype_hand_trace() {
    use Label::{Negative as N, Positive as P};
    let mut s = store(2, 1, true);
    let mut r = RefStore::new(2, 1);
    for &(x, l) in &[(0.0, P), (-1.0, N), (2.0, P), (2.1, P)] {
        s.seed(&fv(&[x]), l, 0).unwrap();
        r.push(&[x], l, false);
    }
    // Frame 1: everything expires. Oldest first: 0 sees {-1, 2}, mixed, so
    // it becomes a prototype; -1 sees {0, 2}, opposite but not an outlier,
    // prototype; 2 sees {2.1, 0}, all positive, absorbed; 2.1 then sees
    // {0, -1}, mixed, prototype.
    assert_eq!(s.tick(), 4);
    let p = s.prune();
    assert_eq!((p.absorbed, p.outliers_removed, p.prototypes_promoted), (1, 0, 3));
    assert_eq!(r.tick(), 4);
    assert_eq!(r.prune(), (1, 0, 3));
    assert_same(&s, &r);
    let kept: Vec<f64> = s.exemplars().map(|e| e.feature[0]).collect();
    assert_eq!(kept, [0.0, -1.0, 2.1]);
    assert!(s.exemplars().all(|e| e.prototype && !e.flagged));

    // Frame 2: prototypes never count down again.
    assert_eq!(s.tick(), 0);
    let p = s.prune();
    assert_eq!((p.absorbed, p.outliers_removed, p.prototypes_promoted), (0, 0, 0));
    assert_eq!(s.len(), 3);
    // Rule 4 leaves prototype timers alone too.
    s.insert(&fv(&[-0.5]), P, 2).unwrap();
    assert!(s.exemplars().filter(|e| e.prototype).all(|e| e.timer == 0));
}

#[test]
fn random_streams_follow_the_reference_rules() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1 + (seed as usize % 3);
        let k = 1 + (seed as usize % 4);
        let alpha0 = 1 + (seed as u32 % 5);
        let mut s = store(k, alpha0, true);
        let mut r = RefStore::new(k, alpha0);
        for frame in 0..80 {
            for _ in 0..rng.random_range(0..6) {
                // Labels follow a noisy boundary so both clean and mixed
                // neighbourhoods occur.
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                let label = if (x[0] > 0.0) != rng.random_bool(0.15) { Label::Positive } else { Label::Negative };
                let got = s.insert(&fv(&x), label, frame).unwrap();
                assert_eq!(outcome(got), r.insert(&x, label), "seed {seed} frame {frame}");
            }
            assert_eq!(s.tick(), r.tick());
            let p = s.prune();
            assert_eq!((p.absorbed, p.outliers_removed, p.prototypes_promoted), r.prune(), "seed {seed} frame {frame}");
            assert_same(&s, &r);
        }
    }
}

/// Mean score over a grid of probes inside the cluster disc.
fn cluster_score(s: &KnnStore) -> f64 {
    let mut probes = Vec::new();
    for i in -3..=3 {
        for j in -3..=3 {
            let (x, y) = (i as f64 * 0.05, j as f64 * 0.05);
            if x * x + y * y <= 0.15 * 0.15 {
                probes.push(s.score(&[x, y]).unwrap());
            }
        }
    }
    probes.iter().sum::<f64>() / probes.len() as f64
}

/// The escape fixture. A tight cluster of wrongly positive exemplars sits at
/// the origin (a distractor once mistaken for the target), with the real
/// target's exemplars far away and background exemplars nearer. After the
/// initial timers run out, uncontested redundant positives are absorbed and
/// only a thin contested shell survives as prototypes. Fresh negatives then
/// outvote what is left. Without budgeting all forty positives stay and keep
/// the cluster positive.
fn escape_run(budgeting: bool, seed: u64) -> (f64, f64, usize) {
    const K: usize = 10;
    const ALPHA0: u32 = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = |rng: &mut ChaCha8Rng, cx: f64, cy: f64, r: f64| loop {
        let (x, y) = (rng.random_range(-r..r), rng.random_range(-r..r));
        if x * x + y * y <= r * r {
            break [cx + x, cy + y];
        }
    };
    let mut s = store(K, ALPHA0, budgeting);
    for _ in 0..40 {
        s.seed(&fv(&disc(&mut rng, 0.0, 0.0, 0.2)), Label::Positive, 0).unwrap();
    }
    for _ in 0..20 {
        s.seed(&fv(&disc(&mut rng, 6.0, 0.0, 0.5)), Label::Positive, 0).unwrap();
        s.seed(&fv(&disc(&mut rng, -3.0, 0.0, 0.5)), Label::Negative, 0).unwrap();
    }
    let before = cluster_score(&s);
    for frame in 1..=(ALPHA0 as usize + 5) {
        if frame > ALPHA0 as usize {
            for _ in 0..4 {
                s.insert(&fv(&disc(&mut rng, 0.0, 0.0, 0.2)), Label::Negative, frame).unwrap();
            }
        }
        s.tick();
        s.prune();
        s.validate_index().unwrap();
    }
    let after = cluster_score(&s);
    let positives_left = s.exemplars().filter(|e| e.label == Label::Positive && e.feature[0].abs() < 1.0).count();
    (before, after, positives_left)
}

#[test]
fn budgeting_lets_a_mislabeled_cluster_flip_within_five_frames_of_expiry() {
    for seed in 0..10 {
        let (before, on, kept) = escape_run(true, seed);
        assert_eq!(before, 1.0);
        assert!(on < 0.0, "seed {seed}: budgeted score {on}, {kept} positives kept");
        assert!(kept < 40);
        let (before, off, kept) = escape_run(false, seed);
        assert_eq!(before, 1.0);
        assert!(off > 0.0, "seed {seed}: unbudgeted score {off}");
        assert_eq!(kept, 40);
    }
}
