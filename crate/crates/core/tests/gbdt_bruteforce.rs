//! First-round trees checked against an exhaustive split search that
//! recomputes every candidate's gradient sums from scratch.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semloc_core::features::{FeatureMatrix, FeatureSchema};
use semloc_core::model::{GbdtModel, GbdtParams, Node};
use semloc_core::taxonomy::CategoryId;

#[derive(Debug)]
enum Oracle {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Oracle>,
        right: Box<Oracle>,
    },
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn brute_tree(x: &[Vec<f64>], g: &[f64], h: &[f64], rows: &[usize], depth: usize, p: &GbdtParams) -> Oracle {
    let gs: f64 = rows.iter().map(|&r| g[r]).sum();
    let hs: f64 = rows.iter().map(|&r| h[r]).sum();
    let leaf = Oracle::Leaf(-p.learning_rate * gs / (hs + p.lambda));
    if depth >= p.max_depth || rows.len() < 2 * p.min_samples_leaf {
        return leaf;
    }
    let mut best: Option<(usize, f64, f64)> = None;
    #[allow(clippy::needless_range_loop)]
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] <= t).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][f] > t).collect();
            if left.len() < p.min_samples_leaf || right.len() < p.min_samples_leaf {
                continue;
            }
            let sum = |s: &[usize], v: &[f64]| s.iter().map(|&r| v[r]).sum::<f64>();
            let gain = 0.5
                * (score(sum(&left, g), sum(&left, h), p.lambda) + score(sum(&right, g), sum(&right, h), p.lambda)
                    - score(gs, hs, p.lambda));
            if best.is_none_or(|(_, _, b)| gain > b + 1e-12 * b.abs()) {
                best = Some((f, t, gain));
            }
        }
    }
    match best {
        Some((feature, threshold, gain)) if gain > p.min_split_gain && gain > 0.0 => {
            let left: Vec<usize> = rows.iter().copied().filter(|&r| x[r][feature] <= threshold).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| x[r][feature] > threshold).collect();
            Oracle::Split {
                feature,
                threshold,
                gain,
                left: Box::new(brute_tree(x, g, h, &left, depth + 1, p)),
                right: Box::new(brute_tree(x, g, h, &right, depth + 1, p)),
            }
        }
        _ => leaf,
    }
}

fn compare(nodes: &[Node], i: usize, o: &Oracle, splits: &mut usize) {
    match (&nodes[i], o) {
        (Node::Leaf { value }, Oracle::Leaf(v)) => assert!((value - v).abs() < 1e-12),
        (
            Node::Split {
                feature,
                threshold,
                gain,
                left,
                right,
            },
            Oracle::Split {
                feature: of,
                threshold: ot,
                gain: og,
                left: ol,
                right: or,
            },
        ) => {
            assert_eq!(*feature as usize, *of);
            assert_eq!(threshold, ot);
            assert!((gain - og).abs() < 1e-8, "gain {gain} vs {og}");
            *splits += 1;
            compare(nodes, *left as usize, ol, splits);
            compare(nodes, *right as usize, or, splits);
        }
        (a, b) => panic!("shape differs: {a:?} vs {b:?}"),
    }
}

#[test]
fn first_round_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 50;
    let k = 3;
    // Coarse values so that ties between rows are common.
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            vec![
                (rng.random_range(0.0..10.0f64)).round(),
                rng.random_range(-1.0..1.0),
                (rng.random_range(0.0..4.0f64)).floor() * 0.5,
            ]
        })
        .collect();
    let y: Vec<CategoryId> = x
        .iter()
        .map(|r| {
            CategoryId(if r[0] + 3.0 * r[1] > 5.0 {
                0
            } else if r[2] > 0.7 {
                1
            } else {
                2
            })
        })
        .collect();
    let schema = FeatureSchema {
        columns: vec!["a".into(), "b".into(), "c".into()],
    };
    let m = FeatureMatrix::from_rows(schema, &x).unwrap();
    for (depth, leaf) in [(1, 5), (3, 5), (6, 2)] {
        let params = GbdtParams {
            n_rounds: 1,
            max_depth: depth,
            min_samples_leaf: leaf,
            ..Default::default()
        };
        let model = GbdtModel::train(&m, &y, k, &params).unwrap();
        let p0 = 1.0 / k as f64;
        let h = vec![p0 * (1.0 - p0); n];
        let rows: Vec<usize> = (0..n).collect();
        let mut splits = 0;
        for c in 0..k {
            let g: Vec<f64> = y.iter().map(|l| p0 - if l.index() == c { 1.0 } else { 0.0 }).collect();
            let oracle = brute_tree(&x, &g, &h, &rows, 0, &params);
            compare(model.rounds()[0][c].nodes(), 0, &oracle, &mut splits);
        }
        assert!(splits >= k, "expected at least one split per class tree");
    }
}
