use proptest::prelude::*;
use zsl_core::metrics::{
    ausuc, generalized_accuracy, gzsl_suh, harmonic_mean, retrieval_precision, suc_curve, top1_per_class,
    CalibrationSweep, ScoreMatrix, SucPoint,
};
use zsl_core::nn::Matrix;

/// Counts, for every sweep value, the samples whose true class is strictly
/// above every other calibrated score.
fn brute_gacc(rows: &[Vec<f64>], labels: &[usize], seen: usize) -> f64 {
    let m = 400;
    let mut sum = 0.0;
    for j in 0..m {
        let lambda = -2.0 + j as f64 * 0.01;
        let mut correct = 0;
        for (row, &y) in rows.iter().zip(labels) {
            let cal: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(c, &v)| if c >= seen { v + lambda } else { v })
                .collect();
            let mut ok = true;
            for c in 0..cal.len() {
                if c != y && cal[c] >= cal[y] {
                    ok = false;
                }
            }
            if ok {
                correct += 1;
            }
        }
        sum += correct as f64 / labels.len() as f64;
    }
    100.0 * sum / m as f64
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Scores on a quarter grid, with unseen columns shifted by an eighth so no
/// score gap ever lands near a sweep value.
fn score_rows(n: usize, classes: usize, seen: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-8i32..8, classes), n).prop_map(move |rows| {
        rows.into_iter()
            .map(|r| {
                r.into_iter()
                    .enumerate()
                    .map(|(c, v)| v as f64 / 4.0 + if c >= seen { 0.125 } else { 0.0 })
                    .collect()
            })
            .collect()
    })
}

#[test]
fn gacc_two_sample_cases() {
    // seen 1.0 vs unseen 1.0: correct for λ < 0 only
    let sm = ScoreMatrix::new(matrix(&[vec![1.0, 1.0]]), 1).unwrap();
    let g = generalized_accuracy(&sm, &[0], &CalibrationSweep::default()).unwrap();
    assert!((g - 50.0).abs() < 1e-9);

    // an unseen sample at the same tie is correct for λ > 0 only: 199 points
    let sm = ScoreMatrix::new(matrix(&[vec![1.0, 1.0], vec![1.0, 1.0]]), 1).unwrap();
    let g = generalized_accuracy(&sm, &[0, 1], &CalibrationSweep::default()).unwrap();
    assert!((g - 100.0 * (200.0 + 199.0) / 800.0).abs() < 1e-9);
    assert!((g - brute_gacc(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[0, 1], 1)).abs() < 1e-9);
}

#[test]
fn suc_matches_sweep_enumeration() {
    // seen sample at (0.6, 0.3), unseen sample at (0.5, 0.4)
    let rows = vec![vec![0.6, 0.3], vec![0.5, 0.4]];
    let sm = ScoreMatrix::new(matrix(&rows), 1).unwrap();
    let pts = suc_curve(&sm, &[0, 1], &CalibrationSweep::default()).unwrap();
    let mut want = Vec::new();
    for j in 0..400 {
        let lambda = -2.0 + j as f64 * 0.01;
        let seen_ok = rows[0][0] >= rows[0][1] + lambda;
        let unseen_ok = rows[1][1] + lambda > rows[1][0];
        let p = SucPoint {
            acc_unseen: unseen_ok as u8 as f64,
            acc_seen: seen_ok as u8 as f64,
        };
        if !want.contains(&p) {
            want.push(p);
        }
    }
    want.sort_by(|a, b| {
        a.acc_unseen
            .total_cmp(&b.acc_unseen)
            .then(b.acc_seen.total_cmp(&a.acc_seen))
    });
    assert_eq!(pts, want);
    assert_eq!(ausuc(&pts).unwrap(), 1.0);
}

#[test]
fn fixed_values() {
    let pts = |v: &[(f64, f64)]| -> Vec<SucPoint> {
        v.iter()
            .map(|&(u, s)| SucPoint {
                acc_unseen: u,
                acc_seen: s,
            })
            .collect()
    };
    assert_eq!(ausuc(&pts(&[(0.0, 1.0), (1.0, 0.0)])).unwrap(), 0.5);
    assert_eq!(ausuc(&pts(&[(0.0, 1.0), (1.0, 1.0)])).unwrap(), 1.0);
    assert!((ausuc(&pts(&[(0.0, 0.8), (0.5, 0.6), (1.0, 0.2)])).unwrap() - 0.55).abs() < 1e-12);
    assert!(ausuc(&pts(&[(0.0, 1.0)])).is_err());
    assert_eq!(harmonic_mean(60.0, 30.0), 40.0);
    assert_eq!(harmonic_mean(100.0, 0.0), 0.0);
}

#[test]
fn gzsl_separable_case() {
    let sm = ScoreMatrix::new(matrix(&[vec![0.9, 0.1], vec![0.2, 0.8]]), 1).unwrap();
    let g = gzsl_suh(&sm, &[0, 1]).unwrap();
    assert_eq!((g.seen, g.unseen, g.harmonic), (100.0, 100.0, 100.0));
}

/// Ranks the whole gallery for each query and counts hits in the top
/// `⌈ratio · n_c⌉`, breaking distance ties by index.
fn brute_retrieval(queries: &[Vec<f64>], qc: &[usize], gallery: &[Vec<f64>], labels: &[usize], ratio: f64) -> f64 {
    let mut total = 0.0;
    for (q, &c) in queries.iter().zip(qc) {
        let n_c = labels.iter().filter(|&&y| y == c).count();
        let take = ((ratio * n_c as f64).ceil() as usize).max(1);
        let mut d: Vec<(f64, usize)> = gallery
            .iter()
            .enumerate()
            .map(|(i, g)| (q.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), i))
            .collect();
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let hits = d[..take].iter().filter(|(_, i)| labels[*i] == c).count();
        total += hits as f64 / take as f64;
    }
    100.0 * total / queries.len() as f64
}

#[test]
fn retrieval_toy_layout() {
    // class 1 has one image sitting right next to class 0's query
    let gallery = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![5.0, 5.0], vec![0.05, 0.0]];
    let labels = vec![0, 0, 1, 1];
    let queries = vec![vec![0.0, 0.0], vec![5.0, 5.0]];
    for ratio in [0.25, 0.5, 1.0] {
        let got = retrieval_precision(&matrix(&queries), &[0, 1], &matrix(&gallery), &labels, ratio).unwrap();
        let want = brute_retrieval(&queries, &[0, 1], &gallery, &labels, ratio);
        assert!((got - want).abs() < 1e-12, "ratio {ratio}: {got} vs {want}");
    }
    // each query's second-nearest image belongs to the other class
    let full = retrieval_precision(&matrix(&queries), &[0, 1], &matrix(&gallery), &labels, 1.0).unwrap();
    assert_eq!(full, 50.0);
    let top = retrieval_precision(&matrix(&queries), &[0, 1], &matrix(&gallery), &labels, 0.5).unwrap();
    assert_eq!(top, 100.0);
}

proptest! {
    #[test]
    fn gacc_matches_brute_force(rows in score_rows(5, 4, 2), labels in prop::collection::vec(0usize..4, 5)) {
        let sm = ScoreMatrix::new(matrix(&rows), 2).unwrap();
        let got = generalized_accuracy(&sm, &labels, &CalibrationSweep::default()).unwrap();
        prop_assert!((got - brute_gacc(&rows, &labels, 2)).abs() < 1e-9);
    }

    #[test]
    fn gacc_ignores_shift_of_every_column(rows in score_rows(5, 4, 2), labels in prop::collection::vec(0usize..4, 5), shift in -4i32..4) {
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift as f64).collect()).collect();
        let sweep = CalibrationSweep::default();
        let a = generalized_accuracy(&ScoreMatrix::new(matrix(&rows), 2).unwrap(), &labels, &sweep).unwrap();
        let b = generalized_accuracy(&ScoreMatrix::new(matrix(&shifted), 2).unwrap(), &labels, &sweep).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn unseen_predictions_grow_with_lambda(rows in score_rows(6, 4, 2), a in -200i32..200, b in -200i32..200) {
        let sm = ScoreMatrix::new(matrix(&rows), 2).unwrap();
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let p_lo = sm.calibrated_predictions(lo);
        let p_hi = sm.calibrated_predictions(hi);
        for (x, y) in p_lo.iter().zip(&p_hi) {
            prop_assert!(!sm.is_unseen_column(*x) || sm.is_unseen_column(*y));
        }
    }

    #[test]
    fn top1_ignores_shift_of_every_column(rows in score_rows(8, 3, 3), shift in -3.0f64..3.0) {
        let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let shifted: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| v + shift).collect()).collect();
        prop_assert_eq!(
            top1_per_class(&matrix(&rows), &labels).unwrap(),
            top1_per_class(&matrix(&shifted), &labels).unwrap()
        );
    }

    #[test]
    fn ausuc_is_order_free_and_bounded(mut pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..10), rot in 0usize..10) {
        let points: Vec<SucPoint> = pts.iter().map(|&(u, s)| SucPoint { acc_unseen: u, acc_seen: s }).collect();
        let a = ausuc(&points).unwrap();
        let k = rot % pts.len();
        pts.rotate_left(k);
        pts.reverse();
        let shuffled: Vec<SucPoint> = pts.iter().map(|&(u, s)| SucPoint { acc_unseen: u, acc_seen: s }).collect();
        prop_assert_eq!(a, ausuc(&shuffled).unwrap());
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn harmonic_bounds(s in 0.0f64..=100.0, u in 0.0f64..=100.0) {
        let h = harmonic_mean(s, u);
        prop_assert!(h <= (s + u) / 2.0 + 1e-12);
        prop_assert!(h <= 2.0 * s.min(u) + 1e-12);
        prop_assert!((0.0..=100.0 + 1e-12).contains(&h));
    }

    #[test]
    fn retrieval_matches_brute_force(
        gallery in prop::collection::vec(prop::collection::vec(-2i32..3, 2), 4..10),
        queries in prop::collection::vec(prop::collection::vec(-2i32..3, 2), 2),
        ratio in prop::sample::select(vec![0.25, 0.5, 1.0]),
    ) {
        let g: Vec<Vec<f64>> = gallery.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let q: Vec<Vec<f64>> = queries.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let labels: Vec<usize> = (0..g.len()).map(|i| i % 2).collect();
        let got = retrieval_precision(&matrix(&q), &[0, 1], &matrix(&g), &labels, ratio).unwrap();
        let want = brute_retrieval(&q, &[0, 1], &g, &labels, ratio);
        prop_assert!((got - want).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&got));
    }
}
