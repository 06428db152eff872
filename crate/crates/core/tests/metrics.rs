mod oracles;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resynth::metrics::{aupr, auroc, balanced_accuracy, eval_image, image_score, ScoredSet};
use resynth::ScalarField;

const GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// A random labelled set of 2..=8 grid scores containing both classes.
fn grid_set(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.gen_range(2..=8);
        let scores: Vec<f64> = (0..n).map(|_| GRID[rng.gen_range(0..GRID.len())]).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
            return (scores, labels);
        }
    }
}

#[test]
fn small_sets_match_exhaustive_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ties = 0;
    for _ in 0..1000 {
        let (scores, labels) = grid_set(&mut rng);
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        ties += usize::from(sorted.len() < scores.len());
        let set = ScoredSet::new(scores.clone(), labels.clone()).unwrap();
        let ctx = format!("{scores:?} {labels:?}");
        assert!((auroc(&set).unwrap() - oracles::auroc_pairs(&scores, &labels)).abs() < 1e-12, "{ctx}");
        assert!((aupr(&set).unwrap() - oracles::ap_rank_sum(&scores, &labels)).abs() < 1e-12, "{ctx}");
        let (acc, _) = balanced_accuracy(&set).unwrap();
        assert!((acc - oracles::balanced_acc_sweep(&scores, &labels)).abs() < 1e-12, "{ctx}");
    }
    assert!(ties > 100, "only {ties} sets with ties");
}

#[test]
fn image_level_auroc_composes_top_k_with_pair_counting() {
    let tops = [0.9, 0.2, 0.6, 0.6, 0.1, 0.75];
    let labels = [true, false, true, false, false, true];
    let maps: Vec<ScalarField> = tops
        .iter()
        .map(|&t| {
            // 10 pixels at `t`, the remaining 90 strictly below it.
            let data = (0..100).map(|i| if i < 10 { t } else { t * 0.5 }).collect();
            ScalarField::new(10, 10, data).unwrap()
        })
        .collect();
    for (m, &t) in maps.iter().zip(&tops) {
        assert!((image_score(m, 10).unwrap() - t).abs() < 1e-12);
    }
    let report = eval_image(&maps, &labels, 10).unwrap();
    assert!((report.auroc - oracles::auroc_pairs(&tops, &labels)).abs() < 1e-12);
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2..40usize).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0..5.0f64, n),
            prop::collection::vec(any::<bool>(), n),
        )
    })
    .prop_filter("both classes", |(_, l)| l.iter().any(|&x| x) && l.iter().any(|&x| !x))
}

proptest! {
    #[test]
    fn auroc_ignores_strictly_increasing_maps((s, l) in scored(), a in 0.1..3.0f64, b in -2.0..2.0f64) {
        let mapped: Vec<f64> = s.iter().map(|&x| (a * x + b).exp()).collect();
        let before = auroc(&ScoredSet::new(s, l.clone()).unwrap()).unwrap();
        let after = auroc(&ScoredSet::new(mapped, l).unwrap()).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn flipping_labels_mirrors_auroc((s, l) in scored()) {
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        prop_assume!(sorted.len() == s.len());
        let flipped: Vec<bool> = l.iter().map(|&x| !x).collect();
        let a = auroc(&ScoredSet::new(s.clone(), l).unwrap()).unwrap();
        let b = auroc(&ScoredSet::new(s, flipped).unwrap()).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aupr_is_one_exactly_when_positives_strictly_lead((s, l) in scored()) {
        let min_pos = s.iter().zip(&l).filter(|p| *p.1).map(|p| *p.0).fold(f64::INFINITY, f64::min);
        let max_neg = s.iter().zip(&l).filter(|p| !*p.1).map(|p| *p.0).fold(f64::NEG_INFINITY, f64::max);
        let ap = aupr(&ScoredSet::new(s, l).unwrap()).unwrap();
        prop_assert_eq!(ap == 1.0, min_pos > max_neg);
    }

    #[test]
    fn balanced_accuracy_is_at_least_half((s, l) in scored()) {
        let (acc, _) = balanced_accuracy(&ScoredSet::new(s, l).unwrap()).unwrap();
        prop_assert!((0.5..=1.0).contains(&acc));
    }
}
