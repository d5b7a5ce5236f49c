use proptest::prelude::*;

use qrelscore::adversarial::{pronoun_swap, sentence_negation, Perturbation};
use qrelscore::analysis::{auc_statistic, kendall, pearson, roc_auc, spearman, summarize, HISTOGRAM_BINS};
use qrelscore::relevance::{harmonic, power_mean, rescale, rescale_gain, GainMode};
use qrelscore::transport::{exact_uniform_plan, uniform_plan};

fn unit() -> impl Strategy<Value = f64> {
    0.0f64..=1.0
}

fn check_single_edit(p: &Perturbation) {
    assert_ne!(p.original, p.transformed);
    let (o, e) = (&p.original_span, &p.edit_span);
    assert_eq!(p.original[..o.start], p.transformed[..e.start]);
    assert_eq!(p.original[o.end..], p.transformed[e.end..]);
    assert!(e.end <= p.transformed.len());
}

proptest! {
    #[test]
    fn rescale_is_monotone_and_bounded(b in -0.5f64..0.99, x in -1.0f64..2.0, d in 0.0f64..1.0) {
        let (lo, hi) = (rescale(x, b), rescale(x + d, b));
        prop_assert!(lo <= hi);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert_eq!(rescale(b, b), 0.0);
    }

    #[test]
    fn gain_rescale_is_monotone(b in 0.0f64..0.9, x in 0.0f64..5.0, d in 0.0f64..1.0) {
        for mode in [GainMode::Ratio, GainMode::Absolute] {
            let (lo, hi) = (rescale_gain(x, b, mode), rescale_gain(x + d, b, mode));
            prop_assert!(lo <= hi && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn harmonic_mean_lies_between_min_and_mean(l in unit(), g in unit()) {
        let h = harmonic(l, g);
        prop_assert!(h >= l.min(g) - 1e-15);
        prop_assert!(h <= (l + g) / 2.0 + 1e-15);
        prop_assert!((harmonic(g, l) - h).abs() < 1e-15);
    }

    #[test]
    fn power_mean_at_one_is_the_mean(v in prop::collection::vec(-1.0f64..1.0, 1..13)) {
        let m = power_mean(&v, 1.0).unwrap();
        let direct = v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((m - direct).abs() < 1e-12);
    }

    #[test]
    fn power_mean_is_bounded(v in prop::collection::vec(unit(), 1..13), p in 1u32..5) {
        let m = power_mean(&v, p as f64).unwrap();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo - 1e-12 && m <= hi + 1e-12);
    }

    #[test]
    fn exact_plan_has_uniform_marginals(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let cost: Vec<f64> = (0..rows * cols)
            .map(|k| ((seed.wrapping_mul(6364136223846793005).wrapping_add((k as u64).wrapping_mul(1442695040888963407))) >> 40) as f64 / (1u64 << 24) as f64)
            .collect();
        let plan = exact_uniform_plan(&cost, rows, cols).unwrap();
        for i in 0..rows {
            prop_assert_eq!((0..cols).map(|j| plan.get(i, j)).sum::<usize>(), cols);
        }
        for j in 0..cols {
            prop_assert_eq!((0..rows).map(|i| plan.get(i, j)).sum::<usize>(), rows);
        }
        let arr = ndarray::Array2::from_shape_vec((rows, cols), cost).unwrap();
        let t = uniform_plan(arr.view()).unwrap();
        prop_assert!((t.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlations_are_symmetric(
        x in prop::collection::vec(0i32..6, 3..13),
        seed in any::<u64>(),
    ) {
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, v)| ((seed >> (i % 60)) & 3) as f64 - v * 0.5).collect();
        for f in [pearson::<f64>, spearman, kendall] {
            match (f(&xs, &ys), f(&ys, &xs)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "asymmetric definedness"),
            }
        }
    }

    #[test]
    fn rank_statistics_ignore_monotone_maps(
        x in prop::collection::vec(-50i32..50, 3..13),
        y in prop::collection::vec(-50i32..50, 13),
        a in 0.01f64..3.0,
        c in -5.0f64..5.0,
    ) {
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let ys: Vec<f64> = y[..xs.len()].iter().map(|&v| v as f64).collect();
        let mapped: Vec<f64> = xs.iter().map(|v| a * v * v * v + v + c).collect();
        if let (Ok(s0), Ok(s1)) = (spearman(&xs, &ys), spearman(&mapped, &ys)) {
            prop_assert!((s0 - s1).abs() < 1e-12);
        }
        if let (Ok(k0), Ok(k1)) = (kendall(&xs, &ys), kendall(&mapped, &ys)) {
            prop_assert!((k0 - k1).abs() < 1e-12);
        }
        let labels: Vec<bool> = ys.iter().map(|&v| v > 0.0).collect();
        if let Ok(s) = auc_statistic(&xs, &labels) {
            prop_assert_eq!(s, auc_statistic(&mapped, &labels).unwrap());
        }
    }

    #[test]
    fn auc_of_negated_scores_is_complementary(
        s in prop::collection::vec(0i32..8, 2..20),
        l in prop::collection::vec(any::<bool>(), 20),
    ) {
        let scores: Vec<f64> = s.iter().map(|&v| v as f64).collect();
        let labels = &l[..scores.len()];
        let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
        if let Ok(a) = roc_auc(&scores, labels) {
            prop_assert!((a + roc_auc(&neg, labels).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn histogram_counts_every_in_range_value(v in prop::collection::vec(-0.2f64..1.2, 1..200)) {
        let g = summarize(&v, None).unwrap();
        prop_assert_eq!(g.histogram.len(), HISTOGRAM_BINS);
        prop_assert_eq!(g.histogram.iter().sum::<usize>() + g.below_range + g.above_range, v.len());
        prop_assert!(g.q1 <= g.median && g.median <= g.q3);
    }

    #[test]
    fn perturbations_are_single_edits(
        subject in prop::sample::select(vec!["Jack", "the student", "Marlee Matlin", "she", "they"]),
        verb in prop::sample::select(vec!["buy", "publish", "translate", "found"]),
        aux in prop::sample::select(vec!["did", "can", "will", "should", "could"]),
        obj in prop::sample::select(vec!["his milk", "her paper", "their anthem", "my car", "its home"]),
        seed in any::<u64>(),
    ) {
        let q = format!("Where {aux} {subject} {verb} {obj}?");
        let n = sentence_negation(&q, seed).unwrap();
        check_single_edit(&n);
        prop_assert_eq!(sentence_negation(&q, seed).unwrap(), n);
        match pronoun_swap(&q, seed) {
            Ok(p) => check_single_edit(&p),
            Err(e) => prop_assert!(matches!(e, qrelscore::Error::NotApplicable(_)), "{e}"),
        }
    }
}
