use super::EvalError;

/// Area under the ROC curve in its rank-sum (Mann-Whitney) form: the
/// probability a random positive outscores a random negative, ties counting
/// one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of 1-based ranks of the positives, tied groups sharing their mean rank.
    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count();
        positive_rank_sum += mean_rank * tied_positives as f64;
        start = end;
    }
    let p = positives as f64;
    let u = positive_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_tied() {
        let labels = [0, 1, 1, 0, 1];
        let scores: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 5], &labels).unwrap(), 0.5);
    }

    #[test]
    fn single_class() {
        assert_eq!(
            auc(&[0.1, 0.2], &[1, 1]).unwrap_err(),
            EvalError::SingleClass
        );
    }

    #[test]
    fn small_hand_case() {
        // Positives 0.8, 0.4; negatives 0.4, 0.1 -> pairs: 1, 1, 0.5, 1 of 4.
        let v = auc(&[0.8, 0.4, 0.4, 0.1], &[1, 1, 0, 0]).unwrap();
        assert_eq!(v, 3.5 / 4.0);
    }

    proptest! {
        #[test]
        fn complement_and_monotone_invariance(
            raw in prop::collection::vec((-1e3f64..1e3, 0u8..2), 2..80)
        ) {
            let (scores, labels): (Vec<f64>, Vec<u8>) = raw.into_iter().unzip();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));
            let a = auc(&scores, &labels).unwrap();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            prop_assert!((a + auc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (s / 100.0).exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(a, auc(&warped, &labels).unwrap());
        }
    }
}
