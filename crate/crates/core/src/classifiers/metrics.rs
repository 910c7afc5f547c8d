/// Fraction of `predictions` equal to `labels`.
pub fn accuracy(predictions: &[u8], labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return f64::NAN;
    }
    let hits = predictions.iter().zip(labels).filter(|(a, b)| a == b).count();
    hits as f64 / labels.len() as f64
}

/// Area under the ROC curve via the rank-sum statistic, with average ranks
/// for tied scores. NaN when only one class is present.
pub fn auc(scores: &[f64], labels: &[u8]) -> f64 {
    let n1 = labels.iter().filter(|&&y| y == 1).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie group i..=j shares their mean
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let n1 = n1 as f64;
    (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0 as f64)
}
