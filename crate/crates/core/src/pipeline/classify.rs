//! k-nearest-neighbor evaluation of embedded datasets.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fold index for every sample. Classes are spread evenly over the folds
/// when every class has at least `folds` members; otherwise samples are
/// shuffled and dealt without stratification.
pub fn assign_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if folds > labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds for {} samples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let stratify = by_class.iter().all(|c| c.is_empty() || c.len() >= folds);
    let groups = if stratify {
        by_class
    } else {
        log::warn!("a class has fewer than {folds} samples; folds are not stratified");
        vec![(0..labels.len()).collect()]
    };
    let mut out = vec![0; labels.len()];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for i in group {
            out[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok(out)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Votes among the `k` nearest training rows. Distance ties go to the lower
/// training index and vote ties to the lower class.
pub fn knn_votes(
    train: ArrayView2<f64>,
    train_labels: &[usize],
    query: ArrayView1<f64>,
    k: usize,
    num_classes: usize,
) -> Vec<usize> {
    let mut dist: Vec<(f64, usize)> = train
        .outer_iter()
        .enumerate()
        .map(|(i, row)| (sq_dist(row, query), i))
        .collect();
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    }
    let mut votes = vec![0; num_classes];
    for &(_, i) in &dist[..k] {
        votes[train_labels[i]] += 1;
    }
    votes
}

fn argmax(votes: &[usize]) -> usize {
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Out-of-fold fraction of neighbor votes for class 1 (binary tasks).
    pub scores: Option<Vec<f64>>,
    pub auc: Option<f64>,
}

/// k-NN accuracy under k-fold cross-validation over the rows of `x`.
pub fn knn_cross_validate(
    x: ArrayView2<f64>,
    labels: &[usize],
    k: usize,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    if x.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let fold_of = assign_folds(labels, folds, seed)?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);

    let predictions: Vec<(usize, f64)> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let train: Vec<usize> = (0..x.nrows()).filter(|&j| fold_of[j] != fold_of[i]).collect();
            let train_x = x.select(ndarray::Axis(0), &train);
            let train_y: Vec<usize> = train.iter().map(|&j| labels[j]).collect();
            let votes = knn_votes(train_x.view(), &train_y, x.row(i), k, num_classes);
            let total: usize = votes.iter().sum();
            let score = votes.get(1).map_or(0.0, |&v| v as f64 / total as f64);
            (argmax(&votes), score)
        })
        .collect();

    let mut correct = vec![0usize; folds];
    let mut count = vec![0usize; folds];
    for (i, &(pred, _)) in predictions.iter().enumerate() {
        count[fold_of[i]] += 1;
        if pred == labels[i] {
            correct[fold_of[i]] += 1;
        }
    }
    let fold_accuracies: Vec<f64> = correct
        .iter()
        .zip(&count)
        .map(|(&c, &n)| c as f64 / n as f64)
        .collect();
    let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
    let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / folds as f64;

    let (scores, auc) = if num_classes == 2 {
        let scores: Vec<f64> = predictions.iter().map(|p| p.1).collect();
        let auc = roc_auc(&scores, labels).ok();
        (Some(scores), auc)
    } else {
        (None, None)
    };
    Ok(CvReport {
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        fold_accuracies,
        scores,
        auc,
    })
}

/// Area under the ROC curve of `scores` for labels `{0, 1}`, with midranks
/// for tied scores.
pub fn roc_auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::CategoryOutOfRange { value: y, categories: 2 });
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
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
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&o| labels[o] == 1).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}
