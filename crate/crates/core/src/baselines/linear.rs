use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pca::{pca_fit, Pca};
use crate::error::{Error, Result};
use crate::train::rng_from_seed;

/// Per-feature z-scoring; constant features keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot standardize an empty matrix"));
        }
        let mean = x.mean_axis(Axis(0)).unwrap();
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.mean) / &self.std
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty λ on the weights; `1/C` in SVM terms.
    pub l2: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            epochs: 300,
            learning_rate: 0.1,
            l2: 1e-3,
        }
    }
}

/// One-vs-rest linear classifier with built-in standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `[classes × features]`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub standardizer: Standardizer,
}

impl LinearModel {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn decision(&self, x: &Array2<f64>) -> Array2<f64> {
        self.standardizer.transform(x).dot(&self.weights.t()) + &self.bias
    }
}

/// Full-batch subgradient descent on the mean hinge loss
/// `max(0, 1 − y·(w·x + b)) + λ/2·|w|²`, one head per class.
pub fn linear_fit(x: &Array2<f64>, labels: &[usize], cfg: &LinearConfig) -> Result<LinearModel> {
    let n = x.nrows();
    if n != labels.len() {
        return Err(Error::shape(n, labels.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features"));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let distinct = {
        let mut seen = vec![false; n_classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::invalid("linear classifier needs at least two classes"));
    }
    let standardizer = Standardizer::fit(x)?;
    let xs = standardizer.transform(x);
    let y = Array2::from_shape_fn((n, n_classes), |(i, c)| if labels[i] == c { 1.0 } else { -1.0 });
    let mut w = Array2::<f64>::zeros((n_classes, x.ncols()));
    let mut b = Array1::<f64>::zeros(n_classes);
    for _ in 0..cfg.epochs {
        let scores = xs.dot(&w.t()) + &b;
        let mut g = Array2::<f64>::zeros((n, n_classes));
        for ((gi, &yi), &si) in g.iter_mut().zip(y.iter()).zip(scores.iter()) {
            if yi * si < 1.0 {
                *gi = -yi / n as f64;
            }
        }
        let dw = g.t().dot(&xs) + &(cfg.l2 * &w);
        let db = g.sum_axis(Axis(0));
        w.scaled_add(-cfg.learning_rate, &dw);
        b.scaled_add(-cfg.learning_rate, &db);
    }
    Ok(LinearModel {
        weights: w,
        bias: b,
        standardizer,
    })
}

/// Class with the largest margin; ties go to the lowest index.
pub fn linear_predict(model: &LinearModel, x: &Array2<f64>) -> Vec<usize> {
    model
        .decision(x)
        .rows()
        .into_iter()
        .map(|r| (0..r.len()).fold(0, |m, i| if r[i] > r[m] { i } else { m }))
        .collect()
}

/// Assign every sample to one of `k` folds, class by class, after a seeded
/// shuffle.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from_seed(seed);
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
}

impl CvResult {
    pub fn from_folds(fold_accuracies: Vec<f64>) -> Self {
        let n = fold_accuracies.len().max(1) as f64;
        let mean = fold_accuracies.iter().sum::<f64>() / n;
        let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        CvResult {
            fold_accuracies,
            mean,
            std: var.sqrt(),
        }
    }
}

fn select(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Stratified k-fold accuracy. With `pca_components`, features are
/// standardized and projected with a PCA fitted on each training fold.
pub fn cross_validate(
    x: &Array2<f64>,
    labels: &[usize],
    folds: usize,
    pca_components: Option<usize>,
    cfg: &LinearConfig,
    seed: u64,
) -> Result<CvResult> {
    if folds < 2 {
        return Err(Error::invalid("cross-validation needs at least two folds"));
    }
    if x.nrows() != labels.len() {
        return Err(Error::shape(x.nrows(), labels.len()));
    }
    let assignment = stratified_folds(labels, folds, seed);
    let accs: Vec<f64> = (0..folds)
        .into_par_iter()
        .map(|f| -> Result<f64> {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == f).collect();
            if test.is_empty() {
                return Err(Error::invalid("a fold is empty; use fewer folds"));
            }
            let (mut xtr, mut xte) = (select(x, &train), select(x, &test));
            if let Some(k) = pca_components {
                let s = Standardizer::fit(&xtr)?;
                let p: Pca = pca_fit(&s.transform(&xtr), k)?;
                xtr = p.transform(&s.transform(&xtr))?;
                xte = p.transform(&s.transform(&xte))?;
            }
            let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let model = linear_fit(&xtr, &ytr, cfg)?;
            let pred = linear_predict(&model, &xte);
            let hits = pred.iter().zip(&test).filter(|(p, &i)| **p == labels[i]).count();
            Ok(hits as f64 / test.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(CvResult::from_folds(accs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, sep: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| {
            let centre = if j == 0 { sep * (labels[i] as f64 * 2.0 - 1.0) } else { 0.0 };
            centre + noise.sample(&mut rng)
        });
        (x, labels)
    }

    #[test]
    fn separable_blobs_are_perfect() {
        let (x, y) = blobs(100, 8.0, 1);
        let cv = cross_validate(&x, &y, 5, None, &LinearConfig::default(), 0).unwrap();
        assert_eq!(cv.mean, 1.0);
        assert_eq!(cv.std, 0.0);
        assert_eq!(cv.fold_accuracies.len(), 5);
    }

    #[test]
    fn shuffled_labels_are_near_chance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Array2::from_shape_fn((400, 6), |_| rng.random_range(-1.0..1.0));
        let y: Vec<usize> = (0..400).map(|_| rng.random_range(0..4)).collect();
        let cv = cross_validate(&x, &y, 5, None, &LinearConfig::default(), 0).unwrap();
        assert!((cv.mean - 0.25).abs() < 0.1, "{}", cv.mean);
    }

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<usize> = (0..50).map(|i| i % 5).collect();
        let f = stratified_folds(&labels, 5, 2);
        for fold in 0..5 {
            for c in 0..5 {
                assert_eq!((0..50).filter(|&i| f[i] == fold && labels[i] == c).count(), 2);
            }
        }
        assert_eq!(f, stratified_folds(&labels, 5, 2));
        assert_ne!(f, stratified_folds(&labels, 5, 3));
    }

    #[test]
    fn single_class_is_rejected() {
        let x = Array2::zeros((4, 2));
        assert!(linear_fit(&x, &[1, 1, 1, 1], &LinearConfig::default()).is_err());
    }

    #[test]
    fn pca_path_runs() {
        let (x, y) = blobs(60, 6.0, 4);
        let cv = cross_validate(&x, &y, 3, Some(3), &LinearConfig::default(), 0).unwrap();
        assert!(cv.mean > 0.95);
    }
}
