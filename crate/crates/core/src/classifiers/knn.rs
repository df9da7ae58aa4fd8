use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{argmax_count, ClassifierError, Result};
use crate::dataset::Dataset;

/// k-nearest neighbours under Euclidean distance. Fitting only stores the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    rows: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    k: usize,
}

pub fn fit_knn(data: &Dataset, k: usize) -> Result<KnnModel> {
    if k == 0 || k > data.n_rows() {
        return Err(ClassifierError::Param(format!(
            "k = {k} must lie in [1, {}]",
            data.n_rows()
        )));
    }
    Ok(KnnModel {
        rows: data.features().clone(),
        labels: data.labels().to_vec(),
        n_classes: data.n_classes(),
        k,
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_stored(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Majority among the k nearest; distance ties go to the lower row
    /// index and vote ties to the lower class code.
    pub fn predict_row(&self, row: &[f64]) -> usize {
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in &dist[..self.k] {
            votes[self.labels[i]] += 1;
        }
        argmax_count(&votes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::testutil::dataset;

    #[test]
    fn majority_of_three() {
        let d = dataset(&[[0.0], [0.1], [0.2], [5.0], [5.1]], &[0, 0, 1, 1, 1]);
        let m = fit_knn(&d, 3).unwrap();
        assert_eq!(m.predict_row(&[0.05]), 0);
        assert_eq!(m.n_stored(), 5);
    }

    #[test]
    fn k_bounds() {
        let d = dataset(&[[0.0], [1.0]], &[0, 1]);
        assert!(fit_knn(&d, 1).is_ok());
        assert!(fit_knn(&d, 2).is_ok());
        assert!(matches!(fit_knn(&d, 0), Err(ClassifierError::Param(_))));
        assert!(matches!(fit_knn(&d, 3), Err(ClassifierError::Param(_))));
    }

    #[test]
    fn vote_tie_goes_to_lowest_code() {
        let d = dataset(&[[-1.0], [1.0]], &[1, 0]);
        assert_eq!(fit_knn(&d, 2).unwrap().predict_row(&[0.0]), 0);
    }
}
