use crate::data::select_rows;
use crate::error::{usage, Result};
use crate::{MatRef, Matrix};

/// Labeled/candidate partition of a learning set.
///
/// Both index lists are kept sorted ascending, so training on the labeled set
/// always sees rows in learning-set order.
#[derive(Debug, Clone)]
pub struct PoolState<'a> {
    features: MatRef<'a, f64>,
    targets: &'a [f64],
    labeled: Vec<usize>,
    candidates: Vec<usize>,
}

impl<'a> PoolState<'a> {
    pub fn new(features: MatRef<'a, f64>, targets: &'a [f64], labeled: &[usize]) -> Result<Self> {
        let n = features.nrows();
        if targets.len() != n {
            return Err(usage(format!("pool: {n} feature rows but {} targets", targets.len())));
        }
        let mut is_labeled = vec![false; n];
        for &i in labeled {
            if i >= n {
                return Err(usage(format!("pool: labeled index {i} out of range 0..{n}")));
            }
            if is_labeled[i] {
                return Err(usage(format!("pool: labeled index {i} given twice")));
            }
            is_labeled[i] = true;
        }
        let (mut lab, mut cand) = (Vec::with_capacity(labeled.len()), Vec::with_capacity(n - labeled.len()));
        for (i, &l) in is_labeled.iter().enumerate() {
            if l {
                lab.push(i);
            } else {
                cand.push(i);
            }
        }
        Ok(Self {
            features,
            targets,
            labeled: lab,
            candidates: cand,
        })
    }

    pub fn features(&self) -> MatRef<'a, f64> {
        self.features
    }

    pub fn targets(&self) -> &'a [f64] {
        self.targets
    }

    pub fn n_total(&self) -> usize {
        self.features.nrows()
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn labeled_features(&self) -> Matrix {
        select_rows(self.features, &self.labeled)
    }

    pub fn labeled_targets(&self) -> Vec<f64> {
        self.labeled.iter().map(|&i| self.targets[i]).collect()
    }

    pub fn candidate_features(&self) -> Matrix {
        select_rows(self.features, &self.candidates)
    }

    /// Moves `batch` from the candidate set to the labeled set.
    pub fn label(&mut self, batch: &[usize]) -> Result<()> {
        let mut moving = batch.to_vec();
        moving.sort_unstable();
        if moving.windows(2).any(|w| w[0] == w[1]) {
            return Err(usage("pool: batch contains a repeated index"));
        }
        for &i in &moving {
            if self.candidates.binary_search(&i).is_err() {
                return Err(usage(format!("pool: index {i} is not a candidate")));
            }
        }
        self.candidates.retain(|i| moving.binary_search(i).is_err());
        self.labeled.extend_from_slice(&moving);
        self.labeled.sort_unstable();
        Ok(())
    }
}
