use alloc::format;
use alloc::vec::Vec;

use crate::numerics::euclidean_distance;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnResult {
    pub neighbors: Vec<Neighbor>,
    /// Fewer than the requested number of neighbours exist.
    pub truncated: bool,
}

impl KnnResult {
    pub fn indices(&self) -> Vec<usize> {
        self.neighbors.iter().map(|n| n.index).collect()
    }

    pub fn max_distance(&self) -> Option<f64> {
        self.neighbors.iter().map(|n| n.distance).reduce(f64::max)
    }
}

/// Every other point ordered by Euclidean distance to `query`, ties by index.
pub fn neighbors_by_distance<V: AsRef<[f64]>>(features: &[V], query: usize) -> Result<Vec<Neighbor>> {
    let q = features
        .get(query)
        .ok_or_else(|| Error::InvalidInput(format!("query index {query} out of range")))?
        .as_ref();
    let mut all: Vec<Neighbor> = features
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query)
        .map(|(i, f)| Neighbor {
            index: i,
            distance: euclidean_distance(q, f.as_ref()),
        })
        .collect();
    all.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index)));
    Ok(all)
}

/// The `n` nearest neighbours of `query`, excluding `query` itself.
pub fn knn<V: AsRef<[f64]>>(features: &[V], query: usize, n: usize) -> Result<KnnResult> {
    if n == 0 {
        return Err(Error::InvalidInput("knn needs n >= 1".into()));
    }
    let mut neighbors = neighbors_by_distance(features, query)?;
    let truncated = neighbors.len() < n;
    neighbors.truncate(n);
    Ok(KnnResult { neighbors, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicate_ranks_first_and_query_excluded() {
        let f = vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let r = knn(&f, 2, 3).unwrap();
        assert_eq!(r.neighbors[0], Neighbor { index: 3, distance: 0.0 });
        assert!(!r.indices().contains(&2));
        assert!(!r.truncated);
    }

    #[test]
    fn matches_exhaustive_scan() {
        let f = vec![vec![0.0, 1.0], vec![2.0, 2.0], vec![-1.0, 0.5]];
        let r = knn(&f, 0, 1).unwrap();
        let brute = (0..3)
            .filter(|&i| i != 0)
            .min_by(|&a, &b| {
                euclidean_distance(&f[0], &f[a]).total_cmp(&euclidean_distance(&f[0], &f[b]))
            })
            .unwrap();
        assert_eq!(r.indices(), vec![brute]);
    }

    #[test]
    fn truncation_flag() {
        let f = vec![vec![0.0], vec![1.0], vec![2.0]];
        let r = knn(&f, 0, 5).unwrap();
        assert!(r.truncated);
        assert_eq!(r.indices(), vec![1, 2]);
        assert!(knn(&f, 0, 0).is_err());
        assert!(knn(&f, 7, 1).is_err());
    }

    #[test]
    fn ties_broken_by_index() {
        let f = vec![vec![0.0], vec![1.0], vec![-1.0]];
        assert_eq!(knn(&f, 0, 2).unwrap().indices(), vec![1, 2]);
    }
}
