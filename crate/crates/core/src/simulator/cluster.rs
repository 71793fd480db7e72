//! Average-linkage agglomerative clustering.
//!
//! The dendrogram is built once per catalog with the nearest-neighbour-chain
//! algorithm over a condensed Euclidean distance matrix (O(n²) memory and
//! time). Average linkage is reducible, so merge heights along any root path
//! are non-decreasing and "the cluster of `x` at threshold `t`" is the
//! highest ancestor of `x` whose merge height is at most `t`.

use alloc::vec;
use alloc::vec::Vec;

use super::knn::Neighbor;
use crate::numerics::euclidean_distance;
use crate::{Error, Result};

/// One merge: `left` and `right` are node ids (`< n` for leaves, `n + i` for
/// the cluster created by merge `i`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    leaves: usize,
    merges: Vec<Merge>,
    parent: Vec<usize>,
}

struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

impl Dendrogram {
    /// Average linkage over Euclidean distances between `points`.
    pub fn average_linkage<V: AsRef<[f64]>>(points: &[V]) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::InvalidInput("cannot cluster an empty set".into()));
        }
        let mut dist = Condensed {
            n,
            d: Vec::with_capacity(n * (n - 1) / 2),
        };
        for i in 0..n {
            for j in i + 1..n {
                dist.d.push(euclidean_distance(points[i].as_ref(), points[j].as_ref()));
            }
        }
        Ok(Self::from_raw_merges(n, nn_chain(&mut dist)))
    }

    /// Builds the tree from merges given as (slot a, slot b, height), where a
    /// merged cluster keeps the slot of its larger-index operand.
    fn from_raw_merges(n: usize, mut raw: Vec<(usize, usize, f64)>) -> Self {
        // NN-chain emits merges out of order; replay them by height.
        raw.sort_by(|x, y| x.2.total_cmp(&y.2));
        let mut uf: Vec<usize> = (0..n).collect();
        let mut node_of: Vec<usize> = (0..n).collect();
        let mut size = vec![1usize; n];
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        let mut parent = vec![usize::MAX; 2 * n - 1];
        fn find(uf: &mut [usize], mut x: usize) -> usize {
            while uf[x] != x {
                uf[x] = uf[uf[x]];
                x = uf[x];
            }
            x
        }
        for (a, b, h) in raw {
            let ra = find(&mut uf, a);
            let rb = find(&mut uf, b);
            let (na, nb) = (node_of[ra], node_of[rb]);
            let (left, right) = if na < nb { (na, nb) } else { (nb, na) };
            let new_node = n + merges.len();
            let s = size[ra] + size[rb];
            merges.push(Merge {
                left,
                right,
                height: h,
                size: s,
            });
            parent[left] = new_node;
            parent[right] = new_node;
            uf[ra] = rb;
            size[rb] = s;
            node_of[rb] = new_node;
        }
        Self {
            leaves: n,
            merges,
            parent,
        }
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Leaves of the cluster containing `leaf` when the tree is cut at
    /// `threshold`, sorted ascending.
    pub fn cluster_of(&self, leaf: usize, threshold: f64) -> Vec<usize> {
        let mut node = leaf;
        loop {
            let p = self.parent[node];
            if p == usize::MAX || self.merges[p - self.leaves].height > threshold {
                break;
            }
            node = p;
        }
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.leaves {
                out.push(x);
            } else {
                let m = &self.merges[x - self.leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    /// Flat cluster labels for a cut at `threshold` (label = smallest member).
    pub fn cut(&self, threshold: f64) -> Vec<usize> {
        let mut labels = vec![usize::MAX; self.leaves];
        for leaf in 0..self.leaves {
            if labels[leaf] != usize::MAX {
                continue;
            }
            let members = self.cluster_of(leaf, threshold);
            let label = members[0];
            for m in members {
                labels[m] = label;
            }
        }
        labels
    }
}

fn nn_chain(dist: &mut Condensed) -> Vec<(usize, usize, f64)> {
    let n = dist.n;
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));

    for _ in 1..n {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        let (a, b, d) = loop {
            let a = *chain.last().unwrap();
            let prev = if chain.len() >= 2 { Some(chain[chain.len() - 2]) } else { None };
            // Prefer the previous chain element on ties so the chain terminates.
            let (mut best, mut best_d) = match prev {
                Some(p) => (p, dist.get(a, p)),
                None => (usize::MAX, f64::INFINITY),
            };
            for k in 0..n {
                if !active[k] || k == a {
                    continue;
                }
                let dk = dist.get(a, k);
                if dk < best_d {
                    best = k;
                    best_d = dk;
                }
            }
            if Some(best) == prev {
                chain.pop();
                chain.pop();
                break (a, best, best_d);
            }
            chain.push(best);
        };
        // The merged cluster lives in the larger slot.
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        out.push((lo, hi, d));
        let (s_lo, s_hi) = (size[lo] as f64, size[hi] as f64);
        active[lo] = false;
        for k in 0..n {
            if !active[k] || k == hi {
                continue;
            }
            let v = (s_lo * dist.get(k, lo) + s_hi * dist.get(k, hi)) / (s_lo + s_hi);
            dist.set(k, hi, v);
        }
        size[hi] += size[lo];
        // A merged cluster's chain successors stay valid for reducible linkages.
        chain.retain(|&c| c != lo && c != hi);
    }
    out
}

/// Exploration candidates for a click: the clicked product's cluster when the
/// dendrogram is cut at `multiplier × max KNN distance`, minus the clicked
/// product and the KNN results. Sorted ascending.
pub fn explore_cluster(
    dendrogram: &Dendrogram,
    clicked: usize,
    knn_result: &[Neighbor],
    multiplier: f64,
) -> Result<Vec<usize>> {
    let max_d = knn_result
        .iter()
        .map(|n| n.distance)
        .reduce(f64::max)
        .ok_or_else(|| Error::InvalidInput("exploration needs a non-empty KNN result".into()))?;
    if clicked >= dendrogram.leaves() {
        return Err(Error::InvalidInput("clicked index out of range".into()));
    }
    let threshold = multiplier * max_d;
    Ok(dendrogram
        .cluster_of(clicked, threshold)
        .into_iter()
        .filter(|&i| i != clicked && !knn_result.iter().any(|n| n.index == i))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    /// Naive O(n³) average linkage: repeatedly merge the closest pair of
    /// clusters by mean pairwise distance.
    fn naive_heights(points: &[Vec<f64>]) -> Vec<f64> {
        let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
        let mut heights = Vec::new();
        while clusters.len() > 1 {
            let mut best = (0, 1, f64::INFINITY);
            for i in 0..clusters.len() {
                for j in i + 1..clusters.len() {
                    let mut s = 0.0;
                    for &a in &clusters[i] {
                        for &b in &clusters[j] {
                            s += euclidean_distance(&points[a], &points[b]);
                        }
                    }
                    let d = s / (clusters[i].len() * clusters[j].len()) as f64;
                    if d < best.2 {
                        best = (i, j, d);
                    }
                }
            }
            let merged = clusters.remove(best.1);
            clusters[best.0].extend(merged);
            heights.push(best.2);
        }
        heights
    }

    fn lcg_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (s >> 11) as f64 / (1u64 << 53) as f64
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn heights_match_naive_average_linkage() {
        for seed in 0..5 {
            let pts = lcg_points(25, 3, seed);
            let d = Dendrogram::average_linkage(&pts).unwrap();
            let got: Vec<f64> = d.merges().iter().map(|m| m.height).collect();
            let want = naive_heights(&pts);
            assert_eq!(got.len(), want.len());
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "{g} vs {w}");
            }
            assert_eq!(d.merges().last().unwrap().size, 25);
        }
    }

    fn two_blobs() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.0],
            vec![0.3, 0.1],
            vec![0.1, 0.4],
            vec![0.4, 0.3],
            vec![0.2, 0.2],
            vec![10.0, 10.0],
            vec![10.2, 10.1],
            vec![10.1, 10.4],
            vec![9.8, 10.2],
            vec![10.3, 9.9],
        ]
    }

    #[test]
    fn two_blob_cut() {
        let pts = two_blobs();
        let d = Dendrogram::average_linkage(&pts).unwrap();
        // Blob diameters are < 0.6; blobs are ~14 apart.
        assert_eq!(d.cluster_of(0, 2.0), vec![0, 1, 2, 3, 4]);
        assert_eq!(d.cluster_of(7, 2.0), vec![5, 6, 7, 8, 9]);
        let labels = d.cut(2.0);
        assert_eq!(labels.iter().collect::<BTreeSet<_>>().len(), 2);

        let knn = [Neighbor { index: 4, distance: 0.2828 }];
        let cands = explore_cluster(&d, 0, &knn, 5.0).unwrap();
        assert_eq!(cands, vec![1, 2, 3]);
    }

    #[test]
    fn degenerate_cuts() {
        let pts = two_blobs();
        let d = Dendrogram::average_linkage(&pts).unwrap();
        let knn = [Neighbor { index: 4, distance: 1.0 }];
        let all = explore_cluster(&d, 0, &knn, 1e6).unwrap();
        assert_eq!(all, vec![1, 2, 3, 5, 6, 7, 8, 9]);
        let smallest = d.merges()[0].height;
        let none = explore_cluster(&d, 0, &[Neighbor { index: 4, distance: smallest / 4.0 }], 2.0).unwrap();
        assert!(none.is_empty());
        assert!(explore_cluster(&d, 0, &[], 2.0).is_err());
    }

    #[test]
    fn single_point() {
        let d = Dendrogram::average_linkage(&[vec![1.0]]).unwrap();
        assert!(d.merges().is_empty());
        assert_eq!(d.cluster_of(0, 10.0), vec![0]);
    }
}
