use super::diversity::sq_euclidean;
use crate::error::{usage, Result};
use crate::seed;
use crate::{MatRef, Matrix};
use rand::Rng;

pub const KMEANS_MAX_ITER: usize = 100;
/// Independent k-means++ starts; the lowest within-cluster sum of squares wins.
pub const KMEANS_RESTARTS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
}

struct Points {
    data: Vec<f64>,
    d: usize,
}

impl Points {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Lloyd's algorithm from k-means++ seeding, run until the assignment is a
/// fixpoint or `KMEANS_MAX_ITER` sweeps. Empty clusters are reseeded at the
/// point farthest from its own centroid.
pub fn kmeans(points: MatRef<'_, f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let m = points.nrows();
    if k == 0 || k > m {
        return Err(usage(format!("kmeans: need 1 <= k <= {m} points, got k = {k}")));
    }
    let d = points.ncols();
    let pts = Points {
        data: (0..m).flat_map(|i| (0..d).map(move |j| points[(i, j)])).collect(),
        d,
    };
    let mut best: Option<(Vec<usize>, Vec<f64>, f64)> = None;
    for r in 0..KMEANS_RESTARTS {
        let run = lloyd(&pts, m, k, seed::derive(seed, r));
        if best.as_ref().is_none_or(|b| run.2 < b.2) {
            best = Some(run);
        }
    }
    let (assignments, centroids, wcss) = best.expect("at least one restart");
    Ok(KMeansResult {
        assignments,
        centroids: Matrix::from_fn(k, d, |c, j| centroids[c * d + j]),
        wcss,
    })
}

fn nearest(pts: &Points, i: usize, centroids: &[f64]) -> (usize, f64) {
    let d = pts.d;
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centroids.chunks_exact(d).enumerate() {
        let dist = sq_euclidean(pts.row(i), centre);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn plus_plus(pts: &Points, m: usize, k: usize, rng: &mut seed::Rng) -> Vec<f64> {
    let d = pts.d;
    let mut chosen = vec![false; m];
    let first = rng.random_range(0..m);
    chosen[first] = true;
    let mut centroids = pts.row(first).to_vec();
    let mut d2: Vec<f64> = (0..m).map(|i| sq_euclidean(pts.row(i), pts.row(first))).collect();
    while centroids.len() < k * d {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total weight")
        } else {
            // all remaining points coincide with a centre
            (0..m).find(|&i| !chosen[i]).expect("k <= m")
        };
        chosen[next] = true;
        centroids.extend_from_slice(pts.row(next));
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_euclidean(pts.row(i), pts.row(next)));
        }
    }
    centroids
}

fn lloyd(pts: &Points, m: usize, k: usize, run_seed: u64) -> (Vec<usize>, Vec<f64>, f64) {
    let d = pts.d;
    let mut rng = seed::rng(run_seed);
    let mut centroids = plus_plus(pts, m, k, &mut rng);
    let mut assign = vec![usize::MAX; m];
    let mut dist = vec![0.0; m];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for i in 0..m {
            let (c, dd) = nearest(pts, i, &centroids);
            dist[i] = dd;
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        repair_empty(pts, &mut assign, &mut dist, &centroids, k);
        centroids = means(pts, &assign, k);
    }
    let wcss = (0..m).map(|i| sq_euclidean(pts.row(i), &centroids[assign[i] * d..(assign[i] + 1) * d])).sum();
    (assign, centroids, wcss)
}

fn repair_empty(pts: &Points, assign: &mut [usize], dist: &mut [f64], centroids: &[f64], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assign.iter() {
        sizes[a] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        for i in 0..assign.len() {
            if sizes[assign[i]] > 1 && far.is_none_or(|f: usize| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        if let Some(i) = far {
            sizes[assign[i]] -= 1;
            sizes[c] = 1;
            assign[i] = c;
            dist[i] = 0.0;
        }
    }
    let _ = (pts, centroids);
}

fn means(pts: &Points, assign: &[usize], k: usize) -> Vec<f64> {
    let d = pts.d;
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(pts.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        for s in &mut sums[c * d..(c + 1) * d] {
            *s /= counts[c].max(1) as f64;
        }
    }
    sums
}
