//! Density-based clustering over planar points.

use crate::geometry::Point2;

/// DBSCAN with inclusive `eps` neighborhoods counting the point itself.
/// Returns one label per input point, `None` for noise. Clusters are numbered
/// in order of their first core point, so the output depends only on input
/// order.
pub fn dbscan(points: &[Point2], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| points[i].distance(&points[j]) <= eps)
            .collect()
    };
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    let mut next = 0;
    for i in 0..n {
        if visited[i] {
            continue;
        }
        visited[i] = true;
        let seeds = neighbors(i);
        if seeds.len() < min_pts.max(1) {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = Some(cluster);
        let mut queue = seeds;
        let mut k = 0;
        while k < queue.len() {
            let j = queue[k];
            k += 1;
            if labels[j].is_none() {
                labels[j] = Some(cluster);
            }
            if visited[j] {
                continue;
            }
            visited[j] = true;
            let nb = neighbors(j);
            if nb.len() >= min_pts.max(1) {
                queue.extend(nb);
            }
        }
    }
    labels
}

/// Groups point indices by cluster label, dropping noise.
pub fn groups(labels: &[Option<usize>]) -> Vec<Vec<usize>> {
    let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(c) = l {
            out[*c].push(i);
        }
    }
    out
}
