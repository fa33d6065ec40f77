use super::{AlignmentResult, SimilarityMatrix};

/// Row-wise argmax (ties to the smaller sentence index); rows whose best
/// similarity is below `t` stay unmatched.
pub fn minimal_distance_align(s: &SimilarityMatrix, t: f64) -> AlignmentResult {
    let assignment = (0..s.n())
        .map(|i| {
            let row = s.row(i);
            let mut best = 0;
            for j in 1..row.len() {
                if row[j] > row[best] {
                    best = j;
                }
            }
            (row[best] >= t).then_some(best)
        })
        .collect();
    AlignmentResult {
        assignment,
        threshold: t,
    }
}

/// Accumulated cost with a padded border: `c[0][*] = c[*][0] = inf`,
/// `c[1][1] = 0` (the first segment and first sentence are assumed aligned,
/// so their distance is not charged), and otherwise
/// `c[i][j] = min(c[i-1][j], c[i][j-1], c[i-1][j-1]) + 1 - s(i, j)` in
/// 1-based indices.
pub fn dtw_cost_matrix(s: &SimilarityMatrix) -> Vec<Vec<f64>> {
    let (n, m) = (s.n(), s.m());
    let mut c = vec![vec![f64::INFINITY; m + 1]; n + 1];
    for i in 1..=n {
        for j in 1..=m {
            if i == 1 && j == 1 {
                c[1][1] = 0.0;
                continue;
            }
            let prev = c[i - 1][j - 1].min(c[i][j - 1]).min(c[i - 1][j]);
            c[i][j] = prev + (1.0 - s.get(i - 1, j - 1));
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    pub alignment: AlignmentResult,
    /// 0-based (segment, sentence) cells from (0, 0) to (N-1, M-1).
    pub path: Vec<(usize, usize)>,
    pub cost: f64,
}

/// Cost of a path under the same accounting as [`dtw_cost_matrix`]: the
/// distances of every cell after the first, summed in path order.
pub fn path_cost(s: &SimilarityMatrix, path: &[(usize, usize)]) -> f64 {
    path.iter()
        .skip(1)
        .fold(0.0, |acc, &(i, j)| acc + (1.0 - s.get(i, j)))
}

/// Minimum-cost monotone warping path. Backtracking prefers the diagonal,
/// then left, then up; each segment takes the most similar sentence among
/// its path cells, subject to the threshold `t`.
pub fn dtw_align(s: &SimilarityMatrix, t: f64) -> DtwResult {
    let c = dtw_cost_matrix(s);
    let (n, m) = (s.n(), s.m());
    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n, m);
    while (i, j) != (1, 1) {
        let diag = c[i - 1][j - 1];
        let left = c[i][j - 1];
        let up = c[i - 1][j];
        (i, j) = if diag <= left && diag <= up {
            (i - 1, j - 1)
        } else if left <= up {
            (i, j - 1)
        } else {
            (i - 1, j)
        };
        path.push((i - 1, j - 1));
    }
    path.reverse();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    for &(pi, pj) in &path {
        let v = s.get(pi, pj);
        match best[pi] {
            Some((bj, bv)) if bv > v || (bv == v && bj < pj) => {}
            _ => best[pi] = Some((pj, v)),
        }
    }
    let assignment = best
        .into_iter()
        .map(|b| b.and_then(|(j, v)| (v >= t).then_some(j)))
        .collect();
    DtwResult {
        alignment: AlignmentResult {
            assignment,
            threshold: t,
        },
        path,
        cost: c[n][m],
    }
}
