//! Maximum-weight bipartite assignment (Hungarian method) with a per-call
//! acceptance gate.

use nalgebra::DMatrix;

use crate::costs::SimilarityMatrix;

/// How a level's threshold is applied to a similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GateMode {
    /// Accept when `1 - similarity <= threshold`.
    #[default]
    MaxCost,
    /// Accept when `similarity >= threshold`.
    MinSimilarity,
}

impl GateMode {
    pub fn admits(self, similarity: f64, threshold: f64) -> bool {
        match self {
            GateMode::MaxCost => 1.0 - similarity <= threshold,
            GateMode::MinSimilarity => similarity >= threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub detection: usize,
    pub track: usize,
    pub similarity: f64,
}

/// Indices are the caller's, taken from the matrix index maps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AssignmentResult {
    pub matches: Vec<Match>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracks: Vec<usize>,
}

/// Optimal one-to-one assignment followed by the distance gate: any pair with
/// `1 - similarity > gate` is dissolved into the unmatched sets.
pub fn solve(m: &SimilarityMatrix, gate: f64) -> AssignmentResult {
    solve_with(m, gate, GateMode::MaxCost)
}

pub fn solve_with(m: &SimilarityMatrix, gate: f64, mode: GateMode) -> AssignmentResult {
    let (rows, cols) = m.shape();
    let pairs = optimal_assignment(&m.values);

    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    let mut matches = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let similarity = m.values[(i, j)];
        if mode.admits(similarity, gate) {
            row_used[i] = true;
            col_used[j] = true;
            matches.push(Match {
                detection: m.det_index[i],
                track: m.track_index[j],
                similarity,
            });
        }
    }
    AssignmentResult {
        matches,
        unmatched_detections: (0..rows)
            .filter(|&i| !row_used[i])
            .map(|i| m.det_index[i])
            .collect(),
        unmatched_tracks: (0..cols)
            .filter(|&j| !col_used[j])
            .map(|j| m.track_index[j])
            .collect(),
    }
}

/// Row/column pairs of a maximum-total-weight assignment, sorted by row.
///
/// The matrix is padded to square with a sentinel cost above every real cost;
/// pairs landing on padding are dropped, so `min(rows, cols)` pairs come back.
/// Among optimal assignments the result is canonicalized by exact pairwise
/// exchanges toward lower row, then lower column indices.
pub fn optimal_assignment(weights: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (rows, cols) = weights.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let n = rows.max(cols);
    let top = weights.iter().cloned().fold(1.0f64, f64::max);
    let sentinel = top + 1.0;
    let cost = |i: usize, j: usize| {
        if i < rows && j < cols {
            top - weights[(i, j)]
        } else {
            sentinel
        }
    };

    let row_to_col = hungarian(n, cost);
    let mut assigned: Vec<Option<usize>> = (0..rows)
        .map(|i| Some(row_to_col[i]).filter(|&j| j < cols))
        .collect();
    canonicalize(weights, &mut assigned);
    assigned
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| (i, j)))
        .collect()
}

/// Shortest augmenting path Hungarian method on an `n x n` cost function.
/// Returns the column assigned to each row.
fn hungarian(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    // 1-based potentials; index 0 is the virtual source column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if col_owner[j] > 0 {
            row_to_col[col_owner[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Applies weight-preserving exchanges until none lowers the assignment in
/// row-major lexicographic order (unmatched sorts last). Each move strictly
/// decreases that order, so the loop terminates.
fn canonicalize(w: &DMatrix<f64>, assigned: &mut [Option<usize>]) {
    let (rows, cols) = w.shape();
    loop {
        let mut changed = false;
        let mut col_taken = vec![false; cols];
        for j in assigned.iter().flatten() {
            col_taken[*j] = true;
        }

        'scan: for i1 in 0..rows {
            match assigned[i1] {
                Some(j1) => {
                    // a free lower column with equal weight
                    if let Some(j) = (0..j1).find(|&j| !col_taken[j] && w[(i1, j)] == w[(i1, j1)]) {
                        assigned[i1] = Some(j);
                        changed = true;
                        break 'scan;
                    }
                    // swap with a later row holding a lower column
                    for i2 in i1 + 1..rows {
                        if let Some(j2) = assigned[i2] {
                            if j2 < j1 && w[(i1, j2)] + w[(i2, j1)] == w[(i1, j1)] + w[(i2, j2)] {
                                assigned[i1] = Some(j2);
                                assigned[i2] = Some(j1);
                                changed = true;
                                break 'scan;
                            }
                        }
                    }
                }
                None => {
                    // take over a column from a later row at equal weight
                    for i2 in i1 + 1..rows {
                        if let Some(j2) = assigned[i2] {
                            if w[(i1, j2)] == w[(i2, j2)] {
                                assigned[i1] = Some(j2);
                                assigned[i2] = None;
                                changed = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
        if !changed {
            return;
        }
    }
}
