//! Maximum-weight bipartite matching (Hungarian method with potentials).

/// Maximum total weight of a matching in the `rows x cols` weight matrix.
///
/// `None` entries are forbidden pairs. Weights must be non-negative, so a
/// maximum-weight matching never needs to use a forbidden pair; returns the
/// optimal value and the chosen `(row, col)` pairs (forbidden pairs dropped).
pub fn max_weight_matching(weights: &[Vec<Option<f64>>]) -> (f64, Vec<(usize, usize)>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, Vec::new());
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        let w = if transpose { weights[j][i] } else { weights[i][j] };
        // forbidden pairs cost as though weight 0; they are filtered below
        -w.unwrap_or(0.0)
    };

    // 1-based arrays as in the classical formulation
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
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
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    let mut total = 0.0;
    for (j, &row) in p.iter().enumerate().skip(1) {
        if row == 0 {
            continue;
        }
        let (r, c) = if transpose { (j - 1, row - 1) } else { (row - 1, j - 1) };
        if let Some(w) = weights[r][c] {
            total += w;
            pairs.push((r, c));
        }
    }
    pairs.sort_unstable();
    (total, pairs)
}

/// Maximum number of allowed pairs that can be matched simultaneously.
pub fn max_cardinality(allowed: &[Vec<bool>]) -> usize {
    let w: Vec<Vec<Option<f64>>> = allowed
        .iter()
        .map(|r| r.iter().map(|&a| a.then_some(1.0)).collect())
        .collect();
    max_weight_matching(&w).1.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty() {
        assert_eq!(max_weight_matching(&[]).0, 0.0);
    }

    #[test]
    fn picks_best_assignment() {
        let w = vec![
            vec![Some(0.9), Some(0.8)],
            vec![Some(0.85), None],
        ];
        let (v, pairs) = max_weight_matching(&w);
        assert!((v - 1.65).abs() < 1e-12);
        assert_eq!(pairs, [(0, 1), (1, 0)]);
    }

    #[test]
    fn rectangular_both_ways() {
        let w = vec![vec![Some(0.1), Some(0.7), Some(0.3)]];
        assert!((max_weight_matching(&w).0 - 0.7).abs() < 1e-12);
        let t = vec![vec![Some(0.1)], vec![Some(0.7)], vec![Some(0.3)]];
        let (v, pairs) = max_weight_matching(&t);
        assert!((v - 0.7).abs() < 1e-12);
        assert_eq!(pairs, [(1, 0)]);
    }

    #[test]
    fn forbidden_pairs_dropped() {
        let w = vec![vec![None, None], vec![None, Some(0.5)]];
        let (v, pairs) = max_weight_matching(&w);
        assert_eq!(v, 0.5);
        assert_eq!(pairs, [(1, 1)]);
    }

    #[test]
    fn cardinality() {
        let a = vec![vec![true, true], vec![true, false]];
        assert_eq!(max_cardinality(&a), 2);
        let b = vec![vec![true, false], vec![true, false]];
        assert_eq!(max_cardinality(&b), 1);
    }
}
