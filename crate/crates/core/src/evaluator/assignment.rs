//! Maximum-weight rectangular assignment (Kuhn-Munkres, shortest augmenting
//! path with potentials). The matrix is padded to square with zero weights.

/// Returns `(total, assignment)` where `assignment[r]` is the column matched
/// to row `r`, or `None` when the row was matched to padding.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    debug_assert!(weights.iter().all(|r| r.len() == cols));
    let n = rows.max(cols);
    if n == 0 {
        return (0.0, vec![None; rows]);
    }
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // 1-based potentials; p[j] is the row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
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

    let mut assignment = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += weights[i - 1][j - 1];
        }
    }
    (total, assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(weights: &[Vec<f64>]) -> f64 {
        fn go(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == weights.len() {
                return 0.0;
            }
            // a row may also stay unmatched
            let mut best = go(weights, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(weights[row][j] + go(weights, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let cols = weights.first().map_or(0, Vec::len);
        go(weights, 0, &mut vec![false; cols])
    }

    #[test]
    fn small_known_case() {
        let w = vec![vec![0.8, 0.5]];
        let (total, a) = max_weight_assignment(&w);
        assert!((total - 0.8).abs() < 1e-12);
        assert_eq!(a, vec![Some(0)]);
    }

    #[test]
    fn empty_sides() {
        assert_eq!(max_weight_assignment(&[]).0, 0.0);
        assert_eq!(max_weight_assignment(&[vec![], vec![]]), (0.0, vec![None, None]));
    }

    #[test]
    fn matches_brute_force_on_random_rectangles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = rng.random_range(1..=6);
            let c = rng.random_range(1..=6);
            let w: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect())
                .collect();
            let (total, a) = max_weight_assignment(&w);
            assert!((total - brute_force(&w)).abs() < 1e-9);
            let mut cols: Vec<usize> = a.iter().flatten().copied().collect();
            let n = cols.len();
            cols.dedup();
            cols.sort();
            cols.dedup();
            assert_eq!(cols.len(), n, "assignment must be one-to-one");
        }
    }
}
