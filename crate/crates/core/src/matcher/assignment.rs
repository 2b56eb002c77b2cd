//! Minimum-cost linear assignment (Kuhn-Munkres with potentials, O(n^2 m)).

/// Solves the rectangular assignment problem for a row-major `rows x cols`
/// cost matrix. Returns, for each row, the assigned column, or `None` for
/// rows left over when `rows > cols`.
pub fn solve(costs: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = costs.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = costs[0].len();
    debug_assert!(costs.iter().all(|r| r.len() == cols));
    if cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        solve_wide(costs, rows, cols)
            .into_iter()
            .map(Some)
            .collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| costs[r][c]).collect())
            .collect();
        let col_to_row = solve_wide(&transposed, cols, rows);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

/// Requires `n <= m`. Every row gets a distinct column.
fn solve_wide(a: &[Vec<f64>], n: usize, m: usize) -> Vec<usize> {
    // 1-based internal indexing; column 0 is a virtual root.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
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

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Sum of the costs of an assignment.
pub fn total_cost(costs: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| costs[r][c]))
        .sum()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over all injective maps of rows into columns.
    pub(crate) fn brute_force_min(costs: &[Vec<f64>]) -> f64 {
        fn rec(costs: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == costs.len() {
                *best = best.min(acc);
                return;
            }
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    rec(costs, row + 1, used, acc + costs[row][c], best);
                    used[c] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        let cols = costs.first().map_or(0, |r| r.len());
        rec(costs, 0, &mut vec![false; cols], 0.0, &mut best);
        best
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| rng.gen_range(0.0..10.0)).collect())
            .collect()
    }

    fn assert_injective(assignment: &[Option<usize>]) {
        let mut seen = std::collections::HashSet::new();
        for c in assignment.iter().flatten() {
            assert!(seen.insert(*c), "column {c} assigned twice");
        }
    }

    #[test]
    fn matches_brute_force_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=6 {
            for _ in 0..30 {
                let m = random_matrix(&mut rng, n, n);
                let a = solve(&m);
                assert_injective(&a);
                assert!(a.iter().all(|c| c.is_some()));
                let got = total_cost(&m, &a);
                assert!((got - brute_force_min(&m)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rectangular_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (r, c) in [(2, 5), (3, 4), (1, 6)] {
            let m = random_matrix(&mut rng, r, c);
            let a = solve(&m);
            assert_injective(&a);
            assert!((total_cost(&m, &a) - brute_force_min(&m)).abs() < 1e-9);
        }
        // more rows than columns: the transposed problem is exhaustive too
        let m = random_matrix(&mut rng, 5, 2);
        let a = solve(&m);
        assert_injective(&a);
        assert_eq!(a.iter().filter(|c| c.is_some()).count(), 2);
        let t: Vec<Vec<f64>> = (0..2).map(|c| (0..5).map(|r| m[r][c]).collect()).collect();
        assert!((total_cost(&m, &a) - brute_force_min(&t)).abs() < 1e-9);
    }

    #[test]
    fn empty_inputs() {
        assert!(solve(&[]).is_empty());
        assert_eq!(solve(&[vec![], vec![]]), vec![None, None]);
    }
}
