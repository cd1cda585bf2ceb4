//! Minimum-cost rectangular assignment (Kuhn-Munkres with potentials).

/// Optimal one-to-one assignment minimizing total cost over a rows×cols
/// matrix. Returns `min(rows, cols)` (row, col) pairs sorted by row.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|j| (0..rows).map(|i| cost[i][j]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = min_cost_assignment(&transposed)
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

pub fn assignment_cost(cost: &[Vec<f64>], pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(i, j)| cost[i][j]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let rows = cost.len();
        let cols = cost[0].len();
        let k = rows.min(cols);
        let mut best = f64::INFINITY;
        let mut used = vec![false; cols.max(rows)];
        fn rec(
            cost: &[Vec<f64>],
            transpose: bool,
            i: usize,
            k: usize,
            used: &mut [bool],
            acc: f64,
            best: &mut f64,
        ) {
            if i == k {
                *best = best.min(acc);
                return;
            }
            let other = if transpose { cost.len() } else { cost[0].len() };
            for j in 0..other {
                if !used[j] {
                    used[j] = true;
                    let c = if transpose { cost[j][i] } else { cost[i][j] };
                    rec(cost, transpose, i + 1, k, used, acc + c, best);
                    used[j] = false;
                }
            }
        }
        rec(cost, rows > cols, 0, k, &mut used, 0.0, &mut best);
        best
    }

    #[test]
    fn textbook_three_by_three() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let pairs = min_cost_assignment(&cost);
        assert_eq!(pairs, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(assignment_cost(&cost, &pairs), 5.0);
    }

    #[test]
    fn matches_brute_force_on_rectangles() {
        let mut rng = crate::util::rng(11);
        for _ in 0..200 {
            let r = rng.random_range(1..=6);
            let c = rng.random_range(1..=6);
            let cost: Vec<Vec<f64>> = (0..r)
                .map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let pairs = min_cost_assignment(&cost);
            assert_eq!(pairs.len(), r.min(c));
            let mut rows: Vec<_> = pairs.iter().map(|p| p.0).collect();
            let mut cols: Vec<_> = pairs.iter().map(|p| p.1).collect();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            assert_eq!(rows.len(), pairs.len());
            assert_eq!(cols.len(), pairs.len());
            assert!((assignment_cost(&cost, &pairs) - brute_force(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_input() {
        assert!(min_cost_assignment(&[]).is_empty());
        assert!(min_cost_assignment(&[vec![]]).is_empty());
    }
}
