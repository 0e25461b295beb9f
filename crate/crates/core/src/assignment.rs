//! Square linear assignment by the Hungarian method (shortest augmenting paths with potentials).

/// Optimal assignment of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `row_to_col[i]` is the column assigned to row `i`.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost perfect matching of a square cost matrix with finite entries.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        };
    }
    // 1-based arrays; column 0 is a virtual start node.
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
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Assignment { row_to_col, cost: total }
}

/// Optimal assignment; among equal-cost optima the lexicographically smallest `row_to_col`.
pub fn hungarian_lexicographic(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let best = hungarian(cost).cost;
    let tol = 1e-12 * (1.0 + best.abs());
    let mut fixed_cost = 0.0;
    let mut row_to_col = Vec::with_capacity(n);
    let mut free_cols: Vec<usize> = (0..n).collect();
    for r in 0..n {
        let mut chosen = None;
        for (pos, &c) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let sub: Vec<Vec<f64>> = (r + 1..n).map(|i| rest_cols.iter().map(|&j| cost[i][j]).collect()).collect();
            let total = fixed_cost + cost[r][c] + hungarian(&sub).cost;
            if total <= best + tol {
                chosen = Some((pos, c));
                break;
            }
        }
        // Rounding can in principle reject every column; fall back to the plain optimum.
        let Some((pos, c)) = chosen else {
            return hungarian(cost);
        };
        fixed_cost += cost[r][c];
        row_to_col.push(c);
        free_cols.remove(pos);
    }
    let total = row_to_col.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Assignment { row_to_col, cost: total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_problem() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.row_to_col, vec![1, 0, 2]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let c = vec![vec![1.0; 3]; 3];
        assert_eq!(hungarian_lexicographic(&c).row_to_col, vec![0, 1, 2]);
        let c = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(hungarian_lexicographic(&c).row_to_col, vec![0, 1]);
    }
}
