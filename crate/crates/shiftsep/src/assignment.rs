//! Exact minimum-cost assignment on a square cost matrix (Hungarian
//! algorithm, Jonker-Volgenant potentials variant, O(n^3)).

/// Returns `perm` with `perm[row] = col` minimizing the total cost.
/// Costs must be finite.
pub(crate) fn solve(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    assert!(n > 0, "empty cost matrix");
    debug_assert!(cost.iter().all(|row| row.len() == n));

    // Potentials and matching over a virtual 1-based column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[col] = row (1-based), 0 = free

    for row in 1..=n {
        let mut col0 = 0usize;
        matched_row[0] = row;
        let mut min_to = vec![f64::INFINITY; n + 1];
        let mut prev = vec![0usize; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = matched_row[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0usize;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < min_to[col] {
                    min_to[col] = reduced;
                    prev[col] = col0;
                }
                if min_to[col] < delta {
                    delta = min_to[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[matched_row[col]] += delta;
                    v[col] -= delta;
                } else {
                    min_to[col] -= delta;
                }
            }
            col0 = col1;
            if matched_row[col0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        while col0 != 0 {
            let col1 = prev[col0];
            matched_row[col0] = matched_row[col1];
            col0 = col1;
        }
    }

    let mut perm = vec![0usize; n];
    for col in 1..=n {
        if matched_row[col] > 0 {
            perm[matched_row[col] - 1] = col - 1;
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let n = cost.len();
        let mut cols: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut cols, 0, &mut |perm| {
            let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
            if total < best {
                best = total;
            }
        });
        best
    }

    fn permute(items: &mut Vec<usize>, start: usize, visit: &mut impl FnMut(&[usize])) {
        if start == items.len() {
            visit(items);
            return;
        }
        for i in start..items.len() {
            items.swap(start, i);
            permute(items, start + 1, visit);
            items.swap(start, i);
        }
    }

    #[test]
    fn hand_case() {
        let cost = vec![
            vec![8.0, 5.0, 9.0],
            vec![4.0, 2.0, 4.0],
            vec![7.0, 3.0, 8.0],
        ];
        let perm = solve(&cost);
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        assert_eq!(total, 8.0 + 4.0 + 3.0);
    }

    #[test]
    fn matches_brute_force_up_to_five() {
        let mut state = 0x1234_5678_u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (u32::MAX as f64)
        };
        for n in 1..=5 {
            for _ in 0..40 {
                let cost: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| next()).collect()).collect();
                let perm = solve(&cost);
                let mut seen = vec![false; n];
                for &c in &perm {
                    assert!(!seen[c], "assignment must be a permutation");
                    seen[c] = true;
                }
                let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
                let best = brute_force(&cost);
                assert!((total - best).abs() < 1e-9, "n={n}: {total} vs {best}");
            }
        }
    }
}
