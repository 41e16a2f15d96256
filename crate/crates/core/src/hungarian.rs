//! Min-cost assignment (Hungarian algorithm with potentials).
//!
//! Rows are assigned to distinct columns; requires `rows <= cols`. The
//! surplus columns behave like zero-cost dummy rows, so no explicit padding
//! is needed. O(rows^2 * cols) over integer costs.

/// Returns the column chosen for each row and the total cost.
///
/// # Panics
///
/// Panics if the matrix is ragged or has more rows than columns.
pub fn min_cost_assignment(costs: &[Vec<i64>]) -> (Vec<usize>, i64) {
    let rows = costs.len();
    if rows == 0 {
        return (Vec::new(), 0);
    }
    let cols = costs[0].len();
    assert!(costs.iter().all(|r| r.len() == cols), "ragged cost matrix");
    assert!(rows <= cols, "more rows ({rows}) than columns ({cols})");

    let inf = i64::MAX / 4;
    // 1-based potentials; column 0 is the virtual start.
    let mut u = vec![0i64; rows + 1];
    let mut v = vec![0i64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for r in 1..=rows {
        owner[0] = r;
        let mut j0 = 0usize;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; rows];
    for j in 1..=cols {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| costs[r][c]).sum();
    (assignment, total)
}
