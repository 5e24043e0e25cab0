//! Exact minimum-cost perfect matching on square cost matrices.
//!
//! The solver is the O(q³) shortest-augmenting-path Hungarian method with
//! row/column potentials. A second pass walks the equality subgraph of the
//! optimal potentials to return the lexicographically smallest optimal
//! assignment, so results do not depend on augmentation order.

use crate::error::{Error, Result};

/// Square matrix of finite non-negative costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    q: usize,
    costs: Vec<f64>,
}

impl CostMatrix {
    pub fn new(q: usize, costs: Vec<f64>) -> Result<Self> {
        if q == 0 {
            return Err(Error::Input("cost matrix must be at least 1x1".into()));
        }
        if costs.len() != q * q {
            return Err(Error::Input(format!(
                "expected {} entries for a {q}x{q} matrix, found {}",
                q * q,
                costs.len()
            )));
        }
        if let Some(bad) = costs.iter().find(|c| !c.is_finite() || **c < 0.0) {
            return Err(Error::Input(format!(
                "cost entries must be finite and non-negative, found {bad}"
            )));
        }
        Ok(CostMatrix { q, costs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::Input("cost matrix must be square".into()));
        }
        Self::new(q, rows.iter().flatten().copied().collect())
    }

    pub fn size(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.q + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.costs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingResult {
    pub total_cost: f64,
    /// Row `i` is matched to column `assignment[i]`.
    pub assignment: Vec<usize>,
}

/// Sum of matched entries, accumulated in row order.
fn assignment_cost(q: usize, costs: &[f64], assignment: &[usize]) -> f64 {
    (0..q).map(|i| costs[i * q + assignment[i]]).sum()
}

struct Potentials {
    assignment: Vec<usize>,
    row: Vec<f64>,
    col: Vec<f64>,
}

fn hungarian(q: usize, c: &[f64]) -> Potentials {
    // 1-based arrays; index 0 is the virtual source column.
    let mut u = vec![0.0f64; q + 1];
    let mut v = vec![0.0f64; q + 1];
    let mut owner = vec![0usize; q + 1];
    let mut way = vec![0usize; q + 1];
    let mut minv = vec![0.0f64; q + 1];
    let mut used = vec![false; q + 1];
    for i in 1..=q {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &c[(i0 - 1) * q..i0 * q];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=q {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=q {
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
    let mut assignment = vec![0usize; q];
    for j in 1..=q {
        assignment[owner[j] - 1] = j - 1;
    }
    Potentials {
        assignment,
        row: u[1..].to_vec(),
        col: v[1..].to_vec(),
    }
}

/// Minimum total cost only; used on the hot path of the distance engine.
pub(crate) fn min_cost_value(q: usize, costs: &[f64]) -> f64 {
    match q {
        0 => 0.0,
        1 => costs[0],
        _ => {
            let p = hungarian(q, costs);
            assignment_cost(q, costs, &p.assignment)
        }
    }
}

/// Rematch rows so that `row` takes column `col`, using only `tight` edges and
/// only rows after `row`. Returns false (leaving `assign` untouched) if impossible.
fn reroute(
    q: usize,
    tight: &[Vec<usize>],
    assign: &mut [usize],
    col_owner: &mut [usize],
    row: usize,
    col: usize,
) -> bool {
    let target = assign[row];
    let start = col_owner[col];
    // BFS over rows; a row reached through column c currently owns c and
    // hands it to the row it was reached from.
    let mut parent = vec![usize::MAX; q];
    let mut seen = vec![false; q];
    let mut queue = std::collections::VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    let mut end = None;
    'search: while let Some(r) = queue.pop_front() {
        for &c in &tight[r] {
            if c == col {
                continue;
            }
            if c == target {
                end = Some(r);
                break 'search;
            }
            let next = col_owner[c];
            if next > row && !seen[next] {
                seen[next] = true;
                parent[next] = r;
                queue.push_back(next);
            }
        }
    }
    let Some(mut r) = end else {
        return false;
    };
    let mut take = target;
    loop {
        let released = assign[r];
        assign[r] = take;
        col_owner[take] = r;
        if r == start {
            break;
        }
        take = released;
        r = parent[r];
    }
    assign[row] = col;
    col_owner[col] = row;
    true
}

/// Exact minimum-cost perfect matching; ties resolve to the lexicographically
/// smallest assignment.
pub fn min_cost_matching(c: &CostMatrix) -> MatchingResult {
    let q = c.q;
    let costs = &c.costs;
    let p = hungarian(q, costs);
    let base_cost = assignment_cost(q, costs, &p.assignment);

    let scale = costs.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-11 * scale;
    let mut tight: Vec<Vec<usize>> = vec![Vec::new(); q];
    for i in 0..q {
        for j in 0..q {
            let reduced = costs[i * q + j] - p.row[i] - p.col[j];
            if reduced <= tol || p.assignment[i] == j {
                tight[i].push(j);
            }
        }
    }
    let mut assign = p.assignment.clone();
    let mut col_owner = vec![0usize; q];
    for (i, &j) in assign.iter().enumerate() {
        col_owner[j] = i;
    }
    for i in 0..q {
        for jj in 0..tight[i].len() {
            let j = tight[i][jj];
            if assign[i] == j {
                break;
            }
            if col_owner[j] < i {
                continue;
            }
            if reroute(q, &tight, &mut assign, &mut col_owner, i, j) {
                break;
            }
        }
    }
    let lex_cost = assignment_cost(q, costs, &assign);
    if lex_cost <= base_cost + q as f64 * tol {
        MatchingResult {
            total_cost: lex_cost,
            assignment: assign,
        }
    } else {
        MatchingResult {
            total_cost: base_cost,
            assignment: p.assignment,
        }
    }
}

/// Largest side accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_MAX: usize = 9;

/// Exhaustive search over all permutations in lexicographic order.
pub fn brute_force_matching(c: &CostMatrix) -> Result<MatchingResult> {
    let q = c.q;
    if q > BRUTE_FORCE_MAX {
        return Err(Error::SizeLimit(format!(
            "brute-force matching supports q <= {BRUTE_FORCE_MAX}, got {q}"
        )));
    }
    let mut perm: Vec<usize> = (0..q).collect();
    let mut best = perm.clone();
    let mut best_cost = assignment_cost(q, &c.costs, &perm);
    while next_permutation(&mut perm) {
        let cost = assignment_cost(q, &c.costs, &perm);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&perm);
        }
    }
    Ok(MatchingResult {
        total_cost: best_cost,
        assignment: best,
    })
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
