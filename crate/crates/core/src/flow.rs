//! Dense min-cost transport by successive shortest paths.
//!
//! Supplies and demands are integers (masses scaled to a common
//! denominator); costs are `f64`. Each augmentation runs an `O(V^2)`
//! Dijkstra over the residual graph with node potentials, which suits the
//! complete bipartite graphs produced by small transport problems.

/// Optimal plan and dual potentials of a balanced transport problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// `sum flow(x, y) cost(x, y)` in scaled units.
    pub cost: f64,
    /// Nonzero entries `(x, y, flow)`.
    pub flows: Vec<(usize, usize, i64)>,
    /// Source potentials `u` and sink potentials `v` with
    /// `u(x) + v(y) <= cost(x, y)`, tight on the support of the plan.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

const INF: f64 = f64::INFINITY;

/// Solve `min sum c(x,y) f(x,y)` subject to row sums `supply` and column sums `demand`.
///
/// Panics if the totals differ or any entry is negative.
pub fn solve_transport(supply: &[i64], demand: &[i64], cost: &[Vec<f64>]) -> TransportPlan {
    let m = supply.len();
    let k = demand.len();
    assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>(), "unbalanced transport problem");
    assert!(supply.iter().chain(demand).all(|&s| s >= 0), "negative mass");
    assert_eq!(cost.len(), m);

    // node layout: 0 = source, 1..=m rows, m+1..=m+k columns, m+k+1 = sink
    let src = 0;
    let row = |i: usize| 1 + i;
    let col = |j: usize| 1 + m + j;
    let sink = m + k + 1;
    let nodes = m + k + 2;

    let mut flow = vec![vec![0i64; k]; m];
    let mut rem_supply = supply.to_vec();
    let mut rem_demand = demand.to_vec();
    let mut pi = vec![0.0f64; nodes];
    let mut dist = vec![INF; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];

    loop {
        if rem_supply.iter().all(|&s| s == 0) {
            break;
        }
        dist.iter_mut().for_each(|d| *d = INF);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[src] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = INF;
            for (i, (&d, &f)) in dist.iter().zip(&done).enumerate() {
                if !f && d < best {
                    best = d;
                    u = i;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let relax = |v: usize, c: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let nd = dist[u] + (c + pi[u] - pi[v]).max(0.0);
                if nd < dist[v] {
                    dist[v] = nd;
                    prev[v] = u;
                }
            };
            if u == src {
                for i in 0..m {
                    if rem_supply[i] > 0 {
                        relax(row(i), 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= m {
                let i = u - 1;
                for j in 0..k {
                    relax(col(j), cost[i][j], &mut dist, &mut prev);
                }
                if rem_supply[i] < supply[i] {
                    relax(src, 0.0, &mut dist, &mut prev);
                }
            } else if u < sink {
                let j = u - 1 - m;
                for i in 0..m {
                    if flow[i][j] > 0 {
                        relax(row(i), -cost[i][j], &mut dist, &mut prev);
                    }
                }
                if rem_demand[j] > 0 {
                    relax(sink, 0.0, &mut dist, &mut prev);
                }
            } else {
                for j in 0..k {
                    if rem_demand[j] < demand[j] {
                        relax(col(j), 0.0, &mut dist, &mut prev);
                    }
                }
            }
        }
        assert!(dist[sink].is_finite(), "transport problem is infeasible");
        for v in 0..nodes {
            if dist[v].is_finite() {
                pi[v] += dist[v];
            }
        }

        // bottleneck along the path
        let mut amount = i64::MAX;
        let mut v = sink;
        while v != src {
            let u = prev[v];
            let cap = if u == src {
                rem_supply[v - 1]
            } else if v == sink {
                rem_demand[u - 1 - m]
            } else if u <= m && v > m {
                i64::MAX
            } else if u > m && v <= m {
                flow[v - 1][u - 1 - m]
            } else if v == src {
                supply[u - 1] - rem_supply[u - 1]
            } else {
                demand[v - 1 - m] - rem_demand[v - 1 - m]
            };
            amount = amount.min(cap);
            v = u;
        }
        assert!(amount > 0 && amount < i64::MAX, "degenerate augmenting path");
        let mut v = sink;
        while v != src {
            let u = prev[v];
            if u == src {
                rem_supply[v - 1] -= amount;
            } else if v == sink {
                rem_demand[u - 1 - m] -= amount;
            } else if u <= m && v > m {
                flow[u - 1][v - 1 - m] += amount;
            } else if u > m && v <= m && v != src {
                flow[v - 1][u - 1 - m] -= amount;
            } else if v == src {
                rem_supply[u - 1] += amount;
            } else {
                rem_demand[v - 1 - m] += amount;
            }
            v = u;
        }
    }

    let mut total = 0.0;
    let mut flows = Vec::new();
    for i in 0..m {
        for j in 0..k {
            if flow[i][j] > 0 {
                total += flow[i][j] as f64 * cost[i][j];
                flows.push((i, j, flow[i][j]));
            }
        }
    }
    let (u, v) = duals(&flow, cost);
    TransportPlan { cost: total, flows, u, v }
}

/// Dual potentials from shortest-path distances in the final residual graph.
///
/// With `d` the distances from a virtual root joined to every node,
/// `u(x) = -d(x)` and `v(y) = d(y)` satisfy `u + v <= c`, with equality on
/// every arc that carries flow.
fn duals(flow: &[Vec<i64>], cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = flow.len();
    let k = if m > 0 { flow[0].len() } else { 0 };
    let mut dr = vec![0.0f64; m];
    let mut dc = vec![0.0f64; k];
    for _ in 0..(m + k + 1) {
        let mut changed = false;
        for i in 0..m {
            for j in 0..k {
                let c = cost[i][j];
                if dr[i] + c < dc[j] - 1e-13 {
                    dc[j] = dr[i] + c;
                    changed = true;
                }
                if flow[i][j] > 0 && dc[j] - c < dr[i] - 1e-13 {
                    dr[i] = dc[j] - c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (dr.into_iter().map(|d| -d).collect(), dc)
}

/// Round nonnegative masses to integers summing exactly to `scale`, by largest remainder.
pub fn scale_masses(weights: &[f64], scale: i64) -> Vec<i64> {
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| w / total * scale as f64).collect();
    let mut out: Vec<i64> = raw.iter().map(|r| r.floor() as i64).collect();
    let mut short = scale - out.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if short == 0 {
            break;
        }
        if weights[i] > 0.0 {
            out[i] += 1;
            short -= 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_2x2(s: &[i64], d: &[i64], c: &[Vec<f64>]) -> f64 {
        // one free variable: f00 ranges over feasible integers
        let mut best = f64::INFINITY;
        for f00 in 0..=s[0].min(d[0]) {
            let f01 = s[0] - f00;
            let f10 = d[0] - f00;
            let f11 = s[1] - f10;
            if f01 < 0 || f10 < 0 || f11 < 0 || f01 + f11 != d[1] {
                continue;
            }
            let v = f00 as f64 * c[0][0] + f01 as f64 * c[0][1] + f10 as f64 * c[1][0] + f11 as f64 * c[1][1];
            best = best.min(v);
        }
        best
    }

    #[test]
    fn small_problem_matches_brute_force() {
        let c = vec![vec![0.0, 1.0], vec![0.7, 0.0]];
        let (s, d) = (vec![7, 3], vec![4, 6]);
        let plan = solve_transport(&s, &d, &c);
        assert!((plan.cost - brute_force_2x2(&s, &d, &c)).abs() < 1e-9);
    }

    #[test]
    fn duals_are_feasible_and_tight() {
        let c = vec![vec![0.0, 0.4, 1.0], vec![0.4, 0.0, 0.4], vec![1.0, 0.4, 0.0]];
        let (s, d) = (vec![5, 3, 2], vec![1, 3, 6]);
        let plan = solve_transport(&s, &d, &c);
        let dual: f64 = s.iter().zip(&plan.u).map(|(a, u)| *a as f64 * u).sum::<f64>()
            + d.iter().zip(&plan.v).map(|(b, v)| *b as f64 * v).sum::<f64>();
        assert!((dual - plan.cost).abs() < 1e-9, "{dual} vs {}", plan.cost);
        for i in 0..3 {
            for j in 0..3 {
                assert!(plan.u[i] + plan.v[j] <= c[i][j] + 1e-9);
            }
        }
    }

    #[test]
    fn scaled_masses_sum_exactly() {
        let w = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0];
        let s = scale_masses(&w, 1_000_000_000);
        assert_eq!(s.iter().sum::<i64>(), 1_000_000_000);
        assert_eq!(s[3], 0);
    }
}
