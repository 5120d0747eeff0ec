//! Capacity-constrained discount allocation.
//!
//! Each customer gets at most one depth, each depth `a` at most `N_a` customers,
//! and the sum of `(w R - C) e_a` over chosen pairs is maximised, where
//! `R = F (1 - a)` is the expected revenue and `C = F a` the markdown cost.
//!
//! The constraint matrix is that of a bipartite transportation problem, so the
//! LP relaxation is integral and the problem is solved exactly as a min-cost
//! flow: source -> customer (cap 1) -> depth (cap 1) -> sink (cap `N_a`).
//! Successive shortest paths stop as soon as no augmenting path has negative
//! cost, which leaves unprofitable customers unassigned.
//!
//! Because every customer is adjacent to every depth, the residual graph is
//! contracted onto the `K` depth nodes: a path enters depth `a` from an
//! unassigned customer, hops `a -> b` by moving a customer currently holding
//! `a` over to `b`, and exits at a depth with spare capacity. Per-pair heaps
//! keep each augmentation at `O(K^3 + K^2 log I)`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::action_encoding::DiscountDepth;
use crate::error::{Error, Result};
use crate::policies::ScoreMatrix;

/// `(w F (1 - a) - F a) e_a`.
#[inline]
pub fn objective_coefficient(f_tilde: f64, a: DiscountDepth, w: f64, e_a: f64) -> f64 {
    let a = a.value();
    (w * f_tilde * (1.0 - a) - f_tilde * a) * e_a
}

/// One campaign's integer program.
#[derive(Debug, Clone)]
pub struct AllocationProblem {
    scores: ScoreMatrix,
    w: f64,
    engagement: Vec<f64>,
    capacities: Vec<usize>,
}

impl AllocationProblem {
    pub fn new(scores: ScoreMatrix, w: f64, engagement: Vec<f64>, capacities: Vec<usize>) -> Result<Self> {
        let k = scores.n_actions();
        if engagement.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: engagement.len(),
            });
        }
        if capacities.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                actual: capacities.len(),
            });
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidConfig("importance weight w must be finite and >= 0".into()));
        }
        if engagement.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::InvalidConfig("engagement rates must lie in [0, 1]".into()));
        }
        Ok(Self {
            scores,
            w,
            engagement,
            capacities,
        })
    }

    /// Like [`AllocationProblem::new`] but accepts signed capacities, rejecting negatives.
    pub fn with_signed_capacities(
        scores: ScoreMatrix,
        w: f64,
        engagement: Vec<f64>,
        capacities: &[i64],
    ) -> Result<Self> {
        if let Some((k, c)) = capacities.iter().enumerate().find(|(_, c)| **c < 0) {
            return Err(Error::InvalidConfig(format!("capacity for action {k} is negative ({c})")));
        }
        Self::new(scores, w, engagement, capacities.iter().map(|&c| c as usize).collect())
    }

    pub fn scores(&self) -> &ScoreMatrix {
        &self.scores
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn engagement(&self) -> &[f64] {
        &self.engagement
    }

    pub fn capacities(&self) -> &[usize] {
        &self.capacities
    }

    pub fn n_customers(&self) -> usize {
        self.scores.n_customers()
    }

    pub fn n_actions(&self) -> usize {
        self.scores.n_actions()
    }

    /// Objective coefficients, row-major `customers x actions`.
    pub fn coefficients(&self) -> Vec<f64> {
        let actions = self.scores.actions();
        let mut out = Vec::with_capacity(self.n_customers() * self.n_actions());
        for i in 0..self.n_customers() {
            for (k, &a) in actions.iter().enumerate() {
                out.push(objective_coefficient(self.scores.get(i, k), a, self.w, self.engagement[k]));
            }
        }
        out
    }

    /// Objective of an arbitrary choice vector, summed in customer order.
    pub fn objective_of(&self, chosen: &[Option<usize>]) -> f64 {
        let coef = self.coefficients();
        objective_sum(&coef, self.n_actions(), chosen)
    }

    pub fn is_feasible(&self, chosen: &[Option<usize>]) -> bool {
        if chosen.len() != self.n_customers() {
            return false;
        }
        let mut used = vec![0usize; self.n_actions()];
        for c in chosen.iter().flatten() {
            if *c >= used.len() {
                return false;
            }
            used[*c] += 1;
        }
        used.iter().zip(&self.capacities).all(|(u, c)| u <= c)
    }
}

fn objective_sum(coef: &[f64], k: usize, chosen: &[Option<usize>]) -> f64 {
    let mut total = 0.0;
    for (i, c) in chosen.iter().enumerate() {
        if let Some(a) = c {
            total += coef[i * k + a];
        }
    }
    total
}

/// Per-customer choice (index into `actions`) and the objective it attains.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    chosen: Vec<Option<usize>>,
    actions: Vec<DiscountDepth>,
    pub objective: f64,
}

impl Assignment {
    pub fn new(chosen: Vec<Option<usize>>, actions: Vec<DiscountDepth>, objective: f64) -> Self {
        Self {
            chosen,
            actions,
            objective,
        }
    }

    pub fn chosen(&self) -> &[Option<usize>] {
        &self.chosen
    }

    pub fn actions(&self) -> &[DiscountDepth] {
        &self.actions
    }

    pub fn depth(&self, customer: usize) -> Option<DiscountDepth> {
        self.chosen[customer].map(|k| self.actions[k])
    }

    /// Customers holding each action.
    pub fn usage(&self) -> Vec<usize> {
        let mut used = vec![0; self.actions.len()];
        for k in self.chosen.iter().flatten() {
            used[*k] += 1;
        }
        used
    }

    pub fn n_assigned(&self) -> usize {
        self.chosen.iter().filter(|c| c.is_some()).count()
    }
}

/// Integer cost scaling for the flow solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Cost quantum as a fraction of the largest absolute coefficient.
    pub precision: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { precision: 1e-6 }
    }
}

/// Secondary key among equal-objective optima: lower customer indices and
/// earlier actions are preferred.
#[inline]
fn tie_penalty(i: usize, k: usize, n_actions: usize) -> u64 {
    (i * n_actions + k + 1) as u64
}

/// Exact optimum via min-cost flow with default options.
pub fn solve(problem: &AllocationProblem) -> Assignment {
    solve_with(problem, SolverOptions::default())
}

pub fn solve_with(problem: &AllocationProblem, opts: SolverOptions) -> Assignment {
    let n = problem.n_customers();
    let k = problem.n_actions();
    let coef = problem.coefficients();
    let actions = problem.scores().actions().to_vec();
    let max_abs = coef.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if n == 0 || k == 0 || max_abs == 0.0 || !max_abs.is_finite() {
        let chosen = vec![None; n];
        return Assignment::new(chosen, actions, 0.0);
    }
    let quantum = max_abs * opts.precision.max(f64::EPSILON);
    // lexicographic: any unit of quantised objective outweighs every possible tie penalty total
    let tie_scale = (n as i128) * ((n * k + k) as i128) + 1;
    let cost: Vec<Option<i128>> = coef
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let q = (c / quantum).round() as i128;
            (q > 0).then(|| -q * tie_scale + tie_penalty(idx / k, idx % k, k) as i128)
        })
        .collect();

    let mut flow = ContractedFlow::new(n, k, &cost, problem.capacities());
    flow.run();
    let chosen = flow.assign;
    let objective = objective_sum(&coef, k, &chosen);
    Assignment::new(chosen, actions, objective)
}

#[derive(Clone, Copy)]
enum Pred {
    None,
    Source(usize),
    Move { from: usize, customer: usize },
}

struct ContractedFlow<'a> {
    k: usize,
    cost: &'a [Option<i128>],
    capacity: Vec<usize>,
    assign: Vec<Option<usize>>,
    used: Vec<usize>,
    version: Vec<u32>,
    /// Per depth: unassigned customers keyed by arc cost.
    free: Vec<BinaryHeap<Reverse<(i128, usize)>>>,
    /// Per ordered depth pair `(a, b)`: customers on `a` keyed by the cost of moving them to `b`.
    moves: Vec<BinaryHeap<Reverse<(i128, usize, u32)>>>,
}

impl<'a> ContractedFlow<'a> {
    fn new(n: usize, k: usize, cost: &'a [Option<i128>], capacities: &[usize]) -> Self {
        let mut free: Vec<BinaryHeap<Reverse<(i128, usize)>>> = vec![BinaryHeap::new(); k];
        for i in 0..n {
            for (a, heap) in free.iter_mut().enumerate() {
                if let Some(c) = cost[i * k + a] {
                    heap.push(Reverse((c, i)));
                }
            }
        }
        Self {
            k,
            cost,
            capacity: capacities.to_vec(),
            assign: vec![None; n],
            used: vec![0; k],
            version: vec![0; n],
            free,
            moves: vec![BinaryHeap::new(); k * k],
        }
    }

    fn arc(&self, i: usize, a: usize) -> Option<i128> {
        self.cost[i * self.k + a]
    }

    fn top_free(&mut self, a: usize) -> Option<(i128, usize)> {
        while let Some(&Reverse((c, i))) = self.free[a].peek() {
            if self.assign[i].is_none() {
                return Some((c, i));
            }
            self.free[a].pop();
        }
        None
    }

    fn top_move(&mut self, a: usize, b: usize) -> Option<(i128, usize)> {
        let heap = &mut self.moves[a * self.k + b];
        while let Some(&Reverse((c, j, ver))) = heap.peek() {
            if self.assign[j] == Some(a) && self.version[j] == ver {
                return Some((c, j));
            }
            heap.pop();
        }
        None
    }

    fn place(&mut self, i: usize, a: usize) {
        self.assign[i] = Some(a);
        self.version[i] += 1;
        let here = self.arc(i, a).expect("assigned along an existing arc");
        for b in 0..self.k {
            if b == a {
                continue;
            }
            if let Some(c) = self.arc(i, b) {
                self.moves[a * self.k + b].push(Reverse((c - here, i, self.version[i])));
            }
        }
    }

    fn run(&mut self) {
        let k = self.k;
        loop {
            let mut dist: Vec<Option<i128>> = vec![None; k];
            let mut pred = vec![Pred::None; k];
            for a in 0..k {
                if let Some((c, i)) = self.top_free(a) {
                    dist[a] = Some(c);
                    pred[a] = Pred::Source(i);
                }
            }
            let mut edges: Vec<Option<(i128, usize)>> = vec![None; k * k];
            for a in 0..k {
                for b in 0..k {
                    if a != b {
                        edges[a * k + b] = self.top_move(a, b);
                    }
                }
            }
            // Bellman-Ford on the contracted graph; no negative cycles by the SSP invariant
            for _ in 0..k {
                let mut changed = false;
                for a in 0..k {
                    let Some(da) = dist[a] else { continue };
                    for b in 0..k {
                        if let Some((w, j)) = edges[a * k + b] {
                            let cand = da + w;
                            if dist[b].is_none_or(|db| cand < db) {
                                dist[b] = Some(cand);
                                pred[b] = Pred::Move { from: a, customer: j };
                                changed = true;
                            }
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            let end = (0..k)
                .filter(|&a| self.used[a] < self.capacity[a])
                .filter_map(|a| dist[a].map(|d| (d, a)))
                .min();
            let Some((d, end)) = end else { break };
            if d >= 0 {
                break;
            }
            let mut at = end;
            loop {
                match pred[at] {
                    Pred::Source(i) => {
                        self.place(i, at);
                        break;
                    }
                    Pred::Move { from, customer } => {
                        self.place(customer, at);
                        at = from;
                    }
                    Pred::None => unreachable!("path reconstruction reached an unlabelled node"),
                }
            }
            self.used[end] += 1;
        }
    }
}

/// Largest instance [`solve_bruteforce`] accepts.
pub const BRUTEFORCE_MAX_CUSTOMERS: usize = 12;
pub const BRUTEFORCE_MAX_ACTIONS: usize = 4;

/// Exhaustive optimum, for testing the flow solver.
///
/// Enumerates every feasible assignment customer by customer, merging partial
/// assignments that leave the same per-depth usage and keeping the better one
/// (larger floating-point objective, then smaller tie penalty).
pub fn solve_bruteforce(problem: &AllocationProblem) -> Result<Assignment> {
    let n = problem.n_customers();
    let k = problem.n_actions();
    if n > BRUTEFORCE_MAX_CUSTOMERS || k > BRUTEFORCE_MAX_ACTIONS {
        return Err(Error::TooLarge {
            customers: n,
            actions: k,
        });
    }
    let coef = problem.coefficients();
    let caps: Vec<usize> = problem.capacities().iter().map(|&c| c.min(n)).collect();
    let radix: Vec<usize> = caps.iter().map(|c| c + 1).collect();
    let n_states: usize = radix.iter().product();
    let decode = |mut s: usize| -> Vec<usize> {
        radix
            .iter()
            .map(|r| {
                let d = s % r;
                s /= r;
                d
            })
            .collect()
    };
    let stride: Vec<usize> = radix
        .iter()
        .scan(1usize, |acc, r| {
            let s = *acc;
            *acc *= r;
            Some(s)
        })
        .collect();

    type Best = Option<(f64, u64)>;
    let better = |cand: (f64, u64), cur: Best| match cur {
        None => true,
        Some((o, p)) => cand.0 > o || (cand.0 == o && cand.1 < p),
    };

    let mut layer: Vec<Best> = vec![None; n_states];
    layer[0] = Some((0.0, 0));
    // parent[i][state] = (previous state, choice) for customer i
    let mut parent: Vec<Vec<(usize, Option<usize>)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut next: Vec<Best> = vec![None; n_states];
        let mut back = vec![(usize::MAX, None); n_states];
        for (s, val) in layer.iter().enumerate() {
            let Some((obj, pen)) = *val else { continue };
            if better((obj, pen), next[s]) {
                next[s] = Some((obj, pen));
                back[s] = (s, None);
            }
            let usage = decode(s);
            for a in 0..k {
                if usage[a] < caps[a] {
                    let t = s + stride[a];
                    let cand = (obj + coef[i * k + a], pen + tie_penalty(i, a, k));
                    if better(cand, next[t]) {
                        next[t] = Some(cand);
                        back[t] = (s, Some(a));
                    }
                }
            }
        }
        parent.push(back);
        layer = next;
    }
    let mut best_state = 0;
    for s in 0..n_states {
        if let Some(v) = layer[s] {
            if better(v, layer[best_state]) {
                best_state = s;
            }
        }
    }
    let mut chosen = vec![None; n];
    let mut s = best_state;
    for i in (0..n).rev() {
        let (prev, choice) = parent[i][s];
        chosen[i] = choice;
        s = prev;
    }
    let objective = objective_sum(&coef, k, &chosen);
    Ok(Assignment::new(chosen, problem.scores().actions().to_vec(), objective))
}

/// Splits `n` slots across actions in proportion to `profile` (largest remainder).
pub fn capacities_from_profile(profile: &[f64], n: usize) -> Result<Vec<usize>> {
    if profile.is_empty() {
        return Err(Error::Empty("capacity profile".into()));
    }
    if profile.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidConfig("capacity profile entries must be >= 0".into()));
    }
    let total: f64 = profile.iter().sum();
    if total <= 0.0 {
        return Ok(vec![0; profile.len()]);
    }
    let scale = n as f64 / total.max(1.0);
    let exact: Vec<f64> = profile.iter().map(|p| p * scale).collect();
    let mut caps: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let target = (exact.iter().sum::<f64>().round() as usize).min(n);
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut assigned: usize = caps.iter().sum();
    for &idx in order.iter().cycle().take(profile.len() * 2) {
        if assigned >= target {
            break;
        }
        caps[idx] += 1;
        assigned += 1;
    }
    Ok(caps)
}

/// Result of the budget-capped variant.
#[derive(Debug, Clone)]
pub struct BudgetedAssignment {
    pub assignment: Assignment,
    /// Importance weight actually used after the Lagrangian adjustment.
    pub effective_w: f64,
    /// Expected markdown cost `sum F a e_a` of the returned assignment.
    pub expected_cost: f64,
    pub within_budget: bool,
}

/// Expected markdown cost `sum F a e_a` over chosen pairs.
pub fn expected_cost(problem: &AllocationProblem, chosen: &[Option<usize>]) -> f64 {
    let actions = problem.scores().actions();
    chosen
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|k| problem.scores().get(i, k) * actions[k].value() * problem.engagement()[k]))
        .sum()
}

/// Approximate solve with an extra cap on expected markdown cost.
///
/// Dualising the budget with multiplier `lambda` turns the objective into
/// `(w R - (1 + lambda) C) e`, i.e. the same program with `w / (1 + lambda)`.
/// The effective weight is bisected for the largest value whose optimum meets
/// the budget. This is a heuristic; exactness only holds for [`solve`].
pub fn solve_with_budget(problem: &AllocationProblem, budget: f64, iterations: usize) -> Result<BudgetedAssignment> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidConfig("budget must be >= 0".into()));
    }
    let at = |w: f64| -> Result<(Assignment, f64)> {
        let p = AllocationProblem::new(
            problem.scores().clone(),
            w,
            problem.engagement().to_vec(),
            problem.capacities().to_vec(),
        )?;
        let a = solve(&p);
        let c = expected_cost(problem, a.chosen());
        Ok((a, c))
    };
    let (a, c) = at(problem.w())?;
    if c <= budget {
        let objective = problem.objective_of(a.chosen());
        return Ok(BudgetedAssignment {
            assignment: Assignment::new(a.chosen().to_vec(), a.actions().to_vec(), objective),
            effective_w: problem.w(),
            expected_cost: c,
            within_budget: true,
        });
    }
    let (mut lo, mut hi) = (0.0, problem.w());
    let (mut best, mut best_cost) = at(0.0)?;
    let mut best_w = 0.0;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        let (a, c) = at(mid)?;
        if c <= budget {
            lo = mid;
            best = a;
            best_cost = c;
            best_w = mid;
        } else {
            hi = mid;
        }
    }
    let objective = problem.objective_of(best.chosen());
    Ok(BudgetedAssignment {
        assignment: Assignment::new(best.chosen().to_vec(), best.actions().to_vec(), objective),
        effective_w: best_w,
        expected_cost: best_cost,
        within_budget: best_cost <= budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_encoding::depths;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn worked_example() -> AllocationProblem {
        let scores = ScoreMatrix::from_rows(
            &[vec![10.0, 12.0], vec![8.0, 11.0]],
            depths(&[0.2, 0.4]).unwrap(),
        )
        .unwrap();
        AllocationProblem::new(scores, 1.0, vec![1.0, 1.0], vec![1, 1]).unwrap()
    }

    /// Plain enumeration over all `(K + 1)^I` choice vectors.
    fn enumerate(problem: &AllocationProblem) -> f64 {
        let n = problem.n_customers();
        let k = problem.n_actions();
        let mut best = f64::NEG_INFINITY;
        let total = (k + 1).pow(n as u32);
        for code in 0..total {
            let mut c = code;
            let chosen: Vec<Option<usize>> = (0..n)
                .map(|_| {
                    let d = c % (k + 1);
                    c /= k + 1;
                    (d > 0).then(|| d - 1)
                })
                .collect();
            if problem.is_feasible(&chosen) {
                best = best.max(problem.objective_of(&chosen));
            }
        }
        best
    }

    fn random_problem(rng: &mut ChaCha8Rng, max_n: usize, max_k: usize) -> AllocationProblem {
        let n = rng.random_range(1..=max_n);
        let k = rng.random_range(1..=max_k);
        let mut ds: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..0.9)).collect();
        ds.sort_by(f64::total_cmp);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(0.5..50.0)).collect())
            .collect();
        let scores = ScoreMatrix::from_rows(&rows, depths(&ds).unwrap()).unwrap();
        let e = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
        let caps = (0..k).map(|_| rng.random_range(0..=n)).collect();
        AllocationProblem::new(scores, rng.random_range(0.0..3.0), e, caps).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let d = |v| DiscountDepth::new(v).unwrap();
        assert!((objective_coefficient(10.0, d(0.2), 1.0, 1.0) - 6.0).abs() < 1e-12);
        assert_eq!(objective_coefficient(7.0, d(0.0), 2.0, 0.5), 7.0);
        assert!(objective_coefficient(7.0, d(0.3), 0.0, 0.5) < 0.0);
    }

    #[test]
    fn worked_example_optimum() {
        let p = worked_example();
        let coef = p.coefficients();
        let expect = [6.0, 2.4, 4.8, 2.2];
        for (c, e) in coef.iter().zip(expect) {
            assert!((c - e).abs() < 1e-9);
        }
        let a = solve(&p);
        assert_eq!(a.chosen(), &[Some(0), Some(1)]);
        assert!((a.objective - 8.2).abs() < 1e-9);
        let b = solve_bruteforce(&p).unwrap();
        assert_eq!(b.chosen(), a.chosen());
        assert!((enumerate(&p) - 8.2).abs() < 1e-9);
    }

    #[test]
    fn all_negative_is_empty() {
        let scores = ScoreMatrix::from_rows(&vec![vec![5.0, 6.0]; 3], depths(&[0.3, 0.6]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 0.0, vec![0.5, 0.5], vec![3, 3]).unwrap();
        let a = solve(&p);
        assert_eq!(a.n_assigned(), 0);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn slack_capacities_give_argmax() {
        let rows = vec![vec![10.0, 30.0, 1.0], vec![20.0, 1.0, 1.0], vec![1.0, 1.0, 90.0]];
        let scores = ScoreMatrix::from_rows(&rows, depths(&[0.1, 0.2, 0.3]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 1.0, vec![1.0; 3], vec![3, 3, 3]).unwrap();
        assert_eq!(solve(&p).chosen(), &[Some(1), Some(0), Some(2)]);
    }

    #[test]
    fn single_customer_bruteforce() {
        let scores = ScoreMatrix::from_rows(&[vec![10.0, 20.0, 30.0]], depths(&[0.1, 0.4, 0.9]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 1.0, vec![1.0; 3], vec![1; 3]).unwrap();
        let best = p.coefficients().into_iter().fold(0.0f64, f64::max);
        assert_eq!(solve_bruteforce(&p).unwrap().objective, best);
    }

    #[test]
    fn ties_prefer_low_index_and_shallow_depth() {
        let scores = ScoreMatrix::from_rows(&[vec![10.0, 10.0], vec![10.0, 10.0]], depths(&[0.0, 0.0]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 1.0, vec![1.0, 1.0], vec![1, 0]).unwrap();
        let a = solve(&p);
        assert_eq!(a.chosen(), &[Some(0), None]);
        assert_eq!(solve_bruteforce(&p).unwrap().chosen(), a.chosen());
    }

    #[test]
    fn bruteforce_rejects_large() {
        let rows = vec![vec![1.0]; 13];
        let scores = ScoreMatrix::from_rows(&rows, depths(&[0.1]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 1.0, vec![1.0], vec![13]).unwrap();
        assert!(matches!(solve_bruteforce(&p), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn validation() {
        let scores = ScoreMatrix::from_rows(&[vec![1.0, 2.0]], depths(&[0.1, 0.2]).unwrap()).unwrap();
        assert!(AllocationProblem::new(scores.clone(), 1.0, vec![1.0], vec![1, 1]).is_err());
        assert!(AllocationProblem::new(scores.clone(), 1.0, vec![1.0, 1.5], vec![1, 1]).is_err());
        assert!(AllocationProblem::new(scores.clone(), -1.0, vec![1.0, 1.0], vec![1, 1]).is_err());
        assert!(AllocationProblem::with_signed_capacities(scores, 1.0, vec![1.0, 1.0], &[1, -1]).is_err());
    }

    #[test]
    fn bruteforce_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let p = random_problem(&mut rng, 5, 3);
            let b = solve_bruteforce(&p).unwrap();
            assert!(p.is_feasible(b.chosen()));
            assert_eq!(b.objective, enumerate(&p).max(0.0));
        }
    }

    #[test]
    fn flow_matches_bruteforce_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let p = random_problem(&mut rng, 8, 4);
            let f = solve(&p);
            let b = solve_bruteforce(&p).unwrap();
            assert!(p.is_feasible(f.chosen()));
            assert_eq!(f.objective, b.objective);
        }
    }

    #[test]
    fn flow_feasible_on_large_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let rows: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..5).map(|_| rng.random_range(0.5..50.0)).collect())
            .collect();
        let scores = ScoreMatrix::from_rows(&rows, depths(&[0.1, 0.2, 0.3, 0.4, 0.5]).unwrap()).unwrap();
        let caps = capacities_from_profile(&[0.2; 5], 2000).unwrap();
        let p = AllocationProblem::new(scores, 2.0, vec![0.2, 0.25, 0.3, 0.35, 0.4], caps.clone()).unwrap();
        let a = solve(&p);
        assert!(p.is_feasible(a.chosen()));
        assert_eq!(a.usage(), caps);
        // an optimum cannot be improved by swapping the depths of two customers
        let coef = p.coefficients();
        for i in (0..2000).step_by(37) {
            for j in (1..2000).step_by(41) {
                if let (Some(x), Some(y)) = (a.chosen()[i], a.chosen()[j]) {
                    let now = coef[i * 5 + x] + coef[j * 5 + y];
                    let swapped = coef[i * 5 + y] + coef[j * 5 + x];
                    assert!(swapped <= now + 1e-6 * 50.0);
                }
            }
        }
    }

    #[test]
    fn profile_apportionment() {
        assert_eq!(capacities_from_profile(&[1.0, 1.0, 1.0], 10).unwrap().iter().sum::<usize>(), 10);
        assert_eq!(capacities_from_profile(&[0.5, 0.5], 7).unwrap(), vec![4, 3]);
        assert_eq!(capacities_from_profile(&[0.0, 0.0], 7).unwrap(), vec![0, 0]);
        assert_eq!(capacities_from_profile(&[0.1, 0.1], 10).unwrap(), vec![1, 1]);
        assert!(capacities_from_profile(&[-0.1], 10).is_err());
    }

    #[test]
    fn budget_variant_respects_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(1.0..20.0)).collect())
            .collect();
        let scores = ScoreMatrix::from_rows(&rows, depths(&[0.1, 0.3, 0.5]).unwrap()).unwrap();
        let p = AllocationProblem::new(scores, 3.0, vec![0.3, 0.4, 0.5], vec![50, 50, 50]).unwrap();
        let free = solve(&p);
        let free_cost = expected_cost(&p, free.chosen());
        let capped = solve_with_budget(&p, 0.5 * free_cost, 40).unwrap();
        assert!(capped.within_budget);
        assert!(capped.expected_cost <= 0.5 * free_cost + 1e-9);
        assert!(capped.effective_w < 3.0);
        let loose = solve_with_budget(&p, 2.0 * free_cost, 40).unwrap();
        assert_eq!(loose.assignment.chosen(), free.chosen());
    }

    proptest! {
        #[test]
        fn scaling_scores_scales_objective(seed in 0u64..1000, c in 0.1f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 6, 3);
            let rows: Vec<Vec<f64>> = (0..p.n_customers())
                .map(|i| p.scores().row(i).iter().map(|v| v * c).collect())
                .collect();
            let scaled = AllocationProblem::new(
                ScoreMatrix::from_rows(&rows, p.scores().actions().to_vec()).unwrap(),
                p.w(), p.engagement().to_vec(), p.capacities().to_vec()).unwrap();
            let a = solve_bruteforce(&p).unwrap();
            let b = solve_bruteforce(&scaled).unwrap();
            prop_assert!((b.objective - c * a.objective).abs() <= 1e-9 * (1.0 + b.objective.abs()));
            // the original optimiser stays optimal after scaling
            prop_assert!((scaled.objective_of(a.chosen()) - b.objective).abs() <= 1e-9 * (1.0 + b.objective.abs()));
        }

        #[test]
        fn revenue_non_decreasing_in_w(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 6, 3);
            let revenue = |w: f64| {
                let q = AllocationProblem::new(p.scores().clone(), w, p.engagement().to_vec(), p.capacities().to_vec()).unwrap();
                let a = solve_bruteforce(&q).unwrap();
                a.chosen().iter().enumerate().filter_map(|(i, c)| c.map(|k| {
                    q.scores().get(i, k) * (1.0 - q.scores().actions()[k].value()) * q.engagement()[k]
                })).sum::<f64>()
            };
            let mut prev = f64::NEG_INFINITY;
            for w in [0.0, 0.5, 1.0, 2.0, 4.0] {
                let r = revenue(w);
                prop_assert!(r >= prev - 1e-9);
                prev = r;
            }
        }

        #[test]
        fn flow_always_feasible(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 12, 4);
            let a = solve(&p);
            prop_assert!(p.is_feasible(a.chosen()));
            prop_assert!(a.objective >= 0.0);
        }
    }
}
