use rand::Rng;

use crate::error::{Error, Result};

use super::report::{CheckReport, Tolerances};
use super::tree::{child, level, outcome_at, sup_expectation, sup_recursive, FiniteTree, COST_CAP};
use super::{BISECTION_WIDTH, TIE_TOL};

/// Deterministic adapted stopping rule started at `start`: play at least once,
/// then stop at the first node on the path that is marked. Every path is
/// stopped by the leaves at the latest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingRule {
    start: usize,
    stops: Vec<usize>,
}

impl StoppingRule {
    pub fn start(&self) -> usize {
        self.start
    }

    /// Marked nodes, in increasing heap order. No marked node lies below
    /// another.
    pub fn stop_nodes(&self) -> &[usize] {
        &self.stops
    }

    pub fn stops_at(&self, id: usize) -> bool {
        self.stops.binary_search(&id).is_ok()
    }

    /// Number of steps taken from the start along the path of `leaf`.
    pub fn steps(&self, tree: &FiniteTree, leaf: usize) -> usize {
        let s = level(self.start);
        let path = tree.path_nodes(leaf);
        (s..tree.depth())
            .find(|&t| self.stops_at(path[t]))
            .map_or(tree.depth() - s, |t| t + 1 - s)
    }
}

/// Number of rules on a subtree of remaining depth `d` where the subtree's
/// root may stop: `1 + count(d - 1)^2`, with one rule at depth zero.
fn subtree_rule_count(d: usize) -> usize {
    if d == 0 {
        1
    } else {
        let below = subtree_rule_count(d - 1);
        below.saturating_mul(below).saturating_add(1)
    }
}

/// Number of bounded positive stopping rules with `remaining` steps to go.
/// The start node must continue, so the two child subtrees choose freely.
pub fn stopping_rule_count(remaining: usize) -> usize {
    if remaining == 0 {
        return 0;
    }
    let child = subtree_rule_count(remaining - 1);
    child.saturating_mul(child)
}

fn rules_below(tree: &FiniteTree, id: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![id]];
    if level(id) < tree.depth() {
        out.extend(continuations(tree, id));
    }
    out
}

fn continuations(tree: &FiniteTree, id: usize) -> Vec<Vec<usize>> {
    let zeros = rules_below(tree, child(id, false));
    let ones = rules_below(tree, child(id, true));
    let mut out = Vec::with_capacity(zeros.len() * ones.len());
    for a in &zeros {
        for b in &ones {
            out.push(a.iter().chain(b).copied().collect());
        }
    }
    out
}

/// Every bounded positive adapted stopping rule from node `start`, without
/// duplicates.
pub fn enumerate_stopping_times(tree: &FiniteTree, start: usize) -> Result<Vec<StoppingRule>> {
    if start >= tree.internal_count() {
        return Err(Error::domain(format!(
            "node {start} is a leaf of a depth-{} tree; no step remains",
            tree.depth()
        )));
    }
    Ok(continuations(tree, start)
        .into_iter()
        .map(|mut stops| {
            stops.sort_unstable();
            StoppingRule { start, stops }
        })
        .collect())
}

/// Discounted cost sum and discount sum up to the stop, per leaf of the tree.
/// Leaves outside the start's subtree are zero.
fn stopped_sums(tree: &FiniteTree, rule: &StoppingRule) -> (Vec<f64>, Vec<f64>) {
    let mut costs = vec![0.0; tree.leaf_count()];
    let mut weights = vec![0.0; tree.leaf_count()];
    let s = level(rule.start);
    for leaf in tree.leaves_below(rule.start) {
        let path = tree.path_nodes(leaf);
        let mut discount = 1.0;
        for &id in &path[s..] {
            discount *= tree.beta();
            costs[leaf] += discount * tree.cost(id);
            weights[leaf] += discount;
            if rule.stops_at(id) {
                break;
            }
        }
    }
    (costs, weights)
}

fn payoff(sums: &(Vec<f64>, Vec<f64>), gamma: f64) -> Vec<f64> {
    sums.0.iter().zip(&sums.1).map(|(c, w)| c - gamma * w).collect()
}

/// Supremum expectation of the discounted net cost `sum beta^t (h - gamma)`
/// up to the stop, conditional on the rule's start node.
pub fn stopping_value(tree: &FiniteTree, rule: &StoppingRule, gamma: f64) -> Result<f64> {
    sup_expectation(tree, rule.start, &payoff(&stopped_sums(tree, rule), gamma))
}

/// Index at node `start`: the charge at which the best stopping rule breaks
/// even. Bisects the minimum over all enumerated rules.
pub fn gittins_oracle(tree: &FiniteTree, start: usize) -> Result<f64> {
    let sums: Vec<_> = enumerate_stopping_times(tree, start)?
        .iter()
        .map(|rule| stopped_sums(tree, rule))
        .collect();
    let best = |gamma: f64| {
        sums.iter()
            .map(|s| sup_recursive(tree, start, &payoff(s, gamma)))
            .fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0.0, COST_CAP);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if best(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Index at every node; leaves carry the cost cap.
pub fn node_indices(tree: &FiniteTree) -> Result<Vec<f64>> {
    let mut out = vec![COST_CAP; tree.node_count()];
    for (id, slot) in out.iter_mut().enumerate().take(tree.internal_count()) {
        *slot = gittins_oracle(tree, id)?;
    }
    Ok(out)
}

/// Prevailing charge `Gamma(t)` for `t = 1..=depth` along the path of `leaf`:
/// the running maximum of the indices at depths `0..t`.
pub fn prevailing_path(tree: &FiniteTree, gammas: &[f64], leaf: usize) -> Vec<f64> {
    let mut running = gammas[0];
    let path = tree.path_nodes(leaf);
    (0..tree.depth())
        .map(|t| {
            if t > 0 {
                running = running.max(gammas[path[t - 1]]);
            }
            running
        })
        .collect()
}

/// Steps until the index first exceeds `lambda`. `gamma_path[j]` is the index
/// `j` steps after the start; the last entry is the leaf. Returns zero when
/// `lambda` reaches the cost cap and the remaining horizon when the index never
/// exceeds `lambda` by more than the tie margin.
pub fn sigma_hitting(gamma_path: &[f64], lambda: f64, cost_cap: f64) -> usize {
    if lambda >= cost_cap {
        return 0;
    }
    let remaining = gamma_path.len().saturating_sub(1);
    (1..=remaining)
        .find(|&j| gamma_path[j] > lambda + TIE_TOL)
        .unwrap_or(remaining)
}

/// The rule that stops once the index exceeds the start node's index. `None`
/// when that index reaches the cost cap, since the rule would never play.
pub fn sigma_rule(tree: &FiniteTree, gammas: &[f64], start: usize) -> Option<StoppingRule> {
    let lambda = gammas[start];
    let s = level(start);
    let mut stops = Vec::new();
    for leaf in tree.leaves_below(start) {
        let path = tree.path_nodes(leaf);
        let along: Vec<f64> = std::iter::once(lambda)
            .chain(path[s..].iter().map(|&id| gammas[id]))
            .collect();
        let steps = sigma_hitting(&along, lambda, COST_CAP);
        if steps == 0 {
            return None;
        }
        stops.push(path[s + steps - 1]);
    }
    stops.sort_unstable();
    stops.dedup();
    Some(StoppingRule { start, stops })
}

/// The index makes the best stopping rule exactly break even, and the
/// exceedance rule attains that best value.
pub fn check_optimal_stopping(tree: &FiniteTree, start: usize, tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "optimal_stopping",
        "no stopping rule gains at the index; stopping on exceedance breaks even",
    );
    let result = (|| -> Result<()> {
        let gammas = node_indices(tree)?;
        let gamma = gammas[start];
        for (i, rule) in enumerate_stopping_times(tree, start)?.iter().enumerate() {
            let v = sup_recursive(tree, start, &payoff(&stopped_sums(tree, rule), gamma));
            report.expect(v >= -tol.solver, || {
                format!("node {start}: rule {i} {:?} has value {v:e}", rule.stop_nodes())
            });
        }
        match sigma_rule(tree, &gammas, start) {
            Some(sigma) => {
                let v = stopping_value(tree, &sigma, gamma)?;
                report.expect(v <= tol.solver, || {
                    format!("node {start}: exceedance rule has value {v:e} at index {gamma}")
                });
            }
            None => report.expect(gamma >= COST_CAP, || "missing exceedance rule".into()),
        }
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(format!("node {start}: {err}"));
    }
    report
}

/// Per-leaf discounted net costs `beta^t (h(t) - Gamma(t))` for `t = 1..=depth`.
fn net_costs(tree: &FiniteTree, gammas: &[f64]) -> Vec<Vec<f64>> {
    (0..tree.leaf_count())
        .map(|leaf| {
            let prevailing = prevailing_path(tree, gammas, leaf);
            let mut discount = 1.0;
            tree.path_nodes(leaf)
                .iter()
                .zip(prevailing)
                .map(|(&id, charge)| {
                    discount *= tree.beta();
                    discount * (tree.cost(id) - charge)
                })
                .collect()
        })
        .collect()
}

/// Paying the prevailing charge makes the game fair from the root, and no
/// tail of the game is favourable from any node.
pub fn check_fair_game(tree: &FiniteTree, tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "fair_game",
        "cost net of the prevailing charge has zero expectation; every tail is nonpositive",
    );
    let result = (|| -> Result<()> {
        let net = net_costs(tree, &node_indices(tree)?);
        let total: Vec<f64> = net.iter().map(|x| x.iter().sum()).collect();
        let v = sup_expectation(tree, 0, &total)?;
        report.expect(v.abs() <= tol.solver, || format!("root value {v:e}"));
        for id in 0..tree.internal_count() {
            let n = level(id);
            let tail: Vec<f64> = net.iter().map(|x| x[n..].iter().sum()).collect();
            let v = sup_expectation(tree, id, &tail)?;
            report.expect(v <= tol.solver, || format!("tail from node {id} has value {v:e}"));
        }
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}

/// Under a measure attaining the fair-game supremum, scaling the net costs by
/// any predictable nonincreasing weight in `[0, 1]` cannot push the expectation
/// below the measure's gap from the supremum. The first two weights tried are
/// identically one and identically zero; the rest are random.
pub fn check_delay_inequality<R: Rng + ?Sized>(
    tree: &FiniteTree,
    rng: &mut R,
    trials: usize,
    tol: Tolerances,
) -> CheckReport {
    let mut report = CheckReport::new(
        "delay_inequality",
        "delaying play with a decreasing weight cannot make the prevailing game favourable",
    );
    let result = (|| -> Result<()> {
        let net = net_costs(tree, &node_indices(tree)?);
        let total: Vec<f64> = net.iter().map(|x| x.iter().sum()).collect();
        let dists = tree.leaf_distributions(0)?;
        let expect = |dist: &[f64], x: &[f64]| dist.iter().zip(x).map(|(p, v)| p * v).sum::<f64>();
        let (best, best_value) = dists
            .iter()
            .map(|d| (d, expect(d, &total)))
            .fold((&dists[0], f64::NEG_INFINITY), |acc, cur| {
                if cur.1 > acc.1 {
                    cur
                } else {
                    acc
                }
            });
        let gap = (sup_recursive(tree, 0, &total) - best_value).max(0.0);
        for trial in 0..trials {
            let (first, factors): (f64, Vec<f64>) = match trial {
                0 => (1.0, vec![1.0; tree.internal_count()]),
                1 => (0.0, vec![0.0; tree.internal_count()]),
                _ => (
                    rng.gen(),
                    (0..tree.internal_count()).map(|_| rng.gen()).collect(),
                ),
            };
            let weighted: Vec<f64> = (0..tree.leaf_count())
                .map(|leaf| {
                    let mut alpha = first;
                    let mut node = 0;
                    let mut sum = 0.0;
                    for (t, x) in net[leaf].iter().enumerate() {
                        if t > 0 {
                            node = child(node, outcome_at(leaf, tree.depth(), t - 1));
                            alpha *= factors[node];
                        }
                        sum += alpha * x;
                    }
                    sum
                })
                .collect();
            let v = expect(best, &weighted);
            report.expect(v >= -gap - tol.accumulated, || {
                format!("trial {trial}: weighted value {v:e} below -{gap:e} (first weight {first})")
            });
        }
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}
