use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::orthant::{contract_sup, ProductSpace};
use super::report::{CheckReport, Tolerances};
use super::stopping::{node_indices, prevailing_path};
use super::tree::{child, FiniteTree};
use super::{MAX_STRATEGIES, MAX_TOTAL_PLAYS, TIE_TOL};

/// Adapted allocation rule as a decision tree: which arm to play next, given
/// the outcome of the play just made.
#[derive(Debug, PartialEq)]
pub enum Plan {
    Done,
    Play { arm: usize, next: [Arc<Plan>; 2] },
}

/// Allocation strategy in simple form: every arm `m` is played exactly
/// `horizons[m]` times, each choice depending on the outcomes seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationStrategy {
    horizons: Vec<usize>,
    plan: Arc<Plan>,
}

impl AllocationStrategy {
    /// The strategy that follows `order` whatever the outcomes.
    pub fn from_order(horizons: &[usize], order: &[usize]) -> Result<Self> {
        let mut counts = vec![0; horizons.len()];
        for &arm in order {
            if arm >= horizons.len() {
                return Err(Error::domain(format!("order names arm {arm} of {}", horizons.len())));
            }
            counts[arm] += 1;
        }
        if counts != horizons {
            return Err(Error::domain(format!(
                "order plays arms {counts:?} times, horizons are {horizons:?}"
            )));
        }
        let plan = order.iter().rev().fold(Arc::new(Plan::Done), |next, &arm| {
            Arc::new(Plan::Play {
                arm,
                next: [next.clone(), next],
            })
        });
        Ok(Self {
            horizons: horizons.to_vec(),
            plan,
        })
    }

    pub fn horizons(&self) -> &[usize] {
        &self.horizons
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn total_plays(&self) -> usize {
        self.horizons.iter().sum()
    }

    /// Arms played, in order, when arm `m` produces the outcome path
    /// `leaves[m]` (first outcome in the most significant bit).
    pub fn plays(&self, leaves: &[usize]) -> Vec<usize> {
        let mut depth = vec![0; self.horizons.len()];
        let mut out = Vec::with_capacity(self.total_plays());
        let mut plan = &*self.plan;
        while let Plan::Play { arm, next } = plan {
            let outcome = (leaves[*arm] >> (self.horizons[*arm] - 1 - depth[*arm])) & 1;
            depth[*arm] += 1;
            out.push(*arm);
            plan = &next[outcome];
        }
        out
    }

    /// Play counts per arm before each decision and after the last one.
    pub fn recording(&self, leaves: &[usize]) -> Vec<Vec<usize>> {
        let mut eta = vec![0; self.horizons.len()];
        let mut out = vec![eta.clone()];
        for arm in self.plays(leaves) {
            eta[arm] += 1;
            out.push(eta.clone());
        }
        out
    }

    /// How many times the arm chosen at each decision has been played,
    /// counting that play.
    pub fn counting(&self, leaves: &[usize]) -> Vec<usize> {
        let mut eta = vec![0; self.horizons.len()];
        self.plays(leaves)
            .into_iter()
            .map(|arm| {
                eta[arm] += 1;
                eta[arm]
            })
            .collect()
    }
}

fn check_horizons(horizons: &[usize]) -> Result<()> {
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(Error::domain(format!(
            "every arm needs a positive horizon, got {horizons:?}"
        )));
    }
    let total: usize = horizons.iter().sum();
    if total > MAX_TOTAL_PLAYS {
        return Err(Error::Guard(format!(
            "{total} plays in total exceed the enumeration cap {MAX_TOTAL_PLAYS}"
        )));
    }
    Ok(())
}

/// Number of adapted strategies with `remaining[m]` plays left on arm `m`:
/// each available arm followed by an independent choice for both outcomes.
/// Saturates instead of overflowing.
pub fn strategy_count(remaining: &[usize]) -> usize {
    fn count(remaining: &mut Vec<usize>, memo: &mut HashMap<Vec<usize>, usize>) -> usize {
        if let Some(&c) = memo.get(remaining.as_slice()) {
            return c;
        }
        let mut total: usize = if remaining.iter().all(|&r| r == 0) { 1 } else { 0 };
        for m in 0..remaining.len() {
            if remaining[m] > 0 {
                remaining[m] -= 1;
                let below = count(remaining, memo);
                remaining[m] += 1;
                total = total.saturating_add(below.saturating_mul(below));
            }
        }
        memo.insert(remaining.clone(), total);
        total
    }
    count(&mut remaining.to_vec(), &mut HashMap::new())
}

/// Every adapted strategy for the given horizons, without duplicates.
pub fn enumerate_strategies(horizons: &[usize]) -> Result<Vec<AllocationStrategy>> {
    check_horizons(horizons)?;
    let count = strategy_count(horizons);
    if count > MAX_STRATEGIES {
        return Err(Error::Guard(format!(
            "{count} strategies exceed the enumeration cap {MAX_STRATEGIES}"
        )));
    }
    fn plans(remaining: &mut Vec<usize>, memo: &mut HashMap<Vec<usize>, Vec<Arc<Plan>>>) -> Vec<Arc<Plan>> {
        if let Some(found) = memo.get(remaining.as_slice()) {
            return found.clone();
        }
        let mut out = Vec::new();
        if remaining.iter().all(|&r| r == 0) {
            out.push(Arc::new(Plan::Done));
        }
        for arm in 0..remaining.len() {
            if remaining[arm] > 0 {
                remaining[arm] -= 1;
                let below = plans(remaining, memo);
                remaining[arm] += 1;
                for zero in &below {
                    for one in &below {
                        out.push(Arc::new(Plan::Play {
                            arm,
                            next: [zero.clone(), one.clone()],
                        }));
                    }
                }
            }
        }
        memo.insert(remaining.clone(), out.clone());
        out
    }
    Ok(plans(&mut horizons.to_vec(), &mut HashMap::new())
        .into_iter()
        .map(|plan| AllocationStrategy {
            horizons: horizons.to_vec(),
            plan,
        })
        .collect())
}

/// Every outcome-independent play order, in lexicographic order.
pub fn enumerate_orders(horizons: &[usize]) -> Result<Vec<Vec<usize>>> {
    check_horizons(horizons)?;
    fn extend(remaining: &mut [usize], prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.iter().all(|&r| r == 0) {
            out.push(prefix.clone());
            return;
        }
        for arm in 0..remaining.len() {
            if remaining[arm] > 0 {
                remaining[arm] -= 1;
                prefix.push(arm);
                extend(remaining, prefix, out);
                prefix.pop();
                remaining[arm] += 1;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut horizons.to_vec(), &mut Vec::new(), &mut out);
    Ok(out)
}

/// One arm's tree with its node-wise indices and per-path quantities.
#[derive(Debug, Clone)]
pub struct ArmInstance {
    tree: FiniteTree,
    gammas: Vec<f64>,
    /// `[leaf][t - 1]`: cost of the `t`-th play.
    costs: Vec<Vec<f64>>,
    /// `[leaf][t - 1]`: prevailing charge of the `t`-th play.
    prevailing: Vec<Vec<f64>>,
    /// `[leaf][t]`: index after `t` plays; the entry at the horizon is the cap.
    along: Vec<Vec<f64>>,
}

impl ArmInstance {
    pub fn new(tree: FiniteTree) -> Result<Self> {
        let gammas = node_indices(&tree)?;
        let paths: Vec<Vec<usize>> = (0..tree.leaf_count()).map(|l| tree.path_nodes(l)).collect();
        let costs = paths
            .iter()
            .map(|p| p.iter().map(|&id| tree.cost(id)).collect())
            .collect();
        let prevailing = (0..tree.leaf_count())
            .map(|l| prevailing_path(&tree, &gammas, l))
            .collect();
        let along = paths
            .iter()
            .map(|p| std::iter::once(gammas[0]).chain(p.iter().map(|&id| gammas[id])).collect())
            .collect();
        Ok(Self {
            tree,
            gammas,
            costs,
            prevailing,
            along,
        })
    }

    pub fn tree(&self) -> &FiniteTree {
        &self.tree
    }

    /// Index at every node of the tree.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn horizon(&self) -> usize {
        self.tree.depth()
    }
}

/// Arms sharing one discount, observed as a product space.
#[derive(Debug, Clone)]
pub struct ArmSet {
    arms: Vec<ArmInstance>,
    space: ProductSpace,
    root_dists: Vec<Vec<Vec<f64>>>,
    beta: f64,
}

impl ArmSet {
    pub fn new(trees: Vec<FiniteTree>) -> Result<Self> {
        let beta = trees
            .first()
            .ok_or_else(|| Error::domain("an arm set needs at least one arm"))?
            .beta();
        if trees.iter().any(|t| t.beta() != beta) {
            return Err(Error::domain("all arms must share one discount"));
        }
        check_horizons(&trees.iter().map(FiniteTree::depth).collect::<Vec<_>>())?;
        let root_dists = trees
            .iter()
            .map(|t| t.leaf_distributions(0))
            .collect::<Result<_>>()?;
        let arms = trees
            .iter()
            .cloned()
            .map(ArmInstance::new)
            .collect::<Result<_>>()?;
        Ok(Self {
            arms,
            space: ProductSpace::new(trees)?,
            root_dists,
            beta,
        })
    }

    pub fn arms(&self) -> &[ArmInstance] {
        &self.arms
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.arms.iter().map(ArmInstance::horizon).collect()
    }

    /// Supremum over product measures of the expectation of a joint payoff.
    pub fn sup_expectation(&self, payoff: &[f64]) -> f64 {
        let dists: Vec<&[Vec<f64>]> = self.root_dists.iter().map(Vec::as_slice).collect();
        contract_sup(&dists, payoff)
    }

    /// `beta^n` times the cost and the prevailing charge of play `n`, for
    /// `n = 1..=L`, on joint leaf `joint`.
    pub fn play_terms(&self, strategy: &AllocationStrategy, joint: usize) -> (Vec<f64>, Vec<f64>) {
        let leaves = self.space.decode(joint);
        let plays = strategy.plays(&leaves);
        let counts = strategy.counting(&leaves);
        let mut discount = 1.0;
        plays
            .iter()
            .zip(counts)
            .map(|(&m, t)| {
                discount *= self.beta;
                let arm = &self.arms[m];
                (
                    discount * arm.costs[leaves[m]][t - 1],
                    discount * arm.prevailing[leaves[m]][t - 1],
                )
            })
            .unzip()
    }

    /// Discounted cost net of the prevailing charges, per joint leaf.
    pub fn net_payoff(&self, strategy: &AllocationStrategy) -> Vec<f64> {
        (0..self.space.leaf_count())
            .map(|j| {
                let (costs, charges) = self.play_terms(strategy, j);
                costs.iter().sum::<f64>() - charges.iter().sum::<f64>()
            })
            .collect()
    }

    /// Whether `strategy` only leaves an arm once its index exceeds the
    /// running maximum of the indices already passed on that arm.
    pub fn respects_running_max(&self, strategy: &AllocationStrategy) -> bool {
        (0..self.space.leaf_count()).all(|j| {
            let leaves = self.space.decode(j);
            let plays = strategy.plays(&leaves);
            let counts = strategy.counting(&leaves);
            plays.windows(2).zip(&counts).all(|(pair, &t)| {
                let arm = &self.arms[pair[0]];
                let leaf = leaves[pair[0]];
                let must_stay = t < arm.horizon()
                    && arm.along[leaf][t] <= arm.prevailing[leaf][t - 1] + TIE_TOL;
                !must_stay || pair[1] == pair[0]
            })
        })
    }

    /// Always plays the arm whose index at its current node is lowest,
    /// preferring the lowest arm number on ties and skipping exhausted arms.
    pub fn lowest_index_strategy(&self) -> AllocationStrategy {
        fn build(set: &ArmSet, nodes: &mut Vec<usize>, played: &mut Vec<usize>) -> Arc<Plan> {
            let mut best: Option<usize> = None;
            for (m, arm) in set.arms.iter().enumerate() {
                if played[m] < arm.horizon()
                    && best.map_or(true, |b| arm.gammas[nodes[m]] < set.arms[b].gammas[nodes[b]])
                {
                    best = Some(m);
                }
            }
            let Some(arm) = best else {
                return Arc::new(Plan::Done);
            };
            let here = nodes[arm];
            played[arm] += 1;
            let next = [false, true].map(|outcome| {
                nodes[arm] = child(here, outcome);
                build(set, nodes, played)
            });
            nodes[arm] = here;
            played[arm] -= 1;
            Arc::new(Plan::Play { arm, next })
        }
        let mut nodes = vec![0; self.arms.len()];
        let mut played = vec![0; self.arms.len()];
        AllocationStrategy {
            horizons: self.horizons(),
            plan: build(self, &mut nodes, &mut played),
        }
    }

    pub fn ledger(&self, strategy: &AllocationStrategy) -> CompensatorLedger {
        let value = gittins_value(strategy, self);
        let mut gains = Vec::with_capacity(self.space.leaf_count());
        let mut compensators = Vec::with_capacity(self.space.leaf_count());
        for j in 0..self.space.leaf_count() {
            let (costs, mut charges) = self.play_terms(strategy, j);
            charges[0] += value;
            gains.push(costs);
            compensators.push(charges);
        }
        CompensatorLedger {
            value,
            gains,
            compensators,
        }
    }
}

/// Gittins value of `strategy`: the supremum expectation of the discounted
/// cost net of each arm's prevailing charge.
pub fn gittins_value(strategy: &AllocationStrategy, arms: &ArmSet) -> f64 {
    arms.sup_expectation(&arms.net_payoff(strategy))
}

/// Discounted costs and the compensating charges of one strategy, per joint
/// leaf. The first charge carries the strategy's Gittins value; later charges
/// are the discounted prevailing charges.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatorLedger {
    pub value: f64,
    /// `[joint][n - 1]`: `beta^n` times the cost of play `n`.
    pub gains: Vec<Vec<f64>>,
    /// `[joint][n - 1]`: the charge for play `n`.
    pub compensators: Vec<Vec<f64>>,
}

impl CompensatorLedger {
    /// Total compensation per joint leaf.
    pub fn static_compensator(&self) -> Vec<f64> {
        self.compensators.iter().map(|c| c.iter().sum()).collect()
    }

    /// Total cost net of compensation per joint leaf.
    pub fn residual(&self) -> Vec<f64> {
        self.gains
            .iter()
            .zip(&self.compensators)
            .map(|(g, c)| g.iter().sum::<f64>() - c.iter().sum::<f64>())
            .collect()
    }
}

fn running_sums(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Every strategy has a nonnegative Gittins value, strategies that respect the
/// running maximum have a nonpositive one, and the lowest-index strategy
/// accumulates the least compensation along every path.
pub fn check_sandwich_and_optimality(arms: &ArmSet, tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "sandwich_and_optimality",
        "Gittins values are nonnegative, vanish under running-maximum play, and lowest-index play pays least",
    );
    let strategies = match enumerate_strategies(&arms.horizons()) {
        Ok(s) => s,
        Err(err) => {
            report.fail(err.to_string());
            return report;
        }
    };
    let star = arms.lowest_index_strategy();
    let star_ledger = arms.ledger(&star);
    report.expect(star_ledger.value.abs() <= tol.solver, || {
        format!("lowest-index strategy has value {:e}", star_ledger.value)
    });
    let star_paths: Vec<(Vec<f64>, Vec<f64>)> = (0..arms.space.leaf_count())
        .map(|j| {
            let (_, charges) = arms.play_terms(&star, j);
            (running_sums(&charges), running_sums(&star_ledger.compensators[j]))
        })
        .collect();
    let mut best_respecting = f64::INFINITY;
    for (i, strategy) in strategies.iter().enumerate() {
        let ledger = arms.ledger(strategy);
        let v = ledger.value;
        report.expect(v >= -tol.solver, || format!("strategy {i} has value {v:e}"));
        if arms.respects_running_max(strategy) {
            best_respecting = best_respecting.min(v);
            report.expect(v <= tol.solver, || {
                format!("running-maximum strategy {i} has value {v:e}")
            });
        }
        let residual = arms.sup_expectation(&ledger.residual());
        report.expect(residual.abs() <= tol.accumulated, || {
            format!("strategy {i}: compensated cost has expectation {residual:e}")
        });
        for (j, (star_charges, star_comp)) in star_paths.iter().enumerate() {
            let (_, charges) = arms.play_terms(strategy, j);
            let charges = running_sums(&charges);
            let comp = running_sums(&ledger.compensators[j]);
            let worst = star_charges
                .iter()
                .zip(&charges)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            report.expect(worst <= tol.accumulated, || {
                format!("strategy {i}, path {j}: lowest-index charges exceed by {worst:e}")
            });
            let worst = star_comp
                .iter()
                .zip(&comp)
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            report.expect(worst <= tol.solver, || {
                format!("strategy {i}, path {j}: lowest-index compensator exceeds by {worst:e}")
            });
        }
    }
    report.expect(best_respecting.abs() <= tol.solver, || {
        format!("best running-maximum strategy has value {best_respecting:e}")
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_tree(depth: usize, theta: &[f64], cost: f64) -> FiniteTree {
        FiniteTree::new(
            depth,
            vec![theta.to_vec(); (1 << depth) - 1],
            (0..(1 << (depth + 1)) - 1)
                .map(|id| if id == 0 { 0.0 } else { cost })
                .collect(),
            0.9,
        )
        .unwrap()
    }

    #[test]
    fn counts() {
        assert_eq!(strategy_count(&[1, 1]), 2);
        assert_eq!(strategy_count(&[2, 1]), 5);
        assert_eq!(strategy_count(&[2, 2]), 50);
        assert_eq!(strategy_count(&[3, 1]), 26);
        assert_eq!(strategy_count(&[3, 2]), 3176);
        assert_eq!(enumerate_strategies(&[2, 2]).unwrap().len(), 50);
        assert_eq!(enumerate_strategies(&[3, 2]).unwrap().len(), 3176);
        assert_eq!(enumerate_orders(&[1, 1]).unwrap().len(), 2);
        assert_eq!(enumerate_orders(&[2, 1]).unwrap(), vec![
            vec![0, 0, 1],
            vec![0, 1, 0],
            vec![1, 0, 0]
        ]);
        assert!(matches!(enumerate_strategies(&[3, 3]), Err(Error::Guard(_))));
        assert!(matches!(enumerate_strategies(&[5, 4]), Err(Error::Guard(_))));
    }

    #[test]
    fn strategies_play_each_arm_its_horizon() {
        for s in enumerate_strategies(&[2, 2]).unwrap() {
            for a in 0..4 {
                for b in 0..4 {
                    let eta = s.recording(&[a, b]);
                    assert_eq!(eta.last().unwrap(), &vec![2, 2]);
                    let t = s.counting(&[a, b]);
                    let plays = s.plays(&[a, b]);
                    for n in 0..4 {
                        assert_eq!(t[n], 1 + eta[n][plays[n]]);
                    }
                }
            }
        }
    }

    #[test]
    fn order_strategies_ignore_outcomes() {
        let s = AllocationStrategy::from_order(&[2, 1], &[0, 1, 0]).unwrap();
        assert_eq!(s.plays(&[3, 0]), vec![0, 1, 0]);
        assert_eq!(s.counting(&[3, 0]), vec![1, 1, 2]);
        assert!(AllocationStrategy::from_order(&[2, 1], &[0, 1]).is_err());
    }

    #[test]
    fn single_arm_straight_through_is_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let set = ArmSet::new(vec![FiniteTree::random(&mut rng, 3).unwrap()]).unwrap();
        let only = enumerate_strategies(&[3]).unwrap();
        assert_eq!(only.len(), 1);
        assert!(gittins_value(&only[0], &set).abs() < 1e-8);
    }

    #[test]
    fn constant_costs_give_zero_values() {
        let set = ArmSet::new(vec![
            constant_tree(2, &[0.2, 0.7], 0.3),
            constant_tree(2, &[0.5], 0.6),
        ])
        .unwrap();
        for s in enumerate_strategies(&[2, 2]).unwrap() {
            assert!(gittins_value(&s, &set).abs() < 1e-10);
        }
    }

    #[test]
    fn cheaper_arm_goes_first() {
        let set = ArmSet::new(vec![
            constant_tree(1, &[0.5], 0.7),
            constant_tree(1, &[0.5], 0.2),
        ])
        .unwrap();
        assert_eq!(set.lowest_index_strategy().plays(&[0, 0]), vec![1, 0]);
        let r = check_sandwich_and_optimality(&set, Tolerances::default());
        assert!(r.passed(), "{r}");
    }

    #[test]
    fn identical_arms_tie() {
        let tree = constant_tree(1, &[0.3, 0.6], 0.0);
        let set = ArmSet::new(vec![tree.clone(), tree]).unwrap();
        let a = AllocationStrategy::from_order(&[1, 1], &[0, 1]).unwrap();
        let b = AllocationStrategy::from_order(&[1, 1], &[1, 0]).unwrap();
        assert_eq!(gittins_value(&a, &set), gittins_value(&b, &set));
        assert_eq!(set.lowest_index_strategy().plays(&[1, 0]), vec![0, 1]);
    }

    #[test]
    fn random_instances_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for depths in [[2, 2], [3, 2]] {
            let trees = depths
                .iter()
                .map(|&d| FiniteTree::random_with_beta(&mut rng, d, 0.9).unwrap())
                .collect();
            let set = ArmSet::new(trees).unwrap();
            let r = check_sandwich_and_optimality(&set, Tolerances::default());
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn mismatched_discounts_are_rejected() {
        let a = constant_tree(1, &[0.5], 0.1);
        let b = FiniteTree::new(1, vec![vec![0.5]], vec![0.0; 3], 0.5).unwrap();
        assert!(ArmSet::new(vec![a, b]).is_err());
    }
}
