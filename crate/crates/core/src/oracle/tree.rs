use rand::Rng;

use crate::error::{Error, Result};
use crate::nle::{credible_set, posterior_update, CredibleModel, PosteriorState};

use super::{EXACT_TOL, MAX_MEASURES, MAX_TREE_DEPTH};

/// Upper bound on per-step costs.
pub const COST_CAP: f64 = 1.0;

/// Binary filtered space of fixed depth with a finite set of success
/// probabilities at every internal node and a cost on every non-root node.
///
/// Nodes use heap numbering: the root is 0 and the children of `id` are
/// `2 id + 1` (outcome 0) and `2 id + 2` (outcome 1). A leaf's index is its
/// outcome path read as a binary number, first outcome most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTree {
    depth: usize,
    theta_sets: Vec<Vec<f64>>,
    costs: Vec<f64>,
    beta: f64,
}

impl FiniteTree {
    pub fn new(depth: usize, theta_sets: Vec<Vec<f64>>, costs: Vec<f64>, beta: f64) -> Result<Self> {
        if depth == 0 {
            return Err(Error::domain("tree depth must be at least 1"));
        }
        if depth > MAX_TREE_DEPTH {
            return Err(Error::Guard(format!(
                "tree depth {depth} exceeds the enumeration cap {MAX_TREE_DEPTH}"
            )));
        }
        let internal = (1 << depth) - 1;
        if theta_sets.len() != internal {
            return Err(Error::domain(format!(
                "depth {depth} needs {internal} theta sets, got {}",
                theta_sets.len()
            )));
        }
        for (id, set) in theta_sets.iter().enumerate() {
            if set.is_empty() || set.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::domain(format!(
                    "theta set of node {id} must be a nonempty subset of [0, 1], got {set:?}"
                )));
            }
        }
        let nodes = (1 << (depth + 1)) - 1;
        if costs.len() != nodes {
            return Err(Error::domain(format!(
                "depth {depth} needs {nodes} costs, got {}",
                costs.len()
            )));
        }
        if let Some(bad) = costs.iter().find(|c| !(0.0..=COST_CAP).contains(*c)) {
            return Err(Error::domain(format!("cost {bad} outside [0, {COST_CAP}]")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::domain(format!("discount must lie in (0, 1), got {beta}")));
        }
        Ok(Self {
            depth,
            theta_sets,
            costs,
            beta,
        })
    }

    /// Tree whose theta sets are the endpoints of the credible interval at the
    /// posterior reached along each path, and whose cost is the outcome.
    pub fn from_credible_model(
        start: PosteriorState,
        model: CredibleModel,
        depth: usize,
        beta: f64,
    ) -> Result<Self> {
        if depth == 0 || depth > MAX_TREE_DEPTH {
            return Err(Error::Guard(format!(
                "tree depth {depth} outside 1..={MAX_TREE_DEPTH}"
            )));
        }
        let internal = (1 << depth) - 1;
        let mut states = vec![start; internal];
        let mut theta_sets = Vec::with_capacity(internal);
        for id in 0..internal {
            if id > 0 {
                let parent = (id - 1) / 2;
                states[id] = posterior_update(states[parent], id % 2 == 0);
            }
            let theta = credible_set(states[id], model);
            theta_sets.push(if theta.lo() == theta.hi() {
                vec![theta.lo()]
            } else {
                vec![theta.lo(), theta.hi()]
            });
        }
        let costs = (0..(1 << (depth + 1)) - 1)
            .map(|id| if id > 0 && id % 2 == 0 { 1.0 } else { 0.0 })
            .collect();
        Self::new(depth, theta_sets, costs, beta)
    }

    /// Random tree: theta sets of one or two uniform points, uniform costs
    /// in `[0, 1)`, and a discount in `[0.5, 0.99)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, depth: usize) -> Result<Self> {
        let beta = rng.gen_range(0.5..0.99);
        Self::random_with_beta(rng, depth, beta)
    }

    pub fn random_with_beta<R: Rng + ?Sized>(rng: &mut R, depth: usize, beta: f64) -> Result<Self> {
        let internal = (1usize << depth).saturating_sub(1);
        let theta_sets = (0..internal)
            .map(|_| {
                let size = rng.gen_range(1..=2);
                (0..size).map(|_| rng.gen::<f64>()).collect()
            })
            .collect();
        let nodes = (1usize << (depth + 1)).saturating_sub(1);
        let costs = (0..nodes)
            .map(|id| if id == 0 { 0.0 } else { rng.gen::<f64>() })
            .collect();
        Self::new(depth, theta_sets, costs, beta)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta_set(&self, id: usize) -> &[f64] {
        &self.theta_sets[id]
    }

    pub fn cost(&self, id: usize) -> f64 {
        self.costs[id]
    }

    pub fn node_count(&self) -> usize {
        self.costs.len()
    }

    pub fn internal_count(&self) -> usize {
        self.theta_sets.len()
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }

    /// Heap id of the first leaf.
    pub fn first_leaf(&self) -> usize {
        (1 << self.depth) - 1
    }

    /// Node ids from depth 1 to the leaf along the path of `leaf`.
    pub fn path_nodes(&self, leaf: usize) -> Vec<usize> {
        let mut id = 0;
        (0..self.depth)
            .map(|t| {
                id = child(id, outcome_at(leaf, self.depth, t));
                id
            })
            .collect()
    }

    /// Leaves below `id`, as a range of leaf indices.
    pub fn leaves_below(&self, id: usize) -> std::ops::Range<usize> {
        let below = self.depth - level(id);
        let first = ((id + 1) << below) - 1 - self.first_leaf();
        first..first + (1 << below)
    }

    /// Number of extreme measures on the subtree rooted at `id`.
    pub fn measure_count(&self, id: usize) -> usize {
        if level(id) == self.depth {
            return 1;
        }
        let below = self
            .measure_count(child(id, false))
            .saturating_mul(self.measure_count(child(id, true)));
        self.theta_sets[id].len().saturating_mul(below)
    }

    /// Leaf distributions below `id`, one per choice of a theta at every
    /// internal node of the subtree. Entry `i` is the probability of the
    /// `i`-th leaf below `id`.
    pub fn leaf_distributions(&self, id: usize) -> Result<Vec<Vec<f64>>> {
        let count = self.measure_count(id);
        if count > MAX_MEASURES {
            return Err(Error::Guard(format!(
                "{count} extreme measures exceed the cap {MAX_MEASURES}"
            )));
        }
        Ok(self.distributions_unchecked(id))
    }

    fn distributions_unchecked(&self, id: usize) -> Vec<Vec<f64>> {
        if level(id) == self.depth {
            return vec![vec![1.0]];
        }
        let zeros = self.distributions_unchecked(child(id, false));
        let ones = self.distributions_unchecked(child(id, true));
        let mut out = Vec::with_capacity(self.theta_sets[id].len() * zeros.len() * ones.len());
        for &theta in &self.theta_sets[id] {
            for d0 in &zeros {
                for d1 in &ones {
                    out.push(
                        d0.iter()
                            .map(|p| (1.0 - theta) * p)
                            .chain(d1.iter().map(|p| theta * p))
                            .collect(),
                    );
                }
            }
        }
        out
    }
}

pub(crate) fn level(id: usize) -> usize {
    (id + 1).ilog2() as usize
}

pub(crate) fn child(id: usize, outcome: bool) -> usize {
    2 * id + 1 + outcome as usize
}

/// Outcome at step `t` (0-based) of the path encoded by `leaf`.
pub(crate) fn outcome_at(leaf: usize, depth: usize, t: usize) -> bool {
    (leaf >> (depth - 1 - t)) & 1 == 1
}

/// Conditional supremum below `id` by backward recursion, maximizing over the
/// theta set at each node. `payoff` holds one value per leaf of the tree.
pub fn sup_recursive(tree: &FiniteTree, id: usize, payoff: &[f64]) -> f64 {
    if level(id) == tree.depth() {
        return payoff[id - tree.first_leaf()];
    }
    let f0 = sup_recursive(tree, child(id, false), payoff);
    let f1 = sup_recursive(tree, child(id, true), payoff);
    tree.theta_set(id)
        .iter()
        .map(|&theta| theta * f1 + (1.0 - theta) * f0)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Conditional supremum below `id` as the largest classical expectation over
/// all extreme product measures.
pub fn sup_enumerated(tree: &FiniteTree, id: usize, payoff: &[f64]) -> Result<f64> {
    let leaves = &payoff[tree.leaves_below(id)];
    Ok(tree
        .leaf_distributions(id)?
        .iter()
        .map(|dist| dist.iter().zip(leaves).map(|(p, x)| p * x).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Supremum expectation of `payoff` conditional on node `id`, computed by
/// recursion and by enumeration. A disagreement beyond round-off is reported
/// as a numerical error.
pub fn sup_expectation(tree: &FiniteTree, id: usize, payoff: &[f64]) -> Result<f64> {
    if payoff.len() != tree.leaf_count() {
        return Err(Error::domain(format!(
            "payoff has {} entries for {} leaves",
            payoff.len(),
            tree.leaf_count()
        )));
    }
    let recursive = sup_recursive(tree, id, payoff);
    let enumerated = sup_enumerated(tree, id, payoff)?;
    if (recursive - enumerated).abs() > EXACT_TOL {
        return Err(Error::Numerical(format!(
            "recursion {recursive} and enumeration {enumerated} disagree at node {id}"
        )));
    }
    Ok(recursive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_tree(depth: usize, set: &[f64]) -> FiniteTree {
        let internal = (1 << depth) - 1;
        FiniteTree::new(
            depth,
            vec![set.to_vec(); internal],
            vec![0.0; (1 << (depth + 1)) - 1],
            0.9,
        )
        .unwrap()
    }

    fn ones_count(tree: &FiniteTree) -> Vec<f64> {
        (0..tree.leaf_count())
            .map(|leaf| leaf.count_ones() as f64)
            .collect()
    }

    #[test]
    fn heap_numbering() {
        let tree = uniform_tree(2, &[0.5]);
        assert_eq!(tree.path_nodes(0b01), vec![1, 4]);
        assert_eq!(tree.path_nodes(0b10), vec![2, 5]);
        assert_eq!(tree.leaves_below(2), 2..4);
        assert_eq!(tree.leaves_below(0), 0..4);
        assert_eq!(level(6), 2);
    }

    #[test]
    fn singleton_sets_give_classical_expectation() {
        let tree = uniform_tree(2, &[0.3]);
        let v = sup_expectation(&tree, 0, &ones_count(&tree)).unwrap();
        assert!((v - 0.6).abs() < 1e-15);
    }

    #[test]
    fn constant_payoff() {
        let tree = uniform_tree(3, &[0.1, 0.7]);
        let v = sup_expectation(&tree, 0, &[2.5; 8]).unwrap();
        assert!((v - 2.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_sets_count_of_ones() {
        // Depth 2 has three internal nodes, so 2^3 assignments; the count of
        // ones is maximized by the upper point everywhere: 2 * 0.8.
        let tree = uniform_tree(2, &[0.2, 0.8]);
        assert_eq!(tree.leaf_distributions(0).unwrap().len(), 8);
        let v = sup_expectation(&tree, 0, &ones_count(&tree)).unwrap();
        assert!((v - 1.6).abs() < 1e-15);
        let deep = uniform_tree(3, &[0.2, 0.8]);
        assert_eq!(deep.leaf_distributions(0).unwrap().len(), 128);
        assert!((sup_expectation(&deep, 0, &ones_count(&deep)).unwrap() - 2.4).abs() < 1e-14);
    }

    #[test]
    fn distributions_are_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let tree = FiniteTree::random(&mut rng, 3).unwrap();
        for id in [0, 2, 5] {
            for dist in tree.leaf_distributions(id).unwrap() {
                assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn credible_model_tree_uses_outcome_costs() {
        let start = PosteriorState::new(0.5, 2.0).unwrap();
        let model = CredibleModel::new(0.5, 1.0).unwrap();
        let tree = FiniteTree::from_credible_model(start, model, 2, 0.9).unwrap();
        assert_eq!(tree.theta_set(0).len(), 2);
        assert!((tree.theta_set(0)[0] - 0.25).abs() < 1e-10);
        assert_eq!((tree.cost(1), tree.cost(2), tree.cost(6)), (0.0, 1.0, 1.0));
    }

    #[test]
    fn invalid_trees_are_rejected() {
        assert!(matches!(
            FiniteTree::new(5, vec![], vec![], 0.9),
            Err(Error::Guard(_))
        ));
        assert!(FiniteTree::new(1, vec![vec![]], vec![0.0; 3], 0.9).is_err());
        assert!(FiniteTree::new(1, vec![vec![0.5]], vec![0.0, 1.5, 0.0], 0.9).is_err());
        assert!(FiniteTree::new(1, vec![vec![0.5]], vec![0.0; 3], 1.0).is_err());
    }
}
