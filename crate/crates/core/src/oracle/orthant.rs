use rand::Rng;

use crate::error::{Error, Result};

use super::report::{CheckReport, Tolerances};
use super::tree::{sup_expectation, FiniteTree};

/// Independent trees observed jointly. Measures are products of one extreme
/// measure per tree; joint leaves are numbered in mixed radix with the first
/// tree most significant.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    trees: Vec<FiniteTree>,
}

impl ProductSpace {
    pub fn new(trees: Vec<FiniteTree>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::domain("a product space needs at least one tree"));
        }
        Ok(Self { trees })
    }

    pub fn trees(&self) -> &[FiniteTree] {
        &self.trees
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(FiniteTree::leaf_count).product()
    }

    /// Per-tree leaf indices of joint leaf `joint`.
    pub fn decode(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.trees.len()];
        for (slot, tree) in out.iter_mut().zip(&self.trees).rev() {
            *slot = joint % tree.leaf_count();
            joint /= tree.leaf_count();
        }
        out
    }

    pub fn encode(&self, leaves: &[usize]) -> usize {
        leaves
            .iter()
            .zip(&self.trees)
            .fold(0, |acc, (&leaf, tree)| acc * tree.leaf_count() + leaf)
    }

    /// Supremum over product measures of the expectation of `payoff`.
    pub fn sup_expectation(&self, payoff: &[f64]) -> Result<f64> {
        Ok(self.conditional(payoff, &vec![0; self.trees.len()])?[0])
    }

    /// Conditional supremum at the deterministic multi-time `times`: one value
    /// per joint leaf, constant across leaves that agree on every tree's
    /// first `times[m]` outcomes.
    pub fn conditional(&self, payoff: &[f64], times: &[usize]) -> Result<Vec<f64>> {
        if payoff.len() != self.leaf_count() {
            return Err(Error::domain(format!(
                "payoff has {} entries for {} joint leaves",
                payoff.len(),
                self.leaf_count()
            )));
        }
        if times.len() != self.trees.len()
            || times.iter().zip(&self.trees).any(|(&t, tree)| t > tree.depth())
        {
            return Err(Error::domain(format!("multi-time {times:?} outside the trees")));
        }
        // Distributions below every node at the requested level, per tree.
        let dists: Vec<Vec<Vec<Vec<f64>>>> = self
            .trees
            .iter()
            .zip(times)
            .map(|(tree, &t)| {
                ((1 << t) - 1..(1 << (t + 1)) - 1)
                    .map(|id| tree.leaf_distributions(id))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let blocks: Vec<usize> = times.iter().map(|&t| 1 << t).collect();
        let block_count: usize = blocks.iter().product();
        let mut out = vec![0.0; payoff.len()];
        for block in 0..block_count {
            let mut rest = block;
            let mut nodes = vec![0; blocks.len()];
            for (slot, &b) in nodes.iter_mut().zip(&blocks).rev() {
                *slot = rest % b;
                rest /= b;
            }
            let ranges: Vec<std::ops::Range<usize>> = self
                .trees
                .iter()
                .zip(times)
                .zip(&nodes)
                .map(|((tree, &t), &k)| tree.leaves_below((1 << t) - 1 + k))
                .collect();
            let members = joint_members(self, &ranges);
            let tensor: Vec<f64> = members.iter().map(|&j| payoff[j]).collect();
            let local: Vec<&[Vec<f64>]> = dists
                .iter()
                .zip(&nodes)
                .map(|(per_node, &k)| per_node[k].as_slice())
                .collect();
            let value = contract_sup(&local, &tensor);
            for j in members {
                out[j] = value;
            }
        }
        Ok(out)
    }
}

/// Joint leaves whose per-tree leaves fall in `ranges`, in row-major order.
fn joint_members(space: &ProductSpace, ranges: &[std::ops::Range<usize>]) -> Vec<usize> {
    let mut out = vec![0];
    for (range, tree) in ranges.iter().zip(space.trees()) {
        out = out
            .iter()
            .flat_map(|&prefix| range.clone().map(move |leaf| prefix * tree.leaf_count() + leaf))
            .collect();
    }
    out
}

/// `max` over one distribution per axis of the multilinear form defined by
/// `tensor` (row-major, first axis outermost).
pub(crate) fn contract_sup(dists: &[&[Vec<f64>]], tensor: &[f64]) -> f64 {
    let Some((first, rest)) = dists.split_first() else {
        return tensor[0];
    };
    let stride = tensor.len() / first[0].len();
    first
        .iter()
        .map(|d| {
            let mut reduced = vec![0.0; stride];
            for (p, row) in d.iter().zip(tensor.chunks_exact(stride)) {
                for (acc, x) in reduced.iter_mut().zip(row) {
                    *acc += p * x;
                }
            }
            contract_sup(rest, &reduced)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Multi-times `s <= t` componentwise over two trees.
fn ordered_times(a: &FiniteTree, b: &FiniteTree) -> Vec<([usize; 2], [usize; 2])> {
    let all: Vec<[usize; 2]> = (0..=a.depth())
        .flat_map(|i| (0..=b.depth()).map(move |j| [i, j]))
        .collect();
    let mut out = Vec::new();
    for &s in &all {
        for &t in &all {
            if s[0] <= t[0] && s[1] <= t[1] {
                out.push((s, t));
            }
        }
    }
    out
}

/// Independence, marginal projection and sub-consistency of the product
/// supremum, on `samples` random payoffs each.
pub fn check_orthant<R: Rng + ?Sized>(
    a: &FiniteTree,
    b: &FiniteTree,
    rng: &mut R,
    samples: usize,
    tol: Tolerances,
) -> CheckReport {
    let mut report = CheckReport::new(
        "orthant_expectation",
        "product supremum factorizes, projects to marginals and is sub-consistent",
    );
    let result = (|| -> Result<()> {
        let space = ProductSpace::new(vec![a.clone(), b.clone()])?;
        let (na, nb) = (a.leaf_count(), b.leaf_count());
        for sample in 0..samples {
            let f: Vec<f64> = (0..na).map(|_| rng.gen()).collect();
            let g: Vec<f64> = (0..nb).map(|_| rng.gen()).collect();
            let joint: Vec<f64> = (0..na * nb).map(|j| f[j / nb] * g[j % nb]).collect();
            let lhs = space.sup_expectation(&joint)?;
            let rhs = sup_expectation(a, 0, &f)? * sup_expectation(b, 0, &g)?;
            report.expect((lhs - rhs).abs() <= tol.exact, || {
                format!("sample {sample}: product {lhs} but factors give {rhs}")
            });

            let f: Vec<f64> = (0..na).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let only_a: Vec<f64> = (0..na * nb).map(|j| f[j / nb]).collect();
            let lhs = space.sup_expectation(&only_a)?;
            let rhs = sup_expectation(a, 0, &f)?;
            report.expect((lhs - rhs).abs() <= tol.exact, || {
                format!("sample {sample}: first-factor payoff gives {lhs}, marginal {rhs}")
            });
            let g: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let only_b: Vec<f64> = (0..na * nb).map(|j| g[j % nb]).collect();
            let lhs = space.sup_expectation(&only_b)?;
            let rhs = sup_expectation(b, 0, &g)?;
            report.expect((lhs - rhs).abs() <= tol.exact, || {
                format!("sample {sample}: second-factor payoff gives {lhs}, marginal {rhs}")
            });

            let x: Vec<f64> = (0..na * nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for (s, t) in ordered_times(a, b) {
                let direct = space.conditional(&x, &s)?;
                let inner = space.conditional(&x, &t)?;
                let iterated = space.conditional(&inner, &s)?;
                let worst = direct
                    .iter()
                    .zip(&iterated)
                    .map(|(d, i)| d - i)
                    .fold(f64::NEG_INFINITY, f64::max);
                report.expect(worst <= tol.exact, || {
                    format!("sample {sample}: conditioning at {s:?} then {t:?} loses {worst:e}")
                });
            }
        }
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}

fn one_step_tree(theta: &[f64]) -> Result<FiniteTree> {
    FiniteTree::new(1, vec![theta.to_vec()], vec![0.0; 3], 0.5)
}

/// Iterating the product supremum in the two possible orders on a fair coin
/// and a coin of unknown bias, for the payoff "both coins agree". Returns
/// the joint value, the value when the biased coin is revealed first and the
/// value when the fair coin is revealed first.
pub fn consistency_counterexample_values() -> Result<(f64, f64, f64)> {
    let space = ProductSpace::new(vec![one_step_tree(&[0.5])?, one_step_tree(&[0.0, 1.0])?])?;
    let agree = [1.0, 0.0, 0.0, 1.0];
    let joint = space.sup_expectation(&agree)?;
    let biased_first = space.sup_expectation(&space.conditional(&agree, &[0, 1])?)?;
    let fair_first = space.sup_expectation(&space.conditional(&agree, &[1, 0])?)?;
    Ok((joint, biased_first, fair_first))
}

/// The product supremum is not consistent: the two iteration orders differ.
pub fn consistency_counterexample(tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "orthant_consistency_counterexample",
        "iterated orthant expectations depend on the order of revelation",
    );
    match consistency_counterexample_values() {
        Ok((joint, biased_first, fair_first)) => {
            for (name, got, want) in [
                ("joint", joint, 0.5),
                ("biased coin first", biased_first, 0.5),
                ("fair coin first", fair_first, 1.0),
            ] {
                report.expect((got - want).abs() <= tol.exact, || {
                    format!("{name}: {got} instead of {want}")
                });
            }
        }
        Err(err) => report.fail(err.to_string()),
    }
    report
}

/// The four expectations built from two independent coins with the given mean
/// ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleValues {
    pub first: f64,
    pub second: f64,
    /// Expectation of the first coin less the average of both.
    pub first_excess: f64,
    /// Expectation of the second coin less the average of both.
    pub second_excess: f64,
}

pub fn counterexample_values(
    first_range: (f64, f64),
    second_range: (f64, f64),
) -> Result<CounterexampleValues> {
    let endpoints = |(lo, hi): (f64, f64)| if lo == hi { vec![lo] } else { vec![lo, hi] };
    let space = ProductSpace::new(vec![
        one_step_tree(&endpoints(first_range))?,
        one_step_tree(&endpoints(second_range))?,
    ])?;
    let coins: Vec<(f64, f64)> = (0..4)
        .map(|j| {
            let leaves = space.decode(j);
            (leaves[0] as f64, leaves[1] as f64)
        })
        .collect();
    let expect = |f: &dyn Fn(f64, f64) -> f64| {
        let payoff: Vec<f64> = coins.iter().map(|&(x, y)| f(x, y)).collect();
        space.sup_expectation(&payoff)
    };
    Ok(CounterexampleValues {
        first: expect(&|x, _| x)?,
        second: expect(&|_, y| y)?,
        first_excess: expect(&|x, y| x - (x + y) / 2.0)?,
        second_excess: expect(&|x, y| y - (x + y) / 2.0)?,
    })
}

/// Ranking by expectation and ranking by expected excess over a random
/// common benchmark disagree, so the benchmark must be deterministic.
pub fn compensator_counterexample(tol: Tolerances) -> CheckReport {
    let mut report = CheckReport::new(
        "random_compensator_counterexample",
        "a random benchmark can reverse the ranking by expectation",
    );
    let result = (|| -> Result<()> {
        let v = counterexample_values((0.4, 0.5), (0.0, 0.6))?;
        for (name, got, want) in [
            ("first", v.first, 0.5),
            ("second", v.second, 0.6),
            ("first excess", v.first_excess, 0.25),
            ("second excess", v.second_excess, 0.1),
        ] {
            report.expect((got - want).abs() <= tol.exact, || {
                format!("{name}: {got} instead of {want}")
            });
        }
        report.expect(v.first < v.second && v.first_excess > v.second_excess, || {
            format!("no reversal: {v:?}")
        });
        let swapped = counterexample_values((0.0, 0.6), (0.4, 0.5))?;
        report.expect(
            swapped.first > swapped.second && swapped.first_excess < swapped.second_excess,
            || format!("swapping the ranges does not flip both rankings: {swapped:?}"),
        );
        let points = counterexample_values((0.45, 0.45), (0.3, 0.3))?;
        let by_mean = points.first - points.second;
        let by_excess = points.first_excess - points.second_excess;
        report.expect((by_mean - by_excess).abs() <= tol.exact, || {
            format!("point ranges disagree: {points:?}")
        });
        Ok(())
    })();
    if let Err(err) = result {
        report.fail(err.to_string());
    }
    report
}
