//! `(alpha, theta)`-recursive trees, root stripping, the generalised Pólya urn that realises
//! coagulation on the tree, and the weighted stage construction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fenwick::WeightTree;
use crate::numerics::{sample_beta_pair, RngStream};
use crate::partition::{empirical_frequencies, BlockFrequencies, MassPartition, Params, SetPartition, Tail};
use crate::samplers::Truncation;

/// Rooted tree on `{0, ..., n}` whose labels increase away from the root `0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecursiveTree {
    /// `parent[v - 1]` is the parent of vertex `v`.
    parent: Vec<usize>,
    /// `child_count[v]` for `v in 0..=n`.
    child_count: Vec<usize>,
}

impl RecursiveTree {
    /// Builds a tree from the parents of vertices `1..=n`; requires `parent(v) < v`.
    pub fn from_parents(parents: &[usize]) -> Result<Self> {
        if parents.is_empty() {
            return domain("a recursive tree needs at least vertex 1");
        }
        let mut child_count = vec![0; parents.len() + 1];
        for (k, &p) in parents.iter().enumerate() {
            let v = k + 1;
            if p >= v {
                return domain(format!("parent({v}) = {p} is not below {v}"));
            }
            child_count[p] += 1;
        }
        Ok(RecursiveTree { parent: parents.to_vec(), child_count })
    }

    /// Number of non-root vertices.
    pub fn n(&self) -> usize {
        self.parent.len()
    }

    /// Parent of `v >= 1`.
    pub fn parent(&self, v: usize) -> usize {
        self.parent[v - 1]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.child_count[v]
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (v + 1..=self.n()).filter(|&w| self.parent(w) == v).collect()
    }

    /// Directed edges `parent -> child` in DOT syntax.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph recursive_tree {\n");
        for v in 1..=self.n() {
            writeln!(s, "  {} -> {v};", self.parent(v)).unwrap();
        }
        s.push_str("}\n");
        s
    }

    /// `vertex,parent` CSV.
    pub fn to_parent_csv(&self) -> String {
        let mut s = String::from("vertex,parent\n");
        for v in 1..=self.n() {
            writeln!(s, "{v},{}", self.parent(v)).unwrap();
        }
        s
    }
}

/// Attachment weights: root `theta + alpha k_0`, vertex `j >= 1` `1 - alpha + alpha k_j`.
pub fn grow(params: Params, n: usize, rng: &mut RngStream) -> Result<RecursiveTree> {
    if n == 0 {
        return domain("grow requires n >= 1");
    }
    let (a, t) = (params.alpha(), params.theta());
    let mut w = WeightTree::with_capacity(n + 1);
    w.push(t + a);
    w.push(1.0 - a);
    let mut parent = Vec::with_capacity(n);
    parent.push(0);
    let mut child_count = vec![0usize; n + 1];
    child_count[0] = 1;
    for m in 1..n {
        // Total weight is theta + m before vertex m + 1 arrives.
        let j = w.find(rng.uniform() * (t + m as f64));
        parent.push(j);
        child_count[j] += 1;
        w.add(j, a);
        w.push(1.0 - a);
    }
    Ok(RecursiveTree { parent, child_count })
}

/// Exact probability that [`grow`] produces `tree`.
pub fn tree_exact_prob(params: Params, tree: &RecursiveTree) -> f64 {
    let (a, t) = (params.alpha(), params.theta());
    let mut kids = vec![0usize; tree.n() + 1];
    kids[0] = 1;
    let mut prob = 1.0;
    for v in 2..=tree.n() {
        let p = tree.parent(v);
        let w = if p == 0 { t + a * kids[0] as f64 } else { 1.0 - a + a * kids[p] as f64 };
        prob *= w / (t + (v - 1) as f64);
        kids[p] += 1;
    }
    prob
}

/// `top[v]` is the ancestor of `v` whose parent lies in `{0..=i}`, for `v > i`.
fn tops(t: &RecursiveTree, i: usize) -> Vec<usize> {
    let n = t.n();
    let mut top = vec![0usize; n + 1];
    for v in i + 1..=n {
        let p = t.parent(v);
        top[v] = if p <= i { v } else { top[p] };
    }
    top
}

/// Components after deleting vertices `0..=i`, as a partition of `{i+1, ..., n}`.
pub fn strip(t: &RecursiveTree, i: usize) -> Result<SetPartition> {
    if i >= t.n() {
        return domain(format!("strip depth {i} must be below n = {}", t.n()));
    }
    let top = tops(t, i);
    Ok(SetPartition::from_labels(i + 1, &top[i + 1..]))
}

/// `T_{n,k}`: the number of vertices in the subtree rooted at `k`, `k` included.
pub fn branch_size(t: &RecursiveTree, k: usize) -> Result<usize> {
    if k == 0 || k > t.n() {
        return domain(format!("branch index {k} must lie in 1..={}", t.n()));
    }
    let mut inside = vec![false; t.n() + 1];
    inside[k] = true;
    let mut count = 1;
    for v in k + 1..=t.n() {
        if inside[t.parent(v)] {
            inside[v] = true;
            count += 1;
        }
    }
    Ok(count)
}

/// Subtree sizes of every vertex; entry `0` is `n + 1`.
pub fn all_branch_sizes(t: &RecursiveTree) -> Vec<usize> {
    let mut size = vec![1usize; t.n() + 1];
    for v in (1..=t.n()).rev() {
        size[t.parent(v)] += size[v];
    }
    size
}

/// Strict descendants of `i`, increasing.
pub fn descendants(t: &RecursiveTree, i: usize) -> Result<Vec<usize>> {
    if i == 0 || i > t.n() {
        return domain(format!("vertex {i} must lie in 1..={}", t.n()));
    }
    let mut inside = vec![false; t.n() + 1];
    inside[i] = true;
    let mut out = Vec::new();
    for v in i + 1..=t.n() {
        if inside[t.parent(v)] {
            inside[v] = true;
            out.push(v);
        }
    }
    Ok(out)
}

/// Empirical block frequencies of `strip(t, i)` for `i = 0..=depth`.
pub fn tree_frequency_chain(t: &RecursiveTree, depth: usize) -> Result<Vec<BlockFrequencies>> {
    if depth >= t.n() {
        return domain(format!("depth {depth} must be below n = {}", t.n()));
    }
    (0..=depth).map(|i| strip(t, i).map(|p| empirical_frequencies(&p))).collect()
}

/// `level,label,block` rows for `strip(t, i)`, `i = 0..=depth`.
pub fn partitions_csv(t: &RecursiveTree, depth: usize) -> Result<String> {
    if depth >= t.n() {
        return domain(format!("strip depth {depth} must be below n = {}", t.n()));
    }
    let mut s = String::from("level,label,block\n");
    for i in 0..=depth {
        let p = strip(t, i)?;
        for (l, b) in p.block_of().iter().enumerate() {
            writeln!(s, "{i},{},{b}", l + p.lo()).unwrap();
        }
    }
    Ok(s)
}

/// Urn indicators `I_1, ..., I_m` with `P(I_{k+1} = 1 | past) = (1 - alpha + alpha S_k)/(theta + i + 1 + alpha k)`.
pub fn urn_indicators(params: Params, i: usize, m: usize, rng: &mut RngStream) -> Result<Vec<bool>> {
    if m == 0 {
        return domain("urn_indicators requires m >= 1");
    }
    let (a, t) = (params.alpha(), params.theta());
    let base = t + i as f64 + 1.0;
    let mut ones = 0usize;
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let p = (1.0 - a + a * ones as f64) / (base + a * k as f64);
        let hit = rng.bernoulli(p);
        ones += hit as usize;
        out.push(hit);
    }
    Ok(out)
}

/// Merges `{i + 1}` with the marked blocks of `b_next`, a partition of `{i+2, ..., n}`.
pub fn urn_coagulate(b_next: &SetPartition, indicators: &[bool], i: usize) -> Result<SetPartition> {
    if indicators.len() != b_next.num_blocks() {
        return domain(format!(
            "{} indicators for {} blocks",
            indicators.len(),
            b_next.num_blocks()
        ));
    }
    if b_next.lo() != i + 2 {
        return domain(format!("b_next must start at label {}, got {}", i + 2, b_next.lo()));
    }
    let mut first = vec![i + 1];
    let mut rest = Vec::new();
    for (b, &m) in b_next.blocks().iter().zip(indicators) {
        if m {
            first.extend_from_slice(b);
        } else {
            rest.push(b.clone());
        }
    }
    first.sort_unstable();
    let mut blocks = vec![first];
    blocks.extend(rest);
    SetPartition::new(i + 1, blocks)
}

/// Children of one labelled vertex in the stage construction, discovered in size-biased order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexSticks {
    /// Absolute weights of the discovered children.
    pub weights: Vec<f64>,
    /// Label of each discovered child, if labelled.
    pub labels: Vec<Option<usize>>,
    /// Undiscovered weight.
    pub residual: f64,
    /// Second parameter of the splitting law (`theta` at the root, `1 - alpha` elsewhere).
    pub theta: f64,
}

impl VertexSticks {
    fn next_theta(&self, alpha: f64) -> f64 {
        self.theta + self.weights.len() as f64 * alpha
    }

    fn push_stick(&mut self, alpha: f64, rng: &mut RngStream) -> Result<usize> {
        let (b, c) = sample_beta_pair(1.0 - alpha, self.next_theta(alpha) + alpha, rng)?;
        self.weights.push(self.residual * b);
        self.labels.push(None);
        self.residual *= c;
        Ok(self.weights.len() - 1)
    }
}

/// State of the weighted stage construction after `stages` labelled vertices besides the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTree {
    pub params: Params,
    pub stages: usize,
    /// Weight of labelled vertex `v`; `vertex_weight[0] = 1`.
    pub vertex_weight: Vec<f64>,
    /// Parent of labelled vertex `v >= 1` at `parent[v - 1]`.
    pub parent: Vec<usize>,
    pub children: Vec<VertexSticks>,
    /// `G^(i)` for `i = 0..=stages`: ranked leaf weights, undiscovered weight as `PD` tails.
    pub history: Vec<MassPartition>,
}

impl StageTree {
    /// The recursive tree formed by the labelled vertices.
    pub fn tree(&self) -> RecursiveTree {
        RecursiveTree::from_parents(&self.parent).expect("stage labels increase away from the root")
    }

    /// Current ranked leaf weights.
    pub fn leaf_partition(&self) -> MassPartition {
        let a = self.params.alpha();
        let mut atoms = Vec::new();
        let mut residual = 0.0;
        let mut tails = Vec::new();
        for v in &self.children {
            for (w, l) in v.weights.iter().zip(&v.labels) {
                if l.is_none() {
                    atoms.push(*w);
                }
            }
            if v.residual > 0.0 {
                residual += v.residual;
                tails.push(Tail::pd(v.residual, a, v.next_theta(a)));
            }
        }
        MassPartition::from_parts(atoms, residual, tails, false)
    }

    /// Largest violation of `weight(v) = sum(children) + residual` over labelled vertices.
    pub fn consistency_error(&self) -> f64 {
        self.children
            .iter()
            .zip(&self.vertex_weight)
            .map(|(c, &w)| (c.weights.iter().sum::<f64>() + c.residual - w).abs())
            .fold(0.0, f64::max)
    }
}

fn init_children(weight: f64, theta: f64, alpha: f64, trunc: Truncation, rng: &mut RngStream) -> Result<VertexSticks> {
    let mut v = VertexSticks { weights: Vec::new(), labels: Vec::new(), residual: weight, theta };
    while v.residual >= trunc.eps * weight && v.weights.len() < trunc.max_atoms {
        v.push_stick(alpha, rng)?;
    }
    Ok(v)
}

/// Runs the stage construction for `stages` steps.
///
/// Each labelled vertex splits its weight among infinitely many children by stick-breaking
/// (`GEM(alpha, theta)` at the root, `GEM(alpha, 1 - alpha)` elsewhere), initially discovered
/// until the undiscovered fraction drops below `trunc.eps` or `trunc.max_atoms` sticks exist.
/// Each stage descends from the root by size-biased choices until it reaches a leaf and labels
/// it. A choice that falls in undiscovered weight reveals one more stick, which is a size-biased
/// pick from the undiscovered children.
pub fn stage_tree(params: Params, stages: usize, trunc: Truncation, retain_history: bool, rng: &mut RngStream) -> Result<StageTree> {
    trunc.validate()?;
    if stages == 0 {
        return domain("stage_tree requires stages >= 1");
    }
    let a = params.alpha();
    let root = init_children(1.0, params.theta(), a, trunc, rng)?;
    let mut st = StageTree {
        params,
        stages: 0,
        vertex_weight: vec![1.0],
        parent: Vec::new(),
        children: vec![root],
        history: Vec::new(),
    };
    if retain_history {
        st.history.push(st.leaf_partition());
    }
    for label in 1..=stages {
        let mut v = 0;
        loop {
            let node = &st.children[v];
            let u = rng.uniform() * st.vertex_weight[v];
            let mut acc = 0.0;
            let mut hit = None;
            for (k, &w) in node.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    hit = Some(k);
                    break;
                }
            }
            let k = match hit {
                Some(k) => k,
                None => st.children[v].push_stick(a, rng)?,
            };
            match st.children[v].labels[k] {
                Some(child) => v = child,
                None => {
                    let w = st.children[v].weights[k];
                    st.children[v].labels[k] = Some(label);
                    st.vertex_weight.push(w);
                    st.parent.push(v);
                    let kids = init_children(w, 1.0 - a, a, trunc, rng)?;
                    st.children.push(kids);
                    break;
                }
            }
        }
        st.stages = label;
        if retain_history {
            st.history.push(st.leaf_partition());
        }
    }
    Ok(st)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stattest::enumerate_recursive_trees;

    fn p(a: f64, t: f64) -> Params {
        Params::new(a, t).unwrap()
    }

    #[test]
    fn small_tree_examples() {
        let mut rng = RngStream::new(1, 0);
        let t = grow(p(0.5, 0.5), 1, &mut rng).unwrap();
        assert_eq!(t.parents(), &[0]);
        let path = RecursiveTree::from_parents(&[0, 1]).unwrap();
        assert_eq!(strip(&path, 0).unwrap().blocks(), &[vec![1, 2]]);
        assert_eq!(branch_size(&path, 1).unwrap(), 2);
        assert_eq!(branch_size(&path, 2).unwrap(), 1);
        assert_eq!(descendants(&path, 1).unwrap(), vec![2]);
        assert!(descendants(&path, 2).unwrap().is_empty());
        let star = RecursiveTree::from_parents(&[0, 0, 0]).unwrap();
        assert_eq!(strip(&star, 0).unwrap().num_blocks(), 3);
        assert!(strip(&star, 3).is_err());
        assert!(RecursiveTree::from_parents(&[0, 2]).is_err());
        assert_eq!(star.to_dot().matches("->").count(), 3);
    }

    #[test]
    fn strip_refines_and_blocks_are_subtrees() {
        let mut rng = RngStream::new(2, 0);
        let t = grow(p(0.3, 1.0), 300, &mut rng).unwrap();
        let sizes = all_branch_sizes(&t);
        assert_eq!(sizes[0], 301);
        for i in 0..20 {
            let b = strip(&t, i).unwrap();
            let b1 = strip(&t, i + 1).unwrap();
            assert!(b.is_coarser_than(&b1));
            for blk in b.blocks() {
                let r = blk[0];
                assert!(t.parent(r) <= i);
                assert_eq!(blk.len(), sizes[r]);
            }
        }
        assert_eq!((0..=t.n()).map(|v| t.child_count(v)).sum::<usize>(), t.n());
    }

    #[test]
    fn exact_tree_probabilities_sum_to_one() {
        for (a, th) in [(0.0, 1.0), (0.5, 0.5), (0.3, -0.2)] {
            for n in 1..=6 {
                let s: f64 = enumerate_recursive_trees(n).unwrap().iter().map(|t| tree_exact_prob(p(a, th), t)).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn urn_examples() {
        let q = SetPartition::new(2, vec![vec![2, 4], vec![3]]).unwrap();
        assert_eq!(urn_coagulate(&q, &[true, false], 0).unwrap().blocks(), &[vec![1, 2, 4], vec![3]]);
        assert_eq!(urn_coagulate(&q, &[false, false], 0).unwrap().blocks(), &[vec![1], vec![2, 4], vec![3]]);
        assert!(urn_coagulate(&q, &[true], 0).is_err());
        let empty = SetPartition::new(6, vec![]).unwrap();
        assert_eq!(urn_coagulate(&empty, &[], 4).unwrap().blocks(), &[vec![5]]);
        let mut rng = RngStream::new(3, 0);
        let reps = 40_000;
        let ones = (0..reps).filter(|_| urn_indicators(p(0.5, 0.5), 1, 1, &mut rng).unwrap()[0]).count();
        let se = (0.2f64 * 0.8 / reps as f64).sqrt();
        assert!((ones as f64 / reps as f64 - 0.2).abs() < 3.5 * se);
    }

    #[test]
    fn stage_tree_consistency() {
        let mut rng = RngStream::new(4, 0);
        for params in [p(0.5, 0.5), p(0.0, 1.0), p(0.9, 2.0)] {
            let st = stage_tree(params, 8, Truncation::new(1e-8, 64).unwrap(), true, &mut rng).unwrap();
            assert!(st.consistency_error() < 1e-12);
            assert_eq!(st.history.len(), 9);
            for g in &st.history {
                assert!((g.stored_mass() + g.residual() - 1.0).abs() < 1e-12);
            }
            assert_eq!(st.tree().n(), 8);
        }
    }
}
