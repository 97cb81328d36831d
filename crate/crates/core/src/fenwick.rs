//! Prefix-sum tree over nonnegative weights with logarithmic update and weighted lookup.

/// Growable Fenwick tree of `f64` weights.
#[derive(Debug, Clone, Default)]
pub struct WeightTree {
    tree: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl WeightTree {
    pub fn with_capacity(cap: usize) -> Self {
        WeightTree {
            tree: Vec::with_capacity(cap),
            weights: Vec::with_capacity(cap),
            total: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Appends a new slot with weight `w` and returns its index.
    pub fn push(&mut self, w: f64) -> usize {
        let i = self.weights.len();
        // Node i+1 covers (i+1 - lowbit(i+1), i+1]; rebuild it from its children.
        let node = i + 1;
        let low = node & node.wrapping_neg();
        let mut sum = w;
        let mut j = 1;
        while j < low {
            sum += self.tree[node - j - 1];
            j <<= 1;
        }
        self.tree.push(sum);
        self.weights.push(w);
        self.total += w;
        i
    }

    pub fn add(&mut self, i: usize, dw: f64) {
        self.weights[i] += dw;
        self.total += dw;
        let mut node = i + 1;
        while node <= self.tree.len() {
            self.tree[node - 1] += dw;
            node += node & node.wrapping_neg();
        }
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`; clamps to the last slot
    /// with positive weight when rounding pushes `target` past the stored total.
    pub fn find(&self, target: f64) -> usize {
        let n = self.tree.len();
        assert!(n > 0, "find on empty WeightTree");
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= rem {
                rem -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        if pos >= n {
            pos = n - 1;
        }
        while self.weights[pos] <= 0.0 && pos > 0 {
            pos -= 1;
        }
        pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn find_respects_prefix_sums() {
        let mut t = WeightTree::with_capacity(8);
        for w in [0.5, 0.0, 1.5, 2.0, 1.0] {
            t.push(w);
        }
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.49), 0);
        assert_eq!(t.find(0.5), 2);
        assert_eq!(t.find(1.99), 2);
        assert_eq!(t.find(2.0), 3);
        assert_eq!(t.find(4.5), 4);
        assert_eq!(t.find(10.0), 4);
        t.add(1, 1.0);
        assert_eq!(t.find(0.7), 1);
        assert!((t.total() - 6.0).abs() < 1e-15);
    }

    #[test]
    fn matches_linear_scan() {
        let mut t = WeightTree::with_capacity(0);
        let mut w = Vec::new();
        for i in 0..300 {
            let x = ((i * 37) % 11) as f64 * 0.25;
            t.push(x);
            w.push(x);
            if i % 7 == 0 {
                t.add(i / 2, 0.5);
                w[i / 2] += 0.5;
            }
        }
        let total: f64 = w.iter().sum();
        for k in 0..1000 {
            let u = total * k as f64 / 1000.0;
            let mut acc = 0.0;
            let mut want = 0;
            for (j, &x) in w.iter().enumerate() {
                acc += x;
                if acc > u {
                    want = j;
                    break;
                }
            }
            assert_eq!(t.find(u), want, "u={u}");
        }
    }
}
