//! Maximum directed spanning forests with vertex (root) weights.
//!
//! Every vertex either becomes a root, earning its root weight, or picks one
//! parent, earning that edge's weight. The optimum is found by adding a
//! super-root whose out-edges carry the root weights and solving a maximum
//! arborescence problem with Chu-Liu/Edmonds cycle contraction.

use crate::error::{Error, Result};

/// Largest vertex count accepted by [`brute_force_msf`].
pub const BRUTE_FORCE_MAX: usize = 8;

/// Complete digraph with log-domain weights; `-inf` marks a forbidden choice.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedDigraph {
    n: usize,
    /// `edges[p * n + c]`: weight of `p` being the parent of `c`.
    edges: Vec<f64>,
    roots: Vec<f64>,
}

impl RootedDigraph {
    /// All choices forbidden.
    pub fn new(n: usize) -> Self {
        RootedDigraph {
            n,
            edges: vec![f64::NEG_INFINITY; n * n],
            roots: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn from_fn(n: usize, root: impl Fn(usize) -> f64, edge: impl Fn(usize, usize) -> f64) -> Self {
        let mut g = RootedDigraph::new(n);
        for c in 0..n {
            g.roots[c] = root(c);
            for p in 0..n {
                if p != c {
                    g.edges[p * n + c] = edge(p, c);
                }
            }
        }
        g
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn edge(&self, parent: usize, child: usize) -> f64 {
        if parent == child {
            f64::NEG_INFINITY
        } else {
            self.edges[parent * self.n + child]
        }
    }

    pub fn root(&self, v: usize) -> f64 {
        self.roots[v]
    }

    pub fn set_edge(&mut self, parent: usize, child: usize, w: f64) {
        assert_ne!(parent, child, "self-loops are not representable");
        self.edges[parent * self.n + child] = w;
    }

    pub fn set_root(&mut self, v: usize, w: f64) {
        self.roots[v] = w;
    }

    fn check_weights(&self) -> Result<()> {
        if self.edges.iter().chain(&self.roots).any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::InvalidParameter(
                "weights must be finite or -inf".into(),
            ));
        }
        for v in 0..self.n {
            let any_in = (0..self.n).any(|p| self.edge(p, v).is_finite());
            if !self.roots[v].is_finite() && !any_in {
                return Err(Error::Infeasible { vertex: v });
            }
        }
        Ok(())
    }
}

/// Parent pointers of a spanning forest and its total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    parent: Vec<Option<usize>>,
    score: f64,
}

impl Forest {
    /// Validates acyclicity and computes the score as a sum in vertex order.
    pub fn evaluate(g: &RootedDigraph, parent: Vec<Option<usize>>) -> Result<Forest> {
        if parent.len() != g.n {
            return Err(Error::InvalidParameter("parent vector length differs from graph".into()));
        }
        if let Some(v) = find_cycle(&parent) {
            return Err(Error::InvalidParameter(format!("parent pointers cycle through vertex {v}")));
        }
        let score = parent
            .iter()
            .enumerate()
            .map(|(c, p)| match p {
                Some(p) => g.edge(*p, c),
                None => g.root(c),
            })
            .sum();
        Ok(Forest { parent, score })
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.parent.len()).filter(|&v| self.parent[v].is_none())
    }

    pub fn n_roots(&self) -> usize {
        self.roots().count()
    }
}

/// Some vertex on a directed cycle of `parent`, if one exists.
fn find_cycle(parent: &[Option<usize>]) -> Option<usize> {
    let n = parent.len();
    // 0 unseen, 1 on current walk, 2 settled
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            match parent[v] {
                Some(p) if p < n => v = p,
                _ => break,
            }
        }
        let cyclic = state[v] == 1 && parent[v].is_some();
        let mut u = start;
        while state[u] == 1 {
            state[u] = 2;
            match parent[u] {
                Some(p) => u = p,
                None => break,
            }
        }
        if cyclic {
            return Some(v);
        }
    }
    None
}

/// Highest-scoring spanning forest.
///
/// Ties between equal in-edges prefer becoming a root, then the lowest
/// parent index.
pub fn max_directed_spanning_forest(g: &RootedDigraph) -> Result<Forest> {
    g.check_weights()?;
    let n = g.n;
    if n == 0 {
        return Forest::evaluate(g, Vec::new());
    }
    // vertex 0 is the super-root, vertex v + 1 is graph vertex v
    let mut w = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for c in 0..n {
        w[0][c + 1] = g.root(c);
        for p in 0..n {
            if p != c {
                w[p + 1][c + 1] = g.edge(p, c);
            }
        }
    }
    let parent = max_arborescence(&w, 0).map_err(|stuck| Error::Infeasible {
        vertex: stuck.saturating_sub(1),
    })?;
    let parent = (1..=n)
        .map(|v| match parent[v] {
            0 => None,
            p => Some(p - 1),
        })
        .collect();
    Forest::evaluate(g, parent)
}

/// Chu-Liu/Edmonds on a dense weight matrix. Returns each vertex's parent
/// (the entry for `root` is meaningless), or a vertex that cannot be reached.
fn max_arborescence(w: &[Vec<f64>], root: usize) -> std::result::Result<Vec<usize>, usize> {
    let n = w.len();
    let mut best = vec![root; n];
    for v in 0..n {
        if v == root {
            continue;
        }
        let mut choice: Option<(usize, f64)> = None;
        for (u, row) in w.iter().enumerate() {
            let x = row[v];
            if u == v || x == f64::NEG_INFINITY {
                continue;
            }
            if choice.is_none_or(|(_, bx)| x > bx) {
                choice = Some((u, x));
            }
        }
        best[v] = choice.ok_or(v)?.0;
    }

    let Some(cycle) = cycle_through_best(&best, root) else {
        return Ok(best);
    };

    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let mut map = vec![usize::MAX; n];
    let mut unmap = Vec::with_capacity(n - cycle.len() + 1);
    for v in 0..n {
        if !in_cycle[v] {
            map[v] = unmap.len();
            unmap.push(v);
        }
    }
    let c = unmap.len();
    for &v in &cycle {
        map[v] = c;
    }
    let m = c + 1;

    let mut w2 = vec![vec![f64::NEG_INFINITY; m]; m];
    // for each outside source: which cycle vertex its best edge enters
    let mut enters = vec![usize::MAX; m];
    // for each outside target: which cycle vertex its best edge leaves from
    let mut leaves = vec![usize::MAX; m];
    for u in 0..n {
        for v in 0..n {
            let x = w[u][v];
            if u == v || x == f64::NEG_INFINITY {
                continue;
            }
            match (in_cycle[u], in_cycle[v]) {
                (false, false) => w2[map[u]][map[v]] = x,
                (false, true) => {
                    let adj = x - w[best[v]][v];
                    if adj > w2[map[u]][c] {
                        w2[map[u]][c] = adj;
                        enters[map[u]] = v;
                    }
                }
                (true, false) => {
                    if x > w2[c][map[v]] {
                        w2[c][map[v]] = x;
                        leaves[map[v]] = u;
                    }
                }
                (true, true) => {}
            }
        }
    }

    let sub = max_arborescence(&w2, map[root]).map_err(|stuck| {
        if stuck == c {
            cycle[0]
        } else {
            unmap[stuck]
        }
    })?;

    let mut parent = best;
    for v in 0..n {
        if v == root || in_cycle[v] {
            continue;
        }
        let p = sub[map[v]];
        parent[v] = if p == c { leaves[map[v]] } else { unmap[p] };
    }
    let entry_source = sub[c];
    parent[enters[entry_source]] = unmap[entry_source];
    Ok(parent)
}

fn cycle_through_best(best: &[usize], root: usize) -> Option<Vec<usize>> {
    let n = best.len();
    let mut state = vec![0u8; n];
    state[root] = 2;
    for start in 0..n {
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            v = best[v];
        }
        if state[v] == 1 {
            let mut cycle = vec![v];
            let mut u = best[v];
            while u != v {
                cycle.push(u);
                u = best[u];
            }
            return Some(cycle);
        }
        let mut u = start;
        while state[u] == 1 {
            state[u] = 2;
            u = best[u];
        }
    }
    None
}

/// Highest-scoring single spanning tree: the best of `n` runs, each forcing
/// a different vertex to be the only root. Ties keep the lowest root.
pub fn max_spanning_tree(g: &RootedDigraph) -> Result<Forest> {
    g.check_weights()?;
    let mut best: Option<Forest> = None;
    for r in 0..g.n {
        if !g.root(r).is_finite() {
            continue;
        }
        let mut forced = g.clone();
        for v in 0..g.n {
            if v != r {
                forced.set_root(v, f64::NEG_INFINITY);
            }
        }
        let forest = match max_directed_spanning_forest(&forced) {
            Ok(f) => f,
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        };
        let tree = Forest::evaluate(g, forest.parent)?;
        if best.as_ref().is_none_or(|b| tree.score > b.score) {
            best = Some(tree);
        }
    }
    match best {
        Some(b) => Ok(b),
        None if g.n == 0 => Forest::evaluate(g, Vec::new()),
        None => Err(Error::Infeasible { vertex: 0 }),
    }
}

/// Calls `visit` with every acyclic parent assignment on `n` vertices.
pub fn enumerate_forests(n: usize, mut visit: impl FnMut(&[Option<usize>])) -> Result<()> {
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge {
            n,
            max: BRUTE_FORCE_MAX,
        });
    }
    // digit 0 = root, digit d = parent d - 1
    let mut digits = vec![0usize; n];
    let mut parent = vec![None; n];
    loop {
        for (v, &d) in digits.iter().enumerate() {
            parent[v] = d.checked_sub(1);
        }
        if parent.iter().enumerate().all(|(v, p)| *p != Some(v)) && find_cycle(&parent).is_none() {
            visit(&parent);
        }
        // odometer, last vertex fastest
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] <= n {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Exhaustive maximum over [`enumerate_forests`]. Ties keep the assignment
/// enumerated first, which is the lexicographically smallest with roots
/// ordered before parents.
pub fn brute_force_msf(g: &RootedDigraph) -> Result<Forest> {
    g.check_weights()?;
    let mut best: Option<Forest> = None;
    let mut failure = None;
    enumerate_forests(g.n, |parent| {
        if failure.is_some() {
            return;
        }
        match Forest::evaluate(g, parent.to_vec()) {
            Ok(f) if f.score == f64::NEG_INFINITY => {}
            Ok(f) => {
                if best.as_ref().is_none_or(|b| f.score > b.score) {
                    best = Some(f);
                }
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    best.ok_or(Error::Infeasible { vertex: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, n: usize, forbid: f64) -> RootedDigraph {
        let mut g = RootedDigraph::new(n);
        for c in 0..n {
            g.set_root(c, rng.random_range(-5.0..5.0));
            for p in 0..n {
                if p != c {
                    let w = if rng.random_bool(forbid) {
                        f64::NEG_INFINITY
                    } else {
                        rng.random_range(-5.0..5.0)
                    };
                    g.set_edge(p, c, w);
                }
            }
        }
        g
    }

    #[test]
    fn single_vertex() {
        let mut g = RootedDigraph::new(1);
        g.set_root(0, 2.5);
        let f = max_directed_spanning_forest(&g).unwrap();
        assert_eq!(f.parents(), &[None]);
        assert_eq!(f.score(), 2.5);
    }

    #[test]
    fn two_vertices() {
        let mut g = RootedDigraph::new(2);
        g.set_root(0, 0.0);
        g.set_root(1, 0.0);
        g.set_edge(0, 1, 2.0);
        g.set_edge(1, 0, 1.0);
        let f = max_directed_spanning_forest(&g).unwrap();
        assert_eq!(f.parents(), &[None, Some(0)]);
        assert_eq!(f.score(), 2.0);
    }

    #[test]
    fn forest_counts() {
        let mut count = 0;
        enumerate_forests(2, |_| count += 1).unwrap();
        assert_eq!(count, 3);
        count = 0;
        enumerate_forests(3, |_| count += 1).unwrap();
        assert_eq!(count, 16);
        count = 0;
        enumerate_forests(4, |_| count += 1).unwrap();
        assert_eq!(count, 125);
        assert!(enumerate_forests(9, |_| {}).is_err());
    }

    #[test]
    fn zero_weights_pick_all_roots() {
        let g = RootedDigraph::from_fn(4, |_| 0.0, |_, _| 0.0);
        for f in [brute_force_msf(&g).unwrap(), max_directed_spanning_forest(&g).unwrap()] {
            assert_eq!(f.parents(), &[None; 4]);
            assert_eq!(f.score(), 0.0);
        }
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..300 {
            let n = rng.random_range(1..=5);
            let forbid = if rng.random_bool(0.3) { 0.4 } else { 0.0 };
            let g = random_graph(&mut rng, n, forbid);
            let fast = max_directed_spanning_forest(&g).unwrap();
            let slow = brute_force_msf(&g).unwrap();
            assert_eq!(fast.score(), slow.score());
            assert_eq!(fast.parents(), slow.parents());
        }
    }

    #[test]
    fn forbidden_edges_force_all_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 5;
        let roots: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = RootedDigraph::from_fn(n, |v| roots[v], |_, _| f64::NEG_INFINITY);
        let f = max_directed_spanning_forest(&g).unwrap();
        assert_eq!(f.n_roots(), n);
        assert_eq!(f.score(), roots.iter().sum::<f64>());
    }

    #[test]
    fn infeasible_vertex_is_reported() {
        let mut g = RootedDigraph::new(2);
        g.set_root(0, 1.0);
        assert!(matches!(
            max_directed_spanning_forest(&g),
            Err(Error::Infeasible { vertex: 1 })
        ));
        // every vertex has an in-edge but nobody may be a root
        let cyc = RootedDigraph::from_fn(3, |_| f64::NEG_INFINITY, |_, _| 1.0);
        assert!(matches!(
            max_directed_spanning_forest(&cyc),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn spanning_tree_has_one_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let n = rng.random_range(1..=5);
            let g = random_graph(&mut rng, n, 0.0);
            let t = max_spanning_tree(&g).unwrap();
            assert_eq!(t.n_roots(), 1);
            let mut best = f64::NEG_INFINITY;
            enumerate_forests(n, |p| {
                if p.iter().filter(|x| x.is_none()).count() == 1 {
                    best = best.max(Forest::evaluate(&g, p.to_vec()).unwrap().score());
                }
            })
            .unwrap();
            assert_eq!(t.score(), best);
        }
    }

    #[test]
    fn vertex_shift_moves_score_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(2..=5);
            let g = random_graph(&mut rng, n, 0.0);
            let v = rng.random_range(0..n);
            let shift = rng.random_range(-4.0..4.0);
            let mut h = g.clone();
            h.set_root(v, g.root(v) + shift);
            for p in 0..n {
                if p != v {
                    h.set_edge(p, v, g.edge(p, v) + shift);
                }
            }
            let a = max_directed_spanning_forest(&g).unwrap();
            let b = max_directed_spanning_forest(&h).unwrap();
            assert_eq!(a.parents(), b.parents());
            assert!((b.score() - a.score() - shift).abs() < 1e-9);
        }
    }

    #[test]
    fn evaluate_rejects_cycles() {
        let g = RootedDigraph::from_fn(3, |_| 0.0, |_, _| 1.0);
        assert!(Forest::evaluate(&g, vec![Some(1), Some(0), None]).is_err());
        assert!(Forest::evaluate(&g, vec![Some(1), Some(2), Some(0)]).is_err());
        assert!(Forest::evaluate(&g, vec![None, Some(0), Some(1)]).is_ok());
    }
}
