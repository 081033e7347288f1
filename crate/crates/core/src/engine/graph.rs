use super::EngineError;

/// Directed weighted edges sorted by `(src, dst)`, stored CSR-style by source.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    n: usize,
    offsets: Vec<usize>,
    targets: Vec<(u32, f64)>,
}

impl EdgeList {
    /// Builds an edge list over `n` agents. Edges may arrive in any order.
    pub fn new(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Result<Self, EngineError> {
        for &(src, dst, w) in &edges {
            if src >= n || dst >= n {
                return Err(EngineError::DanglingEdge { src, dst, n });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(EngineError::Config(format!(
                    "edge ({src}, {dst}) has invalid weight {w}"
                )));
            }
        }
        edges.sort_by_key(|&(s, d, _)| (s, d));
        if let Some(pair) = edges.windows(2).find(|p| (p[0].0, p[0].1) == (p[1].0, p[1].1)) {
            return Err(EngineError::DuplicateEdge {
                src: pair[0].0,
                dst: pair[0].1,
            });
        }
        let mut offsets = vec![0usize; n + 1];
        for &(src, _, _) in &edges {
            offsets[src + 1] += 1;
        }
        for k in 1..=n {
            offsets[k] += offsets[k - 1];
        }
        let targets = edges.into_iter().map(|(_, d, w)| (d as u32, w)).collect();
        Ok(Self { n, offsets, targets })
    }

    /// Every ordered pair `(i, j)`, `i != j`, with the given weight.
    pub fn complete(n: usize, weight: f64) -> Result<Self, EngineError> {
        let edges = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j, weight)))
            .collect();
        Self::new(n, edges)
    }

    pub fn agent_count(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// `(dst, weight)` for edges leaving `src`, ascending by `dst`.
    pub fn outgoing(&self, src: usize) -> &[(u32, f64)] {
        &self.targets[self.offsets[src]..self.offsets[src + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |s| self.outgoing(s).iter().map(move |&(d, w)| (s, d as usize, w)))
    }

    pub(crate) fn check_agents(&self, n: usize) -> Result<(), EngineError> {
        if self.n > n {
            let (src, dst, _) =
                self.iter()
                    .find(|&(s, d, _)| s >= n || d >= n)
                    .unwrap_or((self.n - 1, self.n - 1, 0.0));
            return Err(EngineError::DanglingEdge { src, dst, n });
        }
        if self.n < n {
            return Err(EngineError::LengthMismatch {
                what: "edge list agents",
                expected: n,
                actual: self.n,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_grouped() {
        let e = EdgeList::new(3, vec![(2, 0, 1.0), (0, 2, 0.5), (0, 1, 0.25)]).unwrap();
        let all: Vec<_> = e.iter().collect();
        assert_eq!(all, vec![(0, 1, 0.25), (0, 2, 0.5), (2, 0, 1.0)]);
        assert!(e.outgoing(1).is_empty());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(
            EdgeList::new(2, vec![(0, 2, 1.0)]),
            Err(EngineError::DanglingEdge { .. })
        ));
        assert!(matches!(
            EdgeList::new(2, vec![(0, 1, 1.0), (0, 1, 2.0)]),
            Err(EngineError::DuplicateEdge { src: 0, dst: 1 })
        ));
        assert!(EdgeList::new(2, vec![(0, 1, -1.0)]).is_err());
    }

    #[test]
    fn complete_graph_size() {
        assert_eq!(EdgeList::complete(5, 1.0).unwrap().len(), 20);
    }
}
