use crate::scenario::Topology;

/// Pilot-reuse conflict graph over the RUEs (vertex `r` is `topo.rues[r]`).
/// Two RUEs are adjacent when their serving RRH sets intersect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictGraph {
    adjacency: Vec<Vec<bool>>,
}

impl ConflictGraph {
    pub fn build(topo: &Topology) -> Self {
        let n = topo.rues.len();
        let mut adjacency = vec![vec![false; n]; n];
        for (r, &i) in topo.rues.iter().enumerate() {
            for (s, &l) in topo.rues.iter().enumerate().skip(r + 1) {
                let overlap = topo.serving_rrhs[i]
                    .iter()
                    .any(|k| topo.serving_rrhs[l].binary_search(k).is_ok());
                adjacency[r][s] = overlap;
                adjacency[s][r] = overlap;
            }
        }
        Self { adjacency }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a != b {
                adjacency[a][b] = true;
                adjacency[b][a] = true;
            }
        }
        Self { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[v].iter().enumerate().filter(|(_, &e)| e).map(|(u, _)| u)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].iter().filter(|&&e| e).count()
    }

    /// The 0/1 constraint matrix.
    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.adjacency
            .iter()
            .map(|row| row.iter().map(|&e| u8::from(e)).collect())
            .collect()
    }
}
