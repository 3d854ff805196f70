use super::ConflictGraph;

/// A proper vertex coloring with colors `0..num_colors`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coloring {
    pub num_colors: usize,
    pub colors: Vec<usize>,
}

/// Brélaz's Dsatur heuristic.
///
/// Repeatedly colors the uncolored vertex with the most distinct neighbor
/// colors (ties: larger degree, then smaller index) using the smallest
/// color absent from its neighborhood.
pub fn dsatur_color(graph: &ConflictGraph) -> Coloring {
    let n = graph.len();
    let degree: Vec<usize> = (0..n).map(|v| graph.degree(v)).collect();
    let mut colors: Vec<Option<usize>> = vec![None; n];
    // neighbor_colors[v][c]: whether a neighbor of v already has color c
    let mut neighbor_colors: Vec<Vec<bool>> = vec![Vec::new(); n];
    let mut saturation = vec![0usize; n];
    let mut num_colors = 0;

    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| colors[v].is_none())
            .max_by(|&a, &b| {
                saturation[a]
                    .cmp(&saturation[b])
                    .then(degree[a].cmp(&degree[b]))
                    .then(b.cmp(&a))
            })
            .expect("an uncolored vertex remains");
        let used = &neighbor_colors[v];
        let c = (0..).find(|&c| !used.get(c).copied().unwrap_or(false)).unwrap();
        colors[v] = Some(c);
        num_colors = num_colors.max(c + 1);
        for u in graph.neighbors(v) {
            let set = &mut neighbor_colors[u];
            if set.len() <= c {
                set.resize(c + 1, false);
            }
            if !set[c] {
                set[c] = true;
                saturation[u] += 1;
            }
        }
    }
    Coloring {
        num_colors,
        colors: colors.into_iter().map(|c| c.unwrap()).collect(),
    }
}
