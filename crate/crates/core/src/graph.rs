//! Multi-relation graphs stored as one CSR adjacency per relation.
//!
//! Row `i` of a relation lists the neighbors of node `i` in strictly
//! increasing order. Undirected graphs store every edge in both rows. For
//! directed graphs row `i` holds the *in*-neighbors of `i` (the sources of
//! edges pointing at `i`), which is the set neighbor aggregation pools over.

use crate::error::{GadError, Result};

/// `(src, dst, relation)`.
pub type Edge = (usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Csr {
    offsets: Vec<usize>,
    cols: Vec<u32>,
}

impl Csr {
    /// Builds a CSR from `(row, col)` pairs, sorting and deduplicating rows.
    fn from_pairs(num_nodes: usize, pairs: impl Iterator<Item = (usize, usize)> + Clone) -> Self {
        let mut counts = vec![0usize; num_nodes + 1];
        for (r, _) in pairs.clone() {
            counts[r + 1] += 1;
        }
        for i in 0..num_nodes {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0u32; counts[num_nodes]];
        for (r, c) in pairs {
            cols[fill[r]] = c as u32;
            fill[r] += 1;
        }

        // Sort each row, then compact duplicates in place.
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        let mut write = 0;
        for i in 0..num_nodes {
            let (start, end) = (counts[i], counts[i + 1]);
            cols[start..end].sort_unstable();
            let mut last: Option<u32> = None;
            for k in start..end {
                let c = cols[k];
                if last != Some(c) {
                    cols[write] = c;
                    write += 1;
                    last = Some(c);
                }
            }
            offsets.push(write);
        }
        cols.truncate(write);
        cols.shrink_to_fit();
        Csr { offsets, cols }
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u32] {
        &self.cols[self.offsets[i]..self.offsets[i + 1]]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Number of stored (directed) entries.
    pub fn num_entries(&self) -> usize {
        self.cols.len()
    }

    fn validate(&self, num_nodes: usize) -> std::result::Result<(), String> {
        if self.offsets.len() != num_nodes + 1 || self.offsets[0] != 0 {
            return Err(format!(
                "offsets must have {} entries starting at 0",
                num_nodes + 1
            ));
        }
        if self.offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err("offsets decrease".into());
        }
        if self.offsets[num_nodes] != self.cols.len() {
            return Err("last offset differs from entry count".into());
        }
        for i in 0..num_nodes {
            let row = self.row(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("row {i} is not strictly increasing"));
            }
            if row.last().is_some_and(|&c| c as usize >= num_nodes) {
                return Err(format!("row {i} references a node out of range"));
            }
        }
        Ok(())
    }

    fn contains(&self, i: usize, j: u32) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    relations: Vec<Csr>,
    directed: bool,
}

impl Graph {
    /// Builds a graph from an edge list.
    ///
    /// Duplicate edges collapse to one and self-loops are kept. When
    /// `directed` is false every edge is stored in both directions.
    pub fn build_csr(
        edges: &[Edge],
        num_nodes: usize,
        num_relations: usize,
        directed: bool,
    ) -> Result<Graph> {
        if num_nodes > u32::MAX as usize {
            return Err(GadError::InvalidValue(format!(
                "graphs are limited to {} nodes",
                u32::MAX
            )));
        }
        for (index, &(src, dst, rel)) in edges.iter().enumerate() {
            if src >= num_nodes || dst >= num_nodes {
                return Err(GadError::InvalidEdge {
                    index,
                    reason: format!("endpoint out of range: ({src}, {dst}) with {num_nodes} nodes"),
                });
            }
            if rel >= num_relations {
                return Err(GadError::InvalidEdge {
                    index,
                    reason: format!("relation out of range: {rel} with {num_relations} relations"),
                });
            }
        }

        let relations = (0..num_relations)
            .map(|r| {
                let of_rel = edges.iter().filter(move |e| e.2 == r);
                if directed {
                    Csr::from_pairs(num_nodes, of_rel.map(|&(s, d, _)| (d, s)))
                } else {
                    Csr::from_pairs(
                        num_nodes,
                        of_rel.flat_map(|&(s, d, _)| {
                            let back = (s != d).then_some((d, s));
                            std::iter::once((s, d)).chain(back)
                        }),
                    )
                }
            })
            .collect();
        Ok(Graph {
            num_nodes,
            relations,
            directed,
        })
    }

    /// Assembles a graph from prebuilt CSR arrays, checking every invariant.
    pub fn from_csr(
        num_nodes: usize,
        relations: Vec<(Vec<usize>, Vec<u32>)>,
        directed: bool,
    ) -> Result<Graph> {
        let relations: Vec<Csr> = relations
            .into_iter()
            .map(|(offsets, cols)| Csr { offsets, cols })
            .collect();
        for (r, csr) in relations.iter().enumerate() {
            csr.validate(num_nodes)
                .map_err(|e| GadError::InvalidValue(format!("relation {r}: {e}")))?;
            if !directed {
                for i in 0..num_nodes {
                    if let Some(&j) = csr
                        .row(i)
                        .iter()
                        .find(|&&j| !csr.contains(j as usize, i as u32))
                    {
                        return Err(GadError::InvalidValue(format!(
                            "relation {r}: undirected adjacency is not symmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(Graph {
            num_nodes,
            relations,
            directed,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn relation(&self, r: usize) -> &Csr {
        &self.relations[r]
    }

    pub fn relations(&self) -> &[Csr] {
        &self.relations
    }

    /// Neighbor set of `i` under relation `r` (in-neighbors when directed).
    pub fn neighbors(&self, r: usize, i: usize) -> &[u32] {
        self.relations[r].row(i)
    }

    pub fn degree(&self, r: usize, i: usize) -> usize {
        self.relations[r].degree(i)
    }

    /// Stored CSR entries summed over relations.
    pub fn num_entries(&self) -> usize {
        self.relations.iter().map(Csr::num_entries).sum()
    }

    /// Edge list that rebuilds this graph through [`Graph::build_csr`].
    /// Undirected edges are reported once, as `(min, max, rel)`.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (r, csr) in self.relations.iter().enumerate() {
            for i in 0..self.num_nodes {
                for &j in csr.row(i) {
                    let j = j as usize;
                    if self.directed {
                        out.push((j, i, r));
                    } else if i <= j {
                        out.push((i, j, r));
                    }
                }
            }
        }
        out
    }

    /// Number of distinct edges (undirected edges counted once).
    pub fn num_edges(&self) -> usize {
        if self.directed {
            return self.num_entries();
        }
        self.relations
            .iter()
            .map(|csr| {
                (0..self.num_nodes)
                    .map(|i| csr.row(i).iter().filter(|&&j| j as usize >= i).count())
                    .sum::<usize>()
            })
            .sum()
    }

    /// Single-relation view whose edge set is the deduplicated union of all
    /// relations. Directedness is preserved.
    pub fn merged_view(&self) -> Graph {
        if self.relations.len() == 1 {
            return self.clone();
        }
        let n = self.num_nodes;
        let rels = &self.relations;
        let merged = Csr::from_pairs(
            n,
            (0..n).flat_map(move |i| {
                rels.iter()
                    .flat_map(move |c| c.row(i).iter().map(move |&j| (i, j as usize)))
            }),
        );
        Graph {
            num_nodes: n,
            relations: vec![merged],
            directed: self.directed,
        }
    }

    /// Undirected copy: each relation becomes `A ∪ Aᵀ`. Undirected graphs are
    /// returned unchanged.
    pub fn symmetrized(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        let n = self.num_nodes;
        let relations = self
            .relations
            .iter()
            .map(|csr| {
                Csr::from_pairs(
                    n,
                    (0..n).flat_map(move |i| {
                        csr.row(i)
                            .iter()
                            .flat_map(move |&j| [(i, j as usize), (j as usize, i)])
                    }),
                )
            })
            .collect();
        Graph {
            num_nodes: n,
            relations,
            directed: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;

    fn row(g: &Graph, i: usize) -> Vec<u32> {
        g.neighbors(0, i).to_vec()
    }

    #[test]
    fn symmetry_closure() {
        let g = Graph::build_csr(&[(0, 1, 0), (1, 2, 0)], 3, 1, false).unwrap();
        assert_eq!(row(&g, 0), vec![1]);
        assert_eq!(row(&g, 1), vec![0, 2]);
        assert_eq!(row(&g, 2), vec![1]);
    }

    #[test]
    fn duplicates_collapse() {
        let g = Graph::build_csr(&[(0, 1, 0), (0, 1, 0)], 2, 1, false).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.num_entries(), 2);
        let g = Graph::build_csr(&[(0, 1, 0), (1, 0, 0)], 2, 1, false).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn endpoint_out_of_range_names_edge() {
        let err = Graph::build_csr(&[(0, 1, 0), (0, 5, 0)], 3, 1, false).unwrap_err();
        match err {
            GadError::InvalidEdge { index, ref reason } => {
                assert_eq!(index, 1);
                assert!(reason.contains("endpoint out of range"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn relation_out_of_range() {
        let err = Graph::build_csr(&[(0, 1, 2)], 3, 2, false).unwrap_err();
        assert!(err.to_string().contains("relation out of range"));
    }

    #[test]
    fn self_loops_kept_once() {
        let g = Graph::build_csr(&[(1, 1, 0), (0, 1, 0)], 2, 1, false).unwrap();
        assert_eq!(row(&g, 1), vec![0, 1]);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn directed_rows_hold_in_neighbors() {
        let g = Graph::build_csr(&[(0, 2, 0), (1, 2, 0), (2, 0, 0)], 3, 1, true).unwrap();
        assert_eq!(row(&g, 2), vec![0, 1]);
        assert_eq!(row(&g, 0), vec![2]);
        assert!(row(&g, 1).is_empty());
        let s = g.symmetrized();
        assert!(!s.is_directed());
        assert_eq!(row(&s, 0), vec![2]);
        assert_eq!(row(&s, 1), vec![2]);
        assert_eq!(row(&s, 2), vec![0, 1]);
    }

    #[test]
    fn merged_view_single_relation_is_identity() {
        let g = Graph::build_csr(&[(0, 1, 0), (2, 1, 0)], 3, 1, false).unwrap();
        assert_eq!(g.merged_view(), g);
    }

    #[test]
    fn merged_view_union() {
        let g = Graph::build_csr(&[(0, 1, 0), (0, 1, 1), (1, 2, 1)], 3, 2, false).unwrap();
        let m = g.merged_view();
        assert_eq!(m.num_relations(), 1);
        assert_eq!(m.edges(), vec![(0, 1, 0), (1, 2, 0)]);
    }

    #[test]
    fn merged_view_disjoint_relations_form_path() {
        let g = Graph::build_csr(&[(0, 1, 0), (1, 2, 1)], 3, 2, false).unwrap();
        let path = Graph::build_csr(&[(0, 1, 0), (1, 2, 0)], 3, 1, false).unwrap();
        assert_eq!(g.merged_view(), path);
    }

    #[test]
    fn from_csr_checks_invariants() {
        assert!(Graph::from_csr(2, vec![(vec![0, 1, 2], vec![1, 0])], false).is_ok());
        // asymmetric
        assert!(Graph::from_csr(2, vec![(vec![0, 1, 1], vec![1])], false).is_err());
        // unsorted row
        assert!(Graph::from_csr(2, vec![(vec![0, 2, 2], vec![1, 0])], true).is_err());
        // out of range
        assert!(Graph::from_csr(2, vec![(vec![0, 1, 1], vec![7])], true).is_err());
    }

    fn edge_lists() -> impl Strategy<Value = (usize, usize, Vec<Edge>, bool)> {
        (1usize..20, 1usize..4, any::<bool>()).prop_flat_map(|(n, r, directed)| {
            (
                Just(n),
                Just(r),
                proptest::collection::vec((0..n, 0..n, 0..r), 0..60),
                Just(directed),
            )
        })
    }

    proptest! {
        #[test]
        fn rebuild_from_extracted_edges_is_identical((n, r, edges, directed) in edge_lists()) {
            let g = Graph::build_csr(&edges, n, r, directed).unwrap();
            let again = Graph::build_csr(&g.edges(), n, r, directed).unwrap();
            prop_assert_eq!(&again, &g);
            let rels: Vec<_> = g.relations().iter().map(|c| (c.offsets().to_vec(), c.cols().to_vec())).collect();
            prop_assert_eq!(Graph::from_csr(n, rels, directed).unwrap(), g);
        }

        #[test]
        fn undirected_degree_sum_is_even((n, r, edges, _d) in edge_lists()) {
            let loop_free: Vec<Edge> = edges.into_iter().filter(|e| e.0 != e.1).collect();
            let g = Graph::build_csr(&loop_free, n, r, false).unwrap();
            for rel in 0..r {
                let total: usize = (0..n).map(|i| g.degree(rel, i)).sum();
                prop_assert_eq!(total % 2, 0);
            }
        }

        #[test]
        fn merged_degree_bounded_by_relation_sum((n, r, edges, directed) in edge_lists()) {
            let g = Graph::build_csr(&edges, n, r, directed).unwrap();
            let m = g.merged_view();
            for i in 0..n {
                let sum: usize = (0..r).map(|rel| g.degree(rel, i)).sum();
                let union: BTreeSet<u32> = (0..r).flat_map(|rel| g.neighbors(rel, i).iter().copied()).collect();
                prop_assert!(m.degree(0, i) <= sum);
                prop_assert_eq!(m.degree(0, i), union.len());
                prop_assert_eq!(m.degree(0, i) == sum, union.len() == sum);
            }
        }
    }
}
