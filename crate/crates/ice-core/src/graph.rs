//! Areal adjacency structures and global spatial autocorrelation.
//!
//! An [`AdjacencyGraph`] is the binary neighborhood structure `W = (w_ij)`
//! over `n` areal units: `w_ij = 1` iff units `i` and `j` share a border.
//! Graphs are symmetric, hollow (no self-loops), and deduplicated by
//! construction. Two readers are provided: an edge-list CSV with header
//! `src,dst`, and GAL-style neighbor lists.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Symmetric binary neighborhood structure over `n` areal units.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyGraph {
    unit_ids: Vec<String>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl AdjacencyGraph {
    /// Build a graph from unit-id edge pairs over an ordered unit list.
    ///
    /// Edges are symmetrized and deduplicated; unit order follows `unit_ids`.
    /// Errors on an empty unit list, duplicate unit ids, edges naming unknown
    /// units, and self-loops. An empty edge list is structurally valid (all
    /// units isolated).
    pub fn build(edges: &[(String, String)], unit_ids: &[String]) -> Result<Self> {
        if unit_ids.is_empty() {
            return Err(Error::EmptyUnits);
        }
        let mut index = HashMap::with_capacity(unit_ids.len());
        for (i, id) in unit_ids.iter().enumerate() {
            if index.insert(id.as_str(), i).is_some() {
                return Err(Error::DuplicateUnit(id.clone()));
            }
        }
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *index
                .get(a.as_str())
                .ok_or_else(|| Error::UnknownUnit(a.clone()))?;
            let ib = *index
                .get(b.as_str())
                .ok_or_else(|| Error::UnknownUnit(b.clone()))?;
            if ia == ib {
                return Err(Error::SelfLoop(a.clone()));
            }
            pairs.push((ia.min(ib), ia.max(ib)));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let mut neighbors = vec![Vec::new(); unit_ids.len()];
        for &(i, j) in &pairs {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(AdjacencyGraph {
            unit_ids: unit_ids.to_vec(),
            neighbors,
            edge_count: pairs.len(),
        })
    }

    /// Rook-adjacency rectangular lattice with `rows * cols` units.
    ///
    /// Unit ids are `r<row>c<col>`. The 12x13 instance (n = 156) is the
    /// self-contained stand-in for a county map in simulation runs.
    pub fn rook_lattice(rows: usize, cols: usize) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows * cols);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let mut id = String::new();
                let _ = write!(id, "r{r}c{c}");
                ids.push(id);
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                let here = ids[r * cols + c].clone();
                if c + 1 < cols {
                    edges.push((here.clone(), ids[r * cols + c + 1].clone()));
                }
                if r + 1 < rows {
                    edges.push((here, ids[(r + 1) * cols + c].clone()));
                }
            }
        }
        Self::build(&edges, &ids)
    }

    /// Read an edge-list CSV with header `src,dst`; unit order is first
    /// appearance across both columns.
    pub fn read_edge_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Parse {
                path: display.clone(),
                line: 1,
                msg: e.to_string(),
            })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Parse {
                path: display.clone(),
                line: 1,
                msg: e.to_string(),
            })?
            .clone();
        if headers.len() < 2 || &headers[0] != "src" || &headers[1] != "dst" {
            return Err(Error::Parse {
                path: display,
                line: 1,
                msg: format!("expected header `src,dst`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut edges = Vec::new();
        let mut order = Vec::new();
        let mut seen = HashMap::new();
        for (lineno, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                path: display.clone(),
                line: lineno + 2,
                msg: e.to_string(),
            })?;
            if record.len() < 2 {
                return Err(Error::Parse {
                    path: display.clone(),
                    line: lineno + 2,
                    msg: "expected two columns".into(),
                });
            }
            for id in [&record[0], &record[1]] {
                if !seen.contains_key(id) {
                    seen.insert(id.to_string(), order.len());
                    order.push(id.to_string());
                }
            }
            edges.push((record[0].to_string(), record[1].to_string()));
        }
        Self::build(&edges, &order)
    }

    /// Read a GAL neighbor-list file.
    ///
    /// Layout: a header line carrying the unit count (either `n` alone or the
    /// GeoDa-style `0 n dataset key`), then per unit a `id k` line followed by
    /// a line of `k` neighbor ids. Neighbor relations are symmetrized.
    pub fn read_gal(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let display = path.display().to_string();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: display.clone(),
            line,
            msg,
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
        let lines: Vec<&str> = text.lines().collect();
        let header = *lines
            .first()
            .ok_or_else(|| parse_err(1, "empty file".into()))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let count_token = match tokens.len() {
            0 => return Err(parse_err(1, "blank header".into())),
            1 => tokens[0],
            _ => tokens[1],
        };
        let n: usize = count_token.parse().map_err(|_| {
            parse_err(1, format!("unit count `{count_token}` is not an integer"))
        })?;
        let mut unit_ids = Vec::with_capacity(n);
        let mut edges = Vec::new();
        let mut cursor = 1;
        for _ in 0..n {
            let head = *lines
                .get(cursor)
                .ok_or_else(|| parse_err(cursor + 1, "truncated file: missing unit line".into()))?;
            cursor += 1;
            let mut it = head.split_whitespace();
            let id = it
                .next()
                .ok_or_else(|| parse_err(cursor, "blank unit line".into()))?;
            let k: usize = it
                .next()
                .ok_or_else(|| parse_err(cursor, "missing neighbor count".into()))?
                .parse()
                .map_err(|_| parse_err(cursor, "neighbor count is not an integer".into()))?;
            if k == 0 {
                // Some writers still emit an empty neighbor line; consume it.
                if lines.get(cursor).is_some_and(|l| l.trim().is_empty()) {
                    cursor += 1;
                }
            } else {
                let body = *lines.get(cursor).ok_or_else(|| {
                    parse_err(cursor + 1, "truncated file: missing neighbor line".into())
                })?;
                cursor += 1;
                let ids: Vec<&str> = body.split_whitespace().collect();
                if ids.len() != k {
                    return Err(parse_err(
                        cursor,
                        format!("expected {k} neighbors, got {}", ids.len()),
                    ));
                }
                for other in ids {
                    edges.push((id.to_string(), other.to_string()));
                }
            }
            unit_ids.push(id.to_string());
        }
        Self::build(&edges, &unit_ids)
    }

    pub fn n(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Undirected edges as `(i, j)` with `i < j`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn has_isolated_units(&self) -> bool {
        self.neighbors.iter().any(|ns| ns.is_empty())
    }

    /// Connected-component label per unit, labels in `0..component_count`.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                for &j in &self.neighbors[i] {
                    if label[j] == usize::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().iter().max().map_or(0, |m| m + 1)
    }
}

/// Global Moran's I over a graph's binary weights:
/// `I = (n / S0) * sum_ij w_ij (x_i - xbar)(x_j - xbar) / sum_i (x_i - xbar)^2`
/// with `S0 = sum_ij w_ij`.
pub fn morans_i(values: &[f64], graph: &AdjacencyGraph) -> Result<f64> {
    let n = graph.n();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if graph.edge_count() == 0 {
        return Err(Error::NoEdges);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let denom: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Err(Error::ConstantValues);
    }
    // Each undirected edge contributes w_ij and w_ji.
    let cross: f64 = graph
        .edges()
        .map(|(i, j)| 2.0 * (values[i] - mean) * (values[j] - mean))
        .sum();
    let s0 = 2.0 * graph.edge_count() as f64;
    Ok((n as f64 / s0) * cross / denom)
}

/// Moran's I with a Monte Carlo permutation p-value.
#[derive(Debug, Clone, Copy)]
pub struct MoransTest {
    pub statistic: f64,
    /// One-sided p-value against positive autocorrelation,
    /// `(1 + #{I_perm >= I_obs}) / (permutations + 1)`.
    pub p_value: f64,
    pub permutations: usize,
}

/// Permutation test for Moran's I (values shuffled over units). One-sided
/// toward positive autocorrelation; 999 permutations is the usual default.
pub fn morans_i_permutation_test<R: Rng>(
    values: &[f64],
    graph: &AdjacencyGraph,
    permutations: usize,
    rng: &mut R,
) -> Result<MoransTest> {
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutations must be >= 1".into()));
    }
    let observed = morans_i(values, graph)?;
    let mut shuffled = values.to_vec();
    let mut at_least = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(rng);
        if morans_i(&shuffled, graph)? >= observed {
            at_least += 1;
        }
    }
    Ok(MoransTest {
        statistic: observed,
        p_value: (1 + at_least) as f64 / (permutations + 1) as f64,
        permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn s(v: &str) -> String {
        v.to_string()
    }

    fn units(names: &[&str]) -> Vec<String> {
        names.iter().map(|n| s(n)).collect()
    }

    #[test]
    fn build_dedups_and_symmetrizes() {
        let edges = vec![(s("A"), s("B")), (s("B"), s("A")), (s("B"), s("C"))];
        let g = AdjacencyGraph::build(&edges, &units(&["A", "B", "C"])).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert_eq!(g.neighbors(2), &[1]);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn empty_edge_list_gives_isolated_units() {
        let g = AdjacencyGraph::build(&[], &units(&["A", "B"])).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 0);
        assert!(g.has_isolated_units());
        assert_eq!(g.component_count(), 2);
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(matches!(
            AdjacencyGraph::build(&[], &[]),
            Err(Error::EmptyUnits)
        ));
        assert!(matches!(
            AdjacencyGraph::build(&[(s("A"), s("X"))], &units(&["A", "B"])),
            Err(Error::UnknownUnit(_))
        ));
        assert!(matches!(
            AdjacencyGraph::build(&[(s("A"), s("A"))], &units(&["A", "B"])),
            Err(Error::SelfLoop(_))
        ));
        assert!(matches!(
            AdjacencyGraph::build(&[], &units(&["A", "A"])),
            Err(Error::DuplicateUnit(_))
        ));
    }

    #[test]
    fn lattice_shape() {
        let g = AdjacencyGraph::rook_lattice(12, 13).unwrap();
        assert_eq!(g.n(), 156);
        // Interior units have 4 neighbors, corners 2.
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.degree(14), 4);
        assert_eq!(g.component_count(), 1);
        assert_eq!(g.edge_count(), 12 * 12 + 11 * 13);
    }

    #[test]
    fn gal_reader_handles_headers_and_isolated_units() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.gal");
        // GeoDa-style header, one isolated unit with an empty neighbor line.
        std::fs::write(&path, "0 3 counties fips\nA 1\nB\nB 1\nA\nC 0\n\n").unwrap();
        let g = AdjacencyGraph::read_gal(&path).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.degree(2), 0);

        std::fs::write(&path, "2\nA 1\nB\nB 1\nA\n").unwrap();
        let g = AdjacencyGraph::read_gal(&path).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 1);

        std::fs::write(&path, "2\nA 2\nB\n").unwrap();
        let err = AdjacencyGraph::read_gal(&path).unwrap_err();
        assert!(err.to_string().contains("expected 2 neighbors"), "{err}");
    }

    #[test]
    fn edge_csv_reader_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv");
        std::fs::write(&path, "src,dst\n13001,13003\n13003,13005\n").unwrap();
        let g = AdjacencyGraph::read_edge_csv(&path).unwrap();
        assert_eq!(g.unit_ids(), &["13001", "13003", "13005"]);
        assert_eq!(g.edge_count(), 2);

        std::fs::write(&path, "from,to\n1,2\n").unwrap();
        let err = AdjacencyGraph::read_edge_csv(&path).unwrap_err();
        assert!(err.to_string().contains("src,dst"), "{err}");
    }

    #[test]
    fn morans_i_rejects_degenerate_input() {
        let g = AdjacencyGraph::rook_lattice(2, 2).unwrap();
        assert!(matches!(
            morans_i(&[1.0; 4], &g),
            Err(Error::ConstantValues)
        ));
        assert!(matches!(
            morans_i(&[1.0; 3], &g),
            Err(Error::LengthMismatch { .. })
        ));
        let isolated = AdjacencyGraph::build(&[], &units(&["A", "B"])).unwrap();
        assert!(matches!(
            morans_i(&[0.0, 1.0], &isolated),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn morans_i_checkerboard_is_minus_one() {
        // 2x2 rook grid with +1 on one diagonal and -1 on the other: every
        // edge joins opposite signs, the most negative arrangement.
        let g = AdjacencyGraph::rook_lattice(2, 2).unwrap();
        let values = [1.0, -1.0, -1.0, 1.0];
        let i = morans_i(&values, &g).unwrap();
        assert!((i - brute_force_morans(&values, &g)).abs() < 1e-15);
        assert!((i + 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_test_flags_structured_field() {
        // Smooth gradient on a lattice has strongly positive I.
        let g = AdjacencyGraph::rook_lattice(6, 6).unwrap();
        let values: Vec<f64> = (0..36).map(|k| (k / 6) as f64).collect();
        let mut rng = crate::seeds::rng(11);
        let test = morans_i_permutation_test(&values, &g, 999, &mut rng).unwrap();
        assert!(test.statistic > 0.5);
        assert!(test.p_value < 0.01);
    }

    /// Brute-force O(n^2) double loop over the full weight matrix.
    fn brute_force_morans(values: &[f64], graph: &AdjacencyGraph) -> f64 {
        let n = graph.n();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut s0 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = if graph.neighbors(i).contains(&j) { 1.0 } else { 0.0 };
                num += w * (values[i] - mean) * (values[j] - mean);
                s0 += w;
            }
        }
        let denom: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
        (n as f64 / s0) * num / denom
    }

    fn arbitrary_graph() -> impl Strategy<Value = AdjacencyGraph> {
        (2usize..30).prop_flat_map(|n| {
            let ids: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
            proptest::collection::vec((0..n, 0..n), 1..60).prop_filter_map(
                "need at least one proper edge",
                move |pairs| {
                    let edges: Vec<(String, String)> = pairs
                        .into_iter()
                        .filter(|(a, b)| a != b)
                        .map(|(a, b)| (format!("u{a}"), format!("u{b}")))
                        .collect();
                    if edges.is_empty() {
                        return None;
                    }
                    Some(AdjacencyGraph::build(&edges, &ids).unwrap())
                },
            )
        })
    }

    proptest! {
        #[test]
        fn graph_is_symmetric_hollow_binary(g in arbitrary_graph()) {
            for i in 0..g.n() {
                prop_assert!(!g.neighbors(i).contains(&i));
                let mut sorted = g.neighbors(i).to_vec();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), g.degree(i));
                for &j in g.neighbors(i) {
                    prop_assert!(g.neighbors(j).contains(&i));
                }
            }
        }

        #[test]
        fn morans_i_matches_brute_force(
            g in arbitrary_graph(),
            seed in 0u64..1_000_000,
        ) {
            let mut rng = crate::seeds::rng(seed);
            let values: Vec<f64> = (0..g.n()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fast = morans_i(&values, &g).unwrap();
            let slow = brute_force_morans(&values, &g);
            let scale = slow.abs().max(1.0);
            prop_assert!((fast - slow).abs() / scale < 1e-12);
        }
    }
}
