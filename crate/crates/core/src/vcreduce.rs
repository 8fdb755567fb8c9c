//! Vertex cover to epsilon-valid counterfactual reduction, made executable.
//!
//! For a graph on vertices `v_1..v_n` the item universe holds a positive and
//! a negative literal per vertex plus two outputs, `bottom` and `top`. The
//! model answers `top` exactly when its input is a literal sequence
//! `[l_1..l_n]` (`l_i` either literal of `v_i`) whose positive literals form a
//! vertex cover. The all-negative sequence then has a counterfactual within
//! edit distance `k` iff the graph has a cover of size at most `k`.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::levenshtein;
use crate::model::{BlackBoxScorer, ScoreVector};
use crate::objective::verify_eps_vcs;
use crate::types::{ItemId, UserSequence};

pub const MAX_BRUTE_FORCE_VERTICES: usize = 20;
pub const MAX_EQUIVALENCE_VERTICES: usize = 12;

/// Undirected simple graph with 0-based vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!("edge ({u},{v}) out of range")));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({u},{v})")));
            }
            out.push(key);
        }
        Ok(Graph { n, edges: out })
    }

    /// Parses `n` on the first line and one 1-indexed `u v` pair per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::InvalidGraph("missing vertex count".into()))?
            .parse()
            .map_err(|_| Error::InvalidGraph("vertex count is not an integer".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [u, v] = parts[..] else {
                return Err(Error::InvalidGraph(format!("bad edge line {line:?}")));
            };
            let parse = |s: &str| -> Result<usize> {
                match s.parse::<usize>() {
                    Ok(x) if x >= 1 => Ok(x - 1),
                    _ => Err(Error::InvalidGraph(format!("bad vertex {s:?}"))),
                }
            };
            edges.push((parse(u)?, parse(v)?));
        }
        Graph::new(n, edges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Graph::parse(&text)
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// True when the vertices whose bits are set in `mask` touch every edge.
    pub fn is_cover(&self, mask: u64) -> bool {
        self.edges
            .iter()
            .all(|&(u, v)| mask >> u & 1 == 1 || mask >> v & 1 == 1)
    }
}

pub fn positive(v: usize) -> ItemId {
    ItemId(2 * v as u32)
}

pub fn negative(v: usize) -> ItemId {
    ItemId(2 * v as u32 + 1)
}

/// The constructed recommender over `2n + 2` items.
#[derive(Debug, Clone)]
pub struct VcModel {
    graph: Graph,
}

impl VcModel {
    pub fn bottom(&self) -> ItemId {
        ItemId(2 * self.graph.n as u32)
    }

    pub fn top(&self) -> ItemId {
        ItemId(2 * self.graph.n as u32 + 1)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    /// Vertex mask encoded by a literal sequence, or `None` for any other shape.
    pub fn decode(&self, items: &[ItemId]) -> Option<u64> {
        if items.len() != self.graph.n {
            return None;
        }
        let mut mask = 0u64;
        for (i, &it) in items.iter().enumerate() {
            if it == positive(i) {
                mask |= 1 << i;
            } else if it != negative(i) {
                return None;
            }
        }
        Some(mask)
    }

    pub fn output(&self, items: &[ItemId]) -> ItemId {
        match self.decode(items) {
            Some(mask) if self.graph.is_cover(mask) => self.top(),
            _ => self.bottom(),
        }
    }
}

impl BlackBoxScorer for VcModel {
    fn num_items(&self) -> usize {
        2 * self.graph.n + 2
    }

    fn score(&self, items: &[ItemId]) -> Result<ScoreVector> {
        if items.is_empty() {
            return Err(Error::EmptySequence);
        }
        let out = self.output(items).index();
        let logits = (0..self.num_items())
            .map(|i| if i == out { 0.0 } else { f64::NEG_INFINITY })
            .collect();
        Ok(ScoreVector::from_logits(logits, &[]))
    }
}

/// Literal sequence with the vertices of `mask` positive.
pub fn literal_sequence(n: usize, mask: u64) -> UserSequence {
    let items = (0..n)
        .map(|i| if mask >> i & 1 == 1 { positive(i) } else { negative(i) })
        .collect();
    UserSequence::from_parts_unchecked(0, items, n.max(1))
}

/// Builds the model and the all-negative sequence.
pub fn reduce(graph: &Graph) -> Result<(VcModel, UserSequence)> {
    if graph.n == 0 {
        return Err(Error::InvalidGraph("graph needs at least one vertex".into()));
    }
    if graph.n > 63 {
        return Err(Error::GraphTooLarge { n: graph.n, max: 63 });
    }
    Ok((
        VcModel {
            graph: graph.clone(),
        },
        literal_sequence(graph.n, 0),
    ))
}

/// Whether some vertex subset of size at most `k` covers every edge.
pub fn brute_force_vc(graph: &Graph, k: usize) -> Result<bool> {
    if graph.n > MAX_BRUTE_FORCE_VERTICES {
        return Err(Error::GraphTooLarge {
            n: graph.n,
            max: MAX_BRUTE_FORCE_VERTICES,
        });
    }
    Ok((0u64..1 << graph.n).any(|mask| mask.count_ones() as usize <= k && graph.is_cover(mask)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivalenceVerdict {
    /// Cover of size at most k exists.
    pub has_cover: bool,
    /// The all-negative sequence has a k-valid counterfactual.
    pub has_counterfactual: bool,
    /// Edgeless graph: the all-negative sequence already maps to `top`, so
    /// the right-hand side is read as "a top-mapped sequence lies within k"
    /// and is witnessed by the sequence itself.
    pub degenerate: bool,
}

impl EquivalenceVerdict {
    pub fn holds(&self) -> bool {
        self.has_cover == self.has_counterfactual
    }
}

pub fn equivalence_verdict(graph: &Graph, k: usize) -> Result<EquivalenceVerdict> {
    if graph.n > MAX_EQUIVALENCE_VERTICES {
        return Err(Error::GraphTooLarge {
            n: graph.n,
            max: MAX_EQUIVALENCE_VERTICES,
        });
    }
    let has_cover = brute_force_vc(graph, k)?;
    let (model, all_negative) = reduce(graph)?;
    let degenerate = model.output(all_negative.items()) == model.top();
    let has_counterfactual = if degenerate {
        true
    } else {
        let mut found = false;
        for mask in 0u64..1 << graph.n {
            let cand = literal_sequence(graph.n, mask);
            if verify_eps_vcs(&model, &all_negative, &cand, k as f64, levenshtein)? {
                found = true;
                break;
            }
        }
        found
    };
    Ok(EquivalenceVerdict {
        has_cover,
        has_counterfactual,
        degenerate,
    })
}

/// Whether "cover of size <= k" and "k-valid counterfactual of the
/// all-negative sequence" agree on this graph.
pub fn check_equivalence(graph: &Graph, k: usize) -> Result<bool> {
    Ok(equivalence_verdict(graph, k)?.holds())
}

/// All graphs on `n` vertices, one per subset of the `n(n-1)/2` vertex pairs.
pub fn all_graphs(n: usize) -> impl Iterator<Item = Graph> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect();
    let count = 1u64 << pairs.len();
    (0..count).map(move |mask| {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, &e)| e);
        Graph::new(n, edges).expect("pairs are distinct and loop-free")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::hamming;

    fn k3() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_construction() {
        let (model, s) = reduce(&k3()).unwrap();
        assert_eq!(model.num_items(), 8);
        assert_eq!(s.items(), &[negative(0), negative(1), negative(2)]);
        assert_eq!(model.output(s.items()), model.bottom());
    }

    #[test]
    fn edgeless_graph_is_degenerate() {
        let g = Graph::new(3, []).unwrap();
        let (model, s) = reduce(&g).unwrap();
        assert_eq!(model.output(s.items()), model.top());
        let v = equivalence_verdict(&g, 0).unwrap();
        assert!(v.degenerate && v.holds());
    }

    #[test]
    fn single_edge() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let (model, _) = reduce(&g).unwrap();
        assert_eq!(model.output(&[positive(0), negative(1)]), model.top());
        assert_eq!(model.output(&[negative(0), negative(1)]), model.bottom());
        // malformed shapes map to bottom
        assert_eq!(model.output(&[positive(0)]), model.bottom());
        assert_eq!(model.output(&[negative(1), positive(0)]), model.bottom());
    }

    #[test]
    fn brute_force_examples() {
        assert!(brute_force_vc(&k3(), 2).unwrap());
        assert!(!brute_force_vc(&k3(), 1).unwrap());
        let path = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        assert!(brute_force_vc(&path, 1).unwrap());
        let big = Graph::new(21, []).unwrap();
        assert!(brute_force_vc(&big, 0).is_err());
    }

    #[test]
    fn triangle_equivalence() {
        let v = equivalence_verdict(&k3(), 2).unwrap();
        assert!(v.has_cover && v.has_counterfactual && !v.degenerate);
        let v = equivalence_verdict(&k3(), 1).unwrap();
        assert!(!v.has_cover && !v.has_counterfactual);
        assert!(check_equivalence(&k3(), 0).unwrap());
    }

    #[test]
    fn cover_sequence_distance_equals_cover_size() {
        for n in 1..=5 {
            let all_neg = literal_sequence(n, 0);
            for mask in 0u64..1 << n {
                let s = literal_sequence(n, mask);
                let size = mask.count_ones() as usize;
                assert_eq!(levenshtein(s.items(), all_neg.items()), size);
                assert_eq!(hamming(s.items(), all_neg.items()), size);
            }
        }
    }

    #[test]
    fn parse_graph_file_format() {
        let g = Graph::parse("3\n1 2\n2 3\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(Graph::parse("2\n1 1\n").is_err());
        assert!(Graph::parse("2\n1 2\n2 1\n").is_err());
        assert!(Graph::parse("2\n1 3\n").is_err());
        assert!(Graph::parse("").is_err());
    }

    #[test]
    fn graph_enumeration_counts() {
        assert_eq!(all_graphs(4).count(), 64);
        assert_eq!(all_graphs(1).count(), 1);
    }
}
