//! The page-link graph and the network features computed on it.
//!
//! Pages arrive as JSON lines (`pages.jsonl`); titles, links and categories
//! are normalized with the corpus rules. Link targets that have no page of
//! their own are materialized as stub nodes so real pages keep their degree
//! features. Centralities are computed once per graph and cached.

use std::collections::{HashMap, VecDeque};
use std::io::BufRead;

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::normalize_keyword;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate page title after normalization: {0}")]
    DuplicateTitle(String),
    #[error("unknown node: {0}")]
    UnknownNode(String),
    #[error("graph is empty")]
    EmptyGraph,
    #[error("seed set is empty")]
    EmptySeedSet,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed page line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

/// One page: normalized title, raw text, normalized categories and whether it
/// only exists as a link target.
#[derive(Debug, Clone)]
pub struct PageNode {
    pub title: String,
    pub text: String,
    pub categories: Vec<String>,
    pub is_stub: bool,
}

/// Directed page-link graph keyed by normalized title.
#[derive(Debug, Clone)]
pub struct TermGraph {
    nodes: Vec<PageNode>,
    by_title: HashMap<String, usize>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
struct RawPage {
    title: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    categories: Vec<String>,
    #[serde(default)]
    links: Vec<String>,
}

impl TermGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn node_id(&self, title: &str) -> Option<usize> {
        self.by_title.get(title).copied()
    }

    pub fn node(&self, id: usize) -> &PageNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[PageNode] {
        &self.nodes
    }

    pub fn out_neighbors(&self, id: usize) -> &[usize] {
        &self.out_edges[id]
    }

    pub fn in_neighbors(&self, id: usize) -> &[usize] {
        &self.in_edges[id]
    }

    pub fn in_degree(&self, id: usize) -> usize {
        self.in_edges[id].len()
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.out_edges[id].len()
    }

    /// Adjacency in plain index form, for the centrality kernels.
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.out_edges
    }

    /// BFS hop distances from `source`; `None` where unreachable.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        bfs(&self.out_edges, source)
    }
}

/// Loads `pages.jsonl`. Dangling link targets become stub nodes; duplicate
/// normalized titles are rejected. Self-links and repeated links collapse.
pub fn load_graph<R: BufRead>(reader: R) -> Result<TermGraph, GraphError> {
    struct PendingPage {
        node: PageNode,
        links: Vec<String>,
    }
    let mut pages: Vec<PendingPage> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPage = serde_json::from_str(&line).map_err(|e| GraphError::MalformedLine {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        let title = normalize_keyword(&raw.title).map_err(|e| GraphError::MalformedLine {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if seen.contains_key(&title) {
            return Err(GraphError::DuplicateTitle(title));
        }
        seen.insert(title.clone(), pages.len());
        let categories = raw
            .categories
            .iter()
            .filter_map(|c| normalize_keyword(c).ok())
            .collect();
        let links = raw
            .links
            .iter()
            .filter_map(|l| normalize_keyword(l).ok())
            .collect();
        pages.push(PendingPage {
            node: PageNode {
                title,
                text: raw.text,
                categories,
                is_stub: false,
            },
            links,
        });
    }

    let mut nodes: Vec<PageNode> = pages.iter().map(|p| p.node.clone()).collect();
    let mut by_title = seen;
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (source, page) in pages.iter().enumerate() {
        for link in &page.links {
            let target = match by_title.get(link) {
                Some(&t) => t,
                None => {
                    let t = nodes.len();
                    nodes.push(PageNode {
                        title: link.clone(),
                        text: String::new(),
                        categories: Vec::new(),
                        is_stub: true,
                    });
                    out_edges.push(Vec::new());
                    by_title.insert(link.clone(), t);
                    t
                }
            };
            if target != source && !out_edges[source].contains(&target) {
                out_edges[source].push(target);
            }
        }
    }
    let mut in_edges: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
    for (source, targets) in out_edges.iter().enumerate() {
        for &t in targets {
            in_edges[t].push(source);
        }
    }
    Ok(TermGraph {
        nodes,
        by_title,
        out_edges,
        in_edges,
    })
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// PageRank by power iteration until the L1 change drops below `tolerance`.
/// Dangling mass is redistributed uniformly; scores sum to 1.
pub fn pagerank(graph: &TermGraph, damping: f64, tolerance: f64) -> Result<Vec<f64>, GraphError> {
    if graph.node_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    let scores = pagerank_adj(graph.adjacency(), damping, tolerance);
    let sum: f64 = scores.iter().sum();
    assert!((sum - 1.0).abs() <= 1e-9, "pagerank sum invariant violated");
    Ok(scores)
}

pub fn pagerank_adj(adj: &[Vec<usize>], damping: f64, tolerance: f64) -> Vec<f64> {
    let n = adj.len();
    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    loop {
        let mut dangling = 0.0;
        for (u, targets) in adj.iter().enumerate() {
            if targets.is_empty() {
                dangling += rank[u];
            }
        }
        for slot in next.iter_mut() {
            *slot = (1.0 - damping) * uniform + damping * dangling * uniform;
        }
        for (u, targets) in adj.iter().enumerate() {
            if !targets.is_empty() {
                let share = damping * rank[u] / targets.len() as f64;
                for &v in targets {
                    next[v] += share;
                }
            }
        }
        let change: f64 = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if change < tolerance {
            break;
        }
    }
    rank
}

/// HITS hub/authority scores via mutual reinforcement with L2 normalization
/// each round. An edgeless graph yields all-zero scores.
pub fn hits(graph: &TermGraph, iterations: usize) -> (Vec<f64>, Vec<f64>) {
    let (hubs, authorities) = hits_adj(graph.adjacency(), iterations);
    if graph.edge_count() > 0 {
        for scores in [&hubs, &authorities] {
            let norm: f64 = scores.iter().map(|s| s * s).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9, "hits norm invariant violated");
        }
    }
    (hubs, authorities)
}

pub fn hits_adj(adj: &[Vec<usize>], iterations: usize) -> (Vec<f64>, Vec<f64>) {
    let n = adj.len();
    let edge_count: usize = adj.iter().map(Vec::len).sum();
    if edge_count == 0 {
        return (vec![0.0; n], vec![0.0; n]);
    }
    let mut hubs = vec![1.0; n];
    let mut authorities = vec![1.0; n];
    normalize_l2(&mut hubs);
    normalize_l2(&mut authorities);
    for _ in 0..iterations {
        let mut new_auth = vec![0.0; n];
        for (u, targets) in adj.iter().enumerate() {
            for &v in targets {
                new_auth[v] += hubs[u];
            }
        }
        normalize_l2(&mut new_auth);
        let mut new_hubs = vec![0.0; n];
        for (u, targets) in adj.iter().enumerate() {
            for &v in targets {
                new_hubs[u] += new_auth[v];
            }
        }
        normalize_l2(&mut new_hubs);
        hubs = new_hubs;
        authorities = new_auth;
    }
    (hubs, authorities)
}

fn normalize_l2(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Directed, unweighted betweenness centrality (Brandes accumulation),
/// endpoints excluded.
pub fn betweenness(graph: &TermGraph) -> Result<Vec<f64>, GraphError> {
    if graph.node_count() == 0 {
        return Err(GraphError::EmptyGraph);
    }
    Ok(betweenness_adj(graph.adjacency()))
}

pub fn betweenness_adj(adj: &[Vec<usize>]) -> Vec<f64> {
    let n = adj.len();
    let mut centrality = vec![0.0; n];
    for s in 0..n {
        // Single-source shortest paths with path counting.
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0; n];
        let mut dist = vec![usize::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            stack.push(u);
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality
}

/// Closeness of one node: reachable-node count divided by the sum of hop
/// distances to them; 0 when nothing is reachable.
pub fn closeness(graph: &TermGraph, node: usize) -> f64 {
    closeness_adj(graph.adjacency(), node)
}

pub fn closeness_adj(adj: &[Vec<usize>], node: usize) -> f64 {
    let dist = bfs(adj, node);
    let mut reachable = 0usize;
    let mut total = 0usize;
    for (v, d) in dist.iter().enumerate() {
        if v != node {
            if let Some(d) = d {
                reachable += 1;
                total += d;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        reachable as f64 / total as f64
    }
}

/// Hop-distance statistics from a node to a seed set. Unreachable seeds
/// contribute the sentinel distance `|nodes|`; the node itself contributes 0
/// if it is a seed.
pub fn seed_distance_stats(
    graph: &TermGraph,
    node: usize,
    seeds: &[usize],
) -> Result<(usize, usize, f64), GraphError> {
    if seeds.is_empty() {
        return Err(GraphError::EmptySeedSet);
    }
    let sentinel = graph.node_count();
    let dist = graph.bfs_distances(node);
    let mut min = usize::MAX;
    let mut max = 0usize;
    let mut sum = 0usize;
    for &seed in seeds {
        let d = dist[seed].unwrap_or(sentinel);
        min = min.min(d);
        max = max.max(d);
        sum += d;
    }
    Ok((min, max, sum as f64 / seeds.len() as f64))
}

/// The 13 network features of one node: 7 scalar centralities plus the two
/// seed-distance triples.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures {
    pub in_degree: usize,
    pub out_degree: usize,
    pub pagerank: f64,
    pub betweenness: f64,
    pub closeness: f64,
    pub hub: f64,
    pub authority: f64,
    pub algorithm_distances: (usize, usize, f64),
    pub problem_distances: (usize, usize, f64),
}

impl NodeFeatures {
    pub const LEN: usize = 13;

    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.in_degree as f64,
            self.out_degree as f64,
            self.pagerank,
            self.betweenness,
            self.closeness,
            self.hub,
            self.authority,
            self.algorithm_distances.0 as f64,
            self.algorithm_distances.1 as f64,
            self.algorithm_distances.2,
            self.problem_distances.0 as f64,
            self.problem_distances.1 as f64,
            self.problem_distances.2,
        ]
    }
}

/// Whole-graph centralities, computed once and then read-only.
#[derive(Debug, Clone)]
pub struct CentralityCache {
    pub pagerank: Vec<f64>,
    pub betweenness: Vec<f64>,
    pub closeness: Vec<f64>,
    pub hubs: Vec<f64>,
    pub authorities: Vec<f64>,
}

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const DEFAULT_PAGERANK_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_HITS_ITERATIONS: usize = 100;

impl CentralityCache {
    pub fn compute(graph: &TermGraph) -> Result<Self, GraphError> {
        let pagerank = pagerank(graph, DEFAULT_DAMPING, DEFAULT_PAGERANK_TOLERANCE)?;
        let betweenness = betweenness(graph)?;
        let closeness = (0..graph.node_count())
            .map(|v| closeness(graph, v))
            .collect();
        let (hubs, authorities) = hits(graph, DEFAULT_HITS_ITERATIONS);
        Ok(CentralityCache {
            pagerank,
            betweenness,
            closeness,
            hubs,
            authorities,
        })
    }
}

/// Assembles one node's feature record from the cached centralities and the
/// two seed sets.
pub fn node_features(
    graph: &TermGraph,
    cache: &CentralityCache,
    node: usize,
    algorithm_seeds: &[usize],
    problem_seeds: &[usize],
) -> Result<NodeFeatures, GraphError> {
    if node >= graph.node_count() {
        return Err(GraphError::UnknownNode(format!("id {node}")));
    }
    Ok(NodeFeatures {
        in_degree: graph.in_degree(node),
        out_degree: graph.out_degree(node),
        pagerank: cache.pagerank[node],
        betweenness: cache.betweenness[node],
        closeness: cache.closeness[node],
        hub: cache.hubs[node],
        authority: cache.authorities[node],
        algorithm_distances: seed_distance_stats(graph, node, algorithm_seeds)?,
        problem_distances: seed_distance_stats(graph, node, problem_seeds)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn page(title: &str, links: &[&str]) -> String {
        serde_json::json!({
            "title": title,
            "text": format!("text of {title}"),
            "categories": [],
            "links": links,
        })
        .to_string()
    }

    fn graph_from(pages: &[String]) -> TermGraph {
        load_graph(Cursor::new(pages.join("\n"))).unwrap()
    }

    #[test]
    fn load_counts_nodes_and_edges() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["c"]), page("c", &[])]);
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn dangling_link_becomes_stub() {
        let g = graph_from(&[page("a", &["x"])]);
        let x = g.node_id("x").unwrap();
        assert!(g.node(x).is_stub);
        assert_eq!(g.in_degree(x), 1);
        assert_eq!(g.out_degree(x), 0);
    }

    #[test]
    fn duplicate_title_rejected() {
        let err = load_graph(Cursor::new(
            [page("Mean Shift", &[]), page("mean-shift", &[])].join("\n"),
        ))
        .unwrap_err();
        assert!(matches!(err, GraphError::DuplicateTitle(t) if t == "mean_shift"));
    }

    #[test]
    fn pagerank_two_cycle_symmetric() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["a"])]);
        let pr = pagerank(&g, 0.85, 1e-12).unwrap();
        assert!((pr[0] - 0.5).abs() < 1e-9);
        assert!((pr[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pagerank_ring_uniform() {
        let n = 6;
        let pages: Vec<String> = (0..n)
            .map(|i| page(&format!("n{i}"), &[&format!("n{}", (i + 1) % n)]))
            .collect();
        let g = graph_from(&pages);
        let pr = pagerank(&g, 0.85, 1e-12).unwrap();
        for score in pr {
            assert!((score - 1.0 / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn hits_star_fixed_point() {
        let k = 4;
        let mut pages: Vec<String> = (0..k)
            .map(|i| page(&format!("leaf{i}"), &["center"]))
            .collect();
        pages.push(page("center", &[]));
        let g = graph_from(&pages);
        let (hubs, auth) = hits(&g, 50);
        let center = g.node_id("center").unwrap();
        assert!((auth[center] - 1.0).abs() < 1e-9);
        for i in 0..k {
            let leaf = g.node_id(&format!("leaf{i}")).unwrap();
            assert!((hubs[leaf] - 1.0 / (k as f64).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn hits_two_cycle_symmetric() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["a"])]);
        let (hubs, auth) = hits(&g, 100);
        assert!((hubs[0] - hubs[1]).abs() < 1e-12);
        assert!((auth[0] - auth[1]).abs() < 1e-12);
    }

    #[test]
    fn hits_edgeless_graph_zero() {
        let g = graph_from(&[page("a", &[]), page("b", &[])]);
        let (hubs, auth) = hits(&g, 10);
        assert!(hubs.iter().all(|h| *h == 0.0));
        assert!(auth.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn betweenness_path_and_clique() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["c"]), page("c", &[])]);
        let bc = betweenness(&g).unwrap();
        assert_eq!(bc[g.node_id("a").unwrap()], 0.0);
        assert_eq!(bc[g.node_id("b").unwrap()], 1.0);
        assert_eq!(bc[g.node_id("c").unwrap()], 0.0);

        let clique = graph_from(&[
            page("a", &["b", "c"]),
            page("b", &["a", "c"]),
            page("c", &["a", "b"]),
        ]);
        assert!(betweenness(&clique).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn closeness_path_and_isolated() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["c"]), page("c", &[]), page("z", &[])]);
        let a = g.node_id("a").unwrap();
        assert!((closeness(&g, a) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(closeness(&g, g.node_id("z").unwrap()), 0.0);
    }

    #[test]
    fn seed_distance_stats_cases() {
        let g = graph_from(&[
            page("a", &["b"]),
            page("b", &["c"]),
            page("c", &[]),
            page("d", &["e"]),
            page("e", &[]),
            page("f", &[]),
            page("g", &[]),
        ]);
        assert_eq!(g.node_count(), 7);
        let a = g.node_id("a").unwrap();
        let b = g.node_id("b").unwrap();
        let c = g.node_id("c").unwrap();
        let d = g.node_id("d").unwrap();
        // distances {1, 2} from a to seeds {b, c}
        assert_eq!(
            seed_distance_stats(&g, a, &[b, c]).unwrap(),
            (1, 2, 1.5)
        );
        // d reaches neither b nor c: sentinel 7 for both
        assert_eq!(
            seed_distance_stats(&g, d, &[b, c]).unwrap(),
            (7, 7, 7.0)
        );
        // a node that is itself the only seed
        assert_eq!(seed_distance_stats(&g, a, &[a]).unwrap(), (0, 0, 0.0));
        assert!(seed_distance_stats(&g, a, &[]).is_err());
    }

    #[test]
    fn node_features_shape_and_values() {
        let g = graph_from(&[page("a", &["b"]), page("b", &["c"]), page("c", &[])]);
        let cache = CentralityCache::compute(&g).unwrap();
        let a = g.node_id("a").unwrap();
        let b = g.node_id("b").unwrap();
        let c = g.node_id("c").unwrap();
        let f = node_features(&g, &cache, b, &[a], &[c]).unwrap();
        assert_eq!(f.in_degree, 1);
        assert_eq!(f.out_degree, 1);
        assert_eq!(f.problem_distances, (1, 1, 1.0));
        assert_eq!(f.to_vec().len(), NodeFeatures::LEN);
        // min <= avg <= max on both triples
        for (min, max, avg) in [f.algorithm_distances, f.problem_distances] {
            assert!(min as f64 <= avg && avg <= max as f64);
        }
    }

    #[test]
    fn feature_extraction_is_read_only() {
        let g = graph_from(&[page("a", &["b"]), page("b", &[])]);
        let titles_before: Vec<String> = g.nodes().iter().map(|n| n.title.clone()).collect();
        let edges_before = g.edge_count();
        let cache = CentralityCache::compute(&g).unwrap();
        let _ = node_features(&g, &cache, 0, &[1], &[1]).unwrap();
        let titles_after: Vec<String> = g.nodes().iter().map(|n| n.title.clone()).collect();
        assert_eq!(titles_before, titles_after);
        assert_eq!(edges_before, g.edge_count());
    }
}
