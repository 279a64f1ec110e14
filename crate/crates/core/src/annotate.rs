//! Dataset-construction math: semantic relatedness over concept inlinks,
//! weighted PageRank, TF-IDF cosine, the 0.8/0.2 concept ranking,
//! transcript fragmentation, watch-time labels and timestamp re-basing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::EngagementEvent;

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("unknown concept {0}")]
    UnknownConcept(u64),
    #[error("degenerate graph: semantic-relatedness denominator is not positive")]
    DegenerateGraph,
    #[error("zero vector: a document has no nonzero weighted terms")]
    ZeroVector,
    #[error("no annotations given")]
    EmptyAnnotations,
    #[error("empty input")]
    EmptyInput,
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
}

/// Wikipedia-style inlink structure used for semantic relatedness.
///
/// `total_count` is the size of the whole concept universe, which is
/// usually much larger than the candidate set held in `inlinks`.
#[derive(Debug, Clone)]
pub struct ConceptLinkGraph {
    inlinks: BTreeMap<u64, BTreeSet<u64>>,
    total_count: u64,
}

impl ConceptLinkGraph {
    pub fn new(inlinks: BTreeMap<u64, BTreeSet<u64>>, total_count: u64) -> Self {
        Self {
            inlinks,
            total_count,
        }
    }

    pub fn concepts(&self) -> impl Iterator<Item = u64> + '_ {
        self.inlinks.keys().copied()
    }

    pub fn inlinks(&self, concept: u64) -> Option<&BTreeSet<u64>> {
        self.inlinks.get(&concept)
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }
}

/// Inlink-overlap relatedness distance between two concepts.
///
/// Zero means identical inlink neighbourhoods; larger is less related.
/// Disjoint inlink sets give `+inf`, which callers treat as "no edge".
pub fn semantic_relatedness(
    g: &ConceptLinkGraph,
    c: u64,
    c2: u64,
) -> Result<f64, AnnotateError> {
    let links_a = g.inlinks(c).ok_or(AnnotateError::UnknownConcept(c))?;
    let links_b = g.inlinks(c2).ok_or(AnnotateError::UnknownConcept(c2))?;
    let a = links_a.len() as f64;
    let b = links_b.len() as f64;
    let min = a.min(b);
    let max = a.max(b);
    let denom = (g.total_count as f64).ln() - min.ln();
    if denom <= 0.0 {
        return Err(AnnotateError::DegenerateGraph);
    }
    let overlap = links_a.intersection(links_b).count() as f64;
    if overlap == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((max.ln() - overlap.ln()) / denom)
}

/// Directed weighted graph over concept ids, edge weight > 0.
#[derive(Debug, Clone, Default)]
pub struct WeightedGraph {
    pub nodes: Vec<u64>,
    /// (source index, target index, weight) triples.
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn index_of(&self, node: u64) -> Option<usize> {
        self.nodes.iter().position(|&n| n == node)
    }
}

/// Builds the PageRank input graph from pairwise semantic relatedness,
/// using weight = exp(-SR) so that closer concepts get stronger edges.
/// Disjoint-inlink pairs are left unconnected.
pub fn semantic_graph(g: &ConceptLinkGraph) -> Result<WeightedGraph, AnnotateError> {
    let nodes: Vec<u64> = g.concepts().collect();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let sr = semantic_relatedness(g, nodes[i], nodes[j])?;
            if sr.is_finite() {
                let weight = (-sr).exp();
                edges.push((i, j, weight));
                edges.push((j, i, weight));
            }
        }
    }
    Ok(WeightedGraph { nodes, edges })
}

#[derive(Debug, Clone)]
pub struct PageRankResult {
    pub scores: BTreeMap<u64, f64>,
    pub converged: bool,
}

/// Weighted PageRank by sparse power iteration.
///
/// Dangling mass is spread uniformly; scores sum to one. When `max_iter`
/// is exhausted the best iterate is returned with `converged = false`.
pub fn pagerank(
    graph: &WeightedGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> PageRankResult {
    let n = graph.nodes.len();
    if n == 0 {
        return PageRankResult {
            scores: BTreeMap::new(),
            converged: true,
        };
    }
    let mut out_weight = vec![0.0f64; n];
    for &(src, _, w) in &graph.edges {
        out_weight[src] += w;
    }
    let mut rank = vec![1.0 / n as f64; n];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut next = vec![0.0f64; n];
        let mut dangling = 0.0;
        for (i, &r) in rank.iter().enumerate() {
            if out_weight[i] == 0.0 {
                dangling += r;
            }
        }
        for &(src, dst, w) in &graph.edges {
            next[dst] += rank[src] * w / out_weight[src];
        }
        let base = (1.0 - damping) / n as f64 + damping * dangling / n as f64;
        for v in next.iter_mut() {
            *v = base + damping * *v;
        }
        let delta: f64 = next
            .iter()
            .zip(&rank)
            .map(|(a, b)| (a - b).abs())
            .sum();
        rank = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let scores = graph
        .nodes
        .iter()
        .zip(&rank)
        .map(|(&node, &score)| (node, score))
        .collect();
    PageRankResult { scores, converged }
}

/// Cosine similarity between the TF-IDF vectors of two documents,
/// clamped to [0, 1]. Terms absent from `idf` weigh zero.
pub fn tfidf_cosine(
    doc_a: &BTreeMap<String, f64>,
    doc_b: &BTreeMap<String, f64>,
    idf: &BTreeMap<String, f64>,
) -> Result<f64, AnnotateError> {
    let weight = |doc: &BTreeMap<String, f64>, term: &str| -> f64 {
        doc.get(term).copied().unwrap_or(0.0) * idf.get(term).copied().unwrap_or(0.0)
    };
    let norm = |doc: &BTreeMap<String, f64>| -> f64 {
        doc.keys()
            .map(|t| weight(doc, t).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let norm_a = norm(doc_a);
    let norm_b = norm(doc_b);
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(AnnotateError::ZeroVector);
    }
    let dot: f64 = doc_a
        .keys()
        .map(|t| weight(doc_a, t) * weight(doc_b, t))
        .sum();
    Ok((dot / (norm_a * norm_b)).clamp(0.0, 1.0))
}

/// (kc id, pagerank, cosine coverage, combined rank score) for one fragment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConceptAnnotation {
    pub kc_id: u64,
    pub pagerank: f64,
    pub cosine: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RankConfig {
    pub weight_pagerank: f64,
    pub weight_cosine: f64,
    /// Min-max normalize PageRank within the fragment before combining.
    pub normalize_pagerank: bool,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            weight_pagerank: 0.8,
            weight_cosine: 0.2,
            normalize_pagerank: true,
        }
    }
}

/// Ranks a fragment's candidate concepts by the weighted PageRank/cosine
/// combination and keeps the `top_n` best.
pub fn rank_concepts(
    annotations: &[(u64, f64, f64)],
    top_n: usize,
    config: RankConfig,
) -> Result<Vec<ConceptAnnotation>, AnnotateError> {
    if annotations.is_empty() {
        return Err(AnnotateError::EmptyAnnotations);
    }
    let pr_min = annotations.iter().map(|a| a.1).fold(f64::INFINITY, f64::min);
    let pr_max = annotations
        .iter()
        .map(|a| a.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = pr_max - pr_min;
    let mut ranked: Vec<ConceptAnnotation> = annotations
        .iter()
        .map(|&(kc_id, pagerank, cosine)| {
            let pr = if !config.normalize_pagerank {
                pagerank
            } else if span > 0.0 {
                (pagerank - pr_min) / span
            } else {
                1.0
            };
            ConceptAnnotation {
                kc_id,
                pagerank: pr,
                cosine,
                combined: config.weight_pagerank * pr + config.weight_cosine * cosine,
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .unwrap()
            .then(a.kc_id.cmp(&b.kc_id))
    });
    ranked.truncate(top_n);
    Ok(ranked)
}

/// Splits a transcript into ~`target_chars` fragments, preferring sentence
/// boundaries, then whitespace, within the last 10% of each window.
/// Concatenating the fragments reproduces the input exactly.
pub fn fragment_transcript(transcript: &str, target_chars: usize) -> Vec<String> {
    assert!(target_chars >= 1);
    let chars: Vec<char> = transcript.chars().collect();
    let mut fragments = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let remaining = chars.len() - start;
        if remaining <= target_chars {
            fragments.push(chars[start..].iter().collect());
            break;
        }
        let window_end = start + target_chars;
        let zone_start = start + target_chars - target_chars / 10;
        let window = &chars[start..window_end];
        let is_sentence_end = |i: usize| {
            matches!(window[i], '.' | '!' | '?')
                && window.get(i + 1).map_or(true, |c| c.is_whitespace())
        };
        let mut cut = None;
        for i in (0..window.len()).rev() {
            if start + i < zone_start {
                break;
            }
            if is_sentence_end(i) {
                cut = Some(start + i + 1);
                break;
            }
        }
        if cut.is_none() {
            for i in (0..window.len()).rev() {
                if start + i < zone_start {
                    break;
                }
                if window[i].is_whitespace() {
                    cut = Some(start + i + 1);
                    break;
                }
            }
        }
        let mut cut = cut.unwrap_or(window_end);
        // attach separator whitespace to the fragment it follows
        while cut < window_end && chars[cut].is_whitespace() {
            cut += 1;
        }
        fragments.push(chars[start..cut].iter().collect());
        start = cut;
    }
    fragments
}

/// Raw watch-time observation for one learner x fragment pair.
#[derive(Debug, Clone, Copy)]
pub struct WatchRecord {
    pub watch_seconds: f64,
    pub duration_seconds: f64,
}

/// Engagement label threshold: watched at least three quarters.
pub const ENGAGEMENT_THRESHOLD: f64 = 0.75;

/// Normalised watch time (clamped at 1 for replays) and its binary label.
/// The threshold is inclusive: exactly 0.75 labels engaged.
pub fn label_engagement(w: WatchRecord) -> Result<(f64, u8), AnnotateError> {
    if w.duration_seconds <= 0.0 {
        return Err(AnnotateError::NonPositiveDuration(w.duration_seconds));
    }
    let normalized = (w.watch_seconds / w.duration_seconds).min(1.0);
    let label = u8::from(normalized >= ENGAGEMENT_THRESHOLD);
    Ok((normalized, label))
}

/// Re-bases timestamps so the earliest becomes zero, preserving order and
/// all pairwise differences.
pub fn rebase_timestamps(
    events: &[EngagementEvent],
) -> Result<Vec<EngagementEvent>, AnnotateError> {
    let t0 = events
        .iter()
        .map(|e| e.timestamp)
        .min()
        .ok_or(AnnotateError::EmptyInput)?;
    Ok(events
        .iter()
        .cloned()
        .map(|mut e| {
            e.timestamp -= t0;
            e
        })
        .collect())
}
