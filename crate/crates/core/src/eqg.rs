//! Entailed Question Graph.
//!
//! Nodes are generated questions; a directed edge `a → b` means the
//! entailment scorer judged that `a` entails `b` with probability at least
//! `edge_threshold`. The original question is kept outside the graph: only
//! its entailment probability towards every node is stored.
//!
//! Components are weakly connected (direction ignored). From each component
//! we keep the members entailed by the original question with probability at
//! least `q0_threshold`, and among those select every member of maximal
//! degree (in + out edges). Those are the nugget-asking questions; their
//! component id serves as the nugget identity downstream.

use std::collections::HashMap;

use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{EntailmentScorer, GeneratedQuestion, Question};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqgConfig {
    pub edge_threshold: f64,
    pub q0_threshold: f64,
}

impl Default for EqgConfig {
    fn default() -> Self {
        EqgConfig {
            edge_threshold: 0.5,
            q0_threshold: 0.5,
        }
    }
}

impl EqgConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("edge_threshold", self.edge_threshold),
            ("q0_threshold", self.q0_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub premise: usize,
    pub hypothesis: usize,
    pub probability: f64,
}

/// Every ordered pair scored once; thresholds are applied afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScores {
    pub nodes: Vec<GeneratedQuestion>,
    /// Row-major `n × n`; `probs[a * n + b]` is P(a entails b). Diagonal unused.
    pub probs: Vec<f64>,
    pub q0_entailment: Vec<f64>,
}

/// Ordered pairs are sent to the scorer in chunks of this size.
const PAIR_CHUNK: usize = 1024;

impl PairScores {
    pub fn score(
        questions: Vec<GeneratedQuestion>,
        q0: &Question,
        entail: &dyn EntailmentScorer,
    ) -> Result<Self> {
        let mut seen = HashMap::with_capacity(questions.len());
        for q in &questions {
            if seen.insert(q.gqid.as_str(), ()).is_some() {
                return Err(Error::DuplicateId(q.gqid.clone()));
            }
        }
        let n = questions.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
            .collect();
        let scored: Vec<Vec<f64>> = pairs
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| {
                let texts: Vec<(&str, &str)> = chunk
                    .iter()
                    .map(|&(a, b)| (questions[a].text.as_str(), questions[b].text.as_str()))
                    .collect();
                entail.entail(&texts)
            })
            .collect::<Result<_>>()?;
        let mut probs = vec![0.0; n * n];
        for (&(a, b), p) in pairs.iter().zip(scored.into_iter().flatten()) {
            probs[a * n + b] = p;
        }
        let q0_pairs: Vec<(&str, &str)> = questions
            .iter()
            .map(|q| (q0.text.as_str(), q.text.as_str()))
            .collect();
        let q0_entailment: Vec<f64> = q0_pairs
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| entail.entail(chunk))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        Ok(PairScores {
            nodes: questions,
            probs,
            q0_entailment,
        })
    }

    pub fn probability(&self, premise: usize, hypothesis: usize) -> f64 {
        self.probs[premise * self.nodes.len() + hypothesis]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eqg {
    nodes: Vec<GeneratedQuestion>,
    edges: Vec<Edge>,
    q0_entailment: Vec<f64>,
    by_gqid: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub component_id: usize,
    /// Node indices, ordered by gqid.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuggetQuestion {
    pub node: usize,
    pub gqid: String,
    pub component_id: usize,
    pub degree: usize,
    pub q0_probability: f64,
}

pub fn build_eqg(
    questions: Vec<GeneratedQuestion>,
    q0: &Question,
    entail: &dyn EntailmentScorer,
    config: &EqgConfig,
) -> Result<Eqg> {
    config.validate()?;
    let scores = PairScores::score(questions, q0, entail)?;
    Ok(Eqg::from_scores(scores, config))
}

impl Eqg {
    pub fn from_scores(scores: PairScores, config: &EqgConfig) -> Self {
        let n = scores.nodes.len();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let p = scores.probs[a * n + b];
                    if p >= config.edge_threshold {
                        edges.push(Edge {
                            premise: a,
                            hypothesis: b,
                            probability: p,
                        });
                    }
                }
            }
        }
        Eqg::from_parts(scores.nodes, edges, scores.q0_entailment)
    }

    /// Assembles a graph from explicit edges. Self-edges are dropped.
    pub fn from_parts(
        nodes: Vec<GeneratedQuestion>,
        edges: Vec<Edge>,
        q0_entailment: Vec<f64>,
    ) -> Self {
        assert_eq!(
            nodes.len(),
            q0_entailment.len(),
            "one q0 probability per node"
        );
        let by_gqid = nodes
            .iter()
            .enumerate()
            .map(|(i, q)| (q.gqid.clone(), i))
            .collect();
        let edges = edges
            .into_iter()
            .filter(|e| e.premise != e.hypothesis)
            .inspect(|e| assert!(e.premise < nodes.len() && e.hypothesis < nodes.len()))
            .collect();
        Eqg {
            nodes,
            edges,
            q0_entailment,
            by_gqid,
        }
    }

    pub fn nodes(&self) -> &[GeneratedQuestion] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn q0_entailment(&self) -> &[f64] {
        &self.q0_entailment
    }

    pub fn node_index(&self, gqid: &str) -> Option<usize> {
        self.by_gqid.get(gqid).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// In-degree plus out-degree for every node; a mutual pair counts twice.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.premise] += 1;
            deg[e.hypothesis] += 1;
        }
        deg
    }

    pub fn entailment_degree(&self, gqid: &str) -> Result<usize> {
        let node = self
            .node_index(gqid)
            .ok_or_else(|| Error::UnknownNode(gqid.to_string()))?;
        Ok(self
            .edges
            .iter()
            .filter(|e| e.premise == node || e.hypothesis == node)
            .count())
    }

    /// Weakly connected components, numbered by their smallest member gqid.
    pub fn connected_components(&self) -> Vec<Component> {
        let n = self.nodes.len();
        let mut uf = UnionFind::<usize>::new(n);
        for e in &self.edges {
            uf.union(e.premise, e.hypothesis);
        }
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for i in 0..n {
            groups.entry(uf.find(i)).or_default().push(i);
        }
        let mut comps: Vec<Vec<usize>> = groups.into_values().collect();
        for members in &mut comps {
            members.sort_by(|&a, &b| self.nodes[a].gqid.cmp(&self.nodes[b].gqid));
        }
        comps.sort_by(|a, b| self.nodes[a[0]].gqid.cmp(&self.nodes[b[0]].gqid));
        comps
            .into_iter()
            .enumerate()
            .map(|(component_id, members)| Component {
                component_id,
                members,
            })
            .collect()
    }

    pub fn select_nugget_questions(
        &self,
        components: &[Component],
        config: &EqgConfig,
    ) -> Vec<NuggetQuestion> {
        let degrees = self.degrees();
        let mut out = Vec::new();
        for comp in components {
            let candidates: Vec<usize> = comp
                .members
                .iter()
                .copied()
                .filter(|&m| self.q0_entailment[m] >= config.q0_threshold)
                .collect();
            let Some(max_degree) = candidates.iter().map(|&m| degrees[m]).max() else {
                continue;
            };
            // members are already in gqid order
            for m in candidates.into_iter().filter(|&m| degrees[m] == max_degree) {
                out.push(NuggetQuestion {
                    node: m,
                    gqid: self.nodes[m].gqid.clone(),
                    component_id: comp.component_id,
                    degree: max_degree,
                    q0_probability: self.q0_entailment[m],
                });
            }
        }
        out
    }

    pub fn dump(&self, components: &[Component], nuggets: &[NuggetQuestion]) -> EqgDump {
        EqgDump {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| DumpEdge {
                    premise: self.nodes[e.premise].gqid.clone(),
                    hypothesis: self.nodes[e.hypothesis].gqid.clone(),
                    probability: e.probability,
                })
                .collect(),
            q0_entailment: self
                .nodes
                .iter()
                .zip(&self.q0_entailment)
                .map(|(n, &p)| (n.gqid.clone(), p))
                .collect(),
            components: components
                .iter()
                .map(|c| DumpComponent {
                    component_id: c.component_id,
                    members: c
                        .members
                        .iter()
                        .map(|&m| self.nodes[m].gqid.clone())
                        .collect(),
                })
                .collect(),
            nugget_questions: nuggets.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpEdge {
    pub premise: String,
    pub hypothesis: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpComponent {
    pub component_id: usize,
    pub members: Vec<String>,
}

/// JSON view of a graph, its components and the selected questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqgDump {
    pub nodes: Vec<GeneratedQuestion>,
    pub edges: Vec<DumpEdge>,
    pub q0_entailment: std::collections::BTreeMap<String, f64>,
    pub components: Vec<DumpComponent>,
    pub nugget_questions: Vec<NuggetQuestion>,
}
