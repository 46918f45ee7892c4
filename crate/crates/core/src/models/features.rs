use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::extraction::{ExtractionConfig, SceneGraph};

/// Actor and relation vocabularies a model was built for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub actor_names: Vec<String>,
    pub relation_names: Vec<String>,
}

impl Vocab {
    pub fn from_config(cfg: &ExtractionConfig) -> Self {
        Vocab {
            actor_names: cfg.actor_names.clone(),
            relation_names: cfg.relation_names.clone(),
        }
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }

    /// Width of the input node features.
    pub fn feature_dim(&self, with_attributes: bool) -> usize {
        self.actor_names.len() + if with_attributes { ATTRIBUTE_DIM } else { 0 }
    }

    /// Errors unless both vocabularies are identical.
    pub fn ensure_same(&self, other: &Vocab) -> Result<()> {
        if self.actor_names != other.actor_names {
            return Err(Error::VocabularyMismatch(format!(
                "actor names {:?} vs {:?}",
                self.actor_names, other.actor_names
            )));
        }
        if self.relation_names != other.relation_names {
            return Err(Error::VocabularyMismatch(format!(
                "relation names {:?} vs {:?}",
                self.relation_names, other.relation_names
            )));
        }
        Ok(())
    }
}

const ATTRIBUTE_DIM: usize = 3;
const ATTRIBUTE_SCALE_FT: f64 = 25.0;

/// Edges of one relation, with `1/|N_r(i)|` per destination node.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationEdges {
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    pub inv_in_degree: Arc<[f64]>,
}

/// Numeric form of a scene-graph: node features plus typed edge lists.
/// Messages flow from `src` to `dst`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub features: Tensor,
    /// Indexed by relation id; `None` when the relation has no edges.
    pub relations: Vec<Option<RelationEdges>>,
    pub node_labels: Vec<String>,
}

impl GraphInput {
    /// Builds typed edge lists from `(src, dst, relation_id)` triples.
    pub fn from_edges(
        features: Tensor,
        num_relations: usize,
        edges: &[(usize, usize, usize)],
    ) -> Result<Self> {
        let n = features.rows();
        let mut per: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); num_relations];
        for &(s, d, r) in edges {
            if r >= num_relations {
                return Err(Error::RelationIndex {
                    id: r,
                    count: num_relations,
                });
            }
            if s >= n || d >= n {
                return Err(Error::shape("edges", &[n], &[s.max(d)]));
            }
            per[r].0.push(s);
            per[r].1.push(d);
        }
        let relations = per
            .into_iter()
            .map(|(src, dst)| {
                if src.is_empty() {
                    return None;
                }
                let mut deg = vec![0.0f64; n];
                for &d in &dst {
                    deg[d] += 1.0;
                }
                let inv: Vec<f64> = deg.iter().map(|&k| if k > 0.0 { 1.0 / k } else { 0.0 }).collect();
                Some(RelationEdges {
                    src: src.into(),
                    dst: dst.into(),
                    inv_in_degree: inv.into(),
                })
            })
            .collect();
        Ok(GraphInput {
            node_labels: (0..n).map(|i| i.to_string()).collect(),
            features,
            relations,
        })
    }

    /// One-hot actor-type features (optionally with scaled positions) and
    /// relation-typed edges of a scene-graph.
    pub fn from_scene_graph(g: &SceneGraph, vocab: &Vocab, with_attributes: bool) -> Result<Self> {
        let f = vocab.feature_dim(with_attributes);
        let types = vocab.actor_names.len();
        let mut data = vec![0.0; g.nodes.len() * f];
        for (i, node) in g.nodes.iter().enumerate() {
            let t = vocab
                .actor_names
                .iter()
                .position(|a| a == node.actor_type.as_str())
                .ok_or_else(|| {
                    Error::VocabularyMismatch(format!("unknown actor type `{}`", node.actor_type))
                })?;
            data[i * f + t] = 1.0;
            if with_attributes {
                if let Some(p) = node.attributes.position {
                    let row = &mut data[i * f + types..(i + 1) * f];
                    row[0] = p[0] / ATTRIBUTE_SCALE_FT;
                    row[1] = p[1] / ATTRIBUTE_SCALE_FT;
                    row[2] = p[0].hypot(p[1]) / ATTRIBUTE_SCALE_FT;
                }
            }
        }
        let mut edges = Vec::with_capacity(g.edges.len());
        for e in &g.edges {
            let r = vocab
                .relation_names
                .iter()
                .position(|n| *n == e.relation)
                .ok_or_else(|| {
                    Error::VocabularyMismatch(format!("unknown relation `{}`", e.relation))
                })?;
            edges.push((e.src, e.dst, r));
        }
        let features = Tensor::matrix(g.nodes.len(), f, data)?;
        let mut input = GraphInput::from_edges(features, vocab.num_relations(), &edges)?;
        input.node_labels = g.nodes.iter().map(|n| n.label.clone()).collect();
        Ok(input)
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    /// Edge triples restricted to `kept` nodes, reindexed to positions in `kept`.
    pub fn filtered_edges(&self, kept: &[usize]) -> Vec<(usize, usize, usize)> {
        let mut pos = vec![usize::MAX; self.num_nodes()];
        for (k, &i) in kept.iter().enumerate() {
            pos[i] = k;
        }
        let mut out = Vec::new();
        for (r, rel) in self.relations.iter().enumerate() {
            let Some(rel) = rel else { continue };
            for (&s, &d) in rel.src.iter().zip(rel.dst.iter()) {
                if pos[s] != usize::MAX && pos[d] != usize::MAX {
                    out.push((pos[s], pos[d], r));
                }
            }
        }
        out
    }
}
