//! Tree byte layout, after the shared `RPTR` header:
//!
//! ```text
//! config   u32 K | f64 lambda | u32 boost_depth | u32 max_leaf_size | u64 seed
//!          | u8 mode (0 balanced, 1 boosted) | u8 scaling (0 normalized, 1 raw)
//! u32 dim
//! [u32] catalog-order entity ids
//! nodes    depth-first pre-order records:
//!            u8 0 (split) | dim x f32 projection | f64 threshold
//!            u8 1 (leaf)  | u32 count | count x u32 ids | count*dim x f32 embeddings
//! ```

use std::collections::HashMap;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::points::Points;

use super::{Node, NodeId, QlbTree, ScoreScaling, TreeConfig, TreeMode};

const MAGIC: &[u8; 4] = b"RPTR";
const TAG_SPLIT: u8 = 0;
const TAG_LEAF: u8 = 1;

impl QlbTree {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC);
        let c = &self.config;
        enc.put_u32(c.num_candidates as u32);
        enc.put_f64(c.lambda);
        enc.put_u32(c.boost_depth as u32);
        enc.put_u32(c.max_leaf_size as u32);
        enc.put_u64(c.seed);
        enc.put_u8(match c.mode {
            TreeMode::Balanced => 0,
            TreeMode::Boosted => 1,
        });
        enc.put_u8(match c.scaling {
            ScoreScaling::Normalized => 0,
            ScoreScaling::Raw => 1,
        });
        enc.put_u32(self.dim() as u32);
        enc.put_u32_slice(&self.catalog_ids);
        self.encode_node(QlbTree::ROOT, &mut enc);
        enc.finish()
    }

    fn encode_node(&self, id: NodeId, enc: &mut Encoder) {
        match self.nodes[id as usize] {
            Node::Split {
                projection,
                threshold,
                left,
                right,
            } => {
                enc.put_u8(TAG_SPLIT);
                for &x in self.projection(projection) {
                    enc.put_f32(x);
                }
                enc.put_f64(threshold);
                self.encode_node(left, enc);
                self.encode_node(right, enc);
            }
            Node::Leaf { start, end, .. } => {
                enc.put_u8(TAG_LEAF);
                enc.put_u32(end - start);
                for i in start..end {
                    enc.put_u32(self.points.ids()[i as usize]);
                }
                for i in start..end {
                    for &x in self.points.row(i as usize) {
                        enc.put_f32(x);
                    }
                }
            }
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC)?;
        let num_candidates = dec.u32()? as usize;
        let lambda = dec.f64()?;
        let boost_depth = dec.u32()? as usize;
        let max_leaf_size = dec.u32()? as usize;
        let seed = dec.u64()?;
        let mode = match dec.u8()? {
            0 => TreeMode::Balanced,
            1 => TreeMode::Boosted,
            t => return Err(dec.error(format!("unknown tree mode {t}"))),
        };
        let scaling = match dec.u8()? {
            0 => ScoreScaling::Normalized,
            1 => ScoreScaling::Raw,
            t => return Err(dec.error(format!("unknown score scaling {t}"))),
        };
        let config = TreeConfig {
            num_candidates,
            lambda,
            boost_depth,
            max_leaf_size,
            seed,
            mode,
            scaling,
        };
        let dim = dec.u32()? as usize;
        if dim == 0 {
            return Err(dec.error("dim must be >= 1"));
        }
        let catalog_ids = dec.u32_vec()?;

        let mut state = DecodeState {
            dim,
            nodes: Vec::new(),
            projections: Vec::new(),
            ids: Vec::new(),
            data: Vec::new(),
            leaf_depth: HashMap::new(),
        };
        state.node(&mut dec, 0)?;
        dec.finish()?;

        let depths = catalog_ids
            .iter()
            .map(|id| {
                state
                    .leaf_depth
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Format(format!("entity {id} missing from leaves")))
            })
            .collect::<Result<Vec<_>>>()?;
        if state.ids.len() != catalog_ids.len() {
            return Err(Error::Format("leaf ids do not match the catalog ids".into()));
        }
        Ok(QlbTree {
            config,
            nodes: state.nodes,
            projections: state.projections,
            points: Points::new(dim, state.ids, state.data)?,
            catalog_ids,
            depths,
            warnings: Vec::new(),
        })
    }
}

struct DecodeState {
    dim: usize,
    nodes: Vec<Node>,
    projections: Vec<f32>,
    ids: Vec<u32>,
    data: Vec<f32>,
    leaf_depth: HashMap<u32, u32>,
}

impl DecodeState {
    fn node(&mut self, dec: &mut Decoder, depth: u32) -> Result<NodeId> {
        if depth > 10_000 {
            return Err(dec.error("tree nesting too deep"));
        }
        let id = self.nodes.len() as NodeId;
        match dec.u8()? {
            TAG_SPLIT => {
                let row = (self.projections.len() / self.dim) as u32;
                self.projections.extend(dec.f32_array(self.dim)?);
                let threshold = dec.f64()?;
                self.nodes.push(Node::Leaf {
                    start: 0,
                    end: 0,
                    depth: 0,
                });
                let left = self.node(dec, depth + 1)?;
                let right = self.node(dec, depth + 1)?;
                self.nodes[id as usize] = Node::Split {
                    projection: row,
                    threshold,
                    left,
                    right,
                };
            }
            TAG_LEAF => {
                let count = dec.u32()? as usize;
                let start = self.ids.len() as u32;
                for _ in 0..count {
                    let eid = dec.u32()?;
                    if self.leaf_depth.insert(eid, depth).is_some() {
                        return Err(dec.error(format!("entity {eid} appears in two leaves")));
                    }
                    self.ids.push(eid);
                }
                self.data.extend(dec.f32_array(count * self.dim)?);
                self.nodes.push(Node::Leaf {
                    start,
                    end: self.ids.len() as u32,
                    depth,
                });
            }
            t => return Err(dec.error(format!("unknown node tag {t}"))),
        }
        Ok(id)
    }
}
