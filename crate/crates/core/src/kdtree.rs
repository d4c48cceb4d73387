//! Exact k-d tree for low-dimensional vectors, used as a top-level router.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::points::Points;
use crate::result::{ResultSet, SearchStats, TopK};
use crate::types::Catalog;

const MAGIC: &[u8; 4] = b"KDTR";
const LEAF_SIZE: usize = 8;

/// Dimensions above this are accepted but pruning degrades toward a full scan.
pub const KD_MAX_EFFECTIVE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
struct KdNode {
    lo: Vec<f32>,
    hi: Vec<f32>,
    /// `Some((left, right))` for internal nodes.
    children: Option<(u32, u32)>,
    start: u32,
    end: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    nodes: Vec<KdNode>,
    points: Points,
    warnings: Vec<String>,
}

impl KdTree {
    pub fn build(catalog: &Catalog) -> Result<Self> {
        Self::build_points(Points::from_catalog(catalog)?)
    }

    pub fn build_points(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot build a k-d tree over no vectors".into()));
        }
        let mut warnings = Vec::new();
        if points.dim() > KD_MAX_EFFECTIVE_DIM {
            let w = format!(
                "k-d tree over {} dimensions will prune poorly (effective up to {KD_MAX_EFFECTIVE_DIM})",
                points.dim()
            );
            log::warn!("{w}");
            warnings.push(w);
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::new();
        split(&points, &mut order, 0, &mut nodes);
        Ok(KdTree {
            nodes,
            points: points.select(&order),
            warnings,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Exact k nearest neighbors; subtrees whose bounding box cannot beat the current
    /// k-th distance are skipped.
    pub fn search(&self, query: &[f32], k: usize) -> Result<(ResultSet, SearchStats)> {
        Error::check_dim(self.dim(), query.len())?;
        if k == 0 {
            return Err(Error::InvalidInput("k must be >= 1".into()));
        }
        let start = Instant::now();
        let mut stats = SearchStats::default();
        let mut top = TopK::new(k);
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(Pending(box_distance(&self.nodes[0], query), 0)));
        while let Some(Reverse(Pending(bound, id))) = heap.pop() {
            if top.worst().is_some_and(|w| bound > w) {
                break;
            }
            stats.nodes_visited += 1;
            let node = &self.nodes[id as usize];
            match node.children {
                Some((l, r)) => {
                    for c in [l, r] {
                        heap.push(Reverse(Pending(box_distance(&self.nodes[c as usize], query), c)));
                    }
                }
                None => {
                    stats.leaves_probed += 1;
                    self.points
                        .scan_into(node.start as usize..node.end as usize, query, &mut top, &mut stats);
                }
            }
        }
        stats.wall_time = start.elapsed();
        Ok((top.into_result(), stats))
    }

    pub(crate) fn encode(&self, enc: &mut Encoder) {
        self.points.encode(enc);
        enc.put_u64(self.nodes.len() as u64);
        for n in &self.nodes {
            let (l, r) = n.children.unwrap_or((0, 0));
            enc.put_u8(n.children.is_some() as u8);
            enc.put_u32(l);
            enc.put_u32(r);
            enc.put_u32(n.start);
            enc.put_u32(n.end);
            for (&lo, &hi) in n.lo.iter().zip(&n.hi) {
                enc.put_f32(lo);
                enc.put_f32(hi);
            }
        }
    }

    pub(crate) fn decode(dec: &mut Decoder) -> Result<Self> {
        let points = Points::decode(dec)?;
        let dim = points.dim();
        let count = dec.u64()? as usize;
        if count == 0 || count > 2 * points.len() {
            return Err(dec.error("implausible k-d node count"));
        }
        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let internal = dec.u8()? != 0;
            let (l, r, start, end) = (dec.u32()?, dec.u32()?, dec.u32()?, dec.u32()?);
            let mut lo = Vec::with_capacity(dim);
            let mut hi = Vec::with_capacity(dim);
            for _ in 0..dim {
                lo.push(dec.f32()?);
                hi.push(dec.f32()?);
            }
            let bad_child = internal && (l as usize >= count || r as usize >= count);
            if bad_child || start > end || end as usize > points.len() {
                return Err(dec.error("k-d node references out of range"));
            }
            nodes.push(KdNode {
                lo,
                hi,
                children: internal.then_some((l, r)),
                start,
                end,
            });
        }
        Ok(KdTree {
            nodes,
            points,
            warnings: Vec::new(),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::new(MAGIC);
        self.encode(&mut enc);
        enc.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut dec = Decoder::new(bytes, MAGIC)?;
        let t = Self::decode(&mut dec)?;
        dec.finish()?;
        Ok(t)
    }
}

#[derive(PartialEq)]
struct Pending(f64, u32);

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn box_distance(node: &KdNode, q: &[f32]) -> f64 {
    q.iter()
        .zip(node.lo.iter().zip(&node.hi))
        .map(|(&x, (&lo, &hi))| {
            let d = if x < lo {
                lo as f64 - x as f64
            } else if x > hi {
                x as f64 - hi as f64
            } else {
                0.0
            };
            d * d
        })
        .sum()
}

/// Builds the subtree over `order[..]`, whose rows start at absolute offset `base`.
fn split(points: &Points, order: &mut [usize], base: usize, nodes: &mut Vec<KdNode>) -> u32 {
    let dim = points.dim();
    let mut lo = vec![f32::INFINITY; dim];
    let mut hi = vec![f32::NEG_INFINITY; dim];
    for &i in order.iter() {
        for (d, &x) in points.row(i).iter().enumerate() {
            lo[d] = lo[d].min(x);
            hi[d] = hi[d].max(x);
        }
    }
    let id = nodes.len() as u32;
    let (start, end) = (base as u32, (base + order.len()) as u32);
    let axis = (0..dim)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
        .unwrap();
    let flat = hi[axis] <= lo[axis];
    nodes.push(KdNode {
        lo,
        hi,
        children: None,
        start,
        end,
    });
    if order.len() <= LEAF_SIZE || flat {
        return id;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points.row(a)[axis].total_cmp(&points.row(b)[axis]).then(a.cmp(&b))
    });
    let (left, right) = order.split_at_mut(mid);
    let l = split(points, left, base, nodes);
    let r = split(points, right, base + mid, nodes);
    nodes[id as usize].children = Some((l, r));
    id
}
