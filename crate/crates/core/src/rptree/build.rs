use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::distance::dot;
use crate::error::{Error, Result};
use crate::io::LikelihoodProfile;
use crate::points::Points;
use crate::seed::{self, Rng};
use crate::types::Catalog;

use super::split::{balanced_threshold, min_max, projection_variance, split_score, unbalance_factor};
use super::{Node, NodeId, QlbTree, ScoreScaling, TreeConfig};

/// Node sizes (entities x candidates x dim) above which candidates are scored in parallel.
const PARALLEL_WORK: usize = 1 << 18;

impl QlbTree {
    /// Builds a tree over `catalog`.
    ///
    /// `profile` is required when the configuration boosts on likelihoods and is never
    /// read otherwise.
    pub fn build(
        catalog: &Catalog,
        profile: Option<&LikelihoodProfile>,
        cfg: &TreeConfig,
    ) -> Result<Self> {
        if catalog.is_empty() {
            return Err(Error::InvalidInput("cannot build a tree over an empty catalog".into()));
        }
        let weights = if cfg.uses_likelihoods() {
            let profile = profile.ok_or_else(|| {
                Error::InvalidInput("a likelihood-boosted tree needs a likelihood profile".into())
            })?;
            if profile.len() != catalog.len() {
                return Err(Error::InvalidInput(format!(
                    "profile has {} entries, catalog has {}",
                    profile.len(),
                    catalog.len()
                )));
            }
            Some(profile.probabilities())
        } else {
            None
        };
        QlbTree::build_points(Points::from_catalog(catalog)?, weights, cfg)
    }

    /// Builds over raw storage; `weights` aligned with `points` rows.
    pub(crate) fn build_points(
        points: Points,
        weights: Option<&[f64]>,
        cfg: &TreeConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if points.is_empty() {
            return Err(Error::InvalidInput("cannot build a tree over an empty catalog".into()));
        }
        let weights = if cfg.uses_likelihoods() { weights } else { None };
        let n = points.len();
        let mut builder = Builder {
            points: &points,
            weights,
            cfg,
            rng: seed::rng(cfg.seed),
            nodes: Vec::new(),
            projections: Vec::new(),
            order: Vec::with_capacity(n),
            depths: vec![0; n],
            warnings: Vec::new(),
        };
        builder.node((0..n).collect(), 0);

        let Builder {
            nodes,
            projections,
            order,
            depths,
            warnings,
            ..
        } = builder;
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(QlbTree {
            config: cfg.clone(),
            nodes,
            projections,
            catalog_ids: points.ids().to_vec(),
            points: points.select(&order),
            depths,
            warnings,
        })
    }
}

struct Builder<'a> {
    points: &'a Points,
    weights: Option<&'a [f64]>,
    cfg: &'a TreeConfig,
    rng: Rng,
    nodes: Vec<Node>,
    projections: Vec<f32>,
    order: Vec<usize>,
    depths: Vec<u32>,
    warnings: Vec<String>,
}

struct Candidate {
    alphas: Vec<f64>,
    tau: f64,
    variance: f64,
    unbalance: f64,
}

impl Builder<'_> {
    fn node(&mut self, members: Vec<usize>, depth: usize) -> NodeId {
        if members.len() <= self.cfg.max_leaf_size {
            return self.leaf(members, depth);
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(Node::Leaf {
            start: 0,
            end: 0,
            depth: 0,
        });
        let Some((direction, split)) = self.choose_split(&members, depth) else {
            self.nodes.pop();
            self.warnings.push(format!(
                "stored an oversized leaf of {} identical entities at depth {depth}",
                members.len()
            ));
            return self.leaf(members, depth);
        };

        let row = (self.projections.len() / self.points.dim()) as u32;
        self.projections.extend_from_slice(&direction);
        let mut left = Vec::with_capacity(members.len());
        let mut right = Vec::with_capacity(members.len());
        for (&m, &a) in members.iter().zip(&split.alphas) {
            if a <= split.tau {
                left.push(m);
            } else {
                right.push(m);
            }
        }
        let left = self.node(left, depth + 1);
        let right = self.node(right, depth + 1);
        self.nodes[id as usize] = Node::Split {
            projection: row,
            threshold: split.tau,
            left,
            right,
        };
        id
    }

    fn leaf(&mut self, members: Vec<usize>, depth: usize) -> NodeId {
        let start = self.order.len() as u32;
        for &m in &members {
            self.depths[m] = depth as u32;
        }
        self.order.extend(members);
        self.nodes.push(Node::Leaf {
            start,
            end: self.order.len() as u32,
            depth: depth as u32,
        });
        (self.nodes.len() - 1) as NodeId
    }

    fn random_unit(&mut self) -> Vec<f32> {
        let d = self.points.dim();
        loop {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut self.rng)).collect();
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return g.iter().map(|x| (x / norm) as f32).collect();
            }
        }
    }

    fn project(&self, direction: &[f32], members: &[usize]) -> Vec<f64> {
        members
            .iter()
            .map(|&j| dot(direction, self.points.row(j)))
            .collect()
    }

    fn evaluate(&self, direction: &[f32], members: &[usize], weights: &[f64]) -> Option<Candidate> {
        let alphas = self.project(direction, members);
        let t = balanced_threshold(&alphas, weights).ok()?;
        let variance = projection_variance(&alphas).ok()?;
        Some(Candidate {
            alphas,
            tau: t.tau,
            variance,
            unbalance: unbalance_factor(t.n_left, t.n_right),
        })
    }

    /// Picks the best of `K` random projections for this node.
    fn choose_split(&mut self, members: &[usize], depth: usize) -> Option<(Vec<f32>, Candidate)> {
        let boosting = depth <= self.cfg.boost_depth && self.weights.is_some();
        let weights: Vec<f64> = match self.weights {
            Some(w) if boosting => {
                let local: Vec<f64> = members.iter().map(|&j| w[j]).collect();
                let mass: f64 = local.iter().sum();
                if mass > 0.0 {
                    local.iter().map(|p| p / mass).collect()
                } else {
                    vec![1.0; members.len()]
                }
            }
            _ => vec![1.0; members.len()],
        };

        let directions: Vec<Vec<f32>> =
            (0..self.cfg.num_candidates).map(|_| self.random_unit()).collect();
        let work = members.len() * directions.len() * self.points.dim();
        let evaluated: Vec<Option<Candidate>> = if work >= PARALLEL_WORK {
            directions
                .par_iter()
                .map(|d| self.evaluate(d, members, &weights))
                .collect()
        } else {
            directions
                .iter()
                .map(|d| self.evaluate(d, members, &weights))
                .collect()
        };
        let mut valid: Vec<(Vec<f32>, Candidate)> = directions
            .into_iter()
            .zip(evaluated)
            .filter_map(|(d, c)| c.map(|c| (d, c)))
            .collect();

        if valid.is_empty() {
            return self.fallback_split(members);
        }

        let scores: Vec<f64> = if boosting {
            let var: Vec<f64> = valid.iter().map(|(_, c)| c.variance).collect();
            let unb: Vec<f64> = valid.iter().map(|(_, c)| c.unbalance).collect();
            let (var, unb) = match self.cfg.scaling {
                ScoreScaling::Normalized => (min_max(&var), min_max(&unb)),
                ScoreScaling::Raw => (var, unb),
            };
            var.iter()
                .zip(&unb)
                .map(|(&v, &b)| split_score(v, b, depth, self.cfg))
                .collect()
        } else {
            valid.iter().map(|(_, c)| c.variance).collect()
        };

        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        Some(valid.swap_remove(best))
    }

    /// Every random candidate was degenerate: split along the difference of two distinct
    /// members at their median. `None` when all members are identical.
    fn fallback_split(&self, members: &[usize]) -> Option<(Vec<f32>, Candidate)> {
        let first = self.points.row(members[0]);
        let other = members[1..].iter().find(|&&j| self.points.row(j) != first)?;
        let diff: Vec<f64> = first
            .iter()
            .zip(self.points.row(*other))
            .map(|(a, b)| *a as f64 - *b as f64)
            .collect();
        let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
        let direction: Vec<f32> = diff.iter().map(|x| (x / norm) as f32).collect();
        let c = self.evaluate(&direction, members, &vec![1.0; members.len()])?;
        Some((direction, c))
    }
}
