use super::{config_err, EnvError};
use crate::engine::{AgentStore, EdgeList};
use crate::geometry::{Vec2, WorldSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Opinion {
    pub opinion: f64,
    pub new_opinion: f64,
}

/// Bounded-confidence opinion dynamics on a weighted graph.
///
/// Each step runs two interactions: a graph interaction pulling
/// `new_opinion` towards every neighbor whose opinion is within `threshold`,
/// then a self interaction publishing `new_opinion` as `opinion`.
#[derive(Debug, Clone)]
pub struct OpinionModel {
    store: AgentStore<Opinion>,
    edges: EdgeList,
    threshold: f64,
    strength: f64,
}

impl OpinionModel {
    pub fn new(opinions: Vec<f64>, edges: EdgeList, threshold: f64, strength: f64) -> Result<Self, EnvError> {
        let n = opinions.len();
        if let Some(i) = opinions.iter().position(|o| !(0.0..=1.0).contains(o)) {
            return config_err("opinions", format!("opinion of agent {i} is outside [0, 1]"));
        }
        if !(threshold.is_finite() && threshold >= 0.0) {
            return config_err("threshold", "must be non-negative");
        }
        if edges.agent_count() != n {
            return config_err(
                "edges",
                format!("edge list spans {} agents, expected {n}", edges.agent_count()),
            );
        }
        if let Some((s, d, w)) = edges.iter().find(|&(_, _, w)| !(0.0..=1.0).contains(&(strength * w))) {
            return config_err(
                "strength",
                format!(
                    "strength * weight = {} on edge ({s}, {d}) is outside [0, 1]",
                    strength * w
                ),
            );
        }
        let extra = opinions
            .iter()
            .map(|&o| Opinion {
                opinion: o,
                new_opinion: o,
            })
            .collect();
        let store = AgentStore::from_columns(
            WorldSpec::new(1.0, 1.0),
            vec![Vec2::ZERO; n],
            vec![0.0; n],
            vec![0.0; n],
            vec![0; n],
            extra,
        )?;
        Ok(Self {
            store,
            edges,
            threshold,
            strength,
        })
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.store.is_empty()
    }

    pub fn opinions(&self) -> Vec<f64> {
        self.store.extras().iter().map(|o| o.opinion).collect()
    }

    pub fn edges(&self) -> &EdgeList {
        &self.edges
    }

    /// `max - min` over current opinions.
    pub fn spread(&self) -> f64 {
        let (lo, hi) = self
            .store
            .extras()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
                (lo.min(o.opinion), hi.max(o.opinion))
            });
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }

    pub fn step(&mut self) -> Result<(), EnvError> {
        let (threshold, strength) = (self.threshold, self.strength);
        self.store.apply_graph(&self.edges, |me, you, weight, acc| {
            if (me.extra.opinion - you.extra.opinion).abs() < threshold {
                let w = strength * weight;
                acc.new_opinion = (1.0 - w) * acc.new_opinion + w * you.extra.opinion;
            }
            Ok(())
        })?;
        self.store.commit();
        self.store.apply_self(|me, w| {
            w.extra.opinion = me.extra.new_opinion;
            Ok(())
        })?;
        self.store.commit();
        Ok(())
    }
}
