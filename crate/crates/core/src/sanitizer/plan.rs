use std::fmt;

use crate::error::{Error, Result};
use crate::nn::{Network, ParamKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Global,
    WeightBias,
    Clustered(usize),
    PerParameter,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Global => f.write_str("global"),
            Strategy::WeightBias => f.write_str("weight_bias"),
            Strategy::Clustered(k) => write!(f, "clustered({k})"),
            Strategy::PerParameter => f.write_str("per_parameter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGroup {
    /// Sorted flat parameter ids.
    pub member_ids: Vec<usize>,
    /// l2 clipping bound of the group's gradient slice.
    pub bound: f64,
}

/// Partition of the parameter ids into clipping groups.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippingPlan {
    groups: Vec<ParameterGroup>,
    strategy: Strategy,
    param_count: usize,
}

impl ClippingPlan {
    pub fn new(
        groups: Vec<ParameterGroup>,
        strategy: Strategy,
        param_count: usize,
    ) -> Result<Self> {
        let mut seen = vec![false; param_count];
        for (j, g) in groups.iter().enumerate() {
            if g.member_ids.is_empty() {
                return Err(Error::Contract(format!("group {j} is empty")));
            }
            if !(g.bound > 0.0 && g.bound.is_finite()) {
                return Err(Error::Contract(format!("group {j} has bound {}", g.bound)));
            }
            for &id in &g.member_ids {
                match seen.get_mut(id) {
                    Some(s) if !*s => *s = true,
                    Some(_) => {
                        return Err(Error::Contract(format!("parameter {id} in two groups")))
                    }
                    None => {
                        return Err(Error::Contract(format!(
                            "parameter {id} out of range {param_count}"
                        )))
                    }
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Contract(format!(
                "parameter {missing} not in any group"
            )));
        }
        if let Strategy::Clustered(k) = strategy {
            if groups.len() != k {
                return Err(Error::Contract(format!(
                    "clustered({k}) plan has {} groups",
                    groups.len()
                )));
            }
        }
        Ok(ClippingPlan {
            groups,
            strategy,
            param_count,
        })
    }

    pub fn global(param_count: usize, bound: f64) -> Result<Self> {
        Self::new(
            vec![ParameterGroup {
                member_ids: (0..param_count).collect(),
                bound,
            }],
            Strategy::Global,
            param_count,
        )
    }

    pub fn per_parameter(bounds: &[f64]) -> Result<Self> {
        let groups = bounds
            .iter()
            .enumerate()
            .map(|(i, &bound)| ParameterGroup {
                member_ids: vec![i],
                bound,
            })
            .collect();
        Self::new(groups, Strategy::PerParameter, bounds.len())
    }

    pub fn groups(&self) -> &[ParameterGroup] {
        &self.groups
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn bounds(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.bound).collect()
    }

    /// Same partition with new bounds.
    pub fn with_bounds(&self, bounds: &[f64]) -> Result<Self> {
        if bounds.len() != self.groups.len() {
            return Err(Error::Contract(format!(
                "{} bounds for {} groups",
                bounds.len(),
                self.groups.len()
            )));
        }
        let groups = self
            .groups
            .iter()
            .zip(bounds)
            .map(|(g, &bound)| ParameterGroup {
                member_ids: g.member_ids.clone(),
                bound,
            })
            .collect();
        Self::new(groups, self.strategy, self.param_count)
    }

    /// Same plan with the group list permuted (`order[j]` is the old index).
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let groups = order.iter().map(|&j| self.groups[j].clone()).collect();
        Self::new(groups, self.strategy, self.param_count)
    }

    /// Short fingerprint for metric logs: `k:min:max` of the bounds.
    pub fn digest(&self) -> String {
        let b = self.bounds();
        let min = b.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = b.iter().cloned().fold(0.0, f64::max);
        format!("{}:{min:.6e}:{max:.6e}", b.len())
    }

    /// Multi-line dump: strategy, then one line per group with size and bound.
    pub fn dump(&self) -> String {
        let mut s = format!("strategy {} groups {}\n", self.strategy, self.groups.len());
        for (j, g) in self.groups.iter().enumerate() {
            s.push_str(&format!(
                "group {j} size {} bound {:?}\n",
                g.member_ids.len(),
                g.bound
            ));
        }
        s
    }
}

/// Two groups: all weights with bound `c_w`, all biases with bound `c_b`.
/// A network without biases falls back to a single weight group.
pub fn weight_bias_plan(net: &Network, c_w: f64, c_b: f64) -> Result<ClippingPlan> {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for (i, tag) in net.param_index().iter().enumerate() {
        match tag.kind {
            ParamKind::Weight => weights.push(i),
            ParamKind::Bias => biases.push(i),
        }
    }
    let mut groups = vec![ParameterGroup {
        member_ids: weights,
        bound: c_w,
    }];
    if biases.is_empty() {
        log::info!("weight/bias plan: network has no biases, using a single group");
    } else {
        groups.push(ParameterGroup {
            member_ids: biases,
            bound: c_b,
        });
    }
    ClippingPlan::new(groups, Strategy::WeightBias, net.param_count())
}
