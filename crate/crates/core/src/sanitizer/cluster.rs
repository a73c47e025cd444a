//! Greedy agglomeration of parameters by clipping-bound ratio.

use super::plan::{ClippingPlan, ParameterGroup, Strategy};
use crate::error::{Error, Result};

/// Result of [`cluster_weights`].
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Plan whose bounds follow the merge rule `sqrt(c^2 + c'^2)`.
    pub plan: ClippingPlan,
    /// Arithmetic mean of the original member bounds, per group.
    pub mean_bounds: Vec<f64>,
}

impl Clustering {
    /// The plan re-bounded with per-group mean member bounds.
    pub fn mean_bound_plan(&self) -> Result<ClippingPlan> {
        self.plan.with_bounds(&self.mean_bounds)
    }
}

#[derive(Debug, Clone)]
struct Cluster {
    members: Vec<usize>,
    bound: f64,
    bound_sum: f64,
}

impl Cluster {
    fn min_id(&self) -> usize {
        self.members[0]
    }
}

#[inline]
fn ratio(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

/// Merges parameters into `k` groups. Each round joins the pair of groups
/// whose bounds have the smallest ratio `max(c/c', c'/c)`; ties go to the
/// pair with the lexicographically smallest `(min id, min id)`. The merged
/// bound is `sqrt(c^2 + c'^2)`.
///
/// Groups are kept sorted by bound: the ratio against a fixed partner grows
/// monotonically with distance in that order, so the best pair is always
/// found by walking forward from each group while the ratio stays minimal.
pub fn cluster_weights(bounds: &[f64], k: usize) -> Result<Clustering> {
    let n = bounds.len();
    if k == 0 || k > n {
        return Err(Error::Contract(format!(
            "cannot form {k} groups from {n} parameters"
        )));
    }
    if let Some(i) = bounds.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::Contract(format!("bound {i} is {}", bounds[i])));
    }
    let mut sorted: Vec<Cluster> = bounds
        .iter()
        .enumerate()
        .map(|(i, &b)| Cluster {
            members: vec![i],
            bound: b,
            bound_sum: b,
        })
        .collect();
    sorted.sort_by(|a, b| {
        a.bound
            .total_cmp(&b.bound)
            .then(a.min_id().cmp(&b.min_id()))
    });

    while sorted.len() > k {
        let best = sorted
            .windows(2)
            .map(|w| ratio(w[0].bound, w[1].bound))
            .fold(f64::INFINITY, f64::min);
        let mut pick: Option<(usize, usize, (usize, usize))> = None;
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                if ratio(sorted[i].bound, sorted[j].bound) != best {
                    break;
                }
                let (a, b) = (sorted[i].min_id(), sorted[j].min_id());
                let key = (a.min(b), a.max(b));
                if pick.is_none_or(|p| key < p.2) {
                    pick = Some((i, j, key));
                }
            }
        }
        let (i, j, _) = pick.expect("at least one adjacent pair attains the minimum");
        let right = sorted.remove(j);
        let left = sorted.remove(i);
        let mut members = left.members;
        members.extend(right.members);
        members.sort_unstable();
        let merged = Cluster {
            members,
            bound: left.bound.hypot(right.bound),
            bound_sum: left.bound_sum + right.bound_sum,
        };
        let pos = sorted.partition_point(|c| {
            c.bound
                .total_cmp(&merged.bound)
                .then(c.min_id().cmp(&merged.min_id()))
                .is_lt()
        });
        sorted.insert(pos, merged);
    }

    sorted.sort_by_key(Cluster::min_id);
    let mean_bounds = sorted
        .iter()
        .map(|c| c.bound_sum / c.members.len() as f64)
        .collect();
    let strategy = if k == n {
        Strategy::PerParameter
    } else {
        Strategy::Clustered(k)
    };
    let groups = sorted
        .into_iter()
        .map(|c| ParameterGroup {
            member_ids: c.members,
            bound: c.bound,
        })
        .collect();
    Ok(Clustering {
        plan: ClippingPlan::new(groups, strategy, n)?,
        mean_bounds,
    })
}
