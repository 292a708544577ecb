//! Exact directed TSP on a handful of nodes by exhaustive enumeration.

use itertools::Itertools;
use thiserror::Error;

use crate::instance::{TravelMatrix, DEPOT};

/// Largest node set (depot included) accepted by [`tsp_exact`].
pub const TSP_EXACT_CAP: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TspError {
    #[error("exact TSP limited to {cap} nodes, got {got}")]
    TooLarge { got: usize, cap: usize },
    #[error("node set must contain the depot")]
    MissingDepot,
    #[error("node {0} is not in the travel matrix")]
    UnknownNode(usize),
}

/// Minimum-cost directed cycle through `nodes`, starting at the depot.
///
/// Returns the tour (depot first, not repeated at the end) and its cost.
/// Among equal-cost tours the lexicographically smallest one wins.
pub fn tsp_exact(nodes: &[usize], travel: &TravelMatrix) -> Result<(Vec<usize>, f64), TspError> {
    let mut others: Vec<usize> = nodes.iter().copied().filter(|&v| v != DEPOT).collect();
    others.sort_unstable();
    others.dedup();
    if others.len() == nodes.len() {
        return Err(TspError::MissingDepot);
    }
    if others.len() + 1 > TSP_EXACT_CAP {
        return Err(TspError::TooLarge { got: others.len() + 1, cap: TSP_EXACT_CAP });
    }
    if let Some(&bad) = others.iter().find(|&&v| v >= travel.size()) {
        return Err(TspError::UnknownNode(bad));
    }
    if others.is_empty() {
        return Ok((vec![DEPOT], 0.0));
    }

    let k = others.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    // permutations of a sorted list come out in lexicographic order, so a
    // strict comparison keeps the smallest tour among ties
    for perm in others.iter().copied().permutations(k) {
        let mut cost = travel.get(DEPOT, perm[0]);
        for w in perm.windows(2) {
            cost += travel.get(w[0], w[1]);
        }
        cost += travel.get(perm[k - 1], DEPOT);
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((perm, cost));
        }
    }
    let (perm, cost) = best.expect("at least one permutation");
    let mut tour = Vec::with_capacity(k + 1);
    tour.push(DEPOT);
    tour.extend(perm);
    Ok((tour, cost))
}
