//! Multi-shot randomized nearest-neighbour baseline.
//!
//! Each shot starts from a uniformly random composite node and repeatedly
//! moves to the cheapest stored successor whose seam is still unvisited.
//! Ties go to the lexicographically smaller node. When no stored edge leads
//! to an unvisited seam, the walk jumps at padding cost to the smallest node
//! of the lowest unvisited seam, so every shot yields a complete tour.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::rko::{CostMode, Tour};
use crate::trace::{Improvement, ImprovementLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyParams {
    pub shots: usize,
    pub seed: u64,
}

impl Default for GreedyParams {
    fn default() -> Self {
        Self { shots: 10_000, seed: 0 }
    }
}

impl GreedyParams {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(domain("shots must be >= 1"));
        }
        Ok(())
    }
}

/// One greedy construction, home-anchored.
pub fn greedy_tour(instance: &Instance, rng: &mut impl Rng) -> Tour {
    let n = instance.n_seams();
    let n_ids = instance.num_node_ids();
    let mut visited = vec![false; n + 1];
    let mut current = rng.random_range(1..n_ids);
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let node = instance.node_at(current);
        visited[node.seam as usize] = true;
        nodes.push(node);
        if nodes.len() == n {
            break;
        }
        let mut next: Option<(usize, f64)> = None;
        for &(to, w) in instance.successors(current) {
            let to = to as usize;
            if to == 0 || visited[instance.node_at(to).seam as usize] {
                continue;
            }
            if next.is_none_or(|(_, best)| w < best) {
                next = Some((to, w));
            }
        }
        current = match next {
            Some((to, _)) => to,
            None => {
                let seam = (1..=n).find(|&s| !visited[s]).expect("an unvisited seam remains");
                let first = instance.nodes_of_seam(seam as u32).next().expect("seam has nodes");
                instance.node_id(&first).expect("node belongs to the instance")
            }
        };
    }
    Tour::from_nodes(nodes, instance, CostMode::HomeAnchored)
}

fn shot_rng(seed: u64, shot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot as u64);
    rng
}

/// The tour built by shot `shot` of a multi-shot run seeded with `seed`.
pub fn shot_tour(instance: &Instance, seed: u64, shot: usize) -> Tour {
    greedy_tour(instance, &mut shot_rng(seed, shot))
}

/// Result of [`multi_shot_greedy`].
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub best: Tour,
    /// Shot that produced `best`; the lowest index wins ties.
    pub best_shot: usize,
    /// Cost of every shot, indexed by shot.
    pub costs: Vec<f64>,
}

impl GreedyOutcome {
    pub fn summary(&self) -> GreedySummary {
        let mut sorted = self.costs.clone();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len();
        let median = if m % 2 == 1 { sorted[m / 2] } else { 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]) };
        GreedySummary { best: self.best.total_cost, median, shots: m }
    }

    /// Writes `shot,cost` rows.
    pub fn write_histogram(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["shot", "cost"])?;
        for (shot, cost) in self.costs.iter().enumerate() {
            out.serialize((shot, cost))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySummary {
    pub best: f64,
    pub median: f64,
    pub shots: usize,
}

/// Runs `shots` independent constructions in parallel.
///
/// Shot `i` draws from its own stream of a generator seeded with `seed`, so the
/// result does not depend on scheduling.
pub fn multi_shot_greedy(instance: &Instance, params: &GreedyParams) -> Result<GreedyOutcome> {
    params.validate()?;
    let tours: Vec<Tour> = (0..params.shots)
        .into_par_iter()
        .map(|shot| shot_tour(instance, params.seed, shot))
        .collect();
    let costs: Vec<f64> = tours.iter().map(|t| t.total_cost).collect();
    let best_shot = (0..costs.len()).fold(0, |b, i| if costs[i] < costs[b] { i } else { b });
    let best = tours.into_iter().nth(best_shot).expect("at least one shot");
    Ok(GreedyOutcome { best, best_shot, costs })
}

/// Sequential variant that timestamps every new incumbent.
///
/// Shot streams match [`multi_shot_greedy`], so the final tour is the same.
pub fn multi_shot_traced(instance: &Instance, params: &GreedyParams) -> Result<(Tour, Vec<Improvement>)> {
    params.validate()?;
    let mut log = ImprovementLog::start();
    let mut best: Option<Tour> = None;
    for shot in 0..params.shots {
        let tour = shot_tour(instance, params.seed, shot);
        log.offer(tour.total_cost);
        if best.as_ref().is_none_or(|b| tour.total_cost < b.total_cost) {
            best = Some(tour);
        }
    }
    Ok((best.expect("at least one shot"), log.into_entries()))
}
