//! Exact reference solutions for tiny instances.
#![allow(dead_code)]

use rko_route::instance::{generate_synthetic, DimSizes, GeneratorParams};
use rko_route::{CostMode, Instance, Node};

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

fn cost(inst: &Instance, a: &Node, b: &Node) -> f64 {
    inst.cost(a, b).unwrap()
}

/// Cheapest feature choice along a fixed seam order, by layered shortest path.
fn best_for_order(inst: &Instance, order: &[usize], mode: CostMode) -> (f64, Vec<Node>) {
    let layers: Vec<Vec<Node>> = order.iter().map(|&s| inst.nodes_of_seam(s as u32 + 1).collect()).collect();
    let starts: Vec<Option<usize>> = match mode {
        CostMode::HomeAnchored => vec![None],
        CostMode::Cyclic => (0..layers[0].len()).map(Some).collect(),
    };
    let mut best = (f64::INFINITY, Vec::new());
    for start in starts {
        // dist[j], back-pointers per layer
        let mut dist: Vec<f64> = layers[0]
            .iter()
            .enumerate()
            .map(|(j, v)| match (mode, start) {
                (CostMode::HomeAnchored, _) => cost(inst, &Node::HOME, v),
                (CostMode::Cyclic, Some(s)) if s == j => 0.0,
                _ => f64::INFINITY,
            })
            .collect();
        let mut back: Vec<Vec<usize>> = Vec::new();
        for k in 1..layers.len() {
            let mut nd = vec![f64::INFINITY; layers[k].len()];
            let mut bp = vec![0; layers[k].len()];
            for (j, v) in layers[k].iter().enumerate() {
                for (i, u) in layers[k - 1].iter().enumerate() {
                    let c = dist[i] + cost(inst, u, v);
                    if c < nd[j] {
                        nd[j] = c;
                        bp[j] = i;
                    }
                }
            }
            dist = nd;
            back.push(bp);
        }
        let last = layers.len() - 1;
        for (j, v) in layers[last].iter().enumerate() {
            let close = match (mode, start) {
                (CostMode::HomeAnchored, _) => cost(inst, v, &Node::HOME),
                (CostMode::Cyclic, Some(s)) => cost(inst, v, &layers[0][s]),
                _ => unreachable!(),
            };
            let total = dist[j] + close;
            if total < best.0 {
                let mut idx = vec![0; layers.len()];
                idx[last] = j;
                for k in (1..layers.len()).rev() {
                    idx[k - 1] = back[k - 1][idx[k]];
                }
                let nodes = idx.iter().enumerate().map(|(k, &i)| layers[k][i]).collect();
                best = (total, nodes);
            }
        }
    }
    best
}

/// Exact optimum over every seam order and every feature assignment.
pub fn optimum(inst: &Instance, mode: CostMode) -> (f64, Vec<Node>) {
    let mut best = (f64::INFINITY, Vec::new());
    for order in permutations(inst.n_seams()) {
        let cand = best_for_order(inst, &order, mode);
        if cand.0 < best.0 {
            best = cand;
        }
    }
    best
}

/// Plain enumeration of every node sequence; only for cross-checking [`optimum`].
pub fn optimum_naive(inst: &Instance, mode: CostMode) -> f64 {
    let n = inst.n_seams();
    let per = inst.dims().nodes_per_seam();
    let mut best = f64::INFINITY;
    for order in permutations(n) {
        for code in 0..per.pow(n as u32) {
            let mut c = code;
            let nodes: Vec<Node> = order
                .iter()
                .map(|&s| {
                    let node = inst.nodes_of_seam(s as u32 + 1).nth(c % per).unwrap();
                    c /= per;
                    node
                })
                .collect();
            best = best.min(rko_route::rko::tour_cost(&nodes, inst, mode).0);
        }
    }
    best
}

pub fn synthetic(n_seams: usize, dims: DimSizes, rate: f64, seed: u64) -> Instance {
    generate_synthetic(&GeneratorParams { n_seams, dims, feasibility_rate: rate, cost_scale: 1.0, seed })
        .unwrap()
        .instance
}
