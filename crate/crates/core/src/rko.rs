//! Random-key representation and the routing decoder.
//!
//! A [`Chromosome`] is a vector of `5 * n_seams` keys in `(0, 1]`, split into
//! five equal blocks. Sorting the first block gives the order in which seams
//! are visited. Each remaining block holds one categorical feature per seam
//! (direction, tool, config, position), read off by binning the key into
//! `C` half-open intervals `((k-1)/C, k/C]`. Keys at block offset `i` always
//! belong to seam `i`, regardless of where that seam lands in the tour.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::instance::{Instance, Node};

/// Number of key blocks per seam: the seam sort key plus four features.
pub const KEY_BLOCKS: usize = 5;

/// Smallest key allowed; keys live in `(0, 1]`.
pub const MIN_KEY: f64 = f64::MIN_POSITIVE;

/// A vector of random keys in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome(Vec<f64>);

impl Chromosome {
    pub fn new(keys: Vec<f64>) -> Result<Self> {
        if let Some((i, k)) = keys.iter().enumerate().find(|(_, &k)| !(k > 0.0 && k <= 1.0)) {
            return Err(domain(format!("key {i} = {k} outside (0, 1]")));
        }
        Ok(Self(keys))
    }

    /// Uniform random keys in `(0, 1]`.
    pub fn random(len: usize, rng: &mut (impl Rng + ?Sized)) -> Self {
        Self((0..len).map(|_| random_key(rng)).collect())
    }

    pub fn keys(&self) -> &[f64] {
        &self.0
    }

    pub fn into_keys(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads a chromosome from a JSON array or one key per line.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('[') {
            let keys: Vec<f64> = serde_json::from_str(trimmed)?;
            return Self::new(keys);
        }
        let mut keys = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            keys.push(line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid key {line:?}"),
            })?);
        }
        Self::new(keys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::parse(&text)
    }
}

/// Uniform draw from `(0, 1]`.
pub fn random_key(rng: &mut (impl Rng + ?Sized)) -> f64 {
    1.0 - rng.random::<f64>()
}

/// How the start and end of a node sequence are closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Leave home, visit every node, return home.
    #[default]
    HomeAnchored,
    /// Close the sequence on itself; home is not visited.
    Cyclic,
}

/// A decoded solution: one node per seam plus its cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    pub nodes: Vec<Node>,
    pub total_cost: f64,
    /// `true` iff no padded transition is used.
    pub feasible: bool,
}

impl Tour {
    pub fn from_nodes(nodes: Vec<Node>, instance: &Instance, mode: CostMode) -> Self {
        let (total_cost, feasible) = tour_cost(&nodes, instance, mode);
        Self { nodes, total_cost, feasible }
    }

    /// Visit order as 0-based seam positions in the chromosome.
    pub fn seam_order(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.seam as usize - 1).collect()
    }

    /// Checks that every seam of `instance` appears exactly once.
    pub fn is_complete(&self, instance: &Instance) -> bool {
        let n = instance.n_seams();
        if self.nodes.len() != n {
            return false;
        }
        let mut seen = vec![false; n];
        for node in &self.nodes {
            let s = node.seam as usize;
            if s == 0 || s > n || seen[s - 1] || !instance.contains(node) {
                return false;
            }
            seen[s - 1] = true;
        }
        true
    }
}

/// A fitness evaluation record.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessRecord {
    pub chromosome: Chromosome,
    pub tour: Tour,
    pub cost: f64,
    pub evaluation_index: u64,
}

impl FitnessRecord {
    pub fn new(chromosome: Chromosome, tour: Tour, evaluation_index: u64) -> Self {
        let cost = tour.total_cost;
        Self { chromosome, tour, cost, evaluation_index }
    }
}

/// Indices that sort `keys` ascending; ties keep the lower index first.
pub fn decode_permutation(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx
}

/// Bin of `key` among `cardinality` half-open intervals `((k-1)/C, k/C]`, 0-based.
pub fn decode_categorical(key: f64, cardinality: u32) -> u32 {
    debug_assert!(cardinality >= 1);
    let c = cardinality as f64;
    let mut k = (key * c).ceil().clamp(1.0, c) as u32;
    // correct for rounding in key * c
    while k > 1 && key <= (k - 1) as f64 / c {
        k -= 1;
    }
    while k < cardinality && key > k as f64 / c {
        k += 1;
    }
    k - 1
}

/// Cost of visiting `nodes` in order, with a flag telling whether every edge was feasible.
pub fn tour_cost(nodes: &[Node], instance: &Instance, mode: CostMode) -> (f64, bool) {
    let ids: Vec<usize> = nodes
        .iter()
        .map(|n| instance.node_id(n).expect("tour node outside instance"))
        .collect();
    tour_cost_ids(&ids, instance, mode)
}

pub(crate) fn tour_cost_ids(ids: &[usize], instance: &Instance, mode: CostMode) -> (f64, bool) {
    let pad = instance.padding_cost();
    let mut total = 0.0;
    let mut feasible = true;
    let mut add = |a: usize, b: usize| {
        let w = instance.cost_by_id(a, b);
        // stored costs are always below the padding cost
        if w >= pad {
            feasible = false;
        }
        total += w;
    };
    let (Some(&first), Some(&last)) = (ids.first(), ids.last()) else {
        return (0.0, true);
    };
    if mode == CostMode::HomeAnchored {
        add(0, first);
    }
    for w in ids.windows(2) {
        add(w[0], w[1]);
    }
    match mode {
        CostMode::HomeAnchored => add(last, 0),
        CostMode::Cyclic => add(last, first),
    }
    (total, feasible)
}

/// Decodes a chromosome into a home-anchored tour.
pub fn decode(chromosome: &Chromosome, instance: &Instance) -> Result<Tour> {
    decode_with_mode(chromosome, instance, CostMode::HomeAnchored)
}

pub fn decode_with_mode(chromosome: &Chromosome, instance: &Instance, mode: CostMode) -> Result<Tour> {
    let n = instance.n_seams();
    if chromosome.len() != KEY_BLOCKS * n {
        return Err(domain(format!(
            "chromosome length {} != {} x {n} seams",
            chromosome.len(),
            KEY_BLOCKS
        )));
    }
    let nodes = decode_nodes(chromosome.keys(), n, instance);
    Ok(Tour::from_nodes(nodes, instance, mode))
}

/// Node sequence for a key vector `[seam block | d | t | c | p]` of `5n` keys.
fn decode_nodes(keys: &[f64], n: usize, instance: &Instance) -> Vec<Node> {
    let order = decode_permutation(&keys[..n]);
    nodes_in_order(&order, &keys[n..], n, instance)
}

/// Assembles nodes for seams (0-based) listed in `order`; `features` holds the four feature blocks.
fn nodes_in_order(order: &[usize], features: &[f64], n: usize, instance: &Instance) -> Vec<Node> {
    let dims = instance.dims().as_array();
    order
        .iter()
        .map(|&seam| {
            let mut f = [0u32; 4];
            for k in 0..4 {
                f[k] = decode_categorical(features[k * n + seam], dims[k]);
            }
            Node::with_features(seam as u32 + 1, f)
        })
        .collect()
}

/// Fitness of a chromosome under the default home-anchored cost.
pub fn fitness(chromosome: &Chromosome, instance: &Instance) -> f64 {
    let n = instance.n_seams();
    let nodes = decode_nodes(chromosome.keys(), n, instance);
    let ids: Vec<usize> = nodes.iter().map(|n| instance.node_id(n).unwrap()).collect();
    tour_cost_ids(&ids, instance, CostMode::HomeAnchored).0
}

fn check_permutation(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return Err(domain(format!("{perm:?} is not a permutation of 0..{}", perm.len())));
        }
        seen[p] = true;
    }
    Ok(())
}

/// Keys that sort into `perm` (0-based visit order), placed at chunk centres.
///
/// The seam visited at position `k` gets the key `(k + 0.5) / n`.
pub fn warmstart_centers(perm: &[usize]) -> Result<Vec<f64>> {
    check_permutation(perm)?;
    let n = perm.len() as f64;
    let mut keys = vec![0.0; perm.len()];
    for (k, &seam) in perm.iter().enumerate() {
        keys[seam] = (k as f64 + 0.5) / n;
    }
    Ok(keys)
}

/// Randomized keys that sort into `perm`: each key is uniform inside its chunk.
pub fn warmstart_keys(perm: &[usize], rng: &mut (impl Rng + ?Sized)) -> Result<Vec<f64>> {
    check_permutation(perm)?;
    let n = perm.len() as f64;
    let mut keys = vec![0.0; perm.len()];
    for (k, &seam) in perm.iter().enumerate() {
        let lo = k as f64 / n;
        let hi = (k as f64 + 1.0) / n;
        keys[seam] = loop {
            let x = lo + rng.random::<f64>() * (hi - lo);
            if x > lo && x < hi {
                break x;
            }
        };
    }
    Ok(keys)
}

/// A key inside bin `value` of `cardinality` bins; centred when `rng` is `None`.
fn categorical_key(value: u32, cardinality: u32, rng: Option<&mut dyn rand::RngCore>) -> f64 {
    let c = cardinality as f64;
    let lo = value as f64 / c;
    let hi = (value as f64 + 1.0) / c;
    match rng {
        None => (lo + hi) / 2.0,
        Some(rng) => loop {
            let x = hi - rng.random::<f64>() * (hi - lo);
            if x > 0.0 && decode_categorical(x, cardinality) == value {
                break x;
            }
        },
    }
}

/// Encodes a visit order and per-seam features into a chromosome.
///
/// `perm[k]` is the 0-based seam visited at position `k`; `features[i]` are the
/// feature values of seam `i`. With `rng = None` every key sits at the centre
/// of its interval.
pub fn encode_warmstart(
    perm: &[usize],
    features: &[[u32; 4]],
    instance: &Instance,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<Chromosome> {
    let n = instance.n_seams();
    if perm.len() != n || features.len() != n {
        return Err(domain(format!(
            "expected {n} seams, got permutation of {} and {} feature rows",
            perm.len(),
            features.len()
        )));
    }
    let dims = instance.dims().as_array();
    for (i, f) in features.iter().enumerate() {
        if f.iter().zip(dims).any(|(&v, c)| v >= c) {
            return Err(domain(format!("features {f:?} of seam {i} exceed {dims:?}")));
        }
    }
    let mut keys = Vec::with_capacity(KEY_BLOCKS * n);
    match rng {
        None => {
            keys.extend(warmstart_centers(perm)?);
            for k in 0..4 {
                keys.extend(features.iter().map(|f| categorical_key(f[k], dims[k], None)));
            }
        }
        Some(rng) => {
            keys.extend(warmstart_keys(perm, rng)?);
            for k in 0..4 {
                for f in features {
                    keys.push(categorical_key(f[k], dims[k], Some(&mut *rng)));
                }
            }
        }
    }
    Chromosome::new(keys)
}

/// Encodes a complete tour so that [`decode`] reproduces it.
pub fn encode_tour(
    tour: &[Node],
    instance: &Instance,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<Chromosome> {
    let n = instance.n_seams();
    let probe = Tour { nodes: tour.to_vec(), total_cost: 0.0, feasible: true };
    if !probe.is_complete(instance) {
        return Err(domain("tour does not visit every seam of the instance exactly once"));
    }
    let perm: Vec<usize> = tour.iter().map(|n| n.seam as usize - 1).collect();
    let mut features = vec![[0u32; 4]; n];
    for node in tour {
        features[node.seam as usize - 1] = node.features();
    }
    encode_warmstart(&perm, &features, instance, rng)
}

/// Reads a pool of chromosomes stored as a JSON array of key arrays.
pub fn load_pool(path: impl AsRef<Path>) -> Result<Vec<Chromosome>> {
    let text = std::fs::read_to_string(path)?;
    let raw: Vec<Vec<f64>> = serde_json::from_str(&text)?;
    raw.into_iter().map(Chromosome::new).collect()
}

pub fn save_pool(path: impl AsRef<Path>, pool: &[Chromosome]) -> Result<()> {
    let text = serde_json::to_string_pretty(pool)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Result of a path-relinking scan.
#[derive(Debug, Clone)]
pub struct RelinkResult {
    pub alpha: f64,
    pub chromosome: Chromosome,
    pub tour: Tour,
    pub cost: f64,
    /// `(alpha, cost)` for every grid point, in grid order.
    pub scan: Vec<(f64, f64)>,
}

/// `size` evenly spaced points on `[0, 1]`, endpoints included.
pub fn uniform_grid(size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(domain("relink grid needs at least 2 points"));
    }
    let last = (size - 1) as f64;
    Ok((0..size).map(|i| if i + 1 == size { 1.0 } else { i as f64 / last }).collect())
}

/// The chromosome `(1 - alpha) * x1 + alpha * x2`, clamped into `(0, 1]`.
pub fn interpolate(x1: &Chromosome, x2: &Chromosome, alpha: f64) -> Chromosome {
    let keys = x1
        .keys()
        .iter()
        .zip(x2.keys())
        .map(|(&a, &b)| ((1.0 - alpha) * a + alpha * b).clamp(MIN_KEY, 1.0))
        .collect();
    Chromosome(keys)
}

/// Scans the segment between two chromosomes and returns the cheapest point.
///
/// Ties go to the earliest grid point.
pub fn path_relink(
    x1: &Chromosome,
    x2: &Chromosome,
    grid: &[f64],
    instance: &Instance,
) -> Result<RelinkResult> {
    if x1.len() != x2.len() {
        return Err(domain(format!("chromosome lengths differ: {} vs {}", x1.len(), x2.len())));
    }
    if grid.is_empty() || grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(domain("relink grid must be a nonempty subset of [0, 1]"));
    }
    let mut best: Option<RelinkResult> = None;
    let mut scan = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let x = interpolate(x1, x2, alpha);
        let tour = decode(&x, instance)?;
        let cost = tour.total_cost;
        scan.push((alpha, cost));
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(RelinkResult { alpha, chromosome: x, tour, cost, scan: Vec::new() });
        }
    }
    let mut best = best.expect("grid is nonempty");
    best.scan = scan;
    Ok(best)
}

/// Splits seam and robot keys into per-robot visit sequences.
///
/// `keys` holds `n` seam keys followed by `robots` robot keys. All keys are
/// sorted ascending, the sorted sequence is rotated so the largest robot key
/// comes last, and each robot key then closes the run of seams in front of
/// it. Entry `r` of the result lists the 0-based seams of robot `r`.
pub fn partition_robots(keys: &[f64], n: usize, robots: usize) -> Result<Vec<Vec<usize>>> {
    if robots == 0 {
        return Err(domain("at least one robot is required"));
    }
    if keys.len() != n + robots {
        return Err(domain(format!("expected {} keys, got {}", n + robots, keys.len())));
    }
    let sorted = decode_permutation(keys);
    let last_robot = sorted.iter().rposition(|&i| i >= n).expect("robots >= 1");
    let mut runs = vec![Vec::new(); robots];
    let mut run = Vec::new();
    for step in 1..=sorted.len() {
        let i = sorted[(last_robot + step) % sorted.len()];
        if i >= n {
            runs[i - n] = std::mem::take(&mut run);
        } else {
            run.push(i);
        }
    }
    Ok(runs)
}

/// Additional cost charged on a multi-robot plan, e.g. for collisions.
pub trait PlanPenalty {
    fn penalty(&self, tours: &[Tour], instance: &Instance) -> f64;
}

/// No penalty.
pub struct NoPenalty;

impl PlanPenalty for NoPenalty {
    fn penalty(&self, _: &[Tour], _: &Instance) -> f64 {
        0.0
    }
}

/// A multi-robot plan.
#[derive(Debug, Clone)]
pub struct MultiRobotPlan {
    /// One home-anchored tour per robot; a robot with no seams stays home at zero cost.
    pub tours: Vec<Tour>,
    pub penalty: f64,
    pub total_cost: f64,
}

/// Decodes `[seam keys (n) | robot keys (v) | d | t | c | p]` into one tour per robot.
pub fn decode_multi_robot(
    chromosome: &Chromosome,
    robots: usize,
    instance: &Instance,
    penalty: &dyn PlanPenalty,
) -> Result<MultiRobotPlan> {
    let n = instance.n_seams();
    let expected = n + robots + 4 * n;
    if chromosome.len() != expected {
        return Err(domain(format!(
            "multi-robot chromosome needs {expected} keys, got {}",
            chromosome.len()
        )));
    }
    let keys = chromosome.keys();
    let runs = partition_robots(&keys[..n + robots], n, robots)?;
    let features = &keys[n + robots..];
    let tours: Vec<Tour> = runs
        .iter()
        .map(|run| {
            let nodes = nodes_in_order(run, features, n, instance);
            Tour::from_nodes(nodes, instance, CostMode::HomeAnchored)
        })
        .collect();
    let extra = penalty.penalty(&tours, instance);
    let total_cost = tours.iter().map(|t| t.total_cost).sum::<f64>() + extra;
    Ok(MultiRobotPlan { tours, penalty: extra, total_cost })
}
