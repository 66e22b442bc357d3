//! Routing instances over composite nodes.
//!
//! A [`Node`] names one way of processing one seam: which seam, in which
//! direction, with which tool, tool configuration and rail position. An
//! [`Instance`] stores the sparse table of feasible transition costs between
//! nodes. Any pair absent from the table is charged a padding cost large
//! enough that a single infeasible transition outweighs every feasible tour.
//!
//! Seams are re-indexed densely on load. Inside an instance, real seams carry
//! indices `1..=n_seams` and seam `0` is the home position, so the home node
//! is always `(0, 0, 0, 0, 0)`. The original labels are kept in
//! [`Instance::seam_ids`] and are used again when writing files.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};

/// Column names of the instance file, in order.
pub const HEADER: [&str; 11] = [
    "s_from", "d_from", "t_from", "c_from", "p_from", "s_to", "d_to", "t_to", "c_to", "p_to",
    "cost",
];

/// Multiplier applied to `n_seams * max_cost` to obtain the padding cost.
pub const PADDING_FACTOR: f64 = 10.0;

/// Dense cost matrices are used when the node-id space is at most this wide.
const DENSE_LIMIT: usize = 2048;

/// A composite node `(seam, direction, tool, config, position)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub seam: u32,
    pub direction: u32,
    pub tool: u32,
    pub config: u32,
    pub position: u32,
}

impl Node {
    pub const HOME: Node = Node::new(0, 0, 0, 0, 0);

    pub const fn new(seam: u32, direction: u32, tool: u32, config: u32, position: u32) -> Self {
        Self { seam, direction, tool, config, position }
    }

    pub fn with_features(seam: u32, features: [u32; 4]) -> Self {
        Self::new(seam, features[0], features[1], features[2], features[3])
    }

    /// The four categorical features `(direction, tool, config, position)`.
    pub fn features(&self) -> [u32; 4] {
        [self.direction, self.tool, self.config, self.position]
    }

    pub fn to_array(&self) -> [u32; 5] {
        [self.seam, self.direction, self.tool, self.config, self.position]
    }

    pub fn from_array(a: [u32; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_home(&self) -> bool {
        *self == Self::HOME
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}, {}, {}, {}]",
            self.seam, self.direction, self.tool, self.config, self.position
        )
    }
}

/// Cardinalities of the four categorical features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimSizes {
    pub directions: u32,
    pub tools: u32,
    pub configs: u32,
    pub positions: u32,
}

impl DimSizes {
    pub const fn new(directions: u32, tools: u32, configs: u32, positions: u32) -> Self {
        Self { directions, tools, configs, positions }
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.directions, self.tools, self.configs, self.positions]
    }

    pub fn from_array(a: [u32; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Number of distinct feature combinations, i.e. nodes per seam.
    pub fn nodes_per_seam(&self) -> usize {
        self.as_array().iter().map(|&c| c as usize).product()
    }

    fn validate(&self) -> Result<()> {
        if self.as_array().contains(&0) {
            return Err(validation(format!("feature cardinalities must be >= 1, got {self:?}")));
        }
        Ok(())
    }

    /// Mixed-radix offset of a feature combination, lexicographic in `(d, t, c, p)`.
    fn offset(&self, features: [u32; 4]) -> usize {
        let dims = self.as_array();
        let mut off = 0usize;
        for k in 0..4 {
            off = off * dims[k] as usize + features[k] as usize;
        }
        off
    }

    fn features_at(&self, mut offset: usize) -> [u32; 4] {
        let dims = self.as_array();
        let mut out = [0u32; 4];
        for k in (0..4).rev() {
            out[k] = (offset % dims[k] as usize) as u32;
            offset /= dims[k] as usize;
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Lookup {
    Dense(Vec<f64>),
    Rows,
}

/// An immutable routing instance.
#[derive(Debug, Clone)]
pub struct Instance {
    n_seams: usize,
    dims: DimSizes,
    seam_ids: Vec<u32>,
    /// Outgoing feasible edges per node id, sorted by target id.
    rows: Vec<Vec<(u32, f64)>>,
    lookup: Lookup,
    n_edges: usize,
    max_cost: f64,
    padding_cost: f64,
}

impl Instance {
    /// Builds an instance from edges given in dense seam indices (`1..=n_seams`, home = 0).
    ///
    /// `seam_ids[i]` is the external label of dense seam `i + 1`.
    pub fn from_edges(
        dims: DimSizes,
        seam_ids: Vec<u32>,
        edges: impl IntoIterator<Item = (Node, Node, f64)>,
    ) -> Result<Self> {
        dims.validate()?;
        let n_seams = seam_ids.len();
        if n_seams == 0 {
            return Err(validation("instance has no seams"));
        }
        let mut seen = BTreeSet::new();
        for &id in &seam_ids {
            if id == 0 {
                return Err(validation("seam label 0 is reserved for home"));
            }
            if !seen.insert(id) {
                return Err(validation(format!("duplicate seam label {id}")));
            }
        }

        let per_seam = dims.nodes_per_seam();
        let n_ids = 1 + n_seams * per_seam;
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_ids];
        let mut max_cost: f64 = 0.0;
        let mut n_edges = 0;
        let check = |n: &Node| -> Result<usize> {
            id_of(n, n_seams, &dims).ok_or_else(|| {
                validation(format!("node {n} outside instance bounds"))
            })
        };
        for (from, to, cost) in edges {
            let a = check(&from)?;
            let b = check(&to)?;
            if !cost.is_finite() || cost <= 0.0 {
                return Err(validation(format!(
                    "cost for {from} -> {to} must be finite and > 0, got {cost}"
                )));
            }
            rows[a].push((b as u32, cost));
            max_cost = max_cost.max(cost);
            n_edges += 1;
        }
        for (a, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(b, _)| b);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(validation(format!(
                    "duplicate pair {} -> {}",
                    node_of(a, &dims),
                    node_of(w[0].0 as usize, &dims)
                )));
            }
        }
        if n_edges == 0 {
            return Err(validation("no rows"));
        }
        let padding_cost = n_seams as f64 * max_cost * PADDING_FACTOR;

        let lookup = if n_ids <= DENSE_LIMIT {
            let mut dense = vec![padding_cost; n_ids * n_ids];
            for (a, row) in rows.iter().enumerate() {
                for &(b, w) in row {
                    dense[a * n_ids + b as usize] = w;
                }
            }
            Lookup::Dense(dense)
        } else {
            Lookup::Rows
        };

        Ok(Self { n_seams, dims, seam_ids, rows, lookup, n_edges, max_cost, padding_cost })
    }

    /// Reads an instance file (comma, whitespace or `|` separated, optional header).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read(file)
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let reader = BufReader::new(reader);
        let mut raw: Vec<([u32; 5], [u32; 5], f64)> = Vec::new();
        let mut seen_data = false;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = trimmed
                .split(|c: char| c == ',' || c == '|' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            if !seen_data && tokens.first().is_some_and(|t| t.parse::<i64>().is_err()) {
                // header row
                seen_data = true;
                continue;
            }
            seen_data = true;
            if tokens.len() != 11 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected 11 columns, found {}", tokens.len()),
                });
            }
            let mut coords = [0u32; 10];
            for (k, tok) in tokens[..10].iter().enumerate() {
                coords[k] = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("column {} ({}): invalid index {tok:?}", k + 1, HEADER[k]),
                })?;
            }
            let cost: f64 = tokens[10].parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("invalid cost {:?}", tokens[10]),
            })?;
            if !cost.is_finite() || cost <= 0.0 {
                return Err(validation(format!("line {line_no}: cost must be > 0, got {cost}")));
            }
            let from = [coords[0], coords[1], coords[2], coords[3], coords[4]];
            let to = [coords[5], coords[6], coords[7], coords[8], coords[9]];
            for n in [&from, &to] {
                if n[0] == 0 && n[1..].iter().any(|&v| v != 0) {
                    return Err(validation(format!(
                        "line {line_no}: seam 0 is home and must be (0,0,0,0,0)"
                    )));
                }
            }
            raw.push((from, to, cost));
        }
        if raw.is_empty() {
            return Err(validation("no rows"));
        }

        let mut maxes = [0u32; 4];
        let mut labels = BTreeSet::new();
        for (from, to, _) in &raw {
            for n in [from, to] {
                for k in 0..4 {
                    maxes[k] = maxes[k].max(n[k + 1]);
                }
                if n[0] != 0 {
                    labels.insert(n[0]);
                }
            }
        }
        let dims = DimSizes::from_array(maxes.map(|m| m + 1));
        let seam_ids: Vec<u32> = labels.into_iter().collect();
        let dense: HashMap<u32, u32> =
            seam_ids.iter().enumerate().map(|(i, &l)| (l, i as u32 + 1)).collect();
        let remap = |n: [u32; 5]| -> Node {
            let s = if n[0] == 0 { 0 } else { dense[&n[0]] };
            Node::new(s, n[1], n[2], n[3], n[4])
        };
        Self::from_edges(
            dims,
            seam_ids,
            raw.into_iter().map(|(f, t, c)| (remap(f), remap(t), c)),
        )
    }

    pub fn n_seams(&self) -> usize {
        self.n_seams
    }

    pub fn dims(&self) -> DimSizes {
        self.dims
    }

    pub fn home(&self) -> Node {
        Node::HOME
    }

    pub fn padding_cost(&self) -> f64 {
        self.padding_cost
    }

    /// Largest feasible transition cost.
    pub fn max_cost(&self) -> f64 {
        self.max_cost
    }

    /// External labels; entry `i` belongs to dense seam `i + 1`.
    pub fn seam_ids(&self) -> &[u32] {
        &self.seam_ids
    }

    /// Number of stored (feasible) transitions.
    pub fn num_edges(&self) -> usize {
        self.n_edges
    }

    /// Total number of node ids, home included.
    pub fn num_node_ids(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, node: &Node) -> bool {
        id_of(node, self.n_seams, &self.dims).is_some()
    }

    /// Dense id of a node: home is 0, real nodes follow in lexicographic order.
    pub fn node_id(&self, node: &Node) -> Option<usize> {
        id_of(node, self.n_seams, &self.dims)
    }

    pub fn node_at(&self, id: usize) -> Node {
        node_of(id, &self.dims)
    }

    /// Node of dense seam `seam` (1-based) with the given features.
    pub fn node(&self, seam: u32, features: [u32; 4]) -> Node {
        Node::with_features(seam, features)
    }

    /// All nodes belonging to dense seam `seam`, in lexicographic order.
    pub fn nodes_of_seam(&self, seam: u32) -> impl Iterator<Item = Node> + '_ {
        let per = self.dims.nodes_per_seam();
        let dims = self.dims;
        (0..per).map(move |off| Node::with_features(seam, dims.features_at(off)))
    }

    /// Transition cost, or the padding cost when the pair is not stored.
    pub fn cost(&self, from: &Node, to: &Node) -> Result<f64> {
        let a = self
            .node_id(from)
            .ok_or_else(|| domain(format!("node {from} outside instance bounds")))?;
        let b = self
            .node_id(to)
            .ok_or_else(|| domain(format!("node {to} outside instance bounds")))?;
        Ok(self.cost_by_id(a, b))
    }

    /// Cost lookup by dense ids. Panics on out-of-range ids.
    #[inline]
    pub fn cost_by_id(&self, a: usize, b: usize) -> f64 {
        match &self.lookup {
            Lookup::Dense(m) => m[a * self.rows.len() + b],
            Lookup::Rows => self.stored_by_id(a, b).unwrap_or(self.padding_cost),
        }
    }

    /// The stored cost of a pair, `None` when the transition is infeasible.
    pub fn stored_cost(&self, from: &Node, to: &Node) -> Option<f64> {
        let a = self.node_id(from)?;
        let b = self.node_id(to)?;
        self.stored_by_id(a, b)
    }

    fn stored_by_id(&self, a: usize, b: usize) -> Option<f64> {
        let row = &self.rows[a];
        row.binary_search_by_key(&(b as u32), |&(t, _)| t).ok().map(|i| row[i].1)
    }

    /// Feasible successors of node id `a`, sorted by target id.
    pub fn successors(&self, a: usize) -> &[(u32, f64)] {
        &self.rows[a]
    }

    /// Every stored transition in dense-id order.
    pub fn edges(&self) -> impl Iterator<Item = (Node, Node, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(a, row)| {
            let from = node_of(a, &self.dims);
            row.iter().map(move |&(b, w)| (from, node_of(b as usize, &self.dims), w))
        })
    }

    /// Dense seam index of an external label.
    pub fn seam_by_label(&self, label: u32) -> Option<u32> {
        if label == 0 {
            return Some(0);
        }
        self.seam_ids.iter().position(|&l| l == label).map(|i| i as u32 + 1)
    }

    /// External label of a dense seam index.
    pub fn seam_label(&self, seam: u32) -> u32 {
        if seam == 0 {
            0
        } else {
            self.seam_ids[seam as usize - 1]
        }
    }

    /// Node with its seam translated to the external label.
    pub fn external(&self, node: &Node) -> Node {
        Node { seam: self.seam_label(node.seam), ..*node }
    }

    /// Inverse of [`Instance::external`].
    pub fn internal(&self, node: &Node) -> Option<Node> {
        let seam = self.seam_by_label(node.seam)?;
        let n = Node { seam, ..*node };
        self.contains(&n).then_some(n)
    }

    /// Writes the canonical form: header, then rows sorted by the ten coordinates.
    pub fn write_canonical(&self, mut w: impl Write) -> Result<()> {
        let mut rows: Vec<([u32; 10], f64)> = self
            .edges()
            .map(|(a, b, c)| {
                let a = self.external(&a).to_array();
                let b = self.external(&b).to_array();
                let mut key = [0u32; 10];
                key[..5].copy_from_slice(&a);
                key[5..].copy_from_slice(&b);
                (key, c)
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        writeln!(w, "{}", HEADER.join(","))?;
        for (key, c) in rows {
            let cols: Vec<String> = key.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", cols.join(","), c)?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_canonical(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        self.write_canonical(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Keeps a uniformly random subset of `keep` seams plus home.
    ///
    /// Surviving seams are re-indexed in their original order, so the result
    /// depends only on `(self, keep, seed)`.
    pub fn downsample(&self, keep: usize, seed: u64) -> Result<Instance> {
        if keep == 0 || keep > self.n_seams {
            return Err(domain(format!(
                "keep must be in 1..={}, got {keep}",
                self.n_seams
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = index::sample(&mut rng, self.n_seams, keep).into_vec();
        chosen.sort_unstable();
        // old dense seam -> new dense seam
        let mut remap = vec![None; self.n_seams + 1];
        remap[0] = Some(0u32);
        for (new, &old) in chosen.iter().enumerate() {
            remap[old + 1] = Some(new as u32 + 1);
        }
        let seam_ids = chosen.iter().map(|&old| self.seam_ids[old]).collect();
        let edges: Vec<(Node, Node, f64)> = self
            .edges()
            .filter_map(|(a, b, c)| {
                let sa = remap[a.seam as usize]?;
                let sb = remap[b.seam as usize]?;
                Some((Node { seam: sa, ..a }, Node { seam: sb, ..b }, c))
            })
            .collect();
        Instance::from_edges(self.dims, seam_ids, edges)
    }
}

fn id_of(node: &Node, n_seams: usize, dims: &DimSizes) -> Option<usize> {
    if node.is_home() {
        return Some(0);
    }
    if node.seam == 0 || node.seam as usize > n_seams {
        return None;
    }
    let f = node.features();
    if f.iter().zip(dims.as_array()).any(|(&v, c)| v >= c) {
        return None;
    }
    Some(1 + (node.seam as usize - 1) * dims.nodes_per_seam() + dims.offset(f))
}

fn node_of(id: usize, dims: &DimSizes) -> Node {
    if id == 0 {
        return Node::HOME;
    }
    let per = dims.nodes_per_seam();
    let seam = (id - 1) / per + 1;
    Node::with_features(seam as u32, dims.features_at((id - 1) % per))
}

/// Parameters of the synthetic instance generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_seams: usize,
    pub dims: DimSizes,
    /// Fraction of node pairs kept, in `(0, 1]`.
    pub feasibility_rate: f64,
    /// Side of the work cell in seconds of travel.
    pub cost_scale: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_seams: 10,
            dims: DimSizes::new(2, 2, 2, 2),
            feasibility_rate: 0.8,
            cost_scale: 1.0,
            seed: 0,
        }
    }
}

/// A synthetic instance together with the tour used to guarantee feasibility.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub instance: Instance,
    /// Witness tour (dense seams, home excluded) whose home-anchored edges are all stored.
    pub witness: Vec<Node>,
}

type Point = [f64; 3];

fn dist(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Generates a random instance with a planted feasible home-anchored tour.
///
/// Each seam gets two random endpoints in a cube. A transition costs the time
/// to process the source seam plus the travel from its exit endpoint to the
/// entry endpoint of the target, scaled by a random factor per
/// `(tool, config, position)` of the target, plus a tool-change surcharge.
/// Direction decides which endpoint is the entry. Each cross-seam pair is then
/// dropped with probability `1 - feasibility_rate`, except the edges of a
/// random witness tour.
pub fn generate_synthetic(params: &GeneratorParams) -> Result<SyntheticInstance> {
    params.dims.validate()?;
    if params.n_seams == 0 {
        return Err(domain("n_seams must be >= 1"));
    }
    if !(params.feasibility_rate > 0.0 && params.feasibility_rate <= 1.0) {
        return Err(domain(format!(
            "feasibility_rate must be in (0, 1], got {}",
            params.feasibility_rate
        )));
    }
    if !(params.cost_scale.is_finite() && params.cost_scale > 0.0) {
        return Err(domain("cost_scale must be finite and > 0"));
    }
    let n = params.n_seams;
    let dims = params.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let point = |rng: &mut ChaCha8Rng| -> Point { [rng.random(), rng.random(), rng.random()] };
    let endpoints: Vec<(Point, Point)> = (0..n).map(|_| (point(&mut rng), point(&mut rng))).collect();
    let tcp = (dims.tools * dims.configs * dims.positions) as usize;
    let travel_factor: Vec<f64> = (0..tcp).map(|_| 1.0 + 0.5 * rng.random::<f64>()).collect();
    let process_factor: Vec<f64> = (0..tcp).map(|_| 0.8 + 0.4 * rng.random::<f64>()).collect();
    let tcp_index = |node: &Node| -> usize {
        ((node.tool * dims.configs + node.config) * dims.positions + node.position) as usize
    };

    let scale = params.cost_scale;
    let home_point: Point = [0.0; 3];
    let entry_exit = |node: &Node| -> (Point, Point) {
        let (a, b) = endpoints[node.seam as usize - 1];
        if node.direction.is_multiple_of(2) {
            (a, b)
        } else {
            (b, a)
        }
    };
    let cost = |from: &Node, to: &Node| -> f64 {
        let (process, exit) = if from.is_home() {
            (0.0, home_point)
        } else {
            let (entry, exit) = entry_exit(from);
            (0.5 * dist(&entry, &exit) * process_factor[tcp_index(from)], exit)
        };
        let (entry, factor, tool_change) = if to.is_home() {
            (home_point, 1.0, 0.0)
        } else {
            let change = if !from.is_home() && from.tool != to.tool { 0.2 } else { 0.0 };
            (entry_exit(to).0, travel_factor[tcp_index(to)], change)
        };
        scale * (0.01 + process + dist(&exit, &entry) * factor + tool_change)
    };

    // witness tour
    let mut order: Vec<u32> = (1..=n as u32).collect();
    order.shuffle(&mut rng);
    let dim_arr = dims.as_array();
    let witness: Vec<Node> = order
        .iter()
        .map(|&s| {
            let f = dim_arr.map(|c| rng.random_range(0..c));
            Node::with_features(s, f)
        })
        .collect();
    let mut planted: BTreeSet<(Node, Node)> = BTreeSet::new();
    let mut prev = Node::HOME;
    for &node in &witness {
        planted.insert((prev, node));
        prev = node;
    }
    planted.insert((prev, Node::HOME));

    let per = dims.nodes_per_seam();
    let all_nodes: Vec<Node> = std::iter::once(Node::HOME)
        .chain((1..=n as u32).flat_map(|s| {
            (0..per).map(move |off| Node::with_features(s, dims.features_at(off)))
        }))
        .collect();
    let mut edges = Vec::new();
    for from in &all_nodes {
        for to in &all_nodes {
            if from.seam == to.seam {
                continue;
            }
            let keep = planted.contains(&(*from, *to))
                || params.feasibility_rate >= 1.0
                || rng.random::<f64>() < params.feasibility_rate;
            if keep {
                edges.push((*from, *to, cost(from, to)));
            }
        }
    }
    let seam_ids: Vec<u32> = (1..=n as u32).collect();
    let instance = Instance::from_edges(dims, seam_ids, edges)?;
    Ok(SyntheticInstance { instance, witness })
}
