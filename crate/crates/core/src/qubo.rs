//! QUBO formulation of the cyclic routing problem.
//!
//! Binary variable `x[v][τ]` is 1 when real node `v` is visited at time step
//! `τ`, for `τ` in `0..n_seams`. The energy adds three parts:
//!
//! * a cost term coupling `x[u][τ]` and `x[v][τ+1]` (cyclic in `τ`) with the
//!   transition cost `u -> v`, padded when the edge is not stored;
//! * `P (Σ_v x[v][τ] - 1)^2` for every time step;
//! * `P (Σ_{v in seam s, τ} x[v][τ] - 1)^2` for every seam.
//!
//! Every feasible assignment therefore has energy equal to the cyclic tour
//! cost. The constant part of the penalties is kept in [`Qubo::offset`].

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::instance::{DimSizes, Instance, Node};
use crate::rko::{CostMode, Tour};

/// Default cap on the number of binary variables.
pub const DEFAULT_VAR_CAP: usize = 50_000;

/// Largest problem accepted by [`brute_force`].
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Largest number of stored quadratic terms.
pub const MAX_NONZEROS: u128 = 50_000_000;

/// `2 n_seams^2 n_tools n_config n_position`, the published qubit count.
pub fn qubit_count_estimate(n_seams: u64, n_tools: u64, n_config: u64, n_position: u64) -> Result<u128> {
    if n_seams == 0 || n_tools == 0 || n_config == 0 || n_position == 0 {
        return Err(domain("all counts must be >= 1"));
    }
    let n = n_seams as u128;
    Ok(2 * n * n * n_tools as u128 * n_config as u128 * n_position as u128)
}

/// Variables needed for `n_seams` seams with the given feature cardinalities.
pub fn variable_count(n_seams: usize, dims: DimSizes) -> u128 {
    let n = n_seams as u128;
    n * n * dims.nodes_per_seam() as u128
}

/// A quadratic binary objective `offset + Σ a_i x_i + Σ_{i<j} b_ij x_i x_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qubo {
    n_vars: usize,
    linear: Vec<f64>,
    /// Upper-triangular terms `(i, j, b)` with `i < j`, sorted, no duplicates.
    quadratic: Vec<(usize, usize, f64)>,
    offset: f64,
}

impl Qubo {
    /// Collects terms; `(i, i)` entries are linear, `(j, i)` is folded onto `(i, j)`.
    pub fn from_terms(n_vars: usize, terms: impl IntoIterator<Item = (usize, usize, f64)>, offset: f64) -> Result<Self> {
        let mut linear = vec![0.0; n_vars];
        let mut quad = Vec::new();
        for (i, j, w) in terms {
            if i >= n_vars || j >= n_vars {
                return Err(domain(format!("term ({i}, {j}) outside {n_vars} variables")));
            }
            if !w.is_finite() {
                return Err(domain(format!("term ({i}, {j}) has non-finite weight")));
            }
            if i == j {
                linear[i] += w;
            } else {
                quad.push((i.min(j), i.max(j), w));
            }
        }
        quad.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(quad.len());
        for (i, j, w) in quad {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += w,
                _ => merged.push((i, j, w)),
            }
        }
        Ok(Self { n_vars, linear, quadratic: merged, offset })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn quadratic(&self) -> &[(usize, usize, f64)] {
        &self.quadratic
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Exact value of the quadratic form.
    pub fn energy(&self, x: &[bool]) -> Result<f64> {
        if x.len() != self.n_vars {
            return Err(domain(format!("assignment has {} bits, expected {}", x.len(), self.n_vars)));
        }
        let mut e = self.offset;
        for (a, &xi) in self.linear.iter().zip(x) {
            if xi {
                e += a;
            }
        }
        for &(i, j, b) in &self.quadratic {
            if x[i] && x[j] {
                e += b;
            }
        }
        Ok(e)
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vars];
        for &(i, j, b) in &self.quadratic {
            adj[i].push((j, b));
            adj[j].push((i, b));
        }
        adj
    }

    /// Writes the sparse text format: `n_vars`, an offset comment, then `i j w` lines.
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{}", self.n_vars)?;
        writeln!(w, "# offset {}", self.offset)?;
        for (i, a) in self.linear.iter().enumerate() {
            if *a != 0.0 {
                writeln!(w, "{i} {i} {a}")?;
            }
        }
        for &(i, j, b) in &self.quadratic {
            writeln!(w, "{i} {j} {b}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn read(reader: impl Read) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut n_vars = None;
        let mut offset = 0.0;
        let mut terms = Vec::new();
        for (k, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let text = line.trim();
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("offset") {
                    offset = v.trim().parse().map_err(|e| parse_err(lineno, format!("bad offset: {e}")))?;
                }
                continue;
            }
            if text.is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            match (n_vars, fields.as_slice()) {
                (None, [n]) => {
                    n_vars = Some(n.parse::<usize>().map_err(|e| parse_err(lineno, format!("bad n_vars: {e}")))?)
                }
                (Some(_), [i, j, w]) => {
                    let i = i.parse().map_err(|e| parse_err(lineno, format!("bad index: {e}")))?;
                    let j = j.parse().map_err(|e| parse_err(lineno, format!("bad index: {e}")))?;
                    let w = w.parse().map_err(|e| parse_err(lineno, format!("bad weight: {e}")))?;
                    terms.push((i, j, w));
                }
                _ => return Err(parse_err(lineno, format!("unexpected line {text:?}"))),
            }
        }
        let n_vars = n_vars.ok_or_else(|| parse_err(0, "missing n_vars header".into()))?;
        Self::from_terms(n_vars, terms, offset)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}

/// The routing QUBO together with its variable layout.
#[derive(Debug, Clone)]
pub struct QuboProblem {
    pub qubo: Qubo,
    pub penalty: f64,
    n_seams: usize,
    dims: DimSizes,
}

/// `2 n_seams max_cost`: any constraint violation costs more than a whole tour.
pub fn default_penalty(instance: &Instance) -> f64 {
    2.0 * instance.n_seams() as f64 * instance.max_cost()
}

impl QuboProblem {
    pub fn n_vars(&self) -> usize {
        self.qubo.n_vars
    }

    pub fn n_seams(&self) -> usize {
        self.n_seams
    }

    fn nodes_per_step(&self) -> usize {
        self.n_seams * self.dims.nodes_per_seam()
    }

    /// Index of `x[node][τ]`.
    pub fn var_index(&self, instance: &Instance, node: &Node, step: usize) -> Option<usize> {
        if step >= self.n_seams || node.is_home() {
            return None;
        }
        let id = instance.node_id(node)?;
        Some(step * self.nodes_per_step() + id - 1)
    }

    /// `(node, τ)` of variable `i`.
    pub fn var_of(&self, instance: &Instance, i: usize) -> (Node, usize) {
        let per = self.nodes_per_step();
        (instance.node_at(i % per + 1), i / per)
    }

    /// One-hot assignment visiting `nodes[τ]` at step `τ`.
    pub fn encode_tour(&self, instance: &Instance, nodes: &[Node]) -> Result<Vec<bool>> {
        if nodes.len() != self.n_seams {
            return Err(domain(format!("tour has {} nodes, expected {}", nodes.len(), self.n_seams)));
        }
        let mut x = vec![false; self.n_vars()];
        for (step, node) in nodes.iter().enumerate() {
            let i = self
                .var_index(instance, node, step)
                .ok_or_else(|| domain(format!("node {node} outside instance")))?;
            x[i] = true;
        }
        Ok(x)
    }

    pub fn energy(&self, x: &[bool]) -> Result<f64> {
        self.qubo.energy(x)
    }
}

/// Builds the routing QUBO with penalty weight `penalty` and a variable cap.
pub fn build_qubo(instance: &Instance, penalty: f64, var_cap: usize) -> Result<QuboProblem> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(domain(format!("penalty must be >= 0, got {penalty}")));
    }
    let n = instance.n_seams();
    let dims = instance.dims();
    let count = variable_count(n, dims);
    if count > var_cap as u128 {
        let estimate = qubit_count_estimate(n as u64, dims.tools as u64, dims.configs as u64, dims.positions as u64)?;
        return Err(Error::Size(format!(
            "{count} variables exceed the cap of {var_cap} (qubit estimate 2*n^2*t*c*p = {estimate})"
        )));
    }
    let per = n * dims.nodes_per_seam();
    let nonzeros = n as u128 * (per as u128).pow(2);
    if nonzeros > MAX_NONZEROS {
        return Err(Error::Size(format!("{nonzeros} cost couplings exceed the limit of {MAX_NONZEROS}")));
    }
    let n_vars = count as usize;
    let idx = |step: usize, node: usize| step * per + node;
    let mut terms: Vec<(usize, usize, f64)> = Vec::with_capacity(nonzeros as usize);

    for step in 0..n {
        let next = (step + 1) % n;
        for u in 0..per {
            for v in 0..per {
                let w = instance.cost_by_id(u + 1, v + 1);
                terms.push((idx(step, u), idx(next, v), w));
            }
        }
    }

    // P (Σ x - 1)^2 = P (1 - Σ x_i + 2 Σ_{i<j} x_i x_j) for binary x
    let mut one_hot = |group: &[usize]| {
        for (k, &i) in group.iter().enumerate() {
            terms.push((i, i, -penalty));
            for &j in &group[k + 1..] {
                terms.push((i, j, 2.0 * penalty));
            }
        }
    };
    for step in 0..n {
        let group: Vec<usize> = (0..per).map(|v| idx(step, v)).collect();
        one_hot(&group);
    }
    let m = dims.nodes_per_seam();
    for seam in 0..n {
        let group: Vec<usize> = (0..n)
            .flat_map(|step| (0..m).map(move |f| idx(step, seam * m + f)))
            .collect();
        one_hot(&group);
    }
    let qubo = Qubo::from_terms(n_vars, terms, 2.0 * n as f64 * penalty)?;
    Ok(QuboProblem { qubo, penalty, n_seams: n, dims })
}

/// Constraint violations found while decoding an assignment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    /// Steps with no active node.
    pub empty_steps: Vec<usize>,
    /// Steps with more than one active node, with the count.
    pub crowded_steps: Vec<(usize, usize)>,
    /// Seams (1-based) never visited.
    pub unvisited_seams: Vec<u32>,
    /// Seams visited more than once, with the count.
    pub repeated_seams: Vec<(u32, usize)>,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.empty_steps.is_empty() {
            parts.push(format!("empty steps {:?}", self.empty_steps));
        }
        for (step, c) in &self.crowded_steps {
            parts.push(format!("step {step} has {c} nodes"));
        }
        if !self.unvisited_seams.is_empty() {
            parts.push(format!("unvisited seams {:?}", self.unvisited_seams));
        }
        for (seam, c) in &self.repeated_seams {
            parts.push(format!("seam {seam} visited {c} times"));
        }
        write!(f, "{}", parts.join("; "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuboDecode {
    Tour(Tour),
    Infeasible(InfeasibilityReport),
}

/// Reads a tour out of a one-hot assignment, costed cyclically.
pub fn decode_qubo_solution(x: &[bool], problem: &QuboProblem, instance: &Instance) -> Result<QuboDecode> {
    if x.len() != problem.n_vars() {
        return Err(domain(format!("assignment has {} bits, expected {}", x.len(), problem.n_vars())));
    }
    let n = problem.n_seams;
    let mut at_step: Vec<Vec<Node>> = vec![Vec::new(); n];
    let mut visits = vec![0usize; n + 1];
    for (i, _) in x.iter().enumerate().filter(|(_, &b)| b) {
        let (node, step) = problem.var_of(instance, i);
        at_step[step].push(node);
        visits[node.seam as usize] += 1;
    }
    let mut report = InfeasibilityReport::default();
    for (step, nodes) in at_step.iter().enumerate() {
        match nodes.len() {
            0 => report.empty_steps.push(step),
            1 => {}
            c => report.crowded_steps.push((step, c)),
        }
    }
    for seam in 1..=n {
        match visits[seam] {
            0 => report.unvisited_seams.push(seam as u32),
            1 => {}
            c => report.repeated_seams.push((seam as u32, c)),
        }
    }
    if report != InfeasibilityReport::default() {
        return Ok(QuboDecode::Infeasible(report));
    }
    let nodes = at_step.into_iter().map(|v| v[0]).collect();
    Ok(QuboDecode::Tour(Tour::from_nodes(nodes, instance, CostMode::Cyclic)))
}

/// Ising form `Σ_{i<j} J_ij z_i z_j + Σ h_i z_i + offset` with `z = 2x - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub h: Vec<f64>,
    pub couplings: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl IsingProblem {
    pub fn energy(&self, z: &[i8]) -> Result<f64> {
        if z.len() != self.h.len() {
            return Err(domain(format!("spin vector has {} entries, expected {}", z.len(), self.h.len())));
        }
        let mut e = self.offset;
        for (h, &s) in self.h.iter().zip(z) {
            e += h * s as f64;
        }
        for &(i, j, jij) in &self.couplings {
            e += jij * (z[i] * z[j]) as f64;
        }
        Ok(e)
    }

    /// Inverse of [`to_ising`].
    pub fn to_qubo(&self) -> Qubo {
        // z = 2x - 1
        let n = self.h.len();
        let mut linear: Vec<f64> = self.h.iter().map(|h| 2.0 * h).collect();
        let mut offset = self.offset - self.h.iter().sum::<f64>();
        let mut quad = Vec::with_capacity(self.couplings.len());
        for &(i, j, jij) in &self.couplings {
            quad.push((i, j, 4.0 * jij));
            linear[i] -= 2.0 * jij;
            linear[j] -= 2.0 * jij;
            offset += jij;
        }
        let terms = linear.into_iter().enumerate().map(|(i, a)| (i, i, a)).chain(quad);
        Qubo::from_terms(n, terms, offset).expect("indices come from a valid problem")
    }
}

/// Substitutes `x = (z + 1) / 2`.
pub fn to_ising(qubo: &Qubo) -> IsingProblem {
    let mut h: Vec<f64> = qubo.linear.iter().map(|a| a / 2.0).collect();
    let mut offset = qubo.offset + qubo.linear.iter().sum::<f64>() / 2.0;
    let mut couplings = Vec::with_capacity(qubo.quadratic.len());
    for &(i, j, b) in &qubo.quadratic {
        couplings.push((i, j, b / 4.0));
        h[i] += b / 4.0;
        h[j] += b / 4.0;
        offset += b / 4.0;
    }
    IsingProblem { h, couplings, offset }
}

/// Exact minimum by Gray-code enumeration; the first minimizer found wins ties.
pub fn brute_force(qubo: &Qubo) -> Result<(Vec<bool>, f64)> {
    let n = qubo.n_vars;
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::Size(format!("{n} variables exceed the brute-force limit of {BRUTE_FORCE_MAX_VARS}")));
    }
    let adj = qubo.adjacency();
    let mut x = vec![false; n];
    let mut e = qubo.offset;
    let mut best_x = x.clone();
    let mut best = e;
    for k in 1u64..(1u64 << n) {
        let bit = k.trailing_zeros() as usize;
        let field: f64 = qubo.linear[bit] + adj[bit].iter().filter(|(j, _)| x[*j]).map(|(_, b)| b).sum::<f64>();
        e += if x[bit] { -field } else { field };
        x[bit] = !x[bit];
        // the running sum drifts; confirm near-ties exactly
        if e <= best + 1e-9 * (1.0 + best.abs()) {
            let exact = qubo.energy(&x)?;
            if exact < best {
                best = exact;
                best_x.copy_from_slice(&x);
            }
            e = exact;
        }
    }
    Ok((best_x, best))
}

/// Parameters of the single-flip annealer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuboSaParams {
    pub sweeps: usize,
    /// Starting temperature; defaults to the largest absolute coefficient.
    pub t_initial: Option<f64>,
    /// Final temperature; defaults to `1e-4 * t_initial`.
    pub t_final: Option<f64>,
    pub seed: u64,
}

impl Default for QuboSaParams {
    fn default() -> Self {
        Self { sweeps: 1000, t_initial: None, t_final: None, seed: 0 }
    }
}

/// Metropolis single-bit-flip annealing under a geometric schedule.
///
/// Starts from a uniformly random assignment and returns the best one seen.
pub fn solve_sa(qubo: &Qubo, params: &QuboSaParams) -> Result<(Vec<bool>, f64)> {
    let n = qubo.n_vars;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut x: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    let mut e = qubo.energy(&x)?;
    let mut best_x = x.clone();
    let mut best = e;
    if params.sweeps == 0 || n == 0 {
        return Ok((best_x, best));
    }
    let scale = qubo
        .linear
        .iter()
        .chain(qubo.quadratic.iter().map(|(_, _, b)| b))
        .fold(0.0f64, |m, c| m.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let t0 = params.t_initial.unwrap_or(scale);
    let t1 = params.t_final.unwrap_or(1e-4 * t0);
    if !(t0 > 0.0 && t1 > 0.0) {
        return Err(domain("annealing temperatures must be > 0"));
    }
    let adj = qubo.adjacency();
    // field[i] = Σ_j b_ij x_j
    let mut field = vec![0.0; n];
    for &(i, j, b) in &qubo.quadratic {
        if x[j] {
            field[i] += b;
        }
        if x[i] {
            field[j] += b;
        }
    }
    let ratio = if params.sweeps > 1 { (t1 / t0).powf(1.0 / (params.sweeps - 1) as f64) } else { 1.0 };
    let mut temp = t0;
    for _ in 0..params.sweeps {
        for i in 0..n {
            let local = qubo.linear[i] + field[i];
            let delta = if x[i] { -local } else { local };
            if delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                x[i] = !x[i];
                e += delta;
                let sign = if x[i] { 1.0 } else { -1.0 };
                for &(j, b) in &adj[i] {
                    field[j] += sign * b;
                }
                if e < best - 1e-9 * (1.0 + best.abs()) {
                    best = e;
                    best_x.copy_from_slice(&x);
                }
            }
        }
        temp *= ratio;
    }
    let exact = qubo.energy(&best_x)?;
    Ok((best_x, exact))
}

/// Frequency of each energy level, handy for reports.
pub fn energy_histogram(energies: &[f64]) -> Vec<(f64, usize)> {
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for e in energies {
        *counts.entry(e.to_bits()).or_default() += 1;
    }
    let mut out: Vec<(f64, usize)> = counts.into_iter().map(|(b, c)| (f64::from_bits(b), c)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_synthetic, GeneratorParams};
    use proptest::prelude::*;
    use rand::Rng;

    fn tiny(n: usize, dims: DimSizes, seed: u64) -> Instance {
        generate_synthetic(&GeneratorParams { n_seams: n, dims, feasibility_rate: 1.0, cost_scale: 1.0, seed })
            .unwrap()
            .instance
    }

    fn ones() -> DimSizes {
        DimSizes::new(1, 1, 1, 1)
    }

    #[test]
    fn estimate_arithmetic() {
        assert_eq!(qubit_count_estimate(50, 3, 10, 3).unwrap(), 450_000);
        assert_eq!(qubit_count_estimate(1, 1, 1, 1).unwrap(), 2);
        assert_eq!(qubit_count_estimate(10, 3, 9, 4).unwrap(), 21_600);
        assert!(qubit_count_estimate(0, 1, 1, 1).is_err());
        assert_eq!(
            qubit_count_estimate(u64::from(u32::MAX), 1000, 1000, 1000).unwrap(),
            2 * (u32::MAX as u128).pow(2) * 1_000_000_000
        );
        assert_eq!(variable_count(20, DimSizes::new(2, 3, 9, 4)), 86_400);
    }

    #[test]
    fn two_seam_energies_by_hand() {
        let inst = tiny(2, ones(), 1);
        let p = 7.0;
        let prob = build_qubo(&inst, p, DEFAULT_VAR_CAP).unwrap();
        assert_eq!(prob.n_vars(), 4);
        let w12 = inst.cost(&Node::new(1, 0, 0, 0, 0), &Node::new(2, 0, 0, 0, 0)).unwrap();
        let w21 = inst.cost(&Node::new(2, 0, 0, 0, 0), &Node::new(1, 0, 0, 0, 0)).unwrap();
        let pad = inst.padding_cost();
        // layout: index = step * 2 + (seam - 1)
        for mask in 0u32..16 {
            let x: Vec<bool> = (0..4).map(|b| mask >> b & 1 == 1).collect();
            let v = |seam: usize, step: usize| x[step * 2 + seam - 1] as u8 as f64;
            let mut expected = 0.0;
            for step in 0..2 {
                let next = 1 - step;
                expected += v(1, step) * v(2, next) * w12 + v(2, step) * v(1, next) * w21;
                expected += (v(1, step) * v(1, next) + v(2, step) * v(2, next)) * pad;
                expected += p * (v(1, step) + v(2, step) - 1.0).powi(2);
            }
            for seam in 1..=2 {
                expected += p * (v(seam, 0) + v(seam, 1) - 1.0).powi(2);
            }
            let got = prob.energy(&x).unwrap();
            assert!((got - expected).abs() < 1e-9, "mask {mask}: {got} vs {expected}");
        }
        assert_eq!(prob.energy(&[false; 4]).unwrap(), 2.0 * 2.0 * p);
    }

    #[test]
    fn feasible_encoding_costs_the_cyclic_tour() {
        let inst = tiny(3, DimSizes::new(2, 1, 1, 2), 4);
        let prob = build_qubo(&inst, default_penalty(&inst), DEFAULT_VAR_CAP).unwrap();
        let nodes = vec![Node::new(2, 1, 0, 0, 0), Node::new(3, 0, 0, 0, 1), Node::new(1, 1, 0, 0, 1)];
        let x = prob.encode_tour(&inst, &nodes).unwrap();
        let (cost, _) = crate::rko::tour_cost(&nodes, &inst, CostMode::Cyclic);
        assert!((prob.energy(&x).unwrap() - cost).abs() < 1e-9);
        match decode_qubo_solution(&x, &prob, &inst).unwrap() {
            QuboDecode::Tour(t) => assert_eq!(t.nodes, nodes),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_penalty_zero_vector() {
        let inst = tiny(2, ones(), 2);
        let prob = build_qubo(&inst, 0.0, DEFAULT_VAR_CAP).unwrap();
        assert_eq!(prob.energy(&[false; 4]).unwrap(), 0.0);
    }

    #[test]
    fn single_seam_self_loop_is_padded() {
        let inst = tiny(1, DimSizes::new(2, 1, 1, 1), 3);
        let prob = build_qubo(&inst, 5.0, DEFAULT_VAR_CAP).unwrap();
        assert_eq!(prob.n_vars(), 2);
        let x = vec![true, false];
        let (cost, feasible) = crate::rko::tour_cost(&[Node::new(1, 0, 0, 0, 0)], &inst, CostMode::Cyclic);
        assert!(!feasible);
        assert!((prob.energy(&x).unwrap() - cost).abs() < 1e-9);
    }

    #[test]
    fn cap_guard() {
        let inst = tiny(4, DimSizes::new(2, 2, 2, 2), 1);
        let err = build_qubo(&inst, 1.0, 100).unwrap_err();
        assert!(matches!(err, Error::Size(ref m) if m.contains("256") && m.contains("cap")), "{err}");
        assert!(build_qubo(&inst, -1.0, DEFAULT_VAR_CAP).is_err());
    }

    #[test]
    fn decode_reports() {
        let inst = tiny(3, ones(), 5);
        let prob = build_qubo(&inst, 1.0, DEFAULT_VAR_CAP).unwrap();
        let QuboDecode::Infeasible(r) = decode_qubo_solution(&[false; 9], &prob, &inst).unwrap() else {
            panic!("all-zeros decoded as a tour");
        };
        assert_eq!(r.empty_steps, vec![0, 1, 2]);
        assert_eq!(r.unvisited_seams, vec![1, 2, 3]);
        let mut x = vec![false; 9];
        x[3] = true; // seam 1 at step 1
        x[4] = true; // seam 2 at step 1
        x[8] = true; // seam 3 at step 2
        let QuboDecode::Infeasible(r) = decode_qubo_solution(&x, &prob, &inst).unwrap() else { panic!() };
        assert_eq!(r.crowded_steps, vec![(1, 2)]);
        assert_eq!(r.empty_steps, vec![0]);
        assert!(r.unvisited_seams.is_empty() && r.repeated_seams.is_empty());
        assert!(r.to_string().contains("step 1 has 2 nodes"));
        assert!(decode_qubo_solution(&x[..8], &prob, &inst).is_err());
    }

    #[test]
    fn ising_single_variable_and_zero() {
        let q = Qubo::from_terms(1, [(0, 0, 3.0)], 0.0).unwrap();
        let ising = to_ising(&q);
        assert_eq!(ising.h, vec![1.5]);
        assert_eq!(ising.offset, 1.5);
        let zero = Qubo::from_terms(3, [], 0.0).unwrap();
        let z = to_ising(&zero);
        assert!(z.h.iter().all(|&h| h == 0.0) && z.couplings.is_empty() && z.offset == 0.0);
    }

    #[test]
    fn ising_matches_on_all_assignments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut terms = Vec::new();
        for i in 0..6 {
            for j in i..6 {
                terms.push((i, j, rng.random_range(-5.0..5.0)));
            }
        }
        let q = Qubo::from_terms(6, terms, 1.25).unwrap();
        let ising = to_ising(&q);
        let back = ising.to_qubo();
        for mask in 0u32..64 {
            let x: Vec<bool> = (0..6).map(|b| mask >> b & 1 == 1).collect();
            let z: Vec<i8> = x.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let e = q.energy(&x).unwrap();
            assert!((e - ising.energy(&z).unwrap()).abs() < 1e-9);
            assert!((e - back.energy(&x).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn brute_force_small_cases() {
        let empty = Qubo::from_terms(0, [], 0.0).unwrap();
        assert_eq!(brute_force(&empty).unwrap(), (vec![], 0.0));
        // E = -x0 - x1 + 2 x0 x1 + x2 - x1 x2: minima at (1,0,0) and (0,1,0) with -1
        let q = Qubo::from_terms(3, [(0, 0, -1.0), (1, 1, -1.0), (0, 1, 2.0), (2, 2, 1.0), (1, 2, -1.0)], 0.0).unwrap();
        let (x, e) = brute_force(&q).unwrap();
        assert_eq!(e, -1.0);
        assert_eq!(q.energy(&x).unwrap(), -1.0);
        let big = Qubo::from_terms(25, [], 0.0).unwrap();
        assert!(matches!(brute_force(&big), Err(Error::Size(_))));
    }

    #[test]
    fn sa_contract() {
        let inst = tiny(3, DimSizes::new(2, 1, 1, 1), 6);
        let prob = build_qubo(&inst, default_penalty(&inst), DEFAULT_VAR_CAP).unwrap();
        let params = QuboSaParams { sweeps: 0, seed: 3, ..Default::default() };
        let (x0, e0) = solve_sa(&prob.qubo, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let init: Vec<bool> = (0..prob.n_vars()).map(|_| rng.random()).collect();
        assert_eq!(x0, init);
        assert_eq!(e0, prob.energy(&init).unwrap());
        let params = QuboSaParams { sweeps: 50, seed: 3, ..Default::default() };
        let (x, e) = solve_sa(&prob.qubo, &params).unwrap();
        assert!(e <= e0);
        assert_eq!(e, prob.energy(&x).unwrap());
        assert_eq!(solve_sa(&prob.qubo, &params).unwrap(), (x, e));
    }

    #[test]
    fn sa_finds_ground_state_on_tiny_instances() {
        let inst = tiny(3, DimSizes::new(2, 1, 1, 1), 7);
        let prob = build_qubo(&inst, 4.0 * default_penalty(&inst), DEFAULT_VAR_CAP).unwrap();
        let (_, ground) = brute_force(&prob.qubo).unwrap();
        let hits = (0..10)
            .filter(|&seed| {
                let (_, e) = solve_sa(&prob.qubo, &QuboSaParams { sweeps: 2000, seed, ..Default::default() }).unwrap();
                (e - ground).abs() < 1e-9
            })
            .count();
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn file_round_trip() {
        let inst = tiny(2, DimSizes::new(2, 1, 1, 1), 9);
        let prob = build_qubo(&inst, default_penalty(&inst), DEFAULT_VAR_CAP).unwrap();
        let mut buf = Vec::new();
        prob.qubo.write(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("8\n# offset "));
        let back = Qubo::read(text.as_bytes()).unwrap();
        assert_eq!(back, prob.qubo);
        assert!(Qubo::read("2\n0 5 1.0\n".as_bytes()).is_err());
        assert!(Qubo::read("0 1 1.0\n".as_bytes()).is_err());
    }

    #[test]
    fn histogram_counts() {
        assert_eq!(energy_histogram(&[2.0, 1.0, 2.0]), vec![(1.0, 1), (2.0, 2)]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn zero_penalty_iff_feasible(seed in 0u64..50, bits in proptest::collection::vec(any::<bool>(), 12)) {
            let inst = tiny(2, DimSizes::new(3, 1, 1, 1), seed);
            let costed = build_qubo(&inst, 1.0, DEFAULT_VAR_CAP).unwrap();
            let pure = build_qubo(&inst, 0.0, DEFAULT_VAR_CAP).unwrap();
            let penalty = costed.energy(&bits).unwrap() - pure.energy(&bits).unwrap();
            let feasible = matches!(decode_qubo_solution(&bits, &costed, &inst).unwrap(), QuboDecode::Tour(_));
            prop_assert_eq!(penalty.abs() < 1e-9, feasible);
        }

        #[test]
        fn feasible_energy_is_tour_cost(seed in 0u64..50, perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
                                        feats in proptest::collection::vec(0u32..2, 3), p in 0.0f64..100.0) {
            let inst = tiny(3, DimSizes::new(2, 1, 1, 1), seed);
            let prob = build_qubo(&inst, p, DEFAULT_VAR_CAP).unwrap();
            let nodes: Vec<Node> = perm.iter().zip(&feats).map(|(&s, &d)| Node::new(s as u32 + 1, d, 0, 0, 0)).collect();
            let x = prob.encode_tour(&inst, &nodes).unwrap();
            let (cost, _) = crate::rko::tour_cost(&nodes, &inst, CostMode::Cyclic);
            prop_assert!((prob.energy(&x).unwrap() - cost).abs() < 1e-9);
        }
    }
}
