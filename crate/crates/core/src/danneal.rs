//! Dual annealing over the random-key hypercube.
//!
//! Generalized simulated annealing proposes heavy-tailed jumps whose spread is
//! set by the visiting parameter `q_v` and the current temperature. Uphill
//! moves are accepted with the generalized Metropolis rule controlled by
//! `q_a`. Each iteration runs a chain of `2N` proposals for `N` keys: first
//! `N` jumps that move every key, then one jump per single key. A bounded
//! local search then refines the incumbent if the chain improved it, and
//! otherwise refines the current point with a probability that decays with
//! its gap to the incumbent. When the temperature drops below
//! `restart_temp_ratio * initial_temp` the schedule starts over from a fresh
//! random point, while the iteration budget keeps counting.
//!
//! Decoded costs are piecewise constant in the keys, so the local search is a
//! derivative-free coordinate pattern search rather than a gradient method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::rko::{decode, fitness, Chromosome, FitnessRecord, KEY_BLOCKS};
use crate::trace::{Improvement, ImprovementLog};

/// Visits beyond this magnitude are redrawn uniformly inside it.
const TAIL_LIMIT: f64 = 1e8;

/// Smallest step tried by the pattern search.
pub const MIN_STEP: f64 = 1e-3;

/// First step tried by the pattern search.
pub const INITIAL_STEP: f64 = 0.5;

/// Hyperparameters, named after the usual dual-annealing configuration keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaParams {
    pub maxiter: usize,
    pub seed: u64,
    /// Visiting parameter `q_v`, in `(1, 3)`.
    pub visit: f64,
    /// Acceptance parameter `q_a`, below 1.
    pub accept: f64,
    pub initial_temp: f64,
    /// Restart when the temperature falls below this fraction of `initial_temp`.
    pub restart_temp_ratio: f64,
    /// Fitness evaluations allowed per local search.
    pub local_search_budget: usize,
}

impl Default for DaParams {
    fn default() -> Self {
        Self {
            maxiter: 1000,
            seed: 0,
            visit: 2.62,
            accept: -5.0,
            initial_temp: 5230.0,
            restart_temp_ratio: 2e-5,
            local_search_budget: 100,
        }
    }
}

impl DaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.visit > 1.0 && self.visit < 3.0) {
            return Err(domain(format!("visit must be in (1, 3), got {}", self.visit)));
        }
        if !(self.accept < 1.0) {
            return Err(domain(format!("accept must be < 1, got {}", self.accept)));
        }
        if !(self.restart_temp_ratio > 0.0 && self.restart_temp_ratio < 1.0) {
            return Err(domain(format!(
                "restart_temp_ratio must be in (0, 1), got {}",
                self.restart_temp_ratio
            )));
        }
        if !(self.initial_temp.is_finite() && self.initial_temp > 0.0) {
            return Err(domain(format!("initial_temp must be > 0, got {}", self.initial_temp)));
        }
        Ok(())
    }
}

/// Annealing schedule `T(t) = T1 (2^(q_v-1) - 1) / ((1+t)^(q_v-1) - 1)` for `t >= 1`.
pub fn temperature(t: u64, initial_temp: f64, visit: f64) -> f64 {
    debug_assert!(t >= 1);
    if t <= 1 {
        return initial_temp;
    }
    let a = visit - 1.0;
    let num = (a * std::f64::consts::LN_2).exp_m1();
    let den = (a * ((1 + t) as f64).ln()).exp_m1();
    initial_temp * num / den
}

/// Generalized Metropolis acceptance probability with `kappa = 1`.
pub fn acceptance_probability(delta: f64, temperature: f64, accept: f64) -> f64 {
    if delta <= 0.0 {
        return 1.0;
    }
    let beta = 1.0 / temperature;
    let bracket = 1.0 - (1.0 - accept) * beta * delta;
    if bracket <= 0.0 {
        return 0.0;
    }
    bracket.powf(1.0 / (1.0 - accept)).min(1.0)
}

/// Draws whether a move changing the cost by `delta` is taken.
pub fn accept_move(delta: f64, temperature: f64, accept: f64, rng: &mut impl Rng) -> bool {
    delta < 0.0 || rng.random::<f64>() <= acceptance_probability(delta, temperature, accept)
}

/// Sampler for the heavy-tailed visiting distribution.
#[derive(Debug, Clone)]
pub struct Visiting {
    visit: f64,
    factor4_p: f64,
    factor6: f64,
}

impl Visiting {
    pub fn new(visit: f64) -> Self {
        let qv = visit;
        let factor2 = ((4.0 - qv) * (qv - 1.0).ln()).exp();
        let factor3 = ((2.0 - qv) * std::f64::consts::LN_2 / (qv - 1.0)).exp();
        let factor4_p = std::f64::consts::PI.sqrt() * factor2 / (factor3 * (3.0 - qv));
        let factor5 = 1.0 / (qv - 1.0) - 0.5;
        let d1 = 2.0 - factor5;
        let s = std::f64::consts::PI * (1.0 - factor5);
        let factor6 = s / s.sin() / ln_gamma(d1).exp();
        Self { visit, factor4_p, factor6 }
    }

    /// One displacement at the given temperature.
    pub fn sample(&self, temperature: f64, rng: &mut impl Rng) -> f64 {
        let qv = self.visit;
        loop {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let factor1 = (temperature.ln() / (qv - 1.0)).exp();
            let factor4 = self.factor4_p * factor1;
            let sigma = (-(qv - 1.0) * (self.factor6 / factor4).ln() / (3.0 - qv)).exp();
            let den = ((qv - 1.0) * y.abs().ln() / (3.0 - qv)).exp();
            let v = x * sigma / den;
            if v.is_nan() {
                continue;
            }
            if v > TAIL_LIMIT {
                return TAIL_LIMIT * rng.random::<f64>();
            }
            if v < -TAIL_LIMIT {
                return -TAIL_LIMIT * rng.random::<f64>();
            }
            return v;
        }
    }
}

/// Maps any real onto `(0, 1]` periodically.
pub fn wrap_key(x: f64) -> f64 {
    let w = x.rem_euclid(1.0);
    if w > 0.0 {
        w
    } else {
        1.0
    }
}

/// Candidate `X + dX` with every coordinate displaced, wrapped into `(0, 1]`.
pub fn propose_jump(x: &Chromosome, temperature: f64, visiting: &Visiting, rng: &mut impl Rng) -> Chromosome {
    let keys = x.keys().iter().map(|&k| wrap_key(k + visiting.sample(temperature, rng))).collect();
    Chromosome::new(keys).expect("wrapped keys are in range")
}

/// Candidate with only coordinate `index` displaced.
pub fn propose_coordinate(
    x: &Chromosome,
    index: usize,
    temperature: f64,
    visiting: &Visiting,
    rng: &mut impl Rng,
) -> Chromosome {
    let mut keys = x.keys().to_vec();
    keys[index] = wrap_key(keys[index] + visiting.sample(temperature, rng));
    Chromosome::new(keys).expect("wrapped keys are in range")
}

/// Bounded coordinate pattern search.
///
/// Tries `x_i +/- step` coordinate by coordinate, moving only on strict
/// improvement; a pass without improvement halves the step. Stops after
/// `budget` evaluations or once the step falls below [`MIN_STEP`].
pub fn local_search(
    x: &Chromosome,
    cost: f64,
    budget: usize,
    mut f: impl FnMut(&Chromosome) -> f64,
) -> (Chromosome, f64, usize) {
    let mut keys = x.keys().to_vec();
    let mut best = cost;
    let mut evals = 0;
    let mut step = INITIAL_STEP;
    'outer: while step >= MIN_STEP {
        let mut improved = false;
        for i in 0..keys.len() {
            let orig = keys[i];
            for dir in [1.0, -1.0] {
                if evals >= budget {
                    break 'outer;
                }
                keys[i] = wrap_key(orig + dir * step);
                let cand = Chromosome::new(keys.clone()).expect("wrapped keys are in range");
                let c = f(&cand);
                evals += 1;
                if c < best {
                    best = c;
                    improved = true;
                    break;
                }
                keys[i] = orig;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (Chromosome::new(keys).expect("wrapped keys are in range"), best, evals)
}

/// One row of the annealing trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaTraceRow {
    pub iteration: usize,
    pub temperature: f64,
    pub current_cost: f64,
    pub incumbent_cost: f64,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct DaOutcome {
    pub best: FitnessRecord,
    pub trace: Vec<DaTraceRow>,
    pub improvements: Vec<Improvement>,
    pub evaluations: u64,
    pub restarts: usize,
}

/// Runs dual annealing from `warm_start` or from a random point.
pub fn run(instance: &Instance, params: &DaParams, warm_start: Option<&Chromosome>) -> Result<DaOutcome> {
    params.validate()?;
    let len = KEY_BLOCKS * instance.n_seams();
    if let Some(w) = warm_start {
        if w.len() != len {
            return Err(domain(format!("warm start has {} keys, expected {len}", w.len())));
        }
    }
    let mut log = ImprovementLog::start();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let visiting = Visiting::new(params.visit);
    let mut evaluations = 0u64;
    let mut eval = |x: &Chromosome| {
        evaluations += 1;
        fitness(x, instance)
    };

    let mut x = warm_start.cloned().unwrap_or_else(|| Chromosome::random(len, &mut rng));
    let mut e = eval(&x);
    let mut best = (x.clone(), e);
    log.offer(e);

    let t1 = params.initial_temp;
    let restart_temp = params.restart_temp_ratio * t1;
    // weight of the energy gap in the chance of refining a non-improved chain
    let k_ls = 100.0 * len as f64;
    let mut step = 1u64;
    let mut restarts = 0;
    let mut trace = Vec::with_capacity(params.maxiter);
    for iteration in 1..=params.maxiter {
        let mut temp = temperature(step, t1, params.visit);
        if temp < restart_temp {
            restarts += 1;
            step = 1;
            temp = t1;
            x = Chromosome::random(len, &mut rng);
            e = eval(&x);
        }

        // Markov chain: `len` full jumps, then one jump per coordinate
        let mut improved = iteration == 1;
        for j in 0..2 * len {
            let cand = if j < len {
                propose_jump(&x, temp, &visiting, &mut rng)
            } else {
                propose_coordinate(&x, j - len, temp, &visiting, &mut rng)
            };
            let ce = eval(&cand);
            let delta = ce - e;
            if accept_move(delta, temp, params.accept, &mut rng) {
                x = cand;
                e = ce;
                if e < best.1 {
                    best = (x.clone(), e);
                    log.offer(e);
                    improved = true;
                }
            }
        }

        if improved {
            let (lx, le, _) = local_search(&best.0, best.1, params.local_search_budget, &mut eval);
            if le < best.1 {
                best = (lx, le);
                log.offer(le);
            }
            x = best.0.clone();
            e = best.1;
        } else if rng.random::<f64>() <= (k_ls * (best.1 - e) / temp).exp() {
            let (lx, le, _) = local_search(&x, e, params.local_search_budget, &mut eval);
            x = lx;
            e = le;
            if e < best.1 {
                best = (x.clone(), e);
                log.offer(e);
            }
        }
        trace.push(DaTraceRow { iteration, temperature: temp, current_cost: e, incumbent_cost: best.1 });
        step += 1;
    }

    let tour = decode(&best.0, instance)?;
    Ok(DaOutcome {
        best: FitnessRecord::new(best.0, tour, evaluations),
        trace,
        improvements: log.into_entries(),
        evaluations,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_synthetic, DimSizes, GeneratorParams};

    #[test]
    fn temperature_starts_at_t1_and_decreases() {
        for qv in [1.1321, 1.5, 2.0, 2.62, 2.9] {
            assert_eq!(temperature(1, 5230.0, qv), 5230.0);
            let mut prev = f64::INFINITY;
            for t in 1..2000 {
                let tt = temperature(t, 5230.0, qv);
                assert!(tt < prev);
                prev = tt;
            }
        }
    }

    #[test]
    fn temperature_at_step_100() {
        // direct evaluation of the closed form
        let expected = 5230.0 * (2f64.powf(1.62) - 1.0) / (101f64.powf(1.62) - 1.0);
        let got = temperature(100, 5230.0, 2.62);
        assert!(((got - expected) / expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(0.0, 1.0, -5.0), 1.0);
        assert_eq!(acceptance_probability(-3.0, 1.0, -5.0), 1.0);
        assert_eq!(acceptance_probability(1e9, 1.0, -5.0), 0.0);
        let p = acceptance_probability(0.1, 1.0, -5.0);
        assert!((p - 0.4f64.powf(1.0 / 6.0)).abs() < 1e-15);
        assert!((p - 0.858).abs() < 1e-3);
    }

    #[test]
    fn params_validation() {
        assert!(DaParams::default().validate().is_ok());
        for p in [
            DaParams { visit: 1.0, ..Default::default() },
            DaParams { visit: 3.0, ..Default::default() },
            DaParams { accept: 1.0, ..Default::default() },
            DaParams { restart_temp_ratio: 0.0, ..Default::default() },
            DaParams { restart_temp_ratio: 1.0, ..Default::default() },
            DaParams { initial_temp: 0.0, ..Default::default() },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    fn median_abs(v: &Visiting, temp: f64, rng: &mut ChaCha8Rng) -> f64 {
        let mut s: Vec<f64> = (0..10_000).map(|_| v.sample(temp, rng).abs()).collect();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    }

    #[test]
    fn visits_shrink_with_temperature() {
        let v = Visiting::new(2.62);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let temps = [100.0, 1.0, 1e-2, 1e-4];
        let medians: Vec<f64> = temps.iter().map(|&t| median_abs(&v, t, &mut rng)).collect();
        assert!(medians.windows(2).all(|w| w[1] < w[0]), "{medians:?}");
    }

    #[test]
    fn heavier_tail_for_larger_visit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tail = |qv: f64, rng: &mut ChaCha8Rng| {
            let v = Visiting::new(qv);
            (0..10_000).filter(|_| v.sample(0.01, rng).abs() > 0.5).count()
        };
        let light = tail(1.1, &mut rng);
        let heavy = tail(2.9, &mut rng);
        assert!(heavy > light, "{light} vs {heavy}");
    }

    #[test]
    fn wrapping_stays_in_unit_interval() {
        for x in [-3.0, -1.0, -1e-20, 0.0, 1e-300, 0.5, 1.0, 1.0 + 1e-16, 2.0, 7.25, 1e8] {
            let w = wrap_key(x);
            assert!(w > 0.0 && w <= 1.0, "{x} -> {w}");
        }
        let v = Visiting::new(2.62);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Chromosome::random(40, &mut rng);
        for temp in [5230.0, 1.0, 1e-6] {
            let y = propose_jump(&x, temp, &v, &mut rng);
            assert!(y.keys().iter().all(|&k| k > 0.0 && k <= 1.0));
        }
    }

    fn toy() -> Instance {
        generate_synthetic(&GeneratorParams {
            n_seams: 4,
            dims: DimSizes::new(2, 1, 1, 1),
            feasibility_rate: 0.9,
            cost_scale: 1.0,
            seed: 21,
        })
        .unwrap()
        .instance
    }

    #[test]
    fn local_search_contract() {
        let inst = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Chromosome::random(20, &mut rng);
        let c = fitness(&x, &inst);
        let (y, cy, evals) = local_search(&x, c, 0, |z| fitness(z, &inst));
        assert_eq!((y, cy, evals), (x.clone(), c, 0));
        for _ in 0..100 {
            let x = Chromosome::random(20, &mut rng);
            let c = fitness(&x, &inst);
            let (y, cy, evals) = local_search(&x, c, 60, |z| fitness(z, &inst));
            assert!(cy <= c);
            assert!(evals <= 60);
            assert_eq!(fitness(&y, &inst), cy);
        }
    }

    #[test]
    fn local_minimum_is_fixed_point() {
        let inst = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Chromosome::random(20, &mut rng);
        let c = fitness(&x, &inst);
        // run to exhaustion of the step schedule
        let (y, cy, _) = local_search(&x, c, usize::MAX, |z| fitness(z, &inst));
        let (z, cz, _) = local_search(&y, cy, usize::MAX, |z| fitness(z, &inst));
        assert_eq!(y, z);
        assert_eq!(cy, cz);
    }

    #[test]
    fn run_single_iteration_and_determinism() {
        let inst = toy();
        let params = DaParams { maxiter: 1, seed: 3, ..Default::default() };
        let out = run(&inst, &params, None).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.best.cost, out.trace[0].incumbent_cost);

        let params = DaParams { maxiter: 200, seed: 9, ..Default::default() };
        let a = run(&inst, &params, None).unwrap();
        let b = run(&inst, &params, None).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best.chromosome, b.best.chromosome);
        assert!(a.trace.windows(2).all(|w| w[1].incumbent_cost <= w[0].incumbent_cost));
    }

    #[test]
    fn restarts_keep_iteration_count() {
        let inst = toy();
        // large ratio forces frequent restarts
        let params = DaParams { maxiter: 50, restart_temp_ratio: 0.5, seed: 1, ..Default::default() };
        let out = run(&inst, &params, None).unwrap();
        assert!(out.restarts > 0);
        assert_eq!(out.trace.len(), 50);
        let iters: Vec<usize> = out.trace.iter().map(|r| r.iteration).collect();
        assert_eq!(iters, (1..=50).collect::<Vec<_>>());
        assert!(out.trace.iter().any(|r| r.temperature == params.initial_temp && r.iteration > 1));
    }

    #[test]
    fn warm_start_is_used() {
        let inst = toy();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = Chromosome::random(20, &mut rng);
        let fw = fitness(&w, &inst);
        let params = DaParams { maxiter: 5, ..Default::default() };
        let out = run(&inst, &params, Some(&w)).unwrap();
        assert!(out.best.cost <= fw);
        let bad = Chromosome::random(19, &mut rng);
        assert!(run(&inst, &params, Some(&bad)).is_err());
    }
}
