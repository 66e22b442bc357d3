//! Biased random-key genetic algorithm.
//!
//! Each generation copies the elite set unchanged, injects fresh mutants and
//! fills the rest with offspring of biased crossover between elite and
//! nonelite parents. The run stops after `num_generations`, or after
//! `patience` generations without improvement once all restarts are used.
//! A restart replaces the whole population with random chromosomes; the best
//! solution found so far is kept aside and never lost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::instance::Instance;
use crate::rko::{decode, Chromosome, FitnessRecord, KEY_BLOCKS};
use crate::trace::{Improvement, ImprovementLog};

/// Improvements smaller than this do not reset the patience counter.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-9;

/// Hyperparameters, named after the usual BRKGA configuration keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrkgaParams {
    pub population_size: usize,
    /// Elite fraction of the population, in `(0, 0.5)`.
    #[serde(rename = "elite_percentage")]
    pub elite_fraction: f64,
    /// Mutant fraction of the population.
    #[serde(rename = "mutants_percentage")]
    pub mutant_fraction: f64,
    /// Probability that a key is inherited from the elite side, in `(0.5, 1]`.
    pub elite_inherit_prob: f64,
    pub total_parents: usize,
    pub num_elite_parents: usize,
    #[serde(rename = "num_generations")]
    pub max_generations: usize,
    /// Generations without improvement before a restart or stop; `None` disables it.
    pub patience: Option<usize>,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for BrkgaParams {
    fn default() -> Self {
        Self {
            population_size: 200,
            elite_fraction: 0.2,
            mutant_fraction: 0.15,
            elite_inherit_prob: 0.7,
            total_parents: 2,
            num_elite_parents: 1,
            max_generations: 200,
            patience: None,
            max_restarts: 0,
            seed: 0,
        }
    }
}

impl BrkgaParams {
    pub fn elite_count(&self) -> usize {
        ((self.elite_fraction * self.population_size as f64).floor() as usize).max(1)
    }

    pub fn mutant_count(&self) -> usize {
        (self.mutant_fraction * self.population_size as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.population_size;
        if p < 3 {
            return Err(domain(format!("population_size must be >= 3, got {p}")));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction < 0.5) {
            return Err(domain(format!(
                "elite_percentage must be in (0, 0.5), got {}",
                self.elite_fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.mutant_fraction) {
            return Err(domain(format!(
                "mutants_percentage must be in [0, 1], got {}",
                self.mutant_fraction
            )));
        }
        let (pe, pm) = (self.elite_count(), self.mutant_count());
        if 2 * pe >= p {
            return Err(domain(format!("elite set of {pe} must be smaller than half of {p}")));
        }
        if pe + pm > p {
            return Err(domain(format!("elite ({pe}) + mutants ({pm}) exceed population {p}")));
        }
        if !(self.elite_inherit_prob > 0.5 && self.elite_inherit_prob <= 1.0) {
            return Err(domain(format!(
                "elite_inherit_prob must be in (0.5, 1], got {}",
                self.elite_inherit_prob
            )));
        }
        if self.total_parents < 2 {
            return Err(domain("total_parents must be >= 2"));
        }
        if self.num_elite_parents == 0 || self.num_elite_parents >= self.total_parents {
            return Err(domain(format!(
                "num_elite_parents must be in 1..{}, got {}",
                self.total_parents, self.num_elite_parents
            )));
        }
        if self.patience == Some(0) {
            return Err(domain("patience must be >= 1 when set"));
        }
        Ok(())
    }
}

/// Independent random streams, one per purpose, so that results do not
/// depend on how decoding is scheduled across threads.
#[derive(Debug, Clone)]
pub struct BrkgaRng {
    init: ChaCha8Rng,
    mutants: ChaCha8Rng,
    selection: ChaCha8Rng,
    crossover: ChaCha8Rng,
}

impl BrkgaRng {
    pub fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Self { init: stream(0), mutants: stream(1), selection: stream(2), crossover: stream(3) }
    }
}

/// A population sorted by ascending cost.
#[derive(Debug, Clone)]
pub struct Population {
    pub members: Vec<FitnessRecord>,
    pub generation: usize,
    evaluations: u64,
}

impl Population {
    pub fn best(&self) -> &FitnessRecord {
        &self.members[0]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Total decoder calls made for this population lineage.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn evaluate(&mut self, chromosomes: Vec<Chromosome>, instance: &Instance) -> Vec<FitnessRecord> {
        let base = self.evaluations;
        self.evaluations += chromosomes.len() as u64;
        chromosomes
            .into_par_iter()
            .enumerate()
            .map(|(i, x)| {
                let tour = decode(&x, instance).expect("chromosome length checked");
                FitnessRecord::new(x, tour, base + i as u64)
            })
            .collect()
    }

    fn sort(&mut self) {
        self.members.sort_by(|a, b| a.cost.total_cmp(&b.cost));
    }
}

/// Builds the initial population: warm chromosomes first, random ones after.
pub fn init_population(
    instance: &Instance,
    params: &BrkgaParams,
    warm_pool: &[Chromosome],
    rng: &mut BrkgaRng,
) -> Result<Population> {
    params.validate()?;
    let len = KEY_BLOCKS * instance.n_seams();
    if warm_pool.len() > params.population_size {
        return Err(domain(format!(
            "warm pool of {} exceeds population size {}",
            warm_pool.len(),
            params.population_size
        )));
    }
    if let Some(bad) = warm_pool.iter().find(|x| x.len() != len) {
        return Err(domain(format!("warm chromosome has {} keys, expected {len}", bad.len())));
    }
    let mut chromosomes = warm_pool.to_vec();
    while chromosomes.len() < params.population_size {
        chromosomes.push(Chromosome::random(len, &mut rng.init));
    }
    let mut pop = Population { members: Vec::new(), generation: 0, evaluations: 0 };
    pop.members = pop.evaluate(chromosomes, instance);
    pop.sort();
    Ok(pop)
}

/// Parameterized uniform crossover over several parents.
///
/// The first `num_elite_parents` entries of `parents` are the elite group.
/// For each key the elite group is chosen with probability `elite_prob`,
/// then a uniformly drawn member of the chosen group supplies the key. With
/// one elite and one nonelite parent this is the classic biased crossover.
pub fn crossover(
    parents: &[&Chromosome],
    num_elite_parents: usize,
    elite_prob: f64,
    rng: &mut impl Rng,
) -> Chromosome {
    assert!(!parents.is_empty() && num_elite_parents >= 1 && num_elite_parents <= parents.len());
    let len = parents[0].len();
    assert!(parents.iter().all(|p| p.len() == len), "parents differ in length");
    let (elite, rest) = parents.split_at(num_elite_parents);
    let keys = (0..len)
        .map(|i| {
            let group = if rest.is_empty() || rng.random::<f64>() < elite_prob { elite } else { rest };
            let donor = if group.len() == 1 { group[0] } else { group[rng.random_range(0..group.len())] };
            donor.keys()[i]
        })
        .collect();
    Chromosome::new(keys).expect("parent keys are valid")
}

/// Produces the next generation.
pub fn evolve_generation(
    population: &Population,
    params: &BrkgaParams,
    instance: &Instance,
    rng: &mut BrkgaRng,
) -> Population {
    let p = params.population_size;
    let pe = params.elite_count();
    let pm = params.mutant_count();
    let len = population.members[0].chromosome.len();
    let n_nonelite_parents = params.total_parents - params.num_elite_parents;

    let mut fresh = Vec::with_capacity(p - pe);
    for _ in 0..pm {
        fresh.push(Chromosome::random(len, &mut rng.mutants));
    }
    let (elites, nonelites) = population.members.split_at(pe);
    let mut parents: Vec<&Chromosome> = Vec::with_capacity(params.total_parents);
    for _ in 0..p - pe - pm {
        parents.clear();
        for _ in 0..params.num_elite_parents {
            parents.push(&elites[rng.selection.random_range(0..pe)].chromosome);
        }
        for _ in 0..n_nonelite_parents {
            parents.push(&nonelites[rng.selection.random_range(0..nonelites.len())].chromosome);
        }
        fresh.push(crossover(
            &parents,
            params.num_elite_parents,
            params.elite_inherit_prob,
            &mut rng.crossover,
        ));
    }

    let mut next = Population {
        members: Vec::with_capacity(p),
        generation: population.generation + 1,
        evaluations: population.evaluations,
    };
    let evaluated = next.evaluate(fresh, instance);
    next.members.extend_from_slice(elites);
    next.members.extend(evaluated);
    next.sort();
    next
}

/// Best cost after one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_cost: f64,
    pub wall_seconds: f64,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct BrkgaOutcome {
    pub best: FitnessRecord,
    /// Best cost of the initial population.
    pub initial_best: f64,
    /// Global best after each evolved generation.
    pub history: Vec<GenerationStat>,
    pub improvements: Vec<Improvement>,
    pub restarts: usize,
    pub generations: usize,
    pub evaluations: u64,
}

/// Runs BRKGA, optionally seeding the first population with `warm_pool`.
pub fn run(instance: &Instance, params: &BrkgaParams, warm_pool: &[Chromosome]) -> Result<BrkgaOutcome> {
    let mut log = ImprovementLog::start();
    let mut rng = BrkgaRng::new(params.seed);
    let mut pop = init_population(instance, params, warm_pool, &mut rng)?;
    let mut best = pop.best().clone();
    let initial_best = best.cost;
    log.offer(best.cost);

    let mut history = Vec::new();
    let mut stall = 0usize;
    let mut restarts = 0usize;
    let mut evaluations = 0u64;
    let mut generations = 0usize;
    for generation in 1..=params.max_generations {
        pop = evolve_generation(&pop, params, instance, &mut rng);
        generations = generation;
        let candidate = pop.best();
        if candidate.cost < best.cost - IMPROVEMENT_TOLERANCE {
            stall = 0;
        } else {
            stall += 1;
        }
        if candidate.cost < best.cost {
            best = candidate.clone();
            log.offer(best.cost);
        }
        history.push(GenerationStat { generation, best_cost: best.cost, wall_seconds: log.elapsed() });

        if params.patience.is_some_and(|k| stall >= k) {
            if restarts >= params.max_restarts {
                break;
            }
            restarts += 1;
            stall = 0;
            evaluations += pop.evaluations();
            pop = init_population(instance, params, &[], &mut rng)?;
            pop.generation = generation;
            if pop.best().cost < best.cost {
                best = pop.best().clone();
                log.offer(best.cost);
            }
        }
    }
    evaluations += pop.evaluations();
    Ok(BrkgaOutcome {
        best,
        initial_best,
        history,
        improvements: log.into_entries(),
        restarts,
        generations,
        evaluations,
    })
}
