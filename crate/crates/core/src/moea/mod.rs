//! Binary NSGA-II over feature subsets.
//!
//! Objectives, both minimized: `g1 = -merit` and `g2 = |subset|`. Merit is
//! evaluated once when an individual is created and cached for its lifetime.
//! Offspring are evaluated in parallel; every evaluation draws from a stream
//! keyed by `(seed, generation, offspring index)`.

mod hypervolume;
mod operators;
mod sort;

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chromosome::Chromosome;
use crate::dataset::{Dataset, DatasetError, Partition};
use crate::learner::{self, LearnerError, LearnerSpec};
use crate::metrics::Metric;
use crate::permutation::{default_metric, merit, merit_mc, EvalContext, PermutationError};
use crate::rng::{self, StreamRng, TAG_FITNESS, TAG_INIT, TAG_OPERATORS};
use crate::scalar::{range, Scalar};

pub use hypervolume::hypervolume_2d;
pub use operators::{bit_flip_mutation, hux_crossover, initial_density, initialize};
pub use sort::{crowding_distance, dominates, fast_nondominated_sort};

#[derive(Debug, Error)]
pub enum MoeaError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("chromosome lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("point {point:?} lies beyond reference {reference:?}")]
    BeyondReference { point: [f64; 2], reference: [f64; 2] },
    #[error("empty front")]
    EmptyFront,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Permutation(#[from] PermutationError),
}

/// Which model and evaluation rows the merit uses: `V1` trains on the
/// training part and evaluates on validation; `V2` trains and evaluates on
/// training plus validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V1,
    V2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-bit flip probability.
    pub mutation_prob: f64,
    pub seed: u64,
    pub variant: Variant,
    /// Initial bit density; `None` means `min(0.5, 100 / w)`.
    pub init_density: Option<f64>,
    /// Shuffle draws averaged per merit evaluation. 1 is a single draw.
    pub merit_repeats: usize,
}

impl Default for MoeaConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 2000,
            crossover_prob: 1.0,
            mutation_prob: 0.02,
            seed: 0,
            variant: Variant::V1,
            init_density: None,
            merit_repeats: 1,
        }
    }
}

impl MoeaConfig {
    pub fn validate(&self) -> Result<(), MoeaError> {
        let bad = |m: String| Err(MoeaError::InvalidConfig(m));
        if self.population_size < 4 || !self.population_size.is_multiple_of(2) {
            return bad(format!("population size {} must be even and at least 4", self.population_size));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} outside [0, 1]"));
            }
        }
        if let Some(d) = self.init_density {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("init_density {d} outside [0, 1]"));
            }
        }
        if self.merit_repeats == 0 {
            return bad("merit_repeats must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual<T> {
    pub chromosome: Chromosome,
    /// `[-merit, cardinality]`.
    pub objectives: [T; 2],
    pub rank: usize,
    pub crowding: T,
}

impl<T: Scalar> Individual<T> {
    pub fn new(chromosome: Chromosome, merit: T) -> Self {
        let cardinality = T::of_usize(chromosome.count_ones());
        Self {
            chromosome,
            objectives: [T::zero() - merit, cardinality],
            rank: 0,
            crowding: T::zero(),
        }
    }

    pub fn merit(&self) -> T {
        T::zero() - self.objectives[0]
    }

    pub fn cardinality(&self) -> usize {
        self.chromosome.count_ones()
    }
}

/// Member of `front` with the highest merit; ties go to the smaller subset,
/// then to the lexicographically smaller chromosome.
pub fn select_final<T: Scalar>(front: &[Individual<T>]) -> Result<&Individual<T>, MoeaError> {
    front
        .iter()
        .min_by(|a, b| {
            a.objectives[0]
                .order(&b.objectives[0])
                .then(a.cardinality().cmp(&b.cardinality()))
                .then(a.chromosome.cmp(&b.chromosome))
        })
        .ok_or(MoeaError::EmptyFront)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    /// Hypervolume of front 0 after initialization and after each generation.
    pub hypervolume: Vec<T>,
    /// Highest merit in the population, same indexing as `hypervolume`.
    pub best_merit: Vec<T>,
    /// Final non-dominated set, distinct chromosomes, by ascending cardinality.
    pub front: Vec<Individual<T>>,
    pub best: Individual<T>,
    pub wall_time_secs: f64,
    pub evaluations: usize,
    pub n_features: usize,
    /// Divisor applied to merit before computing hypervolume.
    pub merit_scale: T,
    pub config: MoeaConfig,
}

/// JSON form of a [`RunTrace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seed: u64,
    pub variant: Variant,
    pub n_features: usize,
    pub hypervolume: Vec<f64>,
    pub best_merit: Vec<f64>,
    /// `(merit, cardinality, bitmask-hex)` per front member.
    pub front: Vec<(f64, usize, String)>,
    pub best: BestRecord,
    pub evaluations: usize,
    pub wall_time_secs: f64,
    pub merit_scale: f64,
    pub config: MoeaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub merit: f64,
    pub cardinality: usize,
    pub mask: String,
    pub features: Vec<usize>,
}

impl<T: Scalar> RunTrace<T> {
    pub fn record(&self) -> TraceRecord {
        TraceRecord {
            seed: self.config.seed,
            variant: self.config.variant,
            n_features: self.n_features,
            hypervolume: self.hypervolume.iter().map(|v| v.as_f64()).collect(),
            best_merit: self.best_merit.iter().map(|v| v.as_f64()).collect(),
            front: self
                .front
                .iter()
                .map(|i| (i.merit().as_f64(), i.cardinality(), i.chromosome.to_hex()))
                .collect(),
            best: BestRecord {
                merit: self.best.merit().as_f64(),
                cardinality: self.best.cardinality(),
                mask: self.best.chromosome.to_hex(),
                features: self.best.chromosome.selected(),
            },
            evaluations: self.evaluations,
            wall_time_secs: self.wall_time_secs,
            merit_scale: self.merit_scale.as_f64(),
            config: self.config.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.record()).unwrap_or_default()
    }
}

/// Runs the selected variant on a partitioned dataset. Only training and
/// validation rows are read.
pub fn evolve<T: Scalar>(
    d: &Dataset<T>,
    part: &Partition,
    learner: &LearnerSpec,
    cfg: &MoeaConfig,
) -> Result<RunTrace<T>, MoeaError> {
    match cfg.variant {
        Variant::V1 => {
            let train = d.subset(&part.train)?;
            let eval = d.subset(&part.validation)?;
            evolve_on(&train, &eval, learner, cfg)
        }
        Variant::V2 => {
            let merged = d.subset(&part.merged())?;
            evolve_on(&merged, &merged, learner, cfg)
        }
    }
}

/// Fits the learner on `train` and searches with merit measured on `eval`.
pub fn evolve_on<T: Scalar>(
    train: &Dataset<T>,
    eval: &Dataset<T>,
    learner: &LearnerSpec,
    cfg: &MoeaConfig,
) -> Result<RunTrace<T>, MoeaError> {
    cfg.validate()?;
    let model = learner::fit(learner, train)?;
    let ctx = EvalContext::new(&model, eval, default_metric(eval.task()))?;
    evolve_with(&ctx, cfg)
}

/// Searches with a prepared evaluation context.
pub fn evolve_with<T: Scalar>(ctx: &EvalContext<'_, T>, cfg: &MoeaConfig) -> Result<RunTrace<T>, MoeaError> {
    let repeats = cfg.merit_repeats;
    nsga2(ctx.n_features(), cfg, merit_scale(ctx), |x, rng| {
        if repeats == 1 {
            merit(ctx, x, rng)
        } else {
            merit_mc(ctx, x, repeats, rng)
        }
    })
}

/// Upper bound on merit used to normalize the first objective for
/// hypervolume: 1 for bounded scores, the target range of the evaluation
/// rows for RMSE.
pub fn merit_scale<T: Scalar>(ctx: &EvalContext<'_, T>) -> T {
    match ctx.metric() {
        Metric::Rmse => ctx
            .eval_rows()
            .target()
            .as_values()
            .and_then(range)
            .map(|(lo, hi)| hi - lo)
            .filter(|r| *r > T::zero())
            .unwrap_or_else(T::one),
        Metric::Acc | Metric::Ba | Metric::Nrmse | Metric::R2 => T::one(),
    }
}

/// NSGA-II with (mu + lambda) replacement over chromosomes of width `w`.
/// `fitness` returns the (nonnegative) merit of a chromosome.
pub fn nsga2<T, F>(w: usize, cfg: &MoeaConfig, merit_scale: T, fitness: F) -> Result<RunTrace<T>, MoeaError>
where
    T: Scalar,
    F: Fn(&Chromosome, &mut StreamRng) -> Result<T, PermutationError> + Sync,
{
    cfg.validate()?;
    if w == 0 {
        return Err(MoeaError::InvalidConfig("no features to select from".into()));
    }
    let start = Instant::now();
    let n = cfg.population_size;
    let evaluate = |chromosomes: Vec<Chromosome>, generation: usize| -> Result<Vec<Individual<T>>, MoeaError> {
        chromosomes
            .into_par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut stream = rng::stream(cfg.seed, &[TAG_FITNESS, generation as u64, i as u64]);
                let m = fitness(&c, &mut stream)?;
                Ok(Individual::new(c, m))
            })
            .collect()
    };

    let mut init_rng = rng::stream(cfg.seed, &[TAG_INIT]);
    let mut ops = rng::stream(cfg.seed, &[TAG_OPERATORS]);
    let mut population = evaluate(initialize(w, cfg, &mut init_rng), 0)?;
    let mut evaluations = n;
    rank_and_crowd(&mut population);

    let mut hypervolume = vec![front_hypervolume(&population, merit_scale, w)?];
    let mut best_merit = vec![top_merit(&population)];

    for generation in 1..=cfg.generations {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = tournament(&population, &mut ops);
            let b = tournament(&population, &mut ops);
            let (c1, c2) = if ops.gen::<f64>() < cfg.crossover_prob {
                hux_crossover(&a.chromosome, &b.chromosome, &mut ops)?
            } else {
                (a.chromosome.clone(), b.chromosome.clone())
            };
            offspring.push(bit_flip_mutation(&c1, cfg.mutation_prob, &mut ops));
            offspring.push(bit_flip_mutation(&c2, cfg.mutation_prob, &mut ops));
        }
        offspring.truncate(n);
        let children = evaluate(offspring, generation)?;
        evaluations += children.len();
        population.extend(children);
        population = environmental_selection(population, n);
        hypervolume.push(front_hypervolume(&population, merit_scale, w)?);
        best_merit.push(top_merit(&population));
    }

    let mut front: Vec<Individual<T>> = Vec::new();
    for ind in population.iter().filter(|i| i.rank == 0) {
        if !front.iter().any(|f| f.chromosome == ind.chromosome) {
            front.push(ind.clone());
        }
    }
    front.sort_by(|a, b| {
        a.cardinality()
            .cmp(&b.cardinality())
            .then(a.objectives[0].order(&b.objectives[0]))
            .then(a.chromosome.cmp(&b.chromosome))
    });
    let best = select_final(&front)?.clone();
    Ok(RunTrace {
        hypervolume,
        best_merit,
        front,
        best,
        wall_time_secs: start.elapsed().as_secs_f64(),
        evaluations,
        n_features: w,
        merit_scale,
        config: cfg.clone(),
    })
}

fn rank_and_crowd<T: Scalar>(population: &mut [Individual<T>]) -> Vec<Vec<usize>> {
    let objectives: Vec<[T; 2]> = population.iter().map(|i| i.objectives).collect();
    let fronts = fast_nondominated_sort(&objectives);
    for (rank, front) in fronts.iter().enumerate() {
        let points: Vec<[T; 2]> = front.iter().map(|&i| objectives[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&points)) {
            population[i].rank = rank;
            population[i].crowding = d;
        }
    }
    fronts
}

/// Fills `n` slots front by front; the last partial front is cut by
/// descending crowding distance.
fn environmental_selection<T: Scalar>(mut combined: Vec<Individual<T>>, n: usize) -> Vec<Individual<T>> {
    let fronts = rank_and_crowd(&mut combined);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for mut front in fronts {
        if chosen.len() + front.len() <= n {
            chosen.extend(front);
            continue;
        }
        front.sort_by(|&a, &b| combined[b].crowding.order(&combined[a].crowding).then(a.cmp(&b)));
        chosen.extend(front.into_iter().take(n - chosen.len()));
        break;
    }
    let mut slots: Vec<Option<Individual<T>>> = combined.into_iter().map(Some).collect();
    chosen.into_iter().filter_map(|i| slots[i].take()).collect()
}

/// Binary tournament on (rank ascending, crowding descending).
fn tournament<'p, T: Scalar, R: Rng + ?Sized>(population: &'p [Individual<T>], rng: &mut R) -> &'p Individual<T> {
    let a = &population[rng.gen_range(0..population.len())];
    let b = &population[rng.gen_range(0..population.len())];
    if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) {
        b
    } else {
        a
    }
}

/// Hypervolume of front 0 with `g1 / merit_scale` and `g2 / w`, reference
/// point `(0, 1)`.
fn front_hypervolume<T: Scalar>(population: &[Individual<T>], merit_scale: T, w: usize) -> Result<T, MoeaError> {
    let width = T::of_usize(w);
    let points: Vec<[T; 2]> = population
        .iter()
        .filter(|i| i.rank == 0)
        .map(|i| [i.objectives[0] / merit_scale, i.objectives[1] / width])
        .collect();
    hypervolume_2d(&points, [T::zero(), T::one()])
}

fn top_merit<T: Scalar>(population: &[Individual<T>]) -> T {
    population.iter().map(Individual::merit).fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Merit rewards features 0..4 and ignores the rest.
    fn planted(x: &Chromosome, _rng: &mut StreamRng) -> Result<f64, PermutationError> {
        let hits = (0..4).filter(|&i| x.get(i)).count() as f64;
        Ok(hits / 4.0)
    }

    /// As `planted`, plus noise drawn from the evaluation stream.
    fn noisy(x: &Chromosome, rng: &mut StreamRng) -> Result<f64, PermutationError> {
        Ok(planted(x, rng)? + rng.gen::<f64>() * 1e-3)
    }

    fn small_cfg() -> MoeaConfig {
        MoeaConfig { population_size: 20, generations: 40, seed: 3, ..Default::default() }
    }

    #[test]
    fn config_validation() {
        assert!(MoeaConfig::default().validate().is_ok());
        assert!(MoeaConfig { population_size: 5, ..Default::default() }.validate().is_err());
        assert!(MoeaConfig { population_size: 2, ..Default::default() }.validate().is_err());
        assert!(MoeaConfig { mutation_prob: 1.5, ..Default::default() }.validate().is_err());
        assert!(MoeaConfig { merit_repeats: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_generations_evaluates_initial_population() {
        let cfg = MoeaConfig { generations: 0, ..small_cfg() };
        let trace = nsga2(30, &cfg, 1.0, planted).unwrap();
        assert_eq!(trace.hypervolume.len(), 1);
        assert_eq!(trace.evaluations, 20);
    }

    #[test]
    fn final_front_is_mutually_non_dominated() {
        let trace = nsga2(30, &small_cfg(), 1.0, planted).unwrap();
        for a in &trace.front {
            for b in &trace.front {
                assert!(!dominates(&a.objectives, &b.objectives));
            }
            assert!(a.objectives[0] <= 0.0);
            assert_eq!(a.objectives[1], a.cardinality() as f64);
        }
        assert!(trace.hypervolume.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn search_finds_planted_subset() {
        let trace = nsga2(30, &MoeaConfig { generations: 150, ..small_cfg() }, 1.0, planted).unwrap();
        assert_eq!(trace.best.chromosome.selected(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn same_seed_same_trace() {
        let a = nsga2(25, &small_cfg(), 1.0, noisy).unwrap();
        let b = nsga2(25, &small_cfg(), 1.0, noisy).unwrap();
        assert_eq!(a.hypervolume, b.hypervolume);
        assert_eq!(a.front, b.front);
        let c = nsga2(25, &MoeaConfig { seed: 4, ..small_cfg() }, 1.0, noisy).unwrap();
        assert_ne!(a.hypervolume, c.hypervolume);
    }

    #[test]
    fn elitism_keeps_best_merit() {
        let trace = nsga2(40, &small_cfg(), 1.0, noisy).unwrap();
        for pair in trace.best_merit.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
        for pair in trace.hypervolume.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12);
        }
    }

    #[test]
    fn select_final_rules() {
        let one = vec![Individual::new(Chromosome::from_indices(3, &[1]), 0.2)];
        assert_eq!(select_final(&one).unwrap(), &one[0]);

        let front = vec![
            Individual::new(Chromosome::from_indices(3, &[0]), 0.10),
            Individual::new(Chromosome::from_indices(3, &[0, 1]), 0.30),
        ];
        assert_eq!(select_final(&front).unwrap().merit(), 0.30);

        let twelve = Chromosome::from_indices(20, &(0..12).collect::<Vec<_>>());
        let nine = Chromosome::from_indices(20, &(0..9).collect::<Vec<_>>());
        let tied = vec![Individual::new(twelve, 0.5), Individual::new(nine.clone(), 0.5)];
        assert_eq!(select_final(&tied).unwrap().chromosome, nine);

        assert!(matches!(select_final::<f64>(&[]), Err(MoeaError::EmptyFront)));
    }

    #[test]
    fn trace_json_shape() {
        let cfg = MoeaConfig { generations: 2, ..small_cfg() };
        let trace = nsga2(10, &cfg, 1.0, planted).unwrap();
        let value: serde_json::Value = serde_json::from_str(&trace.to_json()).unwrap();
        assert_eq!(value["hypervolume"].as_array().unwrap().len(), 3);
        let first = &value["front"][0];
        assert!(first[0].is_f64() && first[1].is_u64() && first[2].is_string());
        assert_eq!(value["config"]["population_size"], 20);
    }
}
