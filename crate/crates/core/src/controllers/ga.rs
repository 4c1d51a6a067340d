//! Genetic-algorithm planner.
//!
//! A genome holds one setpoint level per horizon step, on a 0.5 °C grid
//! spanning the scenario's setpoint bounds. Each generation keeps the best
//! individual (elitism of one) and fills the rest with offspring bred by
//! tournament selection, one-point crossover and per-gene uniform-reset
//! mutation. Individuals are compared with [`preference`], the same order
//! the combinatorial planner uses.
//!
//! All random draws for a generation happen before any of its individuals
//! are scored, so the random stream is consumed in the same sequence no
//! matter how evaluation is scheduled.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate_strategy, preference, ControlError, ControlStrategy, Evaluation, Forecast, ObjectiveWeights, Plan,
};
use crate::emulator::{ZoneParams, ZoneState};
use crate::scenarios::SetpointBounds;

/// Setpoint resolution of the genome, °C.
pub const GRID_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 40,
            generations: 60,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            tournament_size: 3,
            seed: 42,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let fail = |m: String| Err(ControlError::Config(m));
        if self.population < 2 {
            return fail(format!("population must be >= 2, got {}", self.population));
        }
        if self.tournament_size < 1 || self.tournament_size > self.population {
            return fail(format!(
                "tournament size must lie in [1, population], got {}",
                self.tournament_size
            ));
        }
        for (name, rate) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaPlannerConfig {
    pub ga: GaConfig,
    pub weights: ObjectiveWeights,
}

impl GaPlannerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.ga.validate()?;
        self.weights.validate()
    }
}

/// Full record of a GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub setpoints: Vec<f64>,
    pub evaluation: Evaluation,
    /// Best individual of the initial population.
    pub initial_best: (Vec<f64>, Evaluation),
    /// Best-ever evaluation after the initial population and after each generation.
    pub history: Vec<Evaluation>,
    /// Distinct genomes scored.
    pub evaluations: u64,
}

type Genome = Vec<u16>;

/// Setpoint levels of the grid within `bounds`.
pub fn grid_levels(bounds: &SetpointBounds) -> Vec<f64> {
    let count = ((bounds.max - bounds.min) / GRID_STEP + 1e-9).floor() as usize + 1;
    (0..count).map(|i| bounds.min + GRID_STEP * i as f64).collect()
}

struct Scorer<'a> {
    state: ZoneState,
    forecast: &'a Forecast,
    params: &'a ZoneParams,
    weights: &'a ObjectiveWeights,
    levels: Vec<f64>,
    cache: HashMap<Genome, Evaluation>,
}

impl Scorer<'_> {
    fn setpoints(&self, genome: &[u16]) -> Vec<f64> {
        genome.iter().map(|&g| self.levels[g as usize]).collect()
    }

    fn score_all(&mut self, population: &[Genome]) -> Result<Vec<Evaluation>, ControlError> {
        let mut fresh: Vec<&Genome> = population.iter().filter(|g| !self.cache.contains_key(*g)).collect();
        fresh.sort();
        fresh.dedup();
        let scored: Vec<(Genome, Evaluation)> = fresh
            .par_iter()
            .map(|g| {
                let setpoints = self.setpoints(g);
                evaluate_strategy(&setpoints, self.state, self.forecast, self.params, self.weights)
                    .map(|(e, _)| ((*g).clone(), e))
            })
            .collect::<Result<_, _>>()?;
        self.cache.extend(scored);
        Ok(population.iter().map(|g| self.cache[g]).collect())
    }

    fn better(&self, a: (&Genome, &Evaluation), b: (&Genome, &Evaluation)) -> bool {
        preference(a.1, &self.setpoints(a.0), b.1, &self.setpoints(b.0)).is_lt()
    }

    fn argbest(&self, population: &[Genome], scores: &[Evaluation]) -> usize {
        (1..population.len()).fold(0, |best, i| {
            if self.better((&population[i], &scores[i]), (&population[best], &scores[best])) {
                i
            } else {
                best
            }
        })
    }
}

/// Run the GA and return the full search record.
pub fn ga_search(
    state: ZoneState,
    forecast: &Forecast,
    bounds: SetpointBounds,
    horizon: usize,
    params: &ZoneParams,
    weights: &ObjectiveWeights,
    config: &GaConfig,
) -> Result<GaOutcome, ControlError> {
    config.validate()?;
    weights.validate()?;
    if !(bounds.min < bounds.max) {
        return Err(ControlError::Config(format!(
            "setpoint bounds [{}, {}] are empty",
            bounds.min, bounds.max
        )));
    }
    if horizon != forecast.len() {
        return Err(ControlError::LengthMismatch {
            strategy: horizon,
            forecast: forecast.len(),
        });
    }

    let levels = grid_levels(&bounds);
    let n_levels = levels.len() as u16;
    let mut scorer = Scorer {
        state,
        forecast,
        params,
        weights,
        levels,
        cache: HashMap::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population: Vec<Genome> = (0..config.population)
        .map(|_| (0..horizon).map(|_| rng.random_range(0..n_levels)).collect())
        .collect();
    let mut scores = scorer.score_all(&population)?;

    let first = scorer.argbest(&population, &scores);
    let mut best = (population[first].clone(), scores[first]);
    let initial_best = (scorer.setpoints(&best.0), best.1);
    let mut history = vec![best.1];

    for _ in 0..config.generations {
        let elite = scorer.argbest(&population, &scores);
        let mut next = Vec::with_capacity(config.population);
        next.push(population[elite].clone());

        while next.len() < config.population {
            let a = tournament(&scorer, &population, &scores, config.tournament_size, &mut rng);
            let b = tournament(&scorer, &population, &scores, config.tournament_size, &mut rng);
            let (mut c1, mut c2) = (population[a].clone(), population[b].clone());
            if horizon >= 2 && rng.random::<f64>() < config.crossover_rate {
                let cut = rng.random_range(1..horizon);
                c1[cut..].copy_from_slice(&population[b][cut..]);
                c2[cut..].copy_from_slice(&population[a][cut..]);
            }
            for child in [&mut c1, &mut c2] {
                for gene in child.iter_mut() {
                    if rng.random::<f64>() < config.mutation_rate {
                        *gene = rng.random_range(0..n_levels);
                    }
                }
            }
            next.push(c1);
            if next.len() < config.population {
                next.push(c2);
            }
        }

        population = next;
        scores = scorer.score_all(&population)?;
        let gen_best = scorer.argbest(&population, &scores);
        if scorer.better((&population[gen_best], &scores[gen_best]), (&best.0, &best.1)) {
            best = (population[gen_best].clone(), scores[gen_best]);
        }
        history.push(best.1);
    }

    Ok(GaOutcome {
        setpoints: scorer.setpoints(&best.0),
        evaluation: best.1,
        initial_best,
        history,
        evaluations: scorer.cache.len() as u64,
    })
}

fn tournament(
    scorer: &Scorer<'_>,
    population: &[Genome],
    scores: &[Evaluation],
    size: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut winner = rng.random_range(0..population.len());
    for _ in 1..size {
        let challenger = rng.random_range(0..population.len());
        if scorer.better(
            (&population[challenger], &scores[challenger]),
            (&population[winner], &scores[winner]),
        ) {
            winner = challenger;
        }
    }
    winner
}

/// Plan the horizon with the GA; the lowest-ranked individual ever seen wins.
pub fn ga_plan(
    state: ZoneState,
    forecast: &Forecast,
    bounds: SetpointBounds,
    horizon: usize,
    params: &ZoneParams,
    weights: &ObjectiveWeights,
    config: &GaConfig,
) -> Result<Plan, ControlError> {
    let outcome = ga_search(state, forecast, bounds, horizon, params, weights, config)?;
    let (_, predicted) = evaluate_strategy(&outcome.setpoints, state, forecast, params, weights)?;
    Ok(Plan {
        strategy: ControlStrategy {
            horizon_start: forecast.start,
            setpoints: outcome.setpoints,
        },
        candidates_evaluated: outcome.evaluations,
        predicted: Some(predicted),
        evaluation: Some(outcome.evaluation),
    })
}
