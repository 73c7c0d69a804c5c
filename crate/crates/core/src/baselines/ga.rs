use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay_model::{dims, DecisionVariables, DelayModel};
use crate::error::{invalid, Result};
use crate::queueing::{delay_or_inf, DelayBound, STABILITY_MARGIN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover: f64,
    /// Per-gene mutation probability; `None` means one over the chromosome length.
    pub mutation: Option<f64>,
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 60,
            generations: 200,
            tournament: 3,
            crossover: 0.9,
            mutation: None,
            elitism: 2,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.tournament == 0 {
            return Err(invalid("population", "need population >= 2 and tournament >= 1"));
        }
        if self.elitism > self.population {
            return Err(invalid("elitism", "cannot exceed the population"));
        }
        if !(0.0..=1.0).contains(&self.crossover) || self.mutation.is_some_and(|m| !(0.0..=1.0).contains(&m)) {
            return Err(invalid("crossover", "probabilities must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Gene `k = j * U + u` per IoT. A sub-band already taken by an earlier IoT is replaced by
/// the next free one, cyclically.
pub(crate) fn decode(genes: &[usize], nj: usize, nu: usize) -> Vec<(usize, usize)> {
    let mut used = vec![false; nu];
    genes
        .iter()
        .map(|&g| {
            let j = (g / nu) % nj;
            let mut u = g % nu;
            while used[u] {
                u = (u + 1) % nu;
            }
            used[u] = true;
            (j, u)
        })
        .collect()
}

struct Fitness<'a> {
    model: &'a DelayModel<'a>,
    costs: Array3<f64>,
}

impl Fitness<'_> {
    /// Mean exact service delay of a decoded chromosome, `+inf` when a MEC overloads.
    fn eval(&self, genes: &[usize]) -> f64 {
        let sc = self.model.scenario;
        let (ni, nj, _, nu) = dims(sc);
        let links = decode(genes, nj, nu);
        let mut load = vec![0.0; nj];
        let mut count = vec![0usize; nj];
        let mut comm = 0.0;
        for (i, &(j, u)) in links.iter().enumerate() {
            load[j] += sc.arrival_rates[i];
            count[j] += 1;
            comm += self.costs[[i, j, u]];
        }
        let cap = sc.queue.capacity() - STABILITY_MARGIN;
        let mut comp = 0.0;
        for j in 0..nj {
            if count[j] == 0 {
                continue;
            }
            if load[j] >= cap {
                return f64::INFINITY;
            }
            comp += count[j] as f64 * delay_or_inf(DelayBound::Exact, &sc.queue, load[j]);
        }
        (comm + comp) / ni as f64
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let k = rng.gen_range(0..fitness.len());
        if fitness[k] < fitness[best] || (fitness[k] == fitness[best] && k < best) {
            best = k;
        }
    }
    best
}

fn ranked(fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
    order
}

/// Genetic search over binary associations with relays, powers and positions held.
/// The current association seeds the population, so with elitism the result is never worse.
pub fn genetic_association(model: &DelayModel, vars: &DecisionVariables, config: &GaConfig, seed: u64) -> Result<Array3<f64>> {
    config.validate()?;
    let (ni, nj, _, nu) = dims(model.scenario);
    let tables = model.relay_tables(vars);
    let fit = Fitness {
        model,
        costs: model.link_costs(&tables, vars),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = nj * nu;
    let current: Vec<usize> = (0..ni)
        .map(|i| vars.link_of(i).map(|(j, u)| j * nu + u).unwrap_or(i % cells))
        .collect();
    let mut pop = vec![current];
    while pop.len() < config.population {
        pop.push((0..ni).map(|_| rng.gen_range(0..cells)).collect());
    }
    let rate = config.mutation.unwrap_or(1.0 / ni as f64);
    let mut fitness: Vec<f64> = pop.par_iter().map(|g| fit.eval(g)).collect();
    let best = run_generations(&mut rng, &mut pop, &mut fitness, config, rate, cells, |g| fit.eval(g));
    let mut z = Array3::zeros((ni, nj, nu));
    for (i, (j, u)) in decode(&pop[best], nj, nu).into_iter().enumerate() {
        z[[i, j, u]] = 1.0;
    }
    Ok(z)
}

/// Evolves `pop` in place and returns the index of its best member.
pub(crate) fn run_generations<F>(
    rng: &mut ChaCha8Rng,
    pop: &mut Vec<Vec<usize>>,
    fitness: &mut Vec<f64>,
    config: &GaConfig,
    rate: f64,
    cells: usize,
    eval: F,
) -> usize
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    let len = pop[0].len();
    for _ in 0..config.generations {
        let order = ranked(fitness);
        let mut next: Vec<Vec<usize>> = order.iter().take(config.elitism).map(|&k| pop[k].clone()).collect();
        while next.len() < config.population {
            let a = tournament(rng, fitness, config.tournament);
            let b = tournament(rng, fitness, config.tournament);
            let mut child = pop[a].clone();
            if len > 1 && rng.gen::<f64>() < config.crossover {
                let cut = rng.gen_range(1..len);
                child[cut..].copy_from_slice(&pop[b][cut..]);
            }
            for g in child.iter_mut() {
                if rate > 0.0 && rng.gen::<f64>() < rate {
                    *g = rng.gen_range(0..cells);
                }
            }
            next.push(child);
        }
        *fitness = next.par_iter().map(|g| eval(g)).collect();
        *pop = next;
    }
    ranked(fitness)[0]
}
