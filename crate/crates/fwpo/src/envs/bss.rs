//! Bike-sharing rebalancing: allocate `m` bikes across `n` capacity-limited
//! stations each step, pay for moving bikes, unserved demand, and overflow.
//!
//! The action is the target allocation (must sum to `m`, entries in
//! `[0, capacity]`), rounded internally to integers by largest remainder.
//! Demands are drawn per ordered station pair. Bikes are conserved: unserved
//! demand costs but does not move bikes, and overflow costs while the bikes
//! stay put, so counts always sum to `m`.

use super::{require_feasible, ConstraintSet, EnvError, Environment, Step};
use crate::linalg::Matrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct BssConfig {
    pub stations: usize,
    pub bikes: u64,
    pub capacity: u64,
    pub w_move: f64,
    pub w_lost: f64,
    pub w_over: f64,
    pub demand_lo: u64,
    pub demand_hi: u64,
    pub episode_length: usize,
}

impl Default for BssConfig {
    fn default() -> Self {
        Self {
            stations: 3,
            bikes: 90,
            capacity: 35,
            w_move: 0.5,
            w_lost: 1.0,
            w_over: 1.0,
            demand_lo: 5,
            demand_hi: 25,
            episode_length: 50,
        }
    }
}

pub struct BikeShareEnv {
    cfg: BssConfig,
    counts: Vec<u64>,
    last_demand: Vec<u64>,
    rng: ChaCha8Rng,
    step_count: usize,
    constraint: ConstraintSet,
}

impl BikeShareEnv {
    pub fn new(cfg: BssConfig) -> Result<Self, EnvError> {
        if cfg.stations < 2 {
            return Err(EnvError::InvalidConfig("need at least two stations".into()));
        }
        if cfg.bikes > cfg.stations as u64 * cfg.capacity {
            return Err(EnvError::InvalidConfig(
                "more bikes than total capacity".into(),
            ));
        }
        if cfg.demand_lo > cfg.demand_hi {
            return Err(EnvError::InvalidConfig(
                "demand_lo exceeds demand_hi".into(),
            ));
        }
        if cfg.episode_length == 0 {
            return Err(EnvError::InvalidConfig(
                "episode_length must be positive".into(),
            ));
        }
        let n = cfg.stations;
        let anchor = even_allocation(cfg.bikes, n);
        let bounds = ConstraintSet::box_set(vec![0.0; n], vec![cfg.capacity as f64; n])?;
        let sum_row = Matrix::from_rows(&[vec![1.0; n]]);
        let total = ConstraintSet::hyperplanes(sum_row, vec![cfg.bikes as f64])?;
        let constraint = ConstraintSet::intersection(
            vec![bounds, total],
            anchor.iter().map(|c| *c as f64).collect(),
        )?;
        let counts = anchor;
        Ok(Self {
            last_demand: vec![0; n * n],
            rng: ChaCha8Rng::seed_from_u64(0),
            step_count: 0,
            cfg,
            counts,
            constraint,
        })
    }

    pub fn config(&self) -> &BssConfig {
        &self.cfg
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs: Vec<f64> = self.counts.iter().map(|c| *c as f64).collect();
        obs.extend(self.last_demand.iter().map(|d| *d as f64));
        obs
    }

    /// Largest-remainder rounding onto `{a ∈ ℤⁿ : Σa = m, 0 ≤ a ≤ C}`.
    fn round_allocation(&self, action: &[f64]) -> Vec<u64> {
        let n = self.cfg.stations;
        let cap = self.cfg.capacity;
        let mut floors = Vec::with_capacity(n);
        let mut remainders = Vec::with_capacity(n);
        for &a in action {
            let clamped = a.clamp(0.0, cap as f64);
            let f = clamped.floor();
            floors.push(f as u64);
            remainders.push(clamped - f);
        }
        let total: u64 = floors.iter().sum();
        let mut deficit = self.cfg.bikes.saturating_sub(total);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            remainders[j]
                .partial_cmp(&remainders[i])
                .unwrap()
                .then(i.cmp(&j))
        });
        // First pass by remainder, then fill arbitrarily below cap; the
        // feasibility invariants guarantee room.
        for &i in &order {
            if deficit == 0 {
                break;
            }
            if floors[i] < cap {
                floors[i] += 1;
                deficit -= 1;
            }
        }
        for i in 0..n {
            while deficit > 0 && floors[i] < cap {
                floors[i] += 1;
                deficit -= 1;
            }
        }
        debug_assert_eq!(floors.iter().sum::<u64>(), self.cfg.bikes);
        floors
    }
}

fn even_allocation(bikes: u64, n: usize) -> Vec<u64> {
    let base = bikes / n as u64;
    let rem = (bikes % n as u64) as usize;
    (0..n).map(|i| base + u64::from(i < rem)).collect()
}

impl Environment for BikeShareEnv {
    fn state_dim(&self) -> usize {
        let n = self.cfg.stations;
        n + n * n
    }

    fn action_dim(&self) -> usize {
        self.cfg.stations
    }

    fn episode_length(&self) -> usize {
        self.cfg.episode_length
    }

    fn constraint_of(&self, _state: &[f64]) -> ConstraintSet {
        self.constraint.clone()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.counts = even_allocation(self.cfg.bikes, self.cfg.stations);
        self.last_demand = vec![0; self.cfg.stations * self.cfg.stations];
        self.step_count = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        require_feasible(&self.constraint, action, self.step_count)?;
        let n = self.cfg.stations;
        let alloc = self.round_allocation(action);

        let move_halves: u64 = alloc
            .iter()
            .zip(&self.counts)
            .map(|(a, c)| a.abs_diff(*c))
            .sum();
        let move_cost = 0.5 * move_halves as f64;

        let mut demand = vec![0u64; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    demand[i * n + j] = self
                        .rng
                        .random_range(self.cfg.demand_lo..=self.cfg.demand_hi);
                }
            }
        }

        let mut avail = alloc.clone();
        let mut inflow = vec![0u64; n];
        let mut lost = 0u64;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let want = demand[i * n + j];
                let served = want.min(avail[i]);
                avail[i] -= served;
                inflow[j] += served;
                lost += want - served;
            }
        }
        let new_counts: Vec<u64> = avail.iter().zip(&inflow).map(|(a, f)| a + f).collect();
        debug_assert_eq!(new_counts.iter().sum::<u64>(), self.cfg.bikes);
        let overflow: u64 = new_counts
            .iter()
            .map(|c| c.saturating_sub(self.cfg.capacity))
            .sum();

        let reward = -(self.cfg.w_move * move_cost
            + self.cfg.w_lost * lost as f64
            + self.cfg.w_over * overflow as f64);

        self.counts = new_counts;
        self.last_demand = demand;
        self.step_count += 1;
        Ok(Step {
            next_state: self.observation(),
            reward,
            done: self.step_count >= self.cfg.episode_length,
        })
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.cfg.stations;
        (vec![0.0; n], vec![self.cfg.capacity as f64; n])
    }

    fn tabular_state_count(&self) -> Option<usize> {
        Some(compositions(self.cfg.bikes, self.cfg.stations) as usize)
    }

    /// Ranks the bike-count part of the observation among all compositions of
    /// `m` into `n` nonnegative parts; the demand part of the observation is
    /// ignored for tabular indexing.
    fn tabular_state_index(&self, state: &[f64]) -> Option<usize> {
        let n = self.cfg.stations;
        let counts: Vec<u64> = state[..n].iter().map(|c| c.round() as u64).collect();
        if counts.iter().sum::<u64>() != self.cfg.bikes {
            return None;
        }
        let mut rank = 0u64;
        let mut remaining = self.cfg.bikes;
        for i in 0..n - 1 {
            for v in 0..counts[i] {
                rank += compositions(remaining - v, n - 1 - i);
            }
            remaining -= counts[i];
        }
        Some(rank as usize)
    }
}

/// Number of ways to write `total` as an ordered sum of `parts` nonnegative
/// integers: C(total + parts − 1, parts − 1).
fn compositions(total: u64, parts: usize) -> u64 {
    if parts == 0 {
        return u64::from(total == 0);
    }
    let k = (parts - 1) as u64;
    let n = total + k;
    let mut result = 1u128;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result as u64
}
