//! Network utility maximization: allocate per-path packet rates for a set of
//! flows subject to link-capacity constraints, with a proportional-fairness
//! reward `Σ_f log(throughput / (drop^0.5 · latency^1.5))`.
//!
//! Latency follows the clamped congestion curve `base / (1 − min(ρ, 0.99))`
//! where `ρ` is link utilization, so latency grows rapidly near capacity
//! without a packet-level simulation. The model is deterministic; the state
//! only advances a demand phase index.

use super::{require_feasible, ConstraintSet, EnvError, Environment, Step};
use crate::linalg::Matrix;

const EPS: f64 = 1e-3;
const UTILIZATION_CLAMP: f64 = 0.99;

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub src: usize,
    pub dst: usize,
    /// Candidate paths as lists of edge indices.
    pub paths: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct NetUtilConfig {
    /// Directed edges `(from, to)`.
    pub edges: Vec<(usize, usize)>,
    pub capacities: Vec<f64>,
    pub base_latency: Vec<f64>,
    pub flows: Vec<FlowSpec>,
    /// Upper bound on each (flow, path) rate.
    pub rate_bound: f64,
    pub episode_length: usize,
    /// Length of the cyclic demand phase exposed in the observation.
    pub phases: usize,
}

impl Default for NetUtilConfig {
    /// Four-node diamond with six directed edges and two flows, two candidate
    /// paths each.
    fn default() -> Self {
        let edges = vec![(0, 1), (0, 2), (1, 3), (2, 3), (1, 2), (0, 3)];
        Self {
            capacities: vec![50.0; edges.len()],
            base_latency: vec![1.0; edges.len()],
            edges,
            flows: vec![
                FlowSpec {
                    src: 0,
                    dst: 3,
                    paths: vec![vec![0, 2], vec![1, 3]],
                },
                FlowSpec {
                    src: 0,
                    dst: 3,
                    paths: vec![vec![5], vec![0, 4, 3]],
                },
            ],
            rate_bound: 50.0,
            episode_length: 50,
            phases: 8,
        }
    }
}

pub struct NetUtilEnv {
    cfg: NetUtilConfig,
    /// Action index ranges per flow.
    flow_slices: Vec<(usize, usize)>,
    constraint: ConstraintSet,
    phase: usize,
    step_count: usize,
}

impl NetUtilEnv {
    pub fn new(cfg: NetUtilConfig) -> Result<Self, EnvError> {
        let ne = cfg.edges.len();
        if ne == 0 || cfg.flows.is_empty() {
            return Err(EnvError::InvalidConfig("need edges and flows".into()));
        }
        if cfg.capacities.len() != ne || cfg.base_latency.len() != ne {
            return Err(EnvError::InvalidConfig(
                "per-edge vectors must match edge count".into(),
            ));
        }
        if cfg.capacities.iter().any(|c| *c <= 0.0) {
            return Err(EnvError::InvalidConfig(
                "capacities must be positive".into(),
            ));
        }
        if cfg.rate_bound <= 0.0 || cfg.episode_length == 0 || cfg.phases == 0 {
            return Err(EnvError::InvalidConfig(
                "rate bound, episode length, phases must be positive".into(),
            ));
        }
        for (fi, flow) in cfg.flows.iter().enumerate() {
            if flow.paths.is_empty() {
                return Err(EnvError::InvalidConfig(format!("flow {fi} has no paths")));
            }
            for (pi, path) in flow.paths.iter().enumerate() {
                let mut at = flow.src;
                for &ei in path {
                    let (u, v) = *cfg.edges.get(ei).ok_or_else(|| {
                        EnvError::InvalidConfig(format!(
                            "flow {fi} path {pi}: edge {ei} out of range"
                        ))
                    })?;
                    if u != at {
                        return Err(EnvError::InvalidConfig(format!(
                            "flow {fi} path {pi} is not connected at edge {ei}"
                        )));
                    }
                    at = v;
                }
                if at != flow.dst {
                    return Err(EnvError::InvalidConfig(format!(
                        "flow {fi} path {pi} does not reach the destination"
                    )));
                }
            }
        }

        let mut flow_slices = Vec::with_capacity(cfg.flows.len());
        let mut dim = 0;
        for flow in &cfg.flows {
            flow_slices.push((dim, dim + flow.paths.len()));
            dim += flow.paths.len();
        }

        // Rates are bounded per (flow, path) and per edge by capacity; edges
        // no path crosses carry no load and need no row.
        let bounds = ConstraintSet::box_set(vec![0.0; dim], vec![cfg.rate_bound; dim])?;
        let mut rows = Vec::new();
        let mut row_caps = Vec::new();
        for ei in 0..ne {
            let mut row = vec![0.0; dim];
            let mut used = false;
            for (fi, flow) in cfg.flows.iter().enumerate() {
                for (pi, path) in flow.paths.iter().enumerate() {
                    if path.contains(&ei) {
                        row[flow_slices[fi].0 + pi] = 1.0;
                        used = true;
                    }
                }
            }
            if used {
                rows.push(row);
                row_caps.push(cfg.capacities[ei]);
            }
        }
        if rows.is_empty() {
            return Err(EnvError::InvalidConfig("no path crosses any edge".into()));
        }
        let capacity_rows = ConstraintSet::halfspaces(Matrix::from_rows(&rows), row_caps)?;
        let constraint = ConstraintSet::intersection(vec![bounds, capacity_rows], vec![0.0; dim])?;

        Ok(Self {
            cfg,
            flow_slices,
            constraint,
            phase: 0,
            step_count: 0,
        })
    }

    pub fn config(&self) -> &NetUtilConfig {
        &self.cfg
    }

    /// Proportional-fairness utility of a feasible rate vector.
    pub fn utility(&self, rates: &[f64]) -> f64 {
        let ne = self.cfg.edges.len();
        let mut load = vec![0.0; ne];
        for (fi, flow) in self.cfg.flows.iter().enumerate() {
            for (pi, path) in flow.paths.iter().enumerate() {
                let rate = rates[self.flow_slices[fi].0 + pi];
                for &ei in path {
                    load[ei] += rate;
                }
            }
        }
        let latency: Vec<f64> = (0..ne)
            .map(|ei| {
                let utilization = (load[ei] / self.cfg.capacities[ei]).min(UTILIZATION_CLAMP);
                self.cfg.base_latency[ei] / (1.0 - utilization)
            })
            .collect();
        let drop: Vec<f64> = (0..ne)
            .map(|ei| (load[ei] - self.cfg.capacities[ei]).max(0.0))
            .collect();

        let mut reward = 0.0;
        for (fi, flow) in self.cfg.flows.iter().enumerate() {
            let (start, _) = self.flow_slices[fi];
            let path_rates: Vec<f64> = (0..flow.paths.len()).map(|pi| rates[start + pi]).collect();
            let flow_rate: f64 = path_rates.iter().sum();
            let path_latencies: Vec<f64> = flow
                .paths
                .iter()
                .map(|path| path.iter().map(|&ei| latency[ei]).sum::<f64>())
                .collect();
            let flow_latency = if flow_rate > 0.0 {
                path_latencies
                    .iter()
                    .zip(&path_rates)
                    .map(|(l, r)| l * r)
                    .sum::<f64>()
                    / flow_rate
            } else {
                path_latencies.iter().sum::<f64>() / path_latencies.len() as f64
            };
            let mut flow_drop = 0.0;
            for (pi, path) in flow.paths.iter().enumerate() {
                for &ei in path {
                    if load[ei] > 0.0 {
                        flow_drop += drop[ei] * path_rates[pi] / load[ei];
                    }
                }
            }
            let throughput = flow_rate - flow_drop;
            reward += ((throughput + EPS)
                / ((flow_drop + EPS).powf(0.5) * (flow_latency + EPS).powf(1.5)))
            .ln();
        }
        reward
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.phase as f64 / self.cfg.phases as f64]
    }
}

impl Environment for NetUtilEnv {
    fn state_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        self.flow_slices.last().map_or(0, |(_, end)| *end)
    }

    fn episode_length(&self) -> usize {
        self.cfg.episode_length
    }

    fn constraint_of(&self, _state: &[f64]) -> ConstraintSet {
        self.constraint.clone()
    }

    fn reset(&mut self, _seed: u64) -> Vec<f64> {
        self.phase = 0;
        self.step_count = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<Step, EnvError> {
        require_feasible(&self.constraint, action, self.step_count)?;
        let reward = self.utility(action);
        self.phase = (self.phase + 1) % self.cfg.phases;
        self.step_count += 1;
        Ok(Step {
            next_state: self.observation(),
            reward,
            done: self.step_count >= self.cfg.episode_length,
        })
    }

    fn action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let dim = self.action_dim();
        (vec![0.0; dim], vec![self.cfg.rate_bound; dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_link() -> NetUtilEnv {
        NetUtilEnv::new(NetUtilConfig {
            edges: vec![(0, 1)],
            capacities: vec![50.0],
            base_latency: vec![1.0],
            flows: vec![FlowSpec {
                src: 0,
                dst: 1,
                paths: vec![vec![0]],
            }],
            rate_bound: 50.0,
            episode_length: 10,
            phases: 4,
        })
        .unwrap()
    }

    #[test]
    fn zero_rates_give_finite_deterministic_reward() {
        let mut env = NetUtilEnv::new(NetUtilConfig::default()).unwrap();
        env.reset(0);
        let r1 = env.step(&[0.0; 4]).unwrap().reward;
        assert!(r1.is_finite());
        // Hand evaluation: every flow sees zero throughput and drop with
        // base-latency path means.
        let expect = {
            let per_flow =
                |mean_latency: f64| (EPS / (EPS.powf(0.5) * (mean_latency + EPS).powf(1.5))).ln();
            per_flow(2.0) + per_flow((1.0 + 3.0) / 2.0)
        };
        assert!((r1 - expect).abs() < 1e-12, "{r1} vs {expect}");
    }

    #[test]
    fn half_loaded_link_hand_computed() {
        let mut env = single_link();
        env.reset(0);
        let r = env.step(&[25.0]).unwrap().reward;
        // Utilization 0.5 → latency 2; no drop.
        let expect = ((25.0 + EPS) / (EPS.powf(0.5) * (2.0 + EPS).powf(1.5))).ln();
        assert!((r - expect).abs() < 1e-12);
    }

    #[test]
    fn latency_clamp_engages_near_capacity() {
        let env = single_link();
        // Feasible rate right at capacity: utilization clamps at 0.99.
        let u = env.utility(&[50.0]);
        let latency = 1.0 / (1.0 - UTILIZATION_CLAMP);
        let expect = ((50.0 + EPS) / (EPS.powf(0.5) * (latency + EPS).powf(1.5))).ln();
        assert!((u - expect).abs() < 1e-12);
    }

    #[test]
    fn utility_rises_then_penalizes_congestion() {
        // With latency base/(1−ρ), the utility d/dr changes sign at ρ = 0.4
        // independent of the base latency: it climbs while the link is
        // lightly loaded and falls as the latency penalty dominates near
        // capacity.
        let env = single_link();
        let mut last = f64::NEG_INFINITY;
        for k in 0..10 {
            let rate = EPS + (0.35 * 50.0 - EPS) * k as f64 / 9.0;
            let u = env.utility(&[rate]);
            assert!(u > last, "utility not increasing at grid point {k}");
            last = u;
        }
        assert!(env.utility(&[45.0]) < env.utility(&[20.0]));
    }

    #[test]
    fn capacity_constraint_shared_edges() {
        let env = NetUtilEnv::new(NetUtilConfig::default()).unwrap();
        let set = env.constraint_of(&[0.0]);
        // Flow 0 path 0 uses edge 0, flow 1 path 1 also uses edge 0.
        assert!(set.contains(&[25.0, 0.0, 0.0, 25.0], 1e-9).unwrap());
        assert!(!set.contains(&[30.0, 0.0, 0.0, 30.0], 1e-6).unwrap());
    }

    #[test]
    fn rejects_disconnected_path() {
        let bad = NetUtilConfig {
            flows: vec![FlowSpec {
                src: 0,
                dst: 3,
                paths: vec![vec![2]],
            }],
            ..NetUtilConfig::default()
        };
        assert!(matches!(
            NetUtilEnv::new(bad),
            Err(EnvError::InvalidConfig(_))
        ));
    }

    #[test]
    fn phase_advances_cyclically() {
        let mut env = single_link();
        let mut s = env.reset(0);
        assert_eq!(s, vec![0.0]);
        for k in 1..=9 {
            s = env.step(&[1.0]).unwrap().next_state;
            assert!((s[0] - (k % 4) as f64 / 4.0).abs() < 1e-15);
        }
    }
}
