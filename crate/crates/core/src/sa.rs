//! Simulated annealing with an exponential cooling schedule.
//!
//! The temperature follows `T(q) = t_m * exp(a * q / y)` with
//! `a = -ln(t_m / t_0)`, so it starts at `t_m` and reaches `t_0` at `q = y`.
//! Within an iteration the candidate is judged first and the temperature is
//! updated afterwards, with `q` incremented last; the first two proposals
//! are therefore both judged at `t_m`.
//!
//! The engine works over any [`Anneal`] state; [`Packing`] is the one used
//! throughout this crate.

use rand::Rng;

use crate::binpack::{Packing, Relocation};
use crate::error::{Error, Result};

/// A state the annealer can perturb and score.
pub trait Anneal: Clone {
    type Move: Copy;

    fn cost(&self) -> f64;

    /// Random neighbour, or `None` when the candidate equals the current state.
    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Self::Move>;

    /// `cost(after) - cost(before)` for `mv`.
    fn delta(&self, mv: Self::Move) -> f64;

    fn apply(&mut self, mv: Self::Move);
}

impl Anneal for Packing {
    type Move = Relocation;

    fn cost(&self) -> f64 {
        Packing::cost(self) as f64
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Relocation> {
        self.propose_relocation(rng)
    }

    fn delta(&self, mv: Relocation) -> f64 {
        self.relocation_delta(mv) as f64
    }

    fn apply(&mut self, mv: Relocation) {
        self.apply_relocation(mv);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaConfig {
    /// Initial temperature.
    pub t_max: f64,
    /// Temperature reached at the end of the annealing horizon.
    pub t_min: f64,
    /// Annealing horizon (step count of a fixed-length run).
    pub steps: usize,
    /// Convergence mode stops after this many steps without a new best.
    pub patience: usize,
    /// Hard ceiling on convergence-mode steps.
    pub step_cap: usize,
    /// Record `(step, best_cost)` every this many steps; `None` disables.
    pub trace_stride: Option<usize>,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            t_max: 5.0,
            t_min: 0.01,
            steps: 5000,
            patience: 50_000,
            step_cap: 2_000_000,
            trace_stride: Some(1000),
        }
    }
}

impl SaConfig {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_min > 0.0) {
            return Err(Error::invalid(format!(
                "t0 must be positive, got {}",
                self.t_min
            )));
        }
        if !(self.t_max.is_finite() && self.t_max >= self.t_min) {
            return Err(Error::invalid(format!(
                "tm must be finite and >= t0, got tm = {}, t0 = {}",
                self.t_max, self.t_min
            )));
        }
        if self.patience == 0 {
            return Err(Error::invalid("convergence patience must be >= 1"));
        }
        if self.step_cap < self.patience {
            return Err(Error::invalid("step cap must be >= convergence patience"));
        }
        if self.trace_stride == Some(0) {
            return Err(Error::invalid("trace stride must be >= 1"));
        }
        Ok(())
    }

    /// Temperature at schedule position `q`. A zero-length horizon is
    /// degenerate and yields `t_max`.
    pub fn temperature(&self, q: usize) -> f64 {
        if self.steps == 0 {
            return self.t_max;
        }
        let a = -(self.t_max / self.t_min).ln();
        self.t_max * (a * q as f64 / self.steps as f64).exp()
    }
}

/// Metropolis criterion: non-worsening moves always pass, a worsening move
/// of `delta` passes with probability `exp(-delta / temperature)`.
pub fn accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    if delta <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-delta / temperature).exp()
}

#[derive(Debug, Clone)]
pub struct SaResult<S> {
    pub best: S,
    pub best_cost: f64,
    pub last: S,
    pub last_cost: f64,
    pub steps_run: usize,
    pub accepted: usize,
    pub cost_trace: Vec<(usize, f64)>,
}

enum Stop {
    Fixed(usize),
    Converge { patience: usize, cap: usize },
}

fn anneal<S: Anneal, R: Rng + ?Sized>(
    initial: &S,
    cfg: &SaConfig,
    stop: Stop,
    rng: &mut R,
) -> SaResult<S> {
    let mut current = initial.clone();
    let mut current_cost = current.cost();
    let mut best = current.clone();
    let mut best_cost = current_cost;
    let mut trace = Vec::new();
    if cfg.trace_stride.is_some() {
        trace.push((0, best_cost));
    }

    let hold_after_horizon = matches!(stop, Stop::Converge { .. });
    let mut temperature = cfg.t_max;
    let mut q = 0usize;
    let mut accepted = 0usize;
    let mut since_best = 0usize;
    let mut step = 0usize;

    loop {
        match stop {
            Stop::Fixed(y) if step >= y => break,
            Stop::Converge { patience, cap } if step >= cap || since_best >= patience => break,
            _ => {}
        }
        step += 1;

        if let Some(mv) = current.propose(rng) {
            let delta = current.delta(mv);
            if accept(delta, temperature, rng) {
                current.apply(mv);
                current_cost += delta;
                accepted += 1;
            }
        }
        if current_cost < best_cost {
            best_cost = current_cost;
            best = current.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }

        temperature = if hold_after_horizon && q >= cfg.steps {
            cfg.t_min
        } else {
            cfg.temperature(q)
        };
        q += 1;

        if let Some(stride) = cfg.trace_stride {
            if step.is_multiple_of(stride) {
                trace.push((step, best_cost));
            }
        }
    }
    if let Some(&(last_step, _)) = trace.last() {
        if last_step != step {
            trace.push((step, best_cost));
        }
    }

    SaResult {
        best,
        best_cost,
        last: current,
        last_cost: current_cost,
        steps_run: step,
        accepted,
        cost_trace: trace,
    }
}

/// Exactly `cfg.steps` annealing iterations.
pub fn run<S: Anneal, R: Rng + ?Sized>(initial: &S, cfg: &SaConfig, rng: &mut R) -> SaResult<S> {
    anneal(initial, cfg, Stop::Fixed(cfg.steps), rng)
}

/// Anneals over the `cfg.steps` horizon, then holds `t_min` until the best
/// cost has not improved for `cfg.patience` steps or `cfg.step_cap` is hit.
pub fn run_to_convergence<S: Anneal, R: Rng + ?Sized>(
    initial: &S,
    cfg: &SaConfig,
    rng: &mut R,
) -> SaResult<S> {
    let stop = Stop::Converge {
        patience: cfg.patience,
        cap: cfg.step_cap,
    };
    anneal(initial, cfg, stop, rng)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::binpack::Instance;
    use crate::rng::from_seed;

    fn cfg(t_max: f64, t_min: f64, steps: usize) -> SaConfig {
        SaConfig {
            t_max,
            t_min,
            steps,
            ..SaConfig::default()
        }
    }

    #[test]
    fn schedule_endpoints() {
        let c = cfg(5.0, 0.01, 5000);
        assert_eq!(c.temperature(0), 5.0);
        assert!((c.temperature(5000) - 0.01).abs() / 0.01 < 1e-12);
        let mid = c.temperature(2500);
        assert!((mid - 0.223_606_797_749_979).abs() < 1e-12, "{mid}");
    }

    #[test]
    fn schedule_strictly_decreasing() {
        let c = cfg(5.0, 0.01, 200);
        for q in 0..200 {
            assert!(c.temperature(q + 1) < c.temperature(q));
        }
    }

    #[test]
    fn degenerate_horizon_returns_t_max() {
        assert_eq!(cfg(5.0, 0.01, 0).temperature(0), 5.0);
    }

    #[test]
    fn validate_rejects_bad_configs() {
        assert!(cfg(0.01, 5.0, 10).validate().is_err());
        assert!(cfg(5.0, 0.0, 10).validate().is_err());
        let mut c = cfg(5.0, 0.01, 10);
        c.step_cap = 10;
        c.patience = 20;
        assert!(c.validate().is_err());
        assert!(SaConfig::default().validate().is_ok());
    }

    #[test]
    fn accept_limits() {
        let mut rng = from_seed(0);
        assert!(accept(0.0, 1e-12, &mut rng));
        assert!(accept(-3.0, 1e-12, &mut rng));
        assert!((0..1000).all(|_| !accept(1.0, 1e-12, &mut rng)));
    }

    #[test]
    fn accept_frequency_matches_metropolis() {
        let mut rng = from_seed(17);
        let trials = 100_000;
        let hits = (0..trials).filter(|_| accept(1.0, 5.0, &mut rng)).count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - (-0.2f64).exp()).abs() < 0.01, "{freq}");
    }

    #[test]
    fn zero_steps_returns_initial() {
        let inst = Arc::new(Instance::generate(10, 1).unwrap());
        let p = Packing::random(inst, &mut from_seed(1));
        let r = run(&p, &cfg(5.0, 0.01, 0), &mut from_seed(2));
        assert_eq!(r.steps_run, 0);
        assert_eq!(r.best, p);
        assert_eq!(r.last, p);
        assert_eq!(r.best_cost, p.cost() as f64);
    }

    #[test]
    fn greedy_limit_improves_singletons() {
        let mut improved = 0;
        for seed in 0..20 {
            let inst = Arc::new(Instance::generate(10, 300 + seed).unwrap());
            let p = Packing::singletons(inst);
            let r = run(&p, &cfg(1e-9, 1e-9, 10_000), &mut from_seed(seed));
            if r.best_cost < p.cost() as f64 {
                improved += 1;
            }
        }
        assert!(improved >= 19, "{improved}/20");
    }

    #[test]
    fn trace_is_monotone_and_bounded() {
        let inst = Arc::new(Instance::generate(40, 8).unwrap());
        let p = Packing::random(inst, &mut from_seed(8));
        let mut c = cfg(5.0, 0.01, 20_000);
        c.trace_stride = Some(100);
        let r = run(&p, &c, &mut from_seed(9));
        assert_eq!(r.steps_run, 20_000);
        assert!(r.cost_trace.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(r.cost_trace.last().unwrap().0, 20_000);
        assert!(r.best_cost <= r.last_cost);
        assert!(r.best_cost <= p.cost() as f64);
        assert_eq!(r.last.cost() as f64, r.last_cost);
        r.last.check_invariants().unwrap();
        r.best.check_invariants().unwrap();
    }

    #[test]
    fn deterministic_given_seed() {
        let inst = Arc::new(Instance::generate(30, 2).unwrap());
        let p = Packing::random(inst, &mut from_seed(2));
        let c = cfg(5.0, 0.01, 5000);
        let a = run(&p, &c, &mut from_seed(77));
        let b = run(&p, &c, &mut from_seed(77));
        assert_eq!(a.best, b.best);
        assert_eq!(a.last, b.last);
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.cost_trace, b.cost_trace);
    }

    #[test]
    fn convergence_single_step_cap() {
        let inst = Arc::new(Instance::generate(10, 3).unwrap());
        let p = Packing::random(inst, &mut from_seed(3));
        let mut c = cfg(5.0, 0.01, 100);
        c.patience = 1;
        c.step_cap = 1;
        assert_eq!(run_to_convergence(&p, &c, &mut from_seed(4)).steps_run, 1);
    }

    #[test]
    fn convergence_from_optimum_stops_after_patience() {
        let inst = Arc::new(Instance::generate(8, 21).unwrap());
        let opt = crate::exact::solve(&inst).unwrap();
        let mut c = cfg(5.0, 0.01, 1000);
        c.patience = 3000;
        c.step_cap = 100_000;
        let r = run_to_convergence(&opt.packing, &c, &mut from_seed(5));
        assert_eq!(r.best_cost, opt.bins as f64);
        assert_eq!(r.steps_run, 3000);
    }
}
