//! Experiment execution: one JSONL file per experiment, one record per
//! iteration per seed plus a summary record per seed.

pub mod aggregate;
pub mod records;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::binpack::Instance;
use crate::error::{Error, Result};
use crate::policy::checkpoint;
use crate::rlho::{self, Mode, RlhoConfig, Trainer};
use crate::sa::SaConfig;

pub use aggregate::{aggregate, AggregateReport};
pub use records::{IterationRecord, Record, SummaryRecord};

/// Environment variable capping the number of seeds run concurrently.
pub const THREADS_ENV: &str = "RLHO_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    /// Reset-per-episode training, then converged evaluation of the learned
    /// initialization.
    ModeA,
    /// Alternating RL / annealing on a persistent packing.
    ModeB,
    PureRl,
    RandomThenHo,
    /// Cold-start annealing to convergence.
    PureSa,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::ModeA,
        Experiment::ModeB,
        Experiment::PureRl,
        Experiment::RandomThenHo,
        Experiment::PureSa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::ModeA => "mode-a",
            Experiment::ModeB => "mode-b",
            Experiment::PureRl => "pure-rl",
            Experiment::RandomThenHo => "random-then-ho",
            Experiment::PureSa => "pure-sa",
        }
    }

    pub fn default_iterations(self) -> usize {
        match self {
            Experiment::ModeA => 10_000,
            Experiment::ModeB | Experiment::PureRl => 2000,
            Experiment::RandomThenHo | Experiment::PureSa => 1,
        }
    }

    pub fn default_y(self) -> usize {
        match self {
            Experiment::ModeB | Experiment::PureRl => 1000,
            _ => 5000,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.as_str()).collect();
                Error::invalid(format!(
                    "unknown experiment `{s}`, expected one of {names:?}"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub n: usize,
    pub x: usize,
    pub y: usize,
    pub t_max: f64,
    pub t_min: f64,
    pub iterations: usize,
    pub seeds: Vec<u64>,
    pub out_path: PathBuf,
    pub instance_seed: u64,
    /// Overrides the generated instance; `n` must match the file.
    pub instance_file: Option<PathBuf>,
    pub patience: usize,
    pub step_cap: usize,
    pub learning_rate: f64,
    pub hidden: usize,
    /// Where mode-a writes `policy-seed<seed>.txt` checkpoints.
    pub checkpoint_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment, n: usize, out_path: impl Into<PathBuf>) -> Self {
        let sa = SaConfig::default();
        let ppo = crate::policy::PpoConfig::default();
        Self {
            experiment,
            n,
            x: 128,
            y: experiment.default_y(),
            t_max: sa.t_max,
            t_min: sa.t_min,
            iterations: experiment.default_iterations(),
            seeds: vec![1, 2, 3, 4, 5],
            out_path: out_path.into(),
            instance_seed: 7,
            instance_file: None,
            patience: sa.patience,
            step_cap: sa.step_cap,
            learning_rate: ppo.learning_rate,
            hidden: ppo.hidden,
            checkpoint_dir: None,
        }
    }

    /// Effective `(x, y)`: pure-rl never anneals, pure-sa never acts.
    pub fn effective_xy(&self) -> (usize, usize) {
        match self.experiment {
            Experiment::PureRl => (self.x, 0),
            Experiment::PureSa => (0, self.y),
            _ => (self.x, self.y),
        }
    }

    fn sa_config(&self) -> SaConfig {
        SaConfig {
            t_max: self.t_max,
            t_min: self.t_min,
            steps: self.y,
            patience: self.patience,
            step_cap: self.step_cap,
            trace_stride: None,
        }
    }

    fn rlho_config(&self, mode: Mode) -> RlhoConfig {
        let mut cfg = RlhoConfig::new(mode, self.x, self.y, self.iterations);
        cfg.sa = self.sa_config();
        cfg.ppo.learning_rate = self.learning_rate;
        cfg.ppo.hidden = self.hidden;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "seeds must be distinct: {:?}",
                self.seeds
            )));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        self.sa_config().validate()?;
        match self.experiment {
            Experiment::ModeA | Experiment::ModeB | Experiment::PureRl => {
                let mode = match self.experiment {
                    Experiment::ModeA => Mode::LearnInit,
                    Experiment::ModeB => Mode::Alternating,
                    _ => Mode::PureRl,
                };
                self.rlho_config(mode).validate()
            }
            _ => Ok(()),
        }
    }

    fn load_instance(&self) -> Result<Arc<Instance>> {
        let inst = match &self.instance_file {
            Some(path) => Instance::read(path)?,
            None => Instance::generate(self.n, self.instance_seed)?,
        };
        if inst.n() != self.n {
            return Err(Error::invalid(format!(
                "instance has {} items but n = {}",
                inst.n(),
                self.n
            )));
        }
        Ok(Arc::new(inst))
    }
}

fn elapsed_ms(since: Instant) -> u64 {
    since.elapsed().as_millis() as u64
}

fn run_seed(spec: &ExperimentSpec, instance: &Arc<Instance>, seed: u64) -> Result<Vec<Record>> {
    let started = Instant::now();
    let mode_name = spec.experiment.as_str().to_string();
    let (x, y) = spec.effective_xy();
    let n = instance.n();
    let mut out = Vec::with_capacity(spec.iterations + 1);

    let mode = match spec.experiment {
        Experiment::ModeA => Some(Mode::LearnInit),
        Experiment::ModeB => Some(Mode::Alternating),
        Experiment::PureRl => Some(Mode::PureRl),
        Experiment::RandomThenHo | Experiment::PureSa => None,
    };

    let summary = if let Some(mode) = mode {
        let mut trainer = Trainer::new(instance.clone(), spec.rlho_config(mode), seed)?;
        for result in trainer.episodes() {
            let r = result?;
            out.push(Record::Iteration(IterationRecord {
                iter: r.iteration,
                mode: mode_name.clone(),
                n,
                x,
                y,
                cost_s0: r.cost_s0,
                cost_sx: r.cost_sx,
                cost_sxy: r.cost_sxy,
                r_n: r.ho_reward,
                best_cost: r.best_cost,
                policy_loss: Some(r.stats.policy_loss),
                value_loss: Some(r.stats.value_loss),
                entropy: Some(r.stats.entropy),
                wall_ms: elapsed_ms(started),
                seed,
            }));
        }
        let headline = if mode == Mode::LearnInit {
            if let Some(dir) = &spec.checkpoint_dir {
                checkpoint::save(
                    trainer.params(),
                    &dir.join(format!("policy-seed{seed}.txt")),
                )?;
            }
            rlho::evaluate_initialization(
                trainer.params(),
                instance,
                x,
                &spec.sa_config(),
                seed,
                0,
            )?
            .best_cost
        } else {
            trainer.best_cost()
        };
        SummaryRecord {
            mode: mode_name,
            n,
            x,
            y,
            seed,
            iterations: spec.iterations as u64,
            policy_steps: trainer.policy_steps(),
            train_best_cost: Some(trainer.best_cost()),
            best_cost: headline,
            wall_ms: elapsed_ms(started),
        }
    } else {
        let mut best = usize::MAX;
        for restart in 0..spec.iterations as u64 {
            let run = rlho::random_then_ho(instance, x, &spec.sa_config(), seed, restart)?;
            best = best.min(run.best_cost);
            out.push(Record::Iteration(IterationRecord {
                iter: restart,
                mode: mode_name.clone(),
                n,
                x,
                y,
                cost_s0: run.cost_s0,
                cost_sx: run.cost_sx,
                cost_sxy: run.best_cost,
                r_n: run.cost_sx as i64 - run.best_cost as i64,
                best_cost: best,
                policy_loss: None,
                value_loss: None,
                entropy: None,
                wall_ms: elapsed_ms(started),
                seed,
            }));
        }
        SummaryRecord {
            mode: mode_name,
            n,
            x,
            y,
            seed,
            iterations: spec.iterations as u64,
            policy_steps: (x * spec.iterations) as u64,
            train_best_cost: None,
            best_cost: best,
            wall_ms: elapsed_ms(started),
        }
    };
    out.push(Record::Summary(summary));
    Ok(out)
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&k| k > 0)
}

/// Runs every seed of `spec` and writes all records, grouped by seed in the
/// order the seeds are listed. Configuration and output-path problems are
/// reported before any training starts.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<PathBuf> {
    spec.validate()?;
    let instance = spec.load_instance()?;
    if let Some(dir) = &spec.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(&spec.out_path).map_err(|e| Error::io(&spec.out_path, e))?;

    let work = || -> Vec<Result<Vec<Record>>> {
        spec.seeds
            .par_iter()
            .map(|&seed| run_seed(spec, &instance, seed))
            .collect()
    };
    let per_seed = match thread_cap() {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut writer = BufWriter::new(file);
    let write_err = |e| Error::io(&spec.out_path, e);
    for records in per_seed {
        for rec in records? {
            writeln!(writer, "{}", rec.to_line()).map_err(write_err)?;
        }
    }
    writer.flush().map_err(write_err)?;
    Ok(spec.out_path.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.as_str().parse::<Experiment>().unwrap(), e);
        }
        assert!("mode-c".parse::<Experiment>().is_err());
    }

    #[test]
    fn validation_catches_bad_specs() {
        let base = ExperimentSpec::new(Experiment::ModeB, 10, "/tmp/unused.jsonl");
        assert!(base.validate().is_ok());
        let mut s = base.clone();
        s.seeds = vec![];
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.seeds = vec![1, 2, 1];
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.t_min = 10.0;
        assert!(s.validate().is_err());
        let mut s = base.clone();
        s.x = 0;
        assert!(s.validate().is_err());
        let mut s = base;
        s.iterations = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unwritable_path_fails_before_compute() {
        let mut spec = ExperimentSpec::new(Experiment::ModeA, 10, "/nonexistent-dir/x/out.jsonl");
        spec.iterations = 1_000_000;
        let started = Instant::now();
        assert!(matches!(run_experiment(&spec), Err(Error::Io { .. })));
        assert!(started.elapsed().as_secs() < 5);
    }

    #[test]
    fn instance_file_size_must_match() {
        let dir = tempfile::tempdir().unwrap();
        let inst_path = dir.path().join("inst.txt");
        Instance::generate(6, 3).unwrap().write(&inst_path).unwrap();
        let mut spec = ExperimentSpec::new(Experiment::PureSa, 7, dir.path().join("o.jsonl"));
        spec.instance_file = Some(inst_path);
        assert!(matches!(
            run_experiment(&spec),
            Err(Error::InvalidArgument(_))
        ));
    }
}
