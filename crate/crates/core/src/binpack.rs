//! One-dimensional bin packing: instances, feasible packings, the bin-count
//! cost, the agent's action semantics and the annealing perturbation kernel.
//!
//! An instance has `n` items and `n` available bins, so a feasible packing
//! always exists (one item per bin). Every operation that mutates a
//! [`Packing`] keeps it feasible.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};

/// Absolute slack allowed on load/capacity comparisons.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// An immutable bin packing problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    sizes: Vec<f64>,
    capacity: f64,
    seed: u64,
}

impl Instance {
    /// Draws `n` item sizes i.i.d. uniform on (0, 1] with unit capacity.
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("instance needs at least one item"));
        }
        let mut rng = crate::rng::from_seed(seed);
        // random::<f64>() is uniform on [0, 1); reflect to (0, 1].
        let sizes = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
        Ok(Self {
            sizes,
            capacity: 1.0,
            seed,
        })
    }

    /// Builds an instance from explicit sizes. The seed is recorded as 0.
    pub fn from_sizes(sizes: Vec<f64>, capacity: f64) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("instance needs at least one item"));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::invalid(format!(
                "capacity must be positive, got {capacity}"
            )));
        }
        if let Some((j, s)) = sizes
            .iter()
            .enumerate()
            .find(|(_, &s)| !(s.is_finite() && s > 0.0 && s <= capacity))
        {
            return Err(Error::invalid(format!(
                "item {j} has size {s}, outside (0, {capacity}]"
            )));
        }
        Ok(Self {
            sizes,
            capacity,
            seed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `ceil(sum(sizes) / capacity)`, never below 1.
    pub fn lower_bound(&self) -> usize {
        let total: f64 = self.sizes.iter().sum();
        let bound = (total / self.capacity - FEASIBILITY_TOLERANCE).ceil();
        (bound as usize).max(1)
    }

    /// Text form: `capacity <c>`, `n <n>`, then one size per line, all floats
    /// with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "capacity {:.16e}", self.capacity);
        let _ = writeln!(out, "n {}", self.n());
        for s in &self.sizes {
            let _ = writeln!(out, "{s:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::invalid(format!("instance text: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());

        let capacity = match lines
            .next()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
        {
            Some(parts) if parts.len() == 2 && parts[0] == "capacity" => parts[1]
                .parse::<f64>()
                .map_err(|e| bad(format!("capacity: {e}")))?,
            other => return Err(bad(format!("expected `capacity <float>`, got {other:?}"))),
        };
        let n = match lines
            .next()
            .map(|l| l.split_whitespace().collect::<Vec<_>>())
        {
            Some(parts) if parts.len() == 2 && parts[0] == "n" => parts[1]
                .parse::<usize>()
                .map_err(|e| bad(format!("n: {e}")))?,
            other => return Err(bad(format!("expected `n <int>`, got {other:?}"))),
        };
        let sizes = lines
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| bad(format!("size `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if sizes.len() != n {
            return Err(bad(format!(
                "header says n = {n} but found {} sizes",
                sizes.len()
            )));
        }
        Self::from_sizes(sizes, capacity)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Fixed-length policy input: normalized bin loads, normalized item sizes,
/// normalized index of the presented item and its normalized size.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn len_for(n: usize) -> usize {
        2 * n + 2
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Which branch of the action rule fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    SameBin,
    Moved,
    Swapped,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionOutcome {
    pub kind: ActionKind,
    /// cost before minus cost after
    pub reward: i64,
}

/// Relocation of one item to another bin, as proposed by the perturbation
/// kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relocation {
    pub item: usize,
    pub to: usize,
}

/// A feasible assignment of items to bins.
#[derive(Debug, Clone)]
pub struct Packing {
    instance: Arc<Instance>,
    assignment: Vec<usize>,
    loads: Vec<f64>,
    counts: Vec<usize>,
    nonempty: usize,
}

impl PartialEq for Packing {
    fn eq(&self, other: &Self) -> bool {
        self.assignment == other.assignment && *self.instance == *other.instance
    }
}

impl Packing {
    /// Validates `assignment` (item j -> bin index) against capacity.
    pub fn from_assignment(instance: Arc<Instance>, assignment: Vec<usize>) -> Result<Self> {
        let n = instance.n();
        if assignment.len() != n {
            return Err(Error::invalid(format!(
                "assignment has {} entries, instance has {n} items",
                assignment.len()
            )));
        }
        let mut loads = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for (j, &b) in assignment.iter().enumerate() {
            if b >= n {
                return Err(Error::invalid(format!(
                    "item {j} assigned to bin {b} >= {n}"
                )));
            }
            loads[b] += instance.sizes[j];
            counts[b] += 1;
        }
        if let Some(b) = loads
            .iter()
            .position(|&l| l > instance.capacity + FEASIBILITY_TOLERANCE)
        {
            return Err(Error::invalid(format!(
                "bin {b} overloaded: {} > {}",
                loads[b], instance.capacity
            )));
        }
        let nonempty = counts.iter().filter(|&&c| c > 0).count();
        Ok(Self {
            instance,
            assignment,
            loads,
            counts,
            nonempty,
        })
    }

    /// Every item alone in its own bin.
    pub fn singletons(instance: Arc<Instance>) -> Self {
        let n = instance.n();
        Self::from_assignment(instance, (0..n).collect())
            .expect("one item per bin is always feasible")
    }

    /// Drops each item into a uniformly drawn bin, redrawing on overflow up to
    /// `2n` times before falling back to the first bin with room.
    pub fn random<R: Rng + ?Sized>(instance: Arc<Instance>, rng: &mut R) -> Self {
        let n = instance.n();
        let cap = instance.capacity + FEASIBILITY_TOLERANCE;
        let mut loads = vec![0.0; n];
        let mut counts = vec![0usize; n];
        let mut assignment = Vec::with_capacity(n);
        for &size in &instance.sizes {
            let drawn = (0..2 * n)
                .map(|_| rng.random_range(0..n))
                .find(|&b| loads[b] + size <= cap);
            let bin = drawn.unwrap_or_else(|| {
                (0..n)
                    .find(|&b| loads[b] + size <= cap)
                    .expect("with n bins for n items an empty bin always remains")
            });
            loads[bin] += size;
            counts[bin] += 1;
            assignment.push(bin);
        }
        let nonempty = counts.iter().filter(|&&c| c > 0).count();
        let packing = Self {
            instance,
            assignment,
            loads,
            counts,
            nonempty,
        };
        debug_assert!(packing.check_invariants().is_ok());
        packing
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    /// Number of non-empty bins.
    pub fn cost(&self) -> usize {
        self.nonempty
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn bin_of(&self, item: usize) -> usize {
        self.assignment[item]
    }

    fn fits(&self, bin: usize, size: f64) -> bool {
        self.loads[bin] + size <= self.instance.capacity + FEASIBILITY_TOLERANCE
    }

    fn relocate(&mut self, item: usize, to: usize) {
        let from = self.assignment[item];
        if from == to {
            return;
        }
        let size = self.instance.sizes[item];
        self.counts[from] -= 1;
        if self.counts[from] == 0 {
            self.loads[from] = 0.0;
            self.nonempty -= 1;
        } else {
            self.loads[from] -= size;
        }
        if self.counts[to] == 0 {
            self.nonempty += 1;
        }
        self.counts[to] += 1;
        self.loads[to] += size;
        self.assignment[item] = to;
    }

    fn check_index(&self, idx: usize, what: &str) -> Result<()> {
        if idx < self.n() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what} index {idx} out of range 0..{}",
                self.n()
            )))
        }
    }

    /// The agent's action: the presented item `i` and the chosen item `j`.
    ///
    /// Same bin: no-op. Otherwise move `i` into `j`'s bin if it fits, else
    /// exchange the two items if both bins stay feasible, else no-op.
    pub fn apply_action(&mut self, i: usize, j: usize) -> Result<ActionOutcome> {
        self.check_index(i, "presented item")?;
        self.check_index(j, "chosen item")?;
        let before = self.cost() as i64;
        let (bin_i, bin_j) = (self.assignment[i], self.assignment[j]);
        let kind = if bin_i == bin_j {
            ActionKind::SameBin
        } else if self.fits(bin_j, self.instance.sizes[i]) {
            self.relocate(i, bin_j);
            ActionKind::Moved
        } else {
            let (si, sj) = (self.instance.sizes[i], self.instance.sizes[j]);
            let cap = self.instance.capacity + FEASIBILITY_TOLERANCE;
            if self.loads[bin_i] - si + sj <= cap && self.loads[bin_j] - sj + si <= cap {
                self.assignment[i] = bin_j;
                self.assignment[j] = bin_i;
                self.loads[bin_i] += sj - si;
                self.loads[bin_j] += si - sj;
                ActionKind::Swapped
            } else {
                ActionKind::Infeasible
            }
        };
        let reward = before - self.cost() as i64;
        debug_assert!(kind != ActionKind::Swapped || reward == 0);
        debug_assert!(self.touched_bins_feasible(&[bin_i, bin_j]));
        Ok(ActionOutcome { kind, reward })
    }

    /// Draws a uniform item and a uniform other bin, retrying up to 10 times
    /// until the relocation fits. `None` means the candidate equals `self`.
    pub fn propose_relocation<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Relocation> {
        let n = self.n();
        if n < 2 {
            return None;
        }
        for _ in 0..10 {
            let item = rng.random_range(0..n);
            let from = self.assignment[item];
            let mut to = rng.random_range(0..n - 1);
            if to >= from {
                to += 1;
            }
            if self.fits(to, self.instance.sizes[item]) {
                return Some(Relocation { item, to });
            }
        }
        None
    }

    /// Cost change the relocation would cause.
    pub fn relocation_delta(&self, mv: Relocation) -> i64 {
        let from = self.assignment[mv.item];
        if from == mv.to {
            return 0;
        }
        let opened = i64::from(self.counts[mv.to] == 0);
        let emptied = i64::from(self.counts[from] == 1);
        opened - emptied
    }

    pub fn apply_relocation(&mut self, mv: Relocation) {
        let from = self.assignment[mv.item];
        debug_assert!(self.fits(mv.to, self.instance.sizes[mv.item]) || from == mv.to);
        self.relocate(mv.item, mv.to);
        debug_assert!(self.touched_bins_feasible(&[from, mv.to]));
    }

    /// Candidate solution produced by the annealing perturbation kernel.
    pub fn random_perturb<R: Rng + ?Sized>(&self, rng: &mut R) -> Packing {
        let mut candidate = self.clone();
        if let Some(mv) = self.propose_relocation(rng) {
            candidate.apply_relocation(mv);
        }
        candidate
    }

    /// Encodes the packing together with the presented item `i`.
    pub fn observe(&self, i: usize) -> Result<Observation> {
        self.check_index(i, "presented item")?;
        let n = self.n();
        let cap = self.instance.capacity;
        let mut v = Vec::with_capacity(Observation::len_for(n));
        v.extend(self.loads.iter().map(|l| (l / cap).clamp(0.0, 1.0)));
        v.extend(
            self.instance
                .sizes
                .iter()
                .map(|s| (s / cap).clamp(0.0, 1.0)),
        );
        v.push(i as f64 / n as f64);
        v.push((self.instance.sizes[i] / cap).clamp(0.0, 1.0));
        Ok(Observation(v))
    }

    fn touched_bins_feasible(&self, bins: &[usize]) -> bool {
        bins.iter()
            .all(|&b| self.loads[b] <= self.instance.capacity + FEASIBILITY_TOLERANCE)
    }

    /// Full recomputation of the cached loads, counts and cost.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let n = self.n();
        let mut loads = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for (j, &b) in self.assignment.iter().enumerate() {
            if b >= n {
                return Err(format!("item {j} in bin {b} >= {n}"));
            }
            loads[b] += self.instance.sizes[j];
            counts[b] += 1;
        }
        for b in 0..n {
            if (loads[b] - self.loads[b]).abs() > FEASIBILITY_TOLERANCE {
                return Err(format!(
                    "bin {b}: cached load {} != {}",
                    self.loads[b], loads[b]
                ));
            }
            if self.loads[b] > self.instance.capacity + FEASIBILITY_TOLERANCE {
                return Err(format!("bin {b} overloaded: {}", self.loads[b]));
            }
            if counts[b] != self.counts[b] {
                return Err(format!(
                    "bin {b}: cached count {} != {}",
                    self.counts[b], counts[b]
                ));
            }
        }
        let nonempty = self.loads.iter().filter(|&&l| l > 0.0).count();
        if nonempty != self.nonempty {
            return Err(format!("cached cost {} != {nonempty}", self.nonempty));
        }
        Ok(())
    }
}
