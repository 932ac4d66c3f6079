//! Exact minimum bin count for small instances by depth-first search.

use std::sync::Arc;

use crate::binpack::{Instance, Packing, FEASIBILITY_TOLERANCE};
use crate::error::{Error, Result};

/// Largest instance the exhaustive search accepts.
pub const MAX_ITEMS: usize = 12;

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub bins: usize,
    pub packing: Packing,
}

struct Search<'a> {
    sizes: &'a [f64],
    order: Vec<usize>,
    cap: f64,
    lower: usize,
    loads: Vec<f64>,
    current: Vec<usize>,
    best: usize,
    best_assignment: Vec<usize>,
}

impl Search<'_> {
    fn descend(&mut self, depth: usize, open: usize) {
        if self.best == self.lower {
            return;
        }
        if depth == self.order.len() {
            if open < self.best {
                self.best = open;
                self.best_assignment.clone_from(&self.current);
            }
            return;
        }
        let item = self.order[depth];
        let size = self.sizes[item];
        for b in 0..open {
            if self.loads[b] + size > self.cap {
                continue;
            }
            // bins with an identical load lead to symmetric subtrees
            if (0..b).any(|prev| self.loads[prev] == self.loads[b]) {
                continue;
            }
            self.loads[b] += size;
            self.current[item] = b;
            self.descend(depth + 1, open);
            self.loads[b] -= size;
        }
        if open + 1 < self.best {
            self.loads[open] = size;
            self.current[item] = open;
            self.descend(depth + 1, open + 1);
            self.loads[open] = 0.0;
        }
    }
}

/// Optimal packing of an instance with at most [`MAX_ITEMS`] items.
pub fn solve(instance: &Arc<Instance>) -> Result<ExactSolution> {
    let n = instance.n();
    if n > MAX_ITEMS {
        return Err(Error::invalid(format!(
            "exact search is capped at {MAX_ITEMS} items, instance has {n}"
        )));
    }
    let sizes = instance.sizes();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sizes[b].total_cmp(&sizes[a]));

    let mut search = Search {
        sizes,
        order,
        cap: instance.capacity() + FEASIBILITY_TOLERANCE,
        lower: instance.lower_bound(),
        loads: vec![0.0; n],
        current: vec![0; n],
        best: n + 1,
        best_assignment: (0..n).collect(),
    };
    search.descend(0, 0);

    let packing = Packing::from_assignment(instance.clone(), search.best_assignment)?;
    debug_assert_eq!(packing.cost(), search.best);
    Ok(ExactSolution {
        bins: search.best,
        packing,
    })
}
