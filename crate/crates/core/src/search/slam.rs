use std::collections::BinaryHeap;

use super::heap::HeapEntry;
use super::{Outcome, Search};
use crate::estimator::Evaluation;

/// One pop from the search heap: the popped time and the largest time
/// still left in the heap afterwards.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopRecord {
    pub function: usize,
    pub popped_time: f64,
    pub remaining_max: Option<f64>,
}

/// relative change, with 0/0 treated as no change
fn relative(delta: f64, base: f64) -> f64 {
    if delta == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        (delta / base).abs()
    }
}

impl Search {
    /// Start every function at the smallest rung; keep bumping the slowest
    /// function one rung until the estimate meets `slo`. A function at the
    /// top rung leaves the heap for good; an empty heap means infeasible.
    pub(crate) fn run_slam(&self, slo: f64, pops: Option<&mut Vec<PopRecord>>) -> Outcome {
        self.greedy(slo, pops, None)
    }

    fn greedy(&self, slo: f64, mut pops: Option<&mut Vec<PopRecord>>, mut path: Option<&mut Trajectory>) -> Outcome {
        let e = &self.estimator;
        let top_rung = e.rung_count() - 1;
        let mut eval = Evaluation::new(e, &vec![0usize; e.function_count()]);
        let mut heap: BinaryHeap<HeapEntry> =
            (0..e.function_count()).map(|f| HeapEntry { time: e.function_time(f, 0), function: f }).collect();
        let mut outcome = Outcome { evaluations: 1, ..Outcome::default() };
        let mut bumped = None;
        loop {
            if let Some(path) = path.as_deref_mut() {
                path.push(bumped, eval.time(), outcome.evaluations);
            }
            if eval.time() <= slo {
                outcome.rungs = Some(eval.rungs().to_vec());
                return outcome;
            }
            let Some(top) = heap.pop() else {
                return outcome;
            };
            outcome.iterations += 1;
            if let Some(log) = pops.as_deref_mut() {
                log.push(PopRecord {
                    function: top.function,
                    popped_time: top.time,
                    remaining_max: heap.peek().map(|h| h.time),
                });
            }
            let f = top.function;
            let r = eval.rungs()[f];
            bumped = None;
            if r < top_rung {
                eval.set(f, r + 1);
                heap.push(HeapEntry { time: e.function_time(f, r + 1), function: f });
                outcome.evaluations += 1;
                bumped = Some(f);
            }
        }
    }

    /// Continue from the greedy SLO result: pop the slowest function and
    /// bump it while the relative cost increase stays within the relative
    /// time saving, otherwise freeze it. Bumps that would break the SLO
    /// are rejected. Returns the cheapest configuration visited.
    pub(crate) fn run_min_cost(&self, slo: f64) -> Outcome {
        let start = self.run_slam(slo, None);
        let Some(rungs) = start.rungs.clone() else {
            return start;
        };
        let e = &self.estimator;
        let top_rung = e.rung_count() - 1;
        let mut outcome = Outcome { rungs: None, ..start };
        let mut eval = Evaluation::new(e, &rungs);
        let mut time = eval.time();
        let mut cost = eval.cost();
        let mut best = (cost, time, rungs.clone());
        let mut heap: BinaryHeap<HeapEntry> =
            (0..e.function_count()).map(|f| HeapEntry { time: e.function_time(f, rungs[f]), function: f }).collect();

        while let Some(top) = heap.pop() {
            outcome.iterations += 1;
            let f = top.function;
            let r = eval.rungs()[f];
            if r >= top_rung {
                continue;
            }
            eval.set(f, r + 1);
            let new_time = eval.time();
            let new_cost = eval.cost();
            outcome.evaluations += 1;
            let cost_change = relative(new_cost - cost, cost);
            let time_saving = relative(time - new_time, time);
            if cost_change <= time_saving && new_time <= slo {
                time = new_time;
                cost = new_cost;
                heap.push(HeapEntry { time: e.function_time(f, r + 1), function: f });
                if cost < best.0 || (cost == best.0 && time < best.1) {
                    best = (cost, time, eval.rungs().to_vec());
                }
            } else {
                eval.set(f, r);
            }
        }
        outcome.rungs = Some(best.2);
        outcome
    }

    /// Binary search on the SLO between zero and the greedy result's time,
    /// tightening the upper bound to each found configuration's time,
    /// until the bounds are within `gamma`.
    ///
    /// The greedy pop order does not depend on the SLO, only where it
    /// stops, so every probe is answered from one full greedy run.
    pub(crate) fn run_min_time(&self, slo: f64, gamma: f64) -> Outcome {
        let start = self.run_slam(slo, None);
        let Some(first) = start.rungs.clone() else {
            return start;
        };
        let e = &self.estimator;
        let mut path = Trajectory::default();
        self.greedy(f64::NEG_INFINITY, None, Some(&mut path));
        let last = path.times.len() - 1;
        let mut best = None;
        let mut outcome = Outcome { rungs: None, ..start };
        let (mut lo, mut hi) = (0.0_f64, e.time(&first));
        while hi - lo > gamma {
            let mid = (lo + hi) / 2.0;
            let stop = path.first_within(mid);
            let state = stop.unwrap_or(last);
            outcome.iterations += state;
            outcome.evaluations += path.evaluations[state];
            match stop {
                Some(j) => {
                    hi = path.times[j];
                    best = Some(j);
                }
                None => lo = mid,
            }
        }
        outcome.rungs = Some(match best {
            Some(j) => path.rungs_at(j, e.function_count()),
            None => first,
        });
        outcome
    }
}

/// Every state of a greedy run: the function bumped to reach it, its
/// estimated time and the evaluations spent so far.
#[derive(Debug, Default)]
struct Trajectory {
    bumps: Vec<Option<usize>>,
    times: Vec<f64>,
    evaluations: Vec<usize>,
    prefix_min: Vec<f64>,
}

impl Trajectory {
    fn push(&mut self, bump: Option<usize>, time: f64, evaluations: usize) {
        let min = self.prefix_min.last().map_or(time, |&m| m.min(time));
        self.bumps.push(bump);
        self.times.push(time);
        self.evaluations.push(evaluations);
        self.prefix_min.push(min);
    }

    /// First state whose time is within `slo`.
    fn first_within(&self, slo: f64) -> Option<usize> {
        let j = self.prefix_min.partition_point(|&m| !(m <= slo));
        (j < self.times.len()).then_some(j)
    }

    fn rungs_at(&self, state: usize, functions: usize) -> Vec<usize> {
        let mut rungs = vec![0; functions];
        for f in self.bumps[..=state].iter().flatten() {
            rungs[*f] += 1;
        }
        rungs
    }
}
