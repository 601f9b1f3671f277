use super::{Outcome, Search, SearchError};
use crate::estimator::Evaluation;
use crate::model::Objective;

/// Largest search space scanned without an explicit override.
pub const DEFAULT_BRUTE_FORCE_LIMIT: u64 = 10_000_000;

impl Search {
    /// Scan every configuration in lexicographic order of the rung vector.
    /// Only strict improvements replace the incumbent, so ties resolve to
    /// the lexicographically smallest memory vector. `limit: None` forces
    /// the scan regardless of size.
    pub(crate) fn run_brute_force(&self, slo: f64, objective: Objective, limit: Option<u64>) -> Result<Outcome, SearchError> {
        let e = &self.estimator;
        let (n, m) = (e.function_count(), e.rung_count());
        let size = u32::try_from(n).ok().and_then(|n| (m as u64).checked_pow(n));
        if let Some(limit) = limit {
            match size {
                Some(s) if s <= limit => {}
                _ => {
                    let shown = size.map_or_else(|| format!("{m}^{n}"), |s| s.to_string());
                    return Err(SearchError::SearchSpaceTooLarge { size: shown, limit });
                }
            }
        }

        let mut rungs = vec![0usize; n];
        let mut eval = Evaluation::new(e, &rungs);
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut evaluations = 0usize;
        loop {
            let time = eval.time();
            evaluations += 1;
            if time <= slo {
                let score = match objective {
                    Objective::Feasible => 0.0,
                    Objective::MinCost => eval.cost(),
                    Objective::MinTime { .. } => time,
                };
                if best.as_ref().is_none_or(|(b, _)| score < *b) {
                    best = Some((score, rungs.clone()));
                }
            }
            // odometer: last function fastest
            let mut pos = n;
            loop {
                if pos == 0 {
                    return Ok(Outcome { rungs: best.map(|b| b.1), iterations: evaluations, evaluations });
                }
                pos -= 1;
                rungs[pos] += 1;
                if rungs[pos] < m {
                    eval.set(pos, rungs[pos]);
                    break;
                }
                rungs[pos] = 0;
                eval.set(pos, 0);
            }
        }
    }
}
