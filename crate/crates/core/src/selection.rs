//! Cost estimation and budget-constrained method selection.

use crate::domain::{Budget, CostEstimate, HardwareProfile, RuntimeSource, SelectionResult, TaskProfile};
use crate::error::{Error, Result};
pub use crate::selectors::MethodRanker;

/// Monetary cost of running for `runtime_s` seconds at the hardware's
/// hourly price.
pub fn estimate_cost(hw: &HardwareProfile, runtime_s: f64) -> CostEstimate {
    CostEstimate {
        amount: hw.price_per_hour * (runtime_s / 3600.0),
        runtime_source: RuntimeSource::Predicted,
    }
}

/// Picks the fastest predicted method whose estimated cost fits `budget`.
/// Ties go to the lower cost, then the lower method index.
pub fn select(ranker: &dyn MethodRanker, task: &TaskProfile, hw: &HardwareProfile, budget: Budget) -> Result<SelectionResult> {
    let ranking = ranker.rank_methods(task, hw)?;
    if ranking.is_empty() {
        return Err(Error::Integrity("ranker returned no methods".into()));
    }
    let costed: Vec<(usize, f64)> = ranking
        .iter()
        .enumerate()
        .map(|(i, r)| (i, estimate_cost(hw, r.predicted_runtime_s).amount))
        .collect();
    let key = |&(i, cost): &(usize, f64)| (ranking[i].predicted_runtime_s, cost, ranking[i].method.index());
    let better = |a: &(usize, f64), b: &(usize, f64)| {
        let (ra, ca, ia) = key(a);
        let (rb, cb, ib) = key(b);
        ra.total_cmp(&rb).then(ca.total_cmp(&cb)).then(ia.cmp(&ib))
    };
    let feasible: Vec<(usize, f64)> = costed.iter().copied().filter(|&(_, c)| c <= budget.limit()).collect();
    let Some(&(best, cost)) = feasible.iter().min_by(|a, b| better(a, b)) else {
        let &(cheap, cheapest_cost) = costed
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(ranking[a.0].method.index().cmp(&ranking[b.0].method.index())))
            .expect("non-empty ranking");
        return Err(Error::Infeasible {
            budget: budget.limit(),
            cheapest_cost,
            cheapest_method: ranking[cheap].method.to_string(),
        });
    };
    Ok(SelectionResult {
        method: ranking[best].method,
        predicted_runtime_s: ranking[best].predicted_runtime_s,
        cost: CostEstimate {
            amount: cost,
            runtime_source: RuntimeSource::Predicted,
        },
        feasible_set_size: feasible.len(),
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{MethodConfig, RankedMethod};
    use crate::selectors::rank_scores;

    fn hw(price: f64) -> HardwareProfile {
        HardwareProfile {
            id: "l4x4".into(),
            gpu_class: "L4".into(),
            gpu_count: 4,
            memory_gb: 24.0,
            price_per_hour: price,
            description: "L4".into(),
        }
    }

    fn task() -> TaskProfile {
        TaskProfile {
            id: "t".into(),
            description: "chat".into(),
            batch_size: 16,
            prompt_count: 1000,
            source_tag: "sharegpt".into(),
            model: "llama".into(),
        }
    }

    fn bs16(_: &TaskProfile, _: &HardwareProfile) -> Result<Vec<RankedMethod>> {
        Ok(rank_scores([
            (MethodConfig::NONE, 1435.27),
            (MethodConfig::CHUNKED_PREFILL, 128.70),
            (MethodConfig::CONTINUOUS_BATCHING, 146.44),
            (MethodConfig::PREFIX_CACHING, 101.10),
            (MethodConfig::ALL, 96.21),
        ]))
    }

    fn bs256(_: &TaskProfile, _: &HardwareProfile) -> Result<Vec<RankedMethod>> {
        Ok(rank_scores([
            (MethodConfig::NONE, 1424.99),
            (MethodConfig::CHUNKED_PREFILL, 114.44),
            (MethodConfig::CONTINUOUS_BATCHING, 107.40),
            (MethodConfig::PREFIX_CACHING, 68.46),
            (MethodConfig::ALL, 80.65),
        ]))
    }

    #[test]
    fn cost_arithmetic() {
        assert_eq!(estimate_cost(&hw(2.0), 1800.0).amount, 1.0);
        assert_eq!(estimate_cost(&hw(0.0), 12345.0).amount, 0.0);
        let c = estimate_cost(&hw(1.2), 96.21).amount;
        assert_eq!(format!("{c:.6}"), "0.032070");
    }

    #[test]
    fn unlimited_budget_picks_fastest() {
        let r = select(&bs16, &task(), &hw(2.8), Budget::unlimited()).unwrap();
        assert_eq!(r.method, MethodConfig::ALL);
        assert_eq!(r.predicted_runtime_s, 96.21);
        assert_eq!(r.feasible_set_size, 5);
        let r = select(&bs256, &task(), &hw(2.8), Budget::unlimited()).unwrap();
        assert_eq!(r.method, MethodConfig::PREFIX_CACHING);
    }

    #[test]
    fn budget_between_fastest_and_next() {
        // Cost equals runtime in currency units at this price, so the fastest
        // method is also the cheapest and a tight budget keeps only it.
        let h = hw(3600.0);
        let r = select(&bs16, &task(), &h, Budget::new(100.0).unwrap()).unwrap();
        assert_eq!(r.method, MethodConfig::ALL);
        assert_eq!(r.feasible_set_size, 1);
        assert!(matches!(
            select(&bs16, &task(), &h, Budget::new(96.0).unwrap()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_budget_edges() {
        match select(&bs16, &task(), &hw(2.8), Budget::new(0.0).unwrap()) {
            Err(Error::Infeasible {
                cheapest_cost,
                cheapest_method,
                ..
            }) => {
                assert_eq!(cheapest_method, "All");
                assert!((cheapest_cost - 2.8 * 96.21 / 3600.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert!(select(&bs16, &task(), &hw(0.0), Budget::new(0.0).unwrap()).is_ok());
    }
}
