//! The scheduling block: an exact max-min LP over fractional time shares.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::channel::{RateTensor, Schedule};
use crate::error::{Error, Result};

/// Maximize `η` subject to `Σ_{m,n} alpha[m][k][n]·r[m][k][n] ≥ N·η` for
/// every user, `Σ_k alpha ≤ 1` per UAV and slot and (with several UAVs)
/// `Σ_m alpha ≤ 1` per user and slot.
///
/// Links with zero rate get no variable, so their share is zero. Returns the
/// schedule and the LP's `η`.
pub fn schedule_lp_from_rates(rates: &RateTensor) -> Result<(Schedule, f64)> {
    let (mm, kk, nn) = rates.dims();
    let mut schedule = Schedule::zeros(mm, kk, nn);
    if kk == 0 || nn == 0 {
        return Ok((schedule, 0.0));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let eta = lp.add_var(1.0, (0.0, f64::INFINITY));
    let mut vars = vec![None; mm * kk * nn];
    let at = |m: usize, k: usize, n: usize| (m * kk + k) * nn + n;
    for m in 0..mm {
        for k in 0..kk {
            for n in 0..nn {
                if rates.get(m, k, n) > 0.0 {
                    vars[at(m, k, n)] = Some(lp.add_var(0.0, (0.0, 1.0)));
                }
            }
        }
    }
    for k in 0..kk {
        let mut row = vec![(eta, -(nn as f64))];
        for m in 0..mm {
            for n in 0..nn {
                if let Some(v) = vars[at(m, k, n)] {
                    row.push((v, rates.get(m, k, n)));
                }
            }
        }
        lp.add_constraint(row, ComparisonOp::Ge, 0.0);
    }
    for n in 0..nn {
        for m in 0..mm {
            let row: Vec<_> = (0..kk).filter_map(|k| vars[at(m, k, n)]).map(|v| (v, 1.0)).collect();
            if row.len() > 1 {
                lp.add_constraint(row, ComparisonOp::Le, 1.0);
            }
        }
        if mm > 1 {
            for k in 0..kk {
                let row: Vec<_> = (0..mm).filter_map(|m| vars[at(m, k, n)]).map(|v| (v, 1.0)).collect();
                if row.len() > 1 {
                    lp.add_constraint(row, ComparisonOp::Le, 1.0);
                }
            }
        }
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Lp(e.to_string()))?
        .into_solution()
        .map_err(|_| Error::Lp("interrupted".into()))?;
    for m in 0..mm {
        for k in 0..kk {
            for n in 0..nn {
                if let Some(v) = vars[at(m, k, n)] {
                    schedule.alpha.set(m, k, n, solution.var_value(v).clamp(0.0, 1.0));
                }
            }
        }
    }
    normalize(&mut schedule);
    Ok((schedule, solution.var_value(eta)))
}

/// Scale away round-off overshoot of the per-slot sums.
fn normalize(s: &mut Schedule) {
    let (mm, kk, nn) = s.dims();
    for n in 0..nn {
        for m in 0..mm {
            let total: f64 = (0..kk).map(|k| s.get(m, k, n)).sum();
            if total > 1.0 {
                for k in 0..kk {
                    let a = s.get(m, k, n) / total;
                    s.alpha.set(m, k, n, a);
                }
            }
        }
        for k in 0..kk {
            let total: f64 = (0..mm).map(|m| s.get(m, k, n)).sum();
            if total > 1.0 {
                for m in 0..mm {
                    let a = s.get(m, k, n) / total;
                    s.alpha.set(m, k, n, a);
                }
            }
        }
    }
}
