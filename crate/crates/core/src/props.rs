//! Pointwise inequality suites over random tuples `(x, sigma, D, xi)` and the
//! path-inclusion suite over simulated queues. Each suite reports how many
//! tuples it checked and how many violated the inequality.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::des::{simulate, Scenario};
use crate::error::Result;
use crate::fifo_begin::fifo_step;
use crate::fifo_end::{end_step, end_step_by_cases, end_step_compact};
use crate::marks::{DeclaredBounds, Dist, MarkSource, MarkTriple, Regime};
use crate::recursion::{step, RecursionSpec};
use crate::stationary::Model;

/// Relative slack for comparisons where one side is evaluated through a
/// different (but algebraically equal) arithmetic route.
pub const REASSOCIATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checked > 0
    }
}

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A mark coordinate: mostly continuous on `[0, 5)`, with atoms at 0 and at
/// small integers so that ties between coordinates occur.
fn coordinate(rng: &mut ChaCha8Rng) -> f64 {
    match rng.next_u32() % 8 {
        0 => 0.0,
        1 => f64::from(rng.next_u32() % 4),
        _ => 5.0 * unit(rng),
    }
}

/// Random tuples; every fourth one puts `x` on a boundary `0`, `D` or `D + sigma`.
pub fn random_tuples(count: usize, seed: u64) -> Vec<(f64, MarkTriple)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = MarkTriple { sigma: coordinate(&mut rng), dpat: coordinate(&mut rng), xi: coordinate(&mut rng) };
            let x = match i % 4 {
                1 => [0.0, m.dpat, m.dpat + m.sigma][(i / 4) % 3],
                _ => 8.0 * unit(&mut rng),
            };
            (x, m)
        })
        .collect()
}

fn suite(name: &str, tuples: &[(f64, MarkTriple)], holds: impl Fn(f64, &MarkTriple) -> bool) -> SuiteResult {
    SuiteResult {
        name: name.into(),
        checked: tuples.len(),
        violations: tuples.iter().filter(|(x, m)| !holds(*x, m)).count(),
    }
}

fn le_slack(a: f64, b: f64) -> bool {
    a <= b + REASSOCIATION_SLACK * (1.0 + a.abs().max(b.abs()))
}

/// Every pointwise suite on `count` tuples drawn from `seed`.
pub fn pointwise_suites(count: usize, seed: u64) -> Vec<SuiteResult> {
    let t = random_tuples(count, seed);
    let plus = RecursionSpec::sigma_plus_d();
    let min = RecursionSpec::sigma_min_d();
    let added = |x: f64, m: &MarkTriple| x + (m.sigma - (x + m.sigma - m.dpat).max(0.0)).max(0.0);
    vec![
        suite("fifo_step <= step(sigma+D)", &t, |x, m| fifo_step(x, m).unwrap() <= step(x, m, &plus).unwrap()),
        suite("step(sigma^D) <= fifo_step", &t, |x, m| step(x, m, &min).unwrap() <= fifo_step(x, m).unwrap()),
        suite("x + sigma 1{x<=D} <= x v (D+sigma)", &t, |x, m| {
            x + if x <= m.dpat { m.sigma } else { 0.0 } <= x.max(m.dpat + m.sigma)
        }),
        suite("added work <= (x v D) ^ (x + sigma 1{x<=D})", &t, |x, m| {
            le_slack(added(x, m), x.max(m.dpat).min(x + if x <= m.dpat { m.sigma } else { 0.0 }))
        }),
        suite("x v (D ^ sigma) <= added work", &t, |x, m| le_slack(x.max(m.dpat.min(m.sigma)), added(x, m))),
        suite("end_step <= fifo_step", &t, |x, m| end_step(x, m).unwrap() <= fifo_step(x, m).unwrap()),
        suite("step(sigma^D) <= end_step <= step(D)", &t, |x, m| {
            let e = end_step(x, m).unwrap();
            step(x, m, &min).unwrap() <= e && e <= step(x, m, &RecursionSpec::d_only()).unwrap()
        }),
        suite("end_step forms agree", &t, |x, m| {
            let e = end_step(x, m).unwrap();
            let tol = REASSOCIATION_SLACK * (1.0 + x + m.sigma + m.dpat);
            (e - end_step_by_cases(x, m).unwrap()).abs() <= tol && (e - end_step_compact(x, m).unwrap()).abs() <= tol
        }),
        suite("end_step nondecreasing", &t, |x, m| {
            let dx = m.xi.min(1.0);
            end_step(x, m).unwrap() <= end_step(x + dx, m).unwrap()
        }),
    ]
}

/// Simulated paths for both models and 1, 2 and 4 servers on iid bounded marks;
/// returns one result per path counting inclusion and sojourn-window violations.
pub fn inclusion_suites(customers: usize, seed: u64) -> Result<Vec<SuiteResult>> {
    let mut out = Vec::new();
    for servers in [1usize, 2, 4] {
        for model in [Model::Begin, Model::End] {
            let load = servers as f64;
            let src = MarkSource::iid(
                Regime {
                    xi: Dist::Exponential { rate: 1.0 },
                    sigma: Dist::Uniform { low: 0.0, high: 2.0 * load },
                    dpat: Dist::Uniform { low: 0.0, high: 2.0 },
                },
                DeclaredBounds { sigma: Some(2.0 * load), dpat: Some(2.0) },
                seed,
                servers as u64,
            )?;
            let sim = simulate(&Scenario::new(servers, model, src, customers)?)?;
            let s = &sim.stats;
            out.push(SuiteResult {
                name: format!("inclusions {} s={servers}", model.name()),
                checked: s.events,
                violations: s.inclusion_violations
                    + s.sojourn_violations
                    + s.idling_violations
                    + usize::from(!s.conserves_customers()),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_hold_on_many_tuples() {
        for r in pointwise_suites(100_000, 17) {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn boundary_tuples_are_present() {
        let t = random_tuples(400, 1);
        assert!(t.iter().any(|(x, m)| *x == m.dpat && m.dpat > 0.0));
        assert!(t.iter().any(|(x, m)| *x == m.dpat + m.sigma && m.sigma > 0.0));
        assert!(t.iter().any(|(x, _)| *x == 0.0));
    }

    #[test]
    fn inclusions_hold() {
        for r in inclusion_suites(2000, 3).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}
