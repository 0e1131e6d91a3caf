//! Secrecy-rate maximisation by bisection over the rate target.
//!
//! Feasibility of the power-minimisation restriction is monotone in `R`,
//! so the largest rate whose minimum power fits the budget is found by
//! bisection on `[0, log2(1 + P_T ||h||^2 / sigma_d^2)]`.

use serde::{Deserialize, Serialize};

use crate::conic::SolveStatus;
use crate::design::{secrecy_rate_exact, solve_power_min, BeamformingDesign, Timer};
use crate::error::{Error, Result};
use crate::restrictions::{mrt_design, MethodTag};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::solver::SolverSettings;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrmSettings {
    /// Final bracket width in bits/s/Hz.
    pub tol_rate: f64,
    pub max_probes: usize,
}

impl Default for SrmSettings {
    fn default() -> Self {
        Self { tol_rate: 1e-3, max_probes: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rate: f64,
    pub status: SolveStatus,
    pub power: Option<f64>,
    pub feasible: bool,
}

#[derive(Clone, Debug)]
pub struct SrmOutcome {
    pub method: MethodTag,
    /// Largest certified rate; 0 when no probe was feasible.
    pub rate: f64,
    pub design: Option<BeamformingDesign>,
    /// `(feasible, infeasible-or-upper-bound)`.
    pub bracket: (f64, f64),
    pub upper_bound: f64,
    pub probes: Vec<Probe>,
    /// Probes that ended in `MaxIter` or `Numerical`; counted as infeasible.
    pub solver_failures: usize,
    pub iterations: usize,
    pub wall_ms: f64,
    pub diagnostic: Option<String>,
}

/// `log2(1 + P_T ||h||^2 / sigma_d^2)`: the IR rate with every watt on `h`
/// and no eavesdropper.
pub fn rate_upper_bound(cs: &ChannelSet, cfg: &ScenarioConfig) -> f64 {
    (1.0 + cfg.power_budget * cs.h.norm_squared() / cfg.sigma_d_sq).log2()
}

/// Maximises the secrecy rate under the outage constraints and the power
/// budget. MRT has no program to bisect; its nominal secrecy rate on the
/// estimated channels is reported instead.
pub fn srm_solve(
    cs: &ChannelSet,
    cfg: &ScenarioConfig,
    method: MethodTag,
    solver: &SolverSettings,
    settings: &SrmSettings,
) -> Result<SrmOutcome> {
    if !(cfg.power_budget > 0.0) {
        return Err(Error::Domain("secrecy-rate maximisation needs a positive budget".into()));
    }
    if !(settings.tol_rate > 0.0) {
        return Err(Error::Domain("rate tolerance must be positive".into()));
    }
    let timer = Timer::start();
    let upper = rate_upper_bound(cs, cfg);
    if method == MethodTag::Mrt {
        let d = mrt_design(cs, cfg)?;
        let rate = secrecy_rate_exact(&d.q, &cs.h, &cs.h_hat, cfg.sigma_d_sq, cfg.sigma_e_sq);
        return Ok(SrmOutcome {
            method,
            rate,
            design: Some(d),
            bracket: (rate, rate),
            upper_bound: upper,
            probes: Vec::new(),
            solver_failures: 0,
            iterations: 0,
            wall_ms: timer.elapsed_ms(),
            diagnostic: None,
        });
    }

    let mut probe_cfg = cfg.clone();
    let (mut lo, mut hi) = (0.0, upper);
    let mut best = None;
    let mut probes = Vec::new();
    let mut failures = 0;
    let mut iterations = 0;
    while hi - lo > settings.tol_rate && probes.len() < settings.max_probes {
        let mid = 0.5 * (lo + hi);
        probe_cfg.rate_target = mid;
        let out = solve_power_min(cs, &probe_cfg, method, solver)?;
        iterations += out.iterations;
        if matches!(out.status, SolveStatus::MaxIter | SolveStatus::Numerical) {
            failures += 1;
        }
        let power = out.power();
        let feasible = out.status == SolveStatus::Optimal && power.is_some_and(|p| p <= cfg.power_budget);
        probes.push(Probe { rate: mid, status: out.status, power, feasible });
        if feasible {
            lo = mid;
            best = out.design;
        } else {
            hi = mid;
        }
    }
    let diagnostic = if best.is_none() {
        Some(format!(
            "no feasible rate above {:.3e} bits/s/Hz within the budget",
            hi
        ))
    } else {
        None
    };
    Ok(SrmOutcome {
        method,
        rate: if best.is_some() { lo } else { 0.0 },
        design: best,
        bracket: (lo, hi),
        upper_bound: upper,
        probes,
        solver_failures: failures,
        iterations,
        wall_ms: timer.elapsed_ms(),
        diagnostic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn no_eves_no_ers() -> (ScenarioConfig, ChannelSet) {
        let mut cfg = ScenarioConfig::preset("small").unwrap();
        cfg.set_param("L", 0.0).unwrap();
        cfg.set_param("K", 0.0).unwrap();
        let cs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        (cfg, cs)
    }

    #[test]
    fn degenerate_instance_reaches_the_bound() {
        let (cfg, cs) = no_eves_no_ers();
        let s = SrmSettings::default();
        for m in [MethodTag::Bti, MethodTag::SProcedure, MethodTag::Ldi] {
            let out = srm_solve(&cs, &cfg, m, &SolverSettings::default(), &s).unwrap();
            assert!(out.rate <= out.upper_bound);
            assert!(out.upper_bound - out.rate <= s.tol_rate, "{m}: {} vs {}", out.rate, out.upper_bound);
            assert!(out.design.is_some());
        }
    }

    #[test]
    fn bracket_certificate() {
        let cfg = ScenarioConfig::preset("small").unwrap();
        let cs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let s = SrmSettings::default();
        let out = srm_solve(&cs, &cfg, MethodTag::Ldi, &SolverSettings::default(), &s).unwrap();
        let (lo, hi) = out.bracket;
        assert!(hi - lo <= s.tol_rate);
        for p in &out.probes {
            if p.rate <= lo {
                assert!(p.feasible || p.rate < lo);
            }
        }
        assert!(out.probes.iter().any(|p| p.feasible && p.rate == lo) || lo == 0.0);
        assert!(hi == out.upper_bound || out.probes.iter().any(|p| !p.feasible && p.rate == hi));
    }

    #[test]
    fn mrt_reports_nominal_rate() {
        let cfg = ScenarioConfig::preset("small").unwrap();
        let cs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let out = srm_solve(&cs, &cfg, MethodTag::Mrt, &SolverSettings::default(), &SrmSettings::default())
            .unwrap();
        assert!(out.rate >= 0.0 && out.rate <= out.upper_bound);
        assert!(out.probes.is_empty());
    }
}
