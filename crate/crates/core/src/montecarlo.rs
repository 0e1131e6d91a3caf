//! Monte-Carlo checks of designs against the true chance constraints, and
//! the feasibility-rate experiment.
//!
//! Every trial and instance draws from its own generator seeded with
//! `mix(base) ^ index`, so results do not depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conic::SolveStatus;
use crate::design::{harvested_power, solve_power_min, worst_eve, BeamformingDesign};
use crate::error::Result;
use crate::restrictions::MethodTag;
use crate::scenario::{sample_channels, ChannelSet, ErrorSampler, ScenarioConfig};
use crate::solver::SolverSettings;

pub const DEFAULT_TRIALS: usize = 10_000;

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// SplitMix64 finaliser; decorrelates nearby base seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for item `index` of a stream rooted at `base`.
pub fn stream_rng(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(base) ^ index)
}

/// Half-width of the normal-approximation 95% binomial interval.
pub fn binomial_half_width(rate: f64, trials: usize) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    Z95 * (rate * (1.0 - rate) / trials as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub trials: usize,
    pub secrecy_outage_rate: f64,
    pub secrecy_half_width: f64,
    pub eh_outage_rate: Vec<f64>,
    pub eh_half_width: Vec<f64>,
    /// How often each Eve attained the minimum secrecy rate.
    pub worst_eve_histogram: Vec<usize>,
}

impl OutageReport {
    pub fn max_eh_outage(&self) -> f64 {
        self.eh_outage_rate.iter().copied().fold(0.0, f64::max)
    }

    /// Binomial standard deviation of an outage estimate at rate `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

#[derive(Clone, Debug, Default)]
struct Tally {
    secrecy: usize,
    eh: Vec<usize>,
    worst: Vec<usize>,
}

impl Tally {
    fn new(k: usize, l: usize) -> Self {
        Self { secrecy: 0, eh: vec![0; k], worst: vec![0; l] }
    }

    #[cfg(feature = "parallel")]
    fn merge(mut self, o: Self) -> Self {
        self.secrecy += o.secrecy;
        self.eh.iter_mut().zip(&o.eh).for_each(|(a, b)| *a += b);
        self.worst.iter_mut().zip(&o.worst).for_each(|(a, b)| *a += b);
        self
    }
}

fn trial(
    sampler: &ErrorSampler<'_>,
    design: &BeamformingDesign,
    cs: &ChannelSet,
    cfg: &ScenarioConfig,
    rng: &mut ChaCha8Rng,
    tally: &mut Tally,
) {
    let real = sampler.sample(rng);
    let (rate, worst) = worst_eve(&design.q, &cs.h, &real.h_e, cfg.sigma_d_sq, cfg.sigma_e_sq);
    if rate < cfg.rate_target {
        tally.secrecy += 1;
    }
    if let Some(i) = worst {
        tally.worst[i] += 1;
    }
    for (k, g) in real.g.iter().enumerate() {
        if harvested_power(&design.q, g, cfg.eh_efficiency[k]) < cfg.eh_targets[k] {
            tally.eh[k] += 1;
        }
    }
}

/// Estimates secrecy and EH outage of `design` over `trials` error draws.
pub fn validate_design_seeded(
    design: &BeamformingDesign,
    cs: &ChannelSet,
    cfg: &ScenarioConfig,
    trials: usize,
    base_seed: u64,
) -> Result<OutageReport> {
    let sampler = ErrorSampler::new(cs)?;
    let (k, l) = (cs.g_hat.len(), cs.h_hat.len());
    let run = |i: usize, mut t: Tally| {
        let mut rng = stream_rng(base_seed, i as u64);
        trial(&sampler, design, cs, cfg, &mut rng, &mut t);
        t
    };
    #[cfg(feature = "parallel")]
    let tally = {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .fold(|| Tally::new(k, l), |t, i| run(i, t))
            .reduce(|| Tally::new(k, l), Tally::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let tally = (0..trials).fold(Tally::new(k, l), |t, i| run(i, t));

    let n = trials.max(1) as f64;
    let secrecy = tally.secrecy as f64 / n;
    let eh: Vec<f64> = tally.eh.iter().map(|&c| c as f64 / n).collect();
    Ok(OutageReport {
        trials,
        secrecy_outage_rate: secrecy,
        secrecy_half_width: binomial_half_width(secrecy, trials),
        eh_half_width: eh.iter().map(|&r| binomial_half_width(r, trials)).collect(),
        eh_outage_rate: eh,
        worst_eve_histogram: tally.worst,
    })
}

/// [`validate_design_seeded`] with the base seed drawn from `rng`.
pub fn validate_design<R: rand::Rng + ?Sized>(
    design: &BeamformingDesign,
    cs: &ChannelSet,
    cfg: &ScenarioConfig,
    trials: usize,
    rng: &mut R,
) -> Result<OutageReport> {
    validate_design_seeded(design, cs, cfg, trials, rng.next_u64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub method: MethodTag,
    pub instances: usize,
    pub feasible: usize,
    /// Instances where the solver stopped on `MaxIter` or `Numerical`.
    pub solver_failures: usize,
}

impl FeasibilityReport {
    pub fn rate(&self) -> f64 {
        self.feasible as f64 / self.instances.max(1) as f64
    }
}

/// Solves the method's power-min program on `n_instances` channel draws
/// rooted at `base_seed` and counts `Optimal` outcomes.
pub fn feasibility_seeded(
    cfg: &ScenarioConfig,
    method: MethodTag,
    n_instances: usize,
    base_seed: u64,
    settings: &SolverSettings,
) -> Result<FeasibilityReport> {
    let one = |i: usize| -> Result<(bool, bool)> {
        let cs = sample_channels(cfg, &mut stream_rng(base_seed, i as u64))?;
        let out = solve_power_min(&cs, cfg, method, settings)?;
        let fail = matches!(out.status, SolveStatus::MaxIter | SolveStatus::Numerical);
        Ok((out.is_feasible(), fail))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        (0..n_instances).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = (0..n_instances).map(one).collect::<Result<_>>()?;
    Ok(FeasibilityReport {
        method,
        instances: n_instances,
        feasible: results.iter().filter(|r| r.0).count(),
        solver_failures: results.iter().filter(|r| r.1).count(),
    })
}

/// Fraction of sampled channel sets for which the method is feasible.
pub fn feasibility_rate<R: rand::Rng + ?Sized>(
    cfg: &ScenarioConfig,
    method: MethodTag,
    n_instances: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(feasibility_seeded(cfg, method, n_instances, rng.next_u64(), &SolverSettings::default())?.rate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restrictions::mrt_design;

    fn small() -> (ScenarioConfig, ChannelSet) {
        let cfg = ScenarioConfig::preset("small").unwrap();
        let cs = sample_channels(&cfg, &mut stream_rng(3, 0)).unwrap();
        (cfg, cs)
    }

    #[test]
    fn zero_covariance_never_outages_when_nominally_feasible() {
        let (cfg, cs) = small();
        let cs = cs.without_uncertainty();
        let out = solve_power_min(&cs, &cfg, MethodTag::NonRobust, &SolverSettings::default()).unwrap();
        let d = out.design.unwrap();
        // Shrink the targets slightly below what the design meets nominally.
        let mut c = cfg.clone();
        c.rate_target *= 0.99;
        c.eh_targets.iter_mut().for_each(|e| *e *= 0.99);
        let r = validate_design_seeded(&d, &cs, &c, 200, 1).unwrap();
        assert_eq!(r.secrecy_outage_rate, 0.0);
        assert!(r.eh_outage_rate.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unreachable_rate_always_outages() {
        let (mut cfg, cs) = small();
        let d = mrt_design(&cs, &cfg).unwrap();
        cfg.rate_target = 1e3;
        let r = validate_design_seeded(&d, &cs, &cfg, 100, 9).unwrap();
        assert_eq!(r.secrecy_outage_rate, 1.0);
        assert_eq!(r.worst_eve_histogram.iter().sum::<usize>(), 100);
    }

    #[test]
    fn deterministic_under_seed() {
        let (cfg, cs) = small();
        let d = mrt_design(&cs, &cfg).unwrap();
        let a = validate_design_seeded(&d, &cs, &cfg, 300, 5).unwrap();
        let b = validate_design_seeded(&d, &cs, &cfg, 300, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn half_width_scaling() {
        let h1 = binomial_half_width(0.3, 1000);
        let h4 = binomial_half_width(0.3, 4000);
        assert!((h1 / h4 - 2.0).abs() < 1e-12);
        assert_eq!(binomial_half_width(0.0, 10), 0.0);
    }

    #[test]
    fn feasibility_extremes() {
        let (mut cfg, _) = small();
        cfg.error.eps_sq = 0.0;
        cfg.eh_targets.iter_mut().for_each(|e| *e = 0.0);
        cfg.rate_target = 0.1;
        let all = feasibility_seeded(&cfg, MethodTag::Ldi, 4, 0, &SolverSettings::default()).unwrap();
        assert_eq!(all.rate(), 1.0);
        cfg.rate_target = 60.0;
        cfg.error.eps_sq = 0.002;
        let none = feasibility_seeded(&cfg, MethodTag::Ldi, 3, 0, &SolverSettings::default()).unwrap();
        assert_eq!(none.rate(), 0.0);
    }
}
