//! Beamformer recovery, exact rate/energy evaluation and the power-min
//! solve pipeline.

use serde::{Deserialize, Serialize};

use crate::conic::{extract_q, IterationRecord, SolveStatus};
use crate::error::{Error, Result};
use crate::hermitian::{log2_det_identity_plus, CMat, CVec, HermitianMatrix, C64};
use crate::restrictions::{build_power_min, mrt_design, MethodTag};
use crate::scenario::{ChannelSet, ScenarioConfig};
use crate::solver::{solve, SolverSettings};

/// Designs with `lambda_2 / lambda_1` at or below this count as rank one.
pub const RANK_ONE_TOL: f64 = 1e-5;

/// Below this dominant eigenvalue the covariance carries no signal.
pub const ZERO_COVARIANCE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingDesign {
    pub q: HermitianMatrix,
    /// Dominant-eigenvector beamformer, `||b||^2 = lambda_1`.
    pub b: CVec,
    pub power: f64,
    pub rank_ratio: f64,
    pub method: MethodTag,
    pub diagnostics: Option<SolverDiagnostics>,
}

impl BeamformingDesign {
    pub fn from_covariance(
        q: HermitianMatrix,
        method: MethodTag,
        diagnostics: Option<SolverDiagnostics>,
    ) -> Result<Self> {
        let (b, rank_ratio) = extract_beamformer(&q)?;
        Ok(Self { power: q.trace(), q, b, rank_ratio, method, diagnostics })
    }

    /// Exactly rank-one design `Q = b b^H`.
    pub fn rank_one(b: CVec, method: MethodTag) -> Self {
        let q = HermitianMatrix::outer(&b, 1.0);
        Self { power: b.norm_squared(), q, b, rank_ratio: 0.0, method, diagnostics: None }
    }

    pub fn is_rank_one(&self) -> bool {
        self.rank_ratio <= RANK_ONE_TOL
    }
}

/// `b = sqrt(lambda_1) u_1` and `lambda_2 / lambda_1`.
pub fn extract_beamformer(q: &HermitianMatrix) -> Result<(CVec, f64)> {
    let (vals, vecs) = q.eigen();
    let n = vals.len();
    let l1 = vals[n - 1];
    if !(l1 >= ZERO_COVARIANCE_TOL) {
        return Err(Error::ZeroCovariance(l1));
    }
    let l2 = if n >= 2 { vals[n - 2].max(0.0) } else { 0.0 };
    let u1 = vecs.column(n - 1).into_owned();
    Ok((u1 * C64::new(l1.sqrt(), 0.0), l2 / l1.max(1e-300)))
}

/// `log2(1 + h^H Q h / sigma_d^2)`.
pub fn ir_rate(q: &HermitianMatrix, h: &CVec, sigma_d_sq: f64) -> f64 {
    (1.0 + q.quad_form(h).max(0.0) / sigma_d_sq).log2()
}

/// `log2 det(I + H^H Q H / sigma_e^2)`.
pub fn eve_rate(q: &HermitianMatrix, h_e: &CMat, sigma_e_sq: f64) -> f64 {
    let m = h_e.adjoint() * q.as_matrix() * h_e / C64::new(sigma_e_sq, 0.0);
    log2_det_identity_plus(&m)
}

/// Worst-Eve secrecy rate `min_i {C_I - C_e,i}^+` in bits/s/Hz.
pub fn secrecy_rate_exact(
    q: &HermitianMatrix,
    h: &CVec,
    h_e: &[CMat],
    sigma_d_sq: f64,
    sigma_e_sq: f64,
) -> f64 {
    worst_eve(q, h, h_e, sigma_d_sq, sigma_e_sq).0
}

/// Secrecy rate and the index of the worst Eve (`None` without Eves).
pub fn worst_eve(
    q: &HermitianMatrix,
    h: &CVec,
    h_e: &[CMat],
    sigma_d_sq: f64,
    sigma_e_sq: f64,
) -> (f64, Option<usize>) {
    let ci = ir_rate(q, h, sigma_d_sq);
    let mut best = (ci, None);
    for (i, he) in h_e.iter().enumerate() {
        let r = ci - eve_rate(q, he, sigma_e_sq);
        if best.1.is_none() || r < best.0 {
            best = (r, Some(i));
        }
    }
    (best.0.max(0.0), best.1)
}

/// Secrecy rate with the Eve term relaxed to `log2(1 + tr(.))`; equal to
/// the exact rate for rank-one `Q`.
pub fn secrecy_rate_trace(
    q: &HermitianMatrix,
    h: &CVec,
    h_e: &[CMat],
    sigma_d_sq: f64,
    sigma_e_sq: f64,
) -> f64 {
    let ci = ir_rate(q, h, sigma_d_sq);
    h_e.iter()
        .map(|he| {
            let t = (he.adjoint() * q.as_matrix() * he).trace().re / sigma_e_sq;
            ci - (1.0 + t).log2()
        })
        .fold(ci, f64::min)
        .max(0.0)
}

/// `xi g^H Q g`.
pub fn harvested_power(q: &HermitianMatrix, g: &CVec, xi: f64) -> f64 {
    (xi * q.quad_form(g)).max(0.0)
}

/// Result of one power-minimisation solve.
#[derive(Clone, Debug)]
pub struct PowerMinOutcome {
    pub method: MethodTag,
    pub status: SolveStatus,
    /// Present when the solver reached optimality.
    pub design: Option<BeamformingDesign>,
    pub iterations: usize,
    pub wall_ms: f64,
    pub log: Vec<IterationRecord>,
}

impl PowerMinOutcome {
    pub fn power(&self) -> Option<f64> {
        self.design.as_ref().map(|d| d.power)
    }
    pub fn is_feasible(&self) -> bool {
        self.design.is_some()
    }
}

/// Wall-clock timer; reports zero where no clock is available.
pub(crate) struct Timer {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Timer {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }
    pub(crate) fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// Builds and solves the method's power-minimisation program. MRT is
/// returned in closed form at the configured budget.
pub fn solve_power_min(
    cs: &ChannelSet,
    cfg: &ScenarioConfig,
    method: MethodTag,
    settings: &SolverSettings,
) -> Result<PowerMinOutcome> {
    let timer = Timer::start();
    if method == MethodTag::Mrt {
        let design = mrt_design(cs, cfg)?;
        return Ok(PowerMinOutcome {
            method,
            status: SolveStatus::Optimal,
            design: Some(design),
            iterations: 0,
            wall_ms: timer.elapsed_ms(),
            log: Vec::new(),
        });
    }
    let prog = build_power_min(cs, cfg, method)?;
    let sol = solve(&prog, settings);
    let diagnostics = SolverDiagnostics {
        status: sol.status,
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        gap: sol.gap,
    };
    let design = if sol.is_optimal() {
        let q = extract_q(&prog, &sol)?;
        match BeamformingDesign::from_covariance(q, method, Some(diagnostics)) {
            Ok(d) => Some(d),
            Err(Error::ZeroCovariance(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(PowerMinOutcome {
        method,
        status: sol.status,
        design,
        iterations: sol.iterations,
        wall_ms: timer.elapsed_ms(),
        log: sol.log,
    })
}
