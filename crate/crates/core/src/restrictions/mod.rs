//! Convex restrictions of the secrecy and energy-harvesting outage
//! constraints, compiled into [`ConicProgram`]s.
//!
//! Every builder works on a normalised instance: with `u = sigma_d^2 /
//! ||h||^2` the covariance is written `Q = u X`, the Eve constraints are
//! divided by `sigma_e^2` and each ER constraint by its target `eta / xi`.
//! The programs therefore have O(1) coefficients whatever the path loss,
//! and [`ConicProgram::objective_scale`] (= `u`) maps the optimum back to
//! watts.

pub mod chi2;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{ConeTag, ConicProgram, CovarianceEncoding};
use crate::design::BeamformingDesign;
use crate::error::{Error, Result};
use crate::hermitian::{
    complex_interleaved, embed_matrix, hermitian_basis, hermitian_norm_vec, kron_identity,
    svec_len, svec_unchecked, CMat, CVec, HermitianMatrix, C64,
};
use crate::scenario::{ChannelSet, ScenarioConfig, PSD_REJECT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodTag {
    Bti,
    SProcedure,
    Ldi,
    NonRobust,
    Mrt,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] = [
        MethodTag::Bti,
        MethodTag::SProcedure,
        MethodTag::Ldi,
        MethodTag::NonRobust,
        MethodTag::Mrt,
    ];
    pub const ROBUST: [MethodTag; 3] = [MethodTag::Bti, MethodTag::SProcedure, MethodTag::Ldi];

    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Bti => "bti",
            MethodTag::SProcedure => "sproc",
            MethodTag::Ldi => "ldi",
            MethodTag::NonRobust => "nonrobust",
            MethodTag::Mrt => "mrt",
        }
    }

    pub fn is_robust(&self) -> bool {
        Self::ROBUST.contains(self)
    }

    /// Parses a comma-separated list; `all` and `robust` expand.
    pub fn parse_list(text: &str) -> Result<Vec<MethodTag>> {
        let mut out = Vec::new();
        for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let add: Vec<MethodTag> = match part {
                "all" => Self::ALL.to_vec(),
                "robust" => Self::ROBUST.to_vec(),
                p => vec![p.parse()?],
            };
            for m in add {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bti" => Ok(MethodTag::Bti),
            "sproc" | "s-procedure" | "sprocedure" => Ok(MethodTag::SProcedure),
            "ldi" => Ok(MethodTag::Ldi),
            "nonrobust" | "non-robust" => Ok(MethodTag::NonRobust),
            "mrt" => Ok(MethodTag::Mrt),
            _ => Err(Error::Config(format!("unknown method `{s}`"))),
        }
    }
}

/// Scalars shared by the restrictions.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictionParams {
    /// S-procedure ball radius per Eve (dof `2 N_T N_e`).
    pub gamma_eve: Vec<f64>,
    /// S-procedure ball radius for the ERs (dof `2 N_T`).
    pub gamma_er: f64,
    pub v_p: f64,
    pub v_q: f64,
    pub sqrt_m2ln_p: f64,
    pub mln_p: f64,
    pub sqrt_m2ln_q: f64,
    pub mln_q: f64,
}

impl RestrictionParams {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let (p, q) = (cfg.p_secrecy, cfg.q_eh);
        for v in [p, q] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!(
                    "robust restrictions need outage tolerances in (0, 1), got {v}"
                )));
            }
        }
        let gamma_eve = cfg
            .eve_antennas
            .iter()
            .map(|&ne| chi2::sproc_radius(p, 2 * cfg.n_tx * ne))
            .collect::<Result<_>>()?;
        Ok(Self {
            gamma_eve,
            gamma_er: chi2::sproc_radius(q, 2 * cfg.n_tx)?,
            v_p: chi2::solve_v(p)?,
            v_q: chi2::solve_v(q)?,
            sqrt_m2ln_p: (-2.0 * p.ln()).sqrt(),
            mln_p: -p.ln(),
            sqrt_m2ln_q: (-2.0 * q.ln()).sqrt(),
            mln_q: -q.ln(),
        })
    }
}

struct EveData {
    ne: usize,
    /// Normalised estimate `sqrt(u) / sigma_e * H_hat`.
    hmat: CMat,
    /// Column-major `vec` of `hmat`.
    hvec: CVec,
    /// Normalised `R_H^{1/2}`; `None` when the covariance is zero.
    sqrt_r: Option<CMat>,
}

struct ErData {
    g: CVec,
    sqrt_r: Option<CMat>,
    /// Normalised EH target: 1, or 0 when the target is zero.
    target: f64,
}

struct Normalized {
    n: usize,
    u: f64,
    /// `h / ||h||`.
    h: CVec,
    /// `2^{-R}`.
    rate_factor: f64,
    eves: Vec<EveData>,
    ers: Vec<ErData>,
}

impl Normalized {
    fn new(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<Self> {
        cs.validate()?;
        let n = cs.n_tx();
        if n != cfg.n_tx || cs.g_hat.len() != cfg.n_er || cs.h_hat.len() != cfg.n_eve() {
            return Err(Error::Dimension("channel set does not match configuration".into()));
        }
        if !(cfg.rate_target > 0.0) {
            return Err(Error::Domain(format!(
                "power minimisation needs a positive rate target, got {}",
                cfg.rate_target
            )));
        }
        let hn2 = cs.h.norm_squared();
        if !(hn2 > 0.0) {
            return Err(Error::Domain("IR channel is zero".into()));
        }
        let u = cfg.sigma_d_sq / hn2;
        let root = |r: &HermitianMatrix, s: f64| -> Result<Option<CMat>> {
            if r.is_zero() {
                return Ok(None);
            }
            Ok(Some(r.psd_sqrt(PSD_REJECT_TOL)?.into_inner() * C64::new(s, 0.0)))
        };
        let se = (u / cfg.sigma_e_sq).sqrt();
        let mut eves = Vec::with_capacity(cs.h_hat.len());
        for (hh, r) in cs.h_hat.iter().zip(&cs.r_h) {
            let hmat = hh * C64::new(se, 0.0);
            let hvec = CVec::from_column_slice(hmat.as_slice());
            eves.push(EveData { ne: hh.ncols(), hmat, hvec, sqrt_r: root(r, se)? });
        }
        let mut ers = Vec::with_capacity(cs.g_hat.len());
        for k in 0..cs.g_hat.len() {
            let e = cfg.eh_targets[k] / cfg.eh_efficiency[k];
            let (e_ref, target) = if e > 0.0 { (e, 1.0) } else { (1.0, 0.0) };
            let s = (u / e_ref).sqrt();
            ers.push(ErData {
                g: &cs.g_hat[k] * C64::new(s, 0.0),
                sqrt_r: root(&cs.r_g[k], s)?,
                target,
            });
        }
        Ok(Self {
            n,
            u,
            h: &cs.h / C64::new(hn2.sqrt(), 0.0),
            rate_factor: 2f64.powf(-cfg.rate_target),
            eves,
            ers,
        })
    }
}

/// Columns of a linear map of the Hermitian coordinates of `X`.
fn columns(n: usize, rows: usize, f: impl Fn(&CMat) -> Vec<f64>) -> DMatrix<f64> {
    let dim = n * n;
    let mut m = DMatrix::zeros(rows, dim);
    for k in 0..dim {
        let col = f(&hermitian_basis(n, k));
        debug_assert_eq!(col.len(), rows);
        m.column_mut(k).copy_from_slice(&col);
    }
    m
}

fn quad(v: &CVec, x: &CMat) -> f64 {
    (v.adjoint() * x * v)[0].re
}

/// Per-Eve linear maps of `X`.
struct EveMaps {
    /// `svec(embed(M(X)))` with `M = S (I (x) X) S`.
    m_embed: DMatrix<f64>,
    /// Compressed Frobenius coordinates of `M(X)`.
    m_norm: DMatrix<f64>,
    /// Interleaved `S (I (x) X) h_e`.
    r: DMatrix<f64>,
    tr_m: DVector<f64>,
    /// `h_e^H (I (x) X) h_e`.
    quad: DVector<f64>,
    /// Embedded Theta block without the `mu` and constant terms.
    theta: Option<DMatrix<f64>>,
}

struct ErMaps {
    a_embed: DMatrix<f64>,
    a_norm: DMatrix<f64>,
    r: DMatrix<f64>,
    tr_a: DVector<f64>,
    quad: DVector<f64>,
    upsilon: Option<DMatrix<f64>>,
}

fn row_vector(m: DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn eve_maps(nz: &Normalized, e: &EveData, with_theta: bool) -> EveMaps {
    let n = nz.n;
    let m = n * e.ne;
    let s = e.sqrt_r.clone().unwrap_or_else(|| CMat::zeros(m, m));
    let mx = |x: &CMat| &s * kron_identity(e.ne, x) * &s;
    let rx = |x: &CMat| &s * kron_identity(e.ne, x) * &e.hvec;
    let sv = svec_len(2 * m);
    let theta = with_theta.then(|| {
        columns(n, svec_len(2 * (m + 1)), |x| {
            // [[-M, -r], [-r^H, h_tilde term - quad]]
            let mut t = CMat::zeros(m + 1, m + 1);
            t.view_mut((0, 0), (m, m)).copy_from(&(-mx(x)));
            let r = -rx(x);
            t.view_mut((0, m), (m, 1)).copy_from(&r);
            t.view_mut((m, 0), (1, m)).copy_from(&r.adjoint());
            let corner = nz.rate_factor * quad(&nz.h, x) - (e.hmat.adjoint() * x * &e.hmat).trace().re;
            t[(m, m)] = C64::new(corner, 0.0);
            svec_unchecked(&embed_matrix(&t))
        })
    });
    EveMaps {
        m_embed: columns(n, sv, |x| svec_unchecked(&embed_matrix(&mx(x)))),
        m_norm: columns(n, m * m, |x| hermitian_norm_vec(&mx(x))),
        r: columns(n, 2 * m, |x| complex_interleaved(&rx(x))),
        tr_m: row_vector(columns(n, 1, |x| vec![mx(x).trace().re])),
        quad: row_vector(columns(n, 1, |x| vec![(e.hmat.adjoint() * x * &e.hmat).trace().re])),
        theta,
    }
}

fn er_maps(nz: &Normalized, er: &ErData, with_upsilon: bool) -> ErMaps {
    let n = nz.n;
    let s = er.sqrt_r.clone().unwrap_or_else(|| CMat::zeros(n, n));
    let ax = |x: &CMat| &s * x * &s;
    let rx = |x: &CMat| &s * x * &er.g;
    let upsilon = with_upsilon.then(|| {
        columns(n, svec_len(2 * (n + 1)), |x| {
            let mut t = CMat::zeros(n + 1, n + 1);
            t.view_mut((0, 0), (n, n)).copy_from(&ax(x));
            let r = rx(x);
            t.view_mut((0, n), (n, 1)).copy_from(&r);
            t.view_mut((n, 0), (1, n)).copy_from(&r.adjoint());
            t[(n, n)] = C64::new(quad(&er.g, x), 0.0);
            svec_unchecked(&embed_matrix(&t))
        })
    });
    ErMaps {
        a_embed: columns(n, svec_len(2 * n), |x| svec_unchecked(&embed_matrix(&ax(x)))),
        a_norm: columns(n, n * n, |x| hermitian_norm_vec(&ax(x))),
        r: columns(n, 2 * n, |x| complex_interleaved(&rx(x))),
        tr_a: row_vector(columns(n, 1, |x| vec![ax(x).trace().re])),
        quad: row_vector(columns(n, 1, |x| vec![quad(&er.g, x)])),
        upsilon,
    }
}

/// `svec(embed(I_side))`, the coordinates of a multiplier times identity.
fn embedded_identity(side: usize) -> DVector<f64> {
    DVector::from_vec(svec_unchecked(&DMatrix::identity(2 * side, 2 * side)))
}

/// `svec(embed(E_{side-1, side-1}))` for a `(side x side)` Hermitian block.
fn embedded_corner(side: usize) -> DVector<f64> {
    let mut c = CMat::zeros(side, side);
    c[(side - 1, side - 1)] = C64::new(1.0, 0.0);
    DVector::from_vec(svec_unchecked(&embed_matrix(&c)))
}

/// Assembles blocks of the form `E x + e0 in K`.
struct Builder {
    prog: ConicProgram,
    q: std::ops::Range<usize>,
}

impl Builder {
    fn new(nz: &Normalized, slacks: &[(&str, usize)]) -> Result<Self> {
        let mut groups = vec![("Q", nz.n * nz.n)];
        groups.extend_from_slice(slacks);
        let mut prog = ConicProgram::with_variables(&groups)?;
        let q = prog.var("Q").expect("declared");
        let mut c = DVector::zeros(prog.num_vars());
        for i in 0..nz.n {
            c[q.start + i] = 1.0;
        }
        prog.set_objective(c)?;
        prog.objective_scale = nz.u;
        prog.covariance = Some(CovarianceEncoding { var: "Q".into(), side: nz.n, scale: nz.u });
        let mut b = Self { prog, q };
        if nz.eves.is_empty() {
            // Without Eves the rate requirement is on the IR alone.
            let hq = one_row(&row_vector(columns(nz.n, 1, |x| vec![quad(&nz.h, x)])));
            let mut e = b.expr(1);
            b.set_q(&mut e, &hq, nz.rate_factor);
            b.push("ir.rate".into(), e, DVector::from_element(1, nz.rate_factor - 1.0), ConeTag::Nonneg(1))?;
        }
        Ok(b)
    }

    fn slack(&self, name: &str, i: usize) -> usize {
        self.prog.var(name).expect("declared slack").start + i
    }

    fn expr(&self, rows: usize) -> DMatrix<f64> {
        DMatrix::zeros(rows, self.prog.num_vars())
    }

    fn set_q(&self, e: &mut DMatrix<f64>, block: &DMatrix<f64>, sign: f64) {
        let q = self.q.clone();
        let mut v = e.view_mut((0, q.start), (block.nrows(), q.len()));
        v += block * sign;
    }

    fn push(&mut self, label: String, e: DMatrix<f64>, e0: DVector<f64>, cone: ConeTag) -> Result<()> {
        self.prog.add_block(label, -e, e0, cone)?;
        Ok(())
    }

    fn push_q_psd(&mut self, n: usize) -> Result<()> {
        let map = columns(n, svec_len(2 * n), |x| svec_unchecked(&embed_matrix(x)));
        let mut e = self.expr(map.nrows());
        self.set_q(&mut e, &map, 1.0);
        let rows = e.nrows();
        self.push("Q.psd".into(), e, DVector::zeros(rows), ConeTag::Psd(2 * n))
    }

    fn finish(self) -> ConicProgram {
        self.prog
    }
}

fn one_row(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(1, v.len(), v.as_slice())
}

/// Bernstein-type inequality restriction.
pub fn build_power_min_bti(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<ConicProgram> {
    let nz = Normalized::new(cs, cfg)?;
    let par = RestrictionParams::new(cfg)?;
    let (l, k) = (nz.eves.len(), nz.ers.len());
    let mut b = Builder::new(&nz, &[("psi", l), ("omega", l), ("nu", k), ("phi", k)])?;
    let n = nz.n;
    let hq = one_row(&row_vector(columns(n, 1, |x| vec![quad(&nz.h, x)])));

    for (i, eve) in nz.eves.iter().enumerate() {
        let mp = eve_maps(&nz, eve, false);
        let m = n * eve.ne;
        // 2^-R - 1 - [tr M + quad - 2^-R h^H X h + a psi + b omega] >= 0
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&mp.tr_m), -1.0);
        b.set_q(&mut e, &one_row(&mp.quad), -1.0);
        b.set_q(&mut e, &hq, nz.rate_factor);
        e[(0, b.slack("psi", i))] = -par.sqrt_m2ln_p;
        e[(0, b.slack("omega", i))] = -par.mln_p;
        b.push(format!("eve{i}.rate"), e, DVector::from_element(1, nz.rate_factor - 1.0), ConeTag::Nonneg(1))?;

        // (psi, vec M, sqrt2 r) in SOC
        let rows = 1 + m * m + 2 * m;
        let mut e = b.expr(rows);
        e[(0, b.slack("psi", i))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (m * m, n * n)).copy_from(&mp.m_norm);
        qb.view_mut((1 + m * m, 0), (2 * m, n * n)).copy_from(&(&mp.r * std::f64::consts::SQRT_2));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("eve{i}.soc"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;

        // omega I - M >= 0
        let rows = mp.m_embed.nrows();
        let mut e = b.expr(rows);
        b.set_q(&mut e, &mp.m_embed, -1.0);
        e.column_mut(b.slack("omega", i)).copy_from(&embedded_identity(m));
        b.push(format!("eve{i}.lmi"), e, DVector::zeros(rows), ConeTag::Psd(2 * m))?;
    }

    for (j, er) in nz.ers.iter().enumerate() {
        let mp = er_maps(&nz, er, false);
        // tr A + g^H X g - a nu - b phi - t >= 0
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&mp.tr_a), 1.0);
        b.set_q(&mut e, &one_row(&mp.quad), 1.0);
        e[(0, b.slack("nu", j))] = -par.sqrt_m2ln_q;
        e[(0, b.slack("phi", j))] = -par.mln_q;
        b.push(format!("er{j}.eh"), e, DVector::from_element(1, -er.target), ConeTag::Nonneg(1))?;

        let rows = 1 + n * n + 2 * n;
        let mut e = b.expr(rows);
        e[(0, b.slack("nu", j))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (n * n, n * n)).copy_from(&mp.a_norm);
        qb.view_mut((1 + n * n, 0), (2 * n, n * n)).copy_from(&(&mp.r * std::f64::consts::SQRT_2));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("er{j}.soc"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;

        // phi I + A >= 0
        let rows = mp.a_embed.nrows();
        let mut e = b.expr(rows);
        b.set_q(&mut e, &mp.a_embed, 1.0);
        e.column_mut(b.slack("phi", j)).copy_from(&embedded_identity(n));
        b.push(format!("er{j}.lmi"), e, DVector::zeros(rows), ConeTag::Psd(2 * n))?;
    }

    b.push_q_psd(n)?;
    let ns = 2 * (l + k);
    if ns > 0 {
        let mut e = b.expr(ns);
        let start = b.q.end;
        for r in 0..ns {
            e[(r, start + r)] = 1.0;
        }
        b.push("slack.nonneg".into(), e, DVector::zeros(ns), ConeTag::Nonneg(ns))?;
    }
    Ok(b.finish())
}

/// S-procedure restriction over chi-square uncertainty balls.
pub fn build_power_min_sproc(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<ConicProgram> {
    let nz = Normalized::new(cs, cfg)?;
    let par = RestrictionParams::new(cfg)?;
    let (l, k) = (nz.eves.len(), nz.ers.len());
    let mut b = Builder::new(&nz, &[("mu_H", l), ("mu_g", k)])?;
    let n = nz.n;

    for (i, eve) in nz.eves.iter().enumerate() {
        let mp = eve_maps(&nz, eve, true);
        let m = n * eve.ne;
        let theta = mp.theta.expect("requested");
        let rows = theta.nrows();
        let mut e = b.expr(rows);
        b.set_q(&mut e, &theta, 1.0);
        // mu (I_m (+) -gamma^2)
        let mut id = CMat::identity(m + 1, m + 1);
        id[(m, m)] = C64::new(-par.gamma_eve[i].powi(2), 0.0);
        e.column_mut(b.slack("mu_H", i))
            .copy_from_slice(&svec_unchecked(&embed_matrix(&id)));
        let e0 = embedded_corner(m + 1) * (nz.rate_factor - 1.0);
        b.push(format!("eve{i}.theta"), e, e0, ConeTag::Psd(2 * (m + 1)))?;
    }

    for (j, er) in nz.ers.iter().enumerate() {
        let mp = er_maps(&nz, er, true);
        let ups = mp.upsilon.expect("requested");
        let rows = ups.nrows();
        let mut e = b.expr(rows);
        b.set_q(&mut e, &ups, 1.0);
        let mut id = CMat::identity(n + 1, n + 1);
        id[(n, n)] = C64::new(-par.gamma_er.powi(2), 0.0);
        e.column_mut(b.slack("mu_g", j))
            .copy_from_slice(&svec_unchecked(&embed_matrix(&id)));
        let e0 = embedded_corner(n + 1) * -er.target;
        b.push(format!("er{j}.upsilon"), e, e0, ConeTag::Psd(2 * (n + 1)))?;
    }

    b.push_q_psd(n)?;
    if l + k > 0 {
        let mut e = b.expr(l + k);
        let start = b.q.end;
        for r in 0..l + k {
            e[(r, start + r)] = 1.0;
        }
        b.push("mu.nonneg".into(), e, DVector::zeros(l + k), ConeTag::Nonneg(l + k))?;
    }
    Ok(b.finish())
}

/// Large-deviation inequality restriction (SOC constraints only).
pub fn build_power_min_ldi(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<ConicProgram> {
    let nz = Normalized::new(cs, cfg)?;
    let par = RestrictionParams::new(cfg)?;
    let (l, k) = (nz.eves.len(), nz.ers.len());
    let mut b = Builder::new(
        &nz,
        &[("psi_bar", l), ("omega_bar", l), ("nu_bar", k), ("phi_bar", k)],
    )?;
    let n = nz.n;
    let hq = one_row(&row_vector(columns(n, 1, |x| vec![quad(&nz.h, x)])));
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let cp = par.mln_p.sqrt();
    let cq = par.mln_q.sqrt();

    for (i, eve) in nz.eves.iter().enumerate() {
        let mp = eve_maps(&nz, eve, false);
        let m = n * eve.ne;
        // -tr M + tau - 2 c (psi + omega) >= 0
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&mp.tr_m), -1.0);
        b.set_q(&mut e, &one_row(&mp.quad), -1.0);
        b.set_q(&mut e, &hq, nz.rate_factor);
        e[(0, b.slack("psi_bar", i))] = -2.0 * cp;
        e[(0, b.slack("omega_bar", i))] = -2.0 * cp;
        b.push(format!("eve{i}.rate"), e, DVector::from_element(1, nz.rate_factor - 1.0), ConeTag::Nonneg(1))?;

        let rows = 1 + 2 * m;
        let mut e = b.expr(rows);
        e[(0, b.slack("psi_bar", i))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (2 * m, n * n)).copy_from(&(&mp.r * inv_sqrt2));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("eve{i}.soc_r"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;

        let rows = 1 + m * m;
        let mut e = b.expr(rows);
        e[(0, b.slack("omega_bar", i))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (m * m, n * n)).copy_from(&(&mp.m_norm * par.v_p));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("eve{i}.soc_m"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;
    }

    for (j, er) in nz.ers.iter().enumerate() {
        let mp = er_maps(&nz, er, false);
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&mp.tr_a), 1.0);
        b.set_q(&mut e, &one_row(&mp.quad), 1.0);
        e[(0, b.slack("nu_bar", j))] = -2.0 * cq;
        e[(0, b.slack("phi_bar", j))] = -2.0 * cq;
        b.push(format!("er{j}.eh"), e, DVector::from_element(1, -er.target), ConeTag::Nonneg(1))?;

        let rows = 1 + 2 * n;
        let mut e = b.expr(rows);
        e[(0, b.slack("nu_bar", j))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (2 * n, n * n)).copy_from(&(&mp.r * inv_sqrt2));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("er{j}.soc_r"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;

        let rows = 1 + n * n;
        let mut e = b.expr(rows);
        e[(0, b.slack("phi_bar", j))] = 1.0;
        let mut qb = DMatrix::zeros(rows, n * n);
        qb.view_mut((1, 0), (n * n, n * n)).copy_from(&(&mp.a_norm * par.v_q));
        b.set_q(&mut e, &qb, 1.0);
        b.push(format!("er{j}.soc_a"), e, DVector::zeros(rows), ConeTag::SecondOrder(rows))?;
    }

    b.push_q_psd(n)?;
    Ok(b.finish())
}

/// Baseline that treats the estimates as exact.
pub fn build_power_min_nonrobust(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<ConicProgram> {
    let nz = Normalized::new(cs, cfg)?;
    let mut b = Builder::new(&nz, &[])?;
    let n = nz.n;
    let hq = one_row(&row_vector(columns(n, 1, |x| vec![quad(&nz.h, x)])));
    for (i, eve) in nz.eves.iter().enumerate() {
        let tr = row_vector(columns(n, 1, |x| vec![(eve.hmat.adjoint() * x * &eve.hmat).trace().re]));
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&tr), -1.0);
        b.set_q(&mut e, &hq, nz.rate_factor);
        b.push(format!("eve{i}.rate"), e, DVector::from_element(1, nz.rate_factor - 1.0), ConeTag::Nonneg(1))?;
    }
    for (j, er) in nz.ers.iter().enumerate() {
        let gq = row_vector(columns(n, 1, |x| vec![quad(&er.g, x)]));
        let mut e = b.expr(1);
        b.set_q(&mut e, &one_row(&gq), 1.0);
        b.push(format!("er{j}.eh"), e, DVector::from_element(1, -er.target), ConeTag::Nonneg(1))?;
    }
    b.push_q_psd(n)?;
    Ok(b.finish())
}

/// Builds the power-minimisation program of a convex method.
pub fn build_power_min(cs: &ChannelSet, cfg: &ScenarioConfig, method: MethodTag) -> Result<ConicProgram> {
    match method {
        MethodTag::Bti => build_power_min_bti(cs, cfg),
        MethodTag::SProcedure => build_power_min_sproc(cs, cfg),
        MethodTag::Ldi => build_power_min_ldi(cs, cfg),
        MethodTag::NonRobust => build_power_min_nonrobust(cs, cfg),
        MethodTag::Mrt => Err(Error::Config("MRT is a closed-form design, not a program".into())),
    }
}

/// Beamforming along the IR channel with the full budget.
pub fn mrt_design(cs: &ChannelSet, cfg: &ScenarioConfig) -> Result<BeamformingDesign> {
    let hn2 = cs.h.norm_squared();
    if !(hn2 > 0.0) {
        return Err(Error::Domain("IR channel is zero".into()));
    }
    if !(cfg.power_budget > 0.0) {
        return Err(Error::Domain("MRT needs a positive power budget".into()));
    }
    let b = &cs.h * C64::new((cfg.power_budget / hn2).sqrt(), 0.0);
    Ok(BeamformingDesign::rank_one(b, MethodTag::Mrt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig3() -> (ScenarioConfig, ChannelSet) {
        let cfg = ScenarioConfig::preset("fig3").unwrap();
        let cs = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        (cfg, cs)
    }

    fn psd_sides(p: &ConicProgram) -> Vec<usize> {
        let mut v: Vec<usize> = p
            .blocks()
            .iter()
            .filter_map(|b| match b.cone {
                ConeTag::Psd(s) => Some(s),
                _ => None,
            })
            .collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn bti_block_structure() {
        let (cfg, cs) = fig3();
        let p = build_power_min_bti(&cs, &cfg).unwrap();
        assert_eq!(psd_sides(&p), vec![16, 16, 16, 16, 32, 32]);
        let (zero, nonneg, soc, psd) = p.cone_counts();
        assert_eq!((zero, soc, psd), (0, 5, 6));
        // five linear rows plus one slack-bound block
        assert_eq!(nonneg, 6);
        let slack_rows = p.blocks().iter().find(|b| b.label == "slack.nonneg").unwrap().b.len();
        assert_eq!(slack_rows, 10);
        for name in ["psi", "omega", "nu", "phi"] {
            assert!(p.var(name).is_some(), "{name}");
        }
    }

    #[test]
    fn sproc_block_structure() {
        let (cfg, cs) = fig3();
        let p = build_power_min_sproc(&cs, &cfg).unwrap();
        assert_eq!(psd_sides(&p), vec![16, 18, 18, 18, 34, 34]);
        let mu = p.blocks().iter().find(|b| b.label == "mu.nonneg").unwrap();
        assert_eq!(mu.cone, ConeTag::Nonneg(5));
        assert_eq!(p.var("mu_H").unwrap().len(), 2);
        assert_eq!(p.var("mu_g").unwrap().len(), 3);
    }

    #[test]
    fn ldi_block_structure() {
        let (cfg, cs) = fig3();
        let p = build_power_min_ldi(&cs, &cfg).unwrap();
        assert_eq!(psd_sides(&p), vec![16]);
        let (zero, nonneg, soc, psd) = p.cone_counts();
        assert_eq!((zero, nonneg, soc, psd), (0, 5, 10, 1));
    }

    #[test]
    fn params_radius_grows_with_dof() {
        let mut cfg = ScenarioConfig::preset("fig2").unwrap();
        let big = RestrictionParams::new(&cfg).unwrap().gamma_eve[0];
        cfg.n_tx = 4;
        cfg.eve_antennas = vec![2; 3];
        let small = RestrictionParams::new(&cfg).unwrap().gamma_eve[0];
        assert!(big > small);
        let par = RestrictionParams::new(&cfg).unwrap();
        assert!(par.v_p > std::f64::consts::FRAC_1_SQRT_2);
    }

    #[test]
    fn nonpositive_rate_rejected() {
        let (mut cfg, cs) = fig3();
        cfg.rate_target = 0.0;
        for m in [MethodTag::Bti, MethodTag::SProcedure, MethodTag::Ldi, MethodTag::NonRobust] {
            assert!(build_power_min(&cs, &cfg, m).is_err());
        }
    }

    #[test]
    fn method_names_roundtrip() {
        for m in MethodTag::ALL {
            assert_eq!(m.as_str().parse::<MethodTag>().unwrap(), m);
        }
        assert_eq!(MethodTag::parse_list("robust,mrt").unwrap().len(), 4);
        assert!(MethodTag::parse_list("bti,foo").is_err());
    }

    #[test]
    fn mrt_closed_form() {
        let (mut cfg, mut cs) = fig3();
        cfg.power_budget = 2.0;
        cs.h = CVec::zeros(cfg.n_tx);
        cs.h[0] = C64::new(1.0, 0.0);
        let d = mrt_design(&cs, &cfg).unwrap();
        assert!((d.q.as_matrix()[(0, 0)].re - 2.0).abs() < 1e-15);
        assert!((d.power - 2.0).abs() < 1e-15);
        assert_eq!(d.rank_ratio, 0.0);
    }
}
