//! Dense primal-dual interior-point method for [`ConicProgram`]s.
//!
//! The program `min c^T x, b - A x in K` is solved through its homogeneous
//! self-dual embedding
//!
//! ```text
//!   A^T z + c tau          = 0
//!   A x + s - b tau        = 0
//!   c^T x + b^T z + kappa  = 0,     s, z in K,  tau, kappa >= 0
//! ```
//!
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Each
//! Newton system is reduced to the normal equations `A^T W^{-1} W^{-T} A`
//! (plus an augmented block for equality rows) and factored by a dense
//! LDL^T with dynamic regularization. A vanishing `tau / kappa` ratio
//! together with a small certificate residual signals infeasibility.

mod cones;
mod ldl;
pub mod reference;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{ConeSolution, ConeTag, ConicProgram, IterationRecord, SolveStatus};
use cones::{add_identity, jordan_inverse, jordan_product, max_step, Scaling};
use ldl::Ldl;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Relative complementarity / objective gap at optimality.
    pub tol_gap: f64,
    /// Relative primal and dual residuals at optimality.
    pub tol_feas: f64,
    /// Residual allowed on a normalized infeasibility certificate.
    pub tol_infeas: f64,
    /// `tau / kappa` below which a certificate is accepted.
    pub tau_kappa_ratio: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    /// Static regularization on the normal-equation diagonal.
    pub static_reg: f64,
    /// Replacement magnitude for tiny or wrong-signed pivots.
    pub dynamic_reg: f64,
    pub refine_steps: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-7,
            tol_feas: 1e-7,
            tol_infeas: 1e-8,
            tau_kappa_ratio: 1e-6,
            max_iter: 200,
            step_fraction: 0.99,
            static_reg: 1e-9,
            dynamic_reg: 1e-9,
            refine_steps: 3,
        }
    }
}

struct Layout {
    cones: Vec<ConeTag>,
    offsets: Vec<usize>,
    rows: usize,
    degree: usize,
    zero_rows: Vec<usize>,
}

impl Layout {
    fn new(prog: &ConicProgram) -> Self {
        let mut cones = Vec::new();
        let mut offsets = Vec::new();
        let mut rows = 0;
        let mut degree = 0;
        let mut zero_rows = Vec::new();
        for b in prog.blocks() {
            cones.push(b.cone);
            offsets.push(rows);
            if let ConeTag::Zero(d) = b.cone {
                zero_rows.extend(rows..rows + d);
            }
            rows += b.cone.rows();
            degree += b.cone.degree();
        }
        Self { cones, offsets, rows, degree, zero_rows }
    }

    fn range(&self, j: usize) -> std::ops::Range<usize> {
        self.offsets[j]..self.offsets[j] + self.cones[j].rows()
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.rows);
        for (j, &cone) in self.cones.iter().enumerate() {
            add_identity(cone, &mut e.as_mut_slice()[self.range(j)], 1.0);
        }
        e
    }
}

/// Scalings for every cone and the scaled point `lambda`.
struct Scalings {
    per_cone: Vec<Scaling>,
    lambda: DVector<f64>,
}

impl Scalings {
    fn compute(layout: &Layout, s: &DVector<f64>, z: &DVector<f64>) -> Option<Self> {
        let mut lambda = DVector::zeros(layout.rows);
        let mut per_cone = Vec::with_capacity(layout.cones.len());
        for (j, &cone) in layout.cones.iter().enumerate() {
            let r = layout.range(j);
            let sc = Scaling::compute(
                cone,
                &s.as_slice()[r.clone()],
                &z.as_slice()[r.clone()],
                &mut lambda.as_mut_slice()[r],
            )
            .ok()?;
            per_cone.push(sc);
        }
        Some(Self { per_cone, lambda })
    }

    fn map(
        &self,
        layout: &Layout,
        u: &DVector<f64>,
        f: impl Fn(&Scaling, &[f64], &mut [f64]),
    ) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for j in 0..layout.cones.len() {
            let r = layout.range(j);
            f(&self.per_cone[j], &u.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
        }
        out
    }

    fn w(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        self.map(layout, u, |s, a, b| s.apply_w(a, b))
    }
    fn wt(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        self.map(layout, u, |s, a, b| s.apply_wt(a, b))
    }
    fn winv(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        self.map(layout, u, |s, a, b| s.apply_winv(a, b))
    }
    fn winv_t(&self, layout: &Layout, u: &DVector<f64>) -> DVector<f64> {
        self.map(layout, u, |s, a, b| s.apply_winv_t(a, b))
    }
}

fn cone_map2(
    layout: &Layout,
    u: &DVector<f64>,
    v: &DVector<f64>,
    f: impl Fn(ConeTag, &[f64], &[f64], &mut [f64]),
) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for (j, &cone) in layout.cones.iter().enumerate() {
        let r = layout.range(j);
        f(cone, &u.as_slice()[r.clone()], &v.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
    }
    out
}

/// Factored reduced Newton system.
struct Kkt {
    ldl: Ldl,
    h: DMatrix<f64>,
    az: DMatrix<f64>,
    g: DMatrix<f64>,
    n: usize,
    refine: usize,
}

impl Kkt {
    fn factor(
        a: &DMatrix<f64>,
        layout: &Layout,
        sc: &Scalings,
        settings: &SolverSettings,
    ) -> Option<Self> {
        let n = a.ncols();
        let mut g = DMatrix::zeros(layout.rows, n);
        let mut col_in = vec![0.0; layout.rows];
        let mut col_out = vec![0.0; layout.rows];
        for c in 0..n {
            col_in.copy_from_slice(a.column(c).as_slice());
            for j in 0..layout.cones.len() {
                let r = layout.range(j);
                sc.per_cone[j].apply_winv_t(&col_in[r.clone()], &mut col_out[r]);
            }
            g.column_mut(c).copy_from_slice(&col_out);
        }
        let h = g.tr_mul(&g);
        let mz = layout.zero_rows.len();
        let mut az = DMatrix::zeros(mz, n);
        for (i, &row) in layout.zero_rows.iter().enumerate() {
            az.row_mut(i).copy_from(&a.row(row));
        }
        let mut k = DMatrix::zeros(n + mz, n + mz);
        k.view_mut((0, 0), (n, n)).copy_from(&h);
        for i in 0..n {
            k[(i, i)] += settings.static_reg;
        }
        if mz > 0 {
            k.view_mut((n, 0), (mz, n)).copy_from(&az);
            k.view_mut((0, n), (n, mz)).copy_from(&az.transpose());
            for i in 0..mz {
                k[(n + i, n + i)] = -settings.static_reg;
            }
        }
        if k.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let ldl = Ldl::factor(k, n, 1e-13, settings.dynamic_reg);
        Some(Self { ldl, h, az, g, n, refine: settings.refine_steps })
    }

    fn apply_reduced(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mz = self.az.nrows();
        let ux = u.rows(0, n).into_owned();
        let mut out = DVector::zeros(n + mz);
        let mut top = &self.h * &ux;
        if mz > 0 {
            let uz = u.rows(n, mz).into_owned();
            top += self.az.tr_mul(&uz);
            out.rows_mut(n, mz).copy_from(&(&self.az * &ux));
        }
        out.rows_mut(0, n).copy_from(&top);
        out
    }

    fn solve_reduced(
        &self,
        layout: &Layout,
        sc: &Scalings,
        bx: &DVector<f64>,
        bz: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let n = self.n;
        let mz = layout.zero_rows.len();
        let wbz = sc.winv_t(layout, bz);
        let mut rhs = DVector::zeros(n + mz);
        rhs.rows_mut(0, n).copy_from(&(bx + self.g.tr_mul(&wbz)));
        for (i, &row) in layout.zero_rows.iter().enumerate() {
            rhs[n + i] = bz[row];
        }
        let mut u = self.ldl.solve(&rhs);
        // One correction for the regularisation of the factored matrix.
        let r = &rhs - self.apply_reduced(&u);
        u += self.ldl.solve(&r);
        let ux = u.rows(0, n).into_owned();
        let t = &self.g * &ux - wbz;
        let mut uz = sc.winv(layout, &t);
        for (i, &row) in layout.zero_rows.iter().enumerate() {
            uz[row] = u[n + i];
        }
        (ux, uz)
    }

    /// Solves `[[0, A^T], [A, -W^T W]] [ux; uz] = [bx; bz]`, refining
    /// against the unreduced system since forming `G^T G` squares its
    /// conditioning.
    fn solve(
        &self,
        a: &DMatrix<f64>,
        layout: &Layout,
        sc: &Scalings,
        bx: &DVector<f64>,
        bz: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let (mut ux, mut uz) = self.solve_reduced(layout, sc, bx, bz);
        let scale = bx.amax().max(bz.amax()).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..self.refine {
            let rx = bx - a.tr_mul(&uz);
            let wwz = sc.wt(layout, &sc.w(layout, &uz));
            let rz = bz - a * &ux + wwz;
            let res = rx.amax().max(rz.amax());
            if res <= 1e-14 * scale || res >= 0.5 * last {
                break;
            }
            last = res;
            let (dx, dz) = self.solve_reduced(layout, sc, &rx, &rz);
            ux += dx;
            uz += dz;
        }
        (ux, uz)
    }
}

fn stack(prog: &ConicProgram) -> (DMatrix<f64>, DVector<f64>) {
    let n = prog.num_vars();
    let m = prog.num_rows();
    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    let mut row = 0;
    for blk in prog.blocks() {
        let k = blk.b.len();
        a.view_mut((row, 0), (k, n)).copy_from(&blk.a);
        b.rows_mut(row, k).copy_from(&blk.b);
        row += k;
    }
    (a, b)
}

fn step_length(layout: &Layout, sc: &Scalings, ds_scaled: &DVector<f64>, dz_scaled: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for (j, &cone) in layout.cones.iter().enumerate() {
        let r = layout.range(j);
        let lam = &sc.lambda.as_slice()[r.clone()];
        alpha = alpha
            .min(max_step(cone, lam, &ds_scaled.as_slice()[r.clone()]))
            .min(max_step(cone, lam, &dz_scaled.as_slice()[r]));
    }
    alpha
}

struct Direction {
    dx: DVector<f64>,
    dz: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
    ds_scaled: DVector<f64>,
    dz_scaled: DVector<f64>,
}

/// Solves the interior-point program.
pub fn solve(prog: &ConicProgram, settings: &SolverSettings) -> ConeSolution {
    let layout = Layout::new(prog);
    let (a, b) = stack(prog);
    let c = prog.objective().clone();
    let n = prog.num_vars();
    let m = layout.rows;

    let norm_b = b.amax().max(1.0);
    let norm_c = c.amax().max(1.0);

    let mut x = DVector::zeros(n);
    let mut s = layout.identity();
    let mut z = layout.identity();
    let mut tau = 1.0_f64;
    let mut kappa = 1.0_f64;

    let mut log = Vec::new();
    let mut last_step = 0.0;
    let mut last_sigma = 0.0;
    let status;
    let mut certificate = None;
    let mut iter = 0;
    let mut stalls = 0;

    loop {
        // Residuals of the embedding.
        let ax = &a * &x;
        let atz = a.tr_mul(&z);
        let rx = &atz + &c * tau;
        let rz = &ax + &s - &b * tau;
        let ctx = c.dot(&x);
        let btz = b.dot(&z);
        let rt = kappa + ctx + btz;
        let sz = s.dot(&z);
        let mu = (sz + kappa * tau) / (layout.degree as f64 + 1.0);
        // Iterates stay interior; weak duality cannot be asserted on HSDE points.
        debug_assert!(sz >= -1e-12 * s.norm() * z.norm() && kappa * tau >= 0.0 || !mu.is_finite());

        let pcost = ctx / tau;
        let dcost = -btz / tau;
        let pres = rz.amax() / tau / norm_b;
        let dres = rx.amax() / tau / norm_c;
        let gap = sz / (tau * tau);
        log.push(IterationRecord {
            iter,
            primal_objective: pcost,
            dual_objective: dcost,
            gap,
            primal_residual: pres,
            dual_residual: dres,
            mu,
            tau,
            kappa,
            step: last_step,
            sigma: last_sigma,
        });

        let gap_scale = 1.0 + pcost.abs().min(dcost.abs());
        if pres <= settings.tol_feas
            && dres <= settings.tol_feas
            && gap <= settings.tol_gap * gap_scale
            && (pcost - dcost).abs() <= settings.tol_gap * gap_scale
        {
            status = SolveStatus::Optimal;
            break;
        }
        if tau <= settings.tau_kappa_ratio * kappa {
            if btz < 0.0 {
                let res = atz.amax() / -btz;
                if res <= settings.tol_infeas * norm_c {
                    status = SolveStatus::PrimalInfeasible;
                    certificate = Some(res);
                    break;
                }
            }
            if ctx < 0.0 {
                let res = (&ax + &s).amax() / -ctx;
                if res <= settings.tol_infeas * norm_b {
                    status = SolveStatus::DualInfeasible;
                    certificate = Some(res);
                    break;
                }
            }
        }
        if iter >= settings.max_iter {
            status = SolveStatus::MaxIter;
            break;
        }
        if !(mu.is_finite() && tau.is_finite() && kappa.is_finite()) {
            status = SolveStatus::Numerical;
            break;
        }

        let Some(sc) = Scalings::compute(&layout, &s, &z) else {
            status = SolveStatus::Numerical;
            break;
        };
        let Some(kkt) = Kkt::factor(&a, &layout, &sc, settings) else {
            status = SolveStatus::Numerical;
            break;
        };

        let (x1, z1) = kkt.solve(&a, &layout, &sc, &(-&c), &b);
        let denom = c.dot(&x1) + b.dot(&z1) - kappa / tau;

        let direction = |res_scale: f64, d_s: &DVector<f64>, d_kappa: f64| -> Direction {
            let lam_inv_ds = cone_map2(&layout, &sc.lambda, d_s, jordan_inverse);
            let bx = -&rx * res_scale;
            let mut bz = -&rz * res_scale + sc.wt(&layout, &lam_inv_ds);
            for &row in &layout.zero_rows {
                bz[row] = -rz[row] * res_scale;
            }
            let (x2, z2) = kkt.solve(&a, &layout, &sc, &bx, &bz);
            let dtau = (-rt * res_scale + d_kappa / tau - c.dot(&x2) - b.dot(&z2)) / denom;
            let dx = &x2 + &x1 * dtau;
            let dz = &z2 + &z1 * dtau;
            let dz_scaled = sc.w(&layout, &dz);
            let ds_scaled = -(&lam_inv_ds + &dz_scaled);
            let mut ds = sc.wt(&layout, &ds_scaled);
            for &row in &layout.zero_rows {
                ds[row] = 0.0;
            }
            let dkappa = -(d_kappa + kappa * dtau) / tau;
            Direction { dx, dz, ds, dtau, dkappa, ds_scaled, dz_scaled }
        };

        let max_alpha = |d: &Direction| -> f64 {
            let mut alpha = step_length(&layout, &sc, &d.ds_scaled, &d.dz_scaled);
            if d.dtau < 0.0 {
                alpha = alpha.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                alpha = alpha.min(-kappa / d.dkappa);
            }
            alpha
        };

        // Predictor.
        let lam_sq = cone_map2(&layout, &sc.lambda, &sc.lambda, jordan_product);
        let aff = direction(1.0, &lam_sq, kappa * tau);
        let alpha_aff = max_alpha(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // Corrector.
        let mut ds_comb = &lam_sq + cone_map2(&layout, &aff.ds_scaled, &aff.dz_scaled, jordan_product);
        for (j, &cone) in layout.cones.iter().enumerate() {
            let r = layout.range(j);
            add_identity(cone, &mut ds_comb.as_mut_slice()[r], -sigma * mu);
        }
        let dk_comb = kappa * tau + aff.dkappa * aff.dtau - sigma * mu;
        let dir = direction(1.0 - sigma, &ds_comb, dk_comb);
        let alpha = (settings.step_fraction * max_alpha(&dir)).min(1.0);

        if !(alpha.is_finite() && alpha > 0.0) {
            status = SolveStatus::Numerical;
            break;
        }
        if alpha < 1e-8 {
            stalls += 1;
            if stalls >= 5 {
                status = SolveStatus::Numerical;
                break;
            }
        } else {
            stalls = 0;
        }

        x += &dir.dx * alpha;
        s += &dir.ds * alpha;
        z += &dir.dz * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        last_step = alpha;
        last_sigma = sigma;
        iter += 1;
    }

    let _ = m;
    let ctx = c.dot(&x);
    let btz = b.dot(&z);
    let pres = log.last().map(|r| r.primal_residual).unwrap_or(f64::NAN);
    let dres = log.last().map(|r| r.dual_residual).unwrap_or(f64::NAN);
    let (xs, ss, zs, pobj, dobj, gap) = match status {
        SolveStatus::PrimalInfeasible => {
            let f = 1.0 / -btz;
            (x.clone() * 0.0, s.clone() * 0.0, &z * f, f64::INFINITY, f64::INFINITY, f64::NAN)
        }
        SolveStatus::DualInfeasible => {
            let f = 1.0 / -ctx;
            (&x * f, &s * f, z.clone() * 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NAN)
        }
        _ => (
            &x / tau,
            &s / tau,
            &z / tau,
            ctx / tau,
            -btz / tau,
            s.dot(&z) / (tau * tau),
        ),
    };
    let duals = (0..layout.cones.len())
        .map(|j| {
            let r = layout.range(j);
            DVector::from_column_slice(&zs.as_slice()[r])
        })
        .collect();
    ConeSolution {
        status,
        x: xs,
        s: ss,
        duals,
        primal_objective: pobj,
        dual_objective: dobj,
        gap,
        primal_residual: pres,
        dual_residual: dres,
        certificate_residual: certificate,
        iterations: iter,
        log,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_program(rows: &[(f64, f64)]) -> ConicProgram {
        // min x s.t. b - a x >= 0 for each (a, b)
        let mut p = ConicProgram::with_variables(&[("x", 1)]).unwrap();
        p.set_objective(DVector::from_element(1, 1.0)).unwrap();
        for (i, &(a, b)) in rows.iter().enumerate() {
            p.add_block(
                format!("r{i}"),
                DMatrix::from_element(1, 1, a),
                DVector::from_element(1, b),
                ConeTag::Nonneg(1),
            )
            .unwrap();
        }
        p
    }

    #[test]
    fn lp_lower_bound() {
        // x >= 1  <=>  -1 - (-1) x >= 0
        let sol = solve(&scalar_program(&[(-1.0, -1.0)]), &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6);
        assert!((sol.primal_objective - 1.0).abs() < 1e-6);
    }

    #[test]
    fn soc_norm() {
        // min t s.t. (t, 3, 4) in SOC
        let mut p = ConicProgram::with_variables(&[("t", 1)]).unwrap();
        p.set_objective(DVector::from_element(1, 1.0)).unwrap();
        p.add_block(
            "norm",
            DMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 3.0, 4.0]),
            ConeTag::SecondOrder(3),
        )
        .unwrap();
        let sol = solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 5.0).abs() < 1e-6, "{}", sol.x[0]);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        // x >= 1 and x <= 0
        let sol = solve(&scalar_program(&[(-1.0, -1.0), (1.0, 0.0)]), &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::PrimalInfeasible);
        assert!(sol.certificate_residual.unwrap() <= 1e-8);
    }

    #[test]
    fn unbounded_is_dual_infeasible() {
        // min x s.t. x <= 0
        let sol = solve(&scalar_program(&[(1.0, 0.0)]), &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::DualInfeasible);
    }

    #[test]
    fn equality_rows() {
        // min x + y s.t. x - y = 1, x, y >= 0  -> x = 1, y = 0
        let mut p = ConicProgram::with_variables(&[("v", 2)]).unwrap();
        p.set_objective(DVector::from_vec(vec![1.0, 1.0])).unwrap();
        p.add_block(
            "eq",
            DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
            DVector::from_element(1, 1.0),
            ConeTag::Zero(1),
        )
        .unwrap();
        p.add_block("pos", -DMatrix::identity(2, 2), DVector::zeros(2), ConeTag::Nonneg(2))
            .unwrap();
        let sol = solve(&p, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-6 && sol.x[1].abs() < 1e-6);
    }

    #[test]
    fn deterministic_iterates() {
        let p = scalar_program(&[(-1.0, -1.0), (-2.0, -0.5)]);
        let a = solve(&p, &SolverSettings::default());
        let b = solve(&p, &SolverSettings::default());
        assert_eq!(a.log, b.log);
        assert_eq!(a.x, b.x);
    }
}
