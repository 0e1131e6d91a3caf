//! Per-cone Nesterov-Todd scaling, Jordan algebra and step-length rules.

use nalgebra::DMatrix;

use crate::conic::ConeTag;
use crate::hermitian::{smat_into, svec_into};

/// Why a scaling could not be formed.
#[derive(Debug)]
pub(crate) struct NotInterior;

/// NT scaling of one cone at the current `(s, z)`.
#[derive(Clone, Debug)]
pub(crate) enum Scaling {
    Zero,
    /// `W = diag(w)`.
    Nonneg { w: Vec<f64> },
    /// `W = eta [[w0, w1^T], [w1, I + w1 w1^T / (1 + w0)]]`.
    Soc { eta: f64, w: Vec<f64> },
    /// `W z = R^T Z R`, `W^{-T} s = R^{-1} S R^{-T}`.
    Psd {
        side: usize,
        r: DMatrix<f64>,
        rinv: DMatrix<f64>,
    },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `u0^2 - ||u1||^2`, evaluated as a product to limit cancellation.
fn soc_det(u: &[f64]) -> f64 {
    let n1 = dot(&u[1..], &u[1..]).sqrt();
    (u[0] - n1) * (u[0] + n1)
}

impl Scaling {
    /// Computes the scaling and writes `lambda = W z` into `lambda`.
    pub(crate) fn compute(
        cone: ConeTag,
        s: &[f64],
        z: &[f64],
        lambda: &mut [f64],
    ) -> Result<Self, NotInterior> {
        match cone {
            ConeTag::Zero(_) => Ok(Scaling::Zero),
            ConeTag::Nonneg(_) => {
                let mut w = Vec::with_capacity(s.len());
                for i in 0..s.len() {
                    if !(s[i] > 0.0 && z[i] > 0.0) {
                        return Err(NotInterior);
                    }
                    w.push((s[i] / z[i]).sqrt());
                    lambda[i] = (s[i] * z[i]).sqrt();
                }
                Ok(Scaling::Nonneg { w })
            }
            ConeTag::SecondOrder(_) => {
                let sd = soc_det(s);
                let zd = soc_det(z);
                if !(sd > 0.0 && zd > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
                    return Err(NotInterior);
                }
                let sr = sd.sqrt();
                let zr = zd.sqrt();
                let sb: Vec<f64> = s.iter().map(|v| v / sr).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zr).collect();
                let gamma = ((1.0 + dot(&sb, &zb)) / 2.0).sqrt();
                let mut w = Vec::with_capacity(s.len());
                w.push((sb[0] + zb[0]) / (2.0 * gamma));
                for i in 1..s.len() {
                    w.push((sb[i] - zb[i]) / (2.0 * gamma));
                }
                let eta = (sr / zr).sqrt();
                let sc = Scaling::Soc { eta, w };
                sc.apply_w(z, lambda);
                Ok(sc)
            }
            ConeTag::Psd(side) => {
                let mut sm = DMatrix::zeros(side, side);
                let mut zm = DMatrix::zeros(side, side);
                smat_into(s, &mut sm);
                smat_into(z, &mut zm);
                let ls = sm.cholesky().ok_or(NotInterior)?.unpack();
                let lz = zm.cholesky().ok_or(NotInterior)?.unpack();
                let m = lz.transpose() * &ls;
                let svd = m.svd(true, true);
                let u = svd.u.ok_or(NotInterior)?;
                let vt = svd.v_t.ok_or(NotInterior)?;
                let sig = svd.singular_values;
                if sig.iter().any(|&x| !(x > 0.0)) {
                    return Err(NotInterior);
                }
                let mut r = ls * vt.transpose();
                let mut rinv = u.transpose() * lz.transpose();
                for k in 0..side {
                    let f = sig[k].sqrt();
                    r.column_mut(k).scale_mut(1.0 / f);
                    rinv.row_mut(k).scale_mut(1.0 / f);
                }
                let mut k = 0;
                for j in 0..side {
                    lambda[k] = sig[j];
                    k += 1;
                    for _ in j + 1..side {
                        lambda[k] = 0.0;
                        k += 1;
                    }
                }
                Ok(Scaling::Psd { side, r, rinv })
            }
        }
    }

    /// `out = W u`.
    pub(crate) fn apply_w(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Scaling::Nonneg { w } => {
                for i in 0..u.len() {
                    out[i] = w[i] * u[i];
                }
            }
            Scaling::Soc { eta, w } => {
                let w1u1 = dot(&w[1..], &u[1..]);
                out[0] = eta * (w[0] * u[0] + w1u1);
                let f = u[0] + w1u1 / (1.0 + w[0]);
                for i in 1..u.len() {
                    out[i] = eta * (u[i] + f * w[i]);
                }
            }
            Scaling::Psd { side, r, .. } => congruence(u, r, true, *side, out),
        }
    }

    /// `out = W^{-1} u`.
    pub(crate) fn apply_winv(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            Scaling::Nonneg { w } => {
                for i in 0..u.len() {
                    out[i] = u[i] / w[i];
                }
            }
            Scaling::Soc { eta, w } => {
                let w1u1 = dot(&w[1..], &u[1..]);
                out[0] = (w[0] * u[0] - w1u1) / eta;
                let f = -u[0] + w1u1 / (1.0 + w[0]);
                for i in 1..u.len() {
                    out[i] = (u[i] + f * w[i]) / eta;
                }
            }
            // W^{-1} U = R^{-T} U R^{-1}
            Scaling::Psd { side, rinv, .. } => congruence(u, rinv, true, *side, out),
        }
    }

    /// `out = W^T u`.
    pub(crate) fn apply_wt(&self, u: &[f64], out: &mut [f64]) {
        match self {
            // W^T U = R U R^T
            Scaling::Psd { side, r, .. } => congruence(u, r, false, *side, out),
            _ => self.apply_w(u, out),
        }
    }

    /// `out = W^{-T} u`.
    pub(crate) fn apply_winv_t(&self, u: &[f64], out: &mut [f64]) {
        match self {
            // W^{-T} U = R^{-1} U R^{-T}
            Scaling::Psd { side, rinv, .. } => congruence(u, rinv, false, *side, out),
            _ => self.apply_winv(u, out),
        }
    }
}

/// `svec(M^T U M)` when `transpose_left`, else `svec(M U M^T)`.
fn congruence(u: &[f64], m: &DMatrix<f64>, transpose_left: bool, side: usize, out: &mut [f64]) {
    let mut um = DMatrix::zeros(side, side);
    smat_into(u, &mut um);
    let res = if transpose_left {
        m.transpose() * um * m
    } else {
        m * um * m.transpose()
    };
    svec_into(&res, out);
}

/// Jordan product `u o v` written into `out`.
pub(crate) fn jordan_product(cone: ConeTag, u: &[f64], v: &[f64], out: &mut [f64]) {
    match cone {
        ConeTag::Zero(_) => out.iter_mut().for_each(|x| *x = 0.0),
        ConeTag::Nonneg(_) => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        ConeTag::SecondOrder(_) => {
            out[0] = dot(u, v);
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
        ConeTag::Psd(side) => {
            let mut um = DMatrix::zeros(side, side);
            let mut vm = DMatrix::zeros(side, side);
            smat_into(u, &mut um);
            smat_into(v, &mut vm);
            let p = &um * &vm;
            let sym = (&p + p.transpose()) * 0.5;
            svec_into(&sym, out);
        }
    }
}

/// Solves `lambda o u = d` for `u`; `lambda` is the scaled point, which is
/// diagonal for PSD cones.
pub(crate) fn jordan_inverse(cone: ConeTag, lambda: &[f64], d: &[f64], out: &mut [f64]) {
    match cone {
        ConeTag::Zero(_) => out.iter_mut().for_each(|x| *x = 0.0),
        ConeTag::Nonneg(_) => {
            for i in 0..d.len() {
                out[i] = d[i] / lambda[i];
            }
        }
        ConeTag::SecondOrder(_) => {
            let det = soc_det(lambda);
            let u0 = (lambda[0] * d[0] - dot(&lambda[1..], &d[1..])) / det;
            out[0] = u0;
            for i in 1..d.len() {
                out[i] = (d[i] - u0 * lambda[i]) / lambda[0];
            }
        }
        ConeTag::Psd(side) => {
            let diag = psd_diagonal(lambda, side);
            let mut k = 0;
            for j in 0..side {
                for i in j..side {
                    out[k] = 2.0 * d[k] / (diag[i] + diag[j]);
                    k += 1;
                }
            }
        }
    }
}

fn psd_diagonal(lambda: &[f64], side: usize) -> Vec<f64> {
    let mut diag = Vec::with_capacity(side);
    let mut k = 0;
    for j in 0..side {
        diag.push(lambda[k]);
        k += side - j;
    }
    diag
}

/// Adds `alpha * e` (the cone identity) to `x`.
pub(crate) fn add_identity(cone: ConeTag, x: &mut [f64], alpha: f64) {
    match cone {
        ConeTag::Zero(_) => {}
        ConeTag::Nonneg(_) => x.iter_mut().for_each(|v| *v += alpha),
        ConeTag::SecondOrder(_) => x[0] += alpha,
        ConeTag::Psd(side) => {
            let mut k = 0;
            for j in 0..side {
                x[k] += alpha;
                k += side - j;
            }
        }
    }
}

/// Largest `alpha` with `lambda + alpha d` in the cone, for `lambda` in the
/// interior (diagonal for PSD cones). Returns `f64::INFINITY` if unbounded.
pub(crate) fn max_step(cone: ConeTag, lambda: &[f64], d: &[f64]) -> f64 {
    match cone {
        ConeTag::Zero(_) => f64::INFINITY,
        ConeTag::Nonneg(_) => {
            let mut a = f64::INFINITY;
            for i in 0..d.len() {
                if d[i] < 0.0 {
                    a = a.min(-lambda[i] / d[i]);
                }
            }
            a
        }
        ConeTag::SecondOrder(_) => soc_step(lambda, d),
        ConeTag::Psd(side) => {
            let diag = psd_diagonal(lambda, side);
            let mut dm = DMatrix::zeros(side, side);
            smat_into(d, &mut dm);
            for i in 0..side {
                for j in 0..side {
                    dm[(i, j)] /= (diag[i] * diag[j]).sqrt();
                }
            }
            let min = dm
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / min
            }
        }
    }
}

/// Smallest positive root of `det(x + alpha d) = 0` for interior `x`.
fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    // The head must stay nonnegative. This also caps the double root that
    // rounding can hide from the discriminant test, e.g. when the tail is zero.
    let head = if d[0] < 0.0 { -x[0] / d[0] } else { f64::INFINITY };
    let a = soc_det(d);
    let b = 2.0 * (x[0] * d[0] - dot(&x[1..], &d[1..]));
    let c = soc_det(x);
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return head;
    }
    if a.abs() <= 1e-14 * scale {
        return if b < 0.0 { (-c / b).min(head) } else { head };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // a > 0 and no real roots: det stays positive on the whole ray.
        return head;
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let roots = [q / a, if q != 0.0 { c / q } else { f64::INFINITY }];
    let mut best = head;
    for r in roots {
        if r > 0.0 && r < best {
            best = r;
        }
    }
    best
}
