//! Small conic programs with closed-form answers, used to check the solver.

use nalgebra::{DMatrix, DVector};

use crate::conic::{ConeTag, ConicProgram, SolveStatus};
use crate::hermitian::{embed_matrix, hermitian_basis, svec_len, svec_unchecked, CVec, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Expected {
    Optimal(f64),
    PrimalInfeasible,
    DualInfeasible,
}

impl Expected {
    pub fn status(&self) -> SolveStatus {
        match self {
            Expected::Optimal(_) => SolveStatus::Optimal,
            Expected::PrimalInfeasible => SolveStatus::PrimalInfeasible,
            Expected::DualInfeasible => SolveStatus::DualInfeasible,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceProblem {
    pub name: String,
    pub program: ConicProgram,
    pub expected: Expected,
}

fn program(n: usize, c: &[f64]) -> ConicProgram {
    let mut p = ConicProgram::with_variables(&[("x", n)]).expect("valid layout");
    p.set_objective(DVector::from_column_slice(c)).expect("objective length");
    p
}

/// Adds `rows * x >= rhs` row-wise.
fn geq(p: &mut ConicProgram, rows: &[&[f64]], rhs: &[f64]) {
    let a = DMatrix::from_fn(rows.len(), p.num_vars(), |i, j| -rows[i][j]);
    let b = DVector::from_iterator(rhs.len(), rhs.iter().map(|v| -v));
    p.add_block("geq", a, b, ConeTag::Nonneg(rows.len())).expect("shape");
}

fn eq(p: &mut ConicProgram, rows: &[&[f64]], rhs: &[f64]) {
    let a = DMatrix::from_fn(rows.len(), p.num_vars(), |i, j| rows[i][j]);
    p.add_block("eq", a, DVector::from_column_slice(rhs), ConeTag::Zero(rows.len())).expect("shape");
}

/// `(t, a) in SOC` for `x = t`, `a` fixed.
fn fixed_norm(a: &[f64]) -> ReferenceProblem {
    let mut p = program(1, &[1.0]);
    let m = a.len() + 1;
    let mut am = DMatrix::zeros(m, 1);
    am[(0, 0)] = -1.0;
    let mut b = DVector::zeros(m);
    b.rows_mut(1, a.len()).copy_from_slice(a);
    p.add_block("soc", am, b, ConeTag::SecondOrder(m)).expect("shape");
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    ReferenceProblem { name: format!("soc-norm-{}", a.len()), program: p, expected: Expected::Optimal(norm) }
}

/// `min tr Q  s.t.  h^H Q h >= gamma, Q >= 0` over Hermitian `Q`; the
/// optimum is `gamma / ||h||^2`, attained by a multiple of `h h^H`.
pub fn rank_one_power_min(h: &CVec, gamma: f64) -> ConicProgram {
    let n = h.len();
    let dim = n * n;
    let mut p = ConicProgram::with_variables(&[("Q", dim)]).expect("valid layout");
    let mut c = DVector::zeros(dim);
    for i in 0..n {
        c[i] = 1.0;
    }
    p.set_objective(c).expect("objective length");
    let row = DMatrix::from_fn(1, dim, |_, k| {
        -(h.adjoint() * hermitian_basis(n, k) * h)[0].re
    });
    p.add_block("rate", row, DVector::from_element(1, -gamma), ConeTag::Nonneg(1)).expect("shape");
    let rows = svec_len(2 * n);
    let mut a = DMatrix::zeros(rows, dim);
    for k in 0..dim {
        let col = svec_unchecked(&embed_matrix(&hermitian_basis(n, k)));
        for (i, v) in col.into_iter().enumerate() {
            a[(i, k)] = -v;
        }
    }
    p.add_block("psd", a, DVector::zeros(rows), ConeTag::Psd(2 * n)).expect("shape");
    p
}

/// `min lambda  s.t.  lambda I - A >= 0`, optimum `lambda_max(A)`.
fn lambda_max(a: &DMatrix<f64>, expected: f64) -> ReferenceProblem {
    let n = a.nrows();
    let mut p = program(1, &[1.0]);
    let id = svec_unchecked(&DMatrix::identity(n, n));
    let col = DMatrix::from_fn(id.len(), 1, |i, _| -id[i]);
    let b = -DVector::from_vec(svec_unchecked(a));
    p.add_block("lmi", col, b, ConeTag::Psd(n)).expect("shape");
    ReferenceProblem { name: format!("lambda-max-{n}"), program: p, expected: Expected::Optimal(expected) }
}

/// `min <C, X>  s.t.  tr X = 1, X >= 0`, optimum `lambda_min(C)`.
fn lambda_min(c: &DMatrix<f64>, expected: f64) -> ReferenceProblem {
    let n = c.nrows();
    let m = svec_len(n);
    let mut p = program(m, &svec_unchecked(c));
    let id = svec_unchecked(&DMatrix::identity(n, n));
    eq(&mut p, &[&id], &[1.0]);
    p.add_block("psd", -DMatrix::identity(m, m), DVector::zeros(m), ConeTag::Psd(n)).expect("shape");
    ReferenceProblem { name: format!("lambda-min-{n}"), program: p, expected: Expected::Optimal(expected) }
}

fn named(name: &str, program: ConicProgram, expected: Expected) -> ReferenceProblem {
    ReferenceProblem { name: name.into(), program, expected }
}

/// The full suite.
pub fn reference_problems() -> Vec<ReferenceProblem> {
    let mut out = Vec::new();

    let mut p = program(1, &[1.0]);
    geq(&mut p, &[&[1.0]], &[3.0]);
    out.push(named("lp-bound", p, Expected::Optimal(3.0)));

    let mut p = program(2, &[1.0, 1.0]);
    geq(&mut p, &[&[1.0, 2.0], &[3.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]], &[4.0, 6.0, 0.0, 0.0]);
    out.push(named("lp-vertex", p, Expected::Optimal(2.8)));

    let mut p = program(2, &[-1.0, -1.0]);
    geq(&mut p, &[&[-1.0, -1.0], &[1.0, 0.0], &[0.0, 1.0]], &[-1.0, 0.0, 0.0]);
    out.push(named("lp-simplex-max", p, Expected::Optimal(-1.0)));

    let mut p = program(3, &[1.0, 2.0, 3.0]);
    eq(&mut p, &[&[1.0, 1.0, 1.0]], &[1.0]);
    geq(&mut p, &[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &[0.0; 3]);
    out.push(named("lp-probability-simplex", p, Expected::Optimal(1.0)));

    let mut p = program(2, &[2.0, 1.0]);
    eq(&mut p, &[&[1.0, 1.0]], &[3.0]);
    geq(&mut p, &[&[-1.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]], &[-1.0, 0.0, 0.0]);
    out.push(named("lp-equality-mixed", p, Expected::Optimal(3.0)));

    let n = 10;
    let mut p = program(n, &vec![1.0; n]);
    let eye: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    let rows: Vec<&[f64]> = eye.iter().map(|r| r.as_slice()).collect();
    let lbs: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    geq(&mut p, &rows, &lbs);
    out.push(named("lp-separable-10", p, Expected::Optimal(55.0)));

    for a in [&[3.0, 4.0][..], &[1.0, 2.0, 2.0], &[1.0; 10], &[0.0, 0.0, 7.0]] {
        out.push(fixed_norm(a));
    }

    // min t  s.t. ||x - (0,0)|| <= t, x1 >= 3, x2 >= 4  -> 5
    let mut p = program(3, &[1.0, 0.0, 0.0]);
    p.add_block("soc", -DMatrix::identity(3, 3), DVector::zeros(3), ConeTag::SecondOrder(3)).expect("shape");
    geq(&mut p, &[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]], &[3.0, 4.0]);
    out.push(named("soc-distance-to-box", p, Expected::Optimal(5.0)));

    // min x1 + x2  s.t. ||x|| <= 1  -> -sqrt(2)
    let mut p = program(2, &[1.0, 1.0]);
    let mut a = DMatrix::zeros(3, 2);
    a[(1, 0)] = -1.0;
    a[(2, 1)] = -1.0;
    p.add_block("soc", a, DVector::from_vec(vec![1.0, 0.0, 0.0]), ConeTag::SecondOrder(3)).expect("shape");
    out.push(named("soc-ball-linear", p, Expected::Optimal(-std::f64::consts::SQRT_2)));

    let r = std::f64::consts::FRAC_1_SQRT_2;
    let h = CVec::from_vec(vec![C64::new(r, 0.0), C64::new(r, 0.0)]);
    out.push(named("sdp-rank-one-real", rank_one_power_min(&h, 2.0), Expected::Optimal(2.0)));
    let h = CVec::from_vec(vec![C64::new(r, 0.0), C64::new(0.0, r)]);
    out.push(named("sdp-rank-one-complex", rank_one_power_min(&h, 2.0), Expected::Optimal(2.0)));
    let h = CVec::from_vec(vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0), C64::new(0.0, 0.0)]);
    out.push(named("sdp-rank-one-scaled", rank_one_power_min(&h, 10.0), Expected::Optimal(0.4)));
    let h = CVec::from_vec(vec![C64::new(0.5, 0.5), C64::new(-0.5, 0.5), C64::new(0.0, 1.0), C64::new(1.0, 0.0)]);
    out.push(named("sdp-rank-one-4", rank_one_power_min(&h, 3.0), Expected::Optimal(1.0)));

    out.push(lambda_max(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]), 3.0));
    out.push(lambda_max(&DMatrix::from_row_slice(3, 3, &[4.0, 0.0, 0.0, 0.0, -1.0, 2.0, 0.0, 2.0, -1.0]), 4.0));
    out.push(lambda_min(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0])), 1.0));

    // Infeasible and unbounded constructions.
    let mut p = program(1, &[1.0]);
    geq(&mut p, &[&[1.0], &[-1.0]], &[1.0, 0.0]);
    out.push(named("infeasible-lp-bounds", p, Expected::PrimalInfeasible));

    let mut p = program(2, &[0.0, 0.0]);
    let mut a = DMatrix::zeros(3, 2);
    a[(1, 0)] = -1.0;
    a[(2, 1)] = -1.0;
    p.add_block("soc", a, DVector::from_vec(vec![1.0, 0.0, 0.0]), ConeTag::SecondOrder(3)).expect("shape");
    geq(&mut p, &[&[1.0, 0.0]], &[2.0]);
    out.push(named("infeasible-ball-halfspace", p, Expected::PrimalInfeasible));

    let m = svec_len(2);
    let mut p = program(m, &[1.0, 0.0, 1.0]);
    let id = svec_unchecked(&DMatrix::identity(2, 2));
    eq(&mut p, &[&id], &[-1.0]);
    p.add_block("psd", -DMatrix::identity(m, m), DVector::zeros(m), ConeTag::Psd(2)).expect("shape");
    out.push(named("infeasible-negative-trace", p, Expected::PrimalInfeasible));

    let mut p = program(1, &[1.0]);
    geq(&mut p, &[&[-1.0]], &[0.0]);
    out.push(named("unbounded-lp", p, Expected::DualInfeasible));

    out
}
