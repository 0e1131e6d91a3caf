use swipt_core::solver::reference::{reference_problems, Expected};
use swipt_core::{solve, SolveStatus, SolverSettings};

#[test]
fn reference_problems_solve_to_closed_form() {
    let settings = SolverSettings::default();
    for p in reference_problems() {
        let sol = solve(&p.program, &settings);
        assert_eq!(sol.status, p.expected.status(), "{}", p.name);
        if let Expected::Optimal(v) = p.expected {
            let err = (sol.primal_objective - v).abs();
            assert!(err <= 1e-6 || err <= 1e-6 * v.abs(), "{}: {} vs {v}", p.name, sol.primal_objective);
        }
    }
}

#[test]
fn infeasibility_certificates_are_normalised() {
    for p in reference_problems() {
        let sol = solve(&p.program, &SolverSettings::default());
        if sol.status == SolveStatus::PrimalInfeasible {
            // b^T y = -1 for the returned ray.
            let mut off = 0;
            let mut bty = 0.0;
            for (blk, y) in p.program.blocks().iter().zip(&sol.duals) {
                bty += blk.b.dot(y);
                off += y.len();
            }
            assert!(off > 0);
            assert!((bty + 1.0).abs() < 1e-8, "{}: b^T y = {bty}", p.name);
        }
    }
}
