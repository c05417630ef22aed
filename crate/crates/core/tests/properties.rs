use proptest::prelude::*;

use stratify::cli::{run_solver, Solver, SolverArgs};
use stratify::metrics::{compute_scales, objective};
use stratify::synthetic::{mirrored, random_cohort};
use stratify::{validate_assignment, AssignmentConstraints, ObjectiveConfig};

fn solver() -> impl Strategy<Value = Solver> {
    prop_oneof![
        Just(Solver::Exact),
        Just(Solver::Tabu),
        Just(Solver::Anneal),
        Just(Solver::QuboAnneal),
        Just(Solver::Qaoa),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Whatever the backend, the answer is feasible, reported with the
    /// reference objective, and never better than the exact optimum.
    #[test]
    fn every_backend_is_feasible_and_bounded_by_exact(
        n in 6usize..=10,
        seed in any::<u64>(),
        backend in solver(),
        tolerance in 0usize..=1,
        alpha in 0.0f64..2.0,
    ) {
        let cohort = random_cohort(n, 2, 1, seed);
        let constraints = AssignmentConstraints::new(2, tolerance).unwrap();
        let cfg = ObjectiveConfig::new(alpha, 1.0).unwrap();
        let args = SolverArgs { solver: backend, seed, restarts: 3, sweeps: 200, ..Default::default() };
        let got = run_solver(&cohort, &constraints, &cfg, &args).unwrap();
        prop_assert!(validate_assignment(&cohort, &constraints, &got.assignment).unwrap().is_valid());
        let reference = objective(&cohort, &got.assignment, 2, &cfg, &compute_scales(&cohort)).unwrap();
        prop_assert_eq!(reference.objective, got.objective);

        let exact = run_solver(&cohort, &constraints, &cfg, &SolverArgs { solver: Solver::Exact, ..Default::default() }).unwrap();
        prop_assert!(exact.objective <= got.objective + 1e-12);
    }

    /// A cohort made of twin pairs can always be split perfectly.
    #[test]
    fn twin_cohorts_have_a_zero_optimum(n in 3usize..=6, seed in any::<u64>()) {
        let (cohort, twins) = mirrored(&random_cohort(n, 2, 2, seed));
        let cfg = ObjectiveConfig::default();
        let scales = compute_scales(&cohort);
        prop_assert_eq!(objective(&cohort, &twins, 2, &cfg, &scales).unwrap().objective, 0.0);
        let constraints = AssignmentConstraints::two_arms();
        let exact = run_solver(&cohort, &constraints, &cfg, &SolverArgs { solver: Solver::Exact, ..Default::default() }).unwrap();
        prop_assert!(exact.objective < 1e-9);
    }
}
