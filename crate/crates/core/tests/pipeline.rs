use orthext::dp::{audit_face, solve_bmoe, solve_face, Execution, SolveOptions, SolveStatus};
use orthext::gen;
use orthext::oracle::{default_candidates, oracle_solve, MAX_CANDIDATES};
use proptest::prelude::*;

fn opts(execution: Execution) -> SolveOptions {
    SolveOptions { execution, ..SolveOptions::default() }
}

#[test]
fn complete_drawing_needs_no_bends() {
    let (inst, known) = gen::showcase();
    let full = orthext::instance::BmoeInstance { drawing: known, ..inst };
    let res = solve_bmoe(&full, &opts(Execution::Sequential)).unwrap();
    assert_eq!(res.beta(), Some(0));
}

#[test]
fn modes_agree_on_the_sample_instance() {
    let (inst, _) = gen::showcase();
    let a = solve_bmoe(&inst, &opts(Execution::Sequential)).unwrap();
    let b = solve_bmoe(&inst, &opts(Execution::Parallel)).unwrap();
    assert_eq!(a.beta(), Some(1));
    assert_eq!(a.status, b.status);
}

#[test]
fn budget_below_optimum_is_reported() {
    let (inst, _) = gen::showcase();
    let o = SolveOptions { budget: Some(0), ..opts(Execution::Sequential) };
    let res = solve_bmoe(&inst, &o).unwrap();
    assert!(matches!(res.status, SolveStatus::NoExtension { cap: 0 }));
}

#[test]
fn finer_grid_never_costs_more() {
    for case in gen::tiny_suite().into_iter().filter(|c| !c.face.outer) {
        let coarse = solve_face(&case.face, &SolveOptions { grid_scale: 2, ..opts(Execution::Sequential) }, 8).unwrap();
        let fine = solve_face(&case.face, &opts(Execution::Sequential), 8).unwrap();
        if let Some(c) = coarse.beta {
            assert!(fine.beta.is_some_and(|f| f <= c), "{}: {:?} vs {c}", case.name, fine.beta);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_faces_are_sound_and_optimal(seed in 0u64..100_000, q in 1usize..3) {
        let fi = gen::clean_face(seed, 10, q);
        let out = solve_face(&fi, &opts(Execution::Sequential), 8).unwrap();
        let beta = out.beta.expect("inner faces always extend");
        prop_assert_eq!(audit_face(&fi, &out.drawing), Ok(beta));
        if default_candidates(&fi).len() <= MAX_CANDIDATES {
            let truth = oracle_solve(&fi, None, 8, None).unwrap().map(|s| s.beta);
            prop_assert_eq!(Some(beta), truth);
        }
    }
}
