mod common;

use common::{context, rng, term, CONVENTIONAL, KBS};
use kbsm::machine::Machine;
use kbsm::ports::{
    check_completeness, check_consistency_conventional, check_consistency_kbs, check_equivalence,
    check_homomorphism, Port, ProgramTranslation, Verdict,
};
use kbsm::Expr;
use proptest::prelude::*;

fn corpus(seed: u64, shape: common::TermShape) -> Vec<Expr> {
    let mut r = rng(seed);
    (0..8).map(|_| term(&mut r, 15, shape)).collect()
}

const BUDGET: u64 = 20_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn identity_port_is_reflexive(seed in any::<u64>()) {
        for m in [Machine::base(), Machine::arith()] {
            let id = Port::identity(m);
            let conv = corpus(seed, CONVENTIONAL);
            prop_assert!(check_consistency_conventional(&id, &conv, BUDGET).unwrap().passes());
            let kbs = corpus(seed, KBS);
            let r = check_consistency_kbs(&id, &kbs, BUDGET);
            prop_assert!(r.passes());
            prop_assert!(r.failed.is_empty() && r.incomplete.is_empty());
            let r = check_completeness(&id, &kbs, BUDGET);
            prop_assert!(r.failed.is_empty() && r.incomplete.is_empty() && r.untranslatable.is_empty());
        }
    }

    #[test]
    fn lossy_ports_satisfy_the_subset_law(seed in any::<u64>()) {
        let kbs = corpus(seed, KBS);
        for name in ["left-commit", "right-commit", "fail-elimination"] {
            let port = Port::builtin(name, Machine::arith(), Machine::arith()).unwrap();
            let r = check_consistency_kbs(&port, &kbs, BUDGET);
            prop_assert_ne!(r.verdict, Verdict::Inconsistent, "{}", r);
        }
    }

    #[test]
    fn equivalence_is_symmetric(seed in any::<u64>()) {
        let c = corpus(seed, KBS);
        let (a, b) = (Machine::arith(), Machine::base());
        prop_assert_eq!(check_equivalence(&a, &b, &c, 5_000).verdict, check_equivalence(&b, &a, &c, 5_000).verdict);
    }

    #[test]
    fn conventional_and_kbs_checks_agree_on_conventional_corpora(seed in any::<u64>()) {
        let c = corpus(seed, CONVENTIONAL);
        for name in kbsm::ports::BUILTIN_PORTS {
            let target = if name == "church-arithmetic" { Machine::base() } else { Machine::arith() };
            let port = Port::builtin(name, Machine::arith(), target).unwrap();
            let conv = check_consistency_conventional(&port, &c, BUDGET).unwrap();
            let kbs = check_consistency_kbs(&port, &c, BUDGET);
            prop_assert_eq!(conv.verdict == Verdict::Inconsistent, kbs.verdict == Verdict::Inconsistent, "{}\n{}", conv, kbs);
        }
    }

    #[test]
    fn structural_translations_are_homomorphisms(seed in any::<u64>()) {
        let mut r = rng(seed);
        let contexts: Vec<_> = (0..5).map(|_| context(&mut r, 12, KBS)).collect();
        let fillers: Vec<_> = (0..5).map(|_| term(&mut r, 8, KBS)).collect();
        for t in [
            ProgramTranslation::identity(),
            ProgramTranslation::left_commit(),
            ProgramTranslation::right_commit(),
            ProgramTranslation::fail_to(99),
        ] {
            let report = check_homomorphism(&t, &contexts, &fillers).unwrap();
            prop_assert_eq!(report.failed.len(), 0, "{}", report);
        }
    }
}
