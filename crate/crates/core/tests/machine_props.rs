mod common;

use common::{rng, term, CONVENTIONAL};
use kbsm::machine::{
    oracle_eval, readback, run, step, trace, Control, Machine, OracleResult, Step, Value,
};
use kbsm::syntax::alpha_eq;
use kbsm::EvalResult;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn machine_agrees_with_oracle(seed in any::<u64>()) {
        let e = term(&mut rng(seed), 30, CONVENTIONAL);
        let m = Machine::arith();
        let got = run(&m, &e, 10_000).unwrap();
        let want = oracle_eval(&e, 10_000).unwrap();
        match (&got, &want) {
            (EvalResult::Value(v), OracleResult::Value(t)) | (EvalResult::Halted(v), OracleResult::Halted(t)) => {
                prop_assert!(alpha_eq(&readback(v), t), "{} vs {}", readback(v), t)
            }
            (EvalResult::Stuck { .. }, OracleResult::Stuck(_)) => {}
            (EvalResult::Diverged(_), _) | (_, OracleResult::Diverged(_)) => {}
            _ => prop_assert!(false, "{e}: machine {got:?}, oracle {want:?}"),
        }
    }

    #[test]
    fn larger_budgets_keep_final_results(seed in any::<u64>(), b in 1u64..200, extra in 1u64..500) {
        let e = term(&mut rng(seed), 30, CONVENTIONAL);
        let m = Machine::arith();
        let small = run(&m, &e, b).unwrap();
        if !matches!(small, EvalResult::Diverged(_)) {
            prop_assert_eq!(run(&m, &e, b + extra).unwrap(), small);
        }
    }

    #[test]
    fn step_is_a_function(seed in any::<u64>()) {
        let e = term(&mut rng(seed), 30, CONVENTIONAL);
        let m = Machine::arith();
        let calc = trace(&m, &e, 2_000).unwrap();
        for s in &calc.states {
            prop_assert_eq!(step(&m, s), step(&m, s));
        }
        // consecutive states are related by exactly that function
        for pair in calc.states.windows(2) {
            prop_assert_eq!(step(&m, &pair[0]), Step::Next(pair[1].clone()));
        }
    }

    #[test]
    fn dump_and_stack_discipline(seed in any::<u64>()) {
        let e = term(&mut rng(seed), 30, CONVENTIONAL);
        let m = Machine::arith();
        let calc = trace(&m, &e, 2_000).unwrap();
        for pair in calc.states.windows(2) {
            let (s, t) = (&pair[0], &pair[1]);
            let delta = t.dump_depth() as i64 - s.dump_depth() as i64;
            let applies_closure = matches!(s.control_head(), Some(Control::Apply))
                && matches!(s.stack_head(), Some(Value::Closure { .. }));
            let returns = s.control_head().is_none();
            let expected = if applies_closure { 1 } else if returns { -1 } else { 0 };
            prop_assert_eq!(delta, expected);
        }
        if let EvalResult::Value(_) = calc.result {
            let last = calc.states.last().unwrap();
            prop_assert_eq!(last.dump_depth(), 0);
            prop_assert_eq!(last.stack.len(), 1);
        }
    }
}
