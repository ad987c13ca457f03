mod common;

use std::collections::BTreeMap;

use common::{context, rng, term, OPEN_KBS};
use kbsm::syntax::{
    alpha_eq, decompose, fill, hole_count, modify, parse, parse_term, paths, subterm, Name, Term,
};
use kbsm::{Expr, PExpr};
use proptest::prelude::*;

/// Renames every binder to a fresh `v{n}`, independently of the library's
/// substitution.
fn rename_binders(e: &Expr, offset: usize) -> Expr {
    fn go(e: &Expr, env: &mut BTreeMap<Name, Name>, counter: &mut usize) -> Expr {
        match e {
            Term::Var(x) => Term::Var(env.get(x).cloned().unwrap_or_else(|| x.clone())),
            Term::Lam(x, b) => {
                let fresh = Name::new(&format!("v{counter}")).unwrap();
                *counter += 1;
                let saved = env.insert(x.clone(), fresh.clone());
                let body = go(b, env, counter);
                match saved {
                    Some(s) => env.insert(x.clone(), s),
                    None => env.remove(x),
                };
                Term::lam(fresh, body)
            }
            Term::App(a, b) => Term::app(go(a, env, counter), go(b, env, counter)),
            Term::Or(a, b) => Term::or(go(a, env, counter), go(b, env, counter)),
            other => other.clone(),
        }
    }
    go(e, &mut BTreeMap::new(), &mut { offset })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn render_parse_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = term(&mut r, 30, OPEN_KBS);
        prop_assert_eq!(parse_term::<i64>(&e.to_string()).unwrap(), e);
        let p = context(&mut r, 20, OPEN_KBS);
        prop_assert_eq!(parse::<i64>(&p.to_string(), true).unwrap(), p);
    }

    #[test]
    fn filling_removes_holes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = context(&mut r, 20, OPEN_KBS);
        let e = term(&mut r, 10, OPEN_KBS);
        prop_assert_eq!(hole_count(&p), 1);
        prop_assert_eq!(hole_count(&PExpr::from(&fill(&p, &e))), 0);
    }

    #[test]
    fn decompose_then_fill_is_identity(seed in any::<u64>()) {
        let e = term(&mut rng(seed), 20, OPEN_KBS);
        for at in paths(&e) {
            let (ctx, sub) = decompose(&e, &at).unwrap();
            prop_assert_eq!(&sub, subterm(&e, &at).unwrap());
            prop_assert_eq!(fill(&ctx, &sub), e.clone());
        }
    }

    #[test]
    fn modify_is_undone_by_modifying_back(seed in any::<u64>()) {
        let mut r = rng(seed);
        let e = term(&mut r, 20, OPEN_KBS);
        let x = term(&mut r, 6, OPEN_KBS);
        for at in paths(&e) {
            let original = subterm(&e, &at).unwrap().clone();
            let changed = modify(&e, &at, &x).unwrap();
            prop_assert_eq!(modify(&changed, &at, &original).unwrap(), e.clone());
        }
    }

    #[test]
    fn alpha_eq_is_an_equivalence(seed in any::<u64>()) {
        let mut r = rng(seed);
        let a = term(&mut r, 25, OPEN_KBS);
        let b = rename_binders(&a, 0);
        let c = rename_binders(&b, 100);
        prop_assert!(alpha_eq(&a, &a));
        prop_assert!(alpha_eq(&a, &b) && alpha_eq(&b, &a));
        prop_assert!(alpha_eq(&b, &c) && alpha_eq(&a, &c));
        let d = term(&mut r, 25, OPEN_KBS);
        prop_assert_eq!(alpha_eq(&a, &d), alpha_eq(&d, &a));
        if alpha_eq(&a, &d) {
            prop_assert!(alpha_eq(&c, &d));
        }
    }
}
