//! A λ-calculus evaluation workbench for conventional and non-deterministic
//! ("knowledge based") programs.
//!
//! The term algebra, the deterministic SECD machine and the non-deterministic
//! machine are generic over the integer type carried by literals
//! ([`Integer`]). Everything above them (ports, development graphs, the
//! inference engine) works on the 64-bit instantiation exported here as
//! [`Expr`], [`PExpr`] and [`Outcome`].

pub mod devgraph;
pub mod inference;
pub mod int;
pub mod machine;
pub mod ndmachine;
pub mod ports;
pub mod rewrite;
pub mod syntax;

pub use int::Integer;

/// A program with 64-bit integer literals.
pub type Expr = syntax::Term<i64>;
/// A parameterised program (may contain holes) with 64-bit literals.
pub type PExpr = syntax::PTerm<i64>;
/// A machine outcome over 64-bit integers.
pub type Outcome = machine::Value<i64>;
pub type State = machine::MachineState<i64>;
pub type Env = machine::Env<i64>;
pub type EvalResult = machine::EvalResult<i64>;
pub type OutcomeSet = ndmachine::OutcomeSet<i64>;
pub type CalcTree = ndmachine::CalcTree<i64>;

/// Arbitrary-precision instantiations.
pub type BigExpr = syntax::Term<num_bigint::BigInt>;
pub type BigPExpr = syntax::PTerm<num_bigint::BigInt>;
pub type BigOutcome = machine::Value<num_bigint::BigInt>;
pub type BigEvalResult = machine::EvalResult<num_bigint::BigInt>;
