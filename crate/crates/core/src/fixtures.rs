//! Built-in example models used throughout the test suites and the CLI
//! `gen --example` escape hatch.

use crate::model::Dtmc;
use crate::predicate::Predicate;

/// The eleven-state mountain-car chain: two branches from `s0`, failure
/// states `s7`/`s9`, success states `s6`/`s8`/`s10`.
pub const FIG2_TEXT: &str = "\
vars pos vel act
state s0 0 0 1 labels:
state s1 0.3 0.01 1 labels:
state s2 0.4 0.03 0 labels:
state s3 0.38 0.02 1 labels:
state s4 0.35 0.02 1 labels:
state s5 0.45 0.03 1 labels:
state s6 0.61 0.02 0 labels: halt
state s7 0.5 0.02 0 labels: halt
state s8 0.6 0 0 labels: halt
state s9 0.52 0.02 1 labels: halt
state s10 0.62 0.04 1 labels: halt
trans s0 s1 0.5
trans s0 s2 0.5
trans s1 s4 0.7
trans s1 s3 0.3
trans s2 s5 1
trans s3 s6 0.8
trans s3 s7 0.2
trans s4 s8 0.1
trans s4 s7 0.9
trans s5 s9 0.3
trans s5 s10 0.7
trans s6 s6 1
trans s7 s7 1
trans s8 s8 1
trans s9 s9 1
trans s10 s10 1
init s0
";

pub fn fig2_model() -> Dtmc {
    Dtmc::parse(FIG2_TEXT).expect("fig2 fixture is valid")
}

pub fn fig2_effect() -> Predicate {
    Predicate::parse("pos < 0.6 && halt").expect("valid predicate")
}

/// The four-predicate abstraction of the mountain-car chain; most
/// significant bit first.
pub fn fig2_predicates() -> Vec<Predicate> {
    Predicate::parse_list("vel >= 0.03; pos >= 0.6; pos >= 0.4; pos >= 0.3")
        .expect("valid predicates")
}

/// Eleven-state stutter-decomposition example: proposition `w` alternates
/// along paths; probabilities are uniform per branching degree.
pub const FIG7A_TEXT: &str = "\
vars x
state s0 0 labels: w
state s1 1 labels:
state s2 2 labels: w
state s3 3 labels:
state s4 4 labels: w
state s5 5 labels: w
state s6 6 labels: halt
state s7 7 labels: w halt
state s8 8 labels: halt
state s9 9 labels: w halt
state s10 10 labels: halt
trans s0 s1 1/5
trans s0 s2 1/5
trans s0 s3 1/5
trans s0 s4 1/5
trans s0 s5 1/5
trans s1 s5 1
trans s2 s3 1/2
trans s2 s4 1/2
trans s3 s8 1/2
trans s3 s9 1/2
trans s4 s6 1/2
trans s4 s7 1/2
trans s5 s10 1
trans s6 s6 1
trans s7 s7 1
trans s8 s8 1
trans s9 s9 1
trans s10 s10 1
init s0
";

pub fn fig7a_model() -> Dtmc {
    Dtmc::parse(FIG7A_TEXT).expect("fig7a fixture is valid")
}
