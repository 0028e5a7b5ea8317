//! Three threads racing on one shared value in `{0, 1, 2}`: two of them move
//! 0 to 1, the last one moves 0 to 2. Reaching 2 takes two delays.

use crate::abstraction::Exhaustive;
use crate::model::{LocalDomain, Program, ProgramBuilder, ProgramState, RuleEndpoint, ValueDomain};

use super::ModelError;

fn mover(b: &mut ProgramBuilder, label: &str, to: i64) -> crate::model::ActionId {
    b.action_with_endpoints(
        label,
        move |g, l| if g[0] == 0 { vec![(vec![to], l.to_vec())] } else { Vec::new() },
        vec![RuleEndpoint {
            from_shared: vec![0],
            from_local: vec![0],
            to_shared: vec![to],
            to_local: vec![0],
        }],
    )
}

/// The three-thread model.
pub fn example2_model() -> Program {
    example2_family(3).expect("three threads is valid")
}

/// `n >= 3` threads: the three of the base model plus `n - 3` more copies of
/// the last one.
pub fn example2_family(n: usize) -> Result<Program, ModelError> {
    if n < 3 {
        return Err(ModelError::TooFewThreads { model: "example2", min: 3, got: n });
    }
    let mut b = ProgramBuilder::new("example2", vec![ValueDomain::Finite { size: 3 }]);
    let a0 = mover(&mut b, "T0: 0->1", 1);
    let a1 = mover(&mut b, "T1: 0->1", 1);
    let a2 = mover(&mut b, "T2: 0->2", 2);
    b.thread("T0", "T0", vec![a0], LocalDomain::finite(1));
    b.thread("T1", "T1", vec![a1], LocalDomain::finite(1));
    for i in 2..n {
        b.thread(format!("T{i}"), "T2", vec![a2], LocalDomain::finite(1));
    }
    b.initial(ProgramState::new(vec![0], vec![vec![0]; n]));
    Ok(b.build())
}

/// α returns the shared value.
pub fn shared_abstraction(p: &Program) -> Exhaustive {
    Exhaustive::shared_only(p).expect("finite model")
}
