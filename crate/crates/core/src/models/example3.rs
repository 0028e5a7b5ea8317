//! Symmetric threads over shared booleans `s`, `t`:
//! line 0 flips `t`; line 1 continues to line 2 only if `t` holds; line 2
//! sets `s`. Line 3 is the end.

use crate::model::{LocalDomain, Program, ProgramBuilder, ProgramState, ValueDomain};

use super::ModelError;

pub const S: usize = 0;
pub const T: usize = 1;

pub fn example3_model(n: usize) -> Result<Program, ModelError> {
    if n == 0 {
        return Err(ModelError::TooFewThreads { model: "example3", min: 1, got: 0 });
    }
    let bit = ValueDomain::Finite { size: 2 };
    let mut b = ProgramBuilder::new("example3", vec![bit, bit]);
    let flip = b.action("line 0: t := !t", |g, l| {
        if l[0] != 0 {
            return Vec::new();
        }
        vec![(vec![g[S], 1 - g[T]], vec![1])]
    });
    let guard = b.action("line 1: if t", |g, l| {
        if l[0] != 1 {
            return Vec::new();
        }
        let next = if g[T] == 1 { 2 } else { 3 };
        vec![(g.to_vec(), vec![next])]
    });
    let set = b.action("line 2: s := 1", |g, l| {
        if l[0] != 2 {
            return Vec::new();
        }
        vec![(vec![1, g[T]], vec![3])]
    });
    for i in 0..n {
        b.thread(format!("T{i}"), "T", vec![flip, guard, set], LocalDomain::Values(vec![ValueDomain::Finite { size: 4 }]));
    }
    b.initial(ProgramState::new(vec![0, 0], vec![vec![0]; n]));
    Ok(b.build())
}
