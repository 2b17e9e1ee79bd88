//! Fixtures shared by the benchmarks.

use affine_lab_core::families::{example_family, FamilyImmersion};
use affine_lab_core::{Case, SphereKind, SphereOdeSpec};

/// Example family for `name` at dimension `n`.
pub fn family(name: &str, n: usize) -> FamilyImmersion {
    FamilyImmersion::new(example_family(name, n).expect("known example")).expect("valid example")
}

/// Improper Case2 sphere curve through `(t, t^{n+1})` on `[1, 2]`.
pub fn case2_power_ode(n: usize, nodes: usize) -> SphereOdeSpec {
    let nf = n as f64;
    SphereOdeSpec {
        kind: SphereKind::Improper,
        case: Case::Case2,
        c: nf * (nf + 1.0),
        n,
        t0: 1.0,
        initial: [1.0, 1.0, 1.0, nf + 1.0],
        t_range: [1.0, 2.0],
        gauge: None,
        epsilon: 0,
        nodes,
    }
}
