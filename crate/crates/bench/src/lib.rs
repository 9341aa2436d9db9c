//! Fixtures shared by the criterion benches.

use mdilr_core::{lookup, Expr, ExprStore};

/// A fresh store holding corpus integrand `id` in dimension `d`.
pub fn integrand(id: &str, d: usize) -> (ExprStore, Expr) {
    let mut store = ExprStore::new();
    let f = lookup(id).expect("corpus id").parse(&mut store, d).expect("corpus entry parses");
    (store, f)
}
