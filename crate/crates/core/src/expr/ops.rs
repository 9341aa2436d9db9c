use super::{Expr, ExprStore, Node};
use std::collections::HashMap;

/// A symbolic partial sum grew past its node budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("expression grew to {nodes} nodes, over the budget of {budget}")]
pub struct BudgetExceeded {
    pub nodes: usize,
    pub budget: usize,
}

impl ExprStore {
    /// Replaces variables by expressions. Variables absent from `map` stay.
    pub fn substitute(&mut self, e: Expr, map: &HashMap<u32, Expr>) -> Expr {
        if map.is_empty() {
            return e;
        }
        let lo = *map.keys().min().unwrap();
        let hi = *map.keys().max().unwrap();
        let mut memo = HashMap::new();
        self.subst_rec(e, map, lo, hi, &mut memo)
    }

    fn subst_rec(
        &mut self,
        e: Expr,
        map: &HashMap<u32, Expr>,
        lo: u32,
        hi: u32,
        memo: &mut HashMap<Expr, Expr>,
    ) -> Expr {
        match self.var_range(e) {
            Some((a, b)) if b >= lo && a <= hi => {}
            _ => return e,
        }
        if let Some(&r) = memo.get(&e) {
            return r;
        }
        let r = match self.node(e).clone() {
            Node::Const(_) => e,
            Node::Var(i) => map.get(&i).copied().unwrap_or(e),
            Node::Sum { constant, terms } => {
                let items: Vec<(f64, Expr)> = terms
                    .iter()
                    .map(|&(c, t)| (f64::from_bits(c), self.subst_rec(t, map, lo, hi, memo)))
                    .collect();
                self.linear_combination(f64::from_bits(constant), items)
            }
            Node::Product(fs) => {
                let parts: Vec<Expr> =
                    fs.iter().map(|&f| self.subst_rec(f, map, lo, hi, memo)).collect();
                self.product(parts)
            }
            Node::Pow(b, k) => {
                let b = self.subst_rec(b, map, lo, hi, memo);
                self.pow(b, k)
            }
            Node::Exp(a) => {
                let a = self.subst_rec(a, map, lo, hi, memo);
                self.exp(a)
            }
            Node::Sin(a) => {
                let a = self.subst_rec(a, map, lo, hi, memo);
                self.sin(a)
            }
            Node::Cos(a) => {
                let a = self.subst_rec(a, map, lo, hi, memo);
                self.cos(a)
            }
        };
        memo.insert(e, r);
        r
    }

    /// Fixes variable `var` to the numeric value `value`.
    pub fn bind(&mut self, e: Expr, var: u32, value: f64) -> Expr {
        if !self.may_contain(e, var) {
            return e;
        }
        let c = self.constant(value);
        self.substitute(e, &HashMap::from([(var, c)]))
    }

    /// Sums `e` over `var` taking each value in `values`, collecting like
    /// terms across all bindings into a single canonical sum.
    ///
    /// Fails when the result has more than `budget` nodes.
    pub fn partial_sum(
        &mut self,
        e: Expr,
        var: u32,
        values: &[f64],
        budget: usize,
    ) -> Result<Expr, BudgetExceeded> {
        if !self.may_contain(e, var) {
            let k = values.len() as f64;
            return Ok(self.scale(k, e));
        }
        let mut constant = 0.0;
        let mut items: Vec<(f64, Expr)> = Vec::new();
        for &v in values {
            let b = self.bind(e, var, v);
            let (c, terms) = self.as_linear(b);
            constant += c;
            items.extend(terms);
            if items.len() > budget {
                return Err(BudgetExceeded { nodes: items.len(), budget });
            }
        }
        let r = self.linear_combination(constant, items);
        let nodes = self.node_count(r);
        if nodes > budget {
            return Err(BudgetExceeded { nodes, budget });
        }
        Ok(r)
    }
}
