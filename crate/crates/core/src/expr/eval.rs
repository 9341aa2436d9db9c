use super::{Expr, ExprStore, Node};
use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable x[{0}] has no value")]
    Unassigned(u32),
}

/// Values for coordinate variables; `x[i]` reads slot `i - 1`.
#[derive(Clone, Debug, Default)]
pub struct VarAssignment {
    values: Vec<Option<f64>>,
}

impl VarAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: u32, value: f64) -> &mut Self {
        let i = var as usize - 1;
        if self.values.len() <= i {
            self.values.resize(i + 1, None);
        }
        self.values[i] = Some(value);
        self
    }

    pub fn get(&self, var: u32) -> Option<f64> {
        self.values.get(var as usize - 1).copied().flatten()
    }
}

impl From<&[f64]> for VarAssignment {
    fn from(xs: &[f64]) -> Self {
        VarAssignment { values: xs.iter().map(|&v| Some(v)).collect() }
    }
}

impl ExprStore {
    /// Evaluates `e`, failing if a variable it depends on is unassigned.
    pub fn eval(&self, e: Expr, vars: &VarAssignment) -> Result<f64, EvalError> {
        let mut memo = HashMap::new();
        self.eval_rec(e, vars, &mut memo)
    }

    fn eval_rec(
        &self,
        e: Expr,
        vars: &VarAssignment,
        memo: &mut HashMap<Expr, f64>,
    ) -> Result<f64, EvalError> {
        if let Some(&v) = memo.get(&e) {
            return Ok(v);
        }
        let v = match self.node(e) {
            Node::Const(c) => f64::from_bits(*c),
            Node::Var(i) => vars.get(*i).ok_or(EvalError::Unassigned(*i))?,
            Node::Sum { constant, terms } => {
                let mut acc = f64::from_bits(*constant);
                for &(c, t) in terms.iter() {
                    acc += f64::from_bits(c) * self.eval_rec(t, vars, memo)?;
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = 1.0;
                for &f in fs.iter() {
                    acc *= self.eval_rec(f, vars, memo)?;
                }
                acc
            }
            Node::Pow(b, k) => self.eval_rec(*b, vars, memo)?.powi(*k),
            Node::Exp(a) => self.eval_rec(*a, vars, memo)?.exp(),
            Node::Sin(a) => self.eval_rec(*a, vars, memo)?.sin(),
            Node::Cos(a) => self.eval_rec(*a, vars, memo)?.cos(),
        };
        memo.insert(e, v);
        Ok(v)
    }

    /// Compiles `e` into a flat instruction list for repeated evaluation.
    pub fn compile(&self, e: Expr) -> Tape {
        let mut slot: HashMap<Expr, u32> = HashMap::new();
        let mut tape = Tape { ops: Vec::new(), terms: Vec::new(), args: Vec::new(), dim: 0 };
        // Iterative post-order so deep expressions do not overflow the stack.
        let mut stack: Vec<(Expr, bool)> = vec![(e, false)];
        while let Some((x, expanded)) = stack.pop() {
            if slot.contains_key(&x) {
                continue;
            }
            if !expanded {
                stack.push((x, true));
                for c in self.children(x) {
                    if !slot.contains_key(&c) {
                        stack.push((c, false));
                    }
                }
                continue;
            }
            let op = match self.node(x) {
                Node::Const(c) => Op::Const(f64::from_bits(*c)),
                Node::Var(i) => {
                    tape.dim = tape.dim.max(*i as usize);
                    Op::Var(*i as usize - 1)
                }
                Node::Sum { constant, terms } => {
                    let start = tape.terms.len();
                    tape.terms.extend(terms.iter().map(|&(c, t)| (f64::from_bits(c), slot[&t])));
                    Op::Sum(f64::from_bits(*constant), start as u32, terms.len() as u32)
                }
                Node::Product(fs) => {
                    let start = tape.args.len();
                    tape.args.extend(fs.iter().map(|f| slot[f]));
                    Op::Product(start as u32, fs.len() as u32)
                }
                Node::Pow(b, k) => Op::Pow(slot[b], *k),
                Node::Exp(a) => Op::Exp(slot[a]),
                Node::Sin(a) => Op::Sin(slot[a]),
                Node::Cos(a) => Op::Cos(slot[a]),
            };
            slot.insert(x, tape.ops.len() as u32);
            tape.ops.push(op);
        }
        tape
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Const(f64),
    Var(usize),
    Sum(f64, u32, u32),
    Product(u32, u32),
    Pow(u32, i32),
    Exp(u32),
    Sin(u32),
    Cos(u32),
}

/// A compiled expression. Evaluation performs the same floating point
/// operations in the same order as [`ExprStore::eval`].
#[derive(Clone, Debug)]
pub struct Tape {
    ops: Vec<Op>,
    terms: Vec<(f64, u32)>,
    args: Vec<u32>,
    dim: usize,
}

impl Tape {
    /// Largest variable index referenced.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scratch(&self) -> Vec<f64> {
        vec![0.0; self.ops.len()]
    }

    /// Evaluates at `x` (`x[0]` is the first coordinate). `x` must cover
    /// [`Tape::dim`] coordinates.
    pub fn eval_with(&self, x: &[f64], reg: &mut [f64]) -> f64 {
        for (i, op) in self.ops.iter().enumerate() {
            reg[i] = match *op {
                Op::Const(c) => c,
                Op::Var(j) => x[j],
                Op::Sum(c, s, n) => {
                    let mut acc = c;
                    for &(k, r) in &self.terms[s as usize..(s + n) as usize] {
                        acc += k * reg[r as usize];
                    }
                    acc
                }
                Op::Product(s, n) => {
                    let mut acc = 1.0;
                    for &r in &self.args[s as usize..(s + n) as usize] {
                        acc *= reg[r as usize];
                    }
                    acc
                }
                Op::Pow(r, k) => reg[r as usize].powi(k),
                Op::Exp(r) => reg[r as usize].exp(),
                Op::Sin(r) => reg[r as usize].sin(),
                Op::Cos(r) => reg[r as usize].cos(),
            };
        }
        reg[self.ops.len() - 1]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut reg = self.scratch();
        self.eval_with(x, &mut reg)
    }
}
