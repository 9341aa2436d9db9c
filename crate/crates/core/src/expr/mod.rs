//! Hash-consed symbolic expressions.
//!
//! Every expression lives in an [`ExprStore`] and is referred to by a small
//! copyable [`Expr`] handle. Nodes are interned, so two structurally equal
//! expressions always share the same handle. All constructors return
//! canonical forms:
//!
//! * a sum holds one folded constant plus `(coefficient, term)` pairs whose
//!   terms are distinct, non-constant and never sums themselves;
//! * scalar multiples live as coefficients of a sum (`3*x` is a one-term sum);
//! * a product holds at least two non-constant factors, none of them a sum,
//!   a product or a scalar multiple; repeated bases are merged into powers;
//! * integer powers have an exponent outside `{0, 1}` and a base that is not
//!   a constant, product, power or scalar multiple;
//! * `exp`, `sin` and `cos` of a sum with a non-zero constant are split so the
//!   constant becomes a coefficient.
//!
//! Children are kept in a deterministic order derived from node structure,
//! not from insertion history.

mod eval;
mod ops;
mod parse;

pub use eval::{EvalError, Tape, VarAssignment};
pub use ops::BudgetExceeded;
pub use parse::{parse, ParseError};

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Handle to an interned expression node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(u32);

impl Expr {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Node {
    /// f64 bit pattern, with -0.0 normalized to +0.0.
    Const(u64),
    /// 1-based coordinate index.
    Var(u32),
    Sum { constant: u64, terms: Box<[(u64, Expr)]> },
    Product(Box<[Expr]>),
    Pow(Expr, i32),
    Exp(Expr),
    Sin(Expr),
    Cos(Expr),
}

impl Node {
    fn rank(&self) -> u8 {
        match self {
            Node::Const(_) => 0,
            Node::Var(_) => 1,
            Node::Pow(..) => 2,
            Node::Exp(_) => 3,
            Node::Sin(_) => 4,
            Node::Cos(_) => 5,
            Node::Product(_) => 6,
            Node::Sum { .. } => 7,
        }
    }
}

/// Read-only view of a node, for callers outside the store.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeView<'a> {
    Const(f64),
    Var(u32),
    Sum { constant: f64, terms: Vec<(f64, Expr)> },
    Product(&'a [Expr]),
    Pow(Expr, i32),
    Exp(Expr),
    Sin(Expr),
    Cos(Expr),
}

#[derive(Debug)]
struct Entry {
    node: Node,
    /// Structural hash, independent of interning order.
    key: u64,
    /// Smallest and largest free variable index; `vmin > vmax` when closed.
    vmin: u32,
    vmax: u32,
}

fn bits(c: f64) -> u64 {
    if c == 0.0 {
        0
    } else {
        c.to_bits()
    }
}

fn val(b: u64) -> f64 {
    f64::from_bits(b)
}

/// Interning arena for expression nodes.
///
/// The store is single-writer: constructors take `&mut self`. Evaluation and
/// inspection only need `&self`, so a finished store can be shared freely.
#[derive(Debug)]
pub struct ExprStore {
    entries: Vec<Entry>,
    index: HashMap<Node, Expr>,
}

impl Default for ExprStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ExprStore {
    pub fn new() -> Self {
        ExprStore { entries: Vec::new(), index: HashMap::new() }
    }

    /// Number of distinct nodes ever interned.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn node(&self, e: Expr) -> &Node {
        &self.entries[e.index()].node
    }

    pub fn view(&self, e: Expr) -> NodeView<'_> {
        match self.node(e) {
            Node::Const(c) => NodeView::Const(val(*c)),
            Node::Var(i) => NodeView::Var(*i),
            Node::Sum { constant, terms } => NodeView::Sum {
                constant: val(*constant),
                terms: terms.iter().map(|&(c, t)| (val(c), t)).collect(),
            },
            Node::Product(fs) => NodeView::Product(fs),
            Node::Pow(b, k) => NodeView::Pow(*b, *k),
            Node::Exp(a) => NodeView::Exp(*a),
            Node::Sin(a) => NodeView::Sin(*a),
            Node::Cos(a) => NodeView::Cos(*a),
        }
    }

    /// The value of `e` if it is a constant node.
    pub fn as_const(&self, e: Expr) -> Option<f64> {
        match self.node(e) {
            Node::Const(c) => Some(val(*c)),
            _ => None,
        }
    }

    /// Whether variable `var` occurs in `e`, judged by the cached index range.
    pub(crate) fn may_contain(&self, e: Expr, var: u32) -> bool {
        let en = &self.entries[e.index()];
        en.vmin <= var && var <= en.vmax
    }

    pub(crate) fn var_range(&self, e: Expr) -> Option<(u32, u32)> {
        let en = &self.entries[e.index()];
        (en.vmin <= en.vmax).then_some((en.vmin, en.vmax))
    }

    fn intern(&mut self, node: Node) -> Expr {
        if let Some(&e) = self.index.get(&node) {
            return e;
        }
        let mut h = DefaultHasher::new();
        node.rank().hash(&mut h);
        let (mut vmin, mut vmax) = (u32::MAX, 0u32);
        let mut child = |c: Expr, h: &mut DefaultHasher| {
            let en = &self.entries[c.index()];
            en.key.hash(h);
            if en.vmin <= en.vmax {
                vmin = vmin.min(en.vmin);
                vmax = vmax.max(en.vmax);
            }
        };
        match &node {
            Node::Const(c) => c.hash(&mut h),
            Node::Var(i) => {
                i.hash(&mut h);
                vmin = *i;
                vmax = *i;
            }
            Node::Sum { constant, terms } => {
                constant.hash(&mut h);
                for &(c, t) in terms.iter() {
                    c.hash(&mut h);
                    child(t, &mut h);
                }
            }
            Node::Product(fs) => {
                for &f in fs.iter() {
                    child(f, &mut h);
                }
            }
            Node::Pow(b, k) => {
                k.hash(&mut h);
                child(*b, &mut h);
            }
            Node::Exp(a) | Node::Sin(a) | Node::Cos(a) => child(*a, &mut h),
        }
        let key = h.finish();
        let id = Expr(u32::try_from(self.entries.len()).expect("expression store overflow"));
        self.entries.push(Entry { node: node.clone(), key, vmin, vmax });
        self.index.insert(node, id);
        id
    }

    /// Deterministic total order on nodes: kind, structural hash, then a full
    /// structural comparison for the (practically unreachable) hash tie.
    pub fn cmp_canonical(&self, a: Expr, b: Expr) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let (ea, eb) = (&self.entries[a.index()], &self.entries[b.index()]);
        ea.node
            .rank()
            .cmp(&eb.node.rank())
            .then(ea.key.cmp(&eb.key))
            .then_with(|| self.cmp_structure(a, b))
    }

    fn cmp_structure(&self, a: Expr, b: Expr) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        let cmp_list = |xs: &[Expr], ys: &[Expr]| {
            for (x, y) in xs.iter().zip(ys) {
                let o = self.cmp_canonical(*x, *y);
                if o != Ordering::Equal {
                    return o;
                }
            }
            xs.len().cmp(&ys.len())
        };
        match (self.node(a), self.node(b)) {
            (Node::Const(x), Node::Const(y)) => val(*x).total_cmp(&val(*y)),
            (Node::Var(x), Node::Var(y)) => x.cmp(y),
            (Node::Pow(x, i), Node::Pow(y, j)) => i.cmp(j).then_with(|| self.cmp_canonical(*x, *y)),
            (Node::Exp(x), Node::Exp(y)) | (Node::Sin(x), Node::Sin(y)) | (Node::Cos(x), Node::Cos(y)) => {
                self.cmp_canonical(*x, *y)
            }
            (Node::Product(xs), Node::Product(ys)) => cmp_list(xs, ys),
            (Node::Sum { constant: c1, terms: t1 }, Node::Sum { constant: c2, terms: t2 }) => {
                for ((a1, x), (a2, y)) in t1.iter().zip(t2.iter()) {
                    let o = self.cmp_canonical(*x, *y).then(val(*a1).total_cmp(&val(*a2)));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                t1.len().cmp(&t2.len()).then(val(*c1).total_cmp(&val(*c2)))
            }
            (x, y) => x.rank().cmp(&y.rank()),
        }
    }

    // ----------------------------------------------------------------------
    // Leaves

    pub fn constant(&mut self, c: f64) -> Expr {
        self.intern(Node::Const(bits(c)))
    }

    pub fn zero(&mut self) -> Expr {
        self.constant(0.0)
    }

    pub fn one(&mut self) -> Expr {
        self.constant(1.0)
    }

    /// Coordinate variable `x_index` (1-based).
    pub fn var(&mut self, index: u32) -> Expr {
        assert!(index >= 1, "variable indices are 1-based");
        self.intern(Node::Var(index))
    }

    // ----------------------------------------------------------------------
    // Sums

    pub fn add(&mut self, a: Expr, b: Expr) -> Expr {
        self.linear_combination(0.0, [(1.0, a), (1.0, b)])
    }

    pub fn sub(&mut self, a: Expr, b: Expr) -> Expr {
        self.linear_combination(0.0, [(1.0, a), (-1.0, b)])
    }

    pub fn neg(&mut self, a: Expr) -> Expr {
        self.scale(-1.0, a)
    }

    pub fn scale(&mut self, k: f64, a: Expr) -> Expr {
        self.linear_combination(0.0, [(k, a)])
    }

    /// `constant + sum(coef * expr)`, flattened and with like terms collected.
    /// Coefficients of repeated terms are accumulated in input order.
    pub fn linear_combination<I>(&mut self, constant: f64, items: I) -> Expr
    where
        I: IntoIterator<Item = (f64, Expr)>,
    {
        let mut constant = constant;
        let mut order: Vec<Expr> = Vec::new();
        let mut coef: HashMap<Expr, f64> = HashMap::new();
        let mut push = |c: f64, t: Expr, order: &mut Vec<Expr>| {
            coef.entry(t)
                .and_modify(|v| *v += c)
                .or_insert_with(|| {
                    order.push(t);
                    c
                });
        };
        for (k, e) in items {
            match self.node(e) {
                Node::Const(c) => constant += k * val(*c),
                Node::Sum { constant: c, terms } => {
                    constant += k * val(*c);
                    for &(tc, t) in terms.iter() {
                        push(k * val(tc), t, &mut order);
                    }
                }
                _ => push(k, e, &mut order),
            }
        }
        let mut terms: Vec<(f64, Expr)> = order
            .into_iter()
            .filter_map(|t| {
                let c = coef[&t];
                (c != 0.0).then_some((c, t))
            })
            .collect();
        self.build_sum(constant, &mut terms)
    }

    fn build_sum(&mut self, constant: f64, terms: &mut [(f64, Expr)]) -> Expr {
        if terms.is_empty() {
            return self.constant(constant);
        }
        if constant == 0.0 && terms.len() == 1 && terms[0].0 == 1.0 {
            return terms[0].1;
        }
        terms.sort_by(|a, b| self.cmp_canonical(a.1, b.1));
        let terms: Box<[(u64, Expr)]> = terms.iter().map(|&(c, t)| (bits(c), t)).collect();
        self.intern(Node::Sum { constant: bits(constant), terms })
    }

    /// Splits `e` into `(constant, terms)` as if it were a sum.
    pub(crate) fn as_linear(&self, e: Expr) -> (f64, Vec<(f64, Expr)>) {
        match self.node(e) {
            Node::Const(c) => (val(*c), Vec::new()),
            Node::Sum { constant, terms } => {
                (val(*constant), terms.iter().map(|&(c, t)| (val(c), t)).collect())
            }
            _ => (0.0, vec![(1.0, e)]),
        }
    }

    // ----------------------------------------------------------------------
    // Products and powers

    pub fn mul(&mut self, a: Expr, b: Expr) -> Expr {
        self.product([a, b])
    }

    pub fn div(&mut self, a: Expr, b: Expr) -> Expr {
        let inv = self.pow(b, -1);
        self.mul(a, inv)
    }

    /// Product of all factors, distributing over sums.
    pub fn product<I>(&mut self, factors: I) -> Expr
    where
        I: IntoIterator<Item = Expr>,
    {
        let mut scalar = 1.0;
        let mut order: Vec<Expr> = Vec::new();
        let mut exps: HashMap<Expr, i32> = HashMap::new();
        let mut sums: Vec<Expr> = Vec::new();
        let mut stack: Vec<(Expr, i32)> = factors.into_iter().map(|f| (f, 1)).collect();
        stack.reverse();
        while let Some((f, k)) = stack.pop() {
            match self.node(f) {
                Node::Const(c) => scalar *= val(*c).powi(k),
                Node::Sum { constant, terms } if *constant == 0 && terms.len() == 1 => {
                    let (c, t) = terms[0];
                    scalar *= val(c).powi(k);
                    stack.push((t, k));
                }
                Node::Product(fs) => {
                    for &g in fs.iter().rev() {
                        stack.push((g, k));
                    }
                }
                Node::Pow(b, j) => stack.push((*b, j * k)),
                _ => {
                    *exps.entry(f).or_insert_with(|| {
                        order.push(f);
                        0
                    }) += k;
                }
            }
        }
        if scalar == 0.0 {
            return self.zero();
        }
        let mut plain: Vec<Expr> = Vec::new();
        for b in order {
            match exps[&b] {
                0 => {}
                1 if matches!(self.node(b), Node::Sum { .. }) => sums.push(b),
                1 => plain.push(b),
                k => plain.push(self.intern(Node::Pow(b, k))),
            }
        }
        let core = match plain.len() {
            0 => None,
            1 => Some(plain[0]),
            _ => {
                plain.sort_by(|a, b| self.cmp_canonical(*a, *b));
                Some(self.intern(Node::Product(plain.into_boxed_slice())))
            }
        };
        let mut acc = match core {
            Some(c) => self.scale(scalar, c),
            None => self.constant(scalar),
        };
        for s in sums {
            acc = self.distribute(acc, s);
        }
        acc
    }

    fn distribute(&mut self, a: Expr, b: Expr) -> Expr {
        let (ca, ta) = self.as_linear(a);
        let (cb, tb) = self.as_linear(b);
        let mut items: Vec<(f64, Expr)> = Vec::with_capacity((ta.len() + 1) * (tb.len() + 1));
        for &(ka, x) in &ta {
            if cb != 0.0 {
                items.push((ka * cb, x));
            }
            for &(kb, y) in &tb {
                let xy = self.product([x, y]);
                items.push((ka * kb, xy));
            }
        }
        if ca != 0.0 {
            for &(kb, y) in &tb {
                items.push((ca * kb, y));
            }
        }
        self.linear_combination(ca * cb, items)
    }

    /// Integer power. Only constant bases are expanded.
    pub fn pow(&mut self, base: Expr, k: i32) -> Expr {
        match k {
            0 => return self.one(),
            1 => return base,
            _ => {}
        }
        match self.node(base).clone() {
            Node::Const(c) => self.constant(val(c).powi(k)),
            Node::Sum { constant, terms } if constant == 0 && terms.len() == 1 => {
                let (c, t) = terms[0];
                let inner = self.pow(t, k);
                self.scale(val(c).powi(k), inner)
            }
            Node::Product(fs) => {
                let parts: Vec<Expr> = fs.iter().map(|&f| self.pow(f, k)).collect();
                self.product(parts)
            }
            Node::Pow(b, j) => self.pow(b, j * k),
            _ => self.intern(Node::Pow(base, k)),
        }
    }

    // ----------------------------------------------------------------------
    // Transcendental functions

    pub fn exp(&mut self, a: Expr) -> Expr {
        match self.node(a).clone() {
            Node::Const(c) => self.constant(val(c).exp()),
            Node::Sum { constant, terms } if constant != 0 => {
                let rest = self.sum_without_constant(&terms);
                let e = self.intern(Node::Exp(rest));
                self.scale(val(constant).exp(), e)
            }
            _ => self.intern(Node::Exp(a)),
        }
    }

    pub fn sin(&mut self, a: Expr) -> Expr {
        match self.node(a).clone() {
            Node::Const(c) => self.constant(val(c).sin()),
            Node::Sum { constant, terms } if constant != 0 => {
                let c = val(constant);
                let rest = self.sum_without_constant(&terms);
                let s = self.intern(Node::Sin(rest));
                let co = self.intern(Node::Cos(rest));
                self.linear_combination(0.0, [(c.cos(), s), (c.sin(), co)])
            }
            _ => self.intern(Node::Sin(a)),
        }
    }

    pub fn cos(&mut self, a: Expr) -> Expr {
        match self.node(a).clone() {
            Node::Const(c) => self.constant(val(c).cos()),
            Node::Sum { constant, terms } if constant != 0 => {
                let c = val(constant);
                let rest = self.sum_without_constant(&terms);
                let s = self.intern(Node::Sin(rest));
                let co = self.intern(Node::Cos(rest));
                self.linear_combination(0.0, [(c.cos(), co), (-c.sin(), s)])
            }
            _ => self.intern(Node::Cos(a)),
        }
    }

    fn sum_without_constant(&mut self, terms: &[(u64, Expr)]) -> Expr {
        let items: Vec<(f64, Expr)> = terms.iter().map(|&(c, t)| (val(c), t)).collect();
        self.linear_combination(0.0, items)
    }

    // ----------------------------------------------------------------------
    // Inspection

    pub(crate) fn children(&self, e: Expr) -> Vec<Expr> {
        match self.node(e) {
            Node::Const(_) | Node::Var(_) => Vec::new(),
            Node::Sum { terms, .. } => terms.iter().map(|&(_, t)| t).collect(),
            Node::Product(fs) => fs.to_vec(),
            Node::Pow(b, _) => vec![*b],
            Node::Exp(a) | Node::Sin(a) | Node::Cos(a) => vec![*a],
        }
    }

    /// Number of distinct DAG nodes reachable from `e`.
    pub fn node_count(&self, e: Expr) -> usize {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![e];
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(self.children(x));
            }
        }
        seen.len()
    }

    /// Sorted list of free variable indices.
    pub fn free_vars(&self, e: Expr) -> Vec<u32> {
        let mut seen = std::collections::HashSet::new();
        let mut vars = std::collections::BTreeSet::new();
        let mut stack = vec![e];
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            if let Node::Var(i) = self.node(x) {
                vars.insert(*i);
            }
            stack.extend(self.children(x));
        }
        vars.into_iter().collect()
    }

    pub fn display(&self, e: Expr) -> Display<'_> {
        Display { store: self, expr: e }
    }

    fn write_expr(&self, e: Expr, f: &mut fmt::Formatter<'_>, wrap: bool) -> fmt::Result {
        match self.node(e) {
            Node::Const(c) => {
                let v = val(*c);
                if wrap && v < 0.0 {
                    write!(f, "({v})")
                } else {
                    write!(f, "{v}")
                }
            }
            Node::Var(i) => write!(f, "x[{i}]"),
            Node::Sum { constant, terms } => {
                if wrap {
                    f.write_str("(")?;
                }
                let mut first = true;
                for &(c, t) in terms.iter() {
                    let c = val(c);
                    if !first {
                        f.write_str(if c < 0.0 { " - " } else { " + " })?;
                    } else if c < 0.0 {
                        f.write_str("-")?;
                    }
                    let a = c.abs();
                    if a != 1.0 {
                        write!(f, "{a}*")?;
                    }
                    self.write_expr(t, f, true)?;
                    first = false;
                }
                let c = val(*constant);
                if c != 0.0 {
                    write!(f, " {} {}", if c < 0.0 { "-" } else { "+" }, c.abs())?;
                }
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Node::Product(fs) => {
                for (i, &g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    self.write_expr(g, f, true)?;
                }
                Ok(())
            }
            Node::Pow(b, k) => {
                self.write_expr(*b, f, true)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Exp(a) | Node::Sin(a) | Node::Cos(a) => {
                let name = match self.node(e) {
                    Node::Exp(_) => "exp",
                    Node::Sin(_) => "sin",
                    _ => "cos",
                };
                write!(f, "{name}(")?;
                self.write_expr(*a, f, false)?;
                f.write_str(")")
            }
        }
    }
}

/// Formats an expression in the input grammar.
pub struct Display<'a> {
    store: &'a ExprStore,
    expr: Expr,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.store.write_expr(self.expr, f, false)
    }
}
