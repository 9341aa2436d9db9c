use mdilr_core::corpus::CORPUS;
use mdilr_core::lattice::{korobov_vector, LatticeRule};
use mdilr_core::mdi::{direct_tensor_sum, level_count, mdi_sum};
use mdilr_core::quad::{implr_integrate, mc_integrate, mdilr_integrate, slr_integrate};
use mdilr_core::transform::{forward_transform, grid_completion, improved_rule, power_count};
use mdilr_core::{parse, AxisGridSet, Expr, ExprStore, IterationOrder, MdiConfig, NodeMap, VarAssignment};
use proptest::prelude::*;
use std::collections::{BTreeSet, HashMap};

/// Reference expression tree evaluated directly in f64.
#[derive(Clone, Debug)]
enum Ast {
    Const(f64),
    Var(u32),
    Add(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, i32),
    Exp(Box<Ast>),
    Sin(Box<Ast>),
    Cos(Box<Ast>),
}

impl Ast {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Ast::Const(c) => *c,
            Ast::Var(i) => x[*i as usize - 1],
            Ast::Add(a, b) => a.eval(x) + b.eval(x),
            Ast::Mul(a, b) => a.eval(x) * b.eval(x),
            Ast::Pow(a, k) => a.eval(x).powi(*k),
            Ast::Exp(a) => a.eval(x).exp(),
            Ast::Sin(a) => a.eval(x).sin(),
            Ast::Cos(a) => a.eval(x).cos(),
        }
    }

    fn build(&self, s: &mut ExprStore) -> Expr {
        match self {
            Ast::Const(c) => s.constant(*c),
            Ast::Var(i) => s.var(*i),
            Ast::Add(a, b) => {
                let (a, b) = (a.build(s), b.build(s));
                s.add(a, b)
            }
            Ast::Mul(a, b) => {
                let (a, b) = (a.build(s), b.build(s));
                s.mul(a, b)
            }
            Ast::Pow(a, k) => {
                let a = a.build(s);
                s.pow(a, *k)
            }
            Ast::Exp(a) => {
                let a = a.build(s);
                s.exp(a)
            }
            Ast::Sin(a) => {
                let a = a.build(s);
                s.sin(a)
            }
            Ast::Cos(a) => {
                let a = a.build(s);
                s.cos(a)
            }
        }
    }
}

/// Linear argument for exp/sin/cos, keeping values moderate on [0,1]^d.
fn linear(d: u32) -> impl Strategy<Value = Ast> {
    (-1.0..1.0f64, prop::collection::vec((1..=d, -1.0..1.0f64), 1..=3)).prop_map(|(c, terms)| {
        terms.into_iter().fold(Ast::Const(c), |acc, (v, k)| {
            Ast::Add(Box::new(acc), Box::new(Ast::Mul(Box::new(Ast::Const(k)), Box::new(Ast::Var(v)))))
        })
    })
}

fn ast(d: u32) -> impl Strategy<Value = Ast> {
    let leaf = prop_oneof![(-2.0..2.0f64).prop_map(Ast::Const), (1..=d).prop_map(Ast::Var)];
    let trans = prop_oneof![
        linear(d).prop_map(|a| Ast::Exp(Box::new(a))),
        linear(d).prop_map(|a| Ast::Sin(Box::new(a))),
        linear(d).prop_map(|a| Ast::Cos(Box::new(a))),
    ];
    prop_oneof![leaf, trans].prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ast::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Ast::Mul(Box::new(a), Box::new(b))),
            (inner, 0..=3i32).prop_map(|(a, k)| Ast::Pow(Box::new(a), k)),
        ]
    })
}

/// Random polynomial: a sum of monomials with small exponents.
fn poly(d: u32) -> impl Strategy<Value = Ast> {
    prop::collection::vec((-2.0..2.0f64, prop::collection::vec((1..=d, 1..=3i32), 0..=3)), 1..=5).prop_map(
        |terms| {
            terms
                .into_iter()
                .map(|(c, mono)| {
                    mono.into_iter().fold(Ast::Const(c), |acc, (v, k)| {
                        Ast::Mul(Box::new(acc), Box::new(Ast::Pow(Box::new(Ast::Var(v)), k)))
                    })
                })
                .reduce(|a, b| Ast::Add(Box::new(a), Box::new(b)))
                .unwrap()
        },
    )
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn assignment(x: &[f64]) -> VarAssignment {
    VarAssignment::from(x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn store_matches_reference_tree(e in ast(4), x in prop::collection::vec(0.0..1.0f64, 4)) {
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        let want = e.eval(&x);
        let got = s.eval(g, &assignment(&x)).unwrap();
        prop_assert!(close(got, want, 1e-10), "{got} vs {want}");
        prop_assert_eq!(s.compile(g).eval(&x).to_bits(), got.to_bits());
    }

    #[test]
    fn bind_preserves_meaning(e in ast(4), x in prop::collection::vec(0.0..1.0f64, 4), var in 1..=4u32) {
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        let b = s.bind(g, var, x[var as usize - 1]);
        prop_assert!(!s.free_vars(b).contains(&var));
        let full = s.eval(g, &assignment(&x)).unwrap();
        let mut rest = VarAssignment::new();
        for (i, &v) in x.iter().enumerate() {
            if i + 1 != var as usize {
                rest.set(i as u32 + 1, v);
            }
        }
        let bound = s.eval(b, &rest).unwrap();
        prop_assert!(close(bound, full, 1e-12), "{bound} vs {full}");
    }

    #[test]
    fn partial_sum_is_sum_of_bindings(
        e in ast(6),
        x in prop::collection::vec(0.0..1.0f64, 6),
        var in 1..=6u32,
        values in prop::collection::vec(0.0..1.0f64, 1..=16),
    ) {
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        let p = s.partial_sum(g, var, &values, usize::MAX).unwrap();
        let mut want = 0.0;
        let mut y = x.clone();
        for &v in &values {
            y[var as usize - 1] = v;
            want += e.eval(&y);
        }
        let got = s.eval(p, &assignment(&x)).unwrap();
        prop_assert!(close(got, want, 1e-10), "{got} vs {want}");
    }

    #[test]
    fn polynomial_partial_sums_keep_their_shape(
        e in poly(4),
        var in 1..=4u32,
        v in prop::collection::vec(0.01..1.0f64, 9),
    ) {
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        let small = s.partial_sum(g, var, &v[..2], usize::MAX).unwrap();
        let large = s.partial_sum(g, var, &v, usize::MAX).unwrap();
        prop_assert_eq!(s.node_count(small), s.node_count(large));
    }

    #[test]
    fn canonical_forms_are_fixed_points(e in ast(4)) {
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        prop_assert_eq!(s.substitute(g, &HashMap::new()), g);
        let ids: HashMap<u32, Expr> = (1..=4).map(|i| (i, s.var(i))).collect();
        prop_assert_eq!(s.substitute(g, &ids), g);
        let again = e.build(&mut s);
        prop_assert_eq!(again, g);
    }

    #[test]
    fn mdi_matches_direct_for_polynomials(e in poly(6), counts in prop::collection::vec(1..=3u64, 6)) {
        let d = counts.len();
        let mut s = ExprStore::new();
        let g = e.build(&mut s);
        let grids = AxisGridSet::centered(&counts);
        let direct = direct_tensor_sum(&s, g, &grids, 1 << 20).unwrap();
        let mut results = Vec::new();
        for m in 1..=3 {
            for order in [IterationOrder::Forward, IterationOrder::Reverse] {
                let cfg = MdiConfig { m, order, ..MdiConfig::default() };
                let r = mdi_sum(&mut s, g, &grids, &cfg).unwrap();
                prop_assert!(!r.fallback);
                prop_assert_eq!(r.levels, level_count(d, m));
                results.push(r.value);
            }
        }
        for v in results {
            prop_assert!(close(v, direct, 1e-12), "{v} vs {direct}");
        }
    }

    #[test]
    fn lattice_projections_are_equispaced(n in 2..=60u64, d in 1..=4usize, seed in any::<u64>()) {
        let z: Vec<u64> = (0..d as u64)
            .map(|j| (1..n).cycle().skip((seed.rotate_left(j as u32 * 8) % n) as usize).find(|c| gcd(*c, n) == 1).unwrap())
            .collect();
        let rule = LatticeRule::new(n, &z).unwrap();
        let pts = rule.points();
        for j in 0..d {
            let mut got: Vec<u64> = pts.iter().map(|p| (p[j] * n as f64).round() as u64).collect();
            got.sort_unstable();
            prop_assert_eq!(got, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn constants_integrate_exactly(c in -10.0..10.0f64, a in 2..=4u64, d in 1..=4usize, seed in any::<u64>()) {
        let mut s = ExprStore::new();
        let f = s.constant(c);
        let n = power_count(a, d);
        prop_assert_eq!(mc_integrate(&s, f, d, 100, seed).value, c);
        let rule = korobov_vector(a, a.pow(d as u32) + 1, d).unwrap();
        prop_assert_eq!(slr_integrate(&s, f, &rule).value, c);
        prop_assert_eq!(implr_integrate(&mut s, f, d, a, &n, NodeMap::Centered, 1 << 20).unwrap().value, c);
        let r = mdilr_integrate(&mut s, f, d, a, &n, NodeMap::Centered, &MdiConfig::default()).unwrap();
        prop_assert_eq!(r.value, c);
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn parsing_twice_yields_the_same_node() {
    let mut s = ExprStore::new();
    for e in CORPUS {
        let d = e.fixed_dim.unwrap_or(5);
        let a = e.parse(&mut s, d).unwrap();
        let len = s.len();
        let b = e.parse(&mut s, d).unwrap();
        assert_eq!(a, b, "{}", e.id);
        assert_eq!(s.len(), len);
    }
}

#[test]
fn telescoped_grid_sum_equals_lattice_sum() {
    for (a, d) in [(2u64, 3usize), (3, 3), (3, 4), (4, 3), (5, 2)] {
        let n = a.pow(d as u32);
        let rule = korobov_vector(a, n, d).unwrap();
        for entry in CORPUS.iter().filter(|e| e.supports(d)) {
            let mut s = ExprStore::new();
            let f = entry.parse(&mut s, d).unwrap();
            let lattice = slr_integrate(&s, f, &rule).value;
            let nb = power_count(a, d);
            let imp = implr_integrate(&mut s, f, d, a, &nb, NodeMap::Telescoped, 1 << 20).unwrap().value;
            let mdi = mdilr_integrate(&mut s, f, d, a, &nb, NodeMap::Telescoped, &MdiConfig::default()).unwrap().value;
            assert!(close(imp, lattice, 1e-12), "{} a={a} d={d}: {imp} vs {lattice}", entry.id);
            assert!(close(mdi, imp, 1e-12), "{} a={a} d={d}: {mdi} vs {imp}", entry.id);
        }
    }
}

#[test]
fn telescoped_nodes_map_into_the_cube() {
    for (a, d) in [(3u64, 3usize), (4, 4), (10, 3)] {
        let n = power_count(a, d);
        let mut s = ExprStore::new();
        let vars: Vec<Expr> = (1..=d as u32).map(|i| s.var(i)).collect();
        let mut maxes = Vec::new();
        for (i, &v) in vars.iter().enumerate() {
            let r = improved_rule(&mut s, v, d, a, &n, NodeMap::Telescoped).unwrap();
            let tape = s.compile(r.g);
            // x_i is monotone in every y_j, so the extremes sit at the grid corners.
            let lo: Vec<f64> = r.grids.axes().iter().map(|ax| ax[0]).collect();
            let hi: Vec<f64> = r.grids.axes().iter().map(|ax| *ax.last().unwrap()).collect();
            assert!(tape.eval(&lo) >= 0.0, "axis {i}");
            maxes.push(tape.eval(&hi));
        }
        assert!(maxes.iter().all(|&m| m < 1.0), "{maxes:?}");
    }
}

#[test]
fn full_power_grids_are_bijective() {
    for (a, d) in [(2u64, 5usize), (3, 4), (6, 3), (7, 2)] {
        let n = a.pow(d as u32);
        let rule = korobov_vector(a, n, d).unwrap();
        let image: BTreeSet<_> = (0..n).map(|j| forward_transform(&rule, j)).collect();
        assert_eq!(image.len() as u64, n);
        assert_eq!(grid_completion(&rule).unwrap().n_star, 0);
    }
}

#[test]
fn forced_fallback_equals_direct_path() {
    let n = power_count(3, 5);
    for entry in CORPUS.iter().filter(|e| e.supports(5)) {
        let mut s = ExprStore::new();
        let f = entry.parse(&mut s, 5).unwrap();
        let direct = implr_integrate(&mut s, f, 5, 3, &n, NodeMap::Centered, 1 << 20).unwrap().value;
        let cfg = MdiConfig { budget: 1, ..MdiConfig::default() };
        let r = mdilr_integrate(&mut s, f, 5, 3, &n, NodeMap::Centered, &cfg).unwrap();
        assert!(r.mdi.as_ref().unwrap().fallback || entry.id == "one", "{}", entry.id);
        assert_eq!(r.value.to_bits(), direct.to_bits(), "{}", entry.id);
    }
}

#[test]
fn text_and_builder_agree() {
    let mut s = ExprStore::new();
    let parsed = parse(&mut s, "2*x[1]^2 + exp(x[2] - 1) * cos(x[3])", 3).unwrap();
    let x1 = s.var(1);
    let x2 = s.var(2);
    let x3 = s.var(3);
    let sq = s.pow(x1, 2);
    let t1 = s.scale(2.0, sq);
    let m1 = s.constant(-1.0);
    let arg = s.add(x2, m1);
    let ex = s.exp(arg);
    let co = s.cos(x3);
    let t2 = s.mul(ex, co);
    let built = s.add(t1, t2);
    assert_eq!(parsed, built);
}
