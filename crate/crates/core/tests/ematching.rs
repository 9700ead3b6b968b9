mod common;

use std::collections::BTreeSet;

use common::{random_steps, replay};
use eqsat::language::{Arity, LanguageDef, LeafKinds};
use eqsat::pattern::PatternNode;
use eqsat::{EGraph, Id, NoAnalysis, Pattern};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Binding = Vec<(String, Id)>;

fn lang() -> LanguageDef {
    LanguageDef::new(
        "sig",
        [("f", Arity::Fixed(1)), ("g", Arity::Fixed(2)), ("h", Arity::Fixed(2))],
        LeafKinds {
            ints: false,
            bools: false,
            symbols: true,
        },
    )
    .unwrap()
}

fn random_pattern(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.35) {
        return ["?x", "?y", "?z", "a", "b"].choose(rng).unwrap().to_string();
    }
    match rng.gen_range(0..3) {
        0 => format!("(f {})", random_pattern(rng, depth - 1)),
        1 => format!(
            "(g {} {})",
            random_pattern(rng, depth - 1),
            random_pattern(rng, depth - 1)
        ),
        _ => format!(
            "(h {} {})",
            random_pattern(rng, depth - 1),
            random_pattern(rng, depth - 1)
        ),
    }
}

// every way of matching pattern node `at` against class `class`
fn naive(g: &EGraph<NoAnalysis>, p: &Pattern, at: usize, class: Id, bound: Binding) -> Vec<Binding> {
    match &p.nodes()[at] {
        PatternNode::Var(v) => match bound.iter().find(|(name, _)| name == v.as_str()) {
            Some(&(_, id)) if g.find(id) == class => vec![bound],
            Some(_) => vec![],
            None => {
                let mut b = bound;
                b.push((v.as_str().to_owned(), class));
                vec![b]
            }
        },
        PatternNode::Node(pn) => {
            let mut out = Vec::new();
            for n in g[class]
                .iter()
                .filter(|n| n.op == pn.op && n.children.len() == pn.children.len())
            {
                let mut partial = vec![bound.clone()];
                for (&pc, &nc) in pn.children.iter().zip(&n.children) {
                    partial = partial
                        .into_iter()
                        .flat_map(|b| naive(g, p, usize::from(pc), g.find(nc), b))
                        .collect();
                }
                out.extend(partial);
            }
            out
        }
    }
}

fn normalise(b: Binding) -> Binding {
    let mut b = b;
    b.sort();
    b
}

#[test]
fn compiled_matcher_agrees_with_backtracking() {
    let lang = lang();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut total = 0;
    for _ in 0..300 {
        let steps = random_steps(&mut rng, 30, 10);
        let mut g = EGraph::new(NoAnalysis);
        replay(&mut g, &steps, |_| {});
        g.refresh_index();
        for _ in 0..5 {
            let src = random_pattern(&mut rng, 3);
            let p = Pattern::parse(&src, &lang).unwrap();
            let root = p.nodes().len() - 1;
            let mut expected = BTreeSet::new();
            for class in g.class_ids() {
                for b in naive(&g, &p, root, class, Vec::new()) {
                    expected.insert((class, normalise(b)));
                }
            }
            let mut got = BTreeSet::new();
            for m in p.search(&g) {
                for s in &m.substs {
                    let b = s.iter().map(|(v, id)| (v.as_str().to_owned(), id)).collect();
                    assert!(got.insert((m.eclass, normalise(b))), "duplicate match for {src}");
                }
            }
            assert_eq!(got, expected, "pattern {src}");
            total += expected.len();
        }
    }
    assert!(total > 1000, "too few matches to be meaningful: {total}");
}

#[test]
fn search_eclass_agrees_with_search() {
    let lang = lang();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let steps = random_steps(&mut rng, 25, 8);
        let mut g = EGraph::new(NoAnalysis);
        replay(&mut g, &steps, |_| {});
        let p = Pattern::parse(&random_pattern(&mut rng, 2), &lang).unwrap();
        let all = p.search(&g);
        for class in g.class_ids() {
            let one = p.search_eclass(&g, class);
            let from_all = all.iter().find(|m| m.eclass == class);
            assert_eq!(one.as_ref().map(|m| &m.substs), from_all.map(|m| &m.substs));
        }
    }
}
