use std::collections::HashMap;
use std::rc::Rc;

use eqsat::domains::lambda::{lambda_rules, language, LambdaAnalysis};
use eqsat::language::{LeafValue, Op, Term};
use eqsat::{AstSize, EGraph, Extractor, Id, Runner, RunnerConfig};

#[derive(Clone, Debug)]
enum Value {
    Int(i64),
    Bool(bool),
    Closure(Env, String, Id),
}

type Env = Rc<HashMap<String, Value>>;

// call-by-value big-step evaluation with a step budget
fn eval(t: &Term, at: Id, env: &Env, fuel: &mut usize) -> Option<Value> {
    *fuel = fuel.checked_sub(1)?;
    let n = &t.nodes()[usize::from(at)];
    let child = |i: usize| n.children[i];
    let name = |id: Id| match t.nodes()[usize::from(id)].op {
        Op::Leaf(LeafValue::Symbol(s)) => Some(s.as_str().to_owned()),
        _ => None,
    };
    let bind = |env: &Env, x: String, v: Value| {
        let mut e = (**env).clone();
        e.insert(x, v);
        Rc::new(e)
    };
    match n.op {
        Op::Leaf(LeafValue::Int(i)) => Some(Value::Int(i)),
        Op::Leaf(LeafValue::Bool(b)) => Some(Value::Bool(b)),
        Op::Leaf(LeafValue::Symbol(_)) => None,
        Op::Call(f) => match f.as_str() {
            "var" => env.get(&name(child(0))?).cloned(),
            "lam" => Some(Value::Closure(env.clone(), name(child(0))?, child(1))),
            "app" => {
                let Value::Closure(cenv, x, body) = eval(t, child(0), env, fuel)? else {
                    return None;
                };
                let arg = eval(t, child(1), env, fuel)?;
                eval(t, body, &bind(&cenv, x, arg), fuel)
            }
            "let" => {
                let v = eval(t, child(1), env, fuel)?;
                eval(t, child(2), &bind(env, name(child(0))?, v), fuel)
            }
            "+" => match (eval(t, child(0), env, fuel)?, eval(t, child(1), env, fuel)?) {
                (Value::Int(a), Value::Int(b)) => a.checked_add(b).map(Value::Int),
                _ => None,
            },
            "=" => match (eval(t, child(0), env, fuel)?, eval(t, child(1), env, fuel)?) {
                (Value::Int(a), Value::Int(b)) => Some(Value::Bool(a == b)),
                (Value::Bool(a), Value::Bool(b)) => Some(Value::Bool(a == b)),
                _ => None,
            },
            "if" => match eval(t, child(0), env, fuel)? {
                Value::Bool(true) => eval(t, child(1), env, fuel),
                Value::Bool(false) => eval(t, child(2), env, fuel),
                _ => None,
            },
            _ => None,
        },
    }
}

fn run_closed(t: &Term) -> Option<Value> {
    eval(t, t.root(), &Rc::new(HashMap::new()), &mut 10_000)
}

fn leaf_of(v: &Value) -> Option<LeafValue> {
    match v {
        Value::Int(i) => Some(LeafValue::Int(*i)),
        Value::Bool(b) => Some(LeafValue::Bool(*b)),
        Value::Closure(..) => None,
    }
}

const CORPUS: [(&str, Option<i64>); 12] = [
    ("(let x 1 (+ (var x) 2))", Some(3)),
    ("(app (lam x (+ (var x) 1)) 41)", Some(42)),
    ("(let f (lam x (+ (var x) (var x))) (app (var f) 5))", Some(10)),
    ("(if (= 1 1) 2 3)", Some(2)),
    ("(if (= 1 2) 2 3)", Some(3)),
    ("(let x 2 (let y (+ (var x) 1) (+ (var x) (var y))))", Some(5)),
    ("(app (app (lam x (lam y (+ (var x) (var y)))) 3) 4)", Some(7)),
    ("(app (let y 1 (app (lam x (lam y (+ (var x) (var y)))) (var y))) 10)", Some(11)),
    ("(let z 4 (if (= (var z) 4) (+ (var z) 1) 0))", Some(5)),
    ("(let x 3 (let x 4 (var x)))", Some(4)),
    ("(app (lam x (app (lam y (var x)) 7)) 8)", Some(8)),
    ("(let c (lam f (lam g (lam x (app (var f) (app (var g) (var x)))))) (let i (lam y (+ (var y) 1)) (app (app (app (var c) (var i)) (var i)) 3)))", Some(5)),
];

#[test]
fn evaluator_agrees_with_the_expected_values() {
    for (src, expected) in CORPUS {
        let t = language().parse_term(src).unwrap();
        let got = run_closed(&t).and_then(|v| match v {
            Value::Int(i) => Some(i),
            _ => None,
        });
        assert_eq!(got, expected, "{src}");
    }
}

#[test]
fn folded_constants_and_extracted_terms_agree_with_evaluation() {
    let mut constants = 0;
    for (src, _) in CORPUS {
        let t = language().parse_term(src).unwrap();
        let runner = Runner::new(
            RunnerConfig {
                iter_limit: 12,
                ..RunnerConfig::default()
            },
            EGraph::new(LambdaAnalysis),
        )
        .with_term(&t)
        .run(&lambda_rules());
        let root = runner.roots[0];
        let reference = run_closed(&t).and_then(|v| leaf_of(&v));
        if let Some(c) = runner.egraph[root].data.constant {
            constants += 1;
            assert_eq!(Some(c), reference, "{src}: class constant disagrees with evaluation");
        }
        let (_, best) = Extractor::new(&runner.egraph, AstSize).find_best(root);
        if let Some(v) = run_closed(&best).and_then(|v| leaf_of(&v)) {
            assert_eq!(Some(v), reference, "{src}: extracted {best}");
        }
    }
    assert!(constants >= 8, "only {constants} roots folded to a constant");
}
