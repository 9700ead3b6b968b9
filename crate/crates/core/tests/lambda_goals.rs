use eqsat::domains::lambda::{lambda_rules, language, LambdaAnalysis};
use eqsat::{AstSize, EGraph, Extractor, Pattern, Runner, RunnerConfig};

fn run(src: &str) -> Runner<LambdaAnalysis> {
    Runner::new(RunnerConfig::default(), EGraph::new(LambdaAnalysis))
        .with_term(&language().parse_term(src).unwrap())
        .run(&lambda_rules())
}

fn best(r: &Runner<LambdaAnalysis>) -> String {
    Extractor::new(&r.egraph, AstSize).find_best(r.roots[0]).1.to_string()
}

#[test]
fn constant_folds_under_a_binder() {
    assert_eq!(best(&run("(lam x (+ 4 (app (lam y (var y)) 4)))")), "(lam x 8)");
}

#[test]
fn if_elim() {
    let r = run("(if (= (var a) (var b)) (+ (var a) (var a)) (+ (var a) (var b)))");
    assert_eq!(best(&r), "(+ (var a) (var b))");
}

#[test]
fn compose_many() {
    let r = run(
        "(let compose (lam f (lam g (lam x (app (var f) (app (var g) (var x))))))
         (let add1 (lam y (+ (var y) 1))
         (app (app (var compose) (var add1))
              (app (app (var compose) (var add1))
                   (app (app (var compose) (var add1))
                        (app (app (var compose) (var add1))
                             (var add1)))))))",
    );
    let goal = Pattern::parse("(lam ?x (+ (var ?x) 5))", &language()).unwrap();
    assert!(goal.search_eclass(&r.egraph, r.roots[0]).is_some());
}

#[test]
fn capture_is_avoided() {
    // substituting (var y) under (lam y ...) must rename the binder
    let r = run("(let x (var y) (lam y (+ (var x) (var y))))");
    let goal = Pattern::parse("(lam ?z (+ (var y) (var ?z)))", &language()).unwrap();
    let wrong = Pattern::parse("(lam y (+ (var y) (var y)))", &language()).unwrap();
    assert!(goal.search_eclass(&r.egraph, r.roots[0]).is_some());
    assert!(wrong.search_eclass(&r.egraph, r.roots[0]).is_none());
}
