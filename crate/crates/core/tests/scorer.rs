mod common;

use common::{gradient_check, tiny_config, toy_document};
use dcoref_core::scorer::Parameters;

#[test]
fn analytic_gradient_matches_finite_differences() {
    for seed in 0..2 {
        let r = gradient_check(seed, 1e-5, 1e-6);
        println!("seed {seed}: {} partials, max rel err {:e} ({})", r.checked, r.max_rel_error, r.worst);
        assert!(r.max_rel_error < 1e-4, "seed {seed}: {}", r.worst);
    }
}

#[test]
fn forward_is_deterministic() {
    let doc = toy_document();
    let p = Parameters::init(&tiny_config(), doc.tokens.iter().map(|t| t.text.clone()), 4);
    assert_eq!(p.score(&doc).unwrap(), p.score(&doc).unwrap());
}
