use std::collections::HashSet;

use cgolab::verify::{check_names, run_suite, SuiteConfig};

#[test]
fn suite_passes_for_several_seeds() {
    for seed in [0, 1, 42] {
        for r in run_suite(&SuiteConfig { seed }) {
            assert!(r.pass, "seed {seed}: {} = {:e} > {:e} ({:?})", r.name, r.value, r.threshold, r.error);
        }
    }
}

#[test]
fn check_names_are_unique_and_match_results() {
    let names = check_names();
    let unique: HashSet<_> = names.iter().collect();
    assert_eq!(unique.len(), names.len());
    let results: Vec<_> = run_suite(&SuiteConfig { seed: 5 }).into_iter().map(|r| r.name).collect();
    assert_eq!(results, names);
}
