use bvloc_core::verify::{determinism, run_suite, VerifyOptions, CRITERIA};

#[test]
fn acceptance() {
    let opts = VerifyOptions::default();
    let mut results = run_suite(&opts);
    let det = determinism(&results, &opts);
    results.push(det);
    assert_eq!(results.len(), CRITERIA);
    for r in &results {
        println!("{}", r.line());
        if !r.pass {
            for (k, v) in &r.details {
                println!("    {k} = {v}");
            }
        }
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
