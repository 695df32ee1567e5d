mod common;

#[test]
fn backprop_matches_central_differences() {
    for seed in 0..10 {
        let err = common::gradient_check(seed);
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
    }
}
