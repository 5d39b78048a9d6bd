mod oracle;

use proptest::prelude::*;

use oracle::{gradient_check, small_autoencoder_problem as small_problem};

const H: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reconstruction_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (ae, x, _, _) = small_problem(seed);
        prop_assert!(ae.parameter_count() <= 500);
        let err = gradient_check(&ae, &x, None, H);
        prop_assert!(err <= TOLERANCE, "relative error {err}");
    }

    #[test]
    fn combined_gradient_matches_finite_differences(seed in any::<u64>(), lambda in 0.05f64..2.0) {
        let (ae, x, centers, target) = small_problem(seed);
        let err = gradient_check(&ae, &x, Some((&centers, &target, lambda)), H);
        prop_assert!(err <= TOLERANCE, "relative error {err}");
    }
}
