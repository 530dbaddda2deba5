//! Sampled Lipschitz, Hessian, growth, and descent checks on the built-in problems.

use salab::problem::{audit_assumptions, Problem};

fn main() {
    for problem in [Problem::linear_well(3), Problem::double_well(), Problem::spiral()] {
        let region = problem.domain().bounding_region();
        let a = audit_assumptions(&problem, 400, &region, 1).unwrap();
        println!(
            "{:<12} L = {:.3}  |D2V| = {:.3}  growth c = {:.3}  descent violations = {}  all flags: {}",
            problem.name(),
            a.lipschitz_estimate,
            a.hessian_bound_estimate,
            a.quadratic_growth_c,
            a.descent_violations,
            a.pass_flags.all()
        );
    }
}
