//! Azuma bound, the lock-in bound curve, and the superadditivity check.

use salab::analysis::{
    azuma_bound, convex_region_limit, superadditivity_check, theoretical_bound, BoundFamily,
};

fn main() {
    println!("azuma(t = 2, c = [1]) = {}", azuma_bound(2.0, &[1.0]).unwrap());
    println!("azuma(t = 2, c = [1, 1]) = {}", azuma_bound(2.0, &[1.0, 1.0]).unwrap());
    for b in [1.0, 0.1, 0.01, 1e-4] {
        println!("bound(c1 = 1, c = 1, delta = 8, b = {b}) = {:.4e}", theoretical_bound(1.0, 1.0, 8.0, b).unwrap());
    }

    let g = BoundFamily::ExpBound {
        c1: 1.0,
        c: 1.0,
        delta: 1.0,
    };
    let limit = convex_region_limit(&g, 0.01);
    println!("g convex on (0, {limit:.6}); closed form (1/5)^4 = {}", 0.2f64.powi(4));
    let region = 0.99 * limit;
    let mut checked = 0;
    for i in 0..=20 {
        for j in 0..=20 {
            let (a, b) = (region * i as f64 / 41.0, region * j as f64 / 41.0);
            assert!(superadditivity_check(&g, a, b, region).unwrap());
            checked += 1;
        }
    }
    println!("g(a) + g(b) <= g(a + b) on all {checked} grid pairs");
    match superadditivity_check(&g, 0.1, 0.1, 1.0) {
        Ok(v) => println!("outside the convex region: {v}"),
        Err(e) => println!("outside the convex region: {e}"),
    }
}
