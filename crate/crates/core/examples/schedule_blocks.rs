//! Step schedules, ODE time, and the block partition used by every estimator.

use salab::schedule::StepSchedule;

fn main() {
    for (alpha, beta) in [(0.6, 0.0), (0.75, 0.0), (1.0, 0.0), (1.0, -1.0)] {
        let s = StepSchedule::poly_log(alpha, beta, 2).unwrap();
        let part = s.partition_blocks(1000, 1.0, 200_000).unwrap();
        let worst = s.block_ratios(&part).into_iter().fold(0.0, f64::max);
        let a2 = s.check_a2(1_000_000);
        println!(
            "{}: t(1000) = {:.3}, b(1000) = {:.3e}, {} blocks up to n = 2e5, widths {:?}..., max ratio {worst:.3} (bound {:.3}), A2 {}",
            s.id(),
            s.elapsed_time(1000),
            s.tail_sum_squares_auto(1000).unwrap(),
            part.block_count(),
            &part.widths()[..4.min(part.block_count())],
            (1.0 + s.a_max()).exp(),
            if a2.passes() { "ok" } else { "fails" },
        );
    }

    match StepSchedule::poly_log(0.4, 0.0, 2) {
        Ok(_) => println!("alpha = 0.4 accepted?"),
        Err(e) => println!("alpha = 0.4 rejected: {e}"),
    }
}
