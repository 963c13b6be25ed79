//! Closed-form error terms and the regularization strength they suggest.

use pro_rl::bounds::{
    alpha_un_selector, clone_term, gap_bound, recommended_alpha, AlphaTarget, BoundConstants, BoundReport,
};
use pro_rl::regularizer::Regularizer;

fn main() -> pro_rl::Result<()> {
    let reg = Regularizer::default();
    for n in [1_000, 10_000, 100_000, 1_000_000] {
        let c = BoundConstants::derive(&reg, 0.3, 0.9, 5.0, 20.0, n, n, 0.1, (31, 31))?;
        let report = BoundReport::new(c, Some((8, n / 10)))?;
        println!(
            "n {n:>8}: statistical error {:.4}  gap bound {:.3}  with cloning {:.3}",
            report.eps_stat,
            report.rhs_gap,
            report.rhs_cloned.unwrap()
        );
    }
    println!("gap bound at deviation 1e-3: {:.4}", gap_bound(1e-3, 0.3, 1.0, 0.9)?);
    println!("clone term, 8 policies, n2 = 1e4: {:.4}", clone_term(5.0, 8, 0.1, 10_000)?);
    println!("alpha for accuracy 0.1: {:.4}", recommended_alpha(AlphaTarget::Unregularized, 0.1, 2.0)?);
    let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * 1e-3).collect();
    println!("grid alpha balancing bias and error: {:.3}", alpha_un_selector(1e-4, 1e-4, 2.0, 1.0, 0.9, &grid)?);
    Ok(())
}
