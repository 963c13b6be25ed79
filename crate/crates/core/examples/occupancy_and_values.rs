//! Exact occupancy, values and returns of a policy on a random MDP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pro_rl::mdp::{exact_occupancy, flow_residual, performance_difference, policy_return, policy_values, Policy, TabularMdp};

fn main() -> pro_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mdp = TabularMdp::random(4, 2, 0.9, &mut rng);
    let uniform = Policy::uniform(4, 2);
    let greedy = Policy::deterministic(&[0, 1, 0, 1], 2);

    let d = exact_occupancy(&mdp, &uniform)?;
    println!("occupancy of the uniform policy:\n{}", d.mass());
    println!("flow residual: {:.1e}", flow_residual(&mdp, &d));

    let (v, q) = policy_values(&mdp, &uniform)?;
    println!("values {:.4}", v.transpose());
    println!("action values:\n{q:.4}");

    let (a, b) = (policy_return(&mdp, &greedy)?, policy_return(&mdp, &uniform)?);
    println!("returns: fixed {a:.5}, uniform {b:.5}");
    // The same difference, written as advantages under the other policy.
    println!("performance difference {:.5}", performance_difference(&mdp, &greedy, &uniform)?);
    Ok(())
}
