//! Samples a dataset, writes it as JSONL plus a start-state file, and reads
//! it back.

use std::io::BufReader;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pro_rl::dataset::{generate_dataset, OfflineDataset};
use pro_rl::mdp::{exact_occupancy, Policy, TabularMdp};

fn main() -> pro_rl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mdp = TabularMdp::random(3, 2, 0.9, &mut rng);
    let data_dist = exact_occupancy(&mdp, &Policy::uniform(3, 2))?;
    let data = generate_dataset(&mdp, &data_dist, 1000, 100, 11)?;

    let dir = std::env::temp_dir().join("pro-rl-dataset");
    std::fs::create_dir_all(&dir)?;
    data.write_transitions_jsonl(std::fs::File::create(dir.join("dataset.jsonl"))?)?;
    data.write_init_states(std::fs::File::create(dir.join("init_states.txt"))?)?;

    let back = OfflineDataset::read_jsonl(
        3,
        2,
        mdp.gamma(),
        BufReader::new(std::fs::File::open(dir.join("dataset.jsonl"))?),
        BufReader::new(std::fs::File::open(dir.join("init_states.txt"))?),
    )?;
    println!("{} transitions and {} start states in {}", back.len(), back.num_init(), dir.display());
    println!("empirical (s, a) frequencies:\n{:.4}", &back.stats().counts / back.len() as f64);
    println!("sampling distribution:\n{:.4}", data_dist.mass());
    Ok(())
}
