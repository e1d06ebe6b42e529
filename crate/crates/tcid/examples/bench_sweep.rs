use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tcid::calculus::{backdoor, rule1, rule2, rule3, verify_markov};
use tcid::cbn::{random_licbn, RandomModelCfg};
use tcid::graph::NodeId;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = RandomModelCfg {
        n_observed: 4,
        n_latent: 2,
        n_input: 1,
        domain_sizes: vec![2, 3],
        edge_percent: 50,
        strictly_positive: true,
    };
    let m = random_licbn(&mut rng, &cfg);

    let t = Instant::now();
    let rep = verify_markov(&m, None).unwrap();
    println!("verify_markov: {:?} (checked {})", t.elapsed(), rep.checked);

    let obs: Vec<NodeId> = m.graph().observed().into_iter().collect();
    let t = Instant::now();
    let mut calls = 0u32;
    for code in 0..(5u32.pow(obs.len() as u32)) {
        let mut sets = vec![BTreeSet::new(); 4];
        let mut c = code;
        for node in &obs {
            let k = (c % 5) as usize;
            c /= 5;
            if k < 4 {
                sets[k].insert(node.clone());
            }
        }
        let (a, b, cc, d) = (&sets[0], &sets[1], &sets[2], &sets[3]);
        let _ = rule1(&m, a, b, cc, d).unwrap();
        let _ = rule2(&m, a, b, cc, d).unwrap();
        let _ = rule3(&m, a, b, cc, d).unwrap();
        if d.is_empty() {
            let _ = backdoor(&m, a, b, cc).unwrap();
        }
        calls += 1;
    }
    println!("calculus sweep: {:?} ({} tuples)", t.elapsed(), calls);
}
