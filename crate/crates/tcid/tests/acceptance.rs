//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Run with `--nocapture` to see the lines:
//!
//! ```text
//! cargo test -p tcid --test acceptance -- --nocapture --test-threads 1
//! ```

use std::collections::BTreeSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tcid::calculus::{
    backdoor, backdoor_equality, rule1, rule1_equality, rule2, rule3, verify_markov,
};
use tcid::cbn::{canonical_latent_model, random_licbn, LiCbn, RandomModelCfg};
use tcid::continuous::{
    demo_backdoor_failure, demo_no_pointwise, demo_positivity_not_necessary,
    shrinking_ball_conditional, Joint2D, QuadratureCfg,
};
use tcid::fixtures::{
    asymmetry_model, bow_graph, degenerate_root_chain_model, front_door_model,
    front_door_projection, threshold_triangle_model,
};
use tcid::graph::{fix_graph, latent_project, MixedGraph, NodeId};
use tcid::identify::{
    all_fixing_orders, apply_fixing_order, bow_witness, evaluate, fix_kernel,
    fix_kernel_division, one_line_identify,
};
use tcid::kernel::rat;
use tcid::tci::{tci_check, TransitionalSpace};

/// The shared random-model corpus: shapes cycle through at most 4 observed,
/// 2 latent and 1 input node with binary/ternary domains, all CPTs strictly
/// positive; one fixed seed per instance.
fn corpus(count: usize) -> Vec<LiCbn> {
    (0..count)
        .map(|i| {
            let cfg = RandomModelCfg {
                n_observed: 2 + i % 3,
                n_latent: (i / 3) % 3,
                n_input: (i / 9) % 2,
                domain_sizes: vec![2, 3],
                edge_percent: 35 + 10 * ((i / 18) % 4) as u32,
                strictly_positive: true,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
            random_licbn(&mut rng, &cfg)
        })
        .collect()
}

#[test]
fn criterion_1_markov_soundness() {
    let started = Instant::now();
    let models = corpus(200);
    // Single-threaded by construction: the sweep runs inside a one-thread
    // pool, so the runtime bound is honest.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let mut checked = 0u64;
    for m in &models {
        let report = pool.install(|| verify_markov(m, None)).unwrap();
        assert!(
            report.sound(),
            "separation without independence: {:?}",
            report.violations
        );
        assert!(!report.budget_exhausted);
        checked += report.checked;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 300,
        "runtime bound exceeded: {elapsed:?}"
    );
    println!(
        "criterion 1 (separation implies independence): PASS — {} models, {} triples, zero violations, {elapsed:?} single-threaded",
        models.len(),
        checked
    );
}

#[test]
fn criterion_2_calculus_soundness() {
    let models = corpus(200);
    let mut applications = 0u64;
    let mut verified = 0u64;
    for m in &models {
        let observed: Vec<NodeId> = m.graph().observed().into_iter().collect();
        let n = observed.len();
        for code in 0..5u32.pow(n as u32) {
            let mut sets = vec![BTreeSet::new(); 4];
            let mut c = code;
            for node in &observed {
                let k = (c % 5) as usize;
                c /= 5;
                if k < 4 {
                    sets[k].insert(node.clone());
                }
            }
            let (a, b, cc, d) = (&sets[0], &sets[1], &sets[2], &sets[3]);
            for report in [
                rule1(m, a, b, cc, d).unwrap(),
                rule2(m, a, b, cc, d).unwrap(),
                rule3(m, a, b, cc, d).unwrap(),
            ] {
                applications += 1;
                if report.graphical_ok && report.positivity_ok {
                    verified += 1;
                    assert_eq!(
                        report.equality_ok,
                        Some(true),
                        "{:?} violated on {a:?} {b:?} {cc:?} {d:?}\n{:?}",
                        report.rule,
                        report.counterexample
                    );
                }
            }
            if d.is_empty() {
                let report = backdoor(m, a, b, cc).unwrap();
                applications += 1;
                if report.graphical_ok && report.positivity_ok {
                    verified += 1;
                    assert_eq!(
                        report.equality_ok,
                        Some(true),
                        "adjustment violated on {a:?} {b:?} {cc:?}\n{:?}",
                        report.counterexample
                    );
                }
            }
        }
    }

    // Positivity is sufficient but not necessary: a degenerate root makes
    // the positivity test fail while the equality still holds on support.
    let m = degenerate_root_chain_model();
    let a: BTreeSet<NodeId> = [NodeId::from("c")].into();
    let b: BTreeSet<NodeId> = [NodeId::from("a")].into();
    let d: BTreeSet<NodeId> = [NodeId::from("b")].into();
    let report = rule1(&m, &a, &b, &BTreeSet::new(), &d).unwrap();
    assert!(report.graphical_ok && !report.positivity_ok);
    let eq = rule1_equality(&m, &a, &b, &BTreeSet::new(), &d).unwrap();
    assert!(eq.holds && eq.compared_rows > 0);
    println!(
        "criterion 2 note: positivity fails yet equality holds on support (deletion-of-observation on the degenerate-root chain, {} rows compared)",
        eq.compared_rows
    );

    // And the threshold triangle shows the equality genuinely failing when
    // absolute continuity is violated.
    let m = threshold_triangle_model();
    let outcome: BTreeSet<NodeId> = [NodeId::from("b")].into();
    let treatment: BTreeSet<NodeId> = [NodeId::from("a")].into();
    let adjustment: BTreeSet<NodeId> = [NodeId::from("c")].into();
    let report = backdoor(&m, &outcome, &treatment, &adjustment).unwrap();
    assert!(report.graphical_ok && !report.positivity_ok);
    let eq = backdoor_equality(&m, &outcome, &treatment, &adjustment).unwrap();
    assert!(!eq.holds);

    println!(
        "criterion 2 (calculus soundness): PASS — {applications} rule applications, {verified} with both preconditions, zero equality violations"
    );
}

/// All mixed graphs on the given observed nodes: every acyclic subset of
/// the ordered pairs, every subset of the unordered pairs.
fn enumerate_mixed_graphs(names: &[&str]) -> Vec<MixedGraph> {
    let n = names.len();
    let mut dir_pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                dir_pairs.push((names[i], names[j]));
            }
        }
    }
    let mut bi_pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            bi_pairs.push((names[i], names[j]));
        }
    }
    let mut out = Vec::new();
    for dmask in 0..(1u32 << dir_pairs.len()) {
        let directed: Vec<(&str, &str)> = dir_pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| dmask & (1 << k) != 0)
            .map(|(_, p)| *p)
            .collect();
        let Ok(base) = MixedGraph::build(&[], names, &[], &directed, &[]) else {
            continue; // cyclic
        };
        let _ = base;
        for bmask in 0..(1u32 << bi_pairs.len()) {
            let bidirected: Vec<(&str, &str)> = bi_pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| bmask & (1 << k) != 0)
                .map(|(_, p)| *p)
                .collect();
            out.push(MixedGraph::build(&[], names, &[], &directed, &bidirected).unwrap());
        }
    }
    out
}

fn nonempty_disjoint_pairs(nodes: &[NodeId]) -> Vec<(BTreeSet<NodeId>, BTreeSet<NodeId>)> {
    let mut out = Vec::new();
    for code in 0..3u32.pow(nodes.len() as u32) {
        let mut a = BTreeSet::new();
        let mut b = BTreeSet::new();
        let mut c = code;
        for node in nodes {
            match c % 3 {
                1 => {
                    a.insert(node.clone());
                }
                2 => {
                    b.insert(node.clone());
                }
                _ => {}
            }
            c /= 3;
        }
        if !a.is_empty() && !b.is_empty() {
            out.push((a, b));
        }
    }
    out
}

/// Identification against the oracle on one graph family.
fn check_id_on_graphs(graphs: &[MixedGraph], models_each: usize, seed: u64) -> (u64, u64) {
    let mut identified = 0u64;
    let mut refused = 0u64;
    for (gi, g) in graphs.iter().enumerate() {
        let observed: Vec<NodeId> = g.observed().into_iter().collect();
        let pairs = nonempty_disjoint_pairs(&observed);
        let queries: Vec<_> = pairs
            .iter()
            .map(|(a, b)| (a, b, one_line_identify(g, a, b).unwrap()))
            .collect();
        for mi in 0..models_each {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + (gi * 1000 + mi) as u64);
            let m = canonical_latent_model(g, &mut rng, 2, true);
            assert_eq!(&latent_project(m.graph()).unwrap(), g);
            let obs = m.observable_kernel().unwrap();
            for (a, b, res) in &queries {
                match res.formula() {
                    Some(formula) => {
                        identified += 1;
                        let value = evaluate(formula, &obs, b).unwrap();
                        let names: BTreeSet<String> = a.iter().map(|n| n.0.clone()).collect();
                        let oracle = m.oracle_do(b).unwrap().marginalize(&names).unwrap();
                        assert_eq!(
                            value, oracle,
                            "graph {gi} model {mi}: formula disagrees with oracle for A={a:?} B={b:?}"
                        );
                    }
                    None => refused += 1,
                }
            }
        }
    }
    (identified, refused)
}

#[test]
fn criterion_3_identification_matches_oracle() {
    // Exhaustive over all mixed graphs on three observed nodes.
    let three = enumerate_mixed_graphs(&["a", "b", "c"]);
    assert_eq!(three.len(), 25 * 8);
    let (id3, no3) = check_id_on_graphs(&three, 20, 42);

    // Seeded sample of mixed graphs on four observed nodes.
    let all_four = enumerate_mixed_graphs(&["a", "b", "c", "d"]);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sample = Vec::new();
    for _ in 0..40 {
        sample.push(all_four[rand::Rng::gen_range(&mut rng, 0..all_four.len())].clone());
    }
    let (id4, no4) = check_id_on_graphs(&sample, 20, 4242);

    // The front door is identifiable and evaluates to the oracle exactly.
    let m = front_door_model();
    let g = front_door_projection();
    let a: BTreeSet<NodeId> = [NodeId::from("b")].into();
    let b: BTreeSet<NodeId> = [NodeId::from("a")].into();
    let res = one_line_identify(&g, &a, &b).unwrap();
    let value = evaluate(res.formula().unwrap(), &m.observable_kernel().unwrap(), &b).unwrap();
    let oracle = m
        .oracle_do(&b)
        .unwrap()
        .marginalize(&["b".to_string()].into())
        .unwrap();
    assert_eq!(value, oracle);

    // The bow refuses, and the frozen witness pair explains why: identical
    // observables, interventional kernels at least 1/20 apart.
    let res = one_line_identify(&bow_graph(), &a, &b).unwrap();
    assert!(!res.is_identifiable());
    let (m1, m2) = bow_witness();
    assert_eq!(m1.observable_kernel().unwrap(), m2.observable_kernel().unwrap());
    let gap = {
        let k1 = m1.oracle_do(&b).unwrap().marginalize(&["b".to_string()].into()).unwrap();
        let k2 = m2.oracle_do(&b).unwrap().marginalize(&["b".to_string()].into()).unwrap();
        let d = k1.mass_at(&[("a", "1")], &[("b", "1")]) - k2.mass_at(&[("a", "1")], &[("b", "1")]);
        if d < rat(0, 1) {
            -d
        } else {
            d
        }
    };
    assert!(gap >= rat(1, 20));

    println!(
        "criterion 3 (identification matches oracle): PASS — 3-node exhaustive: {id3} identified / {no3} refused queries; 4-node sample: {id4} / {no4}; front door exact; bow witness gap {gap} ≥ 1/20"
    );
}

#[test]
fn criterion_4_fixing_confluence_and_blanket_agreement() {
    let mut graphs: Vec<MixedGraph> = vec![
        front_door_projection(),
        bow_graph(),
        MixedGraph::build(&[], &["a", "b", "c"], &[], &[("a", "b"), ("c", "b")], &[]).unwrap(),
        MixedGraph::build(
            &[],
            &["a", "b", "c", "d", "e"],
            &[],
            &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e")],
            &[],
        )
        .unwrap(),
        MixedGraph::build(
            &[],
            &["a", "b", "c", "d", "e"],
            &[],
            &[("a", "b"), ("b", "c"), ("a", "d"), ("d", "e"), ("b", "e")],
            &[("b", "d"), ("c", "e")],
        )
        .unwrap(),
    ];
    // Seeded random mixed graphs with four or five observed nodes.
    let four = enumerate_mixed_graphs(&["a", "b", "c", "d"]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        graphs.push(four[rand::Rng::gen_range(&mut rng, 0..four.len())].clone());
    }

    let mut orders_checked = 0u64;
    let mut blanket_checked = 0u64;
    for (gi, g) in graphs.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(90_000 + gi as u64);
        let m = canonical_latent_model(g, &mut rng, 2, true);
        let obs = m.observable_kernel().unwrap();
        let observed: Vec<NodeId> = g.observed().into_iter().collect();
        for mask in 0..(1u32 << observed.len()) {
            let d: BTreeSet<NodeId> = observed
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, n)| n.clone())
                .collect();
            let orders = all_fixing_orders(g, &d);
            if orders.is_empty() {
                continue;
            }
            // Every valid order yields the identical kernel.
            let reference = apply_fixing_order(&obs, g, &orders[0]).unwrap();
            for order in &orders[1..] {
                let other = apply_fixing_order(&obs, g, order).unwrap();
                assert_eq!(reference, other, "graph {gi} D={d:?} order {order:?}");
                orders_checked += 1;
            }
            orders_checked += 1;
            // Along the first order, the conditioning form of fixing equals
            // the Markov-blanket division form, exactly.
            let mut kernel = obs.clone();
            let mut ctx = g.clone();
            for r in &orders[0] {
                let fixed = fix_kernel(&kernel, r, &ctx).unwrap();
                let divided = fix_kernel_division(&kernel, r, &ctx).unwrap();
                assert_eq!(fixed, divided, "graph {gi} fixing {r}");
                blanket_checked += 1;
                kernel = fixed;
                ctx = fix_graph(&ctx, r).unwrap();
            }
        }
    }
    println!(
        "criterion 4 (fixing confluence, blanket agreement): PASS — {} graphs, {orders_checked} orders compared, {blanket_checked} division-form agreements",
        graphs.len()
    );
}

#[test]
fn criterion_5_backdoor_failure_densities() {
    let started = Instant::now();
    let cfg = QuadratureCfg::default();
    let mut worst_l1: f64 = f64::INFINITY;
    for x_a in [0.1, 0.25, 0.5, 0.75, 1.0] {
        let rep = demo_backdoor_failure(x_a, &cfg).unwrap();
        assert!(
            (rep.interventional_integral - 1.0).abs() < 1e-6,
            "interventional density at {x_a}: {}",
            rep.interventional_integral
        );
        assert!(
            (rep.adjusted_integral - 1.0).abs() < 1e-6,
            "adjusted density at {x_a}: {}",
            rep.adjusted_integral
        );
        assert!(rep.l1_distance >= 0.05, "L1 gap at {x_a}: {}", rep.l1_distance);
        worst_l1 = worst_l1.min(rep.l1_distance);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 30, "runtime bound exceeded: {elapsed:?}");
    println!(
        "criterion 5 (adjustment failure densities): PASS — both densities normalize within 1e-6 at five treatment values, min L1 gap {worst_l1:.3} ≥ 0.05, {elapsed:?}"
    );
}

#[test]
fn criterion_6_no_pointwise_identification() {
    let rep = demo_no_pointwise(&QuadratureCfg::default()).unwrap();
    let rational = rep.cases.iter().find(|c| c.label == "1/2").unwrap();
    assert_eq!(rational.tv_distance, 1.0);
    let irrational = rep.cases.iter().find(|c| c.label == "√2/2").unwrap();
    assert_eq!(irrational.tv_distance, 0.0);
    println!(
        "criterion 6 (no pointwise identification): PASS — TV exactly 1 at the rational point, 0 at the irrational point"
    );
}

#[test]
fn criterion_7_positivity_not_necessary_continuous() {
    let rep = demo_positivity_not_necessary(&QuadratureCfg::default(), 42, 1_000_000).unwrap();
    assert!(
        rep.grid_max_diff < 1e-12,
        "grid difference {}",
        rep.grid_max_diff
    );
    assert!(
        rep.mc_sup_deviation < 0.05,
        "Monte Carlo deviation {}",
        rep.mc_sup_deviation
    );
    assert_eq!(rep.mass_far_outside, 0.0);
    println!(
        "criterion 7 (positivity not necessary, continuous): PASS — grid diff {:.1e}, MC sup-deviation {:.4} < 0.05 over {} bins, zero mass on [2,3]",
        rep.grid_max_diff, rep.mc_sup_deviation, rep.bins_used
    );
}

#[test]
fn criterion_8_shrinking_ball() {
    let cfg = QuadratureCfg::default();
    let mut summaries = Vec::new();
    for rho in [-0.5, 0.0, 0.5] {
        let rep = shrinking_ball_conditional(
            Joint2D::BivariateGaussian { rho },
            1.0,
            &[1e-1, 1e-2, 1e-3],
            &cfg,
        )
        .unwrap();
        let last = rep.entries.last().unwrap();
        assert!(
            last.error < 1e-3,
            "rho {rho}: error {} at delta {}",
            last.error,
            last.delta
        );
        // Decreasing within 10% slack; entries below the quadrature noise
        // floor (1e-6, three orders under the bound) are exempt.
        for w in rep.entries.windows(2) {
            assert!(
                w[1].error <= (w[0].error * 1.1).max(1e-6),
                "rho {rho}: sequence {:?}",
                rep.entries
            );
        }
        summaries.push(format!("ρ={rho}: {:.1e}", last.error));
    }
    println!(
        "criterion 8 (shrinking-ball conditioning): PASS — errors at δ=1e-3: {}",
        summaries.join(", ")
    );
}

#[test]
fn criterion_9_asymmetry_witness() {
    let m = asymmetry_model();
    let mut s = TransitionalSpace::new(m.observable_kernel().unwrap());
    s.declare_coords("A", &["a"]).unwrap();
    s.declare_coords("B", &["b"]).unwrap();
    s.declare_coords("Z", &["c", "I_a"]).unwrap();
    let forward = tci_check(&s, "A", "B", "Z").unwrap();
    assert!(forward.holds);
    assert!(forward.witness_q.is_some());
    let reverse = tci_check(&s, "B", "A", "Z").unwrap();
    assert!(!reverse.holds);
    let violation = reverse.violation.expect("violating triple reported");
    println!(
        "criterion 9 (independence is asymmetric): PASS — forward holds, reverse fails at z={} with contexts {:?} / {:?}",
        violation.z, violation.first, violation.second
    );
}
