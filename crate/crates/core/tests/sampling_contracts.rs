use mixbn_core::inference::{forward_sample, restore, Evidence, Sampler};
use mixbn_core::model::{Cpt, Distribution, NodeModel};
use mixbn_core::synth::{clustered, five_node_clg, ClusterLayout};
use mixbn_core::{mixlearn, BayesianNetworkModel, ColumnKind, Dag, EdgeConstraints, LearnConfig, Value};
use proptest::prelude::*;

fn root_model(probs: &[f64]) -> BayesianNetworkModel {
    let states: Vec<String> = (0..probs.len()).map(|i| format!("s{i}")).collect();
    BayesianNetworkModel {
        dag: Dag::empty(["R"]).unwrap(),
        nodes: vec![NodeModel {
            name: "R".into(),
            kind: ColumnKind::Categorical,
            parents: vec![],
            distribution: Distribution::Cpt(Cpt {
                parents: vec![],
                states,
                table: [(vec![], probs.to_vec())].into_iter().collect(),
            }),
        }],
        bins: 5,
        alpha: 1.0,
        discretization: None,
    }
}

#[test]
fn root_frequencies_stay_in_binomial_envelope() {
    let probs = [0.5, 0.3, 0.15, 0.05];
    let m = 10_000;
    let model = root_model(&probs);
    let sampler = Sampler::new(&model).unwrap();
    let mut inside = 0;
    for seed in 0..20 {
        let s = sampler.forward_sample(&Evidence::new(), m, seed).unwrap();
        let ok = probs.iter().enumerate().all(|(k, &p)| {
            let label = format!("s{k}");
            let freq = s.samples.iter().filter(|r| r[0].as_category() == Some(label.as_str())).count() as f64 / m as f64;
            (freq - p).abs() <= 4.0 * (p * (1.0 - p) / m as f64).sqrt()
        });
        inside += usize::from(ok);
    }
    assert!(inside >= 19, "{inside}/20 seeds inside the envelope");
}

#[test]
fn restored_leaf_matches_component_prediction() {
    let (d, _) = five_node_clg(3000, 2);
    let model = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
    let x3 = model.node("X3").unwrap();
    let Distribution::LinearGaussian(lg) = &x3.distribution else {
        panic!("X3 should be a linear-Gaussian leaf: {:?}", x3.distribution.type_name());
    };
    let mut record = d.row(0).to_vec();
    record[4] = Value::Missing;
    let want = lg
        .conditional_mean(|p| d.column_index(p).ok().and_then(|j| record[j].as_number()))
        .unwrap();
    let got = restore(&model, &record, 2000, 5).unwrap()[4].as_number().unwrap();
    let se = (lg.residual_variance / 2000.0).sqrt();
    assert!((got - want).abs() <= 3.0 * se, "{got} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn full_evidence_clamps_exactly(row in 0usize..200, seed in any::<u64>()) {
        let d = clustered(200, &ClusterLayout::generic(), 3);
        let model = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
        let ev = Evidence::from_record(&model, d.row(row)).unwrap();
        let s = forward_sample(&model, &ev, 25, seed).unwrap();
        for sample in &s.samples {
            prop_assert_eq!(sample.as_slice(), d.row(row));
        }
    }

    #[test]
    fn restore_changes_only_gaps(row in 0usize..200, mask in proptest::collection::vec(any::<bool>(), 11), seed in any::<u64>()) {
        let d = clustered(200, &ClusterLayout::generic(), 4);
        let model = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
        let mut record = d.row(row).to_vec();
        for (v, &blank) in record.iter_mut().zip(&mask) {
            if blank {
                *v = Value::Missing;
            }
        }
        prop_assume!(record.iter().any(Value::is_missing));
        let out = restore(&model, &record, 20, seed).unwrap();
        prop_assert_eq!(&out, &restore(&model, &record, 20, seed).unwrap());
        for (a, b) in record.iter().zip(&out) {
            prop_assert!(!b.is_missing());
            if !a.is_missing() {
                prop_assert_eq!(a, b);
            }
        }
    }
}
