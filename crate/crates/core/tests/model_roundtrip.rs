use mixbn_core::synth::{clustered, coupled_targets, five_node_clg, ClusterLayout};
use mixbn_core::{mixlearn, BayesianNetworkModel, EdgeConstraints, LearnConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn serialize_parse_serialize_is_stable(seed in any::<u64>(), kind in 0..3u8, n in 30usize..200) {
        let d = match kind {
            0 => five_node_clg(n, seed).0,
            1 => coupled_targets(n, 0.7, seed),
            _ => clustered(n, &ClusterLayout::reservoir(), seed),
        };
        let m = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
        let text = m.to_json().unwrap();
        let back = BayesianNetworkModel::from_json(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let (d, _) = five_node_clg(120, 1);
    let m = mixlearn(&d, &EdgeConstraints::none(), &LearnConfig::default()).unwrap();
    m.save(&path).unwrap();
    let bytes = std::fs::read_to_string(&path).unwrap();
    BayesianNetworkModel::load(&path).unwrap().save(&path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), bytes);
}
