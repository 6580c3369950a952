//! Seeded generators of mixed-type data with planted structure.
//!
//! Used by the test suites and the `synth` CLI command to produce datasets
//! whose generating process is known.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{ColumnSchema, Dataset, Schema, Value};
use crate::inference::rng_from_seed;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn dataset(columns: Vec<ColumnSchema>, rows: Vec<Vec<Value>>) -> Dataset {
    Dataset::new(Schema::new(columns).expect("generator schema is valid"), rows).expect("generator rows fit schema")
}

/// Five-node conditional linear-Gaussian network.
///
/// `C1 -> X1`, `C2 -> X2`, `X1 -> X2`, `X2 -> X3`, with `C1` uniform over three
/// labels and `C2` uniform over two.
pub fn five_node_clg(n: usize, seed: u64) -> (Dataset, Vec<(String, String)>) {
    let mut rng = rng_from_seed(seed);
    let c1_labels = ["a", "b", "c"];
    let c1_means = [-3.0, 0.0, 3.0];
    let c2_labels = ["u", "v"];
    let c2_means = [-2.5, 2.5];
    let rows = (0..n)
        .map(|_| {
            let c1 = rng.random_range(0..3);
            let c2 = rng.random_range(0..2);
            let x1 = c1_means[c1] + normal(&mut rng);
            let x2 = c2_means[c2] + 0.8 * x1 + normal(&mut rng);
            let x3 = 1.2 * x2 + normal(&mut rng);
            vec![
                Value::category(c1_labels[c1]),
                Value::category(c2_labels[c2]),
                Value::Number(x1),
                Value::Number(x2),
                Value::Number(x3),
            ]
        })
        .collect();
    let columns = vec![
        ColumnSchema::categorical("C1"),
        ColumnSchema::categorical("C2"),
        ColumnSchema::continuous("X1"),
        ColumnSchema::continuous("X2"),
        ColumnSchema::continuous("X3"),
    ];
    let edges = [("C1", "X1"), ("C2", "X2"), ("X1", "X2"), ("X2", "X3")]
        .iter()
        .map(|(p, c)| (p.to_string(), c.to_string()))
        .collect();
    (dataset(columns, rows), edges)
}

/// Two categorical roots and three continuous targets, each target a
/// per-combination mean plus Gaussian noise sized so the variance explained by
/// the categorical parents equals `r_squared`.
pub fn coupled_targets(n: usize, r_squared: f64, seed: u64) -> Dataset {
    assert!(r_squared > 0.0 && r_squared < 1.0, "r_squared must lie in (0, 1)");
    let mut rng = rng_from_seed(seed);
    let labels = ["p", "q", "r"];
    // per-target combination means over (C1, C2), each set with population variance 1
    let raw: [[f64; 9]; 3] = [
        [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0],
        [4.0, -4.0, 1.0, -1.0, 3.0, -3.0, 0.0, 2.0, -2.0],
        [0.0, 4.0, -4.0, 2.0, -2.0, 3.0, -3.0, 1.0, -1.0],
    ];
    let scale = (raw[0].iter().map(|m| m * m).sum::<f64>() / 9.0).sqrt();
    let noise_sd = ((1.0 - r_squared) / r_squared).sqrt();
    let rows = (0..n)
        .map(|_| {
            let a = rng.random_range(0..3);
            let b = rng.random_range(0..3);
            let mut row = vec![Value::category(labels[a]), Value::category(labels[b])];
            for means in &raw {
                row.push(Value::Number(means[a * 3 + b] / scale + noise_sd * normal(&mut rng)));
            }
            row
        })
        .collect();
    let columns = vec![
        ColumnSchema::categorical("C1"),
        ColumnSchema::categorical("C2"),
        ColumnSchema::continuous("Y1"),
        ColumnSchema::continuous("Y2"),
        ColumnSchema::continuous("Y3"),
    ];
    dataset(columns, rows)
}

/// Names, labels and scales of a clustered mixed-type dataset.
#[derive(Debug, Clone)]
pub struct ClusterLayout {
    pub categorical: Vec<(String, Vec<String>)>,
    /// (name, per-cluster means, latent loading, curvature, noise sd)
    pub continuous: Vec<(String, [f64; 3], f64, f64, f64)>,
    /// Probability a categorical cell takes its cluster's modal label.
    pub modal_probability: f64,
    /// Fraction of cells blanked at random.
    pub missing_rate: f64,
}

impl ClusterLayout {
    /// Six three-label categorical columns `K1..K6` and five continuous `Z1..Z5`.
    pub fn generic() -> Self {
        let labels = |prefix: &str| (0..3).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
        Self {
            categorical: (1..=6).map(|i| (format!("K{i}"), labels(&format!("k{i}_")))).collect(),
            continuous: vec![
                ("Z1".into(), [-2.0, 0.0, 2.0], 1.0, 0.4, 0.3),
                ("Z2".into(), [1.0, -1.5, 0.5], 0.8, -0.3, 0.3),
                ("Z3".into(), [0.0, 2.0, -2.0], -0.9, 0.3, 0.3),
                ("Z4".into(), [2.0, 1.0, -1.0], 0.7, 0.5, 0.3),
                ("Z5".into(), [-1.0, 2.5, 0.0], 1.1, -0.4, 0.3),
            ],
            modal_probability: 0.8,
            missing_rate: 0.0,
        }
    }

    /// The eleven reservoir parameters (six categorical, five continuous) on
    /// realistic scales, with a few blank cells.
    pub fn reservoir() -> Self {
        let cat = |name: &str, labels: &[&str]| (name.to_string(), labels.iter().map(|s| s.to_string()).collect());
        Self {
            categorical: vec![
                cat("Tectonic regime", &["Compression", "Extension", "Strike-slip"]),
                cat("Period", &["Cretaceous", "Jurassic", "Neogene"]),
                cat("Depositional system", &["Coastal", "Fluvial", "Carbonate shelf"]),
                cat("Lithology", &["Sandstone", "Limestone", "Dolomite"]),
                cat("Structural setting", &["Rift", "Foreland", "Passive margin"]),
                cat("Trapping mechanism", &["Anticline", "Tilted block", "Stratigraphic"]),
            ],
            continuous: vec![
                ("Gross".into(), [250.0, 600.0, 1100.0], 150.0, 40.0, 60.0),
                ("Netpay".into(), [60.0, 140.0, 260.0], 35.0, 8.0, 15.0),
                ("Porosity".into(), [12.0, 20.0, 26.0], 2.5, 0.8, 1.2),
                ("Permeability".into(), [150.0, 900.0, 2500.0], 350.0, 120.0, 200.0),
                ("Depth".into(), [3200.0, 2100.0, 1200.0], -400.0, 90.0, 150.0),
            ],
            modal_probability: 0.75,
            missing_rate: 0.03,
        }
    }

    pub fn schema(&self) -> Schema {
        let mut cols: Vec<ColumnSchema> = self
            .categorical
            .iter()
            .map(|(n, _)| ColumnSchema::categorical(n.clone()))
            .collect();
        cols.extend(self.continuous.iter().map(|(n, ..)| ColumnSchema::continuous(n.clone())));
        Schema::new(cols).expect("layout names are unique")
    }
}

/// Rows drawn from three equally likely clusters. Categorical cells take the
/// cluster's modal label (a different one per cluster) with the layout's
/// modal probability; continuous cells follow
/// `mean[cluster] + loading * z + curvature * (z^2 - 1) + noise` with a shared
/// per-row latent `z ~ N(0, 1)`.
pub fn clustered(n: usize, layout: &ClusterLayout, seed: u64) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let rows = (0..n)
        .map(|_| {
            let k = rng.random_range(0..3usize);
            let z = normal(&mut rng);
            let mut row = Vec::with_capacity(layout.categorical.len() + layout.continuous.len());
            for (j, (_, labels)) in layout.categorical.iter().enumerate() {
                let modal = (k + j) % labels.len();
                let pick = if rng.random::<f64>() < layout.modal_probability {
                    modal
                } else {
                    let other = rng.random_range(0..labels.len() - 1);
                    if other >= modal {
                        other + 1
                    } else {
                        other
                    }
                };
                row.push(Value::category(labels[pick].clone()));
            }
            for (_, means, loading, curvature, sd) in &layout.continuous {
                let x = means[k] + loading * z + curvature * (z * z - 1.0) + sd * normal(&mut rng);
                row.push(Value::Number(x));
            }
            if layout.missing_rate > 0.0 {
                for cell in row.iter_mut() {
                    if rng.random::<f64>() < layout.missing_rate {
                        *cell = Value::Missing;
                    }
                }
            }
            row
        })
        .collect();
    Dataset::new(layout.schema(), rows).expect("generator rows fit schema")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnKind;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(five_node_clg(50, 1).0, five_node_clg(50, 1).0);
        assert_ne!(five_node_clg(50, 1).0, five_node_clg(50, 2).0);
        assert_eq!(coupled_targets(20, 0.9, 3), coupled_targets(20, 0.9, 3));
        let l = ClusterLayout::generic();
        assert_eq!(clustered(30, &l, 4), clustered(30, &l, 4));
    }

    #[test]
    fn coupled_targets_explained_share() {
        let d = coupled_targets(20_000, 0.9, 8);
        // between-combination variance over total variance of Y1
        let mut groups: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
        for row in d.rows() {
            let key = (row[0].to_string(), row[1].to_string());
            groups.entry(key).or_default().push(row[2].as_number().unwrap());
        }
        let all = d.numbers(2);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        let total = all.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
        let within: f64 = groups
            .values()
            .map(|g| {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                g.iter().map(|y| (y - m).powi(2)).sum::<f64>()
            })
            .sum();
        let r2 = 1.0 - within / total;
        assert!((r2 - 0.9).abs() < 0.01, "{r2}");
    }

    #[test]
    fn reservoir_layout_has_eleven_parameters() {
        let d = clustered(100, &ClusterLayout::reservoir(), 0);
        assert_eq!(d.n_cols(), 11);
        assert_eq!(d.columns().iter().filter(|c| c.kind == ColumnKind::Categorical).count(), 6);
        assert!(d.rows().iter().flatten().any(Value::is_missing));
    }
}
