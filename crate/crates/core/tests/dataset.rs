use crosspkg::dataset::{assemble, dedup_malicious, dedup_malicious_traced, merge_cross, LabeledSample};
use crosspkg::features::{FeatureSchema, FeatureVector};
use crosspkg::models::Label;
use crosspkg::Ecosystem;
use proptest::prelude::*;

fn sample(schema: &FeatureSchema, eco: Ecosystem, name: &str, version: &str, label: Label, marker: f64, campaign: Option<&str>) -> LabeledSample {
    let mut vector = FeatureVector::zeros(schema);
    vector.values[0] = marker;
    LabeledSample {
        vector,
        label,
        ecosystem: eco,
        name: name.into(),
        version: version.into(),
        campaign_id: campaign.map(str::to_string),
    }
}

fn malicious_set() -> impl Strategy<Value = Vec<LabeledSample>> {
    proptest::collection::btree_map(
        (any::<bool>(), "[a-e]", "[0-2]\\.[0-9]{1,2}\\.[0-9]"),
        (0u8..4, proptest::option::of("c[1-3]")),
        0..25,
    )
    .prop_map(|m| {
        let schema = FeatureSchema::default();
        m.into_iter()
            .map(|((npm, name, ver), (marker, camp))| {
                let eco = if npm { Ecosystem::Npm } else { Ecosystem::Pypi };
                sample(&schema, eco, &name, &ver, Label::Malicious, f64::from(marker), camp.as_deref())
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn dedup_is_idempotent(set in malicious_set()) {
        let once = dedup_malicious(&set);
        prop_assert_eq!(dedup_malicious(&once), once.clone());
        let (_, c) = dedup_malicious_traced(&set);
        prop_assert!(c.input >= c.latest_version && c.latest_version >= c.campaign && c.campaign >= c.identical_vectors);
        prop_assert_eq!(c.identical_vectors, once.len());
        for s in &once {
            prop_assert!(set.contains(s));
        }
    }

    #[test]
    fn dedup_ignores_input_order(mut set in malicious_set(), rot in 0usize..25) {
        let a = dedup_malicious(&set);
        if !set.is_empty() {
            let r = rot % set.len();
            set.rotate_left(r);
        }
        let b = dedup_malicious(&set);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn assemble_keeps_every_malicious_sample(n_mal in 1usize..40, extra in 0usize..30, ratio in 0.5f64..0.95, seed in any::<u64>()) {
        let schema = FeatureSchema::default();
        let mal: Vec<_> = (0..n_mal).map(|i| sample(&schema, Ecosystem::Npm, &format!("m{i}"), "1.0.0", Label::Malicious, 1.0, None)).collect();
        let needed = (n_mal as f64 * ratio / (1.0 - ratio)).round() as usize;
        let mut ben: Vec<_> = (0..needed + extra).map(|i| sample(&schema, Ecosystem::Npm, &format!("b{i:04}"), "1.0.0", Label::Benign, 0.0, None)).collect();
        let ds = assemble(&schema, &ben, &mal, ratio).unwrap();
        prop_assert_eq!(ds.n_malicious(), n_mal);
        prop_assert_eq!(ds.n_benign(), needed);
        let r = seed as usize % ben.len().max(1);
        ben.rotate_left(r);
        let again = assemble(&schema, &ben, &mal, ratio).unwrap();
        prop_assert_eq!(ds.samples, again.samples);
    }
}

fn corpus(schema: &FeatureSchema, eco: Ecosystem, n_mal: usize, n_ben: usize) -> (Vec<LabeledSample>, Vec<LabeledSample>) {
    let mal = (0..n_mal).map(|i| sample(schema, eco, &format!("m{i}"), "1.0.0", Label::Malicious, 1.0, None)).collect();
    let ben = (0..n_ben).map(|i| sample(schema, eco, &format!("b{i}"), "1.0.0", Label::Benign, 0.0, None)).collect();
    (mal, ben)
}

#[test]
fn composition_table_counts() {
    let schema = FeatureSchema::default();
    let (m_js, b_js) = corpus(&schema, Ecosystem::Npm, 102, 2000);
    let (m_py, b_py) = corpus(&schema, Ecosystem::Pypi, 92, 2000);
    let js = assemble(&schema, &b_js, &m_js, 0.9).unwrap();
    let py = assemble(&schema, &b_py, &m_py, 0.9).unwrap();
    assert_eq!((js.n_malicious(), js.n_benign()), (102, 918));
    assert_eq!((py.n_malicious(), py.n_benign()), (92, 828));
    let both = merge_cross(&js, &py).unwrap();
    assert_eq!((both.n_malicious(), both.n_benign()), (194, 1746));
    assert_eq!(both.filter_ecosystem(Ecosystem::Pypi).len(), 920);
}

#[test]
fn too_few_benign_is_an_error() {
    let schema = FeatureSchema::default();
    let (m, b) = corpus(&schema, Ecosystem::Npm, 10, 50);
    assert!(assemble(&schema, &b, &m, 0.9).is_err());
}

#[test]
fn merge_rejects_duplicate_keys() {
    let schema = FeatureSchema::default();
    let (m, b) = corpus(&schema, Ecosystem::Npm, 5, 45);
    let a = assemble(&schema, &b, &m, 0.9).unwrap();
    assert!(merge_cross(&a, &a).is_err());
}
