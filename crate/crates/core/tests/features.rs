use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crosspkg::features::gl4::gl4_entropy;
use crosspkg::features::{
    entropy_stats, extract_features, gl4_encode, homogeneity_counts, shannon_entropy, FeatureSchema,
    SensitiveDictionary,
};
use crosspkg::ingest::{open_archive, PackageArtifact, PackageFile};
use crosspkg::Ecosystem;
use proptest::prelude::*;

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

/// Entropy in bits from symbol frequencies, written against the class rules directly.
fn oracle_entropy(s: &str) -> f64 {
    let mut freq: HashMap<char, f64> = HashMap::new();
    for c in s.chars() {
        let class = match c {
            'a'..='z' => 'L',
            'A'..='Z' => 'U',
            '0'..='9' => 'D',
            _ => 'S',
        };
        *freq.entry(class).or_default() += 1.0;
    }
    let n: f64 = freq.values().sum();
    if n == 0.0 {
        return 0.0;
    }
    freq.values().map(|&c| -(c / n) * (c / n).ln() / 2f64.ln()).sum::<f64>().abs()
}

fn oracle_mean(v: &[f64]) -> f64 {
    if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 }
}

fn oracle_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = oracle_mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn oracle_q3(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = 0.75 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

fn oracle_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + b.abs())
}

proptest! {
    #[test]
    fn gl4_alphabet_and_length(s in "\\PC{0,80}") {
        let g = gl4_encode(&s);
        prop_assert_eq!(g.chars().count(), s.chars().count());
        prop_assert!(g.chars().all(|c| "LUDS".contains(c)));
    }

    #[test]
    fn gl4_entropy_matches_oracle(s in "\\PC{0,80}") {
        let h = gl4_entropy(&s);
        prop_assert!(h.is_finite() && (0.0..=2.0 + 1e-12).contains(&h));
        prop_assert!(close(h, oracle_entropy(&s)), "{h} vs {}", oracle_entropy(&s));
        prop_assert!(close(h, shannon_entropy(&gl4_encode(&s))));
    }

    #[test]
    fn homogeneity_partitions(items in proptest::collection::vec("[a-zA-Z0-9_$.]{0,12}", 0..40)) {
        let (hom, het) = homogeneity_counts(&items);
        prop_assert_eq!(hom + het, items.len());
        let expected = items.iter().filter(|s| gl4_encode(s).chars().collect::<std::collections::BTreeSet<_>>().len() <= 1).count();
        prop_assert_eq!(hom, expected);
    }

    #[test]
    fn entropy_stats_match_oracle(items in proptest::collection::vec("\\PC{0,20}", 0..30)) {
        let st = entropy_stats(&items);
        let es: Vec<f64> = items.iter().map(|s| oracle_entropy(s)).collect();
        prop_assert!(close(st.mean, oracle_mean(&es)));
        prop_assert!(close(st.std, oracle_std(&es)));
        prop_assert!(close(st.q3, oracle_q3(&es)));
        prop_assert!(close(st.max, oracle_max(&es)));
    }
}

fn source_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(
        prop_oneof![
            "[a-z]{1,8}",
            "\"[A-Za-z0-9+/=:._-]{0,30}\"",
            Just("\"https://x.example/a\"".to_string()),
            Just("\"10.0.0.1\"".to_string()),
            Just(" = ".to_string()),
            Just(" + ".to_string()),
            Just("[0]".to_string()),
            Just("\n".to_string()),
            Just(" ".to_string()),
        ],
        0..40,
    )
    .prop_map(|parts| parts.concat())
}

fn artifact_strategy() -> impl Strategy<Value = PackageArtifact> {
    (
        any::<bool>(),
        proptest::collection::btree_map("[a-z]{1,6}\\.(js|py|md|json|txt|sh)", source_text(), 0..5),
        proptest::option::of(source_text()),
    )
        .prop_map(|(npm, files, install)| {
            let eco = if npm { Ecosystem::Npm } else { Ecosystem::Pypi };
            let mut out: Vec<PackageFile> =
                files.into_iter().map(|(p, c)| PackageFile::new(format!("pkg/{p}"), c.into_bytes())).collect();
            if let Some(text) = install {
                let (name, body) = if npm {
                    ("pkg/package.json", format!("{{\"name\":\"p\",\"scripts\":{{\"postinstall\":{}}}}}", serde_json::to_string(&text).unwrap()))
                } else {
                    ("pkg/setup.py", text)
                };
                out.push(PackageFile::new(name, body.into_bytes()));
            }
            PackageArtifact::new(eco, "p", "1.0.0", out)
        })
}

fn doubled(a: &PackageArtifact) -> PackageArtifact {
    let mut files = a.files.clone();
    files.extend(a.files.iter().map(|f| PackageFile::new(format!("copy/{}", f.rel_path), f.content.clone())));
    PackageArtifact::new(a.ecosystem, a.name.clone(), a.version.clone(), files)
}

const COUNTS: &[&str] = &[
    "install_words",
    "install_lines",
    "source_words",
    "source_lines",
    "num_urls",
    "num_ips",
    "num_suspicious_tokens",
    "num_base64_strings",
    "src_string_homogeneous",
    "src_string_heterogeneous",
    "src_identifier_homogeneous",
    "src_identifier_heterogeneous",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extraction_is_total_and_deterministic(a in artifact_strategy()) {
        let schema = FeatureSchema::default();
        let dict = SensitiveDictionary::default_seed();
        let v = extract_features(&a, &schema, &dict);
        prop_assert_eq!(v.values.len(), schema.len());
        prop_assert!(v.values.iter().all(|x| x.is_finite() && *x >= 0.0));
        prop_assert_eq!(&v, &extract_features(&a, &schema, &dict));
        prop_assert_eq!(v.schema_hash.clone(), schema.hash());
    }

    #[test]
    fn duplicating_files_scales_counts_only(a in artifact_strategy()) {
        let schema = FeatureSchema::default();
        let dict = SensitiveDictionary::default_seed();
        let one = extract_features(&a, &schema, &dict);
        let two = extract_features(&doubled(&a), &schema, &dict);
        let get = |v: &crosspkg::features::FeatureVector, n: &str| v.get(&schema, n).unwrap();
        for n in COUNTS {
            prop_assert_eq!(get(&two, n), 2.0 * get(&one, n), "{}", n);
        }
        for e in &schema.extension_list {
            let n = format!("ext_{e}");
            prop_assert_eq!(get(&two, &n), 2.0 * get(&one, &n), "{}", n);
        }
        prop_assert_eq!(get(&two, "has_install_hook"), get(&one, "has_install_hook"));
        for block in [
            "src_string_entropy", "src_identifier_entropy", "install_string_entropy",
            "install_identifier_entropy", "ratio_square_brackets", "ratio_equals", "ratio_plus",
        ] {
            for stat in ["mean", "std", "max"] {
                let n = format!("{block}_{stat}");
                prop_assert!(close(get(&two, &n), get(&one, &n)), "{}: {} vs {}", n, get(&two, &n), get(&one, &n));
            }
        }
    }
}

#[test]
fn duplication_can_move_q3() {
    let once = ["a", "aB", "aB1-"];
    let twice: Vec<&str> = once.iter().chain(once.iter()).copied().collect();
    let (a, b) = (entropy_stats(&once), entropy_stats(&twice));
    assert!(close(a.mean, b.mean) && close(a.max, b.max) && close(a.std, b.std));
    assert!(!close(a.q3, b.q3), "{} vs {}", a.q3, b.q3);
}

fn fixture_dict() -> SensitiveDictionary {
    SensitiveDictionary::load(&golden("keywords.txt")).unwrap()
}

fn check_block(v: &[f64], schema: &FeatureSchema, block: &str, entropies: &[f64]) {
    let want = [oracle_mean(entropies), oracle_std(entropies), oracle_q3(entropies), oracle_max(entropies)];
    for (stat, w) in ["mean", "std", "q3", "max"].iter().zip(want) {
        let n = format!("{block}_{stat}");
        let got = v[schema.index_of(&n).unwrap()];
        assert!(close(got, w), "{n}: {got} vs {w}");
    }
}

fn check_exact(v: &[f64], schema: &FeatureSchema, expect: &[(&str, f64)]) {
    for (n, w) in expect {
        assert_eq!(v[schema.index_of(n).unwrap()], *w, "{n}");
    }
}

#[test]
fn golden_npm_vector() {
    let schema = FeatureSchema::default();
    let art = open_archive(&golden("evil-pkg-1.0.0.tgz"), Ecosystem::Npm).unwrap();
    let v = extract_features(&art, &schema, &fixture_dict()).values;
    check_exact(&v, &schema, &[
        ("has_install_hook", 1.0),
        ("install_words", 2.0),
        ("install_lines", 1.0),
        ("source_words", 7.0),
        ("source_lines", 2.0),
        ("num_urls", 1.0),
        ("num_ips", 0.0),
        ("num_suspicious_tokens", 1.0),
        ("num_base64_strings", 1.0),
        ("src_string_homogeneous", 0.0),
        ("src_string_heterogeneous", 2.0),
        ("src_identifier_homogeneous", 4.0),
        ("src_identifier_heterogeneous", 0.0),
        ("ext_js", 1.0),
        ("ext_json", 1.0),
        ("ext_py", 0.0),
    ]);
    let src_strings = ["aW1wb3J0IG9zO29zLnN5c3RlbQ==", "https://evil.example/c?d="];
    check_block(&v, &schema, "src_string_entropy", &src_strings.map(oracle_entropy));
    check_block(&v, &schema, "src_identifier_entropy", &[0.0; 4]);
    let inst = ["name", "evil-pkg", "scripts", "preinstall", "node i.js"];
    check_block(&v, &schema, "install_string_entropy", &inst.map(oracle_entropy));
    check_block(&v, &schema, "install_identifier_entropy", &[]);
    check_block(&v, &schema, "ratio_square_brackets", &[0.0]);
    check_block(&v, &schema, "ratio_equals", &[4.0 / 82.0]);
    check_block(&v, &schema, "ratio_plus", &[1.0 / 82.0]);
    let nonzero_ext = schema.extension_list.iter().filter(|e| v[schema.index_of(&format!("ext_{e}")).unwrap()] != 0.0).count();
    assert_eq!(nonzero_ext, 2);
}

#[test]
fn golden_pypi_vector() {
    let schema = FeatureSchema::default();
    let art = open_archive(&golden("tidy-1.2.0.tar.gz"), Ecosystem::Pypi).unwrap();
    let v = extract_features(&art, &schema, &fixture_dict()).values;
    check_exact(&v, &schema, &[
        ("has_install_hook", 0.0),
        ("install_words", 0.0),
        ("install_lines", 0.0),
        ("source_words", 13.0),
        ("source_lines", 6.0),
        ("num_urls", 0.0),
        ("num_ips", 0.0),
        ("num_suspicious_tokens", 0.0),
        ("num_base64_strings", 0.0),
        ("src_string_homogeneous", 1.0),
        ("src_string_heterogeneous", 1.0),
        ("src_identifier_homogeneous", 9.0),
        ("src_identifier_heterogeneous", 0.0),
        ("ext_py", 1.0),
        ("ext_toml", 1.0),
        ("ext_md", 1.0),
        ("ext_js", 0.0),
    ]);
    check_block(&v, &schema, "src_string_entropy", &["tidy", "1.2.0"].map(oracle_entropy));
    check_block(&v, &schema, "src_identifier_entropy", &[0.0; 9]);
    check_block(&v, &schema, "install_string_entropy", &[]);
    check_block(&v, &schema, "ratio_square_brackets", &[0.0]);
    check_block(&v, &schema, "ratio_equals", &[2.0 / 66.0]);
    check_block(&v, &schema, "ratio_plus", &[1.0 / 66.0]);
}
