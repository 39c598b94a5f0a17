#![allow(dead_code)]

pub mod oracles;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crosspkg::features::{FeatureSchema, SensitiveDictionary};
use crosspkg::models::{train, GbtParams, Hyperparams, TreeEnsembleModel};
use crosspkg::synth::synthetic_dataset;
use crosspkg::Ecosystem;

/// GBT trained on a seeded synthetic corpus of one ecosystem.
pub fn trained_gbt(eco: Ecosystem, seed: u64) -> TreeEnsembleModel {
    let schema = FeatureSchema::default();
    let dict = SensitiveDictionary::default_seed();
    let ds = synthetic_dataset(eco, 450, 50, seed, &schema, &dict);
    let xs: Vec<_> = ds.samples.iter().map(|s| s.vector.clone()).collect();
    train(&schema, &xs, &ds.labels(), &Hyperparams::Gbt(GbtParams::default()), seed).unwrap()
}

pub struct Canned {
    pub path: &'static str,
    pub status: u16,
    pub body: Vec<u8>,
    /// Overrides the Content-Length header.
    pub declared_len: Option<u64>,
}

/// One-thread HTTP/1.1 server answering canned responses; unknown paths get 404.
/// Returns the base URL and a hit counter.
pub fn serve(routes: Vec<Canned>) -> (String, Arc<AtomicUsize>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let h = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            h.fetch_add(1, Ordering::SeqCst);
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut l = String::new();
                if reader.read_line(&mut l).unwrap_or(0) == 0 || l == "\r\n" {
                    break;
                }
            }
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
            let path = path.split('?').next().unwrap().to_string();
            let (status, body, declared) = match routes.iter().find(|r| r.path == path) {
                Some(r) => (r.status, r.body.clone(), r.declared_len),
                None => (404, b"not found".to_vec(), None),
            };
            let len = declared.unwrap_or(body.len() as u64);
            let head = format!("HTTP/1.1 {status} X\r\nContent-Length: {len}\r\nConnection: close\r\n\r\n");
            let _ = stream.write_all(head.as_bytes());
            if declared.is_none() {
                let _ = stream.write_all(&body);
            }
        }
    });
    (base, hits)
}
