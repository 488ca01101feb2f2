#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use morphforge_core::synth::{write_dataset, DatasetOptions};

/// Runs the CLI in process.
pub fn run(args: &[&str]) -> i32 {
    morphforge_cli::run(std::iter::once("morphforge").chain(args.iter().copied()))
}

pub fn exe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphforge"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes the synthetic dataset and a seeded protocol under `root`.
pub fn dataset(root: &Path, opts: &DatasetOptions, seed: u64) -> (PathBuf, PathBuf) {
    let manifest = write_dataset(&root.join("data"), opts).expect("dataset");
    let pairs = root.join("protocol.json");
    let code = run(&[
        "protocol",
        "--manifest",
        s(&manifest),
        "--seed",
        &seed.to_string(),
        "--out",
        s(&pairs),
    ]);
    assert_eq!(code, 0, "protocol failed");
    (manifest, pairs)
}

/// Relative path to file bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("under root")
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
