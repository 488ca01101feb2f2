mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use morphforge_cli::{emit_plots, MorphIndex, PlotData, RunRecord};
use morphforge_core::fsio;
use morphforge_core::imaging::decode_png;
use morphforge_core::protocol::{load_manifest, Split};
use morphforge_core::reference::PublishedContext;
use morphforge_core::synth::DatasetOptions;
use morphforge_core::vuln::{Aggregation, VulnReport};
use morphforge_core::SplitProtocol;

use common::{dataset, exe, run, s, tree};

fn small() -> DatasetOptions {
    DatasetOptions {
        identities: 16,
        size: 32,
        ..DatasetOptions::default()
    }
}

fn stderr(out: &std::process::Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = exe(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn unknown_flag_and_missing_subcommand_exit_one() {
    assert_eq!(exe(&["protocol", "--bogus"]).status.code(), Some(1));
    assert_eq!(exe(&[]).status.code(), Some(1));
    assert_eq!(exe(&["--help"]).status.code(), Some(0));
    assert_eq!(exe(&["--version"]).status.code(), Some(0));
}

#[test]
fn protocol_output_satisfies_split_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 7);
    let m = load_manifest(&manifest).unwrap();
    let p = SplitProtocol::load(&pairs).unwrap();
    p.validate(Some(&m)).unwrap();
    assert_eq!(p.train.len() + p.test.len(), 16);
    assert!(p.train.is_disjoint(&p.test));

    let record = RunRecord::from_json(&fs::read(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(record.subcommand, "protocol");
    assert_eq!(record.seed, Some(7));
    let digest = fsio::file_digest(&manifest).unwrap();
    assert!(record
        .inputs
        .iter()
        .any(|d| d.sha256 == digest && d.path.ends_with("manifest.json")));
    assert!(record
        .outputs
        .iter()
        .any(|d| d.sha256 == fsio::file_digest(&pairs).unwrap()));
    assert_eq!(record.config["protocol"]["seed"], 7);
}

#[test]
fn protocol_count_check_reports_deltas() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = dataset(dir.path(), &small(), 1);
    let expected = dir.path().join("expected.json");
    fs::write(&expected, r#"{"train_pairs": 12, "test_pairs": 4}"#).unwrap();
    let out = dir.path().join("p.json");
    let code = run(&[
        "protocol",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out),
        "--check-counts",
        s(&expected),
    ]);
    assert_eq!(code, 0);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("p.counts.json")).unwrap()).unwrap();
    let p = SplitProtocol::load(&out).unwrap();
    let train = p.pairs_in(Split::Train).count() as i64;
    assert_eq!(report["rows"][0]["delta"], train - 12);
    assert_eq!(
        report["pass"],
        train == 12 && p.pairs_in(Split::Test).count() == 4
    );
}

#[test]
fn validation_and_runtime_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 2);
    let lm = dir.path().join("data/landmarks");
    let base = [
        "--pairs",
        s(&pairs),
        "--manifest",
        s(&manifest),
        "--landmarks",
        s(&lm),
    ];
    let out = dir.path().join("m");

    let mut args = vec![
        "morph",
        "--method",
        "lma",
        "--alpha",
        "1.5",
        "--out",
        s(&out),
    ];
    args.extend(base);
    assert_eq!(run(&args), 1, "alpha outside [0, 1]");

    let missing = dir.path().join("nope.json");
    assert_eq!(
        run(&["protocol", "--manifest", s(&missing), "--out", s(&out)]),
        2,
        "unreadable input"
    );

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"identities\": 3}").unwrap();
    assert_eq!(
        run(&["protocol", "--manifest", s(&bad), "--out", s(&out)]),
        1,
        "malformed manifest"
    );

    let mut args = vec![
        "morph",
        "--method",
        "regen",
        "--backend",
        "external",
        "--out",
        s(&out),
    ];
    args.extend(base);
    assert_eq!(run(&args), 1, "external backend without a command");
}

#[test]
fn lma_morphs_of_the_eight_pair_test_split_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(
        dir.path(),
        &DatasetOptions {
            identities: 32,
            ..small()
        },
        7,
    );
    let lm = dir.path().join("data/landmarks");
    let protocol = SplitProtocol::load(&pairs).unwrap();
    assert_eq!(protocol.pairs_in(Split::Test).count(), 8);

    let mut digests = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let code = run(&[
            "morph",
            "--method",
            "lma",
            "--split",
            "test",
            "--pairs",
            s(&pairs),
            "--manifest",
            s(&manifest),
            "--landmarks",
            s(&lm),
            "--out",
            s(&out),
        ]);
        assert_eq!(code, 0);
        let index = MorphIndex::from_json(&fs::read(out.join("morphs.json")).unwrap()).unwrap();
        assert_eq!(index.morphs.len(), 8);
        let pngs: BTreeMap<String, Vec<u8>> = tree(&out)
            .into_iter()
            .filter(|(k, _)| k.ends_with(".png"))
            .collect();
        assert_eq!(pngs.len(), 8);
        for e in &index.morphs {
            assert!(
                e.file.ends_with("_lma.png")
                    && e.file.starts_with(&format!("{}_{}", e.a_id, e.b_id))
            );
            assert_eq!(fsio::sha256_hex(&pngs[&e.file]), e.sha256);
            assert_eq!(decode_png(&pngs[&e.file]).unwrap().size(), (32, 32));
        }
        digests.push(pngs);
    }
    assert_eq!(digests[0], digests[1]);
}

fn vuln_report(attack: &str, points: usize) -> VulnReport {
    VulnReport {
        attack: attack.into(),
        backend: "toy-pixels".into(),
        tau: 0.5,
        target_fmr: 0.001,
        achieved_fmr: 0.0,
        aggregation: Aggregation::Max,
        morphs: points,
        mmpmr: 50.0,
        fmmpmr: 25.0,
        scatter: (0..points)
            .map(|i| [0.1 * i as f64, 0.9 - 0.1 * i as f64])
            .collect(),
        morph_ids: (0..points).map(|i| format!("m{i}")).collect(),
        seed: 3,
        published_context: PublishedContext::new(),
    }
}

fn write_report(dir: &Path, r: &VulnReport) -> std::path::PathBuf {
    let path = dir.join(format!("vuln_{}.json", r.attack));
    fsio::write_json_atomic(&path, r).unwrap();
    path
}

#[test]
fn scatter_plot_data_has_rows_and_threshold_lines() {
    let dir = tempfile::tempdir().unwrap();
    let report = write_report(dir.path(), &vuln_report("lma", 3));
    let out = dir.path().join("plots");
    let data = emit_plots(&[report], &out).unwrap();
    assert_eq!(data.plots.len(), 1);
    let plot = &data.plots[0];
    assert_eq!(plot.rows, 3);
    assert_eq!(plot.lines.len(), 2);
    assert!(plot.lines.iter().all(|l| l.value == 0.5));
    let csv = fs::read_to_string(out.join(&plot.file)).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(
        csv.lines().next().unwrap(),
        "morph_id,subject1_score,subject2_score"
    );
    let back: PlotData =
        serde_json::from_slice(&fs::read(out.join("plots.json")).unwrap()).unwrap();
    assert_eq!(back, data);
}

#[test]
fn two_attack_types_give_two_named_scatter_files() {
    let dir = tempfile::tempdir().unwrap();
    let reports = [
        write_report(dir.path(), &vuln_report("lma", 2)),
        write_report(dir.path(), &vuln_report("regen", 4)),
    ];
    let out = dir.path().join("plots");
    let data = emit_plots(&reports, &out).unwrap();
    let files: Vec<&str> = data.plots.iter().map(|p| p.file.as_str()).collect();
    assert_eq!(
        files,
        ["scatter_lma_toy-pixels.csv", "scatter_regen_toy-pixels.csv"]
    );
    assert!(files.iter().all(|f| out.join(f).exists()));
}

#[test]
fn plot_emission_is_byte_stable_and_rejects_missing_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = write_report(dir.path(), &vuln_report("lma", 5));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    emit_plots(std::slice::from_ref(&report), &a).unwrap();
    emit_plots(std::slice::from_ref(&report), &b).unwrap();
    assert_eq!(tree(&a), tree(&b));

    let missing = dir.path().join("missing.json");
    assert!(emit_plots(std::slice::from_ref(&missing), &a).is_err());
    assert_eq!(
        run(&["report", "--reports", s(&missing), "--out", s(&a)]),
        2
    );
    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{\"x\": 1}").unwrap();
    assert_eq!(run(&["report", "--reports", s(&junk), "--out", s(&a)]), 1);
}

#[test]
fn tampered_morph_is_rejected_by_vuln() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 4);
    let lm = dir.path().join("data/landmarks");
    let morphs = dir.path().join("lma");
    let data = ["--pairs", s(&pairs), "--manifest", s(&manifest)];
    let mut args = vec![
        "morph",
        "--method",
        "lma",
        "--landmarks",
        s(&lm),
        "--out",
        s(&morphs),
    ];
    args.extend(data);
    assert_eq!(run(&args), 0);

    let out = dir.path().join("vuln");
    let mut args = vec![
        "vuln",
        "--aggregation",
        "mean",
        "--target-fmr",
        "0.01",
        "--morphs",
        s(&morphs),
        "--out",
        s(&out),
    ];
    args.extend(data);
    assert_eq!(run(&args), 0);
    let report =
        VulnReport::from_json(&fs::read(out.join("vuln_lma_toy-pixels.json")).unwrap()).unwrap();
    assert_eq!(report.aggregation, Aggregation::Mean);
    assert!(report.achieved_fmr <= 0.01);

    let index = MorphIndex::from_json(&fs::read(morphs.join("morphs.json")).unwrap()).unwrap();
    let entry = index.in_split(Split::Test).next().unwrap();
    let victim = morphs.join(&entry.file);
    let mut bytes = fs::read(&victim).unwrap();
    let n = bytes.len();
    bytes[n - 20] ^= 0xff;
    fs::write(&victim, bytes).unwrap();
    assert_eq!(run(&args), 1);
}

#[test]
fn mad_eval_rejects_malformed_model_specs() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 5);
    let out = dir.path().join("mad");
    let code = run(&[
        "mad-eval",
        "--model",
        "no-equals-sign",
        "--morphs",
        s(&out),
        "--manifest",
        s(&manifest),
        "--pairs",
        s(&pairs),
        "--out",
        s(&out),
    ]);
    assert_eq!(code, 1);
}

#[test]
fn mad_train_and_eval_write_reports_for_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 6);
    let lm = dir.path().join("data/landmarks");
    let data = ["--pairs", s(&pairs), "--manifest", s(&manifest)];
    let morphs = dir.path().join("lma");
    let mut args = vec![
        "morph",
        "--method",
        "lma",
        "--landmarks",
        s(&lm),
        "--out",
        s(&morphs),
    ];
    args.extend(data);
    assert_eq!(run(&args), 0);

    let model = dir.path().join("models/lma.json");
    let mut args = vec![
        "mad-train",
        "--morphs",
        s(&morphs),
        "--colors",
        "rgb,hsv",
        "--levels",
        "2",
        "--radii",
        "1",
        "--out",
        s(&model),
    ];
    args.extend(data);
    assert_eq!(run(&args), 0);
    assert!(dir.path().join("models/run.json").exists());

    let out = dir.path().join("mad");
    let spec = format!("lma={}", s(&model));
    let mut args = vec![
        "mad-eval",
        "--seed",
        "9",
        "--model",
        &spec,
        "--morphs",
        s(&morphs),
        "--out",
        s(&out),
    ];
    args.extend(data);
    assert_eq!(run(&args), 0);
    let report = morphforge_core::mad::MadReport::from_json(
        &fs::read(out.join("mad_lma_on_lma.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.seed, 9);
    let scores = morphforge_core::mad::scores_from_csv(
        &fs::read(out.join("mad_scores_lma_on_lma.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(scores.len(), report.attack_count + report.bonafide_count);

    let mut bad = vec![
        "mad-train",
        "--morphs",
        s(&morphs),
        "--colors",
        "cmyk",
        "--out",
        s(&model),
    ];
    bad.extend(data);
    assert_eq!(run(&bad), 1);
}

#[test]
fn external_backend_round_trip_through_the_toy_server() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, pairs) = dataset(dir.path(), &small(), 8);
    let lm = dir.path().join("data/landmarks");
    let weights = dir.path().join("toy.json");
    let server = env!("CARGO_BIN_EXE_morphforge-toy-backend");
    let status = Command::new(server)
        .args([
            "train",
            "--out",
            s(&weights),
            "--size",
            "32",
            "--steps",
            "10",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let cmd = format!("{server} serve --weights {}", s(&weights));
    let run_with_env = |out: &Path, extra: &[&str], env_cmd: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_morphforge"));
        c.args([
            "morph",
            "--method",
            "regen",
            "--split",
            "test",
            "--backend",
            "external",
            "--backend-size",
            "32",
            "--no-refine",
            "--pairs",
            s(&pairs),
            "--manifest",
            s(&manifest),
            "--landmarks",
            s(&lm),
            "--out",
            s(out),
        ])
        .args(extra);
        match env_cmd {
            Some(v) => c.env(morphforge_cli::BACKEND_CMD_ENV, v),
            None => c.env_remove(morphforge_cli::BACKEND_CMD_ENV),
        };
        c.output().unwrap()
    };
    let flagged = dir.path().join("flag");
    let out = run_with_env(&flagged, &["--backend-cmd", &cmd], None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let from_env = dir.path().join("env");
    let out = run_with_env(&from_env, &[], Some(&cmd));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let a = MorphIndex::from_json(&fs::read(flagged.join("morphs.json")).unwrap()).unwrap();
    let b = MorphIndex::from_json(&fs::read(from_env.join("morphs.json")).unwrap()).unwrap();
    assert!(!a.morphs.is_empty());
    assert_eq!(a, b);
    for e in &a.morphs {
        let img = decode_png(&fs::read(flagged.join(&e.file)).unwrap()).unwrap();
        assert_eq!(img.size(), (32, 32));
        assert!(e.loss.unwrap().is_finite());
    }

    let broken = run_with_env(
        &dir.path().join("x"),
        &["--backend-cmd", "/nonexistent/backend"],
        None,
    );
    assert_eq!(broken.status.code(), Some(2));
}
