use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use poc_core::backend::stub::StubServer;
use poc_core::codec::{write_label_map, write_png, ScoreMap};
use poc_core::fixture::write_street_fixture;
use poc_core::labels::LabelConvention;
use poc_core::metrics::AnomalyReport;
use poc_core::{ImageBuffer, LabelMap};

fn poc<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poc"))
        .args(args)
        .env_remove("POC_BACKEND_URL")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn status(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn fixture(count: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_street_fixture(dir.path(), count, 256, 192, 1).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("job.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn generate_with_mock_backends() {
    let input = fixture(2);
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let cfg = write_config(
        work.path(),
        &format!(
            "[job]\ninput_dir = {:?}\noutput_dir = {:?}\n",
            input.path(),
            out
        ),
    );
    let res = poc(&[
        "generate",
        "--config",
        &s(&cfg),
        "--mode",
        "anomaly-test",
        "--mock",
    ]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    assert!(
        stdout(&res).contains("accepted:      6"),
        "{}",
        stdout(&res)
    );
    assert!(stdout(&res).contains("samples/s"));
    assert_eq!(std::fs::read_dir(out.join("images")).unwrap().count(), 6);
    assert_eq!(std::fs::read_dir(out.join("labels")).unwrap().count(), 6);
}

#[test]
fn same_seed_gives_identical_manifests() {
    let input = fixture(1);
    let work = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out = work.path().join(run);
        let res = poc(&[
            "generate",
            "--mock",
            "--mode",
            "extend",
            "--seed",
            "7",
            "--input-dir",
            &s(input.path()),
            "--output-dir",
            &s(&out),
        ]);
        assert_eq!(status(&res), 0, "{}", stderr(&res));
        manifests.push(std::fs::read(out.join("manifest.jsonl")).unwrap());
    }
    assert_eq!(manifests[0], manifests[1]);
}

#[test]
fn missing_input_dir_is_a_config_error() {
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(
        work.path(),
        "[job]\nmode = \"anomaly-test\"\noutput_dir = \"out\"\n",
    );
    let res = poc(&["generate", "--config", &s(&cfg), "--mock"]);
    assert_eq!(status(&res), 2);
    assert!(stderr(&res).contains("job.input_dir"), "{}", stderr(&res));
}

#[test]
fn schema_violations_name_the_field() {
    let work = tempfile::tempdir().unwrap();
    for (body, field) in [
        ("[job]\nmode = \"anomaly-test\"\nseeds = 3\n", "seeds"),
        (
            "[backends]\nretry = { max_attempts = \"x\" }\n",
            "max_attempts",
        ),
        ("[job]\nmode = \"inpaint-everything\"\n", "mode"),
    ] {
        let cfg = write_config(work.path(), body);
        let res = poc(&["generate", "--config", &s(&cfg), "--mock"]);
        assert_eq!(status(&res), 2, "{body}");
        assert!(stderr(&res).contains(field), "{body}: {}", stderr(&res));
    }
    let input = fixture(1);
    let cfg = write_config(
        work.path(),
        &format!(
            "[job]\nmode = \"anomaly-test\"\ninput_dir = {:?}\noutput_dir = \"o\"\n[job.placement]\nmin_frac = 0.9\n",
            input.path()
        ),
    );
    let res = poc(&["generate", "--config", &s(&cfg), "--mock"]);
    assert_eq!(status(&res), 2);
    assert!(
        stderr(&res).contains("placement.min_frac"),
        "{}",
        stderr(&res)
    );
}

#[test]
fn existing_output_needs_overwrite() {
    let input = fixture(1);
    let work = tempfile::tempdir().unwrap();
    let out = work.path().join("out");
    let run = |extra: Option<&str>| {
        let mut args = vec![
            "generate".to_string(),
            "--mock".into(),
            "--mode".into(),
            "anomaly-test".into(),
            "--input-dir".into(),
            s(input.path()),
            "--output-dir".into(),
            s(&out),
        ];
        args.extend(extra.map(String::from));
        poc(&args)
    };
    assert_eq!(status(&run(None)), 0);
    let again = run(None);
    assert_eq!(status(&again), 2);
    assert!(stderr(&again).contains("not empty"), "{}", stderr(&again));
    assert_eq!(status(&run(Some("--overwrite"))), 0);
    assert_eq!(status(&run(Some("--resume"))), 0);
}

#[test]
fn all_rejected_exits_one() {
    // A scene without road: guided placement never finds a valid region.
    let input = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(input.path().join("images")).unwrap();
    std::fs::create_dir_all(input.path().join("labels")).unwrap();
    let img = ImageBuffer::filled(64, 64, [20, 200, 40]).unwrap();
    write_png(&input.path().join("images/field.png"), &img).unwrap();
    write_label_map(
        &input.path().join("labels/field.png"),
        &LabelMap::filled(64, 64, 8).unwrap(),
        &LabelConvention::cityscapes(),
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let res = poc(&[
        "generate",
        "--mock",
        "--mode",
        "anomaly-test",
        "--input-dir",
        &s(input.path()),
        "--output-dir",
        &s(&out.path().join("o")),
    ]);
    assert_eq!(status(&res), 1, "{}", stderr(&res));
    assert!(
        stdout(&res).contains("rejected:      3"),
        "{}",
        stdout(&res)
    );
}

#[test]
fn backend_url_comes_from_the_environment() {
    let responses = tempfile::tempdir().unwrap();
    let stub = StubServer::start(responses.path()).unwrap();
    let input = fixture(1);
    let out = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    let cfg = write_config(
        work.path(),
        "[backends]\nurl = \"http://127.0.0.1:9\"\ntimeout_secs = 5\nretry = { max_attempts = 1 }\n",
    );
    let res = Command::new(env!("CARGO_BIN_EXE_poc"))
        .args([
            "generate",
            "--config",
            &s(&cfg),
            "--mode",
            "anomaly-test",
            "--augmentations",
            "1",
            "--input-dir",
            &s(input.path()),
            "--output-dir",
            &s(&out.path().join("o")),
        ])
        .env("POC_BACKEND_URL", stub.base_url())
        .env("RUST_LOG", "off")
        .output()
        .unwrap();
    // The stub has no canned responses, so the sample fails; what matters is
    // that the request reached the overriding endpoint.
    assert_eq!(status(&res), 1, "{}", stderr(&res));
    assert!(!stub.requests().is_empty());
}

fn write_pair(dir: &Path, stem: &str, scores: &[f32], labels: &[u16], w: u32) {
    let h = scores.len() as u32 / w;
    std::fs::create_dir_all(dir.join("scores")).unwrap();
    std::fs::create_dir_all(dir.join("labels")).unwrap();
    ScoreMap::new(w, h, scores.to_vec())
        .unwrap()
        .write(&dir.join("scores").join(format!("{stem}.bin")))
        .unwrap();
    write_label_map(
        &dir.join("labels").join(format!("{stem}.png")),
        &LabelMap::new(w, h, labels.to_vec()).unwrap(),
        &LabelConvention::anomaly(),
    )
    .unwrap();
}

fn evaluate(dir: &Path, extra: &[&str]) -> (Output, Option<AnomalyReport>) {
    let out = dir.join("report.json");
    let mut args = vec![
        "evaluate".to_string(),
        "--scores".into(),
        s(&dir.join("scores")),
        "--labels".into(),
        s(&dir.join("labels")),
        "--out".into(),
        s(&out),
    ];
    args.extend(extra.iter().map(|a| a.to_string()));
    let res = poc(&args);
    let report = std::fs::read(&out)
        .ok()
        .map(|b| serde_json::from_slice(&b).unwrap());
    (res, report)
}

#[test]
fn evaluate_perfect_separation() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path(), "a", &[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 255], 2);
    write_pair(dir.path(), "b", &[0.7, 0.3, 0.0, 0.05], &[1, 0, 0, 0], 2);
    let (res, report) = evaluate(dir.path(), &["--dataset", "toy", "--method", "oracle"]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    let r = report.unwrap();
    assert_eq!((r.max_f1, r.auprc, r.fpr_at_95tpr), (1.0, 1.0, 0.0));
    assert_eq!((r.n_ood_pixels, r.n_id_pixels, r.n_ignored), (3, 4, 1));
    assert_eq!(r.dataset, "toy");
    assert_eq!(r.provenance.tool_version, env!("CARGO_PKG_VERSION"));
}

#[test]
fn evaluate_pools_pixels_across_images() {
    // Four-pixel example with AP 0.75, tiled over three images.
    let dir = tempfile::tempdir().unwrap();
    for stem in ["x", "y", "z"] {
        write_pair(dir.path(), stem, &[0.9, 0.8, 0.2, 0.1], &[1, 0, 0, 1], 4);
    }
    // An unpaired score map is skipped with a warning.
    ScoreMap::new(1, 1, vec![0.5])
        .unwrap()
        .write(&dir.path().join("scores/orphan.bin"))
        .unwrap();
    let (res, report) = evaluate(dir.path(), &[]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    assert!(stderr(&res).contains("orphan.bin"), "{}", stderr(&res));
    assert!((report.unwrap().auprc - 0.75).abs() < 1e-12);

    let (res, report) = evaluate(dir.path(), &["--bins", "1000"]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    assert!((report.unwrap().auprc - 0.75).abs() < 1e-12);
}

#[test]
fn evaluate_empty_dirs_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("scores")).unwrap();
    std::fs::create_dir_all(dir.path().join("labels")).unwrap();
    let (res, report) = evaluate(dir.path(), &[]);
    assert_eq!(status(&res), 1);
    assert!(report.is_none());
}

fn make_report(dir: &Path, dataset: &str, scores: &[f32]) -> PathBuf {
    let d = dir.join(dataset);
    write_pair(&d, "img", scores, &[1, 0, 1, 0], 2);
    let (res, _) = evaluate(&d, &["--dataset", dataset, "--method", "m2a"]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    d.join("report.json")
}

#[test]
fn report_writes_table_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let one = make_report(dir.path(), "poc-idd", &[0.9, 0.1, 0.6, 0.7]);
    let out = dir.path().join("single");
    let res = poc(&["report".to_string(), s(&one), "--out-dir".into(), s(&out)]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    let table = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    for svg in ["pr_curves.svg", "boxplots.svg"] {
        assert!(std::fs::read_to_string(out.join(svg))
            .unwrap()
            .starts_with("<svg"));
    }

    let two = make_report(dir.path(), "poc-acdc", &[0.9, 0.1, 0.8, 0.2]);
    let three = make_report(dir.path(), "poc-cs", &[0.2, 0.9, 0.6, 0.7]);
    let out = dir.path().join("many");
    let res = poc(&[
        "report".to_string(),
        s(&one),
        s(&two),
        s(&three),
        "--out-dir".into(),
        s(&out),
    ]);
    assert_eq!(status(&res), 0, "{}", stderr(&res));
    let mut rdr = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
    let rows: Vec<(String, String, f64, f64, f64)> =
        rdr.deserialize().map(Result::unwrap).collect();
    let datasets: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(datasets, ["poc-acdc", "poc-cs", "poc-idd"]);
    for (row, path) in rows.iter().zip([&two, &three, &one]) {
        let r: AnomalyReport = serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap();
        assert_eq!((row.2, row.3, row.4), (r.max_f1, r.auprc, r.fpr_at_95tpr));
    }
}

#[test]
fn malformed_report_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("broken.json");
    std::fs::write(&bad, "{\"dataset\": 1").unwrap();
    let res = poc(&[
        "report".to_string(),
        s(&bad),
        "--out-dir".into(),
        s(&dir.path().join("o")),
    ]);
    assert_eq!(status(&res), 1);
    assert!(stderr(&res).contains("broken.json"), "{}", stderr(&res));
}

#[test]
fn catalogs_print_the_object_lists() {
    let res = poc(&["catalogs", "poc-alt-25"]);
    assert_eq!(status(&res), 0);
    let text = stdout(&res);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 25);
    assert_eq!((lines[0], lines[24]), ("stroller", "monkey"));
    let res = poc(&["catalogs"]);
    assert!(stdout(&res).contains("# cityscapes-id-6 (6)"));
    assert_eq!(status(&poc(&["catalogs", "nope"])), 2);
}
