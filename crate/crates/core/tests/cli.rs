mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use carbospec::spectral::{Source, SpectralDataset, Spectrum, SpectrumKind, WavelengthGrid};
use carbospec::store::{load_canonical, load_model, save_canonical};
use carbospec::synth::PlantedSignal;

fn carbospec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carbospec")).args(args).env_remove("CARBOSPEC_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// `key=value` lookup in a report.
fn value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
        .to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_file(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    let d = PlantedSignal { n, seed, ..Default::default() }.generate().unwrap();
    save_canonical(&d, &path).unwrap();
    path
}

fn with_labels(d: &SpectralDataset, f: impl Fn(f64) -> f64) -> SpectralDataset {
    let labels = d.labels().iter().map(|&l| f(l)).collect();
    SpectralDataset::new(*d.grid(), Source::Local, d.spectra().to_vec(), labels).unwrap()
}

#[test]
fn ingest_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let wl: Vec<String> = (0..=1050).map(|i| format!("{}", 400 + 2 * i)).collect();
    let row: Vec<String> = (0..=1050).map(|i| format!("{}", 0.3 + 1e-4 * f64::from(i))).collect();
    let lucas = dir.path().join("lucas.csv");
    std::fs::write(&lucas, format!("PointID,CaCO3,{}\nP1,85.6,{}\nP2,12,{}\n", wl.join(","), row.join(","), row.join(","))).unwrap();
    let out = dir.path().join("out.csv");
    let o = carbospec(&["ingest", "--format", "lucas", p(&lucas), "-o", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = load_canonical(&out, SpectrumKind::Absorbance).unwrap();
    assert_eq!(d.len(), 2);
    assert!((d.labels()[0] - 8.56).abs() < 1e-12);

    let bad = dir.path().join("bad.csv");
    let mut text = std::fs::read_to_string(&out).unwrap();
    text = text.replacen("carbonate_g100g", "carbonate", 1);
    std::fs::write(&bad, text).unwrap();
    let o = carbospec(&["ingest", p(&bad), "-o", p(&dir.path().join("x.csv"))]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("carbonate"), "{}", String::from_utf8_lossy(&o.stderr));

    let o = carbospec(&["ingest", p(&dir.path().join("missing.csv")), "-o", p(&out)]);
    assert_eq!(code(&o), 3);

    let o = carbospec(&["ingest", "--format", "kssl", p(&lucas), "-o", p(&out)]);
    assert_eq!(code(&o), 2, "KSSL without a unit flag");
}

#[test]
fn stats_distance_between_label_sets() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_file(dir.path(), "a.csv", 20, 1);
    let o = carbospec(&["stats", p(&a), p(&a)]);
    assert_eq!(code(&o), 0);
    assert_eq!(value(&stdout(&o), "wasserstein").parse::<f64>().unwrap(), 0.0);

    let d = load_canonical(&a, SpectrumKind::Absorbance).unwrap();
    let b = dir.path().join("b.csv");
    save_canonical(&with_labels(&d, |l| l + 30.0), &b).unwrap();
    let o = carbospec(&["stats", p(&a), p(&b)]);
    let w: f64 = value(&stdout(&o), "wasserstein").parse().unwrap();
    assert!((w - 30.0).abs() < 1e-9, "{w}");
}

#[test]
fn evaluate_perfect_pairs_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.csv");
    std::fs::write(&pairs, "observed,predicted\n1,1\n2,2\n3.5,3.5\n7,7\n9,9\n").unwrap();
    let o = carbospec(&["evaluate", "--pairs", p(&pairs)]);
    assert_eq!(code(&o), 0);
    let r = stdout(&o);
    assert_eq!(value(&r, "r2").parse::<f64>().unwrap(), 1.0);
    assert_eq!(value(&r, "band"), "Excellent");

    let o = carbospec(&["evaluate", "--rmse", "9.42", "4.47"]);
    let r = stdout(&o);
    assert_eq!(value(&r, "row1.rpd"), "0.64");
    assert_eq!(value(&r, "row2.rpiq"), "2.11");
}

#[test]
fn train_predict_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "train.csv", 60, 3);
    let model = dir.path().join("plsr.cspc");
    let args = ["train", "--model", "plsr", "--data", p(&data), "-o", p(&model), "--components", "6"];
    let o = carbospec(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = dir.path().join("plsr.cspc.log");
    let run = dir.path().join("plsr.cspc.run.json");
    let first: Vec<Vec<u8>> = [&model, &log, &run].iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(code(&carbospec(&args)), 0);
    let second: Vec<Vec<u8>> = [&model, &log, &run].iter().map(|f| std::fs::read(f).unwrap()).collect();
    assert_eq!(first, second, "repeat training changed an output file");
    let cfg: serde_json::Value = serde_json::from_slice(&first[2]).unwrap();
    assert_eq!(cfg["seed"], 42);

    let out = dir.path().join("pred.csv");
    let o = carbospec(&["predict", "--model", p(&model), "--data", p(&data), "-o", p(&out)]);
    assert_eq!(code(&o), 0);
    let m = load_model(&model).unwrap();
    let d = load_canonical(&data, SpectrumKind::Absorbance).unwrap();
    let want = m.predict(&d).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,predicted_g100g"));
    for ((line, id), w) in lines.zip(d.sample_ids()).zip(&want) {
        let (got_id, got) = line.split_once(',').unwrap();
        assert_eq!(got_id, id);
        assert_eq!(got.parse::<f64>().unwrap().to_bits(), w.to_bits());
    }

    let empty = dir.path().join("empty.csv");
    let header = std::fs::read_to_string(&data).unwrap().lines().next().unwrap().to_string();
    std::fs::write(&empty, header + "\n").unwrap();
    assert_eq!(code(&carbospec(&["predict", "--model", p(&model), "--data", p(&empty)])), 2);

    let o = carbospec(&["saliency", "--model", p(&model), "--data", p(&data), "-o", p(&dir.path().join("s.svg"))]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("coef_peak1.nm="));
}

#[test]
fn saliency_svg_matches_library_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "train.csv", 24, 5);
    let model = dir.path().join("mlp.cspc");
    let o = carbospec(&[
        "train", "--model", "mlp", "--data", p(&data), "-o", p(&model), "--epochs", "2", "--batch-size", "8",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg_path = dir.path().join("sal.svg");
    let o = carbospec(&["saliency", "--model", p(&model), "--data", p(&data), "-o", p(&svg_path), "--top", "5"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let m = load_model(&model).unwrap();
    let d = load_canonical(&data, SpectrumKind::Absorbance).unwrap();
    let want = m.saliency(&d).unwrap();
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let peaks: Vec<(f64, f64)> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("peak"))
        .map(|n| (n.attribute("data-nm").unwrap().parse().unwrap(), n.attribute("data-magnitude").unwrap().parse().unwrap()))
        .collect();
    assert_eq!(peaks, want.top_peaks(5));
    let report = stdout(&o);
    assert_eq!(value(&report, "peak1.nm").parse::<f64>().unwrap(), want.peaks[0].0);
}

#[test]
fn plot_constant_spectrum_and_markers() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("flat.csv");
    let d = SpectralDataset::new(
        WavelengthGrid::NIR,
        Source::Local,
        vec![Spectrum::new("flat", SpectrumKind::Absorbance, vec![0.7; 2701])],
        vec![1.0],
    )
    .unwrap();
    save_canonical(&d, &data).unwrap();
    let svg_path = dir.path().join("flat.svg");
    let o = carbospec(&["plot", "--data", p(&data), "--markers", "-o", p(&svg_path)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 1);
    let ys: Vec<&str> = lines[0].attribute("points").unwrap().split_whitespace().map(|pt| pt.split(',').nth(1).unwrap()).collect();
    assert!(ys.windows(2).all(|w| w[0] == w[1]), "polyline is not horizontal");
    let markers: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("marker"))
        .map(|n| n.attribute("data-nm").unwrap())
        .collect();
    assert_eq!(markers, vec!["1415", "1900", "2000", "2160", "2340", "2500-2550"]);
}

#[test]
fn divergent_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth_file(dir.path(), "train.csv", 12, 9);
    let o = carbospec(&[
        "train", "--model", "mlp", "--data", p(&data), "-o", p(&dir.path().join("m.cspc")), "--epochs", "3",
        "--batch-size", "4", "--lr", "1e300", "--val-fraction", "0",
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("m.cspc").exists());
}

#[test]
fn xrd_and_json_reports() {
    let o = carbospec(&["--json", "xrd"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["xrd_total"].as_f64().unwrap() - 8.43).abs() < 0.01, "{v}");
    let o = carbospec(&["xrd", "--crystalline", "6.07", "--ci", "0.72"]);
    assert!((value(&stdout(&o), "xrd_total").parse::<f64>().unwrap() - 6.07 / 0.72).abs() < 1e-12);
    assert_eq!(code(&carbospec(&["xrd", "--crystalline", "6.07", "--ci", "1.5"])), 2);
    assert_eq!(code(&carbospec(&["no-such-command"])), 2);
}
