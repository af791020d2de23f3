use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use circuitgraph::cli::{run, EXIT_DATA, EXIT_FLOOR, EXIT_OK, EXIT_USAGE};
use circuitgraph::graph::Netlist;
use circuitgraph::synth;

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("circuitgraph").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.strip_prefix(dir).unwrap().to_path_buf(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn dataset(scenes: &[synth::Scene]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    synth::write_dataset(scenes, dir.path()).unwrap();
    dir
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(cli(&["pipeline", "--no-such-flag", "x"]), EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&[]), EXIT_USAGE);
    assert_eq!(cli(&["--help"]), EXIT_OK);
}

#[test]
fn binary_prints_usage_on_bad_flag() {
    let out = Command::new(env!("CARGO_BIN_EXE_circuitgraph"))
        .args(["stats", "--bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "{err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn every_stage_is_documented() {
    let out = Command::new(env!("CARGO_BIN_EXE_circuitgraph"))
        .arg("--help")
        .output()
        .unwrap();
    let help = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "binarize",
        "coarse",
        "refine",
        "wires",
        "keypoints",
        "ports",
        "graph",
        "netlist",
        "overlay",
        "eval",
        "stats",
        "pipeline",
    ] {
        assert!(help.contains(cmd), "{cmd} missing from help");
    }
    for flag in [
        "--erosion-radius",
        "--cluster-gap",
        "--tolerance",
        "--epsilon",
        "--min-area",
        "--threshold",
        "--workers",
    ] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn two_symbol_fixture_gives_one_net() {
    let data = dataset(&[synth::two_symbol()]);
    let out = data.path().join("out");
    assert_eq!(cli(&["pipeline", p(data.path())]), EXIT_OK);
    let text = std::fs::read_to_string(out.join("two_symbol.netlist.txt")).unwrap();
    let nets = Netlist::parse_text(&text).unwrap();
    assert_eq!(nets.nets.len(), 1);
    assert_eq!(text, "n0.right n1.left\n");
    for ext in [
        "polygons.json",
        "graph.json",
        "report.json",
        "overlay.png",
        "overlay.legend.json",
    ] {
        assert!(out.join(format!("two_symbol.{ext}")).is_file(), "{ext}");
    }
}

#[test]
fn pipeline_equals_stage_sequence() {
    let scenes = vec![synth::ladder(21, 7), synth::crossover(4)];
    let data = dataset(&scenes);
    let root = data.path();
    assert_eq!(cli(&["pipeline", p(root), "--workers", "2"]), EXIT_OK);
    let piped = root.join("out");

    for s in &scenes {
        let id = s.annotations.image_id.as_str();
        let stages = root.join("stages");
        let f = |name: &str| stages.join(format!("{id}.{name}"));
        let image = root.join("images").join(format!("{id}.png"));
        let bboxes = root.join("bboxes").join(format!("{id}.xml"));
        assert_eq!(
            cli(&["binarize", p(&image), "-o", p(&f("map.png"))]),
            EXIT_OK
        );
        let map = f("map.png");
        assert_eq!(
            cli(&[
                "coarse",
                "--bboxes",
                p(&bboxes),
                "--map",
                p(&map),
                "-o",
                p(&f("coarse.json"))
            ]),
            EXIT_OK
        );
        for (cmd, from, to) in [
            ("refine", "coarse.json", "refined.json"),
            ("wires", "refined.json", "wired.json"),
            ("keypoints", "wired.json", "kps.json"),
        ] {
            assert_eq!(
                cli(&[
                    cmd,
                    "--polygons",
                    p(&f(from)),
                    "--map",
                    p(&map),
                    "-o",
                    p(&f(to))
                ]),
                EXIT_OK,
                "{cmd}"
            );
        }
        assert_eq!(
            cli(&[
                "ports",
                "--polygons",
                p(&f("kps.json")),
                "-o",
                p(&f("polygons.json"))
            ]),
            EXIT_OK
        );
        assert_eq!(
            cli(&[
                "graph",
                "--polygons",
                p(&f("polygons.json")),
                "-o",
                p(&f("graph.json"))
            ]),
            EXIT_OK
        );
        assert_eq!(
            cli(&[
                "netlist",
                "--graph",
                p(&f("graph.json")),
                "-o",
                p(&f("netlist.txt"))
            ]),
            EXIT_OK
        );
        assert_eq!(
            cli(&[
                "overlay",
                "--polygons",
                p(&f("polygons.json")),
                "--map",
                p(&map),
                "-o",
                p(&f("overlay.png"))
            ]),
            EXIT_OK
        );
        // the binarized map equals the shipped binary map
        assert_eq!(
            std::fs::read(&map).unwrap(),
            std::fs::read(root.join("binmaps").join(format!("{id}.png"))).unwrap()
        );
        for name in [
            "polygons.json",
            "graph.json",
            "netlist.txt",
            "overlay.png",
            "overlay.legend.json",
        ] {
            let a = std::fs::read(f(name)).unwrap();
            let b = std::fs::read(piped.join(format!("{id}.{name}"))).unwrap();
            assert!(a == b, "{id}.{name} differs between pipeline and stages");
        }
        assert_eq!(
            std::fs::read_to_string(f("netlist.txt")).unwrap(),
            s.netlist.to_text(),
            "{id} netlist"
        );
    }
}

#[test]
fn repeat_runs_are_byte_identical() {
    let scenes = synth::corpus(5, 6);
    let data = dataset(&scenes);
    let root = data.path();
    let (a, b) = (root.join("a"), root.join("b"));
    assert_eq!(
        cli(&[
            "pipeline",
            p(root),
            "-o",
            p(&a),
            "--workers",
            "1",
            "--seedless"
        ]),
        EXIT_OK
    );
    assert_eq!(
        cli(&["pipeline", p(root), "-o", p(&b), "--workers", "4"]),
        EXIT_OK
    );
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    assert_eq!(ta.len(), 6 * 6 + 1);
    assert!(ta == tb);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    assert_eq!(
        cli(&["binarize", p(&missing), "-o", p(&dir.path().join("o.png"))]),
        EXIT_DATA
    );

    let bad = dir.path().join("bad.xml");
    std::fs::write(&bad, "<annotation><size>").unwrap();
    let map = dir.path().join("map.png");
    synth::two_symbol().map.save(&map).unwrap();
    assert_eq!(
        cli(&[
            "coarse",
            "--bboxes",
            p(&bad),
            "--map",
            p(&map),
            "-o",
            p(&dir.path().join("c.json"))
        ]),
        EXIT_DATA
    );

    // a failing image fails the batch but the others are still written
    let data = dataset(&[synth::two_symbol(), synth::ladder(1, 3)]);
    std::fs::write(data.path().join("bboxes").join("broken.xml"), "not xml").unwrap();
    assert_eq!(cli(&["pipeline", p(data.path())]), EXIT_DATA);
    assert!(data
        .path()
        .join("out")
        .join("two_symbol.netlist.txt")
        .is_file());
    let summary = std::fs::read_to_string(data.path().join("out").join("summary.json")).unwrap();
    assert!(summary.contains("broken.xml"));
}

#[test]
fn config_file_overrides_defaults() {
    let data = dataset(&[synth::two_symbol()]);
    let root = data.path();
    let cfg = root.join("run.cfg");
    std::fs::write(
        &cfg,
        "# tighter outlines\nepsilon = 0\nerosion_radius = 1\noutput_dir = results\n",
    )
    .unwrap();
    assert_eq!(cli(&["pipeline", p(root), "--config", p(&cfg)]), EXIT_OK);
    assert!(root
        .join("results")
        .join("two_symbol.netlist.txt")
        .is_file());

    std::fs::write(&cfg, "epsilon = 0\nfrobs = 3\n").unwrap();
    assert_eq!(cli(&["pipeline", p(root), "--config", p(&cfg)]), EXIT_DATA);
}

#[test]
fn eval_floors_gate_the_exit_code() {
    let data = dataset(&[synth::crossover(9)]);
    let root = data.path();
    assert_eq!(cli(&["pipeline", p(root)]), EXIT_OK);
    let out = root.join("out");
    let pred = out.join("crossover_0009.netlist.txt");
    let gt = root.join("expected").join("crossover_0009.netlist.txt");
    let report = root.join("eval.json");
    assert_eq!(
        cli(&[
            "eval",
            "--pred-netlist",
            p(&pred),
            "--gt-netlist",
            p(&gt),
            "--min-net-f1",
            "1.0",
            "-o",
            p(&report)
        ]),
        EXIT_OK
    );
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["nets"]["f1"], 1.0);

    let wrong = root.join("wrong.txt");
    std::fs::write(&wrong, "n0.left n1.left\n").unwrap();
    assert_eq!(
        cli(&[
            "eval",
            "--pred-netlist",
            p(&wrong),
            "--gt-netlist",
            p(&gt),
            "--min-net-f1",
            "0.5"
        ]),
        EXIT_FLOOR
    );

    let polys = out.join("crossover_0009.polygons.json");
    assert_eq!(
        cli(&[
            "eval",
            "--pred",
            p(&polys),
            "--gt",
            p(&polys),
            "--min-mask-f1",
            "1",
            "--min-keypoint-f1",
            "1"
        ]),
        EXIT_OK
    );
    assert_eq!(cli(&["eval", "--min-net-f1", "1"]), EXIT_USAGE);
}

#[test]
fn stats_counts_the_synthetic_layout() {
    let data = dataset(&synth::corpus(2, 3));
    let json = data.path().join("stats.json");
    assert_eq!(cli(&["stats", p(data.path()), "-o", p(&json)]), EXIT_OK);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["images"], 3);
    assert_eq!(v["binary_maps"], 3);
}

#[test]
fn ports_can_emit_detector_format() {
    let data = dataset(&[synth::two_symbol()]);
    let root = data.path();
    assert_eq!(cli(&["pipeline", p(root)]), EXIT_OK);
    let polys = root.join("out").join("two_symbol.polygons.json");
    let coco = root.join("coco.json");
    let again = root.join("again.json");
    assert_eq!(
        cli(&[
            "ports",
            "--polygons",
            p(&polys),
            "-o",
            p(&again),
            "--coco",
            p(&coco)
        ]),
        EXIT_OK
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&coco).unwrap()).unwrap();
    assert!(!v["annotations"].as_array().unwrap().is_empty());
    // re-running the ports stage on its own output changes nothing
    assert_eq!(
        std::fs::read(&polys).unwrap(),
        std::fs::read(&again).unwrap()
    );
}
