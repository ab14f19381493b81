mod common;

use std::ffi::OsString;

use common::{forge, photo_png, stderr, tiny_model_file};
use forge_cli::cli::Command;
use forge_core::pipeline::ProjectStore;

fn args(a: &[&str]) -> Vec<OsString> {
    std::iter::once("forge").chain(a.iter().copied()).map(OsString::from).collect()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = forge(&["extract", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(forge(&[]).status.code(), Some(1));
    assert_eq!(forge(&["--help"]).status.code(), Some(0));
}

#[test]
fn reconstruct_names_missing_depth_range() {
    let o = forge(&["reconstruct", "--depth", "d.png", "--normal", "n.png", "-o", "m.ply"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("--near") && err.contains("--far"), "{err}");
}

#[test]
fn runtime_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.png");
    let out = dir.path().join("s.png");
    let o = forge(&["extract", "-i", missing.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent.png"), "{}", stderr(&o));
    let o = forge(&["extract", "-i", missing.to_str().unwrap(), "-o", "x.png", "--low", "0.9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flag_beats_config_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("forge.toml");
    std::fs::write(&cfg, "seed = 3\n[extract]\nsigma = 2.0\nmin-cc = 5\nmode = \"lum\"\n").unwrap();
    let c = cfg.to_str().unwrap();
    let cli = forge_cli::parse(args(&["--config", c, "extract", "-i", "a", "-o", "b", "--sigma", "1.0"])).unwrap();
    assert_eq!(cli.seed, Some(3));
    let Command::Extract(e) = &cli.command else { panic!("extract expected") };
    let r = e.opts.resolve().unwrap();
    assert_eq!(r.edges.sigma, 1.0);
    assert_eq!(r.edges.min_component, 5);
    assert_eq!(r.pigment.mode, forge_core::sketch::PigmentMode::Luminance);
    let cli = forge_cli::parse(args(&["extract", "--seed", "9", "--config", c, "-i", "a", "-o", "b"])).unwrap();
    assert_eq!(cli.seed, Some(9));
}

#[test]
fn config_can_supply_required_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("forge.toml");
    std::fs::write(&cfg, "[reconstruct]\nnear = 1.0\nfar = 6.0\n").unwrap();
    let cli = forge_cli::parse(args(&[
        "reconstruct",
        "--config",
        cfg.to_str().unwrap(),
        "--depth",
        "d",
        "--normal",
        "n",
        "-o",
        "m.ply",
    ]))
    .unwrap();
    let Command::Reconstruct(r) = &cli.command else { panic!("reconstruct expected") };
    assert_eq!((r.near, r.far), (Some(1.0), Some(6.0)));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in ["[extract]\nsigmaa = 1\n", "[nosuch]\nx = 1\n", "not toml [", "bogus = 1\n"].iter().enumerate() {
        let cfg = dir.path().join(format!("c{i}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let o = forge(&["--config", cfg.to_str().unwrap(), "extract", "-i", "a", "-o", "b"]);
        assert_eq!(o.status.code(), Some(1), "{text}: {}", stderr(&o));
    }
}

#[test]
fn staged_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    std::fs::write(p("photo.png"), photo_png(4, 32, 2)).unwrap();
    let model = tiny_model_file(dir.path(), 16);
    let ok = |a: &[&str]| {
        let o = forge(a);
        assert_eq!(o.status.code(), Some(0), "{a:?}: {}", stderr(&o));
    };
    ok(&["extract", "-i", &p("photo.png"), "-o", &p("sketch.png")]);
    ok(&["inpaint", "-i", &p("sketch.png"), "-o", &p("restored.png")]);
    ok(&[
        "generate",
        "-i",
        &p("restored.png"),
        "--model",
        model.to_str().unwrap(),
        "--out",
        &p("gen"),
        "-n",
        "2",
        "--seed",
        "5",
    ]);
    for (fmt, magic) in [("mesh.obj", b"v ".as_slice()), ("mesh.ply", b"ply\n".as_slice())] {
        ok(&[
            "reconstruct",
            "--depth",
            &p("gen/1/depth.png"),
            "--normal",
            &p("gen/1/normal.png"),
            "--near",
            "1",
            "--far",
            "6",
            "-o",
            &p(fmt),
        ]);
        assert!(std::fs::read(p(fmt)).unwrap().starts_with(magic));
    }
    let o = forge(&[
        "reconstruct",
        "--depth",
        &p("gen/1/depth.png"),
        "--normal",
        &p("gen/1/normal.png"),
        "--near",
        "1",
        "--far",
        "6",
        "-o",
        &p("mesh.stl"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_twice_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let photo = dir.path().join("photo.png");
    std::fs::write(&photo, photo_png(4, 32, 2)).unwrap();
    let model = tiny_model_file(dir.path(), 16);
    let mut artifacts = Vec::new();
    for out in ["a", "a", "b"] {
        let proj = dir.path().join(out);
        let o = forge(&[
            "run",
            "-i",
            photo.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--out",
            proj.to_str().unwrap(),
            "--seed",
            "7",
            "-n",
            "2",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let p = ProjectStore::open(dir.path()).unwrap().load(out).unwrap();
        let snapshot: Vec<_> = p.artifacts().into_iter().cloned().collect();
        for a in &snapshot {
            assert!(proj.join(&a.path).is_file());
        }
        artifacts.push(snapshot);
    }
    assert_eq!(artifacts[0], artifacts[1]);
    assert_eq!(artifacts[0], artifacts[2]);
}

#[test]
fn run_without_model_fails_at_generate() {
    let dir = tempfile::tempdir().unwrap();
    let photo = dir.path().join("photo.png");
    std::fs::write(&photo, photo_png(4, 32, 2)).unwrap();
    let proj = dir.path().join("p");
    let o = forge(&[
        "run",
        "-i",
        photo.to_str().unwrap(),
        "--model",
        "/nonexistent/m.bin",
        "--out",
        proj.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("generate stage failed"), "{}", stderr(&o));
    assert!(proj.join("restored.png").is_file());
}

#[test]
fn synth_and_train_produce_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let model = dir.path().join("m.bin");
    let kernel = dir.path().join("k.bin");
    let o = forge(&["synth", "--out", data.to_str().unwrap(), "--statues", "2", "--views", "1", "--resolution", "16"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = forge(&[
        "train",
        "--data",
        data.to_str().unwrap(),
        "-o",
        model.to_str().unwrap(),
        "--steps",
        "3",
        "--batch-size",
        "2",
        "--schedule-steps",
        "10",
        "--kernel-out",
        kernel.to_str().unwrap(),
        "--kernel-steps",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = forge_core::diffusion::load_model(&model).unwrap();
    assert_eq!(m.header.resolution, 16);
    assert_eq!(m.header.training.steps, 3);
    forge_core::inpaint::KernelModel::load(&kernel).unwrap();
}
