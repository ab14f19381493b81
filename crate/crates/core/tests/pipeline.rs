mod common;

use std::sync::Arc;

use common::{photo_png, statue_view, tiny_model};
use forge_core::diffusion::{write_model, SampleConfig};
use forge_core::pipeline::{
    self, run_pipeline, ModelHandle, ModelSource, PipelineConfig, ProjectStore, ReconstructConfig, Stage,
};
use forge_core::raster::{decode_mask_png, encode_mask_png};
use forge_core::{Error, Mask};

fn handle() -> Arc<ModelHandle> {
    Arc::new(ModelHandle::from_bytes(&write_model(&tiny_model(16)).unwrap()).unwrap())
}

fn config() -> PipelineConfig {
    PipelineConfig {
        generate: SampleConfig { n_samples: 2, guidance_scale: 2.0, seed: 7, tag_id: 1 },
        ..Default::default()
    }
}

fn run(store: &ProjectStore, id: &str, cfg: &PipelineConfig) -> forge_core::Result<pipeline::Project> {
    let photo = photo_png(&statue_view(4, 32), 2);
    run_pipeline(store, id, id, 0, &photo, None, &ModelSource::Loaded(handle()), None, cfg, |_, _| {})
}

#[test]
fn end_to_end_populates_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    let p = run(&store, "p", &config()).unwrap();
    assert!(p.photo.is_some() && p.sketch.is_some() && p.restored.is_some());
    assert_eq!(p.runs.len(), 1);
    assert_eq!(p.runs[0].variants.len(), 2);
    for (k, v) in p.runs[0].variants.iter().enumerate() {
        let mesh = v.mesh.as_ref().expect("mesh");
        assert_eq!(mesh.path, format!("runs/0/variants/{k}/mesh.ply"));
        assert_eq!(mesh.media_type, "model/ply");
        assert!(dir.path().join("p").join(&v.depth.path).is_file());
    }
}

#[test]
fn same_seeds_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    let a = run(&store, "a", &config()).unwrap();
    let b = run(&store, "b", &config()).unwrap();
    assert_eq!(a.artifacts(), b.artifacts());
    let again = run(&store, "a", &config()).unwrap();
    assert_eq!(again.artifacts(), a.artifacts());
    let mut other = config();
    other.generate.seed = 8;
    let c = run(&store, "c", &other).unwrap();
    assert_ne!(c.runs[0].variants[0].depth.id, a.runs[0].variants[0].depth.id);
}

#[test]
fn save_then_load_is_equal() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    let p = run(&store, "p", &config()).unwrap();
    store.save(&p).unwrap();
    assert_eq!(store.load("p").unwrap(), p);
    let json = std::fs::read_to_string(dir.path().join("p/manifest.json")).unwrap();
    let keys: Vec<&str> =
        json.lines().filter(|l| l.starts_with("  \"")).map(|l| l.split('"').nth(1).unwrap()).collect();
    assert_eq!(
        keys,
        ["version", "id", "name", "created_at", "photo", "sketch", "mask", "restored", "extract", "inpaint", "runs"]
    );
}

#[test]
fn missing_depth_png_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    run(&store, "p", &config()).unwrap();
    let victim = dir.path().join("p/runs/0/variants/1/depth.png");
    std::fs::remove_file(&victim).unwrap();
    match store.load("p") {
        Err(Error::MissingFiles(paths)) => assert_eq!(paths, vec![victim.clone()]),
        other => panic!("expected MissingFiles, got {other:?}"),
    }
    let msg = store.load("p").unwrap_err().to_string();
    assert!(msg.contains("runs/0/variants/1/depth.png"), "{msg}");
}

#[test]
fn missing_model_fails_at_generate_and_keeps_earlier_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    let photo = photo_png(&statue_view(4, 32), 2);
    let source = ModelSource::Path(dir.path().join("absent.bin"));
    let err = run_pipeline(&store, "p", "p", 0, &photo, None, &source, None, &config(), |_, _| {}).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: Stage::Generate, .. }), "{err:?}");
    let p = store.load("p").unwrap();
    assert!(p.restored.is_some());
    assert!(p.runs.is_empty());
}

#[test]
fn stages_enforce_dependencies() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    store.create("p", "p", 0).unwrap();
    let h = handle();
    let cfg = SampleConfig::default();
    assert!(matches!(pipeline::generate(&store, "p", &h, &cfg, |_, _| {}), Err(Error::Dependency(_))));
    assert!(matches!(pipeline::extract(&store, "p", &Default::default()), Err(Error::Dependency(_))));
    assert!(matches!(
        pipeline::reconstruct(&store, "p", 0, 0, &ReconstructConfig::default()),
        Err(Error::Dependency(_))
    ));
    assert!(matches!(pipeline::set_photo(&store, "q", &photo_png(&statue_view(4, 16), 1)), Err(Error::NotFound(_))));
    assert!(matches!(pipeline::set_photo(&store, "p", b"not a png"), Err(Error::InvalidArgument(_))));
}

#[test]
fn invalid_parameters_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    run(&store, "p", &config()).unwrap();
    let h = handle();
    for cfg in [
        SampleConfig { tag_id: 7, ..Default::default() },
        SampleConfig { guidance_scale: -1.0, ..Default::default() },
        SampleConfig { guidance_scale: 10.5, ..Default::default() },
        SampleConfig { n_samples: 0, ..Default::default() },
    ] {
        let err = pipeline::generate(&store, "p", &h, &cfg, |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err:?}");
    }
    let rc = ReconstructConfig::default();
    assert!(matches!(pipeline::reconstruct(&store, "p", 0, 5, &rc), Err(Error::NotFound(_))));
    assert!(matches!(pipeline::reconstruct(&store, "p", 3, 0, &rc), Err(Error::NotFound(_))));
    let bad = ReconstructConfig { lambda: 0.0, ..Default::default() };
    assert!(matches!(pipeline::reconstruct(&store, "p", 0, 0, &bad), Err(Error::InvalidArgument(_))));
}

#[test]
fn mask_must_match_the_sketch() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    run(&store, "p", &config()).unwrap();
    let wrong = encode_mask_png(&Mask::empty(8, 8)).unwrap();
    assert!(matches!(pipeline::set_mask(&store, "p", &wrong), Err(Error::InvalidArgument(_))));
    let mut m = Mask::empty(64, 64);
    for y in 20..30 {
        for x in 20..30 {
            m.set(x, y, true);
        }
    }
    let a = pipeline::set_mask(&store, "p", &encode_mask_png(&m).unwrap()).unwrap();
    let p = store.load("p").unwrap();
    assert!(p.restored.is_none() && p.runs.is_empty());
    assert_eq!(decode_mask_png(&store.read_artifact("p", &a).unwrap()).unwrap(), m);
    pipeline::extract(&store, "p", &Default::default()).unwrap();
    assert_eq!(store.load("p").unwrap().mask, Some(a));
}

#[test]
fn concurrent_writers_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let store = ProjectStore::open(dir.path()).unwrap();
    store.create("p", "p", 0).unwrap();
    let photos = [photo_png(&statue_view(1, 16), 1), photo_png(&statue_view(2, 16), 1)];
    std::thread::scope(|s| {
        for photo in &photos {
            let store = store.clone();
            s.spawn(move || {
                for _ in 0..25 {
                    pipeline::set_photo(&store, "p", photo).unwrap();
                    pipeline::extract(&store, "p", &Default::default()).unwrap();
                }
            });
        }
        let store = store.clone();
        s.spawn(move || {
            for _ in 0..50 {
                store.load("p").unwrap();
            }
        });
    });
    let p = store.load("p").unwrap();
    let photo = store.read_artifact("p", p.photo.as_ref().unwrap()).unwrap();
    assert!(photos.contains(&photo));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path().join("p"))
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.contains(".tmp-"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
