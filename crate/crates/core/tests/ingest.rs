use std::fs;

use haptex::texdata::{generate_fixture, load_recording, save_recording, Archetype, IngestError, SurfaceImage};
use image::{ImageBuffer, Luma, Rgb};

#[test]
fn fixture_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    for kind in Archetype::ALL {
        let rec = generate_fixture(kind, 4);
        let manifest = save_recording(&rec, &dir.path().join(kind.name())).unwrap();
        let back = load_recording(&manifest).unwrap();
        assert_eq!(back, rec, "{kind}");
    }
}

#[test]
fn sixteen_bit_image_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.png");
    ImageBuffer::<Luma<u16>, _>::from_pixel(8, 8, Luma([40000u16])).save(&path).unwrap();
    match SurfaceImage::load(&path, 0.05) {
        Err(IngestError::BitDepth { bits, .. }) => assert_eq!(bits, 16),
        other => panic!("{other:?}"),
    }
}

#[test]
fn color_png_reduced_to_luminance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("color.png");
    ImageBuffer::<Rgb<u8>, _>::from_pixel(5, 4, Rgb([200, 200, 200])).save(&path).unwrap();
    let img = SurfaceImage::load(&path, 0.1).unwrap();
    assert_eq!((img.width(), img.height()), (5, 4));
    assert!(img.pixels().iter().all(|p| *p == 200));
}

fn saved_fixture() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_recording(&generate_fixture(Archetype::Cardboard, 1), dir.path()).unwrap();
    (dir, manifest)
}

#[test]
fn duplicate_timestamp_names_index() {
    let (dir, manifest) = saved_fixture();
    let path = dir.path().join("force.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[5] = lines[4];
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match load_recording(&manifest) {
        Err(IngestError::NonMonotonicTimestamps { index }) => assert_eq!(index, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn corrupted_manifest_is_an_ingestion_error() {
    let (_dir, manifest) = saved_fixture();
    fs::write(&manifest, "name = \"cardboard\"\nforce = 3\n").unwrap();
    assert!(matches!(load_recording(&manifest), Err(IngestError::Manifest { .. })));
}

#[test]
fn missing_trace_named() {
    let (dir, manifest) = saved_fixture();
    fs::remove_file(dir.path().join("heat_flux.csv")).unwrap();
    match load_recording(&manifest) {
        Err(IngestError::MissingFile(p)) => assert!(p.ends_with("heat_flux.csv")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn wrong_unit_column_rejected() {
    let (dir, manifest) = saved_fixture();
    let path = dir.path().join("skin_temp.csv");
    let text = fs::read_to_string(&path).unwrap().replacen("temp_c", "force_n", 1);
    fs::write(&path, text).unwrap();
    assert!(matches!(load_recording(&manifest), Err(IngestError::UnitMismatch { .. })));
}
