use std::collections::BTreeMap;
use std::fs;

use facehall::align3d::{Mesh, LandmarkSet};
use facehall::degrade::{DegradationParams, Psf};
use facehall::dictionary::{build_dictionary, read_manifest, ChannelSelect, DictionaryPair};
use facehall::synthetic::{plane_landmarks, textured_plane, SyntheticSet};
use facehall::{Dims, Error, Image};

#[test]
fn dictionary_from_directory_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let set = SyntheticSet::generate(Dims::new(16, 12), 2, 2, 3);
    // names chosen so directory order differs from subject order
    let names = ["z0.pgm", "a1.pgm", "m2.pgm", "b3.pgm"];
    let mut manifest = String::from("# file\tsubject\n");
    for (i, name) in names.iter().enumerate() {
        set.images[i].clamped().save(dir.path().join(name)).unwrap();
        manifest.push_str(&format!("{name}\t{}\n", set.labels[i]));
    }
    fs::write(dir.path().join("manifest.tsv"), manifest).unwrap();
    let manifest = read_manifest(dir.path().join("manifest.tsv")).unwrap();
    let deg = DegradationParams::new(Psf::average(2).unwrap(), 2, 0.0).unwrap();
    let pair = build_dictionary(dir.path(), &manifest, &deg, ChannelSelect::Gray).unwrap();
    assert_eq!(pair.labels(), &[0, 0, 1, 1]);
    // within a subject, columns follow file name order
    let first = Image::load(dir.path().join("a1.pgm")).unwrap();
    assert_eq!(pair.hr_atom(0), first);

    let path = dir.path().join("dict.fhd");
    pair.save(&path).unwrap();
    assert_eq!(DictionaryPair::load(&path).unwrap(), pair);

    let mut bytes = fs::read(&path).unwrap();
    bytes.push(0);
    fs::write(&path, &bytes).unwrap();
    assert!(DictionaryPair::load(&path).is_err());
    bytes[0] = b'X';
    fs::write(&path, &bytes).unwrap();
    assert!(matches!(DictionaryPair::load(&path), Err(Error::BadMagic(_))));
}

#[test]
fn manifest_must_cover_every_image() {
    let dir = tempfile::tempdir().unwrap();
    let img = Image::filled(Dims::new(4, 4), 10.0);
    img.save(dir.path().join("a.pgm")).unwrap();
    img.save(dir.path().join("b.pgm")).unwrap();
    let manifest = BTreeMap::from([("a.pgm".to_string(), 0u32)]);
    let deg = DegradationParams::new(Psf::delta(), 2, 0.0).unwrap();
    assert!(build_dictionary(dir.path(), &manifest, &deg, ChannelSelect::Gray).is_err());
}

#[test]
fn mesh_and_landmarks_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let texture = Image::from_fn(Dims::new(5, 4), |r, c| (r * 40 + c * 10) as f64);
    let mesh = textured_plane(&texture);
    mesh.save_obj(dir.path().join("m.obj")).unwrap();
    let back = Mesh::load_obj(dir.path().join("m.obj")).unwrap();
    assert_eq!(back.triangles(), mesh.triangles());
    for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
        assert!((a - b).norm() < 1e-9);
    }
    let lmk = plane_landmarks(Dims::new(32, 24));
    lmk.save(dir.path().join("p.lmk")).unwrap();
    let back = LandmarkSet::load(dir.path().join("p.lmk")).unwrap();
    for (a, b) in back.points().iter().zip(lmk.points()) {
        assert!((a - b).norm() < 1e-9);
    }
    assert!(LandmarkSet::load(dir.path().join("missing.lmk")).is_err());
}
