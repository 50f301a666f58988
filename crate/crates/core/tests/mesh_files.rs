use hrfem::mesh::{generate_structured, Mesh, Pattern};
use hrfem::Error;

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("square.mesh");
    let m = generate_structured(4, Pattern::Alternating)
        .unwrap()
        .refine_uniform();
    m.save(&path).unwrap();
    assert_eq!(Mesh::load(&path).unwrap(), m);
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = Mesh::load(dir.path().join("absent.mesh")).unwrap_err();
    assert!(matches!(err, Error::Io(_)), "{err:?}");
}

#[test]
fn malformed_text_is_rejected() {
    assert!(Mesh::from_text("not a mesh").is_err());
    let m = generate_structured(1, Pattern::Crisscross).unwrap();
    let truncated: String = m.to_text().lines().take(3).collect::<Vec<_>>().join("\n");
    assert!(Mesh::from_text(&truncated).is_err());
}
