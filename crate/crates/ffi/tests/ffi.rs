use std::ffi::{CStr, CString};
use std::ptr;

use mvrbm::io::text::{write_model, Model};
use mvrbm::{ModelParams, UnitType, VisibleSchema};
use mvrbm_ffi::*;
use rand::SeedableRng;

fn model_file(dir: &tempfile::TempDir) -> (CString, Model) {
    let schema = VisibleSchema::from_pairs([
        ("flag", UnitType::Binary),
        ("codes", UnitType::ReplicatedSoftmax { vocab: 3 }),
    ])
    .unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let params = ModelParams::random(schema.total_columns(), 4, 0.5, &mut rng);
    let model = Model { schema, params };
    let path = dir.path().join("m.txt");
    write_model(&path, &model).unwrap();
    (CString::new(path.to_str().unwrap()).unwrap(), model)
}

fn last_error() -> String {
    let p = mvrbm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn load_project_free() {
    let dir = tempfile::tempdir().unwrap();
    let (path, model) = model_file(&dir);
    let mut handle = ptr::null_mut();
    unsafe {
        assert_eq!(mvrbm_model_load(path.as_ptr(), &mut handle), MvrbmStatus::Ok);
        assert_eq!(mvrbm_model_num_hidden(handle), 4);
        let json = CString::new(r#"{"flag":true,"codes":[2,0,2]}"#).unwrap();
        let mut out = [0.0; 4];
        assert_eq!(mvrbm_project(handle, json.as_ptr(), out.as_mut_ptr(), 4), MvrbmStatus::Ok);
        let v = model
            .schema
            .encode(&mvrbm::MixedRecord::new(vec![mvrbm::Value::Binary(true), mvrbm::Value::Tokens(vec![2, 0, 2])]))
            .unwrap();
        let expected = mvrbm::hidden_conditional(&model.schema, &model.params, &v);
        assert_eq!(out.to_vec(), expected.to_vec());

        assert_eq!(mvrbm_project(handle, json.as_ptr(), out.as_mut_ptr(), 3), MvrbmStatus::BufferTooSmall);
        let bad = CString::new(r#"{"flag":true,"codes":[7]}"#).unwrap();
        assert_eq!(mvrbm_project(handle, bad.as_ptr(), out.as_mut_ptr(), 4), MvrbmStatus::Parse);
        assert!(last_error().contains("token 7"));
        mvrbm_model_free(handle);
    }
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let mut handle = ptr::null_mut();
    unsafe {
        let missing = CString::new(dir.path().join("none.txt").to_str().unwrap()).unwrap();
        assert_eq!(mvrbm_model_load(missing.as_ptr(), &mut handle), MvrbmStatus::Io);
        assert!(handle.is_null());

        let old = dir.path().join("old.txt");
        std::fs::write(&old, "mvrbm-model 0\n").unwrap();
        let old = CString::new(old.to_str().unwrap()).unwrap();
        assert_eq!(mvrbm_model_load(old.as_ptr(), &mut handle), MvrbmStatus::Version);
        assert!(last_error().contains("version 0"));

        assert_eq!(mvrbm_model_load(ptr::null(), &mut handle), MvrbmStatus::NullPointer);
        assert_eq!(mvrbm_model_num_hidden(ptr::null()), 0);
        mvrbm_model_free(ptr::null_mut());
    }
}

#[test]
fn symmetric_kl_matches_library() {
    let p = [0.75, 0.2];
    let q = [0.25, 0.2];
    let mut d = 0.0;
    unsafe {
        assert_eq!(mvrbm_symmetric_kl(p.as_ptr(), q.as_ptr(), 2, &mut d), MvrbmStatus::Ok);
        assert_eq!(mvrbm_symmetric_kl(p.as_ptr(), ptr::null(), 2, &mut d), MvrbmStatus::NullPointer);
    }
    assert!((d - 0.5 * 3f64.ln()).abs() < 1e-12);
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/mvrbm.h")).unwrap();
    for name in ["mvrbm_model_load", "mvrbm_model_free", "mvrbm_project", "mvrbm_symmetric_kl", "MVRBM_STATUS_OK"] {
        assert!(header.contains(name), "{name}");
    }
}
