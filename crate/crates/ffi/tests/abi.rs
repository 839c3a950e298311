// SPDX-License-Identifier: Apache-2.0

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use switchsynth_ffi::*;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/configs")
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ss_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy() -> *mut SsArtifact {
    let mut art = ptr::null_mut();
    let path = cstr(&configs().join("toy1d.json"));
    assert_eq!(
        unsafe { ss_artifact_synthesize(path.as_ptr(), &mut art) },
        SsStatus::Ok
    );
    art
}

#[test]
fn synthesize_query_and_free() {
    let art = toy();
    unsafe {
        assert_eq!(ss_artifact_dim(art), 1);
        let n = ss_artifact_ring_count(art);
        assert!(n >= 3);
        let mut ext = vec![0.0; n];
        assert_eq!(
            ss_artifact_extensions(art, ext.as_mut_ptr(), n),
            SsStatus::Ok
        );
        assert_eq!(&ext[..3], &[2.0, 4.0, 8.0]);
        assert_eq!(ss_artifact_total_extension(art), ext.iter().sum::<f64>());

        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(
            ss_artifact_outer_box(art, &mut lo, &mut hi, 1),
            SsStatus::Ok
        );
        assert_eq!(hi, 22.0);
        assert_eq!(lo, 18.0 - ext.iter().sum::<f64>());

        let (mut checks, mut failures) = (0, 1);
        assert_eq!(
            ss_artifact_verify(art, &mut checks, &mut failures),
            SsStatus::Ok
        );
        assert!(checks > 0);
        assert_eq!(failures, 0);
        ss_artifact_free(art);
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = cstr(&dir.path().join("toy.artifact.json"));
    let art = toy();
    unsafe {
        assert_eq!(ss_artifact_save(art, file.as_ptr()), SsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ss_artifact_load(file.as_ptr(), &mut back), SsStatus::Ok);
        assert_eq!(ss_artifact_ring_count(back), ss_artifact_ring_count(art));
        assert_eq!(
            ss_artifact_total_extension(back),
            ss_artifact_total_extension(art)
        );
        ss_artifact_free(back);
        ss_artifact_free(art);
    }
}

#[test]
fn simulate_reaches_objective() {
    let art = toy();
    unsafe {
        let x0 = [0.0];
        let mut traj = ptr::null_mut();
        assert_eq!(
            ss_simulate(art, x0.as_ptr(), 1, 40, ptr::null(), &mut traj),
            SsStatus::Ok
        );
        assert_eq!(ss_trajectory_len(traj), 41);
        assert_eq!(ss_trajectory_escape_step(traj), -1);
        let (mut x, mut ring) = (0.0, usize::MAX);
        assert_eq!(
            ss_trajectory_state(traj, 40, &mut x, 1, &mut ring),
            SsStatus::Ok
        );
        assert!((18.0..=22.0).contains(&x));
        assert_eq!(ring, 0);
        assert_eq!(
            ss_trajectory_state(traj, 41, &mut x, 1, ptr::null_mut()),
            SsStatus::IndexOutOfRange
        );
        ss_trajectory_free(traj);
        ss_artifact_free(art);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut art = ptr::null_mut();
        assert_eq!(
            ss_artifact_load(ptr::null(), &mut art),
            SsStatus::NullPointer
        );
        let missing = cstr(Path::new("/nonexistent/a.json"));
        assert_eq!(ss_artifact_load(missing.as_ptr(), &mut art), SsStatus::Io);
        assert!(last_error().contains("/nonexistent/a.json"));
        assert!(art.is_null());

        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(
            &bad,
            r#"{"system": {"discrete": {"maps": []}}, "split": [1]}"#,
        )
        .unwrap();
        let bad = cstr(&bad);
        assert_eq!(
            ss_artifact_synthesize(bad.as_ptr(), &mut art),
            SsStatus::Config
        );

        let a = toy();
        let x0 = [100.0];
        let mut traj = ptr::null_mut();
        assert_eq!(
            ss_simulate(a, x0.as_ptr(), 1, 10, ptr::null(), &mut traj),
            SsStatus::Domain
        );
        assert!(traj.is_null());
        let mut short: [f64; 0] = [];
        assert_eq!(
            ss_artifact_extensions(a, short.as_mut_ptr(), 0),
            SsStatus::BufferTooSmall
        );
        ss_artifact_free(a);

        ss_artifact_free(ptr::null_mut());
        ss_trajectory_free(ptr::null_mut());
        assert_eq!(ss_artifact_ring_count(ptr::null()), 0);
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(ss_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/switchsynth.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "ss_artifact_synthesize",
        "ss_simulate",
        "ss_last_error",
        "SS_STATUS_OK",
        "typedef struct SsArtifact",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // compile check when a C compiler is around
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"switchsynth.h\"\nint main(void) { SsArtifact *a = 0; return ss_artifact_ring_count(a) == 0 ? SS_STATUS_OK : 1; }\n",
    )
    .unwrap();
    match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success(), "header does not compile"),
        Err(_) => eprintln!("no C compiler; skipped syntax check"),
    }
}
