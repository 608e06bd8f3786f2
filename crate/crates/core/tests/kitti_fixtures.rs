use std::path::{Path, PathBuf};

use navfuse::kitti::{load_records, load_sequence, KittiError};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/kitti").join(name)
}

#[test]
fn valid_sequence_fields() {
    let seq = load_records(&fixture("valid")).unwrap();
    assert_eq!(seq.records.len(), 3);
    assert_eq!(seq.times[0], 0.0);
    assert!((seq.times[1] - 0.1).abs() < 1e-9);
    assert!((seq.times[2] - 1.05).abs() < 1e-9);

    let r = &seq.records[0];
    assert_eq!((r.lat, r.lon, r.alt), (49.0, 8.43, 115.0));
    assert_eq!((r.roll, r.pitch, r.yaw), (0.0215, -0.0131, 1.2566));
    assert_eq!((r.vn, r.ve, r.vf, r.vl, r.vu), (3.9112, 8.8107, 9.6433, -0.0227, 0.0542));
    assert_eq!((r.ax, r.ay, r.az), (-0.1312, 0.3021, 9.8017));
    assert_eq!((r.af, r.al, r.au), (-0.0852, 0.3317, 9.7952));
    assert_eq!((r.wx, r.wy, r.wz), (-0.0105, 0.0047, 0.0123));
    assert_eq!((r.wf, r.wl, r.wu), (-0.0098, 0.0061, 0.0119));
    assert_eq!((r.pos_accuracy, r.vel_accuracy), (0.3532, 0.0707));
    assert_eq!(
        (r.navstat, r.numsats, r.posmode, r.velmode, r.orimode),
        (4.0, 10.0, 5.0, 5.0, 6.0)
    );
    assert_eq!(seq.records[2].numsats, 11.0);
    assert_eq!(seq.records[1].lat, 49.0000072);
}

#[test]
fn valid_sequence_streams() {
    let (imu, gnss) = load_sequence(&fixture("valid")).unwrap();
    assert_eq!(imu.len(), 3);
    assert_eq!(imu[1].gyro.z, 0.0127);
    assert_eq!(imu[1].accel.x, -0.0688);
    // Records at 0.0 s and 1.05 s open the two whole-second buckets.
    assert_eq!(gnss.len(), 2);
    assert!((gnss[1].t - 1.05).abs() < 1e-9);
    assert_eq!(gnss[0].lat, 49.0_f64.to_radians());
    assert_eq!(gnss[0].alt, 115.0);
}

#[test]
fn empty_record_is_structured() {
    match load_records(&fixture("empty_record")) {
        Err(KittiError::MalformedRecord { context, reason }) => {
            assert!(context.ends_with("0000000001.txt"), "{context}");
            assert!(reason.contains("found 0"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn short_record_names_field_count() {
    match load_records(&fixture("short_record")) {
        Err(KittiError::MalformedRecord { reason, .. }) => {
            assert_eq!(reason, "expected 30 fields, found 29");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_timestamps() {
    assert!(matches!(
        load_records(&fixture("missing_timestamps")),
        Err(KittiError::MissingTimestamps(p)) if p.ends_with("oxts/timestamps.txt")
    ));
}

#[test]
fn count_mismatch() {
    assert!(matches!(
        load_records(&fixture("count_mismatch")),
        Err(KittiError::RecordCountMismatch { data_files: 3, timestamps: 2 })
    ));
}

#[test]
fn bad_timestamp_line() {
    assert!(matches!(
        load_records(&fixture("bad_timestamp")),
        Err(KittiError::BadTimestamp { line: 2, .. })
    ));
}

#[test]
fn non_monotonic_timestamps() {
    assert!(matches!(
        load_records(&fixture("non_monotonic")),
        Err(KittiError::NonMonotonicTime { index: 2 })
    ));
}

#[test]
fn missing_directory() {
    assert!(matches!(
        load_records(&fixture("does_not_exist")),
        Err(KittiError::MissingTimestamps(_))
    ));
}
