use dvnn::artifacts::*;
use dvnn_core::bench::{SliceField, SliceGrid};
use dvnn_core::geometry::{Domain, SampleSet};
use dvnn_core::networks::init_glorot;
use dvnn_core::rng::{stream, Stream};
use dvnn_core::solver::{HistoryRow, Phase};

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.csv");
    let mut net = init_glorot(&[3, 20, 20, 20, 20, 20, 3], &mut stream(3, Stream::InitPsi)).unwrap();
    net.flat_mut()[0] = 1.0 / 3.0;
    net.flat_mut()[1] = -2.5e-300;
    write_checkpoint(&path, &net).unwrap();
    let back = read_checkpoint(&path).unwrap();
    assert_eq!(back, net);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("dims,3,20,20,20,20,20,3\n0,"));
}

#[test]
fn malformed_checkpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    for text in ["", "layers,3,1\n0,1\n", "dims,3,1\n0,1\n1,2\n", "dims,3,1\n0,1\n2,2\n3,1\n4,1\n", "dims,3,1\n0,x\n"] {
        std::fs::write(&path, text).unwrap();
        assert!(read_checkpoint(&path).is_err(), "{text:?}");
    }
    assert!(read_checkpoint(&dir.path().join("missing.csv")).is_err());
}

#[test]
fn slice_round_trip_keeps_masked_cells() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("slice.csv");
    let grid = SliceGrid { n: 11, nodes: 8 };
    let field = SliceField::from_fn(Domain::UnitBall, &grid, |x| x[0] - 2.0 * x[1]);
    assert!(field.values.iter().any(Option::is_none));
    write_slice(&path, &field).unwrap();
    assert_eq!(read_slice(&path).unwrap(), field);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 12);
    assert_eq!((header[0], header[1], header[6], header[11]), ("x2", "-1", "0", "1"));
    // The corner row of the ball slice holds only its centre point.
    let first = lines.next().unwrap();
    assert_eq!(first, "-1,,,,,,2,,,,,");
}

#[test]
fn samples_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let s = SampleSet::draw(Domain::Cube, 50, 20, 4);
    write_samples(dir.path(), &s).unwrap();
    assert_eq!(read_samples(dir.path(), Domain::Cube).unwrap(), s);
    let head = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    assert!(head.starts_with("x,y,z,nx,ny,nz\n"));
}

#[test]
fn history_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.csv");
    let rows = vec![
        HistoryRow { epoch: 0, phase: Phase::Adam, loss: 1.5, grad_norm: 2.0, step_size: 0.1 },
        HistoryRow { epoch: 1, phase: Phase::SsBfgs, loss: 0.25, grad_norm: 1e-3, step_size: 1.0 },
    ];
    write_history(&path, &rows).unwrap();
    assert_eq!(read_history(&path).unwrap(), rows);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("epoch,phase,loss,grad_norm,step_size\n0,adam,"));
    write_history(&path, &[]).unwrap();
    assert!(read_history(&path).unwrap().is_empty());
}

#[test]
fn errors_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("errors.csv");
    let rows = vec![
        ErrorRow {
            example: "1i".into(),
            method: "DVNN".into(),
            p: Some(1.1),
            seed: 0,
            e_sigma: Some(2.4e-3),
            e_u: Some(6.2e-3),
            e: Some(1e-20),
            e2: Some(1e-3),
            e1: Some(2e-3),
            slice_deviation: None,
            wall_time: Some(12.5),
        },
        ErrorRow {
            example: "3".into(),
            method: "DVNN".into(),
            p: None,
            seed: 1,
            e_sigma: None,
            e_u: None,
            e: Some(5e-3),
            e2: Some(1e-2),
            e1: Some(8e-3),
            slice_deviation: None,
            wall_time: None,
        },
    ];
    write_errors(&path, &rows).unwrap();
    assert_eq!(read_errors(&path).unwrap(), rows);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("example,method,p,seed,e_sigma,e_u,e,e2,e1,slice_deviation,wall_time\n"));
}
