use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ngsim::{difference, moving_average};
use super::*;

fn road() -> RoadGeometry {
    RoadGeometry::new(3, 3.7).unwrap()
}

fn opts() -> NgsimOptions {
    NgsimOptions::new(road())
}

#[test]
fn road_geometry_lanes_and_dividers() {
    let r = road();
    assert_eq!(r.lane_center(0), 1.85);
    assert_eq!(r.lane_of(0.0), Some(0));
    assert_eq!(r.lane_of(3.7), Some(1));
    assert_eq!(r.lane_of(11.2), None);
    assert_eq!(r.lane_of(-0.01), None);
    assert!(RoadGeometry::new(1, 3.7).is_err());
    assert!(RoadGeometry::new(2, 0.0).is_err());
}

#[test]
fn ngsim_three_rows_derive_lateral_velocity() {
    let text = "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n\
                7,100,5.0,10.0,20.0,2\n\
                7,101,5.1,12.0,20.0,2\n\
                7,102,5.2,14.0,20.0,2\n";
    let scene = parse_ngsim(text.as_bytes(), &opts()).unwrap();
    assert_eq!(scene.vehicle_count(), 1);
    let track = scene.track(7).unwrap();
    assert_eq!(track.len(), 3);
    for s in track {
        assert!((s.v_lat - 1.0).abs() < 1e-9, "v_lat {}", s.v_lat);
        assert_eq!(s.lane_id, 1);
        assert!((s.theta - (1.0f64).atan2(20.0)).abs() < 1e-9);
    }
    assert_eq!(track[1].x_long, 12.0);
    assert_eq!(track[2].x_lat, 5.2);
}

#[test]
fn ngsim_unknown_lane_is_rejected() {
    let text = "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n1,0,5.0,0.0,20.0,9\n";
    assert!(matches!(
        parse_ngsim(text.as_bytes(), &opts()),
        Err(Error::Validation(_))
    ));
}

#[test]
fn ngsim_empty_file_is_empty_scene() {
    let scene = parse_ngsim("".as_bytes(), &opts()).unwrap();
    assert!(scene.is_empty());
    assert_eq!(scene.vehicle_count(), 0);
}

#[test]
fn ngsim_missing_column_is_named() {
    let text = "Vehicle_ID,Frame_ID,Local_X,Local_Y,Lane_ID\n1,0,5.0,0.0,2\n";
    match parse_ngsim(text.as_bytes(), &opts()) {
        Err(Error::MissingColumn(c)) => assert_eq!(c, "v_Vel"),
        other => panic!("{:?}", other),
    }
}

#[test]
fn ngsim_gap_splits_trajectory() {
    let text = "Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n\
                3,0,5.0,0.0,10.0,2\n3,1,5.0,1.0,10.0,2\n3,5,5.0,5.0,10.0,2\n3,6,5.0,6.0,10.0,2\n";
    let scene = parse_ngsim(text.as_bytes(), &opts()).unwrap();
    assert_eq!(scene.vehicle_count(), 2);
    assert_eq!(scene.track(3).unwrap().len(), 2);
    assert_eq!(scene.track(4).unwrap()[0].frame, 5);
}

#[test]
fn ngsim_column_map_and_delimiter() {
    let text = "id;t;lat;lon;speed;lane\n1;0;2.0;0.0;10.0;1\n1;1;2.0;1.0;10.0;1\n";
    let mut o = opts();
    o.delimiter = b';';
    o.columns =
        NgsimColumns::parse("vehicle_id=id,frame=t,x_lat=lat,x_long=lon,v_long=speed,lane_id=lane")
            .unwrap();
    let scene = parse_ngsim(text.as_bytes(), &o).unwrap();
    assert_eq!(scene.track(1).unwrap()[1].x_long, 1.0);
    assert!(NgsimColumns::parse("speed=v").is_err());
}

#[test]
fn derived_velocity_matches_differencing_formula() {
    // Ingest of a synthetic track keeps positions exactly and reproduces the
    // difference-then-average formula.
    let xs: Vec<f64> = (0..30).map(|i| 5.0 + 0.03 * (i as f64 * 0.4).sin()).collect();
    let mut text = String::from("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Vel,Lane_ID\n");
    for (i, x) in xs.iter().enumerate() {
        text += &format!("1,{},{},{},25.0,2\n", i, x, 2.5 * i as f64);
    }
    let scene = parse_ngsim(text.as_bytes(), &opts()).unwrap();
    let want = moving_average(&difference(&xs), 5);
    for (s, (x, w)) in scene.track(1).unwrap().iter().zip(xs.iter().zip(&want)) {
        assert_eq!(s.x_lat, *x);
        assert!((s.v_lat - w).abs() < 1e-9);
    }
}

#[test]
fn scene_rejects_lane_mismatch_and_duplicates() {
    let s = VehicleState {
        vehicle_id: 1,
        frame: 0,
        lane_id: 0,
        x_long: 0.0,
        x_lat: 1.85,
        v_long: 20.0,
        v_lat: 0.0,
        theta: 0.0,
    };
    assert!(Scene::from_states(road(), [s, s]).is_err());
    assert!(Scene::from_states(road(), [VehicleState { lane_id: 1, ..s }]).is_err());
    assert!(Scene::from_states(road(), [VehicleState { theta: 1.6, ..s }]).is_err());
    assert!(Scene::from_states(road(), [s, VehicleState { frame: 2, ..s }]).is_err());
    let ok = Scene::from_states(road(), [s, VehicleState { frame: 1, ..s }]).unwrap();
    for st in ok.states() {
        assert_eq!(ok.road().lane_of(st.x_lat), Some(st.lane_id));
    }
    assert_eq!(ok.vehicles_at(1).len(), 1);
    assert!(ok.state(1, 2).is_none());
}

fn random_sequence(rng: &mut ChaCha8Rng) -> ManeuverSequence {
    let mut s = ManeuverSequence::zeros();
    for row in s.0.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-50.0..50.0);
        }
    }
    s
}

pub(crate) fn random_sample(rng: &mut ChaCha8Rng) -> LabeledSample {
    let label = Behavior::from_index(rng.gen_range(0..3)).unwrap();
    let ttlc = if rng.gen_bool(0.3) {
        Ttlc::Never
    } else {
        Ttlc::from_frames(rng.gen_range(1..=80))
    };
    let neighbors = std::array::from_fn(|_| NeighborEntry {
        vehicle_id: if rng.gen_bool(0.5) {
            Some(rng.gen_range(-5..1000))
        } else {
            None
        },
        features: random_sequence(rng),
        connection: std::array::from_fn(|_| rng.gen_range(-100.0..100.0)),
    });
    LabeledSample {
        scene_id: rng.gen(),
        event_id: rng.gen(),
        vehicle_id: rng.gen(),
        frame: rng.gen_range(0..100_000),
        label,
        ttlc,
        target: random_sequence(rng),
        neighbors,
    }
}

fn encode(samples: &[LabeledSample]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(samples, &mut buf).unwrap();
    buf
}

#[test]
fn dataset_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples: Vec<_> = (0..100).map(|_| random_sample(&mut rng)).collect();
    let back = read_dataset(encode(&samples).as_slice()).unwrap();
    assert_eq!(back, samples);
}

#[test]
fn dataset_empty_round_trip() {
    let back = read_dataset(encode(&[]).as_slice()).unwrap();
    assert!(back.is_empty());
}

#[test]
fn dataset_truncated_is_integrity_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<_> = (0..3).map(|_| random_sample(&mut rng)).collect();
    let buf = encode(&samples);
    for cut in [buf.len() - 1, buf.len() / 2, 40] {
        assert!(matches!(
            read_dataset(&buf[..cut]),
            Err(Error::Integrity(_))
        ));
    }
}

#[test]
fn dataset_corruption_and_version() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<_> = (0..2).map(|_| random_sample(&mut rng)).collect();
    let mut buf = encode(&samples);
    buf[200] ^= 0x40;
    assert!(matches!(read_dataset(buf.as_slice()), Err(Error::Integrity(_))));

    let mut buf = encode(&samples);
    buf[4] = 9;
    assert!(matches!(
        read_dataset(buf.as_slice()),
        Err(Error::Version { expected: 1, found: 9 })
    ));
}

#[test]
fn scene_csv_round_trip() {
    let states: Vec<VehicleState> = (0..5)
        .map(|f| VehicleState {
            vehicle_id: 2,
            frame: f,
            lane_id: 2,
            x_long: 1.0 / 3.0 + f as f64,
            x_lat: 9.25 + 0.01 * f as f64,
            v_long: 31.123456789,
            v_lat: 0.1,
            theta: 0.003,
        })
        .collect();
    let scene = Scene::from_states(road(), states).unwrap();
    let mut buf = Vec::new();
    write_scenes(&[(4, scene.clone())], &mut buf).unwrap();
    let back = read_scenes(buf.as_slice()).unwrap();
    assert_eq!(back, vec![(4, scene)]);
}
