use proptest::prelude::*;

use super::*;
use crate::datamodel::RoadGeometry;

const W: f64 = 3.7;

fn road() -> RoadGeometry {
    RoadGeometry::new(3, W).unwrap()
}

fn center(lane: i32) -> f64 {
    (lane as f64 + 0.5) * W
}

fn straight(id: i64, lane: i32, x0: f64, v: f64, frames: std::ops::Range<i64>) -> Vec<VehicleState> {
    frames
        .map(|f| VehicleState {
            vehicle_id: id,
            frame: f,
            lane_id: lane,
            x_long: x0 + v * f as f64 * 0.1,
            x_lat: center(lane),
            v_long: v,
            v_lat: 0.0,
            theta: 0.0,
        })
        .collect()
}

/// Moves from `from` to `to` so that the lane id first changes at `cross`.
fn changing(id: i64, from: i32, to: i32, cross: i64, frames: std::ops::Range<i64>) -> Vec<VehicleState> {
    let dir = (to - from) as f64;
    frames
        .map(|f| {
            let x_lat = if f < cross {
                let s = ((f - (cross - 10)) as f64 / 10.0).clamp(0.0, 1.0);
                center(from) + dir * 0.45 * W * s
            } else {
                let s = ((f - cross) as f64 / 10.0).clamp(0.0, 1.0);
                center(to) - dir * 0.45 * W * (1.0 - s)
            };
            let lane_id = road().lane_of(x_lat).unwrap();
            VehicleState {
                vehicle_id: id,
                frame: f,
                lane_id,
                x_long: 25.0 * f as f64 * 0.1,
                x_lat,
                v_long: 25.0,
                v_lat: 0.0,
                theta: 0.0,
            }
        })
        .collect()
}

fn scene(states: Vec<VehicleState>) -> Scene {
    Scene::from_states(road(), states).unwrap()
}

#[test]
fn stationary_vehicle_has_only_speed_column() {
    let s = scene(straight(1, 1, 10.0, 0.0, 0..20).into_iter().map(|mut s| {
        s.v_long = 15.0;
        s
    }).collect());
    let f = extract_maneuver_features(&s, 1, 19).unwrap();
    for row in f.rows() {
        assert_eq!(row, &[0.0, 0.0, 0.0, 15.0, 0.0, 0.0]);
    }
}

#[test]
fn constant_speed_longitudinal_column() {
    let s = scene(straight(1, 0, 0.0, 20.0, 0..30));
    let f = extract_maneuver_features(&s, 1, 25).unwrap();
    let col = f.column(1);
    for (k, v) in col.iter().enumerate() {
        let want = (k as f64 - 19.0) * 2.0;
        assert!((v - want).abs() < 1e-9, "row {}: {} vs {}", k, v, want);
    }
    assert_eq!(col[19], 0.0);
    assert_eq!(f.column(0)[19], 0.0);
}

#[test]
fn dividing_line_gives_half_lane_offset() {
    let mut states = straight(1, 1, 0.0, 20.0, 0..20);
    for s in states.iter_mut() {
        s.x_lat = W; // divider between lanes 0 and 1
    }
    let f = extract_maneuver_features(&scene(states), 1, 19).unwrap();
    for v in f.column(2) {
        assert!((v.abs() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn insufficient_history_is_an_error() {
    let s = scene(straight(1, 0, 0.0, 20.0, 5..30));
    assert!(extract_maneuver_features(&s, 1, 20).is_err());
    assert!(extract_maneuver_features(&s, 1, 24).is_ok());
}

#[test]
fn solitary_target_gets_eight_virtual_slots() {
    let s = scene(straight(1, 1, 0.0, 22.0, 0..1));
    let slots = select_neighbors(&s, 1, 0).unwrap();
    assert!(slots.0.iter().all(|s| *s == Slot::Virtual));
    for (kind, slot) in slots.iter() {
        let c = connection_feature(&s, 1, kind, slot, 0).unwrap();
        assert_eq!(c[0].abs(), 100.0);
        assert_eq!(c[4], 22.0);
        assert_eq!(c[5], 0.0);
    }
}

fn at(id: i64, lane: i32, x: f64) -> VehicleState {
    VehicleState {
        vehicle_id: id,
        frame: 0,
        lane_id: lane,
        x_long: x,
        x_lat: center(lane),
        v_long: 20.0,
        v_lat: 0.0,
        theta: 0.0,
    }
}

#[test]
fn grid_scene_matches_hand_enumeration() {
    // Target 100 in the middle lane at x = 0 with nine surrounding vehicles.
    let s = scene(vec![
        at(100, 1, 0.0),
        at(1, 1, 20.0),
        at(2, 1, -15.0),
        at(3, 1, 50.0),
        at(4, 0, 5.0),
        at(5, 0, 30.0),
        at(6, 0, -25.0),
        at(7, 0, 60.0),
        at(8, 2, -3.0),
        at(9, 2, -40.0),
    ]);
    let slots = select_neighbors(&s, 100, 0).unwrap();
    use Slot::*;
    assert_eq!(
        slots.0,
        [
            Vehicle(1),
            Vehicle(2),
            Vehicle(4),
            Vehicle(5),
            Vehicle(6),
            Vehicle(8),
            Virtual,
            Vehicle(9)
        ]
    );
    // Repeated calls agree.
    assert_eq!(select_neighbors(&s, 100, 0).unwrap(), slots);
}

#[test]
fn tie_breaks_on_smaller_id() {
    let s = scene(vec![at(100, 1, 0.0), at(12, 0, 7.0), at(11, 0, -7.0)]);
    let slots = select_neighbors(&s, 100, 0).unwrap();
    assert_eq!(slots.get(SlotKind::LeftClosest), Slot::Vehicle(11));
    assert_eq!(slots.get(SlotKind::LeftFront), Slot::Vehicle(12));
    assert_eq!(slots.get(SlotKind::LeftRear), Slot::Virtual);
}

#[test]
fn edge_lane_sides_are_virtual() {
    let s = scene(vec![at(100, 0, 0.0), at(1, 1, 3.0)]);
    let slots = select_neighbors(&s, 100, 0).unwrap();
    for k in [SlotKind::LeftClosest, SlotKind::LeftFront, SlotKind::LeftRear] {
        assert_eq!(slots.get(k), Slot::Virtual);
    }
    assert_eq!(slots.get(SlotKind::RightClosest), Slot::Vehicle(1));
}

#[test]
fn connection_feature_examples() {
    let mut n = at(2, 1, 30.0);
    n.v_long = 25.0;
    let mut me = at(1, 1, 0.0);
    me.v_long = 25.0;
    let s = scene(vec![me, n]);
    let c = connection_feature(&s, 1, SlotKind::Front, Slot::Vehicle(2), 0).unwrap();
    assert_eq!(c, [30.0, 0.0, 25.0, 0.0, 25.0, 0.0]);

    let mut me = at(1, 1, 0.0);
    me.v_lat = 0.3;
    me.theta = 0.015;
    let s = scene(vec![me, at(2, 1, 0.0)]);
    let c = connection_feature(&s, 1, SlotKind::Front, Slot::Virtual, 0).unwrap();
    assert_eq!(c, [100.0, 0.0, 20.0, 0.3, 20.0, 0.0]);
    let c = connection_feature(&s, 1, SlotKind::LeftRear, Slot::Virtual, 0).unwrap();
    assert_eq!(c[..2], [-100.0, -W]);
    let c = connection_feature(&s, 1, SlotKind::Front, Slot::Vehicle(2), 0).unwrap();
    assert_eq!(c[..2], [0.0, 0.0]);
}

#[test]
fn label_left_crossing_at_32() {
    let s = scene(changing(1, 2, 1, 132, 0..200));
    assert_eq!(
        label_sample(&s, 1, 100).unwrap(),
        (Behavior::ChangeLeft, Ttlc::Seconds(3.2))
    );
}

#[test]
fn label_boundaries() {
    let s = scene(changing(1, 0, 1, 140, 0..200));
    assert_eq!(
        label_sample(&s, 1, 100).unwrap(),
        (Behavior::ChangeRight, Ttlc::Seconds(4.0))
    );
    assert_eq!(label_sample(&s, 1, 99).unwrap(), (Behavior::LaneKeep, Ttlc::Never));
    let keep = scene(straight(1, 1, 0.0, 20.0, 0..60));
    assert_eq!(label_sample(&keep, 1, 10).unwrap(), (Behavior::LaneKeep, Ttlc::Never));
    assert!(label_sample(&keep, 1, 30).is_err());
}

#[test]
fn label_uses_first_of_several_crossings() {
    let mut states = changing(1, 1, 0, 110, 0..120);
    states.extend(changing(1, 0, 1, 125, 120..200));
    let s = scene(states);
    assert_eq!(
        label_sample(&s, 1, 100).unwrap(),
        (Behavior::ChangeLeft, Ttlc::Seconds(1.0))
    );
}

#[test]
fn lane_change_with_long_history_gives_eighty_samples() {
    // 12 s of history before the crossing at frame 120, 6 s after.
    let s = scene(changing(1, 1, 2, 120, 0..180));
    let samples = build_samples(&s, 0, &SampleOptions { lk_events_per_lc: 0.0, seed: 0 }).unwrap();
    assert_eq!(samples.len(), 80);
    let ttlcs: Vec<f64> = samples.iter().map(|s| s.ttlc.seconds().unwrap()).collect();
    assert_eq!(ttlcs[0], 8.0);
    assert_eq!(*ttlcs.last().unwrap(), 0.1);
    assert!(samples.iter().all(|s| s.event_id == samples[0].event_id));
}

#[test]
fn early_lane_change_emits_only_full_history_frames() {
    let s = scene(changing(1, 1, 2, 10, 0..100));
    let samples = build_samples(&s, 0, &SampleOptions { lk_events_per_lc: 0.0, seed: 0 }).unwrap();
    assert!(samples.iter().all(|s| !s.ttlc.is_finite()));

    let s = scene(changing(1, 1, 2, 40, 0..100));
    let samples = build_samples(&s, 0, &SampleOptions { lk_events_per_lc: 0.0, seed: 0 }).unwrap();
    assert_eq!(samples.len(), 21); // decision frames 19..=39
    assert!(samples.iter().all(|s| s.frame >= 19));
}

#[test]
fn lane_keep_tracks_are_drawn_per_event() {
    let mut states = changing(1, 1, 2, 120, 0..180);
    states.extend(straight(2, 0, 500.0, 20.0, 0..400));
    let s = scene(states);
    let samples = build_samples(&s, 3, &SampleOptions::default()).unwrap();
    let lk: Vec<_> = samples.iter().filter(|s| s.ttlc == Ttlc::Never).collect();
    assert_eq!(lk.len(), 80);
    assert!(lk.iter().all(|s| s.label == Behavior::LaneKeep && s.vehicle_id == 2));
    assert!(samples.iter().all(|s| s.scene_id == 3 && s.event_id >> 32 == 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn labels_flip_exactly_at_four_seconds(cross in 100i64..160, right in any::<bool>()) {
        let (from, to) = if right { (1, 2) } else { (1, 0) };
        let s = scene(changing(1, from, to, cross, 0..cross + 60));
        let samples = build_samples(&s, 0, &SampleOptions { lk_events_per_lc: 0.0, seed: 0 }).unwrap();
        prop_assert!(!samples.is_empty());
        for smp in samples {
            let ttlc = smp.ttlc.seconds().unwrap();
            prop_assert_eq!(smp.label.is_lane_change(), ttlc <= 4.0 + 1e-12);
        }
    }

    #[test]
    fn longitudinal_shift_changes_nothing(k in -1000i64..1000) {
        // Positions on a dyadic grid keep the shifted arithmetic exact.
        let shift = k as f64 * 64.0;
        let mut states = changing(1, 1, 0, 110, 0..170);
        states.extend(straight(2, 0, 40.0, 18.0, 0..170));
        states.extend(straight(3, 1, -30.0, 26.0, 0..170));
        states.extend(straight(4, 2, 12.0, 30.0, 0..170));
        for s in states.iter_mut() {
            s.x_long = (s.x_long * 1024.0).round() / 1024.0;
        }
        let shifted: Vec<_> = states
            .iter()
            .map(|s| VehicleState { x_long: s.x_long + shift, ..*s })
            .collect();
        let a = build_samples(&scene(states), 0, &SampleOptions::default()).unwrap();
        let b = build_samples(&scene(shifted), 0, &SampleOptions::default()).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.label, y.label);
            prop_assert_eq!(x.ttlc, y.ttlc);
            let bits = |s: &LabeledSample| -> Vec<u64> {
                s.target.flat()
                    .chain(s.neighbors.iter().flat_map(|n| n.features.flat().chain(n.connection)))
                    .map(f64::to_bits)
                    .collect()
            };
            prop_assert_eq!(bits(x), bits(y));
        }
    }
}
