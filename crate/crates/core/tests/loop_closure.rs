use lcfuse_core::geo::{attitude_to_quaternion, EarthOptions};
use lcfuse_core::ins::{mechanize_step, position_difference, MechState};
use lcfuse_core::scenario::downtown_tour;
use lcfuse_core::sensors::{gen_imu, stream_rng, streams, BiasState, GaussMarkovParams};

#[test]
fn zero_error_stream_reproduces_truth() {
    let traj = downtown_tour(43.6452, -79.3806, 1.5, 100.0).generate().unwrap();
    let imu = gen_imu(&traj, &GaussMarkovParams::ideal(), 100.0, None, EarthOptions::default(), &mut stream_rng(1, streams::IMU)).unwrap();
    // Start inside the drive so the window covers acceleration and turns.
    for start in [0usize, 6_000, 14_000, 40_000] {
        let e0 = traj.epochs()[start];
        let mut s = MechState { pos: e0.pos, v_l: e0.v_l, q: attitude_to_quaternion(&e0.att), t: e0.t };
        let mut worst = 0.0f64;
        for k in start..start + 6_000 {
            let m = &imu.samples[k];
            s = mechanize_step(&s, m, &BiasState::zero(), m.t - s.t).unwrap();
            let truth = &traj.epochs()[k + 1];
            worst = worst.max(position_difference(&truth.pos, &s.pos).norm());
        }
        println!("start {start}: max error over 60 s {worst:.3e} m");
        assert!(worst < 0.05, "start {start}: {worst}");
    }
}
