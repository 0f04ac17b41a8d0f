use dmpscale::dmp::{self, DmpHyperparams, DmpModel};
use dmpscale::metrics::{self, RunRecord};
use dmpscale::scaling::ExecutionLog;
use dmpscale::sim::{self, ForceDirection, ForceProfileSpec, RunConfig, SyntheticDemoSpec};
use dmpscale::trajectory::{KinematicMap, Obstacle, Trajectory};
use dmpscale::Error;

fn arc_demo(peak: f64) -> dmpscale::dmp::Demonstration {
    sim::make_demo(&SyntheticDemoSpec::ArcOverZ {
        y0: vec![0.0, 0.0, 0.8],
        g: vec![1.0, 0.2, 0.9],
        duration: 6.0,
        peak_height: peak,
        samples: 201,
        z_index: 2,
    })
    .unwrap()
}

#[test]
fn train_save_load_simulate_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let demo = arc_demo(0.2);
    let model = dmp::learn_weights(&demo, &DmpHyperparams::default()).unwrap();
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let model = DmpModel::load(&path).unwrap();

    let profile = ForceProfileSpec::Windowed {
        amplitude: 12.0,
        direction: ForceDirection::Opposing,
        window: [1.0, 2.5],
    };
    let config = RunConfig::default();
    let run = sim::simulate_transport(&model, demo.start(), demo.goal(), &[], &profile, &config).unwrap();
    assert!(run.summary.wall_time > run.summary.nominal_time);
    let end = run.log.rows.last().unwrap();
    assert_eq!(end.s, run.trajectory.duration());

    let log_path = dir.path().join("log.csv");
    run.log.save_csv(&log_path).unwrap();
    let back = ExecutionLog::load_csv(&log_path).unwrap();
    assert_eq!(back.wall_time(), run.log.wall_time());
    let traj_path = dir.path().join("traj.csv");
    run.trajectory.save_csv(&traj_path).unwrap();
    let traj = Trajectory::load_csv(&traj_path).unwrap();

    let records = vec![
        RunRecord {
            mode: "DMP_V".into(),
            subject: "s1".into(),
            wall_time: back.wall_time(),
            trajectory: traj.clone(),
            user_height: 1.75,
        },
        RunRecord {
            mode: "DMP".into(),
            subject: "s1".into(),
            wall_time: run.summary.nominal_time,
            trajectory: traj,
            user_height: 1.75,
        },
    ];
    let kin = KinematicMap::FirstThree;
    let v = metrics::avg_execution_time(&records, "DMP_V").unwrap();
    let d = metrics::avg_execution_time(&records, "DMP").unwrap();
    assert!(v.mean > d.mean);
    let rv = metrics::height_ratio(&records, "DMP_V", &kin).unwrap();
    let rd = metrics::height_ratio(&records, "DMP", &kin).unwrap();
    assert_eq!(rv[0].ratio, rd[0].ratio);
}

#[test]
fn taller_demo_gives_higher_ratio_after_pipeline() {
    let kin = KinematicMap::FirstThree;
    let ratio = |peak: f64, h: f64| {
        let demo = arc_demo(peak);
        let model = dmp::learn_weights(&demo, &DmpHyperparams::default()).unwrap();
        let run = sim::simulate_transport(&model, demo.start(), demo.goal(), &[], &ForceProfileSpec::zero(), &RunConfig::default())
            .unwrap();
        metrics::z_average(&run.trajectory, &kin).unwrap() / h
    };
    assert!(ratio(0.4, 1.9) > ratio(0.1, 1.6));
}

#[test]
fn obstacle_on_path_blocks_execution() {
    let demo = arc_demo(0.2);
    let model = dmp::learn_weights(&demo, &DmpHyperparams::default()).unwrap();
    let scene = vec![Obstacle::Sphere {
        center: [1.0, 0.2, 0.9],
        radius: 0.03,
    }];
    let err = sim::simulate_transport(&model, demo.start(), demo.goal(), &scene, &ForceProfileSpec::zero(), &RunConfig::default())
        .unwrap_err();
    match err {
        Error::Collision(report) => assert_eq!(report.first.unwrap().obstacle, 0),
        other => panic!("unexpected {other}"),
    }
}
