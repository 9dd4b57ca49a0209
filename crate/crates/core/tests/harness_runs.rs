use drlc_core::agent::DdpgAgent;
use drlc_core::harness::{load_config, moving_average, presets, run_experiment, Experiment};

fn tiny(name: &str) -> drlc_core::harness::ExperimentConfig {
    let mut c = presets::desk(presets::by_name(name).unwrap());
    c.episodes = 3;
    c.agent.batch_size = 16;
    c.trace_episodes = vec![0, 2];
    c
}

#[test]
fn every_preset_runs_a_few_episodes() {
    for name in ["example1", "example2", "example3", "example4"] {
        let log = run_experiment(tiny(name)).unwrap();
        assert_eq!(log.episodes().len(), 3, "{name}");
        assert!(log.total_rewards().iter().all(|r| r.is_finite()), "{name}");
    }
}

#[test]
fn outputs_reload() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny("example2");
    let mut exp = Experiment::new(config.clone()).unwrap();
    exp.run().unwrap();
    exp.write_outputs(dir.path()).unwrap();

    assert_eq!(
        load_config(&dir.path().join("config.toml")).unwrap(),
        config
    );

    let mut rdr = csv::Reader::from_path(dir.path().join("episodes.csv")).unwrap();
    let rows: Vec<(usize, f64, usize)> = rdr.deserialize().map(|r| r.unwrap()).collect();
    let logged = exp.log().episodes();
    assert_eq!(rows.len(), logged.len());
    for (row, e) in rows.iter().zip(logged) {
        assert_eq!(*row, (e.episode, e.total_reward, e.steps));
    }

    let trace = std::fs::read_to_string(dir.path().join("trace_2.csv")).unwrap();
    assert!(trace.starts_with("t,setpoint1,setpoint2,y1,y2,a1,a2,reward\n"));
    assert!(dir.path().join("trace_0.dat").exists());
    let dat = std::fs::read_to_string(dir.path().join("episodes.dat")).unwrap();
    let ma = moving_average(&exp.log().total_rewards(), 21).unwrap();
    let last: f64 = dat
        .lines()
        .last()
        .unwrap()
        .split_whitespace()
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(last, *ma.last().unwrap());

    let text = std::fs::read_to_string(dir.path().join("checkpoint.txt")).unwrap();
    let agent = DdpgAgent::from_checkpoint(&text, 0).unwrap();
    let state = [1.0, 1.5, 0.2, -0.3];
    assert_eq!(
        agent.policy(&state).unwrap(),
        exp.agent.policy(&state).unwrap()
    );
}

#[test]
fn same_seed_same_log() {
    let a = run_experiment(tiny("example1")).unwrap();
    let b = run_experiment(tiny("example1")).unwrap();
    assert_eq!(a.total_rewards(), b.total_rewards());
    assert_eq!(a.traces(), b.traces());
    let mut other = tiny("example1");
    other.seed = 1;
    assert_ne!(
        run_experiment(other).unwrap().total_rewards(),
        a.total_rewards()
    );
}
