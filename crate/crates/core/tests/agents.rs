use std::f64::consts::PI;

use hddpg_core::agents::{
    Agent, AgentConfig, DdpgCore, FlatAgent, HddpgAgent, Mode, CHECKPOINT_FORMAT,
};
use hddpg_core::maze::{
    high_reward, load_map, presets, MazeEnv, Point, SimParams, StartSpread, TraceEvent,
};
use hddpg_core::nn::MlpNet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two cells in a row: the robot at the west one, the goal in the east one.
const CORRIDOR: &str = "\
#####
#S.1#
#####
";

fn small_config() -> AgentConfig {
    AgentConfig {
        hidden: vec![8],
        batch_size: 4,
        buffer_capacity: 1000,
        ..AgentConfig::default()
    }
}

fn corridor_env(heading: f64) -> MazeEnv {
    let map = load_map(CORRIDOR).unwrap().with_start_heading(heading);
    let goal = map.target(1).unwrap();
    let spread = StartSpread {
        position: 0.0,
        random_heading: false,
    };
    MazeEnv::new(map, SimParams::default(), spread, goal)
}

/// Sets every weight to zero and the output biases to `bias`, so the net
/// emits the same head for any input.
fn constant(mut net: MlpNet, bias: &[f64]) -> MlpNet {
    let n = net.layers().len();
    for (i, layer) in net.layers_mut().iter_mut().enumerate() {
        layer.weights_mut().fill(0.0);
        layer.biases_mut().fill(0.0);
        if i + 1 == n {
            layer.biases_mut().copy_from_slice(bias);
        }
    }
    net
}

/// An HDDPG agent whose online actors are constant and whose training
/// starts only after `batch_size` transitions.
fn scripted_hddpg(config: AgentConfig, high: &[f64], low: &[f64]) -> HddpgAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agent = HddpgAgent::new(config, &mut rng).unwrap();
    let p = agent.config.core_params();
    let high_core = DdpgCore::from_nets(
        constant(agent.high.actor.clone(), high),
        agent.high.critic.clone(),
        p,
    );
    let low_core = DdpgCore::from_nets(
        constant(agent.low.actor.clone(), low),
        agent.low.critic.clone(),
        p,
    );
    agent.high = high_core.unwrap();
    agent.low = low_core.unwrap();
    agent
}

#[test]
fn zero_step_budget_gives_an_empty_episode() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut env = corridor_env(0.0);
    let mut agent = HddpgAgent::new(small_config(), &mut rng).unwrap();
    let out = agent
        .run_episode(&mut env, 0, Mode::Train, true, &mut rng)
        .unwrap();
    assert_eq!(
        (out.steps, out.subgoals, out.success, out.collision),
        (0, 0, false, false)
    );
    assert_eq!(out.score, 0.0);
    assert!(agent.high_buffer.is_empty() && agent.low_buffer.is_empty());
    assert_eq!(out.trace.len(), 1);
}

#[test]
fn instantly_reached_subgoal_yields_one_short_segment() {
    // no minimum distance and a zero high head: the subgoal is the robot's
    // own position, reached after the first step
    let config = AgentConfig {
        subgoal_min_distance: 0.0,
        ..small_config()
    };
    let mut agent = scripted_hddpg(config, &[0.0, 0.0], &[0.0, 0.0]);
    let mut env = corridor_env(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = agent
        .run_episode(&mut env, 1, Mode::Greedy, false, &mut rng)
        .unwrap();
    assert_eq!(out.subgoals, 1);
    assert!(
        agent.high_buffer.is_empty(),
        "greedy episodes store nothing"
    );

    let mut agent = scripted_hddpg(
        AgentConfig {
            subgoal_min_distance: 0.0,
            sigma0: 1e-12,
            ..small_config()
        },
        &[0.0, 0.0],
        &[0.0, 0.0],
    );
    let out = agent
        .run_episode(&mut env, 1, Mode::Train, false, &mut rng)
        .unwrap();
    assert_eq!(out.steps, 1);
    assert_eq!(agent.high_buffer.len(), 1);
    assert_eq!(agent.low_buffer.len(), 1);
    let record = agent.high_buffer.iter().next().unwrap();
    assert_eq!(record.len(), 1);
    assert!(!record.done);
    assert!((record.reward - 0.4 * 100.0).abs() < 1e-9);
    let low = agent.low_buffer.iter().next().unwrap();
    assert_eq!(low.reward, 100.0);
    assert!(low.done);
}

#[test]
fn collision_closes_the_segment_with_the_penalty() {
    // full speed straight west into the wall half a metre away, while the
    // subgoal lies east
    let mut agent = scripted_hddpg(
        AgentConfig {
            sigma0: 1e-12,
            ..small_config()
        },
        &[0.5, 0.0],
        &[30.0, 0.0],
    );
    let mut env = corridor_env(PI);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let out = agent
        .run_episode(&mut env, 100, Mode::Train, true, &mut rng)
        .unwrap();
    assert!(out.collision && !out.success);
    assert!(out.steps > 1 && out.steps < 20);
    assert_eq!(out.trace.last().unwrap().event, TraceEvent::Collision);
    assert_eq!(out.trace.last().unwrap().reward_low, -500.0);
    assert_eq!(out.trace.last().unwrap().reward_flat, -500.0);

    assert_eq!(agent.high_buffer.len(), 1);
    let record = agent.high_buffer.iter().next().unwrap();
    assert!(
        (record.subgoal[0] - (0.4 + 0.6 * 0.5f64.tanh())).abs() < 1e-6
            && record.subgoal[1].abs() < 1e-6,
        "{:?}",
        record.subgoal
    );
    assert!(record.done);
    assert_eq!(record.len(), out.steps);
    let expected = high_reward(true, false, out.low_reward_sum, 0.4);
    assert!((record.reward - expected).abs() < 1e-9);
    assert!((record.reward - (-500.0 + 0.4 * out.low_reward_sum)).abs() < 1e-9);
    let low: Vec<_> = agent.low_buffer.iter().collect();
    assert_eq!(low.len(), out.steps);
    assert!(low.last().unwrap().done);
    let rewards: Vec<f64> = low.iter().map(|t| t.reward).collect();
    assert!(
        low[..low.len() - 1]
            .iter()
            .all(|t| !t.done && t.reward == -8.0),
        "{rewards:?}"
    );
}

#[test]
fn greedy_episodes_repeat_under_the_same_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let map = presets::desk_map();
    let goal = map.target(1).unwrap();
    let mut env = MazeEnv::new(map, SimParams::default(), StartSpread::default(), goal);
    for mut agent in [
        Agent::Hierarchical(HddpgAgent::new(small_config(), &mut rng).unwrap()),
        Agent::Flat(FlatAgent::d4pg(small_config(), &mut rng).unwrap()),
    ] {
        let a = agent
            .run_episode(
                &mut env,
                60,
                Mode::Greedy,
                true,
                &mut ChaCha8Rng::seed_from_u64(9),
            )
            .unwrap();
        let b = agent
            .run_episode(
                &mut env,
                60,
                Mode::Greedy,
                true,
                &mut ChaCha8Rng::seed_from_u64(9),
            )
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn flat_agents_store_every_step_and_stay_finite() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let map = presets::desk_map();
    let goal = map.target(1).unwrap();
    let mut env = MazeEnv::new(map, SimParams::default(), StartSpread::default(), goal);
    for mut agent in [
        FlatAgent::ddpg(small_config(), &mut rng).unwrap(),
        FlatAgent::d4pg(small_config(), &mut rng).unwrap(),
    ] {
        let mut stored = 0;
        for _ in 0..3 {
            let out = agent
                .run_episode(&mut env, 40, Mode::Train, false, &mut rng)
                .unwrap();
            stored += out.steps;
            assert!(out.score.is_finite());
            assert_eq!(out.score, out.low_reward_sum);
            assert!(out.sigma[0] > 0.0);
        }
        assert_eq!(agent.buffer.len(), stored);
        assert!(agent.steps_trained() as usize == stored);
    }
}

#[test]
fn checkpoints_restore_behaviour() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let map = presets::desk_map();
    let goal = map.target(1).unwrap();
    let mut env = MazeEnv::new(map, SimParams::default(), StartSpread::default(), goal);
    let agents = [
        Agent::Flat(FlatAgent::ddpg(small_config(), &mut rng).unwrap()),
        Agent::Flat(FlatAgent::d4pg(small_config(), &mut rng).unwrap()),
        Agent::Hierarchical(HddpgAgent::new(small_config(), &mut rng).unwrap()),
    ];
    for (i, mut agent) in agents.into_iter().enumerate() {
        for _ in 0..2 {
            agent
                .run_episode(&mut env, 30, Mode::Train, false, &mut rng)
                .unwrap();
        }
        let path = dir.path().join(format!("agent_{i}"));
        agent.save(&path).unwrap();
        let manifest = std::fs::read_to_string(path.join("agent.json")).unwrap();
        assert!(manifest.contains(CHECKPOINT_FORMAT));
        let mut loaded = Agent::load(&path).unwrap();
        match (&agent, &loaded) {
            (Agent::Flat(a), Agent::Flat(b)) => {
                assert_eq!(a.noise, b.noise);
                assert_eq!(a.steps_trained(), b.steps_trained());
                assert_eq!(a.config, b.config);
            }
            (Agent::Hierarchical(a), Agent::Hierarchical(b)) => {
                assert_eq!((a.high_noise, a.low_noise), (b.high_noise, b.low_noise));
                assert_eq!(a.high.actor, b.high.actor);
                assert_eq!(a.low.target_critic, b.low.target_critic);
                assert_eq!(a.steps_trained(), b.steps_trained());
            }
            _ => panic!("algorithm changed across save/load"),
        }
        let a = agent
            .run_episode(
                &mut env,
                50,
                Mode::Greedy,
                true,
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
        let b = loaded
            .run_episode(
                &mut env,
                50,
                Mode::Greedy,
                true,
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn loading_a_missing_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Agent::load(&dir.path().join("nothing")).is_err());
}

#[test]
fn subgoals_keep_their_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let map = presets::desk_map();
    let goal = map.target(3).unwrap();
    let mut env = MazeEnv::new(map, SimParams::default(), StartSpread::default(), goal);
    let mut agent = HddpgAgent::new(small_config(), &mut rng).unwrap();
    for _ in 0..3 {
        agent
            .run_episode(&mut env, 80, Mode::Train, false, &mut rng)
            .unwrap();
    }
    for r in agent.high_buffer.iter() {
        let d = Point::new(r.subgoal[0], r.subgoal[1]).norm();
        assert!(d <= 1.0 + 1e-9, "subgoal {d} m away");
    }
}
