//! Gridworld rendering, goal refresh cadence and control rules.

use mogan_core::controller::{
    episode_rng, run_episode, train_controller, Action, Control, ControllerConfig, GridConfig,
    GridEnv,
};
use mogan_core::datagen::{rasterize, Shape};
use mogan_core::model::{Model, TrainConfig, Trainer};

fn tiny_model(heads: usize) -> Model {
    let cfg = TrainConfig {
        heads,
        base_channels: 2,
        ..TrainConfig::default()
    };
    Trainer::new(cfg, 64).unwrap().model()
}

#[test]
fn four_rights_match_the_rasterizer() {
    let cfg = GridConfig::default();
    let mut env = GridEnv::new(cfg).unwrap();
    let sprite = Shape::Rect {
        width: cfg.sprite_size,
        height: cfg.sprite_size,
    };
    for k in 1..=4 {
        let out = env.step(Action::Right).unwrap();
        let pos = (cfg.start.0 + 2 * k, cfg.start.1);
        assert_eq!(env.position(), pos);
        let expected = rasterize(64, 64, cfg.background, &[(sprite, pos, cfg.intensity)]);
        assert_eq!(out.observation, expected);
    }
    assert_eq!(env.frames().len(), 5);
}

#[test]
fn goals_refresh_every_n_steps() {
    let model = tiny_model(2);
    for horizon in [1, 4, 5, 6, 10, 11, 20] {
        let cfg = ControllerConfig {
            grid: GridConfig {
                horizon,
                ..GridConfig::default()
            },
            ..ControllerConfig::default()
        };
        let mut env = GridEnv::new(cfg.grid).unwrap();
        let mut table = cfg.table().unwrap();
        let control = Control {
            table: &mut table,
            epsilon: 1.0,
            learn: false,
        };
        let ep = run_episode(&mut env, &model, control, &cfg, &mut episode_rng(1, 0)).unwrap();
        let n = cfg.grid.n;
        assert_eq!(ep.goal_calls, horizon.div_ceil(n), "horizon {horizon}");
        assert_eq!(ep.steps.len(), horizon);
        let flagged: Vec<usize> = ep
            .steps
            .iter()
            .filter(|s| s.goal_refresh)
            .map(|s| s.step)
            .collect();
        let expected: Vec<usize> = (1..=horizon).filter(|s| (s - 1) % n == 0).collect();
        assert_eq!(flagged, expected);
    }
}

#[test]
fn greedy_on_an_empty_table_takes_the_first_action() {
    let model = tiny_model(1);
    let cfg = ControllerConfig::default();
    let mut env = GridEnv::new(cfg.grid).unwrap();
    let mut table = cfg.table().unwrap();
    let control = Control {
        table: &mut table,
        epsilon: 0.0,
        learn: false,
    };
    let ep = run_episode(&mut env, &model, control, &cfg, &mut episode_rng(0, 0)).unwrap();
    assert!(ep
        .steps
        .iter()
        .all(|s| s.action == Action::from_index(0).unwrap()));
    assert!(table.is_empty());
}

#[test]
fn epsilon_decays_linearly_to_its_floor() {
    let cfg = ControllerConfig::default();
    assert_eq!(cfg.epsilon(0, 11), 1.0);
    assert!((cfg.epsilon(5, 11) - 0.525).abs() < 1e-12);
    assert!((cfg.epsilon(10, 11) - 0.05).abs() < 1e-12);
}

#[test]
fn same_seed_same_run() {
    let model = tiny_model(1);
    let cfg = ControllerConfig::default();
    let a = train_controller(&model, &cfg, 6, 11).unwrap();
    let b = train_controller(&model, &cfg, 6, 11).unwrap();
    let c = train_controller(&model, &cfg, 6, 12).unwrap();
    assert_eq!(a.returns, b.returns);
    assert_ne!(a.returns, c.returns);
}

#[test]
fn mismatched_model_resolution_is_rejected() {
    let model = Trainer::new(
        TrainConfig {
            base_channels: 2,
            ..TrainConfig::default()
        },
        32,
    )
    .unwrap()
    .model();
    assert!(train_controller(&model, &ControllerConfig::default(), 1, 0).is_err());
}
