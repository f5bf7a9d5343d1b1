use super::*;
use crate::domain::Mode;
use crate::rng::{stream_rng, Purpose};
use proptest::prelude::*;
use rand::Rng;

fn env(id: EnvId) -> Env<f64> {
    make_env(&EnvConfig::new(id)).unwrap()
}

#[test]
fn defaults_match_task_setups() {
    let push = env(EnvId::Pushbox2d);
    assert_eq!(push.spec().horizon, 50);
    assert!(push.spec().goal_conditioned());
    assert_eq!(env(EnvId::Volley2d).spec().horizon, 60);

    let slide = env(EnvId::Slidedisk2d);
    let p = slide.manip_params().unwrap();
    assert!(p.goal_x_min > p.workspace_x_max + p.gripper_radius + p.object_size);
}

#[test]
fn unknown_override_rejected() {
    let cfg = EnvConfig::new(EnvId::Volley2d).with("no_such_key", 1.0);
    assert!(matches!(make_env::<f64>(&cfg), Err(Error::Config(_))));
    let cfg = EnvConfig::new(EnvId::Volley2d).with("restitution", 0.5);
    assert_eq!(make_env::<f64>(&cfg).unwrap().volley_params().unwrap().restitution, 0.5);
}

#[test]
fn volley_episodes_last_about_38_steps() {
    let e = env(EnvId::Volley2d);
    let db = generate_recorded_db(&e, 200, 3).unwrap();
    let mut total = 0usize;
    for entry in db.entries() {
        let mut s = e.initial_state(VirtualInstance::replay(entry.state(0).to_vec(), 0), None);
        loop {
            s = e.step(&s, &[0.0], entry);
            if e.terminal(&s).is_done() {
                break;
            }
        }
        total += s.time;
    }
    let mean = total as f64 / 200.0;
    assert!((36.0..=40.0).contains(&mean), "mean episode length {mean}");
}

#[test]
fn recorded_db_is_deterministic_and_ballistic() {
    let e = env(EnvId::Volley2d);
    let a = generate_recorded_db(&e, 100, 7).unwrap();
    let b = generate_recorded_db(&e, 100, 7).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_ne!(a, generate_recorded_db(&e, 100, 8).unwrap());
    assert_eq!(a.len(), 100);
    assert_eq!(a.entry_len(), 61);

    // Independent re-integration of every entry from its first state.
    let p = e.volley_params().unwrap();
    for entry in a.entries() {
        let s0 = entry.state(0);
        let (mut x, mut y, vx, mut vy) = (s0[0], s0[1], s0[2], s0[3]);
        for t in 1..entry.len() {
            x += vx * p.dt;
            y += vy * p.dt;
            vy -= p.gravity * p.dt;
            assert_eq!(entry.state(t), &[x, y, vx, vy], "step {t}");
        }
    }
}

#[test]
fn manip_db_entries_are_static() {
    for id in [EnvId::Pushbox2d, EnvId::Slidedisk2d] {
        let e = env(id);
        let db = generate_recorded_db(&e, 10, 1).unwrap();
        assert_eq!(db.dim(), e.spec().virt_dim);
        for entry in db.entries() {
            for t in 0..entry.len() {
                assert_eq!(entry.state(t), entry.state(0));
            }
        }
    }
    assert!(generate_recorded_db(&env(EnvId::Pushbox2d), 0, 1).is_err());
}

#[test]
fn zero_action_is_a_fixed_point() {
    for id in EnvId::ALL {
        let e = env(id);
        let r0 = e.initial_real();
        let zero = vec![0.0; e.spec().action_dim];
        assert_eq!(e.step_real(&r0, &zero), r0);
    }
}

#[test]
fn lag_step_response_matches_closed_form() {
    let e = env(EnvId::Volley2d);
    let p = e.volley_params().unwrap().clone();
    let alpha = p.dt / p.lag_tau;
    let beta = 1.0 - alpha;
    let mut real = e.initial_real();
    for k in 1..=p.max_steps {
        real = e.step_real(&real, &[1.0]);
        // Step response of two identical cascaded first-order filters.
        let kf = k as f64;
        let closed = p.max_paddle_speed * (1.0 - (kf + 1.0) * beta.powi(k as i32) + kf * beta.powi(k as i32 + 1));
        assert!((real[1] - closed).abs() < 1e-12, "k={k}: {} vs {closed}", real[1]);
    }
    assert!((real[1] / p.max_paddle_speed - 1.0).abs() < 0.01);
}

#[test]
fn real_step_ignores_virtual_state() {
    let mut rng = stream_rng(5, Purpose::Policy, 0, 0);
    for id in EnvId::ALL {
        let e = env(id);
        let db = generate_recorded_db(&e, 100, 2).unwrap();
        let real = e.initial_real();
        let action: Vec<f64> = (0..e.spec().action_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let goal = e.sample_goal(&mut rng);
        let reference = e.step_real(&real, &action);
        for entry in db.entries() {
            let s = e.initial_state(VirtualInstance::replay(entry.state(0).to_vec(), 0), goal.clone());
            assert_eq!(e.step(&s, &action, entry).real, reference);
        }
    }
}

#[test]
fn pure_replay_without_contact() {
    let e = env(EnvId::Volley2d);
    let db = generate_recorded_db(&e, 20, 4).unwrap();
    // A paddle driven far downwards never meets a ball.
    for entry in db.entries() {
        let mut s = e.initial_state(VirtualInstance::replay(entry.state(0).to_vec(), 0), None);
        s.real[0] = -5.0;
        for t in 0..e.spec().horizon {
            s = e.step(&s, &[-1.0], entry);
            assert_eq!(s.virt.mode, Mode::Replay);
            assert_eq!(s.virt.state.as_slice(), entry.state(t + 1));
        }
    }
}

#[test]
fn box_is_pushed_out_along_x_by_overlap_depth() {
    let e = env(EnvId::Pushbox2d);
    let p = e.manip_params().unwrap().clone();
    let entry_data = vec![0.05, 0.0].repeat(e.spec().entry_len());
    let entry = EntryView::new(&entry_data, 2);
    let inst = VirtualInstance::replay(vec![0.05, 0.0], 0);
    // Gripper moves +x from 0.0 to 0.012; its face reaches 0.027, the box
    // face sits at 0.03 - so push from a closer start.
    let before = vec![0.01, 0.0];
    let after = e.step_real(&before, &[1.0, 0.0]);
    assert!((after[0] - (0.01 + p.speed_cap)).abs() < 1e-15);
    let overlap = (after[0] + p.gripper_radius) - (0.05 - p.object_size);
    assert!(overlap > 0.0);
    let next = e.step_virtual(&before, &after, &inst, entry, 3);
    assert_eq!(next.mode, Mode::Simulated);
    assert_eq!(next.contact_time, Some(3));
    assert!((next.state[0] - (0.05 + overlap)).abs() < 1e-15);
    assert_eq!(next.state[1], 0.0);
}

/// Reflection computed in the paddle frame: the normal component is
/// reversed and scaled by restitution relative to the paddle, the
/// tangential component is kept.
fn reflection_oracle(p: &VolleyParams, v: [f64; 2], paddle_vy: f64) -> [f64; 2] {
    let n = [p.paddle_tilt.cos(), p.paddle_tilt.sin()];
    let t = [-p.paddle_tilt.sin(), p.paddle_tilt.cos()];
    let vn = v[0] * n[0] + v[1] * n[1];
    let vt = v[0] * t[0] + v[1] * t[1];
    let un = paddle_vy * n[1];
    let vn_after = -p.restitution * vn + (1.0 + p.restitution) * un;
    [vn_after * n[0] + vt * t[0], vn_after * n[1] + vt * t[1]]
}

#[test]
fn volley_contact_matches_reflection_oracle() {
    let e = env(EnvId::Volley2d);
    let p = e.volley_params().unwrap().clone();
    let n = [p.paddle_tilt.cos(), p.paddle_tilt.sin()];
    let tan = [-p.paddle_tilt.sin(), p.paddle_tilt.cos()];
    let mut rng = stream_rng(11, Purpose::Policy, 0, 0);
    for _ in 0..20 {
        let real = vec![
            rng.random_range(0.1..0.4),
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
        ];
        let real_next = e.step_real(&real, &[rng.random_range(-1.0..1.0)]);
        let along = rng.random_range(-0.8..0.8) * p.paddle_half_length;
        let v = [rng.random_range(-3.0..-1.5), rng.random_range(-2.5..0.5)];
        // Ball in front of the paddle at step start, behind it at step end.
        let place = |py: f64, d: f64| [p.paddle_x + along * tan[0] + d * n[0], py + along * tan[1] + d * n[1]];
        let b0 = place(real[0], 0.03);
        let b1 = place(real_next[0], -0.004);
        let data = vec![b0[0], b0[1], v[0], v[1], b1[0], b1[1], v[0], v[1]];
        let entry = EntryView::new(&data, 4);
        let inst = VirtualInstance::replay(data[..4].to_vec(), 9);
        let out = e.step_virtual(&real, &real_next, &inst, entry, 0);
        assert_eq!(out.mode, Mode::Simulated);
        let expected = reflection_oracle(&p, v, real_next[1]);
        assert!((out.state[2] - expected[0]).abs() < 1e-12);
        assert!((out.state[3] - expected[1]).abs() < 1e-12);
        // Ends on the paddle face.
        let d = (out.state[0] - p.paddle_x) * n[0] + (out.state[1] - real_next[0]) * n[1];
        assert!((d - p.ball_radius).abs() < 1e-12);
    }
}

fn volley_state(virt: VirtualInstance<f64>, time: usize) -> HybridState<f64> {
    HybridState {
        real: vec![0.25, 0.0, 0.0],
        virt,
        goal: None,
        time,
    }
}

#[test]
fn volley_reward_uses_landing_point() {
    let e = env(EnvId::Volley2d);
    let p = e.volley_params().unwrap().clone();
    let before = volley_state(VirtualInstance::replay(vec![0.05, 0.25, -2.0, -1.0], 0), 10);
    // A ball launched horizontally from height h lands at x + vx sqrt(2h/g).
    let h = 0.2;
    let vx = 2.0;
    let fall = (2.0 * h / p.gravity).sqrt();
    let eps = 1e-4;
    for (offset, expected) in [(p.success_radius - eps, 1.0), (p.success_radius + eps, 0.0), (0.0, 1.0)] {
        let x0 = p.target_x + offset - vx * fall;
        let after = volley_state(
            VirtualInstance {
                state: vec![x0, h, vx, 0.0],
                mode: Mode::Simulated,
                contact_time: Some(10),
                source_id: 0,
            },
            11,
        );
        assert_eq!(e.reward(&before, &[0.0], &after), expected, "offset {offset}");
        assert_eq!(e.terminal(&after), Terminal::EnvDone);
    }
}

#[test]
fn volley_without_contact_earns_nothing() {
    let e = env(EnvId::Volley2d);
    let db = generate_recorded_db(&e, 5, 1).unwrap();
    let entry = db.entry(0);
    let mut s = e.initial_state(VirtualInstance::replay(entry.state(0).to_vec(), 0), None);
    s.real[0] = 3.0;
    loop {
        let next = e.step(&s, &[1.0], entry);
        assert_eq!(e.reward(&s, &[1.0], &next), 0.0);
        s = next;
        if e.terminal(&s).is_done() {
            break;
        }
    }
}

fn push_state(obj: [f64; 2], goal: [f64; 2], time: usize) -> HybridState<f64> {
    HybridState {
        real: vec![0.0, 0.0],
        virt: VirtualInstance::replay(obj.to_vec(), 0),
        goal: Some(goal.to_vec()),
        time,
    }
}

#[test]
fn manip_reward_boundary_is_inclusive() {
    let e = env(EnvId::Pushbox2d);
    let rho = e.spec().success_radius;
    let s = push_state([0.1, 0.1], [0.0, 0.0], 0);
    assert_eq!(e.reward(&s, &[0.0, 0.0], &push_state([0.1, 0.1], [0.1, 0.1], 1)), 1.0);
    assert_eq!(e.reward(&s, &[0.0, 0.0], &push_state([rho, 0.0], [0.0, 0.0], 1)), 1.0);
    assert_eq!(
        e.reward(&s, &[0.0, 0.0], &push_state([0.1 + rho * 1.0001, 0.1], [0.1, 0.1], 1)),
        0.0
    );
    assert_eq!(e.terminal(&push_state([0.0, 0.0], [0.0, 0.0], 50)), Terminal::TimeLimit);
    assert_eq!(e.terminal(&push_state([0.0, 0.0], [0.0, 0.0], 49)), Terminal::NotDone);
}

fn static_trajectory(e: &Env<f64>, obj: [f64; 2], goal: [f64; 2]) -> Trajectory<f64> {
    let data = obj.to_vec().repeat(e.spec().entry_len());
    let entry = EntryView::new(&data, 2);
    let mut s = push_state(obj, goal, 0);
    s.real = vec![-0.2, -0.2];
    let mut transitions = Vec::new();
    for _ in 0..e.spec().horizon {
        let next = e.step(&s, &[0.0, 0.0], entry);
        transitions.push(crate::domain::Transition {
            reward: e.reward(&s, &[0.0, 0.0], &next),
            terminal: e.terminal(&next),
            state: s,
            action: vec![0.0, 0.0],
            next_state: next.clone(),
            provenance: crate::domain::Provenance::OnPolicy,
        });
        s = next;
    }
    Trajectory {
        transitions,
        contact_time: None,
        episode_seed: 0,
        main_source_id: 0,
    }
}

#[test]
fn success_and_triviality() {
    let e = env(EnvId::Pushbox2d);
    let miss = static_trajectory(&e, [0.1, 0.1], [-0.1, -0.1]);
    assert!(!success(&miss));
    let trivial = static_trajectory(&e, [0.1, 0.1], [0.1, 0.1]);
    assert!(success(&trivial));
    assert_eq!(trivial.transitions[0].reward, 1.0);
    assert!(!nontrivial(&trivial, DEFAULT_MOVE_THRESHOLD));
}

#[test]
fn pushing_into_goal_is_nontrivial_success() {
    let e = env(EnvId::Pushbox2d);
    let goal = [0.12, 0.0];
    let mut s = push_state([0.05, 0.0], goal, 0);
    let data = vec![0.05, 0.0].repeat(e.spec().entry_len());
    let entry = EntryView::new(&data, 2);
    let mut transitions = Vec::new();
    for _ in 0..e.spec().horizon {
        let next = e.step(&s, &[1.0, 0.0], entry);
        transitions.push(crate::domain::Transition {
            reward: e.reward(&s, &[1.0, 0.0], &next),
            terminal: e.terminal(&next),
            state: s,
            action: vec![1.0, 0.0],
            next_state: next.clone(),
            provenance: crate::domain::Provenance::OnPolicy,
        });
        s = next;
    }
    let traj = Trajectory {
        contact_time: transitions.iter().find_map(|t| t.next_state.virt.contact_time),
        transitions,
        episode_seed: 0,
        main_source_id: 0,
    };
    assert!(traj.is_well_formed());
    assert!(success(&traj));
    assert!(nontrivial(&traj, DEFAULT_MOVE_THRESHOLD));
}

#[test]
fn struck_disk_slides_and_stops() {
    let e = env(EnvId::Slidedisk2d);
    let p = e.manip_params().unwrap().clone();
    let start = [-0.02, 0.0];
    let data = vec![start[0], start[1], 0.0, 0.0].repeat(e.spec().entry_len());
    let entry = EntryView::new(&data, 4);
    let mut s = HybridState {
        real: vec![-0.08, 0.0],
        virt: VirtualInstance::replay(data[..4].to_vec(), 0),
        goal: Some(vec![0.2, 0.0]),
        time: 0,
    };
    let mut speeds = Vec::new();
    for t in 0..e.spec().horizon {
        let action = if t < 6 { [1.0, 0.0] } else { [-1.0, 0.0] };
        s = e.step(&s, &action, entry);
        speeds.push(s.virt.state[2]);
    }
    assert_eq!(s.virt.mode, Mode::Simulated);
    assert!(s.virt.state[0] > p.workspace_x_max, "disk must leave the strike zone");
    assert_eq!(*speeds.last().unwrap(), 0.0);
    let peak = speeds.iter().cloned().fold(0.0, f64::max);
    assert!(peak > 0.0);
}

#[test]
fn f32_environments_step() {
    let e: Env<f32> = make_env(&EnvConfig::new(EnvId::Volley2d)).unwrap();
    let db = generate_recorded_db(&e, 3, 0).unwrap();
    let s = e.initial_state(VirtualInstance::replay(db.entry(0).state(0).to_vec(), 0), None);
    let next = e.step(&s, &[0.5], db.entry(0));
    assert_eq!(next.time, 1);
}

proptest! {
    #[test]
    fn post_contact_speed_is_bounded(
        vx in -4.0f64..-0.5, vy in -3.0f64..1.0, pv in -3.0f64..3.0,
    ) {
        let e = env(EnvId::Volley2d);
        let p = e.volley_params().unwrap();
        let out = volley::reflect(p, [vx, vy], pv);
        let before = (vx * vx + vy * vy).sqrt();
        let after = (out[0] * out[0] + out[1] * out[1]).sqrt();
        prop_assert!(after <= before + 2.0 * pv.abs() + 1e-12);
    }

    #[test]
    fn rewards_recompute_identically(x in -0.2f64..0.2, y in -0.2f64..0.2, gx in -0.2f64..0.2, gy in -0.2f64..0.2) {
        let e = env(EnvId::Pushbox2d);
        let s = push_state([x, y], [gx, gy], 0);
        let n = push_state([x, y], [gx, gy], 1);
        prop_assert_eq!(e.reward(&s, &[0.0, 0.0], &n), e.reward(&s, &[0.0, 0.0], &n));
    }
}
