use std::cell::RefCell;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::domain::{Criterion, HindsightConfig, Provenance, RecordedDb, ReplayBuffer, Terminal, Trajectory};
use crate::envs::{generate_recorded_db, make_env, Env, EnvConfig};
use crate::error::Error;
use crate::learner::{EntCoef, FnPolicy, LearnerConfig, Policy, Sac, UniformPolicy, ZeroPolicy};
use crate::rng::{stream_rng, EpisodeRngs, LabRng, Purpose};
use crate::EnvId;

fn env(id: EnvId) -> Env<f64> {
    make_env(&EnvConfig::new(id)).unwrap()
}

fn volley() -> (Env<f64>, RecordedDb<f64>) {
    let e = env(EnvId::Volley2d);
    let db = generate_recorded_db(&e, 100, 11).unwrap();
    (e, db)
}

/// Steers the paddle toward the predicted crossing height of the ball.
fn tracker(obs: &[f64], rng: &mut LabRng) -> Vec<f64> {
    let (y, bx, by, bvx, bvy) = (obs[0], obs[3], obs[4], obs[5], obs[6]);
    let t = bx / (-bvx).max(1e-3);
    let target = by + bvy * t - 0.5 * 9.81 * t * t + rng.random_range(-0.03..0.03);
    vec![(8.0 * (target - y)).clamp(-1.0, 1.0)]
}

fn push_policy(obs: &[f64], rng: &mut LabRng) -> Vec<f64> {
    // Gripper heads for the object, with some noise.
    let d = [obs[2] - obs[0], obs[3] - obs[1]];
    vec![
        (d[0] * 40.0 + rng.random_range(-0.5..0.5)).clamp(-1.0, 1.0),
        (d[1] * 40.0 + rng.random_range(-0.5..0.5)).clamp(-1.0, 1.0),
    ]
}

fn rollout(
    policy: &dyn Policy<f64>,
    e: &Env<f64>,
    db: Option<&RecordedDb<f64>>,
    m: usize,
    seed: u64,
    episode: u64,
) -> StreamBundle<f64> {
    let mut rngs = EpisodeRngs::new(seed, episode);
    let b = rollout_hysr(policy, e, db, m, &mut rngs, episode).unwrap();
    if e.has_variable_length() {
        continue_tail(policy, e, b, &mut rngs.policy)
    } else {
        b
    }
}

#[test]
fn stream_count_does_not_change_main_trajectory() {
    let (v, db) = volley();
    let push = env(EnvId::Pushbox2d);
    for ep in 0..10 {
        let a = rollout(&FnPolicy(tracker), &v, Some(&db), 0, 1, ep);
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 1, ep);
        assert!(a.streams.is_empty());
        assert_eq!(b.streams.len(), 20);
        assert_eq!(a.main, b.main);
        assert!(a.main.is_well_formed());
        assert!(streams_consistent(&b));

        let a = rollout(&FnPolicy(push_policy), &push, None, 0, 2, ep);
        let b = rollout(&FnPolicy(push_policy), &push, None, 100, 2, ep);
        assert_eq!(a.main, b.main);
        assert_eq!(b.streams.len(), 100);
        assert!(b
            .streams
            .iter()
            .all(|s| s.steps() == 50 && s.terminal == Terminal::TimeLimit));
    }
}

#[test]
fn empty_database_is_a_configuration_error() {
    let (v, _) = volley();
    let mut rngs = EpisodeRngs::new(0, 0);
    let r = rollout_hysr(&ZeroPolicy { dim: 1 }, &v, None, 3, &mut rngs, 0);
    assert!(matches!(r, Err(Error::Config(_))));
}

#[test]
fn identity_relabel_reproduces_main() {
    let (v, db) = volley();
    let push = env(EnvId::Pushbox2d);
    for ep in 0..5u64 {
        for (e, dbo, policy) in [
            (&v, Some(&db), &FnPolicy(tracker) as &dyn Policy<f64>),
            (&push, None, &FnPolicy(push_policy) as &dyn Policy<f64>),
        ] {
            let mut rngs = EpisodeRngs::new(3, ep);
            let (main, _) = sample_sources(e, dbo, 0, &mut rngs.main_virtual, &mut rngs.streams).unwrap();
            let goal = e.sample_goal(&mut rngs.goal);
            let b = rollout_from_sources(policy, e, main.clone(), goal, vec![main], &mut rngs.policy, ep);
            let r = relabel(&b, e, 0).unwrap();
            let mut expected = b.main.clone();
            expected
                .transitions
                .iter_mut()
                .for_each(|t| t.provenance = Provenance::HiS);
            assert_eq!(r, expected);
        }
    }
}

#[test]
fn relabel_copies_real_part_and_recomputes_rewards() {
    let (v, db) = volley();
    let push = env(EnvId::Pushbox2d);
    let mut rewarded = 0;
    for ep in 0..100u64 {
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 4, ep);
        let c = rollout(&FnPolicy(push_policy), &push, None, 10, 4, ep);
        for (e, bundle) in [(&v, &b), (&push, &c)] {
            for m in 0..bundle.streams.len() {
                let r = relabel(bundle, e, m).unwrap();
                assert!(r.is_well_formed());
                for (t, tr) in r.transitions.iter().enumerate() {
                    assert_eq!(tr.state.real, bundle.real_states[t]);
                    assert_eq!(tr.next_state.real, bundle.real_states[t + 1]);
                    assert_eq!(tr.action, bundle.actions[t]);
                    if let Some(main) = bundle.main.transitions.get(t) {
                        assert_eq!(tr.state.real, main.state.real);
                        assert_eq!(tr.action, main.action);
                    }
                    assert_eq!(tr.reward, e.reward(&tr.state, &tr.action, &tr.next_state));
                    assert_eq!(tr.provenance, Provenance::HiS);
                    rewarded += (tr.reward > 0.0) as usize;
                }
                // Finished streams end at their own terminal step.
                let last = r.transitions.last().unwrap();
                assert_eq!(last.terminal, bundle.streams[m].terminal);
            }
            assert!(matches!(
                relabel(bundle, e, bundle.streams.len()),
                Err(Error::Structural(_))
            ));
        }
    }
    assert!(rewarded > 0);
}

/// Episode length of a lone instance replaying `source` under `action`.
fn lone_episode_len(e: &Env<f64>, source: &StreamSource<f64>, action: f64) -> usize {
    let entry = source.view(e.spec().virt_dim);
    let mut s = e.initial_state(crate::domain::VirtualInstance::replay(entry.state(0).to_vec(), 0), None);
    loop {
        s = e.step(&s, &[action], entry);
        if e.terminal(&s).is_done() {
            return s.time;
        }
    }
}

#[test]
fn tail_runs_until_the_longest_stream_ends() {
    let (v, db) = volley();
    let zero = ZeroPolicy { dim: 1 };
    let mut saw_tail = false;
    for ep in 0..30 {
        let b = rollout(&zero, &v, Some(&db), 20, 5, ep);
        let main_len = b.main_len();
        let lens: Vec<usize> = b.streams.iter().map(|s| lone_episode_len(&v, &s.source, 0.0)).collect();
        for (s, &l) in b.streams.iter().zip(&lens) {
            assert_eq!(s.steps(), l);
        }
        let longest = lens.iter().copied().max().unwrap();
        assert_eq!(b.tail.len(), longest.saturating_sub(main_len));
        assert_eq!(b.actions.len(), main_len + b.tail.len());
        saw_tail |= !b.tail.is_empty();
        assert!(b.unfinished().next().is_none());
    }
    assert!(saw_tail);

    // No streams alive after the main episode: no tail.
    let mut rngs = EpisodeRngs::new(5, 0);
    let (main, _) = sample_sources(&v, Some(&db), 0, &mut rngs.main_virtual, &mut rngs.streams).unwrap();
    let b = rollout_from_sources(&zero, &v, main.clone(), None, vec![main], &mut rngs.policy, 0);
    let b = continue_tail(&zero, &v, b, &mut rngs.policy);
    assert!(b.tail.is_empty());
}

#[test]
fn tail_actions_observe_the_lowest_unfinished_stream() {
    let (v, db) = volley();
    let seen: RefCell<Vec<Vec<f64>>> = RefCell::new(Vec::new());
    let policy = FnPolicy(|obs: &[f64], _: &mut LabRng| {
        seen.borrow_mut().push(obs.to_vec());
        vec![0.0]
    });
    let mut found = false;
    for ep in 0..30 {
        let mut rngs = EpisodeRngs::new(6, ep);
        let b = rollout_hysr(&policy, &v, Some(&db), 20, &mut rngs, ep).unwrap();
        let main_len = b.main_len();
        seen.borrow_mut().clear();
        let b = continue_tail(&policy, &v, b, &mut rngs.policy);
        let obs = seen.borrow();
        for (i, &j) in b.tail.conditioned_on.iter().enumerate() {
            let t = main_len + i;
            assert_eq!(&obs[i][3..], &b.streams[j].states[t].state[..]);
            assert!(b.streams[..j].iter().all(|s| s.steps() <= t));
            assert!(b.streams[j].steps() > t);
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn permuting_streams_permutes_content_only() {
    let push = env(EnvId::Pushbox2d);
    let (v, db) = volley();
    for (e, dbo, n) in [(&push, None, 12usize), (&v, Some(&db), 12)] {
        let mut rngs = EpisodeRngs::new(7, 0);
        let (main, sources) = sample_sources(e, dbo, n, &mut rngs.main_virtual, &mut rngs.streams).unwrap();
        let goal = e.sample_goal(&mut rngs.goal);
        let policy = UniformPolicy {
            dim: e.spec().action_dim,
        };
        let mut p1 = rngs.policy.clone();
        let mut p2 = rngs.policy.clone();
        let a = rollout_from_sources(&policy, e, main.clone(), goal.clone(), sources.clone(), &mut p1, 0);
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled = perm.iter().map(|&i| sources[i].clone()).collect();
        let b = rollout_from_sources(&policy, e, main, goal, shuffled, &mut p2, 0);
        assert_eq!(a.main, b.main);
        for (k, &i) in perm.iter().enumerate() {
            assert_eq!(b.streams[k], a.streams[i]);
        }
    }
}

fn candidate(score: f64, m: usize) -> ScoredCandidate<f64> {
    ScoredCandidate {
        payload: Payload::Trajectory(Trajectory {
            transitions: vec![],
            contact_time: None,
            episode_seed: 0,
            main_source_id: m as u64,
        }),
        score,
        criterion: Criterion::RewardPerEpisode,
        stream_index: m,
    }
}

#[test]
fn select_examples() {
    let scores = [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
    let cands: Vec<_> = scores.iter().enumerate().map(|(m, &s)| candidate(s, m)).collect();
    let out = select(cands.clone(), 0.5, 3);
    assert_eq!(out.iter().map(|c| c.stream_index).collect::<Vec<_>>(), vec![0, 1, 3]);
    assert!(select(cands.clone(), 0.5, 0).is_empty());
    assert!(select(cands.clone(), f64::INFINITY, 10).is_empty());
    // Exactly at the threshold is not above it.
    assert_eq!(select(cands, 1.0, 10).len(), 0);
    let odd = vec![candidate(f64::NAN, 0), candidate(f64::INFINITY, 1), candidate(2.0, 2)];
    assert_eq!(
        select(odd, 0.0, 5).iter().map(|c| c.stream_index).collect::<Vec<_>>(),
        vec![2]
    );
}

/// Brute force: filter, then repeatedly extract the best remaining.
fn naive_select(c: &[ScoredCandidate<f64>], threshold: f64, cap: usize) -> Vec<usize> {
    let mut pool: Vec<(usize, &ScoredCandidate<f64>)> = c
        .iter()
        .enumerate()
        .filter(|(_, x)| x.score.is_finite() && x.score > threshold)
        .collect();
    let mut out = Vec::new();
    while out.len() < cap && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (a, b) = (pool[i].1, pool[best].1);
            if a.score > b.score || (a.score == b.score && a.stream_index < b.stream_index) {
                best = i;
            }
        }
        out.push(pool.remove(best).0);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]
    #[test]
    fn select_matches_naive_oracle(
        raw in prop::collection::vec((0u8..6, 0usize..8), 0..30),
        threshold in prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0, 2.5]),
        cap in 0usize..8,
    ) {
        // Few distinct scores and stream indices force ties.
        let cands: Vec<_> = raw.iter().map(|&(s, m)| candidate(s as f64 * 0.5, m)).collect();
        let tagged: Vec<_> = cands.iter().enumerate().map(|(i, c)| {
            let mut c = c.clone();
            if let Payload::Trajectory(t) = &mut c.payload { t.episode_seed = i as u64; }
            c
        }).collect();
        let got: Vec<usize> = select(tagged.clone(), threshold, cap).iter().map(|c| match &c.payload {
            Payload::Trajectory(t) => t.episode_seed as usize,
            _ => unreachable!(),
        }).collect();
        prop_assert_eq!(got, naive_select(&tagged, threshold, cap));
    }
}

#[test]
fn score_examples() {
    let (v, db) = volley();
    let push = env(EnvId::Pushbox2d);
    // A successful interception carries exactly one unit reward.
    let mut found = false;
    for ep in 0..300 {
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 0, 8, ep);
        if b.main.success() {
            let s = score(&Payload::Trajectory(b.main.clone()), Criterion::RewardPerEpisode, None).unwrap();
            assert_eq!(s, 1.0);
            found = true;
            break;
        }
    }
    assert!(found, "scripted tracker never succeeded");

    let b = rollout(&FnPolicy(push_policy), &push, None, 0, 8, 0);
    let tr = b.main.transitions[0].clone();
    assert!(matches!(
        score(&Payload::Transition(tr.clone()), Criterion::TdPerTransition, None),
        Err(Error::Precondition(_))
    ));
    let cfg = LearnerConfig {
        gamma: 0.0,
        num_layers: 1,
        num_hidden: 8,
        ent_coef: EntCoef::Fixed(0.0),
        ..LearnerConfig::default()
    };
    let sac = Sac::<f64>::new(push.spec().observation_dim(), 2, cfg, 0).unwrap();
    let s = score(&Payload::Transition(tr.clone()), Criterion::TdPerTransition, Some(&sac)).unwrap();
    assert_eq!(s, (tr.reward - (tr.reward - sac.td_error(&tr))).abs());
    assert_eq!(s, sac.td_error(&tr).abs());

    // Box moved 0.07 m over the episode.
    let mut t = b.main.clone();
    let start = t.transitions[0].state.virt.state.clone();
    let last = t.transitions.len() - 1;
    t.transitions[last].next_state.virt.state = vec![start[0] + 0.07, start[1]];
    let d = score(&Payload::Trajectory(t.clone()), Criterion::VirtualDisplacement, None).unwrap();
    assert!((d - 0.07).abs() < 1e-12);
    let chosen = select(
        vec![ScoredCandidate {
            payload: Payload::Trajectory(t),
            score: d,
            criterion: Criterion::VirtualDisplacement,
            stream_index: 0,
        }],
        0.02,
        3,
    );
    assert_eq!(chosen.len(), 1);
}

#[test]
fn his_insert_degenerate_configs() {
    let (v, db) = volley();
    let mut buf = ReplayBuffer::new(10_000);
    let mut pending = PendingHindsight::new();
    let b = rollout(&FnPolicy(tracker), &v, Some(&db), 0, 9, 0);
    let out = his_insert(&mut buf, &b, &v, &HindsightConfig::disabled(), None, 0, &mut pending).unwrap();
    assert_eq!(out.inserted, 0);
    assert_eq!(buf.len(), b.main.len());

    let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 9, 1);
    let cfg = HindsightConfig::new(20, Criterion::RewardPerEpisode, f64::INFINITY, 3);
    let before = buf.len();
    let out = his_insert(&mut buf, &b, &v, &cfg, None, 1, &mut pending).unwrap();
    assert_eq!(out.inserted, 0);
    assert_eq!(buf.len(), before + b.main.len());
    assert!(pending.is_empty());
}

#[test]
fn his_insert_respects_the_cap_and_cadence() {
    let (v, db) = volley();
    let mut buf = ReplayBuffer::new(1_000_000);
    let mut pending = PendingHindsight::new();
    let mut cfg = HindsightConfig::new(20, Criterion::RewardPerEpisode, 0.5, 3);
    let mut total = 0;
    let mut rounds = 0;
    for ep in 0..100u64 {
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 10, ep);
        let before = buf.len();
        let out = his_insert(&mut buf, &b, &v, &cfg, None, ep, &mut pending).unwrap();
        assert!(out.inserted <= cfg.cap);
        assert_eq!(buf.len(), before + b.main.len() + out.transitions);
        assert!(out.trajectories.iter().all(|t| t.total_reward() > 0.5));
        total += out.inserted;
        rounds += out.round as usize;
    }
    assert_eq!(rounds, 100);
    assert!(total <= 100 * cfg.cap);
    assert!(total > 0, "no hindsight episode succeeded");

    // Accumulate over three episodes, then insert at most k_c once.
    cfg.insert_every = 3;
    let mut pending = PendingHindsight::new();
    for ep in 0..3u64 {
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 11, ep);
        let out = his_insert(&mut buf, &b, &v, &cfg, None, ep, &mut pending).unwrap();
        if ep < 2 {
            assert!(!out.round);
            assert!(!pending.is_empty());
        } else {
            assert!(out.round);
            assert!(pending.is_empty());
            assert!(out.inserted <= 3);
        }
    }

    // Transition granularity counts transitions against the cap.
    let cfg = HindsightConfig::new(20, Criterion::RewardPerTransition, 0.5, 2);
    for ep in 0..20u64 {
        let b = rollout(&FnPolicy(tracker), &v, Some(&db), 20, 12, ep);
        let out = his_insert(&mut buf, &b, &v, &cfg, None, ep, &mut pending).unwrap();
        assert!(out.inserted <= 2 && out.transitions == out.inserted);
        assert!(out.trajectories.is_empty());
    }
}

#[test]
fn td_scored_insertion_uses_the_learner() {
    let push = env(EnvId::Pushbox2d);
    let sac = Sac::<f64>::new(
        push.spec().observation_dim(),
        2,
        LearnerConfig {
            num_hidden: 8,
            num_layers: 1,
            ..LearnerConfig::default()
        },
        1,
    )
    .unwrap();
    let mut buf = ReplayBuffer::new(100_000);
    let mut pending = PendingHindsight::new();
    let b = rollout(&FnPolicy(push_policy), &push, None, 10, 13, 0);
    let cfg = HindsightConfig::new(10, Criterion::TdPerEpisode, 0.0, 4);
    assert!(matches!(
        his_insert(&mut buf, &b, &push, &cfg, None, 0, &mut pending),
        Err(Error::Precondition(_))
    ));
    let out = his_insert(&mut buf, &b, &push, &cfg, Some(&sac), 0, &mut pending).unwrap();
    assert_eq!(out.inserted, 4);
    let scores: Vec<f64> = out
        .trajectories
        .iter()
        .map(|t| t.transitions.iter().map(|tr| sac.td_error(tr).abs()).sum())
        .collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn her_relabels_with_future_achieved_goals() {
    let push = env(EnvId::Pushbox2d);
    let mut rng = stream_rng(14, Purpose::Her, 0, 0);
    for ep in 0..20 {
        let b = rollout(&FnPolicy(push_policy), &push, None, 5, 14, ep);
        for (traj, prov) in [
            (b.main.clone(), Provenance::HER),
            (relabel(&b, &push, 0).unwrap(), Provenance::HiSHER),
        ] {
            let out = her_relabel(&traj, 4, GoalStrategy::Future, &push, &mut rng).unwrap();
            assert_eq!(out.len(), 4 * traj.len());
            for (i, tr) in out.iter().enumerate() {
                let t = i / 4;
                let src = &traj.transitions[t];
                let goal = tr.state.goal.as_ref().unwrap();
                assert_eq!(tr.next_state.goal.as_ref(), Some(goal));
                let later = traj.transitions[t..]
                    .iter()
                    .any(|x| &x.next_state.virt.state[..2] == &goal[..]);
                assert!(later, "goal not achieved later in the episode");
                assert_eq!(tr.state.real, src.state.real);
                assert_eq!(tr.action, src.action);
                assert_eq!(tr.state.real, b.real_states[t]);
                assert_eq!(tr.action, b.actions[t]);
                assert_eq!(tr.reward, push.reward(&tr.state, &tr.action, &tr.next_state));
                assert_eq!(tr.provenance, prov);
            }
            let groups = her_trajectories(&traj, &out, 4);
            assert_eq!(groups.len(), 4);
            assert!(groups.iter().all(|g| g.len() == traj.len()));
        }
    }
}

#[test]
fn her_final_and_immediate_goal_rewards() {
    let push = env(EnvId::Pushbox2d);
    let b = rollout(&FnPolicy(push_policy), &push, None, 0, 15, 0);
    let mut rng = stream_rng(15, Purpose::Her, 0, 0);
    let last = b.main.len() - 1;
    // Relabeling the last transition can only pick its own successor state,
    // where the object trivially sits on the goal.
    let single = Trajectory {
        transitions: vec![b.main.transitions[last].clone()],
        ..b.main.clone()
    };
    let out = her_relabel(&single, 3, GoalStrategy::Future, &push, &mut rng).unwrap();
    assert!(out.iter().all(|t| t.reward == 1.0));
    let out = her_relabel(&b.main, 1, GoalStrategy::Final, &push, &mut rng).unwrap();
    let final_goal = b.main.transitions[last].next_state.virt.state[..2].to_vec();
    assert!(out.iter().all(|t| t.state.goal.as_ref() == Some(&final_goal)));

    let (v, db) = volley();
    let vb = rollout(&FnPolicy(tracker), &v, Some(&db), 0, 15, 0);
    assert!(matches!(
        her_relabel(&vb.main, 4, GoalStrategy::Future, &v, &mut rng),
        Err(Error::Config(_))
    ));
}
