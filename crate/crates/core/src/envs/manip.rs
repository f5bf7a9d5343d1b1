//! Planar pushing (kinematic box) and sliding (disk with Coulomb decay).
//!
//! Real state `[gripper_x, gripper_y]`; virtual state `[x, y]` for the box
//! or `[x, y, vx, vy]` for the disk; goal `[x, y]`; two actions that place
//! the controller target around the gripper.

use rand::Rng;

use crate::domain::{EntryView, HybridState, Mode, Terminal, VirtualInstance};
use crate::scalar::{distance, Scalar};

use super::params::ManipParams;

pub(crate) const REAL_DIM: usize = 2;
pub(crate) const GOAL_DIM: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Object {
    Box,
    Disk,
}

impl Object {
    pub(crate) fn virt_dim(self) -> usize {
        match self {
            Object::Box => 2,
            Object::Disk => 4,
        }
    }
}

fn p<S: Scalar>(x: f64) -> S {
    S::lit(x)
}

fn clamp<S: Scalar>(x: S, lo: f64, hi: f64) -> S {
    x.max(p(lo)).min(p(hi))
}

pub(crate) fn initial_real<S: Scalar>(params: &ManipParams) -> Vec<S> {
    vec![p(params.gripper_x0), p(params.gripper_y0)]
}

/// Proportional step toward `gripper + reach * action`, capped in length and
/// clamped to the workspace.
pub(crate) fn step_real<S: Scalar>(params: &ManipParams, real: &[S], action: &[S]) -> Vec<S> {
    let k = p::<S>(params.controller_gain * params.action_reach);
    let mut dx = k * action[0];
    let mut dy = k * action[1];
    let len = (dx * dx + dy * dy).sqrt();
    let cap = p::<S>(params.speed_cap);
    if len > cap {
        dx = dx * cap / len;
        dy = dy * cap / len;
    }
    vec![
        clamp(real[0] + dx, params.workspace_x_min, params.workspace_x_max),
        clamp(real[1] + dy, params.workspace_y_min, params.workspace_y_max),
    ]
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Positions divided by the workspace half-extent; disk velocities by the
/// gripper speed limit over one step.
pub(crate) fn obs_scale<S: Scalar>(params: &ManipParams, object: Object) -> Vec<S> {
    let half = [
        params.workspace_x_min.abs(),
        params.workspace_x_max.abs(),
        params.workspace_y_min.abs(),
        params.workspace_y_max.abs(),
        params.goal_x_max.abs(),
        params.goal_y_max.abs(),
    ]
    .into_iter()
    .fold(1e-3, f64::max);
    let pos = 1.0 / half;
    let vel = params.dt / params.speed_cap;
    let mut scale = vec![pos; REAL_DIM];
    scale.extend([pos, pos]);
    if object == Object::Disk {
        scale.extend([vel, vel]);
    }
    scale.extend([pos; GOAL_DIM]);
    scale.into_iter().map(p).collect()
}

/// Initial object position, rejection-sampled away from the gripper start.
pub(crate) fn sample_object<S: Scalar, R: Rng + ?Sized>(params: &ManipParams, object: Object, rng: &mut R) -> Vec<S> {
    loop {
        let x = uniform(rng, params.object_x_min, params.object_x_max);
        let y = uniform(rng, params.object_y_min, params.object_y_max);
        let d = ((x - params.gripper_x0).powi(2) + (y - params.gripper_y0).powi(2)).sqrt();
        if d >= params.object_clearance {
            let mut state = vec![p(x), p(y)];
            if object == Object::Disk {
                state.extend([S::zero(), S::zero()]);
            }
            return state;
        }
    }
}

pub(crate) fn sample_goal<S: Scalar, R: Rng + ?Sized>(params: &ManipParams, rng: &mut R) -> Vec<S> {
    vec![
        p(uniform(rng, params.goal_x_min, params.goal_x_max)),
        p(uniform(rng, params.goal_y_min, params.goal_y_max)),
    ]
}

/// Minimal translation that moves the object out of overlap with the
/// gripper, along the contact normal. `None` when they do not overlap.
pub(crate) fn depenetration<S: Scalar>(
    params: &ManipParams,
    object: Object,
    gripper: &[S],
    pos: &[S],
) -> Option<([S; 2], [S; 2])> {
    let rg = p::<S>(params.gripper_radius);
    let size = p::<S>(params.object_size);
    let (cx, cy) = (gripper[0], gripper[1]);
    match object {
        Object::Disk => {
            let (dx, dy) = (pos[0] - cx, pos[1] - cy);
            let d = (dx * dx + dy * dy).sqrt();
            let reach = rg + size;
            if d >= reach {
                return None;
            }
            let n = if d > S::zero() {
                [dx / d, dy / d]
            } else {
                [S::one(), S::zero()]
            };
            let depth = reach - d;
            Some(([n[0] * depth, n[1] * depth], n))
        }
        Object::Box => {
            // Closest point of the axis-aligned box to the gripper centre.
            let qx = cx.max(pos[0] - size).min(pos[0] + size);
            let qy = cy.max(pos[1] - size).min(pos[1] + size);
            let (dx, dy) = (qx - cx, qy - cy);
            let d = (dx * dx + dy * dy).sqrt();
            if d > S::zero() {
                if d >= rg {
                    return None;
                }
                let n = [dx / d, dy / d];
                let depth = rg - d;
                return Some(([n[0] * depth, n[1] * depth], n));
            }
            // Gripper centre inside the box: leave through the nearest face.
            let ox = size - (cx - pos[0]).abs();
            let oy = size - (cy - pos[1]).abs();
            let sign = |v: S| if v >= S::zero() { S::one() } else { -S::one() };
            if ox <= oy {
                let n = [sign(pos[0] - cx), S::zero()];
                let depth = ox + rg;
                Some(([n[0] * depth, S::zero()], n))
            } else {
                let n = [S::zero(), sign(pos[1] - cy)];
                let depth = oy + rg;
                Some(([S::zero(), n[1] * depth], n))
            }
        }
    }
}

/// Resolves contact between the gripper at step end and the object state
/// `pos`; for the disk, also transfers the gripper's approach velocity.
fn resolve<S: Scalar>(
    params: &ManipParams,
    object: Object,
    real: &[S],
    real_next: &[S],
    state: &[S],
) -> Option<Vec<S>> {
    let (shift, n) = depenetration(params, object, real_next, state)?;
    let mut out = state.to_vec();
    out[0] += shift[0];
    out[1] += shift[1];
    if object == Object::Disk {
        let dt = p::<S>(params.dt);
        let vg = [(real_next[0] - real[0]) / dt, (real_next[1] - real[1]) / dt];
        let approach = (vg[0] - state[2]) * n[0] + (vg[1] - state[3]) * n[1];
        if approach > S::zero() {
            let k = (S::one() + p(params.restitution)) * approach;
            out[2] += k * n[0];
            out[3] += k * n[1];
        }
    }
    Some(out)
}

/// Free motion of the object over one step: the box is static, the disk
/// glides and loses speed at a constant rate until it stops.
fn drift<S: Scalar>(params: &ManipParams, object: Object, state: &[S]) -> Vec<S> {
    match object {
        Object::Box => state.to_vec(),
        Object::Disk => {
            let dt = p::<S>(params.dt);
            let (vx, vy) = (state[2], state[3]);
            let speed = (vx * vx + vy * vy).sqrt();
            let reduced = (speed - p::<S>(params.friction_decel) * dt).max(S::zero());
            let scale = if speed > S::zero() { reduced / speed } else { S::zero() };
            vec![state[0] + vx * dt, state[1] + vy * dt, vx * scale, vy * scale]
        }
    }
}

pub(crate) fn step_virtual<S: Scalar>(
    params: &ManipParams,
    object: Object,
    real: &[S],
    real_next: &[S],
    inst: &VirtualInstance<S>,
    entry: EntryView<'_, S>,
    t: usize,
) -> VirtualInstance<S> {
    match inst.mode {
        Mode::Simulated => {
            let moved = drift(params, object, &inst.state);
            let state = resolve(params, object, real, real_next, &moved).unwrap_or(moved);
            VirtualInstance { state, ..inst.clone() }
        }
        Mode::Replay => {
            let candidate = entry.state(t + 1);
            match resolve(params, object, real, real_next, candidate) {
                None => VirtualInstance {
                    state: candidate.to_vec(),
                    ..inst.clone()
                },
                Some(state) => VirtualInstance {
                    state,
                    mode: Mode::Simulated,
                    contact_time: Some(t),
                    source_id: inst.source_id,
                },
            }
        }
    }
}

/// One whenever the object ends the step within the success radius of the
/// goal (boundary inclusive).
pub(crate) fn reward<S: Scalar>(params: &ManipParams, next: &HybridState<S>) -> S {
    let goal = next.goal.as_ref().expect("manipulation states carry a goal");
    if distance(&next.virt.state, goal, GOAL_DIM) <= p(params.success_radius) {
        S::one()
    } else {
        S::zero()
    }
}

pub(crate) fn terminal<S: Scalar>(params: &ManipParams, next: &HybridState<S>) -> Terminal {
    if next.time >= params.horizon {
        Terminal::TimeLimit
    } else {
        Terminal::NotDone
    }
}
