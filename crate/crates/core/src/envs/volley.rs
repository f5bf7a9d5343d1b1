//! Interception: ballistic ball, tilted paddle behind a velocity lag.
//!
//! Real state `[paddle_y, paddle_vy, lag_filter]`; virtual state
//! `[ball_x, ball_y, ball_vx, ball_vy]`; one action, the commanded paddle
//! velocity scaled to `[-1, 1]`.

use rand::Rng;

use crate::domain::{EntryView, HybridState, Mode, Terminal, VirtualInstance};
use crate::scalar::Scalar;

use super::params::VolleyParams;

pub(crate) const REAL_DIM: usize = 3;
pub(crate) const VIRT_DIM: usize = 4;

fn p<S: Scalar>(x: f64) -> S {
    S::lit(x)
}

/// Paddle height around 0.25 m and speeds up to the paddle limit; ball
/// position in metres over a 1 m flight and speeds of a few m/s.
pub(crate) fn obs_scale<S: Scalar>(params: &VolleyParams) -> Vec<S> {
    let v = 1.0 / params.max_paddle_speed;
    let x = 1.0 / (params.launch_x - params.paddle_x).abs().max(1e-3);
    [4.0, v, v, x, 4.0, 0.3, 0.5].iter().map(|&f| p(f)).collect()
}

pub(crate) fn initial_real<S: Scalar>(params: &VolleyParams) -> Vec<S> {
    vec![p(params.paddle_y0), S::zero(), S::zero()]
}

/// Two cascaded first-order lags on the commanded velocity, then a
/// semi-implicit Euler position update.
pub(crate) fn step_real<S: Scalar>(params: &VolleyParams, real: &[S], action: &[S]) -> Vec<S> {
    let alpha = p::<S>(params.dt / params.lag_tau);
    let command = action[0] * p(params.max_paddle_speed);
    let filter = real[2] + alpha * (command - real[2]);
    let velocity = real[1] + alpha * (filter - real[1]);
    let position = real[0] + velocity * p(params.dt);
    vec![position, velocity, filter]
}

/// One explicit Euler step of free flight.
pub(crate) fn ballistic_step<S: Scalar>(params: &VolleyParams, ball: &[S]) -> Vec<S> {
    let dt = p::<S>(params.dt);
    vec![
        ball[0] + ball[2] * dt,
        ball[1] + ball[3] * dt,
        ball[2],
        ball[3] - p::<S>(params.gravity) * dt,
    ]
}

/// Samples a launch state and integrates it for `steps` steps, giving
/// `steps + 1` states laid out flat.
pub(crate) fn sample_ball_sequence<S: Scalar, R: Rng + ?Sized>(
    params: &VolleyParams,
    steps: usize,
    rng: &mut R,
) -> Vec<S> {
    let u = |rng: &mut R, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let y0 = u(rng, params.launch_y_min, params.launch_y_max);
    let t_arr = u(rng, params.arrival_time_min, params.arrival_time_max);
    let y_arr = u(rng, params.arrival_y_min, params.arrival_y_max);
    let vx = -(params.launch_x - params.paddle_x) / t_arr;
    let vy = (y_arr - y0 + 0.5 * params.gravity * t_arr * t_arr) / t_arr;
    let mut ball: Vec<S> = vec![p(params.launch_x), p(y0), p(vx), p(vy)];
    let mut out = Vec::with_capacity((steps + 1) * VIRT_DIM);
    out.extend_from_slice(&ball);
    for _ in 0..steps {
        ball = ballistic_step(params, &ball);
        out.extend_from_slice(&ball);
    }
    out
}

/// Paddle frame: unit normal (facing the incoming ball) and unit tangent.
pub(crate) fn paddle_frame<S: Scalar>(params: &VolleyParams) -> ([S; 2], [S; 2]) {
    let (s, c) = p::<S>(params.paddle_tilt).sin_cos();
    ([c, s], [-s, c])
}

/// Contact geometry between a ball step and a paddle step.
struct Contact<S> {
    /// Tangential coordinate of the contact point along the paddle.
    along: S,
}

/// Detects contact during one step: the ball starts in front of the paddle
/// and ends overlapping or behind it, and the crossing point falls inside
/// the paddle segment extruded by the ball radius.
fn detect_contact<S: Scalar>(
    params: &VolleyParams,
    real: &[S],
    real_next: &[S],
    ball: &[S],
    ball_next: &[S],
) -> Option<Contact<S>> {
    let (n, t) = paddle_frame::<S>(params);
    let px = p::<S>(params.paddle_x);
    let r = p::<S>(params.ball_radius);
    let half = p::<S>(params.paddle_half_length);
    let rel = |b: &[S], py: S| [b[0] - px, b[1] - py];
    let before = rel(ball, real[0]);
    let after = rel(ball_next, real_next[0]);
    let d0 = before[0] * n[0] + before[1] * n[1];
    let d1 = after[0] * n[0] + after[1] * n[1];
    if d0 <= r || d1 > r {
        return None;
    }
    let lambda = ((d0 - r) / (d0 - d1)).max(S::zero()).min(S::one());
    let s0 = before[0] * t[0] + before[1] * t[1];
    let s1 = after[0] * t[0] + after[1] * t[1];
    let along = s0 + lambda * (s1 - s0);
    if along.abs() <= half {
        Some(Contact { along })
    } else {
        None
    }
}

/// Reflects the ball velocity about the paddle normal in the paddle frame,
/// with restitution: `v' = v - (1 + e) ((v - v_p) . n) n`.
pub(crate) fn reflect<S: Scalar>(params: &VolleyParams, ball_velocity: [S; 2], paddle_vy: S) -> [S; 2] {
    let (n, _) = paddle_frame::<S>(params);
    let e = p::<S>(params.restitution);
    let rel_n = ball_velocity[0] * n[0] + (ball_velocity[1] - paddle_vy) * n[1];
    if rel_n >= S::zero() {
        return ball_velocity;
    }
    let k = (S::one() + e) * rel_n;
    [ball_velocity[0] - k * n[0], ball_velocity[1] - k * n[1]]
}

pub(crate) fn step_virtual<S: Scalar>(
    params: &VolleyParams,
    real: &[S],
    real_next: &[S],
    inst: &VirtualInstance<S>,
    entry: EntryView<'_, S>,
    t: usize,
) -> VirtualInstance<S> {
    match inst.mode {
        Mode::Simulated => VirtualInstance {
            state: ballistic_step(params, &inst.state),
            ..inst.clone()
        },
        Mode::Replay => {
            let candidate = entry.state(t + 1);
            match detect_contact(params, real, real_next, &inst.state, candidate) {
                None => VirtualInstance {
                    state: candidate.to_vec(),
                    ..inst.clone()
                },
                Some(contact) => {
                    let (n, tan) = paddle_frame::<S>(params);
                    let r = p::<S>(params.ball_radius);
                    let px = p::<S>(params.paddle_x);
                    let x = px + contact.along * tan[0] + r * n[0];
                    let y = real_next[0] + contact.along * tan[1] + r * n[1];
                    let v = reflect(params, [candidate[2], candidate[3]], real_next[1]);
                    VirtualInstance {
                        state: vec![x, y, v[0], v[1]],
                        mode: Mode::Simulated,
                        contact_time: Some(t),
                        source_id: inst.source_id,
                    }
                }
            }
        }
    }
}

/// Where a free-flying ball crosses the table plane `y = 0`.
pub(crate) fn landing_x<S: Scalar>(params: &VolleyParams, ball: &[S]) -> S {
    let g = p::<S>(params.gravity);
    let (y, vx, vy) = (ball[1].max(S::zero()), ball[2], ball[3]);
    let t_land = (vy + (vy * vy + p::<S>(2.0) * g * y).sqrt()) / g;
    ball[0] + vx * t_land
}

/// One if this step produced the contact and the analytically propagated
/// landing point lies within the success radius of the target.
pub(crate) fn reward<S: Scalar>(params: &VolleyParams, state: &HybridState<S>, next: &HybridState<S>) -> S {
    let contacted = state.virt.mode == Mode::Replay && next.virt.mode == Mode::Simulated;
    if contacted && (landing_x(params, &next.virt.state) - p(params.target_x)).abs() <= p(params.success_radius) {
        S::one()
    } else {
        S::zero()
    }
}

/// A stream ends at contact, once the ball is behind the paddle plane or on
/// the floor, or at the step cap.
pub(crate) fn terminal<S: Scalar>(params: &VolleyParams, next: &HybridState<S>) -> Terminal {
    let ball = &next.virt.state;
    let (n, _) = paddle_frame::<S>(params);
    let d = (ball[0] - p(params.paddle_x)) * n[0] + (ball[1] - next.real[0]) * n[1];
    if next.virt.mode == Mode::Simulated || d < S::zero() || ball[1] < S::zero() {
        Terminal::EnvDone
    } else if next.time >= params.max_steps {
        Terminal::TimeLimit
    } else {
        Terminal::NotDone
    }
}
