"""CartPole and Reacher with a previous-action nuisance channel.

Each environment exposes its true state to the expert and a disentangled
observation to the learner. The observation is the (optionally mixed) state
followed by ``nuisance_dims`` coordinates that replay the previous action,
scaled into ``[-1, 1]``. The nuisance plays the role of the brake light: it
is highly predictive of the next expert action yet never causes it.

Two initialization modes exist. ``"intervened"`` draws the initial state
uniformly from a box and the first nuisance value uniformly over the action
range, independently. ``"confounded"`` draws a scalar seed ``w ~ U(a, b)``
and derives both the initial state and the first nuisance value from it,
so they share a common cause.

All functions operate on batches: a state array of shape (B, d_S) advances
B trajectories at once. Every per-trajectory random draw comes from that
trajectory's own stream, so results do not depend on the batch split.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rngmod
from .data import Dataset

INIT_MODES = ("intervened", "confounded")
BLOWUP = 1e6


@dataclass(frozen=True)
class EnvSpec:
    kind: str
    dt: float
    steps: int
    action_low: tuple
    action_high: tuple
    constants: dict = field(default_factory=dict)
    init_box: tuple = ()
    nuisance_dims: int = 1
    mixing_epsilon: float = 0.0
    obs_noise: float = 0.0
    seed_range: tuple = (0.0, 1.0)

    @property
    def d_s(self):
        return len(self.init_box)

    @property
    def d_a(self):
        return len(self.action_low)

    @property
    def d_o(self):
        return self.d_s + self.nuisance_dims

    @property
    def dims(self):
        return (self.d_s, self.d_o, self.d_a)

    def clamp(self, action):
        return np.clip(action, self.action_low, self.action_high)

    def to_dict(self):
        return {
            "kind": self.kind, "dt": self.dt, "steps": self.steps,
            "action_low": list(self.action_low),
            "action_high": list(self.action_high),
            "constants": dict(self.constants),
            "init_box": [list(b) for b in self.init_box],
            "nuisance_dims": self.nuisance_dims,
            "mixing_epsilon": self.mixing_epsilon,
            "obs_noise": self.obs_noise,
            "seed_range": list(self.seed_range),
        }


def cartpole_spec(**overrides):
    spec = EnvSpec(
        kind="cartpole",
        dt=0.05,
        steps=100,
        action_low=(-25.0,),
        action_high=(25.0,),
        constants={
            "gravity": 9.8,
            "masscart": 1.0,
            "masspole": 0.1,
            "half_length": 0.5,
            # quadratic loss / LQR weights
            "q_diag": (1.0, 0.1, 10.0, 0.1),
            "r": 0.1,
        },
        # x, x_dot, theta, theta_dot
        init_box=((-1.0, 1.0), (-1.0, 1.0), (-0.3, 0.3), (-0.5, 0.5)),
        nuisance_dims=1,
        obs_noise=0.01,
    )
    return replace(spec, **overrides)


def reacher_spec(**overrides):
    spec = EnvSpec(
        kind="reacher",
        dt=0.05,
        steps=200,
        action_low=(-2.0, -2.0),
        action_high=(2.0, 2.0),
        constants={
            "mass": 1.0,
            "length": 0.5,
            "kp": 4.0,
            "kd": 4.0,
            "control_weight": 0.01,
            "target_radius": (0.2, 0.9),
            "target_angle": (0.0, np.pi / 2),
        },
        # target x, target y, theta1, theta1_dot, theta2, theta2_dot;
        # target bounds are the bounding box of the target sector
        init_box=((0.0, 0.9), (0.0, 0.9), (-np.pi / 2, np.pi / 2),
                  (-0.5, 0.5), (-np.pi / 2, np.pi / 2), (-0.5, 0.5)),
        nuisance_dims=2,
        obs_noise=0.01,
    )
    return replace(spec, **overrides)


ENVS = {"cartpole": cartpole_spec, "reacher": reacher_spec}


def make_spec(name, **overrides):
    try:
        return ENVS[name](**overrides)
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; choose from {sorted(ENVS)}") from None


# ---------------------------------------------------------------- dynamics

def _cartpole_step(c, dt, s, u):
    g, mc, mp, l = c["gravity"], c["masscart"], c["masspole"], c["half_length"]
    x, x_dot, th, th_dot = s[..., 0], s[..., 1], s[..., 2], s[..., 3]
    force = u[..., 0]
    cos, sin = np.cos(th), np.sin(th)
    total = mc + mp
    temp = (force + mp * l * th_dot ** 2 * sin) / total
    th_acc = (g * sin - cos * temp) / (l * (4.0 / 3.0 - mp * cos ** 2 / total))
    x_acc = temp - mp * l * th_acc * cos / total
    return np.stack([x + dt * x_dot, x_dot + dt * x_acc,
                     th + dt * th_dot, th_dot + dt * th_acc], axis=-1)


def _arm_terms(c, q2, dq1, dq2):
    """Mass matrix entries and Coriolis vector of the two uniform rods."""
    m, l = c["mass"], c["length"]
    lc = l / 2.0
    inertia = m * l ** 2 / 12.0
    cos2, sin2 = np.cos(q2), np.sin(q2)
    m11 = 2 * inertia + m * lc ** 2 + m * (l ** 2 + lc ** 2 + 2 * l * lc * cos2)
    m12 = inertia + m * (lc ** 2 + l * lc * cos2)
    m22 = inertia + m * lc ** 2
    h = m * l * lc * sin2
    c1 = -h * (2 * dq1 * dq2 + dq2 ** 2)
    c2 = h * dq1 ** 2
    return m11, m12, m22, c1, c2


def _reacher_step(c, dt, s, u):
    q1, dq1, q2, dq2 = s[..., 2], s[..., 3], s[..., 4], s[..., 5]
    m11, m12, m22, c1, c2 = _arm_terms(c, q2, dq1, dq2)
    b1 = u[..., 0] - c1
    b2 = u[..., 1] - c2
    det = m11 * m22 - m12 ** 2
    acc1 = (m22 * b1 - m12 * b2) / det
    acc2 = (m11 * b2 - m12 * b1) / det
    # semi-implicit Euler
    dq1n = dq1 + dt * acc1
    dq2n = dq2 + dt * acc2
    return np.stack([s[..., 0], s[..., 1], q1 + dt * dq1n, dq1n,
                     q2 + dt * dq2n, dq2n], axis=-1)


def step(spec, state, action):
    """Advance one time step. Actions outside the bounds are clamped."""
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise ValueError("state must be finite")
    action = spec.clamp(np.asarray(action, dtype=np.float64))
    if spec.kind == "cartpole":
        return _cartpole_step(spec.constants, spec.dt, state, action)
    if spec.kind == "reacher":
        return _reacher_step(spec.constants, spec.dt, state, action)
    raise ValueError(f"unknown environment kind {spec.kind!r}")


def end_effector(spec, state):
    l = spec.constants["length"]
    q1, q2 = state[..., 2], state[..., 4]
    return np.stack([l * np.cos(q1) + l * np.cos(q1 + q2),
                     l * np.sin(q1) + l * np.sin(q1 + q2)], axis=-1)


def _stage_loss(spec, state, action):
    c = spec.constants
    if spec.kind == "cartpole":
        q = np.asarray(c["q_diag"])
        return np.sum(q * state ** 2, axis=-1) + c["r"] * action[..., 0] ** 2
    dist = end_effector(spec, state) - state[..., :2]
    return (np.sum(dist ** 2, axis=-1)
            + c["control_weight"] * np.sum(action ** 2, axis=-1))


# ----------------------------------------------------------------- experts

def _wrap(angle):
    return (angle + np.pi) % (2 * np.pi) - np.pi


def linearize(spec, eps=1e-6):
    """Central-difference Jacobians of :func:`step` about the origin."""
    d_s, d_a = spec.d_s, spec.d_a
    s0, u0 = np.zeros(d_s), np.zeros(d_a)
    A = np.empty((d_s, d_s))
    B = np.empty((d_s, d_a))
    for i in range(d_s):
        e = np.zeros(d_s)
        e[i] = eps
        A[:, i] = (step(spec, s0 + e, u0) - step(spec, s0 - e, u0)) / (2 * eps)
    for i in range(d_a):
        e = np.zeros(d_a)
        e[i] = eps
        B[:, i] = (step(spec, s0, u0 + e) - step(spec, s0, u0 - e)) / (2 * eps)
    return A, B


def finite_horizon_lqr(A, B, Q, R, horizon):
    """First-stage gain of the finite-horizon discrete LQR problem.

    The backward Riccati recursion starts from ``P = Q``. Applying the
    returned gain at every step is the receding-horizon form of the
    finite-time optimal controller.
    """
    P = Q.copy()
    K = np.zeros((B.shape[1], A.shape[0]))
    for _ in range(horizon):
        K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P = Q + A.T @ P @ (A - B @ K)
    return K


@dataclass(frozen=True)
class ExpertPolicy:
    """A deterministic state-feedback expert with clamped output."""

    spec: EnvSpec
    gain: np.ndarray = None

    def __call__(self, state):
        return expert_action(self, state)


def make_expert(spec):
    if spec.kind == "cartpole":
        A, B = linearize(spec)
        Q = np.diag(spec.constants["q_diag"])
        R = np.atleast_2d(spec.constants["r"])
        return ExpertPolicy(spec, finite_horizon_lqr(A, B, Q, R, spec.steps))
    if spec.kind == "reacher":
        lo, hi = spec.constants["target_radius"]
        reach = 2 * spec.constants["length"]
        if not 0 < lo <= hi < reach:
            raise ValueError(f"target radii [{lo}, {hi}] not inside the "
                             f"reachable annulus (0, {reach})")
        return ExpertPolicy(spec)
    raise ValueError(f"unknown environment kind {spec.kind!r}")


def inverse_kinematics(spec, target, q_now):
    """Joint angles reaching ``target``; picks the elbow branch nearest ``q_now``."""
    l = spec.constants["length"]
    tx, ty = target[..., 0], target[..., 1]
    r2 = tx ** 2 + ty ** 2
    cos2 = np.clip((r2 - 2 * l ** 2) / (2 * l ** 2), -1.0, 1.0)
    base = np.arctan2(ty, tx)
    best = None
    for sign in (1.0, -1.0):
        q2 = sign * np.arccos(cos2)
        q1 = base - np.arctan2(l * np.sin(q2), l + l * np.cos(q2))
        cand = np.stack([q1, q2], axis=-1)
        dist = np.sum(_wrap(cand - q_now) ** 2, axis=-1)
        if best is None:
            best, best_dist = cand, dist
        else:
            pick = dist < best_dist
            best = np.where(pick[..., None], cand, best)
            best_dist = np.where(pick, dist, best_dist)
    return best


def expert_action(policy, state):
    """Expert action for a state (or batch of states), clamped to bounds."""
    spec = policy.spec
    state = np.asarray(state, dtype=np.float64)
    if not np.all(np.isfinite(state)):
        raise ValueError("state must be finite")
    if spec.kind == "cartpole":
        return spec.clamp(-state @ policy.gain.T)
    c = spec.constants
    q = state[..., [2, 4]]
    dq = state[..., [3, 5]]
    err = _wrap(inverse_kinematics(spec, state[..., :2], q) - q)
    v = c["kp"] * err - c["kd"] * dq
    m11, m12, m22, c1, c2 = _arm_terms(c, q[..., 1], dq[..., 0], dq[..., 1])
    tau = np.stack([m11 * v[..., 0] + m12 * v[..., 1] + c1,
                    m12 * v[..., 0] + m22 * v[..., 1] + c2], axis=-1)
    return spec.clamp(tau)


# ------------------------------------------------------------ observations

def mixing_matrix(spec):
    """Fixed perturbation ``M`` (unit spectral norm) for imperfect disentanglement."""
    g = rngmod.stream(0, rngmod.MIXING, spec.d_s)
    M = g.standard_normal((spec.d_s, spec.d_s))
    return M / np.linalg.norm(M, 2)


def nuisance_from_action(spec, action):
    return np.asarray(action) / np.asarray(spec.action_high)


def _half_widths(spec):
    box = np.asarray(spec.init_box)
    return (box[:, 1] - box[:, 0]) / 2


def observe(spec, state, nuisance, noise=None):
    """Observation from state and the (already scaled) nuisance values.

    ``nuisance`` is the previous action mapped into ``[-1, 1]``, or for the
    first step the mode-dependent initial draw (see :func:`initial_conditions`).
    ``noise`` is a standard normal draw of shape ``state.shape``; it is scaled
    by ``spec.obs_noise`` times the init-box half-widths and added to the state
    channels, standing in for an imperfect encoder.
    """
    state = np.asarray(state, dtype=np.float64)
    feat = state
    if spec.mixing_epsilon:
        M = mixing_matrix(spec)
        feat = state + spec.mixing_epsilon * state @ M.T
    if spec.obs_noise and noise is not None:
        feat = feat + spec.obs_noise * _half_widths(spec) * noise
    return np.concatenate([feat, np.asarray(nuisance, dtype=np.float64)],
                          axis=-1)


def _sample_target(spec, u_radius, u_angle):
    lo, hi = spec.constants["target_radius"]
    alo, ahi = spec.constants["target_angle"]
    r = np.sqrt(lo ** 2 + u_radius * (hi ** 2 - lo ** 2))
    phi = alo + u_angle * (ahi - alo)
    return r * np.cos(phi), r * np.sin(phi)


def _initial_intervened(spec, g):
    box = np.asarray(spec.init_box)
    s = box[:, 0] + g.random(spec.d_s) * (box[:, 1] - box[:, 0])
    if spec.kind == "reacher":
        s[0], s[1] = _sample_target(spec, g.random(), g.random())
    nuisance = g.uniform(-1.0, 1.0, spec.nuisance_dims)
    return s, nuisance, np.nan


def _initial_confounded(spec, g):
    a, b = spec.seed_range
    w = g.uniform(a, b)
    u = (w - a) / (b - a)
    box = np.asarray(spec.init_box)
    center = box.mean(axis=1)
    half = _half_widths(spec)
    phase = np.arange(spec.d_s) / spec.d_s
    s = (center + 0.8 * half * np.cos(np.pi * (u + phase))
         + 0.05 * half * g.standard_normal(spec.d_s))
    if spec.kind == "reacher":
        s[0], s[1] = _sample_target(spec, u, 1.0 - u)
        s[:2] += 0.01 * g.standard_normal(2)
    nuisance = np.cos(np.pi * (u + np.arange(spec.nuisance_dims) / 2))
    return s, nuisance, w


def initial_conditions(spec, init_mode, g):
    """Draw ``(state, first nuisance, seed w)`` for one trajectory."""
    if init_mode == "intervened":
        return _initial_intervened(spec, g)
    if init_mode == "confounded":
        return _initial_confounded(spec, g)
    raise ValueError(f"unknown init mode {init_mode!r}; choose from {INIT_MODES}")


# ---------------------------------------------------------------- rollouts

@dataclass
class Rollouts:
    """Batch of rollouts. Arrays are (B, T, d); ``length`` counts valid steps."""

    states: np.ndarray
    observations: np.ndarray
    actions: np.ndarray
    loss: np.ndarray
    truncated: np.ndarray
    length: np.ndarray
    seeds_w: np.ndarray


def rollout_batch(spec, policy, init_mode, seeds, policy_kind="state"):
    """Roll out one trajectory per seed.

    ``policy`` maps a batch of states to actions when ``policy_kind`` is
    ``"state"`` (experts). With ``"observation"`` it is an object with a
    ``reset(batch)`` method and ``act(observations)`` returning actions,
    which lets learned policies keep their own frame history. Actions are
    clamped before they reach the dynamics and the nuisance channel.
    """
    seeds = list(seeds)
    B, T = len(seeds), spec.steps
    d_s, d_o, d_a = spec.dims
    S = np.zeros((B, T, d_s))
    O = np.zeros((B, T, d_o))
    A = np.zeros((B, T, d_a))
    loss = np.zeros(B)
    length = np.full(B, T)
    truncated = np.zeros(B, dtype=bool)
    ws = np.empty(B)
    s = np.empty((B, d_s))
    nuis = np.empty((B, spec.nuisance_dims))
    noise = np.empty((B, T, d_s))
    for i, seed in enumerate(seeds):
        g = rngmod.stream(seed, rngmod.TRAJECTORY)
        s[i], nuis[i], ws[i] = initial_conditions(spec, init_mode, g)
        noise[i] = g.standard_normal((T, d_s))
    if policy_kind == "observation":
        policy.reset(B)
    alive = np.ones(B, dtype=bool)
    for t in range(T):
        o = observe(spec, s, nuis, noise[:, t])
        if policy_kind == "state":
            a = spec.clamp(policy(s))
        else:
            a = spec.clamp(policy.act(o))
        S[alive, t], O[alive, t], A[alive, t] = s[alive], o[alive], a[alive]
        loss[alive] += _stage_loss(spec, s[alive], a[alive])
        s = step(spec, np.where(alive[:, None], s, 0.0), a)
        nuis = nuisance_from_action(spec, a)
        bad = alive & ~(np.all(np.abs(s) <= BLOWUP, axis=1))
        if bad.any():
            truncated |= bad
            length[bad] = t + 1
            alive &= ~bad
            s[bad] = 0.0
        if not alive.any():
            break
    return Rollouts(S, O, A, loss, truncated, length, ws)


def rollout(spec, policy, init_mode, rng_seed):
    """Single rollout. Returns ``(Trajectory-like arrays, loss, truncated)``."""
    r = rollout_batch(spec, policy, init_mode, [rng_seed])
    n = r.length[0]
    return (r.states[0, :n], r.observations[0, :n], r.actions[0, :n],
            float(r.loss[0]), bool(r.truncated[0]))


def trajectory_seeds(seed, n):
    return [rngmod.child_seed(seed, rngmod.TRAJECTORY, i) for i in range(n)]


def generate_dataset(spec, n, init_mode="intervened", seed=0, batch=500):
    """Expert dataset of ``n`` trajectories. Batching never changes the result."""
    if n < 1:
        raise ValueError("n must be positive")
    policy = make_expert(spec)
    seeds = trajectory_seeds(seed, n)
    parts = [rollout_batch(spec, policy, init_mode, seeds[k:k + batch])
             for k in range(0, n, batch)]
    if any(p.truncated.any() for p in parts):
        raise RuntimeError("expert rollout diverged")
    manifest = {
        "source": spec.kind,
        "init_mode": init_mode,
        "seed": int(seed),
        "N": int(n),
        "dims": list(spec.dims),
        "T": spec.steps,
        "spec": spec.to_dict(),
    }
    return Dataset.from_arrays(
        np.concatenate([p.states for p in parts]),
        np.concatenate([p.observations for p in parts]),
        np.concatenate([p.actions for p in parts]),
        manifest)
