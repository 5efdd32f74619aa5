"""Behavior cloning on masked observation histories.

A policy maps the last ``L`` observation frames (masked coordinates set to
zero, missing history replaced by an all-zero frame) to an action. Two
policy classes are provided: ridge regression, solved in closed form, and a
one-hidden-layer tanh network trained by seeded mini-batch Adam.

Closed-loop evaluation runs the policy in the environment from intervened
initial states. The nuisance channel then carries the policy's own previous
action, which is how a policy that copies the nuisance goes wrong.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import envs
from . import rng as _rng
from .masking import MaskConfig, ObservationMask, compute_mask

__all__ = [
    "TrainConfig",
    "PolicyModel",
    "EvalResult",
    "features",
    "train",
    "evaluate",
    "manual_mask",
    "open_loop_mse",
    "compare_arms",
]

RIDGE = "ridge"
MLP = "mlp"


@dataclass(frozen=True)
class TrainConfig:
    """Policy class and hyperparameters.

    ``lam`` is the ridge penalty added to the summed squared error (the
    intercept is not penalized). ``history`` is the number of stacked
    frames ``L``. With ``full_history_only`` the fit uses time steps that
    have ``L`` real frames; the zero frame still stands in for missing
    history when acting.
    """

    kind: str = RIDGE
    lam: float = 1e-3
    history: int = 2
    full_history_only: bool = True
    hidden: int = 64
    epochs: int = 30
    lr: float = 3e-3
    batch_size: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (RIDGE, MLP):
            raise ValueError(f"policy kind must be 'ridge' or 'mlp', got {self.kind!r}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"lam must be finite and >= 0, got {self.lam}")
        for name in ("history", "hidden", "epochs", "batch_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not (self.lr > 0 and math.isfinite(self.lr)):
            raise ValueError(f"lr must be positive, got {self.lr}")


def features(frames, mask):
    """Stack frames newest first and zero masked coordinates.

    ``frames`` has shape (..., L, d_O) with ``frames[..., 0, :]`` the
    current observation. Returns shape (..., L * d_O).
    """
    keep = ~mask.as_array()
    x = np.where(keep, frames, 0.0)
    return x.reshape(*x.shape[:-2], -1)


def history_frames(obs, L):
    """(N, T, d_O) observations to (N, T, L, d_O) histories with zero padding."""
    N, T, d_o = obs.shape
    pad = np.concatenate([np.zeros((N, L - 1, d_o)), obs], axis=1)
    return np.stack([pad[:, L - 1 - k:L - 1 - k + T] for k in range(L)], axis=2)


@dataclass
class PolicyModel:
    """A fitted policy; callable on (B, L * d_O) feature rows."""

    kind: str
    history: int
    mask: ObservationMask
    weights: dict
    hyperparameters: dict = field(default_factory=dict)

    @property
    def d_o(self):
        return len(self.mask)

    def predict(self, x):
        x = np.asarray(x, dtype=np.float64)
        w = self.weights
        if self.kind == RIDGE:
            return x @ w["W"] + w["b"]
        z = (x - w["x_mean"]) / w["x_scale"]
        z = np.where(_feature_keep(self), z, 0.0)
        return _mlp_forward(w, z)[0]

    def act_on_frames(self, frames):
        return self.predict(features(frames, self.mask))

    # observation-policy interface used by envs.rollout_batch
    def reset(self, batch):
        self._hist = np.zeros((batch, self.history, self.d_o))

    def act(self, obs):
        self._hist = np.roll(self._hist, 1, axis=1)
        self._hist[:, 0] = obs
        return self.act_on_frames(self._hist)

    def to_dict(self):
        return {"kind": self.kind, "L": self.history,
                "mask": self.mask.to_list(),
                "weights": {k: {"shape": list(np.shape(v)),
                                "data": np.ravel(v).tolist()}
                            for k, v in sorted(self.weights.items())},
                "hyperparameters": self.hyperparameters}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, doc):
        weights = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                   for k, v in doc["weights"].items()}
        return cls(doc["kind"], int(doc["L"]), ObservationMask(doc["mask"]),
                   weights, dict(doc.get("hyperparameters", {})))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def _feature_keep(model):
    return np.tile(~model.mask.as_array(), model.history)


def _design(data, mask, cfg):
    obs = data.stacked("o")
    act = data.stacked("a")
    L = cfg.history
    x = features(history_frames(obs, L), mask)
    start = min(L - 1, obs.shape[1] - 1) if cfg.full_history_only else 0
    x = x[:, start:].reshape(-1, x.shape[-1])
    y = act[:, start:].reshape(-1, act.shape[-1])
    return x, y


def train(data, mask=None, cfg=TrainConfig()):
    """Fit a policy to the expert actions of ``data``.

    Parameters
    ----------
    data : Dataset
    mask : ObservationMask, optional
        Coordinates to hide; ``None`` keeps everything.
    cfg : TrainConfig

    Raises
    ------
    ValueError
        If the ridge normal equations are singular with ``lam == 0``.
    """
    d_o = data.dims[1]
    mask = ObservationMask.none(d_o) if mask is None else mask
    if len(mask) != d_o:
        raise ValueError(f"mask has length {len(mask)}, data has d_O={d_o}")
    x, y = _design(data, mask, cfg)
    hp = {k: v for k, v in asdict(cfg).items()}
    if cfg.kind == RIDGE:
        keep = np.tile(~mask.as_array(), cfg.history)
        W, b = _ridge(x[:, keep], y, cfg.lam)
        full = np.zeros((x.shape[1], y.shape[1]))
        full[keep] = W
        weights = {"W": full, "b": b}
    else:
        weights = _fit_mlp(x, y, np.tile(~mask.as_array(), cfg.history), cfg)
    return PolicyModel(cfg.kind, cfg.history, mask, weights, hp)


def _ridge(x, y, lam):
    """Minimize ``||x W + b - y||^2 + lam ||W||^2`` (sum over samples)."""
    xm = x.mean(axis=0)
    ym = y.mean(axis=0)
    xc = x - xm
    gram = xc.T @ xc + lam * np.eye(x.shape[1])
    if x.shape[1] == 0:
        return np.zeros((0, y.shape[1])), ym
    if lam == 0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise ValueError("normal equations are singular; use a ridge "
                         "penalty lam > 0")
    W = np.linalg.solve(gram, xc.T @ (y - ym))
    return W, ym - xm @ W


def ridge_gradient(model, data, cfg=None):
    """Gradient of the ridge objective at the model's weights (for checks)."""
    cfg = cfg or TrainConfig(**{k: v for k, v in model.hyperparameters.items()
                                if k in TrainConfig.__dataclass_fields__})
    x, y = _design(data, model.mask, cfg)
    keep = _feature_keep(model)
    W = model.weights["W"][keep]
    r = x[:, keep] @ W + model.weights["b"] - y
    return 2 * x[:, keep].T @ r + 2 * cfg.lam * W, 2 * r.sum(axis=0)


# ---------------------------------------------------------------------- mlp

def _mlp_forward(w, z):
    h = np.tanh(z @ w["W1"] + w["b1"])
    return h @ w["W2"] + w["b2"], h


def mlp_loss_and_grad(w, z, y):
    """Mean squared error of the network and its gradient per parameter."""
    out, h = _mlp_forward(w, z)
    n = z.shape[0]
    r = out - y
    loss = float(np.sum(r * r) / n)
    g_out = 2 * r / n
    g = {"W2": h.T @ g_out, "b2": g_out.sum(axis=0)}
    g_h = (g_out @ w["W2"].T) * (1 - h * h)
    g["W1"] = z.T @ g_h
    g["b1"] = g_h.sum(axis=0)
    return loss, g


def init_mlp(d_in, d_out, hidden, g):
    return {"W1": g.standard_normal((d_in, hidden)) / np.sqrt(max(d_in, 1)),
            "b1": np.zeros(hidden),
            "W2": g.standard_normal((hidden, d_out)) / np.sqrt(hidden),
            "b2": np.zeros(d_out)}


def _fit_mlp(x, y, keep, cfg):
    g = _rng.stream(cfg.seed, _rng.TRAIN)
    x_mean = np.where(keep, x.mean(axis=0), 0.0)
    x_scale = np.where(keep, x.std(axis=0), 1.0)
    x_scale[x_scale == 0] = 1.0
    z = np.where(keep, (x - x_mean) / x_scale, 0.0)
    w = init_mlp(x.shape[1], y.shape[1], cfg.hidden, g)
    m = {k: np.zeros_like(v) for k, v in w.items()}
    v2 = {k: np.zeros_like(v) for k, v in w.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8
    step = 0
    n = x.shape[0]
    for _ in range(cfg.epochs):
        perm = g.permutation(n)
        for k in range(0, n, cfg.batch_size):
            idx = perm[k:k + cfg.batch_size]
            _, grad = mlp_loss_and_grad(w, z[idx], y[idx])
            step += 1
            for name in w:
                m[name] = b1 * m[name] + (1 - b1) * grad[name]
                v2[name] = b2 * v2[name] + (1 - b2) * grad[name] ** 2
                mh = m[name] / (1 - b1 ** step)
                vh = v2[name] / (1 - b2 ** step)
                w[name] = w[name] - cfg.lr * mh / (np.sqrt(vh) + eps)
    w["x_mean"] = x_mean
    w["x_scale"] = x_scale
    return w


# --------------------------------------------------------------- evaluation

@dataclass
class EvalResult:
    """Closed-loop losses of one evaluation run."""

    losses: np.ndarray
    truncated: np.ndarray
    rng_seed: int
    open_loop_mse: float = float("nan")

    @property
    def rollouts(self):
        return len(self.losses)

    @property
    def mean(self):
        return float(np.mean(self.losses))

    @property
    def std(self):
        return float(np.std(self.losses))

    def rows(self):
        return [(i, float(l), int(t))
                for i, (l, t) in enumerate(zip(self.losses, self.truncated))]


def evaluate(policy, spec, rollouts=25, rng_seed=0):
    """Run ``rollouts`` closed-loop episodes from intervened initial states."""
    if int(rollouts) < 1:
        raise ValueError(f"rollouts must be >= 1, got {rollouts}")
    if len(policy.mask) != spec.d_o:
        raise ValueError(f"policy expects d_O={len(policy.mask)}, "
                         f"environment has {spec.d_o}")
    seeds = envs.trajectory_seeds(_rng.child_seed(rng_seed, _rng.EVAL),
                                  int(rollouts))
    r = envs.rollout_batch(spec, policy, "intervened", seeds,
                           policy_kind="observation")
    return EvalResult(r.loss.copy(), r.truncated.copy(), int(rng_seed))


def open_loop_mse(policy, data):
    """Mean squared action error on every time step of ``data``."""
    frames = history_frames(data.stacked("o"), policy.history)
    pred = policy.act_on_frames(frames)
    return float(np.mean((pred - data.stacked("a")) ** 2))


def manual_mask(spec):
    """Ground-truth mask: exactly the nuisance coordinates."""
    return ObservationMask((False,) * spec.d_s + (True,) * spec.nuisance_dims)


RESULT_HEADER = ("seed", "rollout_idx", "loss", "truncated_flag")


def save_results(results, path):
    """Per-rollout CSV for a list of :class:`EvalResult`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for res in results:
            for i, loss, trunc in res.rows():
                w.writerow((res.rng_seed, i, repr(loss), trunc))


def load_results(path):
    """Read a per-rollout CSV back into ``{seed: EvalResult}``."""
    by_seed = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_seed.setdefault(int(row["seed"]), []).append(
                (float(row["loss"]), bool(int(row["truncated_flag"]))))
    return {s: EvalResult(np.array([l for l, _ in v]),
                          np.array([t for _, t in v]), s)
            for s, v in by_seed.items()}


ARMS = ("vanilla", "masked", "manual")


@dataclass
class ArmComparison:
    """Per-seed mean closed-loop loss of each arm."""

    per_seed: dict
    masks: list

    def mean(self, arm):
        return float(np.mean(self.per_seed[arm]))

    def std(self, arm):
        return float(np.std(self.per_seed[arm]))


def compare_arms(spec, seeds=5, rollouts=25, n=1000, rng_seed=0,
                 mask_cfg=MaskConfig(), train_cfg=TrainConfig()):
    """Vanilla, masked and manually masked cloning over several seeds.

    Each seed generates its own intervened expert dataset, computes the
    mask on it, trains the three arms and evaluates each on the same
    ``rollouts`` initial conditions.
    """
    per_seed = {arm: [] for arm in ARMS}
    masks = []
    for k in range(int(seeds)):
        seed = _rng.child_seed(rng_seed, _rng.TRIAL, k)
        data = envs.generate_dataset(spec, n, "intervened", seed)
        mask, _ = compute_mask(data, mask_cfg)
        masks.append(mask)
        arms = {"vanilla": None, "masked": mask, "manual": manual_mask(spec)}
        for arm, m in arms.items():
            policy = train(data, m, train_cfg)
            per_seed[arm].append(evaluate(policy, spec, rollouts, seed).mean)
    return ArmComparison(per_seed, masks)
