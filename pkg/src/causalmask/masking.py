"""Observation masking from initial-state-intervened trajectories.

An observation coordinate ``o`` is a *potential cause* of action coordinate
``a`` at time ``t'`` when some state coordinate ``s`` of the initial state
is dependent both on ``O_1[o]`` and on ``A_t'[a]``::

    O_1[o] ⇢ A_t'[a]  <=>  OR_s [ D(S_1[s], O_1[o]) > gamma
                                  AND D(S_1[s], A_t'[a]) > gamma ]

with ``D`` Hoeffding's statistic over one pair per trajectory. The mask
hides exactly the coordinates that are a potential cause of no action
coordinate at any ``t'`` in ``1..H``. With the initial state drawn from a
density that ignores the seed, a spurious observation shares no state
parent with the actions and is masked, while an observation the expert
genuinely reacts to is never masked.

This module also holds the empirical verification suites built on the
fixture SCMs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .independence import DEFAULT_GAMMA, hoeffding_d

__all__ = [
    "MaskConfig",
    "ObservationMask",
    "DependenceReport",
    "check_potential_cause",
    "compute_mask",
    "save_mask",
    "load_mask",
    "save_report",
    "VerifyReport",
    "verify_conservativeness",
    "verify_monotonicity",
    "verify_prop1",
    "SUITES",
]


@dataclass(frozen=True)
class MaskConfig:
    """Reaction horizon ``H`` and dependence threshold ``gamma``."""

    horizon: int = 3
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class ObservationMask:
    """Boolean vector over observation coordinates; ``True`` hides it."""

    bits: tuple

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))

    @classmethod
    def none(cls, d_o):
        return cls((False,) * d_o)

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def as_array(self):
        return np.array(self.bits, dtype=bool)

    def to_list(self):
        return [int(b) for b in self.bits]

    @property
    def masked(self):
        """1-based indices of masked coordinates."""
        return tuple(i + 1 for i, b in enumerate(self.bits) if b)

    def issubset(self, other):
        """Every coordinate masked here is also masked in ``other``."""
        if len(other) != len(self):
            raise ValueError("masks of different length")
        return all(o or not s for s, o in zip(self.bits, other.bits))

    def __str__(self):
        return "(" + ",".join(str(b) for b in self.to_list()) + ")"


@dataclass(frozen=True)
class DependenceReport:
    """Every dependence value the mask was computed from.

    ``state_obs[s, o] = D(S_1[s], O_1[o])`` and
    ``state_action[s, a, k] = D(S_1[s], A_{k+1}[a])`` (0-based arrays).
    """

    gamma: float
    horizon: int
    state_obs: np.ndarray
    state_action: np.ndarray

    @property
    def dims(self):
        d_s, d_o = self.state_obs.shape
        return d_s, d_o, self.state_action.shape[1]

    @property
    def potential_cause(self):
        """Boolean ``(d_O, d_A, H)`` table of ``O_1[o] ⇢ A_t'[a]``."""
        obs = self.state_obs > self.gamma
        act = self.state_action > self.gamma
        return np.any(obs[:, :, None, None] & act[:, None, :, :], axis=0)

    def mask(self):
        pc = self.potential_cause
        return ObservationMask(~pc.reshape(pc.shape[0], -1).any(axis=1))

    def rows(self):
        """Flat rows ``(kind, s_idx, target_idx, t_prime, d_value, exceeds)``."""
        out = []
        d_s, d_o, d_a = self.dims
        for s in range(d_s):
            for o in range(d_o):
                d = float(self.state_obs[s, o])
                out.append(("obs", s + 1, o + 1, "", d, int(d > self.gamma)))
        for s in range(d_s):
            for a in range(d_a):
                for k in range(self.horizon):
                    d = float(self.state_action[s, a, k])
                    out.append(("act", s + 1, a + 1, k + 1, d,
                                int(d > self.gamma)))
        return out


def _validate(data, cfg, t_prime=None):
    if data.N < 5:
        raise ValueError(f"masking needs N >= 5 trajectories, got {data.N}")
    if cfg.horizon > data.min_T:
        raise ValueError(f"horizon H={cfg.horizon} exceeds trajectory "
                         f"length T={data.min_T}")
    if t_prime is not None and not 1 <= t_prime <= cfg.horizon:
        raise ValueError(f"t_prime must lie in [1, {cfg.horizon}], got {t_prime}")


def check_potential_cause(data, o_idx, a_idx, t_prime, cfg=MaskConfig()):
    """Whether ``O_1[o_idx] ⇢ A_t'[a_idx]`` (1-based indices).

    Tests state coordinates in order and stops at the first one that is
    dependent on both sides.
    """
    d_s, d_o, d_a = data.dims
    if not 1 <= o_idx <= d_o:
        raise ValueError(f"o_idx must lie in [1, {d_o}], got {o_idx}")
    if not 1 <= a_idx <= d_a:
        raise ValueError(f"a_idx must lie in [1, {d_a}], got {a_idx}")
    if t_prime > data.min_T:
        raise ValueError(f"t_prime={t_prime} exceeds trajectory length {data.min_T}")
    _validate(data, cfg, t_prime)
    s1 = data.at("s", 1)
    o1 = data.at("o", 1)[:, o_idx - 1]
    at = data.at("a", t_prime)[:, a_idx - 1]
    for s in range(d_s):
        if (hoeffding_d(s1[:, s], o1) > cfg.gamma
                and hoeffding_d(s1[:, s], at) > cfg.gamma):
            return True
    return False


def dependence_report(data, cfg=MaskConfig()):
    """Evaluate the ``d_S x d_O`` and ``d_S x d_A x H`` test matrices once."""
    _validate(data, cfg)
    d_s, d_o, d_a = data.dims
    s1 = data.at("s", 1)
    o1 = data.at("o", 1)
    state_obs = np.empty((d_s, d_o))
    state_action = np.empty((d_s, d_a, cfg.horizon))
    for s in range(d_s):
        for o in range(d_o):
            state_obs[s, o] = hoeffding_d(s1[:, s], o1[:, o])
    for k in range(cfg.horizon):
        at = data.at("a", k + 1)
        for s in range(d_s):
            for a in range(d_a):
                state_action[s, a, k] = hoeffding_d(s1[:, s], at[:, a])
    return DependenceReport(cfg.gamma, cfg.horizon, state_obs, state_action)


def compute_mask(data, cfg=MaskConfig()):
    """Mask every observation coordinate that is no potential cause.

    Returns
    -------
    mask : ObservationMask
    report : DependenceReport
        All dependence values; ``report.mask()`` reproduces ``mask``.
    """
    report = dependence_report(data, cfg)
    return report.mask(), report


# -------------------------------------------------------------------- files

def mask_to_dict(mask, cfg, dims):
    return {"gamma": cfg.gamma, "horizon": cfg.horizon,
            "mask": mask.to_list(), "dims": list(dims)}


def save_mask(mask, cfg, dims, path):
    Path(path).write_text(json.dumps(mask_to_dict(mask, cfg, dims)) + "\n")


def load_mask(path):
    """Read a mask file; returns ``(ObservationMask, MaskConfig, dims)``."""
    doc = json.loads(Path(path).read_text())
    mask = ObservationMask(doc["mask"])
    dims = tuple(doc["dims"])
    if len(mask) != dims[1]:
        raise ValueError(f"{path}: mask length {len(mask)} != d_O={dims[1]}")
    return mask, MaskConfig(doc["horizon"], doc["gamma"]), dims


REPORT_HEADER = ("kind", "s_idx", "target_idx", "t_prime", "d_value",
                 "exceeds_gamma")


def save_report(report, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for kind, s, tgt, tp, d, ex in report.rows():
            w.writerow((kind, s, tgt, tp, repr(d), ex))


# ------------------------------------------------------------ verification

@dataclass
class VerifyReport:
    """Outcome of a verification suite.

    ``violations`` counts offending observation coordinates (or trials for
    the fork suite); ``passed`` applies the suite's acceptance rule.
    """

    suite: str
    trials: int
    n: int
    violations: int
    passed: bool
    details: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def __str__(self):
        extra = "".join(f", {k}={v}" for k, v in self.summary.items())
        return (f"{self.suite}: {self.violations} violations over "
                f"{self.trials} trials (n={self.n}{extra}) -> "
                f"{'PASS' if self.passed else 'FAIL'}")


def _trial_fixture(name, seed, randomize):
    from .scm import fixture, random_seed_range
    g = _rng.stream(seed, _rng.FIXTURE, 0)
    kwargs = {"seed_range": random_seed_range(g)}
    if randomize and name == "causal_obs":
        kwargs["randomize"] = seed
    return fixture(name, **kwargs)


def _check_trials(trials, n):
    if int(trials) < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if int(n) < 5:
        raise ValueError(f"n must be >= 5, got {n}")


def verify_conservativeness(trials=50, n_per_trial=5000, rng_seed=0,
                            cfg=MaskConfig()):
    """Count genuinely causal observations masked on intervened data.

    Each trial draws a fresh parameterization of the ``causal_obs``
    fixture (random coefficients and seed interval), samples ``n_per_trial``
    intervened trajectories and masks them.
    """
    _check_trials(trials, n_per_trial)
    violations = 0
    details = []
    for k in range(int(trials)):
        seed = _rng.child_seed(rng_seed, _rng.TRIAL, k)
        fx = _trial_fixture("causal_obs", seed, randomize=True)
        mask, _ = compute_mask(fx.dataset(n_per_trial, "intervened", seed), cfg)
        bad = [o for o in fx.truth.causal_obs if mask.bits[o - 1]]
        violations += len(bad)
        details.append({"trial": k, "seed": seed, "mask": mask.to_list(),
                        "masked_causal": bad})
    return VerifyReport("conservativeness", int(trials), int(n_per_trial),
                        violations, violations == 0, details)


def verify_monotonicity(trials=20, n_per_trial=5000, rng_seed=0,
                        cfg=MaskConfig(), fixtures=None):
    """Count coordinates masked without intervention but kept with it.

    Runs ``trials`` seeds on every fixture; ``summary['strict']`` counts the
    trials where the intervened mask hides strictly more.
    """
    from .scm import FIXTURES
    _check_trials(trials, n_per_trial)
    violations = 0
    strict = 0
    details = []
    for name in fixtures or FIXTURES:
        for k in range(int(trials)):
            seed = _rng.child_seed(rng_seed, _rng.TRIAL, k)
            fx = _trial_fixture(name, seed, randomize=True)
            m_conf, _ = compute_mask(
                fx.dataset(n_per_trial, "confounded", seed), cfg)
            m_int, _ = compute_mask(
                fx.dataset(n_per_trial, "intervened", seed), cfg)
            lost = [o + 1 for o, (c, i) in enumerate(zip(m_conf, m_int))
                    if c and not i]
            violations += len(lost)
            strict += m_conf.issubset(m_int) and m_conf != m_int
            details.append({"fixture": name, "trial": k, "seed": seed,
                            "confounded": m_conf.to_list(),
                            "intervened": m_int.to_list(), "lost": lost})
    return VerifyReport("monotonicity", int(trials), int(n_per_trial),
                        violations, violations == 0, details,
                        {"strict": strict})


def verify_prop1(trials=20, n_per_trial=5000, rng_seed=0, cfg=MaskConfig(),
                 required=0.95):
    """Seed-confounded nuisance: kept without intervention, masked with it.

    Passes when both outcomes hold in at least ``required`` of the trials.
    ``violations`` counts trials where either outcome fails.
    """
    _check_trials(trials, n_per_trial)
    masked_int = kept_conf = violations = 0
    details = []
    for k in range(int(trials)):
        seed = _rng.child_seed(rng_seed, _rng.TRIAL, k)
        fx = _trial_fixture("prop1_fork", seed, randomize=False)
        o = fx.truth.nuisance_obs[0] - 1
        m_conf, _ = compute_mask(fx.dataset(n_per_trial, "confounded", seed), cfg)
        m_int, _ = compute_mask(fx.dataset(n_per_trial, "intervened", seed), cfg)
        masked_int += m_int.bits[o]
        kept_conf += not m_conf.bits[o]
        violations += (not m_int.bits[o]) or m_conf.bits[o]
        details.append({"trial": k, "seed": seed,
                        "confounded": m_conf.to_list(),
                        "intervened": m_int.to_list()})
    need = math.ceil(required * int(trials))
    return VerifyReport("prop1", int(trials), int(n_per_trial), violations,
                        masked_int >= need and kept_conf >= need, details,
                        {"masked_intervened": masked_int,
                         "kept_confounded": kept_conf})


SUITES = {
    "conservativeness": verify_conservativeness,
    "monotonicity": verify_monotonicity,
    "prop1": verify_prop1,
}
