"""Trajectory datasets and their JSON Lines storage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_KINDS = {"s": "states", "o": "observations", "a": "actions"}


@dataclass(frozen=True)
class Trajectory:
    """One rollout: arrays of shape (T, d_S), (T, d_O) and (T, d_A)."""

    states: np.ndarray
    observations: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        for name in ("states", "observations", "actions"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"{name} must be 2-D (T, d), got {arr.shape}")
            object.__setattr__(self, name, arr)
        lengths = {len(self.states), len(self.observations), len(self.actions)}
        if len(lengths) != 1:
            raise ValueError(f"inconsistent trajectory lengths {sorted(lengths)}")

    @property
    def T(self):
        return len(self.states)

    @property
    def dims(self):
        return (self.states.shape[1], self.observations.shape[1],
                self.actions.shape[1])


@dataclass
class Dataset:
    """A list of trajectories sharing dimensions, plus a generation manifest."""

    trajectories: list
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.trajectories:
            raise ValueError("dataset has no trajectories")
        dims = {tr.dims for tr in self.trajectories}
        if len(dims) != 1:
            raise ValueError(f"trajectories disagree on dims: {sorted(dims)}")

    @classmethod
    def from_arrays(cls, states, observations, actions, manifest=None):
        """Build from stacked arrays of shape (N, T, d)."""
        trajs = [Trajectory(s, o, a)
                 for s, o, a in zip(states, observations, actions)]
        return cls(trajs, dict(manifest or {}))

    def __len__(self):
        return len(self.trajectories)

    @property
    def N(self):
        return len(self.trajectories)

    @property
    def dims(self):
        return self.trajectories[0].dims

    @property
    def min_T(self):
        return min(tr.T for tr in self.trajectories)

    def at(self, kind, t):
        """Values of ``kind`` ('s', 'o' or 'a') at 1-based time ``t``, shape (N, d)."""
        attr = _KINDS[kind]
        if not 1 <= t <= self.min_T:
            raise ValueError(f"time step {t} outside [1, {self.min_T}]")
        return np.stack([getattr(tr, attr)[t - 1] for tr in self.trajectories])

    def stacked(self, kind):
        """All trajectories stacked to (N, T, d); requires equal lengths."""
        attr = _KINDS[kind]
        if len({tr.T for tr in self.trajectories}) != 1:
            raise ValueError("trajectories have unequal lengths")
        return np.stack([getattr(tr, attr) for tr in self.trajectories])


def save_dataset(data, path):
    """Write ``path`` (JSON Lines) and ``path.manifest.json``."""
    path = Path(path)
    with open(path, "w") as fh:
        for tr in data.trajectories:
            fh.write(json.dumps({
                "t": tr.T,
                "s": tr.states.tolist(),
                "o": tr.observations.tolist(),
                "a": tr.actions.tolist(),
            }) + "\n")
    manifest = dict(data.manifest)
    manifest.setdefault("N", data.N)
    manifest.setdefault("dims", list(data.dims))
    with open(manifest_path(path), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest_path(path):
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def load_dataset(path):
    path = Path(path)
    trajs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            tr = Trajectory(np.array(rec["s"], dtype=np.float64),
                            np.array(rec["o"], dtype=np.float64),
                            np.array(rec["a"], dtype=np.float64))
            if tr.T != rec["t"]:
                raise ValueError(f"{path}:{lineno}: declared t={rec['t']} "
                                 f"but arrays have length {tr.T}")
            trajs.append(tr)
    mpath = manifest_path(path)
    manifest = json.loads(mpath.read_text()) if mpath.exists() else {}
    return Dataset(trajs, manifest)
