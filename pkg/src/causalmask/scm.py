"""Structural causal models over time-indexed causal graphs.

An :class:`Scm` assigns every node a structural equation of its graph
parents plus one independent exogenous noise term. Sampling evaluates the
nodes in topological order, optionally under constant or distributional
interventions, which also perform the matching graph surgery.

Random draws are counter based: the value of node ``v`` in sample ``i``
depends only on ``(rng_seed, v, i)``, so batches are reproducible and a
batch of ``n`` samples is a prefix of any larger batch.

The module also ships the small fixture SCMs used to exercise the masking
procedure, see :func:`fixture`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as _rng
from .data import Dataset
from .graph import (SEED, CausalGraph, GraphTemplate, NodeId, graph_from_dict,
                    graph_to_dict, intervene_graph, unroll)

_KIND_CODE = {"S": 1, "O": 2, "A": 3, "W": 4}


class ScmError(ValueError):
    pass


# ------------------------------------------------------------ distributions

@dataclass(frozen=True)
class Dist:
    """Scalar distribution: ``uniform(lo, hi)``, ``gaussian(mean, sd)`` or ``none``."""

    family: str
    p1: float = 0.0
    p2: float = 0.0

    def __post_init__(self):
        if self.family not in ("uniform", "gaussian", "none"):
            raise ScmError(f"unknown distribution family {self.family!r}")
        if self.family == "uniform" and not self.p1 < self.p2:
            raise ScmError(f"uniform needs lo < hi, got ({self.p1}, {self.p2})")
        if self.family == "gaussian" and not self.p2 > 0:
            raise ScmError(f"gaussian needs sd > 0, got {self.p2}")
        if not (np.isfinite(self.p1) and np.isfinite(self.p2)):
            raise ScmError("distribution parameters must be finite")

    def draw(self, seed, key, n):
        if self.family == "none":
            return np.zeros(n)
        if self.family == "uniform":
            u = _rng.counter_uniform(seed, key, n)
            return self.p1 + (self.p2 - self.p1) * u
        return self.p1 + self.p2 * _rng.counter_normal(seed, key, n)

    def to_list(self):
        return [self.family, self.p1, self.p2]


def uniform(lo, hi):
    return Dist("uniform", float(lo), float(hi))


def gaussian(mean, sd):
    return Dist("gaussian", float(mean), float(sd))


NO_NOISE = Dist("none")


# ---------------------------------------------------------------- equations

@dataclass(frozen=True)
class Equation:
    """Deterministic part of a structural equation.

    ``parents`` fixes the argument order. Forms, with ``p_k`` the parent
    values and ``c`` the coefficients:

    * ``affine``: ``bias + sum_k c[k] p_k``
    * ``poly``: ``bias + sum_k (c[k][0] p_k + c[k][1] p_k**2 + c[k][2] p_k**3)``
    * ``tanh``: ``scale * tanh(bias + sum_k c[k] p_k)``
    * ``custom``: ``fn(*parent_values)``; not serializable

    The node value is this output plus the node's noise draw.
    """

    parents: tuple
    form: str = "affine"
    coef: tuple = ()
    bias: float = 0.0
    scale: float = 1.0
    fn: Callable = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "parents",
                           tuple(NodeId(*p) for p in self.parents))
        if self.form == "custom":
            if self.fn is None:
                raise ScmError("custom equation needs fn")
            return
        if self.form not in ("affine", "poly", "tanh"):
            raise ScmError(f"unknown equation form {self.form!r}")
        coef = tuple(tuple(float(v) for v in c) if self.form == "poly"
                     else float(c) for c in self.coef)
        if len(coef) != len(self.parents):
            raise ScmError(f"{len(coef)} coefficients for "
                           f"{len(self.parents)} parents")
        if self.form == "poly" and any(len(c) != 3 for c in coef):
            raise ScmError("poly coefficients are (linear, square, cube) triples")
        object.__setattr__(self, "coef", coef)

    def __call__(self, values):
        if self.form == "custom":
            return np.asarray(self.fn(*values), dtype=np.float64)
        n = len(values[0]) if values else 0
        if self.form == "poly":
            out = np.full(n, self.bias) if n else np.float64(self.bias)
            for (c1, c2, c3), p in zip(self.coef, values):
                out = out + p * (c1 + p * (c2 + p * c3))
            return out
        out = np.float64(self.bias)
        for c, p in zip(self.coef, values):
            out = out + c * p
        if self.form == "tanh":
            out = self.scale * np.tanh(out)
        return out

    def to_dict(self):
        if self.form == "custom":
            raise ScmError("custom equations cannot be serialized")
        return {"parents": [p.to_list() for p in self.parents],
                "form": self.form,
                "coef": [list(c) if self.form == "poly" else c
                         for c in self.coef],
                "bias": self.bias, "scale": self.scale}


# ------------------------------------------------------------ interventions

@dataclass(frozen=True)
class InterventionSpec:
    """Constant assignments ``do(V = v)`` and draws ``do(V ~ dist)``."""

    constant: dict = field(default_factory=dict)
    distributional: dict = field(default_factory=dict)

    def __post_init__(self):
        const = {NodeId(*k): float(v) for k, v in self.constant.items()}
        dist = {NodeId(*k): v for k, v in self.distributional.items()}
        both = set(const) & set(dist)
        if both:
            raise ScmError(f"nodes with both constant and distributional "
                           f"assignments: {sorted(map(str, both))}")
        for k, v in dist.items():
            if not isinstance(v, Dist) or v.family == "none":
                raise ScmError(f"distributional target {k} needs a density")
        object.__setattr__(self, "constant", const)
        object.__setattr__(self, "distributional", dist)

    @property
    def targets(self):
        return set(self.constant) | set(self.distributional)

    def __bool__(self):
        return bool(self.constant or self.distributional)


NO_INTERVENTION = InterventionSpec()


def initial_state_intervention(dims, lo=-1.0, hi=1.0):
    """``do(S_1 ~ uniform box)`` over every state coordinate."""
    return InterventionSpec(distributional={
        NodeId("S", 1, i): uniform(lo, hi) for i in range(1, dims[0] + 1)})


# ---------------------------------------------------------------------- scm

@dataclass(frozen=True)
class SampleBatch:
    n: int
    values: dict
    rng_seed: int

    def __getitem__(self, v):
        return self.values[v]

    def to_dataset(self, dims, horizon, manifest=None):
        """Arrange node samples into an ``(N, T, d)`` trajectory dataset."""
        arrays = []
        for kind, d in zip("SOA", dims):
            arr = np.empty((self.n, horizon, d))
            for t in range(1, horizon + 1):
                for i in range(1, d + 1):
                    arr[:, t - 1, i - 1] = self.values[NodeId(kind, t, i)]
            arrays.append(arr)
        return Dataset.from_arrays(*arrays, manifest=manifest)


@dataclass(frozen=True)
class Scm:
    """Graph, one equation per non-seed node, one noise per node.

    The seed ``W1`` (if present) is ``U(a, b)`` with ``(a, b) = seed_range``
    and has no equation.
    """

    graph: CausalGraph
    equations: dict
    noise: dict
    seed_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        a, b = (float(v) for v in self.seed_range)
        if not a < b:
            raise ScmError(f"seed range needs a < b, got ({a}, {b})")
        object.__setattr__(self, "seed_range", (a, b))
        g = self.graph
        for v in g.nodes:
            if v == SEED:
                continue
            eq = self.equations.get(v)
            if eq is None:
                raise ScmError(f"node {v} has no equation")
            if set(eq.parents) != set(g.parents(v)) or \
                    len(eq.parents) != len(g.parents(v)):
                raise ScmError(f"equation of {v} reads {sorted(map(str, eq.parents))}"
                               f" but graph parents are {sorted(map(str, g.parents(v)))}")
            if v not in self.noise:
                raise ScmError(f"node {v} has no noise spec")
        extra = set(self.equations) - set(g.nodes)
        if extra:
            raise ScmError(f"equations for unknown nodes {sorted(map(str, extra))}")

    @property
    def dims(self):
        return self.graph.dims

    @property
    def horizon(self):
        return self.graph.horizon

    def seed_dist(self):
        return uniform(*self.seed_range)

    def to_dict(self):
        doc = graph_to_dict(self.graph)
        doc["seed_range"] = list(self.seed_range)
        doc["equations"] = [dict(node=v.to_list(), **self.equations[v].to_dict())
                            for v in sorted(self.equations)]
        doc["noise"] = [{"node": v.to_list(), "dist": self.noise[v].to_list()}
                        for v in sorted(self.noise)]
        return doc

    def to_json(self):
        return json.dumps(self.to_dict())


def scm_from_dict(doc):
    g = graph_from_dict(doc)
    eqs = {}
    for e in doc["equations"]:
        eqs[NodeId(*e["node"])] = Equation(
            tuple(NodeId(*p) for p in e["parents"]), e["form"],
            tuple(tuple(c) if e["form"] == "poly" else c for c in e["coef"]),
            e["bias"], e["scale"])
    noise = {NodeId(*d["node"]): Dist(*d["dist"]) for d in doc["noise"]}
    return Scm(g, eqs, noise, tuple(doc.get("seed_range", (0.0, 1.0))))


def scm_from_json(text):
    return scm_from_dict(json.loads(text))


def _node_key(v, tag):
    return (_rng.NODE, _KIND_CODE[v.kind], v.time, v.index, tag)


def sample(m, iv=NO_INTERVENTION, n=1, rng_seed=0):
    """Draw ``n`` joint samples of every node of ``m`` under ``iv``.

    Nodes are evaluated in topological order of the post-surgery graph.
    Intervened nodes ignore their parents: constant targets take the given
    value and distributional targets draw from their density.

    Raises
    ------
    ScmError
        For unknown targets, ``n < 1``, or an intervention on the seed
        combined with a distributional intervention on one of its
        children (the two overlays contradict each other).
    """
    if int(n) < 1:
        raise ScmError(f"n must be >= 1, got {n}")
    n = int(n)
    g = m.graph
    for v in iv.targets:
        if v not in g:
            raise ScmError(f"intervention target {v} not in graph")
    if SEED in iv.targets and SEED in g:
        clash = set(iv.distributional) & set(g.children(SEED))
        if clash:
            raise ScmError("seed intervention combined with distributional "
                           f"interventions on its children {sorted(map(str, clash))}")
    gi = intervene_graph(g, iv.targets)
    values = {}
    for v in gi.topological_order():
        if v in iv.constant:
            values[v] = np.full(n, iv.constant[v])
        elif v in iv.distributional:
            values[v] = iv.distributional[v].draw(rng_seed, _node_key(v, 1), n)
        elif v == SEED:
            values[v] = m.seed_dist().draw(rng_seed, _node_key(v, 0), n)
        else:
            eq = m.equations[v]
            out = eq([values[p] for p in eq.parents])
            noise = m.noise[v].draw(rng_seed, _node_key(v, 0), n)
            values[v] = np.broadcast_to(out, (n,)) + noise
    return SampleBatch(n, values, int(rng_seed))


# ----------------------------------------------------------------- fixtures

FIXTURES = ("fig1", "prop1_fork", "causal_obs", "pure_noise_obs")
FIXTURE_HORIZON = 3


@dataclass(frozen=True)
class FixtureTruth:
    """Ground truth shipped with a fixture.

    ``expected_mask`` maps an init mode to the mask bits (1 = masked) the
    masking procedure should return on large samples. ``causal_obs`` and
    ``nuisance_obs`` list 1-based observation indices.
    """

    name: str
    expected_mask: dict
    causal_obs: tuple
    nuisance_obs: tuple
    edges: tuple


@dataclass(frozen=True)
class Fixture:
    name: str
    scm: Scm
    truth: FixtureTruth
    box: tuple = (-1.0, 1.0)

    @property
    def dims(self):
        return self.scm.dims

    @property
    def horizon(self):
        return self.scm.horizon

    def intervention(self, init_mode):
        if init_mode == "intervened":
            return initial_state_intervention(self.dims, *self.box)
        if init_mode == "confounded":
            return NO_INTERVENTION
        raise ScmError(f"unknown init mode {init_mode!r}")

    def dataset(self, n, init_mode, rng_seed):
        batch = sample(self.scm, self.intervention(init_mode), n, rng_seed)
        return batch.to_dataset(self.dims, self.horizon, manifest={
            "source": f"fixture:{self.name}", "init_mode": init_mode,
            "seed": int(rng_seed), "N": int(n), "dims": list(self.dims),
            "T": self.horizon})


class _Builder:
    """Collects per-node equations while unrolling a template by hand."""

    def __init__(self, dims, horizon, seed_range):
        self.dims = dims
        self.T = horizon
        self.a, self.b = seed_range
        self.eqs = {}
        self.noise = {}
        self.template_edges = set()
        self.seed_edges = set()

    def set(self, v, parents, noise, form="affine", coef=(), bias=0.0,
            scale=1.0):
        self.eqs[v] = Equation(tuple(parents), form, tuple(coef), bias, scale)
        self.noise[v] = noise

    def build(self):
        edges = frozenset((p, v) for v, eq in self.eqs.items()
                          for p in eq.parents)
        g = CausalGraph(edges, dims=self.dims, horizon=self.T)
        return Scm(g, self.eqs, self.noise, (self.a, self.b))


def _S(t, i):
    return NodeId("S", t, i)


def _O(t, i):
    return NodeId("O", t, i)


def _A(t, i=1):
    return NodeId("A", t, i)


def _seed_maps(bld):
    """Smooth monotone maps from the seed range onto roughly [-1, 1]."""
    a, b = bld.a, bld.b
    k = 2.0 / (b - a)
    return k, -1.0 - k * a


def _state_dynamics(bld, t, gains):
    """``S_{t+1}[i] = 0.7 S_t[i] + sum_j g_ij A_t[j] + noise``; zero gains add no edge."""
    d_s, _, d_a = bld.dims
    for i in range(1, d_s + 1):
        acts = [j for j in range(1, d_a + 1) if gains[i - 1][j - 1] != 0]
        bld.set(_S(t + 1, i), [_S(t, i)] + [_A(t, j) for j in acts],
                gaussian(0, 0.1),
                coef=[0.7] + [gains[i - 1][j - 1] for j in acts])


def _fixture_fig1(bld):
    k, c = _seed_maps(bld)
    bld.set(_S(1, 1), [SEED], gaussian(0, 0.1), coef=[k], bias=c)
    bld.set(_S(1, 2), [SEED], gaussian(0, 0.1), "tanh", coef=[1.5 * k],
            bias=1.5 * c, scale=1.2)
    bld.set(_O(1, 1), [SEED], gaussian(0, 0.05), coef=[k], bias=c)
    for t in range(1, bld.T + 1):
        if t > 1:
            bld.set(_O(t, 1), [_A(t - 1)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 2), [_S(t, 1)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 3), [_S(t, 2)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_A(t), [_O(t, 2), _O(t, 3)], gaussian(0, 0.05),
                coef=[0.8, 0.6])
        if t < bld.T:
            _state_dynamics(bld, t, [[0.5], [0.5]])
    return FixtureTruth("fig1", {"intervened": (1, 0, 0),
                                 "confounded": (0, 0, 0)},
                        causal_obs=(2, 3), nuisance_obs=(1,), edges=())


def _fixture_prop1_fork(bld):
    k, c = _seed_maps(bld)
    bld.set(_S(1, 1), [SEED], gaussian(0, 0.1), "tanh", coef=[1.5 * k],
            bias=1.5 * c, scale=1.2)
    bld.set(_S(1, 2), [SEED], gaussian(0, 0.1), coef=[k], bias=c)
    bld.set(_O(1, 1), [SEED], gaussian(0, 0.05), coef=[k], bias=c)
    for t in range(1, bld.T + 1):
        if t > 1:
            # a persistent marker: never read by the expert
            bld.set(_O(t, 1), [_O(t - 1, 1)], gaussian(0, 0.05), coef=[0.9])
        bld.set(_O(t, 2), [_S(t, 1)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 3), [_S(t, 2)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_A(t), [_O(t, 2), _O(t, 3)], gaussian(0, 0.05), "poly",
                coef=[(0.6, 0.0, 0.5), (0.7, 0.0, 0.0)])
        if t < bld.T:
            _state_dynamics(bld, t, [[0.5], [0.5]])
    return FixtureTruth("prop1_fork", {"intervened": (1, 0, 0),
                                       "confounded": (0, 0, 0)},
                        causal_obs=(2, 3), nuisance_obs=(1,), edges=())


def _signed(g, lo=0.5, hi=1.5):
    return float(g.choice((-1.0, 1.0)) * g.uniform(lo, hi))


def _fixture_causal_obs(bld, g):
    """``O[1]`` is a genuine cause of ``A[1]``; ``O[3]`` is a nuisance.

    With ``g`` given, coefficient magnitudes are drawn from [0.5, 1.5] with
    random signs and the response of ``A[1]`` to ``O[1]`` picks a random
    form. Without it the default parameterization is used.
    """
    k, c = _seed_maps(bld)
    if g is None:
        w = dict(o1=1.0, a11=0.8, a12=0.6, a21=0.5, a22=0.9, form="tanh",
                 gains=[[0.5, 0.0], [0.0, 0.5]])
    else:
        w = dict(o1=_signed(g), a11=_signed(g), a12=_signed(g),
                 a21=_signed(g), a22=_signed(g),
                 form=str(g.choice(["affine", "poly", "tanh"])),
                 gains=[[_signed(g, 0.5, 0.7), 0.0],
                        [0.0, _signed(g, 0.5, 0.7)]])
    bld.set(_S(1, 1), [SEED], gaussian(0, 0.1), coef=[k], bias=c)
    bld.set(_S(1, 2), [SEED], gaussian(0, 0.1), "tanh", coef=[1.5 * k],
            bias=1.5 * c, scale=1.2)
    bld.set(_O(1, 3), [SEED], gaussian(0, 0.05), coef=[k], bias=c)
    for t in range(1, bld.T + 1):
        if t > 1:
            bld.set(_O(t, 3), [_A(t - 1, 1)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 1), [_S(t, 1)], gaussian(0, 0.05), "tanh",
                coef=[w["o1"]], scale=1.5)
        bld.set(_O(t, 2), [_S(t, 2)], gaussian(0, 0.05), coef=[1.0])
        a = w["a11"]
        if w["form"] == "poly":
            bld.set(_A(t, 1), [_O(t, 1), _O(t, 2)], gaussian(0, 0.05), "poly",
                    coef=[(a, 0.5, 0.5 * np.sign(a)), (w["a12"], 0.0, 0.0)])
        elif w["form"] == "tanh":
            bld.set(_A(t, 1), [_O(t, 1), _O(t, 2)], gaussian(0, 0.05), "tanh",
                    coef=[a, w["a12"]], scale=1.5)
        else:
            bld.set(_A(t, 1), [_O(t, 1), _O(t, 2)], gaussian(0, 0.05),
                    coef=[a, w["a12"]])
        bld.set(_A(t, 2), [_O(t, 1), _O(t, 2)], gaussian(0, 0.05),
                coef=[w["a21"], w["a22"]])
        if t < bld.T:
            _state_dynamics(bld, t, w["gains"])
    return FixtureTruth("causal_obs", {"intervened": (0, 0, 1),
                                       "confounded": (0, 0, 0)},
                        causal_obs=(1, 2), nuisance_obs=(3,), edges=())


def _fixture_pure_noise_obs(bld):
    k, c = _seed_maps(bld)
    bld.set(_S(1, 1), [SEED], gaussian(0, 0.1), coef=[k], bias=c)
    bld.set(_S(1, 2), [SEED], gaussian(0, 0.1), "tanh", coef=[-1.5 * k],
            bias=-1.5 * c, scale=1.2)
    for t in range(1, bld.T + 1):
        bld.set(_O(t, 1), [_S(t, 1)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 2), [_S(t, 2)], gaussian(0, 0.05), coef=[1.0])
        bld.set(_O(t, 3), [], gaussian(0, 1.0))
        bld.set(_A(t), [_O(t, 1), _O(t, 2)], gaussian(0, 0.05),
                coef=[0.8, 0.8])
        if t < bld.T:
            _state_dynamics(bld, t, [[0.5], [0.5]])
    return FixtureTruth("pure_noise_obs", {"intervened": (0, 0, 1),
                                           "confounded": (0, 0, 1)},
                        causal_obs=(1, 2), nuisance_obs=(3,), edges=())


def random_seed_range(g):
    """A random seed interval ``(a, b)`` with ``b - a`` in [0.5, 3]."""
    a = float(g.uniform(-2.0, 2.0))
    return a, a + float(g.uniform(0.5, 3.0))


def fixture(name, seed_range=(0.0, 1.0), randomize=None):
    """Build a shipped fixture SCM with its ground truth.

    Parameters
    ----------
    name : {'fig1', 'prop1_fork', 'causal_obs', 'pure_noise_obs'}
    seed_range : (float, float)
        Interval of the uniform seed ``W1``.
    randomize : int, optional
        For ``causal_obs`` only: seed for drawing random coefficients
        (magnitudes in [0.5, 1.5], random signs, random response form).

    Returns
    -------
    Fixture
        Horizon 3 throughout. Observation layout: state read-outs first,
        except where the fixture documents otherwise.
    """
    if name not in FIXTURES:
        raise ScmError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    d_a = 2 if name == "causal_obs" else 1
    bld = _Builder((2, 3, d_a), FIXTURE_HORIZON, seed_range)
    if name == "causal_obs":
        g = None if randomize is None else _rng.stream(randomize, _rng.FIXTURE)
        truth = _fixture_causal_obs(bld, g)
    elif randomize is not None:
        raise ScmError(f"fixture {name!r} has no random parameterization")
    else:
        truth = {"fig1": _fixture_fig1, "prop1_fork": _fixture_prop1_fork,
                 "pure_noise_obs": _fixture_pure_noise_obs}[name](bld)
    m = bld.build()
    truth = FixtureTruth(truth.name, truth.expected_mask, truth.causal_obs,
                         truth.nuisance_obs, tuple(sorted(m.graph.edges)))
    return Fixture(name, m, truth)


def fig1_template():
    """Time-invariant wiring of the ``fig1`` fixture as a template."""
    return GraphTemplate(
        dims=(2, 3, 1),
        edges=[("S", 1, "O", 2, 0), ("S", 2, "O", 3, 0),
               ("O", 2, "A", 1, 0), ("O", 3, "A", 1, 0),
               ("A", 1, "O", 1, 1),
               ("S", 1, "S", 1, 1), ("S", 2, "S", 2, 1),
               ("A", 1, "S", 1, 1), ("A", 1, "S", 2, 1)],
        seed_edges=[("S", 1), ("S", 2), ("O", 1)])


def fig1_graph(horizon=FIXTURE_HORIZON):
    return unroll(fig1_template(), horizon)
