import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalmask.graph import SEED, CausalGraph, NodeId, d_separated, intervene_graph
from causalmask.independence import hoeffding_d
from causalmask.scm import (FIXTURES, NO_INTERVENTION, Equation,
                            InterventionSpec, Scm, ScmError, fixture,
                            gaussian, initial_state_intervention, sample,
                            scm_from_json, uniform)

X = NodeId("S", 1, 1)
Y = NodeId("A", 1, 1)
GAMMA = 1e-3


def xy_scm():
    g = CausalGraph(frozenset({(X, Y)}))
    return Scm(g, {X: Equation(()), Y: Equation((X,), coef=(2.0,))},
               {X: uniform(0, 1), Y: gaussian(0, 0.1)})


def test_constant_intervention_forces_mean():
    b = sample(xy_scm(), InterventionSpec(constant={X: 1.0}), 10_000, 3)
    assert np.all(b[X] == 1.0)
    se = 0.1 / np.sqrt(10_000)
    assert abs(b[Y].mean() - 2.0) < 3 * se


def test_observational_uniform_mean():
    b = sample(xy_scm(), NO_INTERVENTION, 10_000, 4)
    se = np.sqrt(1 / 12) / np.sqrt(10_000)
    assert abs(b[X].mean() - 0.5) < 3 * se
    assert b[X].min() > 0 and b[X].max() < 1


def test_distributional_intervention_ignores_parents():
    b = sample(xy_scm(), InterventionSpec(distributional={Y: uniform(5, 6)}), 2000, 0)
    assert b[Y].min() > 5 and b[Y].max() < 6
    assert abs(hoeffding_d(b[X], b[Y])) < GAMMA


def test_fig1_intervention_breaks_nuisance_link():
    fx = fixture("fig1")
    b = sample(fx.scm, initial_state_intervention(fx.dims), 5000, 0)
    for s in (1, 2):
        assert hoeffding_d(b[NodeId("S", 1, s)], b[NodeId("O", 1, 1)]) < GAMMA
    b = sample(fx.scm, NO_INTERVENTION, 5000, 0)
    for s in (1, 2):
        assert hoeffding_d(b[NodeId("S", 1, s)], b[NodeId("O", 1, 1)]) > GAMMA


def test_prop1_fork_dependence():
    fx = fixture("prop1_fork")
    b = sample(fx.scm, NO_INTERVENTION, 5000, 1)
    assert hoeffding_d(b[NodeId("S", 1, 1)], b[NodeId("O", 1, 1)]) > GAMMA


def test_pure_noise_obs_independent_of_states():
    fx = fixture("pure_noise_obs")
    b = sample(fx.scm, NO_INTERVENTION, 5000, 2)
    for t, s in itertools.product(range(1, 4), (1, 2)):
        assert abs(hoeffding_d(b[NodeId("S", t, s)], b[NodeId("O", 1, 3)])) < GAMMA


def test_fixture_ground_truth_structure():
    fx = fixture("prop1_fork")
    g = fx.scm.graph
    o = NodeId("O", 1, fx.truth.nuisance_obs[0])
    assert g.parents(o) == {SEED}
    assert SEED in g.parents(NodeId("S", 1, 1))
    from causalmask.graph import has_directed_path
    assert has_directed_path(g, NodeId("S", 1, 1), NodeId("A", 2, 1))

    fx = fixture("causal_obs")
    g = fx.scm.graph
    o = NodeId("O", 1, fx.truth.causal_obs[0])
    assert o in g.parents(NodeId("A", 1, 1))
    assert NodeId("S", 1, 1) in g.parents(o)
    assert fx.truth.expected_mask["intervened"][fx.truth.causal_obs[0] - 1] == 0

    fx = fixture("pure_noise_obs")
    assert not fx.scm.graph.parents(NodeId("O", 1, 3))
    assert fx.truth.edges == tuple(sorted(fx.scm.graph.edges))


def test_unknown_fixture():
    with pytest.raises(ScmError, match="unknown fixture"):
        fixture("nope")
    with pytest.raises(ScmError):
        fixture("fig1", randomize=3)


def test_equation_forms():
    p = np.array([-1.0, 0.0, 2.0])
    assert np.allclose(Equation((X,), "affine", (2.0,), 1.0)([p]), 2 * p + 1)
    assert np.allclose(Equation((X,), "poly", ((1.0, 2.0, 3.0),), 0.5)([p]),
                       0.5 + p + 2 * p ** 2 + 3 * p ** 3)
    assert np.allclose(Equation((X,), "tanh", (0.5,), 0.1, 2.0)([p]),
                       2 * np.tanh(0.1 + 0.5 * p))
    assert np.allclose(Equation((X,), "custom", fn=np.sin)([p]), np.sin(p))
    with pytest.raises(ScmError):
        Equation((X,), "affine", (1.0, 2.0))
    with pytest.raises(ScmError):
        Equation((X,), "cubic", (1.0,))


def test_scm_validation():
    g = CausalGraph(frozenset({(X, Y)}))
    with pytest.raises(ScmError, match="no equation"):
        Scm(g, {X: Equation(())}, {X: uniform(0, 1)})
    with pytest.raises(ScmError, match="graph parents"):
        Scm(g, {X: Equation(()), Y: Equation(())},
            {X: uniform(0, 1), Y: uniform(0, 1)})
    with pytest.raises(ScmError):
        uniform(1, 0)
    with pytest.raises(ScmError):
        gaussian(0, 0)


def test_intervention_errors():
    with pytest.raises(ScmError, match="both"):
        InterventionSpec(constant={X: 1.0}, distributional={X: uniform(0, 1)})
    with pytest.raises(ScmError, match="not in graph"):
        sample(xy_scm(), InterventionSpec(constant={NodeId("O", 1, 1): 0.0}), 5, 0)
    with pytest.raises(ScmError):
        sample(xy_scm(), NO_INTERVENTION, 0, 0)


def test_contradictory_seed_overlay():
    fx = fixture("fig1")
    iv = InterventionSpec(constant={SEED: 0.5},
                          distributional={NodeId("S", 1, 1): uniform(-1, 1)})
    with pytest.raises(ScmError, match="seed"):
        sample(fx.scm, iv, 10, 0)
    # a seed intervention alone is fine
    b = sample(fx.scm, InterventionSpec(constant={SEED: 0.5}), 10, 0)
    assert np.all(b[SEED] == 0.5)


def test_json_round_trip():
    for name in FIXTURES:
        m = fixture(name).scm
        m2 = scm_from_json(m.to_json())
        a = sample(m, NO_INTERVENTION, 50, 9)
        b = sample(m2, NO_INTERVENTION, 50, 9)
        assert all(np.array_equal(a[v], b[v]) for v in m.graph.nodes)


def test_to_dataset_layout():
    fx = fixture("causal_obs")
    data = fx.dataset(20, "intervened", 5)
    b = sample(fx.scm, fx.intervention("intervened"), 20, 5)
    assert data.dims == (2, 3, 2) and data.min_T == 3
    assert np.array_equal(data.at("o", 2)[:, 2], b[NodeId("O", 2, 3)])
    assert data.manifest["init_mode"] == "intervened"


@settings(max_examples=25)
@given(st.sampled_from(FIXTURES), st.integers(0, 2**63 - 1), st.integers(1, 40))
def test_determinism_and_prefix(name, seed, n):
    m = fixture(name).scm
    a = sample(m, NO_INTERVENTION, n, seed)
    b = sample(m, NO_INTERVENTION, n, seed)
    c = sample(m, NO_INTERVENTION, n + 7, seed)
    for v in m.graph.nodes:
        assert np.array_equal(a[v], b[v])
        assert np.array_equal(a[v], c[v][:n])


@given(st.floats(-1e6, 1e6, allow_nan=False), st.integers(1, 50))
def test_constant_intervention_exact(value, n):
    fx = fixture("fig1")
    target = NodeId("A", 2, 1)
    b = sample(fx.scm, InterventionSpec(constant={target: value}), n, 0)
    assert np.all(b[target] == value)


@given(st.integers(0, 2**32 - 1))
def test_random_parameterizations_valid(seed):
    fx = fixture("causal_obs", seed_range=(-1.0, 0.5), randomize=seed)
    for v, eq in fx.scm.equations.items():
        if eq.form == "poly":
            mags = [abs(c) for trip in eq.coef for c in trip if c != 0]
        else:
            mags = [abs(c) for c in eq.coef]
        assert all(m >= 0.5 - 1e-12 for m in mags), (v, eq)


def _pairs(fx, mode):
    iv = fx.intervention(mode)
    gi = intervene_graph(fx.scm.graph, iv.targets)
    nodes = sorted(n for n in gi.nodes if not (mode == "intervened" and n == SEED))
    sep, con = [], []
    for x, y in itertools.combinations(nodes, 2):
        (sep if d_separated(gi, x, y, set()) else con).append((x, y))
    return iv, sep, con


@pytest.mark.slow
@pytest.mark.parametrize("name", FIXTURES)
def test_markov_property(name):
    fx = fixture(name)
    worst = 0.0
    for mode in ("intervened", "confounded"):
        iv, sep, _ = _pairs(fx, mode)
        for seed in range(20):
            b = sample(fx.scm, iv, 5000, seed)
            for x, y in sep:
                worst = max(worst, hoeffding_d(b[x], b[y]))
    assert worst < GAMMA


@pytest.mark.slow
@pytest.mark.parametrize("name", FIXTURES)
def test_faithfulness(name):
    fx = fixture(name)
    for mode in ("intervened", "confounded"):
        iv, _, con = _pairs(fx, mode)
        b = sample(fx.scm, iv, 5000, 0)
        weak = [(str(x), str(y)) for x, y in con if hoeffding_d(b[x], b[y]) <= GAMMA]
        assert not weak, (mode, weak[:5])
