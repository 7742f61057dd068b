import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privcon.adversary import (
    AdversaryView,
    attack_report,
    extract_view,
    fully_surveilled,
    hidden_agents,
    privacy_classifier,
    recover_reference,
    recovery_series,
    run_observer,
)
from privcon.errors import PreconditionError
from privcon.graph import build_digraph, complete_graph, demo_graph, directed_cycle
from privcon.harness.presets import OPD_ALPHA
from privcon.indistinguishability import exhaustive_search
from privcon.protocols import (
    M1Noise,
    Perturbation,
    ProtocolSpec,
    convergence_rate,
    default_delta,
    default_horizon,
    run,
)

from .conftest import balanced_digraphs


def alg2_trace(g, r, alg="alg2", target=1e-10, **kw):
    d = default_delta(g)
    k = default_horizon(convergence_rate(g, alg, d), target)
    return run(g, ProtocolSpec(alg, d, k, r, **kw))


class TestView:
    def test_demo_adversary_five(self):
        g = demo_graph()
        t = alg2_trace(g, OPD_ALPHA)
        view = extract_view(t, 5)
        assert set(view.observed) == g.out_neighbors(5) == {1, 3, 4}
        for col, j in enumerate(view.observed):
            assert np.array_equal(view.received[:, col], t.x[:, j - 1])
        assert view.own_reference == OPD_ALPHA[4]
        assert np.array_equal(view.own_x, t.x[:, 4])

    def test_no_out_neighbors(self):
        # a sink in terms of reception; the graph need not be balanced for a pure projection
        g = build_digraph(3, [(2, 1, 1.0), (3, 2, 1.0), (1, 3, 1.0)])
        t = run(g, ProtocolSpec("alg1", 0.2, 5, [1.0, 2.0, 3.0]))
        v = extract_view(t, 1)
        assert v.observed == (3,)
        assert extract_view(t, 2).observed == (1,)

    def test_only_definition_fields(self):
        names = {f.name for f in dataclasses.fields(AdversaryView)}
        assert names == {"adversary", "graph", "algorithm", "delta", "own_reference", "own_x", "own_v",
                         "observed", "received", "v0_known"}
        assert not {"x", "v", "reference", "transmitted"} & names

    def test_out_of_range(self):
        t = alg2_trace(demo_graph(), OPD_ALPHA)
        with pytest.raises(PreconditionError):
            extract_view(t, 6)

    def test_unseen_signal(self):
        view = extract_view(alg2_trace(demo_graph(), OPD_ALPHA), 5)
        with pytest.raises(PreconditionError):
            view.signal(2)

    def test_m1_view_sees_masked_values(self):
        g = demo_graph()
        t = run(g, ProtocolSpec("m1", default_delta(g), 50, OPD_ALPHA, noise=M1Noise(seed=3)))
        view = extract_view(t, 5)
        j = view.observed[0]
        assert np.array_equal(view.signal(j), t.x[:, j - 1] + t.w[:, j - 1])


class TestClassifier:
    def test_demo(self):
        g = demo_graph()
        assert [privacy_classifier(g, 5, t) for t in (1, 2, 3, 4)] == [True, True, True, False]
        assert hidden_agents(g, 5, 1) == [2]
        assert hidden_agents(g, 5, 2) == [2]

    def test_complete(self):
        g = complete_graph(5)
        assert not any(privacy_classifier(g, a, t) for a in range(1, 6) for t in range(1, 6) if a != t)

    def test_three_cycle_against_brute_force(self):
        g = directed_cycle(3)
        base = ProtocolSpec("alg2", 0.3, 60, [1.0, 2.0, 4.0])
        for t in (2, 3):
            assert privacy_classifier(g, 1, t)
            assert exhaustive_search(g, 1, t, base) is not None

    def test_only_neighbor_is_adversary(self):
        # 2 <-> 1 and 1 <-> 3: target 2 only talks to the adversary
        g = build_digraph(3, [(1, 2, 1), (2, 1, 1), (1, 3, 1), (3, 1, 1)])
        assert not privacy_classifier(g, 1, 2)
        assert fully_surveilled(g, 1, 2)

    def test_same_node(self):
        with pytest.raises(PreconditionError):
            privacy_classifier(demo_graph(), 5, 5)

    @given(balanced_digraphs(max_n=5))
    def test_surveilled_implies_not_private(self, g):
        for a in range(1, g.n + 1):
            for t in range(1, g.n + 1):
                if a != t and fully_surveilled(g, a, t):
                    assert not privacy_classifier(g, a, t)


class TestRecovery:
    def test_demo_agent_four_every_step(self):
        t = alg2_trace(demo_graph(), OPD_ALPHA)
        series = recovery_series(extract_view(t, 5), 4)
        assert np.abs(series - OPD_ALPHA[3]).max() < 1e-9 * max(1.0, abs(OPD_ALPHA[3]))
        assert recover_reference(extract_view(t, 5), 4) == pytest.approx(1793.3, abs=1e-9)

    def test_first_step_only(self):
        g = demo_graph()
        spec = ProtocolSpec("alg2", default_delta(g), 1, OPD_ALPHA)
        assert recover_reference(extract_view(run(g, spec), 5), 4, k=1) == pytest.approx(1793.3, abs=1e-9)

    def test_arbitrary_x0(self):
        g = complete_graph(4)
        r = np.array([3.0, -7.0, 11.0, 0.25])
        t = alg2_trace(g, r, x0=[100.0, -5.0, 2.0, 9.0])
        for target in (1, 2, 3):
            assert np.abs(recovery_series(extract_view(t, 4), target) - r[target - 1]).max() < 1e-9 * 11

    def test_hidden_neighbor_guard(self):
        view = extract_view(alg2_trace(demo_graph(), OPD_ALPHA), 5)
        for target in (1, 2, 3):
            with pytest.raises(PreconditionError):
                recover_reference(view, target)

    def test_needs_alg2(self):
        g = demo_graph()
        t = run(g, ProtocolSpec("alg1", 0.1, 10, OPD_ALPHA))
        with pytest.raises(PreconditionError):
            recover_reference(extract_view(t, 5), 4)


class TestObserver:
    def test_unperturbed(self):
        g = demo_graph()
        t = alg2_trace(g, OPD_ALPHA)
        z = run_observer(extract_view(t, 5), 4)
        assert abs(z[-1] - OPD_ALPHA[3]) < 1e-6
        # geometric decay: |z(k) - r| <= |1 - delta|^k |z(0) - r|
        d = t.spec.delta
        k = np.arange(z.shape[0])
        bound = abs(1 - d) ** k * abs(z[0] - OPD_ALPHA[3])
        assert np.all(np.abs(z - OPD_ALPHA[3]) <= bound * (1 + 1e-9) + 1e-9)

    def test_closed_form(self):
        g = demo_graph()
        t = alg2_trace(g, OPD_ALPHA, target=1e-3)
        z = run_observer(extract_view(t, 5), 4)
        d, r = t.spec.delta, OPD_ALPHA[3]
        k = np.arange(z.shape[0])
        expected = (1 - d) ** k * z[0] + r * (1 - (1 - d) ** k)
        assert np.allclose(z, expected, rtol=1e-12, atol=1e-9)

    def test_admissible_geometric(self):
        g = demo_graph()
        perts = (Perturbation.geometric(5.0, 0.5),) * 5
        z = run_observer(extract_view(alg2_trace(g, OPD_ALPHA, "alg2_perturbed", perturbation=perts), 5), 4)
        assert abs(z[-1] - OPD_ALPHA[3]) < 1e-6

    def test_constant_bias(self):
        g = demo_graph()
        c = 7.5
        perts = (Perturbation.zero(),) * 3 + (Perturbation.constant(c),) + (Perturbation.zero(),)
        z = run_observer(extract_view(alg2_trace(g, OPD_ALPHA, "alg2_perturbed", perturbation=perts), 5), 4)
        assert abs(z[-1] - (OPD_ALPHA[3] + c)) < 1e-6

    def test_prefix(self):
        view = extract_view(alg2_trace(demo_graph(), OPD_ALPHA), 5)
        z = run_observer(view, 4)
        assert np.array_equal(run_observer(view, 4, K=10), z[:11])
        with pytest.raises(PreconditionError):
            run_observer(view, 4, K=view.horizon + 1)

    @given(balanced_digraphs(max_n=5), st.data())
    def test_agrees_with_recovery(self, g, data):
        r = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=g.n, max_size=g.n)))
        t = alg2_trace(g, r)
        for a in range(1, g.n + 1):
            view = extract_view(t, a)
            for target in range(1, g.n + 1):
                if target != a and fully_surveilled(g, a, target):
                    z = run_observer(view, target)
                    assert abs(z[-1] - recover_reference(view, target)) < 1e-6 * max(1.0, np.ptp(r))


def test_attack_report():
    t = alg2_trace(demo_graph(), OPD_ALPHA)
    view = extract_view(t, 5)
    rep = attack_report(view, 4, "recover", true_value=1793.3)
    assert rep.abs_error < 1e-9 and rep.steps_used == 1
    rep2 = attack_report(view, 4, "observer", true_value=1793.3)
    assert rep2.abs_error < 1e-6 and rep2.steps_used == t.horizon
    assert set(rep.to_dict()) == {"target", "method", "estimate", "true_value", "abs_error", "steps_used"}
    with pytest.raises(ValueError):
        attack_report(view, 4, "guess")
