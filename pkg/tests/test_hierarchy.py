"""Core detection, depth arithmetic, and the log-scale eigendata
estimates built on a finished coalescence tree."""

import dataclasses
import math

import pytest

from renormnet import hierarchy as hi
from renormnet import network as nw
from renormnet import oracle as oc
from renormnet import renorm as nr

from conftest import example1, example2, load

NEG_INF = float("-inf")


@pytest.fixture(scope="module")
def tree1():
    return nr.renormalize(example1(0.1))


@pytest.fixture(scope="module")
def tree2():
    return nr.renormalize(example2(10.0))


def test_restrict_accessible_drops_islands():
    g = nw.split(
        nw.parse_network(
            "base 10\nspecies a b d e\nreaction a -> b rate 1\n"
            "reaction b -> a rate 1\nreaction d -> e rate 1\n"
            "reaction e -> d rate 1\nreaction a -> a + a scale -2\n"
        )
    )
    assert hi.restrict_accessible(g, "a") == ("a", "b")
    assert hi.restrict_accessible(g, "e") == ("d", "e")
    with pytest.raises(ValueError):
        hi.restrict_accessible(g, "zz")


def test_cores_and_threshold_example2(tree2):
    cs = hi.cores_and_threshold(tree2, "1")
    assert cs.sigma0 == "1"
    assert cs.accessible == ("G1", "G2")
    assert [(c.id, c.alpha_scale, c.regime) for c in cs.sccs] == [
        ("G1", -12, "autocatalytic"),
        ("G2", -7, "autocatalytic"),
    ]
    assert cs.cores == ("G2",)
    assert cs.threshold_scale == -7
    assert not cs.resonant_cores


def test_cores_and_threshold_conservative():
    tree = nr.renormalize(nw.split(load("markov.net")))
    cs = hi.cores_and_threshold(tree, "a")
    assert [c.id for c in cs.sccs] == ["G2"]
    assert cs.sccs[0].members == ("a", "b", "c")
    assert cs.sccs[0].regime == "free"
    assert cs.threshold_scale == NEG_INF


def test_path_depth(tree2):
    final = tree2.final
    assert hi.path_depth(final, ["G2", "G1"]) == 13
    assert hi.path_depth(final, ["G1"]) == 0
    alpha = 1e-7
    both = frozenset({"G1", "G2"})
    assert hi.path_depth(final, ["G1", "G2"], alpha=alpha, compounds=both) == 10
    with pytest.raises(ValueError):
        hi.path_depth(final, ["G1", "G1"])


def test_path_depth_dominant_edge_is_free(tree1):
    eff = nr.effective_from_split(example1(0.1))
    assert hi.path_depth(eff, ["1", "2"]) == 0
    assert hi.path_depth(eff, ["2", "3"]) == 3


def test_leading_dag_example1(tree1):
    dag = hi.leading_dag(tree1.final, "G1")
    assert dag.root == "G1"
    assert dag.edges == (("G1", "3"),)
    assert dag.depth == {"G1": 0, "3": 2}


def test_leading_dag_rejects_dominant_cycles():
    g = nw.split(
        nw.parse_network(
            "base 10\nspecies a b\nreaction a -> b rate 1\nreaction b -> a rate 1\n"
        )
    )
    with pytest.raises(ValueError, match="dominant cycle"):
        hi.leading_dag(nr.effective_from_split(g), "a")


def test_leading_dag_depth_is_path_independent():
    """Two routes of different edge weights reach the same vertex at the
    same depth; both stay in the DAG as tight edges."""
    g = nw.split(
        nw.parse_network(
            "base 10\nspecies r a b t\nreaction r -> a rate 1\n"
            "reaction r -> b scale -2\nreaction a -> t scale -2\n"
            "reaction a -> a + a rate 1\nreaction b -> t rate 1\n"
        )
    )
    dag = hi.leading_dag(nr.effective_from_split(g), "r")
    assert dag.depth == {"r": 0, "a": 0, "b": 2, "t": 2}
    assert set(dag.edges) == {("r", "a"), ("r", "b"), ("a", "t"), ("b", "t")}


def test_hier_estimates_example1(tree1):
    est = hi.hier_estimates(tree1, "1")
    assert est.lambda_scale == -3
    assert est.pi_log == {"1": 0.0, "2": 0.0, "3": -3.0}
    assert est.vdagger_log == {"1": 0.0, "2": 0.0, "3": NEG_INF}
    assert est.v_log == {"1": 0.0, "2": 2.0, "3": 0.0}
    assert est.flags == ()
    assert est.cores.cores == ("G1",)
    assert est.base_b == 10.0


@pytest.mark.parametrize("base", [10.0, 5.0])
def test_hier_estimates_example2(base):
    est = hi.hier_estimates(nr.renormalize(example2(base)), "1")
    assert est.lambda_scale == -7
    assert est.pi_log == {"1": -12.0, "2": -12.0, "1b": 0.0, "2b": 0.0}
    assert est.vdagger_log == {"1": -10.0, "2": -10.0, "1b": 0.0, "2b": 0.0}
    assert est.v_log == {"1": -12.0, "2": -7.0, "1b": 2.0, "2b": 6.0}
    assert est.alpha.scale == -7


def test_hier_estimates_resonance():
    est = hi.hier_estimates(nr.renormalize(example1(1e-3)), "1")
    assert est.flags == ("resonance",)
    assert est.lambda_scale == -5
    assert est.pi_log == {"1": 0.0, "2": 0.0, "3": -3.0}
    free = hi.hier_estimates(
        nr.renormalize(example1(1e-3), resonance_branch="assume-free"), "1"
    )
    assert "resonance" in free.flags


def test_hier_estimates_conservative_network():
    est = hi.hier_estimates(nr.renormalize(nw.split(load("markov.net"))), "a")
    assert est.lambda_scale == "non-positive"
    assert est.pi_log == {"a": 0.0, "b": 0.0, "c": -3.0}
    assert est.vdagger_log == {"a": 0.0, "b": 0.0, "c": 0.0}
    assert est.flags == ("shadow-zone",)


def test_hier_estimates_outside_the_basin(tree1):
    est = hi.hier_estimates(tree1, "3")
    assert est.cores.accessible == ("3",)
    assert est.lambda_scale == "non-positive"
    assert est.pi_log == {"3": 0.0}
    assert "shadow-zone" in est.flags


def test_hier_estimates_cemetery_absorbs_everything():
    g = nw.split(
        nw.parse_network(
            "base 10\nspecies a b\nreaction a -> b rate 1\n"
            "reaction b -> a scale -5\ndegrade b rate 1\n"
        )
    )
    est = hi.hier_estimates(nr.renormalize(g), "a")
    assert est.lambda_scale == "cemetery"
    assert est.flags == ("shadow-zone", "cemetery")
    assert est.pi_log == {"a": NEG_INF, "b": NEG_INF}


def test_support_matches_reachability():
    """π lives on what the source reaches, v† on what reaches the core."""
    g = nw.split(
        nw.parse_network(
            "base 10\nspecies a b c\nreaction a -> b rate 1\n"
            "reaction b -> a rate 1\nreaction a -> a + a scale -2\n"
            "reaction b -> c scale -4\n"
        )
    )
    est = hi.hier_estimates(nr.renormalize(g), "a")
    assert set(est.pi_log) == {"a", "b", "c"}
    assert all(v > NEG_INF for v in est.pi_log.values())
    assert est.vdagger_log["c"] == NEG_INF
    assert est.vdagger_log["a"] > NEG_INF


def test_compare_example1(tree1):
    est = hi.hier_estimates(tree1, "1")
    res = oc.perron(nw.generator(example1(0.1), 0.0, "A"))
    rep = hi.compare(est, res)
    assert rep.max_deviation == pytest.approx(0.045233, abs=1e-4)
    rows = {r.quantity: r for r in rep.rows}
    assert rows["lambda"].deviation == pytest.approx(0.0365, abs=1e-3)
    # oracle v† vanishes on the sink while the estimate says -inf: agreement
    assert rows["vdagger:3"].deviation == 0.0
    assert res.v_dagger_star[2] < 1e-30


def test_compare_flags_missing_support(tree1):
    est = hi.hier_estimates(tree1, "1")
    res = oc.perron(nw.generator(example1(0.1), 0.0, "A"))
    wrong = dataclasses.replace(est, vdagger_log={**est.vdagger_log, "3": 0.0})
    rep = hi.compare(wrong, res)
    assert rep.max_deviation == math.inf


def test_compare_skips_nonpositive_lambda():
    g = nw.split(load("markov.net"))
    est = hi.hier_estimates(nr.renormalize(g), "a")
    rep = hi.compare(est, oc.perron(nw.generator(g, 0.0, "A")))
    rows = {r.quantity: r for r in rep.rows}
    assert rows["lambda"].deviation is None
    assert rep.max_deviation == pytest.approx(0.000434, abs=1e-5)


def test_compare_is_normalization_free(tree1):
    """Shifting every finite hier entry by a constant leaves the report
    unchanged because both sides are max-aligned."""
    est = hi.hier_estimates(tree1, "1")
    res = oc.perron(nw.generator(example1(0.1), 0.0, "A"))
    shifted = dataclasses.replace(
        est,
        pi_log={s: v - 4.0 for s, v in est.pi_log.items()},
    )
    assert hi.compare(shifted, res).max_deviation == pytest.approx(
        hi.compare(est, res).max_deviation
    )
