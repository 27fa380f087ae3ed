"""Shared fixtures: the worked example networks and random-net builders."""

from pathlib import Path

import numpy as np
import pytest

from renormnet import network as nw

DATA = Path(__file__).parent / "data"


def load(name: str) -> nw.ReactionNetwork:
    return nw.load_network(DATA / name)


def example1(kappa1: float) -> nw.SplitGraph:
    """Three-species chain 1 <-> 2 -> 3 with self-replication on 1."""
    text = f"""
base 10
species 1 2 3
reaction 1 -> 2 rate 1
reaction 2 -> 1 scale -2
reaction 2 -> 3 scale -5
reaction 1 -> 1 + 1 rate {kappa1!r}
"""
    return nw.split(nw.parse_network(text))


def example2(base: float) -> nw.SplitGraph:
    """Two nested clusters whose growth rates differ by five decades."""
    text = f"""
base {base}
species 1 2 1b 2b
reaction 1 -> 2 scale 0
reaction 1b -> 2b scale -2
reaction 1b -> 1b + 1b scale -3
reaction 2 -> 1 scale -5
reaction 2b -> 1b scale -6
reaction 1 -> 1 + 1 scale -7
reaction 2 -> 2 + 2 scale -12
reaction 1 -> 1b scale -12
reaction 1b -> 1 scale -16
reaction 2b -> 2b + 2b scale -16
"""
    return nw.split(nw.parse_network(text))


def variant(kmin_scale: int) -> nw.SplitGraph:
    """Two coupled two-cycles at base 5; the slow edge of the first
    cycle carries the swept scale."""
    text = f"""
base 5
species 1 2 1b 2b
reaction 1 -> 2 scale 0
reaction 2 -> 1 scale {kmin_scale}
reaction 1b -> 2b scale -2
reaction 2b -> 1b scale -9
reaction 2 -> 2b scale -12
reaction 2b -> 2 scale -13
reaction 1 -> 1 + 1 scale -6
reaction 2 -> 2 + 2 scale -11
reaction 1b -> 1b + 1b scale -3
reaction 2b -> 2b + 2b scale -10
"""
    return nw.split(nw.parse_network(text))


def random_strong_graph(
    rng: np.random.Generator,
    n_max: int,
    scale_lo: int = -9,
    kappa: bool = False,
    base: float = 10.0,
) -> nw.SplitGraph:
    """Strongly connected split graph on 2..n_max species.

    A random Hamiltonian cycle guarantees irreducibility; extra edges
    and optional deficiencies get log-uniform rates.  Deficiency scales
    never exceed the vertex's largest outgoing edge, which keeps every
    vertex transient enough for the coalescence loop to finish on the
    full graph.
    """
    n = int(rng.integers(2, n_max + 1))
    names = tuple(f"s{i}" for i in range(n))
    order = rng.permutation(n)

    def rate() -> float:
        return float(base ** rng.uniform(scale_lo, 0.0))

    edges: dict[tuple[str, str], float] = {}
    for i in range(n):
        edges[(names[order[i]], names[order[(i + 1) % n]])] = rate()
    extra = int(rng.integers(0, n * (n - 1) // 2 + 1))
    for _ in range(extra):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges[(names[i], names[j])] = rate()

    lines = [f"base {base:g}", "species " + " ".join(names)]
    for (src, dst), k in sorted(edges.items()):
        lines.append(f"reaction {src} -> {dst} rate {k!r}")
    if kappa:
        picks = rng.choice(n, size=max(1, n // 3), replace=False)
        for i in sorted(picks):
            top = max(k for (src, _), k in edges.items() if src == names[i])
            k = float(top * base ** rng.uniform(-4.0, 0.0))
            lines.append(f"reaction {names[i]} -> {names[i]} + {names[i]} rate {k!r}")
    return nw.split(nw.parse_network("\n".join(lines)))


@pytest.fixture()
def ex1():
    return example1(0.1)


@pytest.fixture()
def ex2_b10():
    return example2(10.0)


@pytest.fixture()
def ex2_b5():
    return example2(5.0)
