"""Reaction networks and their split graphs.

A network file declares species and reactions of three kinds: degradation
(σ → ∅), conversion (σ → σ') and duplication (σ → σ' + σ'').  Everything
downstream works on the *split graph*: a weighted digraph whose edges
aggregate the per-product rates, plus a deficiency rate κ_σ (total
duplication rate out of σ) and a degradation rate β_σ per vertex.  This
module owns parsing, the split construction, the dense generator and
weight matrices, and the integer scale assignment used by the coarsening
code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Relative slack when snapping a rate to an integer scale.  Rates are
#: routinely entered as b**n, and float(b**n) may land a hair under the
#: power-of-b boundary; values within this relative distance of b**(n+1)
#: are assigned scale n+1.
BOUNDARY_GUARD = 1e-9

NEG_INF = float("-inf")


class NetworkError(ValueError):
    """Malformed network file or inconsistent network data."""


class SingularWeightError(ValueError):
    """Raised when a transition-weight denominator |A_σσ| + α vanishes."""


def floor_scale(value: float, base: float) -> int:
    """Integer scale of a positive rate: floor(log_base(value)), with a
    guard that snaps values within BOUNDARY_GUARD (relative) below a
    power of ``base`` up onto it."""
    if value <= 0.0:
        raise ValueError(f"rate must be positive, got {value}")
    if base <= 1.0:
        raise ValueError(f"base must exceed 1, got {base}")
    n = math.floor(math.log(value) / math.log(base))
    while value * (1.0 + BOUNDARY_GUARD) >= base ** (n + 1):
        n += 1
    while value * (1.0 + BOUNDARY_GUARD) < base**n:
        n -= 1
    return n


@dataclass(frozen=True)
class Reaction:
    """One declared reaction.

    kind is "degradation" (no products), "one-to-one" (one product) or
    "one-to-two" (two products, repeats allowed).
    """

    kind: str
    reactant: str
    products: tuple[str, ...]
    rate: float

    def __post_init__(self):
        expected = {"degradation": 0, "one-to-one": 1, "one-to-two": 2}
        if self.kind not in expected:
            raise NetworkError(f"unknown reaction kind {self.kind!r}")
        if len(self.products) != expected[self.kind]:
            raise NetworkError(
                f"{self.kind} reaction must have {expected[self.kind]} "
                f"product(s), got {len(self.products)}"
            )
        if not self.rate > 0.0:
            raise NetworkError(f"non-positive rate {self.rate} in reaction")


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    base_b: float

    def __post_init__(self):
        if self.base_b <= 1.0:
            raise NetworkError(f"base must exceed 1, got {self.base_b}")
        seen = set()
        for s in self.species:
            if s in seen:
                raise NetworkError(f"duplicate species declaration {s!r}")
            seen.add(s)
        for r in self.reactions:
            for s in (r.reactant, *r.products):
                if s not in seen:
                    raise NetworkError(f"unknown species {s!r} in reaction")


@dataclass(frozen=True)
class SplitGraph:
    """Split-reaction graph: aggregated edge rates plus per-vertex
    deficiency (κ) and degradation (β) rates.

    ``edge_rates`` holds only σ ≠ σ' entries with strictly positive
    rates; κ and β default to zero for absent keys.  Treat all three
    maps as read-only.
    """

    species: tuple[str, ...]
    edge_rates: dict[tuple[str, str], float]
    deficiency: dict[str, float]
    degradation: dict[str, float]
    base_b: float

    def kappa(self, sigma: str) -> float:
        return self.deficiency.get(sigma, 0.0)

    def beta(self, sigma: str) -> float:
        return self.degradation.get(sigma, 0.0)

    def total_rate(self, sigma: str) -> float:
        """k_σ: total outgoing edge rate (excludes κ and β)."""
        return sum(
            k for (src, _), k in self.edge_rates.items() if src == sigma
        )

    def out_edges(self, sigma: str) -> list[tuple[str, float]]:
        return [
            (dst, k) for (src, dst), k in self.edge_rates.items() if src == sigma
        ]

    def in_edges(self, sigma: str) -> list[tuple[str, float]]:
        return [
            (src, k) for (src, dst), k in self.edge_rates.items() if dst == sigma
        ]

    def restrict(self, vertices) -> "SplitGraph":
        """Induced subgraph on ``vertices`` (order inherited); edges with
        either endpoint outside are dropped, κ/β kept for the members."""
        keep = set(vertices)
        return SplitGraph(
            species=tuple(s for s in self.species if s in keep),
            edge_rates={
                e: k for e, k in self.edge_rates.items()
                if e[0] in keep and e[1] in keep
            },
            deficiency={s: v for s, v in self.deficiency.items() if s in keep},
            degradation={s: v for s, v in self.degradation.items() if s in keep},
            base_b=self.base_b,
        )


@dataclass(frozen=True)
class GeneratorMatrix:
    """Dense adjoint generator.  Column σ holds the reactions out of σ:
    matrix[j, i] = k_{σi→σj}.  flavor "A" is the defective generator
    (diagonal −(k_σ + β_σ − κ_σ) − α), flavor "Atilde" the conservative
    one (diagonal −k_σ, α must be 0)."""

    matrix: np.ndarray
    species: tuple[str, ...]
    flavor: str
    alpha: float


@dataclass(frozen=True)
class WeightMatrix:
    """Transition weights, row-oriented: matrix[i, j] = w_{σi→σj}.
    flavor "w" divides by |A_σσ| + α, flavor "wtilde" by k_σ."""

    matrix: np.ndarray
    species: tuple[str, ...]
    flavor: str
    alpha: float


@dataclass(frozen=True)
class ScaleAssignment:
    edge_scale: dict[tuple[str, str], int]
    vertex_scale: dict[str, float]
    deficiency_scale: dict[str, float]
    degradation_scale: dict[str, float]


def _parse_rate(tokens: list[str], base: float, lineno: int) -> float:
    if len(tokens) != 2 or tokens[0] not in ("rate", "scale"):
        raise NetworkError(
            f"line {lineno}: expected 'rate <float>' or 'scale <int>', "
            f"got {' '.join(tokens)!r}"
        )
    if tokens[0] == "rate":
        try:
            rate = float(tokens[1])
        except ValueError:
            raise NetworkError(f"line {lineno}: bad rate literal {tokens[1]!r}")
    else:
        try:
            rate = base ** int(tokens[1])
        except ValueError:
            raise NetworkError(f"line {lineno}: bad scale literal {tokens[1]!r}")
    if not rate > 0.0:
        raise NetworkError(f"line {lineno}: non-positive rate {tokens[1]}")
    return rate


def parse_network(text: str) -> ReactionNetwork:
    """Parse the line-oriented network format.

    Grammar (``#`` starts a comment, UTF-8):

        base <real>                               -- first directive, once
        species <id> [<id> ...]
        reaction <id> -> <id> (rate <f>|scale <n>)
        reaction <id> -> <id> + <id> (rate <f>|scale <n>)
        degrade <id> (rate <f>|scale <n>)
    """
    base: float | None = None
    species: list[str] = []
    declared: set[str] = set()
    reactions: list[Reaction] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        keyword = tokens[0]

        if keyword == "base":
            if base is not None:
                raise NetworkError(f"line {lineno}: duplicate base directive")
            if species or reactions:
                raise NetworkError(
                    f"line {lineno}: base must come before declarations"
                )
            if len(tokens) != 2:
                raise NetworkError(f"line {lineno}: usage: base <real>")
            try:
                base = float(tokens[1])
            except ValueError:
                raise NetworkError(f"line {lineno}: bad base literal {tokens[1]!r}")
            if base <= 1.0:
                raise NetworkError(f"line {lineno}: base must exceed 1")
            continue

        if base is None:
            raise NetworkError(
                f"line {lineno}: first directive must be 'base <real>'"
            )

        if keyword == "species":
            if len(tokens) < 2:
                raise NetworkError(f"line {lineno}: species line needs ids")
            for s in tokens[1:]:
                if s in declared:
                    raise NetworkError(
                        f"line {lineno}: duplicate species declaration {s!r}"
                    )
                declared.add(s)
                species.append(s)
            continue

        if keyword == "degrade":
            if len(tokens) != 4:
                raise NetworkError(
                    f"line {lineno}: usage: degrade <id> rate|scale <value>"
                )
            reactant = tokens[1]
            if reactant not in declared:
                raise NetworkError(f"line {lineno}: unknown species {reactant!r}")
            rate = _parse_rate(tokens[2:], base, lineno)
            reactions.append(Reaction("degradation", reactant, (), rate))
            continue

        if keyword == "reaction":
            if len(tokens) < 6 or tokens[2] != "->":
                raise NetworkError(
                    f"line {lineno}: usage: reaction <id> -> <id> [+ <id>] "
                    f"rate|scale <value>"
                )
            reactant = tokens[1]
            rate = _parse_rate(tokens[-2:], base, lineno)
            rhs = tokens[3:-2]
            if len(rhs) == 1:
                products = (rhs[0],)
                kind = "one-to-one"
            elif len(rhs) == 3 and rhs[1] == "+":
                products = (rhs[0], rhs[2])
                kind = "one-to-two"
            else:
                if "+" in rhs and len(rhs) > 3:
                    raise NetworkError(
                        f"line {lineno}: at most two products are supported"
                    )
                raise NetworkError(f"line {lineno}: malformed product list")
            for s in (reactant, *products):
                if s not in declared:
                    raise NetworkError(f"line {lineno}: unknown species {s!r}")
            reactions.append(Reaction(kind, reactant, products, rate))
            continue

        raise NetworkError(f"line {lineno}: unknown directive {keyword!r}")

    if base is None:
        raise NetworkError("missing base directive")
    if not species:
        raise NetworkError("no species declared")
    return ReactionNetwork(tuple(species), tuple(reactions), base)


def load_network(path) -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def serialize(net: ReactionNetwork) -> str:
    """Deterministic rendering in the input grammar.  Rates are written
    with repr() so parse(serialize(net)) reproduces the split graph
    exactly."""
    lines = [f"base {net.base_b!r}"]
    lines.append("species " + " ".join(net.species))
    for r in net.reactions:
        if r.kind == "degradation":
            lines.append(f"degrade {r.reactant} rate {r.rate!r}")
        elif r.kind == "one-to-one":
            lines.append(f"reaction {r.reactant} -> {r.products[0]} rate {r.rate!r}")
        else:
            lines.append(
                f"reaction {r.reactant} -> {r.products[0]} + {r.products[1]} "
                f"rate {r.rate!r}"
            )
    return "\n".join(lines) + "\n"


def split(net: ReactionNetwork) -> SplitGraph:
    """Build the split graph.

    Each duplication σ → σ' + σ'' adds its rate to κ_σ and to the edges
    σ→σ' and σ→σ'' — so σ → 2σ' contributes twice to that single edge —
    except that product copies equal to the reactant never create an
    off-diagonal edge (σ → σ + σ'' feeds only the σ→σ'' edge, and
    σ → 2σ contributes to κ_σ alone).
    """
    edges: dict[tuple[str, str], float] = {}
    kappa: dict[str, float] = {}
    beta: dict[str, float] = {}

    def add_edge(src: str, dst: str, k: float):
        if dst == src:
            return
        edges[(src, dst)] = edges.get((src, dst), 0.0) + k

    for r in net.reactions:
        if r.kind == "degradation":
            beta[r.reactant] = beta.get(r.reactant, 0.0) + r.rate
        elif r.kind == "one-to-one":
            add_edge(r.reactant, r.products[0], r.rate)
        else:
            kappa[r.reactant] = kappa.get(r.reactant, 0.0) + r.rate
            for p in r.products:
                add_edge(r.reactant, p, r.rate)

    return SplitGraph(net.species, edges, kappa, beta, net.base_b)


def _diagonal(g: SplitGraph, sigma: str) -> float:
    return -(g.total_rate(sigma) + g.beta(sigma) - g.kappa(sigma))


def generator(g: SplitGraph, alpha: float = 0.0, flavor: str = "A") -> GeneratorMatrix:
    """Dense adjoint generator over g.species.

    flavor "A": defective generator, diagonal −(k_σ + β_σ − κ_σ) − α.
    flavor "Atilde": conservative generator, diagonal −k_σ (columns sum
    to zero); requires α = 0.
    """
    if flavor not in ("A", "Atilde"):
        raise ValueError(f"unknown generator flavor {flavor!r}")
    if flavor == "Atilde" and alpha != 0.0:
        raise ValueError("flavor Atilde requires alpha = 0")
    n = len(g.species)
    index = {s: i for i, s in enumerate(g.species)}
    m = np.zeros((n, n))
    for (src, dst), k in g.edge_rates.items():
        m[index[dst], index[src]] += k
    for s, i in index.items():
        if flavor == "A":
            m[i, i] = _diagonal(g, s) - alpha
        else:
            m[i, i] = -g.total_rate(s)
    return GeneratorMatrix(m, g.species, flavor, alpha)


def weights(g: SplitGraph, alpha: float = 0.0, flavor: str = "w") -> WeightMatrix:
    """Transition-weight matrix, rows indexed by the source vertex.

    flavor "w": w(α)_{σ→σ'} = k_{σ→σ'} / (|A_σσ| + α).
    flavor "wtilde": k_{σ→σ'} / k_σ (skeleton chain; rows of vertices
    with no outgoing edge stay zero).
    """
    if flavor not in ("w", "wtilde"):
        raise ValueError(f"unknown weight flavor {flavor!r}")
    n = len(g.species)
    index = {s: i for i, s in enumerate(g.species)}
    m = np.zeros((n, n))
    denom = np.zeros(n)
    for s, i in index.items():
        if flavor == "w":
            denom[i] = abs(_diagonal(g, s)) + alpha
            if denom[i] <= 0.0:
                raise SingularWeightError(
                    f"vanishing weight denominator |A_σσ| + α at {s!r}"
                )
        else:
            denom[i] = g.total_rate(s)
    for (src, dst), k in g.edge_rates.items():
        i = index[src]
        if denom[i] > 0.0:
            m[i, index[dst]] = k / denom[i]
    return WeightMatrix(m, g.species, flavor, alpha)


def deficiency_weights(g: SplitGraph, alpha: float = 0.0) -> dict[str, float]:
    """ε_σ(α) = κ_σ / (|A_σσ| + α) per vertex (0 where κ_σ = 0)."""
    eps = {}
    for s in g.species:
        kap = g.kappa(s)
        if kap == 0.0:
            eps[s] = 0.0
            continue
        denom = abs(_diagonal(g, s)) + alpha
        if denom <= 0.0:
            raise SingularWeightError(
                f"vanishing weight denominator |A_σσ| + α at {s!r}"
            )
        eps[s] = kap / denom
    return eps


def scales(g: SplitGraph) -> ScaleAssignment:
    """Integer scales floor(log_b ·) of every edge rate, κ_σ and β_σ;
    vertex scale = max outgoing edge scale (−inf for sinks).  Zero κ/β
    map to −inf."""
    b = g.base_b
    edge_scale = {e: floor_scale(k, b) for e, k in g.edge_rates.items()}
    vertex_scale: dict[str, float] = {s: NEG_INF for s in g.species}
    for (src, _), n in edge_scale.items():
        if n > vertex_scale[src]:
            vertex_scale[src] = n
    deficiency_scale = {
        s: (floor_scale(g.kappa(s), b) if g.kappa(s) > 0.0 else NEG_INF)
        for s in g.species
    }
    degradation_scale = {
        s: (floor_scale(g.beta(s), b) if g.beta(s) > 0.0 else NEG_INF)
        for s in g.species
    }
    return ScaleAssignment(edge_scale, vertex_scale, deficiency_scale, degradation_scale)
