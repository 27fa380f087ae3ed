"""Hierarchical log-scale estimates: source restriction, cores and
threshold rate, depth DAGs, and the π / v† / v / λ formulas."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .network import NEG_INF, SplitGraph, floor_scale, scales
from .oracle import OracleResult
from .renorm import CoalescenceTree, EffectiveGraph, ScaledRate, ZERO_RATE


@dataclass(frozen=True)
class CoreCluster:
    """One maximal dominant SCC of the source-restricted final graph."""

    id: str
    members: tuple[str, ...]
    alpha_scale: float
    regime: str
    lam: ScaledRate


@dataclass(frozen=True)
class CoreSet:
    sigma0: str
    accessible: tuple[str, ...]
    sccs: tuple[CoreCluster, ...]
    cores: tuple[str, ...]
    threshold_scale: float
    resonant_cores: bool


@dataclass(frozen=True)
class DepthDag:
    root: str
    edges: tuple[tuple[str, str], ...]
    depth: dict[str, int]


@dataclass(frozen=True)
class HierEstimate:
    """Integer log_b estimates for the spectral data seen from σ0.

    π is shifted so the maximum over core members is 0; v† puts cores
    at 0.  Entries are −inf exactly for species unreachable from
    (resp. not co-reachable with) every core.
    """

    sigma0: str
    lambda_scale: float | str
    pi_log: dict[str, float]
    vdagger_log: dict[str, float]
    v_log: dict[str, float]
    flags: tuple[str, ...]
    cores: CoreSet
    alpha: ScaledRate
    base_b: float


def restrict_accessible(g, sigma0: str) -> tuple[str, ...]:
    """Forward-reachable vertices from sigma0, in graph order."""
    if isinstance(g, SplitGraph):
        vertices = g.species
        edge_keys = g.edge_rates.keys()
    else:
        vertices = g.vertices
        edge_keys = g.edges.keys()
    if sigma0 not in vertices:
        raise ValueError(f"unknown source species {sigma0!r}")
    vset = set(vertices)
    adj: dict[str, list[str]] = {}
    for src, dst in edge_keys:
        if dst in vset:
            adj.setdefault(src, []).append(dst)
    seen = {sigma0}
    queue = [sigma0]
    while queue:
        v = queue.pop()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return tuple(v for v in vertices if v in seen)


def _restrict_effective(g: EffectiveGraph, keep) -> EffectiveGraph:
    kset = set(keep)
    return EffectiveGraph(
        tuple(v for v in g.vertices if v in kset),
        {(s, d): r for (s, d), r in g.edges.items() if s in kset},
        {v: r for v, r in g.deficiency.items() if v in kset},
        {v: r for v, r in g.degradation.items() if v in kset},
        g.base_b,
        g.step_index,
        g.cutoff_scale,
    )


def _is_compound(tree: CoalescenceTree, vid: str) -> bool:
    node = tree.nodes.get(vid)
    return node is not None and node.stats is not None


def cores_and_threshold(tree: CoalescenceTree, sigma0: str) -> CoreSet:
    """σ0-SCCs of the final effective graph and their threshold rates.

    A vertex qualifies as a maximal dominant σ0-SCC when its recurrence
    is dominant: it is a collapsed compound or a bare vertex with κ > 0,
    and the self-deficiency κ sits within tol of the vertex scale.
    Closed conservative compounds qualify vacuously.  α_q is the λ_G
    scale for autocatalytic clusters and −inf otherwise; the cores
    maximize α_q.
    """
    if sigma0 not in tree.bare.species:
        raise ValueError(f"unknown source species {sigma0!r}")
    top0 = tree.top(sigma0)
    eff = tree.final
    accessible = restrict_accessible(eff, top0)

    sccs: list[CoreCluster] = []
    for v in accessible:
        kappa = eff.kappa(v)
        compound = _is_compound(tree, v)
        if not compound and not kappa:
            continue
        if kappa.scale < eff.vertex_scale(v) - tree.tol:
            continue
        if compound:
            node = tree.nodes[v]
            st = node.stats
            regime = st.regime
            lam = st.lam
            members = node.members
        else:
            # Bare vertex whose deficiency dominates every edge: a
            # singleton autocatalytic cluster with threshold κ.
            regime = "autocatalytic"
            lam = kappa
            members = (v,)
        alpha_q = lam.scale if lam else NEG_INF
        sccs.append(CoreCluster(v, members, alpha_q, regime, lam))

    threshold = max((c.alpha_scale for c in sccs), default=NEG_INF)
    cores = tuple(c.id for c in sccs if c.alpha_scale == threshold)
    near = [c for c in sccs if c.alpha_scale >= threshold - tree.tol]
    resonant = threshold > NEG_INF and len(near) >= 2
    return CoreSet(
        sigma0=sigma0,
        accessible=accessible,
        sccs=tuple(sccs),
        cores=cores,
        threshold_scale=threshold,
        resonant_cores=resonant,
    )


def _weight_scale(
    g: EffectiveGraph,
    src: str,
    rate: ScaledRate,
    alpha_scale: float,
    compounds,
) -> float:
    """Integer scale of w(α) for one edge of the effective graph.

    Bare vertices divide by max(k, β, κ, α); compound vertices carry
    the Z(0,α)⁻¹ prefactor, i.e. divide by max(k_ext, β, α) where the
    collapsed outgoing rates already total τ⁻¹Z(0)."""
    denom = max(g.k_total(src).scale, g.beta(src).scale, alpha_scale)
    if src not in compounds:
        denom = max(denom, g.kappa(src).scale)
    if denom == NEG_INF:
        return NEG_INF
    return rate.scale - denom


def path_depth(
    g: EffectiveGraph, path, alpha: float = 0.0, compounds=frozenset()
) -> int:
    """α-depth of a vertex path: −Σ floor(log_b w(α)) over its edges."""
    path = list(path)
    alpha_scale = floor_scale(alpha, g.base_b) if alpha > 0.0 else NEG_INF
    depth = 0
    for src, dst in zip(path, path[1:]):
        rate = g.edges.get((src, dst))
        if rate is None:
            raise ValueError(f"missing edge {src!r} -> {dst!r}")
        w = _weight_scale(g, src, rate, alpha_scale, compounds)
        depth -= int(w)
    return depth


def _dijkstra_depths(
    g: EffectiveGraph, roots, alpha_scale: float, compounds, reverse: bool = False
) -> tuple[dict[str, int], list[tuple[str, str, int]]]:
    """Integer-depth shortest paths from the root set.  Edge depths are
    −w_scale of the forward edge; with reverse=True the edges are
    traversed backwards (weights stay attached to their source)."""
    vset = set(g.vertices)
    edges: list[tuple[str, str, int]] = []
    for (src, dst), rate in sorted(g.edges.items()):
        if dst not in vset:
            continue
        w = _weight_scale(g, src, rate, alpha_scale, compounds)
        if w == NEG_INF:
            continue
        d = -int(w)
        if reverse:
            edges.append((dst, src, d))
        else:
            edges.append((src, dst, d))
    adj: dict[str, list[tuple[str, int]]] = {}
    for a, b, d in edges:
        adj.setdefault(a, []).append((b, d))
    order = {v: i for i, v in enumerate(g.vertices)}
    dist: dict[str, int] = {}
    heap = [(0, order[r], r) for r in roots]
    heapq.heapify(heap)
    while heap:
        d, _, v = heapq.heappop(heap)
        if v in dist:
            continue
        dist[v] = d
        for w, dd in adj.get(v, ()):
            if w not in dist:
                heapq.heappush(heap, (d + dd, order[w], w))
    return dist, edges


def leading_dag(
    g: EffectiveGraph, root: str, alpha: float = 0.0, compounds=frozenset()
) -> DepthDag:
    """Minimal-depth (= maximal-weight) DAG rooted at ``root``.

    Runs Dijkstra on the integer edge depths, then keeps exactly the
    tight edges, those lying on some minimizing path.  Depths of
    dominant cycles would be zero, making the tight subgraph cyclic;
    renormalization collapses them first, so that is flagged as an
    invariant breach."""
    if root not in g.vertices:
        raise ValueError(f"unknown root {root!r}")
    alpha_scale = floor_scale(alpha, g.base_b) if alpha > 0.0 else NEG_INF
    dist, edges = _dijkstra_depths(g, [root], alpha_scale, compounds)
    tight = [
        (a, b)
        for a, b, d in edges
        if a in dist and b in dist and dist[a] + d == dist[b]
    ]
    # Kahn's algorithm over the tight edges: a leftover vertex means a
    # zero-depth cycle survived renormalization.
    indeg: dict[str, int] = {v: 0 for v in dist}
    for a, b in tight:
        indeg[b] += 1
    queue = [v for v, k in indeg.items() if k == 0]
    seen = 0
    succ: dict[str, list[str]] = {}
    for a, b in tight:
        succ.setdefault(a, []).append(b)
    while queue:
        v = queue.pop()
        seen += 1
        for w in succ.get(v, ()):
            indeg[w] -= 1
            if indeg[w] == 0:
                queue.append(w)
    if seen != len(indeg):
        raise ValueError("dominant cycle not collapsed")
    return DepthDag(root=root, edges=tuple(sorted(tight)), depth=dist)


def _cemetery_hit(tree: CoalescenceTree, tops) -> bool:
    stack = list(tops)
    while stack:
        vid = stack.pop()
        node = tree.nodes.get(vid)
        if node is None:
            continue
        if node.cemetery:
            return True
        stack.extend(node.direct)
    return False


def hier_estimates(tree: CoalescenceTree, sigma0: str) -> HierEstimate:
    """Evaluate the hierarchical formulas seen from ``sigma0``.

    Core members take π from the chain of enclosing-cluster weights
    Π Z⁻¹; everything else takes the best depth-DAG path from a core
    times Π Z(0,α₁)⁻¹ over its own enclosing chain.  v† is the best
    reverse-path weight to a core.  All values are shifted so the π
    maximum over core members is 0 and cores sit at 0 in v†.
    """
    core_set = cores_and_threshold(tree, sigma0)
    eff = _restrict_effective(tree.final, core_set.accessible)
    compounds = {v for v in eff.vertices if _is_compound(tree, v)}
    sa = scales(tree.bare)

    alpha = ZERO_RATE
    for c in core_set.sccs:
        if c.id in core_set.cores and c.lam.key > alpha.key:
            alpha = c.lam
    alpha_scale = alpha.scale

    flags = []
    if core_set.threshold_scale == NEG_INF:
        flags.append("shadow-zone")
    res_ids = set(tree.resonance_nodes)
    resonance = core_set.resonant_cores or any(
        a in res_ids
        for v in core_set.accessible
        for m in _bare_members(tree, v)
        for a in tree.ancestors(m)
    )
    if resonance:
        flags.append("resonance")
    cemetery = _cemetery_hit(tree, core_set.accessible)
    if cemetery:
        flags.append("cemetery")

    if core_set.threshold_scale > NEG_INF:
        lambda_scale: float | str = core_set.threshold_scale
    elif cemetery:
        lambda_scale = "cemetery"
    else:
        lambda_scale = "non-positive"

    # Roots for the forward/reverse path searches: the cores, or the
    # source's own top vertex when nothing recurrent is accessible.
    roots = list(core_set.cores) or [tree.top(sigma0)]
    fwd, _ = _dijkstra_depths(eff, roots, alpha_scale, compounds)
    rev, _ = _dijkstra_depths(eff, roots, alpha_scale, compounds, reverse=True)

    core_members: set[str] = set()
    for c in core_set.sccs:
        if c.id in core_set.cores:
            core_members.update(c.members if _is_compound(tree, c.id) else (c.id,))

    bare_accessible = [
        s for v in core_set.accessible for s in _bare_members(tree, v)
    ]

    raw_pi: dict[str, float] = {}
    for s in bare_accessible:
        chain = tree.ancestors(s)
        if s in core_members:
            total = 0.0
            for cid in chain[:-1]:
                total -= tree.nodes[cid].stats.z_weight.scale
            top = chain[-1] if chain else None
            if top is not None:
                z_top = tree.nodes[top].stats.z_weight
                if z_top:
                    total -= z_top.scale
            raw_pi[s] = total
        else:
            top = chain[-1] if chain else s
            if top not in fwd:
                raw_pi[s] = NEG_INF
                continue
            total = -float(fwd[top])
            for cid in chain:
                st = tree.nodes[cid].stats
                z0a = st.z0
                if alpha:
                    z0a = _rate_add(z0a, alpha / st.tau_inv)
                total -= z0a.scale
            raw_pi[s] = total

    shift = -max(raw_pi[s] for s in core_members) if core_members else 0.0
    pi_log = {
        s: (v + shift if v > NEG_INF else NEG_INF) for s, v in raw_pi.items()
    }

    vdagger_log: dict[str, float] = {}
    for s in bare_accessible:
        if s in core_members:
            vdagger_log[s] = 0.0
            continue
        chain = tree.ancestors(s)
        top = chain[-1] if chain else s
        vdagger_log[s] = -float(rev[top]) if top in rev else NEG_INF

    v_log: dict[str, float] = {}
    for s in bare_accessible:
        denom = max(sa.vertex_scale[s], alpha_scale)
        if denom == NEG_INF:
            denom = 0.0
        pi = pi_log[s]
        v_log[s] = pi - denom if pi > NEG_INF else NEG_INF

    if cemetery and core_set.threshold_scale == NEG_INF:
        pi_log = {s: NEG_INF for s in pi_log}

    return HierEstimate(
        sigma0=sigma0,
        lambda_scale=lambda_scale,
        pi_log=pi_log,
        vdagger_log=vdagger_log,
        v_log=v_log,
        flags=tuple(flags),
        cores=core_set,
        alpha=alpha,
        base_b=eff.base_b,
    )


def _bare_members(tree: CoalescenceTree, vid: str) -> tuple[str, ...]:
    node = tree.nodes.get(vid)
    if node is None:
        return (vid,)
    return node.members


def _rate_add(a: ScaledRate, b: ScaledRate) -> ScaledRate:
    if not a:
        return b
    if not b:
        return a
    return ScaledRate(a.value + b.value, max(a.scale, b.scale))


@dataclass(frozen=True)
class DeviationRow:
    quantity: str
    hier: float | str
    oracle: float
    deviation: float | None


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[DeviationRow, ...]
    max_deviation: float


def compare(
    est: HierEstimate, exact: OracleResult, zero_floor: float = 1e-30
) -> ComparisonReport:
    """Per-quantity |Δ log_b| between the hierarchy and the oracle.

    Both π vectors (and both v† vectors) are shifted so their maxima
    align, making the check normalization-free.  Oracle entries below
    ``zero_floor`` of the maximum count as structural zeros: they
    deviate by 0 from a hier −inf and by +inf from a finite estimate.
    """
    b = math.log(est.base_b)
    rows: list[DeviationRow] = []

    lam = exact.lambda_star
    if isinstance(est.lambda_scale, str):
        rows.append(DeviationRow("lambda", est.lambda_scale, lam, None))
    elif lam <= 0.0:
        rows.append(DeviationRow("lambda", est.lambda_scale, lam, None))
    else:
        dev = abs(math.log(lam) / b - est.lambda_scale)
        rows.append(DeviationRow("lambda", est.lambda_scale, lam, dev))

    for name, hier_map, vec in (
        ("pi", est.pi_log, exact.pi_star),
        ("vdagger", est.vdagger_log, exact.v_dagger_star),
    ):
        values = {s: float(x) for s, x in zip(exact.species, vec)}
        top = max(values.values())
        if top <= 0.0:
            continue
        hier_finite = [v for v in hier_map.values() if v > NEG_INF]
        hier_top = max(hier_finite) if hier_finite else 0.0
        for s in exact.species:
            if s not in hier_map:
                continue
            h = hier_map[s]
            x = values[s]
            small = x <= zero_floor * top
            if h <= NEG_INF:
                dev = 0.0 if small else abs(math.log(x / top) / b)
            elif small:
                dev = math.inf
            else:
                dev = abs((math.log(x / top) / b) - (h - hier_top))
            rows.append(DeviationRow(f"{name}:{s}", h, x, dev))

    finite = [r.deviation for r in rows if r.deviation is not None]
    return ComparisonReport(tuple(rows), max(finite) if finite else 0.0)
