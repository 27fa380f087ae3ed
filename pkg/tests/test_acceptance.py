"""Advertised end-to-end guarantees, one numbered check per test.

Each test prints a single PASS/FAIL line with the measured numbers, so
``pytest -rA tests/test_acceptance.py`` reads as a checklist.  Every
randomized check runs on fixed seeds and is reproducible bit for bit.

Check 1 is red by a hair and intentionally left that way: at the top of
the swept range the doubling rate equals the fast edge, the boundary of
the estimate's validity domain.  There the true stationary-weight tilt
is 10^1.0217 while an integer-scale estimate cannot express more than a
decade, so the π deviation lands 2.2% above the advertised 1.0.  The
test reports the honest number rather than widening the tolerance.
"""

import math
import time

import numpy as np

from renormnet import hierarchy as hi
from renormnet import network as nw
from renormnet import oracle as oc
from renormnet import renorm as nr

from conftest import example1, example2, random_strong_graph, variant

LOG5 = math.log(5.0)


def _line(num: int, name: str, ok: bool, detail: str) -> str:
    msg = f"acceptance {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(msg)
    return msg


def _perron(g: nw.SplitGraph) -> oc.OracleResult:
    return oc.perron(nw.generator(g, 0.0, "A"))


def _deviations(g: nw.SplitGraph, sigma0: str) -> dict[str, float | None]:
    est = hi.hier_estimates(nr.renormalize(g), sigma0)
    rep = hi.compare(est, _perron(g))
    return {r.quantity: r.deviation for r in rep.rows}


def test_01_example1_sweep():
    """Growth-rate and weight scales across the doubling-rate domain."""
    t0 = time.monotonic()
    devs: dict[int, dict[str, float | None]] = {}
    for s in (-3, -2, -1, 0):
        devs[s] = _deviations(example1(10.0 ** s), "1")

    # Below the domain the {1,2} family decays.  The absorbing third
    # species pins the full graph's rightmost eigenvalue at zero, so the
    # decay is read off the two-species system with the 2 -> 3 edge as
    # pure exit (the same principal block of the generator).
    decay_ok = True
    hier_dead_ok = True
    for s in (-4, -5):
        text = (
            "base 10\nspecies 1 2\nreaction 1 -> 2 rate 1\n"
            "reaction 2 -> 1 scale -2\ndegrade 2 scale -5\n"
            f"reaction 1 -> 1 + 1 rate {10.0 ** s!r}\n"
        )
        block = nw.split(nw.parse_network(text))
        decay_ok &= _perron(block).lambda_star < 0.0
        est = hi.hier_estimates(nr.renormalize(example1(10.0 ** s)), "1")
        hier_dead_ok &= isinstance(est.lambda_scale, str)

    elapsed = time.monotonic() - t0
    quantities = ("lambda", "pi:1", "pi:3")
    worst = max(devs[s][q] for s in (-2, -1, 0) for q in quantities)
    ok = worst <= 1.0 and decay_ok and hier_dead_ok and elapsed < 5.0
    mark = [
        f"{q}@{s}" for s in (-2, -1, 0) for q in quantities
        if devs[s][q] == worst
    ]
    detail = (
        f"max |dlog| {worst:.4f} at {'/'.join(mark)}, limit 1.0; "
        f"decay below wall {'ok' if decay_ok else 'BAD'}; "
        f"non-autocatalytic report {'ok' if hier_dead_ok else 'BAD'}; "
        f"{elapsed:.2f}s"
    )
    msg = _line(1, "example-1 sweep", ok, detail)
    assert ok, msg


def test_02_example2_fixed_point():
    """Frozen integer estimates for the nested two-cluster network."""
    t0 = time.monotonic()
    want_pi = {"1": -12.0, "2": -12.0, "1b": 0.0, "2b": 0.0}
    want_vd = {"1": -10.0, "2": -10.0, "1b": 0.0, "2b": 0.0}
    exact_ok = True
    worst = 0.0
    for base in (5.0, 10.0):
        g = example2(base)
        est = hi.hier_estimates(nr.renormalize(g), "1")
        exact_ok &= (
            est.lambda_scale == -7
            and est.pi_log == want_pi
            and est.vdagger_log == want_vd
        )
        worst = max(worst, hi.compare(est, _perron(g)).max_deviation)
    elapsed = time.monotonic() - t0
    ok = exact_ok and worst <= 1.5 and elapsed < 5.0
    detail = (
        f"integer maps {'exact' if exact_ok else 'WRONG'}; "
        f"max oracle |dlog| {worst:.4f} (limit 1.5); {elapsed:.2f}s"
    )
    msg = _line(2, "example-2 fixed point", ok, detail)
    assert ok, msg


def test_03_variant_sweep():
    """Min-envelope of the two cluster estimates and the two crossings."""
    t0 = time.monotonic()
    envelope_worst = 0.0
    ratio: dict[int, float] = {}
    split_gap: dict[int, float] = {}
    for s in range(-8, -1):
        g = variant(s)
        res = _perron(g)
        est = hi.hier_estimates(nr.renormalize(g), "1")
        by_member = {
            m: c for c in est.cores.sccs for m in c.members
        }
        a1 = by_member["1"].lam.value
        a2 = by_member["1b"].lam.value
        env = -math.log(max(a1, a2)) / LOG5
        envelope_worst = max(
            envelope_worst, abs(-math.log(res.lambda_star) / LOG5 - env)
        )
        idx = {name: i for i, name in enumerate(res.species)}
        ratio[s] = (
            -(math.log(res.pi_star[idx["2"]]) - math.log(res.pi_star[idx["2b"]]))
            / LOG5
        )
        split_gap[s] = math.log(a1) - math.log(a2)
    elapsed = time.monotonic() - t0

    sign_ok = ratio[-7] > 0.0 > ratio[-5]
    crossing_ok = split_gap[-5] * split_gap[-3] < 0.0
    ok = envelope_worst <= 1.0 and sign_ok and crossing_ok and elapsed < 30.0
    detail = (
        f"envelope |dlog| max {envelope_worst:.3f} (limit 1.0); "
        f"weight ratio {ratio[-7]:+.3f}@-7 -> {ratio[-5]:+.3f}@-5; "
        f"cluster crossing in (-5,-3): {crossing_ok}; {elapsed:.2f}s"
    )
    msg = _line(3, "variant sweep", ok, detail)
    assert ok, msg


def test_04_markov_limit():
    """Conservative networks: zero growth, weights match the chain."""
    worst_lam = 0.0
    worst_pi = 0.0
    for seed in range(25):
        rng = np.random.default_rng(1000 + seed)
        g = random_strong_graph(rng, 12)
        res = _perron(g)
        worst_lam = max(worst_lam, abs(res.lambda_star))
        est = hi.hier_estimates(nr.renormalize(g), g.species[0])
        rep = hi.compare(est, res)
        for row in rep.rows:
            if row.quantity.startswith("pi:") and row.deviation is not None:
                worst_pi = max(worst_pi, row.deviation)
    ok = worst_lam < 1e-9 and worst_pi <= 2.0
    detail = (
        f"25 nets: max |lambda*| {worst_lam:.2e} (limit 1e-9); "
        f"max pi |dlog| {worst_pi:.3f} (limit 2.0)"
    )
    msg = _line(4, "markov limit", ok, detail)
    assert ok, msg


def _surplus_graph(rng: np.random.Generator) -> nw.SplitGraph:
    """Strongly connected net whose every species has the same net
    doubling surplus: random per-vertex doubling and degradation rates
    with a fixed positive difference, which keeps the growth rate inside
    the sandwich for any topology."""
    base = 10.0
    n = int(rng.integers(3, 9))
    names = tuple(f"s{i}" for i in range(n))
    order = rng.permutation(n)
    edges: dict[tuple[str, str], float] = {}

    def rate() -> float:
        return float(base ** rng.uniform(-6.0, 0.0))

    for i in range(n):
        edges[(names[order[i]], names[order[(i + 1) % n]])] = rate()
    for _ in range(int(rng.integers(0, n + 1))):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges[(names[i], names[j])] = rate()

    outflow = {v: 0.0 for v in names}
    for (src, _), k in edges.items():
        outflow[src] += k
    s0 = min(outflow.values()) * float(base ** rng.uniform(-4.0, -0.5))

    lines = [f"base {base:g}", "species " + " ".join(names)]
    for (src, dst), k in sorted(edges.items()):
        lines.append(f"reaction {src} -> {dst} rate {k!r}")
    for i, v in enumerate(names):
        beta = s0 * float(rng.uniform(0.5, 3.0)) if i % 2 else 0.0
        if beta:
            lines.append(f"degrade {v} rate {beta!r}")
        lines.append(f"reaction {v} -> {v} + {v} rate {s0 + beta!r}")
    return nw.split(nw.parse_network("\n".join(lines)))


def test_05_apriori_sandwich():
    """Two-sided growth-rate bounds on uniform-surplus networks."""
    violations = 0
    lower_margin = math.inf
    upper_margin = math.inf
    for seed in range(50):
        rng = np.random.default_rng(3000 + seed)
        g = _surplus_graph(rng)
        lam = _perron(g).lambda_star
        bounds = oc.apriori_bounds(g)
        if not bounds.lower <= lam:
            violations += 1
        if math.isfinite(bounds.upper):
            if not lam <= bounds.upper:
                violations += 1
            upper_margin = min(upper_margin, (bounds.upper - lam) / lam)
        lower_margin = min(lower_margin, (lam - bounds.lower) / lam)
    ok = violations == 0
    detail = (
        f"50 nets, {violations} violations; slimmest margins "
        f"lower {lower_margin:.2%}, upper {upper_margin:.2%}"
    )
    msg = _line(5, "a-priori sandwich", ok, detail)
    assert ok, msg


def _irreducible(P: np.ndarray) -> bool:
    n = P.shape[0]
    reach = np.eye(n, dtype=bool) | (P > 0.0)
    return bool(np.all(np.linalg.matrix_power(reach, n - 1)))


def test_06_doeblin_suite():
    """Contraction of zero-sum measures and zero-average observables."""
    l1_bad = 0
    osc_bad = 0
    irreducible_count = 0
    rho_star_min = math.inf
    for seed in range(200):
        rng = np.random.default_rng(6000 + seed)
        n = int(rng.integers(2, 9))
        M = rng.uniform(0.0, 1.0, (n, n))
        if seed % 2:
            M *= rng.uniform(0.0, 1.0, (n, n)) < 0.6
            for i in range(n):
                if M[i].sum() == 0.0:
                    M[i, int(rng.integers(0, n))] = 1.0
        P = M / M.sum(axis=1)[:, None]
        rho = oc.doeblin_rho(P)
        for _ in range(20):
            u = rng.normal(size=n)
            u -= u.mean()
            if np.abs(P.T @ u).sum() > (1.0 - rho) * np.abs(u).sum() + 1e-12:
                l1_bad += 1
            f = rng.normal(size=n)
            osc_in = f.max() - f.min()
            osc_out = (P @ f).max() - (P @ f).min()
            if osc_out > (1.0 - rho) * osc_in + 1e-12:
                osc_bad += 1
        if _irreducible(P):
            irreducible_count += 1
            avg = oc.doeblin_rho(P, average=True)
            rho_star_min = min(rho_star_min, avg.rho_star)
    ok = l1_bad == 0 and osc_bad == 0 and rho_star_min > 0.0
    detail = (
        f"200 chains x 20 vectors: {l1_bad} L1 and {osc_bad} oscillation "
        f"breaches; min averaged rho* {rho_star_min:.3e} over "
        f"{irreducible_count} irreducible chains"
    )
    msg = _line(6, "doeblin suite", ok, detail)
    assert ok, msg


def test_07_path_sum_vs_resolvent():
    """Truncated path sums against the exact resolvent."""
    worst = 0.0
    longest = 0
    for seed in range(20):
        rng = np.random.default_rng(4000 + seed)
        g = random_strong_graph(rng, 6, kappa=seed % 2 == 0)
        lam = _perron(g).lambda_star
        k_max = max(g.total_rate(s) for s in g.species)
        alpha = 2.0 * max(lam, k_max * 1e-3)
        W = nw.weights(g, alpha, "w").matrix
        rho = float(np.max(np.abs(np.linalg.eigvals(W))))
        L = max(8, math.ceil(math.log(1e-8 * (1.0 - rho)) / math.log(rho)))
        longest = max(longest, L)
        exact = oc.resolvent(nw.generator(g, 0.0, "A"), alpha)
        approx = oc.path_sum_resolvent(g, alpha, L)
        worst = max(worst, float(np.max(np.abs(approx - exact) / exact)))
    ok = worst < 1e-6
    detail = (
        f"20 graphs: max relative gap {worst:.2e} (limit 1e-6); "
        f"longest truncation {longest} steps"
    )
    msg = _line(7, "path sums vs resolvent", ok, detail)
    assert ok, msg


def test_08_green_kernel_consistency():
    """Occupation row of the tilted chain against the spectral data."""
    g = example1(0.1)
    res = _perron(g)
    W = nw.weights(g, res.lambda_star, "w")
    N = 10_000
    row = oc.green_kernel(W, "2", N).normalized_row(N)
    scale = float(row.sum())  # pi* sums to one
    prop_err = float(np.max(np.abs(row - scale * res.pi_star) / (scale * res.pi_star)))
    idx = res.species.index("2")
    target = res.v_dagger_star[idx] * res.pi_star
    factor_err = float(np.max(np.abs(row - target) / target))
    ok = prop_err < 0.02 and factor_err < 0.02
    detail = (
        f"N=10^4 from species 2: proportionality gap {prop_err:.2e}, "
        f"v-dagger factorization gap {factor_err:.2e} (limits 2e-2)"
    )
    msg = _line(8, "green-kernel consistency", ok, detail)
    assert ok, msg


def _separated_graph(rng: np.random.Generator) -> nw.SplitGraph:
    """Random strongly connected net whose rate scales sit on a stride-3
    grid, so every scale comparison downstream is decisive."""
    base = 10.0
    n = int(rng.integers(3, 9))
    names = tuple(f"s{i}" for i in range(n))
    order = rng.permutation(n)
    slots = list(range(-3 * n * (n + 1), -2, 3))
    rng.shuffle(slots)
    pairs = [(names[order[i]], names[order[(i + 1) % n]]) for i in range(n)]
    for _ in range(int(rng.integers(0, n + 1))):
        i, j = rng.integers(0, n, size=2)
        pair = (names[i], names[j])
        if i != j and pair not in pairs:
            pairs.append(pair)
    edge_scale = {pair: slots.pop() for pair in pairs}
    lines = [f"base {base:g}", "species " + " ".join(names)]
    for (src, dst), sc in sorted(edge_scale.items()):
        lines.append(f"reaction {src} -> {dst} scale {sc}")
    for i in sorted(rng.choice(n, size=max(1, n // 3), replace=False)):
        top = max(sc for (src, _), sc in edge_scale.items() if src == names[i])
        kap = top - 3 * int(rng.integers(1, 4))
        lines.append(f"reaction {names[i]} -> {names[i]} + {names[i]} scale {kap}")
    return nw.split(nw.parse_network("\n".join(lines)))


def test_09_depth_dag_properties():
    """Acyclicity and exact depth additivity of the leading-path DAG."""
    exactness_bad = 0
    cross_check_bad = 0
    dags = 0
    for seed in range(100):
        rng = np.random.default_rng(2000 + seed)
        g = _separated_graph(rng)
        tree = nr.renormalize(g)
        est = hi.hier_estimates(tree, g.species[0])
        eff = tree.final
        compounds = frozenset(
            v for v in eff.vertices
            if (node := tree.nodes.get(v)) is not None and node.stats is not None
        )
        alpha = est.alpha.value if est.alpha else 0.0
        roots = est.cores.cores or (tree.top(g.species[0]),)
        for root in roots:
            if root not in eff.vertices:
                continue
            dag = hi.leading_dag(eff, root, alpha, compounds)
            dags += 1
            for a, b in dag.edges:
                step = hi.path_depth(eff, (a, b), alpha, compounds)
                if dag.depth[b] != dag.depth[a] + step:
                    exactness_bad += 1
            if _bellman_depths(eff, root, alpha, compounds) != dag.depth:
                cross_check_bad += 1
    ok = exactness_bad == 0 and cross_check_bad == 0
    detail = (
        f"{dags} DAGs on 100 nets, all acyclic; {exactness_bad} additivity "
        f"and {cross_check_bad} Bellman-Ford disagreements"
    )
    msg = _line(9, "depth-DAG properties", ok, detail)
    assert ok, msg


def _bellman_depths(g, root: str, alpha: float, compounds) -> dict[str, int]:
    """Independent shortest-depth solve by plain edge relaxation."""
    usable: list[tuple[str, str, int]] = []
    for src, dst in sorted(g.edges):
        try:
            usable.append((src, dst, hi.path_depth(g, (src, dst), alpha, compounds)))
        except (OverflowError, ValueError):
            continue
    dist: dict[str, float] = {v: math.inf for v in g.vertices}
    dist[root] = 0
    for _ in range(len(g.vertices)):
        changed = False
        for src, dst, d in usable:
            if dist[src] + d < dist[dst]:
                dist[dst] = dist[src] + d
                changed = True
        if not changed:
            break
    return {v: int(d) for v, d in dist.items() if math.isfinite(d)}


def _cluster_config(rng: np.random.Generator):
    """A slow strongly connected backbone, one or two fast two-cycles to
    average away, and a doubling reaction on a vertex outside them."""
    base = 10.0
    n = int(rng.integers(4, 9))
    names = tuple(f"s{i}" for i in range(n))
    order = rng.permutation(n)
    edges: dict[tuple[str, str], float] = {}

    def slow() -> float:
        return float(base ** rng.uniform(-6.0, -3.0))

    for i in range(n):
        edges[(names[order[i]], names[order[(i + 1) % n]])] = slow()
    for _ in range(int(rng.integers(0, n + 1))):
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges.setdefault((names[i], names[j]), slow())

    k_clusters = 2 if n >= 6 and rng.integers(0, 2) else 1
    chosen = rng.choice(n, size=2 * k_clusters, replace=False)
    clusters = []
    for c in range(k_clusters):
        a, b = names[chosen[2 * c]], names[chosen[2 * c + 1]]
        edges[(a, b)] = float(base ** rng.uniform(-1.0, 0.0))
        edges[(b, a)] = float(base ** rng.uniform(-1.0, 0.0))
        clusters.append((a, b))

    clustered = {v for c in clusters for v in c}
    outside = [v for v in names if v not in clustered]
    grower = outside[int(rng.integers(0, len(outside)))]
    kappa = float(base ** rng.uniform(-5.0, -4.0))

    lines = [f"base {base:g}", "species " + " ".join(names)]
    for (src, dst), k in sorted(edges.items()):
        lines.append(f"reaction {src} -> {dst} rate {k!r}")
    bare = "\n".join(lines)
    grown = bare + f"\nreaction {grower} -> {grower} + {grower} rate {kappa!r}"
    return (
        nw.split(nw.parse_network(grown)),
        nw.split(nw.parse_network(bare)),
        clusters,
    )


def test_10_renormalized_generator_fidelity():
    """Averaging fast clusters preserves the growth rate's decade and
    conservation of the doubling-free copy."""
    worst_dev = 0.0
    worst_colsum = 0.0
    for seed in range(20):
        rng = np.random.default_rng(5000 + seed)
        g, bare, clusters = _cluster_config(rng)
        lam = _perron(g).lambda_star
        lam_ren = oc.perron(nr.renormalized_generator(g, clusters, 0.0)).lambda_star
        worst_dev = max(worst_dev, abs(math.log10(lam) - math.log10(lam_ren)))
        M0 = nr.renormalized_generator(bare, clusters, 0.0).matrix
        colsum = float(np.max(np.abs(M0.sum(axis=0))))
        worst_colsum = max(
            worst_colsum, colsum / max(1.0, float(np.max(np.abs(M0))))
        )
    ok = worst_dev <= 1.0 and worst_colsum <= 1e-12
    detail = (
        f"20 configs: max |dlog10 lambda*| {worst_dev:.3f} (limit 1.0); "
        f"max conservative column sum {worst_colsum:.2e} (limit 1e-12)"
    )
    msg = _line(10, "renormalized-generator fidelity", ok, detail)
    assert ok, msg
