"""Exact numerical reference computations.

Everything here works on dense matrices built from a SplitGraph and is
meant as ground truth for the order-of-magnitude machinery: Perron
eigendata, stationary measures, resolvents and their path-sum
expansions, excursion weights, exit probabilities, Green kernels,
Doeblin contraction coefficients, the a-priori eigenvalue sandwich and
the first-order eigenvalue formula.  All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .network import (
    GeneratorMatrix,
    SplitGraph,
    WeightMatrix,
    deficiency_weights,
    generator,
    weights,
)


class NonConvergenceError(RuntimeError):
    """Iterative scheme failed to converge; carries the last residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class ReducibilityError(ValueError):
    """Input matrix/chain is not irreducible where irreducibility is required."""


@dataclass(frozen=True)
class OracleResult:
    """Perron eigendata of an adjoint generator.

    Normalizations: Σ v*_σ = 1 and Σ π*_σ = 1; v†* is scaled so that
    ⟨v†*, π*⟩ = 1, which makes the asymptotic Green-kernel factorization
    G_N(σ,σ')/N → v†*_σ π*_σ' hold without extra constants.
    """

    lambda_star: float
    v_star: np.ndarray
    v_dagger_star: np.ndarray
    pi_star: np.ndarray
    species: tuple[str, ...]
    iterations: int
    residual: float


class ExcursionWeight(NamedTuple):
    value: float
    divergent: bool


class DoeblinAverage(NamedTuple):
    rho_star: float
    period: int
    q: int


class FirstOrder(NamedTuple):
    lambda1: float
    tau: float
    eps_bar: float
    z0: float


@dataclass(frozen=True)
class AprioriRow:
    sigma: str
    alpha_thr_lower: float
    alpha_thr_upper: float
    x_lower: float
    y2_lower: float
    x_upper: float
    y2_upper: float


@dataclass(frozen=True)
class AprioriBounds:
    """Sandwich lower ≤ λ* ≤ upper; upper = inf means not informative."""

    lower: float
    upper: float
    m: float
    M: float
    d: float
    D: float
    per_sigma: tuple[AprioriRow, ...]


def _dominant_projector(matrix: np.ndarray, tol_rel: float, max_squarings: int):
    """Iterate B ← B²/max(B²) starting from the shifted nonnegative
    matrix M = A + cI.  The limit is (proportional to) the spectral
    projector v*⊗v†, reached after ~log2 of the inverse spectral gap
    squarings — unlike plain per-step power iteration the scheme cannot
    stall on near-degenerate gaps.  Returns (B, c, squarings, delta)."""
    n = matrix.shape[0]
    c = 1.0 + float(np.max(np.abs(np.diag(matrix))))
    B = matrix + c * np.eye(n)
    B = B / np.max(B)
    delta = math.inf
    for j in range(1, max_squarings + 1):
        B2 = B @ B
        top = np.max(B2)
        if top <= 0.0:
            raise ReducibilityError("matrix power collapsed to zero")
        B2 = B2 / top
        delta = float(np.max(np.abs(B2 - B)))
        B = B2
        if delta <= tol_rel:
            return B, c, j, delta
    return B, c, max_squarings, delta


def perron(
    A: GeneratorMatrix,
    tol_rel: float = 1e-12,
    max_iter: int = 10_000_000,
) -> OracleResult:
    """Rightmost eigenvalue and eigenvectors of a Perron-Frobenius
    generator (off-diagonal ≥ 0).

    Power iteration on M = A + cI, c = 1 + max|A_σσ|, implemented by
    repeated squaring with renormalization; ``iterations`` counts
    squarings (effective matrix power 2^iterations, capped by max_iter).
    λ* is evaluated as the Rayleigh quotient ⟨v†, A v*⟩/⟨v†, v*⟩ on the
    original A, avoiding the λ*+c−c cancellation.
    """
    mat = np.asarray(A.matrix, dtype=float)
    n = mat.shape[0]
    if n == 0:
        raise ValueError("empty generator")
    # One squaring doubles the effective power, so even modest caps reach
    # astronomically long horizons; the floor of 60 (effective power 2^60)
    # is what near-degenerate spectral gaps around 1e-16 actually need.
    max_squarings = min(200, max(60, int(math.log2(max_iter)) + 1))
    B, _, its, delta = _dominant_projector(mat, tol_rel, max_squarings)

    v = B @ np.ones(n)
    u = B.T @ np.ones(n)
    if v.sum() <= 0.0 or u.sum() <= 0.0:
        raise ReducibilityError("projector has no positive column/row mass")
    v = v / v.sum()

    denom = float(u @ v)
    if denom <= 0.0:
        raise ReducibilityError(
            "left/right eigenvector supports do not overlap (reducible input)"
        )
    lam = float(u @ (mat @ v)) / denom

    residual = float(np.max(np.abs(mat @ v - lam * v)))
    scale = float(np.max(np.abs(mat))) or 1.0
    if delta > tol_rel:
        raise NonConvergenceError(
            f"perron did not converge after {its} squarings "
            f"(residual {residual:.3e})",
            residual,
        )
    # Genuinely absent support underflows to exact zero under repeated
    # squaring, while stiff-but-positive entries merely become small
    # (rate separations of 16 decades give v ratios near 1e-18), so the
    # cut sits far below anything a connected network can produce.
    if np.min(v) <= 1e-100 * np.max(v):
        raise ReducibilityError(
            "right eigenvector has zero entries: input not irreducible"
        )
    if residual > 1e3 * tol_rel * scale:
        raise NonConvergenceError(
            f"perron eigenvector residual {residual:.3e} exceeds tolerance",
            residual,
        )

    pi = (np.abs(np.diag(mat)) + lam) * v
    if pi.sum() <= 0.0:
        raise ReducibilityError("degenerate Lyapunov weights")
    pi = pi / pi.sum()
    u = u / float(u @ pi)

    return OracleResult(
        lambda_star=lam,
        v_star=v,
        v_dagger_star=u,
        pi_star=pi,
        species=A.species,
        iterations=its,
        residual=residual,
    )


def rightmost_eigenvalue(matrix: np.ndarray, tol_rel: float = 1e-12) -> float:
    """Rightmost eigenvalue of a matrix with nonnegative off-diagonals,
    tolerating reducible inputs (no positivity demands on eigenvectors).
    Used for cut-off graphs, which routinely contain dangling targets."""
    mat = np.asarray(matrix, dtype=float)
    n = mat.shape[0]
    if n == 1:
        return float(mat[0, 0])
    B, c, _, _ = _dominant_projector(mat, tol_rel, 200)
    v = B @ np.ones(n)
    u = B.T @ np.ones(n)
    denom = float(u @ v)
    if denom > 1e-200 * float(v.sum() * u.sum() + 1.0):
        return float(u @ (mat @ v)) / denom
    # Disjoint supports (multiple dominant blocks): fall back on the
    # Collatz-Wielandt ratio over the support of v.
    Mv = (mat + c * np.eye(n)) @ v
    mask = v > 1e-12 * np.max(v)
    return float(np.max(Mv[mask] / v[mask])) - c


def stationary(Wt: WeightMatrix | np.ndarray) -> np.ndarray:
    """Stationary distribution π of a row-stochastic chain: π P = π,
    Σπ = 1, by a dense solve with one balance equation replaced by the
    normalization."""
    P = Wt.matrix if isinstance(Wt, WeightMatrix) else np.asarray(Wt, dtype=float)
    n = P.shape[0]
    rows = P.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-9:
        raise ValueError("chain is not row-stochastic")
    C = P.T - np.eye(n)
    C[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(C, rhs)
    except np.linalg.LinAlgError:
        raise ReducibilityError("singular balance system: chain not irreducible")
    if np.min(pi) < -1e-9:
        raise ReducibilityError("negative stationary mass: chain not irreducible")
    pi = np.clip(pi, 0.0, None)
    resid = float(np.max(np.abs(pi @ P - pi)))
    if resid > 1e-8:
        raise ReducibilityError(f"balance residual {resid:.3e}: chain not irreducible")
    return pi / pi.sum()


def resolvent(A: GeneratorMatrix, alpha: float) -> np.ndarray:
    """(αId − A)⁻¹.  Entrywise nonnegativity certifies α > λ*; a
    singular or negative-entry result raises."""
    mat = np.asarray(A.matrix, dtype=float)
    n = mat.shape[0]
    try:
        S = np.linalg.solve(alpha * np.eye(n) - mat, np.eye(n))
    except np.linalg.LinAlgError:
        raise ValueError("alpha at or below the Lyapunov threshold (singular)")
    if np.min(S) < -1e-9 * max(1.0, float(np.max(np.abs(S)))):
        raise ValueError("alpha below the Lyapunov threshold (negative entries)")
    return S


def path_sum_resolvent(g: SplitGraph, alpha: float, max_len: int) -> np.ndarray:
    """Truncated path expansion of the resolvent: entry [σ', σ] sums
    w(α)_γ/(|A_σ'σ'|+α) over paths γ: σ→σ' with at most max_len edges.
    Monotone nondecreasing in max_len; converges to resolvent(A, α)
    whenever α > λ*."""
    W = weights(g, alpha, "w").matrix
    n = W.shape[0]
    Amat = generator(g, 0.0, "A").matrix
    denom = np.abs(np.diag(Amat)) + alpha
    acc = np.eye(n)
    P = np.eye(n)
    for _ in range(max_len):
        P = P @ W
        acc = acc + P
    return (acc / denom[None, :]).T


def _spectral_radius(P: np.ndarray, tol: float = 1e-10, max_iter: int = 200_000) -> float:
    """Spectral radius of a nonnegative matrix by shifted power
    iteration (the shift breaks periodicity)."""
    n = P.shape[0]
    if n == 0:
        return 0.0
    shift = 1e-3
    x = np.ones(n) / n
    prev = 0.0
    for _ in range(max_iter):
        y = P @ x + shift * x
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return 0.0
        x = y / norm
        if abs(norm - prev) <= tol * max(norm, 1.0):
            return norm - shift
        prev = norm
    return prev - shift


def excursion_weight(g: SplitGraph, alpha: float, sigma: str) -> ExcursionWeight:
    """Total weight Φ(α)_σ of first-return excursions σ→σ.

    Solves the first-step system on the graph with σ absorbing;
    declares divergence when the absorbed chain's iteration matrix has
    spectral radius ≥ 1 (or the solve turns up negative weights, a
    belt-and-braces sign check)."""
    W = weights(g, alpha, "w").matrix
    idx = g.species.index(sigma)
    others = [i for i in range(len(g.species)) if i != idx]
    if not others:
        return ExcursionWeight(0.0, False)
    Wsub = W[np.ix_(others, others)]
    if _spectral_radius(Wsub) >= 1.0 - 1e-10:
        return ExcursionWeight(math.inf, True)
    b = W[others, idx]
    f = np.linalg.solve(np.eye(len(others)) - Wsub, b)
    if np.min(f) < -1e-12:
        return ExcursionWeight(math.inf, True)
    phi = float(W[idx, others] @ f)
    return ExcursionWeight(phi, False)


def exit_probabilities(
    g: SplitGraph, internal, alpha: float, target: str
) -> dict[str, float]:
    """Exit weights f^σ(target): solve (−Id + W(α)) f = 0 on the
    internal set with boundary values δ_target."""
    internal = list(internal)
    if target in internal:
        raise ValueError("target must be external")
    W = weights(g, alpha, "w").matrix
    index = {s: i for i, s in enumerate(g.species)}
    ii = [index[s] for s in internal]
    t = index[target]
    M = np.eye(len(ii)) - W[np.ix_(ii, ii)]
    b = W[ii, t]
    try:
        f = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        raise ValueError("alpha at or below the internal Lyapunov threshold")
    return dict(zip(internal, f.tolist()))


def adjoint_boundary_solve(
    g: SplitGraph, internal, alpha: float, source: str
) -> dict[str, float]:
    """Solve A(α) v = 0 on the internal set with boundary value 1 at
    the source vertex and 0 at every other external vertex."""
    internal = list(internal)
    if source in internal:
        raise ValueError("source must be external")
    Amat = generator(g, alpha, "A").matrix
    index = {s: i for i, s in enumerate(g.species)}
    ii = [index[s] for s in internal]
    s = index[source]
    M = Amat[np.ix_(ii, ii)]
    b = -Amat[ii, s]
    try:
        v = np.linalg.solve(M, b)
    except np.linalg.LinAlgError:
        raise ValueError("singular interior system")
    return dict(zip(internal, v.tolist()))


@dataclass(frozen=True)
class GreenTable:
    """Truncated Green kernel rows G_N(σ,·) = Σ_{ℓ<N} (W^ℓ)_{σ,·} at a
    set of horizons.  Entries are mantissa × 10^exponent; the exponent
    stays 0 unless the running values left the representable range."""

    source: str
    species: tuple[str, ...]
    horizons: tuple[int, ...]
    rows: tuple[np.ndarray, ...]
    exponents: tuple[int, ...]

    def row(self, N: int) -> np.ndarray:
        i = self.horizons.index(N)
        return self.rows[i] * (10.0 ** self.exponents[i])

    def normalized_row(self, N: int) -> np.ndarray:
        return self.row(N) / N


def green_kernel(W: WeightMatrix, sigma: str, N: int, checkpoints=()) -> GreenTable:
    """Accumulate G_N(σ,·) by row-vector iteration, recording the row
    at each checkpoint horizon and at N.  When entries outgrow 1e250
    both the running row and the accumulator are rescaled and the shift
    is tracked as a decimal exponent."""
    if N < 1:
        raise ValueError("N must be ≥ 1")
    P = W.matrix
    n = P.shape[0]
    idx = W.species.index(sigma)
    horizons = sorted(set(int(h) for h in checkpoints) | {N})
    if horizons[0] < 1 or horizons[-1] > N:
        raise ValueError("checkpoints must lie in [1, N]")
    u = np.zeros(n)
    u[idx] = 1.0
    G = np.zeros(n)
    exponent = 0
    rows, exps = [], []
    want = set(horizons)
    for ell in range(N):
        G = G + u
        if ell + 1 in want:
            rows.append(G.copy())
            exps.append(exponent)
        if ell + 1 < N:
            u = u @ P
            peak = max(float(np.max(u)), float(np.max(G)))
            if peak > 1e250:
                u *= 1e-250
                G *= 1e-250
                exponent += 250
    return GreenTable(sigma, W.species, tuple(horizons), tuple(rows), tuple(exps))


def apriori_bounds(g: SplitGraph) -> AprioriBounds:
    """Double inequality max_σ* α_thr(m|σ*) ≤ λ* ≤ min_σ* α_thr(M|σ*)
    for a strongly connected graph.

    m/M are the extreme conservative diagonals |Ã_σσ| = k_σ.  The
    surplus ratios use the diagonal that keeps each side of the
    sandwich conservative: d = min_σ (κ_σ−β_σ)/|Ã_σσ| for the lower
    branch and D = max_σ (κ_σ−β_σ)/|A_σσ| for the upper (degradation
    plays the role of outflow to the exterior here, the whole graph
    being internal).  Each candidate vertex σ* contributes
    α_thr(μ|σ*) = (−x+√(x²+y²))/2 with x = |A_σ*σ*|+μ and
    y² = 4μ(d_or_D·k_σ* + κ_σ* − β_σ*).  A negative y² clamps the
    lower candidate to 0; upper candidates are only informative at
    vertices with positive surplus κ_σ* − β_σ* (elsewhere +inf)."""
    species = g.species
    k = np.array([g.total_rate(s) for s in species])
    kap = np.array([g.kappa(s) for s in species])
    bet = np.array([g.beta(s) for s in species])
    if np.min(k) <= 0.0:
        raise ValueError("apriori bounds need a strongly connected graph (k_σ > 0)")
    a_abs = np.abs(k + bet - kap)
    if np.min(a_abs) <= 0.0:
        raise ValueError("vanishing |A_σσ| leaves d/D undefined")
    m, M = float(np.min(k)), float(np.max(k))
    surplus = kap - bet
    d = float(np.min(surplus / k))
    D = float(np.max(surplus / a_abs))

    def thr(x: float, y2: float) -> float:
        return 0.5 * (-x + math.sqrt(x * x + y2))

    per = []
    for i, s in enumerate(species):
        x_m = float(a_abs[i] + m)
        y2_m = float(4.0 * m * (d * k[i] + surplus[i]))
        lo = 0.0 if y2_m < 0.0 else thr(x_m, y2_m)
        x_M = float(a_abs[i] + M)
        y2_M = float(4.0 * M * (D * k[i] + surplus[i]))
        if surplus[i] <= 0.0 or y2_M < 0.0:
            up = math.inf
        else:
            up = thr(x_M, y2_M)
        per.append(AprioriRow(s, lo, up, x_m, y2_m, x_M, y2_M))

    lower = max(row.alpha_thr_lower for row in per)
    upper = min(row.alpha_thr_upper for row in per)
    return AprioriBounds(lower, upper, m, M, d, D, tuple(per))


def _chain_period(P: np.ndarray) -> int:
    """Period of the chain's reachable class from state 0: gcd of
    (level_u + 1 − level_v) over edges u→v in a BFS layering."""
    n = P.shape[0]
    level = {0: 0}
    queue = [0]
    while queue:
        u = queue.pop(0)
        for v in np.nonzero(P[u] > 0.0)[0]:
            v = int(v)
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
    gcd = 0
    for u in level:
        for v in np.nonzero(P[u] > 0.0)[0]:
            v = int(v)
            if v in level:
                gcd = math.gcd(gcd, level[u] + 1 - level[v])
    return gcd if gcd > 0 else 1


def doeblin_rho(Wt: WeightMatrix | np.ndarray, average: bool = False):
    """Doeblin minorization coefficient ρ = Σ_σ' min_σ w̃_{σ→σ'}.

    With ``average`` set, the chain is first replaced by
    ((1/p) Σ_{θ≤p} W̃^θ)^q where p is the chain period and q ≤ n is
    minimal with all entries positive; returns (ρ*, p, q)."""
    P = Wt.matrix if isinstance(Wt, WeightMatrix) else np.asarray(Wt, dtype=float)
    n = P.shape[0]
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-9 or np.min(P) < 0.0:
        raise ValueError("input is not row-stochastic")
    if not average:
        return float(P.min(axis=0).sum())
    p = _chain_period(P)
    acc = np.zeros_like(P)
    power = np.eye(n)
    for _ in range(p):
        power = power @ P
        acc += power
    W_av = acc / p
    Q = W_av.copy()
    q = 1
    while q < n and not np.all(Q > 0.0):
        Q = Q @ W_av
        q += 1
    rho_star = float(Q.min(axis=0).sum())
    return DoeblinAverage(rho_star, p, q)


def first_order_lambda(g: SplitGraph, internal) -> FirstOrder:
    """First-order eigenvalue estimate λ₁ = (ε̄_G − Z(0)_G)/τ_G for an
    irreducible internal subgraph, from the stationary measure π̃ of the
    internal skeleton chain."""
    internal = list(internal)
    index = {s: i for i, s in enumerate(internal)}
    n = len(internal)
    K_int = np.zeros((n, n))
    for (src, dst), rate in g.edge_rates.items():
        if src in index and dst in index:
            K_int[index[src], index[dst]] = rate
    k_int = K_int.sum(axis=1)
    if np.min(k_int) <= 0.0:
        raise ReducibilityError("internal subgraph has a vertex without internal outflow")
    pi = stationary(K_int / k_int[:, None])
    k_full = np.array([g.total_rate(s) for s in internal])
    k_ext = k_full - k_int + np.array([g.beta(s) for s in internal])
    eps = deficiency_weights(g, 0.0)
    eps_vec = np.array([eps[s] for s in internal])
    tau = float(np.sum(pi / k_full))
    eps_bar = float(np.sum(pi * eps_vec))
    z0 = float(np.sum(pi * k_ext / k_full))
    return FirstOrder((eps_bar - z0) / tau, tau, eps_bar, z0)
