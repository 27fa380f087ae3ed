"""Command-line surface: analyze, oracle, compare, sweep.

All output is deterministic (fixed ordering and formatting) so the
reports and CSV files diff cleanly across runs.  Exit codes: 0 success,
1 parse/input errors, 2 resonance flagged by analyze, 3 oracle
non-convergence, 4 compare deviation above threshold.
"""

from __future__ import annotations

import dataclasses
import math
import sys

import click

from . import hierarchy as hi
from . import network as nw
from . import oracle as oc
from . import renorm as rn
from .network import NEG_INF

_BRANCHES = {"auto": "assume-autocatalytic", "free": "assume-free"}


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(path: str) -> nw.ReactionNetwork:
    try:
        return nw.load_network(path)
    except OSError as exc:
        _fail(str(exc), 1)
    except nw.NetworkError as exc:
        _fail(str(exc), 1)


def _default_sigma0(net: nw.ReactionNetwork, sigma0: str | None) -> str:
    return sigma0 if sigma0 is not None else net.species[0]


def _restricted(g: nw.SplitGraph, sigma0: str) -> nw.SplitGraph:
    # σ0-accessibility is forward-closed, so the restriction drops no
    # outgoing rate of any kept vertex.
    keep = hi.restrict_accessible(g, sigma0)
    return g.restrict(keep)


def _fmt_scale(x: float) -> str:
    if x == NEG_INF:
        return "-inf"
    return str(int(x))


def _neg_log(value: float, base: float) -> str:
    if value <= 0.0:
        return "neg"
    return f"{-math.log(value) / math.log(base):.3f}"


@click.group()
@click.version_option(package_name="renormnet")
def main() -> None:
    """Scale-resolved analysis of split/degradation reaction networks."""


@main.command()
@click.argument("file", type=click.Path())
@click.option("--sigma0", default=None, help="Source species (default: first declared).")
@click.option(
    "--mode",
    type=click.Choice(["scale", "weighted"]),
    default="scale",
    show_default=True,
    help="Cluster statistics flavor.",
)
@click.option("--tol", default=1, show_default=True, help="Scale-comparison tolerance.")
@click.option(
    "--resonance-branch",
    type=click.Choice(sorted(_BRANCHES)),
    default="auto",
    show_default=True,
    help="How ambiguous (resonant) clusters are resolved.",
)
def analyze(file: str, sigma0: str | None, mode: str, tol: int, resonance_branch: str) -> None:
    """Renormalize FILE and print the coalescence tree and hierarchical
    estimates.  Exits 2 when a resonance flag is raised (the analysis is
    still printed in full)."""
    net = _load(file)
    g = nw.split(net)
    sigma0 = _default_sigma0(net, sigma0)
    try:
        tree = rn.renormalize(g, tol=tol, mode=mode, resonance_branch=_BRANCHES[resonance_branch])
        est = hi.hier_estimates(tree, sigma0)
    except (ValueError, nw.NetworkError) as exc:
        _fail(str(exc), 1)

    click.echo(
        f"network: {len(net.species)} species, {len(net.reactions)} reactions, "
        f"base {net.base_b:g}"
    )
    click.echo("coalescence tree (id, members, step, n, tau_inv, eps, z0, regime, lam):")
    for line in rn.export_tree(tree).splitlines():
        click.echo("  " + line)
    cuts = ", ".join(_fmt_scale(s) for s in tree.cut_scales) or "none"
    click.echo(f"cut scales: {cuts}")
    cem = ", ".join(n.id for n in tree.nodes.values() if n.cemetery) or "none"
    click.echo(f"cemetery vertices: {cem}")

    cs = est.cores
    click.echo()
    click.echo(f"source: {sigma0}")
    click.echo("accessible: " + ", ".join(cs.accessible))
    click.echo("sccs:")
    if not cs.sccs:
        click.echo("  none")
    for c in cs.sccs:
        click.echo(
            f"  {c.id}: members {'+'.join(c.members)}, regime {c.regime}, "
            f"alpha {_fmt_scale(c.alpha_scale)}"
        )
    click.echo(
        f"cores: {', '.join(cs.cores) or 'none'}  "
        f"(threshold scale {_fmt_scale(cs.threshold_scale)})"
    )
    click.echo()
    click.echo(f"lambda scale: {est.lambda_scale}")
    click.echo("estimates (log_b):")
    click.echo(f"  {'species':<10s} {'pi':>6s} {'vdagger':>8s} {'v':>6s}")
    for s in (sp for sp in net.species if sp in est.pi_log):
        click.echo(
            f"  {s:<10s} {_fmt_scale(est.pi_log[s]):>6s} "
            f"{_fmt_scale(est.vdagger_log[s]):>8s} {_fmt_scale(est.v_log[s]):>6s}"
        )
    click.echo(f"flags: {', '.join(est.flags) or 'none'}")

    if "resonance" in est.flags:
        sys.exit(2)


@main.command("oracle")
@click.argument("file", type=click.Path())
@click.option("--sigma0", default=None, help="Source species (default: first declared).")
@click.option("--green", default=0, show_default=True, help="Green-kernel horizon N (0: skip).")
def oracle_cmd(file: str, sigma0: str | None, green: int) -> None:
    """Run the numerically exact pipeline on the σ0-accessible part of
    FILE: Perron eigendata, a priori bounds, optional Green kernel."""
    net = _load(file)
    sigma0 = _default_sigma0(net, sigma0)
    try:
        g = _restricted(nw.split(net), sigma0)
        A = nw.generator(g, 0.0, "A")
        res = oc.perron(A)
    except oc.NonConvergenceError as exc:
        _fail(str(exc), 3)
    except (ValueError, nw.NetworkError) as exc:
        _fail(str(exc), 1)

    b = net.base_b
    click.echo(f"lambda* = {res.lambda_star:.12e}   (-log_b = {_neg_log(res.lambda_star, b)})")
    click.echo(f"squarings = {res.iterations}   residual = {res.residual:.3e}")
    click.echo(f"  {'species':<10s} {'v*':>13s} {'vdagger*':>13s} {'pi*':>13s}")
    for i, s in enumerate(res.species):
        click.echo(
            f"  {s:<10s} {res.v_star[i]:>13.6e} {res.v_dagger_star[i]:>13.6e} "
            f"{res.pi_star[i]:>13.6e}"
        )

    try:
        bounds = oc.apriori_bounds(g)
    except ValueError as exc:
        click.echo(f"apriori: not applicable ({exc})")
    else:
        upper = "inf" if math.isinf(bounds.upper) else f"{bounds.upper:.6e}"
        click.echo(f"apriori: lower = {bounds.lower:.6e}   upper = {upper}")

    if green > 0:
        W = nw.weights(g, max(res.lambda_star, 0.0), "w")
        table = oc.green_kernel(W, sigma0, green)
        row = table.normalized_row(green)
        click.echo(f"green kernel row from {sigma0} at N = {green} (G_N/N):")
        for i, s in enumerate(res.species):
            click.echo(f"  {s:<10s} {row[i]:>13.6e}")


@main.command("compare")
@click.argument("file", type=click.Path())
@click.option("--sigma0", default=None, help="Source species (default: first declared).")
@click.option(
    "--max-dev",
    default=2.0,
    show_default=True,
    help="Largest acceptable |delta log_b|; exceeded -> exit 4.",
)
def compare_cmd(file: str, sigma0: str | None, max_dev: float) -> None:
    """Run both pipelines on FILE and print the per-quantity deviation
    table."""
    net = _load(file)
    sigma0 = _default_sigma0(net, sigma0)
    g = nw.split(net)
    try:
        tree = rn.renormalize(g)
        est = hi.hier_estimates(tree, sigma0)
        res = oc.perron(nw.generator(_restricted(g, sigma0), 0.0, "A"))
    except oc.NonConvergenceError as exc:
        _fail(str(exc), 3)
    except (ValueError, nw.NetworkError) as exc:
        _fail(str(exc), 1)

    report = hi.compare(est, res)
    click.echo(f"  {'quantity':<14s} {'hier':>8s} {'oracle':>13s} {'|dev|':>8s}")
    for row in report.rows:
        hier = row.hier if isinstance(row.hier, str) else _fmt_scale(row.hier)
        dev = "n/a" if row.deviation is None else f"{row.deviation:.3f}"
        click.echo(f"  {row.quantity:<14s} {hier:>8s} {row.oracle:>13.6e} {dev:>8s}")
    click.echo(f"max deviation: {report.max_deviation:.3f}")
    if est.flags:
        click.echo(f"flags: {', '.join(est.flags)}")
    if report.max_deviation > max_dev:
        sys.exit(4)


def _quantity_value(
    q: str,
    est: hi.HierEstimate,
    res: oc.OracleResult | None,
    base: float,
) -> str:
    if q == "lambda_hier":
        if isinstance(est.lambda_scale, str):
            return "neg"
        return str(int(-est.lambda_scale))
    if q == "lambda_oracle":
        return _neg_log(res.lambda_star, base)
    if q.startswith("pi_log:"):
        v = est.pi_log.get(q[7:], NEG_INF)
        return "inf" if v == NEG_INF else str(int(-v))
    if q.startswith("vdagger_log:"):
        v = est.vdagger_log.get(q[12:], NEG_INF)
        return "inf" if v == NEG_INF else str(int(-v))
    if q.startswith("pi_oracle_log:"):
        s = q[14:]
        if s not in res.species:
            return "inf"
        return _neg_log(float(res.pi_star[res.species.index(s)]), base)
    if q.startswith("ratio:"):
        try:
            top, bottom = q[6:].split("/", 1)
        except ValueError:
            raise click.BadParameter(f"malformed ratio quantity {q!r}")
        pt = float(res.pi_star[res.species.index(top)])
        pb = float(res.pi_star[res.species.index(bottom)])
        if pt <= 0.0 or pb <= 0.0:
            return "neg"
        return f"{-math.log(pt / pb) / math.log(base):.3f}"
    raise click.BadParameter(f"unknown quantity {q!r}")


_ORACLE_PREFIXES = ("lambda_oracle", "pi_oracle_log:", "ratio:")


@main.command()
@click.argument("file", type=click.Path())
@click.option("--reaction", required=True, type=int, help="Swept reaction (file order, 0-based).")
@click.option("--from", "from_scale", required=True, type=int, help="First scale value.")
@click.option("--to", "to_scale", required=True, type=int, help="Last scale value (inclusive).")
@click.option("--step", default=1, show_default=True, help="Scale increment.")
@click.option(
    "--quantities",
    required=True,
    help="Comma-separated output columns (lambda_hier, lambda_oracle, "
    "pi_log:S, pi_oracle_log:S, vdagger_log:S, ratio:S/T).",
)
@click.option("--sigma0", default=None, help="Source species (default: first declared).")
@click.option("--out", required=True, type=click.Path(), help="CSV output path.")
def sweep(
    file: str,
    reaction: int,
    from_scale: int,
    to_scale: int,
    step: int,
    quantities: str,
    sigma0: str | None,
    out: str,
) -> None:
    """Sweep one reaction's scale and record -log_b quantities per
    point.  Only the targeted reaction changes; the network is rebuilt
    for every point."""
    net = _load(file)
    sigma0 = _default_sigma0(net, sigma0)
    if not 0 <= reaction < len(net.reactions):
        _fail(f"unknown target reaction {reaction}", 1)
    if from_scale > to_scale:
        _fail("--from must not exceed --to", 1)
    if step < 1:
        _fail("--step must be >= 1", 1)

    wanted = [q for q in (part.strip() for part in quantities.split(",")) if q]
    needs_oracle = any(q.startswith(_ORACLE_PREFIXES) for q in wanted)

    lines = ["param_scale," + ",".join(wanted + ["resonance"])]
    points = range(from_scale, to_scale + 1, step) if wanted else range(0)
    for s in points:
        target = net.reactions[reaction]
        swapped = dataclasses.replace(target, rate=float(net.base_b) ** s)
        point = nw.ReactionNetwork(
            net.species,
            net.reactions[:reaction] + (swapped,) + net.reactions[reaction + 1 :],
            net.base_b,
        )
        g = nw.split(point)
        try:
            tree = rn.renormalize(g)
            est = hi.hier_estimates(tree, sigma0)
            res = (
                oc.perron(nw.generator(_restricted(g, sigma0), 0.0, "A"))
                if needs_oracle
                else None
            )
            cells = [_quantity_value(q, est, res, net.base_b) for q in wanted]
        except oc.NonConvergenceError as exc:
            _fail(str(exc), 3)
        except (ValueError, nw.NetworkError) as exc:
            _fail(str(exc), 1)
        flag = "1" if "resonance" in est.flags else "0"
        lines.append(f"{s}," + ",".join(cells + [flag]))

    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    click.echo(f"wrote {len(lines) - 1} rows to {out}")


if __name__ == "__main__":
    main()
