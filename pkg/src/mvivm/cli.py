"""Command line entry point: ``mvivm analyze|run|bench|verify``.

Exit codes: 0 success, 1 verification mismatch, 2 bad input.
"""
from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .harness import ENGINES, KINDS, Runner, gen_stream, measure, verify
from .query import Query, QueryError, parse_query, parse_stream
from .width import fhtw, is_acyclic, is_hierarchical, multivariate_extension, rho_star

EXIT_DIFF = 1
EXIT_INPUT = 2


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(EXIT_INPUT)


def _load_query(path: str) -> Query:
    try:
        return parse_query(Path(path).read_text())
    except OSError as exc:
        _fail(str(exc))
    except QueryError as exc:
        _fail(f"{path}: {exc}")


def _load_stream(path: str):
    try:
        with open(path) as fh:
            return parse_stream(fh)
    except OSError as exc:
        _fail(str(exc))
    except QueryError as exc:
        _fail(f"{path}: {exc}")


def _sizes(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip().lower()
        mult = 1
        if part.endswith("k"):
            part, mult = part[:-1], 1000
        elif part.endswith("m"):
            part, mult = part[:-1], 1_000_000
        try:
            out.append(int(float(part) * mult))
        except ValueError:
            raise click.BadParameter(f"bad size {part!r}") from None
    return out


@click.group()
@click.version_option(package_name="mvivm")
def main() -> None:
    """Incremental maintenance of conjunctive queries."""


def analysis(q: Query) -> dict:
    """Widths and decompositions of ``q`` as a JSON-ready dict."""
    rho, _ = rho_star(q)
    w, td = fhtw(q)
    ext = multivariate_extension(q)

    def bags(t):
        return [{"bag": list(t.bags[b]), "parent": t.parent[b]} for b in t.preorder()]

    return {
        "query": q.to_text(),
        "rho_star": str(rho),
        "fhtw": str(w),
        "acyclic": is_acyclic(q),
        "hierarchical": is_hierarchical(q),
        "w_hat": str(ext.w_hat),
        "bags": bags(td),
        "components": [
            {"perm": c.label, "schemas": [str(a) for a in c.query.atoms], "fhtw": str(c.width), "bags": bags(c.td)}
            for c in ext.components
        ],
    }


@main.command()
@click.argument("query_file", type=click.Path())
def analyze(query_file: str) -> None:
    """Print widths and decompositions of a query as JSON."""
    q = _load_query(query_file)
    try:
        report = analysis(q)
    except QueryError as exc:
        _fail(str(exc))
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.argument("query_file", type=click.Path())
@click.argument("stream_file", type=click.Path())
@click.option("--mode", type=click.Choice(["full", "delta"]), default="full", show_default=True)
@click.option("--engine", type=click.Choice(ENGINES), default="mvivm", show_default=True)
@click.option("--enumerate-every", "every", type=click.IntRange(min=0), default=1, show_default=True,
              help="Enumerate after every K-th update (0: only after the last one).")
@click.option("--lenient", is_flag=True, help="Skip duplicate inserts and deletes of absent tuples.")
def run(query_file: str, stream_file: str, mode: str, engine: str, every: int, lenient: bool) -> None:
    """Replay a JSON Lines stream and print results as JSON Lines."""
    q = _load_query(query_file)
    updates = _load_stream(stream_file)
    try:
        runner = Runner(engine, q, mode, lenient)
        for tau, u in enumerate(updates, 1):
            runner.apply(u)
            due = (every and tau % every == 0) or tau == len(updates)
            if not due:
                continue
            if mode == "full":
                rows = sorted(runner.full())
                click.echo(json.dumps({"tau": tau, "full": [list(x) for x in rows]}))
            else:
                rows = sorted(runner.delta())
                click.echo(json.dumps({"tau": tau, "delta": [[s, list(x)] for s, x in rows]}))
    except QueryError as exc:
        _fail(str(exc))
    if runner.skipped:
        click.echo(f"skipped {runner.skipped} illegal updates", err=True)


@main.command()
@click.argument("query_file", type=click.Path())
@click.option("--gen", "kind", type=click.Choice(KINDS), required=True)
@click.option("--sizes", default="1k,2k,4k,8k", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--engine", "engines", type=click.Choice(ENGINES), multiple=True, default=("mvivm",),
              show_default=True)
@click.option("--mode", type=click.Choice(["full", "delta"]), default="full", show_default=True)
@click.option("--repeats", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
def bench(query_file, kind, sizes, seed, engines, mode, repeats, csv_path) -> None:
    """Time engines on generated streams and fit log-log slopes."""
    q = _load_query(query_file)
    try:
        ns = _sizes(sizes)
    except click.BadParameter as exc:
        _fail(str(exc))
    out = []
    try:
        for eng in engines:
            rep = measure(eng, q, ns, kind, seed, repeats, mode)
            for r in rep.rows:
                out.append([q.name, eng, kind, r.n, seed, f"{r.total_ms:.3f}", f"{rep.slope:.4f}", f"{rep.r2:.4f}"])
            click.echo(f"{eng}: slope {rep.slope:.3f} (R² {rep.r2:.3f}) over N={ns}")
    except QueryError as exc:
        _fail(str(exc))
    header = ["query", "engine", "kind", "N", "seed", "total_ms", "slope", "r2"]
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(out)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(out)


@main.command(name="verify")
@click.argument("query_file", type=click.Path())
@click.argument("stream_file", type=click.Path())
def verify_cmd(query_file: str, stream_file: str) -> None:
    """Check every engine against naive recomputation on a stream."""
    q = _load_query(query_file)
    updates = _load_stream(stream_file)
    try:
        report = verify(q, updates)
    except QueryError as exc:
        _fail(str(exc))
    click.echo(report.summary())
    sys.exit(0 if report.ok else EXIT_DIFF)


if __name__ == "__main__":
    main()
