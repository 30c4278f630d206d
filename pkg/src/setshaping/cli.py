"""Command-line interface: ``setshaping <command> ...``.

Exit codes: 0 success, 2 when ``unshape`` receives a string outside the
shaped image, 1 for every other error. With ``--out``, a run manifest is
written next to the output as ``<out>.manifest.json``; the main output
itself carries no timestamps, so identical commands give identical bytes.
Set ``SETSHAPING_CACHE_DIR`` to reuse class tables between runs.
"""
from __future__ import annotations

import csv
import io
import json
import sys
import time
from pathlib import Path
from typing import Optional

import click
import numpy as np

from . import __version__
from .codec import compare_code_lengths, decode, encode
from .experiments import (
    DEFAULT_SEED,
    Channel,
    detection_experiment,
    exact_curves,
    run_table1,
    run_table2,
    sample_strings,
)
from .shaping import NotInImage, ShapingConfig, shape, unshape
from .source_model import Ensemble
from .typeclasses import EMPIRICAL, KEY_MODES, MODEL

TABLE_COLUMNS = ["alphabet", "K", "I_x", "I_y", "diff", "stderr_x", "stderr_y", "samples", "seed"]


def _common(f):
    f = click.option("--precision", default=3, show_default=True,
                     help="Decimals printed for bit quantities.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None,
                     help="Output format (command default if omitted).")(f)
    f = click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
                     help="Write output here instead of stdout.")(f)
    f = click.option("--seed", default=DEFAULT_SEED, show_default=True, help="RNG seed.")(f)
    return f


def _emit(rows: list[dict], columns: list[str], fmt: str, out: Optional[Path],
          manifest: dict, single: bool = False) -> None:
    if fmt == "json":
        text = json.dumps(rows[0] if single else rows, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    if out is None:
        click.echo(text, nl=False)
        return
    out.write_text(text)
    manifest = dict(manifest, tool_version=__version__)
    Path(f"{out}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")


def _manifest(ctx: click.Context, started: float) -> dict:
    return {
        "command": ctx.command_path,
        "parameters": {k: (str(v) if isinstance(v, Path) else v) for k, v in ctx.params.items()},
        "seed": ctx.params.get("seed"),
        "wall_time_s": round(time.perf_counter() - started, 3),
    }


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}f}"


def _parse_probs(text: Optional[str]) -> Optional[Ensemble]:
    if text is None:
        return None
    try:
        values = [float(v) for v in text.replace(" ", ",").split(",") if v]
        return Ensemble(values)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--probs")


def _parse_symbols(text: str, m: int, alphabet: Optional[str]) -> tuple[int, ...]:
    text = text.strip()
    if alphabet:
        if len(alphabet) != m:
            raise click.BadParameter(f"alphabet {alphabet!r} must have {m} characters")
        try:
            return tuple(alphabet.index(ch) for ch in text if not ch.isspace())
        except ValueError:
            raise click.BadParameter("input contains characters outside the alphabet")
    try:
        symbols = tuple(int(tok) for tok in text.replace(",", " ").split())
    except ValueError:
        raise click.BadParameter("symbols must be comma or space separated integers")
    bad = [s for s in symbols if not 0 <= s < m]
    if bad:
        raise click.BadParameter(f"symbols {bad} outside alphabet of size {m}")
    return symbols


def _format_symbols(symbols, alphabet: Optional[str]) -> str:
    if alphabet:
        return "".join(alphabet[s] for s in symbols)
    return ",".join(map(str, symbols))


@click.group()
@click.version_option(__version__)
def cli():
    """Set shaping transform, error detection and reference experiments."""


def _table_rows(reports, precision):
    return [{
        "alphabet": r.m, "K": r.K,
        "I_x": _fmt(r.I_x, precision), "I_y": _fmt(r.I_y, precision),
        "diff": _fmt(r.diff, precision),
        "stderr_x": _fmt(r.std_err_x, precision), "stderr_y": _fmt(r.std_err_y, precision),
        "samples": r.samples, "seed": r.seed,
    } for r in reports]


@cli.command()
@click.option("--samples", default=10**6, show_default=True)
@click.option("--N", "n", default=100, show_default=True)
@click.option("--workers", default=1, show_default=True)
@_common
@click.pass_context
def table1(ctx, samples, n, workers, seed, out, fmt, precision):
    """Average information before/after shaping, m in 2..5, K in {1,2}."""
    started = time.perf_counter()
    reports = run_table1(samples, seed, N=n, workers=workers)
    _emit(_table_rows(reports, precision), TABLE_COLUMNS, fmt or "csv", out,
          _manifest(ctx, started))


@cli.command()
@click.option("--samples", default=10**7, show_default=True)
@click.option("--N", "n", default=100, show_default=True)
@click.option("--workers", default=1, show_default=True)
@_common
@click.pass_context
def table2(ctx, samples, n, workers, seed, out, fmt, precision):
    """Average information before/after shaping, m=3, K in 1..5."""
    started = time.perf_counter()
    reports = run_table2(samples, seed, N=n, workers=workers)
    _emit(_table_rows(reports, precision), TABLE_COLUMNS, fmt or "csv", out,
          _manifest(ctx, started))


@cli.command()
@click.option("--probs", default=None, help="Symbol probabilities, e.g. 0.5,0.3,0.2 (model mode).")
@click.option("--m", "m", default=3, show_default=True)
@click.option("--N", "n", default=10, show_default=True)
@click.option("--Ks", "ks", default="1,2,3", show_default=True)
@click.option("--mode", type=click.Choice(KEY_MODES), default=EMPIRICAL, show_default=True)
@_common
@click.pass_context
def figure1(ctx, probs, m, n, ks, mode, seed, out, fmt, precision):
    """I(x_i) and I(y_i) for every index of the shaped order (exact enumeration)."""
    started = time.perf_counter()
    ensemble = _parse_probs(probs)
    if ensemble is not None:
        m = ensemble.m
    if mode == MODEL and ensemble is None:
        raise click.BadParameter("model mode needs --probs", param_hint="--probs")
    k_values = tuple(int(k) for k in ks.split(","))
    report = exact_curves(m, n, k_values, ensemble, mode)
    columns = ["index", "I_x"] + [f"I_y_K{k}" for k in k_values]
    ix = [_fmt(v, precision) for v in report.I_x]
    iys = {k: [_fmt(v, precision) for v in report.I_y[k]] for k in k_values}
    rows = []
    for i in range(len(ix)):
        row = {"index": i, "I_x": ix[i]}
        for k in k_values:
            row[f"I_y_K{k}"] = iys[k][i]
        rows.append(row)
    manifest = _manifest(ctx, started)
    manifest["probs"] = None if ensemble is None else [float(p) for p in ensemble.probs]
    _emit(rows, columns, fmt or "csv", out, manifest)


def _shaping_options(f):
    f = click.option("--alphabet", default=None, help="Map text characters to symbols, e.g. 'abc'.")(f)
    f = click.option("--probs", default=None, help="Ensemble for model mode.")(f)
    f = click.option("--mode", type=click.Choice(KEY_MODES), default=EMPIRICAL, show_default=True)(f)
    f = click.option("--K", "k", required=True, type=int)(f)
    f = click.option("--N", "n", required=True, type=int)(f)
    f = click.option("--m", "m", required=True, type=int)(f)
    f = click.option("--input", "input_file", type=click.Path(exists=True, dir_okay=False),
                     default=None, help="Read symbols from a file.")(f)
    f = click.argument("symbols", required=False)(f)
    return f


def _read_symbols(symbols, input_file, m, alphabet):
    if input_file is not None:
        symbols = Path(input_file).read_text()
    if symbols is None:
        raise click.UsageError("give symbols inline or with --input")
    return _parse_symbols(symbols, m, alphabet)


def _config(m, n, k, mode, probs) -> ShapingConfig:
    ensemble = _parse_probs(probs)
    try:
        return ShapingConfig(m, n, k, mode, ensemble)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _emit_symbols(inp, outp, fmt, out, alphabet, ctx, started):
    if (fmt or "csv") == "json":
        _emit([{"input": list(inp), "output": list(outp)}], [], "json", out,
              _manifest(ctx, started), single=True)
    elif out is None:
        click.echo(_format_symbols(outp, alphabet))
    else:
        out.write_text(_format_symbols(outp, alphabet) + "\n")
        Path(f"{out}.manifest.json").write_text(
            json.dumps(dict(_manifest(ctx, started), tool_version=__version__), indent=2) + "\n")


@cli.command("shape")
@_shaping_options
@_common
@click.pass_context
def shape_cmd(ctx, symbols, input_file, m, n, k, mode, probs, alphabet, seed, out, fmt, precision):
    """Map a length-N string to its shaped length-(N+K) string."""
    started = time.perf_counter()
    cfg = _config(m, n, k, mode, probs)
    x = _read_symbols(symbols, input_file, m, alphabet)
    if len(x) != n:
        raise click.UsageError(f"expected {n} symbols, got {len(x)}")
    _emit_symbols(x, shape(x, cfg), fmt, out, alphabet, ctx, started)


@cli.command("unshape")
@_shaping_options
@_common
@click.pass_context
def unshape_cmd(ctx, symbols, input_file, m, n, k, mode, probs, alphabet, seed, out, fmt, precision):
    """Invert shaping; exits with status 2 if the string is outside the image."""
    started = time.perf_counter()
    cfg = _config(m, n, k, mode, probs)
    y = _read_symbols(symbols, input_file, m, alphabet)
    if len(y) != n + k:
        raise click.UsageError(f"expected {n + k} symbols, got {len(y)}")
    try:
        x = unshape(y, cfg)
    except NotInImage as exc:
        click.echo(f"NotInImage: first infeasible position {exc.position}", err=True)
        sys.exit(2)
    _emit_symbols(y, x, fmt, out, alphabet, ctx, started)


@cli.command()
@click.option("--m", "m", default=3, show_default=True)
@click.option("--N", "n", default=100, show_default=True)
@click.option("--K", "k", default=2, show_default=True)
@click.option("--channel", default="single", show_default=True,
              help="'single' or 'symmetric:<epsilon>'.")
@click.option("--trials", default=1000, show_default=True)
@_common
@click.pass_context
def detect(ctx, m, n, k, channel, trials, seed, out, fmt, precision):
    """Corrupt shaped strings on a channel and measure how often the error is detected."""
    started = time.perf_counter()
    try:
        chan = Channel.parse(channel)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--channel")
    report = detection_experiment(ShapingConfig(m, n, k), trials, chan, seed)
    row = report.as_dict()
    row["detected_rate"] = round(row["detected_rate"], max(precision, 4))
    row["predicted"] = round(row["predicted"], max(precision, 4))
    if row["mean_first_detect_position"] is not None:
        row["mean_first_detect_position"] = round(row["mean_first_detect_position"], precision)
    _emit([row], list(row), fmt or "json", out, _manifest(ctx, started), single=True)


@cli.command()
@click.argument("action", type=click.Choice(["roundtrip", "compare"]))
@click.option("--m", "m", default=3, show_default=True)
@click.option("--N", "n", default=100, show_default=True)
@click.option("--K", "k", default=2, show_default=True)
@click.option("--count", default=1000, show_default=True,
              help="Strings to round-trip, or samples to compare.")
@_common
@click.pass_context
def codec(ctx, action, m, n, k, count, seed, out, fmt, precision):
    """Arithmetic-coder round trips, or code lengths with and without shaping."""
    started = time.perf_counter()
    if action == "roundtrip":
        rng = np.random.Generator(np.random.PCG64(seed))
        failures = 0
        total_bits = 0
        for row in sample_strings(rng, count, n, m, None):
            x = tuple(int(s) for s in row)
            coded = encode(x, m)
            total_bits += len(coded.bits)
            failures += decode(coded) != x
        result = {"action": "roundtrip", "m": m, "N": n, "strings": count,
                  "failures": failures, "mean_bits": round(total_bits / count, precision),
                  "seed": seed}
        _emit([result], list(result), fmt or "json", out, _manifest(ctx, started), single=True)
        if failures:
            sys.exit(1)
        return
    report = compare_code_lengths(ShapingConfig(m, n, k), count, seed)
    result = {"action": "compare", "m": m, "N": n, "K": k, "samples": count,
              "mean_bits_x": round(report.mean_bits_x, precision),
              "mean_bits_y": round(report.mean_bits_y, precision),
              "diff": round(report.diff, precision), "seed": seed}
    _emit([result], list(result), fmt or "json", out, _manifest(ctx, started), single=True)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except (ValueError, OSError, MemoryError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
