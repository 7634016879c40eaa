"""Command-line entry point ``gowerslab``.

Exit codes: 0 success, 2 configuration error, 3 budget exceeded,
4 assertion failure.  Structured rows go to ``--output`` (JSON lines)
or to stdout; ``--pretty`` prints an aligned table instead.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .autocorr import autocorrelation
from .gowers import (
    DEFAULT_BUDGET, BudgetExceeded, chain_report, gamma_value, gowers_norm, normalized_ratio, u2_via_fourier,
)
from .grid import GridExtentError, GridFunction, GridSpec, ShapeSpec, rasterize
from .io import FormatError, dumps, read_grid, read_shape, shape_hash, write_grid
from .rearrange import Profile1D, bathtub_oracle, cumulative_F, radial_rearrangement, rearrangement_1d
from .stability import stability_sweep, summarize_sweep

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_ASSERT = 0, 2, 3, 4
DEFAULT_N = {1: 1024, 2: 256, 3: 64}


class ConfigError(Exception):
    pass


class AssertionFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# parser


def _input_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--shape", type=Path, help="shape spec file (JSON)")
    src.add_argument("--grid-file", type=Path, help="GWRS grid binary")
    p.add_argument("--n", type=int, help="cells per axis (default 1024, 256, 64 for d = 1, 2, 3)")
    p.add_argument("--extent", type=float, help="grid half-width L; default fits the shape with a margin")
    p.add_argument("--mode", choices=("fractional", "binary"), default="fractional", help="rasterization mode")
    p.add_argument("--subsamples", type=int, default=4, help="per-axis subsamples for boundary cells")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", type=Path, help="write JSON-lines records here instead of stdout")
    p.add_argument("--pretty", action="store_true", help="human-readable table on stdout")
    p.add_argument("--threads", type=int, help="FFT worker cap (falls back to $GWRS_THREADS)")
    p.add_argument("--budget", type=float, default=DEFAULT_BUDGET, help="work budget for the norm recursion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gowerslab", description="Gowers uniformity norms of sets in R^d.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "norm",
        help="Gowers norm of a set",
        description=(
            "Compute ||E||_{U_k}^{2^k} by the inductive definition "
            "||f||_{U_{k+1}}^{2^{k+1}} = int ||f f(.+s)||_{U_k}^{2^k} ds with ||f||_{U_1} = |int f|, "
            "or for k = 2 by the Fourier identity int |f^|^4.  Also reports the affine-invariant "
            "ratio ||E||_{U_k} / |E|^{(k+1)/2^k} and the ellipsoid constant gamma_{k,d}."
        ),
    )
    _input_args(p)
    _common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--method", choices=("recursive", "fourier"), default="recursive")
    p.add_argument("--compare-star", action="store_true", help="also evaluate the symmetric decreasing rearrangement E*")

    p = sub.add_parser(
        "chain",
        help="chain of rearrangement inequalities",
        description=(
            "Terms c_j = int_0^inf f_*^{k-j} f~_*^j, j = 0..k, where f(s) = |E cap (E+s)|, f~ is the same for "
            "the centred ball of measure |E|, and g_* is the nonincreasing rearrangement on [0, inf).  "
            "They satisfy ||E||^{2^k} <= gamma_{k-1,d} c_0 <= ... <= gamma_{k-1,d} c_k = ||E*||^{2^k}."
        ),
    )
    _input_args(p)
    _common(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--reference", choices=("grid", "analytic"), default="grid",
                   help="f~ from the raster's own rearrangement or from the continuum ball")
    p.add_argument("--profile", type=Path, help="profile table replacing the computed f_*")
    p.add_argument("--tol", type=float, help="override the discretization tolerance 10 (k+1) / n")
    p.add_argument("--assert-monotone", action="store_true", help="exit 4 unless c_0 <= ... <= c_k")

    p = sub.add_parser(
        "stability",
        help="delta/epsilon sweep over perturbed balls",
        description=(
            "For radially perturbed balls E, record delta = 1 - ||E||^{2^k} / (gamma_{k,d} |E|^{k+1}) "
            "(and the norm-scale 1 - ||E||/||E*||) against epsilon = |E Delta ellipsoid| / |E| for the "
            "moment-fitted ellipsoid.  Near-maximizers should be close to ellipsoids."
        ),
    )
    _common(p)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--extent", type=float, default=1.0)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--amplitudes", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    p.add_argument("--seeds", type=int, default=10, help="seeds 0..N-1 per amplitude")
    p.add_argument("--plot-table", type=Path, help="two-column (delta, epsilon) table for plotting")
    p.add_argument("--assert-monotone", action="store_true", help="exit 4 unless binned epsilon is nondecreasing")

    p = sub.add_parser(
        "rearrange",
        help="rearrangements and the cumulative functional",
        description=(
            "Write E* (symmetric decreasing rearrangement), the nonincreasing rearrangement of the input on "
            "[0, inf), the rearranged autocorrelation f_* with f(s) = |E cap (E+s)|, and "
            "F(t) = int_0^t f_* = max_{|A| = t} int_A f."
        ),
    )
    _input_args(p)
    _common(p)
    p.add_argument("--prefix", type=Path, help="write PREFIX.star.gwrs, PREFIX.input.tsv, PREFIX.autocorr.tsv, PREFIX.F.tsv")
    p.add_argument("--at", type=float, nargs="*", default=[], help="report F at these t")
    p.add_argument("--bathtub-check", action="store_true",
                   help="exit 4 if the greedy bathtub maximum and F disagree beyond 1e-12 relative")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _auto_extent(shape: ShapeSpec, n: int) -> float:
    lo, hi = shape.bbox()
    reach = float(np.max(np.abs(np.concatenate([np.atleast_1d(lo), np.atleast_1d(hi)]))))
    reach = max(reach, 0.5) * n / (n - 4)
    # dyadic extents keep dyadic box edges on cell boundaries
    return float(2.0 ** np.ceil(np.log2(reach * 1.05)))


def _load_input(args) -> tuple[GridFunction, Optional[str]]:
    if args.grid_file is not None:
        return read_grid(args.grid_file), None
    shape, hints = read_shape(args.shape)
    d = shape.dim
    if d not in (1, 2, 3):
        raise ConfigError(f"dimension {d} is not supported")
    n = args.n or hints.get("n") or DEFAULT_N[d]
    if n < 2:
        raise ConfigError("--n must be at least 2")
    extent = args.extent or hints.get("extent") or _auto_extent(shape, n)
    return rasterize(shape, GridSpec(d, float(extent), int(n)), args.mode, args.subsamples), shape_hash(shape)


def _check_output(path: Optional[Path]) -> None:
    if path is not None and not path.parent.is_dir():
        raise ConfigError(f"output directory {path.parent} does not exist")


def _emit(args, rows: list[dict], columns: Optional[Sequence[str]] = None) -> None:
    if args.pretty:
        cols = list(columns or sorted({k for r in rows for k in r}))
        cells = [[_short(r.get(c)) for c in cols] for r in rows]
        widths = [max(len(c), *(len(x[i]) for x in cells)) for i, c in enumerate(cols)]
        print("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
        for x in cells:
            print("  ".join(v.ljust(w) for v, w in zip(x, widths)))
    text = "".join(dumps(r) + "\n" for r in rows)
    if args.output is not None:
        args.output.write_text(text)
    elif not args.pretty:
        sys.stdout.write(text)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return "" if v is None else str(v)


def _grid_fields(g: GridFunction) -> dict:
    return {"d": g.spec.d, "n": g.spec.n, "extent": g.spec.extent}


# ---------------------------------------------------------------------------
# commands


def cmd_norm(args) -> int:
    if args.k < 1:
        raise ConfigError("--k must be >= 1")
    if args.method == "fourier" and args.k != 2:
        raise ConfigError("--method fourier computes U_2 only")
    e, h = _load_input(args)
    res = u2_via_fourier(e) if args.method == "fourier" else gowers_norm(e, args.k, args.budget)
    m = e.measure()
    row = {
        "command": "norm", "shape_hash": h, "k": args.k, **_grid_fields(e), "method": res.method,
        "measure": m, "power_value": res.power_value, "norm_value": res.norm_value,
        "gamma_ref": gamma_value(args.k, e.spec.d),
        "normalized_ratio": normalized_ratio(e, args.k, args.budget) if m > 0 else None,
    }
    if args.compare_star:
        es = radial_rearrangement(e)
        star = u2_via_fourier(es) if args.method == "fourier" else gowers_norm(es, args.k, args.budget)
        row["star_power_value"] = star.power_value
        row["star_ratio"] = res.norm_value / star.norm_value if star.norm_value > 0 else None
    _emit(args, [row], ["k", "d", "n", "method", "measure", "power_value", "norm_value", "star_ratio"])
    return EXIT_OK


def cmd_chain(args) -> int:
    e, h = _load_input(args)
    f_star = None
    if args.profile is not None:
        try:
            f_star = Profile1D.from_text(args.profile.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{args.profile}: {exc}") from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = chain_report(e, args.k, args.reference, args.tol, args.budget, f_star=f_star)
    row = {
        "command": "chain", "shape_hash": h, "method": "recursive", **rep.to_dict(),
        "monotone": rep.is_monotone(), "lower_sandwich": rep.lower_sandwich_ok(),
        "upper_sandwich": rep.upper_sandwich_ok(), "spread": rep.spread,
    }
    _emit(args, [row], ["k", "d", "n", "chain", "lhs", "rhs", "monotone", "lower_sandwich", "upper_sandwich"])
    if args.assert_monotone and not rep.is_monotone():
        raise AssertionFailed(f"chain is not monotone: {rep.terms}")
    return EXIT_OK


def cmd_stability(args) -> int:
    _check_output(args.plot_table)
    if args.d not in (1, 2, 3):
        raise ConfigError("--d must be 1, 2 or 3")
    if args.seeds < 1:
        raise ConfigError("--seeds must be positive")
    grid = GridSpec(args.d, args.extent, args.n)
    recs = stability_sweep(grid, args.amplitudes, args.k, range(args.seeds), args.budget)
    rows = [{"command": "stability", **r.to_dict()} for r in recs]
    _emit(args, rows, ["amplitude", "seed", "delta", "delta_norm", "epsilon"])
    if args.plot_table is not None:
        lines = ["# delta\tepsilon"] + [f"{r.delta_raw:.17g}\t{r.epsilon:.17g}" for r in recs]
        args.plot_table.write_text("\n".join(lines) + "\n")
    summ = summarize_sweep(recs)
    if args.pretty:
        print(f"spearman {summ.spearman:.4f}  binned epsilon {[round(x, 4) for x in summ.bin_epsilon]}")
    if args.assert_monotone and not summ.monotone:
        raise AssertionFailed(f"binned epsilon not monotone: {summ.bin_epsilon}")
    return EXIT_OK


def cmd_rearrange(args) -> int:
    if args.prefix is not None:
        _check_output(args.prefix)
    e, h = _load_input(args)
    star = radial_rearrangement(e)
    lower = rearrangement_1d(e)
    ac = autocorrelation(e).values
    f_lower = rearrangement_1d(ac)
    F = cumulative_F(f_lower)
    row = {
        "command": "rearrange", "shape_hash": h, **_grid_fields(e), "measure": e.measure(),
        "star_measure": star.measure(), "F_total": float(F.values[-1]),
        "F_at": [[t, float(F(t))] for t in args.at],
    }
    failures = []
    if args.bathtub_check:
        rng = np.random.default_rng(0)
        for g, prof in ((e, cumulative_F(lower)), (ac, F)):
            total = g.spec.total_volume
            ts = np.concatenate([prof.t[prof.t <= total][:50], rng.uniform(0, total, 50)])
            for t in ts:
                a, b = bathtub_oracle(g, float(t)), float(prof(t))
                if abs(a - b) > 1e-12 * max(abs(a), abs(b), 1e-300):
                    failures.append((float(t), a, b))
        row["bathtub_ok"] = not failures
    if args.prefix is not None:
        write_grid(f"{args.prefix}.star.gwrs", star)
        Path(f"{args.prefix}.input.tsv").write_text(lower.to_text())
        Path(f"{args.prefix}.autocorr.tsv").write_text(f_lower.to_text())
        Path(f"{args.prefix}.F.tsv").write_text(F.to_text())
    _emit(args, [row], ["d", "n", "measure", "star_measure", "F_total", "F_at", "bathtub_ok"])
    if failures:
        raise AssertionFailed(f"bathtub mismatch at {len(failures)} points, first {failures[0]}")
    return EXIT_OK


COMMANDS = {"norm": cmd_norm, "chain": cmd_chain, "stability": cmd_stability, "rearrange": cmd_rearrange}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else os.environ.get("GWRS_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            print(f"error: thread count must be a positive integer, got {threads!r}", file=sys.stderr)
            return EXIT_CONFIG
        os.environ["GWRS_THREADS"] = str(int(threads))
    try:
        _check_output(args.output)
        return COMMANDS[args.command](args)
    except BudgetExceeded as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except AssertionFailed as exc:
        print(f"assertion: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    except (ConfigError, FormatError, GridExtentError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
