"""Measure the regression constants and write them to the package fixtures file.

Run from the repository root:  python scripts/freeze_fixtures.py
"""

from __future__ import annotations

import json
import subprocess
from pathlib import Path

import numpy as np

from gowerslab.gowers import chain_report
from gowerslab.grid import Ball, Box, GridSpec, Union, random_set, rasterize, symmetric_difference
from gowerslab.multilinear import SetTuple, bll_compare, vertices
from gowerslab.rearrange import radial_rearrangement
from gowerslab.stability import (
    ellipsoid_catalog, exceptional_measure, fit_ellipsoid, fit_epsilon, non_ellipsoid_catalog,
    power_deficit, stability_sweep, summarize_sweep,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "gowerslab" / "data" / "fixtures.json"

# exceptional-set family: perturbed balls (d=2, n=256) and the non-ellipsoid catalog
EXC_AMPLITUDES = (0.1, 0.2, 0.4, 0.8)
EXC_SEEDS = (0, 1, 2)
EXC_J = (0.2, 3.0)
EXC_DYADIC = 6


def commit() -> str:
    try:
        return subprocess.check_output(["git", "rev-parse", "--short", "HEAD"], text=True).strip()
    except (OSError, subprocess.CalledProcessError):
        return "unknown"


def two_intervals(gap: float = 1.0) -> Union:
    return Union((Box([-gap / 2 - 0.5], [-gap / 2]), Box([gap / 2], [gap / 2 + 0.5])))


def exceptional_family(n: int = 256):
    g = GridSpec(2, 1.0, n)
    for a in EXC_AMPLITUDES:
        for s in EXC_SEEDS:
            yield f"perturbed a={a} seed={s}", random_set(g, s, "perturbed-ellipsoid", amplitude=a)[1]
    for name, shape in non_ellipsoid_catalog(2).items():
        yield name, rasterize(shape, g)


def main() -> None:
    rev = commit()
    fx: dict = {}

    g = GridSpec(2, 1.0, 256)
    _, e = random_set(g, 0, "perturbed-ellipsoid", amplitude=0.3)
    fx["random_set_amp03"] = {
        "provenance": f"d=2 n=256 extent=1 seed=0 amplitude=0.3 commit={rev}",
        "value": symmetric_difference(e, radial_rearrangement(e)) / e.measure(),
        "threshold": 0.05,
    }

    g1 = GridSpec(1, 2.0, 4096)
    rep = chain_report(rasterize(two_intervals(), g1), 2)
    fx["two_interval_chain_gap"] = {
        "provenance": f"d=1 n=4096 extent=2 intervals [-1.0,-0.5] u [0.5,1.0] k=2 commit={rev}",
        "value": rep.terms[-1] - rep.terms[0],
        "threshold": 0.01,
    }

    g512 = GridSpec(2, 1.0, 512)
    ball = rasterize(Ball([0.0, 0.0], 0.45), g512)
    blobs = rasterize(Union((Ball([-0.5, 0.0], 0.25), Ball([0.5, 0.0], 0.25))), g512)
    fx["self_fit_floor"] = {
        "provenance": f"d=2 n=512 extent=1 ball radius 0.45 commit={rev}",
        "value": fit_epsilon(ball, fit_ellipsoid(ball)),
        "threshold": 0.02,
    }
    fx["two_blob_epsilon"] = {
        "provenance": f"d=2 n=512 extent=1 balls radius 0.25 at x=+-0.5 commit={rev}",
        "value": fit_epsilon(blobs, fit_ellipsoid(blobs)),
        "threshold": 0.5,
    }

    deltas = {}
    for n in (256, 512):
        gn = GridSpec(2, 1.0, n)
        for name, shape in non_ellipsoid_catalog(2).items():
            deltas.setdefault(name, {})[str(n)] = power_deficit(rasterize(shape, gn), 2)[0]
    floor = 0.5 * min(v["256"] for v in deltas.values())
    fx["non_ellipsoid_delta"] = {
        "provenance": f"d=2 k=2 extent=1 n in (256, 512) catalog non_ellipsoid_catalog(2) commit={rev}",
        "values": deltas,
        "floor": floor,
        "max_shrink": 0.2,
    }
    ell = {}
    for name, shape in ellipsoid_catalog(2).items():
        ell[name] = power_deficit(rasterize(shape, g), 2)[0]
    fx["ellipsoid_delta"] = {"provenance": f"d=2 k=2 extent=1 n=256 commit={rev}", "values": ell}

    far = rasterize(Union((Ball([-1.2, 0.0], 0.3), Ball([1.2, 0.0], 0.3))), GridSpec(2, 2.0, 256))
    fx["separated_balls_delta"] = {
        "provenance": f"d=2 k=2 extent=2 n=256 balls radius 0.3 at x=+-1.2 commit={rev}",
        "value": power_deficit(far, 2)[0],
        "threshold": 0.1,
    }

    recs = stability_sweep(g, [0.05, 0.1, 0.2, 0.4], 2, range(10))
    summ = summarize_sweep(recs)
    fx["stability_sweep"] = {
        "provenance": f"d=2 k=2 extent=1 n=256 amplitudes (0.05,0.1,0.2,0.4) seeds 0..9 commit={rev}",
        "spearman": summ.spearman,
        "bin_epsilon": summ.bin_epsilon,
        "threshold": 0.8,
    }

    worst = 0.0
    rows = []
    for name, e in exceptional_family():
        d0 = power_deficit(e, 2)[0]
        for j in range(EXC_DYADIC):
            dl = min(d0 * 2**j, 1.0)
            r = exceptional_measure(e, 2, EXC_J, dl)
            worst = max(worst, r.ratio)
            rows.append([name, dl, r.mu_bad])
    fx["exceptional_set"] = {
        "provenance": (
            f"d=2 k=2 extent=1 n=256 J={list(EXC_J)} amplitudes {list(EXC_AMPLITUDES)} seeds {list(EXC_SEEDS)} "
            f"plus non_ellipsoid_catalog(2); delta = delta0 * 2^j, j < {EXC_DYADIC}, capped at 1 commit={rev}"
        ),
        "max_ratio": worst,
        "C_frozen": 1.25 * worst,
    }

    rng = np.random.default_rng(7)
    g1s = GridSpec(1, 1.0, 128)
    gaps = []
    for _ in range(20):
        ents = {}
        for a in vertices(2):
            lo = rng.uniform(-0.8, 0.3)
            ents[a] = rasterize(Box([lo], [lo + rng.uniform(0.1, 0.5)]), g1s)
        lhs, rhs = bll_compare(SetTuple(2, ents))
        gaps.append(rhs - lhs)
    fx["bll_gaps"] = {
        "provenance": f"d=1 k=2 extent=1 n=128 rng=default_rng(7) 20 tuples of random intervals commit={rev}",
        "min_gap": min(gaps),
    }

    OUT.write_text(json.dumps(fx, indent=2, sort_keys=True) + "\n")
    print(json.dumps(fx, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
