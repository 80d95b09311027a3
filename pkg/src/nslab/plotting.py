"""Static SVG figures from a run directory.

Output is byte-stable: a fixed SVG hash salt, no date metadata and a
headless backend.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv  # noqa: E402

log = logging.getLogger(__name__)

_RC = {"svg.hashsalt": "nslab", "svg.fonttype": "path", "figure.figsize": (6.0, 4.0),
       "font.size": 9}


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def _series(outdir: Path, name: str):
    p = outdir / name
    if not p.exists():
        log.warning("missing data series %s, skipping its plot", name)
        return None
    d = read_csv(p)
    if not d or next(iter(d.values())).size == 0:
        log.warning("data series %s is empty, skipping its plot", name)
        return None
    return d


def _observables(outdir: Path, out: list[Path]):
    d = _series(outdir, "observables.csv")
    if d is None:
        return
    fig, (a, b) = plt.subplots(2, 1, sharex=True)
    a.plot(d["t"], d["energy"], marker=".")
    a.set_ylabel("energy")
    b.plot(d["t"], d["rms_width"], marker=".")
    b.set_ylabel("rms width")
    b.set_xlabel("t")
    path = outdir / "observables.svg"
    _save(fig, path)
    out.append(path)


def _ground(outdir: Path, out: list[Path]):
    d = _series(outdir, "ground_energy.csv")
    if d is not None:
        fig, ax = plt.subplots()
        gap = d["energy"] - d["energy"][-1]
        ax.semilogy(d["iteration"][:-1], np.maximum(gap[:-1], 1e-300), marker=".")
        ax.set_xlabel("iteration")
        ax.set_ylabel("E - E_final")
        path = outdir / "ground_energy.svg"
        _save(fig, path)
        out.append(path)
    d = _series(outdir, "ground_profile.csv")
    if d is not None:
        fig, ax = plt.subplots()
        ax.plot(d["x"], d["density"])
        ax.set_xlabel("x")
        ax.set_ylabel("density on the x axis")
        path = outdir / "ground_profile.svg"
        _save(fig, path)
        out.append(path)


def _kernel(outdir: Path, out: list[Path]):
    d = _series(outdir, "f_sigma.csv")
    if d is None:
        return
    fig, ax = plt.subplots()
    for s in np.unique(d["sigma"]):
        m = (d["sigma"] == s) & (d["r"] > 0)
        ax.loglog(d["r"][m], d["f_sigma"][m], label=f"sigma = {s:g}")
    r = np.unique(d["r"][d["r"] > 0])
    ax.loglog(r, 1.0 / r, "k--", lw=0.8, label="1/r")
    ax.set_xlabel("r")
    ax.set_ylabel("F_sigma(r)")
    ax.legend()
    path = outdir / "f_sigma.svg"
    _save(fig, path)
    out.append(path)


def _meanfield(outdir: Path, out: list[Path]):
    d = _series(outdir, "convergence.csv")
    if d is None:
        return
    t_final = d["t"].max()
    m = d["t"] == t_final
    n, dist = d["N"][m], d["trace_distance"][m]
    fig, ax = plt.subplots()
    ax.loglog(n, dist, "o", label=f"t = {t_final:g}")
    ok = dist > 0
    if ok.sum() >= 2:
        slope, icept = np.polyfit(np.log(n[ok]), np.log(dist[ok]), 1)
        ax.loglog(n, np.exp(icept) * n**slope, "--", label=f"fit: N^{slope:.2f}")
    ax.set_xlabel("N")
    ax.set_ylabel("one-body trace distance")
    ax.legend()
    path = outdir / "convergence.svg"
    _save(fig, path)
    out.append(path)


def _misstep(outdir: Path, out: list[Path], index: dict):
    d = _series(outdir, "misstep.csv")
    if d is None:
        return
    fig, ax = plt.subplots()
    ax.plot(d["t"], d["l2_distance"], label="sourced vs exact field")
    thr = index.get("config", {}).get("assert", {}).get("threshold")
    if thr is not None:
        ax.axhline(thr, color="k", lw=0.8, ls=":", label=f"threshold {thr:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 distance (phase aligned)")
    ax.legend()
    path = outdir / "misstep.svg"
    _save(fig, path)
    out.append(path)


def _hydrogen(outdir: Path, out: list[Path]):
    d = _series(outdir, "radial_orbitals.csv")
    if d is None:
        return
    fig, ax = plt.subplots()
    ax.plot(d["r"], d["u_linear"], label="linear two-body")
    ax.plot(d["r"], d["u_self_interacting"], label="with self-repulsion")
    ax.set_xlim(0, min(d["r"].max(), 20.0 * d["r"][np.argmax(np.abs(d["u_linear"]))] + 1e-12))
    ax.set_xlabel("r")
    ax.set_ylabel("u(r)")
    ax.legend()
    path = outdir / "radial_orbitals.svg"
    _save(fig, path)
    out.append(path)


def _fock(outdir: Path, out: list[Path]):
    d = _series(outdir, "pair_elements.csv")
    if d is None:
        return
    fig, ax = plt.subplots()
    ax.plot(d["expected"], d["pair_energy"], "o")
    ax.set_xlabel("s strength F_sigma(r_ij)")
    ax.set_ylabel("two-particle interaction minus 2 delta_m")
    path = outdir / "pair_elements.svg"
    _save(fig, path)
    out.append(path)


def plot_run(outdir) -> list[Path]:
    """Render every figure the run directory has data for; returns written paths."""
    outdir = Path(outdir)
    index_path = outdir / "index.json"
    if not index_path.exists():
        log.warning("no index.json in %s, nothing to plot", outdir)
        return []
    index = json.loads(index_path.read_text())
    scenario = index.get("scenario")
    out: list[Path] = []
    with plt.rc_context(_RC):
        if scenario in ("nse-evolve", "hartree-coulomb"):
            _observables(outdir, out)
        elif scenario == "nse-ground":
            _ground(outdir, out)
        elif scenario == "kernel-verify":
            _kernel(outdir, out)
        elif scenario == "meanfield-converge":
            _meanfield(outdir, out)
        elif scenario == "sce-misstep":
            _misstep(outdir, out, index)
        elif scenario == "hydrogen-wrong-nse":
            _hydrogen(outdir, out)
        elif scenario == "fock-sectors":
            _fock(outdir, out)
        else:
            log.warning("unknown scenario %r in index.json, nothing to plot", scenario)
    return out
