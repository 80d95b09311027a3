"""Named experiments run by the command line.

Every scenario takes a validated config and an output directory, writes
its CSV tables (and optional snapshots) there, and returns the outcome of
its built-in assertions plus a small summary for the run index.  Nothing
time-dependent is written to CSV, so identical configs give identical
bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import fock, meanfield, nse, radial, sce
from .config import ScenarioConfig
from .io import write_csv, write_snapshot
from .kernels import BoundaryCondition, CouplingSpec, Grid, PoissonSolver, delta_m, f_sigma
from .lattice import Lattice


@dataclass
class Assertion:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": _finite(self.value),
                "threshold": _finite(self.threshold), "detail": self.detail}


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else str(x)


def check_below(name: str, value: float, threshold: float, detail: str = "") -> Assertion:
    return Assertion(name, bool(value <= threshold), float(value), float(threshold), detail)


def check_above(name: str, value: float, threshold: float, detail: str = "") -> Assertion:
    return Assertion(name, bool(value > threshold), float(value), float(threshold), detail)


@dataclass
class ScenarioResult:
    files: list[str] = field(default_factory=list)
    assertions: list[Assertion] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def table(self, outdir: Path, name: str, columns, rows) -> None:
        write_csv(outdir / name, columns, rows)
        self.files.append(name)


SCENARIOS: dict[str, tuple[str, Callable]] = {}


def scenario(name: str, description: str):
    def register(fn):
        SCENARIOS[name] = (description, fn)
        return fn
    return register


def _grid(cfg: ScenarioConfig) -> Grid:
    g = cfg["grid"]
    return Grid(g["dim"], g["n"], g["spacing"])


def _observable_rows(traj: nse.Trajectory):
    rows = []
    for o in traj.observables:
        com = list(o.center_of_mass) + [0.0] * (3 - len(o.center_of_mass))
        rows.append([o.time, o.norm, o.energy, o.rms_width, o.peak_density, *com])
    return rows


OBS_COLUMNS = ("t", "norm", "energy", "rms_width", "peak_density", "com_x", "com_y", "com_z")


def _evolve_scenario(cfg: ScenarioConfig, outdir: Path, coupling: CouplingSpec,
                     velocity=None) -> tuple[ScenarioResult, nse.Trajectory, nse.EvolutionParams]:
    res = ScenarioResult()
    grid = _grid(cfg)
    ini, ev = cfg["initial"], cfg["evolution"]
    psi0 = nse.gaussian_packet(grid, ini["width"], ini["center"], velocity, coupling.mass)
    dt = ev["dt"] or nse.stable_dt(grid, coupling.mass)
    params = nse.EvolutionParams(dt, ev["steps"], cfg["grid"]["bc"],
                                 min(ev["record_every"], ev["steps"]))
    traj = nse.evolve(psi0, coupling, params, keep_snapshots=ev["snapshot"])
    res.table(outdir, "observables.csv", OBS_COLUMNS, _observable_rows(traj))
    if ev["snapshot"]:
        for k, (t, snap) in enumerate([traj.snapshots[0], traj.snapshots[-1]]):
            name = f"snapshot_{k}.bin"
            write_snapshot(outdir / name, snap.amplitude, time=t, spacing=grid.spacing,
                           mass=coupling.mass)
            res.files.append(name)
    norms = np.array([o.norm for o in traj.observables])
    norm_drift = float(np.max(np.abs(norms - norms[0]))) / params.steps
    res.assertions.append(check_below("norm_drift_per_step", norm_drift,
                                      cfg["assert"]["norm_drift_per_step"]))
    res.summary.update({"dt": dt, "steps": params.steps, "energy_drift": traj.energy_drift,
                        "final_rms_width": traj.observables[-1].rms_width})
    return res, traj, params


@scenario("nse-evolve", "real-time self-gravitating evolution of a Gaussian packet")
def run_nse_evolve(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    ph = cfg["physics"]
    coupling = CouplingSpec.gravity(ph["G"], ph["mass"])
    res, traj, _ = _evolve_scenario(cfg, outdir, coupling, cfg["initial"]["velocity"])
    res.assertions.append(check_below("energy_drift", traj.energy_drift,
                                      cfg["assert"]["energy_drift"]))
    return res


@scenario("hartree-coulomb", "time-dependent Hartree evolution with Coulomb self-repulsion")
def run_hartree_coulomb(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    ph = cfg["physics"]
    coupling = CouplingSpec.coulomb(ph["e2"], ph["mass"])
    res, traj, _ = _evolve_scenario(cfg, outdir, coupling)
    widths = np.array([o.rms_width for o in traj.observables])
    steps = np.diff(widths)
    res.assertions.append(Assertion("rms_width_increasing", bool(np.all(steps > 0)),
                                    float(steps.min()), 0.0, "smallest width increment"))
    return res


@scenario("nse-ground", "imaginary-time ground state and its real-time stationarity")
def run_nse_ground(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    ph, sol, st = cfg["physics"], cfg["solver"], cfg["stationarity"]
    grid = _grid(cfg)
    bc = cfg["grid"]["bc"]
    coupling = CouplingSpec.gravity(ph["G"], ph["mass"])
    psi0 = nse.gaussian_packet(grid, cfg["initial"]["width"], cfg["initial"]["center"],
                               mass=ph["mass"])
    gs = nse.ground_state(psi0, coupling, sol["itol"], bc, sol["max_iter"])
    res.table(outdir, "ground_energy.csv", ("iteration", "energy"),
              [[k, e] for k, e in enumerate(gs.energy_history)])
    mid = grid.n // 2
    line = gs.psi.density[(slice(None),) + (mid,) * (grid.dim - 1)]
    res.table(outdir, "ground_profile.csv", ("x", "density"),
              [[x, d] for x, d in zip(grid.axis, line)])

    dt = st["dt_fraction"] * nse.stable_dt(grid, ph["mass"])
    later = nse.propagate(gs.psi, coupling, dt, st["steps"], bc)
    rho0 = gs.psi.density
    drift = math.sqrt(grid.integrate((later.density - rho0) ** 2) / grid.integrate(rho0**2))
    resid, _ = nse.stationarity_residual(gs.psi, coupling, bc)
    hist = np.array(gs.energy_history)
    rises = np.diff(hist)
    # the solver accepts rises at the level of rounding noise
    e_floor = (2 * math.pi / grid.length) ** 2 / (2 * ph["mass"])
    allowance = 64 * np.finfo(float).eps * np.maximum(np.abs(hist[:-1]), e_floor)
    res.assertions += [
        check_below("stationarity_residual", resid, 10 * sol["itol"]),
        check_below("density_drift_l2", drift, cfg["assert"]["density_drift"],
                    f"{st['steps']} steps at dt={dt:.6g}"),
        Assertion("energy_non_increasing", bool(np.all(rises <= allowance)),
                  float(rises.max()) if rises.size else 0.0, 0.0),
    ]
    res.summary.update({"energy": gs.energy, "chemical_potential": gs.chemical_potential,
                        "iterations": gs.iterations, "residual": resid, "density_drift": drift})
    return res


@scenario("kernel-verify", "pair kernel limits, bounds, self-energy signs and Poisson check")
def run_kernel_verify(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    k = cfg["kernel"]
    rows, worst_bound, worst_origin = [], 0.0, 0.0
    for s in k["sigmas"]:
        r = np.linspace(0.0, k["r_over_sigma_max"] * s, k["n_scan"] + 1)[1:]
        f = f_sigma(r, s)
        worst_bound = max(worst_bound, float(np.max(f - 1.0 / r)))
        f0 = f_sigma(0.0, s)
        worst_origin = max(worst_origin, abs(f0 * s * math.sqrt(math.pi) - 1.0))
        pick = np.unique(np.linspace(0, r.size - 1, 101).astype(int))
        rows += [[s, 0.0, f0, math.inf]] + [[s, r[i], f[i], 1.0 / r[i]] for i in pick]
    res.table(outdir, "f_sigma.csv", ("sigma", "r", "f_sigma", "inv_r"), rows)
    limit = f_sigma(1.0, 0.01)
    res.assertions += [
        Assertion("sigma_to_zero_limit", bool(1.0 - 1e-12 <= limit <= 1.0), limit, 1e-12,
                  "F_0.01(1) in [1 - 1e-12, 1]"),
        check_below("origin_value", worst_origin, 1e-10, "relative error of F(0) sigma sqrt(pi)"),
        check_below("bounded_by_inverse_r", worst_bound, 0.0, "max of F(r) - 1/r on the scan"),
        Assertion("delta_m_signs",
                  delta_m(CouplingSpec.gravity(1.0, 1.0, 1.0)) < 0
                  < delta_m(CouplingSpec.coulomb(1.0, 1.0, 1.0)), 0.0, 0.0),
    ]

    p = cfg["poisson"]
    grid = Grid(3, p["n"], p["spacing"])
    rho = np.zeros(grid.shape)
    c = grid.n // 2
    rho[c, c, c] = 1.0 / grid.cell_volume
    v = PoissonSolver(grid, BoundaryCondition.ISOLATED)(rho, p["G"])
    radii = np.arange(4, grid.n // 4 + 1)
    exact = -p["G"] / (radii * grid.spacing)
    got = v[c + radii, c, c]
    rel = np.abs(got / exact - 1.0)
    res.table(outdir, "poisson_point.csv", ("R", "potential", "minus_G_over_R"),
              [[x * grid.spacing, a, b] for x, a, b in zip(radii, got, exact)])
    res.assertions.append(check_below("poisson_point_source", float(rel.max()), 0.01))
    return res


@scenario("fock-sectors", "one- and two-particle sectors of the lattice Hamiltonian")
def run_fock_sectors(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    la, ph, ck = cfg["lattice"], cfg["physics"], cfg["check"]
    lat = Lattice(la["dim"], la["sites"], la["spacing"])
    grav = CouplingSpec.gravity(ph["G"], ph["mass"], ph["sigma"])
    coul = CouplingSpec.coulomb(ph["e2"], ph["mass"], ph["sigma"])
    b1, b2 = fock.build_basis(lat, 1), fock.build_basis(lat, 2)
    h1 = fock.build_hamiltonian(b1, grav, stencil=la["stencil"])
    h2 = fock.build_hamiltonian(b2, grav, stencil=la["stencil"])
    h2c = fock.build_hamiltonian(b2, coul, stencil=la["stencil"])
    for name, h in (("sector_N1.csv", h1), ("sector_N2.csv", h2), ("sector_N2_coulomb.csv", h2c)):
        h.to_csv(outdir / name)
        res.files.append(name)

    inter1 = fock.one_particle_matrix(h1) - lat.hopping_matrix(grav.mass, la["stencil"])
    off = inter1 - np.diag(np.diag(inter1))
    dm = delta_m(grav)
    res.assertions += [
        check_below("n1_interaction_offdiagonal", float(np.abs(off).max()), 0.0,
                    "interaction in N=1 is delta_m times identity"),
        check_below("n1_diagonal_is_delta_m", float(np.abs(np.diag(inter1) - dm).max()),
                    1e-12 * abs(dm)),
        check_below("hermiticity", max(h1.hermiticity_error(), h2.hermiticity_error()), 0.0),
    ]

    rows, worst = [], 0.0
    for h, cp, label in ((h2, grav, "gravity"), (h2c, coul, "coulomb")):
        diag = fock.interaction_diagonal(b2, cp)
        for k, occ in enumerate(b2.states):
            sites = np.repeat(np.arange(lat.n_sites), occ)
            pair = cp.sign * cp.strength * f_sigma(lat.distances[sites[0], sites[1]], cp.sigma)
            got = diag[k] - 2 * delta_m(cp)
            worst = max(worst, abs(got - pair) / abs(pair))
            rows.append([label, int(sites[0]), int(sites[1]), got, pair])
    res.table(outdir, "pair_elements.csv", ("kind", "site_i", "site_j", "pair_energy",
                                            "expected"), rows)
    res.assertions.append(check_below("pair_elements_match_kernel", worst, 1e-12))

    rng = np.random.default_rng(cfg.seed)
    lin = 0.0
    for _ in range(ck["n_random"]):
        v1 = b2.vector(rng.normal(size=b2.dimension) + 1j * rng.normal(size=b2.dimension))
        v2 = b2.vector(rng.normal(size=b2.dimension) + 1j * rng.normal(size=b2.dimension))
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        lin = max(lin, fock.linearity_check(h2, v1.normalized(), v2.normalized(), a, b, ck["t"]))
    res.assertions.append(check_below("linearity", lin, 1e-10))
    v = b2.vector(rng.normal(size=b2.dimension) + 1j * rng.normal(size=b2.dimension)).normalized()
    kd = (fock.evolve_exact(h2, v, ck["t"], "krylov")
          - fock.evolve_exact(h2, v, ck["t"], "dense")).norm()
    res.assertions.append(check_below("krylov_matches_dense", kd, 1e-10))
    res.summary.update({"delta_m": dm, "dimension_N2": b2.dimension})
    return res


@scenario("meanfield-converge", "exact N-body dynamics against the Hartree orbital, N = 2..6")
def run_meanfield(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    la, ph, mf = cfg["lattice"], cfg["physics"], cfg["meanfield"]
    rep = meanfield.convergence_experiment(
        la["sites"], mf["N"], mf["g_total"], mf["t"], mf["dt"], sigma=ph["sigma"],
        spacing=la["spacing"], mass=ph["mass"], kind=ph["kind"], n_records=mf["n_records"],
        stencil=la["stencil"])
    rep.write_csv(outdir / "convergence.csv", include_wall=False)
    res.files.append("convergence.csv")
    summary = rep.summary()
    res.summary.update(summary)
    res.summary["wall_ms"] = {str(r.N): r.wall_ms for r in rep.final_rows()}
    res.assertions += [
        Assertion("spearman_negative", bool(rep.spearman < 0), rep.spearman, 0.0),
        Assertion("exponent_negative", bool(rep.exponent < 0), rep.exponent, 0.0),
    ]
    return res


@scenario("sce-misstep", "self-sourced one-particle evolution against the exact linear field")
def run_sce(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    la, ph, ev, ck = cfg["lattice"], cfg["physics"], cfg["evolution"], cfg["assert"]
    lat = Lattice(la["dim"], la["sites"], la["spacing"])
    coupling = CouplingSpec.gravity(ph["G"], ph["mass"], ph["sigma"])
    chi0 = sce.default_orbital(lat, cfg["initial"]["width"])
    rep, a, b = sce.misstep_compare(lat, chi0, coupling, ev["t"], ev["dt"], la["stencil"],
                                    ev["fixed_source"], ck["threshold"])
    rep.write_csv(outdir / "misstep.csv")
    res.files.append("misstep.csv")
    dt = float(a.times[1] - a.times[0])
    if not ev["fixed_source"]:
        _, ref = nse.LatticeNSE(lat, coupling, stencil=la["stencil"]).evolve(
            chi0, dt, len(a.times) - 1)
        res.assertions.append(check_below("matches_lattice_nse",
                                          float(np.abs(ref - a.orbitals).max()),
                                          ck["cross_solver"]))
    free = sce.run_exact_field(lat, chi0, coupling.with_strength(0.0), dt, len(a.times) - 1,
                               la["stencil"])
    res.assertions += [
        check_below("exact_density_coupling_independent",
                    float(np.abs(free.densities - b.densities).max()), ck["density_independence"]),
        check_above("distance_exceeds_threshold", rep.max_distance, ck["threshold"]),
        check_below("norm_drift_per_step", float(np.abs(rep.norm_a - 1.0).max()) / len(a.times),
                    1e-12),
    ]
    res.summary.update({"max_distance": rep.max_distance, "crossing_time": rep.crossing_time,
                        "delta_m": delta_m(coupling)})
    return res


@scenario("hydrogen-wrong-nse", "hydrogen ground state with and without the self-repulsion term")
def run_hydrogen(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    res = ScenarioResult()
    ph, rd, ck = cfg["physics"], cfg["radial"], cfg["assert"]
    mu, alpha = ph["reduced_mass"], ph["alpha"]
    plain = radial.RadialProblem(mu, alpha, None, rd["r_max"], rd["n_points"])
    # the electron's own charge e^2 = 4 pi alpha, unit mass for the coupling record
    wrong = radial.RadialProblem(mu, alpha, CouplingSpec.coulomb(4 * math.pi * alpha, 1.0),
                                 rd["r_max"], rd["n_points"])
    s_plain = radial.radial_solve(plain)
    s_wrong = radial.radial_solve(wrong, mixing=rd["mixing"])
    exact = plain.hydrogen_energy()
    dev_plain = abs(s_plain.energy / exact - 1.0)
    dev_wrong = abs(s_wrong.energy / exact - 1.0)
    res.table(outdir, "energies.csv", ("variant", "energy", "exact", "relative_deviation"),
              [["linear", s_plain.energy, exact, dev_plain],
               ["self-interacting", s_wrong.energy, exact, dev_wrong]])
    pick = slice(None, None, max(1, rd["n_points"] // 1000))
    res.table(outdir, "radial_orbitals.csv", ("r", "u_linear", "u_self_interacting"),
              [[r, a, b] for r, a, b in zip(s_plain.r[pick], s_plain.u[pick], s_wrong.u[pick])])
    res.assertions += [
        check_below("hydrogen_matches_exact", dev_plain, ck["hydrogen_rel"]),
        check_above("self_interacting_deviates", dev_wrong, ck["wrong_rel"]),
    ]
    res.summary.update({"energy_linear": s_plain.energy, "energy_self_interacting": s_wrong.energy,
                        "exact": exact, "scf_iterations": s_wrong.iterations})
    return res


def run_scenario(cfg: ScenarioConfig, outdir: Path) -> ScenarioResult:
    _, fn = SCENARIOS[cfg.scenario]
    return fn(cfg, outdir)
