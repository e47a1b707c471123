"""Command implementations, figure presets and the scenarios they share.

The scenario dataclasses are also used by the acceptance tests so that the
preset outputs and the test assertions come from the same runs.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .closed_form import (
    Barenblatt,
    bessel_fixed_point,
    bessel_limit,
    bessel_trajectory,
    BesselShoot,
    gaussian_limit,
    scan_fixed_point,
    solve_bessel_steady,
)
from .diagnostics import (
    detect_plateaus,
    rescale_barenblatt,
    steady_energy_identity,
    variation,
    variation_per_component,
)
from .discretization import Grid, GridFunction, cell_average_of_nodal, write_csv
from .evolution import (
    FVState,
    SchemeConfig,
    evolve,
    gaussian_density,
    random_initial_density,
)
from .particles import (
    RepulsionLaw,
    empirical_density,
    evolve_particles,
    quantile_particles,
)
from .steady import SteadyState, nu_of_L_curve, solve_steady, solve_steady_for_nu

log = logging.getLogger(__name__)


@dataclass
class Anchor:
    name: str
    value: float
    target: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} ({self.target})"


def write_manifest(out: Path, rows: dict):
    out.mkdir(parents=True, exist_ok=True)
    with (out / "manifest.txt").open("w") as fh:
        for key, val in rows.items():
            fh.write(f"{key} = {val}\n")


def write_anchors(out: Path, anchors: list[Anchor]):
    out.mkdir(parents=True, exist_ok=True)
    with (out / "anchors.txt").open("w") as fh:
        for a in anchors:
            fh.write(a.line() + "\n")
    for a in anchors:
        (log.info if a.passed else log.warning)("%s", a.line())


def steady_distance(state: FVState, ss: SteadyState) -> tuple[float, float]:
    """Sup distance from a finite-volume state to a steady profile centred on it.

    Returns ``(at_centres, of_averages)``: the first samples the steady
    profile at the cell centres, the second uses its exact cell averages.
    The two differ mainly in the cell cut by the free boundary, which the
    discrete equilibrium leaves (almost) empty.
    """
    com = state.center_of_mass()
    at_centres = float(np.max(np.abs(state.rho_bar - ss(state.x - com))))
    of_averages = float(np.max(np.abs(state.rho_bar - steady_to_cells(ss, state.grid, com))))
    return at_centres, of_averages


def steady_to_cells(ss: SteadyState, grid: Grid, center: float = 0.0) -> np.ndarray:
    """Cell averages of a (translated) steady state on an evolution grid."""
    full = ss.full()
    g = full.grid
    moved = GridFunction(Grid(g.left + center, g.right + center, g.n_cells), full.values)
    return cell_average_of_nodal(moved, grid)


# ---------------------------------------------------------------- scenarios

@dataclass
class MetastabilityScenario:
    kernel: str = "bessel"
    m: float = 4.0
    nu: float = 0.6
    half_width: float = 30.0
    n_cells: int = 600
    seed: int = 2
    coarse_n: int = 40
    envelope_sigma: float = 2.5
    t_end: float = 1500.0
    energy_every: int = 20
    flat_threshold: float = 3e-5
    drop_threshold: float | None = None
    snapshots: tuple = (0, 25, 50, 100, 200, 250, 300, 350, 400, 500, 600, 800, 1000, 1250,
                        1500)


@dataclass
class MetastabilityResult:
    scenario: MetastabilityScenario
    trajectory: object
    analysis: object
    steady: SteadyState
    final_distance: float
    final_distance_cells: float
    clump_checks: list = field(default_factory=list)


def run_metastability(sc: MetastabilityScenario, clump_threshold: float = 1e-3,
                      trim: int = 2, min_clump_mass: float = 1e-2) -> MetastabilityResult:
    grid = Grid.symmetric(sc.half_width, sc.n_cells)
    init = random_initial_density(sc.seed, sc.coarse_n, sc.envelope_sigma, grid)
    traj = evolve(init, sc.kernel, sc.m, sc.nu, t_end=sc.t_end,
                  snapshot_times=[t for t in sc.snapshots if t <= sc.t_end],
                  energy_every=sc.energy_every)
    analysis = detect_plateaus(traj.report, drop_threshold=sc.drop_threshold,
                               flat_threshold=sc.flat_threshold, min_plateau=5.0)
    steady = solve_steady_for_nu(sc.kernel, sc.m, sc.nu, L_bracket=(0.2, 20.0),
                                 dx=grid.dx / 4)
    dist, dist_cells = steady_distance(traj.final, steady)
    checks = []
    for snap in traj.snapshots:
        if not any(a <= snap.t <= b for a, b in analysis.plateaus):
            continue
        rho = snap.as_function()
        comps = variation_per_component(rho, sc.kernel, sc.m, sc.nu,
                                        threshold=clump_threshold * rho.values.max(),
                                        trim=trim, min_mass=min_clump_mass)
        checks.append((snap.t, comps))
    return MetastabilityResult(sc, traj, analysis, steady, dist, dist_cells, checks)


@dataclass
class BasinScenario:
    kernel: str = "gaussian"
    m: float = 1.8
    nu: float = 0.6
    sigma2: float = 30.0
    half_width: float = 60.0
    n_cells: int = 1200
    t_end: float = 500.0
    energy_every: int = 10
    snapshots: tuple = (0, 10, 50, 100, 200, 300, 400, 500)


@dataclass
class BasinResult:
    scenario: BasinScenario
    trajectory: object
    steady: SteadyState
    final_distance: float
    final_distance_cells: float
    max_rho: tuple


def run_basin(sc: BasinScenario, steady: SteadyState | None = None) -> BasinResult:
    grid = Grid.symmetric(sc.half_width, sc.n_cells)
    init = gaussian_density(grid, sc.sigma2)
    traj = evolve(init, sc.kernel, sc.m, sc.nu, t_end=sc.t_end,
                  snapshot_times=[t for t in sc.snapshots if t <= sc.t_end],
                  energy_every=sc.energy_every)
    if steady is None:
        steady = basin_steady(sc)
    dist, dist_cells = steady_distance(traj.final, steady)
    return BasinResult(sc, traj, steady, dist, dist_cells,
                       (float(init.rho_bar.max()), float(traj.final.rho_bar.max())))


def basin_steady(sc: BasinScenario, dx: float | None = None) -> SteadyState:
    dx = dx or (2 * sc.half_width / sc.n_cells) / 4
    return solve_steady_for_nu(sc.kernel, sc.m, sc.nu, L_bracket=(1.0, 40.0), dx=dx)


def barenblatt_distances(traj, m: float, nu: float) -> list[tuple[float, float]]:
    """Rescaled sup distance of each snapshot to the rescaled Barenblatt profile."""
    mass = traj.snapshots[0].mass() if traj.snapshots else 1.0
    ref = Barenblatt(m, nu, mass=mass)
    out = []
    for snap in traj.snapshots:
        resc = rescale_barenblatt(snap.as_function())
        out.append((snap.t, float(np.max(np.abs(resc.values - ref.rescaled(resc.x))))))
    return out


def nu_table(kernel, ms, Ls, cells_per_unit: int, workers: int = 1) -> dict:
    """``{m: array of nu(L)}`` at fixed resolution; NaN where a solve fails."""
    from concurrent.futures import ThreadPoolExecutor

    jobs = [(m, L) for m in ms for L in Ls]

    def one(job):
        m, L = job
        n = max(8, int(round(L * cells_per_unit)))
        return nu_of_L_curve(kernel, m, [L], n)[0][1]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vals = list(pool.map(one, jobs))
    else:
        vals = [one(j) for j in jobs]
    out = {}
    for (m, _), v in zip(jobs, vals):
        out.setdefault(m, []).append(v)
    return {m: np.array(v) for m, v in out.items()}


# ---------------------------------------------------------------- commands

def run(cfg) -> Path:
    """Dispatch a resolved :class:`~clumplab.cli.RunConfig`; returns the output dir."""
    out = Path(cfg.out)
    data_file = None
    if out.suffix == ".csv":
        data_file, out = out, out.parent
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, cfg.manifest())
    handler = {
        "steady": _cmd_steady,
        "bessel": _cmd_bessel,
        "limit": _cmd_limit,
        "evolve": _cmd_evolve,
        "particles": _cmd_particles,
        "sweep": _cmd_sweep,
        "preset": _cmd_preset,
    }[cfg.command]
    anchors = handler(cfg, out, data_file)
    write_anchors(out, anchors or [])
    return out


def _plot(cfg, fn, *args, **kw):
    if not cfg.figures:
        return
    from . import plotting

    getattr(plotting, fn)(*args, **kw)


def _steady_anchors(ss: SteadyState, label: str = "") -> list[Anchor]:
    C, C_from_E = steady_energy_identity(ss)
    full = ss.full()
    var = variation(full, ss.kernel, ss.m, ss.nu).values[1:-1]
    return [
        Anchor(f"{label}unit mass", ss.mass(), "1 within 1e-10", abs(ss.mass() - 1) < 1e-10),
        Anchor(f"{label}C vs -2E + int(2F - f rho)", abs(C - C_from_E), "< 1e-4",
               abs(C - C_from_E) < 1e-4),
        Anchor(f"{label}spread of dE/drho on the support", float(np.ptp(var)), "< 1e-3",
               float(np.ptp(var)) < 1e-3),
    ]


def _write_steady(path, ss: SteadyState, extra: dict | None = None):
    full = ss.full()
    var = variation(full, ss.kernel, ss.m, ss.nu)
    header = {"kernel": ss.kernel.variant, "m": ss.m, "nu": repr(ss.nu), "C": repr(ss.C),
              "L": repr(ss.L), "iterations": ss.iterations,
              "residual_sup": repr(ss.residual_sup)}
    header.update(extra or {})
    write_csv(path, {"x": full.x, "rho": full.values, "variation": var.values}, header)


def _cmd_steady(cfg, out, data_file):
    kw = {"tol": cfg.get("tol"), "max_iter": cfg.get("max_iter")}
    if cfg.L is not None:
        ss = solve_steady(cfg.kernel, cfg.m, cfg.L, cfg.get("n_cells"), **kw)
    else:
        ss = solve_steady_for_nu(cfg.kernel, cfg.m, cfg.nu, n_cells=cfg.get("n_cells"), **kw)
    _write_steady(data_file or out / "steady.csv", ss)
    full = ss.full()
    _plot(cfg, "line_plot", out / "steady.png", [(full.x, full.values, f"nu = {ss.nu:.5g}")],
          "x", "rho", f"{cfg.kernel}, m = {cfg.m:g}, L = {ss.L:.4g}")
    return _steady_anchors(ss)


def _cmd_bessel(cfg, out, data_file):
    m, nubar = cfg.m, cfg.get("nubar")
    cs, vals = scan_fixed_point(nubar, m, cfg.get("n_scan"))
    write_csv(out / "scan.csv", {"Cbar": cs, "I": vals + cs}, {"m": m, "nubar": nubar})
    ss = solve_bessel_steady(nubar, m, cfg.get("n_cells"))
    _write_steady(data_file or out / "steady.csv", ss, {"nubar": nubar})
    _plot(cfg, "scan_plot", out / "scan.png", {f"nubar = {nubar:g}": (cs, vals + cs)},
          f"m = {m:g}")
    full = ss.full()
    _plot(cfg, "line_plot", out / "steady.png", [(full.x, full.values, f"nu = {ss.nu:.5g}")],
          "x", "rho", f"bessel, m = {m:g}")
    Cbar = ss.history[0][1]
    res = abs(bessel_trajectory(BesselShoot(1.0, Cbar, nubar, m)).I - Cbar)
    return [Anchor("fixed point |I(Cbar) - Cbar|", res, "< 1e-10", res < 1e-10),
            Anchor("unit mass", ss.mass(), "1 within 1e-6", abs(ss.mass() - 1) < 1e-6)]


def _cmd_limit(cfg, out, data_file):
    lim = gaussian_limit(cfg.m) if cfg.kernel == "gaussian" else bessel_limit(cfg.m)
    hw = cfg.get("half_width")
    x = np.linspace(-hw, hw, cfg.get("n_points"))
    write_csv(data_file or out / "limit.csv", {"x": x, "rho": lim(x)},
              {"kernel": cfg.kernel, "m": cfg.m, "nu_inf": repr(lim.nu_inf)})
    _plot(cfg, "line_plot", out / "limit.png", [(x, lim(x), f"nu_inf = {lim.nu_inf:.6g}")],
          "x", "rho", f"{cfg.kernel} limit profile, m = {cfg.m:g}")
    from scipy.integrate import quad

    mass = 2 * quad(lim.profile, 0, np.inf, limit=200)[0]
    return [Anchor("limit profile mass", mass, "1 within 1e-8", abs(mass - 1) < 1e-8)]


def _evolve_outputs(cfg, out, traj, label="", m=None, nu=None, kernel=None, thresholds=None):
    """snapshots, energy, events CSVs (+ figures) for one trajectory."""
    thresholds = thresholds or {}
    rep = traj.report
    analysis = detect_plateaus(rep, **thresholds)
    grid = traj.final.grid
    cols = {"x": grid.midpoints}
    for s in traj.snapshots:
        cols[f"t={s.t:g}"] = s.rho_bar
    write_csv(out / f"{label}snapshots.csv", cols, {"m": m, "nu": nu, "kernel": kernel})
    write_csv(out / f"{label}energy.csv",
              {"t": rep.times, "E": rep.energy, "dEdt": rep.dissipation, "mass": rep.mass,
               "max_rho": rep.max_rho}, {"steps": traj.steps, "rejected": traj.rejected,
                                         "energy_violations": traj.energy_violations})
    ev = np.array(analysis.mergers, dtype=float).reshape(-1, 2)
    write_csv(out / f"{label}events.csv", {"t": ev[:, 0], "drop": ev[:, 1]},
              {"plateaus": len(analysis.plateaus), "transient_end": analysis.transient_end})
    _plot(cfg, "snapshot_plot", out / f"{label}snapshots.png", grid.midpoints,
          [(s.t, s.rho_bar) for s in traj.snapshots])
    _plot(cfg, "energy_plot", out / f"{label}energy.png", rep.times, rep.energy,
          rep.dissipation, analysis.mergers)
    drift = abs(rep.mass[-1] - rep.mass[0]) / max(rep.times[-1] - rep.times[0], 1e-300)
    anchors = [
        Anchor(f"{label}mass drift per unit time", drift, "<= 1e-12", drift <= 1e-12),
        Anchor(f"{label}energy increases", traj.energy_violations, "0",
               traj.energy_violations == 0),
        Anchor(f"{label}min density", float(min(s.rho_bar.min() for s in traj.snapshots + [traj.final])),
               ">= 0", all(s.rho_bar.min() >= 0 for s in traj.snapshots + [traj.final])),
    ]
    return analysis, anchors


def _cmd_evolve(cfg, out, data_file):
    p = cfg.params
    grid = Grid.symmetric(p["half_width"], p["n_cells"])
    if p["init"] == "random":
        init = random_initial_density(cfg.seed, p["coarse_n"], p["envelope_sigma"], grid)
    elif p["init"] == "gaussian":
        init = gaussian_density(grid, p["sigma2"])
    else:
        init = FVState(grid, Barenblatt(cfg.m, cfg.nu).cell_averages(grid, 0.0), 0.0)
    snaps = p["snapshots"] or list(np.linspace(0, p["t_end"], 6))
    traj = evolve(init, cfg.kernel, cfg.m, cfg.nu, SchemeConfig(cfl=p["cfl"]),
                  t_end=p["t_end"], snapshot_times=snaps, energy_every=p["energy_every"])
    thresholds = {"flat_threshold": p["flat_threshold"], "drop_threshold": p["drop_threshold"]}
    analysis, anchors = _evolve_outputs(cfg, out, traj, m=cfg.m, nu=cfg.nu, kernel=cfg.kernel,
                                        thresholds=thresholds)
    log.info("%d steps, %d mergers detected", traj.steps, analysis.n_mergers)
    return anchors


def _cmd_particles(cfg, out, data_file):
    from scipy.stats import norm

    p = cfg.params
    law = RepulsionLaw(cfg.nu, cfg.m)
    state = quantile_particles(lambda s: norm.ppf(s, scale=np.sqrt(p["sigma2"])), p["n"])
    snaps = p["snapshots"] or list(np.linspace(0, p["t_end"], 11))
    traj = evolve_particles(state, cfg.kernel, law, p["t_end"], dt=p["dt"],
                            snapshot_times=snaps, method=p["method"])
    X = np.array(traj.positions)
    cols = {"t": np.array(traj.times)}
    for i in range(X.shape[1]):
        cols[f"X{i + 1}"] = X[:, i]
    write_csv(data_file or out / "particles.csv", cols,
              {"kernel": cfg.kernel, "m": cfg.m, "nu": cfg.nu, "N": p["n"]})
    write_csv(out / "particle_energy.csv", {"t": traj.energy_times, "E": traj.energy})
    fin = traj.final
    hw = 1.5 * float(np.max(np.abs(fin.positions - fin.center_of_mass())))
    grid = Grid.symmetric(hw, 600)
    from .particles import ParticleState

    dens = empirical_density(ParticleState(fin.positions - fin.center_of_mass()), grid, m=cfg.m)
    write_csv(out / "density.csv", {"x": dens.x, "rho": dens.values}, {"t": fin.t})
    _plot(cfg, "line_plot", out / "density.png", [(dens.x, dens.values, f"t = {fin.t:g}")],
          "x", "rho", f"empirical density, N = {p['n']}")
    _plot(cfg, "line_plot", out / "particle_energy.png",
          [(traj.energy_times, traj.energy, "E_N")], "t", "E_N")
    return [Anchor("particle energy nonincreasing", float(np.max(np.diff(traj.energy), initial=0)),
                   "<= 1e-9 |E|", traj.energy_nonincreasing())]


def _cmd_sweep(cfg, out, data_file):
    from .cli import worker_count

    p = cfg.params
    workers = worker_count(p.get("workers"))
    L_list = sorted(p["L_list"])
    cols = {"L": np.array(L_list)}
    table = nu_table(cfg.kernel, p["m_list"], L_list, p["cells_per_unit"], workers)
    for m in p["m_list"]:
        cols[f"nu_m{m:g}"] = table[m]
    write_csv(data_file or out / "sweep.csv", cols, {"kernel": cfg.kernel, "workers": workers})
    _plot(cfg, "line_plot", out / "sweep.png",
          [(cols["L"], v, k) for k, v in cols.items() if k != "L"], "L", "nu", markers=True)
    return [Anchor("failed solves", float(sum(np.isnan(v).sum() for k, v in cols.items())),
                   "0", not any(np.isnan(v).any() for v in cols.values()))]


# ---------------------------------------------------------------- presets

def _cmd_preset(cfg, out, data_file):
    name = cfg.params["name"]
    quick = bool(cfg.params.get("quick"))
    return PRESETS[name](cfg, out, quick)


def _fig1(cfg, out, quick):
    """nu(L), gaussian kernel, several m."""
    from .cli import worker_count

    ms = [1.5, 2.0, 2.5, 3.0] if quick else [1.5, 1.8, 2.0, 2.2, 2.5, 3.0]
    Ls = [1, 2, 3, 4] if quick else [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
    cpu = 20 if quick else 80
    cols = {"L": np.array(Ls, dtype=float)}
    workers = worker_count()
    table = nu_table("gaussian", ms, Ls, cpu, workers)
    for m in ms:
        cols[f"nu_m{m:g}"] = table[m]
    write_csv(out / "nu_of_L.csv", cols, {"kernel": "gaussian", "cells_per_unit": cpu,
                                          "workers": workers})
    _plot(cfg, "line_plot", out / "nu_of_L.png",
          [(cols["L"], v, k.replace("nu_", "")) for k, v in cols.items() if k != "L"],
          "L", "nu", "nu(L), gaussian kernel", markers=True)
    nu2 = cols["nu_m2"][-1]
    nu15 = cols["nu_m1.5"]
    inf15 = gaussian_limit(1.5).nu_inf
    return [
        Anchor(f"m=2, nu(L={Ls[-1]}) vs |G|_1 = 1", nu2, "within 3%", abs(nu2 - 1) <= 0.03),
        Anchor("m=1.5, nu(L) increasing towards nu_inf", float(inf15 - nu15[-1]),
               "gap > 0 and shrinking", bool(np.all(np.diff(nu15) > 0) and nu15[-1] < inf15)),
        Anchor("m=3, nu(L) increasing", float(cols["nu_m3"][-1]), "monotone",
               bool(np.all(np.diff(cols["nu_m3"]) > 0))),
    ]


def _fig2(cfg, out, quick):
    """Steady profiles for m = 2.2 and m = 1.5 at L = 1..5."""
    n = 200 if quick else 800
    anchors = []
    for m in (2.2, 1.5):
        cols, nus = {}, {}
        curves = []
        for L in (1, 2, 3, 4, 5):
            ss = solve_steady("gaussian", m, L, n)
            xs = np.linspace(-5, 5, 1001)
            cols.setdefault("x", xs)
            cols[f"rho_L{L}"] = ss(xs)
            nus[f"nu_L{L}"] = repr(ss.nu)
            curves.append((xs, ss(xs), f"L = {L}, nu = {ss.nu:.4f}"))
        if m == 1.5:
            lim = gaussian_limit(m)
            cols["rho_inf"] = lim(cols["x"])
            curves.append((cols["x"], cols["rho_inf"], "rho_inf"))
            anchors.append(Anchor("m=1.5, L=5: nu", float(nus["nu_L5"]), "0.4459 +- 0.005",
                                  abs(float(nus["nu_L5"]) - 0.4459) <= 0.005))
            gap = float(np.max(np.abs(cols["rho_L5"] - cols["rho_inf"])))
            anchors.append(Anchor("m=1.5, L=5: sup |rho - rho_inf|", gap, "< 1e-2", gap < 1e-2))
        write_csv(out / f"profiles_m{m:g}.csv", cols, {"kernel": "gaussian", "m": m, **nus})
        _plot(cfg, "line_plot", out / f"profiles_m{m:g}.png", curves, "x", "rho",
              f"gaussian kernel, m = {m:g}")
    return anchors


def _fig3(cfg, out, quick):
    """Metastable coarsening, m = 4, nu = 0.6, bessel kernel."""
    sc = MetastabilityScenario()
    if quick:
        sc = MetastabilityScenario(n_cells=300, t_end=60.0, snapshots=(0, 20, 40, 60))
    res = run_metastability(sc)
    write_manifest(out, {**cfg.manifest(), **{f"scenario.{k}": v for k, v in asdict(sc).items()}})
    analysis, anchors = _evolve_outputs(cfg, out, res.trajectory, m=sc.m, nu=sc.nu,
                                        kernel=sc.kernel,
                                        thresholds={"flat_threshold": sc.flat_threshold,
                                                    "drop_threshold": sc.drop_threshold})
    grid = res.trajectory.final.grid
    cols = {"x": grid.midpoints}
    for s in res.trajectory.snapshots:
        cols[f"t={s.t:g}"] = variation(s.as_function(), sc.kernel, sc.m, sc.nu).values
    write_csv(out / "variation.csv", cols, {"m": sc.m, "nu": sc.nu})
    worst = max((d for _, comps in res.clump_checks for *_, d in comps), default=float("nan"))
    anchors += [
        Anchor("merger events", analysis.n_mergers, ">= 2", analysis.n_mergers >= 2),
        Anchor("plateaus", len(analysis.plateaus), "= mergers + 1",
               len(analysis.plateaus) == analysis.n_mergers + 1),
        Anchor("final profile vs steady state (sup, cell centres)", res.final_distance,
               "<= 1e-2", res.final_distance <= 1e-2),
        Anchor("final profile vs steady state (sup, cell averages)", res.final_distance_cells,
               "reported", True),
        Anchor("max in-clump spread of dE/drho on plateaus", worst, "<= 1e-3",
               bool(worst <= 1e-3)),
    ]
    return anchors


def _fig4(cfg, out, quick):
    """Bessel kernel, m = 3: I(Cbar) scans and nu(L) from the fixed points."""
    m = 3.0
    n_scan = 30 if quick else 100
    scans = {}
    rows = []
    for nubar in (0.1, 0.2, 0.3, 0.4):
        cs, vals = scan_fixed_point(nubar, m, n_scan)
        scans[f"nubar = {nubar:g}"] = (cs, vals + cs)
        rows += [(nubar, c, v + c) for c, v in zip(cs, vals)]
    arr = np.array(rows)
    write_csv(out / "I_of_C.csv", {"nubar": arr[:, 0], "Cbar": arr[:, 1], "I": arr[:, 2]},
              {"m": m})
    _plot(cfg, "scan_plot", out / "I_of_C.png", scans, "m = 3")
    nubars = np.linspace(0.05, 0.6, 6 if quick else 24)
    Ls, nus = [], []
    for nb in nubars:
        Cbar = bessel_fixed_point(nb, m, n_scan)
        traj = bessel_trajectory(BesselShoot(1.0, Cbar, nb, m))
        mass = 2 * traj.half_mass
        Ls.append(traj.L)
        nus.append(nb * mass ** (m - 2))
    write_csv(out / "nu_of_L.csv", {"nubar": nubars, "L": np.array(Ls), "nu": np.array(nus)},
              {"kernel": "bessel", "m": m})
    _plot(cfg, "line_plot", out / "nu_of_L.png", [(Ls, nus, "fixed point + rescaling")],
          "L", "nu", "bessel kernel, m = 3", markers=True)
    ref = solve_bessel_steady(0.3, m, 400 if quick else 1600)
    it = solve_steady("bessel", m, ref.L, ref.grid.n_cells)
    rel = abs(it.nu - ref.nu) / ref.nu
    sup = float(np.max(np.abs(it.rho - ref.rho)))
    return [
        Anchor("nu(L) increasing", float(np.min(np.diff(nus))), "> 0",
               bool(np.all(np.diff(nus) > 0))),
        Anchor("nubar=0.3: iterative vs ODE nu (relative)", rel, "<= 5e-3", rel <= 5e-3),
        Anchor("nubar=0.3: iterative vs ODE profile (sup)", sup, "<= 1e-3", sup <= 1e-3),
    ]


def _basin_pair(quick):
    if quick:
        return (BasinScenario(sigma2=30.0, half_width=40.0, n_cells=200, t_end=20.0,
                              snapshots=(0, 10, 20)),
                BasinScenario(sigma2=50.0, half_width=60.0, n_cells=300, t_end=20.0,
                              snapshots=(0, 10, 20)))
    return (BasinScenario(sigma2=30.0, half_width=40.0, n_cells=800),
            BasinScenario(sigma2=50.0, half_width=60.0, n_cells=1200,
                          snapshots=(0, 10, 50, 100, 200, 300, 400, 450, 500)))


def _fig5(cfg, out, quick):
    """m = 1.8, nu = 0.6 < nu_inf: two Gaussian data, two outcomes."""
    a, b = _basin_pair(quick)
    steady = basin_steady(a)
    ra, rb = run_basin(a, steady), run_basin(b, steady)
    anchors = []
    for label, r in (("sigma2=30_", ra), ("sigma2=50_", rb)):
        _, an = _evolve_outputs(cfg, out, r.trajectory, label, a.m, a.nu, a.kernel)
        anchors += an
    mx = rb.trajectory.report.max_rho
    Efin = float(ra.trajectory.report.energy[-1])
    anchors += [
        Anchor("sigma2=30: sup distance to the steady state", ra.final_distance, "<= 2e-2",
               ra.final_distance <= 2e-2),
        Anchor("sigma2=30: same, against cell averages", ra.final_distance_cells, "reported",
               True),
        Anchor("sigma2=30: final energy", Efin, "> 0", Efin > 0),
        Anchor("sigma2=50: max rho(t_end) / max rho(0)", rb.max_rho[1] / rb.max_rho[0],
               "< 0.5 and still decreasing",
               rb.max_rho[1] < 0.5 * rb.max_rho[0] and mx[-1] < mx[-2]),
    ]
    return anchors


def _fig6(cfg, out, quick):
    """Energies of the two m = 1.8 runs and Barenblatt rescaling of the spreading one."""
    a, b = _basin_pair(quick)
    steady = basin_steady(a)
    ra, rb = run_basin(a, steady), run_basin(b, steady)
    ta, tb = ra.trajectory.report, rb.trajectory.report
    write_csv(out / "energy_sigma2=30.csv", {"t": ta.times, "E": ta.energy})
    write_csv(out / "energy_sigma2=50.csv", {"t": tb.times, "E": tb.energy})
    _plot(cfg, "line_plot", out / "energy.png",
          [(ta.times, ta.energy, "sigma2 = 30"), (tb.times, tb.energy, "sigma2 = 50")],
          "t", "E", "energy")
    dists = barenblatt_distances(rb.trajectory, b.m, b.nu)
    curves = []
    cols = {}
    ref = Barenblatt(b.m, b.nu)
    xt = np.linspace(-20, 20, 801)
    cols["x"] = xt
    for snap in rb.trajectory.snapshots:
        r = rescale_barenblatt(snap.as_function())
        vals = np.interp(xt, r.x, r.values, left=0.0, right=0.0)
        cols[f"t={snap.t:g}"] = vals
        curves.append((xt, vals, f"t = {snap.t:g}"))
    cols["barenblatt"] = ref.rescaled(xt)
    curves.append((xt, cols["barenblatt"], "Barenblatt"))
    write_csv(out / "rescaled.csv", cols, {"m": b.m, "nu": b.nu})
    d = np.array(dists)
    write_csv(out / "barenblatt_distance.csv", {"t": d[:, 0], "sup_distance": d[:, 1]})
    _plot(cfg, "line_plot", out / "rescaled.png", curves, "x~", "rho~",
          "rescaled spreading solution")
    late = d[1:, 1]
    return [
        Anchor("rescaled distance to Barenblatt decreasing", float(late[-1]),
               "monotone after t=0", bool(np.all(np.diff(late) <= 0))),
        Anchor("sigma2=50 energy tends to 0", float(tb.energy[-1]), "|E| < |E(0)|",
               abs(tb.energy[-1]) < abs(tb.energy[0])),
    ]


PRESETS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5,
           "fig6": _fig6}
