"""Experiment harness: configuration, convergence runs, fits, cross-checks.

Everything an experiment produces is derived from one ExperimentConfig, is
bitwise reproducible (no timestamps, no threading, fixed summation orders),
and lands in two files: a CSV of per-(N, t) records and a JSON manifest
carrying the config hash, library versions and diagnostic outcomes.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bogoliubov as bg
from . import combinatorics as comb_mod
from . import fock as fk
from . import hartree as ha
from . import nbody as nb
from .grid import GridSpec, PotentialSpec, gaussian_packet, sample_potential, sech_packet


class ConfigError(ValueError):
    pass


def _take(d: dict, allowed: dict, where: str) -> dict:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")
    out = dict(allowed)
    out.update(d)
    return out


@dataclass(frozen=True)
class InitialStateConfig:
    profile: str = "gaussian"
    center: float = 8.0
    width: float = 1.0
    momentum: float = 0.0

    def build(self, grid: GridSpec) -> np.ndarray:
        if self.profile == "gaussian":
            return gaussian_packet(grid, self.center, self.width, self.momentum)
        if self.profile == "sech":
            return sech_packet(grid, self.center, self.width)
        raise ConfigError(f"unknown initial profile {self.profile!r}")


@dataclass(frozen=True)
class FockSectionConfig:
    sites: int = 4
    length: float = 4.0
    cutoff: int = 13
    cutoff_step: int = 2
    dt: float = 1e-3
    coupling_values: tuple = (8, 16, 32, 64)
    residual_time: float = 0.5
    identity_times: tuple = (0.25, 0.5, 1.0)
    initial_state: InitialStateConfig = field(
        default_factory=lambda: InitialStateConfig(center=1.7, width=0.8)
    )


@dataclass(frozen=True)
class ToleranceConfig:
    mass_drift: float = 1e-10
    energy_drift: float = 1e-6
    sym_defect: float = 1e-9
    boundary_mass: float = 1e-4
    leakage: float = 1e-6
    identity_match: float = 1e-4
    cutoff_agreement: float = 1e-4
    defect: float = 1e-6
    rate_band: tuple = (-1.35, -0.75)
    r_squared_min: float = 0.98


@dataclass(frozen=True)
class ExperimentConfig:
    grid_points: int = 16
    grid_length: float = 16.0
    potential: PotentialSpec = field(default_factory=lambda: PotentialSpec("gaussian", 0.5, 1.0))
    initial_state: InitialStateConfig = field(default_factory=InitialStateConfig)
    particle_counts: tuple = (2, 3, 4, 5, 6)
    horizon: float = 1.0
    dt: float = 1e-3
    nbody_dt: float = 4e-3
    sample_times: tuple = (0.5, 1.0)
    fock: FockSectionConfig = field(default_factory=FockSectionConfig)
    combinatorics_counts: tuple = (4, 16, 64, 256, 1024)
    krasikov_grid: tuple = (10, 50, 200)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    seed: int = 0

    def grid(self) -> GridSpec:
        return GridSpec(self.grid_points, self.grid_length)

    def fock_grid(self) -> GridSpec:
        return GridSpec(self.fock.sites, self.fock.length)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        top = _take(
            raw,
            {
                "grid": {},
                "potential": {},
                "initial_state": {},
                "particle_counts": list(ExperimentConfig.particle_counts),
                "time": {},
                "fock": {},
                "combinatorics": {},
                "tolerances": {},
                "seed": 0,
            },
            "config",
        )
        g = _take(top["grid"], {"points": 16, "length": 16.0}, "grid")
        pot = _take(
            top["potential"],
            {"kind": "gaussian", "amplitude": 0.5, "width": 1.0, "harmonic": 1, "softening": 1.0},
            "potential",
        )
        ini = _take(
            top["initial_state"],
            {"profile": "gaussian", "center": 8.0, "width": 1.0, "momentum": 0.0},
            "initial_state",
        )
        tm = _take(
            top["time"],
            {"horizon": 1.0, "dt": 1e-3, "nbody_dt": 4e-3, "sample_times": [0.5, 1.0]},
            "time",
        )
        fsec = _take(
            top["fock"],
            {
                "sites": 4,
                "length": 4.0,
                "cutoff": 13,
                "cutoff_step": 2,
                "dt": 1e-3,
                "coupling_values": [8, 16, 32, 64],
                "residual_time": 0.5,
                "identity_times": [0.25, 0.5, 1.0],
                "initial_state": {},
            },
            "fock",
        )
        fini = _take(
            fsec["initial_state"],
            {"profile": "gaussian", "center": 1.7, "width": 0.8, "momentum": 0.0},
            "fock.initial_state",
        )
        cb = _take(
            top["combinatorics"],
            {"counts": list(ExperimentConfig.combinatorics_counts), "krasikov_grid": [10, 50, 200]},
            "combinatorics",
        )
        defaults = ToleranceConfig()
        tol = _take(top["tolerances"], asdict(defaults), "tolerances")
        tol["rate_band"] = tuple(tol["rate_band"])
        return ExperimentConfig(
            grid_points=int(g["points"]),
            grid_length=float(g["length"]),
            potential=PotentialSpec(
                pot["kind"],
                float(pot["amplitude"]),
                float(pot["width"]),
                int(pot["harmonic"]),
                float(pot["softening"]),
            ),
            initial_state=InitialStateConfig(
                ini["profile"], float(ini["center"]), float(ini["width"]), float(ini["momentum"])
            ),
            particle_counts=tuple(int(n) for n in top["particle_counts"]),
            horizon=float(tm["horizon"]),
            dt=float(tm["dt"]),
            nbody_dt=float(tm["nbody_dt"]),
            sample_times=tuple(float(t) for t in tm["sample_times"]),
            fock=FockSectionConfig(
                sites=int(fsec["sites"]),
                length=float(fsec["length"]),
                cutoff=int(fsec["cutoff"]),
                cutoff_step=int(fsec["cutoff_step"]),
                dt=float(fsec["dt"]),
                coupling_values=tuple(int(n) for n in fsec["coupling_values"]),
                residual_time=float(fsec["residual_time"]),
                identity_times=tuple(float(t) for t in fsec["identity_times"]),
                initial_state=InitialStateConfig(
                    fini["profile"], float(fini["center"]), float(fini["width"]), float(fini["momentum"])
                ),
            ),
            combinatorics_counts=tuple(int(n) for n in cb["counts"]),
            krasikov_grid=tuple(int(n) for n in cb["krasikov_grid"]),
            tolerances=ToleranceConfig(**tol),
            seed=int(top["seed"]),
        )

    @staticmethod
    def from_json(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


# ---------------------------------------------------------------------------
# records and fits

RECORD_COLUMNS = (
    "N",
    "t",
    "trace_err",
    "hs_err",
    "e2_norm",
    "e_minus_e2_norm",
    "energy_drift",
    "sym_defect",
    "boundary_mass",
)


@dataclass
class RunRecord:
    N: int
    t: float
    trace_err: float
    hs_err: float
    e2_norm: float
    e_minus_e2_norm: float
    energy_drift: float
    sym_defect: float
    boundary_mass: float

    def row(self) -> str:
        vals = [str(self.N)] + [repr(float(getattr(self, c))) for c in RECORD_COLUMNS[1:]]
        return ",".join(vals)


def save_records(records, path):
    lines = [",".join(RECORD_COLUMNS)]
    lines.extend(r.row() for r in records)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_records(path) -> list[RunRecord]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines[0] != ",".join(RECORD_COLUMNS):
        raise ValueError(f"unexpected header in {path}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        out.append(RunRecord(int(parts[0]), *(float(p) for p in parts[1:])))
    return out


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_rate(points) -> RateFit:
    """Least-squares fit of ln(value) against ln(N).

    ``points`` is a sequence of (N, value) pairs with positive values.
    """
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a rate")
    if any(v <= 0 for _, v in pts):
        raise ValueError("rate fit needs positive values")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    pred = a @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(coef[0]), float(coef[1]), r2, len(pts))


def records_for_fit(records, t, column="trace_err"):
    sel = [(r.N, getattr(r, column)) for r in records if abs(r.t - t) < 1e-9]
    return sorted(sel)


# ---------------------------------------------------------------------------
# convergence run


@dataclass
class ConvergenceRun:
    config: ExperimentConfig
    records: list
    diagnostics: dict
    fits: dict


def run_convergence(config: ExperimentConfig, quiet: bool = True) -> ConvergenceRun:
    """Full pipeline: Hartree, Bogoliubov correction, exact N-body sweep."""
    grid = config.grid()
    vsamp = sample_potential(config.potential, grid)
    phi0 = config.initial_state.build(grid)
    sample_times = tuple(sorted(config.sample_times))
    if not sample_times:
        raise ConfigError("need at least one sample time")
    if sample_times[-1] > config.horizon + 1e-9:
        raise ConfigError("sample times must lie within the horizon")

    traj = ha.evolve_hartree(phi0, vsamp, grid, config.horizon, config.dt)
    _, pair_snaps = bg.evolve_pair(grid, vsamp, traj, config.horizon, config.dt, sample_times)

    records = []
    worst = {"mass_drift": 0.0, "sym_defect": 0.0, "boundary_mass": 0.0, "energy_drift": 0.0}
    for n in config.particle_counts:
        if not quiet:
            print(f"[nbody] N={n}", file=sys.stderr)
        state = nb.product_state(phi0, n, grid)
        e0 = nb.nbody_energy(state, vsamp)
        prev_t = 0.0
        for ts in sample_times:
            state, _ = nb.evolve_nbody(state, vsamp, ts - prev_t, config.nbody_dt)
            prev_t = ts
            gamma = nb.reduce_marginal(state, 1) if n > 1 else nb.MarginalDensity(
                grid, 1, np.outer(state.psi, state.psi.conj()), state.t
            )
            phi_t = traj.state_at(ts)
            proj = nb.projection_marginal(phi_t, grid, ts)
            corr = bg.correction_kernel(pair_snaps[ts], phi0, phi_t, n)
            e_mat = gamma.matrix - proj.matrix
            rec = RunRecord(
                N=n,
                t=ts,
                trace_err=nb.trace_distance(gamma, proj),
                hs_err=nb.hs_distance(gamma, proj),
                e2_norm=corr.norm(),
                e_minus_e2_norm=float(np.linalg.norm(e_mat - corr.matrix) * grid.dx),
                energy_drift=abs(nb.nbody_energy(state, vsamp) - e0),
                sym_defect=nb.symmetry_defect(state),
                boundary_mass=nb.marginal_boundary_mass(gamma),
            )
            records.append(rec)
            worst["mass_drift"] = max(worst["mass_drift"], abs(state.norm() ** 2 - 1.0))
            worst["sym_defect"] = max(worst["sym_defect"], rec.sym_defect)
            worst["boundary_mass"] = max(worst["boundary_mass"], rec.boundary_mass)
            worst["energy_drift"] = max(worst["energy_drift"], rec.energy_drift)

    tol = config.tolerances
    diagnostics = {
        "worst": worst,
        "ok": {
            "mass_drift": worst["mass_drift"] <= tol.mass_drift,
            "sym_defect": worst["sym_defect"] <= tol.sym_defect,
            "boundary_mass": worst["boundary_mass"] <= tol.boundary_mass,
        },
    }

    fits = {}
    if len(config.particle_counts) >= 2:
        for ts in sample_times:
            fit = fit_rate(records_for_fit(records, ts))
            fits[repr(float(ts))] = asdict(fit)
    return ConvergenceRun(config, records, diagnostics, fits)


def library_versions() -> dict:
    import scipy

    from . import __version__

    return {
        "python": ".".join(str(p) for p in sys.version_info[:3]),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "meanfieldlab": __version__,
    }


def save_manifest(run: ConvergenceRun, path, extra: dict | None = None):
    manifest = {
        "config": run.config.to_dict(),
        "config_hash": run.config.config_hash(),
        "versions": library_versions(),
        "n_records": len(run.records),
        "diagnostics": run.diagnostics,
        "rate_fits": run.fits,
    }
    if extra:
        manifest.update(extra)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=list)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Fock cross-validation


@dataclass
class CheckItem:
    name: str
    status: str  # pass | fail | inconclusive
    measured: float
    threshold: float
    details: dict = field(default_factory=dict)


@dataclass
class CrossValidationReport:
    items: list
    status: str

    def to_dict(self) -> dict:
        return {"status": self.status, "items": [asdict(i) for i in self.items]}


def _status_rank(s: str) -> int:
    return {"pass": 0, "inconclusive": 1, "fail": 2}[s]


def _lattice_observables(
    config: ExperimentConfig, cutoff: int, couplings=None, column_sites=None
) -> dict:
    """Everything the cross checks need from one Fock engine at one cutoff.

    A full battery runs every coupling value and every lattice site; the
    cutoff-sweep rerun restricts both to the most exposed cases through
    ``couplings`` and ``column_sites``.  Shared work is hoisted: one
    quadratic evolution serves the depletion identity, the parity monitor,
    and the kernel columns, its site backs serve every residual, and each
    coupling gets a single full evolution whose final state carries the
    number moment and whose midpoint snapshot seeds the residual battery.
    """
    fsec = config.fock
    if couplings is None:
        couplings = fsec.coupling_values
    grid = config.fock_grid()
    vsamp = sample_potential(config.potential, grid)
    phi0 = fsec.initial_state.build(grid)
    horizon = max(max(fsec.identity_times), fsec.residual_time, 1.0)
    traj = ha.evolve_hartree(phi0, vsamp, grid, horizon, fsec.dt)
    _, pair_snaps = bg.evolve_pair(grid, vsamp, traj, horizon, fsec.dt, fsec.identity_times)

    space = fk.LatticeFockSpace(grid, cutoff)
    gens = fk.GeneratorSet(space, vsamp)

    out = {"cutoff": cutoff, "leakage": 0.0}

    # quadratic evolution: depletion identity, parity, kernel columns
    snap_times = tuple(sorted(set(fsec.identity_times) | {fsec.residual_time}))
    quad = fk.evolve_fock(
        gens, fk.vacuum(space), traj, 0.0, horizon, fsec.dt, "quadratic", 1.0, snap_times
    )
    out["leakage"] = max(out["leakage"], quad.top_mass)
    out["parity_odd"] = max(fk.odd_sector_mass(s) for s in quad.snapshots.values())
    out["identity"] = {}
    for ts in fsec.identity_times:
        out["identity"][ts] = {
            "depletion": bg.depletion(pair_snaps[ts]),
            "moment": fk.number_moment(quad.snapshots[ts], 1),
        }

    # kernel columns against back-evolved annihilators at the last identity time
    t_k = max(fsec.identity_times)
    pair_t = pair_snaps[t_k]
    sites = tuple(range(grid.points)) if column_sites is None else tuple(column_sites)
    col_backs, col_top = fk.site_backs(
        gens, traj, quad.snapshots[t_k], t_k, fsec.dt, "quadratic", 1.0, sites
    )
    out["leakage"] = max(out["leakage"], col_top)
    out["column_errs"] = {}
    for site, back in zip(sites, col_backs):
        got = fk.one_particle_values(back)
        want = pair_t.v[site]
        out["column_errs"][site] = float(np.sqrt(np.sum(np.abs(got - want) ** 2) * grid.dx))
    out["kernel_column_err"] = max(out["column_errs"].values())

    # shared quadratic site backs for every residual battery
    quad_backs, qb_top = fk.site_backs(
        gens, traj, quad.snapshots[fsec.residual_time], fsec.residual_time, fsec.dt, "quadratic", 1.0
    )
    out["leakage"] = max(out["leakage"], qb_top)

    # full evolution per coupling value: number moments and residual aggregates
    out["moments"] = {}
    out["residual"] = {}
    for n in couplings:
        full = fk.evolve_fock(
            gens, fk.vacuum(space), traj, 0.0, horizon, fsec.dt, "full", n, (fsec.residual_time,)
        )
        out["leakage"] = max(out["leakage"], full.top_mass)
        out["moments"][n] = fk.number_moment(full.state, 1)
        res = fk.annihilator_residual(
            gens,
            traj,
            fsec.residual_time,
            fsec.dt,
            n,
            forward_full=full.snapshots[fsec.residual_time],
            quad_parts=(quad_backs, qb_top),
        )
        out["leakage"] = max(out["leakage"], res.top_mass)
        out["residual"][n] = res.aggregates
    return out


def cross_validate(config: ExperimentConfig, quiet: bool = True) -> CrossValidationReport:
    """Engine-versus-kernel consistency battery with a cutoff sweep.

    The full battery runs at the configured cutoff.  The sweep rerun at
    cutoff + cutoff_step keeps the most exposed slice only: the smallest
    coupling value (strongest cubic and quartic parts) and the worst kernel
    column.  Each item carries a base/swept scalar pair; disagreement beyond
    the cutoff_agreement tolerance marks the item inconclusive rather than
    failed.
    """
    tol = config.tolerances
    fsec = config.fock
    lo = _lattice_observables(config, fsec.cutoff)
    if not quiet:
        print("[fock-check] base cutoff done", file=sys.stderr)
    n_probe = min(fsec.coupling_values)
    worst_site = max(lo["column_errs"], key=lo["column_errs"].get)
    hi = _lattice_observables(
        config, fsec.cutoff + fsec.cutoff_step, couplings=(n_probe,), column_sites=(worst_site,)
    )

    items: list[CheckItem] = []

    def add(name, measured, threshold, swept_pair=None, predicate=None):
        ok = (measured <= threshold) if predicate is None else predicate(measured)
        status = "pass" if ok else "fail"
        details = {}
        if swept_pair is not None:
            a, b = swept_pair
            agree = abs(a - b) <= tol.cutoff_agreement * (1.0 + abs(a))
            details = {"base": a, "swept": b}
            if not agree:
                status = "inconclusive"
        items.append(CheckItem(name, status, float(measured), float(threshold), details))

    # truncation leakage across every evolution involved
    add("leakage", lo["leakage"], tol.leakage, (lo["leakage"], hi["leakage"]))

    # depletion identity at each requested time
    for ts in fsec.identity_times:
        d = lo["identity"][ts]
        gap = abs(d["depletion"] - d["moment"])
        thr = tol.identity_match * (1.0 + d["depletion"])
        add(f"depletion_identity_t{ts}", gap, thr, (d["moment"], hi["identity"][ts]["moment"]))

    # v-kernel columns reproduced by the engine
    add(
        "kernel_columns",
        lo["kernel_column_err"],
        tol.identity_match,
        (lo["column_errs"][worst_site], hi["column_errs"][worst_site]),
    )

    # parity conservation of the quadratic flow
    add("parity_odd_mass", lo["parity_odd"], 1e-10, (lo["parity_odd"], hi["parity_odd"]))

    # number moments of the full flow stay order one across coupling values
    moments = [lo["moments"][n] for n in fsec.coupling_values]
    ratio = max(moments) / min(moments)
    add("moment_stability", ratio, 3.0, (lo["moments"][n_probe], hi["moments"][n_probe]))

    # residual aggregates halve when N doubles
    counts = sorted(fsec.coupling_values)
    res_pair = (lo["residual"][n_probe][1], hi["residual"][n_probe][1])
    for a, b in zip(counts, counts[1:]):
        if b != 2 * a:
            continue
        r_lo = lo["residual"][a][1] / lo["residual"][b][1]
        add(
            f"residual_ratio_{a}_to_{b}",
            r_lo,
            2.4,
            res_pair,
            predicate=lambda r: 1.6 <= r <= 2.4,
        )

    status = max((i.status for i in items), key=_status_rank, default="pass")
    return CrossValidationReport(items, status)
