"""Scenario orchestration, ratio bands and CSV/summary output."""
from __future__ import annotations

import csv
import json
import math
import os
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import envelopes as env
from . import mesh_solver as ms
from . import spectral as sp
from .config import ScenarioConfig, config_from_mapping
from .errors import COEError, ConfigError, EndHeatError, LengthMismatchError, NonPositiveError, NoDominatingEndError
from .volume_models import (
    OscillatingProfile,
    PowerLogProfile,
    ScheduleMode,
    check_h1_h2,
    compute_h_log,
    h2_at_a,
)

OUTPUT_ENV = "ENDHEAT_OUTPUT_DIR"
_HEADER = re.compile(r"^[A-Za-z0-9_]+:[A-Za-z0-9_.=+-]+$")


@dataclass
class RatioBand:
    """Pointwise quotients ``numeric / envelope`` summarized over a grid."""

    quantity: str
    min_ratio: float
    max_ratio: float
    spread: float
    n: int
    max_spread: float | None = None

    @property
    def passed(self) -> bool | None:
        return None if self.max_spread is None else bool(self.spread <= self.max_spread)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def ratio_fit(numeric, envelope, quantity: str = "", max_spread: float | None = None) -> RatioBand:
    """Min, max and spread of ``numeric / envelope``."""
    a = np.asarray(numeric, dtype=float).ravel()
    b = np.asarray(envelope, dtype=float).ravel()
    if a.shape != b.shape:
        raise LengthMismatchError(f"{len(a)} numeric values vs {len(b)} envelope values")
    if len(a) == 0:
        raise LengthMismatchError("empty series")
    if not (np.all(a > 0) and np.all(b > 0)):
        raise NonPositiveError("ratio bands need strictly positive series")
    q = a / b
    lo, hi = float(q.min()), float(q.max())
    return RatioBand(quantity, lo, hi, hi / lo, len(a), max_spread)


@dataclass
class PropertyCheck:
    name: str
    value: float | None
    passed: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    scenario: str
    bands: list = field(default_factory=list)
    properties: list = field(default_factory=list)
    records: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.error:
            return False
        return all(b.passed is not False for b in self.bands) and all(p.passed for p in self.properties)

    def band(self, quantity: str) -> RatioBand:
        for b in self.bands:
            if b.quantity == quantity:
                return b
        raise KeyError(quantity)

    def prop(self, name: str) -> PropertyCheck:
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "error": self.error,
            "bands": [b.to_dict() for b in self.bands],
            "properties": [asdict(p) for p in self.properties],
            "records": self.records,
            "files": self.files,
        }


# --- CSV ---------------------------------------------------------------------


def write_csv(path, first: str, values, columns: dict) -> None:
    """One row per ``values`` entry, floats with 17 significant digits."""
    if first not in ("t", "r", "n"):
        raise ValueError("first column must be t, r or n")
    for name in columns:
        if not _HEADER.match(name):
            raise ValueError(f"column header {name!r} is not '<quantity>:<id>'")
    values = np.asarray(values, dtype=float)
    cols = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
    for k, v in cols.items():
        if v.shape != values.shape:
            raise LengthMismatchError(f"column {k} has {len(v)} rows, expected {len(values)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([first, *cols])
        for i, x in enumerate(values):
            w.writerow(["%.17g" % x, *("%.17g" % cols[k][i] for k in cols)])


def read_csv(path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in row] for row in rows[1:]], dtype=float).reshape(len(rows) - 1, len(header))
    return header, data


def validate_csv(path) -> list:
    """Schema problems of a scenario CSV (empty list when valid)."""
    header, data = read_csv(path)
    problems = []
    if header[0] not in ("t", "r", "n"):
        problems.append(f"first column is {header[0]!r}")
    problems += [f"bad header {h!r}" for h in header[1:] if not _HEADER.match(h)]
    if len(data) and np.any(np.diff(data[:, 0]) < 0):
        problems.append("first column is not monotone")
    finite = data[np.isfinite(data)]
    if np.any(finite <= 0):
        problems.append("non-positive values")
    return problems


# --- helpers -----------------------------------------------------------------


def _mesh(cfg: ScenarioConfig, task: str):
    log_r_max = cfg.log_r_max
    if f"{task}.r_max" in cfg.raw:
        log_r_max = math.log(cfg.get_float(f"{task}.r_max"))
    npd = cfg.get_int(f"{task}.nodes_per_decade", cfg.nodes_per_decade)
    return ms.build_mesh(cfg.spec, math.exp(log_r_max), npd, r_min=cfg.r_min)


def _band(cfg, quantity, default=None):
    return cfg.bands.get(quantity, default)


def _loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def _table_formula(pairs, r):
    """Second-largest-end Poincare law from the lexicographic table."""
    order = env.lex_order(pairs)
    a2, b2 = pairs[order[1]]
    r = np.asarray(r, dtype=float)
    lr = np.log(r)
    if (a2, b2) > (2, 1):
        return r ** a2 * lr ** b2
    if (a2, b2) == (2, 1):
        return r * r * lr * np.log(lr) ** 2
    if a2 == 2:
        return r * r * lr
    return r * r


# --- tasks -------------------------------------------------------------------


def _task_p_oo(cfg, out, rep):
    mesh = _mesh(cfg, "p_oo")
    t = cfg.t_grid.values()
    p = ms.heat_kernel(mesh, 0, 0, t, fraction=cfg.fraction)
    cols = {"p_oo:numeric": p}
    classes = cfg.spec.classify(mesh.r_max)
    primary = None
    if not all(c.parabolic for c in classes):
        cols["p_oo:smallest_end"] = env.smallest_end_envelope(cfg.spec, t, r_max=mesh.r_max)
        primary = "p_oo:smallest_end"
    else:
        try:
            cols["p_oo:largest_end"] = env.largest_end_envelope(cfg.spec, t, r_max=mesh.r_max)
            primary = "p_oo:largest_end"
        except NoDominatingEndError as exc:
            rep.records["p_oo_dominating"] = str(exc)
    cols["p_oo:min_min"] = env.min_min_upper(cfg.spec, t)
    primary = primary or "p_oo:min_min"
    write_csv(out / "p_oo.csv", "t", t, cols)
    rep.files.append("p_oo.csv")
    rep.bands.append(ratio_fit(p, cols[primary], "p_oo", _band(cfg, "p_oo", 10.0)))
    rep.records["p_oo_envelope"] = primary
    rep.records["p_oo_power_slope"] = _loglog_slope(t, p)
    return mesh, t, p


def _probe_radii(t, mesh):
    s = math.sqrt(t)
    return sorted({min(max(v, mesh.r_min), mesh.r_max) for v in (2.0, s / 2.0, 2.0 * s)})


def _task_offdiag(cfg, out, rep):
    mesh = _mesh(cfg, "offdiag")
    if len(mesh.ends) < 2:
        raise EndHeatError("offdiag needs two ends")
    t = cfg.t_grid.values()
    poo = ms.heat_kernel(mesh, 0, 0, t, fraction=cfg.fraction)
    ioo = ms.heat_kernel_integral(mesh, 0, 0, t, fraction=cfg.fraction)
    rows = []
    for j, tj in enumerate(t):
        radii = _probe_radii(tj, mesh)
        ys = [mesh.node(1, r) for r in radii]
        exits_y = [ms.exit_components(mesh, 1, y, [tj], fraction=cfg.fraction) for y in ys]
        for rx in radii:
            x = mesh.node(0, rx)
            direct = ms.heat_kernel(mesh, x, np.array(ys), [tj], fraction=cfg.fraction)[0]
            px, dpx, _ = ms.exit_components(mesh, 0, x, [tj], fraction=cfg.fraction)
            for y, d, (py, dpy, _) in zip(ys, direct, exits_y):
                a = env.offdiag_assemble(0.0, poo[j], ioo[j], px[0], py[0], dpx[0], dpy[0])
                rows.append((tj, mesh.radius[x], mesh.radius[y], d, a))
    rows = np.array(rows)
    cols = {"x:abs": rows[:, 1], "y:abs": rows[:, 2], "p_xy:direct": rows[:, 3], "p_xy:assembled": rows[:, 4]}
    rep.bands.append(ratio_fit(rows[:, 3], rows[:, 4], "offdiag_assembled", _band(cfg, "offdiag_assembled", 20.0)))
    if cfg.get_bool("offdiag.regimes", False):
        labels = ("x_far", "both_near", "y_far")
        lab = np.array([env.offdiag_regimes_2_1(x, y, tt)[1] for tt, x, y in rows[:, :3]])

        def per_regime(b):
            vals = np.array([env.offdiag_regimes_2_1(x, y, tt, b)[0] for tt, x, y in rows[:, :3]])
            bands = [ratio_fit(rows[lab == l, 3], vals[lab == l], f"offdiag_{l}") for l in labels if np.any(lab == l)]
            return vals, bands

        # one Gaussian constant for all regimes, chosen to minimize the worst spread
        b_grid = np.geomspace(1.0 / 16.0, 1.0, 25)
        b_best = min(b_grid, key=lambda b: max(band.spread for band in per_regime(b)[1]))
        vals, bands = per_regime(b_best)
        for band in bands:
            band.max_spread = _band(cfg, "offdiag_regimes", 20.0)
            rep.bands.append(band)
        rep.records["offdiag_b_fitted"] = float(b_best)
        cols["p_xy:regimes_2_1"] = vals
        cols["regime:code"] = np.array([labels.index(l) + 1 for l in lab], dtype=float)
    write_csv(out / "offdiag.csv", "t", rows[:, 0], cols)
    rep.files.append("offdiag.csv")


def _task_bottleneck(cfg, out, rep):
    mesh = _mesh(cfg, "bottleneck")
    t = cfg.t_grid.values()
    prof = cfg.spec.profiles[0]
    n = cfg.get_float("bottleneck.n", prof.alpha if isinstance(prof, PowerLogProfile) else 2.0)
    p = np.empty(len(t))
    for j, tj in enumerate(t):
        s = math.sqrt(tj)
        x, y = mesh.node(0, s), mesh.node(1, s)
        p[j] = ms.heat_kernel(mesh, x, y, [tj], fraction=cfg.fraction)[0]
    scaled = p * t ** (n / 2.0)
    write_csv(out / "bottleneck.csv", "t", t, {"p_xy:numeric": p, "p_xy:scaled": scaled})
    rep.files.append("bottleneck.csv")
    dec = bool(np.all(np.diff(scaled) < 0))
    rep.properties.append(PropertyCheck("bottleneck_decreasing", float(np.max(np.diff(np.log(scaled)))), dec, "sup of log increments"))
    rep.records["bottleneck_slope"] = _loglog_slope(t, scaled)


def _task_poincare(cfg, out, rep):
    mesh = _mesh(cfg, "poincare")
    r = cfg.r_grid.values()
    lam = np.empty(len(r))
    rq_signed = np.empty(len(r))
    whit = np.empty(len(r))
    rand_worst = 0.0
    f_signed = sp.signed_end_function(mesh)
    rng = np.random.default_rng(cfg.get_int("seed", 0))
    for i, ri in enumerate(r):
        res = sp.poincare_constant(mesh, ri)
        lam[i] = res.poincare
        rq_signed[i] = sp.rayleigh_quotient(mesh, f_signed, ri)
        whit[i] = sp.whitney_shift_check(mesh, mesh.node(0, ri / 4.0), ri)
        for _ in range(10):
            f = rng.standard_normal(mesh.n_nodes)
            rand_worst = max(rand_worst, sp.rayleigh_quotient(mesh, f, ri) / res.poincare)
    coe_ok = True
    try:
        if any(c.parabolic for c in cfg.spec.classify(mesh.r_max)):
            dec = env.check_coe(cfg.spec, r_max=mesh.r_max)
            rep.records["coe"] = {"super": dec.I_super, "middle": dec.I_middle, "sub": dec.I_sub,
                                  "epsilon": dec.epsilon, "delta": dec.delta, "gamma1": dec.gamma1, "gamma2": dec.gamma2}
    except COEError as exc:
        coe_ok = False
        rep.records["coe"] = str(exc)
    envelope = env.poincare_envelope(cfg.spec, r, r_max=mesh.r_max, check=False)
    cols = {"poincare:numeric": lam, "poincare:envelope": envelope}
    if all(isinstance(p, PowerLogProfile) for p in cfg.spec.profiles):
        pairs = [(p.alpha, p.beta) for p in cfg.spec.profiles]
        table = _table_formula(pairs, r)
        cols["poincare:table"] = table
        rep.bands.append(ratio_fit(lam, table, "poincare_table", _band(cfg, "poincare_table")))
    cols["rayleigh:signed"] = rq_signed
    cols["whitney:ratio"] = whit
    write_csv(out / "poincare.csv", "r", r, cols)
    rep.files.append("poincare.csv")
    band = ratio_fit(lam, envelope, "poincare", _band(cfg, "poincare", 10.0))
    if not coe_ok:
        band.max_spread = None
    rep.bands.append(band)
    rep.properties.append(PropertyCheck("poincare_monotone", float(np.min(np.diff(lam))) if len(lam) > 1 else 0.0,
                                        bool(np.all(np.diff(lam) >= -1e-9 * lam[1:]))))
    rep.properties.append(PropertyCheck("whitney_band", float(np.max(np.abs(np.log(whit)))),
                                        bool(np.all((whit >= 1 / 8) & (whit <= 8))), "max |log ratio|"))
    rep.properties.append(PropertyCheck("random_below_poincare", rand_worst, bool(rand_worst <= 1 + 1e-9)))
    slope = _loglog_slope(r, rq_signed)
    rep.records["signed_slope"] = slope
    if "poincare.signed_slope" in cfg.raw:
        want = cfg.get_float("poincare.signed_slope")
        rep.properties.append(PropertyCheck("signed_slope", slope, bool(abs(slope - want) <= 0.2), f"expected {want:g} +- 0.2"))


def _task_liouville(cfg, out, rep):
    if "liouville.r_max" in cfg.raw:
        rmaxes = np.array([float(v) for v in cfg.get_list("liouville.r_max")])
    else:
        rmaxes = cfg.r_max * 2.0 ** np.arange(-4, 1)
    probe = cfg.get_float("liouville.probe_r", 100.0)
    k = cfg.spec.k
    rim = np.zeros(k)
    rim[0], rim[1 % k] = 1.0, -1.0
    h1, h2, energy = [], [], []
    for R in rmaxes:
        mesh = ms.build_mesh(cfg.spec, float(R), cfg.nodes_per_decade, r_min=cfg.r_min)
        h = ms.solve_harmonic(mesh, rim)
        h1.append(h[mesh.node(0, probe)])
        h2.append(h[mesh.node(1 % k, probe)])
        energy.append(ms.dirichlet_energy(mesh, h))
    h1, h2, energy = map(np.array, (h1, h2, energy))
    gap = h1 - h2
    # h on the negative end is negative; store both ends shifted to keep the CSV positive
    write_csv(out / "liouville.csv", "r", rmaxes,
              {"harmonic:end1_plus1": h1 + 1.0, "harmonic:end2_plus1": h2 + 1.0, "harmonic:gap": gap, "energy:dirichlet": energy})
    rep.files.append("liouville.csv")
    slope = _loglog_slope(np.log(rmaxes), energy)
    rep.records["liouville_gap"] = gap.tolist()
    rep.records["energy_loglog_slope"] = slope
    if all(c.parabolic is False for c in cfg.spec.classify(float(rmaxes[-1]))):
        stable = bool(np.min(gap) >= 0.5 and np.max(np.abs(np.diff(gap))) <= 0.05)
        rep.properties.append(PropertyCheck("liouville_gap", float(np.min(gap)), stable, "min gap over r_max doublings"))
    else:
        ok = bool(abs(slope + 1.0) <= 0.15)
        rep.properties.append(PropertyCheck("energy_decay_slope", slope, ok, "log energy vs log log r_max, expected -1 +- 0.15"))


def _osc(cfg):
    i = cfg.oscillating_end()
    return i, cfg.spec.profiles[i], cfg.spec.profiles[i].schedule


def _task_schedule(cfg, out, rep):
    i, prof, s = _osc(cfg)
    res = s.residuals()
    rep.records["schedule_residuals"] = res
    rep.properties.append(PropertyCheck("schedule_relations", max(res["bc"], res["ad"]),
                                        bool(max(res["bc"], res["ad"]) <= 1e-10 and res["ordered"])))
    n = np.arange(1, s.N + 1)
    closed = np.array([h2_at_a(s, k) for k in n])
    quad = np.asarray(compute_h_log(prof, s.log_terms[:, 0]))
    write_csv(out / "schedule.csv", "n", n, {
        "log_r:a": s.log_terms[:, 0], "log_r:b": s.log_terms[:, 1], "log_r:c": s.log_terms[:, 2], "log_r:d": s.log_terms[:, 3],
        "h2:closed": closed, "h2:quadrature": quad,
    })
    rep.files.append("schedule.csv")
    rep.records["h2_quadrature_vs_closed"] = float(np.max(np.abs(quad / closed - 1)))
    sel = n >= 5
    if np.any(sel):
        rep.bands.append(ratio_fit(closed[sel], n[sel].astype(float), "h2_per_period", _band(cfg, "h2_per_period", 4.0)))
    if s.N >= 8:
        u = np.linspace(s.log_terms[4, 0], s.log_terms[7, 0], 400)
        h = np.asarray(compute_h_log(prof, u))
        if s.mode is ScheduleMode.EXAMPLE1:
            rep.bands.append(ratio_fit(h, u / np.log(u), "h2_log_over_loglog", _band(cfg, "h2_growth", 5.0)))
        else:
            rep.bands.append(ratio_fit(h, np.log(u), "h2_loglog", _band(cfg, "h2_growth", 5.0)))
    hh = check_h1_h2(prof, 0.0, log_r_max=float(s.log_a()[-1]))
    rep.records["h1_constant"], rep.records["h2_constant"] = hh.h1_constant, hh.h2_constant
    rep.properties.append(PropertyCheck("h1_h2", max(hh.h1_constant, hh.h2_constant), hh.h1_ok and hh.h2_ok))


def osc_windows(cfg) -> tuple[np.ndarray, np.ndarray]:
    """``log t`` samples inside the comparison windows and their period index."""
    _, _, s = _osc(cfg)
    default = "cd" if s.mode is ScheduleMode.EXAMPLE1 else "ab"
    which = cfg.get("grid.t.window", default)
    if which not in ("ab", "cd"):
        raise ConfigError("grid.t.window", "must be ab or cd")
    per = cfg.get_int("grid.t.per_window", 5)
    top = cfg.log_r_max - math.log(4.0)
    lt, ks = [], []
    for k, (la, lb, lc, ld) in enumerate(s.log_terms, 1):
        lo, hi = (la, lb) if which == "ab" else (lc, ld)
        if hi > top + 1e-9 or hi <= lo:
            continue
        lt += list(np.linspace(2 * lo, 2 * hi, per))
        ks += [k] * per
    return np.array(lt), np.array(ks, dtype=float)


def _task_osc_gap(cfg, out, rep):
    mesh = _mesh(cfg, "osc_gap")
    lt, ks = osc_windows(cfg)
    if len(lt) == 0:
        raise ConfigError("grid.t", "no comparison window fits below r_max/4")
    t = np.exp(lt)
    p = ms.heat_kernel(mesh, 0, 0, t, fraction=cfg.fraction)
    mm = np.exp(env.log_min_min_upper(cfg.spec, lt))
    cols = {
        "window:k": ks,
        "p_oo:numeric": p,
        "p_oo:min_min": mm,
        "p_oo:cand_loglog": 1.0 / (t * np.log(lt) ** 2),
        "p_oo:cand_log": 1.0 / (t * lt),
        "p_oo:cand_t": 1.0 / t,
    }
    write_csv(out / "osc_gap.csv", "t", t, cols)
    rep.files.append("osc_gap.csv")
    band = ratio_fit(p, mm, "osc_min_min", _band(cfg, "osc_min_min", 20.0))
    rep.bands.append(band)
    rep.records["osc_upper_constant"] = band.max_ratio
    _, _, s = _osc(cfg)
    cands = ("cand_loglog", "cand_log") if s.mode is ScheduleMode.EXAMPLE1 else ("cand_t", "cand_log")
    for c in cands:
        rep.bands.append(ratio_fit(p, cols[f"p_oo:{c}"], f"osc_{c}"))


_TASKS = {
    "p_oo": _task_p_oo,
    "offdiag": _task_offdiag,
    "bottleneck": _task_bottleneck,
    "poincare": _task_poincare,
    "liouville": _task_liouville,
    "schedule": _task_schedule,
    "osc_gap": _task_osc_gap,
}


def resolve_output_dir(cfg: ScenarioConfig, output_dir=None) -> Path:
    base = output_dir or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return Path(base) / cfg.scenario


def run_scenario(cfg: ScenarioConfig, output_dir=None, tasks=None) -> ScenarioReport:
    """Run the selected tasks, writing CSVs and ``summary.json`` to ``<output>/<scenario>/``.

    Configuration errors propagate; solver failures are recorded in the report.
    """
    out = resolve_output_dir(cfg, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rep = ScenarioReport(cfg.scenario)
    try:
        for task in tasks or cfg.tasks:
            _TASKS[task](cfg, out, rep)
    except EndHeatError as exc:
        if exc.code == "CONFIG_INVALID":
            raise
        rep.error = f"{exc.code}: {exc}"
    with open(out / "summary.json", "w") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return rep


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


# --- built-in scenarios ------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    raw: dict

    def config(self, overrides: dict | None = None) -> ScenarioConfig:
        return config_from_mapping({**self.raw, **(overrides or {})})


def _powerlog_ends(*pairs) -> dict:
    raw = {}
    for i, (a, b) in enumerate(pairs, 1):
        raw[f"end.{i}.kind"] = "powerlog"
        raw[f"end.{i}.alpha"] = a
        raw[f"end.{i}.beta"] = b
    return raw


_T_GRID = {"grid.t.min": 1e2, "grid.t.max": 1e6, "grid.t.per_decade": 4}
_R_GRID = {"grid.r.min": 1e2, "grid.r.max": 1e4, "grid.r.per_decade": 2, "poincare.r_max": 1e4}


def _rn_sum(n: int) -> Scenario:
    raw = {"scenario": f"rn_sum_{n}", **_powerlog_ends((n, 0), (n, 0)), "mesh.r_max": 4e3, "mesh.nodes_per_decade": 64,
           **_T_GRID, **_R_GRID, "tasks": "p_oo, offdiag, poincare, liouville",
           "poincare.signed_slope": n, "liouville.r_max": "1e3, 2e3, 4e3, 8e3, 16e3"}
    if n == 2:
        # the signed test function's quotient grows like r^2 log r, not a pure power
        del raw["poincare.signed_slope"]
    return Scenario(raw["scenario"], f"two copies of the {n}-dimensional model glued at a point", raw)


def builtin_scenarios() -> list:
    """The shipped scenarios, in a fixed order."""
    osc1 = {"end.1.kind": "m1", "end.2.kind": "oscillating", "end.2.alpha": 4, "end.2.beta": 1, "end.2.mode": "example1",
            "end.2.log_a1": 8, "end.2.N": 8, "end.2.log_plateau": 2}
    osc2 = {"end.1.kind": "oscillating", "end.1.alpha": 4, "end.1.beta": 1, "end.1.mode": "example2", "end.1.delta": 2,
            "end.1.log_a1": 8, "end.1.N": 8, "end.1.log_plateau": 2, "end.2.kind": "m3"}
    osc_common = {"mesh.r_max": "auto", "mesh.nodes_per_decade": 32, "grid.t.periods": 4, "grid.t.per_window": 6,
                  "tasks": "schedule, osc_gap"}
    out = [_rn_sum(2), _rn_sum(3), _rn_sum(4)]
    out.append(Scenario("parabolic_lex", "planar end (2,0) glued to a linear end (1,0)", {
        "scenario": "parabolic_lex", **_powerlog_ends((2, 0), (1, 0)), "mesh.r_max": 4e3, "mesh.nodes_per_decade": 64,
        **_T_GRID, "tasks": "p_oo, offdiag", "offdiag.regimes": "true"}))
    out.append(Scenario("osc_example1", "plane glued to the first oscillating end", {
        "scenario": "osc_example1", **osc1, **osc_common}))
    out.append(Scenario("osc_example2", "second oscillating end glued to the log-weighted plane", {
        "scenario": "osc_example2", **osc2, **osc_common}))
    out.append(Scenario("liouville_r3", "bounded non-constant harmonic function on two 3-dimensional ends", {
        "scenario": "liouville_r3", **_powerlog_ends((3, 0), (3, 0)), "mesh.r_max": 4e3, "mesh.nodes_per_decade": 64,
        "tasks": "liouville", "liouville.r_max": "1e3, 2e3, 4e3, 8e3, 16e3"}))
    out.append(Scenario("bottleneck_3", "cross-end decay through the center for two 3-dimensional ends", {
        "scenario": "bottleneck_3", **_powerlog_ends((3, 0), (3, 0)), "mesh.r_max": 4e3, "mesh.nodes_per_decade": 64,
        **_T_GRID, "tasks": "bottleneck", "bottleneck.n": 3}))
    out.append(Scenario("poincare_table", "Poincare constant decided by the second largest of three ends", {
        "scenario": "poincare_table", **_powerlog_ends((3, 0), (2, 1), (1, 0)), "mesh.r_max": 1e4,
        "mesh.nodes_per_decade": 64, **_R_GRID, "tasks": "poincare"}))
    return out


def get_scenario(name: str) -> Scenario:
    for s in builtin_scenarios():
        if s.name == name:
            return s
    raise KeyError(name)
