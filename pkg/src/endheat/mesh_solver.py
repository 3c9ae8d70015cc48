"""Weighted star-graph discretization of a manifold with ends and its heat solvers.

Each end becomes a ray of nodes on a geometric radius grid starting at
``r_min``; the compact core is a single center vertex joined to the first node
of every ray.  Node masses are ``V``-increments over dual cells and edge
conductances are ``(int dr / V')^{-1}``, so the discrete harmonic functions of
a ray coincide with the continuous radial ones at the nodes.

The generator is ``(L u)(v) = (1/m_v) sum_w k_vw (u_w - u_v)`` and evolution
is ``du/dt = L u``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import ProfileUnsupportedError, SolveError, StepError
from .volume_models import ManifoldSpec, VolumeProfile

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)

DEFAULT_STEP_FRACTION = 0.02
STEP_GROWTH = 1.2


class BC(str, enum.Enum):
    NEUMANN = "neumann"
    DIRICHLET_AT_CENTER = "dirichlet_center"
    DIRICHLET_AT_RIM = "dirichlet_rim"


def _volume_increment(profile: VolumeProfile, r0, r1):
    # V(r1) - V(r0) without cancellation
    l0 = profile.log_volume(np.log(r0))
    l1 = profile.log_volume(np.log(r1))
    return np.exp(l0) * np.expm1(l1 - l0)


def _resistance(profile: VolumeProfile, r0, r1):
    """``int_{r0}^{r1} dr / V'(r)`` per edge, split at the profile knots."""
    u0 = np.log(np.asarray(r0, dtype=float))
    u1 = np.log(np.asarray(r1, dtype=float))
    knots = np.array(profile.knots, dtype=float)
    out = np.zeros(u0.shape)
    for i, (a, b) in enumerate(zip(u0, u1)):
        cuts = np.concatenate([[a], knots[(knots > a) & (knots < b)], [b]])
        total = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            half = 0.5 * (hi - lo)
            w = lo + half * (_GL_X + 1.0)
            total += half * float(np.dot(_GL_W, np.exp(w - profile.log_density(w))))
        out[i] = total
    return out


@dataclass(frozen=True, eq=False)
class StarMesh:
    """Discretized star graph.

    Node 0 is the center; the nodes of end ``i`` occupy ``ends[i]`` (a slice)
    in increasing radius.  ``edge_mass[e]`` holds the two half-cell masses an
    edge contributes to its endpoints, so that restrictions to node subsets
    can rebuild reflecting (Neumann) cells.
    """

    spec: ManifoldSpec
    radius: np.ndarray
    end_of: np.ndarray
    edges: np.ndarray
    conductance: np.ndarray
    edge_mass: np.ndarray
    center_mass: float
    ends: tuple
    r_min: float
    r_stub: float
    r_max: float
    mass: np.ndarray = field(init=False)
    stiffness: sparse.csr_matrix = field(init=False, repr=False)

    def __post_init__(self):
        m = np.zeros(len(self.radius))
        np.add.at(m, self.edges[:, 0], self.edge_mass[:, 0])
        np.add.at(m, self.edges[:, 1], self.edge_mass[:, 1])
        m[0] += self.center_mass
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "stiffness", _assemble(len(m), self.edges, self.conductance))

    @property
    def n_nodes(self) -> int:
        return len(self.radius)

    @property
    def h_min(self) -> float:
        """Shortest edge length."""
        r = self.radius.copy()
        r[0] = self.r_stub
        return float(np.min(np.abs(r[self.edges[:, 1]] - r[self.edges[:, 0]])))

    def node(self, end: int, r: float) -> int:
        """Index of the node of ``end`` closest to radius ``r`` in log scale."""
        sl = self.ends[end]
        rr = self.radius[sl]
        j = int(np.argmin(np.abs(np.log(rr) - math.log(r))))
        return sl.start + j

    def rim(self, end: int) -> int:
        return self.ends[end].stop - 1

    def end_mass(self, end: int, r: float | None = None) -> float:
        """Mass of the ray of ``end`` (up to radius ``r``)."""
        sl = self.ends[end]
        sel = self.radius[sl] <= (np.inf if r is None else r)
        return float(np.sum(self.mass[sl][sel]))

    def restrict(self, keep: np.ndarray):
        """Stiffness and masses of the induced sub-star on the boolean mask ``keep``.

        Only edges with both endpoints kept contribute conductance and mass,
        i.e. the cut is reflecting.
        """
        keep = np.asarray(keep, dtype=bool)
        emask = keep[self.edges[:, 0]] & keep[self.edges[:, 1]]
        idx = np.flatnonzero(keep)
        new = -np.ones(self.n_nodes, dtype=int)
        new[idx] = np.arange(len(idx))
        e = new[self.edges[emask]]
        m = np.zeros(len(idx))
        np.add.at(m, e[:, 0], self.edge_mass[emask, 0])
        np.add.at(m, e[:, 1], self.edge_mass[emask, 1])
        if keep[0]:
            m[0] += self.center_mass
        return _assemble(len(idx), e, self.conductance[emask]), m, idx

    def generator_apply(self, u):
        """``L u``."""
        return -(self.stiffness @ u) / self.mass


def _assemble(n, edges, kappa):
    i, j = edges[:, 0], edges[:, 1]
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-kappa, -kappa, kappa, kappa])
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def build_mesh(
    spec: ManifoldSpec,
    r_max: float,
    nodes_per_decade: int = 64,
    *,
    r_min: float = 1.0,
    center_mass: float | None = None,
) -> StarMesh:
    """Star mesh with geometric rays ``r_min = r_1 < ... < r_N = r_max``.

    The center joins node ``(i, 1)`` through the segment ``[r_min/2, r_min]``
    of end ``i``; its mass defaults to ``max_i V_i(r_min)``.
    """
    if r_max < 10:
        raise ValueError("r_max must be >= 10")
    if nodes_per_decade < 16:
        raise ValueError("nodes_per_decade must be >= 16")
    if not 0 < r_min < r_max:
        raise ValueError("need 0 < r_min < r_max")
    for e in spec.ends:
        if not isinstance(e.profile, VolumeProfile) or type(e.profile).log_density is VolumeProfile.log_density:
            raise ProfileUnsupportedError(f"end {e.label}: no density V' available")
    n = int(math.ceil(round(math.log10(r_max / r_min) * nodes_per_decade, 9))) + 1
    grid = np.geomspace(r_min, r_max, n)
    grid[0], grid[-1] = r_min, r_max
    r_stub = 0.5 * r_min

    radius = [np.array([0.0])]
    end_of = [np.array([-1])]
    edges, kappa, emass, slices = [], [], [], []
    start = 1
    for i, end in enumerate(spec.ends):
        prof = end.profile
        idx = np.arange(start, start + n)
        slices.append(slice(start, start + n))
        radius.append(grid.copy())
        end_of.append(np.full(n, i))
        # center edge carries no mass; the core's measure sits in center_mass
        edges.append([[0, idx[0]]])
        kappa.append(1.0 / _resistance(prof, [r_stub], [r_min]))
        emass.append([[0.0, 0.0]])
        mid = 0.5 * (grid[:-1] + grid[1:])
        edges.append(np.stack([idx[:-1], idx[1:]], axis=1))
        kappa.append(1.0 / _resistance(prof, grid[:-1], grid[1:]))
        emass.append(np.stack([_volume_increment(prof, grid[:-1], mid), _volume_increment(prof, mid, grid[1:])], axis=1))
        start += n
    if center_mass is None:
        center_mass = max(float(e.profile.volume(r_min)) for e in spec.ends)
    if center_mass <= 0:
        raise ValueError("center mass must be positive")
    return StarMesh(
        spec=spec,
        radius=np.concatenate(radius),
        end_of=np.concatenate(end_of),
        edges=np.concatenate([np.asarray(e, dtype=int) for e in edges]),
        conductance=np.concatenate(kappa),
        edge_mass=np.concatenate([np.asarray(e, dtype=float) for e in emass]),
        center_mass=float(center_mass),
        ends=tuple(slices),
        r_min=float(r_min),
        r_stub=r_stub,
        r_max=float(r_max),
    )


def step_schedule(t_list, dt0: float, fraction: float = DEFAULT_STEP_FRACTION, growth: float = STEP_GROWTH):
    """Backward-Euler step sizes reaching every time in ``t_list``.

    Steps start at ``dt0`` and grow by ``growth`` whenever the grown step still
    satisfies ``dt <= fraction * t``; the last step before an output time is
    shortened to land on it.  Returns ``(dts, out_index)`` where output ``j`` is
    the state after step ``out_index[j]`` (``-1`` for ``t = 0``).
    """
    t_list = np.asarray(t_list, dtype=float)
    if t_list.ndim != 1 or len(t_list) == 0:
        raise ValueError("t_list must be a non-empty 1-d sequence")
    if t_list[0] < 0 or np.any(np.diff(t_list) <= 0):
        raise ValueError("t_list must be increasing and start at t >= 0")
    dts, out = [], []
    t, dt = 0.0, dt0
    for target in t_list:
        while target - t > 1e-12 * target:
            while fraction * t >= dt * growth:
                dt *= growth
            step = dt if target - t > dt * (1.0 + 1e-9) else target - t
            dts.append(step)
            t = t + step if step != target - t else target
        out.append(len(dts) - 1)
    return np.array(dts), np.array(out)


class _Stepper:
    """Solves ``(M + dt K) u_new = M u_old`` with factorizations cached by ``dt``."""

    def __init__(self, K, m):
        self.K = sparse.csc_matrix(K)
        self.m = m
        self.M = sparse.diags(m, format="csc")
        self._cache = {}

    def step(self, u, dt):
        lu = self._cache.get(dt)
        if lu is None:
            try:
                lu = splinalg.splu(self.M + dt * self.K)
            except RuntimeError as exc:
                raise StepError(f"factorization failed at dt={dt:.3g}") from exc
            if len(self._cache) > 4:
                self._cache.clear()
            self._cache[dt] = lu
        out = lu.solve(self.m * u)
        if not np.all(np.isfinite(out)):
            raise StepError(f"non-finite state at dt={dt:.3g}")
        return out


@dataclass
class HeatField:
    time: float
    values: np.ndarray
    bc: BC


@dataclass
class HeatSolution:
    """Output of ``heat_solve``: one ``HeatField`` per requested time.

    ``dts`` is the backward-Euler step sequence used; ``integrals[j]`` holds
    the step-consistent ``int_0^t u(s, v) ds`` for each tracked node ``v``.
    """

    fields: list
    dts: np.ndarray
    integrals: np.ndarray | None = None

    def __iter__(self):
        return iter(self.fields)

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]

    def at(self, node) -> np.ndarray:
        """Time series of the value at ``node`` (int or array of ints)."""
        return np.array([f.values[node] for f in self.fields])


def _active_nodes(mesh: StarMesh, bc: BC, end: int | None):
    keep = np.ones(mesh.n_nodes, dtype=bool)
    if bc is BC.DIRICHLET_AT_CENTER:
        keep[0] = False
        if end is not None:
            keep[:] = False
            keep[mesh.ends[end]] = True
    elif bc is BC.DIRICHLET_AT_RIM:
        for i in range(len(mesh.ends)):
            keep[mesh.rim(i)] = False
    return np.flatnonzero(keep)


def heat_solve(
    mesh: StarMesh,
    u0,
    t_list,
    bc: BC | str = BC.NEUMANN,
    *,
    end: int | None = None,
    fraction: float = DEFAULT_STEP_FRACTION,
    track=None,
) -> HeatSolution:
    """Backward-Euler evolution of ``du/dt = L u`` from ``u0``.

    Dirichlet nodes are held at zero and dropped from the system; with
    ``bc=DIRICHLET_AT_CENTER`` and ``end`` given, only that end's ray evolves
    (the other ends are zero).  The rim is reflecting unless
    ``bc=DIRICHLET_AT_RIM``.
    """
    bc = BC(bc)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (mesh.n_nodes,):
        raise ValueError(f"u0 must have {mesh.n_nodes} entries")
    act = _active_nodes(mesh, bc, end)
    K = mesh.stiffness[act][:, act]
    stepper = _Stepper(K, mesh.mass[act])
    dt0 = mesh.h_min ** 2 / 4.0
    dts, out_idx = step_schedule(t_list, dt0, fraction)
    track_full = None if track is None else np.atleast_1d(np.asarray(track, dtype=int))
    if track_full is not None:
        pos = np.full(mesh.n_nodes, -1)
        pos[act] = np.arange(len(act))
        track_local = pos[track_full]
        acc = np.zeros(len(track_full))
        integrals = []
    u = u0[act].copy()
    fields = []
    t_list = np.asarray(t_list, dtype=float)
    j = 0
    while j < len(out_idx) and out_idx[j] < 0:
        fields.append(_field(mesh, act, u, t_list[j], bc))
        if track_full is not None:
            integrals.append(acc.copy())
        j += 1
    for s, dt in enumerate(dts):
        u = stepper.step(u, dt)
        if track_full is not None:
            vals = np.where(track_local >= 0, u[np.maximum(track_local, 0)], 0.0)
            acc = acc + dt * vals
        while j < len(out_idx) and out_idx[j] == s:
            fields.append(_field(mesh, act, u, t_list[j], bc))
            if track_full is not None:
                integrals.append(acc.copy())
            j += 1
    return HeatSolution(fields, dts, None if track_full is None else np.array(integrals))


def _field(mesh, act, u, t, bc):
    full = np.zeros(mesh.n_nodes)
    full[act] = u
    return HeatField(float(t), full, bc)


def delta(mesh: StarMesh, x: int) -> np.ndarray:
    """``delta_x / m_x``: initial data whose evolution is ``p(t, x, .)``."""
    u = np.zeros(mesh.n_nodes)
    u[x] = 1.0 / mesh.mass[x]
    return u


def heat_kernel(mesh: StarMesh, x: int, y, t_list, *, fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """``p(t, x, y)`` for each ``t`` (``y`` may be an array of nodes)."""
    sol = heat_solve(mesh, delta(mesh, x), t_list, BC.NEUMANN, fraction=fraction)
    return sol.at(y)


def heat_kernel_integral(mesh: StarMesh, x: int, y, t_list, *, fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """``int_0^t p(s, x, y) ds`` (right Riemann sums over the BE steps)."""
    sol = heat_solve(mesh, delta(mesh, x), t_list, BC.NEUMANN, fraction=fraction, track=y)
    res = sol.integrals
    return res[:, 0] if np.ndim(y) == 0 else res


def _check_on_end(mesh, end, x):
    sl = mesh.ends[end]
    if not sl.start <= x < sl.stop:
        raise ValueError(f"node {x} is not on end {end}")


def dirichlet_kernel(mesh: StarMesh, end: int, x: int, t_list, y=None, *, fraction: float = DEFAULT_STEP_FRACTION):
    """Extended Dirichlet kernel ``p^D_{E_i}(t, x, y)`` with absorbing center.

    Returns the full per-node array for each time when ``y`` is None.
    """
    _check_on_end(mesh, end, x)
    sol = heat_solve(mesh, delta(mesh, x), t_list, BC.DIRICHLET_AT_CENTER, end=end, fraction=fraction)
    if y is None:
        return np.array([f.values for f in sol])
    return sol.at(y)


def _dirichlet_run(mesh, end, x, t_list, fraction):
    _check_on_end(mesh, end, x)
    first = mesh.ends[end].start
    sol = heat_solve(mesh, delta(mesh, x), t_list, BC.DIRICHLET_AT_CENTER, end=end, fraction=fraction)
    surv = np.array([float(np.dot(mesh.mass, f.values)) for f in sol])
    return sol, surv, first


def exit_probability(mesh: StarMesh, end: int, x: int, t_list, *, fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """``P_x(tau_{E_i} < t) = 1 - sum_v m_v u^D_v(t)``."""
    _, surv, _ = _dirichlet_run(mesh, end, x, t_list, fraction)
    return np.clip(1.0 - surv, 0.0, 1.0)


def exit_rate(mesh: StarMesh, end: int, x: int, t_list, *, fraction: float = DEFAULT_STEP_FRACTION) -> np.ndarray:
    """``d/dt P_x(tau_{E_i} < t)`` as the flux ``k_{i,0} u^D_{(i,1)}(t)`` into the center."""
    sol, _, first = _dirichlet_run(mesh, end, x, t_list, fraction)
    kappa = -mesh.stiffness[0, first]
    return kappa * sol.at(first)


def exit_components(mesh: StarMesh, end: int, x: int, t_list, *, fraction: float = DEFAULT_STEP_FRACTION):
    """``(P_x(tau < t), d/dt P_x(tau < t), p^D field)`` from a single Dirichlet run."""
    sol, surv, first = _dirichlet_run(mesh, end, x, t_list, fraction)
    kappa = -mesh.stiffness[0, first]
    fields = np.array([f.values for f in sol])
    return np.clip(1.0 - surv, 0.0, 1.0), kappa * sol.at(first), fields


def solve_harmonic(mesh: StarMesh, rim_values) -> np.ndarray:
    """Solve ``L h = 0`` with ``h`` prescribed at the rim node of every end."""
    rim_values = np.asarray(rim_values, dtype=float)
    if rim_values.shape != (len(mesh.ends),):
        raise ValueError("one rim value per end")
    rims = np.array([mesh.rim(i) for i in range(len(mesh.ends))])
    interior = np.setdiff1d(np.arange(mesh.n_nodes), rims)
    K = sparse.csc_matrix(mesh.stiffness)
    rhs = -(K[interior][:, rims] @ rim_values)
    try:
        h_int = splinalg.spsolve(K[interior][:, interior], rhs)
    except RuntimeError as exc:
        raise SolveError(str(exc)) from exc
    if not np.all(np.isfinite(h_int)):
        raise SolveError("singular interior system")
    h = np.empty(mesh.n_nodes)
    h[interior] = h_int
    h[rims] = rim_values
    return h


def dirichlet_energy(mesh: StarMesh, f) -> float:
    """``sum_edges k (f_u - f_v)^2``."""
    f = np.asarray(f, dtype=float)
    d = f[mesh.edges[:, 0]] - f[mesh.edges[:, 1]]
    return float(np.sum(mesh.conductance * d * d))
