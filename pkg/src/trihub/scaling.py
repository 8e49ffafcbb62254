"""Finite-size-scaling machinery.

Curves E(u; N) over a u-grid and a range of levels (N = 7^(level+1)) are
tested for data collapse under

    E = q^{y_E} f(q * N^(1/(2 nu))),        q = u - u_c,

with the collapse quality measured by a leave-one-out master-curve
residual: each curve's points are compared against the piecewise-linear
interpolant through the union of all other curves' rescaled points,
restricted to overlapping x ranges, and the mean squared deviation is
normalized by the variance of all rescaled values. (u_c, nu, y_E) are
fitted by a deterministic Nelder-Mead simplex implemented here; by
default y_E is held at 0, which both matches the observed size-independent
critical value and avoids dividing by q = 0 on the grid.
"""

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np

from .entanglement import central_block_entropy, compute_report
from .errors import BracketError, CollapseError, NumericalError
from .rg import rg_flow

OBSERVABLES = ("E_bb", "E_b7", "E_avg", "E_single", "gap")

#: Relative offset applied to generated u grids so that grid points never
#: sit exactly on flagged degeneracies (or on u = 0, where the fermionic
#: cross-check Hamiltonian has symmetry-protected level crossings).
GRID_OFFSET = 1.37e-6


@dataclass(frozen=True)
class EntanglementCurve:
    """One observable at one system size over a u-grid."""

    observable: str
    N: int
    us: np.ndarray
    es: np.ndarray

    def __post_init__(self):
        us = np.asarray(self.us, float)
        es = np.asarray(self.es, float)
        if us.shape != es.shape or us.ndim != 1:
            raise ValueError("us and es must be 1-d arrays of equal length")
        if len(us) > 1 and not (np.diff(us) > 0).all():
            raise ValueError("samples must be sorted with strictly increasing u")
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "es", es)

    def __len__(self):
        return len(self.us)


@dataclass(frozen=True)
class PointFailure:
    """A (u, level) point that could not be computed; scans carry these
    through as flagged rows instead of aborting."""

    u0: float
    level: int
    message: str


def default_u_grid(u_star, count=41, lo=0.2, hi=1.8):
    """The standard scan grid: `count` points on [lo*u*, hi*u*], shifted by
    a tiny offset so no point lands on a flagged coupling."""
    grid = np.linspace(lo * u_star, hi * u_star, count)
    return grid + GRID_OFFSET * u_star


def _point_reports(task):
    u0, levels, statistics, single_base = task
    out = []
    max_level = max(levels)
    traj = None
    while traj is None:
        try:
            traj = rg_flow(u0, max_level, statistics=statistics)
        except NumericalError as exc:
            if max_level == 0:
                return [PointFailure(u0, lv, str(exc)) for lv in levels]
            max_level -= 1
            err = str(exc)
    for lv in levels:
        if lv > max_level:
            out.append(PointFailure(u0, lv, err))
            continue
        try:
            out.append(compute_report(traj, lv, single_base=single_base))
        except NumericalError as exc:
            out.append(PointFailure(u0, lv, str(exc)))
    return out


def scan_reports(u_grid, levels, statistics="bose", single_base="e", workers=1):
    """Reports for every (u, level), in deterministic (u major, level minor)
    order regardless of worker count. Failed points come back as
    PointFailure entries."""
    us = [float(u) for u in u_grid]
    levels = sorted({int(lv) for lv in levels})
    if not levels:
        raise ValueError("levels must be nonempty")
    tasks = [(u, levels, statistics, single_base) for u in us]
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            rows = pool.map(_point_reports, tasks)
    else:
        rows = [_point_reports(t) for t in tasks]
    return [r for row in rows for r in row]


def build_curves(u_grid, levels, observable, statistics="bose", single_base="e", workers=1):
    """One curve per level for the chosen observable. Any failed point is an
    error here (scans that tolerate failures go through scan_reports)."""
    if observable not in OBSERVABLES:
        raise ValueError(f"observable must be one of {OBSERVABLES}, got {observable!r}")
    reports = scan_reports(u_grid, levels, statistics, single_base, workers)
    failures = [r for r in reports if isinstance(r, PointFailure)]
    if failures:
        f = failures[0]
        raise NumericalError(f"point (u={f.u0:.9g}, level={f.level}) failed: {f.message}")
    curves = []
    for lv in sorted({int(l) for l in levels}):
        pts = [r for r in reports if r.level == lv]
        curves.append(
            EntanglementCurve(
                observable=observable,
                N=7 ** (lv + 1),
                us=np.array([r.u0 for r in pts]),
                es=np.array([getattr(r, observable) for r in pts]),
            )
        )
    return curves


def gap_curves(u_grid, levels, statistics="bose", workers=1):
    """Charge-gap curves of the top problems, in bare-t units."""
    return build_curves(u_grid, levels, "gap", statistics=statistics, workers=workers)


def _transform(curve, u_c, nu, y_e, exclude_near_critical):
    q = curve.us - u_c
    x = q * float(curve.N) ** (1.0 / (2.0 * nu))
    if y_e == 0.0:
        return x, curve.es.copy()
    near = np.abs(q) < 1e-8
    if near.any() and not exclude_near_critical:
        raise CollapseError(
            "sample at the critical coupling with y_E != 0 (division by q = 0); "
            "fitting with free y_E excludes |q| < 1e-8 samples instead"
        )
    keep = ~near
    return x[keep], curve.es[keep] / np.abs(q[keep]) ** y_e


def collapse_residual(curves, u_c, nu, y_e, exclude_near_critical=False):
    """Leave-one-out master-curve residual of the rescaled curves; 0 means a
    perfect collapse. Invariant under reordering of curves and samples."""
    if len(curves) < 2:
        raise CollapseError(f"need at least 2 curves, got {len(curves)}")
    if any(len(c) < 4 for c in curves):
        raise CollapseError("every curve needs at least 4 samples")
    if not nu > 0:
        raise CollapseError(f"nu must be positive, got {nu}")

    xs, ys = [], []
    for c in curves:
        x, y = _transform(c, u_c, nu, y_e, exclude_near_critical)
        xs.append(x)
        ys.append(y)

    sse = 0.0
    count = 0
    for k in range(len(curves)):
        xo = np.concatenate([x for i, x in enumerate(xs) if i != k])
        yo = np.concatenate([y for i, y in enumerate(ys) if i != k])
        order = np.lexsort((yo, xo))
        xo, yo = xo[order], yo[order]
        inside = (xs[k] >= xo[0]) & (xs[k] <= xo[-1])
        if not inside.any():
            continue
        fit = np.interp(xs[k][inside], xo, yo)
        sse += float(((ys[k][inside] - fit) ** 2).sum())
        count += int(inside.sum())
    if count == 0:
        raise CollapseError("curves have no overlapping x range after rescaling")
    if sse == 0.0:
        return 0.0
    var = float(np.var(np.concatenate(ys)))
    if var == 0.0:
        raise CollapseError("rescaled data has zero variance")
    return (sse / count) / var


@dataclass(frozen=True)
class SimplexResult:
    x: np.ndarray
    fun: float
    evaluations: int
    converged: bool


def nelder_mead(f, x0, diameter_tol=1e-5, spread_tol=1e-10, max_evals=2000):
    """Deterministic Nelder-Mead minimization (reflection 1, expansion 2,
    contraction 0.5, shrink 0.5). The initial simplex is x0 plus one vertex
    per coordinate with that coordinate displaced by 5 percent of its
    magnitude (0.05 absolute for zero coordinates). Converged means the
    simplex diameter fell below diameter_tol and the value spread below
    spread_tol; otherwise the best vertex so far is returned flagged."""
    x0 = np.asarray(x0, float)
    n = len(x0)
    verts = [x0.copy()]
    for i in range(n):
        v = x0.copy()
        v[i] += 0.05 * abs(v[i]) if v[i] != 0.0 else 0.05
        verts.append(v)
    verts = np.array(verts)
    vals = np.array([f(v) for v in verts])
    evals = n + 1

    while evals < max_evals:
        order = np.argsort(vals, kind="stable")
        verts, vals = verts[order], vals[order]

        diameter = max(
            np.linalg.norm(verts[i] - verts[j])
            for i in range(n + 1)
            for j in range(i + 1, n + 1)
        )
        if diameter < diameter_tol and vals[-1] - vals[0] < spread_tol:
            return SimplexResult(verts[0], float(vals[0]), evals, True)

        centroid = verts[:-1].mean(axis=0)
        reflected = centroid + (centroid - verts[-1])
        f_r = f(reflected)
        evals += 1
        if vals[0] <= f_r < vals[-2]:
            verts[-1], vals[-1] = reflected, f_r
            continue
        if f_r < vals[0]:
            expanded = centroid + 2.0 * (centroid - verts[-1])
            f_e = f(expanded)
            evals += 1
            if f_e < f_r:
                verts[-1], vals[-1] = expanded, f_e
            else:
                verts[-1], vals[-1] = reflected, f_r
            continue
        contracted = centroid + 0.5 * (verts[-1] - centroid)
        f_c = f(contracted)
        evals += 1
        if f_c < vals[-1]:
            verts[-1], vals[-1] = contracted, f_c
            continue
        for i in range(1, n + 1):  # shrink toward the best vertex
            verts[i] = verts[0] + 0.5 * (verts[i] - verts[0])
            vals[i] = f(verts[i])
        evals += n

    order = np.argsort(vals, kind="stable")
    return SimplexResult(verts[order[0]], float(vals[order[0]]), evals, False)


@dataclass(frozen=True)
class CollapseFit:
    u_c: float
    nu: float
    y_e: float
    residual: float
    fixed_mask: tuple
    converged: bool
    evaluations: int


_PENALTY = 1e12


def fit_collapse(curves, init, fixed_mask=(False, False, True), max_evals=2000):
    """Minimize the collapse residual over the parameters not held fixed.
    init and fixed_mask are (u_c, nu, y_E) triples; the default pins
    y_E = 0. All-fixed is a no-op that just evaluates the residual. The
    fitter always uses the |q| < 1e-8 exclusion policy so the objective
    stays finite when y_E floats."""
    init = np.asarray(init, float)
    fixed = tuple(bool(b) for b in fixed_mask)
    if init.shape != (3,) or len(fixed) != 3:
        raise ValueError("init and fixed_mask must be (u_c, nu, y_E) triples")
    free = [i for i in range(3) if not fixed[i]]

    def assemble(x_free):
        p = init.copy()
        p[free] = x_free
        return p

    def objective(x_free):
        u_c, nu, y_e = assemble(x_free)
        if nu <= 0:
            return _PENALTY * (1.0 + abs(nu))
        try:
            return collapse_residual(curves, u_c, nu, y_e, exclude_near_critical=True)
        except CollapseError:
            return _PENALTY

    if not free:
        residual = collapse_residual(curves, *init, exclude_near_critical=True)
        return CollapseFit(*init, residual, fixed, True, 1)

    res = nelder_mead(objective, init[free], max_evals=max_evals)
    u_c, nu, y_e = assemble(res.x)
    return CollapseFit(
        float(u_c), float(nu), float(y_e), res.fun, fixed, res.converged, res.evaluations
    )


def write_curves_csv(path, curves, header_lines=()):
    """Curve samples as observable,u,N,E rows (u major, N minor), preceded
    by '#' header lines."""
    rows = []
    for c in curves:
        for u, e in zip(c.us, c.es):
            rows.append((float(u), int(c.N), c.observable, float(e)))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("observable,u,N,E\n")
        for u, n, obs, e in rows:
            fh.write(f"{obs},{u:.12g},{n},{e:.12g}\n")


def read_curves_csv(path, observable=None):
    """Parse a curves CSV back into EntanglementCurve objects (grouped by
    observable and N). Malformed rows are reported with their line number."""
    groups = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.replace(" ", "").lower() == "observable,u,n,e":
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            obs = parts[0].strip()
            try:
                u, n, e = float(parts[1]), int(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if observable is not None and obs != observable:
                continue
            groups.setdefault((obs, n), []).append((u, e))
    curves = []
    for (obs, n), pts in sorted(groups.items()):
        pts.sort()
        curves.append(
            EntanglementCurve(
                observable=obs,
                N=n,
                us=np.array([p[0] for p in pts]),
                es=np.array([p[1] for p in pts]),
            )
        )
    if not curves:
        raise ValueError(f"{path}: no usable curve rows" + (f" for observable {observable!r}" if observable else ""))
    return curves


def transition_width(
    level,
    hi=1.75,
    lo=1.25,
    bracket=(0.1, 40.0),
    tol=1e-6,
    geometry=None,
    statistics="bose",
):
    """Width of the metal-insulator step at one level: the u-interval over
    which E_bb falls from `hi` to `lo` bits. E_bb is monotone decreasing in
    u across the bracket, so each threshold is found by bisection."""
    u_min, u_max = bracket

    def e_bb(u):
        return central_block_entropy(u, level, geometry, statistics)

    top, bottom = e_bb(u_min), e_bb(u_max)
    if not (top > hi and bottom < lo):
        raise BracketError(
            f"bracket {bracket} does not straddle the step at level {level} "
            f"(E_bb ends: {top:.4f}, {bottom:.4f})"
        )

    def crossing(target):
        a, b = u_min, u_max
        while b - a > tol:
            mid = 0.5 * (a + b)
            if e_bb(mid) > target:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    return crossing(lo) - crossing(hi)
