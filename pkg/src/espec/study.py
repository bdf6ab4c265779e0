"""Convergence studies: L-doubling and h-refinement of tracked eigenvalues.

A computed eigenvalue counts as converged when its eigenvector is localized
and it reappears, carried by a localized eigenvector again, both on the
doubled box (drift below ``l_tol``) and on the refined grid (drift below
``h_tol``). Box-filling modes move when the box grows; grid-scale modes
move (or vanish) when the grid is refined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .discretize import assemble_lame
from .eigensolve import SolveOptions, dense_cap, lowest_hermitian
from .errors import SolverError
from .model import DampingField, FieldSpec, Grid, LameParams, sample_field
from .pencil import (LOCALIZATION_THRESHOLD, PencilEigenpair, build_pencil, pairs_near,
                     pencil_spectrum, potential_pairs_near,
                     potential_spectrum)

L_TOL = 1e-6
H_TOL = 0.05


@dataclass(frozen=True)
class Problem:
    """What gets re-discretized: the pencil for a damping, or ``-Lame + V``."""

    params: LameParams
    spec: FieldSpec
    kind: str = "pencil"
    opts: SolveOptions = SolveOptions()
    scale: float = 1.0

    def field(self, grid: Grid) -> DampingField:
        """The field on ``grid``; with ``scale = s`` this is ``s a(s x)``.

        The rescaled field is sampled on the grid ``s`` times wider, whose
        nodes are exactly ``s`` times the nodes of ``grid``.
        """
        if self.scale == 1.0:
            return sample_field(grid, self.spec)
        s = self.scale
        base = sample_field(Grid(grid.dim, grid.half_width * s, grid.points_per_axis), self.spec)
        return DampingField(grid, base.kind, s * base.samples, base.spec)

    def spectrum(self, grid: Grid, count: Optional[int] = None, shift: complex = 0.0,
                 ) -> List[PencilEigenpair]:
        opts = self.opts.with_(shift=shift) if count is not None else self.opts
        if self.kind == "potential":
            return potential_spectrum(self.params, grid, self.field(grid), opts, count)
        return pencil_spectrum(build_pencil(self.params, grid, self.field(grid)), opts, count)

    def near(self, grid: Grid, z: complex, count: int = 3) -> List[PencilEigenpair]:
        if self.kind == "potential":
            return potential_pairs_near(self.params, grid, self.field(grid), z, self.opts, count)
        return pairs_near(build_pencil(self.params, grid, self.field(grid)), z, self.opts, count)

    def size(self, grid: Grid) -> int:
        n = grid.dim * grid.num_nodes
        return n if self.kind == "potential" else 2 * n


def _relative(a: complex, b: complex) -> float:
    return abs(a - b) / max(abs(a), 1e-300)


def match_drift(z: complex, candidates: Sequence[PencilEigenpair],
                threshold: float = LOCALIZATION_THRESHOLD) -> float:
    """Relative distance from ``z`` to the nearest localized candidate (``inf`` if none)."""
    best = math.inf
    for c in candidates:
        if c.localization <= threshold:
            best = min(best, _relative(z, c.z))
    return best


def _drifts(problem: Problem, grid: Grid, zs: Sequence[complex], dense_limit: int,
            count: int, threshold: float) -> List[float]:
    if not zs:
        return []
    if len(zs) > 8 and problem.size(grid) <= dense_limit:
        full = problem.spectrum(grid)
        return [match_drift(z, full, threshold) for z in zs]
    out = []
    for z in zs:
        try:
            cands = problem.near(grid, z, count)
        except SolverError:
            # an eigenvalue that cannot be followed is not confirmed
            out.append(math.inf)
            continue
        out.append(match_drift(z, cands, threshold))
    return out


@dataclass(frozen=True)
class FlagSettings:
    l_tol: float = L_TOL
    h_tol: float = H_TOL
    threshold: float = LOCALIZATION_THRESHOLD
    count: int = 3
    check_h: bool = True

    def to_dict(self):
        return {"l_tol": self.l_tol, "h_tol": self.h_tol, "threshold": self.threshold,
                "count": self.count, "check_h": self.check_h}


def flag_converged(problem: Problem, grid: Grid, pairs: Sequence[PencilEigenpair],
                   settings: FlagSettings = FlagSettings()) -> List[PencilEigenpair]:
    """Return copies of ``pairs`` with ``converged`` and ``drift`` set by the study.

    Only pairs passing the localization test are re-tracked; ``drift`` is the
    L-doubling relative drift. Pairs whose h-drift exceeds ``h_tol`` are
    non-converged and keep ``drift`` to show they were tracked.
    """
    cap = dense_cap()
    idx = [i for i, p in enumerate(pairs) if p.localization <= settings.threshold and p.z != 0]
    zs = [pairs[i].z for i in idx]
    l_drift = _drifts(problem, grid.doubled(), zs, cap, settings.count, settings.threshold)
    keep = [k for k, d in enumerate(l_drift) if d <= settings.l_tol]
    h_drift = [0.0] * len(zs)
    if settings.check_h and keep:
        hd = _drifts(problem, grid.refined(), [zs[k] for k in keep], cap, settings.count,
                     settings.threshold)
        for k, d in zip(keep, hd):
            h_drift[k] = d
    out = [replace(p, converged=False) for p in pairs]
    for k, i in enumerate(idx):
        ok = l_drift[k] <= settings.l_tol and h_drift[k] <= settings.h_tol
        out[i] = replace(pairs[i], converged=bool(ok), drift=float(l_drift[k])
                         if math.isfinite(l_drift[k]) else None)
    return out


# ---------------------------------------------------------------------------
# converge_study


@dataclass
class TrackedRow:
    index: int
    base: complex
    h_values: List[complex]
    extrapolated: complex
    observed_order: Optional[float]
    l_values: List[complex]
    l_drift: float
    converged: bool

    def to_dict(self):
        def c(z):
            return None if z is None else [float(np.real(z)), float(np.imag(z))]
        return {"index": self.index, "base": c(self.base),
                "h_values": [c(v) for v in self.h_values], "extrapolated": c(self.extrapolated),
                "observed_order": self.observed_order,
                "l_values": [c(v) for v in self.l_values],
                "l_drift": self.l_drift if math.isfinite(self.l_drift) else None,
                "converged": self.converged}


def richardson(values: Sequence[complex], ratio: float = 2.0, order: float = 2.0):
    """Extrapolated limit and observed order from a sequence at ``h, h/r, h/r^2, ...``.

    With three or more values the order is estimated from the last three;
    with two the nominal ``order`` is assumed and ``None`` reported.
    """
    v = [complex(x) for x in values]
    if len(v) < 2:
        raise ValueError("need at least two levels")
    observed = None
    p = order
    if len(v) >= 3:
        d1 = abs(v[-2] - v[-3])
        d2 = abs(v[-1] - v[-2])
        if d1 > 0 and d2 > 0:
            observed = math.log(d1 / d2) / math.log(ratio)
            p = observed
    if p <= 0:
        return v[-1], observed
    return v[-1] + (v[-1] - v[-2]) / (ratio ** p - 1.0), observed


def _tracked_seeds(problem: Problem, grid: Grid, track: Optional[int],
                   threshold: float) -> List[complex]:
    pairs = problem.spectrum(grid)
    loc = [p for p in pairs if p.localization <= threshold and p.z != 0]
    pool = loc if loc else pairs
    pool = sorted(pool, key=lambda p: (abs(p.z), np.angle(p.z)))
    return [p.z for p in pool[: (track or 3)]]


def lowest_free_eigenvalue(params: LameParams, grid: Grid, opts: SolveOptions = SolveOptions()) -> float:
    """Smallest eigenvalue of the discrete Lamé matrix on ``grid``."""
    return float(lowest_hermitian(assemble_lame(params, grid), opts)[0])


def converge_study(problem: Problem, grid: Grid, levels: int,
                   seeds: Optional[Sequence[complex]] = None, track: Optional[int] = None,
                   settings: FlagSettings = FlagSettings()) -> List[TrackedRow]:
    """Follow eigenvalues through ``levels`` h-halvings and, separately, L-doublings.

    ``seeds`` are base-grid eigenvalues to follow (default: the ``track``
    smallest localized ones, or the smallest overall if none is localized).
    Each level re-solves near the previous level's value; along the
    L-doubling chain only localized eigenvectors are followed, so a
    box-filling mode ends with infinite drift. Rows carry the Richardson
    limit, the observed order in ``h`` and the L-doubling drift between the
    last two box sizes; ``converged`` follows the same rule as
    :func:`flag_converged`.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if seeds is None:
        seeds = _tracked_seeds(problem, grid, track, settings.threshold)
    rows = []
    for i, z0 in enumerate(seeds):
        h_vals = [complex(z0)]
        g = grid
        for _ in range(levels - 1):
            g = g.refined()
            h_vals.append(_follow(problem, g, h_vals[-1], settings.count))
        l_vals = [complex(z0)]
        g = grid
        for _ in range(levels - 1):
            g = g.doubled()
            nxt = _follow(problem, g, l_vals[-1], settings.count, settings.threshold)
            if nxt is None:
                break
            l_vals.append(nxt)
        extrap, order = richardson(h_vals)
        l_drift = _relative(l_vals[-2], l_vals[-1]) if len(l_vals) == levels else math.inf
        h_drift = _relative(h_vals[0], h_vals[1])
        rows.append(TrackedRow(i, complex(z0), h_vals, extrap, order, l_vals, l_drift,
                               bool(l_drift <= settings.l_tol and h_drift <= settings.h_tol)))
    return rows


def _follow(problem: Problem, grid: Grid, z: complex, count: int,
            threshold: Optional[float] = None) -> Optional[complex]:
    """Nearest eigenvalue to ``z`` on ``grid``.

    With ``threshold`` only localized eigenvectors qualify and ``None`` is
    returned when there is none (the mode filled the box).
    """
    try:
        cands = problem.near(grid, z, count)
    except SolverError:
        return None
    if threshold is not None:
        cands = [c for c in cands if c.localization <= threshold]
    if not cands:
        return None
    return min((c.z for c in cands), key=lambda w: abs(w - z))
