"""Scenario pipelines and the report artifacts (JSON, CSV, SVG)."""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import enclosure as enc
from .errors import (ConfigParseError, DimensionMismatch, EspecError, HypothesisViolated,
                     RootNotBracketed, ScenarioFailed, ZeroMoment)
from .model import FieldKind
from .pencil import (PencilEigenpair, build_pencil, pairs_near, pencil_spectrum,
                     potential_operator)
from .scenario import Scenario, load_scenarios
from .study import Problem, converge_study, flag_converged

IDENTITY_TOL = 1e-8
FREE_REAL_TOL = 1e-9
TRACE_SLACK = 0.01

PASS, FAIL, INFO, SKIP = "PASS", "FAIL", "INFO", "SKIP"


def fmt(x) -> str:
    """Shortest round-trip decimal text for a float (also what ``json`` emits)."""
    return repr(float(x))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, FieldKind):
        return obj.value
    return obj


def _check(name: str, status: str, detail: str = "") -> Dict[str, str]:
    return {"name": name, "status": status, "detail": detail}


@dataclass
class RunReport:
    scenario: Scenario
    eigenvalues: List[PencilEigenpair] = field(default_factory=list)
    regions: List[dict] = field(default_factory=list)
    checks: List[dict] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return FAIL if any(c["status"] == FAIL for c in self.checks) else PASS

    def body(self) -> dict:
        """Everything that is deterministic; timings are kept out."""
        return _clean({
            "schema": 1,
            "scenario": self.scenario.to_dict(),
            "status": self.status,
            "eigenvalues": [p.to_dict() for p in self.eigenvalues],
            "regions": self.regions,
            "checks": self.checks,
            "extra": self.extra,
        })

    def to_json(self) -> str:
        body = self.body()
        canonical = json.dumps(body, sort_keys=True, separators=(",", ":"))
        body["checksum"] = hashlib.sha256(canonical.encode()).hexdigest()
        return json.dumps(body, sort_keys=True, indent=1) + "\n"


class _Timer:
    def __init__(self):
        self.phases: Dict[str, float] = {}

    @contextlib.contextmanager
    def __call__(self, phase):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[phase] = self.phases.get(phase, 0.0) + time.perf_counter() - t0


# ---------------------------------------------------------------------------
# pipelines


def _inf_norm(m) -> float:
    return float(max(np.asarray(abs(m).sum(axis=1)).max(initial=0.0), 1.0))


def _verify(region: enc.EnclosureRegion, pairs, slack, report: RunReport):
    report.regions.append(region.to_dict())
    report.checks.extend(enc.verify_spectrum(region, pairs, slack).records)


def _pencil_pairs(scn: Scenario, problem: Problem, grid, timer, report, shift=None):
    opts = scn.solver if shift is None else scn.solver.with_(shift=shift)
    a = problem.field(grid)
    p = build_pencil(scn.params, grid, a)
    with timer("solve"):
        pairs = pencil_spectrum(p, opts, scn.count)
    if scn.check_convergence:
        with timer("convergence"):
            pairs = flag_converged(replace(problem, opts=opts), grid, pairs, scn.flags)
    return p, a, pairs


def _identity_checks(p, a, pairs, report: RunReport):
    norm = p.norm
    worst = max((q.residual for q in pairs), default=0.0)
    report.checks.append(_check("correspondence_residual",
                                PASS if worst <= IDENTITY_TOL * norm else FAIL,
                                f"max {worst!r} vs {IDENTITY_TOL} * {norm!r}"))
    gap = max((q.companion_gap for q in pairs), default=0.0)
    report.checks.append(_check("companion_gap", PASS if gap <= IDENTITY_TOL else FAIL,
                                f"max ||psi2 - z psi1|| = {gap!r}"))
    if a.sup_norm() == 0:
        re_max = max((abs(q.z.real) for q in pairs), default=0.0)
        report.checks.append(_check("free_spectrum_imaginary",
                                    PASS if re_max <= FREE_REAL_TOL * norm else FAIL,
                                    f"max |Re z| = {re_max!r}"))


def _damping_regions(scn: Scenario, a, pairs, report: RunReport):
    d = scn.grid.dim
    if d == 1:
        _verify(enc.region_absence_1d(scn.params, a), pairs, scn.slack, report)
        if not a.is_real:
            return
        for sign in (1, -1):
            name = "region:HalfLineLowerBound1D:" + ("positive" if sign > 0 else "negative")
            try:
                reg = enc.region_sa_lower_1d(scn.params, a, sign)
            except ZeroMoment:
                report.checks.append(_check(name, SKIP, "weighted moment vanishes"))
                continue
            if not reg.active:
                report.regions.append(reg.to_dict())
                report.checks.append(_check(name, SKIP, "integral hypothesis fails"))
                continue
            _verify(reg, pairs, scn.slack, report)
        return
    if scn.constant is None:
        report.checks.append(_check("region:DiskComplementNSA", SKIP, "no constant supplied"))
        return
    _verify(enc.region_damping_nsa(scn.params, d, scn.gamma, a, scn.constant), pairs,
            scn.slack, report)
    if a.is_real:
        for sign in (1, -1):
            reg = enc.region_damping_sa(scn.params, d, scn.gamma, a, sign, scn.constant)
            _verify(reg, pairs, scn.slack, report)
            if reg.absent:
                hits = [q for q in pairs if q.converged and enc.is_real_value(q.z)
                        and sign * q.z.real > 0]
                report.checks.append(_check(
                    "absence:" + ("positive" if sign > 0 else "negative"), INFO,
                    f"absence predicate holds; {len(hits)} converged real pairs of this sign"))


def _run_pencil(scn, timer, report):
    problem = Problem(scn.params, scn.field_spec, "pencil", scn.solver)
    p, a, pairs = _pencil_pairs(scn, problem, scn.grid, timer, report)
    report.eigenvalues = pairs
    _identity_checks(p, a, pairs, report)
    with timer("regions"):
        _damping_regions(scn, a, pairs, report)
    return p, a


def _run_verify_1d(scn, timer, report):
    if scn.grid.dim != 1:
        raise DimensionMismatch("verify-1d needs a 1D grid")
    p, a = _run_pencil(scn, timer, report)
    zs = scn.z_values or (1.0,)
    if not a.is_real:
        report.checks.append(_check("trace_formula", SKIP, "damping is not real"))
        report.checks.append(_check("bargmann_count", SKIP, "damping is not real"))
        return
    with timer("trace"):
        for z in zs:
            bound = enc.trace_lower_bound(scn.params, z, a)
            total = enc.trace_sum(scn.params, a, z, scn.solver)
            ok = total >= bound - TRACE_SLACK * abs(bound)
            report.checks.append(_check(f"trace_formula:z={fmt(z)}", PASS if ok else FAIL,
                                        f"sum {total!r} vs bound {bound!r}"))
            cb = enc.bargmann_count_bound(scn.params, z, a, scn.solver)
            report.checks.append(_check(f"bargmann_count:z={fmt(z)}", PASS if cb.holds else FAIL,
                                        f"observed {cb.observed} vs limit {cb.limit!r}"))
            report.extra.setdefault("trace", []).append(
                {"z": z, "sum": total, "bound": bound, "count": cb.to_dict()})


def _run_potential(scn, timer, report):
    problem = Problem(scn.params, scn.field_spec, "potential", scn.solver)
    v = problem.field(scn.grid)
    with timer("solve"):
        pairs = problem.spectrum(scn.grid, scn.count, scn.solver.shift)
    if scn.check_convergence:
        with timer("convergence"):
            pairs = flag_converged(problem, scn.grid, pairs, scn.flags)
    report.eigenvalues = pairs
    norm = _inf_norm(potential_operator(scn.params, scn.grid, v).matrix)
    worst = max((q.residual for q in pairs), default=0.0)
    report.checks.append(_check("eigen_residual", PASS if worst <= IDENTITY_TOL * norm else FAIL,
                                f"max {worst!r} vs {IDENTITY_TOL} * {norm!r}"))
    d = scn.grid.dim
    with timer("regions"):
        if d == 1:
            _verify(enc.region_1d_nsa(scn.params, v), pairs, scn.slack, report)
            if v.is_real:
                _verify(enc.region_1d_nsa(scn.params, v, self_adjoint=True), pairs, scn.slack, report)
        elif scn.constant is None:
            report.checks.append(_check("region:PotentialDisk", SKIP, "no constant supplied"))
        else:
            sa = scn.self_adjoint and v.is_real
            _verify(enc.region_potential(scn.params, d, scn.gamma, v, sa, scn.constant), pairs,
                    scn.slack, report)


def _run_alpha(scn, timer, report):
    problem = Problem(scn.params, scn.field_spec, "pencil", scn.solver)
    a = problem.field(scn.grid)
    z = scn.z_values[0]
    with timer("alpha"):
        try:
            br = enc.alpha_bracket_and_solve(scn.params, a, z, scn.solver)
        except HypothesisViolated as exc:
            report.checks.append(_check("alpha_bracket", SKIP, f"hypothesis fails: {exc}"))
            return
        except RootNotBracketed as exc:
            lo, hi = enc.alpha_bracket(a, z)
            report.extra["alpha"] = {"lower": lo, "upper": hi, "solution": None}
            report.checks.append(_check("alpha_bracket", FAIL, str(exc)))
            return
    report.extra["alpha"] = br.to_dict()
    inside = br.lower <= br.solution <= br.upper
    report.checks.append(_check("alpha_in_bracket", PASS if inside else FAIL,
                                f"alpha {br.solution!r} in [{br.lower!r}, {br.upper!r}]"))
    report.checks.append(_check("alpha_unique", PASS if br.sign_changes == 1 else FAIL,
                                f"{br.sign_changes} sign changes on the scan"))
    with timer("solve"):
        p = build_pencil(scn.params, scn.grid, a)
        near = pairs_near(p, br.s_star, scn.solver, count=3)
    report.eigenvalues = near
    best = min(abs(q.z - br.s_star) / abs(br.s_star) for q in near)
    report.checks.append(_check("alpha_pencil_match", PASS if best <= 0.01 else FAIL,
                                f"relative distance {best!r} from s* = {br.s_star!r}"))


def _run_calibrate(scn, timer, report):
    d = scn.grid.dim
    family, per_scale = [], []
    shift = complex(scn.solver.shift)
    for s in scn.scales:
        problem = Problem(scn.params, scn.field_spec, "pencil", scn.solver, scale=s)
        grid = scn.grid.scaled(s) if s != 1.0 else scn.grid
        _, a, pairs = _pencil_pairs(scn, problem, grid, timer, report, shift=shift * s)
        family.append((a, pairs))
        per_scale.append(enc.calibrate_constant([(a, pairs)], scn.gamma, d))
        if not report.eigenvalues:
            report.eigenvalues = pairs
    overall = enc.calibrate_constant(family, scn.gamma, d)
    report.extra["calibration"] = {"gamma": scn.gamma, "dim": d, "constant": overall,
                                   "per_scale": dict(zip([fmt(s) for s in scn.scales], per_scale))}
    positive = [c for c in per_scale if c > 0]
    if len(positive) != len(per_scale) or not positive:
        report.checks.append(_check("scale_invariance", SKIP,
                                    "some family members have no converged pairs"))
    else:
        spread = (max(positive) - min(positive)) / max(positive)
        report.checks.append(_check("scale_invariance", PASS if spread <= 1e-6 else FAIL,
                                    f"relative spread {spread!r}"))
    if overall > 0 and d >= 2:
        outside = 0
        for a, pairs in family:
            reg = enc.region_damping_nsa(scn.params, d, scn.gamma, a, 1.1 * overall)
            outside += len(enc.verify_spectrum(reg, pairs).outside)
        report.checks.append(_check("calibrated_region", PASS if outside == 0 else FAIL,
                                    f"{outside} converged pairs outside (constant x 1.1)"))


def _run_converge(scn, timer, report):
    problem = Problem(scn.params, scn.field_spec, scn.problem, scn.solver)
    with timer("solve"):
        base = problem.spectrum(scn.grid, scn.count, scn.solver.shift)
    loc = [q for q in base if q.localization <= scn.flags.threshold and q.z != 0]
    pool = sorted(loc or base, key=lambda q: (round(abs(q.z), 12), float(np.angle(q.z))))
    seeds = pool[: scn.track or 3]
    with timer("convergence"):
        rows = converge_study(problem, scn.grid, scn.levels, [q.z for q in seeds],
                              settings=scn.flags)
    report.eigenvalues = [replace(q, converged=r.converged,
                                  drift=r.l_drift if math.isfinite(r.l_drift) else None)
                          for q, r in zip(seeds, rows)]
    report.extra["convergence"] = [r.to_dict() for r in rows]
    for r in rows:
        order = "n/a" if r.observed_order is None else fmt(r.observed_order)
        report.checks.append(_check(f"converge:{r.index}", INFO,
                                    f"order {order}, L-drift {r.l_drift!r}"))


PIPELINES = {
    "pencil": _run_pencil,
    "verify-1d": _run_verify_1d,
    "potential": _run_potential,
    "alpha": _run_alpha,
    "calibrate": _run_calibrate,
    "converge": _run_converge,
}


def execute(scn: Scenario, levels: Optional[int] = None) -> RunReport:
    """Run one scenario in memory. Module errors come back as :class:`ScenarioFailed`."""
    if levels is not None:
        scn = replace(scn, mode="converge", levels=levels)
    report = RunReport(scn)
    timer = _Timer()
    try:
        with timer("total"):
            PIPELINES[scn.mode](scn, timer, report)
    except EspecError as exc:
        raise ScenarioFailed(scn.name, exc) from exc
    report.timings = dict(sorted(timer.phases.items()))
    return report


def run_scenario(path, out=None) -> RunReport:
    """Parse a one-scenario file, run it, and write artifacts to ``out`` when given."""
    scns = load_scenarios(path)
    if len(scns) != 1:
        raise ConfigParseError(f"file holds {len(scns)} scenarios; run them with the CLI",
                               "scenarios")
    report = execute(scns[0])
    if out is not None:
        emit_outputs(report, out)
    return report


# ---------------------------------------------------------------------------
# artifacts

CSV_COLUMNS = ("re", "im", "residual", "localization", "converged")


def csv_text(report: RunReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in report.eigenvalues:
        w.writerow([fmt(p.z.real), fmt(p.z.imag), fmt(p.residual), fmt(p.localization),
                    "true" if p.converged else "false"])
    return buf.getvalue()


def emit_outputs(report: RunReport, directory) -> Dict[str, Path]:
    """Write report.json, eigenvalues.csv, spectrum.svg and timings.json into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "report.json": report.to_json(),
        "eigenvalues.csv": csv_text(report),
        "spectrum.svg": render_svg(report),
        "timings.json": json.dumps(_clean(report.timings), sort_keys=True, indent=1) + "\n",
    }
    paths = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths[name] = path
    return paths


_COLORS = ("#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#e377c2")
_SIZE = 640
_MARGIN = 60


def render_svg(report: RunReport) -> str:
    """Static complex-plane picture: eigenvalues, region boundaries and a legend."""
    finite = [r for r in report.regions
              if r.get("radius") is not None and r["radius"] > 0 and r.get("active", True)]
    extent = max([abs(p.z.real) for p in report.eigenvalues] +
                 [abs(p.z.imag) for p in report.eigenvalues] +
                 [r["radius"] for r in finite] + [1e-12])
    extent = 1.1 * extent if extent > 1e-12 else 1.0
    plot = _SIZE - 2 * _MARGIN
    cx = cy = _SIZE / 2.0
    scale = plot / (2.0 * extent)

    def sx(x):
        return f"{cx + x * scale:.2f}"

    def sy(y):
        return f"{cy - y * scale:.2f}"

    height = _SIZE + 60 + 16 * len(report.regions)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{height}" '
             f'viewBox="0 0 {_SIZE} {height}" font-family="sans-serif" font-size="11">',
             f'<rect x="0" y="0" width="{_SIZE}" height="{height}" fill="white"/>',
             f'<text x="{_MARGIN}" y="24" font-size="14">{_escape(report.scenario.name)}</text>',
             f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot}" height="{plot}" fill="none" stroke="#999"/>',
             f'<line x1="{_MARGIN}" y1="{cy:.2f}" x2="{_SIZE - _MARGIN}" y2="{cy:.2f}" stroke="#444"/>',
             f'<line x1="{cx:.2f}" y1="{_MARGIN}" x2="{cx:.2f}" y2="{_SIZE - _MARGIN}" stroke="#444"/>',
             f'<text x="{_SIZE - _MARGIN + 4}" y="{cy + 4:.2f}">Re</text>',
             f'<text x="{cx - 8:.2f}" y="{_MARGIN - 6}">Im</text>']
    for t in (-extent, -extent / 2, extent / 2, extent):
        lines.append(f'<text x="{sx(t)}" y="{cy + 14:.2f}" text-anchor="middle">{t:.3g}</text>')
        lines.append(f'<text x="{cx + 4:.2f}" y="{float(sy(t)) + 4:.2f}">{t:.3g}</text>')
    lines.append(f'<clipPath id="plot"><rect x="{_MARGIN}" y="{_MARGIN}" '
                 f'width="{plot}" height="{plot}"/></clipPath>')
    legend = []
    for i, r in enumerate(report.regions):
        color = _COLORS[i % len(_COLORS)]
        label = f'{r["kind"]}' + (f' ({r["label"]})' if r.get("label") else "")
        rad = r.get("radius")
        if not r.get("active", True):
            legend.append((color, label + ": hypothesis fails, not drawn"))
            continue
        if rad is None:
            if r.get("entire_plane_excluded"):
                legend.append((color, label + ": entire plane excluded"))
            else:
                legend.append((color, label + ": unbounded"))
            continue
        if r["kind"] in ("RealRayBoundSA", "HalfLineLowerBound1D", "PotentialDiskSA"):
            sign = r.get("sign") or -1
            if r["kind"] == "PotentialDiskSA":
                x0, x1 = 0.0, -min(rad, extent)
            elif r["kind"] == "RealRayBoundSA" and r["gamma"] - r["dim"] / 2.0 > 0:
                x0, x1 = 0.0, sign * min(rad, extent)
            else:
                x0, x1 = sign * min(rad, extent), sign * extent
            lines.append(f'<line x1="{sx(x0)}" y1="{cy:.2f}" x2="{sx(x1)}" y2="{cy:.2f}" '
                         f'stroke="{color}" stroke-width="4" opacity="0.6" clip-path="url(#plot)"/>')
            legend.append((color, label + f": allowed real ray, radius {rad:.6g}"))
        else:
            if rad > 0:
                lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{rad * scale:.2f}" fill="none" '
                             f'stroke="{color}" stroke-dasharray="6,3" clip-path="url(#plot)"/>')
            legend.append((color, label + f": radius {rad:.6g}"))
    for p in report.eigenvalues:
        if p.converged:
            lines.append(f'<circle cx="{sx(p.z.real)}" cy="{sy(p.z.imag)}" r="3.5" fill="#1f77b4"/>')
        else:
            lines.append(f'<circle cx="{sx(p.z.real)}" cy="{sy(p.z.imag)}" r="2.5" fill="none" '
                         f'stroke="#888"/>')
    y = _SIZE - _MARGIN + 34
    lines.append(f'<circle cx="{_MARGIN + 6}" cy="{y - 4}" r="3.5" fill="#1f77b4"/>'
                 f'<text x="{_MARGIN + 16}" y="{y}">converged eigenvalue</text>')
    lines.append(f'<circle cx="{_MARGIN + 186}" cy="{y - 4}" r="2.5" fill="none" stroke="#888"/>'
                 f'<text x="{_MARGIN + 196}" y="{y}">not converged</text>')
    for color, text in legend:
        y += 16
        lines.append(f'<line x1="{_MARGIN}" y1="{y - 4}" x2="{_MARGIN + 12}" y2="{y - 4}" '
                     f'stroke="{color}" stroke-width="3"/>'
                     f'<text x="{_MARGIN + 16}" y="{y}">{_escape(text)}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
