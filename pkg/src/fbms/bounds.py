"""Topological index formulas, area estimates and the inequality harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import InputMismatchError, ParameterError, RankError, SignError
from .heat import index_bound_closed_form
from .serialize import dumps

__all__ = [
    "upsilon",
    "riemann_roch",
    "acs_lower_bound",
    "fraser_li_cap",
    "geometric_area_bounds",
    "theorem_d_bound",
    "InequalityCheck",
    "ReportInputs",
    "BoundReport",
    "verify_inequalities",
]


def _check_gm(g: int, m: int) -> None:
    if int(g) != g or int(m) != m or g < 0 or m < 1:
        raise ParameterError(f"need integers g >= 0 and m >= 1, got g={g}, m={m}")


def upsilon(g: int, m: int) -> int:
    """Topological defect: 0 if chi > 0, 1 if chi = 0, 6g - 6 + 3m if chi < 0."""
    _check_gm(g, m)
    chi = 2 - 2 * g - m
    if chi > 0:
        return 0
    if chi == 0:
        return 1
    return 6 * g - 6 + 3 * m


def riemann_roch(n_rank: int, chi: int, mu: int, hints: bool = True) -> dict:
    """Fredholm index ``n chi + mu`` of a bordered Cauchy-Riemann operator.

    Also returns the injectivity/surjectivity criteria (rank 1 only), the
    Maslov index ``2 chi`` of the doubled antiholomorphic bundle and the
    difference ``2 h0(Lambda^{0,1}) - 2 h0(T^{0,1} x Lambda^{1,0}) = 3 chi``.
    ``obstruction_2h0`` is the resulting bound on ``2 h0(T^{0,1} x Lambda^{1,0})``:
    0 for chi > 0, the Clifford cap 1 for chi = 0 and ``-3 chi`` for chi < 0.

    Raises
    ------
    RankError
        If hints are requested for rank > 1.
    """
    if n_rank < 1:
        raise ParameterError("rank must be positive")
    if hints and n_rank != 1:
        raise RankError("injectivity/surjectivity criteria are stated for line bundles only")
    out = {
        "index": n_rank * chi + mu,
        "maslov_antiholomorphic": 2 * chi,
        "h0_difference": 3 * chi,
        "obstruction_2h0": 0 if chi > 0 else (1 if chi == 0 else -3 * chi),
    }
    if hints:
        out["injective_hint"] = mu < 0
        out["surjective_hint"] = mu + 2 * chi > 0
    return out


def acs_lower_bound(g: int, m: int) -> Fraction:
    """Exact lower bound ``(2g + m - 1) / 3`` for the area index."""
    _check_gm(g, m)
    return Fraction(2 * g + m - 1, 3)


def fraser_li_cap(g: int, m: int) -> float:
    """``min{4 pi (g + m), 16 pi floor((g + 3) / 2)}``."""
    _check_gm(g, m)
    return min(4 * math.pi * (g + m), 16 * math.pi * ((g + 3) // 2))


def theorem_d_bound(g: int, m: int, c: float) -> float:
    """``c * min{4 pi (g + m), 16 pi floor((g + 3)/2)} + upsilon(g, m)``."""
    if c <= 0:
        raise ParameterError("c must be positive")
    return c * fraser_li_cap(g, m) + upsilon(g, m)


def geometric_area_bounds(g: int, m: int, area: float, boundary_length: float, c1: float = 1.0,
                          alpha: Optional[float] = None, kappa: Optional[float] = None,
                          concave_alpha: Optional[float] = None) -> dict:
    """Area estimates in the convex and concave regimes.

    Convex (``alpha > 0`` lower bound on II): ``|S| <= c1 min{4 pi (g+m)/alpha,
    16 pi floor((g+3)/2)/alpha}``.
    Concave (``sec <= -kappa <= 0`` and ``II <= -concave_alpha <= 0``):
    ``kappa |S| + concave_alpha |dS| <= -2 pi chi``. The concave inequality
    has a nonpositive left side only when chi <= 0; for chi > 0 it is marked
    inapplicable since no such surface exists under the hypotheses.

    Raises
    ------
    SignError
        If a parameter is outside its regime.
    """
    _check_gm(g, m)
    chi = 2 - 2 * g - m
    out = {}
    if alpha is not None:
        if alpha <= 0 or c1 <= 0:
            raise SignError("convex regime needs alpha > 0 and c1 > 0")
        cap = c1 * min(4 * math.pi / alpha * (g + m), 16 * math.pi / alpha * ((g + 3) // 2))
        out["convex"] = {"lhs": area, "rhs": cap, "margin": cap - area, "pass": area <= cap}
    if kappa is not None or concave_alpha is not None:
        k = 0.0 if kappa is None else kappa
        a = 0.0 if concave_alpha is None else concave_alpha
        if k < 0 or a < 0:
            raise SignError("concave regime needs kappa >= 0 and alpha >= 0")
        lhs = k * area + a * boundary_length
        rhs = -2 * math.pi * chi
        out["concave"] = {
            "lhs": lhs, "rhs": rhs, "margin": rhs - lhs, "pass": lhs <= rhs,
            "applicable": chi <= 0 or (k == 0 and a == 0),
        }
    return out


@dataclass(frozen=True)
class InequalityCheck:
    """One recorded inequality ``lhs <= rhs`` with ``margin = rhs - lhs``."""

    name: str
    lhs: object
    rhs: object
    margin: object
    passed: bool
    tolerance: float = 0.0
    asserted: bool = True
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "pass": self.passed, "tolerance": self.tolerance, "asserted": self.asserted,
                "note": self.note}


def _le(name, lhs, rhs, tol=0.0, asserted=True, note="") -> InequalityCheck:
    margin = rhs - lhs
    return InequalityCheck(name, lhs, rhs, margin, bool(margin >= -tol), tol, asserted, note)


@dataclass
class ReportInputs:
    """Everything measured on one surface at one refinement."""

    surface_id: str
    g: int
    m: int
    ind_area: int
    nul_area: int
    ind_energy: int
    nul_energy: int
    nul_tangential: int
    beta: int
    area: float
    boundary_length: float
    rho: float = 0.0
    alpha: float = 0.0
    c_empirical: float = 1.0
    c1: Optional[float] = None
    c2: Optional[float] = None
    convex_alpha: Optional[float] = None
    signatures: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BoundReport:
    surface_id: str
    topology: dict
    counts: dict
    upsilon: int
    acs_lower: Fraction
    area: float
    boundary_length: float
    composite: dict
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.asserted)

    def as_dict(self) -> dict:
        return {
            "surface_id": self.surface_id,
            "topology": self.topology,
            "counts": self.counts,
            "upsilon": self.upsilon,
            "acs_lower": self.acs_lower,
            "area": self.area,
            "boundary_length": self.boundary_length,
            "composite": self.composite,
            "checks": [c.as_dict() for c in self.checks],
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return dumps(self.as_dict())

    def table(self) -> str:
        lines = [f"{'check':<34} {'lhs':>14} {'rhs':>14} {'margin':>14}  status"]
        for c in self.checks:
            status = ("pass" if c.passed else "FAIL") + ("" if c.asserted else " (report)")
            lines.append(f"{c.name:<34} {_fmt(c.lhs):>14} {_fmt(c.rhs):>14} {_fmt(c.margin):>14}  {status}")
        return "\n".join(lines)


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def verify_inequalities(inputs: ReportInputs) -> BoundReport:
    """Evaluate every inequality of the index comparison on measured counts.

    Counts are compared with integer arithmetic (zero tolerance). The
    closed-form heat bound is recorded as a consistency check only, because
    its constants are estimates.

    Raises
    ------
    InputMismatchError
        If the measurements come from different meshes.
    """
    sig = {k: v for k, v in inputs.signatures.items() if v is not None}
    if len(set(sig.values())) > 1:
        raise InputMismatchError(f"inputs come from different surfaces: {sig}")
    g, m = inputs.g, inputs.m
    chi = 2 - 2 * g - m
    ups = upsilon(g, m)
    iA, nA = inputs.ind_area, inputs.nul_area
    iE, nE, nT = inputs.ind_energy, inputs.nul_energy, inputs.nul_tangential
    acs = acs_lower_bound(g, m)
    cap = fraser_li_cap(g, m)
    c = inputs.c_empirical
    dbound = theorem_d_bound(g, m, c)
    checks = [
        _le("energy_index_le_area_index", iE, iA),
        _le("area_index_le_energy_index_plus_upsilon", iA, iE + ups),
        _le("nullity_sandwich_lower", iE + nE - nT, iA + nA),
        _le("nullity_sandwich_upper", iA + nA, iE + nE - nT + ups),
        _le("nullity_difference_le_upsilon", abs(nA - (nE - nT)), ups),
        _le("energy_index_plus_nullity_le_beta", iE + nE, inputs.beta),
        _le("acs_lower_bound_le_area_index", acs, Fraction(iA)),
        _le("theorem_d_area_index", iA, dbound, asserted=False, note="c is an empirical input"),
        _le("theorem_d_area_index_plus_nullity", iA + nA, dbound, asserted=False,
            note="c is an empirical input"),
    ]
    composite = {
        "theorem_d_bound": dbound,
        "fraser_li_cap": cap,
        "c_empirical": c,
        "c_min_tight": max(0.0, (iA + nA - ups) / cap),
    }
    if inputs.c1 is not None and inputs.c2 is not None:
        mt2 = index_bound_closed_form(inputs.area, inputs.rho, inputs.c1, inputs.c2, 3)
        composite["mt2_bound"] = mt2["bound"]
        composite["mt2_t_star"] = mt2["t_star"]
        checks.append(_le("energy_index_plus_nullity_le_heat_bound", float(iE + nE), mt2["bound"],
                          asserted=False, note="constants c1, c2 are empirical estimates"))
    if inputs.convex_alpha is not None and inputs.convex_alpha > 0:
        geo = geometric_area_bounds(g, m, inputs.area, inputs.boundary_length,
                                    c1=inputs.c1 or 1.0, alpha=inputs.convex_alpha)["convex"]
        checks.append(_le("fraser_li_area_bound", inputs.area, geo["rhs"], asserted=False,
                          note="c1 is an empirical input"))
    counts = {
        "ind_area": iA, "nul_area": nA, "ind_energy": iE, "nul_energy": nE,
        "nul_tangential": nT, "beta": inputs.beta,
    }
    return BoundReport(
        surface_id=inputs.surface_id,
        topology={"g": g, "m": m, "chi": chi},
        counts=counts,
        upsilon=ups,
        acs_lower=acs,
        area=inputs.area,
        boundary_length=inputs.boundary_length,
        composite=composite,
        checks=tuple(checks),
    )
