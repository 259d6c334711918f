"""Press-fit physics: the closed-form equations of the MV/HU assembly.

Every function accepts Python floats or numpy arrays (broadcast together) and
raises ``ValueError`` on non-finite input or when a precondition fails. The
same functions back :class:`~causalman.scm.PhysicsFormula` mechanisms, so the
sampler and the standalone API cannot drift apart.

Units are nominal only: mm, N, MPa, N/mm.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


def _arr(*xs):
    out = [np.asarray(x, dtype=float) for x in xs]
    for a in out:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")
    return out


def _ret(x):
    return float(x) if np.ndim(x) == 0 else x


def _positive(name, a):
    if np.any(a <= 0):
        raise ValueError(f"{name} must be > 0")


def _unit_interval(name, a):
    if np.any((a < 0) | (a > 1)):
        raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class MvParams:
    e_mv: float
    a_leak_mv_raw: float
    d_mv_max: float
    d_mv_min: float
    l_mv_pf: float

    def __post_init__(self):
        if not (self.e_mv > 0 and self.d_mv_max >= self.d_mv_min > 0 and self.l_mv_pf > 0):
            raise ValueError(f"invalid magnetic valve parameters {self}")


@dataclass(frozen=True)
class BoreParams:
    e_bore: float
    d_bore_max: float
    d_bore_min: float

    def __post_init__(self):
        if not (self.e_bore > 0 and self.d_bore_max >= self.d_bore_min > 0):
            raise ValueError(f"invalid bore parameters {self}")


@dataclass(frozen=True)
class MachineParams:
    """Machine settings of one press-fit station.

    ``trigger_stop_sigma`` is the HalfNormal scale of the force overshoot
    before the stop trigger fires.
    """

    k_stiff_machine: float = 20000.0
    k_stiff_pf_ref: float = 8250.0
    k_stiff_pf_dd_ref: float = 0.05
    k_stiff_pf_e_ref: float = 52500.0
    beta_asym: float = 0.5
    leak_tol_0: float = 0.0715
    leak_tol_ref: float = 0.002
    d_force_ref: float = 1000.0
    f_lim: float = 18500.0
    s0: float = 10.0
    trigger_stop_sigma: float = 150.0

    def __post_init__(self):
        positive = (self.k_stiff_machine, self.k_stiff_pf_ref, self.k_stiff_pf_dd_ref,
                    self.k_stiff_pf_e_ref, self.leak_tol_ref, self.d_force_ref,
                    self.trigger_stop_sigma)
        if any(not v > 0 for v in positive):
            raise ValueError("machine stiffness and reference values must be > 0")
        if not 0.0 <= self.beta_asym <= 1.0:
            raise ValueError("beta_asym must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Equations


def effective_elasticity(e_bore, e_mv):
    e_bore, e_mv = _arr(e_bore, e_mv)
    _positive("elasticity", e_bore)
    _positive("elasticity", e_mv)
    return _ret(1.0 / (1.0 / e_bore + 1.0 / e_mv))


def delta_d_max(d_mv_max, d_bore_min):
    d_mv_max, d_bore_min = _arr(d_mv_max, d_bore_min)
    return _ret(d_mv_max - d_bore_min)


def delta_d_min(d_mv_min, d_bore_max):
    d_mv_min, d_bore_max = _arr(d_mv_min, d_bore_max)
    return _ret(d_mv_min - d_bore_max)


def delta_d(d_mv_max, d_bore_min, d_mv_min, d_bore_max):
    """Interference at the largest and smallest diameters: (dd_max, dd_min)."""
    return delta_d_max(d_mv_max, d_bore_min), delta_d_min(d_mv_min, d_bore_max)


def delta_d_mean(dd_max, dd_min, beta_asym):
    dd_max, dd_min, beta = _arr(dd_max, dd_min, beta_asym)
    _unit_interval("beta_asym", beta)
    return _ret(beta * dd_max + (1.0 - beta) * dd_min)


def leak_tol_machine(leak_tol_0, leak_tol_ref, d_force_relu, d_force_ref):
    lt0, ltref, dfr, dfref = _arr(leak_tol_0, leak_tol_ref, d_force_relu, d_force_ref)
    _positive("leak_tol_ref", ltref)
    _positive("d_force_ref", dfref)
    if np.any(dfr < 0):
        raise ValueError("d_force_relu must be >= 0")
    return _ret(lt0 + ltref * dfr / dfref)


def leak_area_pf(dd_max, dd_min, leak_tol, beta_asym):
    """Press-fit leakage area: beta*relu(dd_max - tol) + (1 - beta)*relu(dd_min - tol)."""
    dd_max, dd_min, tol, beta = _arr(dd_max, dd_min, leak_tol, beta_asym)
    _unit_interval("beta_asym", beta)
    a_max = np.maximum(dd_max - tol, 0.0)
    a_min = np.maximum(dd_min - tol, 0.0)
    return _ret(beta * a_max + (1.0 - beta) * a_min)


def a_leak_mv(a_raw):
    (a_raw,) = _arr(a_raw)
    return _ret(np.maximum(a_raw, 0.0))


def a_leak_bore(a_leak_mv, a_leak_pf):
    a, b = _arr(a_leak_mv, a_leak_pf)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("leakage areas must be >= 0")
    return _ret(a + b)


def a_leak_total(areas: Sequence):
    if len(areas) == 0:
        return 0.0
    arrs = _arr(*areas)
    if any(np.any(a < 0) for a in arrs):
        raise ValueError("leakage areas must be >= 0")
    total = arrs[0]
    for a in arrs[1:]:
        total = total + a
    return _ret(total)


def pf_stiffness(k_ref, dd_mean, dd_ref, e_eff, e_ref):
    k_ref, dd_mean, dd_ref, e_eff, e_ref = _arr(k_ref, dd_mean, dd_ref, e_eff, e_ref)
    for name, a in (("k_ref", k_ref), ("dd_ref", dd_ref), ("e_ref", e_ref)):
        _positive(name, a)
    return _ret(k_ref * (dd_mean / dd_ref) * (e_eff / e_ref))


def total_stiffness(k_machine, k_pf):
    k_machine, k_pf = _arr(k_machine, k_pf)
    _positive("k_machine", k_machine)
    _positive("k_pf", k_pf)
    return _ret(1.0 / (1.0 / k_machine + 1.0 / k_pf))


def pressing_force(l_mv_pf, k_stiff_pf):
    l, k = _arr(l_mv_pf, k_stiff_pf)
    return _ret(l * k)


def displacement(force, k_stiff, s0):
    """Permanent tool travel and final tool position: (ds_grad, s_grad)."""
    force, k_stiff, s0 = _arr(force, k_stiff, s0)
    _positive("k_stiff", k_stiff)
    ds = force / k_stiff
    return _ret(ds), _ret(s0 + ds)


def max_force_and_displacement(force, df_trigger_stop, k_stiff_machine, s_grad):
    """Peak force, elastic overshoot travel and peak position: (f_max, ds_max, s_max)."""
    force, df, km, s_grad = _arr(force, df_trigger_stop, k_stiff_machine, s_grad)
    _positive("k_stiff_machine", km)
    if np.any(df < 0):
        raise ValueError("df_trigger_stop must be >= 0")
    ds_max = df / km
    return _ret(force + df), _ret(ds_max), _ret(s_grad + ds_max)


def delta_force_relu(f_max_chamber, f_lim):
    f, lim = _arr(f_max_chamber, f_lim)
    return _ret(np.maximum(f - lim, 0.0))


def mp_good(x, ltl, utl):
    """Inclusive tolerance check ltl <= x <= utl."""
    x, ltl, utl = _arr(x, ltl, utl)
    if np.any(ltl > utl):
        raise ValueError("ltl must be <= utl")
    out = (ltl <= x) & (x <= utl)
    return bool(out) if np.ndim(out) == 0 else out


def process_result(flags: Sequence):
    if len(flags) == 0:
        raise ValueError("process_result needs at least one flag")
    out = np.logical_and.reduce([np.asarray(f, dtype=bool) for f in flags])
    return bool(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Formula registry for PhysicsFormula mechanisms. Each entry takes keyword
# arguments named after its roles.


@dataclass(frozen=True)
class Formula:
    roles: tuple[str, ...]
    fn: Callable[..., np.ndarray]


FORMULAS: dict[str, Formula] = {
    "effective_elasticity": Formula(("e_bore", "e_mv"), effective_elasticity),
    "delta_d_max": Formula(("d_mv_max", "d_bore_min"), delta_d_max),
    "delta_d_min": Formula(("d_mv_min", "d_bore_max"), delta_d_min),
    "delta_d_mean": Formula(("dd_max", "dd_min", "beta_asym"), delta_d_mean),
    "leak_tol_machine": Formula(("leak_tol_0", "leak_tol_ref", "d_force_relu", "d_force_ref"),
                                leak_tol_machine),
    "leak_area_pf": Formula(("dd_max", "dd_min", "leak_tol", "beta_asym"), leak_area_pf),
    "a_leak_mv": Formula(("a_raw",), a_leak_mv),
    "a_leak_bore": Formula(("a_leak_mv", "a_leak_pf"), a_leak_bore),
    "pf_stiffness": Formula(("k_ref", "dd_mean", "dd_ref", "e_eff", "e_ref"), pf_stiffness),
    "total_stiffness": Formula(("k_machine", "k_pf"), total_stiffness),
    "pressing_force": Formula(("l_mv_pf", "k_stiff_pf"), pressing_force),
    "displacement_delta": Formula(("force", "k_stiff"),
                                  lambda force, k_stiff: displacement(force, k_stiff, 0.0)[0]),
    "tool_position": Formula(("ds_grad", "s0"), lambda ds_grad, s0: _ret(np.add(*_arr(s0, ds_grad)))),
    "max_force": Formula(("force", "df_trigger_stop"),
                         lambda force, df_trigger_stop: max_force_and_displacement(
                             force, df_trigger_stop, 1.0, 0.0)[0]),
    "max_displacement_delta": Formula(("df_trigger_stop", "k_stiff_machine"),
                                      lambda df_trigger_stop, k_stiff_machine: max_force_and_displacement(
                                          0.0, df_trigger_stop, k_stiff_machine, 0.0)[1]),
    "max_position": Formula(("s_grad", "ds_max"), lambda s_grad, ds_max: _ret(np.add(*_arr(s_grad, ds_max)))),
    "delta_force_relu": Formula(("f_max_chamber", "f_lim"), delta_force_relu),
}
