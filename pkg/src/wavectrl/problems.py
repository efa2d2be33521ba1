"""Concrete experiment data: cutoffs, initial states, exact boundary solutions.

The closed-form boundary solutions (tags ex1, ex2, ex3 on T = 2) are piecewise
formulas dispatched along the characteristics x - t = const and x + t = const;
interval endpoints follow a closed-on-the-left convention, which only matters
on measure-zero sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .forms import Cutoff

EXACT_T = 2.0
# all characteristic offsets appearing in the piecewise solutions below
CHARACTERISTIC_OFFSETS = (-2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5)


def make_cutoff(T: float, a: float, b: float) -> Cutoff:
    return Cutoff(T, a, b, mode="smooth")


def make_trivial_cutoff(T: float = EXACT_T, a: float = 0.1, b: float = 0.4,
                        indicator: bool = False) -> Cutoff:
    """chi = 1, or the sharp variant chi0 = 1, chi1 = 1_(a,b)."""
    return Cutoff(T, a, b, mode="indicator" if indicator else "one")


# -- initial data -------------------------------------------------------------

@dataclass(frozen=True)
class InitialData:
    tag: str
    u0: Callable
    u1: Callable
    breaks: tuple = ()  # x-values where u0/u1 are non-smooth


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _hat(x):
    x = np.asarray(x, dtype=float)
    return np.where(x < 0.5, 4.0 * x, 4.0 * (1.0 - x)) * (x >= 0) * (x <= 1)


def make_ex1_data() -> InitialData:
    return InitialData("ex1", lambda x: np.sin(np.pi * np.asarray(x, dtype=float)), _zero)


def make_ex2_data() -> InitialData:
    return InitialData("ex2", _hat, _zero, breaks=(0.5,))


def make_ex3_data() -> InitialData:
    def u0(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0.5, 4.0 * x, 0.0)
    return InitialData("ex3", u0, _zero, breaks=(0.5,))


def make_rough_indicator_data() -> InitialData:
    def u1(x):
        x = np.asarray(x, dtype=float)
        return np.where((x > 0.4) & (x < 0.6), 1.0, 0.0)
    return InitialData("rough", _zero, u1, breaks=(0.4, 0.6))


def _smoothstep(s):
    s = np.asarray(s, dtype=float)
    lo, hi = s <= 1e-14, s >= 1 - 1e-14
    ss = np.where(lo | hi, 0.5, s)
    f = np.exp(-1.0 / ss)
    g = np.exp(-1.0 / (1.0 - ss))
    val = f / (f + g)
    return np.where(lo, 0.0, np.where(hi, 1.0, val))


def ex2b_bump(x):
    """C-infinity profile equal to 1 on [0.1, 0.9], vanishing to all orders at 0, 1."""
    x = np.asarray(x, dtype=float)
    return _smoothstep(x / 0.1) * _smoothstep((1.0 - x) / 0.1)


def make_ex2b_data() -> InitialData:
    def u0(x):
        x = np.asarray(x, dtype=float)
        integral = np.where(x < 0.5, 16.0 * x ** 3 / 3.0,
                            4.0 / 3.0 - 16.0 * (1.0 - x) ** 3 / 3.0)
        return ex2b_bump(x) * integral
    return InitialData("ex2b", u0, _zero, breaks=(0.5,))


def make_custom_data(u0, u1, breaks=()) -> InitialData:
    return InitialData("custom", u0, u1, tuple(breaks))


DATA_FACTORIES = {
    "ex1": make_ex1_data,
    "ex2": make_ex2_data,
    "ex2b": make_ex2b_data,
    "ex3": make_ex3_data,
    "rough": make_rough_indicator_data,
}


def make_data(tag: str) -> InitialData:
    try:
        return DATA_FACTORIES[tag]()
    except KeyError:
        raise ValueError(f"unknown example tag {tag!r}") from None


# -- closed-form boundary solutions (T = 2, chi = 1) ---------------------------

def _phi3(t, x):
    """Adjoint state of ex3, five characteristic pieces (zero elsewhere)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    eta = x + t
    xi = x - t
    conds = [
        (eta >= 0) & (eta < 0.5) & (x >= 0) & (t >= 0),
        (eta >= 0.5) & (eta < 1.5) & (xi > -0.5) & (xi < 0.5),
        (eta >= 1.5) & (xi > -0.5),
        (eta > 1.5) & (eta < 2.5) & (xi > -1.5) & (xi <= -0.5),
        xi <= -1.5,
    ]
    vals = [
        -2.0 * x * t,
        0.5 * xi ** 2 - 0.125,
        2.0 * (x - 1.0) * (1.0 - t),
        -0.5 * (eta - 2.0) ** 2 + 0.125,
        2.0 * x * (2.0 - t),
    ]
    return np.select(conds, vals, default=0.0)


def _dxphi3(t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    eta = x + t
    xi = x - t
    conds = [
        (eta >= 0) & (eta < 0.5) & (x >= 0) & (t >= 0),
        (eta >= 0.5) & (eta < 1.5) & (xi > -0.5) & (xi < 0.5),
        (eta >= 1.5) & (xi > -0.5),
        (eta > 1.5) & (eta < 2.5) & (xi > -1.5) & (xi <= -0.5),
        xi <= -1.5,
    ]
    vals = [-2.0 * t, xi, 2.0 * (1.0 - t), -(eta - 2.0), 2.0 * (2.0 - t)]
    return np.select(conds, vals, default=0.0)


def _u_ex1(t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    s = np.sin
    pi = np.pi
    conds = [x + t <= 1.0, (x + t > 1.0) & (x - t >= -1.0)]
    vals = [0.5 * (s(pi * (x + t)) + s(pi * (x - t))), 0.5 * s(pi * (x - t))]
    return np.select(conds, vals, default=0.0)


def _u_ex3(t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    conds = [
        (x + t >= 0) & (x + t < 0.5),
        (t - x > -0.5) & (t - x < 0.5) & (x + t >= 0.5),
    ]
    vals = [4.0 * x, 2.0 * (x - t)]
    return np.select(conds, vals, default=0.0)


def _u0_hat_ext(s):
    s = np.asarray(s, dtype=float)
    return np.where((s >= 0) & (s <= 1), _hat(np.clip(s, 0.0, 1.0)), 0.0)


def _u_ex2(t, x):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    return (0.5 * _u0_hat_ext(x - t) * (t - x <= 0)
            + 0.5 * _u0_hat_ext(x + t) * (x + t <= 1)
            - 0.5 * _u0_hat_ext(t - x) * ((t - x >= 0) & (t - x <= 1)))


def exact_control(tag: str, t) -> np.ndarray:
    """Minimal-norm control v(t) on the right boundary x = 1 (chi = 1, T = 2)."""
    t = np.asarray(t, dtype=float)
    if tag == "ex1":
        return 0.5 * np.sin(np.pi * t)
    if tag == "ex2":
        # printed upper interval of the last piece is inconsistent; (3/2, 2)
        # is the continuous L^2 reading
        return np.select([(t > 0) & (t < 0.5), (t >= 0.5) & (t < 1.5), (t >= 1.5) & (t <= 2.0)],
                         [2.0 * t, 2.0 * (1.0 - t), 2.0 * (t - 2.0)], default=0.0)
    if tag == "ex3":
        return np.where((t > 0.5) & (t < 1.5), 2.0 * (1.0 - t), 0.0)
    raise ValueError(f"no exact solution for tag {tag!r}")


def exact_eval(tag: str, t, x):
    """(u, phi, dx phi) of the closed-form boundary solution at (t, x)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if tag == "ex1":
        phi = -np.sin(np.pi * t) * np.sin(np.pi * x) / (2.0 * np.pi)
        dxphi = -0.5 * np.sin(np.pi * t) * np.cos(np.pi * x)
        return _u_ex1(t, x), phi, dxphi
    if tag == "ex2":
        phi = _phi3(t, x) + _phi3(t, 1.0 - x)
        dxphi = _dxphi3(t, x) - _dxphi3(t, 1.0 - x)
        return _u_ex2(t, x), phi, dxphi
    if tag == "ex3":
        return _u_ex3(t, x), _phi3(t, x), _dxphi3(t, x)
    raise ValueError(f"no exact solution for tag {tag!r}")


# -- characteristic-aligned quadrature of the exact solutions ------------------

def _gauss(n=7):
    z, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (z + 1.0), 0.5 * w


def characteristic_l2_volume(f, T: float = EXACT_T, deg: int = 12) -> float:
    """L2((0,T)x(0,1)) norm of f with subdivision along all characteristic
    lines of the exact solutions; exact for their piecewise-polynomial parts."""
    n = deg // 2 + 1
    s, w = _gauss(n)
    total = 0.0
    t_cuts = np.arange(0.0, T + 1e-12, 0.25)
    for t0, t1 in zip(t_cuts[:-1], t_cuts[1:]):
        for tq, tw in zip(t0 + (t1 - t0) * s, (t1 - t0) * w):
            xb = {0.0, 1.0}
            for c in CHARACTERISTIC_OFFSETS:
                for cand in (c + tq, c - tq):
                    if 0.0 < cand < 1.0:
                        xb.add(float(cand))
            xb = sorted(xb)
            inner = 0.0
            for x0, x1 in zip(xb[:-1], xb[1:]):
                xq = x0 + (x1 - x0) * s
                inner += (x1 - x0) * float(w @ (np.asarray(f(np.full_like(xq, tq), xq),
                                                           dtype=float) ** 2))
            total += tw * inner
    return float(np.sqrt(total))


def characteristic_l2_time(f, T: float = EXACT_T, deg: int = 12) -> float:
    """L2(0,T) norm of a control-like trace with splits at characteristic times."""
    n = deg // 2 + 1
    s, w = _gauss(n)
    cuts = sorted({0.0, T} | {c for c in (0.5, 1.0, 1.5) if 0 < c < T})
    total = 0.0
    for t0, t1 in zip(cuts[:-1], cuts[1:]):
        tq = t0 + (t1 - t0) * s
        total += (t1 - t0) * float(w @ (np.asarray(f(tq), dtype=float) ** 2))
    return float(np.sqrt(total))


def exact_norms(tag: str, deg: int = 12) -> dict:
    """Computed reference norms of the closed-form solutions."""
    v = characteristic_l2_time(lambda t: exact_control(tag, t), deg=deg)
    u = characteristic_l2_volume(lambda t, x: exact_eval(tag, t, x)[0], deg=deg)
    phi = characteristic_l2_volume(lambda t, x: exact_eval(tag, t, x)[1], deg=deg)
    dxphi = characteristic_l2_volume(lambda t, x: exact_eval(tag, t, x)[2], deg=deg)
    return {"v": v, "u": u, "phi": phi, "dxphi": dxphi}
