"""Dormand-Prince 5(4) integration with dense output and threshold detection."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepSizeUnderflow

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension: y(t + x h) = y + h * K.T @ (P @ [x, x^2, x^3, x^4])
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
BETA = 0.04
ALPHA = 1 / 5 - 0.75 * BETA


@dataclass
class IntegratorConfig:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-8
    max_step: float = np.inf
    initial_step: float | None = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


class DenseSolution:
    """Accepted steps of an integration, evaluable anywhere in the time span."""

    def __init__(self, ts, ys, ks):
        self.ts = np.asarray(ts)
        self.ys = np.asarray(ys)
        self._ks = ks  # per step: (7, d) stage derivatives
        self.n_steps = len(ks)

    @property
    def t_span(self):
        return self.ts[0], self.ts[-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        lo, hi = self.ts[0], self.ts[-1]
        if np.any(tt < lo - 1e-12 * max(1, abs(lo))) or np.any(tt > hi + 1e-12 * max(1, abs(hi))):
            raise ValueError("time outside the integrated span")
        out = np.empty((tt.size, self.ys.shape[1]))
        seg = np.clip(np.searchsorted(self.ts, tt, side="right") - 1, 0, max(self.n_steps - 1, 0))
        for j, (tj, k) in enumerate(zip(tt, seg)):
            out[j] = self._eval(k, tj)
        return out[0] if scalar else out

    def _eval(self, k, t):
        if self.n_steps == 0:
            return self.ys[0]
        t0, t1 = self.ts[k], self.ts[k + 1]
        if t == t0:
            return self.ys[k]
        if t == t1:
            return self.ys[k + 1]
        h = t1 - t0
        x = (t - t0) / h
        q = P @ np.array([x, x * x, x ** 3, x ** 4])
        return self.ys[k] + h * (q @ self._ks[k])


def _stages(f, t, y, h, k0):
    K = np.empty((7, y.size))
    K[0] = k0
    for s in range(1, 7):
        dy = h * (np.asarray(A[s]) @ K[:s])
        K[s] = f(t + C[s] * h, y + dy)
    return K


def _initial_step(f, t0, y0, f0, direction, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = f(t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_span,
    config: IntegratorConfig | None = None,
    sample_grid=None,
):
    """Adaptive Dormand-Prince 5(4) solve of ``y' = rhs(t, y)``.

    Returns a :class:`DenseSolution`; if ``sample_grid`` is given, returns
    ``(solution, values_on_grid)``.
    """
    cfg = config or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.array(y0, dtype=float)
    ts, ys, ks = [t0], [y.copy()], []
    if t1 != t0:
        direction = 1.0 if t1 > t0 else -1.0
        f0 = np.asarray(rhs(t0, y), dtype=float)
        h = cfg.initial_step or _initial_step(rhs, t0, y, f0, direction, cfg.rel_tol, cfg.abs_tol)
        h = min(h, cfg.max_step, abs(t1 - t0))
        t = t0
        err_prev = 1e-4
        while direction * (t1 - t) > 0:
            min_step = 10 * np.abs(np.nextafter(t, direction * np.inf) - t)
            if h < min_step:
                raise StepSizeUnderflow(f"step size {h:g} underflow at t={t:g}")
            last = h >= abs(t1 - t) * (1 - 1e-12)
            if last:
                h = abs(t1 - t)
            hs = direction * h
            K = _stages(rhs, t, y, hs, f0)
            y_new = y + hs * (B5[:6] @ K[:6])
            K[6] = rhs(t + hs, y_new)
            err_vec = hs * (E @ K)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / scale) ** 2)) if y.size else 0.0
            if err <= 1.0:
                t_new = t1 if last else t + hs
                ts.append(t_new)
                ys.append(y_new)
                ks.append(K)
                if err == 0:
                    fac = MAX_FACTOR
                else:
                    fac = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -ALPHA * err_prev ** BETA))
                err_prev = max(err, 1e-4)
                t, y, f0 = t_new, y_new, K[6]
                h = min(h * fac, cfg.max_step)
            else:
                h *= max(MIN_FACTOR, SAFETY * err ** -(1 / 5))
    sol = DenseSolution(ts, ys, ks)
    if sample_grid is None:
        return sol
    return sol, sol(np.asarray(sample_grid, dtype=float))


def integrate_fixed(rhs, y0, t_span, n_steps: int) -> DenseSolution:
    """Dormand-Prince 5th-order solution with ``n_steps`` equal steps (no control)."""
    t0, t1 = map(float, t_span)
    h = (t1 - t0) / n_steps
    y = np.array(y0, dtype=float)
    f0 = np.asarray(rhs(t0, y), dtype=float)
    ts, ys, ks = [t0], [y.copy()], []
    for j in range(n_steps):
        t = t0 + j * h
        K = _stages(rhs, t, y, h, f0)
        y = y + h * (B5[:6] @ K[:6])
        K[6] = rhs(t + h, y)
        f0 = K[6]
        ts.append(t0 + (j + 1) * h)
        ys.append(y.copy())
        ks.append(K)
    return DenseSolution(ts, ys, ks)


def find_threshold_time(solution: DenseSolution, component: int, level: float,
                        direction: str = "down", tol: float = 1e-9, refine: int = 8):
    """First down-crossing of ``level`` by a component after its global maximum.

    Returns ``None`` when the component never falls below ``level`` after the peak.
    """
    if direction != "down":
        raise ValueError("only down-crossings are supported")
    ts = solution.ts
    if ts.size < 2:
        return None
    # sample each step at a few interior points to place the peak well
    fine = np.unique(np.concatenate([
        np.linspace(ts[k], ts[k + 1], refine + 1) for k in range(ts.size - 1)
    ]))
    vals = solution(fine)[:, component]
    peak = int(np.argmax(vals))
    if vals[peak] < level:
        return None
    below = np.flatnonzero(vals[peak:] < level)
    if below.size == 0:
        return None
    j = peak + int(below[0])
    a, b = fine[j - 1], fine[j]
    while b - a > tol:
        mid = 0.5 * (a + b)
        if solution(mid)[component] >= level:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)
