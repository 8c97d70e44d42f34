"""Adaptive Gauss-Kronrod panel quadrature shared across the package.

Panels use the 7-15 Gauss-Kronrod pair; integrands are called once per panel
with the 15 mapped nodes as an array.  Subdivision picks the worst panel, and
the final value is summed over panels ordered by position, so results do not
depend on evaluation order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureError", "PanelIntegral", "integrate", "integrate_decaying"]

# 15-point Kronrod abscissae (positive half) and weights; rows marked G carry
# the embedded 7-point Gauss weights.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])        # 15 ascending nodes
_WEIGHTS_K = np.concatenate([_WK[:-1], _WK[::-1]])
_WEIGHTS_G = np.zeros(15)
_WEIGHTS_G[1:-1:2] = np.concatenate([_WG, _WG[-2::-1]])


class QuadratureError(RuntimeError):
    """Raised when the adaptive subdivision budget is exhausted."""


@dataclass
class PanelIntegral:
    value: float
    error: float
    panels: int
    converged: bool


def _panel(f, a: float, b: float) -> tuple[float, float]:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    fx = np.asarray(f(mid + half * _NODES), dtype=float)
    ik = half * float(fx @ _WEIGHTS_K)
    ig = half * float(fx @ _WEIGHTS_G)
    # Standard QUADPACK-style sharpened error estimate.
    resabs = half * float(np.abs(fx) @ _WEIGHTS_K)
    diff = abs(ik - ig)
    err = diff
    if resabs > 0.0 and diff > 0.0:
        err = resabs * min(1.0, (200.0 * diff / resabs) ** 1.5)
    return ik, err


def integrate(
    f,
    a: float,
    b: float,
    *,
    tol_abs: float = 0.0,
    tol_rel: float = 1e-10,
    max_panel: float | None = None,
    breakpoints=(),
    max_panels: int = 4000,
    strict: bool = True,
) -> PanelIntegral:
    """Integrate f over [a, b] adaptively.

    max_panel caps the panel width (used to resolve oscillations);
    breakpoints force initial panel edges.  f receives node arrays.
    """
    if not b > a:
        return PanelIntegral(0.0, 0.0, 0, True)
    edges = [a, b]
    for br in breakpoints:
        if a < br < b:
            edges.append(float(br))
    edges = sorted(set(edges))
    if max_panel is not None and max_panel > 0.0:
        refined = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            n = max(1, int(np.ceil((hi - lo) / max_panel)))
            refined.extend(lo + (hi - lo) * k / n for k in range(n))
        refined.append(b)
        edges = refined

    heap = []  # (-err, a, b, value, err); heap keyed by error magnitude
    count = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err = _panel(f, lo, hi)
        heapq.heappush(heap, (-err, lo, hi, val, err))
        count += 1

    def _totals():
        v = sum(item[3] for item in heap)
        e = sum(item[4] for item in heap)
        return v, e

    value, error = _totals()
    while count < max_panels:
        target = max(tol_abs, tol_rel * abs(value))
        if error <= target or not heap:
            break
        _, lo, hi, _, worst_err = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # width at rounding floor
            heapq.heappush(heap, (-0.0, lo, hi, _panel(f, lo, hi)[0], 0.0))
            continue
        for seg in ((lo, mid), (mid, hi)):
            val, err = _panel(f, *seg)
            heapq.heappush(heap, (-err, seg[0], seg[1], val, err))
            count += 1
        value, error = _totals()

    # Fixed summation tree: accumulate in position order.
    panels = sorted(heap, key=lambda item: item[1])
    value = float(sum(item[3] for item in panels))
    error = float(sum(item[4] for item in panels))
    converged = error <= max(tol_abs, tol_rel * abs(value), 1e-300)
    if strict and not converged:
        raise QuadratureError(
            f"quadrature did not converge on [{a}, {b}]: error {error:.3e}"
        )
    return PanelIntegral(value, error, count, converged)


def integrate_decaying(
    f,
    a: float,
    *,
    first_block: float = 1.0,
    growth: float = 2.0,
    tol_rel: float = 1e-9,
    max_panel: float | None = None,
    max_blocks: int = 200,
    strict: bool = True,
) -> PanelIntegral:
    """Integrate a decaying f over [a, infinity) by geometric blocks.

    Stops once two consecutive blocks each contribute less than tol_rel of
    the accumulated integral.
    """
    total = 0.0
    err = 0.0
    panels = 0
    lo = a
    width = first_block
    quiet = 0
    for _ in range(max_blocks):
        hi = lo + width
        part = integrate(
            f, lo, hi, tol_abs=0.0, tol_rel=max(tol_rel * 0.1, 1e-12),
            max_panel=max_panel, strict=False,
        )
        total += part.value
        err += part.error
        panels += part.panels
        scale = max(abs(total), 1e-300)
        quiet = quiet + 1 if abs(part.value) <= tol_rel * scale else 0
        if quiet >= 2:
            return PanelIntegral(total, err, panels, True)
        lo = hi
        width *= growth
    if strict:
        raise QuadratureError("semi-infinite integral did not settle")
    return PanelIntegral(total, err, panels, False)
