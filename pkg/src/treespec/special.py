"""Certified special-function evaluators used throughout the package.

Bessel functions of the first and second kind for real order |nu| <= 2 are
evaluated with a two-regime scheme: a power series accumulated in extended
machine precision for small arguments and Hankel-style large-argument
asymptotics beyond the seam.  Y_nu goes through the connection formula for
non-integer order, a dedicated logarithmic series at integer order, and a
narrow interpolation band in between (documented accuracy downgrade there).
The gamma function is delegated to scipy; Lambert W uses a Halley iteration.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gamma as _scipy_gamma

__all__ = [
    "AccuracyWarning",
    "bessel_j",
    "bessel_y",
    "gamma_fn",
    "lambert_w",
    "fd_kernel",
]

# Seam between the power series and the asymptotic expansion.  At the seam the
# optimally truncated asymptotic series still reaches ~4e-11 and the extended
# precision series stays below 1e-13, so both branches overlap within 1e-10.
_SERIES_ASYM_SWITCH = 12.0
_MAX_ORDER = 2.0
_NEAR_INTEGER_BAND = 1e-6
_X_ACCURACY_LIMIT = 1e8
_EULER_GAMMA = 0.57721566490153286060651209008240243

_LD = np.longdouble


class AccuracyWarning(UserWarning):
    """Emitted when an evaluation leaves the certified accuracy regime."""


def _prepare_argument(x, *, allow_zero: bool) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(~np.isfinite(arr)):
        raise ValueError("bessel argument must be finite")
    if allow_zero:
        if np.any(arr < 0.0):
            raise ValueError("bessel argument must be >= 0")
    else:
        if np.any(arr <= 0.0):
            raise ValueError("bessel argument must be > 0")
    if np.any(arr > _X_ACCURACY_LIMIT):
        warnings.warn(
            "bessel argument above 1e8: phase reduction loses accuracy",
            AccuracyWarning,
            stacklevel=3,
        )
    return arr, scalar


def _check_order(nu: float) -> float:
    nu = float(nu)
    if not math.isfinite(nu):
        raise ValueError("bessel order must be finite")
    if abs(nu) > _MAX_ORDER:
        raise ValueError(f"bessel order |nu| <= {_MAX_ORDER} supported, got {nu}")
    return nu


def _is_integer(nu: float) -> bool:
    return nu == round(nu)


def _series_j(nu: float, x: np.ndarray) -> np.ndarray:
    """Power series for J_nu, extended-precision accumulation.

    Valid for any real nu that is not a negative integer.  Cancellation near
    the seam x ~ 12 amplifies roundoff by ~1e5, which longdouble absorbs.
    """
    xl = x.astype(_LD)
    q = (xl / 2.0) ** 2
    out = np.zeros_like(xl)
    pos = xl > 0.0
    # Leading coefficient (x/2)^nu / Gamma(nu+1); Gamma in double is 1-2 ulp.
    if np.any(pos):
        lead = np.power(xl[pos] / 2.0, _LD(nu)) / _LD(math.gamma(nu + 1.0))
        term = lead.copy()
        total = term.copy()
        qp = q[pos]
        for k in range(1, 400):
            term = -term * qp / (_LD(k) * _LD(nu + k))
            total += term
            if np.all(np.abs(term) <= np.abs(total) * _LD(1e-22)) and k >= 8:
                break
        out[pos] = total
    if np.any(~pos):
        if nu == 0.0:
            out[~pos] = 1.0
        elif nu > 0.0:
            out[~pos] = 0.0
        else:
            raise ValueError("x = 0 requires nu >= 0")
    return out.astype(float)


def _series_y_integer(n: int, x: np.ndarray) -> np.ndarray:
    """Logarithmic series for Y_n at non-negative integer order n."""
    xl = x.astype(_LD)
    half = xl / 2.0
    q = half**2
    jn = _series_j(float(n), x).astype(_LD)
    out = (2.0 / _LD(math.pi)) * np.log(half) * jn
    # Finite sum of negative powers.
    acc = np.zeros_like(xl)
    for k in range(n):
        acc += _LD(math.factorial(n - k - 1) / math.factorial(k)) * half ** (2 * k - n)
    out -= acc / _LD(math.pi)
    # Infinite psi-weighted series.
    def _psi(m: int) -> float:
        return -_EULER_GAMMA + sum(1.0 / j for j in range(1, m))

    term = half**n / _LD(math.factorial(n))
    acc = term * _LD(_psi(1) + _psi(n + 1))
    for k in range(1, 400):
        term = -term * q / (_LD(k) * _LD(k + n))
        piece = term * _LD(_psi(k + 1) + _psi(n + k + 1))
        acc += piece
        if np.all(np.abs(piece) <= (np.abs(acc) + 1e-30) * _LD(1e-22)) and k >= 8:
            break
    out -= acc / _LD(math.pi)
    return out.astype(float)


def _asym_pq(nu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """P and Q amplitude series of the large-argument Hankel expansion."""
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    best = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, 60):
        term = term * (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        mag = np.abs(term)
        # Asymptotic series: each element stops at its own smallest term,
        # else entries near the seam absorb the divergent tail of the series
        # truncated for the largest argument present.
        active &= mag < best
        if not np.any(active):
            break
        best = np.minimum(best, mag)
        contrib = np.where(active, term, 0.0)
        if k % 2 == 1:
            q += contrib * (-1.0) ** ((k - 1) // 2)
        else:
            p += contrib * (-1.0) ** (k // 2)
        if np.all(mag[active] < 1e-20):
            break
    return p, q


def _asym_jy(nu: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p, q = _asym_pq(nu, x)
    chi = x - (0.5 * nu + 0.25) * math.pi
    amp = np.sqrt(2.0 / (math.pi * x))
    c, s = np.cos(chi), np.sin(chi)
    return amp * (c * p - s * q), amp * (s * p + c * q)


def _core_j(nu: float, x: np.ndarray) -> np.ndarray:
    """J_nu for |nu| <= 1 over the full argument range."""
    out = np.empty_like(x)
    small = x < _SERIES_ASYM_SWITCH
    if np.any(small):
        if _is_integer(nu) and nu < 0:
            out[small] = -_series_j(1.0, x[small])  # J_{-1} = -J_1
        else:
            out[small] = _series_j(nu, x[small])
    if np.any(~small):
        out[~small] = _asym_jy(nu, x[~small])[0]
    return out


def _connection_y(nu: float, x: np.ndarray) -> np.ndarray:
    s = math.sin(math.pi * nu)
    c = math.cos(math.pi * nu)
    return (_series_j(nu, x) * c - _series_j(-nu, x)) / s


def _core_y(nu: float, x: np.ndarray) -> np.ndarray:
    """Y_nu for |nu| <= 1 over the full argument range."""
    out = np.empty_like(x)
    small = x < _SERIES_ASYM_SWITCH
    if np.any(small):
        xs = x[small]
        if _is_integer(nu):
            n = int(round(nu))
            ys = _series_y_integer(abs(n), xs)
            out[small] = ys if n >= 0 else (-1.0) ** n * ys
        elif abs(nu - round(nu)) < _NEAR_INTEGER_BAND:
            # Interpolate across the band edges; accuracy downgrades to ~1e-8
            # because the connection formula cancels like sin(pi nu) here.
            n = round(nu)
            lo, hi = n - _NEAR_INTEGER_BAND, n + _NEAR_INTEGER_BAND
            ylo = _connection_y(lo, xs)
            yhi = _connection_y(hi, xs)
            w = (nu - lo) / (hi - lo)
            out[small] = (1.0 - w) * ylo + w * yhi
        else:
            out[small] = _connection_y(nu, xs)
    if np.any(~small):
        out[~small] = _asym_jy(nu, x[~small])[1]
    return out


def _extended_order(fn, nu: float, x: np.ndarray) -> np.ndarray:
    """One recurrence step bridges 1 < |nu| <= 2 at large argument.

    Upward/downward order recurrence is stable here because x >= 12 > |nu|.
    """
    if nu > 1.0:
        a, b = fn(nu - 1.0, x), fn(nu - 2.0, x)
        return (2.0 * (nu - 1.0) / x) * a - b
    a, b = fn(nu + 1.0, x), fn(nu + 2.0, x)
    return (2.0 * (nu + 1.0) / x) * a - b


def bessel_j(nu: float, x):
    """Bessel function of the first kind, real order |nu| <= 2, x >= 0."""
    nu = _check_order(nu)
    arr, scalar = _prepare_argument(x, allow_zero=True)
    if abs(nu) <= 1.0:
        out = _core_j(nu, arr)
    else:
        out = np.empty_like(arr)
        small = arr < _SERIES_ASYM_SWITCH
        if np.any(small):
            if _is_integer(nu) and nu < 0:
                out[small] = _series_j(-nu, arr[small])  # J_{-2} = J_2
            else:
                out[small] = _series_j(nu, arr[small])
        if np.any(~small):
            out[~small] = _extended_order(_core_j, nu, arr[~small])
    return float(out[0]) if scalar else out


def bessel_y(nu: float, x):
    """Bessel function of the second kind, real order |nu| <= 2, x > 0."""
    nu = _check_order(nu)
    arr, scalar = _prepare_argument(x, allow_zero=False)
    if abs(nu) <= 1.0:
        out = _core_y(nu, arr)
    else:
        out = np.empty_like(arr)
        small = arr < _SERIES_ASYM_SWITCH
        if np.any(small):
            xs = arr[small]
            if _is_integer(nu):
                ys = _series_y_integer(int(abs(nu)), xs)
                out[small] = ys  # Y_{-2} = Y_2
            elif abs(nu - round(nu)) < _NEAR_INTEGER_BAND:
                n = round(nu)
                lo, hi = n - _NEAR_INTEGER_BAND, n + _NEAR_INTEGER_BAND
                w = (nu - lo) / (hi - lo)
                out[small] = (1.0 - w) * _connection_y(lo, xs) + w * _connection_y(hi, xs)
            else:
                out[small] = _connection_y(nu, xs)
        if np.any(~small):
            out[~small] = _extended_order(_core_y, nu, arr[~small])
    return float(out[0]) if scalar else out


def gamma_fn(x):
    """Gamma function on the positive half-line (delegated to scipy)."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ValueError("gamma_fn requires x > 0")
    out = _scipy_gamma(arr)
    return float(out) if arr.ndim == 0 else out


def lambert_w(z):
    """Principal branch of Lambert W for z >= 0 via Halley iteration.

    Start value log1p(z); terminates when |w e^w - z| <= 1e-14 * z.
    """
    arr = np.asarray(z, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(arr < 0.0) or np.any(~np.isfinite(arr)):
        raise ValueError("lambert_w requires finite z >= 0")
    w = np.log1p(arr)
    target = 1e-14 * np.maximum(arr, 1e-300)
    for _ in range(50):
        ew = np.exp(w)
        f = w * ew - arr
        if np.all(np.abs(f) <= target):
            break
        denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0)
        w = w - f / denom
    else:
        raise RuntimeError("lambert_w failed to converge in 50 iterations")
    w[arr == 0.0] = 0.0
    return float(w[0]) if scalar else w


def fd_kernel(p: float, x, d: float):
    """Normalized cross-product kernel driving the half-line diagonalization.

    f_d(p, x) combines J and Y at orders -d/2 and (2-d)/2, with the argument
    p(1+x) in the second slot, normalized by the modulus at order -d/2:

        [J_{-d/2}(p) Y_{(2-d)/2}(p(1+x)) - Y_{-d/2}(p) J_{(2-d)/2}(p(1+x))]
        / sqrt(J_{-d/2}(p)^2 + Y_{-d/2}(p)^2)

    At x = 0 the cross product collapses to the Wronskian value, so
    fd_kernel(p, 0, d) * sqrt(J^2 + Y^2) = -2 / (pi p).

    Broadcasts over p and x under the usual numpy rules.
    """
    d = float(d)
    if not 1.0 < d <= 2.0:
        raise ValueError(f"dimension d must lie in (1, 2], got {d}")
    p_arr = np.asarray(p, dtype=float)
    arr = np.asarray(x, dtype=float)
    scalar = p_arr.ndim == 0 and arr.ndim == 0
    p_arr = np.atleast_1d(p_arr)
    arr = np.atleast_1d(arr)
    if np.any(p_arr <= 0.0):
        raise ValueError("spectral parameter p must be > 0")
    if np.any(arr < 0.0):
        raise ValueError("position x must be >= 0")
    nu1 = -d / 2.0
    nu2 = (2.0 - d) / 2.0
    j1 = bessel_j(nu1, p_arr)
    y1 = bessel_y(nu1, p_arr)
    z = p_arr * (1.0 + arr)
    j2 = bessel_j(nu2, z)
    y2 = bessel_y(nu2, z)
    out = np.atleast_1d((j1 * y2 - y1 * j2) / np.hypot(j1, y1))
    return float(out[0]) if scalar else out
