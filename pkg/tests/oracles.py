"""Independent high-precision oracles used only by the test suite.

Bessel values come from the defining power series evaluated with mpmath at
50+ decimal digits; Y is assembled through the connection formula (with a
tiny order shift at integers, which extended precision absorbs exactly).
These share no code with the package implementations.
"""

from __future__ import annotations

import mpmath as mp


def bessel_j_series(nu, x, dps: int = 60):
    """J_nu(x) from the power series at `dps` decimal digits.

    The alternating series cancels like e^{2x}, so the working precision is
    raised by ~0.9*x digits to keep `dps` correct digits in the result.
    """
    dps = dps + int(0.9 * float(x)) + 10
    with mp.workdps(dps):
        nu = mp.mpf(nu)
        x = mp.mpf(x)
        if nu == mp.floor(nu) and nu < 0:
            return (-1) ** int(-nu) * bessel_j_series(-nu, x, dps)
        if x == 0:
            if nu == 0:
                return mp.mpf(1)
            if nu > 0:
                return mp.mpf(0)
            raise ValueError("x = 0 needs nu >= 0")
        half = x / 2
        term = half**nu / mp.gamma(nu + 1)
        total = term
        k = 0
        while True:
            k += 1
            term = -term * half**2 / (k * (nu + k))
            total += term
            if abs(term) < abs(total) * mp.mpf(10) ** (-dps - 5) and k > 8:
                break
            if k > 10000:
                raise RuntimeError("series did not converge")
        return total


def bessel_y_series(nu, x, dps: int = 60):
    """Y_nu(x) via the connection formula at extended precision.

    Integer orders are handled by shifting nu by 10^-30; the cancellation
    in the connection formula then costs ~30 digits, which the working
    precision of dps+40 absorbs.
    """
    with mp.workdps(dps + 40):
        nu = mp.mpf(nu)
        if nu == mp.floor(nu):
            nu += mp.mpf(10) ** (-30)
        jp = bessel_j_series(nu, x, dps + 40)
        jm = bessel_j_series(-nu, x, dps + 40)
        val = (jp * mp.cos(mp.pi * nu) - jm) / mp.sin(mp.pi * nu)
        return +val


def fd_kernel_oracle(p, x, d, dps: int = 60):
    """Reference value of the normalized cross-product kernel."""
    with mp.workdps(dps):
        p = mp.mpf(p)
        x = mp.mpf(x)
        d = mp.mpf(d)
        nu1 = -d / 2
        nu2 = (2 - d) / 2
        z = p * (1 + x)
        j1 = bessel_j_series(nu1, p, dps)
        y1 = bessel_y_series(nu1, p, dps)
        j2 = bessel_j_series(nu2, z, dps)
        y2 = bessel_y_series(nu2, z, dps)
        return (j1 * y2 - y1 * j2) / mp.sqrt(j1**2 + y1**2)


def lambert_w_bisect(z, dps: int = 50):
    """Lambert W by bisection on w e^w = z, independent of any W routine."""
    with mp.workdps(dps):
        z = mp.mpf(z)
        if z == 0:
            return mp.mpf(0)
        lo, hi = mp.mpf(0), mp.mpf(1)
        while hi * mp.e**hi < z:
            hi *= 2
        for _ in range(dps * 5):
            mid = (lo + hi) / 2
            if mid * mp.e**mid < z:
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2
