"""Coupling sweeps, asymptotic-law fits, and closed-form variational bounds.

The sweep driver solves the weighted half-line problem over a decreasing
coupling grid and records per-entry truncation diagnostics.  Two fits
recover the weak-coupling laws: a pure power law |e1| ~ alpha^{2/(2-gamma)}
below the critical envelope exponent, and the log-corrected form
|e1| ~ |alpha log alpha|^{2/(2-gamma)} at the critical point gamma = d.

The variational bounds evaluate explicit test functions against the exact
growth weight: an exponential e^{-delta x} for gamma < d and a hat function
1 - x/mu at gamma = d.  Both return the Rayleigh quotient together with the
closed-form constant it must stay below, and raise if the inequality fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import exp1

from . import quadrature
from .halfline import HalfLineProblem, ground_state_weighted
from .special import gamma_fn, lambert_w

__all__ = [
    "SweepEntry",
    "SweepReport",
    "sweep_ground_state",
    "fit_power_law",
    "fit_log_corrected",
    "variational_bound_exp",
    "variational_bound_hat",
    "lambert_chain_bound",
]

# int_1^inf e^{-2x}/x dx, the exponential-test-function coupling integral
EXP_INTEGRAL_2 = float(exp1(2.0))


@dataclass
class SweepEntry:
    alpha: float
    e1: float
    truncation: float
    converged: bool


@dataclass
class SweepReport:
    entries: List[SweepEntry]
    fit_exponent: Optional[float] = None
    fit_intercept: Optional[float] = None
    fit_residual: Optional[float] = None
    law: Optional[str] = None

    def __post_init__(self):
        alphas = [e.alpha for e in self.entries]
        if any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ValueError("sweep entries must have strictly decreasing alpha")

    def fit_entries(self) -> List[SweepEntry]:
        """Entries eligible for fitting: converged with a bound state."""
        return [e for e in self.entries if e.converged and e.e1 < 0.0]

    def csv_rows(self):
        """Header plus one formatted line per entry (17 significant digits)."""
        yield "alpha,e1,truncation,converged"
        for e in self.entries:
            yield "%.16e,%.16e,%.16e,%d" % (e.alpha, e.e1, e.truncation,
                                            int(e.converged))


def sweep_ground_state(family: HalfLineProblem, alphas,
                       *, mesh_ratio: float = 1.05,
                       first_cell: Optional[float] = None) -> SweepReport:
    """Solve the family's problem over a decreasing coupling grid.

    The template supplies dimension, potential and scale; each coupling gets
    its own truncation through the decay-based rule.  Non-converged solves
    are kept in the report but flagged out of the fits.
    """
    alphas = [float(a) for a in alphas]
    if any(a <= 0.0 for a in alphas):
        raise ValueError("couplings must be positive")
    if any(b >= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("couplings must be strictly decreasing")
    entries = []
    for a in alphas:
        prob = HalfLineProblem.build(family.d, a, family.potential,
                                     scale=family.scale,
                                     mesh_ratio=mesh_ratio,
                                     first_cell=first_cell)
        res = ground_state_weighted(prob)
        entries.append(SweepEntry(a, res.e1, prob.truncation, res.converged))
    return SweepReport(entries)


def _fit_window(entries: List[SweepEntry]) -> List[SweepEntry]:
    # edge entries feel truncation effects / the far end of the regime
    return entries[1:-1]


def fit_power_law(report: SweepReport) -> Tuple[float, float]:
    """Least-squares exponent of log|e1| against log alpha.

    Returns (exponent, residual) where the residual is the maximum absolute
    deviation of the fitted line.  The largest and smallest coupling are
    discarded before fitting; at least 5 eligible entries are required.
    """
    entries = report.fit_entries()
    if len(entries) < 5:
        raise ValueError("need at least 5 converged entries with e1 < 0")
    window = _fit_window(entries)
    la = np.log([e.alpha for e in window])
    le = np.log([-e.e1 for e in window])
    coef = np.polynomial.polynomial.polyfit(la, le, 1)
    fitted = coef[0] + coef[1] * la
    residual = float(np.max(np.abs(fitted - le)))
    report.fit_exponent = float(coef[1])
    report.fit_intercept = float(coef[0])
    report.fit_residual = residual
    report.law = "power"
    return float(coef[1]), residual


def fit_log_corrected(report: SweepReport,
                      gamma: float) -> Tuple[float, float]:
    """Spread of r(alpha) = |e1| / |alpha log alpha|^{2/(2-gamma)}.

    Couplings at or above 1/e are rejected (the log factor degenerates);
    edge entries are discarded as in the power fit.  Returns the (min, max)
    of the ratio over the fit window.
    """
    if not 1.0 < gamma < 2.0:
        raise ValueError(f"log-corrected law needs gamma in (1, 2), got {gamma}")
    entries = [e for e in report.fit_entries() if e.alpha < 1.0 / math.e]
    if len(entries) < 5:
        raise ValueError("need at least 5 converged entries with e1 < 0 "
                         "and alpha < 1/e")
    window = _fit_window(entries)
    expo = 2.0 / (2.0 - gamma)
    ratios = [-e.e1 / abs(e.alpha * math.log(e.alpha)) ** expo
              for e in window]
    report.law = "log-corrected"
    report.fit_exponent = expo
    return min(ratios), max(ratios)


# ---------------------------------------------------------------------------
# explicit test functions

def _exp_bound_constant(gamma: float, c_lower: float, k: float) -> float:
    # K^gamma c int_1^inf e^{-2x}/x dx - K^2 int_0^inf e^{-2x}(1+x) dx
    return k ** gamma * c_lower * EXP_INTEGRAL_2 - 0.75 * k * k


def _default_k(gamma: float, c_lower: float) -> float:
    grid = np.geomspace(1e-3, 1.0, 400)
    vals = _exp_bound_constant(gamma, c_lower, grid)
    i = int(np.argmax(vals))
    if vals[i] <= 0.0:
        raise ValueError("no admissible K with positive bound constant")
    return float(grid[i])


def variational_bound_exp(d: float, gamma: float, c_lower: float,
                          alpha: float,
                          k: Optional[float] = None) -> Tuple[float, float]:
    """Rayleigh quotient of e^{-delta x} and its closed-form ceiling.

    delta = K alpha^{1/(2-gamma)} must stay below 1; the form and norm are
    evaluated by quadrature against the exact weight (1+x)^{d-1} and the
    lower-envelope power potential.  Returns (quotient, constant) with the
    guarantee quotient <= -constant * alpha^{2/(2-gamma)}.
    """
    if not 1.0 < gamma < d <= 2.0:
        raise ValueError("exponential bound needs 1 < gamma < d <= 2")
    if alpha <= 0.0:
        raise ValueError("coupling must be positive")
    if k is None:
        k = _default_k(gamma, c_lower)
    k_const = _exp_bound_constant(gamma, c_lower, float(k))
    if k_const <= 0.0:
        raise ValueError(f"bound constant not positive at K={k}")
    delta = k * alpha ** (1.0 / (2.0 - gamma))
    if delta >= 1.0:
        raise ValueError(f"delta = {delta} >= 1; coupling too large for K={k}")

    def form_density(x):
        decay = np.exp(-2.0 * delta * x)
        weight = (1.0 + x) ** (d - 1.0)
        pot = alpha * c_lower * (1.0 + x) ** (-gamma)
        return decay * weight * (delta * delta - pot)

    def norm_density(x):
        return np.exp(-2.0 * delta * x) * (1.0 + x) ** (d - 1.0)

    block = max(1.0, 0.1 / delta)
    h_val = quadrature.integrate_decaying(form_density, 0.0,
                                          first_block=block,
                                          tol_rel=1e-11).value
    n_val = quadrature.integrate_decaying(norm_density, 0.0,
                                          first_block=block,
                                          tol_rel=1e-11).value
    quotient = h_val / n_val
    bound = 2.0 ** d * k_const / gamma_fn(d)
    ceiling = -bound * alpha ** (2.0 / (2.0 - gamma))
    if quotient > ceiling:
        raise RuntimeError(
            f"exponential test function misses its ceiling: {quotient} > {ceiling}")
    return quotient, bound


def _hat_bound_constant(d: float, c_lower: float, beta: float) -> float:
    return c_lower / (8.0 * (2.0 - d)) * math.log(beta / 2.0) \
        - 2.0 ** d / d * beta ** (d - 2.0)


def _default_beta(d: float, c_lower: float) -> float:
    beta = 4.0
    while _hat_bound_constant(d, c_lower, beta) <= 0.0:
        beta *= 2.0
        if beta > 2.0 ** 60:
            raise ValueError("no admissible beta found")
    return beta


def variational_bound_hat(d: float, c_lower: float, alpha: float,
                          beta: Optional[float] = None) -> Tuple[float, float]:
    """Rayleigh quotient of the hat 1 - x/mu at the critical point gamma = d.

    mu = beta nu with nu = |alpha log alpha|^{-1/(2-d)}; all the piecewise
    polynomial-times-power integrals are closed forms.  Returns
    (quotient, constant) with quotient <= -constant |alpha log alpha|^{2/(2-d)}.
    """
    if not 1.0 < d < 2.0:
        raise ValueError("hat bound needs 1 < d < 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("coupling must lie in (0, 1)")
    nu = abs(alpha * math.log(alpha)) ** (-1.0 / (2.0 - d))
    if nu < math.e:
        raise ValueError(f"nu = {nu} < e; coupling too large")
    if beta is None:
        beta = _default_beta(d, c_lower)
    m_const = _hat_bound_constant(d, c_lower, float(beta))
    if m_const <= 0.0:
        raise ValueError(f"bound constant not positive at beta={beta}")
    if beta <= 2.0:
        raise ValueError("beta must exceed 2")

    mu = beta * nu
    big = 1.0 + mu
    kinetic = (big ** d - 1.0) / (d * mu * mu)
    # int_0^mu (1 - x/mu)^2 (1+x)^{-1} dx, substituting t = 1 + x
    pot = (big * big * math.log(big) - 2.0 * big * (big - 1.0)
           + (big * big - 1.0) / 2.0) / (mu * mu)
    norm = (big * big * (big ** d - 1.0) / d
            - 2.0 * big * (big ** (d + 1.0) - 1.0) / (d + 1.0)
            + (big ** (d + 2.0) - 1.0) / (d + 2.0)) / (mu * mu)
    quotient = (kinetic - alpha * c_lower * pot) / norm
    bound = d * m_const / (2.0 * beta) ** d
    ceiling = -bound * abs(alpha * math.log(alpha)) ** (2.0 / (2.0 - d))
    if quotient > ceiling:
        raise RuntimeError(
            f"hat test function misses its ceiling: {quotient} > {ceiling}")
    return quotient, bound


def lambert_chain_bound(alpha: float, gamma: float,
                        d_const: float) -> float:
    """Ground-state-energy ceiling from inverting the log-corrected
    trace inequality 1/alpha <= D E^{(gamma-2)/2} (1 + |log E|).

    The inversion runs through the principal Lambert branch:
    E <= [ (2D/(2-gamma)) alpha W( (2-gamma) / (2 D alpha) ) ]^{2/(2-gamma)}.
    """
    if not 1.0 < gamma < 2.0:
        raise ValueError("need gamma in (1, 2)")
    if alpha <= 0.0 or d_const <= 0.0:
        raise ValueError("alpha and the trace constant must be positive")
    w = lambert_w((2.0 - gamma) / (2.0 * d_const * alpha))
    return (2.0 * d_const / (2.0 - gamma) * alpha * w) ** (2.0 / (2.0 - gamma))
