"""Weighted and transformed half-line ground states.

The independent oracle is a Prufer shooting method (tests/shooting.py built
on scipy's Runge-Kutta): no assembly or eigensolver code is shared with the
finite-element path under test.
"""

import math

import numpy as np
import pytest
import scipy.linalg

from shooting import ground_state_shooting
from treespec.halfline import (HalfLineProblem, PotentialSpec, apply_inv_sqrt,
                               assemble_p1, WeightSegment, graded_mesh,
                               ground_state_transformed,
                               ground_state_weighted, smallest_eigenpair,
                               solve_shifted)

POWER_POT = PotentialSpec.power(1.2, 1.0)


def build(d, alpha, pot=POWER_POT, **kw):
    return HalfLineProblem.build(d, alpha, pot, **kw)


# ---------------------------------------------------------------------------
# potential and mesh plumbing

def test_potential_spec_validation():
    with pytest.raises(ValueError):
        PotentialSpec.power(0.9)           # gamma <= 1
    with pytest.raises(ValueError):
        PotentialSpec.power(2.1)
    with pytest.raises(ValueError):
        PotentialSpec.power(1.5, -1.0)
    nodes = np.linspace(0.0, 10.0, 101)
    with pytest.raises(ValueError):
        PotentialSpec.from_table(nodes, np.ones(101), 1.5, 1.0, 0.5)


def test_potential_table_matches_exact_power():
    nodes = np.linspace(0.0, 30.0, 6001)
    vals = (1.0 + nodes) ** -1.4
    tab = PotentialSpec.from_table(nodes, vals, 1.4, 0.9, 1.0)
    x = np.array([0.0, 0.37, 5.2, 29.0])
    assert np.allclose(tab.evaluate(x), (1.0 + x) ** -1.4, rtol=1e-6)
    # zero outside the table
    assert tab.evaluate(np.array([35.0]))[0] == 0.0


def test_graded_mesh_shape():
    mesh = graded_mesh(50.0, ratio=1.05, forced=(3.0, 15.0))
    assert mesh[0] == 0.0 and mesh[-1] == 50.0
    assert np.all(np.diff(mesh) > 0.0)
    assert any(abs(m - 3.0) < 1e-12 for m in mesh)
    assert any(abs(m - 15.0) < 1e-12 for m in mesh)


def test_build_enforces_minimum_nodes():
    prob = build(1.5, 0.5, truncation=50.0, mesh_ratio=1.5)
    assert prob.mesh.size >= 101


# ---------------------------------------------------------------------------
# eigensolver bricks against dense linear algebra

def _dense(pencil):
    n = pencil.k_diag.size
    K = np.diag(pencil.k_diag)
    M = np.diag(pencil.m_diag)
    idx = np.arange(n - 1)
    K[idx, idx + 1] = K[idx + 1, idx] = pencil.k_off
    M[idx, idx + 1] = M[idx + 1, idx] = pencil.m_off
    return K, M


def _small_pencil():
    mesh = graded_mesh(30.0, ratio=1.15)
    seg = [WeightSegment(0.0, 30.0, 1.0, 0.6)]
    return assemble_p1(mesh, seg, lambda x: -0.8 * (1.0 + x) ** -1.3)


def test_smallest_eigenpair_vs_dense():
    pencil = _small_pencil()
    K, M = _dense(pencil)
    lam_all = scipy.linalg.eigh(K, M, eigvals_only=True)
    out = smallest_eigenpair(pencil, lower_bound=-2.0)
    assert out is not None
    lam, vec, residual = out
    assert abs(lam - lam_all[0]) < 1e-10 * max(1.0, abs(lam_all[0]))
    assert residual < 1e-8


def test_solve_shifted_vs_dense():
    pencil = _small_pencil()
    K, M = _dense(pencil)
    rhs = np.sin(pencil.mesh / 3.0)
    u = solve_shifted(pencil, 0.7, rhs)
    ref = np.zeros_like(rhs)
    ref[:-1] = np.linalg.solve(K + 0.7 * M, M @ rhs[:-1])
    assert np.max(np.abs(u - ref)) < 1e-10 * np.max(np.abs(ref))


def test_apply_inv_sqrt_squares_to_resolvent():
    pencil = _small_pencil()
    rhs = np.exp(-0.3 * pencil.mesh)
    half = apply_inv_sqrt(pencil, 0.9, rhs, n_quad=48)
    twice = apply_inv_sqrt(pencil, 0.9, half, n_quad=48)
    direct = solve_shifted(pencil, 0.9, rhs)
    num = np.max(np.abs(twice - direct))
    assert num < 1e-8 * np.max(np.abs(direct))


# ---------------------------------------------------------------------------
# ground states

def test_alpha_zero_has_no_negative_spectrum():
    for d in (1.3, 2.0):
        prob = build(d, 0.0, truncation=80.0)
        assert ground_state_weighted(prob).e1 == 0.0
        assert ground_state_transformed(prob).e1 == 0.0


def test_ground_state_against_shooting_oracle():
    pot = PotentialSpec.power(1.2, 1.0)
    prob = build(1.5, 0.5, pot, mesh_ratio=1.003)
    ref = ground_state_shooting(1.5, 0.5, pot, prob.truncation)
    for solver in (ground_state_weighted, ground_state_transformed):
        res = solver(prob)
        assert res.converged
        assert abs(res.e1 - ref) <= 1e-6 * abs(ref)


def test_weighted_transformed_equivalence():
    for d, g, a in ((1.3, 1.2, 0.5), (1.6, 1.5, 1.0), (2.0, 1.2, 0.1)):
        prob = build(d, a, PotentialSpec.power(g, 1.0), mesh_ratio=1.01)
        ew = ground_state_weighted(prob).e1
        et = ground_state_transformed(prob).e1
        assert abs(ew - et) <= 1e-5 * abs(ew)


def test_monotone_in_coupling():
    probs = [build(1.5, a, truncation=200.0) for a in (0.5, 0.6)]
    e_small, e_big = [ground_state_weighted(p).e1 for p in probs]
    assert e_big <= e_small <= 0.0


def test_scale_bracket():
    e = {}
    for s in (0.5, 1.0, 2.0):
        prob = build(1.5, 0.5, scale=s, truncation=200.0)
        e[s] = ground_state_weighted(prob).e1
    assert e[2.0] <= e[1.0] <= e[0.5] <= 0.0


def test_mesh_refinement_order():
    pot = PotentialSpec.power(1.2, 1.0)
    es = []
    for ratio in (1.08, 1.04, 1.02):
        prob = build(1.5, 0.5, pot, mesh_ratio=ratio)
        es.append(ground_state_weighted(prob).e1)
    d1 = abs(es[1] - es[0])
    d2 = abs(es[2] - es[1])
    assert d2 * 3.0 <= d1            # empirical order >= 1.5


def test_truncation_stability():
    pot = PotentialSpec.power(1.2, 1.0)
    base = build(1.5, 0.5, pot, mesh_ratio=1.01)
    res = ground_state_weighted(base)
    assert not res.diagnostics["truncation_warning"]
    double = build(1.5, 0.5, pot, truncation=2.0 * base.truncation,
                   mesh_ratio=1.01)
    res2 = ground_state_weighted(double)
    assert abs(res2.e1 - res.e1) <= 1e-6 * abs(res.e1)


def test_truncation_warning_on_short_domain():
    prob = build(1.5, 0.5, truncation=8.0)
    res = ground_state_weighted(prob)
    assert res.diagnostics["truncation_warning"]
