"""Ground states on explicit truncated trees and their radial reduction.

tree_ground_state assembles P1 elements edge by edge over the whole tree
(continuity at vertices gives the Kirchhoff conditions weakly) and solves the
sparse pencil.  reduced_ground_state solves the equivalent half-line problem
with the piecewise-constant branching weight.  For a radial potential the two
ground states coincide; both are also bracketed by the power-weight problems
once those carry the sandwich multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import eigsh, splu

from .halfline import (
    PotentialSpec,
    SpectralResult,
    WeightSegment,
    assemble_p1,
    graded_mesh,
    smallest_eigenpair,
)
from .trees import TreeSpec

__all__ = ["TreeMesh", "tree_ground_state", "reduced_ground_state"]

DOF_CAP = 2_000_000


def _radial_mesh(tree: TreeSpec, mesh_ratio: float, first_cell: float | None):
    return graded_mesh(
        tree.truncation_height,
        ratio=mesh_ratio,
        first_cell=first_cell,
        forced=tree.generation_radii,
    )


def _weight_segments(tree: TreeSpec) -> list[WeightSegment]:
    edges = [0.0, *tree.generation_radii, tree.truncation_height]
    return [
        WeightSegment(edges[k], edges[k + 1], float(tree.b) ** k, 0.0)
        for k in range(len(edges) - 1)
    ]


def reduced_ground_state(
    tree: TreeSpec,
    alpha: float,
    potential: PotentialSpec,
    mesh_ratio: float = 1.05,
    first_cell: float | None = None,
) -> SpectralResult:
    """Half-line solve with the branching-function weight.

    The weight is piecewise constant with jumps at the generation radii;
    those radii are forced mesh nodes so every cell sees a single weight.
    """
    mesh = _radial_mesh(tree, mesh_ratio, first_cell)
    segments = _weight_segments(tree)
    coupling = alpha

    def potential_fn(x):
        return -coupling * potential.evaluate(x)

    pencil = assemble_p1(mesh, segments,
                         potential_fn if coupling != 0.0 else None)
    lower = -1.05 * alpha * potential.sup_value - 1e-12
    out = smallest_eigenpair(pencil, lower)
    diagnostics = {"truncation": tree.truncation_height, "n_nodes": int(mesh.size)}
    if out is None:
        return SpectralResult(0.0, np.zeros(mesh.size), 0.0, True, diagnostics)
    lam, u, residual = out
    full = np.append(u, 0.0)
    diagnostics["radial_nodes"] = mesh
    return SpectralResult(min(lam, 0.0), full, residual, residual <= 1e-8,
                          diagnostics)


@dataclass
class TreeMesh:
    """Global DOF layout for P1 elements on a truncated regular tree.

    Radial interval k carries b^k identical edges.  Interior radial nodes are
    replicated per edge; nodes at a generation radius are shared vertex DOFs;
    the root node is a single DOF and the outer boundary is Dirichlet.
    """

    tree: TreeSpec
    radial_mesh: np.ndarray
    interval_cells: list[np.ndarray]   # cell indices of each generation interval
    edge_dofs: list[np.ndarray]        # (edges, local nodes) DOF ids per interval
    n_dofs: int

    @classmethod
    def build(cls, tree: TreeSpec, radial_mesh: np.ndarray) -> "TreeMesh":
        radii = tree.generation_radii
        bounds = [0.0, *radii, tree.truncation_height]
        mid = 0.5 * (radial_mesh[:-1] + radial_mesh[1:])
        which = np.searchsorted(np.asarray(bounds), mid) - 1
        intervals = len(bounds) - 1
        interval_cells = [np.nonzero(which == k)[0] for k in range(intervals)]
        if any(c.size == 0 for c in interval_cells):
            raise ValueError("radial mesh must resolve every generation interval")

        b = tree.b
        next_dof = 0

        def take(n: int) -> np.ndarray:
            nonlocal next_dof
            out = np.arange(next_dof, next_dof + n)
            next_dof += n
            return out

        root = take(1)
        # Vertex DOFs at radius r_k (k = 1..K-1): one per generation-(k-1) edge.
        vertex_dofs = [root]
        for k in range(1, intervals):
            vertex_dofs.append(take(b ** (k - 1)))

        edge_dofs = []
        for k in range(intervals):
            cells = interval_cells[k]
            n_local = cells.size + 1       # node count along the interval
            m_edges = b**k
            ids = np.full((m_edges, n_local), -1, dtype=np.int64)
            if k == 0:
                ids[:, 0] = root[0]
            else:
                ids[:, 0] = vertex_dofs[k][np.arange(m_edges) // b]
            inner = n_local - 2
            if inner > 0:
                blk = take(m_edges * inner).reshape(m_edges, inner)
                ids[:, 1:-1] = blk
            if k + 1 < intervals:
                ids[:, -1] = vertex_dofs[k + 1]
            # else: outer end is the Dirichlet boundary, id stays -1
            edge_dofs.append(ids)
            if next_dof > DOF_CAP:
                raise ResourceWarning(
                    f"tree discretization needs {next_dof} DOFs, cap is {DOF_CAP}"
                )
        return cls(tree, radial_mesh, interval_cells, edge_dofs, next_dof)


def _assemble_tree(mesh: TreeMesh, alpha: float, potential: PotentialSpec):
    x = mesh.radial_mesh
    rows_k, cols_k, vals_k = [], [], []
    rows_m, cols_m, vals_m = [], [], []
    gauss_tau, gauss_w = np.polynomial.legendre.leggauss(4)
    gauss_tau = 0.5 * (gauss_tau + 1.0)
    gauss_w = 0.5 * gauss_w

    for k, cells in enumerate(mesh.interval_cells):
        a = x[cells]
        b = x[cells + 1]
        h = b - a
        stiff = 1.0 / h
        maa = h / 3.0
        mab = h / 6.0
        kaa = stiff.copy()
        kab = -stiff
        if alpha != 0.0:
            xg = a[:, None] + h[:, None] * gauss_tau[None, :]
            dens = -alpha * potential.evaluate(xg) * (h[:, None] * gauss_w[None, :])
            ta, tb = 1.0 - gauss_tau, gauss_tau
            pot_aa = dens @ (ta * ta)
            pot_ab = dens @ (ta * tb)
            pot_bb = dens @ (tb * tb)
        else:
            pot_aa = pot_ab = pot_bb = np.zeros_like(h)

        ids = mesh.edge_dofs[k]            # (m_edges, n_local)
        left = ids[:, :-1]
        right = ids[:, 1:]
        m_edges = ids.shape[0]

        def scatter(rows, cols, vals, i, j, v):
            ii = np.broadcast_to(i, (m_edges, v.size)).ravel()
            jj = np.broadcast_to(j, (m_edges, v.size)).ravel()
            vv = np.broadcast_to(v, (m_edges, v.size)).ravel()
            keep = (ii >= 0) & (jj >= 0)
            rows.append(ii[keep])
            cols.append(jj[keep])
            vals.append(vv[keep])

        scatter(rows_k, cols_k, vals_k, left, left, kaa + pot_aa)
        scatter(rows_k, cols_k, vals_k, right, right, kaa + pot_bb)
        scatter(rows_k, cols_k, vals_k, left, right, kab + pot_ab)
        scatter(rows_k, cols_k, vals_k, right, left, kab + pot_ab)
        scatter(rows_m, cols_m, vals_m, left, left, maa)
        scatter(rows_m, cols_m, vals_m, right, right, maa)
        scatter(rows_m, cols_m, vals_m, left, right, mab)
        scatter(rows_m, cols_m, vals_m, right, left, mab)

    n = mesh.n_dofs
    K = coo_matrix(
        (np.concatenate(vals_k), (np.concatenate(rows_k), np.concatenate(cols_k))),
        shape=(n, n),
    ).tocsc()
    M = coo_matrix(
        (np.concatenate(vals_m), (np.concatenate(rows_m), np.concatenate(cols_m))),
        shape=(n, n),
    ).tocsc()
    return K, M


def _radial_trace(mesh: TreeMesh, u: np.ndarray):
    """Node values along the first root-to-leaf path, Dirichlet zero appended."""
    values = []
    nodes = []
    x = mesh.radial_mesh
    for k, cells in enumerate(mesh.interval_cells):
        ids = mesh.edge_dofs[k][0]
        local_nodes = np.concatenate([[cells[0]], cells + 1])
        start = 0 if k == 0 else 1  # vertex already emitted by previous interval
        for j in range(start, ids.size):
            nodes.append(x[local_nodes[j]])
            values.append(u[ids[j]] if ids[j] >= 0 else 0.0)
    return np.asarray(nodes), np.asarray(values)


def tree_ground_state(
    tree: TreeSpec,
    alpha: float,
    potential: PotentialSpec,
    mesh_ratio: float = 1.05,
    first_cell: float | None = None,
) -> SpectralResult:
    """Smallest eigenvalue of the Laplacian-with-well form on the whole tree.

    Dirichlet conditions close the truncated leaves; the root keeps the
    natural condition.  Diagnostics carry the radial trace of the
    eigenfunction along one root-to-leaf path for reduction checks.
    """
    radial = _radial_mesh(tree, mesh_ratio, first_cell)
    mesh = TreeMesh.build(tree, radial)
    K, M = _assemble_tree(mesh, alpha, potential)
    sigma = -1.05 * alpha * potential.sup_value - 1e-9

    diagnostics = {
        "truncation": tree.truncation_height,
        "n_dofs": mesh.n_dofs,
        "n_radial_nodes": int(radial.size),
    }

    v0 = np.ones(mesh.n_dofs)
    try:
        lam, vec = eigsh(K, k=1, M=M, sigma=sigma, which="LM", v0=v0,
                         maxiter=4000, tol=0)
        lam = float(lam[0])
        u = vec[:, 0]
    except Exception:
        # Shift-invert power iteration fallback; sigma sits below the form
        # bound so the factorization is definite.
        lu = splu((K - sigma * M).tocsc())
        u = v0 / math.sqrt(float(v0 @ (M @ v0)))
        lam = float(u @ (K @ u))
        for _ in range(400):
            u = lu.solve(M @ u)
            u /= math.sqrt(float(u @ (M @ u)))
            new = float(u @ (K @ u))
            if abs(new - lam) <= 1e-14 * abs(new):
                lam = new
                break
            lam = new

    # A couple of inverse-iteration steps then the Rayleigh quotient.
    lu = splu((K - sigma * M).tocsc())
    for _ in range(2):
        u = lu.solve(M @ u)
        u /= math.sqrt(float(u @ (M @ u)))
    lam = float(u @ (K @ u))
    res_vec = K @ u - lam * (M @ u)
    denom = float(np.linalg.norm(K @ u)) + abs(lam) * float(np.linalg.norm(M @ u))
    residual = float(np.linalg.norm(res_vec)) / max(denom, 1e-300)
    if u[np.argmax(np.abs(u))] < 0.0:
        u = -u

    nodes, trace = _radial_trace(mesh, u)
    diagnostics["radial_nodes"] = nodes
    diagnostics["radial_trace"] = trace
    return SpectralResult(min(lam, 0.0), u, residual, residual <= 1e-8,
                          diagnostics)
