"""Cantilever finite elements: small-displacement and corotational solvers.

The linear path uses classical two-node elements with cubic transverse
interpolation (displacement + rotation per node), a consistent load
vector integrated with 3-point Gauss quadrature per element, and a direct
banded Cholesky solve.

The large-rotation path wraps the same local bending behaviour in a
corotational frame per element: the element's rigid rotation is removed
via its current chord, local deformations (elongation and two
chord-relative end rotations) stay small, and the global residual is
solved by full Newton iteration with automatic load incrementation.
Axial degrees of freedom are carried because the rotating frame needs
them; for a free-ended cantilever the axial strain stays near zero.

Transverse loads are given per unit undeformed length and keep their
direction (transverse to the undeformed axis) as the beam deforms.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded, solve_banded

from .catalog import Specimen
from .errors import ConvergenceError

logger = logging.getLogger(__name__)

# Load per unit length as a function of axial position, vectorized over x.
DistributedLoad = Callable[[np.ndarray], np.ndarray]

MIN_ELEMENTS = 4

# 3-point Gauss rule on [0, 1]
_G = np.sqrt(3.0 / 5.0) / 2.0
_GAUSS_XI = np.array([0.5 - _G, 0.5, 0.5 + _G])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0

# Local rotations beyond this are outside the corotational frame's validity;
# treated as iteration divergence so the caller can re-try with increments.
_MAX_LOCAL_ROTATION = 1.4


@dataclass(frozen=True)
class BeamMesh:
    """Uniform discretization of a cantilever, clamped at node 0."""

    specimen: Specimen
    n_elements: int
    node_positions: np.ndarray  # (n_elements + 1,), 0 .. length_l
    bending_rigidity: float  # E I  (N m^2)
    axial_rigidity: float  # E A  (N)

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def element_length(self) -> float:
        return self.node_positions[1] - self.node_positions[0]

    def gauss_points(self) -> np.ndarray:
        """Global quadrature abscissae, shape (n_elements, 3)."""
        return self.node_positions[:-1, None] + _GAUSS_XI[None, :] * self.element_length

    def gauss_weights(self) -> np.ndarray:
        """Quadrature weights including the element length, shape (3,)."""
        return _GAUSS_W * self.element_length


def build_mesh(spec: Specimen, n_elements: int = 40) -> BeamMesh:
    """Uniform mesh with bending rigidity E w t^3 / 12 (in-plane bending)."""
    if n_elements < MIN_ELEMENTS:
        raise ValueError(f"n_elements must be at least {MIN_ELEMENTS} (got {n_elements})")
    nodes = np.linspace(0.0, spec.length_l, n_elements + 1)
    nodes.setflags(write=False)
    e = spec.material.young_modulus
    return BeamMesh(
        specimen=spec,
        n_elements=n_elements,
        node_positions=nodes,
        bending_rigidity=e * spec.bending_inertia,
        axial_rigidity=e * spec.section_area,
    )


@dataclass(frozen=True)
class DeflectionField:
    """Nodal solution of a structural solve on a BeamMesh.

    ``deflection`` and ``rotation`` are the transverse displacement and
    cross-section rotation at the nodes; ``axial`` is the axial nodal
    displacement (identically zero for linear solves).  The clamped end
    satisfies v(0) = theta(0) = 0 exactly.
    """

    mesh: BeamMesh
    deflection: np.ndarray
    rotation: np.ndarray
    axial: np.ndarray
    residual_history: tuple[float, ...] = field(default=(), compare=False)

    def evaluate(self, x) -> np.ndarray | float:
        """Transverse displacement v(x) by elementwise cubic interpolation."""
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        length = self.mesh.element_length
        idx = np.clip((x_arr / length).astype(int), 0, self.mesh.n_elements - 1)
        xi = (x_arr - self.mesh.node_positions[idx]) / length
        n1, n2, n3, n4 = _hermite_basis(xi, length)
        out = (
            n1 * self.deflection[idx]
            + n2 * self.rotation[idx]
            + n3 * self.deflection[idx + 1]
            + n4 * self.rotation[idx + 1]
        )
        return out if np.ndim(x) else float(out[0])

    @property
    def tip(self) -> float:
        """Transverse displacement at the free end."""
        return float(self.deflection[-1])


def tip_displacement(fld: DeflectionField) -> float:
    """Transverse displacement at x = l."""
    return fld.tip


def zero_field(mesh: BeamMesh) -> DeflectionField:
    """The undeformed configuration."""
    z = np.zeros(mesh.n_nodes)
    return _make_field(mesh, z, z.copy(), z.copy())


def _make_field(mesh, v, theta, u, residuals: Sequence[float] = ()) -> DeflectionField:
    for arr in (v, theta, u):
        arr.setflags(write=False)
    return DeflectionField(
        mesh=mesh, deflection=v, rotation=theta, axial=u,
        residual_history=tuple(residuals),
    )


def make_field(
    mesh: BeamMesh,
    deflection: np.ndarray,
    rotation: np.ndarray,
    axial: np.ndarray | None = None,
    residuals: Sequence[float] = (),
) -> DeflectionField:
    """Package nodal arrays into an immutable DeflectionField."""
    u = np.zeros(mesh.n_nodes) if axial is None else np.array(axial, dtype=float)
    return _make_field(
        mesh, np.array(deflection, dtype=float), np.array(rotation, dtype=float), u, residuals
    )


def dofs_from_field(fld: DeflectionField) -> np.ndarray:
    """Interleave a field into the (u, v, theta) DOF vector."""
    d = np.empty(3 * fld.mesh.n_nodes)
    d[0::3] = fld.axial
    d[1::3] = fld.deflection
    d[2::3] = fld.rotation
    return d


def field_from_dofs(
    mesh: BeamMesh, dofs: np.ndarray, residuals: Sequence[float] = ()
) -> DeflectionField:
    """Unpack a (u, v, theta) DOF vector into a DeflectionField."""
    return _make_field(
        mesh, dofs[1::3].copy(), dofs[2::3].copy(), dofs[0::3].copy(), residuals
    )


def _hermite_basis(xi: np.ndarray, length: float):
    """Cubic transverse shape functions on [0, 1] (rotation DOFs carry L)."""
    xi2 = xi * xi
    xi3 = xi2 * xi
    n1 = 1.0 - 3.0 * xi2 + 2.0 * xi3
    n2 = length * (xi - 2.0 * xi2 + xi3)
    n3 = 3.0 * xi2 - 2.0 * xi3
    n4 = length * (xi3 - xi2)
    return n1, n2, n3, n4


def _evaluate_load(load: DistributedLoad, x: np.ndarray) -> np.ndarray:
    q = np.asarray(load(x), dtype=float)
    if q.shape != x.shape:
        q = np.broadcast_to(q, x.shape).astype(float)
    if not np.all(np.isfinite(q)):
        raise ValueError("distributed load returned non-finite values")
    return q


def gauss_load_values(mesh: BeamMesh, load: DistributedLoad) -> np.ndarray:
    """Load intensity sampled at the quadrature points, shape (n_elements, 3)."""
    xg = mesh.gauss_points()
    return _evaluate_load(load, xg.ravel()).reshape(xg.shape)


def transverse_basis_matrix(mesh: BeamMesh, dof_stride: int) -> np.ndarray:
    """Rows map a DOF vector to v at the quadrature points.

    ``dof_stride`` is 2 for the (v, theta) layout and 3 for (u, v, theta);
    shape (3 * n_elements, dof_stride * n_nodes).  Together with the Gauss
    weights this expresses both consistent load vectors f = G^T (w q) and
    load-stiffness matrices G^T diag(w q') G for deflection-dependent loads.
    """
    length = mesh.element_length
    n1, n2, n3, n4 = _hermite_basis(_GAUSS_XI, length)
    g = np.zeros((3 * mesh.n_elements, dof_stride * mesh.n_nodes))
    off = dof_stride - 2  # column of v within a node block
    for e in range(mesh.n_elements):
        rows = slice(3 * e, 3 * e + 3)
        base = dof_stride * e
        g[rows, base + off] = n1
        g[rows, base + off + 1] = n2
        g[rows, base + dof_stride + off] = n3
        g[rows, base + dof_stride + off + 1] = n4
    return g


def consistent_load_vector(
    mesh: BeamMesh,
    load: DistributedLoad | None,
    dof_stride: int,
    tip_force: float = 0.0,
    tip_moment: float = 0.0,
) -> np.ndarray:
    """Assemble the work-equivalent nodal force vector for a transverse load."""
    f = np.zeros(dof_stride * mesh.n_nodes)
    off = dof_stride - 2
    if load is not None:
        qg = gauss_load_values(mesh, load)  # (n_el, 3)
        wq = qg * mesh.gauss_weights()[None, :]
        length = mesh.element_length
        n1, n2, n3, n4 = _hermite_basis(_GAUSS_XI, length)
        fe = np.stack(
            [wq @ n1, wq @ n2, wq @ n3, wq @ n4], axis=1
        )  # (n_el, 4): (va, tha, vb, thb)
        for k, col in enumerate((off, off + 1, dof_stride + off, dof_stride + off + 1)):
            np.add.at(f, dof_stride * np.arange(mesh.n_elements) + col, fe[:, k])
    f[dof_stride * mesh.n_elements + off] += tip_force
    f[dof_stride * mesh.n_elements + off + 1] += tip_moment
    return f


# ----------------------------------------------------------------------
# small-displacement solve
# ----------------------------------------------------------------------

def linear_stiffness(mesh: BeamMesh) -> np.ndarray:
    """Global stiffness, (v, theta) layout, clamped BC not yet applied."""
    length = mesh.element_length
    ei = mesh.bending_rigidity
    l2 = length * length
    ke = (ei / length**3) * np.array(
        [
            [12.0, 6.0 * length, -12.0, 6.0 * length],
            [6.0 * length, 4.0 * l2, -6.0 * length, 2.0 * l2],
            [-12.0, -6.0 * length, 12.0, -6.0 * length],
            [6.0 * length, 2.0 * l2, -6.0 * length, 4.0 * l2],
        ]
    )
    n_dof = 2 * mesh.n_nodes
    k = np.zeros((n_dof, n_dof))
    for e in range(mesh.n_elements):
        sl = slice(2 * e, 2 * e + 4)
        k[sl, sl] += ke
    return k


def _upper_banded(a: np.ndarray, bandwidth: int) -> np.ndarray:
    m = a.shape[0]
    ab = np.zeros((bandwidth + 1, m))
    for k in range(bandwidth + 1):
        ab[bandwidth - k, k:] = np.diagonal(a, k)
    return ab


class LinearBeamOperator:
    """Factorized clamped-cantilever stiffness, reusable across load cases."""

    def __init__(self, mesh: BeamMesh):
        self.mesh = mesh
        k_red = linear_stiffness(mesh)[2:, 2:]
        self._factor = cholesky_banded(_upper_banded(k_red, 3), lower=False)

    def solve(
        self,
        load: DistributedLoad | None = None,
        tip_force: float = 0.0,
        tip_moment: float = 0.0,
    ) -> DeflectionField:
        f = consistent_load_vector(self.mesh, load, 2, tip_force, tip_moment)
        return self.solve_vector(f)

    def solve_vector(self, f_full: np.ndarray) -> DeflectionField:
        """Solve for a pre-assembled (v, theta)-layout force vector."""
        sol = cho_solve_banded((self._factor, False), f_full[2:])
        n = self.mesh.n_nodes
        v = np.zeros(n)
        theta = np.zeros(n)
        v[1:] = sol[0::2]
        theta[1:] = sol[1::2]
        return _make_field(self.mesh, v, theta, np.zeros(n))


def solve_linear(
    mesh: BeamMesh,
    load: DistributedLoad | None = None,
    tip_force: float = 0.0,
    tip_moment: float = 0.0,
) -> DeflectionField:
    """Small-displacement solution for a transverse load and optional tip loads."""
    return LinearBeamOperator(mesh).solve(load, tip_force, tip_moment)


# ----------------------------------------------------------------------
# corotational solve
# ----------------------------------------------------------------------

def _wrap_angle(a: np.ndarray) -> np.ndarray:
    """Map angles into (-pi, pi], touching only values that need it.

    The modulo form alone would add pi-scale roundoff to every angle, which
    would put a floor under the Newton residual; small angles pass through
    exactly.
    """
    wrapped = (a + np.pi) % (2.0 * np.pi) - np.pi
    return np.where(np.abs(a) > np.pi, wrapped, a)


def corotational_internal(mesh: BeamMesh, dofs: np.ndarray):
    """Internal force vector and consistent tangent for the (u, v, theta) state.

    Returns (f_int, k_tangent, max_local_rotation); the clamped boundary is
    not applied here.
    """
    x0 = mesh.node_positions
    u = dofs[0::3]
    v = dofs[1::3]
    theta = dofs[2::3]

    l0 = np.diff(x0)
    du = u[1:] - u[:-1]
    dx = l0 + du
    dy = v[1:] - v[:-1]
    ln = np.hypot(dx, dy)
    if not np.all(ln > 0.0) or not np.all(np.isfinite(ln)):
        raise ConvergenceError("degenerate element geometry during iteration")
    c = dx / ln
    s = dy / ln
    beta = np.arctan2(dy, dx)
    th_a = _wrap_angle(theta[:-1] - beta)
    th_b = _wrap_angle(theta[1:] - beta)
    max_local = float(np.max(np.abs(np.concatenate([th_a, th_b])))) if len(th_a) else 0.0

    # ln - l0 evaluated from the DOF differences so the roundoff scales
    # with the deformation instead of with l0^2
    elong = (2.0 * l0 * du + du * du + dy * dy) / (ln + l0)
    axial_n = mesh.axial_rigidity * elong / l0
    ei_l = mesh.bending_rigidity / l0
    m_a = ei_l * (4.0 * th_a + 2.0 * th_b)
    m_b = ei_l * (2.0 * th_a + 4.0 * th_b)

    zero = np.zeros_like(c)
    one = np.ones_like(c)
    r_vec = np.stack([-c, -s, zero, c, s, zero], axis=1)
    z_vec = np.stack([s, -c, zero, -s, c, zero], axis=1)
    b_th_a = -z_vec / ln[:, None]
    b_th_a[:, 2] += one
    b_th_b = -z_vec / ln[:, None]
    b_th_b[:, 5] += one

    f_el = (
        r_vec * axial_n[:, None] + b_th_a * m_a[:, None] + b_th_b * m_b[:, None]
    )  # (n_el, 6)

    def outer(a, b):
        return np.einsum("ei,ej->eij", a, b)

    ea_l = (mesh.axial_rigidity / l0)[:, None, None]
    ei_l3 = ei_l[:, None, None]
    k_el = ea_l * outer(r_vec, r_vec) + ei_l3 * (
        4.0 * outer(b_th_a, b_th_a)
        + 2.0 * (outer(b_th_a, b_th_b) + outer(b_th_b, b_th_a))
        + 4.0 * outer(b_th_b, b_th_b)
    )
    k_el += (axial_n / ln)[:, None, None] * outer(z_vec, z_vec)
    k_el += ((m_a + m_b) / ln**2)[:, None, None] * (
        outer(r_vec, z_vec) + outer(z_vec, r_vec)
    )

    n_dof = 3 * mesh.n_nodes
    idx = 3 * np.arange(mesh.n_elements)[:, None] + np.arange(6)[None, :]
    f_int = np.zeros(n_dof)
    np.add.at(f_int, idx, f_el)
    k = np.zeros((n_dof, n_dof))
    np.add.at(k, (idx[:, :, None], idx[:, None, :]), k_el)
    return f_int, k, max_local


def solve_clamped_banded(k_full: np.ndarray, rhs_full: np.ndarray, dof_stride: int) -> np.ndarray:
    """Direct banded LU solve of the clamped-reduced system; returns full-layout DOFs."""
    hbw = 2 * dof_stride - 1
    k_red = k_full[dof_stride:, dof_stride:]
    m = k_red.shape[0]
    ab = np.zeros((2 * hbw + 1, m))
    for k in range(-hbw, hbw + 1):
        d = np.diagonal(k_red, k)
        if k >= 0:
            ab[hbw - k, k:] = d
        else:
            ab[hbw - k, : m + k] = d
    sol = solve_banded((hbw, hbw), ab, rhs_full[dof_stride:])
    out = np.zeros_like(rhs_full)
    out[dof_stride:] = sol
    return out


def assembly_noise_floor(mesh: BeamMesh, dofs: np.ndarray) -> float:
    """Residual-norm floor set by float roundoff of the corotational assembly.

    The chord angles inherit an absolute eps * |v|/L noise from the stored
    nodal values and the elongations an eps * state^2 * L one; below the
    resulting force noise a residual cannot be driven further.
    """
    length = mesh.element_length
    state = max(
        float(np.max(np.abs(dofs[2::3]))),
        float(np.max(np.abs(dofs[0::3])) / length),
        float(np.max(np.abs(dofs[1::3])) / length),
    )
    return float(
        4.0 * np.finfo(float).eps * np.sqrt(dofs.size)
        * (mesh.bending_rigidity / length**2 * state
           + 0.5 * mesh.axial_rigidity * state * state)
    )


def newton_solve(
    mesh: BeamMesh,
    f_ext: np.ndarray,
    start: np.ndarray | None = None,
    residual_tol: float = 1e-10,
    max_iterations: int = 30,
):
    """Full Newton iteration on the corotational residual for a fixed load.

    Returns (dofs, residual_history, converged).  ``f_ext`` and the state
    use the (u, v, theta) layout including the clamped node.
    """
    n_dof = 3 * mesh.n_nodes
    d = np.zeros(n_dof) if start is None else np.array(start, dtype=float)
    ref = np.linalg.norm(f_ext[3:])
    tol = residual_tol * max(ref, 1e-30)
    length_cap = 0.3 * mesh.specimen.length_l
    history: list[float] = []

    for it in range(max_iterations + 1):
        try:
            f_int, k_t, max_local = corotational_internal(mesh, d)
        except ConvergenceError:
            return d, history, False
        res = f_ext - f_int
        res[:3] = 0.0
        rn = float(np.linalg.norm(res))
        history.append(rn)
        if rn <= tol + assembly_noise_floor(mesh, d):
            return d, history, True
        if not np.isfinite(rn) or max_local > _MAX_LOCAL_ROTATION:
            return d, history, False
        if it >= 4 and rn > 10.0 * history[0]:
            return d, history, False
        if it == max_iterations:
            return d, history, False
        try:
            step = solve_clamped_banded(k_t, res, 3)
        except np.linalg.LinAlgError:
            return d, history, False
        if not np.all(np.isfinite(step)):
            return d, history, False
        # keep individual updates inside the frame's validity
        scale = 1.0
        max_rot = float(np.max(np.abs(step[2::3]))) if n_dof else 0.0
        max_tr = float(np.max(np.abs(np.concatenate([step[0::3], step[1::3]]))))
        if max_rot > 0.5:
            scale = min(scale, 0.5 / max_rot)
        if max_tr > length_cap:
            scale = min(scale, length_cap / max_tr)
        d = d + scale * step
    return d, history, False


def solve_nonlinear(
    mesh: BeamMesh,
    load: DistributedLoad | None = None,
    tip_force: float = 0.0,
    tip_moment: float = 0.0,
    residual_tol: float = 1e-10,
    max_iterations: int = 30,
    max_increments: int = 256,
) -> DeflectionField:
    """Large-rotation equilibrium under a fixed transverse load.

    The full load is attempted in one Newton solve first; on divergence the
    load is applied in 2, 4, ... increments (warm-started) up to
    ``max_increments``.  Raises ConvergenceError when even the finest
    incrementation fails.
    """
    f_ext = consistent_load_vector(mesh, load, 3, tip_force, tip_moment)
    if np.linalg.norm(f_ext[3:]) == 0.0:
        return zero_field(mesh)

    n_inc = 1
    while n_inc <= max_increments:
        d = np.zeros(3 * mesh.n_nodes)
        history: list[float] = []
        ok = True
        for i in range(1, n_inc + 1):
            d, history, ok = newton_solve(
                mesh, f_ext * (i / n_inc), start=d,
                residual_tol=residual_tol, max_iterations=max_iterations,
            )
            if not ok:
                break
        if ok:
            if n_inc > 1:
                logger.debug("nonlinear solve needed %d load increments", n_inc)
            return _make_field(
                mesh, d[1::3].copy(), d[2::3].copy(), d[0::3].copy(), history
            )
        n_inc *= 2
    raise ConvergenceError(
        f"corotational solve did not converge with up to {max_increments} load increments",
        iterations=max_iterations,
        residual=history[-1] if history else float("nan"),
    )


def axial_strains(fld: DeflectionField) -> np.ndarray:
    """Element chord strains (ln - l0)/l0 of a solved state."""
    mesh = fld.mesh
    x = mesh.node_positions + fld.axial
    dx = np.diff(x)
    dy = np.diff(fld.deflection)
    l0 = np.diff(mesh.node_positions)
    ln = np.hypot(dx, dy)
    return (ln - l0) / l0
