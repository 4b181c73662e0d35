"""Incompressible flow: projection, Yosida smoothing, and the momentum substep.

The velocity update is a Chorin-style split: an explicit viscous + convective
+ forcing step produces a tentative field, which a discrete Helmholtz
projection returns to the divergence-free subspace.  Because the projection
subtracts ``gradient_cc`` of a pressure potential and the divergence is taken
by the same flux-form operator, the post-projection divergence is controlled
directly by the Poisson residual.

Convection transports with the Yosida-smoothed velocity ``(I + eps*A)^{-1} u``,
realized as a componentwise Helmholtz resolvent ``(I - eps*Lap)^{-1}`` with
no-slip walls followed by a projection.  The resolvent is separable on the
staggered grid and is solved exactly by fast sine transforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .grid import (
    Grid,
    ScalarField,
    VectorField,
    cells_to_faces,
    divergence_fc,
    face_component_at_faces,
    gradient_cc,
    vector_inner,
)

__all__ = [
    "SolverFailure",
    "PoissonSolver",
    "FluidParams",
    "helmholtz_project",
    "project_with_potential",
    "yosida_apply",
    "laplacian_noslip",
    "convection_upwind",
    "dirichlet_energy",
    "divergence_max",
    "ns_substep",
    "energy_identity_residual",
]


class SolverFailure(RuntimeError):
    """Raised when an iterative solve misses its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


class PoissonSolver:
    """Preconditioned CG for the cell-centered zero-flux Laplacian.

    Solves ``Lap q = b`` in the mean-zero gauge.  The operator has a constant
    nullspace; compatibility is enforced by subtracting the right-hand-side
    mean, and iterates stay mean-free.  The default preconditioner is the
    exact cosine-basis inverse of the same stencil (uniform boxes), so solves
    finish in a polished iteration or two; "jacobi" selects plain diagonal
    scaling.  One instance owns mutable scratch buffers and a warm-start
    cache, so use one instance per running simulation.
    """

    def __init__(
        self,
        grid: Grid,
        tol: float = 1e-10,
        max_iter: int = None,
        preconditioner: str = "spectral",
    ):
        self.grid = grid
        self.tol = tol
        self.max_iter = max_iter if max_iter is not None else max(2000, 40 * max(grid.cells))
        if preconditioner not in ("spectral", "jacobi"):
            raise ValueError(f"unknown preconditioner {preconditioner!r}")
        self.preconditioner = preconditioner
        self._diag = self._build_diagonal()
        self._inv_diag = 1.0 / self._diag
        self._neumann_eigs = self._build_neumann_eigs() if preconditioner == "spectral" else None
        self._warm = None
        self.last_iterations = 0
        self.last_residual = 0.0

    def _build_neumann_eigs(self) -> np.ndarray:
        # eigenvalues of -Lap in the cosine basis that diagonalizes the
        # zero-flux stencil on a uniform box; the k=0 entry is the nullspace
        lam = np.zeros(self.grid.shape)
        for d in range(self.grid.dim):
            N = self.grid.cells[d]
            h = self.grid.spacing[d]
            ev = (4.0 / h**2) * np.sin(np.arange(N) * np.pi / (2 * N)) ** 2
            shape = [1] * self.grid.dim
            shape[d] = N
            lam = lam + ev.reshape(shape)
        return lam

    def _apply_preconditioner(self, r: np.ndarray) -> np.ndarray:
        if self.preconditioner == "jacobi":
            return r * self._inv_diag
        spec = scipy.fft.dctn(r, type=2, norm="ortho")
        flat = spec.reshape(-1)
        lam = self._neumann_eigs.reshape(-1)
        out = np.zeros_like(flat)
        out[1:] = flat[1:] / lam[1:]
        return scipy.fft.dctn(out.reshape(spec.shape), type=3, norm="ortho")

    def _build_diagonal(self) -> np.ndarray:
        # diagonal of -Lap: interior cells see 2/h^2 per axis, wall cells 1/h^2
        diag = np.zeros(self.grid.shape)
        for d in range(self.grid.dim):
            h2 = self.grid.spacing[d] ** 2
            contrib = np.full(self.grid.cells[d], 2.0 / h2)
            contrib[0] = 1.0 / h2
            contrib[-1] = 1.0 / h2
            shape = [1] * self.grid.dim
            shape[d] = self.grid.cells[d]
            diag = diag + contrib.reshape(shape)
        return diag

    def apply_neg_laplacian(self, p: np.ndarray) -> np.ndarray:
        """Matrix-vector product with ``-Lap`` (zero-flux walls)."""
        out = np.zeros_like(p)
        dim = self.grid.dim
        for d in range(dim):
            h2 = self.grid.spacing[d] ** 2
            mid = [slice(None)] * dim
            mid[d] = slice(1, -1)
            lo = [slice(None)] * dim
            lo[d] = slice(None, -2)
            hi = [slice(None)] * dim
            hi[d] = slice(2, None)
            out[tuple(mid)] -= (p[tuple(hi)] - 2.0 * p[tuple(mid)] + p[tuple(lo)]) / h2
            first = [slice(None)] * dim
            first[d] = 0
            second = [slice(None)] * dim
            second[d] = 1
            out[tuple(first)] -= (p[tuple(second)] - p[tuple(first)]) / h2
            first[d] = -1
            second[d] = -2
            out[tuple(first)] -= (p[tuple(second)] - p[tuple(first)]) / h2
        return out

    def solve(
        self,
        b: np.ndarray,
        x0: np.ndarray = None,
        warm: bool = True,
        abs_target: float = None,
    ):
        """Return ``q`` with ``Lap q = b`` (mean-zero), raising on non-convergence.

        Convergence requires the residual below ``tol * ||b||`` and, when
        ``abs_target`` is given, below that absolute level as well (the
        projection uses it to pin the post-projection divergence).
        """
        b = np.asarray(b, dtype=np.float64)
        rhs = -(b - b.mean())
        rhs_norm = float(np.sqrt((rhs * rhs).sum()))
        if rhs_norm == 0.0:
            self.last_iterations = 0
            self.last_residual = 0.0
            return np.zeros_like(rhs)
        target = self.tol * rhs_norm
        if abs_target is not None:
            target = min(target, abs_target)
        if x0 is not None:
            x = x0 - x0.mean()
        elif warm and self._warm is not None:
            x = self._warm.copy()
        else:
            x = np.zeros_like(rhs)
        r = rhs - self.apply_neg_laplacian(x)
        res = float(np.sqrt((r * r).sum()))
        if res > rhs_norm:
            # warm start worse than a cold one; also keeps the attainable
            # roundoff floor proportional to this right-hand side
            x = np.zeros_like(rhs)
            r = rhs.copy()
            res = rhs_norm
        z = self._apply_preconditioner(r)
        p = z.copy()
        rz = float((r * z).sum())
        it = 0
        while res > target and it < self.max_iter:
            Ap = self.apply_neg_laplacian(p)
            denom = float((p * Ap).sum())
            if denom <= 0.0 or rz <= 0.0:
                break  # Krylov breakdown at the roundoff floor
            alpha = rz / denom
            x += alpha * p
            r -= alpha * Ap
            res = float(np.sqrt((r * r).sum()))
            it += 1
            if res <= target:
                break
            z = self._apply_preconditioner(r)
            rz_new = float((r * z).sum())
            p = z + (rz_new / rz) * p
            rz = rz_new
        self.last_iterations = it
        self.last_residual = res / rhs_norm
        if res > target:
            raise SolverFailure("pressure Poisson solve did not converge", res / rhs_norm, it)
        x -= x.mean()
        if warm:
            self._warm = x.copy()
        return x


@dataclass
class FluidParams:
    """Convection strength, Yosida smoothing, and the gravitational potential.

    ``phi`` is fixed for a run; its face gradient is precomputed here.
    ``kappa = 0`` is the Stokes limit: convection (and with it the Yosida
    smoothing) is bypassed entirely.
    """

    kappa: float = 0.0
    eps: float = 0.0
    phi: ScalarField = None
    grad_phi: VectorField = field(init=False, default=None, repr=False)

    def __post_init__(self):
        if self.phi is not None:
            self.phi.check_finite("phi")
            self.grad_phi = gradient_cc(self.phi)


def project_with_potential(w: VectorField, solver: PoissonSolver):
    """Helmholtz projection returning also the potential and solve stats.

    The Poisson residual equals the post-projection divergence (flux-form
    composition is exact), so it is driven below ``1e-10 * ||w|| / sqrt(vol)``
    in cell-l2, giving ``||div(P w)||_L2 <= 1e-10 * ||w||_L2``.
    """
    w.check_finite("projection input")
    rhs = divergence_fc(w)
    from .grid import vector_l2_sq

    w_norm = np.sqrt(vector_l2_sq(w))
    abs_target = 1e-10 * w_norm / np.sqrt(w.grid.volume_element)
    q = solver.solve(rhs.data, abs_target=abs_target)
    qf = ScalarField(w.grid, q)
    gq = gradient_cc(qf)
    comps = [wc - gc for wc, gc in zip(w.components, gq.components)]
    return VectorField(w.grid, comps), qf, solver.last_iterations


def helmholtz_project(w: VectorField, solver: PoissonSolver) -> VectorField:
    """Projection of a face field onto the discretely divergence-free subspace."""
    out, _, _ = project_with_potential(w, solver)
    return out


# ---------------------------------------------------------------------------
# No-slip componentwise operators
# ---------------------------------------------------------------------------


def _odd_pad(arr: np.ndarray, axis: int) -> np.ndarray:
    """Pad with odd-mirror ghosts so the wall value (half a cell away) is zero."""
    lo = [slice(None)] * arr.ndim
    lo[axis] = slice(0, 1)
    hi = [slice(None)] * arr.ndim
    hi[axis] = slice(-1, None)
    return np.concatenate([-arr[tuple(lo)], arr, -arr[tuple(hi)]], axis=axis)


def _zero_walls(comp: np.ndarray, axis: int) -> np.ndarray:
    sl = [slice(None)] * comp.ndim
    sl[axis] = 0
    comp[tuple(sl)] = 0.0
    sl[axis] = -1
    comp[tuple(sl)] = 0.0
    return comp


def laplacian_noslip(U: VectorField) -> VectorField:
    """Componentwise Laplacian with no-slip walls.

    Along the component's own axis the wall faces are genuine degrees of
    freedom pinned to zero; tangentially the wall sits half a cell outside
    the face line and is enforced by odd-mirror ghosts.
    """
    g = U.grid
    out = []
    for d in range(g.dim):
        arr = U.components[d]
        lap = np.zeros_like(arr)
        for e in range(g.dim):
            h2 = g.spacing[e] ** 2
            if e == d:
                mid = [slice(None)] * g.dim
                mid[e] = slice(1, -1)
                lo = [slice(None)] * g.dim
                lo[e] = slice(None, -2)
                hi = [slice(None)] * g.dim
                hi[e] = slice(2, None)
                lap[tuple(mid)] += (
                    arr[tuple(hi)] - 2.0 * arr[tuple(mid)] + arr[tuple(lo)]
                ) / h2
            else:
                pad = _odd_pad(arr, e)
                lo = [slice(None)] * g.dim
                lo[e] = slice(None, -2)
                mid = [slice(None)] * g.dim
                mid[e] = slice(1, -1)
                hi = [slice(None)] * g.dim
                hi[e] = slice(2, None)
                lap += (pad[tuple(hi)] - 2.0 * pad[tuple(mid)] + pad[tuple(lo)]) / h2
        _zero_walls(lap, d)
        out.append(lap)
    return VectorField(g, out)


def dirichlet_energy(U: VectorField) -> float:
    """Discrete ``integral |grad u|^2`` as the no-slip Dirichlet form ``-<u, Lap u>``."""
    return -vector_inner(U, laplacian_noslip(U))


def convection_upwind(A: VectorField, U: VectorField) -> VectorField:
    """Advective-form upwind transport ``(A . grad) U`` on the staggered grid."""
    g = U.grid
    out = []
    for d in range(g.dim):
        arr = U.components[d]
        conv = np.zeros_like(arr)
        for e in range(g.dim):
            h = g.spacing[e]
            a_e = face_component_at_faces(A.components[e], g, e, d)
            if e == d:
                bwd = np.zeros_like(arr)
                fwd = np.zeros_like(arr)
                lo = [slice(None)] * g.dim
                lo[e] = slice(1, None)
                hi = [slice(None)] * g.dim
                hi[e] = slice(None, -1)
                diff = np.diff(arr, axis=e) / h
                bwd[tuple(lo)] = diff
                fwd[tuple(hi)] = diff
            else:
                pad = _odd_pad(arr, e)
                losl = [slice(None)] * g.dim
                losl[e] = slice(None, -2)
                midsl = [slice(None)] * g.dim
                midsl[e] = slice(1, -1)
                hisl = [slice(None)] * g.dim
                hisl[e] = slice(2, None)
                bwd = (pad[tuple(midsl)] - pad[tuple(losl)]) / h
                fwd = (pad[tuple(hisl)] - pad[tuple(midsl)]) / h
            conv += a_e * np.where(a_e > 0.0, bwd, fwd)
        _zero_walls(conv, d)
        out.append(conv)
    return VectorField(g, out)


# ---------------------------------------------------------------------------
# Yosida smoothing
# ---------------------------------------------------------------------------


def _dirichlet_eigvals_normal(N: int, h: float) -> np.ndarray:
    k = np.arange(1, N)
    return (4.0 / h**2) * np.sin(k * np.pi / (2 * N)) ** 2


def _dirichlet_eigvals_tangential(N: int, h: float) -> np.ndarray:
    m = np.arange(1, N + 1)
    return (4.0 / h**2) * np.sin(m * np.pi / (2 * N)) ** 2


def diffusion_resolvent(U: VectorField, eps: float) -> VectorField:
    """Exact componentwise solve of ``(I - eps*Lap) v = u`` with no-slip walls.

    The staggered no-slip Laplacian is separable: sine modes along the
    component's own axis (DST-I) and half-offset sine modes tangentially
    (DST-II/III pair), so the resolvent is a diagonal scaling in transform
    space.
    """
    if eps == 0.0:
        return U
    g = U.grid
    out = []
    for d in range(g.dim):
        arr = U.components[d]
        core_sl = [slice(None)] * g.dim
        core_sl[d] = slice(1, -1)
        core = arr[tuple(core_sl)]
        spec = core
        lam = np.zeros_like(core)
        for e in range(g.dim):
            h = g.spacing[e]
            if e == d:
                spec = scipy.fft.dst(spec, type=1, axis=e, norm="ortho")
                ev = _dirichlet_eigvals_normal(g.cells[e], h)
            else:
                spec = scipy.fft.dst(spec, type=2, axis=e, norm="ortho")
                ev = _dirichlet_eigvals_tangential(g.cells[e], h)
            shape = [1] * g.dim
            shape[e] = ev.size
            lam = lam + ev.reshape(shape)
        spec = spec / (1.0 + eps * lam)
        for e in range(g.dim):
            if e == d:
                spec = scipy.fft.dst(spec, type=1, axis=e, norm="ortho")
            else:
                spec = scipy.fft.dst(spec, type=3, axis=e, norm="ortho")
        full = np.zeros_like(arr)
        full[tuple(core_sl)] = spec
        out.append(full)
    return VectorField(g, out)


def yosida_apply(U: VectorField, eps: float, solver: PoissonSolver) -> VectorField:
    """Smoothed transport velocity ``(I + eps*A)^{-1} u``.

    ``eps = 0`` returns the input unchanged.  Otherwise the componentwise
    resolvent is followed by a Helmholtz projection; both stages are
    nonexpansive in the face L2 norm.
    """
    if eps == 0.0:
        return U
    v = diffusion_resolvent(U, eps)
    return helmholtz_project(v, solver)


# ---------------------------------------------------------------------------
# Momentum substep
# ---------------------------------------------------------------------------


def divergence_max(U: VectorField) -> float:
    return float(np.abs(divergence_fc(U).data).max())


def _incompressibility_tolerance(U: VectorField, tol: float = 1e-9) -> float:
    g = U.grid
    scale = (1.0 + U.max_abs()) / min(g.spacing)
    return tol * scale


def ns_substep(
    u: VectorField,
    n: ScalarField,
    params: FluidParams,
    dt: float,
    solver: PoissonSolver,
    forcing=None,
    t: float = 0.0,
):
    """One explicit momentum step followed by projection.

    Returns ``(u_next, P, poisson_iterations)`` where the pressure is the
    projection potential divided by ``dt``.  ``forcing``, when given, is a
    callable ``forcing(coords, t, component) -> array`` sampled at face
    centers (manufactured-solution studies).
    """
    g = u.grid
    if divergence_max(u) > _incompressibility_tolerance(u):
        raise ValueError(
            f"ns_substep requires a divergence-free input (max div = {divergence_max(u):.3e})"
        )
    visc_limit = 0.5 / sum(1.0 / h**2 for h in g.spacing)
    if dt > visc_limit:
        raise ValueError(f"dt={dt} exceeds the explicit viscous stability limit {visc_limit}")

    visc = laplacian_noslip(u)
    comps = []
    if params.kappa != 0.0:
        a = yosida_apply(u, params.eps, solver)
        conv = convection_upwind(a, u)
    for d in range(g.dim):
        upd = visc.components[d].copy()
        if params.kappa != 0.0:
            upd -= params.kappa * conv.components[d]
        if params.grad_phi is not None:
            n_face = cells_to_faces(n.data, g, d)
            upd += n_face * params.grad_phi.components[d]
        if forcing is not None:
            coords = g.face_center_mesh(d)
            upd += np.broadcast_to(forcing(coords, t, d), g.face_shape(d))
        comp = u.components[d] + dt * upd
        _zero_walls(comp, d)
        comps.append(comp)
    u_star = VectorField(g, comps)
    u_next, q, iters = project_with_potential(u_star, solver)
    P = ScalarField(g, q.data / dt)
    return u_next, P, iters


def energy_identity_residual(
    u_prev: VectorField,
    u_next: VectorField,
    n: ScalarField,
    params: FluidParams,
    dt: float,
) -> float:
    """Per-step defect of the kinetic-energy balance.

    Compares the discrete rate ``(||u_next||^2 - ||u_prev||^2) / (2 dt)``
    against ``-integral |grad u|^2 + integral (n - n_mean) grad(phi) . u``
    evaluated at the step start; expected O(dt + h^2) along smooth flows.
    """
    from .grid import vector_l2_sq

    rate = 0.5 * (vector_l2_sq(u_next) - vector_l2_sq(u_prev)) / dt
    rhs = -dirichlet_energy(u_prev)
    if params.grad_phi is not None:
        g = u_prev.grid
        nbar = n.mean()
        forcing = 0.0
        for d in range(g.dim):
            n_face = cells_to_faces(n.data - nbar, g, d)
            forcing += float(
                (n_face * params.grad_phi.components[d] * u_prev.components[d]).sum()
            )
        rhs += forcing * g.volume_element
    return abs(rate - rhs)
