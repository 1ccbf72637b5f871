"""Euler-Bernoulli beam finite elements: assembly, modal solution, sensitivities.

2-node Hermite-cubic elements with 2 DOFs per node (translation, rotation),
consistent mass matrix. Geometry is given in mm (and the modulus in Pa);
everything here works in SI internally, so matrices are in N/m and kg.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import DegenerateSpectrumError, InvalidInputError, NumericError

_MM = 1e-3


class BoundaryCondition(Enum):
    SIMPLY_SUPPORTED = "simply_supported"
    CANTILEVER = "cantilever"


@dataclass(frozen=True)
class BeamConfig:
    """Healthy-structure definition: rectangular cross-section prismatic beam.

    Lengths are in mm, density in kg/m^3 and the modulus in Pa.
    """

    length: float = 1000.0
    width: float = 20.0
    thickness: float = 3.25
    density: float = 2700.0
    healthy_youngs_modulus: float = 70e9
    n_elements: int = 20
    boundary_condition: BoundaryCondition = BoundaryCondition.SIMPLY_SUPPORTED

    def __post_init__(self):
        for name in ("length", "width", "thickness", "density", "healthy_youngs_modulus"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")
        if self.n_elements < 2:
            raise InvalidInputError("n_elements must be at least 2")

    @property
    def n_nodes(self) -> int:
        return self.n_elements + 1

    @property
    def area(self) -> float:
        """Cross-section area in m^2."""
        return self.width * self.thickness * _MM**2

    @property
    def second_moment(self) -> float:
        """Second moment of area in m^4."""
        return self.width * self.thickness**3 / 12.0 * _MM**4

    @property
    def element_length(self) -> float:
        """Element length in m."""
        return self.length * _MM / self.n_elements

    @property
    def node_x_mm(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_nodes)

    def healthy_params(self) -> "DamageParams":
        return DamageParams(np.full(self.n_elements, self.healthy_youngs_modulus))


@dataclass(frozen=True)
class DamageParams:
    """Per-element Young's moduli in Pa; the design variable of the inverse problem."""

    youngs_moduli: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.youngs_moduli, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError("youngs_moduli must be a 1-D vector")
        if not np.all(arr > 0):
            raise InvalidInputError("all Young's moduli must be strictly positive")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "youngs_moduli", arr)

    def __len__(self) -> int:
        return len(self.youngs_moduli)


@dataclass(frozen=True)
class DofMap:
    """Bookkeeping between full DOF numbering, free DOFs and nodes.

    Full numbering: node i owns translation DOF 2i and rotation DOF 2i+1.
    Free numbering: full DOFs with constrained rows/columns deleted.
    Index -1 marks a constrained DOF.
    """

    n_nodes: int
    free_dofs: np.ndarray              # full indices of retained DOFs
    full_to_free: np.ndarray           # len 2*n_nodes, -1 where constrained
    element_dofs_full: np.ndarray      # (n_elements, 4)
    node_x_mm: np.ndarray

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    @property
    def n_elements(self) -> int:
        return self.n_nodes - 1

    @property
    def translation_free_index(self) -> np.ndarray:
        """Free index of each node's translation DOF (-1 if constrained)."""
        return self.full_to_free[0::2]

    @property
    def rotation_free_index(self) -> np.ndarray:
        return self.full_to_free[1::2]

    @property
    def translation_mask(self) -> np.ndarray:
        """Boolean mask over free DOFs marking translations."""
        return self.free_dofs % 2 == 0

    def element_free_dofs(self, k: int) -> np.ndarray:
        """The element's 4 DOFs in free numbering (-1 where constrained)."""
        return self.full_to_free[self.element_dofs_full[k]]

    def sample_translations(self, vec: np.ndarray) -> np.ndarray:
        """Translation value at every node; exact 0.0 at constrained nodes.

        Works on a free-DOF vector or on the columns of a free-DOF matrix.
        """
        vec = np.asarray(vec)
        idx = self.translation_free_index
        out_shape = (self.n_nodes,) + vec.shape[1:]
        out = np.zeros(out_shape, dtype=vec.dtype)
        keep = idx >= 0
        out[keep] = vec[idx[keep]]
        return out


@dataclass(frozen=True)
class Assembly:
    """Global free-DOF matrices for one parameter state."""

    stiffness: np.ndarray
    mass: np.ndarray
    element_stiffness: tuple  # n_elements matrices, free-DOF basis
    dof_map: DofMap


@dataclass(frozen=True)
class ModalSolution:
    """Eigensolution of K phi = lambda M phi, with the matrices it came from.

    Mode shapes are mass-normalized columns over free DOFs, sorted by
    ascending eigenvalue, with the largest-magnitude translational entry of
    each column made positive.
    """

    eigenvalues: np.ndarray
    frequencies: np.ndarray      # rad/s
    mode_shapes: np.ndarray      # (n_free, n_modes)
    global_stiffness: np.ndarray
    global_mass: np.ndarray
    element_stiffness: tuple
    dof_map: DofMap

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)


def element_stiffness_matrix(e_modulus: float, second_moment: float, le: float) -> np.ndarray:
    """4x4 Hermite beam element stiffness, SI units."""
    c = e_modulus * second_moment / le**3
    return c * np.array(
        [
            [12.0, 6.0 * le, -12.0, 6.0 * le],
            [6.0 * le, 4.0 * le**2, -6.0 * le, 2.0 * le**2],
            [-12.0, -6.0 * le, 12.0, -6.0 * le],
            [6.0 * le, 2.0 * le**2, -6.0 * le, 4.0 * le**2],
        ]
    )


def element_mass_matrix(density: float, area: float, le: float) -> np.ndarray:
    """4x4 consistent mass matrix, SI units."""
    c = density * area * le / 420.0
    return c * np.array(
        [
            [156.0, 22.0 * le, 54.0, -13.0 * le],
            [22.0 * le, 4.0 * le**2, 13.0 * le, -3.0 * le**2],
            [54.0, 13.0 * le, 156.0, -22.0 * le],
            [-13.0 * le, -3.0 * le**2, -22.0 * le, 4.0 * le**2],
        ]
    )


def constrained_dofs(config: BeamConfig) -> np.ndarray:
    """Full DOF indices eliminated by the boundary condition."""
    last_node = config.n_nodes - 1
    if config.boundary_condition is BoundaryCondition.SIMPLY_SUPPORTED:
        return np.array([0, 2 * last_node])
    if config.boundary_condition is BoundaryCondition.CANTILEVER:
        return np.array([0, 1])
    raise InvalidInputError(f"unknown boundary condition {config.boundary_condition!r}")


def build_dof_map(config: BeamConfig) -> DofMap:
    n_full = 2 * config.n_nodes
    fixed = constrained_dofs(config)
    free = np.setdiff1d(np.arange(n_full), fixed)
    full_to_free = np.full(n_full, -1, dtype=int)
    full_to_free[free] = np.arange(len(free))
    elem_dofs = np.array(
        [[2 * k, 2 * k + 1, 2 * k + 2, 2 * k + 3] for k in range(config.n_elements)]
    )
    return DofMap(
        n_nodes=config.n_nodes,
        free_dofs=free,
        full_to_free=full_to_free,
        element_dofs_full=elem_dofs,
        node_x_mm=config.node_x_mm,
    )


def assemble(config: BeamConfig, params: DamageParams) -> Assembly:
    """Assemble free-DOF global matrices and per-element stiffness blocks.

    Element stiffness scales linearly in that element's modulus; the mass
    matrix does not depend on the moduli at all.
    """
    if len(params) != config.n_elements:
        raise InvalidInputError(
            f"params has {len(params)} entries, config wants {config.n_elements}"
        )
    dof_map = build_dof_map(config)
    n_full = 2 * config.n_nodes
    le = config.element_length

    K_full = np.zeros((n_full, n_full))
    M_full = np.zeros((n_full, n_full))
    m_e = element_mass_matrix(config.density, config.area, le)
    element_blocks = []
    for k in range(config.n_elements):
        k_e = element_stiffness_matrix(params.youngs_moduli[k], config.second_moment, le)
        dofs = dof_map.element_dofs_full[k]
        K_full[np.ix_(dofs, dofs)] += k_e
        M_full[np.ix_(dofs, dofs)] += m_e
        element_blocks.append((dofs, k_e))

    free = dof_map.free_dofs
    K = K_full[np.ix_(free, free)]
    M = M_full[np.ix_(free, free)]
    n_free = len(free)
    element_stiffness = []
    for dofs, k_e in element_blocks:
        K_i = np.zeros((n_free, n_free))
        fi = dof_map.full_to_free[dofs]
        keep = fi >= 0
        K_i[np.ix_(fi[keep], fi[keep])] = k_e[np.ix_(keep, keep)]
        K_i.flags.writeable = False
        element_stiffness.append(K_i)

    K.flags.writeable = False
    M.flags.writeable = False
    return Assembly(
        stiffness=K, mass=M, element_stiffness=tuple(element_stiffness), dof_map=dof_map
    )


def solve_modes(assembly: Assembly, n_modes: int | None = None) -> ModalSolution:
    """Solve the generalized symmetric eigenproblem and normalize the modes.

    n_modes=None retains every free-DOF mode (needed for exact eigenvector
    sensitivities); otherwise the first n_modes pairs are kept.
    """
    K, M = assembly.stiffness, assembly.mass
    n_free = K.shape[0]
    if n_modes is None:
        n_modes = n_free
    if not 1 <= n_modes <= n_free:
        raise InvalidInputError(f"n_modes must be in [1, {n_free}], got {n_modes}")
    try:
        # eigh reduces via Cholesky of M and returns M-orthonormal vectors.
        lam, phi = scipy.linalg.eigh(K, M)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"generalized eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(lam)) or lam[0] <= 0:
        raise NumericError(f"non-positive or non-finite eigenvalue: min={lam[0]:.6e}")

    lam = lam[:n_modes]
    phi = phi[:, :n_modes].copy()
    # Tighten mass normalization beyond solver roundoff.
    norms = np.sqrt(np.einsum("ij,ij->j", phi, M @ phi))
    phi /= norms
    # Deterministic sign: largest-magnitude translational entry positive.
    trans = assembly.dof_map.translation_mask
    pick = np.argmax(np.abs(phi[trans, :]), axis=0)
    signs = np.sign(phi[trans, :][pick, np.arange(n_modes)])
    signs[signs == 0] = 1.0
    phi *= signs

    lam.flags.writeable = False
    phi.flags.writeable = False
    freqs = np.sqrt(lam)
    freqs.flags.writeable = False
    return ModalSolution(
        eigenvalues=lam,
        frequencies=freqs,
        mode_shapes=phi,
        global_stiffness=K,
        global_mass=M,
        element_stiffness=assembly.element_stiffness,
        dof_map=assembly.dof_map,
    )


def analyze(config: BeamConfig, params: DamageParams, n_modes: int | None = None) -> ModalSolution:
    """Assemble and solve in one step."""
    return solve_modes(assemble(config, params), n_modes)


def dK_dtheta(solution: ModalSolution, params: DamageParams, k: int) -> np.ndarray:
    """Derivative of the global stiffness w.r.t. element k's modulus.

    Stiffness is degree-1 homogeneous in each modulus, so this is simply
    K_k / theta_k in the free-DOF basis.
    """
    if not 0 <= k < len(solution.element_stiffness):
        raise InvalidInputError(f"element index {k} out of range")
    return solution.element_stiffness[k] / params.youngs_moduli[k]


_DEGENERACY_RTOL = 1e-8


def check_simple_spectrum(eigenvalues: np.ndarray, upto: int) -> None:
    """Raise if any adjacent pair of the first `upto` eigenvalues coincides."""
    lam = eigenvalues[:upto]
    for i in range(len(lam) - 1):
        if lam[i + 1] - lam[i] <= _DEGENERACY_RTOL * max(abs(lam[i]), abs(lam[i + 1])):
            raise DegenerateSpectrumError(i, i + 1, lam[i], lam[i + 1])


def eigen_derivatives(
    solution: ModalSolution,
    dK: np.ndarray,
    n_modes: int | None = None,
    retained: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpair sensitivities to one stiffness parameter, for simple spectra.

    For each mode j < n_modes:
        dlam_j  = phi_j^T dK phi_j
        dphi_j  = sum_{h != j, h < retained} [phi_h^T dK phi_j / (lam_j - lam_h)] phi_h

    `retained` truncates the modal superposition; passing the full mode count
    (the default when the solution holds all free-DOF modes) makes dphi exact
    for the discrete model.

    Returns (dlam of shape (n_modes,), dphi of shape (n_free, n_modes)).
    """
    total = solution.n_modes
    if n_modes is None:
        n_modes = total
    if retained is None:
        retained = total
    if n_modes > total or retained > total:
        raise InvalidInputError(
            f"solution retains {total} modes; asked for n_modes={n_modes}, retained={retained}"
        )
    check_simple_spectrum(solution.eigenvalues, max(n_modes, retained))

    lam = solution.eigenvalues
    phi = solution.mode_shapes
    # B[h, j] = phi_h^T dK phi_j for h < retained, j < n_modes
    B = phi[:, :retained].T @ dK @ phi[:, :n_modes]
    dlam = np.array([B[j, j] if j < retained else phi[:, j] @ dK @ phi[:, j]
                     for j in range(n_modes)])

    gaps = lam[:n_modes][None, :] - lam[:retained][:, None]  # lam_j - lam_h
    coeff = np.zeros_like(B)
    nonself = np.ones_like(B, dtype=bool)
    diag = np.arange(min(retained, n_modes))
    nonself[diag, diag] = False
    coeff[nonself] = B[nonself] / gaps[nonself]
    dphi = phi[:, :retained] @ coeff
    return dlam, dphi


def curvature_matrix(n_points: int, spacing: float) -> np.ndarray:
    """Second-derivative finite-difference operator on a uniform grid.

    Interior rows are centered [1, -2, 1]/h^2; the first and last rows are
    the one-sided second-order stencils [2, -5, 4, -1]/h^2 and its mirror.
    Exact for quadratics on all rows.
    """
    if n_points < 4:
        raise InvalidInputError(f"curvature matrix needs at least 4 points, got {n_points}")
    if spacing <= 0:
        raise InvalidInputError("spacing must be positive")
    C = np.zeros((n_points, n_points))
    for i in range(1, n_points - 1):
        C[i, i - 1 : i + 2] = (1.0, -2.0, 1.0)
    C[0, :4] = (2.0, -5.0, 4.0, -1.0)
    C[-1, -4:] = (-1.0, 4.0, -5.0, 2.0)
    return C / spacing**2
