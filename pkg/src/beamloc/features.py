"""Damage-sensitive feature vectors from undamaged-vs-damaged modal data.

Four per-element indices: weighted frequency shifts, curvature-residual RMS,
modal strain-energy change, and modal-flexibility change. All are computed
against a healthy reference model; the damaged stiffness is never used (a
monitoring system would not know it).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .beam import ModalSolution
from .errors import InvalidInputError
from .measurements import MeasuredModes, expand_shapes

_MM = 1e-3


class FeatureKind(Enum):
    FREQUENCY = "frequency"
    CURVATURE = "curvature"
    STRAIN_ENERGY = "strain_energy"
    FLEXIBILITY = "flexibility"


@dataclass(frozen=True)
class FeatureVector:
    kind: FeatureKind
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInputError(f"{self.kind.value} feature must be finite and nonnegative")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def _check_compatible(und: MeasuredModes, dam: MeasuredModes) -> None:
    if und.n_modes != dam.n_modes:
        raise InvalidInputError(
            f"mode-count mismatch: undamaged {und.n_modes}, damaged {dam.n_modes}"
        )
    if und.mode_shapes.shape != dam.mode_shapes.shape or not np.array_equal(und.grid, dam.grid):
        raise InvalidInputError("measurement grids differ between states")


def frequency_index(
    und: MeasuredModes, dam: MeasuredModes, model: ModalSolution
) -> FeatureVector:
    """Per-element weighted sum of absolute frequency shifts.

    The weight of element i in mode j is that element's share of the mode's
    strain energy, |phi_j^T K_i phi_j| normalized over elements, evaluated
    with the damaged-state shapes on the healthy element matrices.
    """
    _check_compatible(und, dam)
    dam_full = expand_shapes(dam, model)
    n_elements = len(model.element_stiffness)
    m = dam.n_modes

    energy = np.empty((n_elements, m))
    for i, K_i in enumerate(model.element_stiffness):
        energy[i] = np.abs(np.einsum("dj,dj->j", dam_full, K_i @ dam_full))
    weights = energy / energy.sum(axis=0)
    shifts = np.abs(dam.frequencies - und.frequencies)
    return FeatureVector(FeatureKind.FREQUENCY, weights @ shifts)


def curvature_index(und: MeasuredModes, dam: MeasuredModes) -> FeatureVector:
    """Element average of the nodal RMS curvature residual."""
    _check_compatible(und, dam)
    residual = und.curvatures - dam.curvatures
    rms = np.sqrt(np.mean(residual**2, axis=0))
    return FeatureVector(FeatureKind.CURVATURE, 0.5 * (rms[:-1] + rms[1:]))


def msecr_index(
    und_shapes: np.ndarray, dam_shapes: np.ndarray, element_stiffness
) -> FeatureVector:
    """Absolute change of per-element modal strain energy.

    Both shape matrices must be full free-DOF columns (one per mode) in the
    same basis as the element stiffness matrices.
    """
    und_shapes = np.asarray(und_shapes, dtype=float)
    dam_shapes = np.asarray(dam_shapes, dtype=float)
    n_free = element_stiffness[0].shape[0]
    if und_shapes.shape != dam_shapes.shape or und_shapes.shape[0] != n_free:
        raise InvalidInputError(
            f"shape matrices must be ({n_free}, m); got {und_shapes.shape} and {dam_shapes.shape}"
        )
    values = np.empty(len(element_stiffness))
    for i, K_i in enumerate(element_stiffness):
        se_und = np.einsum("dj,dj->", und_shapes, K_i @ und_shapes)
        se_dam = np.einsum("dj,dj->", dam_shapes, K_i @ dam_shapes)
        values[i] = abs(se_und - se_dam)
    return FeatureVector(FeatureKind.STRAIN_ENERGY, values)


def element_strain_energies(shapes: np.ndarray, element_stiffness) -> np.ndarray:
    """Sum over modes of phi^T K_i phi, per element."""
    return np.array(
        [np.einsum("dj,dj->", shapes, K_i @ shapes) for K_i in element_stiffness]
    )


def _curvature_extraction(le: float) -> np.ndarray:
    """1x4 map from an element's Hermite DOFs to its average curvature.

    The second derivative of the cubic is linear, so its midpoint value is
    exactly the element mean; extracting it keeps a measured slope kink
    attributed to the element that contains it.
    """
    return np.array([[0.0, -1.0 / le, 0.0, 1.0 / le]])


def modal_flexibility(frequencies: np.ndarray, shapes_full: np.ndarray) -> np.ndarray:
    """Frequency-weighted modal superposition sum_j phi_j phi_j^T / omega_j^2."""
    scaled = shapes_full / frequencies[None, :]
    return scaled @ scaled.T


def flexibility_index(
    und: MeasuredModes, dam: MeasuredModes, model: ModalSolution
) -> FeatureVector:
    """Frobenius norm of each element's curvature-compliance change.

    The global modal flexibility is disassembled to each element's 4 DOFs and
    mapped to end curvatures, so the index responds directly to local changes
    in bending compliance.
    """
    _check_compatible(und, dam)
    und_full = expand_shapes(und, model)
    dam_full = expand_shapes(dam, model)
    F_und = modal_flexibility(und.frequencies, und_full)
    F_dam = modal_flexibility(dam.frequencies, dam_full)

    dof_map = model.dof_map
    le = float(np.diff(dof_map.node_x_mm)[0]) * _MM
    S = _curvature_extraction(le)
    values = np.empty(dof_map.n_elements)
    for e in range(dof_map.n_elements):
        fi = dof_map.element_free_dofs(e)
        sub_und = np.zeros((4, 4))
        sub_dam = np.zeros((4, 4))
        keep = fi >= 0
        sub_und[np.ix_(keep, keep)] = F_und[np.ix_(fi[keep], fi[keep])]
        sub_dam[np.ix_(keep, keep)] = F_dam[np.ix_(fi[keep], fi[keep])]
        values[e] = np.linalg.norm(S @ (sub_dam - sub_und) @ S.T, ord="fro")
    return FeatureVector(FeatureKind.FLEXIBILITY, values)


def compute_features(
    und: MeasuredModes, dam: MeasuredModes, model: ModalSolution
) -> dict[FeatureKind, FeatureVector]:
    """All four feature vectors for one undamaged/damaged measurement pair."""
    und_full = expand_shapes(und, model)
    dam_full = expand_shapes(dam, model)
    return {
        FeatureKind.FREQUENCY: frequency_index(und, dam, model),
        FeatureKind.CURVATURE: curvature_index(und, dam),
        FeatureKind.STRAIN_ENERGY: msecr_index(und_full, dam_full, model.element_stiffness),
        FeatureKind.FLEXIBILITY: flexibility_index(und, dam, model),
    }
