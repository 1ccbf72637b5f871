"""Synthetic modal measurements: damage scenarios, sampling, Gaussian noise.

Measurements expose translations at the FE nodes only; rotational DOFs stay
model-internal. The noise model perturbs each frequency multiplicatively and
each shape sample additively with an amplitude-proportional scale, and
curvatures are always differentiated from the (noisy) shapes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import BeamConfig, DamageParams, ModalSolution, analyze, curvature_matrix
from .errors import InvalidInputError

_MM = 1e-3


@dataclass(frozen=True)
class DamageScenario:
    """Named damage case: (element index, fractional stiffness reduction) pairs.

    Element indices are 0-based here; scenario files use the 1-based paper
    convention and convert on load.
    """

    name: str
    damaged_elements: tuple[tuple[int, float], ...] = ()
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "damaged_elements", tuple((int(i), float(r)) for i, r in self.damaged_elements)
        )
        indices = [i for i, _ in self.damaged_elements]
        if len(set(indices)) != len(indices):
            raise InvalidInputError(f"duplicate damaged element index in {indices}")
        for i, r in self.damaged_elements:
            if not 0.0 <= r < 1.0:
                raise InvalidInputError(f"stiffness reduction {r} outside [0, 1)")
        if self.noise_level < 0:
            raise InvalidInputError("noise_level must be nonnegative")


@dataclass(frozen=True)
class MeasuredModes:
    """Modal test data on a node grid: one row per mode.

    frequencies are rad/s; `grid` is the node coordinate vector in mm.
    """

    frequencies: np.ndarray
    mode_shapes: np.ndarray   # (n_modes, N)
    curvatures: np.ndarray    # (n_modes, N)
    grid: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        shapes = np.asarray(self.mode_shapes, dtype=float)
        curv = np.asarray(self.curvatures, dtype=float)
        grid = np.asarray(self.grid, dtype=float)
        if not np.all(freqs > 0):
            raise InvalidInputError("measured frequencies must be strictly positive")
        if shapes.shape != (len(freqs), len(grid)) or curv.shape != shapes.shape:
            raise InvalidInputError(
                f"inconsistent measurement shapes: freqs {freqs.shape}, "
                f"shapes {shapes.shape}, curvatures {curv.shape}, grid {grid.shape}"
            )
        for arr, name in ((freqs, "frequencies"), (shapes, "mode_shapes"),
                          (curv, "curvatures"), (grid, "grid")):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)


def make_damaged_params(config: BeamConfig, scenario: DamageScenario) -> DamageParams:
    """Healthy modulus everywhere except the scenario's reduced elements."""
    moduli = np.full(config.n_elements, config.healthy_youngs_modulus)
    for index, reduction in scenario.damaged_elements:
        if not 0 <= index < config.n_elements:
            raise InvalidInputError(f"damaged element {index} outside mesh of {config.n_elements}")
        moduli[index] = config.healthy_youngs_modulus * (1.0 - reduction)
    return DamageParams(moduli)


def node_spacing_m(config: BeamConfig) -> float:
    """Grid spacing of the measurement grid (= FE nodes), in meters."""
    return config.element_length


def synthesize_measurement(
    config: BeamConfig,
    params: DamageParams,
    n_modes: int = 5,
    noise_level: float = 0.0,
    seed: int = 0,
) -> MeasuredModes:
    """Simulate a modal test on the given parameter state.

    With eta = noise_level and fixed seed, draws are deterministic:
        omega_j   <- omega_j * (1 + eta * N(0,1))
        shape_ji  <- shape_ji + eta * |shape_ji| * N(0,1)
    so exact zeros (constrained nodes) stay exactly zero. Curvatures are
    computed from the noisy shapes.
    """
    if n_modes < 1:
        raise InvalidInputError("n_modes must be at least 1")
    if noise_level < 0:
        raise InvalidInputError("noise_level must be nonnegative")
    solution = analyze(config, params)
    freqs = solution.frequencies[:n_modes].copy()
    shapes = solution.dof_map.sample_translations(solution.mode_shapes[:, :n_modes]).T

    if noise_level > 0:
        rng = np.random.default_rng(seed)
        freqs *= 1.0 + noise_level * rng.standard_normal(n_modes)
        shapes = shapes + noise_level * np.abs(shapes) * rng.standard_normal(shapes.shape)

    C = curvature_matrix(config.n_nodes, node_spacing_m(config))
    curvatures = shapes @ C.T
    return MeasuredModes(
        frequencies=freqs,
        mode_shapes=shapes,
        curvatures=curvatures,
        grid=config.node_x_mm,
    )


def grid_slopes(shapes: np.ndarray, spacing: float) -> np.ndarray:
    """Second-order first-derivative estimate of each row on a uniform grid.

    Central differences inside, one-sided three-point stencils at the ends.
    """
    shapes = np.atleast_2d(np.asarray(shapes, dtype=float))
    if shapes.shape[1] < 3:
        raise InvalidInputError("slope estimation needs at least 3 grid points")
    slopes = np.empty_like(shapes)
    slopes[:, 1:-1] = (shapes[:, 2:] - shapes[:, :-2]) / (2.0 * spacing)
    slopes[:, 0] = (-3.0 * shapes[:, 0] + 4.0 * shapes[:, 1] - shapes[:, 2]) / (2.0 * spacing)
    slopes[:, -1] = (3.0 * shapes[:, -1] - 4.0 * shapes[:, -2] + shapes[:, -3]) / (2.0 * spacing)
    return slopes


def expand_shapes(measured: MeasuredModes, model: ModalSolution) -> np.ndarray:
    """Lift measured translational shapes to full free-DOF vectors.

    Rotational DOFs are estimated by differentiating the measured shape
    samples along the grid, so the expansion stays consistent with the
    measured state (rotations borrowed from a healthy model would be wrong
    exactly where damage kinks the mode). The model argument supplies only
    the DOF layout.

    Returns an (n_free, n_modes) matrix, one column per measured mode.
    """
    m = measured.n_modes
    dof_map = model.dof_map
    if len(measured.grid) != dof_map.n_nodes:
        raise InvalidInputError("measurement grid does not match the model's node grid")
    spacing = float(np.diff(measured.grid)[0]) * _MM
    slopes = grid_slopes(measured.mode_shapes, spacing)

    trans_idx = dof_map.translation_free_index
    rot_idx = dof_map.rotation_free_index
    full = np.zeros((dof_map.n_free, m))
    keep_t = trans_idx >= 0
    keep_r = rot_idx >= 0
    full[trans_idx[keep_t]] = measured.mode_shapes[:, keep_t].T
    full[rot_idx[keep_r]] = slopes[:, keep_r].T
    return full
