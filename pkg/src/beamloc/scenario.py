"""Scenario files: JSON schema, validation, and construction of run objects.

Scenario files use engineering units at the boundary (mm, GPa, 1-based
element indices); everything becomes SI and 0-based on load. Unknown keys
are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .beam import BeamConfig, BoundaryCondition
from .errors import InvalidInputError
from .features import FeatureKind
from .fusion import IgnoranceWeights
from .measurements import DamageScenario
from .objective import ObjectiveWeights, PenaltyForm
from .optimizers import Method, OptimizerConfig, TrustRegionSettings
from .strategies import HybridConfig

_GPA = 1e9


@dataclass(frozen=True)
class HierarchicalSettings:
    initial_groups: int = 5
    group_size: int = 4
    stage_tol_fraction: float = 0.9


@dataclass(frozen=True)
class Scenario:
    """Everything one run needs, decoded from a scenario file."""

    beam: BeamConfig
    damage: DamageScenario
    n_modes: int = 5
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    objective: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    strategy: str = "hybrid"
    hierarchical: HierarchicalSettings = field(default_factory=HierarchicalSettings)

    def measurement_seeds(self) -> tuple[int, int]:
        """Independent, reproducible seeds for the healthy/damaged streams."""
        healthy, damaged = np.random.SeedSequence(self.damage.seed).spawn(2)
        return int(healthy.generate_state(1)[0]), int(damaged.generate_state(1)[0])


def schema() -> dict:
    text = resources.files("beamloc").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


_FEATURE_NAMES = {kind.value: kind for kind in FeatureKind}
_BC_NAMES = {bc.value: bc for bc in BoundaryCondition}
_METHOD_NAMES = {m.value: m for m in Method}
_PENALTY_NAMES = {p.value: p for p in PenaltyForm}


def load_scenario(path, seed_override: int | None = None) -> Scenario:
    """Read, schema-validate, and decode a scenario JSON file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{path}: not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        raise InvalidInputError(f"{path}: schema violation at {list(exc.absolute_path)}: {exc.message}")
    return decode_scenario(doc, seed_override)


def decode_scenario(doc: dict, seed_override: int | None = None) -> Scenario:
    b = doc.get("beam", {})
    beam = BeamConfig(
        length=b.get("length_mm", 1000.0),
        width=b.get("width_mm", 20.0),
        thickness=b.get("thickness_mm", 3.25),
        density=b.get("density_kg_m3", 2700.0),
        healthy_youngs_modulus=b.get("youngs_modulus_gpa", 70.0) * _GPA,
        n_elements=b.get("n_elements", 20),
        boundary_condition=_BC_NAMES[b.get("boundary_condition", "simply_supported")],
    )

    d = doc.get("damage", {})
    elements = tuple(
        (entry["element"] - 1, entry["reduction"]) for entry in d.get("elements", [])
    )
    damage = DamageScenario(
        name=d.get("name", "scenario"),
        damaged_elements=elements,
        noise_level=d.get("noise_level", 0.0),
        seed=seed_override if seed_override is not None else d.get("seed", 0),
    )

    f = doc.get("fusion", {})
    wdict = f.get("weights", {})
    weights = IgnoranceWeights(
        w_d=wdict.get("dispersion", 0.25),
        w_r=wdict.get("relative", 0.25),
        w_k=wdict.get("rank", 0.25),
        w_c=wdict.get("confidence", 0.25),
    )
    hybrid = HybridConfig(
        tau_fraction=f.get("tau", 0.7),
        features=tuple(_FEATURE_NAMES[name] for name in f.get("features", ["strain_energy", "flexibility"])),
        fallback_top_n=f.get("fallback_top_n", 0),
        ignorance_weights=weights,
        feature_sensitivity=f.get("feature_sensitivity", 50.0),
    )

    o = doc.get("objective", {})
    objective = ObjectiveWeights(
        alpha_f=o.get("alpha_frequency", 1.0),
        alpha_g=o.get("alpha_residual", 1.0),
        alpha_c=o.get("alpha_curvature", 1.0),
        gamma=o.get("gamma", 1e-3),
        epsilon_curvature=o.get("epsilon_curvature", 1e-8),
        penalty_form=_PENALTY_NAMES[o.get("penalty_form", "deviation")],
    )

    p = doc.get("optimizer", {})
    tr = p.get("trust_region", {})
    optimizer = OptimizerConfig(
        method=_METHOD_NAMES[p.get("method", "lbfgs")],
        memory=p.get("memory", 10),
        max_iterations=p.get("max_iterations", 200),
        grad_tolerance=p.get("grad_tolerance", 1e-8),
        step_tolerance=p.get("step_tolerance", 1e-12),
        bounds=tuple(p.get("bounds", (0.05, 1.5))),
        wolfe_c1=p.get("wolfe_c1", 1e-4),
        wolfe_c2=p.get("wolfe_c2", 0.9),
        trust_region=TrustRegionSettings(
            initial_radius=tr.get("initial_radius", 0.5),
            max_radius=tr.get("max_radius", 2.0),
            shrink_threshold=tr.get("shrink_threshold", 0.25),
            grow_threshold=tr.get("grow_threshold", 0.75),
            shrink_factor=tr.get("shrink_factor", 0.5),
            grow_factor=tr.get("grow_factor", 2.0),
            accept_ratio=tr.get("accept_ratio", 1e-4),
        ),
    )

    s = doc.get("strategy", {})
    h = s.get("hierarchical", {})
    hierarchical = HierarchicalSettings(
        initial_groups=h.get("initial_groups", 5),
        group_size=h.get("group_size", 4),
        stage_tol_fraction=h.get("stage_tol_fraction", 0.9),
    )
    return Scenario(
        beam=beam,
        damage=damage,
        n_modes=doc.get("modes", 5),
        hybrid=hybrid,
        objective=objective,
        optimizer=optimizer,
        strategy=s.get("name", "hybrid"),
        hierarchical=hierarchical,
    )
