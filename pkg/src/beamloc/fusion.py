"""Evidence fusion over "element i is damaged" hypotheses.

Focal elements are restricted to singletons plus the whole frame, which
keeps Dempster's rule closed-form. Per-feature ignorance is synthesized
dynamically from four cues: damage dispersion (entropy), relative weakness,
rank, and a logistic confidence in the feature's magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InvalidInputError, NumericError, TotalConflictError
from .features import FeatureVector

EPSILON = 1e-10
ALPHA_MIN = 0.1
_MASS_TOL = 1e-12


@dataclass(frozen=True)
class IgnoranceWeights:
    """Convex weights of the four ignorance components (must sum to 1)."""

    w_d: float = 0.25
    w_r: float = 0.25
    w_k: float = 0.25
    w_c: float = 0.25

    def __post_init__(self):
        weights = (self.w_d, self.w_r, self.w_k, self.w_c)
        if not all(0 < w < 1 for w in weights):
            raise InvalidInputError(f"ignorance weights must lie in (0,1): {weights}")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise InvalidInputError(f"ignorance weights must sum to 1: {weights}")

    def as_array(self) -> np.ndarray:
        return np.array([self.w_d, self.w_r, self.w_k, self.w_c])


@dataclass(frozen=True)
class IgnoranceComponents:
    """The four per-element uncertainty cues, each in [0, 1]."""

    dispersion: np.ndarray          # d_i, identical across elements
    relative_weakness: np.ndarray   # r'_i
    rank: np.ndarray                # k_i
    confidence_gap: np.ndarray      # c_i

    def stacked(self) -> np.ndarray:
        return np.stack(
            [self.dispersion, self.relative_weakness, self.rank, self.confidence_gap]
        )


@dataclass(frozen=True)
class FeatureBpa:
    """One feature's mass assignment: singletons plus the frame."""

    singleton_masses: np.ndarray
    ignorance_mass_per_element: np.ndarray  # alpha_i
    belief_factors: np.ndarray              # beta_i = 1 - alpha_i
    feature_sensitivity: float              # logistic steepness lambda_f

    def __post_init__(self):
        alpha = np.asarray(self.ignorance_mass_per_element, dtype=float)
        beta = np.asarray(self.belief_factors, dtype=float)
        masses = np.asarray(self.singleton_masses, dtype=float)
        if np.any(alpha < ALPHA_MIN - 1e-12) or np.any(alpha > 1 + 1e-12):
            raise InvalidInputError("alpha outside [alpha_min, 1]")
        if np.max(np.abs(alpha + beta - 1.0)) > 1e-12:
            raise InvalidInputError("belief factors must satisfy beta = 1 - alpha")
        if np.any(masses < 0):
            raise InvalidInputError("singleton masses must be nonnegative")
        if masses.sum() > 1 + _MASS_TOL:
            raise NumericError("singleton masses exceed 1")
        if not self.feature_sensitivity > 0:
            raise InvalidInputError("feature sensitivity must be positive")
        for name, arr in (
            ("singleton_masses", masses),
            ("ignorance_mass_per_element", alpha),
            ("belief_factors", beta),
        ):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def theta_mass(self) -> float:
        return 1.0 - float(self.singleton_masses.sum())


@dataclass(frozen=True)
class FusedEvidence:
    """Result of combining BPAs: masses, conflict, and Bel/Pl intervals."""

    singleton_masses: np.ndarray
    theta_mass: float
    conflict: float

    def __post_init__(self):
        masses = np.asarray(self.singleton_masses, dtype=float).copy()
        masses.flags.writeable = False
        object.__setattr__(self, "singleton_masses", masses)
        total = masses.sum() + self.theta_mass
        if abs(total - 1.0) > _MASS_TOL:
            raise NumericError(f"mass not conserved after combination: sum = {total!r}")
        if not 0.0 <= self.conflict < 1.0:
            raise NumericError(f"conflict outside [0, 1): {self.conflict!r}")

    @property
    def beliefs(self) -> np.ndarray:
        return self.singleton_masses

    @property
    def plausibilities(self) -> np.ndarray:
        return self.singleton_masses + self.theta_mass


def normalize_indices(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Probability-mass and relative-severity normalizations of a feature.

    D_norm sums to (almost) 1, D_rel has maximum (almost) 1; the epsilon in
    the denominators keeps an all-zero feature mapped to all-zero outputs.
    """
    values = np.asarray(values, dtype=float)
    if np.any(values < 0):
        raise InvalidInputError("damage indices must be nonnegative")
    d_norm = values / (values.sum() + EPSILON)
    d_rel = values / (values.max() + EPSILON)
    return d_norm, d_rel


def concentration(d_norm: np.ndarray) -> tuple[float, float]:
    """Normalized Shannon entropy H of the index distribution and conc = 1 - H."""
    n = len(d_norm)
    if n < 2:
        raise InvalidInputError("concentration needs at least 2 elements")
    entropy = -float(d_norm @ np.log(d_norm + EPSILON)) / np.log(n)
    return entropy, 1.0 - entropy


def damage_ranks(values: np.ndarray) -> np.ndarray:
    """Rank 0 = highest damage; ties broken by lower element index first."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    order = np.lexsort((np.arange(n), -values))
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(n)
    return ranks


def ignorance_components(
    values: np.ndarray, ranks: np.ndarray, feature_sensitivity: float
) -> IgnoranceComponents:
    """Evaluate the four uncertainty cues on a raw feature vector.

    The logistic confidence uses the values exactly as given, so it is the
    one scale-sensitive component; callers that want scale-free behavior
    rescale to max 1 first (see build_bpa).
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    d_norm, d_rel = normalize_indices(values)
    _, conc = concentration(d_norm)
    dispersion = np.full(n, 1.0 - conc)
    relative_weakness = 1.0 - d_rel
    rank = np.asarray(ranks, dtype=float) / (n - 1)
    sigma = 1.0 / (1.0 + np.exp(-feature_sensitivity * values))
    return IgnoranceComponents(
        dispersion=dispersion,
        relative_weakness=relative_weakness,
        rank=rank,
        confidence_gap=1.0 - sigma,
    )


def synthesize_alpha(
    components: IgnoranceComponents, weights: IgnoranceWeights
) -> np.ndarray:
    """Weighted combination of the cues, floored at the 10% ignorance minimum."""
    alpha = weights.as_array() @ components.stacked()
    return np.clip(alpha, ALPHA_MIN, 1.0)


def build_bpa(
    feature: FeatureVector,
    weights: IgnoranceWeights | None = None,
    feature_sensitivity: float = 50.0,
) -> FeatureBpa:
    """Map a feature vector to a basic probability assignment.

    Singleton masses are beta_i * D_i^norm with beta_i = 1 - alpha_i; the
    remainder goes to the frame. The logistic cue sees the feature rescaled
    to max 1, which makes the whole BPA invariant to positive rescaling.
    """
    if weights is None:
        weights = IgnoranceWeights()
    d_norm, d_rel = normalize_indices(feature.values)
    components = ignorance_components(d_rel, damage_ranks(feature.values), feature_sensitivity)
    alpha = synthesize_alpha(components, weights)
    beta = 1.0 - alpha
    masses = beta * d_norm
    return FeatureBpa(
        singleton_masses=masses,
        ignorance_mass_per_element=alpha,
        belief_factors=beta,
        feature_sensitivity=feature_sensitivity,
    )


def dempster_combine(a, b) -> FusedEvidence:
    """Dempster's orthogonal sum for singleton+frame BPAs, closed form.

    Accepts any pair of objects exposing `singleton_masses` and `theta_mass`
    (FeatureBpa or FusedEvidence). Conflict collects products of distinct
    singletons; surviving mass is renormalized by 1 - K.
    """
    ma = np.asarray(a.singleton_masses, dtype=float)
    mb = np.asarray(b.singleton_masses, dtype=float)
    if ma.shape != mb.shape:
        raise InvalidInputError(f"frame mismatch: {ma.shape} vs {mb.shape}")
    ta, tb = float(a.theta_mass), float(b.theta_mass)

    conflict = float(ma.sum() * mb.sum() - ma @ mb)
    conflict = min(max(conflict, 0.0), 1.0)
    if conflict >= 1.0 - _MASS_TOL:
        raise TotalConflictError(f"total conflict between BPAs: K = {conflict!r}")
    scale = 1.0 / (1.0 - conflict)
    fused = (ma * mb + ma * tb + ta * mb) * scale
    theta = ta * tb * scale
    return FusedEvidence(singleton_masses=fused, theta_mass=theta, conflict=conflict)


def fuse_features(bpas) -> FusedEvidence:
    """Left fold of Dempster's rule over two or more BPAs.

    The reported conflict is taken from the final combination step (pairwise
    conflicts earlier in the fold are absorbed by renormalization).
    """
    bpas = list(bpas)
    if len(bpas) < 2:
        raise InvalidInputError("fusion needs at least 2 BPAs")
    return reduce(dempster_combine, bpas)


def filter_candidates(fused: FusedEvidence, tau_fraction: float) -> set[int]:
    """Elements whose belief reaches tau_fraction of the peak belief.

    Never empty: the argmax element always qualifies.
    """
    if not 0.0 < tau_fraction <= 1.0:
        raise InvalidInputError(f"tau_fraction must be in (0, 1], got {tau_fraction}")
    beliefs = fused.beliefs
    threshold = tau_fraction * beliefs.max()
    return set(np.flatnonzero(beliefs >= threshold).tolist())
