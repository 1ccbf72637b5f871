"""SVG plot emission for the standard result panels.

Output must be byte-deterministic (CI-diffable): the SVG backend is forced,
the hash salt pinned, and the Date metadata suppressed.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "beamloc"

_GPA = 1e9
_SAVE_KW = {"metadata": {"Date": None}, "bbox_inches": "tight"}


def plot_objective(iterations, values, path, stages=None) -> None:
    """Objective convergence on a log y-axis, one marker per iterate."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(iterations, values, marker="o", markersize=3, linewidth=1.2, color="tab:blue")
    if stages:
        seen = set()
        for it, label in stages:
            if label not in seen:
                ax.axvline(it, color="tab:gray", linestyle=":", linewidth=0.8)
                seen.add(label)
    ax.set_xlabel("Evaluation number")
    ax.set_ylabel("Objective value")
    ax.grid(True, which="both", alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_profile(elements, youngs_gpa, path, healthy_gpa=None, true_gpa=None) -> None:
    """Per-element Young's modulus bars with healthy/true overlays."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(elements, youngs_gpa, color="tab:blue", width=0.8, label="identified")
    if true_gpa is not None:
        ax.step(
            [e - 0.5 for e in elements] + [elements[-1] + 0.5],
            list(true_gpa) + [true_gpa[-1]],
            where="post",
            color="tab:red",
            linewidth=1.2,
            label="true",
        )
    if healthy_gpa is not None:
        ax.axhline(healthy_gpa, color="tab:green", linestyle="--", linewidth=1.0, label="healthy")
    ax.set_xlabel("Element")
    ax.set_ylabel("Young's modulus [GPa]")
    ax.set_xticks(list(elements))
    ax.tick_params(axis="x", labelsize=7)
    ax.legend(loc="lower right", fontsize=8)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def plot_beliefs(elements, beliefs, path, theta_mass=None) -> None:
    """Fused singleton beliefs per element."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(elements, beliefs, color="tab:purple", width=0.8)
    title = "Fused damage beliefs"
    if theta_mass is not None:
        title += f"  (frame mass {theta_mass:.3f})"
    ax.set_title(title, fontsize=10)
    ax.set_xlabel("Element")
    ax.set_ylabel("Belief")
    ax.set_xticks(list(elements))
    ax.tick_params(axis="x", labelsize=7)
    ax.grid(True, axis="y", alpha=0.3)
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
