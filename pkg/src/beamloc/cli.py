"""Command-line surface: synthesize measurements, fuse evidence, localize.

Conventions at this boundary: mm and GPa in every file and plot, 1-based
element and node indices, floats at 17 significant digits so CSV output
round-trips bit-exactly. Exit codes: 0 success, 2 input/schema error,
3 strategy failure, 4 numeric error.
"""

from __future__ import annotations

import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import plots
from .beam import analyze
from .errors import InvalidInputError, NumericError
from .features import compute_features
from .fusion import build_bpa, concentration, filter_candidates, fuse_features, normalize_indices
from .measurements import make_damaged_params, synthesize_measurement
from .optimizers import Termination, healthy_calibration
from .scenario import Scenario, load_scenario
from .strategies import (
    StrategyStatus,
    hierarchical_localize,
    hybrid_localize,
    plain_localize,
)

log = logging.getLogger("beamloc")

_GPA = 1e9
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STRATEGY = 3
EXIT_NUMERIC = 4


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _measurements(scenario: Scenario):
    seed_h, seed_d = scenario.measurement_seeds()
    params = make_damaged_params(scenario.beam, scenario.damage)
    healthy = synthesize_measurement(
        scenario.beam, scenario.beam.healthy_params(), scenario.n_modes,
        scenario.damage.noise_level, seed_h,
    )
    damaged = synthesize_measurement(
        scenario.beam, params, scenario.n_modes, scenario.damage.noise_level, seed_d,
    )
    return healthy, damaged, params


def _write_measurement(path: Path, measured) -> None:
    rows = []
    for j in range(measured.n_modes):
        for n, x_mm in enumerate(measured.grid):
            rows.append(
                (j + 1, n + 1, _fmt(x_mm), _fmt(measured.mode_shapes[j, n]),
                 _fmt(measured.curvatures[j, n]))
            )
    _write_csv(path, ("mode", "node", "x_mm", "shape", "curvature"), rows)


def run_synthesize(scenario: Scenario, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    healthy, damaged, _ = _measurements(scenario)
    _write_measurement(out_dir / "measured_healthy.csv", healthy)
    _write_measurement(out_dir / "measured_damaged.csv", damaged)
    rows = []
    for state, meas in (("healthy", healthy), ("damaged", damaged)):
        for j, omega in enumerate(meas.frequencies):
            rows.append((state, j + 1, _fmt(omega)))
    _write_csv(out_dir / "frequencies.csv", ("state", "mode", "omega_rad_s"), rows)
    log.info("wrote measurements to %s", out_dir)


def run_fuse(scenario: Scenario, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    healthy, damaged, _ = _measurements(scenario)
    model = analyze(scenario.beam, scenario.beam.healthy_params())
    feature_map = compute_features(healthy, damaged, model)

    rows = []
    for kind, fv in feature_map.items():
        for i, value in enumerate(fv.values):
            rows.append((kind.value, i + 1, _fmt(value)))
    _write_csv(out_dir / "features.csv", ("feature", "element", "value"), rows)

    hybrid = scenario.hybrid
    bpas = {
        kind: build_bpa(feature_map[kind], hybrid.ignorance_weights, hybrid.feature_sensitivity)
        for kind in hybrid.features
    }
    rows = []
    for kind, bpa in bpas.items():
        for i in range(len(bpa.singleton_masses)):
            rows.append(
                (kind.value, i + 1, _fmt(bpa.singleton_masses[i]),
                 _fmt(bpa.ignorance_mass_per_element[i]), _fmt(bpa.belief_factors[i]))
            )
    _write_csv(out_dir / "bpas.csv", ("feature", "element", "singleton_mass", "alpha", "beta"), rows)

    fused = fuse_features(bpas.values())
    _write_csv(
        out_dir / "fused.csv",
        ("element", "belief", "plausibility"),
        [(i + 1, _fmt(b), _fmt(p)) for i, (b, p) in
         enumerate(zip(fused.beliefs, fused.plausibilities))],
    )
    d_norm, _ = normalize_indices(fused.beliefs)
    _, conc = concentration(d_norm)
    argmax = int(np.argmax(fused.beliefs))
    summary = {
        "theta_mass": fused.theta_mass,
        "conflict": fused.conflict,
        "concentration": conc,
        "argmax_element": argmax + 1,
        "max_belief": float(fused.beliefs[argmax]),
    }
    _write_csv(out_dir / "fusion_summary.csv", ("metric", "value"),
               [(k, _fmt(v)) for k, v in summary.items()])

    # Plot from the file just written so re-plotting from disk is identical.
    header, rows = _read_csv(out_dir / "fused.csv")
    elements = [int(r[0]) for r in rows]
    beliefs = [float(r[1]) for r in rows]
    plots.plot_beliefs(elements, beliefs, out_dir / "fused_beliefs.svg", theta_mass=fused.theta_mass)

    click.echo(f"argmax element: {summary['argmax_element']} (belief {summary['max_belief']:.4f})")
    click.echo(
        f"frame mass {summary['theta_mass']:.4f}, conflict {summary['conflict']:.4f}, "
        f"concentration {conc:.4f}" + ("  [low concentration]" if conc < 0.3 else "")
    )
    return summary


def _write_trace(out_dir: Path, trace) -> None:
    rows = []
    for r in trace.records:
        for i, theta in enumerate(r.theta):
            rows.append((r.iteration, r.stage, i + 1, _fmt(theta / _GPA)))
    _write_csv(out_dir / "theta_trace.csv", ("iteration", "stage", "element", "youngs_modulus_gpa"), rows)
    _write_csv(
        out_dir / "objective_trace.csv",
        ("iteration", "stage", "objective", "grad_norm", "step_norm", "n_evals"),
        [(r.iteration, r.stage, _fmt(r.value), _fmt(r.grad_norm), _fmt(r.step_norm), r.n_evals)
         for r in trace.records],
    )
    if trace.events:
        _write_csv(
            out_dir / "stage_events.csv",
            ("iteration", "stage", "objective_before", "objective_after"),
            [(e.iteration, e.label, _fmt(e.value_before), _fmt(e.value_after)) for e in trace.events],
        )


def run_localize(scenario: Scenario, out_dir: Path, strategy: str | None = None) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    strategy = strategy or scenario.strategy
    healthy, damaged, true_params = _measurements(scenario)

    status_code = EXIT_OK
    evidence = None
    candidates = None
    if strategy == "plain":
        params, trace = plain_localize(scenario.beam, damaged, scenario.objective, scenario.optimizer)
    elif strategy == "hybrid":
        result = hybrid_localize(
            scenario.beam, healthy, damaged, scenario.hybrid, scenario.objective, scenario.optimizer
        )
        params, trace = result.params, result.trace
        evidence, candidates = result.evidence, result.candidates
    elif strategy == "hierarchical":
        h = scenario.hierarchical
        result = hierarchical_localize(
            scenario.beam, damaged, scenario.objective, scenario.optimizer,
            initial_groups=h.initial_groups, group_size=h.group_size,
            stage_tol_fraction=h.stage_tol_fraction,
        )
        params, trace = result.params, result.trace
        if result.status is StrategyStatus.FAILED:
            status_code = EXIT_STRATEGY
    else:
        raise InvalidInputError(f"unknown strategy {strategy!r}")
    if trace.termination is Termination.ERROR:
        status_code = EXIT_NUMERIC

    _write_trace(out_dir, trace)
    healthy_gpa = scenario.beam.healthy_youngs_modulus / _GPA
    _write_csv(
        out_dir / "profile.csv",
        ("element", "youngs_modulus_gpa", "healthy_gpa", "true_gpa"),
        [(i + 1, _fmt(params.youngs_moduli[i] / _GPA), _fmt(healthy_gpa),
          _fmt(true_params.youngs_moduli[i] / _GPA)) for i in range(len(params))],
    )
    if evidence is not None:
        _write_csv(
            out_dir / "candidates.csv",
            ("element", "belief", "candidate"),
            [(i + 1, _fmt(evidence.beliefs[i]), int(i in candidates))
             for i in range(len(evidence.beliefs))],
        )

    # Re-read the CSVs so the plots are functions of the persisted data.
    _, rows = _read_csv(out_dir / "objective_trace.csv")
    iterations = [int(r[0]) for r in rows]
    values = [float(r[2]) for r in rows]
    stages = [(int(r[0]), r[1]) for r in rows if r[1]]
    plots.plot_objective(iterations, values, out_dir / "objective_convergence.svg", stages=stages)

    _, rows = _read_csv(out_dir / "profile.csv")
    elements = [int(r[0]) for r in rows]
    plots.plot_profile(
        elements,
        [float(r[1]) for r in rows],
        out_dir / "damage_profile.svg",
        healthy_gpa=float(rows[0][2]),
        true_gpa=[float(r[3]) for r in rows],
    )

    final = trace.final
    click.echo(
        f"strategy={strategy} termination={trace.termination.value} "
        f"J={final.value:.6e} iterations={len(trace.records) - 1} exit={status_code}"
    )
    return status_code


def _load(scenario_path: str, seed: int | None) -> Scenario:
    return load_scenario(scenario_path, seed_override=seed)


def _localize_job(args) -> int:
    scenario_path, out_dir, strategy, seed = args
    scenario = _load(scenario_path, seed)
    sub = Path(out_dir) / scenario.damage.name
    return run_localize(scenario, sub, strategy)


@click.group()
def main():
    """Beam damage localization: synthetic modal tests, evidence fusion, model updating."""
    logging.basicConfig(level=os.environ.get("BEAMLOC_LOG", "WARNING").upper())


def _handle(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except InvalidInputError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except NumericError as exc:
        click.echo(f"numeric error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


_scenario_opt = click.option("--scenario", "scenario_path", required=True,
                             type=click.Path(exists=True, dir_okay=False))
_out_opt = click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
_seed_opt = click.option("--seed", type=int, default=None, help="Override the scenario seed.")


@main.command()
@_scenario_opt
@_out_opt
@_seed_opt
def synthesize(scenario_path, out_dir, seed):
    """Write synthetic healthy/damaged modal measurements as CSV."""
    scenario = _handle(_load, scenario_path, seed)
    _handle(run_synthesize, scenario, Path(out_dir))


@main.command()
@_scenario_opt
@_out_opt
@_seed_opt
def fuse(scenario_path, out_dir, seed):
    """Compute damage features, per-feature BPAs, and fused beliefs."""
    scenario = _handle(_load, scenario_path, seed)
    _handle(run_fuse, scenario, Path(out_dir))


@main.command()
@click.option("--scenario", "scenario_paths", required=True, multiple=True,
              type=click.Path(exists=True, dir_okay=False))
@_out_opt
@_seed_opt
@click.option("--strategy", type=click.Choice(["plain", "hierarchical", "hybrid"]), default=None,
              help="Override the scenario's strategy.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel workers for multiple scenario files.")
def localize(scenario_paths, out_dir, seed, strategy, jobs):
    """Run a localization strategy; write traces, profile, and plots."""
    if len(scenario_paths) == 1:
        scenario = _handle(_load, scenario_paths[0], seed)
        code = _handle(run_localize, scenario, Path(out_dir), strategy)
        sys.exit(code)
    args = [(p, out_dir, strategy, seed) for p in scenario_paths]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            codes = list(pool.map(_localize_job, args))
    else:
        codes = [_handle(_localize_job, a) for a in args]
    sys.exit(max(codes))


@main.command()
@_scenario_opt
@_out_opt
def calibrate(scenario_path, out_dir):
    """Recover the healthy modulus field from the undamaged measurement."""
    scenario = _handle(_load, scenario_path, None)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def run():
        seed_h, _ = scenario.measurement_seeds()
        healthy = synthesize_measurement(
            scenario.beam, scenario.beam.healthy_params(), scenario.n_modes,
            scenario.damage.noise_level, seed_h,
        )
        params, trace = healthy_calibration(
            scenario.beam, healthy, scenario.objective, scenario.optimizer
        )
        _write_trace(out, trace)
        _write_csv(
            out / "profile.csv",
            ("element", "youngs_modulus_gpa", "healthy_gpa", "true_gpa"),
            [(i + 1, _fmt(v / _GPA), _fmt(scenario.beam.healthy_youngs_modulus / _GPA),
              _fmt(scenario.beam.healthy_youngs_modulus / _GPA))
             for i, v in enumerate(params.youngs_moduli)],
        )
        click.echo(f"termination={trace.termination.value} iterations={len(trace.records) - 1}")

    _handle(run)


if __name__ == "__main__":
    main()
