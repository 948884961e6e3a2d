"""Config-driven scenario runner.

Each scenario bundles a parameter set, a controller policy, and a
frequency grid, and produces CSV spectra tables, a stability report, the
controller matrices, and a compact JSON summary.  The built-in scenarios
cover the reference operating point with and without the feedback
controller: transport delays, amplification loss, and transmission loss
are switched on one at a time, always reusing the controller designed at
the lossless, delay-free operating point.

Outputs are deterministic: identical configuration produces byte
identical files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, replace

import numpy as np
import tomli

from . import closedloop, ddestab, lqgsynth, quadnet, spectra
from .quadnet import NetworkParams

__all__ = [
    "Scenario",
    "ScenarioError",
    "design_point",
    "builtin_scenarios",
    "list_scenarios",
    "run_scenario",
    "main",
    "OUTPUT_ENV_VAR",
]

OUTPUT_ENV_VAR = "EPRNET_OUT"

# frequency band edges for the summary reduction statistics (rad/s)
_LOW_BAND = 1.0e4
_MID_BAND = 1.0e5
_WIDE_BAND = 1.0e6


class ScenarioError(Exception):
    """A scenario is misconfigured or failed to run."""


def design_point() -> NetworkParams:
    """The lossless, delay-free operating point used to design controllers.

    Pump strength is matched to the geometric mean of the port rates,
    ``epsilon = sqrt(kappa * kappa1)``.
    """
    kappa = 1.8e7
    kappa1 = 1.8e8
    return NetworkParams(
        kappa=kappa,
        gamma=1.5 * kappa,
        kappa1=kappa1,
        epsilon=math.sqrt(kappa * kappa1),
        chi=0.0,
        alpha=1.0,
        T=0.0,
        Tm=0.0,
        rho=1.0e7,
    )


@dataclass(frozen=True)
class Scenario:
    """A named, reproducible pipeline configuration.

    ``controller`` is one of ``"none"``, ``"synth"`` (design from this
    scenario's own zero-delay model), ``"ideal"`` (reuse the design-point
    controller regardless of this scenario's losses and delays), or a
    path to a previously exported controller file.
    """

    name: str
    params: NetworkParams
    controller: str = "synth"
    grid: tuple[float, float, int] | None = None
    out_dir: str | None = None
    weighting: str = "linear"


def builtin_scenarios() -> dict[str, Scenario]:
    """The built-in scenario table, keyed by name."""
    base = design_point()
    chi_mild = 1.3975e6
    chi_heavy = 5.5902e6
    delays = dict(T=1.0e-6, Tm=2.0e-6)
    table = [
        Scenario("fig1", base, controller="synth"),
        Scenario("fig2", base.replace(**delays), controller="ideal"),
        Scenario("fig3", base.replace(chi=chi_mild), controller="ideal"),
        Scenario("fig5", base.replace(chi=chi_mild, alpha=0.97), controller="ideal"),
        Scenario("fig7", base.replace(chi=chi_mild, alpha=0.95), controller="ideal"),
        Scenario("fig19", base.replace(chi=chi_heavy, alpha=0.95), controller="ideal"),
        Scenario(
            "fig20",
            base.replace(chi=chi_heavy, alpha=0.95, **delays),
            controller="ideal",
        ),
    ]
    return {s.name: s for s in table}


def _parse_grid(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ScenarioError(f"bad grid spec {text!r}, expected lo:hi:n") from exc


def load_config(path) -> dict[str, Scenario]:
    """Parse user scenarios from a TOML config file.

    Each ``[scenario.<name>]`` section may override the design-point
    parameters and set ``controller``, ``grid`` (``"lo:hi:n"``), and
    ``weighting``.  An empty file contributes nothing.
    """
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    scenarios: dict[str, Scenario] = {}
    base = design_point().as_dict()
    base.update(doc.get("params", {}))
    for name, section in doc.get("scenario", {}).items():
        section = dict(section)
        controller = section.pop("controller", "synth")
        grid = section.pop("grid", None)
        weighting = section.pop("weighting", "linear")
        params_map = dict(base)
        params_map.update(section)
        try:
            params = NetworkParams.from_dict(params_map)
        except quadnet.ParameterError as exc:
            raise ScenarioError(f"scenario {name!r}: {exc}") from exc
        scenarios[name] = Scenario(
            name=name,
            params=params,
            controller=str(controller),
            grid=_parse_grid(grid) if grid else None,
            weighting=weighting,
        )
    return scenarios


def list_scenarios(config_path=None) -> list[Scenario]:
    """Built-in scenarios plus any defined in the given config file."""
    table = dict(builtin_scenarios())
    if config_path:
        table.update(load_config(config_path))
    return list(table.values())


def _resolve_controller(scenario: Scenario):
    """Return (controller or None, source string)."""
    policy = scenario.controller
    if policy == "none":
        return None, "none"
    if policy == "synth":
        params = scenario.params
        source = "synthesized"
    elif policy == "ideal":
        params = design_point().replace(rho=scenario.params.rho)
        source = "synthesized-at-design-point"
    else:
        return lqgsynth.load_controller(policy), f"loaded:{policy}"
    plant = quadnet.build_plant(params, with_control_inputs=True)
    meas = quadnet.build_measurement_map(params)
    weights = lqgsynth.build_cost(params, interpretation=scenario.weighting)
    return lqgsynth.synthesize(plant, meas, weights), source


def _grid_for(scenario: Scenario) -> spectra.FrequencyGrid:
    if scenario.grid is not None:
        lo, hi, n = scenario.grid
        return spectra.FrequencyGrid.log(lo, hi, n)
    delayed = scenario.params.T > 0.0 or scenario.params.Tm > 0.0
    return spectra.FrequencyGrid.default(delayed=delayed)


def _band_mean(omegas, values_db, lo, hi) -> float | None:
    mask = (omegas > lo) & (omegas <= hi)
    if not np.any(mask):
        return None
    return float(np.mean(values_db[mask]))


def _reduction_stats(grid, unc, ctl) -> dict:
    diff_db = spectra.to_db(unc.v_sum) - spectra.to_db(ctl.v_sum)
    om = grid.omegas
    return {
        "reduction_low_db": _band_mean(om, diff_db, 0.0, _LOW_BAND),
        "reduction_mid_db": _band_mean(om, diff_db, _LOW_BAND, _MID_BAND),
        "reduction_wide_db": _band_mean(om, diff_db, 0.0, _WIDE_BAND),
    }


def run_scenario(
    scenario: Scenario,
    out_dir=None,
    stability_order: int = 40,
    workers: int = 1,
) -> dict:
    """Run one scenario end to end and write its outputs.

    Writes ``uncontrolled.csv``, ``controlled.csv`` (when a controller is
    in play), ``controller.txt`` (when one was synthesized),
    ``stability.txt``, and ``summary.json`` under ``<out>/<name>/``.
    Partial outputs are removed if any stage fails.
    """
    root = out_dir or scenario.out_dir or os.environ.get(OUTPUT_ENV_VAR) or "."
    target = os.path.join(str(root), scenario.name)
    os.makedirs(target, exist_ok=True)
    written: list[str] = []

    def emit(name: str, writer) -> str:
        path = os.path.join(target, name)
        writer(path)
        written.append(path)
        return path

    try:
        params = scenario.params
        grid = _grid_for(scenario)
        pair = quadnet.build_uncontrolled_subsystems(params)
        unc = spectra.compute_spectra(pair.sys1, pair.sys2, grid, workers=workers)
        emit("uncontrolled.csv", lambda p: spectra.write_csv(unc, p))

        summary: dict = {
            "scenario": scenario.name,
            "params": params.as_dict(),
            "grid_points": len(grid),
            "band_edges_uncontrolled": [list(e) for e in unc.band_edges],
        }

        ctrl, source = _resolve_controller(scenario)
        summary["controller"] = source
        if ctrl is None:
            plant = quadnet.build_plant(params)
            report = ddestab.stability_report(plant.a_terms, order=stability_order)
        else:
            if source.startswith("synthesized"):
                emit(
                    "controller.txt",
                    lambda p: lqgsynth.save_controller(ctrl, p),
                )
            plant = quadnet.build_plant(params, with_control_inputs=True)
            meas = quadnet.build_measurement_map(params)
            loop = closedloop.assemble(plant, meas, ctrl, params)
            ctl = spectra.compute_spectra(
                loop.sys.select_outputs([0]),
                loop.sys.select_outputs([1]),
                grid,
                workers=workers,
            )
            emit("controlled.csv", lambda p: spectra.write_csv(ctl, p))
            summary["band_edges_controlled"] = [list(e) for e in ctl.band_edges]
            summary.update(_reduction_stats(grid, unc, ctl))
            report = ddestab.check_closed_loop(loop, order=stability_order)

        emit("stability.txt", lambda p: _write_text(p, ddestab.format_report(report)))
        summary["stability"] = {
            "verdict": report.verdict,
            "rightmost_real": max(z.real for z in report.rightmost_roots),
            "discretization_order": report.discretization_order,
        }
        emit(
            "summary.json",
            lambda p: _write_text(
                p, json.dumps(summary, indent=2, sort_keys=True) + "\n"
            ),
        )
        return summary
    except Exception:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        try:
            os.rmdir(target)
        except OSError:
            pass
        raise


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _format_listing(scenarios: list[Scenario]) -> str:
    header = (
        f"{'name':<8} {'kappa':>10} {'gamma':>10} {'kappa1':>10} "
        f"{'epsilon':>12} {'chi':>10} {'alpha':>6} {'T':>8} {'Tm':>8} "
        f"{'rho':>8} controller"
    )
    lines = [header]
    for s in scenarios:
        p = s.params
        lines.append(
            f"{s.name:<8} {p.kappa:>10.4g} {p.gamma:>10.4g} {p.kappa1:>10.4g} "
            f"{p.epsilon:>12.6g} {p.chi:>10.4g} {p.alpha:>6.3g} {p.T:>8.3g} "
            f"{p.Tm:>8.3g} {p.rho:>8.3g} {s.controller}"
        )
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eprnet",
        description=(
            "Simulate entanglement spectra of the two-node oscillator "
            "network, with optional measurement feedback."
        ),
    )
    parser.add_argument("--scenario", help="name of the scenario to run")
    parser.add_argument("--list", action="store_true", help="list known scenarios")
    parser.add_argument("--config", help="TOML file with extra scenario blocks")
    parser.add_argument("--out", help="output directory (default: $EPRNET_OUT or .)")
    parser.add_argument("--grid", help="frequency grid as lo:hi:n (rad/s)")
    parser.add_argument(
        "--controller",
        help="controller policy: file path, 'synth', or 'none'",
    )
    parser.add_argument(
        "--stability-order",
        type=int,
        default=40,
        help="initial pseudospectral order for the stability check",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=1,
        help="worker threads for frequency-grid evaluation",
    )
    args = parser.parse_args(argv)

    try:
        scenarios = {s.name: s for s in list_scenarios(args.config)}
        if args.list:
            print(_format_listing(list(scenarios.values())))
            return 0
        if not args.scenario:
            parser.error("--scenario NAME or --list is required")
        if args.scenario not in scenarios:
            raise ScenarioError(
                f"unknown scenario {args.scenario!r}; use --list to see choices"
            )
        scenario = scenarios[args.scenario]
        if args.grid:
            scenario = replace(scenario, grid=_parse_grid(args.grid))
        if args.controller:
            scenario = replace(scenario, controller=args.controller)
        summary = run_scenario(
            scenario,
            out_dir=args.out,
            stability_order=args.stability_order,
            workers=args.workers,
        )
        print(json.dumps(summary, indent=2, sort_keys=True))
        return 0
    except (
        ScenarioError,
        quadnet.ParameterError,
        lqgsynth.SynthesisError,
        ddestab.NoConvergence,
        spectra.SingularResolvent,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
