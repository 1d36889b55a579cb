"""Scenario pipeline: measure -> curve -> diagnosis -> scaling -> simulation
-> goodness of fit -> artifacts on disk.

Each scenario gets its own output directory with curve.csv, mrv.json,
plan.csv, gof_summary.csv and any extra check outputs; the run directory
gets a manifest with the config hash, effective seed, library versions and
per-artifact checksums.  All randomness flows through streams derived from
(seed, scenario name, stage), so scenarios are isolated: removing one never
changes another's artifacts.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import hashlib
import io
import json
import traceback
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from ._rng import derive_rng, derive_seed
from .config import Scenario, expand_grid, parse_config
from .errors import ConfigError, GaussDomainError
from .gof import GofThresholds, gaussian_gof
from .levy_sim import SimConfig, eta_moment_decay, scaled_marginal
from .moment_matrix import (
    CurveForm,
    build_curve,
    centered_uncentered_compare,
    curve_to_csv,
    mrv_diagnose,
    report_to_json,
)
from .normalize import clt_scaling, levy_scaling, plan_to_csv
from .scenarios import measure_from_config, triplet_from_config

_MONOTONE_DEFAULT_SLACK = 0.0


@dataclasses.dataclass
class ScenarioOutcome:
    name: str
    status: str                 # "ok" or "error"
    results: dict
    expectation_failures: list
    artifacts: dict             # filename -> text content
    error: str | None = None


def _gof_thresholds(overrides: dict) -> GofThresholds:
    known = {f.name for f in dataclasses.fields(GofThresholds)}
    bad = set(overrides) - known
    if bad:
        raise ConfigError(f"gof: unknown threshold keys {sorted(bad)}")
    return GofThresholds(**overrides)


def _sim_config(overrides: dict, n_paths: int, seed: int) -> SimConfig:
    known = {"jump_cutoff", "small_jump_mode", "jump_budget", "gate_ratio"}
    bad = set(overrides) - known
    if bad:
        raise ConfigError(f"sim: unknown keys {sorted(bad)}")
    return SimConfig(n_paths=n_paths, seed=seed, **overrides)


def normalized_sums(measure, plan, n: int, replicates: int, seed: int,
                    label: str) -> np.ndarray:
    """Replicates of a_n * (X_1 + ... + X_n) - xi_n with derived streams."""
    a, xi = plan.lookup(float(n))
    out = np.empty((replicates, measure.dimension))
    for r in range(replicates):
        rng = derive_rng(seed, f"{label}:sums:n={n}", r)
        out[r] = a * measure.sample(int(n), rng).sum(axis=0) - xi
    return out


def _gof_row(abscissa: float, samples: np.ndarray, target_b: np.ndarray,
             thresholds: GofThresholds, seed: int) -> dict:
    report = gaussian_gof(samples, target_b, alpha=thresholds.alpha,
                          thresholds=thresholds, seed=seed)
    tr_b = float(np.trace(target_b))
    return {
        "abscissa": float(abscissa),
        "mean_norm": report.mean_norm,
        "cov_frobenius_rel": report.cov_frobenius_rel,
        "trace_ratio_err": abs(float(np.trace(report.cov_estimate)) - tr_b) / tr_b,
        "kernel_leak": report.kernel_leak,
        "energy_pvalue": report.energy_pvalue,
        "pass": report.passed,
    }


def _gof_rows_csv(rows: list[dict]) -> str:
    cols = ["abscissa", "mean_norm", "cov_frobenius_rel", "trace_ratio_err",
            "kernel_leak", "energy_pvalue", "pass"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in rows:
        vals = []
        for c in cols:
            v = row[c]
            vals.append(str(int(v)) if isinstance(v, bool) else f"{v:.17g}")
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def run_scenario(scenario: Scenario, root_seed: int) -> ScenarioOutcome:
    """Execute one scenario; never raises, failures land in the outcome."""
    try:
        return _run_scenario_inner(scenario, root_seed)
    except Exception as exc:  # isolation: a broken scenario cannot stop the run
        failures = [f"scenario raised {type(exc).__name__}: {exc}"]
        return ScenarioOutcome(name=scenario.name, status="error", results={},
                               expectation_failures=failures, artifacts={},
                               error=traceback.format_exc())


def _run_scenario_inner(scenario: Scenario, root_seed: int) -> ScenarioOutcome:
    seed = derive_seed(root_seed, f"scenario:{scenario.name}")
    artifacts: dict[str, str] = {}
    results: dict = {}

    if scenario.kind == "clt":
        measure = measure_from_config(scenario.measure)
        subject = measure
        curve = build_curve(measure, CurveForm.CLT_CENTERED, scenario.radii,
                            scenario.limit_point)
    else:
        triplet = triplet_from_config(scenario.triplet)
        subject = triplet.levy_measure
        curve = build_curve(subject, CurveForm.LEVY_RAW, scenario.radii,
                            scenario.limit_point)
    artifacts["curve.csv"] = curve_to_csv(curve)

    report = mrv_diagnose(curve, target_B=scenario.target_b)
    artifacts["mrv.json"] = report_to_json(report)
    results.update({
        "is_mrv0": report.is_mrv0,
        "trace_index": report.trace_diagnosis.index_estimate,
        "matrix_residual": report.matrix_residual,
        "b_hat_rank": report.rank,
        "scaling_skipped": not report.is_mrv0,
    })
    if report.target_distance is not None:
        results["b_hat_target_distance"] = report.target_distance

    if scenario.target_b is not None:
        target_b = np.asarray(scenario.target_b, dtype=float)
        k = 1.0 / float(np.trace(target_b))
    else:
        target_b = report.B_hat
        k = 1.0

    thresholds = _gof_thresholds(scenario.gof)
    gof_rows: list[dict] = []

    if report.is_mrv0:
        if scenario.kind == "clt":
            if scenario.sum_sizes:
                plan = clt_scaling(measure, curve, k, scenario.sum_sizes,
                                   report=report)
                artifacts["plan.csv"] = plan_to_csv(plan)
                for n in scenario.sum_sizes:
                    samples = normalized_sums(measure, plan, n,
                                              scenario.replicates, seed,
                                              scenario.name)
                    gof_rows.append(_gof_row(
                        n, samples, target_b, thresholds,
                        derive_seed(seed, f"gof:n={n}")))
        else:
            abscissae = sorted({*scenario.times,
                                *_extra_times(scenario)})
            if abscissae:
                plan = levy_scaling(subject, curve, k, abscissae,
                                    scenario.limit_point,
                                    drift=triplet.drift, report=report)
                artifacts["plan.csv"] = plan_to_csv(plan)
                for t in scenario.times:
                    cfg = _sim_config(scenario.sim, scenario.replicates,
                                      derive_seed(seed, f"sim:t={t!r}"))
                    samples = scaled_marginal(triplet, plan, t, cfg)
                    gof_rows.append(_gof_row(
                        t, samples, target_b, thresholds,
                        derive_seed(seed, f"gof:t={t!r}")))
                _levy_checks(scenario, subject, plan, results, artifacts)
    else:
        results["skip_reason"] = (
            "scaling skipped: the moment curve is not matrix regularly "
            f"varying with index 0 (trace index "
            f"{report.trace_diagnosis.index_estimate:.3f})"
        )

    if gof_rows:
        artifacts["gof_summary.csv"] = _gof_rows_csv(gof_rows)
    results["gof_rows"] = gof_rows

    if scenario.centering_check is not None:
        cmp = centered_uncentered_compare(subject, scenario.radii)
        results["centering_max_at_edge"] = float(cmp.pairwise_max[-1])
        buf = io.StringIO()
        buf.write("t,pairwise_max\n")
        for t, v in zip(cmp.radii, cmp.pairwise_max):
            buf.write(f"{t:.17g},{v:.17g}\n")
        artifacts["centering.csv"] = buf.getvalue()

    failures = evaluate_expectations(scenario.expect, results)
    return ScenarioOutcome(name=scenario.name, status="ok", results=results,
                           expectation_failures=failures, artifacts=artifacts)


def _extra_times(scenario: Scenario) -> list[float]:
    extra: list[float] = []
    for check in (scenario.decay_check, scenario.stability_check):
        if check and "t_grid" in check:
            extra.extend(expand_grid(check["t_grid"], "t_grid").tolist())
    return extra


def _levy_checks(scenario, levy_measure, plan, results, artifacts):
    if scenario.decay_check:
        dc = scenario.decay_check
        t_grid = expand_grid(dc["t_grid"], "decay_check.t_grid") \
            if "t_grid" in dc else np.asarray(scenario.times, dtype=float)
        finals = []
        monotone = True
        buf = io.StringIO()
        buf.write("eta,s,t,value\n")
        for eta in dc.get("etas", [0.0, 1.0]):
            for s in dc.get("radii", [1.0]):
                curve = eta_moment_decay(levy_measure, plan, float(eta),
                                         float(s), t_grid)
                finals.append(curve.values[-1])
                diffs = np.diff(curve.values)
                monotone = monotone and bool(
                    np.all(diffs <= 1e-9 * np.abs(curve.values[:-1])))
                for t, v in zip(curve.abscissae, curve.values):
                    buf.write(f"{eta:g},{s:g},{t:.17g},{v:.17g}\n")
        artifacts["decay.csv"] = buf.getvalue()
        results["decay_final_max"] = float(max(finals))
        results["decay_monotone"] = monotone
    if scenario.stability_check:
        sc = scenario.stability_check
        t_grid = expand_grid(sc["t_grid"], "stability_check.t_grid")
        radii = [float(r) for r in sc["radii"]]
        k_trail = max(2, len(t_grid) // 4)
        worst = 0.0
        for t in t_grid[-k_trail:]:
            a, _ = plan.lookup(float(t))
            rescaled = levy_measure.rescale(float(t), a)
            mats = [rescaled.truncated_integrals(r).second_moment for r in radii]
            norms = [np.linalg.norm(m) for m in mats]
            scale = max(norms)
            for i in range(len(mats)):
                for j in range(i + 1, len(mats)):
                    rel = float(np.linalg.norm(mats[i] - mats[j]) / scale)
                    worst = max(worst, rel)
        results["stability_rel"] = worst


# ---------------------------------------------------------------------------
# expectations
# ---------------------------------------------------------------------------


def evaluate_expectations(expect: list, results: dict) -> list[str]:
    failures = []
    for e in expect:
        msg = _check_one(e, results)
        if msg:
            failures.append(msg)
    return failures


def _check_one(e: dict, results: dict) -> str | None:
    field = e["field"]
    if field.startswith("gof."):
        col = field[4:]
        rows = results.get("gof_rows") or []
        if not rows:
            return f"{field}: no gof rows were produced"
        if "monotone" in e:
            values = [row[col] for row in rows]
            slack = float(e.get("slack", _MONOTONE_DEFAULT_SLACK))
            ok = all(values[i + 1] <= values[i] + slack
                     for i in range(len(values) - 1))
            ok = ok and values[-1] < values[0]
            if not ok:
                return f"{field}: not decreasing (values {values})"
            return None
        if "at" not in e:
            return f"{field}: per-column expectations need 'at'"
        match = [r for r in rows if np.isclose(r["abscissa"], float(e["at"]))]
        if not match:
            return f"{field}: no gof row at abscissa {e['at']!r}"
        value = match[0][col]
    else:
        if field not in results:
            return f"{field}: not produced by the scenario"
        value = results[field]

    if "equals" in e:
        if value != e["equals"]:
            return f"{field}: expected {e['equals']!r}, got {value!r}"
    elif "below" in e:
        if not value < float(e["below"]):
            return f"{field}: expected < {e['below']}, got {value}"
    elif "above" in e:
        if not value > float(e["above"]):
            return f"{field}: expected > {e['above']}, got {value}"
    elif "within" in e:
        lo, hi = float(e["within"][0]), float(e["within"][1])
        if not lo <= value <= hi:
            return f"{field}: expected within [{lo}, {hi}], got {value}"
    return None


# ---------------------------------------------------------------------------
# run entry point
# ---------------------------------------------------------------------------


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def run(config_path, out_dir, seed_override: int | None = None,
        jobs: int = 1) -> int:
    """Execute a config file; returns the process exit code.

    Exit 0 means every scenario ran and met all of its declared
    expectations.  Scenario failures are isolated; the manifest records
    per-scenario status, expectation failures and artifact checksums.
    """
    config_path = Path(config_path)
    raw_bytes = config_path.read_bytes()
    raw = yaml.safe_load(raw_bytes)
    seed, scenarios = parse_config(raw)
    if seed_override is not None:
        seed = int(seed_override)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_scenario, scenarios,
                                     [seed] * len(scenarios)))
    else:
        outcomes = [run_scenario(sc, seed) for sc in scenarios]

    manifest: dict = {
        "config_sha256": _sha256(raw_bytes),
        "config_dialect": "yaml",
        "seed": seed,
        "versions": {
            "gaussdomain": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "scenarios": {},
    }
    summary_buf = io.StringIO()
    summary_buf.write("scenario,abscissa,mean_norm,cov_frobenius_rel,"
                      "trace_ratio_err,kernel_leak,energy_pvalue,pass\n")
    all_ok = True
    for sc, outcome in zip(scenarios, outcomes):
        sc_dir = out / sc.name
        sc_dir.mkdir(parents=True, exist_ok=True)
        hashes = {}
        for fname, text in outcome.artifacts.items():
            (sc_dir / fname).write_text(text)
            hashes[fname] = _sha256(text.encode())
        entry = {
            "status": outcome.status,
            "expectation_failures": outcome.expectation_failures,
            "artifacts": hashes,
        }
        if outcome.error:
            entry["error"] = outcome.error
        if "skip_reason" in outcome.results:
            entry["skip_reason"] = outcome.results["skip_reason"]
        manifest["scenarios"][sc.name] = entry
        for row in outcome.results.get("gof_rows", []):
            summary_buf.write(
                f"{sc.name},{row['abscissa']:.17g},{row['mean_norm']:.17g},"
                f"{row['cov_frobenius_rel']:.17g},{row['trace_ratio_err']:.17g},"
                f"{row['kernel_leak']:.17g},{row['energy_pvalue']:.17g},"
                f"{int(row['pass'])}\n")
        if outcome.expectation_failures:
            all_ok = False

    manifest["exit_code"] = 0 if all_ok else 1
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                  sort_keys=True))
    (out / "gof_summary.csv").write_text(summary_buf.getvalue())
    return manifest["exit_code"]


def default_config() -> dict:
    """A complete runnable config holding all seven built-in scenarios."""
    from .scenarios import builtin_names

    return {"seed": 20260809, "scenarios": builtin_names()}
