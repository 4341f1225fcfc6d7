"""
Experiment commands: simulate, rates, covariance and rl
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import stats

from ..config import Config
from ..covariance import covariance_report
from ..engine import RunOptions, TtsaEngine, default_checkpoints, make_stream
from ..errors import AcceptanceFailed, ConfigError, NotHurwitz
from ..gauss import (
    DistanceReport,
    SimulationSpec,
    collect_cloud,
    collect_moments,
    collect_remainders,
    distance_to_gaussian,
    fit_rate,
    require_grid,
)
from ..linalg import solve_lyapunov
from ..model import validate_assumptions
from ..rlapps import evaluate_policy_exact
from ..schedule import check_schedule
from .experiment_config import ExperimentConfig
from .outputs import ArtifactWriter

logger = logging.getLogger(__name__)


def power_grid(horizon: int, start: int = 16) -> List[int]:
    grid = []
    k = start
    while k <= horizon:
        grid.append(k)
        k *= 2
    if not grid or grid[-1] != horizon:
        grid.append(horizon)
    return grid


def log_slope(xs: List[float], ys: List[float]) -> Optional[float]:
    pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(y)]
    if len(pts) < 2:
        return None
    fit = stats.linregress(np.log([p[0] for p in pts]), np.log([p[1] for p in pts]))
    return float(fit.slope)


class LabCommands:
    """
    Runs one experiment config and writes its artifacts.

    Args:
        config: parsed experiment definition
        seed: experiment seed (config value, or Config.SEED, when None)
        out_dir: artifact directory
        threads: worker processes for the replication blocks
        strict: acceptance checks raise instead of being reported
    """

    def __init__(self, config: ExperimentConfig, seed: Optional[int] = None,
                 out_dir: Optional[str] = None, threads: Optional[int] = None,
                 strict: bool = False):
        self.config = config
        self.seed = config.resolved_seed(seed)
        self.out_dir = Path(out_dir or config.output_dir or Config.OUTPUT_DIR)
        self.threads = max(1, int(threads or Config.THREADS))
        self.strict = strict
        self.writer = ArtifactWriter(self.out_dir, config.config_hash, self.seed)

    # ========================================
    # Diagnostics shared by every command
    # ========================================

    def _diagnostics(self, spec: SimulationSpec, horizon: int) -> Dict[str, Any]:
        report = validate_assumptions(spec.problem, spec.oracle, strict=self.strict)
        schedule = spec.schedule_at(horizon)
        try:
            cert22 = solve_lyapunov(spec.problem.a22)
            cert_delta = solve_lyapunov(spec.problem.delta)
            sched = check_schedule(schedule, cert22, cert_delta).to_dict()
            certificates = {"a22": cert22.to_dict(), "delta": cert_delta.to_dict()}
        except NotHurwitz as e:
            logger.warning("Schedule checks skipped: %s", e)
            sched, certificates = None, None
        return {
            "solution": spec.solution.to_dict(),
            "validation": report.to_dict(),
            "schedule": schedule.to_dict(),
            "schedule_check": sched,
            "certificates": certificates,
        }

    # ========================================
    # simulate
    # ========================================

    def simulate(self, spec: Optional[SimulationSpec] = None,
                 extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Trajectory CSVs plus summary.json with the MSE-vs-k table.

        Trajectory r uses the stream (seed, r); moments use the block streams.
        """
        cfg = self.config
        spec = spec or cfg.build_spec()
        horizon = cfg.horizon
        summary: Dict[str, Any] = {"command": "simulate", "horizon": horizon}
        summary.update(self._diagnostics(spec, horizon))

        engine: TtsaEngine = spec.engine(horizon)
        runs = []
        for rep in range(cfg.trajectories):
            record = engine.run(horizon, make_stream(self.seed, rep), default_checkpoints(horizon),
                                RunOptions(theta0=spec.theta0, w0=spec.w0, run_decoupled=True))
            self.writer.write_csv(f"trajectory_{rep}.csv", record.to_frame())
            runs.append({
                "replication": rep,
                "identity_residual_max": record.identity_residual_max,
                "decoupled_discrepancy_max": record.decoupled_discrepancy_max,
                "l_ratio_max": record.l_ratio_max,
                "theta": record.final.theta,
                "theta_bar": record.final.theta_bar,
                "w": record.final.w,
            })
        summary["trajectories"] = runs

        grid = power_grid(horizon)
        moments = collect_moments(spec, horizon, grid, cfg.moment_replications, self.seed,
                                  threads=self.threads)
        upper = [row for row in moments if row["k"] >= math.sqrt(horizon)]
        schedule = spec.schedule_at(horizon)
        summary["moments"] = moments
        summary["moment_slopes"] = {
            "theta": log_slope([r["k"] for r in upper], [r["theta_mse"] for r in upper]),
            "w": log_slope([r["k"] for r in upper], [r["w_mse"] for r in upper]),
            "theta_expected": -schedule.b_exp,
            "w_expected": -schedule.a_exp,
        }
        if extra:
            summary.update(extra)
        self.writer.write_json("summary.json", summary)
        logger.info("Simulate finished horizon=%d trajectories=%d", horizon, cfg.trajectories)
        return summary

    # ========================================
    # rates
    # ========================================

    def _distances(self, spec: SimulationSpec, label: str, metrics: List[str]) -> List[Dict[str, Any]]:
        cfg = self.config
        rows = []
        for ti, target in enumerate(cfg.targets):
            for n in cfg.n_grid:
                cloud = collect_cloud(spec, target, n, cfg.replications, self.seed,
                                      threads=self.threads, whiten=cfg.whiten,
                                      target_mode=cfg.target_covariance)
                for mi, metric in enumerate(metrics):
                    rng = make_stream(self.seed, n, ti, mi)
                    report = distance_to_gaussian(cloud.points, cloud.target_cov, metric, rng,
                                                  n=n, target=target)
                    rows.append({"schedule": label, "diverged": cloud.diverged,
                                 "degenerate": cloud.degenerate, **report.to_dict()})
        return rows

    def rates(self, spec: Optional[SimulationSpec] = None,
              extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Distance table over the n-grid, one rate fit per (target, metric),
        and the optional timescale-separation comparison.

        Raises:
            InsufficientGrid
            NoiseFloorViolated: strict mode
            AcceptanceFailed: strict mode, separation verdict fails
        """
        cfg = self.config
        require_grid(cfg.n_grid)
        if cfg.replications < Config.MIN_REPLICATIONS:
            raise ConfigError(f"distance experiments need at least {Config.MIN_REPLICATIONS}",
                              field="replications")
        spec = spec or cfg.build_spec()
        metrics = cfg.default_metrics(spec.problem.d_theta)
        summary: Dict[str, Any] = {"command": "rates", "n_grid": cfg.n_grid,
                                   "targets": cfg.targets, "metrics": metrics}
        summary.update(self._diagnostics(spec, max(cfg.n_grid)))

        rows = self._distances(spec, "main", metrics)
        fits: Dict[str, Dict[str, Any]] = {}
        for ti, target in enumerate(cfg.targets):
            fits[target] = {}
            for mi, metric in enumerate(metrics):
                reports = [DistanceReport(**{k: r[k] for k in DistanceReport.__dataclass_fields__})
                           for r in rows if r["target"] == target and r["metric"] == metric]
                fit = fit_rate(reports, rng=make_stream(self.seed, 0, ti, mi), strict=self.strict)
                fits[target][metric] = fit.to_dict()

        if cfg.compare_schedule:
            compare_spec = cfg.build_spec(schedule_block=cfg.compare_schedule)
            compare_rows = self._distances(compare_spec, "compare", metrics)
            summary["separation"] = self._separation(rows, compare_rows)
            rows = rows + compare_rows
            if self.strict and not summary["separation"]["ok"]:
                raise AcceptanceFailed("less separated schedule produced smaller distances")

        if cfg.remainders and "last" in cfg.targets:
            summary["last_remainder_rms"] = [
                {"n": n, "rms": collect_remainders(spec, n, cfg.replications, self.seed,
                                                   threads=self.threads)}
                for n in cfg.n_grid
            ]

        self.writer.write_csv("distances.csv", rows)
        self.writer.write_json("ratefit.json", {"fits": fits})
        summary["fits"] = fits
        if extra:
            summary.update(extra)
        self.writer.write_json("summary.json", summary)
        return summary

    @staticmethod
    def _separation(main: List[Dict[str, Any]], compare: List[Dict[str, Any]]) -> Dict[str, Any]:
        """compare >= main - 2 sqrt(se_main^2 + se_compare^2) at every (target, metric, n)."""
        index = {(r["target"], r["metric"], r["n"]): r for r in compare}
        verdicts = []
        for r in main:
            other = index.get((r["target"], r["metric"], r["n"]))
            if other is None:
                continue
            margin = 2.0 * math.hypot(r["stderr"], other["stderr"])
            verdicts.append({
                "target": r["target"], "metric": r["metric"], "n": r["n"],
                "main": r["value"], "compare": other["value"], "margin": margin,
                "ok": bool(other["value"] >= r["value"] - margin),
            })
        return {"ok": all(v["ok"] for v in verdicts), "verdicts": verdicts}

    # ========================================
    # covariance
    # ========================================

    def covariance(self, spec: Optional[SimulationSpec] = None,
                   extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """covariance.json: Sigma_eps, limit candidates, gap table and fitted gap slope."""
        cfg = self.config
        spec = spec or cfg.build_spec()
        grid = cfg.n_grid or power_grid(cfg.horizon, start=2 ** 10)
        schedule = spec.schedule_at(max(grid))
        report = covariance_report(spec.problem, spec.oracle, schedule, grid, spec.solution,
                                   burn_in=cfg.burn_in)
        payload = {"command": "covariance", "n_grid": grid, "schedule": schedule.to_dict(),
                   **report.to_dict()}
        if extra:
            payload.update(extra)
        self.writer.write_json("covariance.json", payload)
        return payload

    # ========================================
    # rl
    # ========================================

    def rl(self) -> Dict[str, Any]:
        """
        Build the GTD/TDC instance, validate it, evaluate the policy exactly,
        then delegate to the command named by config.run.
        """
        cfg = self.config
        instance = cfg.rl_instance()
        evaluation = evaluate_policy_exact(instance)
        report = validate_assumptions(instance.problem, instance.oracle, strict=self.strict)
        rl_info = {
            "algorithm": instance.algorithm,
            "mode": instance.mode,
            "tuples": len(instance.chain.tuples),
            "problem": instance.problem.to_dict(),
            "evaluation": evaluation.to_dict(),
            "hurwitz": {
                "a22": report.get("A4_a22_hurwitz").to_dict(),
                "delta": report.get("A4_delta_hurwitz").to_dict(),
            },
        }
        self.writer.write_json("rl.json", rl_info)
        if cfg.run == "none":
            return {"command": "rl", "rl": rl_info}
        spec = cfg.build_spec(instance=instance)
        delegate = {"simulate": self.simulate, "rates": self.rates,
                    "covariance": self.covariance}[cfg.run]
        return delegate(spec, extra={"rl": rl_info})

    def dispatch(self, command: str) -> Dict[str, Any]:
        handlers = {"simulate": self.simulate, "rates": self.rates,
                    "covariance": self.covariance, "rl": self.rl}
        if command not in handlers:
            raise ConfigError(f"unknown command '{command}'", field="command")
        return handlers[command]()
