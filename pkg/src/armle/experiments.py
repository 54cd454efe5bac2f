"""Monte Carlo verification harness for the asymptotic guarantees.

Available experiments, all driven by one :class:`ExperimentConfig`:

``consistency``
    Median estimation error against sample size, with a log-log slope fit.
``clt``
    Empirical covariance of sqrt(n)(theta_hat - theta) against the inverse
    information matrix, with per-coordinate normality KS statistics.
``qsl``
    Sequential estimates along one trajectory: the log-scaled running sum of
    squared errors against the trace of the inverse information matrix.
``lil``
    Per-path running maxima of the iterated-logarithm-scaled error projection
    against the 2x theoretical envelope.
``lan_remainder``
    The curvature remainder of the local likelihood expansion per sample size.
``test_size`` / ``test_power``
    Rejection frequency of the likelihood-ratio test under the null, or under
    a local alternative theta + shift/sqrt(n), against its chi-square and
    noncentral chi-square calibration.

Replicate r draws its innovations from substream (seed, r); ``test_power``
uses (seed, size_index, r) because the simulated parameter depends on n.
Multi-size experiments evaluate snapshots of the running Gram/moment along a
single trajectory per replicate. Failed replicates (singular Gram) are
recorded, excluded from aggregates and counted; a report passes only when the
failure rate stays within 1 percent. Aggregates are recomputable from the raw
rows and are bit-identical under any replicate execution order.
"""
from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from itertools import chain
from typing import Callable

import numpy as np
import scipy.signal
import scipy.stats

from . import rng
from .ar import apply_ar, fisher_info, fisher_info_inverse, require_stable
from .exceptions import Unstable
from .filtering import _stream
from .inference import GRAM_CONDITION_CAP, chi2_quantile, noncentral_chi2_sf
from .noise import CovarianceKernel, kernel_from_json, validate_kernel

EXPERIMENTS = (
    "consistency",
    "clt",
    "qsl",
    "lil",
    "lan_remainder",
    "test_size",
    "test_power",
)

#: A report passes when at most this fraction of raw rows failed.
FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of one Monte Carlo experiment.

    ``shift`` is the local-alternative direction u (required by ``test_power``
    and ``lan_remainder``); ``direction`` is the projection vector v of the
    ``lil`` experiment (defaults to the first coordinate).
    """

    experiment: str
    theta: tuple[float, ...]
    kernel: CovarianceKernel
    sample_sizes: tuple[int, ...]
    replicates: int
    seed: int
    alpha: float = 0.05
    shift: tuple[float, ...] | None = None
    direction: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        object.__setattr__(
            self, "sample_sizes", tuple(sorted({int(n) for n in self.sample_sizes}))
        )
        if self.shift is not None:
            object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))
        if self.direction is not None:
            object.__setattr__(
                self, "direction", tuple(float(v) for v in self.direction)
            )

    @property
    def p(self) -> int:
        return len(self.theta)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.kernel, CovarianceKernel):
            raise ValueError("kernel must be a CovarianceKernel")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.sample_sizes:
            raise ValueError("sample_sizes must be nonempty")
        require_stable(self.theta)
        if min(self.sample_sizes) < self.p + 2:
            raise ValueError("every sample size must be at least p + 2")
        if self.experiment in ("test_power", "lan_remainder"):
            if self.shift is None:
                raise ValueError(f"{self.experiment} needs a shift vector")
            if len(self.shift) != self.p:
                raise ValueError("shift must have the same length as theta")
        if self.experiment == "test_power":
            n_min = min(self.sample_sizes)
            moved = np.array(self.theta) + np.array(self.shift) / math.sqrt(n_min)
            try:
                require_stable(moved)
            except Unstable as exc:
                raise Unstable(
                    f"theta + shift/sqrt(n) leaves the stability region at n={n_min}: {exc}"
                ) from exc
        if self.experiment == "lil":
            if min(self.sample_sizes) < 16:
                raise ValueError("lil needs sample sizes of at least 16")
            if self.direction is not None and len(self.direction) != self.p:
                raise ValueError("direction must have the same length as theta")
        # Cheap early positive-definiteness check of the kernel.
        validate_kernel(self.kernel, min(200, max(self.sample_sizes)))

    def to_json_dict(self) -> dict:
        out = {
            "experiment": self.experiment,
            "theta": list(self.theta),
            "kernel": self.kernel.to_json_dict(),
            "sample_sizes": list(self.sample_sizes),
            "replicates": self.replicates,
            "seed": self.seed,
            "alpha": self.alpha,
        }
        if self.shift is not None:
            out["shift"] = list(self.shift)
        if self.direction is not None:
            out["direction"] = list(self.direction)
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ValueError("experiment config must be a JSON object")
        required = {"experiment", "theta", "kernel", "sample_sizes", "replicates", "seed"}
        missing = required - set(obj)
        if missing:
            raise ValueError(f"experiment config is missing keys: {sorted(missing)}")
        return cls(
            experiment=str(obj["experiment"]),
            theta=tuple(obj["theta"]),
            kernel=kernel_from_json(obj["kernel"]),
            sample_sizes=tuple(obj["sample_sizes"]),
            replicates=int(obj["replicates"]),
            seed=int(obj["seed"]),
            alpha=float(obj.get("alpha", 0.05)),
            shift=tuple(obj["shift"]) if obj.get("shift") is not None else None,
            direction=tuple(obj["direction"]) if obj.get("direction") is not None else None,
        )


@dataclass(eq=False)
class ExperimentReport:
    """Outcome of one experiment run.

    ``rows`` hold one record per replicate per sample size (the raw data);
    ``per_n`` and ``summary`` are aggregates recomputable from the rows via
    :func:`aggregate`. ``passed`` means the failure rate stayed within budget.
    """

    experiment: str
    config: dict
    columns: list[str]
    rows: list[dict]
    per_n: dict[int, dict]
    summary: dict
    failures: int
    failure_rate: float
    passed: bool
    runtime_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "per_n": {str(n): self.per_n[n] for n in sorted(self.per_n)},
            "summary": self.summary,
            "failures": self.failures,
            "failure_rate": self.failure_rate,
            "passed": self.passed,
            "runtime_seconds": self.runtime_seconds,
        }

    def write(self, out_dir: str) -> None:
        """Write report.json, raw.csv and curves.csv into ``out_dir``."""
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
        with open(os.path.join(out_dir, "raw.csv"), "w", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(_fmt_cell(row.get(c)) for c in self.columns) + "\n")
        ns = sorted(self.per_n)
        keys = sorted({k for n in ns for k in self.per_n[n]})
        with open(os.path.join(out_dir, "curves.csv"), "w", encoding="utf-8") as fh:
            fh.write(",".join(["n"] + keys) + "\n")
            for n in ns:
                cells = [str(n)] + [_fmt_cell(self.per_n[n].get(k)) for k in keys]
                fh.write(",".join(cells) + "\n")


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


# ---------------------------------------------------------------------------
# Streaming engine
# ---------------------------------------------------------------------------


def _score_arrays(theta, kernel: CovarianceKernel, eps: np.ndarray):
    """Simulate one replicate and return its score arrays.

    Returns (w, z1, sigma2): score weights (n, p), first whitened component
    (n,), prediction variances (n,). The white and ar1 kernels short-circuit
    to vectorized closed forms of the filter; other kernels run the O(n^2)
    streaming recursion.
    """
    th = np.asarray(theta, dtype=float)
    p = th.size
    n = eps.size
    if kernel.family == "white":
        x = apply_ar(th, eps)
        z = np.zeros((n, p))
        for j in range(p):
            z[j:, j] = x[: n - j]
        w = np.zeros((n, p))
        w[1:] = z[:-1]
        return w, x, np.ones(n)
    if kernel.family == "ar1":
        # Closed-form filter: beta_1 = a, beta_m = 0 afterwards, so rows are
        # (..., 0, -a, 1), sigma stays at 1 - a^2 and the carry never feeds
        # back into the score weights.
        a = kernel.a
        sigma = np.full(n, math.sqrt(1.0 - a * a))
        sigma[0] = 1.0
        xi = scipy.signal.lfilter([1.0], [1.0, -a], sigma * eps)
        x = apply_ar(th, xi)
        z = np.zeros((n, p))
        for j in range(min(p, n)):
            z[j, j] = x[0]
            if n > j + 1:
                z[j + 1 :, j] = x[1 : n - j] - a * x[: n - j - 1]
        w = np.zeros((n, p))
        w[1:] = z[:-1]
        return w, z[:, 0], sigma**2
    xi = np.empty(n)
    x = np.empty(n)
    z = np.zeros((n, p))
    carry = np.zeros((n, p))
    sigma2 = np.empty(n)
    pacf = np.zeros(n)
    for step in _stream(kernel, n):
        m = step.index
        i = m - 1
        sigma2[i] = step.sigma2
        pacf[i] = step.beta_prev
        row = step.row
        pred = float(row[:i] @ xi[:i]) if i else 0.0
        xi[i] = math.sqrt(step.sigma2) * eps[i] - pred
        acc = xi[i]
        for j in range(min(p, i)):
            acc += th[j] * x[i - 1 - j]
        x[i] = acc
        for j in range(min(p, m)):
            z[i, j] = row[j:] @ x[: m - j]
        if i:
            carry[i] = carry[i - 1] + pacf[i] * z[i - 1]
    w = np.zeros((n, p))
    w[1:] = z[:-1] + pacf[1:, None] * carry[:-1]
    return w, z[:, 0], sigma2


def _cumulative_stats(w, z1, sigma2):
    """Running Gram (n, p, p) and moment (n, p) over the first k terms."""
    sw = w / np.sqrt(sigma2)[:, None]
    cum_gram = np.cumsum(sw[:, :, None] * sw[:, None, :], axis=0)
    cum_mom = np.cumsum(w * (z1 / sigma2)[:, None], axis=0)
    return cum_gram, cum_mom


def _estimates_at(cum_gram, cum_mom, idx):
    """Batched normal-equation solves at the selected indices with validity mask."""
    g = cum_gram[idx]
    m = cum_mom[idx]
    evals = np.linalg.eigvalsh(g)
    lo, hi = evals[:, 0], evals[:, -1]
    ok = np.isfinite(lo) & np.isfinite(hi) & (lo > 0.0)
    safe_lo = np.where(ok, lo, 1.0)
    ok &= (hi / safe_lo) <= GRAM_CONDITION_CAP
    theta = np.full(m.shape, np.nan)
    if ok.any():
        theta[ok] = np.linalg.solve(g[ok], m[ok][:, :, None])[:, :, 0]
    return theta, ok


def _simulate_cumulants(cfg: ExperimentConfig, rep: int, theta_sim=None):
    theta_sim = np.array(cfg.theta) if theta_sim is None else np.asarray(theta_sim)
    n_max = max(cfg.sample_sizes)
    eps = rng.standard_normals(rng.substream(cfg.seed, rep), n_max)
    w, z1, sigma2 = _score_arrays(theta_sim, cfg.kernel, eps)
    return _cumulative_stats(w, z1, sigma2)


# ---------------------------------------------------------------------------
# Per-replicate workers (pure functions of (cfg, rep))
# ---------------------------------------------------------------------------


def _rows_consistency(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th = np.array(cfg.theta)
    cum_gram, cum_mom = _simulate_cumulants(cfg, rep)
    idx = np.array(cfg.sample_sizes) - 1
    that, ok = _estimates_at(cum_gram, cum_mom, idx)
    rows = []
    for c, n in enumerate(cfg.sample_sizes):
        row = {"replicate": rep, "n": int(n), "ok": int(ok[c]), "err": None}
        for j in range(cfg.p):
            row[f"theta_hat_{j + 1}"] = None
        if ok[c]:
            row["err"] = float(np.linalg.norm(that[c] - th))
            for j in range(cfg.p):
                row[f"theta_hat_{j + 1}"] = float(that[c, j])
        rows.append(row)
    return rows


def _rows_clt(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th = np.array(cfg.theta)
    cum_gram, cum_mom = _simulate_cumulants(cfg, rep)
    idx = np.array(cfg.sample_sizes) - 1
    that, ok = _estimates_at(cum_gram, cum_mom, idx)
    rows = []
    for c, n in enumerate(cfg.sample_sizes):
        row = {"replicate": rep, "n": int(n), "ok": int(ok[c])}
        for j in range(cfg.p):
            row[f"scaled_{j + 1}"] = (
                float(math.sqrt(n) * (that[c, j] - th[j])) if ok[c] else None
            )
        rows.append(row)
    return rows


def _rows_test_size(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th0 = np.array(cfg.theta)
    crit = chi2_quantile(cfg.p, cfg.alpha)
    cum_gram, cum_mom = _simulate_cumulants(cfg, rep)
    idx = np.array(cfg.sample_sizes) - 1
    that, ok = _estimates_at(cum_gram, cum_mom, idx)
    rows = []
    for c, n in enumerate(cfg.sample_sizes):
        row = {
            "replicate": rep,
            "n": int(n),
            "ok": int(ok[c]),
            "statistic": None,
            "reject": None,
        }
        if ok[c]:
            d = that[c] - th0
            stat = max(float(d @ cum_gram[idx[c]] @ d), 0.0)
            row["statistic"] = stat
            row["reject"] = int(stat >= crit)
        rows.append(row)
    return rows


def _rows_test_power(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th0 = np.array(cfg.theta)
    u = np.array(cfg.shift)
    crit = chi2_quantile(cfg.p, cfg.alpha)
    rows = []
    for c, n in enumerate(cfg.sample_sizes):
        theta_sim = th0 + u / math.sqrt(n)
        eps = rng.standard_normals(rng.substream(cfg.seed, c, rep), n)
        w, z1, sigma2 = _score_arrays(theta_sim, cfg.kernel, eps)
        cum_gram, cum_mom = _cumulative_stats(w, z1, sigma2)
        that, ok = _estimates_at(cum_gram, cum_mom, np.array([n - 1]))
        row = {
            "replicate": rep,
            "n": int(n),
            "ok": int(ok[0]),
            "statistic": None,
            "reject": None,
        }
        if ok[0]:
            d = that[0] - th0
            stat = max(float(d @ cum_gram[n - 1] @ d), 0.0)
            row["statistic"] = stat
            row["reject"] = int(stat >= crit)
        rows.append(row)
    return rows


def _rows_lan_remainder(cfg: ExperimentConfig, rep: int) -> list[dict]:
    u = np.array(cfg.shift)
    info = fisher_info(cfg.theta)
    cum_gram, _ = _simulate_cumulants(cfg, rep)
    idx = np.array(cfg.sample_sizes) - 1
    rows = []
    for c, n in enumerate(cfg.sample_sizes):
        gram_over_n = cum_gram[idx[c]] / n
        rem = -0.5 * float(u @ (gram_over_n - info) @ u)
        rows.append({"replicate": rep, "n": int(n), "ok": 1, "remainder": rem})
    return rows


def _rows_qsl(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th = np.array(cfg.theta)
    n_max = max(cfg.sample_sizes)
    cum_gram, cum_mom = _simulate_cumulants(cfg, rep)
    that, ok = _estimates_at(cum_gram, cum_mom, np.arange(n_max))
    if not ok.any():
        return [
            {"replicate": rep, "n": int(n), "ok": 0, "trace_ratio": None, "k0": None}
            for n in cfg.sample_sizes
        ]
    k0 = int(np.argmax(ok)) + 1
    err2 = np.where(ok, np.sum((that - th) ** 2, axis=1), 0.0)
    cum_err2 = np.cumsum(err2)
    target = float(np.trace(fisher_info_inverse(th)))
    rows = []
    for n in cfg.sample_sizes:
        ratio = cum_err2[n - 1] / math.log(n) / target
        rows.append(
            {
                "replicate": rep,
                "n": int(n),
                "ok": 1,
                "trace_ratio": float(ratio),
                "k0": k0,
            }
        )
    return rows


def _rows_lil(cfg: ExperimentConfig, rep: int) -> list[dict]:
    th = np.array(cfg.theta)
    v = np.array(cfg.direction) if cfg.direction is not None else _unit_vector(cfg.p)
    n_max = max(cfg.sample_sizes)
    n_min = min(cfg.sample_sizes)
    cum_gram, cum_mom = _simulate_cumulants(cfg, rep)
    that, ok = _estimates_at(cum_gram, cum_mom, np.arange(n_max))
    ks = np.arange(1, n_max + 1)
    valid = ok & (ks >= max(16, n_min))
    proj = np.where(ok, (that - th) @ v, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.sqrt(ks / (2.0 * np.log(np.log(np.maximum(ks, 3)))))
    s = np.where(valid, scale * proj, 0.0)
    running = np.maximum.accumulate(np.where(valid, np.abs(s), -np.inf))
    rows = []
    for n in cfg.sample_sizes:
        i = n - 1
        row = {
            "replicate": rep,
            "n": int(n),
            "ok": int(valid[i]),
            "s_n": float(s[i]) if valid[i] else None,
            "running_max_abs_s": float(running[i]) if np.isfinite(running[i]) else None,
        }
        rows.append(row)
    return rows


def _unit_vector(p: int) -> np.ndarray:
    v = np.zeros(p)
    v[0] = 1.0
    return v


_WORKERS: dict[str, Callable[[ExperimentConfig, int], list[dict]]] = {
    "consistency": _rows_consistency,
    "clt": _rows_clt,
    "qsl": _rows_qsl,
    "lil": _rows_lil,
    "lan_remainder": _rows_lan_remainder,
    "test_size": _rows_test_size,
    "test_power": _rows_test_power,
}


def _columns(cfg: ExperimentConfig) -> list[str]:
    base = ["replicate", "n", "ok"]
    p = cfg.p
    if cfg.experiment == "consistency":
        return base + ["err"] + [f"theta_hat_{j + 1}" for j in range(p)]
    if cfg.experiment == "clt":
        return base + [f"scaled_{j + 1}" for j in range(p)]
    if cfg.experiment in ("test_size", "test_power"):
        return base + ["statistic", "reject"]
    if cfg.experiment == "lan_remainder":
        return base + ["remainder"]
    if cfg.experiment == "qsl":
        return base + ["trace_ratio", "k0"]
    if cfg.experiment == "lil":
        return base + ["s_n", "running_max_abs_s"]
    raise ValueError(f"unknown experiment {cfg.experiment!r}")


# ---------------------------------------------------------------------------
# Aggregation (pure function of config and sorted rows)
# ---------------------------------------------------------------------------


def aggregate(cfg: ExperimentConfig, rows: list[dict]) -> tuple[dict, dict]:
    """Recompute (per_n, summary) aggregates from raw rows.

    Deterministic given the config and the rows sorted by (replicate, n);
    rows flagged not ok are excluded and counted as failures.
    """
    rows = sorted(rows, key=lambda r: (r["replicate"], r["n"]))
    by_n: dict[int, list[dict]] = {}
    for row in rows:
        by_n.setdefault(int(row["n"]), []).append(row)
    handler = {
        "consistency": _agg_consistency,
        "clt": _agg_clt,
        "qsl": _agg_qsl,
        "lil": _agg_lil,
        "lan_remainder": _agg_lan_remainder,
        "test_size": _agg_test,
        "test_power": _agg_test,
    }[cfg.experiment]
    return handler(cfg, by_n)


def _split_ok(rows_n: list[dict]) -> tuple[list[dict], int]:
    good = [r for r in rows_n if r["ok"]]
    return good, len(rows_n) - len(good)


def _agg_consistency(cfg, by_n):
    per_n = {}
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        errs = np.array([r["err"] for r in good])
        per_n[n] = {
            "count": len(good),
            "failures": failed,
            "median_err": float(np.median(errs)) if errs.size else None,
            "mean_err": float(np.mean(errs)) if errs.size else None,
        }
    ns = [n for n in sorted(per_n) if per_n[n]["median_err"] not in (None, 0.0)]
    slope = None
    if len(ns) >= 2:
        logs = np.log(np.array(ns, dtype=float))
        meds = np.log(np.array([per_n[n]["median_err"] for n in ns]))
        slope = float(np.polyfit(logs, meds, 1)[0])
    return per_n, {"slope": slope, "sample_sizes": list(cfg.sample_sizes)}


def _agg_clt(cfg, by_n):
    p = cfg.p
    target = fisher_info_inverse(cfg.theta)
    per_n = {}
    rel_max = None
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        entry = {"count": len(good), "failures": failed}
        if len(good) >= 2:
            scaled = np.array(
                [[r[f"scaled_{j + 1}"] for j in range(p)] for r in good]
            )
            cov = np.cov(scaled, rowvar=False, ddof=1).reshape(p, p)
            rel = float(
                np.linalg.norm(cov - target) / np.linalg.norm(target)
            )
            entry["rel_error_fro"] = rel
            rel_max = rel if rel_max is None else max(rel_max, rel)
            for j in range(p):
                for k in range(j, p):
                    entry[f"cov_{j + 1}{k + 1}"] = float(cov[j, k])
                    entry[f"target_{j + 1}{k + 1}"] = float(target[j, k])
            for j in range(p):
                stud = scaled[:, j] / math.sqrt(target[j, j])
                ks = scipy.stats.kstest(stud, "norm")
                entry[f"ks_stat_{j + 1}"] = float(ks.statistic)
                entry[f"ks_pvalue_{j + 1}"] = float(ks.pvalue)
        per_n[n] = entry
    return per_n, {"rel_error_max": rel_max}


def _agg_qsl(cfg, by_n):
    per_n = {}
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        ratios = np.array([r["trace_ratio"] for r in good])
        per_n[n] = {
            "count": len(good),
            "failures": failed,
            "median_trace_ratio": float(np.median(ratios)) if ratios.size else None,
        }
    target = float(np.trace(fisher_info_inverse(cfg.theta)))
    return per_n, {"target_trace": target}


def _agg_lil(cfg, by_n):
    v = np.array(cfg.direction) if cfg.direction is not None else _unit_vector(cfg.p)
    inv = fisher_info_inverse(cfg.theta)
    envelope = float(math.sqrt(v @ inv @ v))
    per_n = {}
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        runmax = np.array([r["running_max_abs_s"] for r in good])
        entry = {"count": len(good), "failures": failed}
        if runmax.size:
            entry["within_share"] = float(np.mean(runmax <= 2.0 * envelope))
            entry["max_running"] = float(runmax.max())
        else:
            entry["within_share"] = None
            entry["max_running"] = None
        per_n[n] = entry
    n_last = max(per_n) if per_n else None
    final_share = per_n[n_last]["within_share"] if n_last is not None else None
    return per_n, {
        "envelope": envelope,
        "final_within_share": final_share,
        "majority_within": bool(final_share is not None and final_share > 0.5),
    }


def _agg_lan_remainder(cfg, by_n):
    per_n = {}
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        rems = np.array([abs(r["remainder"]) for r in good])
        per_n[n] = {
            "count": len(good),
            "failures": failed,
            "median_abs_remainder": float(np.median(rems)) if rems.size else None,
        }
    meds = [
        per_n[n]["median_abs_remainder"]
        for n in sorted(per_n)
        if per_n[n]["median_abs_remainder"] is not None
    ]
    monotone = bool(
        len(meds) >= 2 and all(b <= a for a, b in zip(meds, meds[1:]))
    )
    return per_n, {"medians_monotone_decreasing": monotone}


def _agg_test(cfg, by_n):
    crit = chi2_quantile(cfg.p, cfg.alpha)
    per_n = {}
    for n, rows_n in sorted(by_n.items()):
        good, failed = _split_ok(rows_n)
        rejects = np.array([r["reject"] for r in good], dtype=float)
        entry = {"count": len(good), "failures": failed}
        if rejects.size:
            rate = float(np.mean(rejects))
            entry["rejection_rate"] = rate
            entry["rate_stderr"] = float(
                math.sqrt(max(rate * (1.0 - rate), 0.0) / rejects.size)
            )
        else:
            entry["rejection_rate"] = None
            entry["rate_stderr"] = None
        per_n[n] = entry
    summary = {"alpha": cfg.alpha, "critical": float(crit)}
    if cfg.experiment == "test_power":
        u = np.array(cfg.shift)
        lam = float(u @ fisher_info(cfg.theta) @ u)
        summary["noncentrality"] = lam
        summary["predicted_power"] = float(noncentral_chi2_sf(crit, cfg.p, lam))
    return per_n, summary


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def run_experiment(
    cfg: ExperimentConfig,
    jobs: int = 1,
    progress: Callable[[str], None] | None = None,
) -> ExperimentReport:
    """Run the configured experiment and return its report.

    ``jobs > 1`` distributes replicates over a process pool; results are
    merged in replicate order, so reports are identical for any job count.
    """
    cfg.validate()
    t0 = time.perf_counter()
    worker = _WORKERS[cfg.experiment]
    reps = cfg.replicates
    tick = max(1, reps // 10)
    chunks: list[list[dict]] = []
    if jobs <= 1:
        for r in range(reps):
            chunks.append(worker(cfg, r))
            if progress is not None and (r + 1) % tick == 0:
                progress(f"[{cfg.experiment}] replicate {r + 1}/{reps}")
    else:
        fn = partial(_call_worker, cfg)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunksize = max(1, reps // (4 * jobs))
            for r, result in enumerate(pool.map(fn, range(reps), chunksize=chunksize)):
                chunks.append(result)
                if progress is not None and (r + 1) % tick == 0:
                    progress(f"[{cfg.experiment}] replicate {r + 1}/{reps}")
    rows = sorted(chain.from_iterable(chunks), key=lambda r: (r["replicate"], r["n"]))
    per_n, summary = aggregate(cfg, rows)
    failures = sum(1 for r in rows if not r["ok"])
    failure_rate = failures / len(rows) if rows else 0.0
    report = ExperimentReport(
        experiment=cfg.experiment,
        config=cfg.to_json_dict(),
        columns=_columns(cfg),
        rows=rows,
        per_n=per_n,
        summary=summary,
        failures=failures,
        failure_rate=failure_rate,
        passed=bool(failure_rate <= FAILURE_BUDGET),
        runtime_seconds=time.perf_counter() - t0,
    )
    return report


def _call_worker(cfg: ExperimentConfig, rep: int) -> list[dict]:
    return _WORKERS[cfg.experiment](cfg, rep)


def _run_named(name: str, cfg: ExperimentConfig, jobs: int, progress) -> ExperimentReport:
    if cfg.experiment != name:
        cfg = replace(cfg, experiment=name)
    return run_experiment(cfg, jobs=jobs, progress=progress)


def run_consistency(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("consistency", cfg, jobs, progress)


def run_clt(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("clt", cfg, jobs, progress)


def run_qsl(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("qsl", cfg, jobs, progress)


def run_lil(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("lil", cfg, jobs, progress)


def run_lan_remainder(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("lan_remainder", cfg, jobs, progress)


def run_test_size(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("test_size", cfg, jobs, progress)


def run_test_power(cfg, jobs: int = 1, progress=None) -> ExperimentReport:
    return _run_named("test_power", cfg, jobs, progress)
