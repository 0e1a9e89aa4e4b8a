"""Synthetic binary-decoding and sparse-unmixing experiments.

Decoding: ``x`` uniform on ``{0,1}^P``, rows of ``H`` drawn from
``N(0, Sigma)`` with ``Sigma_ij = rho^|i-j|``, Gaussian noise at a given
SNR.  Methods: LS (least squares), AR (ADMM on the box relaxation), AN
(ADMM with the binary projection), LL (Lasry-Lions homotopy); all start
from LS and are projected onto ``{0,1}`` by thresholding at 0.5.

Unmixing: ``a`` has ``sparsity`` nonzeros drawn from a flat Dirichlet,
``U`` is a Gaussian dictionary with unit-norm columns, objective
``||y - U a||^2 + beta ||a||_0``.  Methods: LL and AN from ``a = 0``.

Each trial draws from its own generator seeded by ``(seed, trial)``, so
trials are independent of execution order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .functions import BinaryIndicator, BoxIndicator, ScaledL0
from .solvers import (
    AdmmConfig,
    CompositeProblem,
    HomotopySchedule,
    solve_admm,
    solve_homotopy,
    solve_ls,
)

logger = logging.getLogger(__name__)

__all__ = [
    "DecodingConfig",
    "UnmixConfig",
    "TrialMetrics",
    "ExperimentReport",
    "DECODING_METHODS",
    "UNMIX_METHODS",
    "SWEEP_LAMBDAS",
    "trial_rng",
    "toeplitz_covariance",
    "gen_decoding_instance",
    "gen_unmix_instance",
    "project_binary",
    "ber",
    "rmse",
    "support_metrics",
    "run_decoding",
    "run_unmix",
    "run_unmix_sweep",
    "format_float",
    "sweep_csv",
    "decoding_schedule",
    "SWEEP_COLUMNS",
]

DECODING_METHODS = ("LS", "AR", "AN", "LL")
UNMIX_METHODS = ("LL", "AN")
SWEEP_LAMBDAS = (1e4, 1e3, 1e2, 1e1, 1.0, 1e-1, 1e-2)

# ground-truth stopping used by the harness (never inside the library solvers)
ORACLE_RMSE_TOL = 1e-9


def format_float(v) -> str:
    """Full-precision (17 significant digit) decimal text."""
    return format(float(v), ".17g")


def decoding_schedule(**overrides) -> HomotopySchedule:
    """LL schedule of the decoding runs.

    The 14 stages of 70 backtracking steps give a budget of about 10^3
    gradient steps per trial.
    """
    kw = dict(step_rule="backtracking", inner_iters=70)
    kw.update(overrides)
    return HomotopySchedule.decoding(**kw)


@dataclass(frozen=True)
class DecodingConfig:
    N: int = 20
    P: int = 40
    rho: float = 0.0
    snr_db: float = 30.0
    trials: int = 50
    seed: int = 0
    schedule: HomotopySchedule = field(default_factory=lambda: decoding_schedule())
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    channel: str = "gaussian"

    def __post_init__(self):
        if int(self.N) < 1 or int(self.P) < 1:
            raise ValueError("N and P must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho!r}")
        if int(self.trials) < 1:
            raise ValueError("trials must be positive")
        if int(self.seed) < 0:
            raise ValueError("seed must be nonnegative")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must be a number or inf")
        if self.channel not in ("gaussian", "identity"):
            raise ValueError("channel must be 'gaussian' or 'identity'")
        if self.channel == "identity" and int(self.N) != int(self.P):
            raise ValueError("identity channel needs N == P")


@dataclass(frozen=True)
class UnmixConfig:
    N: int = 224
    P: int = 224
    sparsity: int = 5
    snr_db: float = 30.0
    beta: float = 1e-6
    trials: int = 50
    seed: int = 0
    lambda1: float = 1e3
    inner_iters: int = 20
    step_rule: str = "backtracking"
    polish: bool = True
    schedule: Optional[HomotopySchedule] = None
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    zero_tol: float = 1e-8
    dictionary: str = "gaussian"

    def __post_init__(self):
        if int(self.N) < 1 or int(self.P) < 1:
            raise ValueError("N and P must be positive")
        if not 1 <= int(self.sparsity) <= int(self.P):
            raise ValueError(f"sparsity must lie in [1, P={self.P}], got {self.sparsity}")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if not self.lambda1 > 0:
            raise ValueError("lambda1 must be positive")
        if int(self.trials) < 1:
            raise ValueError("trials must be positive")
        if int(self.seed) < 0:
            raise ValueError("seed must be nonnegative")
        if self.dictionary not in ("gaussian", "identity"):
            raise ValueError("dictionary must be 'gaussian' or 'identity'")

    def homotopy_schedule(self) -> HomotopySchedule:
        if self.schedule is not None:
            return self.schedule
        return HomotopySchedule.unmixing(self.lambda1, inner_iters=self.inner_iters,
                                         step_rule=self.step_rule, polish=self.polish)


@dataclass(frozen=True)
class TrialMetrics:
    ber: float = math.nan
    rmse: float = math.nan
    sensitivity: float = math.nan
    specificity: float = math.nan
    cost: float = math.nan


METRIC_NAMES = tuple(f.name for f in fields(TrialMetrics))


@dataclass
class ExperimentReport:
    """Per-trial rows and per-method aggregates."""

    kind: str
    config: dict
    methods: Tuple[str, ...]
    trials: Dict[str, List[TrialMetrics]]
    errors: List[Tuple[int, str, str]] = field(default_factory=list)

    def values(self, method, metric) -> np.ndarray:
        return np.array([getattr(m, metric) for m in self.trials[method]], dtype=float)

    def mean(self, method, metric) -> float:
        v = self.values(method, metric)
        v = v[~np.isnan(v)]
        return float(np.mean(v)) if v.size else math.nan

    def std(self, method, metric) -> float:
        v = self.values(method, metric)
        v = v[~np.isnan(v)]
        return float(np.std(v)) if v.size else math.nan

    def aggregate(self) -> Dict[str, Dict[str, Tuple[float, float]]]:
        return {
            m: {k: (self.mean(m, k), self.std(m, k)) for k in METRIC_NAMES}
            for m in self.methods
        }

    def key_columns(self):
        if self.kind == "decoding":
            keys = ("N", "P", "rho", "snr_db")
        else:
            keys = ("N", "P", "sparsity", "snr_db", "lambda1")
        return keys, [self.config[k] for k in keys]

    def trials_csv(self, header=True, lead: Sequence[Tuple[str, object]] = ()) -> str:
        """One row per (trial, method); ``lead`` adds constant leading columns."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(tuple(k for k, _ in lead) + ("trial", "method") + METRIC_NAMES)
        prefix = [_key_text(v) for _, v in lead]
        n = len(next(iter(self.trials.values())))
        for t in range(n):
            for m in self.methods:
                row = self.trials[m][t]
                w.writerow(prefix + [t, m]
                           + [format_float(getattr(row, k)) for k in METRIC_NAMES])
        return buf.getvalue()

    def table(self, metric="ber", scale=100.0) -> str:
        """Aligned text table of mean ``metric`` per method (one row)."""
        keys, vals = self.key_columns()
        head = list(keys) + list(self.methods)
        row = [_key_text(v) for v in vals] + [
            f"{scale * self.mean(m, metric):.2f}" for m in self.methods]
        width = [max(len(a), len(b)) for a, b in zip(head, row)]
        fmt = "  ".join("{:>%d}" % w for w in width)
        return fmt.format(*head) + "\n" + fmt.format(*row) + "\n"

    def aggregate_csv(self, header=True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        keys, vals = self.key_columns()
        cols = []
        for k in METRIC_NAMES:
            cols += [f"mean_{k}", f"std_{k}"]
        if header:
            w.writerow(keys + ("method",) + tuple(cols))
        for m in self.methods:
            stats = []
            for k in METRIC_NAMES:
                stats += [format_float(self.mean(m, k)), format_float(self.std(m, k))]
            w.writerow([_key_text(v) for v in vals] + [m] + stats)
        return buf.getvalue()


SWEEP_COLUMNS = ("lambda1", "rmse", "sensitivity", "specificity", "cost")


def sweep_csv(reports: Sequence["ExperimentReport"], method="LL") -> str:
    """Mean metrics of ``method`` per ``lambda1``, one row per report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in reports:
        w.writerow([format_float(float(r.config["lambda1"]))]
                   + [format_float(r.mean(method, k)) for k in SWEEP_COLUMNS[1:]])
    return buf.getvalue()


def _key_text(v):
    return format_float(v) if isinstance(v, float) else str(v)


def trial_rng(seed, trial) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def toeplitz_covariance(P, rho) -> np.ndarray:
    return linalg.toeplitz(rho ** np.arange(P, dtype=float))


def _add_noise(rng, clean, snr_db):
    if math.isinf(snr_db) and snr_db > 0:
        return clean.copy()
    power = float(clean @ clean) / clean.size
    sigma = math.sqrt(power / 10.0 ** (snr_db / 10.0))
    return clean + sigma * rng.standard_normal(clean.size)


def gen_decoding_instance(cfg: DecodingConfig, trial: int):
    """Returns ``(H, y, x_true)`` for one trial."""
    rng = trial_rng(cfg.seed, trial)
    P, N = int(cfg.P), int(cfg.N)
    x = rng.integers(0, 2, size=P).astype(float)
    z = rng.standard_normal((N, P))
    if cfg.channel == "identity":
        H = np.eye(P)
    elif cfg.rho == 0:
        H = z
    else:
        L = linalg.cholesky(toeplitz_covariance(P, cfg.rho), lower=True)
        H = z @ L.T
    y = _add_noise(rng, H @ x, cfg.snr_db)
    return H, y, x


def gen_unmix_instance(cfg: UnmixConfig, trial: int):
    """Returns ``(U, y, a_true)`` for one trial."""
    rng = trial_rng(cfg.seed, trial)
    N, P, k = int(cfg.N), int(cfg.P), int(cfg.sparsity)
    if cfg.dictionary == "identity":
        if N != P:
            raise ValueError("identity dictionary needs N == P")
        U = np.eye(P)
    else:
        U = rng.standard_normal((N, P))
        U /= np.linalg.norm(U, axis=0)
    a = np.zeros(P)
    support = rng.choice(P, size=k, replace=False)
    a[support] = rng.dirichlet(np.ones(k))
    y = _add_noise(rng, U @ a, cfg.snr_db)
    return U, y, a


def project_binary(x) -> np.ndarray:
    return np.where(np.asarray(x, dtype=float) >= 0.5, 1.0, 0.0)


def ber(x_est_projected, x_true) -> float:
    a = np.asarray(x_est_projected, dtype=float)
    b = np.asarray(x_true, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.mean(a != b))


def rmse(x_est, x_true) -> float:
    d = np.asarray(x_est, dtype=float) - np.asarray(x_true, dtype=float)
    return float(np.linalg.norm(d) / math.sqrt(d.size))


def support_metrics(a_est, a_true, zero_tol=1e-8) -> Tuple[float, float]:
    """Sensitivity ``TP/(TP+FN)`` and specificity ``TN/(FP+TN)`` of a support.

    Conventions for empty classes: sensitivity is 1 when the true support
    is empty, specificity is 1 when there are no true zeros.
    """
    e = np.abs(np.asarray(a_est, dtype=float)) > zero_tol
    t = np.abs(np.asarray(a_true, dtype=float)) > zero_tol
    if e.shape != t.shape:
        raise ValueError(f"length mismatch: {e.shape} vs {t.shape}")
    tp = int(np.sum(e & t))
    fn = int(np.sum(~e & t))
    fp = int(np.sum(e & ~t))
    tn = int(np.sum(~e & ~t))
    sens = tp / (tp + fn) if tp + fn else 1.0
    spec = tn / (fp + tn) if fp + tn else 1.0
    return sens, spec


def _oracle_stops(x_true):
    def admm_stop(it, z):
        return rmse(z, x_true) < ORACLE_RMSE_TOL

    def homotopy_stop(stage, it, x, value):
        return rmse(x, x_true) < ORACLE_RMSE_TOL

    return admm_stop, homotopy_stop


def _decoding_trial(cfg: DecodingConfig, trial: int) -> Dict[str, TrialMetrics]:
    H, y, x_true = gen_decoding_instance(cfg, trial)
    x_ls = solve_ls(CompositeProblem(H, y))
    admm_stop, homotopy_stop = _oracle_stops(x_true)
    estimates = {
        "LS": x_ls,
        "AR": solve_admm(CompositeProblem(H, y, BoxIndicator(0.0, 1.0)), cfg.admm, x_ls,
                         callback=admm_stop).x,
        "AN": solve_admm(CompositeProblem(H, y, BinaryIndicator()), cfg.admm, x_ls,
                         callback=admm_stop).x,
        "LL": solve_homotopy(CompositeProblem(H, y, BinaryIndicator()), cfg.schedule,
                             x_ls, callback=homotopy_stop).x,
    }
    out = {}
    binary = CompositeProblem(H, y, BinaryIndicator())
    for m, x in estimates.items():
        xp = project_binary(x)
        out[m] = TrialMetrics(ber=ber(xp, x_true), rmse=rmse(x, x_true),
                              cost=binary.objective(xp))
    return out


def _unmix_trial(cfg: UnmixConfig, trial: int) -> Dict[str, TrialMetrics]:
    U, y, a_true = gen_unmix_instance(cfg, trial)
    prob = CompositeProblem(U, y, ScaledL0(cfg.beta))
    x0 = np.zeros(U.shape[1])
    estimates = {
        "LL": solve_homotopy(prob, cfg.homotopy_schedule(), x0).x,
        "AN": solve_admm(prob, cfg.admm, x0).x,
    }
    out = {}
    for m, a in estimates.items():
        sens, spec = support_metrics(a, a_true, cfg.zero_tol)
        out[m] = TrialMetrics(rmse=rmse(a, a_true), sensitivity=sens, specificity=spec,
                              cost=prob.objective(a))
    return out


def _run(kind, cfg, methods, trial_fn, threads):
    def guarded(t):
        try:
            return t, trial_fn(cfg, t), None
        except Exception as exc:  # recorded, the remaining trials still run
            logger.warning("%s trial %d failed: %s", kind, t, exc)
            return t, None, f"{type(exc).__name__}: {exc}"

    n = int(cfg.trials)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(guarded, range(n)))
    else:
        results = [guarded(t) for t in range(n)]

    trials = {m: [] for m in methods}
    errors = []
    for t, res, err in sorted(results, key=lambda r: r[0]):
        for m in methods:
            trials[m].append(res[m] if res is not None else TrialMetrics())
        if err is not None:
            errors.append((t, "*", err))
    echo = {
        k: v for k, v in asdict(cfg).items() if not isinstance(v, dict) and v is not None
    }
    return ExperimentReport(kind, echo, tuple(methods), trials, errors)


def run_decoding(cfg: DecodingConfig, threads: int = 1) -> ExperimentReport:
    return _run("decoding", cfg, DECODING_METHODS, _decoding_trial, threads)


def run_unmix(cfg: UnmixConfig, threads: int = 1) -> ExperimentReport:
    return _run("unmix", cfg, UNMIX_METHODS, _unmix_trial, threads)


def run_unmix_sweep(cfg: UnmixConfig, lambdas: Sequence[float] = SWEEP_LAMBDAS,
                    threads: int = 1) -> List[ExperimentReport]:
    """One report per ``lambda1``, all on the same trial instances."""
    from dataclasses import replace

    return [run_unmix(replace(cfg, lambda1=float(l), schedule=None), threads)
            for l in lambdas]
