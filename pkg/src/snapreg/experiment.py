"""Config-driven experiments: build a system, stream its trajectory through
the regressor, certify every step, and write CSV / report / plot outputs.

Config schema (JSON)::

    {
      "system": {"matrix": [[...], ...]}
             | {"spectrum": [2, 2, 3, 5], "seed": 7}
             | {"generator": "petersen_weighted", "dt": 0.1, "method": "expm"}
             | {"continuous_generator": [[...], ...], "dt": 0.1, "method": "expm"},
      "initial_condition": {"gaussian": true, "orthogonal_to": [0]}
                         | {"vector": [...]},
      "steps": 15,
      "rank_tolerance": 1e-9,
      "norms": ["spectral", "frobenius"],
      "output": {"dir": "out"},
      "seed": 0
    }

``system.seed`` defaults to the top-level seed. ``orthogonal_to`` lists
eigenvector indices (in decreasing-magnitude order) that the Gaussian draw
is projected away from; it requires a symmetric system.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from snapreg import io
from snapreg.bounds import BoundReport, bound_report
from snapreg.errors import ConfigError, InvalidInputError
from snapreg.linalg import RTOL, frobenius_norm
from snapreg.regression import ErrorCertificate, RegressionState, error_certificate, fit_batch
from snapreg.system import (
    InitialCondition,
    LtiSystem,
    SnapshotLog,
    decompose_initial_condition,
    discretize,
    simulate,
    synthesize_symmetric,
    weighted_petersen_laplacian,
)

CSV_HEADER = (
    "k,observed_rank,predicted_rank,err_spectral,err_frobenius,thm1_bound,"
    "thm2_bound,thm4_spectral,thm4_frobenius,degenerate,lemma3_residual"
)

NAMED_GENERATORS = {"petersen_weighted": weighted_petersen_laplacian}
NORMS = ("spectral", "frobenius")

# check tolerances used by the report
THM1_IDENTITY_RTOL = 1e-8
THM1_BOUND_ATOL = 1e-9
THM2_ATOL = 1e-9
THM4_SPECTRAL_RTOL = 1e-8
THM4_FROBENIUS_SQ_ATOL = 1e-7
LEMMA3_ATOL = 1e-9
RECOVERY_RTOL = 1e-8

PETERSEN_DEMO = {
    "system": {"generator": "petersen_weighted", "dt": 0.1, "method": "expm"},
    "initial_condition": {"gaussian": True},
    "steps": 15,
    "rank_tolerance": RTOL,
    "norms": list(NORMS),
    "output": {"dir": "out"},
    "seed": 0,
}


def _matrix(value: Any, name: str) -> NDArray[np.float64]:
    try:
        a = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, "must be a rectangular list of numbers") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise ConfigError(name, "must be a nonempty square matrix")
    if not np.all(np.isfinite(a)):
        raise ConfigError(name, "contains non-finite entries")
    return a


def _positive(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(name, "must be a positive number")
    return float(value)


def _integer(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(name, f"must be an integer >= {minimum}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    system: dict[str, Any]
    initial_condition: dict[str, Any] = field(default_factory=lambda: {"gaussian": True})
    steps: int = 10
    rank_tolerance: float = RTOL
    norms: tuple[str, ...] = NORMS
    out_dir: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = {"system", "initial_condition", "steps", "rank_tolerance", "norms", "output", "seed"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(extra[0], "unknown field")
        if "system" not in data:
            raise ConfigError("system", "missing")
        output = data.get("output", {})
        if not isinstance(output, dict):
            raise ConfigError("output", "must be an object")
        norms = data.get("norms", list(NORMS))
        if not isinstance(norms, list):
            raise ConfigError("norms", "must be a list")
        return cls(
            system=data["system"],
            initial_condition=data.get("initial_condition", {"gaussian": True}),
            steps=data.get("steps", 10),
            rank_tolerance=data.get("rank_tolerance", RTOL),
            norms=tuple(norms),
            out_dir=output.get("dir", "out"),
            seed=data.get("seed", 0),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "initial_condition": self.initial_condition,
            "steps": self.steps,
            "rank_tolerance": self.rank_tolerance,
            "norms": list(self.norms),
            "output": {"dir": self.out_dir},
            "seed": self.seed,
        }

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Replace fields whose override is not None (CLI flags)."""
        valid = {f.name for f in fields(self)}
        return replace(self, **{k: v for k, v in overrides.items() if v is not None and k in valid})

    def validate(self) -> None:
        _integer(self.steps, "steps", 1)
        _integer(self.seed, "seed", 0)
        _positive(self.rank_tolerance, "rank_tolerance")
        for nm in self.norms:
            if nm not in NORMS:
                raise ConfigError("norms", f"unknown norm {nm!r}")
        if not isinstance(self.system, dict):
            raise ConfigError("system", "must be an object")
        sources = [k for k in ("matrix", "spectrum", "generator", "continuous_generator") if k in self.system]
        if len(sources) != 1:
            raise ConfigError("system", "exactly one of matrix, spectrum, generator, continuous_generator is required")
        ic = self.initial_condition
        if not isinstance(ic, dict) or len({"gaussian", "vector"} & set(ic)) != 1:
            raise ConfigError("initial_condition", "exactly one of gaussian, vector is required")

    def build_system(self) -> LtiSystem:
        spec = self.system
        if "matrix" in spec:
            return LtiSystem.from_matrix(_matrix(spec["matrix"], "system.matrix"))
        if "spectrum" in spec:
            lam = spec["spectrum"]
            if not isinstance(lam, list) or not lam or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in lam
            ):
                raise ConfigError("system.spectrum", "must be a nonempty list of finite numbers")
            seed = _integer(spec.get("seed", self.seed), "system.seed", 0)
            return synthesize_symmetric(lam, seed)
        dt = _positive(spec.get("dt", 0.1), "system.dt")
        method = spec.get("method", "expm")
        if method not in ("expm", "euler"):
            raise ConfigError("system.method", "must be 'expm' or 'euler'")
        if "generator" in spec:
            name = spec["generator"]
            if name not in NAMED_GENERATORS:
                raise ConfigError("system.generator", f"unknown generator {name!r}")
            L = NAMED_GENERATORS[name]()
        else:
            L = _matrix(spec["continuous_generator"], "system.continuous_generator")
        return discretize(L, dt, method)

    def build_x0(self, system: LtiSystem) -> NDArray[np.float64]:
        ic = self.initial_condition
        if "vector" in ic:
            try:
                x = np.array(ic["vector"], dtype=float)
            except (TypeError, ValueError):
                raise ConfigError("initial_condition.vector", "must be a list of numbers") from None
            if x.shape != (system.n,) or not np.all(np.isfinite(x)):
                raise ConfigError("initial_condition.vector", f"must be {system.n} finite numbers")
            if not np.any(x):
                raise ConfigError("initial_condition.vector", "must be nonzero")
            return x
        rng = np.random.default_rng(self.seed)
        x = rng.standard_normal(system.n)
        drop = ic.get("orthogonal_to", [])
        if drop:
            if system.profile is None:
                raise ConfigError("initial_condition.orthogonal_to", "requires a symmetric system")
            if not isinstance(drop, list) or not all(
                isinstance(i, int) and not isinstance(i, bool) and 0 <= i < system.n for i in drop
            ):
                raise ConfigError("initial_condition.orthogonal_to", f"must list indices in 0..{system.n - 1}")
            Qs = system.profile.Q_full[:, sorted(set(drop))]
            x = x - Qs @ (Qs.T @ x)
        return x / np.linalg.norm(x)


@dataclass(frozen=True)
class StepRecord:
    k: int
    observed_rank: int
    predicted_rank: int | None
    empirical_spectral: float
    empirical_frobenius: float
    thm1_bound: float | None
    thm2_bound: float | None
    thm4_spectral: float | None
    thm4_frobenius: float | None
    degenerate: bool
    lemma3_residual: float | None
    # report-only values, not written to the CSV
    error_operator_norm: float | None = None
    identity_residual: float | None = None

    def csv_row(self) -> str:
        def f(v: Any) -> str:
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, int):
                return str(v)
            return repr(float(v))

        return ",".join(
            f(v)
            for v in (
                self.k,
                self.observed_rank,
                self.predicted_rank,
                self.empirical_spectral,
                self.empirical_frobenius,
                self.thm1_bound,
                self.thm2_bound,
                self.thm4_spectral,
                self.thm4_frobenius,
                self.degenerate,
                self.lemma3_residual,
            )
        )


def make_record(cert: ErrorCertificate, rep: BoundReport) -> StepRecord:
    return StepRecord(
        k=cert.k,
        observed_rank=rep.observed_rank,
        predicted_rank=rep.predicted_rank,
        empirical_spectral=cert.empirical_spectral,
        empirical_frobenius=cert.empirical_frobenius,
        thm1_bound=cert.thm1_bound,
        thm2_bound=rep.thm2_bound,
        thm4_spectral=rep.thm4_spectral_prediction,
        thm4_frobenius=rep.thm4_frobenius_prediction,
        degenerate=cert.degenerate,
        lemma3_residual=rep.lemma3_residual,
        error_operator_norm=cert.error_operator_norm,
        identity_residual=cert.identity_residual,
    )


@dataclass
class RunResult:
    config: ExperimentConfig
    system: LtiSystem
    x0: NDArray[np.float64]
    log: SnapshotLog
    estimate: NDArray[np.float64]
    records: list[StepRecord]
    reports: list[BoundReport]

    @property
    def stem(self) -> str:
        return f"seed{self.config.seed}"


def run(config: ExperimentConfig) -> RunResult:
    """Simulate, ingest snapshot by snapshot, and certify steps 1..steps."""
    system = config.build_system()
    x0 = config.build_x0(system)
    log = simulate(system, x0, config.steps)
    ic: InitialCondition | None = None
    if system.profile is not None:
        try:
            ic = decompose_initial_condition(system.profile, x0)
        except InvalidInputError:
            ic = None
    state = RegressionState(log.truncated(0), config.rank_tolerance)
    records, reports = [], []
    for k in range(1, config.steps + 1):
        state.ingest(log.states[:, k + 1])
        cert = error_certificate(state, system)
        rep = bound_report(system, ic, state, cert)
        records.append(make_record(cert, rep))
        reports.append(rep)
    return RunResult(config, system, x0, log, state.estimate, records, reports)


def emit_csv(records: list[StepRecord], path: str | Path) -> Path:
    if not records:
        raise InvalidInputError("no records to write")
    path = Path(path)
    path.write_text(CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in records))
    return path


def _verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def check_lines(result: RunResult) -> list[str]:
    """One ``name: PASS|FAIL|N/A (...)`` line per theorem-level check."""
    recs = result.records
    reps = {r.k: r for r in result.reports}
    A = result.system.A
    normA = frobenius_norm(A)
    lines = []

    live = [r for r in recs if not r.degenerate]
    if live:
        id_ok = all(r.identity_residual <= THM1_IDENTITY_RTOL * normA for r in live)
        bd_ok = all(r.error_operator_norm <= r.thm1_bound + THM1_BOUND_ATOL for r in live)
        worst = max(r.identity_residual for r in live)
        lines.append(
            f"thm1: {_verdict(id_ok and bd_ok)} ({len(live)} non-degenerate steps, "
            f"max ||A(I-E)-A_hat||_F = {worst:.3e}, bound dominance {'held' if bd_ok else 'violated'})"
        )
    else:
        lines.append("thm1: N/A (every step degenerate)")

    with_thm2 = [r for r in recs if r.thm2_bound is not None]
    if with_thm2:
        ok = all(r.empirical_frobenius**2 <= r.thm2_bound + THM2_ATOL for r in with_thm2)
        literal_ok = all(
            r.empirical_frobenius**2 <= reps[r.k].thm2_bound_literal + THM2_ATOL for r in with_thm2
        )
        lines.append(
            f"thm2: {_verdict(ok)} ({len(with_thm2)} steps, singular-value reading; "
            f"literal eigenvalue reading {'held' if literal_ok else 'violated'})"
        )
    else:
        reason = next(iter(reps.values())).inapplicable.get("thm2_bound", "no applicable step")
        lines.append(f"thm2: N/A ({reason})")

    with_rank = [r for r in recs if r.predicted_rank is not None]
    if with_rank:
        bad = [r.k for r in with_rank if r.observed_rank != r.predicted_rank]
        detail = "observed rank matched min(k+1, s) at every step" if not bad else f"mismatch at k={bad}"
        lines.append(f"thm3: {_verdict(not bad)} ({detail})")
    else:
        reason = next(iter(reps.values())).inapplicable.get("predicted_rank", "no applicable step")
        lines.append(f"thm3: N/A ({reason})")

    with_thm4 = [r for r in recs if r.thm4_spectral is not None]
    if with_thm4:
        ok = all(
            abs(r.empirical_spectral - r.thm4_spectral) <= THM4_SPECTRAL_RTOL * r.thm4_spectral
            and abs(r.empirical_frobenius**2 - r.thm4_frobenius**2) <= THM4_FROBENIUS_SQ_ATOL
            for r in with_thm4
        )
        last = with_thm4[-1]
        lines.append(
            f"thm4: {_verdict(ok)} (measured spectral {last.empirical_spectral:.12g} vs predicted "
            f"{last.thm4_spectral:.12g}; measured frobenius {last.empirical_frobenius:.12g} vs "
            f"predicted {last.thm4_frobenius:.12g}; {len(with_thm4)} steps with k >= s)"
        )
    else:
        reason = reps[recs[-1].k].inapplicable.get("thm4_spectral_prediction", "no applicable step")
        lines.append(f"thm4: N/A ({reason})")

    with_l3 = [r for r in recs if r.lemma3_residual is not None]
    if with_l3:
        worst = max(r.lemma3_residual for r in with_l3)
        lines.append(f"lemma3: {_verdict(worst <= LEMMA3_ATOL)} (max residual {worst:.3e})")
    else:
        reason = reps[recs[-1].k].inapplicable.get("lemma3_residual", "no applicable step")
        lines.append(f"lemma3: N/A ({reason})")

    n = result.system.n
    full = [r for r in recs if r.observed_rank == n]
    if full:
        ok = all(r.empirical_frobenius <= RECOVERY_RTOL * normA for r in full)
        lines.append(f"exact recovery: {_verdict(ok)} (rank n={n} first reached at k={full[0].k})")
    else:
        lines.append(f"exact recovery: N/A (numeric rank never reached n={n})")
    return lines


def emit_report(result: RunResult, path: str | Path) -> Path:
    cfg = result.config
    sys_ = result.system
    head = [
        "snapshot regression report",
        f"seed: {cfg.seed}",
        f"system: {sys_.source}, n={sys_.n}, symmetric={'yes' if sys_.symmetric else 'no'}",
        f"steps: {cfg.steps}",
        f"rank tolerance (relative): {cfg.rank_tolerance!r}",
        f"norms: {', '.join(cfg.norms)}",
    ]
    if sys_.profile is not None:
        prof = sys_.profile
        head.append(f"distinct eigenvalues s={prof.s}, multiplicities={list(prof.multiplicities)}")
        if prof.lambda_star is not None:
            head.append(f"lambda_star: {prof.lambda_star!r}")
    body = ["", "checks:"] + [f"  {line}" for line in check_lines(result)]
    table = ["", "per-step errors:"]
    for r in result.records:
        parts = [f"k={r.k:<3d}", f"rank={r.observed_rank:<3d}"]
        if "spectral" in cfg.norms:
            parts.append(f"err_2={r.empirical_spectral:.6e}")
        if "frobenius" in cfg.norms:
            parts.append(f"err_F={r.empirical_frobenius:.6e}")
        if r.degenerate:
            parts.append("degenerate")
        table.append("  " + "  ".join(parts))
    path = Path(path)
    path.write_text("\n".join(head + body + table) + "\n")
    return path


_PLOT_TEMPLATE = '''"""Error-vs-step bars with bound overlays for an experiment run.

Generated file; run with ``python {name}`` (needs matplotlib).
"""
import math

import matplotlib.pyplot as plt

RECORDS = {records!r}

def col(key):
    return [r[key] for r in RECORDS]

def masked(key, fn=lambda v: v):
    return [fn(v) if v is not None else math.nan for v in col(key)]

k = col("k")
fig, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
top.bar(k, col("err_spectral"), color="tab:blue", label="||A - A_hat||_2")
top.plot(k, masked("thm1_bound"), "r-o", label="||I - SP/Tr(SP)||_2 (bound on ||E||_2)")
top.plot(k, masked("thm4_spectral"), "k--", label="lambda_star")
top.set_ylabel("spectral norm")
top.legend(loc="upper right", fontsize="small")
bottom.bar(k, [v * v for v in col("err_frobenius")], color="tab:green", label="||A - A_hat||_F^2")
bottom.plot(k, masked("thm2_bound"), "r-o", label="simple-spectrum bound")
bottom.plot(k, masked("thm4_frobenius", lambda v: v * v), "k--", label="sum (m-1) lambda^2")
bottom.set_ylabel("squared Frobenius norm")
bottom.set_xlabel("k")
bottom.legend(loc="upper right", fontsize="small")
fig.tight_layout()
fig.savefig({png!r}, dpi=150)
'''


def emit_plot_script(records: list[StepRecord], path: str | Path) -> Path:
    if not records:
        raise InvalidInputError("no records to plot")
    keys = CSV_HEADER.split(",")
    rows = []
    for r in records:
        vals = (
            r.k, r.observed_rank, r.predicted_rank, r.empirical_spectral, r.empirical_frobenius,
            r.thm1_bound, r.thm2_bound, r.thm4_spectral, r.thm4_frobenius, r.degenerate, r.lemma3_residual,
        )
        rows.append(dict(zip(keys, vals)))
    path = Path(path)
    path.write_text(_PLOT_TEMPLATE.format(name=path.name, records=rows, png=path.with_suffix(".png").name))
    return path


def write_outputs(result: RunResult, out_dir: str | Path | None = None) -> dict[str, Path]:
    """Write records CSV, report, plot script, trajectory and final estimate."""
    out = Path(out_dir if out_dir is not None else result.config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.stem
    return {
        "records": emit_csv(result.records, out / f"records_{stem}.csv"),
        "report": emit_report(result, out / f"report_{stem}.txt"),
        "plot": emit_plot_script(result.records, out / f"plot_{stem}.py"),
        "trajectory": io.write_trajectory(out / f"trajectory_{stem}.csv", result.log.states),
        "estimate": io.write_matrix(out / f"estimate_{stem}.csv", result.estimate),
    }


@dataclass(frozen=True)
class FitStep:
    k: int
    rank: int
    residual: float


@dataclass
class FitResult:
    estimate: NDArray[np.float64]
    steps: list[FitStep]


def fit_states(states: NDArray[np.float64], rank_tolerance: float = RTOL) -> FitResult:
    """Fit an n x T trajectory with no ground truth: rank history and residuals only."""
    if states.shape[1] < 2:
        raise InvalidInputError("need at least two states (T >= 2)")
    log = SnapshotLog(states)
    state = RegressionState(log.truncated(0), rank_tolerance)
    steps = [FitStep(0, state.rank, state.residual())]
    for j in range(2, states.shape[1]):
        state.ingest(states[:, j])
        steps.append(FitStep(state.k, state.rank, state.residual()))
    estimate = fit_batch(log, rank_tolerance)
    return FitResult(estimate, steps)


def fit_external(
    csv_path: str | Path, rank_tolerance: float = RTOL, out_dir: str | Path | None = None
) -> tuple[FitResult, dict[str, Path]]:
    """Fit a trajectory CSV (one state per row) and write the model and rank history."""
    csv_path = Path(csv_path)
    result = fit_states(io.read_trajectory(csv_path), rank_tolerance)
    out = Path(out_dir) if out_dir is not None else csv_path.parent
    out.mkdir(parents=True, exist_ok=True)
    model = io.write_matrix(out / f"{csv_path.stem}_model.csv", result.estimate)
    hist = out / f"{csv_path.stem}_fit_steps.csv"
    hist.write_text(
        "k,rank,residual_frobenius\n" + "".join(f"{s.k},{s.rank},{s.residual!r}\n" for s in result.steps)
    )
    return result, {"model": model, "steps": hist}


__all__ = [
    "CSV_HEADER",
    "ExperimentConfig",
    "FitResult",
    "PETERSEN_DEMO",
    "RunResult",
    "StepRecord",
    "check_lines",
    "emit_csv",
    "emit_plot_script",
    "emit_report",
    "fit_external",
    "fit_states",
    "run",
    "write_outputs",
]
