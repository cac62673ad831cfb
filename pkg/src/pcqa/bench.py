"""Benchmark harness: opinion-score processing and model evaluation.

Raw subjective scores are z-normalized per subject, screened for outliers
per stimulus, rescaled to [0, 100], and averaged into mean opinion scores.
Objective metrics are then mapped through a fitted monotone logistic and
judged by PLCC/SRCC/RMSE, with pairwise statistical significance decided by
a two-sided F-test on prediction residual variances.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize, stats


@dataclass(frozen=True)
class SubjectiveDataset:
    """Raw opinion scores plus the derived quantities once processed."""

    scores: dict[str, dict[str, float]]  # stimulus -> subject -> raw score
    sessions: dict[tuple[str, str], str] = field(default_factory=dict)
    groups: dict[str, tuple[str, str]] = field(default_factory=dict)  # stim -> (content, distortion)
    rescaled: dict[str, dict[str, float]] = field(default_factory=dict)
    rejected: frozenset = frozenset()
    mos: dict[str, float] = field(default_factory=dict)
    mos_std: dict[str, float] = field(default_factory=dict)

    @property
    def stimuli(self) -> list[str]:
        return sorted(self.scores)

    @property
    def subjects(self) -> list[str]:
        return sorted({s for by_subj in self.scores.values() for s in by_subj})


def compute_mos(raw: SubjectiveDataset) -> SubjectiveDataset:
    """Normalize, screen, rescale, and average raw opinion scores.

    Z-scores are computed per subject (per session when session labels are
    present). Screening is score-level only, per stimulus: with kurtosis in
    [2, 4] scores beyond 2 standard deviations are dropped, otherwise beyond
    sqrt(20) standard deviations; whole participants are never removed.
    Surviving z-scores are min-max rescaled to [0, 100] over the dataset.
    """
    if not raw.scores:
        raise ValueError("no scores to process")

    # Per-subject-per-session normalization units.
    unit_values: dict[tuple[str, str], list[float]] = {}
    for stim, by_subj in raw.scores.items():
        for subj, score in by_subj.items():
            unit = (subj, raw.sessions.get((stim, subj), ""))
            unit_values.setdefault(unit, []).append(score)
    unit_stats = {
        unit: (float(np.mean(v)), float(np.std(v, ddof=1)) if len(v) > 1 else 0.0)
        for unit, v in unit_values.items()
    }

    zscores: dict[str, dict[str, float]] = {}
    for stim, by_subj in raw.scores.items():
        zscores[stim] = {}
        for subj, score in by_subj.items():
            mean, std = unit_stats[(subj, raw.sessions.get((stim, subj), ""))]
            zscores[stim][subj] = (score - mean) / std if std > 0 else 0.0

    rejected: set[tuple[str, str]] = set()
    for stim, by_subj in zscores.items():
        values = np.array(list(by_subj.values()))
        if len(values) < 2:
            continue
        std = float(values.std(ddof=1))
        if std == 0.0:
            continue
        mean = float(values.mean())
        m2 = float(((values - mean) ** 2).mean())
        m4 = float(((values - mean) ** 4).mean())
        kurtosis = m4 / (m2 * m2) if m2 > 0 else 3.0
        threshold = 2.0 if 2.0 <= kurtosis <= 4.0 else math.sqrt(20.0)
        for subj, z in by_subj.items():
            if abs(z - mean) > threshold * std:
                rejected.add((stim, subj))

    surviving = [
        z
        for stim, by_subj in zscores.items()
        for subj, z in by_subj.items()
        if (stim, subj) not in rejected
    ]
    for stim, by_subj in zscores.items():
        kept = sum((stim, subj) not in rejected for subj in by_subj)
        if kept < 2:
            raise ValueError(f"stimulus '{stim}' has {kept} valid scores after screening")

    z_lo, z_hi = min(surviving), max(surviving)
    span = z_hi - z_lo

    def rescale(z: float) -> float:
        return 100.0 * (z - z_lo) / span if span > 0 else 50.0

    rescaled: dict[str, dict[str, float]] = {}
    mos: dict[str, float] = {}
    mos_std: dict[str, float] = {}
    for stim, by_subj in zscores.items():
        kept = {
            subj: rescale(z) for subj, z in by_subj.items() if (stim, subj) not in rejected
        }
        rescaled[stim] = kept
        values = np.array(list(kept.values()))
        mos[stim] = float(values.mean())
        mos_std[stim] = float(values.std(ddof=1))

    return replace(
        raw,
        rescaled=rescaled,
        rejected=frozenset(rejected),
        mos=mos,
        mos_std=mos_std,
    )


def subject_performance(ds: SubjectiveDataset) -> dict[str, tuple[float, float]]:
    """Per-subject (PLCC, SRCC) between their ratings and the MOS."""
    if not ds.mos:
        raise ValueError("run compute_mos first")
    out: dict[str, tuple[float, float]] = {}
    for subj in ds.subjects:
        pairs = [
            (by_subj[subj], ds.mos[stim])
            for stim, by_subj in ds.rescaled.items()
            if subj in by_subj
        ]
        if len(pairs) < 3:
            continue
        ratings = np.array([p[0] for p in pairs])
        mos = np.array([p[1] for p in pairs])
        if ratings.std() == 0 or mos.std() == 0:
            continue
        plcc, srcc, _ = correlations(ratings, mos)
        out[subj] = (plcc, srcc)
    return out


# ---------------------------------------------------------------------------
# Logistic mapping and correlation criteria
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    params: tuple[float, ...] | None  # (b1, b2, b3, b4, b5); None when degenerate
    mapped: np.ndarray
    residuals: np.ndarray
    degenerate: bool = False


def _logistic(x: np.ndarray, b1: float, b2: float, b3: float, b4: float, b5: float) -> np.ndarray:
    t = np.clip(b2 * (x - b3), -500.0, 500.0)
    return b1 * (0.5 - 1.0 / (1.0 + np.exp(t))) + b4 * x + b5


def fit_logistic(
    objective: np.ndarray, mos: np.ndarray, linear_term: bool = True
) -> LogisticFit:
    """Least-squares fit of a monotone logistic from metric scores to MOS.

    The model is b1*(1/2 - 1/(1+exp(b2*(x-b3)))) + b4*x + b5, with b4
    pinned to zero when the linear term is disabled. Initialization is a
    fixed multi-start grid plus the closed-form linear fit, so the result is
    deterministic; the linear candidate also guarantees the mapping never
    correlates worse than the raw scores.
    """
    x = np.asarray(objective, dtype=np.float64)
    y = np.asarray(mos, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("objective and mos must be equal-length vectors")
    if len(x) < 5:
        raise ValueError("need at least 5 points to fit")
    if x.std() == 0.0:
        return LogisticFit(params=None, mapped=x.copy(), residuals=y - x, degenerate=True)

    slope, intercept = np.polyfit(x, y, 1)
    spread = float(y.max() - y.min()) or 1.0
    sign = 1.0 if slope >= 0 else -1.0
    sx = float(x.std())
    starts = [np.array([0.0, 1.0 / sx, float(np.median(x)), slope, intercept])]
    for q in (0.25, 0.5, 0.75):
        for rate in (1.0, 4.0):
            starts.append(
                np.array(
                    [sign * spread, rate / sx, float(np.quantile(x, q)), 0.0, float(y.mean())]
                )
            )

    def residual_fn(params: np.ndarray) -> np.ndarray:
        b1, b2, b3, b4, b5 = params
        if not linear_term:
            b4 = 0.0
        return _logistic(x, b1, b2, b3, b4, b5) - y

    # The closed-form linear fit is itself a candidate (not just a start), so
    # the chosen mapping can never have a larger SSE than the best line.
    candidates = [starts[0]] if linear_term else []
    for start in starts:
        try:
            fit = optimize.least_squares(residual_fn, start, max_nfev=2000)
        except Exception:
            continue
        params = fit.x.copy()
        if not linear_term:
            params[3] = 0.0
        candidates.append(params)
    if not candidates:
        candidates = [starts[1]]

    best = min(candidates, key=lambda p: float(np.sum(residual_fn(p) ** 2)))
    if not linear_term:
        best[3] = 0.0
    mapped = _logistic(x, *best)
    return LogisticFit(params=tuple(float(v) for v in best), mapped=mapped, residuals=y - mapped)


def correlations(pred: np.ndarray, mos: np.ndarray) -> tuple[float, float, float]:
    """(PLCC, SRCC, RMSE) between predictions and MOS.

    SRCC uses average ranks for ties, so it is invariant under strictly
    monotone transforms of the predictions.
    """
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if pred.shape != mos.shape or pred.ndim != 1 or len(pred) < 3:
        raise ValueError("need equal-length vectors of at least 3 samples")
    if pred.std() == 0.0 or mos.std() == 0.0:
        raise ValueError("zero variance input")
    plcc = float(np.corrcoef(pred, mos)[0, 1])
    rank_pred = stats.rankdata(pred, method="average")
    rank_mos = stats.rankdata(mos, method="average")
    srcc = float(np.corrcoef(rank_pred, rank_mos)[0, 1])
    rmse = float(np.sqrt(np.mean((pred - mos) ** 2)))
    return plcc, srcc, rmse


def significance_matrix(
    residuals: dict[str, np.ndarray], confidence: float = 0.95
) -> tuple[list[str], list[list[str]]]:
    """Pairwise variance F-test matrix over prediction residuals.

    Entry [row][col] is '1' when the row model's residual variance is
    significantly smaller than the column model's (two-sided test at the
    given confidence), '0' when significantly larger, '-' otherwise.
    """
    names = list(residuals)
    vectors = [np.asarray(residuals[n], dtype=np.float64) for n in names]
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise ValueError(f"residual vectors differ in length: {sorted(lengths)}")
    n = lengths.pop()
    if n < 50:
        raise ValueError(f"need at least 50 residuals for the Gaussian approximation, got {n}")

    alpha = 1.0 - confidence
    lo = stats.f.ppf(alpha / 2.0, n - 1, n - 1)
    hi = stats.f.ppf(1.0 - alpha / 2.0, n - 1, n - 1)
    variances = [float(v.var(ddof=1)) for v in vectors]

    matrix = [["-"] * len(names) for _ in names]
    for i in range(len(names)):
        for j in range(len(names)):
            if i == j:
                continue
            if variances[j] == 0.0 and variances[i] == 0.0:
                continue
            ratio = variances[i] / variances[j] if variances[j] > 0 else np.inf
            if ratio < lo:
                matrix[i][j] = "1"
            elif ratio > hi:
                matrix[i][j] = "0"
    return names, matrix


# ---------------------------------------------------------------------------
# Batch evaluation and reporting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricEval:
    plcc: float
    srcc: float
    rmse: float
    params: tuple[float, ...] | None
    residuals: np.ndarray


@dataclass(frozen=True)
class EvalResult:
    stimuli: list[str]
    overall: dict[str, MetricEval]
    subsets: dict[str, dict[str, tuple[float, float, float]]]  # subset -> metric -> (plcc, srcc, rmse)
    significance: tuple[list[str], list[list[str]]]


def _evaluate(values: np.ndarray, mos: np.ndarray) -> tuple[LogisticFit, float, float, float]:
    fit = fit_logistic(values, mos)
    plcc, _, rmse = correlations(fit.mapped, mos)
    _, srcc, _ = correlations(values, mos)
    return fit, plcc, srcc, rmse


def run_benchmark(
    metric_scores: dict[str, dict[str, float]],
    mos: dict[str, float],
    groups: dict[str, tuple[str, str]] | None = None,
) -> EvalResult:
    """Evaluate every metric against the MOS, overall and per subset.

    ``metric_scores`` maps metric name -> stimulus -> objective value; every
    metric must cover exactly the MOS stimulus set, otherwise the orphans are
    reported. ``groups`` optionally maps stimulus -> (content, distortion);
    distortion labels must partition the stimulus universe.
    """
    stimuli = sorted(mos)
    for name, per_stim in metric_scores.items():
        missing = sorted(set(stimuli) - set(per_stim))
        extra = sorted(set(per_stim) - set(stimuli))
        if missing or extra:
            raise ValueError(
                f"metric '{name}' does not align with MOS stimuli: "
                f"missing={missing[:10]} extra={extra[:10]}"
            )
    if groups is not None:
        ungrouped = sorted(set(stimuli) - set(groups))
        if ungrouped:
            raise ValueError(f"stimuli missing from the subset manifest: {ungrouped[:10]}")

    mos_vec = np.array([mos[s] for s in stimuli])
    overall: dict[str, MetricEval] = {}
    residuals: dict[str, np.ndarray] = {}
    for name, per_stim in metric_scores.items():
        values = np.array([per_stim[s] for s in stimuli])
        fit, plcc, srcc, rmse = _evaluate(values, mos_vec)
        overall[name] = MetricEval(plcc=plcc, srcc=srcc, rmse=rmse, params=fit.params, residuals=fit.residuals)
        residuals[name] = fit.residuals

    subsets: dict[str, dict[str, tuple[float, float, float]]] = {}
    if groups is not None:
        by_subset: dict[str, list[str]] = {}
        for stim in stimuli:
            content, distortion = groups[stim]
            by_subset.setdefault(f"content:{content}", []).append(stim)
            by_subset.setdefault(f"distortion:{distortion}", []).append(stim)
        for subset, members in sorted(by_subset.items()):
            if len(members) < 5:
                continue
            sub_mos = np.array([mos[s] for s in members])
            row: dict[str, tuple[float, float, float]] = {}
            for name, per_stim in metric_scores.items():
                values = np.array([per_stim[s] for s in members])
                if values.std() == 0.0 or sub_mos.std() == 0.0:
                    row[name] = (float("nan"), float("nan"), float("nan"))
                    continue
                _, plcc, srcc, rmse = _evaluate(values, sub_mos)
                row[name] = (plcc, srcc, rmse)
            subsets[subset] = row

    signif = (
        significance_matrix(residuals)
        if len(residuals) > 1 and len(stimuli) >= 50
        else (list(residuals), [["-"] * len(residuals) for _ in residuals])
    )
    return EvalResult(stimuli=stimuli, overall=overall, subsets=subsets, significance=signif)


# --- CSV / JSON interchange -------------------------------------------------


def load_metric_csv(paths: list[str | Path]) -> dict[str, dict[str, float]]:
    """Read metric CSVs with columns stimulus_id, metric_id, value."""
    out: dict[str, dict[str, float]] = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"stimulus_id", "metric_id", "value"}
            if reader.fieldnames is None or not required <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected columns {sorted(required)}")
            for row in reader:
                out.setdefault(row["metric_id"], {})[row["stimulus_id"]] = float(row["value"])
    return out


def load_mos_csv(path: str | Path) -> tuple[dict[str, float], SubjectiveDataset | None]:
    """Read a MOS CSV; raw per-subject scores are processed on the fly.

    Accepts either precomputed columns (stimulus_id, mos) or raw columns
    (stimulus_id, subject_id, raw_score[, session]).
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = set(reader.fieldnames or [])
        if {"stimulus_id", "mos"} <= fields:
            mos = {row["stimulus_id"]: float(row["mos"]) for row in reader}
            return mos, None
        if {"stimulus_id", "subject_id", "raw_score"} <= fields:
            scores: dict[str, dict[str, float]] = {}
            sessions: dict[tuple[str, str], str] = {}
            for row in reader:
                scores.setdefault(row["stimulus_id"], {})[row["subject_id"]] = float(
                    row["raw_score"]
                )
                if "session" in fields and row.get("session"):
                    sessions[(row["stimulus_id"], row["subject_id"])] = row["session"]
            ds = compute_mos(SubjectiveDataset(scores=scores, sessions=sessions))
            return dict(ds.mos), ds
        raise ValueError(
            f"{path}: expected columns (stimulus_id, mos) or (stimulus_id, subject_id, raw_score)"
        )


def load_groups_json(path: str | Path) -> dict[str, tuple[str, str]]:
    data = json.loads(Path(path).read_text())
    out = {}
    for stim, entry in data.items():
        out[stim] = (str(entry.get("content", "")), str(entry.get("distortion", "")))
    return out


def _fmt(value: float) -> str:
    return "nan" if value != value else f"{value:.4f}"


def render_markdown(result: EvalResult) -> str:
    """Human-readable report: one table per criterion plus the significance matrix."""
    metrics = list(result.overall)
    lines: list[str] = []
    for title, pick in (("PLCC", 0), ("SRCC", 1), ("RMSE", 2)):
        lines.append(f"## {title}")
        lines.append("| Subset | " + " | ".join(metrics) + " |")
        lines.append("|---" * (len(metrics) + 1) + "|")
        for subset, row in result.subsets.items():
            cells = [_fmt(row[m][pick]) for m in metrics]
            lines.append(f"| {subset} | " + " | ".join(cells) + " |")
        overall_cells = [
            _fmt((result.overall[m].plcc, result.overall[m].srcc, result.overall[m].rmse)[pick])
            for m in metrics
        ]
        lines.append("| **All** | " + " | ".join(overall_cells) + " |")
        lines.append("")
    names, matrix = result.significance
    lines.append("## Statistical significance (row vs column)")
    lines.append("| | " + " | ".join(names) + " |")
    lines.append("|---" * (len(names) + 1) + "|")
    for name, row in zip(names, matrix):
        lines.append(f"| {name} | " + " | ".join(row) + " |")
    lines.append("")
    return "\n".join(lines)


def write_report(result: EvalResult, out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "stimuli": result.stimuli,
        "overall": {
            name: {
                "plcc": ev.plcc,
                "srcc": ev.srcc,
                "rmse": ev.rmse,
                "logistic_params": ev.params,
            }
            for name, ev in result.overall.items()
        },
        "subsets": {
            subset: {m: {"plcc": v[0], "srcc": v[1], "rmse": v[2]} for m, v in row.items()}
            for subset, row in result.subsets.items()
        },
        "significance": {"metrics": result.significance[0], "matrix": result.significance[1]},
    }
    (out_dir / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out_dir / "report.md").write_text(render_markdown(result))
    with open(out_dir / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subset", "metric", "plcc", "srcc", "rmse"])
        for subset, row in result.subsets.items():
            for metric, (plcc, srcc, rmse) in row.items():
                writer.writerow([subset, metric, repr(plcc), repr(srcc), repr(rmse)])
        for metric, ev in result.overall.items():
            writer.writerow(["All", metric, repr(ev.plcc), repr(ev.srcc), repr(ev.rmse)])
