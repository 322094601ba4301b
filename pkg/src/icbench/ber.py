"""Bit-error-rate scoring of continuous reconstructions against binary truth.

Four steps: fit class-conditional densities of reconstructed voxel values
for the silicon (0) and copper (1) classes, place the Bayes likelihood-
ratio threshold between the class means, count misclassifications per
class, and combine with the empirical class priors into an average BER.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DomainError

__all__ = [
    "ClassPdfModel",
    "BerReport",
    "fit_class_pdfs",
    "decision_threshold",
    "error_rates",
    "sweep_summary",
    "SINGLE_ERROR_LINE",
]

# one misclassified voxel per 16x16x8 sample
SINGLE_ERROR_LINE = 1.0 / 2048.0

_STD_FLOOR = 1e-6


@dataclass(frozen=True)
class ClassPdfModel:
    mean0: float
    std0: float
    mean1: float
    std1: float
    p0: float
    p1: float
    n0: int
    n1: int
    degenerate: bool = False  # one class absent from the evaluation set
    hist0: tuple | None = None  # optional empirical alternative: (edges, density)
    hist1: tuple | None = None

    @property
    def identical_pdfs(self) -> bool:
        return (
            abs(self.mean0 - self.mean1) < 1e-12 and abs(self.std0 - self.std1) < 1e-12
        )


def _pooled_values(approximants, ground_truths) -> tuple[np.ndarray, np.ndarray]:
    vals0, vals1 = [], []
    if len(approximants) != len(ground_truths):
        raise DomainError("approximant/ground-truth count mismatch")
    for approx, truth in zip(approximants, ground_truths):
        a = np.asarray(getattr(approx, "values", approx), dtype=np.float64)
        t = np.asarray(getattr(truth, "values", truth))
        if a.shape != t.shape:
            raise DomainError("approximant/ground-truth shape mismatch")
        vals0.append(a[t == 0])
        vals1.append(a[t == 1])
    return np.concatenate(vals0), np.concatenate(vals1)


def fit_class_pdfs(approximants, ground_truths, histogram_bins: int = 0) -> ClassPdfModel:
    """Pool voxel values by true class and fit per-class Gaussians.

    Class priors are the empirical class fractions of the evaluation set.
    With histogram_bins > 0 an empirical histogram alternative is stored
    alongside the Gaussian fit.
    """
    v0, v1 = _pooled_values(approximants, ground_truths)
    n0, n1 = v0.size, v1.size
    total = n0 + n1
    if total == 0:
        raise DomainError("empty evaluation set")
    degenerate = n0 == 0 or n1 == 0

    def fit(v, fallback_mean):
        if v.size == 0:
            return fallback_mean, _STD_FLOOR
        return float(v.mean()), max(float(v.std()), _STD_FLOOR)

    mean0, std0 = fit(v0, 0.0)
    mean1, std1 = fit(v1, 1.0)

    def hist(v):
        if histogram_bins <= 0 or v.size == 0:
            return None
        density, edges = np.histogram(v, bins=histogram_bins, range=(0.0, 1.0), density=True)
        return (tuple(edges), tuple(density))

    return ClassPdfModel(
        mean0=mean0, std0=std0, mean1=mean1, std1=std1,
        p0=n0 / total, p1=n1 / total, n0=n0, n1=n1,
        degenerate=degenerate, hist0=hist(v0), hist1=hist(v1),
    )


def decision_threshold(model: ClassPdfModel) -> float:
    """Likelihood-ratio crossing p1 N(t; m1, s1) = p0 N(t; m0, s0) between
    the class means; 0.5 when no interior crossing exists."""
    if model.degenerate or model.p0 <= 0 or model.p1 <= 0 or model.identical_pdfs:
        return 0.5
    m0, s0, m1, s1 = model.mean0, model.std0, model.mean1, model.std1
    lo, hi = min(m0, m1), max(m0, m1)
    # quadratic from equating the log posteriors
    a = 0.5 / s0**2 - 0.5 / s1**2
    b = m1 / s1**2 - m0 / s0**2
    c = m0**2 / (2 * s0**2) - m1**2 / (2 * s1**2) + math.log((model.p1 * s0) / (model.p0 * s1))
    if abs(a) < 1e-14:
        if abs(b) < 1e-14:
            return 0.5
        t = -c / b
        return t if lo <= t <= hi else 0.5
    disc = b * b - 4 * a * c
    if disc < 0:
        return 0.5
    sqrt_disc = math.sqrt(disc)
    for t in ((-b + sqrt_disc) / (2 * a), (-b - sqrt_disc) / (2 * a)):
        if lo <= t <= hi:
            return t
    return 0.5


@dataclass(frozen=True)
class BerReport:
    eta0: float
    eta1: float
    p0: float
    p1: float
    threshold: float
    eta_avg: float
    per_sample_errors: tuple[int, ...]
    voxels_per_sample: int
    degenerate: bool = False
    condition: dict = field(default_factory=dict)

    def __post_init__(self):
        recomputed = self.eta0 * self.p0 + self.eta1 * self.p1
        if abs(recomputed - self.eta_avg) > 1e-12:
            raise DomainError("eta_avg identity violated")

    def to_dict(self) -> dict:
        return asdict(self)


def error_rates(approximants, ground_truths, model: ClassPdfModel, t: float,
                condition: dict | None = None) -> BerReport:
    """Empirical class error rates under the threshold decision rule.

    When the class PDFs are identical the posterior comparison is constant
    and every voxel is assigned the majority class.
    """
    majority_only = model.identical_pdfs and not model.degenerate
    majority = 1 if model.p1 >= model.p0 else 0

    err0 = err1 = n0 = n1 = 0
    per_sample = []
    voxels = None
    for approx, truth in zip(approximants, ground_truths):
        a = np.asarray(getattr(approx, "values", approx), dtype=np.float64)
        tr = np.asarray(getattr(truth, "values", truth))
        if majority_only:
            decided = np.full_like(tr, majority)
        else:
            decided = (a >= t).astype(tr.dtype)
        wrong = decided != tr
        per_sample.append(int(wrong.sum()))
        err0 += int((wrong & (tr == 0)).sum())
        err1 += int((wrong & (tr == 1)).sum())
        n0 += int((tr == 0).sum())
        n1 += int((tr == 1).sum())
        voxels = tr.size
    eta0 = err0 / n0 if n0 else 0.0
    eta1 = err1 / n1 if n1 else 0.0
    p0 = model.p0 if not model.degenerate else (n0 / (n0 + n1))
    p1 = model.p1 if not model.degenerate else (n1 / (n0 + n1))
    return BerReport(
        eta0=eta0, eta1=eta1, p0=p0, p1=p1, threshold=t,
        eta_avg=eta0 * p0 + eta1 * p1,
        per_sample_errors=tuple(per_sample),
        voxels_per_sample=int(voxels) if voxels else 0,
        degenerate=model.degenerate,
        condition=condition or {},
    )


def sweep_summary(reports: list[BerReport]) -> list[dict]:
    """Aggregate repeat reports into plot-ready rows keyed by
    (photons_per_ray, method)."""
    groups: dict[tuple, list[BerReport]] = {}
    for rep in reports:
        key = (rep.condition.get("photons_per_ray"), rep.condition.get("method"))
        groups.setdefault(key, []).append(rep)
    rows = []
    for (photons, method), reps in sorted(groups.items(), key=lambda kv: (kv[0][1] or "", kv[0][0] or 0)):
        bers = np.array([r.eta_avg for r in reps])
        stderr = float(bers.std(ddof=1) / math.sqrt(len(bers))) if len(bers) > 1 else None
        rows.append({
            "photons_per_ray": photons,
            "method": method,
            "mean_ber": float(bers.mean()),
            "stderr": stderr,
            "n_repeats": len(bers),
        })
    return rows
