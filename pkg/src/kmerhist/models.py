"""Generative-model estimators on abundance histograms.

Model: genome positions whose k-mer occurs ``m`` times contribute k-mers with
Poisson rate ``m * lam1`` (``lam1`` is the per-position rate of error-free
k-mers). Around ``m * lam1`` the histogram therefore shows a near-Gaussian
peak of height ``g_m / (m * sqrt(2 pi m lam1))``. Read errors produce a sharp
spike at small multiplicities.

From a histogram we estimate ``lam1``, the repeat table ``g_m``, the mass
``N_e`` of erroneous k-mers (everything up to the error cutoff), the k-mer
error rate ``lam_e = lam1 * N_e / (N - N_e)``, total rate
``lam = lam1 + lam_e``, coverage ``c = lam * l / (l - k + 1)`` and genome size
``g = N * l / (c * (l - k + 1))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, FitError, ModelInconsistencyError
from .histogram import AbundanceHistogram

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PeakConfig:
    smoothing_window: int = 5
    min_peak_fraction: float = 0.005
    order_tolerance: float = 0.25
    # half-width of the refinement/fit window in standard deviations
    window_sd: float = 1.0


@dataclass
class Peak:
    position: float
    value: float
    m: int

    def to_json_dict(self) -> dict:
        return asdict(self)


@dataclass
class HistogramModelFit:
    lambda_prime: float
    lambda_e: float
    lambda_: float
    coverage: float
    read_length: int
    k: int
    genome_size: float
    g_m: dict[int, float]
    N: int
    N_e_hat: float
    error_cutoff: int
    peaks: list[Peak] = field(default_factory=list)
    f0: float = 0.0
    f0_error: float = 0.0

    @property
    def true_distinct(self) -> float:
        return self.f0 - self.f0_error

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "lambda_prime": self.lambda_prime,
            "lambda_e": self.lambda_e,
            "lambda": self.lambda_,
            "coverage": self.coverage,
            "read_length": self.read_length,
            "k": self.k,
            "genome_size": self.genome_size,
            "N": self.N,
            "N_e_hat": self.N_e_hat,
            "error_cutoff": self.error_cutoff,
            "peaks": [p.to_json_dict() for p in self.peaks],
            "g_m": {str(m): v for m, v in sorted(self.g_m.items())},
            "F0": self.f0,
            "F0_error": self.f0_error,
            "F0_true": self.true_distinct,
        }


# ---- the peak formula and its inverse ------------------------------------


def peak_value_from_g(g_m: float, m: int, lambda_prime: float) -> float:
    """Height of peak ``m``: ``g_m / (m * sqrt(2 pi m lam1))``."""
    return g_m / (m * math.sqrt(2.0 * math.pi * m * lambda_prime))


def g_from_peak_value(value: float, m: int, lambda_prime: float) -> float:
    """Inverse of :func:`peak_value_from_g`."""
    return value * m * math.sqrt(2.0 * math.pi * m * lambda_prime)


# ---- rate and size equations ---------------------------------------------


def kmer_rate(coverage: float, l: int, k: int) -> float:
    """``lam = c (l - k + 1) / l``."""
    return coverage * (l - k + 1) / l


def coverage_from_rate(lam: float, l: int, k: int) -> float:
    return lam * l / (l - k + 1)


def genome_size(N: float, coverage: float, l: int, k: int) -> float:
    """``g = N l / (c (l - k + 1))``."""
    return N * l / (coverage * (l - k + 1))


def error_mass(hist: AbundanceHistogram, cutoff: int) -> float:
    """``N_e = sum_{i <= cutoff} i f_i``."""
    return float(sum(i * v for i, v in hist.counts.items() if 1 <= i <= cutoff))


def error_rate(lambda_prime: float, N: float, N_e: float) -> float:
    """``lam_e = lam1 N_e / (N - N_e)``."""
    if N_e >= N:
        raise ModelInconsistencyError(
            f"erroneous k-mer mass {N_e:.6g} is not below the total k-mer count {N}"
        )
    return lambda_prime * N_e / (N - N_e)


# ---- peak detection --------------------------------------------------------


def smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; windows are truncated at the ends."""
    if window <= 1:
        return values.astype(np.float64)
    kernel = np.ones(window)
    total = np.convolve(values, kernel, mode="same")
    norm = np.convolve(np.ones_like(values, dtype=np.float64), kernel, mode="same")
    return total / norm


def find_error_region_end(s: np.ndarray) -> int | None:
    """First local minimum of the smoothed series after ``i = 1``."""
    for i in range(2, s.shape[0] - 1):
        if s[i + 1] > s[i] and s[i] <= s[i - 1]:
            return i
    return None


def _window(centre: float, floor: int, top: int, window_sd: float) -> tuple[int, int]:
    half = max(1.0, window_sd * math.sqrt(max(centre, 1.0)))
    return max(floor + 1, int(math.ceil(centre - half))), min(top, int(math.floor(centre + half)))


def _poisson_window_moments(lam: float, lo: int, hi: int) -> tuple[float, float]:
    """Mean and variance of Poisson(lam) conditioned on ``lo <= i <= hi``."""
    i = np.arange(lo, hi + 1, dtype=np.float64)
    logp = i * math.log(lam) - lam - np.array([math.lgamma(x + 1) for x in i])
    w = np.exp(logp - logp.max())
    w /= w.sum()
    mean = float((i * w).sum())
    return mean, float(((i - mean) ** 2 * w).sum())


def _refine(f: np.ndarray, centre: float, floor: int, window_sd: float, iterations: int = 10) -> float:
    """Poisson mean of the peak near ``centre``.

    The window (``window_sd`` standard deviations, never reaching down to
    ``floor``) is re-centred on the raw-histogram centroid until stable. A
    symmetric window cuts more of a Poisson's right tail than its left, so
    the centroid sits below the mean; the returned rate is the one whose
    window-conditioned mean equals the observed centroid.
    """
    top = f.shape[0] - 1
    lo = hi = 0
    centroid = centre
    for _ in range(iterations):
        lo, hi = _window(centre, floor, top, window_sd)
        mass = f[lo : hi + 1].sum()
        if mass <= 0 or hi < lo:
            return centre
        centroid = float((np.arange(lo, hi + 1) * f[lo : hi + 1]).sum() / mass)
        if abs(centroid - centre) < 1e-9:
            break
        centre = centroid
    lam = max(centroid, 1e-6)
    for _ in range(50):
        mean, var = _poisson_window_moments(lam, lo, hi)
        if var <= 0:
            break
        step = (centroid - mean) * lam / var
        lam = max(lam + step, 1e-6)
        if abs(step) < 1e-10:
            break
    return lam


def _fit_height(f: np.ndarray, centre: float, window_sd: float) -> float:
    """Height of a Gaussian with variance ``centre`` carrying the histogram mass of the window."""
    var = max(centre, 1.0)
    half = max(1.0, window_sd * math.sqrt(var))
    lo = max(1, int(math.ceil(centre - half)))
    hi = min(f.shape[0] - 1, int(math.floor(centre + half)))
    idx = np.arange(lo, hi + 1)
    shape = np.exp(-((idx - centre) ** 2) / (2.0 * var))
    denom = float(shape.sum())
    return float(f[lo : hi + 1].sum()) / denom if denom > 0 else 0.0


def detect_peaks(
    hist: AbundanceHistogram,
    error_cutoff_hint: int | None = None,
    config: PeakConfig = PeakConfig(),
) -> tuple[int, list[Peak]]:
    """Locate the error/signal boundary and the true-k-mer peaks.

    Returns ``(error_region_end, peaks)`` with peaks ordered by ``m``.
    """
    f = hist.dense()
    if f.shape[0] < 4:
        raise FitError("histogram too short to contain a peak")
    # index 0 is not a multiplicity; keep it out of the moving average
    s = np.concatenate(([0.0], smooth(f[1:], config.smoothing_window)))
    if error_cutoff_hint is not None:
        cutoff = int(error_cutoff_hint)
    else:
        found = find_error_region_end(s)
        if found is None:
            raise FitError(
                "no local minimum separates the error spike from the true k-mer peaks; "
                "increase coverage or pass an explicit error cutoff"
            )
        cutoff = found
    tail = s[cutoff + 1 :]
    if tail.size < 3 or tail.max() <= 0:
        raise FitError("no true k-mer peak beyond the error region")
    floor = config.min_peak_fraction * tail.max()
    candidates = []
    for i in range(max(cutoff + 1, 2), s.shape[0] - 1):
        if s[i] > s[i - 1] and s[i] > s[i + 1] and s[i] >= floor:
            candidates.append(i)
    if not candidates:
        raise FitError("no true k-mer peak beyond the error region")
    first = _refine(f, float(candidates[0]), cutoff, config.window_sd)
    by_order: dict[int, int] = {}
    for pos in candidates:
        m = int(round(pos / first))
        if m < 1 or abs(pos - m * first) > config.order_tolerance * first:
            continue
        if m not in by_order or s[pos] > s[by_order[m]]:
            by_order[m] = pos
    peaks = []
    for m in sorted(by_order):
        centre = _refine(f, float(by_order[m]), cutoff, config.window_sd)
        peaks.append(Peak(position=centre, value=_fit_height(f, centre, config.window_sd), m=m))
    return cutoff, peaks


# ---- full fit ---------------------------------------------------------------


def fit_model(
    hist: AbundanceHistogram,
    peaks: list[Peak] | None,
    l: int,
    k: int | None = None,
    error_cutoff: int | None = None,
    config: PeakConfig = PeakConfig(),
) -> HistogramModelFit:
    """Fit the generative model to ``hist`` for reads of length ``l``.

    With ``peaks=None`` peaks and cutoff are detected; ``error_cutoff``
    overrides the detected boundary either way.
    """
    k = k if k is not None else hist.k
    if not k:
        raise ConfigurationError("k is required (histogram does not record it)")
    if l < k:
        raise ConfigurationError(f"read length {l} is shorter than k={k}")
    N = hist.total_kmers
    if N <= 0:
        raise FitError("histogram has no k-mers")
    if peaks is None:
        detected_cutoff, peaks = detect_peaks(hist, error_cutoff, config)
        if error_cutoff is None:
            error_cutoff = detected_cutoff
    elif error_cutoff is None:
        error_cutoff = detect_peaks(hist, None, config)[0]
    if not peaks:
        raise FitError("no true k-mer peaks to fit")
    weight = sum(p.value for p in peaks)
    if weight <= 0:
        raise FitError("peaks have no height")
    lambda_prime = sum(p.value * p.position / p.m for p in peaks) / weight
    g_m = {p.m: g_from_peak_value(p.value, p.m, lambda_prime) for p in peaks}
    N_e = error_mass(hist, error_cutoff)
    lambda_e = error_rate(lambda_prime, N, N_e)
    lam = lambda_prime + lambda_e
    c = coverage_from_rate(lam, l, k)
    g = genome_size(N, c, l, k)
    f0_e = float(sum(v for i, v in hist.counts.items() if 1 <= i <= error_cutoff))
    return HistogramModelFit(
        lambda_prime=lambda_prime,
        lambda_e=lambda_e,
        lambda_=lam,
        coverage=c,
        read_length=l,
        k=k,
        genome_size=g,
        g_m=g_m,
        N=N,
        N_e_hat=N_e,
        error_cutoff=error_cutoff,
        peaks=list(peaks),
        f0=float(hist.f0),
        f0_error=f0_e,
    )


@dataclass
class GenomeSizeReport:
    estimates: dict[str, float]
    pairwise: dict[str, float]

    @property
    def max_difference(self) -> float:
        return max(self.pairwise.values()) if self.pairwise else 0.0

    def to_json_dict(self) -> dict:
        return {"estimates": self.estimates, "pairwise_relative_difference": self.pairwise}


def estimate_genome_size_consistency(
    fit: HistogramModelFit,
    known_c: float | None = None,
    reference_length: float | None = None,
) -> GenomeSizeReport:
    """Genome size by up to three routes and their pairwise relative differences.

    ``rate``: ``N / lam`` with ``lam`` from the fit. ``coverage``: the size
    equation with a known coverage. ``reference``: a known length.
    """
    est = {"rate": fit.N / fit.lambda_}
    if known_c is not None:
        est["coverage"] = genome_size(fit.N, known_c, fit.read_length, fit.k)
    if reference_length is not None:
        est["reference"] = float(reference_length)
    names = list(est)
    pairwise = {}
    for a_i, a in enumerate(names):
        for b in names[a_i + 1 :]:
            pairwise[f"{a}/{b}"] = abs(est[a] - est[b]) / min(est[a], est[b])
    return GenomeSizeReport(est, pairwise)


def estimate_true_distinct(hist: AbundanceHistogram, error_region_end: int) -> float:
    """``F0' = F0 - F0_e`` with ``F0_e = sum_{i <= cutoff} f_i``."""
    f0_e = sum(v for i, v in hist.counts.items() if 1 <= i <= error_region_end)
    return float(hist.f0) - float(f0_e)
