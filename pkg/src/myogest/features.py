"""Hand-crafted sEMG features and the four classic feature sets.

All scalar features operate on one channel of a window (length L = 52 in
production, any L in tests) and use population moments (1/L scaling).
Degenerate inputs (zero variance, vanishing match counts) follow documented
conventions and are reported through flags on the assembled vector instead
of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .timefreq import mdwt, mdwt_length

FEATURE_SETS = ("TD", "EnhancedTD", "NinaPro", "SampEnPipeline")


@dataclass
class FeatureConfig:
    epsilon_zc: float = 0.0
    epsilon_ssc: float = 0.0
    ar_order: int = 11
    cepstral_order: int = 4
    sampen_m: int = 2
    sampen_r_coeff: float = 0.2
    hist_bins: int = 20
    hist_threshold: float = 3.0  # in units of sigma

    def __post_init__(self):
        if self.epsilon_zc < 0 or self.epsilon_ssc < 0:
            raise ConfigError("thresholds must be non-negative")
        if self.ar_order < 1 or self.hist_bins < 1:
            raise ConfigError("ar_order and hist_bins must be >= 1")


@dataclass
class FeatureVector:
    values: np.ndarray
    layout: list  # (feature_name, channel, index) per entry
    flags: list = field(default_factory=list)  # (feature_name, channel, reason)


def mav(x) -> float:
    """Mean of the fully-rectified signal."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(np.abs(x)))


def iemg(x) -> float:
    """Sum of the fully-rectified signal."""
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(np.abs(x)))


def rms(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sqrt(np.mean(x**2)))


def wl(x) -> float:
    """Waveform length: sum of absolute consecutive differences."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        raise DataError("wl needs at least 2 samples")
    return float(np.sum(np.abs(np.diff(x))))


def ssc(x, epsilon: float = 0.0) -> int:
    """Count of slope-sign changes: (x_k - x_{k-1})(x_k - x_{k+1}) >= eps."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        raise DataError("ssc needs at least 3 samples")
    prod = (x[1:-1] - x[:-2]) * (x[1:-1] - x[2:])
    return int(np.count_nonzero(prod >= epsilon))


def zc(x, epsilon: float = 0.0) -> int:
    """Zero crossings: adjacent samples of opposite sign at least eps apart.

    Zero is treated as positive, so a 0 -> 0 step never counts.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 2:
        raise DataError("zc needs at least 2 samples")
    a, b = x[:-1], x[1:]
    big_enough = np.abs(a - b) >= epsilon
    opposite = (a >= 0) != (b >= 0)
    return int(np.count_nonzero(big_enough & opposite))


def skewness(x) -> float:
    """Third standardized central moment with population sigma; 0 if sigma = 0."""
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    sigma = np.sqrt(np.mean((x - mu) ** 2))
    if sigma == 0.0:
        return 0.0
    return float(np.mean(((x - mu) / sigma) ** 3))


def hjorth(x) -> tuple:
    """(activity, mobility, complexity); all 0 when activity vanishes.

    The derivative is the first-order difference, so it shortens the signal
    by one sample at each level.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) < 3:
        raise DataError("hjorth needs at least 3 samples")

    def activity(v):
        return float(np.mean((v - v.mean()) ** 2))

    a0 = activity(x)
    if a0 == 0.0:
        return (0.0, 0.0, 0.0)
    d1 = np.diff(x)
    d2 = np.diff(d1)
    a1 = activity(d1)
    mobility = np.sqrt(a1 / a0)
    if a1 == 0.0:
        return (a0, mobility, 0.0)
    mobility_d = np.sqrt(activity(d2) / a1)
    return (a0, float(mobility), float(mobility_d / mobility))


def autocorrelation(x, max_lag: int) -> np.ndarray:
    """Biased autocorrelation r[0..max_lag], r[k] = (1/L) sum x_t x_{t+k}."""
    x = np.asarray(x, dtype=np.float64)
    L = len(x)
    return np.array([np.dot(x[: L - k], x[k:]) / L for k in range(max_lag + 1)])


def ar_coefficients(x, order: int) -> np.ndarray:
    """Yule-Walker AR estimates via Levinson-Durbin on biased autocorrelation.

    Returns rho such that x_k ~ sum_j rho_j x_{k-j}.  Zero-variance input
    yields the zero vector (degenerate).
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) <= order:
        raise DataError(f"ar order {order} needs more than {order} samples")
    r = autocorrelation(x - x.mean(), order)
    if r[0] == 0.0:
        return np.zeros(order)
    # Levinson-Durbin on the error-filter polynomial 1 + a_1 z^-1 + ...
    a = np.zeros(order + 1)
    a[0] = 1.0
    err = r[0]
    for k in range(1, order + 1):
        if err <= 0.0:
            break
        acc = r[k] + np.dot(a[1:k], r[k - 1 : 0 : -1])
        lam = -acc / err
        a_prev = a[:k].copy()
        for j in range(1, k):
            a[j] = a_prev[j] + lam * a_prev[k - j]
        a[k] = lam
        err *= 1.0 - lam * lam
    return -a[1:]


def sampen(x, m: int = 2, r_coeff: float = 0.2, cap: float = None) -> float:
    """Sample entropy -ln(A/B) with Chebyshev distance, self-matches excluded.

    Both template lengths use the same N - m start positions.  r is
    r_coeff * population sigma.  Conventions: sigma = 0 is degenerate and
    returns 0; A = 0 returns a cap (default treats A as one count short of
    the ordered-pair space); B = 0 returns ln of the pair space.
    """
    x = np.asarray(x, dtype=np.float64)
    L = len(x)
    if L <= m + 1:
        raise DataError(f"sampen needs more than m+1={m + 1} samples")
    sigma = float(np.sqrt(np.mean((x - x.mean()) ** 2)))
    if sigma == 0.0:
        return 0.0
    r = r_coeff * sigma
    n_templates = L - m
    pair_space = n_templates * (n_templates - 1)
    # Chebyshev distance over all template pairs, built incrementally
    diff = np.abs(x[:, None] - x[None, :])
    dist_m = np.zeros((n_templates, n_templates))
    dist_m1 = np.zeros((n_templates, n_templates))
    for k in range(m):
        dist_m = np.maximum(dist_m, diff[k : k + n_templates, k : k + n_templates])
    dist_m1 = np.maximum(dist_m, diff[m : m + n_templates, m : m + n_templates])
    mask = ~np.eye(n_templates, dtype=bool)
    B = int(np.count_nonzero((dist_m <= r) & mask))
    A = int(np.count_nonzero((dist_m1 <= r) & mask))
    if B == 0:
        return float(np.log(pair_space)) if cap is None else cap
    if A == 0:
        return float(np.log(B) + np.log(pair_space)) if cap is None else cap
    return float(-np.log(A / B))


def hist(x, bins: int = 20, threshold: float = 3.0) -> np.ndarray:
    """Counts over `bins` equal bins spanning mean +/- threshold * sigma.

    Out-of-range samples clip into the edge bins.  A constant signal is
    degenerate (sigma = 0): all mass goes to the center bin by convention.
    """
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    sigma = float(np.sqrt(np.mean((x - mu) ** 2)))
    counts = np.zeros(bins)
    if sigma == 0.0:
        counts[(bins - 1) // 2] = len(x)
        return counts
    lo = mu - threshold * sigma
    width = 2.0 * threshold * sigma / bins
    idx = np.floor((x - lo) / width).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    np.add.at(counts, idx, 1)
    return counts


def cepstral_from_ar(a, order: int = None) -> np.ndarray:
    """Cepstral coefficients from AR coefficients.

    c_1 = -a_1 and c_i = -a_i - sum_{n=1}^{i-1} (1 - n/i) a_n c_{i-n}.
    """
    a = np.asarray(a, dtype=np.float64)
    p = len(a)
    order = p if order is None else order
    if order > p:
        raise ConfigError(f"cepstral order {order} exceeds AR order {p}")
    c = np.zeros(order)
    for i in range(1, order + 1):
        acc = -a[i - 1]
        for n in range(1, i):
            acc -= (1.0 - n / i) * a[n - 1] * c[i - n - 1]
        c[i - 1] = acc
    return c


def cepstral(x, order: int = 4) -> np.ndarray:
    return cepstral_from_ar(ar_coefficients(x, order), order)


def _set_plan(set_name: str, cfg: FeatureConfig):
    """Ordered (name, extractor, dimensionality) plan per feature set."""
    td = [
        ("mav", lambda x: [mav(x)], 1),
        ("zc", lambda x: [float(zc(x, cfg.epsilon_zc))], 1),
        ("ssc", lambda x: [float(ssc(x, cfg.epsilon_ssc))], 1),
        ("wl", lambda x: [wl(x)], 1),
    ]
    if set_name == "TD":
        return td
    if set_name == "EnhancedTD":
        return td + [
            ("skewness", lambda x: [skewness(x)], 1),
            ("rms", lambda x: [rms(x)], 1),
            ("iemg", lambda x: [iemg(x)], 1),
            ("ar", lambda x: list(ar_coefficients(x, cfg.ar_order)), cfg.ar_order),
            ("hjorth", lambda x: list(hjorth(x)), 3),
        ]
    if set_name == "NinaPro":
        mdwt_dim = mdwt_length()
        return [
            ("rms", lambda x: [rms(x)], 1),
            ("mdwt", lambda x: list(mdwt(x)), mdwt_dim),
            ("hist", lambda x: list(hist(x, cfg.hist_bins, cfg.hist_threshold)), cfg.hist_bins),
        ] + td
    if set_name == "SampEnPipeline":
        return [
            ("sampen", lambda x: [sampen(x, cfg.sampen_m, cfg.sampen_r_coeff)], 1),
            ("cepstral", lambda x: list(cepstral(x, cfg.cepstral_order)), cfg.cepstral_order),
            ("rms", lambda x: [rms(x)], 1),
            ("wl", lambda x: [wl(x)], 1),
        ]
    raise ConfigError(f"unknown feature set '{set_name}' (choose from {FEATURE_SETS})")


def feature_set_length(set_name: str, cfg: FeatureConfig = None) -> int:
    cfg = cfg or FeatureConfig()
    return 8 * sum(dim for _, _, dim in _set_plan(set_name, cfg))


def _degenerate_reasons(x, set_name: str) -> list:
    sigma = float(np.sqrt(np.mean((x - x.mean()) ** 2)))
    if sigma != 0.0:
        return []
    needs_sigma = {
        "TD": [],
        "EnhancedTD": ["skewness", "hjorth", "ar"],
        "NinaPro": ["hist"],
        "SampEnPipeline": ["sampen", "cepstral"],
    }[set_name]
    return [(name, "zero variance") for name in needs_sigma]


def assemble_feature_set(window, set_name: str, cfg: FeatureConfig = None) -> FeatureVector:
    """Per-channel features concatenated channel-major in declared order."""
    cfg = cfg or FeatureConfig()
    data = window.data if hasattr(window, "data") else np.asarray(window, dtype=np.float64)
    if data.shape[0] != 8:
        raise DataError(f"expected 8-channel window, got shape {data.shape}")
    plan = _set_plan(set_name, cfg)
    values, layout, flags = [], [], []
    for channel in range(8):
        x = data[channel]
        for name, reason in _degenerate_reasons(x, set_name):
            flags.append((name, channel, reason))
        for name, fn, dim in plan:
            vals = fn(x)
            assert len(vals) == dim, f"feature '{name}' produced {len(vals)} values, expected {dim}"
            for i, v in enumerate(vals):
                values.append(v)
                layout.append((name, channel, i))
    return FeatureVector(values=np.array(values), layout=layout, flags=flags)


def feature_matrix(windows, set_name: str, cfg: FeatureConfig = None):
    """Stack assembled vectors into (N, D); returns (matrix, layout)."""
    cfg = cfg or FeatureConfig()
    rows, layout = [], None
    for w in windows:
        fv = assemble_feature_set(w, set_name, cfg)
        rows.append(fv.values)
        layout = fv.layout
    return np.stack(rows), layout
