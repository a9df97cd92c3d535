"""Independent brute-force reference implementations used as test oracles.

Everything here is written against the mathematical definitions directly
(plain loops, direct DFT, Toeplitz solves), deliberately avoiding the code
paths of the package under test.
"""

import numpy as np


# ---------------------------------------------------------------------------
# transforms


def dft_direct(x):
    n = len(x)
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        for t in range(n):
            out[k] += x[t] * np.exp(-2j * np.pi * k * t / n)
    return out


def spectrogram_direct(signal, win, hop=8, frames=4):
    n = len(win)
    out = np.zeros((frames, n // 2 + 1))
    for i in range(frames):
        seg = signal[i * hop : i * hop + n] * win
        spec = dft_direct(seg)
        out[i] = np.abs(spec[: n // 2 + 1]) ** 2
    return out


def mexican_hat_direct(t):
    return (2.0 / (np.sqrt(3.0) * np.pi**0.25)) * (1 - t * t) * np.exp(-t * t / 2.0)


def cwt_direct(signal, scales):
    L = len(signal)
    out = np.zeros((scales, L))
    for a in range(1, scales + 1):
        for n in range(L):
            acc = 0.0
            for m in range(L):
                acc += signal[m] * mexican_hat_direct((m - n) / a) / np.sqrt(a)
            out[a - 1, n] = acc
    return out


def mdwt_direct(coefficients):
    """Literal transcription of the cumulative-sum pseudo-code."""
    N = len(coefficients)
    s_max = int(np.floor(np.log2(N)))
    out = []
    for s in range(1, s_max + 1):
        c_max = N // (2**s) - 1
        val = 0.0
        for u in range(0, c_max + 1):
            val += abs(coefficients[u])
        out.append(val)
    return np.array(out)


# ---------------------------------------------------------------------------
# features


def mav_direct(x):
    return sum(abs(v) for v in x) / len(x)


def iemg_direct(x):
    return sum(abs(v) for v in x)


def rms_direct(x):
    return (sum(v * v for v in x) / len(x)) ** 0.5


def wl_direct(x):
    return sum(abs(x[k] - x[k - 1]) for k in range(1, len(x)))


def ssc_direct(x, eps=0.0):
    count = 0
    for k in range(1, len(x) - 1):
        if (x[k] - x[k - 1]) * (x[k] - x[k + 1]) >= eps:
            count += 1
    return count


def zc_direct(x, eps=0.0):
    count = 0
    for k in range(len(x) - 1):
        same_sign = (x[k] >= 0) == (x[k + 1] >= 0)
        if abs(x[k] - x[k + 1]) >= eps and not same_sign:
            count += 1
    return count


def skewness_direct(x):
    x = np.asarray(x, float)
    mu = x.mean()
    sigma = np.sqrt(((x - mu) ** 2).mean())
    if sigma == 0:
        return 0.0
    return (((x - mu) / sigma) ** 3).mean()


def hjorth_direct(x):
    x = np.asarray(x, float)

    def var(v):
        return ((v - v.mean()) ** 2).mean()

    a0 = var(x)
    if a0 == 0:
        return 0.0, 0.0, 0.0
    d1 = np.diff(x)
    d2 = np.diff(d1)
    mob = np.sqrt(var(d1) / a0)
    if var(d1) == 0:
        return a0, mob, 0.0
    mob_d = np.sqrt(var(d2) / var(d1))
    return a0, mob, mob_d / mob


def ar_direct(x, order):
    """Yule-Walker by direct Toeplitz solve on the biased autocorrelation."""
    x = np.asarray(x, float)
    x = x - x.mean()
    L = len(x)
    r = np.array([(x[: L - k] * x[k:]).sum() / L for k in range(order + 1)])
    if r[0] == 0:
        return np.zeros(order)
    R = np.empty((order, order))
    for i in range(order):
        for j in range(order):
            R[i, j] = r[abs(i - j)]
    return np.linalg.solve(R, r[1 : order + 1])


def sampen_direct(x, m=2, r_coeff=0.2):
    x = np.asarray(x, float)
    L = len(x)
    sigma = np.sqrt(((x - x.mean()) ** 2).mean())
    if sigma == 0:
        return 0.0
    r = r_coeff * sigma
    nt = L - m
    B = 0
    A = 0
    for i in range(nt):
        for j in range(nt):
            if i == j:
                continue
            dm = max(abs(x[i + t] - x[j + t]) for t in range(m))
            if dm <= r:
                B += 1
                dm1 = max(dm, abs(x[i + m] - x[j + m]))
                if dm1 <= r:
                    A += 1
    if B == 0:
        return np.log(nt * (nt - 1))
    if A == 0:
        return np.log(B) + np.log(nt * (nt - 1))
    return -np.log(A / B)


def hist_direct(x, bins=20, threshold=3.0):
    x = np.asarray(x, float)
    mu = x.mean()
    sigma = np.sqrt(((x - mu) ** 2).mean())
    counts = np.zeros(bins)
    if sigma == 0:
        counts[(bins - 1) // 2] = len(x)
        return counts
    lo = mu - threshold * sigma
    hi = mu + threshold * sigma
    width = (hi - lo) / bins
    for v in x:
        idx = int(np.floor((v - lo) / width))
        idx = min(max(idx, 0), bins - 1)
        counts[idx] += 1
    return counts


def cepstral_direct(a, order):
    c = []
    for i in range(1, order + 1):
        val = -a[i - 1]
        for n in range(1, i):
            val -= (1 - n / i) * a[n - 1] * c[i - n - 1]
        c.append(val)
    return np.array(c)


# ---------------------------------------------------------------------------
# statistics


def wilcoxon_exact_enum(diffs):
    """Exact one-tail p by brute force over sign assignments (independent code)."""
    diffs = [d for d in diffs if d != 0]
    n = len(diffs)
    mags = [abs(d) for d in diffs]
    order = sorted(range(n), key=lambda i: mags[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and mags[order[j + 1]] == mags[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    w_obs = sum(r for r, d in zip(ranks, diffs) if d > 0)
    count = 0
    for mask in range(2**n):
        w = sum(ranks[i] for i in range(n) if (mask >> i) & 1)
        if w >= w_obs - 1e-12:
            count += 1
    return count / 2.0**n


# ---------------------------------------------------------------------------
# gradients


def numeric_param_grads(net, x, y, eps=1e-5, mode="train"):
    """Central finite differences of the softmax cross-entropy per parameter."""
    from myogest.nn.network import softmax_cross_entropy

    grads = {}
    for node in net.nodes:
        for pname, arr in node.layer.params.items():
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                old = arr[idx]
                arr[idx] = old + eps
                lp, _ = softmax_cross_entropy(net.forward(x, mode=mode), y)
                arr[idx] = old - eps
                lm, _ = softmax_cross_entropy(net.forward(x, mode=mode), y)
                arr[idx] = old
                g[idx] = (lp - lm) / (2 * eps)
            grads[(node.name, pname)] = g
    return grads


def gradcheck(net, x, y, tol=1e-4, mode="train"):
    """Return the worst relative error between analytic and numeric grads."""
    from myogest.nn.network import softmax_cross_entropy

    net.zero_grads()
    logits, _, caches = net._forward_full(x, mode, None, None)
    _, dlogits = softmax_cross_entropy(logits, y)
    net.backward_from(dlogits, caches)
    numeric = numeric_param_grads(net, x, y, mode=mode)
    worst = 0.0
    failures = []
    for key, g_num in numeric.items():
        g_ana = net.node(key[0]).layer.grads[key[1]]
        denom = max(np.abs(g_num).max(), np.abs(g_ana).max(), 1e-6)
        rel = float(np.abs(g_num - g_ana).max() / denom)
        worst = max(worst, rel)
        if rel > tol:
            failures.append((key, rel))
    return worst, failures
