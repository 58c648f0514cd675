"""Hot numeric kernels with two interchangeable backends.

Each kernel exists twice: a loop form compiled with numba's ``@njit`` and a
vectorized pure-numpy form.  The active backend is chosen once at import
time from the ``TENSORCHAIN_NUMBA`` environment variable ("0"/"false"/"off"
selects the numpy path; anything else, or an unset variable, selects numba
when it is importable).  ``benchmarks/bench_kernels.py`` times the two
paths against each other; the test suite asserts they agree.

Gauge codes used by the norm kernels: 0 = frobenius, 1 = spectral,
2 = nuclear, all evaluated on the matrix unfolding.
"""

import os

import numpy as np

GAUGE_FROBENIUS = 0
GAUGE_SPECTRAL = 1
GAUGE_NUCLEAR = 2

# Cap on per-chunk scratch memory in the vectorized fallbacks (complex entries).
_CHUNK_ENTRIES = 1 << 22


def _numba_requested() -> bool:
    value = os.environ.get("TENSORCHAIN_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


try:
    if _numba_requested():
        from numba import njit

        NUMBA_ENABLED = True
    else:
        njit = None
        NUMBA_ENABLED = False
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# loop bodies (numba-compilable)
# ---------------------------------------------------------------------------


def _matrix_gauge_norm(mat, gauge):
    if gauge == GAUGE_FROBENIUS:
        acc = 0.0
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                v = mat[i, j]
                acc += v.real * v.real + v.imag * v.imag
        return np.sqrt(acc)
    s = np.linalg.svd(mat)[1]
    if gauge == GAUGE_SPECTRAL:
        return s[0]
    return s.sum()


def _ensemble_pairwise_norms_loop(trajs, gauge):
    ns, nt, d1, d2 = trajs.shape
    out = np.zeros((ns, nt, nt))
    diff = np.empty((d1, d2), np.complex128)
    for s in range(ns):
        for a in range(nt):
            for b in range(a + 1, nt):
                for i in range(d1):
                    for j in range(d2):
                        diff[i, j] = trajs[s, a, i, j] - trajs[s, b, i, j]
                v = _matrix_gauge_norm(diff, gauge)
                out[s, a, b] = v
                out[s, b, a] = v
    return out


def _ensemble_norms_vs_ref_loop(trajs, ref, gauge):
    ns, nt, d1, d2 = trajs.shape
    out = np.zeros((ns, nt))
    diff = np.empty((d1, d2), np.complex128)
    for s in range(ns):
        for a in range(nt):
            if a == ref:
                continue
            for i in range(d1):
                for j in range(d2):
                    diff[i, j] = trajs[s, a, i, j] - trajs[s, ref, i, j]
            out[s, a] = _matrix_gauge_norm(diff, gauge)
    return out


def _batch_lambda_max_loop(mats):
    nb = mats.shape[0]
    out = np.empty(nb)
    for b in range(nb):
        w = np.linalg.eigvalsh(mats[b])
        out[b] = w[-1]
    return out


def _batch_spectral_loop(mats):
    nb = mats.shape[0]
    out = np.empty(nb)
    for b in range(nb):
        out[b] = np.linalg.svd(mats[b])[1][0]
    return out


def _rip_scan_loop(gram, xi):
    ncols = gram.shape[0]
    idx = np.arange(xi)
    block = np.empty((xi, xi), np.complex128)
    best = 0.0
    while True:
        # Gershgorin bound on the deviation of the Gram block from identity;
        # skipping the eigensolve below the running max keeps the scan exact.
        dev = 0.0
        for r in range(xi):
            row = abs(gram[idx[r], idx[r]] - 1.0)
            for q in range(xi):
                if q != r:
                    row += abs(gram[idx[r], idx[q]])
            if row > dev:
                dev = row
        if dev > best:
            for r in range(xi):
                for q in range(xi):
                    block[r, q] = gram[idx[r], idx[q]]
            w = np.linalg.eigvalsh(block)
            lo = 1.0 - w[0]
            hi = w[-1] - 1.0
            if lo > best:
                best = lo
            if hi > best:
                best = hi
        # colexicographic successor
        pos = 0
        while pos < xi:
            limit = idx[pos + 1] if pos + 1 < xi else ncols
            if idx[pos] + 1 < limit:
                idx[pos] += 1
                for r in range(pos):
                    idx[r] = r
                break
            pos += 1
        if pos == xi:
            break
    return best


def _farthest_point_order_loop(dist):
    n = dist.shape[0]
    order = np.empty(n, np.int64)
    # seed at the 1-center, ties toward the lowest index
    best_i = 0
    best_e = np.inf
    for i in range(n):
        ecc = 0.0
        for j in range(n):
            if dist[i, j] > ecc:
                ecc = dist[i, j]
        if ecc < best_e:
            best_e = ecc
            best_i = i
    order[0] = best_i
    chosen = np.zeros(n, np.bool_)
    chosen[best_i] = True
    mind = dist[best_i].copy()
    for k in range(1, n):
        bi = -1
        bv = -1.0
        for i in range(n):
            if not chosen[i] and mind[i] > bv:
                bv = mind[i]
                bi = i
        order[k] = bi
        chosen[bi] = True
        for i in range(n):
            if dist[bi, i] < mind[i]:
                mind[i] = dist[bi, i]
    return order


def _chain_sum_loop(dist, members, offsets, weights):
    n = dist.shape[0]
    nlev = weights.shape[0]
    worst = 0.0
    for t in range(n):
        total = 0.0
        for lev in range(nlev):
            if weights[lev] == 0.0:
                continue
            m = np.inf
            for p in range(offsets[lev], offsets[lev + 1]):
                d = dist[t, members[p]]
                if d < m:
                    m = d
            total += weights[lev] * m
        if total > worst:
            worst = total
    return worst


def _gamma2_scan_loop(dist, subs, w1):
    n = dist.shape[0]
    nsubs, k = subs.shape
    best = np.inf
    msub = np.empty(n)
    for si in range(nsubs):
        for t in range(n):
            m = np.inf
            for p in range(k):
                d = dist[t, subs[si, p]]
                if d < m:
                    m = d
            msub[t] = m
        for t0 in range(n):
            sup = 0.0
            for t in range(n):
                v = dist[t, t0] + w1 * msub[t]
                if v > sup:
                    sup = v
            if sup < best:
                best = sup
    return best


def _greedy_cover_loop(within):
    n = within.shape[0]
    covered = np.zeros(n, np.bool_)
    count = 0
    remaining = n
    while remaining > 0:
        bi = 0
        bv = -1
        for c in range(n):
            gain = 0
            for t in range(n):
                if not covered[t] and within[c, t]:
                    gain += 1
            if gain > bv:
                bv = gain
                bi = c
        for t in range(n):
            if within[bi, t]:
                if not covered[t]:
                    remaining -= 1
                covered[t] = True
        count += 1
    return count


def _max_triangle_violation_loop(dist):
    n = dist.shape[0]
    worst = -np.inf
    for i in range(n):
        for j in range(n):
            for k in range(n):
                v = dist[i, j] - dist[i, k] - dist[k, j]
                if v > worst:
                    worst = v
    return worst


# ---------------------------------------------------------------------------
# vectorized numpy fallbacks
# ---------------------------------------------------------------------------


def _gauge_norms_stack(diff, gauge):
    """Gauge norms along the last two axes of a stacked array."""
    if gauge == GAUGE_FROBENIUS:
        return np.sqrt((diff.real**2 + diff.imag**2).sum(axis=(-2, -1)))
    sv = np.linalg.svd(diff, compute_uv=False)
    if gauge == GAUGE_SPECTRAL:
        return sv[..., 0]
    return sv.sum(axis=-1)


def _sample_chunks(ns, per_sample_entries):
    step = max(1, _CHUNK_ENTRIES // max(1, per_sample_entries))
    for lo in range(0, ns, step):
        yield lo, min(ns, lo + step)


def _ensemble_pairwise_norms_np(trajs, gauge):
    ns, nt, d1, d2 = trajs.shape
    out = np.zeros((ns, nt, nt))
    for lo, hi in _sample_chunks(ns, nt * nt * d1 * d2):
        block = trajs[lo:hi]
        diff = block[:, :, None, :, :] - block[:, None, :, :, :]
        out[lo:hi] = _gauge_norms_stack(diff, gauge)
    return out


def _ensemble_norms_vs_ref_np(trajs, ref, gauge):
    ns, nt, d1, d2 = trajs.shape
    out = np.zeros((ns, nt))
    for lo, hi in _sample_chunks(ns, nt * d1 * d2):
        block = trajs[lo:hi]
        diff = block - block[:, ref : ref + 1, :, :]
        out[lo:hi] = _gauge_norms_stack(diff, gauge)
    return out


def _batch_lambda_max_np(mats):
    return np.linalg.eigvalsh(mats)[..., -1]


def _batch_spectral_np(mats):
    return np.linalg.svd(mats, compute_uv=False)[..., 0]


def _rip_scan_np(gram, xi):
    from itertools import combinations

    ncols = gram.shape[0]
    best = 0.0
    chunk = []
    limit = max(1, _CHUNK_ENTRIES // (xi * xi))

    def flush(rows):
        nonlocal best
        subs = np.array(rows, dtype=np.int64)
        blocks = gram[subs[:, :, None], subs[:, None, :]]
        w = np.linalg.eigvalsh(blocks)
        best = max(best, float((w[:, -1] - 1.0).max()), float((1.0 - w[:, 0]).max()))

    for comb in combinations(range(ncols), xi):
        chunk.append(comb)
        if len(chunk) >= limit:
            flush(chunk)
            chunk = []
    if chunk:
        flush(chunk)
    return best


def _farthest_point_order_np(dist):
    n = dist.shape[0]
    order = np.empty(n, np.int64)
    order[0] = int(np.argmin(dist.max(axis=1)))
    mind = dist[order[0]].copy()
    chosen = np.zeros(n, np.bool_)
    chosen[order[0]] = True
    for k in range(1, n):
        masked = np.where(chosen, -np.inf, mind)
        nxt = int(np.argmax(masked))
        order[k] = nxt
        chosen[nxt] = True
        np.minimum(mind, dist[nxt], out=mind)
    return order


def _chain_sum_np(dist, members, offsets, weights):
    n = dist.shape[0]
    total = np.zeros(n)
    for lev in range(weights.shape[0]):
        if weights[lev] == 0.0:
            continue
        sel = members[offsets[lev] : offsets[lev + 1]]
        total += weights[lev] * dist[:, sel].min(axis=1)
    return float(total.max())


def _gamma2_scan_np(dist, subs, w1):
    n = dist.shape[0]
    best = np.inf
    step = max(1, _CHUNK_ENTRIES // (n * n))
    for lo in range(0, subs.shape[0], step):
        block = subs[lo : lo + step]
        msub = dist[:, block].min(axis=2).T  # (chunk, n)
        vals = (w1 * msub[:, :, None] + dist[None, :, :]).max(axis=1)
        best = min(best, float(vals.min()))
    return best


def _greedy_cover_np(within):
    n = within.shape[0]
    covered = np.zeros(n, np.bool_)
    count = 0
    while not covered.all():
        gains = (within & ~covered[None, :]).sum(axis=1)
        pick = int(np.argmax(gains))
        covered |= within[pick]
        count += 1
    return count


def _max_triangle_violation_np(dist):
    worst = -np.inf
    for k in range(dist.shape[0]):
        v = dist - dist[:, k : k + 1] - dist[k : k + 1, :]
        worst = max(worst, float(v.max()))
    return worst


# ---------------------------------------------------------------------------
# backend dispatch
# ---------------------------------------------------------------------------

_LOOP_KERNELS = {
    "ensemble_pairwise_norms": _ensemble_pairwise_norms_loop,
    "ensemble_norms_vs_ref": _ensemble_norms_vs_ref_loop,
    "batch_lambda_max": _batch_lambda_max_loop,
    "batch_spectral": _batch_spectral_loop,
    "rip_scan": _rip_scan_loop,
    "farthest_point_order": _farthest_point_order_loop,
    "chain_sum": _chain_sum_loop,
    "gamma2_scan": _gamma2_scan_loop,
    "greedy_cover": _greedy_cover_loop,
    "max_triangle_violation": _max_triangle_violation_loop,
}

_NUMPY_KERNELS = {
    "ensemble_pairwise_norms": _ensemble_pairwise_norms_np,
    "ensemble_norms_vs_ref": _ensemble_norms_vs_ref_np,
    "batch_lambda_max": _batch_lambda_max_np,
    "batch_spectral": _batch_spectral_np,
    "rip_scan": _rip_scan_np,
    "farthest_point_order": _farthest_point_order_np,
    "chain_sum": _chain_sum_np,
    "gamma2_scan": _gamma2_scan_np,
    "greedy_cover": _greedy_cover_np,
    "max_triangle_violation": _max_triangle_violation_np,
}

if NUMBA_ENABLED:
    _matrix_gauge_norm = njit(cache=True)(_matrix_gauge_norm)
    _NUMBA_KERNELS = {name: njit(cache=True)(fn) for name, fn in _LOOP_KERNELS.items()}
else:
    _NUMBA_KERNELS = {}

_ACTIVE = _NUMBA_KERNELS if NUMBA_ENABLED else _NUMPY_KERNELS

ensemble_pairwise_norms = _ACTIVE["ensemble_pairwise_norms"]
ensemble_norms_vs_ref = _ACTIVE["ensemble_norms_vs_ref"]
batch_lambda_max = _ACTIVE["batch_lambda_max"]
batch_spectral = _ACTIVE["batch_spectral"]
rip_scan = _ACTIVE["rip_scan"]
farthest_point_order = _ACTIVE["farthest_point_order"]
chain_sum = _ACTIVE["chain_sum"]
gamma2_scan = _ACTIVE["gamma2_scan"]
greedy_cover = _ACTIVE["greedy_cover"]
max_triangle_violation = _ACTIVE["max_triangle_violation"]


def backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def get_impl(name: str, which: str):
    """Fetch a specific backend implementation (for tests and benchmarks)."""
    table = _NUMBA_KERNELS if which == "numba" else _NUMPY_KERNELS
    if name not in _NUMPY_KERNELS:
        raise KeyError(name)
    if which == "numba" and not NUMBA_ENABLED:
        raise RuntimeError("numba backend is not active")
    return table[name]
