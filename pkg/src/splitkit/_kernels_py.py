"""Pure-Python (numpy) fallback for the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature and semantics as its compiled
twin. The fixed-point kernels are bit-exact against the compiled versions;
the float kernels agree to rounding (the fallback leans on BLAS dots).
"""

import numpy as np

BACKEND = "python"


def _reduce(p, frac_bits, word_bits, round_even, saturate):
    # exact product (or sum) on the 2^-2f grid -> back onto the 2^-f grid
    p = np.asarray(p, dtype=np.int64)
    if frac_bits > 0:
        q = p >> frac_bits
        if round_even:
            rem = p - (q << frac_bits)
            half = np.int64(1) << (frac_bits - 1)
            q = q + ((rem > half) | ((rem == half) & ((q & 1) == 1)))
    else:
        q = p
    return _overflow(q, word_bits, saturate)


def _overflow(q, word_bits, saturate):
    lo = -(np.int64(1) << (word_bits - 1))
    hi = (np.int64(1) << (word_bits - 1)) - 1
    if saturate:
        return np.clip(q, lo, hi)
    span = np.int64(1) << word_bits
    return ((q - lo) & (span - 1)) + lo


def q_mul_vec(a, b, frac_bits, word_bits, round_even, saturate):
    return _reduce(np.asarray(a, np.int64) * np.asarray(b, np.int64),
                   frac_bits, word_bits, round_even, saturate)


def q_add_vec(a, b, word_bits, saturate):
    return _overflow(np.asarray(a, np.int64) + np.asarray(b, np.int64),
                     word_bits, saturate)


def q_matvec(M, v, frac_bits, word_bits, round_even, saturate):
    M = np.asarray(M, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    terms = _reduce(M * v[None, :], frac_bits, word_bits, round_even, saturate)
    if not saturate:
        # modular accumulation is order independent; int64 cannot overflow
        # for word_bits <= 31 and fewer than 2^31 columns
        return _overflow(terms.sum(axis=1), word_bits, False)
    acc = np.zeros(M.shape[0], dtype=np.int64)
    for j in range(M.shape[1]):
        acc = _overflow(acc + terms[:, j], word_bits, True)
    return acc


def q_trisolve(G, recip, rhs, lower, frac_bits, word_bits, round_even,
               saturate):
    """Solve ``G y = rhs`` (lower) or ``G^T y = rhs`` (not lower).

    ``G`` is always the lower factor; ``recip`` holds the quantized
    reciprocals of its diagonal so no division happens in the loop.
    """
    G = np.asarray(G, dtype=np.int64)
    n = G.shape[0]
    y = np.zeros(n, dtype=np.int64)
    args = (frac_bits, word_bits, round_even, saturate)
    order = range(n) if lower else range(n - 1, -1, -1)
    for i in order:
        if lower:
            cols = np.arange(0, i)
            coeffs = G[i, :i]
        else:
            cols = np.arange(i + 1, n)
            coeffs = G[i + 1:, i]
        acc = np.int64(0)
        if cols.size:
            terms = _reduce(coeffs * y[cols], *args)
            for t in terms:
                acc = _overflow(acc + t, word_bits, saturate)
        diff = _overflow(np.int64(rhs[i]) - acc, word_bits, saturate)
        y[i] = _reduce(diff * np.int64(recip[i]), *args)
    return y


def cholesky(S):
    """Return ``(G, bad)``; ``bad`` is the failing pivot index or -1."""
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    G = np.zeros((n, n))
    for j in range(n):
        d = S[j, j] - G[j, :j] @ G[j, :j]
        if not d > 0.0:
            return G, j
        G[j, j] = np.sqrt(d)
        G[j + 1:, j] = (S[j + 1:, j] - G[j + 1:, :j] @ G[j, :j]) / G[j, j]
    return G, -1


def trisolve(G, rhs, lower):
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    y = np.zeros(n)
    if lower:
        for i in range(n):
            y[i] = (rhs[i] - G[i, :i] @ y[:i]) / G[i, i]
    else:
        for i in range(n - 1, -1, -1):
            y[i] = (rhs[i] - G[i + 1:, i] @ y[i + 1:]) / G[i, i]
    return y


def round_robin_pairs(n):
    """Tournament schedule: ``n - 1`` rounds (n padded to even) of disjoint pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p < n and q < n:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigvals(S, max_sweeps=60):
    """Cyclic Jacobi with round-robin ordering. Returns ``(eigs, sweeps)``."""
    A = np.array(S, dtype=np.float64, copy=True)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy(), 0
    eps = np.finfo(np.float64).eps
    floor = 2.0 ** -60 * np.sqrt((A * A).sum())
    schedule = [np.array(r, dtype=np.intp).reshape(-1, 2)
                for r in round_robin_pairs(n)]
    sweeps = 0
    while sweeps < max_sweeps:
        rotated = False
        for pairs in schedule:
            P, Q = pairs[:, 0], pairs[:, 1]
            apq = A[P, Q]
            app = A[P, P]
            aqq = A[Q, Q]
            active = (np.abs(apq) > floor) & (
                np.abs(apq) > eps * np.sqrt(np.abs(app * aqq)))
            if not active.any():
                continue
            rotated = True
            P, Q, apq, app, aqq = P[active], Q[active], apq[active], app[active], aqq[active]
            theta = (aqq - app) / (2.0 * apq)
            t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(1.0 + theta * theta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            rp = A[P, :].copy()
            rq = A[Q, :].copy()
            A[P, :] = c[:, None] * rp - s[:, None] * rq
            A[Q, :] = s[:, None] * rp + c[:, None] * rq
            cp = A[:, P].copy()
            cq = A[:, Q].copy()
            A[:, P] = cp * c[None, :] - cq * s[None, :]
            A[:, Q] = cp * s[None, :] + cq * c[None, :]
            A[P, Q] = 0.0
            A[Q, P] = 0.0
        sweeps += 1
        if not rotated:
            break
    return A.diagonal().copy(), sweeps
