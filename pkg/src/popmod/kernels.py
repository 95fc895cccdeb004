"""Hot loops: random-scheduler simulation and strongly connected components.

Each kernel has a numba implementation and a numpy (or scipy) fallback
with identical results; :mod:`popmod._jit` decides which one runs.
Randomness is passed in as a pre-drawn array of uniforms so both paths
produce the same trace for the same seed.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from . import _jit

if _jit.HAVE_NUMBA:
    from numba import njit
else:  # pragma: no cover

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap if not args or not callable(args[0]) else args[0]


KIND_PROTOCOL = 0
KIND_REQUEST = 1
KIND_REMOVE = 2

STATUS_PAUSED = 0
STATUS_DEADLOCK = 1


# ---------------------------------------------------------------------------
# simulation


@njit(cache=True)
def _sim_segment_jit(states, alive, bot_since, counts, L1, L2, R1, R2, bot, K,
                     uniforms, t0, t_stop, rec_kind, rec_a1, rec_a2, rec_t):
    n = states.shape[0]
    T = L1.shape[0]
    enabled = np.empty(T, np.int64)
    t = t0
    while t < t_stop:
        victim = -1
        if bot >= 0 and counts[bot] > 0:
            for a in range(n):
                if alive[a] and states[a] == bot and t + 1 - bot_since[a] >= K:
                    victim = a
                    break
        m = 0
        if victim < 0:
            for j in range(T):
                c1 = counts[L1[j]]
                c2 = counts[L2[j]]
                if c1 >= 1 and c2 >= 1 and (L1[j] != L2[j] or c1 >= 2):
                    enabled[m] = j
                    m += 1
            if m == 0:
                if bot >= 0 and counts[bot] > 0:
                    for a in range(n):
                        if alive[a] and states[a] == bot:
                            victim = a
                            break
                else:
                    return t, STATUS_DEADLOCK
        if victim >= 0:
            alive[victim] = False
            counts[bot] -= 1
            rec_kind[t] = KIND_REMOVE
            rec_a1[t] = victim
            rec_a2[t] = -1
            rec_t[t] = -1
            t += 1
            continue
        k = int(uniforms[t, 0] * m)
        if k >= m:
            k = m - 1
        j = enabled[k]
        q1 = L1[j]
        q2 = L2[j]
        c1 = counts[q1]
        c2 = counts[q2]
        if q1 == q2:
            c2 -= 1
        p = int(uniforms[t, 1] * (c1 * c2))
        if p >= c1 * c2:
            p = c1 * c2 - 1
        i1 = p // c2
        i2 = p % c2
        a1 = -1
        for a in range(n):
            if alive[a] and states[a] == q1:
                if i1 == 0:
                    a1 = a
                    break
                i1 -= 1
        a2 = -1
        for a in range(n):
            if a != a1 and alive[a] and states[a] == q2:
                if i2 == 0:
                    a2 = a
                    break
                i2 -= 1
        counts[q1] -= 1
        counts[q2] -= 1
        counts[R1[j]] += 1
        counts[R2[j]] += 1
        states[a1] = R1[j]
        states[a2] = R2[j]
        if R1[j] == bot and q1 != bot:
            bot_since[a1] = t + 1
        if R2[j] == bot and q2 != bot:
            bot_since[a2] = t + 1
        rec_kind[t] = KIND_PROTOCOL
        rec_a1[t] = a1
        rec_a2[t] = a2
        rec_t[t] = j
        t += 1
    return t, STATUS_PAUSED


def _sim_segment_numpy(states, alive, bot_since, counts, L1, L2, R1, R2, bot, K,
                       uniforms, t0, t_stop, rec_kind, rec_a1, rec_a2, rec_t):
    t = t0
    while t < t_stop:
        victim = -1
        if bot >= 0 and counts[bot] > 0:
            due = np.flatnonzero(alive & (states == bot) & (t + 1 - bot_since >= K))
            if due.size:
                victim = int(due[0])
        if victim < 0:
            c1 = counts[L1]
            c2 = counts[L2]
            enabled = np.flatnonzero((c1 >= 1) & (c2 >= 1) & ((L1 != L2) | (c1 >= 2)))
            m = enabled.size
            if m == 0:
                if bot >= 0 and counts[bot] > 0:
                    victim = int(np.flatnonzero(alive & (states == bot))[0])
                else:
                    return t, STATUS_DEADLOCK
        if victim >= 0:
            alive[victim] = False
            counts[bot] -= 1
            rec_kind[t] = KIND_REMOVE
            rec_a1[t] = victim
            rec_a2[t] = -1
            rec_t[t] = -1
            t += 1
            continue
        j = int(enabled[min(int(uniforms[t, 0] * m), m - 1)])
        q1, q2 = L1[j], L2[j]
        first = np.flatnonzero(alive & (states == q1))
        second = np.flatnonzero(alive & (states == q2))
        pairs = first.size * (second.size - (q1 == q2))
        p = min(int(uniforms[t, 1] * pairs), pairs - 1)
        i1, i2 = divmod(p, second.size - (q1 == q2))
        a1 = int(first[i1])
        a2 = int(second[second != a1][i2])
        counts[q1] -= 1
        counts[q2] -= 1
        counts[R1[j]] += 1
        counts[R2[j]] += 1
        states[a1] = R1[j]
        states[a2] = R2[j]
        if R1[j] == bot and q1 != bot:
            bot_since[a1] = t + 1
        if R2[j] == bot and q2 != bot:
            bot_since[a2] = t + 1
        rec_kind[t] = KIND_PROTOCOL
        rec_a1[t] = a1
        rec_a2[t] = a2
        rec_t[t] = j
        t += 1
    return t, STATUS_PAUSED


def sim_segment(states, alive, bot_since, counts, L1, L2, R1, R2, bot, K,
                uniforms, t0, t_stop, rec_kind, rec_a1, rec_a2, rec_t):
    """Advance a simulation from step ``t0`` until ``t_stop`` or deadlock.

    Arrays are updated in place.  Returns ``(t, status)`` where ``t`` is
    the number of steps taken so far overall.
    """
    fn = _sim_segment_jit if _jit.ENABLE_JIT else _sim_segment_numpy
    t, status = fn(states, alive, bot_since, counts, L1, L2, R1, R2, int(bot), int(K),
                   uniforms, int(t0), int(t_stop), rec_kind, rec_a1, rec_a2, rec_t)
    return int(t), int(status)


# ---------------------------------------------------------------------------
# strongly connected components


@njit(cache=True)
def _tarjan_jit(n, indptr, indices):
    index = np.full(n, -1, np.int64)
    low = np.zeros(n, np.int64)
    onstack = np.zeros(n, np.bool_)
    comp = np.full(n, -1, np.int64)
    stack = np.empty(n, np.int64)
    call_v = np.empty(n, np.int64)
    call_e = np.empty(n, np.int64)
    sp = 0
    counter = 0
    ncomp = 0
    for root in range(n):
        if index[root] != -1:
            continue
        index[root] = counter
        low[root] = counter
        counter += 1
        stack[sp] = root
        sp += 1
        onstack[root] = True
        call_v[0] = root
        call_e[0] = indptr[root]
        cp = 1
        while cp > 0:
            v = call_v[cp - 1]
            e = call_e[cp - 1]
            if e < indptr[v + 1]:
                call_e[cp - 1] = e + 1
                w = indices[e]
                if index[w] == -1:
                    index[w] = counter
                    low[w] = counter
                    counter += 1
                    stack[sp] = w
                    sp += 1
                    onstack[w] = True
                    call_v[cp] = w
                    call_e[cp] = indptr[w]
                    cp += 1
                elif onstack[w] and index[w] < low[v]:
                    low[v] = index[w]
            else:
                cp -= 1
                if low[v] == index[v]:
                    while True:
                        sp -= 1
                        w = stack[sp]
                        onstack[w] = False
                        comp[w] = ncomp
                        if w == v:
                            break
                    ncomp += 1
                if cp > 0:
                    u = call_v[cp - 1]
                    if low[v] < low[u]:
                        low[u] = low[v]
    return ncomp, comp


def scc_labels(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[int, np.ndarray]:
    """Label the strongly connected components of a digraph on ``0..n-1``."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if n == 0:
        return 0, np.zeros(0, np.int64)
    if _jit.ENABLE_JIT:
        order = np.argsort(src, kind="stable")
        indices = dst[order]
        indptr = np.zeros(n + 1, np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        ncomp, comp = _tarjan_jit(n, indptr, indices)
        return int(ncomp), comp
    adj = scipy.sparse.csr_matrix(
        (np.ones(src.size, np.int8), (src, dst)), shape=(n, n)
    )
    ncomp, comp = scipy.sparse.csgraph.connected_components(adj, directed=True, connection="strong")
    return int(ncomp), comp.astype(np.int64)


def bottom_components(n: int, src, dst) -> list[np.ndarray]:
    """Node sets of the SCCs with no edge leaving them, ordered by smallest member."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    ncomp, comp = scc_labels(n, src, dst)
    leaves = np.zeros(ncomp, np.bool_)
    cross = comp[src] != comp[dst]
    leaves[comp[src[cross]]] = True
    members = np.argsort(comp, kind="stable")
    bounds = np.searchsorted(comp[members], np.arange(ncomp + 1))
    blocks = [members[bounds[c]:bounds[c + 1]] for c in range(ncomp) if not leaves[c]]
    blocks.sort(key=lambda b: int(b[0]))
    return blocks
