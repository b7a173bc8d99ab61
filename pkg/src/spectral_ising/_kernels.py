"""Compiled enumeration and sampling kernels.

All enumeration kernels walk {-1,+1}^n in Gray-code order starting from the
all-minus configuration, so each step flips one spin and the energy and local
fields are updated in O(row support).  State codes use bit i = 1 <=> spin i = +1.
"""

import numpy as np
from numba import njit

_FLUSH = 4096


@njit(cache=True)
def _lowest_bit(k):
    j = 0
    while (k & 1) == 0:
        k >>= 1
        j += 1
    return j


@njit(cache=True)
def _merge(gm, gs, b, lm, ls):
    if ls == 0.0:
        return
    if gs[b] == 0.0:
        gm[b] = lm
        gs[b] = ls
        return
    m = max(gm[b], lm)
    gs[b] = gs[b] * np.exp(gm[b] - m) + ls * np.exp(lm - m)
    gm[b] = m


@njit(cache=True)
def _initial_fields(n, indptr, indices, data):
    h = np.zeros(n)
    e = 0.0
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            h[i] -= data[p]
            if indices[p] > i:
                e += data[p]
    return h, e


@njit(cache=True)
def enumerate_log_bins(n, indptr, indices, data, const, term_pos, phase_member, track_phase, n_terms):
    """Per-bin log-sum-exp of the energy over all 2^n states.

    Bins are ``phase * 2**n_terms + tau_code``; phase 0 means the sum over
    ``phase_member`` spins is positive, 1 otherwise (always 0 if not tracked).
    Returns (max, scaled_sum) so that log Z_bin = max + log(scaled_sum).
    """
    nt = 1 << n_terms
    nbins = 2 * nt
    gm = np.zeros(nbins)
    gs = np.zeros(nbins)
    lm = np.full(nbins, -np.inf)
    ls = np.zeros(nbins)

    sigma = -np.ones(n, dtype=np.int64)
    h, e = _initial_fields(n, indptr, indices, data)
    e += const
    psum = 0
    for i in range(n):
        if phase_member[i]:
            psum -= 1
    code = 0

    b = 0
    if track_phase and psum <= 0:
        b = nt
    lm[b] = e
    ls[b] = 1.0

    total = 1 << n
    for k in range(1, total):
        j = _lowest_bit(k)
        s = sigma[j]
        e -= 2.0 * s * h[j]
        s = -s
        sigma[j] = s
        for p in range(indptr[j], indptr[j + 1]):
            h[indices[p]] += 2.0 * data[p] * s
        if phase_member[j]:
            psum += 2 * s
        tp = term_pos[j]
        if tp >= 0:
            code ^= 1 << tp
        b = code
        if track_phase and psum <= 0:
            b += nt
        if e > lm[b]:
            ls[b] = ls[b] * np.exp(lm[b] - e) + 1.0
            lm[b] = e
        else:
            ls[b] += np.exp(e - lm[b])
        if (k & (_FLUSH - 1)) == 0:
            for q in range(nbins):
                _merge(gm, gs, q, lm[q], ls[q])
                lm[q] = -np.inf
                ls[q] = 0.0
    for q in range(nbins):
        _merge(gm, gs, q, lm[q], ls[q])
    return gm, gs


@njit(cache=True)
def enumerate_level_counts(n, indptr, indices, idata, term_pos, phase_member, track_phase, n_terms, kmax):
    """Exact histogram of integer energy levels per bin.

    ``idata`` holds integer couplings (off-diagonal, both directions); level k of
    a state is sum_{i<j} idata_ij s_i s_j and is stored at column k + kmax.
    """
    nt = 1 << n_terms
    nbins = 2 * nt
    counts = np.zeros((nbins, 2 * kmax + 1), dtype=np.int64)
    sigma = -np.ones(n, dtype=np.int64)
    h = np.zeros(n, dtype=np.int64)
    e = 0
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            h[i] -= idata[p]
            if indices[p] > i:
                e += idata[p]
    psum = 0
    for i in range(n):
        if phase_member[i]:
            psum -= 1
    code = 0
    b = 0
    if track_phase and psum <= 0:
        b = nt
    counts[b, e + kmax] += 1
    total = 1 << n
    for k in range(1, total):
        j = _lowest_bit(k)
        s = sigma[j]
        e -= 2 * s * h[j]
        s = -s
        sigma[j] = s
        for p in range(indptr[j], indptr[j + 1]):
            h[indices[p]] += 2 * idata[p] * s
        if phase_member[j]:
            psum += 2 * s
        tp = term_pos[j]
        if tp >= 0:
            code ^= 1 << tp
        b = code
        if track_phase and psum <= 0:
            b += nt
        counts[b, e + kmax] += 1
    return counts


@njit(cache=True)
def enumerate_energies(n, indptr, indices, data, const):
    """Energy of every state, indexed by state code."""
    out = np.empty(1 << n)
    sigma = -np.ones(n, dtype=np.int64)
    h, e = _initial_fields(n, indptr, indices, data)
    e += const
    out[0] = e
    code = 0
    for k in range(1, 1 << n):
        j = _lowest_bit(k)
        s = sigma[j]
        e -= 2.0 * s * h[j]
        s = -s
        sigma[j] = s
        for p in range(indptr[j], indptr[j + 1]):
            h[indices[p]] += 2.0 * data[p] * s
        code ^= 1 << j
        out[code] = e
    return out


@njit(cache=True)
def terminal_sum_log(n_terms, block_log_w, block_of_term, local_bit, n_blocks, mi, mj, mw, c):
    """log sum over tau in {+-1}^T of prod_v W_v(tau_v) * prod_edges exp(c w tau_i tau_j).

    ``block_log_w[v, code]`` is log W_v for the local terminal code of block v;
    terminal g belongs to block ``block_of_term[g]`` at bit ``local_bit[g]``.
    """
    tau = -np.ones(n_terms, dtype=np.int64)
    codes = np.zeros(n_blocks, dtype=np.int64)
    lw = 0.0
    for v in range(n_blocks):
        lw += block_log_w[v, 0]
    inter = 0.0
    for q in range(mi.shape[0]):
        inter += c * mw[q] * tau[mi[q]] * tau[mj[q]]
    # per-terminal list of incident matching edges
    deg = np.zeros(n_terms, dtype=np.int64)
    for q in range(mi.shape[0]):
        deg[mi[q]] += 1
        deg[mj[q]] += 1
    ptr = np.zeros(n_terms + 1, dtype=np.int64)
    for g in range(n_terms):
        ptr[g + 1] = ptr[g] + deg[g]
    fill = ptr[:-1].copy()
    other = np.empty(ptr[-1], dtype=np.int64)
    wts = np.empty(ptr[-1])
    for q in range(mi.shape[0]):
        other[fill[mi[q]]] = mj[q]
        wts[fill[mi[q]]] = mw[q]
        fill[mi[q]] += 1
        other[fill[mj[q]]] = mi[q]
        wts[fill[mj[q]]] = mw[q]
        fill[mj[q]] += 1

    gm = 0.0
    gs = 0.0
    lm = lw + inter
    ls = 1.0
    for k in range(1, 1 << n_terms):
        g = _lowest_bit(k)
        v = block_of_term[g]
        old = codes[v]
        new = old ^ (1 << local_bit[g])
        lw += block_log_w[v, new] - block_log_w[v, old]
        codes[v] = new
        field = 0.0
        for p in range(ptr[g], ptr[g + 1]):
            field += wts[p] * tau[other[p]]
        inter -= 2.0 * c * tau[g] * field
        tau[g] = -tau[g]
        x = lw + inter
        if x > lm:
            ls = ls * np.exp(lm - x) + 1.0
            lm = x
        else:
            ls += np.exp(x - lm)
        if (k & (_FLUSH - 1)) == 0:
            if gs == 0.0:
                gm = lm
                gs = ls
            else:
                m = max(gm, lm)
                gs = gs * np.exp(gm - m) + ls * np.exp(lm - m)
                gm = m
            lm = -np.inf
            ls = 0.0
    if ls > 0.0:
        if gs == 0.0:
            gm = lm
            gs = ls
        else:
            m = max(gm, lm)
            gs = gs * np.exp(gm - m) + ls * np.exp(lm - m)
            gm = m
    return gm + np.log(gs)


@njit(cache=True)
def glauber_sparse(sigma, h, indptr, indices, data, sweeps, seed, restrict, phase_member, phase_sign, record_every):
    """Random-scan heat-bath updates with CSR local-field maintenance.

    If ``restrict`` is set, updates that would make the sign of the sum over
    ``phase_member`` spins differ from ``phase_sign`` are rejected.
    Returns the per-sweep magnetization trace (every ``record_every`` sweeps).
    """
    np.random.seed(seed)
    n = sigma.shape[0]
    psum = 0
    mag = 0
    for i in range(n):
        mag += sigma[i]
        if phase_member[i]:
            psum += sigma[i]
    n_rec = sweeps // record_every
    trace = np.empty(n_rec, dtype=np.int64)
    rec = 0
    for sw in range(sweeps):
        for _ in range(n):
            i = np.random.randint(n)
            p_plus = 1.0 / (1.0 + np.exp(-2.0 * h[i]))
            new = 1 if np.random.random() < p_plus else -1
            if new == sigma[i]:
                continue
            if restrict and phase_member[i]:
                ns = psum + 2 * new
                if (ns > 0 and phase_sign < 0) or (ns <= 0 and phase_sign > 0):
                    continue
                psum = ns
            elif phase_member[i]:
                psum += 2 * new
            sigma[i] = new
            mag += 2 * new
            for p in range(indptr[i], indptr[i + 1]):
                h[indices[p]] += 2.0 * data[p] * new
        if (sw + 1) % record_every == 0:
            trace[rec] = mag
            rec += 1
    return trace


@njit(cache=True)
def glauber_uniform(sigma, coupling, sweeps, seed, record_every):
    """Heat-bath chain for J_ij = coupling for all i != j; field = coupling*(M - s_i)."""
    np.random.seed(seed)
    n = sigma.shape[0]
    mag = 0
    for i in range(n):
        mag += sigma[i]
    # M - s_i ranges over -n-1..n+1; tabulate Pr[s_i = +1] once
    p_table = np.empty(2 * n + 3)
    for k in range(2 * n + 3):
        p_table[k] = 1.0 / (1.0 + np.exp(-2.0 * coupling * (k - n - 1)))
    n_rec = sweeps // record_every
    trace = np.empty(n_rec, dtype=np.int64)
    rec = 0
    for sw in range(sweeps):
        for _ in range(n):
            i = np.random.randint(n)
            new = 1 if np.random.random() < p_table[mag - sigma[i] + n + 1] else -1
            if new != sigma[i]:
                sigma[i] = new
                mag += 2 * new
        if (sw + 1) % record_every == 0:
            trace[rec] = mag
            rec += 1
    return trace


@njit(cache=True)
def glauber_state_counts(sigma, h, indptr, indices, data, updates, seed):
    """Visit counts per state code after each single-site update (small n)."""
    np.random.seed(seed)
    n = sigma.shape[0]
    counts = np.zeros(1 << n, dtype=np.int64)
    code = 0
    for i in range(n):
        if sigma[i] > 0:
            code |= 1 << i
    for _ in range(updates):
        i = np.random.randint(n)
        p_plus = 1.0 / (1.0 + np.exp(-2.0 * h[i]))
        new = 1 if np.random.random() < p_plus else -1
        if new != sigma[i]:
            sigma[i] = new
            code ^= 1 << i
            for p in range(indptr[i], indptr[i + 1]):
                h[indices[p]] += 2.0 * data[p] * new
        counts[code] += 1
    return counts


@njit(cache=True)
def glauber_terminal_codes(sigma, h, indptr, indices, data, burn_in, sweeps, seed, phase_member, phase_sign, n_terms):
    """Phase-restricted chain; records the code of spins 0..n_terms-1 after each sweep."""
    np.random.seed(seed)
    n = sigma.shape[0]
    psum = 0
    for i in range(n):
        if phase_member[i]:
            psum += sigma[i]
    codes = np.empty(sweeps, dtype=np.int64)
    for sw in range(burn_in + sweeps):
        for _ in range(n):
            i = np.random.randint(n)
            p_plus = 1.0 / (1.0 + np.exp(-2.0 * h[i]))
            new = 1 if np.random.random() < p_plus else -1
            if new == sigma[i]:
                continue
            if phase_member[i]:
                ns = psum + 2 * new
                if (ns > 0 and phase_sign < 0) or (ns <= 0 and phase_sign > 0):
                    continue
                psum = ns
            sigma[i] = new
            for p in range(indptr[i], indptr[i + 1]):
                h[indices[p]] += 2.0 * data[p] * new
        if sw >= burn_in:
            code = 0
            for k in range(n_terms):
                if sigma[k] > 0:
                    code |= 1 << k
            codes[sw - burn_in] = code
    return codes
