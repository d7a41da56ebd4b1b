"""Hot loops: exact event-driven simulation of the polymerization chain, the
stable-polymer branching process and the M/M/infinity comparison queue.

Every function here is compiled with numba unless ``NUCFRAG_PURE_NUMPY`` is
set (see ``_jit``). All randomness comes from a caller-owned
``np.random.Generator``; numba draws ``rng.random()`` from the same bit
generator with the same conversion as numpy, so the two backends agree bit
for bit. Float powers are expanded into products for the same reason.
"""
import math

import numpy as np

from ._jit import jit, jit_inline

STOP_FIRST_NUCLEATION = 0
STOP_LAG = 1
STOP_HORIZON = 2
STOP_BUDGET = 3
STOP_POLYMERIZED = 4

STATUS_DONE = 0
STATUS_TIME_CAP = 1
STATUS_BUDGET = 2
STATUS_ABSORBED = 3

N_LEVELS = 99
FULL_RECOUNT_EVERY = 1 << 16
FENWICK_REBUILD_EVERY = 1 << 20


@jit_inline
def fenwick_add(tree, pos, delta):
    n = tree.shape[0] - 1
    while pos <= n:
        tree[pos] += delta
        pos += pos & (-pos)


@jit_inline
def fenwick_find(tree, target, top):
    """Smallest position whose prefix sum exceeds ``target``."""
    n = tree.shape[0] - 1
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt <= n and tree[nxt] <= target:
            pos = nxt
            target -= tree[nxt]
        step >>= 1
    return pos + 1


@jit
def fenwick_top(n):
    top = 1
    while top * 2 <= n:
        top *= 2
    return top


@jit
def fenwick_build(values, tree):
    n = tree.shape[0] - 1
    for i in range(n + 1):
        tree[i] = values[i]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


@jit_inline
def draw_fragments(kind, k, p, weights, buf, rng):
    """Write the fragment sizes of a size-``k`` polymer into ``buf``.

    Returns the number of fragments.
    """
    if kind == 0:
        u = rng.random()
        l = 1 + int(u * (k - 1))
        if l > k - 1:
            l = k - 1
        buf[0] = l
        buf[1] = k - l
        return 2
    if kind == 1:
        while True:
            l = 0
            for _ in range(k):
                u = rng.random()
                if u < p:
                    l += 1
            if 0 < l < k:
                break
        buf[0] = l
        buf[1] = k - l
        return 2
    m = weights.shape[0]
    if k < m:
        for i in range(k):
            buf[i] = 1
        return k
    rest = k - m
    wrest = 1.0
    for i in range(m - 1):
        n = 0
        if rest > 0:
            q = weights[i] / wrest
            if q >= 1.0:
                n = rest
            else:
                for _ in range(rest):
                    u = rng.random()
                    if u < q:
                        n += 1
        buf[i] = n + 1
        rest -= n
        wrest -= weights[i]
    buf[m - 1] = rest + 1
    return m


@jit
def sample_fragments_batch(kind, k, p, weights, n_samples, rng):
    """``n_samples`` draws of the kernel sampler, one row per draw (zero padded)."""
    width = max(2, weights.shape[0], k if kind == 2 else 2)
    out = np.zeros((n_samples, width), dtype=np.int64)
    buf = np.zeros(width, dtype=np.int64)
    for i in range(n_samples):
        nf = draw_fragments(kind, k, p, weights, buf, rng)
        for j in range(nf):
            out[i, j] = buf[j]
    return out


@jit
def _full_recount(counts):
    s = 0
    for k in range(1, counts.shape[0]):
        s += k * counts[k]
    return s


@jit
def ssa_kernel(counts, lam, mu_small, mu_stable, n_c, N, truncated,
               frag_kind, frag_p, frag_w,
               stop_kind, stop_value, t_max, budget,
               grid, delta_lag, balance, record_levels, check_mass, trace_cap, rng):
    """Simulate one trajectory in place on ``counts`` (index = polymer size).

    ``lam[k]`` is the growth constant of size ``k`` (extended past the table),
    ``mu_small[k]`` the scaled fragmentation rate of size ``2 <= k < n_c``.
    In truncated mode size ``n_c`` is a sink: it neither grows nor breaks.
    """
    size_cap = counts.shape[0] - 1

    # stable sizes live in Fenwick trees indexed by s - n_c + 1
    n_pos = size_cap - n_c + 1
    if truncated or n_pos < 1:
        n_pos = 1
    sc = np.zeros(n_pos + 1, dtype=np.int64)
    sg = np.zeros(n_pos + 1, dtype=np.float64)
    top = fenwick_top(n_pos)
    lam_const = True
    for s in range(n_c, size_cap + 1):
        if lam[s] != lam[n_c]:
            lam_const = False
    lam_st = lam[n_c]

    S = 0
    stable_mass = 0
    if not truncated:
        vals_i = np.zeros(n_pos + 1, dtype=np.int64)
        vals_f = np.zeros(n_pos + 1, dtype=np.float64)
        for s in range(n_c, size_cap + 1):
            if counts[s] > 0:
                vals_i[s - n_c + 1] = counts[s]
                vals_f[s - n_c + 1] = lam[s] * counts[s]
                S += counts[s]
                stable_mass += s * counts[s]
        fenwick_build(vals_i, sc)
        fenwick_build(vals_f, sg)
    else:
        stable_mass = n_c * counts[n_c]
    sg_total = 0.0
    if not truncated and not lam_const:
        for s in range(n_c, size_cap + 1):
            sg_total += lam[s] * counts[s]

    t = 0.0
    n_events = 0
    T_first = np.nan
    L_lag = np.nan
    half_time = np.nan
    status = STATUS_DONE
    violations = 0
    mass0 = _full_recount(counts)

    nuc_cap = 64
    nuc = np.empty(nuc_cap, dtype=np.float64)
    n_nuc = 0

    ng = grid.shape[0]
    gi = 0
    curve = np.empty((ng + 2 * N_LEVELS + 1, 3), dtype=np.float64)
    nc_pts = 0
    lvl = 1
    lvl_times = np.full(N_LEVELS, np.nan)

    A = np.zeros(n_c - 1, dtype=np.float64)
    B = np.zeros(n_c - 1, dtype=np.float64)

    tr_n = trace_cap if trace_cap > 0 else 0
    tr_t = np.empty(tr_n, dtype=np.float64)
    tr_kind = np.empty(tr_n, dtype=np.int64)
    tr_size = np.empty(tr_n, dtype=np.int64)
    tr_state = np.zeros((tr_n, size_cap + 1), dtype=np.int64)
    n_tr = 0

    gw = np.zeros(n_c, dtype=np.float64)
    fw = np.zeros(n_c, dtype=np.float64)
    fbuf = np.zeros(max(2, frag_w.shape[0]) + 1, dtype=np.int64)
    tsz = np.zeros(fbuf.shape[0] + 3, dtype=np.int64)
    tbefore = np.zeros(fbuf.shape[0] + 3, dtype=np.int64)

    # stop rules already met by the initial state
    if counts[n_c] >= 1 or S > 0:
        T_first = 0.0
    if stable_mass >= delta_lag * N:
        L_lag = 0.0
    if 2 * (N - counts[1]) >= N:
        half_time = 0.0
    done = False
    if stop_kind == STOP_FIRST_NUCLEATION and T_first == T_first:
        done = True
    if stop_kind == STOP_LAG and L_lag == L_lag:
        done = True
    if stop_kind == STOP_POLYMERIZED and (N - counts[1]) >= stop_value * N:
        done = True

    while not done:
        if n_events >= budget:
            status = STATUS_BUDGET
            break
        u1 = counts[1]
        c = u1 / N
        gsum = 0.0
        for k in range(1, n_c):
            w = lam[k] * counts[k]
            if k == 1 and u1 < 2:
                w = 0.0
            gw[k] = w
            gsum += w
        gst = 0.0
        if not truncated:
            gst = lam_st * S if lam_const else sg_total
            if gst < 0.0:
                gst = 0.0
        fsum = 0.0
        for k in range(2, n_c):
            w = mu_small[k] * counts[k]
            fw[k] = w
            fsum += w
        fst = 0.0
        if not truncated:
            fst = mu_stable * S
        R = c * (gsum + gst) + fsum + fst
        if not (R > 0.0):
            status = STATUS_ABSORBED
            break
        if not math.isfinite(R):
            status = -1
            break

        u = rng.random()
        dt = -math.log(1.0 - u) / R
        t_new = t + dt
        if t_new > t_max:
            if balance:
                _accumulate(A, B, counts, n_c, t_max - t)
            t = t_max
            status = STATUS_DONE if stop_kind == STOP_HORIZON else STATUS_TIME_CAP
            break
        while gi < ng and grid[gi] <= t_new:
            curve[nc_pts, 0] = grid[gi]
            curve[nc_pts, 1] = stable_mass
            curve[nc_pts, 2] = N - u1
            nc_pts += 1
            gi += 1
        if balance:
            _accumulate(A, B, counts, n_c, dt)
        t = t_new

        # pick the event; ek == -1 means "some stable size", resolved below
        u = rng.random()
        r = u * R
        ev = -1
        ek = 0
        last_ev = -1
        last_k = 0
        for k in range(1, n_c):
            w = c * gw[k]
            if w > 0.0:
                last_ev = 0
                last_k = k
                if r < w:
                    ev = 0
                    ek = k
                    break
                r -= w
        if ev < 0:
            w = c * gst
            if w > 0.0:
                last_ev = 0
                last_k = -1
                if r < w:
                    ev = 0
                    ek = -1
                else:
                    r -= w
        if ev < 0:
            for k in range(2, n_c):
                w = fw[k]
                if w > 0.0:
                    last_ev = 1
                    last_k = k
                    if r < w:
                        ev = 1
                        ek = k
                        break
                    r -= w
        if ev < 0 and fst > 0.0:
            last_ev = 1
            last_k = -1
            if r < fst:
                ev = 1
                ek = -1
        if ev < 0:
            # r overshot the total through round-off
            ev = last_ev
            ek = last_k
        if ev == 0 and ek == -1:
            if lam_const:
                j = int(r / (c * lam_st))
                if j >= S:
                    j = S - 1
                if j < 0:
                    j = 0
                ek = fenwick_find(sc, j, top) + n_c - 1
            else:
                ek = fenwick_find(sg, r / c, top) + n_c - 1
                if ek > size_cap or counts[ek] == 0:
                    # round-off in the float tree; take the nearest occupied size
                    u = rng.random()
                    j = int(u * S)
                    ek = fenwick_find(sc, j, top) + n_c - 1
        elif ev == 1 and ek == -1:
            j = int(r / mu_stable)
            if j >= S:
                j = S - 1
            if j < 0:
                j = 0
            ek = fenwick_find(sc, j, top) + n_c - 1

        stable_before = stable_mass
        poly_before = N - u1
        if ev == 0:
            k = ek
            b1 = counts[1]
            bk = counts[k]
            bk1 = counts[k + 1]
            counts[1] -= 1
            counts[k] -= 1
            counts[k + 1] += 1
            if k == 1:
                d = (counts[1] - b1) + 2 * (counts[2] - bk1)
            else:
                d = (counts[1] - b1) + k * (counts[k] - bk) + (k + 1) * (counts[k + 1] - bk1)
            if check_mass > 0 and d != 0:
                violations += 1
            if k == n_c - 1:
                if n_nuc == nuc_cap:
                    nuc_cap *= 2
                    tmp = np.empty(nuc_cap, dtype=np.float64)
                    tmp[:n_nuc] = nuc[:n_nuc]
                    nuc = tmp
                nuc[n_nuc] = t
                n_nuc += 1
                if T_first != T_first:
                    T_first = t
                stable_mass += n_c
                if not truncated:
                    S += 1
                    fenwick_add(sc, 1, 1)
                    fenwick_add(sg, 1, lam[n_c])
                    sg_total += lam[n_c]
            elif k >= n_c:
                stable_mass += 1
                fenwick_add(sc, k - n_c + 1, -1)
                fenwick_add(sc, k - n_c + 2, 1)
                fenwick_add(sg, k - n_c + 1, -lam[k])
                fenwick_add(sg, k - n_c + 2, lam[k + 1])
                sg_total += lam[k + 1] - lam[k]
        else:
            k = ek
            nf = draw_fragments(frag_kind, k, frag_p, frag_w, fbuf, rng)
            nt = 0
            if check_mass > 0:
                tsz[0] = k
                tbefore[0] = counts[k]
                nt = 1
                for i in range(nf):
                    s = fbuf[i]
                    seen = False
                    for q in range(nt):
                        if tsz[q] == s:
                            seen = True
                    if not seen:
                        tsz[nt] = s
                        tbefore[nt] = counts[s]
                        nt += 1
            counts[k] -= 1
            if k >= n_c:
                S -= 1
                stable_mass -= k
                fenwick_add(sc, k - n_c + 1, -1)
                fenwick_add(sg, k - n_c + 1, -lam[k])
                sg_total -= lam[k]
            for i in range(nf):
                s = fbuf[i]
                counts[s] += 1
                if s >= n_c:
                    S += 1
                    stable_mass += s
                    fenwick_add(sc, s - n_c + 1, 1)
                    fenwick_add(sg, s - n_c + 1, lam[s])
                    sg_total += lam[s]
            if check_mass > 0:
                d = 0
                for q in range(nt):
                    d += tsz[q] * (counts[tsz[q]] - tbefore[q])
                if d != 0:
                    violations += 1
        n_events += 1

        if check_mass > 1 or (check_mass > 0 and (n_events & (FULL_RECOUNT_EVERY - 1)) == 0):
            if _full_recount(counts) != mass0:
                violations += 1
        if not truncated and not lam_const and (n_events & (FENWICK_REBUILD_EVERY - 1)) == 0:
            vals_f = np.zeros(n_pos + 1, dtype=np.float64)
            sg_total = 0.0
            for s in range(n_c, size_cap + 1):
                vals_f[s - n_c + 1] = lam[s] * counts[s]
                sg_total += lam[s] * counts[s]
            fenwick_build(vals_f, sg)

        if n_tr < tr_n:
            tr_t[n_tr] = t
            tr_kind[n_tr] = ev
            tr_size[n_tr] = ek
            for s in range(size_cap + 1):
                tr_state[n_tr, s] = counts[s]
            n_tr += 1

        poly = N - counts[1]
        if record_levels:
            while lvl <= N_LEVELS and 100 * poly >= lvl * N:
                if lvl_times[lvl - 1] != lvl_times[lvl - 1]:
                    curve[nc_pts, 0] = t
                    curve[nc_pts, 1] = stable_before
                    curve[nc_pts, 2] = poly_before
                    curve[nc_pts + 1, 0] = t
                    curve[nc_pts + 1, 1] = stable_mass
                    curve[nc_pts + 1, 2] = poly
                    nc_pts += 2
                # every level passed by this jump shares the event time
                while lvl <= N_LEVELS and 100 * poly >= lvl * N:
                    lvl_times[lvl - 1] = t
                    lvl += 1
        if half_time != half_time and 2 * poly >= N:
            half_time = t
        if L_lag != L_lag and stable_mass >= delta_lag * N:
            L_lag = t

        if stop_kind == STOP_FIRST_NUCLEATION and T_first == T_first:
            break
        if stop_kind == STOP_LAG and L_lag == L_lag:
            break
        if stop_kind == STOP_POLYMERIZED and poly >= stop_value * N:
            break

    if status == STATUS_DONE or status == STATUS_TIME_CAP:
        while gi < ng and grid[gi] <= t:
            curve[nc_pts, 0] = grid[gi]
            curve[nc_pts, 1] = stable_mass
            curve[nc_pts, 2] = N - counts[1]
            nc_pts += 1
            gi += 1
    curve[nc_pts, 0] = t
    curve[nc_pts, 1] = stable_mass
    curve[nc_pts, 2] = N - counts[1]
    nc_pts += 1
    if check_mass > 0 and _full_recount(counts) != mass0:
        violations += 1

    return (t, n_events, T_first, L_lag, half_time, status, nuc[:n_nuc].copy(),
            curve[:nc_pts].copy(), lvl_times, A, B, violations,
            tr_t[:n_tr].copy(), tr_kind[:n_tr].copy(), tr_size[:n_tr].copy(), tr_state[:n_tr].copy())


@jit_inline
def _accumulate(A, B, counts, n_c, dt):
    """Add the balance-functional integrands over an interval of length ``dt``."""
    if dt <= 0.0:
        return
    x1 = float(counts[1])
    pw = 1.0
    for k in range(1, n_c - 1):
        pw = pw * x1
        A[k] += pw * x1 * counts[n_c - k - 1] * dt
        B[k] += pw * counts[n_c - k] * dt


@jit
def branching_kernel(alpha, mu, n_c, m0, frag_kind, frag_p, frag_w, horizon, cap, grid, rng, budget):
    """Stable-polymer branching process started from one polymer of size ``m0``.

    Every polymer grows at rate ``alpha`` and breaks at rate ``mu``; only
    fragments of size ``>= n_c`` are kept. Since all polymers carry the same
    rates, the acting polymer is a uniform pick from an unordered list of
    sizes, so each event costs O(1). Returns the population sampled on
    ``grid`` (-1 past a cap or budget stop) and the run outcome.
    """
    sizes = np.zeros(64, dtype=np.int64)
    sizes[0] = m0
    P = 1
    t = 0.0
    n_events = 0
    extinct = False
    capped = False
    ext_time = np.nan
    ng = grid.shape[0]
    pop = np.full(ng, -1.0)
    gi = 0
    fbuf = np.zeros(max(2, frag_w.shape[0]) + 1, dtype=np.int64)
    below = 0
    status = STATUS_DONE
    rate = alpha + mu
    while True:
        if P == 0:
            extinct = True
            ext_time = t
            break
        if P >= cap:
            capped = True
            break
        if n_events >= budget:
            status = STATUS_BUDGET
            break
        R = rate * P
        if not (R > 0.0):
            t = horizon
            break
        u = rng.random()
        dt = -math.log(1.0 - u) / R
        if t + dt > horizon:
            t = horizon
            break
        t += dt
        while gi < ng and grid[gi] <= t:
            pop[gi] = P
            gi += 1
        u = rng.random()
        r = u * R
        # polymer j acts; growth if the draw falls in its alpha share
        j = int(r / rate)
        if j >= P:
            j = P - 1
        if mu == 0.0 or r - j * rate < alpha:
            sizes[j] += 1
        else:
            s = sizes[j]
            P -= 1
            sizes[j] = sizes[P]
            nf = draw_fragments(frag_kind, s, frag_p, frag_w, fbuf, rng)
            if P + nf > sizes.shape[0]:
                tmp = np.zeros(2 * (P + nf), dtype=np.int64)
                tmp[:P] = sizes[:P]
                sizes = tmp
            for i in range(nf):
                f = fbuf[i]
                if f >= n_c:
                    sizes[P] = f
                    P += 1
        n_events += 1
    while gi < ng and grid[gi] <= t:
        pop[gi] = P
        gi += 1
    if extinct:
        # extinction is absorbing: the population stays at zero up to the horizon
        while gi < ng and grid[gi] <= horizon:
            pop[gi] = 0.0
            gi += 1
    for i in range(P):
        if sizes[i] < n_c:
            below += 1
    return t, P, extinct, ext_time, capped, pop, n_events, below, status


@jit
def mminf_kernel(arrival, service, level, initial, batch, n_paths, rng):
    """Hitting times of ``level`` for an M/M/infinity queue with batch arrivals."""
    out = np.empty(n_paths, dtype=np.float64)
    for i in range(n_paths):
        x = initial
        t = 0.0
        while x < level:
            R = arrival + service * x
            u = rng.random()
            t += -math.log(1.0 - u) / R
            u = rng.random()
            if u * R < arrival:
                x += batch
            else:
                x -= 1
        out[i] = t
    return out
