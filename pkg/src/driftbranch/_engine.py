"""Jit-compiled event loop for the drift / fission / death process.

One replica is an exact race between two clocks:

  fission  the minimum trait hits zero; absolute boundary-hit times
           (birth time + birth trait) sit in a binary min-heap keyed by
           (time, insertion id), so equal times break by insertion order
           and traits are never decremented (no drift rounding).
  death    exponential with rate m * N, redrawn after every event
           (memorylessness keeps this exact); the victim is drawn
           uniformly from an indexed arena with swap-removal.

Randomness comes from an explicit xorshift128+ generator seeded through
splitmix64, so replicas are reproducible from a single 64-bit seed and
independent of any global generator state.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

U64 = np.uint64
_INV_2_53 = 1.0 / 9007199254740992.0  # 2 ** -53


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = z + U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _seed_state(seed):
    st = np.empty(2, dtype=np.uint64)
    st[0] = _splitmix64(U64(seed))
    st[1] = _splitmix64(st[0])
    if st[0] == U64(0) and st[1] == U64(0):
        st[0] = U64(1)
    return st


@njit(cache=True, inline="always")
def _next_u64(st):
    s1 = st[0]
    s0 = st[1]
    st[0] = s0
    s1 = s1 ^ (s1 << U64(23))
    s1 = s1 ^ s0 ^ (s1 >> U64(18)) ^ (s0 >> U64(5))
    st[1] = s1
    return s1 + s0


@njit(cache=True, inline="always")
def _uniform(st):
    return float(_next_u64(st) >> U64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def _exponential(st):
    return -math.log(1.0 - _uniform(st))


@njit(cache=True, inline="always")
def _normal(st):
    u1 = 1.0 - _uniform(st)
    u2 = _uniform(st)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(6.283185307179586 * u2)


@njit(cache=True)
def _std_gamma(shape, st):
    # Marsaglia-Tsang squeeze, with the standard boost below shape 1
    boost = 1.0
    a = shape
    if a < 1.0:
        u = 1.0 - _uniform(st)
        boost = u ** (1.0 / a)
        a += 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _normal(st)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = 1.0 - _uniform(st)
        if u < 1.0 - 0.0331 * x * x * x * x:
            return boost * d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return boost * d * v


@njit(cache=True)
def _sample_tabulated(tab_x, tab_y, tab_c, st):
    # piecewise-linear density: pick a segment by mass, invert the linear cdf
    u = _uniform(st) * tab_c[tab_c.size - 1]
    j = int(np.searchsorted(tab_c, u, side="right")) - 1
    if j < 0:
        j = 0
    if j > tab_x.size - 2:
        j = tab_x.size - 2
    r = u - tab_c[j]
    x0 = tab_x[j]
    h = tab_x[j + 1] - x0
    y0 = tab_y[j]
    s = (tab_y[j + 1] - y0) / h
    if s == 0.0 or abs(s) * h < 1e-14 * max(y0, 1e-300):
        tt = r / y0 if y0 > 0.0 else 0.0
    else:
        disc = y0 * y0 + 2.0 * s * r
        if disc < 0.0:
            disc = 0.0
        tt = (math.sqrt(disc) - y0) / s
    if tt < 0.0:
        tt = 0.0
    if tt > h:
        tt = h
    return x0 + tt


@njit(cache=True, inline="always")
def _sample_density(code, p0, p1, tab_x, tab_y, tab_c, st):
    if code == 0:  # gamma(shape p0, rate p1)
        if p0 == 1.0:
            return _exponential(st) / p1
        if p0 == 2.0:
            return (_exponential(st) + _exponential(st)) / p1
        if p0 == float(int(p0)) and p0 <= 16.0:
            acc = 0.0
            for _ in range(int(p0)):
                acc += _exponential(st)
            return acc / p1
        return _std_gamma(p0, st) / p1
    if code == 1:  # uniform on [p0, p1]
        return p0 + (p1 - p0) * _uniform(st)
    if code == 2:  # exponential(rate p0)
        return _exponential(st) / p0
    return _sample_tabulated(tab_x, tab_y, tab_c, st)


@njit(cache=True, inline="always")
def _sample_pair(kcode, p0, p1, tab_x, tab_y, tab_c, st):
    if kcode == 10:
        # symmetrized product of two normalized polynomial profiles
        s = p0
        a = (1.0 - _uniform(st)) ** (-1.0 / s) - 1.0
        b = (1.0 - _uniform(st)) ** (-1.0 / (s - 1.0)) - 1.0
        if _uniform(st) < 0.5:
            return a, b
        return b, a
    x = _sample_density(kcode, p0, p1, tab_x, tab_y, tab_c, st)
    y = _sample_density(kcode, p0, p1, tab_x, tab_y, tab_c, st)
    return x, y


@njit(cache=True)
def sample_progeny_batch(n, kcode, p0, p1, tab_x, tab_y, tab_c, seed):
    """n progeny pairs straight from the in-loop sampler (for testing)."""
    st = _seed_state(seed)
    out = np.empty((n, 2))
    for i in range(n):
        x, y = _sample_pair(kcode, p0, p1, tab_x, tab_y, tab_c, st)
        out[i, 0] = x
        out[i, 1] = y
    return out


@njit(cache=True, inline="always")
def _heap_push(ht, hid, n, t, pid):
    i = n
    while i > 0:
        par = (i - 1) >> 1
        if ht[par] > t or (ht[par] == t and hid[par] > pid):
            ht[i] = ht[par]
            hid[i] = hid[par]
            i = par
        else:
            break
    ht[i] = t
    hid[i] = pid
    return n + 1


@njit(cache=True, inline="always")
def _heap_pop(ht, hid, n):
    n -= 1
    t = ht[n]
    pid = hid[n]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= n:
            break
        c = l
        r = l + 1
        if r < n and (ht[r] < ht[l] or (ht[r] == ht[l] and hid[r] < hid[l])):
            c = r
        if ht[c] < t or (ht[c] == t and hid[c] < pid):
            ht[i] = ht[c]
            hid[i] = hid[c]
            i = c
        else:
            break
    ht[i] = t
    hid[i] = pid
    return n


@njit(cache=True, inline="always")
def _grow_f8(a):
    b = np.empty(2 * a.size, dtype=np.float64)
    b[: a.size] = a
    return b


@njit(cache=True, inline="always")
def _grow_i8(a):
    b = np.empty(2 * a.size, dtype=np.int64)
    b[: a.size] = a
    return b


@njit(cache=True, inline="always")
def _grow_u1(a):
    b = np.empty(2 * a.size, dtype=np.uint8)
    b[: a.size] = a
    return b


@njit(cache=True, inline="always")
def _record_weights(rec_h, w_code, w_p0, w_p1, idx, n_alive, arena, fiss_abs, t):
    for w in range(w_code.size):
        code = w_code[w]
        if code == 0:
            rec_h[w, idx] = 1.0 + w_p0[w] * n_alive
        elif code == 2:
            rec_h[w, idx] = float(n_alive) ** w_p0[w]
        elif code == 1:
            acc = 0.0
            for k in range(n_alive):
                acc += math.exp(-w_p1[w] * (fiss_abs[arena[k]] - t))
            rec_h[w, idx] = 1.0 + w_p0[w] * n_alive + acc
        else:
            acc = 0.0
            for k in range(n_alive):
                acc += math.log1p(fiss_abs[arena[k]] - t)
            rec_h[w, idx] = math.exp(-w_p0[w] * acc)


@njit(cache=True)
def run_replica_core(
    init_traits,
    m,
    T,
    branching,
    n_max,
    kcode,
    kp0,
    kp1,
    tab_x,
    tab_y,
    tab_c,
    rec_times,
    w_code,
    w_p0,
    w_p1,
    seed,
    collect_final,
    collect_events,
):
    st = _seed_state(seed)
    n0 = init_traits.size
    cap = 2 * n0 + 64

    fiss_abs = np.empty(cap, dtype=np.float64)
    dead = np.zeros(cap, dtype=np.uint8)
    pos_of = np.empty(cap, dtype=np.int64)
    arena = np.empty(cap, dtype=np.int64)
    ht = np.empty(cap, dtype=np.float64)
    hid = np.empty(cap, dtype=np.int64)

    heap_n = 0
    n_alive = 0
    next_id = 0
    for i in range(n0):
        fiss_abs[next_id] = init_traits[i]
        pos_of[next_id] = n_alive
        arena[n_alive] = next_id
        heap_n = _heap_push(ht, hid, heap_n, init_traits[i], next_id)
        next_id += 1
        n_alive += 1

    n_rec = rec_times.size
    rec_N = np.full(n_rec, -1, dtype=np.int64)
    rec_h = np.full((w_code.size, n_rec), np.nan)

    ev_cap = 64 if collect_events else 1
    ev_t = np.empty(ev_cap, dtype=np.float64)
    ev_code = np.empty(ev_cap, dtype=np.int64)
    ev_n = np.empty(ev_cap, dtype=np.int64)
    ev_count = 0

    t = 0.0
    next_rec = 0
    capped = False
    capped_at = np.nan
    extinct_at = np.nan
    n_fissions = 0
    n_deaths = 0
    if n_alive == 0:
        extinct_at = 0.0

    while True:
        while heap_n > 0 and dead[hid[0]] == 1:
            heap_n = _heap_pop(ht, hid, heap_n)
        tf = ht[0] if heap_n > 0 else np.inf
        if m > 0.0 and n_alive > 0:
            td = t + _exponential(st) / (m * n_alive)
        else:
            td = np.inf
        te = tf if tf <= td else td

        # records strictly before the next event; an event at exactly a grid
        # time is therefore applied before that grid point is recorded
        while next_rec < n_rec and rec_times[next_rec] < te:
            rec_N[next_rec] = n_alive
            _record_weights(rec_h, w_code, w_p0, w_p1, next_rec, n_alive, arena, fiss_abs, rec_times[next_rec])
            next_rec += 1

        if te > T:  # also covers te == inf (no further events)
            break
        t = te

        if tf <= td:
            # boundary hit: remove the minimal particle, then branch
            pid = hid[0]
            heap_n = _heap_pop(ht, hid, heap_n)
            dead[pid] = 1
            j = pos_of[pid]
            last = arena[n_alive - 1]
            arena[j] = last
            pos_of[last] = j
            n_alive -= 1
            n_fissions += 1
            if branching:
                x, y = _sample_pair(kcode, kp0, kp1, tab_x, tab_y, tab_c, st)
                if next_id + 2 > fiss_abs.size:
                    fiss_abs = _grow_f8(fiss_abs)
                    dead = _grow_u1(dead)
                    pos_of = _grow_i8(pos_of)
                if n_alive + 2 > arena.size:
                    arena = _grow_i8(arena)
                if heap_n + 2 > ht.size:
                    ht = _grow_f8(ht)
                    hid = _grow_i8(hid)
                tx = t + x
                fiss_abs[next_id] = tx
                dead[next_id] = 0
                pos_of[next_id] = n_alive
                arena[n_alive] = next_id
                heap_n = _heap_push(ht, hid, heap_n, tx, next_id)
                next_id += 1
                n_alive += 1
                ty = t + y
                fiss_abs[next_id] = ty
                dead[next_id] = 0
                pos_of[next_id] = n_alive
                arena[n_alive] = next_id
                heap_n = _heap_push(ht, hid, heap_n, ty, next_id)
                next_id += 1
                n_alive += 1
            if collect_events:
                if ev_count >= ev_t.size:
                    ev_t = _grow_f8(ev_t)
                    ev_code = _grow_i8(ev_code)
                    ev_n = _grow_i8(ev_n)
                ev_t[ev_count] = t
                ev_code[ev_count] = 0
                ev_n[ev_count] = n_alive
                ev_count += 1
            if branching and n_alive > n_max:
                capped = True
                capped_at = t
                break
            if n_alive == 0:
                extinct_at = t
        else:
            # death: uniform victim via swap-removal
            j = int(_uniform(st) * n_alive)
            if j >= n_alive:
                j = n_alive - 1
            pid = arena[j]
            last = arena[n_alive - 1]
            arena[j] = last
            pos_of[last] = j
            n_alive -= 1
            dead[pid] = 1
            n_deaths += 1
            if collect_events:
                if ev_count >= ev_t.size:
                    ev_t = _grow_f8(ev_t)
                    ev_code = _grow_i8(ev_code)
                    ev_n = _grow_i8(ev_n)
                ev_t[ev_count] = t
                ev_code[ev_count] = 1
                ev_n[ev_count] = n_alive
                ev_count += 1
            if n_alive == 0:
                extinct_at = t

    final_time = capped_at if capped else T
    final_n = n_alive
    if collect_final:
        final_traits = np.empty(n_alive, dtype=np.float64)
        for k in range(n_alive):
            final_traits[k] = fiss_abs[arena[k]] - final_time
    else:
        final_traits = np.empty(0, dtype=np.float64)

    return (
        rec_N,
        rec_h,
        capped,
        capped_at,
        extinct_at,
        n_fissions,
        n_deaths,
        final_n,
        final_time,
        final_traits,
        ev_t[:ev_count],
        ev_code[:ev_count],
        ev_n[:ev_count],
    )


@njit(cache=True)
def run_batch_core(
    flat_traits,
    offsets,
    seeds,
    m,
    T,
    branching,
    n_max,
    kcode,
    kp0,
    kp1,
    tab_x,
    tab_y,
    tab_c,
    rec_times,
    w_code,
    w_p0,
    w_p1,
):
    n_rep = seeds.size
    n_rec = rec_times.size
    out_N = np.full((n_rep, n_rec), -1, dtype=np.int64)
    out_h = np.full((n_rep, w_code.size, n_rec), np.nan)
    capped = np.zeros(n_rep, dtype=np.bool_)
    capped_at = np.full(n_rep, np.nan)
    extinct_at = np.full(n_rep, np.nan)
    final_n = np.zeros(n_rep, dtype=np.int64)
    n_fissions = np.zeros(n_rep, dtype=np.int64)
    n_deaths = np.zeros(n_rep, dtype=np.int64)
    for r in range(n_rep):
        init = flat_traits[offsets[r] : offsets[r + 1]]
        (
            rec_N,
            rec_h,
            r_capped,
            r_capped_at,
            r_extinct,
            r_fiss,
            r_death,
            r_final_n,
            _final_time,
            _final_traits,
            _et,
            _ec,
            _en,
        ) = run_replica_core(
            init,
            m,
            T,
            branching,
            n_max,
            kcode,
            kp0,
            kp1,
            tab_x,
            tab_y,
            tab_c,
            rec_times,
            w_code,
            w_p0,
            w_p1,
            seeds[r],
            False,
            False,
        )
        out_N[r] = rec_N
        out_h[r] = rec_h
        capped[r] = r_capped
        capped_at[r] = r_capped_at
        extinct_at[r] = r_extinct
        final_n[r] = r_final_n
        n_fissions[r] = r_fiss
        n_deaths[r] = r_death
    return out_N, out_h, capped, capped_at, extinct_at, final_n, n_fissions, n_deaths


_GOLDEN = 0x9E3779B97F4A7C15


def replica_seed(base_seed: int, index: int) -> int:
    """Replica i gets the i-th output of the splitmix64 stream seeded at
    base_seed (the index enters through the stream's golden-ratio stride, so
    nearby base seeds share no replica streams)."""
    z = (int(base_seed) + int(index) * _GOLDEN) & 0xFFFFFFFFFFFFFFFF
    return int(_splitmix64(U64(z)))
