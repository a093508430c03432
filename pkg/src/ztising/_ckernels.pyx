# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled event loops and cluster labelling.

Same algorithms and the same order of random draws as ``_pykernels``.
"""

import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport log1p, isnan, NAN
from numpy.random cimport bitgen_t

cdef enum:
    N1 = 0
    NH = 1
    UNSAT = 2
    CORNERS = 3
    CORNER_VERTICES = 4
    EVENTS = 5
    FLIPS = 6

cdef enum:
    C_NAIVE = 0
    C_KMC = 1
    C_REACHED = 0
    C_MAX_EVENTS = 1
    C_ABSORBED = 2
    C_WATCH = 3
    C_RAISING_FLIP = 4

NAIVE = C_NAIVE
KMC = C_KMC
REACHED = C_REACHED
MAX_EVENTS = C_MAX_EVENTS
ABSORBED = C_ABSORBED
WATCH = C_WATCH


cdef struct Arrays:
    signed char *sp
    int *nbr
    signed char *deg
    signed char *dis
    signed char *cls
    int *b1
    int *bh
    int *pos
    unsigned char *hb
    unsigned char *vb
    signed char *corner
    unsigned char *pvalid
    long long *flip_count
    long long *low_count
    double *last_flip
    long long *cnt


cdef inline int _rate_class(int k, int d) noexcept nogil:
    if 2 * k > d:
        return 2
    if 2 * k == d:
        return 1
    return 0


cdef inline void _set_class(Arrays *a, int i, int c) noexcept nogil:
    cdef int old = a.cls[i]
    cdef long long last
    cdef int j
    if old == c:
        return
    if old == 2:
        last = a.cnt[N1] - 1
        j = a.b1[last]
        a.b1[a.pos[i]] = j
        a.pos[j] = a.pos[i]
        a.cnt[N1] = last
    elif old == 1:
        last = a.cnt[NH] - 1
        j = a.bh[last]
        a.bh[a.pos[i]] = j
        a.pos[j] = a.pos[i]
        a.cnt[NH] = last
    if c == 2:
        a.b1[a.cnt[N1]] = i
        a.pos[i] = <int>a.cnt[N1]
        a.cnt[N1] += 1
    elif c == 1:
        a.bh[a.cnt[NH]] = i
        a.pos[i] = <int>a.cnt[NH]
        a.cnt[NH] += 1
    a.cls[i] = c


cdef inline void _refresh_corner(Arrays *a, int p) noexcept nogil:
    cdef int c, old
    if not a.pvalid[p]:
        return
    c = (a.hb[p] + a.hb[a.nbr[4 * p + 2]]) * (a.vb[p] + a.vb[a.nbr[4 * p]])
    old = a.corner[p]
    if c != old:
        a.cnt[CORNERS] += c - old
        a.cnt[CORNER_VERTICES] += (c > 0) - (old > 0)
        a.corner[p] = c


cdef void _flip(Arrays *a, int s, double t, int dh) noexcept nogil:
    cdef signed char new = -a.sp[s]
    cdef int k, n, old_k, e, w, nn, so, sw
    a.sp[s] = new
    for k in range(4):
        n = a.nbr[4 * s + k]
        if n < 0:
            continue
        if a.sp[n] == new:
            a.dis[n] -= 1
        else:
            a.dis[n] += 1
        _set_class(a, n, _rate_class(a.dis[n], a.deg[n]))
    old_k = a.dis[s]
    a.dis[s] = a.deg[s] - old_k
    a.cnt[UNSAT] += a.deg[s] - 2 * old_k
    _set_class(a, s, _rate_class(a.dis[s], a.deg[s]))

    e = a.nbr[4 * s]
    w = a.nbr[4 * s + 1]
    nn = a.nbr[4 * s + 2]
    so = a.nbr[4 * s + 3]
    if e >= 0:
        a.hb[s] ^= 1
    if w >= 0:
        a.hb[w] ^= 1
    if nn >= 0:
        a.vb[s] ^= 1
    if so >= 0:
        a.vb[so] ^= 1
    _refresh_corner(a, s)
    if w >= 0:
        _refresh_corner(a, w)
    if so >= 0:
        _refresh_corner(a, so)
        sw = a.nbr[4 * so + 1]
        if sw >= 0:
            _refresh_corner(a, sw)

    a.flip_count[s] += 1
    if dh < 0:
        a.low_count[s] += 1
    a.last_flip[s] = t
    a.cnt[FLIPS] += 1


def advance(st, rng, double t_end, long long max_events, bint absorb_stop=True,
            watch=None, log=None):
    """Apply events of ``st`` until ``t_end``, ``max_events`` or an early stop.

    Returns ``(n_events, status)``.
    """
    cdef signed char[::1] sp = st.spins
    cdef int[::1] nbr = st.nbr
    cdef signed char[::1] deg = st.deg
    cdef signed char[::1] dis = st.dis
    cdef signed char[::1] cls = st.cls
    cdef int[::1] b1 = st.b1
    cdef int[::1] bh = st.bh
    cdef int[::1] pos = st.pos
    cdef unsigned char[::1] hb = st.hb
    cdef unsigned char[::1] vb = st.vb
    cdef signed char[::1] corner = st.corner
    cdef unsigned char[::1] pvalid = st.pvalid
    cdef long long[::1] flip_count = st.flip_count
    cdef long long[::1] low_count = st.low_count
    cdef double[::1] last_flip = st.last_flip
    cdef double[::1] clock = st.clock
    cdef long long[::1] cnt = st.counters

    cdef unsigned char[::1] wt
    cdef long long[::1] lseq
    cdef double[::1] ltime
    cdef int[::1] lsite
    cdef signed char[::1] ldh
    cdef unsigned char[::1] lflip
    cdef unsigned char[::1] lcoin
    cdef bint has_watch = watch is not None
    cdef bint has_log = log is not None
    if has_watch:
        wt = watch
    if has_log:
        lseq, ltime, lsite, ldh, lflip, lcoin = log

    cdef Arrays a
    a.sp = &sp[0]
    a.nbr = &nbr[0]
    a.deg = &deg[0]
    a.dis = &dis[0]
    a.cls = &cls[0]
    a.b1 = &b1[0]
    a.bh = &bh[0]
    a.pos = &pos[0]
    a.hb = &hb[0]
    a.vb = &vb[0]
    a.corner = &corner[0]
    a.pvalid = &pvalid[0]
    a.flip_count = &flip_count[0]
    a.low_count = &low_count[0]
    a.last_flip = &last_flip[0]
    a.cnt = &cnt[0]

    cdef int engine = st.engine_code
    cdef int n = sp.shape[0]
    cdef long long done = 0
    cdef int status = C_REACHED
    cdef double t = clock[0]
    cdef double rate, nt, total, u
    cdef long long n1, nh, k
    cdef int s = 0, dh = 0, coin, flipped

    bitgen_obj = rng.bit_generator
    cdef bitgen_t *bg = <bitgen_t *> PyCapsule_GetPointer(bitgen_obj.capsule, "BitGenerator")

    with bitgen_obj.lock, nogil:
        while True:
            if done >= max_events:
                status = C_MAX_EVENTS
                break
            rate = a.cnt[N1] + 0.5 * a.cnt[NH]
            if rate == 0.0 and (engine == C_KMC or absorb_stop):
                status = C_ABSORBED
                break
            nt = clock[1]
            if isnan(nt):
                total = n if engine == C_NAIVE else rate
                nt = t - log1p(-bg.next_double(bg.state)) / total
                clock[1] = nt
            if nt > t_end:
                t = t_end
                status = C_REACHED
                break
            t = nt
            clock[1] = NAN

            coin = 0
            if engine == C_NAIVE:
                s = <int>(bg.next_double(bg.state) * n)
                if s >= n:
                    s = n - 1
                dh = 2 * (a.deg[s] - 2 * a.dis[s])
                if dh < 0:
                    flipped = 1
                elif dh == 0:
                    coin = 1
                    flipped = 1 if bg.next_double(bg.state) < 0.5 else 0
                else:
                    flipped = 0
            else:
                u = bg.next_double(bg.state) * rate
                n1 = a.cnt[N1]
                if u < n1:
                    k = <long long>u
                    if k >= n1:
                        k = n1 - 1
                    s = a.b1[k]
                else:
                    nh = a.cnt[NH]
                    k = <long long>((u - n1) * 2.0)
                    if k >= nh:
                        k = nh - 1
                    s = a.bh[k]
                dh = 2 * (a.deg[s] - 2 * a.dis[s])
                flipped = 1

            if flipped:
                if dh > 0:
                    status = C_RAISING_FLIP
                    break
                _flip(&a, s, t, dh)
            if has_log:
                lseq[done] = a.cnt[EVENTS]
                ltime[done] = t
                lsite[done] = s
                ldh[done] = dh
                lflip[done] = flipped
                lcoin[done] = coin
            a.cnt[EVENTS] += 1
            done += 1
            if flipped and has_watch and wt[s]:
                status = C_WATCH
                break

    clock[0] = t
    if status == C_RAISING_FLIP:
        raise RuntimeError(f"energy-raising flip at site {s}")
    return done, status


cdef inline int _find(int *parent, int *ox, int *oy, int i, int *dxo, int *dyo) noexcept nogil:
    cdef int r = i, dx = 0, dy = 0, c, cdx, cdy, nxt, ndx, ndy
    while parent[r] != r:
        dx += ox[r]
        dy += oy[r]
        r = parent[r]
    c = i
    cdx = dx
    cdy = dy
    while c != r and parent[c] != r:
        nxt = parent[c]
        ndx = cdx - ox[c]
        ndy = cdy - oy[c]
        parent[c] = r
        ox[c] = cdx
        oy[c] = cdy
        c = nxt
        cdx = ndx
        cdy = ndy
    dxo[0] = dx
    dyo[0] = dy
    return r


def label_clusters(spins, nbr, int width, int height):
    """Union-find labelling with displacement tracking.

    Returns ``(labels, ux, uy, wrap_x, wrap_y)`` as int32/uint8 arrays.
    """
    cdef const signed char[::1] sp = np.ascontiguousarray(spins, dtype=np.int8).reshape(-1)
    cdef const int[::1] nb = np.ascontiguousarray(nbr, dtype=np.int32).reshape(-1)
    cdef int n = width * height
    parent_a = np.arange(n, dtype=np.int32)
    size_a = np.ones(n, dtype=np.int32)
    ox_a = np.zeros(n, dtype=np.int32)
    oy_a = np.zeros(n, dtype=np.int32)
    wx_a = np.zeros(n, dtype=np.uint8)
    wy_a = np.zeros(n, dtype=np.uint8)
    canon_a = np.full(n, -1, dtype=np.int32)
    labels_a = np.empty(n, dtype=np.int32)
    ux_a = np.empty(n, dtype=np.int32)
    uy_a = np.empty(n, dtype=np.int32)
    fx_a = np.empty(n, dtype=np.uint8)
    fy_a = np.empty(n, dtype=np.uint8)
    cdef int[::1] parent = parent_a
    cdef int[::1] size = size_a
    cdef int[::1] ox = ox_a
    cdef int[::1] oy = oy_a
    cdef unsigned char[::1] wx = wx_a
    cdef unsigned char[::1] wy = wy_a
    cdef int[::1] canon = canon_a
    cdef int[::1] labels = labels_a
    cdef int[::1] ux = ux_a
    cdef int[::1] uy = uy_a
    cdef unsigned char[::1] fx = fx_a
    cdef unsigned char[::1] fy = fy_a
    cdef int a, b, slot, ddx, ddy, ra, rb, pax, pay, pbx, pby, mx, my, tmp, r, dx, dy, i

    with nogil:
        for a in range(n):
            for slot in range(2):
                if slot == 0:
                    b = nb[4 * a]
                    ddx = 1
                    ddy = 0
                else:
                    b = nb[4 * a + 2]
                    ddx = 0
                    ddy = 1
                if b < 0 or sp[b] != sp[a]:
                    continue
                ra = _find(&parent[0], &ox[0], &oy[0], a, &pax, &pay)
                rb = _find(&parent[0], &ox[0], &oy[0], b, &pbx, &pby)
                mx = ddx + pax - pbx
                my = ddy + pay - pby
                if ra == rb:
                    if mx != 0:
                        wx[ra] = 1
                    if my != 0:
                        wy[ra] = 1
                    continue
                if size[ra] < size[rb]:
                    tmp = ra
                    ra = rb
                    rb = tmp
                    mx = -mx
                    my = -my
                parent[rb] = ra
                ox[rb] = mx
                oy[rb] = my
                size[ra] += size[rb]
                wx[ra] |= wx[rb]
                wy[ra] |= wy[rb]

        for i in range(n):
            r = _find(&parent[0], &ox[0], &oy[0], i, &dx, &dy)
            if canon[r] < 0:
                canon[r] = i
            labels[i] = canon[r]
            ux[i] = r % width + dx
            uy[i] = r // width + dy
            fx[i] = wx[r]
            fy[i] = wy[r]
    return labels_a, ux_a, uy_a, fx_a, fy_a
