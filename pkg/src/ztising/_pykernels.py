"""Pure-Python event loops and cluster labelling.

Mirrors ``_ckernels.pyx`` statement for statement, including the order of
random draws, so both backends produce bit-identical trajectories from the
same generator state.
"""

import math

NAIVE = 0
KMC = 1

REACHED = 0
MAX_EVENTS = 1
ABSORBED = 2
WATCH = 3

# counter slots
N1, NH, UNSAT, CORNERS, CORNER_VERTICES, EVENTS, FLIPS = range(7)


def _set_class(i, c, cls, b1, bh, pos, cnt):
    old = cls[i]
    if old == c:
        return
    if old == 2:
        last = cnt[N1] - 1
        j = b1[last]
        b1[pos[i]] = j
        pos[j] = pos[i]
        cnt[N1] = last
    elif old == 1:
        last = cnt[NH] - 1
        j = bh[last]
        bh[pos[i]] = j
        pos[j] = pos[i]
        cnt[NH] = last
    if c == 2:
        b1[cnt[N1]] = i
        pos[i] = cnt[N1]
        cnt[N1] += 1
    elif c == 1:
        bh[cnt[NH]] = i
        pos[i] = cnt[NH]
        cnt[NH] += 1
    cls[i] = c


def _rate_class(k, d):
    if 2 * k > d:
        return 2
    if 2 * k == d:
        return 1
    return 0


def _refresh_corner(p, hb, vb, nbr, corner, pvalid, cnt):
    if not pvalid[p]:
        return
    c = (hb[p] + hb[nbr[4 * p + 2]]) * (vb[p] + vb[nbr[4 * p]])
    old = corner[p]
    if c != old:
        cnt[CORNERS] += c - old
        cnt[CORNER_VERTICES] += (c > 0) - (old > 0)
        corner[p] = c


def _flip(s, t, dh, sp, nbr, deg, dis, cls, b1, bh, pos, hb, vb, corner, pvalid,
          flip_count, low_count, last_flip, cnt):
    new = -sp[s]
    sp[s] = new
    for k in range(4):
        n = nbr[4 * s + k]
        if n < 0:
            continue
        if sp[n] == new:
            dis[n] -= 1
        else:
            dis[n] += 1
        _set_class(n, _rate_class(dis[n], deg[n]), cls, b1, bh, pos, cnt)
    old_k = dis[s]
    dis[s] = deg[s] - old_k
    cnt[UNSAT] += deg[s] - 2 * old_k
    _set_class(s, _rate_class(dis[s], deg[s]), cls, b1, bh, pos, cnt)

    e, w, nn, so = nbr[4 * s], nbr[4 * s + 1], nbr[4 * s + 2], nbr[4 * s + 3]
    if e >= 0:
        hb[s] ^= 1
    if w >= 0:
        hb[w] ^= 1
    if nn >= 0:
        vb[s] ^= 1
    if so >= 0:
        vb[so] ^= 1
    _refresh_corner(s, hb, vb, nbr, corner, pvalid, cnt)
    if w >= 0:
        _refresh_corner(w, hb, vb, nbr, corner, pvalid, cnt)
    if so >= 0:
        _refresh_corner(so, hb, vb, nbr, corner, pvalid, cnt)
        sw = nbr[4 * so + 1]
        if sw >= 0:
            _refresh_corner(sw, hb, vb, nbr, corner, pvalid, cnt)

    flip_count[s] += 1
    if dh < 0:
        low_count[s] += 1
    last_flip[s] = t
    cnt[FLIPS] += 1


def advance(st, rng, t_end, max_events, absorb_stop=True, watch=None, log=None):
    """Apply events of ``st`` until ``t_end``, ``max_events`` or an early stop.

    Returns ``(n_events, status)``.
    """
    sp = memoryview(st.spins)
    nbr = memoryview(st.nbr)
    deg = memoryview(st.deg)
    dis = memoryview(st.dis)
    cls = memoryview(st.cls)
    b1 = memoryview(st.b1)
    bh = memoryview(st.bh)
    pos = memoryview(st.pos)
    hb = memoryview(st.hb)
    vb = memoryview(st.vb)
    corner = memoryview(st.corner)
    pvalid = memoryview(st.pvalid)
    flip_count = memoryview(st.flip_count)
    low_count = memoryview(st.low_count)
    last_flip = memoryview(st.last_flip)
    clock = memoryview(st.clock)
    cnt = memoryview(st.counters)
    wt = memoryview(watch) if watch is not None else None
    if log is not None:
        lseq, ltime, lsite, ldh, lflip, lcoin = (memoryview(a) for a in log)
    random = rng.random
    n = len(sp)
    engine = st.engine_code
    done = 0
    status = REACHED
    t = clock[0]

    while True:
        if done >= max_events:
            status = MAX_EVENTS
            break
        rate = cnt[N1] + 0.5 * cnt[NH]
        if rate == 0.0 and (engine == KMC or absorb_stop):
            status = ABSORBED
            break
        nt = clock[1]
        if math.isnan(nt):
            total = n if engine == NAIVE else rate
            nt = t - math.log1p(-random()) / total
            clock[1] = nt
        if nt > t_end:
            t = t_end
            status = REACHED
            break
        t = nt
        clock[1] = math.nan

        coin = 0
        if engine == NAIVE:
            s = int(random() * n)
            if s >= n:
                s = n - 1
            dh = 2 * (deg[s] - 2 * dis[s])
            if dh < 0:
                flipped = 1
            elif dh == 0:
                coin = 1
                flipped = 1 if random() < 0.5 else 0
            else:
                flipped = 0
        else:
            u = random() * rate
            n1 = cnt[N1]
            if u < n1:
                k = int(u)
                if k >= n1:
                    k = n1 - 1
                s = b1[k]
            else:
                nh = cnt[NH]
                k = int((u - n1) * 2.0)
                if k >= nh:
                    k = nh - 1
                s = bh[k]
            dh = 2 * (deg[s] - 2 * dis[s])
            flipped = 1

        if flipped:
            if dh > 0:
                raise RuntimeError(f"energy-raising flip at site {s}")
            _flip(s, t, dh, sp, nbr, deg, dis, cls, b1, bh, pos, hb, vb, corner, pvalid,
                  flip_count, low_count, last_flip, cnt)
        if log is not None:
            lseq[done] = cnt[EVENTS]
            ltime[done] = t
            lsite[done] = s
            ldh[done] = dh
            lflip[done] = flipped
            lcoin[done] = coin
        cnt[EVENTS] += 1
        done += 1
        if flipped and wt is not None and wt[s]:
            status = WATCH
            break

    clock[0] = t
    return done, status


def _find(parent, ox, oy, i):
    r = i
    dx = dy = 0
    while parent[r] != r:
        dx += ox[r]
        dy += oy[r]
        r = parent[r]
    c, cdx, cdy = i, dx, dy
    while c != r and parent[c] != r:
        nxt = parent[c]
        ndx, ndy = cdx - ox[c], cdy - oy[c]
        parent[c] = r
        ox[c] = cdx
        oy[c] = cdy
        c, cdx, cdy = nxt, ndx, ndy
    return r, dx, dy


def label_clusters(spins, nbr, width, height):
    """Union-find labelling with displacement tracking.

    Returns ``(labels, ux, uy, wrap_x, wrap_y)`` as Python lists: canonical
    label (smallest flat index in the cluster), unwrapped coordinates in the
    cluster's own frame, and per-site wrap flags of the owning cluster.
    """
    n = width * height
    parent = list(range(n))
    size = [1] * n
    ox = [0] * n
    oy = [0] * n
    wx = [0] * n
    wy = [0] * n
    for a in range(n):
        sa = spins[a]
        for slot, dx, dy in ((0, 1, 0), (2, 0, 1)):
            b = nbr[4 * a + slot]
            if b < 0 or spins[b] != sa:
                continue
            ra, pax, pay = _find(parent, ox, oy, a)
            rb, pbx, pby = _find(parent, ox, oy, b)
            mx = dx + pax - pbx
            my = dy + pay - pby
            if ra == rb:
                if mx:
                    wx[ra] = 1
                if my:
                    wy[ra] = 1
                continue
            if size[ra] < size[rb]:
                ra, rb, mx, my = rb, ra, -mx, -my
            parent[rb] = ra
            ox[rb] = mx
            oy[rb] = my
            size[ra] += size[rb]
            wx[ra] |= wx[rb]
            wy[ra] |= wy[rb]

    canon = [-1] * n
    labels = [0] * n
    ux = [0] * n
    uy = [0] * n
    fx = [0] * n
    fy = [0] * n
    for i in range(n):
        r, dx, dy = _find(parent, ox, oy, i)
        if canon[r] < 0:
            canon[r] = i
        labels[i] = canon[r]
        ux[i] = r % width + dx
        uy[i] = r // width + dy
        fx[i] = wx[r]
        fy[i] = wy[r]
    return labels, ux, uy, fx, fy
