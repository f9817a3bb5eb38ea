"""Exact minimum-weight perfect matching on general graphs.

Edmonds' blossom algorithm with dual variables (the O(n^3) primal-dual
formulation due to Galil), compiled with numba.  Weights are integers and
all arithmetic is integral, so the optimum is exact.

The public entry point is :func:`min_weight_perfect_matching`; the compiled
kernel :func:`max_weight_matching_kernel` can also be called from other
numba code (the decoder does this).
"""

from __future__ import annotations

import numpy as np
from numba import njit


class NoPerfectMatching(ValueError):
    """The graph has no perfect matching."""


@njit(cache=True)
def max_weight_matching_kernel(n, ei, ej, wt, maxcardinality):
    """Maximum-weight matching of the graph ``(ei[k], ej[k], wt[k])``.

    Returns ``mate_edge``: for every vertex the index of its matched edge,
    or -1 if the vertex is unmatched.  With ``maxcardinality`` the result is
    the heaviest matching among those of maximum cardinality.
    """
    m = ei.shape[0]
    mate_edge = np.full(n, -1, np.int64)
    if m == 0 or n == 0:
        return mate_edge

    maxweight = 0
    for k in range(m):
        if wt[k] > maxweight:
            maxweight = wt[k]

    # endpoint[p] is the vertex at end p of edge p // 2
    endpoint = np.empty(2 * m, np.int64)
    deg = np.zeros(n + 1, np.int64)
    for k in range(m):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
        deg[ei[k] + 1] += 1
        deg[ej[k] + 1] += 1
    nb_ptr = np.cumsum(deg)
    nb_end = np.empty(2 * m, np.int64)
    fill = nb_ptr[:-1].copy()
    for k in range(m):
        nb_end[fill[ei[k]]] = 2 * k + 1
        fill[ei[k]] += 1
        nb_end[fill[ej[k]]] = 2 * k
        fill[ej[k]] += 1

    nb2 = 2 * n
    mate = np.full(n, -1, np.int64)
    label = np.zeros(nb2, np.int64)
    labelend = np.full(nb2, -1, np.int64)
    inblossom = np.arange(n)
    bparent = np.full(nb2, -1, np.int64)
    bchild = np.empty((nb2, n), np.int64)
    bchild_len = np.zeros(nb2, np.int64)
    bendp = np.empty((nb2, n), np.int64)
    bbase = np.full(nb2, -1, np.int64)
    bbase[:n] = np.arange(n)
    bestedge = np.full(nb2, -1, np.int64)
    bbest = np.empty((nb2, nb2), np.int64)
    bbest_len = np.full(nb2, -1, np.int64)
    unused = np.arange(n, nb2)
    n_unused = np.full(1, n, np.int64)
    dualvar = np.zeros(nb2, np.int64)
    dualvar[:n] = maxweight
    allowedge = np.zeros(m, np.bool_)
    queue = np.empty(n, np.int64)
    inqueue = np.zeros(n, np.bool_)
    qlen = np.zeros(1, np.int64)
    leafbuf = np.empty(n, np.int64)
    leafstack = np.empty(nb2, np.int64)
    leafbuf2 = np.empty(n, np.int64)
    bestedgeto = np.full(nb2, -1, np.int64)
    path = np.empty(nb2, np.int64)
    endps = np.empty(nb2, np.int64)
    tmp = np.empty(n, np.int64)
    work = np.empty((nb2, 2), np.int64)

    def slack(k):
        return dualvar[endpoint[2 * k]] + dualvar[endpoint[2 * k + 1]] - 2 * wt[k]

    def leaves(b, out):
        if b < n:
            out[0] = b
            return 1
        cnt = 0
        sp = 1
        leafstack[0] = b
        while sp > 0:
            sp -= 1
            x = leafstack[sp]
            if x < n:
                out[cnt] = x
                cnt += 1
            else:
                for c in range(bchild_len[x] - 1, -1, -1):
                    leafstack[sp] = bchild[x, c]
                    sp += 1
        return cnt

    def push(v):
        if not inqueue[v]:
            inqueue[v] = True
            queue[qlen[0]] = v
            qlen[0] += 1

    def assign_label(w, t, p):
        while True:
            b = inblossom[w]
            label[w] = t
            label[b] = t
            labelend[w] = p
            labelend[b] = p
            bestedge[w] = -1
            bestedge[b] = -1
            if t == 1:
                cnt = leaves(b, leafbuf)
                for i in range(cnt):
                    push(leafbuf[i])
                return
            base = bbase[b]
            w = endpoint[mate[base]]
            t = 1
            p = mate[base] ^ 1

    def scan_blossom(v, w):
        # Trace back from v and w to find a common base (new blossom) or
        # two distinct roots (augmenting path).
        npath = 0
        base = -1
        while v != -1 or w != -1:
            b = inblossom[v]
            if label[b] & 4:
                base = bbase[b]
                break
            path[npath] = b
            npath += 1
            label[b] = 5
            if labelend[b] == -1:
                v = -1
            else:
                v = endpoint[labelend[b]]
                b = inblossom[v]
                v = endpoint[labelend[b]]
            if w != -1:
                v, w = w, v
        for i in range(npath):
            label[path[i]] = 1
        return base

    def add_blossom(base, k):
        v = endpoint[2 * k]
        w = endpoint[2 * k + 1]
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        n_unused[0] -= 1
        b = unused[n_unused[0]]
        bbase[b] = base
        bparent[b] = -1
        bparent[bb] = b
        npath = 0
        while bv != bb:
            bparent[bv] = b
            path[npath] = bv
            endps[npath] = labelend[bv]
            npath += 1
            v = endpoint[labelend[bv]]
            bv = inblossom[v]
        path[npath] = bb
        npath += 1
        # reverse both sequences
        for i in range(npath // 2):
            path[i], path[npath - 1 - i] = path[npath - 1 - i], path[i]
        nend = npath - 1
        for i in range(nend // 2):
            endps[i], endps[nend - 1 - i] = endps[nend - 1 - i], endps[i]
        endps[nend] = 2 * k
        nend += 1
        while bw != bb:
            bparent[bw] = b
            path[npath] = bw
            npath += 1
            endps[nend] = labelend[bw] ^ 1
            nend += 1
            w = endpoint[labelend[bw]]
            bw = inblossom[w]
        for i in range(npath):
            bchild[b, i] = path[i]
            bendp[b, i] = endps[i]
        bchild_len[b] = npath
        label[b] = 1
        labelend[b] = labelend[bb]
        dualvar[b] = 0
        cnt = leaves(b, leafbuf)
        for i in range(cnt):
            x = leafbuf[i]
            if label[inblossom[x]] == 2:
                push(x)
            inblossom[x] = b
        # least-slack edges from the new blossom to neighbouring S-blossoms
        for i in range(nb2):
            bestedgeto[i] = -1
        for ci in range(npath):
            c = bchild[b, ci]
            if bbest_len[c] < 0:
                cnt = leaves(c, leafbuf2)
                for li in range(cnt):
                    x = leafbuf2[li]
                    for q in range(nb_ptr[x], nb_ptr[x + 1]):
                        kk = nb_end[q] // 2
                        i = endpoint[2 * kk]
                        j = endpoint[2 * kk + 1]
                        if inblossom[j] == b:
                            i, j = j, i
                        bj = inblossom[j]
                        if bj != b and label[bj] == 1 and (
                                bestedgeto[bj] == -1 or slack(kk) < slack(bestedgeto[bj])):
                            bestedgeto[bj] = kk
            else:
                for q in range(bbest_len[c]):
                    kk = bbest[c, q]
                    i = endpoint[2 * kk]
                    j = endpoint[2 * kk + 1]
                    if inblossom[j] == b:
                        i, j = j, i
                    bj = inblossom[j]
                    if bj != b and label[bj] == 1 and (
                            bestedgeto[bj] == -1 or slack(kk) < slack(bestedgeto[bj])):
                        bestedgeto[bj] = kk
            bbest_len[c] = -1
            bestedge[c] = -1
        cnt = 0
        for i in range(nb2):
            if bestedgeto[i] != -1:
                bbest[b, cnt] = bestedgeto[i]
                cnt += 1
        bbest_len[b] = cnt
        bestedge[b] = -1
        for q in range(cnt):
            kk = bbest[b, q]
            if bestedge[b] == -1 or slack(kk) < slack(bestedge[b]):
                bestedge[b] = kk

    def child_index(b, t):
        for i in range(bchild_len[b]):
            if bchild[b, i] == t:
                return i
        return -1

    def release(b):
        label[b] = -1
        labelend[b] = -1
        bchild_len[b] = 0
        bbase[b] = -1
        bbest_len[b] = -1
        bestedge[b] = -1
        unused[n_unused[0]] = b
        n_unused[0] += 1

    def expand_blossom(b0, endstage):
        # Nested zero-dual sub-blossoms are expanded too at the end of a
        # stage; an explicit stack replaces recursion.
        sp = 1
        work[0, 0] = b0
        while sp > 0:
            sp -= 1
            b = work[sp, 0]
            for ci in range(bchild_len[b]):
                s = bchild[b, ci]
                bparent[s] = -1
                if s < n:
                    inblossom[s] = s
                elif endstage and dualvar[s] == 0:
                    work[sp, 0] = s
                    sp += 1
                else:
                    cnt = leaves(s, leafbuf)
                    for i in range(cnt):
                        inblossom[leafbuf[i]] = s
            if (not endstage) and label[b] == 2:
                nch = bchild_len[b]
                entrychild = inblossom[endpoint[labelend[b] ^ 1]]
                j = child_index(b, entrychild)
                if j & 1:
                    j -= nch
                    jstep = 1
                    endptrick = 0
                else:
                    jstep = -1
                    endptrick = 1
                p = labelend[b]
                while j != 0:
                    label[endpoint[p ^ 1]] = 0
                    label[endpoint[bendp[b, (j - endptrick) % nch] ^ endptrick ^ 1]] = 0
                    assign_label(endpoint[p ^ 1], 2, p)
                    allowedge[bendp[b, (j - endptrick) % nch] // 2] = True
                    j += jstep
                    p = bendp[b, (j - endptrick) % nch] ^ endptrick
                    allowedge[p // 2] = True
                    j += jstep
                bv = bchild[b, j % nch]
                label[endpoint[p ^ 1]] = 2
                label[bv] = 2
                labelend[endpoint[p ^ 1]] = p
                labelend[bv] = p
                bestedge[bv] = -1
                j += jstep
                while bchild[b, j % nch] != entrychild:
                    bv = bchild[b, j % nch]
                    if label[bv] == 1:
                        j += jstep
                        continue
                    cnt = leaves(bv, leafbuf)
                    found = -1
                    for i in range(cnt):
                        if label[leafbuf[i]] != 0:
                            found = leafbuf[i]
                            break
                    if found != -1:
                        label[found] = 0
                        label[endpoint[mate[bbase[bv]]]] = 0
                        assign_label(found, 2, labelend[found])
                    j += jstep
            release(b)

    def augment_blossom(b0, v0):
        # Swap matched/unmatched edges along the even path from v0 to the
        # base of b0, recursing into sub-blossoms through an explicit stack.
        sp = 1
        work[0, 0] = b0
        work[0, 1] = v0
        while sp > 0:
            sp -= 1
            b = work[sp, 0]
            v = work[sp, 1]
            t = v
            while bparent[t] != b:
                t = bparent[t]
            if t >= n:
                work[sp, 0] = t
                work[sp, 1] = v
                sp += 1
            nch = bchild_len[b]
            i = child_index(b, t)
            j = i
            if i & 1:
                j -= nch
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            while j != 0:
                j += jstep
                t = bchild[b, j % nch]
                p = bendp[b, (j - endptrick) % nch] ^ endptrick
                if t >= n:
                    work[sp, 0] = t
                    work[sp, 1] = endpoint[p]
                    sp += 1
                j += jstep
                t = bchild[b, j % nch]
                if t >= n:
                    work[sp, 0] = t
                    work[sp, 1] = endpoint[p ^ 1]
                    sp += 1
                mate[endpoint[p]] = p ^ 1
                mate[endpoint[p ^ 1]] = p
            # rotate so that the child containing v becomes the base
            for q in range(nch):
                tmp[q] = bchild[b, (q + i) % nch]
            for q in range(nch):
                bchild[b, q] = tmp[q]
            for q in range(nch):
                tmp[q] = bendp[b, (q + i) % nch]
            for q in range(nch):
                bendp[b, q] = tmp[q]
            # children are augmented later from the stack, so their bases are
            # not updated yet; the new base of b is v itself
            bbase[b] = v

    def augment_matching(k):
        for side in range(2):
            if side == 0:
                s = endpoint[2 * k]
                p = 2 * k + 1
            else:
                s = endpoint[2 * k + 1]
                p = 2 * k
            while True:
                bs = inblossom[s]
                if bs >= n:
                    augment_blossom(bs, s)
                mate[s] = p
                if labelend[bs] == -1:
                    break
                t = endpoint[labelend[bs]]
                bt = inblossom[t]
                s = endpoint[labelend[bt]]
                j = endpoint[labelend[bt] ^ 1]
                if bt >= n:
                    augment_blossom(bt, j)
                mate[j] = labelend[bt]
                p = labelend[bt] ^ 1

    for _stage in range(n):
        for i in range(nb2):
            label[i] = 0
            bestedge[i] = -1
        for i in range(n, nb2):
            bbest_len[i] = -1
        for i in range(m):
            allowedge[i] = False
        qlen[0] = 0
        for i in range(n):
            inqueue[i] = False
        for v in range(n):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                assign_label(v, 1, -1)

        augmented = False
        while True:
            while qlen[0] > 0 and not augmented:
                qlen[0] -= 1
                v = queue[qlen[0]]
                inqueue[v] = False
                for q in range(nb_ptr[v], nb_ptr[v + 1]):
                    p = nb_end[q]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = slack(k)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            assign_label(w, 2, p ^ 1)
                        elif label[inblossom[w]] == 1:
                            base = scan_blossom(v, w)
                            if base >= 0:
                                add_blossom(base, k)
                            else:
                                augment_matching(k)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < slack(bestedge[b]):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break

            # No augmenting path on tight edges: update duals.
            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, n):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
            for v in range(n):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = slack(bestedge[v])
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(nb2):
                if bparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = slack(bestedge[b]) // 2
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(n, nb2):
                if (bbase[b] >= 0 and bparent[b] == -1 and label[b] == 2
                        and (deltatype == -1 or dualvar[b] < delta)):
                    delta = dualvar[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                # only reachable with maxcardinality: no further progress
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, n):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
                if delta < 0:
                    delta = 0

            for v in range(n):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(n, nb2):
                if bbase[b] >= 0 and bparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta

            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i = endpoint[2 * deltaedge]
                if label[inblossom[i]] == 0:
                    i = endpoint[2 * deltaedge + 1]
                push(i)
            elif deltatype == 3:
                allowedge[deltaedge] = True
                push(endpoint[2 * deltaedge])
            else:
                expand_blossom(deltablossom, False)

        if not augmented:
            break
        for b in range(n, nb2):
            if (bparent[b] == -1 and bbase[b] >= 0 and label[b] == 1
                    and dualvar[b] == 0):
                expand_blossom(b, True)

    for v in range(n):
        if mate[v] >= 0:
            mate_edge[v] = mate[v] // 2
    return mate_edge


@njit(cache=True)
def min_weight_perfect_matching_kernel(n, ei, ej, w):
    """Compiled core of :func:`min_weight_perfect_matching`.

    Returns ``(mate_edge, ok)``; ``ok`` is False if the matching found is not
    perfect (the graph then has no perfect matching).
    """
    m = ei.shape[0]
    top = 0
    for k in range(m):
        if w[k] > top:
            top = w[k]
    flipped = np.empty(m, np.int64)
    for k in range(m):
        flipped[k] = top + 1 - w[k]
    mate_edge = max_weight_matching_kernel(n, ei, ej, flipped, True)
    ok = True
    for v in range(n):
        if mate_edge[v] < 0:
            ok = False
            break
    return mate_edge, ok


def min_weight_perfect_matching(n, edges):
    """Minimum-weight perfect matching of an integer-weighted graph.

    ``edges`` is an iterable of ``(i, j, weight)`` over vertices ``0..n-1``.
    Returns the matched edges as a sorted list of ``(i, j)`` with ``i < j``.

    Raises :class:`NoPerfectMatching` if no perfect matching exists.
    """
    edges = list(edges)
    if n == 0:
        return []
    if n % 2:
        raise NoPerfectMatching(f"odd number of vertices ({n})")
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 3)
    if (arr[:, 0] == arr[:, 1]).any():
        raise ValueError("self-loops are not allowed")
    if arr.size and (arr[:, :2].min() < 0 or arr[:, :2].max() >= n):
        raise ValueError("edge endpoint out of range")
    mate_edge, ok = min_weight_perfect_matching_kernel(
        n, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())
    if not ok:
        raise NoPerfectMatching("graph admits no perfect matching")
    pairs = set()
    for v in range(n):
        i, j = int(arr[mate_edge[v], 0]), int(arr[mate_edge[v], 1])
        pairs.add((min(i, j), max(i, j)))
    return sorted(pairs)
