"""Exact minimum-weight perfect matching on general graphs.

A compiled port of the O(n^3) primal-dual blossom method for maximum-weight
matching (Edmonds; Galil's formulation as popularized by Van Rantwijk). Lists of
the reference formulation become fixed-size arrays with length counters, and
recursion is replaced by loops and explicit stacks where it is not bounded.

Weights are converted to integers before solving, so all dual updates are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

# keep integer weights well inside int64 after dual-variable arithmetic
_MAX_SCALED = 2**52


@numba.njit(cache=True)
def _slack(k, ei, ej, ew, dualvar):
    return dualvar[ei[k]] + dualvar[ej[k]] - 2 * ew[k]


@numba.njit(cache=True)
def _leaves(b, nvertex, childs, nchilds, out, stack):
    """Write the vertices contained in blossom ``b`` into ``out``; return the count."""
    n_out = 0
    top = 0
    stack[top] = b
    top += 1
    while top > 0:
        top -= 1
        t = stack[top]
        if t < nvertex:
            out[n_out] = t
            n_out += 1
        else:
            for c in range(nchilds[t] - 1, -1, -1):
                stack[top] = childs[t, c]
                top += 1
    return n_out


@numba.njit(cache=True)
def _assign_label(w, t, p, st):
    (
        nvertex, endpoint, mate, label, labelend, inblossom, blossombase,
        childs, nchilds, bestedge, queue, qlen, leafbuf, stackbuf,
    ) = st
    while True:
        b = inblossom[w]
        label[w] = t
        label[b] = t
        labelend[w] = p
        labelend[b] = p
        bestedge[w] = -1
        bestedge[b] = -1
        if t == 1:
            cnt = _leaves(b, nvertex, childs, nchilds, leafbuf, stackbuf)
            for i in range(cnt):
                queue[qlen[0]] = leafbuf[i]
                qlen[0] += 1
            return
        base = blossombase[b]
        w = endpoint[mate[base]]
        t = 1
        p = mate[base] ^ 1


@numba.njit(cache=True)
def _augment_blossom(b, v, nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp):
    t = v
    while blossomparent[t] != b:
        t = blossomparent[t]
    if t >= nvertex:
        _augment_blossom(t, v, nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp)
    nb = nchilds[b]
    i = 0
    while childs[b, i] != t:
        i += 1
    j = i
    if i & 1:
        j -= nb
        jstep = 1
        endptrick = 0
    else:
        jstep = -1
        endptrick = 1
    while j != 0:
        j += jstep
        t = childs[b, j % nb]
        p = endps[b, (j - endptrick) % nb] ^ endptrick
        if t >= nvertex:
            _augment_blossom(t, endpoint[p], nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp)
        j += jstep
        t = childs[b, j % nb]
        if t >= nvertex:
            _augment_blossom(t, endpoint[p ^ 1], nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp)
        mate[endpoint[p]] = p ^ 1
        mate[endpoint[p ^ 1]] = p
    # rotate child lists so that the new base comes first
    for c in range(nb):
        tmp[c] = childs[b, (c + i) % nb]
    for c in range(nb):
        childs[b, c] = tmp[c]
    for c in range(nb):
        tmp[c] = endps[b, (c + i) % nb]
    for c in range(nb):
        endps[b, c] = tmp[c]
    blossombase[b] = blossombase[childs[b, 0]]
    return 0


@numba.njit(cache=True)
def _solve(nvertex, ei, ej, ew, maxcardinality):
    nedge = ei.shape[0]
    endpoint = np.empty(2 * nedge, np.int64)
    for k in range(nedge):
        endpoint[2 * k] = ei[k]
        endpoint[2 * k + 1] = ej[k]
    # neighbour endpoint lists in CSR form
    deg = np.zeros(nvertex + 1, np.int64)
    for k in range(nedge):
        deg[ei[k] + 1] += 1
        deg[ej[k] + 1] += 1
    for v in range(nvertex):
        deg[v + 1] += deg[v]
    nb_ptr = deg.copy()
    fill = deg[:-1].copy()
    neighbend = np.empty(2 * nedge, np.int64)
    for k in range(nedge):
        neighbend[fill[ei[k]]] = 2 * k + 1
        fill[ei[k]] += 1
        neighbend[fill[ej[k]]] = 2 * k
        fill[ej[k]] += 1

    maxweight = 0
    for k in range(nedge):
        if ew[k] > maxweight:
            maxweight = ew[k]

    n2 = 2 * nvertex
    mate = np.full(nvertex, -1, np.int64)
    label = np.zeros(n2, np.int64)
    labelend = np.full(n2, -1, np.int64)
    inblossom = np.arange(nvertex).astype(np.int64)
    blossomparent = np.full(n2, -1, np.int64)
    width = nvertex + 1
    childs = np.full((n2, width), -1, np.int64)
    nchilds = np.zeros(n2, np.int64)
    endps = np.full((n2, width), -1, np.int64)
    blossombase = np.full(n2, -1, np.int64)
    for v in range(nvertex):
        blossombase[v] = v
    bestedge = np.full(n2, -1, np.int64)
    bbe = np.full((n2, n2), -1, np.int64)  # blossom best edges
    nbbe = np.full(n2, -1, np.int64)  # -1 means "not computed"
    unused = np.empty(nvertex, np.int64)
    n_unused = nvertex
    for i in range(nvertex):
        unused[i] = n2 - 1 - i  # pop order n, n+1, ...
    dualvar = np.zeros(n2, np.int64)
    for v in range(nvertex):
        dualvar[v] = maxweight
    allowedge = np.zeros(nedge, np.bool_)
    queue = np.empty(nvertex * 4 + 4, np.int64)
    qlen = np.zeros(1, np.int64)
    leafbuf = np.empty(nvertex, np.int64)
    leafbuf2 = np.empty(nvertex, np.int64)
    stackbuf = np.empty(n2 + 1, np.int64)
    pathbuf = np.empty(n2, np.int64)
    tmp = np.empty(width, np.int64)
    bestedgeto = np.full(n2, -1, np.int64)
    expand_stack = np.empty(n2, np.int64)

    st = (
        nvertex, endpoint, mate, label, labelend, inblossom, blossombase,
        childs, nchilds, bestedge, queue, qlen, leafbuf, stackbuf,
    )

    for _stage in range(nvertex):
        for b in range(n2):
            label[b] = 0
            bestedge[b] = -1
        for b in range(nvertex, n2):
            nbbe[b] = -1
        for k in range(nedge):
            allowedge[k] = False
        qlen[0] = 0
        for v in range(nvertex):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                _assign_label(v, 1, -1, st)
        augmented = False
        while True:
            while qlen[0] > 0 and not augmented:
                qlen[0] -= 1
                v = queue[qlen[0]]
                for idx in range(nb_ptr[v], nb_ptr[v + 1]):
                    p = neighbend[idx]
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    kslack = 0
                    if not allowedge[k]:
                        kslack = _slack(k, ei, ej, ew, dualvar)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            _assign_label(w, 2, p ^ 1, st)
                        elif label[inblossom[w]] == 1:
                            # scan for a blossom or an augmenting path
                            npath = 0
                            base = -1
                            sv = v
                            sw = w
                            while sv != -1 or sw != -1:
                                b = inblossom[sv]
                                if label[b] & 4:
                                    base = blossombase[b]
                                    break
                                pathbuf[npath] = b
                                npath += 1
                                label[b] = 5
                                if labelend[b] == -1:
                                    sv = -1
                                else:
                                    sv = endpoint[labelend[b]]
                                    b = inblossom[sv]
                                    sv = endpoint[labelend[b]]
                                if sw != -1:
                                    sv, sw = sw, sv
                            for i in range(npath):
                                label[pathbuf[i]] = 1
                            if base >= 0:
                                # add a new blossom
                                bv = inblossom[ei[k]]
                                bw = inblossom[ej[k]]
                                bb = inblossom[base]
                                n_unused -= 1
                                nbl = unused[n_unused]
                                blossombase[nbl] = base
                                blossomparent[nbl] = -1
                                blossomparent[bb] = nbl
                                nc = 0
                                while bv != bb:
                                    blossomparent[bv] = nbl
                                    childs[nbl, nc] = bv
                                    endps[nbl, nc] = labelend[bv]
                                    nc += 1
                                    bv = inblossom[endpoint[labelend[bv]]]
                                childs[nbl, nc] = bb
                                nc += 1
                                # reverse so the base child comes first
                                for i in range(nc // 2):
                                    a = childs[nbl, i]
                                    childs[nbl, i] = childs[nbl, nc - 1 - i]
                                    childs[nbl, nc - 1 - i] = a
                                ne = nc - 1
                                for i in range(ne // 2):
                                    a = endps[nbl, i]
                                    endps[nbl, i] = endps[nbl, ne - 1 - i]
                                    endps[nbl, ne - 1 - i] = a
                                endps[nbl, ne] = 2 * k
                                ne += 1
                                while bw != bb:
                                    blossomparent[bw] = nbl
                                    childs[nbl, nc] = bw
                                    nc += 1
                                    endps[nbl, ne] = labelend[bw] ^ 1
                                    ne += 1
                                    bw = inblossom[endpoint[labelend[bw]]]
                                nchilds[nbl] = nc
                                label[nbl] = 1
                                labelend[nbl] = labelend[bb]
                                dualvar[nbl] = 0
                                cnt = _leaves(nbl, nvertex, childs, nchilds, leafbuf2, stackbuf)
                                for i in range(cnt):
                                    lv = leafbuf2[i]
                                    if label[inblossom[lv]] == 2:
                                        queue[qlen[0]] = lv
                                        qlen[0] += 1
                                    inblossom[lv] = nbl
                                for i in range(n2):
                                    bestedgeto[i] = -1
                                for c in range(nc):
                                    cb = childs[nbl, c]
                                    if nbbe[cb] == -1:
                                        cnt = _leaves(cb, nvertex, childs, nchilds, leafbuf2, stackbuf)
                                        for li in range(cnt):
                                            lv = leafbuf2[li]
                                            for idx2 in range(nb_ptr[lv], nb_ptr[lv + 1]):
                                                kk = neighbend[idx2] // 2
                                                ii = ei[kk]
                                                jj = ej[kk]
                                                if inblossom[jj] == nbl:
                                                    ii, jj = jj, ii
                                                bj = inblossom[jj]
                                                if bj != nbl and label[bj] == 1 and (
                                                    bestedgeto[bj] == -1
                                                    or _slack(kk, ei, ej, ew, dualvar)
                                                    < _slack(bestedgeto[bj], ei, ej, ew, dualvar)
                                                ):
                                                    bestedgeto[bj] = kk
                                    else:
                                        for li in range(nbbe[cb]):
                                            kk = bbe[cb, li]
                                            ii = ei[kk]
                                            jj = ej[kk]
                                            if inblossom[jj] == nbl:
                                                ii, jj = jj, ii
                                            bj = inblossom[jj]
                                            if bj != nbl and label[bj] == 1 and (
                                                bestedgeto[bj] == -1
                                                or _slack(kk, ei, ej, ew, dualvar)
                                                < _slack(bestedgeto[bj], ei, ej, ew, dualvar)
                                            ):
                                                bestedgeto[bj] = kk
                                    nbbe[cb] = -1
                                    bestedge[cb] = -1
                                m = 0
                                for i in range(n2):
                                    if bestedgeto[i] != -1:
                                        bbe[nbl, m] = bestedgeto[i]
                                        m += 1
                                nbbe[nbl] = m
                                bestedge[nbl] = -1
                                for i in range(m):
                                    kk = bbe[nbl, i]
                                    if bestedge[nbl] == -1 or _slack(kk, ei, ej, ew, dualvar) < _slack(
                                        bestedge[nbl], ei, ej, ew, dualvar
                                    ):
                                        bestedge[nbl] = kk
                            else:
                                # augment the matching along the found path
                                for side in range(2):
                                    if side == 0:
                                        s = ei[k]
                                        p2 = 2 * k + 1
                                    else:
                                        s = ej[k]
                                        p2 = 2 * k
                                    while True:
                                        bs = inblossom[s]
                                        if bs >= nvertex:
                                            _augment_blossom(bs, s, nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp)
                                        mate[s] = p2
                                        if labelend[bs] == -1:
                                            break
                                        tt = endpoint[labelend[bs]]
                                        bt = inblossom[tt]
                                        s = endpoint[labelend[bt]]
                                        jv = endpoint[labelend[bt] ^ 1]
                                        if bt >= nvertex:
                                            _augment_blossom(bt, jv, nvertex, endpoint, mate, blossomparent, childs, nchilds, endps, blossombase, tmp)
                                        mate[jv] = labelend[bt]
                                        p2 = labelend[bt] ^ 1
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < _slack(bestedge[b], ei, ej, ew, dualvar):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < _slack(bestedge[w], ei, ej, ew, dualvar):
                            bestedge[w] = k
            if augmented:
                break

            deltatype = -1
            delta = 0
            deltaedge = -1
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, nvertex):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
            for v in range(nvertex):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = _slack(bestedge[v], ei, ej, ew, dualvar)
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(n2):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = _slack(bestedge[b], ei, ej, ew, dualvar) // 2
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(nvertex, n2):
                if (
                    blossombase[b] >= 0
                    and blossomparent[b] == -1
                    and label[b] == 2
                    and (deltatype == -1 or dualvar[b] < delta)
                ):
                    delta = dualvar[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = dualvar[0]
                for v in range(1, nvertex):
                    if dualvar[v] < delta:
                        delta = dualvar[v]
                if delta < 0:
                    delta = 0
            for v in range(nvertex):
                lb = label[inblossom[v]]
                if lb == 1:
                    dualvar[v] -= delta
                elif lb == 2:
                    dualvar[v] += delta
            for b in range(nvertex, n2):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                i = ei[deltaedge]
                if label[inblossom[i]] == 0:
                    i = ej[deltaedge]
                queue[qlen[0]] = i
                qlen[0] += 1
            elif deltatype == 3:
                allowedge[deltaedge] = True
                queue[qlen[0]] = ei[deltaedge]
                qlen[0] += 1
            else:
                n_unused = _expand(
                    deltablossom, False, st, blossomparent, endps, dualvar, allowedge,
                    nbbe, unused, n_unused, expand_stack, leafbuf2,
                )
        if not augmented:
            break
        for b in range(nvertex, n2):
            if blossomparent[b] == -1 and blossombase[b] >= 0 and label[b] == 1 and dualvar[b] == 0:
                n_unused = _expand(
                    b, True, st, blossomparent, endps, dualvar, allowedge,
                    nbbe, unused, n_unused, expand_stack, leafbuf2,
                )

    out = np.full(nvertex, -1, np.int64)
    for v in range(nvertex):
        if mate[v] >= 0:
            out[v] = endpoint[mate[v]]
    return out


@numba.njit(cache=True)
def _release(b, label, labelend, nchilds, blossombase, nbbe, bestedge, unused, n_unused):
    label[b] = -1
    labelend[b] = -1
    nchilds[b] = 0
    blossombase[b] = -1
    nbbe[b] = -1
    bestedge[b] = -1
    unused[n_unused] = b
    return n_unused + 1


@numba.njit(cache=True)
def _expand(b0, endstage, st, blossomparent, endps, dualvar, allowedge, nbbe, unused, n_unused, stack, leafbuf2):
    (
        nvertex, endpoint, mate, label, labelend, inblossom, blossombase,
        childs, nchilds, bestedge, queue, qlen, leafbuf, stackbuf,
    ) = st
    if endstage:
        # depth-first expansion of zero-dual sub-blossoms
        top = 0
        stack[top] = b0
        top += 1
        while top > 0:
            top -= 1
            b = stack[top]
            for c in range(nchilds[b]):
                s = childs[b, c]
                blossomparent[s] = -1
                if s < nvertex:
                    inblossom[s] = s
                elif dualvar[s] == 0:
                    stack[top] = s
                    top += 1
                else:
                    cnt = _leaves(s, nvertex, childs, nchilds, leafbuf2, stackbuf)
                    for i in range(cnt):
                        inblossom[leafbuf2[i]] = s
            n_unused = _release(b, label, labelend, nchilds, blossombase, nbbe, bestedge, unused, n_unused)
        return n_unused

    b = b0
    nb = nchilds[b]
    for c in range(nb):
        s = childs[b, c]
        blossomparent[s] = -1
        if s < nvertex:
            inblossom[s] = s
        else:
            cnt = _leaves(s, nvertex, childs, nchilds, leafbuf2, stackbuf)
            for i in range(cnt):
                inblossom[leafbuf2[i]] = s
    if label[b] == 2:
        entrychild = inblossom[endpoint[labelend[b] ^ 1]]
        j = 0
        while childs[b, j] != entrychild:
            j += 1
        if j & 1:
            j -= nb
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        p = labelend[b]
        while j != 0:
            label[endpoint[p ^ 1]] = 0
            label[endpoint[endps[b, (j - endptrick) % nb] ^ endptrick ^ 1]] = 0
            _assign_label(endpoint[p ^ 1], 2, p, st)
            allowedge[endps[b, (j - endptrick) % nb] // 2] = True
            j += jstep
            p = endps[b, (j - endptrick) % nb] ^ endptrick
            allowedge[p // 2] = True
            j += jstep
        bv = childs[b, j % nb]
        label[endpoint[p ^ 1]] = 2
        label[bv] = 2
        labelend[endpoint[p ^ 1]] = p
        labelend[bv] = p
        bestedge[bv] = -1
        j += jstep
        while childs[b, j % nb] != entrychild:
            bv = childs[b, j % nb]
            if label[bv] == 1:
                j += jstep
                continue
            cnt = _leaves(bv, nvertex, childs, nchilds, leafbuf2, stackbuf)
            found = -1
            for i in range(cnt):
                if label[leafbuf2[i]] != 0:
                    found = leafbuf2[i]
                    break
            if found >= 0:
                label[found] = 0
                label[endpoint[mate[blossombase[bv]]]] = 0
                _assign_label(found, 2, labelend[found], st)
            j += jstep
    return _release(b, label, labelend, nchilds, blossombase, nbbe, bestedge, unused, n_unused)


# public API -----------------------------------------------------------------------


def max_weight_matching_int(n: int, edges: np.ndarray, weights: np.ndarray, maxcardinality: bool = False) -> np.ndarray:
    """Maximum-weight matching with integer weights; returns ``mate`` (-1 if unmatched)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=np.int64)
    if n == 0:
        return np.empty(0, np.int64)
    if len(edges) == 0:
        return np.full(n, -1, np.int64)
    if (edges[:, 0] == edges[:, 1]).any():
        raise ValueError("self loops are not allowed")
    return _solve(n, edges[:, 0].copy(), edges[:, 1].copy(), weights, maxcardinality)


@dataclass
class MatchingGraph:
    """Undirected weighted graph for perfect matching; weights are nonnegative reals."""

    n_nodes: int
    edges: list[tuple[int, int, float]] = field(default_factory=list)

    def add_edge(self, i: int, j: int, w: float):
        if w < 0 or not np.isfinite(w):
            raise ValueError(f"edge weight must be finite and nonnegative, got {w}")
        self.edges.append((int(i), int(j), float(w)))

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.empty((0, 2), np.int64), np.empty(0)
        arr = np.asarray(self.edges, dtype=float)
        return arr[:, :2].astype(np.int64), arr[:, 2]

    def to_text(self, matching: list[tuple[int, int]] | None = None) -> str:
        lines = [f"# nodes {self.n_nodes}"]
        lines += [f"{i} {j} {w:.12g}" for i, j, w in self.edges]
        if matching is not None:
            lines.append("# matching")
            lines += [f"{i} {j}" for i, j in matching]
        return "\n".join(lines) + "\n"


def min_weight_perfect_matching(graph: MatchingGraph) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching; pairs sorted, smaller id first."""
    n = graph.n_nodes
    if n % 2:
        raise ValueError(f"perfect matching needs an even node count, got {n}")
    if n == 0:
        return []
    edges, w = graph.edge_arrays()
    mate = solve_min_weight_perfect(n, edges, w)
    return sorted((v, int(mate[v])) for v in range(n) if v < mate[v])


def solve_min_weight_perfect(n: int, edges: np.ndarray, weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    top = float(weights.max()) if len(weights) else 0.0
    scale = 1e6
    if top * scale * n > _MAX_SCALED:
        scale = _MAX_SCALED / max(top * n, 1.0)
    iw = np.rint(weights * scale).astype(np.int64)
    # maximize (C - w) over maximum-cardinality matchings; even values keep duals integral
    big = int(iw.max()) + 1 if len(iw) else 1
    mate = max_weight_matching_int(n, edges, 2 * (big - iw), maxcardinality=True)
    if (mate < 0).any():
        raise ValueError("graph has no perfect matching")
    return mate
