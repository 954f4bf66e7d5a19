"""Anisotropic Fast Marching on the group lattice.

Front propagation in the style of Dijkstra, except that a node's value
may come from a point on a face of the neighbor stencil rather than a
single neighbor: for a simplex of Known vertices with values U_i and
offsets o_i (in axis units, relative to the node being updated), the
candidate value is

    min over barycentric t >= 0, sum(t) = 1  of  t.U + ||t.o||_G

with G the metric tensor at the *destination* node.  The interior
stationary point is solved in closed form; when it is infeasible the
minimum lies on a facet, which is enumerated as a smaller simplex.

Simplices are the chains of the Freudenthal triangulation of the
hypercube neighborhood: sets of offsets in a common closed orthant,
totally ordered by componentwise absolute value.  Every simplex used for
an update contains the node popped last (older simplices were applied on
earlier pops).  Nodes and metric tensors are created lazily, so the
lattice needs no a-priori bounds.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import CorruptMap
from .groups import GroupPoint, TransformGroup

DEFAULT_MAX_ITERS = 50_000

KNOWN = "known"
UNKNOWN = "unknown"


def _as_matrix(G) -> np.ndarray:
    return np.asarray(getattr(G, "entries", G), dtype=float)


# ---------------------------------------------------------------------------
# local update rules


def edge_update(u_a: float, offset_a, G) -> float:
    """Value through a single Known neighbor: U_a + ||offset||_G."""
    Gm = _as_matrix(G)
    o = np.asarray(offset_a, dtype=float)
    return float(u_a) + math.sqrt(max(float(o @ Gm @ o), 0.0))


def _stationary_solve(us: np.ndarray, Q: np.ndarray):
    """Interior stationary point of t.us + sqrt(t'Qt) on the simplex.

    Returns (value, t) or None when the stationary point is infeasible
    (some weight negative) or does not exist (singular Q, flat objective).
    """
    k = len(us)
    ones = np.ones(k)
    try:
        sol = np.linalg.solve(Q, np.stack([ones, us], axis=1))
    except np.linalg.LinAlgError:
        return None
    qi_one, qi_u = sol[:, 0], sol[:, 1]
    A = float(ones @ qi_one)
    B = float(ones @ qi_u)
    C = float(us @ qi_u) - 1.0
    disc = B * B - A * C
    if A <= 0.0 or disc < 0.0:
        return None
    lam = (B + math.sqrt(disc)) / A
    w = lam * qi_one - qi_u
    ssum = float(w.sum())
    if ssum <= 0.0:
        return None
    t = w / ssum
    if np.any(t < -1e-12):
        return None
    t = np.clip(t, 0.0, None)
    t = t / t.sum()
    val = float(us @ t) + math.sqrt(max(float(t @ Q @ t), 0.0))
    return val, t


def _stationary_solve_2(u0: float, u1: float, Q: np.ndarray):
    """Scalar specialization of :func:`_stationary_solve` for two vertices."""
    q00 = float(Q[0, 0])
    q01 = float(Q[0, 1])
    q11 = float(Q[1, 1])
    det = q00 * q11 - q01 * q01
    if det <= 0.0:
        return None
    x1 = (q11 - q01) / det
    y1 = (q00 - q01) / det
    xu = (q11 * u0 - q01 * u1) / det
    yu = (q00 * u1 - q01 * u0) / det
    A = x1 + y1
    B = xu + yu
    C = u0 * xu + u1 * yu - 1.0
    disc = B * B - A * C
    if A <= 0.0 or disc < 0.0:
        return None
    lam = (B + math.sqrt(disc)) / A
    w0 = lam * x1 - xu
    w1 = lam * y1 - yu
    ssum = w0 + w1
    if ssum <= 0.0:
        return None
    t0 = w0 / ssum
    t1 = w1 / ssum
    if t0 < -1e-12 or t1 < -1e-12:
        return None
    t0 = min(max(t0, 0.0), 1.0)
    t1 = 1.0 - t0
    quad = t0 * t0 * q00 + 2.0 * t0 * t1 * q01 + t1 * t1 * q11
    val = u0 * t0 + u1 * t1 + math.sqrt(max(quad, 0.0))
    return val, np.array([t0, t1])


def _solve_simplex(us: np.ndarray, P: np.ndarray, G: np.ndarray):
    """Constrained minimum over the simplex; recurses on facets when needed.

    ``us``: k Known values; ``P``: k x p offsets.  Returns (value, weights).
    """
    k = len(us)
    if k == 1:
        return edge_update(us[0], P[0], G), np.ones(1)
    Q = P @ G @ P.T
    if k == 2:
        interior = _stationary_solve_2(float(us[0]), float(us[1]), Q)
    else:
        interior = _stationary_solve(us, Q)
    if interior is not None:
        return interior
    best_val = math.inf
    best_t = None
    for drop in range(k):
        keep = [i for i in range(k) if i != drop]
        val, sub_t = _solve_simplex(us[keep], P[keep], G)
        if val < best_val:
            best_val = val
            t = np.zeros(k)
            t[keep] = sub_t
            best_t = t
    return best_val, best_t


def triangle_update(u_a: float, u_b: float, offset_a, offset_b, G) -> float:
    """Two-vertex (triangle) update: exact minimum over the connecting segment."""
    us = np.array([float(u_a), float(u_b)])
    P = np.stack([np.asarray(offset_a, dtype=float), np.asarray(offset_b, dtype=float)])
    val, _ = _solve_simplex(us, P, _as_matrix(G))
    return val


def simplex_update(us, offsets, G) -> float:
    """k-vertex simplex update, 1 <= k <= p; reduces to edge/triangle for small k."""
    us = np.asarray(us, dtype=float)
    P = np.stack([np.asarray(o, dtype=float) for o in offsets])
    val, _ = _solve_simplex(us, P, _as_matrix(G))
    return val


# ---------------------------------------------------------------------------
# distance map


@dataclass
class NodeRecord:
    distance: float
    state: str = UNKNOWN
    # ((lattice, weight), ...) over the simplex vertices of the winning update
    predecessor: Optional[tuple] = None
    label: Optional[int] = None
    # Mahalanobis length of the winning update's final segment
    increment: float = 0.0


@dataclass
class DistanceMap:
    group: TransformGroup
    nodes: dict = field(default_factory=dict)

    def known_items(self):
        return [(lat, rec) for lat, rec in self.nodes.items() if rec.state == KNOWN]


@dataclass(frozen=True)
class StopSignal:
    halt: bool
    label: Optional[int] = None


@dataclass(frozen=True)
class Outcome:
    kind: str  # 'hit' | 'exhausted' | 'swept'
    node: Optional[GroupPoint] = None
    distance: Optional[float] = None
    pops: int = 0
    # largest decrease between consecutively frozen distances; exactly 0 for
    # causal (e.g. constant or mildly anisotropic) metric fields, small and
    # positive when anisotropy outruns the stencil's guarantee
    order_violation: float = 0.0


def neighbor_offsets(p: int) -> list[tuple[int, ...]]:
    """All 3^p - 1 hypercube-adjacent lattice offsets."""
    return [o for o in itertools.product((-1, 0, 1), repeat=p) if any(o)]


def _chain_compatible(a: tuple[int, ...], b: tuple[int, ...]) -> bool:
    """True when a and b share an orthant and are ordered by |.| componentwise."""
    le = ge = True
    for x, y in zip(a, b):
        if x * y < 0:
            return False
        ax, ay = abs(x), abs(y)
        if ax > ay:
            le = False
        elif ax < ay:
            ge = False
    return le or ge


def _build_chain_table(p: int) -> dict:
    """All stencil simplices through each pivot offset, as offset tuples.

    Depends only on the dimension, so the table is cached per p.  Each
    chain lists its vertices pivot-first; sizes run from 1 to p.
    """
    offs = neighbor_offsets(p)
    table = {}
    for pivot in offs:
        cands = [c for c in offs if c != pivot and _chain_compatible(pivot, c)]
        chains = [(pivot,)]

        def extend(chain, start):
            for pos in range(start, len(cands)):
                c = cands[pos]
                if all(_chain_compatible(c, m) for m in chain[1:]):
                    new = chain + (c,)
                    chains.append(new)
                    if len(new) < p:
                        extend(new, pos + 1)

        if p > 1:
            extend((pivot,), 0)
        table[pivot] = chains
    return table


_CHAIN_TABLES: dict[int, dict] = {}


def _chain_table(p: int) -> dict:
    if p not in _CHAIN_TABLES:
        _CHAIN_TABLES[p] = _build_chain_table(p)
    return _CHAIN_TABLES[p]


def run(
    group: TransformGroup,
    metric_field: Callable[[GroupPoint], object],
    stop: Optional[Callable[[GroupPoint], StopSignal]] = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    bounds: Optional[Iterable[tuple[int, int]]] = None,
) -> tuple[DistanceMap, Outcome]:
    """Propagate the front from the identity until stopped.

    ``stop`` is invoked once per frozen node (the classifier hook); a
    halting signal ends the run with outcome ``hit``.  ``bounds``
    restricts node generation to an inclusive per-axis lattice window.
    Returns ``exhausted`` after ``max_iters`` pops, or ``swept`` when the
    front runs out of nodes first.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    p = group.dim
    bounds = tuple(tuple(b) for b in bounds) if bounds is not None else None
    offsets = neighbor_offsets(p)
    off_index = {o: i for i, o in enumerate(offsets)}
    steps = np.asarray(group.steps)
    scaled = np.asarray(offsets, dtype=float) * steps

    # Chain table as index tuples into ``offsets``, grouped by simplex
    # size with pre-gathered index arrays: one size class across all
    # neighbors of a pop is then solved in a single batched linear solve.
    chain_tab = {}
    used_tab = {}
    for pivot, chains in _chain_table(p).items():
        pi = off_index[pivot]
        by_k: dict[int, list] = {}
        for ch in chains:
            if len(ch) >= 2:
                by_k.setdefault(len(ch), []).append(tuple(off_index[o] for o in ch))
        chain_tab[pi] = {
            k: (lst, np.array(lst, dtype=int)) for k, lst in by_k.items()
        }
        used_tab[pi] = sorted({off_index[o] for ch in chains for o in ch})

    dmap = DistanceMap(group)
    nodes = dmap.nodes
    origin = (0,) * p
    nodes[origin] = NodeRecord(distance=0.0)
    heap = [(0.0, origin)]
    # a narrow-band node's stencil lattices are rebuilt on every update
    # from a freshly popped neighbor, so cache them until it freezes
    stencils: dict[tuple, list] = {}
    pops = 0
    last_frozen = 0.0
    order_violation = 0.0

    def in_bounds(lat):
        if bounds is None:
            return True
        return all(lo <= k <= hi for k, (lo, hi) in zip(lat, bounds))

    while heap:
        u_min, lat_min = heapq.heappop(heap)
        rec_min = nodes[lat_min]
        if rec_min.state == KNOWN or u_min > rec_min.distance:
            continue  # stale lazy-deletion entry
        rec_min.state = KNOWN
        stencils.pop(lat_min, None)
        pops += 1
        if u_min < last_frozen:
            order_violation = max(order_violation, last_frozen - u_min)
        last_frozen = max(last_frozen, u_min)
        point_min = group.point_from_lattice(lat_min)

        if stop is not None:
            sig = stop(point_min)
            if sig.label is not None:
                rec_min.label = sig.label
            if sig.halt:
                return dmap, Outcome("hit", point_min, u_min, pops, order_violation)
        if pops >= max_iters:
            return dmap, Outcome("exhausted", None, None, pops, order_violation)

        # gather every updatable stencil neighbor of the popped node
        upd_lats, upd_recs, upd_pivots, upd_G, upd_vals = [], [], [], [], []
        for off in offsets:
            nlat = tuple(a + b for a, b in zip(lat_min, off))
            if not in_bounds(nlat):
                continue
            nrec = nodes.get(nlat)
            if nrec is not None and nrec.state == KNOWN:
                continue
            npoint = group.point_from_lattice(nlat)
            if not npoint.valid:
                continue
            G = _as_matrix(metric_field(npoint))
            pivot = off_index[tuple(-o for o in off)]
            stencil = stencils.get(nlat)
            if stencil is None:
                stencil = stencils[nlat] = [
                    tuple(a + b for a, b in zip(nlat, noff)) for noff in offsets
                ]
            # Known values on the part of the stencil reachable by chains
            # through the pivot; everything else stays +inf
            vals = np.full(len(offsets), np.inf)
            for idx in used_tab[pivot]:
                krec = nodes.get(stencil[idx])
                if krec is not None and krec.state == KNOWN:
                    vals[idx] = krec.distance
            upd_lats.append(nlat)
            upd_recs.append(nrec)
            upd_pivots.append(pivot)
            upd_G.append(G)
            upd_vals.append(vals)
        if not upd_lats:
            continue
        nu = len(upd_lats)
        Gs = np.stack(upd_G)
        V = np.stack(upd_vals)

        # single-vertex update through the pivot, always feasible
        po = scaled[np.asarray(upd_pivots)]
        quad = np.einsum("np,npq,nq->n", po, Gs, po)
        best_val = u_min + np.sqrt(np.maximum(quad, 0.0))
        best_chain = [(pv,) for pv in upd_pivots]
        one = np.ones(1)
        best_t = [one] * nu

        # larger simplices batched per size across all neighbors; facets
        # need no separate sweep, since every sub-chain through the pivot
        # is in the table and facets missing the pivot were applied on
        # earlier pops
        for k in range(2, p + 1):
            us_parts, idx_parts, seg_parts, row_parts = [], [], [], []
            for j in range(nu):
                entry = chain_tab[upd_pivots[j]].get(k)
                if entry is None:
                    continue
                us_j = V[j][entry[1]]
                rows = np.nonzero(np.isfinite(us_j).all(axis=1))[0]
                if rows.size == 0:
                    continue
                us_parts.append(us_j[rows])
                idx_parts.append(entry[1][rows])
                seg_parts.append(np.full(rows.size, j))
                row_parts.append(rows)
            if not us_parts:
                continue
            us = np.concatenate(us_parts)
            seg = np.concatenate(seg_parts)
            rowpos = np.concatenate(row_parts)
            P = scaled[np.concatenate(idx_parts)]
            Q = np.einsum("mip,mpq,mjq->mij", P, Gs[seg], P)
            diag = np.arange(k)
            tr = Q[:, diag, diag].sum(axis=1)
            Q[:, diag, diag] += (1e-12 / k) * tr[:, None]
            rhs = np.stack([np.ones_like(us), us], axis=2)
            try:
                sol = np.linalg.solve(Q, rhs)
            except np.linalg.LinAlgError:
                for m in range(len(us)):  # rare: fall back row by row
                    got = _stationary_solve(us[m], Q[m])
                    if got is not None and got[0] < best_val[seg[m]]:
                        j = int(seg[m])
                        best_val[j] = got[0]
                        best_chain[j] = chain_tab[upd_pivots[j]][k][0][rowpos[m]]
                        best_t[j] = got[1]
                continue
            qi1 = sol[..., 0]
            qiu = sol[..., 1]
            A = qi1.sum(axis=1)
            B = qiu.sum(axis=1)
            C = (us * qiu).sum(axis=1) - 1.0
            with np.errstate(invalid="ignore", divide="ignore"):
                disc = B * B - A * C
                ok = (A > 0.0) & (disc >= 0.0)
                lam = (B + np.sqrt(np.maximum(disc, 0.0)))
                lam /= np.where(A > 0.0, A, 1.0)
                w = lam[:, None] * qi1 - qiu
                ss = w.sum(axis=1)
                ok &= ss > 0.0
                t = w / np.where(ss > 0.0, ss, 1.0)[:, None]
                ok &= (t >= -1e-12).all(axis=1)
                if not ok.any():
                    continue
                t = np.clip(t, 0.0, None)
                t /= t.sum(axis=1, keepdims=True)
                quad = np.einsum("mi,mij,mj->m", t, Q, t)
                cand = (us * t).sum(axis=1) + np.sqrt(np.maximum(quad, 0.0))
                cand = np.where(ok, cand, np.inf)
            for m in np.flatnonzero(cand < best_val[seg]):
                j = int(seg[m])
                if cand[m] < best_val[j]:
                    best_val[j] = float(cand[m])
                    best_chain[j] = chain_tab[upd_pivots[j]][k][0][rowpos[m]]
                    best_t[j] = t[m]

        for j in range(nu):
            val = float(best_val[j])
            nrec = upd_recs[j]
            if val >= (nrec.distance if nrec is not None else math.inf):
                continue
            nlat = upd_lats[j]
            stencil = stencils[nlat]
            chain = best_chain[j]
            tw = best_t[j]
            if nrec is None:
                nrec = NodeRecord(distance=val)
                nodes[nlat] = nrec
            else:
                nrec.distance = val
            nrec.predecessor = tuple(
                (stencil[i], float(wt))
                for i, wt in zip(chain, tw)
                if wt > 1e-12
            )
            nrec.increment = val - float(V[j][list(chain)] @ tw)
            heapq.heappush(heap, (val, nlat))

    return dmap, Outcome("swept", None, None, pops, order_violation)


# ---------------------------------------------------------------------------
# path extraction


def backtrace(dmap: DistanceMap, lattice) -> list[tuple[float, ...]]:
    """Parameter points from a Known node back to the identity.

    A multi-vertex predecessor contributes the barycentric point of its
    simplex; the walk then continues from the vertex with the smallest
    distance, so distances strictly decrease along the chain.
    """
    lattice = tuple(int(k) for k in lattice)
    group = dmap.group
    rec = dmap.nodes.get(lattice)
    if rec is None or rec.state != KNOWN:
        raise CorruptMap(f"node {lattice} is not Known")
    origin = (0,) * group.dim
    path = [group.point_from_lattice(lattice).params]
    cur, cur_u = lattice, rec.distance
    guard = len(dmap.nodes) + 1
    while cur != origin:
        guard -= 1
        if guard < 0:
            raise CorruptMap("predecessor chain does not reach the identity")
        rec = dmap.nodes.get(cur)
        if rec is None or rec.predecessor is None:
            raise CorruptMap(f"node {cur} has no predecessor record")
        pred = rec.predecessor
        if len(pred) > 1:
            pt = np.zeros(group.dim)
            for vlat, w in pred:
                pt += w * np.asarray(group.point_from_lattice(vlat).params)
            path.append(tuple(pt))
        nxt = min(pred, key=lambda vw: dmap.nodes[vw[0]].distance)[0]
        nxt_u = dmap.nodes[nxt].distance
        if nxt != origin and nxt_u >= cur_u:
            raise CorruptMap(f"distance did not decrease from {cur} to {nxt}")
        cur, cur_u = nxt, nxt_u
        path.append(group.point_from_lattice(cur).params)
    return path


def path_cost(dmap: DistanceMap, lattice) -> float:
    """Accumulated Mahalanobis length along the recorded update simplices.

    Defined recursively as the node's final-segment length plus the
    barycentric combination of its predecessors' costs; reproduces the
    node's distance by construction.
    """
    memo: dict[tuple[int, ...], float] = {(0,) * dmap.group.dim: 0.0}

    def cost(lat):
        got = memo.get(lat)
        if got is not None:
            return got
        rec = dmap.nodes.get(lat)
        if rec is None or rec.predecessor is None:
            raise CorruptMap(f"node {lat} has no predecessor record")
        total = rec.increment + sum(w * cost(vlat) for vlat, w in rec.predecessor)
        memo[lat] = total
        return total

    return cost(tuple(int(k) for k in lattice))


def export_csv(dmap: DistanceMap, fh) -> None:
    """Write the sparse distance map, lexicographically ordered by lattice."""
    p = dmap.group.dim
    cols = [f"lattice_{i}" for i in range(p)] + [f"param_{i}" for i in range(p)]
    fh.write(",".join(cols + ["U", "state", "label"]) + "\n")
    for lat in sorted(dmap.nodes):
        rec = dmap.nodes[lat]
        params = dmap.group.point_from_lattice(lat).params
        label = "" if rec.label is None else str(rec.label)
        row = [str(k) for k in lat] + [repr(v) for v in params]
        row += [repr(rec.distance), rec.state, label]
        fh.write(",".join(row) + "\n")
