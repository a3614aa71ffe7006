"""Independent brute-force reference implementations.

Everything here is written with plain Python loops and math.*, sharing no
code with the package, so it can serve as an oracle for the production
paths (edge sets, binning, likelihood).
"""

from __future__ import annotations

import math


def path_loss(dist, alpha, bounded):
    if bounded:
        return 1.0 if dist == 0.0 else min(1.0, dist**-alpha)
    if dist == 0.0:
        raise ZeroDivisionError("unbounded path loss at zero distance")
    return dist**-alpha


def _dist(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def brute_sinr(locations, marks, u, v, *, alpha, n0, iota, zeta, bounded=True,
               include_transmitter=False):
    """SINR of transmitter u at receiver v, direct evaluation."""
    signal = marks[u] * path_loss(_dist(locations[u], locations[v]), alpha, bounded)
    interference = 0.0
    for w in range(len(marks)):
        if w == v or (w == u and not include_transmitter):
            continue
        interference += marks[w] * path_loss(_dist(locations[w], locations[v]), alpha, bounded)
    denom = n0 + zeta(marks[v]) * interference
    if denom == 0.0:
        return math.inf
    return signal / denom


def brute_quenched_edges(locations, marks, *, alpha, n0, iota, zeta, bounded=True,
                         include_transmitter=False):
    """Edge set {(u, v): u < v} under the two-sided threshold rule."""
    n = len(marks)
    edges = set()
    for u in range(n):
        for v in range(u + 1, n):
            fwd = brute_sinr(locations, marks, u, v, alpha=alpha, n0=n0, iota=iota,
                             zeta=zeta, bounded=bounded,
                             include_transmitter=include_transmitter)
            bwd = brute_sinr(locations, marks, v, u, alpha=alpha, n0=n0, iota=iota,
                             zeta=zeta, bounded=bounded,
                             include_transmitter=include_transmitter)
            if fwd >= iota(marks[v]) and bwd >= iota(marks[u]):
                edges.add((u, v))
    return edges


def brute_mark_edges(c, cap, mark_bins):
    total = 1.0 - math.exp(-c * cap)
    edges = []
    for k in range(mark_bins):
        edges.append(-math.log1p(-k * total / mark_bins) / c)
    edges.append(cap)
    return edges


def brute_cell(point, mark, *, lower, upper, spatial_bins, mark_edges):
    d = len(lower)
    flat = 0
    for axis in range(d):
        width = (upper[axis] - lower[axis]) / spatial_bins
        idx = int(math.floor((point[axis] - lower[axis]) / width))
        idx = min(max(idx, 0), spatial_bins - 1)
        flat = flat * spatial_bins + idx
    mark_bins = len(mark_edges) - 1
    midx = sum(1 for e in mark_edges[1:-1] if e <= mark)
    return flat * mark_bins + midx


def brute_m1(locations, marks, *, lam, lower, upper, spatial_bins, mark_edges, n_cells):
    weights = [0.0] * n_cells
    for p, m in zip(locations, marks):
        weights[brute_cell(p, m, lower=lower, upper=upper,
                           spatial_bins=spatial_bins, mark_edges=mark_edges)] += 1
    return [w / lam for w in weights]


def brute_m2(locations, marks, edges, *, lam, a_lam, lower, upper, spatial_bins,
             mark_edges, n_cells):
    weights = [[0.0] * n_cells for _ in range(n_cells)]
    denom = lam * lam * a_lam
    for u, v in edges:
        cu = brute_cell(locations[u], marks[u], lower=lower, upper=upper,
                        spatial_bins=spatial_bins, mark_edges=mark_edges)
        cv = brute_cell(locations[v], marks[v], lower=lower, upper=upper,
                        spatial_bins=spatial_bins, mark_edges=mark_edges)
        weights[cu][cv] += 1.0 / denom
        weights[cv][cu] += 1.0 / denom
    return weights


def brute_log_likelihood(locations, marks, edges, *, c, a_lam, t, volume=1.0):
    """Direct product-form log likelihood for an annealed realization.

    ``t`` is a plain function t(x_u, l_u, x_v, l_v).
    """
    n = len(marks)
    total = 0.0
    for u in range(n):
        total += math.log(1.0 / volume) + math.log(c) - c * marks[u]
    for u in range(n):
        for v in range(u + 1, n):
            p = min(1.0, a_lam * t(locations[u], marks[u], locations[v], marks[v]))
            if (u, v) in edges or (v, u) in edges:
                total += math.log(p)
            else:
                total += math.log(1.0 - p)
    return total
