"""Collision detection and blow-up analysis on nodal paths.

Near an isolated collision the pair distance behaves like |t - t0|^beta with
beta = 2/(2+alpha), so |d|^(1/beta) is linear in time on each side. Moments
are located on that transformed series: by its root for pairs that cross and
by extrapolating both flanks for pairs that touch without crossing.

The blow-up fits do not trust that moment: each side of a collision gets its
own moment from a least-squares fit of the asymptotic expansion.
"""

import dataclasses
import math

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from extensions import log
from models.collision_event import CollisionEvent
from models.configuration import Configuration, order_of
from utils.central_config import scaled_cc_residual
from utils.errors import InsufficientWindow, InvalidCluster, PoorFit

logger = log.getChild("collision")

MERGE_STEPS = 4
FLOOR_FACTOR = 10
MIN_WINDOW = 6
DEFAULT_WINDOW = 16
DEFAULT_SKIP = 2
MIN_R2 = 0.99
T0_SHIFT = 2.0
T0_SCAN = 81
SIDE_MARGIN = 0.25


def _flank_intersection(times, y, s):
    """Meet point of the lines through nodes (s-1, s) and (s+1, s+2), if inside [t_s, t_s+1]."""
    if s < 1 or s + 2 >= times.size:
        return None
    left_slope = (y[s] - y[s - 1]) / (times[s] - times[s - 1])
    right_slope = (y[s + 2] - y[s + 1]) / (times[s + 2] - times[s + 1])
    if left_slope >= 0 or right_slope <= 0:
        return None
    t = (y[s + 1] - y[s] + left_slope * times[s] - right_slope * times[s + 1]) / (
        left_slope - right_slope
    )
    if not times[s] <= t <= times[s + 1]:
        return None
    return t, y[s] + left_slope * (t - times[s])


def _pair_candidates(times, d, params):
    """Collision candidates (t0, nearest node) for one pair's signed difference."""
    power = 1.0 / params.collision_exponent
    y = np.sign(d) * np.abs(d) ** power
    threshold = params.collision_tol**power
    last = times.size - 1
    candidates = []

    for i in np.nonzero(d[:-1] * d[1:] < 0)[0]:
        t0 = times[i] + (times[i + 1] - times[i]) * y[i] / (y[i] - y[i + 1])
        node = i if t0 - times[i] <= times[i + 1] - t0 else i + 1
        candidates.append((float(t0), int(node)))

    magnitude = np.abs(y)
    for i in range(times.size):
        if d[i] == 0:
            candidates.append((float(times[i]), i))
            continue
        if i == 0 or i == last:
            continue
        if d[i - 1] * d[i] <= 0 or d[i + 1] * d[i] <= 0:
            continue
        if not (magnitude[i] <= magnitude[i - 1] and magnitude[i] < magnitude[i + 1]):
            continue
        flanks = [f for f in (_flank_intersection(times, magnitude, s) for s in (i - 1, i)) if f]
        best = min(flanks, key=lambda f: f[1]) if flanks else None
        if abs(d[i]) < params.collision_tol:
            candidates.append((float(best[0]) if best else float(times[i]), i))
        elif best is not None and best[1] <= threshold:
            candidates.append((float(best[0]), i))
    return candidates


def _local_step(times, node):
    lo, hi = max(node - 1, 0), min(node + 1, times.size - 1)
    return (times[hi] - times[lo]) / (hi - lo)


def _clusters(p, pairs, t0):
    """Partition of the bodies: transitive closure of colliding pairs, sorted by limit point."""
    n = p.params.n_bodies
    parent = list(range(n))

    def find(j):
        while parent[j] != j:
            parent[j] = parent[parent[j]]
            j = parent[j]
        return j

    positions = p.at(t0)
    for j in range(n):
        for k in range(j + 1, n):
            if abs(positions[k] - positions[j]) < p.params.collision_tol:
                pairs.add((j, k))
    for j, k in pairs:
        parent[find(j)] = find(k)

    groups = {}
    for j in range(n):
        groups.setdefault(find(j), []).append(j)
    masses = p.params.mass_array
    clusters = []
    for members in groups.values():
        members = sorted(members)
        center = float(np.dot(masses[members], positions[members]) / masses[members].sum())
        clusters.append((center, tuple(j + 1 for j in members)))
    clusters.sort()
    return tuple(c for _, c in clusters), tuple(center for center, _ in clusters)


def detect_collisions(p, params=None):
    """Collision moments of a nodal path, one event per isolated moment."""
    params = params or p.params
    times = p.times
    n = params.n_bodies

    candidates = []
    for j in range(n):
        for k in range(j + 1, n):
            d = p.positions[:, k] - p.positions[:, j]
            candidates.extend((t0, node, (j, k)) for t0, node in _pair_candidates(times, d, params))
    candidates.sort()

    groups = []
    for candidate in candidates:
        if groups:
            previous = groups[-1][-1]
            if candidate[0] - previous[0] < MERGE_STEPS * _local_step(times, previous[1]):
                groups[-1].append(candidate)
                continue
        groups.append([candidate])

    events = []
    for group in groups:
        moments = [c[0] for c in group]
        t0 = float(np.mean(moments))
        node = int(np.argmin(np.abs(times - t0)))
        merged = max(moments) - min(moments) > _local_step(times, node)
        if merged:
            logger.warning(
                "merged collision candidates spanning [%.6g, %.6g] into one event",
                min(moments), max(moments),
            )
        clusters, limit_points = _clusters(p, {c[2] for c in group}, t0)
        left = int(np.sum(times < t0))
        right = times.size - int(np.sum(times <= t0))
        if left >= MIN_WINDOW and right >= MIN_WINDOW:
            side = "both"
        elif left >= MIN_WINDOW:
            side = "left"
        elif right >= MIN_WINDOW:
            side = "right"
        else:
            side = "both"
        events.append(
            CollisionEvent(
                t0=t0,
                clusters=clusters,
                limit_points=limit_points,
                side=side,
                node=node,
                merged=bool(merged),
            )
        )
    return events


def count_collision_moments(p, params=None):
    events = detect_collisions(p, params)
    return sum(1 for e in events if p.T1 < e.t0 < p.T2)


def _cluster_indices(event, cluster_index):
    cluster = event.clusters[cluster_index]
    if len(cluster) < 2:
        raise InvalidCluster(f"cluster {cluster} has a single body; nothing collides")
    return [j - 1 for j in cluster]


def _window(p, event, members, side, window, skip):
    """Nodes on one side of t0, nearest first, above the regularization floor."""
    floor = FLOOR_FACTOR * p.params.collision_tol

    def clean(which):
        if which == "left":
            nodes = np.nonzero(p.times < event.t0)[0][::-1]
        else:
            nodes = np.nonzero(p.times > event.t0)[0]
        cluster = p.positions[nodes][:, members]
        spread = cluster.max(axis=1) - cluster.min(axis=1)
        return nodes[spread >= floor][skip : skip + window]

    if side in (None, "both"):
        left, right = clean("left"), clean("right")
        side, nodes = ("left", left) if left.size >= right.size else ("right", right)
    else:
        nodes = clean(side)
    if nodes.size < MIN_WINDOW:
        raise InsufficientWindow(
            f"only {nodes.size} usable nodes on the {side} of t0={event.t0:.6g}"
        )
    return side, nodes


def _design(tau, beta, step):
    u = tau**beta
    return u[:, None] * np.column_stack([np.ones_like(u), u, u**2, (step / tau) ** 2])


def _side_fit(p, event, members, side, window, skip):
    """Collision moment and expansion of the cluster as seen from one side.

    The centered cluster positions are fitted by
    tau^beta * (s + b u + c u^2 + e (h/tau)^2), u = tau^beta, tau = |t - t1|,
    linear in the coefficients for a fixed t1. The side's own moment t1 is
    the bounded scalar minimizer of the least-squares residual. The (h/tau)^2
    column takes up the leading grid error of a discrete minimizer, whose two
    flanks extrapolate to moments a grid step or two apart.
    """
    side, nodes = _window(p, event, members, side, window, skip)
    beta = p.params.collision_exponent
    step = _local_step(p.times, int(np.argmin(np.abs(p.times - event.t0))))
    masses = p.params.mass_array[members]
    cluster = p.positions[nodes][:, members]
    centered = cluster - (cluster @ masses / masses.sum())[:, None]
    times = p.times[nodes]

    def coefficients(t1):
        design = _design(np.abs(times - t1), beta, step)
        solution = np.linalg.lstsq(design, centered, rcond=None)[0]
        return solution, float(np.sum((centered - design @ solution) ** 2))

    nearest = times[0]
    margin = SIDE_MARGIN * step
    if side == "left":
        lo, hi = max(event.t0 - T0_SHIFT * step, nearest + margin), event.t0 + T0_SHIFT * step
    else:
        lo, hi = event.t0 - T0_SHIFT * step, min(event.t0 + T0_SHIFT * step, nearest - margin)
    grid = np.linspace(lo, hi, T0_SCAN)
    start = grid[int(np.argmin([coefficients(t)[1] for t in grid]))]
    spacing = grid[1] - grid[0]
    found = minimize_scalar(
        lambda t: coefficients(t)[1],
        bounds=(max(lo, start - spacing), min(hi, start + spacing)),
        method="bounded",
        options={"xatol": 1e-12 * max(1.0, abs(event.t0))},
    )
    t1 = float(found.x) if coefficients(found.x)[1] <= coefficients(start)[1] else float(start)
    solution, _ = coefficients(t1)
    return side, nodes, t1, solution


def _log_series(p, nodes, members, t1):
    cluster = p.positions[nodes][:, members]
    spread = cluster.max(axis=1) - cluster.min(axis=1)
    return np.log(np.abs(p.times[nodes] - t1)), np.log(spread)


def exponent_series(p, event, cluster_index, window=DEFAULT_WINDOW, side=None, skip=DEFAULT_SKIP):
    """log|t - t1| and log(max intra-cluster gap) over the fit window, t1 fitted on that side."""
    members = _cluster_indices(event, cluster_index)
    _, nodes, t1, _ = _side_fit(p, event, members, side, window, skip)
    return _log_series(p, nodes, members, t1)


def fit_exponent(p, event, cluster_index, window=DEFAULT_WINDOW, side=None, skip=DEFAULT_SKIP):
    """Slope and r^2 of log(max intra-cluster gap) against log|t - t1|."""
    fit = linregress(*exponent_series(p, event, cluster_index, window, side, skip))
    return float(fit.slope), float(fit.rvalue**2)


def _blow_up(p, event, cluster_index, side, window, skip):
    members = _cluster_indices(event, cluster_index)
    side, nodes, t1, solution = _side_fit(p, event, members, side, window, skip)
    fit = linregress(*_log_series(p, nodes, members, t1))
    exponent, r2 = float(fit.slope), float(fit.rvalue**2)
    if r2 <= MIN_R2:
        raise PoorFit(f"exponent fit r^2={r2:.4f} is too poor to extrapolate (slope {exponent:.4f})")
    return side, nodes, t1, exponent, r2, solution[0]


def limit_normalized_config(
    p, event, cluster_index, side=None, window=DEFAULT_WINDOW, skip=DEFAULT_SKIP
):
    """Limit of (q_j - cluster center) / |t - t0|^beta as t -> t0 on one side.

    This is the leading coefficient s of the side fit, i.e. the normalized
    configuration extrapolated to |t - t1|^beta = 0.
    """
    return _blow_up(p, event, cluster_index, side, window, skip)[-1]


def analyze_event(p, event, window=DEFAULT_WINDOW, skip=DEFAULT_SKIP):
    """Exponent fits and limit configurations for every colliding cluster of the event."""
    k_count = len(event.clusters)
    exponents, r2s, moments, limits, residuals, matches = ([None] * k_count for _ in range(6))
    for k in event.colliding_clusters:
        members = _cluster_indices(event, k)
        try:
            _, nodes, t1, exponent, r2, s = _blow_up(p, event, k, event.side, window, skip)
        except (InsufficientWindow, PoorFit) as e:
            logger.warning("collision at t0=%.6g, cluster %s: %s", event.t0, event.clusters[k], e)
            continue

        sub = p.params.subsystem(members)
        exponents[k], r2s[k], moments[k] = exponent, r2, t1
        limits[k] = tuple(float(x) for x in s)
        residuals[k] = scaled_cc_residual(s, sub, sub.cc_lambda)
        flank = Configuration.centered(p.positions[nodes[0]][members], sub)
        matches[k] = order_of(Configuration.centered(s, sub)).permutation == order_of(flank).permutation

    return dataclasses.replace(
        event,
        exponent_fit=tuple(exponents),
        fit_r2=tuple(r2s),
        fit_t0=tuple(moments),
        limit_cc=tuple(limits),
        cc_residual=tuple(residuals),
        order_matches=tuple(matches),
    )


def section_orders(p, events):
    """Order labels of the collision-free sections between consecutive collision moments."""
    boundaries = [p.T1] + sorted(e.t0 for e in events if p.T1 < e.t0 < p.T2) + [p.T2]
    orders = []
    for start, stop in zip(boundaries, boundaries[1:]):
        middle = 0.5 * (start + stop)
        orders.append(order_of(Configuration.centered(p.at(middle), p.params)))
    return orders


def has_repeated_sections(orders):
    permutations = [o.permutation for o in orders]
    return len(set(permutations)) < len(permutations)


def permutation_rank(permutation):
    """Lexicographic rank of a permutation of 1..N (stable order-label hash)."""
    remaining = sorted(permutation)
    rank = 0
    for position, value in enumerate(permutation):
        index = remaining.index(value)
        rank += index * math.factorial(len(permutation) - position - 1)
        remaining.pop(index)
    return rank


def min_gap_series(p):
    """Rows of (t, min pair distance, order label rank) for plotting."""
    sorted_positions = np.sort(p.positions, axis=1)
    min_gap = np.min(np.diff(sorted_positions, axis=1), axis=1)
    ranks = [permutation_rank(order_of(node).permutation) for node in p.nodes]
    return np.column_stack([p.times, min_gap, ranks])


def write_gap_csv(p, path):
    np.savetxt(
        path,
        min_gap_series(p),
        delimiter=",",
        header="t,min_gap,order_label_hash",
        comments="",
        fmt=["%.17g", "%.17g", "%d"],
    )
