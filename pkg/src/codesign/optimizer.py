"""Plan search.

The authoritative optimizer is an exhaustive, deterministic grid over every
interior cut position and every (theta1, theta2) strategy pair.  A
gradient-descent refinement of the cut fraction on a continuous relaxation
is available as a demonstrative extra; since the true objective is
piecewise over discrete cuts, the refined fraction is snapped back to a
boundary and compared against its neighbors.
"""

from __future__ import annotations

import os
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor

from . import roofline
from .cost_model import PartitionPlan, evaluate_plan
from .errors import DegenerateSplit, NoFeasiblePlan
from .profiles import (
    FULL_STRUCTURE,
    STRATEGY_RANK,
    AccuracyPenaltyTable,
    DeviceProfile,
    FusionStrategy,
    LinkProfile,
    ModelProfile,
)

_EPS = 1e-9


def plan_sort_key(plan: PartitionPlan):
    """Canonical ranking: objective, then latency, then cut, then strategy
    declaration order.  Ties are broken identically no matter what order
    candidates were evaluated in."""
    return (plan.cost.lagrangian, plan.cost.t_total, plan.cut_index,
            STRATEGY_RANK[plan.theta1], STRATEGY_RANK[plan.theta2])


def enumerate_plans(model: ModelProfile, d1: DeviceProfile, d2: DeviceProfile,
                    link: LinkProfile, table: AccuracyPenaltyTable, lambda1: float,
                    theta1_choices=None, theta2_choices=None,
                    threads: int = 1) -> list[PartitionPlan]:
    """Evaluate every candidate and return them ranked best-first."""
    if len(model.layers) < 2:
        raise DegenerateSplit("model has no interior layer boundary to cut at")
    theta1s = tuple(theta1_choices) if theta1_choices else tuple(FusionStrategy)
    theta2s = tuple(theta2_choices) if theta2_choices else tuple(FusionStrategy)
    candidates = [(cut, t1, t2)
                  for cut in model.boundaries for t1 in theta1s for t2 in theta2s]

    def evaluate(candidate):
        cut, t1, t2 = candidate
        return evaluate_plan(model, cut, t1, t2, d1, d2, link, table, lambda1)

    workers = (os.cpu_count() or 1) if threads == 0 else threads
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            plans = list(pool.map(evaluate, candidates))
    else:
        plans = [evaluate(c) for c in candidates]
    plans.sort(key=plan_sort_key)
    return plans


def grid_search(model: ModelProfile, d1: DeviceProfile, d2: DeviceProfile,
                link: LinkProfile, table: AccuracyPenaltyTable, lambda1: float,
                require_feasible: bool = False, theta1_choices=None,
                theta2_choices=None, threads: int = 1) -> PartitionPlan:
    """Best plan over the full grid.

    By default infeasible candidates stay in (the roofline rate cap already
    prices memory-bound segments); with ``require_feasible`` both segments
    must reach their device's balance point or the candidate is dropped.
    """
    plans = enumerate_plans(model, d1, d2, link, table, lambda1,
                            theta1_choices, theta2_choices, threads)
    if require_feasible:
        plans = [p for p in plans if p.feasible[0] and p.feasible[1]]
        if not plans:
            raise NoFeasiblePlan("every candidate violates an intensity requirement")
    return plans[0]


# ---------------------------------------------------------------------------
# Continuous relaxation of the cut position
# ---------------------------------------------------------------------------

def cumulative_flop_fractions(model: ModelProfile) -> list[float]:
    """Cumulative FLOP fraction at each boundary 1..n, measured on the full
    (all branches retained) structure.  Entry k-1 is the fraction at
    boundary k; the last entry is 1.0."""
    per_layer = [layer.flops_by_strategy[FULL_STRUCTURE] for layer in model.layers]
    total = sum(per_layer)
    fractions, acc = [], 0.0
    for flops in per_layer:
        acc += flops
        fractions.append(acc / total)
    return fractions


def snap_to_boundary(lam: float, model: ModelProfile) -> int:
    """Interior boundary whose cumulative-FLOP fraction is nearest to lam;
    ties go to the smaller index."""
    fractions = cumulative_flop_fractions(model)
    return min(model.boundaries, key=lambda k: (abs(fractions[k - 1] - lam), k))


def relaxed_total_latency(model: ModelProfile, lam: float,
                          theta1: FusionStrategy, theta2: FusionStrategy,
                          d1: DeviceProfile, d2: DeviceProfile,
                          link: LinkProfile) -> float:
    """Latency of a fractional cut.

    lam lives in cumulative-FLOP-fraction space (full structure).  Segment
    FLOP/byte sums are linearly interpolated inside the layer the fraction
    falls in; the shipped activation interpolates between boundary values.
    """
    layers = model.layers
    n = len(layers)
    lam = min(max(lam, _EPS), 1.0 - _EPS)

    grid = [0.0] + cumulative_flop_fractions(model)
    k = min(max(bisect_right(grid, lam) - 1, 0), n - 1)
    t = (lam - grid[k]) / (grid[k + 1] - grid[k])

    def partial(strategy):
        head_f = sum(l.flops_by_strategy[strategy] for l in layers[:k])
        head_b = sum(l.bytes_by_strategy[strategy] for l in layers[:k])
        return (head_f + t * layers[k].flops_by_strategy[strategy],
                head_b + t * layers[k].bytes_by_strategy[strategy])

    c1, m1 = partial(theta1)
    tot2_f, tot2_b = (sum(l.flops_by_strategy[theta2] for l in layers),
                      sum(l.bytes_by_strategy[theta2] for l in layers))
    head2_f, head2_b = partial(theta2)
    c2, m2 = tot2_f - head2_f, tot2_b - head2_b

    # activation bytes at the fractional position k + t, clamped to the
    # interior boundary values at the ends
    positions = list(model.boundaries)
    acts = [layers[j - 1].output_activation_bytes for j in positions]
    s = k + t
    if s <= positions[0]:
        embedding = acts[0]
    elif s >= positions[-1]:
        embedding = acts[-1]
    else:
        j = bisect_right(positions, s) - 1
        frac = (s - positions[j]) / (positions[j + 1] - positions[j])
        embedding = acts[j] + frac * (acts[j + 1] - acts[j])

    t1 = c1 / roofline.effective_rate(d1, c1 / m1)
    t2 = c2 / roofline.effective_rate(d2, c2 / m2)
    return t1 + t2 + embedding / link.bandwidth + link.fixed_latency


def refine_lambda(model: ModelProfile, start: PartitionPlan, d1: DeviceProfile,
                  d2: DeviceProfile, link: LinkProfile, step: float,
                  iters: int = 500) -> tuple[float, list[tuple[float, float]]]:
    """Gradient descent on the relaxed latency curve from a discrete plan's
    cut.  Returns the final fraction (clamped to (0, 1)) and the
    (lambda, T_total) trace; divergence shows up in the trace rather than
    as an exception."""
    h = 1e-6
    fractions = cumulative_flop_fractions(model)
    lam = fractions[start.cut_index - 1]

    def total(x):
        return relaxed_total_latency(model, x, start.theta1, start.theta2, d1, d2, link)

    trace = [(lam, total(lam))]
    for _ in range(iters):
        grad = (total(min(lam + h, 1.0 - _EPS)) - total(max(lam - h, _EPS))) / (2 * h)
        lam = min(max(lam - step * grad, _EPS), 1.0 - _EPS)
        trace.append((lam, total(lam)))
    return lam, trace


def refine_and_snap(model: ModelProfile, start: PartitionPlan, d1: DeviceProfile,
                    d2: DeviceProfile, link: LinkProfile,
                    table: AccuracyPenaltyTable, lambda1: float,
                    step: float = 1e-3, iters: int = 500,
                    ) -> tuple[PartitionPlan, float, list[tuple[float, float]]]:
    """Refine the cut fraction, snap it back to a boundary, and keep the
    best discrete plan among the snapped boundary and its neighbors."""
    lam_star, trace = refine_lambda(model, start, d1, d2, link, step, iters)
    snapped = snap_to_boundary(lam_star, model)
    candidates = {snapped}
    for neighbor in (snapped - 1, snapped + 1):
        if neighbor in model.boundaries:
            candidates.add(neighbor)
    plans = [evaluate_plan(model, cut, start.theta1, start.theta2, d1, d2,
                           link, table, lambda1) for cut in sorted(candidates)]
    return min(plans, key=plan_sort_key), lam_star, trace
