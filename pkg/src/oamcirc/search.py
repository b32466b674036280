"""Deterministic derivative-free maximisation over a box."""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, iterations: int = 40):
    """Maximise a unimodal ``f`` on ``[lo, hi]`` with a fixed number of steps.

    Returns ``(x, f(x), evaluations)``.  Every evaluation is recorded so the
    caller can build a best-so-far trace.
    """
    evaluations = []

    def g(x):
        v = f(x)
        evaluations.append((x, v))
        return v

    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(iterations):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = g(d)
    x, v = max(evaluations, key=lambda e: e[1])
    return x, v, evaluations


def coordinate_search(f, start: dict, bounds: dict, grid_points: int, sweeps: int, golden_iterations: int):
    """Coarse grid per parameter, then golden-section refinement, cycled ``sweeps`` times.

    ``f`` takes a parameter dict.  Returns ``(best, value, trace)`` where each
    trace entry is ``(evaluation, parameter, point, value, best_so_far)`` and
    ``best_so_far`` never decreases.
    """
    best = dict(start)
    best_value = f(best)
    trace = [(0, None, dict(best), best_value, best_value)]

    def record(name, point, value):
        nonlocal best, best_value
        if value > best_value:
            best, best_value = dict(point), value
        trace.append((len(trace), name, dict(point), value, best_value))

    for _ in range(sweeps):
        for name in sorted(bounds):
            lo, hi = bounds[name]
            grid = np.linspace(lo, hi, grid_points)
            values = []
            for x in grid:
                point = {**best, name: float(x)}
                v = f(point)
                values.append(v)
                record(name, point, v)
            i = int(np.argmax(values))
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid_points - 1)]
            base = dict(best)

            def along(x, name=name, base=base):
                return f({**base, name: float(x)})

            _, _, evals = golden_section(along, float(a), float(b), golden_iterations)
            for x, v in evals:
                record(name, {**base, name: float(x)}, v)
    return best, best_value, trace
