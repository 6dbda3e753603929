"""Exhaustive reference solvers used as test oracles."""

import itertools
import math

import numpy as np


def brute_force_radius(pts: np.ndarray) -> float:
    """Smallest enclosing radius over circumspheres of all subsets of size <= d + 1."""
    d = pts.shape[1]
    best = math.inf
    for k in range(1, min(len(pts), d + 1) + 1):
        for idx in itertools.combinations(range(len(pts)), k):
            sub = pts[list(idx)]
            p0 = sub[0]
            A = sub[1:] - p0
            if k > 1:
                G = A @ A.T
                if abs(np.linalg.det(G)) < 1e-12:
                    continue
                coef = np.linalg.solve(G, 0.5 * np.diag(G))
                c = p0 + coef @ A
            else:
                c = p0
            r = np.linalg.norm(sub - c, axis=1).max()
            if np.all(np.linalg.norm(pts - c, axis=1) <= r + 1e-12):
                best = min(best, r)
    return best
