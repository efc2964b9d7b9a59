"""Shared numeric machinery: away-step Frank-Wolfe over a support oracle.

The iterate is maintained as a convex combination of atoms (support points
of the feasible ball), so every iterate is feasible by construction and the
duality gap doubles as the projection residual.
"""

from __future__ import annotations

import numpy as np


def _line_search(dirderiv, t_max):
    """Minimize a convex 1-d restriction given its derivative.

    Root of the (monotone) directional derivative via Brent; returns t in
    [0, t_max].
    """
    d0 = dirderiv(0.0)
    if d0 >= 0.0:
        return 0.0
    dmax = dirderiv(t_max)
    if dmax <= 0.0:
        return t_max
    from scipy.optimize import brentq

    return float(brentq(dirderiv, 0.0, t_max, xtol=1e-14, rtol=1e-14, maxiter=80))


class FWResult:
    __slots__ = ("x", "gap", "iterations")

    def __init__(self, x, gap, iterations):
        self.x = x
        self.gap = gap
        self.iterations = iterations


def fw_minimize(grad, lmo, x0=None, atoms0=None, gap_tol=1e-9, max_iter=10_000):
    """Away-step Frank-Wolfe: minimize a smooth convex function over a ball.

    grad   : callable w -> gradient
    lmo    : callable direction -> argmax <direction, v> over the ball
    x0     : feasible warm start (treated as an atom)
    atoms0 : optional list of atoms whose convex hull contains x0

    Stops when the FW duality gap <= gap_tol.
    """
    if x0 is None:
        x0 = lmo(np.zeros_like(grad(lmo(np.zeros(1))))) * 0.0  # pragma: no cover
    x = np.array(x0, dtype=float)
    atoms = [x.copy()] if atoms0 is None else [np.array(a, dtype=float) for a in atoms0]
    weights = [1.0] if atoms0 is None else [1.0 / len(atoms)] * len(atoms)
    if atoms0 is not None:
        x = sum(w * a for w, a in zip(weights, atoms))

    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = grad(x)
        s = lmo(-g)
        gap = float(np.dot(g, x - s))
        if gap <= gap_tol:
            break

        # away atom: the active atom most aligned with the gradient
        scores = [float(np.dot(g, a)) for a in atoms]
        i_away = int(np.argmax(scores))
        a_away = atoms[i_away]
        fw_score = float(np.dot(g, x - s))
        away_score = float(np.dot(g, a_away) - np.dot(g, x))

        if fw_score >= away_score or len(atoms) == 1:
            d = s - x
            t_max = 1.0
            use_away = False
        else:
            d = x - a_away
            w_away = weights[i_away]
            t_max = w_away / (1.0 - w_away) if w_away < 1.0 else 1.0
            use_away = True

        dn = float(np.dot(d, d))
        if dn <= 1e-30:
            break

        t = _line_search(lambda tt: float(np.dot(grad(x + tt * d), d)), t_max)
        if t <= 0.0:
            break
        x = x + t * d

        if use_away:
            weights = [w * (1.0 + t) for w in weights]
            weights[i_away] -= t
            if weights[i_away] <= 1e-14:
                atoms.pop(i_away)
                weights.pop(i_away)
        else:
            weights = [w * (1.0 - t) for w in weights]
            matched = False
            for k, a in enumerate(atoms):
                if np.array_equal(a, s):
                    weights[k] += t
                    matched = True
                    break
            if not matched:
                atoms.append(np.array(s))
                weights.append(t)
        # drop negligible atoms to keep the active set small
        if len(atoms) > 4 * len(x) + 16:
            keep = [k for k, w in enumerate(weights) if w > 1e-12]
            atoms = [atoms[k] for k in keep]
            weights = [weights[k] for k in keep]
            tot = sum(weights)
            weights = [w / tot for w in weights]
            x = sum(w * a for w, a in zip(weights, atoms))

    return FWResult(x, gap, it)
