"""Independent reference implementations used only by the tests.

These are written from the definitions, in plain Python loops, and share no
code with the package beyond the MotionSequence container.
"""
from __future__ import annotations

import math

import numpy as np


def wrap(a: float) -> float:
    """Scalar wrap into (-180, 180] by repeated shifting."""
    while a > 180.0:
        a -= 360.0
    while a <= -180.0:
        a += 360.0
    return a


def frame_cost(fa, fb) -> float:
    fa = np.asarray(fa, dtype=float).ravel()
    fb = np.asarray(fb, dtype=float).ravel()
    return math.sqrt(sum(wrap(float(p) - float(q)) ** 2 for p, q in zip(fa, fb)))


def cost_table(user_rot, ref_rot) -> list[list[float]]:
    """Pairwise costs; wraps with a modulo formula rather than conditional shifts."""
    u = np.asarray(user_rot, dtype=float).reshape(len(user_rot), -1)
    r = np.asarray(ref_rot, dtype=float).reshape(len(ref_rot), -1)
    d = u[:, None, :] - r[None, :, :]
    d = -((180.0 - d) % 360.0) + 180.0
    return np.sqrt((d * d).sum(axis=-1)).tolist()


def dtw_from_costs(cost: list[list[float]]) -> float:
    """Quadratic DTW with steps (1,0), (0,1), (1,1)."""
    n, m = len(cost), len(cost[0])
    inf = float("inf")
    D = [[inf] * (m + 1) for _ in range(n + 1)]
    D[0][0] = 0.0
    for i in range(1, n + 1):
        row, prev = D[i], D[i - 1]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(prev[j], row[j - 1], prev[j - 1])
    return D[n][m]


def dtw_distance(user_rot, ref_rot) -> float:
    return dtw_from_costs(cost_table(user_rot, ref_rot))


def brute_force_start(user_rot, ref_rot) -> int:
    L_u, L_i = len(user_rot), len(ref_rot)
    cost = cost_table(user_rot, ref_rot)
    best_t, best_d = None, None
    for t in range(L_u - L_i + 1):
        d = dtw_from_costs(cost[t : t + L_i])
        if best_d is None or d < best_d:
            best_t, best_d = t, d
    return best_t


def brute_force_length(user_rot, ref_rot, t: int) -> int:
    L_u, L_i = len(user_rot), len(ref_rot)
    cost = cost_table(user_rot, ref_rot)
    best_L, best_key = None, None
    for L in range(math.ceil(L_i / 2), L_u - t + 1):
        key = (dtw_from_costs(cost[t : t + L]), abs(L - L_i), L)
        if best_key is None or key < best_key:
            best_L, best_key = L, key
    return best_L


def brute_force_window(user_rot, ref_rot) -> tuple[int, int]:
    """Exhaustive (t*, L_w*) per the two-stage search with its tie rules."""
    t = brute_force_start(user_rot, ref_rot)
    return t, brute_force_length(user_rot, ref_rot, t)


def rotation_matrix(angles_deg) -> np.ndarray:
    """Intrinsic x, y, z composition Rx @ Ry @ Rz, built from elementary matrices."""
    ax, ay, az = (math.radians(float(v)) for v in angles_deg)
    rx = np.array([[1, 0, 0], [0, math.cos(ax), -math.sin(ax)], [0, math.sin(ax), math.cos(ax)]])
    ry = np.array([[math.cos(ay), 0, math.sin(ay)], [0, 1, 0], [-math.sin(ay), 0, math.cos(ay)]])
    rz = np.array([[math.cos(az), -math.sin(az), 0], [math.sin(az), math.cos(az), 0], [0, 0, 1]])
    return rx @ ry @ rz


def confusion_counts(y_true, y_pred) -> dict:
    tp = fp = fn = tn = 0
    for row_t, row_p in zip(np.asarray(y_true).tolist(), np.asarray(y_pred).tolist()):
        for t, p in zip(row_t, row_p):
            if t and p:
                tp += 1
            elif p:
                fp += 1
            elif t:
                fn += 1
            else:
                tn += 1
    return {"tp": tp, "fp": fp, "fn": fn, "tn": tn}


def tree_leaf_value(tree, x) -> float:
    """Walk a flat tree node by node."""
    k = 0
    while int(tree.feature[k]) != -1:
        if x[int(tree.feature[k])] <= tree.threshold[k]:
            k = int(tree.left[k])
        else:
            k = int(tree.right[k])
    return float(tree.value[k])
