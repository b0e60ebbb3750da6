"""Independent reference implementations used as test oracles.

Nothing here imports the solver or ledger code it is checking.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog


# ---------------------------------------------------------------- renewal


def weibull_draws(rng, n, alpha, beta):
    return alpha * (-np.log(rng.random(n))) ** (1.0 / beta)


def mc_renewal(additions, alpha, beta, seed):
    """Simulate units that fail and are replaced at once.

    A unit installed in year y with lifetime L fails in year y + ceil(L) and
    its replacement is installed that same year.  Returns (installs, stock)
    where stock[Y] counts units in service at the end of year Y.
    """
    rng = np.random.default_rng(seed)
    T = len(additions)
    installs = np.zeros(T)
    fails = np.zeros(T)
    for y in range(T):
        n = int(round(additions[y] + fails[y]))
        installs[y] = n
        if n:
            fy = y + np.ceil(weibull_draws(rng, n, alpha, beta)).astype(np.int64)
            fails += np.bincount(fy[fy < T], minlength=T)
    stock = np.cumsum(installs) - np.cumsum(fails)
    return installs, stock


# ---------------------------------------------------------------- allocation


def _grid_pass(lo, hi, steps, rho, B, A, w, ref, active, s_slack):
    grids = [np.linspace(l, h, steps + 1) if h > l else np.array([l]) for l, h in zip(lo, hi)]
    rest = np.array(list(itertools.product(*grids[1:]))) if len(lo) > 1 else np.zeros((1, 0))
    best_s, cands = -math.inf, []
    for p0 in grids[0]:
        P = np.column_stack([np.full(len(rest), p0), rest])
        ok = np.all(P @ B.T * 1000.0 <= A * (1 + 1e-12) + 1e-12, axis=1)
        V = P / rho
        ok &= np.all(V <= V[:, [ref]] * (1 + 1e-12) + 1e-12, axis=1)
        if ok.any():
            P, V = P[ok], V[ok]
            S = V[:, active].min(axis=1)
            best_s = max(best_s, float(S.max()))
            cands.append((P, V, S))
    if not cands:
        return None, -math.inf
    P = np.vstack([c[0] for c in cands])
    V = np.vstack([c[1] for c in cands])
    S = np.concatenate([c[2] for c in cands])
    keep = S >= best_s - s_slack
    k = int(np.argmax(V[keep] @ w))
    return P[keep][k], best_s


def brute_force_lex(D, rho, B, A, weights, ref=0, steps=None, rounds=40):
    """Grid-enumerate the two-level program for at most three classes.

    Every point of a uniform grid over the box is checked for feasibility
    (material rows in kg with B in kg/MVA, and V_e <= V_ref).  Level 1 keeps
    the points with the best bundle level on the grid; level 2 takes the
    best weighted deployment among them.  The box then shrinks around the
    incumbent and the enumeration repeats.  The margin kept around the
    incumbent scales with the largest exchange rate between classes in any
    constraint, since a one-cell shortfall in the bundle class can move a
    higher-priority class by that factor.
    """
    D = np.asarray(D, float)
    rho = np.asarray(rho, float)
    B = np.atleast_2d(np.asarray(B, float))
    A = np.asarray(A, float)
    w = np.asarray(weights, float)
    n = len(D)
    active = D > 0
    if not active.any():
        return np.zeros(n), 0.0
    if steps is None:
        steps = {1: 20000, 2: 1000, 3: 80}[n]
    nz = B[B > 0]
    ratio = max(1.0, nz.max() / nz.min() if nz.size else 1.0, rho.max() / rho.min())
    lo, hi = np.zeros(n), D.copy()
    best = None
    for _ in range(rounds):
        h = max((hi - lo).max() / steps, 1e-15)
        P, s = _grid_pass(lo, hi, steps, rho, B, A, w, ref, active, 0.0)
        if P is None:
            break
        best = (P, s)
        radius = 4.0 * ratio * h
        if radius >= (hi - lo).max() / 2 and _ > 0:
            radius = (hi - lo).max() / 4
        lo = np.clip(P - radius, 0.0, D)
        hi = np.clip(P + radius, 0.0, D)
        if ratio * h < 1e-7 * D.sum():
            break
    return best


# ---------------------------------------------------------------- joint LP


def joint_lexicographic(years):
    """Solve several years as one block-diagonal two-level LP.

    ``years`` is a list of dicts with D, rho, B (materials x classes, kg/MVA),
    A (kg), w, ref.  Returns (sum of bundle levels, level-2 objective).
    """
    blocks = []
    nv = 0
    for y in years:
        n = len(y["D"])
        blocks.append((nv, n))
        nv += 3 * n + 1
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    bounds = [(0, None)] * nv
    c1 = np.zeros(nv)
    c2 = np.zeros(nv)
    for (off, n), y in zip(blocks, years):
        D, rho = np.asarray(y["D"], float), np.asarray(y["rho"], float)
        Bm, Am = np.atleast_2d(np.asarray(y["B"], float)), np.asarray(y["A"], float)
        P, U, V, S = off, off + n, off + 2 * n, off + 3 * n
        for e in range(n):
            bounds[P + e] = (0, D[e])
            bounds[U + e] = (0, D[e])
            row = np.zeros(nv); row[P + e] = 1; row[U + e] = 1
            A_eq.append(row); b_eq.append(D[e])
            row = np.zeros(nv); row[V + e] = 1; row[P + e] = -1 / rho[e]
            A_eq.append(row); b_eq.append(0.0)
            if D[e] > 0:
                row = np.zeros(nv); row[S] = 1; row[V + e] = -1
                A_ub.append(row); b_ub.append(0.0)
            if e != y["ref"]:
                row = np.zeros(nv); row[V + e] = 1; row[V + y["ref"]] = -1
                A_ub.append(row); b_ub.append(0.0)
        for i in range(Bm.shape[0]):
            row = np.zeros(nv); row[P:U] = Bm[i] * 1000.0
            A_ub.append(row); b_ub.append(Am[i])
        c1[S] = -1.0
        c2[V:S] = -np.asarray(y["w"], float)
    A_ub, b_ub, A_eq, b_eq = map(np.array, (A_ub, b_ub, A_eq, b_eq))
    r1 = linprog(c1, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    assert r1.status == 0
    s_tot = -r1.fun
    hold = -(c1 < 0).astype(float)
    r2 = linprog(
        c2, A_ub=np.vstack([A_ub, hold]), b_ub=np.append(b_ub, -s_tot * (1 - 1e-8)),
        A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
    )
    assert r2.status == 0
    return s_tot, -r2.fun


# ---------------------------------------------------------------- random LP cases

GENERATION = ("spv_inverter", "pmsg_converter", "battery_pcs", "dfig_converter")
CONSUMPTION = ("dc_ups", "ev_charger_pcs", "dc_transformer")


def random_lp_case(seed):
    """Transformer plus up to one generation and one consumption class, 1-2 materials.

    One class per priority layer: two equal-weight classes would leave the
    level-2 optimum degenerate and the grid could pick any point on the tie.
    """
    rng = np.random.default_rng(seed)
    gen = str(rng.choice(GENERATION))
    con = str(rng.choice(CONSUMPTION))
    classes = ("transformer",) + ((gen,), (con,), (gen, con))[int(rng.integers(0, 3))]
    nm = int(rng.integers(1, 3))
    mats = ("copper", "steel")[:nm]
    B = rng.uniform(5, 500, (nm, len(classes))) * (rng.random((nm, len(classes))) > 0.2)
    B[:, 0] = np.maximum(B[:, 0], 1.0)
    D = rng.uniform(1, 20, len(classes))
    A = B @ D * 1000 * rng.uniform(0.15, 1.1, nm)
    ratios = {e: float(rng.uniform(0.3, 6)) for e in classes}
    return dict(classes=classes, materials=mats, B=B, D=D, A=dict(zip(mats, A)), ratios=ratios)
