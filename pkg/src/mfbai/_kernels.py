"""Compiled scalar kernels shared by the transport, oracle and sampling code.

Everything here works on plain floats and numpy arrays so that numba can
compile it. Input validation lives in the public wrappers.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

GAUSSIAN = 0
BERNOULLI = 1
EPS_THETA = 1e-9
INTERVAL_TOL = 1e-12

# Line-search status codes.
UNIQUE = 0
FLAT = 1
EMPTY = 2

# Regime codes for a pair of arms.
MERGED = 0
SEPARATED = 1

# Threshold codes.
SIMPLIFIED = 0
THEORETICAL = 1


@njit(cache=True)
def _clip_theta(x):
    return min(max(x, EPS_THETA), 1.0 - EPS_THETA)


@njit(cache=True)
def kl(kind, sigma2, p, q):
    if kind == GAUSSIAN:
        d = p - q
        return d * d / (2.0 * sigma2)
    p = _clip_theta(p)
    q = _clip_theta(q)
    return p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))


@njit(cache=True)
def dkl_dq(kind, sigma2, p, q):
    """Derivative of kl(p, q) in its second argument."""
    if kind == GAUSSIAN:
        return (q - p) / sigma2
    p = _clip_theta(p)
    q = _clip_theta(q)
    return (q - p) / (q * (1.0 - q))


@njit(cache=True)
def shifted_cost(kind, sigma2, mu, xi, x):
    """Upper one-sided cost at x - xi plus lower one-sided cost at x + xi."""
    if x - xi >= mu:
        return kl(kind, sigma2, mu, x - xi)
    if x + xi <= mu:
        return kl(kind, sigma2, mu, x + xi)
    return 0.0


@njit(cache=True)
def line_objective(kind, sigma2, mu_t, xi_t, c_t, x):
    s = 0.0
    for k in range(mu_t.shape[0]):
        c = c_t[k]
        if c > 0.0:
            s += c * shifted_cost(kind, sigma2, mu_t[k], xi_t[k], x)
    return s


@njit(cache=True)
def _slope_fixed(kind, sigma2, mu_t, xi_t, c_t, mid, x):
    """Objective slope at x with the active set frozen to that of `mid`."""
    s = 0.0
    for k in range(mu_t.shape[0]):
        c = c_t[k]
        if c <= 0.0:
            continue
        up = mu_t[k] + xi_t[k]
        lo = mu_t[k] - xi_t[k]
        if mid > up:
            s += c * dkl_dq(kind, sigma2, mu_t[k], x - xi_t[k])
        elif mid < lo:
            s += c * dkl_dq(kind, sigma2, mu_t[k], x + xi_t[k])
    return s


@njit(cache=True)
def solve_line(kind, sigma2, mu_t, xi_t, c_t):
    """Minimise the convex one-dimensional transport objective.

    Returns (minimiser, minimum, status). A zero-cost interval yields its
    midpoint with status FLAT; no positive weight yields status EMPTY.
    """
    n = mu_t.shape[0]
    lo_max = -np.inf
    up_min = np.inf
    cnt = 0
    for k in range(n):
        if c_t[k] > 0.0:
            cnt += 1
            lo_max = max(lo_max, mu_t[k] - xi_t[k])
            up_min = min(up_min, mu_t[k] + xi_t[k])
    if cnt == 0:
        return np.nan, 0.0, EMPTY
    if lo_max <= up_min:
        return 0.5 * (lo_max + up_min), 0.0, FLAT

    bps = np.empty(2 * cnt)
    q = 0
    for k in range(n):
        if c_t[k] > 0.0:
            bps[q] = mu_t[k] - xi_t[k]
            bps[q + 1] = mu_t[k] + xi_t[k]
            q += 2
    bps.sort()

    for q in range(2 * cnt - 1):
        a = bps[q]
        b = bps[q + 1]
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        if kind == GAUSSIAN:
            num = 0.0
            den = 0.0
            for k in range(n):
                c = c_t[k]
                if c <= 0.0:
                    continue
                up = mu_t[k] + xi_t[k]
                lo = mu_t[k] - xi_t[k]
                if mid > up:
                    num += c * up
                    den += c
                elif mid < lo:
                    num += c * lo
                    den += c
            if den <= 0.0:
                continue
            cand = num / den
            if cand < a - INTERVAL_TOL or cand > b + INTERVAL_TOL:
                continue
        else:
            sa = _slope_fixed(kind, sigma2, mu_t, xi_t, c_t, mid, a)
            sb = _slope_fixed(kind, sigma2, mu_t, xi_t, c_t, mid, b)
            if sa > 0.0 or sb < 0.0:
                continue
            lo_b = a
            hi_b = b
            for _ in range(200):
                m = 0.5 * (lo_b + hi_b)
                if m <= lo_b or m >= hi_b:
                    break
                if _slope_fixed(kind, sigma2, mu_t, xi_t, c_t, mid, m) < 0.0:
                    lo_b = m
                else:
                    hi_b = m
            cand = 0.5 * (lo_b + hi_b)
        best_x = cand
        best_v = line_objective(kind, sigma2, mu_t, xi_t, c_t, cand)
        va = line_objective(kind, sigma2, mu_t, xi_t, c_t, a)
        if va < best_v:
            best_x = a
            best_v = va
        vb = line_objective(kind, sigma2, mu_t, xi_t, c_t, b)
        if vb < best_v:
            best_x = b
            best_v = vb
        return best_x, best_v, UNIQUE

    # Fallback: best breakpoint.
    best_x = bps[0]
    best_v = line_objective(kind, sigma2, mu_t, xi_t, c_t, bps[0])
    for q in range(1, 2 * cnt):
        v = line_objective(kind, sigma2, mu_t, xi_t, c_t, bps[q])
        if v < best_v:
            best_x = bps[q]
            best_v = v
    return best_x, best_v, UNIQUE


@njit(cache=True)
def arm_solution(kind, sigma2, w, mu, xi, lam, k):
    return solve_line(kind, sigma2, mu[k], xi, w[k] / lam)


@njit(cache=True)
def merged_solution(kind, sigma2, w, mu, xi, lam, i, j):
    m = mu.shape[1]
    mu_t = np.empty(2 * m)
    xi_t = np.empty(2 * m)
    c_t = np.empty(2 * m)
    for f in range(m):
        mu_t[f] = mu[i, f]
        mu_t[m + f] = mu[j, f]
        xi_t[f] = xi[f]
        xi_t[m + f] = xi[f]
        c_t[f] = w[i, f] / lam[f]
        c_t[m + f] = w[j, f] / lam[f]
    return solve_line(kind, sigma2, mu_t, xi_t, c_t)


@njit(cache=True)
def pair_from_arms(kind, sigma2, w, mu, xi, lam, i, j, psi, hval, status):
    """Pair cost given per-arm solutions. Returns (value, regime, eta)."""
    if status[i] == EMPTY or status[j] == EMPTY or psi[j] > psi[i]:
        return hval[i] + hval[j], SEPARATED, np.nan
    eta, v, _ = merged_solution(kind, sigma2, w, mu, xi, lam, i, j)
    return v, MERGED, eta


@njit(cache=True)
def all_arm_solutions(kind, sigma2, w, mu, xi, lam):
    n_arms = mu.shape[0]
    psi = np.empty(n_arms)
    hval = np.empty(n_arms)
    status = np.empty(n_arms, dtype=np.int64)
    for k in range(n_arms):
        x, v, s = arm_solution(kind, sigma2, w, mu, xi, lam, k)
        psi[k] = x
        hval[k] = v
        status[k] = s
    return psi, hval, status


@njit(cache=True)
def max_min(kind, sigma2, w, mu, xi, lam):
    """max over i of min over j != i of the pair cost, lowest indices on ties."""
    n_arms = mu.shape[0]
    psi, hval, status = all_arm_solutions(kind, sigma2, w, mu, xi, lam)
    best = -np.inf
    bi = -1
    bj = -1
    for i in range(n_arms):
        cur = np.inf
        cj = -1
        for j in range(n_arms):
            if j == i:
                continue
            v, _, _ = pair_from_arms(kind, sigma2, w, mu, xi, lam, i, j,
                                     psi, hval, status)
            if v < cur:
                cur = v
                cj = j
                if cur <= best:
                    break
        if cur > best:
            best = cur
            bi = i
            bj = cj
    return best, bi, bj


@njit(cache=True)
def pair_matrix(kind, sigma2, w, mu, xi, lam):
    n_arms = mu.shape[0]
    psi, hval, status = all_arm_solutions(kind, sigma2, w, mu, xi, lam)
    out = np.zeros((n_arms, n_arms))
    for i in range(n_arms):
        for j in range(n_arms):
            if i != j:
                v, _, _ = pair_from_arms(kind, sigma2, w, mu, xi, lam, i, j,
                                         psi, hval, status)
                out[i, j] = v
    return out


@njit(cache=True)
def fill_pair_gradient(kind, sigma2, w, mu, xi, lam, i, j, g):
    """Add the gradient of the (i, j) pair cost to g."""
    m = mu.shape[1]
    psi, hval, status = all_arm_solutions(kind, sigma2, w, mu, xi, lam)
    _, regime, eta = pair_from_arms(kind, sigma2, w, mu, xi, lam, i, j,
                                    psi, hval, status)
    for r in (i, j):
        if regime == MERGED:
            x = eta
        else:
            x = psi[r]
            if status[r] == EMPTY:
                continue
        for f in range(m):
            g[r, f] += shifted_cost(kind, sigma2, mu[r, f], xi[f], x) / lam[f]


@njit(cache=True)
def subgradient(kind, sigma2, w, mu, xi, lam):
    """Subgradient of the max-min cost at w. Returns (g, value, i, j)."""
    value, i, j = max_min(kind, sigma2, w, mu, xi, lam)
    g = np.zeros(w.shape)
    if value > 0.0:
        fill_pair_gradient(kind, sigma2, w, mu, xi, lam, i, j, g)
    return g, value, i, j


@njit(cache=True)
def threshold_value(mode, n_arms, n_fid, delta, t, c_tilde):
    base = math.log(n_arms / delta)
    lt = math.log(t)
    if mode == SIMPLIFIED:
        return base + n_fid * math.log(lt + 1.0)
    return (base + 2.0 * n_fid * math.log(4.0 * base + 1.0)
            + 12.0 * n_fid * math.log(lt + 3.0) + 2.0 * n_fid * c_tilde)


@njit(cache=True)
def cost_to_pull_k(omega, lam):
    p = omega / lam
    return p / p.sum()


@njit(cache=True)
def exp_gradient_ascent(kind, sigma2, mu, xi, lam, iters, alpha0, tail_start):
    """Exponentiated subgradient ascent on the max-min cost.

    Each subgradient is rescaled by its largest entry. Returns the best
    iterate, its value and the best value seen from `tail_start` on.
    """
    n_arms, m = mu.shape
    w = np.full((n_arms, m), 1.0 / (n_arms * m))
    log_w = np.log(w)
    best_w = w.copy()
    best_v = -np.inf
    tail_v = -np.inf
    for t in range(1, iters + 1):
        g, v, _, _ = subgradient(kind, sigma2, w, mu, xi, lam)
        if v > best_v:
            best_v = v
            best_w[:, :] = w
        if t >= tail_start and v > tail_v:
            tail_v = v
        scale = np.abs(g).max()
        if scale <= 0.0:
            break
        log_w += (alpha0 / math.sqrt(t)) * g / scale
        log_w -= log_w.max()
        w = np.exp(log_w)
        w /= w.sum()
    return best_w, best_v, tail_v


@njit(cache=True)
def grid_search(kind, sigma2, mu, xi, lam, steps):
    """Best max-min cost over the regular simplex grid with `steps` divisions."""
    n_arms, m = mu.shape
    d = n_arms * m
    comp = np.zeros(d, dtype=np.int64)
    comp[0] = steps
    w = np.empty((n_arms, m))
    best_v = -np.inf
    best_w = np.zeros((n_arms, m))
    carry = steps
    h = -1
    while True:
        for q in range(d):
            w[q // m, q % m] = comp[q] / steps
        v, _, _ = max_min(kind, sigma2, w, mu, xi, lam)
        if v > best_v:
            best_v = v
            best_w[:, :] = w
        if comp[d - 1] == steps:
            break
        # Next composition in the classical revolving order.
        if carry != 1:
            h = -1
        h += 1
        carry = comp[h]
        comp[h] = 0
        comp[0] = carry - 1
        comp[h + 1] += 1
    return best_w, best_v


@njit(cache=True)
def mfgrad_run(kind, sigma2, mu_true, xi, lam, n_pulls, sums, hat_mu, omega,
               cum_gains, cum_pi, t, noise, clip_g, alpha_const, tie_eps,
               do_stop, thr_mode, thr_arms, thr_fid, delta, c_tilde):
    """Advance MF-GRAD by at most len(noise) pulls, updating state in place.

    Returns (t, stopped). Stopping is checked after every pull.
    """
    n_arms, m = mu_true.shape
    km = n_arms * m
    unit = np.ones(m)
    sd = math.sqrt(sigma2)
    for step in range(noise.shape[0]):
        # Transient tie-break at the top fidelity.
        mu_g = hat_mu
        top = hat_mu[0, m - 1]
        first = 0
        ties = 1
        for a in range(1, n_arms):
            if hat_mu[a, m - 1] > top:
                top = hat_mu[a, m - 1]
                first = a
                ties = 1
            elif hat_mu[a, m - 1] == top:
                ties += 1
        if ties > 1:
            mu_g = hat_mu.copy()
            mu_g[first, m - 1] += tie_eps
        g, _, _, _ = subgradient(kind, sigma2, omega, mu_g, xi, lam)
        pi_t = cost_to_pull_k(omega, lam)
        c_bar = 0.0
        for a in range(n_arms):
            for f in range(m):
                c_bar += lam[f] * pi_t[a, f]
        cap = clip_g * math.sqrt(t)
        for a in range(n_arms):
            for f in range(m):
                cum_gains[a, f] += min(c_bar * g[a, f], cap)
        alpha = alpha_const if alpha_const > 0.0 else 1.0 / math.sqrt(t + 1)
        z = alpha * cum_gains
        z = np.exp(z - z.max())
        omega[:, :] = z / z.sum()
        pi_t = cost_to_pull_k(omega, lam)
        gamma = 1.0 / (4.0 * math.sqrt(t))
        best_d = -np.inf
        pa = 0
        pf = 0
        for a in range(n_arms):
            for f in range(m):
                cum_pi[a, f] += (1.0 - gamma) * pi_t[a, f] + gamma / km
                d = cum_pi[a, f] - n_pulls[a, f]
                if d > best_d:
                    best_d = d
                    pa = a
                    pf = f
        if kind == GAUSSIAN:
            r = mu_true[pa, pf] + sd * noise[step]
        else:
            r = 1.0 if noise[step] < mu_true[pa, pf] else 0.0
        n_pulls[pa, pf] += 1.0
        sums[pa, pf] += r
        est = sums[pa, pf] / n_pulls[pa, pf]
        if kind == BERNOULLI:
            est = _clip_theta(est)
        hat_mu[pa, pf] = est
        t += 1
        if do_stop:
            v, _, _ = max_min(kind, sigma2, n_pulls, hat_mu, xi, unit)
            if v >= threshold_value(thr_mode, thr_arms, thr_fid, delta, t,
                                    c_tilde):
                return t, True
    return t, False
