"""Weighted L-infinity explanation problem and its regularized robust form.

The problem solved is

    min_{b, z}  sum_k w_k z_k + ridge * |b|^2
    s.t.        z_k + x_k.b >= Q_k,    z_k - x_k.b >= -R_k,

which after eliminating z is F(b) = sum_k w_k max(Q_k - x_k.b, x_k.b - R_k)
+ ridge * |b|^2.  Multipliers of the two constraint families are returned as
``dual_alpha`` and ``dual_beta``.

The solver is a Mehrotra predictor-corrector interior-point method.  Because
each z_k appears in exactly two constraints, the Newton system collapses to a
d-column least-squares solve per iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError


@dataclass(frozen=True, eq=False)
class ExplanationProblem:
    neighbor_features: np.ndarray
    weights: np.ndarray
    q_upper: np.ndarray
    r_lower: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.neighbor_features, dtype=float))
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        q = np.asarray(self.q_upper, dtype=float).reshape(-1)
        r = np.asarray(self.r_lower, dtype=float).reshape(-1)
        for name, val in (("neighbor_features", X), ("weights", w), ("q_upper", q), ("r_lower", r)):
            object.__setattr__(self, name, val)
        n = X.shape[0]
        if not (w.size == q.size == r.size == n):
            raise ValueError("weights, q_upper and r_lower need one entry per neighbor")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(q)) and np.all(np.isfinite(r))):
            raise ValueError("problem data must be finite")
        if np.any(r > q):
            raise ValueError("r_lower must not exceed q_upper")
        if np.any(w < 0) or not np.any(w > 0):
            raise ValueError("weights must be non-negative with at least one positive")
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")

    @property
    def n(self) -> int:
        return self.neighbor_features.shape[0]

    @property
    def d(self) -> int:
        return self.neighbor_features.shape[1]

    def slacks(self, b) -> np.ndarray:
        s = self.neighbor_features @ np.asarray(b, dtype=float)
        return np.maximum(self.q_upper - s, s - self.r_lower)

    def objective(self, b) -> float:
        b = np.asarray(b, dtype=float)
        return float(self.weights @ self.slacks(b) + self.ridge * (b @ b))


@dataclass(frozen=True, eq=False)
class ExplanationResult:
    coefficients: np.ndarray
    slacks: np.ndarray
    objective: float
    dual_alpha: np.ndarray
    dual_beta: np.ndarray
    kkt_residual: float
    iterations: int
    non_unique: bool = False
    diagnostics: dict = field(default_factory=dict)


def robust_objective(problem: ExplanationProblem, b) -> float:
    return problem.objective(b)


def _kkt(problem, b, alpha, beta):
    """Stationarity, dual feasibility and complementarity at (b, alpha, beta)."""
    X, w = problem.neighbor_features, problem.weights
    s = X @ b
    slack_a = np.maximum(problem.q_upper - s, s - problem.r_lower) + s - problem.q_upper
    slack_b = np.maximum(problem.q_upper - s, s - problem.r_lower) - s + problem.r_lower
    stat = 2.0 * problem.ridge * b - X.T @ (alpha - beta)
    res = max(
        float(np.max(np.abs(stat), initial=0.0)),
        float(np.max(np.abs(w - alpha - beta), initial=0.0)),
        float(np.max(alpha * slack_a, initial=0.0)),
        float(np.max(beta * slack_b, initial=0.0)),
    )
    return res


def solve_robust(problem: ExplanationProblem, tol: float = 1e-8, max_iter: int = 10_000) -> ExplanationResult:
    """Minimize sum_k w_k max(Q_k - x_k.b, x_k.b - R_k) + ridge |b|^2."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    keep = problem.weights > 0
    A = problem.neighbor_features[keep]
    w = problem.weights[keep]
    Q = problem.q_upper[keep]
    R = problem.r_lower[keep]
    n, d = A.shape
    # equilibrate columns: iterate on c = col * b, so the ridge becomes diagonal
    col = np.max(np.abs(A), axis=0)
    col[col == 0] = 1.0
    A = A / col
    lam = float(problem.ridge) / col**2
    ridged = problem.ridge > 0

    # scale so residual tolerances are relative to the data magnitude
    wscale = float(w.max())
    vscale = max(1.0, float(np.max(np.abs(Q))), float(np.max(np.abs(R))))

    b = np.zeros(d)
    z = np.maximum(np.maximum(Q, -R), 0.5 * (Q - R)) + 1.0
    s = z + A @ b - Q
    t = z - A @ b + R
    alpha = 0.5 * w.copy()
    beta = 0.5 * w.copy()

    def residuals(b, z, alpha, beta, s, t):
        r_z = w - alpha - beta
        r_b = 2.0 * lam * b - A.T @ (alpha - beta)
        r_s = s - (z + A @ b - Q)
        r_t = t - (z - A @ b + R)
        return r_z, r_b, r_s, r_t

    def newton(rhs_as, rhs_bt, r_z, r_b, r_s, r_t):
        D1 = alpha / s
        D2 = beta / t
        g1 = rhs_as / s
        g2 = rhs_bt / t
        Dsum = D1 + D2
        h = g1 + D1 * r_s + g2 + D2 * r_t - r_z
        e = g1 - g2 + D1 * r_s - D2 * r_t
        f = e - (D1 - D2) * h / Dsum
        G = 4.0 * D1 * D2 / Dsum
        # (A^T G A + 2 diag(lam)) db = A^T f - r_b, solved as least squares on
        # [sqrt(G) A; sqrt(2 diag(lam))]: forming A^T G A squares the condition
        # number, which is ruinous when neighbors crowd around a far point
        sg = np.sqrt(G)
        if ridged:
            B = np.vstack([sg[:, None] * A, np.diag(np.sqrt(2.0 * lam))])
            y = np.concatenate([f / sg, -r_b / np.sqrt(2.0 * lam)])
        else:
            v = np.linalg.lstsq(A.T, r_b, rcond=None)[0]
            B = sg[:, None] * A
            y = (f - v) / sg
        db = np.linalg.lstsq(B, y, rcond=None)[0]
        Adb = A @ db
        dz = (h - (D1 - D2) * Adb) / Dsum
        ds = dz + Adb - r_s
        dt = dz - Adb - r_t
        da = g1 - D1 * ds
        dbeta = g2 - D2 * dt
        return db, dz, da, dbeta, ds, dt

    def max_step(v, dv):
        neg = dv < 0
        if not neg.any():
            return 1.0
        return float(min(1.0, np.min(-v[neg] / dv[neg])))

    best = None
    since_best = 0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        r_z, r_b, r_s, r_t = residuals(b, z, alpha, beta, s, t)
        mu = float((alpha @ s + beta @ t) / (2 * n))
        err = max(
            np.max(np.abs(r_z)) / wscale,
            np.max(np.abs(r_b * col), initial=0.0) / wscale,  # stationarity in the original units
            np.max(np.abs(r_s)) / vscale,
            np.max(np.abs(r_t)) / vscale,
            # worst-row complementarity, the quantity the final certificate checks
            max(float(np.max(alpha * s)), float(np.max(beta * t))) / (wscale * vscale),
        )
        if best is None or err < best[0]:
            best = (err, b.copy(), z.copy(), alpha.copy(), beta.copy())
            since_best = 0
        else:
            since_best += 1
        # past ~1e-9 the barrier system loses accuracy; the crossover below finishes
        if err <= 0.01 * tol or (since_best >= 30 and best[0] <= 1e3 * tol):
            break
        # predictor
        aff = newton(-alpha * s, -beta * t, r_z, r_b, r_s, r_t)
        db, dz, da, dbeta, ds, dt = aff
        ap = min(max_step(s, ds), max_step(t, dt))
        ad = min(max_step(alpha, da), max_step(beta, dbeta))
        mu_aff = ((s + ap * ds) @ (alpha + ad * da) + (t + ap * dt) @ (beta + ad * dbeta)) / (2 * n)
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        # corrector
        db, dz, da, dbeta, ds, dt = newton(
            sigma * mu - alpha * s - aff[2] * aff[4],
            sigma * mu - beta * t - aff[3] * aff[5],
            r_z, r_b, r_s, r_t,
        )
        ap = 0.995 * min(max_step(s, ds), max_step(t, dt))
        ad = 0.995 * min(max_step(alpha, da), max_step(beta, dbeta))
        if ridged:
            # the ridge couples b to the multipliers in r_b; unequal steps break it
            ap = ad = min(ap, ad)
        b, z, s, t = b + ap * db, z + ap * dz, s + ap * ds, t + ap * dt
        alpha, beta = alpha + ad * da, beta + ad * dbeta
        s = np.maximum(s, 1e-300)
        t = np.maximum(t, 1e-300)
    _, c, z, alpha, beta = best
    b = c / col

    full_alpha = np.zeros(problem.n)
    full_beta = np.zeros(problem.n)
    # project multipliers onto alpha, beta >= 0, alpha + beta <= w
    alpha = np.clip(alpha, 0.0, w)
    beta = np.clip(beta, 0.0, w)
    over = alpha + beta > w
    scale = np.where(over, w / np.where(over, alpha + beta, 1.0), 1.0)
    full_alpha[keep] = alpha * scale
    full_beta[keep] = beta * scale
    residual = _kkt(problem, b, full_alpha, full_beta) / wscale

    candidates = []
    if ridged:
        polished = _active_set(A, w, Q, R, lam, c)
        if polished is not None:
            candidates.append(polished)
    # active sets to try: the k rows closest to their kinks, k = 0..d + 1
    order = np.argsort(np.abs(A @ c - 0.5 * (Q + R)), kind="stable")
    for k in range(min(d + 1, n) + 1):
        kink = np.zeros(n, dtype=bool)
        kink[order[:k]] = True
        polished = _crossover(A, w, Q, R, lam, c, kink)
        if polished is not None:
            candidates.append(polished)
    for pc, pa, pbeta in candidates:
        pb = pc / col
        fa = np.zeros(problem.n)
        fb = np.zeros(problem.n)
        fa[keep], fb[keep] = pa, pbeta
        res = _kkt(problem, pb, fa, fb) / wscale
        if res < residual and problem.objective(pb) <= problem.objective(b) + tol * wscale * vscale:
            b, full_alpha, full_beta, residual = pb, fa, fb, res
    slacks = problem.slacks(b)
    result = ExplanationResult(
        coefficients=b,
        slacks=slacks,
        objective=problem.objective(b),
        dual_alpha=full_alpha,
        dual_beta=full_beta,
        kkt_residual=float(residual),
        iterations=iterations,
        non_unique=_non_unique(problem, b, vscale),
    )
    if residual > tol:
        raise ConvergenceError(
            f"interior-point method stopped with KKT residual {residual:.3g} > {tol:.3g}", result
        )
    return result


def _active_set(A, w, Q, R, lam, b, max_steps=None):
    """Finite active-set descent for the ridge case, started at ``b``.

    Free rows carry a fixed sign and kink rows an equality constraint.  Each
    step solves the equality-constrained quadratic model, walks towards it
    until a free row hits its kink, and releases a kink row whose multiplier
    exceeds its weight.  Returns (b, alpha, beta) or None without convergence.
    """
    n, d = A.shape
    mid = 0.5 * (Q + R)
    sign = np.sign(A @ b - mid)
    sign[sign == 0] = 1.0
    kink = np.zeros(n, dtype=bool)
    b = b.copy()
    for _ in range(max_steps or 4 * (n + d)):
        free = ~kink
        g = A[free].T @ (w[free] * sign[free])
        K = A[kink]
        n_k = K.shape[0]
        M = np.zeros((d + n_k, d + n_k))
        M[:d, :d] = np.diag(2.0 * lam)
        M[:d, d:] = K.T
        M[d:, :d] = K
        sol = np.linalg.lstsq(M, np.concatenate([-g, mid[kink]]), rcond=None)[0]
        nb, u = sol[:d], sol[d:]
        step = A @ (nb - b)
        r = A @ b - mid
        # free rows crossing their kink before the model minimiser
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(free & (sign * step < 0), -r / step, np.inf)
        tau = np.where(tau < 0, 0.0, tau)
        j = int(np.argmin(tau))
        if tau[j] < 1.0:
            b = b + tau[j] * (nb - b)
            kink[j] = True
            continue
        b = nb
        idx = np.flatnonzero(kink)
        excess = np.abs(u) / w[idx] - 1.0
        if n_k == 0 or excess.max() <= 1e-12:
            diff = -w * sign
            diff[idx] = -np.clip(u, -w[idx], w[idx])
            return b, 0.5 * (w + diff), 0.5 * (w - diff)
        k = int(np.argmax(excess))
        kink[idx[k]] = False
        sign[idx[k]] = np.sign(u[k])
    return None


def _crossover(A, w, Q, R, lam, b, kink):
    """Exact solve on the sign pattern of ``b``; ``lam`` is a per-coordinate ridge.

    Rows in ``kink`` are held on their kink and get a free multiplier; the
    others keep their sign.  Returns (b, alpha, beta) or None when the
    pattern is inconsistent.
    """
    mid = 0.5 * (Q + R)
    r = A @ b - mid
    sign = np.sign(r)
    free = ~kink
    g = A[free].T @ (w[free] * sign[free])
    d = A.shape[1]
    K = A[kink]
    n_k = K.shape[0]
    M = np.zeros((d + n_k, d + n_k))
    M[:d, :d] = np.diag(2.0 * lam)
    M[:d, d:] = K.T
    M[d:, :d] = K
    rhs = np.concatenate([-g, mid[kink]])
    sol = np.linalg.lstsq(M, rhs, rcond=None)[0]
    nb, u = sol[:d], sol[d:]
    if np.any(np.abs(u) > w[kink] * (1 + 1e-9)):
        return None
    diff = -w * sign  # alpha - beta
    diff[kink] = -np.clip(u, -w[kink], w[kink])
    alpha = 0.5 * (w + diff)
    beta = 0.5 * (w - diff)
    return nb, alpha, beta


def _non_unique(problem: ExplanationProblem, b, vscale: float) -> bool:
    if problem.ridge > 0:
        return False
    keep = problem.weights > 0
    A = problem.neighbor_features[keep]
    mid = 0.5 * (problem.q_upper + problem.r_lower)[keep]
    kinks = np.abs(A @ b - mid) <= 1e-6 * vscale
    return bool(np.linalg.matrix_rank(A[kinks]) < problem.d) if kinks.any() else True


def solve_precise(neighbor_features, weights, theta_matrix, ridge: float = 0.0,
                  tol: float = 1e-8, max_iter: int = 10_000) -> ExplanationResult:
    """Explanation without bands: Q_k, R_k are the row max / min of theta."""
    theta = np.atleast_2d(np.asarray(theta_matrix, dtype=float))
    problem = ExplanationProblem(neighbor_features, weights, theta.max(axis=1), theta.min(axis=1), ridge)
    return solve_robust(problem, tol=tol, max_iter=max_iter)


def dual_value(problem: ExplanationProblem, alpha, beta, tol: float = 1e-6) -> float:
    """Lagrange dual objective at (alpha, beta): a lower bound on the optimum.

    With ridge == 0 this is sum_k (Q_k alpha_k - R_k beta_k) and the
    multipliers must satisfy sum_k x_k (alpha_k - beta_k) = 0.  With a ridge
    the equality is dualized and the bound gains -|X^T(alpha - beta)|^2 / (4 ridge).
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    w = problem.weights
    violation = max(
        float(np.max(-alpha, initial=0.0)),
        float(np.max(-beta, initial=0.0)),
        float(np.max(alpha + beta - w, initial=0.0)),
    )
    g = problem.neighbor_features.T @ (alpha - beta)
    if problem.ridge == 0:
        violation = max(violation, float(np.max(np.abs(g), initial=0.0)))
    if violation > tol:
        raise ValueError(f"infeasible multipliers: max violation {violation:.3g}")
    value = float(problem.q_upper @ alpha - problem.r_lower @ beta)
    if problem.ridge > 0:
        value -= float(g @ g) / (4.0 * problem.ridge)
    return value
