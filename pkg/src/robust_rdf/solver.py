"""Robust rate-distortion over a KL ball, solved at fixed multipliers.

For a distortion multiplier ``s`` and a KL multiplier ``lam`` the optimal
output marginal is a root of

    F(q)[y] = q(y) * (1 - c(y)),

where ``c`` is the marginal optimality coefficient evaluated at the
exponentially tilted worst-case source. Roots are found with a damped Newton
iteration kept on the simplex; each root is then screened with ``c <= 1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import logsumexp

from . import kernels
from .prob import as_distortion, as_pmf, expected_distortion, kl_divergence, mutual_information
from .rdf import DualParams, NumericalRangeError, c_values, kernel_from_marginal, row_normalizers

log = logging.getLogger(__name__)

LAMBDA_MIN = 1e-4
N_RESTART = 16
CERT_TOL = 1e-8
SUPPORT_TOL = 1e-6
DUAL_TOL = 1e-5
MAX_HALVINGS = 30
BOUNDARY_FRACTION = 0.99


class OutOfDomainError(ValueError):
    """Multipliers outside the range the solver supports (``lam < LAMBDA_MIN``)."""


class SingularJacobianError(np.linalg.LinAlgError):
    pass


class InfeasibleTargetError(ValueError):
    """Requested ``(D, Gamma)`` cannot be reached by any multiplier pair."""


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class RobustProblem:
    mu0: np.ndarray
    delta: np.ndarray
    params: DualParams

    def __post_init__(self):
        object.__setattr__(self, "mu0", as_pmf(self.mu0))
        object.__setattr__(self, "delta", as_distortion(self.delta))
        if self.delta.shape[0] != self.mu0.shape[0]:
            raise ValueError(
                f"distortion has {self.delta.shape[0]} rows, nominal has {self.mu0.shape[0]} symbols"
            )

    @classmethod
    def make(cls, mu0, delta, s: float, lam: float) -> "RobustProblem":
        return cls(mu0, delta, DualParams(float(s), float(lam)))

    @property
    def s(self) -> float:
        return self.params.s

    @property
    def lam(self) -> float:
        return self.params.lam

    @property
    def ny(self) -> int:
        return self.delta.shape[1]


@dataclass(frozen=True)
class RobustSolution:
    q_star: np.ndarray
    mu_star: np.ndarray
    Q_star: np.ndarray
    rate: float
    distortion_D: float
    radius_Gamma: float
    params: DualParams
    newton_iterations: int
    converged: bool
    optimality_certified: bool
    diagnostics: dict = field(default_factory=dict, compare=False)
    problem: RobustProblem | None = field(default=None, compare=False, repr=False)

    def to_record(self, units: str = "nats") -> dict:
        """JSON-ready dict; ``units`` rescales every information quantity.

        That is ``rate``, ``radius_Gamma`` and the ``dual_rate`` and
        ``primal_dual_gap`` diagnostics.
        """
        scale = 1.0 / math.log(2.0) if units == "bits" else 1.0
        diag = {k: v for k, v in self.diagnostics.items() if k != "roots"}
        for k in ("dual_rate", "primal_dual_gap"):
            if k in diag:
                diag[k] = diag[k] * scale
        return {
            "q_star": self.q_star.tolist(),
            "mu_star": self.mu_star.tolist(),
            "Q_star": self.Q_star.tolist(),
            "rate": self.rate * scale,
            "distortion_D": self.distortion_D,
            "radius_Gamma": self.radius_Gamma * scale,
            "params": {"s": self.params.s, "lambda": self.params.lam},
            "newton_iterations": self.newton_iterations,
            "converged": self.converged,
            "optimality_certified": self.optimality_certified,
            "units": units,
            "diagnostics": diag,
        }


def _require_lambda(prob: RobustProblem):
    if prob.lam <= 0:
        raise OutOfDomainError("lambda = 0 makes the tilting exponent singular")


def _tilt(q, prob: RobustProblem):
    """Return ``(E, g, mu_star, log_Z)`` for marginal ``q``.

    ``g[x] = sum_y E[x, y] q(y)`` and ``mu_star ~ mu0 g^(-1/lam)``, computed in
    the log domain so tiny ``lam`` does not overflow.
    """
    E = np.exp(-prob.s * prob.delta)
    g = E @ q
    if np.any(g <= 0) or not np.all(np.isfinite(g)):
        raise NumericalRangeError(f"inner sum vanished at x={np.flatnonzero(~(g > 0)).tolist()}")
    on = prob.mu0 > 0
    logw = np.full(prob.mu0.shape, -np.inf)
    logw[on] = np.log(prob.mu0[on]) - np.log(g[on]) / prob.lam
    log_Z = float(logsumexp(logw))
    mu_star = np.exp(logw - log_Z)
    if not np.all(np.isfinite(mu_star)):
        raise NumericalRangeError(f"tilted source overflowed at lambda={prob.lam}")
    return E, g, mu_star, log_Z


def init_marginal(prob: RobustProblem) -> np.ndarray:
    """Closed-form starting marginal for the Newton iteration."""
    _require_lambda(prob)
    lam = prob.lam
    E = np.exp(-prob.s * prob.delta)
    on = prob.mu0 > 0
    rows = E[on]
    # mu0^(lam/(lam+1)) / (sum_y E)^((lam+1)/lam), per source symbol, in logs
    logc = (lam / (lam + 1)) * np.log(prob.mu0[on]) - ((lam + 1) / lam) * np.log(rows.sum(axis=1))
    w = np.exp(logc - logc.max()) @ rows
    return w / w.sum()


def implicit_F(q, prob: RobustProblem) -> np.ndarray:
    _require_lambda(prob)
    q = np.asarray(q, dtype=np.float64)
    E, g, mu_star, _ = _tilt(q, prob)
    c = (mu_star / g) @ E
    return q * (1.0 - c)


def jacobian_F(q, prob: RobustProblem) -> np.ndarray:
    """Analytic ``dF[y]/dq(y')`` on the ambient space ``R^|Y|``."""
    _require_lambda(prob)
    q = np.asarray(q, dtype=np.float64)
    E, g, mu_star, _ = _tilt(q, prob)
    c = (mu_star / g) @ E
    inv = 1.0 / prob.lam
    dc = -(1.0 + inv) * (E.T * (mu_star / g**2)) @ E + inv * np.outer(c, c)
    return np.diag(1.0 - c) - q[:, None] * dc


def _solve_step(J, F):
    if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e14:
        raise SingularJacobianError("Jacobian is singular or ill-conditioned")
    return np.linalg.solve(J, F)


def _project(v):
    v = np.where(v < 1e-15, 0.0, v)
    tot = v.sum()
    if tot <= 0:
        return None
    return v / tot


@dataclass
class NewtonTrace:
    iterations: int = 0
    damped_steps: int = 0
    regularized_steps: int = 0
    repairs: int = 0
    residual: float = math.inf
    message: str = ""


def newton_solve(prob: RobustProblem, q_init, eps: float = 1e-12, max_iter: int = 200,
                 trace: NewtonTrace | None = None):
    """Damped Newton iteration for ``F(q) = 0`` kept on the simplex.

    Returns ``(q, iterations, converged)``. Iterates are clamped at zero and
    renormalized; a step is halved (up to 30 times) until ``|F|`` decreases.
    A singular Jacobian triggers Levenberg-style damping before giving up.
    """
    _require_lambda(prob)
    if eps <= 0:
        raise ValueError("eps must be positive")
    trace = trace if trace is not None else NewtonTrace()
    q = np.array(as_pmf(q_init), copy=True)
    try:
        F = implicit_F(q, prob)
    except NumericalRangeError as exc:
        trace.message = str(exc)
        return q, 0, False
    fnorm = np.max(np.abs(F))
    for it in range(1, max_iter + 1):
        trace.iterations = it
        if fnorm == 0.0:
            trace.residual = 0.0
            return q, it - 1, True
        J = jacobian_F(q, prob)
        try:
            eta = _solve_step(J, F)
        except np.linalg.LinAlgError:
            eta = None
            scale = max(np.max(np.abs(J)), 1.0)
            for tau in (1e-10, 1e-8, 1e-6, 1e-4, 1e-2):
                try:
                    eta = _solve_step(J + tau * scale * np.eye(len(q)), F)
                    break
                except np.linalg.LinAlgError:
                    continue
            if eta is None:
                trace.message = "singular Jacobian"
                return q, it, False
            trace.regularized_steps += 1
        # stop short of the boundary so coordinates shrink instead of being clamped
        shrinking = (eta > 0) & (q > 0)
        t = min(1.0, BOUNDARY_FRACTION * float(np.min(q[shrinking] / eta[shrinking]))) if shrinking.any() else 1.0
        if t < 1.0:
            trace.damped_steps += 1
        cand, cand_F, cand_norm = None, None, math.inf
        for h in range(MAX_HALVINGS + 1):
            v = _project(q - t * eta)
            if v is not None:
                try:
                    vF = implicit_F(v, prob)
                    vn = np.max(np.abs(vF))
                except NumericalRangeError:
                    vn = math.inf
                if vn < cand_norm:
                    cand, cand_F, cand_norm = v, vF, vn
                if vn < fnorm or vn <= 1e-15:
                    break
            t *= 0.5
        if cand is None:
            trace.message = "no admissible step"
            return q, it, False
        if h > 0:
            trace.damped_steps += 1
        step = np.max(np.abs(cand - q))
        q, F, fnorm = cand, cand_F, cand_norm
        trace.residual = float(fnorm)
        if step < eps:
            ok = fnorm <= 10 * eps
            if not ok:
                trace.message = f"stalled with residual {fnorm:.3g}"
            return q, it, ok
    trace.message = "max_iter exceeded"
    return q, max_iter, False


def worst_case_source(q, prob: RobustProblem) -> np.ndarray:
    """Tilted source ``mu*(x) ~ mu0(x) (sum_y exp(-s delta) q)^(-1/lam)``."""
    _require_lambda(prob)
    return _tilt(np.asarray(q, dtype=np.float64), prob)[2]


def dual_rate(q, prob: RobustProblem, D: float, Gamma: float) -> float:
    """Closed-form dual value ``-s D + lam Gamma + lam ln sum_x mu0 g^(-1/lam)``."""
    _, _, _, log_Z = _tilt(np.asarray(q, dtype=np.float64), prob)
    return -prob.s * D + prob.lam * Gamma + prob.lam * log_Z


def potential(q, prob: RobustProblem):
    """``lam ln sum_x mu0(x) g_x(q)^(-1/lam)`` and its gradient ``-c``.

    A supremum of convex functions of ``q``, so convex on the simplex; its
    minimizers are exactly the marginals with ``c <= 1`` and equality on the
    support, i.e. the certified roots of ``F``.
    """
    E, g, mu_star, log_Z = _tilt(np.asarray(q, dtype=np.float64), prob)
    return prob.lam * log_Z, -((mu_star / g) @ E)


def potential_start(prob: RobustProblem) -> np.ndarray:
    """Approximate minimizer of ``potential`` by SLSQP, for Newton to polish."""
    from scipy.optimize import minimize

    ny = prob.ny
    res = minimize(
        potential, np.full(ny, 1.0 / ny), args=(prob,), jac=True, method="SLSQP",
        bounds=[(0.0, 1.0)] * ny,
        constraints=[{"type": "eq", "fun": lambda q: q.sum() - 1.0, "jac": lambda q: np.ones(ny)}],
        options={"ftol": 1e-15, "maxiter": 500},
    )
    q = np.clip(res.x, 0.0, None)
    q[q < 1e-9] = 0.0
    return q / q.sum()


def fixed_point_start(prob: RobustProblem, tol: float = 1e-10, max_iter: int = 20_000) -> np.ndarray:
    """Run the multiplicative update ``q <- q c(q)`` from the uniform marginal.

    Each step keeps ``q`` on the simplex (``sum q c = 1``) and the fixed points
    with ``c <= 1`` are the certified roots, so this is a slow but steady
    approach that Newton then polishes.
    """
    q = np.full(prob.ny, 1.0 / prob.ny)
    E = np.ascontiguousarray(np.exp(-prob.s * prob.delta))
    kernels.robust_iterate(prob.mu0, E, q, float(prob.lam), float(tol), int(max_iter))
    return q / q.sum()


def _start_points(prob: RobustProblem, rng: np.random.Generator):
    ny = prob.ny
    yield "uniform", np.full(ny, 1.0 / ny)
    push = prob.mu0 @ kernel_from_marginal(np.full(ny, 1.0 / ny), prob.s, prob.delta)
    yield "nominal-pushforward", push / push.sum()
    for k in range(N_RESTART - 2):
        yield f"dirichlet-{k}", rng.dirichlet(np.ones(ny))


def _zero_rate_solution(prob: RobustProblem) -> RobustSolution:
    # at s = 0 every marginal is a root; pick the best constant reconstruction
    mu = prob.mu0
    y0 = int(np.argmin(mu @ prob.delta))
    q = np.zeros(prob.ny)
    q[y0] = 1.0
    Q = np.tile(q, (len(mu), 1))
    return RobustSolution(
        q_star=as_pmf(q), mu_star=mu, Q_star=Q, rate=0.0,
        distortion_D=expected_distortion(mu, Q, prob.delta), radius_Gamma=0.0,
        params=prob.params, newton_iterations=0, converged=True, optimality_certified=True,
        diagnostics={"start": "s=0", "dual_rate": 0.0, "primal_dual_gap": 0.0,
                     "inconsistent": False, "c_max": 1.0, "roots": [], "message": ""},
        problem=prob,
    )


def _assemble(q, prob: RobustProblem, iterations: int, converged: bool, trace: NewtonTrace,
              start: str) -> RobustSolution:
    q = as_pmf(q)
    mu_star = worst_case_source(q, prob)
    Q_star = kernel_from_marginal(q, prob.s, prob.delta)
    D = expected_distortion(mu_star, Q_star, prob.delta)
    Gamma = kl_divergence(mu_star, prob.mu0)
    rate = mutual_information(mu_star, Q_star)
    dual = dual_rate(q, prob, D, Gamma)
    c = c_values(q, mu_star, prob.s, prob.delta)
    on = q > 0
    c_max = float(c.max())
    support_dev = float(np.max(np.abs(c[on] - 1.0))) if np.any(on) else 0.0
    certified = bool(converged and c_max <= 1 + CERT_TOL and support_dev <= SUPPORT_TOL)
    closure = float(np.max(np.abs(mu_star @ Q_star - q)))
    gap = abs(rate - dual)
    if converged and gap > DUAL_TOL:
        log.warning("primal/dual mismatch %.3g at s=%g lambda=%g", gap, prob.s, prob.lam)
    return RobustSolution(
        q_star=q, mu_star=mu_star, Q_star=Q_star, rate=rate, distortion_D=D,
        radius_Gamma=Gamma, params=prob.params, newton_iterations=iterations,
        converged=bool(converged), optimality_certified=certified,
        diagnostics={
            "start": start,
            "dual_rate": dual,
            "primal_dual_gap": gap,
            "inconsistent": bool(converged and gap > DUAL_TOL),
            "c_max": c_max,
            "c_support_dev": support_dev,
            "closure_error": closure,
            "residual": trace.residual,
            "damped_steps": trace.damped_steps,
            "regularized_steps": trace.regularized_steps,
            "support_repairs": trace.repairs,
            "message": trace.message,
            "roots": [],
        },
        problem=prob,
    )


def solve_point(prob: RobustProblem, eps: float = 1e-12, max_iter: int = 200,
                seed: int | np.random.SeedSequence = 0) -> RobustSolution:
    """Solve the robust problem at fixed ``(s, lam)``.

    Starts Newton from the closed-form initial marginal; if that fails or the
    root does not pass the ``c <= 1`` screen, retries from a seeded pool of 16
    starting points, the multiplicative fixed-point iterate and an approximate
    minimizer of the convex ``potential``,
    and keeps the certified root with the largest rate.
    """
    if prob.lam < LAMBDA_MIN:
        raise OutOfDomainError(
            f"lambda={prob.lam} is below {LAMBDA_MIN}: the lambda -> 0 (large Gamma) regime "
            "is outside the solver's domain"
        )
    if prob.s == 0:
        return _zero_rate_solution(prob)

    def attempt(q0, start):
        trace = NewtonTrace()
        q, iters, ok = newton_solve(prob, q0, eps=eps, max_iter=max_iter, trace=trace)
        repairs = 0
        while ok and repairs < prob.ny:
            # a clamped coordinate cannot re-enter on its own; revive any with c > 1
            try:
                E, g, mu_star, _ = _tilt(q, prob)
            except NumericalRangeError:
                break
            c = (mu_star / g) @ E
            revive = (q == 0) & (c > 1 + CERT_TOL)
            if not revive.any():
                break
            repairs += 1
            q = q.copy()
            q[revive] = q.max() / prob.ny
            q /= q.sum()
            q, more, ok = newton_solve(prob, q, eps=eps, max_iter=max_iter, trace=trace)
            iters += more
        trace.repairs = repairs
        try:
            return _assemble(q, prob, iters, ok, trace, start)
        except NumericalRangeError as exc:
            trace.message = str(exc)
            return None

    first = attempt(init_marginal(prob), "closed-form")
    if first is not None and first.optimality_certified:
        return first
    rng = np.random.default_rng(seed)
    candidates = [first] if first is not None else []
    for name, q0 in _start_points(prob, rng):
        sol = attempt(q0, name)
        if sol is not None:
            candidates.append(sol)
    for name, make in (("fixed-point", fixed_point_start), ("potential", potential_start)):
        try:
            sol = attempt(make(prob), name)
        except (NumericalRangeError, ValueError):
            sol = None
        if sol is not None:
            candidates.append(sol)
    certified = [c for c in candidates if c.optimality_certified]
    total_iters = sum(c.newton_iterations for c in candidates)
    if certified:
        best = max(certified, key=lambda c: c.rate)
        others = [c.q_star.tolist() for c in certified if c is not best
                  and np.max(np.abs(c.q_star - best.q_star)) > 1e-6]
        best.diagnostics["roots"] = others
        best.diagnostics["restarts"] = len(candidates) - 1
        return best
    converged = [c for c in candidates if c.converged]
    pool = converged or candidates
    if not pool:
        raise NumericalRangeError(f"no start produced a usable iterate at s={prob.s}, lambda={prob.lam}")
    best = min(pool, key=lambda c: c.diagnostics["c_max"])
    best.diagnostics["restarts"] = len(candidates) - 1
    best.diagnostics["message"] = best.diagnostics["message"] or "no certified root found"
    log.info("no certified root at s=%g lambda=%g (%d Newton iterations)", prob.s, prob.lam, total_iters)
    return best


def failed_solution(prob: RobustProblem, message: str) -> RobustSolution:
    """Placeholder for a sweep cell that could not be solved at all."""
    ny, nx = prob.ny, len(prob.mu0)
    nan = float("nan")
    return RobustSolution(
        q_star=np.full(ny, nan), mu_star=np.full(nx, nan), Q_star=np.full((nx, ny), nan),
        rate=nan, distortion_D=nan, radius_Gamma=nan, params=prob.params,
        newton_iterations=0, converged=False, optimality_certified=False,
        diagnostics={"message": message, "roots": []},
        problem=prob,
    )


def sweep(mu0, delta, s_grid, lambda_grid, eps: float = 1e-12, seed: int = 0,
          workers: int | None = None) -> list[RobustSolution]:
    """One ``solve_point`` per ``(s, lam)`` cell, row-major in ``s``.

    Cells that fail carry failure flags instead of aborting the sweep. Each cell
    gets its own seed derived from ``(seed, i, j)``, so ``workers`` does not
    change the result.
    """
    s_grid, lambda_grid = list(s_grid), list(lambda_grid)
    if not s_grid or not lambda_grid:
        raise ValueError("both grids must be nonempty")
    cells = [(i, j, s, lam) for i, s in enumerate(s_grid) for j, lam in enumerate(lambda_grid)]

    def run(cell):
        i, j, s, lam = cell
        prob = RobustProblem.make(mu0, delta, s, lam)
        try:
            return solve_point(prob, eps=eps, seed=np.random.SeedSequence([seed, i, j]))
        except (OutOfDomainError, NumericalRangeError) as exc:
            return failed_solution(prob, str(exc))

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(run, cells))
    return [run(c) for c in cells]


def zero_rate_distortion(mu0, delta, Gamma: float) -> float:
    """Largest zero-rate distortion over the KL ball of radius ``Gamma``.

    ``max_mu min_y E_mu[delta(X, y)]`` evaluated through its convex dual
    ``min_p sup_mu E_mu[sum_y p(y) delta(X, y)]`` over mixtures ``p``.
    """
    from scipy.optimize import minimize

    from .oracles import worst_case_expected_distortion

    mu0, delta = as_pmf(mu0), as_distortion(delta)
    ny = delta.shape[1]

    def obj(z):
        p = np.exp(z - z.max())
        p /= p.sum()
        return worst_case_expected_distortion(np.tile(p, (len(mu0), 1)), mu0, Gamma, delta)

    best = min(obj(np.where(np.arange(ny) == y, 30.0, 0.0)) for y in range(ny))
    if ny > 1:
        res = minimize(obj, np.zeros(ny), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def _bisect(f, lo, hi, target, tol, geometric, decreasing, max_iter=200):
    """Find ``x`` in ``[lo, hi]`` with ``f(x)`` within ``tol`` of ``target``.

    ``f`` returns ``(value, payload)``; the payload closest to the target wins.
    """
    best = None
    for _ in range(max_iter):
        mid = math.sqrt(lo * hi) if geometric else 0.5 * (lo + hi)
        val, payload = f(mid)
        if best is None or abs(val - target) < abs(best[0] - target):
            best = (val, payload, mid)
        if abs(val - target) <= tol:
            break
        if (val > target) == decreasing:
            lo = mid
        else:
            hi = mid
        if (hi / lo - 1.0 if geometric else hi - lo) < 1e-15:
            break
    return best


def _solve_for_D(mu0, delta, lam, target_D, tol, eps, seed):
    def f(s):
        sol = solve_point(RobustProblem.make(mu0, delta, s, lam), eps=eps, seed=seed)
        if not sol.optimality_certified:
            raise SearchError(f"no certified solution at s={s}, lambda={lam}")
        return sol.distortion_D, sol

    # D(s) rises on the rate-zero branch at small s and falls on the rate-positive
    # branch. The target is matched on the falling branch, so walk s downward.
    s_hi = 8.0
    while f(s_hi)[0] > target_D:
        s_hi *= 4
        if s_hi > 1e4:
            raise SearchError(f"cannot bracket D={target_D} at lambda={lam}")
    trail = [(s_hi, f(s_hi)[0])]
    s = s_hi
    while True:
        s /= 2
        if s < 1e-9:
            raise InfeasibleTargetError(f"D={target_D} not reached as s -> 0 at lambda={lam}")
        d = f(s)[0]
        if d >= target_D:
            return _bisect(f, s, trail[-1][0], target_D, tol, geometric=True, decreasing=True)
        if d < trail[-1][1] and len(trail) >= 2:
            # past the peak without reaching the target: locate the peak itself
            right = trail[-2][0]
            peak = optimize.minimize_scalar(lambda u: -f(math.exp(u))[0], method="bounded",
                                            bounds=(math.log(s), math.log(right)), options={"xatol": 1e-8})
            if -peak.fun < target_D:
                raise InfeasibleTargetError(
                    f"D={target_D} above the peak distortion {-peak.fun:.6g} at lambda={lam}")
            return _bisect(f, math.exp(peak.x), right, target_D, tol, geometric=True, decreasing=True)
        trail.append((s, d))


def multiplier_search(mu0, delta, target_D: float, target_Gamma: float, tol: float = 1e-7,
                      eps: float = 1e-12, seed: int = 0, lambda_max: float = 1e6) -> RobustSolution:
    """Find ``(s, lam)`` whose solution hits distortion ``target_D`` and radius ``target_Gamma``.

    Outer bisection on ``lam`` (``Gamma`` decreases in ``lam``), inner bisection
    on ``s`` (``D`` decreases in ``s``). ``target_Gamma = 0`` pins ``lam`` at
    ``lambda_max``.
    """
    mu0, delta = as_pmf(mu0), as_distortion(delta)
    if target_D < 0 or target_Gamma < 0:
        raise InfeasibleTargetError("targets must be nonnegative")
    d_floor = float(np.min(delta, axis=1) @ mu0) if target_Gamma == 0 else float(np.min(delta, axis=1).max())
    if target_D <= d_floor and np.min(delta, axis=1).max() > 0:
        raise InfeasibleTargetError(f"D={target_D} is below the minimum achievable distortion")
    if target_D <= 0:
        raise InfeasibleTargetError("D=0 is only reached in the s -> infinity limit")
    d_zero = zero_rate_distortion(mu0, delta, target_Gamma)
    if target_D >= d_zero - 1e-9:
        raise InfeasibleTargetError(
            f"D={target_D} is at or above the worst-case zero-rate distortion {d_zero:.6g}; "
            "the robust rate is 0 and no finite multiplier pair attains it"
        )

    if target_Gamma == 0:
        _, sol, _ = _solve_for_D(mu0, delta, lambda_max, target_D, tol, eps, seed)
        sol.diagnostics["search"] = {"lambda": lambda_max, "s": sol.params.s}
        return sol

    def g(lam):
        try:
            _, sol, _ = _solve_for_D(mu0, delta, lam, target_D, tol, eps, seed)
        except InfeasibleTargetError:
            # D above the zero-rate distortion at this lam: the ball is too small
            return 0.0, None
        return sol.radius_Gamma, sol

    lam_lo, lam_hi = 1.0, 1.0
    while g(lam_lo)[0] < target_Gamma:
        lam_lo /= 4
        if lam_lo < LAMBDA_MIN:
            raise InfeasibleTargetError(f"Gamma={target_Gamma} needs lambda below {LAMBDA_MIN}")
    while g(lam_hi)[0] > target_Gamma:
        lam_hi *= 4
        if lam_hi > lambda_max:
            raise SearchError(f"cannot bracket Gamma={target_Gamma}")
    if lam_lo == lam_hi:
        lam_hi = lam_lo * 4
    val, sol, lam = _bisect(g, lam_lo, lam_hi, target_Gamma, tol, geometric=True, decreasing=True)
    if sol is None:
        raise SearchError(f"no lambda in [{lam_lo:g}, {lam_hi:g}] reaches D={target_D}")
    if abs(val - target_Gamma) > tol or abs(sol.distortion_D - target_D) > tol:
        raise SearchError(
            f"search stopped at D={sol.distortion_D:.9g}, Gamma={val:.9g} (targets {target_D}, {target_Gamma})"
        )
    sol.diagnostics["search"] = {"lambda": lam, "s": sol.params.s}
    return sol
