"""Bound evaluators over finished run traces, plus closed-form implicit-inequality solvers.

Evaluators consume immutable RunTrace objects and never touch learner
state. Each accepts a single comparator (d,) or a batch (N, d); the
returned BoundReport carries the numbers at the comparator with the
smallest slack, so "slack >= -tol" on the report certifies the bound for
every comparator supplied.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import losses

_E = math.e


@dataclass
class BoundReport:
    name: str
    measured: float
    bound: float
    terms: dict = field(default_factory=dict)

    @property
    def slack(self):
        return self.bound - self.measured

    def to_dict(self):
        return {
            "name": self.name,
            "measured": self.measured,
            "bound": self.bound,
            "slack": self.slack,
            "terms": dict(self.terms),
        }


@dataclass
class RunTrace:
    """Finished run: per-step records plus the inputs and final learner that produced them."""

    learner_name: str
    params: dict
    examples: list
    records: list
    learner: object

    _design: np.ndarray = None
    _labels: np.ndarray = None

    @property
    def final_reg(self):
        return self.learner.reg

    @property
    def dim(self):
        return self.learner.dim

    def design(self):
        if self._design is None:
            X = np.zeros((len(self.examples), self.dim))
            for i, ex in enumerate(self.examples):
                X[i, ex.x.indices] = ex.x.values
            self._design = X
            self._labels = np.array([ex.y for ex in self.examples])
        return self._design, self._labels


def _as_batch(u, dim):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = u[None, :]
    if u.shape[1] != dim:
        raise ValueError(f"comparator dim {u.shape[1]} != trace dim {dim}")
    return u


def _cumulative_losses(U, X, y, kind):
    """sum_t loss(<u, x_t>, y_t) for each comparator row."""
    P = U @ X.T
    if kind == "hinge":
        return np.maximum(0.0, 1.0 - y[None, :] * P).sum(axis=1)
    if kind == "square":
        return 0.5 * ((P - y[None, :]) ** 2).sum(axis=1)
    if kind == "absolute":
        return np.abs(P - y[None, :]).sum(axis=1)
    raise ValueError(f"unknown loss kind {kind!r}")


def _finish(name, measured, bound, terms, U):
    measured = np.broadcast_to(np.asarray(measured, float), bound.shape)
    slack = bound - measured
    i = int(np.argmin(slack))
    terms = dict(terms)
    terms.update(
        {
            "min_slack": float(slack[i]),
            "n_comparators": int(U.shape[0]),
            "comparator": [float(v) for v in U[i]],
        }
    )
    return BoundReport(name, float(measured[i]), float(bound[i]), terms)


def grid_comparators(dim, radius=2.0, points=41):
    """Uniform grid over [-radius, radius]^dim; dim must be at most 3."""
    if dim > 3:
        raise ValueError("grid comparators are limited to dim <= 3")
    axes = np.meshgrid(*([np.linspace(-radius, radius, points)] * dim), indexing="ij")
    return np.stack([a.ravel() for a in axes], axis=1)


def batch_comparator(X, y, kind="hinge", steps=400, radius=4.0):
    """Deterministic normalized subgradient descent on the cumulative loss.

    Step s uses rate radius/sqrt(s) and projects back onto the Euclidean
    ball of the given radius; the averaged iterate is returned.
    """
    T, d = X.shape
    u = np.zeros(d)
    acc = np.zeros(d)
    for s in range(1, steps + 1):
        P = X @ u
        if kind == "hinge":
            active = (1.0 - y * P) > 0
            g = -(y[active, None] * X[active]).sum(axis=0)
        elif kind == "square":
            g = ((P - y)[:, None] * X).sum(axis=0)
        else:
            g = (np.sign(P - y)[:, None] * X).sum(axis=0)
        gn = float(np.linalg.norm(g))
        if gn > 1e-12:
            u = u - (radius / math.sqrt(s)) * g / gn
        un = float(np.linalg.norm(u))
        if un > radius:
            u = u * (radius / un)
        acc += u
    return acc / steps


def engine_audit(trace, u):
    """Core inequality: sum <z_t, u - w_t> against f_T(u) plus quadratic and residue terms.

    Also reports the largest per-step violation of the residue inequality
    f*_t(theta_t) - f*_{t-1}(theta_t) <= f_{t-1}(w_t) - f_t(w_t).
    """
    recs = trace.records
    dim = trace.dim
    U = _as_batch(u, dim)
    if recs:
        Z = np.sum([r.z for r in recs], axis=0)
        zw_sum = float(sum(r.zw for r in recs))
        quad_sum = float(
            sum(r.dual_norm_sq / (2.0 * r.beta) for r in recs if r.dual_norm_sq > 0)
        )
        residue_sum = float(sum(r.residue for r in recs))
        residue_gap = max(r.residue - r.reg_drop for r in recs)
    else:
        Z = np.zeros(dim)
        zw_sum = quad_sum = residue_sum = 0.0
        residue_gap = 0.0
    f_T = np.atleast_1d(np.asarray(trace.final_reg.value(U), float))
    measured = U @ Z - zw_sum
    bound = f_T + quad_sum + residue_sum
    return _finish(
        "engine",
        measured,
        bound,
        {
            "quad_sum": quad_sum,
            "residue_sum": residue_sum,
            "max_residue_gap": float(residue_gap),
        },
        U,
    )


def composite_bound(trace, u, schedule):
    """Composite regret against the schedule-matched display.

    general  g_T(u)/eta + sum_t ||l'_t||_{*,t}^2 / (2 eta beta_t)
    sqrt     sqrt(T) * (g(u)/eta + (eta/beta) max_t ||l'_t||_*^2)
    linear   max_t ||l'_t||_*^2 (1 + ln T) / (2 beta), requires eta == 1
    """
    if schedule not in ("general", "sqrt", "linear"):
        raise ValueError("schedule must be general, sqrt, or linear")
    reg = trace.final_reg
    run_sched = getattr(reg, "schedule", {"SqrtScheduled": "sqrt", "LinearScheduled": "linear"}.get(type(reg).__name__, "constant"))
    if schedule == "sqrt" and run_sched != "sqrt":
        raise ValueError(f"schedule mismatch: run used {run_sched!r}")
    if schedule == "linear" and run_sched != "linear":
        raise ValueError(f"schedule mismatch: run used {run_sched!r}")
    eta = float(trace.params["eta"])
    recs = trace.records
    T = len(recs)
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    loss_kind = trace.params["loss"]
    penalty_u = np.atleast_1d(np.asarray(reg.penalty_value(U), float))
    loss_u = _cumulative_losses(U, X, y, loss_kind)
    measured_run = float(sum(r.loss + r.extras.get("penalty_w", 0.0) for r in recs))
    measured = measured_run - (loss_u + T * penalty_u)
    terms = {"eta": eta, "T": T, "run_loss_plus_penalty": measured_run}
    if schedule == "general":
        g_T = np.atleast_1d(np.asarray(reg.scheduled_quad_value(U), float))
        quad = float(sum(r.dual_norm_sq / (2.0 * eta * r.beta) for r in recs if r.dual_norm_sq > 0))
        bound = g_T / eta + quad
        terms["quad_sum"] = quad
    elif schedule == "sqrt":
        beta = float(reg.quad) if hasattr(reg, "quad") else float(reg.base.strong_convexity())
        g_u = np.atleast_1d(np.asarray(reg.base_quad_value(U), float))
        # ||l'_t||_* in the schedule's own (time-invariant) dual norm,
        # recovered from ||z_t||_*^2 = eta^2 ||l'_t||_*^2
        max_g2 = max((r.dual_norm_sq for r in recs), default=0.0) / (eta * eta)
        bound = math.sqrt(T) * (g_u / eta + (eta / beta) * max_g2) if T else g_u * 0.0
        terms.update({"beta": beta, "max_lgrad_dual_sq": max_g2})
    else:
        if abs(eta - 1.0) > 1e-12:
            raise ValueError("schedule mismatch: the linear-schedule display requires eta == 1")
        beta = float(getattr(reg, "ridge", 0.0)) or float(reg.base.strong_convexity())
        max_g2 = max((r.dual_norm_sq for r in recs), default=0.0) / (eta * eta)
        val = max_g2 * (1.0 + math.log(T)) / (2.0 * beta) if T else 0.0
        bound = np.full(U.shape[0], val)
        terms.update({"beta": beta, "max_lgrad_dual_sq": max_g2})
    return _finish(f"composite_{schedule}", measured, bound, terms, U)


def vaw_bound(trace, u, a=None, y_max=None):
    """Square-loss regret against (a/2)||u||^2 + (Y^2/2) sum_t x_t^T A_t^{-1} x_t."""
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    a = float(trace.params["a"] if a is None else a)
    if y_max is None:
        y_max = float(np.max(np.abs(y))) if y.size else 0.0
    Y = float(y_max)
    run_loss = float(sum(r.loss for r in trace.records))
    measured = run_loss - _cumulative_losses(U, X, y, "square")
    quad_sum = float(sum(r.extras["post_quad"] for r in trace.records))
    bound = 0.5 * a * np.sum(U * U, axis=1) + 0.5 * Y * Y * quad_sum
    return _finish("vaw", measured, bound,
                   {"a": a, "y_max": Y, "quad_sum": quad_sum, "run_loss": run_loss}, U)


def adaptive_filter_bound(trace, u):
    """Filtering regret sum (w_t.x_t - u.x_t)^2 against 2 X_T^2 f(u) + sum (y_t - u.x_t)^2."""
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    preds = np.array([r.prediction for r in trace.records])
    P = U @ X.T
    measured = ((preds[None, :] - P) ** 2).sum(axis=1)
    x_max = float(trace.final_reg.x_max)
    f_u = np.atleast_1d(np.asarray(trace.final_reg.base.value(U), float))
    noise = ((y[None, :] - P) ** 2).sum(axis=1)
    bound = 2.0 * x_max * x_max * f_u + noise
    return _finish("adaptive_filter", measured, bound, {"x_max": x_max}, U)


def scale_invariant_bound(trace, u, kind=None):
    """Scale-invariant regret displays.

    pnorm  L sqrt(e (T+1) (p_T - 1)) ((sum_i |u_i| b_{T,i})^2 / (2 eta) + eta)
    diag   L sqrt(d (T+1)) ((sum_i (u_i b_{T,i})^2) / (2 eta) + eta)

    p_T is the clamped exponent max(2 ln m_T, 2), which keeps the display
    meaningful for tiny supports and matches the regularizer actually run.
    """
    kind = kind or trace.params["kind"]
    if kind != trace.params["kind"]:
        raise ValueError(f"kind mismatch: trace holds {trace.params['kind']!r}")
    reg = trace.final_reg
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    eta = float(trace.params["eta"])
    L = float(trace.params["lipschitz"])
    T = len(trace.records)
    loss_kind = trace.params["loss"]
    run_loss = float(sum(r.loss for r in trace.records))
    measured = run_loss - _cumulative_losses(U, X, y, loss_kind)
    b = reg.b
    if kind == "pnorm":
        p_T = reg.p
        factor = L * math.sqrt(_E * (T + 1) * (p_T - 1.0))
        comp = (np.abs(U) @ b) ** 2
        terms = {"p_T": p_T, "m_T": reg.m}
    else:
        factor = L * math.sqrt(trace.dim * (T + 1))
        comp = (U * U) @ (b * b)
        terms = {}
    bound = factor * (comp / (2.0 * eta) + eta)
    terms.update({"factor": factor, "eta": eta, "T": T})
    return _finish(f"scale_invariant_{kind}", measured, bound, terms, U)


def first_order_mistake_bound(trace, u, f=None, beta=None):
    """First-order mistake bound with the aggressive correction, plus the baseline bound.

    bound      L(u) + D_eff + (2/beta) f(u) X_T^2 + X_T sqrt((2/beta) f(u) L(u))
    baseline   L(u) + (||u|| X_T)^2 + ||u|| X_T sqrt(L(u))

    with D = sum_{margin errors} eta_t ((eta_t ||x_t||_*^2
    + 2 beta y_t <w_t,x_t>) / X_t^2 - 2), which is negative exactly when
    the aggressive rates helped, and D_eff = max(D, -sum eta_t). The
    clamp is what the derivation actually supports: its last step scales
    the positive part of D + sum eta_t by a factor below one, so an
    unclamped D over-subtracts whenever that part is negative (reachable
    when X_t far exceeds the margin-error input norms; terms carry the
    unclamped display value for reference). Whenever D >= -sum eta_t the
    two forms agree.
    """
    reg = trace.final_reg
    beta = float(reg.strong_convexity() if beta is None else beta)
    f_eval = f if f is not None else (lambda U: reg.value(U))
    recs = trace.records
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    M = sum(1 for r in recs if r.mistake)
    D = 0.0
    eta_u = 0.0
    for r in recs:
        if r.margin_error and r.eta > 0.0:
            eta_u += r.eta
            D += r.eta * (
                (r.eta * r.extras["x_dual_sq"] + 2.0 * beta * r.extras["ymargin"])
                / (r.extras["x_max"] ** 2)
                - 2.0
            )
    d_eff = max(D, -eta_u)
    x_T = max((r.extras["x_max"] for r in recs), default=0.0)
    L_u = _cumulative_losses(U, X, y, "hinge")
    f_u = np.atleast_1d(np.asarray(f_eval(U), float))
    core = (2.0 / beta) * f_u * x_T ** 2 + x_T * np.sqrt((2.0 / beta) * f_u * L_u)
    bound = L_u + d_eff + core
    u_norms = np.linalg.norm(U, axis=1)
    baseline = L_u + (u_norms * x_T) ** 2 + u_norms * x_T * np.sqrt(L_u)
    i = int(np.argmin(bound - M))
    terms = {
        "D": D,
        "D_effective": d_eff,
        "D_negative": D < 0.0,
        "eta_margin_sum": eta_u,
        "display_bound": float(L_u[i] + D + core[i]),
        "beta": beta,
        "X_T": x_T,
        "M": M,
        "U": sum(1 for r in recs if r.margin_error),
        "perceptron_bound": float(baseline[i]),
        "min_bound": float(np.min(bound)),
    }
    return _finish("first_order_mistake", float(M), bound, terms, U)


def second_order_bound(trace, u, variant=None, r=None):
    """Second-order mistake bounds over the update rounds.

    full      L(u) + sqrt(r||u||^2 + sum (u.x_t)^2) * sqrt(ln|A_T| + sum m_t(2 r y_t - m_t)/(r(r+chi_t)))
    diagonal  L(u) + sqrt(u^T D_T u) * sqrt(r sum_i ln((1/r) sum_t x_{t,i}^2 + 1) + 2U)

    The full report also carries the looser variant with U in place of the
    m_t sum and whether the claimed ordering (sum <= U) held. measured is
    the number of update rounds, which is M + U for the aggressive
    triggers and M for the conservative one.
    """
    variant = variant or trace.params["variant"]
    if variant != trace.params["variant"]:
        raise ValueError(f"variant mismatch: trace holds {trace.params['variant']!r}")
    r = float(trace.params["r"] if r is None else r)
    recs = trace.records
    X, y = trace.design()
    U = _as_batch(u, trace.dim)
    upd = [i for i, rec in enumerate(recs) if rec.extras.get("updated")]
    measured = float(len(upd))
    L_u = _cumulative_losses(U, X, y, "hinge")
    u_used = sum(1 for i in upd if recs[i].extras["margin_w"] * recs[i].label > 0.0)
    Xu = X[upd]
    terms = {
        "n_updates": len(upd),
        "M": sum(1 for rec in recs if rec.mistake),
        "U": sum(1 for rec in recs if rec.margin_error),
        "U_used": u_used,
        "r": r,
    }
    if variant == "full":
        logdet = float(trace.final_reg.tracker.logdet)
        s_term = 0.0
        mistake_chain_ok = True
        for i in upd:
            rec = recs[i]
            m, chi = rec.extras["m"], rec.extras["chi"]
            contrib = m * (2.0 * r * rec.label - m) / (r * (r + chi))
            s_term += contrib
            if rec.mistake and m * (2.0 * r * rec.label - m) > 1e-12:
                mistake_chain_ok = False
        S1 = r * np.sum(U * U, axis=1) + ((U @ Xu.T) ** 2).sum(axis=1) if upd else r * np.sum(U * U, axis=1)
        S2 = max(logdet + s_term, 0.0)
        bound = L_u + np.sqrt(S1 * S2)
        loose = L_u + np.sqrt(S1 * max(logdet + u_used, 0.0))
        i = int(np.argmin(bound - measured))
        terms.update(
            {
                "logdet": logdet,
                "margin_sum": s_term,
                "ordering_ok": s_term <= u_used + 1e-12,
                "mistake_chain_ok": mistake_chain_ok,
                "loose_bound": float(loose[i]),
            }
        )
    else:
        col_sq = Xu ** 2
        csum = col_sq.sum(axis=0) if upd else np.zeros(trace.dim)
        diag_T = 1.0 + csum / r
        S1 = (U * U) @ diag_T
        S2 = r * float(np.sum(np.log(csum / r + 1.0))) + 2.0 * u_used
        bound = L_u + np.sqrt(S1 * S2)
        terms.update({"log_sum": S2, "col_sq_total": float(csum.sum())})
    return _finish(f"second_order_{variant}", measured, bound, terms, U)


def diag_rare_feature_refinement(trace, u, s):
    """Conditional refinement of the diagonal bound under the rare-feature hypothesis.

    Checks sum_i u_i^2 sum_t x_{t,i}^2 <= s ||u||^2 over the update rounds
    for the single comparator u; if it holds (and the run was conservative,
    U_used == 0) the closed-form solver turns the implicit inequality in M
    into the explicit bound below. Returns (report, hypothesis_ok).
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError("refinement takes a single comparator")
    r = float(trace.params["r"])
    recs = trace.records
    X, y = trace.design()
    upd = [i for i, rec in enumerate(recs) if rec.extras.get("updated")]
    u_used = sum(1 for i in upd if recs[i].extras["margin_w"] * recs[i].label > 0.0)
    Xu = X[upd]
    csum = (Xu ** 2).sum(axis=0) if upd else np.zeros(trace.dim)
    lhs = float(np.sum(u * u * csum))
    unorm2 = float(u @ u)
    hypothesis_ok = lhs <= s * unorm2 + 1e-12 and u_used == 0
    M = float(len(upd))
    x_T = float(np.max(np.linalg.norm(X, axis=1))) if len(X) else 0.0
    L_u = float(_cumulative_losses(u[None, :], X, y, "hinge")[0])
    d = trace.dim
    terms = {"s": s, "hypothesis_lhs": lhs, "u_norm_sq": unorm2, "U_used": u_used,
             "X_T": x_T, "L_u": L_u}
    if not hypothesis_ok or x_T == 0.0 or unorm2 == 0.0:
        return BoundReport("diag_refinement", M, math.inf, terms), hypothesis_ok
    a = unorm2 * (r + s) * d
    b = x_T ** 2 / (d * r)
    bound = implicit_log_solve("sqrt_log", {"a": a, "b": b, "c": 0.0, "d": L_u})
    terms.update({"a": a, "b": b})
    return BoundReport("diag_refinement", M, bound, terms), hypothesis_ok


def diag_log_bound(x_squares, r):
    """RHS r * sum_i ln((1/r) sum_t x_{t,i}^2 + 1) bounding sum_t x_t^T D_t^{-1} x_t."""
    xs = np.asarray(x_squares, dtype=np.float64)
    if np.any(xs < 0):
        raise ValueError("inputs must be squares (nonnegative)")
    if r <= 0:
        raise ValueError("r must be positive")
    return float(r * np.sum(np.log(xs.sum(axis=0) / r + 1.0)))


def diag_quad_sum(x_squares, r):
    """LHS of the diagonal log bound, computed through the D_t recurrence."""
    xs = np.asarray(x_squares, dtype=np.float64)
    diag = np.ones(xs.shape[1])
    total = 0.0
    for row in xs:
        diag = diag + row / r
        total += float(np.sum(row / diag))
    return total


def implicit_log_solve(form, coeffs, n=2.0):
    """Explicit upper bounds for the implicit logarithmic inequalities.

    pure_log  x <= a ln x             ->  (n/(n-1)) a ln(n a / e)
    affine_log    x <= a ln(b x + c) + d  ->  (n/(n-1)) (a ln(n a b / e) + d) + c/(b (n-1))
    sqrt_log    x <= sqrt(a ln(b x + 1) + c) + d
                ->  sqrt(a ln(sqrt(8) a b^2 / e + 2 b sqrt(c) + 2 d b + 2) + c) + d

    sqrt_log is stated for n = 2 only. Coefficients a, b must be positive;
    c, d nonnegative (the c = 0 limit is used by the rare-feature
    refinement).
    """
    if form not in ("pure_log", "affine_log", "sqrt_log"):
        raise ValueError(f"unknown form {form!r}")
    if n <= 1.0:
        raise ValueError("n must exceed 1")
    a = float(coeffs["a"])
    if a <= 0:
        raise ValueError("coefficient a must be positive")
    if form == "pure_log":
        return (n / (n - 1.0)) * a * math.log(n * a / _E)
    b = float(coeffs["b"])
    c = float(coeffs.get("c", 0.0))
    d = float(coeffs.get("d", 0.0))
    if b <= 0 or c < 0 or d < 0:
        raise ValueError("need b > 0 and c, d >= 0")
    if form == "affine_log":
        return (n / (n - 1.0)) * (a * math.log(n * a * b / _E) + d) + c / (b * (n - 1.0))
    if abs(n - 2.0) > 1e-12:
        raise ValueError("sqrt_log is proved for n = 2")
    inner = math.sqrt(8.0) * a * b * b / _E + 2.0 * b * math.sqrt(c) + 2.0 * d * b + 2.0
    return math.sqrt(a * math.log(inner) + c) + d


def sqrt_sum_inequality_check(a, tol=1e-12):
    """Whether sum_t a_t / sqrt(sum_{s<=t} a_s) <= 2 sqrt(sum_t a_t); 0/0 terms are 0."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("entries must be nonnegative")
    if a.size == 0:
        return True
    prefix = np.cumsum(a)
    terms = np.divide(a, np.sqrt(prefix), out=np.zeros_like(a), where=prefix > 0)
    return float(terms.sum()) <= 2.0 * math.sqrt(float(prefix[-1])) + tol
