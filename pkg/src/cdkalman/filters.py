"""State estimators: stationary linear KF, continuous-discrete EKF and UKF.

All three share the same conventions: the state estimate is a column
matrix of deviation variables, covariances are explicitly symmetrized
after every producing operation, measurement updates use numerically
PSD-preserving forms, and gains are computed through SPD solves (never an
explicit inverse). The linear filter is stationary: its gain comes from
the discrete algebraic Riccati equation solved once up front.

Time propagation for the EKF and UKF is forward Euler over the sampling
interval; with the default 1-minute step and 5-minute sampling each
one-step prediction takes five Euler substeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

from .matrix import (
    Matrix,
    ShapeError,
    frobenius_norm,
    mat_add,
    mat_mul,
    mat_scale,
    mat_sub,
    mat_transpose,
    solve_spd,
    symmetrize,
    cholesky_lower,
)
from .models import (
    DiscreteLinearModel,
    InputSchedule,
    IntegrationError,
    SdeModel,
    _step_sizes,
)

PREDICTED = "predicted"
FILTERED = "filtered"

_SQRT_EPS = math.sqrt(2.0 ** -52)


class DareConvergenceError(RuntimeError):
    """Riccati fixed-point iteration did not reach tolerance.

    Attributes:
        residual: Frobenius norm of the last iteration residual.
    """

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"DARE iteration did not converge after {iterations} sweeps "
            f"(last residual {residual:.3e})"
        )


@dataclass(frozen=True)
class FilterState:
    """State estimate and covariance at a tagged time index.

    kind is "predicted" for x(k|k-1) or "filtered" for x(k|k). P is kept
    symmetric by the producing operations; slight indefiniteness from Euler
    propagation is tolerated until the next factorization.
    """

    x_hat: Matrix
    P: Matrix
    k: int
    t: float
    kind: str

    def __post_init__(self):
        if self.kind not in (PREDICTED, FILTERED):
            raise ValueError(f"kind must be '{PREDICTED}' or '{FILTERED}'")
        if self.x_hat.cols != 1:
            raise ShapeError("x_hat must be a column vector")
        if self.P.rows != self.P.cols or self.P.rows != self.x_hat.rows:
            raise ShapeError("P must be square with the state dimension")


@dataclass(frozen=True)
class StationaryGain:
    """Stationary Kalman quantities derived from the DARE solution.

    P_pred is the stationary one-step prediction covariance, Re_inf the
    innovation covariance, K_inf the gain, and P_filt the stationary
    filtered covariance P_pred - K_inf Re_inf K_inf'.
    """

    P_pred: Matrix
    Re_inf: Matrix
    K_inf: Matrix
    P_filt: Matrix


@dataclass(frozen=True)
class UkfConfig:
    """Unscented-transform and integration settings.

    Defaults: alpha = 0.01, kappa = 0, beta = 2, a 1-minute Euler step and
    a 5-minute sampling time. If euler_dt does not divide ts the last
    substep is truncated.
    """

    alpha: float = 0.01
    kappa: float = 0.0
    beta: float = 2.0
    euler_dt: float = 1.0
    ts: float = 5.0

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (self.euler_dt > 0.0):
            raise ValueError(f"euler_dt must be > 0, got {self.euler_dt}")
        if not (self.ts > 0.0):
            raise ValueError(f"ts must be > 0, got {self.ts}")


@dataclass(frozen=True)
class UkfWeights:
    """Sigma-point weights: lambda, c = n + lambda, and the Wm/Wc sequences."""

    lam: float
    c: float
    Wm: list
    Wc: list


@dataclass(frozen=True)
class Innovation:
    """Innovation e, its covariance Re, and the normalized squared value."""

    e: Matrix
    Re: Matrix
    nis: float


@dataclass(frozen=True)
class UkfMeasurementStats:
    """Predicted output mean, innovation covariance, and state-output
    cross-covariance from the propagated sigma points."""

    y_hat: Matrix
    Re: Matrix
    Rxy: Matrix


def _require_kind(state: FilterState, kind: str, op: str) -> None:
    if state.kind != kind:
        raise ValueError(f"{op} requires a {kind}-kind state, got {state.kind}")


def _nis(e: Matrix, re: Matrix) -> float:
    sol = solve_spd(re, e)
    return math.fsum(a * b for a, b in zip(e.data, sol.data))


# ---------------------------------------------------------------------------
# Stationary linear Kalman filter
# ---------------------------------------------------------------------------

def solve_dare(A: Matrix, C: Matrix, Qx: Matrix, R: Matrix,
               tol: float = 1e-12, max_iter: int = 1_000_000) -> Matrix:
    """Stationary prediction covariance P of the discrete Riccati equation.

    Fixed-point iteration P <- A P A' + Qx - (A P C')(C P C' + R)^-1 (A P C')'
    from P_0 = Qx with symmetrization each sweep. Returns the first iterate
    whose residual Frobenius norm is below tol; raises
    :class:`DareConvergenceError` after max_iter sweeps.
    """
    if A.rows != A.cols:
        raise ShapeError("A must be square")
    if C.cols != A.rows:
        raise ShapeError("C must have as many columns as A")
    at = mat_transpose(A)
    ct = mat_transpose(C)
    p = symmetrize(Qx)
    residual = math.inf
    for _ in range(max_iter):
        pct = mat_mul(p, ct)
        apct = mat_mul(A, pct)
        s = mat_add(mat_mul(C, pct), R)
        correction = mat_mul(apct, solve_spd(symmetrize(s), mat_transpose(apct)))
        p_next = symmetrize(
            mat_sub(mat_add(mat_mul(A, mat_mul(p, at)), Qx), correction)
        )
        residual = frobenius_norm(mat_sub(p_next, p))
        if residual < tol:
            return p
        p = p_next
    raise DareConvergenceError(residual, max_iter)


def stationary_gain(P: Matrix, C: Matrix, R: Matrix) -> StationaryGain:
    """Innovation covariance, gain, and filtered covariance for DARE P."""
    re = symmetrize(mat_add(mat_mul(C, mat_mul(P, mat_transpose(C))), R))
    k = mat_transpose(solve_spd(re, mat_mul(C, P)))
    p_filt = symmetrize(mat_sub(P, mat_mul(k, mat_mul(re, mat_transpose(k)))))
    return StationaryGain(P_pred=P, Re_inf=re, K_inf=k, P_filt=p_filt)


def _as_column(v, dim: int, what: str) -> Matrix:
    if isinstance(v, Matrix):
        if v.cols != 1 or v.rows != dim:
            raise ShapeError(f"{what} must be a {dim}x1 column")
        return v
    if dim != 1:
        raise ShapeError(f"{what} must be a {dim}x1 column, got a scalar")
    return Matrix.column([float(v)])


def kf_predict(state: FilterState, model: DiscreteLinearModel, u, d,
               gain: Optional[StationaryGain] = None) -> FilterState:
    """One-step prediction x(k+1|k) = A x(k|k) + B u_k + E d_k.

    In stationary mode (gain supplied) the predicted covariance is the
    constant DARE solution; otherwise P is carried through unchanged.
    """
    _require_kind(state, FILTERED, "kf_predict")
    uv = _as_column(u, model.B.cols, "u")
    dv = _as_column(d, model.E.cols, "d")
    x_pred = mat_add(
        mat_add(mat_mul(model.A, state.x_hat), mat_mul(model.B, uv)),
        mat_mul(model.E, dv),
    )
    p = gain.P_pred if gain is not None else state.P
    return FilterState(x_hat=x_pred, P=p, k=state.k + 1,
                       t=state.t + model.Ts, kind=PREDICTED)


def kf_update(state: FilterState, y: float, gain: StationaryGain,
              model: DiscreteLinearModel) -> tuple:
    """Stationary measurement update with absolute glucose measurement y.

    The measurement is converted to a deviation internally (y - y_ss);
    the filtered covariance is the precomputed stationary P(inf|inf).
    """
    _require_kind(state, PREDICTED, "kf_update")
    z_pred = mat_mul(model.C, state.x_hat).at(0, 0)
    e = Matrix.column([(float(y) - model.y_ss) - z_pred])
    x_filt = mat_add(state.x_hat, mat_mul(gain.K_inf, e))
    new_state = FilterState(x_hat=x_filt, P=gain.P_filt, k=state.k,
                            t=state.t, kind=FILTERED)
    return new_state, Innovation(e=e, Re=gain.Re_inf, nis=_nis(e, gain.Re_inf))


# ---------------------------------------------------------------------------
# Continuous-discrete EKF
# ---------------------------------------------------------------------------

def _fd_drift_jacobian(model: SdeModel, x: Matrix, u: Matrix, d: Matrix) -> Matrix:
    """Central-difference Jacobian of the drift, step sqrt(eps)*max(1,|x_i|)."""
    n = model.n_states
    xd = x.data
    out = [0.0] * (n * n)
    for i in range(n):
        h = _SQRT_EPS * max(1.0, abs(xd[i]))
        xp = list(xd)
        xm = list(xd)
        xp[i] += h
        xm[i] -= h
        fp = model.drift(Matrix._raw(n, 1, xp), u, d, model.params).data
        fm = model.drift(Matrix._raw(n, 1, xm), u, d, model.params).data
        inv = 0.5 / h
        for r in range(n):
            out[r * n + i] = (fp[r] - fm[r]) * inv
    return Matrix._raw(n, n, out)


def _fd_output_jacobian(model: SdeModel, x: Matrix) -> Matrix:
    n = model.n_states
    p = model.n_outputs
    xd = x.data
    out = [0.0] * (p * n)
    for i in range(n):
        h = _SQRT_EPS * max(1.0, abs(xd[i]))
        xp = list(xd)
        xm = list(xd)
        xp[i] += h
        xm[i] -= h
        fp = model.output(Matrix._raw(n, 1, xp), model.params).data
        fm = model.output(Matrix._raw(n, 1, xm), model.params).data
        inv = 0.5 / h
        for r in range(p):
            out[r * n + i] = (fp[r] - fm[r]) * inv
    return Matrix._raw(p, n, out)


def ekf_predict(state: FilterState, model: SdeModel, sched: InputSchedule,
                Ts: float, dt: float) -> FilterState:
    """Forward-Euler co-integration of the mean and covariance over one Ts.

    The mean follows dx/dt = f(x, u, d, p); the covariance follows
    dP/dt = A P + P A' + sigma sigma' with the drift Jacobian A re-evaluated
    at the current mean every substep (analytic if the model provides it,
    central differences otherwise). P stays symmetric by construction.
    """
    _require_kind(state, FILTERED, "ekf_predict")
    if not (dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt}")
    n = model.n_states
    qc = mat_mul(model.diffusion, mat_transpose(model.diffusion)).data
    jac = model.jacobian_drift
    drift = model.drift
    params = model.params
    x = list(state.x_hat.data)
    p = list(state.P.data)
    t = state.t
    for h in _step_sizes(Ts, dt):
        u, d = sched.query(t)
        uv = Matrix._raw(1, 1, [u])
        dv = Matrix._raw(1, 1, [d])
        xm = Matrix._raw(n, 1, x)
        f = drift(xm, uv, dv, params).data
        a = jac(xm, uv, dv, params) if jac is not None else \
            _fd_drift_jacobian(model, xm, uv, dv)
        if not math.isfinite(sum(f) + sum(a.data)):
            raise IntegrationError(t, "drift or Jacobian is not finite")
        ap = mat_mul(a, Matrix._raw(n, n, p)).data
        new_p = [0.0] * (n * n)
        for r in range(n):
            rb = r * n
            for col in range(n):
                idx = rb + col
                new_p[idx] = p[idx] + h * (ap[idx] + ap[col * n + r] + qc[idx])
        new_x = [xv + h * fv for xv, fv in zip(x, f)]
        x = new_x
        p = new_p
        t += h
    return FilterState(x_hat=Matrix._raw(n, 1, x), P=Matrix._raw(n, n, p),
                       k=state.k + 1, t=state.t + Ts, kind=PREDICTED)


def ekf_update(state: FilterState, y, model: SdeModel, R: Matrix) -> tuple:
    """EKF measurement update with Joseph-stabilized covariance.

    y is the measurement in the units of the model's output map (absolute
    mg/dL for the glucose models). The output Jacobian C_k is analytic when
    available, finite-difference otherwise.
    """
    _require_kind(state, PREDICTED, "ekf_update")
    n = model.n_states
    p_dim = model.n_outputs
    yv = y if isinstance(y, Matrix) else Matrix.column([float(y)])
    if yv.rows != p_dim or yv.cols != 1:
        raise ShapeError(f"y must be {p_dim}x1")
    c = model.jacobian_output(state.x_hat, model.params) \
        if model.jacobian_output is not None else _fd_output_jacobian(model, state.x_hat)
    y_hat = model.output(state.x_hat, model.params)
    e = mat_sub(yv, y_hat)
    cp = mat_mul(c, state.P)
    re = symmetrize(mat_add(mat_mul(cp, mat_transpose(c)), R))
    k = mat_transpose(solve_spd(re, cp))
    x_filt = mat_add(state.x_hat, mat_mul(k, e))
    i_kc = mat_sub(Matrix.identity(n), mat_mul(k, c))
    p_filt = symmetrize(mat_add(
        mat_mul(i_kc, mat_mul(state.P, mat_transpose(i_kc))),
        mat_mul(k, mat_mul(R, mat_transpose(k))),
    ))
    new_state = FilterState(x_hat=x_filt, P=p_filt, k=state.k, t=state.t,
                            kind=FILTERED)
    return new_state, Innovation(e=e, Re=re, nis=_nis(e, re))


# ---------------------------------------------------------------------------
# Continuous-discrete UKF
# ---------------------------------------------------------------------------

def ukf_weights(n: int, cfg: UkfConfig) -> UkfWeights:
    """Unscented-transform weights for an n-state model.

    lambda = alpha^2 (n + kappa) - n, c = n + lambda = alpha^2 (n + kappa),
    Wm0 = lambda / (n + lambda), Wc0 = Wm0 + (1 - alpha^2 + beta), and all
    other weights equal 1 / (2 (n + lambda)). Wm0 is evaluated as
    1 - 2 n / (2 (n + lambda)) so the weight-sum identities hold to better
    than 1e-12 despite the large weight magnitudes at small alpha.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    c = cfg.alpha * cfg.alpha * (n + cfg.kappa)
    if c == 0.0:
        raise ValueError("n + lambda must be nonzero")
    lam = c - n
    wi = 0.5 / c
    # The zeroth weights are huge (~1/alpha^2) while their sums with the 2n
    # copies of wi are O(1), so they are formed with one exact rational
    # subtraction and a single final rounding; a naive evaluation can leave
    # the weight-sum identities off by a few ulp at the weight magnitude.
    two_n_wi = 2 * n * Fraction(wi)
    wm0 = float(1 - two_n_wi)
    wc0 = float(
        Fraction(1.0 + (1.0 - cfg.alpha * cfg.alpha + cfg.beta)) - two_n_wi
    )
    return UkfWeights(lam=lam, c=c, Wm=[wm0] + [wi] * (2 * n),
                      Wc=[wc0] + [wi] * (2 * n))


def ukf_sigma_points(x: Matrix, P: Matrix, c: float) -> list:
    """2n+1 sigma points: x and x +/- sqrt(c) times each Cholesky column."""
    n = x.rows
    lo = cholesky_lower(P)
    sc = math.sqrt(c)
    points = [x]
    plus = []
    minus = []
    for i in range(n):
        col = [sc * lo.at(r, i) for r in range(n)]
        plus.append(Matrix._raw(n, 1, [x.data[r] + col[r] for r in range(n)]))
        minus.append(Matrix._raw(n, 1, [x.data[r] - col[r] for r in range(n)]))
    return points + plus + minus


def ukf_predict(state: FilterState, model: SdeModel, sched: InputSchedule,
                cfg: UkfConfig) -> tuple:
    """Propagate sigma points and covariance over one sampling interval.

    All 2n+1 sigma points follow the drift ODE while the covariance follows
    the weighted cross terms between point deviations and drift deviations
    plus sigma sigma', jointly advanced with forward Euler at cfg.euler_dt.
    Returns the predicted state and the propagated sigma points, which the
    measurement stage reuses directly (no intermediate re-sampling).
    """
    _require_kind(state, FILTERED, "ukf_predict")
    n = model.n_states
    weights = ukf_weights(n, cfg)
    pts = ukf_sigma_points(state.x_hat, state.P, weights.c)
    npts = 2 * n + 1
    wm = weights.Wm
    wc = weights.Wc
    qc = mat_mul(model.diffusion, mat_transpose(model.diffusion)).data
    drift = model.drift
    params = model.params
    # persistent column views over the point buffers; the buffers are
    # mutated in place between drift evaluations
    xs = [list(pt.data) for pt in pts]
    views = [Matrix._raw(n, 1, xi) for xi in xs]
    p = list(state.P.data)
    t = state.t
    rng_n = range(n)
    rng_pts = range(npts)
    for h in _step_sizes(cfg.ts, cfg.euler_dt):
        u, d = sched.query(t)
        uv = Matrix._raw(1, 1, [u])
        dv = Matrix._raw(1, 1, [d])
        fs = []
        total = 0.0
        xbar = [0.0] * n
        fbar = [0.0] * n
        for i in rng_pts:
            fd = drift(views[i], uv, dv, params).data
            total += sum(fd)
            fs.append(fd)
            wmi = wm[i]
            xi = xs[i]
            xbar = [a + wmi * b for a, b in zip(xbar, xi)]
            fbar = [a + wmi * b for a, b in zip(fbar, fd)]
        if not math.isfinite(total):
            raise IntegrationError(t, "sigma-point drift is not finite")
        cross = [0.0] * (n * n)
        for i in rng_pts:
            wci = wc[i]
            xi = xs[i]
            dfs = [a - b for a, b in zip(fs[i], fbar)]
            for r in rng_n:
                wdx = wci * (xi[r] - xbar[r])
                rb = r * n
                cross[rb:rb + n] = [a + wdx * b
                                    for a, b in zip(cross[rb:rb + n], dfs)]
        for r in rng_n:
            rb = r * n
            for col in rng_n:
                idx = rb + col
                p[idx] += h * (cross[idx] + cross[col * n + r] + qc[idx])
        for i in rng_pts:
            xi = xs[i]
            xi[:] = [a + h * b for a, b in zip(xi, fs[i])]
        t += h
    x_pred = [0.0] * n
    for i in rng_pts:
        wmi = wm[i]
        x_pred = [a + wmi * b for a, b in zip(x_pred, xs[i])]
    pred_points = [Matrix._raw(n, 1, list(xi)) for xi in xs]
    new_state = FilterState(
        x_hat=Matrix._raw(n, 1, x_pred),
        P=symmetrize(Matrix._raw(n, n, p)),
        k=state.k + 1,
        t=state.t + cfg.ts,
        kind=PREDICTED,
    )
    return new_state, pred_points


def ukf_measurement_stats(pred_points: Sequence, weights: UkfWeights,
                          model: SdeModel, R: Matrix) -> UkfMeasurementStats:
    """Output mean, innovation covariance, and cross-covariance.

    Applies the output map to the propagated sigma points directly (the
    intermediate re-sampling step is omitted to keep the measurement stage
    cheap): y_hat = sum Wm h(X_i), Re = sum Wc (y_i - y_hat)(..)' + R,
    Rxy = sum Wc (X_i - x_hat)(y_i - y_hat)'.
    """
    n = model.n_states
    p = model.n_outputs
    npts = len(pred_points)
    wm = weights.Wm
    wc = weights.Wc
    ys = [model.output(pt, model.params).data for pt in pred_points]
    y_hat = [0.0] * p
    x_hat = [0.0] * n
    for i in range(npts):
        wmi = wm[i]
        yi = ys[i]
        xi = pred_points[i].data
        for r in range(p):
            y_hat[r] += wmi * yi[r]
        for r in range(n):
            x_hat[r] += wmi * xi[r]
    re = [0.0] * (p * p)
    rxy = [0.0] * (n * p)
    for i in range(npts):
        wci = wc[i]
        yi = ys[i]
        xi = pred_points[i].data
        dy = [yi[r] - y_hat[r] for r in range(p)]
        for r in range(p):
            wdy = wci * dy[r]
            for col in range(p):
                re[r * p + col] += wdy * dy[col]
        for r in range(n):
            wdx = wci * (xi[r] - x_hat[r])
            for col in range(p):
                rxy[r * p + col] += wdx * dy[col]
    re_m = mat_add(Matrix._raw(p, p, re), R)
    return UkfMeasurementStats(
        y_hat=Matrix._raw(p, 1, y_hat),
        Re=symmetrize(re_m),
        Rxy=Matrix._raw(n, p, rxy),
    )


def ukf_update(state: FilterState, y, stats: UkfMeasurementStats) -> tuple:
    """UKF measurement update with gain K = Rxy Re^-1.

    The covariance update is P - K Re K' with explicit symmetrization,
    which coincides with the Joseph-stabilized form at the exact gain and
    needs no output Jacobian.
    """
    _require_kind(state, PREDICTED, "ukf_update")
    yv = y if isinstance(y, Matrix) else Matrix.column([float(y)])
    if yv.shape != stats.y_hat.shape:
        raise ShapeError(f"y must be {stats.y_hat.rows}x1")
    e = mat_sub(yv, stats.y_hat)
    k = mat_transpose(solve_spd(stats.Re, mat_transpose(stats.Rxy)))
    x_filt = mat_add(state.x_hat, mat_mul(k, e))
    p_filt = symmetrize(mat_sub(
        state.P, mat_mul(k, mat_mul(stats.Re, mat_transpose(k)))
    ))
    new_state = FilterState(x_hat=x_filt, P=p_filt, k=state.k, t=state.t,
                            kind=FILTERED)
    return new_state, Innovation(e=e, Re=stats.Re, nis=_nis(e, stats.Re))


# ---------------------------------------------------------------------------
# Filtering loop
# ---------------------------------------------------------------------------

@dataclass
class FilterBundle:
    """Everything a run needs, per filter kind.

    kf: linear model (gain computed from its DARE if not supplied).
    ekf/ukf: sde model, measurement covariance R, initial covariance P0,
    and the integration settings in cfg. x0 defaults to zero.
    """

    linear: Optional[DiscreteLinearModel] = None
    sde: Optional[SdeModel] = None
    R: Optional[Matrix] = None
    cfg: UkfConfig = field(default_factory=UkfConfig)
    x0: Optional[Matrix] = None
    P0: Optional[Matrix] = None
    gain: Optional[StationaryGain] = None


@dataclass(frozen=True)
class StepResult:
    """Per-sample filter output; innovation is None for missing samples."""

    k: int
    t: float
    y: Optional[float]
    predicted: FilterState
    filtered: FilterState
    innovation: Optional[Innovation]
    missing: bool


def _kf_gain(model: DiscreteLinearModel) -> StationaryGain:
    eqe = mat_mul(model.E, mat_mul(model.Q, mat_transpose(model.E)))
    p = solve_dare(model.A, model.C, eqe, model.R)
    return stationary_gain(p, model.C, model.R)


def run_filter(kind: str, bundle: FilterBundle, measurements: Sequence,
               sched: InputSchedule, t0: Optional[float] = None) -> list:
    """Run one filter over a measurement sequence.

    measurements are (time_min, y) pairs on the Ts grid (y in absolute
    mg/dL, or None for a dropped sample); gaps in the grid are treated as
    missing samples, which get a time update only. The initial condition
    is the one-step prediction at t0: x(0|-1) = x0, P(0|-1) = P0, so the
    first sample is a measurement update of that prior.
    """
    kind = kind.lower()
    if kind not in ("kf", "ekf", "ukf"):
        raise ValueError(f"unknown filter kind: {kind!r}")
    results: list = []
    if len(measurements) == 0:
        return results

    if kind == "kf":
        model = bundle.linear
        if model is None:
            raise ValueError("kf requires bundle.linear")
        ts = model.Ts
        n = model.n_states
        gain = bundle.gain if bundle.gain is not None else _kf_gain(model)
        p0 = gain.P_pred
    else:
        model = bundle.sde
        if model is None or bundle.R is None or bundle.P0 is None:
            raise ValueError(f"{kind} requires bundle.sde, bundle.R and bundle.P0")
        ts = bundle.cfg.ts
        n = model.n_states
        gain = None
        p0 = bundle.P0

    first_t = measurements[0][0]
    if t0 is None:
        t0 = first_t
    if first_t < t0 - 1e-9:
        raise ValueError(
            f"first measurement at t={first_t} precedes filter start t0={t0}"
        )

    # Rasterize onto the Ts grid; absent slots become missing samples.
    slots: dict = {}
    last_k = 0
    prev_t = None
    for t, y in measurements:
        if prev_t is not None and t <= prev_t:
            raise ValueError(f"measurement times must increase, got {t} after {prev_t}")
        prev_t = t
        k = round((t - t0) / ts)
        if abs(t - (t0 + k * ts)) > 1e-6:
            raise ValueError(
                f"measurement time {t} is not aligned to the Ts={ts} grid"
            )
        slots[k] = None if y is None else float(y)
        last_k = k

    x0 = bundle.x0 if bundle.x0 is not None else Matrix.zeros(n, 1)
    state = FilterState(x_hat=x0, P=p0, k=0, t=t0, kind=PREDICTED)
    pred_points = None
    cfg = bundle.cfg

    for k in range(last_k + 1):
        y = slots.get(k)
        predicted = state
        if y is None:
            filtered = replace(predicted, kind=FILTERED)
            innovation = None
        elif kind == "kf":
            filtered, innovation = kf_update(predicted, y, gain, model)
        elif kind == "ekf":
            filtered, innovation = ekf_update(predicted, y, model, bundle.R)
        else:
            if pred_points is None:
                weights = ukf_weights(n, cfg)
                pred_points = ukf_sigma_points(predicted.x_hat, predicted.P,
                                               weights.c)
            stats = ukf_measurement_stats(pred_points,
                                          ukf_weights(n, cfg), model, bundle.R)
            filtered, innovation = ukf_update(predicted, y, stats)
        results.append(StepResult(k=k, t=predicted.t, y=y, predicted=predicted,
                                  filtered=filtered, innovation=innovation,
                                  missing=y is None))
        if k < last_k:
            if kind == "kf":
                u, d = sched.query(filtered.t)
                state = kf_predict(filtered, model, u, d, gain=gain)
            elif kind == "ekf":
                state = ekf_predict(filtered, model, sched, cfg.ts, cfg.euler_dt)
            else:
                state, pred_points = ukf_predict(filtered, model, sched, cfg)
    return results
