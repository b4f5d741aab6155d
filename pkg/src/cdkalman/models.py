"""Glucose dynamics models, discretization, and synthetic-data simulators.

The linear plant is a pair of second-order transfer functions, K/(tau*s+1)^2,
from subcutaneous insulin rate (IU/min) and carbohydrate ingestion rate
(g/min) to subcutaneous glucose, expressed as a deviation from the 100 mg/dL
operating point. The continuous realization is discretized exactly under
zero-order hold. Nonlinear filters run against the :class:`SdeModel`
interface (drift + constant additive diffusion + output map), so any plant
of that form can be plugged in; the linear plant wrapped via
:func:`wrap_linear_as_sde` is the stock instance.

No parameter values here come from literature; the defaults used in configs
and tests are placeholders.
"""

from __future__ import annotations

import math
import operator
import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

from .matrix import (
    Matrix,
    ShapeError,
    cholesky_lower,
    mat_add,
    mat_exp,
    mat_mul,
    mat_scale,
    mat_transpose,
)
from .rng import Rng

DEFAULT_STEADY_STATE_MGDL = 100.0


class IntegrationError(RuntimeError):
    """Numerical integration produced a non-finite value.

    Attributes:
        time: simulation time (minutes) at which the failure occurred.
    """

    def __init__(self, time: float, detail: str):
        self.time = time
        super().__init__(f"integration failed at t={time:g} min: {detail}")


@dataclass(frozen=True)
class TransferParams:
    """Gains and time constants of the two second-order channels.

    K_u: steady-state glucose change (mg/dL) per unit step of insulin rate
        (IU/min). Physically negative; a non-negative value only warns.
    tau_u: insulin channel time constant, minutes, > 0.
    K_d: steady-state glucose change (mg/dL) per unit step of CHO rate
        (g/min).
    tau_d: CHO channel time constant, minutes, > 0.
    """

    K_u: float
    tau_u: float
    K_d: float
    tau_d: float

    def __post_init__(self):
        if not (self.tau_u > 0.0):
            raise ValueError(f"tau_u must be > 0, got {self.tau_u}")
        if not (self.tau_d > 0.0):
            raise ValueError(f"tau_d must be > 0, got {self.tau_d}")
        if self.K_u >= 0.0:
            warnings.warn(
                "K_u >= 0: insulin is expected to lower glucose", stacklevel=2
            )


@dataclass(frozen=True)
class ContinuousLinearRealization:
    """Continuous-time state-space realization dx = A_c x + B_c u + E_c d.

    The output is C x plus the steady-state offset y_ss (mg/dL); states,
    u and d are deviation variables.
    """

    A_c: Matrix
    B_c: Matrix
    E_c: Matrix
    C: Matrix
    y_ss: float = DEFAULT_STEADY_STATE_MGDL

    def __post_init__(self):
        n = self.A_c.rows
        if self.A_c.cols != n:
            raise ShapeError("A_c must be square")
        if self.B_c.rows != n or self.E_c.rows != n:
            raise ShapeError("B_c and E_c must have as many rows as A_c")
        if self.C.cols != n:
            raise ShapeError("C must have as many columns as A_c")

    @property
    def n_states(self) -> int:
        return self.A_c.rows


@dataclass(frozen=True)
class DiscreteLinearModel:
    """Discrete model x_{k+1} = A x_k + B u_k + E (d_k + w_k), y = C x + y_ss + v.

    w ~ N(0, Q) enters through the CHO input channel, v ~ N(0, R) is the
    sensor noise; Ts is the sampling time in minutes.
    """

    A: Matrix
    B: Matrix
    E: Matrix
    C: Matrix
    Q: Matrix
    R: Matrix
    Ts: float
    y_ss: float = DEFAULT_STEADY_STATE_MGDL

    def __post_init__(self):
        n = self.A.rows
        if self.A.cols != n:
            raise ShapeError("A must be square")
        if self.B.rows != n or self.E.rows != n:
            raise ShapeError("B and E must have as many rows as A")
        if self.C.cols != n:
            raise ShapeError("C must have as many columns as A")
        if self.Q.rows != self.Q.cols or self.Q.rows != self.E.cols:
            raise ShapeError("Q must be square with the disturbance dimension")
        if self.R.rows != self.R.cols or self.R.rows != self.C.rows:
            raise ShapeError("R must be square with the output dimension")
        _require_symmetric_psd_shape(self.Q, "Q")
        _require_symmetric_psd_shape(self.R, "R")
        if not (self.Ts > 0.0):
            raise ValueError(f"Ts must be > 0, got {self.Ts}")

    @property
    def n_states(self) -> int:
        return self.A.rows


def _require_symmetric_psd_shape(m: Matrix, name: str) -> None:
    scale = max(abs(v) for v in m.data)
    tol = 1e-9 * scale
    n = m.rows
    for i in range(n):
        for j in range(i + 1, n):
            if abs(m.data[i * n + j] - m.data[j * n + i]) > tol:
                raise ValueError(f"{name} must be symmetric")


@dataclass(frozen=True)
class SdeModel:
    """Plant interface for the nonlinear filters.

    Dynamics: dx = drift(x, u, d, p) dt + diffusion dW with constant,
    state-independent diffusion (n x q); measurements are
    output(x, p) + noise. Jacobian callables are optional; filters fall
    back to central finite differences when they are None.

    Vectors are column matrices (n x 1); ``params`` is passed through as
    the last argument of every callable.
    """

    n_states: int
    n_inputs: int
    n_disturbances: int
    n_outputs: int
    drift: Callable[[Matrix, Matrix, Matrix, Any], Matrix]
    diffusion: Matrix
    output: Callable[[Matrix, Any], Matrix]
    params: Any = None
    jacobian_drift: Optional[Callable[[Matrix, Matrix, Matrix, Any], Matrix]] = None
    jacobian_output: Optional[Callable[[Matrix, Any], Matrix]] = None

    def __post_init__(self):
        if self.diffusion.rows != self.n_states:
            raise ShapeError(
                f"diffusion must have {self.n_states} rows, "
                f"got {self.diffusion.rows}"
            )


class InputSchedule:
    """Piecewise-constant insulin rate u(t) and CHO rate d(t).

    Each channel is a list of (time_min, value) breakpoints with strictly
    increasing times; query(t) returns the value of the most recent
    breakpoint at or before t, and 0.0 before the first breakpoint.
    """

    def __init__(self, u_points: Sequence = (), d_points: Sequence = ()):
        self._u_times, self._u_values = self._check("u", u_points, allow_negative=True)
        self._d_times, self._d_values = self._check("d", d_points, allow_negative=False)

    @staticmethod
    def _check(name, points, allow_negative):
        times = []
        values = []
        prev = None
        for t, v in points:
            t = float(t)
            v = float(v)
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ValueError(f"{name} breakpoint ({t}, {v}) is not finite")
            if prev is not None and t <= prev:
                raise ValueError(
                    f"{name} breakpoint times must be strictly increasing "
                    f"({t} after {prev})"
                )
            if not allow_negative and v < 0.0:
                raise ValueError(f"{name} values must be >= 0, got {v}")
            times.append(t)
            values.append(v)
            prev = t
        return times, values

    @classmethod
    def constant(cls, u: float = 0.0, d: float = 0.0) -> "InputSchedule":
        return cls(u_points=[(-math.inf, u)] if u else [],
                   d_points=[(-math.inf, d)] if d else [])

    def query(self, t: float) -> tuple:
        """(u, d) in effect at time t."""
        iu = bisect_right(self._u_times, t) - 1
        idd = bisect_right(self._d_times, t) - 1
        u = self._u_values[iu] if iu >= 0 else 0.0
        d = self._d_values[idd] if idd >= 0 else 0.0
        return u, d


def realize_second_order(K: float, tau: float) -> tuple:
    """State-space realization of K / (tau*s + 1)^2.

    Returns (A_c, B_c, C) in controllable canonical form:
    A_c = [[-2/tau, -1/tau^2], [1, 0]], B_c = [1, 0]', C = [0, K/tau^2].
    """
    if not (tau > 0.0):
        raise ValueError(f"tau must be > 0, got {tau}")
    a = Matrix.from_rows([[-2.0 / tau, -1.0 / (tau * tau)], [1.0, 0.0]])
    b = Matrix.column([1.0, 0.0])
    c = Matrix.row([0.0, K / (tau * tau)])
    return a, b, c


def build_glucose_model(params: TransferParams) -> ContinuousLinearRealization:
    """4-state realization stacking the insulin and CHO channels.

    State ordering is fixed as [insulin channel (2 states); CHO channel
    (2 states)]; insulin drives the first block, CHO the second, and the
    output row concatenates both channel outputs.
    """
    au, bu, cu = realize_second_order(params.K_u, params.tau_u)
    ad, bd, cd = realize_second_order(params.K_d, params.tau_d)
    a = Matrix.zeros(4, 4)
    for i in range(2):
        for j in range(2):
            a.data[i * 4 + j] = au.at(i, j)
            a.data[(i + 2) * 4 + (j + 2)] = ad.at(i, j)
    b = Matrix.column([bu.at(0, 0), bu.at(1, 0), 0.0, 0.0])
    e = Matrix.column([0.0, 0.0, bd.at(0, 0), bd.at(1, 0)])
    c = Matrix.row([cu.at(0, 0), cu.at(0, 1), cd.at(0, 0), cd.at(0, 1)])
    return ContinuousLinearRealization(A_c=a, B_c=b, E_c=e, C=c,
                                       y_ss=DEFAULT_STEADY_STATE_MGDL)


def discretize_zoh(sys: ContinuousLinearRealization, Ts: float,
                   Q: Matrix, R: Matrix) -> DiscreteLinearModel:
    """Exact zero-order-hold discretization at sampling time Ts (minutes).

    A = exp(A_c Ts); B and E are read off the top-right blocks of the
    exponential of the augmented matrix [[A_c, B_c, E_c], [0, 0, 0]].
    Q and R are attached as given.
    """
    if not (Ts > 0.0):
        raise ValueError(f"Ts must be > 0, got {Ts}")
    n = sys.n_states
    m = sys.B_c.cols
    q = sys.E_c.cols
    dim = n + m + q
    aug = Matrix.zeros(dim, dim)
    for i in range(n):
        for j in range(n):
            aug.data[i * dim + j] = sys.A_c.at(i, j) * Ts
        for j in range(m):
            aug.data[i * dim + n + j] = sys.B_c.at(i, j) * Ts
        for j in range(q):
            aug.data[i * dim + n + m + j] = sys.E_c.at(i, j) * Ts
    big = mat_exp(aug)
    a = Matrix.zeros(n, n)
    b = Matrix.zeros(n, m)
    e = Matrix.zeros(n, q)
    for i in range(n):
        for j in range(n):
            a.data[i * n + j] = big.at(i, j)
        for j in range(m):
            b.data[i * m + j] = big.at(i, n + j)
        for j in range(q):
            e.data[i * q + j] = big.at(i, n + m + j)
    return DiscreteLinearModel(A=a, B=b, E=e, C=sys.C, Q=Q, R=R, Ts=Ts,
                               y_ss=sys.y_ss)


def diffusion_gramian(A_c: Matrix, sigma: Matrix, Ts: float) -> Matrix:
    """Discrete process noise of the SDE over one interval.

    Computes integral_0^Ts exp(A_c s) sigma sigma' exp(A_c' s) ds with
    Van Loan's augmented-exponential construction. This is the covariance
    a sampled-data filter should attach to one Ts step of the continuous
    plant with diffusion sigma.
    """
    if not (Ts > 0.0):
        raise ValueError(f"Ts must be > 0, got {Ts}")
    n = A_c.rows
    qc = mat_mul(sigma, mat_transpose(sigma))
    dim = 2 * n
    aug = Matrix.zeros(dim, dim)
    for i in range(n):
        for j in range(n):
            aug.data[i * dim + j] = -A_c.at(i, j) * Ts
            aug.data[i * dim + n + j] = qc.at(i, j) * Ts
            aug.data[(i + n) * dim + (j + n)] = A_c.at(j, i) * Ts
    big = mat_exp(aug)
    f12 = Matrix.zeros(n, n)
    f22 = Matrix.zeros(n, n)
    for i in range(n):
        for j in range(n):
            f12.data[i * n + j] = big.at(i, n + j)
            f22.data[i * n + j] = big.at(n + i, n + j)
    return mat_mul(mat_transpose(f22), f12)


@dataclass
class SimResult:
    """Synthetic linear-model trajectory.

    states hold x_k (deviation variables), outputs the noise-free deviation
    output z_k, and measurements the absolute glucose y_k = z_k + y_ss + v_k,
    all at times t_k = k * Ts.
    """

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    measurements: list = field(default_factory=list)


def _is_zero(m: Matrix) -> bool:
    return all(v == 0.0 for v in m.data)


def simulate_linear(model: DiscreteLinearModel, sched: InputSchedule,
                    steps: int, seed: int) -> SimResult:
    """Iterate the discrete model from x_0 = 0 for the given number of steps.

    Process noise w_k ~ N(0, Q) enters through E; measurement noise
    v_k ~ N(0, R) is added to the absolute output. Deterministic for a
    fixed seed (no noise draws are made for an all-zero covariance).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if model.B.cols != 1 or model.E.cols != 1 or model.C.rows != 1:
        raise ShapeError("simulate_linear expects scalar u, d, and output")
    rng = Rng(seed)
    lq = None if _is_zero(model.Q) else cholesky_lower(model.Q)
    lr = None if _is_zero(model.R) else cholesky_lower(model.R)
    x = Matrix.zeros(model.n_states, 1)
    result = SimResult()
    for k in range(steps):
        t = k * model.Ts
        u, d = sched.query(t)
        z = mat_mul(model.C, x).at(0, 0)
        v = lr.at(0, 0) * rng.gauss() if lr is not None else 0.0
        result.times.append(t)
        result.states.append(x)
        result.outputs.append(z)
        result.measurements.append(z + model.y_ss + v)
        w = lq.at(0, 0) * rng.gauss() if lq is not None else 0.0
        x = mat_add(
            mat_add(mat_mul(model.A, x), mat_scale(model.B, u)),
            mat_scale(model.E, d + w),
        )
    return result


def _step_sizes(span: float, dt: float) -> list:
    """Forward-Euler step sizes covering span, last step truncated."""
    nfull = int(math.floor(span / dt + 1e-9))
    sizes = [dt] * nfull
    rem = span - nfull * dt
    if rem > 1e-9 * span:
        sizes.append(rem)
    if not sizes:
        sizes = [span]
    return sizes


def _check_finite_vector(m: Matrix, t: float, what: str) -> None:
    for v in m.data:
        if not math.isfinite(v):
            raise IntegrationError(t, f"{what} produced non-finite value {v!r}")


def euler_maruyama(model: SdeModel, x0: Matrix, sched: InputSchedule,
                   t0: float, t1: float, dt: float, seed: int) -> tuple:
    """Sample one path of the SDE with the Euler-Maruyama scheme.

    x_{j+1} = x_j + f dt + sigma sqrt(dt) xi, xi ~ N(0, I_q). The last step
    is truncated so the path lands exactly on t1. Returns (times, states)
    including the initial point; deterministic for a fixed seed.
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be > 0, got {dt}")
    if not (t1 > t0):
        raise ValueError(f"t1 must exceed t0, got [{t0}, {t1}]")
    if model.n_inputs != 1 or model.n_disturbances != 1:
        raise ShapeError("euler_maruyama drives scalar u and d channels")
    rng = Rng(seed)
    sigma = model.diffusion
    noisy = not _is_zero(sigma)
    q = sigma.cols
    times = [t0]
    states = [x0]
    x = x0
    t = t0
    for h in _step_sizes(t1 - t0, dt):
        u, d = sched.query(t)
        f = model.drift(x, Matrix.column([u]), Matrix.column([d]), model.params)
        _check_finite_vector(f, t, "drift")
        x = mat_add(x, mat_scale(f, h))
        if noisy:
            xi = Matrix.column(rng.gauss_vector(q))
            x = mat_add(x, mat_scale(mat_mul(sigma, xi), math.sqrt(h)))
        t = t + h
        times.append(t)
        states.append(x)
    times[-1] = t1
    return times, states


def wrap_linear_as_sde(sys: ContinuousLinearRealization, sigma: Matrix) -> SdeModel:
    """Expose the linear realization through the SdeModel interface.

    drift = A_c x + B_c u + E_c d, output = C x + y_ss (absolute mg/dL),
    with the analytic Jacobians A_c and C supplied.
    """
    n = sys.n_states
    if sigma.rows != n:
        raise ShapeError(f"sigma must have {n} rows, got {sigma.rows}")
    a_rows = sys.A_c.to_rows()
    b = sys.B_c.data
    e = sys.E_c.data
    c = sys.C
    c_data = c.data
    y_ss = sys.y_ss
    a_c = sys.A_c
    mul = operator.mul

    def drift(x: Matrix, u: Matrix, d: Matrix, _p) -> Matrix:
        xd = x.data
        u0 = u.data[0]
        d0 = d.data[0]
        return Matrix._raw(n, 1, [
            bi * u0 + ei * d0 + sum(map(mul, row, xd))
            for bi, ei, row in zip(b, e, a_rows)
        ])

    def output(x: Matrix, _p) -> Matrix:
        return Matrix._raw(1, 1, [y_ss + sum(map(mul, c_data, x.data))])

    return SdeModel(
        n_states=n,
        n_inputs=sys.B_c.cols,
        n_disturbances=sys.E_c.cols,
        n_outputs=sys.C.rows,
        drift=drift,
        diffusion=sigma,
        output=output,
        params=None,
        jacobian_drift=lambda x, u, d, p: a_c,
        jacobian_output=lambda x, p: c,
    )
