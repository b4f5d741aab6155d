"""Shared test utilities: numpy bridges, generators, and model setups."""

import math

import numpy as np

from cdkalman import (
    FilterBundle,
    Matrix,
    TransferParams,
    UkfConfig,
    build_glucose_model,
    diffusion_gramian,
    discretize_zoh,
    solve_dare,
    stationary_gain,
    wrap_linear_as_sde,
)

GLUCOSE_PARAMS = TransferParams(K_u=-60.0, tau_u=47.0, K_d=18.0, tau_d=33.0)


def to_np(m: Matrix) -> np.ndarray:
    return np.array(m.to_rows())


def from_np(a) -> Matrix:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return Matrix.from_rows(a.tolist())


def assert_close(m: Matrix, expected, rtol=0.0, atol=0.0):
    np.testing.assert_allclose(to_np(m), np.atleast_2d(expected),
                               rtol=rtol, atol=atol)


def random_spd(rng: np.random.Generator, n: int, jitter: float = 0.5) -> Matrix:
    m = rng.standard_normal((n, n))
    return from_np(m @ m.T + jitter * np.eye(n))


def rel_err(m: Matrix, expected) -> float:
    a = to_np(m)
    b = np.atleast_2d(expected)
    denom = max(np.linalg.norm(b), 1e-300)
    return np.linalg.norm(a - b) / denom


def cross_filter_setup(q=1e-4, r=4.0, ts=5.0, euler_dt=0.5):
    """Consistent KF/EKF/UKF bundles over the same continuous glucose plant.

    The nonlinear filters see a full-rank diffusion dominated by the CHO
    channel (sigma_d = sqrt(Ts * q) is the first-order continuous
    equivalent of the discrete CHO noise, plus a small floor on the other
    states so covariances stay positive definite). The stationary KF uses
    the exact one-interval noise Gramian of that same diffusion, so all
    three filters model the identical continuous-time process.
    """
    sys = build_glucose_model(GLUCOSE_PARAMS)
    r_m = Matrix.from_rows([[r]])
    q_m = Matrix.from_rows([[q]])
    model = discretize_zoh(sys, ts, q_m, r_m)
    sigma_d = math.sqrt(ts * q)
    floor = 0.05 * sigma_d
    sigma = Matrix.diag([floor, floor, sigma_d, floor])
    qx = diffusion_gramian(sys.A_c, sigma, ts)
    p_dare = solve_dare(model.A, model.C, qx, r_m)
    gain = stationary_gain(p_dare, model.C, r_m)
    sde = wrap_linear_as_sde(sys, sigma)
    cfg = UkfConfig(euler_dt=euler_dt, ts=ts)
    kf_bundle = FilterBundle(linear=model, gain=gain)
    cd_bundle = FilterBundle(sde=sde, R=r_m, P0=p_dare, cfg=cfg)
    return sys, model, kf_bundle, cd_bundle
