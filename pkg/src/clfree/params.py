"""Constants, scales and trajectory functions of the C_l-free process.

Everything here is a pure function of its inputs. Logarithms are natural and
all integer scales (m, u, k) are rounded down.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintViolation, DomainError


class Mode(str, enum.Enum):
    ANALYSIS = "analysis"
    SIMULATION = "simulation"


# defaults used by every experiment command
SIM_DEFAULTS = {"mu_hat": 0.4, "eps_hat": 0.1, "W_hat": 1.0}


@dataclass(frozen=True)
class ProcessParams:
    n: int
    ell: int
    mode: Mode
    W: float
    eps: float
    mu: float
    p: float
    t_max: float
    m: int
    s_e: float
    s_o: float
    delta: float
    gamma: float
    u: int
    k: int
    r: int
    tau: int
    theta: int
    u_sigma: float
    lambda_sigma: float
    tau_sigma: float
    beta_sigma: float

    @property
    def n2p(self) -> float:
        """Steps per unit of rescaled time."""
        return self.n * self.n * self.p

    @property
    def np_(self) -> float:
        return self.n * self.p

    def time_of(self, i):
        return i / self.n2p

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mode"] = self.mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProcessParams":
        d = dict(d)
        d["mode"] = Mode(d["mode"])
        return cls(**d)


def min_W(ell: int) -> int:
    return ell * ell * 2 ** (ell + 1)


def max_eps(ell: int) -> float:
    return 1.0 / (2**15 * ell**3)


def delta_of(ell: int) -> float:
    return 1.0 / (60**2 * math.factorial(ell) * ell**ell)


def _density(n: int, ell: int) -> float:
    """n^(-1 + 1/(l-1)), exact when n is a perfect (l-1)-th power."""
    root = round(n ** (1.0 / (ell - 1)))
    if root ** (ell - 1) == n:
        return root / n
    return n ** (1.0 / (ell - 1)) / n


def derive_params(
    n: int,
    ell: int,
    mode: Mode | str = Mode.SIMULATION,
    mu_hat: float | None = None,
    eps_hat: float | None = None,
    W_hat: float | None = None,
    gamma_hat: float | None = None,
    k_hat: int | None = None,
) -> ProcessParams:
    """Build a ProcessParams from (n, ell) and the mode.

    Analysis mode enforces W >= l^2 2^(l+1) >= 50, eps <= 1/(2^15 l^3) and
    2 W mu^(l-1) <= eps; unspecified values default to the extreme legal
    choice (smallest W, largest eps, largest mu). Simulation mode takes
    mu_hat, eps_hat and W_hat verbatim. There gamma defaults to 1 and k to
    max(1, floor(u/60)); both can be overridden.
    """
    mode = Mode(mode)
    if not isinstance(ell, (int, np.integer)) or ell < 4:
        raise DomainError(f"ell must be an integer >= 4, got {ell}")
    if not isinstance(n, (int, np.integer)) or n <= ell:
        raise DomainError(f"need n > ell, got n={n}, ell={ell}")
    n, ell = int(n), int(ell)
    logn = math.log(n)
    delta = delta_of(ell)

    if mode is Mode.ANALYSIS:
        W = float(W_hat) if W_hat is not None else float(min_W(ell))
        eps = float(eps_hat) if eps_hat is not None else max_eps(ell)
        if min_W(ell) < 50:
            raise ConstraintViolation("l^2 2^(l+1) >= 50")
        if W < min_W(ell):
            raise ConstraintViolation(f"W >= l^2 2^(l+1) = {min_W(ell)} (got W={W})")
        if eps <= 0 or eps > max_eps(ell):
            raise ConstraintViolation(f"eps <= 1/(2^15 l^3) = {max_eps(ell):.6g} (got eps={eps})")
        if mu_hat is None:
            mu = (eps / (2 * W)) ** (1.0 / (ell - 1))
            while 2 * W * mu ** (ell - 1) > eps:
                mu = math.nextafter(mu, 0.0)
            while 2 * W * math.nextafter(mu, math.inf) ** (ell - 1) <= eps:
                mu = math.nextafter(mu, math.inf)
        else:
            mu = float(mu_hat)
        if mu <= 0 or 2 * W * mu ** (ell - 1) > eps:
            raise ConstraintViolation(f"2 W mu^(l-1) <= eps (got mu={mu})")
    else:
        missing = [k for k, v in (("mu_hat", mu_hat), ("eps_hat", eps_hat), ("W_hat", W_hat)) if v is None]
        if missing:
            raise DomainError(f"simulation mode needs {', '.join(missing)}")
        mu, eps, W = float(mu_hat), float(eps_hat), float(W_hat)
        for name, v in (("mu_hat", mu), ("eps_hat", eps), ("W_hat", W)):
            if not v > 0:
                raise ConstraintViolation(f"{name} > 0 (got {v})")

    p = _density(n, ell)
    if not 0 < p < 1:
        raise ConstraintViolation(f"0 < p < 1 (got p={p})")
    t_max = mu * logn ** (1.0 / (ell - 1))
    m = math.floor(n * n * p * t_max)
    if mode is Mode.ANALYSIS:
        gamma = max(3 ** (ell + 1) / (delta * mu ** (ell - 1)), 180.0)
    else:
        gamma = float(gamma_hat) if gamma_hat is not None else 1.0
        if not gamma > 0:
            raise ConstraintViolation(f"gamma_hat > 0 (got {gamma})")
    u = math.floor(gamma * n * p * t_max)
    if mode is Mode.SIMULATION:
        if u > n - 1:
            raise ConstraintViolation(f"u <= n - 1 (got u={u}, n={n})")
        k = int(k_hat) if k_hat is not None else max(1, u // 60)
    else:
        k = u // 60
    r = n // (ell - 3)
    if k < 1:
        raise ConstraintViolation(f"k >= 1 (got k={k})")
    if r < 1:
        raise ConstraintViolation(f"r >= 1 (got r={r})")
    tau = 40 * ell
    theta = 20 * ell * tau
    return ProcessParams(
        n=n,
        ell=ell,
        mode=mode,
        W=W,
        eps=eps,
        mu=mu,
        p=p,
        t_max=t_max,
        m=m,
        s_e=n ** (1.0 / (2 * ell) - eps),
        s_o=n ** (2 * eps),
        delta=delta,
        gamma=gamma,
        u=u,
        k=k,
        r=r,
        tau=tau,
        theta=theta,
        u_sigma=k * n ** (15 * ell * eps),
        lambda_sigma=n**eps,
        tau_sigma=n**eps,
        beta_sigma=1.0,
    )


def simulation_params(n: int, ell: int, **overrides) -> ProcessParams:
    kw = dict(SIM_DEFAULTS)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return derive_params(n, ell, Mode.SIMULATION, **kw)


# ---------------------------------------------------------------------------
# trajectory functions; all accept scalars or numpy arrays

def _check_t(t):
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be >= 0")


def _log_q(t, ell):
    return -((2.0 * np.asarray(t, dtype=float)) ** (ell - 1))


def eval_q(t, ell: int):
    """q(t) = exp(-(2t)^(l-1))."""
    _check_t(t)
    return np.exp(_log_q(t, ell))


def _log_f(t, ell, W):
    t = np.asarray(t, dtype=float)
    return (t ** (ell - 1) + t) * W


def eval_f(t, ell: int, W: float):
    """f(t) = exp((t^(l-1) + t) W)."""
    _check_t(t)
    if not W > 0:
        raise DomainError("W must be positive")
    return np.exp(_log_f(t, ell, W))


def _check_j(j, ell):
    if not 0 <= j <= ell - 3:
        raise DomainError(f"j must lie in [0, {ell - 3}], got {j}")


def x_traj(t, j, ell):
    # valid for any real t; callers check the domain
    t = np.asarray(t, dtype=float)
    return (2 * t) ** j * np.exp((ell - 2 - j) * _log_q(t, ell)) / math.factorial(j)


def x_plus(t, j, ell):
    t = np.asarray(t, dtype=float)
    if j == 0:
        return np.zeros_like(t)
    return (2 * j / math.factorial(j)) * (2 * t) ** (j - 1) * np.exp((ell - 2 - j) * _log_q(t, ell))


def x_minus(t, j, ell):
    t = np.asarray(t, dtype=float)
    return 2 * (ell - 2 - j) * (ell - 1) * (2 * t) ** (ell - 2) * x_traj(t, j, ell)


def x_deriv(t, j, ell):
    """Closed-form derivative of x_j, via the product and chain rules."""
    t = np.asarray(t, dtype=float)
    qpow = np.exp((ell - 2 - j) * _log_q(t, ell))
    # d/dt q^a = a q^a * (-2 (l-1) (2t)^(l-2))
    dq = -(ell - 2 - j) * 2 * (ell - 1) * (2 * t) ** (ell - 2) * qpow
    if j == 0:
        return dq
    return (2 * j * (2 * t) ** (j - 1) * qpow + (2 * t) ** j * dq) / math.factorial(j)


def f_traj(t, j, ell, W):
    # computed in log space: f grows and q decays doubly exponentially
    return np.exp(_log_f(t, ell, W) + (ell - 3 - j) * _log_q(t, ell))


def f_deriv(t, j, ell, W):
    t = np.asarray(t, dtype=float)
    rate = W * ((ell - 1) * t ** (ell - 2) + 1) - (ell - 3 - j) * 2 * (ell - 1) * (2 * t) ** (ell - 2)
    return f_traj(t, j, ell, W) * rate


def h_traj(t, j, ell, W):
    return f_deriv(t, j, ell, W) / 2


def S_scale(j: int, params: ProcessParams) -> float:
    return params.k**2 * float(params.r) ** (params.ell - 3) * params.p**j


def eval_trajectory_bundle(t, j: int, params: ProcessParams) -> dict:
    _check_t(t)
    ell = params.ell
    _check_j(j, ell)
    return {
        "x_j": x_traj(t, j, ell),
        "x_plus_j": x_plus(t, j, ell),
        "x_minus_j": x_minus(t, j, ell),
        "f_j": f_traj(t, j, ell, params.W),
        "h_j": h_traj(t, j, ell, params.W),
        "S_j": S_scale(j, params),
    }


def predicted_open(t, n: int, ell: int, literal: bool = False):
    """Predicted |O(i)|: q(t) times the number of pairs (or n^2/2 if literal)."""
    total = n * n / 2 if literal else n * (n - 1) / 2
    return eval_q(t, ell) * total
