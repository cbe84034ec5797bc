"""Numeric checks of the trajectory identities and banded trajectory reports."""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .errors import DomainError, MissingSeriesError
from .graph import closing_ranks
from .params import (
    ProcessParams, S_scale, eval_f, eval_q, f_traj, h_traj, predicted_open, x_deriv, x_minus,
    x_plus, x_traj,
)

# below this magnitude the trajectory values are underflow noise
_TINY = 1e-250


def _rel(a, b, scale):
    scale = np.maximum(scale, np.abs(b))
    err = np.abs(a - b)
    return np.where(scale > _TINY, err / np.where(scale > _TINY, scale, 1.0), 0.0)


def _rate(t, j, ell):
    # inverse of the local time scale on which x_j changes
    rate = 1.0 + (ell - 2 - j) * 2 * (ell - 1) * (2 * t) ** (ell - 2)
    return rate + np.where(t > 0, j / np.where(t > 0, t, 1.0), 0.0)


def _five_point(fn, t, h):
    return (fn(t - 2 * h) - 8 * fn(t - h) + 8 * fn(t + h) - fn(t + 2 * h)) / (12 * h)


def verify_ode_identities(ell: int, grid_step: float = 1e-3, t_end: float = 2.0, W: float = 1.0) -> dict:
    """Check x_j' = x+_j - x-_j and f_j = 2 int_0^t h_j + 1 on a grid.

    Derivative errors are relative to max(|x+_j|, |x-_j|, |x_j| * rate), with
    |x_j| taken over the stencil and rate the inverse local time scale of x_j,
    so that cancellation near stationary points does not inflate them. The
    derivative is compared both with its closed form and with a five-point
    central difference; the integral is accumulated interval by interval
    with adaptive quadrature.
    """
    if grid_step <= 0 or t_end <= 0:
        raise DomainError("grid_step and t_end must be positive")
    t = np.linspace(0.0, t_end, int(round(t_end / grid_step)) + 1)
    worst_closed = worst_fd = worst_int = 0.0
    per_j = {}
    for j in range(ell - 2):
        xp, xm = x_plus(t, j, ell), x_minus(t, j, ell)
        lhs = xp - xm
        rate = _rate(t, j, ell)
        h = 1e-3 / rate
        # roundoff in the stencil is set by |x_j| over the whole stencil
        reach = np.max([np.abs(x_traj(t + c * h, j, ell)) for c in (-2, -1, 0, 1, 2)], axis=0)
        scale = np.maximum(np.maximum(np.abs(xp), np.abs(xm)), reach * rate)
        closed = _rel(lhs, x_deriv(t, j, ell), scale)
        fd = _rel(lhs, _five_point(lambda s: x_traj(s, j, ell), t, h), scale)
        if j > 0:
            # x_j has a zero of order j at t = 0; only the closed form is checked there
            fd[t == 0] = 0.0
        # integral identity
        acc = 0.0
        integ = np.zeros_like(t)
        for a in range(1, t.size):
            val, _ = quad(h_traj, t[a - 1], t[a], args=(j, ell, W), epsabs=1e-14, epsrel=1e-12, limit=200)
            acc += val
            integ[a] = acc
        fj = f_traj(t, j, ell, W)
        resid = np.abs(fj - 2 * integ - 1) / np.maximum(1.0, np.abs(fj))
        per_j[j] = {"closed": float(closed.max()), "fd": float(fd.max()), "integral": float(resid.max())}
        worst_closed = max(worst_closed, per_j[j]["closed"])
        worst_fd = max(worst_fd, per_j[j]["fd"])
        worst_int = max(worst_int, per_j[j]["integral"])
    return {
        "ell": ell,
        "max_rel_error_derivative": worst_fd,
        "max_rel_error_derivative_closed_form": worst_closed,
        "max_rel_error_integral": worst_int,
        "per_j": per_j,
    }


# ---------------------------------------------------------------------------
# run histories

class HistoryRecorder:
    """Process observer collecting the series a trajectory report needs.

    ``closed_sample`` is a fixed list of pairs whose closing families are
    measured every ``closed_every`` steps; ``tracker`` is an optional
    LedgerTracker whose first ledger supplies tuple counts.
    """

    def __init__(self, params: ProcessParams, closed_sample=None, closed_every: int = 0, tracker=None):
        self.params = params
        self.series: dict[str, list] = {"open_pairs": [], "degree_max": [], "new_closed": []}
        self.closed_sample = list(closed_sample or [])
        self.closed_every = closed_every
        self.tracker = tracker
        if self.closed_sample:
            self.series["closed_family_size"] = []

    def start(self, run):
        g = run.graph
        self.series["open_pairs"].append((0, run.open_count))
        self.series["degree_max"].append((0, g.max_degree))
        if self.closed_sample:
            self._closed(run, 0)
        if self.tracker is not None:
            self._tuples(0)

    def _closed(self, run, i):
        g = run.graph
        sizes = [len(closing_ranks(g, x, y, run.ell)) for x, y in self.closed_sample if not g.has_edge(x, y)]
        if sizes:
            self.series["closed_family_size"].append((i, float(np.mean(sizes))))

    def _tuples(self, i):
        led = self.tracker.ledgers[0]
        for j, c in enumerate(led.scaled_counts()):
            self.series.setdefault(f"tuple_count({j})", []).append((i, c))

    def after_step(self, run, rec):
        i = rec.i
        self.series["open_pairs"].append((i, rec.open_count))
        self.series["degree_max"].append((i, run.graph.max_degree))
        self.series["new_closed"].append((i, len(rec.newly_closed)))
        if self.closed_sample and self.closed_every and i % self.closed_every == 0:
            self._closed(run, i)
        if self.tracker is not None:
            self._tuples(i)


@dataclass
class TrajectoryReport:
    quantity: str
    i: np.ndarray
    t: np.ndarray
    measured: np.ndarray
    predicted: np.ndarray
    band: np.ndarray
    resid: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.resid = np.where(self.band > 0, (self.measured - self.predicted) / self.band, np.nan)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "t", "measured", "predicted", "band", "resid"])
        for row in zip(self.i, self.t, self.measured, self.predicted, self.band, self.resid):
            w.writerow([int(row[0])] + [_fmt(v) for v in row[1:]])
        return buf.getvalue()

    def __len__(self):
        return int(self.i.size)


def _fmt(v) -> str:
    return "" if not np.isfinite(v) else repr(float(v))


_TUPLE_RE = re.compile(r"tuple_count\((\d+)\)")


def trajectory_report(history, quantity: str, sigma=None, params: ProcessParams | None = None,
                      literal: bool = False) -> TrajectoryReport:
    """Measured series against its predicted trajectory and band."""
    series = history.series if hasattr(history, "series") else history
    if params is None:
        params = history.params
    if quantity not in series or not series[quantity]:
        raise MissingSeriesError(f"history has no series {quantity!r}")
    arr = np.asarray(series[quantity], dtype=float)
    i, measured = arr[:, 0], arr[:, 1]
    t = i / params.n2p
    n, ell, W, s_e, p = params.n, params.ell, params.W, params.s_e, params.p
    f = eval_f(t, ell, W)
    if quantity == "open_pairs":
        pred = predicted_open(t, n, ell, literal)
        band = 3 * f / s_e * pred
    elif quantity == "closed_family_size":
        pred = (ell - 1) * (2 * t) ** (ell - 2) * eval_q(t, ell) / p
        band = 7 * ell * f / s_e / p
    elif quantity == "degree_max":
        pred = np.full_like(t, 3 * params.np_ * params.t_max)
        band = np.zeros_like(t)
    else:
        m = _TUPLE_RE.fullmatch(quantity)
        if not m:
            raise DomainError(f"unknown quantity {quantity!r}")
        j = int(m.group(1))
        S = S_scale(j, params)
        if sigma is not None:
            # the configuration's real product size replaces k^2 r^(l-3)
            S = sigma.total_tuples * p**j
        pred = S * x_traj(t, j, ell)
        band = S * f_traj(t, j, ell, W) / params.s_o
    return TrajectoryReport(quantity, i, t, measured, pred, band)
