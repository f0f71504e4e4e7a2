"""Slowness-sheet geometry: curvature factors and contact orders.

The curvature of the j-th sheet {omega_j^-1(eta) eta} at a direction
factorises through omega_j(eta) + omega_j''(eta); the order of contact
gamma_bar with the tangent is 2 where that factor is nonzero, else
2 + (vanishing order of the factor).  omega_j comes from an eigensolve
with branch logic, so derivatives are taken spectrally on the periodic
samples of the sweep rather than by differentiating the solver; a
finite-difference pass at doubled resolution serves as the independent
oracle in the tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import classify, symbol
from .errors import ValidationError, NumericalError

MIN_BRANCH_OVERLAP = 0.99


@dataclass
class FresnelProfile:
    """omega_j sampled on the circle with its spectral derivative cache."""
    medium: object
    j: int
    n: int

    def __post_init__(self):
        sweep = self.medium.sweep(self.n)
        if sweep.min_branch_overlap() < MIN_BRANCH_OVERLAP:
            raise NumericalError(
                "branch continuation degraded inside the sample window; "
                "derivatives would be unreliable")
        self.series = sweep.omega_series(self.j)
        if np.min(sweep.kappas) <= 0:
            raise ValidationError("omega_j must be positive on the circle")

    def omega(self, phi, order=0):
        return self.series.eval(phi, order=order)

    def curvature_factor_series(self):
        """Samples of omega_j + omega_j'' on the grid."""
        return self.series.grid_values(0) + self.series.grid_values(2)


def _profile(medium, j, n):
    if j not in (1, 2):
        raise ValidationError("sheet index must be 1 or 2")
    return FresnelProfile(medium, j, n)


def curvature_factor(medium, j, eta, n=2048):
    """omega_j(eta) + d^2/dphi^2 omega_j(eta) by spectral differentiation."""
    prof = _profile(medium, j, n)
    phi = math.atan2(eta[1], eta[0])
    return float(prof.omega(phi) + prof.omega(phi, order=2))


def contact_order(medium, j, eta_bar, n=2048, max_order=8):
    """Contact order gamma_bar >= 2 of sheet j at eta_bar.

    2 where the curvature factor is nonzero; otherwise 2 plus the first
    non-vanishing derivative order of the factor (thresholds relative to
    the circle maximum per order, as in the coupling-order measurement).
    Returns None past max_order.
    """
    prof = _profile(medium, j, n)
    phi = math.atan2(eta_bar[1], eta_bar[0])

    def factor_deriv(order):
        return prof.omega(phi, order=order) + prof.omega(phi, order=order + 2)

    def factor_scale(order):
        vals = prof.series.grid_values(order) + prof.series.grid_values(order + 2)
        return float(np.max(np.abs(vals)))

    for k in range(0, max_order - 1):
        scale = factor_scale(k)
        if scale <= 1e-14:
            continue
        if abs(factor_deriv(k)) > classify.DERIV_ZERO_RTOL * scale:
            return k + 2
    return None


def _branch_eigenvalue(medium, xi, j0):
    """The eigenvalue continuing +omega_j0 near a hyperbolic direction."""
    r = float(np.hypot(xi[0], xi[1]))
    frame = medium.frame_at(np.asarray(xi) / r)
    target = r * (frame.omega1, frame.omega2)[j0 - 1]
    roots = np.roots(symbol.char_quintic(medium, xi))
    dist = np.abs(roots - target)
    order = np.argsort(dist)
    if dist[order[0]] > 0.5 * dist[order[1]]:
        raise NumericalError(
            "eigenvalue branch selection ambiguous at this frequency "
            f"(nearest two distances {dist[order[0]]:.3e}, {dist[order[1]]:.3e})")
    return roots[order[0]]


def _kth_derivative(fun, x, k, h):
    """k-th derivative by the iterated central difference (error O(h^2))."""
    if k == 0:
        return fun(x)
    nodes = x + h * (k / 2.0 - np.arange(k + 1))
    weights = np.array([math.comb(k, i) * (-1) ** i for i in range(k + 1)])
    return np.dot(weights, [fun(t) for t in nodes]) / h ** k


def verify_prop33(medium, eta_bar, j0, k_max, radii=(0.01, 0.1, 1.0, 10.0, 100.0),
                  offsets=None):
    """Derivative-bound ratios for the hyperbolic eigenvalue near eta_bar.

    For k <= k_max (at most 2*ell - 1) tabulates

        |d^k (Re nu - omega_j0(xi))| / (|xi| |eta-eta_bar|^(2ell-k))
        |d^k Im nu| / |eta-eta_bar|^(2ell-k)

    on a grid of angular offsets, plus a log-log fit of the per-radius
    ratio ceiling c(|xi|).  Bound violations show up as large ratios in
    the returned rows; nothing is raised.
    """
    ell = classify.vanishing_order(medium, eta_bar, j0)
    if ell is None:
        raise ValidationError("vanishing order is not finite at this direction")
    if k_max > 2 * ell - 1:
        raise ValidationError(f"k_max must be at most 2*ell-1 = {2 * ell - 1}")
    if offsets is None:
        offsets = np.geomspace(1e-3, 1e-1, 7)
    phi_bar = math.atan2(eta_bar[1], eta_bar[0])
    rows = []
    for r in radii:
        def re_part(phi, _r=r):
            eta = np.array([math.cos(phi), math.sin(phi)])
            nu = _branch_eigenvalue(medium, _r * eta, j0)
            om = (medium.frame_at(eta).omega1,
                  medium.frame_at(eta).omega2)[j0 - 1] * _r
            return nu.real - om

        def im_part(phi, _r=r):
            eta = np.array([math.cos(phi), math.sin(phi)])
            return _branch_eigenvalue(medium, _r * eta, j0).imag

        for delta in offsets:
            phi = phi_bar + delta
            h = delta / 16.0
            for k in range(0, k_max + 1):
                dre = _kth_derivative(re_part, phi, k, h)
                dim = _kth_derivative(im_part, phi, k, h)
                denom = delta ** (2 * ell - k)
                rows.append({
                    "r": float(r), "delta": float(delta), "k": k,
                    "re_ratio": abs(dre) / (r * denom),
                    "im_ratio": abs(dim) / denom,
                })
    return rows


def prop33_scaling_fit(rows, k=0):
    """Slope of log max-ratio vs log |xi| over the small-radius rows."""
    by_r = {}
    for row in rows:
        if row["k"] != k:
            continue
        by_r.setdefault(row["r"], []).append(max(row["re_ratio"] * row["r"],
                                                 row["im_ratio"]))
    rs = sorted(r for r in by_r if r <= 1.0)
    if len(rs) < 2:
        raise ValidationError("need at least two radii <= 1 for the fit")
    cs = [max(by_r[r]) for r in rs]
    return float(np.polyfit(np.log(rs), np.log(cs), 1)[0])
