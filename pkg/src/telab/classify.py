"""Direction taxonomy on the unit circle.

A direction is hyperbolic when B(xi) has a real eigenvalue, which for
non-degenerate directions happens exactly when one coupling value
a_j(eta) vanishes; it is degenerate when the elastic eigenvalues cross;
parabolic otherwise.  A hyperbolic direction is gamma-degenerate when
gamma^2 = 2*kappa_j0(eta) - trace A(eta), the excluded constant that
degenerates the first-order normal form.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

COUPLING_TOL = 1e-7      # |a_j0| below this means "vanishes" (reality criterion)
DEGENERATE_RTOL = 1e-9   # relative tolerance on kappa_1 = kappa_2
DERIV_ZERO_RTOL = 1e-6   # derivative-vanishing threshold, relative to circle max


@dataclass
class DirectionClass:
    """Classification of one direction.

    tag : 'parabolic' | 'hyperbolic' | 'degenerate' | 'gamma_degenerate'
    index : 1-based branch index j0 for hyperbolic-type tags, else None
    vanishing_order : order of the coupling zero (hyperbolic tag only);
        None stands for "identically vanishing or order above the cap"
    a4_ok : gamma is not the excluded constant at this direction
    """
    tag: str
    eta: np.ndarray
    phi: float
    index: int | None = None
    vanishing_order: int | None = None
    a4_ok: bool = True


@dataclass
class DirectionCensus:
    """All special directions of a medium located on the circle.

    decoupled media (a coupling value vanishing on a sub-arc) carry the
    flag instead of listing roots for that branch; fully degenerate media
    (A a multiple of the identity everywhere) set all_degenerate.
    """
    directions: list
    decoupled: bool = False
    decoupled_branches: tuple = ()
    all_degenerate: bool = False

    def by_tag(self, tag):
        return [d for d in self.directions if d.tag == tag]

    def hyperbolic_like(self):
        return [d for d in self.directions
                if d.tag in ("hyperbolic", "degenerate", "gamma_degenerate")]


def check_A4(medium, eta_bar, j0):
    """True unless gamma^2 equals 2*kappa_j0 - trace A at this direction."""
    f = medium.frame_at(eta_bar)
    kap = (f.kappa1, f.kappa2)[j0 - 1]
    tr = f.kappa1 + f.kappa2
    g2 = medium.gamma ** 2
    return abs(g2 - (2.0 * kap - tr)) > 1e-9 * (g2 + tr)


def classify_direction(medium, eta, with_order=True):
    """Classify one direction via the reality criterion.

    Uses |a_j0| below COUPLING_TOL rather than a spectrum scan; degeneracy
    wins over the coupling test (degenerate directions are hyperbolic with
    both couplings possibly nonzero).
    """
    f = medium.frame_at(eta)
    eta = f.eta
    if abs(f.kappa1 - f.kappa2) <= DEGENERATE_RTOL * max(f.kappa1, f.kappa2):
        return DirectionClass(tag="degenerate", eta=eta, phi=f.phi)
    absa = (abs(f.a1), abs(f.a2))
    j0 = 1 + int(np.argmin(absa))
    if absa[j0 - 1] > COUPLING_TOL:
        return DirectionClass(tag="parabolic", eta=eta, phi=f.phi)
    ok = check_A4(medium, eta, j0)
    order = vanishing_order(medium, eta, j0) if (with_order and ok) else None
    tag = "hyperbolic" if ok else "gamma_degenerate"
    return DirectionClass(tag=tag, eta=eta, phi=f.phi, index=j0,
                          vanishing_order=order if ok else None, a4_ok=ok)


def _bisect(fun, lo, hi, flo, tol=1e-12, max_iter=80):
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        fmid = fun(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _refine_min(fun, lo, hi, iters=60):
    # golden-section search for an interior minimum of |fun|
    g = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = abs(fun(c)), abs(fun(d))
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = abs(fun(c))
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = abs(fun(d))
    return 0.5 * (a + b)


def find_special_directions(medium, n_scan=1024):
    """Locate all roots of a_1, a_2 and kappa_1 - kappa_2 on [0, 2*pi).

    Sign changes on the scan grid are bracketed and bisected to 1e-12 in
    angle; even-order zeros are caught by local minima of the scanned
    magnitude below 1e-8.  Media with a coupling value vanishing on a
    sub-arc are flagged decoupled instead of listing roots for it.
    """
    if n_scan < 256 or (n_scan & (n_scan - 1)) != 0:
        raise ValidationError("n_scan must be a power of two, at least 256")
    sw = medium.sweep(n_scan)
    step = 2.0 * math.pi / n_scan
    kmax = float(np.max(sw.kappas))

    def eta_of(phi):
        return np.array([math.cos(phi), math.sin(phi)])

    def coupling_fn(branch):
        def fun(phi):
            f = medium.frame_at(eta_of(phi), n=n_scan)
            return (f.a1, f.a2)[branch]
        return fun

    def gap_fn(phi):
        f = medium.frame_at(eta_of(phi), n=n_scan)
        return f.kappa1 - f.kappa2

    angles = []
    decoupled = []
    run_len = max(8, n_scan // 64)
    for branch in (0, 1):
        vals = sw.avals[:, branch].real if np.iscomplexobj(sw.avals) else sw.avals[:, branch]
        small = np.abs(vals) <= 1e-10
        if small.all():
            decoupled.append(branch + 1)
            continue
        # a sub-arc of zeros also flags the medium as decoupled
        if _longest_run(small) >= run_len:
            decoupled.append(branch + 1)
            continue
        angles.extend(_locate_roots(vals, sw.phis, step, coupling_fn(branch),
                                    minima_tol=1e-8))
    gaps = sw.kappas[:, 0] - sw.kappas[:, 1]
    if not sw.all_degenerate:
        angles.extend(_locate_roots(gaps, sw.phis, step, gap_fn,
                                    minima_tol=DEGENERATE_RTOL * kmax))
    angles = sorted(a % (2.0 * math.pi) for a in angles)
    merged = []
    for a in angles:
        if merged and (a - merged[-1] <= 1e-10):
            continue
        merged.append(a)
    if len(merged) >= 2 and (merged[0] + 2.0 * math.pi - merged[-1]) <= 1e-10:
        merged.pop()
    if sw.all_degenerate:
        # every direction is degenerate: no isolated roots to list
        return DirectionCensus(directions=[], decoupled=False,
                               decoupled_branches=tuple(decoupled),
                               all_degenerate=True)
    out = [classify_direction(medium, eta_of(phi)) for phi in merged]
    return DirectionCensus(directions=out, decoupled=bool(decoupled),
                           decoupled_branches=tuple(decoupled))


def _longest_run(mask):
    longest = run = 0
    for flag in np.concatenate([mask, mask]):  # doubled to catch wrap-around runs
        run = run + 1 if flag else 0
        longest = max(longest, run)
    return min(longest, len(mask))


def _locate_roots(vals, phis, step, fun, minima_tol):
    """Roots of a sampled circle function: on-grid hits, sign changes, minima.

    Samples below the noise floor count as roots at the grid angle itself
    (a sign change next to such a sample is the same root and is skipped);
    brackets with a genuine sign change are bisected; interior minima of
    the magnitude are refined and accepted below minima_tol (even-order
    zeros between grid points).
    """
    n = len(vals)
    floor = 1e-12 * float(np.max(np.abs(vals)))
    on_grid = np.abs(vals) <= floor
    found = [phis[k] for k in range(n) if on_grid[k]]
    scale = float(np.max(np.abs(vals)))
    for k in range(n):
        k1 = (k + 1) % n
        if on_grid[k] or on_grid[k1]:
            continue
        v0, v1 = vals[k], vals[k1]
        lo = phis[k]
        if (v0 < 0) != (v1 < 0):
            found.append(_bisect(fun, lo, lo + step, v0))
        else:
            km = (k - 1) % n
            trigger = max(minima_tol, 1e-3 * scale)
            if (abs(v0) <= trigger and abs(v0) <= abs(vals[km])
                    and abs(v0) < abs(v1) and not on_grid[km]):
                phi_min = _refine_min(fun, lo - step, lo + step)
                if abs(fun(phi_min)) <= minima_tol:
                    found.append(phi_min)
    return found


def vanishing_order(medium, eta_bar, j0, n=2048, max_order=8):
    """Smallest order ell with a nonzero ell-th derivative of a_j0 at eta_bar.

    Derivatives come from spectral differentiation of the sweep samples;
    a derivative counts as zero below DERIV_ZERO_RTOL times its maximum
    over the circle.  Returns None when the coupling value vanishes
    identically or past max_order.
    """
    f = medium.frame_at(eta_bar)
    series = medium.sweep(n).coupling_series(j0)
    if series.max_abs() <= 1e-12:
        return None
    for ell in range(1, max_order + 1):
        scale = series.max_abs(order=ell)
        val = series.eval(f.phi, order=ell)
        if abs(val) > DERIV_ZERO_RTOL * scale:
            return ell
    return None
