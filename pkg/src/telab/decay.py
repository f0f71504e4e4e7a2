"""Lp-Lq decay-exponent prediction from classification data.

Rates are (1+t)^(-e (1/p - 1/q)).  Per hyperbolic direction the exponent
is e = 1/min(2*ell, gamma_bar): 1/2 for simple coupling zeros on convex
sheets, 1/gamma_bar when the sheet contact degenerates first, 1/(2*ell)
when the coupling zero does.  Parabolic components contribute exponent 1
at small frequencies and exponential decay at large ones (recorded as
"exp", never the bottleneck).  The global rate is the minimum finite
exponent; it also governs the energy reconstruction through the unitary
elastic diagonaliser.
"""

from dataclasses import dataclass, field

import numpy as np

from . import classify, fresnel
from .errors import ValidationError


@dataclass
class DirectionRate:
    phi: float
    tag: str
    index: int | None
    ell: int | None
    gamma_bar: int | None
    exponent: float


@dataclass
class DecayPrediction:
    per_direction: list
    parabolic_small_freq: float
    parabolic_large_freq: str
    global_exponent: float
    regularity_note: str = "requires Sobolev regularity r > 2(1/p - 1/q), strict"
    decoupled_branches: tuple = ()
    strichartz_exponent: float | None = None

    def as_text(self):
        lines = [f"global_exponent = {self.global_exponent:.12g}",
                 f"parabolic_small_freq = {self.parabolic_small_freq:.12g}",
                 f"parabolic_large_freq = {self.parabolic_large_freq}"]
        if self.strichartz_exponent is not None:
            lines.append(f"strichartz_exponent = {self.strichartz_exponent:.12g}")
            lines.append(f"decoupled_branches = {list(self.decoupled_branches)}")
        lines.append(f"regularity = {self.regularity_note}")
        for d in sorted(self.per_direction, key=lambda x: x.phi):
            lines.append(
                f"direction phi={d.phi:.12g} tag={d.tag} j0={d.index} "
                f"ell={d.ell} gamma_bar={d.gamma_bar} exponent={d.exponent:.12g}")
        return "\n".join(lines) + "\n"


def predict_direction(direction, gamma_bar):
    """Exponent for one hyperbolic direction: 1/min(2*ell, gamma_bar)."""
    if direction.tag != "hyperbolic":
        raise ValidationError(f"prediction needs a hyperbolic direction, got {direction.tag}")
    ell = direction.vanishing_order
    if ell is None:
        raise ValidationError(
            "coupling vanishes identically or past the order cap; use the "
            "Strichartz/contact branch of the global prediction")
    return 1.0 / min(2 * ell, gamma_bar)


def _strichartz_exponent(medium, branch, n=2048):
    """Decoupled wave branch: 1/2 on strictly convex sheets, else 1/gamma_bar."""
    prof = fresnel.FresnelProfile(medium, branch, n)
    factor = prof.curvature_factor_series()
    scale = float(np.max(np.abs(factor)))
    flat = np.abs(factor) <= classify.DERIV_ZERO_RTOL * max(scale, 1e-14)
    if not flat.any():
        return 0.5, None
    worst = 2
    for k in np.flatnonzero(flat):
        phi = 2.0 * np.pi * k / prof.n
        gb = fresnel.contact_order(medium, branch, (np.cos(phi), np.sin(phi)), n=n)
        if gb is None:
            raise ValidationError("contact order past the cap on the decoupled sheet")
        worst = max(worst, gb)
    return 1.0 / worst, worst


def predict_global(medium, n_scan=1024):
    """Assemble all per-direction exponents and the global rate.

    Refuses media violating the excluded-constant assumption at any
    located direction (naming it); fully degenerate media are rejected.
    """
    census = classify.find_special_directions(medium, n_scan)
    if census.all_degenerate:
        raise ValidationError("fully degenerate medium: prediction out of scope")
    bad = census.by_tag("gamma_degenerate")
    if bad:
        raise ValidationError(
            f"prediction refused: gamma-degenerate direction at phi={bad[0].phi:.6g}")
    per = []
    exponents = [1.0]  # the small-frequency parabolic component
    for d in census.by_tag("hyperbolic"):
        if d.vanishing_order is None:
            raise ValidationError(
                f"vanishing order past the cap at phi={d.phi:.6g}")
        gb = fresnel.contact_order(medium, d.index, d.eta)
        if gb is None:
            raise ValidationError(f"contact order past the cap at phi={d.phi:.6g}")
        e = predict_direction(d, gb)
        per.append(DirectionRate(phi=d.phi, tag=d.tag, index=d.index,
                                 ell=d.vanishing_order, gamma_bar=gb, exponent=e))
        exponents.append(e)
    for d in census.by_tag("degenerate"):
        # degenerate directions carry undamped energy; rate follows the
        # sheet geometry there (contact order of either touching sheet)
        gb = fresnel.contact_order(medium, 1, d.eta)
        e = 1.0 / gb if gb else 0.0
        per.append(DirectionRate(phi=d.phi, tag=d.tag, index=None,
                                 ell=None, gamma_bar=gb, exponent=e))
        exponents.append(e)
    stri = None
    stri_gb = None
    if census.decoupled:
        for branch in census.decoupled_branches:
            e, gb = _strichartz_exponent(medium, branch)
            stri = e if stri is None else min(stri, e)
            stri_gb = gb
            exponents.append(e)
    return DecayPrediction(
        per_direction=per,
        parabolic_small_freq=1.0,
        parabolic_large_freq="exp",
        global_exponent=min(exponents),
        decoupled_branches=census.decoupled_branches,
        strichartz_exponent=stri)
