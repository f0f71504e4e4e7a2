"""Closed-form eigenvalue asymptotics of B(xi) and the two
recursive diagonalisation schemes that produce them.

Small frequencies: the 1-homogeneous part dominates.  Its nonzero
eigenvalues nu~_j solve a quadratic in nu~^2; diagonalising in its
eigenbasis and sweeping lower-order terms with commutator corrections
gives

    nu_0(xi)    = i kappa |xi|^2 b_0(eta)              + O(|xi|^3)
    nu_j+-(xi)  = +-|xi| nu~_j + i kappa |xi|^2 b_j(eta) + O(|xi|^3)

Large frequencies: the corner entry i kappa |xi|^2 dominates; a
block-diagonalisation against the corner followed by the standard
scheme on the 4x4 wave block gives

    nu_0(xi)   = i kappa |xi|^2 - i gamma^2 / kappa     + O(1/|xi|)
    nu_j+-(xi) = +-|xi| omega_j + i gamma^2 a_j^2/(2 kappa) + O(1/|xi|)

Near an isolated elastic degeneracy the 4x4 step fails and the 2x2
model eigenvalues delta_-+ take over.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from . import classify, symbol
from .errors import ValidationError, NumericalError

_E55 = np.zeros((5, 5), dtype=complex)
_E55[4, 4] = 1.0


@dataclass
class SmallFreqCoeffs:
    nu_tilde1: float
    nu_tilde2: float
    b0: float
    b1: float
    b2: float


@dataclass
class LargeFreqCoeffs:
    drift0: complex          # nu_0 correction, -i gamma^2 / kappa
    im_shift1: float         # gamma^2 a_1^2 / (2 kappa)
    im_shift2: float


@dataclass
class HyperbolicLimitData:
    C: float
    D: float
    j0: int
    kappa_j0: float
    kappa_other: float

    def im_ratio(self, r):
        """Limit of Im nu_+- / a_j0^2 at radius r (eq. of the limit law)."""
        r = np.asarray(r, dtype=float)
        g2d2 = self.D * self.D * r * r
        return (self._g2 / (2.0 * self._kappa)) * g2d2 / (self.C ** 2 + g2d2)


@dataclass
class DiagonalizationResult:
    """Output of one of the recursive schemes at a concrete xi."""
    diag_terms: list                 # eta-dependent diagonal matrices, per power
    powers: list                     # |xi| exponents matching diag_terms
    transform: np.ndarray            # accumulated similarity at this xi
    residual: float                  # ||T^-1 B T - predicted diagonal||
    block_terms: list = field(default_factory=list)   # large-freq scheme only


def _gamma_degenerate_guard(medium, frame):
    """Reject gamma-degenerate directions (assumption on the constant)."""
    absa = (abs(frame.a1), abs(frame.a2))
    if min(absa) <= classify.COUPLING_TOL:
        j0 = 1 + int(np.argmin(absa))
        kap = (frame.kappa1, frame.kappa2)[j0 - 1]
        tr = frame.kappa1 + frame.kappa2
        g2 = medium.gamma ** 2
        if abs(g2 - (2.0 * kap - tr)) <= 1e-9 * (g2 + tr):
            raise ValidationError(
                "gamma-degenerate direction: gamma^2 equals "
                "2*kappa_j0 - trace A there (excluded constant, cf. (A4))")


def b1_spectrum(medium, eta):
    """Eigenvalues {0, +-nu~_1, +-nu~_2} of the 1-homogeneous part at eta."""
    frame = medium.frame_at(eta)
    _gamma_degenerate_guard(medium, frame)
    s1, s2 = symbol._b1_squares(frame.kappa1, frame.kappa2,
                                abs(frame.a1) ** 2, abs(frame.a2) ** 2,
                                medium.gamma)
    n1, n2 = math.sqrt(s1), math.sqrt(s2)
    return np.array([0.0, n1, -n1, n2, -n2])


def small_freq_coeffs(medium, eta):
    """Second-order coefficients b_0, b_1, b_2 of the small-|xi| expansion.

    b_j vanishes exactly on the branch whose nu~_j^2 collides with a
    kappa (hyperbolic directions w.r.t. that index, and the lower branch
    at degenerate directions).
    """
    frame = medium.frame_at(eta)
    _gamma_degenerate_guard(medium, frame)
    g2 = medium.gamma ** 2
    k1, k2 = frame.kappa1, frame.kappa2
    a1sq, a2sq = abs(frame.a1) ** 2, abs(frame.a2) ** 2
    s1, s2 = symbol._b1_squares(k1, k2, a1sq, a2sq, medium.gamma)
    b0 = 1.0 / (1.0 + g2 * a1sq / k1 + g2 * a2sq / k2)

    def b_of(s):
        for (asq, kap) in ((a1sq, k1), (a2sq, k2)):
            if abs(s - kap) <= 1e-9 * max(s, kap) and asq <= classify.COUPLING_TOL ** 2:
                return 0.0
        if abs(s - k1) <= 1e-12 * max(s, k1) or abs(s - k2) <= 1e-12 * max(s, k2):
            # degenerate direction, lower branch: limit value is 0
            return 0.0
        return 1.0 / (1.0 + g2 * a1sq * (s + k1) / (s - k1) ** 2
                      + g2 * a2sq * (s + k2) / (s - k2) ** 2)

    return SmallFreqCoeffs(nu_tilde1=math.sqrt(s1), nu_tilde2=math.sqrt(s2),
                           b0=b0, b1=b_of(s1), b2=b_of(s2))


def large_freq_coeffs(medium, eta):
    """Constant terms of the large-|xi| expansion at a direction."""
    frame = medium.frame_at(eta)
    g2 = medium.gamma ** 2
    return LargeFreqCoeffs(drift0=-1j * g2 / medium.kappa,
                           im_shift1=g2 * abs(frame.a1) ** 2 / (2 * medium.kappa),
                           im_shift2=g2 * abs(frame.a2) ** 2 / (2 * medium.kappa))


# -- polynomial-matrix helpers (dict: power of |xi| -> 5x5 or 4x4 matrix) --

def _padd(p, q):
    out = dict(p)
    for deg, mat in q.items():
        out[deg] = out.get(deg, 0) + mat
    return out


def _pscale(p, c):
    return {deg: c * mat for deg, mat in p.items()}


def _pmul(p, q):
    out = {}
    for dp, mp in p.items():
        for dq, mq in q.items():
            out[dp + dq] = out.get(dp + dq, 0) + mp @ mq
    return out


def _peval(p, r):
    dim = next(iter(p.values())).shape[0]
    out = np.zeros((dim, dim), dtype=complex)
    for deg, mat in p.items():
        out += (r ** deg) * mat
    return out


def _pclean(p, floor=1e-13):
    return {deg: mat for deg, mat in p.items()
            if np.max(np.abs(mat)) > floor}


def _diagonalize_poly(P, k, direction):
    """Commutator recursion diagonalising P = sum_m |xi|^m P_m.

    The lowest (direction=+1) or highest (direction=-1) power must carry a
    diagonal matrix with distinct entries.  Returns k correction matrices
    N^(m) and the diagonal terms D at powers g, g+direction, ...; the
    remainder after step k is O(|xi|^(g + direction*(k+1))).
    """
    powers = sorted(P.keys(), reverse=(direction < 0))
    g = powers[0]
    D0 = P[g]
    d = np.diag(D0)
    if np.max(np.abs(D0 - np.diag(d))) > 1e-12 * max(1.0, np.max(np.abs(d))):
        raise ValidationError("main part of the scheme input must be diagonal")
    # correction entries R~_ij / (d_j - d_i): the orientation that makes
    # [D, N] cancel the off-diagonal of the remainder
    denom = d[None, :] - d[:, None]
    if np.min(np.abs(denom + np.eye(len(d)))) < 1e-8:
        raise ValidationError(
            "scheme requires distinct main-part eigenvalues "
            f"(min gap {np.min(np.abs(denom + np.eye(len(d)))):.3e})")
    np.fill_diagonal(denom, 1.0)
    N = {0: np.eye(len(d), dtype=complex)}
    diag_terms = {g: np.diag(d.astype(complex))}
    remainder = _pclean(_padd(P, _pscale(diag_terms, -1.0)))
    for m in range(1, k + 1):
        deg = g + direction * m
        E = remainder.get(deg, np.zeros_like(D0))
        diag_terms[deg] = np.diag(np.diag(E))
        Nm = E / denom
        np.fill_diagonal(Nm, 0.0)
        N[direction * m] = Nm
        full = _pmul(P, N)
        back = _pmul(N, diag_terms)
        remainder = _pclean(_padd(full, _pscale(back, -1.0)))
        # degrees at or before this step must have cancelled
        remainder = {dg: mat for dg, mat in remainder.items()
                     if (dg - g) * direction > m}
    return N, diag_terms


def small_freq_diagonalize(medium, xi, k):
    """The small-frequency scheme at xi, to order k (k <= 3).

    Step 1 diagonalises the 1-homogeneous part in its bi-orthogonal
    eigenbasis, turning the corner entry into a rank-one perturbation;
    step 2 runs the commutator recursion.  The residual is measured on
    N_k^-1 B^0 N_k minus the predicted diagonal polynomial at this xi.
    """
    if not (1 <= k <= 3):
        raise ValidationError("expansion order k must be in 1..3")
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(xi[0], xi[1]))
    S = symbol.assemble_B(medium, xi)
    frame = S.frame
    _gamma_degenerate_guard(medium, frame)
    B1u = S.B1 / r
    tilde = b1_spectrum(medium, frame.eta)          # (0, n1, -n1, n2, -n2)
    gaps = np.abs(tilde[:, None] - tilde[None, :]) + np.eye(5)
    if np.min(gaps) < 1e-8:
        raise ValidationError("B1 eigenvalue gap below 1e-8; scheme needs "
                              "five distinct entries")
    vals, vecs = scipy.linalg.eig(B1u)
    # reorder eigenvector columns to the (0, +n1, -n1, +n2, -n2) convention
    _, cols = scipy.optimize.linear_sum_assignment(
        np.abs(tilde[:, None] - vals[None, :]))
    V = vecs[:, cols]
    Vinv = np.linalg.inv(V)
    D1 = np.diag(tilde.astype(complex))
    R2 = Vinv @ (1j * medium.kappa * _E55) @ V
    P = {1: D1, 2: R2}
    N, diag_terms = _diagonalize_poly(P, k, direction=+1)
    Nk = _peval(N, r)
    B0 = _peval(P, r)
    predicted = _peval(diag_terms, r)
    residual = float(np.linalg.norm(np.linalg.inv(Nk) @ B0 @ Nk - predicted))
    powers = sorted(diag_terms.keys())
    return DiagonalizationResult(
        diag_terms=[diag_terms[p] for p in powers], powers=powers,
        transform=V @ Nk, residual=residual)


def _bdiag41(mat):
    out = np.zeros_like(mat)
    out[:4, :4] = mat[:4, :4]
    out[4, 4] = mat[4, 4]
    return out


def large_freq_blockdiag(medium, xi, k):
    """The large-frequency two-stage scheme at xi, to order k (k <= 3).

    Stage 1 block-diagonalises against the dominant corner entry with
    transforms M^(j) built from the last row/column of the remainder;
    stage 2 applies the commutator recursion to the 4x4 wave block
    (rejecting elastically degenerate directions).  The residual compares
    the transformed matrix with the predicted diagonal at this xi.
    """
    if not (1 <= k <= 3):
        raise ValidationError("expansion order k must be in 1..3")
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(xi[0], xi[1]))
    S = symbol.assemble_B(medium, xi)
    frame = S.frame
    B1u = (S.B1 / r).astype(complex)
    B2u = 1j * medium.kappa * _E55
    Bpoly = {2: B2u, 1: B1u}
    M = {0: np.eye(5, dtype=complex)}
    blocks = {2: B2u}
    ikap = 1j / medium.kappa
    remainder = {1: B1u}
    for step in range(1, k + 1):
        deg = 2 - step                      # remainder is O(|xi|^(2-step))
        Rt = remainder.get(deg, np.zeros((5, 5), dtype=complex))
        blocks[deg] = _bdiag41(Rt)
        Mstep = np.zeros((5, 5), dtype=complex)
        Mstep[:4, 4] = -ikap * Rt[:4, 4]
        Mstep[4, :4] = ikap * Rt[4, :4]
        M[-step] = Mstep
        full = _pmul(Bpoly, M)
        back = _pmul(M, blocks)
        remainder = _pclean(_padd(full, _pscale(back, -1.0)))
        remainder = {dg: mat for dg, mat in remainder.items() if dg < deg or dg > 2}
    # stage 2: diagonalise the 4x4 block (needs distinct +-omega entries)
    if abs(frame.kappa1 - frame.kappa2) <= 1e-8 * max(frame.kappa1, frame.kappa2):
        raise ValidationError(
            "degenerate direction: the 4x4 step needs distinct omega_j; "
            "use degenerate_model_eigenvalue instead")
    block4 = {deg: mat[:4, :4] for deg, mat in blocks.items() if deg <= 1}
    N4, diag4 = _diagonalize_poly(block4, max(k - 1, 0), direction=-1) \
        if k >= 2 else ({0: np.eye(4, dtype=complex)}, {1: block4[1]})
    N = {deg: _embed4(mat) for deg, mat in N4.items()}
    diag_terms = {deg: _embed4(mat, corner=0.0) for deg, mat in diag4.items()}
    for deg, mat in blocks.items():
        corner = mat[4, 4]
        if abs(corner) > 0:
            add = np.zeros((5, 5), dtype=complex)
            add[4, 4] = corner
            diag_terms[deg] = diag_terms.get(deg, np.zeros((5, 5), dtype=complex)) + add
    Mk = _peval(M, r)
    Nk = _peval(N, r)
    T = Mk @ Nk
    predicted = _peval(diag_terms, r)
    residual = float(np.linalg.norm(np.linalg.inv(T) @ S.B @ T - predicted))
    powers = sorted(diag_terms.keys(), reverse=True)
    bpowers = sorted(blocks.keys(), reverse=True)
    return DiagonalizationResult(
        diag_terms=[diag_terms[p] for p in powers], powers=powers,
        transform=T, residual=residual,
        block_terms=[blocks[p] for p in bpowers])


def _embed4(mat4, corner=1.0):
    out = np.zeros((5, 5), dtype=complex)
    out[:4, :4] = mat4
    out[4, 4] = corner
    return out


def hyperbolic_limit_constants(medium, eta_bar):
    """Closed-form constants of the non-tangential limit law at eta_bar.

    gamma^2 C = 1 - gamma^2/(kappa_j0 - kappa_other), gamma^2 D = kappa/omega_j0.
    """
    dc = classify.classify_direction(medium, eta_bar, with_order=False)
    if dc.tag == "degenerate":
        raise ValidationError("limit constants need a non-degenerate direction")
    if dc.tag not in ("hyperbolic", "gamma_degenerate"):
        raise ValidationError(f"direction is {dc.tag}, not hyperbolic")
    frame = medium.frame_at(eta_bar)
    j0 = dc.index
    kj = (frame.kappa1, frame.kappa2)[j0 - 1]
    kother = (frame.kappa1, frame.kappa2)[2 - j0]
    g2 = medium.gamma ** 2
    C = (1.0 - g2 / (kj - kother)) / g2
    D = medium.kappa / (g2 * math.sqrt(kj))
    data = HyperbolicLimitData(C=C, D=D, j0=j0, kappa_j0=kj, kappa_other=kother)
    data._g2 = g2
    data._kappa = medium.kappa
    return data


def degenerate_model_eigenvalue(medium, xi, cone_halfwidth=0.35):
    """Model eigenvalues (delta_-, delta_+) near an isolated degeneracy.

    delta_- continues the hyperbolic eigenvalue (it equals omega_1(xi)
    exactly on the degenerate ray); branches are told apart by their
    imaginary parts, which is the continuity choice from the degenerate
    direction.  Rejects xi outside the configured conical neighbourhood.
    """
    xi = np.asarray(xi, dtype=float)
    r = float(np.hypot(xi[0], xi[1]))
    if r == 0.0:
        raise ValidationError("xi = 0 is rejected")
    eta = xi / r
    census = classify.find_special_directions(medium)
    deg = census.by_tag("degenerate")
    if not deg:
        raise ValidationError("medium has no isolated degenerate directions")
    phi = math.atan2(eta[1], eta[0]) % (2 * math.pi)
    dist = min(min(abs(phi - d.phi), 2 * math.pi - abs(phi - d.phi)) for d in deg)
    if dist > cone_halfwidth:
        raise ValidationError(
            f"direction is {dist:.3f} rad from the nearest degenerate "
            f"direction, outside the cone of half-width {cone_halfwidth}")
    frame = medium.frame_at(eta)
    g2 = medium.gamma ** 2
    kap = medium.kappa
    om1, om2 = frame.omega1 * r, frame.omega2 * r
    a1sq, a2sq = abs(frame.a1) ** 2, abs(frame.a2) ** 2
    main = 0.5 * (om1 + om2) + 0.25j * g2 / kap
    root = cmath.sqrt(0.25 * (om1 - om2) ** 2 - g2 * g2 / (16 * kap * kap)
                      + 0.25j * g2 * (om1 - om2) * (a1sq - a2sq) / kap)
    lo, hi = main - root, main + root
    if lo.imag > hi.imag:
        lo, hi = hi, lo
    return lo, hi


def im_part_regimes(medium, eta, radii, c=1.0, factor=2.0):
    """Imaginary-part regime table at one direction.

    Returns one row per (radius, branch) with the reference value from
    the matching asymptotic regime and an `ok` flag; bound violations are
    data, not exceptions.  Parabolic rows check Im nu against
    kappa*b*|xi|^2 (small radii, within `factor`) or positivity with the
    large-frequency floor (large radii).  Near-hyperbolic rows check the
    ratios Im nu / a_j0^2 and Im nu / (|xi|^2 a_j0^2).
    """
    eta = np.asarray(eta, dtype=float)
    frame = medium.frame_at(eta)
    dc = classify.classify_direction(medium, eta, with_order=False)
    if dc.tag == "degenerate":
        raise ValidationError("regime table needs non-degenerate directions")
    radii = np.asarray(radii, dtype=float)
    eigs = symbol.spectrum_along_ray(medium, eta, radii)
    g2 = medium.gamma ** 2
    kap = medium.kappa
    coeffs = small_freq_coeffs(medium, eta)   # rejects gamma-degenerate
    bvals = {"nu0": coeffs.b0, "nu1+": coeffs.b1, "nu1-": coeffs.b1,
             "nu2+": coeffs.b2, "nu2-": coeffs.b2}
    hyper_labels = ()
    if dc.tag == "hyperbolic":
        kj = (frame.kappa1, frame.kappa2)[dc.index - 1]
        jlab = 1 if (abs(coeffs.nu_tilde1 ** 2 - kj)
                     <= abs(coeffs.nu_tilde2 ** 2 - kj)) else 2
        hyper_labels = (f"nu{jlab}+", f"nu{jlab}-")
    omegas = np.array([frame.omega1, frame.omega2])
    im_shift = g2 * np.array([abs(frame.a1) ** 2, abs(frame.a2) ** 2]) / (2 * kap)
    rows = []
    for i, r in enumerate(radii):
        for kk, label in enumerate(symbol.LABELS):
            nu = eigs[i, kk]
            im = float(nu.imag)
            if label in hyper_labels:
                rows.append({"r": float(r), "label": label, "im": im,
                             "regime": "hyperbolic-exact", "ref": 0.0,
                             "ratio": im, "ok": abs(im) <= 1e-9 * (1 + abs(nu))})
                continue
            if r <= c:
                ref = kap * bvals[label] * r * r
                ratio = im / ref if ref > 0 else math.inf
                ok = (1.0 / factor) <= ratio <= factor if ref > 0 else im >= 0
                regime = "parabolic-small"
            else:
                if label == "nu0":
                    ref = max(kap * r * r - g2 / kap, g2 / kap)
                else:
                    # attribute the eigenvalue to its elastic family first
                    m = int(np.argmin(np.abs(abs(nu.real) - r * omegas)))
                    ref = im_shift[m]
                ratio = im / ref if ref > 0 else math.inf
                ok = im >= ref / (2 * factor) if ref > 0 else im > 0
                regime = "parabolic-large"
            rows.append({"r": float(r), "label": label, "im": im,
                         "regime": regime, "ref": float(ref),
                         "ratio": float(ratio), "ok": bool(ok)})
    return rows
