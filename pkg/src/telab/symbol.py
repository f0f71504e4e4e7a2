"""The coupled first-order symbol B(xi) and its spectral toolbox.

B(xi) is the 5x5 matrix of the first-order reduction, in row order
(+omega_1, +omega_2, -omega_1, -omega_2, theta):

    diag(omega_1(xi), omega_2(xi), -omega_1(xi), -omega_2(xi), i*kappa*|xi|^2)
    last column   i*gamma*a_j(xi)            (rows 1..4)
    last row      -(i*gamma/2) conj(a_j(xi)) (columns 1..4)

with omega_j(xi) = |xi| omega_j(eta) and a_j(xi) = |xi| a_j(eta).  Its
characteristic polynomial factors through the elastic data only:

    (nu - i k |xi|^2)(nu^2 - kappa_1(xi))(nu^2 - kappa_2(xi))
      - nu g^2 |xi|^2 |a_1|^2 (nu^2 - kappa_2(xi))
      - nu g^2 |xi|^2 |a_2|^2 (nu^2 - kappa_1(xi))

Eigenvalues are computed as roots of that quintic via the balanced
companion-matrix QR solve (np.roots); branch labels nu0, nu1+-, nu2+-
are assigned by continuation in |xi| from the small-frequency regime.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError, NumericalError

LABELS = ("nu0", "nu1+", "nu1-", "nu2+", "nu2-")

# continuation anchor and step density for branch labelling
_ANCHOR_R = 1e-3
_STEPS_PER_DECADE = 4


@dataclass
class SymbolMatrix:
    """B(xi) with its homogeneous parts and the frame it was built from."""
    xi: np.ndarray
    B: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    frame: object = field(repr=False, default=None)
    gamma: float = 0.0
    kappa: float = 0.0


@dataclass
class SpectrumReport:
    """Labelled eigenvalues of B(xi) with per-eigenvalue residuals.

    eigenvalues[k] carries labels[k]; ordering follows LABELS.  Labels at
    mid-range |xi| are a continuation-based choice (recorded here as
    metadata via `label_method`).
    """
    xi: np.ndarray
    eigenvalues: np.ndarray
    labels: tuple
    residuals: np.ndarray
    label_method: str = "continuation-from-small-|xi|"


def _split_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,):
        raise ValidationError("xi must be a 2-vector")
    r = math.hypot(xi[0], xi[1])
    if r == 0.0:
        raise ValidationError("xi = 0 is rejected (B is undefined there)")
    return xi, r, xi / r


def assemble_B(medium, xi):
    """Assemble B(xi); rejects xi = 0."""
    xi, r, eta = _split_xi(xi)
    f = medium.frame_at(eta)
    g, kap = medium.gamma, medium.kappa
    om = np.array([f.omega1, f.omega2]) * r
    av = np.array([f.a1, f.a2]) * r
    B1 = np.zeros((5, 5), dtype=complex)
    B1[0, 0], B1[1, 1], B1[2, 2], B1[3, 3] = om[0], om[1], -om[0], -om[1]
    B1[:4, 4] = 1j * g * np.array([av[0], av[1], av[0], av[1]])
    B1[4, :4] = -0.5j * g * np.conj(np.array([av[0], av[1], av[0], av[1]]))
    B2 = np.zeros((5, 5), dtype=complex)
    B2[4, 4] = 1j * kap * r * r
    return SymbolMatrix(xi=xi, B=B1 + B2, B1=B1, B2=B2, frame=f, gamma=g, kappa=kap)


def _quintic_from_frame(frame, gamma, kappa, r):
    """Monic characteristic-polynomial coefficients (descending, length 6)."""
    k1 = frame.kappa1 * r * r
    k2 = frame.kappa2 * r * r
    a1sq = abs(frame.a1) ** 2 * r * r
    a2sq = abs(frame.a2) ** 2 * r * r
    g2 = gamma * gamma
    p = np.polymul([1.0, -1j * kappa * r * r], np.polymul([1, 0, -k1], [1, 0, -k2]))
    p = np.polyadd(p, np.polymul([-g2 * a1sq, 0], [1, 0, -k2]))
    p = np.polyadd(p, np.polymul([-g2 * a2sq, 0], [1, 0, -k1]))
    return p.astype(complex)


def char_quintic(medium, xi):
    """Coefficients of det(nu I - B(xi)) in nu, leading coefficient 1."""
    xi, r, eta = _split_xi(xi)
    return _quintic_from_frame(medium.frame_at(eta), medium.gamma, medium.kappa, r)


def quintic_roots(medium, xi):
    """The five (unlabelled) eigenvalues of B(xi) from the quintic."""
    return np.roots(char_quintic(medium, xi))


def _b1_squares(kappa1, kappa2, a1sq, a2sq, gamma):
    """Roots s1 <= s2 of the B1 secular quadratic in s = nu_tilde^2."""
    g2 = gamma * gamma
    b = kappa1 + kappa2 + g2
    c = kappa1 * kappa2 + g2 * (a1sq * kappa2 + a2sq * kappa1)
    disc = max(b * b - 4.0 * c, 0.0)
    root = math.sqrt(disc)
    return 0.5 * (b - root), 0.5 * (b + root)


def _predicted_small(frame, gamma, kappa, r):
    """Leading small-|xi| positions in LABELS order (enough for matching)."""
    s1, s2 = _b1_squares(frame.kappa1, frame.kappa2,
                         abs(frame.a1) ** 2, abs(frame.a2) ** 2, gamma)
    n1, n2 = math.sqrt(s1), math.sqrt(s2)
    return np.array([0.0, r * n1, -r * n1, r * n2, -r * n2], dtype=complex)


def _match(reference, values):
    """Permutation of `values` optimally matching `reference` (5 each)."""
    cost = np.abs(reference[:, None] - values[None, :])
    _, cols = linear_sum_assignment(cost)
    return values[cols]


def _labelled_along(frame, gamma, kappa, radii):
    """Labelled eigenvalue array for a ladder of |xi| along one direction."""
    radii = np.asarray(radii, dtype=float)
    rmin = float(radii.min())
    anchor = min(_ANCHOR_R, rmin)
    # continuation grid: geometric from the anchor through all requested radii
    span = math.log10(float(radii.max()) / anchor)
    n_steps = max(2, int(math.ceil(span * _STEPS_PER_DECADE)) + 1)
    ladder = np.geomspace(anchor, float(radii.max()), n_steps)
    ladder = np.unique(np.concatenate([ladder, radii]))
    current = _match(_predicted_small(frame, gamma, kappa, ladder[0]),
                     np.roots(_quintic_from_frame(frame, gamma, kappa, ladder[0])))
    out = {}
    prev_r = ladder[0]
    if ladder[0] in radii:
        out[ladder[0]] = current
    scale_exp = np.array([2.0, 1.0, 1.0, 1.0, 1.0])  # nu0 ~ r^2, others ~ r
    for r in ladder[1:]:
        ratio = r / prev_r
        prediction = current * ratio ** scale_exp
        roots = np.roots(_quintic_from_frame(frame, gamma, kappa, r))
        current = _match(prediction, roots)
        prev_r = r
        if r in radii:
            out[r] = current
    return np.stack([out[r] for r in radii])


def spectrum_along_ray(medium, eta, radii):
    """Labelled eigenvalues at xi = r*eta for each r; shape (len(radii), 5).

    Columns follow LABELS.  Labels are continued from the small-frequency
    regime, so they stay consistent across the whole ladder.
    """
    eta = np.asarray(eta, dtype=float)
    frame = medium.frame_at(eta)
    return _labelled_along(frame, medium.gamma, medium.kappa, radii)


def spectrum(medium, xi):
    """Labelled SpectrumReport at one frequency."""
    xi, r, eta = _split_xi(xi)
    frame = medium.frame_at(eta)
    eigs = _labelled_along(frame, medium.gamma, medium.kappa, np.array([r]))[0]
    S = assemble_B(medium, xi)
    resid = np.empty(5)
    for k, nu in enumerate(eigs):
        M = nu * np.eye(5) - S.B
        # eigenvector as the right-singular vector of smallest singular value
        _, sv, vh = np.linalg.svd(M)
        v = vh[-1].conj()
        resid[k] = float(np.linalg.norm(M @ v))
        if sv[-1] > 1e-6 * max(1.0, float(sv[0])):
            raise NumericalError(
                f"root {nu} failed to resolve an eigenvector "
                f"(smallest singular value {sv[-1]:.3e}); polynomial residual "
                f"{np.polyval(_quintic_from_frame(frame, medium.gamma, medium.kappa, r), nu):.3e}")
    return SpectrumReport(xi=xi, eigenvalues=eigs, labels=LABELS, residuals=resid)


def eigenprojection(S, nu, eigenvalues):
    """Spectral projector of a simple eigenvalue via the resolvent product.

    P_nu = prod over the other eigenvalues of (nu~ I - B) / (nu~ - nu).
    Rejects near-multiple eigenvalues (the propagator's dense path must be
    used instead).
    """
    eigenvalues = np.asarray(eigenvalues, dtype=complex)
    others = eigenvalues[np.abs(eigenvalues - nu) > 0]
    if len(others) != 4:
        others = np.delete(eigenvalues, int(np.argmin(np.abs(eigenvalues - nu))))
    gap = float(np.min(np.abs(others - nu)))
    if gap <= 1e-6 * (1.0 + abs(nu)):
        raise ValidationError(
            f"eigenvalue {nu} is not simple enough for the projector product "
            f"(gap {gap:.3e})")
    P = np.eye(5, dtype=complex)
    for other in others:
        P = P @ ((other * np.eye(5) - S.B) / (other - nu))
    return P


def propagator(S, t):
    """exp(i t B) by spectral projections, with a dense Pade fallback.

    When the spectrum is well separated the sum of e^{i t nu} P_nu is used;
    otherwise scipy's scaling-and-squaring matrix exponential.
    """
    if t == 0.0:
        return np.eye(5, dtype=complex)
    eigs = np.linalg.eigvals(S.B)
    scale = 1.0 + float(np.max(np.abs(eigs)))
    gap = np.min(np.abs(eigs[:, None] - eigs[None, :])
                 + np.diag(np.full(5, np.inf)))
    if gap > 1e-6 * scale:
        out = np.zeros((5, 5), dtype=complex)
        for nu in eigs:
            out += np.exp(1j * t * nu) * eigenprojection(S, nu, eigs)
        return out
    return scipy.linalg.expm(1j * t * S.B)
