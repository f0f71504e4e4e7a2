"""Elastic symbol families A(eta) on the unit circle.

A medium is a 2x2 Hermitian positive matrix family A(eta) together with
the heat-conduction constant kappa > 0 and the coupling constant
gamma != 0.  Built-in families:

    isotropic   A(eta) = mu*I + (lam+mu) eta (x) eta
    cubic       diag entries (tau-mu) eta_i^2 + mu, off-diagonal (lam+mu) eta1 eta2
    rhombic     like cubic with tau1, tau2 on the diagonal

plus ``custom-sampled`` media given by matrix tables on an equispaced
angle grid (interpolated trigonometrically).

Eigenvalue/eigenvector branches are made continuous along the circle by
an overlap-following sweep seeded at phi = 0 (ascending eigenvalues,
lexicographically positive eigenvectors).  Away from the seed, branch 1
is *not* necessarily the smaller eigenvalue: labels follow the smooth
continuation through crossings, which is what the downstream spectral
differentiation requires.  At exactly degenerate angles the frame is the
one-sided limit along increasing phi.

All objects are immutable after construction; sweep caches are filled
idempotently and the module is safe for concurrent use.
"""

import csv
import math

import numpy as np

from .errors import ValidationError
from .periodic import PeriodicSamples

KINDS = ("isotropic", "cubic", "rhombic", "custom-sampled")

_PARAM_NAMES = {
    "isotropic": ("lambda", "mu"),
    "cubic": ("tau", "mu", "lambda"),
    "rhombic": ("tau1", "tau2", "mu", "lambda"),
    "custom-sampled": (),
}

# angles where positivity of A is spot-checked at construction
_POSITIVITY_CHECK_ANGLES = 64


def _as_unit(eta):
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (2,):
        raise ValidationError("direction must be a 2-vector")
    if abs(np.hypot(eta[0], eta[1]) - 1.0) > 1e-12:
        raise ValidationError("direction must be a unit vector (|eta| = 1 within 1e-12)")
    return eta


class ElasticEigenFrame:
    """Eigen-data of A(eta) at one direction, on continuous branches.

    Attributes
    ----------
    eta : (2,) ndarray            unit direction
    phi : float                   its angle
    kappa1, kappa2 : float        branch eigenvalues (branch order, not sorted)
    omega1, omega2 : float        their square roots
    r1, r2 : (2,) ndarray         unit eigenvector branches
    a1, a2 : float or complex     coupling values r_j . eta
    """

    __slots__ = ("eta", "phi", "kappa1", "kappa2", "omega1", "omega2",
                 "r1", "r2", "a1", "a2")

    def __init__(self, eta, phi, kappas, vecs, avals):
        self.eta = eta
        self.phi = phi
        self.kappa1, self.kappa2 = float(kappas[0]), float(kappas[1])
        self.omega1 = math.sqrt(self.kappa1)
        self.omega2 = math.sqrt(self.kappa2)
        self.r1 = vecs[:, 0]
        self.r2 = vecs[:, 1]
        self.a1, self.a2 = avals[0], avals[1]

    @property
    def kappas(self):
        return (self.kappa1, self.kappa2)

    @property
    def omegas(self):
        return (self.omega1, self.omega2)

    @property
    def avals(self):
        return (self.a1, self.a2)


def _lex_positive(vec):
    """Rotate the phase so the first significant component is positive."""
    for x in vec:
        if abs(x) > 1e-12:
            return vec * (np.conj(x) / abs(x))
    return vec


def _align_to(ref, w, v):
    """Permute/phase-fix eigenpairs (w, v) for maximal overlap with ref columns."""
    ov = ref.conj().T @ v
    keep = abs(ov[0, 0]) ** 2 + abs(ov[1, 1]) ** 2
    swap = abs(ov[0, 1]) ** 2 + abs(ov[1, 0]) ** 2
    if swap > keep:
        v = v[:, ::-1]
        w = w[::-1]
        ov = ov[:, ::-1]
    v = v.copy()
    for j in range(2):
        o = ov[j, j]
        if abs(o) > 1e-12:
            v[:, j] = v[:, j] * (np.conj(o) / abs(o))
    return w, v


class FrameSweep:
    """Continuous eigenframes of one medium at n equispaced angles."""

    def __init__(self, medium, n):
        self.n = n
        self.phis = 2.0 * np.pi * np.arange(n) / n
        A = medium.symbol_angles(self.phis)
        w, v = np.linalg.eigh(A)          # ascending eigenvalues per angle
        if medium.is_real:
            v = v.real.astype(float)
        kappas = np.empty((n, 2))
        vecs = np.empty((n, 2, 2), dtype=v.dtype)
        # seed: ascending order, lexicographically positive vectors
        v0 = v[0].copy()
        for j in range(2):
            v0[:, j] = _lex_positive(v0[:, j])
        kappas[0], vecs[0] = w[0], v0
        for k in range(1, n):
            kappas[k], vecs[k] = _align_to(vecs[k - 1], w[k], v[k])
        self.kappas = kappas
        self.vecs = vecs
        eta = np.stack([np.cos(self.phis), np.sin(self.phis)], axis=-1)
        self.avals = np.einsum("kij,ki->kj", vecs.conj(), eta)
        if medium.is_real:
            self.avals = self.avals.real
        gaps = np.abs(kappas[:, 0] - kappas[:, 1])
        self.all_degenerate = bool(np.max(gaps) <= 1e-12 * np.max(kappas))
        self._series = {}

    def coupling_series(self, branch):
        """PeriodicSamples of the coupling value a_branch (1-based branch)."""
        key = ("a", branch)
        if key not in self._series:
            self._series[key] = PeriodicSamples(self.avals[:, branch - 1])
        return self._series[key]

    def omega_series(self, branch):
        """PeriodicSamples of omega_branch = sqrt(kappa_branch) (1-based)."""
        key = ("omega", branch)
        if key not in self._series:
            self._series[key] = PeriodicSamples(np.sqrt(self.kappas[:, branch - 1]))
        return self._series[key]

    def min_branch_overlap(self):
        """Smallest |<r_j(k), r_j(k+1)>| around the circle (continuity check)."""
        rolled = np.roll(self.vecs, -1, axis=0)
        ov = np.abs(np.einsum("kij,kij->kj", self.vecs.conj(), rolled))
        return float(ov.min())


class Medium:
    """Descriptor of an elastic symbol family plus (gamma, kappa).

    Use :func:`make_medium` or the convenience constructors
    :func:`isotropic`, :func:`cubic`, :func:`rhombic`, :func:`custom_sampled`.
    """

    def __init__(self, kind, params, gamma, kappa, samples=None):
        if kind not in KINDS:
            raise ValidationError(f"unknown medium kind {kind!r}; expected one of {KINDS}")
        gamma = float(gamma)
        kappa = float(kappa)
        if gamma == 0.0:
            raise ValidationError("constraint 'gamma != 0' violated")
        if kappa <= 0.0:
            raise ValidationError("constraint 'kappa > 0' violated")
        params = {k: float(v) for k, v in dict(params or {}).items()}
        expected = set(_PARAM_NAMES[kind])
        if set(params) != expected:
            raise ValidationError(
                f"medium kind {kind!r} takes parameters {sorted(expected)}, got {sorted(params)}")
        self.kind = kind
        self.params = params
        self.gamma = gamma
        self.kappa = kappa
        self.samples = None
        self._interp = None
        if kind == "custom-sampled":
            self._init_samples(samples)
        else:
            if samples is not None:
                raise ValidationError("sample table only allowed for custom-sampled media")
            self._check_ranges()
        self.is_real = True if kind != "custom-sampled" else bool(
            np.max(np.abs(self.samples.imag)) <= 1e-12 * np.max(np.abs(self.samples)))
        self._sweeps = {}
        self._check_positivity()

    # -- validation ----------------------------------------------------

    def _check_ranges(self):
        p = self.params
        if self.kind == "isotropic":
            if p["mu"] <= 0:
                raise ValidationError("constraint 'mu > 0' violated")
            if p["lambda"] + p["mu"] <= 0:
                raise ValidationError("constraint 'lambda + mu > 0' violated")
        elif self.kind == "cubic":
            if p["tau"] <= 0:
                raise ValidationError("constraint 'tau > 0' violated")
            if p["mu"] <= 0:
                raise ValidationError("constraint 'mu > 0' violated")
            if not (-2 * p["mu"] - p["tau"] < p["lambda"]):
                raise ValidationError("constraint '-2*mu - tau < lambda' violated")
            if not (p["lambda"] < p["tau"]):
                raise ValidationError("constraint 'lambda < tau' violated")
        elif self.kind == "rhombic":
            for name in ("tau1", "tau2", "mu"):
                if p[name] <= 0:
                    raise ValidationError(f"constraint '{name} > 0' violated")
            root = math.sqrt(p["tau1"] * p["tau2"])
            if not (-2 * p["mu"] - root < p["lambda"] < root):
                raise ValidationError(
                    "constraint '-2*mu - sqrt(tau1*tau2) < lambda < sqrt(tau1*tau2)' violated")

    def _init_samples(self, samples):
        if samples is None:
            raise ValidationError("custom-sampled media need a sample table")
        samples = np.asarray(samples, dtype=complex)
        if samples.ndim != 3 or samples.shape[1:] != (2, 2):
            raise ValidationError("sample table must have shape (N, 2, 2)")
        n = samples.shape[0]
        if n < 4 or (n & (n - 1)) != 0:
            raise ValidationError("sample count N must be a power of two (N >= 4)")
        herm = np.max(np.abs(samples - samples.conj().transpose(0, 2, 1)))
        if herm > 1e-12 * max(1.0, np.max(np.abs(samples))):
            raise ValidationError("custom sample matrices must be Hermitian")
        self.samples = samples
        # one interpolant per independent real entry function
        self._interp = {
            "a11": PeriodicSamples(samples[:, 0, 0].real),
            "a22": PeriodicSamples(samples[:, 1, 1].real),
            "re12": PeriodicSamples(samples[:, 0, 1].real),
            "im12": PeriodicSamples(samples[:, 0, 1].imag),
        }

    def _check_positivity(self):
        phis = 2.0 * np.pi * np.arange(_POSITIVITY_CHECK_ANGLES) / _POSITIVITY_CHECK_ANGLES
        A = self.symbol_angles(phis)
        evs = np.linalg.eigvalsh(A)
        if np.min(evs) <= 0:
            k = int(np.argmin(evs.min(axis=1)))
            raise ValidationError(
                f"A(eta) is not positive definite at phi = {phis[k]:.6f} "
                f"(min eigenvalue {evs.min():.3e})")

    # -- symbol evaluation ----------------------------------------------

    def symbol_angles(self, phis):
        """A(eta) at the given angles, shape (m, 2, 2)."""
        phis = np.asarray(phis, dtype=float)
        c, s = np.cos(phis), np.sin(phis)
        p = self.params
        if self.kind == "isotropic":
            d = p["lambda"] + p["mu"]
            a11 = d * c * c + p["mu"]
            a22 = d * s * s + p["mu"]
            a12 = d * c * s
        elif self.kind == "cubic":
            a11 = (p["tau"] - p["mu"]) * c * c + p["mu"]
            a22 = (p["tau"] - p["mu"]) * s * s + p["mu"]
            a12 = (p["lambda"] + p["mu"]) * c * s
        elif self.kind == "rhombic":
            a11 = (p["tau1"] - p["mu"]) * c * c + p["mu"]
            a22 = (p["tau2"] - p["mu"]) * s * s + p["mu"]
            a12 = (p["lambda"] + p["mu"]) * c * s
        else:
            a11 = self._interp["a11"].eval(phis)
            a22 = self._interp["a22"].eval(phis)
            a12 = self._interp["re12"].eval(phis) + 1j * self._interp["im12"].eval(phis)
        out = np.empty(phis.shape + (2, 2), dtype=complex if self.kind == "custom-sampled" else float)
        out[..., 0, 0] = a11
        out[..., 1, 1] = a22
        out[..., 0, 1] = a12
        out[..., 1, 0] = np.conj(a12)
        return out

    def symbol(self, eta):
        """A(eta) at a single unit direction."""
        eta = _as_unit(eta)
        phi = math.atan2(eta[1], eta[0])
        return self.symbol_angles(np.asarray(phi))

    # -- continuous eigenframes ------------------------------------------

    def sweep(self, n=2048):
        """Continuity-resolved frames at n equispaced angles (cached)."""
        if n not in self._sweeps:
            self._sweeps[n] = FrameSweep(self, n)
        return self._sweeps[n]

    def frame_at(self, eta, n=2048):
        """ElasticEigenFrame at an arbitrary direction.

        Branch labels and signs come from alignment with the cached sweep;
        at (nearly) degenerate directions the frame is the one-sided limit
        along increasing phi.
        """
        eta = _as_unit(eta)
        phi = math.atan2(eta[1], eta[0]) % (2.0 * math.pi)
        sw = self.sweep(n)
        k = int(round(phi / (2.0 * math.pi / n))) % n
        ref = sw.vecs[k]
        A = self.symbol_angles(np.asarray(phi))
        w, v = np.linalg.eigh(A)
        if self.is_real:
            v = v.real.astype(float)
        gap = abs(w[1] - w[0])
        if gap <= 1e-9 * max(w[1], w[0]) and not sw.all_degenerate:
            # isolated degeneracy: frame = limit from below along the sweep
            h = 2.0 * math.pi / (8 * n)
            Ah = self.symbol_angles(np.asarray(phi - h))
            wh, vh = np.linalg.eigh(Ah)
            if self.is_real:
                vh = vh.real.astype(float)
            _, vecs = _align_to(ref, wh, vh)
            kappas = np.einsum("ij,ij->j", vecs.conj(), A @ vecs).real
        else:
            kappas, vecs = _align_to(ref, w, v)
        avals = vecs.conj().T @ eta
        if self.is_real:
            avals = avals.real
        return ElasticEigenFrame(eta, phi, kappas, vecs, avals)

    def __repr__(self):
        ps = ", ".join(f"{k}={v:g}" for k, v in sorted(self.params.items()))
        return f"Medium({self.kind}, {ps}, gamma={self.gamma:g}, kappa={self.kappa:g})"


# -- public operations ---------------------------------------------------

def make_medium(kind, params, gamma, kappa, samples=None):
    """Validated medium descriptor; rejects out-of-range constants."""
    return Medium(kind, params, gamma, kappa, samples=samples)


def isotropic(lam, mu, gamma=1.0, kappa=1.0):
    return Medium("isotropic", {"lambda": lam, "mu": mu}, gamma, kappa)


def cubic(tau, mu, lam, gamma=1.0, kappa=1.0):
    return Medium("cubic", {"tau": tau, "mu": mu, "lambda": lam}, gamma, kappa)


def rhombic(tau1, tau2, mu, lam, gamma=1.0, kappa=1.0):
    return Medium("rhombic", {"tau1": tau1, "tau2": tau2, "mu": mu, "lambda": lam},
                  gamma, kappa)


def custom_sampled(samples, gamma=1.0, kappa=1.0):
    return Medium("custom-sampled", {}, gamma, kappa, samples=samples)


def elastic_symbol(medium, eta):
    """The 2x2 Hermitian matrix A(eta)."""
    return medium.symbol(eta)


def elastic_eigen(medium, eta):
    """Eigen-frame with sweep-continuous branches at the direction eta."""
    return medium.frame_at(eta)


def coupling(medium, eta):
    """Coupling values (a1, a2) = (r1 . eta, r2 . eta) on continuous branches."""
    f = medium.frame_at(eta)
    return f.a1, f.a2


# -- external interfaces ---------------------------------------------------

_CONFIG_KEYS = ("kind", "gamma", "kappa", "samples")


def load_samples_csv(path):
    """Read a custom-sample table: columns phi, a11_re, a12_re, a12_im, a22_re."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"phi", "a11_re", "a12_re", "a12_im", "a22_re"}
        if reader.fieldnames is None or set(reader.fieldnames) != need:
            raise ValidationError(
                f"sample CSV must have columns {sorted(need)}, got {reader.fieldnames}")
        for row in reader:
            rows.append([float(row[k]) for k in ("phi", "a11_re", "a12_re", "a12_im", "a22_re")])
    data = np.asarray(rows)
    n = data.shape[0]
    if n < 4 or (n & (n - 1)) != 0:
        raise ValidationError("sample CSV must have a power-of-two number of rows")
    expected = 2.0 * np.pi * np.arange(n) / n
    if np.max(np.abs(data[:, 0] - expected)) > 1e-9:
        raise ValidationError("sample CSV angles must be equispaced on [0, 2*pi)")
    samples = np.empty((n, 2, 2), dtype=complex)
    samples[:, 0, 0] = data[:, 1]
    samples[:, 0, 1] = data[:, 2] + 1j * data[:, 3]
    samples[:, 1, 0] = data[:, 2] - 1j * data[:, 3]
    samples[:, 1, 1] = data[:, 4]
    return samples


def load_medium_config(path):
    """Parse the key-value medium document and build the medium.

    Recognised keys: kind, params.<name>, gamma, kappa and (for
    custom-sampled media) samples = <csv path, relative to the config>.
    """
    import os

    kv = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in kv:
                raise ValidationError(f"{path}:{lineno}: duplicate key {key!r}")
            kv[key] = value
    params = {}
    plain = {}
    for key, value in kv.items():
        if key.startswith("params."):
            params[key[len("params."):]] = value
        elif key in _CONFIG_KEYS:
            plain[key] = value
        else:
            raise ValidationError(f"unknown config key {key!r}")
    for required in ("kind", "gamma", "kappa"):
        if required not in plain:
            raise ValidationError(f"missing config key {required!r}")
    try:
        params = {k: float(v) for k, v in params.items()}
        gamma = float(plain["gamma"])
        kappa = float(plain["kappa"])
    except ValueError as exc:
        raise ValidationError(f"non-numeric value in config: {exc}") from None
    samples = None
    if plain["kind"] == "custom-sampled":
        if "samples" not in plain:
            raise ValidationError("custom-sampled media need 'samples = <csv>'")
        csv_path = plain["samples"]
        if not os.path.isabs(csv_path):
            csv_path = os.path.join(os.path.dirname(os.path.abspath(path)), csv_path)
        samples = load_samples_csv(csv_path)
    elif "samples" in plain:
        raise ValidationError("'samples' only allowed for custom-sampled media")
    return make_medium(plain["kind"], params, gamma, kappa, samples=samples)
