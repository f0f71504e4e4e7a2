"""FFT Cauchy-problem solver on the periodic torus.

Each frequency mode evolves independently: the energy vector V solves
d/dt V = i B(xi) V, so one batched eigendecomposition of B over the
whole mode lattice gives exact propagation to any time.  The torus is a
proxy for the plane only until wave fronts wrap; measurements detect
boundary mass and truncate.

The per-mode elastic frames here come from a plain sorted eigensolve
(not the sweep continuation): the evolution, the reconstructed physical
fields and the angular filters are all invariant under per-mode branch
relabelling and sign flips, so no continuity is needed.  Branch-resolved
model multipliers are the exception and select their branch by the
smallest coupling value inside the cone.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import classify
from .errors import ValidationError, NumericalError

BOUNDARY_BAND_FRACTION = 0.05    # band width as a fraction of the period
WRAP_MASS_LIMIT = 0.01           # boundary mass fraction that flags wrap-around


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid: n modes per axis (power of two), period L."""
    n: int = 512
    L: float = 200.0
    dealias: bool = False

    def __post_init__(self):
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValidationError("grid size n must be a power of two (>= 8)")
        if self.L <= 0:
            raise ValidationError("period L must be positive")

    def cell(self):
        return self.L / self.n

    def axes(self):
        return (self.L / self.n) * np.arange(self.n)

    def wavenumbers(self):
        """xi components along one axis, FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.L / self.n)


@dataclass
class CauchyData:
    """Initial data: displacement U1, velocity U2 (2-vector fields), theta0."""
    U1: np.ndarray      # (2, n, n)
    U2: np.ndarray
    theta0: np.ndarray  # (n, n)
    preset: str = "custom"

    def __post_init__(self):
        for name in ("U1", "U2", "theta0"):
            arr = getattr(self, name)
            if np.iscomplexobj(arr):
                raise ValidationError(f"initial field {name} must be real-valued")


def gaussian_data(grid, width_cells=4.0, amplitude=1.0):
    """Centered Gaussian of the given width (in cells) in every field."""
    x = grid.axes() - grid.L / 2.0
    X, Y = np.meshgrid(x, x, indexing="ij")
    sigma = width_cells * grid.cell()
    g = amplitude * np.exp(-(X ** 2 + Y ** 2) / (2.0 * sigma ** 2))
    return CauchyData(U1=np.stack([g, g]), U2=np.stack([g, g]),
                      theta0=g.copy(), preset="gaussian")


def separable_bump_data(grid, width_cells=12.0, amplitude=1.0):
    """Product of compactly supported C^inf bumps in x and y."""
    x = grid.axes() - grid.L / 2.0
    w = width_cells * grid.cell()

    def bump(u):
        out = np.zeros_like(u)
        inside = np.abs(u) < w
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - (u[inside] / w) ** 2))
        return out

    g = amplitude * np.outer(bump(x), bump(x))
    return CauchyData(U1=np.stack([g, g]), U2=np.stack([g, g]),
                      theta0=g.copy(), preset="separable-bump")


def data_from_csv(path, grid):
    """Row-major scalar fields, one CSV with columns u1x,u1y,u2x,u2y,theta."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1)
    if raw.shape != (grid.n * grid.n, 5):
        raise ValidationError(
            f"custom data CSV must have n^2 = {grid.n ** 2} rows and 5 columns")
    fields = [raw[:, k].reshape(grid.n, grid.n) for k in range(5)]
    return CauchyData(U1=np.stack(fields[0:2]), U2=np.stack(fields[2:4]),
                      theta0=fields[4], preset="custom")


@dataclass
class DecayMeasurement:
    times: np.ndarray
    norms: np.ndarray
    functional: str
    filter_desc: str
    fitted_exponent: float
    stderr: float
    truncated: bool = False
    mode_energy: np.ndarray = field(default=None, repr=False)


def fit_power_law(times, norms):
    """Least-squares slope of log(norm) vs log(t); returns (exponent, stderr).

    The exponent is the decay rate e in norm ~ t^-e (positive when the
    series decays).
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if len(times) < 3:
        raise ValidationError("need at least three samples for a slope fit")
    if np.any(norms <= 0):
        raise NumericalError("norms must be positive for a log-log fit")
    x = np.log(times)
    y = np.log(norms)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    sxx = np.sum((x - x.mean()) ** 2)
    stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / sxx)
    return float(-slope), stderr


class SpectralPropagator:
    """Cached exact per-mode propagation for one (medium, grid) pair."""

    def __init__(self, medium, grid):
        self.medium = medium
        self.grid = grid
        n = grid.n
        k = grid.wavenumbers()
        self.xi1, self.xi2 = np.meshgrid(k, k, indexing="ij")
        self.r = np.hypot(self.xi1, self.xi2)
        zero = self.r == 0.0
        safe_r = np.where(zero, 1.0, self.r)
        eta = np.stack([self.xi1 / safe_r, self.xi2 / safe_r], axis=-1)
        A = medium.symbol_angles(np.arctan2(eta[..., 1], eta[..., 0]))
        kappas, vecs = np.linalg.eigh(A)
        if medium.is_real:
            vecs = vecs.real
        self.kappas = np.where(zero[..., None], 1.0, kappas)
        self.vecs = np.where(zero[..., None, None], np.eye(2), vecs)
        self.avals = np.einsum("xyij,xyi->xyj", self.vecs.conj(), eta)
        self.avals[zero] = 0.0
        self.omegas = np.sqrt(self.kappas) * self.r[..., None]
        B = np.zeros((n, n, 5, 5), dtype=complex)
        g, kap = medium.gamma, medium.kappa
        a_xi = self.avals * self.r[..., None]
        B[..., 0, 0] = self.omegas[..., 0]
        B[..., 1, 1] = self.omegas[..., 1]
        B[..., 2, 2] = -self.omegas[..., 0]
        B[..., 3, 3] = -self.omegas[..., 1]
        B[..., 4, 4] = 1j * kap * self.r ** 2
        for row, br in ((0, 0), (1, 1), (2, 0), (3, 1)):
            B[..., row, 4] = 1j * g * a_xi[..., br]
            B[..., 4, row] = -0.5j * g * np.conj(a_xi[..., br])
        B[zero] = 0.0
        self.lam, S = np.linalg.eig(B)
        self.S = S
        self.Sinv = np.linalg.inv(S)
        # modes where the eigenbasis is too ill-conditioned fall back to expm
        cond = (np.linalg.norm(S, axis=(-2, -1))
                * np.linalg.norm(self.Sinv, axis=(-2, -1)))
        self._bad = np.argwhere(cond > 1e8)
        self._B_bad = {tuple(idx): B[tuple(idx)] for idx in self._bad}

    # -- initial data ---------------------------------------------------

    def build_V0(self, data):
        """Energy vector on the frequency side from Cauchy data.

        V = ((D_t + sqrt(D)) U0, (D_t - sqrt(D)) U0, theta-hat) with
        U0 = M^T U-hat and D_t U(0) = -i U2; the zero mode keeps the raw
        means (trivial evolution).
        """
        if data.U1.shape != (2, self.grid.n, self.grid.n):
            raise ValidationError("data fields must match the grid")
        hatU1 = np.fft.fft2(data.U1, axes=(1, 2))
        hatU2 = np.fft.fft2(data.U2, axes=(1, 2))
        hatTh = np.fft.fft2(data.theta0)
        if self.grid.dealias:
            cut = self.grid.n // 3
            k = np.abs(np.fft.fftfreq(self.grid.n, d=1.0 / self.grid.n))
            mask = (k[:, None] < cut) & (k[None, :] < cut)
            hatU1 = hatU1 * mask
            hatU2 = hatU2 * mask
            hatTh = hatTh * mask
        # U0_j = sum_i M^T_{ji} hatU_i = r_j . hatU (conjugated for complex frames)
        u10 = np.einsum("xyij,jxy->xyi", self.vecs.conj(), hatU1)
        u20 = np.einsum("xyij,jxy->xyi", self.vecs.conj(), hatU2)
        V = np.empty((self.grid.n, self.grid.n, 5), dtype=complex)
        dt = -1j * u20
        V[..., 0] = dt[..., 0] + self.omegas[..., 0] * u10[..., 0]
        V[..., 1] = dt[..., 1] + self.omegas[..., 1] * u10[..., 1]
        V[..., 2] = dt[..., 0] - self.omegas[..., 0] * u10[..., 0]
        V[..., 3] = dt[..., 1] - self.omegas[..., 1] * u10[..., 1]
        V[..., 4] = hatTh
        return V

    def prepare(self, V0):
        """Factor V0 through the eigenbasis once; reuse across times."""
        return {"W": np.einsum("xyij,xyj->xyi", self.Sinv, V0), "V0": V0}

    def at_time(self, state, t):
        """V(t) on the frequency side."""
        V = np.einsum("xyij,xyj->xyi", self.S,
                      np.exp(1j * t * self.lam) * state["W"])
        for idx in map(tuple, self._bad):
            V[idx] = scipy.linalg.expm(1j * t * self._B_bad[idx]) @ state["V0"][idx]
        return V

    def evolve(self, V0, t):
        return self.at_time(self.prepare(V0), t)

    # -- physical reconstruction -----------------------------------------

    def reconstruct(self, V):
        """Physical fields (D_t U, sqrt(A(D)) U, theta) from V(t)."""
        plus = 0.5 * np.stack([V[..., 0] + V[..., 2], V[..., 1] + V[..., 3]], axis=-1)
        minus = 0.5 * np.stack([V[..., 0] - V[..., 2], V[..., 1] - V[..., 3]], axis=-1)
        dtU_hat = np.einsum("xyij,xyj->xyi", self.vecs, plus)
        sqA_hat = np.einsum("xyij,xyj->xyi", self.vecs, minus)
        dtU = np.fft.ifft2(dtU_hat, axes=(0, 1))
        sqA = np.fft.ifft2(sqA_hat, axes=(0, 1))
        theta = np.fft.ifft2(V[..., 4])
        return dtU, sqA, theta


_PROP_CACHE = {}


def get_propagator(medium, grid):
    key = (id(medium), grid.n, grid.L, grid.dealias)
    entry = _PROP_CACHE.get(key)
    if entry is None or entry[0] is not medium:
        entry = (medium, SpectralPropagator(medium, grid))
        _PROP_CACHE[key] = entry
    return entry[1]


def build_V0(medium, data, grid):
    return get_propagator(medium, grid).build_V0(data)


def evolve(medium, V0, t, grid):
    return get_propagator(medium, grid).evolve(V0, t)


# -- micro-local filters ---------------------------------------------------

def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)


def _smoothstep_cinf(u):
    u = np.clip(u, 0.0, 1.0)
    out = np.zeros_like(u)
    inner = (u > 0) & (u < 1)
    fu = np.exp(-1.0 / np.where(inner, u, 1.0))
    fv = np.exp(-1.0 / np.where(inner, 1.0 - u, 1.0))
    out[inner] = fu[inner] / (fu[inner] + fv[inner])
    out[u >= 1] = 1.0
    return out


def _chi(s, eps, smooth=False):
    """Cutoff: 0 below eps, 1 above 2*eps, C^2 smoothstep between
    (C^inf bump behind the switch)."""
    step = _smoothstep_cinf if smooth else _smoothstep
    return step((s - eps) / eps)


def microlocal_filter(medium, grid, which, eps=0.15, c=1.0, census=None,
                      smooth=False):
    """Scalar frequency multiplier for one filter.

    which: 'par' (away from hyperbolic directions), 'hyp' (their conical
    neighbourhoods, = 1 - par), 'low'/'high' (radial split at c).  The
    zero mode belongs to the parabolic/low side.  For media whose every
    direction is hyperbolic (decoupled) par is identically zero.
    """
    if which not in ("par", "hyp", "low", "high"):
        raise ValidationError(f"unknown filter {which!r}")
    prop = get_propagator(medium, grid)
    if which in ("low", "high"):
        high = _chi(prop.r, c, smooth=smooth)
        return 1.0 - high if which == "low" else high
    if census is None:
        census = classify.find_special_directions(medium)
    if census.all_degenerate or census.decoupled:
        par = np.zeros_like(prop.r)
    else:
        special = census.hyperbolic_like()
        phis = np.array([d.phi for d in special])
        if len(phis) == 0:
            par = np.ones_like(prop.r)
        else:
            gaps = np.diff(np.sort(phis))
            gaps = np.append(gaps, 2.0 * np.pi - (np.sort(phis)[-1] - np.sort(phis)[0]))
            min_gap = float(np.min(gaps)) if len(phis) > 1 else 2.0 * np.pi
            if 2.0 * eps >= 0.5 * min_gap:
                pair = np.argmin(gaps)
                raise ValidationError(
                    f"eps = {eps} too large: closest special directions are "
                    f"{min_gap:.4f} rad apart")
            angle = np.arctan2(prop.xi2, prop.xi1)
            par = np.ones_like(prop.r)
            for phi_bar in phis:
                dphi = angle - phi_bar
                chord = 2.0 * np.abs(np.sin(0.5 * dphi))
                par = par * _chi(chord, eps, smooth=smooth)
        par[prop.r == 0.0] = 1.0
    return par if which == "par" else 1.0 - par


def _boundary_mass_fraction(fields_sq, grid):
    """Fraction of |field|^2 mass within the boundary band."""
    band = max(2, int(round(BOUNDARY_BAND_FRACTION * grid.n)))
    total = float(np.sum(fields_sq))
    if total == 0.0:
        return 0.0
    inner = fields_sq[band:-band, band:-band]
    return 1.0 - float(np.sum(inner)) / total


def _field_norm(V, grid, functional, prop):
    if functional == "sup":
        fields = np.fft.ifft2(V, axes=(0, 1))
        mag2 = np.sum(np.abs(fields) ** 2, axis=-1)
        return math.sqrt(float(mag2.max())), mag2
    if functional == "l2":
        fields = np.fft.ifft2(V, axes=(0, 1))
        mag2 = np.sum(np.abs(fields) ** 2, axis=-1)
        return math.sqrt(float(mag2.sum())) * grid.cell(), mag2
    if functional == "energy":
        dtU, sqA, theta = prop.reconstruct(V)
        mag2 = (np.sum(np.abs(dtU) ** 2, axis=-1)
                + np.sum(np.abs(sqA) ** 2, axis=-1) + np.abs(theta) ** 2)
        val = (math.sqrt(float(np.sum(np.abs(dtU) ** 2, axis=-1).max()))
               + math.sqrt(float(np.sum(np.abs(sqA) ** 2, axis=-1).max()))
               + float(np.abs(theta).max()))
        return val, mag2
    raise ValidationError(f"unknown functional {functional!r}")


def measure_decay(medium, data, grid, filters=(), functional="sup", times=None,
                  eps=0.15, c=1.0, census=None, smooth=False):
    """Evolve filtered data and fit the decay exponent of the chosen norm.

    filters is a sequence drawn from par/hyp/low/high; their multipliers
    compose.  Truncates (and flags) the measurement when the boundary
    band holds more than 1% of the field mass, i.e. wave fronts are about
    to wrap around the torus.
    """
    if times is None:
        times = np.geomspace(5.0, 50.0, 12)
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0) or np.any(np.diff(times) <= 0):
        raise ValidationError("times must be positive and increasing")
    prop = get_propagator(medium, grid)
    V0 = prop.build_V0(data)
    mult = np.ones_like(prop.r)
    for which in filters:
        mult = mult * microlocal_filter(medium, grid, which, eps=eps, c=c,
                                        census=census, smooth=smooth)
    V0f = V0 * mult[..., None]
    if float(np.max(np.abs(V0f))) == 0.0:
        raise ValidationError(
            "filtered initial data is identically zero (filter removed "
            "the whole field)")
    state = prop.prepare(V0f)
    norms = []
    kept = []
    energies = []
    truncated = False
    for t in times:
        V = prop.at_time(state, t)
        energies.append(float(np.sum(np.abs(V) ** 2)))
        val, mag2 = _field_norm(V, grid, functional, prop)
        if _boundary_mass_fraction(mag2, grid) > WRAP_MASS_LIMIT:
            truncated = True
            break
        norms.append(val)
        kept.append(t)
    if len(kept) < 3:
        raise NumericalError("wrap-around left fewer than three reliable times")
    exponent, stderr = fit_power_law(kept, norms)
    return DecayMeasurement(
        times=np.asarray(kept), norms=np.asarray(norms), functional=functional,
        filter_desc="+".join(filters) if filters else "none",
        fitted_exponent=exponent, stderr=stderr, truncated=truncated,
        mode_energy=np.asarray(energies[:len(kept)]))


def model_multiplier_decay(medium, eta_bar, j0, data, grid, times=None,
                           eps=0.2, census=None):
    """Sup-norm decay of the scalar branch multiplier e^{i t nu_j0(D)}.

    The scalar data (theta0) is localised to the cone of half-angle
    2*eps around eta_bar; the eigenvalue branch is continued over the
    cone by picking, per mode, the root nearest +omega of the elastic
    branch with the smallest coupling value.
    """
    if times is None:
        times = np.geomspace(5.0, 50.0, 12)
    times = np.asarray(times, dtype=float)
    prop = get_propagator(medium, grid)
    phi_bar = math.atan2(eta_bar[1], eta_bar[0])
    angle = np.arctan2(prop.xi2, prop.xi1)
    chord = 2.0 * np.abs(np.sin(0.5 * (angle - phi_bar)))
    window = 1.0 - _chi(chord, eps)
    window[prop.r == 0.0] = 0.0
    fhat = np.fft.fft2(data.theta0) * window
    cone = window > 0.0
    # branch selection inside the cone: smallest |a| marks the sheet
    branch = np.argmin(np.abs(prop.avals), axis=-1)
    target = np.take_along_axis(prop.omegas, branch[..., None], axis=-1)[..., 0]
    idx = np.argwhere(cone)
    nu = np.zeros_like(prop.r, dtype=complex)
    Bsub = _assemble_batch(medium, prop, idx)
    roots = np.linalg.eigvals(Bsub)
    tsub = target[cone]
    dist = np.abs(roots - tsub[:, None])
    order = np.argsort(dist, axis=1)
    nearest = dist[np.arange(len(idx)), order[:, 0]]
    second = dist[np.arange(len(idx)), order[:, 1]]
    ambiguous = nearest > 0.5 * second
    if np.any(ambiguous):
        k = int(np.argmax(ambiguous))
        raise NumericalError(
            "branch continuation failed across the cone at xi = "
            f"({prop.xi1[tuple(idx[k])]:.4f}, {prop.xi2[tuple(idx[k])]:.4f})")
    nu[cone] = roots[np.arange(len(idx)), order[:, 0]]
    norms = []
    for t in times:
        field = np.fft.ifft2(np.exp(1j * t * nu) * fhat)
        norms.append(float(np.abs(field).max()))
    exponent, stderr = fit_power_law(times, norms)
    return DecayMeasurement(
        times=times, norms=np.asarray(norms), functional="sup",
        filter_desc=f"branch:{phi_bar:.6g}", fitted_exponent=exponent,
        stderr=stderr)


def _assemble_batch(medium, prop, idx):
    """B(xi) for a list of mode indices, from the propagator's frame field."""
    m = len(idx)
    B = np.zeros((m, 5, 5), dtype=complex)
    sel = tuple(idx.T)
    om = prop.omegas[sel]
    a_xi = prop.avals[sel] * prop.r[sel][:, None]
    g, kap = medium.gamma, medium.kappa
    B[:, 0, 0] = om[:, 0]
    B[:, 1, 1] = om[:, 1]
    B[:, 2, 2] = -om[:, 0]
    B[:, 3, 3] = -om[:, 1]
    B[:, 4, 4] = 1j * kap * prop.r[sel] ** 2
    for row, br in ((0, 0), (1, 1), (2, 0), (3, 1)):
        B[:, row, 4] = 1j * g * a_xi[:, br]
        B[:, 4, row] = -0.5j * g * np.conj(a_xi[:, br])
    return B
