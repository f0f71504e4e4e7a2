"""Trigonometric interpolation of 2*pi-periodic samples.

Functions on the unit circle (eigenvalue branches, coupling values,
curvature factors) are sampled on equispaced angle grids.  This module
wraps the FFT coefficient representation and provides derivatives of
arbitrary order, evaluated either back on the grid or at single angles.
"""

import numpy as np


class PeriodicSamples:
    """A band-limited interpolant of values on an equispaced angle grid.

    Parameters
    ----------
    values : array_like, shape (n,)
        Samples at angles 2*pi*k/n, k = 0..n-1.  n must be even.
    """

    def __init__(self, values):
        values = np.asarray(values)
        n = values.shape[0]
        if n % 2 != 0:
            raise ValueError("sample count must be even")
        self.n = n
        self.is_real = np.isrealobj(values)
        self._coef = np.fft.fft(values) / n
        # integer mode numbers in FFT order, -n/2 .. n/2-1
        self._modes = np.fft.fftfreq(n, d=1.0 / n)

    def _deriv_coef(self, order):
        if order == 0:
            return self._coef
        factor = (1j * self._modes) ** order
        if order % 2 == 1:
            # the unpaired Nyquist mode has no consistent odd derivative
            factor[self.n // 2] = 0.0
        return self._coef * factor

    def grid_values(self, order=0):
        """Derivative of the given order back on the sample grid."""
        out = np.fft.ifft(self._deriv_coef(order)) * self.n
        return out.real if self.is_real else out

    def eval(self, phi, order=0):
        """Evaluate the derivative of the given order at angle(s) phi."""
        phi = np.asarray(phi, dtype=float)
        coef = self._deriv_coef(order)
        # direct Fourier sum; n is at most a few thousand here
        out = np.tensordot(np.exp(1j * np.multiply.outer(phi, self._modes)),
                           coef, axes=(-1, 0))
        return out.real if self.is_real else out

    def max_abs(self, order=0):
        """Maximum modulus of the derivative over the sample grid."""
        return float(np.max(np.abs(self.grid_values(order))))
