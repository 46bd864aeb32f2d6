"""Pseudospectral discretizations of the flat torus and the round sphere.

Both backends work with *real orthonormal* coefficient vectors with respect
to the normalized measure (total volume 1), so the Euclidean norm of a
coefficient vector is the L2 norm of the field it represents.

Pointwise data live on a dealiasing quadrature grid.  Covectors and vectors
are stored through their ambient components: coordinate components
``(dtheta_1, dtheta_2)`` on the torus and Cartesian components in R^3 on the
sphere (covectors identified with tangent vectors by the round metric).
Two-forms and bivectors are densities relative to ``dtheta_1 ^ dtheta_2``
on the torus and the round area form on the sphere.

All array methods accept leading batch dimensions.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

TORUS = "torus2"
SPHERE = "sphere2"


class Backend:
    """Common interface; see :class:`TorusBackend` and :class:`SphereBackend`."""

    kind: str
    N: int
    padding: int
    ambient_dim: int
    n0: int  # scalar / 2-form coefficients
    n1: int  # 1-form coefficients
    lam0: np.ndarray
    lam1: np.ndarray
    deg0: np.ndarray
    deg1: np.ndarray
    weights: np.ndarray
    one_form_labels: tuple[str, str]

    def __repr__(self):
        return f"{type(self).__name__}(N={self.N}, padding={self.padding})"

    @property
    def n_grid(self) -> int:
        return self.weights.shape[0]

    # pointwise helpers shared by both backends
    def rot(self, v: np.ndarray) -> np.ndarray:
        """Quarter turn ``J`` in the tangent plane (``n x v``)."""
        raise NotImplementedError

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Density of ``a ^ b`` for pointwise covectors ``a``, ``b``."""
        return np.sum(self.rot(a) * b, axis=-1)

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.sum(a * b, axis=-1)

    def mean_free_mask(self) -> np.ndarray:
        return self.lam0 > 0


# --------------------------------------------------------------------------
# Torus


class TorusBackend(Backend):
    """Fourier modes ``|m|, |n| <= N`` on ``[0, 2pi)^2``.

    Scalar coefficient layout: ``[c0, a_1..a_K, b_1..b_K]`` where for each
    half-plane mode ``k = (m, n)`` the field contains
    ``a_k sqrt2 cos(m t1 + n t2) + b_k sqrt2 sin(m t1 + n t2)``.
    """

    kind = TORUS
    ambient_dim = 2
    one_form_labels = ("dtheta1", "dtheta2")

    def __init__(self, N: int, padding: int = 2):
        if N < 1:
            raise ValueError("truncation N must be a positive integer")
        self.N = int(N)
        self.padding = int(padding)
        self.M = self.padding * (2 * self.N + 1)
        modes = [(m, n) for n in range(1, N + 1) for m in range(-N, N + 1)]
        modes += [(m, 0) for m in range(1, N + 1)]
        self.modes = np.array(modes, dtype=int).reshape(-1, 2)
        K = len(self.modes)
        self.K = K
        self.n0 = 1 + 2 * K
        self.n1 = 2 * self.n0
        mm = np.concatenate([[0], self.modes[:, 0], self.modes[:, 0]])
        nn = np.concatenate([[0], self.modes[:, 1], self.modes[:, 1]])
        self.m_of = mm
        self.n_of = nn
        self.lam0 = (mm**2 + nn**2).astype(float)
        self.deg0 = np.maximum(np.abs(mm), np.abs(nn)).astype(float)
        self.lam1 = np.concatenate([self.lam0, self.lam0])
        self.deg1 = np.concatenate([self.deg0, self.deg0])
        t = 2 * np.pi * np.arange(self.M) / self.M
        self.theta1, self.theta2 = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
        self.points = np.stack([self.theta1, self.theta2], axis=-1)
        self.weights = np.full(self.M * self.M, 1.0 / (self.M * self.M))
        self._mi = self.modes[:, 0] % self.M
        self._ni = self.modes[:, 1] % self.M

    # -- scalar transforms
    def synth0(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        batch = c.shape[:-1]
        K = self.K
        C = np.zeros(batch + (self.M, self.M), dtype=complex)
        ck = (c[..., 1 : 1 + K] - 1j * c[..., 1 + K :]) / np.sqrt(2.0)
        C[..., self._mi, self._ni] = ck
        C[..., (-self.modes[:, 0]) % self.M, (-self.modes[:, 1]) % self.M] = np.conj(ck)
        C[..., 0, 0] = c[..., 0]
        vals = np.fft.ifft2(C, axes=(-2, -1)).real * (self.M * self.M)
        return vals.reshape(batch + (self.M * self.M,))

    def analyze0(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        batch = v.shape[:-1]
        F = np.fft.fft2(v.reshape(batch + (self.M, self.M)), axes=(-2, -1)) / (self.M * self.M)
        ck = F[..., self._mi, self._ni]
        out = np.empty(batch + (self.n0,))
        out[..., 0] = F[..., 0, 0].real
        out[..., 1 : 1 + self.K] = np.sqrt(2.0) * ck.real
        out[..., 1 + self.K :] = -np.sqrt(2.0) * ck.imag
        return out

    def partial(self, c: np.ndarray, axis: int) -> np.ndarray:
        """Exact coordinate derivative in coefficient space."""
        k = self.modes[:, axis].astype(float)
        K = self.K
        out = np.zeros_like(c, dtype=float)
        a = c[..., 1 : 1 + K]
        b = c[..., 1 + K :]
        out[..., 1 : 1 + K] = k * b
        out[..., 1 + K :] = -k * a
        return out

    # -- 1-forms: f dtheta1 + g dtheta2, coefficients [f, g]
    def synth1(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return np.stack([self.synth0(c[..., : self.n0]), self.synth0(c[..., self.n0 :])], axis=-1)

    def analyze1(self, v: np.ndarray) -> np.ndarray:
        return np.concatenate([self.analyze0(v[..., 0]), self.analyze0(v[..., 1])], axis=-1)

    def d0(self, c: np.ndarray) -> np.ndarray:
        return np.concatenate([self.partial(c, 0), self.partial(c, 1)], axis=-1)

    def d1(self, c: np.ndarray) -> np.ndarray:
        f, g = c[..., : self.n0], c[..., self.n0 :]
        return self.partial(g, 0) - self.partial(f, 1)

    def rot(self, v: np.ndarray) -> np.ndarray:
        return np.stack([-v[..., 1], v[..., 0]], axis=-1)

    def coordinate_covector(self, i: int) -> np.ndarray:
        """Pointwise components of ``dtheta_i`` on the grid."""
        v = np.zeros((self.n_grid, 2))
        v[:, i] = 1.0
        return v

    def eval0(self, c: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Evaluate a scalar at arbitrary ``(theta1, theta2)`` points."""
        points = np.asarray(points, dtype=float)
        ph = points[..., None, 0] * self.modes[:, 0] + points[..., None, 1] * self.modes[:, 1]
        K = self.K
        s2 = np.sqrt(2.0)
        return (
            c[..., 0:1]
            + s2 * (np.cos(ph) * c[..., 1 : 1 + K]).sum(-1, keepdims=True)
            + s2 * (np.sin(ph) * c[..., 1 + K :]).sum(-1, keepdims=True)
        )[..., 0]

    def scalar_from_function(self, fn) -> np.ndarray:
        """Project ``fn(theta1, theta2)`` onto the truncated basis."""
        return self.analyze0(np.asarray(fn(self.theta1, self.theta2), dtype=float) * np.ones(self.n_grid))


# --------------------------------------------------------------------------
# Sphere


def normalized_legendre(lmax: int, x: np.ndarray):
    """Normalized associated Legendre functions and their theta-derivatives.

    Returns arrays ``Q[l, m, :]`` and ``dQ[l, m, :]`` (``m <= l``) with
    ``Q_lm = sqrt((2l+1)(l-m)!/(l+m)!) P_l^m(cos theta)`` (no Condon-Shortley
    phase) and ``dQ = dQ/dtheta``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(1.0 - x * x)
    Q = np.zeros((lmax + 2, lmax + 2, x.size))
    Q[0, 0] = 1.0
    for m in range(1, lmax + 1):
        Q[m, m] = np.sqrt((2 * m + 1) / (2 * m)) * s * Q[m - 1, m - 1]
    for m in range(0, lmax + 1):
        if m + 1 <= lmax:
            Q[m + 1, m] = np.sqrt(2 * m + 3) * x * Q[m, m]
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = np.sqrt(((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            Q[l, m] = a * (x * Q[l - 1, m] - b * Q[l - 2, m])
    dQ = np.zeros_like(Q)
    for l in range(0, lmax + 1):
        for m in range(0, l + 1):
            lower = 0.0
            if l > m:
                lower = np.sqrt((2 * l + 1) * (l - m) * (l + m) / (2 * l - 1)) * Q[l - 1, m]
            dQ[l, m] = (l * x * Q[l, m] - lower) / s
    return Q[: lmax + 1, : lmax + 1], dQ[: lmax + 1, : lmax + 1]


class SphereBackend(Backend):
    """Real spherical harmonics ``l <= N`` on the unit sphere.

    Scalar coefficients are ordered ``(l, m)`` with ``l = 0..N`` and
    ``m = -l..l`` (negative ``m`` are the sine harmonics).  A 1-form is
    ``sum a_lm dY_lm / sqrt(l(l+1)) + b_lm *dY_lm / sqrt(l(l+1))``; its
    coefficient vector is ``[a, b]`` over ``l >= 1``.  The Hodge potentials
    are ``F = a / sqrt(lam)`` and ``G = b / sqrt(lam)``.
    """

    kind = SPHERE
    ambient_dim = 3
    one_form_labels = ("exact", "coexact")

    def __init__(self, N: int, padding: int = 2):
        if N < 1:
            raise ValueError("truncation N must be a positive integer")
        self.N = int(N)
        self.padding = int(padding)
        self.nlat = self.padding * (self.N + 1) + 2
        self.nlon = 2 * self.nlat
        x, wx = np.polynomial.legendre.leggauss(self.nlat)
        phi = 2 * np.pi * np.arange(self.nlon) / self.nlon
        X, P = np.meshgrid(x, phi, indexing="ij")
        self.cos_theta = X.ravel()
        self.phi = P.ravel()
        self.weights = (np.repeat(wx, self.nlon) / 2.0) / self.nlon
        st = np.sqrt(1.0 - self.cos_theta**2)
        self.sin_theta = st
        self.normal = np.stack([st * np.cos(self.phi), st * np.sin(self.phi), self.cos_theta], axis=-1)
        self.points = self.normal
        e_theta = np.stack(
            [self.cos_theta * np.cos(self.phi), self.cos_theta * np.sin(self.phi), -st], axis=-1
        )
        e_phi = np.stack([-np.sin(self.phi), np.cos(self.phi), np.zeros_like(st)], axis=-1)

        lm = [(l, m) for l in range(self.N + 1) for m in range(-l, l + 1)]
        self.lm = np.array(lm, dtype=int)
        self.n0 = len(lm)
        ell = self.lm[:, 0].astype(float)
        self.lam0 = ell * (ell + 1)
        self.deg0 = ell.copy()
        self.n1 = 2 * (self.n0 - 1)
        self.lam1 = np.concatenate([self.lam0[1:], self.lam0[1:]])
        self.deg1 = np.concatenate([self.deg0[1:], self.deg0[1:]])

        Q, dQ = normalized_legendre(self.N, self.cos_theta)
        G = self.n_grid
        Y = np.empty((G, self.n0))
        dth = np.empty((G, self.n0))
        dph = np.empty((G, self.n0))  # (1/sin theta) dY/dphi
        s2 = np.sqrt(2.0)
        for idx, (l, m) in enumerate(lm):
            am = abs(m)
            if m == 0:
                Y[:, idx] = Q[l, 0]
                dth[:, idx] = dQ[l, 0]
                dph[:, idx] = 0.0
            elif m > 0:
                Y[:, idx] = s2 * Q[l, am] * np.cos(am * self.phi)
                dth[:, idx] = s2 * dQ[l, am] * np.cos(am * self.phi)
                dph[:, idx] = -s2 * am * Q[l, am] * np.sin(am * self.phi) / st
            else:
                Y[:, idx] = s2 * Q[l, am] * np.sin(am * self.phi)
                dth[:, idx] = s2 * dQ[l, am] * np.sin(am * self.phi)
                dph[:, idx] = s2 * am * Q[l, am] * np.cos(am * self.phi) / st
        self.Y = Y
        grad = e_theta[:, :, None] * dth[:, None, :] + e_phi[:, :, None] * dph[:, None, :]
        self.gradY = grad  # (G, 3, n0)
        scale = 1.0 / np.sqrt(self.lam0[1:])
        E = grad[:, :, 1:] * scale
        C = np.cross(self.normal[:, :, None], E, axis=1)
        self.W = np.concatenate([E, C], axis=2)  # (G, 3, n1)
        self._W2 = self.W.reshape(G * 3, self.n1)
        self._wY = Y * self.weights[:, None]
        self._wW2 = (self.W * self.weights[:, None, None]).reshape(G * 3, self.n1)
        self._sqrt_lam = np.sqrt(self.lam0[1:])

    def synth0(self, c):
        return np.asarray(c, dtype=float) @ self.Y.T

    def analyze0(self, v):
        return np.asarray(v, dtype=float) @ self._wY

    def synth1(self, c):
        c = np.asarray(c, dtype=float)
        return (c @ self._W2.T).reshape(c.shape[:-1] + (self.n_grid, 3))

    def analyze1(self, v):
        v = np.asarray(v, dtype=float)
        return v.reshape(v.shape[:-2] + (self.n_grid * 3,)) @ self._wW2

    def d0(self, c):
        c = np.asarray(c, dtype=float)
        a = c[..., 1:] * self._sqrt_lam
        return np.concatenate([a, np.zeros_like(a)], axis=-1)

    def d1(self, c):
        c = np.asarray(c, dtype=float)
        n = self.n0 - 1
        b = c[..., n:]
        out = np.zeros(c.shape[:-1] + (self.n0,))
        out[..., 1:] = -self._sqrt_lam * b
        return out

    def rot(self, v):
        return np.cross(self.normal, v)

    def hodge_potentials(self, c):
        """Split 1-form coefficients into the scalar potentials ``(F, G)``."""
        c = np.asarray(c, dtype=float)
        n = self.n0 - 1
        zero = np.zeros(c.shape[:-1] + (1,))
        F = np.concatenate([zero, c[..., :n] / self._sqrt_lam], axis=-1)
        G = np.concatenate([zero, c[..., n:] / self._sqrt_lam], axis=-1)
        return F, G

    def from_potentials(self, F, G):
        F = np.asarray(F, dtype=float)
        G = np.asarray(G, dtype=float)
        return np.concatenate([F[..., 1:] * self._sqrt_lam, G[..., 1:] * self._sqrt_lam], axis=-1)

    def coordinate_functions(self) -> np.ndarray:
        """Coefficients of ``x_1, x_2, x_3`` (rows)."""
        return self.analyze0(self.normal.T)

    def scalar_from_function(self, fn) -> np.ndarray:
        x = self.normal
        return self.analyze0(np.asarray(fn(x[:, 0], x[:, 1], x[:, 2]), dtype=float) * np.ones(self.n_grid))


def make_backend(kind: str, N: int, padding: int = 2) -> Backend:
    """Cached backend factory; equal arguments give the identical object."""
    kind = kind.lower()
    if kind in (TORUS, "torus", "t2"):
        kind = TORUS
    elif kind in (SPHERE, "sphere", "s2"):
        kind = SPHERE
    else:
        raise ValueError(f"unknown backend kind {kind!r}")
    return _cached_backend(kind, int(N), int(padding))


@lru_cache(maxsize=None)
def _cached_backend(kind: str, N: int, padding: int) -> Backend:
    return TorusBackend(N, padding) if kind == TORUS else SphereBackend(N, padding)
