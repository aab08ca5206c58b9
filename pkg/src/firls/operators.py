"""Linear maps composed by the solvers.

Measurement operators (dense, seeded gaussian projection, partial
Fourier, index selection), the orthogonal sparsifying transform, the two
first-order finite difference operators, and group-configuration
queries.  Operators are immutable after construction and allocate their
outputs, so they are safe to share across concurrent solves.
"""

import numpy as np

from . import wavelets
from .exceptions import ConfigError


def _as_vector(x, n, name="x"):
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] != n:
        raise ConfigError(f"{name} must be a vector of length {n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# Measurement operators
# ---------------------------------------------------------------------------

class MeasurementOperator:
    """Abstract linear map A: R^N -> R^M (or C^M) with an adjoint.

    Subclasses provide ``forward``, ``adjoint`` and ``mean_gram_diagonal``;
    ``gram`` composes the first two and is always real-symmetric PSD on
    real vectors.
    """

    domain_dim: int
    range_dim: int

    def forward(self, x):
        raise NotImplementedError

    def adjoint(self, y):
        raise NotImplementedError

    def mean_gram_diagonal(self):
        """Mean of the diagonal of A^T A."""
        raise NotImplementedError

    def gram(self, x):
        return self.adjoint(self.forward(x))


class DenseOperator(MeasurementOperator):
    """Explicit M x N real matrix."""

    def __init__(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = matrix
        self.range_dim, self.domain_dim = matrix.shape

    def forward(self, x):
        return self.matrix @ _as_vector(x, self.domain_dim)

    def adjoint(self, y):
        return self.matrix.T @ _as_vector(y, self.range_dim, "y")

    def mean_gram_diagonal(self):
        return float(np.mean(np.sum(self.matrix**2, axis=0)))


class GaussianOperator(DenseOperator):
    """Seeded gaussian random projection with entries N(0, 1/M)."""

    def __init__(self, range_dim, domain_dim, seed=0):
        if range_dim > domain_dim:
            raise ConfigError("gaussian projection requires M <= N")
        rng = np.random.default_rng(seed)
        matrix = rng.standard_normal((range_dim, domain_dim)) / np.sqrt(range_dim)
        super().__init__(matrix)
        self.seed = seed


class IndexSelectionOperator(MeasurementOperator):
    """Selects a subset of entries: A = R with rows of the identity."""

    def __init__(self, domain_dim, indices):
        indices = np.asarray(indices, dtype=np.intp)
        _validate_indices(indices, domain_dim)
        self.domain_dim = int(domain_dim)
        self.range_dim = indices.shape[0]
        self.indices = indices

    def forward(self, x):
        return _as_vector(x, self.domain_dim)[self.indices]

    def adjoint(self, y):
        out = np.zeros(self.domain_dim)
        out[self.indices] = _as_vector(y, self.range_dim, "y")
        return out

    def mean_gram_diagonal(self):
        return self.range_dim / self.domain_dim


class PartialFourierOperator(MeasurementOperator):
    """Undersampled unitary Fourier transform A = R F.

    ``shape`` is either ``(N,)`` for 1D signals or ``(n, n)`` for images;
    indices address the flattened transform.  Measurements are complex;
    the adjoint returns the real component of F^H R^T y so solver
    iterates stay real and the Gram operator is symmetric PSD.
    """

    def __init__(self, shape, indices):
        shape = tuple(int(s) for s in shape)
        if len(shape) not in (1, 2):
            raise ConfigError("partial Fourier shape must be 1D or 2D")
        n_total = int(np.prod(shape))
        indices = np.asarray(indices, dtype=np.intp)
        _validate_indices(indices, n_total)
        if indices.shape[0] > n_total:
            raise ConfigError("partial Fourier requires M <= N")
        self.shape = shape
        self.domain_dim = n_total
        self.range_dim = indices.shape[0]
        self.indices = indices

    def forward(self, x):
        x = _as_vector(x, self.domain_dim).reshape(self.shape)
        spectrum = np.fft.fftn(x, norm="ortho")
        return spectrum.ravel()[self.indices]

    def adjoint(self, y):
        y = np.asarray(y)
        if y.shape != (self.range_dim,):
            raise ConfigError(f"y must have length {self.range_dim}")
        spectrum = np.zeros(self.domain_dim, dtype=complex)
        spectrum[self.indices] = y
        img = np.fft.ifftn(spectrum.reshape(self.shape), norm="ortho")
        return np.real(img).ravel()

    def mean_gram_diagonal(self):
        # Unitary normalization makes diag(A^T A) constant M/N.
        return self.range_dim / self.domain_dim


class PerChannelOperator(MeasurementOperator):
    """Applies one base operator independently to C stacked channels."""

    def __init__(self, base, channels):
        if channels < 1:
            raise ConfigError("channels must be >= 1")
        self.base = base
        self.channels = int(channels)
        self.domain_dim = base.domain_dim * self.channels
        self.range_dim = base.range_dim * self.channels

    def forward(self, x):
        x = _as_vector(x, self.domain_dim).reshape(self.channels, -1)
        return np.concatenate([self.base.forward(xc) for xc in x])

    def adjoint(self, y):
        y = _as_vector(
            np.asarray(y), self.range_dim, "y"
        ).reshape(self.channels, -1)
        return np.concatenate([self.base.adjoint(yc) for yc in y])

    def mean_gram_diagonal(self):
        return self.base.mean_gram_diagonal()


def _validate_indices(indices, n_total):
    if indices.ndim != 1 or indices.shape[0] == 0:
        raise ConfigError("indices must be a non-empty 1D array")
    if indices.min() < 0 or indices.max() >= n_total:
        raise ConfigError(f"indices must lie in [0, {n_total})")
    if np.unique(indices).shape[0] != indices.shape[0]:
        raise ConfigError("sampled indices must be distinct")


# ---------------------------------------------------------------------------
# Orthogonal sparsifying transform
# ---------------------------------------------------------------------------

class OrthogonalTransform:
    """Identity or orthonormal wavelet transform over flat vectors.

    ``shape`` is ``(N,)`` or ``(n, n)``.  Wavelet sides must be powers of
    two; ``levels=None`` picks the deepest decomposition the filter
    allows.  ``inverse`` is the exact adjoint.
    """

    def __init__(self, kind="identity", shape=None, levels=None):
        if kind not in ("identity", "haar", "db4"):
            raise ConfigError(f"unknown transform kind {kind!r}")
        self.kind = kind
        if kind == "identity":
            self.shape = tuple(shape) if shape is not None else None
            self.levels = 0
            self._h = self._g = None
        else:
            if shape is None:
                raise ConfigError("wavelet transform requires a shape")
            self.shape = tuple(int(s) for s in shape)
            if len(self.shape) not in (1, 2):
                raise ConfigError("transform shape must be 1D or square 2D")
            if len(self.shape) == 2 and self.shape[0] != self.shape[1]:
                raise ConfigError("2D wavelet transform requires square shape")
            self._h = wavelets.FILTERS[kind]
            self._g = wavelets.highpass_filter(self._h)
            cap = wavelets.max_levels(self.shape[-1], self._h.shape[0])
            self.levels = cap if levels is None else int(levels)
            if not 1 <= self.levels <= cap:
                raise ConfigError(
                    f"levels must be in [1, {cap}] for shape {self.shape}"
                )
        self.domain_dim = int(np.prod(self.shape)) if self.shape else None

    def _check(self, x):
        if self.domain_dim is None:
            return np.asarray(x, dtype=float)
        return np.asarray(
            _as_vector(x, self.domain_dim), dtype=float
        )

    def forward(self, x):
        x = self._check(x)
        if self.kind == "identity":
            return x.copy()
        if len(self.shape) == 1:
            return wavelets.forward_1d(x, self._h, self._g, self.levels)
        out = wavelets.forward_2d(
            x.reshape(self.shape), self._h, self._g, self.levels
        )
        return out.ravel()

    def inverse(self, c):
        c = self._check(c)
        if self.kind == "identity":
            return c.copy()
        if len(self.shape) == 1:
            return wavelets.inverse_1d(c, self._h, self._g, self.levels)
        out = wavelets.inverse_2d(
            c.reshape(self.shape), self._h, self._g, self.levels
        )
        return out.ravel()

    def forward_batch(self, rows):
        """Transform each row of a (k, N) array at once."""
        rows = np.asarray(rows, dtype=float)
        if self.kind == "identity":
            return rows.copy()
        if len(self.shape) == 1:
            return wavelets.forward_1d(rows, self._h, self._g, self.levels)
        out = wavelets.forward_2d(
            rows.reshape((-1,) + self.shape), self._h, self._g, self.levels
        )
        return out.reshape(rows.shape)

    def inverse_batch(self, rows):
        """Inverse-transform each row of a (k, N) array at once."""
        rows = np.asarray(rows, dtype=float)
        if self.kind == "identity":
            return rows.copy()
        if len(self.shape) == 1:
            return wavelets.inverse_1d(rows, self._h, self._g, self.levels)
        out = wavelets.inverse_2d(
            rows.reshape((-1,) + self.shape), self._h, self._g, self.levels
        )
        return out.reshape(rows.shape)

    def dense_matrix(self):
        """Materialize the transform matrix (rows = coefficients)."""
        if self.domain_dim is None:
            raise ConfigError("identity transform with no shape has no matrix")
        n = self.domain_dim
        if self.kind == "identity":
            return np.eye(n)
        eye = np.eye(n)
        if len(self.shape) == 1:
            cols = wavelets.forward_1d(eye, self._h, self._g, self.levels)
        else:
            batch = eye.reshape((n,) + self.shape)
            cols = wavelets.forward_2d(
                batch, self._h, self._g, self.levels
            ).reshape(n, n)
        # Row j of `cols` is forward(e_j), i.e. column j of the matrix.
        return cols.T


class PerChannelTransform:
    """One orthogonal transform applied channel-by-channel."""

    def __init__(self, base, channels):
        if channels < 1:
            raise ConfigError("channels must be >= 1")
        self.base = base
        self.channels = int(channels)
        self.kind = base.kind
        self.domain_dim = (
            base.domain_dim * channels if base.domain_dim else None
        )

    def forward(self, x):
        x = _as_vector(x, self.domain_dim).reshape(self.channels, -1)
        return np.concatenate([self.base.forward(xc) for xc in x])

    def inverse(self, c):
        c = _as_vector(c, self.domain_dim).reshape(self.channels, -1)
        return np.concatenate([self.base.inverse(cc) for cc in c])


# ---------------------------------------------------------------------------
# Group configuration
# ---------------------------------------------------------------------------

class GroupConfig:
    """Ordered list of (possibly overlapping) index groups over [0, N).

    Stores index lists only; the binary configuration matrix is never
    materialized except by :meth:`dense_matrix` for small test oracles.
    """

    def __init__(self, groups, dim):
        groups = tuple(np.asarray(g, dtype=np.intp) for g in groups)
        if len(groups) == 0:
            raise ConfigError("at least one group is required")
        for g in groups:
            if g.ndim != 1 or g.shape[0] == 0:
                raise ConfigError("groups must be non-empty 1D index lists")
            if g.min() < 0 or g.max() >= dim:
                raise ConfigError(f"group indices must lie in [0, {dim})")
        self.groups = groups
        self.dim = int(dim)
        self._flat = np.concatenate(groups)
        self._sizes = np.array([g.shape[0] for g in groups], dtype=np.intp)
        self._offsets = np.concatenate([[0], np.cumsum(self._sizes)[:-1]])

    @property
    def num_groups(self):
        return len(self.groups)

    @property
    def row_dim(self):
        """N' = sum of group sizes, the row count of the binary matrix."""
        return int(self._flat.shape[0])

    def group_norms(self, z):
        """Per-group l2 norms (||z_{g_1}||, ..., ||z_{g_s}||)."""
        z = _as_vector(z, self.dim, "z")
        sq = np.add.reduceat(np.abs(z[self._flat]) ** 2, self._offsets)
        return np.sqrt(sq)

    def gtwg_diagonal(self, w):
        """Diagonal of G^T W G for group weights w (always diagonal)."""
        w = np.asarray(w, dtype=float)
        if w.shape != (self.num_groups,):
            raise ConfigError(f"need {self.num_groups} group weights")
        if np.any(w <= 0):
            raise ConfigError("group weights must be strictly positive")
        return np.bincount(
            self._flat, weights=np.repeat(w, self._sizes), minlength=self.dim
        )

    def membership_counts(self):
        """Entry j of diag(G^T G): number of groups containing j."""
        return np.bincount(self._flat, minlength=self.dim)

    def dense_matrix(self):
        """The binary N' x N matrix, for small-scale oracles only."""
        G = np.zeros((self.row_dim, self.dim))
        G[np.arange(self.row_dim), self._flat] = 1.0
        return G


def identity_groups(dim):
    """Each index its own group (standard sparsity)."""
    return GroupConfig([[j] for j in range(dim)], dim)


def contiguous_groups(dim, size):
    """Non-overlapping contiguous blocks of the given size."""
    if dim % size != 0:
        raise ConfigError("dim must be divisible by the group size")
    return GroupConfig(
        [list(range(i, i + size)) for i in range(0, dim, size)], dim
    )


def chained_pair_groups(dim):
    """Overlapping pairs [0,1], [1,2], ..., [N-2, N-1]."""
    if dim < 2:
        raise ConfigError("chained pairs require dim >= 2")
    return GroupConfig([[j, j + 1] for j in range(dim - 1)], dim)


def joint_sparsity_groups(dim, channels):
    """Coefficient j grouped across C stacked channels (non-overlapping)."""
    return GroupConfig(
        [[c * dim + j for c in range(channels)] for j in range(dim)],
        dim * channels,
    )


def wavelet_tree_groups(transform):
    """Parent-child pairs over the wavelet quadtree of a transform.

    Each detail coefficient below the coarsest level is grouped with its
    parent in the same orientation subband; coarsest-level details and
    approximation coefficients appear only as parents (or not at all).
    """
    if transform.kind == "identity" or transform.levels < 2:
        raise ConfigError("tree groups need a wavelet transform with >= 2 levels")
    shape = transform.shape
    groups = []
    if len(shape) == 1:
        N = shape[0]
        # Detail band at level l occupies [N >> l, N >> (l - 1)).
        for lev in range(1, transform.levels):
            lo, hi = N >> lev, N >> (lev - 1)
            plo = N >> (lev + 1)
            for k in range(hi - lo):
                groups.append([lo + k, plo + k // 2])
        return GroupConfig(groups, N)
    n = shape[0]
    for lev in range(1, transform.levels):
        m = n >> (lev - 1)   # block size at this level
        h = m // 2
        ph = h // 2          # parent subband side
        for (ro, co) in ((0, h), (h, 0), (h, h)):  # HL, LH, HH quadrants
            pro = 0 if ro == 0 else ph
            pco = 0 if co == 0 else ph
            for i in range(h):
                for j in range(h):
                    child = (ro + i) * n + (co + j)
                    parent = (pro + i // 2) * n + (pco + j // 2)
                    groups.append([child, parent])
    return GroupConfig(groups, n * n)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

class FiniteDifferenceOperator:
    """First-order difference matrix on a flattened n x n image.

    direction 1 (vertical): row i yields x_i - x_{i-1} with an identity
    first row; the subdiagonal runs across image-row boundaries.
    direction 2 (horizontal): row i yields x_i - x_{i-n} with identity
    first n rows.
    """

    def __init__(self, side, direction):
        if direction not in (1, 2):
            raise ConfigError("direction must be 1 or 2")
        if side < 1:
            raise ConfigError("image side must be positive")
        self.side = int(side)
        self.direction = direction
        self.dim = self.side * self.side
        self._lag = 1 if direction == 1 else self.side

    def apply(self, x):
        x = _as_vector(x, self.dim)
        y = x.astype(float).copy()
        y[self._lag :] -= x[: -self._lag]
        return y

    def adjoint(self, g):
        g = _as_vector(g, self.dim, "g")
        z = g.astype(float).copy()
        z[: -self._lag] -= g[self._lag :]
        return z

    def dense_matrix(self):
        D = np.eye(self.dim)
        idx = np.arange(self._lag, self.dim)
        D[idx, idx - self._lag] = -1.0
        return D


def check_square_dim(N):
    """Side length n with n*n = N, rejecting non-square sizes."""
    n = int(round(np.sqrt(N)))
    if n * n != N:
        raise ConfigError(f"dimension {N} is not a perfect square")
    return n
