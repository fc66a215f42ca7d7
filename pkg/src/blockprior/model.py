"""Problem instances: block structures, prior partitions, signals, operators.

Randomness policy: every sampler is a pure function of (parameters, seed).
Seeds are fed to numpy's counter-based Philox generator through
SeedSequence, and derived per-trial streams use position-keyed spawn keys
(derive_seed), so trials are independent and order-insensitive. The
generator choice is fixed for a release.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DomainError, FactorizationError


def derive_seed(seed, *key):
    """Position-keyed child seed: same (seed, key) always gives the same stream."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(entropy=seed.entropy,
                                      spawn_key=seed.spawn_key + tuple(key))
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))


def _generator(seed):
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(entropy=seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class BlockStructure:
    """Ambient dimension n split into q contiguous blocks of equal size k."""

    n: int
    q: int
    k: int

    def __post_init__(self):
        if self.n < 1 or self.q < 1 or self.k < 1:
            raise DomainError("n, q, k must be positive")
        if self.n != self.q * self.k:
            raise DomainError(f"n must equal q*k, got n={self.n}, q*k={self.q * self.k}")

    def block_slice(self, b):
        return slice(b * self.k, (b + 1) * self.k)

    def block_view(self, x):
        """View of a length-n vector as a (q, k) array of blocks."""
        return np.asarray(x).reshape(self.q, self.k)


@dataclass(frozen=True)
class PriorPartition:
    """Disjoint block-index sets covering all q blocks, with per-set accuracy.

    alpha[i] is the fraction of set i that belongs to the block support;
    rho[i] = |set i| / q. Block indices are 0-based.
    """

    q: int
    sets: tuple
    alpha: tuple

    def __post_init__(self):
        sets = tuple(tuple(sorted(int(b) for b in s)) for s in self.sets)
        alpha = tuple(float(a) for a in self.alpha)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "alpha", alpha)
        if len(sets) != len(alpha) or not sets:
            raise DomainError("sets and alpha must be nonempty and equal length")
        seen = set()
        for s in sets:
            if not s:
                raise DomainError("empty prior set")
            if seen.intersection(s):
                raise DomainError("prior sets must be disjoint")
            seen.update(s)
        if seen != set(range(self.q)):
            raise DomainError("prior sets must partition the blocks 0..q-1")
        for a in alpha:
            if not 0.0 <= a <= 1.0:
                raise DomainError(f"accuracy {a} outside [0, 1]")

    @classmethod
    def from_fractions(cls, q, rho, alpha):
        """Build contiguous sets of sizes rho_i * q (must be integral)."""
        sizes = []
        for r in rho:
            size = r * q
            if abs(size - round(size)) > 1e-9 or round(size) < 1:
                raise DomainError(f"rho={r} does not give an integral set size for q={q}")
            sizes.append(round(size))
        if sum(sizes) != q:
            raise DomainError(f"set sizes {sizes} do not sum to q={q}")
        sets, start = [], 0
        for size in sizes:
            sets.append(tuple(range(start, start + size)))
            start += size
        return cls(q=q, sets=tuple(sets), alpha=tuple(alpha))

    @property
    def L(self):
        return len(self.sets)

    @property
    def sizes(self):
        return tuple(len(s) for s in self.sets)

    @property
    def rho(self):
        return tuple(len(s) / self.q for s in self.sets)

    @property
    def sigma(self):
        return sum(r * a for r, a in zip(self.rho, self.alpha))

    def support_counts(self):
        """Exact per-set support counts alpha_i * |P_i|; error if non-integral."""
        counts = []
        for i, (s, a) in enumerate(zip(self.sets, self.alpha)):
            c = a * len(s)
            if abs(c - round(c)) > 1e-9:
                raise DomainError(
                    f"alpha*|P| = {c} is not integral for set {i}; "
                    "instance generation needs exact support counts")
            counts.append(round(c))
        return counts


@dataclass(frozen=True)
class SignalInstance:
    structure: BlockStructure
    support: tuple
    x: np.ndarray


@dataclass
class MeasurementEnsemble:
    """Gaussian operator A with the exact measurements y = A x."""

    A: np.ndarray
    y: np.ndarray
    seed: object = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    def affine_projector(self):
        """Cached (null_proj, x_feas) with proj(v) = x_feas + null_proj @ v.

        null_proj projects onto null(A) and x_feas = A^T (A A^T)^{-1} y, so
        proj maps any v to the closest point of the feasible set {z: Az=y}.
        """
        if "proj" not in self._cache:
            gram = self.A @ self.A.T
            try:
                factor = cho_factor(gram)
            except np.linalg.LinAlgError as exc:
                raise FactorizationError(f"A A^T is not positive definite: {exc}") from exc
            pinv_rows = cho_solve(factor, self.A)
            null_proj = -(self.A.T @ pinv_rows)
            null_proj[np.diag_indices_from(null_proj)] += 1.0
            x_feas = self.A.T @ cho_solve(factor, self.y)
            self._cache["proj"] = (np.ascontiguousarray(null_proj), x_feas)
        return self._cache["proj"]


def expand_weights(partition, omega):
    """Spread per-set weights onto the q blocks: w_b = omega_i for b in set i."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (partition.L,):
        raise DomainError(f"expected {partition.L} set weights, got shape {omega.shape}")
    if np.any(omega < 0):
        raise DomainError("set weights must be nonnegative")
    w = np.empty(partition.q)
    for i, s in enumerate(partition.sets):
        w[list(s)] = omega[i]
    return w


def sample_instance(structure, partition, seed):
    """Draw a block-sparse signal realizing every set accuracy exactly.

    Within each prior set, exactly alpha_i * |P_i| support blocks are chosen
    uniformly without replacement; nonzero blocks get i.i.d. standard normal
    entries.
    """
    if partition.q != structure.q:
        raise DomainError("partition and structure disagree on the block count")
    counts = partition.support_counts()
    rng = _generator(seed)
    support = []
    for s, c in zip(partition.sets, counts):
        if c:
            support.extend(rng.choice(np.array(s), size=c, replace=False).tolist())
    support = tuple(sorted(int(b) for b in support))
    x = np.zeros(structure.n)
    for b in support:
        x[structure.block_slice(b)] = rng.standard_normal(structure.k)
    return SignalInstance(structure=structure, support=support, x=x)


def sample_gaussian_operator(m, n, seed):
    """m x n matrix of i.i.d. standard normal entries, deterministic in seed."""
    if m < 1 or m > n:
        raise DomainError(f"need 1 <= m <= n, got m={m}, n={n}")
    return _generator(seed).standard_normal((m, n))


def make_ensemble(x, m, seed):
    x = np.asarray(x, dtype=float)
    A = sample_gaussian_operator(m, x.shape[0], seed)
    return MeasurementEnsemble(A=A, y=A @ x, seed=seed)
