"""Exact Gibbs measures by full enumeration, local energies, and conditional motif laws.

The measure weights a configuration sigma by exp(a * sum_x sigma(x) +
b * sum_edges sigma(x) sigma(y)).  On small lattices the whole table of
2**(n^d) log-weights is materialized, giving an exact oracle for means,
variances, conditionals and count distributions.  All weights stay in log
domain; the field a can be strongly negative, which would underflow raw
weights.

Configurations are identified with bitmasks: bit i set means site i (row-major
lexicographic index) carries spin +1.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import logsumexp

from .errors import (
    FamilyTooLarge,
    LatticeTooSmall,
    MissingSpin,
    MotifScheduleMismatch,
    NotClean,
    SignatureMismatch,
    TooLargeForExact,
)
from .lattice import TorusLattice, Vertex
from .motifs import DEFAULT_FAMILY_CAP, LocalConfig

#: Default cap on sites for full enumeration (2**cap configurations).
DEFAULT_SITE_CAP = 24

#: Environment variable overriding the enumeration cap.
SITE_CAP_ENV = "ISINGMOTIF_EXACT_SITE_CAP"


def resolve_site_cap(site_cap: int | None = None) -> int:
    """Explicit cap, else the environment override, else the default."""
    if site_cap is not None:
        return int(site_cap)
    return int(os.environ.get(SITE_CAP_ENV, DEFAULT_SITE_CAP))


@dataclass(frozen=True)
class ModelParams:
    """Magnetic field ``a`` and pair potential ``b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("model parameters must be finite reals")


@dataclass(frozen=True)
class FieldSchedule:
    """Size-dependent magnetic field with exp(2 a(n)) = c * n**(-d/k_target).

    The scaling keeps the expected number of k_target-positive patterns of
    order one as the lattice grows.
    """

    c: float
    k_target: int
    d: int

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError("schedule constant c must be a positive finite real")
        if self.k_target < 1:
            raise ValueError("k_target must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")

    def field(self, n: int) -> float:
        """a(n) = 0.5 * log(c * n**(-d/k_target))."""
        return 0.5 * (math.log(self.c) - self.d / self.k_target * math.log(n))

    def params(self, n: int, b: float) -> ModelParams:
        return ModelParams(a=self.field(n), b=b)


def threshold_field(n: int, d: int, k: int, epsilon: float, super_threshold: bool) -> float:
    """Field with exp(2a) = n**(-d/k +- epsilon).

    ``super_threshold=False`` gives the sub-threshold side (exponent
    -d/k - epsilon, patterns vanish); ``True`` the super-threshold side
    (exponent -d/k + epsilon, patterns proliferate).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    sign = 1.0 if super_threshold else -1.0
    return 0.5 * (-d / k + sign * epsilon) * math.log(n)


class SpinConfig:
    """One global +/-1 configuration on a lattice.

    Spins are stored densely in row-major lexicographic site order.
    """

    __slots__ = ("lattice", "spins")

    def __init__(self, lattice: TorusLattice, spins):
        spins = np.asarray(spins, dtype=np.int8)
        if spins.shape != (lattice.num_sites,):
            raise ValueError(f"expected {lattice.num_sites} spins, got shape {spins.shape}")
        if not np.all(np.abs(spins) == 1):
            raise ValueError("spins must be +1 or -1")
        self.lattice = lattice
        self.spins = spins

    @classmethod
    def all_minus(cls, lattice: TorusLattice) -> "SpinConfig":
        return cls(lattice, np.full(lattice.num_sites, -1, dtype=np.int8))

    @classmethod
    def all_plus(cls, lattice: TorusLattice) -> "SpinConfig":
        return cls(lattice, np.ones(lattice.num_sites, dtype=np.int8))

    @classmethod
    def from_mask(cls, lattice: TorusLattice, mask: int) -> "SpinConfig":
        bits = (int(mask) >> np.arange(lattice.num_sites)) & 1
        return cls(lattice, (2 * bits - 1).astype(np.int8))

    def to_mask(self) -> int:
        mask = 0
        for i in np.flatnonzero(self.spins == 1):
            mask |= 1 << int(i)
        return mask

    def spin(self, vertex: Vertex) -> int:
        return int(self.spins[self.lattice.site_index(self.lattice.canon(vertex))])

    def copy(self) -> "SpinConfig":
        return SpinConfig(self.lattice, self.spins.copy())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpinConfig)
            and self.lattice == other.lattice
            and bool(np.array_equal(self.spins, other.spins))
        )

    def __repr__(self) -> str:
        return f"SpinConfig({self.lattice!r}, mask={self.to_mask():#x})"


def hamiltonian(cfg: SpinConfig, params: ModelParams) -> float:
    """a * sum_x sigma(x) + b * sum_edges sigma(x) sigma(y), each edge once."""
    s = cfg.spins.astype(np.int64)
    edges = cfg.lattice.edges()
    if edges:
        ei = np.fromiter((e[0] for e in edges), dtype=np.int64)
        ej = np.fromiter((e[1] for e in edges), dtype=np.int64)
        pair = int((s[ei] * s[ej]).sum())
    else:
        pair = 0
    return params.a * int(s.sum()) + params.b * pair


def _spin_matrix(masks: np.ndarray, num_sites: int) -> np.ndarray:
    """(len(masks), num_sites) +/-1 int8 matrix from config bitmasks."""
    bits = (masks[:, None] >> np.arange(num_sites, dtype=np.uint64)[None, :]) & np.uint64(1)
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)


def _all_energies(lattice: TorusLattice, params: ModelParams, chunk: int = 1 << 16) -> np.ndarray:
    n_sites = lattice.num_sites
    total = 1 << n_sites
    edges = lattice.edges()
    ei = np.array([e[0] for e in edges], dtype=np.intp)
    ej = np.array([e[1] for e in edges], dtype=np.intp)
    out = np.empty(total, dtype=np.float64)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        masks = np.arange(start, stop, dtype=np.uint64)
        spins = _spin_matrix(masks, n_sites)
        field = spins.sum(axis=1, dtype=np.int32)
        if len(edges):
            pair = (spins[:, ei] * spins[:, ej]).sum(axis=1, dtype=np.int32)
        else:
            pair = np.zeros(stop - start, dtype=np.int32)
        out[start:stop] = params.a * field + params.b * pair
    return out


class ExactMeasure:
    """Gibbs measure tabulated over all 2**(n^d) configurations.

    Immutable after construction; queries are concurrent-read-safe.
    ``log_weights[m]`` is the energy exponent of the configuration with
    bitmask m, and log_z its log-sum-exp.
    """

    def __init__(self, lattice: TorusLattice, params: ModelParams, log_weights: np.ndarray):
        self.lattice = lattice
        self.params = params
        self.log_weights = log_weights
        self.log_z = float(logsumexp(log_weights))
        self._probs: np.ndarray | None = None

    @property
    def num_configs(self) -> int:
        return len(self.log_weights)

    def probabilities(self) -> np.ndarray:
        """Probability of every configuration, indexed by bitmask."""
        if self._probs is None:
            self._probs = np.exp(self.log_weights - self.log_z)
        return self._probs

    def log_prob(self, cfg: SpinConfig) -> float:
        return float(self.log_weights[cfg.to_mask()] - self.log_z)

    def prob(self, cfg: SpinConfig) -> float:
        return math.exp(self.log_prob(cfg))

    def expectation(self, values) -> float:
        """Mean of a statistic.

        ``values`` is either an array indexed by configuration bitmask or a
        callable evaluated on every SpinConfig (slow; meant for small oracles).
        """
        values = self._as_values(values)
        return float(np.dot(self.probabilities(), values))

    def variance(self, values) -> float:
        values = self._as_values(values)
        p = self.probabilities()
        mean = float(np.dot(p, values))
        return float(np.dot(p, (values - mean) ** 2))

    def _as_values(self, values) -> np.ndarray:
        if callable(values):
            f: Callable[[SpinConfig], float] = values
            return np.array(
                [f(SpinConfig.from_mask(self.lattice, m)) for m in range(self.num_configs)],
                dtype=np.float64,
            )
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (self.num_configs,):
            raise ValueError("values must cover every configuration")
        return values

    # -- partial assignments ------------------------------------------------

    def _assignment_masks(self, assignment: Mapping[Vertex, int]) -> tuple[int, int]:
        sites_mask = 0
        plus_mask = 0
        for vertex, spin in assignment.items():
            idx = self.lattice.site_index(self.lattice.canon(vertex))
            bit = 1 << idx
            if sites_mask & bit:
                raise ValueError(f"vertex {vertex} assigned twice")
            sites_mask |= bit
            if spin == 1:
                plus_mask |= bit
            elif spin != -1:
                raise ValueError("spins must be +1 or -1")
        return sites_mask, plus_mask

    def _match(self, sites_mask: int, plus_mask: int) -> np.ndarray:
        masks = np.arange(self.num_configs, dtype=np.uint64)
        return (masks & np.uint64(sites_mask)) == np.uint64(plus_mask)

    def marginal_probability(self, assignment: Mapping[Vertex, int]) -> float:
        """Probability that the configuration agrees with a partial assignment."""
        sm, pm = self._assignment_masks(assignment)
        return float(self.probabilities()[self._match(sm, pm)].sum())

    def conditional_probability(
        self, target: Mapping[Vertex, int], given: Mapping[Vertex, int]
    ) -> float:
        """P(target assignment | given assignment), on disjoint vertex sets."""
        sm_t, pm_t = self._assignment_masks(target)
        sm_g, pm_g = self._assignment_masks(given)
        if sm_t & sm_g:
            raise ValueError("target and given assignments overlap")
        p = self.probabilities()
        denom = float(p[self._match(sm_g, pm_g)].sum())
        if denom <= 0.0:
            raise ValueError("conditioning event has zero probability")
        num = float(p[self._match(sm_t | sm_g, pm_t | pm_g)].sum())
        return num / denom


def build_exact(
    lattice: TorusLattice, params: ModelParams, site_cap: int | None = None
) -> ExactMeasure:
    """Tabulate the Gibbs measure over all configurations of a small lattice.

    Raises:
        TooLargeForExact: if n^d exceeds the site cap (default 24, overridable
            via the ISINGMOTIF_EXACT_SITE_CAP environment variable).
    """
    cap = resolve_site_cap(site_cap)
    if lattice.num_sites > cap:
        raise TooLargeForExact(
            f"lattice has {lattice.num_sites} sites, enumeration cap is {cap}"
        )
    return ExactMeasure(lattice, params, _all_energies(lattice, params))


# -- local energies -------------------------------------------------------------


def local_energy(
    lattice: TorusLattice,
    x: Vertex,
    radius: int,
    spins: Mapping[Vertex, int],
    params: ModelParams,
) -> float:
    """Energy contribution of the ball B(x, radius).

    Field term over the ball plus pair term over every edge with at least one
    endpoint in the ball (the other endpoint may lie on the boundary).

    Args:
        spins: assignment covering the whole closure of the ball.

    Raises:
        MissingSpin: if any ball or boundary vertex has no assigned spin.
    """
    ball = lattice.ball(lattice.canon(x), radius)
    boundary = lattice.boundary(ball)
    assignment = {lattice.canon(v): s for v, s in spins.items()}
    missing = [v for v in list(ball.members) + list(boundary) if v not in assignment]
    if missing:
        raise MissingSpin(f"no spin assigned on {missing[:4]}{'...' if len(missing) > 4 else ''}")
    for v, s in assignment.items():
        if s not in (-1, 1):
            raise ValueError(f"spin at {v} must be +1 or -1")

    inside = set(ball.members)
    field = sum(assignment[v] for v in ball.members)
    pair = 0
    for y in ball.members:
        for z in lattice.neighbors(y):
            if z in inside:
                if y < z:  # internal edge, count once
                    pair += assignment[y] * assignment[z]
            else:
                pair += assignment[y] * assignment[z]
    return params.a * field + params.b * pair


class _BallEnergyTable:
    """Vectorized local energies of every motif on one ball against boundaries.

    Row m of the table corresponds to the motif whose positive set is encoded
    by bitmask m over the sorted ball members.
    """

    def __init__(self, lattice: TorusLattice, x: Vertex, radius: int, cap: int):
        ball = lattice.ball(lattice.canon(x), radius)
        if 1 << len(ball.members) > cap:
            raise FamilyTooLarge(
                f"ball has {len(ball.members)} sites, 2^{len(ball.members)} > cap {cap}"
            )
        self.lattice = lattice
        self.ball = ball
        self.boundary = lattice.boundary(ball)
        members = list(ball.members)
        index = {v: i for i, v in enumerate(members)}
        b_index = {v: i for i, v in enumerate(self.boundary)}

        masks = np.arange(1 << len(members), dtype=np.uint64)
        self.spin_rows = _spin_matrix(masks, len(members))  # (2^beta, beta)

        internal = []
        cross = np.zeros((len(members), len(self.boundary)), dtype=np.int64)
        for y in members:
            for z in lattice.neighbors(y):
                if z in index:
                    if y < z:
                        internal.append((index[y], index[z]))
                else:
                    cross[index[y], b_index[z]] += 1
        rows = self.spin_rows.astype(np.int64)
        if internal:
            ii = np.array([e[0] for e in internal], dtype=np.intp)
            jj = np.array([e[1] for e in internal], dtype=np.intp)
            self.internal_pair = (rows[:, ii] * rows[:, jj]).sum(axis=1)
        else:
            self.internal_pair = np.zeros(len(masks), dtype=np.int64)
        self.field = rows.sum(axis=1)
        self.cross = rows @ cross  # (2^beta, |boundary|)

    def motif_row(self, motif: LocalConfig) -> int:
        members = {v: i for i, v in enumerate(self.ball.members)}
        row = 0
        for off in motif.positives:
            row |= 1 << members[self.lattice.add(self.ball.center, off)]
        return row

    def boundary_spins(self, boundary: Mapping[Vertex, int]) -> np.ndarray:
        assignment = {self.lattice.canon(v): s for v, s in boundary.items()}
        missing = [v for v in self.boundary if v not in assignment]
        if missing:
            raise MissingSpin(f"boundary spin missing on {missing}")
        tau = np.array([assignment[v] for v in self.boundary], dtype=np.int64)
        if not np.all(np.abs(tau) == 1):
            raise ValueError("boundary spins must be +1 or -1")
        return tau

    def energies(self, tau: np.ndarray, params: ModelParams) -> np.ndarray:
        """Local energy of every motif against boundary spins ``tau``."""
        pair = self.internal_pair + self.cross @ tau
        return params.a * self.field + params.b * pair


def conditional_motif_probability(
    lattice: TorusLattice,
    x: Vertex,
    motif: LocalConfig,
    boundary: Mapping[Vertex, int],
    params: ModelParams,
    family_cap: int = DEFAULT_FAMILY_CAP,
) -> float:
    """Probability that the motif occupies B(x, r), given the boundary spins.

    Computed in log domain as exp(H(motif)) normalized over the local energies
    of all 2**beta(r) patterns on the ball; the result lies in (0, 1).

    Raises:
        SignatureMismatch: motif built for a different (d, rho, p).
        FamilyTooLarge: the 2**beta(r) normalization is over the cap.
        MissingSpin: boundary does not cover the whole vertex boundary.
    """
    if motif.signature != lattice.signature:
        raise SignatureMismatch(
            f"motif signature {motif.signature} != lattice signature {lattice.signature}"
        )
    table = _BallEnergyTable(lattice, x, motif.radius, family_cap)
    tau = table.boundary_spins(boundary)
    energies = table.energies(tau, params)
    target = table.motif_row(motif)
    return float(np.exp(energies[target] - logsumexp(energies)))


@dataclass(frozen=True)
class SandwichReport:
    """Exhaustive check of the scaled conditional law of a clean motif.

    For every boundary assignment tau, n^d * P(motif | tau) must stay below
    the limit value c^k * exp(-2 b gamma); ``worst_ratio`` is the smallest
    observed ratio against that limit (it approaches 1 as n grows) and
    ``max_excess`` the largest upper-bound violation (<= tolerance when the
    bound holds).
    """

    n: int
    lambda_target: float
    worst_ratio: float
    max_excess: float
    boundary_count: int
    upper_bound_holds: bool


def check_conditional_sandwich(
    lattice: TorusLattice,
    motif: LocalConfig,
    schedule: FieldSchedule,
    b: float,
    tol: float = 1e-12,
    family_cap: int = DEFAULT_FAMILY_CAP,
) -> SandwichReport:
    """Exhaustively bound n^d * P(motif | boundary) over all boundary spins.

    Raises:
        NotClean: the motif has positives on its outer shell.
        MotifScheduleMismatch: k(motif) differs from the schedule's target.
        LatticeTooSmall: n <= 2 * rho * (r + 1).
    """
    if motif.signature != lattice.signature:
        raise SignatureMismatch(
            f"motif signature {motif.signature} != lattice signature {lattice.signature}"
        )
    if not motif.clean:
        raise NotClean("sandwich check requires a clean motif")
    if motif.k != schedule.k_target:
        raise MotifScheduleMismatch(
            f"motif has k={motif.k}, schedule targets k={schedule.k_target}"
        )
    n = lattice.n
    if n <= 2 * lattice.rho * (motif.radius + 1):
        raise LatticeTooSmall(
            f"need n > {2 * lattice.rho * (motif.radius + 1)} for the closure, got {n}"
        )
    params = schedule.params(n, b)
    lam = schedule.c**motif.k * math.exp(-2.0 * b * motif.perimeter)

    origin = (0,) * lattice.d
    table = _BallEnergyTable(lattice, origin, motif.radius, family_cap)
    target = table.motif_row(motif)
    n_boundary = len(table.boundary)
    if 1 << n_boundary > family_cap:
        raise FamilyTooLarge(f"2^{n_boundary} boundary assignments exceed cap {family_cap}")

    scale = float(lattice.num_sites)
    worst_ratio = math.inf
    max_excess = -math.inf
    for bmask in range(1 << n_boundary):
        tau = np.array(
            [1 if (bmask >> i) & 1 else -1 for i in range(n_boundary)], dtype=np.int64
        )
        energies = table.energies(tau, params)
        prob = float(np.exp(energies[target] - logsumexp(energies)))
        scaled = scale * prob
        worst_ratio = min(worst_ratio, scaled / lam)
        max_excess = max(max_excess, scaled - lam)
    return SandwichReport(
        n=n,
        lambda_target=lam,
        worst_ratio=worst_ratio,
        max_excess=max_excess,
        boundary_count=1 << n_boundary,
        upper_bound_holds=max_excess <= tol,
    )
