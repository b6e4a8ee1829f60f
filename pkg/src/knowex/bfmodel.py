"""Two-agent knowledge production and steady-state collaboration rotation.

Implements the Berliant-Fujita knowledge-creation technology: output of
a working pair depends on the knowledge the two agents share and on what
each knows exclusively, with joint production most productive when
common and differential knowledge are balanced.  The myopic-core steady
state of that model has agents sorted into components of size
``1 + 1/theta`` inside which collaboration partners rotate so that every
pair works together an equal share of the time; ``simulate_rotation``
realizes that schedule explicitly and measures the resulting shares.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError

_BYE = -1


@dataclass(frozen=True)
class BfParams:
    """Technology parameters.

    ``a`` scales isolated production, ``b`` joint production, and
    ``theta`` in (0, 1) is the output elasticity of knowledge held in
    common by a working pair.
    """

    a: float
    b: float
    theta: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ConfigError(f"isolated productivity a must be positive, got {self.a}")
        if not self.b > 0:
            raise ConfigError(f"joint productivity b must be positive, got {self.b}")
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must lie strictly inside (0, 1), got {self.theta}")


@dataclass
class KnowledgeState:
    """Knowledge stocks for ``n`` agents.

    ``own[i]`` is agent i's total stock, ``common[i, j]`` the part
    known to both i and j, and ``differential[i, j]`` the part known to
    i but not to j.  Only pair entries that are actually used in a
    simulation need to be meaningful.
    """

    own: np.ndarray
    common: np.ndarray
    differential: np.ndarray

    @classmethod
    def uniform(cls, n: int, own: float, common: float, differential: float) -> "KnowledgeState":
        if min(own, common, differential) < 0:
            raise ConfigError("knowledge stocks cannot be negative")
        c = np.full((n, n), float(common))
        np.fill_diagonal(c, 0.0)
        d = np.full((n, n), float(differential))
        np.fill_diagonal(d, 0.0)
        return cls(own=np.full(n, float(own)), common=c, differential=d)


def isolated_output(params: BfParams, time_share: float, k_own: float) -> float:
    """Output of an agent researching alone for ``time_share`` of the period."""
    if time_share < 0 or time_share > 1:
        raise ConfigError(f"time share must lie in [0, 1], got {time_share}")
    if k_own < 0:
        raise ConfigError("own knowledge stock cannot be negative")
    if time_share == 0.0:
        return 0.0
    return time_share * params.a * k_own


def pair_output(
    params: BfParams,
    time_share: float,
    k_common: float,
    k_diff_ij: float,
    k_diff_ji: float,
) -> float:
    """Joint output of a pair working together for ``time_share``.

    The two differential stocks enter with equal exponents
    ``(1 - theta) / 2`` and the common stock with exponent ``theta``, so
    the function is symmetric in the differential stocks and homogeneous
    of degree one in all three.
    """
    if time_share < 0 or time_share > 1:
        raise ConfigError(f"time share must lie in [0, 1], got {time_share}")
    if min(k_common, k_diff_ij, k_diff_ji) < 0:
        raise ConfigError("knowledge stocks cannot be negative")
    if time_share == 0.0:
        return 0.0
    half = (1.0 - params.theta) / 2.0
    return time_share * params.b * k_common**params.theta * k_diff_ij**half * k_diff_ji**half


def steady_state_size(theta: float) -> float:
    """Component size ``1 + 1/theta`` of the long-run collaboration groups."""
    if not 0.0 < theta < 1.0:
        raise ConfigError(f"theta must lie strictly inside (0, 1), got {theta}")
    return 1.0 + 1.0 / theta


def steady_state_share(theta: float) -> float:
    """Per-pair time share ``1 / (1 + 1/theta)`` in the steady state."""
    return 1.0 / steady_state_size(theta)


def rotation_schedule(size: int) -> list[list[tuple[int, int]]]:
    """Rounds of a fair collaboration rotation for a component of ``size``.

    Over one cycle of ``size`` rounds every unordered pair meets exactly
    once and every agent sits out (researching alone) exactly one round.
    Odd sizes use the circle method with a bye slot; even sizes schedule
    a full round robin and one common idle round.
    """
    if size < 2:
        return [[]]
    labels = list(range(size))
    if size % 2 == 1:
        labels.append(_BYE)
    n = len(labels)
    arr = labels[:]
    rounds: list[list[tuple[int, int]]] = []
    for _ in range(n - 1):
        pairs = []
        for k in range(n // 2):
            a, b = arr[k], arr[n - 1 - k]
            if a != _BYE and b != _BYE:
                pairs.append((min(a, b), max(a, b)))
        rounds.append(sorted(pairs))
        arr = [arr[0], arr[-1]] + arr[1:-1]
    if size % 2 == 0:
        rounds.append([])
    return rounds


@dataclass
class RotationResult:
    """Measured outcome of an explicit rotation simulation."""

    component_sizes: list[int]
    pair_share: Fraction
    idle_share: Fraction
    rounds_per_cycle: int
    total_output: float


def simulate_rotation(
    params: BfParams,
    n_components: int = 4,
    cycles: int = 3,
    k_common: float = 1.0,
    k_diff: float = 1.0,
) -> RotationResult:
    """Run the steady-state rotation and measure sizes and time shares.

    Requires ``1/theta`` to be an integer so the component size
    ``1 + 1/theta`` is realizable by whole agents.  Meeting and idle
    counts are tallied as integers and shares reported exactly as
    fractions of the rounds elapsed; with stationary stocks these equal
    ``1 / (1 + 1/theta)`` for every pair and for idle time alike.
    """
    inv = 1.0 / params.theta
    size = round(inv)
    if abs(inv - size) > 1e-9:
        raise ConfigError(
            f"steady-state rotation needs integer 1/theta, got 1/theta = {inv!r}"
        )
    size += 1
    if n_components < 1 or cycles < 1:
        raise ConfigError("need at least one component and one cycle")

    schedule = rotation_schedule(size)
    meet_counts: dict[tuple[int, int], int] = {}
    idle_counts = np.zeros(n_components * size, dtype=np.int64)
    total_output = 0.0
    rounds = 0
    for _ in range(cycles):
        for rnd in schedule:
            rounds += 1
            for comp in range(n_components):
                base = comp * size
                busy = set()
                for a, b in rnd:
                    i, j = base + a, base + b
                    busy.update((i, j))
                    key = (i, j)
                    meet_counts[key] = meet_counts.get(key, 0) + 1
                    total_output += pair_output(params, 1.0, k_common, k_diff, k_diff)
                for agent in range(base, base + size):
                    if agent not in busy:
                        idle_counts[agent] += 1
                        total_output += isolated_output(params, 1.0, k_common + k_diff)

    edges = set(meet_counts)
    sizes = _component_sizes(edges, n_components * size)
    pair_shares = {Fraction(c, rounds) for c in meet_counts.values()}
    idle_shares = {Fraction(int(c), rounds) for c in idle_counts}
    if len(pair_shares) != 1 or len(idle_shares) != 1:
        raise AssertionError("rotation schedule failed to equalize time shares")
    return RotationResult(
        component_sizes=sizes,
        pair_share=pair_shares.pop(),
        idle_share=idle_shares.pop(),
        rounds_per_cycle=len(schedule),
        total_output=total_output,
    )


def _component_sizes(edges: set[tuple[int, int]], n: int) -> list[int]:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    sizes: dict[int, int] = {}
    for x in range(n):
        r = find(x)
        sizes[r] = sizes.get(r, 0) + 1
    return sorted(sizes.values(), reverse=True)
