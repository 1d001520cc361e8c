"""Particle-system definitions: states, contact rates, update rule.

A system on K states is specified by a K x K matrix of contact-clock rates
``gamma`` and a total update function on ordered state pairs.  From the
update function we derive the integer increment tensor ``increments`` whose
entry [m][l][k] is the net change in the number of state-k nodes when a
state-m node interacts with a state-l node.  The tensor drives both the
event simulator and the limiting ODE, so it is derived once here and never
supplied by hand.

States are labelled 1..K in files and messages, 0..K-1 in arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError

PRESET_RULES = ("sis", "voter")


@dataclass(frozen=True)
class ModelSpec:
    """Immutable particle-system specification.

    Attributes:
        K: number of states.
        gamma: (K, K) nonnegative clock rates; gamma[m, l] is the rate at
            which a state-m node contacts a state-l neighbor, per directed
            edge.
        update: (K, K, 2) int array; update[m, l] = (m', l') is the ordered
            post-interaction state pair, 0-based.
        increments: (K, K, K) int tensor derived from ``update``.
        name: optional label ("sis", "voter", or user-defined).
    """

    K: int
    gamma: np.ndarray
    update: np.ndarray
    increments: np.ndarray
    name: str = ""

    def __post_init__(self):
        for arr in (self.gamma, self.update, self.increments):
            arr.flags.writeable = False

    @property
    def max_rate(self) -> float:
        return float(self.gamma.max())


@dataclass
class ValidationReport:
    ok: bool = True
    violations: list[str] = field(default_factory=list)

    def fail(self, message: str) -> None:
        self.ok = False
        self.violations.append(message)


def derive_increment_tensor(update: np.ndarray, K: int) -> np.ndarray:
    """Derive the (K, K, K) increment tensor from an update table.

    output[m][l][k] = #{k among update outputs} - #{k among inputs (m, l)}.
    Raises InvalidModelError if the table maps outside {0, ..., K-1}.
    """
    update = np.asarray(update, dtype=np.int64)
    if update.shape != (K, K, 2):
        raise InvalidModelError(
            f"update table must have shape ({K}, {K}, 2), got {update.shape}"
        )
    if update.min() < 0 or update.max() >= K:
        bad = np.argwhere((update < 0) | (update >= K))[0]
        m, l, _ = bad
        raise InvalidModelError(
            f"update({m + 1}, {l + 1}) maps outside states 1..{K}"
        )
    inc = np.zeros((K, K, K), dtype=np.int64)
    for m in range(K):
        for l in range(K):
            a, b = update[m, l]
            inc[m, l, a] += 1
            inc[m, l, b] += 1
            inc[m, l, m] -= 1
            inc[m, l, l] -= 1
    # Impossible by construction: two state-k nodes interacting cannot
    # increase the state-k count.
    assert all(inc[k, k, k] <= 0 for k in range(K))
    return inc


def identity_update(K: int) -> np.ndarray:
    """Update table that leaves every pair unchanged."""
    table = np.empty((K, K, 2), dtype=np.int64)
    for m in range(K):
        for l in range(K):
            table[m, l] = (m, l)
    return table


def update_from_pairs(K: int, entries) -> np.ndarray:
    """Build an update table from 1-based rows [m, l, m', l'].

    Rows may cover any subset of pairs; uncovered pairs default to the
    identity.  Duplicate rows for the same pair are rejected.
    """
    table = identity_update(K)
    seen = set()
    for row in entries:
        if len(row) != 4:
            raise InvalidModelError(f"update entry must have 4 fields, got {row}")
        m, l, m2, l2 = (int(v) for v in row)
        for v in (m, l, m2, l2):
            if not 1 <= v <= K:
                raise InvalidModelError(f"update entry {row} uses state outside 1..{K}")
        if (m, l) in seen:
            raise InvalidModelError(f"duplicate update entry for pair ({m}, {l})")
        seen.add((m, l))
        table[m - 1, l - 1] = (m2 - 1, l2 - 1)
    return table


def make_model(K: int, gamma, update=None, rule: str | None = None,
               name: str = "") -> ModelSpec:
    """Assemble and validate a ModelSpec from rates plus a rule."""
    if K < 1:
        raise InvalidModelError(f"K must be positive, got {K}")
    gamma = np.array(gamma, dtype=np.float64)
    if gamma.shape != (K, K):
        raise InvalidModelError(f"gamma must be {K}x{K}, got shape {gamma.shape}")
    if rule is not None and update is not None:
        raise InvalidModelError("give either a named rule or an update table, not both")
    if rule is not None:
        update = preset_update(rule, K)
        name = name or rule
    if update is None:
        raise InvalidModelError("model needs a rule name or an update table")
    update = np.asarray(update, dtype=np.int64)
    spec = ModelSpec(K=K, gamma=gamma,
                     update=update.copy(),
                     increments=derive_increment_tensor(update, K),
                     name=name)
    report = validate_model(spec)
    if not report.ok:
        raise InvalidModelError("; ".join(report.violations))
    return spec


def preset_update(rule: str, K: int) -> np.ndarray:
    """Named update rules used throughout: 'sis' and 'voter'."""
    if rule == "sis":
        if K != 2:
            raise InvalidModelError("sis rule requires K=2")
        table = identity_update(2)
        table[0, 1] = (0, 0)  # infected contacting healthy infects it
        return table
    if rule == "voter":
        table = np.empty((K, K, 2), dtype=np.int64)
        for m in range(K):
            for l in range(K):
                table[m, l] = (m, m)  # initiator imposes its state
        return table
    raise InvalidModelError(f"unknown rule {rule!r}; presets are {PRESET_RULES}")


def sis_model(rate: float = 1.0) -> ModelSpec:
    """Two-state contact process: state 1 infected, state 2 healthy.

    Only the infected->healthy clock is active, at the given rate.
    """
    gamma = np.zeros((2, 2))
    gamma[0, 1] = rate
    return make_model(2, gamma, rule="sis")


def voter_model(K: int = 2, rate: float = 1.0) -> ModelSpec:
    """Voter rule on K states with a uniform symmetric contact rate."""
    gamma = np.full((K, K), float(rate))
    return make_model(K, gamma, rule="voter")


def validate_model(spec: ModelSpec) -> ValidationReport:
    """Check every structural invariant; report names offending indices."""
    rep = ValidationReport()
    K = spec.K
    if spec.gamma.shape != (K, K):
        rep.fail(f"gamma shape {spec.gamma.shape} != ({K}, {K})")
        return rep
    if spec.update.shape != (K, K, 2):
        rep.fail(f"update shape {spec.update.shape} != ({K}, {K}, 2)")
        return rep
    if spec.increments.shape != (K, K, K):
        rep.fail(f"increments shape {spec.increments.shape} != ({K}, {K}, {K})")
        return rep
    for m, l in zip(*np.nonzero(~np.isfinite(spec.gamma) | (spec.gamma < 0))):
        rep.fail(f"gamma[{m + 1}][{l + 1}] = {spec.gamma[m, l]} violates nonnegativity")
    if spec.update.min() < 0 or spec.update.max() >= K:
        for m, l in {(int(m), int(l)) for m, l, _ in
                     np.argwhere((spec.update < 0) | (spec.update >= K))}:
            rep.fail(f"update({m + 1}, {l + 1}) maps outside states 1..{K}")
        return rep
    inc = spec.increments
    if inc.min() < -2 or inc.max() > 2:
        m, l, k = np.argwhere((inc < -2) | (inc > 2))[0]
        rep.fail(f"increments[{m + 1}][{l + 1}][{k + 1}] = {inc[m, l, k]} "
                 "outside {-2..2}")
    sums = inc.sum(axis=2)
    for m, l in zip(*np.nonzero(sums)):
        rep.fail(f"sum_k increments[{m + 1}][{l + 1}][k] = {sums[m, l]} != 0 "
                 "(node count not conserved)")
    for k in range(K):
        if inc[k, k, k] > 0:
            rep.fail(f"increments[{k + 1}][{k + 1}][{k + 1}] = {inc[k, k, k]} "
                     "violates c_kk(k) <= 0")
    rederived = derive_increment_tensor(spec.update, K)
    if not np.array_equal(rederived, inc):
        m, l, k = np.argwhere(rederived != inc)[0]
        rep.fail(f"increments[{m + 1}][{l + 1}][{k + 1}] = {inc[m, l, k]} "
                 f"inconsistent with update rule (expected {rederived[m, l, k]})")
    return rep
