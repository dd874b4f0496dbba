"""State-vector engine for a single repeater link.

A link is two Rydberg-blockaded ensembles (``k`` and ``k+1``), each sitting in
a two-mode cavity.  Every ensemble holds at most one atom in each metastable
level and at most one Rydberg excitation; cavities hold at most one photon.
Amplitudes live on a sparse map ``BasisLabel -> complex`` and noise enters as
Monte Carlo quantum jumps.

Phase convention
----------------
A pulse on the pair ``(from_level, to_level)`` with area ``theta`` acts as::

    |from> -> cos(theta/2) |from> + sin(theta/2) |to>
    |to>   -> -sin(theta/2) |from> + cos(theta/2) |to>

so a pi pulse moves population forward with a ``+`` sign and a 2pi pulse
multiplies an occupied pair by ``-1``.  The ``-i`` of the physical rotation is
absorbed in this gauge; all comparisons use :func:`overlap`, which is
phase-insensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

RESERVOIR = "s"
METASTABLE = ("0L", "1L", "0R", "1R", "0A", "1A")
RYDBERG = ("r-", "r+", "rA")
LEVELS = (RESERVOIR,) + METASTABLE + RYDBERG
MODES = ("plus", "minus")

# ensemble / cavity index inside a link
K = 0
K1 = 1
SIDE_NAMES = {K: "k", K1: "k+1"}


class TruncationError(RuntimeError):
    """A pulse would push a level or cavity mode past single occupation."""


class EnsembleConfig(NamedTuple):
    occ_0L: int = 0
    occ_1L: int = 0
    occ_0R: int = 0
    occ_1R: int = 0
    occ_0A: int = 0
    occ_1A: int = 0
    ryd: str | None = None

    def has(self, level: str) -> bool:
        if level == RESERVOIR:
            return True
        if level in RYDBERG:
            return self.ryd == level
        return bool(getattr(self, "occ_" + level))

    def occupied(self) -> tuple[str, ...]:
        levels = tuple(lv for lv in METASTABLE if getattr(self, "occ_" + lv))
        return levels + ((self.ryd,) if self.ryd else ())


class CavityConfig(NamedTuple):
    n_plus: int = 0
    n_minus: int = 0

    def photons(self) -> int:
        return self.n_plus + self.n_minus


class BasisLabel(NamedTuple):
    ensemble_k: EnsembleConfig = EnsembleConfig()
    cavity_k: CavityConfig = CavityConfig()
    ensemble_k1: EnsembleConfig = EnsembleConfig()
    cavity_k1: CavityConfig = CavityConfig()

    def ensemble(self, side: int) -> EnsembleConfig:
        return self[2 * side]

    def cavity(self, side: int) -> CavityConfig:
        return self[2 * side + 1]

    def excitations(self) -> int:
        total = 0
        for side in (K, K1):
            ens = self.ensemble(side)
            total += sum(ens[:6]) + (ens.ryd is not None) + self.cavity(side).photons()
        return total

    def __str__(self) -> str:
        parts = []
        for side in (K, K1):
            occ = ",".join(self.ensemble(side).occupied())
            cav = self.cavity(side)
            mode = "+" if cav.n_plus else ("-" if cav.n_minus else "vac")
            if cav.n_plus and cav.n_minus:
                mode = "+-"
            parts.append(f"E_{SIDE_NAMES[side]}={{{occ}}};C_{SIDE_NAMES[side]}={mode}")
        return ";".join(parts)


def ensemble(*levels: str) -> EnsembleConfig:
    """Build an ensemble configuration from the names of its occupied levels."""
    fields: dict = {}
    for lv in levels:
        if lv in RYDBERG:
            if "ryd" in fields:
                raise ValueError("at most one Rydberg excitation per ensemble")
            fields["ryd"] = lv
        elif lv in METASTABLE:
            fields["occ_" + lv] = 1
        else:
            raise ValueError(f"not an occupiable level: {lv!r}")
    return EnsembleConfig(**fields)


def cavity(mode: str | None = None) -> CavityConfig:
    if mode is None or mode == "vac":
        return CavityConfig()
    if mode in ("+", "plus"):
        return CavityConfig(n_plus=1)
    if mode in ("-", "minus"):
        return CavityConfig(n_minus=1)
    raise ValueError(f"unknown cavity mode {mode!r}")


def label(k: Iterable[str] = (), k1: Iterable[str] = (),
          cav_k: str | None = None, cav_k1: str | None = None) -> BasisLabel:
    """Shorthand for a basis label, e.g. ``label(k=["0R"], cav_k1="-")``."""
    return BasisLabel(ensemble(*k), cavity(cav_k), ensemble(*k1), cavity(cav_k1))


@dataclass(frozen=True)
class Status:
    kind: str = "live"
    side: int | None = None
    cause: str | None = None

    @property
    def live(self) -> bool:
        return self.kind == "live"


LIVE = Status()


def lost(side: int, cause: str) -> Status:
    return Status("lost", side, cause)


class LinkState(NamedTuple):
    """Normalised amplitudes over basis labels plus a trajectory status.

    ``status`` records the first quantum jump that corrupted the trajectory.
    It is bookkeeping only: the state keeps evolving after a jump so that
    later diagnosis pulses can expose the error the way the hardware would.
    """

    amps: tuple[tuple[BasisLabel, complex], ...]
    status: Status = LIVE

    @property
    def amplitudes(self) -> dict[BasisLabel, complex]:
        return dict(self.amps)

    def amplitude(self, lbl: BasisLabel) -> complex:
        for key, amp in self.amps:
            if key == lbl:
                return amp
        return 0j

    def labels(self) -> tuple[BasisLabel, ...]:
        return tuple(key for key, _ in self.amps)

    def norm(self) -> float:
        return math.fsum(abs(a) ** 2 for _, a in self.amps)

    def with_status(self, status: Status) -> "LinkState":
        # the first recorded error wins
        if not self.status.live:
            return self
        return self._replace(status=status)

    def with_phase(self, phase: complex) -> "LinkState":
        return LinkState(tuple((k, a * phase) for k, a in self.amps), self.status)


def state_from(amplitudes: Mapping[BasisLabel, complex] | Sequence[tuple[BasisLabel, complex]],
               normalize: bool = True) -> LinkState:
    items = amplitudes.items() if isinstance(amplitudes, Mapping) else amplitudes
    merged: dict[BasisLabel, complex] = {}
    for key, amp in items:
        merged[key] = merged.get(key, 0j) + complex(amp)
    amps = tuple((k, a) for k, a in merged.items() if a != 0)
    if not amps:
        raise ValueError("state has no support")
    if normalize:
        amps = _renormalize(amps)
    return LinkState(amps)


# Canonical copies of amplitude tuples.  Repeated trajectories then share
# tuple identities, which the memo tables below key on.
_MEMO_LIMIT = 200_000
_interned: dict = {}


def _intern(amps):
    if len(_interned) > _MEMO_LIMIT:
        _clear_memos()
    return _interned.setdefault(amps, amps)


def new_link_state() -> LinkState:
    """Both ensembles all-reservoir, both cavities empty."""
    return LinkState(_intern(((BasisLabel(), 1.0 + 0j),)))


def _renormalize(amps):
    nrm = math.sqrt(math.fsum(abs(a) ** 2 for _, a in amps))
    if nrm == 0.0:
        raise ValueError("cannot renormalise an empty branch")
    return _intern(tuple((k, a / nrm) for k, a in amps))


# --------------------------------------------------------------------------
# pulses


@dataclass(frozen=True)
class PulseSpec:
    """Resonant pulse on one collective transition of one ensemble."""

    ensemble: int
    from_level: str
    to_level: str
    angle: float = math.pi
    uses_cavity_mode: str | None = None

    def __post_init__(self):
        if self.ensemble not in (K, K1):
            raise ValueError(f"ensemble must be {K} or {K1}")
        for lv in (self.from_level, self.to_level):
            if lv not in LEVELS:
                raise ValueError(f"unknown level {lv!r}")
        if self.from_level == self.to_level:
            raise ValueError("pulse must couple two distinct levels")
        if self.uses_cavity_mode is not None:
            if self.uses_cavity_mode not in MODES:
                raise ValueError(f"unknown cavity mode {self.uses_cavity_mode!r}")
            if RESERVOIR not in (self.from_level, self.to_level):
                raise ValueError("a cavity mode can only drive a transition touching the reservoir")
        # pulses key hot memo tables
        object.__setattr__(self, "_hash", hash((self.ensemble, self.from_level, self.to_level,
                                                self.angle, self.uses_cavity_mode)))

    def __hash__(self):
        return self._hash

    @property
    def collective(self) -> bool:
        return RESERVOIR in (self.from_level, self.to_level)

    @property
    def touches_rydberg(self) -> bool:
        return self.from_level in RYDBERG or self.to_level in RYDBERG


def _move(lbl: BasisLabel, side: int, src: str, dst: str, mode: str | None) -> BasisLabel | None:
    """Move one atom ``src -> dst``; None when the move is impossible or blockaded."""
    ens = lbl[2 * side]
    cav = lbl[2 * side + 1]
    if src in RYDBERG:
        if ens.ryd != src:
            return None
        ens = ens._replace(ryd=None)
    elif src != RESERVOIR:
        if not getattr(ens, "occ_" + src):
            return None
        ens = ens._replace(**{"occ_" + src: 0})
    if dst in RYDBERG:
        if ens.ryd is not None:
            return None
        ens = ens._replace(ryd=dst)
    elif dst != RESERVOIR:
        if getattr(ens, "occ_" + dst):
            return None
        ens = ens._replace(**{"occ_" + dst: 1})
    if mode is not None:
        field = "n_" + mode
        n = getattr(cav, field)
        if src == RESERVOIR:  # absorption
            if n == 0:
                return None
            cav = cav._replace(**{field: 0})
        else:  # emission into the mode
            if n:
                raise TruncationError(f"second photon in mode {mode} of cavity {SIDE_NAMES[side]}")
            cav = cav._replace(**{field: 1})
    out = list(lbl)
    out[2 * side] = ens
    out[2 * side + 1] = cav
    return BasisLabel(*out)


def _forward(lbl, p: PulseSpec):
    return _move(lbl, p.ensemble, p.from_level, p.to_level, p.uses_cavity_mode)


def _backward(lbl, p: PulseSpec):
    if p.uses_cavity_mode is not None and p.to_level == RESERVOIR:
        # reverse of an emission is an absorption
        return _move(lbl, p.ensemble, p.to_level, p.from_level, p.uses_cavity_mode)
    if p.uses_cavity_mode is not None and p.from_level == RESERVOIR:
        ens = lbl[2 * p.ensemble]
        if not ens.has(p.to_level):
            return None
        return _move(lbl, p.ensemble, p.to_level, p.from_level, p.uses_cavity_mode)
    return _move(lbl, p.ensemble, p.to_level, p.from_level, None)


def _cos_sin(theta: float) -> tuple[float, float]:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    # exact zeros for pi and 2pi pulses keep supports sparse
    c = 0.0 if abs(c) < 1e-15 else c
    s = 0.0 if abs(s) < 1e-15 else s
    return c, s


@lru_cache(maxsize=4096)
def _as_tuple(pulse) -> tuple[PulseSpec, ...]:
    pulses = (pulse,) if isinstance(pulse, PulseSpec) else tuple(pulse)
    if not pulses:
        raise ValueError("no pulse given")
    first = pulses[0]
    for p in pulses[1:]:
        if (p.ensemble, p.from_level, p.angle) != (first.ensemble, first.from_level, first.angle):
            raise ValueError("simultaneous pulses must share ensemble, source level and area")
    if len({p.to_level for p in pulses}) != len(pulses):
        raise ValueError("simultaneous pulses must address distinct target levels")
    return pulses


@lru_cache(maxsize=65536)
def _column(lbl: BasisLabel, pulses: tuple[PulseSpec, ...]) -> tuple[tuple[BasisLabel, float], ...]:
    """U|lbl> for equal-Rabi pulses sharing one source (a V system).

    The source couples to the bright combination of its reachable targets;
    dark combinations are untouched.  With one pulse this is the plain
    two-level rotation.
    """
    c, s = _cos_sin(pulses[0].angle)
    targets = [t for t in (_forward(lbl, p) for p in pulses) if t is not None]
    root = None
    for p in pulses:
        b = _backward(lbl, p)
        if b is not None:
            root = b
            break
    if targets and root is not None:
        raise RuntimeError(f"label {lbl} is both source and target of one pulse")
    if targets:
        n = len(targets)
        col = [(lbl, c)] + [(t, s / math.sqrt(n)) for t in targets]
    elif root is not None:
        siblings = [t for t in (_forward(root, p) for p in pulses) if t is not None]
        n = len(siblings)
        col = [(root, -s / math.sqrt(n))]
        for t in siblings:
            col.append((t, (1.0 if t == lbl else 0.0) + (c - 1.0) / n))
    else:
        return ((lbl, 1.0),)
    return tuple((k, v) for k, v in col if v != 0.0)


def _evolve_uncached(amps, pulses):
    out: dict[BasisLabel, complex] = {}
    for lbl, amp in amps:
        for key, coeff in _column(lbl, pulses):
            out[key] = out.get(key, 0j) + coeff * amp
    return tuple((k, a) for k, a in out.items() if abs(a) > 1e-15)


# Memo tables keyed on the identity of an amplitude tuple.  Each entry holds a
# reference to its key tuple, so an id cannot be recycled while cached.
_evolve_memo: dict = {}
_ryd_memo: dict = {}
_swap_memo: dict = {}


def _clear_memos():
    for memo in (_interned, _evolve_memo, _ryd_memo, _swap_memo):
        memo.clear()


def _evolve(amps, pulses):
    key = (id(amps), id(pulses))
    hit = _evolve_memo.get(key)
    if hit is not None:
        return hit[1]
    out = _intern(_evolve_uncached(amps, pulses))
    _evolve_memo[key] = (amps, out, pulses)
    return out


def apply_pulse(state: LinkState, pulse: PulseSpec | Sequence[PulseSpec]) -> LinkState:
    """Apply one pulse, or several simultaneous equal-Rabi pulses from one source."""
    if isinstance(pulse, list):
        pulse = tuple(pulse)
    return LinkState(_evolve(state.amps, _as_tuple(pulse)), state.status)


def pulse_matrix(pulse: PulseSpec | Sequence[PulseSpec],
                 basis: Sequence[BasisLabel]) -> tuple[np.ndarray, list[BasisLabel]]:
    """Dense matrix of a pulse on the closure of ``basis`` under the pulse."""
    pulses = _as_tuple(tuple(pulse) if isinstance(pulse, list) else pulse)
    labels = list(dict.fromkeys(basis))
    i = 0
    while i < len(labels):
        for key, _ in _column(labels[i], pulses):
            if key not in labels:
                labels.append(key)
        i += 1
    index = {k: j for j, k in enumerate(labels)}
    mat = np.zeros((len(labels), len(labels)))
    for j, lbl in enumerate(labels):
        for key, coeff in _column(lbl, pulses):
            mat[index[key], j] += coeff
    return mat, labels


# --------------------------------------------------------------------------
# measurements and jumps


def _total_rydberg(amps) -> float:
    hit = _ryd_memo.get(id(amps))
    if hit is not None:
        return hit[1]
    pop = math.fsum(abs(a) ** 2 for lbl, a in amps
                    if lbl.ensemble_k.ryd is not None or lbl.ensemble_k1.ryd is not None)
    _ryd_memo[id(amps)] = (amps, pop)
    return pop


def rydberg_population(state: LinkState, side: int | None = None) -> float:
    """Expected number of Rydberg excitations (on one side or both)."""
    if side is None:
        return _total_rydberg(state.amps)
    return math.fsum(abs(a) ** 2 for lbl, a in state.amps if lbl[2 * side].ryd is not None)


def photon_population(state: LinkState, side: int | None = None) -> float:
    sides = (K, K1) if side is None else (side,)
    return math.fsum(abs(a) ** 2 * lbl[2 * sd + 1].photons() for lbl, a in state.amps for sd in sides)


def level_population(state: LinkState, level: str, side: int) -> float:
    return math.fsum(abs(a) ** 2 for lbl, a in state.amps if lbl[2 * side].has(level))


def _swap_cavities(lbl: BasisLabel) -> BasisLabel:
    return BasisLabel(lbl.ensemble_k, lbl.cavity_k1, lbl.ensemble_k1, lbl.cavity_k)


def transfer_photon(state: LinkState, eta_t: float, rng: np.random.Generator) -> LinkState:
    """Send the cavity-``k`` photon through the fiber to cavity ``k+1``.

    With probability ``(1 - eta_t)`` times the photon-carrying population the
    photon is lost: the trajectory collapses onto one polarisation branch
    (Born weights), the photon is removed and the state is flagged
    ``lost(k+1, fiber)``.  Otherwise the two cavities swap their contents.
    """
    if not 0.0 <= eta_t <= 1.0:
        raise ValueError("eta_t must be a probability")
    for lbl, _ in state.amps:
        if lbl.cavity_k.photons() > 1:
            raise TruncationError("more than one photon in cavity k")
    p_photon = photon_population(state, K)
    p_loss = (1.0 - eta_t) * p_photon
    if p_loss > 0.0 and rng.random() < p_loss:
        return _fiber_loss(state, rng)
    hit = _swap_memo.get(id(state.amps))
    if hit is None:
        hit = _swap_memo[id(state.amps)] = (
            state.amps, _intern(tuple((_swap_cavities(k), a) for k, a in state.amps)))
    return LinkState(hit[1], state.status)


def _fiber_loss(state: LinkState, rng) -> LinkState:
    weights = {m: math.fsum(abs(a) ** 2 for k, a in state.amps if getattr(k.cavity_k, "n_" + m))
               for m in MODES}
    mode = "plus" if rng.random() * (weights["plus"] + weights["minus"]) < weights["plus"] else "minus"
    kept = []
    for lbl, a in state.amps:
        if getattr(lbl.cavity_k, "n_" + mode):
            kept.append((lbl._replace(cavity_k=lbl.cavity_k._replace(**{"n_" + mode: 0})), a))
    new = LinkState(_renormalize(tuple(kept)), state.status)
    return new.with_status(lost(K1, "fiber"))


def apply_decay_channel(state: LinkState, p_decay: float, rng: np.random.Generator) -> LinkState:
    """Spontaneous Rydberg decay to the reservoir as a quantum jump.

    Jumps with probability ``p_decay`` times the total Rydberg population.  The
    decaying level (ensemble and r-/r+/rA) is drawn with Born weights, the
    trajectory is projected onto it and the excitation is removed.  No-jump
    back-action is neglected.
    """
    if not 0.0 <= p_decay <= 1.0:
        raise ValueError("p_decay must lie in [0, 1]")
    pop = _total_rydberg(state.amps)
    if pop == 0.0 or p_decay == 0.0 or rng.random() >= p_decay * pop:
        return state
    channels = {}
    for lbl, a in state.amps:
        for side in (K, K1):
            r = lbl[2 * side].ryd
            if r is not None:
                channels[(side, r)] = channels.get((side, r), 0.0) + abs(a) ** 2
    u = rng.random() * pop
    acc = 0.0
    for (side, r), w in channels.items():
        acc += w
        if u < acc:
            break
    kept = []
    for lbl, a in state.amps:
        ens = lbl[2 * side]
        if ens.ryd == r:
            out = list(lbl)
            out[2 * side] = ens._replace(ryd=None)
            kept.append((BasisLabel(*out), a))
    merged = state_from(kept, normalize=False)
    new = LinkState(_renormalize(merged.amps), state.status)
    return new.with_status(lost(side, "decay"))


def _eject(lbl: BasisLabel, level: str, side: int) -> BasisLabel:
    ens = lbl[2 * side]
    ens = ens._replace(ryd=None) if level in RYDBERG else ens._replace(**{"occ_" + level: 0})
    out = list(lbl)
    out[2 * side] = ens
    return BasisLabel(*out)


def ionize_and_detect(state: LinkState, level: str, ensemble: int, eta_ion: float,
                      rng: np.random.Generator) -> tuple[LinkState, bool]:
    """State-selective ionisation of ``level`` followed by ion detection.

    Born-rule projection on occupied/empty; an ionised atom is ejected.  The
    detector misses an ion with probability ``1 - eta_ion`` and never fires on
    an empty level.
    """
    if level == RESERVOIR or level not in LEVELS:
        raise ValueError(f"cannot ionise level {level!r}")
    if not 0.0 <= eta_ion <= 1.0:
        raise ValueError("eta_ion must be a probability")
    p_occ = level_population(state, level, ensemble)
    if p_occ >= 1.0 - 1e-15:
        occupied = True
    elif p_occ <= 1e-15:
        occupied = False
    else:
        occupied = rng.random() < p_occ
    if occupied:
        kept = tuple((_eject(k, level, ensemble), a) for k, a in state.amps if k[2 * ensemble].has(level))
    else:
        kept = tuple((k, a) for k, a in state.amps if not k[2 * ensemble].has(level))
    new = LinkState(_renormalize(kept), state.status)
    detected = occupied and (eta_ion >= 1.0 or rng.random() < eta_ion)
    return new, detected


def overlap(state: LinkState, reference: LinkState) -> float:
    """|<reference|state>|^2."""
    ref = reference.amplitudes
    inner = sum(ref.get(k, 0j).conjugate() * a for k, a in state.amps)
    return float(min(1.0, abs(inner) ** 2))


def check_invariants(state: LinkState, tol: float = 1e-12) -> None:
    """Raise AssertionError if the state leaves the truncated, blockaded space."""
    for lbl, _ in state.amps:
        for side in (K, K1):
            ens = lbl[2 * side]
            assert all(v in (0, 1) for v in ens[:6]), f"occupation outside {{0,1}}: {lbl}"
            assert ens.ryd is None or ens.ryd in RYDBERG, f"bad Rydberg tag: {lbl}"
            cav = lbl[2 * side + 1]
            assert cav.n_plus in (0, 1) and cav.n_minus in (0, 1), f"photon cap: {lbl}"
            assert cav.photons() <= 1, f"both cavity modes populated: {lbl}"
    assert abs(state.norm() - 1.0) <= tol, f"norm {state.norm()!r}"


def dump_state(state: LinkState) -> str:
    """One line per basis label: ``label,real,imag`` with 17 significant digits."""
    return "".join(f"{k},{a.real:.17g},{a.imag:.17g}\n" for k, a in state.amps)
