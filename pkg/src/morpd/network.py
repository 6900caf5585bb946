"""Power-system case model, case-file ingestion, and control handling.

A :class:`NetworkCase` is an immutable snapshot of a transmission network:
buses, branches, generators, tap-changing transformers, and switchable
shunt capacitor banks.  The reactive-dispatch control vector (generator
voltage setpoints, transformer tap steps, capacitor bank counts) is applied
with :func:`apply_controls`, which returns a new case and never mutates the
input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

SLACK, PV, PQ = 0, 1, 2

_KIND_NAMES = {SLACK: "slack", PV: "PV", PQ: "PQ"}


class CaseError(Exception):
    """Base class for case-file problems."""


class CaseParseError(CaseError):
    """Malformed case file; message carries file and line number."""


class CaseValidationError(CaseError):
    """Structurally parsed case violating a model invariant."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: int                # SLACK / PV / PQ
    p_load: float            # MW
    q_load: float            # Mvar
    v_min: float             # p.u., voltage band used for VD and Eq-style limits
    v_max: float
    b_shunt: float = 0.0     # fixed (non-switchable) shunt susceptance, p.u.


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float                 # p.u.
    x: float                 # p.u.
    b_charging: float        # total line charging, p.u.
    s_max: float             # MVA rating; 0 = unrated
    tap: float = 1.0         # off-nominal ratio on the from side
    tap_index: int | None = None   # index into NetworkCase.transformers


@dataclass(frozen=True)
class Generator:
    bus: int
    v_set: float             # current voltage setpoint, p.u.
    p_gen: float             # fixed active output, MW (ignored for slack)
    q_min: float             # Mvar
    q_max: float
    v_min: float             # setpoint bounds, p.u.
    v_max: float


@dataclass(frozen=True)
class Transformer:
    branch: int              # index into NetworkCase.branches
    t_min: float
    t_max: float
    step: float

    @property
    def n_steps(self) -> int:
        return int(round((self.t_max - self.t_min) / self.step))


@dataclass(frozen=True)
class ShuntBank:
    bus: int
    banks_on: int            # current number of switched-in banks
    bank_count: int
    mvar_per_bank: float


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[Generator, ...]
    transformers: tuple[Transformer, ...]
    shunts: tuple[ShuntBank, ...]
    name: str = ""

    def bus_index(self) -> dict[int, int]:
        """Map external bus id -> position in ``buses``."""
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def n_bus(self) -> int:
        return len(self.buses)


@dataclass(frozen=True)
class ControlVector:
    """Hybrid control vector: continuous voltages, integer taps and banks."""

    gen_v: tuple[float, ...]
    tap_steps: tuple[int, ...]
    shunt_banks: tuple[int, ...]

    @property
    def dimension(self) -> int:
        return len(self.gen_v) + len(self.tap_steps) + len(self.shunt_banks)

    def as_array(self) -> np.ndarray:
        """Flatten to the unified real-valued search space."""
        return np.array(
            list(self.gen_v) + list(self.tap_steps) + list(self.shunt_banks),
            dtype=float,
        )


@dataclass(frozen=True)
class Bounds:
    """Per-dimension bounds of the unified control space.

    Dimension order is generator voltages (continuous), transformer tap
    steps, then shunt bank counts; each discrete dimension takes the integer
    values ``0 .. upper``.
    """

    gen_lower: np.ndarray
    gen_upper: np.ndarray
    tap_steps: np.ndarray      # number of steps per transformer (int)
    shunt_banks: np.ndarray    # bank_count per shunt site (int)

    @property
    def n_gen(self) -> int:
        return self.gen_lower.size

    @property
    def n_tap(self) -> int:
        return self.tap_steps.size

    @property
    def n_shunt(self) -> int:
        return self.shunt_banks.size

    @property
    def dimension(self) -> int:
        return self.n_gen + self.n_tap + self.n_shunt

    @property
    def lower(self) -> np.ndarray:
        return np.concatenate(
            [self.gen_lower, np.zeros(self.n_tap), np.zeros(self.n_shunt)]
        )

    @property
    def upper(self) -> np.ndarray:
        return np.concatenate(
            [self.gen_upper, self.tap_steps.astype(float), self.shunt_banks.astype(float)]
        )

    def contains(self, u: ControlVector) -> bool:
        x = u.as_array()
        if x.size != self.dimension:
            return False
        return bool(np.all(x >= self.lower - 1e-9) and np.all(x <= self.upper + 1e-9))

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """Scale each dimension to [0, 1] by its bounds."""
        lo, hi = self.lower, self.upper
        return (np.asarray(x, dtype=float) - lo) / (hi - lo)

    def round_discrete(self, x: np.ndarray, toward: np.ndarray | None = None) -> np.ndarray:
        """Round discrete dims to the nearest step, ties toward ``toward``.

        Continuous dims are clipped to their bounds; discrete dims are
        rounded half-away ties toward the reference vector (the DE target)
        when one is supplied, otherwise downward.
        """
        x = np.array(x, dtype=float)
        np.clip(x, self.lower, self.upper, out=x)
        for j in range(self.n_gen, self.dimension):
            v = x[j]
            lo = math.floor(v)
            frac = v - lo
            if abs(frac - 0.5) < 1e-12:
                if toward is not None and toward[j] > v:
                    k = lo + 1
                else:
                    k = lo
            else:
                k = round(v)
            x[j] = min(max(k, 0.0), self.upper[j])
        return x

    def to_vector(self, x: np.ndarray) -> ControlVector:
        x = self.round_discrete(x)
        ng, nt = self.n_gen, self.n_tap
        return ControlVector(
            gen_v=tuple(float(v) for v in x[:ng]),
            tap_steps=tuple(int(v) for v in x[ng:ng + nt]),
            shunt_banks=tuple(int(v) for v in x[ng + nt:]),
        )


# ---------------------------------------------------------------------------
# Case-file ingestion
# ---------------------------------------------------------------------------

_SECTIONS = ("base_mva", "bus", "branch", "generator", "transformer", "shunt")


def _tokenize(path: Path):
    """Yield (line_number, tokens) for non-empty, non-comment lines."""
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def load_case(path) -> NetworkCase:
    """Parse and validate a case file.

    The format is line oriented: a ``[section]`` header followed by
    whitespace-separated numeric rows, ``#`` starts a comment.  Sections and
    columns:

    * ``[base_mva]`` -- one value, MVA.
    * ``[bus]`` -- id kind p_load q_load v_min v_max [b_shunt];
      kind 0=slack 1=PV 2=PQ; loads in MW/Mvar; b_shunt p.u. (optional).
    * ``[branch]`` -- from to r x b_charging s_max; impedances p.u.,
      b_charging is the total line charging; s_max in MVA, 0 = unrated.
    * ``[generator]`` -- bus v_set p_gen q_min q_max v_min v_max.
    * ``[transformer]`` -- from to tap t_min t_max step; the (from, to) pair
      must match exactly one branch.
    * ``[shunt]`` -- bus banks_on bank_count mvar_per_bank.

    Raises :class:`CaseParseError` for malformed input (with line location)
    and :class:`CaseValidationError` for model-invariant violations.
    """
    path = Path(path)
    if not path.exists():
        raise CaseParseError(f"{path}: no such file")

    rows: dict[str, list[tuple[int, list[str]]]] = {s: [] for s in _SECTIONS}
    section = None
    for lineno, toks in _tokenize(path):
        if toks[0].startswith("["):
            name = " ".join(toks).strip("[]").strip()
            if name not in _SECTIONS:
                raise CaseParseError(f"{path}:{lineno}: unknown section [{name}]")
            section = name
            continue
        if section is None:
            raise CaseParseError(f"{path}:{lineno}: data before any [section] header")
        rows[section].append((lineno, toks))

    def fnum(tok: str, lineno: int, field: str) -> float:
        try:
            return float(tok)
        except ValueError:
            raise CaseParseError(f"{path}:{lineno}: bad number for {field}: {tok!r}") from None

    def inum(tok: str, lineno: int, field: str) -> int:
        v = fnum(tok, lineno, field)
        if v != int(v):
            raise CaseParseError(f"{path}:{lineno}: {field} must be an integer, got {tok!r}")
        return int(v)

    if len(rows["base_mva"]) != 1 or len(rows["base_mva"][0][1]) != 1:
        raise CaseParseError(f"{path}: [base_mva] must contain exactly one value")
    base_mva = fnum(rows["base_mva"][0][1][0], rows["base_mva"][0][0], "base_mva")

    buses = []
    for lineno, toks in rows["bus"]:
        if len(toks) not in (6, 7):
            raise CaseParseError(f"{path}:{lineno}: [bus] row needs 6 or 7 columns")
        buses.append(Bus(
            id=inum(toks[0], lineno, "bus id"),
            kind=inum(toks[1], lineno, "bus kind"),
            p_load=fnum(toks[2], lineno, "p_load"),
            q_load=fnum(toks[3], lineno, "q_load"),
            v_min=fnum(toks[4], lineno, "v_min"),
            v_max=fnum(toks[5], lineno, "v_max"),
            b_shunt=fnum(toks[6], lineno, "b_shunt") if len(toks) == 7 else 0.0,
        ))

    branches = []
    for lineno, toks in rows["branch"]:
        if len(toks) != 6:
            raise CaseParseError(f"{path}:{lineno}: [branch] row needs 6 columns")
        branches.append(Branch(
            from_bus=inum(toks[0], lineno, "from"),
            to_bus=inum(toks[1], lineno, "to"),
            r=fnum(toks[2], lineno, "r"),
            x=fnum(toks[3], lineno, "x"),
            b_charging=fnum(toks[4], lineno, "b_charging"),
            s_max=fnum(toks[5], lineno, "s_max"),
        ))

    generators = []
    for lineno, toks in rows["generator"]:
        if len(toks) != 7:
            raise CaseParseError(f"{path}:{lineno}: [generator] row needs 7 columns")
        generators.append(Generator(
            bus=inum(toks[0], lineno, "gen bus"),
            v_set=fnum(toks[1], lineno, "v_set"),
            p_gen=fnum(toks[2], lineno, "p_gen"),
            q_min=fnum(toks[3], lineno, "q_min"),
            q_max=fnum(toks[4], lineno, "q_max"),
            v_min=fnum(toks[5], lineno, "v_min"),
            v_max=fnum(toks[6], lineno, "v_max"),
        ))

    transformers = []
    branch_lookup: dict[tuple[int, int], int] = {}
    for i, br in enumerate(branches):
        key = (br.from_bus, br.to_bus)
        # parallel branches: keep the first; transformer rows may not refer
        # to a duplicated pair
        branch_lookup.setdefault(key, i)
    dup_pairs = {
        key for key in branch_lookup
        if sum(1 for br in branches if (br.from_bus, br.to_bus) == key) > 1
    }
    xf_rows = []
    for lineno, toks in rows["transformer"]:
        if len(toks) != 6:
            raise CaseParseError(f"{path}:{lineno}: [transformer] row needs 6 columns")
        f = inum(toks[0], lineno, "from")
        t = inum(toks[1], lineno, "to")
        key = (f, t)
        if key in dup_pairs:
            raise CaseParseError(
                f"{path}:{lineno}: transformer on duplicated branch pair {f}-{t}"
            )
        if key not in branch_lookup:
            raise CaseParseError(f"{path}:{lineno}: transformer references no branch {f}-{t}")
        xf_rows.append((
            branch_lookup[key],
            fnum(toks[2], lineno, "tap"),
            fnum(toks[3], lineno, "t_min"),
            fnum(toks[4], lineno, "t_max"),
            fnum(toks[5], lineno, "step"),
        ))

    for k, (bi, tap, tmin, tmax, step) in enumerate(xf_rows):
        transformers.append(Transformer(branch=bi, t_min=tmin, t_max=tmax, step=step))
        branches[bi] = replace(branches[bi], tap=tap, tap_index=k)

    shunts = []
    for lineno, toks in rows["shunt"]:
        if len(toks) != 4:
            raise CaseParseError(f"{path}:{lineno}: [shunt] row needs 4 columns")
        shunts.append(ShuntBank(
            bus=inum(toks[0], lineno, "shunt bus"),
            banks_on=inum(toks[1], lineno, "banks_on"),
            bank_count=inum(toks[2], lineno, "bank_count"),
            mvar_per_bank=fnum(toks[3], lineno, "mvar_per_bank"),
        ))

    case = NetworkCase(
        base_mva=base_mva,
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(generators),
        transformers=tuple(transformers),
        shunts=tuple(shunts),
        name=path.stem,
    )
    validate_case(case)
    return case


def validate_case(case: NetworkCase) -> None:
    """Check every model invariant; raise CaseValidationError on the first hit."""
    if case.base_mva <= 0:
        raise CaseValidationError("base_mva must be positive")

    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("duplicate bus ids")
    idx = case.bus_index()

    slacks = [b for b in case.buses if b.kind == SLACK]
    if len(slacks) != 1:
        raise CaseValidationError(f"exactly one slack bus required, found {len(slacks)}")
    for b in case.buses:
        if b.kind not in _KIND_NAMES:
            raise CaseValidationError(f"bus {b.id}: unknown kind {b.kind}")
        if not b.v_min < b.v_max:
            raise CaseValidationError(f"bus {b.id}: v_min must be < v_max")

    for i, br in enumerate(case.branches):
        if br.from_bus == br.to_bus:
            raise CaseValidationError(f"branch {i + 1}: from_bus equals to_bus")
        if br.from_bus not in idx or br.to_bus not in idx:
            raise CaseValidationError(f"branch {i + 1}: endpoint bus not in case")
        if br.x == 0.0:
            raise CaseValidationError(f"branch {i + 1}: zero series reactance")
        if br.s_max < 0:
            raise CaseValidationError(f"branch {i + 1}: negative rating")

    gen_buses = set()
    for g in case.generators:
        if g.bus not in idx:
            raise CaseValidationError(f"generator at bus {g.bus}: bus not in case")
        if case.buses[idx[g.bus]].kind not in (SLACK, PV):
            raise CaseValidationError(f"generator at bus {g.bus}: bus is not slack or PV")
        if g.bus in gen_buses:
            raise CaseValidationError(f"generator at bus {g.bus}: duplicate generator")
        gen_buses.add(g.bus)
        if not g.q_min < g.q_max:
            raise CaseValidationError(f"generator at bus {g.bus}: q_min must be < q_max")
        if not g.v_min < g.v_max:
            raise CaseValidationError(f"generator at bus {g.bus}: v_min must be < v_max")
    for b in case.buses:
        if b.kind in (SLACK, PV) and b.id not in gen_buses:
            raise CaseValidationError(f"bus {b.id} is {_KIND_NAMES[b.kind]} but has no generator")

    for k, tr in enumerate(case.transformers):
        if not 0 <= tr.branch < len(case.branches):
            raise CaseValidationError(f"transformer {k + 1}: branch index out of range")
        if not tr.t_min < tr.t_max:
            raise CaseValidationError(f"transformer {k + 1}: t_min must be < t_max")
        if tr.step <= 0:
            raise CaseValidationError(f"transformer {k + 1}: step must be positive")
        n = (tr.t_max - tr.t_min) / tr.step
        if abs(n - round(n)) > 1e-9:
            raise CaseValidationError(
                f"transformer {k + 1}: tap range is not an integer number of steps"
            )
        br = case.branches[tr.branch]
        if br.tap_index != k:
            raise CaseValidationError(f"transformer {k + 1}: branch back-reference broken")
        steps = (br.tap - tr.t_min) / tr.step
        if abs(steps - round(steps)) > 1e-6 or not (
            tr.t_min - 1e-9 <= br.tap <= tr.t_max + 1e-9
        ):
            raise CaseValidationError(
                f"transformer {k + 1}: current tap {br.tap} not on the step grid"
            )

    shunt_buses = set()
    for s in case.shunts:
        if s.bus not in idx:
            raise CaseValidationError(f"shunt at bus {s.bus}: bus not in case")
        if s.bus in shunt_buses:
            raise CaseValidationError(f"shunt at bus {s.bus}: duplicate shunt site")
        shunt_buses.add(s.bus)
        if s.bank_count < 1:
            raise CaseValidationError(f"shunt at bus {s.bus}: bank_count must be >= 1")
        if s.mvar_per_bank <= 0:
            raise CaseValidationError(f"shunt at bus {s.bus}: mvar_per_bank must be > 0")
        if not 0 <= s.banks_on <= s.bank_count:
            raise CaseValidationError(f"shunt at bus {s.bus}: banks_on out of range")

    _check_connected(case, idx)


def _check_connected(case: NetworkCase, idx: dict[int, int]) -> None:
    n = case.n_bus
    if n == 0:
        raise CaseValidationError("case has no buses")
    adj: list[list[int]] = [[] for _ in range(n)]
    for br in case.branches:
        f, t = idx[br.from_bus], idx[br.to_bus]
        adj[f].append(t)
        adj[t].append(f)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not all(seen):
        missing = [case.buses[i].id for i, s in enumerate(seen) if not s]
        raise CaseValidationError(f"network graph is not connected; isolated buses {missing}")


# ---------------------------------------------------------------------------
# Control handling
# ---------------------------------------------------------------------------

def control_bounds(case: NetworkCase) -> Bounds:
    """Bounds of the unified control space for ``case``."""
    return Bounds(
        gen_lower=np.array([g.v_min for g in case.generators]),
        gen_upper=np.array([g.v_max for g in case.generators]),
        tap_steps=np.array([t.n_steps for t in case.transformers], dtype=int),
        shunt_banks=np.array([s.bank_count for s in case.shunts], dtype=int),
    )


def current_controls(case: NetworkCase) -> ControlVector:
    """Read the control vector currently stored in the case."""
    taps = []
    for tr in case.transformers:
        tap = case.branches[tr.branch].tap
        taps.append(int(round((tap - tr.t_min) / tr.step)))
    return ControlVector(
        gen_v=tuple(g.v_set for g in case.generators),
        tap_steps=tuple(taps),
        shunt_banks=tuple(s.banks_on for s in case.shunts),
    )


def apply_controls(case: NetworkCase, u: ControlVector) -> NetworkCase:
    """Return a copy of ``case`` with the control vector ``u`` substituted.

    Raises ValueError naming the offending element when ``u`` is out of
    bounds or of the wrong shape.  The input case is never modified.
    """
    if len(u.gen_v) != len(case.generators):
        raise ValueError(f"gen_v has {len(u.gen_v)} entries, case has {len(case.generators)}")
    if len(u.tap_steps) != len(case.transformers):
        raise ValueError(
            f"tap_steps has {len(u.tap_steps)} entries, case has {len(case.transformers)}"
        )
    if len(u.shunt_banks) != len(case.shunts):
        raise ValueError(
            f"shunt_banks has {len(u.shunt_banks)} entries, case has {len(case.shunts)}"
        )

    generators = []
    for i, (g, v) in enumerate(zip(case.generators, u.gen_v)):
        if not g.v_min - 1e-9 <= v <= g.v_max + 1e-9:
            raise ValueError(f"gen_v[{i}] = {v} outside [{g.v_min}, {g.v_max}]")
        generators.append(replace(g, v_set=float(v)))

    branches = list(case.branches)
    for k, (tr, step) in enumerate(zip(case.transformers, u.tap_steps)):
        if not 0 <= step <= tr.n_steps:
            raise ValueError(f"tap_steps[{k}] = {step} outside 0..{tr.n_steps}")
        branches[tr.branch] = replace(branches[tr.branch], tap=tr.t_min + step * tr.step)

    shunts = []
    for k, (s, banks) in enumerate(zip(case.shunts, u.shunt_banks)):
        if not 0 <= banks <= s.bank_count:
            raise ValueError(f"shunt_banks[{k}] = {banks} outside 0..{s.bank_count}")
        shunts.append(replace(s, banks_on=int(banks)))

    return replace(
        case,
        generators=tuple(generators),
        branches=tuple(branches),
        shunts=tuple(shunts),
    )
