"""Toy prefix-free machines with exactly computable complexity and universal mass.

Program format (bits are ASCII '0'/'1'):

    LITERAL  mode, code(l + 1), l payload bits             -> payload
    REPEAT   mode, code(k), code(l + 1), l block bits      -> block * k   (k >= 1, l >= 1)

U1 uses mode '0' for LITERAL and Elias-gamma codes. U2 swaps the mode bit and
uses Elias-delta codes. U0 is U1 with trailing bits tolerated, so every
extension of a program is again a program; it is deliberately not prefix-free.

These decoders are not Turing-complete. That is what makes K and the mass
computable here: `toy_complexity` is a closed form, and the exhaustive
enumerators below check it.
"""
import enum
import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from scipy import stats

from prime_lab.errors import (
    CapacityError,
    IncompleteProgramError,
    InvalidArgumentError,
    NotAProgramError,
    UnsupportedMachineError,
)

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

MAX_CUTOFF = 26
MAX_INVARIANCE_LEN = 14


class MachineId(enum.Enum):
    U0 = "u0"
    U1 = "u1"
    U2 = "u2"


class IntegerCode(enum.Enum):
    GAMMA = "gamma"
    DELTA = "delta"


@dataclass(frozen=True)
class MachineSpec:
    id: MachineId
    description: str
    code: IntegerCode
    literal_bit: str
    prefix_free: bool


MACHINES: Dict[MachineId, MachineSpec] = {
    MachineId.U1: MachineSpec(MachineId.U1, "mode 0=LITERAL, 1=REPEAT; Elias-gamma fields", IntegerCode.GAMMA, "0", True),
    MachineId.U2: MachineSpec(MachineId.U2, "mode 1=LITERAL, 0=REPEAT; Elias-delta fields", IntegerCode.DELTA, "1", True),
    MachineId.U0: MachineSpec(MachineId.U0, "U1 decoder, trailing bits ignored", IntegerCode.GAMMA, "0", False),
}


def get_machine(name) -> MachineSpec:
    if isinstance(name, MachineSpec):
        return name
    try:
        return MACHINES[MachineId(str(name).lower())]
    except ValueError:
        raise InvalidArgumentError(f"unknown machine {name!r}; expected one of u0, u1, u2")


@dataclass(frozen=True)
class DecodeResult:
    output: str
    consumed: int


@dataclass(frozen=True)
class ToyProgram:
    bits: str
    machine: MachineSpec
    decode: Optional[DecodeResult]
    error: Optional[str] = None


@dataclass(frozen=True)
class UniversalMassEstimate:
    machine: MachineSpec
    cutoff_L: int
    numerators: Mapping[str, int]

    def mass(self, x: str) -> Fraction:
        return Fraction(self.numerators.get(x, 0), 1 << self.cutoff_L)

    def total_numerator(self) -> int:
        return sum(self.numerators.values())

    def total(self) -> Fraction:
        return Fraction(self.total_numerator(), 1 << self.cutoff_L)

    def satisfies_kraft(self) -> bool:
        return self.total_numerator() <= 1 << self.cutoff_L

    def rows(self) -> List[Tuple[str, int, int, float]]:
        """(output, numerator, log2 denominator, float mass), heaviest first."""
        ordered = sorted(self.numerators.items(), key=lambda item: (-item[1], len(item[0]), item[0]))
        return [(x, num, self.cutoff_L, num / (1 << self.cutoff_L)) for x, num in ordered]


@dataclass(frozen=True)
class InvarianceReport:
    n_max: int
    per_x_gap: Mapping[str, int]
    gap_by_length: Tuple[int, ...]
    c_measured: int


@dataclass(frozen=True)
class DivergenceSum:
    value: Fraction
    reached: bool
    shortest: Optional[int] = None


def _check_bits(bits: str) -> None:
    if any(b not in "01" for b in bits):
        raise InvalidArgumentError(f"bitstring may only contain '0' and '1': {bits!r}")


def _check_cutoff(cutoff: int) -> None:
    if cutoff < 0:
        raise InvalidArgumentError(f"cutoff must be >= 0, got {cutoff}")
    if cutoff > MAX_CUTOFF:
        raise CapacityError(f"cutoff {cutoff} exceeds enumeration bound {MAX_CUTOFF}")


##############################################################################
## Elias codes
##############################################################################
def elias_gamma(m: int) -> str:
    if m < 1:
        raise InvalidArgumentError(f"Elias codes need m >= 1, got {m}")
    binary = format(m, "b")
    return "0" * (len(binary) - 1) + binary


def elias_delta(m: int) -> str:
    if m < 1:
        raise InvalidArgumentError(f"Elias codes need m >= 1, got {m}")
    binary = format(m, "b")
    return elias_gamma(len(binary)) + binary[1:]


def gamma_length(m: int) -> int:
    return 2 * (m.bit_length() - 1) + 1


def delta_length(m: int) -> int:
    width = m.bit_length()
    return gamma_length(width) + width - 1


def encode_int(code: IntegerCode, m: int) -> str:
    return elias_gamma(m) if code is IntegerCode.GAMMA else elias_delta(m)


def code_length(code: IntegerCode, m: int) -> int:
    return gamma_length(m) if code is IntegerCode.GAMMA else delta_length(m)


##############################################################################
## Streaming decoder
##
## A parse state is a plain tuple so the enumerators can branch on it without
## copying: (stage, reader, k, remaining, out). `reader` tracks an integer
## field in flight: (phase, zeros, left, value).
##############################################################################
_MODE, _LIT_LEN, _LIT_BODY, _REP_COUNT, _REP_LEN, _REP_BODY, _DONE, _INVALID = range(8)
_READER0 = (0, 0, 0, 0)
_START = (_MODE, None, 0, 0, "")


def _read_int(code: IntegerCode, reader, bit: str):
    """Advance an integer reader by one bit. Returns (reader, value or None)."""
    phase, zeros, left, value = reader
    one = bit == "1"
    if phase == 0:
        if not one:
            return (0, zeros + 1, 0, 0), None
        if zeros == 0:
            return _finish_gamma(code, 1)
        return (1, zeros, zeros, 1), None
    if phase == 1:
        value = 2 * value + one
        if left == 1:
            return _finish_gamma(code, value)
        return (1, zeros, left - 1, value), None
    value = 2 * value + one
    if left == 1:
        return None, value
    return (2, 0, left - 1, value), None


def _finish_gamma(code: IntegerCode, value: int):
    if code is IntegerCode.GAMMA or value == 1:
        return None, value
    # delta: the gamma part gave the bit width; the leading 1 is implicit
    return (2, 0, value - 1, 1), None


def _reader_floor(code: IntegerCode, reader) -> int:
    """Smallest value the integer field in flight can still decode to."""
    phase, zeros, left, value = reader
    if phase == 2:
        return value << left
    width_floor = 1 << zeros if phase == 0 else value << left
    if code is IntegerCode.GAMMA:
        return width_floor
    return 1 << (width_floor - 1)


def _step(machine: MachineSpec, state, bit: str):
    stage, reader, k, remaining, out = state
    if stage == _MODE:
        nxt = _LIT_LEN if bit == machine.literal_bit else _REP_COUNT
        return (nxt, _READER0, 0, 0, "")
    if stage == _LIT_LEN:
        reader, value = _read_int(machine.code, reader, bit)
        if value is None:
            return (_LIT_LEN, reader, 0, 0, "")
        if value == 1:
            return (_DONE, None, 0, 0, "")
        return (_LIT_BODY, None, 0, value - 1, "")
    if stage == _LIT_BODY:
        out += bit
        if remaining == 1:
            return (_DONE, None, 0, 0, out)
        return (_LIT_BODY, None, 0, remaining - 1, out)
    if stage == _REP_COUNT:
        reader, value = _read_int(machine.code, reader, bit)
        if value is None:
            return (_REP_COUNT, reader, 0, 0, "")
        return (_REP_LEN, _READER0, value, 0, "")
    if stage == _REP_LEN:
        reader, value = _read_int(machine.code, reader, bit)
        if value is None:
            return (_REP_LEN, reader, k, 0, "")
        if value == 1:
            return (_INVALID, None, k, 0, "")
        return (_REP_BODY, None, k, value - 1, "")
    if stage == _REP_BODY:
        out += bit
        if remaining == 1:
            return (_DONE, None, k, 0, out * k)
        return (_REP_BODY, None, k, remaining - 1, out)
    raise AssertionError(f"no transition out of terminal stage {stage}")


def decode(machine, bits: str) -> DecodeResult:
    machine = get_machine(machine)
    _check_bits(bits)
    state = _START
    for i, bit in enumerate(bits):
        state = _step(machine, state, bit)
        if state[0] == _INVALID:
            raise NotAProgramError(f"REPEAT block of length 0 at bit {i}", bits)
        if state[0] == _DONE:
            consumed = i + 1
            if consumed < len(bits) and machine.prefix_free:
                raise NotAProgramError(f"{len(bits) - consumed} trailing bits after a complete program", bits)
            return DecodeResult(output=state[4], consumed=consumed)
    raise IncompleteProgramError(f"bitstring of length {len(bits)} ends mid-field", bits)


def inspect_program(machine, bits: str) -> ToyProgram:
    machine = get_machine(machine)
    try:
        return ToyProgram(bits, machine, decode(machine, bits))
    except (IncompleteProgramError, NotAProgramError) as e:
        return ToyProgram(bits, machine, None, str(e))


##############################################################################
## Exhaustive enumeration
##############################################################################
def _target_allows(machine: MachineSpec, state, target: str) -> bool:
    """False when no completion of `state` can output `target`."""
    stage, reader, k, remaining, out = state
    n = len(target)
    if stage == _LIT_LEN:
        return _reader_floor(machine.code, reader) <= n + 1
    if stage == _LIT_BODY:
        return remaining + len(out) == n and target.startswith(out)
    if stage == _REP_COUNT:
        return n >= 1 and _reader_floor(machine.code, reader) <= n
    if stage == _REP_LEN:
        return n % k == 0 and _reader_floor(machine.code, reader) <= n // k + 1
    if stage == _REP_BODY:
        return (remaining + len(out)) * k == n and target.startswith(out)
    if stage == _DONE:
        return out == target
    return stage == _MODE


def walk_programs(machine, cutoff: int, target: Optional[str] = None, root: str = "") -> Iterator[Tuple[str, str]]:
    """Yield every (program, output) with |program| <= cutoff whose bits start with `root`.

    Depth-first over bitstrings; a branch is abandoned only when the decoder
    proves no extension can be a (matching) program. For U0, extensions of a
    complete program are yielded too.
    """
    machine = get_machine(machine)
    _check_cutoff(cutoff)
    state = _START
    for bit in root:
        if state[0] == _DONE:
            if machine.prefix_free:
                return
            continue
        state = _step(machine, state, bit)
        if state[0] == _INVALID:
            return

    stack = [(root, state)]
    while stack:
        bits, state = stack.pop()
        stage = state[0]
        if target is not None and not _target_allows(machine, state, target):
            continue
        if stage == _DONE:
            yield bits, state[4]
            if machine.prefix_free:
                continue
        if len(bits) >= cutoff:
            continue
        for bit in "10":
            nxt = state if stage == _DONE else _step(machine, state, bit)
            if nxt[0] != _INVALID:
                stack.append((bits + bit, nxt))


def shortest_lengths(machine, cutoff: int) -> Dict[str, int]:
    """Exhaustive table output -> shortest program length, over all programs of length <= cutoff."""
    best: Dict[str, int] = {}
    for bits, out in walk_programs(machine, cutoff):
        if out not in best or len(bits) < best[out]:
            best[out] = len(bits)
    return best


def toy_complexity_bruteforce(machine, x: str, cutoff_L: int) -> Optional[int]:
    _check_bits(x)
    lengths = [len(bits) for bits, _ in walk_programs(machine, cutoff_L, target=x)]
    return min(lengths) if lengths else None


def check_prefix_free(machine, max_len: int = 16) -> bool:
    """Run `decode` on every bitstring of length <= max_len; False if one program extends another."""
    machine = get_machine(machine)
    valid = set()
    for n in range(max_len + 1):
        for bits in _all_bitstrings(n):
            try:
                decode(machine, bits)
            except (IncompleteProgramError, NotAProgramError):
                continue
            for cut in range(n):
                if bits[:cut] in valid:
                    logger.warning(f"{machine.id.value}: program {bits} extends program {bits[:cut]}")
                    return False
            valid.add(bits)
    logger.info(f"{machine.id.value}: {len(valid)} programs of length <= {max_len}, none extends another")
    return True


##############################################################################
## Closed-form complexity
##############################################################################
def _require_prefix_free(machine: MachineSpec) -> None:
    if not machine.prefix_free:
        raise UnsupportedMachineError(f"{machine.id.value} is not prefix-free; K is not defined on it here")


def _repeat_factorizations(x: str) -> Iterator[Tuple[int, str]]:
    n = len(x)
    for size in range(1, n + 1):
        if n % size == 0 and x == x[:size] * (n // size):
            yield n // size, x[:size]


def toy_complexity(machine, x: str) -> int:
    machine = get_machine(machine)
    _require_prefix_free(machine)
    _check_bits(x)
    c = machine.code
    best = 1 + code_length(c, len(x) + 1) + len(x)
    for k, block in _repeat_factorizations(x):
        best = min(best, 1 + code_length(c, k) + code_length(c, len(block) + 1) + len(block))
    return best


def programs_for(machine, x: str) -> List[str]:
    """Every program of `machine` (U0: every minimal program) whose output is x, shortest first."""
    machine = get_machine(machine)
    _check_bits(x)
    c = machine.code
    repeat_bit = "1" if machine.literal_bit == "0" else "0"
    programs = [machine.literal_bit + encode_int(c, len(x) + 1) + x]
    for k, block in _repeat_factorizations(x):
        programs.append(repeat_bit + encode_int(c, k) + encode_int(c, len(block) + 1) + block)
    return sorted(programs, key=lambda p: (len(p), p))


def shortest_program(machine, x: str) -> str:
    machine = get_machine(machine)
    _require_prefix_free(machine)
    return programs_for(machine, x)[0]


##############################################################################
## Universal mass
##############################################################################
def _all_bitstrings(n: int) -> Iterator[str]:
    return ("".join(bits) for bits in itertools.product("01", repeat=n))


def _mass_partition(args) -> Counter:
    """Mass numerators of one work unit: a LITERAL length, or a REPEAT count k."""
    machine_id, cutoff, mode, value = args
    machine = MACHINES[machine_id]
    c = machine.code
    numerators: Counter = Counter()

    def add(output: str, length: int) -> None:
        if machine.prefix_free:
            numerators[output] += 1 << (cutoff - length)
        else:
            # U0: each of the 2^j extensions by j bits carries 2^-(length + j)
            numerators[output] += (cutoff - length + 1) << (cutoff - length)

    if mode == "literal":
        ell = value
        length = 1 + code_length(c, ell + 1) + ell
        for payload in _all_bitstrings(ell):
            add(payload, length)
        return numerators

    k = value
    ell = 1
    while 1 + code_length(c, k) + code_length(c, ell + 1) + ell <= cutoff:
        length = 1 + code_length(c, k) + code_length(c, ell + 1) + ell
        for block in _all_bitstrings(ell):
            add(block * k, length)
        ell += 1
    return numerators


def _mass_units(machine: MachineSpec, cutoff: int) -> List[Tuple]:
    c = machine.code
    units = []
    ell = 0
    while 1 + code_length(c, ell + 1) + ell <= cutoff:
        units.append((machine.id, cutoff, "literal", ell))
        ell += 1
    k = 1
    while 1 + code_length(c, k) + code_length(c, 2) + 1 <= cutoff:
        units.append((machine.id, cutoff, "repeat", k))
        k += 1
    return units


def enumerate_mass(machine, cutoff_L: int, workers: int = 1) -> UniversalMassEstimate:
    """Exact dyadic mass of every output over all programs of length <= cutoff_L.

    Work is split into independent units (one per LITERAL length, one per
    REPEAT count); merging integer numerators is exact and order-free.
    """
    machine = get_machine(machine)
    _check_cutoff(cutoff_L)
    units = _mass_units(machine, cutoff_L)
    total: Counter = Counter()
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            for part in executor.map(_mass_partition, units):
                total.update(part)
    else:
        for unit in units:
            total.update(_mass_partition(unit))
    logger.info(f"{machine.id.value} L={cutoff_L}: {len(units)} partitions, {len(total)} distinct outputs")
    return UniversalMassEstimate(machine, cutoff_L, MappingProxyType(dict(total)))


def kraft_total(machine, cutoff_L: int) -> Fraction:
    return enumerate_mass(machine, cutoff_L).total()


def divergence_partial_sum(x: str, cutoff_L: int) -> DivergenceSum:
    """Sum of 2^-|p| over all U0 programs of length <= cutoff_L that output x."""
    _check_cutoff(cutoff_L)
    total = Fraction(0)
    lengths = [len(p) for p in programs_for(MACHINES[MachineId.U0], x) if len(p) <= cutoff_L]
    for m in lengths:
        total += Fraction(cutoff_L - m + 1, 1 << m)
    if not lengths:
        logger.warning(f"no U0 program of length <= {cutoff_L} outputs {x!r}")
        return DivergenceSum(Fraction(0), reached=False)
    return DivergenceSum(total, reached=True, shortest=min(lengths))


##############################################################################
## Invariance and the coding-theorem correlate
##############################################################################
def invariance_gap(n_max: int) -> InvarianceReport:
    if n_max < 0:
        raise InvalidArgumentError(f"n_max must be >= 0, got {n_max}")
    if n_max > MAX_INVARIANCE_LEN:
        raise CapacityError(f"n_max {n_max} exceeds {MAX_INVARIANCE_LEN}")
    u1, u2 = MACHINES[MachineId.U1], MACHINES[MachineId.U2]
    gaps: Dict[str, int] = {}
    by_length = []
    for n in range(n_max + 1):
        worst = 0
        for x in _all_bitstrings(n):
            gap = abs(toy_complexity(u1, x) - toy_complexity(u2, x))
            gaps[x] = gap
            worst = max(worst, gap)
        by_length.append(worst)
    c_measured = max(by_length)
    logger.info(f"Invariance gap up to |x|={n_max}: c={c_measured}, by length {by_length}")
    return InvarianceReport(n_max, MappingProxyType(gaps), tuple(by_length), c_measured)


def coding_theorem_correlation(machine="u1", max_len: int = 10, cutoff_L: int = 22) -> float:
    """Spearman correlation between K(x) and -log2 mass(x) over all x with |x| <= max_len."""
    machine = get_machine(machine)
    estimate = enumerate_mass(machine, cutoff_L)
    ks, surprisal = [], []
    for n in range(max_len + 1):
        for x in _all_bitstrings(n):
            numerator = estimate.numerators.get(x, 0)
            if numerator == 0:
                continue
            ks.append(toy_complexity(machine, x))
            surprisal.append(cutoff_L - math.log2(numerator))
    rho, _ = stats.spearmanr(ks, surprisal)
    return float(rho)
