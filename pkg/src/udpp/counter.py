"""Two-counter machines: instructions, deterministic stepping, goto resolution.

Instructions are 1-based. The zero branch of a decrement jumps without
touching the counters; all other instructions advance the program counter
by one, except goto which jumps unconditionally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .core import UdppError

COUNTER_NAMES = ("x", "y")


class GotoCycle(UdppError):
    """A chain of goto instructions revisits an index and can never leave."""


class OutOfRange(UdppError):
    """An instruction index falls outside the machine."""


@dataclass(frozen=True)
class Inc:
    counter: str


@dataclass(frozen=True)
class Dec:
    counter: str
    target: int


@dataclass(frozen=True)
class Goto:
    target: int


@dataclass(frozen=True)
class Halt:
    pass


Instr = Union[Inc, Dec, Goto, Halt]


@dataclass(frozen=True)
class CounterMachine:
    instrs: tuple[Instr, ...]

    def __len__(self) -> int:
        return len(self.instrs)


@dataclass(frozen=True)
class CmConfig:
    """Machine snapshot: program counter and both counter values."""

    pc: int
    x: int
    y: int

    def counter(self, name: str) -> int:
        return self.x if name == "x" else self.y

    def __str__(self) -> str:
        return f"pc={self.pc} x={self.x} y={self.y}"


def validate_machine(machine: CounterMachine) -> list[str]:
    """Diagnostics; empty when the machine is runnable from (1, 0, 0)."""
    problems: list[str] = []
    n = len(machine.instrs)
    if n == 0:
        return ["machine has no instructions"]
    for index, ins in enumerate(machine.instrs, 1):
        if isinstance(ins, (Inc, Dec)) and ins.counter not in COUNTER_NAMES:
            problems.append(f"instruction {index}: unknown counter '{ins.counter}'")
        target = getattr(ins, "target", None)
        if target is not None and not 1 <= target <= n:
            problems.append(f"instruction {index}: target {target} is out of range 1..{n}")
    if isinstance(machine.instrs[-1], (Inc, Dec)):
        # Inc always falls through; Dec falls through on its nonzero branch.
        problems.append(f"instruction {n}: execution can run past the end; finish with halt or goto")
    return problems


def cm_step(machine: CounterMachine, config: CmConfig) -> CmConfig | None:
    """One step of the machine; None when the current instruction is halt."""
    ins = machine.instrs[config.pc - 1]
    if isinstance(ins, Halt):
        return None
    if isinstance(ins, Inc):
        if ins.counter == "x":
            return CmConfig(config.pc + 1, config.x + 1, config.y)
        return CmConfig(config.pc + 1, config.x, config.y + 1)
    if isinstance(ins, Dec):
        value = config.counter(ins.counter)
        if value == 0:
            return CmConfig(ins.target, config.x, config.y)
        if ins.counter == "x":
            return CmConfig(config.pc + 1, config.x - 1, config.y)
        return CmConfig(config.pc + 1, config.x, config.y - 1)
    return CmConfig(ins.target, config.x, config.y)


@dataclass(frozen=True)
class CmRunResult:
    """Outcome of a bounded run from (1, 0, 0)."""

    halted: bool
    steps: int
    final: CmConfig


def cm_run(machine: CounterMachine, max_steps: int) -> CmRunResult:
    """Run from (1, 0, 0) for at most max_steps steps."""
    current = CmConfig(1, 0, 0)
    taken = 0
    while True:
        if isinstance(machine.instrs[current.pc - 1], Halt):
            return CmRunResult(True, taken, current)
        if taken == max_steps:
            return CmRunResult(False, taken, current)
        following = cm_step(machine, current)
        assert following is not None
        current = following
        taken += 1


def resolve_index(machine: CounterMachine, index: int) -> int:
    """Follow goto chains from index to the first non-goto instruction."""
    n = len(machine.instrs)
    seen: set[int] = set()
    j = index
    while True:
        if not 1 <= j <= n:
            raise OutOfRange(f"instruction index {j} is out of range 1..{n}")
        ins = machine.instrs[j - 1]
        if not isinstance(ins, Goto):
            return j
        if j in seen:
            raise GotoCycle(f"goto chain from {index} revisits instruction {j}")
        seen.add(j)
        j = ins.target


def next_instr(machine: CounterMachine, m: int) -> int:
    """Index of the instruction executed after m, with gotos shortcut away.

    Raises :class:`OutOfRange` when m is the last instruction (nothing
    follows) and :class:`GotoCycle` when the chase loops; a pure goto loop
    can never halt, so callers reject such machines up front.
    """
    if not 1 <= m <= len(machine.instrs):
        raise OutOfRange(f"instruction index {m} is out of range 1..{len(machine.instrs)}")
    return resolve_index(machine, m + 1)
