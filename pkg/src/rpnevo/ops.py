"""Operator catalogue for the RPN genome language.

Opcode layout (shared with the numba kernels, keep stable):
  0..3   binary operators (add, sub, mul, div)
  4..15  unary operators
  -1     constant; the value lives in the genome's parallel const array
  <= -2  input variable; index k is encoded as -2 - k
"""

from __future__ import annotations

from dataclasses import dataclass

OP_SPECS: tuple[tuple[str, int], ...] = (
    ("add", 2),
    ("sub", 2),
    ("mul", 2),
    ("div", 2),
    ("sq", 1),
    ("sqrt", 1),
    ("inv", 1),
    ("cos", 1),
    ("sin", 1),
    ("tan", 1),
    ("acos", 1),
    ("asin", 1),
    ("atan", 1),
    ("tanh", 1),
    ("log", 1),
    ("exp", 1),
)

OP_NAMES: tuple[str, ...] = tuple(name for name, _ in OP_SPECS)
OP_ARITY: tuple[int, ...] = tuple(arity for _, arity in OP_SPECS)
OP_IDS: dict[str, int] = {name: i for i, (name, _) in enumerate(OP_SPECS)}
N_OPS = len(OP_SPECS)
N_BINARY = 4  # ids [0, N_BINARY) are the binary ops

CODE_CONST = -1


def var_code(index: int) -> int:
    """Opcode for input variable ``x<index>``."""
    return -2 - index


def var_index(code: int) -> int:
    """Inverse of :func:`var_code`."""
    return -2 - code


@dataclass(frozen=True)
class OperatorSet:
    """Subset of the operator catalogue enabled for a run.

    Terminals (input variables and constants) are always available; only
    the operator repertoire is configurable.
    """

    ids: frozenset[int]

    def __post_init__(self) -> None:
        if not self.ids:
            raise ValueError("operator set must not be empty")
        bad = [i for i in self.ids if not 0 <= i < N_OPS]
        if bad:
            raise ValueError(f"unknown operator ids: {bad}")

    @classmethod
    def full(cls) -> "OperatorSet":
        return cls(ids=frozenset(range(N_OPS)))

    @classmethod
    def from_names(cls, names) -> "OperatorSet":
        try:
            return cls(ids=frozenset(OP_IDS[n] for n in names))
        except KeyError as exc:
            raise ValueError(f"unknown operator name: {exc.args[0]!r}") from None

    @property
    def unary(self) -> tuple[int, ...]:
        return tuple(sorted(i for i in self.ids if OP_ARITY[i] == 1))

    @property
    def binary(self) -> tuple[int, ...]:
        return tuple(sorted(i for i in self.ids if OP_ARITY[i] == 2))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(OP_NAMES[i] for i in sorted(self.ids))

    def __contains__(self, op_id: int) -> bool:
        return op_id in self.ids


FULL_SET = OperatorSet.full()
