"""Stack-based linear genomes and their operators.

A genome is a flat postfix (RPN) token sequence evaluated against a value
stack: variables and constants push, unary operators rewrite the top of the
stack, binary operators consume two values and push one. A genome is *viable*
when the scan never underflows the stack and ends with exactly one value;
every public constructor and mutation operator here guarantees viability, so
downstream evaluation needs no error paths.

Arithmetic follows IEEE semantics end to end: division by zero, logs of
non-positive values, square roots of negatives and inverse trig outside
[-1, 1] yield NaN/inf, and those values propagate through later tokens.
Scoring elsewhere depends on invalid values staying representable, so no
operator is "protected" by clamping.

Genomes are immutable by convention after construction; mutation always
returns a fresh genome and never touches the parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .ops import (
    CODE_CONST,
    FULL_SET,
    N_BINARY,
    N_OPS,
    OP_ARITY,
    OP_IDS,
    OP_NAMES,
    OperatorSet,
    var_code,
    var_index,
)
from .rng import RandomStream

CONST_LO = -5.0
CONST_HI = 5.0
CONST_PERTURB_SIGMA = 0.2

DEFAULT_MUTATION_WEIGHTS: dict[str, float] = {
    "point": 0.4,
    "terminal": 0.2,
    "constant": 0.2,
    "insert": 0.1,
    "delete": 0.1,
}

# Relative preference among legal token kinds while sampling genome positions.
_KIND_W_TERMINAL = 0.40
_KIND_W_BINARY = 0.35
_KIND_W_UNARY = 0.25
_P_CONST_TERMINAL = 0.25


class Token(NamedTuple):
    """One genome token: (opcode, constant payload)."""

    code: int
    value: float = 0.0

    @property
    def kind(self) -> str:
        if self.code <= -2:
            return "var"
        if self.code == CODE_CONST:
            return "const"
        return "unary" if OP_ARITY[self.code] == 1 else "binary"

    @property
    def name(self) -> str:
        if self.code <= -2:
            return f"x{var_index(self.code)}"
        if self.code == CODE_CONST:
            return repr(float(self.value))
        return OP_NAMES[self.code]


def var(index: int) -> Token:
    return Token(var_code(index))


def const(value: float) -> Token:
    return Token(CODE_CONST, float(value))


def op(name: str) -> Token:
    return Token(OP_IDS[name])


@dataclass(eq=False)
class Genome:
    """A viable RPN program over ``arity`` input variables."""

    codes: np.ndarray  # int16 [length]
    consts: np.ndarray  # float64 [length]
    arity: int
    slot_id: int = -1

    @property
    def length(self) -> int:
        return int(self.codes.size)

    @property
    def tokens(self) -> list[Token]:
        return [Token(int(c), float(v)) for c, v in zip(self.codes, self.consts)]

    @classmethod
    def from_tokens(cls, tokens: Iterable[Token], arity: int) -> "Genome":
        toks = list(tokens)
        codes = np.fromiter((t.code for t in toks), dtype=np.int16, count=len(toks))
        consts = np.fromiter((t.value for t in toks), dtype=np.float64, count=len(toks))
        return cls(codes=codes, consts=consts, arity=arity)

    @classmethod
    def from_text(cls, text: str, arity: int) -> "Genome":
        """Parse the whitespace-separated RPN token format.

        Operators are the canonical names (``add sub mul div sq sqrt inv cos
        sin tan acos asin atan tanh log exp``); the symbol aliases
        ``+ - * /`` are accepted on input. Variables are ``x0, x1, ...``;
        anything else must parse as a decimal constant.
        """
        tokens: list[Token] = []
        for raw in text.split():
            word = _TEXT_ALIASES.get(raw, raw)
            if word in OP_IDS:
                tokens.append(op(word))
            elif len(word) > 1 and word[0] == "x" and word[1:].isdigit():
                tokens.append(var(int(word[1:])))
            else:
                try:
                    tokens.append(const(float(word)))
                except ValueError:
                    raise ValueError(f"unrecognized RPN token: {raw!r}") from None
        if not tokens:
            raise ValueError("empty genome text")
        return cls.from_tokens(tokens, arity)

    def to_text(self) -> str:
        return " ".join(t.name for t in self.tokens)

    def copy(self) -> "Genome":
        return Genome(self.codes.copy(), self.consts.copy(), self.arity)

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"Genome({self.to_text()!r}, arity={self.arity})"


_TEXT_ALIASES = {"+": "add", "-": "sub", "*": "mul", "/": "div"}


def validate(
    genome: Genome,
    ops: OperatorSet | None = None,
    max_len: int | None = None,
) -> bool:
    """True iff the genome is viable and well-formed for ``ops``.

    Checks the stack-balance rule (terminals push, unaries need depth >= 1,
    binaries need depth >= 2 and pop one, final depth exactly 1), variable
    indices against the genome arity, constant finiteness, and operator
    membership in ``ops``.
    """
    if ops is None:
        ops = FULL_SET
    n = genome.codes.size
    if n < 1 or genome.consts.size != n:
        return False
    if max_len is not None and n > max_len:
        return False
    arity = genome.arity
    depth = 0
    codes = genome.codes.tolist()
    consts = genome.consts.tolist()
    for code, value in zip(codes, consts):
        if code <= -2:
            if not 0 <= var_index(code) < arity:
                return False
            depth += 1
        elif code == CODE_CONST:
            if not math.isfinite(value):
                return False
            depth += 1
        elif 0 <= code < N_OPS:
            if code not in ops:
                return False
            if OP_ARITY[code] == 1:
                if depth < 1:
                    return False
            else:
                if depth < 2:
                    return False
                depth -= 1
        else:
            return False
    return depth == 1


def _feasible(depth: int, remaining: int, has_unary: bool, has_binary: bool) -> bool:
    # Can `remaining` more tokens bring the stack from `depth` to exactly 1?
    if remaining == 0:
        return depth == 1
    if depth > 1 and not has_binary:
        return False
    if depth - 1 > remaining:
        return False
    surplus = remaining - (depth - 1)
    if surplus == 0:
        return True
    if has_unary:
        return True
    # Without unaries the surplus must be burnable as terminal+binary pairs.
    return has_binary and surplus % 2 == 0


def _sample_token(
    rng: RandomStream,
    depth: int,
    remaining: int,
    arity: int,
    ops: OperatorSet,
) -> Token:
    """Draw one token legal at (depth, remaining) and completable afterwards."""
    unary = ops.unary
    binary = ops.binary
    has_u = bool(unary)
    has_b = bool(binary)
    w_term = _KIND_W_TERMINAL if _feasible(depth + 1, remaining - 1, has_u, has_b) else 0.0
    w_un = (
        _KIND_W_UNARY
        if has_u and depth >= 1 and _feasible(depth, remaining - 1, has_u, has_b)
        else 0.0
    )
    w_bin = (
        _KIND_W_BINARY
        if has_b and depth >= 2 and _feasible(depth - 1, remaining - 1, has_u, has_b)
        else 0.0
    )
    total = w_term + w_un + w_bin
    if total <= 0.0:
        raise RuntimeError("no legal token available; infeasible sampling state")
    r = rng.u01() * total
    if r < w_term:
        if rng.u01() < _P_CONST_TERMINAL:
            return const(rng.uniform(CONST_LO, CONST_HI))
        return var(rng.randint(arity))
    if r < w_term + w_un:
        return Token(unary[rng.randint(len(unary))])
    return Token(binary[rng.randint(len(binary))])


def _feasible_length(length: int, ops: OperatorSet) -> int:
    # Length 1 is always feasible (a lone terminal); shrink until reachable.
    while length > 1 and not _feasible(0, length, bool(ops.unary), bool(ops.binary)):
        length -= 1
    return length


def random_genome(
    rng: RandomStream,
    arity: int,
    max_len: int,
    ops: OperatorSet | None = None,
) -> Genome:
    """Grow a uniformly-lengthed random genome, valid by construction.

    The target length is drawn uniformly from [1, max_len] (snapped down to
    the nearest feasible length for restricted operator sets); each position
    is then filled by sampling only token kinds that keep the remainder of
    the genome completable.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    if arity < 1:
        raise ValueError("arity must be >= 1")
    if ops is None:
        ops = FULL_SET
    length = _feasible_length(1 + rng.randint(max_len), ops)
    codes = np.empty(length, dtype=np.int16)
    consts = np.zeros(length, dtype=np.float64)
    depth = 0
    for pos in range(length):
        tok = _sample_token(rng, depth, length - pos, arity, ops)
        codes[pos] = tok.code
        consts[pos] = tok.value
        if tok.code < 0:
            depth += 1
        elif tok.code < N_BINARY:
            depth -= 1
    return Genome(codes=codes, consts=consts, arity=arity)


def repair(
    rng: RandomStream,
    tokens: list[Token],
    arity: int,
    ops: OperatorSet,
) -> list[Token]:
    """Resample offending tokens until the sequence is viable.

    Walks the sequence tracking stack depth; a token that is illegal at its
    position, or that makes the tail uncompletable, is replaced by a random
    legal draw. The result has the same length (possibly minus a trailing
    truncation when no length-preserving fix exists) and is always viable.
    """
    has_u = bool(ops.unary)
    has_b = bool(ops.binary)
    length = _feasible_length(len(tokens), ops)
    out: list[Token] = []
    depth = 0
    for pos in range(length):
        tok = tokens[pos]
        remaining = length - pos
        code = tok.code
        ok = False
        if code <= -2:
            ok = 0 <= var_index(code) < arity and _feasible(
                depth + 1, remaining - 1, has_u, has_b
            )
            d_next = depth + 1
        elif code == CODE_CONST:
            ok = math.isfinite(tok.value) and _feasible(depth + 1, remaining - 1, has_u, has_b)
            d_next = depth + 1
        elif 0 <= code < N_OPS and code in ops:
            if OP_ARITY[code] == 1:
                ok = depth >= 1 and _feasible(depth, remaining - 1, has_u, has_b)
                d_next = depth
            else:
                ok = depth >= 2 and _feasible(depth - 1, remaining - 1, has_u, has_b)
                d_next = depth - 1
        if not ok:
            tok = _sample_token(rng, depth, remaining, arity, ops)
            d_next = depth + 1 if tok.code < 0 else (depth if tok.code >= N_BINARY else depth - 1)
        out.append(tok)
        depth = d_next
    return out


def mutate(
    rng: RandomStream,
    genome: Genome,
    ops: OperatorSet | None = None,
    weights: dict[str, float] | None = None,
    max_len: int = 64,
) -> Genome:
    """Return a freshly mutated, viable child of ``genome``.

    Mutation kinds (weighted draw): replace an operator with another of the
    same arity, replace a terminal, perturb a constant multiplicatively,
    insert a small valid fragment, or delete a span followed by a repair
    pass. A kind with no applicable site falls back to returning an
    unchanged copy.
    """
    if ops is None:
        ops = FULL_SET
    if weights is None:
        weights = DEFAULT_MUTATION_WEIGHTS
    total = sum(weights.values())
    r = rng.u01() * total
    kind = "delete"
    for name in ("point", "terminal", "constant", "insert"):
        w = weights.get(name, 0.0)
        if r < w:
            kind = name
            break
        r -= w

    codes = genome.codes
    if kind == "point":
        sites = np.flatnonzero(codes >= 0)
        if sites.size:
            pos = int(sites[rng.randint(sites.size)])
            current = int(codes[pos])
            pool = ops.unary if OP_ARITY[current] == 1 else ops.binary
            if len(pool) > 1:
                pick = pool[rng.randint(len(pool) - 1)]
                if pick == current:
                    pick = pool[-1]
                new_codes = codes.copy()
                new_codes[pos] = pick
                return Genome(new_codes, genome.consts.copy(), genome.arity)
        return genome.copy()

    if kind == "terminal":
        sites = np.flatnonzero(codes < 0)
        pos = int(sites[rng.randint(sites.size)])
        new_codes = codes.copy()
        new_consts = genome.consts.copy()
        if rng.u01() < _P_CONST_TERMINAL:
            new_codes[pos] = CODE_CONST
            new_consts[pos] = rng.uniform(CONST_LO, CONST_HI)
        else:
            new_codes[pos] = var_code(rng.randint(genome.arity))
            new_consts[pos] = 0.0
        return Genome(new_codes, new_consts, genome.arity)

    if kind == "constant":
        sites = np.flatnonzero(codes == CODE_CONST)
        if sites.size:
            pos = int(sites[rng.randint(sites.size)])
            new_consts = genome.consts.copy()
            new_consts[pos] = new_consts[pos] * rng.lognormal(CONST_PERTURB_SIGMA)
            return Genome(codes.copy(), new_consts, genome.arity)
        return genome.copy()

    if kind == "insert":
        length = genome.length
        room = max_len - length
        want_pair = room >= 2 and bool(ops.binary) and rng.u01() < 0.5
        if want_pair:
            # terminal + binary right after any non-empty prefix: depth-neutral
            pos = 1 + rng.randint(length)
            term = (
                const(rng.uniform(CONST_LO, CONST_HI))
                if rng.u01() < _P_CONST_TERMINAL
                else var(rng.randint(genome.arity))
            )
            bin_pool = ops.binary
            fragment = [term, Token(bin_pool[rng.randint(len(bin_pool))])]
        elif room >= 1 and ops.unary:
            pos = 1 + rng.randint(length)
            un_pool = ops.unary
            fragment = [Token(un_pool[rng.randint(len(un_pool))])]
        else:
            return genome.copy()
        toks = genome.tokens
        toks[pos:pos] = fragment
        return Genome.from_tokens(toks, genome.arity)

    # delete: remove a short span, then run the correction pass
    length = genome.length
    if length == 1:
        return genome.copy()
    span = 1 + rng.randint(min(3, length - 1))
    pos = rng.randint(length - span + 1)
    toks = genome.tokens
    del toks[pos : pos + span]
    repaired = repair(rng, toks, genome.arity, ops)
    return Genome.from_tokens(repaired, genome.arity)


# --- scalar evaluation (IEEE semantics in pure Python) ----------------------
#
# CPython's math functions raise on domain errors and overflow where IEEE
# arithmetic would produce NaN/inf; these wrappers restore the IEEE result so
# the scalar evaluator agrees with the batched kernels.

_NAN = float("nan")
_INF = float("inf")


def _ieee_div(a: float, b: float) -> float:
    if b == 0.0:
        if a == 0.0 or a != a:
            return _NAN
        return math.copysign(_INF, a) * math.copysign(1.0, b)
    return a / b


def _ieee_sqrt(a: float) -> float:
    if a < 0.0:
        return _NAN
    return math.sqrt(a)


def _ieee_log(a: float) -> float:
    if a > 0.0:
        return math.log(a)
    if a == 0.0:
        return -_INF
    return _NAN  # negative or NaN


def _ieee_exp(a: float) -> float:
    try:
        return math.exp(a)
    except OverflowError:
        return _INF


def _ieee_acos(a: float) -> float:
    if -1.0 <= a <= 1.0:
        return math.acos(a)
    return _NAN


def _ieee_asin(a: float) -> float:
    if -1.0 <= a <= 1.0:
        return math.asin(a)
    return _NAN


def _finite_trig(fn):
    def wrapped(a: float) -> float:
        if math.isinf(a):
            return _NAN
        return fn(a)

    return wrapped


_UNARY_FUNCS = {
    OP_IDS["sq"]: lambda a: a * a,
    OP_IDS["sqrt"]: _ieee_sqrt,
    OP_IDS["inv"]: lambda a: _ieee_div(1.0, a),
    OP_IDS["cos"]: _finite_trig(math.cos),
    OP_IDS["sin"]: _finite_trig(math.sin),
    OP_IDS["tan"]: _finite_trig(math.tan),
    OP_IDS["acos"]: _ieee_acos,
    OP_IDS["asin"]: _ieee_asin,
    OP_IDS["atan"]: math.atan,
    OP_IDS["tanh"]: math.tanh,
    OP_IDS["log"]: _ieee_log,
    OP_IDS["exp"]: _ieee_exp,
}

_BINARY_FUNCS = {
    OP_IDS["add"]: lambda a, b: a + b,
    OP_IDS["sub"]: lambda a, b: a - b,
    OP_IDS["mul"]: lambda a, b: a * b,
    OP_IDS["div"]: _ieee_div,
}


def eval_case(genome: Genome, inputs: Sequence[float]) -> float:
    """Evaluate the genome on one input vector with a flat value stack."""
    stack: list[float] = []
    push = stack.append
    for code, value in zip(genome.codes.tolist(), genome.consts.tolist()):
        if code <= -2:
            push(float(inputs[-2 - code]))
        elif code == CODE_CONST:
            push(value)
        elif code >= N_BINARY:
            stack[-1] = _UNARY_FUNCS[code](stack[-1])
        else:
            b = stack.pop()
            stack[-1] = _BINARY_FUNCS[code](stack[-1], b)
    return stack[0]


_INFIX_BINARY = {
    OP_IDS["add"]: " + ",
    OP_IDS["sub"]: " - ",
    OP_IDS["mul"]: " * ",
    OP_IDS["div"]: " / ",
}


def to_infix(genome: Genome) -> str:
    """Fully parenthesized infix rendering of the genome."""
    stack: list[str] = []
    for tok in genome.tokens:
        code = tok.code
        if code < 0:
            stack.append(tok.name)
        elif code < N_BINARY:
            b = stack.pop()
            a = stack.pop()
            stack.append(f"({a}{_INFIX_BINARY[code]}{b})")
        elif code == OP_IDS["sq"]:
            stack.append(f"(({stack.pop()})^2)")
        else:
            stack.append(f"{OP_NAMES[code]}({stack.pop()})")
    return stack[0]


def max_stack_depth(genome: Genome) -> int:
    """Peak stack depth reached while evaluating the genome."""
    depth = 0
    peak = 0
    for code in genome.codes.tolist():
        if code < 0:
            depth += 1
            peak = max(peak, depth)
        elif code < N_BINARY:
            depth -= 1
    return peak
