"""Behaviors, l-sequences and finite transition systems.

Symbols are small integers indexing an alphabet table. Two negative values are
reserved: ``PAD`` (the pre-initial padding symbol, drawn as a diamond) and
``ABS`` (the output of the absorbing state added when a trajectory leaves the
state domain). Alphabet tables never contain either sentinel.

A behavior is written ``y0 u0 y1 u1 ... u_{H-1} y_H``: input ``u_k`` is applied
at time ``k`` and moves the system from ``y_k`` to ``y_{k+1}``.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

PAD = -1
ABS = -2

DIAMOND = "◇"
ABS_LABEL = "y_abs"


def _check_symbol(s: int, card: int | None, allow_pad: bool, allow_abs: bool) -> None:
    if s == PAD and allow_pad:
        return
    if s == ABS and allow_abs:
        return
    if s < 0 or (card is not None and s >= card):
        raise ValueError(f"invalid symbol {s}")


def symbol_label(s: int, labels: Sequence) -> str:
    if s == PAD:
        return DIAMOND
    if s == ABS:
        return ABS_LABEL
    return str(labels[s])


@dataclass(frozen=True, order=True)
class LSequence:
    """An alternating output/input string with ``ell + 1`` outputs and ``ell`` inputs.

    Ordering is lexicographic on outputs, then inputs, so sorted collections
    are canonical.
    """

    outputs: tuple[int, ...]
    inputs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(int(s) for s in self.outputs))
        object.__setattr__(self, "inputs", tuple(int(s) for s in self.inputs))
        if len(self.outputs) != len(self.inputs) + 1:
            raise ValueError("an l-sequence needs exactly one more output than inputs")
        if self.outputs[-1] == PAD:
            raise ValueError("the last output of an l-sequence cannot be padding")
        seen_real = False
        for y in self.outputs:
            if y == PAD and seen_real:
                raise ValueError("padding must be a prefix")
            if y != PAD:
                _check_symbol(y, None, False, True)
                seen_real = True
        for y, u in zip(self.outputs, self.inputs):
            # input j is padding exactly when the step starts before time 0
            if (u == PAD) != (y == PAD):
                raise ValueError("input padding must match output padding")
            if u != PAD:
                _check_symbol(u, None, False, False)

    @property
    def ell(self) -> int:
        return len(self.inputs)

    @property
    def last(self) -> int:
        return self.outputs[-1]

    @classmethod
    def padded(cls, y0: int, ell: int) -> "LSequence":
        """The initial sequence ``<> ... <> y0``."""
        return cls((PAD,) * ell + (y0,), (PAD,) * ell)

    @classmethod
    def from_symbols(cls, symbols: Sequence[int]) -> "LSequence":
        """Build from an interleaved ``y u y ... y`` symbol list."""
        symbols = tuple(symbols)
        if len(symbols) % 2 != 1:
            raise ValueError("interleaved symbol list must have odd length")
        return cls(symbols[0::2], symbols[1::2])

    def symbols(self) -> tuple[int, ...]:
        out = [self.outputs[0]]
        for u, y in zip(self.inputs, self.outputs[1:]):
            out.extend((u, y))
        return tuple(out)

    def is_initial(self) -> bool:
        return all(y == PAD for y in self.outputs[:-1])

    def window(self, i: int, j: int) -> "LSequence":
        """The sub-sequence from output ``i`` to output ``j`` (inclusive)."""
        if not 0 <= i <= j <= self.ell:
            raise IndexError((i, j))
        return LSequence(self.outputs[i:j + 1], self.inputs[i:j])

    def format(self, output_labels: Sequence = (), input_labels: Sequence = ()) -> str:
        ol = output_labels or [f"y{i}" for i in range(max(self.outputs) + 1)]
        il = input_labels or [f"u{i}" for i in range(max(self.inputs, default=-1) + 1)]
        parts = [symbol_label(self.outputs[0], ol)]
        for u, y in zip(self.inputs, self.outputs[1:]):
            parts.append(symbol_label(u, il))
            parts.append(symbol_label(y, ol))
        return "".join(parts)


@dataclass(frozen=True)
class ExternalBehavior:
    """Observed trace ``y0 u0 y1 ... u_{H-1} y_H`` of one run."""

    outputs: tuple[int, ...]
    inputs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(int(s) for s in self.outputs))
        object.__setattr__(self, "inputs", tuple(int(s) for s in self.inputs))
        if len(self.outputs) != len(self.inputs) + 1:
            raise ValueError("a behavior needs H+1 outputs and H inputs")
        for y in self.outputs:
            _check_symbol(y, None, False, True)
        for u in self.inputs:
            _check_symbol(u, None, False, False)

    @property
    def H(self) -> int:
        return len(self.inputs)

    def window(self, k: int, m: int) -> LSequence:
        """``gamma[k-m, k]`` with padding for negative time indices."""
        if not 0 <= k <= self.H:
            raise IndexError(k)
        outs, ins = [], []
        for t in range(k - m, k + 1):
            outs.append(self.outputs[t] if t >= 0 else PAD)
        for t in range(k - m, k):
            ins.append(self.inputs[t] if t >= 0 else PAD)
        return LSequence(tuple(outs), tuple(ins))

    def windows(self, m: int) -> list[LSequence]:
        """All ``m``-windows in time order, k = 0..H."""
        return [self.window(k, m) for k in range(self.H + 1)]


def split_windows(gamma: ExternalBehavior, m: int) -> frozenset[LSequence]:
    """Set of padded ``m``-windows of a behavior, one per end time ``k in [0, H]``."""
    if m < 0 or m >= gamma.H:
        raise ValueError(f"window length {m} must satisfy 0 <= m < H={gamma.H}")
    return frozenset(gamma.windows(m))


def domino_step(zeta: LSequence, u: int, y: int) -> LSequence:
    """Shift ``zeta`` by one step: drop its oldest pair and append ``(u, y)``."""
    _check_symbol(u, None, False, False)
    _check_symbol(y, None, False, True)
    if zeta.ell == 0:
        return LSequence((y,), ())
    return LSequence(zeta.outputs[1:] + (y,), zeta.inputs[1:] + (u,))


def domino_concat(zeta: LSequence, u: int, y: int) -> LSequence:
    """``zeta`` extended by ``(u, y)``: an (ell+1)-sequence."""
    _check_symbol(u, None, False, False)
    _check_symbol(y, None, False, True)
    return LSequence(zeta.outputs + (y,), zeta.inputs + (u,))


@dataclass(frozen=True)
class FiniteTS:
    """Explicit finite transition system over integer input/output symbols.

    ``output`` maps each state to an output index; ``transitions`` holds
    ``(x, u, x')`` triples.
    """

    states: tuple
    initial: frozenset
    n_inputs: int
    output: Mapping[Hashable, int]
    transitions: frozenset
    output_labels: tuple = ()
    input_labels: tuple = ()
    _post: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "initial", frozenset(self.initial))
        object.__setattr__(self, "transitions", frozenset(self.transitions))
        object.__setattr__(self, "output_labels", tuple(self.output_labels))
        object.__setattr__(self, "input_labels", tuple(self.input_labels))
        sset = set(states)
        if len(sset) != len(states):
            raise ValueError("duplicate states")
        if not self.initial <= sset:
            raise ValueError("initial states must be states")
        for x in states:
            if x not in self.output:
                raise ValueError(f"state {x!r} has no output")
        post = defaultdict(set)
        for x, u, x2 in self.transitions:
            if x not in sset or x2 not in sset:
                raise ValueError(f"transition {(x, u, x2)!r} leaves the state set")
            if not 0 <= u < self.n_inputs:
                raise ValueError(f"input {u} out of range")
            post[x, u].add(x2)
        object.__setattr__(self, "_post", {k: frozenset(v) for k, v in post.items()})

    def post(self, x, u: int) -> frozenset:
        return self._post.get((x, u), frozenset())

    def admissible(self, x) -> frozenset[int]:
        return frozenset(u for u in range(self.n_inputs) if (x, u) in self._post)

    def is_nonblocking(self) -> bool:
        return all(self.admissible(x) for x in self.states)

    def is_deterministic(self) -> bool:
        return all(len(v) == 1 for v in self._post.values())

    def has_free_input(self) -> bool:
        return all(len(self.admissible(x)) == self.n_inputs for x in self.states)


def ts_behaviors(ts: FiniteTS, x0, u_seq: Sequence[int]) -> frozenset[ExternalBehavior]:
    """External behaviors generated from ``x0`` under ``u_seq``.

    An empty result means the input sequence is not admissible from ``x0``.
    """
    if x0 not in ts.initial:
        raise ValueError(f"{x0!r} is not an initial state")
    u_seq = tuple(int(u) for u in u_seq)
    out = set()
    stack = [(x0, (ts.output[x0],))]
    while stack:
        x, ys = stack.pop()
        k = len(ys) - 1
        if k == len(u_seq):
            out.add(ExternalBehavior(ys, u_seq))
            continue
        for x2 in ts.post(x, u_seq[k]):
            stack.append((x2, ys + (ts.output[x2],)))
    return frozenset(out)


def _check_alphabets(a: FiniteTS, b: FiniteTS) -> None:
    if a.n_inputs != b.n_inputs:
        raise ValueError("input alphabets differ")
    if a.output_labels and b.output_labels and a.output_labels != b.output_labels:
        raise ValueError("output alphabets differ")
    if a.input_labels and b.input_labels and a.input_labels != b.input_labels:
        raise ValueError("input alphabets differ")


def _check_pairs(R, left: FiniteTS, right: FiniteTS) -> set:
    R = set(R)
    ls, rs = set(left.states), set(right.states)
    for p, q in R:
        if p not in ls or q not in rs:
            raise ValueError(f"relation pair {(p, q)!r} is not over the given systems")
    return R


def check_sr(ts_a: FiniteTS, ts_b: FiniteTS, R: Iterable[tuple]) -> bool:
    """Is ``R`` a simulation relation from ``ts_a`` to ``ts_b`` (inputs and outputs observed)?"""
    _check_alphabets(ts_a, ts_b)
    R = _check_pairs(R, ts_a, ts_b)
    related = defaultdict(set)
    for xa, xb in R:
        related[xa].add(xb)
    for xa0 in ts_a.initial:
        if not related[xa0] & ts_b.initial:
            return False
    for xa, xb in R:
        if ts_a.output[xa] != ts_b.output[xb]:
            return False
        ua = ts_a.admissible(xa)
        if not ua <= ts_b.admissible(xb):
            return False
        for u in ua:
            succ_b = ts_b.post(xb, u)
            for xa2 in ts_a.post(xa, u):
                if not related[xa2] & succ_b:
                    return False
    return True


def check_asr(ts_b: FiniteTS, ts_a: FiniteTS, Z: Iterable[tuple]) -> bool:
    """Is ``Z`` (pairs ``(x_b, x_a)``) an alternating simulation relation from ``ts_b`` to ``ts_a``?

    ``ts_b`` plays the controller: every input it admits must be admissible in
    ``ts_a``, and every ``ts_a`` successor must be matched by a ``ts_b`` successor.
    """
    _check_alphabets(ts_b, ts_a)
    Z = _check_pairs(Z, ts_b, ts_a)
    related = defaultdict(set)
    for xb, xa in Z:
        related[xa].add(xb)
    init_b_related = {xb for xb, xa in Z if xa in ts_a.initial}
    for xb0 in ts_b.initial:
        if xb0 not in init_b_related:
            return False
    for xb, xa in Z:
        if ts_b.output[xb] != ts_a.output[xa]:
            return False
        ub = ts_b.admissible(xb)
        if not ub <= ts_a.admissible(xa):
            return False
        for u in ub:
            succ_b = ts_b.post(xb, u)
            for xa2 in ts_a.post(xa, u):
                if not related[xa2] & succ_b:
                    return False
    return True


def toy_ts() -> FiniteTS:
    """Four-state, two-input system used throughout the tests.

    ``x1`` (output ``y1``) is the only initial state; ``x2, x3, x4`` output ``y2``.
    Input ``ua`` moves x1->x2, x2->x2, x3->x1, x4->x2; input ``ub`` moves
    x1->x3, x2->x4, x3->x3, x4->x4.
    """
    ua, ub = 0, 1
    y1, y2 = 0, 1
    edges = [
        ("x1", ua, "x2"), ("x1", ub, "x3"),
        ("x2", ua, "x2"), ("x2", ub, "x4"),
        ("x3", ub, "x3"), ("x3", ua, "x1"),
        ("x4", ub, "x4"), ("x4", ua, "x2"),
    ]
    return FiniteTS(
        states=("x1", "x2", "x3", "x4"),
        initial={"x1"},
        n_inputs=2,
        output={"x1": y1, "x2": y2, "x3": y2, "x4": y2},
        transitions=edges,
        output_labels=("y1", "y2"),
        input_labels=("ua", "ub"),
    )


def all_input_sequences(n_inputs: int, H: int):
    return itertools.product(range(n_inputs), repeat=H)
