"""Data-driven l-complete abstractions built from witnessed windows.

Windows of order ``m = ell + 1`` (``m+1`` outputs, ``m`` inputs) are stored as
integer keys of their interleaved symbol strings. A window's first ``ell``
steps form its *prefix* state and its last ``ell`` steps its *suffix* state;
every window with a non-padded prefix is one transition prefix --u--> suffix,
and a fully padded window contributes its suffix as an initial state.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .behavior import PAD, ExternalBehavior, FiniteTS, LSequence
from .keys import KeyCodec, padded_sequences, prefix_hashes, substring_keys
from .sampler import Dataset

_CHUNK_SYMBOLS = 1 << 22  # sequence symbols per hashing chunk
_AUTO_SYMBOL_LIMIT = 1 << 26


class WindowSet:
    """Witnessed windows of order ``ell + 1`` with per-window side data.

    ``incidence`` (optional) lists, for each distinct behavior of the source
    dataset, the ids of its windows; repeated windows within a row are replaced
    by ``len(self)`` so each row counts a window once. ``behavior_first_id``
    holds the lowest record id carrying that behavior and ``record_behavior``
    maps each record to its behavior row.
    """

    def __init__(self, ell, output_labels, input_labels, codec, keys, prefix_keys,
                 suffix_keys, last_input, last_output, prefix_last_output, symbols=None,
                 incidence=None, behavior_first_id=None, record_behavior=None, record_ids=None):
        self.ell = int(ell)
        self.output_labels = tuple(output_labels)
        self.input_labels = tuple(input_labels)
        self.codec = codec
        self.state_codec = codec.with_length(2 * self.ell + 1)
        self.keys = keys
        self.prefix_keys = prefix_keys
        self.suffix_keys = suffix_keys
        self.last_input = last_input
        self.last_output = last_output
        self.prefix_last_output = prefix_last_output
        self.symbols = symbols
        self.incidence = incidence
        self.behavior_first_id = behavior_first_id
        self.record_behavior = record_behavior
        self.record_ids = record_ids
        self._key_set = None

    def __len__(self):
        return len(self.keys)

    @property
    def order(self) -> int:
        return self.ell + 1

    @property
    def has_provenance(self) -> bool:
        return self.incidence is not None

    @property
    def n_records(self) -> int:
        return 0 if self.record_ids is None else len(self.record_ids)

    def key_set(self) -> frozenset:
        if self._key_set is None:
            self._key_set = frozenset(int(k) for k in self.keys)
        return self._key_set

    def window(self, i: int) -> LSequence:
        if self.symbols is None:
            raise RuntimeError("window symbols were not stored")
        return LSequence.from_symbols(self.symbols[i].tolist())

    def windows(self) -> list[LSequence]:
        """All windows in canonical (outputs, inputs) order."""
        return sorted(self.window(i) for i in range(len(self)))

    def __contains__(self, w: LSequence) -> bool:
        if w.ell != self.order:
            return False
        return self.codec.key(w.symbols()) in self.key_set()

    def contributors(self, i: int) -> np.ndarray:
        """Record ids whose behavior contains window ``i``."""
        if not self.has_provenance:
            raise RuntimeError("no provenance stored")
        rows = np.flatnonzero(np.any(self.incidence == i, axis=1))
        recs = np.flatnonzero(np.isin(self.record_behavior, rows))
        return self.record_ids[recs]

    @classmethod
    def from_windows(cls, windows, ell, output_labels, input_labels) -> "WindowSet":
        """Window set from explicit sequences (no provenance)."""
        windows = sorted(set(windows))
        m = ell + 1
        if any(w.ell != m for w in windows):
            raise ValueError(f"all windows must have order {m}")
        codec = KeyCodec(len(output_labels), len(input_labels), 2 * m + 1)
        sc = codec.with_length(2 * ell + 1)
        syms = np.array([w.symbols() for w in windows], dtype=np.int16).reshape(len(windows), 2 * m + 1)
        keys = np.array([codec.key(s) for s in syms.tolist()], dtype=np.uint64)
        order = np.argsort(keys, kind="stable")
        syms, keys = syms[order], keys[order]
        pk = np.array([sc.key(s[:-2]) for s in syms.tolist()], dtype=np.uint64)
        sk = np.array([sc.key(s[2:]) for s in syms.tolist()], dtype=np.uint64)
        return cls(ell, output_labels, input_labels, codec, keys, pk, sk,
                   syms[:, -2].copy(), syms[:, -1].copy(), syms[:, -3].copy(), syms)


def _row_hashes(outs: np.ndarray, ins: np.ndarray, base: int) -> np.ndarray:
    h = np.zeros(len(outs), dtype=np.uint64)
    b = np.uint64(base)
    for j in range(outs.shape[1]):
        h = h * b + (outs[:, j].astype(np.int64) + 3).astype(np.uint64)
        if j < ins.shape[1]:
            h = h * b + (ins[:, j].astype(np.int64) + 3).astype(np.uint64)
    return h


def _behavior_rows(d: Dataset, chunk: int = 1 << 16):
    """Distinct behaviors of ``d``: (row indices, inverse map, lowest id per row).

    Rows are grouped by a pair of 64-bit hashes, and every group is then
    checked against its representative, so the grouping is exact.
    """
    n = d.N
    hh = np.empty((n, 2), dtype=np.uint64)
    for a in range(0, n, chunk):
        o, i = d.outputs[a:a + chunk], d.inputs[a:a + chunk]
        hh[a:a + chunk, 0] = _row_hashes(o, i, 0x9E3779B97F4A7C15)
        hh[a:a + chunk, 1] = _row_hashes(o, i, 0xC2B2AE3D27D4EB4F)
    view = hh.view(np.dtype((np.void, 16))).ravel()
    _, first, inverse = np.unique(view, return_index=True, return_inverse=True)
    inverse = inverse.ravel().astype(np.int64)
    del hh, view
    for a in range(0, n, chunk):
        rep = first[inverse[a:a + chunk]]
        if not (np.array_equal(d.outputs[a:a + chunk], d.outputs[rep])
                and np.array_equal(d.inputs[a:a + chunk], d.inputs[rep])):
            return _behavior_rows_exact(d)
    first_id = np.full(len(first), np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first_id, inverse, d.ids)
    return first, inverse, first_id


def _behavior_rows_exact(d: Dataset):
    rows = np.ascontiguousarray(np.concatenate([d.outputs, d.inputs], axis=1))
    view = rows.view(np.dtype((np.void, rows.dtype.itemsize * rows.shape[1]))).ravel()
    _, first, inverse = np.unique(view, return_index=True, return_inverse=True)
    inverse = inverse.ravel().astype(np.int64)
    first_id = np.full(len(first), np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first_id, inverse, d.ids)
    return first, inverse, first_id


def _window_arrays(outputs, inputs, m, codec, state_codec):
    seq = padded_sequences(outputs, inputs, m)
    P = prefix_hashes(seq, codec.base)
    H = outputs.shape[1] - 1
    starts = 2 * np.arange(H + 1)
    keys = substring_keys(P, starts, 2 * m + 1, codec.base)
    return seq, P, starts, keys


def collect_windows(d: Dataset, ell: int, provenance: bool = True,
                    store_symbols: bool | str = "auto") -> WindowSet:
    """Union of the padded ``(ell+1)``-windows of every record of ``d``."""
    if ell < 0 or ell >= d.H:
        raise ValueError(f"ell={ell} must satisfy 0 <= ell < H={d.H}")
    m = ell + 1
    W = 2 * m + 1
    codec = KeyCodec(len(d.output_labels), len(d.input_labels), W)
    sc = codec.with_length(2 * ell + 1)
    first, inverse, first_id = _behavior_rows(d)
    outs, ins = d.outputs[first], d.inputs[first]
    nb, H1 = outs.shape
    chunk = max(1, _CHUNK_SYMBOLS // (2 * (m + H1)))
    power = np.uint64(pow(codec.base, 2 * ell + 1, 1 << 64))

    # pass 1: distinct windows and their side data. ``seen`` stays sorted;
    # ``slot`` remembers where each key's side data was appended.
    seen = np.zeros(0, np.uint64)
    slot = np.zeros(0, np.int64)
    aux_parts, sym_parts = [], [] if store_symbols else None
    n_found = 0
    for a in range(0, nb, chunk):
        seq, P, starts, keys = _window_arrays(outs[a:a + chunk], ins[a:a + chunk], m, codec, sc)
        uk, pos = np.unique(keys.ravel(), return_index=True)
        if len(seen):
            at = np.minimum(np.searchsorted(seen, uk), len(seen) - 1)
            new = seen[at] != uk
            uk, pos = uk[new], pos[new]
        if not len(uk):
            continue
        r, k = np.divmod(pos, H1)
        s0 = starts[k]
        pk = P[r, s0 + 2 * ell + 1] - P[r, s0] * power
        sk = P[r, s0 + W] - P[r, s0 + 2] * power
        tail = seq[r[:, None], s0[:, None] + np.arange(W - 3, W)].astype(np.int64)
        aux_parts.append((pk, sk, tail))
        if sym_parts is not None:
            sym_parts.append(seq[r[:, None], s0[:, None] + np.arange(W)])
            if store_symbols == "auto" and (n_found + len(uk)) * W > _AUTO_SYMBOL_LIMIT:
                sym_parts = None
        merged = np.concatenate([seen, uk])
        slots = np.concatenate([slot, np.arange(n_found, n_found + len(uk))])
        order = np.argsort(merged, kind="stable")
        seen, slot = merged[order], slots[order]
        n_found += len(uk)
    keys = seen
    pk = np.concatenate([p[0] for p in aux_parts])[slot]
    sk = np.concatenate([p[1] for p in aux_parts])[slot]
    tail = np.concatenate([p[2] for p in aux_parts])[slot].astype(np.int16)
    symbols = None
    if sym_parts is not None:
        symbols = np.concatenate(sym_parts)[slot]

    incidence = None
    if provenance:
        # pass 2: map every behavior's windows to window ids
        incidence = np.empty((nb, H1), dtype=np.int32)
        for a in range(0, nb, chunk):
            _, _, _, wk = _window_arrays(outs[a:a + chunk], ins[a:a + chunk], m, codec, sc)
            incidence[a:a + chunk] = np.searchsorted(keys, wk)
        incidence.sort(axis=1)
        dup = np.zeros_like(incidence, dtype=bool)
        dup[:, 1:] = incidence[:, 1:] == incidence[:, :-1]
        incidence[dup] = len(keys)
    return WindowSet(ell, d.output_labels, d.input_labels, codec, keys, pk, sk,
                     tail[:, 1].copy(), tail[:, 2].copy(), tail[:, 0].copy(), symbols,
                     incidence, first_id if provenance else None,
                     inverse if provenance else None, d.ids.copy() if provenance else None)


class Salca:
    """Finite abstraction whose states are ell-sequences.

    State ids index ``state_keys`` (sorted). Transitions are parallel arrays
    ``(src, inp, dst)`` sorted by ``(src, inp, dst)``.
    """

    def __init__(self, windows: WindowSet):
        w = windows
        self.windows = w
        self.ell = w.ell
        self.output_labels = w.output_labels
        self.input_labels = w.input_labels
        self.n_inputs = len(w.input_labels)
        valid = w.last_input != PAD
        cand = np.concatenate([w.prefix_keys[valid], w.suffix_keys])
        self.state_keys, first = np.unique(cand, return_index=True)
        last_out = np.concatenate([w.prefix_last_output[valid], w.last_output])
        self.state_output = last_out[first].astype(np.int16)
        self._state_symbols = None
        if w.symbols is not None:
            syms = np.concatenate([w.symbols[valid][:, :-2], w.symbols[:, 2:]])
            self._state_symbols = syms[first]
        src = np.searchsorted(self.state_keys, w.prefix_keys[valid])
        dst = np.searchsorted(self.state_keys, w.suffix_keys[valid])
        inp = w.last_input[valid].astype(np.int64)
        order = np.lexsort((dst, inp, src))
        self.src, self.inp, self.dst = src[order], inp[order], dst[order]
        self.initial = np.unique(np.searchsorted(self.state_keys, w.suffix_keys[~valid]))
        pair = self.src * self.n_inputs + self.inp
        self._offsets = np.searchsorted(pair, np.arange(len(self.state_keys) * self.n_inputs + 1))

    @property
    def n_states(self) -> int:
        return len(self.state_keys)

    @property
    def n_transitions(self) -> int:
        return len(self.src)

    def post(self, state: int, u: int) -> np.ndarray:
        p = state * self.n_inputs + u
        return self.dst[self._offsets[p]:self._offsets[p + 1]]

    def enabled(self, state: int) -> list[int]:
        return [u for u in range(self.n_inputs) if len(self.post(state, u))]

    def state(self, i: int) -> LSequence:
        if self._state_symbols is None:
            raise RuntimeError("state symbols unavailable (window symbols not stored)")
        return LSequence.from_symbols(self._state_symbols[i].tolist())

    def states(self) -> list[LSequence]:
        return [self.state(i) for i in range(self.n_states)]

    def index_of_key(self, key: int) -> int | None:
        i = int(np.searchsorted(self.state_keys, np.uint64(key)))
        if i < self.n_states and int(self.state_keys[i]) == key:
            return i
        return None

    def index(self, z: LSequence) -> int | None:
        if z.ell != self.ell:
            return None
        return self.index_of_key(self.windows.state_codec.key(z.symbols()))

    def output(self, i: int) -> int:
        return int(self.state_output[i])

    def edges(self):
        """Transitions as ``(LSequence, input, LSequence)`` triples."""
        return {(self.state(s), int(u), self.state(t))
                for s, u, t in zip(self.src.tolist(), self.inp.tolist(), self.dst.tolist())}

    def initial_states(self) -> set[LSequence]:
        return {self.state(i) for i in self.initial.tolist()}

    def contains_behavior(self, g: ExternalBehavior) -> bool:
        return bool(self.contains_batch(np.array([g.outputs]), np.array([g.inputs]).reshape(1, g.H))[0])

    def contains_batch(self, outputs: np.ndarray, inputs: np.ndarray, chunk: int | None = None) -> np.ndarray:
        """Per-row test that every padded window of the behavior is witnessed."""
        outputs = np.asarray(outputs, dtype=np.int16)
        inputs = np.asarray(inputs, dtype=np.int16).reshape(len(outputs), outputs.shape[1] - 1)
        m = self.ell + 1
        W = 2 * m + 1
        codec = self.windows.codec
        n, H1 = outputs.shape
        chunk = chunk or max(1, _CHUNK_SYMBOLS // (2 * (m + H1)))
        res = np.empty(n, dtype=bool)
        for a in range(0, n, chunk):
            _, _, _, wk = _window_arrays(outputs[a:a + chunk], inputs[a:a + chunk], m, codec, None)
            res[a:a + chunk] = np.isin(wk, self.windows.keys).all(axis=1)
        return res

    def to_finite_ts(self) -> FiniteTS:
        """Explicit transition system over LSequence states (for relation checks)."""
        states = self.states()
        return FiniteTS(
            states=tuple(states),
            initial={states[i] for i in self.initial.tolist()},
            n_inputs=self.n_inputs,
            output={z: z.last for z in states},
            transitions={(states[s], int(u), states[t])
                         for s, u, t in zip(self.src.tolist(), self.inp.tolist(), self.dst.tolist())},
            output_labels=self.output_labels,
            input_labels=self.input_labels,
        )


def build_salca(w: WindowSet) -> Salca:
    if len(w) == 0:
        raise ValueError("empty window set")
    return Salca(w)


@dataclass(frozen=True)
class AbstractTracker:
    """Current abstract state of a concrete run plus a sticky violation flag."""

    salca: Salca
    symbols: tuple
    violated: bool

    @property
    def state(self) -> LSequence:
        return LSequence.from_symbols(self.symbols)

    @property
    def state_id(self) -> int | None:
        return self.salca.index_of_key(self.salca.windows.state_codec.key(self.symbols))


def tracker_init(a: Salca, y0: int) -> AbstractTracker:
    symbols = (PAD,) * (2 * a.ell) + (int(y0),)
    sid = a.index_of_key(a.windows.state_codec.key(symbols))
    return AbstractTracker(a, symbols, sid is None or sid not in set(a.initial.tolist()))


def tracker_step(t: AbstractTracker, u: int, y: int) -> AbstractTracker:
    window = t.symbols + (int(u), int(y))
    seen = t.salca.windows.codec.key(window) in t.salca.windows.key_set()
    return AbstractTracker(t.salca, window[2:], t.violated or not seen)


def _walk(ts: FiniteTS, ell: int, H: int | None):
    """Yield ``(x, window)`` for every padded ``(ell+1)``-window ending at ``x``.

    With finite ``H`` only windows of complete ``H``-step behaviors count.
    """
    m = ell + 1
    if H is not None:
        ext = [set(ts.states)]
        for _ in range(H):
            prev = ext[-1]
            ext.append({x for x in ts.states
                        if any(ts.post(x, u) & prev for u in range(ts.n_inputs))})
    level = {(x, (PAD,) * (2 * m) + (ts.output[x],)) for x in ts.initial}
    if H is not None:
        level = {p for p in level if p[0] in ext[H]}
    seen = set(level)
    depth = 0
    while level:
        yield from level
        if H is not None and depth == H:
            break
        depth += 1
        nxt = set()
        for x, win in level:
            for u in range(ts.n_inputs):
                for x2 in ts.post(x, u):
                    if H is not None and x2 not in ext[H - depth]:
                        continue
                    p = (x2, win[2:] + (u, ts.output[x2]))
                    if H is not None or p not in seen:
                        nxt.add(p)
        if H is None:
            nxt -= seen
            seen |= nxt
        level = nxt


def exact_windows(ts: FiniteTS, ell: int, H: int | None = None) -> set[LSequence]:
    return {LSequence.from_symbols(win) for _, win in _walk(ts, ell, H)}


def exact_salca(ts: FiniteTS, ell: int, H: int | None = None) -> Salca:
    """Abstraction from the complete window set of ``ts`` (all behaviors up to ``H``; ``None`` saturates)."""
    if H is not None and H < ell + 1:
        raise ValueError(f"horizon H={H} must be at least ell+1={ell + 1}")
    labels_y = ts.output_labels or tuple(f"y{i}" for i in range(max(ts.output.values()) + 1))
    labels_u = ts.input_labels or tuple(f"u{i}" for i in range(ts.n_inputs))
    w = WindowSet.from_windows(exact_windows(ts, ell, H), ell, labels_y, labels_u)
    return build_salca(w)


def ces_relation(ts: FiniteTS, ell: int, H: int | None = None) -> set[tuple]:
    """Pairs ``(x, zeta)`` where ``zeta`` is an ell-window some run can show on arrival at ``x``."""
    return {(x, LSequence.from_symbols(win[2:])) for x, win in _walk(ts, ell, H)}


def graph_accepts(a: Salca, g: ExternalBehavior) -> bool:
    """Path search: does some run of ``a`` from an initial state produce ``g``?"""
    frontier = {i for i in a.initial.tolist() if a.output(i) == g.outputs[0]}
    for u, y in zip(g.inputs, g.outputs[1:]):
        frontier = {int(t) for s in frontier for t in a.post(s, u) if a.output(int(t)) == y}
        if not frontier:
            return False
    return bool(frontier)


def reachable_states(a: Salca) -> set[int]:
    seen = set(a.initial.tolist())
    q = deque(seen)
    while q:
        s = q.popleft()
        for u in range(a.n_inputs):
            for t in a.post(s, u).tolist():
                if t not in seen:
                    seen.add(t)
                    q.append(t)
    return seen
