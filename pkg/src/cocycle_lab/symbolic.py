"""Eventually periodic bi-infinite symbol sequences.

A sequence is stored as a finite ``window`` occupying coordinates
``start .. start+len(window)-1`` together with two period words that
repeat forever to the left and to the right.  Everything (shift, equality,
the ``2^-n`` metric, splicing) is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np


def _primitive(word):
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word == word[:p] * (n // p):
            return word[:p]
    return word


def _canonical_tail(word):
    w = _primitive(tuple(word))
    return min(w[i:] + w[:i] for i in range(len(w)))


@dataclass(frozen=True, eq=False)
class SymbolSequence:
    alphabet_size: int
    window: tuple
    left: tuple
    right: tuple
    start: int = 0

    def __post_init__(self):
        k = self.alphabet_size
        if k < 1:
            raise ValueError("alphabet_size must be positive")
        if not self.left or not self.right:
            raise ValueError("tail period words must be non-empty")
        for w in (self.window, self.left, self.right):
            if any((not 0 <= int(a) < k) for a in w):
                raise ValueError(f"symbols must lie in 0..{k - 1}")

    @classmethod
    def periodic(cls, word, alphabet_size):
        """The sequence with ``x_n = word[n mod len(word)]``."""
        word = tuple(int(a) for a in word)
        return cls(alphabet_size, word, word, word, 0)

    @classmethod
    def from_window(cls, alphabet_size, lo, symbols, left=(0,), right=(0,)):
        return cls(alphabet_size, tuple(int(a) for a in symbols),
                   tuple(int(a) for a in left), tuple(int(a) for a in right), lo)

    @property
    def end(self):
        return self.start + len(self.window)

    @cached_property
    def _arrays(self):
        return (np.asarray(self.window, dtype=np.int64),
                np.asarray(self.left, dtype=np.int64),
                np.asarray(self.right, dtype=np.int64))

    def symbol(self, n):
        i = n - self.start
        if 0 <= i < len(self.window):
            return self.window[i]
        if i >= len(self.window):
            return self.right[(i - len(self.window)) % len(self.right)]
        return self.left[i % len(self.left)]

    def symbols(self, lo, hi):
        """Coordinates ``lo .. hi-1`` as an int array."""
        win, left, right = self._arrays
        i = np.arange(lo, hi, dtype=np.int64) - self.start
        out = np.empty(i.shape, dtype=np.int64)
        L = len(win)
        mid = (i >= 0) & (i < L)
        out[mid] = win[i[mid]]
        r = i >= L
        out[r] = right[(i[r] - L) % len(right)]
        lft = i < 0
        out[lft] = left[i[lft] % len(left)]
        return out

    def shifted(self, n=1):
        """``f^n`` of the sequence, where ``(f x)_j = x_{j+1}``."""
        # same symbols, so skip re-validation and share the cached arrays
        out = object.__new__(SymbolSequence)
        out.__dict__.update(self.__dict__)
        object.__setattr__(out, "start", self.start - n)
        return out

    def _period(self):
        return math.lcm(len(self.left), len(self.right))

    def _span(self, other):
        P = math.lcm(self._period(), other._period())
        lo = min(self.start, other.start) - P
        hi = max(self.end, other.end) + P
        return lo, hi

    def first_difference(self, other):
        """Smallest ``|n|`` with ``x_n != y_n``, or ``None`` if equal."""
        lo, hi = self._span(other)
        bound = max(abs(lo), abs(hi)) + 1
        a = self.symbols(-bound, bound + 1)
        b = other.symbols(-bound, bound + 1)
        diff = np.nonzero(a != b)[0]
        if diff.size == 0:
            return None
        return int(np.min(np.abs(diff - bound)))

    def __eq__(self, other):
        if not isinstance(other, SymbolSequence):
            return NotImplemented
        if self.alphabet_size != other.alphabet_size:
            return False
        lo, hi = self._span(other)
        return bool(np.array_equal(self.symbols(lo, hi), other.symbols(lo, hi)))

    def __hash__(self):
        return hash((self.alphabet_size, _canonical_tail(self.left), _canonical_tail(self.right)))

    def _rewindow(self, lo, hi):
        lo = min(lo, self.start)
        hi = max(hi, self.end)
        Lw, R = len(self.left), len(self.right)
        left = tuple(self.left[(t + lo - self.start) % Lw] for t in range(Lw))
        right = tuple(self.right[(t + hi - self.end) % R] for t in range(R))
        window = tuple(int(a) for a in self.symbols(lo, hi))
        return SymbolSequence(self.alphabet_size, window, left, right, lo)

    def splice(self, other, cut=0):
        """Coordinates ``< cut`` from ``self`` and ``>= cut`` from ``other``."""
        a = self._rewindow(min(self.start, cut), cut)
        b = other._rewindow(cut, max(other.end, cut))
        window = a.symbols(a.start, cut).tolist() + b.symbols(cut, b.end).tolist()
        return SymbolSequence(self.alphabet_size, tuple(window), a.left, b.right, a.start)

    def with_symbol(self, n, symbol):
        s = self._rewindow(n, n + 1)
        window = list(s.window)
        window[n - s.start] = int(symbol)
        return replace(s, window=tuple(window))

    def __repr__(self):
        core = "".join(map(str, self.symbols(-4, 0))) + "." + "".join(map(str, self.symbols(0, 5)))
        return f"SymbolSequence(...{core}..., k={self.alphabet_size})"
