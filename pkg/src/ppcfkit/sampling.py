# src/ppcfkit/sampling.py
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np

from .ast import NAT, Label, Term, TyCtx, is_lab
from .errors import PreconditionError
from .machine import AcceptZero, OutOfFuel, RunOutcome, State, drive, state_is
from .typecheck import typecheck

__all__ = ["coin_stream", "sample", "sample_batch", "estimate_prob"]

_MASK64 = (1 << 64) - 1


def coin_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for sample `index` of a batch keyed by `seed`.

    Philox is counter based: the 128-bit key (seed, index) fixes the stream, so
    sample i is the same whether a batch runs serially or split across workers.
    """
    key = ((seed & _MASK64) << 64) | (index & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass
class _RandomTape:
    gen: np.random.Generator

    def read(self, r: Fraction, label: Optional[Label]) -> Union[int, str]:
        # float vs Fraction compares exactly: coin(1) always gives 0, coin(0) never
        return 0 if self.gen.random() < r else 1

    def leftover(self) -> bool:
        return False


def sample(state: State, seed: int, fuel: int, index: int = 0) -> RunOutcome:
    """One run with coin bits drawn from the (seed, index) stream."""
    if not state_is(state, is_lab):
        raise PreconditionError("sample needs a term without labeled coins")
    return drive(state, _RandomTape(coin_stream(seed, index)), fuel)


def sample_batch(state: State, seed: int, n: int, fuel: int) -> List[RunOutcome]:
    return [sample(state, seed, fuel, i) for i in range(n)]


def estimate_prob(term: Term, n: int, seed: int, fuel: int) -> Tuple[float, float, float]:
    """(estimate, stderr, timeout_fraction) of reaching 0 over n samples."""
    if n <= 0:
        raise PreconditionError("estimate_prob needs n >= 1 samples")
    if typecheck(TyCtx(), term) != NAT:
        raise PreconditionError("estimate_prob needs a closed term of type nat")
    outs = sample_batch(State.initial(term), seed, n, fuel)
    hits = np.fromiter((isinstance(o, AcceptZero) for o in outs), dtype=float, count=n)
    timeouts = sum(isinstance(o, OutOfFuel) for o in outs)
    est = float(hits.mean())
    stderr = float(hits.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return est, stderr, timeouts / n
