"""Weighted multiparameter averages of iterated contractions.

The object computed everywhere below is

    A_N(x) = (1/|N|) * sum_{k=1..N} a(k) * T_d^{k_d} ... T_1^{k_1} (x)

with |N| = N_1 ... N_d and the first listed map acting first. Three
evaluation routes are provided and cross-checked by the test suite:

  direct      explicit lexicographic summation at a single N,
  grid        prefix sums over a whole box of N at once (compensated
              accumulation, O(box) map applications),
  factorized  per-axis one-parameter averages, valid for trig polynomial
              weights only, O(sum N_i) map applications per term.

All routes are sequential and deterministic: identical inputs produce
bitwise identical results.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterator, Sequence

import numpy as np

from ._numeric import DEFAULT_BUDGET, kahan_cumsum
from .algebra import Algebra, Box, Element, validate_multi_index, volume
from .contraction import LinearOperator, cesaro_limit_projection
from .errors import BudgetError, StructuralError
from .weights import TrigPolynomial, Weight, eval_weight_box, require_trig


def _check_inputs(a: Weight, maps: Sequence[LinearOperator], x: Element):
    if len(maps) == 0:
        raise StructuralError("at least one map is required")
    if a.dimension != len(maps):
        raise StructuralError(
            f"weight dimension {a.dimension} != number of maps {len(maps)}"
        )
    for t in maps:
        if t.algebra != x.algebra:
            raise StructuralError("map algebra does not match the element's algebra")


def _transfer_stack(maps: Sequence[LinearOperator]) -> list[np.ndarray]:
    return [t.transfer_matrix() for t in maps]


class AverageFamily:
    """Averages A_N for every N in a box, stored as vectorized rows.

    The box shape is part of the record: values exist exactly at the tested
    indices and nothing is claimed beyond them.
    """

    def __init__(self, algebra: Algebra, box: Box, data: np.ndarray,
                 provenance: str, applications: int = 0):
        expected = box.shape + (algebra.basis_size,)
        if data.shape != expected:
            raise StructuralError(f"family data shape {data.shape} != {expected}")
        self.algebra = algebra
        self.box = box
        self._data = np.ascontiguousarray(data, dtype=np.complex128)
        self._data.setflags(write=False)
        self.provenance = provenance
        self.applications = int(applications)

    def value(self, n: Sequence[int]) -> Element:
        nt = validate_multi_index(n)
        if not self.box.contains(nt):
            raise KeyError(f"index {nt} outside family box {self.box}")
        off = tuple(c - l for c, l in zip(nt, self.box.lower))
        return self.algebra.unvec(self._data[off])

    __getitem__ = value

    def items(self) -> Iterator[tuple[tuple[int, ...], Element]]:
        for idx in self.box.indices():
            yield idx, self.value(idx)

    def elements(self) -> list[Element]:
        return [el for _, el in self.items()]

    def raw(self) -> np.ndarray:
        return self._data

    def restrict(self, box: Box) -> "AverageFamily":
        if not (self.box.contains(box.lower) and self.box.contains(box.upper)):
            raise StructuralError(f"box {box} is not contained in {self.box}")
        sel = tuple(
            slice(l - bl, u - bl + 1)
            for l, u, bl in zip(box.lower, box.upper, self.box.lower)
        )
        return AverageFamily(
            self.algebra, box, self._data[sel], self.provenance, self.applications
        )

    def minus_constant(self, el: Element) -> "AverageFamily":
        if el.algebra != self.algebra:
            raise StructuralError("constant lives in a different algebra")
        return AverageFamily(
            self.algebra,
            self.box,
            self._data - self.algebra.vec(el),
            self.provenance + "-shifted",
            self.applications,
        )

    def hermitian_split(self) -> tuple["AverageFamily", "AverageFamily"]:
        """Families of Hermitian real and imaginary parts."""
        re = np.empty_like(self._data)
        im = np.empty_like(self._data)
        for seg, d in zip(self.algebra._slices, self.algebra.block_dims):
            blk = self._data[..., seg].reshape(self.box.shape + (d, d))
            adj = np.conj(np.swapaxes(blk, -1, -2))
            re[..., seg] = ((blk + adj) / 2).reshape(self.box.shape + (d * d,))
            im[..., seg] = ((blk - adj) / 2j).reshape(self.box.shape + (d * d,))
        return (
            AverageFamily(self.algebra, self.box, re, self.provenance + "-re",
                          self.applications),
            AverageFamily(self.algebra, self.box, im, self.provenance + "-im",
                          self.applications),
        )


def _iterate_powers(mats: list[np.ndarray], x0: np.ndarray, upper: tuple[int, ...],
                    visit) -> int:
    """Walk T^k x over the box [1, upper] with one map application per node.

    visit(flat_offset, vec) is called for every complete index, in
    lexicographic order; the flat offset enumerates the box in C order.
    Returns the number of map applications performed.
    """
    d = len(upper)
    strides = [0] * d
    strides[d - 1] = 1
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * upper[i + 1]
    count = 0

    def rec(axis: int, base: np.ndarray, off: int):
        nonlocal count
        m = mats[axis]
        v = base
        for t in range(upper[axis]):
            v = m @ v
            count += 1
            pos = off + t * strides[axis]
            if axis == d - 1:
                visit(pos, v)
            else:
                rec(axis + 1, v, pos)

    rec(0, x0, 0)
    return count


def weighted_average_direct(
    a: Weight,
    maps: Sequence[LinearOperator],
    x: Element,
    n: Sequence[int],
    budget: int = DEFAULT_BUDGET,
) -> Element:
    """A_N(x) by explicit summation in lexicographic order."""
    _check_inputs(a, maps, x)
    nt = validate_multi_index(n)
    if len(nt) != len(maps):
        raise StructuralError("index dimension does not match the number of maps")
    if volume(nt) > budget:
        raise BudgetError(
            f"|N| = {volume(nt)} exceeds the budget {budget}; "
            "use the grid or factorized evaluator"
        )
    alg = x.algebra
    w = eval_weight_box(a, nt).reshape(-1)
    acc = np.zeros(alg.basis_size, dtype=np.complex128)

    def visit(pos: int, v: np.ndarray):
        nonlocal acc
        acc = acc + w[pos] * v

    _iterate_powers(_transfer_stack(maps), alg.vec(x), nt, visit)
    return alg.unvec(acc / volume(nt))


def weighted_average_grid(
    a: Weight,
    maps: Sequence[LinearOperator],
    x: Element,
    box: Box,
    budget: int = DEFAULT_BUDGET,
) -> AverageFamily:
    """All A_N for N in the box, via compensated prefix sums.

    Needs O(points of [1, box.upper]) map applications in total, then one
    compensated cumulative sum per axis.
    """
    _check_inputs(a, maps, x)
    if box.dim != len(maps):
        raise StructuralError("box dimension does not match the number of maps")
    upper = box.upper
    if volume(upper) > budget:
        raise BudgetError(
            f"grid over [1, {upper}] has {volume(upper)} points, budget is {budget}; "
            "use the factorized evaluator or raise the budget"
        )
    alg = x.algebra
    dim = alg.basis_size
    grid = np.empty(upper + (dim,), dtype=np.complex128)
    flat = grid.reshape(-1, dim)

    def visit(pos: int, v: np.ndarray):
        flat[pos] = v

    apps = _iterate_powers(_transfer_stack(maps), alg.vec(x), upper, visit)
    grid *= eval_weight_box(a, upper)[..., None]
    for axis in range(len(upper)):
        grid = kahan_cumsum(grid, axis)
    vols = reduce(
        np.multiply.outer,
        [np.arange(1, u + 1, dtype=np.float64) for u in upper],
    ).reshape(upper)
    grid /= vols[..., None]
    sel = tuple(slice(l - 1, u) for l, u in zip(box.lower, box.upper))
    return AverageFamily(alg, box, grid[sel], "grid", apps)


def weighted_average_factorized(
    a: Weight,
    maps: Sequence[LinearOperator],
    x: Element,
    n: Sequence[int],
) -> Element:
    """A_N(x) as a sum over terms of composed one-parameter averages.

    For a term with generator phases theta_i the multi average factorizes
    into per-axis averages of the phase-twisted maps, applied axis 1 first;
    this costs O(sum N_i) applications per term instead of O(|N|).
    """
    poly = require_trig(a)
    _check_inputs(poly, maps, x)
    nt = validate_multi_index(n)
    if len(nt) != len(maps):
        raise StructuralError("index dimension does not match the number of maps")
    alg = x.algebra
    mats = _transfer_stack(maps)
    acc = np.zeros(alg.basis_size, dtype=np.complex128)
    for term in poly.terms:
        v = alg.vec(x)
        for axis, (mat, steps) in enumerate(zip(mats, nt)):
            lam = np.exp(1j * term.phases[axis])
            z = v
            s = np.zeros_like(v)
            for _ in range(steps):
                z = lam * (mat @ z)
                s = s + z
            v = s / steps
        acc += term.coefficient * v
    return alg.unvec(acc)


def split_real_imag(
    a: Weight,
    maps: Sequence[LinearOperator],
    x: Element,
    n: Sequence[int],
    budget: int = DEFAULT_BUDGET,
) -> tuple[Element, Element]:
    """Averages taken against Re a(k) and Im a(k) separately.

    Their recombination A_re + i * A_im reproduces the full average exactly
    up to rounding.
    """
    _check_inputs(a, maps, x)
    nt = validate_multi_index(n)
    if volume(nt) > budget:
        raise BudgetError(
            f"|N| = {volume(nt)} exceeds the budget {budget}; "
            "use the grid or factorized evaluator"
        )
    alg = x.algebra
    w = eval_weight_box(a, nt).reshape(-1)
    acc_re = np.zeros(alg.basis_size, dtype=np.complex128)
    acc_im = np.zeros(alg.basis_size, dtype=np.complex128)

    def visit(pos: int, v: np.ndarray):
        nonlocal acc_re, acc_im
        acc_re = acc_re + w[pos].real * v
        acc_im = acc_im + w[pos].imag * v

    _iterate_powers(_transfer_stack(maps), alg.vec(x), nt, visit)
    size = volume(nt)
    return alg.unvec(acc_re / size), alg.unvec(acc_im / size)


@dataclass(frozen=True)
class LimitResult:
    value: Element
    notes: tuple[str, ...]


def limit_oracle(
    a: Weight, maps: Sequence[LinearOperator], x: Element
) -> LimitResult:
    """Large-box limit of A_N for trig polynomial weights.

    Each term contributes the composition of the phase-matched eigenvalue-1
    spectral projections of its twisted maps; conditioning warnings from
    those projections are propagated.
    """
    poly = require_trig(a)
    _check_inputs(poly, maps, x)
    alg = x.algebra
    acc = np.zeros(alg.basis_size, dtype=np.complex128)
    notes: list[str] = []
    for term in poly.terms:
        v = alg.vec(x)
        for axis, t in enumerate(maps):
            q = cesaro_limit_projection(t, np.exp(1j * term.phases[axis]))
            notes.extend(q.notes)
            v = q.transfer_matrix() @ v
        acc += term.coefficient * v
    return LimitResult(alg.unvec(acc), tuple(notes))


def ergodic_average_family(
    maps: Sequence[LinearOperator], x: Element, box: Box,
    budget: int = DEFAULT_BUDGET,
) -> AverageFamily:
    """Unweighted averages M_N(T)x over the box."""
    return weighted_average_grid(
        TrigPolynomial.constant(box.dim), maps, x, box, budget
    )
