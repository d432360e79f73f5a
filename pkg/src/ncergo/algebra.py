"""Finite direct sums of complex matrix blocks with weighted traces.

An algebra here is M_{d_1} + ... + M_{d_B} with a trace
tau(x) = sum_b w_b tr(x_b), w_b > 0. Elements are immutable tuples of dense
blocks. All norms, moduli and spectral objects are computed blockwise from
eigenvalue or singular-value decompositions; nothing in this module mutates
shared state, so values can be used freely across threads.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from numbers import Number
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import NumericError, StructuralError

HERM_HINT_RTOL = 1e-12
PROJ_TOL = 1e-10
ENDPOINT_TOL = 1e-10


def format_float(v: float) -> str:
    """17 significant digits: enough to round-trip any double exactly."""
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# multi-indices and boxes

def min_coordinate(k: Sequence[int]) -> int:
    return min(k)


def max_coordinate(k: Sequence[int]) -> int:
    return max(k)


def volume(k: Sequence[int]) -> int:
    out = 1
    for c in k:
        out *= int(c)
    return out


def validate_multi_index(k: Sequence[int]) -> tuple[int, ...]:
    kt = tuple(int(c) for c in k)
    if len(kt) == 0:
        raise ValueError("multi-index must have dimension >= 1")
    if any(c < 1 for c in kt):
        raise ValueError(f"multi-index components must be >= 1, got {kt}")
    return kt


@dataclass(frozen=True)
class Box:
    """Axis-aligned lattice box [lower_1, upper_1] x ... x [lower_d, upper_d]."""

    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def __post_init__(self):
        lo = validate_multi_index(self.lower)
        up = validate_multi_index(self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if len(lo) != len(up):
            raise ValueError("box corners must share a dimension")
        if any(l > u for l, u in zip(lo, up)):
            raise ValueError(f"empty box: lower {lo} exceeds upper {up}")

    @classmethod
    def full(cls, upper: Sequence[int]) -> "Box":
        up = validate_multi_index(upper)
        return cls((1,) * len(up), up)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(u - l + 1 for l, u in zip(self.lower, self.upper))

    @property
    def size(self) -> int:
        return volume(self.shape)

    def contains(self, k: Sequence[int]) -> bool:
        return len(k) == self.dim and all(
            l <= c <= u for c, l, u in zip(k, self.lower, self.upper)
        )

    def indices(self) -> Iterator[tuple[int, ...]]:
        """Lexicographic iteration (last coordinate fastest)."""
        return itertools.product(
            *(range(l, u + 1) for l, u in zip(self.lower, self.upper))
        )


# ---------------------------------------------------------------------------
# algebra and elements

class Algebra:
    """Block dimensions plus strictly positive trace weights."""

    __slots__ = ("block_dims", "trace_weights", "_slices")

    def __init__(self, block_dims: Sequence[int], trace_weights: Sequence[float] | None = None):
        dims = tuple(int(d) for d in block_dims)
        if len(dims) == 0 or any(d < 1 for d in dims):
            raise ValueError(f"block dimensions must be >= 1, got {dims}")
        if trace_weights is None:
            weights = (1.0,) * len(dims)
        else:
            weights = tuple(float(w) for w in trace_weights)
        if len(weights) != len(dims):
            raise ValueError("one trace weight per block required")
        if any(not np.isfinite(w) or w <= 0 for w in weights):
            raise ValueError(f"trace weights must be positive and finite, got {weights}")
        self.block_dims = dims
        self.trace_weights = weights
        slices, off = [], 0
        for d in dims:
            slices.append(slice(off, off + d * d))
            off += d * d
        self._slices = tuple(slices)

    @property
    def num_blocks(self) -> int:
        return len(self.block_dims)

    @property
    def basis_size(self) -> int:
        """Length of the vectorized representation, sum of squared dims."""
        return sum(d * d for d in self.block_dims)

    @property
    def total_dim(self) -> int:
        return sum(self.block_dims)

    def total_trace(self) -> float:
        """tau(1)."""
        return float(sum(w * d for w, d in zip(self.trace_weights, self.block_dims)))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Algebra)
            and self.block_dims == other.block_dims
            and self.trace_weights == other.trace_weights
        )

    def __hash__(self) -> int:
        return hash((self.block_dims, self.trace_weights))

    def __repr__(self) -> str:
        return f"Algebra(block_dims={self.block_dims}, trace_weights={self.trace_weights})"

    def element(self, blocks: Iterable[np.ndarray], hermitian_hint: bool | None = None) -> "Element":
        return Element(self, blocks, hermitian_hint)

    def zero(self) -> "Element":
        return Element(
            self, [np.zeros((d, d), dtype=np.complex128) for d in self.block_dims], True
        )

    def identity(self) -> "Element":
        return Element(
            self, [np.eye(d, dtype=np.complex128) for d in self.block_dims], True
        )

    def scalar(self, value: complex) -> "Element":
        return Element(
            self,
            [value * np.eye(d, dtype=np.complex128) for d in self.block_dims],
            bool(np.imag(value) == 0),
        )

    def basis_element(self, block: int, row: int, col: int) -> "Element":
        blocks = [np.zeros((d, d), dtype=np.complex128) for d in self.block_dims]
        blocks[block][row, col] = 1.0
        return Element(self, blocks)

    def random_element(
        self, rng: np.random.Generator, kind: str = "general", scale: float = 1.0
    ) -> "Element":
        """Seeded dense element; kind in {general, hermitian, positive}."""
        blocks = []
        for d in self.block_dims:
            g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            if kind == "general":
                b = g / np.sqrt(2 * d)
            elif kind == "hermitian":
                b = (g + g.conj().T) / (2 * np.sqrt(d))
            elif kind == "positive":
                b = (g @ g.conj().T) / (2 * d)
            else:
                raise ValueError(f"unknown random element kind {kind!r}")
            blocks.append(scale * b)
        hint = True if kind in ("hermitian", "positive") else None
        return Element(self, blocks, hint)

    def vec(self, x: "Element") -> np.ndarray:
        """Concatenated row-major vectorization of the blocks."""
        return np.concatenate([b.reshape(-1) for b in x.blocks])

    def unvec(self, v: np.ndarray, hermitian_hint: bool | None = None) -> "Element":
        v = np.asarray(v, dtype=np.complex128).reshape(-1)
        if v.shape[0] != self.basis_size:
            raise StructuralError(
                f"vector length {v.shape[0]} does not match basis size {self.basis_size}"
            )
        blocks = [v[s].reshape(d, d) for s, d in zip(self._slices, self.block_dims)]
        return Element(self, blocks, hermitian_hint)


class Element:
    """Immutable member of an Algebra: one dense complex block per summand."""

    __slots__ = ("algebra", "blocks", "hermitian_hint")

    def __init__(
        self,
        algebra: Algebra,
        blocks: Iterable[np.ndarray],
        hermitian_hint: bool | None = None,
    ):
        mats = []
        blocks = list(blocks)
        if len(blocks) != algebra.num_blocks:
            raise StructuralError(
                f"expected {algebra.num_blocks} blocks, got {len(blocks)}"
            )
        for b, d in zip(blocks, algebra.block_dims):
            m = np.array(b, dtype=np.complex128, copy=True, order="C")
            if m.shape != (d, d):
                raise StructuralError(f"block shape {m.shape} does not match dim {d}")
            if not np.all(np.isfinite(m.view(np.float64))):
                raise NumericError("non-finite entries in element block")
            m.setflags(write=False)
            mats.append(m)
        self.algebra = algebra
        self.blocks = tuple(mats)
        if hermitian_hint:
            dev = self._hermitian_deviation()
            bound = HERM_HINT_RTOL * (1.0 + self.max_abs())
            if dev > bound:
                raise StructuralError(
                    f"hermitian_hint set but max |x - x*| entry is {dev:.3e} > {bound:.3e}"
                )
        self.hermitian_hint = hermitian_hint

    # -- structure ---------------------------------------------------------

    def _hermitian_deviation(self) -> float:
        return max(
            float(np.abs(b - b.conj().T).max()) if b.size else 0.0 for b in self.blocks
        )

    def max_abs(self) -> float:
        return max(float(np.abs(b).max()) if b.size else 0.0 for b in self.blocks)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self._hermitian_deviation() <= tol * (1.0 + self.max_abs())

    def adjoint(self) -> "Element":
        return Element(
            self.algebra, [b.conj().T for b in self.blocks], self.hermitian_hint
        )

    def real_part(self) -> "Element":
        return Element(self.algebra, [(b + b.conj().T) / 2 for b in self.blocks], True)

    def imag_part(self) -> "Element":
        """Hermitian y with x = real_part(x) + i y."""
        return Element(
            self.algebra, [(b - b.conj().T) / 2j for b in self.blocks], True
        )

    # -- arithmetic ---------------------------------------------------------

    def _check_same_algebra(self, other: "Element"):
        if self.algebra != other.algebra:
            raise StructuralError("elements live in different algebras")

    def __add__(self, other: "Element") -> "Element":
        self._check_same_algebra(other)
        hint = True if (self.hermitian_hint and other.hermitian_hint) else None
        return Element(
            self.algebra,
            [a + b for a, b in zip(self.blocks, other.blocks)],
            hint,
        )

    def __sub__(self, other: "Element") -> "Element":
        self._check_same_algebra(other)
        hint = True if (self.hermitian_hint and other.hermitian_hint) else None
        return Element(
            self.algebra,
            [a - b for a, b in zip(self.blocks, other.blocks)],
            hint,
        )

    def __neg__(self) -> "Element":
        return Element(self.algebra, [-b for b in self.blocks], self.hermitian_hint)

    def __mul__(self, scalar) -> "Element":
        if not isinstance(scalar, Number):
            return NotImplemented
        hint = self.hermitian_hint if float(np.imag(complex(scalar))) == 0.0 else None
        return Element(self.algebra, [scalar * b for b in self.blocks], hint)

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Element":
        return self * (1.0 / scalar)

    def __matmul__(self, other: "Element") -> "Element":
        self._check_same_algebra(other)
        return Element(
            self.algebra, [a @ b for a, b in zip(self.blocks, other.blocks)]
        )

    def __repr__(self) -> str:
        return f"Element(dims={self.algebra.block_dims}, max_abs={self.max_abs():.4g})"


@dataclass(frozen=True)
class Projection:
    """Element verified to be an orthogonal projection.

    notes carries warnings recorded during construction, e.g. spectral
    endpoint ambiguities.
    """

    element: Element
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        e = self.element
        dev_idem = max(
            float(np.abs(b @ b - b).max()) for b in e.blocks
        )
        if not e.is_hermitian(PROJ_TOL):
            raise StructuralError("projection candidate is not Hermitian")
        if dev_idem > PROJ_TOL:
            raise StructuralError(
                f"projection candidate fails e*e = e by {dev_idem:.3e}"
            )
        for b in e.blocks:
            eig = np.linalg.eigvalsh((b + b.conj().T) / 2)
            if np.any(np.minimum(np.abs(eig), np.abs(eig - 1.0)) > 1e-8):
                raise StructuralError("projection eigenvalues not within 1e-8 of {0,1}")

    @property
    def algebra(self) -> Algebra:
        return self.element.algebra

    def complement(self) -> "Projection":
        return Projection(self.element.algebra.identity() - self.element, self.notes)

    def compress(self, x: Element) -> Element:
        """e x e."""
        return self.element @ x @ self.element


# ---------------------------------------------------------------------------
# trace, norms, spectral operations

def trace(x: Element) -> complex:
    """Weighted trace; real up to rounding when x is Hermitian."""
    return complex(
        sum(w * np.trace(b) for w, b in zip(x.algebra.trace_weights, x.blocks))
    )


def modulus(x: Element) -> Element:
    """(x* x)^(1/2), computed from singular values blockwise."""
    out = []
    for b in x.blocks:
        u, s, vh = np.linalg.svd(b)
        out.append(vh.conj().T @ (s[:, None] * vh))
    return Element(x.algebra, out, True)


def singular_values(x: Element) -> list[np.ndarray]:
    """Eigenvalues of the modulus, one descending array per block."""
    return [np.linalg.svd(b, compute_uv=False) for b in x.blocks]


def lp_norm(x: Element, p: float) -> float:
    """Weighted Schatten-type norm; p = inf gives the operator norm."""
    if p != np.inf:
        p = float(p)
        if not np.isfinite(p) or p < 1:
            raise ValueError(f"norm order must satisfy p >= 1 or p = inf, got {p}")
    svals = singular_values(x)
    if p == np.inf:
        return max(float(s[0]) if s.size else 0.0 for s in svals)
    total = sum(
        w * float(np.sum(s**p)) for w, s in zip(x.algebra.trace_weights, svals)
    )
    return float(total ** (1.0 / p))


def hermitian_eig(x: Element) -> list[tuple[np.ndarray, np.ndarray]]:
    """Blockwise (eigenvalues, eigenvectors) of a Hermitian element."""
    return [np.linalg.eigh((b + b.conj().T) / 2) for b in x.blocks]


def eigenvalues_weighted(x: Element) -> list[tuple[float, float]]:
    """(eigenvalue, trace weight) pairs across all blocks of a Hermitian x."""
    pairs = []
    for w, (eig, _) in zip(x.algebra.trace_weights, hermitian_eig(x)):
        pairs.extend((float(v), w) for v in eig)
    return pairs


def positive_part(x: Element) -> Element:
    out = []
    for eig, vecs in hermitian_eig(x):
        lam = np.maximum(eig, 0.0)
        out.append((vecs * lam) @ vecs.conj().T)
    return Element(x.algebra, out, True)


def negative_part(x: Element) -> Element:
    """Positive element n with x = positive_part(x) - n."""
    return positive_part(-x)


def is_positive(x: Element, tol: float = 1e-10) -> bool:
    if not x.is_hermitian(tol):
        return False
    return all(
        float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) >= -tol for b in x.blocks
    )


def decompose_four_positives(x: Element) -> tuple[Element, Element, Element, Element]:
    """Four positives (x0, x1, x2, x3) with x = x0 + i x1 - x2 - i x3."""
    re, im = x.real_part(), x.imag_part()
    return (
        positive_part(re),
        positive_part(im),
        negative_part(re),
        negative_part(im),
    )


def spectral_projection(x: Element, interval: tuple[float, float]) -> Projection:
    """Projection onto eigenspaces with eigenvalue in the closed interval.

    Eigenvalues within 1e-10 of an endpoint are flagged in the projection's
    notes; the closed-interval rule decides inclusion either way.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if np.isnan(lo) or np.isnan(hi) or lo > hi:
        raise ValueError(f"invalid closed interval [{lo}, {hi}]")
    if not x.is_hermitian(1e-10):
        raise StructuralError("spectral projection requires a Hermitian element")
    blocks, notes = [], []
    for bi, (eig, vecs) in enumerate(hermitian_eig(x)):
        sel = (eig >= lo) & (eig <= hi)
        for endpoint in (lo, hi):
            if np.isfinite(endpoint):
                close = np.abs(eig - endpoint) <= ENDPOINT_TOL
                for v in eig[close]:
                    notes.append(
                        "endpoint ambiguity: block %d eigenvalue %s within %g of %s"
                        % (bi, format_float(v), ENDPOINT_TOL, format_float(endpoint))
                    )
        vs = vecs[:, sel]
        blocks.append(vs @ vs.conj().T)
    return Projection(Element(x.algebra, blocks, True), tuple(notes))


# ---------------------------------------------------------------------------
# text format

def element_to_text(x: Element) -> str:
    """Header line with dims and weights, then one row-major block per line."""
    alg = x.algebra
    header = "blocks: %s; weights: %s" % (
        ",".join(str(d) for d in alg.block_dims),
        ",".join(format_float(w) for w in alg.trace_weights),
    )
    lines = [header]
    for b in x.blocks:
        flat = b.reshape(-1)
        lines.append(
            " ".join(
                "%s,%s" % (format_float(v.real), format_float(v.imag)) for v in flat
            )
        )
    return "\n".join(lines) + "\n"


def element_from_text(text: str) -> Element:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise StructuralError("empty element text")
    header = lines[0]
    try:
        blocks_part, weights_part = header.split(";")
        dims = [int(t) for t in blocks_part.split(":", 1)[1].split(",")]
        weights = [float(t) for t in weights_part.split(":", 1)[1].split(",")]
    except (ValueError, IndexError) as exc:
        raise StructuralError(f"malformed element header {header!r}") from exc
    alg = Algebra(dims, weights)
    tokens = " ".join(lines[1:]).split()
    expected = alg.basis_size
    if len(tokens) != expected:
        raise StructuralError(f"expected {expected} entries, got {len(tokens)}")
    values = []
    for tok in tokens:
        try:
            re_s, im_s = tok.split(",")
            values.append(complex(float(re_s), float(im_s)))
        except ValueError as exc:
            raise StructuralError(f"malformed entry {tok!r}") from exc
    return alg.unvec(np.array(values, dtype=np.complex128))
