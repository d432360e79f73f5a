"""Linear maps on a block algebra and the absolute-contraction checks.

A map T qualifies as an absolute contraction when it is positive, does not
expand the operator norm, and does not increase the weighted trace on
positive elements. For the kinds constructed here those properties hold by
construction and are re-verified numerically:

  - operator-norm contraction via 1 - T(1) >= 0 (positive maps attain their
    norm at the identity),
  - trace domination via 1 - T'(1) >= 0 where T' is the adjoint for the
    pairing tau(T(x) y) = tau(x T'(y)),
  - complete positivity via the smallest eigenvalue of the Choi matrix of
    the map extended to the enveloping matrix algebra (strictly stronger
    than positivity, and what the constructed kinds actually satisfy).

Raw transfer-matrix maps can be loaded and verified too; a raw map that is
not Hermiticity-preserving fails structurally rather than by margin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .algebra import Algebra, Element, Projection, element_from_text
from .errors import StructuralError, UnsupportedError

UNITARY_TOL = 1e-10
KIND_TOL = 1e-10


class LinearOperator:
    """Base for linear maps on one algebra; subclasses define apply()."""

    def __init__(self, algebra: Algebra, notes: tuple[str, ...] = ()):
        self.algebra = algebra
        self.notes = tuple(notes)
        self._transfer: np.ndarray | None = None

    def apply(self, x: Element) -> Element:
        raise NotImplementedError

    def transfer_matrix(self) -> np.ndarray:
        """Matrix acting on vectorized elements; built once and cached."""
        if self._transfer is None:
            alg = self.algebra
            dim = alg.basis_size
            cols = np.empty((dim, dim), dtype=np.complex128)
            col = 0
            for b, d in enumerate(alg.block_dims):
                for i in range(d):
                    for j in range(d):
                        y = self.apply(alg.basis_element(b, i, j))
                        cols[:, col] = alg.vec(y)
                        col += 1
            self._transfer = cols
        return self._transfer

    def apply_vec(self, v: np.ndarray) -> np.ndarray:
        return self.transfer_matrix() @ v


class MatrixOperator(LinearOperator):
    """Raw linear map given by an explicit transfer matrix."""

    def __init__(self, algebra: Algebra, matrix: np.ndarray, notes: tuple[str, ...] = ()):
        super().__init__(algebra, notes)
        m = np.array(matrix, dtype=np.complex128, copy=True)
        dim = algebra.basis_size
        if m.shape != (dim, dim):
            raise StructuralError(
                f"transfer matrix shape {m.shape} does not match basis size {dim}"
            )
        m.setflags(write=False)
        self._transfer = m

    def apply(self, x: Element) -> Element:
        return self.algebra.unvec(self._transfer @ self.algebra.vec(x))


def operator_from_function(algebra: Algebra, fn: Callable[[Element], Element],
                           notes: tuple[str, ...] = ()) -> MatrixOperator:
    """Materialize a raw map from a python callable (positivity unverified)."""

    class _Probe(LinearOperator):
        def apply(self, x):
            return fn(x)

    probe = _Probe(algebra)
    return MatrixOperator(algebra, probe.transfer_matrix(),
                          notes + ("positivity unverified",))


class AbsoluteContraction(LinearOperator):
    """Kind-tagged contraction with a structural apply()."""

    def __init__(self, algebra: Algebra, kind: str, params: dict,
                 notes: tuple[str, ...] = ()):
        super().__init__(algebra, notes)
        self.kind = kind
        self.params = params

    def apply(self, x: Element) -> Element:
        if x.algebra != self.algebra:
            raise StructuralError("element algebra does not match the map's algebra")
        p = self.params
        if self.kind == "scaled_unitary":
            s, u = p["scale"], p["unitary"]
            blocks = [
                s * (ub.conj().T @ xb @ ub) for ub, xb in zip(u.blocks, x.blocks)
            ]
            return Element(self.algebra, blocks, x.hermitian_hint)
        if self.kind == "pinching":
            acc = self.algebra.zero()
            for proj in p["projections"]:
                e = proj.element
                acc = acc + (e @ x @ e)
            return acc
        if self.kind == "schur_multiplier":
            h = p["coefficients"]
            return Element(self.algebra, [h * x.blocks[0]])
        if self.kind == "kraus":
            blocks = [np.zeros_like(b) for b in x.blocks]
            for k in p["operators"]:
                for i, (kb, xb) in enumerate(zip(k.blocks, x.blocks)):
                    blocks[i] = blocks[i] + kb.conj().T @ xb @ kb
            return Element(self.algebra, blocks, x.hermitian_hint)
        if self.kind == "convex_combination":
            acc = self.algebra.zero()
            for lam, sub in p["terms"]:
                acc = acc + lam * sub.apply(x)
            return acc
        if self.kind == "composition":
            y = x
            for sub in p["maps"]:
                y = sub.apply(y)
            return y
        raise UnsupportedError(f"unknown contraction kind {self.kind!r}")

    def __repr__(self) -> str:
        return f"AbsoluteContraction(kind={self.kind!r}, dims={self.algebra.block_dims})"


# ---------------------------------------------------------------------------
# kind constructors

def _as_element(algebra: Algebra, obj) -> Element:
    if isinstance(obj, Element):
        el = obj
    elif isinstance(obj, str):
        el = element_from_text(obj)
    else:
        raise StructuralError(f"cannot interpret {type(obj).__name__} as an element")
    if el.algebra != algebra:
        raise StructuralError("operand algebra does not match the target algebra")
    return el


def scaled_unitary(algebra: Algebra, unitary, scale: float = 1.0) -> AbsoluteContraction:
    """x -> scale * U* x U with U unitary and 0 < scale <= 1."""
    u = _as_element(algebra, unitary)
    s = float(scale)
    if not (0.0 < s <= 1.0):
        raise StructuralError(f"scale must lie in (0, 1], got {s}")
    for b in u.blocks:
        dev = float(np.abs(b.conj().T @ b - np.eye(b.shape[0])).max())
        if dev > UNITARY_TOL:
            raise StructuralError(f"unitarity violated by {dev:.3e}")
    return AbsoluteContraction(algebra, "scaled_unitary", {"scale": s, "unitary": u})


def pinching(projections: Sequence[Projection | Element]) -> AbsoluteContraction:
    """x -> sum_i P_i x P_i with orthogonal projections, sum P_i <= 1."""
    if not projections:
        raise StructuralError("pinching needs at least one projection")
    projs = [p if isinstance(p, Projection) else Projection(p) for p in projections]
    algebra = projs[0].algebra
    if any(p.algebra != algebra for p in projs):
        raise StructuralError("pinching projections live in different algebras")
    total = algebra.zero()
    for p in projs:
        total = total + p.element
    gap = algebra.identity() - total
    low = min(float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) for b in gap.blocks)
    if low < -KIND_TOL:
        raise StructuralError(f"projection sum exceeds the identity by {-low:.3e}")
    return AbsoluteContraction(algebra, "pinching", {"projections": tuple(projs)})


def schur_multiplier(algebra: Algebra, coefficients: np.ndarray) -> AbsoluteContraction:
    """Entrywise multiplier x -> H o x; single-block algebras only."""
    if algebra.num_blocks != 1:
        raise UnsupportedError("Schur multipliers are supported on single-block algebras only")
    h = np.array(coefficients, dtype=np.complex128, copy=True)
    d = algebra.block_dims[0]
    if h.shape != (d, d):
        raise StructuralError(f"coefficient shape {h.shape} does not match dim {d}")
    if float(np.abs(h - h.conj().T).max()) > KIND_TOL:
        raise StructuralError("coefficient matrix must be Hermitian")
    eig = np.linalg.eigvalsh((h + h.conj().T) / 2)
    if float(eig[0]) < -KIND_TOL:
        raise StructuralError(f"coefficient matrix not PSD: min eigenvalue {eig[0]:.3e}")
    diag_excess = float(np.max(np.real(np.diag(h)))) - 1.0
    if diag_excess > KIND_TOL:
        raise StructuralError(f"diagonal entries exceed 1 by {diag_excess:.3e}")
    h.setflags(write=False)
    return AbsoluteContraction(algebra, "schur_multiplier", {"coefficients": h})


def kraus(algebra: Algebra, operators: Sequence) -> AbsoluteContraction:
    """x -> sum_j K_j* x K_j; requires sum K*K <= 1 and sum KK* <= 1.

    The first inequality makes the map subunital, the second makes
    tau(T(x)) <= tau(x) on positives; both are checked and the failing one
    is named in the rejection.
    """
    if not operators:
        raise StructuralError("kraus needs at least one operator")
    ops = [_as_element(algebra, k) for k in operators]
    for label, grams in (
        ("subunital", [k.adjoint() @ k for k in ops]),
        ("trace", [k @ k.adjoint() for k in ops]),
    ):
        total = algebra.zero()
        for g in grams:
            total = total + g
        top = max(
            float(np.linalg.eigvalsh((b + b.conj().T) / 2)[-1]) for b in total.blocks
        )
        if top > 1.0 + KIND_TOL:
            sums = "sum_j K_j* K_j" if label == "subunital" else "sum_j K_j K_j*"
            raise StructuralError(
                f"{sums} has max eigenvalue {top:.6g} > 1: fails the {label} condition"
            )
    return AbsoluteContraction(algebra, "kraus", {"operators": tuple(ops)})


def convex_combination(terms: Sequence[tuple[float, AbsoluteContraction]]) -> AbsoluteContraction:
    """sum_i lambda_i T_i with lambda_i >= 0 and sum lambda_i <= 1."""
    if not terms:
        raise StructuralError("convex combination needs at least one term")
    weights = [float(w) for w, _ in terms]
    if any(w < 0 for w in weights) or sum(weights) > 1.0 + 1e-12:
        raise StructuralError(f"weights must be nonnegative with sum <= 1, got {weights}")
    algebra = terms[0][1].algebra
    if any(t.algebra != algebra for _, t in terms):
        raise StructuralError("combined maps live in different algebras")
    packed = tuple((float(w), t) for w, t in terms)
    return AbsoluteContraction(algebra, "convex_combination", {"terms": packed})


def composition(maps: Sequence[AbsoluteContraction]) -> AbsoluteContraction:
    """Composite map; maps are applied in the listed order."""
    if not maps:
        raise StructuralError("composition needs at least one map")
    algebra = maps[0].algebra
    if any(m.algebra != algebra for m in maps):
        raise StructuralError("composed maps live in different algebras")
    return AbsoluteContraction(algebra, "composition", {"maps": tuple(maps)})


def identity_map(algebra: Algebra) -> AbsoluteContraction:
    return scaled_unitary(algebra, algebra.identity(), 1.0)


def substochastic(algebra: Algebra, matrix) -> AbsoluteContraction:
    """Markov-type map: the diagonal of T(x) is S applied to the diagonal of x.

    Realized as the Kraus family {sqrt(S_ij) e_ji} on a single block, so the
    subunital condition asks for row sums <= 1 and the trace condition for
    column sums <= 1 (doubly substochastic S).
    """
    if algebra.num_blocks != 1:
        raise UnsupportedError("substochastic maps are single-block only")
    n = algebra.block_dims[0]
    s = np.asarray(matrix, dtype=np.float64)
    if s.shape != (n, n) or not np.all(np.isfinite(s)) or np.any(s < 0):
        raise StructuralError(f"need a nonnegative finite {n}x{n} matrix")
    ops = []
    for i in range(n):
        for j in range(n):
            if s[i, j] == 0.0:
                continue
            k = np.zeros((n, n), dtype=np.complex128)
            k[j, i] = np.sqrt(s[i, j])
            ops.append(algebra.element([k]))
    if not ops:
        ops.append(algebra.zero())
    return kraus(algebra, ops)


_KIND_BUILDERS = {
    "scaled_unitary": lambda alg, spec: scaled_unitary(
        alg, spec["unitary"], spec.get("scale", 1.0)
    ),
    "pinching": lambda alg, spec: pinching(
        [Projection(_as_element(alg, p)) for p in spec["projections"]]
    ),
    "schur_multiplier": lambda alg, spec: schur_multiplier(
        alg, _as_element(alg, spec["coefficients"]).blocks[0]
    ),
    "kraus": lambda alg, spec: kraus(alg, spec["operators"]),
    "substochastic": lambda alg, spec: substochastic(alg, spec["matrix"]),
    "identity": lambda alg, spec: identity_map(alg),
    "convex_combination": lambda alg, spec: convex_combination(
        [(w, construct_contraction(alg, sub)) for w, sub in spec["terms"]]
    ),
    "composition": lambda alg, spec: composition(
        [construct_contraction(alg, sub) for sub in spec["maps"]]
    ),
}


def construct_contraction(algebra: Algebra, spec: dict) -> AbsoluteContraction:
    """Build a contraction from a tagged parameter record.

    Elements referenced by the record may be Element instances or strings in
    the element text format.
    """
    try:
        kind = spec["kind"]
    except (TypeError, KeyError) as exc:
        raise StructuralError("contraction spec needs a 'kind' tag") from exc
    builder = _KIND_BUILDERS.get(kind)
    if builder is None:
        raise UnsupportedError(f"unknown contraction kind {kind!r}")
    return builder(algebra, spec)


# ---------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class VerificationReport:
    subunital_margin: float
    trace_margin: float
    choi_min_eig: float
    passed: bool
    notes: tuple[str, ...] = ()


def _adjoint_permutation(algebra: Algebra) -> np.ndarray:
    """Index permutation with vec(x*) = conj(vec(x))[perm]."""
    perm = np.empty(algebra.basis_size, dtype=np.intp)
    off = 0
    for d in algebra.block_dims:
        for i in range(d):
            for j in range(d):
                perm[off + i * d + j] = off + j * d + i
        off += d * d
    return perm


def is_hermiticity_preserving(op: LinearOperator, tol: float = 1e-10) -> bool:
    m = op.transfer_matrix()
    perm = _adjoint_permutation(op.algebra)
    conj_m = np.conj(m[np.ix_(perm, perm)])
    scale = 1.0 + float(np.abs(m).max())
    return float(np.abs(conj_m - m).max()) <= tol * scale


def trace_adjoint_matrix(op: LinearOperator) -> np.ndarray:
    """Transfer matrix of the adjoint for the weighted trace pairing."""
    alg = op.algebra
    w = np.concatenate(
        [np.full(d * d, wt) for d, wt in zip(alg.block_dims, alg.trace_weights)]
    )
    m = op.transfer_matrix()
    return (m.conj().T * w[None, :]) / w[:, None]


def choi_matrix(op: LinearOperator) -> np.ndarray:
    """Choi matrix of the map extended to the full matrix algebra.

    The extension first compresses to the block diagonal (itself completely
    positive), so positivity of this matrix is equivalent to complete
    positivity of the map on the block algebra.
    """
    alg = op.algebra
    n = alg.total_dim
    choi = np.zeros((n * n, n * n), dtype=np.complex128)
    offset = 0
    for b, d in enumerate(alg.block_dims):
        for i in range(d):
            for j in range(d):
                out = op.apply(alg.basis_element(b, i, j))
                gi, gj = offset + i, offset + j
                # embed the block-diagonal output into the n x n picture
                row_off = 0
                for blk in out.blocks:
                    db = blk.shape[0]
                    rows = gi * n + row_off
                    cols = gj * n + row_off
                    choi[rows:rows + db, cols:cols + db] += blk
                    row_off += db
        offset += d
    return choi


def verify_absolute_contraction(op: LinearOperator, tol: float = 1e-10) -> VerificationReport:
    """Check the three defining conditions and report signed margins.

    Raises StructuralError for maps that are not even Hermiticity
    preserving; margin failures are reported through `passed`, not raised.
    """
    if not is_hermiticity_preserving(op):
        raise StructuralError(
            "map is not Hermiticity-preserving; margins are undefined"
        )
    alg = op.algebra
    one = alg.identity()

    def min_eig(x: Element) -> float:
        return min(
            float(np.linalg.eigvalsh((b + b.conj().T) / 2)[0]) for b in x.blocks
        )

    sub = min_eig(one - op.apply(one))
    adj = MatrixOperator(alg, trace_adjoint_matrix(op))
    tr = min_eig(one - adj.apply(one))
    choi = choi_matrix(op)
    choi_min = float(np.linalg.eigvalsh((choi + choi.conj().T) / 2)[0])
    notes = tuple(op.notes)
    passed = sub >= -tol and tr >= -tol and choi_min >= -tol
    return VerificationReport(sub, tr, choi_min, passed, notes)


# ---------------------------------------------------------------------------
# iteration helpers

def apply_power(maps: Sequence[LinearOperator], k: Sequence[int], x: Element) -> Element:
    """T_d^{k_d} ... T_1^{k_1} x: the first listed map acts first."""
    if len(maps) != len(k):
        raise StructuralError(f"{len(maps)} maps but multi-index of length {len(k)}")
    kt = tuple(int(c) for c in k)
    if any(c < 1 for c in kt):
        raise ValueError(f"power multi-index must be >= 1 componentwise, got {kt}")
    y = x
    for t, c in zip(maps, kt):
        for _ in range(c):
            y = t.apply(y)
    return y


def cesaro_limit_projection(
    op: LinearOperator,
    phase: complex = 1.0,
    cluster_tol: float = 1e-10,
    warn_tol: float = 1e-8,
) -> MatrixOperator:
    """Spectral projection of phase*T onto the eigenvalue-1 cluster.

    Equals the limit of the one-parameter averages (1/N) sum_k (phase T)^k
    when phase*T is power bounded; zero when 1 is not in the spectrum.
    Eigenvalues within warn_tol of 1 but outside cluster_tol are flagged as
    ill-conditioned in the result's notes.
    """
    lam = complex(phase)
    if abs(abs(lam) - 1.0) > 1e-12:
        raise ValueError(f"phase must be unimodular, got |phase| = {abs(lam)}")
    a = lam * op.transfer_matrix()
    dim = a.shape[0]
    notes = []
    eigs = np.linalg.eigvals(a)
    annulus = (np.abs(eigs - 1.0) > cluster_tol) & (np.abs(eigs - 1.0) <= warn_tol)
    for v in eigs[annulus]:
        notes.append(
            "ill-conditioned separation: eigenvalue %r within %g of 1 but outside %g"
            % (complex(v), warn_tol, cluster_tol)
        )
    t, z, sdim = scipy.linalg.schur(
        a, output="complex", sort=lambda v: abs(v - 1.0) <= cluster_tol
    )
    if sdim == 0:
        return MatrixOperator(op.algebra, np.zeros((dim, dim)), tuple(notes))
    if sdim == dim:
        return MatrixOperator(op.algebra, np.eye(dim), tuple(notes))
    t11, t12, t22 = t[:sdim, :sdim], t[:sdim, sdim:], t[sdim:, sdim:]
    y = scipy.linalg.solve_sylvester(t11, -t22, t12)
    proj = np.zeros((dim, dim), dtype=np.complex128)
    proj[:sdim, :sdim] = np.eye(sdim)
    proj[:sdim, sdim:] = y
    return MatrixOperator(op.algebra, z @ proj @ z.conj().T, tuple(notes))
