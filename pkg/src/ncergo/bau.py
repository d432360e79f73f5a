"""Certificates of bilaterally almost uniform smallness for tail residuals.

Given a family of residuals r_n indexed by a tail box, a certificate is a
projection e with small trace deficit tau(1 - e) <= epsilon such that every
compressed residual satisfies ||e r_n e||_inf <= lambda. The construction
is: dominate +-r_n by a single positive a, cut the spectrum of a at the
Chebyshev level lambda = ||a||_p / epsilon^(1/p), and let e be the spectral
projection of a below lambda. Everything reported is re-measured on the
actual inputs, so a returned certificate is sound by inspection, not by
construction alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .algebra import (
    Box,
    Element,
    Projection,
    lp_norm,
    spectral_projection,
    trace,
)
from .averages import AverageFamily
from .errors import IntegrityError, StructuralError
from .maximal import dominant_element

SOUNDNESS_SLACK = 1e-10


def lambda_box(m: int, n: int, d: int) -> list[tuple[int, ...]]:
    """Multi-indices k with m <= min(k) and max(k) <= n, in lex order.

    m > n yields the empty list; the count is (n - m + 1)^d otherwise.
    """
    m, n, d = int(m), int(n), int(d)
    if m < 1 or d < 1:
        raise ValueError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    if m > n:
        return []
    return list(itertools.product(range(m, n + 1), repeat=d))


@dataclass(frozen=True)
class BauCertificate:
    e: Projection
    epsilon: float
    lam: float
    p: float
    onset: int
    tail_sup: float
    dominant_norm: float
    trace_complement: float
    tail_size: int
    flags: tuple[str, ...] = ()

    @property
    def sound(self) -> bool:
        return (
            self.trace_complement <= self.epsilon + 1e-14
            and self.tail_sup <= self.lam + SOUNDNESS_SLACK
        )


def _stack_blocks(family: AverageFamily) -> list[np.ndarray]:
    alg = family.algebra
    flat = family.raw().reshape(-1, alg.basis_size)
    return [
        flat[:, seg].reshape(-1, d, d)
        for seg, d in zip(alg._slices, alg.block_dims)
    ]


def _compressed_sup(e: Projection, family: AverageFamily) -> float:
    """max over the family of ||e r e||_inf, computed blockwise in batch."""
    worst = 0.0
    for e_b, r_b in zip(e.element.blocks, _stack_blocks(family)):
        if r_b.shape[0] == 0:
            continue
        comp = e_b[None] @ r_b @ e_b[None]
        sv = np.linalg.svd(comp, compute_uv=False)
        worst = max(worst, float(sv[:, 0].max()) if sv.size else 0.0)
    return worst


def _hermitian_family(family: AverageFamily, tol: float) -> list[Element]:
    els = family.elements()
    scale = 1.0 + max((x.max_abs() for x in els), default=0.0)
    for x in els:
        if not x.is_hermitian(tol * scale):
            raise StructuralError(
                "residuals must be Hermitian; split complex residuals first "
                "(certify_bau_complex does this)"
            )
    return [x.real_part() for x in els]


def certify_bau(
    residuals: AverageFamily,
    p: float,
    epsilon: float | None = None,
    lam: float | None = None,
    tol: float = 1e-8,
    max_iter: int = 10000,
) -> BauCertificate:
    """Projection certificate of uniform tail smallness for Hermitian residuals.

    Either epsilon (trace budget for 1 - e) or lam (uniform bound) must be
    given; the other is derived through the Chebyshev bound
    tau(chi_(lam,inf)(a)) <= (||a||_p / lam)^p for the dominant a of the
    +-residual family. tail_sup is measured exhaustively on the tested box.
    """
    p = float(p)
    if not np.isfinite(p) or p <= 1.0:
        raise ValueError(f"certification needs 1 < p < inf, got {p}")
    alg = residuals.algebra
    total = alg.total_trace()
    if epsilon is None and lam is None:
        raise ValueError("supply epsilon, lam, or both")
    if epsilon is not None and not 0.0 < float(epsilon) < total:
        raise ValueError(f"epsilon must lie in (0, {total}), got {epsilon}")

    els = _hermitian_family(residuals, 1e-8)
    flags: list[str] = []
    onset = min(residuals.box.lower)

    pm = [r for x in els for r in (x, -x)]
    rep = dominant_element(pm, p, tol, max_iter)
    a = rep.dominant
    if not rep.converged:
        flags.append("bound not tight: dominant solve hit the iteration cap")
    lift = max(0.0, -rep.feasibility_margin)
    if lift > 0.0:
        a = a + alg.scalar(lift)
        flags.append(f"dominant lifted by {lift:.3g} to restore exact feasibility")
    norm = lp_norm(a, p)

    if lam is None:
        lam_val = norm / float(epsilon) ** (1.0 / p)
        eps_val = float(epsilon)
    else:
        lam_val = float(lam)
        if lam_val < 0.0 or (lam_val == 0.0 and norm > 0.0):
            raise ValueError(f"lam must be positive when residuals are nonzero, got {lam}")
        cheb = (norm / lam_val) ** p if lam_val > 0.0 else 0.0
        eps_val = float(epsilon) if epsilon is not None else cheb
        if epsilon is None:
            flags.append("epsilon back-computed from the Chebyshev bound")

    e = spectral_projection(a, (-np.inf, lam_val))
    trace_comp = float(np.real(trace(alg.identity() - e.element)))
    tail_sup = _compressed_sup(e, residuals.hermitian_split()[0])

    cert = BauCertificate(
        e, eps_val, lam_val, p, onset, tail_sup, norm, trace_comp,
        residuals.box.size, tuple(flags),
    )
    if not cert.sound:
        raise IntegrityError(
            f"certificate failed re-verification: tau(1-e)={trace_comp:.6g} vs "
            f"epsilon={eps_val:.6g}, tail_sup={tail_sup:.6g} vs lambda={lam_val:.6g}"
        )
    return cert


def _meet(e_r: Projection, e_i: Projection) -> Projection:
    """Range intersection via the eigenvalue-2 eigenspace of e_r + e_i."""
    s = e_r.element + e_i.element
    return spectral_projection(s, (2.0 - 1e-10, np.inf))


def certify_bau_complex(
    residuals: AverageFamily,
    p: float,
    epsilon: float,
    tol: float = 1e-8,
    max_iter: int = 10000,
) -> BauCertificate:
    """Certificate for complex residuals via their Hermitian parts.

    Each part gets half the trace budget; the final projection is the meet
    e_R ^ e_I and the uniform bound is lambda_R + lambda_I. tail_sup is
    re-measured on the original complex residuals.
    """
    re_fam, im_fam = residuals.hermitian_split()
    scale = 1.0 + float(np.abs(residuals.raw()).max(initial=0.0))
    if float(np.abs(im_fam.raw()).max(initial=0.0)) <= 1e-14 * scale:
        cert = certify_bau(re_fam, p, epsilon, None, tol, max_iter)
        tail_sup = _compressed_sup(cert.e, residuals)
        return BauCertificate(
            cert.e, cert.epsilon, cert.lam, cert.p, cert.onset, tail_sup,
            cert.dominant_norm, cert.trace_complement, cert.tail_size,
            cert.flags + ("imaginary part negligible; certified the real part",),
        )
    half = float(epsilon) / 2.0
    cert_r = certify_bau(re_fam, p, half, None, tol, max_iter)
    cert_i = certify_bau(im_fam, p, half, None, tol, max_iter)
    e = _meet(cert_r.e, cert_i.e)
    alg = residuals.algebra
    trace_comp = float(np.real(trace(alg.identity() - e.element)))
    lam = cert_r.lam + cert_i.lam
    tail_sup = _compressed_sup(e, residuals)
    flags = (
        "complex residuals split into Hermitian parts; e is the meet of the "
        "part projections",
    ) + cert_r.flags + cert_i.flags
    cert = BauCertificate(
        e, float(epsilon), lam, float(p), cert_r.onset, tail_sup,
        cert_r.dominant_norm + cert_i.dominant_norm, trace_comp,
        residuals.box.size, flags,
    )
    if not cert.sound:
        raise IntegrityError(
            f"composite certificate failed re-verification: tau(1-e)="
            f"{trace_comp:.6g} vs epsilon={epsilon:.6g}, tail_sup="
            f"{tail_sup:.6g} vs lambda={lam:.6g}"
        )
    return cert


def tail_box(family: AverageFamily, onset: int) -> Box:
    """Sub-box of the family's box where every coordinate is >= onset."""
    lo = tuple(max(l, int(onset)) for l in family.box.lower)
    if any(l > u for l, u in zip(lo, family.box.upper)):
        raise ValueError(f"onset {onset} empties the box {family.box}")
    return Box(lo, family.box.upper)


def onset_ladder(
    residuals: AverageFamily,
    p: float,
    epsilon: float,
    onsets,
    tol: float = 1e-8,
    max_iter: int = 10000,
    complex_split: bool = False,
) -> tuple[BauCertificate, ...]:
    """Certificates for a ladder of tail onsets (decay evidence for tail_sup).

    Onsets beyond the family's box are skipped. Shrinking the tail can only
    shrink the dominant, so lam is nonincreasing along the ladder up to
    solver tolerance.
    """
    top = min(residuals.box.upper)
    certify = certify_bau_complex if complex_split else certify_bau
    certs = []
    for onset in sorted({int(v) for v in onsets}):
        if onset > top:
            continue
        tail = residuals.restrict(tail_box(residuals, onset))
        certs.append(certify(tail, p, epsilon, tol=tol, max_iter=max_iter))
    return tuple(certs)
