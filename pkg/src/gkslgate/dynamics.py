"""Controlled GKSL dynamics for the three two-qubit systems.

Density matrices are propagated in column-stacked vectorized form,
``vec(A rho B) = (B^T kron A) vec(rho)``, with a 16x16 superoperator that
is affine in the controls::

    L(u, n1, n2) = l0 + u * l_u + n1 * l_n1 + n2 * l_n2
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .expm import expm
from .quantum import (I2, I4, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y, SIGMA_Z, from_real16,
                      kron, to_real16)
from .schedule import ControlSchedule

DEFAULT_OMEGA1 = 1.0
DEFAULT_OMEGA2 = 1.1
DEFAULT_RATE = 0.5
DEFAULT_ALPHA = 0.2


class NumericalFailure(ArithmeticError):
    """Propagation produced non-finite values."""


class System(enum.IntEnum):
    SYS1 = 1
    SYS2 = 2
    SYS3 = 3


@dataclass(frozen=True)
class SystemSpec:
    """Physical constants of one of the three systems plus the coupling ``eps``.

    ``decay`` are the dissipator rates Omega_j, ``lamb`` the Lamb-shift
    constants Lambda_j.  ``alpha`` is used by System 3 only.
    """

    variant: System
    eps: float = 0.0
    omega1: float = DEFAULT_OMEGA1
    omega2: float = DEFAULT_OMEGA2
    decay1: float = DEFAULT_RATE
    decay2: float = DEFAULT_RATE
    lamb1: float = DEFAULT_RATE
    lamb2: float = DEFAULT_RATE
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "variant", System(self.variant))
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        for name in ("decay1", "decay2", "lamb1", "lamb2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.alpha is not None and self.variant != System.SYS3:
            raise ValueError("alpha is only meaningful for System 3")

    @classmethod
    def standard(cls, variant: int | System, eps: float = 0.0) -> "SystemSpec":
        """Parameter values used in the reference experiments."""
        variant = System(variant)
        alpha = DEFAULT_ALPHA if variant == System.SYS3 else None
        return cls(variant, eps=eps, alpha=alpha)

    def with_eps(self, eps: float) -> "SystemSpec":
        return replace(self, eps=eps)

    def as_dict(self) -> dict:
        return {"variant": int(self.variant), "eps": self.eps, "omega1": self.omega1,
                "omega2": self.omega2, "decay1": self.decay1, "decay2": self.decay2,
                "lamb1": self.lamb1, "lamb2": self.lamb2, "alpha": self.alpha}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemSpec":
        return cls(**d)


@dataclass(frozen=True)
class SystemOperators:
    h_free: np.ndarray
    v: np.ndarray
    h_eff_1: np.ndarray  # Lambda_1 sigma_z (x) I, multiplies eps * n1
    h_eff_2: np.ndarray
    sigma_minus: tuple[np.ndarray, np.ndarray]
    sigma_plus: tuple[np.ndarray, np.ndarray]
    decay: tuple[float, float]


def build_system(spec: SystemSpec) -> SystemOperators:
    z1, z2 = kron(SIGMA_Z, I2), kron(I2, SIGMA_Z)
    x1, x2 = kron(SIGMA_X, I2), kron(I2, SIGMA_X)
    if spec.variant in (System.SYS1, System.SYS2):
        h_free = spec.omega1 / 2 * z1 + spec.omega2 / 2 * z2
        v = x1 + x2 if spec.variant == System.SYS1 else kron(SIGMA_X, SIGMA_X)
    else:
        if spec.alpha is None:
            raise ValueError("System 3 requires the coupling alpha")
        h_free = z1 + z2 + spec.alpha * (kron(SIGMA_Y, SIGMA_Y) + kron(SIGMA_Z, SIGMA_Z))
        v = x1
    return SystemOperators(
        h_free=h_free,
        v=v,
        h_eff_1=spec.lamb1 * z1,
        h_eff_2=spec.lamb2 * z2,
        sigma_minus=(kron(SIGMA_MINUS, I2), kron(I2, SIGMA_MINUS)),
        sigma_plus=(kron(SIGMA_PLUS, I2), kron(I2, SIGMA_PLUS)),
        decay=(spec.decay1, spec.decay2),
    )


def _lindblad_term(jump: np.ndarray, rho: np.ndarray) -> np.ndarray:
    # 2 L rho L^dag - L^dag L rho - rho L^dag L
    ldag = jump.conj().T
    ll = ldag @ jump
    return 2 * jump @ rho @ ldag - ll @ rho - rho @ ll


def dissipator_apply(ops: SystemOperators, n1: float, n2: float, rho: np.ndarray) -> np.ndarray:
    """Dissipator with photon-number controls, without the ``eps`` factor."""
    if n1 < 0 or n2 < 0:
        raise ValueError("incoherent controls must be nonnegative")
    out = np.zeros((4, 4), dtype=complex)
    for j, n in enumerate((n1, n2)):
        rate = ops.decay[j]
        out += rate * (n + 1) * _lindblad_term(ops.sigma_minus[j], rho)
        out += rate * n * _lindblad_term(ops.sigma_plus[j], rho)
    return out


def hamiltonian(ops: SystemOperators, eps: float, u: float, n1: float, n2: float) -> np.ndarray:
    return ops.h_free + eps * (n1 * ops.h_eff_1 + n2 * ops.h_eff_2) + u * ops.v


def lindblad_rhs(ops: SystemOperators, eps: float, u: float, n1: float, n2: float,
                 rho: np.ndarray) -> np.ndarray:
    """Right-hand side ``-i[H, rho] + eps * D(rho)`` evaluated directly on matrices."""
    h = hamiltonian(ops, eps, u, n1, n2)
    return -1j * (h @ rho - rho @ h) + eps * dissipator_apply(ops, n1, n2, rho)


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacked vectorization."""
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int = 4) -> np.ndarray:
    return np.asarray(v).reshape((dim, dim), order="F")


# Columns are vec(from_real16(e_k)): maps x_1..x_16 to vec(rho).
_X_TO_VEC = np.stack([vec(from_real16(np.eye(16)[k])) for k in range(16)], axis=1)
_X_TO_VEC_INV = np.linalg.inv(_X_TO_VEC)


def _spre(a: np.ndarray) -> np.ndarray:
    return kron(I4, a)


def _spost(b: np.ndarray) -> np.ndarray:
    return kron(b.T, I4)


def commutator_super(h: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> -i[h, rho]``."""
    return -1j * (_spre(h) - _spost(h))


def lindblad_super(jump: np.ndarray) -> np.ndarray:
    """Superoperator of ``rho -> 2 L rho L^dag - L^dag L rho - rho L^dag L``."""
    ll = jump.conj().T @ jump
    return 2 * kron(jump.conj(), jump) - _spre(ll) - _spost(ll)


@dataclass(frozen=True)
class LiouvillianParts:
    l0: np.ndarray
    l_u: np.ndarray
    l_n1: np.ndarray
    l_n2: np.ndarray

    def assemble(self, u: float, n1: float, n2: float) -> np.ndarray:
        return self.l0 + u * self.l_u + n1 * self.l_n1 + n2 * self.l_n2

    def generators(self, schedule: ControlSchedule) -> np.ndarray:
        """Stack ``dt * L(u^i, n1^i, n2^i)`` for every segment, shape (K, 16, 16)."""
        coeffs = np.stack([schedule.u, schedule.n1, schedule.n2], axis=1)
        blocks = np.stack([self.l_u, self.l_n1, self.l_n2])
        gens = self.l0[None] + np.einsum("kc,cij->kij", coeffs, blocks)
        return schedule.dt * gens

    def realified(self) -> "LiouvillianParts":
        """The same generator expressed on the real coordinates ``x_1..x_16``.

        The dynamics map Hermitian matrices to Hermitian matrices, so the
        transformed blocks are real; real arithmetic roughly halves the cost
        of exponentiating them.
        """
        blocks = []
        for block in (self.l0, self.l_u, self.l_n1, self.l_n2):
            real = _X_TO_VEC_INV @ block @ _X_TO_VEC
            if np.abs(real.imag).max(initial=0.0) > 1e-12 * max(1.0, np.abs(real).max()):
                raise ValueError("generator does not preserve Hermiticity")
            blocks.append(np.ascontiguousarray(real.real))
        return LiouvillianParts(*blocks)


def liouvillian_parts(ops: SystemOperators, spec: SystemSpec) -> LiouvillianParts:
    eps = spec.eps
    down = [lindblad_super(s) for s in ops.sigma_minus]
    up = [lindblad_super(s) for s in ops.sigma_plus]
    l0 = commutator_super(ops.h_free) + eps * (ops.decay[0] * down[0] + ops.decay[1] * down[1])
    l_u = commutator_super(ops.v)
    l_n = [eps * (commutator_super(h) + rate * (d + p))
           for h, rate, d, p in zip((ops.h_eff_1, ops.h_eff_2), ops.decay, down, up)]
    return LiouvillianParts(l0=l0, l_u=l_u, l_n1=l_n[0], l_n2=l_n[1])


def parts_for(spec: SystemSpec) -> LiouvillianParts:
    return liouvillian_parts(build_system(spec), spec)


def segment_propagators(schedule: ControlSchedule, parts: LiouvillianParts) -> np.ndarray:
    schedule.validate()
    props = expm(parts.generators(schedule))
    if not np.all(np.isfinite(props)):
        raise NumericalFailure("segment propagator is not finite")
    return props


def _propagate_vecs(vecs: np.ndarray, props: np.ndarray, keep_path: bool = False):
    # Columns are advanced as a stack of (n, 1) matrices so every column sees the
    # same floating-point kernel whether it is propagated alone or in a batch.
    cols = np.ascontiguousarray(vecs.T)[:, :, None]
    path = []
    for p in props:
        cols = p @ cols
        if not np.all(np.isfinite(cols)):
            raise NumericalFailure("state became non-finite during propagation")
        if keep_path:
            path.append(cols[:, :, 0].T)
    return path if keep_path else cols[:, :, 0].T


def propagate(rho0: np.ndarray, schedule: ControlSchedule, parts: LiouvillianParts) -> np.ndarray:
    """Final state after applying ``expm(dt * L_i)`` for every segment in order."""
    return propagate_batch([rho0], schedule, parts)[0]


def propagate_batch(rhos, schedule: ControlSchedule, parts: LiouvillianParts) -> list[np.ndarray]:
    """Propagate several initial states through one shared propagator chain."""
    rhos = list(rhos)
    if not rhos:
        return []
    props = segment_propagators(schedule, parts)
    vecs = np.stack([vec(r) for r in rhos], axis=1).astype(complex)
    vecs = _propagate_vecs(vecs, props)
    return [unvec(vecs[:, m]) for m in range(len(rhos))]


def propagate_real(xs: np.ndarray, schedule: ControlSchedule,
                   real_parts: LiouvillianParts) -> np.ndarray:
    """Propagate real coordinate vectors (columns of ``xs``, shape (16, m)).

    ``real_parts`` must come from :meth:`LiouvillianParts.realified`.
    """
    props = segment_propagators(schedule, real_parts)
    return _propagate_vecs(np.asarray(xs, dtype=float), props)


def propagate_batch_real(rhos, schedule: ControlSchedule,
                         real_parts: LiouvillianParts) -> list[np.ndarray]:
    rhos = list(rhos)
    if not rhos:
        return []
    xs = np.stack([to_real16(r) for r in rhos], axis=1)
    xs = propagate_real(xs, schedule, real_parts)
    return [from_real16(xs[:, m]) for m in range(len(rhos))]


def propagate_trajectory(rho0: np.ndarray, schedule: ControlSchedule,
                         parts: LiouvillianParts) -> list[np.ndarray]:
    """States at ``t_2, ..., t_{K+1} = T`` (after each segment)."""
    props = segment_propagators(schedule, parts)
    path = _propagate_vecs(vec(rho0).astype(complex)[:, None], props, keep_path=True)
    return [unvec(v[:, 0]) for v in path]


def rk4_reference(rho0: np.ndarray, schedule: ControlSchedule, parts: LiouvillianParts,
                  substeps: int) -> np.ndarray:
    """Classical fixed-step RK4 on ``d vec(rho)/dt = L vec(rho)``, ``substeps`` per segment."""
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    schedule.validate()
    h = schedule.dt / substeps
    y = vec(rho0).astype(complex)
    for u, n1, n2 in zip(schedule.u, schedule.n1, schedule.n2):
        gen = parts.assemble(u, n1, n2)
        for _ in range(substeps):
            k1 = gen @ y
            k2 = gen @ (y + 0.5 * h * k1)
            k3 = gen @ (y + 0.5 * h * k2)
            k4 = gen @ (y + h * k3)
            y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return unvec(y)
