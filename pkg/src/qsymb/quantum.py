"""Dense linear algebra for named qubit registers and CP super-operators.

Registers are identified by name and always carry dimension 2. Every matrix in
this module is indexed in the lexicographic order of the register names it acts
on: the first register in sorted order is the most significant bit of the basis
index. Keeping a single global convention means lifting, composition and
partial traces never have to guess an axis order.

Super-operators are stored as Kraus lists. The Choi matrix is the canonical
identity of a map: two SuperOps are the same linear map iff their Choi matrices
agree within tolerance. Order and equality tests (trace order, equality after
restricting to a register subset) are what the bisimulation checker consumes.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
KRAUS_CAP = 64

_SQ2 = 1.0 / np.sqrt(2.0)

GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "CN": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
        dtype=complex,
    ),
}


def set_tolerance(tol: float) -> None:
    """Change the module-wide default tolerance (used when tol=None)."""
    global DEFAULT_TOL
    DEFAULT_TOL = tol


def _tol(tol: float | None) -> float:
    return DEFAULT_TOL if tol is None else tol


def dag(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def ket(bits: str) -> np.ndarray:
    """Computational basis column vector for a bit string, MSB first."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def bell_state() -> np.ndarray:
    """(|00> + |11>)/sqrt(2)."""
    return (ket("00") + ket("11")) * _SQ2


def mat_close(a: np.ndarray, b: np.ndarray, tol: float | None = None) -> bool:
    return bool(np.max(np.abs(a - b)) <= _tol(tol)) if a.size else True


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def _permute_qubits(m: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reorder the qubit axes of a 2^n x 2^n matrix.

    perm[p] is the current axis that should end up at position p.
    """
    n = len(perm)
    if list(perm) == list(range(n)):
        return m
    t = m.reshape((2,) * (2 * n))
    axes = list(perm) + [n + p for p in perm]
    return t.transpose(axes).reshape(m.shape)


def partial_trace(
    m: np.ndarray, regs: Sequence[str], out: Iterable[str]
) -> tuple[tuple[str, ...], np.ndarray]:
    """Trace out the registers in `out`, returning (kept registers, matrix)."""
    regs = tuple(regs)
    out_set = set(out)
    unknown = out_set - set(regs)
    if unknown:
        raise ValueError(f"cannot trace out unknown registers {sorted(unknown)}")
    if not out_set:
        return regs, m
    n = len(regs)
    keep = [i for i, r in enumerate(regs) if r not in out_set]
    t = m.reshape((2,) * (2 * n))
    # Trace highest axis pairs first so earlier indices stay valid.
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    d = 2 ** len(keep)
    return tuple(regs[i] for i in keep), t.reshape(d, d)


class DensityMatrix:
    """A state over a sorted register tuple; Hermitian, PSD, unit trace."""

    __slots__ = ("regs", "mat")

    def __init__(self, regs: Sequence[str], mat: np.ndarray, check: bool = True):
        srt = tuple(sorted(regs))
        if srt != tuple(regs):
            order = [list(regs).index(r) for r in srt]
            mat = _permute_qubits(mat, order)
        self.regs = srt
        self.mat = np.asarray(mat, dtype=complex)
        if check:
            self.validate()

    def validate(self, tol: float | None = None) -> None:
        t = max(_tol(tol), 1e-7)  # generated states accumulate float noise
        d = 2 ** len(self.regs)
        if self.mat.shape != (d, d):
            raise ValueError(f"state shape {self.mat.shape} does not match {self.regs}")
        if not mat_close(self.mat, dag(self.mat), t):
            raise ValueError("density matrix is not Hermitian")
        if float(np.min(np.linalg.eigvalsh(self.mat))) < -t:
            raise ValueError("density matrix is not positive semidefinite")
        if abs(float(np.trace(self.mat).real) - 1.0) > t:
            raise ValueError("density matrix trace is not 1")

    def reduced(self, out: Iterable[str]) -> np.ndarray:
        return partial_trace(self.mat, self.regs, out)[1]

    def __repr__(self) -> str:
        return f"DensityMatrix({self.regs}, tr={np.trace(self.mat).real:.6f})"


class SuperOp:
    """A completely positive map given by Kraus operators on a register set.

    The register tuple is always sorted; constructors accept an arbitrary
    order and permute. The empty Kraus list is the zero map.
    """

    __slots__ = ("regs", "kraus", "_choi", "_ksum")

    def __init__(self, regs: Sequence[str], kraus: Sequence[np.ndarray]):
        regs = tuple(regs)
        if regs != tuple(sorted(regs)):
            order = [regs.index(r) for r in sorted(regs)]
            kraus = [_permute_qubits(np.asarray(k, dtype=complex), order) for k in kraus]
            regs = tuple(sorted(regs))
        d = 2 ** len(regs)
        ops = []
        for k in kraus:
            k = np.asarray(k, dtype=complex)
            if k.shape != (d, d):
                raise ValueError(f"Kraus shape {k.shape} does not match registers {regs}")
            if np.max(np.abs(k)) > 1e-14:
                ops.append(k)
        if len(ops) > KRAUS_CAP:
            ops = _choi_to_kraus(_choi_of(ops, d), d)
        self.regs = regs
        self.kraus = tuple(ops)
        self._choi: np.ndarray | None = None
        self._ksum: np.ndarray | None = None

    # -- canonical forms ---------------------------------------------------

    @property
    def dim(self) -> int:
        return 2 ** len(self.regs)

    def choi(self) -> np.ndarray:
        if self._choi is None:
            self._choi = _choi_of(self.kraus, self.dim)
        return self._choi

    def kraus_sum(self) -> np.ndarray:
        """Sum of K^dag K, the positive operator defining tr(E(rho))."""
        if self._ksum is None:
            s = np.zeros((self.dim, self.dim), dtype=complex)
            for k in self.kraus:
                s += dag(k) @ k
            self._ksum = s
        return self._ksum

    def is_zero(self, tol: float | None = None) -> bool:
        return all(np.max(np.abs(k)) <= _tol(tol) for k in self.kraus)

    # -- construction helpers ---------------------------------------------

    @staticmethod
    def identity(regs: Sequence[str]) -> "SuperOp":
        return SuperOp(regs, [np.eye(2 ** len(regs), dtype=complex)])

    @staticmethod
    def zero(regs: Sequence[str]) -> "SuperOp":
        return SuperOp(regs, [])

    def lift(self, universe: Sequence[str]) -> "SuperOp":
        return tensor_lift(self, universe)

    def rename(self, mapping: dict[str, str]) -> "SuperOp":
        """Retarget the map to renamed registers (a bijection on its support)."""
        new = [mapping.get(r, r) for r in self.regs]
        if len(set(new)) != len(new):
            raise ValueError(f"register renaming {mapping} collapses {self.regs}")
        return SuperOp(new, list(self.kraus))

    def __call__(self, mat: np.ndarray) -> np.ndarray:
        """Apply to a raw matrix over exactly this map's registers."""
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k in self.kraus:
            out += k @ mat @ dag(k)
        return out

    def __repr__(self) -> str:
        return f"SuperOp({'.'.join(self.regs) or 'scalar'}, {len(self.kraus)} Kraus)"


def _choi_of(kraus: Sequence[np.ndarray], d: int) -> np.ndarray:
    j = np.zeros((d * d, d * d), dtype=complex)
    for k in kraus:
        v = k.T.reshape(d * d)  # v[(i,a)] = <a|K|i>
        j += np.outer(v, v.conj())
    return j


def _choi_to_kraus(j: np.ndarray, d: int, tol: float = 1e-12) -> list[np.ndarray]:
    vals, vecs = np.linalg.eigh((j + dag(j)) / 2.0)
    ops = []
    for lam, v in zip(vals, vecs.T):
        if lam > tol:
            ops.append(np.sqrt(lam) * v.reshape(d, d).T)
    return ops


def tensor_lift(op: SuperOp, universe: Sequence[str]) -> SuperOp:
    """Embed op as itself tensor identity on the remaining registers."""
    uni = tuple(sorted(set(universe)))
    if not set(op.regs) <= set(uni):
        raise ValueError(f"support {op.regs} not inside universe {uni}")
    if op.regs == uni:
        return op
    rest = [r for r in uni if r not in op.regs]
    combined = list(op.regs) + rest
    perm = [combined.index(r) for r in uni]
    eye = np.eye(2 ** len(rest), dtype=complex)
    kraus = [_permute_qubits(np.kron(k, eye), perm) for k in op.kraus]
    return SuperOp(uni, kraus)


def _common(a: SuperOp, b: SuperOp, extra: Iterable[str] = ()) -> tuple[SuperOp, SuperOp]:
    uni = sorted(set(a.regs) | set(b.regs) | set(extra))
    return tensor_lift(a, uni), tensor_lift(b, uni)


def compose(a: SuperOp, b: SuperOp) -> SuperOp:
    """(a o b)(rho) = a(b(rho)): apply b first."""
    a, b = _common(a, b)
    return SuperOp(a.regs, [ka @ kb for ka in a.kraus for kb in b.kraus])


def add(a: SuperOp, b: SuperOp) -> SuperOp:
    a, b = _common(a, b)
    return SuperOp(a.regs, list(a.kraus) + list(b.kraus))


def apply(op: SuperOp, rho: DensityMatrix) -> np.ndarray:
    """Kraus application over the state's full register tuple."""
    if not set(op.regs) <= set(rho.regs):
        raise ValueError(f"map on {op.regs} cannot act on state over {rho.regs}")
    return tensor_lift(op, rho.regs)(rho.mat)


def is_trace_preserving(op: SuperOp, tol: float | None = None) -> bool:
    return mat_close(op.kraus_sum(), np.eye(op.dim), tol)


def is_trace_nonincreasing(op: SuperOp, tol: float | None = None) -> bool:
    gap = np.eye(op.dim) - op.kraus_sum()
    return float(np.min(np.linalg.eigvalsh((gap + dag(gap)) / 2.0))) >= -_tol(tol)


def lesssim_trace(a: SuperOp, b: SuperOp, tol: float | None = None) -> bool:
    """Trace-functional order: sum A^dag A below sum B^dag B (Loewner)."""
    a, b = _common(a, b)
    gap = b.kraus_sum() - a.kraus_sum()
    return float(np.min(np.linalg.eigvalsh((gap + dag(gap)) / 2.0))) >= -_tol(tol)


def _restricted_choi(op: SuperOp, keep: Sequence[str]) -> np.ndarray:
    """Choi matrix of (trace out everything not in keep) composed after op."""
    n = len(op.regs)
    d = 2 ** n
    j = op.choi().reshape((2,) * (4 * n))
    # Axis layout: n input-row, n output-row, n input-col, n output-col.
    drop = [i for i, r in enumerate(op.regs) if r not in set(keep)]
    for i in sorted(drop, reverse=True):
        half = j.ndim // 2
        j = np.trace(j, axis1=n + i, axis2=half + n + i)
    dk = 2 ** (len(op.regs) - len(drop))
    return j.reshape(d * dk, d * dk)


def eqsim_v(
    a: SuperOp,
    b: SuperOp,
    keep: Iterable[str],
    universe: Iterable[str] = (),
    tol: float | None = None,
) -> bool:
    """Equality of maps after tracing the output down to `keep`.

    With keep empty this compares the induced trace functionals, which for
    Kraus maps is exactly the sum-of-K^dag-K test.
    """
    keep = set(keep)
    a, b = _common(a, b, keep | set(universe))
    if not keep:
        return mat_close(a.kraus_sum(), b.kraus_sum(), tol)
    return mat_close(_restricted_choi(a, sorted(keep)), _restricted_choi(b, sorted(keep)), tol)


def choi_distance(a: SuperOp, b: SuperOp) -> float:
    a, b = _common(a, b)
    return float(np.max(np.abs(a.choi() - b.choi())))


def superop_eq(a: SuperOp, b: SuperOp, tol: float | None = None) -> bool:
    """Equality as linear maps (Choi comparison on the common universe)."""
    a, b = _common(a, b)
    return mat_close(a.choi(), b.choi(), tol)


class Measurement:
    """A non-degenerate projective measurement over a register tuple.

    Stored as one unit vector per outcome together with its rational
    eigenvalue; the projectors are pairwise orthogonal and complete.
    """

    __slots__ = ("regs", "eigenvalues", "vectors")

    def __init__(
        self,
        regs: Sequence[str],
        eigenvalues: Sequence[Fraction],
        vectors: Sequence[np.ndarray],
    ):
        regs = tuple(regs)
        vecs = [np.asarray(v, dtype=complex).reshape(-1) for v in vectors]
        if regs != tuple(sorted(regs)):
            order = [regs.index(r) for r in sorted(regs)]
            n = len(regs)
            vecs = [v.reshape((2,) * n).transpose(order).reshape(-1) for v in vecs]
            regs = tuple(sorted(regs))
        d = 2 ** len(regs)
        if len(vecs) != d:
            raise ValueError(f"need {d} outcomes for {len(regs)} registers, got {len(vecs)}")
        if len(set(eigenvalues)) != len(eigenvalues):
            raise ValueError("measurement is degenerate (repeated eigenvalues)")
        gram = np.array([[np.vdot(u, v) for v in vecs] for u in vecs])
        if not mat_close(gram, np.eye(d), 1e-9):
            raise ValueError("measurement basis is not orthonormal")
        self.regs = regs
        self.eigenvalues = tuple(Fraction(e) for e in eigenvalues)
        self.vectors = tuple(vecs)

    def rename(self, mapping: dict[str, str]) -> "Measurement":
        new = [mapping.get(r, r) for r in self.regs]
        return Measurement(new, self.eigenvalues, self.vectors)

    def branches(self) -> list[tuple[Fraction, SuperOp, SuperOp]]:
        """Per-outcome (eigenvalue, weight map, state-update map).

        The weight map has the single Kraus |phi_i><phi_i|; the update map
        sends rho to sum_j |phi_i><phi_j| rho |phi_j><phi_i| and is trace
        preserving.
        """
        out = []
        for lam, phi in zip(self.eigenvalues, self.vectors):
            proj = np.outer(phi, phi.conj())
            setk = [np.outer(phi, psi.conj()) for psi in self.vectors]
            out.append((lam, SuperOp(self.regs, [proj]), SuperOp(self.regs, setk)))
        return out

    def __repr__(self) -> str:
        return f"Measurement({'.'.join(self.regs)}, outcomes={len(self.vectors)})"


# -- named constructors ----------------------------------------------------


def builtin(name: str, regs: Sequence[str]) -> SuperOp:
    """One of the fixed unitary channels: I, X, Y, Z, H (1 qubit), CN (2)."""
    if name not in GATES:
        raise KeyError(f"unknown builtin operator {name!r}")
    u = GATES[name]
    want = 1 if name != "CN" else 2
    if len(regs) != want:
        raise ValueError(f"{name} takes {want} register(s), got {len(regs)}")
    if len(set(regs)) != len(regs):
        raise ValueError(f"{name} applied to repeated register {regs}")
    return SuperOp(regs, [u])


def _state_vector(label: str) -> np.ndarray:
    if label == "bell":
        return bell_state()
    if label and set(label) <= {"0", "1"}:
        return ket(label)
    raise KeyError(f"unknown state label {label!r} (bit string or 'bell')")


def set_state(label: str, regs: Sequence[str]) -> SuperOp:
    """The channel resetting `regs` to the labelled pure state.

    Kraus operators |phi><j| over the computational basis, so the map is
    trace preserving and forgets its input.
    """
    phi = _state_vector(label)
    d = 2 ** len(regs)
    if phi.shape[0] != d:
        raise ValueError(f"state {label!r} does not fit {len(regs)} register(s)")
    eye = np.eye(d, dtype=complex)
    return SuperOp(regs, [np.outer(phi, eye[j].conj()) for j in range(d)])


def proj_state(label: str, regs: Sequence[str]) -> SuperOp:
    """Single-Kraus projection onto the labelled pure state."""
    phi = _state_vector(label)
    if phi.shape[0] != 2 ** len(regs):
        raise ValueError(f"state {label!r} does not fit {len(regs)} register(s)")
    return SuperOp(regs, [np.outer(phi, phi.conj())])


def measure_comp(regs: Sequence[str]) -> Measurement:
    """Computational-basis measurement; outcome i has eigenvalue i."""
    d = 2 ** len(regs)
    eye = np.eye(d, dtype=complex)
    return Measurement(regs, [Fraction(i) for i in range(d)], [eye[i] for i in range(d)])
