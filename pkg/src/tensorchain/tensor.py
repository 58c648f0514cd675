"""Dense complex tensors with grouped row/column modes.

A tensor here is a complex array whose axes are split into M row modes
(I_1, ..., I_M) and N column modes (J_1, ..., J_N).  Flattening the row
group and the column group with the row-major mixed-radix rule (leftmost
mode most significant) turns the tensor into its *unfolding*, a
row_count x col_count matrix, and turns the grouped-mode contraction
product into plain matrix multiplication.  Every spectral quantity is
computed on the unfolding; this is exact, not an approximation, because
the map is an algebra isomorphism.

Values are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError, SingularityError, ValidationError

_MAX_SIDE = 1 << 31  # guard against unfoldings that cannot be addressed


class GaugeNorm(enum.Enum):
    """Unitarily invariant norms evaluated on the unfolding."""

    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"
    NUCLEAR = "nuclear"

    @classmethod
    def coerce(cls, value) -> "GaugeNorm":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class Shape:
    """Mode extents of a tensor, split into row and column groups."""

    row_modes: tuple
    col_modes: tuple

    def __post_init__(self):
        object.__setattr__(self, "row_modes", tuple(int(e) for e in self.row_modes))
        object.__setattr__(self, "col_modes", tuple(int(e) for e in self.col_modes))
        if not self.row_modes or not self.col_modes:
            raise ShapeError("both mode groups must be nonempty")
        for extent in self.row_modes + self.col_modes:
            if extent < 1:
                raise ShapeError(f"mode extents must be >= 1, got {extent}")
        if self.row_count > _MAX_SIDE or self.col_count > _MAX_SIDE:
            raise ShapeError("unfolding dimensions exceed the addressable limit")

    @property
    def row_count(self) -> int:
        return math.prod(self.row_modes)

    @property
    def col_count(self) -> int:
        return math.prod(self.col_modes)

    @property
    def is_square(self) -> bool:
        return self.row_modes == self.col_modes

    def transposed(self) -> "Shape":
        return Shape(self.col_modes, self.row_modes)

    def __str__(self):
        rows = "x".join(str(e) for e in self.row_modes)
        cols = "x".join(str(e) for e in self.col_modes)
        return f"({rows};{cols})"


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable complex tensor over a :class:`Shape`.

    ``data`` has ndim ``M + N`` with the row modes first; it is stored
    C-contiguous so its flat order is exactly the documented row-major
    mixed-radix order over the concatenated index tuple.
    """

    shape: Shape
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.complex128)
        expected = self.shape.row_modes + self.shape.col_modes
        if arr.shape != expected:
            raise ShapeError(f"data has shape {arr.shape}, expected {expected}")
        if not np.isfinite(arr.view(np.float64)).all():
            raise ValidationError("tensor entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def entries(self) -> np.ndarray:
        """Entries as a flat row-major vector."""
        return self.data.reshape(-1)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, scale(other, -1.0))

    def __mul__(self, scalar):
        return scale(self, scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"DenseTensor(shape={self.shape})"


# ---------------------------------------------------------------------------
# unfolding
# ---------------------------------------------------------------------------


def unfold(a: DenseTensor) -> np.ndarray:
    """Matrix unfolding; row index ranges over the row-mode tuple."""
    return a.data.reshape(a.shape.row_count, a.shape.col_count)


def fold(matrix: np.ndarray, shape: Shape) -> DenseTensor:
    """Inverse of :func:`unfold` for the given shape."""
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (shape.row_count, shape.col_count):
        raise ShapeError(
            f"matrix has shape {matrix.shape}, expected "
            f"{(shape.row_count, shape.col_count)}"
        )
    return DenseTensor(shape, matrix.reshape(shape.row_modes + shape.col_modes))


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------


def add(a: DenseTensor, b: DenseTensor) -> DenseTensor:
    if a.shape != b.shape:
        raise ShapeError(f"cannot add tensors of shapes {a.shape} and {b.shape}")
    return DenseTensor(a.shape, a.data + b.data)


def scale(a: DenseTensor, scalar) -> DenseTensor:
    return DenseTensor(a.shape, a.data * complex(scalar))


def einstein_product(a: DenseTensor, b: DenseTensor) -> DenseTensor:
    """Contraction of ``a``'s column modes against ``b``'s row modes.

    Computed as ``unfold(a) @ unfold(b)`` refolded, which fixes the
    floating-point contraction order; the identity
    ``unfold(a * b) == unfold(a) @ unfold(b)`` holds bit-exactly.
    """
    if a.shape.col_modes != b.shape.row_modes:
        raise ShapeError(
            f"contraction modes {a.shape.col_modes} do not match {b.shape.row_modes}"
        )
    out_shape = Shape(a.shape.row_modes, b.shape.col_modes)
    return fold(unfold(a) @ unfold(b), out_shape)


def conjugate_transpose(a: DenseTensor) -> DenseTensor:
    m = len(a.shape.row_modes)
    n = len(a.shape.col_modes)
    axes = tuple(range(m, m + n)) + tuple(range(m))
    return DenseTensor(a.shape.transposed(), np.conj(np.transpose(a.data, axes)))


def trace(a: DenseTensor) -> complex:
    if not a.shape.is_square:
        raise ShapeError(f"trace requires matching mode groups, got {a.shape}")
    return complex(np.trace(unfold(a)))


def inner_product(a: DenseTensor, b: DenseTensor) -> complex:
    """Trace pairing ``<a, b>``; equals the conjugated entrywise dot product."""
    if a.shape != b.shape:
        raise ShapeError(f"inner product requires equal shapes, got {a.shape}, {b.shape}")
    return complex(np.vdot(a.data, b.data))


def norm(a: DenseTensor, gauge=GaugeNorm.FROBENIUS) -> float:
    gauge = GaugeNorm.coerce(gauge)
    if gauge is GaugeNorm.FROBENIUS:
        return float(np.linalg.norm(a.data))
    singular = np.linalg.svd(unfold(a), compute_uv=False)
    if gauge is GaugeNorm.SPECTRAL:
        return float(singular[0])
    return float(singular.sum())


def default_tolerance(a: DenseTensor) -> float:
    return 1e-10 * norm(a, GaugeNorm.FROBENIUS)


def is_hermitian(a: DenseTensor, tol: float | None = None) -> bool:
    if not a.shape.is_square:
        return False
    if tol is None:
        tol = default_tolerance(a)
    mat = unfold(a)
    return float(np.linalg.norm(mat - mat.conj().T)) <= tol


def is_unitary(a: DenseTensor, tol: float | None = None) -> bool:
    if not a.shape.is_square:
        return False
    if tol is None:
        tol = default_tolerance(a)
    mat = unfold(a)
    eye = np.eye(mat.shape[0])
    return (
        float(np.linalg.norm(mat.conj().T @ mat - eye)) <= tol
        and float(np.linalg.norm(mat @ mat.conj().T - eye)) <= tol
    )


def lambda_max(a: DenseTensor, tol: float | None = None) -> float:
    """Largest eigenvalue of the Hermitian unfolding."""
    if not is_hermitian(a, tol):
        raise DomainError("lambda_max requires a Hermitian tensor")
    return float(np.linalg.eigvalsh(unfold(a))[-1])


def identity(shape: Shape) -> DenseTensor:
    if not shape.is_square:
        raise ShapeError(f"identity requires matching mode groups, got {shape}")
    return fold(np.eye(shape.row_count, dtype=np.complex128), shape)


def zero(shape: Shape) -> DenseTensor:
    return DenseTensor(shape, np.zeros(shape.row_modes + shape.col_modes, np.complex128))


def inverse(a: DenseTensor) -> DenseTensor:
    if not a.shape.is_square:
        raise ShapeError(f"inverse requires matching mode groups, got {a.shape}")
    try:
        inv = np.linalg.inv(unfold(a))
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"unfolding is singular: {exc}") from exc
    return fold(inv, a.shape)


# ---------------------------------------------------------------------------
# random constructions
# ---------------------------------------------------------------------------


def random_tensor(shape: Shape, rng: np.random.Generator) -> DenseTensor:
    dims = shape.row_modes + shape.col_modes
    data = rng.standard_normal(dims) + 1j * rng.standard_normal(dims)
    return DenseTensor(shape, data)


def random_hermitian(row_modes, rng: np.random.Generator) -> DenseTensor:
    shape = Shape(tuple(row_modes), tuple(row_modes))
    raw = unfold(random_tensor(shape, rng))
    return fold((raw + raw.conj().T) / 2.0, shape)


def random_unitary(row_modes, rng: np.random.Generator) -> DenseTensor:
    """Haar-style unitary from the QR factorization of a Gaussian unfolding."""
    shape = Shape(tuple(row_modes), tuple(row_modes))
    raw = unfold(random_tensor(shape, rng))
    q, r = np.linalg.qr(raw)
    q = q * (np.diag(r) / np.abs(np.diag(r)))[None, :]
    return fold(q, shape)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_HEADER = "tensorchain-tensor 1"


def tensor_to_text(a: DenseTensor) -> str:
    """Self-describing text record: shape lists, then one entry per line.

    Entries are written as ``real imag`` pairs with shortest round-trip
    float formatting, in the documented row-major index order.
    """
    lines = [
        _HEADER,
        "rows " + " ".join(str(e) for e in a.shape.row_modes),
        "cols " + " ".join(str(e) for e in a.shape.col_modes),
    ]
    for z in a.entries:
        lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def tensor_from_text(text: str) -> DenseTensor:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _HEADER:
        raise ValidationError("not a tensor record")
    if not lines[1].startswith("rows ") or not lines[2].startswith("cols "):
        raise ValidationError("malformed tensor header")
    shape = Shape(
        tuple(int(v) for v in lines[1].split()[1:]),
        tuple(int(v) for v in lines[2].split()[1:]),
    )
    count = shape.row_count * shape.col_count
    body = lines[3:]
    if len(body) != count:
        raise ValidationError(f"expected {count} entries, found {len(body)}")
    flat = np.empty(count, np.complex128)
    for i, ln in enumerate(body):
        re, im = ln.split()
        flat[i] = complex(float(re), float(im))
    return DenseTensor(shape, flat.reshape(shape.row_modes + shape.col_modes))


def save_tensor(a: DenseTensor, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(tensor_to_text(a))


def load_tensor(path) -> DenseTensor:
    with open(path, "r", encoding="ascii") as fh:
        return tensor_from_text(fh.read())
