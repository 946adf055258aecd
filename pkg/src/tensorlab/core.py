"""Dense 3-way arrays: outer products, slices, group actions, and bit codes.

Arrays are at most 3x3x3.  Complex arrays use complex128; GF(2) arrays use
uint8 entries in {0, 1}.  Entry (i, j, k) follows the usual convention that
i indexes rows, j columns, and k frontal slices; indices are 1-based in
documentation and error messages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DIM = 3


class TensorFormatError(ValueError):
    """Malformed tensor text, or a bit code out of range for its dims."""


def _check_dims(dims):
    if len(dims) != 3 or any(not 1 <= d <= MAX_DIM for d in dims):
        raise ValueError(f"dims must be three values in 1..{MAX_DIM}, got {dims}")
    return tuple(int(d) for d in dims)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """A p x q x r array over C (f2=False) or GF(2) (f2=True)."""

    data: np.ndarray
    f2: bool = False

    def __post_init__(self):
        dtype = np.uint8 if self.f2 else np.complex128
        arr = np.asarray(self.data, dtype=dtype)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-way array, got ndim={arr.ndim}")
        _check_dims(arr.shape)
        if self.f2:
            if not np.all((arr == 0) | (arr == 1)):
                raise ValueError("GF(2) tensor entries must be 0 or 1")
        elif not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def dims(self):
        return self.data.shape

    def slice(self, direction, index):
        """2-D slice fixing one 1-based index: direction 1 fixes i
        (horizontal), 2 fixes j (vertical), 3 fixes k (frontal)."""
        if direction not in (1, 2, 3):
            raise ValueError(f"direction must be 1, 2 or 3, got {direction}")
        if not 1 <= index <= self.dims[direction - 1]:
            raise IndexError(
                f"slice index {index} out of range 1..{self.dims[direction - 1]}"
                f" in direction {direction}")
        sl = [np.s_[:]] * 3
        sl[direction - 1] = index - 1
        return self.data[tuple(sl)].copy()

    def frontal_slices(self):
        return [self.slice(3, k + 1) for k in range(self.dims[2])]

    def matrix_form(self):
        """p x (q*r) matrix: frontal slices concatenated left to right."""
        return np.hstack(self.frontal_slices())

    def max_norm(self):
        return float(np.abs(self.data).max()) if self.data.size else 0.0

    def __repr__(self):
        p, q, r = self.dims
        kind = "F2" if self.f2 else "C"
        return f"DenseTensor({p}x{q}x{r} over {kind})"


def tensors_close(s, t, tol=1e-9):
    """Max-norm equality test, relative to the larger operand."""
    if s.dims != t.dims:
        return False
    diff = np.abs(np.asarray(s.data, np.complex128) - np.asarray(t.data, np.complex128)).max()
    scale = max(s.max_norm(), t.max_norm())
    return diff <= tol * scale if scale > 0 else diff == 0


@dataclass(frozen=True, eq=False)
class SimpleTerm:
    """Outer product a (x) b (x) c of nonzero vectors."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f2: bool = False

    def __post_init__(self):
        dtype = np.uint8 if self.f2 else np.complex128
        for name in ("a", "b", "c"):
            v = np.asarray(getattr(self, name), dtype=dtype).reshape(-1)
            if not 1 <= v.size <= MAX_DIM:
                raise ValueError(f"vector {name} must have length 1..{MAX_DIM}")
            if not np.any(v):
                raise ValueError(f"vector {name} of a simple term must be nonzero")
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @property
    def dims(self):
        return (self.a.size, self.b.size, self.c.size)

    def tensor(self):
        return outer_product(self.a, self.b, self.c, f2=self.f2)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """A sum of simple terms approximating a target array.

    The term count is by definition an upper bound on the rank of the
    target.  `residual` is the relative max-norm error of the sum.
    """

    terms: tuple
    target_dims: tuple
    residual: float = 0.0
    f2: bool = False

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "target_dims", _check_dims(self.target_dims))
        for t in self.terms:
            if t.dims != self.target_dims:
                raise ValueError(
                    f"term dims {t.dims} do not match target {self.target_dims}")
        if self.residual < 0:
            raise ValueError("residual must be non-negative")

    def __len__(self):
        return len(self.terms)


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Change of basis along each direction, then an optional permutation
    of the directions.

    `matrices` holds one invertible matrix per direction, sized to that
    direction.  `perm` is a 0-based axis triple: the result of the
    permutation step has axis a equal to axis perm[a] of its input.
    """

    matrices: tuple
    perm: tuple | None = None
    f2: bool = False

    def __post_init__(self):
        dtype = np.uint8 if self.f2 else np.complex128
        mats = []
        for d, M in enumerate(self.matrices):
            M = np.asarray(M, dtype=dtype)
            if M.ndim != 2 or M.shape[0] != M.shape[1] or not 1 <= M.shape[0] <= MAX_DIM:
                raise ValueError(f"matrix for direction {d + 1} must be square, side 1..3")
            if self.f2:
                if not np.all((M == 0) | (M == 1)):
                    raise ValueError("GF(2) matrices must have entries 0 or 1")
                if _det_f2(M) == 0:
                    raise ValueError(f"matrix for direction {d + 1} is singular over GF(2)")
            elif np.linalg.matrix_rank(M) < M.shape[0]:
                raise ValueError(f"matrix for direction {d + 1} is singular")
            M.flags.writeable = False
            mats.append(M)
        object.__setattr__(self, "matrices", tuple(mats))
        if self.perm is not None:
            perm = tuple(int(a) for a in self.perm)
            if sorted(perm) != [0, 1, 2]:
                raise ValueError(f"perm must reorder (0, 1, 2), got {perm}")
            object.__setattr__(self, "perm", perm)

    def inverse(self):
        if self.f2:
            invs = [_inv_f2(M) for M in self.matrices]
        else:
            invs = [np.linalg.inv(M) for M in self.matrices]
        if self.perm is None:
            return GroupElement(tuple(invs), None, self.f2)
        # undoing the permutation moves the inverse for old direction
        # perm[b] onto new direction b
        inv_perm = tuple(np.argsort(self.perm))
        mats = tuple(invs[self.perm[b]] for b in range(3))
        return GroupElement(mats, inv_perm, self.f2)


@dataclass(frozen=True)
class F2Code:
    """Bit-packed GF(2) tensor: lex flattening read as a base-2 numeral.

    The flattening lists entries in lex order of (i, j, k); the first
    entry x_111 is the most significant bit, so the lex order on
    flattenings coincides with the natural order on code integers.
    """

    bits: int
    dims: tuple

    def __post_init__(self):
        object.__setattr__(self, "dims", _check_dims(self.dims))
        n = self.nbits
        if not 0 <= self.bits < (1 << n):
            raise TensorFormatError(
                f"code {self.bits} out of range 0..2^{n}-1 for dims {self.dims}")

    @property
    def nbits(self):
        p, q, r = self.dims
        return p * q * r

    def pattern(self):
        """Flattening as a string with '.' for 0 and '1' for 1."""
        return format(self.bits, f"0{self.nbits}b").replace("0", ".")


# ---------------------------------------------------------------------------
# GF(2) matrix helpers (tiny sizes only)
# ---------------------------------------------------------------------------


def _det_f2(M):
    a = np.asarray(M, np.int64)
    n = a.shape[0]
    if n == 1:
        d = a[0, 0]
    elif n == 2:
        d = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    else:
        d = int(round(np.linalg.det(a.astype(np.float64))))
    return int(d) & 1


def _inv_f2(M):
    """Gauss-Jordan inverse over GF(2)."""
    n = M.shape[0]
    A = np.concatenate([np.asarray(M, np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        pivot = None
        for row in range(col, n):
            if A[row, col]:
                pivot = row
                break
        if pivot is None:
            raise ValueError("singular matrix over GF(2)")
        if pivot != col:
            A[[col, pivot]] = A[[pivot, col]]
        for row in range(n):
            if row != col and A[row, col]:
                A[row] ^= A[col]
    return A[:, n:].copy()


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def outer_product(a, b, c, f2=False):
    """Tensor with (i, j, k) entry a_i * b_j * c_k."""
    dtype = np.uint8 if f2 else np.complex128
    a = np.asarray(a, dtype=dtype).reshape(-1)
    b = np.asarray(b, dtype=dtype).reshape(-1)
    c = np.asarray(c, dtype=dtype).reshape(-1)
    data = np.einsum("i,j,k->ijk", a, b, c)
    if f2:
        data &= 1
    return DenseTensor(data, f2=f2)


def act(t, g):
    """Apply a group element: change of basis along each direction,
    then the optional direction permutation.  Rank is preserved."""
    if g.f2 != t.f2:
        raise ValueError("group element and tensor must be over the same field")
    A, B, C = g.matrices
    if (A.shape[0], B.shape[0], C.shape[0]) != t.dims:
        raise ValueError(f"matrix sizes {tuple(M.shape[0] for M in g.matrices)} "
                         f"do not match tensor dims {t.dims}")
    if t.f2:
        data = np.einsum("ia,jb,kc,abc->ijk",
                         A.astype(np.int64), B.astype(np.int64),
                         C.astype(np.int64), t.data.astype(np.int64)) & 1
        data = data.astype(np.uint8)
    else:
        data = np.einsum("ia,jb,kc,abc->ijk", A, B, C, t.data)
    if g.perm is not None:
        data = np.transpose(data, g.perm)
    return DenseTensor(data, f2=t.f2)


def permute_directions(t, perm):
    """Direction permutation alone: axis a of the result is axis perm[a]."""
    if sorted(perm) != [0, 1, 2]:
        raise ValueError(f"perm must reorder (0, 1, 2), got {perm}")
    return DenseTensor(np.transpose(t.data, perm), f2=t.f2)


def encode(t):
    """Bit-pack a GF(2) tensor; x_111 becomes the most significant bit."""
    arr = np.asarray(t.data)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError("encode requires entries in {0, 1}")
    bits = np.real(arr).astype(np.uint8).ravel(order="C")
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return F2Code(code, t.dims)


def decode(code):
    """Inverse of encode."""
    n = code.nbits
    bits = [(code.bits >> (n - 1 - i)) & 1 for i in range(n)]
    data = np.array(bits, np.uint8).reshape(code.dims)
    return DenseTensor(data, f2=True)


def evaluate(d):
    """Entrywise sum of the terms of a decomposition (XOR over GF(2))."""
    dtype = np.uint8 if d.f2 else np.complex128
    total = np.zeros(d.target_dims, dtype=np.int64 if d.f2 else dtype)
    for term in d.terms:
        if term.f2 != d.f2:
            raise ValueError("term/decomposition field mismatch")
        total += term.tensor().data
    if d.f2:
        total = (total & 1).astype(np.uint8)
    return DenseTensor(total, f2=d.f2)


# ---------------------------------------------------------------------------
# Text formats
# ---------------------------------------------------------------------------


def format_scalar(z):
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.17g}"
    return f"{z.real:.17g}{z.imag:+.17g}i"


def parse_scalar(token):
    try:
        z = complex(token.replace("i", "j"))
    except ValueError:
        raise TensorFormatError(f"cannot parse scalar {token!r}") from None
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise TensorFormatError(f"non-finite scalar {token!r}")
    return z


def _parse_code_token(token):
    """Decimal or 0x-hex integer, or None if the token is not one."""
    try:
        if token.lower().startswith("0x"):
            return int(token, 16)
        return int(token, 10)
    except ValueError:
        return None


def read_tensor_text(text):
    """Parse the text tensor format.

    Line 1 holds "p q r"; the rest holds p*q*r scalars in lex subscript
    order, or a single decimal / 0x-hex integer naming a GF(2) code.
    """
    tokens = text.split()
    if len(tokens) < 4:
        raise TensorFormatError("expected 'p q r' followed by entries")
    try:
        dims = _check_dims([int(x) for x in tokens[:3]])
    except ValueError as e:
        raise TensorFormatError(str(e)) from None
    body = tokens[3:]
    p, q, r = dims
    n = p * q * r
    if len(body) == 1 and n > 1:
        code = _parse_code_token(body[0])
        if code is not None:
            return decode(F2Code(code, dims))
    if len(body) != n:
        raise TensorFormatError(f"expected {n} entries for dims {dims}, got {len(body)}")
    values = [parse_scalar(tok) for tok in body]
    data = np.array(values, np.complex128).reshape(dims)
    return DenseTensor(data)


def write_tensor_text(t):
    p, q, r = t.dims
    if t.f2:
        entries = " ".join(str(int(v)) for v in t.data.ravel(order="C"))
    else:
        entries = " ".join(format_scalar(v) for v in t.data.ravel(order="C"))
    return f"{p} {q} {r}\n{entries}\n"


def write_decomposition_text(d):
    p, q, r = d.target_dims
    lines = [f"dims {p} {q} {r}"]
    for t in d.terms:
        parts = [" ".join(format_scalar(v) for v in vec) for vec in (t.a, t.b, t.c)]
        lines.append("term " + " | ".join(parts))
    lines.append(f"residual {d.residual:.17g}")
    return "\n".join(lines) + "\n"


def read_decomposition_text(text):
    dims = None
    terms = []
    residual = 0.0
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        kind, _, rest = line.partition(" ")
        if kind == "dims":
            dims = _check_dims([int(x) for x in rest.split()])
        elif kind == "term":
            if dims is None:
                raise TensorFormatError("term before dims line")
            parts = rest.split("|")
            if len(parts) != 3:
                raise TensorFormatError(f"term needs 3 vectors, got {len(parts)}")
            vecs = [[parse_scalar(tok) for tok in part.split()] for part in parts]
            terms.append(SimpleTerm(*[np.array(v, np.complex128) for v in vecs]))
        elif kind == "residual":
            residual = float(rest)
        else:
            raise TensorFormatError(f"unknown line {line!r}")
    if dims is None:
        raise TensorFormatError("missing dims line")
    return Decomposition(tuple(terms), dims, residual=residual)
