"""Reverse-mode automatic differentiation over real numpy arrays.

Minimal tape-based engine: each Value wraps a float64 array, remembers its
parents and a closure that scatters the upstream gradient back to them.
Complex quantities are carried as stacked real pairs with a leading axis of
length 2 (index 0 = real part, 1 = imaginary part), so the whole graph stays
real-valued and the complex closed-form solves get custom adjoints.
"""

import numpy as np

EPS_MAG = 1e-12       # guard for |z| denominators
SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772
LN_EPS = 1e-5         # inside the layer-norm square root


class Value:
    """A node in the computation graph holding a real array payload."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError("non-finite payload entering the tape")
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Value(shape={self.data.shape})"

    # operator sugar; constants are wrapped as leaf Values
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return index(self, key)


def _wrap(x):
    return x if isinstance(x, Value) else Value(x)


def _unbroadcast(grad, shape):
    """Sum an upstream gradient back down to the shape it broadcast from."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss):
    """Reverse pass from a scalar loss; fills .grad on every reachable node."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:  # iterative topological sort (graphs exceed recursion depth)
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    for node in order:
        node.grad = np.zeros_like(node.data)
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


# -- arithmetic primitives -----------------------------------------------------

def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Value(a.data + b.data, (a, b))

    def back(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad += _unbroadcast(g, b.data.shape)
    out._backward = back
    return out


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Value(a.data - b.data, (a, b))

    def back(g):
        a.grad += _unbroadcast(g, a.data.shape)
        b.grad -= _unbroadcast(g, b.data.shape)
    out._backward = back
    return out


def neg(a):
    a = _wrap(a)
    out = Value(-a.data, (a,))

    def back(g):
        a.grad -= g
    out._backward = back
    return out


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Value(a.data * b.data, (a, b))

    def back(g):
        a.grad += _unbroadcast(g * b.data, a.data.shape)
        b.grad += _unbroadcast(g * a.data, b.data.shape)
    out._backward = back
    return out


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Value(a.data @ b.data, (a, b))

    def back(g):
        a.grad += g @ b.data.T
        b.grad += a.data.T @ g
    out._backward = back
    return out


def matvec(a, x):
    a, x = _wrap(a), _wrap(x)
    out = Value(a.data @ x.data, (a, x))

    def back(g):
        a.grad += np.outer(g, x.data)
        x.grad += a.data.T @ g
    out._backward = back
    return out


def vsum(a, axis=None):
    a = _wrap(a)
    out = Value(a.data.sum(axis=axis), (a,))

    def back(g):
        if axis is None:
            a.grad += g
        else:
            a.grad += np.expand_dims(g, axis)
    out._backward = back
    return out


def vmean(a):
    n = _wrap(a).data.size
    return mul(vsum(a), 1.0 / n)


def concat(parts):
    parts = [_wrap(p) for p in parts]
    out = Value(np.concatenate([p.data for p in parts]), tuple(parts))
    sizes = [p.data.shape[0] for p in parts]

    def back(g):
        off = 0
        for p, n in zip(parts, sizes):
            p.grad += g[off:off + n]
            off += n
    out._backward = back
    return out


def stack2(a, b):
    """Stack two same-shape arrays along a new leading axis (real/imag pairs)."""
    a, b = _wrap(a), _wrap(b)
    out = Value(np.stack([a.data, b.data]), (a, b))

    def back(g):
        a.grad += g[0]
        b.grad += g[1]
    out._backward = back
    return out


def transpose(a):
    a = _wrap(a)
    out = Value(a.data.T, (a,))

    def back(g):
        a.grad += g.T
    out._backward = back
    return out


def stackn(rows):
    """Stack 1-D (or equal-shape) Values along a new leading axis."""
    rows = [_wrap(r) for r in rows]
    out = Value(np.stack([r.data for r in rows]), tuple(rows))

    def back(g):
        for i, r in enumerate(rows):
            r.grad += g[i]
    out._backward = back
    return out


def index(a, key):
    a = _wrap(a)
    out = Value(a.data[key], (a,))

    def back(g):
        np.add.at(a.grad, key, g)
    out._backward = back
    return out


# -- scalar nonlinearities (elementwise) ---------------------------------------

def ln(a):
    a = _wrap(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Value(np.log(a.data), (a,))

    def back(g):
        a.grad += g / a.data
    out._backward = back
    return out


def log2(a):
    a = _wrap(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Value(np.log2(a.data), (a,))

    def back(g):
        a.grad += g / (a.data * np.log(2.0))
    out._backward = back
    return out


def sqrt(a):
    a = _wrap(a)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(a.data)
    out = Value(root, (a,))

    def back(g):
        a.grad += g * 0.5 / root
    out._backward = back
    return out


def tanh(a):
    a = _wrap(a)
    t = np.tanh(a.data)
    out = Value(t, (a,))

    def back(g):
        a.grad += g * (1.0 - t * t)
    out._backward = back
    return out


def sigmoid(a):
    a = _wrap(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Value(s, (a,))

    def back(g):
        a.grad += g * s * (1.0 - s)
    out._backward = back
    return out


def selu(a):
    a = _wrap(a)
    pos = a.data > 0
    expm = SELU_ALPHA * np.expm1(a.data)
    out = Value(SELU_LAMBDA * np.where(pos, a.data, expm), (a,))

    def back(g):
        slope = np.where(pos, 1.0, expm + SELU_ALPHA)
        a.grad += g * SELU_LAMBDA * slope
    out._backward = back
    return out


def positive_part(a):
    """max(x, 0) with zero subgradient on the clamped side and at the boundary."""
    a = _wrap(a)
    pos = a.data > 0
    out = Value(np.where(pos, a.data, 0.0), (a,))

    def back(g):
        a.grad += g * pos
    out._backward = back
    return out


def layer_norm(x, gain, bias):
    """Normalize a vector across its feature dimension with learnable affine."""
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    centered = sub(x, vmean(x))
    var = vmean(mul(centered, centered))
    normed = mul(centered, reciprocal(sqrt(add(var, LN_EPS))))
    return add(mul(normed, gain), bias)


def reciprocal(a):
    a = _wrap(a)
    with np.errstate(divide="ignore"):
        r = 1.0 / a.data
    out = Value(r, (a,))

    def back(g):
        a.grad -= g * r * r
    out._backward = back
    return out


# -- complex pairs (leading axis 2: [real, imag]) ------------------------------

def cpack(z):
    """Wrap a constant complex array as a stacked real-pair leaf."""
    z = np.asarray(z, dtype=np.complex128)
    return Value(np.stack([z.real, z.imag]))


def cunpack(v):
    """Read a stacked pair back out as a plain complex array."""
    data = v.data if isinstance(v, Value) else np.asarray(v)
    return data[0] + 1j * data[1]


def creal(z):
    return index(z, 0)


def cimag(z):
    return index(z, 1)


def cconj(z):
    return stack2(creal(z), neg(cimag(z)))


def cmul(a, b):
    ar, ai = creal(a), cimag(a)
    br, bi = creal(b), cimag(b)
    return stack2(sub(mul(ar, br), mul(ai, bi)),
                  add(mul(ar, bi), mul(ai, br)))


def cdot(a, b):
    """Inner product a^H b of two stacked complex vectors -> stacked scalar."""
    prod = cmul(cconj(a), b)
    return stack2(vsum(index(prod, 0)), vsum(index(prod, 1)))


def magnitude(z):
    """|z| elementwise from a stacked pair; gradient guarded near zero."""
    z = _wrap(z)
    re, im = z.data[0], z.data[1]
    m = np.sqrt(re * re + im * im)
    out = Value(m, (z,))
    safe = np.maximum(m, EPS_MAG)

    def back(g):
        z.grad[0] += g * re / safe
        z.grad[1] += g * im / safe
    out._backward = back
    return out


def phase_normalize(z):
    """z / |z| elementwise on a stacked pair with a guarded denominator."""
    z = _wrap(z)
    re, im = z.data[0], z.data[1]
    m = np.maximum(np.sqrt(re * re + im * im), EPS_MAG)
    out = Value(z.data / m, (z,))

    def back(g):
        gr, gi = g[0], g[1]
        radial = (re * gr + im * gi) / m ** 3
        z.grad[0] += gr / m - re * radial
        z.grad[1] += gi / m - im * radial
    out._backward = back
    return out


def cscale(s, x):
    """Complex scalar pair (2,) times complex vector pair (2, M)."""
    sr, si = creal(s), cimag(s)
    xr, xi = creal(x), cimag(x)
    return stack2(sub(mul(sr, xr), mul(si, xi)),
                  add(mul(sr, xi), mul(si, xr)))


def cmatvec_const(H, v):
    """Multiply a constant complex matrix by a complex vector pair."""
    Hr, Hi = Value(H.real.copy()), Value(H.imag.copy())
    vr, vi = creal(v), cimag(v)
    return stack2(sub(matvec(Hr, vr), matvec(Hi, vi)),
                  add(matvec(Hr, vi), matvec(Hi, vr)))


def detach(a):
    """Cut the graph: same payload, no parents."""
    return Value(a.data.copy())


def hermitian_solve_diff(A, b):
    """x = A^{-1} b for stacked complex A (2,M,M), b (2,M), with solve adjoint.

    Adjoint: w = A^{-H} g; grad_b = w, grad_A = -w x^H, expanded to real pairs.
    """
    A, b = _wrap(A), _wrap(b)
    Ac = A.data[0] + 1j * A.data[1]
    bc = b.data[0] + 1j * b.data[1]
    x = np.linalg.solve(Ac, bc)
    out = Value(np.stack([x.real, x.imag]), (A, b))

    def back(g):
        gc = g[0] + 1j * g[1]
        w = np.linalg.solve(Ac.conj().T, gc)
        b.grad[0] += w.real
        b.grad[1] += w.imag
        gA = -np.outer(w, x.conj())
        A.grad[0] += gA.real
        A.grad[1] += gA.imag
    out._backward = back
    return out
