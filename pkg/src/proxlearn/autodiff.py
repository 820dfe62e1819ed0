"""Reverse-mode autodiff over numpy arrays, parameter storage, Adam, and
gradient checking.

The graph is recorded at the array-op level (affine, activation, elementwise,
reduce), which is all the fixed operator architecture needs. Everything is
double precision.
"""

import numpy as np


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray.

    Leaf tensors created with ``requires_grad=True`` accumulate gradients in
    ``.grad`` after ``backward()`` is called on a scalar result.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad", "_needs")

    # Make ndarray <op> Tensor defer to the reflected operators below instead
    # of broadcasting elementwise over the Tensor object.
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None, requires_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad
        self._needs = requires_grad or any(p._needs for p in parents)

    @property
    def shape(self):
        return self.value.shape

    def backward(self):
        """Backpropagate from this scalar through the recorded graph."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar loss, got shape %s"
                             % (self.value.shape,))
        if not np.isfinite(self.value):
            raise FloatingPointError("non-finite loss: %r" % float(self.value))
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if p._needs and id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.value)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                if node.grad is None:
                    node.grad = np.zeros_like(node.value)
                node.grad += g
            if node._backward is None:
                continue
            for p, pg in zip(node.parents, node._backward(g)):
                if pg is None or not p._needs:
                    continue
                if id(p) in grads:
                    grads[id(p)] += pg
                else:
                    grads[id(p)] = pg

    # Arithmetic sugar; constants are wrapped on the fly.
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
        return mul(self, -1.0)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (reverses numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value + b.value, (a, b),
                  lambda g: (_unbroadcast(g, a.value.shape),
                             _unbroadcast(g, b.value.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value - b.value, (a, b),
                  lambda g: (_unbroadcast(g, a.value.shape),
                             _unbroadcast(-g, b.value.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value * b.value, (a, b),
                  lambda g: (_unbroadcast(g * b.value, a.value.shape),
                             _unbroadcast(g * a.value, b.value.shape)))


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value / b.value, (a, b),
                  lambda g: (_unbroadcast(g / b.value, a.value.shape),
                             _unbroadcast(-g * a.value / b.value ** 2,
                                          b.value.shape)))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.value @ b.value, (a, b),
                  lambda g: (g @ b.value.T, a.value.T @ g))


def powc(a, exponent):
    """a ** exponent with a constant (possibly array-valued) exponent."""
    a = as_tensor(a)
    e = np.asarray(exponent, dtype=np.float64)
    out = a.value ** e
    return Tensor(out, (a,),
                  lambda g: (_unbroadcast(g * e * a.value ** (e - 1.0),
                                          a.value.shape),))


def square(a):
    a = as_tensor(a)
    return Tensor(a.value ** 2, (a,), lambda g: (2.0 * a.value * g,))


def cos(a):
    a = as_tensor(a)
    return Tensor(np.cos(a.value), (a,), lambda g: (-np.sin(a.value) * g,))


def absolute(a):
    """|a| with subgradient 0 at 0."""
    a = as_tensor(a)
    return Tensor(np.abs(a.value), (a,), lambda g: (np.sign(a.value) * g,))


def relu(a):
    a = as_tensor(a)
    mask = a.value > 0
    return Tensor(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


HARDTANH_BOUND = 2.0


def hardtanh(a):
    """clamp(a, -2, 2); subgradient 0 at the clamped region including +-2."""
    a = as_tensor(a)
    mask = (a.value > -HARDTANH_BOUND) & (a.value < HARDTANH_BOUND)
    return Tensor(np.clip(a.value, -HARDTANH_BOUND, HARDTANH_BOUND), (a,),
                  lambda g: (g * mask,))


def clip_min(a, floor):
    """max(a, floor); gradient passes only where a > floor."""
    a = as_tensor(a)
    mask = a.value > floor
    return Tensor(np.maximum(a.value, floor), (a,), lambda g: (g * mask,))


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.value.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.value for t in tensors], axis=axis),
                  tuple(tensors), backward)


def rowsum(a):
    """Sum over the last axis, keeping the batch axis."""
    a = as_tensor(a)
    return Tensor(a.value.sum(axis=-1), (a,),
                  lambda g: (np.repeat(g[..., None], a.value.shape[-1], axis=-1),))


def total_sum(a):
    a = as_tensor(a)
    return Tensor(np.asarray(a.value.sum()), (a,),
                  lambda g: (np.broadcast_to(g, a.value.shape).copy(),))


def mean(a):
    a = as_tensor(a)
    n = a.value.size
    return Tensor(np.asarray(a.value.mean()), (a,),
                  lambda g: (np.broadcast_to(g / n, a.value.shape).copy(),))


def forward_affine(x, weights, bias):
    """x @ W + b for a batch of row vectors."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if x.value.shape[-1] != weights.value.shape[0]:
        raise ValueError("affine shape mismatch: input %s vs weights %s"
                         % (x.value.shape, weights.value.shape))
    return add(matmul(x, weights), bias)


def activation(kind, x):
    if kind == "relu":
        return relu(x)
    if kind == "hardtanh":
        return hardtanh(x)
    raise ValueError("unsupported activation: %r" % (kind,))


class ParamStore:
    """Named parameter tensors with a stable flattening order.

    Iteration, flattening, and checkpointing all follow insertion order, so
    flatten/unflatten round-trips exactly.
    """

    def __init__(self):
        self._params = {}

    def add(self, name, value):
        if name in self._params:
            raise KeyError("duplicate parameter name: %r" % name)
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def names(self):
        return list(self._params)

    def tensors(self):
        return list(self._params.values())

    def n_params(self):
        return sum(t.value.size for t in self._params.values())

    def zero_grad(self):
        for t in self._params.values():
            t.grad = None

    def grads(self):
        """Gradient arrays in flattening order; zeros where unset."""
        return {name: (t.grad if t.grad is not None else np.zeros_like(t.value))
                for name, t in self._params.items()}

    def flatten(self):
        if not self._params:
            return np.zeros(0)
        return np.concatenate([t.value.ravel() for t in self._params.values()])

    def unflatten(self, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params():
            raise ValueError("expected %d values, got %d"
                             % (self.n_params(), flat.size))
        offset = 0
        for t in self._params.values():
            n = t.value.size
            t.value = flat[offset:offset + n].reshape(t.value.shape).copy()
            offset += n

    def copy_values(self):
        return {name: t.value.copy() for name, t in self._params.items()}


class Adam:
    """Adam with bias correction; deterministic given inputs."""

    def __init__(self, store, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(t.value)
                  for name, t in zip(store.names(), store.tensors())}
        self.v = {name: np.zeros_like(t.value)
                  for name, t in zip(store.names(), store.tensors())}

    def step(self, store, grads, lr):
        if lr <= 0:
            raise ValueError("lr must be positive")
        self.t += 1
        for name in store.names():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient for %r" % name)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g ** 2
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            store[name].value -= lr * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(fn, store, h=1e-5, max_checks=None, rng=None):
    """Max relative error between backward() and central differences.

    ``fn`` maps the parameter store to a scalar Tensor. The denominator of
    the relative error is floored at 1e-8 so exact zeros compare as equal.
    When ``max_checks`` is given, a random subset of that many coordinates is
    probed instead of every parameter.
    """
    store.zero_grad()
    fn(store).backward()
    analytic = np.concatenate([
        (t.grad if t.grad is not None else np.zeros_like(t.value)).ravel()
        for t in store.tensors()
    ]) if store.tensors() else np.zeros(0)

    base = store.flatten()
    if max_checks is not None and max_checks < base.size:
        if rng is None:
            rng = np.random.default_rng(0)
        indices = rng.choice(base.size, size=max_checks, replace=False)
    else:
        indices = np.arange(base.size)
    numeric = analytic.copy()
    for i in indices:
        probe = base.copy()
        probe[i] = base[i] + h
        store.unflatten(probe)
        hi = float(fn(store).value)
        probe[i] = base[i] - h
        store.unflatten(probe)
        lo = float(fn(store).value)
        numeric[i] = (hi - lo) / (2 * h)
    store.unflatten(base)

    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def save_checkpoint(path, descriptor, store):
    """Header line (descriptor + count), then little-endian float64 params."""
    flat = store.flatten()
    with open(path, "wb") as f:
        f.write(("%s %d\n" % (descriptor, flat.size)).encode("utf-8"))
        f.write(flat.astype("<f8").tobytes())


def load_checkpoint(path):
    """Return (descriptor, flat parameter vector)."""
    with open(path, "rb") as f:
        header = bytearray()
        while True:
            c = f.read(1)
            if not c or c == b"\n":
                break
            header.extend(c)
        fields = header.decode("utf-8").rsplit(" ", 1)
        descriptor, count = fields[0], int(fields[1])
        flat = np.frombuffer(f.read(8 * count), dtype="<f8").astype(np.float64)
    if flat.size != count:
        raise ValueError("checkpoint truncated: expected %d params, got %d"
                         % (count, flat.size))
    return descriptor, flat
