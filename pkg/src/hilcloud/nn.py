"""Minimal deterministic neural toolkit.

A tape-free reverse-mode autodiff (:class:`Tensor`) over float64 numpy arrays,
a GRU cell, dense stacks, VAE losses, Adam, and a finite-difference gradient
checker. Everything is single-threaded and bit-reproducible for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgument, NonFiniteError
from .rng import SplitMix64


class Tensor:
    """A node in a dynamically built computation graph."""

    __slots__ = ("data", "parents", "backward_fn", "name")

    def __init__(self, data, parents: tuple = (), backward_fn=None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data + b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data - b.data, (a, b),
                  lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return Tensor(a.data * b.data, (a, b),
                  lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        if a.data.ndim == 1:
            return g @ b.data.T, np.outer(a.data, g)
        return g @ b.data.T, a.data.T @ g

    return Tensor(a.data @ b.data, (a, b), back)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = stable_sigmoid(a.data)
    return Tensor(s, (a,), lambda g: (g * s * (1.0 - s),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return Tensor(t, (a,), lambda g: (g * (1.0 - t * t),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return Tensor(e, (a,), lambda g: (g * e,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def total(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(a.data.sum(), (a,), lambda g: (np.full(a.shape, g),))


def mean(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size
    return Tensor(a.data.mean(), (a,), lambda g: (np.full(a.shape, g / n),))


def columns(a, start: int, stop: int) -> Tensor:
    """Slice ``a[..., start:stop]``."""
    a = as_tensor(a)

    def back(g):
        out = np.zeros(a.shape)
        out[..., start:stop] = g
        return (out,)

    return Tensor(a.data[..., start:stop], (a,), back)


def concat(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    sizes = np.cumsum([0] + [p.shape[-1] for p in parts])

    def back(g):
        return tuple(g[..., sizes[i]:sizes[i + 1]] for i in range(len(parts)))

    return Tensor(np.concatenate([p.data for p in parts], axis=-1), tuple(parts), back)


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(logits, targets: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under ``softmax(logits)``."""
    logits = as_tensor(logits)
    x = logits.data.reshape(-1, logits.shape[-1])
    tgt = np.asarray(targets).reshape(-1)
    z = x - x.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(tgt)
    loss = -logp[np.arange(n), tgt].mean()

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), tgt] -= 1.0
        return ((g / n) * p.reshape(logits.shape),)

    return Tensor(loss, (logits,), back)


def backprop(loss: Tensor, params: Mapping[str, Tensor] | None = None) -> dict[str, np.ndarray]:
    """Gradients of scalar ``loss`` with respect to each tensor in ``params``.

    When ``params`` is omitted, every named leaf reachable from ``loss`` is
    reported. Raises :class:`NonFiniteError` naming the first parameter whose
    gradient contains NaN or Inf.
    """
    if loss.data.size != 1:
        raise InvalidArgument("backprop needs a scalar loss")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.backward_fn is None:
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg

    if params is None:
        params = {n.name: n for n in order if n.name is not None and not n.parents}
    out = {}
    for name, t in params.items():
        g = grads.get(id(t))
        g = np.zeros_like(t.data) if g is None else np.asarray(g, dtype=np.float64).reshape(t.shape)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {name!r}")
        out[name] = g
    return out


def leaves(params: Mapping[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: Tensor(v, name=k) for k, v in params.items()}


# --- GRU --------------------------------------------------------------------

GRU_NAMES = ("W_rx", "W_rh", "b_r", "W_ux", "W_uh", "b_u", "W_cx", "W_ch", "b_c")


@dataclass
class GruParams:
    W_rx: np.ndarray
    W_rh: np.ndarray
    b_r: np.ndarray
    W_ux: np.ndarray
    W_uh: np.ndarray
    b_u: np.ndarray
    W_cx: np.ndarray
    W_ch: np.ndarray
    b_c: np.ndarray

    def __post_init__(self) -> None:
        n_in, h = self.W_rx.shape
        for name in GRU_NAMES:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            want = (n_in, h) if name.endswith("x") else (h, h) if name.endswith("h") else (h,)
            if arr.shape != want:
                raise InvalidArgument(f"GRU {name} has shape {arr.shape}, expected {want}")

    @property
    def input_dim(self) -> int:
        return self.W_rx.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W_rx.shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: SplitMix64) -> "GruParams":
        kw = {}
        for name in GRU_NAMES:
            if name.startswith("b"):
                kw[name] = np.zeros(hidden_dim)
            elif name.endswith("x"):
                kw[name] = rng.xavier_uniform(input_dim, hidden_dim)
            else:
                kw[name] = rng.xavier_uniform(hidden_dim, hidden_dim)
        return cls(**kw)

    def as_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        return {prefix + n: getattr(self, n) for n in GRU_NAMES}

    @classmethod
    def from_dict(cls, d: Mapping[str, np.ndarray], prefix: str = "") -> "GruParams":
        return cls(**{n: d[prefix + n] for n in GRU_NAMES})


@dataclass(frozen=True)
class GruState:
    h: np.ndarray


def gru_cell(p: Mapping[str, Tensor], x, h, prefix: str = "") -> Tensor:
    """One GRU update on tensors; ``p`` maps parameter names to tensors."""
    g = lambda n: p[prefix + n]  # noqa: E731
    r = sigmoid(x @ g("W_rx") + h @ g("W_rh") + g("b_r"))
    u = sigmoid(x @ g("W_ux") + h @ g("W_uh") + g("b_u"))
    c = tanh(x @ g("W_cx") + (r * h) @ g("W_ch") + g("b_c"))
    return u * h + (1.0 - u) * c


def gru_step(p: GruParams, x, s: GruState) -> GruState:
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(s.h, dtype=np.float64)
    if x.shape[-1] != p.input_dim or h.shape[-1] != p.hidden_dim:
        raise InvalidArgument(f"GRU expects input {p.input_dim} and hidden {p.hidden_dim}, "
                              f"got {x.shape} and {h.shape}")
    out = gru_cell({k: Tensor(v) for k, v in p.as_dict().items()}, Tensor(x), Tensor(h)).data
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("GRU produced a non-finite hidden state")
    return GruState(out)


# --- dense stacks -----------------------------------------------------------

ACTIVATIONS = ("linear", "tanh", "sigmoid")


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise InvalidArgument("weights, biases and activations must align")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise InvalidArgument(f"unknown activation {act!r}")
            if b.shape != (w.shape[1],):
                raise InvalidArgument(f"layer {i}: bias {b.shape} does not match weight {w.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise InvalidArgument(f"layer {i} input {w.shape[0]} does not chain")

    @classmethod
    def init(cls, sizes: Sequence[int], activations: Sequence[str], rng: SplitMix64) -> "MlpParams":
        ws = [rng.xavier_uniform(a, b) for a, b in zip(sizes[:-1], sizes[1:])]
        bs = [np.zeros(b) for b in sizes[1:]]
        return cls(ws, bs, list(activations))

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def as_dict(self, prefix: str = "") -> dict[str, np.ndarray]:
        d = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            d[f"{prefix}W{i}"] = w
            d[f"{prefix}b{i}"] = b
        return d

    def with_values(self, d: Mapping[str, np.ndarray], prefix: str = "") -> "MlpParams":
        n = len(self.weights)
        return MlpParams([d[f"{prefix}W{i}"] for i in range(n)],
                         [d[f"{prefix}b{i}"] for i in range(n)], list(self.activations))


def mlp_apply(p: Mapping[str, Tensor], activations: Sequence[str], x, prefix: str = "") -> Tensor:
    out = as_tensor(x)
    for i, act in enumerate(activations):
        out = out @ p[f"{prefix}W{i}"] + p[f"{prefix}b{i}"]
        if act == "tanh":
            out = tanh(out)
        elif act == "sigmoid":
            out = sigmoid(out)
    return out


def mlp_forward(p: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.input_dim:
        raise InvalidArgument(f"MLP expects input dim {p.input_dim}, got {x.shape[-1]}")
    out = x
    for w, b, act in zip(p.weights, p.biases, p.activations):
        out = out @ w + b
        if act == "tanh":
            out = np.tanh(out)
        elif act == "sigmoid":
            out = stable_sigmoid(out)
    return out


# --- VAE pieces ---------------------------------------------------------------

def kl_tensor(mu: Tensor, logvar: Tensor) -> Tensor:
    """KL(q || N(0, I)) summed over latent dims, averaged over leading dims."""
    terms = square(mu) + exp(logvar) - 1.0 - logvar
    batch = mu.data.size // mu.shape[-1]
    return mul(total(terms), 0.5 / batch)


def vae_losses(reconstruction, target, mu, logvar, beta: float = 1e-3) -> tuple[float, float, float]:
    """``(recon_mse, kl, recon_mse + beta * kl)`` for arrays."""
    reconstruction, target = np.asarray(reconstruction, float), np.asarray(target, float)
    mu, logvar = np.asarray(mu, float), np.asarray(logvar, float)
    if reconstruction.shape != target.shape or mu.shape != logvar.shape:
        raise InvalidArgument("vae_losses shape mismatch")
    if beta < 0:
        raise InvalidArgument("beta must be >= 0")
    recon = float(np.mean((reconstruction - target) ** 2))
    # expm1 keeps each term non-negative when logvar is tiny
    terms = np.maximum(mu ** 2 + np.expm1(logvar) - logvar, 0.0)
    kl = float(0.5 * terms.sum() / (mu.size // mu.shape[-1]))
    return recon, kl, recon + beta * kl


def reparameterize(mu, logvar, eps) -> np.ndarray:
    mu, logvar, eps = (np.asarray(a, dtype=np.float64) for a in (mu, logvar, eps))
    if not (mu.shape == logvar.shape == eps.shape):
        raise InvalidArgument("reparameterize shape mismatch")
    return mu + eps * np.exp(0.5 * logvar)


def reparameterize_tensor(mu: Tensor, logvar: Tensor, eps: np.ndarray) -> Tensor:
    return mu + mul(exp(mul(logvar, 0.5)), eps)


# --- Adam ---------------------------------------------------------------------

@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Mapping[str, np.ndarray],
              grads: Mapping[str, np.ndarray]) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update; returns new parameters and a new state."""
    step = state.step + 1
    c1 = 1.0 - state.beta1 ** step
    c2 = 1.0 - state.beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise InvalidArgument(f"gradient shape {g.shape} != parameter shape {theta.shape} for {name}")
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1.0 - state.beta1) * g if m is None else state.beta1 * m + (1.0 - state.beta1) * g
        v = (1.0 - state.beta2) * g * g if v is None else state.beta2 * v + (1.0 - state.beta2) * g * g
        new_params[name] = theta - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, AdamState(state.lr, state.beta1, state.beta2, state.eps, step, new_m, new_v)


# --- gradient verification ----------------------------------------------------

@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e <= self.tolerance for e in self.max_rel_error.values())

    def __str__(self) -> str:
        rows = [f"{k}: {v:.3e}" for k, v in self.max_rel_error.items()]
        return f"grad_check({'pass' if self.passed else 'FAIL'} @ {self.tolerance:g}) " + ", ".join(rows)


def grad_check(loss_fn: Callable[[Mapping[str, Tensor]], Tensor], params: Mapping[str, np.ndarray],
               tolerance: float = 1e-4, step: float = 1e-5, max_entries: int | None = None,
               seed: int = 0, floor: float = 1e-6) -> GradCheckReport:
    """Compare :func:`backprop` against central finite differences.

    Relative error per entry is ``|a - n| / max(|a|, |n|, floor)``; the report
    holds the maximum per parameter tensor. ``max_entries`` limits how many
    entries of each tensor are probed (chosen with a seeded stream).
    """
    if not tolerance > 0:
        raise InvalidArgument("tolerance must be > 0")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    analytic = backprop(loss_fn(leaves(params)), None)
    rng = SplitMix64(seed)
    report = {}
    for name, value in params.items():
        flat = value.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.permutation(flat.size)[:max_entries])
        worst = 0.0
        a_flat = analytic.get(name, np.zeros_like(value)).reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            up = float(loss_fn(leaves(params)).data)
            flat[i] = orig - step
            down = float(loss_fn(leaves(params)).data)
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            a = a_flat[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
        report[name] = float(worst)
    return GradCheckReport(report, tolerance)


def check_finite(value: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"non-finite values in {what}")
    return value

