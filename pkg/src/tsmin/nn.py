"""Small numpy MLPs with hand-written backprop, Adam, and masked categoricals."""

from __future__ import annotations

import numpy as np


def orthogonal(rng, n_in, n_out, gain):
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class MLP:
    """Fully connected net: tanh on hidden layers, linear output.

    ``params`` is a flat list ``[W0, b0, W1, b1, ...]`` with ``W`` of shape (in, out).
    """

    def __init__(self, sizes, rng=None, hidden_gain=np.sqrt(2), out_gain=1.0):
        self.sizes = tuple(int(s) for s in sizes)
        rng = np.random.default_rng(rng)
        self.params = []
        last = len(self.sizes) - 2
        for li, (a, b) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            self.params.append(orthogonal(rng, a, b, out_gain if li == last else hidden_gain))
            self.params.append(np.zeros(b))

    def forward(self, x):
        """Returns (output, cache) for a batch ``x`` of shape (B, in)."""
        acts = [np.asarray(x, dtype=float)]
        h = acts[0]
        n_layers = len(self.params) // 2
        for li in range(n_layers):
            z = h @ self.params[2 * li] + self.params[2 * li + 1]
            h = np.tanh(z) if li < n_layers - 1 else z
            acts.append(h)
        return h, acts

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, d_out):
        """Gradients of a scalar loss w.r.t. ``params`` given dL/d(output)."""
        grads = [None] * len(self.params)
        n_layers = len(self.params) // 2
        d = d_out
        for li in reversed(range(n_layers)):
            h_in, h_out = cache[li], cache[li + 1]
            if li < n_layers - 1:
                d = d * (1.0 - h_out**2)
            grads[2 * li] = h_in.T @ d
            grads[2 * li + 1] = d.sum(axis=0)
            d = d @ self.params[2 * li].T
        return grads

    def copy(self):
        other = object.__new__(MLP)
        other.sizes = self.sizes
        other.params = [p.copy() for p in self.params]
        return other


class Adam:
    """Adam over a single flat parameter vector, updated in place."""

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-5):
        self.params = params
        self.lr, self.eps = lr, eps
        self.b1, self.b2 = betas
        self.m = np.zeros_like(params)
        self.v = np.zeros_like(params)
        self.t = 0

    def step(self, grad):
        self.t += 1
        self.m *= self.b1
        self.m += (1.0 - self.b1) * grad
        self.v *= self.b2
        self.v += (1.0 - self.b2) * grad * grad
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        denom = np.sqrt(self.v / c2)
        denom += self.eps
        self.params -= (self.lr / c1) * self.m / denom


def clip_grad_norm(grad, max_norm):
    total = float(np.sqrt(grad @ grad))
    if total > max_norm:
        grad = grad * (max_norm / (total + 1e-6))
    return grad, total


def masked_log_softmax(logits, mask):
    """Row-wise log-probabilities with masked entries at exactly -inf."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any(axis=-1).all():
        raise ValueError("every row needs at least one valid action")
    z = np.where(mask, logits, -np.inf)
    zmax = z.max(axis=-1, keepdims=True)
    shifted = z - zmax
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def masked_probs(logits, mask):
    return np.exp(masked_log_softmax(logits, mask))


def masked_entropy(logp, mask):
    p = np.exp(logp)
    return -np.where(mask, p * np.where(mask, logp, 0.0), 0.0).sum(axis=-1)


def sample_masked(rng, probs):
    """Inverse-CDF sampling; zero-probability entries can never be drawn."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0]) * cdf[:, -1]
    idx = np.array([np.searchsorted(c, x, side="right") for c, x in zip(cdf, u)])
    # u can round up to the total; fall back to the last drawable entry
    last = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    return np.where(idx > last, last, idx)
