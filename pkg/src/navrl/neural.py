"""Dense networks for the navigation policies, in plain numpy.

Everything is float64 with hand-written reverse-mode gradients so training
is exactly reproducible and the gradients can be checked against finite
differences.  Parameters live in one flat vector per network; the layer
weights are views into it, which makes optimizer steps, soft target updates
and serialization one-liners.
"""
from __future__ import annotations

import struct

import numpy as np

from .worldsim import InvalidSpec, V_MAX, V_MIN, W_MAX, W_MIN

WIDTH_MIN = 16
WIDTH_MAX = 512

_MAGIC = b"NAVRLNET"
_FORMAT_VERSION = 1
_ROLE_ACTOR = 1
_ROLE_CRITIC = 2


class PolicyFormatError(ValueError):
    """Malformed policy file."""


def _check_widths(widths):
    for w in widths:
        if not (WIDTH_MIN <= int(w) <= WIDTH_MAX) or int(w) != w:
            raise InvalidSpec(
                f"hidden width {w!r} outside [{WIDTH_MIN}, {WIDTH_MAX}]")
    return tuple(int(w) for w in widths)


def _he_scale(fan_in):
    return np.sqrt(2.0 / fan_in)


class _FlatNet:
    """Shared plumbing: flat parameter vector with per-layer views."""

    def __init__(self, layer_dims):
        # layer_dims: list of (n_out, n_in) in forward order
        self._slices = []
        offset = 0
        for n_out, n_in in layer_dims:
            w = slice(offset, offset + n_out * n_in)
            offset += n_out * n_in
            b = slice(offset, offset + n_out)
            offset += n_out
            self._slices.append(((w, (n_out, n_in)), (b, (n_out,))))
        self.params = np.zeros(offset)

    @property
    def n_params(self) -> int:
        return len(self.params)

    def _layer(self, i):
        (ws, wshape), (bs, _) = self._slices[i]
        return self.params[ws].reshape(wshape), self.params[bs]

    def _grad_views(self, grad, i):
        (ws, wshape), (bs, _) = self._slices[i]
        return grad[ws].reshape(wshape), grad[bs]

    def init_params(self, rng, final_scale: float = 3e-3):
        """He initialization; the output layer starts near zero."""
        last = len(self._slices) - 1
        for i in range(len(self._slices)):
            w, b = self._layer(i)
            if i == last:
                w[:] = rng.uniform(-final_scale, final_scale, size=w.shape)
            else:
                w[:] = rng.normal(0.0, _he_scale(w.shape[1]), size=w.shape)
            b[:] = 0.0
        return self

    def set_params(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.params.shape:
            raise InvalidSpec("parameter vector has the wrong length")
        self.params[:] = values
        return self


def _as_batch(x, dim, name):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise InvalidSpec(f"{name} must have {dim} features")
    return x, single


class ActorNet(_FlatNet):
    """Deterministic policy head: observation -> (v, w).

    Three ReLU hidden layers and a tanh output affinely mapped into the
    velocity box, so an all-zero parameter vector drives straight ahead at
    the midpoint speed with no turning.
    """

    def __init__(self, obs_dim: int, hidden=(64, 64, 64),
                 v_bounds=(V_MIN, V_MAX), w_bounds=(W_MIN, W_MAX)):
        if len(hidden) != 3:
            raise InvalidSpec("actor takes exactly three hidden widths")
        hidden = _check_widths(hidden)
        self.obs_dim = int(obs_dim)
        self.hidden = hidden
        self.v_bounds = (float(v_bounds[0]), float(v_bounds[1]))
        self.w_bounds = (float(w_bounds[0]), float(w_bounds[1]))
        dims = []
        n_in = self.obs_dim
        for h in hidden:
            dims.append((h, n_in))
            n_in = h
        dims.append((2, n_in))
        super().__init__(dims)
        self._center = np.array([(self.v_bounds[0] + self.v_bounds[1]) / 2.0,
                                 (self.w_bounds[0] + self.w_bounds[1]) / 2.0])
        self._radius = np.array([(self.v_bounds[1] - self.v_bounds[0]) / 2.0,
                                 (self.w_bounds[1] - self.w_bounds[0]) / 2.0])

    @classmethod
    def create(cls, obs_dim, hidden=(64, 64, 64), seed=0, **kw):
        return cls(obs_dim, hidden, **kw).init_params(
            np.random.default_rng(seed))

    def forward(self, obs, cache: bool = False):
        x, single = _as_batch(obs, self.obs_dim, "observation")
        hs = [x]
        for i in range(3):
            w, b = self._layer(i)
            z = hs[-1] @ w.T + b
            hs.append(np.maximum(z, 0.0))
        w, b = self._layer(3)
        u = np.tanh(hs[-1] @ w.T + b)
        act = self._center + self._radius * u
        if cache:
            return act, (hs, u, single)
        return act[0] if single else act

    def act(self, obs):
        """Single observation to a plain (v, w) tuple."""
        a = self.forward(obs)
        return float(a[0]), float(a[1])

    def backward(self, cache, d_act):
        """Parameter gradient of sum(d_act * action) over the batch."""
        hs, u, single = cache
        d_act = np.asarray(d_act, dtype=float)
        if d_act.ndim == 1:
            d_act = d_act[None, :]
        grad = np.zeros_like(self.params)
        dz = d_act * self._radius * (1.0 - u * u)
        for i in range(3, -1, -1):
            w, _ = self._layer(i)
            gw, gb = self._grad_views(grad, i)
            gw[:] = dz.T @ hs[i]
            gb[:] = dz.sum(axis=0)
            if i > 0:
                dz = (dz @ w) * (hs[i] > 0.0)
        return grad


class CriticNet(_FlatNet):
    """Action-value head: (observation, action) -> scalar.

    The observation passes through two ReLU embedding layers; the action is
    concatenated afterwards and two more ReLU layers plus a linear readout
    produce the value.
    """

    def __init__(self, obs_dim: int, act_dim: int = 2,
                 embed=(64, 64), joint=(64, 64)):
        if len(embed) != 2 or len(joint) != 2:
            raise InvalidSpec("critic takes two embed and two joint widths")
        embed = _check_widths(embed)
        joint = _check_widths(joint)
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.embed = embed
        self.joint = joint
        dims = [(embed[0], self.obs_dim), (embed[1], embed[0]),
                (joint[0], embed[1] + self.act_dim), (joint[1], joint[0]),
                (1, joint[1])]
        super().__init__(dims)

    @classmethod
    def create(cls, obs_dim, act_dim=2, embed=(64, 64), joint=(64, 64),
               seed=0):
        return cls(obs_dim, act_dim, embed, joint).init_params(
            np.random.default_rng(seed))

    def forward(self, obs, act, cache: bool = False):
        x, single = _as_batch(obs, self.obs_dim, "observation")
        a, _ = _as_batch(act, self.act_dim, "action")
        if len(a) != len(x):
            raise InvalidSpec("observation and action batch sizes differ")
        hs = [x]
        for i in range(2):
            w, b = self._layer(i)
            hs.append(np.maximum(hs[-1] @ w.T + b, 0.0))
        c = np.concatenate([hs[-1], a], axis=1)
        hs.append(c)
        for i in range(2, 4):
            w, b = self._layer(i)
            hs.append(np.maximum(hs[-1] @ w.T + b, 0.0))
        w, b = self._layer(4)
        q = (hs[-1] @ w.T + b)[:, 0]
        if cache:
            return q, (hs, single)
        return float(q[0]) if single else q

    def backward(self, cache, d_q):
        """Gradients of sum(d_q * q): (parameter grad, action grad)."""
        hs, single = cache
        d_q = np.atleast_1d(np.asarray(d_q, dtype=float))
        grad = np.zeros_like(self.params)
        dz = d_q[:, None]
        w, _ = self._layer(4)
        gw, gb = self._grad_views(grad, 4)
        gw[:] = dz.T @ hs[5]
        gb[:] = dz.sum(axis=0)
        dh = dz @ w
        for i in (3, 2):
            # joint layer i reads hs[i + 1] and writes hs[i + 2]
            dz = dh * (hs[i + 2] > 0.0)
            w, _ = self._layer(i)
            gw, gb = self._grad_views(grad, i)
            gw[:] = dz.T @ hs[i + 1]
            gb[:] = dz.sum(axis=0)
            dh = dz @ w
        # hs[2] is the concat of the embedding output and the action
        n_embed = self.embed[1]
        d_act = dh[:, n_embed:]
        dh = dh[:, :n_embed]
        for i in (1, 0):
            dz = dh * (hs[i + 1] > 0.0)
            w, _ = self._layer(i)
            gw, gb = self._grad_views(grad, i)
            gw[:] = dz.T @ hs[i]
            gb[:] = dz.sum(axis=0)
            dh = dz @ w
        if single:
            d_act = d_act[0]
        return grad, d_act


class Adam:
    """Textbook Adam with bias correction, acting on a flat vector."""

    def __init__(self, n_params: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def soft_update(target_params, online_params, tau: float):
    """Polyak averaging in place: target <- (1 - tau) target + tau online."""
    target_params *= 1.0 - tau
    target_params += tau * online_params


# --- serialization -----------------------------------------------------------


def _net_dims(net):
    if isinstance(net, ActorNet):
        return _ROLE_ACTOR, [net.obs_dim, *net.hidden, 2], [
            net.v_bounds[0], net.v_bounds[1],
            net.w_bounds[0], net.w_bounds[1]]
    if isinstance(net, CriticNet):
        return _ROLE_CRITIC, [net.obs_dim, net.act_dim,
                              *net.embed, *net.joint], []
    raise InvalidSpec(f"cannot serialize {type(net).__name__}")


def policy_to_bytes(net) -> bytes:
    role, dims, extras = _net_dims(net)
    head = [_MAGIC,
            struct.pack("<II", _FORMAT_VERSION, role),
            struct.pack("<I", len(dims)),
            struct.pack(f"<{len(dims)}I", *dims),
            struct.pack("<I", len(extras)),
            struct.pack(f"<{len(extras)}d", *extras),
            struct.pack("<Q", net.n_params),
            net.params.astype("<f8").tobytes()]
    return b"".join(head)


def policy_from_bytes(blob: bytes):
    view = memoryview(blob)

    def take(n):
        nonlocal view
        if len(view) < n:
            raise PolicyFormatError("truncated policy file")
        out, view = view[:n], view[n:]
        return bytes(out)

    if take(8) != _MAGIC:
        raise PolicyFormatError("bad magic; not a policy file")
    version, role = struct.unpack("<II", take(8))
    if version != _FORMAT_VERSION:
        raise PolicyFormatError(f"unsupported format version {version}")
    (n_dims,) = struct.unpack("<I", take(4))
    dims = struct.unpack(f"<{n_dims}I", take(4 * n_dims))
    (n_extras,) = struct.unpack("<I", take(4))
    extras = struct.unpack(f"<{n_extras}d", take(8 * n_extras))
    (n_params,) = struct.unpack("<Q", take(8))
    params = np.frombuffer(take(8 * n_params), dtype="<f8")
    if len(view):
        raise PolicyFormatError("trailing bytes after parameters")
    if role == _ROLE_ACTOR:
        if n_dims != 5 or dims[4] != 2 or n_extras != 4:
            raise PolicyFormatError("malformed actor header")
        net = ActorNet(dims[0], dims[1:4], v_bounds=extras[0:2],
                       w_bounds=extras[2:4])
    elif role == _ROLE_CRITIC:
        if n_dims != 6 or n_extras != 0:
            raise PolicyFormatError("malformed critic header")
        net = CriticNet(dims[0], dims[1], dims[2:4], dims[4:6])
    else:
        raise PolicyFormatError(f"unknown role tag {role}")
    if net.n_params != n_params:
        raise PolicyFormatError("parameter count does not match shape")
    net.params[:] = params
    return net


def save_policy(net, filename) -> None:
    with open(filename, "wb") as f:
        f.write(policy_to_bytes(net))


def load_policy(filename):
    with open(filename, "rb") as f:
        return policy_from_bytes(f.read())
