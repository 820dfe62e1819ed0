"""Learnable operator network mapping (x, encoded parameters) -> x.

Architecture: a shared 2-layer ReLU trunk over concat(x, z) with hidden sizes
[256, 128], followed by 3 residual coupling blocks. Each block is a 3-layer
ReLU net (hidden [128, 128, 128]) over concat(trunk feature, current state)
with two linear heads: a scale passed through HardTanh into [-2, 2] and a
shift. The state update is y <- hardtanh(s_raw) * y + t. Coupling heads are
initialized so the whole operator starts as the identity map.
"""

import numpy as np

from . import autodiff as ad

TRUNK_SIZES = (256, 128)
BLOCK_SIZES = (128, 128, 128)
N_BLOCKS = 3


class EncoderSpec:
    """Parameter encoder. Only the identity encoder is supported here."""

    def __init__(self, kind="identity", input_dim=0):
        if kind != "identity":
            raise ValueError("unsupported encoder kind: %r" % (kind,))
        self.kind = kind
        self.input_dim = input_dim
        self.output_dim = input_dim

    def encode(self, tau):
        tau = np.atleast_2d(np.asarray(tau, dtype=np.float64))
        if tau.shape[-1] != self.input_dim:
            raise ValueError("encoder expected dimension %d, got %d"
                             % (self.input_dim, tau.shape[-1]))
        return tau


class OperatorNet:
    """The learnable operator with residual multiplicative/additive coupling."""

    def __init__(self, d, r, encoder_kind="identity", rng=None):
        self.d = d
        self.r = r
        self.encoder = EncoderSpec(encoder_kind, r)
        self.params = ad.ParamStore()
        rng = rng if rng is not None else np.random.default_rng(0)

        def dense(name, fan_in, fan_out):
            w = rng.normal(0.0, np.sqrt(2.0 / max(fan_in, 1)), (fan_in, fan_out))
            self.params.add(name + ".W", w)
            self.params.add(name + ".b", np.zeros(fan_out))

        dense("trunk.0", d + r, TRUNK_SIZES[0])
        dense("trunk.1", TRUNK_SIZES[0], TRUNK_SIZES[1])
        for i in range(N_BLOCKS):
            sizes = (TRUNK_SIZES[1] + d,) + BLOCK_SIZES
            for j in range(len(BLOCK_SIZES)):
                dense("block%d.%d" % (i, j), sizes[j], sizes[j + 1])
            # Coupling heads start at the identity map (scale 1, shift 0):
            # zero head weights with a unit scale bias give Phi(x) = x, so
            # iterating the freshly initialized operator keeps points spread
            # over the domain instead of collapsing them to one spot.
            self.params.add("block%d.scale.W" % i,
                            np.zeros((BLOCK_SIZES[-1], d)))
            self.params.add("block%d.scale.b" % i, np.ones(d))
            self.params.add("block%d.shift.W" % i,
                            np.zeros((BLOCK_SIZES[-1], d)))
            self.params.add("block%d.shift.b" % i, np.zeros(d))

    def descriptor(self):
        return ("opnet d=%d r=%d encoder=%s trunk=%s blocks=%dx%s"
                % (self.d, self.r, self.encoder.kind,
                   ",".join(map(str, TRUNK_SIZES)), N_BLOCKS,
                   ",".join(map(str, BLOCK_SIZES))))

    def _affine(self, x, name):
        return ad.forward_affine(x, self.params[name + ".W"],
                                 self.params[name + ".b"])

    def apply(self, x, z):
        """Graph-recording forward pass; differentiable in params and x."""
        x = ad.as_tensor(x)
        z = ad.as_tensor(z)
        inp = ad.concat([x, z], axis=1) if self.r > 0 else x
        h = ad.relu(self._affine(inp, "trunk.0"))
        h = ad.relu(self._affine(h, "trunk.1"))
        y = x
        for i in range(N_BLOCKS):
            a = ad.concat([h, y], axis=1)
            for j in range(len(BLOCK_SIZES)):
                a = ad.relu(self._affine(a, "block%d.%d" % (i, j)))
            s = ad.hardtanh(self._affine(a, "block%d.scale" % i))
            t = self._affine(a, "block%d.shift" % i)
            y = ad.add(ad.mul(s, y), t)
        if not np.all(np.isfinite(y.value)):
            raise FloatingPointError("operator produced non-finite output")
        return y

    def forward(self, x, z):
        """Plain-numpy forward pass, no graph. Used for inference/sampling."""
        x = np.asarray(x, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        p = self.params
        inp = np.concatenate([x, z], axis=1) if self.r > 0 else x

        def aff(v, name):
            return v @ p[name + ".W"].value + p[name + ".b"].value

        h = np.maximum(aff(inp, "trunk.0"), 0.0)
        h = np.maximum(aff(h, "trunk.1"), 0.0)
        y = x
        for i in range(N_BLOCKS):
            a = np.concatenate([h, y], axis=1)
            for j in range(len(BLOCK_SIZES)):
                a = np.maximum(aff(a, "block%d.%d" % (i, j)), 0.0)
            s = np.clip(aff(a, "block%d.scale" % i),
                        -ad.HARDTANH_BOUND, ad.HARDTANH_BOUND)
            t = aff(a, "block%d.shift" % i)
            y = s * y + t
        return y

    def iterate(self, x0, z, k, project=None):
        """Apply the operator k times (k=0 returns x0 unchanged)."""
        if k < 0:
            raise ValueError("iteration count must be >= 0")
        x = np.asarray(x0, dtype=np.float64)
        for _ in range(k):
            x = self.forward(x, z)
            if project is not None:
                x = project(x)
        return x

    def save(self, path):
        ad.save_checkpoint(path, self.descriptor(), self.params)


def load_network(path):
    descriptor, flat = ad.load_checkpoint(path)
    fields = dict(tok.split("=", 1) for tok in descriptor.split()[1:])
    net = OperatorNet(int(fields["d"]), int(fields["r"]),
                      encoder_kind=fields["encoder"])
    if net.descriptor() != descriptor:
        raise ValueError("unsupported architecture descriptor: %r" % descriptor)
    net.params.unflatten(flat)
    return net
