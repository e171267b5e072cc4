"""Recurrent generator, one-layer discriminator and their minimax training loop.

Data are standardized per channel as (x - mean) / a, where ``a`` is the
perturbation amplitude, so the generator input noise is U(-1, 1) in model
units. The generator is residual: every output frame is its input frame plus
a learned correction read off the recurrent state. The correction head starts
at zero, so an untrained generator returns its perturbed input unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import NoiseSpec, SampleSet, _rng, mode_slice
from .errors import Divergence

EPS = 1e-7


def _sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


@dataclass
class GanModel:
    # generator
    w_ih: np.ndarray  # (H, D)
    w_hh: np.ndarray  # (H, H)
    b_h: np.ndarray   # (H,)
    w_o: np.ndarray   # (D, H)
    b_o: np.ndarray   # (D,)
    # discriminator over the flattened (M, D) sequence
    d_w: np.ndarray   # (M * D,)
    d_b: float
    # standardization
    mean: np.ndarray  # (D,)
    amplitude: float
    mode: str = "vector"

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[0]

    @property
    def dim(self) -> int:
        return self.w_ih.shape[1]

    @property
    def frames(self) -> int:
        return len(self.d_w) // self.dim

    @classmethod
    def init(cls, frames: int, dim: int, hidden: int, rng, mean=None, amplitude=1.0,
             mode="vector") -> "GanModel":
        s = 1.0 / np.sqrt(hidden)
        sd = 1.0 / np.sqrt(frames * dim)
        return cls(
            w_ih=rng.uniform(-s, s, (hidden, dim)),
            w_hh=rng.uniform(-s, s, (hidden, hidden)),
            b_h=np.zeros(hidden),
            w_o=np.zeros((dim, hidden)),
            b_o=np.zeros(dim),
            d_w=rng.uniform(-sd, sd, frames * dim),
            d_b=0.0,
            mean=np.zeros(dim) if mean is None else np.asarray(mean, dtype=float),
            amplitude=float(amplitude),
            mode=mode,
        )

    def generator_params(self) -> dict:
        return {"w_ih": self.w_ih, "w_hh": self.w_hh, "b_h": self.b_h, "w_o": self.w_o, "b_o": self.b_o}

    # -- generator --------------------------------------------------------
    def generate(self, lam, return_states: bool = False):
        """lam: (B, M, D) standardized input; returns (B, M, D)."""
        lam = np.asarray(lam, dtype=float)
        b, t_len, _ = lam.shape
        h = np.zeros((b, self.hidden))
        hs = []
        for t in range(t_len):
            h = np.tanh(lam[:, t] @ self.w_ih.T + h @ self.w_hh.T + self.b_h)
            hs.append(h)
        hs = np.stack(hs, axis=1)
        out = lam + hs @ self.w_o.T + self.b_o
        return (out, hs) if return_states else out

    def generator_backward(self, lam, hs, d_out) -> dict:
        b, t_len, _ = lam.shape
        g = {k: np.zeros_like(v) for k, v in self.generator_params().items()}
        g["w_o"] = np.einsum("btd,bth->dh", d_out, hs)
        g["b_o"] = d_out.sum(axis=(0, 1))
        dh_next = np.zeros((b, self.hidden))
        for t in reversed(range(t_len)):
            dh = d_out[:, t] @ self.w_o + dh_next
            dpre = dh * (1.0 - hs[:, t] ** 2)
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((b, self.hidden))
            g["w_ih"] += dpre.T @ lam[:, t]
            g["w_hh"] += dpre.T @ h_prev
            g["b_h"] += dpre.sum(axis=0)
            dh_next = dpre @ self.w_hh
        return g

    # -- discriminator ----------------------------------------------------
    def logits(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(len(x), -1) @ self.d_w + self.d_b

    def discriminate(self, x):
        """Clamped D(x) in [EPS, 1 - EPS]."""
        return np.clip(_sigmoid(self.logits(x)), EPS, 1 - EPS)

    # -- data units -------------------------------------------------------
    def standardize(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.amplitude

    def destandardize(self, z):
        return np.asarray(z, dtype=float) * self.amplitude + self.mean


def discriminator_loss(model: GanModel, real, fake) -> float:
    """mean log D(real) + mean log(1 - D(fake)); the discriminator maximizes this."""
    if len(real) == 0 or len(fake) == 0:
        raise ValueError("batches must be non-empty")
    return float(np.mean(np.log(model.discriminate(real))) + np.mean(np.log(1.0 - model.discriminate(fake))))


def generator_loss(model: GanModel, fake) -> float:
    """mean log(1 - D(G(lambda))); the generator minimizes this."""
    if len(fake) == 0:
        raise ValueError("batch must be non-empty")
    return float(np.mean(np.log(1.0 - model.discriminate(fake))))


def _dlog_d(s):
    """d/ds of log(clip(sigmoid(s))); zero where the clamp is active."""
    p = _sigmoid(s)
    return np.where((p > EPS) & (p < 1 - EPS), 1.0 - p, 0.0)


def _dlog_1md(s):
    """d/ds of log(1 - clip(sigmoid(s)))."""
    p = _sigmoid(s)
    return np.where((p > EPS) & (p < 1 - EPS), -p, 0.0)


def discriminator_grad(model: GanModel, real, fake):
    """Gradient of ``discriminator_loss`` with respect to (d_w, d_b)."""
    xr = np.asarray(real, dtype=float).reshape(len(real), -1)
    xf = np.asarray(fake, dtype=float).reshape(len(fake), -1)
    gr = _dlog_d(model.logits(xr)) / len(xr)
    gf = _dlog_1md(model.logits(xf)) / len(xf)
    return gr @ xr + gf @ xf, float(gr.sum() + gf.sum())


def generator_grad(model: GanModel, lam) -> tuple:
    """Loss and gradient of ``generator_loss`` (on G(lam)) for the generator weights."""
    fake, hs = model.generate(lam, return_states=True)
    s = model.logits(fake)
    ds = _dlog_1md(s) / len(fake)
    d_out = (ds[:, None] * model.d_w[None]).reshape(fake.shape)
    return generator_loss(model, fake), model.generator_backward(lam, hs, d_out)


def _draw_lambda(z_seeds, idx, rng):
    """Perturbed standardized seeds: amplitude 1 in model units."""
    base = z_seeds[idx]
    return base + rng.uniform(-1.0, 1.0, size=base.shape)


def gan_train(seeds: SampleSet, spec: NoiseSpec, epochs: int = 5, lr: float = 1e-3,
              rng_seed: int = 0, batch: int = 8, hidden: int = 32, log=None) -> GanModel:
    """Alternate one discriminator ascent step and one generator descent step per batch."""
    if len(seeds) == 0:
        raise ValueError("seed set is empty")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be positive")
    if spec.amplitude <= 0:
        raise ValueError("GAN training needs a positive noise amplitude")
    x = seeds.block(spec.mode)
    n, frames, dim = x.shape
    rng = _rng(rng_seed, 5)
    model = GanModel.init(frames, dim, hidden, rng, x.reshape(-1, dim).mean(axis=0),
                          spec.amplitude, spec.mode)
    z = model.standardize(x)
    for epoch in range(epochs):
        order = rng.permutation(n)
        d_total = g_total = 0.0
        steps = 0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            real = z[idx]
            lam = _draw_lambda(z, rng.integers(0, n, len(idx)), rng)
            fake = model.generate(lam)
            d_loss = discriminator_loss(model, real, fake)
            gw, gb = discriminator_grad(model, real, fake)
            model.d_w = model.d_w + lr * gw
            model.d_b = model.d_b + lr * gb
            g_loss, gg = generator_grad(model, lam)
            for k, v in model.generator_params().items():
                setattr(model, k, v - lr * gg[k])
            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise Divergence(f"non-finite GAN loss in epoch {epoch}")
            d_total += d_loss
            g_total += g_loss
            steps += 1
        if log is not None:
            log(epoch, d_total / steps, g_total / steps)
    return model


def gan_sample(model: GanModel, seeds: SampleSet, spec: NoiseSpec | None = None, n: int = 1,
               rng_seed: int = 0, partner: GanModel | None = None) -> SampleSet:
    """Generate ``n`` labeled sequences from perturbed random seed samples.

    The model's channel block is generated; the remaining channels are copied
    from the seed sample, or generated by ``partner`` (the model of the other
    block) from the same seed sample when given. Generated values are kept
    inside the perturbation envelope: per channel, the seed range widened by
    the noise amplitude.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec is not None and spec.mode != model.mode:
        raise ValueError("noise spec mode does not match the model")
    rng = _rng(rng_seed, 6)
    pick = rng.integers(0, len(seeds), n)
    values = seeds.values[pick].copy()
    for m in (model, partner):
        if m is None:
            continue
        block = seeds.block(m.mode)
        lam = _draw_lambda(m.standardize(block), pick, rng)
        lo = block.min(axis=(0, 1)) - m.amplitude
        hi = block.max(axis=(0, 1)) + m.amplitude
        values[:, :, mode_slice(m.mode)] = np.clip(m.destandardize(m.generate(lam)), lo, hi)
    labels = [seeds.labels[i] for i in pick]
    return SampleSet(labels, values, seeds.confidence[pick].copy(), model.mode, list(range(n)))
