"""From-scratch transformer encoder in numpy with explicit backprop.

Post-layernorm blocks (attention -> add&norm -> feed-forward -> add&norm),
learned positional embeddings, bidirectional full attention with an
additive key mask. Every forward returns the caches its backward needs;
gradients are exact and verified against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "TransformerConfig",
    "DetectorModel",
    "SequenceTooLongError",
    "forward_sentence_mode",
    "detect_probs",
    "sm_predict",
    "gelu",
    "sigmoid",
]


class SequenceTooLongError(ValueError):
    pass


@dataclass(frozen=True)
class TransformerConfig:
    n_layers: int = 2
    n_heads: int = 4
    d_model: int = 64
    d_ff: int = 256
    max_positions: int = 64
    dropout: float = 0.0
    mode: str = "sentence"  # "sentence" | "token"
    d_embed: int = 64  # input dim (sentence mode) and SM output dim
    vocab_size: int = 0  # token mode only
    dtype: str = "float32"  # "float32" | "float64"

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must be divisible by n_heads")
        if self.mode not in ("sentence", "token"):
            raise ValueError(f"mode must be 'sentence' or 'token', got {self.mode!r}")
        if self.mode == "token" and self.vocab_size < 5:
            raise ValueError("token mode needs a vocab (>= 5 ids for the specials)")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @staticmethod
    def paper_scale(mode: str = "sentence", vocab_size: int = 0, d_embed: int = 768):
        """BERT-sized preset: 12 layers, 12 heads, hidden size 768."""
        return TransformerConfig(
            n_layers=12,
            n_heads=12,
            d_model=768,
            d_ff=3072,
            max_positions=512,
            dropout=0.1,
            mode=mode,
            d_embed=d_embed,
            vocab_size=vocab_size,
        )

    def to_dict(self) -> dict:
        return asdict(self)


_NEG = -1e9  # additive mask, underflows to exactly zero attention


def gelu(x: np.ndarray) -> np.ndarray:
    # tanh approximation; smooth, so finite-difference checks behave
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * (x + 0.044715 * x**3)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    c = math.sqrt(2.0 / math.pi)
    u = c * (x + 0.044715 * x**3)
    t = np.tanh(u)
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * c * (1.0 + 3 * 0.044715 * x**2)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def _dropout_mask(rng, shape, rate, dtype):
    return (rng.random(shape) >= rate).astype(dtype) / (1.0 - rate)


class DetectorModel:
    """Encoder plus a detection head and a semantic-matching head.

    Parameters live in a flat name -> array dict so the optimizer, the
    checkpoint format, and the finite-difference checker can all walk them
    uniformly.
    """

    def __init__(self, config: TransformerConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self._init_params(seed)

    # -- parameters --------------------------------------------------------

    def _init_params(self, seed: int) -> None:
        cfg = self.config
        rng = np.random.Generator(np.random.PCG64(seed))
        dt = cfg.np_dtype

        def normal(*shape):
            return (rng.standard_normal(shape) * 0.02).astype(dt)

        p = self.params
        if cfg.mode == "sentence":
            p["in_proj.w"] = normal(cfg.d_embed, cfg.d_model)
            p["in_proj.b"] = np.zeros(cfg.d_model, dtype=dt)
        else:
            p["tok_emb"] = normal(cfg.vocab_size, cfg.d_model)
        p["pos_emb"] = normal(cfg.max_positions, cfg.d_model)
        for i in range(cfg.n_layers):
            for name in ("wq", "wk", "wv", "wo"):
                p[f"l{i}.attn.{name}"] = normal(cfg.d_model, cfg.d_model)
            for name in ("bq", "bk", "bv", "bo"):
                p[f"l{i}.attn.{name}"] = np.zeros(cfg.d_model, dtype=dt)
            p[f"l{i}.ln1.g"] = np.ones(cfg.d_model, dtype=dt)
            p[f"l{i}.ln1.b"] = np.zeros(cfg.d_model, dtype=dt)
            p[f"l{i}.ffn.w1"] = normal(cfg.d_model, cfg.d_ff)
            p[f"l{i}.ffn.b1"] = np.zeros(cfg.d_ff, dtype=dt)
            p[f"l{i}.ffn.w2"] = normal(cfg.d_ff, cfg.d_model)
            p[f"l{i}.ffn.b2"] = np.zeros(cfg.d_model, dtype=dt)
            p[f"l{i}.ln2.g"] = np.ones(cfg.d_model, dtype=dt)
            p[f"l{i}.ln2.b"] = np.zeros(cfg.d_model, dtype=dt)
        p["det.w1"] = normal(cfg.d_model, cfg.d_model)
        p["det.b1"] = np.zeros(cfg.d_model, dtype=dt)
        p["det.w2"] = normal(cfg.d_model, 1)
        p["det.b2"] = np.zeros(1, dtype=dt)
        p["sm.w1"] = normal(cfg.d_model, cfg.d_model)
        p["sm.b1"] = np.zeros(cfg.d_model, dtype=dt)
        p["sm.w2"] = normal(cfg.d_model, cfg.d_embed)
        p["sm.b2"] = np.zeros(cfg.d_embed, dtype=dt)

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def astype(self, dtype: str) -> "DetectorModel":
        """Copy with parameters cast to another precision."""
        cfg = TransformerConfig(**{**self.config.to_dict(), "dtype": dtype})
        clone = DetectorModel.__new__(DetectorModel)
        clone.config = cfg
        clone.params = {k: v.astype(cfg.np_dtype) for k, v in self.params.items()}
        return clone

    # -- primitives ---------------------------------------------------------

    def _layernorm(self, x, g, b):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + 1e-5)
        xhat = xc * inv
        return g * xhat + b, (xhat, inv)

    @staticmethod
    def _layernorm_backward(dout, cache, g):
        xhat, inv = cache
        dg = (dout * xhat).sum(axis=tuple(range(dout.ndim - 1)))
        db = dout.sum(axis=tuple(range(dout.ndim - 1)))
        dxhat = dout * g
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, dg, db

    def _attention(self, h, key_bias, i, train_rng):
        cfg = self.config
        p = self.params
        q = h @ p[f"l{i}.attn.wq"] + p[f"l{i}.attn.bq"]
        k = h @ p[f"l{i}.attn.wk"] + p[f"l{i}.attn.bk"]
        v = h @ p[f"l{i}.attn.wv"] + p[f"l{i}.attn.bv"]
        qh = _split_heads(q, cfg.n_heads)
        kh = _split_heads(k, cfg.n_heads)
        vh = _split_heads(v, cfg.n_heads)
        scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
        scores = qh @ kh.transpose(0, 1, 3, 2) * scale + key_bias
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        att = e / e.sum(axis=-1, keepdims=True)
        if train_rng is not None and cfg.dropout > 0.0:
            att_mask = _dropout_mask(train_rng, att.shape, cfg.dropout, att.dtype)
            att_used = att * att_mask
        else:
            att_mask = None
            att_used = att
        ctx = _merge_heads(att_used @ vh)
        out = ctx @ p[f"l{i}.attn.wo"] + p[f"l{i}.attn.bo"]
        cache = (h, qh, kh, vh, att, att_mask, ctx, scale)
        return out, att, cache

    def _attention_backward(self, dout, cache, i, grads):
        cfg = self.config
        p = self.params
        h, qh, kh, vh, att, att_mask, ctx, scale = cache
        grads[f"l{i}.attn.wo"] += np.einsum("btd,bte->de", ctx, dout)
        grads[f"l{i}.attn.bo"] += dout.sum(axis=(0, 1))
        dctx = _split_heads(dout @ p[f"l{i}.attn.wo"].T, cfg.n_heads)
        att_used = att * att_mask if att_mask is not None else att
        datt_used = dctx @ vh.transpose(0, 1, 3, 2)
        dvh = att_used.transpose(0, 1, 3, 2) @ dctx
        datt = datt_used * att_mask if att_mask is not None else datt_used
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True))
        dqh = dscores @ kh * scale
        dkh = dscores.transpose(0, 1, 3, 2) @ qh * scale
        dq = _merge_heads(dqh)
        dk = _merge_heads(dkh)
        dv = _merge_heads(dvh)
        grads[f"l{i}.attn.wq"] += np.einsum("btd,bte->de", h, dq)
        grads[f"l{i}.attn.bq"] += dq.sum(axis=(0, 1))
        grads[f"l{i}.attn.wk"] += np.einsum("btd,bte->de", h, dk)
        grads[f"l{i}.attn.bk"] += dk.sum(axis=(0, 1))
        grads[f"l{i}.attn.wv"] += np.einsum("btd,bte->de", h, dv)
        grads[f"l{i}.attn.bv"] += dv.sum(axis=(0, 1))
        dh = dq @ p[f"l{i}.attn.wq"].T + dk @ p[f"l{i}.attn.wk"].T + dv @ p[f"l{i}.attn.wv"].T
        return dh

    # -- encoder ------------------------------------------------------------

    def forward(self, x: np.ndarray, mask: np.ndarray, train_rng=None):
        """Run the encoder.

        x: (B, T, d_embed) floats in sentence mode, (B, T) int ids in token
        mode. mask: (B, T) with 1.0 at real positions. Returns (s, cache)
        where s is (B, T, d_model). Eval mode (train_rng=None) is
        deterministic.
        """
        cfg = self.config
        p = self.params
        t = x.shape[1]
        if t > cfg.max_positions:
            raise SequenceTooLongError(f"sequence length {t} > max_positions {cfg.max_positions}")
        mask = np.asarray(mask, dtype=cfg.np_dtype)
        if cfg.mode == "sentence":
            x = np.asarray(x, dtype=cfg.np_dtype)
            h = x @ p["in_proj.w"] + p["in_proj.b"]
        else:
            x = np.asarray(x)
            h = p["tok_emb"][x]
        h = h + p["pos_emb"][:t]
        key_bias = ((1.0 - mask) * _NEG).astype(cfg.np_dtype)[:, None, None, :]
        layer_caches = []
        attn_probs = []
        for i in range(cfg.n_layers):
            attn_out, att, attn_cache = self._attention(h, key_bias, i, train_rng)
            if train_rng is not None and cfg.dropout > 0.0:
                m1 = _dropout_mask(train_rng, attn_out.shape, cfg.dropout, attn_out.dtype)
                attn_out = attn_out * m1
            else:
                m1 = None
            r1 = h + attn_out
            h1, ln1_cache = self._layernorm(r1, p[f"l{i}.ln1.g"], p[f"l{i}.ln1.b"])
            a1 = h1 @ p[f"l{i}.ffn.w1"] + p[f"l{i}.ffn.b1"]
            g1 = gelu(a1)
            ffn_out = g1 @ p[f"l{i}.ffn.w2"] + p[f"l{i}.ffn.b2"]
            if train_rng is not None and cfg.dropout > 0.0:
                m2 = _dropout_mask(train_rng, ffn_out.shape, cfg.dropout, ffn_out.dtype)
                ffn_out = ffn_out * m2
            else:
                m2 = None
            r2 = h1 + ffn_out
            h2, ln2_cache = self._layernorm(r2, p[f"l{i}.ln2.g"], p[f"l{i}.ln2.b"])
            layer_caches.append((attn_cache, m1, ln1_cache, h1, a1, g1, m2, ln2_cache))
            attn_probs.append(att)
            h = h2
        cache = {"x": x, "t": t, "layers": layer_caches, "attn_probs": attn_probs}
        return h, cache

    def backward(self, ds: np.ndarray, cache, grads=None) -> dict[str, np.ndarray]:
        """Backprop d(loss)/d(s) through the encoder; returns grads by name."""
        cfg = self.config
        p = self.params
        if grads is None:
            grads = self.zero_grads()
        dh = ds
        for i in reversed(range(cfg.n_layers)):
            attn_cache, m1, ln1_cache, h1, a1, g1, m2, ln2_cache = cache["layers"][i]
            dr2, dg_, db_ = self._layernorm_backward(dh, ln2_cache, p[f"l{i}.ln2.g"])
            grads[f"l{i}.ln2.g"] += dg_
            grads[f"l{i}.ln2.b"] += db_
            dffn_out = dr2 * m2 if m2 is not None else dr2
            grads[f"l{i}.ffn.w2"] += np.einsum("btf,btd->fd", g1, dffn_out)
            grads[f"l{i}.ffn.b2"] += dffn_out.sum(axis=(0, 1))
            dg1 = dffn_out @ p[f"l{i}.ffn.w2"].T
            da1 = dg1 * gelu_grad(a1)
            grads[f"l{i}.ffn.w1"] += np.einsum("btd,btf->df", h1, da1)
            grads[f"l{i}.ffn.b1"] += da1.sum(axis=(0, 1))
            dh1 = dr2 + da1 @ p[f"l{i}.ffn.w1"].T
            dr1, dg_, db_ = self._layernorm_backward(dh1, ln1_cache, p[f"l{i}.ln1.g"])
            grads[f"l{i}.ln1.g"] += dg_
            grads[f"l{i}.ln1.b"] += db_
            dattn_out = dr1 * m1 if m1 is not None else dr1
            dh = dr1 + self._attention_backward(dattn_out, attn_cache, i, grads)
        t = cache["t"]
        grads["pos_emb"][:t] += dh.sum(axis=0)
        if cfg.mode == "sentence":
            grads["in_proj.w"] += np.einsum("bte,btd->ed", cache["x"], dh)
            grads["in_proj.b"] += dh.sum(axis=(0, 1))
        else:
            np.add.at(grads["tok_emb"], cache["x"], dh)
        return grads

    # -- heads ---------------------------------------------------------------

    def _head_forward(self, s, prefix):
        p = self.params
        a = s @ p[f"{prefix}.w1"] + p[f"{prefix}.b1"]
        hid = gelu(a)
        out = hid @ p[f"{prefix}.w2"] + p[f"{prefix}.b2"]
        return out, (s, a, hid)

    def _head_backward(self, dout, cache, prefix, grads):
        p = self.params
        s, a, hid = cache
        grads[f"{prefix}.w2"] += np.einsum("bth,btk->hk", hid, dout)
        grads[f"{prefix}.b2"] += dout.sum(axis=(0, 1))
        dhid = dout @ p[f"{prefix}.w2"].T
        da = dhid * gelu_grad(a)
        grads[f"{prefix}.w1"] += np.einsum("btd,bth->dh", s, da)
        grads[f"{prefix}.b1"] += da.sum(axis=(0, 1))
        return da @ p[f"{prefix}.w1"].T

    def detect_logits(self, s):
        out, cache = self._head_forward(s, "det")
        return out[..., 0], cache

    def detect_logits_backward(self, dz, cache, grads):
        return self._head_backward(dz[..., None], cache, "det", grads)

    def sm_forward(self, s):
        return self._head_forward(s, "sm")

    def sm_backward(self, dh_hat, cache, grads):
        return self._head_backward(dh_hat, cache, "sm", grads)


def forward_sentence_mode(model: DetectorModel, embeddings: np.ndarray, mask=None):
    """Contextualize a single sequence of sentence embeddings (N, d_embed);
    returns the per-position vectors (N, d_model)."""
    if model.config.mode != "sentence":
        raise ValueError("model is not in sentence mode")
    h = np.asarray(embeddings)[None, :, :]
    if mask is None:
        mask = np.ones((1, h.shape[1]))
    s, _ = model.forward(h, mask)
    return s[0]


def detect_probs(model: DetectorModel, s: np.ndarray) -> np.ndarray:
    """Per-position detection probabilities sigmoid(MLP_d(s)). Positions are
    conditionally independent given s: the head applies position-wise."""
    single = s.ndim == 2
    if single:
        s = s[None]
    z, _ = model.detect_logits(s)
    p = sigmoid(z)
    return p[0] if single else p


def sm_predict(model: DetectorModel, s: np.ndarray) -> np.ndarray:
    """Predicted embedding of the hidden sentence at each position (not
    normalized; the cosine objective handles scale)."""
    single = s.ndim == 2
    if single:
        s = s[None]
    out, _ = model.sm_forward(s)
    return out[0] if single else out
