"""Desk-scale hierarchical aggregation encoder with numerical verification hooks.

Two chains share the same block weights: a pruning chain that drops low-scoring
search tokens after selected blocks, and a plain chain that keeps every token
and exposes one feature per level. The pruned feature is padded back to full
shape and mixed with the gated sum of level features:

    F = (1 - rho) * P(H_pruned) + rho * sum_i G(H_level_i) * H_level_i

All arithmetic is double precision and fully deterministic under the seed.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence as Seq, Tuple

import numpy as np


@dataclass(frozen=True)
class EncoderConfig:
    n_blocks: int = 4
    dim: int = 32
    heads: int = 2
    keep_ratio: float = 0.7
    prune_stages: frozenset = frozenset({2, 3})  # 1-based block indices
    rho: float = 0.3
    seed: int = 0
    patch: int = 4
    template_grid: Tuple[int, int] = (4, 4)
    search_grid: Tuple[int, int] = (8, 8)

    def __post_init__(self):
        if not 0.0 < self.keep_ratio <= 1.0:
            raise ValueError(f"keep_ratio must be in (0, 1], got {self.keep_ratio}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must be in [0, 1], got {self.rho}")
        if self.dim % self.heads != 0:
            raise ValueError("dim must be divisible by heads")
        bad = set(self.prune_stages) - set(range(1, self.n_blocks + 1))
        if bad:
            raise ValueError(f"prune stages outside 1..{self.n_blocks}: {sorted(bad)}")

    @property
    def n_template(self) -> int:
        return self.template_grid[0] * self.template_grid[1]

    @property
    def n_search(self) -> int:
        return self.search_grid[0] * self.search_grid[1]


@dataclass
class TokenMap:
    """N x D token matrix laid out as [template tokens | search tokens]."""

    tokens: np.ndarray
    n_template: int

    @property
    def n_search(self) -> int:
        return self.tokens.shape[0] - self.n_template

    @property
    def template(self) -> np.ndarray:
        return self.tokens[: self.n_template]

    @property
    def search(self) -> np.ndarray:
        return self.tokens[self.n_template:]

    def copy(self) -> "TokenMap":
        return TokenMap(self.tokens.copy(), self.n_template)


@dataclass
class BlockWeights:
    norm1_scale: np.ndarray
    norm1_shift: np.ndarray
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    norm2_scale: np.ndarray
    norm2_shift: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    heads: int = 2


@dataclass
class GateParams:
    w: np.ndarray  # D-vector
    b: float


@dataclass
class EncoderParams:
    patch_proj: np.ndarray  # (patch*patch) x D
    patch_bias: np.ndarray  # D
    blocks: List[BlockWeights]
    gates: List[GateParams]


def init_params(cfg: EncoderConfig) -> EncoderParams:
    """Seeded scaled-uniform initialization; reproducible by construction."""
    rng = np.random.default_rng(cfg.seed)
    d = cfg.dim

    def mat(rows, cols, scale=None):
        s = scale if scale is not None else 1.0 / math.sqrt(rows)
        return rng.uniform(-s, s, size=(rows, cols))

    blocks = []
    for _ in range(cfg.n_blocks):
        blocks.append(BlockWeights(
            norm1_scale=np.ones(d),
            norm1_shift=np.zeros(d),
            wq=mat(d, d), wk=mat(d, d), wv=mat(d, d), wo=mat(d, d),
            norm2_scale=np.ones(d),
            norm2_shift=np.zeros(d),
            mlp_w1=mat(d, 4 * d), mlp_b1=np.zeros(4 * d),
            mlp_w2=mat(4 * d, d), mlp_b2=np.zeros(d),
            heads=cfg.heads,
        ))
    gates = [GateParams(w=rng.uniform(-1, 1, size=d), b=float(rng.uniform(-1, 1)))
             for _ in range(cfg.n_blocks)]
    p2 = cfg.patch * cfg.patch
    return EncoderParams(
        patch_proj=mat(p2, d),
        patch_bias=np.zeros(d),
        blocks=blocks,
        gates=gates,
    )


# ---------------------------------------------------------------------------
# Embedding


def _sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d // 2)[None, :]
    angle = pos / np.power(10000.0, 2 * i / d)
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


def _patchify(image: np.ndarray, patch: int) -> np.ndarray:
    h, w = image.shape
    if h % patch or w % patch:
        raise ValueError(f"image {h}x{w} not divisible into {patch}x{patch} patches")
    gh, gw = h // patch, w // patch
    patches = image.reshape(gh, patch, gw, patch).transpose(0, 2, 1, 3)
    return patches.reshape(gh * gw, patch * patch)


def embed(template: np.ndarray, search: np.ndarray, params: EncoderParams,
          cfg: EncoderConfig) -> TokenMap:
    """Project flattened patches to token space and add positional encodings."""
    tp = _patchify(np.asarray(template, dtype=np.float64), cfg.patch)
    sp = _patchify(np.asarray(search, dtype=np.float64), cfg.patch)
    if tp.shape[0] != cfg.n_template or sp.shape[0] != cfg.n_search:
        raise ValueError(
            f"patch grids {tp.shape[0]}/{sp.shape[0]} do not match config "
            f"{cfg.n_template}/{cfg.n_search}"
        )
    tokens = np.concatenate([tp, sp], axis=0) @ params.patch_proj + params.patch_bias
    tokens = tokens + _sinusoidal_positions(tokens.shape[0], cfg.dim)
    return TokenMap(tokens, cfg.n_template)


# ---------------------------------------------------------------------------
# Transformer block


def _layer_norm(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + 1e-12) * scale + shift


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attention(x: np.ndarray, wb: BlockWeights) -> Tuple[np.ndarray, np.ndarray]:
    """Multi-head softmax attention; returns (output, per-head attention h x N x N)."""
    n, d = x.shape
    dh = d // wb.heads
    q = (x @ wb.wq).reshape(n, wb.heads, dh).transpose(1, 0, 2)
    k = (x @ wb.wk).reshape(n, wb.heads, dh).transpose(1, 0, 2)
    v = (x @ wb.wv).reshape(n, wb.heads, dh).transpose(1, 0, 2)
    attn = _softmax(q @ k.transpose(0, 2, 1) / math.sqrt(dh))
    out = (attn @ v).transpose(1, 0, 2).reshape(n, d) @ wb.wo
    return out, attn


def vit_block(x: TokenMap, wb: BlockWeights) -> Tuple[TokenMap, np.ndarray]:
    """Pre-norm transformer block; also returns the attention tensor.

    y = x + Attn(Norm(x)); out = y + MLP(Norm(y)), GELU MLP.
    """
    attn_out, attn = attention(_layer_norm(x.tokens, wb.norm1_scale, wb.norm1_shift), wb)
    y = x.tokens + attn_out
    hidden = _layer_norm(y, wb.norm2_scale, wb.norm2_shift) @ wb.mlp_w1 + wb.mlp_b1
    hidden = 0.5 * hidden * (1.0 + np.tanh(math.sqrt(2 / math.pi) * (hidden + 0.044715 * hidden ** 3)))
    out = y + hidden @ wb.mlp_w2 + wb.mlp_b2
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite values in transformer block output")
    return TokenMap(out, x.n_template), attn


# ---------------------------------------------------------------------------
# Candidate elimination


def elimination_scores(attn: np.ndarray, n_template: int) -> np.ndarray:
    """Per-search-token score: mean attention received from template queries."""
    # attn: heads x N x N, rows are queries
    return attn[:, :n_template, n_template:].mean(axis=(0, 1))


def candidate_eliminate(x: TokenMap, attn: np.ndarray,
                        keep_ratio: float) -> Tuple[TokenMap, np.ndarray]:
    """Keep the top ceil(keep_ratio * n_search) search tokens by template attention.

    Template tokens always survive; ties break toward the smaller original
    index; relative token order is preserved. Returns (pruned map, mask of
    surviving search indices, 0-based, strictly increasing).
    """
    if not 0.0 < keep_ratio <= 1.0:
        raise ValueError(f"keep_ratio must be in (0, 1], got {keep_ratio}")
    ns = x.n_search
    if ns < 1:
        raise ValueError("token map has no search tokens")
    scores = elimination_scores(attn, x.n_template)
    n_keep = math.ceil(keep_ratio * ns)
    order = sorted(range(ns), key=lambda i: (-scores[i], i))
    mask = np.array(sorted(order[:n_keep]), dtype=np.int64)
    pruned = np.concatenate([x.template, x.search[mask]], axis=0)
    return TokenMap(pruned, x.n_template), mask


def ce_chain(h0: TokenMap, params: EncoderParams,
             cfg: EncoderConfig) -> Tuple[TokenMap, np.ndarray]:
    """Pruning chain: block then candidate elimination at each prune stage.

    Returns the final pruned feature and the cumulative surviving-index mask
    in original search-token coordinates.
    """
    x = h0.copy()
    cumulative = np.arange(h0.n_search, dtype=np.int64)
    for i, wb in enumerate(params.blocks, start=1):
        x, attn = vit_block(x, wb)
        if i in cfg.prune_stages:
            x, mask = candidate_eliminate(x, attn, cfg.keep_ratio)
            cumulative = cumulative[mask]
    return x, cumulative


def plain_chain(h0: TokenMap, params: EncoderParams,
                cfg: EncoderConfig) -> List[TokenMap]:
    """Full-resolution chain sharing block weights; one feature per level."""
    levels = []
    x = h0.copy()
    for wb in params.blocks:
        x, _ = vit_block(x, wb)
        levels.append(x)
    return levels


# ---------------------------------------------------------------------------
# Gate, padding, aggregation


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def gate(h: TokenMap, g: GateParams) -> float:
    """Scalar gate: sigmoid of an affine map of the mean-pooled tokens."""
    m = h.tokens.mean(axis=0)
    return _sigmoid(float(g.w @ m) + g.b)


def gate_gradient(h: TokenMap, g: GateParams) -> Tuple[np.ndarray, float]:
    """Analytic (d gate / d w, d gate / d b): G(1-G) * mean-pooled tokens."""
    m = h.tokens.mean(axis=0)
    val = gate(h, g)
    return val * (1.0 - val) * m, val * (1.0 - val)


def pad_restore(pruned: TokenMap, mask: np.ndarray, n_search_target: int,
                fill_value: float = 0.0) -> TokenMap:
    """Scatter surviving search tokens back to original positions, fill the rest.

    fill_value exists only as a fault-injection hook for the verification
    suite; the contract is zero fill.
    """
    if pruned.n_search != len(mask):
        raise ValueError(f"mask length {len(mask)} != pruned search count {pruned.n_search}")
    if len(mask) and (mask.min() < 0 or mask.max() >= n_search_target):
        raise ValueError("mask indices outside target search range")
    d = pruned.tokens.shape[1]
    search = np.full((n_search_target, d), fill_value, dtype=np.float64)
    search[mask] = pruned.search
    return TokenMap(np.concatenate([pruned.template, search], axis=0), pruned.n_template)


def aggregate_hierarchical(restored: TokenMap, levels: Seq[TokenMap],
                           gates: Seq[GateParams], rho: float) -> TokenMap:
    """Mix the restored pruned feature with the gated sum of level features."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    shape = restored.tokens.shape
    acc = np.zeros(shape)
    for lvl, g in zip(levels, gates):
        if lvl.tokens.shape != shape:
            raise ValueError(f"level shape {lvl.tokens.shape} != {shape}")
        acc += gate(lvl, g) * lvl.tokens
    out = (1.0 - rho) * restored.tokens + rho * acc
    return TokenMap(out, restored.n_template)


def encoder_forward(template: np.ndarray, search: np.ndarray,
                    params: EncoderParams, cfg: EncoderConfig,
                    rho: Optional[float] = None,
                    pad_fill: float = 0.0) -> TokenMap:
    """Full pass: embed, both chains, pad-restore, hierarchical aggregation."""
    r = cfg.rho if rho is None else rho
    h0 = embed(template, search, params, cfg)
    pruned, mask = ce_chain(h0, params, cfg)
    levels = plain_chain(h0, params, cfg)
    restored = pad_restore(pruned, mask, h0.n_search, fill_value=pad_fill)
    return aggregate_hierarchical(restored, levels, params.gates, r)


# ---------------------------------------------------------------------------
# Verification suite


def _random_inputs(cfg: EncoderConfig, rng: np.random.Generator):
    th = cfg.template_grid[0] * cfg.patch
    tw = cfg.template_grid[1] * cfg.patch
    sh = cfg.search_grid[0] * cfg.patch
    sw = cfg.search_grid[1] * cfg.patch
    return rng.uniform(0, 1, (th, tw)), rng.uniform(0, 1, (sh, sw))


def run_invariant_checks(seed: int = 0, pad_fill: float = 0.0) -> List[Tuple[str, bool, str]]:
    """Run the seven encoder invariants; returns (name, passed, detail) tuples.

    pad_fill != 0 is the fault-injection hook: it must make the reduction and
    restore checks fail (negative control for the harness itself).
    """
    cfg = EncoderConfig(seed=seed)
    params = init_params(cfg)
    rng = np.random.default_rng(seed + 1)
    results: List[Tuple[str, bool, str]] = []

    template, search = _random_inputs(cfg, rng)
    h0 = embed(template, search, params, cfg)
    pruned, mask = ce_chain(h0, params, cfg)
    levels = plain_chain(h0, params, cfg)
    restored = pad_restore(pruned, mask, h0.n_search, fill_value=pad_fill)

    # 1. rho = 0 reduces to the restored pruned feature
    f0 = encoder_forward(template, search, params, cfg, rho=0.0, pad_fill=pad_fill)
    target = pad_restore(pruned, mask, h0.n_search)  # contract: zero fill
    red = float(np.max(np.abs(f0.tokens - target.tokens)))
    results.append(("rho-zero reduction", red <= 1e-12, f"max abs diff {red:.3e}"))

    # 2. affinity in rho: midpoint identity
    f1 = encoder_forward(template, search, params, cfg, rho=1.0, pad_fill=pad_fill)
    fm = encoder_forward(template, search, params, cfg, rho=0.5, pad_fill=pad_fill)
    aff = float(np.max(np.abs(fm.tokens - 0.5 * (f0.tokens + f1.tokens))))
    results.append(("rho affinity midpoint", aff <= 1e-9, f"max abs residual {aff:.3e}"))

    # 3. gate output strictly in (0, 1)
    gate_ok = all(0.0 < gate(lvl, g) < 1.0 for lvl, g in zip(levels, params.gates))
    results.append(("gate range", gate_ok, "all gate values in (0,1)"))

    # 4. elimination invariants
    elim_ok = True
    detail = "template survival, survivor counts, strictly increasing mask"
    x = h0.copy()
    n_search = h0.n_search
    for i, wb in enumerate(params.blocks, start=1):
        x, attn = vit_block(x, wb)
        if i in cfg.prune_stages:
            x, m = candidate_eliminate(x, attn, cfg.keep_ratio)
            expect = math.ceil(cfg.keep_ratio * n_search)
            if x.n_template != h0.n_template or len(m) != expect:
                elim_ok = False
            if len(m) > 1 and not np.all(np.diff(m) > 0):
                elim_ok = False
            n_search = len(m)
    if not (np.all(np.diff(mask) > 0) if len(mask) > 1 else True):
        elim_ok = False
    results.append(("candidate elimination", elim_ok, detail))

    # 5. attention rows sum to 1
    _, attn = vit_block(h0, params.blocks[0])
    row_err = float(np.max(np.abs(attn.sum(axis=-1) - 1.0)))
    results.append(("attention row sums", row_err <= 1e-12, f"max row error {row_err:.3e}"))

    # 6. gate gradient vs central finite differences
    grad_ok = True
    worst = 0.0
    g_rng = np.random.default_rng(seed + 2)
    for _ in range(100):
        gp = GateParams(w=g_rng.normal(size=cfg.dim), b=float(g_rng.normal()))
        lvl = levels[int(g_rng.integers(len(levels)))]
        grad_w, grad_b = gate_gradient(lvl, gp)
        eps = 1e-5
        j = int(g_rng.integers(cfg.dim))
        wp, wm = gp.w.copy(), gp.w.copy()
        wp[j] += eps
        wm[j] -= eps
        fd_w = (gate(lvl, GateParams(wp, gp.b)) - gate(lvl, GateParams(wm, gp.b))) / (2 * eps)
        fd_b = (gate(lvl, GateParams(gp.w, gp.b + eps)) - gate(lvl, GateParams(gp.w, gp.b - eps))) / (2 * eps)
        for analytic, fd in ((grad_w[j], fd_w), (grad_b, fd_b)):
            denom = max(abs(fd), 1e-12)
            rel = abs(analytic - fd) / denom
            worst = max(worst, rel)
            if rel > 1e-6:
                grad_ok = False
    results.append(("gate gradient", grad_ok, f"worst relative error {worst:.3e}"))

    # 7. rho sensitivity: dF/drho equals gated sum minus restored feature
    analytic = sum(gate(lvl, g) * lvl.tokens for lvl, g in zip(levels, params.gates)) - restored.tokens
    eps = 1e-6
    fd = (encoder_forward(template, search, params, cfg, rho=0.5 + eps, pad_fill=pad_fill).tokens
          - encoder_forward(template, search, params, cfg, rho=0.5 - eps, pad_fill=pad_fill).tokens) / (2 * eps)
    denom = max(float(np.max(np.abs(analytic))), 1e-12)
    sens = float(np.max(np.abs(fd - analytic))) / denom
    results.append(("rho sensitivity", sens <= 1e-6, f"relative residual {sens:.3e}"))

    return results
