"""End-to-end per-sentence computation: embed, encode, fuse, score, decode.

Parameter names in the store:

    char_emb                     (V_c, d_c)   absent in precomputed-vector mode
    gru_fwd.W_z ... gru_bwd.b_h  recurrent gates, both directions
    fusion.W_u, fusion.b_u       word projection
    word_emb                     (V_w, d_w)
    crf.W_o, crf.b_o, crf.T      emission projection and transitions
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import crf, encoder, fusion
from .corpus import uniform_bound
from .errors import DataError, ShapeError
from .lexicon import Lexicon, knowledge_select, match_sentence
from .numerics import check_finite, dropout, dropout_backward
from .params import GradBuffer, ParamStore

UNK = "<unk>"


@dataclass
class ModelConfig:
    """Dimensions and behavior switches needed to run the graph."""

    d_c: int = 64
    d_h: int = 256            # per direction; the paired size is 2*d_h
    d_w: int = 50
    num_tags: int = 0
    dropout: float = 0.1
    fusion_strategy: str = "global_attention"
    g_mode: str = "last"
    char_source: str = "table"   # "table" or "file"
    precision: str = "float64"   # "float32" trades gradient-check headroom for speed

    @property
    def dtype(self):
        return np.dtype(self.precision)


@dataclass
class SentenceInputs:
    """One sentence, ready for the graph."""

    sid: str
    char_ids: np.ndarray
    word_ids: tuple[tuple[int, ...], ...]
    word_lens: tuple[tuple[int, ...], ...]
    gold: np.ndarray | None = None
    char_vectors: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.char_ids)


def init_params(cfg: ModelConfig, char_vocab_size: int, word_init: np.ndarray,
                rng: np.random.Generator) -> ParamStore:
    """Fresh parameters; embeddings and weights use the uniform +-sqrt(3/fan) rule."""
    store = ParamStore()

    def add(name, arr):
        # np.array copies, so the store never aliases caller-owned buffers
        store.add(name, np.array(arr, dtype=cfg.dtype))

    if cfg.char_source == "table":
        b = uniform_bound(cfg.d_c)
        add("char_emb", rng.uniform(-b, b, (char_vocab_size, cfg.d_c)))
    for direction in ("fwd", "bwd"):
        for name, arr in encoder.init_gru_gates(cfg.d_c, cfg.d_h, rng).items():
            add(f"gru_{direction}.{name}", arr)
    two_dh = 2 * cfg.d_h
    add("fusion.W_u", rng.uniform(-1, 1, (two_dh, cfg.d_w)) * np.sqrt(3.0 / cfg.d_w))
    add("fusion.b_u", np.zeros(two_dh))
    word_init = np.asarray(word_init)
    if word_init.ndim != 2 or word_init.shape[1] != cfg.d_w:
        raise ShapeError(f"word embedding matrix {word_init.shape} does not match d_w={cfg.d_w}")
    add("word_emb", word_init)
    r_dim = cfg.d_w + two_dh
    add("crf.W_o", rng.uniform(-1, 1, (cfg.num_tags, r_dim)) * np.sqrt(3.0 / r_dim))
    add("crf.b_o", np.zeros(cfg.num_tags))
    add("crf.T", crf.init_transitions(cfg.num_tags))
    return store


def prepare_sentence(sentence, lexicon: Lexicon, char_vocab: dict[str, int],
                     knowledge_mode: str,
                     char_vectors: np.ndarray | None = None) -> SentenceInputs:
    """Resolve characters to ids and lexicon matches to per-position word sets."""
    sets = knowledge_select(match_sentence(lexicon, sentence), knowledge_mode)
    lens = tuple(tuple(len(lexicon.words[w]) for w in s) for s in sets)
    char_ids = np.array([char_vocab.get(c, char_vocab[UNK]) for c in sentence.chars],
                        dtype=np.int64)
    gold = np.array(sentence.tags, dtype=np.int64) if sentence.tags is not None else None
    return SentenceInputs(sentence.id, char_ids, sets, lens, gold, char_vectors)


def _char_rows(store: ParamStore, inputs: SentenceInputs, cfg: ModelConfig) -> np.ndarray:
    if cfg.char_source == "file":
        if inputs.char_vectors is None:
            raise DataError(f"sentence {inputs.sid!r}: no precomputed character vectors")
        X = np.asarray(inputs.char_vectors, dtype=cfg.dtype)
        if X.shape != (len(inputs), cfg.d_c):
            raise DataError(
                f"sentence {inputs.sid!r}: character vectors {X.shape} != ({len(inputs)}, {cfg.d_c})"
            )
        return X
    return store.value("char_emb")[inputs.char_ids]


def _forward(store: ParamStore, inputs: SentenceInputs, cfg: ModelConfig,
             train: bool, rng: np.random.Generator | None):
    X = _char_rows(store, inputs, cfg)
    fwd_gates = store.values_with_prefix("gru_fwd.")
    bwd_gates = store.values_with_prefix("gru_bwd.")
    H_raw, enc_cache = encoder.encode_chars(X, fwd_gates, bwd_gates)
    H, mask_h = dropout(H_raw, cfg.dropout, train, rng)
    g = encoder.global_feature(H, cfg.d_h, cfg.g_mode)

    word_emb = store.value("word_emb")
    W_u, b_u = store.value("fusion.W_u"), store.value("fusion.b_u")
    n = len(inputs)
    Hsw_raw = np.zeros((n, cfg.d_w), dtype=cfg.dtype)
    fuse_caches = []
    for i in range(n):
        Hsw_raw[i], cache = fusion.fuse_position(
            inputs.word_ids[i], inputs.word_lens[i], word_emb, g, W_u, b_u,
            cfg.fusion_strategy,
        )
        fuse_caches.append(cache)
    Hsw, mask_sw = dropout(Hsw_raw, cfg.dropout, train, rng)

    R = np.hstack([Hsw, H])
    O = crf.emissions(R, store.value("crf.W_o"), store.value("crf.b_o"))
    check_finite("emissions", O)
    # the CRF always runs in float64 log space, whatever the training precision
    lattice = crf.TagLattice(O, np.asarray(store.value("crf.T"), dtype=np.float64))
    fwd_cache = (X, enc_cache, mask_h, fuse_caches, mask_sw, R)
    return lattice, fwd_cache


def sentence_loss(store: ParamStore, inputs: SentenceInputs, cfg: ModelConfig,
                  train: bool = True, rng: np.random.Generator | None = None):
    """NLL of the gold tags plus a filled per-sentence gradient buffer."""
    if inputs.gold is None:
        raise DataError(f"sentence {inputs.sid!r} has no gold tags")
    lattice, fwd_cache = _forward(store, inputs, cfg, train, rng)
    loss, dO, dT = crf.nll(lattice, inputs.gold)

    X, enc_cache, mask_h, fuse_caches, mask_sw, R = fwd_cache
    grads = GradBuffer(store)
    grads.get("crf.T")[...] += dT
    dR, dW_o, db_o = crf.emissions_backward(dO, R, store.value("crf.W_o"))
    grads.get("crf.W_o")[...] += dW_o
    grads.get("crf.b_o")[...] += db_o

    dHsw = dR[:, :cfg.d_w]
    dH = dR[:, cfg.d_w:].copy()
    dHsw_raw = dropout_backward(dHsw, mask_sw)

    W_u = store.value("fusion.W_u")
    word_emb_grad = grads.get("word_emb")
    W_u_grad = grads.get("fusion.W_u")
    b_u_grad = grads.get("fusion.b_u")
    dg = np.zeros(2 * cfg.d_h)
    for i in range(len(inputs)):
        dg += fusion.fuse_backward(dHsw_raw[i], fuse_caches[i], W_u,
                                   word_emb_grad, W_u_grad, b_u_grad)
    encoder.global_feature_backward(dg, dH, cfg.d_h, cfg.g_mode)

    dH_raw = dropout_backward(dH, mask_h)
    fwd_gates = store.values_with_prefix("gru_fwd.")
    bwd_gates = store.values_with_prefix("gru_bwd.")
    fwd_grads = {name: grads.get(f"gru_fwd.{name}") for name in encoder.GATE_NAMES}
    bwd_grads = {name: grads.get(f"gru_bwd.{name}") for name in encoder.GATE_NAMES}
    dX = encoder.encode_backward(dH_raw, enc_cache, fwd_gates, bwd_gates,
                                 fwd_grads, bwd_grads)
    if cfg.char_source == "table":
        np.add.at(grads.get("char_emb"), inputs.char_ids, dX)
    return loss, grads


def decode_sentence(store: ParamStore, inputs: SentenceInputs, cfg: ModelConfig,
                    legal: np.ndarray | None = None) -> list[int]:
    """Viterbi tag indices for one sentence (eval mode, no dropout)."""
    lattice, _ = _forward(store, inputs, cfg, train=False, rng=None)
    path, _ = crf.viterbi(lattice, legal)
    return path


def attention_profile(store: ParamStore, inputs: SentenceInputs, cfg: ModelConfig):
    """Per-position mixing weights for inspection: list of (word_ids, alphas)."""
    X = _char_rows(store, inputs, cfg)
    fwd_gates = store.values_with_prefix("gru_fwd.")
    bwd_gates = store.values_with_prefix("gru_bwd.")
    H, _ = encoder.encode_chars(X, fwd_gates, bwd_gates)
    g = encoder.global_feature(H, cfg.d_h, cfg.g_mode)
    word_emb = store.value("word_emb")
    W_u, b_u = store.value("fusion.W_u"), store.value("fusion.b_u")
    out = []
    for i in range(len(inputs)):
        _, cache = fusion.fuse_position(
            inputs.word_ids[i], inputs.word_lens[i], word_emb, g, W_u, b_u,
            cfg.fusion_strategy,
        )
        out.append((inputs.word_ids[i], fusion.fuse_alphas(cache)))
    return out
