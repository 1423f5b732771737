"""Siamese binary Tree-LSTM with distance and first-transformation heads.

One shared Tree-LSTM parameter set embeds both expressions bottom-up; the
L1 distance between root hidden states estimates the rewrite distance, and
a ReLU stack over the concatenated embeddings scores the 8 transformations.
Batched embedding emulates the recursion with a value stack and a pointer
stack over post-order (value, arity) sequences, in lockstep across lanes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .expr import INPUT_DIM, NODE_CODES, encode_postorder


class FormatError(Exception):
    pass


class VersionMismatchError(FormatError):
    pass


MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = INPUT_DIM
    branching: int = 2
    memory_dim: int = 32
    hidden_sizes: tuple = (128, 64, 32)
    num_classes: int = 8

    def __post_init__(self):
        if self.input_dim != INPUT_DIM or self.branching != 2:
            raise ValueError("input_dim is fixed at 6 and branching at 2")
        if self.num_classes != 8:
            raise ValueError("num_classes is fixed at 8")


LSTM_GATES = ('i', 'o', 'u', 'f')


def init_params(cfg: ModelConfig, seed=0) -> dict:
    """Uniform [-1/sqrt(M), 1/sqrt(M)] weights, zero biases."""
    rng = np.random.default_rng(seed)
    m = cfg.memory_dim
    bound = 1.0 / np.sqrt(m)

    def weight(*shape):
        return ad.param(rng.uniform(-bound, bound, size=shape))

    params = {}
    for g in LSTM_GATES:
        params[f"W_{g}"] = weight(cfg.input_dim, m)
        params[f"b_{g}"] = ad.param(np.zeros(m))
    for g in ('i', 'o', 'u'):
        for l in (1, 2):
            params[f"U_{g}_{l}"] = weight(m, m)
    for k in (1, 2):
        for l in (1, 2):
            params[f"U_f_{k}{l}"] = weight(m, m)
    dims = (2 * m,) + cfg.hidden_sizes + (cfg.num_classes,)
    for i in range(len(dims) - 1):
        params[f"C_W{i}"] = weight(dims[i], dims[i + 1])
        params[f"C_b{i}"] = ad.param(np.zeros(dims[i + 1]))
    return params


def zero_params(cfg: ModelConfig) -> dict:
    params = init_params(cfg, seed=0)
    for p in params.values():
        p.data[...] = 0.0
    return params


@dataclass
class Model:
    cfg: ModelConfig
    params: dict = None
    seed: int = 0

    def __post_init__(self):
        if self.params is None:
            self.params = init_params(self.cfg, self.seed)

    def param_list(self):
        return ad.collect_params(self.params)


def tree_lstm_unit(params, x, h1, c1, h2, c2):
    """The binary Tree-LSTM cell; absent children pass zero states.

    All arguments are Tensors shaped (B, dim) (or (dim,) for a single
    node). Returns (c, h).
    """
    def gate(g, u_rows):
        s = ad.matmul(x, params[f"W_{g}"])
        s = ad.add(s, ad.matmul(h1, params[u_rows[0]]))
        s = ad.add(s, ad.matmul(h2, params[u_rows[1]]))
        return ad.add(s, params[f"b_{g}"])

    i = ad.sigmoid(gate('i', ("U_i_1", "U_i_2")))
    o = ad.sigmoid(gate('o', ("U_o_1", "U_o_2")))
    u = ad.tanh(gate('u', ("U_u_1", "U_u_2")))
    f1 = ad.sigmoid(gate('f', ("U_f_11", "U_f_12")))
    f2 = ad.sigmoid(gate('f', ("U_f_21", "U_f_22")))
    c = ad.add(ad.add(ad.mul(i, u), ad.mul(f1, c1)), ad.mul(f2, c2))
    h = ad.mul(o, ad.tanh(c))
    return c, h


def _one_hot(code, dim):
    v = np.zeros(dim)
    v[code] = 1.0
    return v


def embed(e, model: Model):
    """Serial bottom-up embedding; returns the root hidden state Tensor."""
    cfg = model.cfg
    zero = ad.constant(np.zeros(cfg.memory_dim))

    def fold(node):
        if isinstance(node, str):
            x = ad.constant(_one_hot(NODE_CODES[node], cfg.input_dim))
            return tree_lstm_unit(model.params, x, zero, zero, zero, zero)
        if node[0] == 'F':
            c1, h1 = fold(node[1])
            x = ad.constant(_one_hot(NODE_CODES['F'], cfg.input_dim))
            return tree_lstm_unit(model.params, x, h1, c1, zero, zero)
        cl, hl = fold(node[1])
        cr, hr = fold(node[2])
        x = ad.constant(_one_hot(NODE_CODES[node[0]], cfg.input_dim))
        return tree_lstm_unit(model.params, x, hl, cl, hr, cr)

    _, h = fold(e)
    return h


def batch_embed(exprs, model: Model):
    """Two-stack recurrent emulation across a batch; returns a (B, M) Tensor.

    Shorter post-order sequences are padded at the front with inert
    arity-0 steps whose stack pushes are discarded, so every lane finishes
    its root on the final step.
    """
    if not exprs:
        raise ValueError("batch_embed requires a nonempty batch")
    cfg = model.cfg
    batch = len(exprs)
    seqs = [encode_postorder(e) for e in exprs]
    max_len = max(len(s) for s in seqs)
    pads = [max_len - len(s) for s in seqs]

    pointer_stacks = [[] for _ in range(batch)]
    h_steps = []
    c_steps = []
    for step in range(max_len):
        x = np.zeros((batch, cfg.input_dim))
        child_spec = ([-1] * batch, [-1] * batch)
        arities = []
        for b, seq in enumerate(seqs):
            k = step - pads[b]
            if k < 0:
                arities.append(None)  # front padding; push discarded
                continue
            x[b, seq.values[k]] = 1.0
            arity = seq.arities[k]
            arities.append(arity)
            stack = pointer_stacks[b]
            # top of the pointer stack is the rightmost child
            if arity == 1:
                child_spec[0][b] = stack.pop()
            elif arity == 2:
                child_spec[1][b] = stack.pop()
                child_spec[0][b] = stack.pop()
        h1 = ad.gather_rows(h_steps, child_spec[0], cfg.memory_dim)
        c1 = ad.gather_rows(c_steps, child_spec[0], cfg.memory_dim)
        h2 = ad.gather_rows(h_steps, child_spec[1], cfg.memory_dim)
        c2 = ad.gather_rows(c_steps, child_spec[1], cfg.memory_dim)
        c, h = tree_lstm_unit(model.params, ad.constant(x), h1, c1, h2, c2)
        h_steps.append(h)
        c_steps.append(c)
        for b in range(batch):
            if arities[b] is not None:
                pointer_stacks[b].append(step)
    return h_steps[-1]


def classify(h_source, h_target, model: Model):
    """Logits over the 8 transformations from concatenated embeddings."""
    z = ad.concat([h_source, h_target], axis=-1)
    n_layers = len(model.cfg.hidden_sizes) + 1
    for i in range(n_layers):
        z = ad.add(ad.matmul(z, model.params[f"C_W{i}"]),
                   model.params[f"C_b{i}"])
        if i < n_layers - 1:
            z = ad.relu(z)
    return z


def predict_distance(e1, e2, model: Model) -> float:
    with ad.no_grad():
        d = ad.manhattan(embed(e1, model), embed(e2, model))
    return float(d.data)


def predict_first_transformation(e1, e2, model: Model):
    """Logits (length 8) for the first transformation from e1 towards e2."""
    with ad.no_grad():
        logits = classify(embed(e1, model), embed(e2, model), model)
    return logits.data


def save_model(model: Model, path):
    """Text format: header, then named tensors as round-trippable decimals."""
    lines = [f"eqsearch-model {MODEL_FORMAT_VERSION}",
             f"I {model.cfg.input_dim}",
             f"N {model.cfg.branching}",
             f"M {model.cfg.memory_dim}",
             "hidden " + " ".join(str(h) for h in model.cfg.hidden_sizes),
             f"classes {model.cfg.num_classes}"]
    for name in sorted(model.params):
        data = model.params[name].data
        lines.append(f"tensor {name} " + " ".join(str(d) for d in data.shape))
        rows = data.reshape(data.shape[0], -1) if data.ndim > 1 else data[None]
        for row in rows:
            lines.append(" ".join(repr(float(v)) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> Model:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    it = iter(lines)
    try:
        magic = next(it).split()
        if magic[0] != "eqsearch-model":
            raise FormatError("not an eqsearch model file")
        if int(magic[1]) != MODEL_FORMAT_VERSION:
            raise VersionMismatchError(f"unsupported format version {magic[1]}")
        header = {}
        for key in ("I", "N", "M", "hidden", "classes"):
            fields = next(it).split()
            if fields[0] != key:
                raise FormatError(f"expected header line {key!r}")
            header[key] = [int(v) for v in fields[1:]]
        cfg = ModelConfig(input_dim=header["I"][0], branching=header["N"][0],
                          memory_dim=header["M"][0],
                          hidden_sizes=tuple(header["hidden"]),
                          num_classes=header["classes"][0])
        params = {}
        for line in it:
            fields = line.split()
            if not fields:
                continue
            if fields[0] != "tensor":
                raise FormatError(f"unexpected line {line!r}")
            name = fields[1]
            shape = tuple(int(v) for v in fields[2:])
            n_rows = shape[0] if len(shape) > 1 else 1
            rows = []
            for _ in range(n_rows):
                rows.append([float(v) for v in next(it).split()])
            data = np.array(rows).reshape(shape)
            params[name] = ad.param(data)
    except StopIteration:
        raise FormatError("truncated model file") from None
    except (ValueError, IndexError) as err:
        raise FormatError(f"malformed model file: {err}") from None
    expected = init_params(cfg, seed=0)
    if set(params) != set(expected):
        raise FormatError("tensor names do not match the configuration")
    for name, p in expected.items():
        if params[name].data.shape != p.data.shape:
            raise FormatError(
                f"tensor {name} has shape {params[name].data.shape}, "
                f"expected {p.data.shape}")
    return Model(cfg, params)
