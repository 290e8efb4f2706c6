"""Two-level skill models: a GRU over primitive labels and one conditional VAE per primitive.

Segments are represented as K resampled waypoints expressed as 7-D deltas
(position and quaternion components) from the segment's first waypoint.
The condition vector is ``[tile_w, tile_d, tile_thickness, anchor(3),
start position(3), start quaternion(4)]``. Both are standardized with statistics stored in the
model so that decoding is self-contained.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import nn
from .demo import DONE, N_PRIMITIVES, Demonstration, TaskParameters, fmt, label_runs, segment_by_label
from .errors import InvalidArgument, NonFiniteError, ParseError, ValidationError
from .rng import SplitMix64
from .sim import PHASE_NAMES, TILE_THICKNESS
from .trajectory import Trajectory, resample_uniform, trajectory_error

SEGMENT_POINTS = 20
LATENT_DIM = 3
COND_DIM = 13
HIDDEN = 64
SEQ_HIDDEN = 16
N_CLASSES = 9
BETA = 1e-3
STD_FLOOR = 1e-8
SEG_STD_FLOOR = 0.005          # segment features varying less than this are treated as noise
COND_STD_FLOOR = 0.01          # likewise for conditions, so chaining drift stays in range
COND_CLIP = 5.0               # standardized conditions beyond this are out of the training range
SEGMENT_DT = 0.05
CHECKPOINTS = (10, 50, 100, 200, 300, 400, 500)
BUNDLE_VERSION = 1
REACTIVE_LR = 3e-3
REACTIVE_LR_FINAL = 1e-5       # cosine-annealed over the run


# --- feature encoding -------------------------------------------------------------

def canonical_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return -q if q[3] < 0 else q


def condition_vector(params: TaskParameters, position, orientation) -> np.ndarray:
    return np.concatenate([[params.tile_width, params.tile_depth, TILE_THICKNESS], params.grid_anchor,
                           np.asarray(position, float), canonical_quat(orientation)])


def segment_features(seg: Trajectory, k: int = SEGMENT_POINTS) -> np.ndarray:
    """Flattened ``(k, 7)`` deltas of the resampled segment from its first waypoint."""
    r = resample_uniform(seg, k)
    q0 = canonical_quat(r.q[0])
    q = r.q * np.where(r.q @ q0 < 0, -1.0, 1.0)[:, None]
    return np.concatenate([r.p - r.p[0], q - q0], axis=1).reshape(-1)


@dataclass
class NormStats:
    cond_mean: np.ndarray
    cond_std: np.ndarray
    seg_mean: np.ndarray
    seg_std: np.ndarray

    @classmethod
    def fit(cls, conds: np.ndarray, segs: np.ndarray, seg_floor: float = SEG_STD_FLOOR,
            cond_floor: float = COND_STD_FLOOR) -> "NormStats":
        return cls(conds.mean(axis=0), np.maximum(conds.std(axis=0), max(cond_floor, STD_FLOOR)),
                   segs.mean(axis=0), np.maximum(segs.std(axis=0), max(seg_floor, STD_FLOOR)))

    def norm_cond(self, c: np.ndarray) -> np.ndarray:
        return np.clip((c - self.cond_mean) / self.cond_std, -COND_CLIP, COND_CLIP)

    def norm_seg(self, s: np.ndarray) -> np.ndarray:
        return (s - self.seg_mean) / self.seg_std

    def denorm_seg(self, s: np.ndarray) -> np.ndarray:
        return s * self.seg_std + self.seg_mean


# --- sequential skill -----------------------------------------------------------

def one_hot(label: int | None) -> np.ndarray:
    v = np.zeros(N_CLASSES)
    if label is not None:
        v[label - 1] = 1.0
    return v


@dataclass
class SequentialSkillModel:
    gru: nn.GruParams
    head_W: np.ndarray
    head_b: np.ndarray

    def __post_init__(self) -> None:
        if self.head_W.shape != (self.gru.hidden_dim, N_CLASSES) or self.head_b.shape != (N_CLASSES,):
            raise ValidationError("sequential head shape does not match the GRU hidden size")

    def as_dict(self) -> dict[str, np.ndarray]:
        return {**self.gru.as_dict("gru."), "head.W": self.head_W, "head.b": self.head_b}

    @classmethod
    def from_dict(cls, d: Mapping[str, np.ndarray]) -> "SequentialSkillModel":
        return cls(nn.GruParams.from_dict(d, "gru."), np.asarray(d["head.W"]), np.asarray(d["head.b"]))


def _sequence_logits(p: Mapping[str, nn.Tensor], inputs: np.ndarray) -> list[nn.Tensor]:
    """``inputs`` is ``(T, B, 9)``; returns T logit tensors of shape ``(B, 9)``."""
    h = nn.Tensor(np.zeros((inputs.shape[1], p["gru.W_rh"].shape[0])))
    out = []
    for x in inputs:
        h = nn.gru_cell(p, nn.Tensor(x), h, "gru.")
        out.append(h @ p["head.W"] + p["head.b"])
    return out


def label_sequence(demo: Demonstration) -> list[int]:
    return label_runs(demo.labels)


def _sequence_batch(seqs: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    full = [list(s) + [DONE] for s in seqs]
    length = len(full[0])
    inputs = np.zeros((length, len(full), N_CLASSES))
    targets = np.zeros((length, len(full)), dtype=int)
    for b, seq in enumerate(full):
        for step in range(length):
            if step > 0:
                inputs[step, b] = one_hot(seq[step - 1])
            targets[step, b] = seq[step] - 1
    return inputs, targets


def train_sequential(demos: Sequence[Demonstration], epochs: int = 500, seed: int = 0,
                     lr: float = 0.01) -> tuple[SequentialSkillModel, list[float]]:
    """Teacher-forced cross-entropy training, one full-batch Adam step per epoch."""
    demos = list(getattr(demos, "demos", demos))
    if not demos:
        raise InvalidArgument("cannot train on an empty pool")
    if epochs < 1:
        raise InvalidArgument("epochs must be >= 1")
    rng = SplitMix64(seed)
    gru = nn.GruParams.init(N_CLASSES, SEQ_HIDDEN, rng)
    params = SequentialSkillModel(gru, rng.xavier_uniform(SEQ_HIDDEN, N_CLASSES), np.zeros(N_CLASSES)).as_dict()

    groups: dict[int, list[list[int]]] = {}
    for d in demos:
        seq = label_sequence(d)
        groups.setdefault(len(seq), []).append(seq)
    batches = [(_sequence_batch(g), len(g)) for _, g in sorted(groups.items())]
    n_total = len(demos)

    state = nn.AdamState(lr=lr)
    trace = []
    for _ in range(epochs):
        leaves = nn.leaves(params)
        loss = None
        for (inputs, targets), count in batches:
            logits = _sequence_logits(leaves, inputs)
            ce = None
            for step, lg in enumerate(logits):
                term = nn.cross_entropy(lg, targets[step])
                ce = term if ce is None else ce + term
            term = nn.mul(ce, count / (n_total * len(logits)))
            loss = term if loss is None else loss + term
        grads = nn.backprop(loss, leaves)
        params, state = nn.adam_step(state, params, grads)
        trace.append(float(loss.data))
    return SequentialSkillModel.from_dict(params), trace


def predict_next(model: SequentialSkillModel, history: Sequence[int]) -> tuple[int, float]:
    """Most likely next label (1..8 or DONE) after ``history`` and its probability."""
    history = list(history)
    for i, lab in enumerate(history):
        if not 1 <= lab <= DONE:
            raise InvalidArgument(f"invalid label {lab} in history")
        if lab == DONE and i != len(history) - 1:
            raise InvalidArgument("history continues after DONE")
    p = {k: nn.Tensor(v) for k, v in model.as_dict().items()}
    inputs = np.array([one_hot(None)] + [one_hot(lab) for lab in history])[:, None, :]
    logits = _sequence_logits(p, inputs)[-1].data[0]
    if not np.all(np.isfinite(logits)):
        raise NonFiniteError("sequential head produced non-finite logits")
    probs = nn.softmax(logits)
    k = int(np.argmax(probs))
    return k + 1, float(probs[k])


# --- reactive skill ---------------------------------------------------------------

ENC_ACT = ("tanh", "linear")
DEC_ACT = ("tanh", "linear")


@dataclass
class ReactiveSkillModel:
    primitive: int
    encoder: nn.MlpParams
    decoder: nn.MlpParams
    norm: NormStats
    segment_points: int = SEGMENT_POINTS
    latent_dim: int = LATENT_DIM

    def __post_init__(self) -> None:
        feat = self.segment_points * 7
        if self.encoder.input_dim != feat + COND_DIM or self.encoder.output_dim != 2 * self.latent_dim:
            raise ValidationError(f"encoder dims do not match K={self.segment_points}, latent={self.latent_dim}")
        if self.decoder.input_dim != self.latent_dim + COND_DIM or self.decoder.output_dim != feat:
            raise ValidationError("decoder dims do not match")
        if not 1 <= self.primitive <= N_PRIMITIVES:
            raise ValidationError(f"primitive {self.primitive} outside 1..8")

    def as_dict(self) -> dict[str, np.ndarray]:
        return {**self.encoder.as_dict("enc."), **self.decoder.as_dict("dec.")}

    def with_params(self, d: Mapping[str, np.ndarray]) -> "ReactiveSkillModel":
        return ReactiveSkillModel(self.primitive, self.encoder.with_values(d, "enc."),
                                  self.decoder.with_values(d, "dec."), self.norm,
                                  self.segment_points, self.latent_dim)

    def encode(self, segment_feat: np.ndarray, condition: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.concatenate([self.norm.norm_seg(segment_feat), self.norm.norm_cond(condition)], axis=-1)
        out = nn.mlp_forward(self.encoder, x)
        return out[..., :self.latent_dim], out[..., self.latent_dim:]


def vae_loss_tensor(p: Mapping[str, nn.Tensor], seg_n: np.ndarray, cond_n: np.ndarray, eps: np.ndarray,
                    beta: float = BETA, latent_dim: int = LATENT_DIM) -> tuple[nn.Tensor, nn.Tensor, nn.Tensor]:
    """``(total, recon_mse, kl)`` for normalized segment/condition batches."""
    enc = nn.mlp_apply(p, ENC_ACT, np.concatenate([seg_n, cond_n], axis=-1), "enc.")
    mu = nn.columns(enc, 0, latent_dim)
    logvar = nn.columns(enc, latent_dim, 2 * latent_dim)
    z = nn.reparameterize_tensor(mu, logvar, eps)
    recon = nn.mlp_apply(p, DEC_ACT, nn.concat([z, nn.Tensor(cond_n)]), "dec.")
    mse = nn.mean(nn.square(recon - seg_n))
    kl = nn.kl_tensor(mu, logvar)
    return mse + nn.mul(kl, beta), mse, kl


def reactive_dataset(demos: Sequence[Demonstration], primitive: int,
                     k: int = SEGMENT_POINTS) -> tuple[np.ndarray, np.ndarray]:
    conds, segs = [], []
    for d in demos:
        seg = segment_by_label(d)[primitive - 1]
        conds.append(condition_vector(d.params, seg.p[0], seg.q[0]))
        segs.append(segment_features(seg, k))
    return np.array(conds), np.array(segs)


@dataclass
class ReactiveTraining:
    model: ReactiveSkillModel
    loss: list[float]
    recon: list[float]
    kl: list[float]
    snapshots: dict[int, ReactiveSkillModel] = field(default_factory=dict)
    seconds: dict[int, float] = field(default_factory=dict)


def _cosine_lr(lr: float, lr_final: float | None, epoch: int, epochs: int) -> float:
    if lr_final is None or epochs == 1:
        return lr
    return lr_final + 0.5 * (lr - lr_final) * (1.0 + np.cos(np.pi * (epoch - 1) / (epochs - 1)))


def train_reactive(demos: Sequence[Demonstration], primitive: int, epochs: int = 500, seed: int = 0,
                   batch_size: int = 1, lr: float = REACTIVE_LR, beta: float = BETA,
                   checkpoints: Iterable[int] = (), lr_final: float | None = REACTIVE_LR_FINAL) -> ReactiveTraining:
    """Train one conditional VAE on the primitive's segments from every demo.

    Each epoch visits the demos in a seeded shuffled order in minibatches of
    ``batch_size``; reparameterization noise comes from the same seeded stream.
    The learning rate follows a cosine from ``lr`` to ``lr_final`` (constant
    when ``lr_final`` is None).
    """
    demos = list(getattr(demos, "demos", demos))
    if not demos:
        raise InvalidArgument("cannot train on an empty pool")
    if epochs < 1:
        raise InvalidArgument("epochs must be >= 1")
    conds, segs = reactive_dataset(demos, primitive)
    norm = NormStats.fit(conds, segs)
    cond_n, seg_n = norm.norm_cond(conds), norm.norm_seg(segs)
    feat = seg_n.shape[1]

    rng = SplitMix64(seed)
    enc = nn.MlpParams.init([feat + COND_DIM, HIDDEN, 2 * LATENT_DIM], ENC_ACT, rng)
    dec = nn.MlpParams.init([LATENT_DIM + COND_DIM, HIDDEN, feat], DEC_ACT, rng)
    model = ReactiveSkillModel(primitive, enc, dec, norm)
    params = model.as_dict()
    state = nn.AdamState(lr=lr)
    wanted = set(checkpoints)
    out = ReactiveTraining(model, [], [], [])
    n = len(demos)
    t0 = time.perf_counter()
    for epoch in range(1, epochs + 1):
        state = replace(state, lr=_cosine_lr(lr, lr_final, epoch, epochs))
        order = rng.permutation(n)
        tot = rec = kls = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            eps = rng.normal((len(idx), LATENT_DIM))
            leaves = nn.leaves(params)
            loss, mse, kl = vae_loss_tensor(leaves, seg_n[idx], cond_n[idx], eps, beta)
            grads = nn.backprop(loss, leaves)
            params, state = nn.adam_step(state, params, grads)
            w = len(idx) / n
            tot += w * float(loss.data)
            rec += w * float(mse.data)
            kls += w * float(kl.data)
        if not (np.isfinite(tot) and kls >= 0):
            raise NonFiniteError(f"primitive {primitive}: invalid loss at epoch {epoch}")
        out.loss.append(tot)
        out.recon.append(rec)
        out.kl.append(kls)
        if epoch in wanted:
            out.snapshots[epoch] = model.with_params(params)
            out.seconds[epoch] = time.perf_counter() - t0
    out.model = model.with_params(params)
    out.seconds.setdefault(epochs, time.perf_counter() - t0)
    return out


def decode_segment(model: ReactiveSkillModel, condition, z=None) -> Trajectory:
    """Generate a K-waypoint segment that starts exactly at the condition's start pose."""
    condition = np.asarray(condition, dtype=float)
    z = np.zeros(model.latent_dim) if z is None else np.asarray(z, dtype=float)
    if condition.shape != (COND_DIM,) or z.shape != (model.latent_dim,):
        raise InvalidArgument(f"decode_segment expects condition ({COND_DIM},) and z ({model.latent_dim},), "
                              f"got {condition.shape} and {z.shape}")
    out = nn.mlp_forward(model.decoder, np.concatenate([z, model.norm.norm_cond(condition)]))
    deltas = model.norm.denorm_seg(out).reshape(model.segment_points, 7)
    if not np.all(np.isfinite(deltas)):
        raise NonFiniteError("decoder produced non-finite output")
    p0 = condition[6:9]
    q0 = condition[9:13]
    p = p0 + deltas[:, :3]
    q = q0 + deltas[:, 3:]
    p[0] = p0
    q[0] = q0
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    q[0] = q0
    t = np.arange(model.segment_points) * SEGMENT_DT
    return Trajectory(t, p, q, normalize=False)


def reconstruction_error(model: ReactiveSkillModel, demos: Sequence[Demonstration]) -> float:
    """Mean positional distance between each segment and its posterior-mean reconstruction."""
    demos = list(getattr(demos, "demos", demos))
    errs = []
    for d in demos:
        seg = segment_by_label(d)[model.primitive - 1]
        cond = condition_vector(d.params, seg.p[0], seg.q[0])
        feat = segment_features(seg, model.segment_points)
        mu, _ = model.encode(feat, cond)
        rec = decode_segment(model, cond, mu)
        ref = resample_uniform(seg, model.segment_points)
        errs.append(np.mean(np.linalg.norm(rec.p - ref.p, axis=1)))
    return float(np.mean(errs))


# --- bundle -------------------------------------------------------------------------

@dataclass
class SkillModelBundle:
    sequential: SequentialSkillModel
    reactive: tuple[ReactiveSkillModel, ...]
    dataset_id: str
    seed: int
    epochs_trained: int

    def __post_init__(self) -> None:
        self.reactive = tuple(sorted(self.reactive, key=lambda m: m.primitive))
        if [m.primitive for m in self.reactive] != list(range(1, N_PRIMITIVES + 1)):
            raise ValidationError("bundle needs exactly one reactive model per primitive 1..8")

    @property
    def norm(self) -> tuple[NormStats, ...]:
        return tuple(m.norm for m in self.reactive)

    def model_for(self, primitive: int) -> ReactiveSkillModel:
        return self.reactive[primitive - 1]


@dataclass
class BundleTraining:
    bundle: SkillModelBundle
    sequential_loss: list[float]
    reactive: list[ReactiveTraining]
    snapshots: dict[int, SkillModelBundle] = field(default_factory=dict)
    seconds: dict[int, float] = field(default_factory=dict)


def train_bundle(pool, epochs: int = 500, seed: int = 0, sequential_epochs: int = 500,
                 batch_size: int = 1, checkpoints: Iterable[int] = (),
                 dataset_id: str | None = None) -> BundleTraining:
    """Train the sequence model and all eight reactive models (seed + primitive each)."""
    demos = list(getattr(pool, "demos", pool))
    dataset_id = dataset_id or getattr(pool, "dataset_id", None) or "pool"
    checkpoints = sorted(set(c for c in checkpoints if c <= epochs))
    seq, seq_trace = train_sequential(demos, sequential_epochs, seed)
    runs = [train_reactive(demos, prim, epochs, seed + prim, batch_size, checkpoints=checkpoints)
            for prim in range(1, N_PRIMITIVES + 1)]
    bundle = SkillModelBundle(seq, tuple(r.model for r in runs), dataset_id, seed, epochs)
    snaps = {c: SkillModelBundle(seq, tuple(r.snapshots[c] for r in runs), dataset_id, seed, c)
             for c in checkpoints}
    seconds = {c: float(sum(r.seconds[c] for r in runs)) for c in checkpoints}
    seconds.setdefault(epochs, float(sum(r.seconds[epochs] for r in runs)))
    return BundleTraining(bundle, seq_trace, runs, snaps, seconds)


@dataclass(frozen=True)
class BundleEvaluation:
    mean_error: float
    per_primitive: tuple[float, ...]
    per_demo: tuple[float, ...]


def evaluate_bundle(bundle: SkillModelBundle, heldout) -> BundleEvaluation:
    """Synthesize a trajectory for each held-out demonstration's task and start pose."""
    from .synthesis import SynthesisRequest, synthesize_trajectory

    demos = list(getattr(heldout, "demos", heldout))
    if not demos:
        raise InvalidArgument("held-out set is empty")
    per_demo = []
    per_prim = np.zeros(N_PRIMITIVES)
    for d in demos:
        traj, _ = synthesize_trajectory(bundle, SynthesisRequest(d.params, d.trajectory[0]))
        per_demo.append(trajectory_error(traj, d.trajectory))
        for i, seg in enumerate(segment_by_label(d)):
            cond = condition_vector(d.params, seg.p[0], seg.q[0])
            gen = decode_segment(bundle.model_for(i + 1), cond)
            per_prim[i] += trajectory_error(gen, seg) / len(demos)
    return BundleEvaluation(float(np.mean(per_demo)), tuple(float(v) for v in per_prim), tuple(per_demo))


# --- serialization -------------------------------------------------------------------

def _render(obj) -> str:
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_render(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_render(v) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot render {type(obj).__name__}")


def canonical_json(obj) -> bytes:
    return (_render(obj) + "\n").encode("utf-8")


def _mlp_obj(p: nn.MlpParams) -> dict:
    return {"activations": list(p.activations), "weights": p.weights, "biases": p.biases}


def save_bundle(bundle: SkillModelBundle) -> bytes:
    seq = bundle.sequential
    obj = {
        "kind": "bundle", "version": BUNDLE_VERSION, "seed": int(bundle.seed),
        "epochs": int(bundle.epochs_trained), "dataset_id": bundle.dataset_id,
        "norm": {"primitives": [{"primitive": m.primitive, "cond_mean": m.norm.cond_mean,
                                 "cond_std": m.norm.cond_std, "seg_mean": m.norm.seg_mean,
                                 "seg_std": m.norm.seg_std} for m in bundle.reactive]},
        "sequential": {"hidden_dim": seq.gru.hidden_dim, "gru": seq.gru.as_dict(),
                       "head_W": seq.head_W, "head_b": seq.head_b},
        "reactive": [{"primitive": m.primitive, "segment_points": m.segment_points,
                      "latent_dim": m.latent_dim, "encoder": _mlp_obj(m.encoder),
                      "decoder": _mlp_obj(m.decoder)} for m in bundle.reactive],
    }
    return canonical_json(obj)


def _arr(obj, key):
    return np.array(obj[key], dtype=np.float64)


def load_bundle(data: bytes | str) -> SkillModelBundle:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed bundle JSON: {exc.msg}", offset=exc.pos) from None
    if not isinstance(obj, dict) or obj.get("kind") != "bundle":
        raise ParseError("not a bundle document", field="kind")
    if obj.get("version") != BUNDLE_VERSION:
        raise ParseError(f"unsupported bundle version {obj.get('version')!r}", field="version")
    try:
        s = obj["sequential"]
        seq = SequentialSkillModel(nn.GruParams(**{k: np.array(v, dtype=np.float64) for k, v in s["gru"].items()}),
                                   _arr(s, "head_W"), _arr(s, "head_b"))
        norms = {n["primitive"]: NormStats(_arr(n, "cond_mean"), _arr(n, "cond_std"),
                                           _arr(n, "seg_mean"), _arr(n, "seg_std"))
                 for n in obj["norm"]["primitives"]}
        reactive = []
        for r in obj["reactive"]:
            enc = nn.MlpParams(r["encoder"]["weights"], r["encoder"]["biases"], r["encoder"]["activations"])
            dec = nn.MlpParams(r["decoder"]["weights"], r["decoder"]["biases"], r["decoder"]["activations"])
            reactive.append(ReactiveSkillModel(r["primitive"], enc, dec, norms[r["primitive"]],
                                               r["segment_points"], r["latent_dim"]))
        return SkillModelBundle(seq, tuple(reactive), obj["dataset_id"], obj["seed"], obj["epochs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"inconsistent bundle: {exc}") from None


def knowledge_rows(bundle: SkillModelBundle, per_primitive_errors: Sequence[float]) -> list[dict]:
    """Rows for the CSV knowledge export: one per primitive in sequence order."""
    errs = list(per_primitive_errors)
    if len(errs) != N_PRIMITIVES:
        raise InvalidArgument(f"need {N_PRIMITIVES} per-primitive errors, got {len(errs)}")
    rows = []
    for i, m in enumerate(bundle.reactive):
        rows.append({"sequence_index": i + 1, "primitive": m.primitive, "name": PHASE_NAMES[i],
                     "mean_error": float(errs[i]),
                     "segment_std_mean": float(np.mean(m.norm.seg_std)),
                     "condition_std_mean": float(np.mean(m.norm.cond_std))})
    return rows
