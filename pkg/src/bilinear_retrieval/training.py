"""Optimization loop, two-phase schedule, and the finite-difference
gradient checker for the toy model.

Training is single-threaded and bit-deterministic given the seed: batches
are drawn from a seeded generator, per-sample losses are summed in sample
order, and the optimizer math is plain numpy.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import losses as ls
from .errors import ConfigError, NumericalError
from .model import ToyModel

SIGNED_SQRT_BAND = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    max_epochs: int = 30
    learning_rate: float = 1e-3
    lr_halving_period: int = 10
    optimizer: str = "adam"
    lambda_attr: float = 1.0
    lambda_lm: float = 1.0
    pretrain_epochs: int = 3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError("optimizer must be adam or sgd")
        if min(self.batch_size, self.max_epochs) < 1 or self.learning_rate <= 0:
            raise ConfigError("batch size, epochs and learning rate must be positive")
        if self.lr_halving_period < 1:
            raise ConfigError("lr_halving_period must be >= 1")


def paper_train_config() -> TrainConfig:
    return TrainConfig(batch_size=20, max_epochs=35, learning_rate=1e-4, lr_halving_period=5)


class Optimizer:
    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self.moments: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.step_count += 1
        if self.cfg.optimizer == "sgd":
            for name, g in grads.items():
                params[name] = params[name] - lr * g
            return
        b1, b2, eps = self.cfg.adam_beta1, self.cfg.adam_beta2, self.cfg.adam_eps
        t = self.step_count
        for name, g in grads.items():
            m, v = self.moments.get(name, (np.zeros_like(g), np.zeros_like(g)))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.moments[name] = (m, v)
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            params[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + eps)


def make_targets(record, arch) -> dict:
    """Assemble the three loss targets for one dataset record."""
    return {
        "id": ls.IdTarget(int(record.item_id), arch.num_classes),
        "attr": ls.AttributeTarget(record.attributes),
        "lm": ls.make_landmark_target(
            record.landmarks,
            arch.image_size,
            arch.heatmap_size if arch.branch_mode == "two_branch" else arch.image_size,
            arch.num_landmarks,
            arch.heatmap_sigma,
        ),
    }


def train_step(
    model: ToyModel,
    batch: list,
    cfg: TrainConfig,
    optimizer: Optimizer,
    lr: float | None = None,
    trainable_prefixes: tuple[str, ...] | None = None,
    use_ce: bool = True,
    use_attr: bool = True,
    use_lm: bool = True,
    diagnostics: ls.LossDiagnostics | None = None,
) -> dict[str, float]:
    """One optimizer step on the batch-mean loss; returns the loss breakdown.

    batch entries are (image, targets) pairs. With trainable_prefixes set,
    only parameters whose name starts with one of the prefixes receive
    gradients and updates; all others are bit-untouched.
    """
    if not batch:
        raise ConfigError("empty batch")
    lr = cfg.learning_rate if lr is None else lr
    if trainable_prefixes is None:
        pv = {name: ad.Var(arr) for name, arr in model.params.items()}
    else:
        pv = {
            name: ad.Var(arr) if name.startswith(trainable_prefixes) else arr
            for name, arr in model.params.items()
        }
    inv = 1.0 / len(batch)
    total = None
    sums: dict[str, float] = {}
    for image, targets in batch:
        sample_total, parts = model.loss_graph(
            image,
            targets,
            cfg.lambda_attr,
            cfg.lambda_lm,
            pv=pv,
            use_ce=use_ce,
            use_attr=use_attr,
            use_lm=use_lm,
            diagnostics=diagnostics,
        )
        term = ad.scale(sample_total, inv)
        total = term if total is None else ad.add(total, term)
        for key, var in parts.items():
            sums[key] = sums.get(key, 0.0) + float(var.value) * inv
    loss_value = float(total.value)
    if not math.isfinite(loss_value):
        raise NumericalError(
            f"non-finite training loss {loss_value}; components: {sums}"
        )
    ad.backward(total)
    grads = {
        name: var.grad if var.grad is not None else np.zeros_like(var.value)
        for name, var in pv.items()
        if isinstance(var, ad.Var)
    }
    optimizer.step(model.params, grads, lr)
    sums["total"] = loss_value
    return sums


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)

    def log(self, phase: str, epoch: int, lr: float, losses: dict[str, float]) -> None:
        row = {"phase": phase, "epoch": epoch, "lr": lr}
        row.update(losses)
        self.rows.append(row)

    def last(self, phase: str) -> dict | None:
        rows = [r for r in self.rows if r["phase"] == phase]
        return rows[-1] if rows else None


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _run_phase(
    model: ToyModel,
    samples: list,
    cfg: TrainConfig,
    epochs: int,
    phase: str,
    history: TrainHistory,
    rng: np.random.Generator,
    schedule_lr: bool,
    **step_kwargs,
) -> None:
    optimizer = Optimizer(cfg)
    for epoch in range(epochs):
        lr = cfg.learning_rate * (0.5 ** (epoch // cfg.lr_halving_period) if schedule_lr else 1.0)
        acc: dict[str, float] = {}
        count = 0
        for idx in _epoch_batches(len(samples), cfg.batch_size, rng):
            batch = [samples[i] for i in idx]
            losses = train_step(model, batch, cfg, optimizer, lr, **step_kwargs)
            for key, val in losses.items():
                acc[key] = acc.get(key, 0.0) + val
            count += 1
        history.log(phase, epoch, lr, {k: v / count for k, v in acc.items()})


def pretrain_branch(
    model: ToyModel,
    which: str,
    samples: list,
    cfg: TrainConfig,
    epochs: int | None = None,
    history: TrainHistory | None = None,
) -> ToyModel:
    """Train one branch on its auxiliary loss only; every other parameter
    stays bit-identical."""
    if which not in ("attribute", "landmark"):
        raise ConfigError("which must be 'attribute' or 'landmark'")
    if which == "landmark" and model.arch.branch_mode != "two_branch":
        raise ConfigError("model has no landmark branch")
    history = history if history is not None else TrainHistory()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, zlib.crc32(which.encode())]))
    epochs = cfg.pretrain_epochs if epochs is None else epochs
    if which == "attribute":
        _run_phase(
            model, samples, cfg, epochs, "pretrain-attribute", history, rng, False,
            trainable_prefixes=("attr.",), use_ce=False, use_attr=True, use_lm=False,
        )
    else:
        _run_phase(
            model, samples, cfg, epochs, "pretrain-landmark", history, rng, False,
            trainable_prefixes=("lm.",), use_ce=False, use_attr=False, use_lm=True,
        )
    return model


def run_training(
    model: ToyModel,
    records: list,
    cfg: TrainConfig,
    two_phase: bool = True,
    diagnostics: ls.LossDiagnostics | None = None,
) -> TrainHistory:
    """Optional branch pretraining followed by joint training on all losses.

    Loss weights of exactly zero drop the corresponding head from the
    objective entirely (so a pure-ID run never evaluates the others).
    """
    arch = model.arch
    samples = [(rec.image.astype(model.dtype), make_targets(rec, arch)) for rec in records]
    history = TrainHistory()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7261]))
    two_branch = arch.branch_mode == "two_branch"
    if two_phase and cfg.pretrain_epochs > 0:
        if cfg.lambda_attr != 0.0:
            pretrain_branch(model, "attribute", samples, cfg, history=history)
        if two_branch and cfg.lambda_lm != 0.0:
            pretrain_branch(model, "landmark", samples, cfg, history=history)
    _run_phase(
        model, samples, cfg, cfg.max_epochs, "joint", history, rng, True,
        use_ce=True,
        use_attr=cfg.lambda_attr != 0.0,
        use_lm=two_branch and cfg.lambda_lm != 0.0,
        diagnostics=diagnostics,
    )
    return history


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    worst_coordinate: tuple[str, int] | None
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _kink_signature_differs(rec_plus, rec_minus, rec_nominal, fd_step: float) -> bool:
    """True when the +-h pair straddles a non-smooth point.

    relu: any activation mask change. signed sqrt: a sign flip, or an
    entry inside the |x| < 1e-4 band that the perturbation moves far
    enough for the sqrt curvature to corrupt the central difference. The
    motion threshold comes from bounding the truncation term
    (h^2/6) * (3/8) |x|^{-5/2} * (dx/dtheta)^3 by ~1e-8: entries the
    coordinate barely touches are harmless and stay checkable.
    """
    if len(rec_plus) != len(rec_minus) or len(rec_plus) != len(rec_nominal):
        return True
    for (kind_p, arr_p), (_, arr_m), (_, arr_n) in zip(rec_plus, rec_minus, rec_nominal):
        if kind_p == "relu":
            if not np.array_equal(arr_p, arr_m):
                return True
            continue
        if not np.array_equal(np.sign(arr_p), np.sign(arr_m)):
            return True
        hot = np.abs(arr_n) < SIGNED_SQRT_BAND
        if hot.any():
            motion = np.abs(arr_p - arr_m)[hot]
            allowed = np.cbrt(
                1.3e-6 * fd_step * np.maximum(np.abs(arr_n[hot]), 1e-30) ** 2.5
            )
            if np.any(motion > allowed):
                return True
        near_edge = (~hot) & (
            np.minimum(np.abs(arr_p), np.abs(arr_m)) < 0.5 * SIGNED_SQRT_BAND
        )
        if near_edge.any():
            return True
    return False


def grad_check(
    model: ToyModel,
    image,
    targets: dict,
    tolerance: float = 1e-5,
    num_coords: int = 200,
    step: float = 1e-6,
    seed: int = 0,
    lambda_attr: float = 1.0,
    lambda_lm: float = 1.0,
) -> GradCheckReport:
    """Compare backprop gradients of the total loss against central finite
    differences on a random subsample of parameter and input coordinates.

    Coordinates whose +-h evaluations cross a relu kink, or that involve a
    signed-sqrt input inside the |x| < 1e-4 band, are skipped and counted:
    the two-sided difference is not a derivative estimate there.
    """
    if model.dtype != np.float64:
        raise ConfigError("grad_check requires a float64 model")
    image = np.asarray(image, dtype=np.float64)
    use_lm = model.arch.branch_mode == "two_branch"

    def loss_with_pv(pv, img):
        total, _ = model.loss_graph(
            img, targets, lambda_attr, lambda_lm, pv=pv, use_lm=use_lm
        )
        return total

    pv = {name: ad.Var(arr) for name, arr in model.params.items()}
    img_var = ad.Var(image)
    with ad.record_kinks() as rec_nominal:
        total = loss_with_pv(pv, img_var)
    loss_scale = abs(float(total.value))
    ad.backward(total)
    analytic: dict[str, np.ndarray] = {
        name: (var.grad if var.grad is not None else np.zeros_like(var.value))
        for name, var in pv.items()
    }
    analytic["__input__"] = img_var.grad if img_var.grad is not None else np.zeros_like(image)

    coordinate_pool = [
        (name, idx)
        for name, arr in [*model.params.items(), ("__input__", image)]
        for idx in range(arr.size)
    ]
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(coordinate_pool))

    def loss_at(name, idx, delta) -> tuple[float, list]:
        if name == "__input__":
            img = image.copy()
            img.flat[idx] += delta
            arrays = model.params
            img_in = img
        else:
            arrays = dict(model.params)
            arr = arrays[name].copy()
            arr.flat[idx] += delta
            arrays[name] = arr
            img_in = image
        with ad.record_kinks() as rec:
            val = float(loss_with_pv(arrays, img_in).value)
        return val, rec

    # additive denominator floor: gradients far below the loss scale are
    # compared absolutely, keeping the fp cancellation noise of the central
    # difference (~eps*L/2h) orders of magnitude under the tolerance
    denom_floor = 0.1 * max(1.0, loss_scale)
    max_rel = 0.0
    worst = None
    checked = 0
    skipped = 0
    attempts = 0
    for pos in order:
        if checked >= num_coords or attempts >= 20 * num_coords:
            break
        attempts += 1
        name, idx = coordinate_pool[pos]
        plus, rec_plus = loss_at(name, idx, step)
        minus, rec_minus = loss_at(name, idx, -step)
        if _kink_signature_differs(rec_plus, rec_minus, rec_nominal, step):
            skipped += 1
            continue
        fd = (plus - minus) / (2.0 * step)
        an = float(analytic[name].flat[idx])
        rel = abs(an - fd) / (max(abs(an), abs(fd)) + denom_floor)
        if rel > max_rel:
            max_rel, worst = rel, (name, int(idx))
        checked += 1
    return GradCheckReport(max_rel, checked, skipped, worst, tolerance)
