"""Desk-scale two-branch model: a small conv stack for appearance
attributes, a mini encoder-decoder for landmark heatmaps, channel-wise
co-attention, spatial compact bilinear fusion and the loss heads.

The branch layouts are deliberately tiny stand-ins; only the fusion
machinery is meant to match a production-scale configuration (which the
"paper-shape" channel counts exercise). Parameters live in a flat
name -> array dict so optimizers, checkpoints and gradient checks can
address coordinates uniformly.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import attention as att
from . import autodiff as ad
from . import fusion as fu
from . import losses as ls
from . import sketch as sk
from . import tensor_io
from .errors import ConfigError, ShapeError

LANDMARK_MODES = ("features", "heatmaps")
BRANCH_MODES = ("two_branch", "attribute_only")


@dataclass(frozen=True)
class ArchConfig:
    image_size: int = 64
    branch_mode: str = "two_branch"
    # appearance branch: conv+pool per entry, then a final conv to attr_feat_channels
    attr_channels: tuple[int, ...] = (16, 32, 48)
    attr_feat_channels: int = 64
    # landmark branch: stem convs (pool before convs 1..lm_stem_pools), then a
    # 3-down/3-up hourglass at lm_hourglass_channels with one skip per scale
    lm_stem_channels: tuple[int, ...] = (16, 24, 32)
    lm_stem_pools: int = 2
    lm_hourglass_channels: int = 32
    lm_feat_channels: int = 32
    landmark_mode: str = "features"
    num_attributes: int = 10
    num_landmarks: int = 4
    num_classes: int = 50
    heatmap_sigma: float = 1.0
    # fusion
    fusion_mode: str = "cbp"
    sketch_dim: int = 256
    target_spatial: tuple[int, int] = (8, 8)
    out_dim: int = 64
    eps: float = 1e-12
    per_location_sketch: bool = False
    # attention
    attention: bool = True
    force_unit_alphas: bool = False
    weight_mode: str = "sigmoid"
    guidance_mode: str = "joint"
    attention_bottleneck_a: int | None = None
    attention_bottleneck_l: int | None = None
    dtype: str = "float64"

    def __post_init__(self):
        if self.branch_mode not in BRANCH_MODES:
            raise ConfigError(f"branch_mode must be one of {BRANCH_MODES}")
        if self.landmark_mode not in LANDMARK_MODES:
            raise ConfigError(f"landmark_mode must be one of {LANDMARK_MODES}")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        if self.fusion_mode not in fu.FUSION_MODES and self.fusion_mode != "none":
            raise ConfigError(f"unknown fusion_mode {self.fusion_mode!r}")
        if not self.attr_channels:
            raise ConfigError("attribute branch needs at least one conv+pool stage")
        s = self.image_size
        if s % (1 << len(self.attr_channels)):
            raise ConfigError(
                f"image size {s} not divisible by attribute pooling factor "
                f"{1 << len(self.attr_channels)}"
            )
        if not 0 <= self.lm_stem_pools <= len(self.lm_stem_channels) - 1:
            raise ConfigError("lm_stem_pools must be <= len(lm_stem_channels) - 1")
        if self.lm_stem_channels[-1] != self.lm_hourglass_channels:
            raise ConfigError("last stem width must equal the hourglass width")
        if s % (1 << self.lm_stem_pools):
            raise ConfigError("image size not divisible by landmark stem pooling")
        if self.branch_mode == "two_branch" and self.base_resolution % 8:
            raise ConfigError(
                f"hourglass base {self.base_resolution} must be divisible by 8 "
                "(three downsampling steps)"
            )

    @property
    def attr_resolution(self) -> int:
        return self.image_size >> len(self.attr_channels)

    @property
    def base_resolution(self) -> int:
        """Resolution of the hourglass base and of the heatmaps."""
        return self.image_size >> self.lm_stem_pools

    @property
    def heatmap_size(self) -> int:
        return self.base_resolution

    @property
    def fusion_channels_l(self) -> int:
        """Channel count of the landmark-side map entering fusion."""
        return (
            self.num_landmarks
            if self.landmark_mode == "heatmaps"
            else self.lm_feat_channels
        )

    @property
    def fused_channels(self) -> int:
        if self.branch_mode == "attribute_only":
            return self.attr_feat_channels
        mode = self.fusion_mode
        if mode == "cbp":
            return self.sketch_dim
        if mode == "concat":
            return self.attr_feat_channels + self.fusion_channels_l
        if mode in ("mul", "sum"):
            return self.attr_feat_channels
        if mode == "full_bilinear":
            return self.attr_feat_channels * self.fusion_channels_l
        raise ConfigError(f"no fused size for mode {mode!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ArchConfig":
        d = dict(d)
        for key in ("attr_channels", "lm_stem_channels", "target_spatial"):
            if key in d:
                d[key] = tuple(d[key])
        return ArchConfig(**d)


def paper_shape_arch() -> ArchConfig:
    """Production-scale fusion shapes: 1536/256-channel branches feeding a
    2048-d bilinear map on an 8x8 grid, 2048-d final embedding."""
    return ArchConfig(
        attr_feat_channels=1536,
        lm_stem_pools=0,
        lm_feat_channels=256,
        sketch_dim=2048,
        out_dim=2048,
        num_attributes=51,
        num_landmarks=8,
        num_classes=100,
    )


# ---------------------------------------------------------------------------
# parameter table
# ---------------------------------------------------------------------------


def param_specs(arch: ArchConfig) -> list[tuple[str, tuple[int, ...], int, str]]:
    """Ordered (name, shape, fan_in, gain) table of every trainable
    parameter. gain "relu" marks feature-extraction weights that feed a
    relu (initialized variance-preserving); heads and attention MLPs use
    the plain "linear" bound."""
    specs: list[tuple[str, tuple[int, ...], int, str]] = []

    def conv(name, cin, cout, k):
        specs.append((f"{name}.w", (cout, cin, k, k), cin * k * k, "relu"))
        specs.append((f"{name}.b", (cout,), cin * k * k, "relu"))

    def dense(name, fin, fout, gain="linear"):
        specs.append((f"{name}.w", (fout, fin), fin, gain))
        specs.append((f"{name}.b", (fout,), fin, gain))

    prev = 3
    for i, ch in enumerate(arch.attr_channels):
        conv(f"attr.conv{i}", prev, ch, 3)
        prev = ch
    # 1x1 feature head keeps the branch receptive field below the motif
    # spacing of the synthetic data: appearance fibers describe one part,
    # never the arrangement of parts
    dense("attr.feat", prev, arch.attr_feat_channels, gain="relu")
    dense("attr.head", arch.attr_feat_channels, arch.num_attributes)

    if arch.branch_mode == "two_branch":
        # the localization branch sees two extra coordinate-ramp channels:
        # dense positional input is what lets its fibers say "where"
        prev = 5
        for i, ch in enumerate(arch.lm_stem_channels):
            conv(f"lm.stem{i}", prev, ch, 3)
            prev = ch
        hg = arch.lm_hourglass_channels
        for k in range(1, 4):
            conv(f"lm.down{k}", hg, hg, 3)
        for k in range(1, 4):
            conv(f"lm.up{k}", hg, hg, 3)
        dense("lm.feat", hg, arch.lm_feat_channels, gain="relu")
        dense("lm.head", arch.lm_feat_channels, arch.num_landmarks)

        if arch.attention:
            c_a, c_l = arch.attr_feat_channels, arch.fusion_channels_l
            k_a = arch.attention_bottleneck_a or att.default_bottleneck(c_a, c_l)
            k_l = arch.attention_bottleneck_l or att.default_bottleneck(c_a, c_l)
            guide_a = c_a + c_l if arch.guidance_mode == "joint" else c_a
            guide_l = c_a + c_l if arch.guidance_mode == "joint" else c_l
            dense("att.mlp1_a", guide_a, k_a)
            dense("att.mlp2_a", k_a, c_a)
            dense("att.mlp1_l", guide_l, k_l)
            dense("att.mlp2_l", k_l, c_l)

        if arch.fusion_mode in ("mul", "sum"):
            dense("fuse.adapter", arch.fusion_channels_l, arch.attr_feat_channels)

    dense("fuse.fc", arch.fused_channels, arch.out_dim)
    dense("id", arch.out_dim, arch.num_classes)
    return specs


def param_names(arch: ArchConfig) -> set[str]:
    return {name for name, _, _, _ in param_specs(arch)}


def _named_seed(master_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([master_seed, zlib.crc32(name.encode())])
    )


def init_params(arch: ArchConfig, seed: int) -> dict[str, np.ndarray]:
    """Seeded initialization, one generator per parameter keyed by
    (seed, name) so adding or removing unrelated parameters never
    reshuffles the others. Biases are zero. Conv weights use the
    relu-variance-preserving bound sqrt(6/fan_in) (plain 1/sqrt(fan_in)
    shrinks the deep features to ~1e-6, which starves the bilinear map);
    dense layers keep the 1/sqrt(fan_in) bound."""
    dtype = np.float64 if arch.dtype == "float64" else np.float32
    params: dict[str, np.ndarray] = {}
    for name, shape, fan_in, gain in param_specs(arch):
        if name.endswith(".b"):
            params[name] = np.zeros(shape, dtype=dtype)
        else:
            rng = _named_seed(seed, name)
            bound = (np.sqrt(6.0) if gain == "relu" else 1.0) / np.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return params


# ---------------------------------------------------------------------------
# differentiable conv layers (owned by this module, not tensor_ops)
# ---------------------------------------------------------------------------


_COORD_CACHE: dict[tuple[int, str], np.ndarray] = {}


def _coord_channels(size: int, dtype) -> np.ndarray:
    """Two constant ramp channels holding normalized row/col coordinates."""
    key = (size, np.dtype(dtype).name)
    if key not in _COORD_CACHE:
        ramp = np.linspace(-1.0, 1.0, size, dtype=dtype)
        rows = np.broadcast_to(ramp[:, None], (size, size))
        cols = np.broadcast_to(ramp[None, :], (size, size))
        _COORD_CACHE[key] = np.ascontiguousarray(np.stack([rows, cols]))
    return _COORD_CACHE[key]


def conv2d_graph(x, weight, bias, pad: int = 1) -> ad.Var:
    """3x3-style convolution via im2col, stride 1."""
    x, weight, bias = ad.lift(x), ad.lift(weight), ad.lift(bias)
    xv, wv, bv = x.value, weight.value, bias.value
    if xv.ndim != 3 or wv.ndim != 4 or xv.shape[0] != wv.shape[1]:
        raise ShapeError(f"conv2d shapes incompatible: {xv.shape} with {wv.shape}")
    cout, cin, kh, kw = wv.shape
    _, H, W = xv.shape
    if pad:
        xp = np.zeros((cin, H + 2 * pad, W + 2 * pad), dtype=xv.dtype)
        xp[:, pad : pad + H, pad : pad + W] = xv
    else:
        xp = xv
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    ho, wo = win.shape[1], win.shape[2]
    cols = np.ascontiguousarray(win.transpose(1, 2, 0, 3, 4)).reshape(
        ho * wo, cin * kh * kw
    )
    wmat = wv.reshape(cout, -1)
    out = (cols @ wmat.T + bv).T.reshape(cout, ho, wo)

    def vjp(up):
        umat = up.reshape(cout, -1).T
        gw = (umat.T @ cols).reshape(wv.shape)
        gb = umat.sum(axis=0)
        gcols = (umat @ wmat).reshape(ho, wo, cin, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + ho, j : j + wo] += gcols[:, :, :, i, j].transpose(2, 0, 1)
        gx = gxp[:, pad : pad + H, pad : pad + W] if pad else gxp
        return gx, gw, gb

    return ad.Var(np.ascontiguousarray(out), (x, weight, bias), vjp)


def conv1x1_graph(x, weight, bias) -> ad.Var:
    """Pointwise channel map: weight (C_out, C_in) applied at every location."""
    x, weight, bias = ad.lift(x), ad.lift(weight), ad.lift(bias)
    xv, wv, bv = x.value, weight.value, bias.value
    if xv.ndim != 3 or wv.ndim != 2 or wv.shape[1] != xv.shape[0]:
        raise ShapeError(f"conv1x1 shapes incompatible: {xv.shape} with {wv.shape}")
    out = np.tensordot(wv, xv, axes=([1], [0])) + bv[:, None, None]

    def vjp(up):
        return (
            np.tensordot(wv.T, up, axes=([1], [0])),
            np.tensordot(up, xv, axes=([1, 2], [1, 2])),
            up.sum(axis=(1, 2)),
        )

    return ad.Var(out, (x, weight, bias), vjp)


def _resample_graph(v: ad.Var, target: tuple[int, int]) -> ad.Var:
    """Average-pool down / replicate up to the target grid, per axis."""
    _, H, W = v.value.shape
    th, tw = target
    kh = H // th if th <= H else 1
    kw = W // tw if tw <= W else 1
    if (th <= H and H % th) or (tw <= W and W % tw):
        raise ShapeError(f"cannot resample {(H, W)} to {target}")
    if (kh, kw) != (1, 1):
        v = ad.avg_pool2d(v, (kh, kw))
    uh = th // v.value.shape[1] if th > v.value.shape[1] else 1
    uw = tw // v.value.shape[2] if tw > v.value.shape[2] else 1
    if (th > H and th % H) or (tw > W and tw % W):
        raise ShapeError(f"cannot resample {(H, W)} to {target}")
    if (uh, uw) != (1, 1):
        v = ad.upsample_nearest(v, (uh, uw))
    return v


# ---------------------------------------------------------------------------
# the model
# ---------------------------------------------------------------------------

_ATT_VAR_KEYS = {
    "w1_a": "att.mlp1_a.w",
    "b1_a": "att.mlp1_a.b",
    "w2_a": "att.mlp2_a.w",
    "b2_a": "att.mlp2_a.b",
    "w1_l": "att.mlp1_l.w",
    "b1_l": "att.mlp1_l.b",
    "w2_l": "att.mlp2_l.w",
    "b2_l": "att.mlp2_l.b",
}


@dataclass
class ForwardResult:
    embedding: ad.Var
    attr_scores: ad.Var
    id_logits: ad.Var
    heatmaps: ad.Var | None
    alpha_a: ad.Var | None
    alpha_l: ad.Var | None
    va: ad.Var | None = None
    vl: ad.Var | None = None


class ToyModel:
    def __init__(self, arch: ArchConfig, seed: int, params: dict[str, np.ndarray] | None = None):
        self.arch = arch
        self.seed = seed
        self.params = params if params is not None else init_params(arch, seed)
        expected = param_names(arch)
        if set(self.params) != expected:
            missing = expected - set(self.params)
            extra = set(self.params) - expected
            raise ConfigError(f"parameter set mismatch: missing {missing}, extra {extra}")
        self.sketch_a = self.sketch_l = None
        self.location_sketches = None
        if arch.branch_mode == "two_branch" and arch.fusion_mode == "cbp":
            seed_a = int(np.random.SeedSequence([seed, zlib.crc32(b"sketch_a")]).generate_state(1)[0])
            seed_l = int(np.random.SeedSequence([seed, zlib.crc32(b"sketch_l")]).generate_state(1)[0])
            self.sketch_a = sk.make_sketch_params(arch.attr_feat_channels, arch.sketch_dim, seed_a)
            self.sketch_l = sk.make_sketch_params(arch.fusion_channels_l, arch.sketch_dim, seed_l)
            if arch.per_location_sketch:
                h, w = arch.target_spatial
                loc_seed = int(np.random.SeedSequence([seed, zlib.crc32(b"sketch_loc")]).generate_state(1)[0])
                self.location_sketches = fu.make_per_location_sketches(
                    arch.attr_feat_channels, arch.fusion_channels_l, arch.sketch_dim, h, w, loc_seed
                )

    # -- forward -----------------------------------------------------------

    @property
    def dtype(self):
        return np.float64 if self.arch.dtype == "float64" else np.float32

    def _check_image(self, image) -> np.ndarray:
        image = np.asarray(image, dtype=self.dtype)
        s = self.arch.image_size
        if image.shape != (3, s, s):
            raise ShapeError(f"expected image (3, {s}, {s}), got {image.shape}")
        return image

    def _attention_meta(self) -> att.CoAttentionParams:
        p = self.params
        return att.CoAttentionParams(
            w1_a=p["att.mlp1_a.w"], b1_a=p["att.mlp1_a.b"],
            w2_a=p["att.mlp2_a.w"], b2_a=p["att.mlp2_a.b"],
            w1_l=p["att.mlp1_l.w"], b1_l=p["att.mlp1_l.b"],
            w2_l=p["att.mlp2_l.w"], b2_l=p["att.mlp2_l.b"],
            weight_mode=self.arch.weight_mode,
            guidance_mode=self.arch.guidance_mode,
        )

    def forward_graph(self, image, pv: dict[str, ad.Var | np.ndarray] | None = None) -> ForwardResult:
        """Build the full differentiable forward pass.

        pv maps parameter names to Vars (training) or arrays (inference).
        """
        arch = self.arch
        if pv is None:
            pv = self.params
        x = ad.lift(self._check_image(image) if not isinstance(image, ad.Var) else image)

        h = x
        for i in range(len(arch.attr_channels)):
            h = ad.relu(conv2d_graph(h, pv[f"attr.conv{i}.w"], pv[f"attr.conv{i}.b"]))
            h = ad.avg_pool2d(h, (2, 2))
        va = ad.relu(conv1x1_graph(h, pv["attr.feat.w"], pv["attr.feat.b"]))
        attr_scores = ad.sigmoid(
            ad.linear(pv["attr.head.w"], pv["attr.head.b"], ad.global_avg_pool(va))
        )

        if arch.branch_mode == "attribute_only":
            emb = fu.finalize_graph(va, pv["fuse.fc.w"], pv["fuse.fc.b"], arch.eps)
            id_logits = ad.linear(pv["id.w"], pv["id.b"], emb)
            return ForwardResult(emb, attr_scores, id_logits, None, None, None, va=va)

        g = ad.concat_channels(x, ad.lift(_coord_channels(arch.image_size, self.dtype)))
        for i in range(len(arch.lm_stem_channels)):
            if 1 <= i <= arch.lm_stem_pools:
                g = ad.avg_pool2d(g, (2, 2))
            g = ad.relu(conv2d_graph(g, pv[f"lm.stem{i}.w"], pv[f"lm.stem{i}.b"]))
        skips = [g]
        for k in range(1, 4):
            g = ad.avg_pool2d(g, (2, 2))
            g = ad.relu(conv2d_graph(g, pv[f"lm.down{k}.w"], pv[f"lm.down{k}.b"]))
            skips.append(g)
        u = skips[-1]
        for k, skip in zip(range(1, 4), (skips[2], skips[1], skips[0])):
            u = ad.upsample_nearest(u, (2, 2))
            u = ad.add(u, skip)
            u = ad.relu(conv2d_graph(u, pv[f"lm.up{k}.w"], pv[f"lm.up{k}.b"]))
        vl_feat = ad.relu(conv1x1_graph(u, pv["lm.feat.w"], pv["lm.feat.b"]))
        heatmaps = conv1x1_graph(vl_feat, pv["lm.head.w"], pv["lm.head.b"])
        vl = heatmaps if arch.landmark_mode == "heatmaps" else vl_feat

        if arch.attention and not arch.force_unit_alphas:
            mlp_vars = {short: pv[name] for short, name in _ATT_VAR_KEYS.items()}
            alpha_a, alpha_l = att.co_attention_graph(va, vl, self._attention_meta(), mlp_vars)
        else:
            alpha_a = ad.lift(np.ones(arch.attr_feat_channels, dtype=self.dtype))
            alpha_l = ad.lift(np.ones(arch.fusion_channels_l, dtype=self.dtype))
        va_t = _resample_graph(ad.channel_scale(va, alpha_a), arch.target_spatial)
        vl_t = _resample_graph(ad.channel_scale(vl, alpha_l), arch.target_spatial)

        if arch.fusion_mode == "cbp":
            if self.location_sketches is not None:
                fused = fu.spatial_cbp_per_location_graph(va_t, vl_t, self.location_sketches)
            else:
                fused = fu.spatial_cbp_graph(va_t, vl_t, self.sketch_a, self.sketch_l)
        else:
            cfg = fu.FusionConfig(
                sketch_dim=arch.sketch_dim,
                target_spatial=arch.target_spatial,
                fusion_mode=arch.fusion_mode,
                out_dim=arch.out_dim,
                eps=arch.eps,
            )
            adapter = None
            if arch.fusion_mode in ("mul", "sum"):
                adapter = (pv["fuse.adapter.w"], pv["fuse.adapter.b"])
            fused = fu.fuse_alternative_graph(va_t, vl_t, cfg, adapter)
        emb = fu.finalize_graph(fused, pv["fuse.fc.w"], pv["fuse.fc.b"], arch.eps)
        id_logits = ad.linear(pv["id.w"], pv["id.b"], emb)
        return ForwardResult(emb, attr_scores, id_logits, heatmaps, alpha_a, alpha_l, va, vl)

    def forward_embed(self, image):
        """Embedding plus all head outputs as plain arrays."""
        r = self.forward_graph(image)
        heat = r.heatmaps.value if r.heatmaps is not None else None
        alphas = (
            (r.alpha_a.value, r.alpha_l.value) if r.alpha_a is not None else None
        )
        return r.embedding.value, r.attr_scores.value, heat, alphas

    def loss_graph(
        self,
        image,
        targets: dict,
        lambda_attr: float = 1.0,
        lambda_lm: float = 1.0,
        pv=None,
        use_ce: bool = True,
        use_attr: bool = True,
        use_lm: bool = True,
        diagnostics: ls.LossDiagnostics | None = None,
    ):
        """Total loss Var plus the per-objective components for one sample."""
        r = self.forward_graph(image, pv)
        parts: dict[str, ad.Var] = {}
        total = None
        if use_ce:
            parts["ce"] = ls.id_cross_entropy_graph(r.id_logits, targets["id"])
            total = parts["ce"]
        if use_attr:
            parts["attr"] = ls.attribute_bce_graph(r.attr_scores, targets["attr"], diagnostics)
            term = ad.scale(parts["attr"], lambda_attr)
            total = term if total is None else ad.add(total, term)
        if use_lm:
            if r.heatmaps is None:
                raise ConfigError("landmark loss requested but model has no landmark branch")
            parts["lm"] = ls.landmark_graph(r.heatmaps, targets["lm"], diagnostics)
            term = ad.scale(parts["lm"], lambda_lm)
            total = term if total is None else ad.add(total, term)
        if total is None:
            raise ConfigError("at least one loss term must be enabled")
        return total, parts

    # -- persistence --------------------------------------------------------

    def save(self, directory) -> None:
        """Checkpoint: one tensor file per parameter plus a JSON manifest.

        Sketches are stored as (C, d, seed) and regenerated on load, never
        as raw sign/bucket arrays.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = {}
        for idx, (name, arr) in enumerate(sorted(self.params.items())):
            fname = f"param_{idx:04d}.tnsr"
            tensor_io.write_tensor(directory / fname, arr)
            entries[name] = {"file": fname, "shape": list(arr.shape)}
        manifest = {
            "format": "toy-model-checkpoint",
            "version": 1,
            "arch": self.arch.to_dict(),
            "seed": self.seed,
            "params": entries,
        }
        (directory / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=1) + "\n"
        )

    @staticmethod
    def load(directory) -> "ToyModel":
        directory = Path(directory)
        manifest = json.loads((directory / "manifest.json").read_text())
        if manifest.get("format") != "toy-model-checkpoint":
            raise ConfigError(f"{directory}: not a model checkpoint")
        arch = ArchConfig.from_dict(manifest["arch"])
        params = {
            name: tensor_io.read_tensor(directory / entry["file"])
            for name, entry in manifest["params"].items()
        }
        return ToyModel(arch, manifest["seed"], params)


def build_toy_model(arch: ArchConfig | None = None, seed: int = 0, **overrides) -> ToyModel:
    """Deterministic model construction from a config (plus field overrides)."""
    arch = arch or ArchConfig()
    if overrides:
        arch = replace(arch, **overrides)
    return ToyModel(arch, seed)
