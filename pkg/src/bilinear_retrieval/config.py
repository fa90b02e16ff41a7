"""Experiment configuration: profiles, file overrides, and hashing.

A run is described by one JSON document (arch/train/synth sections plus
evaluation settings). The resolved document is written into every run
directory and its sha256 is embedded in all reports, so any metrics file
points back to the exact configuration that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .model import ArchConfig, paper_shape_arch
from .synthdata import SynthSpec
from .training import TrainConfig, paper_train_config

PROFILES = ("desk", "paper-shape")
DEFAULT_KS = (1, 10, 20, 30, 40, 50)


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str = "desk"
    seed: int = 0
    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)
    eval_ks: tuple[int, ...] = DEFAULT_KS
    exclude_self: bool = True
    two_phase: bool = True
    dump_attention: bool = False
    # config stub only: augmentation is out of scope at desk scale
    augment: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        a, s = self.arch, self.synth
        problems = []
        if a.num_attributes != s.num_attributes:
            problems.append(
                f"arch.num_attributes {a.num_attributes} != synth {s.num_attributes}"
            )
        if a.num_landmarks != s.num_landmarks:
            problems.append(
                f"arch.num_landmarks {a.num_landmarks} != synth {s.num_landmarks}"
            )
        if a.num_classes != s.num_items:
            problems.append(f"arch.num_classes {a.num_classes} != synth items {s.num_items}")
        if a.image_size != s.image_size:
            problems.append(f"arch.image_size {a.image_size} != synth {s.image_size}")
        if any(k < 1 for k in self.eval_ks):
            problems.append("eval ks must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arch"] = self.arch.to_dict()
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def profile_config(profile: str) -> ExperimentConfig:
    if profile == "desk":
        return ExperimentConfig()
    if profile == "paper-shape":
        arch = paper_shape_arch()
        synth = SynthSpec(
            num_items=arch.num_classes,
            num_attributes=arch.num_attributes,
            num_landmarks=arch.num_landmarks,
            image_size=arch.image_size,
        )
        return ExperimentConfig(
            profile="paper-shape", arch=arch, train=paper_train_config(), synth=synth
        )
    raise ConfigError(f"unknown profile {profile!r}; choose from {PROFILES}")


def _apply_section(base, overrides: dict, section: str):
    unknown = set(overrides) - set(asdict(base))
    if unknown:
        raise ConfigError(f"unknown keys in {section!r} section: {sorted(unknown)}")
    coerced = {}
    for key, val in overrides.items():
        coerced[key] = tuple(val) if isinstance(getattr(base, key), tuple) else val
    try:
        return replace(base, **coerced)
    except TypeError as exc:
        raise ConfigError(f"bad {section} overrides: {exc}") from exc


def load_experiment_config(
    path=None, profile: str | None = None, seed: int | None = None
) -> ExperimentConfig:
    """Resolve profile defaults, then file overrides, then CLI overrides."""
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config document must be a JSON object")
    cfg = profile_config(profile or doc.get("profile", "desk"))
    top = {
        k: v
        for k, v in doc.items()
        if k in ("seed", "exclude_self", "two_phase", "dump_attention", "augment")
    }
    cfg = _apply_section(cfg, top, "top-level")
    if "eval_ks" in doc:
        cfg = replace(cfg, eval_ks=tuple(doc["eval_ks"]))
    if "arch" in doc:
        cfg = replace(cfg, arch=_apply_section(cfg.arch, doc["arch"], "arch"))
    if "train" in doc:
        cfg = replace(cfg, train=_apply_section(cfg.train, doc["train"], "train"))
    if "synth" in doc:
        cfg = replace(cfg, synth=_apply_section(cfg.synth, doc["synth"], "synth"))
    if seed is not None:
        cfg = replace(
            cfg,
            seed=seed,
            arch=cfg.arch,
            train=replace(cfg.train, seed=seed),
            synth=replace(cfg.synth, seed=seed),
        )
    return cfg.validate()


def write_resolved_config(cfg: ExperimentConfig, out_dir) -> str:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(cfg.canonical_json())
    return cfg.config_hash()
