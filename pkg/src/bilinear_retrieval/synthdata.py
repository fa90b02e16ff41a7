"""Synthetic compositional dataset: items are sets of colored motifs placed
on a grid, so that many item pairs share the exact same motifs (attributes)
and differ only in where the motifs sit. Queries get brightness and
translation jitter that gallery renders never see, mimicking a
consumer-photo / catalog-photo domain gap at desk scale.
"""

from __future__ import annotations

import colorsys
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensor_io
from .errors import ConfigError, ManifestError

MANIFEST_HEADER = "synthset 1"


@dataclass(frozen=True)
class SynthSpec:
    num_items: int = 50
    renders_per_item: int = 4
    gallery_renders: int = 2
    query_renders: int = 2
    image_size: int = 64
    # 2x2 grid: every 4-motif item occupies all cells, so cell occupancy
    # carries no identity signal; only the motif-to-cell assignment does
    grid: int = 2
    num_attributes: int = 10
    num_landmarks: int = 4
    train_jitter_px: int = 6
    train_brightness: tuple[float, float] = (0.95, 1.05)
    query_jitter_px: int = 6
    query_brightness: tuple[float, float] = (0.7, 0.9)
    drop_motif_rate: float = 0.2
    motif_scale: float = 0.25
    background: float = 0.15
    seed: int = 0

    def __post_init__(self):
        if min(self.num_items, self.renders_per_item, self.gallery_renders,
               self.query_renders, self.image_size, self.grid,
               self.num_attributes, self.num_landmarks) < 1:
            raise ConfigError("all counts in the dataset spec must be >= 1")
        if self.image_size % self.grid:
            raise ConfigError("image size must be a multiple of the grid count")

    @property
    def num_pairs(self) -> int:
        """Confusable pairs to generate: a quarter of the items, capped by
        how many disjoint pairs fit."""
        return min(math.ceil(self.num_items / 4), self.num_items // 2)


@dataclass(frozen=True)
class ItemSignature:
    """What an item is: which motifs it carries and the grid cell of each.

    motifs are sorted attribute indices; cells[k] is the flat grid cell of
    motifs[k]. Landmark k marks the center of motifs[k]; slots beyond
    len(motifs) are invisible.
    """

    motifs: tuple[int, ...]
    cells: tuple[int, ...]


@dataclass
class SampleRecord:
    image: np.ndarray
    item_id: int
    attributes: np.ndarray
    landmarks: list[tuple[int, int, int]]
    render_id: str


@dataclass
class DatasetBundle:
    spec: SynthSpec
    items: list[ItemSignature]
    confusable_pairs: list[tuple[int, int]]
    train: list[SampleRecord]
    query: list[SampleRecord]
    gallery: list[SampleRecord]

    def split(self, name: str) -> list[SampleRecord]:
        return {"train": self.train, "query": self.query, "gallery": self.gallery}[name]


def _palette(n: int) -> np.ndarray:
    colors = [colorsys.hsv_to_rgb(i / n, 0.85, 0.95) for i in range(n)]
    return np.asarray(colors)


def _draw_signature(rng, spec: SynthSpec, used: set, motifs=None) -> ItemSignature:
    k = spec.num_landmarks
    cells_total = spec.grid * spec.grid
    if k > spec.num_attributes or k > cells_total:
        raise ConfigError(
            f"{k} motifs per item need >= {k} attributes and grid cells"
        )
    for _ in range(2000):
        if motifs is None:
            size = k if (k == 1 or rng.random() >= spec.drop_motif_rate) else k - 1
            m = tuple(sorted(rng.choice(spec.num_attributes, size=size, replace=False).tolist()))
        else:
            m = motifs
        cells = tuple(rng.choice(cells_total, size=len(m), replace=False).tolist())
        sig = ItemSignature(m, cells)
        if sig not in used:
            used.add(sig)
            return sig
    raise ConfigError(
        "could not draw a fresh item signature; the spec asks for more "
        "distinct items than the attribute/grid combinations allow"
    )


def _make_items(rng, spec: SynthSpec):
    used: set[ItemSignature] = set()
    items: list[ItemSignature] = []
    pairs: list[tuple[int, int]] = []
    for _ in range(spec.num_pairs):
        first = _draw_signature(rng, spec, used)
        cells = list(first.cells)
        if len(cells) >= 2:
            i, j = rng.choice(len(cells), size=2, replace=False)
            cells[i], cells[j] = cells[j], cells[i]
            twin = ItemSignature(first.motifs, tuple(cells))
            if twin in used:
                twin = _draw_signature(rng, spec, used, first.motifs)
            else:
                used.add(twin)
        else:
            twin = _draw_signature(rng, spec, used, first.motifs)
        pairs.append((len(items), len(items) + 1))
        items.extend([first, twin])
    while len(items) < spec.num_items:
        items.append(_draw_signature(rng, spec, used))
    return items[: spec.num_items], [p for p in pairs if p[1] < spec.num_items]


def render_item(
    sig: ItemSignature,
    spec: SynthSpec,
    shift: tuple[int, int] = (0, 0),
    brightness: float = 1.0,
) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Rasterize one item; returns the image and landmark (row, col, vis)."""
    s = spec.image_size
    cell = s // spec.grid
    radius = max(2, int(spec.motif_scale * cell))
    palette = _palette(spec.num_attributes)
    img = np.full((3, s, s), spec.background)
    landmarks: list[tuple[int, int, int]] = []
    rr, cc = np.mgrid[0:s, 0:s]
    for k, (motif, flat_cell) in enumerate(zip(sig.motifs, sig.cells)):
        gr, gc = divmod(flat_cell, spec.grid)
        r = gr * cell + cell // 2 + shift[0]
        c = gc * cell + cell // 2 + shift[1]
        r = int(np.clip(r, radius, s - 1 - radius))
        c = int(np.clip(c, radius, s - 1 - radius))
        if motif % 2 == 0:
            mask = (np.abs(rr - r) <= radius) & (np.abs(cc - c) <= radius)
        else:
            mask = (rr - r) ** 2 + (cc - c) ** 2 <= radius**2
        img[:, mask] = palette[motif][:, None]
        landmarks.append((r, c, 1))
    for _ in range(len(sig.motifs), spec.num_landmarks):
        landmarks.append((0, 0, 0))
    np.clip(img * brightness, 0.0, 1.0, out=img)
    return img, landmarks


def _attributes_of(sig: ItemSignature, n: int) -> np.ndarray:
    bits = np.zeros(n, dtype=np.uint8)
    bits[list(sig.motifs)] = 1
    return bits


def generate_dataset(spec: SynthSpec) -> DatasetBundle:
    """Deterministic dataset build: items, then train/gallery/query renders.

    Gallery renders are clean; training renders carry mild jitter; query
    renders use the (disjoint) query jitter and brightness ranges.
    """
    rng = np.random.default_rng(spec.seed)
    items, pairs = _make_items(rng, spec)

    def render_split(split: str, count: int, jitter_px: int, bright_range) -> list[SampleRecord]:
        records = []
        for item_id, sig in enumerate(items):
            for k in range(count):
                if jitter_px or bright_range != (1.0, 1.0):
                    shift = tuple(rng.integers(-jitter_px, jitter_px + 1, size=2).tolist())
                    brightness = float(rng.uniform(*bright_range))
                else:
                    shift, brightness = (0, 0), 1.0
                img, lms = render_item(sig, spec, shift, brightness)
                records.append(
                    SampleRecord(
                        image=img,
                        item_id=item_id,
                        attributes=_attributes_of(sig, spec.num_attributes),
                        landmarks=lms,
                        render_id=f"{split}-{item_id:04d}-{k:02d}",
                    )
                )
        return records

    train = render_split("train", spec.renders_per_item, spec.train_jitter_px, spec.train_brightness)
    gallery = render_split("gallery", spec.gallery_renders, 0, (1.0, 1.0))
    query = render_split("query", spec.query_renders, spec.query_jitter_px, spec.query_brightness)
    return DatasetBundle(spec, items, pairs, train, query, gallery)


def confusable_item_ids(bundle: DatasetBundle) -> set[int]:
    return {i for pair in bundle.confusable_pairs for i in pair}


# ---------------------------------------------------------------------------
# manifest I/O
# ---------------------------------------------------------------------------


def _spec_json(spec: SynthSpec) -> str:
    return json.dumps(asdict(spec), sort_keys=True, separators=(",", ":"))


def write_dataset(bundle: DatasetBundle, out_dir) -> Path:
    """Write images as tensor files plus one line-delimited manifest."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    lines = [MANIFEST_HEADER, f"spec {_spec_json(bundle.spec)}"]
    for sig in bundle.items:
        lines.append(
            "item "
            + ",".join(map(str, sig.motifs))
            + " "
            + ",".join(map(str, sig.cells))
        )
    for a, b in bundle.confusable_pairs:
        lines.append(f"pair {a} {b}")
    for split in ("train", "query", "gallery"):
        lines.append(f"split {split}")
        for rec in bundle.split(split):
            rel = f"images/{rec.render_id}.tnsr"
            tensor_io.write_tensor(out_dir / rel, rec.image)
            bits = "".join(str(int(b)) for b in rec.attributes)
            lms = " ".join(f"{r},{c},{v}" for r, c, v in rec.landmarks)
            lines.append(f"record {rel} {rec.item_id} {bits} {lms}")
    manifest = out_dir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def read_dataset(manifest_path) -> DatasetBundle:
    """Parse a manifest back into a bundle, loading the image tensors."""
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    lines = manifest_path.read_text().splitlines()
    if not lines or lines[0] != MANIFEST_HEADER:
        raise ManifestError(1, f"expected header {MANIFEST_HEADER!r}")
    spec = None
    items: list[ItemSignature] = []
    pairs: list[tuple[int, int]] = []
    splits: dict[str, list[SampleRecord]] = {"train": [], "query": [], "gallery": []}
    current_split: str | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        kind, _, rest = line.partition(" ")
        try:
            if kind == "spec":
                raw = json.loads(rest)
                for key in ("train_brightness", "query_brightness"):
                    raw[key] = tuple(raw[key])
                spec = SynthSpec(**raw)
            elif kind == "item":
                motifs_s, cells_s = rest.split(" ")
                items.append(
                    ItemSignature(
                        tuple(int(x) for x in motifs_s.split(",")),
                        tuple(int(x) for x in cells_s.split(",")),
                    )
                )
            elif kind == "pair":
                a, b = rest.split(" ")
                pairs.append((int(a), int(b)))
            elif kind == "split":
                if rest not in splits:
                    raise ValueError(f"unknown split {rest!r}")
                current_split = rest
            elif kind == "record":
                if current_split is None:
                    raise ValueError("record before any split line")
                parts = rest.split(" ")
                rel, item_id, bits = parts[0], int(parts[1]), parts[2]
                if not set(bits) <= {"0", "1"}:
                    raise ValueError(f"attribute bits must be 0/1, got {bits!r}")
                landmarks = []
                for triple in parts[3:]:
                    r, c, v = triple.split(",")
                    landmarks.append((int(r), int(c), int(v)))
                splits[current_split].append(
                    SampleRecord(
                        image=tensor_io.read_tensor(root / rel),
                        item_id=item_id,
                        attributes=np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0"),
                        landmarks=landmarks,
                        render_id=Path(rel).stem,
                    )
                )
            else:
                raise ValueError(f"unknown line kind {kind!r}")
        except ManifestError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ManifestError(lineno, str(exc)) from exc
    if spec is None:
        raise ManifestError(len(lines), "manifest carries no spec line")
    return DatasetBundle(spec, items, pairs, splits["train"], splits["query"], splits["gallery"])
