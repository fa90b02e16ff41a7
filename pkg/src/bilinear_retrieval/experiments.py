"""End-to-end experiment plumbing: embed datasets, evaluate retrieval,
and run the ablation variants as configuration presets."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import retrieval as rt
from . import training as tr
from .config import ExperimentConfig
from .errors import ConfigError
from .model import ToyModel, build_toy_model
from .synthdata import DatasetBundle, confusable_item_ids

# Ablation table rows: name -> (arch overrides, train overrides)
VARIANTS: dict[str, tuple[dict, dict]] = {
    "single-branch": (
        {"branch_mode": "attribute_only", "attention": False, "fusion_mode": "none"},
        {"lambda_attr": 0.0, "lambda_lm": 0.0},
    ),
    "single-branch-attr": (
        {"branch_mode": "attribute_only", "attention": False, "fusion_mode": "none"},
        {"lambda_lm": 0.0},
    ),
    "two-branch-8lm": ({"landmark_mode": "heatmaps", "attention": False}, {}),
    "two-branch-256lm": ({"landmark_mode": "features", "attention": False}, {}),
    "cat": ({"fusion_mode": "concat", "attention": False}, {}),
    "mul": ({"fusion_mode": "mul", "attention": False}, {}),
    "sum": ({"fusion_mode": "sum", "attention": False}, {}),
    "separate-attention": ({"guidance_mode": "separate"}, {}),
    "softmax": ({"weight_mode": "softmax"}, {}),
    "ahbn": ({}, {}),
    "ahbn-unit-alphas": ({"force_unit_alphas": True}, {}),
}


def variant_config(cfg: ExperimentConfig, variant: str) -> ExperimentConfig:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
    arch_over, train_over = VARIANTS[variant]
    return replace(
        cfg,
        arch=replace(cfg.arch, **arch_over),
        train=replace(cfg.train, **train_over) if train_over else cfg.train,
    ).validate()


def embed_records(model: ToyModel, records) -> tuple[np.ndarray, list, list, list, list]:
    """Forward every record; returns embeddings, item ids, render ids,
    attribute scores and predicted heatmaps (None entries for single-branch)."""
    embeddings, item_ids, render_ids, scores, heatmaps = [], [], [], [], []
    for rec in records:
        f, attr_scores, heat, _ = model.forward_embed(rec.image.astype(model.dtype))
        embeddings.append(f)
        item_ids.append(rec.item_id)
        render_ids.append(rec.render_id)
        scores.append(attr_scores)
        heatmaps.append(heat)
    return np.asarray(embeddings), item_ids, render_ids, scores, heatmaps


def evaluate_model(
    model: ToyModel,
    bundle: DatasetBundle,
    cfg: ExperimentConfig,
    config_hash: str = "",
) -> rt.RetrievalReport:
    """Embed gallery and queries, rank, and compute all three metric families."""
    g_emb, g_ids, g_rids, _, _ = embed_records(model, bundle.gallery)
    q_emb, q_ids, q_rids, q_scores, q_heat = embed_records(model, bundle.query)
    gallery = rt.Gallery(g_emb, g_ids, g_rids)
    ranked = rt.rank_queries(q_emb, gallery, q_rids, cfg.exclude_self)
    ranks = rt.first_match_ranks(ranked, q_ids, g_ids)
    acc = rt.topk_accuracy(ranked, q_ids, g_ids, cfg.eval_ks)

    arch = model.arch
    nme: list[float | None] = []
    if arch.branch_mode == "two_branch":
        targets = [tr.make_targets(rec, arch)["lm"] for rec in bundle.query]
        nme = rt.landmark_nme(q_heat, targets)
    attr_targets = np.asarray([rec.attributes for rec in bundle.query])
    aps, mean_ap = rt.attribute_average_precision(np.asarray(q_scores), attr_targets)

    confusable = confusable_item_ids(bundle)
    conf_mask = np.asarray([qid in confusable for qid in q_ids])
    extra = {
        "num_queries": len(q_ids),
        "gallery_size": len(g_ids),
        "confusable_queries": int(conf_mask.sum()),
        "confusable_top1": (
            float(((ranks == 1) & conf_mask).sum() / conf_mask.sum())
            if conf_mask.any()
            else None
        ),
    }
    if cfg.dump_attention and arch.branch_mode == "two_branch" and arch.attention:
        rows = []
        for rec in bundle.query:
            _, _, _, alphas = model.forward_embed(rec.image.astype(model.dtype))
            rows.append(
                {
                    "render_id": rec.render_id,
                    "alpha_a": [round(float(x), 10) for x in alphas[0]],
                    "alpha_l": [round(float(x), 10) for x in alphas[1]],
                }
            )
        extra["attention"] = rows
    return rt.RetrievalReport(
        acc_at_k=acc,
        per_query_ranks=[int(r) for r in ranks],
        nme=nme,
        attribute_ap=aps,
        map=mean_ap,
        config_hash=config_hash,
        seed=cfg.seed,
        extra=extra,
    )


def train_variant(
    cfg: ExperimentConfig,
    bundle: DatasetBundle,
    variant: str = "ahbn",
) -> tuple[ToyModel, tr.TrainHistory, ExperimentConfig]:
    vcfg = variant_config(cfg, variant)
    model = build_toy_model(vcfg.arch, seed=vcfg.seed)
    history = tr.run_training(model, bundle.train, vcfg.train, two_phase=vcfg.two_phase)
    return model, history, vcfg


def metric_row(report: rt.RetrievalReport) -> dict:
    """Flat comparison row for ablation tables (config hash excluded)."""
    row = {f"acc@{k}": v for k, v in sorted(report.acc_at_k.items())}
    row["map"] = report.map
    row["confusable_top1"] = report.extra.get("confusable_top1")
    row["mean_rank"] = float(np.mean([r for r in report.per_query_ranks if r > 0]))
    return row
