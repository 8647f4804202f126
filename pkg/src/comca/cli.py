"""Command-line entry point.

Exit codes: 0 ok, 1 config error, 2 data error, 3 network error,
4 internal error.
"""

from __future__ import annotations

import json
import shutil
import sys
import traceback
from pathlib import Path

import click
import numpy as np

from . import _kernels
from .cachebuild import (
    RNG_ALGORITHM,
    build_cache,
    load_cache,
    save_cache,
)
from .compat import CompatibilityTable, MatchConfig, count_cooccurrences
from .config import RunConfig
from .embeddings import EmbeddingMatrix, Vocabulary, load_embeddings
from .errors import ComcaError, ConfigError, DataError
from .evaluation import AnnotationSet, evaluate
from .labeling import make_labels, save_labels
from .llm import HttpLlmClient, ScoreCache, llm_score_pairs
from .scoring import (
    ScoreMatrix,
    attr_given_object_from_compat,
    comca_cache_scores,
    fuse_final,
    image_based_scores,
    iap_scores,
    load_scores,
    save_scores,
    softmax_rows,
    tip_cache_scores,
    zero_shot_scores,
)


def _cfg(ctx) -> RunConfig:
    return ctx.obj["cfg"]


def _log(ctx, message: str):
    if ctx.obj.get("verbose"):
        click.echo(message, err=True)


def _load_emb(path: str, what: str) -> EmbeddingMatrix:
    if not path:
        raise ConfigError(f"no {what} container configured")
    if not Path(path).exists():
        raise DataError(f"{what} container does not exist: {path}")
    return load_embeddings(path)


def _load_vocab(path: str) -> Vocabulary:
    if not path:
        raise ConfigError("no vocabulary path configured")
    if not Path(path).exists():
        raise DataError(f"vocabulary does not exist: {path}")
    return Vocabulary.from_json(path)


@click.group()
@click.option("--config", "config_path", default=None,
              help="JSON config file; flags override its fields.")
@click.option("--threads", type=int, default=None,
              help="Worker count for sharded corpus counting (0 = hardware).")
@click.option("--seed", type=int, default=None, help="RNG seed.")
@click.option("--verbose", is_flag=True, help="Chatty progress on stderr.")
@click.pass_context
def cli(ctx, config_path, threads, seed, verbose):
    """Compatibility-aware cache pipeline for attribute detection."""
    cfg = RunConfig.from_file(config_path) if config_path else RunConfig()
    cfg.apply({"threads": threads, "seed": seed})
    ctx.obj = {"cfg": cfg, "verbose": verbose}


@cli.command("compat")
@click.option("--vocab", default=None, help="Vocabulary JSON.")
@click.option("--corpus", default=None, help="Caption TSV (id<TAB>caption).")
@click.option("--out", required=True, help="Compatibility table output path.")
@click.option("--db-only", is_flag=True, help="Skip LLM scoring entirely.")
@click.option("--combine-mode", default=None,
              type=click.Choice(["multiply", "sum", "llm_only", "db_only",
                                 "uniform"]))
@click.option("--smoothing", default=None, type=click.Choice(["none", "add-one"]))
@click.option("--llm-endpoint", default=None)
@click.option("--llm-model", default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--retries", type=int, default=None)
@click.option("--score-cache", "score_cache_path", default=None,
              help="JSONL score cache; replays without network when complete.")
@click.pass_context
def cmd_compat(ctx, vocab, corpus, out, db_only, combine_mode, smoothing,
               llm_endpoint, llm_model, batch_size, retries, score_cache_path):
    """Estimate attribute-object compatibility from corpus + LLM scores."""
    cfg = _cfg(ctx)
    cfg.apply({"vocab": vocab, "corpus": corpus, "combine_mode": combine_mode,
               "smoothing": smoothing,
               "llm": {"endpoint": llm_endpoint, "model": llm_model,
                       "batch_size": batch_size, "retries": retries}})
    voc = _load_vocab(cfg.vocab)
    if not cfg.corpus:
        raise ConfigError("no corpus path configured")
    if not Path(cfg.corpus).exists():
        raise DataError(f"corpus path does not exist: {cfg.corpus}")

    shards = cfg.threads if cfg.threads > 0 else 1
    phi_db, diag = count_cooccurrences(
        cfg.corpus, voc, MatchConfig(smoothing=cfg.smoothing), shards=shards)
    _log(ctx, f"counted {diag.records} records ({diag.skipped} skipped)")

    mode = cfg.combine_mode
    if db_only:
        mode = "db_only"
        phi_llm = np.zeros_like(phi_db, dtype=np.float64)
    else:
        cache = ScoreCache(score_cache_path)
        client = None
        if cfg.llm.endpoint:
            client = HttpLlmClient(cfg.llm)
        phi_llm = llm_score_pairs(voc, client, cfg.llm, cache)
    table = CompatibilityTable.build(
        attributes=voc.attribute_names, objects=list(voc.objects),
        phi_db=phi_db, phi_llm=phi_llm, combine_mode=mode)
    table.to_json(out)
    for i, name in enumerate(table.attributes):
        top = ", ".join(f"{o} ({s:g})" for o, s in table.top_objects(i))
        click.echo(f"{name}: {top}")


@cli.command("build-cache")
@click.option("--vocab", default=None)
@click.option("--compat", "compat_path", default=None)
@click.option("--pool", default=None)
@click.option("--queries", default=None)
@click.option("--k", type=int, default=None)
@click.option("--strategy", default=None,
              type=click.Choice(["comca", "random", "brute_force"]))
@click.option("--out", required=True, help="Cache manifest output path.")
@click.pass_context
def cmd_build_cache(ctx, vocab, compat_path, pool, queries, k, strategy, out):
    """Sample compatible objects and retrieve pool images per attribute."""
    cfg = _cfg(ctx)
    cfg.apply({"vocab": vocab, "compat": compat_path, "pool": pool,
               "queries": queries, "strategy": strategy})
    if k is not None:
        cfg.apply({"k": k})
    voc = _load_vocab(cfg.vocab)
    pool_m = _load_emb(cfg.pool, "pool")
    queries_m = _load_emb(cfg.queries, "queries")
    table = None
    if cfg.strategy == "comca":
        if not cfg.compat or not Path(cfg.compat).exists():
            raise DataError(f"compat table does not exist: {cfg.compat}")
        table = CompatibilityTable.from_json(cfg.compat)
    cache = build_cache(voc, table, queries_m, pool_m, cfg.params.k,
                        cfg.seed, cfg.strategy)
    save_cache(cache, out, voc)
    _log(ctx, f"cache: {len(cache)} entries, rng={RNG_ALGORITHM}")


@cli.command("score")
@click.option("--images", default=None, help="Test region embeddings.")
@click.option("--prompts", default=None, help="Inference prompt embeddings.")
@click.option("--cache", "cache_path", default=None, help="Cache manifest.")
@click.option("--pool", default=None)
@click.option("--attr-text", default=None, help="Soft-label text embeddings.")
@click.option("--vocab", default=None)
@click.option("--params", "params_path", default=None,
              help="JSON config supplying hyperparameters.")
@click.option("--out", required=True)
@click.pass_context
def cmd_score(ctx, images, prompts, cache_path, pool, attr_text, vocab,
              params_path, out):
    """Fused attribute scores for test instances."""
    cfg = _cfg(ctx)
    if params_path:
        cfg.apply(json.loads(Path(params_path).read_text(encoding="utf-8")))
    cfg.apply({"images": images, "prompts": prompts, "cache": cache_path,
               "pool": pool, "attr_text": attr_text, "vocab": vocab})
    fused = _run_scoring(cfg)
    save_scores(fused, out)
    _log(ctx, f"scores: {fused.values.shape} via {_kernels.BACKEND} backend")


def _run_scoring(cfg: RunConfig) -> ScoreMatrix:
    voc = _load_vocab(cfg.vocab)
    images_m = _load_emb(cfg.images, "images")
    prompts_m = _load_emb(cfg.prompts, "prompts")
    pool_m = _load_emb(cfg.pool, "pool")
    attr_text_m = _load_emb(cfg.attr_text, "attr_text")
    if not cfg.cache or not Path(cfg.cache).exists():
        raise DataError(f"cache manifest does not exist: {cfg.cache}")
    cache = load_cache(cfg.cache, voc, pool_m)
    labels = make_labels(cache, attr_text_m, variant=cfg.soft_variant,
                         alpha=cfg.params.alpha)
    names = voc.attribute_names
    cache_sm = comca_cache_scores(images_m, cache, labels, cfg.params.beta,
                                  eta_form=cfg.params.eta_form,
                                  eq10_form=cfg.params.eq10_form,
                                  attribute_names=names)
    clip_sm = zero_shot_scores(images_m, prompts_m)
    clip_sm.attribute_names = names
    return fuse_final(cache_sm, clip_sm, cfg.params.lam, cfg.params.norm_mode)


@cli.command("eval")
@click.option("--scores", "scores_path", required=True)
@click.option("--annotations", "ann_path", required=True)
@click.option("--out", default=None, help="Write the result JSON here too.")
@click.option("--csv", "csv_path", default=None,
              help="Per-attribute CSV (name, bucket, AP, counts).")
@click.pass_context
def cmd_eval(ctx, scores_path, ann_path, out, csv_path):
    """Mean average precision against positive/negative/unknown labels."""
    for p, what in ((scores_path, "scores"), (ann_path, "annotations")):
        if not Path(p).exists():
            raise DataError(f"{what} path does not exist: {p}")
    scores = load_scores(scores_path)
    ann = AnnotationSet.from_json(ann_path)
    result = evaluate(scores, ann)
    text = result.to_json(out)
    if csv_path:
        result.to_csv(csv_path)
    click.echo(text, nl=False)


@cli.command("pipeline")
@click.option("--run-dir", default=None,
              help="Artifact directory (default runs/<config-hash>).")
@click.option("--keep-partial", is_flag=True,
              help="Keep the run directory when a stage fails.")
@click.option("--strategy", default=None,
              type=click.Choice(["comca", "random", "brute_force"]))
@click.option("--soft-variant", default=None,
              type=click.Choice(["one_hot", "raw_soft", "softmax_only",
                                 "standardized_softmax", "sharpening"]))
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--k", type=int, default=None)
@click.option("--norm-mode", default=None,
              type=click.Choice(["none", "min_max", "max_softmax"]))
@click.option("--eta-c", "eta_c_form", default=None,
              type=click.Choice(["tip", "paper"]))
@click.option("--eq10-form", default=None, type=click.Choice(["outside", "inside"]))
@click.option("--replay", default=None,
              help="Run directory to replay; verifies the manifest hash.")
@click.pass_context
def cmd_pipeline(ctx, run_dir, keep_partial, strategy, soft_variant, lam,
                 beta, alpha, k, norm_mode, eta_c_form, eq10_form, replay):
    """End-to-end: build-cache, label, score, fuse, evaluate."""
    cfg = _cfg(ctx)
    if replay:
        manifest_path = Path(replay) / "manifest.json"
        if not manifest_path.exists():
            raise DataError(f"no manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        cfg = RunConfig.from_dict(manifest["config"])
        if cfg.config_hash() != manifest["config_hash"]:
            raise DataError("manifest config hash mismatch; refusing to replay")
    cfg.apply({"strategy": strategy, "soft_variant": soft_variant,
               "lambda": lam, "beta": beta, "alpha": alpha, "k": k,
               "norm_mode": norm_mode, "eta_c": eta_c_form,
               "eq10_form": eq10_form})
    cfg.require_paths("vocab", "compat", "pool", "queries", "prompts",
                      "attr_text", "images", "annotations")

    out_dir = Path(run_dir) if run_dir else Path("runs") / cfg.config_hash()
    created = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = _run_pipeline(ctx, cfg, out_dir)
    except Exception:
        if created and not keep_partial:
            shutil.rmtree(out_dir, ignore_errors=True)
        raise
    click.echo(result.to_json(), nl=False)


def _run_pipeline(ctx, cfg: RunConfig, out_dir: Path):
    voc = _load_vocab(cfg.vocab)
    table = CompatibilityTable.from_json(cfg.compat)
    pool_m = _load_emb(cfg.pool, "pool")
    queries_m = _load_emb(cfg.queries, "queries")
    attr_text_m = _load_emb(cfg.attr_text, "attr_text")
    prompts_m = _load_emb(cfg.prompts, "prompts")
    images_m = _load_emb(cfg.images, "images")
    ann = AnnotationSet.from_json(cfg.annotations)

    cache = build_cache(voc, table, queries_m, pool_m, cfg.params.k,
                        cfg.seed, cfg.strategy)
    save_cache(cache, out_dir / "cache.json", voc)
    labels = make_labels(cache, attr_text_m, variant=cfg.soft_variant,
                         alpha=cfg.params.alpha)
    save_labels(labels, cache, out_dir / "labels.comcaemb")

    names = voc.attribute_names
    cache_sm = comca_cache_scores(images_m, cache, labels, cfg.params.beta,
                                  eta_form=cfg.params.eta_form,
                                  eq10_form=cfg.params.eq10_form,
                                  attribute_names=names)
    clip_sm = zero_shot_scores(images_m, prompts_m)
    clip_sm.attribute_names = names
    fused = fuse_final(cache_sm, clip_sm, cfg.params.lam, cfg.params.norm_mode)
    save_scores(fused, out_dir / "scores.json")

    result = evaluate(fused, ann)
    result.to_json(out_dir / "eval.json")
    manifest = {
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "kernel_backend": _kernels.BACKEND,
        "artifacts": ["cache.json", "labels.comcaemb", "scores.json",
                      "eval.json"],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    _log(ctx, f"run artifacts in {out_dir}")
    return result


@cli.group("baseline")
def baseline():
    """Reference scoring baselines."""


def _finish_baseline(ctx, scores: ScoreMatrix, ann_path: str | None,
                     out: str | None):
    if out:
        save_scores(scores, out)
    if ann_path:
        if not Path(ann_path).exists():
            raise DataError(f"annotations path does not exist: {ann_path}")
        ann = AnnotationSet.from_json(ann_path)
        result = evaluate(scores, ann)
        click.echo(result.to_json(), nl=False)
    elif not out:
        raise ConfigError("provide --annotations and/or --out")


@baseline.command("zero-shot")
@click.option("--images", required=True)
@click.option("--prompts", required=True)
@click.option("--annotations", "ann_path", default=None)
@click.option("--out", default=None)
@click.pass_context
def baseline_zero_shot(ctx, images, prompts, ann_path, out):
    """Plain cosine between test images and inference prompts."""
    scores = zero_shot_scores(_load_emb(images, "images"),
                              _load_emb(prompts, "prompts"))
    _finish_baseline(ctx, scores, ann_path, out)


@baseline.command("tip")
@click.option("--images", required=True)
@click.option("--prompts", required=True)
@click.option("--cache", "cache_path", required=True)
@click.option("--pool", required=True)
@click.option("--vocab", required=True)
@click.option("--annotations", "ann_path", default=None)
@click.option("--out", default=None)
@click.pass_context
def baseline_tip(ctx, images, prompts, cache_path, pool, vocab, ann_path, out):
    """Hard-label cache scores fused with zero-shot scores."""
    cfg = _cfg(ctx)
    voc = _load_vocab(vocab)
    pool_m = _load_emb(pool, "pool")
    if not Path(cache_path).exists():
        raise DataError(f"cache manifest does not exist: {cache_path}")
    cache = load_cache(cache_path, voc, pool_m)
    images_m = _load_emb(images, "images")
    names = voc.attribute_names
    cache_sm = tip_cache_scores(images_m, cache, cfg.params.beta,
                                eta_form=cfg.params.eta_form,
                                attribute_names=names)
    clip_sm = zero_shot_scores(images_m, _load_emb(prompts, "prompts"))
    clip_sm.attribute_names = names
    fused = fuse_final(cache_sm, clip_sm, cfg.params.lam, cfg.params.norm_mode)
    _finish_baseline(ctx, fused, ann_path, out)


@baseline.command("tip-iap")
@click.option("--images", required=True)
@click.option("--object-prompts", required=True,
              help="Inference prompt embeddings for object categories.")
@click.option("--object-cache", required=True,
              help="Cache manifest built over objects (object-vocab classes).")
@click.option("--object-vocab", required=True,
              help="Vocabulary whose attributes are the object categories.")
@click.option("--vocab", required=True, help="Target attribute vocabulary.")
@click.option("--compat", "compat_path", required=True,
              help="Compatibility table supplying per-object attribute counts.")
@click.option("--pool", required=True)
@click.option("--annotations", "ann_path", default=None)
@click.option("--out", default=None)
@click.pass_context
def baseline_tip_iap(ctx, images, object_prompts, object_cache, object_vocab,
                     vocab, compat_path, pool, ann_path, out):
    """Object classification via cache, then attribute transfer."""
    cfg = _cfg(ctx)
    voc = _load_vocab(vocab)
    obj_voc = _load_vocab(object_vocab)
    pool_m = _load_emb(pool, "pool")
    if not Path(object_cache).exists():
        raise DataError(f"cache manifest does not exist: {object_cache}")
    cache = load_cache(object_cache, obj_voc, pool_m)
    images_m = _load_emb(images, "images")
    obj_names = obj_voc.attribute_names
    cache_sm = tip_cache_scores(images_m, cache, cfg.params.beta,
                                eta_form=cfg.params.eta_form,
                                attribute_names=obj_names)
    clip_sm = zero_shot_scores(images_m, _load_emb(object_prompts, "prompts"))
    clip_sm.attribute_names = obj_names
    z = cfg.params.lam * cache_sm.values + clip_sm.values
    object_dist = ScoreMatrix(instance_ids=list(images_m.ids),
                              attribute_names=obj_names,
                              values=softmax_rows(z), kind="cache_tip")
    if not Path(compat_path).exists():
        raise DataError(f"compat table does not exist: {compat_path}")
    table = CompatibilityTable.from_json(compat_path)
    p_attr = attr_given_object_from_compat(table.phi_db.astype(np.float64))
    scores = iap_scores(object_dist, p_attr,
                        attribute_names=voc.attribute_names)
    _finish_baseline(ctx, scores, ann_path, out)


@baseline.command("image-based")
@click.option("--images", required=True)
@click.option("--pool", required=True)
@click.option("--attr-text", required=True)
@click.option("--prompts", default=None,
              help="Zero-shot branch embeddings (default: attr-text).")
@click.option("--k", type=int, default=None)
@click.option("--annotations", "ann_path", default=None)
@click.option("--out", default=None)
@click.pass_context
def baseline_image_based(ctx, images, pool, attr_text, prompts, k, ann_path,
                         out):
    """Per-instance nearest-image cache with pure soft labels."""
    cfg = _cfg(ctx)
    if k is not None:
        cfg.apply({"k": k})
    images_m = _load_emb(images, "images")
    pool_m = _load_emb(pool, "pool")
    attr_text_m = _load_emb(attr_text, "attr_text")
    prompts_m = _load_emb(prompts, "prompts") if prompts else None
    rows = [image_based_scores(images_m.data[i], pool_m, cfg.params.k,
                               attr_text_m, cfg.params.beta,
                               attr_prompts=prompts_m, params=cfg.params)
            for i in range(images_m.n)]
    names = list((prompts_m or attr_text_m).ids)
    scores = ScoreMatrix(instance_ids=list(images_m.ids),
                         attribute_names=names, values=np.array(rows),
                         kind="image_based")
    _finish_baseline(ctx, scores, ann_path, out)


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ComcaError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except FileNotFoundError as exc:
        click.echo(f"error: missing file: {exc}", err=True)
        return 2
    except Exception:
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
