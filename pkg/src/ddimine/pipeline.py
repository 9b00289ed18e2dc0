"""Stage orchestration: artifacts on disk, manifests, digests, prerequisites.

Every artifact carries the configuration digest in its header; stages refuse
inputs written under a different configuration.  Stage manifests (timings,
input/output content digests) live under ``manifests/`` and are metadata, not
artifacts: reruns are byte-identical in everything outside that directory.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable

from . import corpus as corpus_mod
from . import features as features_mod
from . import labeling as labeling_mod
from . import learn as learn_mod
from . import mar_alerts as mar_mod
from . import metrics as metrics_mod
from . import splitting as splitting_mod
from .config import PipelineConfig, config_digest
from .errors import ArtifactMismatchError, ConfigError, MissingArtifactError, ValidationError

STAGE_ORDER = ("ingest", "filter", "label", "split", "featurize", "train", "evaluate", "alerts")

ARTIFACTS: dict[str, tuple[str, str]] = {
    "tokenized.jsonl": ("ingest", "tokenized abstracts"),
    "cardiac.jsonl": ("filter", "filtered abstracts"),
    "corpus_stats.txt": ("filter", "corpus statistics"),
    "samples.tsv": ("label", "labeled interaction samples"),
    "templates.tsv": ("label", "interaction type templates"),
    "label_report.txt": ("label", "labeling tallies"),
    "assignment.tsv": ("split", "split assignment"),
    "assigned_samples.tsv": ("split", "samples with assigned abstracts"),
    "leakage_report.txt": ("split", "leakage report"),
    "vocab.tsv": ("featurize", "train vocabulary"),
    "features_train.txt": ("featurize", "train feature matrix"),
    "features_dev.txt": ("featurize", "dev feature matrix"),
    "features_test.txt": ("featurize", "test feature matrix"),
    "featurize_report.txt": ("featurize", "featurization report"),
    "model.txt": ("train", "trained linear model"),
    "cv_results.tsv": ("train", "cross-validation results"),
    "metrics_dev.txt": ("evaluate", "dev metrics"),
    "metrics_test.txt": ("evaluate", "test metrics"),
    "curve_dev.tsv": ("evaluate", "dev ROC curve"),
    "curve_test.tsv": ("evaluate", "test ROC curve"),
    "alerts.tsv": ("alerts", "interaction alerts"),
    "alert_report.txt": ("alerts", "alert report"),
}

_STAGE_INPUT_PATHS: dict[str, tuple[str, ...]] = {
    "ingest": ("corpus", "lexicon"),
    "filter": ("lexicon",),
    "label": ("catalog", "lexicon"),
    "split": (),
    "featurize": (),
    "train": (),
    "evaluate": (),
    "alerts": ("catalog", "mar"),
    "diagnose-split": (),
}


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def artifact_digests(output_dir: Path | str) -> dict[str, str]:
    """Content digests of every artifact file; manifests are excluded."""
    out = Path(output_dir)
    digests = {}
    for path in sorted(out.rglob("*")):
        if path.is_file() and "manifests" not in path.parts:
            digests[str(path.relative_to(out))] = file_digest(path)
    return digests


def check_stage_paths(cfg: PipelineConfig, stage: str) -> None:
    """Verify the input paths a stage reads exist; reports all missing at once."""
    missing = []
    for key in _STAGE_INPUT_PATHS.get(stage, ()):
        val = getattr(cfg, key)
        if val is None:
            missing.append(f"paths.{key} is required by the {stage!r} stage")
        elif not Path(val).exists():
            missing.append(f"paths.{key} does not exist: {val}")
    if stage == "featurize" and cfg.feature_kind == "embeddings":
        for key in ("embeddings", "stopwords"):
            val = getattr(cfg, key)
            if val is None or not Path(val).exists():
                missing.append(f"paths.{key} is required for embedding features")
    if stage == "featurize" and cfg.vocab_stopwords == "drop":
        if cfg.stopwords is None or not Path(cfg.stopwords).exists():
            missing.append("paths.stopwords is required when vocab_stopwords=drop")
    if missing:
        raise ConfigError(missing)


def _artifact(cfg: PipelineConfig, name: str) -> Path:
    return Path(cfg.output) / name


def _require(cfg: PipelineConfig, name: str) -> Path:
    path = _artifact(cfg, name)
    if not path.exists():
        raise MissingArtifactError(name, ARTIFACTS[name][0])
    return path


def _header(cfg: PipelineConfig) -> dict[str, str]:
    return {"config_digest": config_digest(cfg), "seed": str(cfg.seed)}


def _check_digest(cfg: PipelineConfig, path: Path, found: str | None) -> None:
    expected = config_digest(cfg)
    if found != expected:
        raise ArtifactMismatchError(
            f"{path} was written under config digest {found!r}, current is {expected!r}; "
            "rerun the producing stage"
        )


def _read_commented_header(path: Path) -> dict[str, str]:
    header = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                header[key.strip()] = val.strip()
    return header


def _write_text_artifact(cfg: PipelineConfig, name: str, kind: str, body: str) -> None:
    lines = [f"# ddimine {kind}"]
    for key, val in _header(cfg).items():
        lines.append(f"# {key}: {val}")
    _artifact(cfg, name).write_text("\n".join(lines) + "\n" + body, encoding="utf-8")


# ---------------------------------------------------------------------------
# tokenized-abstract JSONL artifacts
# ---------------------------------------------------------------------------

def _write_tokenized(cfg: PipelineConfig, name: str, abstracts, extra: dict) -> None:
    with open(_artifact(cfg, name), "w", encoding="utf-8") as fh:
        head = {"kind": "tokenized-abstracts", **_header(cfg), **extra}
        fh.write(json.dumps({"header": head}, sort_keys=True) + "\n")
        for ab in abstracts:
            rec = {"id": ab.id, "tokens": list(ab.tokens), "mentions": sorted(ab.drug_mentions)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _read_tokenized(cfg: PipelineConfig, name: str) -> tuple[list, dict]:
    path = _require(cfg, name)
    abstracts = []
    header: dict = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            rec = json.loads(line)
            if i == 0 and "header" in rec:
                header = rec["header"]
                _check_digest(cfg, path, header.get("config_digest"))
                continue
            abstracts.append(
                corpus_mod.TokenizedAbstract(rec["id"], tuple(rec["tokens"]), frozenset(rec["mentions"]))
            )
    return abstracts, header


# ---------------------------------------------------------------------------
# sample TSV artifacts
# ---------------------------------------------------------------------------

def _write_samples(cfg: PipelineConfig, name: str, samples, with_ids: bool) -> None:
    lines = ["# ddimine samples"]
    for key, val in _header(cfg).items():
        lines.append(f"# {key}: {val}")
    cols = "cardiac\tother\tlabel\ttemplate_id" + ("\tabstract_ids" if with_ids else "")
    lines.append(f"# columns: {cols}")
    for s in samples:
        tid = "-" if s.template_id is None else str(s.template_id)
        row = f"{s.cardiac_drug}\t{s.other_drug}\t{s.label}\t{tid}"
        if with_ids:
            row += "\t" + (",".join(sorted(s.abstract_ids)) if s.abstract_ids else "-")
        lines.append(row)
    _artifact(cfg, name).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_samples(cfg: PipelineConfig, name: str, with_ids: bool) -> list:
    path = _require(cfg, name)
    _check_digest(cfg, path, _read_commented_header(path).get("config_digest"))
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            tid = None if parts[3] == "-" else int(parts[3])
            ids: frozenset[str] = frozenset()
            if with_ids and len(parts) > 4 and parts[4] != "-":
                ids = frozenset(parts[4].split(","))
            samples.append(
                labeling_mod.InteractionSample(parts[0], parts[1], int(parts[2]), tid, ids)
            )
    return samples


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(cfg: PipelineConfig) -> None:
    """Parse the corpus, tokenize, and match the drug lexicon."""
    lexicon = corpus_mod.DrugLexicon.load(cfg.lexicon)
    abstracts, skipped = corpus_mod.load_corpus(cfg.corpus, cfg.corpus_format)
    tokenized = corpus_mod.tokenize_abstracts(abstracts, lexicon)
    _write_tokenized(cfg, "tokenized.jsonl", tokenized, {"skipped_records": skipped})


def stage_filter(cfg: PipelineConfig) -> None:
    """Keep abstracts mentioning a lexicon drug; write corpus statistics."""
    lexicon = corpus_mod.DrugLexicon.load(cfg.lexicon)
    tokenized, _ = _read_tokenized(cfg, "tokenized.jsonl")
    kept = corpus_mod.filter_cardiac(tokenized, lexicon)
    retention = len(kept) / len(tokenized) if tokenized else 0.0
    _write_tokenized(cfg, "cardiac.jsonl", kept, {"retention": retention, "before": len(tokenized)})
    stats = corpus_mod.corpus_stats(kept)
    seen_cardiac = set()
    for ab in kept:
        seen_cardiac |= ab.drug_mentions & lexicon.cardiac
    body = corpus_mod.render_stats(stats)
    body += f"retention_ratio\t{retention!r}\n"
    body += f"cardiac_drugs_in_lexicon\t{len(lexicon.cardiac)}\n"
    body += f"cardiac_drugs_in_abstracts\t{len(seen_cardiac)}\n"
    _write_text_artifact(cfg, "corpus_stats.txt", "corpus-stats", body)


def stage_label(cfg: PipelineConfig) -> None:
    """Enumerate (cardiac, other) samples with labels and type templates."""
    lexicon = corpus_mod.DrugLexicon.load(cfg.lexicon)
    catalog = labeling_mod.InteractionCatalog.load(cfg.catalog)
    universe = labeling_mod.build_universe(set(lexicon.cardiac), catalog)
    samples = labeling_mod.enumerate_samples(set(lexicon.cardiac), universe, catalog)
    table = labeling_mod.extract_templates(catalog, lexicon)
    samples = labeling_mod.annotate_template_ids(samples, table)
    _write_samples(cfg, "samples.tsv", samples, with_ids=False)

    lines = ["# template_id\ttext\tsupport"]
    for tpl in table.templates:
        lines.append(f"{tpl.template_id}\t{tpl.text}\t{table.support.get(tpl.template_id, 0)}")
    _write_text_artifact(cfg, "templates.tsv", "templates", "\n".join(lines) + "\n")

    tallies = labeling_mod.positive_tallies(samples)
    body_lines = [
        f"universe_size\t{len(universe)}",
        f"cardiac_drugs\t{len(lexicon.cardiac)}",
        f"samples\t{len(samples)}",
        f"catalog_pairs\t{len(catalog)}",
        f"catalog_duplicate_rows\t{catalog.n_duplicate_rows}",
        f"template_count\t{len(table.templates)}",
        f"template_warnings\t{table.n_warnings}",
    ]
    body_lines += [f"{k}\t{v}" for k, v in tallies.items()]
    body_lines += [
        "#",
        "# Reference full-scale tallies (documented, not asserted):",
        "# related drugs 1781; positive interactions 63450;",
        "# cardiac-cardiac positives 218; interaction types 53.",
    ]
    _write_text_artifact(cfg, "label_report.txt", "label-report", "\n".join(body_lines) + "\n")


def stage_split(cfg: PipelineConfig) -> None:
    """Split abstracts and samples independently, then attach same-split abstracts."""
    tokenized, _ = _read_tokenized(cfg, "cardiac.jsonl")
    samples = _read_samples(cfg, "samples.tsv", with_ids=False)
    assignment = splitting_mod.split_corpus(tokenized, samples, cfg.ratios, cfg.seed)
    assigned = splitting_mod.assign_abstracts(assignment, tokenized, samples)
    splitting_mod.save_assignment(assignment, _artifact(cfg, "assignment.tsv"), _header(cfg))
    _write_samples(cfg, "assigned_samples.tsv", assigned, with_ids=True)
    report = splitting_mod.leakage_report(assignment, assigned)
    _write_text_artifact(cfg, "leakage_report.txt", "leakage-report", report.render())
    if report.total_cross_split != 0:
        raise ValidationError("split postcondition violated: cross-split abstract sharing detected")


def _load_split_artifacts(cfg: PipelineConfig):
    tokenized, _ = _read_tokenized(cfg, "cardiac.jsonl")
    path = _require(cfg, "assignment.tsv")
    assignment, header = splitting_mod.load_assignment(path)
    _check_digest(cfg, path, header.get("config_digest"))
    assigned = _read_samples(cfg, "assigned_samples.tsv", with_ids=True)
    return tokenized, assignment, assigned


def stage_featurize(cfg: PipelineConfig) -> None:
    """Build the train vocabulary and per-split feature matrices."""
    tokenized, assignment, assigned = _load_split_artifacts(cfg)
    abstracts_by_id = {ab.id: ab for ab in tokenized}
    by_split: dict[str, list] = {split: [] for split in splitting_mod.SPLITS}
    for s in assigned:
        by_split[assignment.sample_split[s.key]].append(s)
    train_abstracts = [ab for ab in tokenized if assignment.abstract_split[ab.id] == "train"]

    report_lines = []
    if cfg.vocab_stopwords == "drop":
        stop = features_mod.load_stopwords(cfg.stopwords)
        vocab_source = [
            replace(ab, tokens=tuple(t for t in ab.tokens if t not in stop)) for ab in train_abstracts
        ]
    else:
        vocab_source = train_abstracts
    vocab = features_mod.build_vocab(vocab_source, cfg.top_k)
    features_mod.save_vocab(vocab, _artifact(cfg, "vocab.tsv"), _header(cfg))
    report_lines.append(f"vocab_size\t{len(vocab)}")

    if cfg.feature_kind == "counts":
        matrices = {
            split: features_mod.build_count_matrix(
                by_split[split], abstracts_by_id, vocab, cfg.drop_empty_samples, cfg.jobs
            )
            for split in splitting_mod.SPLITS
        }
    else:
        table = features_mod.EmbeddingTable.load(cfg.embeddings)
        stopwords = features_mod.load_stopwords(cfg.stopwords)
        matrices = {}
        for split in splitting_mod.SPLITS:
            matrix, misses = features_mod.build_embedding_matrix(
                by_split[split], abstracts_by_id, table, stopwords, cfg.drop_empty_samples, cfg.jobs
            )
            matrices[split] = matrix
            report_lines.append(f"embedding_misses_{split}\t{misses}")

    if cfg.undersample_train:
        before = matrices["train"].n_rows
        matrices["train"] = features_mod.undersample(matrices["train"], cfg.seed)
        report_lines.append(f"undersample_train\t{before} -> {matrices['train'].n_rows}")
    for split in splitting_mod.SPLITS:
        m = matrices[split]
        report_lines.append(f"rows_{split}\t{m.n_rows}")
        features_mod.save_matrix(m, _artifact(cfg, f"features_{split}.txt"), _header(cfg))
    _write_text_artifact(cfg, "featurize_report.txt", "featurize-report", "\n".join(report_lines) + "\n")


def _load_matrix(cfg: PipelineConfig, name: str):
    path = _require(cfg, name)
    matrix, header = features_mod.load_matrix(path)
    _check_digest(cfg, path, header.get("config_digest"))
    return matrix


def stage_train(cfg: PipelineConfig) -> None:
    """Cross-validate the L1 penalty by held-out AUC, then fit the final model."""
    matrix = _load_matrix(cfg, "features_train.txt")
    train_cfg = learn_mod.TrainConfig(
        loss=cfg.model.loss,
        l1_lambda=cfg.model.l1_lambda,
        max_iters=cfg.model.max_iters,
        tolerance=cfg.model.tolerance,
        seed=cfg.seed,
        standardize=cfg.model.standardize,
    )
    def fmt_auc(value: float) -> str:
        return "N/A" if math.isnan(value) else repr(float(value))

    cv_lines = ["# lambda\tmean_auc\t" + "\t".join(f"fold{i}" for i in range(cfg.cv.k))]
    if cfg.cv_enabled():
        grid = cfg.cv.grid or learn_mod.default_lambda_grid(matrix)
        result = learn_mod.cross_validate(matrix, grid, cfg.cv.k, train_cfg, cfg.seed)
        for gi, lam in enumerate(result.lambda_grid):
            folds = "\t".join(fmt_auc(result.fold_auc[gi, i]) for i in range(result.fold_auc.shape[1]))
            cv_lines.append(f"{lam!r}\t{fmt_auc(result.mean_auc[gi])}\t{folds}")
        cv_lines.append(f"# best_lambda: {result.best_lambda!r}")
        for warning in result.warnings:
            cv_lines.append(f"# warning: {warning}")
        train_cfg = replace(train_cfg, l1_lambda=result.best_lambda)
    else:
        cv_lines.append("# cross-validation disabled")
    _write_text_artifact(cfg, "cv_results.tsv", "cv-results", "\n".join(cv_lines) + "\n")
    model = learn_mod.train(matrix, train_cfg)
    learn_mod.save_model(model, _artifact(cfg, "model.txt"), _header(cfg))


def stage_evaluate(cfg: PipelineConfig) -> None:
    """Score dev and test splits; write metric reports and ROC curve exports."""
    path = _require(cfg, "model.txt")
    model, header = learn_mod.load_model(path)
    _check_digest(cfg, path, header.get("config_digest"))
    for split in ("dev", "test"):
        matrix = _load_matrix(cfg, f"features_{split}.txt")
        scores = learn_mod.predict_scores(model, matrix)
        counts = metrics_mod.confusion(scores, matrix.y, cfg.threshold)
        m = metrics_mod.binary_metrics(counts)
        single_class = len(set(matrix.y.tolist())) < 2
        extra = {}
        curve_lines = ["# threshold\tsensitivity\tspecificity\tfpr"]
        if single_class:
            extra["auc"] = "N/A (single-class split)"
        else:
            curve = metrics_mod.roc_curve(scores, matrix.y)
            extra["auc"] = repr(curve.auc)
            for thr, sens, spec, fpr in metrics_mod.curve_rows(curve):
                curve_lines.append(f"{thr!r}\t{sens!r}\t{spec!r}\t{fpr!r}")
        body = metrics_mod.render_metrics_report(counts, m, cfg.threshold, extra)
        _write_text_artifact(cfg, f"metrics_{split}.txt", "metrics", body)
        _write_text_artifact(cfg, f"curve_{split}.tsv", "roc-curve", "\n".join(curve_lines) + "\n")


def stage_alerts(cfg: PipelineConfig) -> None:
    """Detect co-exposure windows for catalog-positive pairs in the MAR."""
    catalog = labeling_mod.InteractionCatalog.load(cfg.catalog)
    events = mar_mod.parse_mar(cfg.mar)
    exposures = mar_mod.build_exposures(events, cfg.alerts.window_hours, cfg.alerts.per_drug_hours)
    alerts = mar_mod.detect_overlaps(exposures, catalog)
    mar_mod.save_alerts(alerts, _artifact(cfg, "alerts.tsv"), _header(cfg))
    _write_text_artifact(cfg, "alert_report.txt", "alert-report", mar_mod.alert_report(alerts))


def diagnose_split(cfg: PipelineConfig) -> str:
    """Side-by-side leakage counts: the split-isolated assignment vs the naive one."""
    tokenized, assignment, assigned = _load_split_artifacts(cfg)
    samples = _read_samples(cfg, "samples.tsv", with_ids=False)
    isolated = splitting_mod.leakage_report(assignment, assigned)
    naive = splitting_mod.leakage_report(
        assignment, splitting_mod.assign_abstracts_naive(tokenized, samples)
    )
    lines = ["pair\tisolated\tnaive"]
    for key in sorted(isolated.cross_split_shared):
        lines.append(
            f"{key[0]}/{key[1]}\t{isolated.cross_split_shared[key]}\t{naive.cross_split_shared[key]}"
        )
    lines.append(f"total\t{isolated.total_cross_split}\t{naive.total_cross_split}")
    body = "\n".join(lines) + "\n"
    _write_text_artifact(cfg, "diagnose_split.txt", "split-diagnosis", body)
    return body


STAGE_FUNCS: dict[str, Callable[[PipelineConfig], None]] = {
    "ingest": stage_ingest,
    "filter": stage_filter,
    "label": stage_label,
    "split": stage_split,
    "featurize": stage_featurize,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "alerts": stage_alerts,
}

_STAGE_OUTPUTS: dict[str, tuple[str, ...]] = {
    "ingest": ("tokenized.jsonl",),
    "filter": ("cardiac.jsonl", "corpus_stats.txt"),
    "label": ("samples.tsv", "templates.tsv", "label_report.txt"),
    "split": ("assignment.tsv", "assigned_samples.tsv", "leakage_report.txt"),
    "featurize": (
        "vocab.tsv",
        "features_train.txt",
        "features_dev.txt",
        "features_test.txt",
        "featurize_report.txt",
    ),
    "train": ("model.txt", "cv_results.tsv"),
    "evaluate": ("metrics_dev.txt", "metrics_test.txt", "curve_dev.tsv", "curve_test.tsv"),
    "alerts": ("alerts.tsv", "alert_report.txt"),
}


def run_stage(cfg: PipelineConfig, stage: str) -> None:
    """Run one stage and write its manifest."""
    if stage not in STAGE_FUNCS:
        raise ValidationError(f"unknown stage {stage!r}; expected one of {STAGE_ORDER}")
    check_stage_paths(cfg, stage)
    Path(cfg.output).mkdir(parents=True, exist_ok=True)
    input_digests = {}
    for key in _STAGE_INPUT_PATHS.get(stage, ()):
        val = getattr(cfg, key)
        if val is not None and Path(val).is_file():
            input_digests[key] = file_digest(Path(val))
    started = time.perf_counter()
    STAGE_FUNCS[stage](cfg)
    elapsed = time.perf_counter() - started
    manifest_dir = Path(cfg.output) / "manifests"
    manifest_dir.mkdir(exist_ok=True)
    manifest = {
        "stage": stage,
        "config_digest": config_digest(cfg),
        "inputs": input_digests,
        "outputs": {
            name: file_digest(_artifact(cfg, name))
            for name in _STAGE_OUTPUTS.get(stage, ())
            if _artifact(cfg, name).exists()
        },
        "elapsed_s": elapsed,
    }
    (manifest_dir / f"{stage}.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def run_all(cfg: PipelineConfig) -> list[str]:
    """Run the full chain; the alerts stage runs only when a MAR path is set."""
    ran = []
    for stage in STAGE_ORDER:
        if stage == "alerts" and cfg.mar is None:
            continue
        run_stage(cfg, stage)
        ran.append(stage)
    return ran
