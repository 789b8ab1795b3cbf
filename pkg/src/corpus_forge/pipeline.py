"""Declarative pipeline: config parsing/validation and staged execution.

Every stage reads its inputs from files and writes its outputs to files under
the run's output directory, so any stage can be rerun independently and two
runs with the same seed are byte-identical. Outputs are written with a
.partial suffix and renamed only when the stage succeeds.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from . import alignment as align_mod
from . import bpe, dedup, embeddings, fluency, parallel, schedule
from .documents import (
    Document,
    Extraction,
    corpus_stats,
    read_documents,
    write_documents,
)
from .filters import FilterConfig, filter_document, read_wordlist, write_drop_report

log = logging.getLogger(__name__)

STAGE_NAMES = (
    "ingest",
    "filter",
    "fluency",
    "dedup",
    "parallel",
    "tokenizer",
    "embedding",
    "plan",
    "alignment",
    "stats",
)


class ConfigValidationError(ValueError):
    def __init__(self, issues: list["Issue"]):
        self.issues = issues
        super().__init__("; ".join(i.message for i in issues))


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass(frozen=True)
class Issue:
    level: str  # "error" | "warning"
    message: str


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    path: Path
    language: str = ""
    pre_deduplicated: bool = False
    extraction: Extraction = Extraction.WEB


@dataclass
class PipelineConfig:
    seed: int
    threads: int
    output_dir: Path
    datasets: list[DatasetSpec]
    filters: dict[str, Any]
    fluency: dict[str, Any]
    dedup: dict[str, Any]
    parallel: dict[str, Any]
    tokenizer: dict[str, Any]
    embedding: dict[str, Any]
    alignment: dict[str, Any]
    stats: dict[str, Any]
    stages: list[str]
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        payload = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent.resolve()

        def resolve(p):
            return None if p is None else (base / p if not Path(p).is_absolute() else Path(p))

        datasets = [
            DatasetSpec(
                name=d["name"],
                path=resolve(d["path"]),
                language=d.get("language", ""),
                pre_deduplicated=bool(d.get("pre_deduplicated", False)),
                extraction=Extraction(d.get("extraction", "web")),
            )
            for d in payload.get("datasets", [])
        ]
        sections = {}
        for key in ("filters", "fluency", "dedup", "parallel", "tokenizer",
                    "embedding", "alignment", "stats"):
            sections[key] = dict(payload.get(key, {}))
        for section, keys in (
            ("filters", ("bad_words_path", "url_blacklist_path")),
            ("fluency", ("model_path",)),
            ("parallel", ("path",)),
            ("tokenizer", ("base_vocab_path",)),
            ("embedding", ("base_matrix_path",)),
            ("alignment", ("preferences_path", "system_messages_path")),
        ):
            for key in keys:
                if sections[section].get(key) is not None:
                    sections[section][key] = resolve(sections[section][key])
        return cls(
            seed=int(payload.get("seed", 0)),
            threads=int(payload.get("threads", 1)),
            output_dir=resolve(payload.get("output_dir", "out")),
            datasets=datasets,
            stages=list(payload.get("stages", list(STAGE_NAMES))),
            base_dir=base,
            **sections,
        )

    def filter_config(self) -> FilterConfig:
        f = self.filters
        bad_words: tuple[str, ...] = ()
        if f.get("bad_words_path"):
            bad_words = tuple(read_wordlist(f["bad_words_path"]))
        blacklist: frozenset[str] = frozenset()
        if f.get("url_blacklist_path"):
            blacklist = frozenset(read_wordlist(f["url_blacklist_path"]))
        return FilterConfig(
            min_chars=int(f.get("min_chars", 300)),
            min_words=int(f.get("min_words", 6)),
            max_word_len=f.get("max_word_len", 60),
            bad_word_threshold=int(f.get("bad_word_threshold", 2)),
            bad_words=bad_words,
            url_blacklist=blacklist,
            forbidden_substrings=tuple(f.get("forbidden_substrings", ["lorem ipsum"])),
            fluency_threshold=float(f.get("fluency_threshold", 0.7)),
            fluency_applies_to=frozenset(
                Extraction(e) for e in f.get("fluency_applies_to", ["pdf"])
            ),
        )

    def dedup_config(self) -> dedup.DedupConfig:
        d = self.dedup
        return dedup.DedupConfig(
            shingle_n=int(d.get("shingle_n", 5)),
            num_perm=int(d.get("num_perm", 128)),
            jaccard_threshold=float(d.get("jaccard_threshold", 0.8)),
            bands=d.get("bands"),
            rows=d.get("rows"),
            seed=self.seed,
            verify_candidates=bool(d.get("verify_candidates", False)),
        )

    def parallel_config(self) -> parallel.ParallelFilterConfig:
        p = self.parallel
        return parallel.ParallelFilterConfig(
            margin_threshold=float(p.get("margin_threshold", 1.06)),
            classifier_threshold=float(p.get("classifier_threshold", 0.7)),
            require_scores=bool(p.get("require_scores", False)),
        )


def validate_config(cfg: PipelineConfig) -> list[Issue]:
    """Structural and cross-field checks; error-level issues block execution."""
    issues: list[Issue] = []

    def error(msg: str) -> None:
        issues.append(Issue("error", msg))

    def warning(msg: str) -> None:
        issues.append(Issue("warning", msg))

    stages = set(cfg.stages)
    for name in cfg.stages:
        if name not in STAGE_NAMES:
            error(f"unknown stage {name!r}")
    if cfg.seed < 0:
        error("seed must be nonnegative")
    if cfg.threads < 1:
        error("threads must be at least 1")
    if not cfg.datasets and stages & {"ingest", "filter", "fluency", "dedup",
                                      "tokenizer", "stats"}:
        error("empty input dataset list")
    names = [d.name for d in cfg.datasets]
    if len(set(names)) != len(names):
        error("duplicate dataset names")
    for ds in cfg.datasets:
        if not ds.path.exists():
            error(f"dataset {ds.name!r}: missing file {ds.path}")

    f = cfg.filters
    wordlists_ok = True
    if int(f.get("bad_word_threshold", 2)) > 0:
        path = f.get("bad_words_path")
        if path is None:
            warning("bad-word rule enabled but no bad_words_path given; rule is inert")
        elif not Path(path).exists():
            error(f"bad-word rule enabled but list file missing: {path}")
            wordlists_ok = False
    if f.get("url_blacklist_path") is not None and not Path(f["url_blacklist_path"]).exists():
        error(f"url blacklist file missing: {f['url_blacklist_path']}")
        wordlists_ok = False
    if wordlists_ok:
        try:
            cfg.filter_config()
        except (ValueError, OSError) as exc:
            error(f"filters: {exc}")

    d = cfg.dedup
    bands, rows, num_perm = d.get("bands"), d.get("rows"), int(d.get("num_perm", 128))
    if bands is not None and rows is not None and bands * rows > num_perm:
        error(f"dedup banding invalid: {bands}*{rows} > num_perm {num_perm}")
    try:
        cfg.dedup_config()
    except ValueError as exc:
        error(f"dedup: {exc}")

    fl = cfg.fluency
    fluency_kinds = set(f.get("fluency_applies_to", ["pdf"]))
    if fl.get("enabled", False) and "fluency" in stages:
        if fl.get("model_path") is not None:
            if not Path(fl["model_path"]).exists():
                error(f"fluency model file missing: {fl['model_path']}")
        else:
            train_ds = fl.get("train_dataset")
            if train_ds not in names:
                error(f"fluency training dataset {train_ds!r} is not a configured dataset")
    elif fluency_kinds and "filter" in stages and not fl.get("enabled", False):
        warning(
            "fluency rule applies to some extraction kinds but the fluency stage is "
            "disabled; only precomputed scores will be honored"
        )

    t = cfg.tokenizer
    if "tokenizer" in stages:
        if t.get("base_vocab_path") is not None:
            if not Path(t["base_vocab_path"]).exists():
                error(f"base vocabulary file missing: {t['base_vocab_path']}")
        elif t.get("base_dataset") not in names:
            error(f"tokenizer base_dataset {t.get('base_dataset')!r} is not configured")
    if "embedding" in stages and "tokenizer" not in stages:
        error("embedding stage requires the tokenizer stage")
    if "stats" in stages and "tokenizer" not in stages:
        error("stats stage requires the tokenizer stage")
    e = cfg.embedding
    if e.get("base_matrix_path") is not None and not Path(e["base_matrix_path"]).exists():
        error(f"embedding base matrix missing: {e['base_matrix_path']}")
    if int(e.get("pad_multiple", 8)) < 1:
        error("embedding pad_multiple must be positive")
    if int(e.get("dims", 64)) < 1:
        error("embedding dims must be positive")

    a = cfg.alignment
    if "alignment" in stages:
        if a.get("preferences_path") is None or not Path(a["preferences_path"]).exists():
            error(f"preference data file missing: {a.get('preferences_path')}")
        if a.get("system_messages_path") is None or not Path(a["system_messages_path"]).exists():
            error(f"system messages file missing: {a.get('system_messages_path')}")
    if "parallel" in stages:
        if cfg.parallel.get("path") is None or not Path(cfg.parallel["path"]).exists():
            error(f"parallel pairs file missing: {cfg.parallel.get('path')}")
        try:
            cfg.parallel_config()
        except ValueError as exc:
            error(f"parallel: {exc}")
        if cfg.parallel.get("order", "filter-then-dedup") not in (
            "filter-then-dedup",
            "dedup-then-filter",
        ):
            error(f"parallel order {cfg.parallel.get('order')!r} unknown")
    if "stats" in stages and int(cfg.stats.get("sample_every", 1)) < 1:
        error("stats sample_every must be at least 1")
    return issues


@dataclass
class StageResult:
    name: str
    input: int
    kept: int
    dropped: int
    outputs: list[str]

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "input": self.input,
            "kept": self.kept,
            "dropped": self.dropped,
            "outputs": self.outputs,
        }


@dataclass
class RunReport:
    seed: int
    stages: list[StageResult] = field(default_factory=list)

    def as_dict(self) -> dict:
        # Thread count is deliberately not recorded: outputs are independent
        # of it, and the report should be too.
        return {
            "seed": self.seed,
            "stages": [s.as_dict() for s in self.stages],
        }


class _StageDir:
    """Collects outputs under stage_dir; files are written as .partial and
    renamed on success so failures leave partials behind."""

    def __init__(self, out_dir: Path, stage: str):
        self.dir = out_dir / stage
        self.dir.mkdir(parents=True, exist_ok=True)
        self._pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        final = self.dir / name
        tmp = self.dir / (name + ".partial")
        self._pending.append((tmp, final))
        return tmp

    def finalize(self) -> list[Path]:
        finals = []
        for tmp, final in self._pending:
            os.replace(tmp, final)
            finals.append(final)
        return finals


def _rel_paths(paths: list[Path], root: Path) -> list[str]:
    return [str(p.relative_to(root)) for p in paths]


class _Context:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.current: dict[str, Path] = {}  # dataset name -> latest jsonl

    def docs(self, name: str) -> Iterator[Document]:
        return read_documents(self.current[name])


def _stage_ingest(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "ingest")
    total = 0
    for ds in cfg.datasets:
        out_path = stage.path(f"{ds.name}.jsonl")

        def canonical(ds=ds) -> Iterator[Document]:
            for doc in read_documents(ds.path):
                yield Document(
                    id=doc.id,
                    text=doc.text,
                    language=doc.language or ds.language,
                    num_words=None,
                    dataset=ds.name,
                    source_url=doc.source_url,
                    scores=doc.scores,
                    extraction=ds.extraction,
                    metadata=doc.metadata,
                )

        total += write_documents(out_path, canonical())
    finals = stage.finalize()
    for ds, path in zip(cfg.datasets, finals):
        ctx.current[ds.name] = path
    return StageResult("ingest", total, total, 0, _rel_paths(finals, cfg.output_dir))


def _stage_filter(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "filter")
    fcfg = cfg.filter_config()
    total = kept_n = 0
    dropped: list[tuple[str, tuple[str, ...]]] = []
    out_paths = []
    for ds in cfg.datasets:
        out_path = stage.path(f"{ds.name}.jsonl")
        out_paths.append(out_path)

        def run(ds=ds) -> Iterator[Document]:
            nonlocal total, kept_n
            for doc in ctx.docs(ds.name):
                total += 1
                verdict = filter_document(doc, fcfg, lm=None)
                if not verdict.keep:
                    dropped.append((doc.id, verdict.reasons))
                    continue
                kept_n += 1
                yield doc.with_text(verdict.cleaned_text) if verdict.cleaned_text else doc

        write_documents(out_path, run())
    report_path = stage.path("drop_report.jsonl")
    write_drop_report(report_path, dropped)
    finals = stage.finalize()
    for ds, path in zip(cfg.datasets, finals):
        ctx.current[ds.name] = path
    return StageResult("filter", total, kept_n, total - kept_n,
                       _rel_paths(finals, cfg.output_dir))


def _stage_fluency(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "fluency")
    fl = cfg.fluency
    fcfg = cfg.filter_config()
    if not fl.get("enabled", False):
        return StageResult("fluency", 0, 0, 0, [])

    if fl.get("model_path"):
        lm = fluency.read_model(fl["model_path"])
    else:
        max_chars = int(fl.get("max_train_chars", 1_000_000))
        train_docs: list[Document] = []
        chars = 0
        for doc in ctx.docs(fl["train_dataset"]):
            train_docs.append(doc)
            chars += len(doc.text)
            if chars >= max_chars:
                break
        lm = fluency.train_ngram_lm(
            train_docs,
            order=int(fl.get("order", 7)),
            holdout_fraction=float(fl.get("holdout_fraction", 0.1)),
            seed=cfg.seed,
        )
        model_path = stage.path("model.nglm")
        fluency.write_model(lm, model_path)

    threshold = fcfg.fluency_threshold
    total = kept_n = 0
    dropped: list[tuple[str, tuple[str, ...]]] = []
    for ds in cfg.datasets:
        if ds.extraction not in fcfg.fluency_applies_to:
            continue
        out_path = stage.path(f"{ds.name}.jsonl")

        def run(ds=ds) -> Iterator[Document]:
            nonlocal total, kept_n
            for doc in fluency.score_documents(lm, ctx.docs(ds.name)):
                total += 1
                if doc.scores["fluency"] < threshold:
                    dropped.append((doc.id, ("fluency",)))
                    continue
                kept_n += 1
                yield doc

        write_documents(out_path, run())
    report_path = stage.path("drop_report.jsonl")
    write_drop_report(report_path, dropped)
    finals = stage.finalize()
    for ds in cfg.datasets:
        target = stage.dir / f"{ds.name}.jsonl"
        if target in finals:
            ctx.current[ds.name] = target
    return StageResult("fluency", total, kept_n, total - kept_n,
                       _rel_paths(finals, cfg.output_dir))


def _stage_dedup(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "dedup")
    dcfg = cfg.dedup_config()
    datasets = [(ds.name, ctx.docs(ds.name)) for ds in cfg.datasets]
    skip = [ds.name for ds in cfg.datasets if ds.pre_deduplicated]
    result = dedup.dedup_corpus(datasets, dcfg, skip_intra=skip, threads=cfg.threads)

    dedup.write_signatures(stage.path("signatures.mhsg"), result.ids, result.matrix, dcfg)
    dedup.write_cluster_report(stage.path("clusters_intra.jsonl"), result.reports["intra"])
    dedup.write_cluster_report(stage.path("clusters_cross.jsonl"), result.reports["cross"])

    by_dataset: dict[str, list[Document]] = {ds.name: [] for ds in cfg.datasets}
    for doc in result.survivors:
        by_dataset[doc.dataset].append(doc)
    for ds in cfg.datasets:
        write_documents(stage.path(f"{ds.name}.jsonl"), by_dataset[ds.name])
    summary = {
        st: {
            "input": len(rep.kept) + len(rep.removed),
            "kept": len(rep.kept),
            "removed": len(rep.removed),
            "clusters": len(rep.clusters),
        }
        for st, rep in result.reports.items()
    }
    _write_json(stage.path("summary.json"), summary)
    finals = stage.finalize()
    for ds in cfg.datasets:
        ctx.current[ds.name] = stage.dir / f"{ds.name}.jsonl"
    total = len(result.ids)
    kept_n = len(result.survivors)
    return StageResult("dedup", total, kept_n, total - kept_n,
                       _rel_paths(finals, cfg.output_dir))


def _stage_parallel(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "parallel")
    pcfg = cfg.parallel_config()
    order = cfg.parallel.get("order", "filter-then-dedup")
    pairs = list(parallel.read_pairs(cfg.parallel["path"]))
    total = len(pairs)
    if order == "filter-then-dedup":
        pairs = parallel.threshold_filter(pairs, pcfg)
        filtered = len(pairs)
        pairs, dedup_report = parallel.dedup_parallel(pairs)
    else:
        pairs, dedup_report = parallel.dedup_parallel(pairs)
        filtered = len(pairs)
        pairs = parallel.threshold_filter(pairs, pcfg)
    parallel.write_pairs(stage.path("pairs.jsonl"), pairs)
    _write_json(
        stage.path("report.json"),
        {
            "order": order,
            "input": total,
            "after_first_step": filtered,
            "kept": len(pairs),
            "dedup": dedup_report,
        },
    )
    finals = stage.finalize()
    return StageResult("parallel", total, len(pairs), total - len(pairs),
                       _rel_paths(finals, cfg.output_dir))


def _take_docs(ctx: _Context, names: list[str], limit: int | None) -> list[Document]:
    out: list[Document] = []
    for name in names:
        for doc in ctx.docs(name):
            out.append(doc)
            if limit is not None and len(out) >= limit:
                return out
    return out


def _greek_dataset_names(cfg: PipelineConfig) -> list[str]:
    names = [ds.name for ds in cfg.datasets if ds.language == "el"]
    return names or [ds.name for ds in cfg.datasets]


def _stage_tokenizer(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "tokenizer")
    t = cfg.tokenizer
    max_docs = t.get("max_train_docs")
    if t.get("base_vocab_path"):
        base = bpe.load_vocab(t["base_vocab_path"])
        if isinstance(base, bpe.ExtendedVocab):
            raise ValueError("base_vocab_path must point to a base vocabulary")
    else:
        base_docs = _take_docs(ctx, [t["base_dataset"]], max_docs)
        base = bpe.train_bpe(base_docs, int(t.get("base_target_tokens", 2000)), seed=cfg.seed)
    greek_names = _greek_dataset_names(cfg)
    train_docs = _take_docs(ctx, greek_names, max_docs)
    learned = bpe.train_bpe(train_docs, int(t.get("new_target_tokens", 2000)), seed=cfg.seed)
    ext = bpe.extend_vocab(base, learned)

    bpe.save_vocab(base, stage.path("base_vocab.json"))
    bpe.save_vocab(ext, stage.path("extended_vocab.json"))

    sample = _take_docs(ctx, greek_names, t.get("fertility_sample_docs", 2000))
    base_tokens, base_words = bpe.fertility_counts(bpe.ExtendedVocab.from_base(base), sample)
    ext_tokens, ext_words = bpe.fertility_counts(ext, sample)
    _write_json(
        stage.path("fertility.json"),
        {
            "sample_docs": len(sample),
            "sample_words": base_words,
            "base": {"tokens": base_tokens, "fertility": base_tokens / base_words},
            "extended": {"tokens": ext_tokens, "fertility": ext_tokens / ext_words},
            "base_vocab_size": len(base.tokens),
            "extended_vocab_size": ext.total_size,
        },
    )
    finals = stage.finalize()
    n = len(train_docs)
    return StageResult("tokenizer", n, n, 0, _rel_paths(finals, cfg.output_dir))


def _stage_embedding(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "embedding")
    e = cfg.embedding
    base_vocab = bpe.load_vocab(cfg.output_dir / "tokenizer" / "base_vocab.json")
    ext = bpe.load_vocab(cfg.output_dir / "tokenizer" / "extended_vocab.json")
    dims = int(e.get("dims", 64))
    multiple = int(e.get("pad_multiple", 8))
    tied = bool(e.get("tie_lm_head", False))

    if e.get("base_matrix_path"):
        base_input = embeddings.read_matrix(e["base_matrix_path"])
    else:
        base_input = embeddings.synthetic_base_matrix(
            len(base_vocab.tokens), dims, seed=cfg.seed,
            role=embeddings.MatrixRole.INPUT_EMBEDDINGS,
        )
    grown = embeddings.init_new_embeddings(base_input, base_vocab, ext)
    padded = embeddings.pad_to_multiple(grown, multiple)
    embeddings.write_matrix(padded, stage.path("input_embeddings.emb"))
    info = {"input_embeddings": embeddings.matrix_info(padded), "tie_lm_head": tied}

    if not tied:
        base_head = embeddings.synthetic_base_matrix(
            len(base_vocab.tokens), dims, seed=cfg.seed + 1,
            role=embeddings.MatrixRole.LM_HEAD,
        )
        if e.get("base_matrix_path"):
            base_head = embeddings.EmbeddingMatrix(
                data=base_input.data.copy(), role=embeddings.MatrixRole.LM_HEAD
            )
        head = embeddings.pad_to_multiple(
            embeddings.init_new_embeddings(base_head, base_vocab, ext), multiple
        )
        embeddings.write_matrix(head, stage.path("lm_head.emb"))
        info["lm_head"] = embeddings.matrix_info(head)
    _write_json(stage.path("info.json"), info)
    finals = stage.finalize()
    rows = padded.rows
    return StageResult("embedding", rows, rows, 0, _rel_paths(finals, cfg.output_dir))


def _stage_plan(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "plan")
    plans = schedule.builtin_plans()
    for name, plan in plans.items():
        schedule.export_plan_json(plan, stage.path(f"{name}.json"))
        schedule.export_plan_csv(plan, stage.path(f"{name}.csv"))
    finals = stage.finalize()
    n = len(plans)
    return StageResult("plan", n, n, 0, _rel_paths(finals, cfg.output_dir))


def _stage_alignment(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "alignment")
    a = cfg.alignment
    examples = align_mod.read_preferences(a["preferences_path"])
    kept, report = align_mod.curate_preferences(
        examples,
        min_rating=float(a.get("min_rating", 0.0)),
        max_foreign_ratio=float(a.get("max_foreign_ratio", 0.05)),
    )
    pool = align_mod.load_system_messages(a["system_messages_path"])
    assigned = [align_mod.assign_system_message(ex, pool, seed=cfg.seed) for ex in kept]
    align_mod.write_preferences(stage.path("curated.jsonl"), assigned)
    align_mod.write_rendered(stage.path("rendered.jsonl"), assigned)
    _write_json(stage.path("report.json"), report)
    finals = stage.finalize()
    return StageResult("alignment", report["input"], report["kept"], report["dropped"],
                       _rel_paths(finals, cfg.output_dir))


def _stage_stats(cfg: PipelineConfig, ctx: _Context) -> StageResult:
    stage = _StageDir(cfg.output_dir, "stats")
    vocab = bpe.load_vocab(cfg.output_dir / "tokenizer" / "extended_vocab.json")
    every = int(cfg.stats.get("sample_every", 1))

    def sampled() -> Iterator[Document]:
        for ds in cfg.datasets:
            for i, doc in enumerate(ctx.docs(ds.name)):
                if i % every == 0:
                    yield doc

    stats = corpus_stats(sampled(), vocab)
    _write_json(
        stage.path("corpus_stats.json"),
        {
            "sample_every": every,
            "per_subcorpus": stats.per_subcorpus,
            "total_tokens": stats.total_tokens,
            "percentages": stats.percentages,
            "percentages_rounded_pp": stats.rounded_percentages(),
        },
    )
    finals = stage.finalize()
    n = stats.total_tokens
    return StageResult("stats", n, n, 0, _rel_paths(finals, cfg.output_dir))


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "filter": _stage_filter,
    "fluency": _stage_fluency,
    "dedup": _stage_dedup,
    "parallel": _stage_parallel,
    "tokenizer": _stage_tokenizer,
    "embedding": _stage_embedding,
    "plan": _stage_plan,
    "alignment": _stage_alignment,
    "stats": _stage_stats,
}


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """Execute the enabled stages in order; abort on the first failure.

    Raises ConfigValidationError before touching the output directory when
    validation reports errors, and StageError (partial outputs retained with
    a .partial suffix) when a stage fails.
    """
    issues = validate_config(cfg)
    errors = [i for i in issues if i.level == "error"]
    for issue in issues:
        (log.error if issue.level == "error" else log.warning)("%s", issue.message)
    if errors:
        raise ConfigValidationError(errors)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg)
    report = RunReport(seed=cfg.seed)
    for name in cfg.stages:
        fn = _STAGE_FUNCS[name]
        started = time.perf_counter()
        try:
            result = fn(cfg, ctx)
        except Exception as exc:
            raise StageError(name, exc) from exc
        log.info(
            "stage %-10s input=%-8d kept=%-8d dropped=%-6d (%.1fs)",
            name, result.input, result.kept, result.dropped,
            time.perf_counter() - started,
        )
        report.stages.append(result)
    _write_json(cfg.output_dir / "run_report.json", report.as_dict())
    return report
