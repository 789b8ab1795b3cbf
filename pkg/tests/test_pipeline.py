import json
import shutil

import pytest

from corpus_forge.cli import main
from corpus_forge.pipeline import (
    ConfigValidationError,
    PipelineConfig,
    StageError,
    run_pipeline,
    validate_config,
)


def _load(demo_dir):
    return PipelineConfig.load(demo_dir / "config.json")


def test_demo_config_validates_clean(demo_dir):
    cfg = _load(demo_dir)
    issues = validate_config(cfg)
    assert [i for i in issues if i.level == "error"] == []


def test_banding_invariant_produces_error(demo_dir):
    cfg = _load(demo_dir)
    cfg.dedup["bands"] = 16
    cfg.dedup["rows"] = 9
    cfg.dedup["num_perm"] = 128
    issues = validate_config(cfg)
    assert any("16*9" in i.message for i in issues if i.level == "error")


def test_missing_bad_words_file_is_error(demo_dir):
    cfg = _load(demo_dir)
    cfg.filters["bad_words_path"] = demo_dir / "missing.txt"
    issues = validate_config(cfg)
    assert any("list file missing" in i.message for i in issues if i.level == "error")


def test_empty_dataset_list_is_error(demo_dir):
    cfg = _load(demo_dir)
    cfg.datasets = []
    issues = validate_config(cfg)
    assert any("empty input dataset list" in i.message for i in issues)


def test_unknown_stage_is_error(demo_dir):
    cfg = _load(demo_dir)
    cfg.stages = ["ingest", "teleport"]
    issues = validate_config(cfg)
    assert any("unknown stage" in i.message for i in issues)


def test_run_aborts_on_validation_error(demo_dir, tmp_path):
    cfg = _load(demo_dir)
    cfg.datasets = []
    cfg.output_dir = tmp_path / "never"
    with pytest.raises(ConfigValidationError):
        run_pipeline(cfg)
    assert not (tmp_path / "never").exists()


@pytest.fixture(scope="module")
def demo_run(demo_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = _load(demo_dir)
    cfg.output_dir = out
    report = run_pipeline(cfg)
    return cfg, report, out


def test_every_stage_keeps_documents(demo_run):
    _, report, _ = demo_run
    assert [s.name for s in report.stages] == [
        "ingest", "filter", "fluency", "dedup", "parallel",
        "tokenizer", "embedding", "plan", "alignment", "stats",
    ]
    for stage in report.stages:
        assert stage.kept > 0, f"stage {stage.name} kept nothing"


def test_stage_conservation(demo_run):
    _, report, _ = demo_run
    for stage in report.stages:
        assert stage.input == stage.kept + stage.dropped


def test_stage_outputs_exist(demo_run):
    _, report, out = demo_run
    for stage in report.stages:
        for rel in stage.outputs:
            target = out / rel
            assert target.exists()
            assert not target.name.endswith(".partial")


def test_run_report_written(demo_run):
    _, report, out = demo_run
    payload = json.loads((out / "run_report.json").read_text())
    assert payload["seed"] == 42
    assert len(payload["stages"]) == len(report.stages)


def test_filter_drop_report_schema(demo_run):
    _, _, out = demo_run
    lines = (out / "filter" / "drop_report.jsonl").read_text().splitlines()
    assert lines
    for line in lines[:20]:
        record = json.loads(line)
        assert set(record) == {"id", "reasons"}
        assert record["reasons"]


def test_dedup_summary_counts(demo_run):
    _, report, out = demo_run
    summary = json.loads((out / "dedup" / "summary.json").read_text())
    dedup_stage = next(s for s in report.stages if s.name == "dedup")
    assert summary["intra"]["input"] == dedup_stage.input
    assert summary["cross"]["kept"] == dedup_stage.kept
    assert summary["intra"]["removed"] > 0
    assert summary["cross"]["removed"] > 0


def test_stage_failure_leaves_partials(demo_dir, tmp_path):
    cfg = _load(demo_dir)
    cfg.output_dir = tmp_path / "broken"
    cfg.stages = ["ingest", "filter", "fluency", "dedup", "parallel"]
    cfg.parallel = dict(cfg.parallel)
    # Valid at validation time, deleted before the stage runs.
    doomed = tmp_path / "pairs.jsonl"
    shutil.copy(demo_dir / "parallel.jsonl", doomed)
    cfg.parallel["path"] = doomed
    doomed_unlink = doomed.unlink

    import corpus_forge.pipeline as pl

    original = pl._stage_parallel

    def exploding(cfg_, ctx):
        doomed_unlink()
        return original(cfg_, ctx)

    pl._STAGE_FUNCS["parallel"] = exploding
    try:
        with pytest.raises(StageError) as err:
            run_pipeline(cfg)
        assert err.value.stage == "parallel"
    finally:
        pl._STAGE_FUNCS["parallel"] = original
    assert (cfg.output_dir / "dedup" / "summary.json").exists()  # prior stages intact


def test_rerun_stage_from_persisted_inputs(demo_dir, tmp_path):
    # Rerunning the same config into a fresh directory reproduces the files,
    # and a second full run over the same inputs is byte-identical.
    cfg1 = _load(demo_dir)
    cfg1.output_dir = tmp_path / "r1"
    cfg1.stages = ["ingest", "filter"]
    run_pipeline(cfg1)
    cfg2 = _load(demo_dir)
    cfg2.output_dir = tmp_path / "r2"
    cfg2.stages = ["ingest", "filter"]
    run_pipeline(cfg2)
    for rel in ("ingest/el_web.jsonl", "filter/el_web.jsonl", "filter/drop_report.jsonl"):
        assert (tmp_path / "r1" / rel).read_bytes() == (tmp_path / "r2" / rel).read_bytes()


# CLI ---------------------------------------------------------------------------


def test_cli_ingest(demo_dir, tmp_path, capsys):
    out = tmp_path / "canonical.jsonl"
    rc = main(["ingest", str(demo_dir / "el_pdf.jsonl"),
               "--dataset", "renamed", "--extraction", "pdf", "--out", str(out)])
    assert rc == 0
    first = json.loads(out.read_text().splitlines()[0])
    assert first["dataset"] == "renamed"
    assert first["extraction"] == "pdf"


def test_cli_validate_only(demo_dir, capsys):
    rc = main(["run", "--config", str(demo_dir / "config.json"), "--validate-only"])
    assert rc == 0
    assert "0 error(s)" in capsys.readouterr().out


def test_cli_validation_exit_code(demo_dir, tmp_path, capsys):
    config = json.loads((demo_dir / "config.json").read_text())
    config["dedup"]["bands"] = 16
    config["dedup"]["rows"] = 9
    bad = tmp_path / "bad_config.json"
    bad.write_text(json.dumps(config))
    # paths in the config are relative to its directory; copy next to data
    bad2 = demo_dir / "bad_config.json"
    bad2.write_text(json.dumps(config))
    rc = main(["run", "--config", str(bad2)])
    assert rc == 1


def test_cli_plan_show(capsys):
    assert main(["plan", "show"]) == 0
    out = capsys.readouterr().out
    assert '"stage1"' in out and '"stage2"' in out


def test_cli_plan_export(tmp_path, capsys):
    csv_path = tmp_path / "s2.csv"
    json_path = tmp_path / "s2.json"
    rc = main(["plan", "export", "--stage", "2",
               "--out-csv", str(csv_path), "--out-json", str(json_path)])
    assert rc == 0
    assert csv_path.exists() and json_path.exists()


def test_cli_tok_and_fertility(tmp_path, demo_dir, capsys):
    vocab_path = tmp_path / "v.json"
    rc = main(["tok", "train", "--in", str(demo_dir / "el_wiki.jsonl"),
               "--target", "100", "--out", str(vocab_path)])
    assert rc == 0
    rc = main(["tok", "fertility", "--vocab", str(vocab_path),
               "--in", str(demo_dir / "el_wiki.jsonl")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "fertility=" in out


def test_cli_tok_encode_roundtrip_text(tmp_path, demo_dir, capsys):
    vocab_path = tmp_path / "v.json"
    main(["tok", "train", "--in", str(demo_dir / "el_wiki.jsonl"),
          "--target", "50", "--out", str(vocab_path)])
    capsys.readouterr()
    rc = main(["tok", "encode", "--vocab", str(vocab_path), "--text", "καλημέρα"])
    assert rc == 0
    ids = [int(x) for x in capsys.readouterr().out.split()]
    assert ids


def test_cli_fluency_roundtrip(tmp_path, demo_dir, capsys):
    model = tmp_path / "m.nglm"
    rc = main(["fluency", "train", "--in", str(demo_dir / "el_wiki.jsonl"),
               "--out", str(model), "--order", "3", "--holdout", "0.1"])
    assert rc == 0
    scored = tmp_path / "scored.jsonl"
    rc = main(["fluency", "score", "--model", str(model),
               "--in", str(demo_dir / "el_pdf.jsonl"), "--out", str(scored)])
    assert rc == 0
    line = json.loads(scored.read_text().splitlines()[0])
    assert "fluency" in line["scores"]


def test_cli_parallel_subcommands(tmp_path, demo_dir, capsys):
    filtered = tmp_path / "filtered.jsonl"
    rc = main(["parallel", "filter", "--in", str(demo_dir / "parallel.jsonl"),
               "--out", str(filtered)])
    assert rc == 0
    deduped = tmp_path / "deduped.jsonl"
    rc = main(["parallel", "dedup", "--in", str(filtered), "--out", str(deduped)])
    assert rc == 0


def test_cli_dedup_run(tmp_path, demo_dir, capsys):
    out_dir = tmp_path / "dd"
    rc = main(["dedup", "run",
               "--in", f"web={demo_dir / 'el_web.jsonl'}",
               f"wiki={demo_dir / 'el_wiki.jsonl'}",
               "--stage", "both", "--out", str(out_dir)])
    assert rc == 0
    assert (out_dir / "signatures.mhsg").exists()
    assert (out_dir / "survivors.jsonl").exists()


def test_cli_align_and_orpo_check(tmp_path, demo_dir, capsys):
    curated = tmp_path / "curated.jsonl"
    rc = main(["align", "curate", "--in", str(demo_dir / "preferences.jsonl"),
               "--out", str(curated), "--min-rating", "5",
               "--system-messages", str(demo_dir / "system_messages_el.json")])
    assert rc == 0
    rendered = tmp_path / "rendered.jsonl"
    rc = main(["align", "render", "--in", str(curated), "--out", str(rendered)])
    assert rc == 0
    rc = main(["align", "orpo-check", "--trials", "5"])
    assert rc == 0
    assert "OK" in capsys.readouterr().out


def test_cli_embed_workflow(tmp_path, demo_dir, capsys):
    import numpy as np

    from corpus_forge import bpe
    from corpus_forge.embeddings import EmbeddingMatrix, write_matrix

    base_v = tmp_path / "base.json"
    learned_v = tmp_path / "learned.json"
    main(["tok", "train", "--in", str(demo_dir / "en_wiki.jsonl"),
          "--target", "60", "--out", str(base_v)])
    main(["tok", "train", "--in", str(demo_dir / "el_wiki.jsonl"),
          "--target", "60", "--out", str(learned_v)])
    ext_v = tmp_path / "ext.json"
    rc = main(["tok", "extend", "--base", str(base_v), "--learned", str(learned_v),
               "--out", str(ext_v)])
    assert rc == 0

    base_vocab = bpe.load_vocab(base_v)
    matrix_path = tmp_path / "base.emb"
    write_matrix(
        EmbeddingMatrix(
            data=np.zeros((len(base_vocab.tokens), 8), dtype=np.float32)
        ),
        matrix_path,
    )
    grown = tmp_path / "grown.emb"
    rc = main(["embed", "init", "--base-matrix", str(matrix_path),
               "--base-vocab", str(base_v), "--ext-vocab", str(ext_v),
               "--out", str(grown)])
    assert rc == 0
    padded = tmp_path / "padded.emb"
    rc = main(["embed", "pad", "--in", str(grown), "--out", str(padded)])
    assert rc == 0
    capsys.readouterr()
    rc = main(["embed", "info", "--in", str(padded)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert info["rows"] % 8 == 0


def test_cli_stats(tmp_path, demo_dir, capsys):
    vocab_path = tmp_path / "v.json"
    main(["tok", "train", "--in", str(demo_dir / "el_wiki.jsonl"),
          "--target", "50", "--out", str(vocab_path)])
    out_json = tmp_path / "stats.json"
    rc = main(["stats", "--in", str(demo_dir / "el_wiki.jsonl"),
               str(demo_dir / "en_wiki.jsonl"),
               "--vocab", str(vocab_path), "--out", str(out_json)])
    assert rc == 0
    payload = json.loads(out_json.read_text())
    assert payload["total_tokens"] > 0
    assert set(payload["per_subcorpus"]) == {"el_wiki", "en_wiki"}


def test_cli_error_exit_code(tmp_path):
    rc = main(["tok", "fertility", "--vocab", str(tmp_path / "missing.json"),
               "--in", str(tmp_path / "missing.jsonl")])
    assert rc == 1
