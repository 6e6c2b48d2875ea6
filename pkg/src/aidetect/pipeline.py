"""Run orchestration: stage commands, the run directory layout, and the
reproducibility manifest.

Layout inside a run directory:

    splits/    train/validation/test JSONL plus the split manifest
    models/    language model counts and classifier parameters
    scores/    per-split score records, feature dumps, and score matrices
    reports/   weight search, diagnostics, evaluation tables, curves
    manifest.json

The manifest holds the full config snapshot, the seed, per-stage file
digests, calibration parameters, and the chosen weights. Its bytes are a
pure function of (config, seed), which is what makes a finished run
verifiable: re-running must reproduce it exactly. Wall-clock stage times
go to events.log, which is deliberately outside the manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, attack as attack_mod, calibration, corpus, curvature, ensemble, evaluation, linguistics, semantic, synthetic
from .config import RunConfig
from .errors import ConfigError, DataContractError
from .semantic import ScoreRecord

SPLIT_NAMES = ("train", "validation", "test")
MODEL_ROWS = ("m1", "m2", "m3", "simple_average", "ensemble")


# ---------------------------------------------------------------------------
# Run directory, manifest, lock
# ---------------------------------------------------------------------------


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


@dataclass
class RunDir:
    root: Path

    def __post_init__(self) -> None:
        self.root = Path(self.root)

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def path(self, relative: str) -> Path:
        return self.root / relative

    def ensure_layout(self) -> None:
        for sub in ("splits", "models", "scores", "reports", "reports/curves"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)

    def load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {}

    def save_manifest(self, manifest: dict) -> None:
        self.manifest_path.write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    def log_event(self, message: str) -> None:
        with (self.root / "events.log").open("a", encoding="utf-8") as fh:
            fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


class run_lock:
    """Exclusive lock file; two concurrent runs must never share a directory."""

    def __init__(self, rundir: RunDir):
        self.lock_path = rundir.root / ".lock"

    def __enter__(self):
        self.lock_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"run directory is locked by another run: {self.lock_path} (remove the file if stale)"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc_info):
        try:
            self.lock_path.unlink()
        except FileNotFoundError:
            pass
        return False


def _init_manifest(rundir: RunDir, cfg: RunConfig, seed: int, force: bool) -> dict:
    manifest = rundir.load_manifest()
    snapshot = cfg.snapshot()
    if manifest:
        if manifest.get("config") != snapshot or manifest.get("seed") != seed:
            if not force:
                raise ConfigError(
                    "run directory holds a manifest for a different config or seed; "
                    "use --force to reset it"
                )
            manifest = {}
    if not manifest:
        manifest = {
            "tool": {"name": "aidetect", "version": __version__},
            "config": snapshot,
            "seed": seed,
            "stages": {},
        }
    return manifest


def _stage_complete(rundir: RunDir, manifest: dict, stage: str) -> bool:
    entry = manifest.get("stages", {}).get(stage)
    if not entry:
        return False
    for rel, digest in entry["files"].items():
        path = rundir.path(rel)
        if not path.exists() or file_digest(path) != digest:
            return False
    return True


def _record_stage(rundir: RunDir, manifest: dict, stage: str, files: Iterable[str]) -> None:
    manifest.setdefault("stages", {})[stage] = {
        "files": {rel: file_digest(rundir.path(rel)) for rel in sorted(files)}
    }
    rundir.save_manifest(manifest)
    rundir.log_event(f"stage {stage} complete")


# ---------------------------------------------------------------------------
# In-memory pipeline cores (shared by stage commands and multi-seed runs)
# ---------------------------------------------------------------------------


def prepare_documents(cfg: RunConfig) -> tuple[list[corpus.Document], dict[str, int]]:
    """Load or synthesize the corpus, clean every text, and keep only
    documents inside the word-count window."""
    min_words = cfg.get_int("corpus.min_words")
    max_words = cfg.get_int("corpus.max_words")
    path = cfg.get("corpus.path")
    if path:
        raw_docs = corpus.load_corpus_jsonl(path)
    else:
        raw_docs = synthetic.generate_synthetic_corpus(
            n_per_class=cfg.get_int("corpus.synthetic.n_per_class"),
            seed=cfg.get_int("corpus.synthetic.seed"),
            profiles=cfg.get_list("corpus.synthetic.profiles"),
        )
    kept: list[corpus.Document] = []
    rejected = {"too_short": 0, "too_long": 0}
    for doc in raw_docs:
        result = corpus.preprocess(doc.text, min_words, max_words)
        if result.accepted:
            kept.append(
                corpus.Document(
                    id=doc.id, text=result.text, label=doc.label, source=doc.source, generator=doc.generator
                )
            )
        else:
            rejected[result.rejection] += 1
    return kept, rejected


def _ling_caps(cfg: RunConfig) -> dict:
    return {
        "std_cap": cfg.get_float("ling.std_cap"),
        "avg_cap": cfg.get_float("ling.avg_cap"),
        "complex_cap": cfg.get_float("ling.complex_cap"),
        "short_len": cfg.get_int("ling.short_len"),
    }


def _doc_seed(run_seed: int, doc_id: str) -> int:
    return semantic.fnv1a_64(f"{run_seed}:{doc_id}".encode("utf-8")) % (2**31)


def train_models(
    cfg: RunConfig, train_docs: Sequence[corpus.Document], seed: int
) -> tuple[curvature.NGramModel, semantic.MlpParams, list[float]]:
    """Train the reference language model on machine-class training text and
    the classifier head on the full training split."""
    ai_texts = [d.text for d in train_docs if d.label == 1]
    if not ai_texts:
        raise DataContractError("training split contains no machine-class documents for the language model")
    lm = curvature.train_lm(ai_texts, order=cfg.get_int("lm.order"), alpha=cfg.get_float("lm.alpha"))
    hyper = semantic.MlpHyper(
        dim=cfg.get_int("mlp.dim"),
        hidden=cfg.get_int("mlp.hidden"),
        learning_rate=cfg.get_float("mlp.lr"),
        batch_size=cfg.get_int("mlp.batch"),
        epochs=cfg.get_int("mlp.epochs"),
        seed=seed,
    )
    params, trace = semantic.train_mlp(train_docs, hyper)
    return lm, params, trace


def _load_externals(cfg: RunConfig, all_ids: set[str]) -> dict[str, dict[str, ScoreRecord]]:
    externals: dict[str, dict[str, ScoreRecord]] = {}
    for det in semantic.DETECTOR_IDS:
        path = cfg.get(f"external.{det}")
        if not path:
            continue
        records = semantic.ingest_external_scores(path, all_ids)
        table = {r.doc_id: r for r in records if r.detector_id == det}
        if not table:
            raise DataContractError(f"external score file {path} holds no records for detector {det}")
        externals[det] = table
    return externals


def score_documents(
    cfg: RunConfig,
    docs: Sequence[corpus.Document],
    lm: curvature.NGramModel,
    mlp: semantic.MlpParams,
    seed: int,
    externals: dict[str, dict[str, ScoreRecord]] | None = None,
    caches: dict | None = None,
) -> dict[str, list[ScoreRecord]]:
    """Raw scores for every detector over the given documents: classifier
    logit (with its sigmoid as provisional probability), curvature gap
    (probability deferred to calibration), and the linguistic average."""
    externals = externals or {}
    caches = caches if caches is not None else {}
    feat_cache: dict[str, np.ndarray] = caches.setdefault("features", {})
    m3_cache: dict[str, float] = caches.setdefault("m3", {})
    dim = cfg.get_int("mlp.dim")
    k = cfg.get_int("curv.k")
    mask_rate = cfg.get_float("curv.mask_rate")
    caps = _ling_caps(cfg)

    out: dict[str, list[ScoreRecord]] = {det: [] for det in semantic.DETECTOR_IDS}
    for det in semantic.DETECTOR_IDS:
        table = externals.get(det)
        if table is not None:
            missing = [d.id for d in docs if d.id not in table]
            if missing:
                raise DataContractError(f"external {det} scores missing for documents: {missing}")
            out[det] = [table[d.id] for d in docs]
            continue
        for doc in docs:
            if det == "m1":
                vec = feat_cache.get(doc.id)
                if vec is None:
                    vec = semantic.featurize(doc.text, dim).vector
                    feat_cache[doc.id] = vec
                logit = semantic.mlp_logit(mlp, vec)
                out[det].append(ScoreRecord(doc.id, "m1", logit, float(semantic.sigmoid(logit))))
            elif det == "m2":
                score = curvature.curvature_score(lm, doc.text, k=k, mask_rate=mask_rate, seed=_doc_seed(seed, doc.id))
                out[det].append(ScoreRecord(doc.id, "m2", score.s2, None))
            else:
                raw = m3_cache.get(doc.id)
                if raw is None:
                    raw = linguistics.linguistic_probability(linguistics.extract_features(doc.text, **caps))
                    m3_cache[doc.id] = raw
                out[det].append(ScoreRecord(doc.id, "m3", raw, raw))
    return out


def fit_calibrations(
    cfg: RunConfig,
    val_records: dict[str, list[ScoreRecord]],
    val_labels: Sequence[int],
) -> dict[str, calibration.CalibrationParams]:
    """Platt parameters fitted on the validation split: always for the
    curvature detector, optionally for the other two."""
    fits: dict[str, calibration.CalibrationParams] = {}
    wanted = {"m2"}
    if cfg.get_bool("sem.calibrate"):
        wanted.add("m1")
    if cfg.get_bool("ling.calibrate"):
        wanted.add("m3")
    for det in sorted(wanted):
        raw = [r.raw_score for r in val_records[det]]
        fits[det] = calibration.fit_platt(raw, list(val_labels), detector_id=det)
    return fits


def records_to_matrix(
    records: dict[str, list[ScoreRecord]],
    docs: Sequence[corpus.Document],
    fits: dict[str, calibration.CalibrationParams],
) -> ensemble.ScoreMatrix:
    """Assemble the N x 3 probability matrix, routing each detector's raw
    score through its calibration when one was fitted."""
    n = len(docs)
    probs = np.zeros((n, 3), dtype=np.float64)
    for col, det in enumerate(ensemble.COLUMNS):
        recs = records[det]
        if len(recs) != n:
            raise DataContractError(f"detector {det} produced {len(recs)} records for {n} documents")
        for i, (doc, rec) in enumerate(zip(docs, recs)):
            if rec.doc_id != doc.id:
                raise DataContractError(f"detector {det} record order mismatch at row {i}")
            if det in fits:
                p = calibration.apply_platt(fits[det], rec.raw_score)
            elif rec.prob is not None:
                p = rec.prob
            else:
                raise DataContractError(
                    f"detector {det} has no probability for {doc.id} and no calibration was fitted"
                )
            probs[i, col] = p
    return ensemble.ScoreMatrix(
        doc_ids=[d.id for d in docs],
        probs=probs,
        labels=np.array([d.label for d in docs], dtype=np.int64),
    )


def evaluate_matrix(
    cfg: RunConfig,
    matrix: ensemble.ScoreMatrix,
    sources: Sequence[str],
    weights: ensemble.SimplexWeights,
) -> dict[str, evaluation.EvalReport]:
    """Reports for each single detector, the uniform average, and the
    optimized ensemble on one score matrix."""
    threshold = cfg.get_float("ens.threshold")
    source_filter = cfg.get("eval.fpr_source")
    uniform = ensemble.SimplexWeights(1 / 3, 1 / 3, 1 / 3)
    columns = {
        "m1": matrix.probs[:, 0],
        "m2": matrix.probs[:, 1],
        "m3": matrix.probs[:, 2],
        "simple_average": ensemble.fuse_column(uniform, matrix.probs),
        "ensemble": ensemble.fuse_column(weights, matrix.probs),
    }
    return {
        name: evaluation.evaluate_scores(probs, matrix.labels, sources, threshold, source_filter)
        for name, probs in columns.items()
    }


def run_single_seed(cfg: RunConfig, seed: int, caches: dict | None = None) -> dict[str, evaluation.EvalReport]:
    """One full in-memory pipeline pass: split, train, score, calibrate,
    optimize, evaluate. Used by the multi-seed significance study."""
    caches = caches if caches is not None else {}
    docs = caches.get("docs")
    if docs is None:
        docs, _ = prepare_documents(cfg)
        caches["docs"] = docs
    split = corpus.stratified_split(docs, cfg.get_floats("split.ratios"), seed)
    lm, mlp, _ = train_models(cfg, split.train, seed)
    val_records = score_documents(cfg, split.validation, lm, mlp, seed, caches=caches)
    test_records = score_documents(cfg, split.test, lm, mlp, seed, caches=caches)
    fits = fit_calibrations(cfg, val_records, [d.label for d in split.validation])
    val_matrix = records_to_matrix(val_records, split.validation, fits)
    test_matrix = records_to_matrix(test_records, split.test, fits)
    search = ensemble.grid_weight_search(
        val_matrix, delta=cfg.get_float("ens.delta"), threshold=cfg.get_float("ens.threshold")
    )
    return evaluate_matrix(cfg, test_matrix, [d.source for d in split.test], search.weights)


# ---------------------------------------------------------------------------
# Stage commands
# ---------------------------------------------------------------------------


def cmd_prepare(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "prepare"):
        print("prepare: up to date (digests match); use --force to redo")
        return
    docs, rejected = prepare_documents(cfg)
    split = corpus.stratified_split(docs, cfg.get_floats("split.ratios"), seed)
    files = []
    for name in SPLIT_NAMES:
        rel = f"splits/{name}.jsonl"
        corpus.write_corpus_jsonl(rundir.path(rel), getattr(split, name))
        files.append(rel)
    split_manifest = {
        "seed": seed,
        "ratios": cfg.get_floats("split.ratios"),
        "counts": {name: len(getattr(split, name)) for name in SPLIT_NAMES},
        "rejected": rejected,
    }
    rel = "splits/split_manifest.json"
    rundir.path(rel).write_text(json.dumps(split_manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    files.append(rel)
    _record_stage(rundir, manifest, "prepare", files)
    print(
        f"prepare: {len(docs)} documents "
        f"({split_manifest['counts']}), rejected {rejected}"
    )


def _load_split(rundir: RunDir, name: str) -> list[corpus.Document]:
    path = rundir.path(f"splits/{name}.jsonl")
    if not path.exists():
        raise ConfigError(f"split file missing (run prepare first): {path}")
    return corpus.load_corpus_jsonl(path)


def cmd_train(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "train"):
        print("train: up to date (digests match); use --force to redo")
        return
    train_docs = _load_split(rundir, "train")
    lm, mlp, trace = train_models(cfg, train_docs, seed)
    curvature.save_model(lm, rundir.path("models/lm.txt"))
    semantic.save_params(mlp, rundir.path("models/mlp.json"))
    rundir.path("models/mlp_loss_trace.json").write_text(
        json.dumps([repr(x) for x in trace]) + "\n", encoding="utf-8"
    )
    _record_stage(rundir, manifest, "train", ["models/lm.txt", "models/mlp.json", "models/mlp_loss_trace.json"])
    print(f"train: lm over {lm.vocab_size} vocab, mlp final loss {trace[-1] if trace else float('nan'):.6f}")


def _write_records_and_features(
    cfg: RunConfig, rundir: RunDir, name: str, docs: Sequence[corpus.Document], records: dict[str, list[ScoreRecord]]
) -> list[str]:
    rel_records = f"scores/{name}_records.jsonl"
    flat = [r for det in semantic.DETECTOR_IDS for r in records[det]]
    semantic.write_score_records(rundir.path(rel_records), flat)
    rel_features = f"scores/{name}_features.csv"
    caps = _ling_caps(cfg)
    with rundir.path(rel_features).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "f1_ttr_ai", "f2_sentlen_std_ai", "f3_sentlen_avg_ai", "f4_complex_ratio_ai", "f5_short_sent_freq_ai"])
        for doc in docs:
            fv = linguistics.extract_features(doc.text, **caps)
            writer.writerow([doc.id, *(repr(v) for v in fv.as_tuple())])
    return [rel_records, rel_features]


def cmd_score(cfg: RunConfig, rundir: RunDir, seed: int, split_name: str = "all", force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    names = ("validation", "test") if split_name == "all" else (split_name,)
    if split_name not in SPLIT_NAMES + ("all",):
        raise ConfigError(f"unknown split {split_name!r}")
    lm_path = rundir.path("models/lm.txt")
    if not lm_path.exists():
        raise ConfigError(f"models missing (run train first): {lm_path}")
    lm = curvature.load_model(lm_path)
    mlp = semantic.load_params(rundir.path("models/mlp.json"))
    all_ids = {d.id for name in SPLIT_NAMES for d in _load_split(rundir, name)}
    externals = _load_externals(cfg, all_ids)
    for name in names:
        stage = f"score:{name}"
        if not force and _stage_complete(rundir, manifest, stage):
            print(f"score[{name}]: up to date (digests match); use --force to redo")
            continue
        docs = _load_split(rundir, name)
        records = score_documents(cfg, docs, lm, mlp, seed, externals)
        files = _write_records_and_features(cfg, rundir, name, docs, records)
        _record_stage(rundir, manifest, stage, files)
        print(f"score[{name}]: {len(docs)} documents scored by {len(semantic.DETECTOR_IDS)} detectors")


def _load_records(rundir: RunDir, name: str, docs: Sequence[corpus.Document]) -> dict[str, list[ScoreRecord]]:
    path = rundir.path(f"scores/{name}_records.jsonl")
    if not path.exists():
        raise ConfigError(f"score records missing (run score first): {path}")
    records = semantic.ingest_external_scores(path, {d.id for d in docs})
    by_det: dict[str, dict[str, ScoreRecord]] = {det: {} for det in semantic.DETECTOR_IDS}
    for r in records:
        by_det[r.detector_id][r.doc_id] = r
    out: dict[str, list[ScoreRecord]] = {}
    for det in semantic.DETECTOR_IDS:
        missing = [d.id for d in docs if d.id not in by_det[det]]
        if missing:
            raise DataContractError(f"stored {det} scores missing for documents: {missing}")
        out[det] = [by_det[det][d.id] for d in docs]
    return out


def cmd_calibrate(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "calibrate"):
        print("calibrate: up to date (digests match); use --force to redo")
        return
    val_docs = _load_split(rundir, "validation")
    val_records = _load_records(rundir, "validation", val_docs)
    fits = fit_calibrations(cfg, val_records, [d.label for d in val_docs])
    manifest["calibration"] = {
        det: {
            "detector_id": det,
            "a": params.a,
            "b": params.b,
            "fit_loss": params.fit_loss,
            "n_points": params.n_points,
        }
        for det, params in fits.items()
    }
    files = []
    for name in ("validation", "test"):
        if not rundir.path(f"scores/{name}_records.jsonl").exists():
            continue
        docs = _load_split(rundir, name)
        records = _load_records(rundir, name, docs)
        matrix = records_to_matrix(records, docs, fits)
        rel = f"scores/{name}_matrix.csv"
        ensemble.write_score_matrix(rundir.path(rel), matrix)
        files.append(rel)
    if not files:
        raise ConfigError("no scored splits found; run score before calibrate")
    _record_stage(rundir, manifest, "calibrate", files)
    fitted = ", ".join(f"{det}(a={p.a:.4f}, b={p.b:.4f})" for det, p in fits.items())
    print(f"calibrate: fitted {fitted}")


def _load_calibrations(manifest: dict) -> dict[str, calibration.CalibrationParams]:
    out = {}
    for det, row in manifest.get("calibration", {}).items():
        out[det] = calibration.CalibrationParams(
            a=row["a"], b=row["b"], detector_id=det, fit_loss=row["fit_loss"], n_points=row["n_points"]
        )
    return out


def cmd_optimize(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "optimize"):
        print("optimize: up to date (digests match); use --force to redo")
        return
    val_matrix = ensemble.read_score_matrix(rundir.path("scores/validation_matrix.csv"))
    delta = cfg.get_float("ens.delta")
    threshold = cfg.get_float("ens.threshold")
    search = ensemble.grid_weight_search(val_matrix, delta=delta, threshold=threshold)
    report = ensemble.diversity_report(val_matrix, search.weights)

    weights_payload = {
        "w1": search.weights.w1,
        "w2": search.weights.w2,
        "w3": search.weights.w3,
        "validation_f1": search.f1,
        "delta": delta,
        "threshold": threshold,
    }
    rundir.path("reports/weights.json").write_text(
        json.dumps(weights_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with rundir.path("reports/candidates.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["w1", "w2", "w3", "f1"])
        for w1, w2, w3, f1 in search.candidates:
            writer.writerow([repr(w1), repr(w2), repr(w3), repr(f1)])
    diversity_payload = {
        "correlation": report.correlation.tolist(),
        "covariance": report.covariance.tolist(),
        "ensemble_variance": report.ensemble_variance,
        "columns": list(ensemble.COLUMNS),
    }
    rundir.path("reports/diversity.json").write_text(
        json.dumps(diversity_payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    with rundir.path("reports/correlation.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", *ensemble.COLUMNS])
        for i, det in enumerate(ensemble.COLUMNS):
            writer.writerow([det, *(repr(v) for v in report.correlation[i])])
    manifest["weights"] = weights_payload
    _record_stage(
        rundir,
        manifest,
        "optimize",
        ["reports/weights.json", "reports/candidates.csv", "reports/diversity.json", "reports/correlation.csv"],
    )
    print(
        f"optimize: w=({search.weights.w1:.2f}, {search.weights.w2:.2f}, {search.weights.w3:.2f}) "
        f"validation F1 {search.f1:.4f}, ensemble variance {report.ensemble_variance:.6f}"
    )


def _load_weights(rundir: RunDir) -> ensemble.SimplexWeights:
    path = rundir.path("reports/weights.json")
    if not path.exists():
        raise ConfigError(f"weights missing (run optimize first): {path}")
    payload = json.loads(path.read_text(encoding="utf-8"))
    return ensemble.SimplexWeights(payload["w1"], payload["w2"], payload["w3"])


def _report_row(name: str, rep: evaluation.EvalReport) -> list[str]:
    return [name, repr(rep.accuracy), repr(rep.f1), repr(rep.auc), repr(rep.academic_fpr)]


def cmd_evaluate(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "evaluate"):
        print("evaluate: up to date (digests match); use --force to redo")
        return
    test_docs = _load_split(rundir, "test")
    test_matrix = ensemble.read_score_matrix(rundir.path("scores/test_matrix.csv"))
    val_matrix = ensemble.read_score_matrix(rundir.path("scores/validation_matrix.csv"))
    weights = _load_weights(rundir)
    sources = [d.source for d in test_docs]
    reports = evaluate_matrix(cfg, test_matrix, sources, weights)

    files = []
    rel = "reports/main_table.csv"
    with rundir.path(rel).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "accuracy", "f1", "auc", "academic_fpr"])
        for name in MODEL_ROWS:
            writer.writerow(_report_row(name, reports[name]))
    files.append(rel)
    for name in MODEL_ROWS:
        rel = f"reports/eval_{name}.json"
        rep = reports[name]
        payload = asdict(rep) | {"confusion": list(rep.confusion)}
        rundir.path(rel).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        files.append(rel)

    threshold = cfg.get_float("ens.threshold")
    step = cfg.get_float("eval.curve_step")
    source_filter = cfg.get("eval.fpr_source")
    uniform = ensemble.SimplexWeights(1 / 3, 1 / 3, 1 / 3)
    columns = {
        "m1": test_matrix.probs[:, 0],
        "m2": test_matrix.probs[:, 1],
        "m3": test_matrix.probs[:, 2],
        "simple_average": ensemble.fuse_column(uniform, test_matrix.probs),
        "ensemble": ensemble.fuse_column(weights, test_matrix.probs),
    }
    for name, probs in columns.items():
        roc, fprth = evaluation.curves(probs, test_matrix.labels, sources, source_filter, step)
        for series, suffix in ((roc, "roc"), (fprth, "fpr_vs_threshold")):
            rel = f"reports/curves/{name}_{suffix}.csv"
            with rundir.path(rel).open("w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["x", "y"])
                for x, y in series.points:
                    writer.writerow([repr(x), repr(y)])
            files.append(rel)

    delta = cfg.get_float("ens.delta")
    rel = "reports/ablation.csv"
    full_f1 = reports["ensemble"].f1
    with rundir.path(rel).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ablated", "test_f1", "drop_abs", "drop_pct"])
        writer.writerow(["none", repr(full_f1), repr(0.0), repr(0.0)])
        for det in ensemble.COLUMNS:
            result = ensemble.ablate(val_matrix, test_matrix, det, delta=delta, threshold=threshold)
            pct = 100.0 * result.drop_vs_full / full_f1 if full_f1 > 0 else math.nan
            writer.writerow([det, repr(result.test_f1), repr(result.drop_vs_full), repr(pct)])
    files.append(rel)

    _record_stage(rundir, manifest, "evaluate", files)
    ens_rep = reports["ensemble"]
    print(
        f"evaluate: ensemble acc {ens_rep.accuracy:.4f}, F1 {ens_rep.f1:.4f}, "
        f"AUC {ens_rep.auc:.4f}, academic FPR {ens_rep.academic_fpr:.4f}"
    )


def cmd_ablate(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "ablate"):
        print("ablate: up to date (digests match); use --force to redo")
        return
    val_matrix = ensemble.read_score_matrix(rundir.path("scores/validation_matrix.csv"))
    test_matrix = ensemble.read_score_matrix(rundir.path("scores/test_matrix.csv"))
    delta = cfg.get_float("ens.delta")
    threshold = cfg.get_float("ens.threshold")
    rows = []
    for det in ensemble.COLUMNS:
        rows.append(ensemble.ablate(val_matrix, test_matrix, det, delta=delta, threshold=threshold))
    rel = "reports/ablation.csv"
    full = ensemble.grid_weight_search(val_matrix, delta=delta, threshold=threshold)
    full_test_f1 = ensemble._f1_at_threshold(
        ensemble.fuse_column(full.weights, test_matrix.probs), test_matrix.labels, threshold
    )
    with rundir.path(rel).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ablated", "test_f1", "drop_abs", "drop_pct"])
        writer.writerow(["none", repr(full_test_f1), repr(0.0), repr(0.0)])
        for r in rows:
            pct = 100.0 * r.drop_vs_full / full_test_f1 if full_test_f1 > 0 else math.nan
            writer.writerow([r.dropped, repr(r.test_f1), repr(r.drop_vs_full), repr(pct)])
    _record_stage(rundir, manifest, "ablate", [rel])
    print("ablate: wrote " + rel)


def cmd_attack(
    cfg: RunConfig,
    rundir: RunDir,
    seed: int,
    attack_name: str | None = None,
    rate: float | None = None,
    force: bool = False,
) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    name = attack_name or cfg.get("attack.name")
    if name not in attack_mod.ATTACKS:
        raise ConfigError(f"unknown attack {name!r}; available: {attack_mod.ATTACKS}")
    rate = cfg.get_float("attack.rate") if rate is None else rate
    stage = f"attack:{name}:{rate!r}"
    if not force and _stage_complete(rundir, manifest, stage):
        print(f"attack[{name}]: up to date (digests match); use --force to redo")
        return
    test_docs = _load_split(rundir, "test")
    lm = curvature.load_model(rundir.path("models/lm.txt"))
    mlp = semantic.load_params(rundir.path("models/mlp.json"))
    fits = _load_calibrations(manifest)
    if "m2" not in fits:
        raise ConfigError("calibration parameters missing from manifest; run calibrate first")
    weights = _load_weights(rundir)
    threshold = cfg.get_float("ens.threshold")

    attacked_docs = []
    for doc in test_docs:
        if doc.label == 1:
            new_text = attack_mod.apply_attack(name, doc.text, rate, seed=_doc_seed(seed, doc.id))
            attacked_docs.append(
                corpus.Document(id=doc.id, text=new_text, label=doc.label, source=doc.source, generator=doc.generator)
            )
        else:
            attacked_docs.append(doc)

    clean_matrix = ensemble.read_score_matrix(rundir.path("scores/test_matrix.csv"))
    attacked_records = score_documents(cfg, attacked_docs, lm, mlp, seed)
    attacked_matrix = records_to_matrix(attacked_records, attacked_docs, fits)
    rel_matrix = f"scores/test_attacked_{name}_matrix.csv"
    ensemble.write_score_matrix(rundir.path(rel_matrix), attacked_matrix)

    uniform = ensemble.SimplexWeights(1 / 3, 1 / 3, 1 / 3)
    rel = f"reports/attack_{name}.csv"
    with rundir.path(rel).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "accuracy_clean", "accuracy_attacked", "delta"])
        for model in MODEL_ROWS:
            clean_probs = _model_column(clean_matrix, model, uniform, weights)
            att_probs = _model_column(attacked_matrix, model, uniform, weights)
            _, acc_clean = evaluation.f1_accuracy(evaluation.confusion(clean_probs, clean_matrix.labels, threshold))
            _, acc_att = evaluation.f1_accuracy(evaluation.confusion(att_probs, attacked_matrix.labels, threshold))
            writer.writerow([model, repr(acc_clean), repr(acc_att), repr(acc_att - acc_clean)])
    _record_stage(rundir, manifest, stage, [rel_matrix, rel])
    print(f"attack[{name} rate={rate}]: wrote {rel}")


def _model_column(matrix, model, uniform, weights):
    if model == "m1":
        return matrix.probs[:, 0]
    if model == "m2":
        return matrix.probs[:, 1]
    if model == "m3":
        return matrix.probs[:, 2]
    if model == "simple_average":
        return ensemble.fuse_column(uniform, matrix.probs)
    return ensemble.fuse_column(weights, matrix.probs)


def cmd_multiseed(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    rundir.ensure_layout()
    manifest = _init_manifest(rundir, cfg, seed, force)
    if not force and _stage_complete(rundir, manifest, "multiseed"):
        print("multiseed: up to date (digests match); use --force to redo")
        return
    seeds = cfg.get_ints("eval.seeds")
    result = evaluation.multi_seed_run(cfg, seeds)
    rel_metrics = "reports/multiseed_metrics.csv"
    with rundir.path(rel_metrics).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed", "model", "accuracy", "f1", "auc", "academic_fpr"])
        for s, reports in zip(seeds, result.per_seed):
            for model in MODEL_ROWS:
                rep = reports[model]
                writer.writerow([s, model, repr(rep.accuracy), repr(rep.f1), repr(rep.auc), repr(rep.academic_fpr)])
    rel_sig = "reports/significance.csv"
    with rundir.path(rel_sig).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "baseline", "statistic", "p_value", "mean_ensemble", "mean_baseline", "error"])
        for row in result.significance:
            writer.writerow(
                [
                    row.metric,
                    row.baseline,
                    "" if row.statistic is None else repr(row.statistic),
                    "" if row.p_value is None else repr(row.p_value),
                    repr(row.mean_ensemble),
                    repr(row.mean_baseline),
                    row.error or "",
                ]
            )
    _record_stage(rundir, manifest, "multiseed", [rel_metrics, rel_sig])
    for row in result.significance:
        if row.error:
            print(f"multiseed[{row.metric} vs {row.baseline}]: {row.error}")
        else:
            print(
                f"multiseed[{row.metric} vs {row.baseline}]: W={row.statistic}, p={row.p_value:.5f}, "
                f"ensemble mean {row.mean_ensemble:.4f} vs baseline {row.mean_baseline:.4f}"
            )


def cmd_report(cfg: RunConfig, rundir: RunDir, seed: int, force: bool = False) -> None:
    manifest = rundir.load_manifest()
    if not manifest:
        raise ConfigError(f"no manifest found in {rundir.root}")
    lines = [f"aidetect run report ({rundir.root})", ""]
    lines.append(f"seed: {manifest.get('seed')}")
    stages = sorted(manifest.get("stages", {}))
    lines.append("completed stages: " + (", ".join(stages) if stages else "none"))
    if "weights" in manifest:
        w = manifest["weights"]
        lines.append(
            f"weights: ({w['w1']:.2f}, {w['w2']:.2f}, {w['w3']:.2f}) validation F1 {w['validation_f1']:.4f}"
        )
    for det, row in manifest.get("calibration", {}).items():
        lines.append(f"calibration {det}: a={row['a']:.4f} b={row['b']:.4f} loss={row['fit_loss']:.4f}")
    table_path = rundir.path("reports/main_table.csv")
    if table_path.exists():
        lines.append("")
        lines.append("test metrics (model, accuracy, f1, auc, academic_fpr):")
        with table_path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                lines.append(
                    f"  {row[0]:>14}: acc={float(row[1]):.4f} f1={float(row[2]):.4f} "
                    f"auc={float(row[3]):.4f} fpr={float(row[4]):.4f}"
                )
    text = "\n".join(lines) + "\n"
    rundir.path("reports").mkdir(parents=True, exist_ok=True)
    rundir.path("reports/summary.txt").write_text(text, encoding="utf-8")
    print(text, end="")
