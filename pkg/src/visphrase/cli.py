"""Command-line pipelines: train, annotate, evaluate, represent, classify.

Exit codes: 0 success, 2 configuration or input-format error, 3 model/data
mismatch, 4 misalignment between annotations and gold data.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .attribute_repr import (
    Fusion,
    accuracy,
    attribute_vectors,
    confusion_matrix,
    save_attribute_vectors,
    save_classifier,
    select_fusion_dim,
    select_reg,
    train_ova,
)
from .config import ConfigError, PipelineConfig, load_config, parse_k
from .decomposition import DEFAULT_GCV_GRID, PhraseTrainingSet, load_dec, load_triples, save_dec, train_dec
from .embedding_store import EmbeddingSpace, Ranking, load_pos, load_space
from .errors import ContractError, FormatError, NoPrototypeError, UndefinedMetricError
from .evaluation import (
    EvalReport,
    adjective_concreteness,
    concreteness_score,
    hit_at_k,
    load_concreteness,
    load_gold,
    mean_attribute_rank,
    per_attribute_auc,
    recall_at_k,
)
from .labeling import annotate_dec_batch, annotate_direct_batch, load_bigrams, load_cooc, lm_rank, sp_rank, vlm_rank
from .projection import (
    DEFAULT_LAMBDA_GRID,
    DEFAULT_POWER_GRID,
    PairedDataset,
    comparison_space,
    load_model,
    project,
    save_model,
    train_ncca,
    train_ridge,
)

log = logging.getLogger("visphrase")


class MismatchError(Exception):
    """Models and data disagree on dimensions or labels (exit code 3)."""


class AlignmentError(Exception):
    """Annotated and gold image ids differ (exit code 4)."""


# ---------------------------------------------------------------- helpers


def _provenance(cfg: PipelineConfig, **extra) -> dict:
    return {"library_version": __version__, "config_hash": cfg.config_hash(), **extra}


def _header(cfg: PipelineConfig, **extra) -> str:
    fields = " ".join(f"{k}={v}" for k, v in extra.items())
    return f"visphrase {__version__} config={cfg.config_hash()}" + (f" {fields}" if fields else "")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _write_manifest(cfg: PipelineConfig, command: str, files) -> None:
    entries = {}
    for f in files:
        f = Path(f)
        entries[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    _write_json(cfg.output_dir / f"{command}.manifest.json", {"command": command, "files": entries, **_provenance(cfg)})


def _grid(cfg: PipelineConfig, section: str, key: str, default) -> list[float]:
    return cfg.get_floats(section, key) if cfg.has(section, key) else list(default)


def _load_words(cfg: PipelineConfig) -> EmbeddingSpace:
    space = load_space(cfg.input_path("words"), cfg.get("data", "word_format"))
    if cfg.has("data", "words_pos"):
        try:
            space = space.with_pos(load_pos(cfg.input_path("words_pos")))
        except ContractError as exc:
            raise MismatchError(f"POS file does not cover the word space: {exc}") from None
    if cfg.has("data", "word_freq"):
        ranks = {}
        for label, value in _rows(cfg.input_path("word_freq"), 2):
            ranks[label] = int(value)
        space = space.with_frequency_rank(ranks)
    return space


def _rows(path: Path, width: int):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != width:
                raise FormatError(f"{path}:{lineno}: expected {width} tab-separated fields")
            yield parts


def _load_images(cfg: PipelineConfig, key: str) -> EmbeddingSpace:
    return load_space(cfg.input_path(key), cfg.get("data", "word_format"))


def _restrict(cfg: PipelineConfig, words: EmbeddingSpace, key: str, pos: str):
    if not cfg.has("annotate", key):
        return None
    if words.frequency_rank is None:
        raise ConfigError(f"[annotate] {key} needs a [data] word_freq file")
    return words.most_frequent(cfg.get_int("annotate", key), pos)


def _require_pos(words: EmbeddingSpace) -> None:
    if words.pos is None:
        raise ConfigError("this command needs POS tags: set [data] words_pos")


def _check_proj(proj, images: EmbeddingSpace, words: EmbeddingSpace) -> None:
    if proj.source_dim != images.dim:
        raise MismatchError(f"projection expects {proj.source_dim}-dim images, got {images.dim}")
    if proj.target_dim != words.dim:
        raise MismatchError(f"projection targets {proj.target_dim} dims, word space has {words.dim}")


def _load_proj(cfg: PipelineConfig, name: str | None = None):
    path = cfg.output_dir / (name or cfg.get("projection", "model"))
    if not path.is_file():
        raise ConfigError(f"projection model not found: {path} (run train-proj first)")
    return load_model(path)


def _load_decomp(cfg: PipelineConfig):
    path = cfg.output_dir / cfg.get("decomposition", "model")
    if not path.is_file():
        raise ConfigError(f"decomposition model not found: {path} (run train-dec first)")
    return load_dec(path)


def _loo_name(cfg: PipelineConfig, label: str) -> str:
    stem = Path(cfg.get("projection", "model")).stem
    return f"{stem}_loo_{label}.json"


def _loo_labels(cfg: PipelineConfig, labels) -> list[str] | None:
    value = cfg.get("projection", "leave_one_out")
    if value == "none":
        return None
    if value == "all":
        return sorted(set(labels))
    chosen = cfg.get_list("projection", "leave_one_out")
    missing = sorted(set(chosen) - set(labels))
    if missing:
        raise MismatchError(f"leave-one-out labels absent from the training pairs: {missing}")
    return chosen


def _write_rankings(path: Path, header: str, rankings_by_kind: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {header}\n")
        fh.write("# columns: image_id kind rank label score\n")
        kinds = sorted(rankings_by_kind)
        n = len(next(iter(rankings_by_kind.values())))
        for i in range(n):
            for kind in kinds:
                r = rankings_by_kind[kind][i]
                for rank, (label, score) in enumerate(r.items, start=1):
                    fh.write(f"{r.query_id}\t{kind}\t{rank}\t{label}\t{score!r}\n")


def read_annotations(path) -> tuple[dict, dict]:
    """Parse an annotations TSV into ``{kind: [Ranking, ...]}`` plus the
    key/value fields of its first header comment."""
    header: dict = {}
    items: dict = {}
    order: list = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                if lineno == 1:
                    header = dict(f.split("=", 1) for f in line[1:].split() if "=" in f)
                continue
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise FormatError(f"{path}:{lineno}: expected 5 tab-separated fields")
            iid, kind, _, label, score = parts
            key = (kind, iid)
            if key not in items:
                items[key] = []
                order.append(key)
            items[key].append((label, float(score)))
    out: dict = {}
    for kind, iid in order:
        out.setdefault(kind, []).append(Ranking(iid, tuple(items[(kind, iid)])))
    return out, header


# ---------------------------------------------------------------- commands


def cmd_train_proj(cfg: PipelineConfig) -> list[Path]:
    words = _load_words(cfg)
    images = _load_images(cfg, "train_images")
    pairs = [tuple(p) for p in _rows(cfg.input_path("train_pairs"), 2)]
    try:
        data = PairedDataset.from_spaces(images, pairs, words)
    except ContractError as exc:
        raise MismatchError(f"training pairs do not match the vector files: {exc}") from None
    method = cfg.get("projection", "method")
    seed = cfg.seed

    def fit(d: PairedDataset):
        if method == "ridge":
            lam = cfg.get("projection", "lambda")
            lam = lam if lam == "auto" else cfg.get_float("projection", "lambda")
            grid = _grid(cfg, "projection", "lambda_grid", DEFAULT_LAMBDA_GRID)
            return train_ridge(d, lam, grid, cfg.get_int("projection", "folds"), seed)
        power = cfg.get("projection", "power")
        power = power if power == "auto" else cfg.get_float("projection", "power")
        grid = _grid(cfg, "projection", "power_grid", DEFAULT_POWER_GRID)
        return train_ncca(d, power, grid, holdout=cfg.get_float("projection", "holdout"), seed=seed)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    outputs, entries = [], []
    excluded = _loo_labels(cfg, data.labels)
    jobs = [(None, cfg.get("projection", "model"))] if excluded is None else [(l, _loo_name(cfg, l)) for l in excluded]
    for label, name in jobs:
        subset = data if label is None else data.without_label(label)
        log.info("training %s projection on %d pairs%s", method, len(subset), "" if label is None else f" without {label!r}")
        model = fit(subset)
        path = cfg.output_dir / name
        save_model(model, path, {"excluded_label": label, **_provenance(cfg)})
        outputs.append(path)
        entry = {"file": name, "excluded_label": label, "n_pairs": len(subset)}
        entry.update({k: v for k, v in model.metadata.items() if k in ("cv_errors", "holdout_accuracy", "grid")})
        entry["lambda" if method == "ridge" else "power"] = model.lam if method == "ridge" else model.power
        entries.append(entry)
    log_path = cfg.output_dir / "train-proj.log.json"
    _write_json(log_path, {"method": method, "models": entries, **_provenance(cfg)})
    outputs.append(log_path)
    _write_manifest(cfg, "train-proj", outputs)
    return outputs


def cmd_train_dec(cfg: PipelineConfig) -> list[Path]:
    words = _load_words(cfg)
    phrases = load_space(cfg.input_path("phrases"), cfg.get("data", "word_format"))
    triples = load_triples(cfg.input_path("triples"))
    if phrases.dim != words.dim:
        raise MismatchError(f"phrase vectors have {phrases.dim} dims, word space {words.dim}")
    try:
        data = PhraseTrainingSet.from_spaces(phrases, triples, words, cap=cfg.get_int("decomposition", "cap"))
    except ContractError as exc:
        raise MismatchError(f"triples do not match the vector files: {exc}") from None
    lam = cfg.get("decomposition", "lambda")
    lam = lam if lam == "auto-gcv" else cfg.get_float("decomposition", "lambda")
    model = train_dec(data, lam, _grid(cfg, "decomposition", "lambda_grid", DEFAULT_GCV_GRID))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_dir / cfg.get("decomposition", "model")
    save_dec(model, path, {"n_triples_input": len(triples), **_provenance(cfg)})
    log_path = cfg.output_dir / "train-dec.log.json"
    _write_json(log_path, {"lambda": model.lam, "n_triples": len(data), "n_triples_input": len(triples), **_provenance(cfg)})
    _write_manifest(cfg, "train-dec", [path, log_path])
    return [path, log_path]


def cmd_annotate(cfg: PipelineConfig) -> list[Path]:
    mode = cfg.get("annotate", "mode")
    words = _load_words(cfg)
    _require_pos(words)
    images = _load_images(cfg, "test_images")
    ids = list(images.labels)
    k = parse_k(cfg.get("annotate", "k"))
    adj_restrict = _restrict(cfg, words, "adj_top", "ADJ")
    noun_restrict = _restrict(cfg, words, "noun_top", "NOUN")
    adjectives = sorted(adj_restrict) if adj_restrict is not None else sorted(words.labels_with_pos("ADJ"))
    pool = {"ADJ": len(adjectives), "NOUN": len(noun_restrict or words.labels_with_pos("NOUN"))}
    kk = lambda kind: pool[kind] if k is None else k  # noqa: E731
    fallbacks: list[str] = []

    if mode in ("dir", "dec", "vlm"):
        proj = _load_proj(cfg)
        _check_proj(proj, images, words)
    if mode in ("lm", "sp", "vlm"):
        gold = {g.image_id: g for g in load_gold(cfg.input_path("gold"))}
        missing = [i for i in ids if i not in gold or gold[i].gold_noun is None]
        if missing:
            raise AlignmentError(f"object-informed mode needs a gold noun for every image; missing: {missing[:10]}")

    try:
        if mode == "dir":
            pos = cfg.get("annotate", "pos")
            restrict = adj_restrict if pos == "ADJ" else noun_restrict
            out = {pos: annotate_direct_batch(proj, images.vectors, words, pos, kk(pos), restrict, ids)}
        elif mode == "dec":
            dec = _load_decomp(cfg)
            if dec.dim != words.dim:
                raise MismatchError(f"decomposition dim {dec.dim} != word space dim {words.dim}")
            adj, noun = annotate_dec_batch(proj, dec, images.vectors, words, max(kk("ADJ"), kk("NOUN")), adj_restrict, noun_restrict, ids)
            out = {"ADJ": [r.top(kk("ADJ")) for r in adj], "NOUN": [r.top(kk("NOUN")) for r in noun]}
        else:
            table = load_bigrams(cfg.input_path("bigrams")) if mode in ("lm", "vlm") or mode == "sp" else None
            cooc = load_cooc(cfg.input_path("cooc")) if mode == "sp" else None
            threshold = cfg.get_int("annotate", "sp_threshold")
            full_dir = None
            if mode == "vlm":
                full_dir = annotate_direct_batch(proj, images.vectors, words, "ADJ", len(adjectives), set(adjectives), ids)
            rankings = []
            for i, iid in enumerate(ids):
                noun = gold[iid].gold_noun
                if mode == "sp":
                    try:
                        r = sp_rank(cooc, noun, words, threshold, adjectives, query_id=iid)
                    except NoPrototypeError:
                        fallbacks.append(iid)
                        r = lm_rank(table, noun, adjectives, query_id=iid)
                elif mode == "lm":
                    r = lm_rank(table, noun, adjectives, query_id=iid)
                else:
                    r = vlm_rank(lm_rank(table, noun, adjectives, query_id=iid), full_dir[i])
                rankings.append(r.top(kk("ADJ")))
            out = {"ADJ": rankings}
    except ContractError as exc:
        raise MismatchError(str(exc)) from None

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_path("annotate")
    _write_rankings(path, _header(cfg, mode=mode), out)
    log_path = cfg.output_dir / "annotate.log.json"
    _write_json(log_path, {"mode": mode, "n_images": len(ids), "candidate_sizes": pool, "sp_fallback_to_lm": fallbacks, **_provenance(cfg)})
    _write_manifest(cfg, "annotate", [path, log_path])
    return [path, log_path]


def _auc_section(cfg: PipelineConfig, gold, image_ids: list[str]) -> dict:
    words = _load_words(cfg)
    images = _load_images(cfg, "test_images")
    missing = [i for i in image_ids if i not in images]
    if missing:
        raise AlignmentError(f"annotated images missing from [data] test_images: {missing[:10]}")
    X = images.subset(image_ids).vectors
    attrs = sorted({a for g in gold for a in g.gold_adjectives if a in words})
    # a leave-one-out model excluding the attribute is preferred when one was
    # trained; otherwise the attribute is scored with the base model
    loo = cfg.get("projection", "leave_one_out") != "none"
    base = None
    out = {}
    for attr in attrs:
        if loo and (cfg.output_dir / _loo_name(cfg, attr)).is_file():
            proj = _load_proj(cfg, _loo_name(cfg, attr))
        else:
            base = base or _load_proj(cfg)
            proj = base
        _check_proj(proj, images, words)
        cspace = comparison_space(proj, words)
        q = project(proj, X)
        a = cspace.vector(attr)
        qn = np.linalg.norm(q, axis=1)
        qn[qn == 0] = 1.0
        sims = (q @ a) / (qn * max(np.linalg.norm(a), 1e-300))
        out.update(per_attribute_auc(image_ids, sims[:, None], [attr], gold))
    return out


def cmd_evaluate(cfg: PipelineConfig) -> list[Path]:
    ann_path = cfg.output_path("annotate")
    if not ann_path.is_file():
        raise ConfigError(f"annotations not found: {ann_path} (run annotate first)")
    by_kind, header = read_annotations(ann_path)
    gold = load_gold(cfg.input_path("gold"))
    gold_ids = {g.image_id for g in gold}
    ks = cfg.get_ints("evaluate", "ks")

    per_k = {}
    ranked_ids: list[str] = []
    for kind, rankings in by_kind.items():
        ids = [r.query_id for r in rankings]
        offenders = sorted(set(ids) ^ gold_ids)
        if offenders:
            raise AlignmentError(f"{kind} annotations and gold disagree on {len(offenders)} image ids: {offenders[:10]}")
        target = "adjectives" if kind == "ADJ" else "noun"
        try:
            hits = hit_at_k(rankings, gold, ks, target)
            recalls = recall_at_k(rankings, gold, ks, target)
        except ContractError as exc:
            raise AlignmentError(str(exc)) from None
        per_k[kind] = {k: {"hit_percent": hits[k], "recall_percent": recalls[k]} for k in ks}
        ranked_ids = ids

    report = EvalReport(per_k)
    if cfg.get_bool("evaluate", "auc"):
        report.per_attribute_auc = _auc_section(cfg, gold, ranked_ids)

    adj_rankings = by_kind.get("ADJ", [])
    if cfg.has("evaluate", "mean_rank"):
        by_id = {g.image_id: g for g in gold}
        for item in cfg.get_list("evaluate", "mean_rank"):
            noun, _, attr = item.partition(":")
            chosen = [r for r in adj_rankings if by_id[r.query_id].gold_noun == noun]
            if not chosen:
                raise AlignmentError(f"no annotated images of {noun!r} for mean rank")
            try:
                report.mean_ranks[item] = mean_attribute_rank(chosen, attr)
            except ContractError as exc:
                raise AlignmentError(f"mean rank {item}: {exc} (raise [annotate] k)") from None

    if cfg.get_bool("evaluate", "concreteness"):
        conc = load_concreteness(cfg.input_path("concreteness"))
        cooc = load_cooc(cfg.input_path("cooc"))
        table = adjective_concreteness(cooc, conc)
        top_n = cfg.get_int("evaluate", "concreteness_top_n")
        per_image = {}
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for r in adj_rankings:
                try:
                    per_image[r.query_id] = concreteness_score(r, conc, cooc, top_n, table)
                except UndefinedMetricError:
                    continue
        values = list(per_image.values())
        report.concreteness = {
            "mean": float(np.mean(values)) if values else 0.0,
            "median": float(np.median(values)) if values else 0.0,
            "n_images": len(values),
            "per_image": per_image,
        }

    sizes = {kind: max((len(r) for r in rs), default=0) for kind, rs in by_kind.items()}
    report.metadata = _provenance(cfg, mode=header.get("mode", "unknown"), candidate_sizes=sizes)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.get("evaluate", "output")
    json_path = cfg.output_dir / f"{stem}.json"
    txt_path = cfg.output_dir / f"{stem}.txt"
    json_path.write_text(report.to_json(), encoding="utf-8")
    txt_path.write_text(f"# {_header(cfg)}\n" + report.to_table(), encoding="utf-8")
    _write_manifest(cfg, "evaluate", [json_path, txt_path])
    return [json_path, txt_path]


def _class_data(cfg: PipelineConfig):
    images = _load_images(cfg, "class_images")
    rows = list(_rows(cfg.input_path("class_labels"), 3))
    missing = [r[0] for r in rows if r[0] not in images]
    if missing:
        raise MismatchError(f"class labels reference unknown images: {missing[:10]}")
    bad = sorted({r[2] for r in rows} - {"train", "test"})
    if bad:
        raise FormatError(f"class split must be 'train' or 'test', got {bad}")
    return images, rows


def _attribute_matrix(cfg: PipelineConfig, images: EmbeddingSpace, ids: list[str]):
    words = _load_words(cfg)
    _require_pos(words)
    proj = _load_proj(cfg)
    dec = _load_decomp(cfg)
    _check_proj(proj, images, words)
    if dec.dim != words.dim:
        raise MismatchError(f"decomposition dim {dec.dim} != word space dim {words.dim}")
    vocab_labels = _restrict(cfg, words, "adj_top", "ADJ")
    vocab = words.subset(sorted(vocab_labels) if vocab_labels is not None else words.labels_with_pos("ADJ"))
    vectors = attribute_vectors(proj, dec, images.subset(ids).vectors, vocab, ids, cfg.get("represent", "scope"))
    return vectors


def cmd_represent(cfg: PipelineConfig) -> list[Path]:
    images, rows = _class_data(cfg)
    ids = [r[0] for r in rows]
    vectors = _attribute_matrix(cfg, images, ids)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    path = cfg.output_path("represent")
    save_attribute_vectors(vectors, path, header=_header(cfg, scope=cfg.get("represent", "scope")))
    _write_manifest(cfg, "represent", [path])
    return [path]


def cmd_classify(cfg: PipelineConfig) -> list[Path]:
    images, rows = _class_data(cfg)
    ids = [r[0] for r in rows]
    vectors = _attribute_matrix(cfg, images, ids)
    attr = np.array([v.values for v in vectors])
    if cfg.get_bool("represent", "normalize"):
        norms = np.linalg.norm(attr, axis=1, keepdims=True)
        attr = attr / np.where(norms == 0, 1.0, norms)
    raw = images.subset(ids).vectors
    labels = [r[1] for r in rows]
    train = np.array([r[2] == "train" for r in rows])
    test = ~train
    ytr = [l for l, t in zip(labels, train) if t]
    yte = [l for l, t in zip(labels, test) if t]
    if len(set(ytr)) < 2 or not yte:
        raise MismatchError("classification needs >= 2 training classes and a non-empty test split")
    seed, epochs = cfg.seed, cfg.get_int("represent", "epochs")
    reg_grid = cfg.get_floats("represent", "reg_grid")

    def pick_reg(Xtr):
        value = cfg.get("represent", "reg")
        if value == "auto":
            return select_reg(Xtr, ytr, reg_grid, seed=seed, epochs=epochs)
        return cfg.get_float("represent", "reg")

    target = cfg.get("represent", "target_dim")
    try:
        if target == "auto":
            dims = cfg.get_ints("represent", "target_dim_grid")
            if not dims:
                raise ConfigError("[represent] target_dim=auto needs target_dim_grid")
            target_dim = select_fusion_dim(raw[train], attr[train], ytr, dims, reg_grid[0], seed=seed, epochs=epochs)
        else:
            target_dim = cfg.get_int("represent", "target_dim")
        fusion = Fusion(target_dim).fit(raw[train], attr[train])
    except ContractError as exc:
        raise MismatchError(f"fusion: {exc}") from None
    fused = fusion.fuse(raw, attr)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    variants = {}
    for name, X in (("phow", raw), ("dec", attr), ("fused", fused)):
        reg = pick_reg(X[train])
        clf = train_ova(X[train], ytr, reg, seed, epochs)
        conf = confusion_matrix(clf, X[test], yte)
        variants[name] = {
            "dim": int(X.shape[1]),
            "reg": reg,
            "train_accuracy": accuracy(clf, X[train], ytr),
            "test_accuracy": conf.accuracy,
            "confusion": conf.to_dict(),
        }
        path = cfg.output_dir / f"clf_{name}.json"
        save_classifier(clf, path, {"variant": name, **_provenance(cfg)})
        outputs.append(path)

    attr_path = cfg.output_path("represent")
    save_attribute_vectors(vectors, attr_path, header=_header(cfg, scope=cfg.get("represent", "scope")))
    report_path = cfg.output_dir / "classify_report.json"
    _write_json(report_path, {"variants": variants, "fusion_dim": target_dim, **_provenance(cfg)})
    lines = [f"# {_header(cfg)}", f"{'variant':<8} {'dim':>5} {'train%':>8} {'test%':>8}"]
    for name, v in variants.items():
        lines.append(f"{name:<8} {v['dim']:>5} {100 * v['train_accuracy']:8.2f} {100 * v['test_accuracy']:8.2f}")
    txt_path = cfg.output_dir / "classify_report.txt"
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    outputs += [attr_path, report_path, txt_path]
    _write_manifest(cfg, "classify", outputs)
    return outputs


COMMANDS = {
    "train-proj": cmd_train_proj,
    "train-dec": cmd_train_dec,
    "annotate": cmd_annotate,
    "evaluate": cmd_evaluate,
    "represent": cmd_represent,
    "classify": cmd_classify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="visphrase", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"visphrase {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step")
        p.add_argument("config", help="pipeline config file (INI)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="shorthand for --set run.seed=N")
        p.add_argument("--output-dir", help="shorthand for --set run.output_dir=DIR")
    p = sub.add_parser("make-fixtures", help="write a synthetic dataset and a matching config")
    p.add_argument("out", help="directory to create")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--small", action="store_true", help="smaller world for quick runs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.command == "make-fixtures":
            from .fixtures import write_fixtures

            write_fixtures(args.out, seed=args.seed, small=args.small)
            return 0
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"run.seed={args.seed}")
        if args.output_dir is not None:
            overrides.append(f"run.output_dir={args.output_dir}")
        cfg = load_config(args.config, overrides)
        COMMANDS[args.command](cfg)
    except (ConfigError, FormatError) as exc:
        print(f"visphrase: error: {exc}", file=sys.stderr)
        return 2
    except (MismatchError, ContractError) as exc:
        print(f"visphrase: mismatch: {exc}", file=sys.stderr)
        return 3
    except AlignmentError as exc:
        print(f"visphrase: alignment: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
