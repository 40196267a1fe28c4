"""Command-line entry point: ingest, train, evaluate, explain, serve,
oracle-check. Thin shell over the library; exit codes are 0 (success),
1 (runtime/domain error), 2 (usage error).
"""

from __future__ import annotations

import functools
import json
import sys

import click

from . import session as hs
from .errors import ThyrolensError
from .gbdt import (CrossValReport, EvalReport, TrainConfig, cross_validate,
                   evaluate, load_model, save_model, train)
from .schema import (ClassLabel, compute_stats, ingest_csv, load_schema,
                     make_record, stratified_split, thyroid_schema)
from .service import ServiceConfig, serve
from .toys import bundled_toys, check_toy, vacuous_toy


def _echo_json(doc) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def runtime_errors(fn):
    """Domain/runtime failures exit 1 with a one-line diagnostic."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ThyrolensError, ValueError, OSError) as e:
            click.echo(f"error: {e}", err=True)
            sys.exit(1)

    return wrapper


def _load_dataset(data_path: str, schema_path: str | None):
    schema = load_schema(schema_path) if schema_path else thyroid_schema()
    return ingest_csv(data_path, schema)


@click.group()
def main():
    """Hypothesis-anchored evidence for thyroid-disease diagnosis support."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--json", "as_json", is_flag=True)
@runtime_errors
def ingest(data_path, schema_path, as_json):
    """Validate a dataset file and print the ingestion report."""
    data = _load_dataset(data_path, schema_path)
    report = data.ingest_report.to_dict()
    if as_json:
        _echo_json(report)
        return
    click.echo(f"rows read:    {report['rows_read']}")
    click.echo(f"rows dropped: {report['rows_dropped']}")
    click.echo(f"rows kept:    {report['rows_kept']}")
    for c, (count, prop) in enumerate(zip(report["class_counts"],
                                          report["class_proportions"])):
        click.echo(f"  {ClassLabel(c).display_name:<13} {count:>6}  ({prop:.2%})")


def _eval_table(report: EvalReport) -> str:
    lines = [f"accuracy: {report.accuracy:.4f}",
             f"{'class':<13} {'precision':>9} {'recall':>9} {'f1':>9}"]
    for c in ClassLabel:
        lines.append(f"{c.display_name:<13} {report.precision[c]:>9.4f} "
                     f"{report.recall[c]:>9.4f} {report.f1[c]:>9.4f}")
    lines.append("confusion (rows = true, cols = predicted):")
    for row in report.confusion:
        lines.append("  " + " ".join(f"{v:>6}" for v in row))
    return "\n".join(lines)


def _cv_table(report: CrossValReport) -> str:
    lines = [f"{'fold':<6} {'accuracy':>9} " +
             " ".join(f"{'f1_' + c.display_name[:5].lower():>9}" for c in ClassLabel)]
    for i, fold in enumerate(report.folds):
        lines.append(f"{i:<6} {fold.accuracy:>9.4f} " +
                     " ".join(f"{fold.f1[c]:>9.4f}" for c in ClassLabel))
    lines.append(f"mean accuracy: {report.mean_accuracy:.4f}")
    lines.append("mean f1: " + ", ".join(
        f"{c.display_name}={report.mean_f1[c]:.4f}" for c in ClassLabel))
    return "\n".join(lines)


@main.command(name="train")
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with TrainConfig fields")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--kfold", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--test-fraction", type=float, default=0.2)
@click.option("--json", "as_json", is_flag=True)
@runtime_errors
def cmd_train(data_path, schema_path, config_path, out_path, kfold, seed,
              test_fraction, as_json):
    """Train the classifier; report held-out (or k-fold) metrics."""
    data = _load_dataset(data_path, schema_path)
    if len(data) == 0:
        raise ThyrolensError("empty dataset")
    fields = {}
    if config_path:
        fields = json.loads(open(config_path).read())
    fields["seed"] = seed
    config = TrainConfig(**{**TrainConfig().to_dict(), **fields})

    doc = {"config": config.to_dict()}
    if kfold:
        cv = cross_validate(data, config, k=kfold, seed=seed)
        model = train(data, config)
        doc["cross_validation"] = cv.to_dict()
        human = _cv_table(cv)
    else:
        train_set, test_set = stratified_split(data, test_fraction, seed)
        model = train(train_set, config)
        report = evaluate(model, test_set)
        doc["evaluation"] = report.to_dict()
        human = _eval_table(report)
    save_model(model, out_path)
    doc["model_path"] = out_path
    doc["model_fingerprint"] = model.fingerprint
    if as_json:
        _echo_json(doc)
    else:
        click.echo(human)
        click.echo(f"model written to {out_path}")


@main.command(name="evaluate")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--json", "as_json", is_flag=True)
@runtime_errors
def cmd_evaluate(model_path, data_path, schema_path, as_json):
    """Evaluate a saved model on a dataset file."""
    model = load_model(model_path)
    data = _load_dataset(data_path, schema_path)
    report = evaluate(model, data)
    _echo_json(report.to_dict()) if as_json else click.echo(_eval_table(report))


def _render_example(example: dict, heading: str) -> list[str]:
    changed = {c["name"]: c for c in example["changed_features"]}
    lines = [f"  {heading}: predicted {ClassLabel(example['predicted_class']).display_name}, "
             f"proximity {example['proximity']:.4f}, sparsity {example['sparsity']}"]
    for c in example["changed_features"]:
        lines.append(f"    {c['name']}: {c['old']} → {c['new']} *")
    if not changed:
        lines.append("    (no changes)")
    return lines


def _render_bundle(doc: dict) -> str:
    lines = [f"record {doc['record_id']}  |  hypothesis: {doc['hypothesis_name']}"]
    lines.append("record values:")
    for cell in doc["record_values"]:
        lines.append(f"  {cell['name']:<20} {cell['value']}")
    lines.append(f"similar cases ({len(doc['similar_cases'])} of "
                 f"{doc['n_similar_cases']} requested"
                 + (", budget exhausted)" if doc["similar_cases_exhausted"] else ")"))
    for i, ex in enumerate(doc["similar_cases"], 1):
        lines.extend(_render_example(ex, f"case {i}"))
    for cls_key, examples in doc["counterexamples"].items():
        name = ClassLabel(int(cls_key)).display_name
        flag = doc["counterexamples_exhausted"][cls_key]
        lines.append(f"counterexamples toward {name} ({len(examples)} of "
                     f"{doc['n_counterexamples_per_class']} requested"
                     + (", budget exhausted)" if flag else ")"))
        for i, ex in enumerate(examples, 1):
            lines.extend(_render_example(ex, f"counterexample {i}"))
    if doc["importance"] is not None:
        lines.append(f"feature importance toward {doc['hypothesis_name']} "
                     f"(surrogate r2 = {doc['importance']['surrogate_r2']:.3f}):")
        weights = doc["importance"]["weights"]
        top = sorted(weights, key=lambda w: -abs(w["weight"]))
        scale = max((abs(w["weight"]) for w in top), default=0.0) or 1.0
        for w in top:
            bar = "#" * max(1, int(round(abs(w["weight"]) / scale * 30)))
            sign = "+" if w["weight"] >= 0 else "-"
            lines.append(f"  {w['name']:<20} {w['weight']:>+9.4f} {sign}{bar}")
    return "\n".join(lines)


@main.command(name="explain")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--schema", "schema_path", type=click.Path(), default=None)
@click.option("--record-id", default=None)
@click.option("--record-json", default=None,
              help="inline record as a JSON object or 20-value array")
@click.option("--hypothesis", required=True)
@click.option("--n-cf", type=click.IntRange(0, 10), default=None)
@click.option("--n-sc", type=click.IntRange(0, 10), default=None)
@click.option("--importance", is_flag=True)
@click.option("--seed", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@runtime_errors
def cmd_explain(model_path, data_path, schema_path, record_id, record_json,
                hypothesis, n_cf, n_sc, importance, seed, as_json):
    """Explain one hypothesis for one record."""
    model = load_model(model_path)
    data = _load_dataset(data_path, schema_path)
    stats = compute_stats(data)
    record = None
    if record_json is not None:
        raw = json.loads(record_json)
        if isinstance(raw, dict):
            values = [raw[name] for name in data.schema.feature_names]
        else:
            values = list(raw)
        record = make_record(data.schema, record_id or "inline", values)
    try:
        hyp = ClassLabel.parse(hypothesis)
    except ValueError as e:
        raise ThyrolensError(str(e)) from None
    req = hs.HypothesisRequest(
        hypothesis=hyp, record_id=record_id, record=record,
        n_counterexamples_per_class=n_cf, n_similar_cases=n_sc,
        include_importance=importance, seed=seed)
    bundle = hs.handle_request(req, model, data, stats)
    doc = bundle.to_dict(data.schema)
    _echo_json(doc) if as_json else click.echo(_render_bundle(doc))


@main.command(name="serve")
@click.option("--host", envvar="THYROLENS_HOST", default="127.0.0.1",
              show_default=True)
@click.option("--port", envvar="THYROLENS_PORT", type=int, default=8077,
              show_default=True)
@click.option("--model", "model_path", envvar="THYROLENS_MODEL", required=True,
              type=click.Path())
@click.option("--data", "data_path", envvar="THYROLENS_DATA", required=True,
              type=click.Path())
@click.option("--log", "log_path", envvar="THYROLENS_LOG", default=None,
              type=click.Path())
@click.option("--json", "as_json", is_flag=True,
              help="print the resolved config as JSON before starting")
@runtime_errors
def cmd_serve(host, port, model_path, data_path, log_path, as_json):
    """Run the JSON API service."""
    config = ServiceConfig(model_path=model_path, data_path=data_path,
                           host=host, port=port, log_path=log_path)
    if as_json:
        _echo_json({"host": host, "port": port, "model": model_path,
                    "data": data_path, "log": log_path})
    serve(config)


@main.command(name="oracle-check")
@click.option("--toy", "toy_name", default="all", show_default=True)
@click.option("--seeds", default="11,23,37", show_default=True)
@click.option("--population-size", type=int, default=100)
@click.option("--generations", type=int, default=30)
@click.option("--json", "as_json", is_flag=True)
@runtime_errors
def cmd_oracle_check(toy_name, seeds, population_size, generations, as_json):
    """Compare the evolutionary search against the brute-force oracle."""
    toys = bundled_toys() + [vacuous_toy()]
    if toy_name != "all":
        toys = [t for t in toys if t.name == toy_name]
        if not toys:
            raise ThyrolensError(f"unknown toy: {toy_name}")
    seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    rows = [check_toy(t, seed, population_size=population_size,
                      generations=generations)
            for t in toys for seed in seed_list]
    all_ok = all(r["ok"] for r in rows)
    if as_json:
        _echo_json({"results": rows, "ok": all_ok})
    else:
        for r in rows:
            if r["status"] != "compared":
                click.echo(f"{r['toy']:<16} seed {r['seed']:<4} {r['status']} "
                           f"[{'ok' if r['ok'] else 'FAIL'}]")
            else:
                click.echo(f"{r['toy']:<16} seed {r['seed']:<4} "
                           f"ratio {r['ratio']:.3f} sparsity "
                           f"{r['search_sparsity']} vs {r['oracle_sparsity']} "
                           f"[{'ok' if r['ok'] else 'FAIL'}]")
    if not all_ok:
        sys.exit(1)


if __name__ == "__main__":
    main()
