"""Command-line interface for the caption evaluation toolkit.

Every option can also come from an environment variable named
``CAPEVAL_<COMMAND>_<OPTION>`` (for example ``CAPEVAL_RANK_VIEW``), or
from a JSON config file passed as ``capeval --config defaults.json``
whose top-level keys are command names mapping to option defaults.
"""

import json
import sys
from dataclasses import asdict

import click

from .agreement import spearman_rho
from .corpus import (
    SplitSpec,
    aggregate_scores,
    filter_zero_scores,
    ingest_corpus,
    normalize_scores,
    source_counts,
    split_corpus,
    write_corpus,
)
from .embeddings import EmbeddingFamily, load_embedding_table, load_score_channel
from .harness import (
    RANKING_VIEWS,
    agreement_tables,
    correlate_with_humans,
    emit_report,
    evaluate_corpus,
    known_metrics,
    model_heatmap,
    rank_models,
)
from .pool import load_detections
from .vcrscore import (
    DEFAULT_FEATURES,
    FeatureInputs,
    align_targets,
    build_features,
    load_score_model,
    save_score_model,
    train_score_model,
)

CONTEXT_SETTINGS = {
    "auto_envvar_prefix": "CAPEVAL",
    "help_option_names": ["-h", "--help"],
}


def _fail(exc: Exception) -> "click.ClickException":
    return click.ClickException(str(exc))


def _parse_named(pairs, what, n_paths):
    """Parse repeated NAME=path[,path] options into {name: paths}."""
    parsed = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"{what} must look like name=path, got {pair!r}")
        name, _, rest = pair.partition("=")
        paths = rest.split(",")
        if len(paths) != n_paths or not all(paths):
            expected = ",".join(["path"] * n_paths)
            raise click.BadParameter(f"{what} {name!r} needs {expected}, got {rest!r}")
        parsed[name.strip()] = paths
    return parsed


def _load_inputs(embeddings, tokens, channels, detections) -> FeatureInputs:
    inputs = FeatureInputs()
    try:
        for family, (images_path, captions_path) in _parse_named(
            embeddings, "--embeddings", 2
        ).items():
            inputs.families[family] = EmbeddingFamily(
                images=load_embedding_table(images_path, kind="image"),
                captions=load_embedding_table(captions_path, kind="caption"),
            )
        for family, (path,) in _parse_named(tokens, "--tokens", 1).items():
            inputs.token_embeddings[family] = load_embedding_table(
                path, kind="token-sequence"
            )
        for name, (path,) in _parse_named(channels, "--channels", 1).items():
            inputs.channels[name] = load_score_channel(path, name=name)
        if detections:
            inputs.detections = load_detections(detections)
    except (OSError, ValueError) as exc:
        raise _fail(exc) from exc
    return inputs


def _input_options(fn):
    for decorator in reversed(
        [
            click.option(
                "--embeddings",
                multiple=True,
                metavar="FAMILY=IMAGES,CAPTIONS",
                help="Embedding family files; repeatable.",
            ),
            click.option(
                "--tokens",
                multiple=True,
                metavar="FAMILY=PATH",
                help="Token-sequence embedding files; repeatable.",
            ),
            click.option(
                "--channels",
                multiple=True,
                metavar="NAME=PATH",
                help="Per-sample score channel files; repeatable.",
            ),
            click.option(
                "--detections",
                type=click.Path(exists=True, dir_okay=False),
                default=None,
                help="Detector label file.",
            ),
        ]
    ):
        fn = decorator(fn)
    return fn


@click.group(context_settings=CONTEXT_SETTINGS)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file with per-command option defaults.",
)
@click.version_option(package_name="capeval")
@click.pass_context
def main(ctx, config):
    """Evaluate image captions and run the annotation workflow."""
    if config:
        with open(config, "r", encoding="utf-8") as handle:
            try:
                defaults = json.load(handle)
            except json.JSONDecodeError as exc:
                raise _fail(ValueError(f"{config}: not valid JSON: {exc}")) from exc
        if not isinstance(defaults, dict):
            raise _fail(ValueError(f"{config}: must hold an object of command defaults"))
        ctx.default_map = defaults


@main.command()
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--normalize/--no-normalize", default=False, help="Map raw scores to [0, 1] per source.")
@click.option("--drop-zero-mean", is_flag=True, default=False, help="Drop samples whose mean score is exactly zero.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the processed corpus here.")
def ingest(corpus, normalize, drop_zero_mean, out):
    """Validate a captions file and report its composition."""
    try:
        samples = ingest_corpus(corpus)
        if normalize:
            samples = normalize_scores(samples)
        removed = 0
        if drop_zero_mean:
            samples, removed = filter_zero_scores(samples)
    except ValueError as exc:
        raise _fail(exc) from exc
    if out:
        write_corpus(samples, out)
    summary = {
        "samples": len(samples),
        "removed_zero_mean": removed,
        "sources": dict(sorted(source_counts(samples).items())),
        "models": sorted({s.model_id for s in samples}),
        "ratings": sum(len(s.raw_scores) for s in samples),
    }
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", required=True, help="Comma-separated metric names.")
@_input_options
@click.option("--model-file", type=click.Path(exists=True, dir_okay=False), default=None, help="Trained metric for the vcr column.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV destination; stdout when omitted.")
def score(corpus, metrics, embeddings, tokens, channels, detections, model_file, out):
    """Compute per-sample metric scores as CSV."""
    inputs = _load_inputs(embeddings, tokens, channels, detections)
    try:
        samples = ingest_corpus(corpus)
        model = load_score_model(model_file) if model_file else None
        report = evaluate_corpus(
            samples, [m.strip() for m in metrics.split(",") if m.strip()], inputs, model
        )
    except ValueError as exc:
        raise _fail(exc) from exc
    lines = ["sample_id,model_id," + ",".join(report.metrics)]
    for sample_id in report.sample_ids:
        cells = [sample_id, report.models[sample_id]]
        for metric in report.metrics:
            value = report.scores.get(metric, {}).get(sample_id)
            cells.append("" if value is None else repr(value))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        click.echo(text, nl=False)
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@_input_options
@click.option("--features", default=",".join(DEFAULT_FEATURES), show_default=True, help="Comma-separated feature columns.")
@click.option("--target", type=click.Choice(["mean", "vote"]), default="mean", show_default=True, help="How to aggregate raw ratings into the target.")
@click.option("--train-fraction", type=float, default=0.4, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Split shuffling seed.")
@click.option("--config", default=None, help="JSON object of ensemble settings, inline or @path.")
@click.option("--out-model", required=True, type=click.Path(dir_okay=False))
def train(corpus, embeddings, tokens, channels, detections, features, target, train_fraction, seed, config, out_model):
    """Fit the learned metric and report held-out quality."""
    inputs = _load_inputs(embeddings, tokens, channels, detections)
    settings = {}
    if config:
        try:
            if config.startswith("@"):
                with open(config[1:], "r", encoding="utf-8") as handle:
                    settings = json.load(handle)
            else:
                settings = json.loads(config)
        except (OSError, json.JSONDecodeError) as exc:
            raise _fail(ValueError(f"--config: {exc}")) from exc
        if not isinstance(settings, dict):
            raise _fail(ValueError("--config must hold a JSON object"))
    feature_names = [f.strip() for f in features.split(",") if f.strip()]
    try:
        samples = ingest_corpus(corpus)
        train_samples, test_samples = split_corpus(
            samples, SplitSpec(train_fraction=train_fraction, seed=seed)
        )
        targets = aggregate_scores(samples, method=target)
        train_matrix = build_features(train_samples, inputs, feature_names)
        X_train, y_train = align_targets(train_matrix, targets)
        model = train_score_model(
            X_train, y_train, feature_names, config=settings, target=target
        )
        save_score_model(model, out_model)

        test_matrix = build_features(test_samples, inputs, feature_names)
        X_test, y_test = align_targets(test_matrix, targets)
        held_out = {
            "model": spearman_rho(model.predict(X_test), y_test),
            "features": {
                name: spearman_rho(X_test[:, j], y_test)
                for j, name in enumerate(feature_names)
            },
        }
    except ValueError as exc:
        raise _fail(exc) from exc
    click.echo(
        json.dumps(
            {
                "model_file": out_model,
                "train_samples": len(train_samples),
                "test_samples": len(test_samples),
                "held_out_spearman": held_out,
            },
            indent=2,
            sort_keys=True,
        )
    )


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metrics", default=None, help="Comma-separated metric names; defaults to all computable.")
@_input_options
@click.option("--model-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--report-dir", required=True, type=click.Path(file_okay=False))
@click.option("--human", type=click.Choice(["mean", "vote"]), default="mean", show_default=True, help="Aggregation of raw ratings into the human score.")
@click.option("--min-samples", type=int, default=30, show_default=True, help="Per-model slice size below which the heatmap warns.")
def evaluate(corpus, metrics, embeddings, tokens, channels, detections, model_file, report_dir, human, min_samples):
    """Run the full evaluation and write report files."""
    inputs = _load_inputs(embeddings, tokens, channels, detections)
    try:
        samples = ingest_corpus(corpus)
        model = load_score_model(model_file) if model_file else None
        names = (
            [m.strip() for m in metrics.split(",") if m.strip()]
            if metrics
            else known_metrics(inputs, model)
        )
        report = evaluate_corpus(samples, names, inputs, model)
        targets = aggregate_scores(samples, method=human)
        correlate_with_humans(report, targets, on_degenerate="skip")
        model_heatmap(report, targets, min_samples=min_samples)
        views = []
        for view in RANKING_VIEWS:
            try:
                views.append(rank_models(samples, view))
            except ValueError as exc:
                report.warnings.append(f"ranking {view}: {exc}")
        paths = emit_report(report, report_dir, views=views)
    except ValueError as exc:
        raise _fail(exc) from exc
    for warning in report.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(
        json.dumps(
            {
                "report_dir": report_dir,
                "files": {key: str(path) for key, path in sorted(paths.items())},
                "correlations": report.correlations,
            },
            indent=2,
            sort_keys=True,
        )
    )


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--level", type=click.Choice(["nominal", "ordinal", "interval"]), default="interval", show_default=True)
@click.option("--variant", type=click.Choice(["a", "b"]), default="a", show_default=True, help="Kendall tau variant.")
def agree(corpus, level, variant):
    """Rater agreement tables from a corpus with raw scores."""
    try:
        samples = ingest_corpus(corpus)
        records = [
            (s.sample_id, rs.tagger, rs.phase, rs.score)
            for s in samples
            for rs in s.raw_scores
        ]
        tables = agreement_tables(records, level=level, variant=variant)
    except ValueError as exc:
        raise _fail(exc) from exc
    click.echo(json.dumps(tables, indent=2, sort_keys=True))


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--view", type=click.Choice(list(RANKING_VIEWS)), default="mean-sum", show_default=True)
@click.option("--tie-seed", type=int, default=0, show_default=True, help="Seed for majority-vote tie breaking.")
def rank(corpus, view, tie_seed):
    """Rank generator models by summed human scores."""
    try:
        samples = ingest_corpus(corpus)
        result = rank_models(samples, view, tie_seed=tie_seed)
    except ValueError as exc:
        raise _fail(exc) from exc
    click.echo(json.dumps(asdict(result), indent=2, sort_keys=True))


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--events", required=True, type=click.Path(dir_okay=False), help="Append-only score log; created if absent.")
@click.option("--seed", type=int, default=0, show_default=True, help="Assignment-order seed.")
@click.option("--taggers", default=None, help="Comma-separated allow-list; anyone when omitted.")
@click.option("--open-phase", "open_phases", multiple=True, type=int, default=(1,), show_default=True)
@click.option("--image-root", default="images", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--check", is_flag=True, default=False, help="Build the app, print a summary, and exit without serving.")
def serve(corpus, events, seed, taggers, open_phases, image_root, host, port, check):
    """Run the annotation service over HTTP."""
    from .service import AnnotationService, EventStore, create_app

    try:
        samples = ingest_corpus(corpus)
        store = EventStore(events)
        service = AnnotationService(
            samples,
            store,
            seed=seed,
            taggers=[t.strip() for t in taggers.split(",")] if taggers else None,
            open_phases=open_phases,
            image_root=image_root,
        )
    except ValueError as exc:
        raise _fail(exc) from exc
    app = create_app(service)
    if check:
        click.echo(
            json.dumps(
                {
                    "samples": len(samples),
                    "events": len(store.events),
                    "open_phases": sorted(service.open_phases),
                    "routes": sorted(
                        route.path for route in app.routes if route.path.startswith("/api")
                    ),
                },
                indent=2,
                sort_keys=True,
            )
        )
        store.close()
        return
    import uvicorn

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main(prog_name="capeval", args=sys.argv[1:])
