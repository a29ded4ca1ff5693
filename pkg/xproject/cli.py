"""``xproject`` command line.

Machine-readable results (JSON) go to standard output; logs and ``--pretty``
tables go to standard error. Exit codes: 0 ok, 1 usage, 2 data, 3 backend.
"""

import json
import logging
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import click
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from xproject import __version__
from xproject.botgen import (
    PipelineTemplate,
    generate_project,
    load_ontology,
    ontology_from_dataset,
    validate_scaffold,
    write_ontology,
)
from xproject.collector import TelemetryCollector
from xproject.config import RunConfig
from xproject.corpus import (
    Dataset,
    SplitSpec,
    compare_with_reference,
    load_corpus,
    resolve_intent_filter,
    split as split_dataset,
    stats as dataset_stats,
    write_corpus,
)
from xproject.errors import DataError, ProjectionError, UsageError, XProjectError
from xproject.evaluation import (
    confidence_histogram,
    confusion,
    intent_report,
    load_intent_predictions,
    load_slot_predictions,
    render_comparison,
    render_report,
    slot_report,
)
from xproject.markerlab import Mode, builtin_schemes, run_trial, schemes_from_config
from xproject.projection import project_dataset, write_quarantine, write_report
from xproject.translator import (
    RemoteBackend,
    TranslationBackend,
    TranslationCache,
    build_mock_backend,
)


FAULT_FLAGS = {
    "fault_seed": "seed",
    "drop_prob": "drop_identifier_prob",
    "mutate_prob": "mutate_digit_to_letter_prob",
    "translate_prob": "translate_marker_content_prob",
    "duplicate_prob": "duplicate_identifier_prob",
    "drop_marker_prob": "drop_marker_prob",
}


@dataclass
class CliState:
    config: RunConfig
    pretty: bool
    err: Console
    collector: Optional[TelemetryCollector] = None

    def start(self, ctx: click.Context, config: RunConfig) -> TelemetryCollector:
        libraries = ["requests"] if config.backend == "remote" else None
        self.collector = TelemetryCollector(config.telemetry, libraries=libraries)
        ctx.call_on_close(self.collector.shutdown)
        self.collector.logs.debug("run started", {"backend": config.backend, "src": config.src, "tgt": config.tgt})
        return self.collector

    def show(self, renderable) -> None:
        if self.pretty:
            self.err.print(renderable)


def _emit(payload: Dict[str, Any]) -> None:
    click.echo(json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True))


def _setup_logging(level: str, console: Console) -> None:
    root = logging.getLogger("xproject")
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=console, show_path=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(level.upper())


# --------------------------------------------------------
# Shared options
# --------------------------------------------------------
def corpus_options(fn):
    fn = click.option("--strict", is_flag=True, help="Fail on the first malformed record.")(fn)
    fn = click.option("--intents", default=None,
                      help="Intent filter: comma list, @file, or 'massive-extract'.")(fn)
    fn = click.option("--locale", default="fr-FR", show_default=True, help="Locale to keep.")(fn)
    fn = click.argument("corpus", type=click.Path(dir_okay=False))(fn)
    return fn


def backend_options(fn):
    options = [
        click.option("--backend", type=click.Choice(["remote", "identity", "reverse", "pseudo", "fault"]),
                     default=None, help="Translation backend."),
        click.option("--mt-url", default=None, help="Translation service URL (remote backend)."),
        click.option("--mt-timeout", type=float, default=None, help="Request timeout in seconds."),
        click.option("--retries", type=int, default=None, help="Retries after the first attempt."),
        click.option("--fault-base", type=click.Choice(["identity", "reverse", "pseudo"]), default=None,
                     help="Mock wrapped by the fault backend."),
        click.option("--fault-seed", type=int, default=None),
        click.option("--drop-prob", type=float, default=None),
        click.option("--mutate-prob", type=float, default=None),
        click.option("--translate-prob", type=float, default=None),
        click.option("--duplicate-prob", type=float, default=None),
        click.option("--drop-marker-prob", type=float, default=None),
        click.option("--cache", "cache_path", default=None, type=click.Path(dir_okay=False),
                     help="Persistent translation cache file."),
        click.option("--parallel", type=int, default=None, help="Maximum requests in flight."),
        click.option("--src", default=None, help="Source language code."),
        click.option("--tgt", default=None, help="Target language code."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve_config(state: CliState, opts: Dict[str, Any]) -> RunConfig:
    fault_values = {FAULT_FLAGS[k]: opts.pop(k) for k in list(FAULT_FLAGS) if k in opts}
    config = state.config.with_overrides(**opts).with_fault_overrides(**fault_values)

    given_fault = [k for k, v in fault_values.items() if v is not None]
    if given_fault and config.backend != "fault":
        raise UsageError(f"fault options ({', '.join(sorted(given_fault))}) need --backend fault")
    if opts.get("fault_base") and config.backend != "fault":
        raise UsageError("--fault-base needs --backend fault")
    if opts.get("mt_url") and config.backend != "remote":
        raise UsageError("--mt-url needs --backend remote")
    return config.validate()


def build_backend(config: RunConfig, markers: Sequence = ()) -> TranslationBackend:
    if config.backend == "remote":
        return RemoteBackend(
            config.mt_url,
            token=config.mt_token,
            timeout=config.mt_timeout,
            retries=config.retries,
            backoff=config.backoff,
        )
    return build_mock_backend(config.backend, config.fault, config.fault_base, markers)


def _load(corpus: str, locale: str, intents: Optional[str], strict: bool):
    return load_corpus(corpus, locale, resolve_intent_filter(intents), strict=strict)


# --------------------------------------------------------
# Group
# --------------------------------------------------------
@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="TOML configuration file.")
@click.option("--log-level", default="WARNING", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
@click.option("--pretty", is_flag=True, help="Print human-readable tables to standard error.")
@click.version_option(__version__, prog_name="xproject")
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[str], log_level: str, pretty: bool):
    """Cross-lingual annotation projection toolkit."""
    err = Console(stderr=True)
    _setup_logging(log_level, err)
    ctx.obj = CliState(RunConfig.from_file(config_path), pretty, err)


@cli.command()
@corpus_options
@click.option("--reference", is_flag=True, help="Compare counts with the MASSIVE 27-intent extract.")
@click.pass_obj
def stats(state: CliState, corpus, locale, intents, strict, reference):
    """Per-domain and per-intent counts."""
    state.start(click.get_current_context(), state.config)
    result = dataset_stats(_load(corpus, locale, intents, strict))
    payload = result.to_dict()
    problems = compare_with_reference(result) if reference else []
    if reference:
        payload["reference_mismatches"] = problems
    _emit(payload)

    table = Table(title=f"{corpus} ({locale})")
    table.add_column("intent")
    table.add_column("examples", justify="right")
    for intent, count in sorted(result.per_intent.items()):
        table.add_row(intent, str(count))
    table.add_section()
    table.add_row("total", str(result.total))
    state.show(table)

    if problems:
        raise DataError(f"{len(problems)} counts differ from the reference: " + "; ".join(problems[:5]))


@cli.command()
@corpus_options
@click.option("--ratio", type=float, default=0.8, show_default=True, help="Train share.")
@click.option("--seed", type=int, default=None, help="Shuffle seed (default from config).")
@click.option("--stratified", is_flag=True, help="Split every intent separately.")
@click.option("--train", "train_path", default=None, type=click.Path(dir_okay=False))
@click.option("--test", "test_path", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
def split(state: CliState, corpus, locale, intents, strict, ratio, seed, stratified, train_path, test_path):
    """Seeded train/test split."""
    state.start(click.get_current_context(), state.config)
    stem, _ = os.path.splitext(corpus)
    train_path = train_path or f"{stem}.train.jsonl"
    test_path = test_path or f"{stem}.test.jsonl"
    spec = SplitSpec(ratio, state.config.seed if seed is None else seed, stratified)
    train, test = split_dataset(_load(corpus, locale, intents, strict), spec)
    write_corpus(train, train_path)
    write_corpus(test, test_path)
    _emit({"train": {"path": train_path, "examples": len(train)},
           "test": {"path": test_path, "examples": len(test)}})


@cli.command()
@corpus_options
@backend_options
@click.option("--tgt-locale", default=None, help="Locale written into projected records.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
@click.option("--quarantine", "quarantine_path", default=None, type=click.Path(dir_okay=False))
@click.option("--report", "report_path", default=None, type=click.Path(dir_okay=False))
@click.option("--resume", is_flag=True, help="Keep records already in --out.")
@click.option("--allocator", type=click.Choice(["global", "per_example"]), default=None)
@click.option("--max-quarantine-rate", type=float, default=None,
              help="Fail (exit 2) when a larger share of examples is quarantined.")
@click.pass_obj
def project(state: CliState, corpus, locale, intents, strict, out_path, quarantine_path, report_path,
            resume, **opts):
    """Project annotations into the target language."""
    config = _resolve_config(state, opts)
    state.start(click.get_current_context(), config)
    stem, _ = os.path.splitext(out_path)
    quarantine_path = quarantine_path or f"{stem}.quarantine.jsonl"
    report_path = report_path or f"{stem}.report.json"

    dataset = _load(corpus, locale, intents, strict)
    backend = build_backend(config)
    cache = TranslationCache(config.cache_path) if config.cache_path else None
    try:
        run = project_dataset(
            dataset, backend, config.src, config.tgt,
            resume=resume, out_path=out_path, tgt_locale=config.target_locale,
            cache=cache, max_in_flight=config.parallel, allocator=config.allocator,
        )
    finally:
        if cache is not None:
            cache.close()

    write_corpus(run.projected, out_path)
    write_quarantine(run.quarantine, quarantine_path)
    write_report(run.summary, report_path)
    _emit(run.summary.to_dict())
    state.collector.logs.info("projection finished", {
        "backend": run.summary.backend_id,
        "projected": run.summary.projected,
        "quarantined": run.summary.quarantined,
        "success_rate": run.summary.success_rate,
    })

    table = Table(title=f"projection {config.src} → {config.tgt}")
    table.add_column("outcome")
    table.add_column("examples", justify="right")
    table.add_row("projected", str(run.summary.projected))
    for reason, count in run.summary.quarantined_by_reason.items():
        if count:
            table.add_row(reason, str(count))
    table.add_row("resumed", str(run.summary.skipped))
    state.show(table)

    if run.summary.quarantined:
        state.collector.logs.warning("examples quarantined", {
            "quarantined": run.summary.quarantined, "path": quarantine_path,
        })
    if run.summary.quarantine_rate > config.max_quarantine_rate:
        state.collector.logs.error("quarantine rate above threshold", {
            "quarantine_rate": round(run.summary.quarantine_rate, 3),
            "max_quarantine_rate": config.max_quarantine_rate,
        })
        raise ProjectionError(
            f"quarantine rate {run.summary.quarantine_rate:.3f} exceeds {config.max_quarantine_rate:.3f}"
        )


@cli.command()
@corpus_options
@backend_options
@click.option("--schemes", default=None, help="Comma list of scheme names (default: all).")
@click.option("--mode", default="surface", show_default=True, help="surface or identifier.")
@click.option("--limit", type=int, default=None, help="Use only the first N sentences.")
@click.option("--fault-keep", multiple=True,
              help="Scheme whose delimiters the fault backend leaves alone (repeatable).")
@click.pass_obj
def markers(state: CliState, corpus, locale, intents, strict, schemes, mode, limit, fault_keep, **opts):
    """Measure how marker schemes survive translation."""
    config = _resolve_config(state, opts)
    state.start(click.get_current_context(), config)
    mode = Mode.parse(mode)
    catalog = builtin_schemes(mode)
    if config.marker_schemes:
        catalog = schemes_from_config(config.marker_schemes, mode)
    if schemes:
        wanted = [s.strip() for s in schemes.split(",") if s.strip()]
        by_name = {s.name: s for s in catalog}
        unknown = [name for name in wanted if name not in by_name]
        if unknown:
            raise UsageError(f"unknown marker schemes: {', '.join(unknown)}")
        catalog = [by_name[name] for name in wanted]

    if fault_keep and config.backend != "fault":
        raise UsageError("--fault-keep needs --backend fault")
    fault_markers = [s.pair for s in catalog if s.name not in set(fault_keep)]
    backend = build_backend(config, fault_markers)

    dataset = _load(corpus, locale, intents, strict)
    if limit is not None:
        if limit < 1:
            raise UsageError("--limit must be positive")
        dataset = Dataset(dataset.locale, dataset.examples[:limit], dataset.provenance)
    report = run_trial(dataset, catalog, backend, config.src, config.tgt, max_in_flight=config.parallel)
    _emit(report.to_dict())
    state.show(report.table())


@cli.group("eval")
def eval_group():
    """Score prediction files."""


def _compare_pairs(values: Sequence[str]) -> List[tuple]:
    pairs = []
    for value in values:
        if "=" not in value:
            raise UsageError(f"--compare expects NAME=FILE, got {value!r}")
        name, path = value.split("=", 1)
        pairs.append((name.strip(), path.strip()))
    return pairs


@eval_group.command("intents")
@click.argument("predictions", type=click.Path(dir_okay=False))
@click.option("--label", default="report", show_default=True, help="Column name of this report.")
@click.option("--compare", multiple=True, help="NAME=FILE of another prediction file to show alongside.")
@click.option("--confusion-csv", default=None, type=click.Path(dir_okay=False))
@click.option("--confidence-csv", default=None, type=click.Path(dir_okay=False),
              help="Mean-confidence confusion matrix as CSV.")
@click.option("--histogram-csv", default=None, type=click.Path(dir_okay=False))
@click.pass_obj
def eval_intents(state: CliState, predictions, label, compare, confusion_csv, confidence_csv, histogram_csv):
    """Per-intent F1, confusion matrix and confidence histogram."""
    state.start(click.get_current_context(), state.config)
    preds = load_intent_predictions(predictions)
    report = intent_report(preds)
    matrix = confusion(preds)
    histogram = confidence_histogram(preds)
    if confusion_csv:
        matrix.write_csv(confusion_csv)
    if confidence_csv:
        matrix.write_csv(confidence_csv, values="mean_confidence")
    if histogram_csv:
        histogram.write_csv(histogram_csv)

    reports = {label: report}
    for name, path in _compare_pairs(compare):
        reports[name] = intent_report(load_intent_predictions(path))
    payload = {
        "report": report.to_dict(),
        "confusion": matrix.to_dict(),
        "histogram": histogram.to_dict(),
    }
    if compare:
        payload["compared"] = {name: r.to_dict() for name, r in reports.items() if name != label}
    _emit(payload)
    if state.pretty:
        click.echo(render_comparison(reports) if compare else render_report(report), err=True, nl=False)


@eval_group.command("slots")
@click.argument("predictions", type=click.Path(dir_okay=False))
@click.option("--label", default="report", show_default=True)
@click.option("--compare", multiple=True, help="NAME=FILE of another prediction file to show alongside.")
@click.pass_obj
def eval_slots(state: CliState, predictions, label, compare):
    """Span-exact slot F1 and character accuracy."""
    state.start(click.get_current_context(), state.config)
    report = slot_report(load_slot_predictions(predictions))
    reports = {label: report}
    for name, path in _compare_pairs(compare):
        reports[name] = slot_report(load_slot_predictions(path))
    payload = {"report": report.to_dict()}
    if compare:
        payload["compared"] = {name: r.to_dict() for name, r in reports.items() if name != label}
    _emit(payload)
    text = render_comparison(reports, slots=True) if compare else render_report(report, slots=True)
    if state.pretty:
        click.echo(text, err=True, nl=False)


@cli.command()
@click.argument("ontology_path", type=click.Path(exists=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--pipeline-template", default=None, type=click.Path(dir_okay=False))
@click.option("--language", default="xx", show_default=True, help="Language code written to config.yml.")
@click.pass_obj
def generate(state: CliState, ontology_path, out_dir, pipeline_template, language):
    """Generate a Rasa project from an ontology."""
    state.start(click.get_current_context(), state.config)
    template = PipelineTemplate.load(pipeline_template) if pipeline_template else PipelineTemplate.default()
    scaffold = generate_project(load_ontology(ontology_path), template, out_dir, language=language)
    _emit({"out_dir": out_dir, "files": sorted(scaffold.files), "warnings": scaffold.warnings})


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.pass_obj
def validate(state: CliState, out_dir):
    """Check a generated project for cross-file consistency."""
    state.start(click.get_current_context(), state.config)
    result = validate_scaffold(out_dir)
    _emit(result.to_dict())
    if not result.clean:
        raise DataError(f"{len(result.violations)} scaffold violations in {out_dir}")


@cli.command()
@corpus_options
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.pass_obj
def ontology(state: CliState, corpus, locale, intents, strict, out_dir):
    """Turn a corpus into a CSV ontology tree."""
    state.start(click.get_current_context(), state.config)
    written = write_ontology(ontology_from_dataset(_load(corpus, locale, intents, strict)), out_dir)
    _emit({"out_dir": out_dir, "files": len(written)})


# --------------------------------------------------------
# Entry point
# --------------------------------------------------------
def main(argv: Optional[Sequence[str]] = None) -> int:
    err = Console(stderr=True)
    try:
        result = cli.main(args=list(argv) if argv is not None else None,
                          prog_name="xproject", standalone_mode=False)
    except click.exceptions.Abort:
        err.print("aborted")
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except XProjectError as e:
        err.print(f"[bold red]error:[/bold red] {escape(e.message)}", highlight=False)
        return e.exit_code
    except OSError as e:
        err.print(f"[bold red]error:[/bold red] {escape(str(e))}", highlight=False)
        return 2
    return result if isinstance(result, int) else 0

