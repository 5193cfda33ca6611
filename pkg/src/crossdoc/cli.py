"""Command-line entry points tying the toolchain together.

Exit codes: 0 success, 1 operational failure (diagnostics on stderr,
report path printed when one exists), 2 usage errors.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import analysis, bundler, linkgraph, pipeline, server as server_mod
from .config import PORT_ENV, RuntimeConfig, build_providers
from .errors import CrossdocError, PipelineError
from .ingest import find_figure_references, parse_document


def _load_doc(path: Path):
    return parse_document(path.read_bytes())


def _load_config(path: Path | None) -> RuntimeConfig:
    if path is None:
        return RuntimeConfig()
    return RuntimeConfig.from_file(path)


@click.group()
@click.version_option(package_name="crossdoc", prog_name="crossdoc")
def main():
    """Cross-modal augmented reading toolchain."""


@main.command()
@click.argument("doc_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--json", "json_out", type=click.Path(path_type=Path),
              help="Write the structural summary as JSON.")
def ingest(doc_path: Path, json_out: Path | None):
    """Parse an HTML paper and report its structure."""
    doc = _load_doc(doc_path)
    summary = {
        "doc_id": doc.doc_id,
        "source_hash": doc.source_hash,
        "passages": len(doc.passages),
        "figures": [
            {
                "figure_number": fig.figure_number,
                "element_id": fig.element_id,
                "caption_sentences": len(fig.caption_sentences),
                "position_index": fig.position_index,
                "references": [
                    {"passage_index": ref.passage_index,
                     "matched_text": ref.matched_text}
                    for ref in find_figure_references(doc, fig.figure_number)
                ],
            }
            for fig in doc.figures
        ],
    }
    if json_out:
        json_out.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    click.echo(f"{doc.doc_id}: {len(doc.passages)} passages, "
               f"{len(doc.figures)} figures")
    for fig in summary["figures"]:
        click.echo(f"  figure {fig['figure_number']} at paragraph "
                   f"{fig['position_index']}, "
                   f"{len(fig['references'])} referring passages")


@main.command()
@click.argument("doc_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              required=True, help="Runtime config JSON.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True,
              help="Bundle output path.")
def annotate(doc_path: Path, config_path: Path, out_path: Path):
    """Run the annotation pipeline and write the bundle."""
    doc = _load_doc(doc_path)
    config = _load_config(config_path)
    providers = build_providers(config)
    try:
        bundle = pipeline.run_pipeline(doc, providers, config)
    except PipelineError as exc:
        report_path = out_path.with_suffix(".report.json")
        if exc.report is not None:
            report_path.write_text(
                json.dumps(exc.report.to_dict(), indent=2) + "\n",
                encoding="utf-8",
            )
            click.echo(f"report: {report_path}", err=True)
        raise
    out_path.write_bytes(bundler.write_bundle(bundle))
    click.echo(f"{out_path}: {len(bundle.entities)} entities, "
               f"{len(bundle.mentions)} mentions, {len(bundle.links)} links")
    for line in bundle.diagnostics:
        click.echo(f"  note: {line}", err=True)


@main.command()
@click.argument("bundle_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--doc", "doc_path", type=click.Path(path_type=Path),
              required=True, help="The HTML document the bundle belongs to.")
@click.option("--json", "json_out", type=click.Path(path_type=Path),
              help="Write the full validation report as JSON.")
def validate(bundle_path: Path, doc_path: Path, json_out: Path | None):
    """Validate a bundle against its document; exit 1 when unservable."""
    doc = _load_doc(doc_path)
    bundle = bundler.read_bundle(bundle_path.read_bytes())
    report = linkgraph.validate_bundle(bundle, doc)
    if json_out:
        json_out.write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    for finding in report.errors:
        click.echo(f"error {finding.code} [{finding.subject_id}]: "
                   f"{finding.message}", err=True)
    for finding in report.warnings:
        click.echo(f"warning {finding.code} [{finding.subject_id}]: "
                   f"{finding.message}")
    stats = report.stats
    click.echo(f"entities={stats.get('entities', 0)} "
               f"points={stats.get('points', 0)} "
               f"mentions={stats.get('mentions', 0)} "
               f"links={stats.get('links', {})}")
    if not report.servable:
        raise click.exceptions.Exit(1)
    click.echo("bundle is servable")


@main.command()
@click.argument("doc_path", type=click.Path(dir_okay=False, path_type=Path))
@click.argument("bundle_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--out-dir", "out_dir", type=click.Path(path_type=Path), required=True,
              help="Serving root; a subdirectory per document id is created.")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="Config (strip selectors for the baseline variant).")
def bundle(doc_path: Path, bundle_path: Path, out_dir: Path, config_path: Path | None):
    """Lay out a servable directory: both variants plus the bundle."""
    doc = _load_doc(doc_path)
    bundle_obj = bundler.read_bundle(bundle_path.read_bytes())
    report = linkgraph.validate_bundle(bundle_obj, doc)
    if not report.servable:
        raise CrossdocError(
            "bundle failed validation: "
            + "; ".join(f"{f.code}:{f.subject_id}" for f in report.errors)
        )
    config = _load_config(config_path)
    doc_dir = out_dir / doc.doc_id
    doc_dir.mkdir(parents=True, exist_ok=True)
    (doc_dir / "aug.html").write_bytes(bundler.augment_html(doc, bundle_obj))
    (doc_dir / "base.html").write_bytes(
        bundler.emit_baseline_html(doc, config.strip_selectors)
    )
    (doc_dir / "bundle.json").write_bytes(bundler.write_bundle(bundle_obj))
    assets_src = doc_path.parent / "assets"
    if assets_src.is_dir():
        assets_dst = doc_dir / "assets"
        assets_dst.mkdir(exist_ok=True)
        for item in sorted(assets_src.iterdir()):
            if item.is_file():
                (assets_dst / item.name).write_bytes(item.read_bytes())
    click.echo(f"{doc_dir}: aug.html, base.html, bundle.json")


@main.command()
@click.argument("doc_path", type=click.Path(dir_okay=False, path_type=Path))
@click.option("--variant", type=click.Choice(["aug", "base"]), required=True)
@click.option("--bundle", "bundle_path", type=click.Path(path_type=Path),
              help="Required for the augmented variant.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--config", "config_path", type=click.Path(path_type=Path))
def render(doc_path: Path, variant: str, bundle_path: Path | None,
           out_path: Path, config_path: Path | None):
    """Emit one rendered variant of the document."""
    doc = _load_doc(doc_path)
    config = _load_config(config_path)
    if variant == "aug":
        if bundle_path is None:
            raise click.UsageError("--bundle is required for the augmented variant")
        bundle_obj = bundler.read_bundle(bundle_path.read_bytes())
        out_path.write_bytes(bundler.augment_html(doc, bundle_obj))
    else:
        out_path.write_bytes(
            bundler.emit_baseline_html(doc, config.strip_selectors)
        )
    click.echo(str(out_path))


@main.command()
@click.argument("root", type=click.Path(file_okay=False, path_type=Path))
@click.option("--port", type=int, default=None,
              help=f"Port (default 8640, or ${PORT_ENV}).")
@click.option("--config", "config_path", type=click.Path(path_type=Path))
def serve(root: Path, port: int | None, config_path: Path | None):
    """Serve rendered documents, bundles, and assets."""
    config = _load_config(config_path)
    if port is None:
        port = int(os.environ.get(PORT_ENV, "8640"))
    service = server_mod.ArtifactServer(root, port=port,
                                        cors_origins=config.cors_origins)
    click.echo(f"serving {root} on {service.base_url}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.close()


@main.command()
@click.option("--scores", "scores_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--distance-map", "map_path", type=click.Path(path_type=Path),
              required=True)
@click.option("--times", "times_path", type=click.Path(path_type=Path))
@click.option("--tlx", "tlx_path", type=click.Path(path_type=Path))
@click.option("--alpha-level", type=click.Choice(["ordinal", "nominal", "interval"]),
              default="ordinal", show_default=True)
@click.option("--tost-margin", type=float, default=20.0, show_default=True,
              help="Equivalence margin for completion time, in seconds.")
@click.option("--json", "json_out", type=click.Path(path_type=Path),
              help="Write the full report as JSON.")
def stats(scores_path: Path, map_path: Path, times_path: Path | None,
          tlx_path: Path | None, alpha_level: str, tost_margin: float,
          json_out: Path | None):
    """Run the evaluation statistics over the study CSVs."""
    scores = analysis.ScoreTable.from_csv(scores_path)
    group_map = analysis.DistanceGroupMap.from_file(map_path)
    times = analysis.TimesTable.from_csv(times_path) if times_path else None
    tlx = analysis.TlxTable.from_csv(tlx_path) if tlx_path else None
    report = analysis.build_study_report(
        scores, group_map, times, tlx,
        alpha_level=alpha_level, tost_margin_seconds=tost_margin,
    )
    if json_out:
        json_out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    click.echo(analysis.format_report_table(report))


def cli_dispatch(argv: list[str]) -> int:
    """Run the CLI programmatically and map outcomes to exit codes."""
    try:
        result = main.main(args=list(argv), prog_name="crossdoc",
                           standalone_mode=False)
        if isinstance(result, int):
            return result
    except click.exceptions.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except click.exceptions.ClickException as exc:
        exc.show()
        return exc.exit_code
    except CrossdocError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


def run() -> None:
    """Console entry point; all diagnostics, no tracebacks."""
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    run()
