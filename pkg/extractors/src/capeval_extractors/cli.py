"""Command line entry point: capeval-extract.

Runs one extraction job and prints a JSON summary. Exits 2 when any
corpus image could not be found, after writing everything it could plus
the gaps report.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .jobs import CHOICES, DEFAULT_FAMILIES, ExtractionJob, run_job


@click.command(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--image-root", required=True, type=click.Path(exists=True, file_okay=False)
)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option(
    "--models",
    default=",".join(DEFAULT_FAMILIES),
    show_default=True,
    help=f"Comma-separated subset of {', '.join(CHOICES)}.",
)
@click.option("--dim", default=64, show_default=True)
@click.option("--batch-size", default=16, show_default=True)
@click.option("--device", default="cpu", show_default=True)
@click.option("--detector-threshold", default=0.5, show_default=True)
def main(corpus, image_root, out_dir, models, dim, batch_size, device, detector_threshold):
    """Extract embedding, channel, and detection files from a corpus."""
    families = tuple(f.strip() for f in models.split(",") if f.strip())
    try:
        job = ExtractionJob(
            corpus=Path(corpus),
            image_root=Path(image_root),
            out_dir=Path(out_dir),
            families=families,
            dim=dim,
            batch_size=batch_size,
            device=device,
            detector_threshold=detector_threshold,
        )
        result = run_job(job)
    except Exception as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(
        json.dumps(
            {
                "written": {k: str(v) for k, v in sorted(result.written.items())},
                "meta": str(result.meta),
                "gaps": result.gaps,
            },
            indent=1,
            sort_keys=True,
        )
    )
    if result.gaps:
        click.echo(
            f"{len(result.gaps)} corpus image(s) missing; see gaps.json", err=True
        )
        sys.exit(2)
