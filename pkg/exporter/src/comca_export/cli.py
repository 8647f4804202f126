"""Exporter command line: one mode per invocation."""

from __future__ import annotations

import logging
import sys

import click

from .encoders import ImageDecode, ModelLoad
from .jobs import MODES, ExportJob, export


@click.command()
@click.option("--mode", required=True, type=click.Choice(MODES))
@click.option("--model", "model_id", required=True,
              help="Encoder id: hash/<dim> or clip/<checkpoint>.")
@click.option("--in", "input_path", required=True,
              help="Image/pair manifest (JSONL) or vocabulary JSON.")
@click.option("--out", "output_path", required=True,
              help="Output container path.")
@click.option("--pairs", "pairs_path", default="",
              help="Optional (attribute, object) pair list for query_texts.")
@click.option("--device", default="cpu")
@click.option("--batch-size", type=int, default=32)
@click.option("--allow-skips", is_flag=True,
              help="Exit 0 even when undecodable images were skipped.")
@click.option("--verbose", is_flag=True)
def cli(mode, model_id, input_path, output_path, pairs_path, device,
        batch_size, allow_skips, verbose):
    """Export embedding containers for the scoring pipeline."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    job = ExportJob(mode=mode, model_id=model_id, input_path=input_path,
                    output_path=output_path, pairs_path=pairs_path,
                    device=device, batch_size=batch_size)
    result = export(job)
    click.echo(f"wrote {result.rows} rows to {output_path}")
    if result.skipped:
        click.echo(f"skipped {len(result.skipped)} items: "
                   f"{', '.join(result.skipped[:5])}"
                   f"{'...' if len(result.skipped) > 5 else ''}", err=True)
        if not allow_skips:
            raise SystemExit(2)


def main(argv=None):
    try:
        cli(args=argv, standalone_mode=False)
        return 0
    except SystemExit as exc:
        return exc.code or 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ModelLoad as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (ImageDecode, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
