"""Output plumbing: manifests, CSV and NDJSON writers.

Every run writes its manifest (resolved configuration + content hash)
before any data file, so a crash can never leave data without its
provenance.  Nothing here embeds timestamps or machine identity: the
same configuration and seed must produce byte-identical files.
"""

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError

OUTDIR_ENV = "TWOMODE_OUTDIR"


def resolve_outdir(arg=None) -> Path:
    """Output directory: explicit argument, else $TWOMODE_OUTDIR, else cwd."""
    if arg:
        out = Path(arg)
    elif os.environ.get(OUTDIR_ENV):
        out = Path(os.environ[OUTDIR_ENV])
    else:
        out = Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(x):
    """Shortest round-tripping decimal for floats; str for the rest.

    numpy scalars are coerced first: their reprs grew a type wrapper in
    numpy 2 and must never reach a data file.
    """
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(x)


def config_hash(resolved: dict) -> str:
    """Canonical sha256 of a resolved configuration dict."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(path, subcommand: str, resolved: dict, seed,
                   extra: dict = None) -> str:
    """Write the run manifest; returns the configuration hash."""
    digest = config_hash(resolved)
    doc = {
        "subcommand": subcommand,
        "seed": seed,
        "config_hash": digest,
        "resolved": resolved,
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return digest


def write_csv(path, columns, rows, meta: dict = None):
    """CSV with '#'-prefixed metadata lines before the header row.

    rows is an iterable of sequences matching columns; floats are written
    with repr so reruns are byte-identical and full precision survives.
    """
    path = Path(path)
    with open(path, "w") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {_fmt(value)}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ConfigError(
                    f"row width {len(row)} != {len(columns)} columns")
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_ndjson(path, records, meta: dict = None):
    """One JSON object per line; optional meta object as the first line."""
    path = Path(path)
    with open(path, "w") as fh:
        if meta is not None:
            json.dump({"meta": meta}, fh, sort_keys=True,
                      separators=(",", ":"))
            fh.write("\n")
        for rec in records:
            json.dump(rec, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")
