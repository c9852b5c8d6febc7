"""CSV datasets, tidy CSV output, JSON configs and run manifests."""
import csv
import hashlib
import json
import math
import platform
import re
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import jsonschema
import numpy as np

from .errors import InputError, UsageError

_COVARIATE = re.compile(r"^x(\d+)$")


def read_dataset(path, require_treatment=True):
    """Read a y,t,x1..xp CSV. Returns (X, t, y).

    Every cell must be present and numeric; errors carry the file line number.
    With require_treatment=False the t column may be absent (a population
    file of potential outcomes) and t comes back as None.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot open dataset {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        has_t = "t" in header
        if "y" not in header or (require_treatment and not has_t):
            raise InputError(f"{path}: header must contain columns y and t, got {header}")
        xcols = sorted((int(m.group(1)), i) for i, h in enumerate(header)
                       if (m := _COVARIATE.match(h)))
        expected = list(range(1, len(xcols) + 1))
        if [k for k, _ in xcols] != expected:
            raise InputError(f"{path}: covariate columns must be x1..xp without gaps")
        extra = set(header) - {"y", "t"} - {header[i] for _, i in xcols}
        if extra:
            raise InputError(f"{path}: unexpected columns {sorted(extra)}")
        iy = header.index("y")
        it = header.index("t") if has_t else None
        ys, ts, xs = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{line}: expected {len(header)} fields, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell == "":
                    raise InputError(f"{path}:{line}: missing value in column {name}")
                try:
                    v = float(cell)
                except ValueError:
                    raise InputError(f"{path}:{line}: column {name} is not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}:{line}: column {name} is not finite")
                vals.append(v)
            if has_t:
                if vals[it] not in (0.0, 1.0):
                    raise InputError(f"{path}:{line}: treatment t must be 0 or 1, got {row[it].strip()}")
                ts.append(int(vals[it]))
            ys.append(vals[iy])
            xs.append([vals[i] for _, i in xcols])
    if not ys:
        raise InputError(f"{path}: no data rows")
    X = np.asarray(xs, dtype=float).reshape(len(ys), len(xcols))
    t = np.asarray(ts, dtype=np.int8) if has_t else None
    return X, t, np.asarray(ys, dtype=float)


def format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_table(path, columns, rows):
    """Write rows (dicts) with a fixed column order; floats use repr so they round-trip."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_cell(r.get(c)) for c in columns])


def read_table(path):
    """Read a table written by write_table; numeric cells become floats, empty cells None."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if v == "":
                    rec[k] = None
                    continue
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
            out.append(rec)
    return out


# -- JSON configs --------------------------------------------------------------

def _pointer(path):
    return "/" + "/".join(str(p) for p in path) if path else "/"


def load_config(path, schema):
    """Parse and validate a JSON config. All violations are reported, each with its JSON pointer."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot open config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    validate_config(doc, schema, source=str(path))
    return doc


def validate_config(doc, schema, source="config"):
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(doc),
                    key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"  {_pointer(e.absolute_path)}: {e.message}" for e in errors]
        raise UsageError(f"{source}: schema violations\n" + "\n".join(lines))
    return doc


def config_digest(doc):
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _version(name):
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return "unknown"


def manifest_path(out):
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_manifest(out, command, config, seed, extra=None):
    doc = {
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "config_sha256": config_digest(config),
        "config": config,
        "versions": {
            "artifact": _version("artifact"),
            "numpy": np.__version__,
            "scipy": _version("scipy"),
            "python": platform.python_version(),
        },
        "output": Path(out).name,
    }
    if extra:
        doc.update(extra)
    path = manifest_path(out)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path
