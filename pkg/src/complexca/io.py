"""File formats: rule JSON, PGM/PNG images, decoder bundles and small CSVs.

Every loader reports malformed input with a byte offset (binary and JSON
files) or a line number (CSV files).
"""
from __future__ import annotations

import colorsys
import csv
import io
import json
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .ca import CaSpec, RuleTable
from .reservoir import Decoder

__all__ = [
    "byte_offset",
    "parse_json",
    "rule_to_json",
    "rule_from_json",
    "save_rule",
    "load_rule",
    "encode_pgm",
    "decode_pgm",
    "palette",
    "to_rgb",
    "save_png",
    "save_pgm",
    "load_pgm",
    "save_image",
    "float_to_gray",
    "save_bundle",
    "load_bundle",
    "features_to_csv",
    "labels_from_csv",
    "rule_sample_csv",
]

RULE_FORMAT = "complexca.rule/1"
BUNDLE_FORMAT = "complexca.bundle/1"


def byte_offset(text: str, char_pos: int) -> int:
    """UTF-8 byte offset of a character position."""
    return len(text[:char_pos].encode("utf-8"))


def parse_json(text: str | bytes, what: str = "file"):
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed {what} at byte {byte_offset(text, exc.pos)}: {exc.msg}") from None


# --- rules --------------------------------------------------------------------------


def rule_to_json(rt: RuleTable) -> str:
    s = rt.spec
    doc = {
        "format": RULE_FORMAT,
        "dims": s.dims,
        "num_states": s.num_states,
        "radius": s.radius,
        "shape": list(s.shape),
        "outputs": rt.digits(),
    }
    return json.dumps(doc, indent=1) + "\n"


def rule_from_json(text: str | bytes) -> RuleTable:
    doc = parse_json(text, "rule file")
    if not isinstance(doc, dict):
        raise ValueError("rule file must hold a JSON object")
    missing = [k for k in ("dims", "num_states", "radius", "outputs") if k not in doc]
    if missing:
        raise ValueError(f"rule file lacks field(s) {', '.join(missing)}")
    dims = int(doc["dims"])
    shape = tuple(doc.get("shape") or (64,) * dims)
    spec = CaSpec(dims, int(doc["num_states"]), int(doc["radius"]), shape)
    digits = str(doc["outputs"])
    if len(digits) != spec.table_size:
        raise ValueError(f"outputs has {len(digits)} digits, expected {spec.table_size}")
    for i, c in enumerate(digits):
        if not c.isalnum() or int(c, 36) >= spec.num_states:
            raise ValueError(f"outputs digit {i} ({c!r}) is not a state below {spec.num_states}")
    return RuleTable.from_digits(spec, digits)


def save_rule(rt: RuleTable, path: str | Path) -> None:
    Path(path).write_text(rule_to_json(rt))


def load_rule(path: str | Path) -> RuleTable:
    return rule_from_json(Path(path).read_bytes())


# --- images -------------------------------------------------------------------------


def encode_pgm(cells: np.ndarray, maxval: int) -> bytes:
    """Binary P5 graymap; cell values are written unchanged."""
    a = np.asarray(cells)
    if a.ndim != 2:
        raise ValueError("PGM needs a 2D array")
    if not 1 <= maxval <= 255:
        raise ValueError("maxval must be in [1, 255]")
    if a.size and (a.min() < 0 or a.max() > maxval):
        raise ValueError(f"values must lie in [0, {maxval}]")
    h, w = a.shape
    return f"P5\n{w} {h}\n{maxval}\n".encode("ascii") + a.astype(np.uint8).tobytes()


def decode_pgm(data: bytes) -> tuple[np.ndarray, int]:
    """Parse a P5 file; returns (cells, maxval)."""
    pos = 0
    fields: list[int] = []
    if data[:2] != b"P5":
        raise ValueError("malformed PGM at byte 0: expected magic 'P5'")
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise ValueError(f"malformed PGM at byte {pos}: expected a decimal header field")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ValueError(f"malformed PGM at byte {pos}: expected whitespace after header")
    pos += 1
    w, h, maxval = fields
    if not 1 <= maxval <= 255:
        raise ValueError(f"unsupported PGM maxval {maxval} (need 1..255)")
    need = w * h
    if len(data) - pos < need:
        raise ValueError(f"malformed PGM at byte {len(data)}: raster truncated, {need - (len(data) - pos)} bytes missing")
    cells = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos).reshape(h, w).copy()
    if cells.size and cells.max() > maxval:
        bad = int(np.argmax(cells.ravel() > maxval))
        raise ValueError(f"malformed PGM at byte {pos + bad}: value exceeds maxval {maxval}")
    return cells, maxval


def palette(num_states: int) -> np.ndarray:
    """(k, 3) uint8 colours: state 0 white, the rest evenly spaced hues."""
    if num_states < 1:
        raise ValueError("need at least one state")
    pal = np.empty((num_states, 3), dtype=np.uint8)
    pal[0] = 255
    for s in range(1, num_states):
        h = (s - 1) / (num_states - 1)
        pal[s] = np.round(np.array(colorsys.hsv_to_rgb(h, 1.0, 0.75)) * 255)
    return pal


def to_rgb(cells: np.ndarray, num_states: int, scale: int = 1) -> np.ndarray:
    a = np.asarray(cells)
    if a.ndim != 2:
        raise ValueError("rendering needs a 2D array")
    if a.size and a.max() >= num_states:
        raise ValueError("cell states must lie in [0, num_states)")
    rgb = palette(num_states)[a]
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, 0), scale, 1)
    return rgb


def save_png(cells: np.ndarray, num_states: int, path: str | Path, scale: int = 1) -> None:
    # Fixed encoder settings so identical inputs give identical bytes.
    Image.fromarray(to_rgb(cells, num_states, scale), "RGB").save(path, format="PNG", optimize=False, compress_level=9)


def save_pgm(cells: np.ndarray, num_states: int, path: str | Path) -> None:
    Path(path).write_bytes(encode_pgm(cells, num_states - 1))


def load_pgm(path: str | Path) -> tuple[np.ndarray, int]:
    """Cells and their state count (maxval + 1)."""
    cells, maxval = decode_pgm(Path(path).read_bytes())
    return cells, maxval + 1


def float_to_gray(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] reals to 0..255 levels (clipped)."""
    return np.floor(np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255 + 0.5).astype(np.uint8)


def save_image(cells: np.ndarray, num_states: int, stem: str | Path, formats: Sequence[str] = ("png", "pgm"),
               scale: int = 1) -> list[Path]:
    """Write ``stem.png`` and/or ``stem.pgm``; returns the written paths."""
    out = []
    for fmt in formats:
        p = Path(f"{stem}.{fmt}")
        if fmt == "png":
            save_png(cells, num_states, p, scale)
        elif fmt == "pgm":
            save_pgm(cells, num_states, p)
        else:
            raise ValueError(f"unknown image format {fmt!r}")
        out.append(p)
    return out


# --- decoder bundles ----------------------------------------------------------------


def save_bundle(stem: str | Path, manifest: dict, decoder: Decoder) -> tuple[Path, Path]:
    """``stem.json`` (manifest) plus ``stem.npz`` (weights, bias)."""
    jp, wp = Path(f"{stem}.json"), Path(f"{stem}.npz")
    doc = {"format": BUNDLE_FORMAT, "weights": wp.name, "shape": list(decoder.weights.shape), **manifest}
    jp.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    with open(wp, "wb") as fh:
        np.savez(fh, weights=decoder.weights, bias=decoder.bias)
    return jp, wp


def load_bundle(stem_or_json: str | Path) -> tuple[dict, Decoder]:
    p = Path(stem_or_json)
    jp = p if p.suffix == ".json" else Path(f"{p}.json")
    doc = parse_json(jp.read_bytes(), "bundle manifest")
    if doc.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"unsupported bundle format {doc.get('format')!r}")
    with np.load(jp.parent / doc["weights"]) as z:
        dec = Decoder(z["weights"].copy(), z["bias"].copy())
    if list(dec.weights.shape) != doc["shape"]:
        raise ValueError(f"weights shape {dec.weights.shape} disagrees with manifest {doc['shape']}")
    return doc, dec


# --- CSV ----------------------------------------------------------------------------


def features_to_csv(features: np.ndarray) -> str:
    """One row per time step, columns f0..f{K-1}."""
    f = np.asarray(features)
    if f.ndim != 2:
        raise ValueError("features must be (T, K)")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"f{j}" for j in range(f.shape[1])])
    for t, row in enumerate(f):
        w.writerow([t] + [repr(v) if isinstance(v, float) else v for v in row.tolist()])
    return buf.getvalue()


def labels_from_csv(text: str) -> dict[str, int]:
    """``rule_id,label`` rows with label 0/1 (header optional)."""
    out: dict[str, int] = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or (lineno == 1 and row[0].strip().lower() == "rule_id"):
            continue
        if len(row) != 2 or row[1].strip() not in ("0", "1"):
            raise ValueError(f"line {lineno}: expected 'rule_id,0|1', got {row!r}")
        out[row[0].strip()] = int(row[1])
    return out


def rule_sample_csv(rows: Sequence[tuple[str, float, Sequence[int]]]) -> str:
    """``rule_id, lambda, n_0 .. n_{k-1}`` for sampled rules."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    k = len(rows[0][2]) if rows else 2
    w.writerow(["rule_id", "lambda"] + [f"n{s}" for s in range(k)])
    for rid, lam, counts in rows:
        w.writerow([rid, repr(float(lam))] + [int(c) for c in counts])
    return buf.getvalue()
