"""Plain-text file formats.

Every file starts with one header line of comma-separated ``key=value``
items, followed by comma-separated numeric rows written with 17
significant digits (lossless for float64).  Readers accept extra header
keys, such as the ``config`` hash the command-line tools add.
"""

import numpy as np

from .dictionary import Dictionary
from .dynsys import SnapshotSet
from .estimators import KoopmanApprox
from .exceptions import ParseError
from .pod import PODBasis

FMT = "%.17g"


def format_header(items):
    return ",".join(f"{k}={v}" for k, v in items.items())


def parse_header(line, path=None, required=()):
    items = {}
    text = line.strip()
    if not text:
        raise ParseError("missing header line", 1, path)
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep or not key.strip():
            raise ParseError(f"malformed header item {part!r}", 1, path)
        items[key.strip()] = value.strip()
    for key in required:
        if key not in items:
            raise ParseError(f"header lacks {key!r}", 1, path)
    return items


def _header_int(items, key, path):
    try:
        return int(items[key])
    except ValueError:
        raise ParseError(f"header value {key}={items[key]!r} is not an integer", 1, path) from None


def _read_rows(path, n_cols=None):
    """Header items and the numeric body; errors carry 1-based line numbers."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1, path)
    header = lines[0]
    body = []
    width = n_cols
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if width is None:
            width = len(parts)
        if len(parts) != width:
            raise ParseError(f"expected {width} fields, found {len(parts)}", lineno, path)
        try:
            body.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"non-numeric field in {line!r}", lineno, path) from None
    arr = np.array(body, dtype=np.float64).reshape(len(body), width or 0)
    return header, arr


def _write(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_header(header) + "\n")
        if rows.size:
            np.savetxt(fh, rows, fmt=FMT, delimiter=",")


def save_snapshots(S, path, extra=None):
    uniform = np.array_equal(S.weights, np.full(S.count, 1.0 / S.count))
    header = {"d": S.dim, "M": S.count, "weighted": 0 if uniform else 1, **(extra or {})}
    cols = [S.X, S.Y] if uniform else [S.X, S.Y, S.weights[:, None]]
    _write(path, header, np.hstack(cols))


def load_snapshots(path):
    """Read a snapshot CSV: ``d`` state columns, ``d`` image columns, optional weight column."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    items = parse_header(first, path, ("d", "M", "weighted"))
    d = _header_int(items, "d", path)
    M = _header_int(items, "M", path)
    weighted = _header_int(items, "weighted", path)
    if weighted not in (0, 1):
        raise ParseError("weighted must be 0 or 1", 1, path)
    _, rows = _read_rows(path, 2 * d + weighted)
    if rows.shape[0] != M:
        raise ParseError(f"header announces M={M} rows, found {rows.shape[0]}", 1, path)
    if M == 0:
        raise ParseError("snapshot file holds no pairs", 1, path)
    w = rows[:, 2 * d] if weighted else None
    return SnapshotSet(rows[:, :d], rows[:, d : 2 * d], w, {"source": str(path)})


def save_fields(F, path, extra=None):
    F = np.atleast_2d(F)
    _write(path, {"D": F.shape[1], "T": F.shape[0], **(extra or {})}, F)


def load_fields(path):
    """Read a full-field snapshot matrix, returned as ``(T, D)``."""
    with open(path, encoding="utf-8") as fh:
        items = parse_header(fh.readline(), path, ("D", "T"))
    D = _header_int(items, "D", path)
    T = _header_int(items, "T", path)
    _, rows = _read_rows(path, D)
    if rows.shape[0] != T:
        raise ParseError(f"header announces T={T} rows, found {rows.shape[0]}", 1, path)
    return rows


def save_dictionary(D, path, extra=None):
    _write(path, {"N": D.n_cells, "d": D.dim, **(extra or {})}, D.centroids)


def load_dictionary(path):
    with open(path, encoding="utf-8") as fh:
        items = parse_header(fh.readline(), path, ("N", "d"))
    N = _header_int(items, "N", path)
    d = _header_int(items, "d", path)
    _, rows = _read_rows(path, d)
    if rows.shape[0] != N:
        raise ParseError(f"header announces N={N} centroids, found {rows.shape[0]}", 1, path)
    return Dictionary(rows, meta={"source": str(path)})


def save_operator(K, path, extra=None):
    """Index-map operators as ``row,col`` positions of the ones; dense ones as the full matrix."""
    header = {"N": K.n_cells, "variant": K.variant, **(extra or {})}
    if K.variant == "multdmd":
        rows = np.flatnonzero(K.sigma >= 0)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_header(header) + "\n")
            for i in rows:
                fh.write(f"{i},{K.sigma[i]}\n")
    else:
        A = K.matrix
        if np.iscomplexobj(A):
            raise ValueError("complex dense operators are not supported by the CSV format")
        _write(path, header, A)


def load_operator(path):
    with open(path, encoding="utf-8") as fh:
        items = parse_header(fh.readline(), path, ("N", "variant"))
    N = _header_int(items, "N", path)
    variant = items["variant"]
    if variant == "multdmd":
        _, rows = _read_rows(path, 2)
        sigma = np.full(N, -1, dtype=np.int64)
        if rows.size:
            r = rows[:, 0].astype(np.int64)
            c = rows[:, 1].astype(np.int64)
            if r.min() < 0 or r.max() >= N or c.min() < 0 or c.max() >= N:
                raise ParseError("operator index out of range", None, path)
            if np.unique(r).size != r.size:
                raise ParseError("a row holds more than one nonzero", None, path)
            sigma[r] = c
        return KoopmanApprox("multdmd", sigma=sigma)
    if variant == "dense":
        _, rows = _read_rows(path, N)
        if rows.shape[0] != N:
            raise ParseError(f"expected {N} rows, found {rows.shape[0]}", 1, path)
        return KoopmanApprox("dense", matrix=rows)
    raise ParseError(f"unknown operator variant {variant!r}", 1, path)


SPECTRUM_COLUMNS = ("re", "im", "residual", "support_size", "cycle_length")


def save_spectrum(R, path, extra=None):
    n = len(R)
    res = R.residuals if R.residuals is not None else np.full(n, np.nan)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_header({"K": n, "zero_multiplicity": R.zero_multiplicity, **(extra or {})}) + "\n")
        fh.write(",".join(SPECTRUM_COLUMNS) + "\n")
        for lam, r, s, L in zip(R.eigenvalues, res, R.support_sizes, R.cycle_lengths):
            fh.write(f"{FMT % lam.real},{FMT % lam.imag},{FMT % r},{int(s)},{int(L)}\n")


def load_spectrum(path):
    """Spectrum CSV as a dict of column arrays."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    parse_header(lines[0], path)
    if len(lines) < 2 or tuple(lines[1].split(",")) != SPECTRUM_COLUMNS:
        raise ParseError("missing spectrum column line", 2, path)
    rows = np.array([[float(v) for v in line.split(",")] for line in lines[2:] if line], dtype=np.float64)
    rows = rows.reshape(-1, len(SPECTRUM_COLUMNS))
    return {name: rows[:, k] for k, name in enumerate(SPECTRUM_COLUMNS)}


def save_eigenvectors(R, D, path, extra=None):
    """Cell-indexed eigenvector table joined with the centroid coordinates."""
    V = R.eigvecs
    cols = [np.arange(D.n_cells)[:, None].astype(np.float64), D.centroids]
    for k in range(V.shape[1]):
        cols.append(V[:, k].real[:, None])
        cols.append(V[:, k].imag[:, None])
    _write(path, {"N": D.n_cells, "d": D.dim, "K": V.shape[1], **(extra or {})}, np.hstack(cols))


def save_pod(B, path, extra=None):
    rows = np.vstack([B.mean_field[None, :], B.modes.T, np.pad(B.singular_values, (0, B.n_features - B.rank))[None, :]])
    _write(path, {"D": B.n_features, "r": B.rank, **(extra or {})}, rows)


def load_pod(path):
    with open(path, encoding="utf-8") as fh:
        items = parse_header(fh.readline(), path, ("D", "r"))
    D = _header_int(items, "D", path)
    r = _header_int(items, "r", path)
    _, rows = _read_rows(path, D)
    if rows.shape[0] != r + 2:
        raise ParseError(f"expected {r + 2} rows, found {rows.shape[0]}", 1, path)
    s = rows[-1, :r].copy()
    total_known = np.cumsum(s**2)
    return PODBasis(rows[0].copy(), rows[1 : r + 1].T.copy(), s, total_known / total_known[-1])
