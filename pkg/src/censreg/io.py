"""File formats: dataset CSV (asterisk or sidecar-mask form), draw store
NDJSON, predictive CSVs, and the artifact manifest.

All floating point output uses 17-significant-digit decimals so files
round-trip bit exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .model import CensoredDataset, DrawStore, ModelParams


def fmt(x: float) -> str:
    """17-significant-digit decimal; exact round-trip for IEEE doubles."""
    return f"{float(x):.17g}"


class DataFormatError(ValueError):
    """Malformed dataset file; carries row/column context in the message."""


def write_dataset(d: CensoredDataset, path: str | Path, mask_path: str | Path | None = None) -> None:
    """Write a dataset CSV.

    Default form marks censored entries with a trailing asterisk on the
    stored limit. With ``mask_path`` the values are written plain and the
    mask goes to a 0/1 sidecar CSV with matching covariate headers.
    """
    path = Path(path)
    p, r = d.p, d.r
    header = (["y"] if d.y is not None else []) + [f"x{j + 1}" for j in range(p)]
    header += [f"w{j + 1}" for j in range(r)]
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for i in range(d.n):
            row = []
            if d.y is not None:
                row.append(fmt(d.y[i]))
            for j in range(p):
                cell = fmt(d.x[i, j])
                if mask_path is None and d.mask[i, j]:
                    cell += "*"
                row.append(cell)
            for j in range(r):
                row.append(fmt(d.w[i, j]))
            out.writerow(row)
    if mask_path is not None:
        with Path(mask_path).open("w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"x{j + 1}" for j in range(p)])
            for i in range(d.n):
                out.writerow([int(v) for v in d.mask[i]])


def read_dataset(path: str | Path, mask_path: str | Path | None = None) -> CensoredDataset:
    """Read a dataset CSV in either the asterisk or the sidecar-mask form.

    Censored entries carry their limit as both value and limit; limits of
    observed entries are unknown to the format and stored as -inf.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = rows[0]
    has_y = header[:1] == ["y"]
    x_cols = [k for k, name in enumerate(header) if name.startswith("x")]
    w_cols = [k for k, name in enumerate(header) if name.startswith("w")]
    if not x_cols:
        raise DataFormatError(f"{path}: no covariate columns in header {header}")
    n = len(rows) - 1
    p = len(x_cols)
    y = np.empty(n) if has_y else None
    x = np.empty((n, p))
    mask = np.zeros((n, p), dtype=bool)
    w = np.empty((n, len(w_cols))) if w_cols else None
    def cell_float(i: int, k: int, text: str) -> float:
        try:
            return float(text)
        except ValueError as exc:
            raise DataFormatError(
                f"{path}: row {i + 2}, column '{header[k]}': {exc}"
            ) from exc

    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        if has_y:
            y[i] = cell_float(i, 0, row[0])
        for jj, k in enumerate(x_cols):
            cell = row[k].strip()
            if cell.endswith("*"):
                mask[i, jj] = True
                cell = cell[:-1]
            x[i, jj] = cell_float(i, k, cell)
        for jj, k in enumerate(w_cols):
            w[i, jj] = cell_float(i, k, row[k])
    if mask_path is not None:
        with Path(mask_path).open(newline="") as fh:
            mrows = list(csv.reader(fh))
        if len(mrows) - 1 != n:
            raise DataFormatError(f"{mask_path}: {len(mrows) - 1} mask rows, expected {n}")
        for i, row in enumerate(mrows[1:]):
            if len(row) != p:
                raise DataFormatError(f"{mask_path}: row {i + 2} has {len(row)} fields, expected {p}")
            mask[i] = [bool(int(v)) for v in row]
    limits = np.where(mask, x, -np.inf)
    return CensoredDataset(y=y, x=x, mask=mask, limits=limits, w=w)


def _params_record(iteration: int, params: ModelParams,
                   imputations: np.ndarray | None) -> str:
    p = params.beta.size
    tril = params.omega[np.tril_indices(p)]
    parts = [
        f'"iteration":{iteration}',
        f'"beta0":{fmt(params.beta0)}',
        '"beta":[' + ",".join(fmt(v) for v in params.beta) + "]",
        f'"sigma2":{fmt(params.sigma2)}',
        '"gamma":[' + ",".join(fmt(v) for v in params.gamma.ravel(order="F")) + "]",
        f'"gamma_rows":{params.gamma.shape[0]}',
        '"omega_tril":[' + ",".join(fmt(v) for v in tril) + "]",
    ]
    if imputations is not None:
        parts.append('"imputations":[' + ",".join(fmt(v) for v in imputations) + "]")
    return "{" + ",".join(parts) + "}"


def write_store(store: DrawStore, path: str | Path) -> None:
    """Serialize a DrawStore as a metadata header line plus one draw per line."""
    path = Path(path)
    meta = {
        "seed": int(store.seed),
        "burn_in": int(store.burn_in),
        "thin": int(store.thin),
        "scan_prob": float(store.scan_prob),
        "complete": bool(store.complete),
        "n_draws": len(store),
        "censored_idx": [] if store.censored_idx is None else store.censored_idx.tolist(),
    }
    with path.open("w") as fh:
        fh.write(json.dumps(meta, sort_keys=True) + "\n")
        for k, params in enumerate(store.draws):
            imp = store.imputations[k] if k < len(store.imputations) else None
            fh.write(_params_record(k, params, imp) + "\n")


def read_store(path: str | Path) -> DrawStore:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    meta = json.loads(lines[0])
    store = DrawStore(
        seed=meta["seed"],
        burn_in=meta["burn_in"],
        thin=meta["thin"],
        scan_prob=meta["scan_prob"],
        complete=meta["complete"],
        censored_idx=np.array(meta["censored_idx"], dtype=int).reshape(-1, 2),
    )
    for line in lines[1:]:
        rec = json.loads(line)
        beta = np.array(rec["beta"])
        p = beta.size
        r = rec["gamma_rows"]
        omega = np.zeros((p, p))
        omega[np.tril_indices(p)] = rec["omega_tril"]
        omega = omega + np.tril(omega, -1).T
        store.draws.append(
            ModelParams(
                beta0=rec["beta0"],
                beta=beta,
                sigma2=rec["sigma2"],
                gamma=np.array(rec["gamma"]).reshape((r, p), order="F"),
                omega=omega,
            )
        )
        if "imputations" in rec:
            store.imputations.append(np.array(rec["imputations"]))
    return store


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def write_manifest(out_dir: str | Path, paths: list[Path]) -> Path:
    """Write MANIFEST.json listing every artifact with its sha256."""
    out_dir = Path(out_dir)
    manifest = {}
    for path in sorted(paths):
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        manifest[str(Path(path).relative_to(out_dir))] = digest
    target = out_dir / "MANIFEST.json"
    target.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return target
